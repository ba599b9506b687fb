"""ReLU networks in standard layered form, their weight-norm functional and algebra.

A network with ``L`` hidden layers is stored as ``L + 1`` affine maps
``(A_0, b_0), ..., (A_L, b_L)`` and computes
``A_L σ(A_{L-1} σ(... σ(A_0 x + b_0) ...) + b_{L-1}) + b_L``.

Weight matrices are dense ``numpy`` arrays for small layers and CSR sparse
matrices once a layer grows large; every routine here accepts either.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Sequence

import numpy as np
import scipy.sparse as sp

# Layers with more entries than this are stored sparse.
_DENSE_LIMIT = 250_000


class NetworkShapeError(ValueError):
    """Raised when layer shapes do not chain or an input has the wrong length."""


def _pack(A):
    """Choose dense or CSR storage for a weight matrix."""
    if sp.issparse(A):
        if A.shape[0] * A.shape[1] <= _DENSE_LIMIT:
            return np.asarray(A.toarray(), dtype=np.float64)
        return sp.csr_matrix(A, dtype=np.float64)
    A = np.asarray(A, dtype=np.float64)
    if A.ndim != 2:
        raise NetworkShapeError("weight matrices must be two-dimensional")
    if A.size > _DENSE_LIMIT and np.count_nonzero(A) < 0.25 * A.size:
        return sp.csr_matrix(A)
    return A


def _dense(A) -> np.ndarray:
    return A.toarray() if sp.issparse(A) else A


def _row_abs_sum(A) -> np.ndarray:
    if sp.issparse(A):
        return np.asarray(abs(A).sum(axis=1)).ravel()
    return np.abs(A).sum(axis=1)


def _finite(A) -> bool:
    data = A.data if sp.issparse(A) else A
    return bool(np.all(np.isfinite(data)))


def _block_diag(blocks):
    if any(sp.issparse(B) for B in blocks) or sum(B.shape[0] * B.shape[1] for B in blocks) > _DENSE_LIMIT:
        return sp.block_diag([sp.csr_matrix(B) for B in blocks], format="csr")
    rows = sum(B.shape[0] for B in blocks)
    cols = sum(B.shape[1] for B in blocks)
    out = np.zeros((rows, cols))
    r = c = 0
    for B in blocks:
        out[r:r + B.shape[0], c:c + B.shape[1]] = B
        r += B.shape[0]
        c += B.shape[1]
    return out


def _vstack(blocks):
    if any(sp.issparse(B) for B in blocks):
        return sp.vstack([sp.csr_matrix(B) for B in blocks], format="csr")
    return np.vstack(blocks)


def _hstack(blocks):
    if any(sp.issparse(B) for B in blocks):
        return sp.hstack([sp.csr_matrix(B) for B in blocks], format="csr")
    return np.hstack(blocks)


@dataclass(frozen=True, eq=False)
class ReluNetwork:
    """Immutable ReLU network ``x -> A_L σ(... σ(A_0 x + b_0) ...) + b_L``."""

    layers: tuple
    input_dim: int
    output_dim: int

    def __init__(self, layers: Sequence, input_dim: int | None = None, output_dim: int | None = None):
        packed = []
        for A, b in layers:
            A = _pack(A)
            b = np.array(b, dtype=np.float64).reshape(-1)
            packed.append((A, b))
        if not packed:
            raise NetworkShapeError("a network needs at least one affine layer")
        if input_dim is None:
            input_dim = packed[0][0].shape[1]
        if output_dim is None:
            output_dim = packed[-1][0].shape[0]
        for i, (A, b) in enumerate(packed):
            if A.shape[0] != b.shape[0]:
                raise NetworkShapeError(f"layer {i}: bias length {b.shape[0]} != rows {A.shape[0]}")
            if i > 0 and A.shape[1] != packed[i - 1][0].shape[0]:
                raise NetworkShapeError(f"layer {i}: columns do not chain with previous rows")
            if not (_finite(A) and np.all(np.isfinite(b))):
                raise NetworkShapeError(f"layer {i}: non-finite entries")
        if packed[0][0].shape[1] != input_dim:
            raise NetworkShapeError("columns of A_0 must equal input_dim")
        if packed[-1][0].shape[0] != output_dim:
            raise NetworkShapeError("rows of A_L must equal output_dim")
        object.__setattr__(self, "layers", tuple(packed))
        object.__setattr__(self, "input_dim", int(input_dim))
        object.__setattr__(self, "output_dim", int(output_dim))

    @property
    def depth(self) -> int:
        """Number of hidden layers."""
        return len(self.layers) - 1

    @property
    def width(self) -> int:
        """Largest hidden layer size (0 for an affine map)."""
        return max((A.shape[0] for A, _ in self.layers[:-1]), default=0)

    @property
    def hidden_sizes(self) -> list[int]:
        return [A.shape[0] for A, _ in self.layers[:-1]]

    def num_parameters(self) -> int:
        total = 0
        for A, b in self.layers:
            total += (A.nnz if sp.issparse(A) else A.size) + b.size
        return total

    def __call__(self, x):
        return evaluate(self, x)


def evaluate(net: ReluNetwork, x, chunk: int | None = None) -> np.ndarray:
    """Evaluate ``net`` at a single point (shape ``(d,)``) or a batch (shape ``(n, d)``).

    A scalar is accepted when ``input_dim == 1``. Single points return a vector of
    length ``output_dim``; batches return an ``(n, output_dim)`` array.
    """
    arr = np.asarray(x, dtype=np.float64)
    single = False
    if arr.ndim == 0:
        arr = arr.reshape(1, 1)
        single = True
    elif arr.ndim == 1:
        if net.input_dim == 1 and arr.shape[0] != 1:
            arr = arr.reshape(-1, 1)
        else:
            arr = arr.reshape(1, -1)
            single = True
    if arr.ndim != 2 or arr.shape[1] != net.input_dim:
        raise NetworkShapeError(f"input has dimension {arr.shape[-1]}, network expects {net.input_dim}")
    n = arr.shape[0]
    if chunk is None:
        widest = max(max(A.shape[0] for A, _ in net.layers), 1)
        chunk = max(1, min(n, 4_000_000 // widest))
    out = np.empty((n, net.output_dim))
    last = len(net.layers) - 1
    for start in range(0, n, chunk):
        H = arr[start:start + chunk].T
        for i, (A, b) in enumerate(net.layers):
            H = A @ H + b[:, None]
            if i < last:
                np.maximum(H, 0.0, out=H)
        out[start:start + chunk] = H.T
    return out[0] if single else out


def augmented_norm(A, b) -> float:
    """Maximum row 1-norm of the augmented matrix ``(A, b)``."""
    if A.shape[0] == 0:
        return 0.0
    return float(np.max(_row_abs_sum(A) + np.abs(b)))


def operator_norm(A) -> float:
    """Maximum row 1-norm of ``A`` (the ∞→∞ operator norm)."""
    if A.shape[0] == 0:
        return 0.0
    return float(np.max(_row_abs_sum(A)))


def norm_kappa(net: ReluNetwork) -> float:
    """Weight-norm functional: output-layer norm times clamped hidden-layer norms."""
    value = augmented_norm(*net.layers[-1])
    for A, b in net.layers[:-1]:
        value *= max(augmented_norm(A, b), 1.0)
    return value


@dataclass(frozen=True)
class NormBudget:
    kappa: float
    cap: float | None = None

    def __post_init__(self):
        if self.kappa < 0:
            raise ValueError("kappa must be nonnegative")
        if self.cap is not None and self.kappa > self.cap:
            raise ValueError(f"kappa {self.kappa} exceeds cap {self.cap}")


def rescale(net: ReluNetwork) -> ReluNetwork:
    """Push hidden-layer norms above 1 into the output layer.

    With ``k_l = max(||(A_l, b_l)||, 1)`` every hidden layer is divided by ``k_l``
    and its bias by the running product, so the hidden activations shrink by the
    running product, and the output matrix is multiplied back by the full product.
    Positive homogeneity of σ keeps the function unchanged.
    """
    new_layers = []
    running = 1.0
    for A, b in net.layers[:-1]:
        k = max(augmented_norm(A, b), 1.0)
        new_layers.append((A / k, b / (running * k)))
        running *= k
    A, b = net.layers[-1]
    new_layers.append((A * running, b.copy()))
    return ReluNetwork(new_layers, net.input_dim, net.output_dim)


def lipschitz_upper(net: ReluNetwork) -> float:
    """Certified ∞-norm Lipschitz bound: product of the operator norms of all A_l."""
    value = 1.0
    for A, _ in net.layers:
        value *= operator_norm(A)
    return value


# ---------------------------------------------------------------- builders

def affine_net(A, b=None) -> ReluNetwork:
    """Depth-zero network computing ``A x + b``."""
    A = np.atleast_2d(np.asarray(A, dtype=np.float64)) if not sp.issparse(A) else A
    if b is None:
        b = np.zeros(A.shape[0])
    return ReluNetwork([(A, b)])


def relu_identity(dim: int, depth: int = 1) -> ReluNetwork:
    """``depth`` identity hidden layers: computes σ(x), i.e. the identity on x ≥ 0."""
    eye = np.eye(dim)
    return ReluNetwork([(eye, np.zeros(dim))] * (depth + 1))


def identity_net(dim: int, depth: int = 1) -> ReluNetwork:
    """Exact identity on all of R^dim via x = σ(x) − σ(−x), with 2·dim neurons per layer."""
    if depth == 0:
        return affine_net(np.eye(dim))
    eye = np.eye(dim)
    first = (np.vstack([eye, -eye]), np.zeros(2 * dim))
    middle = (np.eye(2 * dim), np.zeros(2 * dim))
    last = (np.hstack([eye, -eye]), np.zeros(dim))
    return ReluNetwork([first] + [middle] * (depth - 1) + [last])


def _lift_affine(net: ReluNetwork) -> ReluNetwork:
    """Rewrite a depth-zero net as an equivalent depth-one net."""
    A, b = net.layers[0]
    k = A.shape[0]
    eye = np.eye(k)
    return ReluNetwork([(_vstack([A, -A]), np.concatenate([b, -b])), (np.hstack([eye, -eye]), np.zeros(k))],
                       net.input_dim, net.output_dim)


def pad_depth(net: ReluNetwork, depth: int) -> ReluNetwork:
    """Insert identity layers before the output map until ``net.depth == depth``.

    Hidden activations are nonnegative, so σ acting on an identity layer returns them
    unchanged.
    """
    if depth < net.depth:
        raise ValueError("cannot reduce depth")
    if depth == net.depth:
        return net
    if net.depth == 0:
        net = _lift_affine(net)
    width = net.layers[-1][0].shape[1]
    eye = sp.identity(width, format="csr") if width * width > _DENSE_LIMIT else np.eye(width)
    pad = [(eye, np.zeros(width))] * (depth - net.depth)
    layers = list(net.layers[:-1]) + pad + [net.layers[-1]]
    return ReluNetwork(layers, net.input_dim, net.output_dim)


def compose(outer: ReluNetwork, inner: ReluNetwork, rescale_first: bool = True) -> ReluNetwork:
    """Network for ``outer(inner(x))``; the inner output map merges into outer's first layer.

    When ``rescale_first`` is set, both operands are normalized first so the result
    satisfies ``κ ≤ κ(outer)·max(κ(inner), 1)``. Builders that rely on exact
    dyadic weights pass ``False``.
    """
    if inner.output_dim != outer.input_dim:
        raise NetworkShapeError(f"inner output {inner.output_dim} != outer input {outer.input_dim}")
    if rescale_first:
        outer, inner = rescale(outer), rescale(inner)
    A_in, b_in = inner.layers[-1]
    A_out, b_out = outer.layers[0]
    merged = (A_out @ A_in, A_out @ b_in + b_out)
    layers = list(inner.layers[:-1]) + [merged] + list(outer.layers[1:])
    return ReluNetwork(layers, inner.input_dim, outer.output_dim)


def compose_chain(nets: Sequence[ReluNetwork], rescale_first: bool = True) -> ReluNetwork:
    """Compose ``nets[-1] ∘ ... ∘ nets[0]`` (applied left to right)."""
    result = nets[0]
    for net in nets[1:]:
        result = compose(net, result, rescale_first)
    return result


def _stack(nets: Sequence[ReluNetwork], shared_input: bool, rescale_first: bool) -> ReluNetwork:
    if rescale_first:
        nets = [rescale(n) for n in nets]
    depth = max(n.depth for n in nets)
    nets = [pad_depth(n, depth) for n in nets]
    if shared_input:
        first = (_vstack([n.layers[0][0] for n in nets]), np.concatenate([n.layers[0][1] for n in nets]))
    else:
        first = (_block_diag([n.layers[0][0] for n in nets]), np.concatenate([n.layers[0][1] for n in nets]))
    layers = [first]
    for i in range(1, depth + 1):
        layers.append((_block_diag([n.layers[i][0] for n in nets]), np.concatenate([n.layers[i][1] for n in nets])))
    input_dim = nets[0].input_dim if shared_input else sum(n.input_dim for n in nets)
    return ReluNetwork(layers, input_dim, sum(n.output_dim for n in nets))


def concatenate(a: ReluNetwork, b: ReluNetwork, rescale_first: bool = True) -> ReluNetwork:
    """Network for ``x -> (a(x), b(x))`` on a shared input; the shallower operand is depth-padded."""
    if a.input_dim != b.input_dim:
        raise NetworkShapeError("concatenated networks need the same input dimension")
    return _stack([a, b], True, rescale_first)


def concatenate_many(nets: Sequence[ReluNetwork], rescale_first: bool = True) -> ReluNetwork:
    if len({n.input_dim for n in nets}) != 1:
        raise NetworkShapeError("concatenated networks need the same input dimension")
    return _stack(list(nets), True, rescale_first)


def parallel(nets: Sequence[ReluNetwork], rescale_first: bool = True) -> ReluNetwork:
    """Network for ``(x_1, ..., x_m) -> (n_1(x_1), ..., n_m(x_m))`` on split inputs."""
    return _stack(list(nets), False, rescale_first)


def linear_sum(coeffs: Sequence[float], nets: Sequence[ReluNetwork], rescale_first: bool = True) -> ReluNetwork:
    """Network for ``Σ c_i n_i(x)``; all operands share input and output dimensions."""
    if len({n.input_dim for n in nets}) != 1 or len({n.output_dim for n in nets}) != 1:
        raise NetworkShapeError("summed networks need matching input and output dimensions")
    stacked = _stack(list(nets), True, rescale_first)
    k = nets[0].output_dim
    A_last, b_last = stacked.layers[-1]
    selector = np.hstack([c * np.eye(k) for c in coeffs])
    new_last = (sp.csr_matrix(selector) @ A_last if sp.issparse(A_last) else selector @ A_last,
                selector @ b_last)
    return ReluNetwork(list(stacked.layers[:-1]) + [new_last], stacked.input_dim, k)


def linear_combine(c1: float, a: ReluNetwork, c2: float, b: ReluNetwork, rescale_first: bool = True) -> ReluNetwork:
    """Network for ``c1·a(x) + c2·b(x)`` with ``κ ≤ |c1|κ_a + |c2|κ_b``."""
    return linear_sum([c1, c2], [a, b], rescale_first)


def post_affine(net: ReluNetwork, A, b=None) -> ReluNetwork:
    """Apply an affine map to the output of ``net`` (merged into the output layer)."""
    A = np.atleast_2d(np.asarray(A, dtype=np.float64))
    b = np.zeros(A.shape[0]) if b is None else np.asarray(b, dtype=np.float64)
    A_last, b_last = net.layers[-1]
    new_A = (sp.csr_matrix(A) @ A_last) if sp.issparse(A_last) else A @ A_last
    return ReluNetwork(list(net.layers[:-1]) + [(new_A, A @ b_last + b)], net.input_dim, A.shape[0])


def pre_affine(net: ReluNetwork, A, b=None) -> ReluNetwork:
    """Precompose ``net`` with ``x -> A x + b`` (merged into the first layer)."""
    A = np.atleast_2d(np.asarray(A, dtype=np.float64))
    b = np.zeros(A.shape[0]) if b is None else np.asarray(b, dtype=np.float64)
    A0, b0 = net.layers[0]
    new_A = (A0 @ sp.csr_matrix(A)) if sp.issparse(A0) else A0 @ A
    new_b = A0 @ b + b0
    return ReluNetwork([(new_A, new_b)] + list(net.layers[1:]), A.shape[1], net.output_dim)


def clip_net(dim: int, bound: float) -> ReluNetwork:
    """One-hidden-layer net applying (x ∨ −B) ∧ B coordinatewise via four ReLUs per coordinate."""
    B = float(bound)
    s = B + 1.0
    rows = np.array([[1.0], [-1.0], [1.0 / s], [-1.0 / s]])
    bias = np.array([0.0, 0.0, -B / s, -B / s])
    out = np.array([[1.0, -1.0, -s, s]])
    eye = np.eye(dim)
    return ReluNetwork([(np.kron(eye, rows), np.tile(bias, dim)), (np.kron(eye, out), np.zeros(dim))])


def clip_output(net: ReluNetwork, B: float) -> ReluNetwork:
    """Clip every output coordinate of ``net`` to ``[−B, B]`` (adds one hidden layer)."""
    if B <= 0:
        raise ValueError("clipping bound must be positive")
    return compose(clip_net(net.output_dim, B), net, rescale_first=False)


# ---------------------------------------------------------------- serialization

def to_dict(net: ReluNetwork) -> dict:
    return {
        "input_dim": net.input_dim,
        "output_dim": net.output_dim,
        "layers": [{"A": _dense(A).tolist(), "b": b.tolist()} for A, b in net.layers],
    }


def from_dict(data: dict) -> ReluNetwork:
    layers = []
    for layer in data["layers"]:
        A = np.array(layer["A"], dtype=np.float64)
        b = np.array(layer["b"], dtype=np.float64)
        if A.ndim != 2:
            A = A.reshape(b.shape[0], -1)
        layers.append((A, b))
    return ReluNetwork(layers, int(data["input_dim"]), int(data["output_dim"]))


def to_json(net: ReluNetwork) -> str:
    return json.dumps(to_dict(net))


def from_json(text: str) -> ReluNetwork:
    return from_dict(json.loads(text))


def dense_layers(net: ReluNetwork) -> list[tuple[np.ndarray, np.ndarray]]:
    """Layers as dense arrays (copies), for inspection and tests."""
    return [(_dense(A).copy(), b.copy()) for A, b in net.layers]
