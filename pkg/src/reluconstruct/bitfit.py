"""Bit extraction, exact fitting of binary samples, and approximate fitting of [0,1] samples.

All three networks take integer-like inputs and rely on dyadic weights, so their
builders never rescale (rescaling would perturb the exact powers of two).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .cpwl import interpolate_1d
from .net_core import (
    ReluNetwork,
    compose,
    compose_chain,
    concatenate,
    concatenate_many,
    parallel,
    post_affine,
    pre_affine,
    relu_identity,
)

MAX_BITS = 20


class PrecisionGuardError(ValueError):
    """Requested size exceeds what 64-bit floats can represent exactly."""


@dataclass(frozen=True)
class BitString:
    bits: tuple

    def __post_init__(self):
        if any(b not in (0, 1) for b in self.bits):
            raise ValueError("bits must be 0 or 1")

    @property
    def value(self) -> float:
        """Bin 0.x_1 x_2 ... x_L."""
        return float(sum(b * 2.0 ** -(j + 1) for j, b in enumerate(self.bits)))


def _extract_stage(L: int) -> ReluNetwork:
    """One stage ψ: (t1, t2, t3) -> (y1, y2, y3) in NN(8, 2).

    T(t) = σ(2^L t − 2^{L−1} + 1) − σ(2^L t − 2^{L−1}) reads the leading bit,
    y1 = σ(2σ(t1) − T(t1)) drops it, y2 adds it when t3 = 1, and
    y3 = σ(t3 − 1 + L) − L counts down the requested position.
    """
    big = 2.0 ** L
    half = 2.0 ** (L - 1)
    # hidden 1: σ(t1), σ(2^L t1 − 2^{L−1} + 1), σ(2^L t1 − 2^{L−1}), σ(t2),
    #           σ(t3), σ(t3 − 2), σ(t3 − 1), σ(t3 − 1 + L)
    A0 = np.array([
        [1, 0, 0],
        [big, 0, 0],
        [big, 0, 0],
        [0, 1, 0],
        [0, 0, 1],
        [0, 0, 1],
        [0, 0, 1],
        [0, 0, 1],
    ], dtype=np.float64)
    b0 = np.array([0, -half + 1, -half, 0, 0, -2, -1, -1 + L], dtype=np.float64)
    # hidden 2: σ(2σ(t1) − T), σ(σ(t2)), σ(δ + T − 1), σ(σ(t3 − 1 + L))
    A1 = np.array([
        [2, -1, 1, 0, 0, 0, 0, 0],
        [0, 0, 0, 1, 0, 0, 0, 0],
        [0, 1, -1, 0, 1, 1, -2, 0],
        [0, 0, 0, 0, 0, 0, 0, 1],
    ], dtype=np.float64)
    b1 = np.array([0, 0, -1, 0], dtype=np.float64)
    A2 = np.array([
        [1, 0, 0, 0],
        [0, 1, 1, 0],
        [0, 0, 0, 1],
    ], dtype=np.float64)
    b2 = np.array([0, 0, -L], dtype=np.float64)
    return ReluNetwork([(A0, b0), (A1, b1), (A2, b2)])


def bit_extract_net(L: int) -> ReluNetwork:
    """Network φ(x, ℓ) in NN(8, 2L) returning the ℓ-th bit of an L-bit dyadic x."""
    if not 1 <= L <= MAX_BITS:
        raise PrecisionGuardError(f"L={L} outside supported range 1..{MAX_BITS}")
    stage = _extract_stage(L)
    net = compose_chain([stage] * L, rescale_first=False)
    # inputs (x, ℓ) -> (x, 0, ℓ); output y2.
    net = pre_affine(net, [[1.0, 0.0], [0.0, 0.0], [0.0, 1.0]])
    return post_affine(net, [[0.0, 1.0, 0.0]])


def _pad_bits(bits, length: int) -> np.ndarray:
    arr = np.asarray(bits, dtype=np.int64).reshape(-1)
    if arr.size > length:
        raise ValueError(f"expected at most {length} entries, got {arr.size}")
    if np.any((arr != 0) & (arr != 1)):
        raise ValueError("binary samples must be 0 or 1")
    out = np.zeros(length, dtype=np.int64)
    out[:arr.size] = arr
    return out


def binary_fit_net(bits, W: int, L: int) -> ReluNetwork:
    """Network in NN(8W+4, 4L) with φ(i) = ξ_i for i = 0..W²L²−1.

    Index i = mL + ℓ: φ_1 maps i to y_m = Bin 0.ξ_{mL}…ξ_{mL+L−1}, φ_2 maps i to ℓ, and
    bit extraction reads bit ℓ+1 of y_m.
    """
    if W < 6 or L < 2:
        raise ValueError("binary fitting needs W ≥ 6 and L ≥ 2")
    if L > MAX_BITS:
        raise PrecisionGuardError(f"L={L} exceeds {MAX_BITS}")
    total = W * W * L * L
    xi = _pad_bits(bits, total)
    M = W * W * L
    weights = 2.0 ** -np.arange(1, L + 1)
    y = np.append(xi.reshape(M, L) @ weights, 1.0)
    value_samples = [(0.0, y[0])]
    index_samples = [(0.0, 0.0)]
    for m in range(1, M + 1):
        value_samples.append((m * L - 1.0, y[m - 1]))
        value_samples.append((float(m * L), y[m]))
        index_samples.append((m * L - 1.0, float(L - 1)))
        index_samples.append((float(m * L), 0.0))
    value_net = interpolate_1d(value_samples, 4 * W, L)
    index_net = interpolate_1d(index_samples, 4 * W, L)
    front = concatenate(value_net, index_net, rescale_first=False)
    front = post_affine(front, [[1.0, 0.0], [0.0, 1.0]], [0.0, 1.0])
    return compose(bit_extract_net(L), front, rescale_first=False)


def truncation_bits(values, J: int) -> np.ndarray:
    """Bits b_{i,j} (j = 1..J) of the J-bit truncation of each ξ_i ∈ [0,1]."""
    vals = np.asarray(values, dtype=np.float64)
    ints = np.minimum(np.floor(vals * 2.0 ** J), 2.0 ** J - 1).astype(np.int64)
    shifts = np.arange(J - 1, -1, -1)
    return (ints[:, None] >> shifts[None, :]) & 1


def data_fit_precision(W: int, L: int, r: int) -> int:
    """J = ⌈2r log2(WL)⌉ truncation bits, so 2^{−J} ≤ (WL)^{−2r}."""
    J = int(np.ceil(2 * r * np.log2(W * L)))
    while 2.0 ** -J > (W * L) ** (-2.0 * r):
        J += 1
    return J


def data_fit_layout(W: int, L: int, r: int) -> tuple[int, int, int]:
    """(J, parallel groups P, serial stages S) with P·S ≥ J inside the stated size budget."""
    J = data_fit_precision(W, L, r)
    P = min(J, 2 * r * int(np.ceil(np.log2(2 * W))))
    S = -(-J // P)
    return J, P, S


def data_fit_net(values, W: int, L: int, r: int) -> ReluNetwork:
    """Network with |φ(i) − ξ_i| ≤ (WL)^{−2r} at every index and outputs in [0,1].

    φ = clip(Σ_j 2^{−j} φ_j) where φ_j exactly fits the j-th truncation bits. The J
    binary fits run in P parallel columns over S serial stages; two carried channels
    hold σ(input) and the running (nonnegative) sum.
    """
    if W < 6 or L < 2 or r < 1:
        raise ValueError("data fitting needs W ≥ 6, L ≥ 2, r ≥ 1")
    total = W * W * L * L
    vals = np.asarray(values, dtype=np.float64).reshape(-1)
    if vals.size > total:
        raise ValueError(f"expected at most {total} values")
    if np.any((vals < 0) | (vals > 1)):
        raise ValueError("values must lie in [0,1]")
    padded = np.zeros(total)
    padded[:vals.size] = vals
    J, P, S = data_fit_layout(W, L, r)
    bits = truncation_bits(padded, J)

    stages = []
    for s in range(S):
        cols = [j for j in range(s * P, min((s + 1) * P, J))]
        fits = [binary_fit_net(bits[:, j], W, L) for j in cols]
        depth = max(f.depth for f in fits)
        # Each stage maps (t, acc) -> (σ(t), acc + Σ 2^{−j} φ_j(σ(t))).
        body = concatenate_many([relu_identity(1, depth)] + fits, rescale_first=False)
        carry = parallel([body, relu_identity(1, depth)], rescale_first=False)
        coeff = [2.0 ** -(j + 1) for j in cols]
        out = np.zeros((2, 1 + len(cols) + 1))
        out[0, 0] = 1.0
        out[1, 1:1 + len(cols)] = coeff
        out[1, -1] = 1.0
        stages.append(post_affine(carry, out))
    net = compose_chain(stages, rescale_first=False)
    net = pre_affine(net, [[1.0], [0.0]])
    # clip to [0,1]: σ(acc) − σ(acc − 1)
    clip = ReluNetwork([(np.array([[0.0, 1.0], [0.0, 1.0]]), np.array([0.0, -1.0])),
                        (np.array([[1.0, -1.0]]), np.array([0.0]))])
    return compose(clip, net, rescale_first=False)
