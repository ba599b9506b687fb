"""Networks for x², xy, d-fold products and monomials.

Two families: a depth-driven one built from composed teeth (tent) functions, with
error decaying like 4^{−k} in the number of stages k, and a shallow
norm-constrained one built from Riemann sums of ReLUs with κ bounded
independently of accuracy.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .net_core import (
    ReluNetwork,
    compose,
    concatenate_many,
    identity_net,
    parallel,
    post_affine,
    pre_affine,
    relu_identity,
)

MAX_TEETH = 30
MAX_DPRODUCT = 16
MAX_MONOMIAL_ORDER = 12


@dataclass(frozen=True)
class TeethConfig:
    stages: int

    def __post_init__(self):
        if self.stages < 1:
            raise ValueError("stages must be at least 1")


def teeth_stages(W: int, L: int) -> int:
    """k = nL with n = max{n : (n−1)2^{n−1} + 1 ≤ W}; then 2^{−2k} ≤ W^{−L}."""
    n = 1
    while n * 2 ** n + 1 <= W:
        n += 1
    return n * L


def _check_teeth(k: int):
    if not 1 <= k <= MAX_TEETH:
        raise ValueError(f"teeth stages k={k} outside 1..{MAX_TEETH}")


# ------------------------------------------------------------ depth (teeth) family

def square_net_depth(k: int) -> ReluNetwork:
    """f_k(x) = x − Σ_{i≤k} T_i(x)/4^i, the interpolant of x² at j/2^k on [0,1].

    T_1 = 2σ(x) − 4σ(x − ½) + 2σ(x − 1) and T_i = T_1 ∘ T_{i−1}. Hidden layer i holds
    the ReLU pieces of T_i, a carried σ(x) and the running sum Σ_{j<i} T_j/4^j.
    Width ≤ 4, depth k.
    """
    _check_teeth(k)
    layers = []
    # layer 1: σ(x), σ(x − ½), σ(x − 1)
    layers.append((np.array([[1.0], [1.0], [1.0]]), np.array([0.0, -0.5, -1.0])))
    tooth_prev = np.array([2.0, -4.0, 2.0])  # T_1 from layer-1 neurons
    carry_prev = 0  # index of σ(x) in previous layer
    acc_prev = None  # index of running sum in previous layer
    for i in range(2, k + 1):
        n_prev = layers[-1][0].shape[0]
        A = np.zeros((4, n_prev))
        b = np.zeros(4)
        t_row = np.zeros(n_prev)
        t_row[:tooth_prev.size] = tooth_prev
        A[0] = t_row  # σ(T_{i−1})
        A[1] = t_row  # σ(T_{i−1} − ½)
        b[1] = -0.5
        A[2, carry_prev] = 1.0
        A[3] = t_row / 4.0 ** (i - 1)
        if acc_prev is not None:
            A[3, acc_prev] += 1.0
        layers.append((A, b))
        tooth_prev = np.array([2.0, -4.0])
        carry_prev, acc_prev = 2, 3
    n_prev = layers[-1][0].shape[0]
    out = np.zeros((1, n_prev))
    out[0, :tooth_prev.size] = -tooth_prev / 4.0 ** k
    out[0, carry_prev] += 1.0
    if acc_prev is not None:
        out[0, acc_prev] -= 1.0
    layers.append((out, np.zeros(1)))
    return ReluNetwork(layers)


def square_depth_bound(k: int) -> float:
    return 2.0 ** (-2 * (k + 1))


def product_net_depth(k: int) -> ReluNetwork:
    """φ(x, y) = 8f_k((x+y+2)/4) − 8f_k((x+1)/4) − 8f_k((y+1)/4) − σ(x+y+2) + 1 ≈ xy on [−1,1]²."""
    _check_teeth(k)
    sq = square_net_depth(k)
    parts = [
        pre_affine(sq, [[0.25, 0.25]], [0.5]),
        pre_affine(sq, [[0.25, 0.0]], [0.25]),
        pre_affine(sq, [[0.0, 0.25]], [0.25]),
        pre_affine(relu_identity(1, k), [[1.0, 1.0]], [2.0]),
    ]
    net = concatenate_many(parts, rescale_first=False)
    return post_affine(net, [[8.0, -8.0, -8.0, -1.0]], [1.0])


def product_depth_bound(k: int) -> float:
    """Error bound in the stated contract form 6·2^{−2(k+1)}."""
    return 6.0 * 2.0 ** (-2 * (k + 1))


def product_depth_bound_derived(k: int) -> float:
    """Bound that follows from the construction: 4·2·(2·E) with E = 2^{−2(k+1)}, i.e. 16E ≤ 6·2^{−2k}."""
    return 16.0 * 2.0 ** (-2 * (k + 1))


def _unit_clip() -> ReluNetwork:
    """σ(t + 1) − σ(t − 1) − 1: clamp to [−1, 1]."""
    return ReluNetwork([(np.array([[1.0], [1.0]]), np.array([1.0, -1.0])),
                        (np.array([[1.0, -1.0]]), np.array([-1.0]))])


def _factor_list(s) -> list[int]:
    s = [int(v) for v in s]
    if any(v < 0 for v in s):
        raise ValueError("multi-index entries must be nonnegative")
    return [i for i, v in enumerate(s) for _ in range(v)]


def monomial_net(s, k: int) -> ReluNetwork:
    """P_s ≈ x^s on [−1,1]^d: clamped products applied one factor at a time."""
    factors = _factor_list(s)
    d = len(s)
    m = len(factors)
    if m < 2:
        raise ValueError("monomial order must be at least 2")
    if m > MAX_MONOMIAL_ORDER:
        raise ValueError(f"monomial order {m} exceeds {MAX_MONOMIAL_ORDER}")
    _check_teeth(k)
    prod = compose(_unit_clip(), product_net_depth(k), rescale_first=False)
    carry = identity_net(d, prod.depth)
    stages = []
    for c in factors[1:]:
        select = np.zeros((2, 1 + d))
        select[0, 0] = 1.0
        select[1, 1 + c] = 1.0
        pass_x = np.hstack([np.zeros((d, 1)), np.eye(d)])
        stage = concatenate_many([pre_affine(prod, select), pre_affine(carry, pass_x)], rescale_first=False)
        stages.append(stage)
    net = stages[0]
    for stage in stages[1:]:
        net = compose(stage, net, rescale_first=False)
    start = np.vstack([np.eye(d)[factors[0]], np.eye(d)])
    net = pre_affine(net, start)
    pick = np.zeros((1, 1 + d))
    pick[0, 0] = 1.0
    return post_affine(net, pick)


def monomial_bound(m: int, k: int) -> float:
    return 6.0 * (m - 1) * 2.0 ** (-2 * (k + 1))


def monomial_bound_derived(m: int, k: int) -> float:
    return (m - 1) * product_depth_bound_derived(k)


# ------------------------------------------------------------ norm-constrained family

def _riemann_offsets(k: int) -> np.ndarray:
    return (2.0 * np.arange(1, k + 1) - 1.0) / (2.0 * k)


def square_net_norm(k: int) -> ReluNetwork:
    """φ_k(x) = (2/k) Σ σ(x − (2i−1)/(2k)) with unit-norm hidden rows, so κ = 3."""
    if k < 1:
        raise ValueError("k must be at least 1")
    t = _riemann_offsets(k)
    scale = 1.0 + t
    A0 = (1.0 / scale).reshape(-1, 1)
    b0 = -t / scale
    A1 = (2.0 / k * scale).reshape(1, -1)
    return ReluNetwork([(A0, b0), (A1, np.zeros(1))])


def square_norm_bound(k: int) -> float:
    return 1.0 / (2.0 * k * k)


def product_net_norm(k: int) -> ReluNetwork:
    """ψ_k(x, y) = χ(2φ̃(x/2 + y/2) − 2φ̃(x/2) − 2φ̃(y/2)) with φ̃(u) = φ_k(u) + φ_k(−u).

    χ clamps to [−1, 1]. ψ_k ∈ NN(6k, 2) with κ ≤ 216.
    """
    if k < 1:
        raise ValueError("k must be at least 1")
    t = _riemann_offsets(k)
    scale = 1.0 + t
    rows, bias, weights = [], [], []
    for direction, coeff in (((0.5, 0.5), 2.0), ((0.5, 0.0), -2.0), ((0.0, 0.5), -2.0)):
        for sign in (1.0, -1.0):
            for ti, si in zip(t, scale):
                rows.append([sign * direction[0] / si, sign * direction[1] / si])
                bias.append(-ti / si)
                weights.append(coeff * 2.0 / k * si)
    A0 = np.array(rows)
    b0 = np.array(bias)
    w = np.array(weights)
    A1 = np.vstack([w, -w, 0.5 * w, -0.5 * w])
    b1 = np.array([0.0, 0.0, -0.5, -0.5])
    A2 = np.array([[1.0, -1.0, -2.0, 2.0]])
    return ReluNetwork([(A0, b0), (A1, b1), (A2, np.zeros(1))])


def product_norm_bound(k: int) -> float:
    return 3.0 / (k * k)


def dproduct_net(d: int, k: int) -> ReluNetwork:
    """Binary tree of ψ_k over ⌈log2 d⌉ levels; missing inputs are the constant 1."""
    if not 2 <= d <= MAX_DPRODUCT:
        raise ValueError(f"d={d} outside 2..{MAX_DPRODUCT}")
    if k < 1:
        raise ValueError("k must be at least 1")
    levels = math.ceil(math.log2(d))
    width_in = 2 ** levels
    base = product_net_norm(k)
    net = None
    for level in range(levels):
        count = width_in // 2 ** (level + 1)
        layer_net = parallel([base] * count)
        net = layer_net if net is None else compose(layer_net, net)
    pad = np.zeros((width_in, d))
    pad[:d, :d] = np.eye(d)
    offset = np.zeros(width_in)
    offset[d:] = 1.0
    return pre_affine(net, pad, offset)


def dproduct_bound(d: int, k: int) -> float:
    return 6.0 * d / (k * k)


def dproduct_kappa_cap(d: int) -> float:
    return 6.0 ** (3 * math.ceil(math.log2(d)))
