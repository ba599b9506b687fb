"""Continuous piecewise-linear curves R -> R^d and their compilation into ReLU networks.

The compiler follows the hat-function construction: breakpoints are split into
``L`` blocks of ``qW`` consecutive points, each block is realized by two hidden
layers (``W`` shifted ReLUs, then ReLUs of sign/separation groups of hat
functions), one channel carries ``σ(u)`` through all layers and ``d`` collector
neurons accumulate the output, shifted by certified constants to stay
nonnegative.
"""

from __future__ import annotations

import heapq
import json
from dataclasses import dataclass

import numpy as np

from .net_core import ReluNetwork, post_affine


class CapacityError(ValueError):
    """Too many breakpoints or samples for the requested width/depth budget."""


@dataclass(frozen=True, eq=False)
class CpwlPath:
    """Curve that interpolates ``values`` at ``breakpoints`` and is constant outside them."""

    breakpoints: np.ndarray
    values: np.ndarray

    def __init__(self, breakpoints, values):
        bp = np.asarray(breakpoints, dtype=np.float64).reshape(-1)
        vals = np.asarray(values, dtype=np.float64)
        if vals.ndim == 1:
            vals = vals.reshape(-1, 1)
        if bp.size < 1 or vals.shape[0] != bp.size:
            raise ValueError("need one value per breakpoint")
        if vals.shape[1] < 1:
            raise ValueError("values must have dimension d >= 1")
        if np.any(np.diff(bp) <= 0):
            raise ValueError("breakpoints must be strictly increasing")
        if not (np.all(np.isfinite(bp)) and np.all(np.isfinite(vals))):
            raise ValueError("breakpoints and values must be finite")
        object.__setattr__(self, "breakpoints", bp)
        object.__setattr__(self, "values", vals)

    @property
    def dim(self) -> int:
        return self.values.shape[1]

    @property
    def interior_count(self) -> int:
        return self.breakpoints.size - 2

    def to_json(self) -> str:
        return json.dumps({"breakpoints": self.breakpoints.tolist(), "values": self.values.tolist()})

    @classmethod
    def from_json(cls, text: str) -> "CpwlPath":
        data = json.loads(text)
        return cls(data["breakpoints"], data["values"])


def cpwl_eval(path: CpwlPath, t) -> np.ndarray:
    """Evaluate the curve; a scalar gives a length-d vector, an array gives shape (n, d)."""
    t_arr = np.asarray(t, dtype=np.float64)
    flat = t_arr.reshape(-1)
    out = np.column_stack([np.interp(flat, path.breakpoints, path.values[:, c]) for c in range(path.dim)])
    return out[0] if t_arr.ndim == 0 else out


def _ramp_net(x0: float, x1: float, y0: np.ndarray, y1: np.ndarray) -> ReluNetwork:
    """y0 + (y1 − y0)(σ(u) − σ(u − 1)) with u = (x − x0)/(x1 − x0): one hidden layer of width 2."""
    span = x1 - x0
    A0 = np.array([[1.0 / span], [1.0 / span]])
    b0 = np.array([-x0 / span, -x0 / span - 1.0])
    delta = (y1 - y0).reshape(-1, 1)
    A1 = np.hstack([delta, -delta])
    return ReluNetwork([(A0, b0), (A1, y0.copy())])


def _pad_breakpoints(u: np.ndarray, y: np.ndarray, target_interior: int):
    """Insert interpolated breakpoints into the widest gaps until the interior count is reached."""
    missing = target_interior - (u.size - 2)
    if missing <= 0:
        return u, y
    # Split each gap into several equal pieces; the widest current piece wins each round.
    heap = [(-(u[i + 1] - u[i]), i, 1) for i in range(u.size - 1)]
    heapq.heapify(heap)
    pieces = np.ones(u.size - 1, dtype=int)
    for _ in range(missing):
        _, i, p = heapq.heappop(heap)
        pieces[i] = p + 1
        heapq.heappush(heap, (-(u[i + 1] - u[i]) / (p + 1), i, p + 1))
    new_u = [u[0]]
    new_y = [y[0]]
    for i in range(u.size - 1):
        for j in range(1, pieces[i] + 1):
            frac = j / pieces[i]
            if j == pieces[i]:
                new_u.append(u[i + 1])
                new_y.append(y[i + 1])
            else:
                new_u.append(u[i] + frac * (u[i + 1] - u[i]))
                new_y.append(y[i] + frac * (y[i + 1] - y[i]))
    return np.array(new_u), np.array(new_y)


def _hat_coefficients(xs: np.ndarray, targets: np.ndarray, q: int, W: int) -> np.ndarray:
    """Coefficients of the hat basis for one block and one output coordinate.

    ``xs`` holds the block's local breakpoints x'_0..x'_{qW+1}; hat n (1 ≤ n ≤ qW)
    vanishes left of x'_{n-1}, peaks with value 1 at the principal breakpoint
    x'_{jq} (j = ⌈n/q⌉) and vanishes right of x'_{jq+1}. The interpolation system is
    block lower-triangular with one q×q block per principal breakpoint.
    """
    coeffs = np.zeros(q * W)
    for j in range(1, W + 1):
        peak = xs[j * q]
        lo = (j - 1) * q + 1
        for i in range(lo, j * q + 1):
            acc = targets[i - 1]
            for n in range(lo, i):
                acc -= coeffs[n - 1] * (xs[i] - xs[n - 1]) / (peak - xs[n - 1])
            coeffs[i - 1] = acc / ((xs[i] - xs[i - 1]) / (peak - xs[i - 1]))
    return coeffs


def _group_function(xs, q, W, hats):
    """Knot data (left bias, slope on [0, P_1], kink weights at P_j) of one group's g.

    ``hats`` is a list of (j, m, c) with c > 0 meaning σ(g) must equal c·h_{m,j}.
    Principal breakpoints of distinct hats in a group are at least 3 apart, so each
    value of g at a principal breakpoint is pinned by at most one hat.
    """
    P = np.array([xs[j * q] for j in range(1, W + 1)])
    vals = [None] * (W + 1)  # 1-based
    slope_left = 0.0
    slope_right = 0.0
    left_set = False
    top = max(c for _, _, c in hats)
    for j, m, c in hats:
        vals[j] = c
        zero_left = xs[j * q - m]
        rise = c / (P[j - 1] - zero_left)
        if j >= 2:
            vals[j - 1] = c - rise * (P[j - 1] - P[j - 2])
        else:
            slope_left = rise
            left_set = True
        fall = c / (xs[j * q + 1] - P[j - 1])
        if j <= W - 1:
            vals[j + 1] = c - fall * (P[j] - P[j - 1])
        else:
            slope_right = -fall
    for j in range(1, W + 1):
        if vals[j] is None:
            vals[j] = -top
    V = np.array(vals[1:], dtype=np.float64)
    if not left_set:
        slope_left = 0.0
    bias = V[0] - slope_left * P[0]
    seg = np.diff(V) / np.diff(P)
    slopes = np.concatenate([[slope_left], seg, [slope_right]])
    kinks = np.diff(slopes)  # weight of σ(u − P_j), j = 1..W
    peak = max(0.0, float(np.max(V)), bias)
    return bias, slope_left, kinks, peak


def compile_cpwl(path: CpwlPath, W: int, L: int, box=None) -> ReluNetwork:
    """Compile a curve with N ≤ W⌊W/(6d)⌋L interior breakpoints into NN(W+d+1, 2L).

    ``box`` is accepted for interface symmetry; the collector shifts are certified on
    all of R (every group term is bounded globally), which covers any evaluation box.
    """
    d = path.dim
    if d < 1:
        raise ValueError("degenerate output dimension")
    q = W // (6 * d)
    if q < 1:
        raise CapacityError(f"W={W} is below 6d={6 * d}")
    if L < 1:
        raise CapacityError("L must be at least 1")
    N = path.interior_count
    if N > q * W * L:
        raise CapacityError(f"{N} interior breakpoints exceed budget {q * W * L}")
    x = path.breakpoints
    y = path.values
    if x.size == 1:
        A = np.zeros((d, 1))
        return ReluNetwork([(A, y[0].copy())])
    if N == 0:
        return _ramp_net(x[0], x[1], y[0], y[1])

    x0, span = x[0], x[-1] - x[0]
    u = (x - x0) / span
    u[0], u[-1] = 0.0, 1.0
    blocks = -(-N // (q * W))
    u, y = _pad_breakpoints(u, y, q * W * blocks)

    y_first, y_last = y[0], y[-1]
    ramp = np.clip(u, 0.0, 1.0)
    residual = y - (y_first + np.outer(ramp, y_last - y_first))

    # Per block: principal breakpoints and per-coordinate signed groups.
    block_data = []
    for blk in range(blocks):
        base = blk * q * W
        xs = u[base:base + q * W + 2]
        principal = np.array([xs[j * q] for j in range(1, W + 1)])
        groups = []  # (coordinate, sign, bias, slope_left, kinks, peak)
        for c in range(d):
            coeffs = _hat_coefficients(xs, residual[base + 1:base + q * W + 1, c], q, W)
            classes: dict = {}
            for n in range(1, q * W + 1):
                value = coeffs[n - 1]
                if value == 0.0:
                    continue
                j = -(-n // q)
                m = j * q - n + 1
                key = (0 if value > 0 else 1, m, j % 3)
                classes.setdefault(key, []).append((j, m, abs(value)))
            for key in sorted(classes):
                bias, s0, kinks, peak = _group_function(xs, q, W, classes[key])
                groups.append((c, 1.0 if key[0] == 0 else -1.0, bias, s0, kinks, peak))
        if len(groups) > W:
            raise AssertionError("group count exceeded width budget")
        block_data.append((principal, groups))

    # Certified lower bounds of the collector partial sums (valid on all of R).
    lower = np.minimum(y_first, y_last).astype(np.float64)
    shifts = []
    for principal, groups in block_data:
        shifts.append(1.0 + np.maximum(0.0, -lower))
        for c, sign, *_rest, peak in groups:
            if sign < 0:
                lower[c] -= peak

    width = 1 + W + d
    layers = []
    # Hidden layer 1: copy σ(u), W features of block 1, σ(u − 1) in the first collector.
    principal, _ = block_data[0]
    A = np.zeros((width, 1))
    b = np.zeros(width)
    A[0, 0] = 1.0 / span
    b[0] = -x0 / span
    A[1:1 + W, 0] = 1.0 / span
    b[1:1 + W] = -x0 / span - principal
    A[1 + W, 0] = 1.0 / span
    b[1 + W] = -x0 / span - 1.0
    layers.append((A, b))

    prev_groups = None
    prev_shift = None
    for blk, (principal, groups) in enumerate(block_data):
        if blk > 0:
            # Odd layer: copy, next block features, collectors absorb previous block's groups.
            A = np.zeros((width, width))
            b = np.zeros(width)
            A[0, 0] = 1.0
            A[1:1 + W, 0] = 1.0
            b[1:1 + W] = -principal
            shift = shifts[blk]
            for c in range(d):
                A[1 + W + c, 1 + W + c] = 1.0
                b[1 + W + c] = shift[c] - prev_shift[c]
            for g_idx, (c, sign, *_rest) in enumerate(prev_groups):
                A[1 + W + c, 1 + g_idx] += sign
            layers.append((A, b))
            prev_shift = shift
        # Even layer: copy, group ReLUs of this block, collectors.
        A = np.zeros((width, width))
        b = np.zeros(width)
        A[0, 0] = 1.0
        for g_idx, (c, sign, bias, s0, kinks, _peak) in enumerate(groups):
            A[1 + g_idx, 0] = s0
            A[1 + g_idx, 1:1 + W] = kinks
            b[1 + g_idx] = bias
        if blk == 0:
            shift = shifts[0]
            delta = y_last - y_first
            for c in range(d):
                A[1 + W + c, 0] = delta[c]
                A[1 + W + c, 1 + W] = -delta[c]
                b[1 + W + c] = y_first[c] + shift[c]
            prev_shift = shift
        else:
            for c in range(d):
                A[1 + W + c, 1 + W + c] = 1.0
        layers.append((A, b))
        prev_groups = groups

    A = np.zeros((d, width))
    b = -prev_shift.copy()
    for c in range(d):
        A[c, 1 + W + c] = 1.0
    for g_idx, (c, sign, *_rest) in enumerate(prev_groups):
        A[c, 1 + g_idx] += sign
    layers.append((A, b))
    return _trim_unused(ReluNetwork(layers, 1, d))


def _trim_unused(net: ReluNetwork) -> ReluNetwork:
    """Drop hidden neurons whose outgoing weights are all zero."""
    layers = [(np.array(A), np.array(b)) for A, b in net.layers]
    for i in range(len(layers) - 2, -1, -1):
        A_next = layers[i + 1][0]
        keep = np.any(A_next != 0.0, axis=0)
        if not np.any(keep):
            keep[0] = True
        layers[i] = (layers[i][0][keep], layers[i][1][keep])
        layers[i + 1] = (A_next[:, keep], layers[i + 1][1])
    return ReluNetwork(layers, net.input_dim, net.output_dim)


def interpolate_1d(samples, W: int, L: int) -> ReluNetwork:
    """Scalar network in NN(W+2, 2L) through N+2 samples, N ≤ ⌊W/6⌋WL, constant outside."""
    pts = np.asarray(samples, dtype=np.float64)
    if pts.ndim != 2 or pts.shape[1] != 2 or pts.shape[0] < 2:
        raise ValueError("samples must be a sequence of at least two (x, y) pairs")
    if W < 6:
        raise CapacityError("W must be at least 6")
    N = pts.shape[0] - 2
    if N > (W // 6) * W * L:
        raise CapacityError(f"{N} interior samples exceed budget {(W // 6) * W * L}")
    return compile_cpwl(CpwlPath(pts[:, 0], pts[:, 1]), W, L)


def staircase_index_net(W: int, L: int, d: int, delta: float, compact: bool = False) -> ReluNetwork:
    """Integer staircase: m on [m/M, (m+1)/M − δ·1{m<M−1}], clamped outside [0, 1].

    In y = Mx (clamped to [0, M−1]) the floor is read off in s radix-K stages.
    Stage i compares the residual r against jB_i (B_i = K^{s−i}) through
    σ(1 − σ((jB_i − r)/g)), g = Mδ, which is exactly 0 or 1 off the gaps, so
    plateau outputs are exact integers.

    ``compact=False`` uses one stage (K = M): monotone everywhere, Lipschitz 1/g in y,
    width M + 1. ``compact=True`` picks the fewest stages with K ≤ 4W + 1, giving width
    ≤ 4W + 3 and depth 1 + 2s ≤ 4L; inside the δ-gaps a lower stage sees its residual
    sweep backwards, so the output is neither monotone nor gently sloped there.
    """
    if W < 6 or L < 2 or d < 1:
        raise ValueError("partition map needs W ≥ 6, L ≥ 2, d ≥ 1")
    M = partition_count(W, L, d)
    if not (0.0 < delta <= 1.0 / (3 * M)):
        raise ValueError(f"delta must lie in (0, 1/(3M)] with M={M}")
    if M == 1:
        return ReluNetwork([(np.zeros((1, 1)), np.zeros(1)), (np.zeros((1, 1)), np.zeros(1))])
    stages = 1
    while compact and int(np.ceil(M ** (1.0 / stages) - 1e-9)) > 4 * W + 1:
        stages += 1
    K = int(np.ceil(M ** (1.0 / stages) - 1e-9))
    while K ** stages < M:
        K += 1
    if 1 + 2 * stages > 4 * L:
        raise CapacityError("staircase needs more depth than 4L")
    gap = M * delta
    # clamp: y = σ(Mx) − σ(Mx − (M−1))
    layers = [(np.array([[float(M)], [float(M)]]), np.array([0.0, -(M - 1.0)]))]
    r_row = np.array([1.0, -1.0])  # residual r as a linear form of the previous layer
    acc_row = np.zeros(2)  # accumulated index
    for i in range(1, stages + 1):
        B = float(K ** (stages - i))
        steps = [j * B for j in range(1, K) if j * B <= M - 1]
        n = len(steps)
        # layer a: σ(r), σ(acc), σ((jB − r)/g)
        A = np.vstack([r_row, acc_row] + [-r_row / gap for _ in steps])
        b = np.concatenate([[0.0, 0.0], np.array(steps) / gap])
        layers.append((A, b))
        # layer b: σ(r), σ(acc), σ(1 − u_j)
        A = np.zeros((2 + n, 2 + n))
        A[0, 0] = 1.0
        A[1, 1] = 1.0
        A[2:, 2:] = -np.eye(n)
        b = np.concatenate([[0.0, 0.0], np.ones(n)])
        layers.append((A, b))
        r_row = np.concatenate([[1.0, 0.0], -B * np.ones(n)])
        acc_row = np.concatenate([[0.0, 1.0], B * np.ones(n)])
    layers.append((acc_row.reshape(1, -1), np.zeros(1)))
    return ReluNetwork(layers)


def partition_map(W: int, L: int, d: int, delta: float, compact: bool = False) -> ReluNetwork:
    """Staircase φ with φ(x) = m/M on [m/M, (m+1)/M − δ·1{m<M−1}], M = ⌊(WL)^{2/d}⌋."""
    M = partition_count(W, L, d)
    return post_affine(staircase_index_net(W, L, d, delta, compact), [[1.0 / M]])


def partition_count(W: int, L: int, d: int) -> int:
    """M = ⌊(WL)^{2/d}⌋, computed with an integer correction against float rounding."""
    target = (W * L) ** 2
    M = int(np.floor(target ** (1.0 / d)))
    while (M + 1) ** d <= target:
        M += 1
    while M ** d > target:
        M -= 1
    return M
