"""Hölder-function approximators and the bundled certified target family.

Two constructions:

* ``holder_approx_wd``: piecewise-constant Taylor coefficients looked up through a
  staircase index map and data-fitting networks, combined with product networks,
  then repaired on the δ-gaps by ``d`` rounds of a median-of-three network.
* ``holder_approx_norm``: a partition of unity of tensor hats times local Taylor
  monomials, all products realized by norm-constrained product trees.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import asdict, dataclass, field
from typing import Callable

import numpy as np

from .bitfit import data_fit_net
from .cpwl import partition_count, staircase_index_net
from .net_core import (
    ReluNetwork,
    affine_net,
    compose,
    concatenate_many,
    evaluate,
    identity_net,
    linear_sum,
    norm_kappa,
    parallel,
    post_affine,
    pre_affine,
)
from .polynet import dproduct_net, monomial_net, product_net_depth

MAX_LAYER_NEURONS = 100_000
MAX_CELLS = 1_000_000


class CapacityGuardError(ValueError):
    """The requested build exceeds the size guard."""


# ------------------------------------------------------------------ targets

@dataclass(frozen=True, eq=False)
class HolderTarget:
    """Target h on [0,1]^d with value and partial-derivative oracles (vectorized over rows)."""

    name: str
    dim: int
    alpha: float
    value: Callable[[np.ndarray], np.ndarray]
    partial: Callable[[tuple, np.ndarray], np.ndarray]
    holder_certified: bool = False

    @property
    def r(self) -> int:
        return int(math.ceil(self.alpha)) - 1

    @property
    def alpha0(self) -> float:
        return self.alpha - self.r


def multi_indices(d: int, max_order: int, min_order: int = 0) -> list[tuple]:
    """All s ∈ N_0^d with min_order ≤ |s| ≤ max_order, ordered by |s| then lexicographically."""
    out = []
    for order in range(min_order, max_order + 1):
        for combo in itertools.combinations_with_replacement(range(d), order):
            s = [0] * d
            for i in combo:
                s[i] += 1
            out.append(tuple(s))
    return out


def factorial_of(s) -> int:
    return int(np.prod([math.factorial(v) for v in s]))


@dataclass
class CertificationResult:
    passed: bool
    max_abs_value: float
    max_abs_partial: float
    max_fd_mismatch: float
    max_holder_ratio: float
    notes: list = field(default_factory=list)


def certify(target: HolderTarget, samples: int = 10_000, seed: int = 0, step: float = 1e-5) -> CertificationResult:
    """Spot-check membership in the Hölder class on random points of [0,1]^d.

    Checks |∂^s h| ≤ 1 for |s| ≤ r, central differences of ∂^{s−e_j} h against ∂^s h,
    and |∂^s h(x) − ∂^s h(y)| ≤ ||x − y||_∞^{α0} on random pairs for |s| = r.
    """
    rng = np.random.default_rng(seed)
    d = target.dim
    x = rng.uniform(0.0, 1.0, (samples, d))
    y = np.clip(x + rng.uniform(-0.05, 0.05, (samples, d)) * rng.uniform(0, 1, (samples, 1)), 0.0, 1.0)
    far = rng.uniform(0.0, 1.0, (samples, d))
    notes = []
    max_val = float(np.max(np.abs(target.value(x))))
    max_partial = 0.0
    fd_mismatch = 0.0
    for s in multi_indices(d, target.r):
        vals = target.partial(s, x)
        max_partial = max(max_partial, float(np.max(np.abs(vals))))
        for j in range(d):
            if s[j] == 0:
                continue
            lower = list(s)
            lower[j] -= 1
            lower = tuple(lower)
            inner = np.clip(x, step, 1 - step)
            plus = inner.copy()
            minus = inner.copy()
            plus[:, j] += step
            minus[:, j] -= step
            fd = (target.partial(lower, plus) - target.partial(lower, minus)) / (2 * step)
            fd_mismatch = max(fd_mismatch, float(np.max(np.abs(fd - target.partial(s, inner)))))
    ratio = 0.0
    for s in multi_indices(d, target.r, target.r):
        for other in (y, far):
            dist = np.max(np.abs(x - other), axis=1)
            mask = dist > 1e-12
            diff = np.abs(target.partial(s, x[mask]) - target.partial(s, other[mask]))
            ratio = max(ratio, float(np.max(diff / dist[mask] ** target.alpha0)))
    passed = True
    if max_val > 1 + 1e-12:
        passed = False
        notes.append("value exceeds 1")
    if max_partial > 1 + 1e-12:
        passed = False
        notes.append("partial exceeds 1")
    if fd_mismatch > 1e-4:
        passed = False
        notes.append("finite differences disagree with partial oracle")
    if ratio > 1 + 1e-9:
        passed = False
        notes.append("Hölder quotient of top-order partials exceeds 1")
    return CertificationResult(passed, max_val, max_partial, fd_mismatch, ratio, notes)


def with_certification(target: HolderTarget, seed: int = 0) -> HolderTarget:
    result = certify(target, seed=seed)
    return HolderTarget(target.name, target.dim, target.alpha, target.value, target.partial, result.passed)


def _poly_1d(name: str, scale: float, degree: int, alpha: float) -> HolderTarget:
    """h(x) = scale · Σ_{j=1..degree} x^j / j!."""

    def value(x):
        t = np.asarray(x)[:, 0]
        return scale * sum(t ** j / math.factorial(j) for j in range(1, degree + 1))

    def partial(s, x):
        order = s[0]
        t = np.asarray(x)[:, 0]
        total = np.zeros_like(t)
        for j in range(max(order, 1), degree + 1):
            total = total + t ** (j - order) / math.factorial(j - order)
        return scale * total

    return HolderTarget(name, 1, alpha, value, partial)


def _sin_product(name: str, d: int, alpha: float) -> HolderTarget:
    """h(x) = π^{−2} Π sin(π x_i); first partials have ∞-norm Lipschitz constant ≤ 1."""
    c = 1.0 / math.pi ** 2

    def partial(s, x):
        x = np.asarray(x)
        out = np.full(x.shape[0], c)
        for i in range(d):
            k = s[i] % 4
            t = math.pi * x[:, i]
            factor = [np.sin(t), np.cos(t), -np.sin(t), -np.cos(t)][k]
            out = out * factor * math.pi ** s[i]
        return out

    return HolderTarget(name, d, alpha, lambda x: partial((0,) * d, x), partial)


def _ramp(name: str, d: int, center: float) -> HolderTarget:
    """h(x) = mean_i |x_i − c|: Lipschitz 1 in the ∞-norm, α = 1."""

    def value(x):
        return np.mean(np.abs(np.asarray(x) - center), axis=1)

    return HolderTarget(name, d, 1.0, value, lambda s, x: value(x))


def _parabola() -> HolderTarget:
    """h(x) = x(1 − x): |h'| ≤ 1, α = 1."""

    def value(x):
        t = np.asarray(x)[:, 0]
        return t * (1.0 - t)

    return HolderTarget("parabola_1d", 1, 1.0, value, lambda s, x: value(x))


def _zero(d: int) -> HolderTarget:
    return HolderTarget(f"zero_{d}d", d, 1.0, lambda x: np.zeros(np.asarray(x).shape[0]),
                        lambda s, x: np.zeros(np.asarray(x).shape[0]))


def bundled_targets(certify_now: bool = True) -> list[HolderTarget]:
    """Certified members of Hölder classes used by tests and the default suite."""
    targets = [
        _ramp("ramp_1d", 1, 0.5),
        _parabola(),
        _poly_1d("poly_1d", 0.4, 3, 2.0),
        _poly_1d("poly3_1d", 0.375, 4, 3.0),
        _sin_product("sin_2d", 2, 2.0),
        _ramp("ramp_2d", 2, 0.5),
    ]
    if certify_now:
        targets = [with_certification(t) for t in targets]
    return targets


def target_by_name(name: str) -> HolderTarget:
    if name.startswith("zero_"):
        return with_certification(_zero(int(name.split("_")[1].rstrip("d"))))
    for t in bundled_targets():
        if t.name == name:
            return t
    raise KeyError(f"unknown target {name}")


# ------------------------------------------------------------------ reports

@dataclass
class ApproxReport:
    target_id: str
    d: int
    alpha: float
    W: int | None
    L: int | None
    N: int | None
    k: int | None
    kappa: float
    bound: float
    measured: float
    passed: bool
    width: int
    depth: int
    grid_size: int
    certified: bool
    kappa_cap: float | None = None

    CSV_FIELDS = ("target_id", "d", "alpha", "W", "L", "N", "k", "kappa", "bound", "measured", "pass")

    def to_dict(self) -> dict:
        data = asdict(self)
        data["pass"] = data.pop("passed")
        return data

    def csv_row(self) -> list[str]:
        def fmt(v):
            if v is None:
                return ""
            if isinstance(v, bool):
                return "true" if v else "false"
            if isinstance(v, float):
                return repr(v)
            return str(v)

        data = self.to_dict()
        return [fmt(data[k]) for k in self.CSV_FIELDS]


# ------------------------------------------------------------------ mid network

def mid_net() -> ReluNetwork:
    """Median of three inputs in NN(14, 2).

    mid = σ(s) − σ(−s) − max − min with s = t1 + t2 + t3, where
    max{a, b} = ½(σ(a+b) − σ(−a−b) + σ(a−b) + σ(b−a)) is applied twice (and min = −max(−·)).
    """
    # Layer 1 (14): max part on (t1,t2), carry t3 as ±; min part likewise; σ(±s).
    rows = []
    rows += [[1, 1, 0], [-1, -1, 0], [1, -1, 0], [-1, 1, 0], [0, 0, 1], [0, 0, -1]]  # for max
    rows += [[-1, -1, 0], [1, 1, 0], [-1, 1, 0], [1, -1, 0], [0, 0, -1], [0, 0, 1]]  # for max of negatives
    rows += [[1, 1, 1], [-1, -1, -1]]
    A0 = np.array(rows, dtype=np.float64)
    b0 = np.zeros(14)

    def pair_max_rows(offset):
        # u = max(t1, t2) = ½(n0 − n1 + n2 + n3), v = n4 − n5; rows for σ(u+v), σ(−u−v), σ(u−v), σ(v−u)
        u = np.zeros(14)
        u[offset:offset + 4] = [0.5, -0.5, 0.5, 0.5]
        v = np.zeros(14)
        v[offset + 4:offset + 6] = [1.0, -1.0]
        return [u + v, -u - v, u - v, v - u]

    A1 = np.array(pair_max_rows(0) + pair_max_rows(6) + [np.eye(14)[12], np.eye(14)[13]])
    b1 = np.zeros(10)
    # max3 = ½(m0 − m1 + m2 + m3); max of negatives = ½(m4 − m5 + m6 + m7) = −min3
    A2 = np.zeros((1, 10))
    A2[0, 0:4] = [-0.5, 0.5, -0.5, -0.5]
    A2[0, 4:8] = [0.5, -0.5, 0.5, 0.5]
    A2[0, 8:10] = [1.0, -1.0]
    return ReluNetwork([(A0, b0), (A1, b1), (A2, np.zeros(1))])


# ------------------------------------------------------------------ width/depth construction

def wd_bound(d: int, alpha: float, W: int, L: int) -> float:
    r = int(math.ceil(alpha)) - 1
    M = partition_count(W, L, d)
    return 6.0 * (r + 1) ** 2 * d ** max(r, 1) * M ** (-alpha)


def wd_lipschitz_bound(d: int, alpha: float, W: int, L: int) -> float:
    """Lipschitz estimate (r+1) d^r L (WL)^{σ(4α−4)/d} (1260 d W²L² 2^{L²} + 19 r 7^r) for the width/depth build."""
    r = int(math.ceil(alpha)) - 1
    growth = (W * L) ** (max(4.0 * alpha - 4.0, 0.0) / d)
    return (r + 1) * d ** r * L * growth * (1260.0 * d * W * W * L * L * 2.0 ** (L * L) + 19.0 * r * 7.0 ** r)


def wd_product_stages(W: int, L: int, r: int) -> int:
    """Smallest teeth count with product error 4·2^{−2k} ≤ 6(WL)^{−2(r+1)}, the budget the proof uses."""
    return max(1, int(math.ceil((r + 1) * math.log2(W * L))))


def _clamp01_net(d: int) -> ReluNetwork:
    """x -> σ(x) − σ(x − 1) coordinatewise."""
    A0 = np.kron(np.eye(d), np.array([[1.0], [1.0]]))
    b0 = np.tile([0.0, -1.0], d)
    A1 = np.kron(np.eye(d), np.array([[1.0, -1.0]]))
    return ReluNetwork([(A0, b0), (A1, np.zeros(d))])


def _unit_clip() -> ReluNetwork:
    return ReluNetwork([(np.array([[1.0], [1.0]]), np.array([1.0, -1.0])),
                        (np.array([[1.0, -1.0]]), np.array([-1.0]))])


def holder_wd_core(h: HolderTarget, W: int, L: int):
    """The network φ_0 before the median repair, plus (M, δ, k_×) metadata."""
    d = h.dim
    r = h.r
    M = partition_count(W, L, d)
    if M ** d > W * W * L * L:
        raise CapacityGuardError("M^d exceeds W²L²")
    delta = 1.0 / (3.0 * M ** max(h.alpha, 1.0))
    k_times = wd_product_stages(W, L, r)

    # Stage A: x -> (index Σ m_j M^{j−1}, clip01(x) − m/M).
    stair = staircase_index_net(W, L, d, delta, compact=True)
    front = concatenate_many([parallel([stair] * d, rescale_first=False), _clamp01_net(d)], rescale_first=False)
    to_index = np.zeros((1 + d, 2 * d))
    for j in range(d):
        to_index[0, j] = float(M) ** j
        to_index[1 + j, j] = -1.0 / M
        to_index[1 + j, d + j] = 1.0
    stage_a = post_affine(front, to_index)

    # Stage B: (index, u) -> (c_0, a_s, p_s ...).
    grid = np.array(list(itertools.product(range(M), repeat=d)), dtype=np.float64)  # m_1 fastest? see below
    # Index i = Σ m_j M^{j−1}: the first coordinate varies fastest.
    grid = grid[:, ::-1]
    pts = grid / M
    branches = []
    select_index = np.zeros((1, 1 + d))
    select_index[0, 0] = 1.0
    select_u = np.hstack([np.zeros((d, 1)), np.eye(d)])
    index_order = np.argsort((grid * (float(M) ** np.arange(d))).sum(axis=1))
    pts = pts[index_order]
    orders = multi_indices(d, r)
    for s in orders:
        xi = (np.clip(h.partial(s, pts), -1.0, 1.0) + 1.0) / 2.0
        fit = data_fit_net(xi, W, L, r + 1)
        coeff = pre_affine(fit, select_index)
        scale = 1.0 / factorial_of(s)
        branches.append(post_affine(coeff, [[2.0 * scale]], [-scale]))
        if sum(s) == 0:
            continue
        if sum(s) == 1:
            i = s.index(1)
            poly = pre_affine(identity_net(1, 1), select_u[i:i + 1])
        else:
            poly = pre_affine(monomial_net(s, k_times), select_u)
        branches.append(poly)
    stage_b = concatenate_many(branches, rescale_first=False)

    # Stage C: c_0 + Σ φ_×(a_s, p_s), clamped to [−1, 1].
    n_in = stage_b.output_dim
    terms = []
    first = np.zeros((1, n_in))
    first[0, 0] = 1.0
    terms.append(pre_affine(identity_net(1, k_times), first))
    prod = product_net_depth(k_times)
    for pos in range(1, n_in, 2):
        sel = np.zeros((2, n_in))
        sel[0, pos] = 1.0
        sel[1, pos + 1] = 1.0
        terms.append(pre_affine(prod, sel))
    stage_c = compose(_unit_clip(), linear_sum([1.0] * len(terms), terms, rescale_first=False),
                      rescale_first=False)
    core = compose(stage_c, compose(stage_b, stage_a, rescale_first=False), rescale_first=False)
    return core, M, delta, k_times


def _median_repair(core: ReluNetwork, d: int, delta: float) -> ReluNetwork:
    net = core
    mid = mid_net()
    eye = np.eye(d)
    for i in range(d):
        shift = delta * eye[i]
        trio = concatenate_many([pre_affine(net, eye, -shift), net, pre_affine(net, eye, shift)],
                                rescale_first=False)
        net = compose(mid, trio, rescale_first=False)
    return net


def wd_grid(d: int, M: int, delta: float, resolution: int = 1001, coarse: int = 33, seed: int = 0) -> np.ndarray:
    """Evaluation points: a uniform lattice plus plateau edges and gap points of Q(M, δ).

    One dimension: ``resolution`` uniform points plus every plateau edge and three
    points inside each gap. Higher dimensions: a lattice of ``coarse`` uniform plus
    ``coarse // 2`` sampled critical coordinates, and axis slices of ``resolution``
    points through the center, one gap coordinate and one plateau edge.
    """
    m = np.arange(M)
    ends = (m[:-1] + 1) / M
    edges = np.concatenate([m / M, ends - delta, [1.0]])
    gap_pts = np.concatenate([ends - delta * 0.999, ends - delta / 2, ends - delta * 0.001])
    crit = np.concatenate([edges, gap_pts])
    if d == 1:
        line = np.unique(np.concatenate([np.linspace(0, 1, resolution), crit]))
        return line.reshape(-1, 1)
    rng = np.random.default_rng(seed)
    pick = rng.choice(crit, size=min(coarse // 2, crit.size), replace=False)
    axis_vals = np.unique(np.concatenate([np.linspace(0, 1, coarse), pick]))
    blocks = [np.array(list(itertools.product(axis_vals, repeat=d)))]
    fixed = [0.5]
    if M > 1:
        fixed += [float(rng.choice(gap_pts)), float(rng.choice(ends - delta))]
    uniform = np.linspace(0, 1, resolution)
    for axis in range(d):
        for value in fixed:
            pts = np.full((uniform.size, d), value)
            pts[:, axis] = uniform
            blocks.append(pts)
    return np.unique(np.vstack(blocks), axis=0)


def holder_approx_wd(h: HolderTarget, W: int, L: int, grid: np.ndarray | None = None,
                     resolution: int = 1001) -> tuple[ReluNetwork, ApproxReport]:
    """Width/depth construction with error ≤ 6(r+1)² d^{r∨1} ⌊(WL)^{2/d}⌋^{−α}."""
    if W < 6 or L < 2:
        raise ValueError("need W ≥ 6 and L ≥ 2")
    d = h.dim
    r = h.r
    k_times = wd_product_stages(W, L, r)
    if k_times > 30:
        raise CapacityGuardError("product stages exceed the precision guard")
    core, M, delta, k_times = holder_wd_core(h, W, L)
    if core.width * 3 ** d > MAX_LAYER_NEURONS:
        raise CapacityGuardError(f"width {core.width * 3 ** d} exceeds {MAX_LAYER_NEURONS}")
    net = _median_repair(core, d, delta)
    if grid is None:
        grid = wd_grid(d, M, delta, resolution)
    measured = float(np.max(np.abs(evaluate(net, grid).ravel() - h.value(grid))))
    bound = wd_bound(d, h.alpha, W, L)
    report = ApproxReport(h.name, d, h.alpha, W, L, None, k_times, norm_kappa(net), bound, measured,
                          bool(h.holder_certified and measured <= bound + 1e-9), net.width, net.depth,
                          int(grid.shape[0]), h.holder_certified)
    return net, report


# ------------------------------------------------------------------ norm-constrained construction

def _hat_net() -> ReluNetwork:
    """ψ(t) = σ(1 − σ(t) − σ(−t)) = max(0, 1 − |t|)."""
    return ReluNetwork([(np.array([[1.0], [-1.0]]), np.zeros(2)),
                        (np.array([[-1.0, -1.0]]), np.array([1.0])),
                        (np.array([[1.0]]), np.zeros(1))])


def norm_architecture(d: int, r: int, N: int, k: int) -> dict:
    levels = math.ceil(math.log2(d + r)) if d + r > 1 else 0
    return {
        "W": 6 * (r + 1) * (d + r) * d ** r * (N + 1) ** d * k,
        "L": 2 * levels + 2,
        "K": 6.0 ** (3 * levels + 1) * (r + 1) * d ** r * N * (N + 1) ** d,
    }


def norm_bound(d: int, alpha: float, N: int, k: int) -> float:
    r = int(math.ceil(alpha)) - 1
    return 2.0 ** d * d ** r * (N ** (-alpha) + 6.0 * (r + 1) * (d + r) / k ** 2)


def _local_term(d: int, n, s, N: int, k: int) -> ReluNetwork:
    hat = _hat_net()
    factors = []
    eye = np.eye(d)
    for i in range(d):
        factors.append(pre_affine(hat, N * eye[i:i + 1], [-float(n[i])]))
    for i in range(d):
        for _ in range(s[i]):
            factors.append(pre_affine(identity_net(1, 1), eye[i:i + 1], [-n[i] / N]))
    if len(factors) == 1:
        return factors[0]
    inputs = concatenate_many(factors)
    return compose(dproduct_net(len(factors), k), inputs)


def holder_norm_net(h: HolderTarget, N: int, k: int) -> ReluNetwork:
    d = h.dim
    r = h.r
    if (N + 1) ** d > MAX_CELLS:
        raise CapacityGuardError(f"(N+1)^d = {(N + 1) ** d} exceeds {MAX_CELLS}")
    coeffs, nets = [], []
    cells = list(itertools.product(range(N + 1), repeat=d))
    points = np.array(cells, dtype=np.float64) / N
    for s in multi_indices(d, r):
        values = h.partial(s, points) / factorial_of(s)
        for cell, c in zip(cells, values):
            if c == 0.0:
                continue
            coeffs.append(float(c))
            nets.append(_local_term(d, cell, s, N, k))
    if not nets:
        return affine_net(np.zeros((1, d)), np.zeros(1))
    return linear_sum(coeffs, nets)


def norm_grid(d: int, N: int, resolution: int = 1001, coarse: int = 41) -> np.ndarray:
    knots = np.arange(N + 1) / N
    mids = (np.arange(N) + 0.5) / N
    line = np.unique(np.concatenate([np.linspace(0, 1, resolution), knots, mids]))
    if d == 1:
        return line.reshape(-1, 1)
    crit = np.unique(np.concatenate([np.linspace(0, 1, coarse), knots, mids]))
    blocks = [np.array(list(itertools.product(crit, repeat=d)))]
    uniform = np.linspace(0, 1, resolution)
    for axis in range(d):
        for value in (mids[0], 0.5):
            pts = np.full((uniform.size, d), value)
            pts[:, axis] = uniform
            blocks.append(pts)
    return np.unique(np.vstack(blocks), axis=0)


def holder_approx_norm(h: HolderTarget, N: int, k: int, grid: np.ndarray | None = None,
                       resolution: int = 1001) -> tuple[ReluNetwork, ApproxReport]:
    """Norm-constrained construction with error ≤ 2^d d^r (N^{−α} + 6(r+1)(d+r)k^{−2})."""
    if N < 1 or k < 1:
        raise ValueError("need N ≥ 1 and k ≥ 1")
    d = h.dim
    net = holder_norm_net(h, N, k)
    if grid is None:
        grid = norm_grid(d, N, resolution)
    measured = float(np.max(np.abs(evaluate(net, grid).ravel() - h.value(grid))))
    bound = norm_bound(d, h.alpha, N, k)
    arch = norm_architecture(d, h.r, N, k)
    kappa = norm_kappa(net)
    ok = h.holder_certified and measured <= bound + 1e-9 and kappa <= arch["K"] * (1 + 1e-9)
    report = ApproxReport(h.name, d, h.alpha, net.width, net.depth, N, k, kappa, bound, measured, bool(ok),
                          net.width, net.depth, int(grid.shape[0]), h.holder_certified, arch["K"])
    return net, report


def partition_of_unity_check(N: int, d: int, resolution: int | None = None) -> float:
    """max |Σ_n Π_i ψ(N x_i − n_i) − 1| over a grid of [0,1]^d, hats evaluated by the ReLU net."""
    if resolution is None:
        resolution = 2001 if d == 1 else max(8 * N + 1, 65)
    line = np.unique(np.concatenate([np.linspace(0, 1, resolution), np.arange(N + 1) / N]))
    hat = _hat_net()
    # Per-axis hat values: shape (len(line), N + 1)
    per_axis = np.column_stack([evaluate(hat, N * line - n).ravel() for n in range(N + 1)])
    axis_sum = per_axis.sum(axis=1)
    total = axis_sum
    for _ in range(d - 1):
        total = np.multiply.outer(total, axis_sum)
    return float(np.max(np.abs(total - 1.0)))
