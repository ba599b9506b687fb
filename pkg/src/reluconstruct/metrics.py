"""Probability metrics and complexity estimators on discrete measures.

Ground metric is the ∞-norm throughout. Exact optimal transport uses the network
simplex solver from POT.
"""

from __future__ import annotations

import itertools
import math
import os
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.spatial.distance import cdist

from .distgen import DiscreteMeasure
from .net_core import ReluNetwork, evaluate, lipschitz_upper

for _backend in ("PYTORCH", "TENSORFLOW", "JAX", "CUPY"):
    os.environ.setdefault(f"POT_BACKEND_DISABLE_{_backend}", "1")
import ot  # noqa: E402

MAX_OT_ATOMS = 2000


class CapacityError(ValueError):
    """Support too large for the exact solver."""


# ------------------------------------------------------------------ Wasserstein

def wasserstein_1d(mu: DiscreteMeasure, gamma: DiscreteMeasure, p: float = 1.0) -> float:
    """Exact W_p on R through the monotone (quantile) coupling."""
    if mu.dim != 1 or gamma.dim != 1:
        raise ValueError("both measures must be one-dimensional")
    xa = mu.atoms[:, 0]
    xb = gamma.atoms[:, 0]
    ia, ib = np.argsort(xa), np.argsort(xb)
    xa, wa = xa[ia], mu.weights[ia]
    xb, wb = xb[ib], gamma.weights[ib]
    ca, cb = np.cumsum(wa), np.cumsum(wb)
    ca[-1] = cb[-1] = 1.0
    levels = np.unique(np.concatenate([[0.0], ca, cb]))
    mids = 0.5 * (levels[:-1] + levels[1:])
    qa = xa[np.minimum(np.searchsorted(ca, mids), xa.size - 1)]
    qb = xb[np.minimum(np.searchsorted(cb, mids), xb.size - 1)]
    total = float(np.sum(np.diff(levels) * np.abs(qa - qb) ** p))
    return total ** (1.0 / p)


def _cost(a: np.ndarray, b: np.ndarray, p: float) -> np.ndarray:
    return cdist(a, b, metric="chebyshev") ** p


def wasserstein_discrete(mu: DiscreteMeasure, gamma: DiscreteMeasure, p: float = 1.0,
                         max_atoms: int = MAX_OT_ATOMS) -> float:
    """Exact W_p with ∞-norm ground cost, solved as a transportation problem."""
    if mu.dim != gamma.dim:
        raise ValueError("dimension mismatch")
    if mu.size + gamma.size > max_atoms:
        raise CapacityError(f"{mu.size + gamma.size} atoms exceed {max_atoms}; use a sampling estimate")
    a = mu.weights
    b = gamma.weights * (a.sum() / gamma.weights.sum())
    cost = _cost(mu.atoms, gamma.atoms, p)
    value = float(ot.emd2(a, b, cost, numItermax=10_000_000))
    return max(value, 0.0) ** (1.0 / p)


def bootstrap_w1(mu: DiscreteMeasure, points: np.ndarray, resamples: int, seed: int,
                 snap_tol: float = 1e-9, max_atoms: int = 100_000) -> tuple[float, float]:
    """W_1(μ, empirical(points)) and its bootstrap standard error (multinomial resampling)."""
    from .distgen import compress_samples

    pts = np.asarray(points, dtype=np.float64)
    n = pts.shape[0]
    empirical = compress_samples(pts, mu.atoms, snap_tol)
    estimate = wasserstein_discrete(mu, empirical, 1.0, max_atoms)
    if resamples < 2:
        return estimate, 0.0
    rng = np.random.default_rng(seed)
    values = []
    for _ in range(resamples):
        counts = rng.multinomial(n, empirical.weights)
        keep = counts > 0
        w = counts[keep] / n
        w[np.argmax(w)] += 1.0 - w.sum()
        values.append(wasserstein_discrete(mu, DiscreteMeasure(empirical.atoms[keep], w), 1.0, max_atoms))
    return estimate, float(np.std(values, ddof=1))


# ------------------------------------------------------------------ kernels and MMD

@dataclass(frozen=True)
class KernelSpec:
    """Gaussian exp(−|x−y|²/(2h²)), Laplacian exp(−|x−y|/h) or inverse multiquadric c/√(c²+|x−y|²)."""

    kind: str = "gaussian"
    bandwidth: float = 1.0

    def __post_init__(self):
        if self.kind not in ("gaussian", "laplacian", "inverse-multiquadric"):
            raise ValueError(f"unknown kernel {self.kind}")
        if not (self.bandwidth > 0 and math.isfinite(self.bandwidth)):
            raise ValueError("bandwidth must be positive and finite")

    @property
    def bound(self) -> float:
        """B = sup_x K(x, x)."""
        return 1.0

    def gram(self, x: np.ndarray, y: np.ndarray) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=np.float64))
        y = np.atleast_2d(np.asarray(y, dtype=np.float64))
        if self.kind == "gaussian":
            return np.exp(-cdist(x, y, "sqeuclidean") / (2.0 * self.bandwidth ** 2))
        dist = cdist(x, y, "euclidean")
        if self.kind == "laplacian":
            return np.exp(-dist / self.bandwidth)
        c = self.bandwidth
        return c / np.sqrt(c * c + dist * dist)


def _weighted_gram_sum(kernel: KernelSpec, xa, wa, xb, wb, chunk: int = 2048) -> float:
    total = 0.0
    for s in range(0, xa.shape[0], chunk):
        total += float(wa[s:s + chunk] @ kernel.gram(xa[s:s + chunk], xb) @ wb)
    return total


def mmd_discrete(mu: DiscreteMeasure, gamma: DiscreteMeasure, kernel: KernelSpec) -> float:
    """Closed-form MMD between two discrete measures (float dust clamped at 0)."""
    sq = (_weighted_gram_sum(kernel, mu.atoms, mu.weights, mu.atoms, mu.weights)
          - 2.0 * _weighted_gram_sum(kernel, mu.atoms, mu.weights, gamma.atoms, gamma.weights)
          + _weighted_gram_sum(kernel, gamma.atoms, gamma.weights, gamma.atoms, gamma.weights))
    return math.sqrt(max(sq, 0.0))


def mmd_empirical(mu: DiscreteMeasure, sample_measure: DiscreteMeasure, n_samples: int,
                  kernel: KernelSpec, chunk: int = 2048) -> tuple[float, float]:
    """MMD(μ, γ̂) for an empirical γ̂ of n i.i.d. draws, with a delta-method standard error.

    The squared statistic has influence function ψ(y) = 2(E_γ̂ K(y, Y) − E_μ K(y, X)), so
    Var(MMD²) ≈ Var_γ̂(ψ)/n and SE(MMD) ≈ SE(MMD²)/(2 max(MMD, √SE(MMD²))).
    """
    ys, wy = sample_measure.atoms, sample_measure.weights
    xs, wx = mu.atoms, mu.weights
    k_yy = np.empty(ys.shape[0])
    for s in range(0, ys.shape[0], chunk):
        k_yy[s:s + chunk] = kernel.gram(ys[s:s + chunk], ys) @ wy
    k_yx = kernel.gram(ys, xs) @ wx
    sq = float(wx @ kernel.gram(xs, xs) @ wx) - 2.0 * float(wy @ k_yx) + float(wy @ k_yy)
    value = math.sqrt(max(sq, 0.0))
    psi = 2.0 * (k_yy - k_yx)
    var = float(wy @ (psi - wy @ psi) ** 2)
    se_sq = math.sqrt(max(var, 0.0) / n_samples)
    se = se_sq / (2.0 * max(value, math.sqrt(se_sq))) if se_sq > 0 else 0.0
    return value, se


def mmd_empirical_bound(kernel: KernelSpec, n: int, t: float) -> float:
    """Bound on MMD(μ, μ̂_n) holding with probability ≥ 1 − 2e^{−t}: (2 + 3√(2t)) B^{1/4}/√n."""
    if n < 1 or t <= 0:
        raise ValueError("need n ≥ 1 and t > 0")
    return (2.0 + 3.0 * math.sqrt(2.0 * t)) * kernel.bound ** 0.25 / math.sqrt(n)


# ------------------------------------------------------------------ Rademacher complexity

def _as_vectors(vectors) -> np.ndarray:
    arr = np.asarray(vectors, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr.reshape(1, -1)
    if arr.size == 0:
        raise ValueError("the vector set is empty")
    return arr


def rademacher_mc(vectors, trials: int, seed: int, chunk: int = 1024) -> tuple[float, float]:
    """Monte-Carlo E_ξ sup_s ξ·s/n over rows s, with its standard error."""
    S = _as_vectors(vectors)
    if trials < 100:
        raise ValueError("trials must be at least 100")
    n = S.shape[1]
    rng = np.random.default_rng(seed)
    sups = np.empty(trials)
    for s in range(0, trials, chunk):
        xi = rng.choice(np.array([-1.0, 1.0]), size=(min(chunk, trials - s), n))
        sups[s:s + chunk] = np.max(xi @ S.T, axis=1) / n
    return float(sups.mean()), float(sups.std(ddof=1) / math.sqrt(trials))


def rademacher_exact(vectors) -> float:
    """Exact value by enumerating all 2^n sign vectors (n ≤ 20)."""
    S = _as_vectors(vectors)
    n = S.shape[1]
    if n > 20:
        raise ValueError("exact enumeration limited to n ≤ 20")
    xi = np.array(list(itertools.product([-1.0, 1.0], repeat=n)))
    return float(np.mean(np.max(xi @ S.T, axis=1)) / n)


def rademacher_upper_bound(K: float, L: int, d: int, n: int, B: float) -> float:
    return 2.0 * max(B, 1.0) * K * math.sqrt(L + 2 + math.log(d + 1)) / math.sqrt(n)


def rademacher_lower_bound(K: float, n: int) -> float:
    return K / (2.0 * math.sqrt(2.0 * n))


def random_norm_network(d: int, W: int, L: int, K: float, rng: np.random.Generator) -> ReluNetwork:
    """Gaussian weights scaled so hidden augmented norms are 1 and the output norm is K (κ = K)."""
    sizes = [d] + [W] * L + [1]
    layers = []
    for i in range(L + 1):
        A = rng.normal(size=(sizes[i + 1], sizes[i]))
        b = rng.normal(size=sizes[i + 1])
        scale = np.max(np.sum(np.abs(A), axis=1) + np.abs(b))
        target = K if i == L else 1.0
        layers.append((A * target / scale, b * target / scale))
    return ReluNetwork(layers)


def linear_vertex_networks(d: int, W: int, L: int, K: float) -> list[ReluNetwork]:
    """±(K/2) x̃_j = (K/2)(σ(±x̃_j) − σ(∓x̃_j)) for every coordinate of x̃ = (x, 1), padded to depth L."""
    nets = []
    for j in range(d + 1):
        for sign in (1.0, -1.0):
            row = np.zeros(d)
            bias = 0.0
            if j < d:
                row[j] = sign
            else:
                bias = sign
            A0 = np.zeros((W, d))
            b0 = np.zeros(W)
            A0[0], A0[1] = row, -row
            b0[0], b0[1] = bias, -bias
            layers = [(A0, b0)]
            for _ in range(L - 1):
                layers.append((np.eye(W), np.zeros(W)))
            out = np.zeros((1, W))
            out[0, 0], out[0, 1] = K / 2.0, -K / 2.0
            layers.append((out, np.zeros(1)))
            nets.append(ReluNetwork(layers))
    return nets


def norm_class_vectors(points, W: int, L: int, K: float, draws: int, seed: int,
                       include_linear: bool = True) -> np.ndarray:
    """Rows φ(x_1..x_n) for sampled networks with κ ≤ K; a finite subset of the class."""
    pts = np.asarray(points, dtype=np.float64)
    d = pts.shape[1]
    rng = np.random.default_rng(seed)
    nets = [random_norm_network(d, W, L, K, rng) for _ in range(draws)]
    if include_linear:
        nets += linear_vertex_networks(d, W, L, K)
    return np.vstack([evaluate(net, pts).reshape(-1) for net in nets])


# ------------------------------------------------------------------ function families and IPMs

@dataclass(frozen=True, eq=False)
class FunctionFamily:
    functions: tuple
    bound: float
    names: tuple = field(default=())

    def __post_init__(self):
        fns = tuple(self.functions)
        if not fns:
            raise ValueError("family must be nonempty")
        object.__setattr__(self, "functions", fns)

    def values(self, points) -> np.ndarray:
        """Matrix of shape (|family|, n) of function values."""
        pts = np.atleast_2d(np.asarray(points, dtype=np.float64))
        vals = np.vstack([np.asarray(f(pts), dtype=np.float64).reshape(-1) for f in self.functions])
        if np.any(np.abs(vals) > self.bound * (1 + 1e-12) + 1e-12):
            raise ValueError("a family member exceeds the declared bound")
        return vals

    def symmetrized(self) -> "FunctionFamily":
        neg = tuple((lambda f: (lambda x: -np.asarray(f(x))))(f) for f in self.functions)
        return FunctionFamily(self.functions + neg, self.bound)

    def is_symmetric(self, points, tol: float = 1e-12) -> bool:
        """Every member's negation is (numerically) a member on ``points``."""
        vals = self.values(points)
        for row in vals:
            if not np.any(np.max(np.abs(vals + row), axis=1) <= tol):
                return False
        return True


def ipm_finite(family: FunctionFamily, mu: DiscreteMeasure, gamma: DiscreteMeasure) -> float:
    """max_h E_μ h − E_γ h over the family, exact for discrete measures."""
    diff = family.values(mu.atoms) @ mu.weights - family.values(gamma.atoms) @ gamma.weights
    return float(np.max(diff))


def empirical_lipschitz(net, box, probes: int, seed: int, local_scale: float = 1e-4) -> float:
    """Max ∞-norm difference quotient over random pairs and local perturbation pairs in ``box``.

    ``net`` is a ReluNetwork or a vectorized callable; ``box`` is (low, high) with
    one entry per input coordinate.
    """
    if probes < 1000:
        raise ValueError("probes must be at least 1000")
    low = np.atleast_1d(np.asarray(box[0], dtype=np.float64))
    high = np.atleast_1d(np.asarray(box[1], dtype=np.float64))
    if low.shape != high.shape or np.any(high <= low):
        raise ValueError("degenerate box")
    d = low.size
    rng = np.random.default_rng(seed)
    f = (lambda x: evaluate(net, x)) if isinstance(net, ReluNetwork) else net
    half = probes // 2
    x = rng.uniform(low, high, (probes, d))
    y = np.empty_like(x)
    y[:half] = rng.uniform(low, high, (half, d))
    step = local_scale * (high - low)
    y[half:] = np.clip(x[half:] + rng.uniform(-1, 1, (probes - half, d)) * step, low, high)
    fx = np.asarray(f(x), dtype=np.float64).reshape(probes, -1)
    fy = np.asarray(f(y), dtype=np.float64).reshape(probes, -1)
    dx = np.max(np.abs(x - y), axis=1)
    ok = dx > 0
    if not np.any(ok):
        return 0.0
    return float(np.max(np.max(np.abs(fx - fy), axis=1)[ok] / dx[ok]))


# ------------------------------------------------------------------ error decomposition

@dataclass
class DecompositionReport:
    lhs: float
    eps_opt: float
    approx_error: float
    generator_error: float
    generalization_error: float
    rhs: float
    slack: float
    passed: bool
    comparison_pairs: int
    comparison_passed: bool

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def approximation_error(H: FunctionFamily, F: FunctionFamily, omega) -> float:
    """sup_h min_f max_{x∈Ω} |h(x) − f(x)| with Ω a finite point set."""
    hv = H.values(omega)
    fv = F.values(omega)
    gaps = np.max(np.abs(hv[:, None, :] - fv[None, :, :]), axis=2)
    return float(np.max(np.min(gaps, axis=1)))


def verify_error_decomposition(H: FunctionFamily, F: FunctionFamily, generators: Sequence[DiscreteMeasure],
                               target: DiscreteMeasure, empirical: DiscreteMeasure, omega=None,
                               tol: float = 1e-12) -> DecompositionReport:
    """Exact check of the GAN error decomposition and the IPM comparison inequality.

    Ω is the union of all atoms plus optional ``omega`` points, so the approximation
    error is an exact supremum over a set carrying every measure involved. The
    generator γ* minimizes d_F(μ̂, ·) over ``generators`` exactly (ε_opt = 0).
    """
    if not generators:
        raise ValueError("need at least one generator candidate")
    pieces = [target.atoms, empirical.atoms] + [g.atoms for g in generators]
    if omega is not None:
        pieces.append(np.atleast_2d(np.asarray(omega, dtype=np.float64)))
    support = np.unique(np.vstack(pieces), axis=0)
    if not F.is_symmetric(support):
        raise ValueError("the discriminator family must be symmetric")
    approx = approximation_error(H, F, support)
    fit = [ipm_finite(F, empirical, g) for g in generators]
    best = int(np.argmin(fit))
    gamma_star = generators[best]
    eps_opt = 0.0
    lhs = ipm_finite(H, target, gamma_star)
    generalization = min(ipm_finite(F, target, empirical), ipm_finite(H, target, empirical))
    rhs = eps_opt + 2 * approx + fit[best] + generalization
    measures = [target, empirical] + list(generators)
    comparison_ok = True
    pairs = 0
    for a, b in itertools.permutations(range(len(measures)), 2):
        pairs += 1
        if ipm_finite(H, measures[a], measures[b]) > ipm_finite(F, measures[a], measures[b]) + 2 * approx + tol:
            comparison_ok = False
    passed = lhs <= rhs + tol
    return DecompositionReport(lhs, eps_opt, approx, fit[best], generalization, rhs, rhs - lhs,
                               bool(passed and comparison_ok), pairs, comparison_ok)


def certified_lipschitz(net: ReluNetwork) -> float:
    return lipschitz_upper(net)
