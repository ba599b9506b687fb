"""Discrete measures, transport networks from a 1-D source, and shell-based discretization."""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import stats
from scipy.spatial.distance import pdist

from .cpwl import CpwlPath, compile_cpwl
from .net_core import ReluNetwork, affine_net, evaluate


@dataclass(frozen=True, eq=False)
class DiscreteMeasure:
    """Σ w_i δ_{x_i} with distinct atoms (rows of ``atoms``) and weights summing to 1."""

    atoms: np.ndarray
    weights: np.ndarray
    fallback: bool = field(default=False, compare=False)

    def __post_init__(self):
        atoms = np.asarray(self.atoms, dtype=np.float64)
        if atoms.ndim == 1:
            atoms = atoms.reshape(-1, 1)
        weights = np.asarray(self.weights, dtype=np.float64).reshape(-1)
        if atoms.shape[0] != weights.size or weights.size == 0:
            raise ValueError("need one weight per atom and at least one atom")
        if np.any(weights < 0) or not np.all(np.isfinite(weights)):
            raise ValueError("weights must be finite and nonnegative")
        if abs(weights.sum() - 1.0) > 1e-12:
            raise ValueError(f"weights sum to {weights.sum()!r}, expected 1")
        if np.unique(atoms, axis=0).shape[0] != atoms.shape[0]:
            raise ValueError("atoms must be pairwise distinct")
        object.__setattr__(self, "atoms", atoms)
        object.__setattr__(self, "weights", weights)

    @property
    def dim(self) -> int:
        return self.atoms.shape[1]

    @property
    def size(self) -> int:
        return self.atoms.shape[0]

    @classmethod
    def from_points(cls, points, weights=None) -> "DiscreteMeasure":
        """Merge repeated points; uniform weights unless given, then renormalized."""
        pts = np.asarray(points, dtype=np.float64)
        if pts.ndim == 1:
            pts = pts.reshape(-1, 1)
        w = np.full(pts.shape[0], 1.0) if weights is None else np.asarray(weights, dtype=np.float64)
        uniq, inverse = np.unique(pts, axis=0, return_inverse=True)
        merged = np.bincount(inverse.reshape(-1), weights=w, minlength=uniq.shape[0])
        keep = merged > 0
        merged = merged[keep] / merged[keep].sum()
        return cls(uniq[keep], _fix_sum(merged))

    def to_json(self) -> str:
        return json.dumps({"atoms": self.atoms.tolist(), "weights": self.weights.tolist()})

    @classmethod
    def from_json(cls, text: str) -> "DiscreteMeasure":
        data = json.loads(text)
        return cls(np.asarray(data["atoms"], dtype=np.float64), np.asarray(data["weights"], dtype=np.float64))

    def mean(self) -> np.ndarray:
        return self.weights @ self.atoms

    def expect(self, fn: Callable[[np.ndarray], np.ndarray]) -> float:
        return float(self.weights @ np.asarray(fn(self.atoms), dtype=np.float64).reshape(-1))


def _fix_sum(w: np.ndarray) -> np.ndarray:
    """Push the rounding residue of a normalized weight vector into its largest entry."""
    w = np.asarray(w, dtype=np.float64).copy()
    w[np.argmax(w)] += 1.0 - w.sum()
    return w


def read_points_csv(text: str) -> np.ndarray:
    rows = [[float(v) for v in row] for row in csv.reader(io.StringIO(text)) if row]
    return np.asarray(rows, dtype=np.float64)


def write_points_csv(points) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    for row in np.atleast_2d(np.asarray(points, dtype=np.float64)):
        writer.writerow([repr(float(v)) for v in row])
    return buf.getvalue()


# ------------------------------------------------------------------ sources

@dataclass(frozen=True, eq=False)
class SourceDistribution:
    """Absolutely continuous law on R described by its quantile function."""

    quantile: Callable[[np.ndarray], np.ndarray]
    tag: str

    def sample(self, n: int, seed: int) -> np.ndarray:
        u = np.random.default_rng(seed).uniform(0.0, 1.0, n)
        u = np.clip(u, np.finfo(float).tiny, 1.0 - np.finfo(float).eps)
        return np.asarray(self.quantile(u), dtype=np.float64)

    def is_monotone(self, points: int = 1001) -> bool:
        u = np.linspace(1e-6, 1 - 1e-6, points)
        return bool(np.all(np.diff(self.quantile(u)) >= 0))


def uniform_source(low: float = 0.0, high: float = 1.0) -> SourceDistribution:
    return SourceDistribution(lambda u: low + (high - low) * np.asarray(u, dtype=np.float64), f"uniform({low},{high})")


def normal_source(mean: float = 0.0, scale: float = 1.0) -> SourceDistribution:
    return SourceDistribution(lambda u: stats.norm.ppf(u, loc=mean, scale=scale), f"normal({mean},{scale})")


# ------------------------------------------------------------------ transport

def _consecutive_gaps(atoms: np.ndarray) -> np.ndarray:
    return np.max(np.abs(np.diff(atoms, axis=0)), axis=1)


def max_transport_eps(mu: DiscreteMeasure, p: float = 1.0) -> float:
    """Supremum of admissible eps: min_i (m p_i)^{1/p} ||x_i − x_{i−1}||_∞ over i ≥ 1."""
    if mu.size < 2:
        return math.inf
    m = mu.size - 1
    return float(np.min((m * mu.weights[1:]) ** (1.0 / p) * _consecutive_gaps(mu.atoms)))


def transport_cuts(mu: DiscreteMeasure, nu: SourceDistribution, eps: float, p: float = 1.0,
                   mass_rule: str = "wasserstein") -> np.ndarray:
    """Cut points z_{1/2} < z_1 < … < z_m from the source quantile at the prescribed cumulative masses.

    ``mass_rule="wasserstein"`` puts ε^p/(m||x_i − x_{i−1}||^p_∞) on segment i;
    ``"mmd"`` puts ε/m on every segment.
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    if np.any(mu.weights <= 0):
        raise ValueError("atoms with zero weight must be removed first")
    m = mu.size - 1
    gaps = _consecutive_gaps(mu.atoms)
    if mass_rule == "wasserstein":
        seg = eps ** p / (m * gaps ** p)
    elif mass_rule == "mmd":
        seg = np.full(m, eps / m)
    else:
        raise ValueError(f"unknown mass rule {mass_rule}")
    if np.any(seg >= mu.weights[1:]):
        raise ValueError("eps too large for the atom spacing and weights")
    cum = np.cumsum(mu.weights)
    levels = np.empty(2 * m)
    levels[0::2] = cum[:-1]  # z_{i−1/2}: mass up to atom i−1
    levels[1::2] = cum[:-1] + seg  # z_i
    z = np.asarray(nu.quantile(levels), dtype=np.float64)
    if not np.all(np.isfinite(z)) or np.any(np.diff(z) <= 0):
        raise ValueError("source quantiles do not separate the cut points")
    return z


def transport_capacity(m: int, d: int) -> tuple[int, int]:
    """Smallest W ≥ 6d (at L = 1) whose breakpoint budget ⌊W/(6d)⌋W covers the 2m − 2 interior cuts."""
    need = max(2 * m - 2, 0)
    W = 6 * d
    while (W // (6 * d)) * W < need:
        W += 1
    return W, 1


def transport_net(mu: DiscreteMeasure, nu: SourceDistribution, eps: float, p: float = 1.0,
                  mass_rule: str = "wasserstein") -> ReluNetwork:
    """Network φ: R -> R^d with W_p(μ, φ_#ν) ≤ eps (or MMD ≤ 2√B eps for ``mass_rule="mmd"``)."""
    if mu.size < 2:
        return affine_net(np.zeros((mu.dim, 1)), mu.atoms[0])
    if mass_rule == "wasserstein" and eps >= max_transport_eps(mu, p):
        raise ValueError(f"eps={eps} violates the precondition eps < {max_transport_eps(mu, p)}")
    z = transport_cuts(mu, nu, eps, p, mass_rule)
    m = mu.size - 1
    values = np.empty((2 * m, mu.dim))
    values[0] = mu.atoms[0]
    for i in range(1, m + 1):
        values[2 * i - 1] = mu.atoms[i]
        if 2 * i < 2 * m:
            values[2 * i] = mu.atoms[i]
    W, L = transport_capacity(m, mu.dim)
    return compile_cpwl(CpwlPath(z, values), W, L)


def nearest_neighbor_order(mu: DiscreteMeasure, start: int = 0) -> DiscreteMeasure:
    """Reorder atoms along a greedy ∞-norm nearest-neighbor path (ties by lower index)."""
    n = mu.size
    remaining = list(range(n))
    order = [remaining.pop(start)]
    while remaining:
        last = mu.atoms[order[-1]]
        dist = np.max(np.abs(mu.atoms[remaining] - last), axis=1)
        order.append(remaining.pop(int(np.argmin(dist))))
    return DiscreteMeasure(mu.atoms[order], mu.weights[order])


def _greedy_precondition_path(mu: DiscreteMeasure, start: int) -> DiscreteMeasure:
    n = mu.size
    m = max(n - 1, 1)
    remaining = list(range(n))
    order = [remaining.pop(start)]
    while remaining:
        last = mu.atoms[order[-1]]
        score = m * mu.weights[remaining] * np.max(np.abs(mu.atoms[remaining] - last), axis=1)
        order.append(remaining.pop(int(np.argmax(score))))
    return DiscreteMeasure(mu.atoms[order], mu.weights[order])


def precondition_order(mu: DiscreteMeasure) -> DiscreteMeasure:
    """Atom order admitting the largest eps among a few candidate paths.

    Candidates are the input order, the nearest-neighbor path, and from every start
    a greedy path taking next the atom j that maximizes (m p_j)·||x_j − x_last||_∞.
    The result never admits a smaller eps than the input order or the
    nearest-neighbor path (which shortens consecutive gaps and so tightens it).
    Ties keep the earlier candidate.
    """
    candidates = [mu, nearest_neighbor_order(mu)]
    candidates += [_greedy_precondition_path(mu, start) for start in range(mu.size)]
    scores = [max_transport_eps(c) for c in candidates]
    return candidates[int(np.argmax(scores))]


def pushforward_samples(net: ReluNetwork, nu: SourceDistribution, n: int, seed: int) -> np.ndarray:
    z = nu.sample(n, seed)
    return evaluate(net, z.reshape(-1, 1))


def compress_samples(points, atoms=None, tol: float = 1e-9) -> DiscreteMeasure:
    """Empirical measure of ``points``; points within ``tol`` (∞-norm) of an atom are snapped onto it."""
    pts = np.array(points, dtype=np.float64)
    if pts.ndim == 1:
        pts = pts.reshape(-1, 1)
    if atoms is not None:
        atoms = np.asarray(atoms, dtype=np.float64)
        for a in atoms:
            close = np.max(np.abs(pts - a), axis=1) <= tol
            pts[close] = a
    return DiscreteMeasure.from_points(pts)


# ------------------------------------------------------------------ covering and moments

def _greedy_cover(points: np.ndarray, eps: float) -> int:
    centers = np.empty((0, points.shape[1]))
    for x in points:
        if centers.shape[0] and np.min(np.max(np.abs(centers - x), axis=1)) <= eps:
            continue
        centers = np.vstack([centers, x])
    return centers.shape[0]


def covering_number(points, eps: float, monotone: bool = True) -> int:
    """Greedy ∞-norm ε-cover size, processing points in the given order.

    A cover at ε' ≤ ε is also a cover at ε, so with ``monotone`` the result is the
    minimum of the greedy count over every ε' ≤ ε. The greedy count only changes
    when ε' crosses a pairwise distance, so the minimum is taken exactly over those
    distances. The plain greedy count is not monotone in ε in general.
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    pts = np.asarray(points, dtype=np.float64)
    if pts.ndim == 1:
        pts = pts.reshape(-1, 1)
    if pts.shape[0] <= 1:
        return int(pts.shape[0])
    best = _greedy_cover(pts, eps)
    if not monotone:
        return best
    dists = np.unique(pdist(pts, metric="chebyshev"))
    for t in dists[(dists > 0) & (dists < eps)][::-1]:
        best = min(best, _greedy_cover(pts, float(t)))
    return int(best)


def moment(samples, q: float) -> float:
    """(mean ||x||_∞^q)^{1/q}."""
    if q < 1:
        raise ValueError("q must be at least 1")
    pts = np.asarray(samples, dtype=np.float64)
    if pts.ndim == 1:
        pts = pts.reshape(-1, 1)
    norms = np.max(np.abs(pts), axis=1)
    return float(np.mean(norms ** q) ** (1.0 / q))


# ------------------------------------------------------------------ discretization

@dataclass(frozen=True)
class ShellSchedule:
    k: int
    counts: tuple  # atoms budget n_j per shell j = 0..k
    branch: str


def shell_schedule(n: int, d: int, q: float, p: float = 1.0) -> ShellSchedule:
    """Shell count k and per-shell budgets n_j (covering constant C = 1)."""
    if q > p + p / d:
        k = int(math.floor(math.log2(n))) - 1
        return ShellSchedule(k, tuple(2 ** (k - j) for j in range(k + 1)), "moment-rich")
    if q <= p:
        raise ValueError("need q > p")
    k = int(math.ceil(p / (d * (q - p)) * math.log2(n)))
    m = (n - 1) // (k + 1)
    return ShellSchedule(k, tuple([m] * (k + 1)), "borderline")


def _shell_index(norms: np.ndarray) -> np.ndarray:
    """j with x ∈ B_j: j = 0 for ||x|| ≤ 1, else the j with 2^{j−1} < ||x|| ≤ 2^j."""
    j = np.zeros(norms.shape, dtype=np.int64)
    outer = norms > 1.0
    j[outer] = np.ceil(np.log2(norms[outer])).astype(np.int64)
    # correct float edge cases so that 2^{j−1} < ||x|| ≤ 2^j
    j[outer & (norms > 2.0 ** j)] += 1
    j[outer & (norms <= 2.0 ** (j - 1))] -= 1
    return j


def discretize_measure(samples, n: int, q: float, p: float = 1.0) -> DiscreteMeasure:
    """Discrete γ with at most n atoms approximating the empirical measure of ``samples``.

    Shells B_0 = {||x||_∞ ≤ 1}, B_j = 2^j B_0 minus 2^{j−1} B_0. Shell j is covered by a
    g_j^d grid of cubes of half-width 2^j/g_j over [−2^j, 2^j]^d with g_j = ⌊n_j^{1/d}⌋,
    every sample moves to the center of its cube, and mass beyond shell k goes to the
    origin. When the samples already have at most n distinct points, their empirical
    measure is returned unchanged.
    """
    pts = np.asarray(samples, dtype=np.float64)
    if pts.ndim == 1:
        pts = pts.reshape(-1, 1)
    if pts.shape[0] == 0:
        raise ValueError("samples must be nonempty")
    if n < 2:
        raise ValueError("n must be at least 2")
    if np.unique(pts, axis=0).shape[0] <= n:
        return DiscreteMeasure.from_points(pts)
    d = pts.shape[1]
    schedule = shell_schedule(n, d, q, p)
    if min(schedule.counts) < 1:
        centroid = pts.mean(axis=0, keepdims=True)
        return DiscreteMeasure(centroid, np.ones(1), fallback=True)
    norms = np.max(np.abs(pts), axis=1)
    shells = _shell_index(norms)
    mapped = np.zeros_like(pts)
    for j, budget in enumerate(schedule.counts):
        mask = shells == j
        if not np.any(mask):
            continue
        g = int(math.floor(budget ** (1.0 / d) + 1e-12))
        while g ** d > budget:
            g -= 1
        while (g + 1) ** d <= budget:
            g += 1
        half = 2.0 ** j / g
        cell = np.floor((pts[mask] + 2.0 ** j) / (2 * half))
        cell = np.clip(cell, 0, g - 1)
        mapped[mask] = -2.0 ** j + (2 * cell + 1) * half
    # tail beyond shell k stays at the origin
    return DiscreteMeasure.from_points(mapped)
