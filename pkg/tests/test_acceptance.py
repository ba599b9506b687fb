"""End-to-end acceptance criteria 1–12, one PASS/FAIL line each.

Tolerances and runtime budgets are the pinned acceptance values. A criterion that
cannot be met is reported as FAIL with the measured numbers; nothing is loosened.
"""

import math
import os
import subprocess
import sys
import time
from pathlib import Path

import numpy as np
import pytest

import conftest
from reluconstruct.bench_cli import csv_body_without_runtime, random_admissible_measure, rate_fit
from reluconstruct.bitfit import bit_extract_net, data_fit_net
from reluconstruct.cpwl import CpwlPath, compile_cpwl, cpwl_eval
from reluconstruct.distgen import (
    DiscreteMeasure,
    compress_samples,
    discretize_measure,
    pushforward_samples,
    transport_net,
    uniform_source,
)
from reluconstruct.holder import bundled_targets, holder_approx_norm, holder_approx_wd
from reluconstruct.metrics import (
    FunctionFamily,
    KernelSpec,
    bootstrap_w1,
    mmd_empirical,
    norm_class_vectors,
    rademacher_lower_bound,
    rademacher_mc,
    rademacher_upper_bound,
    verify_error_decomposition,
    wasserstein_1d,
    wasserstein_discrete,
)
from reluconstruct.net_core import evaluate, norm_kappa
from reluconstruct.polynet import (
    dproduct_kappa_cap,
    dproduct_net,
    monomial_bound,
    monomial_bound_derived,
    monomial_net,
    product_net_norm,
    square_net_depth,
    square_net_norm,
)

pytestmark = pytest.mark.acceptance
ROOT = Path(__file__).resolve().parent.parent
SLACK = 1e-9
NODE_TOL = 1e-12


def report(number, passed, detail, elapsed, budget=None):
    timing = f"{elapsed:.1f}s" + (f" (budget {budget}s)" if budget else "")
    line = f"CRITERION {number} {'PASS' if passed else 'FAIL'}: {detail} [{timing}]"
    conftest.ACCEPTANCE_LINES.append(line)
    print(line)
    assert passed, line


class Timer:
    def __enter__(self):
        self.start = time.perf_counter()
        return self

    def __exit__(self, *exc):
        self.elapsed = time.perf_counter() - self.start


def grid_2d(values):
    return np.array(np.meshgrid(values, values)).reshape(2, -1).T


def test_criterion_01_square_norm():
    worst_ratio, worst_kappa = 0.0, 0.0
    with Timer() as t:
        for k in (1, 2, 4, 8, 16, 32, 64):
            x = np.unique(np.concatenate([np.linspace(0, 1, 100_000), (np.arange(k) + 0.5) / k]))
            net = square_net_norm(k)
            err = np.max(np.abs(evaluate(net, x).ravel() - x ** 2))
            ok_k = err <= 1 / (2 * k * k) + SLACK
            worst_ratio = max(worst_ratio, err * 2 * k * k if ok_k else math.inf)
            worst_kappa = max(worst_kappa, norm_kappa(net))
    passed = worst_ratio <= 1 + SLACK and worst_kappa <= 3 and t.elapsed < 1
    report(1, passed, f"max err·2k² = {worst_ratio:.6f} (≤ 1), max κ = {worst_kappa:g} (≤ 3)", t.elapsed, 1)


def test_criterion_02_square_depth():
    worst_ratio, worst_node = 0.0, 0.0
    with Timer() as t:
        base = np.linspace(0, 1, 100_000)
        for k in range(1, 13):
            net = square_net_depth(k)
            mids = (2 * np.arange(2 ** k) + 1) / 2 ** (k + 1)
            x = np.unique(np.concatenate([base, mids]))
            err = np.max(np.abs(evaluate(net, x).ravel() - x ** 2))
            # absolute float slack at the node tolerance; the bound is attained at cell midpoints
            worst_ratio = max(worst_ratio, (err - NODE_TOL) / 2.0 ** (-2 * (k + 1)))
            nodes = np.arange(2 ** k + 1) / 2 ** k
            worst_node = max(worst_node, np.max(np.abs(evaluate(net, nodes).ravel() - nodes ** 2)))
    passed = worst_ratio <= 1 and worst_node <= NODE_TOL and t.elapsed < 1
    report(2, passed, f"max (err − 1e-12)/2^(−2(k+1)) = {worst_ratio:.6f} (≤ 1), node deviation {worst_node:.1e}",
           t.elapsed, 1)


def test_criterion_03_products_and_monomials():
    rng = np.random.default_rng(3)
    notes, ok = [], True
    with Timer() as t:
        pts2 = rng.uniform(-1, 1, (100_000, 2))
        worst = 0.0
        for k in (1, 2, 4, 8, 16, 32):
            net = product_net_norm(k)
            pts = np.vstack([pts2, grid_2d(np.linspace(-1, 1, 4 * k + 1))])
            err = np.max(np.abs(evaluate(net, pts).ravel() - pts[:, 0] * pts[:, 1]))
            worst = max(worst, err * k * k / 3)
            ok &= norm_kappa(net) <= 216 * (1 + 1e-12)
        ok &= worst <= 1 + SLACK
        notes.append(f"product err·k²/3 = {worst:.3f}")
        worst, worst_kappa = 0.0, 0.0
        for d in (2, 3, 4, 5, 8):
            corners = np.array(np.meshgrid(*[[-1.0, -0.5, 0.0, 0.5, 1.0]] * min(d, 5))).reshape(min(d, 5), -1).T
            corners = np.hstack([corners, np.ones((corners.shape[0], d - corners.shape[1]))])
            pts = np.vstack([rng.uniform(-1, 1, (100_000, d)), corners])
            for k in (4, 10):
                net = dproduct_net(d, k)
                err = np.max(np.abs(evaluate(net, pts).ravel() - np.prod(pts, axis=1)))
                worst = max(worst, err * k * k / (6 * d))
                worst_kappa = max(worst_kappa, norm_kappa(net) / dproduct_kappa_cap(d))
        ok &= worst <= 1 + SLACK and worst_kappa <= 1 + 1e-12
        notes.append(f"d-product err·k²/(6d) = {worst:.3f}, κ/cap = {worst_kappa:.3f}")
        worst_stated, worst_derived = 0.0, 0.0
        k = 8
        for s in ((1, 1), (2, 1), (3,), (2, 2), (2, 2, 1), (1, 1, 1, 1, 1, 1), (6,)):
            m = sum(s)
            net = monomial_net(list(s), k)
            dim = len(s)
            kinks = np.linspace(-1, 1, 2 ** (k + 1) + 1) if dim == 1 else np.linspace(-1, 1, 65)
            pts = np.vstack([rng.uniform(-1, 1, (100_000, dim)),
                             kinks.reshape(-1, 1) if dim == 1 else grid_2d(kinks) if dim == 2 else
                             np.column_stack([kinks] * dim)])
            err = np.max(np.abs(evaluate(net, pts).ravel() - np.prod(pts ** np.array(s), axis=1)))
            worst_stated = max(worst_stated, err / monomial_bound(m, k))
            worst_derived = max(worst_derived, err / monomial_bound_derived(m, k))
        ok &= worst_stated <= 1 + SLACK
        notes.append(f"monomial err/[6(m−1)2^(−2(k+1))] = {worst_stated:.3f} "
                     f"(err/[16(m−1)2^(−2(k+1))] = {worst_derived:.3f})")
    ok &= t.elapsed < 10
    report(3, bool(ok), "; ".join(notes), t.elapsed, 10)


def test_criterion_04_bit_extraction():
    wrong = 0
    with Timer() as t:
        for L in list(range(1, 11)) + [12, 16]:
            net = bit_extract_net(L)
            ints = np.arange(2 ** L) if L <= 10 else np.random.default_rng(L).integers(0, 2 ** L, 64)
            x = np.repeat(ints / 2.0 ** L, L)
            pos = np.tile(np.arange(1, L + 1), ints.size)
            got = np.rint(evaluate(net, np.column_stack([x, pos])).ravel()).reshape(ints.size, L)
            want = (ints[:, None] >> np.arange(L - 1, -1, -1)[None, :]) & 1
            wrong += int(np.sum(got != want))
    report(4, wrong == 0 and t.elapsed < 30, f"{wrong} wrong bits (exhaustive L ≤ 10, spot L ∈ {{12, 16}})",
           t.elapsed, 30)


def test_criterion_05_data_fit():
    worst = 0.0
    with Timer() as t:
        rng = np.random.default_rng(5)
        W, L = 6, 2
        idx = np.arange(W * W * L * L, dtype=float).reshape(-1, 1)
        for r in (1, 2):
            for _ in range(20):
                values = rng.uniform(0, 1, W * W * L * L)
                err = np.max(np.abs(evaluate(data_fit_net(values, W, L, r), idx).ravel() - values))
                worst = max(worst, err / (W * L) ** (-2.0 * r))
    report(5, worst <= 1 + SLACK and t.elapsed < 5, f"max err/(WL)^(−2r) = {worst:.4f}", t.elapsed, 5)


def test_criterion_06_cpwl():
    worst, arch_ok = 0.0, True
    with Timer() as t:
        rng = np.random.default_rng(6)
        shapes = [(1, 6, 2), (1, 12, 1), (2, 12, 2), (2, 24, 1), (3, 18, 2), (3, 36, 1)]
        for trial in range(100):
            d, W, L = shapes[trial % len(shapes)]
            budget = W * (W // (6 * d)) * L
            path = CpwlPath(np.sort(rng.uniform(0, 1, budget + 2)), rng.uniform(-1, 1, (budget + 2, d)))
            net = compile_cpwl(path, W, L)
            arch_ok &= net.width <= W + d + 1 and net.depth <= 2 * L
            x = np.unique(np.concatenate([np.linspace(-0.5, 1.5, 2000), path.breakpoints]))
            worst = max(worst, float(np.max(np.abs(evaluate(net, x) - cpwl_eval(path, x)))))
    report(6, worst <= 1e-9 and arch_ok and t.elapsed < 30,
           f"max deviation {worst:.2e} (≤ 1e-9), architecture within W+d+1 / 2L: {arch_ok}", t.elapsed, 30)


def test_criterion_07_holder():
    failures, count = [], 0
    with Timer() as t:
        for h in bundled_targets():
            for W in (6, 8, 10):
                for L in (2, 3):
                    _, rep = holder_approx_wd(h, W, L)
                    count += 1
                    if not rep.passed:
                        failures.append(f"wd {h.name} W={W} L={L}: {rep.measured:.3g} > {rep.bound:.3g}")
            for N in (4, 8, 16):
                for k in (4, 8, 16):
                    _, rep = holder_approx_norm(h, N, k)
                    count += 1
                    if not rep.passed:
                        failures.append(f"norm {h.name} N={N} k={k}: {rep.measured:.3g} vs {rep.bound:.3g}, "
                                        f"κ {rep.kappa:.3g} vs {rep.kappa_cap:.3g}")
    detail = f"{count - len(failures)}/{count} builds within bound (and κ ≤ K)"
    if failures:
        detail += "; " + "; ".join(failures[:3])
    report(7, not failures and t.elapsed < 300, detail, t.elapsed, 300)


def test_criterion_08_transport():
    worst_w1, worst_mmd = -math.inf, -math.inf
    with Timer() as t:
        nu = uniform_source()
        kernel = KernelSpec("gaussian", 1.0)
        n = 100_000
        for seed in range(10):
            mu = random_admissible_measure(seed, 10, 3, 0.1)
            for eps in (0.1, 0.01):
                pts = pushforward_samples(transport_net(mu, nu, eps), nu, n, seed)
                w1, se = bootstrap_w1(mu, pts, 10, seed)
                worst_w1 = max(worst_w1, w1 - (eps + 3 * se))
                pts = pushforward_samples(transport_net(mu, nu, eps, mass_rule="mmd"), nu, n, seed)
                value, se = mmd_empirical(mu, compress_samples(pts, mu.atoms), n, kernel)
                worst_mmd = max(worst_mmd, value - (2 * math.sqrt(kernel.bound) * eps + 3 * se))
    report(8, worst_w1 <= 0 and worst_mmd <= 0 and t.elapsed < 120,
           f"max W1 − (eps + 3SE) = {worst_w1:.2e}, max MMD − (2√B eps + 3SE) = {worst_mmd:.2e}", t.elapsed, 120)


def test_criterion_09_discretization_rate():
    slopes = {}
    with Timer() as t:
        for d in (1, 2):
            samples = np.random.default_rng(9).uniform(0, 1, (10_000, d))
            empirical = DiscreteMeasure.from_points(samples)
            pairs = []
            for n in (4, 8, 16, 32, 64, 128, 256):
                gamma = discretize_measure(samples, n, 4.0)
                w = wasserstein_1d(empirical, gamma) if d == 1 else wasserstein_discrete(empirical, gamma,
                                                                                        max_atoms=20_000)
                pairs.append((n, w))
            slopes[d] = rate_fit(pairs)[0]
    ok = abs(slopes[1] + 1) <= 0.15 and abs(slopes[2] + 0.5) <= 0.15 and t.elapsed < 120
    report(9, ok, f"slope d=1 {slopes[1]:.3f} (−1 ± 0.15), d=2 {slopes[2]:.3f} (−0.5 ± 0.15)", t.elapsed, 120)


def test_criterion_10_rademacher():
    notes, ok = [], True
    with Timer() as t:
        n, d = 64, 2
        pts = np.random.default_rng(10).uniform(-1, 1, (n, d))
        for K in (1.0, 4.0):
            for L in (1, 3):
                est, se = rademacher_mc(norm_class_vectors(pts, 8, L, K, 200, int(K * 10 + L)), 4000, L)
                low = rademacher_lower_bound(K, n) - 3 * se
                high = rademacher_upper_bound(K, L, d, n, 1.0) + 3 * se
                ok &= low <= est <= high
                notes.append(f"K={K:g} L={L}: {low:.3f} ≤ {est:.3f} ≤ {high:.3f}")
    report(10, bool(ok) and t.elapsed < 60, "; ".join(notes), t.elapsed, 60)


def test_criterion_11_error_decomposition():
    held = 0
    with Timer() as t:
        rng = np.random.default_rng(11)

        def cpwl():
            knots, vals = np.linspace(0, 1, 6), rng.uniform(-1, 1, 6)
            return lambda x: np.interp(np.asarray(x)[:, 0], knots, vals)

        def measure(k):
            return DiscreteMeasure(rng.uniform(0, 1, (k, 1)), rng.dirichlet(np.ones(k)))

        for _ in range(20):
            H = FunctionFamily(tuple(cpwl() for _ in range(30)), 1.0)
            F = FunctionFamily(tuple(cpwl() for _ in range(15)), 1.0).symmetrized()
            target = measure(6)
            empirical = DiscreteMeasure.from_points(target.atoms[rng.choice(6, size=20, p=target.weights)])
            rep = verify_error_decomposition(H, F, [measure(5) for _ in range(10)], target, empirical,
                                             np.linspace(0, 1, 201).reshape(-1, 1))
            held += int(rep.passed and rep.comparison_passed)
    report(11, held == 20 and t.elapsed < 30, f"{held}/20 instances satisfy both inequalities", t.elapsed, 30)


def test_criterion_12_properties_and_determinism(tmp_path):
    env = dict(os.environ, PYTHONHASHSEED="0")
    with Timer() as t:
        props = subprocess.run([sys.executable, "-m", "pytest", "-q", "-m", "property", "-p", "no:cacheprovider",
                                str(ROOT / "tests")], cwd=ROOT, env=env, capture_output=True, text=True)
        summary = props.stdout.strip().splitlines()[-1] if props.stdout.strip() else props.stderr[-200:]
        bodies, codes = [], []
        for run in range(2):
            out = tmp_path / f"verify{run}.csv"
            proc = subprocess.run([sys.executable, "-m", "reluconstruct.bench_cli", "verify", "--csv", str(out)],
                                  cwd=ROOT, env=env, capture_output=True, text=True)
            codes.append(proc.returncode)
            bodies.append(csv_body_without_runtime(out.read_text()) if out.exists() else None)
    same = bodies[0] is not None and bodies[0] == bodies[1]
    ok = props.returncode == 0 and same and codes == [0, 0]
    report(12, ok, f"property suites: {summary}; verify exit codes {codes}, CSV bodies identical: {same}",
           t.elapsed)
