"""Bound calculators, verification sweeps, rate fitting and the command-line entry point."""

from __future__ import annotations

import argparse
import concurrent.futures
import csv
import io
import itertools
import json
import math
import os
import sys
import time
from dataclasses import dataclass, field
from importlib import resources
from typing import Callable

import numpy as np

WORKERS_ENV = "RELUCONSTRUCT_WORKERS"
FLOAT_SLACK = 1e-9


# ------------------------------------------------------------------ bounds

def _need(params: dict, *keys):
    missing = [k for k in keys if k not in params]
    if missing:
        raise KeyError(f"missing parameters: {', '.join(missing)}")
    return [params[k] for k in keys]


def _holder_alpha(params: dict) -> float:
    alpha = float(_need(params, "alpha")[0])
    if "r" in params and int(params["r"]) != int(math.ceil(alpha)) - 1:
        raise ValueError(f"r={params['r']} inconsistent with alpha={alpha}")
    return alpha


def _one(p, key):
    return _need(p, key)[0]


class _FixedBound:
    """Stand-in kernel carrying only its sup bound B."""

    def __init__(self, bound: float):
        self.bound = bound


def _bound_table() -> dict[str, Callable[[dict], float]]:
    from . import holder, metrics, polynet

    def norm_kappa_cap(p):
        d, N, k = _need(p, "d", "N", "k")
        r = int(math.ceil(_holder_alpha(p))) - 1
        return holder.norm_architecture(int(d), r, int(N), int(k))["K"]

    return {
        "square_norm": lambda p: polynet.square_norm_bound(_one(p, "k")),
        "square_norm_kappa": lambda p: 3.0,
        "square_depth": lambda p: polynet.square_depth_bound(_one(p, "k")),
        "product_norm": lambda p: polynet.product_norm_bound(_one(p, "k")),
        "product_norm_kappa": lambda p: 216.0,
        "product_depth": lambda p: polynet.product_depth_bound(_one(p, "k")),
        "product_depth_derived": lambda p: polynet.product_depth_bound_derived(_one(p, "k")),
        "dproduct": lambda p: polynet.dproduct_bound(*_need(p, "d", "k")),
        "dproduct_kappa": lambda p: polynet.dproduct_kappa_cap(_one(p, "d")),
        "monomial": lambda p: polynet.monomial_bound(sum(_one(p, "s")), _one(p, "k")),
        "monomial_derived": lambda p: polynet.monomial_bound_derived(sum(_one(p, "s")), _one(p, "k")),
        "bit_extract": lambda p: 0.0,
        "data_fit": lambda p: float(_one(p, "W") * _one(p, "L")) ** (-2 * _one(p, "r")),
        "cpwl": lambda p: 1e-9,
        "holder_wd": lambda p: holder.wd_bound(int(_one(p, "d")), _holder_alpha(p), int(_one(p, "W")),
                                               int(_one(p, "L"))),
        "holder_norm": lambda p: holder.norm_bound(int(_one(p, "d")), _holder_alpha(p), int(_one(p, "N")),
                                                   int(_one(p, "k"))),
        "holder_norm_kappa": norm_kappa_cap,
        "transport_w1": lambda p: float(_one(p, "eps")),
        "transport_mmd": lambda p: 2.0 * math.sqrt(float(p.get("B", 1.0))) * float(_one(p, "eps")),
        "rademacher_upper": lambda p: metrics.rademacher_upper_bound(*_need(p, "K", "L", "d", "n"),
                                                                     float(p.get("B", 1.0))),
        "rademacher_lower": lambda p: metrics.rademacher_lower_bound(*_need(p, "K", "n")),
        "mmd_empirical": lambda p: metrics.mmd_empirical_bound(_FixedBound(float(p.get("B", 1.0))),
                                                               *_need(p, "n", "t")),
        "discretize_rate": lambda p: 0.15,
        "error_decomposition": lambda p: 0.0,
    }


BOUND_IDS = (
    "square_norm", "square_norm_kappa", "square_depth", "product_norm", "product_norm_kappa",
    "product_depth", "product_depth_derived", "dproduct", "dproduct_kappa", "monomial", "monomial_derived",
    "bit_extract", "data_fit", "cpwl", "holder_wd", "holder_norm", "holder_norm_kappa", "transport_w1",
    "transport_mmd", "rademacher_upper", "rademacher_lower", "mmd_empirical", "discretize_rate",
    "error_decomposition",
)


def theoretical_bound(construction_id: str, params: dict) -> float:
    """Closed-form bound for ``construction_id`` at ``params``."""
    if construction_id not in BOUND_IDS:
        raise KeyError(f"unknown construction id {construction_id}")
    return float(_bound_table()[construction_id](params))


# ------------------------------------------------------------------ measurements

def _kink_grid(kinks, n: int, low: float = 0.0, high: float = 1.0) -> np.ndarray:
    return np.unique(np.concatenate([np.linspace(low, high, n), np.asarray(kinks, dtype=np.float64)]))


def _measure_square_norm(p, seed, res):
    from .net_core import evaluate, norm_kappa
    from .polynet import square_net_norm

    k = int(p["k"])
    net = square_net_norm(k)
    x = _kink_grid((2 * np.arange(1, k + 1) - 1) / (2 * k), res)
    err = float(np.max(np.abs(evaluate(net, x.reshape(-1, 1)).ravel() - x ** 2)))
    return err, {"kappa": norm_kappa(net)}


def _measure_square_norm_kappa(p, seed, res):
    from .net_core import norm_kappa
    from .polynet import square_net_norm

    return norm_kappa(square_net_norm(int(p["k"]))), {}


def _measure_square_depth(p, seed, res):
    from .net_core import evaluate
    from .polynet import square_net_depth

    k = int(p["k"])
    net = square_net_depth(k)
    x = _kink_grid(np.arange(2 ** k + 1) / 2 ** k, res)
    return float(np.max(np.abs(evaluate(net, x.reshape(-1, 1)).ravel() - x ** 2))), {}


def _random_square_points(n, seed, dim=2):
    return np.random.default_rng(seed).uniform(-1.0, 1.0, (n, dim))


def _measure_product_norm(p, seed, res):
    from .net_core import evaluate, norm_kappa
    from .polynet import product_net_norm

    net = product_net_norm(int(p["k"]))
    x = _random_square_points(res, seed)
    err = float(np.max(np.abs(evaluate(net, x).ravel() - x[:, 0] * x[:, 1])))
    return err, {"kappa": norm_kappa(net)}


def _measure_product_norm_kappa(p, seed, res):
    from .net_core import norm_kappa
    from .polynet import product_net_norm

    return norm_kappa(product_net_norm(int(p["k"]))), {}


def _measure_product_depth(p, seed, res):
    from .net_core import evaluate
    from .polynet import product_net_depth

    k = int(p["k"])
    net = product_net_depth(k)
    x = _random_square_points(res, seed)
    corner = 2.0 ** (1 - k) - 1.0
    x = np.vstack([x, [[corner, corner]]])
    return float(np.max(np.abs(evaluate(net, x).ravel() - x[:, 0] * x[:, 1]))), {}


def _measure_dproduct(p, seed, res):
    from .net_core import evaluate, norm_kappa
    from .polynet import dproduct_net

    d, k = int(p["d"]), int(p["k"])
    net = dproduct_net(d, k)
    x = _random_square_points(res, seed, d)
    err = float(np.max(np.abs(evaluate(net, x).ravel() - np.prod(x, axis=1))))
    return err, {"kappa": norm_kappa(net)}


def _measure_dproduct_kappa(p, seed, res):
    from .net_core import norm_kappa
    from .polynet import dproduct_net

    return norm_kappa(dproduct_net(int(p["d"]), int(p["k"]))), {}


def _measure_monomial(p, seed, res):
    from .net_core import evaluate
    from .polynet import monomial_net

    s = [int(v) for v in p["s"]]
    net = monomial_net(s, int(p["k"]))
    x = _random_square_points(res, seed, len(s))
    target = np.prod(x ** np.asarray(s), axis=1)
    return float(np.max(np.abs(evaluate(net, x).ravel() - target))), {}


def _measure_bit_extract(p, seed, res):
    from .bitfit import bit_extract_net
    from .net_core import evaluate

    L = int(p["L"])
    net = bit_extract_net(L)
    rng = np.random.default_rng(seed)
    count = min(2 ** L, int(p.get("strings", 2 ** L)))
    ints = np.arange(2 ** L) if count == 2 ** L else rng.choice(2 ** L, size=count, replace=False)
    bits = (ints[:, None] >> np.arange(L - 1, -1, -1)[None, :]) & 1
    x = np.repeat(ints / 2.0 ** L, L)
    pos = np.tile(np.arange(1, L + 1), ints.size)
    out = np.rint(evaluate(net, np.column_stack([x, pos])).ravel())
    return float(np.sum(out != bits.reshape(-1))), {}


def _measure_data_fit(p, seed, res):
    from .bitfit import data_fit_net
    from .net_core import evaluate

    W, L, r = int(p["W"]), int(p["L"]), int(p["r"])
    values = np.random.default_rng(seed).uniform(0, 1, W * W * L * L)
    net = data_fit_net(values, W, L, r)
    out = evaluate(net, np.arange(values.size, dtype=np.float64).reshape(-1, 1)).ravel()
    return float(np.max(np.abs(out - values))), {"width": net.width, "depth": net.depth}


def _measure_cpwl(p, seed, res):
    from .cpwl import CpwlPath, compile_cpwl, cpwl_eval
    from .net_core import evaluate

    d, W, L = int(p["d"]), int(p["W"]), int(p["L"])
    rng = np.random.default_rng(seed)
    N = (W // (6 * d)) * W * L
    bp = np.sort(rng.uniform(0, 1, N + 2))
    path = CpwlPath(bp, rng.uniform(-1, 1, (N + 2, d)))
    net = compile_cpwl(path, W, L)
    t = _kink_grid(bp, res, -0.25, 1.25)
    dev = float(np.max(np.abs(evaluate(net, t.reshape(-1, 1)) - cpwl_eval(path, t))))
    ok_shape = net.width <= W + d + 1 and net.depth <= 2 * L
    return dev if ok_shape else math.inf, {"width": net.width, "depth": net.depth}


def _holder_target(p):
    from .holder import target_by_name

    return target_by_name(str(p["target"]))


def _fill_holder_params(p):
    h = _holder_target(p)
    q = dict(p)
    q.setdefault("d", h.dim)
    q.setdefault("alpha", h.alpha)
    return q, h


def _measure_holder_wd(p, seed, res):
    from .holder import holder_approx_wd

    _, h = _fill_holder_params(p)
    net, rep = holder_approx_wd(h, int(p["W"]), int(p["L"]), resolution=res)
    return rep.measured, {"certified": rep.certified, "kappa": rep.kappa, "width": rep.width, "depth": rep.depth}


def _measure_holder_norm(p, seed, res):
    from .holder import holder_approx_norm

    _, h = _fill_holder_params(p)
    net, rep = holder_approx_norm(h, int(p["N"]), int(p["k"]), resolution=res)
    return rep.measured, {"certified": rep.certified, "kappa": rep.kappa, "width": rep.width, "depth": rep.depth}


def _measure_holder_norm_kappa(p, seed, res):
    from .holder import holder_norm_net
    from .net_core import norm_kappa

    _, h = _fill_holder_params(p)
    return norm_kappa(holder_norm_net(h, int(p["N"]), int(p["k"]))), {}


def random_admissible_measure(seed: int, max_atoms: int, max_dim: int, eps: float):
    """Seeded random discrete target whose precondition admits ``eps``."""
    from .distgen import DiscreteMeasure, max_transport_eps, precondition_order

    rng = np.random.default_rng(seed)
    while True:
        d = int(rng.integers(1, max_dim + 1))
        k = int(rng.integers(2, max_atoms + 1))
        w = rng.dirichlet(np.full(k, 5.0))
        w[-1] = 1.0 - w[:-1].sum()
        mu = precondition_order(DiscreteMeasure(rng.uniform(0, 1, (k, d)), w))
        if max_transport_eps(mu) > eps:
            return mu


def _measure_transport_w1(p, seed, res):
    from .distgen import pushforward_samples, transport_net, uniform_source
    from .metrics import bootstrap_w1

    eps = float(p["eps"])
    mu = random_admissible_measure(seed, int(p.get("atoms", 10)), int(p.get("dim", 3)), float(p.get("admit", eps)))
    net = transport_net(mu, uniform_source(), eps)
    pts = pushforward_samples(net, uniform_source(), int(p.get("samples", 100_000)), seed)
    w1, se = bootstrap_w1(mu, pts, int(p.get("resamples", 10)), seed)
    return w1, {"se": se, "bound_slack": 3 * se}


def _measure_transport_mmd(p, seed, res):
    from .distgen import compress_samples, pushforward_samples, transport_net, uniform_source
    from .metrics import KernelSpec, mmd_empirical

    eps = float(p["eps"])
    mu = random_admissible_measure(seed, int(p.get("atoms", 10)), int(p.get("dim", 3)), float(p.get("admit", eps)))
    net = transport_net(mu, uniform_source(), eps, mass_rule="mmd")
    n = int(p.get("samples", 100_000))
    pts = pushforward_samples(net, uniform_source(), n, seed)
    kernel = KernelSpec("gaussian", float(p.get("bandwidth", 1.0)))
    value, se = mmd_empirical(mu, compress_samples(pts, mu.atoms), n, kernel)
    return value, {"se": se, "bound_slack": 3 * se}


def _measure_rademacher(p, seed, res, side):
    from .metrics import norm_class_vectors, rademacher_mc

    n, d, K, L = int(p["n"]), int(p["d"]), float(p["K"]), int(p["L"])
    pts = np.random.default_rng(seed).uniform(0, 1, (n, d))
    vecs = norm_class_vectors(pts, int(p.get("W", 8)), L, K, int(p.get("draws", 200)), seed)
    est, se = rademacher_mc(vecs, int(p.get("trials", 2000)), seed)
    if side == "lower":
        # pass iff estimate ≥ lower − 3se, expressed as measured ≤ bound with measured = lower − estimate
        return -est, {"se": se, "estimate": est, "bound_slack": 3 * se, "negate": True}
    return est, {"se": se, "bound_slack": 3 * se}


def _measure_discretize_rate(p, seed, res):
    from .distgen import DiscreteMeasure, discretize_measure
    from .metrics import wasserstein_1d, wasserstein_discrete

    d = int(p["d"])
    x = np.random.default_rng(seed).uniform(0, 1, (int(p.get("samples", 10_000)), d))
    emp = DiscreteMeasure.from_points(x)
    ns = [int(v) for v in p.get("ns", [4, 8, 16, 32, 64, 128, 256])]
    errs = []
    for n in ns:
        g = discretize_measure(x, n, float(p.get("q", 4.0)))
        errs.append(wasserstein_1d(emp, g) if d == 1 else wasserstein_discrete(emp, g, max_atoms=x.shape[0] + n))
    slope, _, _ = rate_fit(list(zip(ns, errs)))
    return abs(slope + 1.0 / d), {"slope": slope}


def _measure_error_decomposition(p, seed, res):
    from .distgen import DiscreteMeasure
    from .metrics import FunctionFamily, verify_error_decomposition

    rng = np.random.default_rng(seed)
    size = int(p.get("family", 30))

    def random_cpwl(r):
        knots = np.sort(r.uniform(0, 1, 4))
        vals = r.uniform(-1, 1, 4)
        return lambda x: np.interp(np.asarray(x)[:, 0], knots, vals)

    H = FunctionFamily(tuple(random_cpwl(rng) for _ in range(size)), 1.0)
    F = FunctionFamily(tuple(random_cpwl(rng) for _ in range(size // 2)), 1.0).symmetrized()

    def random_measure(k):
        return DiscreteMeasure.from_points(rng.uniform(0, 1, (k, 1)), rng.dirichlet(np.ones(k)))

    target = random_measure(8)
    empirical = random_measure(6)
    gens = [random_measure(5) for _ in range(int(p.get("generators", 10)))]
    rep = verify_error_decomposition(H, F, gens, target, empirical)
    violation = max(rep.lhs - rep.rhs, 0.0) + (0.0 if rep.comparison_passed else 1.0)
    return violation, {"slack": rep.slack}


MEASURES: dict[str, Callable] = {
    "square_norm": _measure_square_norm,
    "square_norm_kappa": _measure_square_norm_kappa,
    "square_depth": _measure_square_depth,
    "product_norm": _measure_product_norm,
    "product_norm_kappa": _measure_product_norm_kappa,
    "product_depth": _measure_product_depth,
    "product_depth_derived": _measure_product_depth,
    "dproduct": _measure_dproduct,
    "dproduct_kappa": _measure_dproduct_kappa,
    "monomial": _measure_monomial,
    "monomial_derived": _measure_monomial,
    "bit_extract": _measure_bit_extract,
    "data_fit": _measure_data_fit,
    "cpwl": _measure_cpwl,
    "holder_wd": _measure_holder_wd,
    "holder_norm": _measure_holder_norm,
    "holder_norm_kappa": _measure_holder_norm_kappa,
    "transport_w1": _measure_transport_w1,
    "transport_mmd": _measure_transport_mmd,
    "rademacher_upper": lambda p, s, r: _measure_rademacher(p, s, r, "upper"),
    "rademacher_lower": lambda p, s, r: _measure_rademacher(p, s, r, "lower"),
    "discretize_rate": _measure_discretize_rate,
    "error_decomposition": _measure_error_decomposition,
}


# ------------------------------------------------------------------ reports and sweeps

@dataclass
class VerificationReport:
    construction_id: str
    params: dict
    measured: float | None
    bound: float | None
    passed: bool
    seed: int
    runtime_ms: float = 0.0
    error: str | None = None
    extras: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "id": self.construction_id,
            "params": self.params,
            "measured": self.measured,
            "bound": self.bound,
            "pass": self.passed,
            "seed": self.seed,
            "runtime_ms": self.runtime_ms,
            "error": self.error,
            "extras": self.extras,
        }


@dataclass
class SweepConfig:
    items: list

    @classmethod
    def from_dict(cls, data: dict) -> "SweepConfig":
        items = data.get("items", [])
        for item in items:
            if "id" not in item:
                raise ValueError("every item needs an id")
            grid = item.get("grid", {})
            if any(not isinstance(v, list) or not v for v in grid.values()):
                raise ValueError(f"grid of {item['id']} must map names to nonempty lists")
            if int(item.get("resolution", 1000)) < 1000:
                raise ValueError("resolution must be at least 1000 points per slice")
        return cls(list(items))

    @classmethod
    def from_json(cls, text: str) -> "SweepConfig":
        return cls.from_dict(json.loads(text))

    def expand(self) -> list[tuple[str, dict, int, int]]:
        """(id, params, seed, resolution) in config order."""
        out = []
        for item in self.items:
            grid = item.get("grid", {})
            fixed = item.get("fixed", {})
            keys = list(grid)
            for combo in itertools.product(*(grid[k] for k in keys)):
                params = dict(fixed)
                params.update(dict(zip(keys, combo)))
                for seed in item.get("seeds", [0]):
                    out.append((item["id"], params, int(seed), int(item.get("resolution", 1000))))
        return out


def run_item(task) -> VerificationReport:
    cid, params, seed, resolution = task
    start = time.perf_counter()
    try:
        if cid not in MEASURES:
            raise KeyError(f"unknown construction id {cid}")
        measured, extras = MEASURES[cid](params, seed, resolution)
        bound_params = params
        if cid.startswith("holder"):
            bound_params, _ = _fill_holder_params(params)
        bound = theoretical_bound(cid, bound_params)
        if extras.pop("negate", False):
            bound = -bound
        bound += extras.get("bound_slack", 0.0)
        passed = bool(measured <= bound + FLOAT_SLACK)
        error = None
    except Exception as exc:  # recorded per item, never aborts the sweep
        measured, bound, passed, extras = None, None, False, {}
        error = f"{type(exc).__name__}: {exc}"
    runtime = (time.perf_counter() - start) * 1000.0
    return VerificationReport(cid, params, measured, bound, passed, seed, runtime, error, extras)


def worker_count() -> int:
    try:
        return max(1, int(os.environ.get(WORKERS_ENV, "1")))
    except ValueError:
        return 1


def run_suite(config: SweepConfig, workers: int | None = None) -> list[VerificationReport]:
    """Run every expanded item; report order follows the config regardless of completion order."""
    tasks = config.expand()
    workers = worker_count() if workers is None else workers
    if workers <= 1 or len(tasks) <= 1:
        return [run_item(t) for t in tasks]
    with concurrent.futures.ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(run_item, tasks))


def _flatten(prefix: str, value, out: dict):
    if isinstance(value, dict):
        for k in sorted(value):
            _flatten(f"{prefix}.{k}", value[k], out)
    elif isinstance(value, (list, tuple)):
        out[prefix] = "[" + ";".join(str(v) for v in value) + "]"
    else:
        out[prefix] = value


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def reports_to_csv(reports: list[VerificationReport]) -> str:
    """id, flattened params (dotted keys), bound, measured, pass, seed, error, runtime_ms."""
    flat = []
    keys = set()
    for rep in reports:
        row = {}
        _flatten("params", rep.params, row)
        keys.update(row)
        flat.append(row)
    param_cols = sorted(keys)
    header = ["id"] + param_cols + ["bound", "measured", "pass", "seed", "error", "runtime_ms"]
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for rep, row in zip(reports, flat):
        writer.writerow([rep.construction_id] + [_fmt(row.get(c)) for c in param_cols]
                        + [_fmt(rep.bound), _fmt(rep.measured), _fmt(rep.passed), str(rep.seed),
                           rep.error or "", f"{rep.runtime_ms:.3f}"])
    return buf.getvalue()


def csv_body_without_runtime(text: str) -> str:
    rows = list(csv.reader(io.StringIO(text)))
    return "\n".join(",".join(r[:-1]) for r in rows)


def rate_fit(pairs) -> tuple[float, float, float]:
    """Least-squares fit log(error) = slope·log(n) + intercept; returns (slope, intercept, r²)."""
    arr = np.asarray(list(pairs), dtype=np.float64)
    if arr.ndim != 2 or arr.shape[0] < 4 or arr.shape[1] != 2:
        raise ValueError("need at least 4 (n, error) pairs")
    if np.any(arr <= 0):
        raise ValueError("n and error must be positive")
    x, y = np.log(arr[:, 0]), np.log(arr[:, 1])
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    total = np.sum((y - y.mean()) ** 2)
    r2 = 1.0 - float(np.sum(resid ** 2)) / float(total) if total > 0 else 1.0
    return float(slope), float(intercept), r2


def default_config() -> SweepConfig:
    text = resources.files("reluconstruct").joinpath("default_suite.json").read_text()
    return SweepConfig.from_json(text)


# ------------------------------------------------------------------ CLI

def _parse_value(text: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def _parse_params(items) -> dict:
    params = {}
    for item in items or []:
        if "=" not in item:
            raise SystemExit(f"parameter {item!r} must look like name=value")
        key, value = item.split("=", 1)
        params[key] = _parse_value(value)
    return params


def build_network(cid: str, params: dict):
    from . import bitfit, distgen, holder, polynet

    builders = {
        "square_norm": lambda p: polynet.square_net_norm(int(p["k"])),
        "square_depth": lambda p: polynet.square_net_depth(int(p["k"])),
        "product_norm": lambda p: polynet.product_net_norm(int(p["k"])),
        "product_depth": lambda p: polynet.product_net_depth(int(p["k"])),
        "dproduct": lambda p: polynet.dproduct_net(int(p["d"]), int(p["k"])),
        "monomial": lambda p: polynet.monomial_net([int(v) for v in p["s"]], int(p["k"])),
        "bit_extract": lambda p: bitfit.bit_extract_net(int(p["L"])),
        "data_fit": lambda p: bitfit.data_fit_net(p["values"], int(p["W"]), int(p["L"]), int(p["r"])),
        "mid": lambda p: holder.mid_net(),
        "holder_wd": lambda p: holder.holder_approx_wd(holder.target_by_name(p["target"]), int(p["W"]),
                                                        int(p["L"]))[0],
        "holder_norm": lambda p: holder.holder_norm_net(holder.target_by_name(p["target"]), int(p["N"]),
                                                        int(p["k"])),
        "transport": lambda p: distgen.transport_net(
            distgen.DiscreteMeasure.from_json(json.dumps(p["measure"])),
            distgen.normal_source() if p.get("source") == "normal" else distgen.uniform_source(),
            float(p["eps"]), mass_rule=p.get("mass_rule", "wasserstein")),
    }
    if cid not in builders:
        raise KeyError(f"no builder for {cid}; choose from {', '.join(sorted(builders))}")
    return builders[cid](params)


def main(argv=None) -> int:
    from .distgen import read_points_csv, write_points_csv
    from .net_core import evaluate, from_json, to_json

    parser = argparse.ArgumentParser(prog="reluconstruct", description="ReLU construction verification harness")
    sub = parser.add_subparsers(dest="command", required=True)
    p_build = sub.add_parser("build", help="build a network and write it as JSON")
    p_build.add_argument("id")
    p_build.add_argument("--param", action="append", metavar="NAME=VALUE")
    p_build.add_argument("--out", required=True)
    p_eval = sub.add_parser("eval", help="evaluate a JSON network on CSV points")
    p_eval.add_argument("--net", required=True)
    p_eval.add_argument("--input", required=True)
    p_eval.add_argument("--out")
    p_verify = sub.add_parser("verify", help="run a verification sweep")
    p_verify.add_argument("--config", help="suite JSON (default: the shipped suite)")
    p_verify.add_argument("--csv")
    p_verify.add_argument("--json")
    p_rates = sub.add_parser("rates", help="fit log-log slopes from a CSV")
    p_rates.add_argument("--csv", required=True)
    p_rates.add_argument("--x", default="n")
    p_rates.add_argument("--y", default="error")
    p_bound = sub.add_parser("bound", help="print a theoretical bound")
    p_bound.add_argument("id")
    p_bound.add_argument("--param", action="append", metavar="NAME=VALUE")
    args = parser.parse_args(argv)

    if args.command == "build":
        net = build_network(args.id, _parse_params(args.param))
        with open(args.out, "w") as fh:
            fh.write(to_json(net))
        print(f"wrote {args.out}: width {net.width}, depth {net.depth}")
        return 0
    if args.command == "eval":
        with open(args.net) as fh:
            net = from_json(fh.read())
        with open(args.input) as fh:
            pts = read_points_csv(fh.read())
        text = write_points_csv(evaluate(net, pts.reshape(-1, net.input_dim)))
        if args.out:
            with open(args.out, "w") as fh:
                fh.write(text)
        else:
            sys.stdout.write(text)
        return 0
    if args.command == "verify":
        if args.config:
            with open(args.config) as fh:
                config = SweepConfig.from_json(fh.read())
        else:
            config = default_config()
        reports = run_suite(config)
        if args.csv:
            with open(args.csv, "w") as fh:
                fh.write(reports_to_csv(reports))
        if args.json:
            with open(args.json, "w") as fh:
                json.dump([r.to_dict() for r in reports], fh, indent=1)
        failed = [r for r in reports if not r.passed]
        print(f"{len(reports) - len(failed)}/{len(reports)} passed")
        for r in failed:
            print(f"FAIL {r.construction_id} {json.dumps(r.params)} measured={r.measured} bound={r.bound} {r.error or ''}")
        return 0 if not failed else 1
    if args.command == "rates":
        with open(args.csv) as fh:
            rows = list(csv.DictReader(fh))
        pairs = [(float(r[args.x]), float(r[args.y])) for r in rows]
        slope, intercept, r2 = rate_fit(pairs)
        print(json.dumps({"slope": slope, "intercept": intercept, "r2": r2}))
        return 0
    if args.command == "bound":
        print(repr(theoretical_bound(args.id, _parse_params(args.param))))
        return 0
    return 2


if __name__ == "__main__":
    sys.exit(main())
