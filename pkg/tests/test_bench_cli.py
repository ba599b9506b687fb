import csv
import io
import json
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from reluconstruct.bench_cli import (
    BOUND_IDS,
    SweepConfig,
    csv_body_without_runtime,
    main,
    rate_fit,
    reports_to_csv,
    run_suite,
    theoretical_bound,
)

SAMPLE_PARAMS = {
    "square_norm": {"k": 4},
    "square_norm_kappa": {"k": 4},
    "square_depth": {"k": 3},
    "product_norm": {"k": 4},
    "product_norm_kappa": {"k": 4},
    "product_depth": {"k": 4},
    "product_depth_derived": {"k": 4},
    "dproduct": {"d": 4, "k": 10},
    "dproduct_kappa": {"d": 4},
    "monomial": {"s": [2, 1], "k": 8},
    "monomial_derived": {"s": [2, 1], "k": 8},
    "bit_extract": {"L": 4},
    "data_fit": {"W": 6, "L": 2, "r": 1},
    "cpwl": {"d": 1, "W": 6, "L": 1},
    "holder_wd": {"d": 1, "alpha": 1.0, "r": 0, "W": 8, "L": 2},
    "holder_norm": {"d": 1, "alpha": 1.0, "N": 8, "k": 8},
    "holder_norm_kappa": {"d": 1, "alpha": 1.0, "N": 8, "k": 8},
    "transport_w1": {"eps": 0.1},
    "transport_mmd": {"eps": 0.1},
    "rademacher_upper": {"K": 4.0, "L": 3, "d": 2, "n": 64},
    "rademacher_lower": {"K": 4.0, "n": 64},
    "mmd_empirical": {"n": 100, "t": 1.0},
    "discretize_rate": {"d": 1},
    "error_decomposition": {},
}

SMALL_CONFIG = {
    "items": [
        {"id": "square_norm", "grid": {"k": [1, 4]}},
        {"id": "dproduct", "grid": {"d": [2, 3], "k": [4]}},
        {"id": "transport_w1", "grid": {"eps": [0.1]}, "fixed": {"admit": 0.1, "samples": 5000}, "seeds": [0, 1]},
        {"id": "rademacher_lower", "grid": {"K": [1.0], "L": [1], "n": [64], "d": [2]}},
        {"id": "error_decomposition", "seeds": [3]},
    ]
}


def test_bound_examples():
    assert theoretical_bound("square_norm", {"k": 4}) == 1 / 32
    assert theoretical_bound("dproduct", {"d": 4, "k": 10}) == pytest.approx(0.24)
    assert theoretical_bound("holder_wd", {"d": 1, "alpha": 1.0, "r": 0, "W": 8, "L": 2}) == 6 / 256
    assert theoretical_bound("data_fit", {"W": 6, "L": 2, "r": 1}) == 12.0 ** -2
    assert theoretical_bound("rademacher_upper", {"K": 1.0, "L": 1, "d": 2, "n": 64}) == pytest.approx(
        2 * math.sqrt(3 + math.log(3)) / 8)


def test_bound_errors():
    with pytest.raises(KeyError):
        theoretical_bound("no_such_thing", {})
    with pytest.raises(KeyError):
        theoretical_bound("dproduct", {"d": 4})
    with pytest.raises(ValueError):
        theoretical_bound("holder_wd", {"d": 1, "alpha": 1.0, "r": 2, "W": 8, "L": 2})


def test_bound_total_on_declared_ids():
    assert set(SAMPLE_PARAMS) == set(BOUND_IDS)
    for cid in BOUND_IDS:
        first = theoretical_bound(cid, dict(SAMPLE_PARAMS[cid]))
        assert math.isfinite(first) and first == theoretical_bound(cid, dict(SAMPLE_PARAMS[cid]))


def test_empty_suite(tmp_path):
    assert run_suite(SweepConfig.from_dict({"items": []})) == []
    path = tmp_path / "empty.json"
    path.write_text('{"items": []}')
    assert main(["verify", "--config", str(path)]) == 0


def test_config_validation():
    with pytest.raises(ValueError):
        SweepConfig.from_dict({"items": [{"grid": {"k": [1]}}]})
    with pytest.raises(ValueError):
        SweepConfig.from_dict({"items": [{"id": "square_norm", "grid": {"k": []}}]})
    with pytest.raises(ValueError):
        SweepConfig.from_dict({"items": [{"id": "square_norm", "resolution": 999}]})


def test_violated_precondition_recorded(tmp_path):
    config = {"items": [
        {"id": "square_norm", "grid": {"k": [2]}},
        {"id": "transport_w1", "grid": {"eps": [10.0]}, "fixed": {"admit": 0.01, "samples": 1000}},
        {"id": "mystery", "grid": {"k": [1]}},
    ]}
    reports = run_suite(SweepConfig.from_dict(config))
    assert [r.passed for r in reports] == [True, False, False]
    assert "ValueError" in reports[1].error and "KeyError" in reports[2].error
    path = tmp_path / "bad.json"
    path.write_text(json.dumps(config))
    assert main(["verify", "--config", str(path)]) == 1


def test_report_order_and_determinism():
    config = SweepConfig.from_dict(SMALL_CONFIG)
    first = run_suite(config)
    assert [r.construction_id for r in first] == [t[0] for t in config.expand()]
    assert all(r.passed for r in first), [r.to_dict() for r in first if not r.passed]
    second = run_suite(config, workers=2)
    assert csv_body_without_runtime(reports_to_csv(first)) == csv_body_without_runtime(reports_to_csv(second))


def test_csv_schema():
    reports = run_suite(SweepConfig.from_dict({"items": [{"id": "dproduct", "grid": {"d": [2], "k": [3]}}]}))
    rows = list(csv.reader(io.StringIO(reports_to_csv(reports))))
    assert rows[0] == ["id", "params.d", "params.k", "bound", "measured", "pass", "seed", "error", "runtime_ms"]
    assert rows[1][0] == "dproduct" and rows[1][5] == "true"


def test_rate_fit_examples():
    ns = [4, 8, 16, 32, 64, 128]
    slope, intercept, r2 = rate_fit([(n, 3.0 / n) for n in ns])
    assert abs(slope + 1) <= 1e-9 and intercept == pytest.approx(math.log(3)) and r2 == pytest.approx(1.0)
    rng = np.random.default_rng(0)
    slope, _, _ = rate_fit([(n, n ** -0.5 * (1 + 0.01 * rng.normal())) for n in ns])
    assert abs(slope + 0.5) <= 0.05
    slope, _, _ = rate_fit([(n, 0.2) for n in ns])
    assert abs(slope) <= 1e-12
    with pytest.raises(ValueError):
        rate_fit([(4, 1.0), (8, 0.5), (16, 0.0), (32, 0.1)])
    with pytest.raises(ValueError):
        rate_fit([(4, 1.0), (8, 0.5), (16, 0.25)])


def test_cli_roundtrip(tmp_path, capsys):
    net_path = tmp_path / "net.json"
    assert main(["build", "square_norm", "--param", "k=4", "--out", str(net_path)]) == 0
    pts = tmp_path / "pts.csv"
    pts.write_text("0.5\n1.0\n")
    out = tmp_path / "out.csv"
    assert main(["eval", "--net", str(net_path), "--input", str(pts), "--out", str(out)]) == 0
    values = [float(v) for v in out.read_text().split()]
    assert abs(values[0] - 0.25) <= 1 / 32 and values[1] == 1.0
    capsys.readouterr()
    assert main(["bound", "dproduct", "--param", "d=4", "--param", "k=10"]) == 0
    assert float(capsys.readouterr().out) == pytest.approx(0.24)
    rates = tmp_path / "rates.csv"
    rates.write_text("n,error\n" + "".join(f"{n},{1 / n}\n" for n in (4, 8, 16, 32)))
    assert main(["rates", "--csv", str(rates)]) == 0
    assert json.loads(capsys.readouterr().out)["slope"] == pytest.approx(-1.0)
    config = tmp_path / "suite.json"
    config.write_text(json.dumps({"items": [{"id": "square_norm", "grid": {"k": [1, 2]}}]}))
    csv_out, json_out = tmp_path / "r.csv", tmp_path / "r.json"
    assert main(["verify", "--config", str(config), "--csv", str(csv_out), "--json", str(json_out)]) == 0
    assert len(json.loads(json_out.read_text())) == 2 and csv_out.read_text().startswith("id,")


# ---------------------------------------------------------------- properties

@given(st.sampled_from(sorted(BOUND_IDS)))
def test_bound_pure(cid):
    params = dict(SAMPLE_PARAMS[cid])
    snapshot = json.dumps(params, sort_keys=True)
    value = theoretical_bound(cid, params)
    assert json.dumps(params, sort_keys=True) == snapshot and value == theoretical_bound(cid, params)
