"""Weight-level ReLU constructions with closed-form error bounds, plus the metrics that check them."""

import importlib

from .net_core import ReluNetwork, evaluate, norm_kappa, rescale

_BENCH_EXPORTS = ("VerificationReport", "SweepConfig", "run_suite", "rate_fit", "theoretical_bound")

__all__ = ["ReluNetwork", "evaluate", "norm_kappa", "rescale", *_BENCH_EXPORTS]
__version__ = "0.1.0"


def __getattr__(name):
    # Loaded lazily so ``python3 -m reluconstruct.bench_cli`` does not import the module twice.
    if name in _BENCH_EXPORTS:
        return getattr(importlib.import_module(".bench_cli", __name__), name)
    raise AttributeError(f"module {__name__!r} has no attribute {name!r}")
