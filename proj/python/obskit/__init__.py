"""Simulation and verification toolkit for nonlinear state observers.

The heavy lifting lives in the compiled extension; this package re-exports
the pieces most scripts need.
"""

from obskit._core import (
    CukGains,
    CukParams,
    EquivalenceResult,
    Metrics,
    PdeReport,
    PeResult,
    Trace,
    __version__,
    cuk_equilibrium,
    equiv_check,
    filter_f,
    filter_w,
    fd_jacobian,
    noise_samples,
    pde_check,
    pe_check,
    rk4_exp_decay,
    run_scenario,
)

__all__ = [
    "CukGains",
    "CukParams",
    "EquivalenceResult",
    "Metrics",
    "PdeReport",
    "PeResult",
    "Trace",
    "__version__",
    "cuk_equilibrium",
    "equiv_check",
    "filter_f",
    "filter_w",
    "fd_jacobian",
    "noise_samples",
    "pde_check",
    "pe_check",
    "rk4_exp_decay",
    "run_scenario",
]
