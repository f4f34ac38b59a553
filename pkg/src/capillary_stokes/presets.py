"""Embedded scenario configs, overridable field-by-field from the CLI."""

from __future__ import annotations

import numpy as np


def _rt_scan_taus() -> list:
    coarse = [0.25, 0.5, 0.75, 1.25, 1.5, 2.0]
    fine = [round(t, 3) for t in np.arange(0.9, 1.1 + 1e-9, 0.005)]
    return sorted(set(coarse + fine))


# Single-mode capillary relaxation in the heavy-viscosity regime: the mode
# decays at sigma*tau/(2(mu1+mu2)); t_end is three decay times.
CAPILLARY_DECAY = {
    "params": {"rho1": 0.01, "rho2": 0.01, "mu1": 10.0, "mu2": 10.0,
               "sigma": 1.0, "gravity": 0.0},
    "grid": {"dim": 1, "length": 6.283185307179586, "points": 16,
             "truncation": 12.0, "vertical_points": 32},
    "scheme": {"name": "quasi_stationary", "dt": 0.05, "t_end": 120.0},
    "initial": {"modes": [[1, 6.283185307179586e-4]]},
    "output": {"every": 40, "kind": "modes"},
}

# Heavy-above-light configuration scanned across the neutral wavenumber
# tau_c = sqrt(gravity*(rho2-rho1)/sigma) = 1: per-tau single-mode runs
# report the measured growth rate next to the dispersion-root rate.
RAYLEIGH_TAYLOR_SCAN = {
    "params": {"rho1": 0.05, "rho2": 1.05, "mu1": 20.0, "mu2": 20.0,
               "sigma": 1.0, "gravity": 1.0},
    "grid": {"dim": 1, "length": 0.0, "points": 16,
             "truncation": 12.0, "vertical_points": 32},
    "scheme": {"name": "quasi_stationary", "dt": 2.0, "t_end": 40.0},
    "initial": {"modes": [[1, 1e-5]]},
    "output": {"every": 1, "kind": "modes"},
    "scan": {"taus": _rt_scan_taus(), "amplitude_ratio": 1e-5},
}

PRESETS = {
    "capillary-decay": CAPILLARY_DECAY,
    "rayleigh-taylor-scan": RAYLEIGH_TAYLOR_SCAN,
}
