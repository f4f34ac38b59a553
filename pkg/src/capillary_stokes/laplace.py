"""Numerical inverse Laplace transform on a fixed deformed contour and the
exact (linear) evolution of a single interface height mode.

The contour is the classical fixed-Talbot deformation: quadrature nodes
p_k = (r/t) * theta_k (cot(theta_k) + i) with theta_k = k*pi/M, evaluated
by the trapezoid rule in theta.  The dimensionless scale r is a fixed
constant (12 by default): in double precision the roundoff floor grows
like e^r * eps, so r must not grow with the node count.

The height symbol carries square-root branch points on
lambda <= -mu_j*tau^2/rho_j.  ``linear_mode_evolution`` therefore caps the
contour's leftward reach at half that distance by shrinking r, except when
the cap would push r below 2: for such small c*t the contour passes far
above the cut and the unclamped rule is both safe and accurate.  Unstable
gravity modes have a real positive pole; its residue is split off and the
contour integrates the remainder.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import ContourError, FluidParams
from .symbols import boundary_symbol, boundary_symbol_derivative, dispersion_root

# Clamping r below this hurts more than any proximity to the branch cut.
R_FLOOR = 2.0


@dataclass(frozen=True)
class ContourSpec:
    """Fixed-Talbot quadrature rule: ``node_count`` nodes, dimensionless
    scale ``r_value``, optional cap on how far left the nodes may reach
    (``max_real_depth`` > 0 bounds Re lambda >= -max_real_depth)."""

    node_count: int = 48
    r_value: float = 12.0
    target: float = 1e-8
    max_real_depth: float | None = None

    def __post_init__(self):
        if self.node_count < 16 or self.node_count % 2 != 0:
            raise ValueError(
                f"node_count must be even and >= 16, got {self.node_count}")
        if not self.r_value > 0.0:
            raise ValueError(f"r_value must be positive, got {self.r_value}")


def invert(F, t: float, spec: ContourSpec = ContourSpec()) -> float:
    """Evaluate (1/2 pi i) * contour integral of e^(lambda t) F(lambda).

    F must be analytic on and right of the contour and map conjugate
    points to conjugates (a transform of a real function).  t > 0.
    """
    if not t > 0.0:
        raise ValueError(f"time must be positive, got {t}")
    M = spec.node_count
    theta = np.pi * np.arange(1, M) / M
    cot = np.cos(theta) / np.sin(theta)
    r = spec.r_value
    if spec.max_real_depth is not None:
        # leftmost node sits at -(r/t) * max|theta cot theta|
        depth = -np.min(theta * cot)
        candidate = spec.max_real_depth * t / depth
        if R_FLOOR <= candidate < r:
            r = candidate
    p = (r / t) * theta * (cot + 1j)
    p0 = r / t
    vals = np.asarray(F(p), dtype=complex)
    val0 = complex(np.asarray(F(np.array([p0 + 0j])), dtype=complex).ravel()[0])
    if not (np.all(np.isfinite(vals)) and np.isfinite(val0)):
        raise ContourError(
            f"transform not finite on the contour at t={t}; widen the "
            "contour or reduce the time range")
    weights = 1.0 + 1j * (theta * (1.0 + cot * cot) - cot)
    total = 0.5 * (np.exp(p0 * t) * val0).real \
        + np.sum((np.exp(p * t) * vals * weights).real)
    return (r / (M * t)) * total


def linear_mode_evolution(params: FluidParams, tau: float, h0: complex,
                          times, spec: ContourSpec = ContourSpec()):
    """Height of one Fourier mode under the exact linearized dynamics:
    h(t) = h0 * L^{-1}[1 / s(., tau)](t).

    Gravity-unstable modes contribute e^(lambda* t)/s'(lambda*) from the
    real positive root lambda*, with the contour integrating the rest.
    Returns a complex array aligned with ``times`` (t = 0 maps to h0).
    """
    if not tau > 0.0:
        raise ValueError(f"tau must be positive, got {tau}")
    h0 = complex(h0)
    times = np.atleast_1d(np.asarray(times, dtype=float))
    cut = min(params.mu1 * tau * tau / params.rho1,
              params.mu2 * tau * tau / params.rho2)
    spec_t = ContourSpec(node_count=spec.node_count, r_value=spec.r_value,
                         target=spec.target, max_real_depth=0.5 * cut)

    root = None
    if params.gravity > 0.0 and params.jump_rho > 0.0:
        root = dispersion_root(params, tau)
    if root is not None:
        residue = 1.0 / boundary_symbol_derivative(params, root, tau)

        def F(lam):
            return 1.0 / boundary_symbol(params, lam, tau) \
                - residue / (lam - root)
    else:
        def F(lam):
            return 1.0 / boundary_symbol(params, lam, tau)

    out = np.empty(times.shape, dtype=complex)
    for i, t in enumerate(times):
        if t == 0.0:
            out[i] = h0
            continue
        val = invert(F, float(t), spec_t)
        if root is not None:
            val = val + residue * np.exp(root * t)
        out[i] = h0 * val
    return out
