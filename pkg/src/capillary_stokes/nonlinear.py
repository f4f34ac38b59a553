"""Grid evaluation of the flat-interface transformation's nonlinear terms.

After mapping the moving interface y = h(t, x) to the fixed half-spaces,
the bulk equations, the interface stress balance and the kinematic
condition acquire polynomial right-hand sides in (v, w, pi, h) and their
derivatives.  This module evaluates every one of them on tangential x
vertical grid data, plus the interface geometry (curvature split
kappa = lap(h) - G_kappa(h), normal, normal velocity) and the initial-data
compatibility residuals.

Tangential derivatives are spectral; vertical derivatives are centered
second-order finite differences with one-sided stencils at y = 0 and at
the truncation ends, so interface jumps are never differenced across.
All evaluators vanish identically on zero input and are quadratically
small near zero.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import (BulkFields, FluidParams, InterfaceState, TangentialGrid,
                   VerticalGrid, one_sided_dy_at_interface,
                   vertical_derivative, vertical_second_derivative)


@dataclass
class NonlinearTerms:
    """One evaluation of every transformed nonlinearity: bulk momentum
    (F_v, F_w), divergence defect F_d, stress-jump pair (G_v, G_w), and
    kinematic term H."""

    F_v: np.ndarray
    F_w: np.ndarray
    F_d: np.ndarray
    G_v: np.ndarray
    G_w: np.ndarray
    H: np.ndarray


def g_kappa_pointwise(grad_h: np.ndarray, hess_h: np.ndarray,
                      lap_h: np.ndarray) -> np.ndarray:
    """Curvature defect from pointwise first/second derivatives of h:

        G_kappa = |grad h|^2 lap h / ((1 + q) q) + (grad h | hess h grad h) / q^3,

    with q = sqrt(1 + |grad h|^2); exactly zero for affine h."""
    grad_h = np.asarray(grad_h, dtype=float)
    g2 = np.sum(grad_h * grad_h, axis=0)
    q = np.sqrt(1.0 + g2)
    quad = np.einsum("a...,ab...,b...->...", grad_h, hess_h, grad_h)
    return g2 * lap_h / ((1.0 + q) * q) + quad / q**3


def curvature(grid: TangentialGrid, h: np.ndarray):
    """(kappa, G_kappa) with kappa = lap h - G_kappa, derivatives spectral."""
    grad_h = grid.gradient(h)
    hess_h = grid.hessian(h)
    lap_h = np.trace(hess_h, axis1=0, axis2=1)
    gk = g_kappa_pointwise(grad_h, hess_h, lap_h)
    return lap_h - gk, gk


def normal_and_velocity(grid: TangentialGrid, h: np.ndarray,
                        dh_dt: np.ndarray):
    """Outward normal of the lower phase and normal velocity of the graph."""
    grad_h = grid.gradient(h)
    q = np.sqrt(1.0 + np.sum(grad_h * grad_h, axis=0))
    nu = np.concatenate([-grad_h, np.ones((1,) + grid.shape)], axis=0) / q
    return nu, np.asarray(dh_dt) / q


def _rho_mu_side(params: FluidParams):
    """Phase constants broadcastable over [..., side, depth] arrays."""
    rho = np.array([params.rho1, params.rho2])[:, np.newaxis]
    mu = np.array([params.mu1, params.mu2])[:, np.newaxis]
    return rho, mu


def bulk_gradient(grid: TangentialGrid, f: np.ndarray) -> np.ndarray:
    """Tangential spectral gradient of a bulk array shaped
    ([components,] *grid.shape, 2, depth); returns a leading derivative
    axis of length dim."""
    lead = f.ndim - 2 - grid.dim
    axes = tuple(range(lead, lead + grid.dim))
    modes = np.fft.fftn(f, axes=axes)
    xi = grid.wavevectors()
    out = np.empty((grid.dim,) + f.shape)
    for d in range(grid.dim):
        shaped = xi[d].reshape((1,) * lead + grid.shape + (1, 1))
        out[d] = np.fft.ifftn(1j * shaped * modes, axes=axes).real
    return out


def bulk_terms(params: FluidParams, grid: TangentialGrid, vgrid: VerticalGrid,
               u: BulkFields, h: np.ndarray, dh_dt: np.ndarray,
               pi: np.ndarray | None = None):
    """Transformed bulk nonlinearities (F_v, F_w, F_d).

    F_v = mu {-2 (grad h | grad_x) dy v + |grad h|^2 dyy v - lap h dy v}
          + dy pi grad h
          + rho {-(v|grad_x) v + (grad h|v) dy v - w dy v} + rho dth dy v,
    F_w analogous without the pressure term, F_d = (grad h | dy v).
    ``pi`` overrides the pressure carried by ``u`` (lagged pressure hook).
    """
    if u.w.shape[:-2] != grid.shape or u.w.shape[-1] != vgrid.samples_per_side:
        raise ValueError(
            f"bulk field layout {u.w.shape} does not match grids "
            f"{grid.shape} x (2, {vgrid.samples_per_side})")
    if np.asarray(h).shape != grid.shape:
        raise ValueError("h does not match the tangential grid")
    rho, mu = _rho_mu_side(params)
    press = u.pi if pi is None else np.asarray(pi, dtype=float)

    grad_h = grid.gradient(h)              # (dim, *shape)
    lap_h = grid.laplacian(h)
    gh = grad_h[..., np.newaxis, np.newaxis]
    g2 = np.sum(grad_h * grad_h, axis=0)[..., np.newaxis, np.newaxis]
    laph = lap_h[..., np.newaxis, np.newaxis]
    dth = np.asarray(dh_dt)[..., np.newaxis, np.newaxis]

    dyv = vertical_derivative(u.v, vgrid)
    dyyv = vertical_second_derivative(u.v, vgrid)
    dyw = vertical_derivative(u.w, vgrid)
    dyyw = vertical_second_derivative(u.w, vgrid)
    dypi = vertical_derivative(press, vgrid)
    gradv = bulk_gradient(grid, u.v)       # [b, a] = d_b v_a
    gradw = bulk_gradient(grid, u.w)
    grady_dv = bulk_gradient(grid, dyv)    # grad_x of dy v
    grady_dw = bulk_gradient(grid, dyw)

    # (grad h | grad_x) dy v, per component of v
    adv_dyv = np.sum(gh[:, np.newaxis] * grady_dv, axis=0)
    adv_dyw = np.sum(gh * grady_dw, axis=0)
    # (v | grad_x) v and (v | grad_x) w
    v_adv_v = np.sum(u.v[np.newaxis] * np.swapaxes(gradv, 0, 1), axis=1)
    v_adv_w = np.sum(u.v * gradw, axis=0)
    # (grad h | v)
    gh_v = np.sum(gh * u.v, axis=0)

    F_v = mu * (-2.0 * adv_dyv + g2 * dyyv - laph * dyv) \
        + dypi[np.newaxis] * gh \
        + rho * (-v_adv_v + gh_v * dyv - u.w * dyv) \
        + rho * dth * dyv
    F_w = mu * (-2.0 * adv_dyw + g2 * dyyw - laph * dyw) \
        + rho * (-v_adv_w + gh_v * dyw - u.w * dyw) \
        + rho * dth * dyw
    F_d = np.sum(gh * dyv, axis=0)
    return F_v, F_w, F_d


def _interface_jump(params: FluidParams, arr: np.ndarray) -> np.ndarray:
    """[[mu * arr]] at the interface: mu2 * upper - mu1 * lower."""
    return params.mu2 * arr[..., 1, 0] - params.mu1 * arr[..., 0, 0]


def boundary_terms(params: FluidParams, grid: TangentialGrid,
                   vgrid: VerticalGrid, u: BulkFields,
                   pressure_jump: np.ndarray, h: np.ndarray):
    """Transformed stress-jump nonlinearities (G_v, G_w).

    G_v = -[[mu (grad_x v + (grad_x v)^T)]] grad h + |grad h|^2 [[mu dy v]]
          + (grad h | [[mu dy v]]) grad h - [[mu dy w]] grad h
          + {[[pi]] - sigma (lap h - G_kappa(h))} grad h,
    G_w = -(grad h | [[mu dy v]]) - (grad h | [[mu grad_x w]])
          + |grad h|^2 [[mu dy w]] - sigma G_kappa(h).
    """
    if np.asarray(h).shape != grid.shape:
        raise ValueError("h does not match the tangential grid")
    if np.asarray(pressure_jump).shape != grid.shape:
        raise ValueError("pressure_jump does not match the tangential grid")
    grad_h = grid.gradient(h)
    g2 = np.sum(grad_h * grad_h, axis=0)
    lap_h = grid.laplacian(h)
    _, gk = curvature(grid, h)

    # one-sided interface derivatives weighted by the phase viscosity
    dyv_lo = one_sided_dy_at_interface(u.v, vgrid, 0)
    dyv_up = one_sided_dy_at_interface(u.v, vgrid, 1)
    jmu_dyv = params.mu2 * dyv_up - params.mu1 * dyv_lo
    dyw_lo = one_sided_dy_at_interface(u.w, vgrid, 0)
    dyw_up = one_sided_dy_at_interface(u.w, vgrid, 1)
    jmu_dyw = params.mu2 * dyw_up - params.mu1 * dyw_lo

    # [[mu grad_x v]] and [[mu grad_x w]] from per-side interface traces
    n = grid.dim
    trace_v = u.v[..., :, 0]               # (dim, *shape, side)
    trace_w = u.w[..., :, 0]
    gradx_v = np.empty((n, n) + grid.shape + (2,))
    gradx_w = np.empty((n,) + grid.shape + (2,))
    for side in (0, 1):
        for b in range(n):
            gradx_w[b, ..., side] = grid.derivative(trace_w[..., side], b)
            for a in range(n):
                gradx_v[a, b, ..., side] = grid.derivative(
                    trace_v[a][..., side], b)
    jmu_gradx_v = params.mu2 * gradx_v[..., 1] - params.mu1 * gradx_v[..., 0]
    jmu_gradx_w = params.mu2 * gradx_w[..., 1] - params.mu1 * gradx_w[..., 0]

    sym = jmu_gradx_v + np.swapaxes(jmu_gradx_v, 0, 1)
    sym_grad_h = np.einsum("ab...,b...->a...", sym, grad_h)
    gh_jmu_dyv = np.sum(grad_h * jmu_dyv, axis=0)

    G_v = (-sym_grad_h + g2 * jmu_dyv + gh_jmu_dyv * grad_h
           - jmu_dyw * grad_h
           + (pressure_jump - params.sigma * (lap_h - gk)) * grad_h)
    G_w = (-gh_jmu_dyv - np.sum(grad_h * jmu_gradx_w, axis=0)
           + g2 * jmu_dyw - params.sigma * gk)
    return G_v, G_w


def kinematic_term(grid: TangentialGrid, u: BulkFields,
                   h: np.ndarray) -> np.ndarray:
    """H = -(trace of v | grad h); the trace averages the two one-sided
    interface values (they agree to solver tolerance)."""
    grad_h = grid.gradient(h)
    trace_v = 0.5 * (u.v[..., 0, 0] + u.v[..., 1, 0])
    return -np.sum(trace_v * grad_h, axis=0)


def deformation_tensor(grid: TangentialGrid, vgrid: VerticalGrid,
                       u: BulkFields, h: np.ndarray) -> np.ndarray:
    """Transformed symmetric velocity gradient, shape
    (dim+1, dim+1, *shape, 2, depth)."""
    n = grid.dim
    grad_h = grid.gradient(h)[..., np.newaxis, np.newaxis]
    dyv = vertical_derivative(u.v, vgrid)
    dyw = vertical_derivative(u.w, vgrid)
    gradv = bulk_gradient(grid, u.v)       # (b, a, *shape, side, depth): d_b v_a
    gradw = bulk_gradient(grid, u.w)
    D = np.empty((n + 1, n + 1) + u.w.shape)
    for i in range(n):
        for j in range(n):
            D[i, j] = (gradv[i, j] + gradv[j, i]
                       - grad_h[i] * dyv[j] - grad_h[j] * dyv[i])
    for j in range(n):
        D[n, j] = D[j, n] = dyv[j] + gradw[j] - grad_h[j] * dyw
    D[n, n] = 2.0 * dyw
    return D


@dataclass
class CompatibilityReport:
    """Sup-norm residuals of the initial-data constraints."""

    tangential_stress_residual: float
    divergence_residual: float
    jump_residual: float
    tolerance: float

    @property
    def passed(self) -> bool:
        return (self.tangential_stress_residual <= self.tolerance
                and self.divergence_residual <= self.tolerance
                and self.jump_residual <= self.tolerance)


def check_compatibility(params: FluidParams, grid: TangentialGrid,
                        vgrid: VerticalGrid, u0: BulkFields, h0: np.ndarray,
                        tolerance: float = 1e-8) -> CompatibilityReport:
    """Residuals of the initial-data constraints: tangential part of the
    viscous stress jump, transformed divergence, and velocity continuity."""
    h0 = np.asarray(h0, dtype=float)
    nu, _ = normal_and_velocity(grid, h0, np.zeros(grid.shape))
    D = deformation_tensor(grid, vgrid, u0, h0)
    D_if = D[..., :, 0]                    # (n+1, n+1, *shape, side)
    mus = (params.mu1, params.mu2)
    stress = []
    for side in (0, 1):
        Dn = np.einsum("ab...,b...->a...", D_if[..., side], nu)
        nDn = np.einsum("a...,a...->...", nu, Dn)
        stress.append(mus[side] * (Dn - nDn * nu))
    tang = float(np.max(np.abs(stress[1] - stress[0])))

    gradv = bulk_gradient(grid, u0.v)
    div_x = np.einsum("aa...->...", gradv)
    dyw = vertical_derivative(u0.w, vgrid)
    _, _, F_d = bulk_terms(params, grid, vgrid, u0, h0,
                           np.zeros(grid.shape))
    div_res = float(np.max(np.abs(div_x + dyw - F_d)))

    jump = u0.velocity_jump()
    return CompatibilityReport(tangential_stress_residual=tang,
                               divergence_residual=div_res,
                               jump_residual=jump, tolerance=tolerance)


def evaluate_all(params: FluidParams, grid: TangentialGrid,
                 vgrid: VerticalGrid, u: BulkFields,
                 pressure_jump: np.ndarray, state: InterfaceState,
                 dh_dt: np.ndarray) -> NonlinearTerms:
    """Evaluate the full transformed right-hand side on grid data."""
    F_v, F_w, F_d = bulk_terms(params, grid, vgrid, u, state.h, dh_dt)
    G_v, G_w = boundary_terms(params, grid, vgrid, u, pressure_jump, state.h)
    H = kinematic_term(grid, u, state.h)
    return NonlinearTerms(F_v=F_v, F_w=F_w, F_d=F_d, G_v=G_v, G_w=G_w, H=H)
