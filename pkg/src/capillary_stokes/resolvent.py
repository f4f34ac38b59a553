"""Per-mode solutions of the two-phase Stokes resolvent problem.

Two independent routes to the same object: the closed-form exponential
profiles determined by the interface velocity (``solve_mode_dirichlet`` /
``evaluate_profile``), and a second-order finite-difference two-point BVP
on truncated half-lines (``solve_mode_bvp``) that also accepts body
forcing.  ``dn_numeric`` extracts the stress jump from the numeric
solution and serves as the discretization-error oracle for the analytic
symbol matrix.

The closed-form coefficients are stored as beta_j = rho_j*lambda*alpha_j,
which stay finite in the quasi-stationary limit lambda -> 0; profile
evaluation uses divided differences of the two exponentials so that the
limit is taken analytically rather than by cancellation.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from .core import (DiscretizationError, FluidParams, SingularModeError,
                   VerticalGrid)
from .symbols import omega


def cexpm1(z):
    """exp(z) - 1, accurate for small complex z."""
    z = np.asarray(z, dtype=complex)
    x, y = z.real, z.imag
    return (np.expm1(x) * np.cos(y) - 2.0 * np.sin(0.5 * y) ** 2
            + 1j * np.exp(x) * np.sin(y))


def _expm1_over(z, dz):
    """(exp(-dz*z) - 1)/dz elementwise, with the dz -> 0 limit -z."""
    dz = np.asarray(dz, dtype=complex)
    z = np.asarray(z, dtype=complex)
    small = np.abs(dz) == 0.0
    safe = np.where(small, 1.0, dz)
    out = cexpm1(-safe * z) / safe
    return np.where(small, -z, out)


@dataclass
class ModeProfile:
    """Closed-form resolvent profile for one (or a batch of) mode(s).

    beta1/beta2 are the pressure amplitudes rho_j*lambda*alpha_j;
    the classical coefficients a_j, alpha_j are recovered on demand and
    are singular at lambda = 0 (the profile itself is not).
    """

    params: FluidParams
    lam: complex
    xi: np.ndarray          # (n,) + batch
    v_b: np.ndarray         # (n,) + batch
    w_b: np.ndarray         # batch
    beta1: np.ndarray
    beta2: np.ndarray

    @property
    def tau(self) -> np.ndarray:
        return np.sqrt(np.sum(self.xi * self.xi, axis=0))

    def alpha(self, j: int) -> np.ndarray:
        if self.lam == 0:
            raise SingularModeError(
                "alpha_j is singular at lambda = 0; use beta_j")
        rho = self.params.rho(j)
        beta = self.beta1 if j == 1 else self.beta2
        return beta / (rho * self.lam)

    def a(self, j: int) -> np.ndarray:
        return self.v_b + 1j * self.xi * self.alpha(j)

    def pressure_jump(self) -> np.ndarray:
        """[[pi]] at the interface = beta2 - beta1."""
        return self.beta2 - self.beta1


def solve_mode_dirichlet(params: FluidParams, lam, xi, v_b, w_b) -> ModeProfile:
    """Resolvent profile with prescribed interface velocity (v_b, w_b).

    Broadcasts over trailing batch axes of xi/v_b/w_b; lam is scalar.
    lam = 0 takes the quasi-stationary limit through the beta coefficients.
    """
    xi = np.asarray(xi, dtype=float)
    if xi.ndim == 0:
        xi = xi[np.newaxis]
    v_b = np.broadcast_to(np.asarray(v_b, dtype=complex), xi.shape).copy()
    tau = np.sqrt(np.sum(xi * xi, axis=0))
    w_b = np.broadcast_to(np.asarray(w_b, dtype=complex), tau.shape).copy()
    if np.any(tau == 0.0):
        raise SingularModeError("|xi| = 0: zero mode is handled separately")
    lam = complex(lam)
    w1 = omega(params, 1, lam, tau)
    w2 = omega(params, 2, lam, tau)
    q1 = w1 / np.sqrt(params.mu1)
    q2 = w2 / np.sqrt(params.mu2)
    ixi_vb = np.sum(1j * xi * v_b, axis=0)
    beta2 = -params.mu2 * (q2 + tau) / tau * (ixi_vb - q2 * w_b)
    beta1 = -params.mu1 * (q1 + tau) / tau * (ixi_vb + q1 * w_b)
    return ModeProfile(params=params, lam=lam, xi=xi, v_b=v_b, w_b=w_b,
                       beta1=beta1, beta2=beta2)


def _phase_eval(profile: ModeProfile, depth, j: int):
    """(v, w, pi) at distance ``depth`` >= 0 from the interface, phase j.

    depth may be a scalar or a 1-D array; an array appends one trailing
    axis to the profile's batch shape.
    """
    p = profile.params
    mu = p.mu(j)
    d = np.asarray(depth, dtype=float)
    scalar_depth = d.ndim == 0
    d = np.atleast_1d(d)

    def tail(a):
        return np.asarray(a)[..., np.newaxis]

    tau = tail(profile.tau)
    w_j = omega(p, j, profile.lam, profile.tau)
    q = tail(w_j / np.sqrt(mu))
    # dq = q - tau computed without cancellation; rho*lam = mu*(q^2 - tau^2)
    dq = p.rho(j) * profile.lam / (mu * (q + tau))
    beta = tail(profile.beta1 if j == 1 else profile.beta2)
    eq = np.exp(-q * d)
    et = np.exp(-tau * d)
    dd = _expm1_over(d, dq)           # (e^{-q d} - e^{-tau d})/(dq e^{-tau d})
    coef = beta / (mu * (q + tau))
    ixi_vb = tail(np.sum(1j * profile.xi * profile.v_b, axis=0))
    v = eq * tail(profile.v_b) + 1j * tail(profile.xi) * (coef * et * dd)
    w = eq * ixi_vb / q + (tau / q) * et * coef * (1.0 - tau * dd)
    if j == 1:
        w = -w
    pi = beta * et
    if scalar_depth:
        v, w, pi = v[..., 0], w[..., 0], pi[..., 0]
    return v, w, pi


def evaluate_profile(profile: ModeProfile, y, side: int | None = None):
    """(v, w, pi) of the profile at height y; sign(y) picks the phase and
    ``side`` (1 or 2) disambiguates y = 0."""
    y = float(y)
    if y > 0:
        j = 2
    elif y < 0:
        j = 1
    else:
        if side not in (1, 2):
            raise ValueError("y = 0 requires side=1 or side=2")
        j = side
    return _phase_eval(profile, abs(y), j)


def profile_on_grid(profile: ModeProfile, vgrid: VerticalGrid):
    """Sample the profile on both half-lines; arrays indexed
    [..., side, depth] like BulkFields (complex mode amplitudes)."""
    d = vgrid.depth()
    v1, w1, pi1 = _phase_eval(profile, d, 1)
    v2, w2, pi2 = _phase_eval(profile, d, 2)
    v = np.stack([v1, v2], axis=-2)
    w = np.stack([w1, w2], axis=-2)
    pi = np.stack([pi1, pi2], axis=-2)
    return v, w, pi


def dn_from_profile(profile: ModeProfile):
    """Stress jump (g_v, g_w) of the profile at the interface, from the
    closed-form coefficients (safe at lambda = 0)."""
    p = profile.params
    tau = profile.tau
    w1 = omega(p, 1, profile.lam, tau)
    w2 = omega(p, 2, profile.lam, tau)
    q1 = w1 / np.sqrt(p.mu1)
    q2 = w2 / np.sqrt(p.mu2)
    alpha = np.sqrt(p.mu1) * w1 + np.sqrt(p.mu2) * w2
    g_v = (alpha * profile.v_b
           + 1j * profile.xi * (profile.beta1 / (q1 + tau)
                                + profile.beta2 / (q2 + tau))
           - p.jump_mu * 1j * profile.xi * profile.w_b)
    g_w = (2j * p.jump_mu * np.sum(profile.v_b * profile.xi, axis=0)
           + profile.beta2 - profile.beta1)
    return g_v, g_w


# ---------------------------------------------------------------------------
# Finite-difference two-point BVP oracle
# ---------------------------------------------------------------------------

@dataclass
class NumericModeSolution:
    """Sampled per-mode solution on the truncated half-lines, indexed
    [..., side, depth] with depth 0 at the interface."""

    lam: complex
    xi: np.ndarray
    grid: VerticalGrid
    v: np.ndarray
    w: np.ndarray
    pi: np.ndarray
    residual: float


class _CoupledBlock:
    """Sparse discretization of the (zeta-velocity, w, pi) system on the two
    half-lines, with either Dirichlet or stress-jump interface rows.

    Velocities live at the nodes, pressure at cell midpoints (staggered),
    and the continuity equation is imposed at midpoints; this keeps every
    stencil compact and the interface stress second-order accurate.  The
    matrix depends only on the interface-row type, so one LU factorization
    serves many right-hand sides.
    """

    def __init__(self, params: FluidParams, lam: complex, tau: float,
                 grid: VerticalGrid, bc: str):
        self.params = params
        self.lam = lam
        self.tau = tau
        self.grid = grid
        self.bc = bc
        M = grid.points
        dy = grid.spacing
        npts = M + 1
        per_side = 2 * npts + M
        size = 2 * per_side
        self.size = size

        def iv(side, i):
            return side * per_side + i

        def iw(side, i):
            return side * per_side + npts + i

        def ip(side, m):
            return side * per_side + 2 * npts + m

        rows, cols, vals = [], [], []
        rhs_rows = {}

        def add(r, c, v):
            rows.append(r)
            cols.append(c)
            vals.append(v)

        r = 0
        for side in (0, 1):
            j = 1 if side == 0 else 2
            mu = params.mu(j)
            om2 = params.rho(j) * lam + mu * tau * tau
            sgn = -1.0 if side == 0 else 1.0   # d/dy = sgn * d/ddepth
            for i in range(1, M):
                # zeta-momentum: om2 v - mu v'' + i tau pi = f_vz
                add(r, iv(side, i), om2 + 2.0 * mu / dy**2)
                add(r, iv(side, i - 1), -mu / dy**2)
                add(r, iv(side, i + 1), -mu / dy**2)
                add(r, ip(side, i - 1), 0.5j * tau)
                add(r, ip(side, i), 0.5j * tau)
                rhs_rows[r] = ("f_vz", side, i)
                r += 1
                # w-momentum: om2 w - mu w'' + pi' = f_w
                add(r, iw(side, i), om2 + 2.0 * mu / dy**2)
                add(r, iw(side, i - 1), -mu / dy**2)
                add(r, iw(side, i + 1), -mu / dy**2)
                add(r, ip(side, i), sgn / dy)
                add(r, ip(side, i - 1), -sgn / dy)
                rhs_rows[r] = ("f_w", side, i)
                r += 1
            # continuity at cell midpoints: i tau v + w' = f_d
            for m in range(M):
                add(r, iv(side, m), 0.5j * tau)
                add(r, iv(side, m + 1), 0.5j * tau)
                add(r, iw(side, m + 1), sgn / dy)
                add(r, iw(side, m), -sgn / dy)
                rhs_rows[r] = ("f_d", side, m)
                r += 1
            # far field: v = w = 0 at |y| = Y
            add(r, iv(side, M), 1.0)
            r += 1
            add(r, iw(side, M), 1.0)
            r += 1

        mu1, mu2 = params.mu1, params.mu2
        if bc == "dirichlet":
            for side in (0, 1):
                add(r, iv(side, 0), 1.0)
                rhs_rows[r] = ("vb", side, 0)
                r += 1
                add(r, iw(side, 0), 1.0)
                rhs_rows[r] = ("wb", side, 0)
                r += 1
        elif bc == "jump":
            # one-sided d/dy at the interface: upper (-3,4,-1)/(2dy),
            # lower gets the extra sign flip from depth orientation
            up = np.array([-3.0, 4.0, -1.0]) / (2.0 * dy)
            lo = -up
            # interface pressure from midpoint extrapolation (3p0 - p1)/2
            pext = np.array([1.5, -0.5])
            # -[[mu dy v]] - i tau [[mu w]] = g_v
            for k in range(3):
                add(r, iv(1, k), -mu2 * up[k])
                add(r, iv(0, k), mu1 * lo[k])
            add(r, iw(1, 0), -1j * tau * mu2)
            add(r, iw(0, 0), 1j * tau * mu1)
            rhs_rows[r] = ("g_v", None, None)
            r += 1
            # -2[[mu dy w]] + [[pi]] = g_w
            for k in range(3):
                add(r, iw(1, k), -2.0 * mu2 * up[k])
                add(r, iw(0, k), 2.0 * mu1 * lo[k])
            for k in range(2):
                add(r, ip(1, k), pext[k])
                add(r, ip(0, k), -pext[k])
            rhs_rows[r] = ("g_w", None, None)
            r += 1
            # velocity continuity [[v]] = [[w]] = 0
            add(r, iv(1, 0), 1.0)
            add(r, iv(0, 0), -1.0)
            r += 1
            add(r, iw(1, 0), 1.0)
            add(r, iw(0, 0), -1.0)
            r += 1
        else:
            raise ValueError(f"unknown interface condition {bc!r}")
        assert r == size, (r, size)

        mat = sp.coo_matrix((vals, (rows, cols)), shape=(size, size),
                            dtype=complex).tocsc()
        self.mat = mat
        self.rhs_rows = rhs_rows
        self._iv, self._iw, self._ip = iv, iw, ip
        try:
            self.lu = splu(mat)
        except RuntimeError as exc:
            raise DiscretizationError(
                f"singular discrete system (M={M}, Y={grid.truncation}); "
                f"refine the grid or enlarge Y: {exc}") from exc

    def solve(self, data: dict, forcing=None):
        """data: {'vb','wb'} or {'g_v','g_w'} scalar mode values;
        forcing: optional (f_vz, f_w, f_d) arrays sampled at nodes,
        shaped (2, M+1); f_d is averaged onto the midpoints."""
        b = np.zeros(self.size, dtype=complex)
        if forcing is not None:
            f_vz, f_w, f_d = forcing
            f_d_mid = 0.5 * (f_d[:, :-1] + f_d[:, 1:])
        for r, (kind, side, i) in self.rhs_rows.items():
            if kind in ("vb", "wb", "g_v", "g_w"):
                b[r] = data.get(kind, 0.0)
            elif forcing is not None:
                if kind == "f_vz":
                    b[r] = f_vz[side, i]
                elif kind == "f_w":
                    b[r] = f_w[side, i]
                else:
                    b[r] = f_d_mid[side, i]
        x = self.lu.solve(b)
        resid = np.linalg.norm(self.mat @ x - b)
        scale = np.linalg.norm(b)
        if scale > 0 and not resid <= 1e-8 * scale:
            raise DiscretizationError(
                f"discrete solve residual {resid:.3e} vs data norm {scale:.3e}; "
                "refine the grid or enlarge Y")
        M = self.grid.points
        npts = M + 1
        per_side = 2 * npts + M
        x = x.reshape(2, per_side)
        vz = x[:, :npts]
        w = x[:, npts:2 * npts]
        pmid = x[:, 2 * npts:]
        # pressure back to the nodes: interior averages, quadratic ends
        pi = np.empty((2, npts), dtype=complex)
        pi[:, 1:M] = 0.5 * (pmid[:, :-1] + pmid[:, 1:])
        pi[:, 0] = 1.5 * pmid[:, 0] - 0.5 * pmid[:, 1]
        pi[:, M] = 1.5 * pmid[:, -1] - 0.5 * pmid[:, -2]
        return vz, w, pi, float(resid / scale) if scale > 0 else 0.0


class _PerpBlock:
    """Two-phase Helmholtz block for the velocity component perpendicular
    to the wavevector (only present for tangential dimension 2)."""

    def __init__(self, params: FluidParams, lam: complex, tau: float,
                 grid: VerticalGrid, bc: str):
        self.params = params
        self.grid = grid
        M = grid.points
        dy = grid.spacing
        npts = M + 1
        size = 2 * npts
        self.size = size

        def idx(side, i):
            return side * npts + i

        rows, cols, vals = [], [], []
        rhs_rows = {}
        r = 0
        for side in (0, 1):
            j = 1 if side == 0 else 2
            mu = params.mu(j)
            om2 = params.rho(j) * lam + mu * tau * tau
            for i in range(1, M):
                rows += [r, r, r]
                cols += [idx(side, i), idx(side, i - 1), idx(side, i + 1)]
                vals += [om2 + 2.0 * mu / dy**2, -mu / dy**2, -mu / dy**2]
                rhs_rows[r] = ("f", side, i)
                r += 1
            rows.append(r)
            cols.append(idx(side, M))
            vals.append(1.0)
            r += 1
        if bc == "dirichlet":
            for side in (0, 1):
                rows.append(r)
                cols.append(idx(side, 0))
                vals.append(1.0)
                rhs_rows[r] = ("vb", side, 0)
                r += 1
        else:
            up = np.array([-3.0, 4.0, -1.0]) / (2.0 * dy)
            for k in range(3):
                rows += [r, r]
                cols += [idx(1, k), idx(0, k)]
                vals += [-params.mu2 * up[k], -params.mu1 * up[k]]
            rhs_rows[r] = ("g", None, None)
            r += 1
            rows += [r, r]
            cols += [idx(1, 0), idx(0, 0)]
            vals += [1.0, -1.0]
            r += 1
        assert r == size
        self.mat = sp.coo_matrix((vals, (rows, cols)), shape=(size, size),
                                 dtype=complex).tocsc()
        self.rhs_rows = rhs_rows
        self.lu = splu(self.mat)

    def solve(self, data, forcing=None):
        b = np.zeros(self.size, dtype=complex)
        for r, (kind, side, i) in self.rhs_rows.items():
            if kind in ("vb", "g"):
                b[r] = data.get(kind, 0.0)
            elif forcing is not None:
                b[r] = forcing[side, i]
        x = self.lu.solve(b)
        return x.reshape(2, self.grid.points + 1)


class ModeBvpOperator:
    """Factorized finite-difference resolvent for one (lambda, xi);
    reusable across right-hand sides (used by the time-domain oracle)."""

    def __init__(self, params: FluidParams, lam, xi, grid: VerticalGrid,
                 bc: str = "jump"):
        xi = np.atleast_1d(np.asarray(xi, dtype=float))
        tau = float(np.sqrt(np.sum(xi * xi)))
        if tau == 0.0:
            raise SingularModeError("|xi| = 0: zero mode is handled separately")
        # triggers the branch-cut guard for inadmissible (lambda, tau)
        omega(params, 1, lam, tau)
        omega(params, 2, lam, tau)
        self.params = params
        self.lam = complex(lam)
        self.xi = xi
        self.tau = tau
        self.zeta = xi / tau
        self.n = xi.shape[0]
        self.grid = grid
        self.bc = bc
        self.block = _CoupledBlock(params, self.lam, tau, grid, bc)
        self.perp = (_PerpBlock(params, self.lam, tau, grid, bc)
                     if self.n == 2 else None)

    def solve(self, *, dirichlet=None, jump=None, forcing=None) -> NumericModeSolution:
        if (dirichlet is None) == (jump is None):
            raise ValueError("provide exactly one of dirichlet or jump data")
        zeta = self.zeta
        if self.n == 2:
            zperp = np.array([-zeta[1], zeta[0]])
        data = {}
        pdata = {}
        if dirichlet is not None:
            if self.bc != "dirichlet":
                raise ValueError("operator was assembled for jump data")
            v_b, w_b = dirichlet
            v_b = np.asarray(v_b, dtype=complex)
            data = {"vb": complex(np.sum(zeta * v_b)), "wb": complex(w_b)}
            if self.n == 2:
                pdata = {"vb": complex(np.sum(zperp * v_b))}
        else:
            if self.bc != "jump":
                raise ValueError("operator was assembled for dirichlet data")
            g_v, g_w = jump
            g_v = np.asarray(g_v, dtype=complex)
            data = {"g_v": complex(np.sum(zeta * g_v)), "g_w": complex(g_w)}
            if self.n == 2:
                pdata = {"g": complex(np.sum(zperp * g_v))}
        fz = fw = fd = None
        fperp = None
        if forcing is not None:
            f_v, f_w, f_d = forcing
            f_v = np.asarray(f_v, dtype=complex)
            fz = np.einsum("c,c...->...", zeta, f_v)
            fw = np.asarray(f_w, dtype=complex)
            fd = np.asarray(f_d, dtype=complex)
            if self.n == 2:
                fperp = np.einsum("c,c...->...", zperp, f_v)
        vz, w, pi, resid = self.block.solve(
            data, None if forcing is None else (fz, fw, fd))
        if self.n == 1:
            v = vz[np.newaxis] * zeta[0]
        else:
            vp = self.perp.solve(pdata, fperp)
            v = zeta[:, None, None] * vz + zperp[:, None, None] * vp
        return NumericModeSolution(lam=self.lam, xi=self.xi, grid=self.grid,
                                   v=v, w=w, pi=pi, residual=resid)


def solve_mode_bvp(params: FluidParams, lam, xi, grid: VerticalGrid, *,
                   dirichlet=None, jump=None, forcing=None) -> NumericModeSolution:
    """One-shot finite-difference solve; see ModeBvpOperator."""
    bc = "dirichlet" if dirichlet is not None else "jump"
    op = ModeBvpOperator(params, lam, xi, grid, bc=bc)
    return op.solve(dirichlet=dirichlet, jump=jump, forcing=forcing)


def dn_numeric(params: FluidParams, lam, xi, v_b, w_b, grid: VerticalGrid):
    """Stress jump (g_v, g_w) of the numeric Dirichlet solution, via
    one-sided second-order differences at the interface."""
    sol = solve_mode_bvp(params, lam, xi, grid, dirichlet=(v_b, w_b))
    dy = grid.spacing
    xi = sol.xi

    def dyi(arr, side):
        d = (-3.0 * arr[..., side, 0] + 4.0 * arr[..., side, 1]
             - arr[..., side, 2]) / (2.0 * dy)
        return d if side == 1 else -d

    jump_mu_dv = params.mu2 * dyi(sol.v, 1) - params.mu1 * dyi(sol.v, 0)
    jump_mu_w = params.mu2 * sol.w[1, 0] - params.mu1 * sol.w[0, 0]
    jump_mu_dw = params.mu2 * dyi(sol.w, 1) - params.mu1 * dyi(sol.w, 0)
    jump_pi = sol.pi[1, 0] - sol.pi[0, 0]
    g_v = -jump_mu_dv - 1j * xi * jump_mu_w
    g_w = -2.0 * jump_mu_dw + jump_pi
    return g_v, g_w
