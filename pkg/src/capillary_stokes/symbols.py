"""Closed-form Fourier-Laplace symbols of the two-phase Stokes interface
problem: the modified wavenumbers omega_j, the interface response matrix
(Dirichlet-to-Neumann symbol) and its inverse, the scalar kernel k(z), the
boundary symbol s(lambda, tau) governing each height mode (with optional
gravity), a sampling-based sector certificate for the lower bound
|s| >= c (|lambda| + |tau|), and the real dispersion root used for
Rayleigh-Taylor diagnostics.

All evaluators broadcast over numpy arrays; admissibility means every
complex square-root argument stays off the branch cut (-inf, 0].
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from .core import BranchCutError, FluidParams, SingularModeError

# |ratio| below this is treated as a numerical zero of the sector bound.
CERT_ZERO_TOL = 1e-9
# Relative consistency required between the two factorizations of m.
FACTORIZATION_RTOL = 1e-12


def _check_off_cut(arg: np.ndarray, what: str):
    arg = np.asarray(arg)
    on_cut = (arg.imag == 0.0) & (arg.real <= 0.0)
    if np.any(on_cut):
        idx = np.unravel_index(np.argmax(on_cut), on_cut.shape)
        bad = arg[idx] if arg.ndim else complex(arg)
        raise BranchCutError(
            f"{what} = {bad} lies on the branch cut (-inf, 0]")


def omega(params: FluidParams, j: int, lam, tau):
    """Principal square root of rho_j*lambda + mu_j*tau**2 (Re > 0)."""
    if j not in (1, 2):
        raise ValueError(f"phase index must be 1 or 2, got {j}")
    lam = np.asarray(lam, dtype=complex)
    tau = np.asarray(tau, dtype=complex)
    arg = params.rho(j) * lam + params.mu(j) * tau * tau
    _check_off_cut(arg, f"rho_{j}*lambda + mu_{j}*tau^2 at (lambda={lam}, tau={tau})")
    return np.sqrt(arg)


@dataclass
class SymbolEval:
    """All intermediate symbols at one (or an array of) (lambda, tau)."""

    lam: np.ndarray
    tau: np.ndarray
    omega1: np.ndarray
    omega2: np.ndarray
    eta1: np.ndarray
    eta2: np.ndarray
    alpha: np.ndarray
    beta: np.ndarray
    gamma_sym: np.ndarray
    delta: np.ndarray
    m_sym: np.ndarray
    n_sym: np.ndarray
    s: np.ndarray


def evaluate_symbols(params: FluidParams, lam, tau,
                     check_factorization: bool = True) -> SymbolEval:
    """Evaluate every scalar symbol at (lambda, tau); broadcasts.

    tau must be nonzero.  The two routes to m (the 2x2 determinant and the
    factorization (alpha+beta)*n) are cross-checked on every call.
    """
    lam = np.asarray(lam, dtype=complex)
    tau = np.asarray(tau, dtype=complex)
    if np.any(tau == 0.0):
        raise SingularModeError("tau = 0 is a singular mode")
    mu1, mu2 = params.mu1, params.mu2
    w1 = omega(params, 1, lam, tau)
    w2 = omega(params, 2, lam, tau)
    sq1, sq2 = np.sqrt(mu1), np.sqrt(mu2)
    eta1 = sq1 * w1 + mu2 * tau
    eta2 = sq2 * w2 + mu1 * tau
    alpha = sq1 * w1 + sq2 * w2
    beta = (mu1 + mu2) * tau
    gamma_sym = (sq2 * w2 - sq1 * w1) - params.jump_mu * tau
    rho_lam = (params.rho1 + params.rho2) * lam
    delta = beta + rho_lam / tau
    m_sym = (alpha + beta) * (alpha + delta) - gamma_sym * gamma_sym
    n_sym = rho_lam / tau + 4.0 / (1.0 / eta1 + 1.0 / eta2)
    s = lam + params.sigma * tau * tau / n_sym
    if params.gravity > 0.0:
        s = s - (params.gravity * params.jump_rho / n_sym)
    if check_factorization:
        # fp-consistency of the determinant against (alpha+beta)*n; the
        # scale guards against cancellation in m itself
        scale = (np.abs(alpha + beta) * (np.abs(alpha + delta) + np.abs(n_sym))
                 + np.abs(gamma_sym) ** 2)
        err = np.abs(m_sym - (alpha + beta) * n_sym)
        if np.any(err > FACTORIZATION_RTOL * scale + 1e-300):
            worst = np.max(err / (scale + 1e-300))
            raise ArithmeticError(
                f"factorization m = (alpha+beta)*n violated: rel err {worst:.3e}")
    return SymbolEval(lam=lam, tau=tau, omega1=w1, omega2=w2, eta1=eta1,
                      eta2=eta2, alpha=alpha, beta=beta, gamma_sym=gamma_sym,
                      delta=delta, m_sym=m_sym, n_sym=n_sym, s=s)


def dn_matrix(params: FluidParams, lam, xi):
    """Interface response matrix mapping boundary velocity modes to the
    negative stress jump: [[alpha*I + beta*zeta x zeta, i*gamma*zeta],
    [-i*gamma*zeta^T, alpha+delta]].  Returns (matrix, SymbolEval)."""
    xi = np.atleast_1d(np.asarray(xi, dtype=float))
    n = xi.shape[0]
    tau = float(np.sqrt(np.sum(xi * xi)))
    if tau == 0.0:
        raise SingularModeError("|xi| = 0: zero mode is handled separately")
    zeta = xi / tau
    se = evaluate_symbols(params, lam, tau)
    mat = np.zeros((n + 1, n + 1), dtype=complex)
    mat[:n, :n] = se.alpha * np.eye(n) + se.beta * np.outer(zeta, zeta)
    mat[:n, n] = 1j * se.gamma_sym * zeta
    mat[n, :n] = -1j * se.gamma_sym * zeta
    mat[n, n] = se.alpha + se.delta
    return mat, se


def dn_inverse_apply(params: FluidParams, lam, xi, g_v, g_w):
    """Boundary velocity modes (v_b, w_b) from stress-jump data (g_v, g_w).

    Solves the 2-D system for w_b and (zeta|v_b) through the factorized
    determinant, then recovers the tangential remainder.  Broadcasts over
    trailing mode axes: xi has shape (n,) + K, g_v (n,) + K, g_w K.
    """
    xi = np.asarray(xi, dtype=float)
    g_v = np.asarray(g_v, dtype=complex)
    g_w = np.asarray(g_w, dtype=complex)
    if xi.ndim == 0:
        xi = xi[np.newaxis]
    tau = np.sqrt(np.sum(xi * xi, axis=0))
    if np.any(tau == 0.0):
        raise SingularModeError("|xi| = 0: zero mode is handled separately")
    zeta = xi / tau
    se = evaluate_symbols(params, lam, tau)
    if np.any(np.abs(se.n_sym) < 1e-300):
        raise SingularModeError("n symbol vanishes: system is singular here")
    gv_zeta = np.sum(zeta * g_v, axis=0)
    ab = se.alpha + se.beta
    w_b = (1j * se.gamma_sym * gv_zeta / ab + g_w) / se.n_sym
    rho_lam = (params.rho1 + params.rho2) * np.asarray(lam, dtype=complex)
    vb_zeta = (rho_lam / tau) * gv_zeta / (ab * se.n_sym) \
        + (gv_zeta - 1j * se.gamma_sym * g_w / ab) / se.n_sym
    v_b = (g_v - zeta * (se.beta * vb_zeta + 1j * se.gamma_sym * w_b)) / se.alpha
    return v_b, w_b


def k_fn(params: FluidParams, z):
    """Scalar kernel k(z) of the boundary symbol;
    k(0) = 1/(2(mu1+mu2)) and z*k(z) -> 1/(rho1+rho2) as |z| -> inf."""
    z = np.asarray(z, dtype=complex)
    mu1, mu2 = params.mu1, params.mu2
    a1 = params.rho1 * z + mu1
    a2 = params.rho2 * z + mu2
    _check_off_cut(a1, "rho1*z + mu1")
    _check_off_cut(a2, "rho2*z + mu2")
    h1 = np.sqrt(mu1) * np.sqrt(a1) + mu2
    h2 = np.sqrt(mu2) * np.sqrt(a2) + mu1
    return 1.0 / ((params.rho1 + params.rho2) * z + 4.0 / (1.0 / h1 + 1.0 / h2))


def boundary_symbol(params: FluidParams, lam, tau):
    """Boundary symbol s(lambda, tau) = lambda + sigma*tau*k(z), z = lambda/tau^2,
    minus (gravity*[[rho]]/tau)*k(z) when gravity acts."""
    lam = np.asarray(lam, dtype=complex)
    tau = np.asarray(tau, dtype=complex)
    if np.any(tau == 0.0):
        raise SingularModeError("tau = 0 is a singular mode")
    z = lam / (tau * tau)
    k = k_fn(params, z)
    s = lam + params.sigma * tau * k
    if params.gravity > 0.0:
        s = s - (params.gravity * params.jump_rho / tau) * k
    return s


def boundary_symbol_derivative(params: FluidParams, lam: float, tau: float,
                               step: float = 1e-20) -> complex:
    """ds/dlambda at a real admissible point via a complex step."""
    return complex(boundary_symbol(params, lam + 1j * step, tau)).imag / step


@dataclass
class SectorCertificate:
    """Result of sampling |s|/(|lambda|+|tau|) over the solvability sector."""

    c_min: float
    worst_point: tuple
    re_s_min: float
    re_s_worst_point: tuple
    n_samples: int
    n_skipped: int
    unstable_roots: list
    passes: bool


def _normalize_budget(sample_budget):
    if isinstance(sample_budget, int):
        per_axis = max(2, round(sample_budget ** (1.0 / 3.0)))
        axes = (per_axis, per_axis, per_axis, 3)
    else:
        axes = tuple(int(b) for b in sample_budget)
        if len(axes) == 3:
            axes = axes + (3,)
        if len(axes) != 4:
            raise ValueError("sample_budget must be an int or a 3/4-tuple")
    return axes


def certify_sector_bound(params: FluidParams, lambda0: float, eta_angle: float,
                         sample_budget=(64, 64, 64),
                         workers: int | None = None) -> SectorCertificate:
    """Sample the sector bound |s(lambda,tau)| >= c (|lambda| + |tau|).

    lambda ranges over the sector of half-angle pi/2 + eta with
    |lambda| in [lambda0, 1e3*lambda0]; tau over the sector of half-angle
    eta with |tau| in [1e-3, 1e3]*lambda0, on log-spaced radial shells and
    uniform angles.  sample_budget is (lambda radii, lambda angles,
    tau radii[, tau angles]) or a total point count.

    When gravity destabilizes the configuration, any real dispersion roots
    at the sampled tau radii are appended to the sample set, driving c_min
    to a numerical zero; the certificate then fails.
    """
    if not lambda0 > 0.0:
        raise ValueError(f"lambda0 must be positive, got {lambda0}")
    if not 0.0 < eta_angle < np.pi / 4.0:
        raise ValueError(f"eta_angle must be in (0, pi/4), got {eta_angle}")
    n_lr, n_la, n_tr, n_ta = _normalize_budget(sample_budget)
    total = n_lr * n_la * n_tr * n_ta
    if total < 10**4:
        raise ValueError(f"sample budget {total} is below the 1e4 minimum")

    lam_r = np.geomspace(lambda0, 1e3 * lambda0, n_lr)
    lam_a = np.linspace(-(np.pi / 2 + eta_angle), np.pi / 2 + eta_angle, n_la)
    tau_r = np.geomspace(1e-3 * lambda0, 1e3 * lambda0, n_tr)
    tau_a = np.linspace(-eta_angle, eta_angle, n_ta)
    lam = (lam_r[:, None] * np.exp(1j * lam_a)[None, :]).ravel()
    tau = (tau_r[:, None] * np.exp(1j * tau_a)[None, :]).ravel()

    def scan_chunk(lam_chunk):
        lam_c = lam_chunk[:, None]
        tau_c = tau[None, :]
        z = lam_c / (tau_c * tau_c)
        a1 = params.rho1 * z + params.mu1
        a2 = params.rho2 * z + params.mu2
        ok = ~(((a1.imag == 0.0) & (a1.real <= 0.0))
               | ((a2.imag == 0.0) & (a2.real <= 0.0)))
        h1 = np.sqrt(params.mu1) * np.sqrt(np.where(ok, a1, 1.0)) + params.mu2
        h2 = np.sqrt(params.mu2) * np.sqrt(np.where(ok, a2, 1.0)) + params.mu1
        k = 1.0 / ((params.rho1 + params.rho2) * z
                   + 4.0 / (1.0 / h1 + 1.0 / h2))
        s = lam_c + params.sigma * tau_c * k
        if params.gravity > 0.0:
            s = s - (params.gravity * params.jump_rho / tau_c) * k
        ratio = np.abs(s) / (np.abs(lam_c) + np.abs(tau_c))
        ratio = np.where(ok, ratio, np.inf)
        flat = np.argmin(ratio)
        i, j = np.unravel_index(flat, ratio.shape)
        # positivity of Re s on the closed right half-plane, real tau only
        right = (np.abs(np.angle(lam_chunk))[:, None] <= np.pi / 2 + 1e-12) \
            & (tau_c.imag == 0.0) & ok
        re_s = np.where(right, s.real, np.inf)
        flat_r = np.argmin(re_s)
        ir, jr = np.unravel_index(flat_r, re_s.shape)
        return (ratio[i, j], (lam_chunk[i], tau[j]),
                re_s[ir, jr], (lam_chunk[ir], tau[jr]),
                int(np.sum(~ok)))

    if workers and workers > 1:
        chunks = np.array_split(lam, workers)
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(scan_chunk, [c for c in chunks if c.size]))
    else:
        results = [scan_chunk(lam)]

    c_min = min(r[0] for r in results)
    worst = min(results, key=lambda r: r[0])[1]
    re_s_min = min(r[2] for r in results)
    re_worst = min(results, key=lambda r: r[2])[3]
    skipped = sum(r[4] for r in results)

    roots = []
    if params.gravity > 0.0 and params.jump_rho > 0.0:
        tau_c = np.sqrt(params.gravity * params.jump_rho / params.sigma)
        for t in tau_r:
            if t >= tau_c:
                continue
            root = dispersion_root(params, float(t))
            if root is not None and root >= lambda0:
                roots.append((root, float(t)))
                s_at = abs(boundary_symbol(params, root, float(t)))
                ratio = s_at / (root + t)
                if ratio < c_min:
                    c_min, worst = ratio, (complex(root), complex(t))

    return SectorCertificate(
        c_min=float(c_min), worst_point=worst, re_s_min=float(re_s_min),
        re_s_worst_point=re_worst, n_samples=total - skipped,
        n_skipped=skipped, unstable_roots=roots,
        passes=bool(c_min > CERT_ZERO_TOL))


def dispersion_root(params: FluidParams, tau: float,
                    scan_points: int = 200) -> float | None:
    """Largest real root lambda* > 0 of s(lambda, tau) = 0, or None.

    s is real on the non-negative real axis; the scan walks a log grid down
    from Lambda_max = 1e6 * sigma * tau / (rho1 + rho2) looking for the
    highest sign change, then bisects.  No bracket means the mode is stable.
    """
    if not tau > 0.0:
        raise ValueError(f"tau must be positive, got {tau}")
    lam_max = 1e6 * params.sigma * tau / (params.rho1 + params.rho2)
    grid = np.geomspace(1e-12 * lam_max, lam_max, scan_points)
    s_vals = boundary_symbol(params, grid, tau).real
    s_zero = float(boundary_symbol(params, 0.0 + 0j, tau).real)

    def f(x):
        if x == 0.0:
            return s_zero
        return float(boundary_symbol(params, x, tau).real)

    for i in range(scan_points - 1, 0, -1):
        if s_vals[i] > 0.0 and s_vals[i - 1] < 0.0:
            return float(brentq(f, grid[i - 1], grid[i], xtol=1e-15,
                                rtol=8.9e-16))
    if s_zero < 0.0 and s_vals[0] > 0.0:
        return float(brentq(f, 0.0, grid[0], xtol=1e-15, rtol=8.9e-16))
    return None
