"""Physical parameters, tangential/vertical grids, and spectral transforms.

The tangential domain is periodized to a torus of period ``length`` per
dimension so that Fourier integrals become discrete sums; the vertical
half-lines are truncated at ``+-truncation``.  Fields may jump across the
interface y = 0, so vertical samples carry two one-sided values there.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

# Relative tolerance on the imaginary residual of inverse transforms of
# conjugate-symmetric spectra.
SPECTRUM_RTOL = 1e-10


class BranchCutError(ValueError):
    """Complex square-root argument fell on the negative real axis."""


class SingularModeError(ValueError):
    """Operation requested at a singular mode (|xi| = 0 or a vanishing symbol)."""


class SpectrumError(ValueError):
    """Mode data violates conjugate symmetry beyond tolerance."""


class DiscretizationError(RuntimeError):
    """Discrete system is singular or under-resolved; refine the grid."""


class ContourError(RuntimeError):
    """Inverse-Laplace contour hit a non-finite transform value."""


class DivergenceError(RuntimeError):
    """Time stepping produced a non-finite mode amplitude."""

    def __init__(self, message, step_index=None, worst_mode=None, partial=None):
        super().__init__(message)
        self.step_index = step_index
        self.worst_mode = worst_mode
        self.partial = partial


@dataclass(frozen=True)
class FluidParams:
    """Densities, viscosities, surface tension and gravity of the two phases.

    Phase 1 occupies y < 0, phase 2 occupies y > 0.  Jumps follow the
    upper-minus-lower convention: [[q]] = q2 - q1.
    """

    rho1: float
    rho2: float
    mu1: float
    mu2: float
    sigma: float
    gravity: float = 0.0

    def __post_init__(self):
        for name in ("rho1", "rho2", "mu1", "mu2", "sigma"):
            value = getattr(self, name)
            if not value > 0.0:
                raise ValueError(f"{name} must be strictly positive, got {value}")
        if self.gravity < 0.0:
            raise ValueError(f"gravity must be non-negative, got {self.gravity}")

    @property
    def jump_rho(self) -> float:
        return self.rho2 - self.rho1

    @property
    def jump_mu(self) -> float:
        return self.mu2 - self.mu1

    def rho(self, phase: int) -> float:
        return self.rho1 if phase == 1 else self.rho2

    def mu(self, phase: int) -> float:
        return self.mu1 if phase == 1 else self.mu2

    def swapped(self) -> "FluidParams":
        """Relabel the phases (1 <-> 2)."""
        return FluidParams(self.rho2, self.rho1, self.mu2, self.mu1,
                           self.sigma, self.gravity)


def _is_power_of_two(n: int) -> bool:
    return n >= 1 and (n & (n - 1)) == 0


@dataclass(frozen=True)
class TangentialGrid:
    """Periodic tangential grid: ``points`` samples per dimension on a torus
    of period ``length``.  Wavenumbers are 2*pi*k/length with integer k."""

    dim: int
    length: float
    points: int

    def __post_init__(self):
        if self.dim not in (1, 2):
            raise ValueError(f"tangential dimension must be 1 or 2, got {self.dim}")
        if not self.length > 0.0:
            raise ValueError(f"period must be positive, got {self.length}")
        if self.points < 8 or not _is_power_of_two(self.points):
            raise ValueError(
                f"points must be a power of two >= 8, got {self.points}")

    @property
    def spacing(self) -> float:
        return self.length / self.points

    @property
    def shape(self) -> tuple:
        return (self.points,) * self.dim

    @property
    def x(self) -> np.ndarray:
        """Sample coordinates per dimension, shape (dim, points)."""
        coords = self.spacing * np.arange(self.points)
        return np.broadcast_to(coords, (self.dim, self.points)).copy()

    @property
    def wavenumbers_1d(self) -> np.ndarray:
        """Signed wavenumbers 2*pi*k/L in FFT ordering, one axis."""
        k = np.fft.fftfreq(self.points, d=1.0 / self.points)
        return 2.0 * np.pi * k / self.length

    def wavevectors(self) -> np.ndarray:
        """Wavevector components on the full mode grid, shape (dim,) + shape."""
        k1 = self.wavenumbers_1d
        if self.dim == 1:
            return k1[np.newaxis, :]
        kx, ky = np.meshgrid(k1, k1, indexing="ij")
        return np.stack([kx, ky])

    def mode_magnitudes(self) -> np.ndarray:
        """|xi| on the mode grid."""
        xi = self.wavevectors()
        return np.sqrt(np.sum(xi * xi, axis=0))

    # -- transforms ---------------------------------------------------------

    def forward_transform(self, field: np.ndarray) -> np.ndarray:
        """DFT of real samples, normalized so mode 0 is the sample mean."""
        field = np.asarray(field)
        if field.shape != self.shape:
            raise ValueError(
                f"field shape {field.shape} does not match grid {self.shape}")
        return np.fft.fftn(field) / self.points**self.dim

    def inverse_transform(self, modes: np.ndarray) -> np.ndarray:
        """Inverse DFT of a conjugate-symmetric spectrum to a real field.

        Raises SpectrumError naming the worst mode if the spectrum is not
        conjugate-symmetric within SPECTRUM_RTOL, or if the inverse carries
        an imaginary residual above SPECTRUM_RTOL times the field norm.
        """
        modes = np.asarray(modes, dtype=complex)
        if modes.shape != self.shape:
            raise ValueError(
                f"mode shape {modes.shape} does not match grid {self.shape}")
        scale = np.max(np.abs(modes))
        if scale > 0.0:
            mirrored = modes
            for axis in range(self.dim):
                mirrored = np.roll(np.flip(mirrored, axis=axis), 1, axis=axis)
            asym = np.abs(modes - np.conj(mirrored))
            worst = np.unravel_index(np.argmax(asym), modes.shape)
            if asym[worst] > SPECTRUM_RTOL * scale:
                raise SpectrumError(
                    f"spectrum is not conjugate-symmetric: mode {worst} has "
                    f"asymmetry {asym[worst]:.3e} against scale {scale:.3e}")
        out = np.fft.ifftn(modes) * self.points**self.dim
        norm = np.max(np.abs(out))
        resid = np.max(np.abs(out.imag))
        if norm > 0.0 and resid > SPECTRUM_RTOL * norm:
            worst = np.unravel_index(np.argmax(np.abs(out.imag)), out.shape)
            raise SpectrumError(
                f"imaginary residual {resid:.3e} exceeds tolerance at sample "
                f"{worst} (field norm {norm:.3e})")
        return out.real

    # -- spectral derivatives ------------------------------------------------

    def gradient(self, h: np.ndarray) -> np.ndarray:
        """Spectral gradient, shape (dim,) + shape."""
        modes = self.forward_transform(h)
        xi = self.wavevectors()
        out = np.empty((self.dim,) + self.shape)
        for d in range(self.dim):
            out[d] = self.inverse_transform(1j * xi[d] * modes)
        return out

    def laplacian(self, h: np.ndarray) -> np.ndarray:
        modes = self.forward_transform(h)
        tau2 = self.mode_magnitudes() ** 2
        return self.inverse_transform(-tau2 * modes)

    def hessian(self, h: np.ndarray) -> np.ndarray:
        """Spectral Hessian, shape (dim, dim) + shape."""
        modes = self.forward_transform(h)
        xi = self.wavevectors()
        out = np.empty((self.dim, self.dim) + self.shape)
        for a in range(self.dim):
            for b in range(self.dim):
                out[a, b] = self.inverse_transform(-xi[a] * xi[b] * modes)
        return out

    def derivative(self, f: np.ndarray, axis: int) -> np.ndarray:
        """Spectral first derivative of a real field along one tangential axis."""
        modes = self.forward_transform(f)
        xi = self.wavevectors()
        return self.inverse_transform(1j * xi[axis] * modes)

    def dealias_mask(self) -> np.ndarray:
        """2/3-rule mask on the mode grid (True = keep)."""
        k = np.fft.fftfreq(self.points, d=1.0 / self.points)
        keep1 = np.abs(k) <= self.points / 3.0
        if self.dim == 1:
            return keep1
        return np.logical_and.outer(keep1, keep1)


@dataclass(frozen=True)
class VerticalGrid:
    """Truncated vertical half-lines: samples {-Y, ..., -dy, 0-} and
    {0+, dy, ..., Y} with dy = truncation/points.  ``points`` counts the
    intervals per half-line, so each side carries points+1 samples."""

    truncation: float
    points: int

    def __post_init__(self):
        if not self.truncation > 0.0:
            raise ValueError(f"truncation must be positive, got {self.truncation}")
        if self.points < 4:
            raise ValueError(f"need at least 4 intervals, got {self.points}")

    @property
    def spacing(self) -> float:
        return self.truncation / self.points

    @property
    def samples_per_side(self) -> int:
        return self.points + 1

    def depth(self) -> np.ndarray:
        """Distance from the interface, index 0 at y=0^+-, shape (points+1,)."""
        return self.spacing * np.arange(self.points + 1)

    def y_side(self, side: int) -> np.ndarray:
        """Physical heights for a side (0 = lower, 1 = upper), interface first."""
        d = self.depth()
        return d if side == 1 else -d


@dataclass
class InterfaceState:
    """Interface height field on the tangential grid as a graph y = h(x)."""

    h: np.ndarray
    time: float = 0.0

    def __post_init__(self):
        self.h = np.asarray(self.h, dtype=float)
        if self.time < 0.0:
            raise ValueError(f"time must be non-negative, got {self.time}")

    def mean_height(self) -> float:
        return float(np.mean(self.h))


@dataclass
class BulkFields:
    """Velocity and pressure samples on the tangential x vertical grid.

    Arrays are indexed [..., side, depth] with side 0 = lower half-line,
    side 1 = upper, and depth index 0 at the interface (y = 0^-/0^+),
    increasing away from it.  ``v`` carries a leading component axis of
    length dim.  v and w are continuous across y = 0 up to solver
    tolerance; pi may jump.
    """

    v: np.ndarray
    w: np.ndarray
    pi: np.ndarray

    def __post_init__(self):
        self.v = np.asarray(self.v, dtype=float)
        self.w = np.asarray(self.w, dtype=float)
        self.pi = np.asarray(self.pi, dtype=float)
        if self.v.shape[1:] != self.w.shape or self.w.shape != self.pi.shape:
            raise ValueError(
                f"inconsistent bulk shapes v{self.v.shape} w{self.w.shape} "
                f"pi{self.pi.shape}")

    @classmethod
    def zeros(cls, grid: TangentialGrid, vgrid: VerticalGrid) -> "BulkFields":
        shape = grid.shape + (2, vgrid.samples_per_side)
        return cls(v=np.zeros((grid.dim,) + shape), w=np.zeros(shape),
                   pi=np.zeros(shape))

    def interface_trace(self, arr: np.ndarray, side: int) -> np.ndarray:
        """One-sided interface values of a bulk array laid out like w."""
        return arr[..., side, 0]

    def velocity_jump(self) -> float:
        """Max interface jump of (v, w); should be ~0 for admissible states."""
        jv = np.abs(self.v[..., 1, 0] - self.v[..., 0, 0])
        jw = np.abs(self.w[..., 1, 0] - self.w[..., 0, 0])
        return float(max(jv.max(initial=0.0), jw.max(initial=0.0)))


def vertical_derivative(arr: np.ndarray, vgrid: VerticalGrid) -> np.ndarray:
    """d/dy of a bulk array indexed [..., side, depth] (interface-outward).

    Second-order centered stencils inside, one-sided second-order at the
    interface and the far end of each half-line.
    """
    arr = np.asarray(arr, dtype=float)
    dy = vgrid.spacing
    out = np.empty_like(arr)
    out[..., 1:-1] = (arr[..., 2:] - arr[..., :-2]) / (2.0 * dy)
    out[..., 0] = (-3.0 * arr[..., 0] + 4.0 * arr[..., 1] - arr[..., 2]) / (2.0 * dy)
    out[..., -1] = (3.0 * arr[..., -1] - 4.0 * arr[..., -2] + arr[..., -3]) / (2.0 * dy)
    # depth increases downward on the lower side, so d/dy flips sign there
    out[..., 0, :] *= -1.0
    return out


def vertical_second_derivative(arr: np.ndarray, vgrid: VerticalGrid) -> np.ndarray:
    """d^2/dy^2 of a bulk array indexed [..., side, depth]; sign-invariant."""
    arr = np.asarray(arr, dtype=float)
    dy2 = vgrid.spacing ** 2
    out = np.empty_like(arr)
    out[..., 1:-1] = (arr[..., 2:] - 2.0 * arr[..., 1:-1] + arr[..., :-2]) / dy2
    out[..., 0] = (2.0 * arr[..., 0] - 5.0 * arr[..., 1]
                   + 4.0 * arr[..., 2] - arr[..., 3]) / dy2
    out[..., -1] = (2.0 * arr[..., -1] - 5.0 * arr[..., -2]
                    + 4.0 * arr[..., -3] - arr[..., -4]) / dy2
    return out


def one_sided_dy_at_interface(arr: np.ndarray, vgrid: VerticalGrid,
                              side: int) -> np.ndarray:
    """Second-order one-sided d/dy at y=0 from one half-line of samples."""
    dy = vgrid.spacing
    d = (-3.0 * arr[..., side, 0] + 4.0 * arr[..., side, 1]
         - arr[..., side, 2]) / (2.0 * dy)
    return d if side == 1 else -d
