import numpy as np
import pytest

from capillary_stokes.core import FluidParams, TangentialGrid, VerticalGrid

# parameter sets used across the suite
EQUAL_PHASES = FluidParams(rho1=1.0, rho2=1.0, mu1=1.0, mu2=1.0, sigma=1.0)
CONTRAST = FluidParams(rho1=2.0, rho2=0.7, mu1=3.0, mu2=0.5, sigma=1.5)
HEAVY_VISCOSITY = FluidParams(rho1=0.01, rho2=0.01, mu1=10.0, mu2=10.0,
                              sigma=1.0)
RT_UNSTABLE = FluidParams(rho1=0.05, rho2=1.05, mu1=1.0, mu2=1.0, sigma=1.0,
                          gravity=1.0)


@pytest.fixture
def rng():
    return np.random.default_rng(20240813)


@pytest.fixture
def grid1d():
    return TangentialGrid(dim=1, length=2.0 * np.pi, points=64)


@pytest.fixture
def vgrid():
    return VerticalGrid(truncation=12.0, points=64)


def random_admissible(rng, n_points, lam_scale=1.0):
    """Random (lambda, tau) in the closed right half-plane, away from the
    branch cuts, at the given magnitude scale."""
    lam = lam_scale * rng.uniform(1e-3, 10.0, n_points) * np.exp(
        1j * rng.uniform(-np.pi / 2, np.pi / 2, n_points))
    tau = rng.uniform(1e-2, 10.0, n_points)
    return lam, tau
