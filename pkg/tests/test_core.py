import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from capillary_stokes.core import (BulkFields, FluidParams, InterfaceState,
                                   SpectrumError, TangentialGrid,
                                   VerticalGrid, vertical_derivative)


class TestFluidParams:
    def test_positivity_enforced(self):
        with pytest.raises(ValueError):
            FluidParams(rho1=-1.0, rho2=1.0, mu1=1.0, mu2=1.0, sigma=1.0)
        with pytest.raises(ValueError):
            FluidParams(rho1=1.0, rho2=1.0, mu1=1.0, mu2=1.0, sigma=0.0)
        with pytest.raises(ValueError):
            FluidParams(rho1=1.0, rho2=1.0, mu1=1.0, mu2=1.0, sigma=1.0,
                        gravity=-0.1)

    def test_jump_convention_upper_minus_lower(self):
        p = FluidParams(rho1=2.0, rho2=0.5, mu1=3.0, mu2=1.0, sigma=1.0)
        assert p.jump_rho == 0.5 - 2.0
        assert p.jump_mu == 1.0 - 3.0


class TestTangentialGrid:
    def test_validation(self):
        with pytest.raises(ValueError):
            TangentialGrid(dim=3, length=1.0, points=16)
        with pytest.raises(ValueError):
            TangentialGrid(dim=1, length=1.0, points=12)   # not a power of 2
        with pytest.raises(ValueError):
            TangentialGrid(dim=1, length=1.0, points=4)    # too small

    def test_wavenumbers_exactly_representable(self):
        grid = TangentialGrid(dim=1, length=2.5, points=16)
        k = grid.wavenumbers_1d
        ints = k * grid.length / (2.0 * np.pi)
        assert np.array_equal(ints, np.round(ints))
        assert np.count_nonzero(k == 0.0) == 1

    def test_constant_field_mode_zero_is_mean(self):
        grid = TangentialGrid(dim=1, length=3.0, points=8)
        modes = grid.forward_transform(np.ones(8))
        assert modes[0] == pytest.approx(1.0)
        assert np.max(np.abs(modes[1:])) == 0.0

    def test_single_harmonic(self):
        grid = TangentialGrid(dim=1, length=2.0, points=32)
        x = grid.x[0]
        modes = grid.forward_transform(np.cos(2 * np.pi * x / grid.length))
        assert abs(modes[1] - 0.5) < 1e-12
        assert abs(modes[-1] - 0.5) < 1e-12
        rest = np.delete(modes, [1, 31])
        assert np.max(np.abs(rest)) < 1e-12

    def test_inverse_of_unit_mode_is_constant(self):
        grid = TangentialGrid(dim=1, length=1.0, points=8)
        modes = np.zeros(8, dtype=complex)
        modes[0] = 1.0
        assert np.allclose(grid.inverse_transform(modes), 1.0, atol=1e-14)

    def test_length_mismatch_rejected(self):
        grid = TangentialGrid(dim=1, length=1.0, points=8)
        with pytest.raises(ValueError):
            grid.forward_transform(np.ones(9))
        with pytest.raises(ValueError):
            grid.inverse_transform(np.ones(9, dtype=complex))

    @settings(max_examples=25, deadline=None)
    @given(st.integers(min_value=0, max_value=10**6))
    def test_round_trip_random_fields(self, seed):
        rng = np.random.default_rng(seed)
        grid = TangentialGrid(dim=1, length=2.0 * np.pi, points=32)
        f = rng.standard_normal(32)
        back = grid.inverse_transform(grid.forward_transform(f))
        assert np.max(np.abs(back - f)) < 1e-12 * max(1.0, np.max(np.abs(f)))

    def test_parseval_100_random_fields(self):
        rng = np.random.default_rng(99)
        grid = TangentialGrid(dim=1, length=1.7, points=64)
        for _ in range(100):
            f = rng.standard_normal(64)
            modes = grid.forward_transform(f)
            lhs = np.sum(np.abs(modes) ** 2) * grid.points
            rhs = np.sum(f**2)
            assert abs(lhs - rhs) < 1e-10 * rhs

    def test_asymmetric_spectrum_rejected_naming_mode(self):
        grid = TangentialGrid(dim=1, length=1.0, points=16)
        modes = grid.forward_transform(np.random.default_rng(0).standard_normal(16))
        modes[3] += 1e-3
        with pytest.raises(SpectrumError, match=r"\(3,\)"):
            grid.inverse_transform(modes)

    def test_two_dimensional_round_trip(self):
        rng = np.random.default_rng(5)
        grid = TangentialGrid(dim=2, length=2.0, points=16)
        f = rng.standard_normal((16, 16))
        back = grid.inverse_transform(grid.forward_transform(f))
        assert np.max(np.abs(back - f)) < 1e-12

    def test_spectral_gradient_of_harmonic(self):
        grid = TangentialGrid(dim=1, length=2.0 * np.pi, points=64)
        x = grid.x[0]
        g = grid.gradient(np.sin(x))[0]
        assert np.max(np.abs(g - np.cos(x))) < 1e-12


class TestVerticalGrid:
    def test_samples_include_interface_and_truncation(self):
        g = VerticalGrid(truncation=3.0, points=6)
        assert g.spacing == pytest.approx(0.5)
        assert g.y_side(1)[0] == 0.0 and g.y_side(1)[-1] == 3.0
        assert g.y_side(0)[0] == 0.0 and g.y_side(0)[-1] == -3.0

    def test_vertical_derivative_linear_exact(self):
        g = VerticalGrid(truncation=2.0, points=8)
        y = np.stack([g.y_side(0), g.y_side(1)])
        d = vertical_derivative(3.0 * y + 1.0, g)
        assert np.max(np.abs(d - 3.0)) < 1e-13


class TestStateContainers:
    def test_interface_state_mean(self):
        s = InterfaceState(h=np.array([1.0, 2.0, 3.0, 2.0]))
        assert s.mean_height() == pytest.approx(2.0)

    def test_bulk_fields_shape_check(self):
        grid = TangentialGrid(dim=1, length=1.0, points=8)
        vg = VerticalGrid(truncation=1.0, points=4)
        b = BulkFields.zeros(grid, vg)
        assert b.v.shape == (1, 8, 2, 5)
        assert b.velocity_jump() == 0.0
        with pytest.raises(ValueError):
            BulkFields(v=np.zeros((1, 8, 2, 5)), w=np.zeros((8, 2, 4)),
                       pi=np.zeros((8, 2, 5)))
