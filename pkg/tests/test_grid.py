"""Spectral grid calculus: FFT contract, multipliers, norms, rescaling."""

import numpy as np
import pytest

from hlab.errors import SingularSymbolError, UnderResolvedError
from hlab.grid import (
    H1,
    HMINUS1,
    L2,
    SpectralField,
    TorusGrid,
    apply_multiplier,
    from_nodal,
    gradient,
    helmholtz_inverse_symbol,
    masked_inverse_laplacian_symbol,
    norm,
    rescale_argument,
    zero_field,
)

GRIDS = [TorusGrid(1, 64, 2.0), TorusGrid(2, 32, 1.0), TorusGrid(3, 16, 2.0)]


def random_field(grid, seed=0):
    rng = np.random.default_rng(seed)
    vals = rng.standard_normal(grid.shape) + 1j * rng.standard_normal(grid.shape)
    return from_nodal(grid, vals)


class TestTorusGrid:
    def test_wavevectors_are_integer_multiples(self):
        grid = TorusGrid(1, 8, 2.0)
        expected = 2 * np.pi / 2.0 * np.array([0, 1, 2, 3, -4, -3, -2, -1])
        assert np.allclose(grid.wavenumbers_axis, expected)

    def test_zero_mode_is_index_zero(self):
        for grid in GRIDS:
            assert grid.k2.flat[0] == 0.0

    def test_cell_volume_positive(self):
        for grid in GRIDS:
            assert grid.cell_volume > 0

    def test_rejects_non_power_of_two(self):
        with pytest.raises(ValueError, match="power of two"):
            TorusGrid(2, 24, 1.0)

    def test_rejects_bad_dimension_and_length(self):
        with pytest.raises(ValueError):
            TorusGrid(0, 16, 1.0)
        with pytest.raises(ValueError):
            TorusGrid(2, 16, -1.0)


class TestFFTContract:
    @pytest.mark.parametrize("grid", GRIDS)
    def test_roundtrip_identity(self, grid):
        f = random_field(grid, seed=3)
        back = f.to_spectral().to_nodal()
        err = np.abs(back.values - f.values).max() / np.abs(f.values).max()
        assert err < 1e-12

    @pytest.mark.parametrize("grid", GRIDS)
    def test_parseval(self, grid):
        f = random_field(grid, seed=4)
        nodal_l2 = np.sqrt(grid.cell_volume * np.sum(np.abs(f.values) ** 2))
        spec = f.to_spectral().values
        spectral_l2 = np.sqrt(
            grid.cell_volume / grid.total_points * np.sum(np.abs(spec) ** 2)
        )
        assert abs(nodal_l2 - spectral_l2) / nodal_l2 < 1e-10

    def test_real_field_hermitian_symmetry(self):
        grid = TorusGrid(2, 32, 1.0)
        rng = np.random.default_rng(5)
        f = from_nodal(grid, rng.standard_normal(grid.shape))
        spec = f.to_spectral().values
        flipped = np.conj(np.roll(np.flip(spec), 1, axis=tuple(range(grid.d))))
        assert np.allclose(spec, flipped, atol=1e-9 * np.abs(spec).max())
        assert f.max_imag_ratio() < 1e-10


class TestApplyMultiplier:
    def test_identity_symbol(self):
        grid = TorusGrid(2, 16, 1.0)
        f = random_field(grid)
        out = apply_multiplier(f, np.ones(grid.shape))
        assert np.allclose(out.values, f.values, atol=1e-13)
        assert out.representation == f.representation

    def test_single_mode_is_eigenfunction(self):
        grid = TorusGrid(3, 16, 2.0)
        k0 = np.array([2 * np.pi / grid.length, 0.0, 0.0])
        phase = sum(k * x for k, x in zip(k0, grid.x))
        f = from_nodal(grid, np.exp(1j * phase))
        out = apply_multiplier(f, helmholtz_inverse_symbol(grid, 1.0))
        expected = np.exp(1j * phase) / (np.dot(k0, k0) + 1.0)
        assert np.abs(out.values - expected).max() < 1e-12

    def test_laplacian_roundtrip_recovers_mean_zero_part(self):
        grid = TorusGrid(2, 32, 1.0)
        f = random_field(grid, seed=9)
        forward = apply_multiplier(f, grid.k2)
        back = apply_multiplier(forward, masked_inverse_laplacian_symbol(grid))
        mean = f.values.mean()
        err = np.abs(back.values - (f.values - mean)).max()
        assert err < 1e-10 * np.abs(f.values).max()

    def test_composition_matches_product_symbol(self):
        grid = TorusGrid(2, 16, 1.0)
        f = random_field(grid, seed=11).to_spectral()
        s1 = 2.0 ** np.round(np.log2(1.0 + grid.k2))  # power-of-two symbol
        s2 = 0.5 * np.ones(grid.shape)
        once = apply_multiplier(f, s1 * s2)
        twice = apply_multiplier(apply_multiplier(f, s1), s2)
        assert np.array_equal(once.values, twice.values)

    def test_generic_composition_close(self):
        grid = TorusGrid(2, 16, 1.0)
        f = random_field(grid, seed=12).to_spectral()
        s1 = 1.0 / (1.0 + grid.k2)
        s2 = np.cos(grid.k2) + 1.5
        once = apply_multiplier(f, s1 * s2)
        twice = apply_multiplier(apply_multiplier(f, s1), s2)
        assert np.allclose(once.values, twice.values, rtol=1e-13, atol=0)

    def test_singular_symbol_names_wavevector(self):
        grid = TorusGrid(2, 8, 1.0)
        sym = np.ones(grid.shape)
        sym[0, 0] = np.inf
        with pytest.raises(SingularSymbolError, match=r"singular symbol at k = \(0.0, 0.0\)"):
            apply_multiplier(random_field(grid), sym)


class TestNorms:
    def test_zero_field_all_kinds(self):
        grid = TorusGrid(2, 16, 1.0)
        z = zero_field(grid)
        for kind in (L2, H1, HMINUS1):
            assert norm(z, kind) == 0.0

    def test_single_mode_closed_form(self):
        # L = 2*pi so that ||e^{ik0 x}||_{L2}^2 = L^d and H1 adds (1+|k0|^2).
        grid = TorusGrid(2, 32, 2.0 * np.pi)
        m = (3, 1)
        phase = sum(mi * x for mi, x in zip(m, grid.x))  # k = m for L = 2 pi
        f = from_nodal(grid, np.exp(1j * phase))
        k0_sq = float(sum(mi**2 for mi in m))
        vol = grid.length**grid.d
        assert abs(norm(f, L2) ** 2 - vol) < 1e-9 * vol
        assert abs(norm(f, H1) ** 2 - (1 + k0_sq) * vol) < 1e-9 * (1 + k0_sq) * vol
        assert abs(norm(f, HMINUS1) ** 2 - vol / (1 + k0_sq)) < 1e-9 * vol

    @pytest.mark.parametrize("seed", [0, 1, 2])
    def test_norm_ordering(self, seed):
        grid = TorusGrid(3, 16, 1.5)
        f = random_field(grid, seed)
        assert norm(f, HMINUS1) <= norm(f, L2) <= norm(f, H1)

    def test_gradient_energy_consistent_with_h1(self):
        grid = TorusGrid(2, 32, 1.0)
        f = random_field(grid, 7)
        grads = gradient(f)
        g2 = sum(norm(g) ** 2 for g in grads)
        assert abs(norm(f, H1) ** 2 - (norm(f) ** 2 + g2)) < 1e-10 * norm(f, H1) ** 2


class TestRescaleArgument:
    def test_zero_field(self):
        grid = TorusGrid(3, 16, 1.0)
        out = rescale_argument(zero_field(grid), 0.5)
        assert np.all(out.values == 0)

    def test_exact_amplitude_scaling(self):
        grid = TorusGrid(2, 32, 1.0)
        f = random_field(grid, 13)
        eps = 0.5
        out = rescale_argument(f, eps)
        assert norm(out) == pytest.approx(norm(f) / eps, rel=1e-14)

    def test_under_resolved_rejected(self):
        grid = TorusGrid(2, 32, 1.0)
        with pytest.raises(UnderResolvedError, match="under-resolved correlation length"):
            rescale_argument(random_field(grid), 0.1)  # 0.1*32 = 3.2 < 8
