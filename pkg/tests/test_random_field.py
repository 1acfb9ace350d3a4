"""Random potential synthesis, empirical statistics, rho, admissibility."""

import math

import numpy as np
import pytest

from hlab.errors import (
    IncompatibleEnsembleError,
    InsufficientEnsembleError,
    InvalidSpectrumError,
    RhoUndefinedError,
)
from hlab.fields import (
    FieldRealization,
    SpectrumModel,
    ball_volume,
    check_admissibility,
    correlation_from_spectrum,
    discrete_correlation,
    empirical_correlation,
    fourth_moment_residual,
    mode_variances,
    rho_discrete,
    rho_spectral,
    sphere_area,
    synthesize,
)
from hlab.grid import TorusGrid, from_nodal

FLAT = SpectrumModel("band-limited-flat", sigma2=16.0, k_max=8.0)
GRID3 = TorusGrid(3, 32, 1.0)


class TestSynthesize:
    @pytest.mark.parametrize("mode", ["gaussian", "random-phase"])
    def test_deterministic(self, mode):
        a = synthesize(FLAT, GRID3, 0.5, 42, mode)
        b = synthesize(FLAT, GRID3, 0.5, 42, mode)
        assert np.array_equal(a.potential.values, b.potential.values)

    @pytest.mark.parametrize("mode", ["gaussian", "random-phase"])
    def test_mean_zero_and_real(self, mode):
        real = synthesize(FLAT, GRID3, 0.5, 7, mode)
        spec = real.potential.to_spectral().values
        assert spec.flat[0] == 0.0
        assert real.potential.max_imag_ratio() < 1e-10
        assert abs(real.potential.values.real.mean()) < 1e-12 * np.abs(
            real.potential.values
        ).max()

    @pytest.mark.parametrize("mode", ["gaussian", "random-phase"])
    def test_zero_variance_gives_zero_field(self, mode):
        model = SpectrumModel("band-limited-flat", sigma2=0.0, k_max=8.0)
        real = synthesize(model, GRID3, 0.5, 3, mode)
        assert np.all(real.potential.values == 0)

    def test_gaussian_ensemble_variance(self):
        # Empirical R(0) over 64 seeds within 10% of sigma2.
        vars_ = [
            synthesize(FLAT, GRID3, 0.5, 100 + s, "gaussian").potential.values.real.var()
            for s in range(64)
        ]
        assert abs(np.mean(vars_) - FLAT.sigma2) / FLAT.sigma2 < 0.10

    def test_random_phase_ensemble_variance_and_bound(self):
        fields = [synthesize(FLAT, GRID3, 0.5, 200 + s, "random-phase") for s in range(64)]
        mean_var = np.mean([f.potential.values.real.var() for f in fields])
        assert abs(mean_var - FLAT.sigma2) / FLAT.sigma2 < 0.10
        for f in fields[:8]:
            assert np.abs(f.potential.values.real).max() <= f.amplitude_bound

    def test_under_resolved_rejected(self):
        with pytest.raises(Exception, match="under-resolved"):
            synthesize(FLAT, GRID3, 0.1, 0, "gaussian")

    def test_spectrum_exceeding_nyquist_rejected(self):
        wide = SpectrumModel("band-limited-flat", sigma2=1.0, k_max=200.0)
        with pytest.raises(InvalidSpectrumError, match="Nyquist"):
            synthesize(wide, GRID3, 0.5, 0, "gaussian")

    def test_mode_variances_nonnegative_zero_mode_nulled(self):
        S = mode_variances(FLAT, GRID3, 0.5)
        assert S.flat[0] == 0.0
        assert np.all(S >= 0)

    def test_gaussian_mode_matches_prescribed_spectrum(self):
        # Ensemble mean |V_hat(k)|^2 should track S_k on a populated shell.
        S = mode_variances(FLAT, GRID3, 0.5)
        idx = np.unravel_index(np.argmax(S), S.shape)
        acc = 0.0
        n_seeds = 200
        for s in range(n_seeds):
            spec = (
                synthesize(FLAT, GRID3, 0.5, 300 + s, "gaussian")
                .potential.to_spectral()
                .values
            )
            acc += abs(spec[idx]) ** 2 / GRID3.total_points**2
        assert acc / n_seeds == pytest.approx(S[idx], rel=0.25)


class TestEmpiricalCorrelation:
    def test_requires_two_realizations(self):
        real = synthesize(FLAT, GRID3, 0.5, 1)
        with pytest.raises(InsufficientEnsembleError):
            empirical_correlation([real])

    def test_mixed_grids_rejected(self):
        other = TorusGrid(3, 16, 1.0)
        small = SpectrumModel("band-limited-flat", sigma2=16.0, k_max=8.0)
        a = synthesize(FLAT, GRID3, 0.5, 1)
        b = synthesize(small, other, 0.5, 2)
        with pytest.raises(IncompatibleEnsembleError, match="incompatible realizations"):
            empirical_correlation([a, b])

    def test_zero_fields(self):
        model = SpectrumModel("band-limited-flat", sigma2=0.0, k_max=8.0)
        fields = [synthesize(model, GRID3, 0.5, s) for s in range(2)]
        table = empirical_correlation(fields)
        assert np.all(table.mean == 0)

    def test_lag_zero_is_empirical_variance(self):
        fields = [synthesize(FLAT, GRID3, 0.5, 400 + s) for s in range(4)]
        table = empirical_correlation(fields)
        expected = np.mean([f.potential.values.real.var() for f in fields])
        assert table.lag[0] == 0.0
        assert table.mean[0] == pytest.approx(expected, rel=1e-12)

    def test_single_cosine_closed_form(self):
        # One random-phase cosine in d=1: R(z) = sigma^2 cos(k0 z) exactly.
        grid = TorusGrid(1, 256, 2.0)
        k0 = 2 * np.pi / grid.length * 6
        sigma = 1.3
        fields = []
        rng = np.random.default_rng(0)
        for s in range(64):
            phi = rng.uniform(0, 2 * np.pi)
            vals = math.sqrt(2.0) * sigma * np.cos(k0 * grid.x[0] + phi)
            fields.append(
                FieldRealization(grid, from_nodal(grid, vals), 1.0, s, "random-phase")
            )
        table = empirical_correlation(fields, n_bins=64)
        expected = sigma**2 * np.cos(k0 * table.lag)
        # shift-averaging makes each realization's correlation exact here
        assert np.allclose(table.mean, expected, atol=1e-10)

    def test_gaussian_bump_matches_radial_quadrature(self):
        model = SpectrumModel("gaussian-bump", sigma2=4.0, k_max=12.0, ell=1.0)
        grid = TorusGrid(3, 32, 1.0)
        fields = [synthesize(model, grid, 0.5, 500 + s, "gaussian") for s in range(64)]
        table = empirical_correlation(fields, n_bins=10)
        analytic = correlation_from_spectrum(model, table.unit_lag, 3)
        # compare within 3 standard errors wherever the estimate is informative
        for m, se, a in zip(table.mean, table.stderr, analytic):
            if se > 0:
                assert abs(m - a) < 3.0 * se + 0.02 * model.sigma2

    def test_rescale_halves_correlation_length(self):
        # e-folding radius of the empirical correlation scales with eps
        grid = TorusGrid(3, 64, 1.0)
        model = SpectrumModel("gaussian-bump", sigma2=1.0, k_max=16.0, ell=1.0)

        def efold(eps):
            fields = [synthesize(model, grid, eps, 600 + s, "gaussian") for s in range(16)]
            table = empirical_correlation(fields, n_bins=32)
            target = table.mean[0] / math.e
            idx = np.argmax(table.mean < target)
            lo, hi = table.lag[idx - 1], table.lag[idx]
            flo, fhi = table.mean[idx - 1], table.mean[idx]
            return lo + (target - flo) * (hi - lo) / (fhi - flo)

        r1, r2 = efold(0.5), efold(0.25)
        assert abs(r1 / r2 - 2.0) < 0.30  # halving within 15%


class TestRho:
    def test_band_limited_closed_form(self):
        # R_hat = c on |xi| <= 1 at d=3 gives rho = 4 pi c.
        model = SpectrumModel("band-limited-flat", sigma2=2.0, k_max=1.0)
        c = model.sigma2 / ball_volume(3, 1.0)
        assert rho_spectral(model, 3) == pytest.approx(4 * math.pi * c, rel=1e-6)

    def test_zero_variance(self):
        assert rho_spectral(SpectrumModel("band-limited-flat", 0.0, 1.0), 3) == 0.0

    def test_power_law_vs_riemann_sum(self):
        model = SpectrumModel("power-law-cutoff", sigma2=3.0, k_max=2.0, gamma=2.5)
        rho = rho_spectral(model, 3)
        r = (np.arange(10**6) + 0.5) * (model.k_max / 10**6)
        riemann = sphere_area(3) * np.sum(
            model.spectral_density(r, 3) * r**0
        ) * (model.k_max / 10**6)
        assert abs(rho - riemann) / riemann < 1e-4

    def test_slow_decay_rejected(self):
        model = SpectrumModel("power-law-cutoff", sigma2=1.0, k_max=1.0, gamma=1.5)
        with pytest.raises(RhoUndefinedError, match="rho undefined: slow correlation decay"):
            rho_spectral(model, 3)

    def test_homogeneous_in_sigma2(self):
        a = rho_spectral(SpectrumModel("gaussian-bump", 2.0, 8.0, ell=1.0), 3)
        b = rho_spectral(SpectrumModel("gaussian-bump", 4.0, 8.0, ell=1.0), 3)
        assert b == pytest.approx(2 * a, rel=1e-10)

    def test_discrete_rho_approaches_continuum(self):
        grid = TorusGrid(3, 64, 1.0)
        rho_c = rho_spectral(FLAT, 3)
        gaps = [
            abs(rho_discrete(FLAT, grid, eps) - rho_c) / rho_c
            for eps in (0.5, 0.25, 0.125)
        ]
        assert gaps[2] < gaps[0]
        assert gaps[2] < 0.1


class TestAdmissibility:
    def test_band_limited_admissible(self):
        rep = check_admissibility(FLAT, 3)
        assert rep.rho_finite and rep.s_condition
        assert rep.witness_s == pytest.approx(0.75)

    def test_slow_decay_flagged(self):
        model = SpectrumModel("power-law-cutoff", sigma2=1.0, k_max=1.0, gamma=1.5)
        rep = check_admissibility(model, 3)
        assert not rep.rho_finite

    def test_zero_field_admissible(self):
        rep = check_admissibility(SpectrumModel("band-limited-flat", 0.0, 1.0), 3)
        assert rep.rho_finite and rep.s_condition


class TestFourthMoment:
    def test_insufficient_ensemble(self):
        fields = [synthesize(FLAT, GRID3, 0.5, s) for s in range(4)]
        with pytest.raises(InsufficientEnsembleError, match="insufficient ensemble"):
            fourth_moment_residual(fields, [((0, 0, 0),) * 4])

    def test_zero_fields_zero_residuals(self):
        model = SpectrumModel("band-limited-flat", sigma2=0.0, k_max=8.0)
        fields = [synthesize(model, GRID3, 0.5, s) for s in range(8)]
        diag = fourth_moment_residual(fields, [((0, 0, 0),) * 4], min_realizations=8)
        assert diag.rows[0].residual == 0.0

    def test_equal_points_isserlis(self):
        # E V^4 = 3 R(0)^2 for Gaussian fields: residual = 2 R(0)^2 = bound.
        grid = TorusGrid(3, 16, 0.5)
        fields = [synthesize(FLAT, grid, 0.5, 700 + s, "gaussian") for s in range(512)]
        p = (0.25, 0.25, 0.25)
        diag = fourth_moment_residual(fields, [(p, p, p, p)], min_realizations=256)
        row = diag.rows[0]
        r0 = discrete_correlation(FLAT, grid, 0.5)[0, 0, 0]
        assert row.predicted_residual == pytest.approx(2 * r0**2, rel=1e-10)
        assert abs(row.residual - row.predicted_residual) < 4 * row.stderr
        assert row.bound == pytest.approx(row.predicted_residual)
        assert diag.eta_integrable
