"""Stationary mean-zero random potentials with prescribed power spectrum.

A :class:`SpectrumModel` fixes the second-order statistics: the correlation
function R and its (rescaled) Fourier transform, the power spectrum R_hat,
normalized so that R(0) = integral of R_hat = sigma2.  Realizations on a
torus grid carry the correlation length ``eps`` directly in the spectrum:
the nodal field V(x) is distributed like the unit-scale process sampled at
x/eps, i.e. mode k receives variance R_hat(eps*k) * eps^d * (2*pi/L)^d, the
Riemann weight of the rescaled spectral measure on the grid's wavevector
lattice.

Two synthesis modes are provided.  ``gaussian`` colors white noise in
Fourier space (exact Gaussian statistics, unbounded).  ``random-phase``
superposes M cosines with wavevectors drawn from the normalized on-grid
spectral mass and uniform phases; it is bounded almost surely by
sqrt(2*sigma2_disc*M) and matches the gaussian mode's second moments
exactly, with fourth moments within O(1/M) of Gaussian.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
import scipy.fft as sfft
import scipy.integrate
import scipy.special

from .errors import (
    IncompatibleEnsembleError,
    InsufficientEnsembleError,
    InvalidSpectrumError,
    RhoUndefinedError,
)
from .grid import SpectralField, TorusGrid, from_spectral

FAMILIES = ("band-limited-flat", "gaussian-bump", "power-law-cutoff")

GAUSSIAN = "gaussian"
RANDOM_PHASE = "random-phase"

DEFAULT_RANDOM_PHASE_MODES = 65536


def sphere_area(d: int) -> float:
    """Surface area of the unit sphere S^{d-1}."""
    return 2.0 * math.pi ** (d / 2) / math.gamma(d / 2)


def ball_volume(d: int, radius: float) -> float:
    return math.pi ** (d / 2) / math.gamma(d / 2 + 1) * radius**d


@dataclass(frozen=True)
class SpectrumModel:
    """Parametric isotropic power spectrum with compact support.

    family
        ``band-limited-flat``: R_hat constant on |xi| <= k_max.
        ``gaussian-bump``: R_hat ~ exp(-(ell*|xi|/2)^2) truncated at k_max.
        ``power-law-cutoff``: R_hat ~ |xi|^{gamma-d} on |xi| <= k_max, the
        correlation decay exponent being gamma (R ~ |x|^{-gamma} at infinity
        for the untruncated law).
    sigma2
        Variance scale: R(0) = integral of R_hat = sigma2.
    k_max
        Spectral cutoff; all families vanish for |xi| > k_max.
    gamma
        Power-law exponent (power-law-cutoff only); the homogenized constant
        is finite only for gamma > 2.
    ell
        Correlation length scale of the unit process (gaussian-bump only),
        before any eps-rescaling.
    """

    family: str
    sigma2: float
    k_max: float
    gamma: float = 2.5
    ell: float = 1.0

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise InvalidSpectrumError(f"unknown spectrum family {self.family!r}")
        if self.sigma2 < 0:
            raise InvalidSpectrumError("sigma2 must be nonnegative")
        if not self.k_max > 0:
            raise InvalidSpectrumError("k_max must be positive")
        if self.family == "power-law-cutoff" and not self.gamma > 0:
            raise InvalidSpectrumError("gamma must be positive")
        if self.family == "gaussian-bump" and not self.ell > 0:
            raise InvalidSpectrumError("ell must be positive")

    def _normalization(self, d: int) -> float:
        """Constant A so that R_hat = A * profile integrates to sigma2."""
        if self.family == "band-limited-flat":
            return self.sigma2 / ball_volume(d, self.k_max)
        if self.family == "power-law-cutoff":
            # omega_{d-1} * int_0^K r^{gamma-d} r^{d-1} dr = omega * K^gamma / gamma
            return self.sigma2 * self.gamma / (sphere_area(d) * self.k_max**self.gamma)
        # gaussian-bump: omega * int_0^K exp(-a r^2) r^{d-1} dr with a = ell^2/4
        a = self.ell**2 / 4.0
        radial = (
            0.5
            * a ** (-d / 2)
            * math.gamma(d / 2)
            * scipy.special.gammainc(d / 2, a * self.k_max**2)
        )
        return self.sigma2 / (sphere_area(d) * radial)

    def spectral_density(self, r, d: int) -> np.ndarray:
        """R_hat as a function of radius |xi| in dimension d (vectorized)."""
        r = np.asarray(r, dtype=float)
        if self.sigma2 == 0.0:
            return np.zeros_like(r)
        A = self._normalization(d)
        inside = r <= self.k_max
        if self.family == "band-limited-flat":
            prof = np.ones_like(r)
        elif self.family == "gaussian-bump":
            prof = np.exp(-((self.ell * r) ** 2) / 4.0)
        else:
            with np.errstate(divide="ignore"):
                prof = np.where(r > 0, r, 1.0) ** (self.gamma - d)
            prof = np.where(r > 0, prof, np.inf if self.gamma < d else 1.0)
        return np.where(inside, A * prof, 0.0)

    def correlation(self, r, d: int) -> np.ndarray:
        """R(|x|) by radial quadrature of the inverse Fourier transform."""
        return correlation_from_spectrum(self, np.asarray(r, dtype=float), d)


def correlation_from_spectrum(model: SpectrumModel, r, d: int) -> np.ndarray:
    """Inverse Fourier transform of the radial spectrum at lags ``r``.

    Uses R(r) = omega_{d-1} * int_0^kmax R_hat(s) Lambda_d(s r) s^{d-1} ds with
    Lambda_d the spherical average of the plane wave (sin(t)/t for d = 3).
    """
    r = np.atleast_1d(np.asarray(r, dtype=float))
    if model.sigma2 == 0.0:
        return np.zeros_like(r)
    nu = d / 2.0 - 1.0

    def plane_wave_avg(t):
        if t < 1e-8:
            return 1.0 - t * t / (2.0 * d)
        return math.gamma(d / 2.0) * (2.0 / t) ** nu * scipy.special.jv(nu, t)

    out = np.empty_like(r)
    area = sphere_area(d)
    for i, ri in enumerate(r):
        val, _ = scipy.integrate.quad(
            lambda s: model.spectral_density(s, d) * plane_wave_avg(s * ri) * s ** (d - 1),
            0.0,
            model.k_max,
            limit=200,
        )
        out[i] = area * val
    return out


# ---------------------------------------------------------------------------
# Synthesis
# ---------------------------------------------------------------------------


def mode_variances(model: SpectrumModel, grid: TorusGrid, eps: float) -> np.ndarray:
    """Spectral variance S_k = R_hat(eps*|k|) * eps^d * (2*pi/L)^d, zero mode nulled."""
    xi = eps * np.sqrt(grid.k2)
    S = model.spectral_density(xi, grid.d) * eps**grid.d * (2.0 * np.pi / grid.length) ** grid.d
    S = np.ascontiguousarray(S)
    S.flat[0] = 0.0
    if np.any(S < 0) or not np.all(np.isfinite(S)):
        raise InvalidSpectrumError("invalid spectrum: negative or non-finite R_hat sample")
    return S


def _check_support(model: SpectrumModel, grid: TorusGrid, eps: float) -> None:
    if model.k_max > eps * grid.nyquist:
        raise InvalidSpectrumError(
            "invalid spectrum: support exceeds the grid Nyquist wavevector "
            f"(k_max = {model.k_max} > eps*pi*n/L = {eps * grid.nyquist:.3f})"
        )


def _sample_radii(model: SpectrumModel, d: int, rng, size: int) -> np.ndarray:
    """Draw |kappa| from the normalized radial density R_hat(r) r^{d-1}."""
    u = rng.random(size)
    if model.family == "band-limited-flat":
        return model.k_max * u ** (1.0 / d)
    if model.family == "power-law-cutoff":
        return model.k_max * u ** (1.0 / model.gamma)
    # gaussian-bump: deterministic inverse CDF on a fine radial table
    r = np.linspace(0.0, model.k_max, 4097)
    dens = model.spectral_density(r, d) * r ** (d - 1)
    cdf = np.concatenate([[0.0], np.cumsum(0.5 * (dens[1:] + dens[:-1]) * np.diff(r))])
    cdf /= cdf[-1]
    return np.interp(u, cdf, r)


@dataclass(frozen=True)
class FieldRealization:
    """One seeded sample of the stationary potential V(./eps) on a grid."""

    grid: TorusGrid
    potential: SpectralField
    eps: float
    seed: int
    mode: str
    model: SpectrumModel | None = None
    amplitude_bound: float | None = None

    def rescaled(self) -> SpectralField:
        """The large potential V_eps = eps^{-1} V(./eps)."""
        from .grid import rescale_argument

        return rescale_argument(self.potential, self.eps)


def synthesize(
    model: SpectrumModel,
    grid: TorusGrid,
    eps: float,
    seed: int,
    mode: str = GAUSSIAN,
    n_modes: int = DEFAULT_RANDOM_PHASE_MODES,
) -> FieldRealization:
    """Draw one realization of the potential at correlation length eps.

    Parameters
    ----------
    model, grid, eps
        Spectrum, target grid, and correlation length; the grid must satisfy
        eps*n/L >= 8 and the spectrum must fit under the rescaled Nyquist
        wavevector.
    seed
        64-bit seed; the same (model, grid, eps, seed, mode) reproduces the
        field bit for bit.
    mode
        ``"gaussian"`` or ``"random-phase"``.
    n_modes
        Cosine count M for the random-phase mode.

    Returns
    -------
    FieldRealization
        Real-valued (Hermitian-symmetric), exactly mean-zero nodal field.
    """
    grid.check_resolution(eps)
    _check_support(model, grid, eps)
    S = mode_variances(model, grid, eps)
    rng = np.random.default_rng(np.uint64(seed))
    bound = None
    if mode == GAUSSIAN:
        w = rng.standard_normal(grid.shape)
        spec = np.sqrt(S * grid.total_points) * sfft.fftn(w)
    elif mode == RANDOM_PHASE:
        # Continuous wavevectors from the normalized spectral density, snapped
        # to the grid lattice so each cosine is exactly periodic.  The draws
        # consume the stream identically for every eps, so replicates shared
        # across an eps ladder stay coherent (common random numbers).
        spec = np.zeros(grid.total_points, dtype=complex)
        if model.sigma2 > 0.0:
            radii = _sample_radii(model, grid.d, rng, n_modes)
            dirs = rng.standard_normal((n_modes, grid.d))
            dirs /= np.linalg.norm(dirs, axis=1)[:, None]
            kappa = radii[:, None] * dirs
            phase = rng.uniform(0.0, 2.0 * np.pi, size=n_modes)
            dk = eps * 2.0 * np.pi / grid.length
            idx = np.round(kappa / dk).astype(np.int64) % grid.n
            flat = np.ravel_multi_index(tuple(idx.T), grid.shape)
            amp = math.sqrt(2.0 * model.sigma2 / n_modes)
            contrib = 0.5 * amp * np.exp(1j * phase) * grid.total_points
            np.add.at(spec, flat, contrib)
            mirror = np.ravel_multi_index(tuple((-idx.T) % grid.n), grid.shape)
            np.add.at(spec, mirror, np.conj(contrib))
        spec = spec.reshape(grid.shape)
        bound = math.sqrt(2.0 * model.sigma2 * n_modes)
    else:
        raise ValueError(f"unknown synthesis mode {mode!r}")
    spec.flat[0] = 0.0
    nodal = sfft.ifftn(spec).real.astype(complex)
    pot = SpectralField(grid, nodal, "nodal")
    return FieldRealization(grid, pot, float(eps), int(seed), mode, model, bound)


# ---------------------------------------------------------------------------
# Empirical statistics
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CorrelationTable:
    """Radially binned ensemble-and-shift-averaged correlation estimate."""

    lag: np.ndarray  # physical bin-mean lag radius
    mean: np.ndarray
    stderr: np.ndarray
    count: np.ndarray  # lattice lags per bin
    eps: float

    @property
    def unit_lag(self) -> np.ndarray:
        """Lags in units of the correlation length (lag / eps)."""
        return self.lag / self.eps


def _common_grid(fields: list[FieldRealization]) -> tuple[TorusGrid, float]:
    grid, eps = fields[0].grid, fields[0].eps
    for f in fields[1:]:
        if f.grid != grid or f.eps != eps:
            raise IncompatibleEnsembleError(
                "incompatible realizations: mixed grids or correlation lengths"
            )
    return grid, eps


def empirical_correlation(
    fields: list[FieldRealization], n_bins: int | None = None
) -> CorrelationTable:
    """Estimate E{V(0) V(x)} from an ensemble of realizations.

    Shift averaging uses the circular autocorrelation (one FFT per field);
    the ensemble spread across realizations gives per-bin standard errors.
    Lags are binned by the torus (minimum-image) radius.
    """
    if len(fields) < 2:
        raise InsufficientEnsembleError("need at least 2 realizations")
    grid, eps = _common_grid(fields)
    per_field = []
    for f in fields:
        v = f.potential.nodal_values.real
        spec = sfft.fftn(v)
        corr = sfft.ifftn(np.abs(spec) ** 2).real / grid.total_points
        per_field.append(corr)
    stack = np.stack(per_field)

    ax = np.minimum(np.arange(grid.n), grid.n - np.arange(grid.n)) * grid.h
    r2 = np.zeros(grid.shape)
    for i in range(grid.d):
        r2 = r2 + ax.reshape((1,) * i + (grid.n,) + (1,) * (grid.d - 1 - i)) ** 2
    radius = np.sqrt(r2).ravel()

    if n_bins is None:
        n_bins = grid.n // 2
    edges = np.concatenate(
        [[0.0, grid.h / 2.0], grid.h / 2.0 + np.arange(1, n_bins) * (grid.h)]
    )
    which = np.digitize(radius, edges) - 1
    flat = stack.reshape(len(fields), -1)
    lag, mean, stderr, count = [], [], [], []
    for b in range(len(edges) - 1):
        sel = which == b
        if not sel.any():
            continue
        vals = flat[:, sel].mean(axis=1)
        lag.append(radius[sel].mean())
        mean.append(vals.mean())
        stderr.append(vals.std(ddof=1) / math.sqrt(len(fields)))
        count.append(int(sel.sum()))
    return CorrelationTable(
        np.array(lag), np.array(mean), np.array(stderr), np.array(count), eps
    )


def discrete_correlation(model: SpectrumModel, grid: TorusGrid, eps: float) -> np.ndarray:
    """Exact on-grid covariance E V(0)V(z) at every lattice lag (one iFFT)."""
    S = mode_variances(model, grid, eps)
    return sfft.ifftn(S).real * grid.total_points


# ---------------------------------------------------------------------------
# The homogenized constant rho
# ---------------------------------------------------------------------------


def rho_spectral(model: SpectrumModel, d: int, tol: float = 1e-8) -> float:
    """Continuum rho = integral of R_hat(xi)/|xi|^2 by adaptive radial quadrature.

    Raises
    ------
    RhoUndefinedError
        If the integral diverges at the origin (power-law gamma <= 2).
    """
    if d < 3:
        raise ValueError("rho is defined for d >= 3")
    if model.sigma2 == 0.0:
        return 0.0
    if model.family == "power-law-cutoff" and model.gamma <= 2.0:
        raise RhoUndefinedError(
            "rho undefined: slow correlation decay (gamma <= 2)"
        )
    val, _ = scipy.integrate.quad(
        lambda r: model.spectral_density(r, d) * r ** (d - 3),
        0.0,
        model.k_max,
        epsabs=tol,
        epsrel=1e-12,
        limit=400,
    )
    return sphere_area(d) * val


def rho_discrete(
    model: SpectrumModel, grid: TorusGrid, eps: float, regularized: bool = False
) -> float:
    """On-grid counterpart of rho: the lattice sum of R_hat(xi)/|xi|^2.

    The sum runs over the wavevector lattice the synthesized field actually
    occupies (spacing 2*pi*eps/L in the rescaled variable, the grid of the
    unit-scale problem), so the corrector energy estimator is comparable to
    it without an O(L^{-1}) origin-cell bias.  With ``regularized=True`` the
    denominator is |xi|^2 + eps^2, the massive regularization the corrector
    itself carries.
    """
    if grid.d < 3:
        raise ValueError("rho is defined for d >= 3")
    if model.family == "power-law-cutoff" and model.gamma <= 2.0 and model.sigma2 > 0:
        raise RhoUndefinedError("rho undefined: slow correlation decay (gamma <= 2)")
    S = mode_variances(model, grid, eps)
    xi2 = (eps**2) * grid.k2
    den = xi2 + eps**2 if regularized else xi2
    out = np.divide(S, den, out=np.zeros_like(S), where=den > 0)
    out.flat[0] = 0.0
    return float(out.sum())


# ---------------------------------------------------------------------------
# Admissibility and mixing diagnostics
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class AdmissibilityReport:
    rho_finite: bool
    s_condition: bool
    witness_s: float
    rho: float | None
    weighted_integral: float | None


def check_admissibility(model: SpectrumModel, d: int) -> AdmissibilityReport:
    """Check rho < infinity and the weighted condition with witness s.

    Evaluates integral of (1 + |xi|^{2s}) |xi|^{-2} R_hat(xi) for
    s = (d-2)/4 + 1/2.  All built-in families have compact spectral support,
    so the |xi|^{2s} factor is harmless and the condition holds exactly when
    rho is finite; the witness records the s used.  Returns flags rather than
    raising.
    """
    s = (d - 2) / 4.0 + 0.5
    if model.sigma2 == 0.0:
        return AdmissibilityReport(True, True, s, 0.0, 0.0)
    if model.family == "power-law-cutoff" and model.gamma <= 2.0:
        return AdmissibilityReport(False, False, s, None, None)
    rho = rho_spectral(model, d)
    val, _ = scipy.integrate.quad(
        lambda r: (1.0 + r ** (2 * s)) * model.spectral_density(r, d) * r ** (d - 3),
        0.0,
        model.k_max,
        limit=400,
    )
    weighted = sphere_area(d) * val
    return AdmissibilityReport(
        math.isfinite(rho), math.isfinite(weighted), s, rho, weighted
    )


@dataclass(frozen=True)
class QuadrupleResult:
    points: tuple
    empirical: float
    stderr: float
    predicted_residual: float
    bound: float
    residual: float


@dataclass(frozen=True)
class MixingDiagnostics:
    """Fourth-moment residual table against the eta-bound (eta = R)."""

    eta: Callable[[np.ndarray], np.ndarray]
    rows: list[QuadrupleResult]
    eta_integral: float

    @property
    def eta_integrable(self) -> bool:
        return math.isfinite(self.eta_integral)


def fourth_moment_residual(
    fields: list[FieldRealization],
    quadruples: list[tuple],
    min_realizations: int = 256,
) -> MixingDiagnostics:
    """Empirical fourth-moment residuals on a panel of point quadruples.

    For each quadruple (x1..x4), estimates
    E{V(x1)V(x2)V(x3)V(x4)} - R(x1-x2) R(x3-x4) over the ensemble and
    reports it next to the pair bound
    eta(|x1-x3|) eta(|x2-x4|) + eta(|x1-x4|) eta(|x2-x3|) with eta = R, the
    choice that turns the bound into an equality for Gaussian fields
    (Isserlis).  Predictions use the exact on-grid covariance.  Points are
    physical coordinates snapped to the nearest node.
    """
    if len(fields) < min_realizations:
        raise InsufficientEnsembleError(
            f"insufficient ensemble: {len(fields)} < {min_realizations} realizations"
        )
    grid, eps = _common_grid(fields)
    model = fields[0].model
    if model is None:
        raise ValueError("realizations must carry their spectrum model")
    R_lat = discrete_correlation(model, grid, eps)

    def node(p):
        return tuple(int(round(c / grid.h)) % grid.n for c in p)

    def R_of(a, b):
        lag = tuple((ai - bi) % grid.n for ai, bi in zip(a, b))
        return float(R_lat[lag])

    stack = np.stack([f.potential.nodal_values.real for f in fields])
    n_fields = len(fields)
    rows = []
    for quad in quadruples:
        nodes = [node(p) for p in quad]
        samples = np.ones(n_fields)
        for nd in nodes:
            samples = samples * stack[(slice(None), *nd)]
        emp = float(samples.mean())
        se = float(samples.std(ddof=1) / math.sqrt(n_fields))
        r12, r34 = R_of(nodes[0], nodes[1]), R_of(nodes[2], nodes[3])
        r13, r24 = R_of(nodes[0], nodes[2]), R_of(nodes[1], nodes[3])
        r14, r23 = R_of(nodes[0], nodes[3]), R_of(nodes[1], nodes[2])
        rows.append(
            QuadrupleResult(
                points=tuple(map(tuple, quad)),
                empirical=emp,
                stderr=se,
                predicted_residual=r13 * r24 + r14 * r23,
                bound=abs(r13 * r24) + abs(r14 * r23),
                residual=emp - r12 * r34,
            )
        )

    def eta(r):
        return correlation_from_spectrum(model, np.abs(r), grid.d)

    upper = 40.0 / max(model.k_max, 1e-3)
    val, _ = scipy.integrate.quad(
        lambda r: abs(float(eta(r)[0])) * r ** (grid.d - 1), 0.0, upper, limit=200
    )
    eta_integral = sphere_area(grid.d) * val
    return MixingDiagnostics(eta=eta, rows=rows, eta_integral=eta_integral)
