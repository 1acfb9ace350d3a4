"""Corrector fields, the homogenized solve, and the first-order expansion.

The corrector psi_eps solves (-Laplacian + 1) psi_eps + V_eps = 0 and equals
eps * psi^eps(x/eps) for the rescaled corrector; its gradient grad psi_eps =
grad psi^eps(./eps) is the finite-eps stand-in for the stationary limit
field, and chi_eps = (i/eps) psi_eps is the oscillatory factor entering the
expansion u0 + eps*u1 = u0 * (1 - i psi_eps).  All solves are exact diagonal
Fourier-multiplier applications; the only regularization is the one eps
itself induces.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import IncompatibleEnsembleError, InsufficientEnsembleError
from .fields import FieldRealization
from .grid import (
    SpectralField,
    TorusGrid,
    apply_multiplier,
    gradient,
    helmholtz_inverse_symbol,
    norm,
)


@dataclass(frozen=True)
class CorrectorBundle:
    """Corrector fields derived from one potential realization."""

    realization: FieldRealization
    psi_eps: SpectralField
    grad_psi: tuple[SpectralField, ...]
    chi_eps: SpectralField
    residual: float  # relative spectral residual of (-Lap+1) psi + V_eps

    @property
    def eps(self) -> float:
        return self.realization.eps

    @property
    def seed(self) -> int:
        return self.realization.seed

    @property
    def grid(self) -> TorusGrid:
        return self.realization.grid


def solve_corrector(realization: FieldRealization) -> CorrectorBundle:
    """Build psi_eps = -(-Laplacian+1)^{-1} V_eps and derived fields.

    The multiplier (|k|^2+1)^{-1} is everywhere positive, so the solve cannot
    fail; the returned bundle records the (rounding-level) spectral residual
    of the corrector equation.
    """
    grid = realization.grid
    v_eps = realization.rescaled().to_spectral()
    psi_spec = apply_multiplier(v_eps, -helmholtz_inverse_symbol(grid, 1.0))
    resid_spec = apply_multiplier(psi_spec, grid.k2 + 1.0) + v_eps
    v_norm = norm(v_eps)
    residual = norm(resid_spec) / v_norm if v_norm > 0 else 0.0
    psi = psi_spec.to_nodal().real_part()
    grad_psi = tuple(g.real_part() for g in gradient(psi))
    chi = (1j / realization.eps) * psi
    return CorrectorBundle(realization, psi, grad_psi, chi, residual)


def _common_eps(bundles: list[CorrectorBundle]) -> float:
    eps = bundles[0].eps
    for b in bundles[1:]:
        if b.eps != eps or b.grid != bundles[0].grid:
            raise IncompatibleEnsembleError("incompatible bundles: mixed eps or grids")
    return eps


def rho_empirical(bundles: list[CorrectorBundle], min_bundles: int = 8):
    """Space-and-ensemble average of |grad psi_eps|^2 with its standard error.

    By the corrector's Fourier representation this estimator is unbiased for
    the lattice sum sum_k |k|^2 (|k|^2+eps^2)^{-2} weight(k) in rescaled
    variables, which approaches the discrete rho as eps -> 0.
    """
    if len(bundles) < min_bundles:
        raise InsufficientEnsembleError(
            f"insufficient ensemble: {len(bundles)} < {min_bundles} bundles"
        )
    _common_eps(bundles)
    grid = bundles[0].grid
    per = []
    for b in bundles:
        e = 0.0
        for comp in b.grad_psi:
            e += float(np.mean(np.abs(comp.nodal_values) ** 2))
        per.append(e)
    per_arr = np.asarray(per)
    del grid
    return float(per_arr.mean()), float(per_arr.std(ddof=1) / math.sqrt(len(per)))


@dataclass(frozen=True)
class HomogSolution:
    """Solution of the constant-coefficient limit equation."""

    u0: SpectralField
    rho_used: float
    source: SpectralField
    residual: float

    @property
    def grid(self) -> TorusGrid:
        return self.u0.grid


def solve_homogenized(f: SpectralField, rho: float) -> HomogSolution:
    """Solve -Laplacian u + (1 + rho) u = f by the exact diagonal multiplier."""
    if rho < 0:
        raise ValueError(f"rho must be nonnegative for coercivity, got {rho}")
    grid = f.grid
    u0 = apply_multiplier(f, helmholtz_inverse_symbol(grid, 1.0 + rho))
    resid = apply_multiplier(u0, grid.k2 + 1.0 + rho) - f
    f_norm = norm(f)
    residual = norm(resid) / f_norm if f_norm > 0 else 0.0
    return HomogSolution(u0, float(rho), f, residual)


@dataclass(frozen=True)
class ExpansionResult:
    u1: SpectralField
    residual_rhs: SpectralField


def expansion(u0: HomogSolution, bundle: CorrectorBundle) -> ExpansionResult:
    """First-order term u1 = -chi_eps * u0 and the expansion's residual source.

    ``residual_rhs`` is assembled so that applying (Laplacian - 1 + i V_eps)
    to u0 + eps*u1 - u_eps reproduces it identically on the grid:

        (rho - i V(./eps) chi_eps) u0 - eps (chi_eps Lap u0 + 2 grad chi_eps . grad u0)

    Note the unrescaled potential V(./eps) in the first bracket; the eps^{-1}
    of V_eps is absorbed by chi_eps there.
    """
    if u0.grid != bundle.grid:
        raise IncompatibleEnsembleError("expansion requires a common grid")
    grid = u0.grid
    eps = bundle.eps
    u0f = u0.u0.to_nodal()
    chi = bundle.chi_eps.to_nodal()
    u1 = SpectralField(grid, -chi.values * u0f.values, "nodal")

    v_plain = bundle.realization.potential.nodal_values
    lap_u0 = apply_multiplier(u0f, -grid.k2).values
    grad_u0 = gradient(u0f)
    grad_chi = gradient(chi)
    cross = np.zeros(grid.shape, dtype=complex)
    for gc, gu in zip(grad_chi, grad_u0):
        cross += gc.values * gu.values
    rhs = (u0.rho_used - 1j * v_plain * chi.values) * u0f.values
    rhs -= eps * (chi.values * lap_u0 + 2.0 * cross)
    return ExpansionResult(u1, SpectralField(grid, rhs, "nodal"))


def apply_hetero_operator(
    u: SpectralField, v_eps: SpectralField, sign: str = "physical"
) -> SpectralField:
    """Apply (Laplacian - 1 + i V_eps) (``sign="expansion"``) or
    (-Laplacian + 1 - i V_eps) (``sign="physical"``) exactly on the grid."""
    grid = u.grid
    un = u.to_nodal()
    lap = apply_multiplier(un, -grid.k2)
    out = lap.values - un.values + 1j * v_eps.nodal_values * un.values
    if sign == "physical":
        out = -out
    elif sign != "expansion":
        raise ValueError(f"unknown sign {sign!r}")
    return SpectralField(grid, out, "nodal")
