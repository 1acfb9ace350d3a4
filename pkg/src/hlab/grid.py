"""Periodic torus grids and exact Fourier-multiplier calculus.

Everything downstream (field synthesis, corrector solves, the heterogeneous
solver) runs on a d-dimensional periodic grid of n points per axis and
physical side ``length``.  The spectral convention is the plain unnormalized
DFT: ``spectral = fftn(nodal)``, ``nodal = ifftn(spectral)``, with wavevectors
k = 2*pi*m/length for integer m in [-n/2, n/2).  Differential operators act as
exact multipliers in k (the Laplacian symbol is |k|^2, not a finite-difference
stencil), so the discrete calculus reproduces the continuum identities to
rounding error.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.fft as sfft

from .errors import SingularSymbolError, UnderResolvedError

NODAL = "nodal"
SPECTRAL = "spectral"

#: Minimum number of grid points per correlation length (eps * n / length).
RESOLUTION_POINTS_PER_LENGTH = 8.0


@dataclass(eq=True)
class TorusGrid:
    """Uniform periodic grid on the torus [0, length)^d.

    Parameters
    ----------
    d : int
        Spatial dimension (>= 1; experiments use 3-5).
    n : int
        Points per axis; must be a power of two.
    length : float
        Physical side length L of the torus.
    """

    d: int
    n: int
    length: float

    def __post_init__(self):
        if self.d < 1:
            raise ValueError(f"dimension must be >= 1, got {self.d}")
        if self.n < 2 or (self.n & (self.n - 1)) != 0:
            raise ValueError(f"points per axis must be a power of two, got {self.n}")
        if not self.length > 0:
            raise ValueError(f"length must be positive, got {self.length}")
        self.length = float(self.length)

    # -- geometry -----------------------------------------------------------

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.n,) * self.d

    @property
    def h(self) -> float:
        """Mesh spacing length/n."""
        return self.length / self.n

    @property
    def cell_volume(self) -> float:
        return self.h**self.d

    @property
    def total_points(self) -> int:
        return self.n**self.d

    @property
    def volume(self) -> float:
        return self.length**self.d

    @property
    def nyquist(self) -> float:
        """Largest per-axis wavevector magnitude pi*n/length."""
        return np.pi * self.n / self.length

    # -- cached arrays ------------------------------------------------------

    @cached_property
    def wavenumbers_axis(self) -> np.ndarray:
        """1D wavevector axis 2*pi*m/L in FFT (numpy fftfreq) ordering."""
        return 2.0 * np.pi / self.length * sfft.fftfreq(self.n, d=1.0 / self.n)

    @cached_property
    def k(self) -> tuple[np.ndarray, ...]:
        """Wavevector components, each broadcastable to ``shape``."""
        ax = self.wavenumbers_axis
        return tuple(
            ax.reshape((1,) * i + (self.n,) + (1,) * (self.d - 1 - i))
            for i in range(self.d)
        )

    @cached_property
    def k2(self) -> np.ndarray:
        """|k|^2 on the full grid."""
        out = np.zeros(self.shape)
        for ki in self.k:
            out = out + ki**2
        return out

    @cached_property
    def x(self) -> tuple[np.ndarray, ...]:
        """Coordinate components x_i = h*j, each broadcastable to ``shape``."""
        ax = np.arange(self.n) * self.h
        return tuple(
            ax.reshape((1,) * i + (self.n,) + (1,) * (self.d - 1 - i))
            for i in range(self.d)
        )

    def wavevector_at(self, flat_index: int) -> tuple[float, ...]:
        """Wavevector of the mode at a flattened (row-major) spectral index."""
        multi = np.unravel_index(flat_index, self.shape)
        ax = self.wavenumbers_axis
        return tuple(float(ax[m]) for m in multi)

    def check_resolution(self, eps: float) -> None:
        """Enforce the grid resolution rule eps*n/length >= 8."""
        if eps <= 0:
            raise ValueError(f"eps must be positive, got {eps}")
        if eps * self.n / self.length < RESOLUTION_POINTS_PER_LENGTH * (1.0 - 1e-12):
            raise UnderResolvedError(
                "under-resolved correlation length: "
                f"eps*n/length = {eps * self.n / self.length:.3f} < "
                f"{RESOLUTION_POINTS_PER_LENGTH}"
            )


@dataclass(eq=False, frozen=True)
class SpectralField:
    """A complex scalar field on a :class:`TorusGrid`.

    ``values`` holds one complex number per node (representation ``"nodal"``)
    or the unnormalized DFT coefficients (representation ``"spectral"``).
    Fields are immutable by convention: operations return new instances and
    never write into ``values``.
    """

    grid: TorusGrid
    values: np.ndarray
    representation: str = NODAL

    def __post_init__(self):
        if self.representation not in (NODAL, SPECTRAL):
            raise ValueError(f"unknown representation {self.representation!r}")
        if self.values.shape != self.grid.shape:
            raise ValueError(
                f"values shape {self.values.shape} does not match grid {self.grid.shape}"
            )

    # -- representation changes ---------------------------------------------

    def to_spectral(self) -> "SpectralField":
        if self.representation == SPECTRAL:
            return self
        return SpectralField(self.grid, sfft.fftn(self.values), SPECTRAL)

    def to_nodal(self) -> "SpectralField":
        if self.representation == NODAL:
            return self
        return SpectralField(self.grid, sfft.ifftn(self.values), NODAL)

    @property
    def nodal_values(self) -> np.ndarray:
        return self.to_nodal().values

    @property
    def spectral_values(self) -> np.ndarray:
        return self.to_spectral().values

    # -- arithmetic (pointwise in the current representation's dual sense) ---

    def __add__(self, other: "SpectralField") -> "SpectralField":
        a, b = _align(self, other)
        return SpectralField(a.grid, a.values + b.values, a.representation)

    def __sub__(self, other: "SpectralField") -> "SpectralField":
        a, b = _align(self, other)
        return SpectralField(a.grid, a.values - b.values, a.representation)

    def __mul__(self, scalar: complex) -> "SpectralField":
        return SpectralField(self.grid, self.values * scalar, self.representation)

    __rmul__ = __mul__

    def product(self, other: "SpectralField") -> "SpectralField":
        """Pointwise (nodal) product of two fields."""
        a = self.to_nodal()
        b = other.to_nodal()
        if a.grid != b.grid:
            raise ValueError("fields live on different grids")
        return SpectralField(a.grid, a.values * b.values, NODAL)

    # -- diagnostics ----------------------------------------------------------

    def max_imag_ratio(self) -> float:
        """max |Im| / max |value| of the nodal values (0 for the zero field)."""
        v = self.nodal_values
        m = np.abs(v).max()
        if m == 0.0:
            return 0.0
        return float(np.abs(v.imag).max() / m)

    def real_part(self) -> "SpectralField":
        return SpectralField(self.grid, self.nodal_values.real + 0.0j, NODAL)


def _align(a: SpectralField, b: SpectralField) -> tuple[SpectralField, SpectralField]:
    if a.grid != b.grid:
        raise ValueError("fields live on different grids")
    if a.representation != b.representation:
        b = b.to_spectral() if a.representation == SPECTRAL else b.to_nodal()
    return a, b


def from_nodal(grid: TorusGrid, values: np.ndarray) -> SpectralField:
    return SpectralField(grid, np.asarray(values, dtype=complex), NODAL)


def from_spectral(grid: TorusGrid, values: np.ndarray) -> SpectralField:
    return SpectralField(grid, np.asarray(values, dtype=complex), SPECTRAL)


def zero_field(grid: TorusGrid) -> SpectralField:
    return SpectralField(grid, np.zeros(grid.shape, dtype=complex), NODAL)


# ---------------------------------------------------------------------------
# Fourier multiplier calculus
# ---------------------------------------------------------------------------


def _symbol_array(grid: TorusGrid, symbol) -> np.ndarray:
    """Evaluate ``symbol`` (array or callable of the grid) on all wavevectors."""
    s = symbol(grid) if callable(symbol) else symbol
    s = np.asarray(s)
    if s.shape != grid.shape:
        s = np.broadcast_to(s, grid.shape)
    if not np.all(np.isfinite(s)):
        bad = int(np.flatnonzero(~np.isfinite(s).ravel())[0])
        raise SingularSymbolError(
            f"singular symbol at k = {grid.wavevector_at(bad)}"
        )
    return s


def apply_multiplier(field: SpectralField, symbol) -> SpectralField:
    """Apply a Fourier multiplier: spectral coefficients times symbol(k).

    Parameters
    ----------
    field : SpectralField
        Input field; its representation (nodal or spectral) is preserved.
    symbol : ndarray or callable
        Either an array of symbol values on every grid wavevector, or a
        callable receiving the grid and returning such an array.

    Raises
    ------
    SingularSymbolError
        If the symbol is non-finite at some wavevector; the message names
        the offending k.
    """
    s = _symbol_array(field.grid, symbol)
    spec = field.to_spectral()
    out = SpectralField(field.grid, spec.values * s, SPECTRAL)
    if field.representation == NODAL:
        out = out.to_nodal()
    return out


def laplacian_symbol(grid: TorusGrid) -> np.ndarray:
    return grid.k2


def helmholtz_inverse_symbol(grid: TorusGrid, c: float) -> np.ndarray:
    """Symbol of (-Laplacian + c)^{-1}; requires c > 0."""
    return 1.0 / (grid.k2 + c)


def masked_inverse_laplacian_symbol(grid: TorusGrid) -> np.ndarray:
    """Symbol of (-Laplacian)^{-1} with the zero mode masked to 0.

    Fields fed to this symbol are mean-zero by construction, so the masked
    mode carries no data; the masking is what the name reports.
    """
    k2 = grid.k2.copy()
    k2.flat[0] = 1.0
    s = 1.0 / k2
    s.flat[0] = 0.0
    return s


def gradient(field: SpectralField) -> tuple[SpectralField, ...]:
    """Exact spectral gradient, one field per coordinate."""
    spec = field.to_spectral()
    comps = []
    for ki in field.grid.k:
        comp = SpectralField(field.grid, spec.values * (1j * ki), SPECTRAL)
        comps.append(comp.to_nodal() if field.representation == NODAL else comp)
    return tuple(comps)


# ---------------------------------------------------------------------------
# Discrete Sobolev norms
# ---------------------------------------------------------------------------

L2 = "L2"
H1 = "H1"
HMINUS1 = "Hminus1"


def norm(field: SpectralField, kind: str = L2) -> float:
    """Discrete Sobolev norm of a field.

    ``L2`` is (h^d * sum |u|^2)^{1/2}; ``H1`` adds the |k|^2-weighted spectral
    gradient energy; ``Hminus1`` applies the multiplier (1+|k|^2)^{-1/2}.
    """
    grid = field.grid
    if kind == L2 and field.representation == NODAL:
        return float(np.sqrt(grid.cell_volume * np.vdot(field.values, field.values).real))
    spec = field.to_spectral().values
    p = np.abs(spec) ** 2
    if kind == L2:
        w = 1.0
    elif kind == H1:
        w = 1.0 + grid.k2
    elif kind == HMINUS1:
        w = 1.0 / (1.0 + grid.k2)
    else:
        raise ValueError(f"unknown norm kind {kind!r}")
    return float(np.sqrt(grid.cell_volume / grid.total_points * np.sum(w * p)))


def vector_norm(fields, kind: str = L2) -> float:
    """l2 combination of componentwise norms, e.g. for gradients."""
    return float(np.sqrt(sum(norm(c, kind) ** 2 for c in fields)))


# ---------------------------------------------------------------------------
# Scaling of the potential argument
# ---------------------------------------------------------------------------


def rescale_argument(field: SpectralField, eps: float) -> SpectralField:
    """Return the large-potential field V_eps = eps^{-1} * V(./eps).

    The input must already be a realization of V(./eps) on the physical grid
    (synthesis rescales the spectrum; see :mod:`hlab.fields`), so only the
    exact eps^{-1} amplitude scaling happens here.  The grid must resolve the
    correlation length: eps * n / length >= 8.
    """
    field.grid.check_resolution(eps)
    return SpectralField(field.grid, field.values / eps, field.representation)
