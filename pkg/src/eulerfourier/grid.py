"""Periodic pseudo-spectral grid: transforms, derivatives, dealiasing.

All fields live on a uniform periodic grid of N**d points covering
[0, L)**d.  The forward transform is normalised so that the zero mode
equals the spatial mean of the field; with that convention Parseval reads

    ||f||_{L^2}^2 = L**d * sum_k |fhat_k|^2,

which is how every L^2-type norm in this package is evaluated.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class PeriodicGrid:
    """Uniform periodic grid with cached wavenumber arrays.

    Parameters
    ----------
    dim : spatial dimension, 1, 2 or 3.
    npts : points per direction; a power of two, at least 8.
    length : box side length L.
    """

    dim: int
    npts: int
    length: float

    # caches filled in __post_init__
    wavenumbers: tuple[np.ndarray, ...] = field(init=False, repr=False)
    kmag: np.ndarray = field(init=False, repr=False)
    dealias_mask: np.ndarray = field(init=False, repr=False)

    def __post_init__(self) -> None:
        if self.dim not in (1, 2, 3):
            raise ValueError(f"dim must be 1, 2 or 3, got {self.dim}")
        n = self.npts
        if n < 8 or (n & (n - 1)) != 0:
            raise ValueError(f"npts must be a power of two >= 8, got {n}")
        if not self.length > 0:
            raise ValueError("length must be positive")

        # integer frequencies scaled to physical wavenumbers 2*pi*m/L
        k1 = 2.0 * np.pi * np.fft.fftfreq(n, d=1.0 / n) / self.length
        axes = np.meshgrid(*([k1] * self.dim), indexing="ij", sparse=True)
        object.__setattr__(self, "wavenumbers", tuple(axes))
        kmag = np.sqrt(sum(a**2 for a in axes))
        object.__setattr__(self, "kmag", kmag)

        # two-thirds rule: drop any mode with an integer frequency above N/3.
        # N is a power of two so N/3 is never an integer and quadratic
        # products of retained modes alias strictly outside the retained band.
        mcut = n / 3.0
        m1 = np.abs(np.fft.fftfreq(n, d=1.0 / n))
        maxes = np.meshgrid(*([m1] * self.dim), indexing="ij", sparse=True)
        mask = np.ones((n,) * self.dim, dtype=bool)
        for m in maxes:
            mask &= m <= mcut
        object.__setattr__(self, "dealias_mask", mask)

    # ------------------------------------------------------------------
    @property
    def shape(self) -> tuple[int, ...]:
        return (self.npts,) * self.dim

    @property
    def spacing(self) -> float:
        return self.length / self.npts

    @property
    def cell_volume(self) -> float:
        return self.spacing**self.dim

    @property
    def kmax_dealiased(self) -> float:
        """Largest wavenumber magnitude kept per axis by the 2/3 rule."""
        return 2.0 * np.pi * np.floor(self.npts / 3.0) / self.length

    def coordinates(self) -> tuple[np.ndarray, ...]:
        x1 = np.arange(self.npts) * self.spacing
        return tuple(np.meshgrid(*([x1] * self.dim), indexing="ij", sparse=True))

    # ------------------------------------------------------------------
    def forward(self, f: np.ndarray) -> np.ndarray:
        """FFT normalised so the zero mode is the mean of ``f``."""
        if f.shape != self.shape:
            raise ValueError(f"field shape {f.shape} != grid shape {self.shape}")
        return np.fft.fftn(f) / self.npts**self.dim

    def inverse(self, fhat: np.ndarray) -> np.ndarray:
        """Inverse of :meth:`forward`; returns the real part."""
        if fhat.shape != self.shape:
            raise ValueError(f"field shape {fhat.shape} != grid shape {self.shape}")
        return np.real(np.fft.ifftn(fhat) * self.npts**self.dim)

    def derivative(self, f: np.ndarray, axis: int, order: int = 1) -> np.ndarray:
        """Spectral derivative d^order/dx_axis^order of a real field."""
        if not 0 <= axis < self.dim:
            raise ValueError(f"axis {axis} out of range for dim {self.dim}")
        if order < 1:
            raise ValueError("order must be >= 1")
        fhat = self.forward(f)
        return self.inverse(fhat * (1j * self.wavenumbers[axis]) ** order)

    def derivative_hat(self, fhat: np.ndarray, axis: int, order: int = 1) -> np.ndarray:
        return fhat * (1j * self.wavenumbers[axis]) ** order

    def gradient(self, f: np.ndarray) -> list[np.ndarray]:
        fhat = self.forward(f)
        return [self.inverse(1j * self.wavenumbers[m] * fhat) for m in range(self.dim)]

    def divergence(self, vec: np.ndarray) -> np.ndarray:
        """Divergence of a (dim, N, ..., N) vector field."""
        out = np.zeros(self.shape)
        for m in range(self.dim):
            out += self.inverse(1j * self.wavenumbers[m] * self.forward(vec[m]))
        return out

    def laplacian(self, f: np.ndarray) -> np.ndarray:
        return self.inverse(-(self.kmag**2) * self.forward(f))

    def dealias(self, fhat: np.ndarray) -> np.ndarray:
        """Zero every mode with any axis frequency above N/3."""
        return np.where(self.dealias_mask, fhat, 0.0)

    # ------------------------------------------------------------------
    def l2_norm(self, f: np.ndarray) -> float:
        """Grid L^2 norm, i.e. sqrt of the quadrature of |f|^2."""
        return float(np.sqrt(np.sum(np.abs(f) ** 2) * self.cell_volume))

    def lp_norm(self, f: np.ndarray, p: float) -> float:
        if p == np.inf:
            return float(np.max(np.abs(f)))
        return float((np.sum(np.abs(f) ** p) * self.cell_volume) ** (1.0 / p))

    def l2_norm_hat(self, fhat: np.ndarray) -> float:
        """L^2 norm computed from spectral coefficients (Parseval)."""
        return float(np.sqrt(np.sum(np.abs(fhat) ** 2)) * self.length ** (self.dim / 2.0))

    def mean(self, f: np.ndarray) -> float:
        return float(np.mean(f))

    # ------------------------------------------------------------------
    def refine(self, factor: int = 2) -> "PeriodicGrid":
        """Grid with the same box and ``factor`` times the resolution."""
        return PeriodicGrid(self.dim, self.npts * factor, self.length)

    def pad_to(self, fhat: np.ndarray, fine: "PeriodicGrid") -> np.ndarray:
        """Zero-pad spectral coefficients onto a finer grid's layout."""
        if fine.npts < self.npts or fine.dim != self.dim:
            raise ValueError("target grid must refine this one")
        out = np.zeros(fine.shape, dtype=complex)
        idx = np.fft.fftfreq(self.npts, d=1.0 / self.npts).astype(int)
        sel = np.ix_(*([idx] * self.dim))
        out[sel] = fhat
        return out

    def restrict_from(self, fhat_fine: np.ndarray, fine: "PeriodicGrid") -> np.ndarray:
        """Keep only this grid's modes from a finer grid's coefficients."""
        idx = np.fft.fftfreq(self.npts, d=1.0 / self.npts).astype(int)
        sel = np.ix_(*([idx] * self.dim))
        return fhat_fine[sel]


def alias_free_product(
    grid: PeriodicGrid, fine: PeriodicGrid, f: np.ndarray, g: np.ndarray
) -> np.ndarray:
    """Pointwise product evaluated on ``fine`` and restricted back to ``grid``.

    Exact (no aliasing) whenever both factors are band-limited on the base
    grid, since a 2x refinement holds every sum frequency.
    """
    f_fine = fine.inverse(grid.pad_to(grid.forward(f), fine))
    g_fine = fine.inverse(grid.pad_to(grid.forward(g), fine))
    return grid.inverse(grid.restrict_from(fine.forward(f_fine * g_fine), fine))


@dataclass
class StateFields:
    """Density perturbation, velocity and temperature perturbation.

    ``a`` and ``theta`` are scalars relative to the constant equilibrium
    (unit background density and temperature); ``u`` is stacked as a
    (dim, N, ..., N) array.
    """

    a: np.ndarray
    u: np.ndarray
    theta: np.ndarray

    @classmethod
    def zeros(cls, grid: PeriodicGrid) -> "StateFields":
        return cls(
            a=np.zeros(grid.shape),
            u=np.zeros((grid.dim,) + grid.shape),
            theta=np.zeros(grid.shape),
        )

    def copy(self) -> "StateFields":
        return StateFields(self.a.copy(), self.u.copy(), self.theta.copy())

    def components(self) -> list[np.ndarray]:
        """Flat list [a, u_1, ..., u_d, theta]."""
        return [self.a, *list(self.u), self.theta]

    def __add__(self, other: "StateFields") -> "StateFields":
        return StateFields(self.a + other.a, self.u + other.u, self.theta + other.theta)

    def __sub__(self, other: "StateFields") -> "StateFields":
        return StateFields(self.a - other.a, self.u - other.u, self.theta - other.theta)

    def __mul__(self, c: float) -> "StateFields":
        return StateFields(c * self.a, c * self.u, c * self.theta)

    __rmul__ = __mul__

    def max_abs(self) -> float:
        return max(float(np.max(np.abs(c))) for c in self.components())

    def is_finite(self) -> bool:
        return all(np.all(np.isfinite(c)) for c in self.components())
