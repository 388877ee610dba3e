"""Littlewood-Paley decomposition and Besov-type norms on the grid.

The radial low-pass profile chi is 1 on |xi| <= 3/4, 0 on |xi| >= 4/3 and
descends smoothly in between; the shell profile is

    phi(xi) = chi(xi/2) - chi(xi),

supported on the annulus 3/4 <= |xi| <= 8/3.  Because phi is an exact
difference of two evaluations of the same chi, the dyadic partition of
unity sum_j phi(2^-j r) telescopes to one in floating point, independent
of how accurately the descent profile was tabulated.

The descent is built by integrating the compactly supported bump
exp(-sharpness/(1-x^2)) on (-1, 1) and interpolating the normalised
cumulative integral with a monotone cubic (PCHIP), which preserves the
0 <= chi <= 1 and monotonicity constraints exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import cumulative_trapezoid
from scipy.interpolate import PchipInterpolator

from .grid import PeriodicGrid

#: inner/outer edges of the chi descent, fixed by the decomposition.
CHI_FLAT = 0.75
CHI_ZERO = 4.0 / 3.0


@dataclass(frozen=True)
class DyadicCutoffs:
    """Tabulated smooth radial cutoff pair (chi, phi)."""

    sharpness: float
    samples: int
    _step: PchipInterpolator = field(repr=False)
    # raw tabulation of the descent, kept for export/inspection
    table_r: np.ndarray = field(repr=False)
    table_chi: np.ndarray = field(repr=False)

    def chi(self, r) -> np.ndarray:
        """Low-pass profile; accepts scalars or arrays of radii >= 0."""
        r = np.asarray(r, dtype=float)
        out = np.ones_like(r)
        out[r >= CHI_ZERO] = 0.0
        mid = (r > CHI_FLAT) & (r < CHI_ZERO)
        if np.any(mid):
            x = 2.0 * (r[mid] - CHI_FLAT) / (CHI_ZERO - CHI_FLAT) - 1.0
            out[mid] = 1.0 - self._step(x)
        return out

    def phi(self, r) -> np.ndarray:
        """Shell profile chi(r/2) - chi(r), supported on [3/4, 8/3]."""
        r = np.asarray(r, dtype=float)
        return self.chi(r / 2.0) - self.chi(r)

    def export_table(self, path) -> None:
        """Write the chi descent tabulation as a two-column text table."""
        data = np.column_stack([self.table_r, self.table_chi])
        np.savetxt(path, data, header="radius chi", comments="# ")


def build_cutoffs(sharpness: float = 1.0, samples: int = 4097) -> DyadicCutoffs:
    """Construct the cutoff pair from the integrated-bump smooth step.

    Raises ValueError if the constructed chi violates its support or
    monotonicity constraints beyond 1e-10 (it cannot, short of a broken
    interpolation, but the contract is checked rather than assumed).
    """
    if sharpness <= 0:
        raise ValueError("sharpness must be positive")
    if samples < 33:
        raise ValueError("samples too few to tabulate the descent")
    x = np.linspace(-1.0, 1.0, samples)
    with np.errstate(divide="ignore", over="ignore", under="ignore"):
        bump = np.exp(-sharpness / (1.0 - x**2))
    bump[0] = bump[-1] = 0.0
    cum = cumulative_trapezoid(bump, x, initial=0.0)
    cum /= cum[-1]
    step = PchipInterpolator(x, cum, extrapolate=False)

    r_tab = CHI_FLAT + (CHI_ZERO - CHI_FLAT) * (x + 1.0) / 2.0
    cuts = DyadicCutoffs(
        sharpness=sharpness,
        samples=samples,
        _step=step,
        table_r=r_tab,
        table_chi=1.0 - cum,
    )

    # contract checks
    rr = np.linspace(0.0, 3.0, 2001)
    c = cuts.chi(rr)
    if np.any(c[rr <= CHI_FLAT] < 1.0 - 1e-10) or np.any(np.abs(c[rr >= CHI_ZERO]) > 1e-10):
        raise ValueError("chi violates its support constraints")
    if np.any(np.diff(c) > 1e-10) or np.any(c < -1e-10) or np.any(c > 1.0 + 1e-10):
        raise ValueError("chi violates monotonicity or range constraints")
    return cuts


@dataclass(frozen=True)
class FrequencySplit:
    """Threshold separating the low and high frequency regimes.

    Low-frequency sums run over shells j <= j0, high-frequency sums over
    j >= j0 - 1; the two deliberately overlap on {j0 - 1, j0}.
    """

    j0: int = 0

    def low_shells(self, shells: range) -> list[int]:
        return [j for j in shells if j <= self.j0]

    def high_shells(self, shells: range) -> list[int]:
        return [j for j in shells if j >= self.j0 - 1]


class LittlewoodPaley:
    """Dyadic shell calculus bound to one grid.

    Parameters
    ----------
    grid : the periodic grid carrying the fields.
    cutoffs : optional prebuilt :class:`DyadicCutoffs`.
    split : optional :class:`FrequencySplit`; defaults to threshold 0.
    """

    def __init__(
        self,
        grid: PeriodicGrid,
        cutoffs: DyadicCutoffs | None = None,
        split: FrequencySplit | None = None,
    ):
        self.grid = grid
        self.cutoffs = cutoffs if cutoffs is not None else build_cutoffs()
        self.split = split if split is not None else FrequencySplit()
        self._phi_cache: dict[int, np.ndarray] = {}
        self._chi_cache: dict[int, np.ndarray] = {}

        # shells whose annulus is fully resolved by the dealiased grid
        self.j_min = math.ceil(math.log2(2.0 * np.pi / grid.length)) - 1
        self.j_max = math.floor(math.log2(np.pi * grid.npts / (3.0 * grid.length)))
        if self.j_max < self.j_min:
            raise ValueError("grid resolves no complete dyadic shell")

    @property
    def shells(self) -> range:
        """Resolvable shell indices (inclusive of both ends)."""
        return range(self.j_min, self.j_max + 1)

    @property
    def covered_band(self) -> tuple[float, float]:
        """Wavenumbers where the shells tile unity exactly.

        The telescoping identity sum_j phi(2^-j k) = 1 holds for
        (4/3) 2^j_min <= |k| <= (3/4) 2^(j_max+1); outside, part of the
        partition falls below j_min or above j_max and the block sum
        undershoots the field.
        """
        return (4.0 / 3.0) * 2.0**self.j_min, 0.75 * 2.0 ** (self.j_max + 1)

    # ------------------------------------------------------------------
    def shell_multiplier(self, j: int) -> np.ndarray:
        mult = self._phi_cache.get(j)
        if mult is None:
            mult = self.cutoffs.phi(self.grid.kmag * 2.0 ** (-j))
            mult.flat[0] = 0.0  # zero mode never belongs to a shell
            self._phi_cache[j] = mult
        return mult

    def low_multiplier(self, j: int) -> np.ndarray:
        mult = self._chi_cache.get(j)
        if mult is None:
            mult = self.cutoffs.chi(self.grid.kmag * 2.0 ** (-j))
            self._chi_cache[j] = mult
        return mult

    def block_hat(self, fhat: np.ndarray, j: int) -> np.ndarray:
        """Spectral coefficients of the dyadic block at shell j."""
        return fhat * self.shell_multiplier(j)

    def block(self, f: np.ndarray, j: int) -> np.ndarray:
        """Physical-space dyadic block of a real field."""
        return self.grid.inverse(self.block_hat(self.grid.forward(f), j))

    def low_block(self, f: np.ndarray, j: int) -> np.ndarray:
        """Low-pass part at cutoff scale 2^j (zero mode retained)."""
        return self.grid.inverse(self.grid.forward(f) * self.low_multiplier(j))

    # ------------------------------------------------------------------
    def shell_l2_hat(self, fhat: np.ndarray, j: int) -> float:
        """L^2 norm of the shell-j block, evaluated by Parseval."""
        return self.grid.l2_norm_hat(self.block_hat(fhat, j))

    def shell_lp_hat(self, fhat: np.ndarray, j: int, p: float) -> float:
        if p == 2:
            return self.shell_l2_hat(fhat, j)
        return self.grid.lp_norm(self.grid.inverse(self.block_hat(fhat, j)), p)

    def shell_norms(self, f: np.ndarray, p: float = 2) -> dict[int, float]:
        """Shell L^p norms over the resolvable range."""
        fhat = self.grid.forward(np.asarray(f, dtype=float))
        return {j: self.shell_lp_hat(fhat, j, p) for j in self.shells}

    def vector_shell_norms(self, fields: list[np.ndarray], p: float = 2) -> dict[int, float]:
        """Shell norms of a multi-component field, ell^2 across components."""
        per = [self.shell_norms(c, p) for c in fields]
        return {j: float(np.sqrt(sum(s[j] ** 2 for s in per))) for j in self.shells}

    # ------------------------------------------------------------------
    def _select(self, regime: str) -> list[int]:
        if regime == "all":
            return list(self.shells)
        if regime == "low":
            return self.split.low_shells(self.shells)
        if regime == "high":
            return self.split.high_shells(self.shells)
        raise ValueError(f"regime must be 'all', 'low' or 'high', got {regime!r}")

    @staticmethod
    def _accumulate(weighted: list[float], r: float) -> float:
        if not weighted:
            return 0.0
        if r == np.inf:
            return max(weighted)
        return float(np.sum(np.asarray(weighted) ** r) ** (1.0 / r))

    def besov_norm(
        self,
        f: np.ndarray,
        s: float,
        p: float = 2,
        r: float = 1,
        regime: str = "all",
    ) -> float:
        """Homogeneous Besov norm, truncated to the resolvable shells."""
        fhat = self.grid.forward(np.asarray(f, dtype=float))
        vals = [2.0 ** (j * s) * self.shell_lp_hat(fhat, j, p) for j in self._select(regime)]
        return self._accumulate(vals, r)

    def besov_norm_from_shells(
        self, shell: dict[int, float], s: float, r: float = 1, regime: str = "all"
    ) -> float:
        vals = [2.0 ** (j * s) * shell[j] for j in self._select(regime) if j in shell]
        return self._accumulate(vals, r)

    def hybrid_norm(self, f: np.ndarray, s: float, t_exp: float, j0: int | None = None) -> float:
        """Two-exponent norm: weight 2^{js} below the threshold, 2^{jt} above."""
        if j0 is None:
            j0 = self.split.j0
        fhat = self.grid.forward(np.asarray(f, dtype=float))
        total = 0.0
        for j in self.shells:
            w = s if j <= j0 else t_exp
            total += 2.0 ** (j * w) * self.shell_lp_hat(fhat, j, 2)
        return total

    # ------------------------------------------------------------------
    def chemin_lerner_norm(
        self,
        times: np.ndarray,
        shell_series: dict[int, np.ndarray],
        rho: float,
        s: float,
        r: float = 1,
        regime: str = "all",
        weight: np.ndarray | None = None,
    ) -> float:
        """Time-integrated shell norm: L^rho in time inside, ell^r outside.

        ``shell_series[j]`` holds the shell-j spatial norm sampled at
        ``times``; the optional ``weight`` multiplies the integrand
        pointwise in time (used for the (1+t)^M weighted functionals).
        Time integrals use the trapezoid rule, suprema the sample max.
        """
        times = np.asarray(times, dtype=float)
        vals = []
        for j in self._select(regime):
            if j not in shell_series:
                continue
            g = np.asarray(shell_series[j], dtype=float)
            if weight is not None:
                g = g * weight
            if rho == np.inf:
                tnorm = float(np.max(g))
            else:
                tnorm = float(np.trapezoid(g**rho, times) ** (1.0 / rho))
            vals.append(2.0 ** (j * s) * tnorm)
        return self._accumulate(vals, r)
