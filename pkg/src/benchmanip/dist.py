"""Price distributions: grid densities, atom lists and symmetric parametric families.

Every distribution is immutable. Module-level functions (``cdf``, ``quantile``,
``is_symmetric``, ``to_grid``, ...) dispatch on the concrete type so callers can
treat all three representations uniformly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Union

import numpy as np
from scipy.special import ndtr, ndtri

MASS_TOL = 1e-12
DEFAULT_GRID_N = 10_001
DEFAULT_ATOMS_N = 2_000
PROBE_POINTS = 1_024

# cumulative masses of equal-mass atoms drift by ~n*eps from i/n
_CUM_EPS = 1e-11


def _frozen_array(values, dtype=float) -> np.ndarray:
    arr = np.array(values, dtype=dtype, copy=True)
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True, eq=False)
class GridDist:
    """Piecewise-constant density on ``n`` equal cells of ``[lo, hi]``.

    The CDF is piecewise linear inside each cell, so quantiles are continuous.
    """

    lo: float
    hi: float
    density: np.ndarray

    def __post_init__(self):
        dens = _frozen_array(self.density)
        object.__setattr__(self, "density", dens)
        if dens.ndim != 1 or dens.size < 2:
            raise ValueError("grid needs at least 2 cells")
        if not self.hi > self.lo:
            raise ValueError(f"hi ({self.hi}) must exceed lo ({self.lo})")
        if np.any(dens < 0) or not np.all(np.isfinite(dens)):
            raise ValueError("densities must be finite and non-negative")
        total = math.fsum(dens) * self.dx
        if abs(total - 1.0) > MASS_TOL:
            raise ValueError(f"grid mass is {total!r}, expected 1")

    @classmethod
    def from_weights(cls, lo: float, hi: float, weights) -> "GridDist":
        """Build a grid from unnormalized non-negative cell weights."""
        w = np.asarray(weights, dtype=float)
        dx = (hi - lo) / w.size
        total = math.fsum(w) * dx
        if total <= 0:
            raise ValueError("weights carry no mass")
        return cls(lo, hi, w / total)

    @property
    def n(self) -> int:
        return self.density.size

    @property
    def dx(self) -> float:
        return (self.hi - self.lo) / self.density.size

    @property
    def edges(self) -> np.ndarray:
        return self.lo + self.dx * np.arange(self.n + 1)

    @property
    def midpoints(self) -> np.ndarray:
        return self.lo + self.dx * (np.arange(self.n) + 0.5)

    @property
    def cell_mass(self) -> np.ndarray:
        return self.density * self.dx

    @property
    def cumulative(self) -> np.ndarray:
        return np.concatenate(([0.0], np.cumsum(self.cell_mass)))

    def pdf(self, x):
        x = np.asarray(x, dtype=float)
        idx = np.floor((x - self.lo) / self.dx).astype(int)
        inside = (x >= self.lo) & (x <= self.hi)
        idx = np.clip(idx, 0, self.n - 1)
        return np.where(inside, self.density[idx], 0.0)

    def cdf(self, x):
        return np.interp(x, self.edges, self.cumulative, left=0.0, right=1.0)

    def quantile(self, q: float, side: str = "left") -> float:
        cum = self.cumulative
        edges = self.edges
        j = int(np.searchsorted(cum, q, side=side))
        if j == 0:
            return float(self.lo)
        if j > self.n:
            return float(self.hi)
        c0, c1 = cum[j - 1], cum[j]
        frac = 0.0 if c1 <= c0 else (q - c0) / (c1 - c0)
        return float(edges[j - 1] + min(max(frac, 0.0), 1.0) * self.dx)

    def mean(self) -> float:
        return float(np.dot(self.midpoints, self.cell_mass))

    def support(self) -> tuple[float, float]:
        nz = np.flatnonzero(self.density > 0)
        edges = self.edges
        return float(edges[nz[0]]), float(edges[nz[-1] + 1])

    def shifted(self, s: float) -> "GridDist":
        return GridDist(self.lo + s, self.hi + s, self.density)


@dataclass(frozen=True, eq=False)
class AtomDist:
    """Finitely many point masses, kept sorted by position (ties allowed)."""

    positions: np.ndarray
    masses: np.ndarray

    def __post_init__(self):
        pos = np.asarray(self.positions, dtype=float).ravel()
        mass = np.asarray(self.masses, dtype=float).ravel()
        if pos.shape != mass.shape or pos.size == 0:
            raise ValueError("positions and masses must be equal-length, non-empty")
        if np.any(mass <= 0) or not np.all(np.isfinite(pos)):
            raise ValueError("atom masses must be positive and positions finite")
        total = math.fsum(mass)
        if abs(total - 1.0) > MASS_TOL:
            raise ValueError(f"atom mass is {total!r}, expected 1")
        order = np.argsort(pos, kind="stable")
        object.__setattr__(self, "positions", _frozen_array(pos[order]))
        object.__setattr__(self, "masses", _frozen_array(mass[order]))

    @classmethod
    def from_pairs(cls, pairs) -> "AtomDist":
        pos, mass = zip(*pairs)
        return cls(np.array(pos), np.array(mass))

    @classmethod
    def equal_mass(cls, positions) -> "AtomDist":
        pos = np.asarray(positions, dtype=float)
        return cls(pos, np.full(pos.size, 1.0 / pos.size))

    def normalized(self) -> "AtomDist":
        """Merge atoms sharing a position so positions become strictly increasing."""
        pos, inverse = np.unique(self.positions, return_inverse=True)
        mass = np.zeros(pos.size)
        np.add.at(mass, inverse, self.masses)
        return AtomDist(pos, mass)

    @property
    def cumulative(self) -> np.ndarray:
        return np.cumsum(self.masses)

    def cdf(self, x):
        cum = np.concatenate(([0.0], self.cumulative))
        return cum[np.searchsorted(self.positions, x, side="right")]

    def quantile(self, q: float, side: str = "left") -> float:
        cum = self.cumulative
        if side == "left":
            i = int(np.searchsorted(cum, q - _CUM_EPS, side="left"))
        else:
            i = int(np.searchsorted(cum, q + _CUM_EPS, side="right"))
        return float(self.positions[min(i, cum.size - 1)])

    def mean(self) -> float:
        return float(np.dot(self.positions, self.masses))

    def support(self) -> tuple[float, float]:
        return float(self.positions[0]), float(self.positions[-1])

    def shifted(self, s: float) -> "AtomDist":
        return AtomDist(self.positions + s, self.masses)


class ParametricDist:
    """Base for the closed-form symmetric families."""

    center: float
    strictly_single_peaked: bool = True

    def support(self) -> tuple[float, float]:
        raise NotImplementedError

    def pdf(self, x):
        raise NotImplementedError

    def cdf(self, x):
        raise NotImplementedError

    def quantile(self, q: float, side: str = "left") -> float:
        raise NotImplementedError

    def mean(self) -> float:
        return float(self.center)


@dataclass(frozen=True)
class Degenerate(ParametricDist):
    p: float = 0.0
    strictly_single_peaked: bool = field(default=False, init=False, repr=False)

    @property
    def center(self) -> float:
        return self.p

    def support(self):
        return (self.p, self.p)

    def pdf(self, x):
        raise ValueError("a degenerate distribution has no density")

    def cdf(self, x):
        return np.where(np.asarray(x, dtype=float) >= self.p, 1.0, 0.0)

    def quantile(self, q, side="left"):
        return float(self.p)

    def shifted(self, s):
        return Degenerate(self.p + s)


@dataclass(frozen=True)
class Uniform(ParametricDist):
    a: float = -1.0
    b: float = 1.0
    # flat density: f(y) == f(y - 2P) on part of the support
    strictly_single_peaked: bool = field(default=False, init=False, repr=False)

    def __post_init__(self):
        if not self.b > self.a:
            raise ValueError("Uniform needs b > a")

    @property
    def center(self) -> float:
        return 0.5 * (self.a + self.b)

    def support(self):
        return (self.a, self.b)

    def pdf(self, x):
        x = np.asarray(x, dtype=float)
        return np.where((x >= self.a) & (x <= self.b), 1.0 / (self.b - self.a), 0.0)

    def cdf(self, x):
        return np.clip((np.asarray(x, dtype=float) - self.a) / (self.b - self.a), 0.0, 1.0)

    def quantile(self, q, side="left"):
        return float(self.a + q * (self.b - self.a))

    def shifted(self, s):
        return Uniform(self.a + s, self.b + s)


@dataclass(frozen=True)
class Triangular(ParametricDist):
    center: float = 0.0
    halfwidth: float = 1.0

    def __post_init__(self):
        if not self.halfwidth > 0:
            raise ValueError("Triangular needs a positive halfwidth")

    def support(self):
        return (self.center - self.halfwidth, self.center + self.halfwidth)

    def pdf(self, x):
        u = np.abs(np.asarray(x, dtype=float) - self.center) / self.halfwidth
        return np.clip(1.0 - u, 0.0, None) / self.halfwidth

    def cdf(self, x):
        u = np.clip((np.asarray(x, dtype=float) - self.center) / self.halfwidth, -1.0, 1.0)
        return np.where(u <= 0, 0.5 * (1 + u) ** 2, 1.0 - 0.5 * (1 - u) ** 2)

    def quantile(self, q, side="left"):
        h = self.halfwidth
        if q <= 0.5:
            return float(self.center - h + h * math.sqrt(2.0 * q))
        return float(self.center + h - h * math.sqrt(2.0 * (1.0 - q)))

    def shifted(self, s):
        return Triangular(self.center + s, self.halfwidth)


@dataclass(frozen=True)
class TruncatedGaussian(ParametricDist):
    sigma: float = 1.0
    halfwidth: float = 3.0
    center: float = 0.0

    def __post_init__(self):
        if not (self.sigma > 0 and self.halfwidth > 0):
            raise ValueError("TruncatedGaussian needs positive sigma and halfwidth")

    @property
    def _z(self) -> float:
        a = self.halfwidth / self.sigma
        return float(ndtr(a) - ndtr(-a))

    def support(self):
        return (self.center - self.halfwidth, self.center + self.halfwidth)

    def pdf(self, x):
        t = (np.asarray(x, dtype=float) - self.center) / self.sigma
        dens = np.exp(-0.5 * t * t) / (math.sqrt(2 * math.pi) * self.sigma * self._z)
        return np.where(np.abs(t) <= self.halfwidth / self.sigma, dens, 0.0)

    def cdf(self, x):
        a = self.halfwidth / self.sigma
        t = np.clip((np.asarray(x, dtype=float) - self.center) / self.sigma, -a, a)
        return np.clip((ndtr(t) - ndtr(-a)) / self._z, 0.0, 1.0)

    def quantile(self, q, side="left"):
        a = self.halfwidth / self.sigma
        t = float(ndtri(ndtr(-a) + q * self._z))
        return float(self.center + self.sigma * min(max(t, -a), a))

    def shifted(self, s):
        return TruncatedGaussian(self.sigma, self.halfwidth, self.center + s)


Distribution = Union[GridDist, AtomDist, ParametricDist]


def is_atomic(dist: Distribution) -> bool:
    return isinstance(dist, (AtomDist, Degenerate))


def cdf(dist: Distribution, x):
    """Right-continuous CDF; vectorized over ``x``."""
    out = dist.cdf(x)
    return float(out) if np.ndim(out) == 0 else out


def pdf(dist: Distribution, x):
    if is_atomic(dist):
        raise ValueError("atomic distributions have no density")
    out = dist.pdf(x)
    return float(out) if np.ndim(out) == 0 else out


def quantile(dist: Distribution, q: float, side: str = "left") -> float:
    """Generalized inverse ``inf{x : cdf(x) >= q}``.

    ``side="right"`` gives the upper inverse ``inf{x : cdf(x) > q}``; the two
    differ only on flat stretches of the CDF.
    """
    if not 0.0 <= q <= 1.0:
        raise ValueError(f"quantile level {q!r} outside [0, 1]")
    if side not in ("left", "right"):
        raise ValueError(f"unknown side {side!r}")
    return dist.quantile(q, side)


def mean(dist: Distribution) -> float:
    return dist.mean()


def support(dist: Distribution) -> tuple[float, float]:
    return dist.support()


def shift(dist: Distribution, s: float) -> Distribution:
    return dist.shifted(s)


def strictly_single_peaked(dist: Distribution) -> bool:
    """Whether the density strictly rises to a single peak then strictly falls."""
    if isinstance(dist, ParametricDist):
        return dist.strictly_single_peaked
    if isinstance(dist, AtomDist):
        return False
    inside = dist.density[dist.density > 0]
    signs = np.sign(np.diff(inside))
    flat = np.flatnonzero(signs == 0)
    # an even cell count may leave two equal cells at the very top
    if flat.size > 1 or (flat.size == 1 and inside[flat[0]] != inside.max()):
        return False
    return bool(np.all(np.diff(signs[signs != 0]) <= 0))


def probe_offsets(halfwidth: float, count: int = PROBE_POINTS) -> np.ndarray:
    """Cell-centred offsets in (0, halfwidth); never lands on a support edge."""
    return (np.arange(count) + 0.5) / count * halfwidth


def symmetric_density(density_fn, center: float, halfwidth: float, tol: float) -> bool:
    x = probe_offsets(halfwidth)
    gap = np.abs(density_fn(center - x) - density_fn(center + x))
    return bool(np.max(gap) <= tol)


def symmetric_atoms(atoms: AtomDist, center: float, tol: float) -> bool:
    a = atoms.normalized()
    mirrored = (2.0 * center - a.positions)[::-1]
    mirrored_mass = a.masses[::-1]
    return bool(
        np.max(np.abs(mirrored - a.positions)) <= tol
        and np.max(np.abs(mirrored_mass - a.masses)) <= tol
    )


def is_symmetric(dist: Distribution, center: float, tol: float = 1e-9) -> bool:
    """Mirror test about ``center`` (densities on probe points, or atom matching)."""
    if isinstance(dist, Degenerate):
        return abs(dist.p - center) <= tol
    if isinstance(dist, AtomDist):
        return symmetric_atoms(dist, center, tol)
    lo, hi = dist.support()
    return symmetric_density(dist.pdf, center, max(center - lo, hi - center), tol)


def to_atoms(dist: Distribution, n: int = DEFAULT_ATOMS_N) -> AtomDist:
    """Equal-mass atomization: atom ``i`` sits at the ``(i - 1/2)/n`` quantile."""
    if n < 2:
        raise ValueError("need at least 2 atoms")
    levels = (np.arange(1, n + 1) - 0.5) / n
    if isinstance(dist, Triangular):
        # vectorized closed form
        h, c = dist.halfwidth, dist.center
        lower = c - h + h * np.sqrt(2.0 * levels)
        upper = c + h - h * np.sqrt(2.0 * (1.0 - levels))
        pos = np.where(levels <= 0.5, lower, upper)
    else:
        pos = np.array([dist.quantile(q, "left") for q in levels])
    return AtomDist.equal_mass(pos)


def to_grid(
    dist: Distribution,
    n: int = DEFAULT_GRID_N,
    lo: float | None = None,
    hi: float | None = None,
    method: str = "sample",
) -> GridDist:
    """Discretize a density onto ``n`` cells.

    ``method="sample"`` evaluates the density at cell midpoints and renormalizes;
    ``method="average"`` uses exact CDF differences per cell, so cell masses
    telescope to the CDF without renormalization error.
    """
    if n < 2:
        raise ValueError("need at least 2 cells")
    if is_atomic(dist):
        raise ValueError("cannot put an atomic distribution on a grid; use to_atoms")
    s_lo, s_hi = dist.support()
    lo = s_lo if lo is None else lo
    hi = s_hi if hi is None else hi
    dx = (hi - lo) / n
    if method == "sample":
        mids = lo + dx * (np.arange(n) + 0.5)
        return GridDist.from_weights(lo, hi, dist.pdf(mids))
    if method == "average":
        edges = lo + dx * np.arange(n + 1)
        mass = np.diff(dist.cdf(edges))
        return GridDist.from_weights(lo, hi, np.clip(mass, 0.0, None) / dx)
    raise ValueError(f"unknown discretization method {method!r}")
