"""Density representations and trapezoid quadrature.

Three representations share one integration convention:

* :class:`DiscreteDensity` -- a pmf under the counting measure;
* :class:`GridDensity` -- values of a continuous density on a strictly
  increasing grid, integrated with the trapezoid rule;
* exponential-family members and mixtures (see :mod:`infradius.expfam`),
  which are sampled onto a grid whenever a pointwise operation needs them.

Every trapezoid integral is a weighted sum ``sum(tau * f(x))`` with fixed
quadrature weights ``tau``.  Divergences that are positively homogeneous in the
pair ``(p, q)`` can therefore be computed on the *masses* ``tau * p``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from functools import cached_property
from typing import Protocol, Sequence, runtime_checkable

import numpy as np

ZERO = 1e-300
DISCRETE_TOL = 1e-10
GRID_TOL = 1e-6
WEIGHT_TOL = 1e-12
DEFAULT_GRID_N = 2001


class IncompatibleSupports(ValueError):
    pass


class InvalidDensity(ValueError):
    pass


def _frozen(a) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


def trapezoid_weights(xs: np.ndarray) -> np.ndarray:
    """Quadrature weights ``tau`` with ``integral(f) == tau @ f(xs)``."""
    xs = np.asarray(xs, dtype=float)
    dx = np.diff(xs)
    tau = np.zeros_like(xs)
    tau[:-1] += dx / 2
    tau[1:] += dx / 2
    return tau


def integrate(values, xs=None, quadrature: str = "trapezoid") -> float:
    """Trapezoid integral of grid values; a plain sum when ``xs`` is None."""
    f = np.asarray(values, dtype=float)
    if not np.all(np.isfinite(f)):
        raise ValueError("non-finite value in integrand")
    if xs is None:
        return float(np.sum(f))
    if quadrature != "trapezoid":
        raise ValueError(f"unsupported quadrature {quadrature!r}")
    return float(np.trapezoid(f, np.asarray(xs, dtype=float)))


@runtime_checkable
class Sampleable(Protocol):
    """Anything with a pdf that can be put on a grid (EF members, mixtures)."""

    def pdf(self, xs: np.ndarray) -> np.ndarray: ...

    def grid_bounds(self) -> tuple[float, float, bool]: ...


class Density:
    """Base class for :class:`DiscreteDensity` and :class:`GridDensity`."""

    values: np.ndarray

    @property
    def quad_weights(self) -> np.ndarray:
        raise NotImplementedError

    @property
    def masses(self) -> np.ndarray:
        return self.quad_weights * self.values

    @property
    def full_support(self) -> bool:
        return bool(np.all(self.values > ZERO))


@dataclass(frozen=True, eq=False)
class DiscreteDensity(Density):
    probs: np.ndarray

    def __post_init__(self):
        p = np.array(self.probs, dtype=float)
        if p.ndim != 1 or p.size == 0:
            raise InvalidDensity("probs must be a nonempty vector")
        if not np.all(np.isfinite(p)) or np.any(p < 0):
            raise InvalidDensity("probs must be finite and nonnegative")
        if abs(math.fsum(p) - 1.0) > DISCRETE_TOL:
            raise InvalidDensity(f"probs sum to {math.fsum(p)!r}")
        p[p < ZERO] = 0.0
        object.__setattr__(self, "probs", _frozen(p))

    @property
    def values(self) -> np.ndarray:
        return self.probs

    @property
    def quad_weights(self) -> np.ndarray:
        return np.ones_like(self.probs)

    @property
    def masses(self) -> np.ndarray:
        return self.probs

    def __len__(self):
        return self.probs.size

    def __repr__(self):
        return f"DiscreteDensity({np.array2string(self.probs, precision=4)})"


@dataclass(frozen=True, eq=False)
class GridDensity(Density):
    """Density sampled on ``xs``; renormalized so its trapezoid integral is 1.

    ``normalizer`` keeps the raw integral before renormalization.
    """

    xs: np.ndarray
    values: np.ndarray
    normalizer: float = 1.0
    quadrature: str = "trapezoid"

    def __post_init__(self):
        xs = np.asarray(self.xs, dtype=float)
        v = np.array(self.values, dtype=float)
        if xs.ndim != 1 or xs.size < 3 or xs.shape != v.shape:
            raise InvalidDensity("grid needs >= 3 points and matching values")
        if not np.all(np.diff(xs) > 0):
            raise InvalidDensity("grid must be strictly increasing")
        if not np.all(np.isfinite(v)) or np.any(v < 0):
            raise InvalidDensity("grid values must be finite and nonnegative")
        z = float(trapezoid_weights(xs) @ v)
        if not z > 0:
            raise InvalidDensity("grid values integrate to zero")
        v[v < ZERO] = 0.0
        object.__setattr__(self, "xs", _frozen(xs))
        object.__setattr__(self, "values", _frozen(v / z))
        object.__setattr__(self, "normalizer", float(self.normalizer) * z)

    @classmethod
    def from_pdf(cls, pdf, xs) -> "GridDensity":
        xs = np.asarray(xs, dtype=float)
        return cls(xs, np.asarray(pdf(xs), dtype=float))

    @cached_property
    def quad_weights(self) -> np.ndarray:
        return _frozen(trapezoid_weights(self.xs))

    def __repr__(self):
        return f"GridDensity([{self.xs[0]:g}, {self.xs[-1]:g}], n={self.xs.size})"


def make_grid(lo: float, hi: float, n: int = DEFAULT_GRID_N, log_spaced: bool = False):
    if n < 3:
        raise ValueError("grid needs at least 3 points")
    if not hi > lo:
        raise ValueError("grid upper bound must exceed lower bound")
    if log_spaced:
        if lo <= 0:
            raise ValueError("log-spaced grid needs lo > 0")
        return np.geomspace(lo, hi, n)
    return np.linspace(lo, hi, n)


def default_grid(members: Sequence[Sampleable], n: int = DEFAULT_GRID_N) -> np.ndarray:
    """Common grid covering every member's default bounds."""
    bounds = [m.grid_bounds() for m in members]
    lo = min(b[0] for b in bounds)
    hi = max(b[1] for b in bounds)
    log_spaced = any(b[2] for b in bounds) and lo > 0
    return make_grid(lo, hi, n, log_spaced)


def sample(d, xs) -> GridDensity:
    """Put a sampleable density (or a grid density on the same xs) on ``xs``."""
    if isinstance(d, GridDensity):
        if d.xs.shape == np.shape(xs) and np.array_equal(d.xs, xs):
            return d
        raise IncompatibleSupports("grid densities live on different grids")
    if isinstance(d, Sampleable):
        return GridDensity.from_pdf(d.pdf, xs)
    raise IncompatibleSupports(f"cannot sample {type(d).__name__} on a grid")


def _materialize(d):
    # naturally discrete members (categorical) become pmfs
    to_discrete = getattr(d, "discrete_density", None)
    if to_discrete is not None:
        pmf = to_discrete()
        if pmf is not None:
            return pmf
    return d


@dataclass(frozen=True)
class Aligned:
    """Densities brought onto one support.

    ``values`` has one row per density; ``xs`` is None for discrete supports.
    """

    values: np.ndarray
    tau: np.ndarray
    xs: np.ndarray | None

    @property
    def masses(self) -> np.ndarray:
        return self.values * self.tau

    def density(self, values) -> Density:
        """Wrap (and normalize) pointwise values on this support."""
        v = np.asarray(values, dtype=float)
        if self.xs is None:
            s = math.fsum(v)
            if not s > 0:
                raise InvalidDensity("values sum to zero")
            return DiscreteDensity(v / s)
        return GridDensity(self.xs, v)

    def density_from_masses(self, masses) -> Density:
        return self.density(np.asarray(masses, dtype=float) / self.tau_safe)

    @property
    def tau_safe(self) -> np.ndarray:
        return np.where(self.tau > 0, self.tau, 1.0)


def align(*densities, grid=None, n: int = DEFAULT_GRID_N) -> Aligned:
    """Bring densities onto a common support.

    Discrete densities must all have the same length.  Grid densities must
    share their grid exactly; other sampleable densities are evaluated on it.
    If nothing fixes the grid, ``grid`` (or a default covering grid) is used.
    """
    if not densities:
        raise ValueError("nothing to align")
    densities = tuple(_materialize(d) for d in densities)
    discrete = [d for d in densities if isinstance(d, DiscreteDensity)]
    if discrete:
        if len(discrete) != len(densities):
            raise IncompatibleSupports("cannot mix discrete and continuous densities")
        m = len(discrete[0])
        if any(len(d) != m for d in discrete):
            raise IncompatibleSupports("discrete densities have different supports")
        vals = np.vstack([d.probs for d in discrete])
        return Aligned(vals, np.ones(m), None)

    grids = [d for d in densities if isinstance(d, GridDensity)]
    if grids:
        xs = grids[0].xs
        if grid is not None and not np.array_equal(np.asarray(grid, dtype=float), xs):
            raise IncompatibleSupports("requested grid differs from the densities' grid")
    elif grid is not None:
        xs = np.asarray(grid, dtype=float)
    else:
        for d in densities:
            if not isinstance(d, Sampleable):
                raise IncompatibleSupports(f"unsupported density {type(d).__name__}")
        xs = default_grid(densities, n)
    sampled = [sample(d, xs) for d in densities]
    vals = np.vstack([g.values for g in sampled])
    return Aligned(vals, sampled[0].quad_weights, sampled[0].xs)


@dataclass(frozen=True, eq=False)
class WeightedSet:
    """n densities with positive weights summing to one."""

    members: tuple
    weights: np.ndarray

    def __post_init__(self):
        members = tuple(self.members)
        w = np.array(self.weights, dtype=float).ravel()
        if not members:
            raise ValueError("weighted set is empty")
        if w.size != len(members):
            raise ValueError("one weight per member required")
        if np.any(~(w > 0)):
            raise ValueError("weights must be strictly positive")
        if abs(math.fsum(w) - 1.0) > WEIGHT_TOL:
            raise ValueError(f"weights sum to {math.fsum(w)!r}, not 1")
        object.__setattr__(self, "members", members)
        object.__setattr__(self, "weights", _frozen(w))

    @classmethod
    def uniform(cls, members: Sequence) -> "WeightedSet":
        n = len(members)
        return cls(tuple(members), np.full(n, 1.0 / n))

    @classmethod
    def normalized(cls, members: Sequence, weights: Sequence[float]) -> "WeightedSet":
        w = np.asarray(weights, dtype=float)
        return cls(tuple(members), w / math.fsum(w))

    def __len__(self):
        return len(self.members)

    def align(self, grid=None, n: int = DEFAULT_GRID_N) -> Aligned:
        return align(*self.members, grid=grid, n=n)

    def mixture(self, grid=None) -> Density:
        return mixture(self, grid=grid)


def exact_weighted_sum(weights, rows) -> np.ndarray:
    """Column-wise ``sum_i w_i rows[i]`` with exactly rounded summation.

    Each column is summed with :func:`math.fsum`, so the result does not
    depend on the order of the (weight, row) pairs.
    """
    terms = np.asarray(weights, dtype=float)[:, None] * np.asarray(rows, dtype=float)
    if terms.shape[0] == 1:
        return terms[0].copy()
    return np.fromiter((math.fsum(c) for c in terms.T), float, terms.shape[1])


def mixture(set_: WeightedSet, grid=None) -> Density:
    """The arithmetic mixture ``sum_i w_i p_i`` on the members' common support."""
    if len(set_) == 1 and isinstance(set_.members[0], Density) and grid is None:
        return set_.members[0]
    al = set_.align(grid=grid)
    return al.density(exact_weighted_sum(set_.weights, al.values))


def upper_envelope(set_: WeightedSet, grid=None) -> tuple[Density, float]:
    """Normalized pointwise maximum of the members and its normalizer ``Z``."""
    al = set_.align(grid=grid)
    top = al.values.max(axis=0)
    z = float(al.tau @ top) if al.xs is not None else math.fsum(top)
    return al.density(top), z


# -- JSON ingestion ---------------------------------------------------------


def density_from_dict(obj: dict):
    """Parse one density object of the JSON ingestion schema."""
    from . import expfam

    kind = obj.get("type")
    if kind == "discrete":
        return DiscreteDensity(obj["probs"])
    if kind == "grid":
        inner = density_from_dict(obj["family"])
        xs = make_grid(
            float(obj.get("lo", -8.0)),
            float(obj.get("hi", 8.0)),
            int(obj.get("n", DEFAULT_GRID_N)),
            bool(obj.get("log_spaced", False)),
        )
        return sample(inner, xs)
    if kind == "grid_values":
        return GridDensity(obj["xs"], obj["values"])
    if kind == "mixture":
        comps = [density_from_dict(c) for c in obj["components"]]
        return expfam.EFMixture.build(obj["weights"], comps)
    return expfam.member_from_dict(obj)


def density_to_dict(d) -> dict:
    from . import expfam

    if isinstance(d, DiscreteDensity):
        return {"type": "discrete", "probs": d.probs.tolist()}
    if isinstance(d, GridDensity):
        return {"type": "grid_values", "xs": d.xs.tolist(), "values": d.values.tolist()}
    return expfam.member_to_dict(d)


def set_from_dict(obj: dict) -> WeightedSet:
    """``{"weights": [...], "members": [...]}``; weights default to uniform."""
    members = [density_from_dict(m) for m in obj["members"]]
    w = obj.get("weights")
    if w is None:
        return WeightedSet.uniform(members)
    return WeightedSet.normalized(members, w)


def load_json(path) -> dict:
    with open(path) as fh:
        return json.load(fh)
