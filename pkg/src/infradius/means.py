"""Weighted means over nonnegative reals.

All means are evaluated column-wise: ``values`` may be a vector (one value per
weight) or a 2-D array whose rows correspond to weights and whose columns are
independent evaluation points.  This lets the same code average divergence
values and mix density values pointwise.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.special import logsumexp

KINDS = (
    "arithmetic",
    "geometric",
    "harmonic",
    "power",
    "quasi_arithmetic",
    "renyi",
    "max",
    "min",
)

# Generators for quasi-arithmetic means, g_param(u):
#   "exp":      exp((a - 1) u)   (Renyi-type, a != 1)
#   "power":    u ** a           (a != 0)
#   "identity": u
GENERATORS = ("exp", "power", "identity")

WEIGHT_TOL = 1e-12
RENYI_MAX_ALPHA = 1e6


class MeanError(ValueError):
    pass


@dataclass(frozen=True)
class MeanSpec:
    """A weighted mean.

    ``exponent`` is used by ``power``; ``alpha`` by ``renyi``;
    ``generator``/``generator_param`` by ``quasi_arithmetic``.
    """

    kind: str
    weights: tuple[float, ...]
    exponent: float | None = None
    alpha: float | None = None
    generator: str | None = None
    generator_param: float | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise MeanError(f"unknown mean kind {self.kind!r}")
        w = tuple(float(x) for x in self.weights)
        object.__setattr__(self, "weights", w)
        if not w:
            raise MeanError("empty weight vector")
        if any(not (x > 0) for x in w):
            raise MeanError("weights must be strictly positive")
        if abs(math.fsum(w) - 1.0) > WEIGHT_TOL:
            raise MeanError(f"weights sum to {math.fsum(w)!r}, not 1")
        if self.kind == "power":
            e = self.exponent
            if e is None or not math.isfinite(e) or e == 0:
                raise MeanError("power mean needs a finite nonzero exponent")
        elif self.kind == "renyi":
            a = self.alpha
            if a is None or not (a > 0) or a == 1:
                raise MeanError("renyi mean needs alpha in (0,1) U (1,inf)")
        elif self.kind == "quasi_arithmetic":
            if self.generator not in GENERATORS:
                raise MeanError(f"unknown generator {self.generator!r}")
            a = self.generator_param
            if self.generator == "exp" and (a is None or a == 1):
                raise MeanError("exp generator needs parameter != 1")
            if self.generator == "power" and (a is None or a == 0):
                raise MeanError("power generator needs parameter != 0")

    # -- constructors -------------------------------------------------------

    @classmethod
    def arithmetic(cls, weights: Sequence[float]) -> "MeanSpec":
        return cls("arithmetic", tuple(weights))

    @classmethod
    def geometric(cls, weights: Sequence[float]) -> "MeanSpec":
        return cls("geometric", tuple(weights))

    @classmethod
    def harmonic(cls, weights: Sequence[float]) -> "MeanSpec":
        return cls("harmonic", tuple(weights))

    @classmethod
    def power(cls, exponent: float, weights: Sequence[float]) -> "MeanSpec":
        return cls("power", tuple(weights), exponent=float(exponent))

    @classmethod
    def renyi(cls, alpha: float, weights: Sequence[float]) -> "MeanSpec":
        return cls("renyi", tuple(weights), alpha=float(alpha))

    @classmethod
    def quasi_arithmetic(
        cls, generator: str, weights: Sequence[float], param: float | None = None
    ) -> "MeanSpec":
        return cls(
            "quasi_arithmetic",
            tuple(weights),
            generator=generator,
            generator_param=None if param is None else float(param),
        )

    @classmethod
    def maximum(cls, weights: Sequence[float]) -> "MeanSpec":
        return cls("max", tuple(weights))

    @classmethod
    def minimum(cls, weights: Sequence[float]) -> "MeanSpec":
        return cls("min", tuple(weights))

    @classmethod
    def two_point(cls, kind: str, skew: float, **params) -> "MeanSpec":
        """Two-point mean with weight vector ``(1 - skew, skew)``."""
        if not 0 < skew < 1:
            raise MeanError("skew weight must lie in (0, 1)")
        return cls(kind, (1.0 - skew, skew), **params)

    def with_weights(self, weights: Sequence[float]) -> "MeanSpec":
        return MeanSpec(
            self.kind,
            tuple(weights),
            exponent=self.exponent,
            alpha=self.alpha,
            generator=self.generator,
            generator_param=self.generator_param,
        )

    # -- serialization ------------------------------------------------------

    def to_dict(self) -> dict:
        d: dict = {"kind": self.kind}
        if self.kind == "power":
            d["exponent"] = self.exponent
        elif self.kind == "renyi":
            d["alpha"] = self.alpha
        elif self.kind == "quasi_arithmetic":
            d["generator"] = self.generator
            if self.generator_param is not None:
                d["param"] = self.generator_param
        d["weights"] = list(self.weights)
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, d: dict, weights: Sequence[float] | None = None) -> "MeanSpec":
        """Build from a JSON object; ``weights`` fills in a missing weight field."""
        w = d.get("weights", weights)
        if w is None:
            raise MeanError("mean spec has no weights")
        return cls(
            d["kind"],
            tuple(w),
            exponent=d.get("exponent"),
            alpha=d.get("alpha"),
            generator=d.get("generator"),
            generator_param=d.get("param"),
        )

    @classmethod
    def from_json(cls, text: str) -> "MeanSpec":
        return cls.from_dict(json.loads(text))


def _as_columns(spec: MeanSpec, values) -> tuple[np.ndarray, np.ndarray, bool]:
    x = np.asarray(values, dtype=float)
    vector = x.ndim == 1
    if vector:
        x = x[:, None]
    if x.ndim != 2 or x.shape[0] != len(spec.weights):
        raise MeanError(
            f"expected {len(spec.weights)} values per point, got shape {np.shape(values)}"
        )
    if np.any(np.isnan(x)):
        raise MeanError("NaN value")
    if np.any(x < 0):
        raise MeanError("values must be nonnegative")
    w = np.asarray(spec.weights)[:, None]
    return x, w, vector


def _power(x: np.ndarray, w: np.ndarray, e: float) -> np.ndarray:
    if e < 0 and np.any(x == 0):
        # P_e with e < 0 collapses to 0 as soon as one argument vanishes
        out = np.zeros(x.shape[1])
        ok = np.all(x > 0, axis=0)
        if np.any(ok):
            out[ok] = _power(x[:, ok], w, e)
        return out
    scale = x.max(axis=0)
    safe = np.where(scale > 0, scale, 1.0)
    with np.errstate(over="ignore", divide="ignore"):
        s = np.sum(w * (x / safe) ** e, axis=0)
        r = safe * s ** (1.0 / e)
    return np.where(scale > 0, r, 0.0)


def _renyi(x: np.ndarray, w: np.ndarray, alpha: float) -> np.ndarray:
    if alpha > RENYI_MAX_ALPHA:
        return x.max(axis=0)
    a = alpha - 1.0
    return logsumexp(a * x + np.log(w), axis=0) / a


def evaluate_mean(spec: MeanSpec, values) -> float | np.ndarray:
    """Evaluate the weighted mean ``spec`` of ``values``.

    Returns a float for a 1-D input and an array (one mean per column) for a
    2-D input.  The result is clipped into ``[min, max]`` of its column so
    in-betweenness survives rounding.
    """
    x, w, vector = _as_columns(spec, values)
    kind = spec.kind
    if kind in ("geometric", "harmonic") and np.any(x <= 0):
        raise MeanError(f"{kind} mean requires strictly positive values")

    if kind == "arithmetic":
        r = np.sum(w * x, axis=0)
    elif kind == "geometric":
        r = np.exp(np.sum(w * np.log(x), axis=0))
    elif kind == "harmonic":
        r = 1.0 / np.sum(w / x, axis=0)
    elif kind == "power":
        r = _power(x, w, spec.exponent)
    elif kind == "renyi":
        r = _renyi(x, w, spec.alpha)
    elif kind == "quasi_arithmetic":
        g, a = spec.generator, spec.generator_param
        if g == "identity":
            r = np.sum(w * x, axis=0)
        elif g == "power":
            r = _power(x, w, a)
        else:
            r = _renyi(x, w, a) if a > 0 else _exp_generator_mean(x, w, a)
    elif kind == "max":
        r = x.max(axis=0)
    else:
        r = x.min(axis=0)

    r = np.clip(r, x.min(axis=0), x.max(axis=0))
    return float(r[0]) if vector else r


def _exp_generator_mean(x, w, a):
    # exp((a-1)u) with a <= 0 is still strictly monotone; same log-sum-exp form
    c = a - 1.0
    return logsumexp(c * x + np.log(w), axis=0) / c


def mean_gradient(spec: MeanSpec, values) -> np.ndarray:
    """Partial derivatives of the mean with respect to each value (1-D input).

    ``max``/``min`` return the indicator of the first extremal entry
    (a subgradient).
    """
    x = np.asarray(values, dtype=float)
    w = np.asarray(spec.weights)
    m = evaluate_mean(spec, x)
    kind = spec.kind
    if kind == "arithmetic" or (kind == "quasi_arithmetic" and spec.generator == "identity"):
        return w.copy()
    if kind == "geometric":
        return m * w / x
    if kind == "harmonic":
        return m * m * w / (x * x)
    if kind == "power" or (kind == "quasi_arithmetic" and spec.generator == "power"):
        e = spec.exponent if kind == "power" else spec.generator_param
        if m == 0:
            return w.copy()
        return w * (x / m) ** (e - 1.0)
    if kind == "renyi" or kind == "quasi_arithmetic":
        a = spec.alpha if kind == "renyi" else spec.generator_param
        if kind == "renyi" and a > RENYI_MAX_ALPHA:
            kind = "max"
        else:
            z = (a - 1.0) * x + np.log(w)
            return np.exp(z - logsumexp(z))
    g = np.zeros_like(x)
    g[int(np.argmax(x) if kind == "max" else np.argmin(x))] = 1.0
    return g


def power_mean_pointwise(alpha: float, p_values, q_values, weight: float) -> np.ndarray:
    """Pointwise ``((1-w) p^alpha + w q^alpha)^(1/alpha)`` on aligned values."""
    spec = MeanSpec.power(alpha, (1.0 - weight, weight))
    return evaluate_mean(spec, np.vstack([p_values, q_values]))


def power_mean_density_pointwise(alpha: float, p, q, weight: float, grid=None) -> np.ndarray:
    """Pointwise weighted power mean of two densities on their common support.

    Returns unnormalized values on the aligned support (pmf entries or grid nodes).
    """
    from .densities import align

    al = align(p, q, grid=grid)
    return power_mean_pointwise(alpha, al.values[0], al.values[1], weight)
