"""Exponential families in canonical form.

A member has density ``exp(theta . t(x) - F(theta) + k(x))``.  Each family
supplies its cumulant ``F``, the moment map ``eta = grad F(theta)``, the inverse
map ``theta = grad F*(eta)``, and closed-form expectations of its own carrier
term.  Matrix-valued natural parameters (multivariate normal) are flattened
so that every parameter is a plain vector and inner products are dot
products.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property, lru_cache
from typing import Callable, Sequence

import numpy as np
from scipy.special import gammaln, logsumexp

from .densities import DEFAULT_GRID_N, DiscreteDensity, GridDensity, default_grid, integrate

EULER_GAMMA = float(np.euler_gamma)


class DomainError(ValueError):
    """Parameter outside the natural (or moment) parameter domain."""


class FamilyMismatch(ValueError):
    pass


class UnsupportedPair(ValueError):
    """No closed-form cross-family expectation for this pair of families."""


def _vec(theta) -> np.ndarray:
    t = np.atleast_1d(np.asarray(theta, dtype=float)).ravel()
    return t


class ExpFamily:
    family_id: str = ""
    dim: int = 0
    discrete: bool = False

    # cumulant machinery ----------------------------------------------------

    def F(self, theta) -> float:
        raise NotImplementedError

    def grad_F(self, theta) -> np.ndarray:
        raise NotImplementedError

    def grad_Fstar(self, eta) -> np.ndarray:
        raise NotImplementedError

    def Fstar(self, eta) -> float:
        eta = _vec(eta)
        theta = self.grad_Fstar(eta)
        return float(theta @ eta - self.F(theta))

    def check_theta(self, theta) -> np.ndarray:
        raise NotImplementedError

    def check_eta(self, eta) -> np.ndarray:
        self.grad_Fstar(eta)
        return _vec(eta)

    def in_domain(self, theta) -> bool:
        try:
            self.check_theta(theta)
        except DomainError:
            return False
        return True

    # densities -------------------------------------------------------------

    def sufficient_stat(self, xs) -> np.ndarray:
        """``t(x)`` as an array of shape ``(len(xs), dim)``."""
        raise NotImplementedError

    def carrier(self, xs) -> np.ndarray:
        return np.zeros(np.shape(xs))

    def log_pdf(self, xs, theta) -> np.ndarray:
        theta = _vec(theta)
        return self.sufficient_stat(xs) @ theta - self.F(theta) + self.carrier(xs)

    def pdf(self, xs, theta) -> np.ndarray:
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            return np.exp(self.log_pdf(xs, theta))

    def carrier_expectation(self, theta) -> float:
        """``E_theta[k(x)]`` in closed form."""
        return 0.0

    def grid_bounds(self, theta) -> tuple[float, float, bool]:
        raise NotImplementedError

    # search reparameterization: unconstrained z <-> theta ---------------------

    def to_unconstrained(self, theta) -> np.ndarray:
        raise NotImplementedError

    def from_unconstrained(self, z) -> np.ndarray:
        raise NotImplementedError

    # user parameters ---------------------------------------------------------

    def params(self, theta) -> dict:
        raise NotImplementedError

    def member(self, theta) -> "EFMember":
        return EFMember(self, theta)


# -- univariate Gaussian -----------------------------------------------------


@dataclass(frozen=True)
class GaussianFamily(ExpFamily):
    """N(mu, sigma^2) with t(x) = (x, x^2), theta = (mu/s2, -1/(2 s2))."""

    family_id: str = "gaussian"
    dim: int = 2

    def check_theta(self, theta):
        t = _vec(theta)
        if t.size != 2 or not np.all(np.isfinite(t)):
            raise DomainError("gaussian natural parameter must be a finite 2-vector")
        if not t[1] < 0:
            raise DomainError("gaussian precision term theta2 must be negative")
        return t

    def F(self, theta):
        t1, t2 = self.check_theta(theta)
        return float(-t1 * t1 / (4 * t2) + 0.5 * math.log(-math.pi / t2))

    def grad_F(self, theta):
        t1, t2 = self.check_theta(theta)
        mu = -t1 / (2 * t2)
        return np.array([mu, mu * mu - 1 / (2 * t2)])

    def grad_Fstar(self, eta):
        e = _vec(eta)
        var = e[1] - e[0] ** 2
        if not var > 0:
            raise DomainError("moment parameter has nonpositive variance")
        return np.array([e[0] / var, -0.5 / var])

    def Fstar(self, eta):
        e = _vec(eta)
        var = e[1] - e[0] ** 2
        if not var > 0:
            raise DomainError("moment parameter has nonpositive variance")
        return -0.5 * (1.0 + math.log(2 * math.pi * var))

    def sufficient_stat(self, xs):
        x = np.asarray(xs, dtype=float)
        return np.stack([x, x * x], axis=-1)

    def grid_bounds(self, theta):
        mu, var = self._mu_var(theta)
        s = math.sqrt(var)
        return mu - 8 * s, mu + 8 * s, False

    def _mu_var(self, theta):
        t1, t2 = self.check_theta(theta)
        var = -0.5 / t2
        return t1 * var, var

    def to_unconstrained(self, theta):
        mu, var = self._mu_var(theta)
        return np.array([mu, 0.5 * math.log(var)])

    def from_unconstrained(self, z):
        mu, log_s = _vec(z)
        var = math.exp(2 * log_s)
        return np.array([mu / var, -0.5 / var])

    def params(self, theta):
        mu, var = self._mu_var(theta)
        return {"mu": float(mu), "sigma": math.sqrt(var)}

    def from_params(self, mu, sigma):
        if not sigma > 0:
            raise DomainError("sigma must be positive")
        var = float(sigma) ** 2
        return np.array([mu / var, -0.5 / var])


# -- multivariate Gaussian ---------------------------------------------------


@dataclass(frozen=True)
class MVNFamily(ExpFamily):
    """N(m, S) with theta = (S^-1 m, vec(-S^-1 / 2)), t(x) = (x, vec(x x^T)).

    The cumulant is ``1/2 m^T S^-1 m + 1/2 log|2 pi S|``, i.e.
    ``-1/4 v^T M^-1 v - 1/2 log|-M| + d/2 log(pi)`` in natural coordinates.
    """

    d: int = 1
    family_id: str = "mvn"

    @property
    def dim(self):
        return self.d + self.d * self.d

    def split(self, theta):
        t = _vec(theta)
        d = self.d
        if t.size != d + d * d or not np.all(np.isfinite(t)):
            raise DomainError(f"mvn natural parameter must have {d + d * d} finite entries")
        return t[:d], t[d:].reshape(d, d)

    def check_theta(self, theta):
        v, M = self.split(theta)
        if not np.allclose(M, M.T, rtol=0, atol=1e-12 * max(1.0, np.abs(M).max())):
            raise DomainError("matrix part of the natural parameter must be symmetric")
        try:
            np.linalg.cholesky(-M)
        except np.linalg.LinAlgError:
            raise DomainError("matrix part must be negative definite") from None
        return _vec(theta)

    def mean_cov(self, theta):
        self.check_theta(theta)
        v, M = self.split(theta)
        cov = np.linalg.inv(-2.0 * M)
        cov = 0.5 * (cov + cov.T)
        return cov @ v, cov

    def join(self, mean, cov):
        mean = np.atleast_1d(np.asarray(mean, dtype=float))
        cov = np.atleast_2d(np.asarray(cov, dtype=float))
        prec = np.linalg.inv(cov)
        prec = 0.5 * (prec + prec.T)
        return np.concatenate([prec @ mean, (-0.5 * prec).ravel()])

    def F(self, theta):
        mean, cov = self.mean_cov(theta)
        _, logdet = np.linalg.slogdet(2 * math.pi * cov)
        return float(0.5 * mean @ np.linalg.solve(cov, mean) + 0.5 * logdet)

    def grad_F(self, theta):
        mean, cov = self.mean_cov(theta)
        return np.concatenate([mean, (cov + np.outer(mean, mean)).ravel()])

    def grad_Fstar(self, eta):
        e = _vec(eta)
        d = self.d
        mean = e[:d]
        second = e[d:].reshape(d, d)
        cov = second - np.outer(mean, mean)
        cov = 0.5 * (cov + cov.T)
        try:
            np.linalg.cholesky(cov)
        except np.linalg.LinAlgError:
            raise DomainError("moment parameter has a non positive-definite covariance") from None
        return self.join(mean, cov)

    def Fstar(self, eta):
        theta = self.grad_Fstar(eta)
        _, cov = self.mean_cov(theta)
        _, logdet = np.linalg.slogdet(2 * math.pi * math.e * cov)
        return float(-0.5 * logdet)

    def sufficient_stat(self, xs):
        x = np.asarray(xs, dtype=float)
        if self.d != 1:
            x = x.reshape(-1, self.d)
            return np.concatenate([x, np.einsum("ni,nj->nij", x, x).reshape(len(x), -1)], axis=1)
        return np.stack([x, x * x], axis=-1)

    def carrier(self, xs):
        x = np.asarray(xs, dtype=float)
        return np.zeros(x.shape if self.d == 1 else x.reshape(-1, self.d).shape[0])

    def grid_bounds(self, theta):
        if self.d != 1:
            raise ValueError("only 1-d normals can be put on a grid")
        mean, cov = self.mean_cov(theta)
        s = math.sqrt(cov[0, 0])
        return mean[0] - 8 * s, mean[0] + 8 * s, False

    def to_unconstrained(self, theta):
        mean, cov = self.mean_cov(theta)
        L = np.linalg.cholesky(cov)
        diag = np.diag_indices(self.d)
        L[diag] = np.log(L[diag])
        return np.concatenate([mean, L[np.tril_indices(self.d)]])

    def from_unconstrained(self, z):
        z = _vec(z)
        d = self.d
        L = np.zeros((d, d))
        L[np.tril_indices(d)] = z[d:]
        diag = np.diag_indices(d)
        L[diag] = np.exp(L[diag])
        return self.join(z[:d], L @ L.T)

    def params(self, theta):
        mean, cov = self.mean_cov(theta)
        return {"mean": mean.tolist(), "cov": cov.tolist()}


# -- Weibull with fixed shape (exponential: shape 1, Rayleigh: shape 2) ------


@dataclass(frozen=True)
class WeibullFamily(ExpFamily):
    """Weibull(kappa, sigma) for fixed shape kappa.

    theta = -sigma^-kappa, t(x) = x^kappa, k(x) = (kappa-1) log x + log kappa,
    F(theta) = -log(-theta).
    """

    kappa: float = 1.0
    name: str = field(default="weibull_kappa", compare=False)
    dim: int = 1

    def __post_init__(self):
        if not self.kappa > 0:
            raise DomainError("Weibull shape must be positive")

    @property
    def family_id(self):
        return self.name

    def check_theta(self, theta):
        t = _vec(theta)
        if t.size != 1 or not np.isfinite(t[0]) or not t[0] < 0:
            raise DomainError("Weibull natural parameter must be a negative scalar")
        return t

    def F(self, theta):
        (t,) = self.check_theta(theta)
        return -math.log(-t)

    def grad_F(self, theta):
        (t,) = self.check_theta(theta)
        return np.array([-1.0 / t])

    def grad_Fstar(self, eta):
        e = _vec(eta)
        if e.size != 1 or not e[0] > 0:
            raise DomainError("Weibull moment parameter must be positive")
        return np.array([-1.0 / e[0]])

    def Fstar(self, eta):
        e = _vec(eta)
        if e.size != 1 or not e[0] > 0:
            raise DomainError("Weibull moment parameter must be positive")
        return -1.0 - math.log(e[0])

    def scale(self, theta) -> float:
        (t,) = self.check_theta(theta)
        return (-t) ** (-1.0 / self.kappa)

    def from_scale(self, sigma) -> np.ndarray:
        if not sigma > 0:
            raise DomainError("scale must be positive")
        return np.array([-(float(sigma) ** -self.kappa)])

    def sufficient_stat(self, xs):
        x = np.asarray(xs, dtype=float)
        return (np.abs(x) ** self.kappa)[..., None]

    def carrier(self, xs):
        x = np.asarray(xs, dtype=float)
        with np.errstate(divide="ignore"):
            logx = np.log(x)
        if self.kappa == 1:
            return np.zeros_like(x)
        return (self.kappa - 1) * logx + math.log(self.kappa)

    def log_pdf(self, xs, theta):
        x = np.asarray(xs, dtype=float)
        with np.errstate(divide="ignore", invalid="ignore"):
            out = super().log_pdf(np.where(x >= 0, x, 1.0), theta)
        return np.where(x < 0, -np.inf, out)

    def pdf(self, xs, theta):
        x = np.asarray(xs, dtype=float)
        s = self.scale(theta)
        k = self.kappa
        out = np.zeros_like(x)
        pos = x > 0
        z = x[pos] / s
        out[pos] = (k / s) * np.exp((k - 1) * np.log(z) - z**k)
        at0 = x == 0
        if np.any(at0):
            out[at0] = np.inf if k < 1 else (1.0 / s if k == 1 else 0.0)
        return out

    def log_moment(self, theta) -> float:
        """E[log x] = log sigma - gamma / kappa."""
        return math.log(self.scale(theta)) - EULER_GAMMA / self.kappa

    def carrier_expectation(self, theta):
        return (self.kappa - 1) * self.log_moment(theta) + math.log(self.kappa)

    def grid_bounds(self, theta):
        s = self.scale(theta)
        hi = s * 45.0 ** (1.0 / self.kappa)
        if self.kappa < 1:
            return s * 1e-16 ** (1.0 / self.kappa), hi, True
        return 0.0, hi, False

    def to_unconstrained(self, theta):
        (t,) = self.check_theta(theta)
        return np.array([math.log(-t)])

    def from_unconstrained(self, z):
        return np.array([-math.exp(_vec(z)[0])])

    def params(self, theta):
        s = self.scale(theta)
        if self.name == "exponential":
            return {"rate": float(1.0 / s)}
        if self.name == "rayleigh":
            return {"scale": float(s / math.sqrt(2))}
        return {"shape": self.kappa, "scale": float(s)}


# -- categorical -------------------------------------------------------------


@dataclass(frozen=True)
class CategoricalFamily(ExpFamily):
    """Categorical on m atoms; theta_i = log(p_i / p_m), F = log(1 + sum e^theta)."""

    m: int = 2
    family_id: str = "categorical"
    discrete: bool = True

    @property
    def dim(self):
        return self.m - 1

    def check_theta(self, theta):
        t = _vec(theta)
        if t.size != self.m - 1 or not np.all(np.isfinite(t)):
            raise DomainError(f"categorical natural parameter must have {self.m - 1} finite entries")
        return t

    def F(self, theta):
        t = self.check_theta(theta)
        return float(logsumexp(np.append(t, 0.0)))

    def grad_F(self, theta):
        t = np.append(self.check_theta(theta), 0.0)
        return np.exp(t - logsumexp(t))[:-1]

    def grad_Fstar(self, eta):
        e = _vec(eta)
        last = 1.0 - math.fsum(e)
        if e.size != self.m - 1 or np.any(e <= 0) or not last > 0:
            raise DomainError("categorical moment parameter must be an interior probability vector")
        return np.log(e) - math.log(last)

    def Fstar(self, eta):
        e = _vec(eta)
        self.grad_Fstar(e)
        p = np.append(e, 1.0 - math.fsum(e))
        return float(np.sum(p * np.log(p)))

    def sufficient_stat(self, xs):
        idx = np.asarray(xs, dtype=int)
        return np.eye(self.m)[idx][:, : self.m - 1]

    def probs(self, theta):
        t = np.append(self.check_theta(theta), 0.0)
        return np.exp(t - logsumexp(t))

    def to_unconstrained(self, theta):
        return self.check_theta(theta).copy()

    def from_unconstrained(self, z):
        return _vec(z).copy()

    def params(self, theta):
        return {"probs": self.probs(theta).tolist()}


# -- registry ----------------------------------------------------------------

GAUSSIAN = GaussianFamily()
EXPONENTIAL = WeibullFamily(1.0, "exponential")
RAYLEIGH = WeibullFamily(2.0, "rayleigh")


@lru_cache(maxsize=None)
def weibull_family(kappa: float) -> WeibullFamily:
    return WeibullFamily(float(kappa), "weibull_kappa")


@lru_cache(maxsize=None)
def mvn_family(d: int) -> MVNFamily:
    return MVNFamily(int(d))


@lru_cache(maxsize=None)
def categorical_family(m: int) -> CategoricalFamily:
    return CategoricalFamily(int(m))


def get_family(family_id: str, **params) -> ExpFamily:
    """Look up a family by its string id (``kappa``/``d``/``m`` where needed)."""
    if family_id == "gaussian":
        return GAUSSIAN
    if family_id == "exponential":
        return EXPONENTIAL
    if family_id == "rayleigh":
        return RAYLEIGH
    if family_id in ("weibull", "weibull_kappa"):
        if "kappa" not in params:
            raise ValueError("weibull_kappa family needs a fixed shape 'kappa'")
        return weibull_family(params["kappa"])
    if family_id == "mvn":
        return mvn_family(params.get("d", 1))
    if family_id == "categorical":
        if "m" not in params:
            raise ValueError("categorical family needs the number of atoms 'm'")
        return categorical_family(params["m"])
    raise ValueError(f"unknown family {family_id!r}")


# -- members and mixtures ----------------------------------------------------


@dataclass(frozen=True, eq=False)
class EFMember:
    family: ExpFamily
    theta: np.ndarray

    def __post_init__(self):
        t = self.family.check_theta(self.theta).copy()
        t.setflags(write=False)
        object.__setattr__(self, "theta", t)

    @cached_property
    def eta(self) -> np.ndarray:
        e = self.family.grad_F(self.theta)
        e.setflags(write=False)
        return e

    @cached_property
    def F(self) -> float:
        return self.family.F(self.theta)

    def pdf(self, xs):
        return self.family.pdf(xs, self.theta)

    def log_pdf(self, xs):
        return self.family.log_pdf(xs, self.theta)

    def grid_bounds(self):
        return self.family.grid_bounds(self.theta)

    def to_grid(self, xs=None, n: int = DEFAULT_GRID_N) -> GridDensity:
        if xs is None:
            xs = default_grid([self], n)
        return GridDensity.from_pdf(self.pdf, xs)

    def discrete_density(self) -> DiscreteDensity | None:
        if isinstance(self.family, CategoricalFamily):
            return DiscreteDensity(self.family.probs(self.theta))
        return None

    @property
    def params(self) -> dict:
        return self.family.params(self.theta)

    def __repr__(self):
        p = ", ".join(f"{k}={v!r}" for k, v in self.params.items())
        return f"EFMember({self.family.family_id}: {p})"


def gaussian(mu: float, sigma: float) -> EFMember:
    return EFMember(GAUSSIAN, GAUSSIAN.from_params(mu, sigma))


def exponential(rate: float) -> EFMember:
    if not rate > 0:
        raise DomainError("rate must be positive")
    return EFMember(EXPONENTIAL, np.array([-float(rate)]))


def rayleigh(scale: float) -> EFMember:
    if not scale > 0:
        raise DomainError("scale must be positive")
    return EFMember(RAYLEIGH, np.array([-0.5 / float(scale) ** 2]))


def weibull(shape: float, scale: float) -> EFMember:
    fam = weibull_family(shape)
    return EFMember(fam, fam.from_scale(scale))


def mvn(mean, cov) -> EFMember:
    mean = np.atleast_1d(np.asarray(mean, dtype=float))
    fam = mvn_family(mean.size)
    return EFMember(fam, fam.join(mean, cov))


def categorical(probs) -> EFMember:
    p = np.asarray(probs, dtype=float)
    if np.any(p <= 0):
        raise DomainError("categorical member needs strictly positive probabilities")
    fam = categorical_family(p.size)
    return EFMember(fam, np.log(p[:-1]) - math.log(p[-1]))


@dataclass(frozen=True, eq=False)
class EFMixture:
    """Finite mixture ``sum_j w_j p_j`` with explicit structure."""

    weights: np.ndarray
    components: tuple

    def __post_init__(self):
        w = np.array(self.weights, dtype=float)
        comps = tuple(self.components)
        if w.size != len(comps) or w.size == 0:
            raise ValueError("one weight per mixture component required")
        if np.any(~(w > 0)) or abs(math.fsum(w) - 1.0) > 1e-12:
            raise ValueError("mixture weights must be positive and sum to 1")
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "components", comps)

    @classmethod
    def build(cls, weights, components) -> "EFMixture":
        w = np.asarray(weights, dtype=float)
        return cls(w / math.fsum(w), tuple(components))

    def pdf(self, xs):
        return sum(w * c.pdf(xs) for w, c in zip(self.weights, self.components))

    def grid_bounds(self):
        b = [c.grid_bounds() for c in self.components]
        return min(x[0] for x in b), max(x[1] for x in b), any(x[2] for x in b)

    def to_grid(self, xs=None, n: int = DEFAULT_GRID_N) -> GridDensity:
        if xs is None:
            xs = default_grid([self], n)
        return GridDensity.from_pdf(self.pdf, xs)

    def __len__(self):
        return len(self.components)

    def __repr__(self):
        return f"EFMixture({len(self)} components)"


def member_from_dict(obj: dict) -> EFMember:
    kind = obj.get("type")
    if kind == "gaussian":
        return gaussian(float(obj["mu"]), float(obj["sigma"]))
    if kind == "exponential":
        return exponential(float(obj["rate"]))
    if kind == "rayleigh":
        return rayleigh(float(obj["scale"]))
    if kind in ("weibull", "weibull_kappa"):
        return weibull(float(obj["shape"]), float(obj["scale"]))
    if kind == "mvn":
        return mvn(obj["mean"], obj["cov"])
    if kind == "categorical":
        return categorical(obj["probs"])
    raise ValueError(f"unknown density type {kind!r}")


def member_to_dict(d) -> dict:
    if isinstance(d, EFMixture):
        return {
            "type": "mixture",
            "weights": d.weights.tolist(),
            "components": [member_to_dict(c) for c in d.components],
        }
    out = {"type": d.family.family_id}
    out.update(d.params)
    out["theta"] = d.theta.tolist()
    out["eta"] = d.eta.tolist()
    return out


# -- Bregman machinery -------------------------------------------------------


@dataclass(frozen=True)
class ConvexGenerator:
    """A strictly convex function with its gradient, addressable by name."""

    name: str
    F: Callable
    grad_F: Callable
    check_theta: Callable


def _always(theta):
    return _vec(theta)


def _positive(theta):
    t = _vec(theta)
    if np.any(t <= 0):
        raise DomainError("generator domain is the positive orthant")
    return t


def _gen(name, F, grad, check=_always):
    def f(theta):
        return float(F(check(theta)))

    def g(theta):
        return np.asarray(grad(check(theta)), dtype=float)

    return ConvexGenerator(name, f, g, check)


GENERATORS = {
    "sq_norm": _gen("sq_norm", lambda t: 0.5 * t @ t, lambda t: t),
    "square": _gen("square", lambda t: t @ t, lambda t: 2 * t),
    "lse": _gen("lse", logsumexp, lambda t: np.exp(t - logsumexp(t))),
    "lse1": _gen(
        "lse1",
        lambda t: logsumexp(np.append(t, 0.0)),
        lambda t: np.exp(t - logsumexp(np.append(t, 0.0))),
    ),
    "neg_entropy": _gen(
        "neg_entropy", lambda t: np.sum(t * np.log(t)), lambda t: np.log(t) + 1, _positive
    ),
    "burg": _gen("burg", lambda t: -np.sum(np.log(t)), lambda t: -1 / t, _positive),
}


def convex_generator(F_id) -> ConvexGenerator | ExpFamily:
    """Resolve a generator name, a family id, or pass through an object."""
    if isinstance(F_id, (ConvexGenerator, ExpFamily)):
        return F_id
    if F_id in GENERATORS:
        return GENERATORS[F_id]
    return get_family(F_id)


def bregman(F_id, theta1, theta2) -> float:
    """B_F(theta1 : theta2) = F(theta1) - F(theta2) - (theta1 - theta2) . grad F(theta2)."""
    gen = convex_generator(F_id)
    t1, t2 = gen.check_theta(theta1), gen.check_theta(theta2)
    return float(gen.F(t1) - gen.F(t2) - (t1 - t2) @ gen.grad_F(t2))


def dual_bregman(family: ExpFamily, eta1, eta2) -> float:
    """B_F*(eta1 : eta2) with grad F* = family.grad_Fstar."""
    e1, e2 = _vec(eta1), _vec(eta2)
    return float(family.Fstar(e1) - family.Fstar(e2) - (e1 - e2) @ family.grad_Fstar(e2))


# -- operations ----------------------------------------------------------------


def cumulant(family: ExpFamily, theta) -> float:
    return family.F(theta)


def grad_cumulant(family: ExpFamily, theta) -> np.ndarray:
    return family.grad_F(theta)


def legendre_dual(family: ExpFamily, eta) -> tuple[np.ndarray, float]:
    """(theta, F*(eta)) with theta = grad F*(eta)."""
    return family.grad_Fstar(eta), family.Fstar(eta)


def ef_entropy(member: EFMember) -> float:
    """h = F(theta) - theta . eta - E[k(x)] = -F*(eta) - E[k(x)]."""
    fam = member.family
    return float(member.F - member.theta @ member.eta - fam.carrier_expectation(member.theta))


def _same_family(p: EFMember, q: EFMember):
    if p.family != q.family:
        raise FamilyMismatch(f"{p.family.family_id} vs {q.family.family_id}")


def ef_kld(p: EFMember, q: EFMember) -> float:
    """KLD(p : q) = F(theta_q) + F*(eta_p) - theta_q . eta_p for one family."""
    _same_family(p, q)
    fam = p.family
    return float(q.F + fam.Fstar(p.eta) - q.theta @ p.eta)


def expected_stat(p, family: ExpFamily) -> np.ndarray:
    """E_p[t_Q(x)] in closed form for members and mixtures."""
    if isinstance(p, EFMixture):
        rows = np.array([expected_stat(c, family) for c in p.components])
        return np.array([math.fsum(c) for c in (p.weights[:, None] * rows).T])
    if not isinstance(p, EFMember):
        raise UnsupportedPair(f"no closed-form moments for {type(p).__name__}")
    if p.family == family:
        return np.array(p.eta)
    if isinstance(p.family, WeibullFamily) and isinstance(family, WeibullFamily):
        k1, k2 = p.family.kappa, family.kappa
        s1 = p.family.scale(p.theta)
        return np.array([s1**k2 * math.exp(gammaln(1.0 + k2 / k1))])
    if isinstance(p.family, GaussianFamily) and isinstance(family, MVNFamily) and family.d == 1:
        return np.array(p.eta)
    if isinstance(p.family, MVNFamily) and p.family.d == 1 and isinstance(family, GaussianFamily):
        return np.array(p.eta)
    raise UnsupportedPair(f"E_p[t_Q] for {p.family.family_id} -> {family.family_id}")


def expected_carrier(p, family: ExpFamily) -> float:
    """E_p[k_Q(x)] in closed form for members and mixtures."""
    if isinstance(p, EFMixture):
        return math.fsum(w * expected_carrier(c, family) for w, c in zip(p.weights, p.components))
    if not isinstance(p, EFMember):
        raise UnsupportedPair(f"no closed-form carrier expectation for {type(p).__name__}")
    if p.family == family:
        return family.carrier_expectation(p.theta)
    if isinstance(family, (GaussianFamily, MVNFamily)) and isinstance(
        p.family, (GaussianFamily, MVNFamily)
    ):
        return 0.0
    if isinstance(p.family, WeibullFamily) and isinstance(family, WeibullFamily):
        k2 = family.kappa
        return (k2 - 1) * p.family.log_moment(p.theta) + math.log(k2)
    raise UnsupportedPair(f"E_p[k_Q] for {p.family.family_id} -> {family.family_id}")


def cross_family_kld(p: EFMember, q: EFMember) -> float:
    """KLD between members of two families via their cross moments.

    F_Q(theta') + F*_P(eta) - E_p[t_Q] . theta' + E_p[k_P(x) - k_Q(x)]
    """
    m = expected_stat(p, q.family)
    diff = p.family.carrier_expectation(p.theta) - expected_carrier(p, q.family)
    return float(q.F + p.family.Fstar(p.eta) - m @ q.theta + diff)


def weibull_kld(k1: float, s1: float, k2: float, s2: float) -> float:
    """Explicit KLD between Weibull(k1, s1) and Weibull(k2, s2)."""
    return (
        math.log(k1 / s1**k1)
        - math.log(k2 / s2**k2)
        + (k1 - k2) * (math.log(s1) - EULER_GAMMA / k1)
        + (s1 / s2) ** k2 * math.exp(gammaln(k2 / k1 + 1.0))
        - 1.0
    )


@dataclass(frozen=True)
class MomentSummary:
    """Everything the semi-closed KLD needs about an arbitrary density p.

    ``numeric`` lists the entries that came from quadrature rather than a
    closed form.
    """

    m_p: np.ndarray
    carrier_expectation: float
    entropy_p: float
    numeric: tuple[str, ...] = ()

    def __post_init__(self):
        m = _vec(self.m_p)
        if not (np.all(np.isfinite(m)) and math.isfinite(self.carrier_expectation)):
            raise ValueError("moment summary entries must be finite")
        if not math.isfinite(self.entropy_p):
            raise ValueError("entropy must be finite")
        object.__setattr__(self, "m_p", m)


def moment_summary(p, family: ExpFamily, grid=None, n: int = DEFAULT_GRID_N) -> MomentSummary:
    """Moments of ``t_Q``, ``k_Q`` and the entropy of ``p``.

    Closed forms are used whenever they exist; anything else is computed by
    trapezoid quadrature on ``grid`` (or ``p``'s own grid / a default grid).
    """
    from .divergences import entropy

    if isinstance(p, DiscreteDensity):
        if not isinstance(family, CategoricalFamily) or family.m != len(p):
            raise FamilyMismatch("discrete densities summarize against a categorical family")
        return MomentSummary(p.probs[:-1].copy(), 0.0, entropy(p))

    numeric: list[str] = []
    try:
        m = expected_stat(p, family)
    except UnsupportedPair:
        m = None
    try:
        k = expected_carrier(p, family)
    except UnsupportedPair:
        k = None
    if isinstance(p, EFMember) and grid is None:
        h = ef_entropy(p)
    else:
        h = None

    if m is None or k is None or h is None:
        g = p if isinstance(p, GridDensity) else p.to_grid(grid, n)
        if m is None:
            t = family.sufficient_stat(g.xs)
            m = g.masses @ t
            numeric.append("m_p")
        if k is None:
            with np.errstate(invalid="ignore"):
                kv = np.where(g.values > 0, family.carrier(g.xs), 0.0)
            k = float(g.masses @ kv)
            numeric.append("carrier_expectation")
        if h is None:
            h = entropy(g)
            numeric.append("entropy_p")
    return MomentSummary(m, k, h, tuple(numeric))


def semi_closed_kld(summary: MomentSummary, q: EFMember) -> float:
    """KLD(p : q_theta) = F(theta) - m_p . theta - E_p[k_Q] - h[p]."""
    if summary.m_p.size != q.theta.size:
        raise ValueError(
            f"moment vector has {summary.m_p.size} entries, natural parameter has {q.theta.size}"
        )
    return float(q.F - summary.m_p @ q.theta - summary.carrier_expectation - summary.entropy_p)


def kld_comparison(m_p, q1: EFMember, q2: EFMember) -> float:
    """F(theta1) - F(theta2) - m_p . (theta1 - theta2).

    Has the sign of KLD(p : q1) - KLD(p : q2); entropy and carrier terms cancel.
    """
    return float(q1.F - q2.F - _vec(m_p) @ (q1.theta - q2.theta))


def gaussian_target_kld(m, S, mu, Sigma, entropy_p: float) -> float:
    """KLD(p : N(mu, Sigma)) from the mean m and covariance S of p and h[p]."""
    m = np.atleast_1d(np.asarray(m, dtype=float))
    mu = np.atleast_1d(np.asarray(mu, dtype=float))
    S = np.atleast_2d(np.asarray(S, dtype=float))
    Sigma = np.atleast_2d(np.asarray(Sigma, dtype=float))
    diff = mu - m
    _, logdet = np.linalg.slogdet(2 * math.pi * Sigma)
    quad = diff @ np.linalg.solve(Sigma, diff)
    tr = np.trace(np.linalg.solve(Sigma, S))
    return float(0.5 * (logdet + quad + tr) - entropy_p)


def project_moments(family: ExpFamily, m) -> EFMember:
    """Member whose moment parameter equals ``m`` (theta = grad F*(m))."""
    return EFMember(family, family.grad_Fstar(m))
