"""Information radii of weighted density sets.

Closed forms for the Renyi-type radius (centroid, value and the gap
identity), the binomial closed form at order 1/k on exponential families,
upper bounds, and a mirror-descent solver for generic (mean, divergence)
radii on a common discrete support or grid.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.special import gammaln, logsumexp

from . import expfam
from .densities import Density, WeightedSet, align, density_to_dict, exact_weighted_sum
from .divergences import (
    DivergenceSpec,
    ParameterError,
    divergence_grad_masses,
    divergence_masses,
    generalized_bhattacharyya,
    jensen_bregman,
    kld_masses,
    renyi_divergence,
    renyi_entropy,
)
from .densities import DiscreteDensity
from .means import MeanSpec, evaluate_mean, mean_gradient

__all__ = [
    "RadiusResult",
    "SearchConfig",
    "sibson_radius",
    "objective_radius",
    "decomposition_gap",
    "sibson_two_point",
    "sibson_radius_ef_1_over_k",
    "radius_upper_bound",
    "mirror_descent",
    "generalized_radius",
    "bregman_information",
    "bregman_information_gap",
    "generalized_bhattacharyya",
]


class RadiusError(ValueError):
    pass


@dataclass
class RadiusResult:
    value: float
    centroid: Density | None
    alpha: float | None = None
    mean: MeanSpec | None = None
    divergence: DivergenceSpec | None = None
    iterations: int = 0
    residual: float = 0.0
    converged: bool = True
    trace: list = field(default_factory=list)
    diagnostics: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "value": self.value,
            "centroid": None if self.centroid is None else density_to_dict(self.centroid),
            "iterations": self.iterations,
            "residual": self.residual,
            "converged": self.converged,
        }


def _check_alpha(alpha: float) -> float:
    a = float(alpha)
    if not a > 0:
        raise RadiusError("order alpha must be positive")
    return a


# -- closed form -------------------------------------------------------------


def sibson_radius(set_: WeightedSet, alpha: float, grid=None) -> RadiusResult:
    """Renyi information radius of order ``alpha`` with its optimal centroid.

    alpha = 1:   centroid = arithmetic mixture, value = sum_i w_i KLD(p_i : mixture)
    finite:      centroid = normalized power mean P_alpha, value = alpha/(alpha-1) log int P_alpha
    alpha = inf: centroid = normalized upper envelope, value = log int max_i p_i
    """
    a = _check_alpha(alpha)
    al = set_.align(grid=grid)
    w = set_.weights
    if a == 1:
        bar = exact_weighted_sum(w, al.values)
        bar_m = bar * al.tau
        value = math.fsum(wi * kld_masses(P, bar_m) for wi, P in zip(w, al.masses))
        return RadiusResult(max(0.0, value), al.density(bar), alpha=a, diagnostics={"unique": True})
    if math.isinf(a):
        env = al.values.max(axis=0)
    else:
        env = evaluate_mean(MeanSpec.power(a, w), al.values)
    z = math.fsum(al.tau * env)
    if math.isinf(a):
        value = math.log(z)
    else:
        value = a / (a - 1) * math.log(z)
    return RadiusResult(max(0.0, value), al.density(env), alpha=a, diagnostics={"unique": True, "normalizer": z})


def objective_radius(set_: WeightedSet, alpha: float, c, grid=None) -> float:
    """R_alpha(P, c): Renyi alpha-mean of the Renyi alpha-divergences D(p_i : c)."""
    a = _check_alpha(alpha)
    al = align(*set_.members, c, grid=grid)
    masses = al.masses
    C = masses[-1]
    if a == 1:
        return math.fsum(w * kld_masses(P, C) for w, P in zip(set_.weights, masses[:-1]))
    # exp((a-1) D_a(p:c)) = int p^a c^(1-a); combine in log space
    from .divergences import renyi_masses

    d = np.array([renyi_masses(P, C, a) for P in masses[:-1]])
    if math.isinf(a):
        return float(d.max())
    return float(evaluate_mean(MeanSpec.renyi(a, set_.weights), d))


def decomposition_gap(set_: WeightedSet, alpha: float, c, grid=None) -> tuple[float, float]:
    """Both sides of R_alpha(P, c) - R_alpha(P, c*) = D_alpha(c* : c)."""
    res = sibson_radius(set_, alpha, grid=grid)
    cstar = res.centroid
    r_c = objective_radius(set_, alpha, c, grid=grid)
    r_star = objective_radius(set_, alpha, cstar, grid=grid)
    rhs = renyi_divergence(cstar, c, alpha, grid=grid)
    return r_c - r_star, rhs


def sibson_two_point(p, q, alpha: float, grid=None) -> float:
    """Radius of the uniform pair {p, q}; symmetric in its arguments."""
    return sibson_radius(WeightedSet.uniform([p, q]), alpha, grid=grid).value


def sibson_radius_ef_1_over_k(theta1, theta2, family, k: int) -> float:
    """Radius of order 1/k of two members of one exponential family.

    Expands the power mean with the binomial theorem:
    -1/(k-1) log(2^-k sum_i C(k,i) exp(F(i t1/k + (1-i/k) t2) - (i/k) F(t1) - (1-i/k) F(t2)))
    """
    if int(k) != k or k < 2:
        raise RadiusError("k must be an integer >= 2")
    k = int(k)
    fam = expfam.convex_generator(family)
    t1, t2 = fam.check_theta(theta1), fam.check_theta(theta2)
    F1, F2 = fam.F(t1), fam.F(t2)
    log_terms = []
    for i in range(k + 1):
        s = i / k
        mid = s * t1 + (1 - s) * t2
        if isinstance(fam, expfam.ExpFamily) and not fam.in_domain(mid):
            raise expfam.DomainError("segment leaves the natural parameter space")
        log_I = fam.F(mid) - s * F1 - (1 - s) * F2
        if i in (0, k):
            assert log_I == 0.0
        log_terms.append(log_I)
    if k == 2:
        c_bhat = math.exp(-jensen_bregman(fam, t1, t2))
        assert math.isclose(math.exp(log_terms[1]), c_bhat, rel_tol=1e-12, abs_tol=1e-300)
    log_binom = [gammaln(k + 1) - gammaln(i + 1) - gammaln(k - i + 1) for i in range(k + 1)]
    log_sum = logsumexp(np.add(log_binom, log_terms)) - k * math.log(2.0)
    return max(0.0, -float(log_sum) / (k - 1))


def radius_upper_bound(weights, alpha: float) -> float:
    """Renyi entropy of order 1/alpha of the weights (log n at alpha = inf)."""
    a = _check_alpha(alpha)
    order = 0.0 if math.isinf(a) else 1.0 / a
    return renyi_entropy(DiscreteDensity(np.asarray(weights, dtype=float)), order)


# -- mirror descent ------------------------------------------------------------------


@dataclass(frozen=True)
class SearchConfig:
    """Stopping rule and line search of the simplex solver."""

    max_iters: int = 10_000
    tol: float = 1e-10
    step: float = 1.0
    armijo: float = 1e-4
    shrink: float = 0.5
    max_backtracks: int = 60
    threads: int = 1

    def __post_init__(self):
        if self.max_iters < 1 or not self.tol > 0 or not self.step > 0:
            raise ParameterError("invalid search configuration")
        if not 0 < self.shrink < 1 or self.threads < 1:
            raise ParameterError("invalid search configuration")


@dataclass
class DescentResult:
    x: np.ndarray
    value: float
    iterations: int
    residual: float
    converged: bool
    trace: list


def mirror_descent(
    fun: Callable[[np.ndarray], float],
    grad: Callable[[np.ndarray], np.ndarray],
    x0,
    config: SearchConfig = SearchConfig(),
) -> DescentResult:
    """Exponentiated-gradient descent on the probability simplex.

    Steps ``x <- x exp(-eta g) / Z`` with Armijo backtracking on eta; iterates
    stay strictly positive.  Stops when the relative improvement drops below
    ``config.tol`` or after ``config.max_iters`` iterations.  ``trace`` holds
    ``(iteration, objective, residual)`` rows, objective nonincreasing.
    """
    x = np.asarray(x0, dtype=float)
    x = x / math.fsum(x)
    f = fun(x)
    if not math.isfinite(f):
        raise RadiusError("objective is infinite at the initial point")
    trace = [(0, f, math.nan)]
    eta = config.step
    residual = math.inf
    for it in range(1, config.max_iters + 1):
        g = grad(x)
        g = g - g[np.argmin(np.abs(g))]  # shift invariance on the simplex keeps exp tame
        accepted = False
        for _ in range(config.max_backtracks):
            z = np.log(x) - eta * g
            z -= logsumexp(z)
            x_new = np.exp(z)
            f_new = fun(x_new)
            decrease = float(g @ (x_new - x))
            if math.isfinite(f_new) and f_new <= f + config.armijo * decrease:
                accepted = True
                break
            eta *= config.shrink
        if not accepted or f_new > f:
            trace.append((it, f, 0.0))
            return DescentResult(x, f, it, 0.0, True, trace)
        residual = (f - f_new) / max(abs(f), 1e-300)
        x, f = x_new, f_new
        trace.append((it, f, residual))
        eta = min(config.step, eta / config.shrink)
        if residual < config.tol:
            return DescentResult(x, f, it, residual, True, trace)
    return DescentResult(x, f, config.max_iters, residual, False, trace)


def generalized_radius(
    set_: WeightedSet,
    mean: MeanSpec,
    divergence: DivergenceSpec,
    search: SearchConfig = SearchConfig(),
    grid=None,
) -> RadiusResult:
    """Minimize M(D[p_1 : c], ..., D[p_n : c]; w) over densities c on the common support.

    ``mean`` supplies the kind (and its parameter); its weights are replaced
    by the set's weights.  Starts from the arithmetic mixture.
    """
    if not divergence.homogeneous:
        raise ParameterError(f"{divergence.kind} cannot be minimized on the simplex")
    if divergence.kind == "bhattacharyya":
        raise ParameterError("the Bhattacharyya coefficient is a similarity; use bhattacharyya_distance")
    mean = mean.with_weights(set_.weights)
    al = set_.align(grid=grid)
    masses = al.masses
    c0 = exact_weighted_sum(set_.weights, masses)
    support = c0 > 0
    P = masses[:, support]
    pool = ThreadPoolExecutor(search.threads) if search.threads > 1 else None

    def per_member(fn):
        if pool is None:
            return [fn(Pi) for Pi in P]
        return list(pool.map(fn, P))

    def fun(C):
        d = per_member(lambda Pi: divergence_masses(divergence, Pi, C))
        return float(evaluate_mean(mean, d))

    def grad(C):
        d = per_member(lambda Pi: divergence_masses(divergence, Pi, C))
        dm = mean_gradient(mean, d)
        gs = per_member(lambda Pi: divergence_grad_masses(divergence, Pi, C))
        return np.sum(dm[:, None] * np.array(gs), axis=0)

    try:
        res = mirror_descent(fun, grad, c0[support], search)
    finally:
        if pool is not None:
            pool.shutdown()
    full = np.zeros_like(c0)
    full[support] = res.x
    return RadiusResult(
        value=max(0.0, res.value),
        centroid=al.density_from_masses(full),
        mean=mean,
        divergence=divergence,
        iterations=res.iterations,
        residual=res.residual,
        converged=res.converged,
        trace=res.trace,
        diagnostics={"unique": "unknown"},
    )


# -- Bregman information -------------------------------------------------------------


def bregman_information(thetas, weights=None, F_id="sq_norm") -> tuple[float, np.ndarray]:
    """(sum_i w_i B_F(theta_i : theta_bar), theta_bar) with theta_bar = sum_i w_i theta_i."""
    T = np.atleast_2d(np.asarray(thetas, dtype=float))
    if T.shape[0] == 1 and np.ndim(thetas) == 1:
        T = T.T
    n = T.shape[0]
    w = np.full(n, 1.0 / n) if weights is None else np.asarray(weights, dtype=float)
    if w.size != n or np.any(~(w > 0)) or abs(math.fsum(w) - 1) > 1e-12:
        raise ParameterError("weights must be positive and sum to one")
    gen = expfam.convex_generator(F_id)
    bar = exact_weighted_sum(w, T)
    gen.check_theta(bar)
    value = math.fsum(wi * expfam.bregman(gen, t, bar) for wi, t in zip(w, T))
    return max(0.0, value), bar


def bregman_information_gap(thetas, weights, F_id, theta) -> tuple[float, float]:
    """Both sides of R_F(V, theta) - R_F(V, theta_bar) = B_F(theta_bar : theta)."""
    T = np.atleast_2d(np.asarray(thetas, dtype=float))
    value, bar = bregman_information(T, weights, F_id)
    w = np.full(T.shape[0], 1.0 / T.shape[0]) if weights is None else np.asarray(weights, dtype=float)
    r = math.fsum(wi * expfam.bregman(F_id, t, theta) for wi, t in zip(w, T))
    return r - value, expfam.bregman(F_id, bar, theta)
