"""Radii whose centroid is constrained to an exponential family."""

from __future__ import annotations

import math

import numpy as np
from scipy.optimize import minimize

from . import expfam
from .densities import DEFAULT_GRID_N, GridDensity, WeightedSet, default_grid
from .divergences import DivergenceSpec
from .divergences import divergence as eval_divergence
from .expfam import EFMember, ExpFamily, FamilyMismatch
from .means import MeanSpec, evaluate_mean
from .radius import RadiusResult

DOMINANCE_TOL = 1e-6
GRAD_TOL = 1e-5


def _summary(p, family: ExpFamily, grid=None):
    # members on a grid are integrated on their own grid only
    if isinstance(p, GridDensity) and grid is not None:
        raise ValueError("grid members are integrated on their own grid")
    return expfam.moment_summary(p, family, grid=grid)


def information_projection(p, family: ExpFamily, grid=None) -> EFMember:
    """KLD-closest member of ``family`` to ``p``: theta* = grad F*(E_p[t])."""
    return expfam.project_moments(family, _summary(p, family, grid).m_p)


def pooled_moment(set_: WeightedSet, family: ExpFamily, grid=None) -> np.ndarray:
    """sum_i w_i E_{p_i}[t], summed exactly."""
    rows = np.array([_summary(p, family, grid).m_p for p in set_.members])
    return np.array([math.fsum(c) for c in (set_.weights[:, None] * rows).T])


def relative_radius(
    set_: WeightedSet,
    family: ExpFamily,
    mean: MeanSpec | None = None,
    divergence: DivergenceSpec | None = None,
    grid=None,
    check_dominance: bool = True,
) -> RadiusResult:
    """min over c in ``family`` of M(D[p_1 : c], ..., D[p_n : c]; w).

    The default (arithmetic mean, KLD) is solved by moment matching on the
    pooled moment.  Other pairs run BFGS over the family's unconstrained
    coordinates from the moment-matched start, with D evaluated by
    quadrature on a grid fixed at the start.
    """
    div = divergence or DivergenceSpec("kld")
    mean = (mean or MeanSpec.arithmetic(set_.weights)).with_weights(set_.weights)
    summaries = [_summary(p, family, grid) for p in set_.members]
    m = np.array([math.fsum(c) for c in (set_.weights[:, None] * np.array([s.m_p for s in summaries])).T])
    start = expfam.project_moments(family, m)

    closed = mean.kind == "arithmetic" and div.kind == "kld"
    if closed:
        vals = [expfam.semi_closed_kld(s, start) for s in summaries]
        result = RadiusResult(
            value=max(0.0, math.fsum(w * v for w, v in zip(set_.weights, vals))),
            centroid=start,
            mean=mean,
            divergence=div,
            diagnostics={"method": "moment_matching"},
        )
    else:
        result = _search(set_, family, mean, div, start, grid)

    if check_dominance and not family.discrete:
        result.diagnostics["unconstrained"] = _unconstrained(set_, mean, div, grid)
        u = result.diagnostics["unconstrained"]
        if u is not None:
            assert result.value >= u - DOMINANCE_TOL, (result.value, u)
    return result


def _unconstrained(set_, mean, div, grid):
    from .radius import SearchConfig, generalized_radius, sibson_radius

    try:
        if mean.kind == "arithmetic" and div.kind == "kld":
            return sibson_radius(set_, 1, grid=grid).value
        return generalized_radius(set_, mean, div, SearchConfig(max_iters=2000), grid=grid).value
    except Exception:
        return None


def _search(set_, family, mean, div, start, grid) -> RadiusResult:
    if grid is None:
        grid = default_grid(list(set_.members) + [start], DEFAULT_GRID_N)

    def objective(z):
        try:
            q = EFMember(family, family.from_unconstrained(z))
        except (expfam.DomainError, ValueError):
            return math.inf
        d = [eval_divergence(div, p, q, grid=grid) for p in set_.members]
        return float(evaluate_mean(mean, d))

    z0 = family.to_unconstrained(start.theta)
    res = minimize(objective, z0, method="BFGS", options={"gtol": 1e-8})
    z = res.x if res.fun <= objective(z0) else z0
    centroid = EFMember(family, family.from_unconstrained(z))
    residual = float(np.linalg.norm(res.jac)) if res.jac is not None else math.nan
    return RadiusResult(
        value=max(0.0, float(min(res.fun, objective(z0)))),
        centroid=centroid,
        mean=mean,
        divergence=div,
        iterations=int(res.nit),
        residual=residual,
        # BFGS often stops on line-search precision loss at a stationary point
        converged=bool(res.success) or residual < GRAD_TOL,
        diagnostics={"method": "bfgs", "message": str(res.message)},
    )


def relative_reverse_projection(
    p1: EFMember, p2: EFMember, beta: float, path: str = "geometric", check: bool = True
) -> EFMember:
    """Member on the geometric or the moment path between ``p1`` and ``p2``.

    geometric: theta = (1-beta) theta1 + beta theta2,
               minimizer of (1-beta) KLD(c : p1) + beta KLD(c : p2)
    moment:    eta = (1-beta) eta1 + beta eta2,
               minimizer of (1-beta) KLD(p1 : c) + beta KLD(p2 : c)
    """
    if p1.family != p2.family:
        raise FamilyMismatch(f"{p1.family.family_id} vs {p2.family.family_id}")
    if not 0 <= beta <= 1:
        raise ValueError("beta must lie in [0, 1]")
    fam = p1.family
    if path == "geometric":
        c = EFMember(fam, (1 - beta) * p1.theta + beta * p2.theta)

        def obj(q):
            return (1 - beta) * expfam.ef_kld(q, p1) + beta * expfam.ef_kld(q, p2)

    elif path == "moment":
        c = expfam.project_moments(fam, (1 - beta) * p1.eta + beta * p2.eta)

        def obj(q):
            return (1 - beta) * expfam.ef_kld(p1, q) + beta * expfam.ef_kld(p2, q)

    else:
        raise ValueError(f"unknown path {path!r}")
    if check and 0 < beta < 1:
        _check_argmin(c, obj)
    return c


def _check_argmin(c: EFMember, obj, trials: int = 100, radius: float = 1e-2):
    fam = c.family
    rng = np.random.default_rng(0)
    z = fam.to_unconstrained(c.theta)
    best = obj(c)
    for _ in range(trials):
        d = rng.standard_normal(z.size)
        q = EFMember(fam, fam.from_unconstrained(z + radius * d / np.linalg.norm(d)))
        assert obj(q) >= best - 1e-12, "path member is not the minimizer"
