"""Entropies, divergences and Jensen-Shannon type symmetrizations.

Everything is in nats.  Divergences that are positively homogeneous in the
density pair (KLD, Renyi, Bhattacharyya, total variation, skew JSD) are
evaluated on quadrature masses ``tau * p``, so one code path serves pmfs and
grid densities.  ``+inf`` is a legitimate return value whenever ``p`` puts
mass where the second argument vanishes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.special import logsumexp

from . import expfam
from .densities import (
    DEFAULT_GRID_N,
    Aligned,
    DiscreteDensity,
    GridDensity,
    InvalidDensity,
    WeightedSet,
    align,
    exact_weighted_sum,
    trapezoid_weights,
)
from .means import MeanSpec, evaluate_mean

LN2 = math.log(2.0)
BASES = {"nats": 1.0, "bits": LN2}


class ParameterError(ValueError):
    pass


def to_base(value: float, base: str = "nats") -> float:
    """Convert a value in nats to ``base`` (``nats`` or ``bits``)."""
    if base not in BASES:
        raise ValueError(f"unknown log base {base!r}")
    if base == "nats":
        return value
    return value / LN2


def _open_unit(name: str, x: float):
    if not 0 < x < 1:
        raise ParameterError(f"{name} must lie in the open interval (0, 1), got {x!r}")


def _pair(p, q, grid=None, n=DEFAULT_GRID_N) -> tuple[np.ndarray, np.ndarray, Aligned]:
    al = align(p, q, grid=grid, n=n)
    P, Q = al.masses
    return P, Q, al


# -- mass-level kernels ----------------------------------------------------------
# P and Q are nonnegative mass vectors on a common support.


def kld_masses(P, Q) -> float:
    P, Q = np.asarray(P), np.asarray(Q)
    pos = P > 0
    if np.any(Q[pos] <= 0):
        return math.inf
    return max(0.0, float(np.sum(P[pos] * (np.log(P[pos]) - np.log(Q[pos])))))


def renyi_masses(P, Q, alpha: float) -> float:
    P, Q = np.asarray(P), np.asarray(Q)
    if alpha == 1:
        return kld_masses(P, Q)
    pos = P > 0
    if math.isinf(alpha):
        if np.any(Q[pos] <= 0):
            return math.inf
        return max(0.0, float(np.max(np.log(P[pos]) - np.log(Q[pos]))))
    both = pos & (Q > 0)
    if alpha > 1 and np.any(pos & ~both):
        return math.inf
    if not np.any(both):
        return math.inf
    log_s = logsumexp(alpha * np.log(P[both]) + (1 - alpha) * np.log(Q[both]))
    return max(0.0, float(log_s / (alpha - 1)))


def bhattacharyya_masses(P, Q, alpha: float) -> float:
    P, Q = np.asarray(P), np.asarray(Q)
    both = (P > 0) & (Q > 0)
    if not np.any(both):
        return 0.0
    return float(np.exp(logsumexp(alpha * np.log(P[both]) + (1 - alpha) * np.log(Q[both]))))


def tv_masses(P, Q) -> float:
    return 0.5 * float(np.sum(np.abs(np.asarray(P) - np.asarray(Q))))


def skew_jsd_masses(P, Q, alpha: float, beta: float) -> float:
    P, Q = np.asarray(P), np.asarray(Q)
    m = (1 - alpha) * P + alpha * Q
    return (1 - beta) * kld_masses(P, m) + beta * kld_masses(Q, m)


# -- entropies -------------------------------------------------------------------


def entropy(p, grid=None) -> float:
    """Shannon (differential) entropy ``-int p log p``."""
    if isinstance(p, expfam.EFMember) and grid is None and not p.family.discrete:
        return expfam.ef_entropy(p)
    al = align(p, grid=grid)
    v, tau = al.values[0], al.tau
    pos = v > 0
    return float(-np.sum(tau[pos] * v[pos] * np.log(v[pos])))


def cross_entropy(p, q, grid=None) -> float:
    """``-int p log q``; ``+inf`` when ``p > 0`` where ``q = 0``."""
    al = align(p, q, grid=grid)
    (pv, qv), tau = al.values, al.tau
    pos = pv > 0
    if np.any(qv[pos] <= 0):
        return math.inf
    return float(-np.sum(tau[pos] * pv[pos] * np.log(qv[pos])))


def renyi_entropy(p, alpha: float, grid=None) -> float:
    """Renyi entropy of order ``alpha`` (0, 1 and ``inf`` included)."""
    if not alpha >= 0:
        raise ParameterError("Renyi entropy order must be nonnegative")
    if alpha == 1:
        return entropy(p, grid=grid)
    al = align(p, grid=grid)
    v, tau = al.values[0], al.tau
    pos = v > 0
    if alpha == 0:
        return float(math.log(np.sum(tau[pos])))
    if math.isinf(alpha):
        return float(-math.log(v.max()))
    log_int = logsumexp(alpha * np.log(v[pos]) + np.log(tau[pos]))
    return float(log_int / (1 - alpha))


def discrete_renyi_entropy(w: Sequence[float], alpha: float) -> float:
    """Renyi entropy of a weight vector (counting measure)."""
    return renyi_entropy(DiscreteDensity(np.asarray(w, dtype=float)), alpha)


# -- divergences -----------------------------------------------------------------


def kld(p, q, grid=None) -> float:
    """Kullback-Leibler divergence ``int p log(p/q)``.

    Two members of one exponential family (or of the Weibull clan) use the
    closed form; everything else goes through summation/quadrature.  With an
    explicit ``grid``, two continuous members are integrated in log space
    without renormalization.
    """
    if isinstance(p, expfam.EFMember) and isinstance(q, expfam.EFMember) and grid is None:
        if p.family == q.family and not p.family.discrete:
            return expfam.ef_kld(p, q)
        try:
            return expfam.cross_family_kld(p, q)
        except (expfam.UnsupportedPair, expfam.FamilyMismatch):
            pass
    if grid is not None and _has_log_pdf(p) and _has_log_pdf(q):
        return _kld_log_space(p, q, np.asarray(grid, dtype=float))
    P, Q, _ = _pair(p, q, grid)
    return kld_masses(P, Q)


def _has_log_pdf(d) -> bool:
    return isinstance(d, expfam.EFMember) and not d.family.discrete


def _kld_log_space(p, q, xs) -> float:
    # analytic log-densities: the grid only supplies quadrature nodes, nothing
    # is renormalized, and log q never underflows
    tau = trapezoid_weights(xs)
    lp, lq = p.log_pdf(xs), q.log_pdf(xs)
    with np.errstate(over="ignore"):
        pv = np.exp(lp)
    if not np.all(np.isfinite(pv[tau > 0])):
        raise InvalidDensity("density is unbounded on the grid")
    mask = (pv > 0) & (tau > 0)
    if np.any(np.isneginf(lq[mask])):
        return math.inf
    return max(0.0, float(np.sum(tau[mask] * pv[mask] * (lp[mask] - lq[mask]))))


def reverse_kld(p, q, grid=None) -> float:
    return kld(q, p, grid=grid)


def renyi_divergence(p, q, alpha: float, grid=None) -> float:
    """Renyi divergence of order ``alpha > 0``; ``alpha = 1`` is the KLD, ``inf`` allowed."""
    if not alpha > 0:
        raise ParameterError("Renyi divergence order must be positive")
    if alpha == 1:
        return kld(p, q, grid=grid)
    P, Q, _ = _pair(p, q, grid)
    return renyi_masses(P, Q, alpha)


def bhattacharyya_coefficient(p, q, alpha: float = 0.5, grid=None) -> float:
    """``int p^alpha q^(1-alpha)``, in [0, 1]."""
    _open_unit("alpha", alpha)
    P, Q, _ = _pair(p, q, grid)
    return min(1.0, bhattacharyya_masses(P, Q, alpha))


def total_variation(p, q, grid=None) -> float:
    P, Q, _ = _pair(p, q, grid)
    return min(1.0, tv_masses(P, Q))


def skew_jsd(p, q, alpha: float = 0.5, beta: float = 0.5, grid=None) -> float:
    """``(1-beta) KLD(p : m) + beta KLD(q : m)`` with ``m = (1-alpha) p + alpha q``."""
    _open_unit("alpha", alpha)
    _open_unit("beta", beta)
    P, Q, _ = _pair(p, q, grid)
    return skew_jsd_masses(P, Q, alpha, beta)


def jsd(p, q, grid=None) -> float:
    """Ordinary Jensen-Shannon divergence (bounded by ln 2)."""
    return min(LN2, skew_jsd(p, q, 0.5, 0.5, grid=grid))


def skew_jsd_entropic(p, q, alpha: float = 0.5, beta: float = 0.5, grid=None) -> float:
    """Same value as :func:`skew_jsd`, as ``h[m_beta : m_alpha] - ((1-beta) h[p] + beta h[q])``."""
    _open_unit("alpha", alpha)
    _open_unit("beta", beta)
    al = align(p, q, grid=grid)
    pv, qv = al.values
    m_a = al.density((1 - alpha) * pv + alpha * qv)
    m_b = al.density((1 - beta) * pv + beta * qv)
    dp, dq = al.density(pv), al.density(qv)
    return cross_entropy(m_b, m_a) - ((1 - beta) * entropy(dp) + beta * entropy(dq))


def js_diversity(set_: WeightedSet, grid=None) -> float:
    """Jensen-Shannon diversity index ``sum_i w_i KLD(p_i : pbar)``."""
    al = set_.align(grid=grid)
    masses = al.masses
    bar = exact_weighted_sum(set_.weights, masses)
    return math.fsum(w * kld_masses(P, bar) for w, P in zip(set_.weights, masses))


def js_diversity_entropic(set_: WeightedSet, grid=None) -> float:
    """Same value as :func:`js_diversity`, as ``h[pbar] - sum_i w_i h[p_i]``."""
    al = set_.align(grid=grid)
    bar = al.density(exact_weighted_sum(set_.weights, al.values))
    hs = [entropy(al.density(v)) for v in al.values]
    return entropy(bar) - math.fsum(w * h for w, h in zip(set_.weights, hs))


def shannon_entropy_weights(w) -> float:
    """H(w) = -sum w_i ln w_i, the upper bound of the JS diversity index."""
    w = np.asarray(w, dtype=float)
    return float(-np.sum(w * np.log(w)))


# -- f-divergence form of the skew JSD -----------------------------------------------


def f_generator_jsd(u, alpha: float, beta: float):
    """Generator f such that ``I_f = skew_jsd(., ., alpha, beta)``.

    ``f(u) = -((1-beta) log(alpha u + 1 - alpha) + beta u log((1-alpha)/u + alpha))``
    """
    _open_unit("alpha", alpha)
    _open_unit("beta", beta)
    x = np.asarray(u, dtype=float)
    if np.any(~(x > 0)):
        raise ParameterError("generator argument must be positive")
    r = -((1 - beta) * np.log(alpha * x + 1 - alpha) + beta * x * np.log((1 - alpha) / x + alpha))
    return float(r) if np.ndim(u) == 0 else r


def f_generator_jsd_second_derivative(u, alpha: float, beta: float):
    a, b = alpha, beta
    x = np.asarray(u, dtype=float)
    num = a * a * (1 - b) * x + (a - 1) ** 2 * b
    den = a * a * x**3 + 2 * a * (1 - a) * x**2 + (a - 1) ** 2 * x
    r = num / den
    return float(r) if np.ndim(u) == 0 else r


def f_divergence(p, q, f, f_at_zero: float, slope_at_inf: float, grid=None) -> float:
    """``I_f[p:q] = int p f(q/p)`` with the usual conventions at zeros.

    ``f_at_zero`` is ``f(0+)`` (used where q = 0 < p) and ``slope_at_inf`` is
    ``lim f(u)/u`` (used where p = 0 < q).
    """
    P, Q, _ = _pair(p, q, grid)
    both = (P > 0) & (Q > 0)
    only_p = (P > 0) & (Q <= 0)
    only_q = (P <= 0) & (Q > 0)
    total = float(np.sum(P[both] * f(Q[both] / P[both])))
    if np.any(only_p):
        total += f_at_zero * float(np.sum(P[only_p]))
    if np.any(only_q):
        total += slope_at_inf * float(np.sum(Q[only_q]))
    return total


def skew_jsd_f_divergence(p, q, alpha: float, beta: float, grid=None) -> float:
    """:func:`skew_jsd` computed as the f-divergence of :func:`f_generator_jsd`."""
    _open_unit("alpha", alpha)
    _open_unit("beta", beta)
    return f_divergence(
        p,
        q,
        lambda u: f_generator_jsd(u, alpha, beta),
        f_at_zero=-(1 - beta) * math.log(1 - alpha),
        slope_at_inf=-beta * math.log(alpha),
        grid=grid,
    )


# -- generic divergence specs ----------------------------------------------------------

DIVERGENCE_KINDS = (
    "kld",
    "reverse_kld",
    "renyi",
    "renyi_inf",
    "tv",
    "bhattacharyya",
    "bhattacharyya_distance",
    "skew_jsd",
    "gen_bhattacharyya",
)


@dataclass(frozen=True)
class DivergenceSpec:
    """A divergence with its parameters.

    ``bhattacharyya`` is the coefficient (a similarity in [0, 1]);
    ``bhattacharyya_distance`` is ``-log`` of it.
    """

    kind: str
    alpha: float | None = None
    beta: float | None = None
    mean: MeanSpec | None = None

    def __post_init__(self):
        k = self.kind
        if k not in DIVERGENCE_KINDS:
            raise ParameterError(f"unknown divergence kind {k!r}")
        if k == "renyi":
            a = self.alpha
            if a is None or not a > 0 or a == 1 or math.isinf(a):
                raise ParameterError("renyi divergence needs alpha in (0,1) U (1,inf)")
        if k in ("bhattacharyya", "bhattacharyya_distance"):
            _open_unit("alpha", 0.5 if self.alpha is None else self.alpha)
        if k == "skew_jsd":
            _open_unit("alpha", self.alpha if self.alpha is not None else -1)
            _open_unit("beta", self.beta if self.beta is not None else -1)
        if k == "gen_bhattacharyya" and (self.mean is None or len(self.mean.weights) != 2):
            raise ParameterError("gen_bhattacharyya needs a two-point mean")

    @property
    def order(self) -> float:
        if self.kind == "renyi_inf":
            return math.inf
        return 0.5 if self.alpha is None else self.alpha

    def to_dict(self) -> dict:
        d: dict = {"kind": self.kind}
        if self.alpha is not None:
            d["alpha"] = self.alpha
        if self.beta is not None:
            d["beta"] = self.beta
        if self.mean is not None:
            d["mean"] = self.mean.to_dict()
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "DivergenceSpec":
        mean = d.get("mean")
        return cls(
            d["kind"],
            alpha=d.get("alpha"),
            beta=d.get("beta"),
            mean=None if mean is None else MeanSpec.from_dict(mean),
        )

    @property
    def homogeneous(self) -> bool:
        return self.kind != "gen_bhattacharyya"


def divergence_masses(spec: DivergenceSpec, P, Q) -> float:
    """Evaluate a homogeneous divergence on aligned mass vectors."""
    k = spec.kind
    if k == "kld":
        return kld_masses(P, Q)
    if k == "reverse_kld":
        return kld_masses(Q, P)
    if k == "renyi":
        return renyi_masses(P, Q, spec.alpha)
    if k == "renyi_inf":
        return renyi_masses(P, Q, math.inf)
    if k == "tv":
        return min(1.0, tv_masses(P, Q))
    if k == "bhattacharyya":
        return min(1.0, bhattacharyya_masses(P, Q, spec.order))
    if k == "bhattacharyya_distance":
        c = bhattacharyya_masses(P, Q, spec.order)
        return math.inf if c <= 0 else max(0.0, -math.log(c))
    if k == "skew_jsd":
        return skew_jsd_masses(P, Q, spec.alpha, spec.beta)
    raise ParameterError(f"{k} is not evaluated on masses")


def divergence(spec: DivergenceSpec, p, q, grid=None) -> float:
    """Evaluate ``spec`` between two densities."""
    if spec.kind == "kld":
        return kld(p, q, grid=grid)
    if spec.kind == "reverse_kld":
        return kld(q, p, grid=grid)
    if spec.kind == "gen_bhattacharyya":
        return generalized_bhattacharyya(p, q, spec.mean, grid=grid)
    P, Q, _ = _pair(p, q, grid)
    return divergence_masses(spec, P, Q)


def divergence_grad_masses(spec: DivergenceSpec, P, C) -> np.ndarray:
    """Gradient of ``D[P : C]`` with respect to the masses ``C`` (C > 0).

    Non-smooth kinds (``tv``, ``renyi_inf``) return a subgradient.
    """
    P, C = np.asarray(P, dtype=float), np.asarray(C, dtype=float)
    k = spec.kind
    if k == "kld":
        return -P / C
    if k == "reverse_kld":
        pos = P > 0
        g = np.full_like(C, np.inf)
        g[pos] = np.log(C[pos]) - np.log(P[pos]) + 1.0
        return g
    if k in ("renyi", "bhattacharyya_distance", "bhattacharyya"):
        a = spec.order
        pos = P > 0
        t = np.zeros_like(C)
        t[pos] = np.exp(a * np.log(P[pos]) - a * np.log(C[pos]))
        s = float(np.sum(t * C))
        if k == "bhattacharyya":
            return (1 - a) * t
        if k == "bhattacharyya_distance":
            return -(1 - a) * t / s
        return -t / s
    if k == "renyi_inf":
        ratio = np.where(P > 0, P / C, 0.0)
        g = np.zeros_like(C)
        j = int(np.argmax(ratio))
        g[j] = -1.0 / C[j]
        return g
    if k == "tv":
        return 0.5 * np.sign(C - P)
    raise ParameterError(f"no gradient available for divergence kind {k!r}")


# -- (M, N)-JSD and Bhattacharyya-type divergences ------------------------------------


def m_mixture(p, q, mean: MeanSpec, grid=None):
    """Normalized pointwise mean ``M(p(x), q(x)) / int M(p, q)``.

    Returns ``(aligned, mixture_density, normalizer)``.
    """
    if len(mean.weights) != 2:
        raise ParameterError("mixing mean must be a two-point mean")
    al = align(p, q, grid=grid)
    vals = evaluate_mean(mean, al.values)
    z = float(al.tau @ vals)
    if not z > 0:
        raise ParameterError("M-mixture has a zero normalizer")
    return al, al.density(vals), z


def mn_jsd(
    p,
    q,
    mixing_mean: MeanSpec,
    averaging_mean: MeanSpec,
    base: DivergenceSpec | None = None,
    grid=None,
) -> float:
    """``N_beta(D[p : (pq)^M_alpha], D[q : (pq)^M_alpha])``.

    The skews are carried by the weights of the two means: the mixing mean
    has weights ``(1-alpha, alpha)`` and the averaging mean ``(1-beta, beta)``.
    """
    base = base or DivergenceSpec("kld")
    if len(averaging_mean.weights) != 2:
        raise ParameterError("averaging mean must be a two-point mean")
    al, mix, _ = m_mixture(p, q, mixing_mean, grid=grid)
    dp, dq = al.density(al.values[0]), al.density(al.values[1])
    vals = [divergence(base, dp, mix), divergence(base, dq, mix)]
    if any(math.isinf(v) for v in vals):
        return math.inf
    vals = [max(0.0, v) for v in vals]
    if min(vals) == 0.0 and _vanishes_at_zero(averaging_mean):
        return 0.0
    return float(evaluate_mean(averaging_mean, vals))


def _vanishes_at_zero(mean: MeanSpec) -> bool:
    # limit value of the mean when one argument tends to 0
    if mean.kind in ("geometric", "harmonic", "min"):
        return True
    return mean.kind == "power" and mean.exponent < 0


def generalized_bhattacharyya(p, q, mean: MeanSpec, grid=None) -> float:
    """``-log int M(p(x), q(x)) dmu`` for a two-point weighted mean ``M``."""
    if len(mean.weights) != 2:
        raise ParameterError("generalized Bhattacharyya needs a two-point mean")
    al = align(p, q, grid=grid)
    z = float(al.tau @ evaluate_mean(mean, al.values))
    if not z > 0:
        return math.inf
    return -math.log(z)


# -- Jensen / Bregman ----------------------------------------------------------------


def jensen_bregman(F_id, theta1, theta2) -> float:
    """Jensen divergence ``(F(t1) + F(t2))/2 - F((t1 + t2)/2)``."""
    gen = expfam.convex_generator(F_id)
    t1, t2 = gen.check_theta(theta1), gen.check_theta(theta2)
    mid = gen.check_theta(0.5 * (t1 + t2))
    return max(0.0, 0.5 * (gen.F(t1) + gen.F(t2)) - gen.F(mid))


def jensen_bregman_averaged(F_id, theta1, theta2) -> float:
    """Same value as :func:`jensen_bregman`, as ``(B(t1 : m) + B(t2 : m)) / 2``."""
    t1 = np.atleast_1d(np.asarray(theta1, dtype=float))
    t2 = np.atleast_1d(np.asarray(theta2, dtype=float))
    mid = 0.5 * (t1 + t2)
    return 0.5 * (expfam.bregman(F_id, t1, mid) + expfam.bregman(F_id, t2, mid))
