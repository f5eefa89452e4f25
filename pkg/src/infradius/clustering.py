"""Lloyd-style clustering of densities with exponential-family centers.

Assignments compare KLD(p_i : q_l) through F(theta_l) - m_i . theta_l only,
since the entropy and carrier terms of p_i do not depend on the center.
Centers are moment projections of the cluster's weighted sub-mixture.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import expfam
from .densities import DEFAULT_GRID_N, WeightedSet, default_grid
from .divergences import jsd, kld
from .expfam import EFMember, EFMixture, ExpFamily, MomentSummary

MODES = ("closed_form", "numeric")
DIVERGENCES = ("kld", "reverse_kld")


class ClusteringError(ValueError):
    pass


@dataclass
class ClusterState:
    k: int
    centers: list
    assignment: np.ndarray
    objective: float
    iteration: int
    trace: list = field(default_factory=list)
    converged: bool = False
    flags: dict = field(default_factory=dict)
    history: list = field(default_factory=list)  # centers used at each trace row

    def cluster_weights(self, weights) -> np.ndarray:
        return np.array(
            [math.fsum(np.asarray(weights)[self.assignment == l]) for l in range(self.k)]
        )

    def to_dict(self) -> dict:
        return {
            "k": self.k,
            "centers": [expfam.member_to_dict(c) for c in self.centers],
            "assignment": [int(a) for a in self.assignment],
            "objective": self.objective,
            "iteration": self.iteration,
            "converged": self.converged,
            "flags": dict(self.flags),
        }


def summarize(members: WeightedSet, family: ExpFamily, grid=None) -> list[MomentSummary]:
    return [expfam.moment_summary(p, family, grid=grid) for p in members.members]


def _check_centers(centers, family=None):
    fam = family or centers[0].family
    for c in centers:
        if c.family != fam:
            raise expfam.FamilyMismatch("centers must share one family")
    return fam


def kld_matrix(members: WeightedSet, centers, mode: str = "closed_form", summaries=None, grid=None):
    """KLD(p_i : q_l) for every member/center pair.

    ``closed_form`` uses the semi-closed expression from moment summaries,
    ``numeric`` integrates on a grid covering members and centers.
    """
    if mode not in MODES:
        raise ClusteringError(f"unknown predicate mode {mode!r}")
    fam = _check_centers(centers)
    if mode == "closed_form":
        summaries = summaries or summarize(members, fam)
        return np.array([[expfam.semi_closed_kld(s, c) for c in centers] for s in summaries])
    if grid is None:
        grid = default_grid(list(members.members) + list(centers), DEFAULT_GRID_N)
    return np.array([[kld(p, c, grid=grid) for c in centers] for p in members.members])


def assign(
    members: WeightedSet,
    centers,
    mode: str = "closed_form",
    summaries=None,
    grid=None,
    divergence: str = "kld",
):
    """Index of the closest center for every member, lowest index on ties.

    ``closed_form`` never evaluates a divergence: for KLD(p_i : q_l) it ranks
    F(theta_l) - m_i . theta_l, for KLD(q_l : p_i) it ranks F*(eta_l) - theta_i . eta_l.
    """
    if mode not in MODES:
        raise ClusteringError(f"unknown predicate mode {mode!r}")
    fam = _check_centers(centers)
    if mode == "numeric":
        if divergence != "kld":
            raise ClusteringError("numeric predicate is implemented for KLD only")
        return np.argmin(kld_matrix(members, centers, "numeric", grid=grid), axis=1)
    if divergence == "kld":
        summaries = summaries or summarize(members, fam)
        score = np.array([c.F for c in centers])
        coef = np.array([c.theta for c in centers])
        points = [s.m_p for s in summaries]
    else:
        score = np.array([fam.Fstar(c.eta) for c in centers])
        coef = np.array([c.eta for c in centers])
        points = [p.theta for p in members.members]
    return np.array([int(np.argmin(score - coef @ x)) for x in points], dtype=int)


def divergence_values(members: WeightedSet, centers, assignment, summaries, divergence: str = "kld"):
    """D[p_i : q_a(i)] (or its reverse) for every member."""
    out = []
    for i, l in enumerate(assignment):
        c = centers[l]
        if divergence == "kld":
            out.append(expfam.semi_closed_kld(summaries[i], c))
        else:
            out.append(expfam.ef_kld(c, members.members[i]))
    return out


def objective(members: WeightedSet, centers, assignment, summaries, divergence: str = "kld") -> float:
    """sum_i w_i D[p_i : q_a(i)]."""
    vals = divergence_values(members, centers, assignment, summaries, divergence)
    return math.fsum(w * v for w, v in zip(members.weights, vals))


def update_centers(
    members: WeightedSet,
    assignment,
    k: int,
    family: ExpFamily,
    summaries=None,
    divergence: str = "kld",
) -> list:
    """Exact minimizer of each cluster's weighted divergence sum.

    ``kld``: grad F* of the pooled moment.  ``reverse_kld``: weighted average of
    natural parameters (members must belong to ``family``).  Empty clusters
    come back as ``None``.
    """
    w = members.weights
    assignment = np.asarray(assignment)
    if divergence == "kld":
        summaries = summaries or summarize(members, family)
        rows = np.array([s.m_p for s in summaries])
    else:
        for p in members.members:
            if not isinstance(p, EFMember) or p.family != family:
                raise expfam.FamilyMismatch("reverse KLD centers need in-family members")
        rows = np.array([p.theta for p in members.members])
    centers = []
    for l in range(k):
        idx = np.flatnonzero(assignment == l)
        if idx.size == 0:
            centers.append(None)
            continue
        wl = w[idx]
        tot = math.fsum(wl)
        avg = np.array([math.fsum(col) for col in (wl[:, None] * rows[idx]).T]) / tot
        if divergence == "kld":
            centers.append(expfam.project_moments(family, avg))
        else:
            centers.append(EFMember(family, avg))
    return centers


def _own_center(i, members, family, summaries, divergence):
    p = members.members[i]
    if divergence == "reverse_kld":
        return EFMember(family, p.theta)
    return expfam.project_moments(family, summaries[i].m_p)


def kmeanspp(points: np.ndarray, weights: np.ndarray, k: int, seed: int = 0) -> list[int]:
    """k-means++ seeding (weighted, Euclidean) returning member indices."""
    rng = np.random.default_rng(seed)
    n = len(points)
    chosen = [int(rng.choice(n, p=weights / weights.sum()))]
    d2 = np.sum((points - points[chosen[0]]) ** 2, axis=1)
    while len(chosen) < k:
        prob = weights * d2
        tot = prob.sum()
        if not tot > 0:
            rest = [i for i in range(n) if i not in chosen]
            chosen.append(rest[0])
            continue
        j = int(rng.choice(n, p=prob / tot))
        chosen.append(j)
        d2 = np.minimum(d2, np.sum((points - points[j]) ** 2, axis=1))
    return chosen


def cluster(
    members: WeightedSet,
    k: int,
    family: ExpFamily,
    seed: int = 0,
    max_iters: int = 100,
    divergence: str = "kld",
    init_indices=None,
    mode: str = "closed_form",
) -> ClusterState:
    """Alternate assignment and center update until the assignment is fixed.

    Seeding is k-means++ over moment vectors unless ``init_indices`` names
    the seed members.  The trace holds ``(iteration, objective, residual)``
    rows where residual is the relative objective decrease.
    """
    n = len(members)
    if k < 1 or k > n:
        raise ClusteringError(f"k must lie in [1, {n}], got {k}")
    if divergence not in DIVERGENCES:
        raise ClusteringError(f"unknown clustering divergence {divergence!r}")
    summaries = summarize(members, family)
    points = np.array([s.m_p for s in summaries])
    if init_indices is None:
        init_indices = kmeanspp(points, members.weights, k, seed)
    init_indices = [int(i) for i in init_indices]
    if len(init_indices) != k or len(set(init_indices)) != k:
        raise ClusteringError("init_indices must name k distinct members")
    flags: dict = {}
    if k > 1 and np.all(points == points[0]):
        flags["duplicate_centers"] = True
    centers = [_own_center(i, members, family, summaries, divergence) for i in init_indices]

    def step_assign(cs):
        a = assign(members, cs, mode, summaries, divergence=divergence)
        return objective(members, cs, a, summaries, divergence), a

    obj, a = step_assign(centers)
    trace = [(0, obj, math.nan)]
    history = [centers]
    converged = False
    it = 0
    for it in range(1, max_iters + 1):
        new = update_centers(members, a, k, family, summaries, divergence)
        if any(c is None for c in new):
            new = _repair(new, members, a, family, summaries, divergence)
            flags["repaired"] = flags.get("repaired", 0) + 1
        centers = new
        prev = obj
        obj, a_new = step_assign(centers)
        trace.append((it, obj, (prev - obj) / prev if prev > 0 else 0.0))
        history.append(centers)
        if np.array_equal(a_new, a):
            converged = True
            a = a_new
            break
        a = a_new
    return ClusterState(k, centers, a, obj, it, trace, converged, flags, history)


def _repair(centers, members, assignment, family, summaries, divergence):
    """Reseed empty centers at the members farthest from their own center."""
    d = divergence_values(members, centers, assignment, summaries, divergence)
    order = sorted(range(len(d)), key=lambda i: (-d[i], i))
    out = list(centers)
    used = set()
    for l, c in enumerate(out):
        if c is None:
            i = next(j for j in order if j not in used)
            used.add(i)
            out[l] = _own_center(i, members, family, summaries, divergence)
    return out


@dataclass
class QuantizeResult:
    state: ClusterState
    simplified: EFMixture
    jsd: float

    def to_dict(self) -> dict:
        d = self.state.to_dict()
        d["mixture"] = expfam.member_to_dict(self.simplified)
        d["jsd"] = self.jsd
        return d


def quantize_mixture(
    mixture: EFMixture,
    k: int,
    family: ExpFamily | None = None,
    seed: int = 0,
    max_iters: int = 100,
    init_indices=None,
    grid=None,
) -> QuantizeResult:
    """Replace a mixture's components by k clustered centers.

    The simplified mixture carries the aggregated cluster weights; the JSD
    between original and simplified mixture is reported as a diagnostic.
    """
    family = family or mixture.components[0].family
    members = WeightedSet(tuple(mixture.components), mixture.weights)
    state = cluster(members, k, family, seed=seed, max_iters=max_iters, init_indices=init_indices)
    cw = state.cluster_weights(mixture.weights)
    keep = [l for l in range(k) if cw[l] > 0]
    simplified = EFMixture.build(cw[keep], [state.centers[l] for l in keep])
    if grid is None:
        grid = default_grid([mixture, simplified], 20001)
    return QuantizeResult(state, simplified, jsd(mixture, simplified, grid=grid))
