import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate

from infradius.densities import DiscreteDensity, WeightedSet
from infradius.divergences import (
    DivergenceSpec,
    ParameterError,
    bhattacharyya_coefficient,
    generalized_bhattacharyya,
    js_diversity,
    kld,
    total_variation,
)
from infradius.expfam import exponential, gaussian
from infradius.means import MeanSpec
from infradius.radius import (
    RadiusError,
    SearchConfig,
    bregman_information,
    bregman_information_gap,
    decomposition_gap,
    generalized_radius,
    mirror_descent,
    objective_radius,
    radius_upper_bound,
    sibson_radius,
    sibson_radius_ef_1_over_k,
    sibson_two_point,
)

ALPHAS = [0.25, 0.5, 0.75, 1.0, 2.0, 4.0, math.inf]


def random_set(seed, n=3, m=5, conc=1.0):
    rng = np.random.default_rng(seed)
    members = [DiscreteDensity(rng.dirichlet(np.ones(m) * conc)) for _ in range(n)]
    return WeightedSet.normalized(members, rng.uniform(0.1, 1, n)), rng


# -- closed forms


@pytest.mark.parametrize("alpha", ALPHAS)
def test_identical_members(alpha):
    p = DiscreteDensity([0.1, 0.6, 0.3])
    r = sibson_radius(WeightedSet.normalized([p, p, p], [1, 2, 3]), alpha)
    assert r.value == pytest.approx(0.0, abs=1e-14)
    assert np.allclose(r.centroid.probs, p.probs, atol=1e-14)
    assert r.iterations == 0


@pytest.mark.parametrize("alpha", ALPHAS)
def test_disjoint_atoms_saturate_bound(alpha):
    s = WeightedSet.uniform([DiscreteDensity(np.eye(4)[i]) for i in range(4)])
    assert sibson_radius(s, alpha).value == pytest.approx(math.log(4), abs=1e-14)
    assert radius_upper_bound(s.weights, alpha) == pytest.approx(math.log(4), abs=1e-14)


def test_alpha_one_is_js_diversity():
    s, _ = random_set(1)
    r = sibson_radius(s, 1)
    assert r.value == pytest.approx(js_diversity(s), abs=1e-14)
    assert np.allclose(r.centroid.probs, s.mixture().probs)


def test_alpha_infinity_is_log_one_plus_tv():
    rng = np.random.default_rng(2)
    for _ in range(10):
        p, q = (DiscreteDensity(rng.dirichlet(np.ones(6))) for _ in range(2))
        want = math.log1p(total_variation(p, q))
        assert sibson_radius(WeightedSet.uniform([p, q]), math.inf).value == pytest.approx(want, abs=1e-14)
        # weight independent
        assert sibson_radius(WeightedSet.normalized([p, q], [0.9, 0.1]), math.inf).value == pytest.approx(want, abs=1e-14)


def test_gaussian_pair_order_half():
    xs = np.linspace(-12, 13, 50001)
    s = WeightedSet.uniform([gaussian(0, 1), gaussian(1, 1)])
    want = -math.log(0.5 + 0.5 * math.exp(-1 / 8))
    assert want == pytest.approx(0.06054814524277621, abs=1e-15)
    assert sibson_radius(s, 0.5, grid=xs).value == pytest.approx(want, abs=1e-6)
    # power-mean integral by adaptive quadrature as a second oracle
    f = lambda x: (0.5 * math.sqrt(gaussian(0, 1).pdf(np.array([x]))[0]) + 0.5 * math.sqrt(gaussian(1, 1).pdf(np.array([x]))[0])) ** 2
    z = integrate.quad(f, -30, 30, epsabs=1e-14)[0]
    assert -math.log(z) == pytest.approx(want, abs=1e-10)


def test_invalid_alpha():
    s, _ = random_set(3)
    for a in [0.0, -1.0, math.nan]:
        with pytest.raises(RadiusError):
            sibson_radius(s, a)


# -- decomposition identity


@pytest.mark.parametrize("alpha", ALPHAS)
def test_decomposition_identity(alpha):
    for seed in range(10):
        s, rng = random_set(seed)
        c = DiscreteDensity(rng.dirichlet(np.ones(5)))
        lhs, rhs = decomposition_gap(s, alpha, c)
        assert lhs == pytest.approx(rhs, abs=1e-8)
        r = sibson_radius(s, alpha)
        assert decomposition_gap(s, alpha, r.centroid) == pytest.approx((0.0, 0.0), abs=1e-12)


def test_decomposition_alpha_one_is_kld_of_mixture():
    s, rng = random_set(4)
    c = DiscreteDensity(rng.dirichlet(np.ones(5)))
    lhs, _ = decomposition_gap(s, 1, c)
    assert lhs == pytest.approx(kld(s.mixture(), c), abs=1e-12)


@pytest.mark.parametrize("alpha", [0.25, 0.5, 0.75, 2.0, 4.0, math.inf])
def test_centroid_local_optimality(alpha):
    s, rng = random_set(5)
    r = sibson_radius(s, alpha)
    best = objective_radius(s, alpha, r.centroid)
    assert best == pytest.approx(r.value, abs=1e-12)
    c = r.centroid.probs
    for _ in range(100):
        d = rng.normal(size=c.size)
        d -= d.mean()
        d /= np.abs(d).sum()
        cand = c + 1e-4 * d
        if np.any(cand <= 0):
            continue
        assert objective_radius(s, alpha, DiscreteDensity(cand / cand.sum())) >= best - 1e-12


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 10**6), st.sampled_from(ALPHAS), st.integers(2, 5))
def test_radius_below_upper_bound(seed, alpha, n):
    s, _ = random_set(seed, n=n, conc=0.3)
    assert sibson_radius(s, alpha).value <= radius_upper_bound(s.weights, alpha) + 1e-9


def test_upper_bound_examples():
    w = np.array([0.9, 0.1])
    assert radius_upper_bound(w, 2) == pytest.approx(2 * math.log(math.sqrt(0.9) + math.sqrt(0.1)), abs=1e-15)
    assert radius_upper_bound(w, 1) == pytest.approx(-(0.9 * math.log(0.9) + 0.1 * math.log(0.1)), abs=1e-15)
    assert radius_upper_bound(np.full(3, 1 / 3), 0.3) == pytest.approx(math.log(3), abs=1e-15)


# -- two-point radius


def test_two_point_limits_and_symmetry():
    rng = np.random.default_rng(6)
    p, q = (DiscreteDensity(rng.dirichlet(np.ones(6))) for _ in range(2))
    assert sibson_two_point(p, p, 2.0) == pytest.approx(0.0, abs=1e-14)
    js = js_diversity(WeightedSet.uniform([p, q]))
    assert sibson_two_point(p, q, 1 + 1e-6) == pytest.approx(js, abs=1e-4)
    assert sibson_two_point(p, q, 1e6) == pytest.approx(math.log1p(total_variation(p, q)), abs=1e-4)
    for a in [0.3, 2.0, 7.0, math.inf]:
        assert sibson_two_point(p, q, a) == sibson_two_point(q, p, a)


def test_two_point_scales_generalized_bhattacharyya():
    rng = np.random.default_rng(7)
    p, q = (DiscreteDensity(rng.dirichlet(np.ones(6))) for _ in range(2))
    for a in [0.5, 2.0, 3.0]:
        d = generalized_bhattacharyya(p, q, MeanSpec.power(a, (0.5, 0.5)))
        assert sibson_two_point(p, q, a) == pytest.approx(a / (1 - a) * d, abs=1e-9)


# -- exponential-family closed form of order 1/k


def test_one_over_k_identical():
    g = gaussian(0.3, 1.4)
    for k in [2, 3, 5]:
        assert sibson_radius_ef_1_over_k(g.theta, g.theta, g.family, k) == pytest.approx(0.0, abs=1e-14)


def test_one_over_k_gaussian_k2():
    p, q = gaussian(0, 1), gaussian(1, 1)
    v = sibson_radius_ef_1_over_k(p.theta, q.theta, p.family, 2)
    c = bhattacharyya_coefficient(p, q, 0.5, grid=np.linspace(-12, 13, 50001))
    assert v == pytest.approx(-math.log(0.5 + 0.5 * math.exp(-1 / 8)), abs=1e-14)
    assert v == pytest.approx(-math.log(0.5 + 0.5 * c), abs=1e-6)
    xs = np.linspace(-12, 13, 50001)
    assert v == pytest.approx(sibson_radius(WeightedSet.uniform([p, q]), 0.5, grid=xs).value, abs=1e-6)


def test_one_over_k_exponential_k3():
    p, q = exponential(1), exponential(2)
    v = sibson_radius_ef_1_over_k(p.theta, q.theta, p.family, 3)
    xs = np.linspace(0, 60, 600001)
    assert v == pytest.approx(sibson_radius(WeightedSet.uniform([p, q]), 1 / 3, grid=xs).value, abs=1e-6)
    # frozen value of the binomial sum, cross-checked against adaptive quadrature of the power mean
    f = lambda x: (0.5 * math.exp(-x / 3) + 0.5 * (2 * math.exp(-2 * x)) ** (1 / 3)) ** 3
    z = integrate.quad(f, 0, np.inf, epsabs=1e-14)[0]
    assert v == pytest.approx(-0.5 * math.log(z), abs=1e-12)


def test_one_over_k_rejects_bad_k():
    g = gaussian(0, 1)
    for k in [1, 2.5, 0]:
        with pytest.raises(RadiusError):
            sibson_radius_ef_1_over_k(g.theta, g.theta, g.family, k)


# -- variational radius


def test_mirror_descent_quadratic():
    target = np.array([0.2, 0.3, 0.5])
    res = mirror_descent(lambda x: float(np.sum((x - target) ** 2)), lambda x: 2 * (x - target), np.full(3, 1 / 3))
    assert np.allclose(res.x, target, atol=1e-5)
    obj = [row[1] for row in res.trace]
    assert all(b <= a for a, b in zip(obj, obj[1:]))


def test_generalized_identical_members():
    p = DiscreteDensity([0.2, 0.5, 0.3])
    r = generalized_radius(WeightedSet.uniform([p, p]), MeanSpec.arithmetic((0.5, 0.5)), DivergenceSpec("kld"))
    assert r.value == pytest.approx(0.0, abs=1e-12)
    assert np.allclose(r.centroid.probs, p.probs)


def test_generalized_arithmetic_kld_centroid_is_mixture():
    rng = np.random.default_rng(8)
    p, q = (DiscreteDensity(rng.dirichlet(np.ones(5))) for _ in range(2))
    r = generalized_radius(WeightedSet.uniform([p, q]), MeanSpec.arithmetic((0.5, 0.5)), DivergenceSpec("kld"))
    assert np.abs(r.centroid.probs - 0.5 * (p.probs + q.probs)).sum() <= 1e-6


@pytest.mark.parametrize("alpha", [0.5, 2.0, 3.0])
def test_generalized_renyi_recovers_sibson(alpha):
    s, _ = random_set(9, n=3, m=6)
    r = generalized_radius(s, MeanSpec.renyi(alpha, (1 / 3,) * 3), DivergenceSpec("renyi", alpha=alpha))
    assert r.converged
    assert r.value == pytest.approx(sibson_radius(s, alpha).value, abs=1e-6)
    obj = [row[1] for row in r.trace]
    assert all(b <= a + 1e-15 for a, b in zip(obj, obj[1:]))


def test_quasi_arithmetic_argmin_invariance():
    s, _ = random_set(10, n=3, m=5)
    w = tuple(s.weights)
    qa = generalized_radius(s, MeanSpec.quasi_arithmetic("exp", w, 2.0), DivergenceSpec("kld"))
    ar = generalized_radius(s, MeanSpec.arithmetic(w), DivergenceSpec("kld"))
    # the exp-type mean with parameter 2 is the Renyi-2 mean, not arithmetic
    ren = generalized_radius(s, MeanSpec.renyi(2.0, w), DivergenceSpec("kld"))
    assert np.allclose(qa.centroid.probs, ren.centroid.probs, atol=1e-6)
    assert np.abs(ar.centroid.probs - s.mixture().probs).sum() <= 1e-6


def test_generalized_rejects_non_homogeneous():
    s, _ = random_set(11)
    spec = DivergenceSpec("gen_bhattacharyya", mean=MeanSpec.geometric((0.5, 0.5)))
    with pytest.raises(ParameterError):
        generalized_radius(s, MeanSpec.arithmetic(tuple(s.weights)), spec)


def test_generalized_threads_match_serial():
    s, _ = random_set(12)
    w = tuple(s.weights)
    a = generalized_radius(s, MeanSpec.power(2.0, w), DivergenceSpec("tv"), SearchConfig(max_iters=200))
    b = generalized_radius(s, MeanSpec.power(2.0, w), DivergenceSpec("tv"), SearchConfig(max_iters=200, threads=3))
    assert a.value == b.value
    assert np.array_equal(a.centroid.probs, b.centroid.probs)


def test_generalized_diagnostics_and_dict():
    s, _ = random_set(13)
    r = generalized_radius(s, MeanSpec.arithmetic(tuple(s.weights)), DivergenceSpec("kld"))
    assert r.diagnostics["unique"] == "unknown"
    d = r.to_dict()
    assert set(d) >= {"value", "centroid", "iterations", "residual"}


# -- Bregman information


def test_bregman_information_examples():
    t = np.array([[1.0, 2.0], [1.0, 2.0]])
    assert bregman_information(t, None, "sq_norm")[0] == 0.0
    rng = np.random.default_rng(14)
    t = rng.normal(size=(6, 2))
    w = rng.dirichlet(np.ones(6))
    value, bar = bregman_information(t, w, "sq_norm")
    assert np.allclose(bar, w @ t)
    var = float(np.sum(w * np.sum((t - w @ t) ** 2, axis=1))) / 2
    assert value == pytest.approx(var, abs=1e-14)


def test_bregman_information_decomposition():
    rng = np.random.default_rng(15)
    for _ in range(20):
        thetas = [gaussian(rng.normal(), rng.uniform(0.5, 2)).theta for _ in range(4)]
        w = rng.dirichlet(np.ones(4))
        probe = gaussian(rng.normal(), rng.uniform(0.5, 2)).theta
        lhs, rhs = bregman_information_gap(np.array(thetas), w, "gaussian", probe)
        assert lhs == pytest.approx(rhs, abs=1e-10)


def test_reverse_kld_radius_is_bregman_information():
    # categorical members on 3 atoms: sum_i w_i KLD(c : p_i) is minimized at the natural-parameter average
    from infradius.expfam import categorical

    rng = np.random.default_rng(16)
    cats = [categorical(rng.dirichlet(np.ones(3))) for _ in range(3)]
    w = rng.dirichlet(np.ones(3))
    s = WeightedSet.normalized([DiscreteDensity(c.family.probs(c.theta)) for c in cats], w)
    r = generalized_radius(s, MeanSpec.arithmetic(tuple(w)), DivergenceSpec("reverse_kld"))
    value, _ = bregman_information(np.array([c.theta for c in cats]), w, "lse1")
    assert r.value == pytest.approx(value, abs=1e-8)
