import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.special import erf

from infradius.densities import (
    DiscreteDensity,
    GridDensity,
    IncompatibleSupports,
    InvalidDensity,
    WeightedSet,
    align,
    density_from_dict,
    density_to_dict,
    exact_weighted_sum,
    integrate,
    make_grid,
    mixture,
    set_from_dict,
    upper_envelope,
)
from infradius.divergences import total_variation
from infradius.expfam import EFMixture, exponential, gaussian, rayleigh, weibull


def test_integrate_constant_and_linear():
    xs = np.linspace(0, 1, 101)
    assert integrate(np.ones_like(xs), xs) == pytest.approx(1.0, abs=1e-15)
    assert integrate(xs, xs) == pytest.approx(0.5, abs=1e-15)


def test_integrate_standard_normal():
    xs = np.linspace(-8, 8, 2001)
    v = np.exp(-xs**2 / 2) / math.sqrt(2 * math.pi)
    assert integrate(v, xs) == pytest.approx(1.0, abs=1e-8)


def test_integrate_rejects_nonfinite():
    with pytest.raises(ValueError):
        integrate([1.0, math.nan, 1.0], [0, 1, 2])
    with pytest.raises(ValueError):
        integrate([1.0, math.inf, 1.0], [0, 1, 2])


def test_discrete_validation():
    with pytest.raises(InvalidDensity):
        DiscreteDensity([0.5, 0.6])
    with pytest.raises(InvalidDensity):
        DiscreteDensity([1.2, -0.2])
    p = DiscreteDensity([1 - 1e-301, 1e-301])
    assert p.probs[1] == 0.0
    assert not p.full_support
    assert DiscreteDensity([0.5, 0.5]).full_support


def test_grid_renormalized_and_normalizer_kept():
    xs = np.linspace(0, 1, 11)
    g = GridDensity(xs, 2 * np.ones_like(xs))
    assert integrate(g.values, g.xs) == pytest.approx(1.0, abs=1e-12)
    assert g.normalizer == pytest.approx(2.0)
    with pytest.raises(InvalidDensity):
        GridDensity([0, 2, 1], [1, 1, 1])
    with pytest.raises(InvalidDensity):
        GridDensity([0, 1, 2], [0, 0, 0])


def test_mixture_examples():
    p = DiscreteDensity([0.3, 0.7])
    assert mixture(WeightedSet.uniform([p])) is p
    m = mixture(WeightedSet.uniform([DiscreteDensity([1, 0]), DiscreteDensity([0, 1])]))
    assert np.array_equal(m.probs, [0.5, 0.5])


def test_mixture_of_gaussians_on_grid():
    xs = np.linspace(-10, 10, 4001)
    m = mixture(WeightedSet.uniform([gaussian(-1, 1), gaussian(1, 1)]), grid=xs)
    assert integrate(m.values, m.xs) == pytest.approx(1.0, abs=1e-8)
    # raw sum integrated before renormalization is also 1 on a wide grid
    assert m.normalizer == pytest.approx(1.0, abs=1e-8)


def test_incompatible_supports():
    with pytest.raises(IncompatibleSupports):
        mixture(WeightedSet.uniform([DiscreteDensity([1.0]), DiscreteDensity([0.5, 0.5])]))
    with pytest.raises(IncompatibleSupports):
        align(DiscreteDensity([0.5, 0.5]), gaussian(0, 1))
    a = GridDensity(np.linspace(0, 1, 5), np.ones(5))
    b = GridDensity(np.linspace(0, 2, 5), np.ones(5))
    with pytest.raises(IncompatibleSupports):
        align(a, b)


def test_upper_envelope_examples():
    p = DiscreteDensity([0.2, 0.3, 0.5])
    env, z = upper_envelope(WeightedSet.uniform([p, p]))
    assert np.allclose(env.probs, p.probs) and z == pytest.approx(1.0)
    env, z = upper_envelope(WeightedSet.uniform([DiscreteDensity([1, 0]), DiscreteDensity([0, 1])]))
    assert np.array_equal(env.probs, [0.5, 0.5]) and z == 2.0


def test_upper_envelope_normals_is_one_plus_tv():
    xs = np.linspace(-12, 13, 50001)
    _, z = upper_envelope(WeightedSet.uniform([gaussian(0, 1), gaussian(1, 1)]), grid=xs)
    tv_oracle = erf(0.5 / math.sqrt(2))
    assert tv_oracle == pytest.approx(0.38292492254802624, abs=1e-15)
    assert z == pytest.approx(1 + tv_oracle, abs=1e-8)


@settings(max_examples=100, deadline=None)
@given(st.lists(st.floats(0.0, 1.0), min_size=4, max_size=4), st.lists(st.floats(0.0, 1.0), min_size=4, max_size=4))
def test_envelope_normalizer_matches_tv(a, b):
    if sum(a) == 0 or sum(b) == 0:
        return
    p = DiscreteDensity(np.array(a) / math.fsum(a))
    q = DiscreteDensity(np.array(b) / math.fsum(b))
    _, z = upper_envelope(WeightedSet.uniform([p, q]))
    assert z == pytest.approx(1 + total_variation(p, q), abs=1e-12)


@settings(max_examples=100, deadline=None)
@given(st.integers(2, 6), st.integers(0, 10_000), st.randoms(use_true_random=False))
def test_mixture_permutation_bit_identical(n, seed, rnd):
    rng = np.random.default_rng(seed)
    members = [DiscreteDensity(rng.dirichlet(np.ones(5))) for _ in range(n)]
    w = rng.dirichlet(np.ones(n))
    perm = list(range(n))
    rnd.shuffle(perm)
    a = mixture(WeightedSet.normalized(members, w))
    b = mixture(WeightedSet.normalized([members[i] for i in perm], w[perm]))
    assert np.array_equal(a.probs, b.probs)


def test_exact_weighted_sum_order_free():
    rows = np.array([[1e16, 1.0], [1.0, 1.0], [-1e16, 1.0]])
    w = np.ones(3)
    assert np.array_equal(exact_weighted_sum(w, rows), [1.0, 3.0])
    assert np.array_equal(exact_weighted_sum(w, rows[::-1]), [1.0, 3.0])


def test_weighted_set_validation():
    p = DiscreteDensity([1.0])
    with pytest.raises(ValueError):
        WeightedSet((), [])
    with pytest.raises(ValueError):
        WeightedSet((p, p), [0.5, 0.6])
    with pytest.raises(ValueError):
        WeightedSet((p, p), [1.0, 0.0])
    assert np.allclose(WeightedSet.normalized([p, p], [1, 3]).weights, [0.25, 0.75])


def test_make_grid():
    assert make_grid(0, 1, 3).tolist() == [0.0, 0.5, 1.0]
    assert make_grid(1, 100, 3, log_spaced=True) == pytest.approx([1, 10, 100])
    with pytest.raises(ValueError):
        make_grid(1, 0, 5)
    with pytest.raises(ValueError):
        make_grid(0, 1, 5, log_spaced=True)


@pytest.mark.parametrize(
    "obj, expected",
    [
        ({"type": "gaussian", "mu": 0, "sigma": 1}, gaussian(0, 1)),
        ({"type": "exponential", "rate": 2}, exponential(2)),
        ({"type": "rayleigh", "scale": 1.5}, rayleigh(1.5)),
        ({"type": "weibull", "shape": 2, "scale": 1}, weibull(2, 1)),
    ],
)
def test_json_members(obj, expected):
    d = density_from_dict(obj)
    assert d.family == expected.family
    assert np.allclose(d.theta, expected.theta)
    again = density_from_dict(json.loads(json.dumps(density_to_dict(d))))
    assert np.allclose(again.theta, d.theta)


def test_json_grid_discrete_mixture():
    g = density_from_dict({"type": "grid", "lo": -8, "hi": 8, "n": 2001, "family": {"type": "gaussian", "mu": 0, "sigma": 1}})
    assert isinstance(g, GridDensity) and g.xs.size == 2001
    back = density_from_dict(json.loads(json.dumps(density_to_dict(g))))
    assert np.allclose(back.values, g.values, rtol=1e-14)
    d = density_from_dict({"type": "discrete", "probs": [0.25, 0.75]})
    assert np.array_equal(density_from_dict(density_to_dict(d)).probs, d.probs)
    mx = density_from_dict(
        {"type": "mixture", "weights": [1, 3], "components": [{"type": "gaussian", "mu": 0, "sigma": 1}] * 2}
    )
    assert isinstance(mx, EFMixture)
    assert np.allclose(mx.weights, [0.25, 0.75])


def test_set_from_dict_defaults_to_uniform():
    s = set_from_dict({"members": [{"type": "discrete", "probs": [1, 0]}, {"type": "discrete", "probs": [0, 1]}]})
    assert np.array_equal(s.weights, [0.5, 0.5])
