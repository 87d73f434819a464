import itertools
import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from numpy.testing import assert_allclose

from steinitz_lab.errors import DivergentSeries, SpecError, ToleranceUnreachable
from steinitz_lab.series import (
    ABSOLUTE,
    CONDITIONAL,
    DIVERGENT,
    ScalarStream,
    SeriesSpec,
    classify_stream,
    enumerate_Zm,
    make_series,
    partial_sum,
    series_sum,
    stream_sum,
    term,
    term_envelope,
    terms,
)


def test_term_examples(harmonic_alt):
    s = make_series(2, ([1, 0], harmonic_alt))
    assert_allclose(term(s, 3), [1 / 3, 0])
    s2 = make_series(2, ([1, 0], harmonic_alt), ([0, 1], ScalarStream("power", alpha=2.0)))
    assert_allclose(term(s2, 2), [-0.5, 0.25])
    fin = make_series(1, ([1], ScalarStream("finite", values=(1.0, 2.0))))
    assert term(fin, 5)[0] == 0.0


def test_classify_rule_table():
    assert classify_stream(ScalarStream("alternating_power", alpha=1.0)) == CONDITIONAL
    assert classify_stream(ScalarStream("alternating_power", alpha=1.5)) == ABSOLUTE
    assert classify_stream(ScalarStream("power", alpha=2.0)) == ABSOLUTE
    assert classify_stream(ScalarStream("power", alpha=1.0)) == DIVERGENT
    assert classify_stream(ScalarStream("geometric", ratio=-0.5)) == ABSOLUTE


@pytest.mark.parametrize(
    "kwargs",
    [
        {"family": "power"},
        {"family": "power", "alpha": -1.0},
        {"family": "geometric", "ratio": 1.0},
        {"family": "finite"},
        {"family": "finite", "values": (1.0,), "alpha": 2.0},
        {"family": "laurent", "alpha": 2.0},
        {"family": "power", "alpha": 2.0, "scale": 0.0},
    ],
)
def test_stream_validation(kwargs):
    with pytest.raises(SpecError):
        ScalarStream(**kwargs)


def test_divergent_component_rejected():
    with pytest.raises(DivergentSeries):
        make_series(1, ([1], ScalarStream("power", alpha=1.0)))


def test_spec_json_round_trip(r2_series):
    again = SeriesSpec.loads(r2_series.dumps())
    assert again.to_dict() == r2_series.to_dict()


@pytest.mark.parametrize(
    "doc",
    [
        {"dimension": 2, "components": [], "extra": 1},
        {"dimension": "2", "components": []},
        {"dimension": 2, "components": [{"direction": [1, 0]}]},
        {"dimension": 2, "components": [{"direction": [1], "stream": {"family": "power", "alpha": 2}}]},
        {"dimension": 1, "components": [{"direction": [1], "stream": {"family": "power", "alpha": "2"}}]},
        {"dimension": 1, "components": [{"direction": [0], "stream": {"family": "power", "alpha": 2}}]},
        {"dimension": 1, "components": [{"direction": [1], "stream": {"family": "power", "alpha": 2, "beta": 1}}]},
    ],
)
def test_spec_parse_errors(doc):
    with pytest.raises(SpecError):
        SeriesSpec.from_dict(doc)


def test_partial_sum_examples(harmonic_alt):
    s = make_series(2, ([1, 0], harmonic_alt))
    assert_allclose(partial_sum(s, 2), [0.5, 0.0])
    assert_allclose(partial_sum(s, 0), [0.0, 0.0])


def test_partial_sum_matches_naive_loop(rng):
    for _ in range(20):
        d = int(rng.integers(1, 4))
        comps = []
        for _ in range(int(rng.integers(1, 4))):
            fam = rng.choice(["power", "alternating_power", "geometric"])
            if fam == "geometric":
                stream = ScalarStream("geometric", ratio=float(rng.uniform(-0.9, 0.9)), scale=float(rng.uniform(0.5, 2)))
            elif fam == "power":
                stream = ScalarStream("power", alpha=float(rng.uniform(1.1, 3)))
            else:
                stream = ScalarStream("alternating_power", alpha=float(rng.uniform(0.5, 2)))
            comps.append((rng.standard_normal(d), stream))
        s = make_series(d, *comps)
        N = int(rng.integers(0, 200))
        naive = np.zeros(d)
        for k in range(1, N + 1):
            naive += term(s, k)
        assert_allclose(partial_sum(s, N), naive, atol=1e-12)


def test_sum_examples(harmonic_alt):
    v, err = stream_sum(harmonic_alt, 1e-6)
    assert err <= 1e-6 and abs(v - math.log(2)) <= 1e-6
    v, err = stream_sum(ScalarStream("power", alpha=2.0), 1e-6)
    assert err <= 1e-6 and abs(v - math.pi**2 / 6) <= 1e-6
    v, err = stream_sum(ScalarStream("geometric", ratio=0.5), 1e-12)
    assert v == 1.0


@pytest.mark.parametrize("alpha", [0.3, 0.5, 1.0, 2.5])
def test_alternating_sum_certified(alpha):
    if alpha == 1.0:
        exact = math.log(2)
    else:
        exact = float((1 - mpmath.power(2, 1 - alpha)) * mpmath.zeta(alpha))
    v, err = stream_sum(ScalarStream("alternating_power", alpha=alpha, scale=-2.0), 1e-10)
    assert err <= 1e-10
    assert abs(v + 2 * exact) <= err


@pytest.mark.parametrize("alpha", [1.01, 1.5, 2.0, 3.0])
def test_power_sum_certified(alpha):
    tol = 1e-4 if alpha < 1.1 else 1e-9
    v, err = stream_sum(ScalarStream("power", alpha=alpha), tol)
    assert err <= tol
    assert abs(v - float(mpmath.zeta(alpha))) <= err


def test_tolerance_unreachable():
    with pytest.raises(ToleranceUnreachable) as exc:
        # below the roundoff floor of the bound, so no N suffices
        stream_sum(ScalarStream("power", alpha=1.5), 1e-17, cap=10**5)
    assert exc.value.required_terms > 10**5


def test_series_sum_vector(r2_series):
    v, err = series_sum(r2_series, 1e-9)
    assert err <= 1e-9
    assert_allclose(v, [math.log(2), math.pi**2 / 6], atol=1e-9)


def test_envelope_bounds_terms(r2_series):
    for k in (1, 5, 40):
        env = term_envelope(r2_series, k)
        norms = np.linalg.norm(terms(r2_series, np.arange(k, k + 500)), axis=1)
        assert np.all(norms <= env + 1e-15)


def _brute_cloud(values):
    sums = {0.0}
    for r in range(1, len(values) + 1):
        for combo in itertools.combinations(values, r):
            sums.add(round(math.fsum(combo), 12))
    return sums


def test_zm_examples():
    s = make_series(1, ([1], ScalarStream("finite", values=(1.0, -1.0))))
    cloud = enumerate_Zm(s, 1, 2)
    assert sorted(cloud.points[:, 0].tolist()) == [-1.0, 0.0, 1.0]
    empty = enumerate_Zm(s, 3, 2)
    assert empty.points.tolist() == [[0.0]]


def test_zm_matches_exhaustive(harmonic_alt):
    s = make_series(1, ([1], harmonic_alt))
    cloud = enumerate_Zm(s, 3, 12)
    vals = [harmonic_alt.term(k) for k in range(3, 13)]
    assert {round(x, 12) for x in cloud.points[:, 0]} == _brute_cloud(vals)


def test_zm_monotone_in_horizon(r2_series):
    small = enumerate_Zm(r2_series, 2, 8)
    big = enumerate_Zm(r2_series, 2, 9)
    assert all(big.contains(p) for p in small.points)


def test_zm_cardinality_fallback(harmonic_alt):
    s = make_series(1, ([1], harmonic_alt))
    cloud = enumerate_Zm(s, 1, 16, max_points=100)
    assert cloud.truncated and len(cloud) == 100
    assert cloud.contains([0.0]) and cloud.contains([1.0])


@settings(max_examples=40, deadline=None)
@given(st.lists(st.integers(-8, 8), min_size=1, max_size=6))
def test_zm_property_integer_values(vals):
    s = make_series(1, ([1], ScalarStream("finite", values=tuple(float(v) for v in vals))))
    cloud = enumerate_Zm(s, 1, len(vals))
    assert {round(x, 12) for x in cloud.points[:, 0]} == _brute_cloud([float(v) for v in vals])
