import math

import numpy as np
import pytest
from numpy.testing import assert_allclose

from steinitz_lab.errors import IndexOutOfRange, SpecError, UndecidableFamily
from steinitz_lab.hilbert import WeightedHilbert, hs_norm
from steinitz_lab.koethe import (
    DiscScale,
    KoetheMatrix,
    build_hs_scale,
    dual_norm,
    hs_link,
    link_map,
    nuclearity_test,
    ratio_l1,
)


def test_power_grid_nuclear_minimal_witness():
    res = nuclearity_test(KoetheMatrix.power(), 6, 12)
    assert res.nuclear
    assert res.witness == {n: n + 2 for n in range(1, 7)}
    assert res.verdict() == "nuclear, m(n)=n+2"
    for n in range(1, 7):
        assert math.isinf(ratio_l1(KoetheMatrix.power(), n, n + 1)[0])
        assert res.ratio_sums[n] == pytest.approx(math.pi**2 / 6, abs=1e-9)


def test_constant_grid_not_nuclear():
    res = nuclearity_test(KoetheMatrix.constant_grid(3.0), 6, 12)
    assert not res.nuclear
    assert res.verdict() == "notNuclearWithin(6, 12)"


def test_geometric_grid_closed_form():
    A = KoetheMatrix.dyadic_geometric(8)
    res = nuclearity_test(A, 4, 8)
    assert res.nuclear and res.witness == {n: n + 1 for n in range(1, 5)}
    q = A.rate(1) / A.rate(2)
    assert res.ratio_sums[1] == pytest.approx(q / (1 - q), rel=1e-15)


def test_table_grid_undecidable():
    A = KoetheMatrix("table", table=((1, 1), (2, 3)))
    with pytest.raises(UndecidableFamily):
        nuclearity_test(A, 1, 2)
    assert_allclose(A.values(2, np.array([1, 2])), [2.0, 3.0])
    with pytest.raises(IndexOutOfRange):
        A.values(3, np.array([1]))


def test_grid_validation_and_json():
    with pytest.raises(SpecError):
        KoetheMatrix.geometric([0.9, 0.5])
    with pytest.raises(SpecError):
        KoetheMatrix("table", table=((2, 2), (1, 1)))
    with pytest.raises(SpecError):
        KoetheMatrix.from_dict({"family": "power", "rates": [1]})
    for A in (KoetheMatrix.power(2.0), KoetheMatrix.constant_grid(2.0), KoetheMatrix.dyadic_geometric(3)):
        assert KoetheMatrix.from_dict(A.to_dict()) == A
        assert A.check_monotone(6, 1000)


def test_dual_norm():
    A = KoetheMatrix.power()
    for i in (1, 2, 7):
        for n in (1, 2, 3):
            assert dual_norm({i: 1.0}, A, n) == pytest.approx(i ** (-n), rel=1e-15)
    assert dual_norm({}, A, 1) == 0.0
    assert dual_norm([0.0, 0.0], A, 1) == 0.0
    rng = np.random.default_rng(5)
    for _ in range(100):
        u, v = rng.standard_normal(6), rng.standard_normal(6)
        n = int(rng.integers(1, 4))
        assert dual_norm(u + v, A, n) <= dual_norm(u, A, n) + dual_norm(v, A, n) + 1e-15


def test_hs_scale_anchor():
    sc = build_hs_scale(KoetheMatrix.power(), 3, 4)
    assert sc.raw_links[0] == pytest.approx(math.sqrt(1 + 1 / 4 + 1 / 9), abs=1e-9)
    assert sc.rescale_factors[1] == pytest.approx(2 * math.sqrt(1 + 1 / 4 + 1 / 9), abs=1e-9)
    for n in range(1, sc.levels):
        assert hs_link(sc, n) <= 0.5 + 1e-12


def test_hs_scale_one_dimension():
    sc = build_hs_scale(KoetheMatrix.power(), 1, 3)
    assert sc.raw_links[0] == 1.0
    assert sc.rescale_factors[1] == 2.0


def test_scale_discs_nested_and_submultiplicative():
    for A in (KoetheMatrix.power(), KoetheMatrix.constant_grid(1.0), KoetheMatrix.dyadic_geometric(6)):
        sc = build_hs_scale(A, 5, 6)
        W = np.array([d.weights for d in sc.discs])
        assert np.all(np.diff(W, axis=0) <= 0)
        for n in range(1, 6):
            for m in range(n + 1, 7):
                assert hs_norm(link_map(sc, n, m)) <= 2.0 ** -(m - n) + 1e-12


def test_hs_link_examples():
    H = WeightedHilbert(np.ones(4))
    flat = DiscScale(4, (H, H), (1.0, 1.0))
    assert hs_link(flat, 1) == pytest.approx(2.0)
    # shrinking disc 1 (larger weights, smaller ball) lowers the link
    small = DiscScale(4, (H.dilate(0.5), H), (1.0, 1.0))
    assert hs_link(small, 1) < hs_link(flat, 1)
    with pytest.raises(IndexOutOfRange):
        hs_link(flat, 2)


def test_scale_round_trip():
    sc = build_hs_scale(KoetheMatrix.power(), 3, 3)
    again = DiscScale.from_dict(sc.to_dict())
    assert all(a == b for a, b in zip(again.discs, sc.discs))
