import numpy as np
import pytest
from numpy.testing import assert_allclose

from steinitz_lab.errors import ChainTooShort, DimensionMismatch
from steinitz_lab.hilbert import LinearMap, WeightedHilbert, volume_numbers
from steinitz_lab.koethe import KoetheMatrix, build_hs_scale
from steinitz_lab.nuclearity import (
    composition_chain_check,
    scale_criterion_profile,
    two_summing_composition_profile,
    veps_profile,
)

from conftest import random_map


def diag_map(vals):
    return LinearMap.euclidean(np.diag(vals))


def test_geometric_diagonal_profile_decays():
    D = 12
    rep = veps_profile(diag_map(2.0 ** -np.arange(1, D + 1)), 0.5)
    n = np.arange(1, D + 1)
    assert_allclose(rep.volumes, 2.0 ** (-(n + 1) / 2), rtol=1e-12)
    assert rep.decay_observed
    assert rep.sup_value == rep.values.max()
    assert "finite-range" in rep.disclaimer


def test_identity_profile():
    rep = veps_profile(diag_map(np.ones(5)), 0.3)
    assert_allclose(rep.values, np.arange(1, 6) ** 0.3)
    assert rep.sup_value == pytest.approx(5**0.3)
    assert not rep.decay_observed


def test_rank_one_profile_vanishes():
    rep = veps_profile(LinearMap.euclidean(np.outer([1, 2, 3], [1, 0, 1])), 0.5)
    assert rep.values[0] > 0 and np.all(rep.values[1:] == 0)


def test_epsilon_range():
    with pytest.raises(ValueError):
        veps_profile(diag_map([1.0]), 1.0)


def test_chain_five_geometric_copies():
    T = diag_map(2.0 ** -np.arange(1, 7))
    rep = composition_chain_check([T] * 5, 1.0)
    assert rep.sup_ok and rep.chain_ok
    assert rep.lhs_sup <= rep.rhs_product * (1 + 1e-12)
    assert rep.tail_decay


def test_chain_with_identity_factor():
    T = diag_map(2.0 ** -np.arange(1, 7))
    rep = composition_chain_check([T, T, diag_map(np.ones(6)), T, T], 1.0)
    assert rep.ok


def test_chain_too_short():
    with pytest.raises(ChainTooShort):
        composition_chain_check([diag_map([1.0])] * 4, 1.0)
    with pytest.raises(ChainTooShort):
        composition_chain_check([diag_map([1.0])] * 9, 0.5)


def test_random_gaussian_chains(rng):
    for _ in range(50):
        d = int(rng.integers(1, 6))
        spaces = [WeightedHilbert(rng.uniform(0.2, 3, d)) for _ in range(6)]
        maps = [LinearMap(rng.standard_normal((d, d)), spaces[i], spaces[i + 1]) for i in range(5)]
        rep = composition_chain_check(maps, 1.0)
        assert rep.chain_ok
        assert rep.sup_ok


def test_two_summing_profile():
    T = diag_map([1.0, 0.5, 0.25])
    rep = two_summing_composition_profile([T, T, T], 0.5)
    assert np.all(rep.values <= rep.majorant + 1e-9)
    assert len(rep.notes) == 3
    Z = LinearMap.euclidean(np.zeros((3, 3)))
    assert np.all(two_summing_composition_profile([T, Z, T], 0.5).values == 0)


def test_two_summing_majorant_bounded_for_fast_decay():
    T = diag_map(2.0 ** -np.arange(0, 10))
    for eps in (0.1, 0.5, 0.9):
        rep = two_summing_composition_profile([T, T, T], eps)
        assert rep.majorant.max() <= 2.0


def test_am_gm_inequality_random(rng):
    for _ in range(100):
        d = int(rng.integers(1, 6))
        maps = [random_map(rng, d, d) for _ in range(3)]
        maps[1] = type(maps[1])(maps[1].matrix, maps[0].codomain, maps[1].codomain)
        maps[2] = type(maps[2])(maps[2].matrix, maps[1].codomain, maps[2].codomain)
        rep = two_summing_composition_profile(maps, 0.5)
        assert np.all(rep.values <= rep.majorant + 1e-9)


def test_profile_submultiplicative(rng):
    for _ in range(100):
        d = int(rng.integers(1, 5))
        S = random_map(rng, d, d)
        T = LinearMap(rng.standard_normal((d, d)), S.codomain, WeightedHilbert(rng.uniform(0.2, 3, d)))
        eps = 0.4
        lhs = veps_profile(T @ S, eps).values
        n = np.arange(1, d + 1) ** eps
        rhs = veps_profile(T, eps).values * veps_profile(S, eps).values
        assert np.all(lhs <= rhs / n * n + 1e-9)
        assert np.all(volume_numbers(T @ S) <= volume_numbers(T) * volume_numbers(S) + 1e-9)


def test_scale_criterion_profiles():
    sc = build_hs_scale(KoetheMatrix.power(), 8, 4)
    coarse = sc.discs[-1]
    reps = scale_criterion_profile(sc, coarse, 0.5)
    assert len(reps) == 4
    assert reps[0].decay_observed and reps[1].decay_observed
    # larger discs give larger profiles
    for a, b in zip(reps, reps[1:]):
        assert np.all(a.values <= b.values + 1e-15)
    first = scale_criterion_profile(sc, sc.discs[0], 0.5)[0]
    assert_allclose(first.values, np.arange(1, 9) ** 0.5)
    # a larger p-ball (smaller weights) lowers every profile value
    lower = scale_criterion_profile(sc, coarse.dilate(2.0), 0.5)
    for a, b in zip(lower, reps):
        assert np.all(a.values <= b.values)
    with pytest.raises(DimensionMismatch):
        scale_criterion_profile(sc, WeightedHilbert(np.ones(3)), 0.5)


def test_csv_export():
    rep = two_summing_composition_profile([diag_map([1.0, 0.5])] * 3, 0.5)
    lines = rep.to_csv().splitlines()
    assert lines[0] == "n,delta_n,v_n,n^eps*v_n,majorant"
    assert len(lines) == 3
