import math
import threading

import numpy as np
import pytest
from numpy.testing import assert_allclose

from steinitz_lab.errors import (
    BoundMissed,
    NotConditional,
    NotInDomain,
    PreconditionViolated,
    SearchExhausted,
)
from steinitz_lab.hilbert import WeightedHilbert
from steinitz_lab.koethe import standard_scale
from steinitz_lab.rearrange import (
    Certificate,
    PermInstance,
    RoundOffInstance,
    exhaustive_permutation_exists,
    exhaustive_round_off_error,
    parse_stream,
    permute_bounded,
    prefix_norms,
    rearrange_to_target,
    riemann_rearrange,
    round_off,
    verify_permutation_stream,
    verify_stream,
)
from steinitz_lab.series import ScalarStream, make_series, terms

from instances import perm_instance, round_off_instance

R1 = WeightedHilbert([1.0])


def test_round_off_two_points():
    inst = RoundOffInstance([[1.0], [-1.0]], R1, R1, [0.5])
    I = round_off(inst)
    err = abs(sum(inst.points[i, 0] for i in I) - 0.5)
    assert err <= 1.0
    assert I in ((0,), (1,), (), (0, 1))


def test_round_off_random_r2(rng):
    h1 = WeightedHilbert([1.0, 1.0])
    h2 = WeightedHilbert([0.5, 0.5])
    for _ in range(100):
        pts = rng.standard_normal((4, 2))
        pts /= np.maximum(1.0, h1.norm(pts))[:, None]
        y = pts.T @ rng.random(4)
        inst = RoundOffInstance(pts, h1, h2, y)
        I = round_off(inst)
        assert h2.norm(pts[list(I)].sum(axis=0) - y) <= 1 + 1e-12
        assert exhaustive_round_off_error(inst) <= 1 + 1e-12


def test_round_off_property(rng):
    for _ in range(200):
        inst = round_off_instance(rng)
        I = round_off(inst)
        assert len(set(I)) == len(I)
        err = inst.space_h2.norm(inst.points[list(I)].sum(axis=0) - inst.target)
        assert err <= 1 + 1e-12


def test_round_off_preconditions():
    with pytest.raises(PreconditionViolated) as exc:
        round_off(RoundOffInstance([[1.0], [-1.0]], R1, R1, [3.0]))
    assert exc.value.kind == "zonotope"
    with pytest.raises(PreconditionViolated) as exc:
        round_off(RoundOffInstance([[0.5, 0], [0, 0.5]], WeightedHilbert([1, 1]), WeightedHilbert([1, 1]), [0.2, 0.2]))
    assert exc.value.kind == "hs"
    with pytest.raises(PreconditionViolated) as exc:
        round_off(RoundOffInstance([[2.0]], R1, R1, [1.0]))
    assert exc.value.kind == "ball"


def test_round_off_forced_can_miss():
    big = WeightedHilbert([100.0])
    inst = RoundOffInstance([[1.0], [1.0]], R1, big, [1.0 - 0.5])
    with pytest.raises(BoundMissed):
        round_off(inst, force=True)


def test_round_off_many_points_uses_basic_solution(rng):
    inst = round_off_instance(rng, s=200, d=3)
    I = round_off(inst)
    assert inst.space_h2.norm(inst.points[list(I)].sum(axis=0) - inst.target) <= 1 + 1e-12


def test_permute_single_and_one_dimensional():
    h = WeightedHilbert([1.0])
    inst = PermInstance([[0.5]], [0.0], h, h, h.dilate(2.0))
    assert permute_bounded(inst) == (0,)
    h3 = h.dilate(2.0)
    v = np.array([[1.0], [-1.0], [1.0], [-1.0]]) * 0.9
    inst = PermInstance(v, [0.0], h, h, h3)
    order = permute_bounded(inst)
    assert sorted(order) == [0, 1, 2, 3]
    assert np.all(prefix_norms(v, inst.anchor, order, h3) <= 1 + 1e-12)
    assert exhaustive_permutation_exists(inst)


def test_permute_random_r2_against_oracle(rng):
    for _ in range(20):
        inst = perm_instance(rng, s=8, d=2)
        order = permute_bounded(inst)
        assert sorted(order) == list(range(8))
        assert np.all(prefix_norms(inst.vectors, inst.anchor, order, inst.h3) <= 1 + 1e-12)
        assert exhaustive_permutation_exists(inst)


def test_permute_property(rng):
    for _ in range(200):
        inst = perm_instance(rng)
        order = permute_bounded(inst)
        assert np.all(prefix_norms(inst.vectors, inst.anchor, order, inst.h3) <= 1 + 1e-12)


def test_permute_preconditions_and_exhaustion():
    h = WeightedHilbert([1.0])
    with pytest.raises(PreconditionViolated):
        permute_bounded(PermInstance([[2.0]], [0.0], h, h, h.dilate(2)))
    with pytest.raises(PreconditionViolated):
        permute_bounded(PermInstance([[0.5]], [0.0], h, h, h))
    tight = h.dilate(0.1)
    with pytest.raises(SearchExhausted):
        permute_bounded(PermInstance([[1.0], [1.0]], [0.0], h, h, tight), force=True)


def test_riemann_half(harmonic_alt):
    st = riemann_rearrange(harmonic_alt, 0.5)
    idx = st.take(10_000)
    assert len(set(idx)) == len(idx) == 10_000
    s = math.fsum(harmonic_alt.terms(np.array(idx)))
    assert abs(s - 0.5) <= 1e-3
    assert verify_permutation_stream(st).ok
    assert len(st.certificates) > 10


def test_riemann_ln2_and_negative_scale(harmonic_alt):
    st = riemann_rearrange(harmonic_alt, math.log(2))
    idx = st.take(2000)
    assert verify_permutation_stream(st).ok
    # positive/negative counts stay balanced, as in the natural order
    odd = sum(k % 2 for k in idx)
    assert abs(odd - (len(idx) - odd)) <= 2
    neg = ScalarStream("alternating_power", alpha=1.0, scale=-1.0)
    pos_run = riemann_rearrange(harmonic_alt, 0.0)
    neg_run = riemann_rearrange(neg, 0.0)
    a = math.fsum(harmonic_alt.terms(np.array(pos_run.take(5000))))
    b = math.fsum(neg.terms(np.array(neg_run.take(5000))))
    assert abs(a) <= 1e-3 and abs(b) <= 1e-3
    assert verify_permutation_stream(neg_run).ok


def test_riemann_needs_conditional():
    with pytest.raises(NotConditional):
        riemann_rearrange(ScalarStream("power", alpha=2.0), 1.0)


def test_rearrange_alternating_to_zero(harmonic_alt):
    s = make_series(1, ([1.0], harmonic_alt))
    st = rearrange_to_target(s, [0.0], standard_scale(1), 5).run()
    assert [c.stage for c in st.certificates] == [2, 3, 4, 5, 6]
    check = verify_permutation_stream(st)
    assert check.ok and check.distinct
    for stage, n, err, bound, ok in check.errors:
        assert abs(math.fsum(terms(s, st.emitted[:n])[:, 0])) <= 1.0 / stage


def test_rearrange_r2(r2_series):
    target = [0.0, math.pi**2 / 6]
    st = rearrange_to_target(r2_series, target, standard_scale(2), 5, stage_width=100).run()
    check = verify_permutation_stream(st)
    assert check.ok and check.distinct
    assert set(range(1, 501)) <= set(st.emitted)
    u = terms(r2_series, st.emitted)
    S = np.cumsum(u, axis=0)
    tail = S[len(S) // 2:, 1]
    assert np.max(np.abs(tail - math.pi**2 / 6)) < 1e-2


def test_rearrange_not_in_domain(r2_series):
    with pytest.raises(NotInDomain) as exc:
        rearrange_to_target(r2_series, [0.0, 0.0], standard_scale(2), 3)
    assert_allclose(np.abs(exc.value.functional), [0, 1], atol=1e-8)


def test_rearrange_zero_stages(harmonic_alt):
    s = make_series(1, ([1.0], harmonic_alt))
    st = rearrange_to_target(s, [0.3], standard_scale(1), 0).run()
    assert st.emitted == [] and st.certificates == []


def test_stream_text_round_trip_and_tamper(harmonic_alt):
    s = make_series(1, ([1.0], harmonic_alt))
    st = rearrange_to_target(s, [0.25], standard_scale(1), 3).run()
    idx, certs = parse_stream(st.dumps())
    assert idx == st.emitted and certs == st.certificates
    assert verify_stream(s, [0.25], idx, certs, st.scale).ok
    bad = [Certificate(c.stage, c.prefix_length, c.bound * 1e-6, c.disc) for c in certs]
    assert not verify_stream(s, [0.25], idx, bad, st.scale).ok
    dup = idx[:5] + idx[:5]
    assert not verify_stream(s, [0.25], dup, [], st.scale).distinct


def test_stream_handoff_between_threads(harmonic_alt):
    st = riemann_rearrange(harmonic_alt, 1.0)
    first = st.take(100)
    out = []
    t = threading.Thread(target=lambda: out.append(st.take(200)))
    t.start()
    t.join()
    assert out[0][:100] == first and len(out[0]) == 200


def test_limit_point_is_in_domain(r2_series):
    from steinitz_lab.domain import membership

    target = [1.5, math.pi**2 / 6]
    st = rearrange_to_target(r2_series, target, standard_scale(2), 6).run()
    S = terms(r2_series, st.emitted).sum(axis=0)
    assert membership(r2_series, S, 0.2).in_domain
