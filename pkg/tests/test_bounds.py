import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nodalflow.bounds import (BoundSchedule, PairBounds, cross_upper_bound, enumerate_couples,
                              in_group_interval, ks_sequence, pair_bounds, difference_lower_bound)
from nodalflow.system import ProblemSpec

PRIMES = [2, 3, 5, 7, 11]


def test_hand_computed_schedules():
    # K_1 = 8·2·3·1 + 5·1·4 = 68, K_2 = 8·1·1·68 + 5 + 1 + 1 = 551
    assert ks_sequence(2, 1, [0], 2).K == (68, 551)
    # K_1 = 8·3·4·1 + 5·1·9 = 141, K_2 = 8·4·1·141 + 5·4 + 2 + 1 = 4535
    assert ks_sequence(3, 1, [0], 2).K == (141, 4535)
    # S = 2 for P = [1]: K_1 = 96 + 20 = 116
    assert ks_sequence(2, 1, [1], 1).K == (116,)


def reference_ks(p, B, P, s_max):
    """Direct transcription of the recursion with explicit sums."""
    S = 0
    for x in P:
        S += x + 1
    out = [8 * p * (p + 1) * S + 5 * B * p**2]
    for _ in range(s_max - 1):
        out.append(8 * (p - 1) ** 2 * S * out[-1] + 5 * B * (p - 1) ** 2 + (p - 1) * S + 1)
    return tuple(out)


@settings(max_examples=100, deadline=None)
@given(st.sampled_from(PRIMES), st.lists(st.integers(0, 6), min_size=1, max_size=4), st.integers(1, 8))
def test_schedule_properties(p, P, s_max):
    sched = ks_sequence(p, len(P), P, s_max)
    assert sched.K == reference_ks(p, len(P), P, s_max)
    assert all(b > a for a, b in zip(sched.K, sched.K[1:]))
    assert all(isinstance(k, int) for k in sched.K)
    for s in range(1, s_max):
        for Pb in P:
            lo, hi = in_group_interval(Pb, sched, s)
            lo4, hi4 = in_group_interval(Pb, sched, s, scale=4)
            assert lo < hi and lo4 < hi4 and lo <= lo4
            # intervals of consecutive solutions meet without overlap
            if s + 1 < s_max:
                assert in_group_interval(Pb, sched, s + 1)[0] == hi + 1


def test_large_s_is_exact():
    k = ks_sequence(11, 3, [5, 5, 5], 30).K[-1]
    assert k > 2**200  # Python ints never overflow


@pytest.mark.parametrize("args", [(4, 1, [0]), (2, 0, []), (2, 2, [0]), (2, 1, [-1])])
def test_schedule_validation(args):
    with pytest.raises(ValueError):
        ks_sequence(*args)
    with pytest.raises(ValueError):
        BoundSchedule(2, 1, (0,), (5, 5))


def test_interval_needs_next_term():
    sched = ks_sequence(2, 1, [0], 2)
    assert in_group_interval(0, sched, 1) == (70, 552)
    assert in_group_interval(0, sched, 1, scale=4) == (274, 2205)
    with pytest.raises(ValueError):
        in_group_interval(0, sched, 2)


def test_pair_bounds_for_mixed_spec():
    spec = ProblemSpec(7, -1.0, 2, 2, 3, (1, 2), (0, 3, 1))
    table = pair_bounds(spec)
    assert len(table) == 21
    by_pair = {(b.i, b.j): b for b in table}
    assert by_pair[(0, 1)].provenance == "in-group interval" and by_pair[(0, 1)].lower is not None
    assert by_pair[(0, 2)].upper == 1 + 2 + 1      # cross-group: P_1 + P_2 + 1
    assert by_pair[(1, 5)].upper == 1 + 3 + 1      # group-remainder: P_1 + Q_2 + 1
    assert by_pair[(4, 6)].upper == 0 + 1 + 1      # remainder: Q_1 + Q_3 + 1
    assert by_pair[(4, 6)].provenance == "remainder upper bound"
    assert by_pair[(0, 2)].contains(4) and not by_pair[(0, 2)].contains(5)
    assert table[0].to_dict()["i"] == 1
    with pytest.raises(ValueError):
        cross_upper_bound(spec, ("in-group", 0, 1))
    with pytest.raises(ValueError):
        PairBounds(0, 1, ("x",), "", lower=3, upper=2)


def test_difference_lower_bound():
    assert difference_lower_bound(0, 0) == 1
    assert difference_lower_bound(0, 5) == 0
    assert difference_lower_bound(1, 1) == 0
    assert difference_lower_bound(3, 7) == 1
    assert difference_lower_bound(9, 10) == 4
    with pytest.raises(ValueError):
        difference_lower_bound(-1, 2)


@settings(max_examples=50, deadline=None)
@given(st.sampled_from(PRIMES), st.integers(1, 3))
def test_couples_cover_each_pair_once(p, B):
    cases = enumerate_couples(p, B)
    pairs = [(c.b, frozenset(pair)) for c in cases for pair in c.couples]
    expected = {(b, frozenset((i, j))) for b in range(B) for i in range(1, p + 1) for j in range(i + 1, p + 1)}
    assert set(pairs) == expected
    assert len(pairs) == len(expected) or p == 2


def test_couples_for_p2():
    assert [(c.b, c.q, c.couples) for c in enumerate_couples(2)] == [(0, 1, ((1, 2),))]
    with pytest.raises(ValueError):
        enumerate_couples(9)
