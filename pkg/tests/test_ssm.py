from collections import Counter

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from instances import random_instance

from arwlab.lattice import Box
from arwlab.ordering import make_policy
from arwlab.ssm import (
    ACTIVATION,
    ORDINARY,
    DirectionTapes,
    FixedDirections,
    f_table,
    off_sleep_ssm,
    receive,
    stabilize_ssm,
    toppling_f,
)
from arwlab.walks import after_hops, stop_immediately

# rows r = 0..7, columns q = 0..7, kappa = 3
F_TABLE_K3 = [
    [0, 0, 0, 3, 3, 3, 6, 6],
    [0, 1, 1, 3, 3, 3, 6, 6],
    [0, 1, 2, 3, 3, 3, 6, 6],
    [0, 1, 2, 3, 3, 3, 6, 6],
    [0, 1, 2, 3, 4, 4, 6, 6],
    [0, 1, 2, 3, 4, 5, 6, 6],
    [0, 1, 2, 3, 4, 5, 6, 6],
    [0, 1, 2, 3, 4, 5, 6, 7],
]


def test_f_examples():
    assert toppling_f(7, 0, 3) == 6
    assert toppling_f(2, 1, 3) == 1
    assert all(toppling_f(q, q, 3) == q for q in range(51))
    assert f_table(3, 8).tolist() == F_TABLE_K3
    with pytest.raises(ValueError):
        toppling_f(1, 1, 0)


@given(st.integers(0, 200), st.integers(0, 200), st.integers(1, 10))
def test_f_properties(q, r, kappa):
    f = toppling_f(q, r, kappa)
    assert 0 <= f <= q
    assert toppling_f(q + 1, r, kappa) >= f and toppling_f(q, r + 1, kappa) >= f
    assert toppling_f(q, 0, kappa) == q - q % kappa


def test_receive_examples():
    tapes = FixedDirections(1, {"0": ["+1", "+1", "-1"]})
    state, out = receive((0,), (2, 0), ORDINARY, tapes, 3)
    assert state == (3, 0) and Counter(out) == {(1,): 2, (-1,): 1}
    assert receive((0,), (0, 0), ORDINARY, tapes, 3) == ((1, 0), [])
    assert receive((0,), (3, 0), ACTIVATION, tapes, 3) == ((3, 1), [])


def test_single_site_box():
    box = Box((0,), (1,))
    res = stabilize_ssm([(0,)] * 3, DirectionTapes(1, 0), 3, domain=box)
    assert res.retained.get((0,), 0) == 0 and res.dissipated == 3
    res = stabilize_ssm([(0,)] * 2, DirectionTapes(1, 0), 3, domain=box)
    assert res.retained[(0,)] == 2
    res = stabilize_ssm([(0,)] * 5, DirectionTapes(1, 0), 1, domain=Box((0,), (4,)))
    assert sum(res.retained.values()) == 0


def ssm_messages(parts):
    return [p[0] if isinstance(p[-1], str) else p for p in parts]


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10**6), st.sampled_from([1, 2]), st.integers(1, 4))
def test_abelian(seed, d, kappa):
    box, parts, _ = random_instance(seed, d)
    msgs = ssm_messages(parts)
    ref = None
    for pol in ["fifo", "random", "sweep", "maxload"]:
        res = stabilize_ssm(msgs, DirectionTapes(d, seed), kappa, pol, box, seed=seed)
        key = (res.retained, dict(res.odometer), res.dissipated)
        ref = ref or key
        assert key == ref
        assert all(v < kappa for v in res.retained.values())
        assert sum(res.retained.values()) + res.dissipated == len(msgs)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10**6), st.sampled_from([1, 2]), st.booleans())
def test_one_more_message_never_lowers_odometer(seed, d, activation):
    box, parts, _ = random_instance(seed, d)
    msgs = ssm_messages(parts)
    extra = box.sites()[seed % len(box)]
    base = stabilize_ssm(msgs, DirectionTapes(d, seed), 3, "fifo", box)
    more = stabilize_ssm(msgs + ([] if activation else [extra]), DirectionTapes(d, seed), 3, "sweep", box,
                         activations=[extra] if activation else [])
    assert all(base.odometer[x] <= more.odometer[x] for x in base.odometer)


def test_off_sleep_ssm():
    assert off_sleep_ssm([], stop_immediately, 3, d=1)[0] == []
    stops, _ = off_sleep_ssm([(0,), (5,)], stop_immediately, 3, seed=1)
    assert [s.position for s in stops] == [(0,), (5,)]
    ends = Counter()
    for i in range(2000):
        stops, states = off_sleep_ssm([(0, 0)], after_hops(1), 3, seed=i)
        ends[stops[0].position] += 1
        assert all(q == r for q, r in states.values())
    assert set(ends) == {(1, 0), (-1, 0), (0, 1), (0, -1)}
    assert min(ends.values()) > 400
    with pytest.raises(ValueError):
        off_sleep_ssm([(0,)], stop_immediately, 3, initial_states={(0,): (2, 1)})


def test_policy_objects_accepted():
    res = stabilize_ssm([(0,)] * 4, DirectionTapes(1, 3), 2, make_policy("maxload"), Box((-3,), (7,)))
    assert sum(res.retained.values()) + res.dissipated == 4
