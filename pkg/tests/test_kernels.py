import itertools
import math

import mpmath
import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from arwlab.kernels import (
    HopSchedule,
    SieveSchedule,
    balanced_kernel_sum,
    extremal_balanced_sum,
    heat_kernel_1d,
    heat_kernel_d,
    hopping_stop,
    integration_bound,
    jump_cutoff,
    kernel_array,
    kernel_window_1d,
    sieving_stop,
)
from arwlab.lattice import Paving
from arwlab.walks import ContinuousWalk

# e^{-1} I_0(1) from the power series sum_k (1/2)^{2k} / (k!)^2, evaluated at 40 digits
P1_00 = 0.46575960759364043


def bessel_oracle(t, x):
    """e^{-t} I_|x|(t) summed term by term at 40 digits."""
    with mpmath.workdps(40):
        t, x = mpmath.mpf(t), abs(int(x))
        s = mpmath.nsum(lambda k: (t / 2) ** (2 * k + x) / (mpmath.factorial(k) * mpmath.factorial(k + x)),
                        [0, mpmath.inf])
        return float(mpmath.exp(-t) * s)


def test_oracle_constant():
    assert abs(bessel_oracle(1, 0) - P1_00) < 1e-15
    assert abs(heat_kernel_1d(1.0, 0) - P1_00) < 1e-10


def test_small_time_values():
    assert heat_kernel_1d(0, 0) == 1.0
    assert heat_kernel_1d(0, 3) == 0.0
    assert heat_kernel_d(0, (0, 2)) == 0.0
    assert heat_kernel_d(1.0, (0, 0)) == pytest.approx(heat_kernel_1d(1.0, 0) ** 2, abs=1e-15)
    assert heat_kernel_d(2.0, (1, -1)) == pytest.approx(heat_kernel_1d(2.0, 1) ** 2, abs=1e-15)


@pytest.mark.parametrize("t,x", [(0.5, 0), (1.0, 2), (4.0, 3), (16.0, 0), (16.0, 7), (64.0, 10)])
def test_against_bessel_series(t, x):
    assert abs(heat_kernel_1d(t, x) - bessel_oracle(t, x)) < 1e-10


@pytest.mark.parametrize("t", [0.0, 0.5, 1.0, 4.0, 16.0, 100.0])
def test_normalization_and_monotonicity(t):
    eps = 1e-12
    xs, p = kernel_window_1d(t, eps)
    assert 1 - 10 * eps <= p.sum() <= 1 + 1e-14
    half = p[len(p) // 2:]
    assert all(half[i] >= half[i + 1] for i in range(len(half) - 1))
    assert np.array_equal(p, p[::-1])


def direct_2d(t, radius, eps=1e-13):
    """Two independent rate-1 coordinates = one rate-2 walk with 4 uniform directions."""
    n_max = jump_cutoff(2 * t, eps) if t else 0
    size = 2 * n_max + 1
    cur = np.zeros((size, size))
    cur[n_max, n_max] = 1.0
    out = np.zeros_like(cur)
    for n in range(n_max + 1):
        w = math.exp(-2 * t + n * math.log(2 * t) - math.lgamma(n + 1)) if t else 1.0
        out += w * cur
        nxt = np.zeros_like(cur)
        nxt[1:, :] += cur[:-1, :] / 4
        nxt[:-1, :] += cur[1:, :] / 4
        nxt[:, 1:] += cur[:, :-1] / 4
        nxt[:, :-1] += cur[:, 1:] / 4
        cur = nxt
    c = n_max
    return out[c - radius: c + radius + 1, c - radius: c + radius + 1]


@pytest.mark.parametrize("t", [0.5, 1.0, 3.0])
def test_product_identity(t):
    r = 6
    assert np.abs(kernel_array(t, 2, r) - direct_2d(t, r)).max() < 1e-10


def test_local_clt_constant():
    consts = [math.sqrt(t) * heat_kernel_1d(t, 0) for t in (1, 4, 16, 64, 256)]
    assert max(consts) < 0.5
    assert abs(consts[-1] - 1 / math.sqrt(2 * math.pi)) < 1e-3


def test_eps_validation():
    with pytest.raises(ValueError):
        heat_kernel_1d(1.0, 0, eps=1e-3)
    with pytest.raises(ValueError):
        heat_kernel_1d(-1.0, 0)


def test_hopping_stop():
    pav = Paving(4, (0,))
    with pytest.raises(ValueError):
        HopSchedule(pav, 15)
    sched = HopSchedule(pav, 16)
    h = hopping_stop(ContinuousWalk((1,), np.random.default_rng(0)), sched)
    assert h.time == 0 and h.steps == 0
    # start outside the half-kernel: S >= r, and the tail decays
    tails = np.zeros(6)
    for i in range(2000):
        h = hopping_stop(ContinuousWalk((0,), np.random.default_rng(i)), sched)
        assert h.steps >= 1 and pav.in_half_kernel(h.position)
        tails[: min(h.steps, 6)] += 1
    tails /= 2000
    assert tails[0] == 1 and all(tails[i + 1] < tails[i] for i in range(1, 4))


def test_sieving_stop():
    L = 3
    everywhere = SieveSchedule(L, lambda x: True)
    s = sieving_stop(ContinuousWalk((0,), np.random.default_rng(1)), everywhere)
    assert s.time == pytest.approx(L**2.02) and not s.capped
    s = sieving_stop(ContinuousWalk((0,), np.random.default_rng(1)), SieveSchedule(L, set()))
    assert s.time == pytest.approx(L**2.04) and s.capped
    with pytest.raises(ValueError):
        SieveSchedule(1, None)


def test_balanced_sum_trivial():
    assert balanced_kernel_sum(1.0, []) == 0.0
    assert balanced_kernel_sum(0.0, [(0,)]) == 1.0


@pytest.mark.parametrize("per_box", [1, 2])
def test_extremal_sum_brute_force(per_box):
    t, pav = 64.0, Paving(4, (0,))
    boxes = [(k,) for k in range(-3, 3)] if per_box == 1 else [(k,) for k in range(-2, 2)]
    choices = [list(itertools.combinations_with_replacement(pav.box(k).sites(), per_box)) for k in boxes]
    best = max(balanced_kernel_sum(t, [x for grp in pick for x in grp]) for pick in itertools.product(*choices))
    assert extremal_balanced_sum(t, pav, boxes, per_box) == pytest.approx(best, abs=1e-12)
    corners = [(0,), (-1,), (4,), (-5,)] * per_box
    assert balanced_kernel_sum(t, corners) == pytest.approx(extremal_balanced_sum(t, pav, [(-2,), (-1,), (0,), (1,)], per_box))


@given(st.lists(st.integers(-12, 11), max_size=12))
def test_balanced_collections_below_extremal(xs):
    pav = Paving(4, (0,))
    counts = {}
    for x in xs:
        counts[pav.index((x,))] = counts.get(pav.index((x,)), 0) + 1
    if any(c > 2 for c in counts.values()):
        return
    boxes = [(k,) for k in range(-3, 3)]
    assert balanced_kernel_sum(16.0, [(x,) for x in xs]) <= extremal_balanced_sum(16.0, pav, boxes, 2) + 1e-12


def test_integration_bound():
    assert integration_bound(0.5, 10, 100.0, 2) == pytest.approx(0.5 * (1 + 1 + 1))
