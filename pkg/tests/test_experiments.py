import math

import numpy as np
import pytest

from arwlab.engine import NonStabilized
from arwlab.experiments import (
    EscapeSpec,
    balanced_probability,
    driven_dissipation,
    estimate_escape,
    first_step_escape_probability,
    fixation_tail,
    is_balanced,
    wilson_interval,
)
from arwlab.lattice import Box, Paving, kernel_triple


def test_wilson_basics():
    lo, hi = wilson_interval(0, 10)
    assert lo == 0 and 0 < hi < 0.35
    lo, hi = wilson_interval(37, 100)
    assert lo < 0.37 < hi
    assert wilson_interval(0, 0) == (0.0, 1.0)


@pytest.mark.parametrize("p", [0.02, 0.3, 0.5, 0.9])
def test_wilson_coverage(p):
    rng = np.random.default_rng(int(p * 100))
    n, reps = 80, 2000
    hits = rng.binomial(n, p, reps)
    covered = sum(lo <= p <= hi for lo, hi in (wilson_interval(int(k), n) for k in hits))
    assert covered / reps >= 0.93


def test_escape_spec_validation():
    box = Box((0,), (5,))
    with pytest.raises(ValueError):
        EscapeSpec(box, [(0,)])
    with pytest.raises(ValueError):
        EscapeSpec(box, [(2,)], trials=0)
    with pytest.raises(ValueError):
        EscapeSpec(box, [(2,)], model="xyz")


def test_escape_zero_density():
    kt = kernel_triple(10, 2, 0, 2)
    rep = estimate_escape(EscapeSpec(kt.outer, kt.inner, zeta=0.0, trials=30))
    assert rep.estimate == 0 and rep.successes == 0 and rep.flagged == 0


def test_escape_first_step():
    lam, n = 4.0, 4000
    rep = estimate_escape(EscapeSpec(Box((0,), (3,)), [(1,)], lam=lam, law="fixed", trials=n, seed=2))
    p = first_step_escape_probability(lam)
    assert abs(rep.estimate - p) < 4 * math.sqrt(p * (1 - p) / n)
    lo, hi = rep.interval
    assert lo <= rep.estimate <= hi


@pytest.mark.parametrize("model", ["arw", "ssm"])
def test_nested_starts_are_dominated_per_pair(model):
    kt = kernel_triple(10, 2, 0, 2)
    full = Box((1, 1), (8, 8))
    kw = dict(model=model, zeta=0.4, trials=60, seed=5, kappa=2)
    small = estimate_escape(EscapeSpec(kt.outer, kt.inner, **kw))
    big = estimate_escape(EscapeSpec(kt.outer, full, **kw))
    assert all(a <= b for a, b in zip(small.outcomes, big.outcomes))
    assert small.estimate <= big.estimate


def test_escape_parallel_matches_serial():
    spec = EscapeSpec(Box((0,), (12,)), Box((3,), (6,)), zeta=0.5, trials=24, seed=9)
    a, b = estimate_escape(spec, jobs=1), estimate_escape(spec, jobs=2)
    assert a.outcomes == b.outcomes and a.seeds == b.seeds


def test_escape_budget_flags_trials():
    spec = EscapeSpec(Box((0,), (40,)), Box((5,), (30,)), zeta=1.0, lam=0.01, trials=5, budget=3)
    rep = estimate_escape(spec)
    assert rep.flagged == 5 and rep.trials == 0


def test_is_balanced():
    pav = Paving(2, (0,))
    assert is_balanced([], pav, 1.0)
    assert not is_balanced([(0,), (1,), (1,)], pav, 1.0)
    assert is_balanced([(0,), (1,), (2,)], pav, 1.0)


def test_balanced_rate_matches_exact_product():
    zeta, side, boxes, n = 0.5, 4, 100, 2000
    rng = np.random.default_rng(0)
    pav = Paving(side, (0,))
    ok = 0
    for _ in range(n):
        counts = rng.poisson(zeta, side * boxes)
        pts = [(x,) for x, c in enumerate(counts) for _ in range(c)]
        ok += is_balanced(pts, pav, 2 * zeta)
    p = balanced_probability(zeta, side, 1, boxes)
    assert abs(ok / n - p) < 4 * math.sqrt(p * (1 - p) / n) + 1e-9


def test_fixation_trivial_cases():
    tab = fixation_tail(0.0, 1.0, [2, 4], 5.0, [0, 1, 2], 20, seed=1)
    assert all(tab.tail(M, l) == 0 for M in (2, 4) for l in (1, 2))
    tab = fixation_tail(0.5, 1.0, [2, 4], 5.0, [0, 1, 2, 5], 40, seed=1)
    assert all(tab.tail(M, 0) == 1 for M in (2, 4))
    with pytest.raises(ValueError):
        fixation_tail(0.5, 1.0, [4, 2], 5.0, [0], 10, seed=1)


@pytest.mark.parametrize("observable", ["changes", "odometer"])
def test_fixation_tails_non_increasing_in_l(observable):
    tab = fixation_tail(0.4, 1.0, [3, 6], 10.0, range(0, 12), 60, seed=3, observable=observable)
    for M in tab.ladder:
        tails = [tab.tail(M, l) for l in tab.l_grid]
        assert tails == sorted(tails, reverse=True)


def test_fixation_odometer_paired_in_zeta():
    kw = dict(lam=1.0, ladder=[2, 5], horizon=10.0, l_grid=range(8), trials=60, seed=4, observable="odometer")
    lo = fixation_tail(0.2, **kw)
    hi = fixation_tail(0.5, **kw)
    for M in lo.ladder:
        assert all(a <= b for a, b in zip(lo.values[M], hi.values[M]))
        assert all(lo.tail(M, l) <= hi.tail(M, l) for l in lo.l_grid)


def test_dd_single_site():
    st = driven_dissipation(1, "ssm", 12, seed=0, d=1, kappa=3)
    assert [r for _, r, _ in st.curve] == [m % 3 for m in range(1, 13)]


@pytest.mark.parametrize("model", ["ssm", "arw"])
def test_dd_ledger(model):
    st = driven_dissipation(6, model, 80, seed=2, d=2, kappa=3, lam=0.5)
    for ins, rem, dis in st.curve:
        assert ins == rem + dis and rem <= ins
    assert st.curve[-1][0] == 80


def test_dd_budget_reports_partial_curve():
    with pytest.raises(NonStabilized) as exc:
        driven_dissipation(10, "ssm", 200, seed=0, d=2, kappa=2, budget=5)
    assert isinstance(exc.value.snapshot["curve"], list)
    with pytest.raises(ValueError):
        driven_dissipation(0)
