"""Monte Carlo harnesses: escape probabilities, balancedness, fixation tails, driven dissipation.

Trial ``i`` of a run with master seed ``s`` draws everything (start
configuration, tapes, clocks) from streams keyed by ``(s, i)``, so results
are reproducible and independent of how trials are scheduled.
"""

from __future__ import annotations

import math
import time
from collections import Counter
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from statistics import NormalDist
from typing import Callable, Iterable, Sequence

import numpy as np
from scipy.stats import poisson

from . import rng as _rng
from .arw import simulate_ct
from .engine import ARWEngine, InstructionTapes, NonStabilized
from .lattice import Box, Paving, Site, as_site
from .ssm import ORDINARY, DirectionTapes, SSMNetwork

Z95 = NormalDist().inv_cdf(0.975)


def wilson_interval(successes: int, n: int, z: float = Z95) -> tuple[float, float]:
    if n == 0:
        return 0.0, 1.0
    p = successes / n
    denom = 1 + z * z / n
    centre = (p + z * z / (2 * n)) / denom
    half = z * math.sqrt(p * (1 - p) / n + z * z / (4 * n * n)) / denom
    lo = 0.0 if successes == 0 else max(0.0, centre - half)
    hi = 1.0 if successes == n else min(1.0, centre + half)
    return lo, hi


@dataclass
class TrialReport:
    trials: int
    successes: int
    estimate: float
    interval: tuple[float, float]
    seeds: list[int]
    flagged: int = 0
    wall_time: float = 0.0
    outcomes: list = field(default_factory=list, repr=False)

    @classmethod
    def from_outcomes(cls, outcomes: Sequence, seeds: Sequence[int], wall_time: float = 0.0) -> "TrialReport":
        valid = [o for o in outcomes if o is not None]
        s = sum(bool(o) for o in valid)
        n = len(valid)
        est = s / n if n else 0.0
        return cls(n, s, est, wilson_interval(s, n), list(seeds), len(outcomes) - n, wall_time, list(outcomes))

    def to_json(self, timing: bool = False) -> dict:
        out = {
            "trials": self.trials,
            "successes": self.successes,
            "estimate": self.estimate,
            "interval": list(self.interval),
            "flagged": self.flagged,
        }
        if timing:
            out["runtime"] = self.wall_time
        return out


def run_trials(fn: Callable, args: tuple, n: int, jobs: int = 1) -> list:
    """``[fn(*args, i) for i in range(n)]``, optionally over a process pool."""
    if jobs <= 1 or n < 2:
        return [fn(*args, i) for i in range(n)]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, *[[a] * n for a in args], range(n), chunksize=max(1, n // (4 * jobs))))


def coupled_poisson(frame: Sequence[Site], zeta: float, rng: np.random.Generator,
                    region=None) -> list[Site]:
    """Poisson(zeta) particles on ``region`` via per-site quantile coupling on ``frame``.

    One uniform per frame site, so runs sharing ``frame`` and the stream are
    pointwise ordered in ``zeta`` and nested in ``region``.
    """
    u = rng.random(len(frame))
    counts = poisson.ppf(u, zeta).astype(int) if zeta > 0 else np.zeros(len(frame), dtype=int)
    out = []
    for x, c in zip(frame, counts):
        if c and (region is None or x in region):
            out.extend([x] * int(c))
    return out


# -- escape ------------------------------------------------------------------


@dataclass(frozen=True)
class EscapeSpec:
    """Escape experiment: does some particle reach the internal boundary of ``box``?

    ``start``: a Box (Poisson start of density ``zeta`` restricted to it) or
    explicit sites (used as given when ``law == "fixed"``).
    """

    box: Box
    start: object
    model: str = "arw"
    lam: float = 1.0
    kappa: int = 3
    law: str = "poisson"
    zeta: float = 0.0
    trials: int = 100
    seed: int = 0
    policy: str = "fifo"
    budget: int = 10**7

    def __post_init__(self):
        if self.model not in ("arw", "ssm"):
            raise ValueError("model must be 'arw' or 'ssm'")
        if self.law not in ("poisson", "fixed"):
            raise ValueError("law must be 'poisson' or 'fixed'")
        if self.trials <= 0:
            raise ValueError("trials must be positive")
        interior = set(self.box.interior())
        region = self.start.sites() if isinstance(self.start, Box) else [as_site(x) for x in self.start]
        if any(x not in interior for x in region):
            raise ValueError("start region must lie in the interior of the box")

    def to_json(self) -> dict:
        start = self.start.to_json() if isinstance(self.start, Box) else [list(as_site(x)) for x in self.start]
        return {**{k: v for k, v in asdict(self).items() if k not in ("box", "start")},
                "box": self.box.to_json(), "start": start}


def escape_start(spec: EscapeSpec, i: int) -> list[Site]:
    if spec.law == "fixed":
        return [as_site(x) for x in (spec.start.sites() if isinstance(spec.start, Box) else spec.start)]
    region = spec.start if isinstance(spec.start, Box) else {as_site(x) for x in spec.start}
    g = _rng.generator(spec.seed, _rng.TAG_START, i)
    return coupled_poisson(spec.box.sites(), spec.zeta, g, region)


def escape_trial(spec: EscapeSpec, i: int):
    """Success flag for trial ``i``; ``None`` if the engine ran out of budget."""
    particles = escape_start(spec, i)
    seed = _rng.derive_seed(spec.seed, i)
    halt = spec.box.on_boundary
    try:
        if spec.model == "arw":
            eng = ARWEngine(InstructionTapes(spec.box.d, spec.lam, seed), spec.box, spec.policy, seed, halt)
            for x in particles:
                eng.add(x)
            res = eng.stabilize(spec.budget)
        else:
            net = SSMNetwork(spec.kappa, DirectionTapes(spec.box.d, seed), spec.box, spec.policy, seed, halt)
            for x in particles:
                net.send(x, ORDINARY)
            res = net.stabilize(spec.budget)
    except NonStabilized:
        return None
    return bool(res.halted)


def estimate_escape(spec: EscapeSpec, jobs: int = 1) -> TrialReport:
    t0 = time.perf_counter()
    outcomes = run_trials(escape_trial, (spec,), spec.trials, jobs)
    seeds = [_rng.derive_seed(spec.seed, i) for i in range(spec.trials)]
    return TrialReport.from_outcomes(outcomes, seeds, time.perf_counter() - t0)


def first_step_escape_probability(lam: float) -> float:
    """One ARW particle at the centre of [0, 3): it escapes iff it jumps before sleeping."""
    return 1.0 / (1.0 + lam)


# -- balancedness ---------------------------------------------------------------


def is_balanced(points: Iterable[Sequence[int]], paving: Paving, zeta: float) -> bool:
    """Every tile holds at most ``zeta * side^d`` points."""
    cap = zeta * paving.side**paving.d
    counts = Counter(paving.index(p) for p in points)
    return all(c <= cap for c in counts.values())


def balanced_probability(zeta: float, side: int, d: int, n_boxes: int, factor: float = 2.0) -> float:
    """Exact P[a Poisson(zeta) cloud on ``n_boxes`` tiles is (factor*zeta)-balanced]."""
    vol = side**d
    return float(poisson.cdf(math.floor(factor * zeta * vol), zeta * vol) ** n_boxes)


# -- fixation tails ---------------------------------------------------------------


@dataclass
class FixationTable:
    zeta: float
    lam: float
    horizon: float
    observable: str
    ladder: list[int]
    l_grid: list[int]
    values: dict[int, list]  # M -> per-trial observable (None when flagged)
    seed: int

    def tail(self, M: int, l: int) -> float:
        vals = [v for v in self.values[M] if v is not None]
        return sum(v >= l for v in vals) / len(vals) if vals else 0.0

    def rows(self) -> list[dict]:
        out = []
        for M in self.ladder:
            vals = [v for v in self.values[M] if v is not None]
            for l in self.l_grid:
                k = sum(v >= l for v in vals)
                lo, hi = wilson_interval(k, len(vals))
                out.append({"M": M, "l": l, "tail": k / len(vals) if vals else 0.0, "lo": lo, "hi": hi,
                            "n": len(vals)})
        return out


def fixation_trial(zeta: float, lam: float, ladder: tuple, horizon: float, d: int, seed: int,
                   observable: str, budget: int, i: int) -> list:
    """Observable at the origin for every truncation radius of the ladder, on shared randomness."""
    M_max = max(ladder)
    frame = Box(tuple([-M_max] * d), (2 * M_max + 1,) * d).sites()
    g = _rng.generator(seed, _rng.TAG_START, i)
    particles = coupled_poisson(frame, zeta, g)
    tseed = _rng.derive_seed(seed, i)
    origin = (0,) * d
    out = []
    for M in ladder:
        init = [x for x in particles if max(abs(c) for c in x) <= M]
        if observable == "changes":
            res = simulate_ct(init, lam, horizon, [origin], None, _rng.generator(tseed, _rng.TAG_CLOCK),
                              max_events=budget)
            out.append(None if res.truncated else res.counters[origin].changes)
        else:
            eng = ARWEngine(InstructionTapes(d, lam, tseed))
            for x in init:
                eng.add(x)
            try:
                res = eng.stabilize(budget)
            except NonStabilized:
                out.append(None)
                continue
            out.append(res.odometer.get(origin, 0))
    return out


def fixation_tail(zeta: float, lam: float, ladder: Sequence[int], horizon: float, l_grid: Sequence[int],
                  trials: int, seed: int, d: int = 1, observable: str = "changes", budget: int = 10**6,
                  jobs: int = 1) -> FixationTable:
    """Tail estimates ``P[R >= l]`` per truncation radius ``M``.

    ``observable="changes"``: R is the number of changes of the origin's value
    up to ``horizon`` in the timed dynamics. ``"odometer"``: R is the number of
    envelopes read at the origin when the truncated system stabilizes on
    trial-shared tapes, which is pointwise monotone in the initial particles.
    """
    ladder = list(ladder)
    if any(b <= a for a, b in zip(ladder, ladder[1:])):
        raise ValueError("M ladder must be increasing")
    if trials <= 0:
        raise ValueError("trials must be positive")
    if observable not in ("changes", "odometer"):
        raise ValueError("observable must be 'changes' or 'odometer'")
    per_trial = run_trials(fixation_trial, (zeta, lam, tuple(ladder), horizon, d, seed, observable, budget),
                           trials, jobs)
    values = {M: [row[j] for row in per_trial] for j, M in enumerate(ladder)}
    return FixationTable(zeta, lam, horizon, observable, ladder, sorted(l_grid), values, seed)


# -- driven dissipation --------------------------------------------------------------


@dataclass
class DDState:
    n: int
    d: int
    model: str
    params: dict
    inserted: int = 0
    remaining: int = 0
    dissipated: int = 0
    curve: list[tuple[int, int, int]] = field(default_factory=list)

    def check(self) -> None:
        if self.inserted != self.remaining + self.dissipated:
            raise AssertionError(f"ledger broken: {self.inserted} != {self.remaining} + {self.dissipated}")


def driven_dissipation(n: int, model: str = "ssm", insertions: int = 100, seed: int = 0, d: int = 2,
                       kappa: int = 3, lam: float = 1.0, policy: str = "fifo", budget: int = 10**8) -> DDState:
    """Insert particles one at a time at uniform sites of ``[0, n)^d``, stabilizing in between.

    ARW inserts an active particle; SSM sends one ordinary message. Particles
    leaving the box are dissipated. Raises :class:`NonStabilized` carrying the
    partial curve in ``snapshot["curve"]`` if the budget runs out.
    """
    if n < 1:
        raise ValueError("box side must be >= 1")
    box = Box.cube(n, d)
    sites = box.sites()
    tseed = _rng.derive_seed(seed, 0)
    if model == "ssm":
        eng = SSMNetwork(kappa, DirectionTapes(d, tseed), box, policy, tseed)
        params = {"kappa": kappa}
    elif model == "arw":
        eng = ARWEngine(InstructionTapes(d, lam, tseed), box, policy, tseed)
        params = {"lam": lam}
    else:
        raise ValueError("model must be 'arw' or 'ssm'")
    state = DDState(n, d, model, params)
    picks = _rng.generator(seed, _rng.TAG_START).integers(0, len(sites), insertions)
    for k in picks:
        x = sites[int(k)]
        if model == "ssm":
            eng.send(x, ORDINARY)
        else:
            eng.add(x)
        try:
            eng.stabilize(budget)
        except NonStabilized as exc:
            exc.snapshot["curve"] = list(state.curve)
            raise
        state.inserted += 1
        state.dissipated = eng.dissipated
        state.remaining = sum(eng.retained().values()) if model == "ssm" else eng.count()
        state.check()
        state.curve.append((state.inserted, state.remaining, state.dissipated))
    return state
