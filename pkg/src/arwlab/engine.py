"""Diaconis-Fulton representation of activated random walks.

Each site carries a stack of instructions ("envelopes"). An active particle
reads the next unburned envelope at its site and executes it; the odometer
counts envelopes read per site. For fixed tapes the final configuration and
odometer do not depend on the order in which particles act.

Instructions are ints: ``0`` is sleep, ``+j`` / ``-j`` is a step along +-e_j.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np

from . import rng as _rng
from .lattice import Box, Site, as_site, directions, shift
from .ordering import Policy, make_policy
from .walks import ContinuousWalk, Stop, WalkTimeout

SLEEP = 0
SLEEPING = "s"  # site value of a dormant particle


class TapeExhausted(RuntimeError):
    pass


class NonStabilized(RuntimeError):
    """Step budget exhausted while particles were still active."""

    def __init__(self, steps: int, snapshot: dict):
        super().__init__(f"not stabilized after {steps} steps")
        self.steps = steps
        self.snapshot = snapshot


def parse_instruction(s) -> int:
    if isinstance(s, (int, np.integer)):
        return int(s)
    s = str(s).strip().lower()
    if s in ("s", "sleep"):
        return SLEEP
    sign = -1 if s.startswith("-") else 1
    body = s.lstrip("+-").lstrip("e")
    return sign * int(body)


def format_instruction(i: int) -> str:
    return "s" if i == SLEEP else f"{'+' if i > 0 else '-'}{abs(i)}"


class InstructionTapes:
    """Lazy i.i.d. tapes: sleep w.p. lam/(1+lam), each of the 2d steps w.p. 1/(2d(1+lam)).

    Site ``x`` draws from its own stream keyed by ``(seed, x)``, so entries are
    reproducible and independent of the order in which sites are visited.
    """

    def __init__(self, d: int, lam: float, seed: int, chunk: int = 32):
        if lam < 0:
            raise ValueError("sleep rate must be nonnegative")
        self.d, self.lam, self.seed = d, float(lam), int(seed)
        self._chunk = chunk
        self._p_sleep = self.lam / (1.0 + self.lam)
        self._dirs = np.array(directions(d), dtype=np.int64)
        self._tapes: dict[Site, list[int]] = {}
        self._gens: dict[Site, np.random.Generator] = {}

    def _extend(self, x: Site) -> list[int]:
        g = self._gens.get(x)
        if g is None:
            g = self._gens[x] = _rng.generator(self.seed, _rng.TAG_ARW_TAPE, *x)
            self._tapes[x] = []
        u = g.random(self._chunk)
        k = np.minimum(((u - self._p_sleep) / (1.0 - self._p_sleep) * len(self._dirs)).astype(np.int64), len(self._dirs) - 1)
        vals = np.where(u < self._p_sleep, SLEEP, self._dirs[np.maximum(k, 0)])
        tape = self._tapes[x]
        tape.extend(int(v) for v in vals)
        return tape

    def instruction(self, x: Site, j: int) -> int:
        tape = self._tapes.get(x)
        while tape is None or j >= len(tape):
            tape = self._extend(x)
        return tape[j]

    def revealed(self) -> dict[Site, list[int]]:
        return {x: list(t) for x, t in self._tapes.items()}

    def __eq__(self, other):
        return (
            isinstance(other, InstructionTapes)
            and (self.d, self.lam, self.seed) == (other.d, other.lam, other.seed)
        )

    __hash__ = None


class FixedTapes:
    """Explicit finite tapes; reading past the end raises :class:`TapeExhausted`."""

    def __init__(self, d: int, tapes: Mapping):
        self.d = d
        self.tapes = {as_site(_parse_key(k)): [parse_instruction(i) for i in v] for k, v in tapes.items()}
        for x, t in self.tapes.items():
            for i in t:
                if i != SLEEP and not 1 <= abs(i) <= d:
                    raise ValueError(f"instruction {i} at {x} invalid for d={d}")

    def instruction(self, x: Site, j: int) -> int:
        t = self.tapes.get(x, ())
        if j >= len(t):
            raise TapeExhausted(f"tape at {x} has only {len(t)} instructions")
        return t[j]

    def __eq__(self, other):
        return isinstance(other, FixedTapes) and self.tapes == other.tapes

    __hash__ = None


def _parse_key(k):
    if isinstance(k, str):
        return tuple(int(c) for c in k.strip("()[] ").split(",") if c.strip())
    return k


class SleepThinned:
    """``base`` tapes with selected sleep envelopes removed.

    ``removed`` maps a site to indices (0-based, in the base tape) to drop;
    each must be a sleep instruction.
    """

    def __init__(self, base, removed: Mapping[Site, Iterable[int]]):
        self.base = base
        self.d = base.d
        self.removed = {as_site(x): frozenset(v) for x, v in removed.items()}
        self._kept: dict[Site, list[int]] = {}

    def instruction(self, x: Site, j: int) -> int:
        drop = self.removed.get(x)
        if not drop:
            return self.base.instruction(x, j)
        kept = self._kept.setdefault(x, [])
        i = kept[-1] + 1 if kept else 0
        while len(kept) <= j:
            if i in drop:
                if self.base.instruction(x, i) != SLEEP:
                    raise ValueError(f"removed envelope {i} at {x} is not a sleep instruction")
            else:
                kept.append(i)
            i += 1
        return self.base.instruction(x, kept[j])


@dataclass
class StabilizationResult:
    config: dict
    odometer: dict
    dissipated: int
    steps: int
    halted: bool = False

    def snapshot(self, seed=None) -> dict:
        return {
            "config": {_key(x): v for x, v in sorted(self.config.items())},
            "odometer": {_key(x): v for x, v in sorted(self.odometer.items())},
            "dissipated": self.dissipated,
            "seed": seed,
            "steps": self.steps,
        }


def _key(x: Site) -> str:
    return ",".join(str(c) for c in x)


class ARWEngine:
    """Stabilizes ARW configurations against a fixed set of instruction tapes.

    ``domain``: particles stepping outside it are removed. ``halt``: predicate
    on sites; the run stops as soon as a particle lands on a site where it holds.
    """

    def __init__(self, tapes, domain: Box | None = None, policy: str | Policy = "fifo",
                 seed: int = 0, halt: Callable[[Site], bool] | None = None):
        self.tapes = tapes
        self.domain = domain
        self.policy = make_policy(policy, seed)
        self.halt = halt
        self.config: dict[Site, int | str] = {}
        self.odometer: Counter = Counter()
        self.dissipated = 0
        self.steps = 0
        self.halted = False

    @property
    def active(self) -> int:
        return len(self.policy)

    def count(self) -> int:
        return sum(1 if v == SLEEPING else v for v in self.config.values())

    def add(self, x: Sequence[int], sleeping: bool = False) -> None:
        x = as_site(x)
        if self.domain is not None and x not in self.domain:
            raise ValueError(f"particle at {x} lies outside the domain")
        v = self.config.get(x, 0)
        if sleeping:
            if v == SLEEPING:
                raise ValueError(f"two sleeping particles at {x}")
            if v == 0:
                self.config[x] = SLEEPING
                return
        if v == SLEEPING:
            self.config[x] = 2
            self.policy.push(x)
        else:
            self.config[x] = v + 1
        self.policy.push(x)
        if self.halt is not None and self.halt(x):
            self.halted = True

    def step(self) -> Site:
        if not len(self.policy):
            raise RuntimeError("no active particle")
        x = self.policy.pop()
        j = self.odometer[x]
        instr = self.tapes.instruction(x, j)
        self.odometer[x] = j + 1
        self.steps += 1
        n = self.config[x]
        if instr == SLEEP:
            if n == 1:
                self.config[x] = SLEEPING
            else:
                self.policy.push(x)
            return x
        if n == 1:
            del self.config[x]
        else:
            self.config[x] = n - 1
        z = shift(x, instr)
        if self.domain is not None and z not in self.domain:
            self.dissipated += 1
            return x
        v = self.config.get(z, 0)
        if v == SLEEPING:
            self.config[z] = 2
            self.policy.push(z)
        else:
            self.config[z] = v + 1
        self.policy.push(z)
        if self.halt is not None and self.halt(z):
            self.halted = True
        return x

    def stabilize(self, budget: int | None = None) -> StabilizationResult:
        if budget is None and self.domain is None:
            raise ValueError("an unbounded lattice needs a step budget")
        limit = None if budget is None else self.steps + budget
        while len(self.policy) and not self.halted:
            if limit is not None and self.steps >= limit:
                raise NonStabilized(self.steps, self.result().snapshot())
            self.step()
        return self.result()

    def result(self) -> StabilizationResult:
        return StabilizationResult(
            dict(self.config), {x: v for x, v in self.odometer.items() if v}, self.dissipated, self.steps, self.halted
        )


def stabilize(particles: Iterable, tapes, order_policy: str | Policy = "fifo", domain: Box | None = None,
              budget: int | None = None, seed: int = 0, halt=None) -> StabilizationResult:
    """Run ARW to stability (or to ``halt``).

    ``particles``: sites, or ``(site, status)`` pairs with status ``"a"``/``"s"``.
    """
    eng = ARWEngine(tapes, domain, order_policy, seed, halt)
    for p in particles:
        site, sleeping = _particle(p)
        eng.add(site, sleeping)
    return eng.stabilize(budget)


def _particle(p) -> tuple[Site, bool]:
    if isinstance(p, tuple) and len(p) == 2 and isinstance(p[1], str):
        return as_site(p[0]), p[1] in ("s", "sleeping")
    return as_site(p), False


@dataclass
class World:
    """Initial particles plus tapes: the data a stabilization depends on."""

    particles: list
    tapes: object = None

    def counts(self) -> tuple[Counter, Counter]:
        total, active = Counter(), Counter()
        for p in self.particles:
            x, sleeping = _particle(p)
            total[x] += 1
            if not sleeping:
                active[x] += 1
        return total, active


def tapes_thinned_from(Fp, F) -> bool:
    """Whether ``Fp`` is obtained from ``F`` by removing sleep envelopes only."""
    if Fp is F or Fp == F:
        return True
    if isinstance(Fp, SleepThinned):
        return tapes_thinned_from(Fp.base, F)
    if isinstance(Fp, FixedTapes) and isinstance(F, FixedTapes):
        for x in set(Fp.tapes) | set(F.tapes):
            a, b = Fp.tapes.get(x, []), F.tapes.get(x, [])
            j = 0
            for instr in b:
                if j < len(a) and a[j] == instr:
                    j += 1
                elif instr != SLEEP:
                    return False
            if j != len(a):
                return False
        return True
    return False


def precedes(wp: World, w: World) -> bool:
    """Order on worlds under which the odometer can only grow from ``wp`` to ``w``."""
    tp, ap = wp.counts()
    t, a = w.counts()
    if any(tp[x] > t[x] for x in tp):
        return False
    if any(ap[x] > a[x] for x in ap):
        return False
    return tapes_thinned_from(wp.tapes, w.tapes)


class TapeSteps:
    """Step source that reads tapes with sleep envelopes switched off."""

    def __init__(self, tapes, skip_budget: int = 10**6):
        self.tapes = tapes
        self.ptr: Counter = Counter()
        self.skip_budget = skip_budget

    def __call__(self, x: Site) -> int:
        for _ in range(self.skip_budget):
            j = self.ptr[x]
            self.ptr[x] = j + 1
            instr = self.tapes.instruction(x, j)
            if instr != SLEEP:
                return instr
        raise RuntimeError(f"no step instruction found at {x}")


def off_sleep_run(particles: Iterable, stopper: Callable[[ContinuousWalk], Stop] | Sequence,
                  tapes=None, seed: int = 0, d: int | None = None, max_jumps: int = 10**6) -> list[Stop]:
    """Let each particle walk, sleep switched off, until its own stopping rule.

    ``stopper`` is one rule for all particles or one per particle. Steps come
    from ``tapes`` (skipping sleep envelopes) when given, else from fresh
    uniform draws; holding times are rate-1 exponentials per particle.
    Raises :class:`WalkTimeout` if a rule needs more than ``max_jumps`` jumps.
    """
    sites = [_particle(p)[0] for p in particles]
    rules = list(stopper) if isinstance(stopper, Sequence) else [stopper] * len(sites)
    if len(rules) != len(sites):
        raise ValueError("one stopping rule per particle expected")
    steps = TapeSteps(tapes) if tapes is not None else None
    out = []
    for i, (x, rule) in enumerate(zip(sites, rules)):
        g = _rng.generator(seed, _rng.TAG_WALK, i)
        walk = ContinuousWalk(x, g, rate=1.0, steps=steps, max_jumps=max_jumps)
        out.append(rule(walk))
    return out


def truncate_initial(density, M: int, d: int, rng: np.random.Generator) -> list[Site]:
    """Poisson initial particles restricted to the sup-norm ball B(0, M).

    ``density`` is a constant or a function of the site.
    """
    if M < 0:
        raise ValueError("M must be nonnegative")
    ball = Box(tuple([-M] * d), (2 * M + 1,) * d)
    sites = ball.sites()
    if callable(density):
        mu = np.array([density(x) for x in sites], dtype=float)
    else:
        mu = np.full(len(sites), float(density))
    counts = rng.poisson(mu)
    out = []
    for x, c in zip(sites, counts):
        out.extend([x] * int(c))
    return out


def poisson_particles(region: Iterable[Site], zeta: float, rng: np.random.Generator) -> list[Site]:
    sites = list(region)
    counts = rng.poisson(zeta, len(sites))
    out = []
    for x, c in zip(sites, counts):
        out.extend([x] * int(c))
    return out


def expected_truncated_mass(zeta: float, M: int, d: int) -> float:
    return zeta * (2 * M + 1) ** d


__all__ = [
    "SLEEP", "SLEEPING", "InstructionTapes", "FixedTapes", "SleepThinned", "ARWEngine", "stabilize",
    "StabilizationResult", "NonStabilized", "TapeExhausted", "World", "precedes", "off_sleep_run",
    "truncate_initial", "poisson_particles", "WalkTimeout",
]
