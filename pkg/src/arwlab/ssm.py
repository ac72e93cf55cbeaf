"""Stochastic sandpile as an abelian message network.

Each site counts ordinary (``q``) and activation (``r``) messages received and,
after every arrival, emits ``f(q', r') - f(q, r)`` ordinary messages to
neighbours read from its direction tape, where
``f(q, r) = min(q, max(q - q mod kappa, r))``.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np

from . import rng as _rng
from .engine import NonStabilized
from .lattice import Box, Site, as_site, directions, shift
from .ordering import Policy, make_policy
from .walks import ContinuousWalk, Stop

ORDINARY = 0
ACTIVATION = 1


def toppling_f(q: int, r: int, kappa: int) -> int:
    if kappa < 1:
        raise ValueError("capacity kappa must be >= 1")
    if q < 0 or r < 0:
        raise ValueError("message counts must be nonnegative")
    return min(q, max(q - q % kappa, r))


def f_table(kappa: int, size: int) -> np.ndarray:
    """``table[r, q] = f(q, r)`` for ``0 <= q, r < size``."""
    return np.array([[toppling_f(q, r, kappa) for q in range(size)] for r in range(size)])


class DirectionTapes:
    """Lazy per-site tapes of uniform unit directions (``+j`` / ``-j``)."""

    def __init__(self, d: int, seed: int, chunk: int = 32):
        self.d, self.seed = d, int(seed)
        self._dirs = np.array(directions(d), dtype=np.int64)
        self._chunk = chunk
        self._tapes: dict[Site, list[int]] = {}
        self._gens: dict = {}

    def direction(self, x: Site, j: int) -> int:
        """Entry ``j`` (1-based, as in the update rule) of the tape at ``x``."""
        tape = self._tapes.get(x)
        while tape is None or j > len(tape):
            g = self._gens.get(x)
            if g is None:
                g = self._gens[x] = _rng.generator(self.seed, _rng.TAG_SSM_TAPE, *x)
                tape = self._tapes[x] = []
            tape.extend(int(v) for v in self._dirs[g.integers(0, len(self._dirs), self._chunk)])
        return tape[j - 1]


class FixedDirections:
    def __init__(self, d: int, tapes: Mapping):
        from .engine import _parse_key, parse_instruction

        self.d = d
        self.tapes = {as_site(_parse_key(k)): [parse_instruction(i) for i in v] for k, v in tapes.items()}

    def direction(self, x: Site, j: int) -> int:
        t = self.tapes.get(x, ())
        if j > len(t):
            raise IndexError(f"direction tape at {x} has only {len(t)} entries")
        return t[j - 1]


def receive(x: Sequence[int], state: tuple[int, int], kind: int, tapes, kappa: int):
    """Process one message at ``x``; returns the new state and the emitted targets."""
    x = as_site(x)
    q, r = state
    before = toppling_f(q, r, kappa)
    q, r = (q + 1, r) if kind == ORDINARY else (q, r + 1)
    after = toppling_f(q, r, kappa)
    out = [shift(x, tapes.direction(x, j)) for j in range(before + 1, after + 1)]
    return (q, r), out


@dataclass
class SSMResult:
    retained: dict
    states: dict
    odometer: dict
    dissipated: int
    steps: int
    halted: bool = False

    def snapshot(self, seed=None) -> dict:
        key = lambda x: ",".join(map(str, x))  # noqa: E731
        return {
            "config": {key(x): {"q": q, "r": r, "retained": self.retained.get(x, 0)}
                       for x, (q, r) in sorted(self.states.items())},
            "odometer": {key(x): v for x, v in sorted(self.odometer.items())},
            "dissipated": self.dissipated,
            "seed": seed,
            "steps": self.steps,
        }


class SSMNetwork:
    """Message network with a pending-message queue ordered by a policy.

    The message-odometer counts messages processed per site. Messages routed
    outside ``domain`` are counted as dissipated and dropped.
    """

    def __init__(self, kappa: int, tapes, domain: Box | None = None, policy: str | Policy = "fifo",
                 seed: int = 0, halt: Callable[[Site], bool] | None = None):
        if kappa < 1:
            raise ValueError("capacity kappa must be >= 1")
        self.kappa = kappa
        self.tapes = tapes
        self.domain = domain
        self.policy = make_policy(policy, seed)
        self.halt = halt
        self.states: dict[Site, tuple[int, int]] = {}
        self.odometer: Counter = Counter()
        self.dissipated = 0
        self.steps = 0
        self.halted = False

    def send(self, x: Sequence[int], kind: int = ORDINARY) -> None:
        x = as_site(x)
        if self.domain is not None and x not in self.domain:
            self.dissipated += 1
            return
        self.policy.push((x, kind))
        if self.halt is not None and self.halt(x):
            self.halted = True

    def step(self) -> Site:
        x, kind = self.policy.pop()
        state, out = receive(x, self.states.get(x, (0, 0)), kind, self.tapes, self.kappa)
        self.states[x] = state
        self.odometer[x] += 1
        self.steps += 1
        for z in out:
            self.send(z, ORDINARY)
        return x

    def retained(self) -> dict[Site, int]:
        out = {}
        for x, (q, r) in self.states.items():
            k = q - toppling_f(q, r, self.kappa)
            if k:
                out[x] = k
        return out

    def stabilize(self, budget: int | None = None) -> SSMResult:
        if budget is None and self.domain is None:
            raise ValueError("an unbounded lattice needs a step budget")
        limit = None if budget is None else self.steps + budget
        while len(self.policy) and not self.halted:
            if limit is not None and self.steps >= limit:
                raise NonStabilized(self.steps, self.result().snapshot())
            self.step()
        return self.result()

    def result(self) -> SSMResult:
        return SSMResult(self.retained(), dict(self.states), dict(self.odometer), self.dissipated,
                         self.steps, self.halted)


def stabilize_ssm(messages: Iterable, tapes, kappa: int, order_policy: str | Policy = "fifo",
                  domain: Box | None = None, budget: int | None = None, seed: int = 0,
                  activations: Iterable = (), halt=None,
                  initial_states: Mapping | None = None) -> SSMResult:
    net = SSMNetwork(kappa, tapes, domain, order_policy, seed, halt)
    if initial_states:
        net.states.update({as_site(x): tuple(v) for x, v in initial_states.items()})
    for x in messages:
        net.send(x, ORDINARY)
    for x in activations:
        net.send(x, ACTIVATION)
    return net.stabilize(budget)


class _DiagonalSteps:
    """Forces one hop per call by feeding a site an ordinary plus an activation message."""

    def __init__(self, states: dict, tapes, kappa: int):
        self.states, self.tapes, self.kappa = states, tapes, kappa

    def __call__(self, x: Site) -> int:
        q, r = self.states.get(x, (0, 0))
        state, out = receive(x, (q, r), ORDINARY, self.tapes, self.kappa)
        state, out2 = receive(x, state, ACTIVATION, self.tapes, self.kappa)
        self.states[x] = state
        (z,) = out + out2
        return next(j for j in directions(len(x)) if shift(x, j) == z)


def off_sleep_ssm(messages: Iterable, stopper, kappa: int, tapes=None, seed: int = 0, d: int | None = None,
                  initial_states: Mapping | None = None, max_jumps: int = 10**6):
    """Walk each ordinary message to its stopping rule, keeping every site on the diagonal.

    Returns ``(stops, states)``. Each hop feeds the current site one ordinary
    and one activation message; since ``f(q, q) = q`` exactly one message
    leaves, in the direction of the next fresh tape entry.
    """
    sites = [as_site(x) for x in messages]
    states = {as_site(x): tuple(v) for x, v in (initial_states or {}).items()}
    for x, (q, r) in states.items():
        if q != r:
            raise ValueError(f"site {x} starts off the diagonal: {(q, r)}")
    if not sites:
        return [], states
    d = d or len(sites[0])
    tapes = tapes if tapes is not None else DirectionTapes(d, _rng.derive_seed(seed, _rng.TAG_SSM_TAPE))
    steps = _DiagonalSteps(states, tapes, kappa)
    rules = list(stopper) if isinstance(stopper, Sequence) else [stopper] * len(sites)
    out: list[Stop] = []
    for i, (x, rule) in enumerate(zip(sites, rules)):
        walk = ContinuousWalk(x, _rng.generator(seed, _rng.TAG_WALK, i), steps=steps, max_jumps=max_jumps)
        out.append(rule(walk))
    return out, states
