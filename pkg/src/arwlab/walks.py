"""Continuous-time simple random walks with pluggable step sources."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .lattice import Site, as_site, directions, shift


class WalkTimeout(RuntimeError):
    """A stopping rule did not trigger within the jump budget."""

    def __init__(self, jumps: int, position: Site):
        super().__init__(f"stopping rule not reached after {jumps} jumps (at {position})")
        self.jumps = jumps
        self.position = position


class UniformSteps:
    """I.i.d. uniform unit steps from a generator."""

    def __init__(self, d: int, rng: np.random.Generator):
        self._dirs = np.array(directions(d))
        self._rng = rng
        self._buf = np.empty(0, dtype=np.int64)
        self._pos = 0

    def __call__(self, x: Site) -> int:
        if self._pos >= len(self._buf):
            self._buf = self._dirs[self._rng.integers(0, len(self._dirs), 256)]
            self._pos = 0
        v = int(self._buf[self._pos])
        self._pos += 1
        return v


class ContinuousWalk:
    """Walk on Z^d jumping at total rate ``rate`` to a neighbour chosen by ``steps``.

    ``rate=1`` is the engines' convention (one clock per particle). The heat
    kernels use independent rate-1 coordinates, i.e. ``rate=d``.
    """

    def __init__(
        self,
        start: Sequence[int],
        rng: np.random.Generator,
        rate: float = 1.0,
        steps: Callable[[Site], int] | None = None,
        max_jumps: int = 10**7,
    ):
        self.start = as_site(start)
        self.position = self.start
        self.time = 0.0
        self.jumps = 0
        self.max_disp = 0
        self.rate = rate
        self.max_jumps = max_jumps
        self._rng = rng
        self._steps = steps if steps is not None else UniformSteps(len(self.start), rng)
        self._hold = np.empty(0)
        self._hpos = 0
        self.next_jump = self._holding()

    def _holding(self) -> float:
        if self._hpos >= len(self._hold):
            self._hold = self._rng.exponential(1.0 / self.rate, 256)
            self._hpos = 0
        h = float(self._hold[self._hpos])
        self._hpos += 1
        return h

    def jump(self) -> Site:
        """Perform the next jump and move the clock to its time."""
        if self.jumps >= self.max_jumps:
            raise WalkTimeout(self.jumps, self.position)
        self.time = self.next_jump
        self.position = shift(self.position, self._steps(self.position))
        self.jumps += 1
        disp = max(abs(a - b) for a, b in zip(self.position, self.start))
        if disp > self.max_disp:
            self.max_disp = disp
        self.next_jump = self.time + self._holding()
        return self.position

    def advance_to(self, t: float) -> Site:
        """Position at time ``t`` (must not go backwards)."""
        if t < self.time:
            raise ValueError("cannot rewind a walk")
        while self.next_jump <= t:
            self.jump()
        self.time = t
        return self.position


@dataclass(frozen=True)
class Stop:
    time: float
    position: Site
    max_disp: int = 0


def stop_immediately(walk: ContinuousWalk) -> Stop:
    return Stop(walk.time, walk.position, walk.max_disp)


def after_hops(n: int) -> Callable[[ContinuousWalk], Stop]:
    def rule(walk: ContinuousWalk) -> Stop:
        for _ in range(n):
            walk.jump()
        return Stop(walk.time, walk.position, walk.max_disp)

    return rule


def on_exit(region) -> Callable[[ContinuousWalk], Stop]:
    """Stop at the first jump that leaves ``region`` (or immediately if outside)."""

    def rule(walk: ContinuousWalk) -> Stop:
        while walk.position in region:
            walk.jump()
        return Stop(walk.time, walk.position, walk.max_disp)

    return rule
