"""ARW state transformations and an event-driven continuous-time simulator."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence, TextIO

import numpy as np

from .engine import SLEEPING
from .lattice import Box, Site, as_site, directions, shift


def _value(eta, y):
    return eta.get(y, 0)


def _store(eta: dict, y: Site, v) -> None:
    if v == 0:
        eta.pop(y, None)
    else:
        eta[y] = v


def apply_sleep(eta: dict, y: Sequence[int]) -> dict:
    """A lone active particle at ``y`` falls asleep; anything else is unchanged."""
    y = as_site(y)
    out = dict(eta)
    if _value(eta, y) == 1:
        out[y] = SLEEPING
    return out


def apply_jump(eta: dict, y: Sequence[int], z: Sequence[int]) -> dict:
    """One active particle jumps from ``y`` to the neighbour ``z``, waking a sleeper there."""
    y, z = as_site(y), as_site(z)
    if len(y) != len(z) or sum(abs(a - b) for a, b in zip(y, z)) != 1:
        raise ValueError(f"{y} and {z} are not nearest neighbours")
    vy = _value(eta, y)
    if vy == SLEEPING or vy == 0:
        return dict(eta)
    out = dict(eta)
    _store(out, y, vy - 1)
    vz = _value(eta, z)
    out[z] = 2 if vz == SLEEPING else vz + 1
    return out


@dataclass
class ActivityCounter:
    """Changes of the site value ``eta(x)`` and the time of the last one."""

    site: Site
    changes: int = 0
    last_change: float = 0.0


@dataclass
class CTResult:
    config: dict
    time: float
    absorbed: bool
    events: int
    dissipated: int
    counters: dict[Site, ActivityCounter]
    truncated: bool = False
    trace: list = field(default_factory=list)


def simulate_ct(eta0, lam: float, horizon: float = math.inf, tracked: Iterable = (),
                domain: Box | None = None, seed: int | np.random.Generator = 0,
                jump_rate: str = "unit", max_events: int = 10**7, trace: bool = False) -> CTResult:
    """Gillespie simulation of ARW from a finite configuration.

    Every active particle carries a clock of rate ``J + lam``, where the jump
    rate ``J`` is 1 (``jump_rate="unit"``) or 2d (``"generator"``, one unit per
    directed edge). A ring is a sleep attempt with probability lam/(J+lam) and
    otherwise a jump to a uniform neighbour. Sleep attempts only take effect
    when the particle is alone.

    ``eta0``: mapping site -> count (or ``"s"``), or an iterable of sites.
    Runs until no active particle remains or the next event falls after
    ``horizon``. Exceeding ``max_events`` returns a result flagged ``truncated``.
    """
    eta = _initial(eta0)
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    d = len(next(iter(eta))) if eta else (len(domain.lower) if domain is not None else 1)
    J = 1.0 if jump_rate == "unit" else 2.0 * d if jump_rate == "generator" else None
    if J is None:
        raise ValueError("jump_rate must be 'unit' or 'generator'")
    p_sleep = lam / (J + lam)
    dirs = directions(d)
    tracked = [as_site(x) for x in tracked]
    counters = {x: ActivityCounter(x) for x in tracked}
    rows: list = []

    # one list entry per active particle, indexed for O(1) uniform choice
    active: list[Site] = []
    for x, v in eta.items():
        if v != SLEEPING:
            active.extend([x] * v)

    t = 0.0
    events = 0
    dissipated = 0
    truncated = False

    def record(x, old, new):
        c = counters.get(x)
        if c is not None and old != new:
            c.changes += 1
            c.last_change = t
            if trace:
                rows.append((t, x, old, new))

    while active:
        if events >= max_events:
            truncated = True
            break
        dt = rng.exponential(1.0 / ((J + lam) * len(active)))
        if t + dt > horizon:
            t = horizon
            break
        t += dt
        events += 1
        i = int(rng.integers(len(active)))
        x = active[i]
        n = eta[x]
        if rng.random() < p_sleep:
            if n == 1:
                eta[x] = SLEEPING
                active[i] = active[-1]
                active.pop()
                record(x, 1, SLEEPING)
            continue
        z = shift(x, dirs[int(rng.integers(len(dirs)))])
        _store(eta, x, n - 1)
        record(x, n, n - 1)
        active[i] = active[-1]
        active.pop()
        if domain is not None and z not in domain:
            dissipated += 1
            continue
        vz = eta.get(z, 0)
        if vz == SLEEPING:
            eta[z] = 2
            active.extend([z, z])
            record(z, SLEEPING, 2)
        else:
            eta[z] = vz + 1
            active.append(z)
            record(z, vz, vz + 1)

    absorbed = not active
    return CTResult(eta, t, absorbed, events, dissipated, counters, truncated, rows)


def _initial(eta0) -> dict:
    if isinstance(eta0, dict):
        return {as_site(x): v for x, v in eta0.items() if v != 0}
    eta: dict = {}
    for x in eta0:
        x = as_site(x)
        eta[x] = eta.get(x, 0) + 1
    return eta


def write_trace(rows, fh: TextIO) -> None:
    """Stream trace rows ``(t, site, old, new)`` as CSV."""
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(["t", "site", "old", "new"])
    for t, x, old, new in rows:
        w.writerow([repr(float(t)), ",".join(map(str, x)), old, new])


__all__ = ["apply_sleep", "apply_jump", "simulate_ct", "ActivityCounter", "CTResult", "write_trace"]
