"""Heat kernels of continuous-time simple random walk and scheduled stopping times.

Kernel convention: in Z^d the d coordinates are independent rate-1 walks on Z,
so ``p^d_t(0, x) = prod_k p^1_t(0, x_k)``. This walk jumps at total rate d;
the rate-1 walkers of the engines at time ``t`` correspond to kernel time ``t/d``.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Iterable, Sequence, TextIO

import numpy as np
from scipy.special import gammaln
from scipy.stats import poisson

from .lattice import Paving, Site, as_site
from .walks import ContinuousWalk, Stop

DEFAULT_EPS = 1e-12


def _check_eps(eps: float) -> None:
    if not 0 < eps <= 1e-6:
        raise ValueError("truncation tolerance must lie in (0, 1e-6]")


def jump_cutoff(t: float, eps: float = DEFAULT_EPS) -> int:
    """Smallest n with P[Poisson(t) > n] < eps."""
    if t == 0:
        return 0
    n = int(poisson.isf(eps, t))
    while poisson.sf(n, t) >= eps:
        n += 1
    return n


@lru_cache(maxsize=256)
def _window(t: float, eps: float) -> np.ndarray:
    n_max = jump_cutoff(t, eps)
    # dist[n_max + x] = P[discrete walk at x after n steps], advanced in place
    dist = np.zeros(2 * n_max + 3)
    dist[n_max + 1] = 1.0
    out = np.zeros_like(dist)
    for n in range(n_max + 1):
        w = math.exp(-t + n * math.log(t) - gammaln(n + 1)) if t > 0 else 1.0
        out += w * dist
        nxt = np.zeros_like(dist)
        nxt[1:] += 0.5 * dist[:-1]
        nxt[:-1] += 0.5 * dist[1:]
        dist = nxt
    out = out[1:-1]
    out.setflags(write=False)
    return out


def kernel_window_1d(t: float, eps: float = DEFAULT_EPS) -> tuple[np.ndarray, np.ndarray]:
    """``(xs, p)`` with ``p[i] = p^1_t(0, xs[i])`` on ``|x| <= n_max``."""
    if t < 0:
        raise ValueError("time must be nonnegative")
    _check_eps(eps)
    p = _window(float(t), float(eps))
    n_max = (len(p) - 1) // 2
    return np.arange(-n_max, n_max + 1), p


def heat_kernel_1d(t: float, x: int, eps: float = DEFAULT_EPS) -> float:
    """P[rate-1 walk on Z started at 0 is at ``x`` at time ``t``], to additive ``eps``.

    Sum over the number of jumps n of Poisson(t) weights times the n-step
    walk law, truncated once the Poisson tail drops below ``eps``.
    """
    xs, p = kernel_window_1d(t, eps)
    n_max = xs[-1]
    return float(p[n_max + x]) if abs(x) <= n_max else 0.0


def heat_kernel_d(t: float, x: Sequence[int], eps: float = DEFAULT_EPS) -> float:
    return math.prod(heat_kernel_1d(t, int(c), eps) for c in x)


def kernel_array(t: float, d: int, radius: int, eps: float = DEFAULT_EPS) -> np.ndarray:
    """Dense d-dimensional kernel on ``[-radius, radius]^d`` (outer product of 1d windows)."""
    xs, p = kernel_window_1d(t, eps)
    n_max = xs[-1]
    line = np.zeros(2 * radius + 1)
    lo = max(-radius, -n_max)
    hi = min(radius, n_max)
    line[lo + radius: hi + radius + 1] = p[lo + n_max: hi + n_max + 1]
    out = line
    for _ in range(d - 1):
        out = np.multiply.outer(out, line)
    return out


def write_kernel_table(t_values: Iterable[float], d: int, radius: int, fh: TextIO, eps: float = DEFAULT_EPS) -> None:
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(["t"] + [f"x{i + 1}" for i in range(d)] + ["p"])
    for t in t_values:
        arr = kernel_array(t, d, radius, eps)
        for idx in np.ndindex(arr.shape):
            w.writerow([repr(float(t))] + [i - radius for i in idx] + [repr(float(arr[idx]))])


@dataclass(frozen=True)
class HopSchedule:
    """Observation times ``l * lag`` (l >= 0) against the half-kernels of a paving."""

    paving: Paving
    lag: float

    def __post_init__(self):
        if self.lag < self.paving.side**2:
            raise ValueError(f"lag {self.lag} must be at least side^2 = {self.paving.side ** 2}")


@dataclass(frozen=True)
class HopStop:
    time: float
    steps: int
    position: Site
    max_disp: int
    timed_out: bool = False


def hopping_stop(walk: ContinuousWalk, schedule: HopSchedule, max_steps: int = 10**5) -> HopStop:
    """First schedule time (l = 0 included) at which the walk sits in a half-kernel."""
    for l in range(max_steps + 1):
        x = walk.advance_to(l * schedule.lag)
        if schedule.paving.in_half_kernel(x):
            return HopStop(walk.time, l, x, walk.max_disp)
    return HopStop(walk.time, max_steps, walk.position, walk.max_disp, timed_out=True)


def hop_rule(schedule: HopSchedule) -> Callable[[ContinuousWalk], Stop]:
    """``hopping_stop`` as a stopping rule for :func:`arwlab.engine.off_sleep_run`."""

    def rule(walk: ContinuousWalk) -> Stop:
        h = hopping_stop(walk, schedule)
        if h.timed_out:
            from .walks import WalkTimeout

            raise WalkTimeout(walk.jumps, walk.position)
        return Stop(h.time, h.position, h.max_disp)

    return rule


@dataclass(frozen=True)
class SieveSchedule:
    """Times ``s * L^2.02`` for s >= 1, capped at ``L^2.04``, against a target set."""

    L: float
    target: object

    def __post_init__(self):
        if self.L < 2:
            raise ValueError("sieving needs L >= 2")

    @property
    def lag(self) -> float:
        return float(self.L) ** 2.02

    @property
    def cap(self) -> float:
        return float(self.L) ** 2.04

    def contains(self, x) -> bool:
        tgt = self.target
        if tgt is None:
            return False
        if callable(tgt):
            return bool(tgt(x))
        return x in tgt


@dataclass(frozen=True)
class SieveStop:
    time: float
    position: Site
    capped: bool


def sieving_stop(walk: ContinuousWalk, schedule: SieveSchedule) -> SieveStop:
    s = 1
    while s * schedule.lag <= schedule.cap:
        x = walk.advance_to(s * schedule.lag)
        if schedule.contains(x):
            return SieveStop(walk.time, x, False)
        s += 1
    return SieveStop(schedule.cap, walk.advance_to(schedule.cap), True)


def balanced_kernel_sum(t: float, points: Iterable[Sequence[int]], origin: Sequence[int] | None = None,
                        eps: float = DEFAULT_EPS) -> float:
    """Sum over points of ``p_t(0, x_j - origin)``."""
    pts = [as_site(p) for p in points]
    if not pts:
        return 0.0
    origin = as_site(origin) if origin is not None else (0,) * len(pts[0])
    return math.fsum(heat_kernel_d(t, tuple(a - o for a, o in zip(p, origin)), eps) for p in pts)


def extremal_balanced_sum(t: float, paving: Paving, boxes: Iterable[Sequence[int]], per_box: int,
                          origin: Sequence[int] | None = None, eps: float = DEFAULT_EPS) -> float:
    """Largest kernel sum over collections with at most ``per_box`` points in each listed tile.

    Each tile contributes ``per_box`` copies of its site nearest the origin in
    kernel value (the kernel is monotone in each |coordinate|).
    """
    origin = as_site(origin) if origin is not None else (0,) * paving.d
    total = []
    for k in boxes:
        best = max(heat_kernel_d(t, tuple(a - o for a, o in zip(x, origin)), eps) for x in paving.box(k))
        total.append(per_box * best)
    return math.fsum(total)


def integration_bound(zeta: float, L: int, t: float, d: int, c: float = 1.0) -> float:
    """``zeta * (1 + c L/sqrt(t) + ... + c L^d/sqrt(t)^d)``; ``c`` is a free constant."""
    r = L / math.sqrt(t)
    return zeta * (1 + c * sum(r**k for k in range(1, d + 1)))
