"""Soft local times: simulating dependent picks from one Poisson cloud.

A cloud is a finite Poisson point process on ``ground x [0, height]`` with
intensity counting-measure times Lebesgue. Arithmetic is dtype-agnostic:
pass ``Fraction`` heights and densities (object arrays) for exact fixtures.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Sequence

import numpy as np

from . import rng as _rng
from .kernels import jump_cutoff, kernel_array
from .lattice import Box, Site, as_site


class NoPoint(RuntimeError):
    """The cloud cannot decide the next pick; it must be extended in height."""


@dataclass
class PointMeasure:
    """Points ``(ground[z[i]], v[i])``.

    ``height``: the cloud is complete (every Poisson point present) below this
    level; ``None`` means the listed points are all there is.
    """

    z: np.ndarray
    v: np.ndarray
    height: object = None

    def __post_init__(self):
        self.z = np.asarray(self.z, dtype=np.int64)
        self.v = _array(self.v)
        if len(self.z) != len(self.v):
            raise ValueError("z and v must have equal length")
        if len(set(self.v.tolist())) != len(self.v):
            raise ValueError("tied heights")

    def __len__(self):
        return len(self.v)


def _array(x) -> np.ndarray:
    x = list(x) if not isinstance(x, np.ndarray) else x
    if isinstance(x, np.ndarray):
        return x
    if any(isinstance(a, Fraction) for a in x):
        return np.array(x, dtype=object)
    return np.asarray(x, dtype=float)


def density(values, tol: float = 1e-12) -> np.ndarray:
    """Validate a probability mass function on the ground (counting base measure)."""
    g = _array(values)
    if any(a < 0 for a in g.tolist()):
        raise ValueError("density must be nonnegative")
    total = sum(g.tolist())
    if abs(total - 1) > tol:
        raise ValueError(f"density sums to {total}, not 1")
    return g


def poisson_cloud(n_ground: int, height: float, rng: np.random.Generator, lower: float = 0.0) -> PointMeasure:
    """Fresh Poisson cloud on ``ground x (lower, height]``; ties are resampled."""
    while True:
        counts = rng.poisson(height - lower, n_ground)
        z = np.repeat(np.arange(n_ground), counts)
        v = rng.uniform(lower, height, len(z))
        if len(np.unique(v)) == len(v) and not np.any(v == lower):
            return PointMeasure(z, v, height)


def _extend(m: PointMeasure, n_ground: int, new_height: float, rng: np.random.Generator) -> PointMeasure:
    top = poisson_cloud(n_ground, new_height, rng, lower=float(m.height))
    return PointMeasure(np.concatenate([m.z, top.z]), np.concatenate([m.v, top.v]), new_height)


def simulate_one(m: PointMeasure, g) -> tuple[object, int, PointMeasure]:
    """``(xi, picked cloud index, residual cloud)``.

    ``xi`` is the smallest ``v_i / g(z_i)``; the residual drops the picked
    point and lowers every other height by ``xi * g(z_i)``.
    """
    g = _array(g)
    gz = g[m.z]
    adm = np.flatnonzero(gz > 0)
    if len(adm) == 0:
        raise NoPoint("no cloud point over the support of g")
    ratios = m.v[adm] / gz[adm]
    k = int(np.argmin(ratios))
    xi = ratios[k]
    if np.count_nonzero(ratios == xi) > 1:
        raise ValueError("pick is not unique")
    gmax = max(g.tolist())
    if m.height is not None and xi * gmax > m.height:
        raise NoPoint("cloud too low to decide the pick")
    i = int(adm[k])
    keep = np.ones(len(m), dtype=bool)
    keep[i] = False
    height = None if m.height is None else m.height - xi * gmax
    return xi, i, PointMeasure(m.z[keep], m.v[keep] - xi * gz[keep], height)


@dataclass
class SoftLocalTime:
    G: np.ndarray
    xi: list
    picks: list[int]
    pick_ground: list[int]
    cloud: PointMeasure
    history: list = field(default_factory=list)

    def residual(self) -> PointMeasure:
        keep = np.ones(len(self.cloud), dtype=bool)
        keep[self.picks] = False
        z = self.cloud.z[keep]
        height = None if self.cloud.height is None else self.cloud.height - max(self.G.tolist())
        return PointMeasure(z, self.cloud.v[keep] - self.G[z], height)


def soft_local_time_run(m: PointMeasure, densities: Sequence, rng: np.random.Generator | None = None,
                        keep_history: bool = False) -> SoftLocalTime:
    """Pick one cloud point per density, accumulating ``G_k = sum_{j<=k} xi_j g_j``.

    With ``rng`` given, a cloud too low to decide a pick is extended with
    fresh points above its current height.
    """
    gs = [_array(g) for g in densities]
    n_ground = len(gs[0]) if gs else int(m.z.max(initial=-1)) + 1
    exact = m.v.dtype == object or any(g.dtype == object for g in gs)
    G = np.array([Fraction(0)] * n_ground, dtype=object) if exact else np.zeros(n_ground)
    alive = np.ones(len(m), dtype=bool)
    xis, picks, ground, hist = [], [], [], []
    for g in gs:
        while True:
            gz = g[m.z]
            adm = np.flatnonzero(alive & (gz > 0))
            if len(adm):
                ratios = (m.v[adm] - G[m.z[adm]]) / gz[adm]
                k = int(np.argmin(ratios))
                xi = ratios[k]
                level = max((G + xi * g).tolist())
                if m.height is None or level <= m.height:
                    break
            if m.height is None or rng is None:
                raise NoPoint("cloud exhausted")
            new_h = max(2 * float(m.height), 1.0)
            m = _extend(m, n_ground, new_h, rng)
            alive = np.concatenate([alive, np.ones(len(m) - len(alive), dtype=bool)])
        if np.count_nonzero(ratios == xi) > 1:
            raise ValueError("pick is not unique")
        i = int(adm[k])
        G = G + xi * g
        alive[i] = False
        xis.append(xi)
        picks.append(i)
        ground.append(int(m.z[i]))
        if keep_history:
            hist.append(G.copy())
    return SoftLocalTime(G, xis, picks, ground, m, hist)


@dataclass
class CouplingReport:
    G_max: float
    zeta_prime: float
    dominated: bool
    picks: list[Site]
    pick_heights: list[float]
    cloud_size: int
    seed: int
    window: Box
    cloud_sites: list[Site] = field(default_factory=list, repr=False)

    def to_json(self) -> dict:
        return {
            "G_max": float(self.G_max),
            "zeta_prime": float(self.zeta_prime),
            "dominated": bool(self.dominated),
            "picks": [list(p) for p in self.picks],
            "cloud_size": int(self.cloud_size),
            "seed": self.seed,
        }


def couple_walks_to_cloud(starts: Iterable[Sequence[int]], t: float, zeta_prime: float, D: Iterable[Sequence[int]],
                          window: Box | None = None, seed: int = 0, eps: float = 1e-9,
                          L: int | None = None, c_couple: float = 1.0) -> CouplingReport:
    """Couple walkers run for kernel time ``t`` with a Poisson(``zeta_prime``) cloud.

    Walker j's endpoint is the ground point picked with density ``p_t(x_j, .)``.
    The cloud below level ``zeta_prime`` dominates the endpoints in ``D`` as
    soon as every such pick has height below ``zeta_prime``, which is
    guaranteed when the soft local time stays below ``zeta_prime`` on ``D``.
    """
    starts = [as_site(x) for x in starts]
    D = [as_site(x) for x in D]
    if L is not None and t < c_couple * L * L:
        raise ValueError(f"coupling needs t >= c L^2 = {c_couple * L * L}, got t = {t}")
    pts = starts + D
    if not pts:
        return CouplingReport(0.0, zeta_prime, True, [], [], 0, seed, window)
    d = len(pts[0])
    n_max = jump_cutoff(t, eps)
    if window is None:
        lo = [min(p[i] for p in pts) - n_max for i in range(d)]
        hi = [max(p[i] for p in pts) + n_max for i in range(d)]
        window = Box(tuple(lo), tuple(h - l + 1 for l, h in zip(lo, hi)))
    for x in starts:
        gap = min(min(a - l, (l + s - 1) - a) for a, l, s in zip(x, window.lower, window.side))
        if gap < n_max:
            raise ValueError(f"window too small: walker at {x} needs radius {n_max} around it (has {gap})")
    index = {x: i for i, x in enumerate(window)}
    if any(x not in index for x in D):
        raise ValueError("D must lie inside the window")
    ker = kernel_array(t, d, n_max, eps)
    dens = []
    for x in starts:
        g = np.zeros(window.side)
        sl = tuple(slice(a - l - n_max, a - l + n_max + 1) for a, l in zip(x, window.lower))
        g[sl] = ker
        g = g.ravel()
        dens.append(g / g.sum())
    rng = _rng.generator(seed, _rng.TAG_CLOUD)
    cloud = poisson_cloud(len(window), max(float(zeta_prime), 1e-9), rng)
    if not starts:
        return CouplingReport(0.0, zeta_prime, True, [], [], len(cloud), seed, window)
    run = soft_local_time_run(cloud, dens, rng)
    sites = window.sites()
    d_idx = np.array(sorted(index[x] for x in D), dtype=np.int64)
    G_max = float(run.G[d_idx].max()) if len(d_idx) else 0.0
    in_D = set(d_idx.tolist())
    heights = [float(run.cloud.v[i]) for i in run.picks]
    dominated = all(h < zeta_prime for i, h in zip(run.pick_ground, heights) if i in in_D)
    below = run.cloud.v < zeta_prime
    return CouplingReport(G_max, zeta_prime, dominated, [sites[i] for i in run.pick_ground], heights,
                          int(below.sum()), seed, window, [sites[i] for i in run.cloud.z[below]])
