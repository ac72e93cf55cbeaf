"""Scale sequences, density ladders and the recursive bound on escape probabilities.

Scales are exact integers, densities exact rationals, and exponentials are
evaluated with mpmath at 50 significant digits.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction

import mpmath

DPS = 50


def _mp():
    return mpmath.workdps(DPS)


def as_fraction(x) -> Fraction:
    if isinstance(x, Fraction):
        return x
    if isinstance(x, float):
        return Fraction(repr(x))
    return Fraction(x)


def iroot(n: int, k: int) -> int:
    """Largest integer r with r**k <= n."""
    if n < 0 or k < 1:
        raise ValueError("iroot needs n >= 0 and k >= 1")
    if n < 2:
        return n
    r = 1 << ((n.bit_length() + k - 1) // k)
    while True:
        s = ((k - 1) * r + n // r ** (k - 1)) // k
        if s >= r:
            break
        r = s
    while r**k > n:
        r -= 1
    while (r + 1) ** k <= n:
        r += 1
    return r


def floor_power(L: int, gamma: Fraction) -> int:
    """Exact ``floor(L ** gamma)`` for rational gamma in (0, 1)."""
    return iroot(L**gamma.numerator, gamma.denominator)


@dataclass(frozen=True)
class ScaleTable:
    L0: int
    gamma: Fraction
    L: tuple[int, ...]
    R: tuple[int | None, ...]
    multipliers: tuple[int, ...]

    @property
    def k_max(self) -> int:
        return len(self.L) - 1

    @property
    def first_kernel_scale(self) -> int | None:
        """First k with 5 R_k <= L_k, i.e. where the kernel boxes are nonempty."""
        for k in range(1, len(self.L)):
            if 5 * self.R[k] <= self.L[k]:
                return k
        return None

    def growth_constant(self) -> mpmath.mpf:
        with _mp():
            g = mpmath.mpf(self.gamma.numerator) / self.gamma.denominator
            return min(mpmath.mpf(m) / mpmath.power(L, g) for m, L in zip(self.multipliers, self.L))


def scale_table(L0: int = 10000, gamma=Fraction(1, 10), k_max: int = 10) -> ScaleTable:
    """``L_{k+1} = floor(L_k^gamma)^2 L_k`` and ``R_{k+1} = floor(L_k^gamma) L_k``."""
    gamma = as_fraction(gamma)
    if L0 < 2:
        raise ValueError("L0 must be >= 2")
    if not 0 < gamma < 1:
        raise ValueError("gamma must lie in (0, 1)")
    L, R, mult = [int(L0)], [None], []
    for _ in range(k_max):
        m = floor_power(L[-1], gamma)
        mult.append(m)
        R.append(m * L[-1])
        L.append(m * m * L[-1])
    mult.append(floor_power(L[-1], gamma))
    return ScaleTable(int(L0), gamma, tuple(L), tuple(R), tuple(mult))


@dataclass(frozen=True)
class DensityLadder:
    zeta0: Fraction
    zeta: tuple[Fraction, ...]
    intermediate: tuple[tuple[Fraction, ...], ...]

    def interleaved(self) -> bool:
        for k, row in enumerate(self.intermediate):
            if row[0] != self.zeta[k] or row[4] != self.zeta[k + 1]:
                return False
            if any(not row[r + 1] < row[r] for r in range(4)):
                return False
        return True


def density_ladder(zeta0, k_max: int) -> DensityLadder:
    """``zeta_k = zeta0 (1 - 1/4 sum_{j<=k} 1/j^2)`` and ``zeta_k^r = zeta_k - r zeta0 / (16 (k+1)^2)``."""
    z0 = as_fraction(zeta0)
    if not 0 < z0 <= 1:
        raise ValueError("zeta0 must lie in (0, 1]")
    zeta, s = [], Fraction(0)
    for k in range(k_max + 2):
        if k:
            s += Fraction(1, k * k)
        zeta.append(z0 * (1 - s / 4))
    inter = tuple(
        tuple(zeta[k] - r * z0 / (16 * (k + 1) ** 2) for r in range(5)) for k in range(k_max + 1)
    )
    ladder = DensityLadder(z0, tuple(zeta[: k_max + 2]), inter)
    if not ladder.interleaved():
        raise AssertionError("density ladder is not strictly interleaved")
    return ladder


@dataclass(frozen=True)
class RecursionParams:
    """``c3``, ``c4`` stand in for unspecified constants; the defaults are illustrative."""

    d: int = 1
    c3: float = 1.0
    c4: float = 1.0
    kbar: int = 0
    p_kbar: object = None

    def __post_init__(self):
        if self.d < 1:
            raise ValueError("dimension must be >= 1")
        if self.c3 < 0 or self.c4 < 0:
            raise ValueError("c3 and c4 must be nonnegative")


def _gamma(table: ScaleTable):
    return mpmath.mpf(table.gamma.numerator) / table.gamma.denominator


def error_term(k: int, params: RecursionParams, table: ScaleTable) -> mpmath.mpf:
    with _mp():
        return mpmath.mpf(params.c3) * mpmath.exp(-mpmath.mpf(params.c4) * mpmath.power(table.L[k], _gamma(table) / 3))


def recursion_step(p_k, k: int, params: RecursionParams, table: ScaleTable) -> mpmath.mpf:
    """``(L_{k+1}/L_k)^{2d} p_k^2 + c3 exp(-c4 L_k^{gamma/3})``, clamped to [0, 1]."""
    with _mp():
        p = mpmath.mpf(p_k)
        if not 0 <= p <= 1:
            raise ValueError("p_k must lie in [0, 1]")
        ratio = mpmath.mpf(table.L[k + 1]) / table.L[k]
        v = ratio ** (2 * params.d) * p * p + error_term(k, params, table)
        return min(v, mpmath.mpf(1))


def threshold(k: int, table: ScaleTable) -> mpmath.mpf:
    """``exp(-log^2 L_k)``."""
    with _mp():
        return mpmath.exp(-mpmath.log(table.L[k]) ** 2)


def induction_lhs(k: int, d: int, table: ScaleTable, c3: float, c4: float) -> mpmath.mpf:
    with _mp():
        g = _gamma(table)
        logL = mpmath.log(table.L[k])
        first = mpmath.power(table.L[k], 4 * d * g) * mpmath.exp(-(1 - 2 * g) * logL**2)
        return first + error_term(k, RecursionParams(d, c3, c4), table)


def induction_check(k: int, d: int, table: ScaleTable, c3: float, c4: float) -> bool:
    return bool(induction_lhs(k, d, table, c3, c4) <= 1)


def zeta0_admissible(zeta0, k: int, table: ScaleTable) -> bool:
    """Whether ``zeta0 > 8 (k+1)^2 L_k^{-gamma/3}``."""
    with _mp():
        bound = 8 * (k + 1) ** 2 * mpmath.power(table.L[k], -_gamma(table) / 3)
        z = as_fraction(zeta0)
        return bool(mpmath.mpf(z.numerator) / z.denominator > bound)


@dataclass
class Certificate:
    granted: bool
    kbar: int
    k_max: int
    failing_k: int | None = None
    reason: str = ""
    rows: list[dict] = field(default_factory=list)


def decay_certificate(params: RecursionParams, table: ScaleTable | None = None, k_max: int = 20,
                      zeta0=None) -> Certificate:
    """Replay the induction ``p_k <= exp(-log^2 L_k)`` for ``kbar <= k <= k_max``.

    Granted when the base case holds at ``kbar`` and the inductive inequality
    holds at every ``k`` in range. Each row also carries the literal iterate of
    :func:`recursion_step` from ``p_kbar`` and whether it sits below the
    threshold, for comparison; that column does not affect the verdict.
    """
    kbar = params.kbar
    if k_max < kbar:
        raise ValueError(f"k_max = {k_max} is below kbar = {kbar}")
    if table is None or table.k_max < k_max + 1:
        L0, gamma = (table.L0, table.gamma) if table is not None else (10000, Fraction(1, 10))
        table = scale_table(L0, gamma, k_max + 1)
    ladder = density_ladder(zeta0, k_max) if zeta0 is not None else None
    with _mp():
        p = threshold(kbar, table) if params.p_kbar is None else mpmath.mpf(params.p_kbar)
        cert = Certificate(True, kbar, k_max)
        if p > threshold(kbar, table):
            cert.granted, cert.failing_k = False, kbar
            cert.reason = "base case: p_kbar exceeds exp(-log^2 L_kbar)"
        for k in range(kbar, k_max + 1):
            lhs = induction_lhs(k, params.d, table, params.c3, params.c4)
            thr = threshold(k, table)
            row = {
                "k": k,
                "L_k": table.L[k],
                "R_k": table.R[k],
                "zeta_k": ladder.zeta[k] if ladder else None,
                "p_bound": p,
                "threshold": thr,
                "recursion_ok": bool(p <= thr),
                "margin": 1 - lhs,
            }
            cert.rows.append(row)
            if cert.granted and lhs > 1:
                cert.granted, cert.failing_k = False, k
                cert.reason = f"inductive inequality fails at k = {k}"
            p = recursion_step(p, k, params, table)
    return cert
