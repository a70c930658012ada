"""Exact rational index arithmetic.

Every exponent that enters the inequalities and the variational problem is an
algebraic function of the dilation weights, the Sobolev orders and the
Lebesgue exponents. All of it is done with :class:`fractions.Fraction` so
identities can be asserted with ``==``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Sequence, Union

import mpmath

from .errors import (
    DegenerateInterpolationError,
    DegeneratePairError,
    InadmissibleError,
    InfeasibleExponentError,
    InvalidStructureError,
    SupercriticalOrderError,
)

RationalLike = Union[int, str, Fraction]


def as_rational(x: RationalLike | float) -> Fraction:
    """Coerce ``x`` to a Fraction. Floats go through their shortest repr."""
    if isinstance(x, Fraction):
        return x
    if isinstance(x, bool):
        raise TypeError("booleans are not rationals")
    if isinstance(x, int):
        return Fraction(x)
    if isinstance(x, float):
        return Fraction(repr(x))
    if isinstance(x, str):
        return Fraction(x.strip())
    raise TypeError(f"cannot interpret {x!r} as a rational")


def fmt_rational(x: Fraction) -> str:
    return str(x.numerator) if x.denominator == 1 else f"{x.numerator}/{x.denominator}"


@dataclass(frozen=True)
class DilationStructure:
    """Diagonal dilation weights of an abelian graded group and its homogeneous dimension."""

    weights: tuple[Fraction, ...]
    Q: Fraction = field(init=False)

    def __post_init__(self):
        ws = tuple(as_rational(w) for w in self.weights)
        object.__setattr__(self, "weights", ws)
        object.__setattr__(self, "Q", homogeneous_dimension(ws))

    @classmethod
    def euclidean(cls, n: int) -> "DilationStructure":
        return cls(tuple(Fraction(1) for _ in range(n)))

    @property
    def dims(self) -> int:
        return len(self.weights)

    def dilate_point(self, r: float, x: Sequence[float]) -> tuple[float, ...]:
        return tuple(r ** float(w) * xi for w, xi in zip(self.weights, x))


@dataclass(frozen=True)
class IndexSet:
    a1: Fraction
    a2: Fraction
    p: Fraction
    q: Fraction

    def __post_init__(self):
        for name in ("a1", "a2", "p", "q"):
            object.__setattr__(self, name, as_rational(getattr(self, name)))


@dataclass(frozen=True)
class Verdict:
    admissible: bool
    failures: tuple[str, ...] = ()

    def __bool__(self) -> bool:
        return self.admissible


@dataclass(frozen=True)
class GNExponents:
    theta1: Fraction
    theta2: Fraction


@dataclass(frozen=True)
class InterpolationExponent:
    s: Fraction
    in_unit_interval: bool


@dataclass(frozen=True)
class MultiGNExponents:
    s: tuple[Fraction, ...]
    endpoints: tuple[Fraction, ...]  # p_j = pQ/(Q - a_j p)
    # dimension of the affine solution set; > 0 means s is one choice among many
    nullity: int

    @property
    def unique(self) -> bool:
        return self.nullity == 0


@dataclass(frozen=True)
class RatioFactor:
    prefactor: Fraction  # apq/(apq - Q(q-p))
    base: Fraction  # Q(q-p)/(apq - Q(q-p))
    exponent: Fraction  # Q(p-q)/(apq)
    value: float
    digits: str  # same value to 40 significant digits


def homogeneous_dimension(weights: Iterable[RationalLike]) -> Fraction:
    ws = [as_rational(w) for w in weights]
    if not ws:
        raise InvalidStructureError("weight vector is empty")
    if any(w <= 0 for w in ws):
        raise InvalidStructureError(f"dilation weights must be positive, got {ws}")
    return sum(ws, Fraction(0))


def critical_exponent(Q: RationalLike, a: RationalLike, p: RationalLike) -> Fraction:
    """Sobolev endpoint pQ/(Q - ap)."""
    Q, a, p = as_rational(Q), as_rational(a), as_rational(p)
    if a < 0:
        raise ValueError("order must be nonnegative")
    if p <= 1:
        raise ValueError("p must exceed 1")
    if Q - a * p <= 0:
        raise SupercriticalOrderError(f"Q - a*p = {Q - a * p} <= 0 (Q={Q}, a={a}, p={p})")
    return p * Q / (Q - a * p)


def check_admissible(idx: IndexSet, Q: RationalLike, strict: bool = False) -> Verdict:
    """Check the hypotheses of the two-norm inequality.

    ``strict=True`` uses the open q-range needed for existence of ground states;
    otherwise the closed range of the inequality itself.
    """
    Q = as_rational(Q)
    fails: list[str] = []
    if not idx.a1 > idx.a2:
        fails.append("a1 > a2")
    if idx.a2 < 0:
        fails.append("a2 >= 0")
    if not idx.p > 1:
        fails.append("p > 1")
    if Q <= 0:
        fails.append("Q > 0")
        return Verdict(False, tuple(fails))
    if not Q - idx.a1 * idx.p > 0:
        fails.append("Q - a1*p > 0")
    elif idx.p > 1 and idx.a2 >= 0:
        lo = idx.p * Q / (Q - idx.a2 * idx.p)
        hi = idx.p * Q / (Q - idx.a1 * idx.p)
        if strict:
            if not idx.q > lo:
                fails.append(f"q > {fmt_rational(lo)}")
            if not idx.q < hi:
                fails.append(f"q < {fmt_rational(hi)}")
        else:
            if not idx.q >= lo:
                fails.append(f"q >= {fmt_rational(lo)}")
            if not idx.q <= hi:
                fails.append(f"q <= {fmt_rational(hi)}")
    return Verdict(not fails, tuple(fails))


def gn_exponents(idx: IndexSet, Q: RationalLike) -> GNExponents:
    Q = as_rational(Q)
    a1, a2, p, q = idx.a1, idx.a2, idx.p, idx.q
    if a1 == a2:
        raise DegeneratePairError("a1 == a2 gives no interpolation")
    verdict = check_admissible(idx, Q, strict=False)
    if not verdict:
        raise InadmissibleError("; ".join(verdict.failures))
    den = (a1 - a2) * p * p
    theta1 = (Q * (q - p) - a2 * p * q) / den
    theta2 = (a1 * p * q - Q * (q - p)) / den
    return GNExponents(theta1, theta2)


def interpolation_s(a: RationalLike, Q: RationalLike, p: RationalLike, q: RationalLike,
                    r: RationalLike) -> InterpolationExponent:
    a, Q, p, q, r = map(as_rational, (a, Q, p, q, r))
    den = a / Q + 1 / p - 1 / r
    if den == 0:
        raise DegenerateInterpolationError("a/Q + 1/p - 1/r vanishes")
    s = (1 / p - 1 / q) / den
    return InterpolationExponent(s, 0 <= s <= 1)


def multi_gn_exponents(orders: Sequence[RationalLike], p: RationalLike, Q: RationalLike,
                       q: RationalLike) -> MultiGNExponents:
    """Weights s_j with sum s_j = 1 and sum s_j/p_j = 1/q.

    For more than two orders the system is underdetermined and the
    minimum-Euclidean-norm solution is returned.
    """
    a = [as_rational(x) for x in orders]
    p, Q, q = as_rational(p), as_rational(Q), as_rational(q)
    if len(a) < 2:
        raise ValueError("need at least two orders")
    if any(x <= y for x, y in zip(a, a[1:])) or a[-1] < 0:
        raise ValueError("orders must satisfy a1 > a2 > ... >= 0")
    ends = tuple(critical_exponent(Q, aj, p) for aj in a)
    if not min(ends) <= q <= max(ends):
        raise InfeasibleExponentError(
            f"q={q} outside [{fmt_rational(min(ends))}, {fmt_rational(max(ends))}]")
    inv = [1 / pj for pj in ends]
    n = len(a)
    # rows: (1,...,1) and (1/p_1, ..., 1/p_l); minimum norm s = M^T (M M^T)^{-1} b
    g11 = Fraction(n)
    g12 = sum(inv, Fraction(0))
    g22 = sum((x * x for x in inv), Fraction(0))
    det = g11 * g22 - g12 * g12
    b1, b2 = Fraction(1), 1 / q
    y1 = (g22 * b1 - g12 * b2) / det
    y2 = (-g12 * b1 + g11 * b2) / det
    s = tuple(y1 + y2 * x for x in inv)
    if any(not 0 <= sj <= 1 for sj in s):
        raise InfeasibleExponentError(f"minimum-norm weights leave [0,1]: {s}")
    return MultiGNExponents(s, ends, n - 2)


def sobolev_gn_ratio_factor(a: RationalLike, p: RationalLike, q: RationalLike,
                            Q: RationalLike) -> RatioFactor:
    """Factor linking the best GN constant (a2 = 0) to the best Sobolev constant."""
    a, p, q, Q = map(as_rational, (a, p, q, Q))
    verdict = check_admissible(IndexSet(a, Fraction(0), p, q), Q, strict=True)
    if not verdict:
        raise InadmissibleError("; ".join(verdict.failures))
    D = a * p * q - Q * (q - p)
    if D <= 0:
        raise InadmissibleError("apq - Q(q-p) <= 0")
    pref = a * p * q / D
    base = Q * (q - p) / D
    expo = Q * (p - q) / (a * p * q)
    with mpmath.workdps(50):
        val = mpmath.mpf(pref.numerator) / pref.denominator * mpmath.power(
            mpmath.mpf(base.numerator) / base.denominator,
            mpmath.mpf(expo.numerator) / expo.denominator)
        digits = mpmath.nstr(val, 40)
        fval = float(val)
    return RatioFactor(pref, base, expo, fval, digits)
