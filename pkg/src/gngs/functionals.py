"""Energy, Nehari functional, GN and Sobolev quotients on a periodic grid.

For terms (R_j, a_j) write T_j = R_j^(a_j/nu_j) and

    S_j(u) = int |T_j u|^p,   M(u) = int |u|^q,
    L(u) = (1/p) sum_j S_j - (1/q) M,      I(u) = sum_j S_j - M.

An order-zero term is the plain L^p integral (T_j = identity, mean included).
Positive-order multipliers annihilate the zero mode of the box.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np

from .errors import (
    DegenerateProjectionError,
    GridMismatchError,
    InadmissibleError,
    InvalidStructureError,
    UnsupportedExponentError,
    UnsupportedProblemError,
)
from .exponents import DilationStructure, IndexSet, as_rational, check_admissible, gn_exponents
from .grid import (
    GridFunction,
    GridSpec,
    HomogeneousSymbol,
    forward,
    inverse,
    multiplier,
    plancherel_integral,
)


@dataclass(frozen=True)
class Term:
    symbol: HomogeneousSymbol
    order: Fraction

    def __post_init__(self):
        object.__setattr__(self, "order", as_rational(self.order))
        if self.order < 0:
            raise InvalidStructureError("Sobolev orders must be nonnegative")


@dataclass(frozen=True)
class ProblemSpec:
    terms: tuple[Term, ...]
    p: Fraction
    q: Fraction
    grid: GridSpec
    weights: DilationStructure

    def __post_init__(self):
        terms = tuple(t if isinstance(t, Term) else Term(*t) for t in self.terms)
        object.__setattr__(self, "terms", terms)
        object.__setattr__(self, "p", as_rational(self.p))
        object.__setattr__(self, "q", as_rational(self.q))
        if len(terms) < 2:
            raise InvalidStructureError("need at least two terms")
        orders = [t.order for t in terms]
        if any(x <= y for x, y in zip(orders, orders[1:])):
            raise InvalidStructureError(f"orders must be strictly decreasing, got {orders}")
        if self.grid.dims != self.weights.dims:
            raise GridMismatchError("grid and weights differ in dimension")
        for t in terms:
            if t.symbol.weights != self.weights:
                raise InvalidStructureError("all symbols must share the problem's dilation weights")
        verdict = check_admissible(self.indices, self.weights.Q, strict=True)
        if not verdict:
            raise InadmissibleError("; ".join(verdict.failures))

    @property
    def orders(self) -> tuple[Fraction, ...]:
        return tuple(t.order for t in self.terms)

    @property
    def indices(self) -> IndexSet:
        """Extreme orders with the problem's exponents."""
        return IndexSet(self.terms[0].order, self.terms[-1].order, self.p, self.q)

    @property
    def Q(self) -> Fraction:
        return self.weights.Q

    def with_grid(self, grid: GridSpec) -> "ProblemSpec":
        return ProblemSpec(self.terms, self.p, self.q, grid, self.weights)

    def with_symbols(self, symbols: Sequence[HomogeneousSymbol]) -> "ProblemSpec":
        terms = tuple(Term(s, t.order) for s, t in zip(symbols, self.terms))
        return ProblemSpec(terms, self.p, self.q, self.grid, self.weights)


def two_term_problem(symbol: HomogeneousSymbol, a1, a2, p, q, grid: GridSpec) -> ProblemSpec:
    return ProblemSpec((Term(symbol, a1), Term(symbol, a2)), p, q, grid, symbol.weights)


@dataclass(frozen=True)
class FunctionalReport:
    L: float
    I: float
    J: float | None
    term_seminorms: tuple[float, ...]
    lq: float
    lp: float

    def to_dict(self) -> dict:
        d = asdict(self)
        d["term_seminorms"] = list(self.term_seminorms)
        return d


class SpectralKernel:
    """Cached multipliers and fast evaluation of the functionals on raw arrays."""

    def __init__(self, ps: ProblemSpec):
        self.ps = ps
        self.spec = ps.grid
        self.p = float(ps.p)
        self.q = float(ps.q)
        self.h = ps.grid.cell_volume
        mults = []
        for t in ps.terms:
            if t.order == 0:
                m = np.ones(_half_shape(ps.grid))
            else:
                m = np.array(multiplier(ps.grid, t.symbol, t.order / t.symbol.homogeneity))
            mults.append(m)
        self.mults = mults
        # p = 2: sum_j S_j is a single quadratic form with symbol sum_j m_j^2
        self.quad = sum(m * m for m in mults)
        self.zero_mode_free = ps.terms[-1].order > 0

    def parts(self, u: np.ndarray, uh: np.ndarray | None = None) -> tuple[list[float], float]:
        if uh is None:
            uh = forward(self.spec, u)
        if self.p == 2.0:
            S = [plancherel_integral(self.spec, m * uh) for m in self.mults]
        else:
            S = [float(np.sum(np.abs(inverse(self.spec, m * uh)) ** self.p)) * self.h for m in self.mults]
        M = float(np.sum(np.abs(u) ** self.q)) * self.h
        return S, M

    def energy(self, u: np.ndarray) -> float:
        S, M = self.parts(u)
        return sum(S) / self.p - M / self.q

    def lp(self, u: np.ndarray) -> float:
        return float(np.sum(np.abs(u) ** self.p)) * self.h

    def gradient(self, u: np.ndarray, uh: np.ndarray | None = None) -> np.ndarray:
        if self.p < 2:
            raise UnsupportedExponentError(f"gradient requires p >= 2, got p={self.p}")
        if uh is None:
            uh = forward(self.spec, u)
        if self.p == 2.0:
            g = inverse(self.spec, self.quad * uh)
        else:
            acc = np.zeros_like(uh)
            for m in self.mults:
                tu = inverse(self.spec, m * uh)
                acc += m * forward(self.spec, np.abs(tu) ** (self.p - 2) * tu)
            g = inverse(self.spec, acc)
        return g - np.abs(u) ** (self.q - 2) * u


def _half_shape(spec: GridSpec) -> tuple[int, ...]:
    return spec.points[:-1] + (spec.points[-1] // 2 + 1,)


_KERNELS: dict = {}


def kernel(ps: ProblemSpec) -> SpectralKernel:
    k = _KERNELS.get(ps)
    if k is None:
        if len(_KERNELS) > 32:
            _KERNELS.clear()
        k = _KERNELS[ps] = SpectralKernel(ps)
    return k


def _check_grid(ps: ProblemSpec, u: GridFunction) -> None:
    if u.spec != ps.grid:
        raise GridMismatchError(f"function on {u.spec}, problem on {ps.grid}")


def _nehari_mu(S: float, M: float, p: float, q: float) -> float:
    if not (S > 0 and M > 0):
        raise DegenerateProjectionError(f"cannot project: seminorm sum {S}, q-integral {M}")
    return (S / M) ** (1.0 / (q - p))


def term_integrals(ps: ProblemSpec, u: GridFunction) -> tuple[list[float], float]:
    _check_grid(ps, u)
    return kernel(ps).parts(u.values)


def energy_L(ps: ProblemSpec, u: GridFunction) -> float:
    _check_grid(ps, u)
    return kernel(ps).energy(u.values)


def nehari_I(ps: ProblemSpec, u: GridFunction) -> float:
    S, M = term_integrals(ps, u)
    return sum(S) - M


def nehari_project(ps: ProblemSpec, u: GridFunction) -> tuple[float, GridFunction]:
    """Closed-form scaling onto the Nehari set: mu = (sum_j S_j / M)^(1/(q-p))."""
    S, M = term_integrals(ps, u)
    mu = _nehari_mu(sum(S), M, float(ps.p), float(ps.q))
    return mu, GridFunction(ps.grid, mu * u.values)


def _two_term(ps: ProblemSpec) -> None:
    if len(ps.terms) != 2:
        raise UnsupportedProblemError("this quantity is defined for two-term problems only")


def gn_quotient_J(ps: ProblemSpec, u: GridFunction) -> float:
    _two_term(ps)
    th = gn_exponents(ps.indices, ps.Q)
    S, M = term_integrals(ps, u)
    if M == 0:
        raise DegenerateProjectionError("zero input")
    return S[0] ** float(th.theta1) * S[1] ** float(th.theta2) / M


def sobolev_quotient(ps: ProblemSpec, u: GridFunction) -> float:
    """(int |T_1 u|^p + int |u|^p) / (int |u|^q)^(p/q) for terms (a, 0)."""
    _two_term(ps)
    if ps.terms[1].order != 0:
        raise UnsupportedProblemError("Sobolev quotient needs a zero second order")
    S, M = term_integrals(ps, u)
    if M == 0:
        raise DegenerateProjectionError("zero input")
    return sum(S) / M ** float(ps.p / ps.q)


def gradient_L(ps: ProblemSpec, u: GridFunction) -> GridFunction:
    """L^2 gradient sum_j T_j(|T_j u|^(p-2) T_j u) - |u|^(q-2) u."""
    _check_grid(ps, u)
    return GridFunction(ps.grid, kernel(ps).gradient(u.values))


def functional_report(ps: ProblemSpec, u: GridFunction) -> FunctionalReport:
    k = kernel(ps)
    S, M = term_integrals(ps, u)
    p, q = k.p, k.q
    J = None
    if len(ps.terms) == 2 and M > 0:
        J = gn_quotient_J(ps, u)
    return FunctionalReport(sum(S) / p - M / q, sum(S) - M, J, tuple(S), M, k.lp(u.values))


def brezis_lieb_check(p: float, samples: int = 10_000, m: float | None = None,
                      eps: float | None = None, seed: int = 0) -> float:
    """Largest lhs - rhs of the convexity bound for l(z) = |z|^p over random complex pairs.

    lhs = |l(a+b) - l(a)|
    rhs = eps [l(m a) - m l(a)] + |l(C b)| + |l(-C b)|,  C = 1/(eps (m-1)).

    ``m`` and ``eps`` are drawn per sample when not given.
    """
    if p <= 1:
        raise ValueError("p must exceed 1")
    if m is not None and m <= 1:
        raise ValueError("m must exceed 1")
    if eps is not None and not 0 < eps < 1 / (m if m is not None else 1):
        raise ValueError("eps must lie in (0, 1/m)")
    rng = np.random.default_rng(seed)
    n = int(samples)

    def cplx():
        r = np.exp(rng.uniform(-3, 3, n))
        return r * np.exp(1j * rng.uniform(0, 2 * np.pi, n))

    a, b = cplx(), cplx()
    ms = np.full(n, float(m)) if m is not None else 1 + rng.uniform(0.01, 4.0, n)
    es = np.full(n, float(eps)) if eps is not None else rng.uniform(0.01, 0.99, n) / ms
    C = 1 / (es * (ms - 1))

    def ell(z):
        return np.abs(z) ** p

    lhs = np.abs(ell(a + b) - ell(a))
    rhs = es * (ell(ms * a) - ms * ell(a)) + ell(C * b) + ell(-C * b)
    return float(np.max(lhs - rhs))
