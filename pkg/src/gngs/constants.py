"""Best Sobolev and Gagliardo-Nirenberg constants from a computed ground state.

Every constant has a closed form in terms of one integral of the ground state
and a second closed form in terms of the least energy d. The two agree exactly
when the balance laws of the ground state hold, so their spread measures how
far the discrete profile is from the ideal one.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from fractions import Fraction

import numpy as np

from .errors import InadmissibleError, UnsupportedProblemError
from .exponents import IndexSet, fmt_rational, gn_exponents, sobolev_gn_ratio_factor
from .functionals import ProblemSpec, gn_quotient_J, kernel, sobolev_quotient
from .grid import GridFunction, random_test_function
from .solver import GroundStateResult

CSV_FIELDS = ("a1", "a2", "p", "q", "Q", "d", "C_S_from_mass", "C_S_from_d",
              "C_GN_from_norm", "C_GN_from_d", "ratio_residual")


@dataclass(frozen=True)
class BestConstants:
    C_S_from_mass: float | None
    C_S_from_d: float | None
    C_GN_from_norm: float
    C_GN_from_d: float
    ratio_factor: float | None
    indices: IndexSet
    Q: Fraction
    # reciprocals of the quotients evaluated directly at phi
    C_GN_from_quotient: float = math.nan
    C_S_from_quotient: float | None = None

    @property
    def gn_agreement(self) -> float:
        return abs(self.C_GN_from_norm - self.C_GN_from_d) / abs(self.C_GN_from_d)

    @property
    def sobolev_agreement(self) -> float | None:
        if self.C_S_from_d is None:
            return None
        return abs(self.C_S_from_mass - self.C_S_from_d) / abs(self.C_S_from_d)

    @property
    def quotient_ratio(self) -> float | None:
        """C_GN^(p/q) / C_S with both constants taken from the quotients at phi."""
        if self.C_S_from_quotient is None:
            return None
        pq = float(self.indices.p / self.indices.q)
        return self.C_GN_from_quotient ** pq / self.C_S_from_quotient

    def to_dict(self) -> dict:
        d = asdict(self)
        d["indices"] = {k: fmt_rational(v) for k, v in asdict(self.indices).items()}
        d["Q"] = fmt_rational(self.Q)
        d["gn_agreement"] = self.gn_agreement
        d["sobolev_agreement"] = self.sobolev_agreement
        d["quotient_ratio"] = self.quotient_ratio
        return d


def _fl(x: Fraction) -> float:
    return float(x)


def best_sobolev_constant(res: GroundStateResult, ps: ProblemSpec) -> tuple[float, float]:
    """(apq/(apq-Q(q-p)) int|phi|^p)^((p-q)/q) and (pq/(q-p) d)^((p-q)/q)."""
    if len(ps.terms) != 2 or ps.terms[1].order != 0:
        raise UnsupportedProblemError("the Sobolev constant needs terms (a, 0)")
    a, p, q, Q = ps.terms[0].order, ps.p, ps.q, ps.Q
    D = a * p * q - Q * (q - p)
    if D <= 0:
        raise InadmissibleError("apq - Q(q-p) <= 0")
    e = _fl((p - q) / q)
    from_mass = (_fl(a * p * q / D) * res.lp) ** e
    from_d = (_fl(p * q / (q - p)) * res.d) ** e
    return from_mass, from_d


def gn_prefactor(idx: IndexSet, Q: Fraction) -> float:
    """K with C_GN = K * ||T_2 phi||_p^(p-q)."""
    a1, a2, p, q = idx.a1, idx.a2, idx.p, idx.q
    D = a1 * p * q - Q * (q - p)
    N = Q * (q - p) - a2 * p * q
    if D <= 0 or N <= 0:
        raise InadmissibleError("degenerate exponent denominators")
    expo = (a2 * p * q - Q * (q - p)) / ((a1 - a2) * p * p)
    return _fl((a1 - a2) * p * q / D) * _fl(N / D) ** _fl(expo)


def best_gn_constant(res: GroundStateResult, ps: ProblemSpec) -> tuple[float, float]:
    """Both closed forms: via int |T_2 phi|^p and via d."""
    if len(ps.terms) != 2:
        raise UnsupportedProblemError("the two-norm constant needs a two-term problem")
    idx, Q = ps.indices, ps.Q
    K = gn_prefactor(idx, Q)
    a1, a2, p, q = idx.a1, idx.a2, idx.p, idx.q
    e = _fl((p - q) / p)
    B = res.term_seminorms[1]
    from_norm = K * B ** e
    D = a1 * p * q - Q * (q - p)
    from_d = K * (_fl(D / ((a1 - a2) * (q - p))) * res.d) ** e
    return from_norm, from_d


def best_constants(res: GroundStateResult, ps: ProblemSpec) -> BestConstants:
    gn_norm, gn_d = best_gn_constant(res, ps)
    cgq = 1.0 / gn_quotient_J(ps, res.phi)
    cs_mass = cs_d = factor = csq = None
    if ps.terms[1].order == 0:
        cs_mass, cs_d = best_sobolev_constant(res, ps)
        factor = sobolev_gn_ratio_factor(ps.terms[0].order, ps.p, ps.q, ps.Q).value
        csq = 1.0 / sobolev_quotient(ps, res.phi)
    return BestConstants(cs_mass, cs_d, gn_norm, gn_d, factor, ps.indices, ps.Q, cgq, csq)


def ratio_identity_check(bc: BestConstants, form: str = "d") -> float:
    """|C_GN^(p/q) - C_S * factor| / (C_S * factor).

    ``form`` picks the constants: "d" (energy forms), "norm" (integral forms)
    or "quotient" (reciprocal quotients at phi).
    """
    if bc.indices.a2 != 0 or bc.ratio_factor is None:
        raise UnsupportedProblemError("the ratio identity needs a2 = 0")
    gn, cs = {
        "d": (bc.C_GN_from_d, bc.C_S_from_d),
        "norm": (bc.C_GN_from_norm, bc.C_S_from_mass),
        "quotient": (bc.C_GN_from_quotient, bc.C_S_from_quotient),
    }[form]
    rhs = cs * bc.ratio_factor
    return abs(gn ** float(bc.indices.p / bc.indices.q) - rhs) / rhs


def _suite(ps: ProblemSpec, samples: int, seed: int, decay: float):
    zero_mean = True
    for i in range(samples):
        yield random_test_function(ps.grid, decay, seed + i, zero_mean=zero_mean)


def verify_gn_inequality(ps: ProblemSpec, C: float, samples: int = 200, seed: int = 0,
                         decay: float = 1.0, extra: list[GridFunction] | None = None) -> float:
    """max over the suite of (int|u|^q - C S_1^th1 S_2^th2) / (C S_1^th1 S_2^th2).

    Zero functions contribute a margin of 0.
    """
    if not C > 0:
        raise ValueError("C must be positive")
    th = gn_exponents(ps.indices, ps.Q)
    t1, t2 = float(th.theta1), float(th.theta2)
    k = kernel(ps)
    worst = -math.inf
    funcs = list(_suite(ps, samples, seed, decay)) + list(extra or [])
    for u in funcs:
        S, M = k.parts(u.values)
        rhs = C * S[0] ** t1 * S[1] ** t2
        worst = max(worst, 0.0 if rhs == 0 and M == 0 else (M - rhs) / rhs)
    return worst


def verify_sobolev_inequality(ps: ProblemSpec, C: float, samples: int = 200, seed: int = 0,
                              decay: float = 1.0, extra: list[GridFunction] | None = None) -> float:
    """max over the suite of ((int|u|^q)^(p/q) - C (S_1 + S_2)) / (C (S_1 + S_2))."""
    if not C > 0:
        raise ValueError("C must be positive")
    if len(ps.terms) != 2 or ps.terms[1].order != 0:
        raise UnsupportedProblemError("the Sobolev inequality needs terms (a, 0)")
    k = kernel(ps)
    e = float(ps.p / ps.q)
    worst = -math.inf
    funcs = list(_suite(ps, samples, seed, decay)) + list(extra or [])
    for u in funcs:
        S, M = k.parts(u.values)
        rhs = C * sum(S)
        worst = max(worst, 0.0 if rhs == 0 and M == 0 else (M ** e - rhs) / rhs)
    return worst


@dataclass(frozen=True)
class Extremality:
    gn_gap: float  # min_u J(u)/J(phi) - 1
    sobolev_gap: float | None
    samples: int


def extremality_check(ps: ProblemSpec, phi: GridFunction, samples: int = 200, seed: int = 0,
                      decay: float = 1.0) -> Extremality:
    """How close the random suite comes to phi's quotients (negative: a sample beats phi)."""
    j0 = gn_quotient_J(ps, phi)
    sob = ps.terms[1].order == 0
    s0 = sobolev_quotient(ps, phi) if sob else None
    jmin = smin = math.inf
    for u in _suite(ps, samples, seed, decay):
        jmin = min(jmin, gn_quotient_J(ps, u))
        if sob:
            smin = min(smin, sobolev_quotient(ps, u))
    return Extremality(jmin / j0 - 1, smin / s0 - 1 if sob else None, samples)


def csv_row(bc: BestConstants, d: float) -> list[str]:
    idx = bc.indices

    def num(x):
        return "" if x is None else "%.17g" % x

    ratio = ratio_identity_check(bc) if bc.ratio_factor is not None else None
    return [fmt_rational(idx.a1), fmt_rational(idx.a2), fmt_rational(idx.p), fmt_rational(idx.q),
            fmt_rational(bc.Q), num(d), num(bc.C_S_from_mass), num(bc.C_S_from_d),
            num(bc.C_GN_from_norm), num(bc.C_GN_from_d), num(ratio)]
