import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from gngs.errors import (
    DegenerateProjectionError,
    GridMismatchError,
    InadmissibleError,
    InvalidStructureError,
    UnsupportedExponentError,
    UnsupportedProblemError,
)
from gngs.exponents import DilationStructure
from gngs.functionals import (
    ProblemSpec,
    Term,
    brezis_lieb_check,
    energy_L,
    functional_report,
    gn_quotient_J,
    gradient_L,
    nehari_I,
    nehari_project,
    sobolev_quotient,
    term_integrals,
    two_term_problem,
)
from gngs.grid import GridFunction, GridSpec, HomogeneousSymbol, dilate, random_test_function


def zero(ps):
    return GridFunction(ps.grid, np.zeros(ps.grid.shape))


def test_problem_validation(sym1, sym2):
    grid = GridSpec((64,), (10.0,))
    with pytest.raises(InvalidStructureError):
        ProblemSpec([(sym1, 0), (sym1, "2/5")], 2, 3, grid, sym1.weights)
    with pytest.raises(InadmissibleError):
        two_term_problem(sym1, "2/5", 0, 2, 10, grid)  # closed endpoint, excluded for the solver
    with pytest.raises(GridMismatchError):
        two_term_problem(sym2, 1, 0, 2, 4, grid)
    other = HomogeneousSymbol.rockland(DilationStructure((2,)))
    with pytest.raises(InvalidStructureError):
        ProblemSpec([(sym1, "2/5"), (other, 0)], 2, 3, grid, sym1.weights)


def test_zero_input(specs3):
    for ps in specs3:
        z = zero(ps)
        assert energy_L(ps, z) == 0 and nehari_I(ps, z) == 0
        with pytest.raises(DegenerateProjectionError):
            nehari_project(ps, z)
        if ps.p > 2:
            assert not np.any(gradient_L(ps, z).values)


def test_grid_mismatch(frac_coarse):
    u = random_test_function(GridSpec((64,), (20.0,)), 1.0, 0)
    with pytest.raises(GridMismatchError):
        energy_L(frac_coarse, u)


@pytest.mark.parametrize("k", range(3))
def test_small_and_large_multiples(specs3, k):
    ps = specs3[k]
    u = random_test_function(ps.grid, 1.0, 4)
    S, M = term_integrals(ps, u)
    p = float(ps.p)
    t = 1e-3
    # leading order of L(tu) is t^p sum S / p
    assert energy_L(ps, u * t) == pytest.approx(t ** p * sum(S) / p, rel=1e-2)
    assert nehari_I(ps, u * t) > 0
    assert nehari_I(ps, u * 1e3) < 0


@pytest.mark.parametrize("k", range(3))
@pytest.mark.parametrize("seed", range(0, 100, 7))
def test_projection_identities(specs3, k, seed):
    ps = specs3[k]
    u = random_test_function(ps.grid, 1.0, seed)
    mu, v = nehari_project(ps, u)
    S, M = term_integrals(ps, v)
    assert abs(sum(S) - M) <= 1e-10 * sum(S)
    # on the Nehari set L = (1/p - 1/q) int |u|^q
    p, q = float(ps.p), float(ps.q)
    assert energy_L(ps, v) == pytest.approx((1 / p - 1 / q) * M, rel=1e-10)
    mu2, w = nehari_project(ps, v)
    assert mu2 == pytest.approx(1.0, rel=1e-12)
    c = 3.7
    mu3, w3 = nehari_project(ps, u * c)
    assert mu3 == pytest.approx(mu / c, rel=1e-12)
    np.testing.assert_allclose(w3.values, v.values, rtol=1e-11, atol=1e-14 * np.max(np.abs(v.values)))


def test_projection_shrinks_when_I_negative(frac_coarse):
    u = random_test_function(frac_coarse.grid, 1.0, 2) * 50.0
    assert nehari_I(frac_coarse, u) < 0
    mu, _ = nehari_project(frac_coarse, u)
    assert 0 < mu < 1


@given(st.floats(0.01, 100.0), st.integers(0, 50))
def test_scale_invariance(c, seed):
    grid = GridSpec((64,), (10.0,))
    sym = HomogeneousSymbol.rockland(DilationStructure((1,)))
    ps = two_term_problem(sym, "2/5", 0, 2, 3, grid)
    u = random_test_function(grid, 1.0, seed)
    assert gn_quotient_J(ps, u * c) == pytest.approx(gn_quotient_J(ps, u), rel=1e-10)
    assert sobolev_quotient(ps, u * c) == pytest.approx(sobolev_quotient(ps, u), rel=1e-10)


@pytest.mark.parametrize("lam", [0.5, 2.0])
def test_J_dilation_invariance(sym2, lam):
    grid = GridSpec((64, 64), (6.0, 9.0))
    ps = two_term_problem(sym2, 1, 0, 2, 4, grid)
    f = lambda x, y: np.exp(-x ** 2 - y ** 2 / 4)
    u = dilate(f, 1.0, 2, sym2.weights, grid)
    g = grid.scaled([lam ** -1.0, lam ** -2.0])
    v = dilate(f, lam, 2, sym2.weights, g)
    assert gn_quotient_J(ps.with_grid(g), v) == pytest.approx(gn_quotient_J(ps, u), rel=1e-10)


def test_sobolev_quotient_at_nehari_point(frac_coarse):
    # at I = 0 the quotient equals (int |u|^q)^((q-p)/q)
    u = random_test_function(frac_coarse.grid, 1.0, 8)
    _, v = nehari_project(frac_coarse, u)
    _, M = term_integrals(frac_coarse, v)
    q, p = float(frac_coarse.q), float(frac_coarse.p)
    assert sobolev_quotient(frac_coarse, v) == pytest.approx(M ** ((q - p) / q), rel=1e-10)


def test_quotients_need_two_terms(sym1):
    grid = GridSpec((64,), (10.0,))
    ps3 = ProblemSpec([(sym1, "2/5"), (sym1, "1/5"), (sym1, 0)], 2, 3, grid, sym1.weights)
    u = random_test_function(grid, 1.0, 0)
    with pytest.raises(UnsupportedProblemError):
        gn_quotient_J(ps3, u)
    ps_nz = two_term_problem(sym1, "2/5", "1/10", 2, 4, grid)
    with pytest.raises(UnsupportedProblemError):
        sobolev_quotient(ps_nz, u)


@pytest.mark.parametrize("k", range(3))
def test_gradient_central_differences(specs3, k):
    ps = specs3[k]
    rng = np.random.default_rng(k)
    u = random_test_function(ps.grid, 1.0, 20 + k) * 2.0
    g = gradient_L(ps, u)
    for j in range(10):
        psi = random_test_function(ps.grid, float(rng.uniform(0.5, 2)), 200 + j, zero_mean=False)
        eps = np.finfo(float).eps ** (1 / 3)
        cd = (energy_L(ps, u + eps * psi) - energy_L(ps, u - eps * psi)) / (2 * eps)
        assert g.inner(psi) == pytest.approx(cd, rel=1e-6)


def test_gradient_refused_below_two(sym1):
    ps = two_term_problem(sym1, "1/4", 0, "3/2", 2, GridSpec((64,), (10.0,)))
    u = random_test_function(ps.grid, 1.0, 0)
    assert math.isfinite(energy_L(ps, u))
    with pytest.raises(UnsupportedExponentError):
        gradient_L(ps, u)


def test_order_zero_term_is_plain_lp(frac_coarse):
    # the mean is kept for an order-zero term
    u = random_test_function(frac_coarse.grid, 1.0, 1, zero_mean=False) + GridFunction(
        frac_coarse.grid, np.full(frac_coarse.grid.shape, 0.5))
    S, _ = term_integrals(frac_coarse, u)
    assert S[1] == pytest.approx(float(np.sum(u.values ** 2)) * frac_coarse.grid.cell_volume, rel=1e-13)


def test_report_consistency(specs3):
    for ps in specs3:
        u = random_test_function(ps.grid, 1.0, 3)
        r = functional_report(ps, u)
        p, q = float(ps.p), float(ps.q)
        assert r.L == pytest.approx(sum(r.term_seminorms) / p - r.lq / q, rel=1e-14, abs=1e-300)
        assert r.I == pytest.approx(sum(r.term_seminorms) - r.lq, rel=1e-14)
        assert set(r.to_dict()) == {"L", "I", "J", "term_seminorms", "lq", "lp"}


@pytest.mark.parametrize("p", [2.0, 2.5, 3.0, 1.5])
def test_convexity_bound(p):
    assert brezis_lieb_check(p, samples=10_000, seed=1) <= 1e-12
    assert brezis_lieb_check(p, samples=2000, m=2.0, eps=0.3, seed=2) <= 1e-12


def test_convexity_bound_b_zero_and_real_p2():
    # b = 0: lhs vanishes while rhs >= 0 by convexity
    rng = np.random.default_rng(0)
    a = rng.normal(size=1000)
    for m, eps in [(2.0, 0.2), (3.0, 0.1)]:
        rhs = eps * (np.abs(m * a) ** 2 - m * np.abs(a) ** 2)
        assert np.all(rhs >= 0)
    # p = 2, real a, b: |2ab + b^2| <= eps (m^2 - m) a^2 + 2 C^2 b^2
    b = rng.normal(size=1000)
    m, eps = 2.0, 0.25
    C = 1 / (eps * (m - 1))
    assert np.all(np.abs(2 * a * b + b * b) <= eps * (m * m - m) * a * a + 2 * C * C * b * b)


def test_convexity_bound_rejects():
    with pytest.raises(ValueError):
        brezis_lieb_check(1.0)
    with pytest.raises(ValueError):
        brezis_lieb_check(2.0, m=2.0, eps=0.6)
