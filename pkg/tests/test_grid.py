import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import integrate, special

from gngs.errors import GridMismatchError, InvalidStructureError, NumericError, SerializationError
from gngs.exponents import DilationStructure
from gngs.grid import (
    GridFunction,
    GridSpec,
    HomogeneousSymbol,
    apply_fractional_power,
    boundary_mass,
    dilate,
    forward,
    fourier_frequencies,
    load_grid_function,
    lp_norm,
    plancherel_integral,
    random_test_function,
    save_grid_function,
    sobolev_seminorm,
)

LINE = DilationStructure((1,))
SIG = HomogeneousSymbol.rockland(LINE)
TORUS = GridSpec((64,), (math.pi,))


def sample(spec, f):
    return GridFunction(spec, f(*spec.mesh()))


def test_frequencies_unit_box():
    (k,) = fourier_frequencies(GridSpec((8,), (math.pi,)))
    np.testing.assert_allclose(k, [0, 1, 2, 3, -4, -3, -2, -1])
    (k2,) = fourier_frequencies(GridSpec((8,), (math.pi / 2,)))
    np.testing.assert_allclose(k2, 2 * k)


def test_frequencies_layout_2d():
    spec = GridSpec((8, 16), (1.0, 2.0))
    kx, ky = fourier_frequencies(spec)
    assert kx.shape == (8,) and ky.shape == (16,)
    u = np.exp(1j * kx[1] * spec.mesh()[0])
    # energy of a pure x-mode lands in row 1 of a row-major transform
    uh = np.fft.fftn(u)
    assert np.unravel_index(np.argmax(np.abs(uh)), uh.shape) == (1, 0)


@pytest.mark.parametrize("points, L", [((6,), (1.0,)), ((4,), (1.0,)), ((12,), (1.0,)), ((8,), (0.0,)),
                                        ((8, 8, 8, 8), (1, 1, 1, 1))])
def test_gridspec_rejects(points, L):
    with pytest.raises(InvalidStructureError):
        GridSpec(points, L)


def test_gridspec_volume():
    spec = GridSpec((8, 16), (1.0, 2.0))
    assert spec.cell_volume == pytest.approx(0.25 * 0.25)
    assert spec.cell_volume * spec.size == pytest.approx(spec.volume)


def test_symbol_orders():
    s = HomogeneousSymbol.rockland(DilationStructure((1, 2)))
    assert s.axis_orders == (4, 2) and s.homogeneity == 4
    s = HomogeneousSymbol.rockland(DilationStructure((1, 1, 2)), coeffs=[1, 2, 3])
    assert s.axis_orders == (4, 4, 2)
    with pytest.raises(InvalidStructureError):
        HomogeneousSymbol.rockland(DilationStructure((1, 3)), nu0=Fraction(3, 2))
    ext = HomogeneousSymbol.rockland(DilationStructure((1, 3)), nu0=Fraction(3, 2), extended=True)
    assert ext.axis_orders == (3, 1)
    with pytest.raises(InvalidStructureError):
        HomogeneousSymbol.rockland(LINE, coeffs=[0.0])


@given(st.lists(st.integers(-50, 50), min_size=2, max_size=2), st.integers(-3, 3))
def test_symbol_homogeneity_exact(xi, e):
    s = HomogeneousSymbol.rockland(DilationStructure((1, 2)), coeffs=[1.0, 3.0])
    lam = 2.0 ** e
    x = [np.array(float(xi[0])), np.array(float(xi[1]))]
    xs = [lam * x[0], lam ** 2 * x[1]]
    assert s(xs) == lam ** 4 * s(x)


def test_symbol_positive_off_origin():
    s = HomogeneousSymbol.rockland(DilationStructure((1, 2)))
    spec = GridSpec((16, 16), (3.0, 3.0))
    xi = np.meshgrid(*fourier_frequencies(spec), indexing="ij")
    v = s(xi)
    assert v[0, 0] == 0 and np.all(v.reshape(-1)[1:] > 0)


def test_zero_power_mean_zero_identity():
    u = sample(TORUS, lambda x: np.sin(x) + 0.3 * np.cos(5 * x))
    np.testing.assert_allclose(apply_fractional_power(SIG, 0, u).values, u.values, atol=1e-14)


def test_zero_power_annihilates_constants():
    u = GridFunction(TORUS, np.ones(64))
    for s in (0, Fraction(1, 3), 1):
        assert np.max(np.abs(apply_fractional_power(SIG, s, u).values)) < 1e-14


@pytest.mark.parametrize("s, k, factor", [(1, 1, 1.0), (Fraction(1, 2), 2, 2.0), (Fraction(2, 5), 3, 3 ** 0.8)])
def test_eigenrelations(s, k, factor):
    u = sample(TORUS, lambda x: np.sin(k * x))
    out = apply_fractional_power(SIG, s, u)
    np.testing.assert_allclose(out.values, factor * u.values, atol=1e-12)


def test_lp_norm_examples():
    assert lp_norm(GridFunction(TORUS, np.zeros(64)), 3) == 0
    spec = GridSpec((16, 8), (1.5, 0.5))
    for p in (1, 2, 3.5):
        assert lp_norm(GridFunction(spec, np.ones(spec.shape)), p) == pytest.approx(spec.volume ** (1 / p))
    assert lp_norm(sample(TORUS, np.sin), 2) == pytest.approx(math.sqrt(math.pi), rel=1e-13)


def test_seminorm_sin():
    assert sobolev_seminorm(sample(TORUS, np.sin), SIG, 1, 2) == pytest.approx(math.sqrt(math.pi), rel=1e-13)


def _lattice(L, N):
    return (math.pi / L) * np.arange(-N // 2, N // 2)


@pytest.mark.parametrize("a", [Fraction(2, 5), Fraction(1), Fraction(3, 2)])
def test_gaussian_seminorm_lattice_sum(a):
    # u = exp(-x^2/2) has transform sqrt(2 pi) exp(-xi^2/2); on the box the seminorm
    # is the rectangle sum of |xi|^(2a) exp(-xi^2) over the frequency lattice
    spec = GridSpec((512,), (20.0,))
    u = sample(spec, lambda x: np.exp(-x ** 2 / 2))
    got = sobolev_seminorm(u, SIG, a, 2) ** 2
    xi = _lattice(20.0, 512)
    ref = (math.pi / 20.0) * np.sum(np.abs(xi) ** (2 * float(a)) * np.exp(-xi ** 2))
    assert got == pytest.approx(ref, rel=1e-12)


@pytest.mark.parametrize("a", [Fraction(2, 5), Fraction(1, 2)])
def test_gaussian_seminorm_whole_line_limit(a):
    # |xi|^(2a) is not smooth at 0, so the box value approaches Gamma(a + 1/2)
    # at rate (pi/L)^(1 + 2a)
    exact = special.gamma(float(a) + 0.5)
    errs = []
    for L in (20.0, 40.0, 80.0):
        spec = GridSpec((2 ** int(round(math.log2(L * 16))),), (L,))
        u = sample(spec, lambda x: np.exp(-x ** 2 / 2))
        errs.append(abs(sobolev_seminorm(u, SIG, a, 2) ** 2 - exact))
    rates = [math.log2(e0 / e1) for e0, e1 in zip(errs, errs[1:])]
    assert all(r == pytest.approx(1 + 2 * float(a), abs=0.05) for r in rates)
    assert errs[-1] < 1e-3


@pytest.mark.parametrize("a", [Fraction(2, 5), Fraction(1)])
def test_anisotropic_gaussian_seminorm_lattice_sum(a):
    w = DilationStructure((1, 2))
    s = HomogeneousSymbol.rockland(w)
    spec = GridSpec((128, 64), (16.0, 12.0))
    u = sample(spec, lambda x, y: np.exp(-(x ** 2 + y ** 2) / 2))
    got = sobolev_seminorm(u, s, a, 2) ** 2
    X, Y = np.meshgrid(_lattice(16.0, 128), _lattice(12.0, 64), indexing="ij")
    ref = (math.pi / 16.0) * (math.pi / 12.0) * np.sum(
        (X ** 4 + Y ** 2) ** (float(a) / 2) * np.exp(-X ** 2 - Y ** 2))
    assert got == pytest.approx(ref, rel=1e-12)


def test_plancherel():
    spec = GridSpec((32, 16), (3.0, 2.0))
    u = random_test_function(spec, 0.5, 3, zero_mean=False)
    assert plancherel_integral(spec, forward(spec, u.values)) == pytest.approx(lp_norm(u, 2) ** 2, rel=1e-10)


@given(st.fractions(0, 2, max_denominator=10), st.fractions(0, 2, max_denominator=10))
def test_semigroup(s1, s2):
    spec = GridSpec((64,), (5.0,))
    u = random_test_function(spec, 1.0, 11)
    lhs = apply_fractional_power(SIG, s1, apply_fractional_power(SIG, s2, u)).values
    rhs = apply_fractional_power(SIG, s1 + s2, u).values
    assert np.linalg.norm(lhs - rhs) <= 1e-10 * max(np.linalg.norm(rhs), 1e-300) + 1e-14


def test_dilate_identity_and_l2_invariance():
    spec = GridSpec((1024,), (30.0,))
    f = lambda x: np.exp(-x ** 2)
    np.testing.assert_array_equal(dilate(f, 1.0, 2, LINE, spec).values, f(spec.mesh()[0]))
    n1 = lp_norm(dilate(f, 1.0, 2, LINE, spec), 2)
    n2 = lp_norm(dilate(f, 2.0, 2, LINE, spec), 2)
    assert n2 == pytest.approx(n1, rel=1e-8)
    assert n1 ** 2 == pytest.approx(math.sqrt(math.pi / 2), rel=1e-12)


@pytest.mark.parametrize("lam", [0.5, 2.0])
@pytest.mark.parametrize("p", [2.0, 3.0])
@pytest.mark.parametrize("a", [Fraction(2, 5), Fraction(1)])
def test_dilation_scaling_rescaled_box(lam, p, a):
    w = DilationStructure((1, 2))
    s = HomogeneousSymbol.rockland(w)
    spec = GridSpec((64, 64), (6.0, 9.0))
    f = lambda x, y: np.exp(-x ** 2 - y ** 2 / 4)
    g = spec.scaled([lam ** -1.0, lam ** -2.0])
    base = sobolev_seminorm(dilate(f, 1.0, p, w, spec), s, a, p) ** p
    scaled = sobolev_seminorm(dilate(f, lam, p, w, g), s, a, p) ** p
    assert scaled / base == pytest.approx(lam ** (float(a) * p), rel=1e-6)
    assert lp_norm(dilate(f, lam, p, w, g), p) == pytest.approx(lp_norm(dilate(f, 1.0, p, w, spec), p), rel=1e-6)


@pytest.mark.parametrize("lam", [0.5, 2.0])
def test_dilation_scaling_fixed_box_smooth_symbol(lam):
    # a = 4 gives the polynomial symbol x^4 + y^2, so a fixed box is accurate
    p = 2.0
    w = DilationStructure((1, 2))
    s = HomogeneousSymbol.rockland(w)
    spec = GridSpec((256, 1024), (16.0, 64.0))
    f = lambda x, y: np.exp(-x ** 2 - y ** 2 / 4)
    base = sobolev_seminorm(dilate(f, 1.0, p, w, spec), s, 4, p) ** p
    scaled = sobolev_seminorm(dilate(f, lam, p, w, spec), s, 4, p) ** p
    assert scaled / base == pytest.approx(lam ** (4 * p), rel=1e-6)


def test_random_test_function_properties():
    spec = GridSpec((64, 32), (4.0, 3.0))
    u1 = random_test_function(spec, 1.0, 5)
    u2 = random_test_function(spec, 1.0, 5)
    np.testing.assert_array_equal(u1.values, u2.values)
    assert abs(u1.values.mean()) < 1e-14
    assert lp_norm(u1, 2) == pytest.approx(1.0)
    assert not np.array_equal(u1.values, random_test_function(spec, 1.0, 6).values)
    s = HomogeneousSymbol.rockland(DilationStructure((1, 1)))
    rough = sobolev_seminorm(random_test_function(spec, 0.25, 5), s, 1, 2)
    smooth = sobolev_seminorm(random_test_function(spec, 4.0, 5), s, 1, 2)
    assert smooth < rough


def test_gridfunction_invariants():
    with pytest.raises(GridMismatchError):
        GridFunction(TORUS, np.zeros(63))
    bad = np.zeros(64)
    bad[3] = np.nan
    with pytest.raises(NumericError):
        GridFunction(TORUS, bad)
    u = GridFunction(TORUS, np.zeros(64))
    with pytest.raises(ValueError):
        u.values[0] = 1.0
    with pytest.raises(GridMismatchError):
        u + GridFunction(GridSpec((64,), (1.0,)), np.zeros(64))


def test_boundary_mass():
    spec = GridSpec((128,), (10.0,))
    x = spec.mesh()[0]
    const = GridFunction(spec, np.ones(128))
    expected = np.mean(np.abs(x) >= 9.0)
    assert boundary_mass(const, 2) == pytest.approx(expected)
    g = GridFunction(spec, np.exp(-x ** 2))
    assert boundary_mass(g, 2) < 1e-30


def test_serialization_roundtrip(tmp_path):
    w = DilationStructure((1, 2))
    spec = GridSpec((16, 8), (2.0, 3.5))
    u = random_test_function(spec, 1.0, 2)
    path = save_grid_function(u, tmp_path / "u.bin", w)
    v, w2 = load_grid_function(path)
    assert v.spec == spec and w2 == w
    np.testing.assert_array_equal(v.values, u.values)
    raw = path.read_bytes()
    (tmp_path / "short.bin").write_bytes(raw[:-8])
    with pytest.raises(SerializationError):
        load_grid_function(tmp_path / "short.bin")
    (tmp_path / "junk.bin").write_bytes(b"nope" + raw)
    with pytest.raises(SerializationError):
        load_grid_function(tmp_path / "junk.bin")
    side = path.with_suffix(".json")
    side.write_text(side.read_text().replace('"count": 128', '"count": 127'))
    with pytest.raises(SerializationError):
        load_grid_function(path)


def test_thread_count_does_not_change_results(monkeypatch):
    spec = GridSpec((64, 64), (4.0, 4.0))
    u = random_test_function(spec, 1.0, 9)
    s = HomogeneousSymbol.rockland(DilationStructure((1, 1)))
    monkeypatch.setenv("GNGS_THREADS", "1")
    a = apply_fractional_power(s, Fraction(1, 3), u).values
    monkeypatch.setenv("GNGS_THREADS", "4")
    b = apply_fractional_power(s, Fraction(1, 3), u).values
    np.testing.assert_array_equal(a, b)
