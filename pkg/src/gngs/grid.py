"""Periodic grids, homogeneous Fourier multipliers and Sobolev seminorms.

R^n is replaced by the box prod_j [-L_j, L_j) with periodic wrap. Positive
Rockland operators of the abelian graded group are Fourier multipliers

    sigma(xi) = sum_j c_j |xi_j|^(2 nu0 / nu_j),

homogeneous of degree 2 nu0 under xi -> (r^nu_1 xi_1, ..., r^nu_n xi_n).
Fractional powers act by multiplying the transform with sigma^s.
"""
from __future__ import annotations

import json
import math
import os
import struct
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from pathlib import Path
from typing import Callable, Sequence

import numpy as np
import scipy.fft as sfft

from .errors import GridMismatchError, InvalidStructureError, NumericError, SerializationError
from .exponents import DilationStructure, as_rational, fmt_rational


def fft_workers() -> int:
    """Data-parallel width for transforms, capped by GNGS_THREADS."""
    env = os.environ.get("GNGS_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            pass
    return os.cpu_count() or 1


@dataclass(frozen=True)
class GridSpec:
    points: tuple[int, ...]
    half_lengths: tuple[float, ...]

    def __post_init__(self):
        pts = tuple(int(n) for n in self.points)
        Ls = tuple(float(L) for L in self.half_lengths)
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "half_lengths", Ls)
        if not 1 <= len(pts) <= 3:
            raise InvalidStructureError("grids must have 1, 2 or 3 axes")
        if len(Ls) != len(pts):
            raise InvalidStructureError("points and half_lengths differ in length")
        for n in pts:
            if n < 8 or n & (n - 1):
                raise InvalidStructureError(f"points per axis must be a power of two >= 8, got {n}")
        if any(not (L > 0 and math.isfinite(L)) for L in Ls):
            raise InvalidStructureError("half-lengths must be positive")

    @property
    def dims(self) -> int:
        return len(self.points)

    @property
    def shape(self) -> tuple[int, ...]:
        return self.points

    @property
    def size(self) -> int:
        return int(np.prod(self.points))

    @property
    def spacing(self) -> tuple[float, ...]:
        return tuple(2 * L / n for n, L in zip(self.points, self.half_lengths))

    @property
    def cell_volume(self) -> float:
        return float(np.prod(self.spacing))

    @property
    def volume(self) -> float:
        return float(np.prod([2 * L for L in self.half_lengths]))

    def axis(self, j: int) -> np.ndarray:
        n, L = self.points[j], self.half_lengths[j]
        return -L + (2 * L / n) * np.arange(n)

    def mesh(self) -> list[np.ndarray]:
        return np.meshgrid(*(self.axis(j) for j in range(self.dims)), indexing="ij")

    def origin_index(self) -> tuple[int, ...]:
        return tuple(n // 2 for n in self.points)

    def scaled(self, factors: Sequence[float]) -> "GridSpec":
        return GridSpec(self.points, tuple(L * f for L, f in zip(self.half_lengths, factors)))


@dataclass(frozen=True, eq=False)
class GridFunction:
    """Real samples on a GridSpec; immutable once built."""

    spec: GridSpec
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.size != self.spec.size:
            raise GridMismatchError(f"{v.size} samples for a grid of {self.spec.size}")
        v = np.array(v.reshape(self.spec.shape), dtype=float, copy=True)
        if not np.all(np.isfinite(v)):
            raise NumericError("grid function has non-finite samples")
        v.flags.writeable = False
        object.__setattr__(self, "values", v)

    @property
    def flat(self) -> np.ndarray:
        return self.values.reshape(-1)

    def __mul__(self, c: float) -> "GridFunction":
        return GridFunction(self.spec, self.values * float(c))

    __rmul__ = __mul__

    def __add__(self, other: "GridFunction") -> "GridFunction":
        _same_grid(self, other)
        return GridFunction(self.spec, self.values + other.values)

    def __sub__(self, other: "GridFunction") -> "GridFunction":
        _same_grid(self, other)
        return GridFunction(self.spec, self.values - other.values)

    def inner(self, other: "GridFunction") -> float:
        _same_grid(self, other)
        return float(np.sum(self.values * other.values) * self.spec.cell_volume)


def _same_grid(u: GridFunction, v: GridFunction) -> None:
    if u.spec != v.spec:
        raise GridMismatchError("grid functions live on different grids")


@dataclass(frozen=True)
class HomogeneousSymbol:
    """sigma(xi) = sum_j coeffs[j] * |xi_j| ** axis_orders[j]."""

    coeffs: tuple[float, ...]
    axis_orders: tuple[Fraction, ...]
    homogeneity: Fraction
    weights: DilationStructure
    extended: bool = False

    def __post_init__(self):
        cs = tuple(float(c) for c in self.coeffs)
        ords = tuple(as_rational(o) for o in self.axis_orders)
        hom = as_rational(self.homogeneity)
        object.__setattr__(self, "coeffs", cs)
        object.__setattr__(self, "axis_orders", ords)
        object.__setattr__(self, "homogeneity", hom)
        n = self.weights.dims
        if len(cs) != n or len(ords) != n:
            raise InvalidStructureError("symbol needs one coefficient and one order per axis")
        if any(not (c > 0 and math.isfinite(c)) for c in cs):
            raise InvalidStructureError("symbol coefficients must be positive")
        for o, w in zip(ords, self.weights.weights):
            if o <= 0:
                raise InvalidStructureError("axis orders must be positive")
            if o * w != hom:
                raise InvalidStructureError(
                    f"axis order {o} with weight {w} is not homogeneous of degree {hom}")
            if not self.extended and (o.denominator != 1 or o.numerator % 2):
                raise InvalidStructureError(
                    f"axis order {fmt_rational(o)} is not an even integer (set extended=True)")

    @classmethod
    def rockland(cls, weights: DilationStructure, coeffs: Sequence[float] | None = None,
                 nu0: Fraction | int | str | None = None, extended: bool = False) -> "HomogeneousSymbol":
        """Symbol of sum_j (-1)^(nu0/nu_j) c_j X_j^(2 nu0/nu_j).

        ``nu0`` defaults to the least common multiple of the weights.
        """
        if coeffs is None:
            coeffs = [1.0] * weights.dims
        nu0 = _rational_lcm(weights.weights) if nu0 is None else as_rational(nu0)
        orders = tuple(2 * nu0 / w for w in weights.weights)
        return cls(tuple(coeffs), orders, 2 * nu0, weights, extended)

    def scaled(self, c: float) -> "HomogeneousSymbol":
        return HomogeneousSymbol(tuple(c * x for x in self.coeffs), self.axis_orders,
                                 self.homogeneity, self.weights, self.extended)

    def __call__(self, xi: Sequence[np.ndarray]) -> np.ndarray:
        out = None
        for c, o, x in zip(self.coeffs, self.axis_orders, xi):
            o = float(o)
            term = c * (np.abs(x) ** o if o != int(o) else np.abs(x) ** int(o))
            out = term if out is None else out + term
        return out


def _rational_lcm(ws: Sequence[Fraction]) -> Fraction:
    num = 1
    den = 0
    for w in ws:
        num = num * w.numerator // math.gcd(num, w.numerator)
        den = math.gcd(den, w.denominator)
    return Fraction(num, den)


def fourier_frequencies(spec: GridSpec) -> list[np.ndarray]:
    """Per-axis angular frequencies in transform order: (pi/L) * {0, 1, ..., -N/2, ..., -1}."""
    return [(math.pi / L) * np.fft.fftfreq(n, d=1.0 / n) for n, L in zip(spec.points, spec.half_lengths)]


def _half_frequencies(spec: GridSpec) -> list[np.ndarray]:
    freqs = fourier_frequencies(spec)
    n, L = spec.points[-1], spec.half_lengths[-1]
    freqs[-1] = (math.pi / L) * np.fft.rfftfreq(n, d=1.0 / n)
    return freqs


@lru_cache(maxsize=64)
def _multiplier(spec: GridSpec, sym: HomogeneousSymbol, s: Fraction) -> np.ndarray:
    if s == 0:
        m = np.ones(_half_shape(spec))
    else:
        xi = np.meshgrid(*_half_frequencies(spec), indexing="ij")
        m = sym(xi) ** float(s)
    # sigma(0)^s := 0 for every s >= 0, so constants are annihilated uniformly
    m[(0,) * spec.dims] = 0.0
    m.flags.writeable = False
    return m


@lru_cache(maxsize=16)
def _plancherel_weights(spec: GridSpec) -> np.ndarray:
    # real transform stores half the last axis; interior bins stand for two modes
    w = np.full(_half_shape(spec), 2.0)
    w[..., 0] = 1.0
    w[..., -1] = 1.0  # Nyquist bin (points are even)
    w *= spec.cell_volume / spec.size
    w.flags.writeable = False
    return w


def _half_shape(spec: GridSpec) -> tuple[int, ...]:
    return spec.points[:-1] + (spec.points[-1] // 2 + 1,)


def multiplier(spec: GridSpec, sym: HomogeneousSymbol, s) -> np.ndarray:
    """sigma^s on the half-spectrum layout used by the real transforms."""
    s = as_rational(s)
    if s < 0:
        raise ValueError("fractional power must be nonnegative")
    return _multiplier(spec, sym, s)


def forward(spec: GridSpec, values: np.ndarray) -> np.ndarray:
    return sfft.rfftn(values, workers=fft_workers())


def inverse(spec: GridSpec, coeffs: np.ndarray) -> np.ndarray:
    return sfft.irfftn(coeffs, s=spec.shape, workers=fft_workers())


def plancherel_integral(spec: GridSpec, coeffs: np.ndarray) -> float:
    """Quadrature of |u|^2 computed from the transform of u."""
    return float(np.sum(_plancherel_weights(spec) * (coeffs.real ** 2 + coeffs.imag ** 2)))


def apply_fractional_power(sym: HomogeneousSymbol, s, u: GridFunction) -> GridFunction:
    """sigma^s(D) u. The zero mode is annihilated for every s >= 0."""
    if not np.all(np.isfinite(u.values)):
        raise NumericError("non-finite input")
    m = multiplier(u.spec, sym, s)
    return GridFunction(u.spec, inverse(u.spec, m * forward(u.spec, u.values)))


def lp_norm(u: GridFunction | np.ndarray, p: float, spec: GridSpec | None = None) -> float:
    if isinstance(u, GridFunction):
        spec, vals = u.spec, u.values
    else:
        vals = np.asarray(u)
    if p < 1:
        raise ValueError("p must be >= 1")
    return float(np.sum(np.abs(vals) ** p) * spec.cell_volume) ** (1.0 / p)


def sobolev_seminorm(u: GridFunction, sym: HomogeneousSymbol, a, p: float) -> float:
    """||R^(a/nu) u||_p with nu the homogeneous degree of the symbol."""
    a = as_rational(a)
    if a < 0:
        raise ValueError("order must be nonnegative")
    return lp_norm(apply_fractional_power(sym, a / sym.homogeneity, u), p)


def dilate(f: Callable[..., np.ndarray], lam: float, p: float, weights: DilationStructure,
           spec: GridSpec) -> GridFunction:
    """Sample lam^(Q/p) f(lam^nu_1 x_1, ..., lam^nu_n x_n); preserves the L^p norm on R^n."""
    if lam <= 0:
        raise ValueError("dilation parameter must be positive")
    if weights.dims != spec.dims:
        raise GridMismatchError("weights and grid differ in dimension")
    X = spec.mesh()
    args = [lam ** float(w) * x for w, x in zip(weights.weights, X)]
    return GridFunction(spec, lam ** (float(weights.Q) / p) * f(*args))


def random_test_function(spec: GridSpec, decay: float, seed: int, zero_mean: bool = True,
                         reference: HomogeneousSymbol | None = None,
                         envelope: Sequence[float] | None = None) -> GridFunction:
    """Seeded smooth random field normalised to unit L^2 norm.

    White noise is damped spectrally by (1 + sigma_ref)^(-decay); sigma_ref
    defaults to |xi|^2. ``envelope`` multiplies by a Gaussian of the given
    per-axis widths centred at a random point, giving localised samples.
    """
    if decay <= 0:
        raise ValueError("decay must be positive")
    rng = np.random.default_rng(seed)
    noise = rng.standard_normal(spec.shape)
    xi = np.meshgrid(*_half_frequencies(spec), indexing="ij")
    ref = sum(x ** 2 for x in xi) if reference is None else reference(xi)
    coeffs = forward(spec, noise) * (1.0 + ref) ** (-decay)
    vals = inverse(spec, coeffs)
    if envelope is not None:
        X = spec.mesh()
        centre = [rng.uniform(-0.5 * L, 0.5 * L) for L in spec.half_lengths]
        vals = vals * np.exp(-sum(((x - c) / w) ** 2 for x, c, w in zip(X, centre, envelope)))
    if zero_mean:
        vals = vals - vals.mean()
    norm = lp_norm(vals, 2, spec)
    if norm == 0:
        raise NumericError("degenerate random sample")
    return GridFunction(spec, vals / norm)


def boundary_mass(u: GridFunction, p: float, shell: float = 0.1) -> float:
    """Fraction of int |u|^p carried by the outer ``shell`` of every axis."""
    X = u.spec.mesh()
    mask = np.zeros(u.spec.shape, dtype=bool)
    for x, L in zip(X, u.spec.half_lengths):
        mask |= np.abs(x) >= (1.0 - shell) * L
    w = np.abs(u.values) ** p
    total = float(np.sum(w))
    return float(np.sum(w[mask])) / total if total > 0 else 0.0


# -- serialisation --------------------------------------------------------

_MAGIC = b"GNGSGRID"
_VERSION = 1


def save_grid_function(u: GridFunction, path: str | os.PathLike, weights: DilationStructure) -> Path:
    """Write ``path`` (header + little-endian float64 samples) and a JSON sidecar."""
    path = Path(path)
    if weights.dims != u.spec.dims:
        raise GridMismatchError("weights and grid differ in dimension")
    d = u.spec.dims
    header = _MAGIC + struct.pack("<II", _VERSION, d)
    header += struct.pack(f"<{d}Q", *u.spec.points)
    header += struct.pack(f"<{d}d", *u.spec.half_lengths)
    header += struct.pack(f"<{d}d", *(float(w) for w in weights.weights))
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(np.ascontiguousarray(u.values, dtype="<f8").tobytes())
    meta = {
        "dims": d,
        "points": list(u.spec.points),
        "half_lengths": list(u.spec.half_lengths),
        "weights": [fmt_rational(w) for w in weights.weights],
        "dtype": "<f8",
        "count": u.spec.size,
        "order": "row-major",
    }
    path.with_suffix(".json").write_text(json.dumps(meta, indent=2) + "\n")
    return path


def load_grid_function(path: str | os.PathLike) -> tuple[GridFunction, DilationStructure]:
    path = Path(path)
    raw = path.read_bytes()
    if not raw.startswith(_MAGIC):
        raise SerializationError(f"{path}: bad magic")
    off = len(_MAGIC)
    version, d = struct.unpack_from("<II", raw, off)
    off += 8
    if version != _VERSION or not 1 <= d <= 3:
        raise SerializationError(f"{path}: unsupported header (version={version}, dims={d})")
    points = struct.unpack_from(f"<{d}Q", raw, off)
    off += 8 * d
    Ls = struct.unpack_from(f"<{d}d", raw, off)
    off += 8 * d
    ws = struct.unpack_from(f"<{d}d", raw, off)
    off += 8 * d
    count = int(np.prod(points))
    payload = raw[off:]
    if len(payload) != 8 * count:
        raise SerializationError(f"{path}: payload holds {len(payload) // 8} samples, header says {count}")
    sidecar = path.with_suffix(".json")
    weights = DilationStructure(tuple(Fraction(repr(w)) for w in ws))
    if sidecar.exists():
        meta = json.loads(sidecar.read_text())
        if (meta.get("count") != count or list(meta.get("points", [])) != list(points)
                or [float(x) for x in meta.get("half_lengths", [])] != list(Ls)):
            raise SerializationError(f"{sidecar}: metadata does not match binary header")
        weights = DilationStructure(tuple(Fraction(w) for w in meta["weights"]))
    vals = np.frombuffer(payload, dtype="<f8").astype(float)
    return GridFunction(GridSpec(points, Ls), vals), weights
