"""Least-energy solutions by Nehari-projected, preconditioned gradient descent.

Each step moves against the L^2 gradient of the energy, preconditioned by the
inverse of the quadratic part sum_j sigma_j^(2 a_j / nu_j), optionally replaces
the trial point by its modulus, and rescales it back onto the Nehari set in
closed form. Armijo backtracking acts on the energy of the projected point.
"""
from __future__ import annotations

import logging
import math
import tempfile
import time
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import (
    GridMismatchError,
    SolverDivergenceError,
    UnsupportedExponentError,
    UnsupportedProblemError,
)
from .functionals import ProblemSpec, kernel, _nehari_mu
from .grid import (
    GridFunction,
    GridSpec,
    boundary_mass,
    forward,
    inverse,
    load_grid_function,
    random_test_function,
)

log = logging.getLogger(__name__)

INITS = ("gaussian", "random", "file")


@dataclass(frozen=True)
class SolverOptions:
    max_iters: int = 5000
    step0: float = 1.0
    armijo_c: float = 1e-4
    armijo_shrink: float = 0.5
    tol_residual: float = 1e-8
    tol_energy: float = 1e-12
    multistart: int = 1
    seed: int = 0
    init: str = "gaussian"
    init_file: str | None = None
    clamp: bool | None = None  # None: on for p = 2
    recenter_every: int = 50
    min_step: float = 1e-10
    clamp_release_step: float = 1e-3
    boundary_tol: float = 1e-6

    def __post_init__(self):
        if self.max_iters < 0:
            raise ValueError("max_iters must be nonnegative")
        if not self.step0 > 0:
            raise ValueError("step0 must be positive")
        if not 0 < self.armijo_c < 1 or not 0 < self.armijo_shrink < 1:
            raise ValueError("Armijo parameters must lie in (0, 1)")
        if not (self.tol_residual > 0 and self.tol_energy > 0 and self.boundary_tol > 0):
            raise ValueError("tolerances must be positive")
        if self.multistart < 1:
            raise ValueError("multistart must be >= 1")
        if self.init not in INITS:
            raise ValueError(f"init must be one of {INITS}")
        if self.init == "file" and not self.init_file:
            raise ValueError("init='file' needs init_file")


@dataclass
class GroundStateResult:
    phi: GridFunction
    d: float
    term_seminorms: list[float]
    lq: float
    lp: float
    el_residual: float
    nehari_residual: float
    pohozaev_residuals: list[float]
    lambda_residual: float
    iterations: int
    boundary_mass: float
    converged: bool
    stationary: bool
    multistart_energies: list[float] = field(default_factory=list)
    energy_spread: float = 0.0
    max_energy_increase: float = 0.0
    max_nehari_violation: float = 0.0
    clamp_released: bool = False
    runtime: float = 0.0
    history: list[tuple[int, float, float, float, float]] = field(default_factory=list)
    notes: list[str] = field(default_factory=list)

    def summary(self) -> dict:
        return {
            "d": self.d,
            "term_seminorms": list(self.term_seminorms),
            "lq": self.lq,
            "lp": self.lp,
            "el_residual": self.el_residual,
            "nehari_residual": self.nehari_residual,
            "pohozaev_residuals": list(self.pohozaev_residuals),
            "lambda_residual": self.lambda_residual,
            "iterations": self.iterations,
            "boundary_mass": self.boundary_mass,
            "converged": self.converged,
            "stationary": self.stationary,
            "multistart_energies": list(self.multistart_energies),
            "energy_spread": self.energy_spread,
            "max_energy_increase": self.max_energy_increase,
            "max_nehari_violation": self.max_nehari_violation,
            "clamp_released": self.clamp_released,
            "notes": list(self.notes),
        }


def gaussian_init(ps: ProblemSpec) -> np.ndarray:
    """exp(-sum_j (x_j / w_j)^2) with w_j = min(2^nu_j, L_j / 4)."""
    X = ps.grid.mesh()
    ws = [min(2.0 ** float(nu), L / 4) for nu, L in zip(ps.weights.weights, ps.grid.half_lengths)]
    return np.exp(-sum((x / w) ** 2 for x, w in zip(X, ws)))


def _recenter(u: np.ndarray) -> np.ndarray:
    peak = np.unravel_index(np.argmax(np.abs(u)), u.shape)
    shift = tuple(n // 2 - i for n, i in zip(u.shape, peak))
    return np.roll(u, shift, axis=tuple(range(u.ndim)))


def _dump(u: np.ndarray, tag: str) -> str:
    path = Path(tempfile.gettempdir()) / f"gngs_diverged_{tag}_{int(time.time() * 1e6)}.npy"
    np.save(path, u)
    return str(path)


@dataclass
class _Run:
    u: np.ndarray
    energy: float
    iterations: int
    stationary: bool
    el_residual: float
    history: list
    max_increase: float
    max_nehari: float
    clamp_released: bool
    notes: list


def _descend(ps: ProblemSpec, u0: np.ndarray, opts: SolverOptions, tag: str) -> _Run:
    k = kernel(ps)
    p, q, h = k.p, k.q, k.h
    spec = ps.grid
    P = np.array(k.quad)
    P[(0,) * spec.dims] = max(P[(0,) * spec.dims], 1.0)
    clamp = (p == 2.0) if opts.clamp is None else opts.clamp
    released = False
    notes: list[str] = []
    if clamp:
        notes.append("modulus symmetrisation on")

    def prep(u):
        if k.zero_mode_free:
            u = u - u.mean()
        return u

    def project(u):
        uh = forward(spec, u)
        S, M = k.parts(u, uh)
        mu = _nehari_mu(sum(S), M, p, q)
        v = mu * u
        S = [s * mu ** p for s in S]
        M = M * mu ** q
        return v, sum(S) / p - M / q, abs(sum(S) - M) / sum(S)

    u, E, nres = project(prep(np.asarray(u0, dtype=float)))
    max_nehari = nres
    history = []
    max_inc = 0.0
    tau_prev = opts.step0
    stationary = False
    prev_drop = math.inf
    it = 0
    el = math.inf
    while True:
        uh = forward(spec, u)
        nl = np.abs(u) ** (q - 2) * u
        if p == 2.0:
            gh = k.quad * uh - forward(spec, nl)
        else:
            gh = forward(spec, k.gradient(u, uh))
        if k.zero_mode_free:
            # the mean is constrained away; its multiplier is not part of the residual
            gh[(0,) * spec.dims] = 0.0
        g = inverse(spec, gh)
        el = math.sqrt(float(np.sum(g * g)) / float(np.sum(u * u)))
        if not (math.isfinite(el) and math.isfinite(E)):
            raise SolverDivergenceError(f"non-finite energy or residual at iteration {it}",
                                        iterate=u, dump_path=_dump(u, tag))
        history.append((it, E, nres, el, tau_prev))
        if el < opts.tol_residual and prev_drop < opts.tol_energy:
            stationary = True
            break
        if it >= opts.max_iters:
            break
        dh = gh / P
        dvec = inverse(spec, dh)
        slope = float(np.sum(g * dvec)) * h
        tau = min(opts.step0, 2 * tau_prev)
        accepted = False
        while tau >= opts.min_step:
            trial = u - tau * dvec
            if clamp:
                trial = np.abs(trial)
            trial = prep(trial)
            try:
                v, Ev, nv = project(trial)
            except Exception:
                Ev = math.inf
            if math.isfinite(Ev) and Ev <= E - opts.armijo_c * tau * slope + 1e-14 * abs(E):
                accepted = True
                break
            tau *= opts.armijo_shrink
        if clamp and (not accepted or tau < opts.clamp_release_step):
            # sign-changing minimiser: the modulus blocks descent
            clamp = False
            released = True
            notes.append(f"modulus symmetrisation released at iteration {it}")
            tau_prev = opts.step0
            continue
        if not accepted:
            # no descent left above roundoff
            if el < opts.tol_residual:
                stationary = True
            notes.append(f"line search exhausted at iteration {it}")
            break
        max_inc = max(max_inc, (Ev - E) / abs(E) if E else Ev - E)
        prev_drop = abs(E - Ev) / max(abs(E), 1e-300)
        u, E, nres = v, Ev, nv
        max_nehari = max(max_nehari, nres)
        tau_prev = tau
        it += 1
        if opts.recenter_every and it % opts.recenter_every == 0:
            u = _recenter(u)
    if it == 0 and el < opts.tol_residual:
        # restart from a fixed point
        stationary = True
    return _Run(u, E, it, stationary, el, history, max(max_inc, 0.0), max_nehari, released, notes)


def _initial(ps: ProblemSpec, opts: SolverOptions, start: int,
             initial: GridFunction | None) -> np.ndarray:
    if start == 0:
        if initial is not None:
            if initial.spec != ps.grid:
                raise GridMismatchError("initial guess lives on a different grid")
            return np.array(initial.values)
        if opts.init == "file":
            f, _ = load_grid_function(opts.init_file)
            if f.spec != ps.grid:
                raise GridMismatchError(f"{opts.init_file} does not match the problem grid")
            return np.array(f.values)
        if opts.init == "gaussian":
            return gaussian_init(ps)
    widths = [min(2.0 ** float(nu), L / 4) for nu, L in zip(ps.weights.weights, ps.grid.half_lengths)]
    r = random_test_function(ps.grid, 1.0, opts.seed + start, zero_mean=False, envelope=widths)
    return np.abs(r.values) if ps.p == 2 else r.values


def solve_ground_state(ps: ProblemSpec, opts: SolverOptions | None = None,
                       initial: GridFunction | None = None) -> GroundStateResult:
    opts = opts or SolverOptions()
    if ps.p < 2:
        raise UnsupportedExponentError("the solver needs p >= 2")
    t0 = time.perf_counter()
    runs = []
    for s in range(opts.multistart):
        u0 = _initial(ps, opts, s, initial)
        runs.append(_descend(ps, u0, opts, f"start{s}"))
        log.info("start %d: d=%.12g after %d iterations", s, runs[-1].energy, runs[-1].iterations)
    energies = [r.energy for r in runs]
    best = runs[int(np.argmin(energies))]  # first index wins ties
    phi = GridFunction(ps.grid, best.u)
    res = _assemble(ps, phi, best, opts)
    res.multistart_energies = energies
    res.energy_spread = (max(energies) - min(energies)) / abs(min(energies)) if len(energies) > 1 else 0.0
    if res.energy_spread > 1e-6:
        res.notes.append(f"multistart found distinct energies, spread {res.energy_spread:.3e}")
    res.runtime = time.perf_counter() - t0
    return res


def _assemble(ps: ProblemSpec, phi: GridFunction, run: _Run, opts: SolverOptions) -> GroundStateResult:
    k = kernel(ps)
    S, M = k.parts(phi.values)
    d = sum(S) / k.p - M / k.q
    g = k.gradient(phi.values)
    if k.zero_mode_free:
        g = g - g.mean()
    el = math.sqrt(float(np.sum(g * g)) / float(np.sum(phi.values ** 2)))
    nres = abs(sum(S) - M) / sum(S)
    poh = pohozaev_check(ps, phi) if len(ps.terms) == 2 else []
    lam = lambda_derivative(ps, phi)
    bm = boundary_mass(phi, k.p)
    converged = (el <= opts.tol_residual and nres <= opts.tol_residual
                 and bm <= opts.boundary_tol and d > 0)
    notes = list(run.notes)
    if bm > opts.boundary_tol:
        notes.append(f"boundary mass {bm:.3e} exceeds {opts.boundary_tol:.1e}")
    return GroundStateResult(
        phi=phi, d=d, term_seminorms=S, lq=M, lp=k.lp(phi.values), el_residual=el,
        nehari_residual=nres, pohozaev_residuals=poh, lambda_residual=lam,
        iterations=run.iterations, boundary_mass=bm, converged=converged,
        stationary=run.stationary, max_energy_increase=run.max_increase,
        max_nehari_violation=run.max_nehari, clamp_released=run.clamp_released,
        history=run.history, notes=notes,
    )


def _rel(lhs: float, rhs: float) -> float:
    scale = max(abs(lhs), abs(rhs))
    return abs(lhs - rhs) / scale if scale else 0.0


def pohozaev_check(ps: ProblemSpec, phi: GridFunction) -> list[float]:
    """Relative residuals of the three two-term balance laws of a ground state.

    With A = S_1, B = S_2, D = a1 p q - Q(q-p):
      A = (Q(q-p) - a2 p q)/D * B,   M = (a1-a2) p q / D * B,   B = D/((a1-a2)(q-p)) * d.
    """
    if len(ps.terms) != 2:
        raise UnsupportedProblemError("use lambda_derivative for problems with more than two terms")
    a1, a2 = ps.terms[0].order, ps.terms[1].order
    p, q, Q = ps.p, ps.q, ps.Q
    D = a1 * p * q - Q * (q - p)
    k = kernel(ps)
    (A, B), M = k.parts(phi.values)
    d = (A + B) / k.p - M / k.q
    return [
        _rel(A, float((Q * (q - p) - a2 * p * q) / D) * B),
        _rel(M, float((a1 - a2) * p * q / D) * B),
        _rel(B, float(D / ((a1 - a2) * (q - p))) * d),
    ]


def scaled_energy(ps: ProblemSpec, S: Sequence[float], M: float, lam: float) -> float:
    """Energy of lam^(Q/p) phi(delta_lam x) from the term integrals of phi."""
    p, q, Q = float(ps.p), float(ps.q), float(ps.Q)
    kin = sum(lam ** (float(t.order) * p) * s for t, s in zip(ps.terms, S)) / p
    return kin - lam ** (Q * (q - p) / p) * M / q


def lambda_derivative(ps: ProblemSpec, phi: GridFunction, delta: float = 1e-4,
                      resample: bool = False) -> float:
    """|d/dlam L(phi_lam)| at lam = 1 by central differences, relative to |L(phi)|.

    By default the dilated energies come from the exact scaling law of the
    term integrals. ``resample=True`` instead evaluates phi at dilated points
    by trigonometric interpolation and recomputes the functionals (small grids).
    """
    k = kernel(ps)
    S, M = k.parts(phi.values)
    d = sum(S) / k.p - M / k.q
    if resample:
        Ep = k.energy(resample_dilation(phi, 1 + delta, ps).values)
        Em = k.energy(resample_dilation(phi, 1 - delta, ps).values)
    else:
        Ep = scaled_energy(ps, S, M, 1 + delta)
        Em = scaled_energy(ps, S, M, 1 - delta)
    return abs(Ep - Em) / (2 * delta) / abs(d)


def resample_dilation(phi: GridFunction, lam: float, ps: ProblemSpec) -> GridFunction:
    """lam^(Q/p) phi(lam^nu_1 x_1, ...) with phi continued by its trigonometric interpolant."""
    spec = phi.spec
    if spec.size > 2 ** 22:
        raise UnsupportedProblemError("grid too large for dense resampling")
    out = np.asarray(phi.values, dtype=complex)
    for j, (n, L) in enumerate(zip(spec.points, spec.half_lengths)):
        x = spec.axis(j)
        xi = (math.pi / L) * np.fft.fftfreq(n, d=1.0 / n)
        y = lam ** float(ps.weights.weights[j]) * x
        E = np.exp(1j * np.outer(y + L, xi)) / n
        coeffs = np.fft.fft(out, axis=j)
        out = np.moveaxis(np.tensordot(E, np.moveaxis(coeffs, j, 0), axes=(1, 0)), 0, j)
    return GridFunction(spec, lam ** (float(ps.Q) / float(ps.p)) * out.real)


def brute_force_d(ps: ProblemSpec, trials: int = 100, seed: int = 0, steps: int = 200,
                  start: GridFunction | None = None, history: bool = False):
    """Upper bound for d from projected random starts and plain projected descent.

    Independent of the main solver: no preconditioning, no symmetrisation, a
    fixed step 1/max(symbol) and a running minimum over all visited points.
    """
    if ps.grid.size > 64:
        raise UnsupportedProblemError("brute force is limited to grids of at most 64 points")
    if trials < 1:
        raise ValueError("trials must be positive")
    k = kernel(ps)
    tau = 1.0 / float(np.max(k.quad))
    best = math.inf
    trace = []
    for t in range(trials):
        if t == 0 and start is not None:
            u = np.array(start.values)
        else:
            u = random_test_function(ps.grid, 1.0, seed + t, zero_mean=k.zero_mode_free).values
        for _ in range(steps + 1):
            if k.zero_mode_free:
                u = u - u.mean()
            S, M = k.parts(u)
            try:
                mu = _nehari_mu(sum(S), M, k.p, k.q)
            except Exception:
                break
            u = mu * u
            E = k.energy(u)
            if math.isfinite(E):
                best = min(best, E)
            u = u - tau * k.gradient(u)
        trace.append(best)
    return (best, trace) if history else best


@dataclass(frozen=True)
class MassCheck:
    min_deficit: float  # min over samples of ||v||^p - ||phi||^p at equal q-mass
    relative: float  # min_deficit / ||phi||^p
    dilation_deficit: float
    samples: int


def minimizer_mass_check(ps: ProblemSpec, phi: GridFunction, perturbations: int = 100,
                         seed: int = 0, dilation: float | None = 1.1) -> MassCheck:
    """Sampled test that phi minimises sum_j S_j among functions of the same q-mass.

    Half the samples are independent random fields, half are phi plus a 5%
    random perturbation.
    """
    k = kernel(ps)
    S0, M0 = k.parts(phi.values)
    base = sum(S0)

    def deficit(v: np.ndarray) -> float:
        if k.zero_mode_free:
            v = v - v.mean()
        S, M = k.parts(v)
        c = (M0 / M) ** (1.0 / k.q)
        return sum(S) * c ** k.p - base

    scale = math.sqrt(float(np.mean(phi.values ** 2)))
    worst = deficit(phi.values)
    for i in range(perturbations):
        r = random_test_function(ps.grid, 1.0, seed + i, zero_mean=k.zero_mode_free).values
        if i % 2:
            v = phi.values + 0.05 * scale * r / math.sqrt(float(np.mean(r ** 2)))
        else:
            v = r
        worst = min(worst, deficit(v))
    dil = math.nan
    if dilation is not None:
        dil = deficit(resample_dilation(phi, dilation, ps).values)
        worst = min(worst, dil)
    return MassCheck(worst, worst / base, dil, perturbations)
