"""Command line front end: ``gngs [command] --config run.json``.

Exit codes: 0 success, 1 flagged rows in ``report --strict``, 2 configuration
error, 3 inadmissible indices, 4 solver failure.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import os
import platform
import sys
import time
from dataclasses import asdict, dataclass, field, fields, replace
from fractions import Fraction
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from . import __version__
from .constants import (
    CSV_FIELDS,
    best_constants,
    csv_row,
    extremality_check,
    ratio_identity_check,
    verify_gn_inequality,
    verify_sobolev_inequality,
)
from .errors import (
    ConfigError,
    GNGSError,
    InadmissibleError,
    InfeasibleExponentError,
    InvalidStructureError,
    SolverDivergenceError,
    SupercriticalOrderError,
    DegeneratePairError,
)
from .exponents import (
    DilationStructure,
    IndexSet,
    as_rational,
    check_admissible,
    critical_exponent,
    fmt_rational,
    gn_exponents,
)
from .functionals import ProblemSpec, Term
from .grid import GridSpec, HomogeneousSymbol, fft_workers, save_grid_function
from .solver import SolverOptions, solve_ground_state

log = logging.getLogger("gngs")

COMMANDS = ("exponents", "solve", "constants", "verify", "report")
EXIT_CONFIG, EXIT_INADMISSIBLE, EXIT_SOLVER = 2, 3, 4

REPORT_FIELDS = ("run", "status", "a1", "a2", "p", "q", "Q", "d", "C_S", "C_GN", "ratio",
                 "el_residual", "pohozaev_max", "boundary_mass", "converged")


def _reject_unknown(data: dict, allowed, where: str) -> None:
    if not isinstance(data, dict):
        raise ConfigError(f"{where}: expected an object")
    extra = sorted(set(data) - set(allowed))
    if extra:
        raise ConfigError(f"{where}: unknown keys {extra}")


def _rat(x, where: str) -> Fraction:
    try:
        return as_rational(x)
    except (TypeError, ValueError, ZeroDivisionError) as exc:
        raise ConfigError(f"{where}: {x!r} is not a rational number") from exc


@dataclass(frozen=True)
class ProblemConfig:
    weights: tuple[Fraction, ...] = (Fraction(1),)
    orders: tuple[Fraction, ...] = (Fraction(2, 5), Fraction(0))
    p: Fraction = Fraction(2)
    q: Fraction = Fraction(3)
    points: tuple[int, ...] = (1024,)
    half_lengths: tuple[float, ...] = (40.0,)
    coeffs: tuple[float, ...] | None = None
    nu0: Fraction | None = None
    extended: bool = False

    @classmethod
    def from_dict(cls, d: dict) -> "ProblemConfig":
        _reject_unknown(d, [f.name for f in fields(cls)], "problem")
        kw: dict[str, Any] = {}
        if "weights" in d:
            kw["weights"] = tuple(_rat(w, "problem.weights") for w in d["weights"])
        if "orders" in d:
            kw["orders"] = tuple(_rat(a, "problem.orders") for a in d["orders"])
        for name in ("p", "q"):
            if name in d:
                kw[name] = _rat(d[name], f"problem.{name}")
        if "nu0" in d and d["nu0"] is not None:
            kw["nu0"] = _rat(d["nu0"], "problem.nu0")
        try:
            if "points" in d:
                kw["points"] = tuple(int(n) for n in d["points"])
            if "half_lengths" in d:
                kw["half_lengths"] = tuple(float(x) for x in d["half_lengths"])
            if d.get("coeffs") is not None:
                kw["coeffs"] = tuple(float(c) for c in d["coeffs"])
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"problem: {exc}") from exc
        if "extended" in d:
            if not isinstance(d["extended"], bool):
                raise ConfigError("problem.extended must be a boolean")
            kw["extended"] = d["extended"]
        return cls(**kw)

    def to_dict(self) -> dict:
        return {
            "weights": [fmt_rational(w) for w in self.weights],
            "orders": [fmt_rational(a) for a in self.orders],
            "p": fmt_rational(self.p),
            "q": fmt_rational(self.q),
            "points": list(self.points),
            "half_lengths": list(self.half_lengths),
            "coeffs": None if self.coeffs is None else list(self.coeffs),
            "nu0": None if self.nu0 is None else fmt_rational(self.nu0),
            "extended": self.extended,
        }

    def build(self) -> ProblemSpec:
        w = DilationStructure(self.weights)
        sym = HomogeneousSymbol.rockland(w, self.coeffs, self.nu0, self.extended)
        grid = GridSpec(self.points, self.half_lengths)
        return ProblemSpec(tuple(Term(sym, a) for a in self.orders), self.p, self.q, grid, w)


@dataclass(frozen=True)
class ExponentsConfig:
    Q: tuple[Fraction, ...] = (Fraction(3),)
    orders: tuple[Fraction, ...] = (Fraction(1), Fraction(0))
    p: Fraction = Fraction(2)
    q: Fraction | None = None

    @classmethod
    def from_dict(cls, d: dict) -> "ExponentsConfig":
        _reject_unknown(d, [f.name for f in fields(cls)], "exponents")
        kw: dict[str, Any] = {}
        if "Q" in d:
            Qs = d["Q"] if isinstance(d["Q"], list) else [d["Q"]]
            kw["Q"] = tuple(_rat(x, "exponents.Q") for x in Qs)
        if "orders" in d:
            kw["orders"] = tuple(_rat(a, "exponents.orders") for a in d["orders"])
        if "p" in d:
            kw["p"] = _rat(d["p"], "exponents.p")
        if d.get("q") is not None:
            kw["q"] = _rat(d["q"], "exponents.q")
        return cls(**kw)

    def to_dict(self) -> dict:
        return {
            "Q": [fmt_rational(x) for x in self.Q],
            "orders": [fmt_rational(a) for a in self.orders],
            "p": fmt_rational(self.p),
            "q": None if self.q is None else fmt_rational(self.q),
        }


@dataclass(frozen=True)
class VerifyConfig:
    samples: int = 200
    decay: float = 1.0

    @classmethod
    def from_dict(cls, d: dict) -> "VerifyConfig":
        _reject_unknown(d, [f.name for f in fields(cls)], "verify")
        try:
            return cls(int(d.get("samples", 200)), float(d.get("decay", 1.0)))
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"verify: {exc}") from exc


_SOLVER_KEYS = [f.name for f in fields(SolverOptions)]


@dataclass(frozen=True)
class RunConfig:
    command: str
    problem: ProblemConfig = field(default_factory=ProblemConfig)
    solver: SolverOptions = field(default_factory=SolverOptions)
    exponents: ExponentsConfig = field(default_factory=ExponentsConfig)
    verify: VerifyConfig = field(default_factory=VerifyConfig)
    output_dir: str = "gngs_out"
    seed: int = 0
    runs: tuple[str, ...] = ()

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        _reject_unknown(d, [f.name for f in fields(cls)], "config")
        cmd = d.get("command")
        if cmd not in COMMANDS:
            raise ConfigError(f"command must be one of {COMMANDS}, got {cmd!r}")
        solver = d.get("solver", {})
        _reject_unknown(solver, _SOLVER_KEYS, "solver")
        seed = d.get("seed", 0)
        if isinstance(seed, bool) or not isinstance(seed, int):
            raise ConfigError("seed must be an integer")
        try:
            opts = SolverOptions(**{"seed": seed, **solver})
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"solver: {exc}") from exc
        runs = d.get("runs", [])
        if not isinstance(runs, list) or not all(isinstance(r, str) for r in runs):
            raise ConfigError("runs must be a list of paths")
        out = d.get("output_dir", "gngs_out")
        if not isinstance(out, str):
            raise ConfigError("output_dir must be a string")
        return cls(
            command=cmd,
            problem=ProblemConfig.from_dict(d.get("problem", {})),
            solver=opts,
            exponents=ExponentsConfig.from_dict(d.get("exponents", {})),
            verify=VerifyConfig.from_dict(d.get("verify", {})),
            output_dir=out,
            seed=seed,
            runs=tuple(runs),
        )

    @classmethod
    def from_json(cls, text: str) -> "RunConfig":
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"malformed JSON: {exc}") from exc
        return cls.from_dict(data)

    def to_dict(self) -> dict:
        return {
            "command": self.command,
            "problem": self.problem.to_dict(),
            "solver": asdict(self.solver),
            "exponents": self.exponents.to_dict(),
            "verify": asdict(self.verify),
            "output_dir": self.output_dir,
            "seed": self.seed,
            "runs": list(self.runs),
        }


# -- commands -------------------------------------------------------------

def _write_csv(path: Path, header: Sequence[str], rows: list[list[str]]) -> None:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    path.write_text(buf.getvalue())


def _stamp(cfg: RunConfig, t0: float) -> dict:
    return {
        "version": __version__,
        "python": platform.python_version(),
        "numpy": np.__version__,
        "threads": fft_workers(),
        "grid": {"points": list(cfg.problem.points), "half_lengths": list(cfg.problem.half_lengths)},
        "runtime_seconds": time.perf_counter() - t0,
    }


def _num(x) -> str:
    return "" if x is None else "%.17g" % x


def cmd_exponents(cfg: RunConfig, out: Path) -> dict:
    ec = cfg.exponents
    rows = []
    for Q in ec.Q:
        for a in ec.orders:
            try:
                crit = fmt_rational(critical_exponent(Q, a, ec.p))
            except SupercriticalOrderError:
                crit = "supercritical"
            row = [fmt_rational(Q), fmt_rational(a), fmt_rational(ec.p), crit]
            if ec.q is not None and len(ec.orders) >= 2:
                idx = IndexSet(ec.orders[0], ec.orders[-1], ec.p, ec.q)
                verdict = check_admissible(idx, Q)
                if verdict:
                    th = gn_exponents(idx, Q)
                    row += [fmt_rational(th.theta1), fmt_rational(th.theta2), "yes"]
                else:
                    row += ["", "", "; ".join(verdict.failures)]
            rows.append(row)
    header = ["Q", "a", "p", "critical_exponent"]
    if ec.q is not None:
        header += ["theta1", "theta2", "admissible"]
    _write_csv(out / "exponents.csv", header, rows)
    return {"exponents": [dict(zip(header, r)) for r in rows]}


def cmd_solve(cfg: RunConfig, out: Path, stage: str) -> tuple[dict, bool]:
    ps = cfg.problem.build()
    res = solve_ground_state(ps, cfg.solver)
    save_grid_function(res.phi, out / "phi.bin", ps.weights)
    _write_csv(out / "iterations.csv", ["iter", "L", "I_residual", "EL_residual", "step"],
               [[str(i), _num(E), _num(n), _num(e), _num(s)] for i, E, n, e, s in res.history])
    report: dict = {"result": res.summary()}
    if stage in ("constants", "verify") and len(ps.terms) == 2:
        bc = best_constants(res, ps)
        report["constants"] = bc.to_dict()
        if bc.ratio_factor is not None:
            report["constants"]["ratio_residual"] = ratio_identity_check(bc)
        _write_csv(out / "constants.csv", CSV_FIELDS, [csv_row(bc, res.d)])
        if stage == "verify":
            vc, seed = cfg.verify, cfg.seed
            margins = {"gn": verify_gn_inequality(ps, bc.C_GN_from_norm, vc.samples, seed, vc.decay)}
            if bc.C_S_from_mass is not None:
                margins["sobolev"] = verify_sobolev_inequality(ps, bc.C_S_from_mass, vc.samples, seed, vc.decay)
            ext = extremality_check(ps, res.phi, vc.samples, seed, vc.decay)
            margins["gn_extremality_gap"] = ext.gn_gap
            margins["sobolev_extremality_gap"] = ext.sobolev_gap
            margins["label"] = ("consistent with sharpness" if ext.gn_gap >= -1e-6 else "sample beats phi")
            report["verification"] = margins
    return report, res.converged


def _read_report(d: Path) -> dict | None:
    try:
        return json.loads((d / "report.json").read_text())
    except (OSError, json.JSONDecodeError):
        return None


def merge_reports(dirs: Sequence[str]) -> tuple[list[list[str]], int]:
    """One row per run directory in lexicographic order; returns rows and the flagged count."""
    seen: dict[str, str] = {}
    for d in dirs:
        key = os.path.normpath(d)
        if key in seen:
            log.warning("duplicate run directory %s ignored", d)
            continue
        seen[key] = d
    rows, flagged = [], 0
    for key in sorted(seen):
        rep = _read_report(Path(key))
        if rep is None or "result" not in rep:
            rows.append([key, "missing"] + [""] * (len(REPORT_FIELDS) - 2))
            flagged += 1
            continue
        pc = rep["config"]["problem"]
        r = rep["result"]
        c = rep.get("constants", {})
        orders = pc["orders"]
        rows.append([
            key, "ok", orders[0], orders[-1], pc["p"], pc["q"],
            fmt_rational(sum((as_rational(w) for w in pc["weights"]), Fraction(0))),
            _num(r["d"]), _num(c.get("C_S_from_mass")), _num(c.get("C_GN_from_norm")),
            _num(c.get("quotient_ratio")), _num(r["el_residual"]),
            _num(max(r["pohozaev_residuals"]) if r["pohozaev_residuals"] else None),
            _num(r["boundary_mass"]), str(r["converged"]).lower(),
        ])
    return rows, flagged


def run(cfg: RunConfig, strict: bool = False) -> int:
    t0 = time.perf_counter()
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    report: dict = {"config": cfg.to_dict()}
    status = 0
    if cfg.command == "exponents":
        report.update(cmd_exponents(cfg, out))
    elif cfg.command == "report":
        rows, flagged = merge_reports(cfg.runs)
        _write_csv(out / "report.csv", REPORT_FIELDS, rows)
        report["rows"] = len(rows)
        report["flagged"] = flagged
        if flagged and strict:
            status = 1
    else:
        body, converged = cmd_solve(cfg, out, cfg.command)
        report.update(body)
        if strict and not converged:
            status = EXIT_SOLVER
    report["environment"] = _stamp(cfg, t0)
    (out / "report.json").write_text(json.dumps(report, indent=2, sort_keys=True) + "\n")
    return status


def _fail(code: int, exc: BaseException) -> int:
    err = {"error": type(exc).__name__, "message": str(exc), "exit_code": code}
    dump = getattr(exc, "dump_path", None)
    if dump:
        err["iterate_dump"] = dump
    print(json.dumps(err), file=sys.stderr)
    return code


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="gngs", description=__doc__.splitlines()[0])
    ap.add_argument("command", nargs="?", choices=COMMANDS, help="overrides the config's command")
    ap.add_argument("runs", nargs="*", help="run directories for 'report'")
    ap.add_argument("--config", help="JSON run configuration")
    ap.add_argument("--output", help="output directory (overrides output_dir)")
    ap.add_argument("--seed", type=int, help="seed (overrides config)")
    ap.add_argument("--strict", action="store_true",
                    help="non-converged solves and missing reports give a nonzero exit")
    ap.add_argument("-v", "--verbose", action="store_true")
    return ap


def main(argv: Sequence[str] | None = None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.config:
            try:
                text = Path(args.config).read_text()
            except OSError as exc:
                raise ConfigError(f"cannot read {args.config}: {exc}") from exc
            data = json.loads(text) if text.strip().startswith("{") else None
            if data is None:
                raise ConfigError("config must be a JSON object")
        elif args.command:
            data = {"command": args.command}
        else:
            raise ConfigError("need --config or a command")
        if args.command:
            data["command"] = args.command
        if args.runs:
            data["runs"] = list(data.get("runs", [])) + list(args.runs)
        if args.output:
            data["output_dir"] = args.output
        if args.seed is not None:
            data["seed"] = args.seed
            if isinstance(data.get("solver"), dict):
                data["solver"].pop("seed", None)
        cfg = RunConfig.from_dict(data)
        if cfg.command != "report" and cfg.command != "exponents":
            cfg.problem.build()  # validate before any artifact is written
    except json.JSONDecodeError as exc:
        return _fail(EXIT_CONFIG, ConfigError(f"malformed JSON: {exc}"))
    except (InadmissibleError, SupercriticalOrderError, InfeasibleExponentError, DegeneratePairError) as exc:
        return _fail(EXIT_INADMISSIBLE, exc)
    except (ConfigError, InvalidStructureError, GNGSError, ValueError, TypeError) as exc:
        return _fail(EXIT_CONFIG, exc)
    try:
        return run(cfg, args.strict)
    except SolverDivergenceError as exc:
        return _fail(EXIT_SOLVER, exc)
    except (InadmissibleError, SupercriticalOrderError, InfeasibleExponentError, DegeneratePairError) as exc:
        return _fail(EXIT_INADMISSIBLE, exc)
    except GNGSError as exc:
        return _fail(EXIT_SOLVER, exc)


if __name__ == "__main__":
    sys.exit(main())
