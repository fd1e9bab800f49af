"""Convergence-study driver.

    python -m wgcurve.cli --problem example1 --k 1 --variant super --mu 1 --levels 0..4

Settings come from an optional ``key = value`` file (``--config``) and are
overridden by flags.  Exit codes: 0 ok, 2 config error, 3 solver failure,
4 mesh failure.
"""
from __future__ import annotations

import argparse
import math
import sys
from dataclasses import dataclass, fields, replace
from pathlib import Path

import numpy as np

from .meshgen import MeshGenerationError
from .problems import PROBLEMS, make_problem
from .quadrature import GeometryError
from .svg import field_svg, mesh_svg
from .system import AssemblyError, SolverError, assemble, solve
from .verify import CSV_COLUMNS, convergence_rates, error_report, project_exact, write_csv
from .wg_operator import DiscretizationConfig

EXIT_OK, EXIT_CONFIG, EXIT_SOLVER, EXIT_MESH = 0, 2, 3, 4
SOLVERS = {"cg": "cg_jacobi", "dense": "dense_cholesky", "lu": "sparse_lu"}
EMITS = ("table", "csv", "svg")


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class StudyConfig:
    problem: str = "example1"
    k: int = 1
    variant: str = "super"
    mu: tuple = (1.0,)
    levels: tuple = (0, 3)
    rho: float | None = None
    solver: str = "cg"
    tol: float = 1e-12
    neumann: str = "single"
    out: str = "results"
    emit: tuple = ("table", "csv")

    def validate(self) -> "StudyConfig":
        if self.problem not in PROBLEMS:
            raise ConfigError(f"unknown problem {self.problem!r}")
        if self.k < 1:
            raise ConfigError("k must be >= 1")
        if self.variant not in ("standard", "super"):
            raise ConfigError(f"unknown variant {self.variant!r}")
        if not self.mu or any(not (m > 0 and math.isfinite(m)) for m in self.mu):
            raise ConfigError("mu values must be positive")
        a, b = self.levels
        if a < 0 or b < a:
            raise ConfigError(f"bad level range {a}..{b}")
        if self.solver not in SOLVERS:
            raise ConfigError(f"unknown solver {self.solver!r}")
        if not self.tol > 0:
            raise ConfigError("tol must be positive")
        if self.neumann not in ("single", "literal"):
            raise ConfigError(f"unknown Neumann convention {self.neumann!r}")
        if any(e not in EMITS for e in self.emit):
            raise ConfigError(f"emit must be a subset of {EMITS}")
        try:
            self.discretization()
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        return self

    def discretization(self) -> DiscretizationConfig:
        return DiscretizationConfig(self.k, self.variant, self.rho)


def _parse_levels(text: str) -> tuple:
    parts = text.replace(" ", "").split("..")
    try:
        if len(parts) == 1:
            return (int(parts[0]), int(parts[0]))
        if len(parts) == 2:
            return (int(parts[0]), int(parts[1]))
    except ValueError:
        pass
    raise ConfigError(f"levels must look like A..B, got {text!r}")


def _convert(key: str, raw):
    try:
        if key == "k":
            return int(raw)
        if key in ("tol",):
            return float(raw)
        if key == "rho":
            return None if str(raw).lower() in ("", "none", "default") else float(raw)
        if key == "mu":
            items = raw if isinstance(raw, (list, tuple)) else str(raw).split(",")
            return tuple(float(m) for m in items if str(m).strip())
        if key == "levels":
            return _parse_levels(str(raw))
        if key == "emit":
            items = raw if isinstance(raw, (list, tuple)) else str(raw).split(",")
            return tuple(e.strip() for e in items if e.strip())
    except ValueError as exc:
        raise ConfigError(f"bad value for {key}: {raw!r}") from exc
    return str(raw).strip()


def parse_config_file(path) -> dict:
    known = {f.name for f in fields(StudyConfig)}
    out = {}
    for n, line in enumerate(Path(path).read_text().splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{n}: expected key = value")
        key, val = (s.strip() for s in line.split("=", 1))
        if key not in known:
            raise ConfigError(f"{path}:{n}: unknown key {key!r}")
        out[key] = _convert(key, val)
    return out


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="wgcurve", description="Weak Galerkin convergence studies on curved interface meshes")
    p.add_argument("--config", help="key = value settings file")
    p.add_argument("--problem", choices=sorted(PROBLEMS))
    p.add_argument("--k", type=int)
    p.add_argument("--variant", choices=("standard", "super"))
    p.add_argument("--mu", type=float, action="append", help="repeatable")
    p.add_argument("--levels", help="A..B")
    p.add_argument("--rho", type=float)
    p.add_argument("--solver", choices=sorted(SOLVERS))
    p.add_argument("--tol", type=float)
    p.add_argument("--neumann", choices=("single", "literal"))
    p.add_argument("--out")
    p.add_argument("--emit", help="comma list of table,csv,svg")
    return p


def config_from_args(argv=None) -> StudyConfig:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        if exc.code == 0:
            raise
        raise ConfigError("invalid command line") from None
    values = parse_config_file(args.config) if args.config else {}
    for f in fields(StudyConfig):
        v = getattr(args, f.name, None)
        if v is not None:
            values[f.name] = _convert(f.name, v) if f.name in ("mu", "levels", "emit") else v
    return replace(StudyConfig(), **values).validate()


# ------------------------------------------------------------------ tables

def fortran_e(x: float, digits: int = 4) -> str:
    """``0.1688E-04`` style: mantissa in [0.1, 1)."""
    if x == 0 or not math.isfinite(x):
        return f"0.{'0' * digits}E+00" if x == 0 else str(x)
    exp = math.floor(math.log10(abs(x))) + 1
    mant = round(abs(x) / 10.0 ** exp, digits)
    if mant >= 1.0:
        mant, exp = mant / 10.0, exp + 1
    sign = "-" if x < 0 else ""
    return f"{sign}{mant:.{digits}f}E{exp:+03d}"


def format_rate(r: float) -> str:
    return "0.0" if r is None or not math.isfinite(r) else f"{r:.1f}"


def emit_table(table, style: str = "compact") -> str:
    """Fixed-width text in the row shape: level, error, rate, error, rate."""
    if not table.reports:
        raise ValueError("empty table")
    head = f"{'G_i':>4} | {'|Q0u-u0|_{0,a}':>14} {'rate':>5} | {'|grad_w(Qhu-uh)|_{0,a^2}':>24} {'rate':>5}"
    if style == "full":
        head += f" | {'triple-bar':>11} {'rate':>5} | {'|e_b|_Eh':>11} {'rate':>5}"
    lines = [head, "-" * len(head)]
    for rep, rt in table.rows():
        row = (f"{rep.level:>4} | {fortran_e(rep.errL2a):>14} {format_rate(rt['errL2a']):>5} | "
               f"{fortran_e(rep.errGrada2):>24} {format_rate(rt['errGrada2']):>5}")
        if style == "full":
            row += (f" | {fortran_e(rep.tripleBar):>11} {format_rate(rt['tripleBar']):>5} | "
                    f"{fortran_e(rep.edgeNorm):>11} {format_rate(rt['edgeNorm']):>5}")
        lines.append(row)
    return "\n".join(lines) + "\n"


def parse_table(text: str) -> list:
    """Inverse of :func:`emit_table` (compact style): rows of (level, errL2a, rateL2, errGrad, rateGrad)."""
    rows = []
    for line in text.splitlines()[2:]:
        cells = [c.split() for c in line.split("|")]
        if len(cells) < 3:
            continue
        rows.append((int(cells[0][0]), float(cells[1][0]), float(cells[1][1]), float(cells[2][0]), float(cells[2][1])))
    return rows


# ------------------------------------------------------------------ driver

def _stem(cfg: StudyConfig, mu: float) -> str:
    return f"{cfg.problem}_k{cfg.k}_{cfg.variant}_mu{mu:g}"


def run_study(cfg: StudyConfig, stream=None) -> int:
    """Run every (mu, level) of the study; returns an exit code."""
    from .meshgen import generate_fitted_mesh

    stream = stream or sys.stdout
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    dcfg = cfg.discretization()
    method = SOLVERS[cfg.solver]
    for mu in cfg.mu:
        problem = make_problem(cfg.problem, mu)
        stem = _stem(cfg, mu)
        reports = []
        print(f"# {cfg.problem} k={cfg.k} {cfg.variant} rho={dcfg.rho:g} mu={mu:g} solver={cfg.solver}", file=stream)
        for level in range(cfg.levels[0], cfg.levels[1] + 1):
            try:
                mesh = generate_fitted_mesh(problem.domain, level)
            except (MeshGenerationError, GeometryError) as exc:
                print(f"mesh failure at level {level}: {exc}", file=sys.stderr)
                return EXIT_MESH
            try:
                system = assemble(mesh, problem, dcfg, cfg.neumann)
                sol = solve(system, method, cfg.tol)
            except GeometryError as exc:
                print(f"mesh failure at level {level}: {exc}", file=sys.stderr)
                return EXIT_MESH
            except (SolverError, AssemblyError) as exc:
                print(f"solver failure at level {level}: {exc}", file=sys.stderr)
                return EXIT_SOLVER
            reports.append(error_report(mesh, problem, sol))
            table = convergence_rates(reports, min_levels=1)
            # rewrite after every level so partial results survive a later failure
            if "csv" in cfg.emit:
                write_csv(table, out / f"{stem}.csv")
            if "table" in cfg.emit:
                (out / f"{stem}.txt").write_text(emit_table(table))
        if "svg" in cfg.emit:
            (out / f"{stem}_mesh.svg").write_text(mesh_svg(mesh))
            e = project_exact(mesh, problem, dcfg, system.layout, system.ops.geom) - sol.coeffs
            el = e[system.layout.elem_map]
            per = np.sqrt(np.einsum("t,ti,tij,tj->t", system.a_T ** 2, el, system.ops.K, el).clip(min=0))
            (out / f"{stem}_error.svg").write_text(field_svg(mesh, per, label="|grad_w e|_{a^2} per element"))
        stream.write(emit_table(table))
        stream.flush()
    return EXIT_OK


def main(argv=None) -> int:
    try:
        cfg = config_from_args(argv)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return run_study(cfg)


if __name__ == "__main__":
    sys.exit(main())
