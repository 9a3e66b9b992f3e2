"""Benchmark harness for the CO oxidation channel.

Subcommands::

    reducedfv run           one scenario, prints a summary row
    reducedfv sweep-levels  one row per refinement level
    reducedfv sweep-k       one row per rate constant on a fixed level
    reducedfv profile       species values along the catalytic surface

Settings come from defaults, then an optional ``key=value`` config file,
then command-line flags.
"""
from __future__ import annotations

import argparse
import csv
import dataclasses
import io
import logging
import statistics
import sys
import time
from dataclasses import dataclass, field

import numpy as np

from .kinetics import make_model
from .mesh import build_grid, catalytic_index, tag_boundary
from .operator import assemble, hagen_poiseuille
from .reduced import compress, contiguous_groups, offline, online, reconstruct
from .reference import global_solve

log = logging.getLogger(__name__)

SWEEP_COLUMNS = (
    "level",
    "N_global",
    "N_reduced",
    "t_offline_s",
    "t_online_s",
    "t_global_s",
    "iters_reduced",
    "iters_global",
    "max_diff",
    "k",
)
PROFILE_COLUMNS = ("x", "Y_CO", "Y_O2", "Y_CO2")
MAX_DEFAULT_LEVEL = 6
MODES = ("global", "reduced", "both")


@dataclass
class ScenarioConfig:
    level: int = 0
    D: float = 1e-2
    k: float = 1e10
    v_in: float = 1.0
    Lx: float = 5.0
    Ly: float = 1.0
    catalytic_span: tuple = (2.0, 3.0)
    Y_in: tuple = (0.2, 0.8, 0.0)
    mode: str = "both"
    compress: int = 0
    ftol: float = 1e-11
    model: str = "mass_action_co_ox"
    repeats: int = 1
    out: str | None = None
    allow_large_level: bool = False

    def validate(self):
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.level < 0:
            raise ValueError("level must be non-negative")
        if self.level > MAX_DEFAULT_LEVEL and not self.allow_large_level:
            raise ValueError(
                f"level {self.level} > {MAX_DEFAULT_LEVEL} refused; pass --allow-large-level"
            )
        if self.D <= 0 or self.v_in < 0 or self.k < 0:
            raise ValueError("need D > 0, v_in >= 0, k >= 0")
        if self.repeats < 1:
            raise ValueError("repeats must be at least 1")
        return self


@dataclass
class SolveReport:
    config: ScenarioConfig
    N_global: int
    N_reduced: int
    t_offline_s: float = float("nan")
    t_online_s: float = float("nan")
    t_global_s: float = float("nan")
    iters_reduced: int | None = None
    iters_global: int | None = None
    max_diff: float = float("nan")
    reduced_fields: np.ndarray | None = None
    global_fields: np.ndarray | None = None
    reduced_trace: np.ndarray | None = None
    catalytic_x: np.ndarray | None = None
    extra: dict = field(default_factory=dict)

    def row(self):
        return dict(
            level=self.config.level,
            N_global=self.N_global,
            N_reduced=self.N_reduced,
            t_offline_s=self.t_offline_s,
            t_online_s=self.t_online_s,
            t_global_s=self.t_global_s,
            iters_reduced=self.iters_reduced,
            iters_global=self.iters_global,
            max_diff=self.max_diff,
            k=self.config.k,
        )

    def profile(self):
        """Boundary species values along the surface, preferring the reduced run."""
        if self.reduced_trace is not None:
            return self.reduced_trace
        return self.global_fields[:, self.extra["catalytic_nodes"]]


_FLOAT_KEYS = {"D", "k", "v_in", "Lx", "Ly", "ftol"}
_INT_KEYS = {"level", "compress", "repeats"}
_TUPLE_KEYS = {"catalytic_span", "Y_in"}
_ALIASES = {"vin": "v_in", "span": "catalytic_span"}


def parse_config(text: str) -> dict:
    """Parse flat ``key=value`` lines; ``#`` starts a comment."""
    out = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, val = line.partition("=")
        if not sep:
            raise ValueError(f"config line {lineno}: expected key=value, got {raw!r}")
        key, val = _ALIASES.get(key.strip(), key.strip()), val.strip()
        out[key] = _convert(key, val)
    return out


def _convert(key, val):
    if key in _FLOAT_KEYS:
        return float(val)
    if key in _INT_KEYS:
        return int(val)
    if key in _TUPLE_KEYS:
        return tuple(float(v) for v in val.split(","))
    if key == "allow_large_level":
        return val.lower() in ("1", "true", "yes")
    if key in {f.name for f in dataclasses.fields(ScenarioConfig)}:
        return val
    raise ValueError(f"unknown config key {key!r}")


def _median_time(fn, repeats):
    times, result = [], None
    for _ in range(repeats):
        t0 = time.perf_counter()
        result = fn()
        times.append(time.perf_counter() - t0)
    return statistics.median(times), result


def build_problem(cfg: ScenarioConfig):
    grid = tag_boundary(build_grid(cfg.level, cfg.Lx, cfg.Ly), tuple(cfg.catalytic_span))
    cat = catalytic_index(grid)
    return grid, cat


def run_scenario(cfg: ScenarioConfig, count_only: bool = False) -> SolveReport:
    """Run one scenario and collect timings, Newton counts and discrepancy.

    Offline time covers assembly, factorization and basis solves; online
    time covers the boundary Newton solve only; global time covers assembly
    and the coupled Newton solve. Each is the median over ``cfg.repeats``.
    """
    cfg.validate()
    grid, cat = build_problem(cfg)
    n_species = len(cfg.Y_in)
    report = SolveReport(cfg, N_global=n_species * grid.n_nodes, N_reduced=len(cat))
    report.catalytic_x = cat.coords[:, 0].copy()
    report.extra["catalytic_nodes"] = cat.nodes
    if count_only:
        return report

    velocity = hagen_poiseuille(cfg.v_in, cfg.Ly)
    model = make_model(cfg.model, cfg.k)

    try:
        if cfg.mode in ("reduced", "both"):

            def do_offline():
                op = assemble(grid, velocity, cfg.D, cfg.Y_in)
                return op, offline(op, grid, cat)

            report.t_offline_s, (op, basis) = _median_time(do_offline, cfg.repeats)
            if cfg.compress:
                basis = compress(basis, contiguous_groups(len(cat), cfg.compress))
            report.t_online_s, sol = _median_time(
                lambda: online(basis, model, ftol=cfg.ftol), cfg.repeats
            )
            report.iters_reduced = sol.newton_iters
            report.reduced_trace = sol.boundary_trace
            report.reduced_fields = reconstruct(op, basis, sol, model)
            report.extra["reduced_solution"] = sol

        if cfg.mode in ("global", "both"):

            def do_global():
                op = assemble(grid, velocity, cfg.D, cfg.Y_in)
                return global_solve(op, grid, cat, model, ftol=cfg.ftol)

            report.t_global_s, gsol = _median_time(do_global, cfg.repeats)
            report.iters_global = gsol.newton_iters
            report.global_fields = gsol.fields
            report.extra["global_solution"] = gsol
    except Exception as err:
        raise RuntimeError(
            f"scenario level={cfg.level} k={cfg.k:g} D={cfg.D:g} v_in={cfg.v_in:g} "
            f"mode={cfg.mode} failed: {err}"
        ) from err

    if cfg.mode == "both":
        report.max_diff = float(np.max(np.abs(report.reduced_fields - report.global_fields)))
    log.info("level %d k %g: %s", cfg.level, cfg.k, report.row())
    return report


def _write_rows(rows, columns, out):
    writer = csv.DictWriter(out, fieldnames=columns, lineterminator="\n")
    writer.writeheader()
    for row in rows:
        writer.writerow(row)


def _sweep(configs, out=None, count_only=False):
    rows = []
    fh = open(out, "w") if isinstance(out, str) else out
    try:
        writer = None
        if fh is not None:
            writer = csv.DictWriter(fh, fieldnames=SWEEP_COLUMNS, lineterminator="\n")
            writer.writeheader()
        for cfg in configs:
            row = run_scenario(cfg, count_only=count_only).row()
            rows.append(row)
            if writer is not None:
                writer.writerow(row)
                fh.flush()
    finally:
        if isinstance(out, str) and fh is not None:
            fh.close()
    return rows


def sweep_levels(cfg: ScenarioConfig, levels, out=None, count_only=False):
    """One row per level; rows already computed are written before an error propagates."""
    levels = list(levels)
    if not levels:
        raise ValueError("levels must not be empty")
    return _sweep((dataclasses.replace(cfg, level=lv) for lv in levels), out, count_only)


def sweep_k(cfg: ScenarioConfig, k_list, out=None):
    """One row per rate constant on the fixed mesh ``cfg.level``."""
    k_list = list(k_list)
    if not k_list:
        raise ValueError("k_list must not be empty")
    return _sweep((dataclasses.replace(cfg, k=float(k)) for k in k_list), out)


def export_boundary_profile(trace, x, out=None) -> str:
    """CSV of species values at catalytic collocation points ordered by x.

    ``trace`` has shape ``(3, m)``; ``x`` holds the m surface coordinates.
    Returns the CSV text and also writes it to ``out`` when given.
    """
    trace = np.asarray(trace, dtype=float)
    x = np.asarray(x, dtype=float)
    order = np.argsort(x, kind="stable")
    buf = io.StringIO()
    rows = [
        dict(zip(PROFILE_COLUMNS, (x[i], *trace[:, i]))) for i in order
    ]
    _write_rows(rows, PROFILE_COLUMNS, buf)
    text = buf.getvalue()
    if out is not None:
        with open(out, "w") as fh:
            fh.write(text)
    return text


def rows_to_csv(rows, columns=SWEEP_COLUMNS) -> str:
    buf = io.StringIO()
    _write_rows(rows, columns, buf)
    return buf.getvalue()


def _parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="key=value settings file")
    common.add_argument("--level", type=int)
    common.add_argument("--D", type=float)
    common.add_argument("--k", type=float)
    common.add_argument("--vin", dest="v_in", type=float)
    common.add_argument("--mode", choices=MODES)
    common.add_argument("--compress", type=int, help="number of basis groups (0 = off)")
    common.add_argument("--ftol", type=float)
    common.add_argument("--model")
    common.add_argument("--out", help="output CSV path (default: stdout)")
    common.add_argument("--repeats", type=int)
    common.add_argument("--allow-large-level", action="store_true", default=None)
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="reducedfv", description=__doc__.split("\n")[0])
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("run", parents=[common])
    sl = sub.add_parser("sweep-levels", parents=[common])
    sl.add_argument("--levels", default="0,1,2,3,4")
    sl.add_argument("--count-only", action="store_true")
    sk = sub.add_parser("sweep-k", parents=[common])
    sk.add_argument("--ks", default="1e2,1e4,1e6,1e8,1e10")
    sub.add_parser("profile", parents=[common])
    return p


def config_from_args(args) -> ScenarioConfig:
    settings = {}
    if args.config:
        with open(args.config) as fh:
            settings.update(parse_config(fh.read()))
    for name in ("level", "D", "k", "v_in", "mode", "compress", "ftol", "model", "out",
                 "repeats", "allow_large_level"):
        val = getattr(args, name, None)
        if val is not None:
            settings[name] = val
    return ScenarioConfig(**settings).validate()


def main(argv=None):
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING)
    cfg = config_from_args(args)
    out = cfg.out

    if args.command == "run":
        rows = [run_scenario(cfg).row()]
        text = rows_to_csv(rows)
    elif args.command == "sweep-levels":
        levels = [int(v) for v in args.levels.split(",")]
        rows = sweep_levels(cfg, levels, out=out, count_only=args.count_only)
        text = None if out else rows_to_csv(rows)
    elif args.command == "sweep-k":
        ks = [float(v) for v in args.ks.split(",")]
        rows = sweep_k(cfg, ks, out=out)
        text = None if out else rows_to_csv(rows)
    else:
        report = run_scenario(cfg)
        text = export_boundary_profile(report.profile(), report.catalytic_x)

    if text is not None:
        if out:
            with open(out, "w") as fh:
                fh.write(text)
        else:
            sys.stdout.write(text)
    return 0


if __name__ == "__main__":
    sys.exit(main())
