"""Command-line front end: ``hermprod {sample,density,kernel,moments,verify}``.

Exit codes: 0 success, 1 a verification check failed, 2 invalid
configuration, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from typing import Optional, Sequence

import numpy as np

from . import biortho_kernel as bk
from . import ensemble_density as ed
from . import global_density as gd
from . import hard_edge as he
from .errors import HermprodError, NumericalError
from .harness import (
    SUITES,
    ConfigError,
    GridSpec,
    RunConfig,
    SuiteReport,
    run_suite,
    sample_product_spectra,
)
from .sampling import EnsembleParams

__all__ = ["build_parser", "config_from_args", "run", "main"]

EXIT_OK, EXIT_CHECK, EXIT_CONFIG, EXIT_NUMERIC = 0, 1, 2, 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(message)


def _parse_nu(text: str) -> tuple:
    text = text.strip()
    if not text:
        return ()
    try:
        return tuple(int(v) for v in text.split(","))
    except ValueError as exc:
        raise ConfigError(f"--nu expects a comma list of integers, got {text!r}") from exc


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--config", help="JSON file with RunConfig fields; flags override it")
    common.add_argument("--M", type=int, dest="depth", help="product depth M")
    common.add_argument("--n", type=int, dest="base_dim", help="base dimension n")
    common.add_argument("--nu", help="comma list nu_1,..,nu_M")
    common.add_argument("--seed", type=int, help="master seed (required for stochastic runs)")
    common.add_argument("--repeats", type=int, help="number of Monte Carlo draws")
    common.add_argument("--grid-min", type=float)
    common.add_argument("--grid-max", type=float)
    common.add_argument("--grid-points", type=int)
    common.add_argument("--route", help="kernel route or hard-edge representation")
    common.add_argument("--format", dest="output_format", choices=("csv", "json"))
    common.add_argument("--out", dest="output_path", help="output file (default stdout)")
    common.add_argument("--workers", type=int, help="threads for Monte Carlo blocks")

    parser = _Parser(prog="hermprod", description="Hermitised random matrix product toolkit")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    sub.add_parser("sample", parents=[common], help="sample nonzero eigenvalues")
    dens = sub.add_parser("density", parents=[common], help="analytic density curves")
    dens.add_argument("--kind", choices=("global", "fc", "mb"),
                      help="global two-sided law, one-sided Fuss-Catalan, or MB weight")
    ker = sub.add_parser("kernel", parents=[common], help="finite-n or hard-edge kernel on a grid")
    ker.add_argument("--y", type=float, help="fixed second argument (default: full grid)")
    mom = sub.add_parser("moments", parents=[common], help="Fuss-Catalan numbers")
    mom.add_argument("--fc", type=int, help="Fuss-Catalan parameter p")
    mom.add_argument("--k", type=int, help="largest moment index")
    ver = sub.add_parser("verify", parents=[common], help="run a verification suite")
    ver.add_argument("suite", choices=SUITES)
    return parser


def _load_json(path: str) -> dict:
    try:
        with open(path) as fh:
            data = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path!r}: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError("config file must hold a JSON object")
    return data


def config_from_args(argv: Optional[Sequence[str]] = None) -> RunConfig:
    """Parse ``argv`` (and an optional JSON file) into a validated :class:`RunConfig`."""
    args = build_parser().parse_args(argv)
    base = _load_json(args.config) if args.config else {}
    params_d = dict(base.get("params", {}))
    grid_d = dict(base.get("grid") or {})
    if args.depth is not None:
        params_d["depth"] = args.depth
    if args.base_dim is not None:
        params_d["base_dim"] = args.base_dim
    if args.nu is not None:
        params_d["nu"] = _parse_nu(args.nu)
    depth = int(params_d.get("depth", 0))
    nu = tuple(params_d.get("nu", (0,) * depth))
    try:
        params = EnsembleParams(depth, int(params_d.get("base_dim", 2)), nu)
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc
    for key, flag in (("min", "grid_min"), ("max", "grid_max"), ("points", "grid_points")):
        if getattr(args, flag) is not None:
            grid_d[key] = getattr(args, flag)
    grid = None
    if grid_d:
        try:
            grid = GridSpec(float(grid_d["min"]), float(grid_d["max"]), int(grid_d["points"]))
        except KeyError as exc:
            raise ConfigError("grid needs --grid-min, --grid-max and --grid-points") from exc

    def pick(name, default=None):
        val = getattr(args, name, None)
        return val if val is not None else base.get(name, default)

    cfg = RunConfig(
        command=args.command,
        params=params,
        seed=pick("seed"),
        repeats=int(pick("repeats", 1)),
        grid=grid,
        output_path=pick("output_path"),
        output_format=pick("output_format", "csv"),
        route=pick("route"),
        suite=getattr(args, "suite", None) or base.get("suite"),
        kind=pick("kind", "global"),
        fc=pick("fc"),
        k=pick("k"),
        y=pick("y"),
        workers=int(pick("workers", 1)),
    )
    return cfg.validate()


# ---------------------------------------------------------------------------
# commands returning tables: (columns, rows)


def _grid(cfg: RunConfig, default: GridSpec) -> np.ndarray:
    return (cfg.grid or default).values()


def _cmd_sample(cfg: RunConfig):
    eigs = sample_product_spectra(cfg.params, cfg.seed, cfg.repeats, cfg.workers)
    rows = [(i, r + 1, float(v)) for i, row in enumerate(eigs) for r, v in enumerate(row)]
    return ["sample_index", "eigenvalue_rank", "value"], rows


def _cmd_density(cfg: RunConfig):
    M = cfg.params.depth
    cols = ["x", "density_analytic", "density_empirical", "stderr"]
    if cfg.kind == "mb":
        alpha = ed.mb_exponent(cfg.params)
        x = _grid(cfg, GridSpec(-3.0, 3.0, 61))
        return cols, [(float(v), ed.mb_density_unnormalized(alpha, M, [v]), None, None) for v in x]
    if cfg.kind == "fc":
        p = 2 * M + 1
        edge = (p + 1) ** (p + 1) / p ** p
        t = _grid(cfg, GridSpec(edge / 200, edge * 0.995, 100))
        if np.any(t <= 0):
            raise ConfigError("the one-sided Fuss-Catalan density needs a positive grid")
        dens = [gd.global_density_parametric(M, math.sqrt(v)) / math.sqrt(v) for v in t]
        return cols, [(float(v), d, None, None) for v, d in zip(t, dens)]
    edge = gd.support_edge(M)
    x = _grid(cfg, GridSpec(-edge, edge, 81))
    # the origin is a singularity; drop it even when linspace lands a rounding error away
    x = x[np.abs(x) > 1e-12 * edge]
    analytic = gd.global_density_parametric(M, x)
    emp = err = [None] * len(x)
    if cfg.seed is not None:
        scaled = gd.global_scaling_map(
            cfg.params, sample_product_spectra(cfg.params, cfg.seed, cfg.repeats, cfg.workers))
        mids = 0.5 * (x[1:] + x[:-1])
        edges = np.concatenate([[x[0] - (mids[0] - x[0])], mids, [x[-1] + (x[-1] - mids[-1])]])
        per = np.array([np.histogram(row, edges)[0] / (np.diff(edges) * row.size)
                        for row in scaled])
        emp = per.mean(axis=0)
        err = per.std(axis=0, ddof=1) / math.sqrt(len(per)) if len(per) > 1 else [None] * len(x)
    return cols, [(float(v), float(a), e if e is None else float(e), s if s is None else float(s))
                  for v, a, e, s in zip(x, analytic, emp, err)]


def _cmd_kernel(cfg: RunConfig):
    route = cfg.route or "sum"
    x = _grid(cfg, GridSpec(-1.5, 1.5, 7))
    ys = [cfg.y] if cfg.y is not None else list(x)
    rows = []
    if route in he.HARD_EDGE_REPRESENTATIONS:
        for xv in x:
            for yv in ys:
                if xv == 0 or yv == 0:
                    continue
                k = he.hard_kernel(he.HardEdgeQuery(float(xv), float(yv), cfg.params, route))
                rows.append((k.x, k.y, k.even, k.odd, k.total))
    elif route in bk.KERNEL_ROUTES:
        n = cfg.params.base_dim
        if n % 2:
            raise ConfigError("the finite-n kernel needs an even --n")
        for xv in x:
            for yv in ys:
                k = bk.kernel_finite(n, cfg.params, float(xv), float(yv), route)
                rows.append((k.x, k.y, k.even, k.odd, k.total))
    else:
        raise ConfigError(f"unknown route {route!r}")
    return ["x", "y", "even", "odd", "total"], rows


def _cmd_moments(cfg: RunConfig):
    rows = []
    for k in range(cfg.k + 1):
        m = gd.fuss_catalan_moment(cfg.fc, k)
        rows.append((k, str(m)))
    return ["k", "moment"], rows


_COMMANDS = {"sample": _cmd_sample, "density": _cmd_density, "kernel": _cmd_kernel,
             "moments": _cmd_moments}


def run(cfg: RunConfig):
    """Execute ``cfg``: a :class:`SuiteReport` for ``verify``, else ``(columns, rows)``."""
    cfg.validate()
    if cfg.command == "verify":
        return run_suite(cfg)
    return _COMMANDS[cfg.command](cfg)


# ---------------------------------------------------------------------------
# output


def _render_table(columns, rows, fmt: str, cfg: RunConfig) -> str:
    if fmt == "json":
        return json.dumps({"config": cfg.to_dict(), "columns": columns,
                           "rows": [list(r) for r in rows]}, indent=1) + "\n"
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow(["" if v is None else (repr(v) if isinstance(v, float) else v) for v in r])
    return buf.getvalue()


def _render_report(report: SuiteReport, fmt: str) -> str:
    if fmt == "json":
        return json.dumps(report.to_dict(), indent=1) + "\n"
    return "\n".join(report.lines()) + "\n"


def _write(text: str, path: Optional[str]):
    if path:
        with open(path, "w") as fh:
            fh.write(text)
    else:
        try:
            sys.stdout.write(text)
            sys.stdout.flush()
        except BrokenPipeError:
            # downstream reader closed early (e.g. `| head`); silence the shutdown flush
            import os
            os.dup2(os.open(os.devnull, os.O_WRONLY), sys.stdout.fileno())


def main(argv: Optional[Sequence[str]] = None) -> int:
    try:
        cfg = config_from_args(argv)
    except ConfigError as exc:
        print(f"hermprod: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        result = run(cfg)
    except ConfigError as exc:
        print(f"hermprod: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (NumericalError, FloatingPointError) as exc:
        print(f"hermprod: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (HermprodError, ValueError) as exc:
        print(f"hermprod: invalid input: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if isinstance(result, SuiteReport):
        _write(_render_report(result, cfg.output_format), cfg.output_path)
        if cfg.output_path:
            print("\n".join(result.lines()), file=sys.stderr)
        return EXIT_OK if result.passed else EXIT_CHECK
    columns, rows = result
    _write(_render_table(columns, rows, cfg.output_format, cfg), cfg.output_path)
    return EXIT_OK


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
