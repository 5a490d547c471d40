"""Command-line entry point: ``slasso fit | experiment | diagnose``.

Exit codes: 0 success, 1 usage or input error, 2 solver did not converge.
Indices in inputs and outputs are 0-based.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import jsonschema
import numpy as np

from . import __version__
from .io import CSVFormatError, read_matrix_csv, read_vector_csv, write_json
from .solver import PenaltyConfig, SolverSettings, fit
from .structure import StructureKind, build_structure, load_custom_csv

EXIT_OK, EXIT_INPUT, EXIT_NONCONVERGED = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


def parse_structure(text: str, X):
    """``lasso``, ``en``, ``slasso``, ``wfusion`` or ``custom:<path>``."""
    p = X.shape[1]
    if text.startswith("custom:"):
        S = load_custom_csv(text[len("custom:"):])
        if S.p != p:
            raise ValueError(f"custom J has {S.p} columns but X has {p}")
        return S
    try:
        kind = StructureKind(text)
    except ValueError:
        raise ValueError(f"unknown structure {text!r}; use lasso, en, slasso, wfusion or custom:<path>") from None
    if kind is StructureKind.CUSTOM:
        raise ValueError("custom structure needs a path: custom:<path>")
    return build_structure(kind, p, X=X)


def cmd_fit(args) -> int:
    X = read_matrix_csv(args.x)
    y = read_vector_csv(args.y)
    if y.shape[0] != X.shape[0]:
        raise ValueError(f"y has {y.shape[0]} values but X has {X.shape[0]} rows")
    S = parse_structure(args.structure, X)
    cfg = PenaltyConfig(args.lam, args.mu, S.kind)
    res = fit(X, y, cfg, S, SolverSettings(max_iter=args.max_iter, kkt_tol=args.tol))
    payload = {"lambda": cfg.lam, "mu": cfg.mu, "structure": S.kind.value}
    payload.update(res.to_dict())
    write_json(args.out, payload)
    if not res.converged:
        print(f"warning: not converged after {res.iterations} iterations "
              f"(KKT residual {res.kkt_residual:.3g} > {args.tol:g})", file=sys.stderr)
        return EXIT_NONCONVERGED
    return EXIT_OK


EXPERIMENT_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": ["spec", "methods", "tunings", "replications", "output"],
    "properties": {
        "spec": {
            "type": "object",
            "additionalProperties": False,
            "required": ["example", "sigma"],
            "properties": {
                "example": {"enum": ["A", "B", "C", "D", "PseudoReal1", "PseudoReal2"]},
                "p": {"type": "integer", "minimum": 1},
                "n": {"type": "integer", "minimum": 2},
                "sigma": {"type": "number", "exclusiveMinimum": 0},
                "rho": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
            },
        },
        "methods": {"type": "array", "minItems": 1, "uniqueItems": True,
                    "items": {"enum": ["Lasso", "SLasso", "ElasticNet", "FusedLasso"]}},
        "tunings": {"type": "array", "minItems": 1, "uniqueItems": True, "items": {"enum": ["Th", "Cv", "Est"]}},
        "replications": {"type": "integer", "minimum": 1},
        "grids": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "lambda_points": {"type": "integer", "minimum": 1},
                "lambda_ratio": {"type": "number", "exclusiveMinimum": 0, "maximum": 1},
                "mu_values": {"type": "array", "minItems": 1, "items": {"type": "number", "minimum": 0}},
            },
        },
        "folds": {"type": "integer", "minimum": 2},
        "seed": {"type": "integer", "minimum": 0},
        "noise": {"enum": ["gaussian", "student_t3"]},
        "timing": {"type": "boolean"},
        "output": {"type": "string", "minLength": 1},
        "summary": {"type": "string", "minLength": 1},
    },
}


def load_config(path) -> dict:
    try:
        cfg = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ValueError(f"{path}: invalid JSON at line {exc.lineno}: {exc.msg}") from None
    try:
        jsonschema.validate(cfg, EXPERIMENT_SCHEMA)
    except jsonschema.ValidationError as exc:
        where = "/".join(str(k) for k in exc.absolute_path) or "<root>"
        raise ValueError(f"{path}: config field {where}: {exc.message}") from None
    return cfg


def resolve_threads(arg) -> int:
    if arg is not None:
        return max(int(arg), 1)
    env = os.environ.get("SLASSO_THREADS")
    if env:
        try:
            return max(int(env), 1)
        except ValueError:
            raise ValueError(f"SLASSO_THREADS must be an integer, got {env!r}") from None
    return 1


def cmd_experiment(args) -> int:
    from .simulate import ExampleSpec, GridSpec, run_replications

    cfg = load_config(args.config)
    base = Path(args.config).resolve().parent
    seed = int(cfg.get("seed", 0))
    spec = ExampleSpec(seed=seed, **cfg["spec"])
    g = cfg.get("grids", {})
    grid = GridSpec(
        lambda_points=g.get("lambda_points", 50),
        lambda_ratio=g.get("lambda_ratio", 1e-3),
        mu_values=tuple(g["mu_values"]) if "mu_values" in g else None,
    )
    report = run_replications(
        spec, cfg["methods"], cfg["tunings"], cfg["replications"], seed,
        grid=grid, folds=cfg.get("folds", 10), timing=bool(args.timing or cfg.get("timing", False)),
        threads=resolve_threads(args.threads), noise=cfg.get("noise", "gaussian"),
    )
    out = base / cfg["output"]
    summary_path = base / cfg["summary"] if "summary" in cfg else out.with_suffix(".summary.json")
    report.write_csv(out)
    write_json(summary_path, report.summary())
    failed = sum(not r.converged for r in report.records)
    if failed:
        print(f"warning: {failed} fits did not converge (flagged in the CSV)", file=sys.stderr)
    return EXIT_OK


def cmd_diagnose(args) -> int:
    from .diagnostics import diagnose

    X = read_matrix_csv(args.x)
    S = parse_structure(args.structure, X)
    beta_star = read_vector_csv(args.beta_star) if args.beta_star else None
    if beta_star is not None and beta_star.shape[0] != X.shape[1]:
        raise ValueError(f"beta-star has {beta_star.shape[0]} values but X has {X.shape[1]} columns")
    astar = None
    if args.astar:
        try:
            astar = sorted({int(tok) for tok in args.astar.split(",") if tok.strip()})
        except ValueError:
            raise ValueError(f"--astar must be a comma-separated list of integers, got {args.astar!r}") from None
        if not astar or astar[0] < 0 or astar[-1] >= X.shape[1]:
            raise ValueError(f"--astar indices must lie in 0..{X.shape[1] - 1}")
    if args.mu < 0:
        raise ValueError("mu must be non-negative")
    report = diagnose(X, S, args.mu, beta_star=beta_star, Astar=astar, lambda_n=args.lam,
                      samples=args.samples, seed=args.seed)
    payload = report.to_dict()
    payload.update({"mu": args.mu, "structure": S.kind.value})
    write_json(args.out, payload)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="slasso", description="Quadratic-penalized Lasso fits, experiments and diagnostics.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    f = sub.add_parser("fit", help="fit one problem from CSV files")
    f.add_argument("--x", required=True, help="design matrix CSV (n rows, p columns)")
    f.add_argument("--y", required=True, help="response CSV, one value per line")
    f.add_argument("--structure", default="lasso", help="lasso, en, slasso, wfusion or custom:<path>")
    f.add_argument("--lambda", dest="lam", type=float, required=True)
    f.add_argument("--mu", type=float, default=0.0)
    f.add_argument("--tol", type=float, default=1e-8, help="KKT tolerance")
    f.add_argument("--max-iter", type=int, default=50000)
    f.add_argument("--out", required=True, help="output JSON path")
    f.set_defaults(func=cmd_fit)

    e = sub.add_parser("experiment", help="run a replicated simulation from a JSON config")
    e.add_argument("config")
    e.add_argument("--threads", type=int, default=None, help="worker threads (default: SLASSO_THREADS or 1)")
    e.add_argument("--timing", action="store_true", help="record wall-clock seconds per fit")
    e.set_defaults(func=cmd_experiment)

    d = sub.add_parser("diagnose", help="assumption diagnostics for a design")
    d.add_argument("--x", required=True)
    d.add_argument("--structure", default="lasso")
    d.add_argument("--mu", type=float, default=0.0)
    d.add_argument("--beta-star", default=None, help="true coefficients CSV; enables bounds")
    d.add_argument("--astar", default=None, help="comma-separated support indices")
    d.add_argument("--lambda", dest="lam", type=float, default=None, help="lambda for cone radius and bounds")
    d.add_argument("--samples", type=int, default=500, help="cone directions sampled")
    d.add_argument("--seed", type=int, default=0)
    d.add_argument("--out", required=True)
    d.set_defaults(func=cmd_diagnose)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_INPUT
    except (CSVFormatError, ValueError, OSError, jsonschema.ValidationError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
