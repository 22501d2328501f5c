"""Command line interface: ``rpcadpd fit|diagnose|verify|select-alpha|simulate``.

Exit codes: 0 success, 2 I/O error, 3 parse error, 4 configuration error.
"""
from __future__ import annotations

import argparse
import csv
import json
import sys

import numpy as np

from .core import Spectrum
from .diagnostics import diagnose
from .errors import RpcaError
from .location import KINDS, LocationEstimator
from .rpca import DEFAULT_ALPHA_GRID, DEFAULT_DELTA, PcaFit, fit_auto_rank, fit_rpcadpd, select_alpha
from .rsvddpd import DpdConfig
from .simulate import SCENARIOS, ScenarioSpec, metrics_csv, parse_method, run_replications

EXIT_IO, EXIT_PARSE, EXIT_CONFIG = 2, 3, 4
DIGITS = 17


class CliError(Exception):
    def __init__(self, code: int, message: str):
        super().__init__(message)
        self.code = code


def _num(x) -> float:
    # json writes floats with repr: the shortest string that reads back to the same float64
    return float(x)


def read_matrix(path: str, header: bool = False, delimiter: str = ",") -> np.ndarray:
    try:
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh, delimiter=delimiter))
    except OSError as exc:
        raise CliError(EXIT_IO, f"cannot read {path}: {exc.strerror or exc}") from None
    if header and rows:
        rows = rows[1:]
    rows = [r for r in rows if any(c.strip() for c in r)]
    if not rows:
        raise CliError(EXIT_PARSE, f"{path}: no data rows")
    width = len(rows[0])
    out = np.empty((len(rows), width))
    first = 2 if header else 1
    for i, row in enumerate(rows):
        if len(row) != width:
            raise CliError(EXIT_PARSE, f"{path}: row {i + first} has {len(row)} fields, expected {width}")
        for j, cell in enumerate(row):
            try:
                v = float(cell)
            except ValueError:
                v = float("nan")
            if not np.isfinite(v):
                raise CliError(EXIT_PARSE, f"{path}: row {i + first}, column {j + 1}: "
                                           f"not a finite number: {cell!r}")
            out[i, j] = v
    return out


def _write(text: str, path: str | None):
    if not text.endswith("\n"):
        text += "\n"
    if path in (None, "-"):
        sys.stdout.write(text)
        return
    try:
        with open(path, "w", newline="") as fh:
            fh.write(text)
    except OSError as exc:
        raise CliError(EXIT_IO, f"cannot write {path}: {exc.strerror or exc}") from None


def _parse_rank(raw: str):
    if raw in ("auto", "full"):
        return raw
    try:
        r = int(raw)
    except ValueError:
        raise CliError(EXIT_CONFIG, f"--rank must be an integer, 'full' or 'auto', got {raw!r}") from None
    if r < 1:
        raise CliError(EXIT_CONFIG, "--rank must be at least 1")
    return r


def _parse_floats(raw: str, flag: str) -> list:
    try:
        return [float(t) for t in raw.split(",") if t.strip()]
    except ValueError:
        raise CliError(EXIT_CONFIG, f"{flag}: expected comma separated numbers, got {raw!r}") from None


def _loc(args) -> LocationEstimator:
    return LocationEstimator(kind=args.location, alpha=args.location_alpha)


def _cfg(args) -> DpdConfig:
    return DpdConfig(tol=args.tol, max_iter=args.max_iter, restarts=args.restarts, seed=args.seed)


def _fit(args, X) -> PcaFit:
    rank = _parse_rank(args.rank)
    if rank == "auto":
        return fit_auto_rank(X, args.alpha, args.delta, _loc(args), _cfg(args))
    return fit_rpcadpd(X, args.alpha, None if rank == "full" else rank, _loc(args), _cfg(args))


def fit_document(fit: PcaFit) -> dict:
    return {
        "center": [_num(x) for x in fit.center],
        "eigenvalues": [_num(x) for x in fit.eigenvalues],
        "eigenvectors": [[_num(x) for x in col] for col in fit.vectors.T],
        "alpha": _num(fit.alpha_used),
        "rank": int(fit.rank_used),
        "sigma2": _num(fit.sigma2),
        "converged": bool(fit.converged),
        "iterations": int(fit.iterations),
        "objective": _num(fit.objective),
    }


def fit_from_document(doc: dict) -> PcaFit:
    try:
        center = np.asarray(doc["center"], dtype=np.float64)
        gamma = np.asarray(doc["eigenvalues"], dtype=np.float64)
        V = np.asarray(doc["eigenvectors"], dtype=np.float64).reshape(len(gamma), -1).T
        return PcaFit(center=center, spectrum=Spectrum(gamma, V), alpha_used=float(doc.get("alpha", 0.0)),
                      rank_used=len(gamma), sigma2=float(doc.get("sigma2", 0.0)),
                      converged=bool(doc.get("converged", True)),
                      objective_trace=np.array([float(doc.get("objective", 0.0))]))
    except (KeyError, TypeError, ValueError) as exc:
        raise CliError(EXIT_PARSE, f"malformed fit document: {exc}") from None


def _dump(doc) -> str:
    return json.dumps(doc, indent=2, allow_nan=False) + "\n"


def cmd_fit(args) -> int:
    X = read_matrix(args.input, args.header, args.delimiter)
    _write(_dump(fit_document(_fit(args, X))), args.output)
    return 0


def _diagnostic_outputs(args, X, fit):
    rep = diagnose(X, fit, args.quantile)
    _write(rep.to_csv(DIGITS), args.output)
    sidecar = args.sidecar or (args.output + ".json" if args.output not in (None, "-") else None)
    if sidecar:
        doc = dict(rep.summary(), fit=fit_document(fit))
        _write(_dump(doc), sidecar)


def cmd_diagnose(args) -> int:
    X = read_matrix(args.input, args.header, args.delimiter)
    _diagnostic_outputs(args, X, _fit(args, X))
    return 0


def cmd_verify(args) -> int:
    """Recompute diagnostics from a saved fit document instead of refitting."""
    X = read_matrix(args.input, args.header, args.delimiter)
    try:
        with open(args.fit) as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise CliError(EXIT_IO, f"cannot read {args.fit}: {exc.strerror or exc}") from None
    except json.JSONDecodeError as exc:
        raise CliError(EXIT_PARSE, f"{args.fit}: invalid JSON: {exc}") from None
    _diagnostic_outputs(args, X, fit_from_document(doc))
    return 0


def cmd_select_alpha(args) -> int:
    X = read_matrix(args.input, args.header, args.delimiter)
    rank = _parse_rank(args.rank)
    if rank == "auto":
        raise CliError(EXIT_CONFIG, "select-alpha needs an explicit rank or 'full'")
    grid = _parse_floats(args.grid, "--grid") if args.grid else list(DEFAULT_ALPHA_GRID)
    sel = select_alpha(X, None if rank == "full" else rank, grid, _loc(args), _cfg(args))
    doc = {"grid": [_num(a) for a in sel.grid],
           "criterion": [_num(v) for v in sel.criterion_values],
           "sigma2": [_num(v) for v in sel.sigma2],
           "chosen_alpha": _num(sel.chosen_alpha)}
    _write(_dump(doc), args.output)
    return 0


def cmd_simulate(args) -> int:
    ids = [s.strip() for s in args.scenario.split(",") if s.strip()]
    bad = [s for s in ids if s not in SCENARIOS]
    if bad or not ids:
        raise CliError(EXIT_CONFIG, f"unknown scenario {','.join(bad) or args.scenario!r}; "
                                    f"valid ids: {', '.join(SCENARIOS)}")
    ps = [int(v) for v in _parse_floats(args.p, "--p")]
    methods = [parse_method(m) for m in args.methods.split(",") if m.strip()]
    rank = _parse_rank(args.rank)
    if rank == "auto":
        raise CliError(EXIT_CONFIG, "simulate needs an explicit rank or 'full'")
    rows = []
    for sid in ids:
        for p in ps:
            spec = ScenarioSpec.from_id(sid, args.n, p)
            r = None if rank == "full" else rank
            rows += run_replications(spec, methods, r, args.B, args.seed, loc=_loc(args), cfg=_cfg(args))
    _write(metrics_csv(rows), args.output)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="rpcadpd", description="Robust PCA with the DPD loss.")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, data=True):
        if data:
            p.add_argument("input", help="CSV file, rows = observations")
            p.add_argument("--header", action="store_true", help="skip the first line")
            p.add_argument("--delimiter", default=",")
        p.add_argument("-o", "--output", default=None, help="output path (default stdout)")
        p.add_argument("--location", choices=sorted(KINDS), default="l1")
        p.add_argument("--location-alpha", type=float, default=0.5,
                       help="alpha of the coordinatewise MDPDE location")
        p.add_argument("--tol", type=float, default=1e-9)
        p.add_argument("--max-iter", type=int, default=100)
        p.add_argument("--restarts", type=int, default=0)
        p.add_argument("--seed", type=int, default=0)

    def fitting(p):
        p.add_argument("--alpha", type=float, default=0.5)
        p.add_argument("--rank", default="full", help="integer, 'full' or 'auto'")
        p.add_argument("--delta", type=float, default=DEFAULT_DELTA)

    p = sub.add_parser("fit", help="fit rPCAdpd and print JSON")
    common(p)
    fitting(p)
    p.set_defaults(func=cmd_fit)

    for name, func, helptext in (("diagnose", cmd_diagnose, "fit and emit score/orthogonal distances"),
                                 ("verify", cmd_verify, "distances from a saved fit JSON")):
        p = sub.add_parser(name, help=helptext)
        common(p)
        if name == "verify":
            p.add_argument("fit", help="JSON written by 'fit'")
        else:
            fitting(p)
        p.add_argument("--quantile", type=float, default=0.975)
        p.add_argument("--sidecar", default=None, help="JSON path for cutoffs and fit summary")
        p.set_defaults(func=func)

    p = sub.add_parser("select-alpha", help="choose alpha by the conditional MSE criterion")
    common(p)
    p.add_argument("--rank", required=True, help="integer or 'full'")
    p.add_argument("--grid", default=None, help="comma separated alphas, must include 1")
    p.set_defaults(func=cmd_select_alpha)

    p = sub.add_parser("simulate", help="Monte Carlo metrics as CSV")
    common(p, data=False)
    p.add_argument("--scenario", required=True, help=f"comma separated ids: {','.join(SCENARIOS)}")
    p.add_argument("--p", default="10", help="comma separated dimensions")
    p.add_argument("--n", type=int, default=50)
    p.add_argument("--B", type=int, default=100)
    p.add_argument("--rank", default="full")
    p.add_argument("--methods", default="classical,dpd:0.5")
    p.set_defaults(func=cmd_simulate)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else 0
    try:
        return args.func(args)
    except CliError as exc:
        print(f"rpcadpd: {exc}", file=sys.stderr)
        return exc.code
    except (RpcaError, ValueError) as exc:
        print(f"rpcadpd: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
