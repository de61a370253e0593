"""Command-line front end.

Exit codes: 0 holds/consistent, 1 search found nothing, 2 input error,
3 inequality violated, 4 Monte-Carlo result suspicious.

Examples::

    costa-epi reproduce
    costa-epi check instance.json --json
    costa-epi gamma-path instance.json --gammas 0:0.95:0.05
    costa-epi search --n 2 --restarts 32 --iters 2000 --seed 42 --out found.json
    costa-epi mc --mixture x.json --sigma-z sz.json --a a.json --m 100000
"""
from __future__ import annotations

import argparse
import csv
import io as _stdio
import logging
import os
import sys
import warnings

import numpy as np

from . import io
from .epi import (
    costa_check,
    counterexample_instance,
    gamma_diagnostic,
    gamma_path,
    splitting_identity_residual,
    theorem1_check,
)
from .errors import EpiError
from .gaussian import TWO_PI_E
from .matcore import DEFAULT_TOL
from .mc_entropy import DEFAULT_K, mc_theorem1_check
from .search import SearchConfig, search_counterexample

EXIT_OK = 0
EXIT_NOT_FOUND = 1
EXIT_INPUT = 2
EXIT_VIOLATED = 3
EXIT_SUSPICIOUS = 4

CE_LHS = (19.52, 19.54)
CE_RHS = (40.27, 40.29)
CE_EIGS = (-0.7273, -0.0053)
CE_EIG_TOL = 5e-4

log = logging.getLogger("costa_epi")


def _default_tol():
    env = os.environ.get("COSTA_EPI_TOL")
    return float(env) if env else DEFAULT_TOL


def _default_threads():
    env = os.environ.get("COSTA_EPI_THREADS")
    return int(env) if env else 1


def _emit(report: dict, args, table: list[tuple[str, object]]):
    if getattr(args, "json", False):
        print(io.dumps(report))
        return
    if getattr(args, "csv", False):
        buf = _stdio.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["field", "value"])
        for key, value in table:
            writer.writerow([key, _fmt(value)])
        print(buf.getvalue(), end="")
        return
    width = max(len(k) for k, _ in table)
    for key, value in table:
        print(f"{key:<{width}}  {_fmt(value)}")


def _fmt(value):
    if isinstance(value, float):
        return format(value, ".10g")
    if isinstance(value, (list, tuple, np.ndarray)):
        return "[" + ", ".join(_fmt(float(v)) if isinstance(v, (float, np.floating)) else str(v) for v in value) + "]"
    return str(value)


def cmd_reproduce(args) -> int:
    inst = counterexample_instance()
    rep = costa_check(inst, args.tol)
    commuting = inst.is_commuting(args.tol)
    _, residual = splitting_identity_residual(inst.a, inst.sigma_z)
    diag = gamma_diagnostic(inst, 0.5, args.tol)
    lhs, rhs = rep.lhs / TWO_PI_E, rep.rhs / TWO_PI_E
    eigs = np.sort(diag.eigenvalues_real)
    checks = {
        "lhs_matches": CE_LHS[0] <= lhs <= CE_LHS[1],
        "rhs_matches": CE_RHS[0] <= rhs <= CE_RHS[1],
        "violated": rep.violated,
        "not_commuting": not commuting,
        "splitting_identity_fails": residual > 0.1,
        "gamma_eigenvalues_match": bool(
            not diag.has_complex and np.all(np.abs(eigs - np.array(CE_EIGS)) <= CE_EIG_TOL)
        ),
        "amgm_fails": not diag.amgm_holds,
    }
    ok = all(checks.values())
    result = {
        "instance": io.instance_to_dict(inst),
        "report": rep.to_dict(),
        "lhs_over_2pie": lhs,
        "rhs_over_2pie": rhs,
        "commutes": commuting,
        "splitting_residual_norm": residual,
        "gamma_half": diag.to_dict(),
        "checks": checks,
        "all_match": ok,
    }
    report = io.make_report("reproduce", result, io.instance_to_dict(inst))
    _emit(
        report,
        args,
        [
            ("lhs / (2 pi e)", lhs),
            ("rhs / (2 pi e)", rhs),
            ("gap", rep.gap),
            ("violated", rep.violated),
            ("A commutes with sigma_z", commuting),
            ("splitting residual (max abs)", residual),
            ("gamma=0.5 eigenvalues", eigs),
            ("gamma=0.5 AM-GM holds", diag.amgm_holds),
            ("matches reported values", ok),
        ],
    )
    return EXIT_OK if ok else EXIT_VIOLATED


def _instance_arg(args):
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", io.AsymmetryWarning)
        inst = io.load_instance(args.path, args.tol)
    for w in caught:
        log.warning("%s", w.message)
    return inst


def cmd_check(args) -> int:
    inst = _instance_arg(args)
    commuting = inst.is_commuting(args.tol)
    rep = theorem1_check(inst, args.tol) if commuting else costa_check(inst, args.tol)
    note = (
        "A commutes with sigma_z: the inequality is guaranteed on this instance"
        if commuting
        else "A does not commute with sigma_z: the inequality may fail"
    )
    result = {
        "instance": io.instance_to_dict(inst),
        "report": rep.to_dict(),
        "relative_gap": rep.gap / rep.scale,
        "commutes": commuting,
        "theorem1_applies": commuting,
        "note": note,
        "tol": args.tol,
    }
    report = io.make_report("check", result, io.instance_to_dict(inst))
    _emit(
        report,
        args,
        [
            ("label", inst.label or ""),
            ("n", inst.n),
            ("lhs", rep.lhs),
            ("rhs", rep.rhs),
            ("gap", rep.gap),
            ("relative gap", rep.gap / rep.scale),
            ("violated", rep.violated),
            ("commutes", commuting),
            ("note", note),
        ],
    )
    return EXIT_VIOLATED if rep.violated else EXIT_OK


def parse_gammas(text: str) -> list[float]:
    """``start:stop:step`` (stop inclusive) or a comma-separated list."""
    text = text.strip()
    if ":" in text:
        parts = text.split(":")
        if len(parts) != 3:
            raise ValueError(f"bad gamma range {text!r}; expected start:stop:step")
        start, stop, step = (float(p) for p in parts)
        if step <= 0:
            raise ValueError("gamma step must be positive")
        count = int(np.floor((stop - start) / step + 1e-9)) + 1
        return [round(start + i * step, 12) for i in range(max(count, 0))]
    return [float(p) for p in text.split(",") if p.strip()]


def cmd_gamma_path(args) -> int:
    inst = _instance_arg(args)
    try:
        gammas = parse_gammas(args.gammas)
    except ValueError as exc:
        raise EpiError(str(exc)) from exc
    rows = gamma_path(inst, gammas, args.tol)
    result = {"instance": io.instance_to_dict(inst), "rows": [r.to_dict() for r in rows]}
    report = io.make_report("gamma-path", result, {"instance": io.instance_to_dict(inst), "gammas": gammas})
    if args.json:
        print(io.dumps(report))
        return EXIT_OK
    print(f"{'gamma':>8}  {'eigenvalues':<36}  {'det side':>12}  {'trace side':>12}  amgm   k_psd")
    for r in rows:
        eig = ", ".join(format(float(e), ".6g") for e in r.eigenvalues_real)
        if r.has_complex:
            eig += " (complex)"
        det = "undefined" if r.det_side is None else format(r.det_side, ".6g")
        print(f"{r.gamma:>8.4g}  {eig:<36}  {det:>12}  {r.trace_side:>12.6g}  {str(r.amgm_holds):<5}  {r.k_psd}")
    return EXIT_OK


def cmd_search(args) -> int:
    try:
        cfg = SearchConfig(
            n=args.n,
            restarts=args.restarts,
            iterations=args.iters,
            seed=args.seed,
            step_scale=args.step_scale,
            eig_range=(args.eig_lo, args.eig_hi),
            objective_tol=args.tol,
            commuting=args.commuting_only,
        )
    except ValueError as exc:
        raise EpiError(f"invalid search configuration: {exc}") from exc
    threads = args.threads if args.threads is not None else _default_threads()
    trace = search_counterexample(cfg, workers=threads)
    inst = trace.best_instance
    if trace.found and args.out:
        labelled = type(inst)(inst.sigma_x, inst.sigma_z, inst.a, label=f"search n={cfg.n} seed={cfg.seed}")
        io.save_instance(args.out, labelled)
    result = {
        "config": {
            "n": cfg.n,
            "restarts": cfg.restarts,
            "iterations": cfg.iterations,
            "seed": cfg.seed,
            "step_scale": cfg.step_scale,
            "eig_range": list(cfg.eig_range),
            "commuting_only": cfg.commuting,
        },
        "trace": trace.to_dict(),
        "instance": io.instance_to_dict(inst),
    }
    report = io.make_report("search", result, result["config"], seed=cfg.seed)
    _emit(
        report,
        args,
        [
            ("n", cfg.n),
            ("seed", cfg.seed),
            ("evaluations", trace.evaluations),
            ("best restart", trace.best_restart),
            ("best gap", trace.best_gap),
            ("best relative gap", trace.best_gap / trace.best_report.scale),
            ("violation found", trace.found),
            ("written to", args.out if trace.found and args.out else "-"),
        ],
    )
    return EXIT_OK if trace.found else EXIT_NOT_FOUND


def cmd_mc(args) -> int:
    spec = io.load_mixture(args.mixture)
    sz = io.load_matrix(args.sigma_z, "sigma_z")
    a = io.load_matrix(args.a, "a")
    rep = mc_theorem1_check(spec, sz, a, m=args.m, k=args.k, seed=args.seed, tol=args.tol)
    inputs = {"mixture": spec.to_dict(), "sigma_z": sz, "a": a, "m": args.m, "k": args.k}
    report = io.make_report("mc", {"report": rep.to_dict()}, inputs, seed=args.seed)
    _emit(
        report,
        args,
        [
            ("lhs estimate", rep.lhs_estimate),
            ("lhs std error", rep.se_lhs),
            ("rhs estimate", rep.rhs_estimate),
            ("rhs std error", rep.se_rhs),
            ("samples per term", rep.samples),
            ("k", rep.k),
            ("seed", rep.seed),
            ("conclusion", rep.conclusion),
        ],
    )
    return EXIT_SUSPICIOUS if rep.conclusion == "suspicious" else EXIT_OK


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INPUT, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="costa-epi", description=__doc__.split("\n\n")[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(p, csv_flag=False):
        p.add_argument("--tol", type=float, default=None, help="relative tolerance (env COSTA_EPI_TOL)")
        p.add_argument("--json", action="store_true", help="print the JSON report")
        if csv_flag:
            p.add_argument("--csv", action="store_true", help="print field,value rows")

    p = sub.add_parser("reproduce", help="reproduce the two-dimensional counterexample")
    common(p)
    p.set_defaults(func=cmd_reproduce)

    p = sub.add_parser("check", help="evaluate the inequality on an instance file")
    p.add_argument("path")
    common(p, csv_flag=True)
    p.set_defaults(func=cmd_check)

    p = sub.add_parser("gamma-path", help="AM-GM diagnostic along the perturbation path")
    p.add_argument("path")
    p.add_argument("--gammas", default="0:0.95:0.05", help="start:stop:step or comma list, within [0, 1)")
    common(p)
    p.set_defaults(func=cmd_gamma_path)

    p = sub.add_parser("search", help="search for violating instances")
    p.add_argument("--n", type=int, default=2)
    p.add_argument("--restarts", type=int, default=32)
    p.add_argument("--iters", type=int, default=2000)
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--step-scale", type=float, default=0.5)
    p.add_argument("--eig-lo", type=float, default=1e-2)
    p.add_argument("--eig-hi", type=float, default=1e3)
    p.add_argument("--commuting-only", action="store_true")
    p.add_argument("--threads", type=int, default=None, help="worker processes (env COSTA_EPI_THREADS)")
    p.add_argument("--out", help="write the best violating instance here")
    common(p, csv_flag=True)
    p.set_defaults(func=cmd_search)

    p = sub.add_parser("mc", help="Monte-Carlo check for a Gaussian-mixture X")
    p.add_argument("--mixture", required=True)
    p.add_argument("--sigma-z", required=True)
    p.add_argument("--a", required=True)
    p.add_argument("--m", type=int, default=100_000)
    p.add_argument("--k", type=int, default=DEFAULT_K)
    p.add_argument("--seed", type=int, default=0)
    common(p, csv_flag=True)
    p.set_defaults(func=cmd_mc)
    return parser


def main(argv=None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s: %(message)s")
    args = build_parser().parse_args(argv)
    if args.tol is None:
        args.tol = _default_tol()
    try:
        return args.func(args)
    except (EpiError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    raise SystemExit(main())
