"""Command-line entry point.

    qtomo state-tomo --d 2 --povm pauli6 --shots 10000 --trials 100 --seed 7 --out run.json
    qtomo optimal-tester --kind unital --d 2
    qtomo validate --comb comb.json

Exit codes: 0 success, 1 validation failure, 2 usage error.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import combs, frames, harness, optimal

KINDS = [k.value for k in optimal.SubspaceKind]


class UsageError(Exception):
    pass


def _add_experiment_flags(p: argparse.ArgumentParser, task: str) -> None:
    p.add_argument("--config", type=Path, help="JSON file mirroring ExperimentConfig; flags override it")
    p.add_argument("--d", type=int)
    p.add_argument("--shots", type=int, help="shots per trial; 0 selects exact probabilities")
    p.add_argument("--trials", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--model")
    p.add_argument("--dual", choices=["canonical", "optimal", "maxlik"])
    p.add_argument("--out", help="write the record (JSON plus CSV sidecar) here")
    p.add_argument("--json", action="store_true", help="print machine-readable JSON")
    if task in ("state", "povm"):
        p.add_argument("--povm", help="pauli6 | covariant | standard | file:PATH")
    if task == "state":
        p.add_argument("--prior", choices=["uniform", "skewed"])
        p.add_argument("--noise", type=float, help="depolarizing parameter of the detector")
    if task == "process":
        p.add_argument("--kind", choices=KINDS[:3])
        p.add_argument("--design", choices=["clifford", "haar"])
    p.set_defaults(task=task)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="qtomo", description="Tomography simulations and optimal setups.")
    sub = parser.add_subparsers(dest="command", required=True)
    _add_experiment_flags(sub.add_parser("state-tomo", help="state tomography with an IC POVM"), "state")
    _add_experiment_flags(sub.add_parser("process-tomo", help="channel tomography with a covariant tester"),
                          "process")
    _add_experiment_flags(sub.add_parser("povm-tomo", help="POVM tomography via a faithful state"), "povm")

    p = sub.add_parser("duals", help="compare canonical and optimal duals on the same data")
    _add_experiment_flags(p, "state")

    p = sub.add_parser("optimal-tester", help="optimal covariant setup and its figure of merit")
    p.add_argument("--kind", choices=KINDS, required=True)
    p.add_argument("--d", type=int, required=True)
    p.add_argument("--out", help="write the CSV row here")
    p.add_argument("--json", action="store_true")

    p = sub.add_parser("validate", help="check a comb, tester or POVM file")
    g = p.add_mutually_exclusive_group(required=True)
    g.add_argument("--comb", type=Path)
    g.add_argument("--tester", type=Path)
    g.add_argument("--povm", type=Path)
    p.add_argument("--tol", type=float, default=1e-9)
    p.add_argument("--json", action="store_true")
    return parser


def _config_from_args(args) -> harness.ExperimentConfig:
    data = {}
    if args.config is not None:
        try:
            data = json.loads(args.config.read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"cannot read config: {exc}") from exc
    data["task"] = args.task
    for name in ("d", "shots", "trials", "seed", "model", "dual", "out", "povm", "prior", "noise", "kind", "design"):
        value = getattr(args, name, None)
        if value is not None:
            data[name] = value
    if data.get("shots") == 0:
        data["shots"] = None
    try:
        return harness.ExperimentConfig.from_dict(data)
    except (TypeError, ValueError) as exc:
        raise UsageError(str(exc)) from exc


def _emit(obj, as_json: bool, out=None) -> None:
    out = sys.stdout if out is None else out
    if as_json:
        json.dump(obj, out, indent=2, default=float)
        out.write("\n")
        return
    rows = obj if isinstance(obj, list) else [obj]
    for row in rows:
        for k, v in row.items():
            if isinstance(v, float):
                v = f"{v:.10g}"
            elif isinstance(v, list) and len(v) > 6:
                v = f"[{len(v)} values]"
            out.write(f"{k:>14}  {v}\n")
        if len(rows) > 1:
            out.write("\n")


def _cmd_experiment(args) -> int:
    cfg = _config_from_args(args)
    try:
        rec = harness.run_experiment(cfg)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    summary = {"task": cfg.task, "d": cfg.d, "shots": cfg.shots, "trials": cfg.trials, "seed": cfg.seed,
               **rec.summary()}
    if cfg.out:
        summary["record"] = str(cfg.out)
    _emit(summary, args.json)
    return 0


def _cmd_duals(args) -> int:
    cfg = _config_from_args(args)
    try:
        rows = harness.compare_duals(cfg, ("canonical", "optimal"))
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    _emit(rows, args.json)
    return 0


def _cmd_optimal(args) -> int:
    if args.d < 2:
        raise UsageError("--d must be at least 2")
    rows = optimal.results_table([args.kind], [args.d])
    if args.out:
        optimal.write_results_csv(args.out, rows)
    _emit(rows[0], args.json)
    return 0


def _load_json(path: Path) -> dict:
    try:
        return json.loads(path.read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise UsageError(f"cannot read {path}: {exc}") from exc


def _cmd_validate(args) -> int:
    if args.comb is not None:
        try:
            comb = combs.QuantumComb.from_dict(_load_json(args.comb))
        except ValueError as exc:
            raise UsageError(str(exc)) from exc
        diag = combs.validate_comb(comb, tol=args.tol)
        report = {"object": "comb", "N": comb.N, "passed": diag.passed, "positive": diag.positive,
                  "residuals": diag.residuals, "final_residual": diag.final_residual}
    elif args.tester is not None:
        data = _load_json(args.tester)
        try:
            T = combs.Tester.from_dict(data)
            report = {"object": "tester", "passed": True, "elements": len(T)}
        except ValueError as exc:
            report = {"object": "tester", "passed": False, "reason": str(exc)}
    else:
        data = _load_json(args.povm)
        try:
            P = frames.povm_from_dict(data, check=False)
        except ValueError as exc:
            raise UsageError(str(exc)) from exc
        diag = frames.validate_povm(P, args.tol)
        report = {"object": "povm", "passed": diag.passed,
                  "min_eigenvalue": float(np.min(diag.min_eigenvalues)),
                  "completeness_residual": diag.completeness_residual,
                  "informationally_complete": frames.is_info_complete(P)}
    _emit(report, args.json)
    return 0 if report["passed"] else 1


_COMMANDS = {"state-tomo": _cmd_experiment, "process-tomo": _cmd_experiment, "povm-tomo": _cmd_experiment,
             "duals": _cmd_duals, "optimal-tester": _cmd_optimal, "validate": _cmd_validate}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return _COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"qtomo: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
