"""Command-line driver: thin client over the command layer or a remote service.

Exit codes: 0 success, 1 validation failure, 2 runtime or feasibility error,
3 I/O or document error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .files import DocumentError, load_complex, load_metric, write_report
from .geometry import NotRealizableError
from .mc import (AcceptanceFloorError, DegenerateWeightsError,
                 FeasibilityError)
from .runs import RunConfig, cmd_action, cmd_observables, cmd_rp, cmd_validate

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_RUNTIME = 2
EXIT_IO = 3


def _add_common(sub, metric=False, metric_required=False):
    sub.add_argument("--complex", required=True, help="complex JSON file")
    if metric:
        sub.add_argument("--metric", required=metric_required,
                         help="metric JSON file")
    sub.add_argument("--kappa", type=float, default=10.0)
    sub.add_argument("--norm", choices=("sup", "l2"), default="sup")
    sub.add_argument("--gamma", type=float, default=1.0)
    sub.add_argument("--lambda", dest="lam", type=float, default=1.0)
    sub.add_argument("--samples", type=int, default=10000)
    sub.add_argument("--seed", type=int, default=0)
    sub.add_argument("--estimator", choices=("naive", "factorized"),
                     default="naive")
    sub.add_argument("--m-inner", type=int, default=64)
    sub.add_argument("--n-z0", type=int, default=1000)
    sub.add_argument("--delta", type=float, default=0.01)
    sub.add_argument("--out", help="directory for report files")
    sub.add_argument("--server", help="base URL of a running service; when set "
                                      "the command is posted there instead of "
                                      "running in process")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="regge",
        description="Regge-calculus geometry and reflection-positivity checks")
    subs = parser.add_subparsers(dest="command", required=True)
    _add_common(subs.add_parser("validate", help="check complex, reflection, metric"),
                metric=True)
    _add_common(subs.add_parser("action", help="curvature, volume and action"),
                metric=True, metric_required=True)
    _add_common(subs.add_parser("rp", help="reflection-positivity Gram matrix"))
    _add_common(subs.add_parser("observables",
                                help="partition, expectations, identities"))
    serve = subs.add_parser("serve", help="run the HTTP service")
    serve.add_argument("--host", default="127.0.0.1")
    serve.add_argument("--port", type=int, default=8000)
    return parser


def _config_from_args(args) -> RunConfig:
    return RunConfig(kappa=args.kappa, norm=args.norm, gamma=args.gamma,
                     lam=args.lam, samples=args.samples, seed=args.seed,
                     estimator=args.estimator, m_inner=args.m_inner,
                     n_z0=args.n_z0, delta=args.delta)


def _emit(report: dict, args) -> None:
    if args.out:
        path = write_report(Path(args.out) / f"{report['command']}_report.json",
                            report)
        print(f"report written to {path}")
    else:
        json.dump(report, sys.stdout, indent=2, sort_keys=True)
        print()


def _post_remote(args) -> int:
    import httpx

    with open(args.complex) as fh:
        payload = {"complex": json.load(fh)}
    if getattr(args, "metric", None):
        with open(args.metric) as fh:
            payload["metric"] = json.load(fh)
    payload.update({
        "kappa": args.kappa, "norm": args.norm, "gamma": args.gamma,
        "lambda": args.lam, "samples": args.samples, "seed": args.seed,
        "estimator": args.estimator, "m_inner": args.m_inner,
        "n_z0": args.n_z0, "delta": args.delta,
    })
    url = args.server.rstrip("/") + "/" + args.command
    resp = httpx.post(url, json=payload, timeout=3600.0)
    if resp.status_code != 200:
        print(f"service error {resp.status_code}: {resp.text}", file=sys.stderr)
        return EXIT_RUNTIME if resp.status_code == 422 else EXIT_IO
    report = resp.json()
    _emit(report, args)
    if args.command == "validate" and not report["results"]["ok"]:
        return EXIT_VALIDATION
    return EXIT_OK


def run(args) -> int:
    if args.command == "serve":
        import uvicorn

        from .service import app
        uvicorn.run(app, host=args.host, port=args.port)
        return EXIT_OK

    if args.server:
        return _post_remote(args)

    cfg = _config_from_args(args)
    try:
        doc = load_complex(args.complex)
        metric = None
        if getattr(args, "metric", None):
            metric = load_metric(args.metric, doc.K, doc.reflection)
    except (DocumentError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO

    try:
        if args.command == "validate":
            report, ok = cmd_validate(doc, cfg, metric)
            _emit(report, args)
            return EXIT_OK if ok else EXIT_VALIDATION
        if args.command == "action":
            report = cmd_action(doc, metric, cfg)
        elif args.command == "rp":
            report = cmd_rp(doc, cfg, output_dir=args.out)
        else:
            report = cmd_observables(doc, cfg)
    except (FeasibilityError, AcceptanceFloorError, DegenerateWeightsError,
            NotRealizableError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    _emit(report, args)
    return EXIT_OK


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return run(args)


if __name__ == "__main__":
    sys.exit(main())
