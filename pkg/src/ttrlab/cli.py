"""Command line front end: a thin client over the service handlers.

Checks run in process by default; with --server the same request is posted
to a running service and the returned report is rendered locally, so both
paths emit identical bytes.  Reports go to stdout unless --report names a
file; CSV tables are written only when --csv names one.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from collections.abc import Sequence
from pathlib import Path

from .approx import SECOND_ORDER_MODES
from .linalg import RankDeficiencyError
from .service import (
    EXIT_RANK_LOSS,
    EXIT_USAGE,
    POLICY_FILE_ENV,
    ReportFile,
    SpecError,
    SpecFile,
    UsageError,
    create_app,
    example_names,
    example_spec,
    load_policy_file,
    load_spec,
    merge_policy,
    report_json,
    run_approx,
    run_check_exact,
    run_collision,
    spec_json,
)


class _Parser(argparse.ArgumentParser):
    """Argument parser whose usage failures exit with the usage status."""

    def error(self, message: str) -> None:
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _steps_arg(text: str) -> list[int]:
    try:
        counts = [int(tok) for tok in text.split(",") if tok.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(
            "step counts must be a comma-separated list of integers"
        ) from None
    if not counts:
        raise argparse.ArgumentTypeError("step counts must not be empty")
    return counts


def build_parser() -> _Parser:
    parser = _Parser(prog="ttrlab", description="Reversibility checks for dilated channels.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    common = _Parser(add_help=False)
    common.add_argument("spec", help="path to a spec JSON document")
    common.add_argument("--report", metavar="PATH", help="write the report here instead of stdout")
    common.add_argument(
        "--policy-file",
        metavar="PATH",
        default=os.environ.get(POLICY_FILE_ENV),
        help=f"JSON tolerance overrides (default from ${POLICY_FILE_ENV})",
    )
    common.add_argument(
        "--server", metavar="URL", help="post to a running service instead of running in process"
    )
    common.add_argument(
        "--timing",
        action="store_true",
        help="include wall time in the report (breaks byte reproducibility)",
    )

    exact = sub.add_parser("check-exact", parents=[common], help="exact reversibility verdict")
    exact.add_argument("--dt", type=float, help="collision duration for Hamiltonian specs")
    exact.add_argument("--tol", type=float, help="verdict gate on the recovery gap")
    exact.set_defaults(func=_cmd_check_exact)

    approx = sub.add_parser(
        "approx", parents=[common], help="order-matching residuals and mismatch decay"
    )
    approx.add_argument("--order", type=int, choices=(1, 2), default=2)
    approx.add_argument("--dt-min", type=float, default=1e-3)
    approx.add_argument("--dt-max", type=float, default=1e-1)
    approx.add_argument("--points", type=int, default=12, help="dt grid size (at least 6)")
    approx.add_argument("--mode", choices=SECOND_ORDER_MODES, default="general")
    approx.add_argument("--csv", metavar="PATH", help="write the (dt, mismatch) grid here")
    approx.set_defaults(func=_cmd_approx)

    collision = sub.add_parser(
        "collision", parents=[common], help="stepwise reversal of a repeated collision"
    )
    collision.add_argument("--T", dest="total_time", type=float, default=1.0, help="total time")
    collision.add_argument(
        "--N",
        dest="steps",
        type=_steps_arg,
        default=[1],
        help="step count, or a comma list to sweep",
    )
    collision.add_argument("--xi-policy", choices=("constant", "solve"), default="constant")
    collision.add_argument("--seed", type=int, default=0)
    collision.add_argument("--csv", metavar="PATH", help="write the per-step or sweep table here")
    collision.set_defaults(func=_cmd_collision)

    example = sub.add_parser("example", help="named closed-form instances")
    example.add_argument("name", choices=example_names())
    example.add_argument(
        "--emit-spec", action="store_true", help="print the spec document instead of checking it"
    )
    example.add_argument("--output", metavar="PATH", help="write the emitted spec here")
    example.add_argument("--report", metavar="PATH", help="write the report here instead of stdout")
    example.add_argument("--timing", action="store_true")
    example.set_defaults(func=_cmd_example)

    serve = sub.add_parser("serve", help="run the web service")
    serve.add_argument("--host", default="127.0.0.1")
    serve.add_argument("--port", type=int, default=8000)
    serve.set_defaults(func=_cmd_serve)

    return parser


def _load_spec_with_policy(args: argparse.Namespace) -> SpecFile:
    spec = load_spec(args.spec)
    if args.policy_file:
        spec = merge_policy(spec, load_policy_file(args.policy_file))
    return spec


def _post(server: str, route: str, payload: dict) -> tuple[ReportFile, str | None]:
    import httpx

    resp = httpx.post(server.rstrip("/") + route, json=payload, timeout=300.0)
    if resp.status_code != 200:
        try:
            detail = resp.json().get("detail")
        except ValueError:
            detail = resp.text
        if isinstance(detail, dict):
            kind = detail.get("kind")
            message = str(detail.get("message"))
        else:
            kind, message = None, json.dumps(detail)
        if kind == "rank_loss":
            raise RankDeficiencyError(message)
        raise SpecError(message)
    data = resp.json()
    csv = data.get("csv")
    return ReportFile.model_validate(data["report"]), csv


def _emit(text: str, path: str | None) -> None:
    if path:
        Path(path).write_text(text)
    else:
        sys.stdout.write(text)


def _write_outputs(report: ReportFile, csv: str | None, args: argparse.Namespace) -> int:
    _emit(report_json(report), args.report)
    if getattr(args, "csv", None):
        if csv is None:
            raise UsageError("this command produced no CSV table")
        Path(args.csv).write_text(csv)
    return report.exit_code


def _cmd_check_exact(args: argparse.Namespace) -> int:
    spec = _load_spec_with_policy(args)
    if args.server:
        payload = {
            "spec": spec.model_dump(mode="json", exclude_none=True),
            "dt": args.dt,
            "tol": args.tol,
            "timing": args.timing,
        }
        report, csv = _post(args.server, "/check-exact", payload)
    else:
        report = run_check_exact(spec, dt=args.dt, tol=args.tol, timing=args.timing)
        csv = None
    return _write_outputs(report, csv, args)


def _cmd_approx(args: argparse.Namespace) -> int:
    spec = _load_spec_with_policy(args)
    if args.server:
        payload = {
            "spec": spec.model_dump(mode="json", exclude_none=True),
            "order": args.order,
            "dt_min": args.dt_min,
            "dt_max": args.dt_max,
            "points": args.points,
            "mode": args.mode,
            "timing": args.timing,
        }
        report, csv = _post(args.server, "/approx", payload)
    else:
        report, csv = run_approx(
            spec,
            order=args.order,
            dt_min=args.dt_min,
            dt_max=args.dt_max,
            points=args.points,
            mode=args.mode,
            timing=args.timing,
        )
    return _write_outputs(report, csv, args)


def _cmd_collision(args: argparse.Namespace) -> int:
    spec = _load_spec_with_policy(args)
    if args.server:
        payload = {
            "spec": spec.model_dump(mode="json", exclude_none=True),
            "total_time": args.total_time,
            "steps": args.steps,
            "xi_policy": args.xi_policy,
            "seed": args.seed,
            "timing": args.timing,
        }
        report, csv = _post(args.server, "/collision", payload)
    else:
        report, csv = run_collision(
            spec,
            total_time=args.total_time,
            step_counts=args.steps,
            xi_policy=args.xi_policy,
            seed=args.seed,
            timing=args.timing,
        )
    return _write_outputs(report, csv, args)


def _cmd_example(args: argparse.Namespace) -> int:
    spec = example_spec(args.name)
    if args.emit_spec:
        _emit(spec_json(spec), args.output)
        return 0
    report = run_check_exact(spec, timing=args.timing)
    _emit(report_json(report), args.report)
    return report.exit_code


def _cmd_serve(args: argparse.Namespace) -> int:
    import uvicorn

    uvicorn.run(create_app(), host=args.host, port=args.port)
    return 0


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (UsageError, SpecError) as exc:
        print(f"ttrlab: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except RankDeficiencyError as exc:
        print(f"ttrlab: error: {exc}", file=sys.stderr)
        return EXIT_RANK_LOSS


if __name__ == "__main__":
    sys.exit(main())
