"""Command-line entry point for the assessment pipeline.

Exit codes: 0 success, 1 validation or pipeline error, 2 usage error, and for
``assess`` specifically: 0 means the device was assessed SECURE, 3 means the
assessment completed with an INSECURE result (distinct from tool failure).
"""

from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path

from .assessment import (
    aggregate,
    derive_case_verdict,
    render_report,
    render_text_from_report,
)
from .documents import DocumentError, kind_of, parse_document, serialize_document
from .execution import Outcome, Observation, execute_plan, record_manual_result
from .filtering import TestPlan, coverage_report, filter_catalog
from .model import ExecutionMode
from .store import CampaignStore, StoreError, WrongStateError

STORE_ENV_VAR = "IOTSAM_STORE"

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_USAGE = 2
EXIT_INSECURE = 3


class _CliFailure(Exception):
    def __init__(self, message: str, code: int = EXIT_ERROR):
        super().__init__(message)
        self.code = code


def _fail(message: str, code: int = EXIT_ERROR) -> "_CliFailure":
    return _CliFailure(message, code)


def _read_file(path: str) -> bytes:
    file = Path(path)
    if not file.is_file():
        raise _fail(f"no such file: {path}", EXIT_USAGE)
    return file.read_bytes()


def _load(path: str, expected_kind: str):
    try:
        return parse_document(_read_file(path), expected_kind)
    except DocumentError as exc:
        raise _fail(f"{path}: {exc.code} {exc}") from None


def _store_from(args) -> CampaignStore:
    root = args.store or os.environ.get(STORE_ENV_VAR)
    if not root:
        raise _fail(f"no store given: pass --store or set {STORE_ENV_VAR}", EXIT_USAGE)
    return CampaignStore(root)


def _print_coverage(plan: TestPlan) -> None:
    coverage = coverage_report(plan)
    if coverage.empty:
        print("warning: plan contains no entries (empty plan)")
        return
    print(f"plan entries: {coverage.total}")
    for mode in ExecutionMode:
        count = coverage.counts.get(mode, 0)
        print(f"  {mode.value}: {count} ({coverage.fraction_text(mode)})")


def cmd_validate(args) -> int:
    failures = 0
    for path in args.file:
        data = _read_file(path)
        try:
            value = parse_document(data)
        except DocumentError as exc:
            print(f"ERROR {path}: {exc.code} {exc}")
            failures += 1
            continue
        print(f"OK {path} ({kind_of(value)})")
    return EXIT_ERROR if failures else EXIT_OK


def cmd_plan(args) -> int:
    device = _load(args.device, "device-model")
    profile = _load(args.profile, "testing-profile")
    catalog = _load(args.catalog, "test-catalog")
    plan = filter_catalog(catalog, device, profile)
    try:
        Path(args.out).write_bytes(serialize_document(plan))
    except OSError as exc:
        raise _fail(f"cannot write plan to {args.out}: {exc}") from None
    print(f"wrote plan {plan.plan_id} to {args.out}")
    _print_coverage(plan)
    return EXIT_OK


def _prompt(label: str) -> str:
    print(label, end="", flush=True)
    line = sys.stdin.readline()
    if not line:
        raise _fail("unexpected end of input during interactive session")
    return line.rstrip("\n")


def _interactive_manual(store: CampaignStore, session_id: str) -> None:
    session = store.load_session(session_id)
    pending = session.pending_manual_entries
    if not pending:
        print("no pending manual entries")
        return
    assessor = os.environ.get("IOTSAM_ASSESSOR", "cli-assessor")
    for entry in pending:
        case = session.catalog.case(entry.case_id)
        print(f"\n=== {entry.plan_entry_id}: {case.title} "
              f"[{case.severity.value}, {entry.execution_mode.value}]")
        observations: list[list[Observation]] = []
        for i, step in enumerate(entry.instantiated_guide, start=1):
            print(f"step {i}/{len(entry.instantiated_guide)}: {step}")
            answer = _prompt("  observation (empty for none)> ")
            observations.append([Observation.text(answer)] if answer else [])
        outcome = None
        while outcome is None:
            token = _prompt("outcome [pass/fail/inconclusive/skipped]> ").strip().upper()
            if token in ("PASS", "FAIL", "INCONCLUSIVE", "SKIPPED"):
                outcome = Outcome[token]
            else:
                print(f"  unrecognized outcome {token!r}")
        rationale = _prompt("rationale> ")
        protocol = record_manual_result(entry, assessor, observations, outcome, rationale)
        store.append_protocol(session_id, protocol)
        print(f"recorded {entry.plan_entry_id}: {outcome.value}")


def cmd_run(args) -> int:
    store = _store_from(args)
    if args.session_id:
        session_id = args.session_id
    else:
        required = {"--device": args.device, "--profile": args.profile,
                    "--catalog": args.catalog, "--plan": args.plan}
        missing = [flag for flag, value in required.items() if not value]
        if missing:
            raise _fail(
                f"starting a new session needs {' '.join(missing)} "
                "(or resume one with --session-id)", EXIT_USAGE,
            )
        device = _load(args.device, "device-model")
        profile = _load(args.profile, "testing-profile")
        catalog = _load(args.catalog, "test-catalog")
        plan = _load(args.plan, "test-plan")
        session_id = store.create_session(device, profile, catalog, plan)
        print(f"session: {session_id}")

    session = store.load_session(session_id)
    pending_entries = session.pending_entries
    run_plan = TestPlan(
        plan_id=session.plan.plan_id,
        device_id=session.plan.device_id,
        profile_id=session.plan.profile_id,
        catalog_id=session.plan.catalog_id,
        catalog_version=session.plan.catalog_version,
        created_at=session.plan.created_at,
        entries=tuple(pending_entries),
    )

    from .probes import bundled_registry

    protocols, pending = execute_plan(
        run_plan, bundled_registry(),
        session_sink=lambda protocol: store.append_protocol(session_id, protocol),
        parallelism_limit=args.parallelism,
    )
    for protocol in protocols:
        print(f"{protocol.plan_entry_id}: {protocol.outcome.value} "
              f"({protocol.outcome_rationale})")
    if pending:
        print(f"pending manual entries: {len(pending)}")
        for entry in pending:
            print(f"  {entry.plan_entry_id} [{entry.execution_mode.value}]")
    if args.interactive:
        _interactive_manual(store, session_id)
    state = store.load_session(session_id).state
    print(f"session {session_id} state: {state.value}")
    return EXIT_OK


def cmd_assess(args) -> int:
    store = _store_from(args)
    scheme = _load(args.scheme, "assessment-scheme")
    session = store.load_session(args.session_id)
    if not session.protocols and session.plan.entries:
        raise _fail(
            f"WRONG_STATE: session {args.session_id} has no recorded protocols yet. "
            "Run `iotsam run` first."
        )
    verdicts = [
        derive_case_verdict(protocol, session.catalog.case(protocol.case_id), scheme)
        for protocol in session.protocols
    ]
    overall = aggregate(verdicts, scheme, session.plan)
    report, text = render_report(session.plan, session.protocols, verdicts, overall)
    store.append_assessment(args.session_id, scheme, report)
    print(text, end="")
    return EXIT_OK if overall.result == "SECURE" else EXIT_INSECURE


def cmd_report(args) -> int:
    store = _store_from(args)
    session = store.load_session(args.session_id)
    if session.report is None:
        raise _fail(
            f"WRONG_STATE: session {args.session_id} is not assessed yet. "
            "Run `iotsam assess` first."
        )
    if args.format == "machine":
        data = serialize_document(session.report)
        if args.out:
            Path(args.out).write_bytes(data)
            print(f"wrote report to {args.out}")
        else:
            sys.stdout.write(data.decode("utf-8"))
    else:
        text = render_text_from_report(session.report, session.plan, session.protocols)
        if args.out:
            Path(args.out).write_text(text, encoding="utf-8")
            print(f"wrote report to {args.out}")
        else:
            sys.stdout.write(text)
    return EXIT_OK


def cmd_serve(args) -> int:
    host, _, port = args.listen.rpartition(":")
    if not host or not port.isdigit():
        raise _fail(f"--listen expects host:port, got {args.listen!r}", EXIT_USAGE)
    store = _store_from(args)

    import uvicorn

    from .api import create_app

    app = create_app(store, schemes_dir=args.schemes, assets_dir=args.assets)
    print(f"serving on http://{host}:{port}/ (store: {store.root})")
    uvicorn.run(app, host=host, port=int(port), log_level="warning")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="iotsam",
        description="Model-based security assessment pipeline for consumer IoT devices.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_validate = sub.add_parser("validate", help="validate canonical documents")
    p_validate.add_argument("--file", action="append", required=True,
                            help="document to validate (repeatable)")
    p_validate.set_defaults(func=cmd_validate)

    p_plan = sub.add_parser("plan", help="filter a catalog into a device-specific test plan")
    p_plan.add_argument("--device", required=True)
    p_plan.add_argument("--profile", required=True)
    p_plan.add_argument("--catalog", required=True)
    p_plan.add_argument("--out", required=True)
    p_plan.set_defaults(func=cmd_plan)

    p_run = sub.add_parser("run", help="execute a plan inside a stored session")
    p_run.add_argument("--store", help=f"store root (or ${STORE_ENV_VAR})")
    p_run.add_argument("--session-id", help="resume an existing session")
    p_run.add_argument("--device")
    p_run.add_argument("--profile")
    p_run.add_argument("--catalog")
    p_run.add_argument("--plan")
    p_run.add_argument("--interactive", action="store_true",
                       help="prompt for pending manual entries on the terminal")
    p_run.add_argument("--parallelism", type=int, default=4)
    p_run.set_defaults(func=cmd_run)

    p_assess = sub.add_parser("assess", help="aggregate verdicts into secure/insecure")
    p_assess.add_argument("--store", help=f"store root (or ${STORE_ENV_VAR})")
    p_assess.add_argument("--session-id", required=True)
    p_assess.add_argument("--scheme", required=True)
    p_assess.set_defaults(func=cmd_assess)

    p_report = sub.add_parser("report", help="emit the assessment report")
    p_report.add_argument("--store", help=f"store root (or ${STORE_ENV_VAR})")
    p_report.add_argument("--session-id", required=True)
    p_report.add_argument("--format", choices=("text", "machine"), default="text")
    p_report.add_argument("--out")
    p_report.set_defaults(func=cmd_report)

    p_serve = sub.add_parser("serve", help="serve the HTTP API and assessor console")
    p_serve.add_argument("--store", help=f"store root (or ${STORE_ENV_VAR})")
    p_serve.add_argument("--listen", default="127.0.0.1:8660")
    p_serve.add_argument("--schemes", help="directory of assessment-scheme documents")
    p_serve.add_argument("--assets", help="directory of built console assets")
    p_serve.set_defaults(func=cmd_serve)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except _CliFailure as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code
    except WrongStateError as exc:
        print(f"error: WRONG_STATE: {exc}", file=sys.stderr)
        return EXIT_ERROR
    except (DocumentError, StoreError) as exc:
        code = getattr(exc, "code", "ERROR")
        print(f"error: {code}: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
