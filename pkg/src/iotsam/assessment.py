"""Assessment stage: per-case verdicts and the binary secure/insecure verdict.

Case verdicts are derived deterministically from protocol outcomes and the
scheme's policies; aggregation is a pure function of the multiset of
(severity, effective outcome) pairs plus the scheme: any CRITICAL fail is an
automatic overall fail, MAJOR and MINOR fails are acceptable up to their
thresholds, skipped cases are excluded from all counts.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable

from .documents import (
    DocumentInvariantError,
    Reader,
    register_codec,
)
from .execution import ExecutionProtocol, ObservationKind, Outcome
from .filtering import CoverageReport, TestPlan, coverage_report
from .model import AssessmentScheme, ExecutionMode, InconclusivePolicy, Severity, TestCase


class AssessmentError(Exception):
    code = "ASSESSMENT"


class EntryMismatchError(AssessmentError):
    code = "ENTRY_MISMATCH"


class MixedPlanError(AssessmentError):
    code = "MIXED_PLAN"


class CrossReferenceError(AssessmentError):
    code = "CROSS_REFERENCE"


class EffectiveOutcome:
    PASS = "PASS"
    FAIL = "FAIL"
    SKIPPED = "SKIPPED"


EFFECTIVE_OUTCOMES = (EffectiveOutcome.PASS, EffectiveOutcome.FAIL, EffectiveOutcome.SKIPPED)

RULE_CRITICAL = "critical-auto-fail"
RULE_MAJOR = "major-fail-threshold-exceeded"
RULE_MINOR = "minor-fail-threshold-exceeded"


@dataclass(frozen=True)
class CaseVerdict:
    case_id: str
    plan_entry_id: str
    effective_outcome: str
    severity: Severity
    protocol_id: str


@dataclass(frozen=True)
class TriggeredRule:
    rule: str
    detail: str


@dataclass(frozen=True)
class OverallVerdict:
    result: str  # SECURE | INSECURE
    triggered_rules: tuple[TriggeredRule, ...]
    counts: dict[Severity, dict[str, int]]
    scheme_id: str
    plan_id: str
    empty_plan: bool


@dataclass(frozen=True)
class AssessmentReport:
    report_id: str
    plan_id: str
    scheme_id: str
    result: str
    empty_plan: bool
    triggered_rules: tuple[TriggeredRule, ...]
    counts: dict[Severity, dict[str, int]]
    verdicts: tuple[CaseVerdict, ...]
    coverage: CoverageReport


def derive_case_verdict(protocol: ExecutionProtocol, case: TestCase,
                        scheme: AssessmentScheme) -> CaseVerdict:
    """Effective pass/fail/skipped for one executed case under the scheme.

    INCONCLUSIVE and ERROR both follow the scheme's inconclusive policy.
    """
    if protocol.case_id != case.case_id:
        raise EntryMismatchError(
            f"protocol {protocol.protocol_id!r} records case {protocol.case_id!r}, "
            f"not {case.case_id!r}"
        )
    outcome = protocol.outcome
    if outcome is Outcome.PASS:
        effective = EffectiveOutcome.PASS
    elif outcome is Outcome.FAIL:
        effective = EffectiveOutcome.FAIL
    elif outcome is Outcome.SKIPPED:
        effective = EffectiveOutcome.SKIPPED
    elif scheme.inconclusive_policy is InconclusivePolicy.TREAT_AS_FAIL:
        effective = EffectiveOutcome.FAIL
    else:
        effective = EffectiveOutcome.SKIPPED
    return CaseVerdict(
        case_id=case.case_id,
        plan_entry_id=protocol.plan_entry_id,
        effective_outcome=effective,
        severity=case.severity,
        protocol_id=protocol.protocol_id,
    )


def empty_counts() -> dict[Severity, dict[str, int]]:
    return {sev: {out: 0 for out in EFFECTIVE_OUTCOMES} for sev in Severity}


def aggregate(verdicts: Iterable[CaseVerdict], scheme: AssessmentScheme,
              plan: TestPlan) -> OverallVerdict:
    """Fold case verdicts into the overall secure/insecure result.

    INSECURE iff any CRITICAL fail, or MAJOR fails exceed the major
    threshold, or MINOR fails exceed the minor threshold. Skipped verdicts
    reflect scope, not device behavior, and are excluded from the counts'
    contribution to the rules.
    """
    verdicts = list(verdicts)
    entry_ids = {entry.plan_entry_id for entry in plan.entries}
    for verdict in verdicts:
        if verdict.plan_entry_id not in entry_ids:
            raise MixedPlanError(
                f"verdict for entry {verdict.plan_entry_id!r} does not belong "
                f"to plan {plan.plan_id!r}"
            )
    counts = empty_counts()
    for verdict in verdicts:
        counts[verdict.severity][verdict.effective_outcome] += 1

    triggered: list[TriggeredRule] = []
    critical_fails = counts[Severity.CRITICAL][EffectiveOutcome.FAIL]
    major_fails = counts[Severity.MAJOR][EffectiveOutcome.FAIL]
    minor_fails = counts[Severity.MINOR][EffectiveOutcome.FAIL]
    if critical_fails > 0:
        triggered.append(TriggeredRule(
            RULE_CRITICAL, f"{critical_fails} critical case(s) failed"
        ))
    if major_fails > scheme.major_fail_threshold:
        triggered.append(TriggeredRule(
            RULE_MAJOR,
            f"{major_fails} major fails exceed threshold {scheme.major_fail_threshold}",
        ))
    if minor_fails > scheme.minor_fail_threshold:
        triggered.append(TriggeredRule(
            RULE_MINOR,
            f"{minor_fails} minor fails exceed threshold {scheme.minor_fail_threshold}",
        ))
    result = "INSECURE" if triggered else "SECURE"
    return OverallVerdict(
        result=result,
        triggered_rules=tuple(triggered),
        counts=counts,
        scheme_id=scheme.scheme_id,
        plan_id=plan.plan_id,
        empty_plan=not plan.entries,
    )


def render_report(plan: TestPlan, protocols: Iterable[ExecutionProtocol],
                  verdicts: Iterable[CaseVerdict], overall: OverallVerdict,
                  ) -> tuple[AssessmentReport, str]:
    """(machine-readable report, human-readable text report).

    The text report lists failed cases first, with rationales and any
    evidence digests their protocols carry.
    """
    protocols = list(protocols)
    verdicts = list(verdicts)
    entry_ids = {entry.plan_entry_id for entry in plan.entries}
    protocol_by_id = {p.protocol_id: p for p in protocols}
    for protocol in protocols:
        if protocol.plan_entry_id not in entry_ids:
            raise CrossReferenceError(
                f"protocol {protocol.protocol_id!r} references unknown plan entry "
                f"{protocol.plan_entry_id!r}"
            )
    for verdict in verdicts:
        if verdict.plan_entry_id not in entry_ids:
            raise CrossReferenceError(
                f"verdict references unknown plan entry {verdict.plan_entry_id!r}"
            )
        if verdict.protocol_id not in protocol_by_id:
            raise CrossReferenceError(
                f"verdict references unknown protocol {verdict.protocol_id!r}"
            )
    if overall.plan_id != plan.plan_id:
        raise CrossReferenceError(
            f"overall verdict is for plan {overall.plan_id!r}, not {plan.plan_id!r}"
        )

    order = {entry.plan_entry_id: i for i, entry in enumerate(plan.entries)}
    verdicts_in_plan_order = sorted(verdicts, key=lambda v: order[v.plan_entry_id])
    report = AssessmentReport(
        report_id=f"report-{plan.plan_id}",
        plan_id=plan.plan_id,
        scheme_id=overall.scheme_id,
        result=overall.result,
        empty_plan=overall.empty_plan,
        triggered_rules=overall.triggered_rules,
        counts=overall.counts,
        verdicts=tuple(verdicts_in_plan_order),
        coverage=coverage_report(plan),
    )
    return report, _text_report(plan, protocol_by_id, verdicts_in_plan_order, overall)


def render_text_from_report(report: AssessmentReport, plan: TestPlan,
                            protocols: Iterable[ExecutionProtocol]) -> str:
    """Regenerate the human-readable report from a stored machine report."""
    overall = OverallVerdict(
        result=report.result,
        triggered_rules=report.triggered_rules,
        counts=report.counts,
        scheme_id=report.scheme_id,
        plan_id=report.plan_id,
        empty_plan=report.empty_plan,
    )
    protocol_by_id = {p.protocol_id: p for p in protocols}
    return _text_report(plan, protocol_by_id, list(report.verdicts), overall)


def _evidence_digests(protocol: ExecutionProtocol) -> list[str]:
    digests = []
    for record in protocol.steps_performed:
        for obs in record.observations:
            if obs.kind is ObservationKind.EVIDENCE_DIGEST:
                digests.append(obs.payload["sha256"])
    return digests


def _text_report(plan: TestPlan, protocol_by_id: dict[str, ExecutionProtocol],
                 verdicts: list[CaseVerdict], overall: OverallVerdict) -> str:
    lines = [
        f"Security assessment of device {plan.device_id}",
        f"Plan {plan.plan_id} (catalog {plan.catalog_id} v{plan.catalog_version}, "
        f"profile {plan.profile_id})",
        f"Result: {overall.result}",
    ]
    if overall.empty_plan:
        lines.append("Warning: the plan contains no entries (empty-plan).")
    for rule in overall.triggered_rules:
        lines.append(f"Triggered rule: {rule.rule} ({rule.detail})")
    lines.append("")

    failed = [v for v in verdicts if v.effective_outcome == EffectiveOutcome.FAIL]
    others = [v for v in verdicts if v.effective_outcome != EffectiveOutcome.FAIL]
    if failed:
        lines.append(f"Failed cases ({len(failed)}):")
        for verdict in failed:
            lines.extend(_verdict_lines(verdict, protocol_by_id))
        lines.append("")
    if others:
        lines.append(f"Other cases ({len(others)}):")
        for verdict in others:
            lines.extend(_verdict_lines(verdict, protocol_by_id))
        lines.append("")

    coverage = coverage_report(plan)
    lines.append("Automation coverage:")
    if coverage.empty:
        lines.append("  (empty plan)")
    else:
        for mode in ExecutionMode:
            count = coverage.counts.get(mode, 0)
            lines.append(f"  {mode.value}: {count} ({coverage.fraction_text(mode)})")
    return "\n".join(lines) + "\n"


def _verdict_lines(verdict: CaseVerdict, protocol_by_id: dict[str, ExecutionProtocol]) -> list[str]:
    protocol = protocol_by_id[verdict.protocol_id]
    lines = [
        f"  [{verdict.effective_outcome}] {verdict.case_id} "
        f"({verdict.severity.value}) on entry {verdict.plan_entry_id}",
        f"      rationale: {protocol.outcome_rationale or '(none)'}",
    ]
    for digest in _evidence_digests(protocol):
        lines.append(f"      evidence sha256: {digest}")
    return lines


# ---------------------------------------------------------------------------
# Document codec


def _counts_payload(counts: dict[Severity, dict[str, int]]) -> dict:
    return {
        sev.value: {out: counts[sev][out] for out in EFFECTIVE_OUTCOMES}
        for sev in Severity
    }


def _verdict_payload(verdict: CaseVerdict) -> dict:
    return {
        "case-id": verdict.case_id,
        "plan-entry-id": verdict.plan_entry_id,
        "effective-outcome": verdict.effective_outcome,
        "severity": verdict.severity.value,
        "protocol-id": verdict.protocol_id,
    }


def _coverage_payload(coverage: CoverageReport) -> dict:
    return {
        "empty": coverage.empty,
        "total": coverage.total,
        "modes": {
            mode.value: {
                "count": coverage.counts.get(mode, 0),
                "fraction": coverage.fraction_text(mode),
            }
            for mode in ExecutionMode
        },
    }


def _report_payload(report: AssessmentReport) -> dict:
    return {
        "report-id": report.report_id,
        "plan-id": report.plan_id,
        "scheme-id": report.scheme_id,
        "result": report.result,
        "empty-plan": report.empty_plan,
        "triggered-rules": [
            {"rule": rule.rule, "detail": rule.detail} for rule in report.triggered_rules
        ],
        "counts": _counts_payload(report.counts),
        "verdicts": [_verdict_payload(v) for v in report.verdicts],
        "coverage": _coverage_payload(report.coverage),
    }


def _verdict_from(reader: Reader) -> CaseVerdict:
    verdict = CaseVerdict(
        case_id=reader.str_field("case-id"),
        plan_entry_id=reader.str_field("plan-entry-id"),
        effective_outcome=reader.token_field("effective-outcome", set(EFFECTIVE_OUTCOMES)),
        severity=reader.token_field("severity", Severity),
        protocol_id=reader.str_field("protocol-id"),
    )
    reader.finish()
    return verdict


def _counts_from(reader: Reader) -> dict[Severity, dict[str, int]]:
    counts = empty_counts()
    for severity in Severity:
        child = reader.object_field(severity.value)
        for out in EFFECTIVE_OUTCOMES:
            value = child.int_field(out)
            if value < 0:
                raise DocumentInvariantError(
                    f"count must be non-negative, got {value}",
                    path=f"{child.path}.{out}",
                )
            counts[severity][out] = value
        child.finish()
    reader.finish()
    return counts


def _coverage_from(reader: Reader) -> CoverageReport:
    empty = reader.bool_field("empty")
    total = reader.int_field("total")
    modes_reader = reader.object_field("modes")
    counts: dict[ExecutionMode, int] = {}
    for mode in ExecutionMode:
        child = modes_reader.object_field(mode.value)
        counts[mode] = child.int_field("count")
        child.str_field("fraction")
        child.finish()
    modes_reader.finish()
    reader.finish()
    if (total == 0) != empty or sum(counts.values()) != total:
        raise DocumentInvariantError(
            "coverage counts are inconsistent with the total", path="coverage"
        )
    return CoverageReport(empty=empty, total=total, counts=counts)


def _report_from(reader: Reader) -> AssessmentReport:
    report_id = reader.str_field("report-id")
    plan_id = reader.str_field("plan-id")
    scheme_id = reader.str_field("scheme-id")
    result = reader.token_field("result", {"SECURE", "INSECURE"})
    empty_plan = reader.bool_field("empty-plan")
    raw_rules = reader.list_field("triggered-rules")
    rules = []
    for i, item in enumerate(raw_rules):
        child = reader.child(item, f"triggered-rules[{i}]")
        rules.append(TriggeredRule(child.str_field("rule"), child.str_field("detail")))
        child.finish()
    counts = _counts_from(reader.object_field("counts"))
    raw_verdicts = reader.list_field("verdicts")
    verdicts = tuple(
        _verdict_from(reader.child(item, f"verdicts[{i}]"))
        for i, item in enumerate(raw_verdicts)
    )
    coverage = _coverage_from(reader.object_field("coverage"))
    reader.finish()
    return AssessmentReport(
        report_id, plan_id, scheme_id, result, empty_plan, tuple(rules),
        counts, verdicts, coverage,
    )


register_codec("assessment-report", AssessmentReport, _report_payload, _report_from)
