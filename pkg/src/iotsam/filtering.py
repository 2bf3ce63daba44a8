"""Applicability filtering: catalog x device model x profile -> test plan.

The filter is the fully automatable pipeline stage. A case applies to a
concrete (case, component) pair when six prerequisites hold:

1. required physical access    <= granted physical access
2. required authorization      <= granted authorization
3. minimum data sensitivity    <= device data-sensitivity classification
4. minimum security impact     <= device security-impact classification
5. the profile's effective verification level for the component's kind is a
   member of the case's verification-level set
6. the case's selector matches the component

Predicates 1-4 are component-independent; 5 and 6 are evaluated per
component, so one case can yield entries for some matched components and not
others (per-kind verification overrides). ``matched_components`` holds the
components passing both 5 and 6.
"""

from __future__ import annotations

import re
import uuid
from dataclasses import dataclass, field
from datetime import datetime, timezone

from .documents import (
    DocumentInvariantError,
    Reader,
    register_codec,
    scalar_value,
)
from .levels import level_leq
from .model import (
    DeviceComponent,
    DeviceModel,
    ExecutionMode,
    ExecutorRef,
    Scalar,
    Severity,
    TestCase,
    TestCaseCatalog,
    TestingProfile,
)


class UnresolvedPlaceholderError(Exception):
    """A guide or parameter template references an attribute that is absent."""

    code = "UNRESOLVED_PLACEHOLDER"

    def __init__(self, placeholder: str, case_id: str):
        self.placeholder = placeholder
        self.case_id = case_id
        super().__init__(f"case {case_id}: unresolved placeholder {placeholder}")


@dataclass(frozen=True)
class ApplicabilityReason:
    prerequisite: str
    required: str
    actual: str
    satisfied: bool


@dataclass(frozen=True)
class ApplicabilityResult:
    applicable: bool
    reasons: tuple[ApplicabilityReason, ...]
    matched_components: tuple[str, ...]

    def unsatisfied(self) -> tuple[ApplicabilityReason, ...]:
        return tuple(r for r in self.reasons if not r.satisfied)


@dataclass(frozen=True)
class PlannedTest:
    plan_entry_id: str
    case_id: str
    target_component_id: str
    execution_mode: ExecutionMode
    instantiated_guide: tuple[str, ...]
    executor_ref: ExecutorRef | None = None


@dataclass(frozen=True)
class TestPlan:
    __test__ = False  # not a pytest class despite the name
    plan_id: str
    device_id: str
    profile_id: str
    catalog_id: str
    catalog_version: str
    created_at: str
    entries: tuple[PlannedTest, ...] = ()

    def entry(self, plan_entry_id: str) -> PlannedTest:
        for entry in self.entries:
            if entry.plan_entry_id == plan_entry_id:
                return entry
        raise KeyError(plan_entry_id)


@dataclass(frozen=True)
class CoverageReport:
    """Counts and exact fractions of plan entries by execution mode."""

    empty: bool
    total: int
    counts: dict[ExecutionMode, int] = field(default_factory=dict)

    def fraction(self, mode: ExecutionMode) -> tuple[int, int]:
        """(numerator, denominator); (0, 1) on an empty plan."""
        if self.empty:
            return (0, 1)
        return (self.counts.get(mode, 0), self.total)

    def fraction_text(self, mode: ExecutionMode) -> str:
        num, den = self.fraction(mode)
        return f"{num}/{den}"


def is_applicable(case: TestCase, device: DeviceModel, profile: TestingProfile) -> ApplicabilityResult:
    """Evaluate all six prerequisites of one case against device and profile."""
    level_checks = [
        ("required-physical", case.required_physical, profile.granted_physical),
        ("required-authorization", case.required_authorization, profile.granted_authorization),
        ("min-data-sensitivity", case.min_data_sensitivity, profile.device_data_sensitivity),
        ("min-security-impact", case.min_security_impact, profile.device_security_impact),
    ]
    reasons = [
        ApplicabilityReason(name, required.name, actual.name, level_leq(required, actual))
        for name, required, actual in level_checks
    ]

    selector_matched = [c for c in device.components if case.selector.matches(c)]
    verified = [
        c for c in selector_matched
        if profile.effective_verification_level(c.kind) in case.verification_levels
    ]

    required_levels = ",".join(
        lvl.name for lvl in sorted(case.verification_levels, key=lambda l: l.value)
    )
    effective_levels = ",".join(sorted({
        profile.effective_verification_level(c.kind).name for c in selector_matched
    })) or "none"
    reasons.append(ApplicabilityReason(
        "verification-level", required_levels, effective_levels, bool(verified)
    ))
    reasons.append(ApplicabilityReason(
        "selector",
        case.selector.describe(),
        ",".join(c.component_id for c in selector_matched) or "no match",
        bool(selector_matched),
    ))

    matched = tuple(c.component_id for c in verified)
    applicable = all(r.satisfied for r in reasons) and bool(matched)
    return ApplicabilityResult(applicable, tuple(reasons), matched)


_PLACEHOLDER_RE = re.compile(r"\{\{(attr|device):([A-Za-z0-9_.-]+)\}\}")
_ANY_PLACEHOLDER_RE = re.compile(r"\{\{[^{}]*\}\}")


def _resolve_text(template: str, case_id: str, component: DeviceComponent,
                  device: DeviceModel) -> str:
    def replace(match: re.Match) -> str:
        namespace, name = match.group(1), match.group(2)
        value = _lookup(namespace, name, case_id, component, device, match.group(0))
        return str(value)

    resolved = _PLACEHOLDER_RE.sub(replace, template)
    leftover = _ANY_PLACEHOLDER_RE.search(resolved)
    if leftover:
        raise UnresolvedPlaceholderError(leftover.group(0), case_id)
    return resolved


def _lookup(namespace: str, name: str, case_id: str, component: DeviceComponent,
            device: DeviceModel, placeholder: str) -> Scalar:
    if namespace == "attr":
        if name not in component.attributes:
            raise UnresolvedPlaceholderError(placeholder, case_id)
        return component.attributes[name]
    if name not in device.metadata:
        raise UnresolvedPlaceholderError(placeholder, case_id)
    return device.metadata[name]


def _resolve_parameter(value: Scalar, case_id: str, component: DeviceComponent,
                       device: DeviceModel) -> Scalar:
    if not isinstance(value, str):
        return value
    whole = _PLACEHOLDER_RE.fullmatch(value)
    if whole:
        # a parameter that IS one placeholder keeps the attribute's native type
        return _lookup(whole.group(1), whole.group(2), case_id, component, device, value)
    return _resolve_text(value, case_id, component, device)


def instantiate_guide(case: TestCase, component: DeviceComponent,
                      device: DeviceModel) -> tuple[tuple[str, ...], dict[str, Scalar] | None]:
    """Concrete step texts and resolved executor parameters for one component.

    Placeholders: ``{{attr:NAME}}`` reads the matched component's attribute,
    ``{{device:KEY}}`` the device metadata. A parameter whose template is a
    single placeholder keeps the attribute's native type.
    """
    steps = []
    for manual_step in case.manual_steps:
        text = _resolve_text(manual_step.step, case.case_id, component, device)
        if manual_step.expected_observation:
            expected = _resolve_text(
                manual_step.expected_observation, case.case_id, component, device
            )
            text = f"{text} (expected: {expected})"
        steps.append(text)
    parameters = None
    if case.executor_ref is not None:
        parameters = {
            name: _resolve_parameter(value, case.case_id, component, device)
            for name, value in case.executor_ref.parameters.items()
        }
    return tuple(steps), parameters


def plan_entry_id(case_id: str, component_id: str) -> str:
    return f"{case_id}@{component_id}"


def filter_catalog(catalog: TestCaseCatalog, device: DeviceModel,
                   profile: TestingProfile, *, plan_id: str | None = None,
                   created_at: str | None = None) -> TestPlan:
    """Filter the catalog down to a device-specific, deterministically ordered plan.

    One entry per applicable (case, matched component) pair, ordered by
    severity (CRITICAL first), then case-id, then target component-id.
    Identical inputs produce identical plans modulo plan-id and timestamp.
    """
    keyed: list[tuple[tuple[int, str, str], PlannedTest]] = []
    for case in catalog.cases:
        result = is_applicable(case, device, profile)
        if not result.applicable:
            continue
        for component_id in result.matched_components:
            component = device.component(component_id)
            steps, parameters = instantiate_guide(case, component, device)
            executor_ref = None
            if case.executor_ref is not None:
                executor_ref = ExecutorRef(case.executor_ref.capability, parameters or {})
            entry = PlannedTest(
                plan_entry_id=plan_entry_id(case.case_id, component_id),
                case_id=case.case_id,
                target_component_id=component_id,
                execution_mode=case.execution_mode,
                instantiated_guide=steps,
                executor_ref=executor_ref,
            )
            keyed.append(((case.severity.order, case.case_id, component_id), entry))
    keyed.sort(key=lambda pair: pair[0])
    return TestPlan(
        plan_id=plan_id or f"plan-{uuid.uuid4().hex[:12]}",
        device_id=device.device_id,
        profile_id=profile.profile_id,
        catalog_id=catalog.catalog_id,
        catalog_version=catalog.version,
        created_at=created_at or datetime.now(timezone.utc).isoformat(),
        entries=tuple(entry for _, entry in keyed),
    )


def coverage_report(plan: TestPlan) -> CoverageReport:
    """Automation coverage of a plan: entry counts and exact fractions by mode.

    Fractions are exact rationals over the entry total, so they sum to 1 for
    any non-empty plan; an empty plan sets the ``empty`` flag and reports
    zero counts.
    """
    counts = {mode: 0 for mode in ExecutionMode}
    for entry in plan.entries:
        counts[entry.execution_mode] += 1
    total = len(plan.entries)
    return CoverageReport(empty=total == 0, total=total, counts=counts)


# ---------------------------------------------------------------------------
# Document codec


def _entry_payload(entry: PlannedTest) -> dict:
    out = {
        "plan-entry-id": entry.plan_entry_id,
        "case-id": entry.case_id,
        "target-component-id": entry.target_component_id,
        "execution-mode": entry.execution_mode.value,
        "instantiated-guide": list(entry.instantiated_guide),
    }
    if entry.executor_ref is not None:
        out["executor-ref"] = {
            "capability": entry.executor_ref.capability,
            "parameters": {
                k: entry.executor_ref.parameters[k]
                for k in sorted(entry.executor_ref.parameters)
            },
        }
    return out


def _entry_from(reader: Reader) -> PlannedTest:
    entry_id = reader.str_field("plan-entry-id")
    case_id = reader.str_field("case-id")
    target = reader.str_field("target-component-id")
    mode = reader.token_field("execution-mode", ExecutionMode)
    raw_guide = reader.list_field("instantiated-guide")
    guide = []
    for i, item in enumerate(raw_guide):
        child = reader.child({"step": item}, f"{reader.path}.instantiated-guide[{i}]")
        guide.append(child.str_field("step"))
    executor_reader = reader.object_field("executor-ref", optional=True)
    executor_ref = None
    if executor_reader is not None:
        capability = executor_reader.str_field("capability")
        raw_params = executor_reader.map_field("parameters")
        parameters = {
            name: scalar_value(raw_params[name], f"{executor_reader.path}.parameters.{name}")
            for name in sorted(raw_params)
        }
        executor_reader.finish()
        executor_ref = ExecutorRef(capability, parameters)
    reader.finish()
    if mode is not ExecutionMode.MANUAL and executor_ref is None:
        raise DocumentInvariantError(
            f"{mode.value} plan entry {entry_id!r} requires executor-ref",
            path=reader.path or "entry",
        )
    if mode is ExecutionMode.MANUAL and executor_ref is not None:
        raise DocumentInvariantError(
            f"manual plan entry {entry_id!r} must not carry executor-ref",
            path=reader.path or "entry",
        )
    for step in guide:
        leftover = _ANY_PLACEHOLDER_RE.search(step)
        if leftover:
            raise DocumentInvariantError(
                f"plan entry {entry_id!r} contains unresolved placeholder "
                f"{leftover.group(0)}",
                path=f"{reader.path}.instantiated-guide" if reader.path else "instantiated-guide",
            )
    return PlannedTest(entry_id, case_id, target, mode, tuple(guide), executor_ref)


def _plan_payload(plan: TestPlan) -> dict:
    return {
        "plan-id": plan.plan_id,
        "device-id": plan.device_id,
        "profile-id": plan.profile_id,
        "catalog-id": plan.catalog_id,
        "catalog-version": plan.catalog_version,
        "created-at": plan.created_at,
        "entries": [_entry_payload(e) for e in plan.entries],
    }


def _plan_from(reader: Reader) -> TestPlan:
    plan_id = reader.str_field("plan-id")
    device_id = reader.str_field("device-id")
    profile_id = reader.str_field("profile-id")
    catalog_id = reader.str_field("catalog-id")
    catalog_version = reader.str_field("catalog-version")
    created_at = reader.timestamp_field("created-at")
    raw = reader.list_field("entries")
    entries = tuple(
        _entry_from(reader.child(item, f"entries[{i}]")) for i, item in enumerate(raw)
    )
    reader.finish()
    seen: set[str] = set()
    for i, entry in enumerate(entries):
        if entry.plan_entry_id in seen:
            raise DocumentInvariantError(
                f"duplicate plan-entry-id {entry.plan_entry_id!r}",
                path=f"entries[{i}].plan-entry-id",
            )
        seen.add(entry.plan_entry_id)
    return TestPlan(plan_id, device_id, profile_id, catalog_id,
                    catalog_version, created_at, entries)


register_codec("test-plan", TestPlan, _plan_payload, _plan_from)
