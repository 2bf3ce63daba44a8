"""Domain types for device models, testing profiles, test catalogs, and schemes.

All values are frozen dataclasses, immutable after construction and safe to
share between threads. Parsing (via :mod:`iotsam.documents`) performs full
schema and invariant validation; programmatic construction is expected to
produce valid values.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

from .documents import (
    DocumentInvariantError,
    Reader,
    register_codec,
    scalar_value,
    text_map,
)
from .levels import (
    AuthorizationAccessLevel,
    DataSensitivityLevel,
    PhysicalAccessLevel,
    SecurityImpactLevel,
    VerificationLevel,
)

Scalar = str | int | bool


class ComponentKind(enum.Enum):
    SENSOR = "SENSOR"
    ACTUATOR = "ACTUATOR"
    PROCESSING_UNIT = "PROCESSING_UNIT"
    MEMORY = "MEMORY"
    FIRMWARE = "FIRMWARE"
    DATA_EXCHANGE_SERVICE = "DATA_EXCHANGE_SERVICE"
    PHYSICAL_INTERFACE = "PHYSICAL_INTERFACE"
    WIRELESS_INTERFACE = "WIRELESS_INTERFACE"
    NETWORK_SERVICE = "NETWORK_SERVICE"
    USER_INTERFACE = "USER_INTERFACE"


WIRELESS_PROTOCOLS = frozenset({
    "wifi", "bluetooth_classic", "ble", "zigbee", "thread", "zwave",
    "lorawan", "matter", "cellular_2g", "cellular_3g", "cellular_4g",
    "cellular_5g",
})


class EcosystemKind(enum.Enum):
    CLOUD_BACKEND = "CLOUD_BACKEND"
    MOBILE_APP = "MOBILE_APP"
    HUB_GATEWAY = "HUB_GATEWAY"
    THIRD_PARTY_API = "THIRD_PARTY_API"


class Severity(enum.Enum):
    CRITICAL = "CRITICAL"
    MAJOR = "MAJOR"
    MINOR = "MINOR"

    @property
    def order(self) -> int:
        return _SEVERITY_ORDER[self]


_SEVERITY_ORDER = {Severity.CRITICAL: 0, Severity.MAJOR: 1, Severity.MINOR: 2}


class ExecutionMode(enum.Enum):
    AUTOMATED = "AUTOMATED"
    SEMI_AUTOMATED = "SEMI_AUTOMATED"
    MANUAL = "MANUAL"


class SelectorOperator(enum.Enum):
    EQ = "EQ"
    NEQ = "NEQ"
    PRESENT = "PRESENT"


class InconclusivePolicy(enum.Enum):
    TREAT_AS_FAIL = "TREAT_AS_FAIL"
    TREAT_AS_SKIP = "TREAT_AS_SKIP"


def scalar_eq(a: Scalar, b: Scalar) -> bool:
    # bool is an int subtype in Python; keep True != 1 for attribute matching
    return isinstance(a, bool) == isinstance(b, bool) and a == b


@dataclass(frozen=True)
class DeviceComponent:
    component_id: str
    kind: ComponentKind
    attributes: dict[str, Scalar] = field(default_factory=dict)


@dataclass(frozen=True)
class DeviceModel:
    device_id: str
    display_name: str
    components: tuple[DeviceComponent, ...]
    metadata: dict[str, str] = field(default_factory=dict)

    def component(self, component_id: str) -> DeviceComponent:
        for comp in self.components:
            if comp.component_id == component_id:
                return comp
        raise KeyError(component_id)


@dataclass(frozen=True)
class EcosystemSystem:
    system_id: str
    kind: EcosystemKind
    endpoint: str
    in_scope: bool


@dataclass(frozen=True)
class TestingProfile:
    __test__ = False  # not a pytest class despite the name
    profile_id: str
    granted_physical: PhysicalAccessLevel
    granted_authorization: AuthorizationAccessLevel
    device_data_sensitivity: DataSensitivityLevel
    device_security_impact: SecurityImpactLevel
    verification_level: VerificationLevel
    ecosystem: tuple[EcosystemSystem, ...] = ()
    verification_overrides: dict[ComponentKind, VerificationLevel] = field(default_factory=dict)

    def effective_verification_level(self, kind: ComponentKind) -> VerificationLevel:
        """Verification level applying to components of ``kind``."""
        return self.verification_overrides.get(kind, self.verification_level)


@dataclass(frozen=True)
class AttributeConstraint:
    attribute_name: str
    operator: SelectorOperator
    value: Scalar | None = None

    def holds(self, component: DeviceComponent) -> bool:
        present = self.attribute_name in component.attributes
        if self.operator is SelectorOperator.PRESENT:
            return present
        actual = component.attributes.get(self.attribute_name)
        if self.operator is SelectorOperator.EQ:
            return present and scalar_eq(actual, self.value)  # type: ignore[arg-type]
        # NEQ is the complement of EQ: absent attributes count as "not equal"
        return not (present and scalar_eq(actual, self.value))  # type: ignore[arg-type]


@dataclass(frozen=True)
class ComponentSelector:
    kind: ComponentKind | None = None  # None means ANY
    constraints: tuple[AttributeConstraint, ...] = ()

    def matches(self, component: DeviceComponent) -> bool:
        if self.kind is not None and component.kind is not self.kind:
            return False
        return all(c.holds(component) for c in self.constraints)

    def describe(self) -> str:
        kind = self.kind.value if self.kind is not None else "ANY"
        parts = [kind]
        for c in self.constraints:
            if c.operator is SelectorOperator.PRESENT:
                parts.append(f"{c.attribute_name} PRESENT")
            else:
                parts.append(f"{c.attribute_name} {c.operator.value} {c.value!r}")
        return " and ".join(parts)


@dataclass(frozen=True)
class ManualStep:
    step: str
    expected_observation: str = ""


@dataclass(frozen=True)
class ExecutorRef:
    capability: str
    parameters: dict[str, Scalar] = field(default_factory=dict)


@dataclass(frozen=True)
class TestCase:
    __test__ = False  # not a pytest class despite the name
    case_id: str
    title: str
    description: str
    required_physical: PhysicalAccessLevel
    required_authorization: AuthorizationAccessLevel
    min_data_sensitivity: DataSensitivityLevel
    min_security_impact: SecurityImpactLevel
    verification_levels: frozenset[VerificationLevel]
    selector: ComponentSelector
    severity: Severity
    execution_mode: ExecutionMode
    executor_ref: ExecutorRef | None = None
    manual_steps: tuple[ManualStep, ...] = ()
    references: tuple[str, ...] = ()


@dataclass(frozen=True)
class TestCaseCatalog:
    __test__ = False  # not a pytest class despite the name
    catalog_id: str
    version: str
    cases: tuple[TestCase, ...]

    def case(self, case_id: str) -> TestCase:
        for case in self.cases:
            if case.case_id == case_id:
                return case
        raise KeyError(case_id)


@dataclass(frozen=True)
class AssessmentScheme:
    scheme_id: str
    major_fail_threshold: int
    minor_fail_threshold: int
    inconclusive_policy: InconclusivePolicy
    # critical-rule is fixed AUTO_FAIL and skipped-policy fixed EXCLUDE; they
    # appear in the document form but are not configurable.


# ---------------------------------------------------------------------------
# Document codecs


def _component_payload(comp: DeviceComponent) -> dict:
    return {
        "component-id": comp.component_id,
        "kind": comp.kind.value,
        "attributes": {k: comp.attributes[k] for k in sorted(comp.attributes)},
    }


def _component_from(reader: Reader) -> DeviceComponent:
    component_id = reader.str_field("component-id")
    kind = reader.token_field("kind", ComponentKind)
    attrs_raw = reader.map_field("attributes")
    attributes: dict[str, Scalar] = {}
    for name in sorted(attrs_raw):
        attributes[name] = scalar_value(attrs_raw[name], f"{reader.path}.attributes.{name}")
    reader.finish()
    if kind is ComponentKind.WIRELESS_INTERFACE and "protocol" in attributes:
        proto = attributes["protocol"]
        if proto not in WIRELESS_PROTOCOLS:
            from .documents import DocumentSchemaError

            raise DocumentSchemaError(
                f"unknown wireless protocol {proto!r}",
                path=f"{reader.path}.attributes.protocol",
            )
    if kind is ComponentKind.NETWORK_SERVICE:
        for required, type_ in (("host", str), ("port", int), ("service", str)):
            value = attributes.get(required)
            ok = isinstance(value, type_) and not isinstance(value, bool) if type_ is int \
                else isinstance(value, type_)
            if value is None or not ok:
                raise DocumentInvariantError(
                    f"network service component {component_id!r} requires "
                    f"attribute {required!r} of the proper type",
                    path=f"{reader.path}.attributes",
                )
        port = attributes["port"]
        if not 1 <= port <= 65535:  # type: ignore[operator]
            raise DocumentInvariantError(
                f"network service component {component_id!r} has port {port} "
                "outside 1-65535",
                path=f"{reader.path}.attributes.port",
            )
    return DeviceComponent(component_id, kind, attributes)


def _device_payload(model: DeviceModel) -> dict:
    return {
        "device-id": model.device_id,
        "display-name": model.display_name,
        "components": [_component_payload(c) for c in model.components],
        "metadata": {k: model.metadata[k] for k in sorted(model.metadata)},
    }


def _device_from(reader: Reader) -> DeviceModel:
    device_id = reader.str_field("device-id")
    display_name = reader.str_field("display-name")
    raw_components = reader.list_field("components")
    components = tuple(
        _component_from(reader.child(item, f"components[{i}]"))
        for i, item in enumerate(raw_components)
    )
    metadata = text_map(reader, "metadata")
    reader.finish()
    if not components:
        raise DocumentInvariantError(
            "device model must declare at least one component", path="components"
        )
    seen: set[str] = set()
    for i, comp in enumerate(components):
        if comp.component_id in seen:
            raise DocumentInvariantError(
                f"duplicate component-id {comp.component_id!r}",
                path=f"components[{i}].component-id",
            )
        seen.add(comp.component_id)
    return DeviceModel(device_id, display_name, components, metadata)


def _ecosystem_payload(system: EcosystemSystem) -> dict:
    return {
        "system-id": system.system_id,
        "kind": system.kind.value,
        "endpoint": system.endpoint,
        "in-scope": system.in_scope,
    }


def _ecosystem_from(reader: Reader) -> EcosystemSystem:
    system = EcosystemSystem(
        system_id=reader.str_field("system-id"),
        kind=reader.token_field("kind", EcosystemKind),
        endpoint=reader.str_field("endpoint"),
        in_scope=reader.bool_field("in-scope"),
    )
    reader.finish()
    return system


def _profile_payload(profile: TestingProfile) -> dict:
    overrides = {
        kind.value: profile.verification_overrides[kind].name
        for kind in sorted(profile.verification_overrides, key=lambda k: k.value)
    }
    return {
        "profile-id": profile.profile_id,
        "granted-physical": profile.granted_physical.name,
        "granted-authorization": profile.granted_authorization.name,
        "device-data-sensitivity": profile.device_data_sensitivity.name,
        "device-security-impact": profile.device_security_impact.name,
        "verification-level": profile.verification_level.name,
        "ecosystem": [_ecosystem_payload(s) for s in profile.ecosystem],
        "verification-overrides": overrides,
    }


def _profile_from(reader: Reader) -> TestingProfile:
    profile_id = reader.str_field("profile-id")
    granted_physical = reader.token_field("granted-physical", PhysicalAccessLevel)
    granted_authorization = reader.token_field("granted-authorization", AuthorizationAccessLevel)
    sensitivity = reader.token_field("device-data-sensitivity", DataSensitivityLevel)
    impact = reader.token_field("device-security-impact", SecurityImpactLevel)
    verification = reader.token_field("verification-level", VerificationLevel)
    raw_eco = reader.list_field("ecosystem")
    ecosystem = tuple(
        _ecosystem_from(reader.child(item, f"ecosystem[{i}]"))
        for i, item in enumerate(raw_eco)
    )
    raw_overrides = reader.map_field("verification-overrides", optional=True) or {}
    overrides: dict[ComponentKind, VerificationLevel] = {}
    for key in sorted(raw_overrides):
        child = reader.child({key: raw_overrides[key]}, "verification-overrides")
        try:
            kind = ComponentKind(key)
        except ValueError:
            from .documents import DocumentSchemaError

            raise DocumentSchemaError(
                f"unknown component kind {key!r}", path=f"verification-overrides.{key}"
            ) from None
        overrides[kind] = child.token_field(key, VerificationLevel)
    reader.finish()
    seen: set[str] = set()
    for i, system in enumerate(ecosystem):
        if system.system_id in seen:
            raise DocumentInvariantError(
                f"duplicate system-id {system.system_id!r}",
                path=f"ecosystem[{i}].system-id",
            )
        seen.add(system.system_id)
    return TestingProfile(
        profile_id, granted_physical, granted_authorization, sensitivity,
        impact, verification, ecosystem, overrides,
    )


def _selector_payload(selector: ComponentSelector) -> dict:
    constraints = []
    for c in selector.constraints:
        item = {"attribute-name": c.attribute_name, "operator": c.operator.value}
        if c.operator is not SelectorOperator.PRESENT:
            item["value"] = c.value
        constraints.append(item)
    return {
        "kind": selector.kind.value if selector.kind is not None else "ANY",
        "constraints": constraints,
    }


def _selector_from(reader: Reader) -> ComponentSelector:
    kind_token = reader.str_field("kind")
    if kind_token == "ANY":
        kind = None
    else:
        try:
            kind = ComponentKind(kind_token)
        except ValueError:
            from .documents import DocumentSchemaError

            raise DocumentSchemaError(
                f"unknown component kind {kind_token!r} (use ANY to match all kinds)",
                path=f"{reader.path}.kind",
            ) from None
    raw = reader.list_field("constraints")
    constraints = []
    for i, item in enumerate(raw):
        child = reader.child(item, f"{reader.path}.constraints[{i}]")
        name = child.str_field("attribute-name")
        operator = child.token_field("operator", SelectorOperator)
        value = None
        has_value = child.has("value")
        if has_value:
            value = scalar_value(child.raw_field("value"), f"{child.path}.value")
        child.finish()
        if operator is SelectorOperator.PRESENT and has_value:
            raise DocumentInvariantError(
                "PRESENT constraint must not carry a value", path=f"{child.path}.value"
            )
        if operator is not SelectorOperator.PRESENT and not has_value:
            raise DocumentInvariantError(
                f"{operator.value} constraint requires a value", path=child.path
            )
        constraints.append(AttributeConstraint(name, operator, value))
    reader.finish()
    return ComponentSelector(kind, tuple(constraints))


def _case_payload(case: TestCase) -> dict:
    out = {
        "case-id": case.case_id,
        "title": case.title,
        "description": case.description,
        "required-physical": case.required_physical.name,
        "required-authorization": case.required_authorization.name,
        "min-data-sensitivity": case.min_data_sensitivity.name,
        "min-security-impact": case.min_security_impact.name,
        "verification-levels": [
            lvl.name for lvl in sorted(case.verification_levels, key=lambda l: l.value)
        ],
        "selector": _selector_payload(case.selector),
        "severity": case.severity.value,
        "execution-mode": case.execution_mode.value,
    }
    if case.executor_ref is not None:
        out["executor-ref"] = {
            "capability": case.executor_ref.capability,
            "parameters": {
                k: case.executor_ref.parameters[k]
                for k in sorted(case.executor_ref.parameters)
            },
        }
    if case.manual_steps:
        out["manual-steps"] = [
            {"step": s.step, "expected-observation": s.expected_observation}
            for s in case.manual_steps
        ]
    out["references"] = list(case.references)
    return out


def _executor_ref_from(reader: Reader) -> ExecutorRef:
    capability = reader.str_field("capability")
    raw = reader.map_field("parameters")
    parameters = {
        name: scalar_value(raw[name], f"{reader.path}.parameters.{name}")
        for name in sorted(raw)
    }
    reader.finish()
    return ExecutorRef(capability, parameters)


def _case_from(reader: Reader) -> TestCase:
    case_id = reader.str_field("case-id")
    title = reader.str_field("title")
    description = reader.str_field("description")
    required_physical = reader.token_field("required-physical", PhysicalAccessLevel)
    required_authorization = reader.token_field("required-authorization", AuthorizationAccessLevel)
    min_sensitivity = reader.token_field("min-data-sensitivity", DataSensitivityLevel)
    min_impact = reader.token_field("min-security-impact", SecurityImpactLevel)
    raw_levels = reader.list_field("verification-levels")
    levels: list[VerificationLevel] = []
    for i, token in enumerate(raw_levels):
        child = reader.child({"level": token}, f"{reader.path}.verification-levels[{i}]")
        level = child.token_field("level", VerificationLevel)
        if level in levels:
            raise DocumentInvariantError(
                f"duplicate verification level {level.name} in case {case_id!r}",
                path=f"{reader.path}.verification-levels[{i}]",
            )
        levels.append(level)
    selector = _selector_from(reader.object_field("selector"))
    severity = reader.token_field("severity", Severity)
    mode = reader.token_field("execution-mode", ExecutionMode)
    executor_reader = reader.object_field("executor-ref", optional=True)
    executor_ref = _executor_ref_from(executor_reader) if executor_reader else None
    raw_steps = reader.list_field("manual-steps", optional=True)
    manual_steps = []
    if raw_steps is not None:
        for i, item in enumerate(raw_steps):
            child = reader.child(item, f"{reader.path}.manual-steps[{i}]")
            manual_steps.append(ManualStep(
                step=child.str_field("step"),
                expected_observation=child.str_field("expected-observation"),
            ))
            child.finish()
    raw_refs = reader.list_field("references")
    references = []
    for i, item in enumerate(raw_refs):
        child = reader.child({"ref": item}, f"{reader.path}.references[{i}]")
        references.append(child.str_field("ref"))
    reader.finish()

    if not levels:
        raise DocumentInvariantError(
            f"case {case_id!r} must declare at least one verification level",
            path=f"{reader.path}.verification-levels" if reader.path else "verification-levels",
        )
    path = reader.path or "case"
    if mode is ExecutionMode.MANUAL and executor_ref is not None:
        raise DocumentInvariantError(
            f"manual case {case_id!r} must not carry executor-ref", path=path
        )
    if mode is not ExecutionMode.MANUAL and executor_ref is None:
        raise DocumentInvariantError(
            f"{mode.value} case {case_id!r} requires executor-ref", path=path
        )
    if mode is ExecutionMode.AUTOMATED and manual_steps:
        raise DocumentInvariantError(
            f"automated case {case_id!r} must not carry manual-steps", path=path
        )
    if mode is not ExecutionMode.AUTOMATED and not manual_steps:
        raise DocumentInvariantError(
            f"{mode.value} case {case_id!r} requires manual-steps", path=path
        )
    return TestCase(
        case_id, title, description, required_physical, required_authorization,
        min_sensitivity, min_impact, frozenset(levels), selector, severity,
        mode, executor_ref, tuple(manual_steps), tuple(references),
    )


def _catalog_payload(catalog: TestCaseCatalog) -> dict:
    return {
        "catalog-id": catalog.catalog_id,
        "version": catalog.version,
        "cases": [_case_payload(c) for c in catalog.cases],
    }


def _catalog_from(reader: Reader) -> TestCaseCatalog:
    catalog_id = reader.str_field("catalog-id")
    version = reader.str_field("version")
    raw = reader.list_field("cases")
    cases = tuple(
        _case_from(reader.child(item, f"cases[{i}]")) for i, item in enumerate(raw)
    )
    reader.finish()
    if not version:
        raise DocumentInvariantError("catalog version must be non-empty", path="version")
    seen: set[str] = set()
    for i, case in enumerate(cases):
        if case.case_id in seen:
            raise DocumentInvariantError(
                f"duplicate case-id {case.case_id!r}", path=f"cases[{i}].case-id"
            )
        seen.add(case.case_id)
    return TestCaseCatalog(catalog_id, version, cases)


def _scheme_payload(scheme: AssessmentScheme) -> dict:
    return {
        "scheme-id": scheme.scheme_id,
        "critical-rule": "AUTO_FAIL",
        "major-fail-threshold": scheme.major_fail_threshold,
        "minor-fail-threshold": scheme.minor_fail_threshold,
        "inconclusive-policy": scheme.inconclusive_policy.value,
        "skipped-policy": "EXCLUDE",
    }


def _scheme_from(reader: Reader) -> AssessmentScheme:
    scheme_id = reader.str_field("scheme-id")
    reader.token_field("critical-rule", {"AUTO_FAIL"})
    major = reader.int_field("major-fail-threshold")
    minor = reader.int_field("minor-fail-threshold")
    policy = reader.token_field("inconclusive-policy", InconclusivePolicy)
    reader.token_field("skipped-policy", {"EXCLUDE"})
    reader.finish()
    for name, value in (("major-fail-threshold", major), ("minor-fail-threshold", minor)):
        if value < 0:
            raise DocumentInvariantError(
                f"{name} must be non-negative, got {value}", path=name
            )
    return AssessmentScheme(scheme_id, major, minor, policy)


register_codec("device-model", DeviceModel, _device_payload, _device_from)
register_codec("testing-profile", TestingProfile, _profile_payload, _profile_from)
register_codec("test-catalog", TestCaseCatalog, _catalog_payload, _catalog_from)
register_codec("assessment-scheme", AssessmentScheme, _scheme_payload, _scheme_from)
