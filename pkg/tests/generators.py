"""Seeded random generators for valid documents and filter-trial triples.

Plain ``random.Random``-based so the acceptance suite can do thousands of
trials deterministically and fast. Attribute names/values for components and
selector constraints draw from shared pools so randomly generated selectors
actually match randomly generated devices often enough to exercise both
branches.
"""

from __future__ import annotations

import random
from itertools import count

from iotsam.assessment import aggregate, render_report
from iotsam.execution import (
    ExecutionProtocol,
    Observation,
    Outcome,
    StepRecord,
)
from iotsam.filtering import TestPlan, filter_catalog
from iotsam.levels import (
    AuthorizationAccessLevel,
    DataSensitivityLevel,
    PhysicalAccessLevel,
    SecurityImpactLevel,
    VerificationLevel,
)
from iotsam.model import (
    AssessmentScheme,
    AttributeConstraint,
    ComponentKind,
    ComponentSelector,
    DeviceComponent,
    DeviceModel,
    EcosystemKind,
    EcosystemSystem,
    ExecutionMode,
    ExecutorRef,
    InconclusivePolicy,
    ManualStep,
    SelectorOperator,
    Severity,
    TestCase,
    TestCaseCatalog,
    TestingProfile,
)

# small per-name value pools keep random selectors and random components
# correlated enough that both filter branches get exercised
ATTR_POOLS = {
    "service": ("telnet", "http", "https", "mqtt"),
    "protocol": ("wifi", "ble", "zigbee", "thread"),
    "role": ("primary", "backup"),
    "zone": ("lan", "dmz"),
    "port-class": (5, 7, True),
}
ATTR_NAMES = tuple(ATTR_POOLS)
WIFI_PROTOCOLS = ("wifi", "ble", "zigbee", "thread", "zwave", "matter")

_LOW_WEIGHTS = (4, 3, 2, 1)   # case prerequisites lean low
_HIGH_WEIGHTS = (1, 2, 3, 4)  # granted profile levels lean high

_ids = count(1)


def fake_clock(start: int = 0):
    """Deterministic ISO timestamp source."""
    counter = count(start)

    def clock() -> str:
        n = next(counter)
        return f"2026-03-01T{(n // 3600) % 24:02d}:{(n // 60) % 60:02d}:{n % 60:02d}+00:00"

    return clock


def random_level(rng: random.Random, scale, weights=None):
    members = list(scale)
    if weights is None:
        return rng.choice(members)
    return rng.choices(members, weights=weights, k=1)[0]


def random_component(rng: random.Random, index: int) -> DeviceComponent:
    kind = rng.choice(list(ComponentKind))
    attributes = {}
    for name in rng.sample(ATTR_NAMES, k=rng.randint(1, 4)):
        attributes[name] = rng.choice(ATTR_POOLS[name])
    if kind is ComponentKind.WIRELESS_INTERFACE:
        # protocol on wireless interfaces is vocabulary-checked
        attributes.pop("protocol", None)
        if rng.random() < 0.7:
            attributes["protocol"] = rng.choice(WIFI_PROTOCOLS)
    if kind is ComponentKind.NETWORK_SERVICE:
        attributes["host"] = f"192.0.2.{rng.randint(1, 254)}"
        attributes["port"] = rng.randint(1, 65535)
        attributes["service"] = rng.choice(ATTR_POOLS["service"])
    return DeviceComponent(f"comp-{index}", kind, attributes)


def random_device(rng: random.Random, max_components: int = 20) -> DeviceModel:
    n = rng.randint(1, max_components)
    components = tuple(random_component(rng, i) for i in range(n))
    metadata = {}
    if rng.random() < 0.7:
        metadata["vendor"] = rng.choice(("acme", "lumina", "nordlys"))
    if rng.random() < 0.5:
        metadata["firmware-version"] = f"{rng.randint(0, 9)}.{rng.randint(0, 99)}"
    return DeviceModel(f"device-{next(_ids)}", "random device", components, metadata)


def random_profile(rng: random.Random) -> TestingProfile:
    overrides = {}
    for kind in rng.sample(list(ComponentKind), k=rng.randint(0, 2)):
        overrides[kind] = random_level(rng, VerificationLevel)
    ecosystem = tuple(
        EcosystemSystem(f"sys-{i}", rng.choice(list(EcosystemKind)),
                        f"endpoint-{i}", rng.random() < 0.8)
        for i in range(rng.randint(0, 3))
    )
    return TestingProfile(
        profile_id=f"profile-{next(_ids)}",
        granted_physical=random_level(rng, PhysicalAccessLevel, _HIGH_WEIGHTS),
        granted_authorization=random_level(rng, AuthorizationAccessLevel, _HIGH_WEIGHTS),
        device_data_sensitivity=random_level(rng, DataSensitivityLevel, _HIGH_WEIGHTS),
        device_security_impact=random_level(rng, SecurityImpactLevel, _HIGH_WEIGHTS),
        verification_level=random_level(rng, VerificationLevel),
        ecosystem=ecosystem,
        verification_overrides=overrides,
    )


def random_selector(rng: random.Random) -> ComponentSelector:
    kind = None if rng.random() < 0.4 else rng.choice(list(ComponentKind))
    constraints = []
    count = rng.choices((0, 1, 2), weights=(5, 3, 2), k=1)[0]
    for _ in range(count):
        operator = rng.choice(list(SelectorOperator))
        name = rng.choice(ATTR_NAMES)
        if operator is SelectorOperator.PRESENT:
            constraints.append(AttributeConstraint(name, operator, None))
        else:
            constraints.append(
                AttributeConstraint(name, operator, rng.choice(ATTR_POOLS[name]))
            )
    return ComponentSelector(kind, tuple(constraints))


def random_case(rng: random.Random, index: int) -> TestCase:
    mode = rng.choice(list(ExecutionMode))
    size = rng.choices((1, 2, 3, 4), weights=(1, 2, 3, 3), k=1)[0]
    levels = frozenset(rng.sample(list(VerificationLevel), k=size))
    executor_ref = None
    manual_steps: tuple[ManualStep, ...] = ()
    if mode is not ExecutionMode.MANUAL:
        executor_ref = ExecutorRef(
            f"cap.{rng.choice(('alpha', 'beta', 'gamma'))}",
            {"host": "192.0.2.1", "count": rng.randint(1, 9)},
        )
    if mode is not ExecutionMode.AUTOMATED:
        manual_steps = tuple(
            ManualStep(f"do step {i}", f"expect result {i}")
            for i in range(rng.randint(1, 4))
        )
    return TestCase(
        case_id=f"TC-{index:03d}",
        title=f"generated case {index}",
        description="generated for property trials",
        required_physical=random_level(rng, PhysicalAccessLevel, _LOW_WEIGHTS),
        required_authorization=random_level(rng, AuthorizationAccessLevel, _LOW_WEIGHTS),
        min_data_sensitivity=random_level(rng, DataSensitivityLevel, _LOW_WEIGHTS),
        min_security_impact=random_level(rng, SecurityImpactLevel, _LOW_WEIGHTS),
        verification_levels=levels,
        selector=random_selector(rng),
        severity=rng.choice(list(Severity)),
        execution_mode=mode,
        executor_ref=executor_ref,
        manual_steps=manual_steps,
        references=tuple(f"REF-{i}" for i in range(rng.randint(0, 2))),
    )


def random_catalog(rng: random.Random, max_cases: int = 200) -> TestCaseCatalog:
    n = rng.randint(0, max_cases)
    cases = tuple(random_case(rng, i) for i in range(n))
    return TestCaseCatalog(
        f"catalog-{next(_ids)}", f"{rng.randint(1, 3)}.{rng.randint(0, 9)}", cases
    )


def random_scheme(rng: random.Random) -> AssessmentScheme:
    return AssessmentScheme(
        scheme_id=f"scheme-{next(_ids)}",
        major_fail_threshold=rng.randint(0, 10),
        minor_fail_threshold=rng.randint(0, 10),
        inconclusive_policy=rng.choice(list(InconclusivePolicy)),
    )


def random_plan(rng: random.Random, *, max_cases: int = 30,
                max_components: int = 8) -> TestPlan:
    """A structurally valid plan, derived from a random filtered triple."""
    clock = fake_clock()
    catalog = random_catalog(rng, max_cases)
    device = random_device(rng, max_components)
    profile = random_profile(rng)
    return filter_catalog(catalog, device, profile,
                          plan_id=f"plan-{next(_ids)}", created_at=clock())


def synthetic_plan(rng: random.Random, *, max_entries: int = 20,
                   capabilities: tuple[str, ...] = ("cap.alpha", "cap.beta", "cap.gamma"),
                   ) -> TestPlan:
    """A plan with directly fabricated entries; guarantees a mode mix."""
    from iotsam.filtering import PlannedTest

    entries = []
    for i in range(rng.randint(1, max_entries)):
        mode = rng.choice(list(ExecutionMode))
        executor_ref = None
        guide: tuple[str, ...] = ()
        if mode is not ExecutionMode.MANUAL:
            executor_ref = ExecutorRef(
                rng.choice(capabilities),
                {"host": f"192.0.2.{rng.randint(1, 9)}", "count": rng.randint(1, 5)},
            )
        if mode is not ExecutionMode.AUTOMATED:
            guide = tuple(f"perform check {j}" for j in range(rng.randint(1, 3)))
        severity = rng.choice(list(Severity))
        entries.append((severity, PlannedTest(
            plan_entry_id=f"TC-{i:03d}@comp-{rng.randint(0, 3)}",
            case_id=f"TC-{i:03d}",
            target_component_id=f"comp-{rng.randint(0, 3)}",
            execution_mode=mode,
            instantiated_guide=guide,
            executor_ref=executor_ref,
        )))
    entries.sort(key=lambda pair: (pair[0].order, pair[1].case_id,
                                   pair[1].target_component_id))
    return TestPlan(
        plan_id=f"plan-{next(_ids)}", device_id="device-synth",
        profile_id="profile-synth", catalog_id="catalog-synth",
        catalog_version="1", created_at=fake_clock()(),
        entries=tuple(entry for _, entry in entries),
    )


def random_observation(rng: random.Random, clock) -> Observation:
    choice = rng.randint(0, 5)
    if choice == 0:
        return Observation.text(f"note {rng.randint(0, 99)}", captured_at=clock())
    if choice == 1:
        return Observation.port_list(
            sorted(rng.sample(range(1, 1000), k=rng.randint(0, 4))), captured_at=clock()
        )
    if choice == 2:
        return Observation.banner(f"svc {rng.randint(0, 9)}", rng.random() < 0.5,
                                  captured_at=clock())
    if choice == 3:
        versions = rng.sample(("tls1.0", "tls1.1", "tls1.2", "tls1.3"), k=rng.randint(1, 3))
        return Observation.tls_posture(versions, rng.random() < 0.5,
                                       "2027-01-01T00:00:00+00:00", captured_at=clock())
    if choice == 4:
        accepted = [("admin", "admin")] if rng.random() < 0.5 else []
        return Observation.credential_result(accepted, 20, captured_at=clock())
    digest = "".join(rng.choice("0123456789abcdef") for _ in range(64))
    ref = f"evidence-{rng.randint(0, 9)}.pcap" if rng.random() < 0.5 else None
    return Observation.evidence_digest(digest, ref, captured_at=clock())


def random_protocol(rng: random.Random, entry, clock) -> ExecutionProtocol:
    manual = entry.execution_mode is not ExecutionMode.AUTOMATED
    if manual:
        outcome = rng.choice([Outcome.PASS, Outcome.FAIL, Outcome.INCONCLUSIVE,
                              Outcome.SKIPPED])
        steps = tuple(
            StepRecord(step, tuple(random_observation(rng, clock)
                                   for _ in range(rng.randint(0, 2))))
            for step in entry.instantiated_guide
        )
        identity, version = "manual", f"assessor-{rng.randint(1, 3)}"
    else:
        outcome = rng.choice(list(Outcome))
        steps = (StepRecord("probe run", (random_observation(rng, clock),)),)
        identity, version = entry.executor_ref.capability, "1.0.0"
    started = clock()
    return ExecutionProtocol(
        protocol_id=f"exec-{entry.plan_entry_id}",
        plan_entry_id=entry.plan_entry_id,
        case_id=entry.case_id,
        executor_identity=identity,
        executor_version=version,
        started_at=started,
        ended_at=clock(),
        steps_performed=steps,
        outcome=outcome,
        outcome_rationale=f"generated rationale {rng.randint(0, 99)}",
    )


def random_report(rng: random.Random):
    """A valid assessment report built through the aggregation pipeline."""
    from iotsam.assessment import CaseVerdict

    clock = fake_clock()
    plan = synthetic_plan(rng)
    scheme = random_scheme(rng)
    protocols = [random_protocol(rng, entry, clock) for entry in plan.entries]
    treat_as_fail = scheme.inconclusive_policy is InconclusivePolicy.TREAT_AS_FAIL
    verdicts = []
    for protocol in protocols:
        if protocol.outcome in (Outcome.PASS, Outcome.FAIL, Outcome.SKIPPED):
            effective = protocol.outcome.value
        else:
            effective = "FAIL" if treat_as_fail else "SKIPPED"
        verdicts.append(CaseVerdict(
            case_id=protocol.case_id,
            plan_entry_id=protocol.plan_entry_id,
            effective_outcome=effective,
            severity=rng.choice(list(Severity)),
            protocol_id=protocol.protocol_id,
        ))
    overall = aggregate(verdicts, scheme, plan)
    report, _ = render_report(plan, protocols, verdicts, overall)
    return report
