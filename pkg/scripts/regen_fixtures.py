#!/usr/bin/env python3
"""Regenerate the bundled fixture documents under fixtures/.

Builds the fixtures as typed values and writes their canonical serialization,
then sanity-checks the plan shape the test suite relies on (9 entries from
the 12-case mini catalog against the smart lock and lab profile, split
5 automated / 2 semi-automated / 2 manual).
"""

from __future__ import annotations

from pathlib import Path

from iotsam.documents import serialize_document
from iotsam.filtering import filter_catalog
from iotsam.levels import (
    AuthorizationAccessLevel as Auth,
    DataSensitivityLevel as Sens,
    PhysicalAccessLevel as Phys,
    SecurityImpactLevel as Impact,
    VerificationLevel as Verif,
)
from iotsam.mockdevice import MockDeviceConfig, MockService
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

FIXTURES = Path(__file__).resolve().parent.parent / "fixtures"


def selector(kind: ComponentKind | None, *constraints) -> ComponentSelector:
    return ComponentSelector(kind, tuple(
        AttributeConstraint(name, op, value) for name, op, value in constraints
    ))


def eq(name: str, value) -> tuple:
    return (name, SelectorOperator.EQ, value)


def present(name: str) -> tuple:
    return (name, SelectorOperator.PRESENT, None)


SMART_LOCK = DeviceModel(
    device_id="smart-lock-01",
    display_name="AcmeLock AL-300 Smart Deadbolt",
    components=(
        DeviceComponent("sensor-door", ComponentKind.SENSOR, {"measures": "door-state"}),
        DeviceComponent("act-bolt", ComponentKind.ACTUATOR, {"drives": "deadbolt"}),
        DeviceComponent("mcu", ComponentKind.PROCESSING_UNIT,
                        {"arch": "armv7", "debug-header": "uart"}),
        DeviceComponent("wl-wifi", ComponentKind.WIRELESS_INTERFACE,
                        {"protocol": "wifi", "ssid": "LOCK-SETUP-AP",
                         "provisioning-gateway": "192.168.4.1"}),
        DeviceComponent("nw-telnet", ComponentKind.NETWORK_SERVICE,
                        {"host": "127.0.0.1", "port": 23, "service": "telnet"}),
        DeviceComponent("nw-https", ComponentKind.NETWORK_SERVICE,
                        {"host": "127.0.0.1", "port": 8443, "service": "https"}),
    ),
    metadata={"vendor": "Acme Devices", "model": "AL-300", "firmware-version": "2.4.1"},
)

SMART_BULB = DeviceModel(
    device_id="smart-bulb-01",
    display_name="Lumina Smart Bulb",
    components=(
        DeviceComponent("led", ComponentKind.ACTUATOR, {"drives": "led-array"}),
        DeviceComponent("mcu", ComponentKind.PROCESSING_UNIT, {"arch": "xtensa"}),
        DeviceComponent("wl-wifi", ComponentKind.WIRELESS_INTERFACE, {"protocol": "wifi"}),
        DeviceComponent("nw-telnet", ComponentKind.NETWORK_SERVICE,
                        {"host": "127.0.0.1", "port": 23, "service": "telnet"}),
    ),
    metadata={"vendor": "Lumina", "firmware-version": "1.0.8"},
)

LAB_PROFILE = TestingProfile(
    profile_id="lab",
    granted_physical=Phys.NONINVASIVE,
    granted_authorization=Auth.ADMIN,
    device_data_sensitivity=Sens.PERSONAL,
    device_security_impact=Impact.SAFETY_LIMITED,
    verification_level=Verif.STANDARD,
    ecosystem=(
        EcosystemSystem("cloud-api", EcosystemKind.CLOUD_BACKEND,
                        "https://cloud.acme-devices.example", True),
        EcosystemSystem("companion-app", EcosystemKind.MOBILE_APP, "com.acme.lock", True),
    ),
    verification_overrides={ComponentKind.USER_INTERFACE: Verif.RIGOROUS},
)

HOME_PROFILE = TestingProfile(
    profile_id="home",
    granted_physical=Phys.ADJACENT,
    granted_authorization=Auth.USER,
    device_data_sensitivity=Sens.BEHAVIORAL,
    device_security_impact=Impact.INCONVENIENCE,
    verification_level=Verif.OVERALL,
    ecosystem=(
        EcosystemSystem("cloud-api", EcosystemKind.CLOUD_BACKEND,
                        "https://cloud.lumina.example", False),
    ),
)

CASES = (
    TestCase(
        case_id="TC-NET-001",
        title="Telnet remote administration service reachable",
        description=(
            "A cleartext telnet service allows remote administration without "
            "transport protection. The declared service port accepting "
            "connections is a direct finding."
        ),
        required_physical=Phys.REMOTE,
        required_authorization=Auth.UNAUTHORIZED,
        min_data_sensitivity=Sens.NONPERSONAL,
        min_security_impact=Impact.PROPERTY_PRIVACY,
        verification_levels=frozenset({Verif.OVERALL, Verif.STANDARD, Verif.RIGOROUS}),
        selector=selector(ComponentKind.NETWORK_SERVICE, eq("service", "telnet")),
        severity=Severity.CRITICAL,
        execution_mode=ExecutionMode.AUTOMATED,
        executor_ref=ExecutorRef("net.port-scan", {
            "host": "{{attr:host}}",
            "port-start": "{{attr:port}}",
            "port-end": "{{attr:port}}",
        }),
        references=("ETSI EN 303 645 5.6-1", "OWASP-IoT-Top10 #2"),
    ),
    TestCase(
        case_id="TC-NET-002",
        title="TLS certificate expired",
        description=(
            "The TLS endpoint presents a certificate past its validity "
            "period, breaking authenticity guarantees and training users to "
            "bypass warnings."
        ),
        required_physical=Phys.REMOTE,
        required_authorization=Auth.UNAUTHORIZED,
        min_data_sensitivity=Sens.NONPERSONAL,
        min_security_impact=Impact.INCONVENIENCE,
        verification_levels=frozenset({Verif.OVERALL, Verif.STANDARD, Verif.RIGOROUS}),
        selector=selector(ComponentKind.NETWORK_SERVICE, eq("service", "https")),
        severity=Severity.MINOR,
        execution_mode=ExecutionMode.AUTOMATED,
        executor_ref=ExecutorRef("net.tls-posture", {
            "host": "{{attr:host}}", "port": "{{attr:port}}",
        }),
        references=("ETSI EN 303 645 5.5-1",),
    ),
    TestCase(
        case_id="TC-NET-003",
        title="Legacy TLS protocol versions accepted",
        description=(
            "The TLS endpoint completes handshakes at TLS 1.0 or 1.1, which "
            "are deprecated and downgrade-prone."
        ),
        required_physical=Phys.REMOTE,
        required_authorization=Auth.UNAUTHORIZED,
        min_data_sensitivity=Sens.NONPERSONAL,
        min_security_impact=Impact.PROPERTY_PRIVACY,
        verification_levels=frozenset({Verif.STANDARD, Verif.RIGOROUS, Verif.FORMAL}),
        selector=selector(ComponentKind.NETWORK_SERVICE, eq("service", "https")),
        severity=Severity.MAJOR,
        execution_mode=ExecutionMode.AUTOMATED,
        executor_ref=ExecutorRef("net.tls-posture", {
            "host": "{{attr:host}}", "port": "{{attr:port}}",
        }),
        references=("ETSI EN 303 645 5.5-1", "OWASP-IoT-Top10 #7"),
    ),
    TestCase(
        case_id="TC-NET-004",
        title="Factory-default credentials accepted",
        description=(
            "The administration service accepts a credential pair from the "
            "common factory-default list."
        ),
        required_physical=Phys.REMOTE,
        required_authorization=Auth.UNAUTHORIZED,
        min_data_sensitivity=Sens.NONPERSONAL,
        min_security_impact=Impact.PROPERTY_PRIVACY,
        verification_levels=frozenset({Verif.OVERALL, Verif.STANDARD,
                                       Verif.RIGOROUS, Verif.FORMAL}),
        selector=selector(ComponentKind.NETWORK_SERVICE, eq("service", "telnet")),
        severity=Severity.CRITICAL,
        execution_mode=ExecutionMode.AUTOMATED,
        executor_ref=ExecutorRef("net.credential-check", {
            "host": "{{attr:host}}", "port": "{{attr:port}}",
            "service-kind": "telnet",
        }),
        references=("OWASP-IoT-Top10 #1", "ETSI EN 303 645 5.1-1"),
    ),
    TestCase(
        case_id="TC-NET-005",
        title="Service banner discloses software version",
        description=(
            "The service greeting leaks a software version string, easing "
            "targeted exploitation of known vulnerabilities."
        ),
        required_physical=Phys.REMOTE,
        required_authorization=Auth.UNAUTHORIZED,
        min_data_sensitivity=Sens.NONPERSONAL,
        min_security_impact=Impact.INCONVENIENCE,
        verification_levels=frozenset({Verif.STANDARD, Verif.RIGOROUS}),
        selector=selector(ComponentKind.NETWORK_SERVICE, eq("service", "telnet")),
        severity=Severity.MINOR,
        execution_mode=ExecutionMode.AUTOMATED,
        executor_ref=ExecutorRef("net.banner-grab", {
            "host": "{{attr:host}}", "port": "{{attr:port}}",
        }),
        references=("OWASP-IoT-Top10 #2",),
    ),
    TestCase(
        case_id="TC-NET-006",
        title="No lockout or throttling on repeated failed logins",
        description=(
            "Repeated failed login attempts are not throttled, locked out, "
            "or alerted on, enabling online credential guessing."
        ),
        required_physical=Phys.REMOTE,
        required_authorization=Auth.UNAUTHORIZED,
        min_data_sensitivity=Sens.NONPERSONAL,
        min_security_impact=Impact.INCONVENIENCE,
        verification_levels=frozenset({Verif.OVERALL, Verif.STANDARD, Verif.RIGOROUS}),
        selector=selector(ComponentKind.NETWORK_SERVICE, eq("service", "telnet")),
        severity=Severity.MAJOR,
        execution_mode=ExecutionMode.SEMI_AUTOMATED,
        executor_ref=ExecutorRef("net.credential-check", {
            "host": "{{attr:host}}", "port": "{{attr:port}}",
            "service-kind": "telnet",
        }),
        manual_steps=(
            ManualStep(
                "Trigger a burst of failed logins against {{attr:host}}:{{attr:port}} "
                "by running the attached credential probe twice in a row.",
                "All pairs rejected, or a lockout engages",
            ),
            ManualStep(
                "Attempt one further interactive login with a wrong password.",
                "Connection is delayed, challenged, or refused after the burst",
            ),
            ManualStep(
                "Record whether the device throttled, locked, or raised an alert.",
                "Some throttling or lockout behavior observed",
            ),
        ),
        references=("ETSI EN 303 645 5.1-3",),
    ),
    TestCase(
        case_id="TC-RF-007",
        title="Wi-Fi provisioning access point is unprotected",
        description=(
            "The device's setup access point lets nearby attackers join the "
            "provisioning flow without proof of possession."
        ),
        required_physical=Phys.ADJACENT,
        required_authorization=Auth.UNAUTHORIZED,
        min_data_sensitivity=Sens.NONPERSONAL,
        min_security_impact=Impact.PROPERTY_PRIVACY,
        verification_levels=frozenset({Verif.STANDARD, Verif.RIGOROUS}),
        # guides and parameters template ssid + provisioning-gateway, so the
        # selector must require them
        selector=selector(ComponentKind.WIRELESS_INTERFACE, eq("protocol", "wifi"),
                          present("ssid"), present("provisioning-gateway")),
        severity=Severity.MAJOR,
        execution_mode=ExecutionMode.SEMI_AUTOMATED,
        executor_ref=ExecutorRef("net.port-scan", {
            "host": "{{attr:provisioning-gateway}}",
            "port-start": 80, "port-end": 80,
        }),
        manual_steps=(
            ManualStep(
                "Put the device into provisioning mode and join its setup "
                "network {{attr:ssid}}.",
                "Setup access point is joinable",
            ),
            ManualStep(
                "From the setup network, run the attached scan against the "
                "provisioning gateway {{attr:provisioning-gateway}}.",
                "Reachability of the provisioning endpoint recorded",
            ),
            ManualStep(
                "Check whether the provisioning flow demands proof of "
                "possession (button press, printed code).",
                "Unauthenticated provisioning is not possible",
            ),
        ),
        references=("ETSI EN 303 645 5.4-2",),
    ),
    TestCase(
        case_id="TC-PHY-008",
        title="Accessible debug interface on the main controller",
        description=(
            "Externally reachable debug ports or pads expose a console that "
            "may bypass authentication entirely."
        ),
        required_physical=Phys.NONINVASIVE,
        required_authorization=Auth.UNAUTHORIZED,
        min_data_sensitivity=Sens.NONPERSONAL,
        min_security_impact=Impact.PROPERTY_PRIVACY,
        verification_levels=frozenset({Verif.STANDARD, Verif.RIGOROUS, Verif.FORMAL}),
        selector=selector(ComponentKind.PROCESSING_UNIT, present("debug-header")),
        severity=Severity.MAJOR,
        execution_mode=ExecutionMode.MANUAL,
        manual_steps=(
            ManualStep(
                "With the {{device:vendor}} {{device:model}} in hand, inspect "
                "the housing for exposed ports or pads without opening the "
                "enclosure.",
                "No externally reachable debug port",
            ),
            ManualStep(
                "Probe the {{attr:debug-header}} header with a logic analyzer "
                "for console output.",
                "No console output, or the console requires authentication",
            ),
            ManualStep(
                "Attempt to interrupt boot and obtain a shell over the "
                "{{attr:debug-header}} console.",
                "Boot cannot be interrupted into a privileged shell",
            ),
        ),
        references=("OWASP-ISTG PHY-001",),
    ),
    TestCase(
        case_id="TC-PHY-009",
        title="Factory reset leaves credentials or user data behind",
        description=(
            "After the documented factory-reset procedure, previous "
            "credentials, schedules, or activity logs remain recoverable."
        ),
        required_physical=Phys.NONINVASIVE,
        required_authorization=Auth.USER,
        min_data_sensitivity=Sens.BEHAVIORAL,
        min_security_impact=Impact.PROPERTY_PRIVACY,
        verification_levels=frozenset({Verif.OVERALL, Verif.STANDARD, Verif.RIGOROUS}),
        selector=selector(ComponentKind.PROCESSING_UNIT),
        severity=Severity.MAJOR,
        execution_mode=ExecutionMode.MANUAL,
        manual_steps=(
            ManualStep(
                "Pair the device, generate user activity, then perform the "
                "vendor factory-reset procedure.",
                "Reset completes as documented",
            ),
            ManualStep(
                "Re-pair the device and check whether previous credentials, "
                "schedules, or logs are still present.",
                "No prior data visible",
            ),
            ManualStep(
                "Verify the previously paired mobile-app account can no "
                "longer control the device.",
                "Old account is revoked",
            ),
        ),
        references=("ETSI EN 303 645 5.11-1",),
    ),
    TestCase(
        case_id="TC-RF-010",
        title="Zigbee network key observable during pairing",
        description=(
            "The Zigbee join procedure transports the network key under the "
            "well-known default trust-center key, recoverable by a sniffer "
            "in radio range."
        ),
        required_physical=Phys.ADJACENT,
        required_authorization=Auth.UNAUTHORIZED,
        min_data_sensitivity=Sens.NONPERSONAL,
        min_security_impact=Impact.PROPERTY_PRIVACY,
        verification_levels=frozenset({Verif.STANDARD, Verif.RIGOROUS}),
        selector=selector(ComponentKind.WIRELESS_INTERFACE, eq("protocol", "zigbee")),
        severity=Severity.MAJOR,
        execution_mode=ExecutionMode.MANUAL,
        manual_steps=(
            ManualStep(
                "Start a sniffer on the pairing channel before initiating pairing.",
                "Capture running",
            ),
            ManualStep(
                "Initiate pairing and capture the key-transport frames.",
                "Join procedure captured",
            ),
            ManualStep(
                "Check whether the network key is recoverable from the capture.",
                "Key not recoverable",
            ),
        ),
        references=("ETSI EN 303 645 5.5-1",),
    ),
    TestCase(
        case_id="TC-PHY-011",
        title="Firmware extractable via chip-off flash removal",
        description=(
            "With the enclosure opened and the flash desoldered, firmware "
            "and stored secrets can be read out unencrypted."
        ),
        required_physical=Phys.INVASIVE,
        required_authorization=Auth.UNAUTHORIZED,
        min_data_sensitivity=Sens.NONPERSONAL,
        min_security_impact=Impact.PROPERTY_PRIVACY,
        verification_levels=frozenset({Verif.STANDARD, Verif.RIGOROUS, Verif.FORMAL}),
        selector=selector(ComponentKind.PROCESSING_UNIT),
        severity=Severity.MAJOR,
        execution_mode=ExecutionMode.MANUAL,
        manual_steps=(
            ManualStep(
                "Desolder the external flash and dump it with a chip reader.",
                "Dump obtained",
            ),
            ManualStep(
                "Inspect the dump for unencrypted filesystems and secrets.",
                "Storage is encrypted at rest",
            ),
            ManualStep(
                "Record whether keys or passwords are recoverable.",
                "No secrets recoverable",
            ),
        ),
        references=("OWASP-ISTG FW-001",),
    ),
    TestCase(
        case_id="TC-NET-012",
        title="Pairing protocol state machine formally verified",
        description=(
            "The pairing handshake's security properties are verified with a "
            "protocol analyzer against the vendor specification."
        ),
        required_physical=Phys.REMOTE,
        required_authorization=Auth.UNAUTHORIZED,
        min_data_sensitivity=Sens.NONPERSONAL,
        min_security_impact=Impact.INCONVENIENCE,
        verification_levels=frozenset({Verif.FORMAL}),
        selector=selector(ComponentKind.NETWORK_SERVICE, eq("service", "https")),
        severity=Severity.MINOR,
        execution_mode=ExecutionMode.MANUAL,
        manual_steps=(
            ManualStep(
                "Obtain the vendor's specification of the pairing handshake.",
                "Specification available",
            ),
            ManualStep(
                "Model the handshake and verify the claimed properties with "
                "a protocol analyzer.",
                "All claimed properties verified",
            ),
            ManualStep(
                "Archive the verification transcript as evidence.",
                "Transcript archived",
            ),
        ),
        references=("ETSI EN 303 645 5.5-8",),
    ),
)

MINI_CATALOG = TestCaseCatalog("ciot-mini", "1.0.0", CASES)
EMPTY_CATALOG = TestCaseCatalog("empty", "1.0.0", ())

LAB_SCHEME = AssessmentScheme(
    scheme_id="lab-default",
    major_fail_threshold=1,
    minor_fail_threshold=2,
    inconclusive_policy=InconclusivePolicy.TREAT_AS_FAIL,
)

SMARTLOCK_SIM = MockDeviceConfig(
    mock_id="smartlock-sim",
    services=(
        MockService(
            service_id="telnet", protocol="telnet", port=0,
            banner="lock-ctl interactive console",
            accepted_credentials=(("admin", "admin"),),
        ),
        MockService(
            service_id="https", protocol="tls", port=0,
            tls_versions=("tls1.0",), certificate="self-signed",
        ),
    ),
)

FILES = {
    "smart-lock.devicemodel.json": SMART_LOCK,
    "smart-bulb.devicemodel.json": SMART_BULB,
    "lab.profile.json": LAB_PROFILE,
    "home.profile.json": HOME_PROFILE,
    "mini.catalog.json": MINI_CATALOG,
    "empty.catalog.json": EMPTY_CATALOG,
    "lab.scheme.json": LAB_SCHEME,
    "smartlock-sim.mockdevice.json": SMARTLOCK_SIM,
}


def main() -> None:
    FIXTURES.mkdir(exist_ok=True)
    for name, value in FILES.items():
        (FIXTURES / name).write_bytes(serialize_document(value))
        print(f"wrote fixtures/{name}")

    plan = filter_catalog(MINI_CATALOG, SMART_LOCK, LAB_PROFILE)
    modes = [e.execution_mode.value for e in plan.entries]
    print(f"lock plan: {len(plan.entries)} entries "
          f"({modes.count('AUTOMATED')} automated, "
          f"{modes.count('SEMI_AUTOMATED')} semi, {modes.count('MANUAL')} manual)")
    assert len(plan.entries) == 9, [e.plan_entry_id for e in plan.entries]
    assert modes.count("AUTOMATED") == 5
    assert modes.count("SEMI_AUTOMATED") == 2
    assert modes.count("MANUAL") == 2

    bulb_plan = filter_catalog(MINI_CATALOG, SMART_BULB, HOME_PROFILE)
    print(f"bulb plan: {[e.plan_entry_id for e in bulb_plan.entries]}")
    assert [e.plan_entry_id for e in bulb_plan.entries] == ["TC-NET-006@nw-telnet"]


if __name__ == "__main__":
    main()
