import json
import random

import pytest
from hypothesis import given, settings, strategies as st

from iotsam.documents import (
    DocumentInvariantError,
    DocumentSchemaError,
    DocumentSyntaxError,
    parse_document,
    serialize_document,
)
from iotsam.levels import VerificationLevel
from iotsam.model import ComponentKind, ExecutionMode, Severity

from .conftest import FIXTURES, load_fixture
from .generators import random_catalog, random_device, random_profile, random_scheme


def test_smart_lock_fixture_shape(smart_lock):
    assert len(smart_lock.components) == 6
    telnet = [
        c for c in smart_lock.components
        if c.kind is ComponentKind.NETWORK_SERVICE and c.attributes.get("service") == "telnet"
    ]
    assert len(telnet) == 1
    assert telnet[0].attributes["port"] == 23


def test_empty_bytes_is_a_syntax_error():
    with pytest.raises(DocumentSyntaxError):
        parse_document(b"")
    with pytest.raises(DocumentSyntaxError):
        parse_document(b"   \n ")


def test_malformed_json_is_a_syntax_error():
    with pytest.raises(DocumentSyntaxError):
        parse_document(b'{"kind": "device-model",')


def test_duplicate_case_id_names_the_offender(mini_catalog):
    doc = json.loads(serialize_document(mini_catalog))
    case = dict(doc["cases"][0])
    case["case-id"] = "TC-1"
    doc["cases"] = [case, dict(case)]
    with pytest.raises(DocumentInvariantError) as excinfo:
        parse_document(json.dumps(doc))
    assert "TC-1" in str(excinfo.value)


def test_unknown_top_level_field_rejected(smart_lock):
    doc = json.loads(serialize_document(smart_lock))
    doc["surprise"] = 1
    with pytest.raises(DocumentSchemaError) as excinfo:
        parse_document(json.dumps(doc))
    assert "surprise" in str(excinfo.value)


def test_missing_field_error_carries_path(smart_lock):
    doc = json.loads(serialize_document(smart_lock))
    del doc["components"][0]["component-id"]
    with pytest.raises(DocumentSchemaError) as excinfo:
        parse_document(json.dumps(doc))
    assert "components[0].component-id" in str(excinfo.value)


@pytest.mark.parametrize("mutation,expected_fragment", [
    ({"kind": "no-such-kind"}, "kind"),
    ({"schema-version": "2"}, "schema-version"),
])
def test_envelope_violations(smart_lock, mutation, expected_fragment):
    doc = json.loads(serialize_document(smart_lock))
    doc.update(mutation)
    with pytest.raises(DocumentSchemaError) as excinfo:
        parse_document(json.dumps(doc))
    assert expected_fragment in str(excinfo.value)


def test_expected_kind_mismatch(smart_lock):
    data = serialize_document(smart_lock)
    with pytest.raises(DocumentSchemaError):
        parse_document(data, "test-catalog")
    assert parse_document(data, "device-model") == smart_lock


@pytest.mark.parametrize("token_path,bad_value", [
    (("components", 0, "kind"), "GIZMO"),
    (("components", 3, "attributes", "protocol"), "smoke-signals"),
])
def test_closed_enumeration_tokens_fail_with_schema(smart_lock, token_path, bad_value):
    doc = json.loads(serialize_document(smart_lock))
    target = doc
    for key in token_path[:-1]:
        target = target[key]
    target[token_path[-1]] = bad_value
    with pytest.raises(DocumentSchemaError):
        parse_document(json.dumps(doc))


def test_severity_token_outside_closed_set(mini_catalog):
    doc = json.loads(serialize_document(mini_catalog))
    doc["cases"][0]["severity"] = "COSMIC"
    with pytest.raises(DocumentSchemaError):
        parse_document(json.dumps(doc))


def test_network_service_requires_host_port_service(smart_lock):
    doc = json.loads(serialize_document(smart_lock))
    del doc["components"][4]["attributes"]["port"]
    with pytest.raises(DocumentInvariantError) as excinfo:
        parse_document(json.dumps(doc))
    assert "nw-telnet" in str(excinfo.value)


def test_port_out_of_range_is_an_invariant_error(smart_lock):
    doc = json.loads(serialize_document(smart_lock))
    doc["components"][4]["attributes"]["port"] = 70000
    with pytest.raises(DocumentInvariantError):
        parse_document(json.dumps(doc))


def test_mode_field_consistency(mini_catalog):
    doc = json.loads(serialize_document(mini_catalog))
    automated = next(c for c in doc["cases"] if c["execution-mode"] == "AUTOMATED")
    automated = dict(automated)
    del automated["executor-ref"]
    broken = dict(doc)
    broken["cases"] = [automated]
    with pytest.raises(DocumentInvariantError) as excinfo:
        parse_document(json.dumps(broken))
    assert "executor-ref" in str(excinfo.value)

    manual = dict(next(c for c in doc["cases"] if c["execution-mode"] == "MANUAL"))
    del manual["manual-steps"]
    broken["cases"] = [manual]
    with pytest.raises(DocumentInvariantError):
        parse_document(json.dumps(broken))


def test_scheme_fixed_rules_are_not_configurable(lab_scheme):
    doc = json.loads(serialize_document(lab_scheme))
    doc["critical-rule"] = "SOFT_FAIL"
    with pytest.raises(DocumentSchemaError):
        parse_document(json.dumps(doc))
    doc["critical-rule"] = "AUTO_FAIL"
    doc["major-fail-threshold"] = -1
    with pytest.raises(DocumentInvariantError):
        parse_document(json.dumps(doc))


def test_selector_constraint_value_rules(mini_catalog):
    doc = json.loads(serialize_document(mini_catalog))
    case = dict(doc["cases"][0])
    selector = {"kind": "NETWORK_SERVICE", "constraints": [
        {"attribute-name": "service", "operator": "PRESENT", "value": "telnet"},
    ]}
    case["selector"] = selector
    doc["cases"] = [case]
    with pytest.raises(DocumentInvariantError):
        parse_document(json.dumps(doc))
    selector["constraints"] = [{"attribute-name": "service", "operator": "EQ"}]
    with pytest.raises(DocumentInvariantError):
        parse_document(json.dumps(doc))


def test_rank_one_profile_serializes_the_four_level_names():
    profile = load_fixture("home.profile.json")
    from iotsam.levels import (
        AuthorizationAccessLevel,
        DataSensitivityLevel,
        PhysicalAccessLevel,
        SecurityImpactLevel,
    )
    from iotsam.model import TestingProfile

    floor = TestingProfile(
        profile_id="floor",
        granted_physical=PhysicalAccessLevel.REMOTE,
        granted_authorization=AuthorizationAccessLevel.UNAUTHORIZED,
        device_data_sensitivity=DataSensitivityLevel.NONPERSONAL,
        device_security_impact=SecurityImpactLevel.INCONVENIENCE,
        verification_level=profile.verification_level,
    )
    text = serialize_document(floor).decode("utf-8")
    for name in ("REMOTE", "UNAUTHORIZED", "NONPERSONAL", "INCONVENIENCE"):
        assert name in text


@pytest.mark.parametrize("name", [
    "smart-lock.devicemodel.json", "smart-bulb.devicemodel.json",
    "lab.profile.json", "home.profile.json", "mini.catalog.json",
    "empty.catalog.json", "lab.scheme.json", "smartlock-sim.mockdevice.json",
])
def test_fixture_round_trips_are_byte_exact(name):
    data = (FIXTURES / name).read_bytes()
    value = parse_document(data)
    assert serialize_document(value) == data
    assert parse_document(serialize_document(value)) == value


def test_random_catalogs_round_trip_byte_identical():
    rng = random.Random(20260810)
    for _ in range(60):
        catalog = random_catalog(rng, max_cases=15)
        first = serialize_document(catalog)
        parsed = parse_document(first)
        assert parsed == catalog
        assert serialize_document(parsed) == first


@pytest.mark.parametrize("generator", [random_device, random_profile, random_scheme])
def test_random_documents_round_trip(generator):
    rng = random.Random(7)
    for _ in range(50):
        value = generator(rng)
        assert parse_document(serialize_document(value)) == value


@settings(max_examples=60, deadline=None)
@given(st.integers(min_value=0, max_value=2**32 - 1))
def test_round_trip_holds_for_arbitrary_seeds(seed):
    rng = random.Random(seed)
    catalog = random_catalog(rng, max_cases=6)
    assert parse_document(serialize_document(catalog)) == catalog


def test_verification_levels_serialize_in_rank_order(mini_catalog):
    doc = json.loads(serialize_document(mini_catalog))
    ranks = {level.name: level.value for level in VerificationLevel}
    for case in doc["cases"]:
        names = case["verification-levels"]
        assert names == sorted(names, key=ranks.__getitem__)


def test_enums_used_by_cases_are_closed(mini_catalog):
    for case in mini_catalog.cases:
        assert case.severity in Severity
        assert case.execution_mode in ExecutionMode
