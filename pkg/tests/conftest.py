from __future__ import annotations

from pathlib import Path

import pytest

from iotsam.documents import parse_document
from iotsam.mockdevice import MockDevice
from iotsam.model import DeviceComponent, DeviceModel

FIXTURES = Path(__file__).resolve().parent.parent / "fixtures"


def load_fixture(name: str):
    return parse_document((FIXTURES / name).read_bytes())


@pytest.fixture(scope="session")
def smart_lock() -> DeviceModel:
    return load_fixture("smart-lock.devicemodel.json")


@pytest.fixture(scope="session")
def smart_bulb() -> DeviceModel:
    return load_fixture("smart-bulb.devicemodel.json")


@pytest.fixture(scope="session")
def lab_profile():
    return load_fixture("lab.profile.json")


@pytest.fixture(scope="session")
def home_profile():
    return load_fixture("home.profile.json")


@pytest.fixture(scope="session")
def mini_catalog():
    return load_fixture("mini.catalog.json")


@pytest.fixture(scope="session")
def lab_scheme():
    return load_fixture("lab.scheme.json")


@pytest.fixture(scope="session")
def smartlock_sim_config():
    return load_fixture("smartlock-sim.mockdevice.json")


@pytest.fixture(scope="session")
def smartlock_sim(smartlock_sim_config):
    """The insecure smart-lock mock: telnet + admin/admin + TLS 1.0 only."""
    with MockDevice(smartlock_sim_config) as device:
        yield device


def retarget_lock_model(model: DeviceModel, mock: MockDevice) -> DeviceModel:
    """The bundled lock model with service ports rewritten to the live mock."""
    components = []
    for component in model.components:
        attributes = dict(component.attributes)
        if component.component_id == "nw-telnet":
            attributes["host"] = mock.host
            attributes["port"] = mock.ports["telnet"]
        elif component.component_id == "nw-https":
            attributes["host"] = mock.host
            attributes["port"] = mock.ports["https"]
        components.append(DeviceComponent(component.component_id, component.kind, attributes))
    return DeviceModel(model.device_id, model.display_name, tuple(components), model.metadata)


@pytest.fixture(scope="session")
def live_lock_model(smart_lock, smartlock_sim) -> DeviceModel:
    return retarget_lock_model(smart_lock, smartlock_sim)
