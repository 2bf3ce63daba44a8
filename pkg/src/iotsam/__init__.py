"""Semi-automated model-based security assessment pipeline for consumer IoT devices.

Pipeline: a machine-readable test-case catalog is filtered against a device
model and a testing profile into a device-specific test plan; automated
entries run against the device over the network, manual entries are recorded
by an assessor; per-case verdicts aggregate under an assessment scheme into a
binary secure/insecure result.
"""

from . import assessment, execution, filtering, mockdevice, model, probes, store  # noqa: F401
from .documents import (  # noqa: F401
    DocumentError,
    DocumentInvariantError,
    DocumentSchemaError,
    DocumentSyntaxError,
    parse_document,
    serialize_document,
)
from .levels import (  # noqa: F401
    AuthorizationAccessLevel,
    DataSensitivityLevel,
    PhysicalAccessLevel,
    SecurityImpactLevel,
    VerificationLevel,
    level_leq,
)

__version__ = "0.1.0"
