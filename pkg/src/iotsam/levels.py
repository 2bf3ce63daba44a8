"""Ordinal level scales used by testing profiles and test-case prerequisites.

Each scale is a total order over exactly four named ranks. Comparisons are
rank-based and only defined within one scale; mixing scales is a programming
error and raises ``TypeError``.
"""

from __future__ import annotations

import enum


class OrdinalLevel(enum.Enum):
    """Base for the four-rank ordinal scales.

    Members compare by rank within their own scale only. Cross-scale
    comparisons return ``NotImplemented`` so that ``<=`` et al. raise.
    """

    @property
    def rank(self) -> int:
        return self.value

    def __le__(self, other: object):
        if self.__class__ is not other.__class__:
            return NotImplemented
        return self.value <= other.value  # type: ignore[attr-defined]

    def __lt__(self, other: object):
        if self.__class__ is not other.__class__:
            return NotImplemented
        return self.value < other.value  # type: ignore[attr-defined]

    def __ge__(self, other: object):
        if self.__class__ is not other.__class__:
            return NotImplemented
        return self.value >= other.value  # type: ignore[attr-defined]

    def __gt__(self, other: object):
        if self.__class__ is not other.__class__:
            return NotImplemented
        return self.value > other.value  # type: ignore[attr-defined]


class PhysicalAccessLevel(OrdinalLevel):
    """How close the assumed attacker can get to the device."""

    REMOTE = 1
    ADJACENT = 2
    NONINVASIVE = 3
    INVASIVE = 4


class AuthorizationAccessLevel(OrdinalLevel):
    """Digital privileges granted to the assumed attacker."""

    UNAUTHORIZED = 1
    USER = 2
    ADMIN = 3
    MANUFACTURER = 4


class DataSensitivityLevel(OrdinalLevel):
    """Sensitivity classification of the data the device handles."""

    NONPERSONAL = 1
    BEHAVIORAL = 2
    PERSONAL = 3
    CRITICAL = 4


class SecurityImpactLevel(OrdinalLevel):
    """Impact of a security breach of the device on the overall system."""

    INCONVENIENCE = 1
    PROPERTY_PRIVACY = 2
    SAFETY_LIMITED = 3
    SAFETY_CRITICAL = 4


class VerificationLevel(OrdinalLevel):
    """Rigor tier with which tests are executed."""

    OVERALL = 1
    STANDARD = 2
    RIGOROUS = 3
    FORMAL = 4


ALL_SCALES = (
    PhysicalAccessLevel,
    AuthorizationAccessLevel,
    DataSensitivityLevel,
    SecurityImpactLevel,
    VerificationLevel,
)


def level_leq(a: OrdinalLevel, b: OrdinalLevel) -> bool:
    """True iff ``a`` ranks at or below ``b`` on the same scale.

    Raises ``TypeError`` for operands from different scales.
    """
    if a.__class__ is not b.__class__:
        raise TypeError(
            f"cannot compare levels from different scales: "
            f"{a.__class__.__name__} vs {b.__class__.__name__}"
        )
    return a.value <= b.value
