"""Consensus issuance yield curves.

The current schedule pays ``cf / sqrt(D)`` per staked ETH per year. The tempered
schedule damps it by ``1 / (1 + k D)``. Both are covered by one parameterisation.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import ConfigError, DomainError

CF_DEFAULT = 2.6 * 64
K_TEMPERED = 2.0 ** -25


@dataclass(frozen=True)
class IssuanceSchedule:
    cf: float = CF_DEFAULT
    k: float = 0.0
    name: str = "custom"

    def __post_init__(self):
        if not (self.cf > 0 and math.isfinite(self.cf)):
            raise ConfigError("issuance.cf", f"must be a positive finite number, got {self.cf!r}")
        if not (self.k >= 0 and math.isfinite(self.k)):
            raise ConfigError("issuance.k", f"must be a non-negative finite number, got {self.k!r}")

    def rate(self, total_stake: float) -> float:
        return issuance_yield(self, total_stake)

    def derivative(self, total_stake: float) -> float:
        return yield_derivative(self, total_stake)


CURRENT = IssuanceSchedule(CF_DEFAULT, 0.0, "current")
TEMPERED = IssuanceSchedule(CF_DEFAULT, K_TEMPERED, "tempered")

SCHEDULES = {"current": CURRENT, "tempered": TEMPERED}


def get_schedule(name: str, cf: float | None = None, k: float | None = None) -> IssuanceSchedule:
    """Look up a named schedule; ``"custom"`` builds one from ``cf`` and ``k``."""
    if name == "custom":
        if cf is None or k is None:
            raise ConfigError("issuance", "custom schedule needs both cf and k")
        return IssuanceSchedule(float(cf), float(k), "custom")
    try:
        return SCHEDULES[name]
    except KeyError:
        raise ConfigError("issuance.schedule", f"unknown schedule {name!r}") from None


def _check_stake(total_stake):
    if not total_stake > 0:
        raise DomainError(f"total stake must be positive, got {total_stake!r}")


def issuance_yield(schedule: IssuanceSchedule, total_stake: float) -> float:
    """Annual consensus yield (a fraction) at aggregate stake ``total_stake`` ETH."""
    _check_stake(total_stake)
    return schedule.cf / (math.sqrt(total_stake) * (1.0 + schedule.k * total_stake))


def yield_derivative(schedule: IssuanceSchedule, total_stake: float) -> float:
    """d(yield)/dD, analytic."""
    _check_stake(total_stake)
    y = issuance_yield(schedule, total_stake)
    k = schedule.k
    return -y * (0.5 / total_stake + k / (1.0 + k * total_stake))
