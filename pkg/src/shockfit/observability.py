"""Run log: stage events and acceptance checks.

Every enabled check is recorded exactly once with its verdict and a signed
margin (positive means passed with room to spare).  Stage events keep the
order in which a scenario went through its pipeline.
"""

from __future__ import annotations

import logging
import math
import time
from typing import Any, Dict, List, Optional

logger = logging.getLogger(__name__)

# ── Check names ───────────────────────────────────────────────────────────────

CHECK_NAMES = frozenset({
    # Admissibility
    "admissible",
    # Decay rates
    "rate_left",
    "rate_right",
    "gradient_rate_left",
    "gradient_rate_right",
    "sup_envelope",
    "tv_rate",
    # Shock path
    "lax_margin",
    "rh_residual",
    "jump_sign",
    "phase_rate",
    "phase_closed_form",
    "merged_speed",
    # Merge
    "merge_time",
    "merge_oracle",
    # Blow-up
    "blowup_time",
    "bounded_slope",
    # Oracle
    "oracle_l1",
    "oracle_order",
    # Resolvent / spectrum
    "resolvent_residual",
    "resolvent_sup_bound",
    "resolvent_positivity",
    "spectrum_class",
    "spectrum_psi",
    # Extension
    "extension_bounds",
    "extension_gluing",
    # Outcome
    "fan_alive",
})


class DuplicateCheckError(ValueError):
    """Raised when the same check is recorded twice in one run."""


class CheckRecord:
    """Verdict of one acceptance check."""

    __slots__ = ("name", "passed", "margin", "value", "details")

    def __init__(
        self,
        name: str,
        passed: bool,
        margin: float,
        value: Optional[float] = None,
        details: Optional[Dict[str, Any]] = None,
    ) -> None:
        self.name = name
        self.passed = passed
        self.margin = margin
        self.value = value
        self.details = details or {}

    def as_dict(self) -> Dict[str, Any]:
        return {
            "name": self.name,
            "passed": self.passed,
            "margin": self.margin,
            "value": self.value,
            "details": dict(self.details),
        }

    def __repr__(self) -> str:
        return "CheckRecord({}, {}, margin={:.6g})".format(
            self.name, "pass" if self.passed else "FAIL", self.margin,
        )


class CheckLog:
    """Stage events and checks of one scenario run."""

    def __init__(self, scenario: str = "") -> None:
        self.scenario = scenario
        self._events = []  # type: List[Dict[str, Any]]
        self._checks = {}  # type: Dict[str, CheckRecord]

    def log_event(
        self,
        event_type: str,
        stage: Optional[str] = None,
        details: Optional[Dict[str, Any]] = None,
    ) -> None:
        event = {
            "ts": time.time(),
            "event_type": event_type,
            "stage": stage,
            "details": details or {},
        }
        self._events.append(event)
        logger.debug(
            "Event: scenario=%s type=%s stage=%s", self.scenario, event_type, stage or "-",
        )

    def check(
        self,
        name: str,
        margin: float,
        value: Optional[float] = None,
        details: Optional[Dict[str, Any]] = None,
    ) -> CheckRecord:
        """Record a check that passes when margin >= 0."""
        passed = not math.isnan(margin) and margin >= 0.0
        return self.record(name, passed, margin, value, details)

    def record(
        self,
        name: str,
        passed: bool,
        margin: float,
        value: Optional[float] = None,
        details: Optional[Dict[str, Any]] = None,
    ) -> CheckRecord:
        if name not in CHECK_NAMES:
            raise ValueError("unknown check: {}".format(name))
        if name in self._checks:
            raise DuplicateCheckError("check {} recorded twice".format(name))
        rec = CheckRecord(name, bool(passed), float(margin), value, details)
        self._checks[name] = rec
        if rec.passed:
            logger.info("Check %s: pass (margin %.4g)", name, rec.margin)
        else:
            logger.warning("Check %s: FAIL (margin %.4g)", name, rec.margin)
        return rec

    @property
    def checks(self) -> List[CheckRecord]:
        return [self._checks[k] for k in sorted(self._checks)]

    def __contains__(self, name: str) -> bool:
        return name in self._checks

    def __getitem__(self, name: str) -> CheckRecord:
        return self._checks[name]

    @property
    def all_passed(self) -> bool:
        return all(c.passed for c in self._checks.values())

    @property
    def failed(self) -> List[str]:
        return sorted(k for k, c in self._checks.items() if not c.passed)

    @property
    def events(self) -> List[Dict[str, Any]]:
        return list(self._events)

    @property
    def stats(self) -> Dict[str, Any]:
        return {
            "total_events": len(self._events),
            "checks": len(self._checks),
            "failed": self.failed,
        }
