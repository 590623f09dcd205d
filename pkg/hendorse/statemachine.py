"""
State Machine
-------------

Tracks the most recent change of every device-instance attribute together with its logical
timestamp, and answers the freshness-bounded queries endorsement relies on.

For each (device, attribute) pair two slots are kept: the latest record overall, and the
latest record whose value is not the attribute's neutral value. The history of records is
kept only for trace export, bounded by the home's ``history_limit``.
"""

from __future__ import annotations

import logging
import pathlib
import threading
from collections import deque
from dataclasses import dataclass
from types import MappingProxyType
from typing import TYPE_CHECKING

from hendorse.constants import DEFAULT_FRESHNESS_THRESHOLD_MS
from hendorse.errors import ConfigurationError, NonMonotonicTimestampError, UnknownValueError
from hendorse.events import StateChanged
from hendorse.frame import RecordFrame
from hendorse.home import ObjectRef
from hendorse.writer import write_records

if TYPE_CHECKING:
    from collections.abc import Mapping

    from hendorse.home import AttributeValue, Home

LOGGER = logging.getLogger(__name__)

_Pair = tuple[str, str]


@dataclass(frozen=True)
class StateRecord:
    device_id: str
    attribute: str
    value: AttributeValue
    timestamp: int
    trusted: bool = True


@dataclass(frozen=True)
class FreshnessConfig:
    """Maximum age, in milliseconds, of a change counting as evidence. Age == threshold is fresh."""

    threshold_ms: int = DEFAULT_FRESHNESS_THRESHOLD_MS

    def __post_init__(self) -> None:
        if self.threshold_ms <= 0:
            errmsg = f"Freshness threshold must be positive, got {self.threshold_ms} ms"
            raise ConfigurationError(errmsg)

    def is_fresh(self, record: StateRecord, now: int) -> bool:
        return record.timestamp <= now and now - record.timestamp <= self.threshold_ms


@dataclass(frozen=True)
class StateSnapshot:
    """
    Frozen view of every pair's two slots as of ``now``. All checks of one endorsement
    decision are answered by a single snapshot.
    """

    now: int
    changes: Mapping[_Pair, StateRecord]
    latest_records: Mapping[_Pair, StateRecord]

    def fresh_change(self, device_id: str, attribute: str, cfg: FreshnessConfig) -> StateRecord | None:
        record = self.changes.get((device_id, attribute))
        if record is not None and cfg.is_fresh(record, self.now):
            return record
        return None

    def latest(self, device_id: str, attribute: str) -> StateRecord | None:
        record = self.latest_records.get((device_id, attribute))
        if record is not None and record.timestamp <= self.now:
            return record
        return None

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, StateSnapshot):
            return NotImplemented
        return (
            self.now == other.now
            and dict(self.changes) == dict(other.changes)
            and dict(self.latest_records) == dict(other.latest_records)
        )

    __hash__ = None


class StateMachine:
    """
    The platform state machine. Every accepted change becomes the latest record of its pair
    and publishes a ``StateChanged`` event on the home's bus.

    Args:
        home (Home): the registry used to validate devices, attributes and values. Its
            ``history_limit`` bounds ``history``.
    """

    def __init__(self, home: Home) -> None:
        self.home = home
        self.history: deque[StateRecord] = deque(maxlen=home.history_limit)
        self._latest: dict[_Pair, StateRecord] = {}
        self._changes: dict[_Pair, StateRecord] = {}
        self._lock = threading.RLock()

    def record_change(
        self,
        device_id: str,
        attribute: str,
        value: AttributeValue,
        timestamp: int,
        trusted: bool = True,  # noqa: FBT001, FBT002
    ) -> StateRecord:
        """
        Records a device attribute change. A change at the same timestamp as the latest one
        supersedes it.

        Raises:
            UnknownIdError: if the device is not registered.
            UnknownAttributeError: if the device type has no such attribute.
            UnknownValueError: if the value is outside the attribute's domain.
            NonMonotonicTimestampError: if the change is older than the latest record.
        """
        spec = self.home.attribute_of(device_id, attribute)
        if not spec.accepts(value):
            raise UnknownValueError(f"{device_id}.{attribute}", value)

        with self._lock:
            pair = (device_id, attribute)
            previous = self._latest.get(pair)
            if previous is not None and timestamp < previous.timestamp:
                raise NonMonotonicTimestampError(device_id, attribute, timestamp, previous.timestamp)

            record = StateRecord(device_id, attribute, value, timestamp, trusted)
            self._latest[pair] = record
            if value != spec.neutral:
                self._changes[pair] = record
            self.history.append(record)
        LOGGER.debug(f"Recorded {device_id}.{attribute}={value} at t={timestamp} (trusted={trusted})")

        self.home.bus.publish(
            StateChanged(
                time=timestamp,
                subject=ObjectRef(device_id=device_id, attribute=attribute),
                value=value,
                previous=None if previous is None else previous.value,
            )
        )
        return record

    def fresh_change(self, device_id: str, attribute: str, now: int, cfg: FreshnessConfig) -> StateRecord | None:
        """
        The most recent non-neutral change of the pair if it is at most ``cfg.threshold_ms``
        old at ``now``, ``None`` otherwise.
        """
        self.home.attribute_of(device_id, attribute)
        with self._lock:
            record = self._changes.get((device_id, attribute))
        if record is not None and cfg.is_fresh(record, now):
            return record
        return None

    def latest(self, device_id: str, attribute: str) -> StateRecord | None:
        """The current state of the pair, regardless of age or neutrality."""
        self.home.attribute_of(device_id, attribute)
        with self._lock:
            return self._latest.get((device_id, attribute))

    def snapshot(self, now: int) -> StateSnapshot:
        """Immutable view as of ``now``; records stamped after ``now`` are left out."""
        with self._lock:
            changes = {pair: record for pair, record in self._changes.items() if record.timestamp <= now}
            latest = {pair: record for pair, record in self._latest.items() if record.timestamp <= now}
        return StateSnapshot(now, MappingProxyType(changes), MappingProxyType(latest))

    def device_states(self) -> dict[str, dict[str, str]]:
        """Current value of every recorded pair, grouped by device."""
        states: dict[str, dict[str, str]] = {}
        with self._lock:
            for (device_id, attribute), record in sorted(self._latest.items()):
                states.setdefault(device_id, {})[attribute] = str(record.value)
        return states

    def forget_device(self, device_id: str) -> None:
        """Drops the slots of a removed device; its history stays for export."""
        with self._lock:
            for pair in [pair for pair in self._latest if pair[0] == device_id]:
                self._latest.pop(pair, None)
                self._changes.pop(pair, None)
        LOGGER.debug(f"Forgot state of device '{device_id}'")

    def trace_frame(self) -> RecordFrame:
        """The ordered history of state records as a ``RecordFrame``."""
        with self._lock:
            history = list(self.history)
        return RecordFrame(
            {
                "TIME": [record.timestamp for record in history],
                "DEVICE": [record.device_id for record in history],
                "ATTRIBUTE": [record.attribute for record in history],
                "VALUE": [str(record.value) for record in history],
                "TRUSTED": [record.trusted for record in history],
            },
            headers={"TITLE": "state trace", "RECORDS": len(history)},
        )

    def export_trace(self, path: pathlib.Path | str) -> None:
        """Writes the state trace to **path** as a record table."""
        write_records(pathlib.Path(path), self.trace_frame())
        LOGGER.info(f"State trace written to {path}")
