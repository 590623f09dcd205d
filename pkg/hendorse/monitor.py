"""
Monitor
-------

The reference monitor: the single entry point through which every change of an AHO or a
device attribute goes. It checks permissions, enforces the tamperproofness of endorsement
attributes and, only for endorsed AHOs, runs the endorsement check against a snapshot of the
state machine taken at request arrival.

.. admonition:: **Mediation order**

    1. Device reports are recorded as trusted state, except the configured initial states
       reported at boot.
    2. Device attribute writes: read-only attributes only take device reports, designated
       attributes refuse third parties. Allowed writes are recorded as untrusted state.
    3. AHO writes by the platform or the local user are applied without evaluation.
    4. AHO writes by third parties need a grant, then pass the endorsement check if the
       target is endorsed.

Request-level problems (unknown objects, values outside domains, unknown tokens) are
``DENIED_PERMISSION`` outcomes, never exceptions.
"""

from __future__ import annotations

import logging
import pathlib
import threading
from collections import deque
from dataclasses import dataclass
from enum import Enum
from typing import TYPE_CHECKING

from hendorse.errors import EndorsementError, InvalidRequestError
from hendorse.events import AhoUnprotectable, StateChanged
from hendorse.frame import RecordFrame
from hendorse.home import AttributeValue, ObjectRef, PrincipalKind, TrustClass
from hendorse.policy import Action, Decision, EvidenceMode
from hendorse.writer import write_records

if TYPE_CHECKING:
    from collections.abc import Callable, Iterator

    from hendorse.home import Home, Principal
    from hendorse.policy import PolicyEngine
    from hendorse.statemachine import FreshnessConfig, StateMachine

LOGGER = logging.getLogger(__name__)

NO_ENTRY: str = "-"  # audit placeholder for an absent template or evidence


# ----- Requests ----- #


@dataclass(frozen=True)
class AhoChange:
    aho: str
    new_value: str

    def __str__(self) -> str:
        return f"{self.aho}={self.new_value}"


@dataclass(frozen=True)
class DeviceAttributeChange:
    device_id: str
    attribute: str
    value: AttributeValue

    def __str__(self) -> str:
        return f"{self.device_id}.{self.attribute}={self.value}"


@dataclass(frozen=True)
class DeviceReport:
    """``initial`` marks the configured state a device boots with, recorded as untrusted."""

    device_id: str
    attribute: str
    value: AttributeValue
    initial: bool = False

    def __str__(self) -> str:
        return f"report:{self.device_id}.{self.attribute}={self.value}"


Target = AhoChange | DeviceAttributeChange | DeviceReport


@dataclass(frozen=True)
class StateChangeRequest:
    principal: Principal
    target: Target
    request_time: int

    def __post_init__(self) -> None:
        if isinstance(self.target, DeviceReport) and (
            self.principal.kind is not PrincipalKind.DEVICE_REPORT or self.principal.device_id != self.target.device_id
        ):
            errmsg = f"A report of '{self.target.device_id}' must come from that device, not {self.principal}"
            raise InvalidRequestError(errmsg)


# ----- Outcomes & Notifications ----- #


class MediationStatus(Enum):
    APPLIED = "APPLIED"
    DENIED_PERMISSION = "DENIED_PERMISSION"
    DENIED_ENDORSEMENT = "DENIED_ENDORSEMENT"
    DENIED_TAMPER = "DENIED_TAMPER"

    @property
    def denied(self) -> bool:
        return self is not MediationStatus.APPLIED


class NotificationKind(Enum):
    DENIAL = "DENIAL"
    WARNING = "WARNING"


@dataclass(frozen=True)
class Notification:
    seq: int
    time: int
    kind: NotificationKind
    aho: str
    value: str
    principal: str | None
    template_id: str | None
    failed_checks: tuple[str, ...]
    message: str

    def to_dict(self) -> dict:
        return {
            "seq": self.seq,
            "time": self.time,
            "kind": self.kind.value,
            "aho": self.aho,
            "value": self.value,
            "principal": self.principal,
            "template_id": self.template_id,
            "failed_checks": list(self.failed_checks),
            "message": self.message,
        }


class NotificationChannel:
    """Append-only list of user notifications. Nothing can remove or replace an entry."""

    def __init__(self) -> None:
        self._entries: list[Notification] = []
        self._lock = threading.Lock()

    def append(
        self,
        time: int,
        kind: NotificationKind,
        aho: str,
        value: str,
        message: str,
        principal: str | None = None,
        template_id: str | None = None,
        failed_checks: tuple[str, ...] = (),
    ) -> Notification:
        with self._lock:
            notification = Notification(
                len(self._entries), time, kind, aho, value, principal, template_id, failed_checks, message
            )
            self._entries.append(notification)
        return notification

    @property
    def entries(self) -> tuple[Notification, ...]:
        return tuple(self._entries)

    def __iter__(self) -> Iterator[Notification]:
        return iter(self.entries)

    def __len__(self) -> int:
        return len(self._entries)


@dataclass(frozen=True)
class MediationOutcome:
    status: MediationStatus
    decision: Decision | None = None
    notification: Notification | None = None
    reason: str = ""

    @property
    def applied(self) -> bool:
        return self.status is MediationStatus.APPLIED


@dataclass(frozen=True)
class AuditEntry:
    time: int
    principal: str
    target: str
    status: MediationStatus
    template_id: str | None
    failed_checks: tuple[str, ...]
    evaluated: bool


# ----- Reference Monitor ----- #


class ReferenceMonitor:
    """
    Mediates state change requests one at a time. The audit log keeps the last
    ``home.history_limit`` entries, all of them if the home sets no limit; ``mutations``
    counts every applied change regardless.

    Args:
        home (Home): the registry of devices, AHOs and tokens.
        state (StateMachine): the platform state machine.
        engine (PolicyEngine): the policy engine holding the active policies.
        freshness (FreshnessConfig): the freshness threshold of endorsement evidence.
        enforcing (bool): if ``False`` the monitor runs as the plain platform baseline:
            permission checks stay, tamperproofness and endorsement are off and the engine
            is never attached.
        evidence_mode (EvidenceMode): how checks read the state machine.
        time_source (Callable[[], int]): logical time stamped on warning notifications.
    """

    def __init__(
        self,
        home: Home,
        state: StateMachine,
        engine: PolicyEngine,
        freshness: FreshnessConfig,
        enforcing: bool = True,  # noqa: FBT001, FBT002
        evidence_mode: EvidenceMode = EvidenceMode.MOST_RECENT_CHANGE,
        time_source: Callable[[], int] | None = None,
    ) -> None:
        self.home = home
        self.state = state
        self.engine = engine
        self.freshness = freshness
        self.enforcing = enforcing
        self.evidence_mode = evidence_mode
        self.notifications = NotificationChannel()
        self.audit: deque[AuditEntry] = deque(maxlen=home.history_limit)
        self.mutations = 0
        self._time_source = time_source or (lambda: 0)
        self._lock = threading.RLock()
        if enforcing:
            home.bus.subscribe(AhoUnprotectable, self._warn_unprotectable)

    def mediate(self, request: StateChangeRequest) -> MediationOutcome:
        """Mediates one request and records it in the audit log."""
        with self._lock:
            target = request.target
            if isinstance(target, DeviceReport):
                outcome = self._mediate_report(request, target)
            elif isinstance(target, DeviceAttributeChange):
                outcome = self._mediate_attribute(request, target)
            else:
                outcome = self._mediate_aho(request, target)

            decision = outcome.decision
            self.audit.append(
                AuditEntry(
                    time=request.request_time,
                    principal=str(request.principal),
                    target=str(target),
                    status=outcome.status,
                    template_id=None if decision is None else decision.template_id,
                    failed_checks=() if decision is None else decision.failed_checks,
                    evaluated=decision is not None,
                )
            )
        if outcome.status.denied:
            LOGGER.debug(f"{outcome.status.value} for {request.principal} on {target}: {outcome.reason}")
        return outcome

    def notify(self, decision: Decision, request: StateChangeRequest) -> Notification:
        """Informs the user of an endorsement denial."""
        if decision.action is not Action.DENY:
            errmsg = "Only denials are notified"
            raise ValueError(errmsg)
        target = request.target
        failed = decision.failed_checks
        message = f"{request.principal} tried to set {target} without supporting physical activity"
        if decision.template_id is None:
            message = f"{request.principal} tried to set {target}, which no policy can currently protect"
        notification = self.notifications.append(
            time=request.request_time,
            kind=NotificationKind.DENIAL,
            aho=target.aho,
            value=target.new_value,
            message=message,
            principal=str(request.principal),
            template_id=decision.template_id,
            failed_checks=failed,
        )
        LOGGER.warning(f"Endorsement denied: {message}")
        return notification

    # ----- Rules ----- #

    def _mediate_report(self, request: StateChangeRequest, target: DeviceReport) -> MediationOutcome:
        try:
            self.state.record_change(
                target.device_id, target.attribute, target.value, request.request_time, trusted=not target.initial
            )
        except EndorsementError as error:
            return MediationOutcome(MediationStatus.DENIED_PERMISSION, reason=str(error))
        self.mutations += 1
        return MediationOutcome(MediationStatus.APPLIED)

    def _mediate_attribute(self, request: StateChangeRequest, target: DeviceAttributeChange) -> MediationOutcome:
        principal = request.principal
        try:
            spec = self.home.attribute_of(target.device_id, target.attribute)
        except EndorsementError as error:
            return MediationOutcome(MediationStatus.DENIED_PERMISSION, reason=str(error))
        if self.enforcing:
            if spec.trust_class is TrustClass.READ_ONLY and principal.kind is not PrincipalKind.DEVICE_REPORT:
                return MediationOutcome(MediationStatus.DENIED_TAMPER, reason=f"{spec.pair} is read-only")
            if spec.trust_class is TrustClass.DESIGNATED and principal.kind is PrincipalKind.THIRD_PARTY:
                return MediationOutcome(MediationStatus.DENIED_TAMPER, reason=f"{spec.pair} is designated")
        if not spec.accepts(target.value):
            return MediationOutcome(MediationStatus.DENIED_PERMISSION, reason=f"'{target.value}' is not a value of {spec.pair}")

        if principal.kind is PrincipalKind.THIRD_PARTY:
            token = self.home.token(principal.token)
            if token is None or not token.grants_attribute(target.device_id, target.attribute):
                return MediationOutcome(MediationStatus.DENIED_PERMISSION, reason=f"no grant for {target.device_id}.{target.attribute}")

        try:
            self.state.record_change(target.device_id, target.attribute, target.value, request.request_time, trusted=False)
        except EndorsementError as error:
            return MediationOutcome(MediationStatus.DENIED_PERMISSION, reason=str(error))
        self.mutations += 1
        return MediationOutcome(MediationStatus.APPLIED)

    def _mediate_aho(self, request: StateChangeRequest, target: AhoChange) -> MediationOutcome:
        principal = request.principal
        try:
            aho = self.home.aho(target.aho)
        except EndorsementError as error:
            return MediationOutcome(MediationStatus.DENIED_PERMISSION, reason=str(error))
        if not aho.accepts(target.new_value):
            return MediationOutcome(MediationStatus.DENIED_PERMISSION, reason=f"'{target.new_value}' is not a value of {aho.name}")

        if principal.kind in (PrincipalKind.PLATFORM_APP, PrincipalKind.LOCAL_USER):
            self._write_aho(target, request.request_time)
            return MediationOutcome(MediationStatus.APPLIED)
        if principal.kind is not PrincipalKind.THIRD_PARTY:
            return MediationOutcome(MediationStatus.DENIED_PERMISSION, reason="devices do not write AHOs")
        if self.home.token(principal.token) is None or principal.token not in aho.grants:
            return MediationOutcome(MediationStatus.DENIED_PERMISSION, reason=f"token not granted on {aho.name}")

        if not (self.enforcing and self.engine.is_endorsed_target(aho.name, target.new_value)):
            self._write_aho(target, request.request_time)
            return MediationOutcome(MediationStatus.APPLIED)

        snapshot = self.state.snapshot(request.request_time)
        decision = self.engine.evaluate(aho.name, target.new_value, snapshot, self.freshness, self.evidence_mode)
        if decision.allowed:
            self._write_aho(target, request.request_time)
            return MediationOutcome(MediationStatus.APPLIED, decision=decision)
        notification = self.notify(decision, request)
        return MediationOutcome(
            MediationStatus.DENIED_ENDORSEMENT, decision=decision, notification=notification, reason="endorsement denied"
        )

    def _write_aho(self, target: AhoChange, time: int) -> None:
        previous = self.home.write_aho(target.aho, target.new_value)
        self.mutations += 1
        if previous != target.new_value:
            self.home.bus.publish(
                StateChanged(time, ObjectRef(aho=target.aho), AttributeValue(target.new_value), AttributeValue(previous))
            )

    def _warn_unprotectable(self, event: AhoUnprotectable) -> None:
        self.notifications.append(
            time=self._time_source(),
            kind=NotificationKind.WARNING,
            aho=event.aho,
            value=event.value,
            message=f"No policy can protect {event.aho}={event.value} with the current devices, third-party writes are denied",
        )

    # ----- Audit ----- #

    def audit_frame(self) -> RecordFrame:
        """The audit log, one row per mediation, as a ``RecordFrame``."""
        with self._lock:
            entries = list(self.audit)
        return RecordFrame(
            {
                "TIME": [entry.time for entry in entries],
                "PRINCIPAL": [entry.principal for entry in entries],
                "TARGET": [entry.target for entry in entries],
                "STATUS": [entry.status.value for entry in entries],
                "TEMPLATE": [entry.template_id or NO_ENTRY for entry in entries],
                "FAILED": [";".join(entry.failed_checks) or NO_ENTRY for entry in entries],
                "EVALUATED": [entry.evaluated for entry in entries],
            },
            headers={
                "TITLE": "audit log",
                "ENFORCING": self.enforcing,
                "MEDIATIONS": len(entries),
                "APPLIED": sum(entry.status is MediationStatus.APPLIED for entry in entries),
            },
        )

    def write_audit(self, path: pathlib.Path | str) -> None:
        write_records(pathlib.Path(path), self.audit_frame())
        LOGGER.info(f"Audit log written to {path}")
