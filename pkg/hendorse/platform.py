"""
Platform
--------

The simulated smart-home platform around the reference monitor: a logical clock, virtual
devices turning physical interactions into device reports (with sensor auto-reset), and the
trigger-action automation engine. ``Platform.submit`` is the single serialization point every
request goes through, mediation and automation cascade included.
"""

from __future__ import annotations

import heapq
import logging
import threading
from collections import deque
from dataclasses import dataclass, field
from typing import TYPE_CHECKING

from hendorse.config import HomeConfig, load_home, load_home_config
from hendorse.constants import MAX_CASCADE_DEPTH
from hendorse.errors import (
    CascadeDepthExceededError,
    ConfigurationError,
    DeviceOfflineError,
    EndorsementError,
    InvalidRequestError,
)
from hendorse.events import DeviceRemoved, StateChanged
from hendorse.home import AttributeValue, ObjectRef, Principal
from hendorse.monitor import (
    AhoChange,
    DeviceAttributeChange,
    DeviceReport,
    MediationOutcome,
    ReferenceMonitor,
    StateChangeRequest,
    Target,
)
from hendorse.policy import EvidenceMode, PolicyEngine
from hendorse.statemachine import FreshnessConfig, StateMachine

if TYPE_CHECKING:
    import pathlib
    from collections.abc import Iterable, Mapping

    from hendorse.config import ObjectValueModel, RoutineModel
    from hendorse.home import DeviceCatalog, DeviceInstance, Home
    from hendorse.policy import PolicyTemplate

LOGGER = logging.getLogger(__name__)


# ----- Clock & Scheduler ----- #


class LogicalClock:
    """Simulation time in milliseconds; it never goes backwards."""

    def __init__(self, start: int = 0) -> None:
        self._now = start

    @property
    def now(self) -> int:
        return self._now

    def advance_to(self, time: int) -> int:
        if time < self._now:
            errmsg = f"Cannot move the clock back from {self._now} to {time}"
            raise ValueError(errmsg)
        self._now = time
        return self._now


@dataclass(order=True)
class _ScheduledReset:
    time: int
    seq: int
    device_id: str = field(compare=False)
    attribute: str = field(compare=False)
    value: AttributeValue = field(compare=False)


class ResetScheduler:
    """
    Pending sensor resets, ordered by time then scheduling order. At most one reset is
    pending per (device, attribute): a new report on the pair cancels it.
    """

    def __init__(self) -> None:
        self._queue: list[_ScheduledReset] = []
        self._pending: dict[tuple[str, str], int] = {}
        self._next_seq = 0

    def schedule(self, time: int, device_id: str, attribute: str, value: AttributeValue) -> None:
        self._next_seq += 1
        self._pending[(device_id, attribute)] = self._next_seq
        heapq.heappush(self._queue, _ScheduledReset(time, self._next_seq, device_id, attribute, value))

    def cancel(self, device_id: str, attribute: str) -> None:
        self._pending.pop((device_id, attribute), None)

    def cancel_device(self, device_id: str) -> None:
        for pair in [pair for pair in self._pending if pair[0] == device_id]:
            del self._pending[pair]

    def pop_due(self, time: int) -> _ScheduledReset | None:
        """The next live reset due at or before ``time``, cancelled ones are dropped on the way."""
        while self._queue and self._queue[0].time <= time:
            reset = heapq.heappop(self._queue)
            if self._pending.get((reset.device_id, reset.attribute)) == reset.seq:
                del self._pending[(reset.device_id, reset.attribute)]
                return reset
        return None

    def __len__(self) -> int:
        return len(self._pending)


# ----- Routines & Physical Actions ----- #


@dataclass(frozen=True)
class Routine:
    """``when trigger reaches trigger_value, do action`` executed with platform privilege."""

    id: str
    trigger: ObjectRef
    trigger_value: AttributeValue
    action: AhoChange | DeviceAttributeChange

    def matches(self, event: StateChanged) -> bool:
        return event.subject == self.trigger and self.trigger_value.matches(event.value)


@dataclass(frozen=True)
class RoutineRun:
    routine_id: str
    time: int
    outcome: MediationOutcome


@dataclass(frozen=True)
class PhysicalAction:
    device_id: str
    verb: str
    params: Mapping[str, str] = field(default_factory=dict)


def _object_value(model: ObjectValueModel) -> tuple[ObjectRef, AttributeValue]:
    if model.aho is not None:
        return ObjectRef(aho=model.aho), AttributeValue(model.value)
    return ObjectRef(device_id=model.device, attribute=model.attribute), AttributeValue.parse(model.value)


def routine_from_model(model: RoutineModel, home: Home) -> Routine:
    """
    Builds a routine from its configuration, checking both objects exist.

    Raises:
        ConfigurationError: on unknown objects or values.
    """
    trigger, trigger_value = _object_value(model.trigger)
    target, value = _object_value(model.action)
    try:
        if trigger.is_aho:
            known = home.aho(trigger.aho).accepts(trigger_value.label)
        else:
            domain = home.attribute_of(trigger.device_id, trigger.attribute).value_domain
            known = any(trigger_value.matches(candidate) for candidate in domain)
        if not known:
            errmsg = f"Routine '{model.id}' triggers on unknown value '{trigger_value}' of {trigger}"
            raise ConfigurationError(errmsg)

        if target.is_aho:
            action = AhoChange(target.aho, value.label)
            known = home.aho(target.aho).accepts(value.label)
        else:
            action = DeviceAttributeChange(target.device_id, target.attribute, value)
            known = home.attribute_of(target.device_id, target.attribute).accepts(value)
        if not known:
            errmsg = f"Routine '{model.id}' sets unknown value '{value}' of {target}"
            raise ConfigurationError(errmsg)
    except ConfigurationError:
        raise
    except EndorsementError as error:
        errmsg = f"Routine '{model.id}': {error}"
        raise ConfigurationError(errmsg) from error
    return Routine(model.id, trigger, trigger_value, action)


# ----- Platform ----- #


class Platform:
    """
    A running home: registry, state machine, policy engine, reference monitor, routines and
    virtual devices on one logical clock.

    Args:
        config (HomeConfig): the home configuration.
        home (Home): the registry built from it.
        templates (Iterable[PolicyTemplate]): the policy template library.
        enforcing (bool): ``False`` runs the platform without endorsement (the baseline),
            which loads no templates.
        evidence_mode (EvidenceMode): how policy checks read the state machine.
    """

    def __init__(
        self,
        config: HomeConfig,
        home: Home,
        templates: Iterable[PolicyTemplate] = (),
        enforcing: bool = True,  # noqa: FBT001, FBT002
        evidence_mode: EvidenceMode = EvidenceMode.MOST_RECENT_CHANGE,
    ) -> None:
        self.config = config
        self.home = home
        self.clock = LogicalClock()
        self.scheduler = ResetScheduler()
        self.freshness = FreshnessConfig(config.freshness_threshold_ms)
        self.reset_delay_ms = config.reset_delay_ms
        self.state = StateMachine(home)
        self.engine = PolicyEngine(home, templates if enforcing else ())
        self.monitor = ReferenceMonitor(
            home, self.state, self.engine, self.freshness, enforcing, evidence_mode, time_source=lambda: self.clock.now
        )
        self.routines = tuple(sorted((routine_from_model(model, home) for model in config.routines), key=lambda r: r.id))
        self.runs: list[RoutineRun] = []
        self._pending: deque[tuple[StateChanged, int]] = deque()
        self._depth = 0
        self._lock = threading.RLock()

        home.bus.subscribe(StateChanged, self._on_state_changed)
        home.bus.subscribe(DeviceRemoved, self._on_device_removed)
        if enforcing:
            self.engine.attach()

    @property
    def enforcing(self) -> bool:
        return self.monitor.enforcing

    # ----- Requests ----- #

    def submit(self, request: StateChangeRequest) -> MediationOutcome:
        """
        Mediates a request at its logical time, then runs the automations it triggers to
        quiescence. Resets due before the request are applied first.

        Raises:
            InvalidRequestError: if the request is older than the platform clock.
            CascadeDepthExceededError: if routines keep triggering each other.
        """
        with self._lock:
            if request.request_time < self.clock.now:
                errmsg = f"Request at t={request.request_time} arrives after t={self.clock.now}"
                raise InvalidRequestError(errmsg)
            self.advance_to(request.request_time)
            outcome = self.monitor.mediate(request)
            self._drain()
        return outcome

    def submit_live(self, principal: Principal, target: Target, time: int | None = None) -> MediationOutcome:
        """
        Submits a change stamped with ``time``, or with the platform clock if that is later or
        ``time`` is not given. The stamp is taken under the platform lock, so a request
        overtaken between arrival and mediation is still mediated instead of rejected.
        """
        with self._lock:
            now = self.clock.now if time is None else max(time, self.clock.now)
            return self.submit(StateChangeRequest(principal, target, now))

    def set_aho(self, principal: Principal, aho: str, value: str, time: int | None = None) -> MediationOutcome:
        if time is None:
            return self.submit_live(principal, AhoChange(aho, value))
        return self.submit(StateChangeRequest(principal, AhoChange(aho, value), time))

    def set_attribute(
        self, principal: Principal, device_id: str, attribute: str, value: AttributeValue, time: int | None = None
    ) -> MediationOutcome:
        target = DeviceAttributeChange(device_id, attribute, value)
        if time is None:
            return self.submit_live(principal, target)
        return self.submit(StateChangeRequest(principal, target, time))

    # ----- Virtual Devices ----- #

    def apply_physical(
        self, action: PhysicalAction, now: int | None = None, *, catch_up: bool = False
    ) -> list[MediationOutcome]:
        """
        Performs a physical interaction with a virtual device: its records are reported at
        ``now`` and the resetting ones get their neutral value scheduled. With ``catch_up``,
        a ``now`` behind the platform clock is moved up to it instead of being rejected.

        Raises:
            UnknownIdError: if the device is not registered.
            UnknownVerbError: if its type has no such interaction.
            DeviceOfflineError: if the device is offline.
            InvalidRequestError: if a parameter is not declared by the interaction.
        """
        with self._lock:
            now = self.clock.now if now is None or (catch_up and now < self.clock.now) else now
            device = self.home.device(action.device_id)
            interaction = self.home.catalog.interaction(device.device_type, action.verb)
            if not device.online:
                raise DeviceOfflineError(device.id)
            unknown = set(action.params) - set(interaction.params)
            if unknown:
                errmsg = f"Verb '{action.verb}' of {device.device_type} takes no parameters {sorted(unknown)}"
                raise InvalidRequestError(errmsg)
            params = {**interaction.params, **action.params}
            self.advance_to(now)

            LOGGER.debug(f"Physical '{action.verb}' on '{device.id}' at t={now}")
            outcomes = []
            for record in interaction.records:
                value = AttributeValue.parse(record.value.format_map(params))
                self.scheduler.cancel(device.id, record.attribute)
                request = StateChangeRequest(
                    Principal.device_report(device.id), DeviceReport(device.id, record.attribute, value), now
                )
                outcomes.append(self.submit(request))
                if record.reset:
                    neutral = self.home.attribute_of(device.id, record.attribute).neutral
                    delay = record.reset_after_ms or self.reset_delay_ms
                    self.scheduler.schedule(now + delay, device.id, record.attribute, neutral)
        return outcomes

    def advance_to(self, time: int) -> int:
        """Moves the clock to ``time``, reporting every reset due on the way in time order."""
        with self._lock:
            if time < self.clock.now:
                errmsg = f"Cannot move the platform back from t={self.clock.now} to t={time}"
                raise InvalidRequestError(errmsg)
            while (reset := self.scheduler.pop_due(time)) is not None:
                self.clock.advance_to(reset.time)
                request = StateChangeRequest(
                    Principal.device_report(reset.device_id),
                    DeviceReport(reset.device_id, reset.attribute, reset.value),
                    reset.time,
                )
                self.monitor.mediate(request)
                self._drain()
            return self.clock.advance_to(time)

    # ----- Automations ----- #

    def run_automations(self, event: StateChanged) -> list[RoutineRun]:
        """Fires the routines matching the event and follows their cascade to quiescence."""
        with self._lock:
            self._pending.append((event, 1))
            return self._drain()

    def settle(self) -> list[RoutineRun]:
        """Runs the automations of state changes mediated outside of ``submit``."""
        with self._lock:
            return self._drain()

    def _on_state_changed(self, event: StateChanged) -> None:
        self._pending.append((event, self._depth + 1))

    def _drain(self) -> list[RoutineRun]:
        runs = []
        try:
            while self._pending:
                event, depth = self._pending.popleft()
                self._depth = depth
                for routine in self.routines:
                    if not routine.matches(event):
                        continue
                    if depth > MAX_CASCADE_DEPTH:
                        raise CascadeDepthExceededError(routine.id, depth)
                    LOGGER.debug(f"Routine '{routine.id}' fires on {event.subject}={event.value}")
                    request = StateChangeRequest(Principal.platform_app(), routine.action, event.time)
                    run = RoutineRun(routine.id, event.time, self.monitor.mediate(request))
                    runs.append(run)
                    self.runs.append(run)
        finally:
            self._pending.clear()
            self._depth = 0
        return runs

    # ----- Inventory ----- #

    def add_device(self, instance: DeviceInstance) -> None:
        with self._lock:
            self.home.register_device(instance)

    def remove_device(self, device_id: str) -> None:
        with self._lock:
            self.home.remove_device(device_id)

    def set_online(self, device_id: str, online: bool) -> None:  # noqa: FBT001
        with self._lock:
            self.home.set_online(device_id, online)

    def _on_device_removed(self, event: DeviceRemoved) -> None:
        self.scheduler.cancel_device(event.device.id)
        self.state.forget_device(event.device.id)

    # ----- Queries ----- #

    def aho_states(self) -> dict[str, str]:
        return dict(self.home.aho_values)

    def device_states(self) -> dict[str, dict[str, str]]:
        return self.state.device_states()


def boot_platform(
    config: HomeConfig | pathlib.Path | str,
    templates: Iterable[PolicyTemplate] = (),
    enforcing: bool = True,  # noqa: FBT001, FBT002
    evidence_mode: EvidenceMode = EvidenceMode.MOST_RECENT_CHANGE,
    catalog: DeviceCatalog | None = None,
) -> Platform:
    """
    Boots a fresh platform from a home configuration: builds the registry, instantiates the
    policies (when enforcing) and reports the configured initial device states at t=0. These
    are recorded as untrusted, so no check is satisfied by them.

    Args:
        config (HomeConfig | Path | str): the configuration or the path to its file.
        templates (Iterable[PolicyTemplate]): the policy template library.
        enforcing (bool): ``False`` boots the baseline platform without endorsement.
        evidence_mode (EvidenceMode): how policy checks read the state machine.
        catalog (DeviceCatalog): overrides the catalog named in the configuration.

    Returns:
        The running ``Platform``, its clock at 0.
    """
    if not isinstance(config, HomeConfig):
        config = load_home_config(config)
    home = load_home(config, catalog)
    platform = Platform(config, home, templates, enforcing, evidence_mode)
    for device in config.devices:
        for attribute, value in sorted(device.state.items()):
            request = StateChangeRequest(
                Principal.device_report(device.id),
                DeviceReport(device.id, attribute, AttributeValue.parse(value), initial=True),
                0,
            )
            outcome = platform.submit(request)
            if not outcome.applied:
                errmsg = f"Invalid initial state {device.id}.{attribute}={value}: {outcome.reason}"
                raise ConfigurationError(errmsg)
    LOGGER.info(f"Booted home '{config.name}' ({'enforcing' if enforcing else 'baseline'})")
    return platform
