"""
Events
------

The platform event bus and the events it carries: inventory changes announced by the home
registry, state changes driving automations, and protection warnings from the policy engine.
"""

from __future__ import annotations

import logging
import threading
from collections import defaultdict, deque
from dataclasses import dataclass
from typing import TYPE_CHECKING

if TYPE_CHECKING:
    from collections.abc import Callable

    from hendorse.home import AttributeValue, DeviceInstance, ObjectRef

LOGGER = logging.getLogger(__name__)


# ----- Events ----- #


@dataclass(frozen=True)
class Event:
    """Base class of everything published on the bus."""


@dataclass(frozen=True)
class InventoryEvent(Event):
    """A change of the device deployment, triggering policy reinstantiation."""

    device: DeviceInstance


@dataclass(frozen=True)
class DeviceAdded(InventoryEvent):
    pass


@dataclass(frozen=True)
class DeviceRemoved(InventoryEvent):
    pass


@dataclass(frozen=True)
class DeviceOffline(InventoryEvent):
    pass


@dataclass(frozen=True)
class DeviceOnline(InventoryEvent):
    pass


@dataclass(frozen=True)
class EndorsementChanged(Event):
    aho: str
    endorsed: bool


@dataclass(frozen=True)
class StateChanged(Event):
    """An AHO or device attribute took a new value at logical time ``time``."""

    time: int
    subject: ObjectRef
    value: AttributeValue
    previous: AttributeValue | None = None


@dataclass(frozen=True)
class AhoUnprotectable(Event):
    """No policy template is feasible for an endorsed (aho, value) in the current deployment."""

    aho: str
    value: str


# ----- Bus ----- #


class EventBus:
    """
    Synchronous publish/subscribe bus. Handlers subscribed to an event class receive every
    published instance of that class or of its subclasses, in subscription order. Every
    published event is appended to ``log``, which keeps the last ``history_limit`` events
    (all of them if ``None``).
    """

    def __init__(self, history_limit: int | None = None) -> None:
        self.log: deque[Event] = deque(maxlen=history_limit)
        self._handlers: dict[type[Event], list[Callable[[Event], None]]] = defaultdict(list)
        self._lock = threading.RLock()

    def subscribe(self, event_type: type[Event], handler: Callable[[Event], None]) -> None:
        with self._lock:
            self._handlers[event_type].append(handler)

    def unsubscribe(self, event_type: type[Event], handler: Callable[[Event], None]) -> None:
        with self._lock:
            self._handlers[event_type].remove(handler)

    def publish(self, event: Event) -> None:
        with self._lock:
            self.log.append(event)
            handlers = [
                handler
                for event_type in type(event).__mro__
                if event_type in self._handlers
                for handler in list(self._handlers[event_type])
            ]
        LOGGER.debug(f"Publishing {type(event).__name__} to {len(handlers)} handler(s)")
        for handler in handlers:
            handler(event)
