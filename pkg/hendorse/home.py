"""
Home
----

Domain vocabulary of the home (attribute values, device attributes and their trust classes,
devices, abstract home objects, principals) and the ``Home`` registry, the inventory source
for policy instantiation.
"""

from __future__ import annotations

import logging
import re
import threading
from collections import deque
from dataclasses import dataclass, field, replace
from enum import Enum
from types import MappingProxyType
from typing import TYPE_CHECKING

from hendorse.errors import (
    ConfigurationError,
    DuplicateIdError,
    UnknownAhoError,
    UnknownAttributeError,
    UnknownDeviceTypeError,
    UnknownIdError,
    UnknownVerbError,
)
from hendorse.events import (
    DeviceAdded,
    DeviceOffline,
    DeviceOnline,
    DeviceRemoved,
    EndorsementChanged,
    Event,
    EventBus,
)

if TYPE_CHECKING:
    from collections.abc import Iterable, Iterator, Mapping

LOGGER = logging.getLogger(__name__)

_VALUE_PATTERN = re.compile(r"^(?P<label>[^()\s]+)(?:\((?P<qualifier>[^()\s]+)\))?$")


# ----- Values & Attributes ----- #


@dataclass(frozen=True)
class AttributeValue:
    """
    A symbolic state such as ``UNLOCKED`` with an optional qualifier such as ``owner``,
    written ``UNLOCKED(owner)``. Equality is on both fields: a missing qualifier only
    equals a missing qualifier.
    """

    label: str
    qualifier: str | None = None

    def __post_init__(self) -> None:
        if not self.label:
            errmsg = "An attribute value needs a non-empty label"
            raise ValueError(errmsg)

    @classmethod
    def parse(cls, text: str) -> AttributeValue:
        """Parses ``LABEL`` or ``LABEL(qualifier)``."""
        match = _VALUE_PATTERN.match(text.strip())
        if match is None:
            errmsg = f"Invalid attribute value: '{text}'"
            raise ValueError(errmsg)
        return cls(match["label"], match["qualifier"])

    def matches(self, other: AttributeValue) -> bool:
        """Label equality, plus qualifier equality only if this value names a qualifier."""
        return self.label == other.label and (self.qualifier is None or self.qualifier == other.qualifier)

    def __str__(self) -> str:
        return self.label if self.qualifier is None else f"{self.label}({self.qualifier})"


class TrustClass(Enum):
    READ_ONLY = "READ_ONLY"
    DESIGNATED = "DESIGNATED"
    UNTRUSTED = "UNTRUSTED"

    @property
    def is_endorsement(self) -> bool:
        return self is not TrustClass.UNTRUSTED


@dataclass(frozen=True)
class DeviceAttribute:
    """
    A (device type, attribute) pair with its trust class, finite value domain and, for
    sensors that reset after an event, the neutral value they return to.
    """

    device_type: str
    attribute: str
    trust_class: TrustClass
    value_domain: frozenset[AttributeValue]
    neutral: AttributeValue | None = None

    def __post_init__(self) -> None:
        if not self.value_domain:
            errmsg = f"Empty value domain for '{self.pair}'"
            raise ConfigurationError(errmsg)
        if self.neutral is not None and self.neutral not in self.value_domain:
            errmsg = f"Neutral value '{self.neutral}' of '{self.pair}' is not in its value domain"
            raise ConfigurationError(errmsg)

    @property
    def pair(self) -> str:
        return f"{self.device_type}.{self.attribute}"

    @property
    def is_endorsement(self) -> bool:
        return self.trust_class.is_endorsement

    def accepts(self, value: AttributeValue) -> bool:
        return value in self.value_domain

    def sorted_values(self) -> list[str]:
        return sorted(str(value) for value in self.value_domain)


@dataclass(frozen=True)
class InteractionRecord:
    """One record produced by a physical interaction; ``value`` may hold ``{param}`` fields."""

    attribute: str
    value: str
    reset: bool = False
    reset_after_ms: int | None = None


@dataclass(frozen=True)
class Interaction:
    verb: str
    params: Mapping[str, str]
    records: tuple[InteractionRecord, ...]


class DeviceAttributeMap:
    """
    The device-attribute map: unique (device type, attribute) entries with their trust class.
    Produced by the spec toolkit from source files, and the base of the runtime catalog.
    """

    def __init__(self, entries: Iterable[DeviceAttribute] = ()) -> None:
        self._entries: dict[tuple[str, str], DeviceAttribute] = {}
        for entry in entries:
            self.add(entry)

    def add(self, entry: DeviceAttribute) -> None:
        key = (entry.device_type, entry.attribute)
        if key in self._entries:
            errmsg = f"Duplicate device-attribute pair '{entry.pair}'"
            raise ConfigurationError(errmsg)
        self._entries[key] = entry

    def put(self, entry: DeviceAttribute) -> None:
        """Adds or replaces the entry for the pair."""
        self._entries[(entry.device_type, entry.attribute)] = entry

    def get(self, device_type: str, attribute: str) -> DeviceAttribute | None:
        return self._entries.get((device_type, attribute))

    def attribute(self, device_type: str, attribute: str) -> DeviceAttribute:
        try:
            return self._entries[(device_type, attribute)]
        except KeyError:
            if device_type not in self.device_types:
                raise UnknownDeviceTypeError(device_type) from None
            raise UnknownAttributeError(device_type, attribute) from None

    def attributes_of(self, device_type: str) -> tuple[DeviceAttribute, ...]:
        return tuple(entry for (dtype, _), entry in sorted(self._entries.items()) if dtype == device_type)

    @property
    def device_types(self) -> frozenset[str]:
        return frozenset(dtype for dtype, _ in self._entries)

    def endorsement_attributes(self) -> tuple[DeviceAttribute, ...]:
        return tuple(entry for entry in self if entry.is_endorsement)

    def __contains__(self, key: object) -> bool:
        return key in self._entries

    def __iter__(self) -> Iterator[DeviceAttribute]:
        return iter(entry for _, entry in sorted(self._entries.items()))

    def __len__(self) -> int:
        return len(self._entries)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, DeviceAttributeMap):
            return NotImplemented
        return self._entries == other._entries

    __hash__ = None

    def __repr__(self) -> str:
        return f"{type(self).__name__}({len(self.device_types)} types, {len(self)} pairs)"


class DeviceCatalog(DeviceAttributeMap):
    """
    The closed-world catalog the platform runs on: the device-attribute map plus, per device
    type, the physical interactions (verbs) its virtual devices support.
    """

    def __init__(
        self,
        entries: Iterable[DeviceAttribute] = (),
        interactions: Mapping[str, Mapping[str, Interaction]] | None = None,
    ) -> None:
        super().__init__(entries)
        self._interactions = {dtype: dict(verbs) for dtype, verbs in (interactions or {}).items()}
        for dtype, verbs in self._interactions.items():
            for interaction in verbs.values():
                for record in interaction.records:
                    entry = self.attribute(dtype, record.attribute)  # raises on undeclared attributes
                    if record.reset and entry.neutral is None:
                        errmsg = f"Verb '{interaction.verb}' resets '{entry.pair}', which has no neutral value"
                        raise ConfigurationError(errmsg)

    def interaction(self, device_type: str, verb: str) -> Interaction:
        try:
            return self._interactions[device_type][verb]
        except KeyError:
            raise UnknownVerbError(device_type, verb) from None

    def verbs_of(self, device_type: str) -> tuple[str, ...]:
        return tuple(sorted(self._interactions.get(device_type, {})))


# ----- Inventory ----- #


@dataclass(frozen=True)
class DeviceInstance:
    id: str
    device_type: str
    location: str
    online: bool = True


@dataclass
class Aho:
    """An abstract home object, such as ``home`` (away/home) or ``security_state`` (deter/ok)."""

    name: str
    values: tuple[str, ...]
    endorsed: bool = False
    grants: frozenset[str] = field(default_factory=frozenset)
    initial: str | None = None

    def __post_init__(self) -> None:
        self.values = tuple(self.values)
        self.grants = frozenset(self.grants)
        if not self.values:
            errmsg = f"AHO '{self.name}' needs a non-empty value domain"
            raise ConfigurationError(errmsg)
        if self.initial is None:
            self.initial = self.values[0]
        if self.initial not in self.values:
            errmsg = f"Initial value '{self.initial}' of AHO '{self.name}' is not one of {self.values}"
            raise ConfigurationError(errmsg)

    def accepts(self, value: str) -> bool:
        return value in self.values


@dataclass(frozen=True)
class ApiToken:
    token: str
    label: str
    local: bool = False
    device_attributes: frozenset[str] = frozenset()

    def grants_attribute(self, device_id: str, attribute: str) -> bool:
        return f"{device_id}.{attribute}" in self.device_attributes or f"{device_id}.*" in self.device_attributes


class PrincipalKind(Enum):
    PLATFORM_APP = "PLATFORM_APP"
    LOCAL_USER = "LOCAL_USER"
    THIRD_PARTY = "THIRD_PARTY"
    DEVICE_REPORT = "DEVICE_REPORT"


@dataclass(frozen=True)
class Principal:
    """Who issues a state change request."""

    kind: PrincipalKind
    token: str | None = None
    device_id: str | None = None

    def __post_init__(self) -> None:
        if self.kind is PrincipalKind.THIRD_PARTY and not self.token:
            errmsg = "A third-party principal carries a token"
            raise ValueError(errmsg)
        if self.kind is PrincipalKind.DEVICE_REPORT and not self.device_id:
            errmsg = "A device-report principal carries a device id"
            raise ValueError(errmsg)

    @classmethod
    def platform_app(cls) -> Principal:
        return cls(PrincipalKind.PLATFORM_APP)

    @classmethod
    def local_user(cls) -> Principal:
        return cls(PrincipalKind.LOCAL_USER)

    @classmethod
    def third_party(cls, token: str) -> Principal:
        return cls(PrincipalKind.THIRD_PARTY, token=token)

    @classmethod
    def device_report(cls, device_id: str) -> Principal:
        return cls(PrincipalKind.DEVICE_REPORT, device_id=device_id)

    def __str__(self) -> str:
        if self.kind is PrincipalKind.THIRD_PARTY:
            return f"third-party({self.token})"
        if self.kind is PrincipalKind.DEVICE_REPORT:
            return f"device({self.device_id})"
        return self.kind.value.lower().replace("_", "-")


@dataclass(frozen=True)
class ObjectRef:
    """Reference to either an AHO (``home``) or a device attribute (``camera-1.power``)."""

    aho: str | None = None
    device_id: str | None = None
    attribute: str | None = None

    def __post_init__(self) -> None:
        if (self.aho is None) == (self.device_id is None or self.attribute is None):
            errmsg = "An object reference names either an AHO or a device attribute"
            raise ValueError(errmsg)

    @classmethod
    def parse(cls, text: str) -> ObjectRef:
        device_id, dot, attribute = text.partition(".")
        return cls(device_id=device_id, attribute=attribute) if dot else cls(aho=text)

    @property
    def is_aho(self) -> bool:
        return self.aho is not None

    def __str__(self) -> str:
        return self.aho if self.is_aho else f"{self.device_id}.{self.attribute}"


# ----- Registry ----- #


class Home:
    """
    Registry of the locations, devices, AHOs and API tokens of one home. Mutations are
    serialized by a lock. Each successful inventory mutation (register, remove, availability
    change, endorsement change) appends exactly one event to ``events`` and publishes it on
    the bus, where the policy engine listens to reinstantiate.

    Args:
        catalog (DeviceCatalog): the closed-world device catalog.
        locations (Iterable[str]): location ids of the home.
        adjacency (Mapping[str, Iterable[str]]): for a location, the locations whose devices
            its predicates may borrow.
        bus (EventBus): the platform event bus, a new one if not given.
        history_limit (int): how many events ``events`` and a new bus keep, all if ``None``.
    """

    def __init__(
        self,
        catalog: DeviceCatalog,
        locations: Iterable[str] = (),
        adjacency: Mapping[str, Iterable[str]] | None = None,
        bus: EventBus | None = None,
        history_limit: int | None = None,
    ) -> None:
        self.catalog = catalog
        self.history_limit = history_limit
        self.bus = bus if bus is not None else EventBus(history_limit)
        self.events: deque[Event] = deque(maxlen=history_limit)
        self._locations: dict[str, None] = dict.fromkeys(locations)
        self._adjacency = {loc: tuple(sorted(others)) for loc, others in (adjacency or {}).items()}
        self._devices: dict[str, DeviceInstance] = {}
        self._ahos: dict[str, Aho] = {}
        self._aho_values: dict[str, str] = {}
        self._tokens: dict[str, ApiToken] = {}
        self._lock = threading.RLock()

    # ----- Locations ----- #

    @property
    def locations(self) -> tuple[str, ...]:
        return tuple(sorted(self._locations))

    def add_location(self, location: str) -> None:
        self._locations.setdefault(location, None)

    def adjacent(self, location: str) -> tuple[str, ...]:
        return self._adjacency.get(location, ())

    # ----- Devices ----- #

    def register_device(self, instance: DeviceInstance) -> DeviceAdded:
        """
        Adds a device to the inventory and publishes ``DeviceAdded``.

        Raises:
            DuplicateIdError: if the id is already registered.
            UnknownDeviceTypeError: if the device type is not in the catalog.
        """
        with self._lock:
            if instance.id in self._devices:
                raise DuplicateIdError(instance.id)
            if instance.device_type not in self.catalog.device_types:
                raise UnknownDeviceTypeError(instance.device_type)
            self.add_location(instance.location)
            self._devices[instance.id] = instance
            LOGGER.info(f"Registered {instance.device_type} '{instance.id}' at {instance.location}")
            event = DeviceAdded(instance)
            self._publish(event)
        return event

    def remove_device(self, device_id: str) -> DeviceRemoved:
        """Removes a device from the inventory and publishes ``DeviceRemoved``."""
        with self._lock:
            instance = self.device(device_id)
            del self._devices[device_id]
            LOGGER.info(f"Removed device '{device_id}'")
            event = DeviceRemoved(instance)
            self._publish(event)
        return event

    def set_online(self, device_id: str, online: bool) -> DeviceOffline | DeviceOnline | None:  # noqa: FBT001
        """Changes device availability; setting the current value again publishes nothing."""
        with self._lock:
            instance = self.device(device_id)
            if instance.online == online:
                return None
            self._devices[device_id] = replace(instance, online=online)
            LOGGER.info(f"Device '{device_id}' is now {'online' if online else 'offline'}")
            event = DeviceOnline(self._devices[device_id]) if online else DeviceOffline(self._devices[device_id])
            self._publish(event)
        return event

    def device(self, device_id: str) -> DeviceInstance:
        try:
            return self._devices[device_id]
        except KeyError:
            raise UnknownIdError(device_id) from None

    def has_device(self, device_id: str) -> bool:
        return device_id in self._devices

    @property
    def devices(self) -> tuple[DeviceInstance, ...]:
        return tuple(self._devices[device_id] for device_id in sorted(self._devices))

    def devices_at(self, location: str) -> tuple[DeviceInstance, ...]:
        return tuple(device for device in self.devices if device.location == location)

    def attribute_of(self, device_id: str, attribute: str) -> DeviceAttribute:
        return self.catalog.attribute(self.device(device_id).device_type, attribute)

    # ----- AHOs ----- #

    def define_aho(self, aho: Aho) -> None:
        with self._lock:
            if aho.name in self._ahos:
                errmsg = f"AHO '{aho.name}' is already defined"
                raise ConfigurationError(errmsg)
            self._ahos[aho.name] = aho
            self._aho_values[aho.name] = aho.initial

    def aho(self, name: str) -> Aho:
        try:
            return self._ahos[name]
        except KeyError:
            raise UnknownAhoError(name) from None

    @property
    def ahos(self) -> tuple[Aho, ...]:
        return tuple(self._ahos[name] for name in sorted(self._ahos))

    def set_endorsed(self, name: str, endorsed: bool) -> EndorsementChanged:  # noqa: FBT001
        """Marks an AHO as endorsed (or not) and publishes ``EndorsementChanged``."""
        with self._lock:
            self.aho(name).endorsed = endorsed
            LOGGER.info(f"AHO '{name}' endorsement set to {endorsed}")
            event = EndorsementChanged(name, endorsed)
            self._publish(event)
        return event

    def aho_value(self, name: str) -> str:
        self.aho(name)
        return self._aho_values[name]

    @property
    def aho_values(self) -> Mapping[str, str]:
        return MappingProxyType(dict(sorted(self._aho_values.items())))

    def write_aho(self, name: str, value: str) -> str:
        """Sets the AHO value and returns the previous one. Only the reference monitor calls this."""
        with self._lock:
            previous = self.aho_value(name)
            self._aho_values[name] = value
        return previous

    # ----- Tokens ----- #

    def add_token(self, token: ApiToken) -> None:
        if token.token in self._tokens:
            errmsg = "API tokens must be unique"
            raise ConfigurationError(errmsg)
        self._tokens[token.token] = token

    def token(self, token: str) -> ApiToken | None:
        return self._tokens.get(token)

    @property
    def tokens(self) -> tuple[ApiToken, ...]:
        return tuple(self._tokens[token] for token in sorted(self._tokens))

    def principal_for(self, token: str) -> Principal | None:
        """The principal an API token acts as: the local user for dashboard tokens."""
        api_token = self.token(token)
        if api_token is None:
            return None
        return Principal.local_user() if api_token.local else Principal.third_party(token)

    # ----- Helpers ----- #

    def _publish(self, event: Event) -> None:
        self.events.append(event)
        self.bus.publish(event)
