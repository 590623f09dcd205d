"""
Policy
------

The endorsement policy model and engine. A ``PolicyTemplate`` is a location-independent
conjunction of device-attribute checks supporting one (AHO, value). Against the devices of a
home, the most restrictive feasible template is instantiated into an ``InstantiatedPolicy``:
a disjunction of location predicates, each binding every check to a concrete device.
Policies are evaluated against immutable state snapshots.

.. admonition:: **Binding rule**

    A template is feasible at location ``L`` if every check's device type has an online
    instance at ``L``, or at a location the home declares adjacent to ``L``. Own-location
    devices are bound first, the lexicographically smallest id wins within a tier.
"""

from __future__ import annotations

import json
import logging
import pathlib
import threading
from dataclasses import dataclass, field
from enum import Enum
from types import MappingProxyType
from typing import TYPE_CHECKING

from hendorse.config import CheckModel, TemplateFileModel, TemplateModel, read_json_model
from hendorse.errors import ConfigurationError, EndorsementError
from hendorse.events import AhoUnprotectable, EndorsementChanged, InventoryEvent
from hendorse.home import AttributeValue

if TYPE_CHECKING:
    from collections.abc import Iterable, Mapping

    from hendorse.events import Event
    from hendorse.home import DeviceAttributeMap, DeviceInstance, Home
    from hendorse.statemachine import FreshnessConfig, StateRecord, StateSnapshot

LOGGER = logging.getLogger(__name__)

_Target = tuple[str, str]


# ----- Templates ----- #


@dataclass(frozen=True)
class AttributeCheck:
    """``device_type.attribute == required_value``; ``strong`` marks a strong endorsement anchor."""

    device_type: str
    attribute: str
    required_value: AttributeValue
    strong: bool = field(default=False, compare=False)

    @property
    def pair(self) -> str:
        return f"{self.device_type}.{self.attribute}"

    def __str__(self) -> str:
        return f"{self.pair}=={self.required_value}"


def template_id(aho: str, target_value: str, checks: Iterable[AttributeCheck]) -> str:
    """Canonical template id: the target followed by the sorted pair names of its checks."""
    return f"{aho}={target_value}:" + "+".join(sorted(check.pair for check in checks))


@dataclass(frozen=True)
class PolicyTemplate:
    id: str
    aho: str
    target_value: str
    checks: tuple[AttributeCheck, ...]

    def __post_init__(self) -> None:
        if not self.checks:
            errmsg = f"Template '{self.id}' has no checks"
            raise ConfigurationError(errmsg)
        pairs = [check.pair for check in self.checks]
        if len(set(pairs)) != len(pairs):
            errmsg = f"Template '{self.id}' checks a device attribute more than once"
            raise ConfigurationError(errmsg)
        object.__setattr__(self, "checks", tuple(sorted(self.checks, key=lambda check: check.pair)))

    @classmethod
    def from_checks(cls, aho: str, target_value: str, checks: Iterable[AttributeCheck]) -> PolicyTemplate:
        checks = tuple(checks)
        return cls(template_id(aho, target_value, checks), aho, target_value, checks)

    @property
    def target(self) -> _Target:
        return (self.aho, self.target_value)

    @property
    def device_types(self) -> frozenset[str]:
        return frozenset(check.device_type for check in self.checks)

    @property
    def strong_count(self) -> int:
        return sum(check.strong for check in self.checks)

    def __len__(self) -> int:
        return len(self.checks)

    def validate(self, catalog: DeviceAttributeMap) -> None:
        """
        Checks every pair is a known endorsement attribute and every required value is in
        its domain.

        Raises:
            ConfigurationError: on the first offending check.
        """
        for check in self.checks:
            try:
                entry = catalog.attribute(check.device_type, check.attribute)
            except EndorsementError as error:
                errmsg = f"Template '{self.id}': {error}"
                raise ConfigurationError(errmsg) from error
            if not entry.is_endorsement:
                errmsg = f"Template '{self.id}' checks untrusted attribute '{check.pair}'"
                raise ConfigurationError(errmsg)
            if not entry.accepts(check.required_value):
                errmsg = f"Template '{self.id}' requires '{check.required_value}' outside the domain of '{check.pair}'"
                raise ConfigurationError(errmsg)


# ----- Instantiated Policies ----- #


@dataclass(frozen=True)
class BoundCheck:
    device_id: str
    check: AttributeCheck

    def __str__(self) -> str:
        return f"{self.device_id}.{self.check.attribute}=={self.check.required_value}"


@dataclass(frozen=True)
class LocationPredicate:
    location: str
    bound_checks: tuple[BoundCheck, ...]


@dataclass(frozen=True)
class InstantiatedPolicy:
    aho: str
    target_value: str
    template_id: str
    predicates: tuple[LocationPredicate, ...]

    def __post_init__(self) -> None:
        if not self.predicates:
            errmsg = f"Policy for {self.aho}={self.target_value} has no predicates"
            raise ValueError(errmsg)


def _online_by_location(home: Home) -> dict[str, list[DeviceInstance]]:
    by_location: dict[str, list[DeviceInstance]] = {}
    for device in home.devices:  # sorted by id
        if device.online:
            by_location.setdefault(device.location, []).append(device)
    return by_location


def _bind(template: PolicyTemplate, home: Home, location: str, by_location: Mapping) -> LocationPredicate | None:
    bound = []
    tiers = [by_location.get(location, [])]
    tiers.append(sorted((device for other in home.adjacent(location) for device in by_location.get(other, [])), key=lambda d: d.id))
    for check in template.checks:
        device = next(
            (device for tier in tiers for device in tier if device.device_type == check.device_type),
            None,
        )
        if device is None:
            return None
        bound.append(BoundCheck(device.id, check))
    return LocationPredicate(location, tuple(bound))


def feasible_locations(template: PolicyTemplate, home: Home) -> frozenset[str]:
    """Every location where each check of the template can be bound to an online device."""
    by_location = _online_by_location(home)
    return frozenset(
        location for location in home.locations if _bind(template, home, location, by_location) is not None
    )


def instantiate(templates: Iterable[PolicyTemplate], home: Home, aho: str, target_value: str) -> InstantiatedPolicy | None:
    """
    Selects the most restrictive feasible template for ``(aho, target_value)`` (the most
    checks, then the smallest id) and binds one predicate per feasible location.

    Returns:
        The instantiated policy, or ``None`` if no template is feasible.
    """
    by_location = _online_by_location(home)
    candidates = sorted(
        (template for template in templates if template.target == (aho, target_value)),
        key=lambda template: (-len(template), template.id),
    )
    for template in candidates:
        predicates = tuple(
            predicate
            for location in home.locations
            if (predicate := _bind(template, home, location, by_location)) is not None
        )
        if predicates:
            LOGGER.debug(f"Instantiated '{template.id}' at {[p.location for p in predicates]}")
            return InstantiatedPolicy(aho, target_value, template.id, predicates)
    return None


# ----- Evaluation ----- #


class EvidenceMode(Enum):
    MOST_RECENT_CHANGE = "MOST_RECENT_CHANGE"
    CURRENT_STATE = "CURRENT_STATE"


class Action(Enum):
    ALLOW = "ALLOW"
    DENY = "DENY"


@dataclass(frozen=True)
class CheckOutcome:
    """``reason`` is one of satisfied, no_fresh_change, value_mismatch, untrusted_record."""

    bound: BoundCheck
    satisfied: bool
    record: StateRecord | None
    reason: str


@dataclass(frozen=True)
class PredicateOutcome:
    location: str
    checks: tuple[CheckOutcome, ...]

    @property
    def satisfied(self) -> bool:
        return all(outcome.satisfied for outcome in self.checks)


@dataclass(frozen=True)
class Decision:
    action: Action
    evidence: tuple[PredicateOutcome, ...]
    template_id: str | None = None

    @property
    def allowed(self) -> bool:
        return self.action is Action.ALLOW

    @property
    def failed_checks(self) -> tuple[str, ...]:
        return tuple(
            f"{predicate.location}:{outcome.bound}"
            for predicate in self.evidence
            for outcome in predicate.checks
            if not outcome.satisfied
        )


def _check(bound: BoundCheck, snap: StateSnapshot, cfg: FreshnessConfig, mode: EvidenceMode) -> CheckOutcome:
    if mode is EvidenceMode.CURRENT_STATE:
        record = snap.latest(bound.device_id, bound.check.attribute)
    else:
        record = snap.fresh_change(bound.device_id, bound.check.attribute, cfg)
    if record is None:
        return CheckOutcome(bound, False, None, "no_fresh_change")
    if not record.trusted:
        return CheckOutcome(bound, False, record, "untrusted_record")
    if record.value != bound.check.required_value:
        return CheckOutcome(bound, False, record, "value_mismatch")
    return CheckOutcome(bound, True, record, "satisfied")


def evaluate(
    policy: InstantiatedPolicy,
    snap: StateSnapshot,
    cfg: FreshnessConfig,
    mode: EvidenceMode = EvidenceMode.MOST_RECENT_CHANGE,
) -> Decision:
    """
    Evaluates the policy's disjunction against one snapshot. Every check of every predicate
    is reported in the evidence, in binding order.
    """
    evidence = tuple(
        PredicateOutcome(predicate.location, tuple(_check(bound, snap, cfg, mode) for bound in predicate.bound_checks))
        for predicate in policy.predicates
    )
    action = Action.ALLOW if any(outcome.satisfied for outcome in evidence) else Action.DENY
    return Decision(action, evidence, policy.template_id)


# ----- Engine ----- #


class PolicyEngine:
    """
    Holds the template library and the active instantiated policy of every endorsed
    (AHO, value). Attached to the home's bus, it reinstantiates on every inventory or
    endorsement change; the active set is swapped in one assignment.

    Args:
        home (Home): the home whose inventory policies are bound against.
        templates (Iterable[PolicyTemplate]): the template library.
    """

    def __init__(self, home: Home, templates: Iterable[PolicyTemplate] = ()) -> None:
        self.home = home
        self.evaluations = 0
        self._templates: dict[_Target, dict[str, PolicyTemplate]] = {}
        self._active: Mapping[_Target, InstantiatedPolicy] = MappingProxyType({})
        self._unprotectable: frozenset[_Target] = frozenset()
        self._lock = threading.RLock()
        self.add_templates(templates)

    # ----- Library ----- #

    def add_templates(self, templates: Iterable[PolicyTemplate]) -> int:
        """
        Adds templates for the AHOs the home defines, skipping the others.

        Raises:
            ConfigurationError: if a template checks an untrusted or unknown pair, or targets
                a value outside its AHO's domain.
        """
        added = skipped = 0
        defined = {aho.name for aho in self.home.ahos}
        with self._lock:
            for template in templates:
                if template.aho not in defined:
                    skipped += 1
                    continue
                if not self.home.aho(template.aho).accepts(template.target_value):
                    errmsg = f"Template '{template.id}' targets unknown value '{template.target_value}' of '{template.aho}'"
                    raise ConfigurationError(errmsg)
                template.validate(self.home.catalog)
                self._templates.setdefault(template.target, {})[template.id] = template
                added += 1
        if skipped:
            LOGGER.debug(f"Skipped {skipped} templates for AHOs this home does not define")
        LOGGER.info(f"Loaded {added} policy templates")
        return added

    def templates_for(self, aho: str, target_value: str) -> tuple[PolicyTemplate, ...]:
        return tuple(self._templates.get((aho, target_value), {}).values())

    def endorsed_values(self, aho: str) -> tuple[str, ...]:
        """
        The values of an endorsed AHO that writes are checked for: those with templates, or
        every value if the AHO has no template at all.
        """
        values = self.home.aho(aho).values
        with_templates = tuple(value for value in values if (aho, value) in self._templates)
        return with_templates or values

    def is_endorsed_target(self, aho: str, value: str) -> bool:
        return self.home.aho(aho).endorsed and value in self.endorsed_values(aho)

    # ----- Instantiation ----- #

    def attach(self) -> None:
        """Subscribes to inventory and endorsement changes, then instantiates."""
        self.home.bus.subscribe(InventoryEvent, self.reinstantiate_on_event)
        self.home.bus.subscribe(EndorsementChanged, self.reinstantiate_on_event)
        self.instantiate_all()

    def instantiate_all(self) -> Mapping[_Target, InstantiatedPolicy]:
        """Instantiates every endorsed target and replaces the active policy set."""
        with self._lock:
            active: dict[_Target, InstantiatedPolicy] = {}
            unprotectable: set[_Target] = set()
            for aho in self.home.ahos:
                if not aho.endorsed:
                    continue
                for value in self.endorsed_values(aho.name):
                    policy = instantiate(self.templates_for(aho.name, value), self.home, aho.name, value)
                    if policy is None:
                        unprotectable.add((aho.name, value))
                    else:
                        active[(aho.name, value)] = policy
            newly_unprotectable = sorted(unprotectable - self._unprotectable)
            self._active = MappingProxyType(active)
            self._unprotectable = frozenset(unprotectable)

        LOGGER.info(f"{len(active)} active endorsement policies, {len(unprotectable)} unprotectable targets")
        for aho, value in newly_unprotectable:
            LOGGER.warning(f"No feasible policy for {aho}={value}, third-party writes will be denied")
            self.home.bus.publish(AhoUnprotectable(aho, value))
        return self._active

    def reinstantiate_on_event(self, event: Event) -> Mapping[_Target, InstantiatedPolicy]:
        LOGGER.debug(f"Reinstantiating policies on {type(event).__name__}")
        return self.instantiate_all()

    @property
    def active(self) -> Mapping[_Target, InstantiatedPolicy]:
        return self._active

    @property
    def unprotectable(self) -> frozenset[_Target]:
        return self._unprotectable

    def active_policy(self, aho: str, value: str) -> InstantiatedPolicy | None:
        return self._active.get((aho, value))

    # ----- Evaluation ----- #

    def evaluate(
        self,
        aho: str,
        value: str,
        snap: StateSnapshot,
        cfg: FreshnessConfig,
        mode: EvidenceMode = EvidenceMode.MOST_RECENT_CHANGE,
    ) -> Decision:
        """Evaluates the active policy of the target; a target without one is denied."""
        self.evaluations += 1
        policy = self._active.get((aho, value))
        if policy is None:
            return Decision(Action.DENY, (), None)
        return evaluate(policy, snap, cfg, mode)

    def show(self) -> str:
        """Text listing of the active policies with their bindings and the unprotectable targets."""
        lines = []
        for (aho, value), policy in sorted(self._active.items()):
            checks = len(policy.predicates[0].bound_checks)
            lines.append(f"{aho}={value}  [{policy.template_id}] ({checks} checks)")
            for predicate in policy.predicates:
                lines.append(f"    {predicate.location}: " + " AND ".join(str(bound) for bound in predicate.bound_checks))
        for aho, value in sorted(self._unprotectable):
            lines.append(f"{aho}={value}  UNPROTECTABLE")
        return "\n".join(lines) if lines else "no endorsed AHOs"


# ----- Template Files ----- #


def _template_from_model(model: TemplateModel) -> PolicyTemplate:
    checks = tuple(
        AttributeCheck(check.type, check.attribute, AttributeValue.parse(check.value), check.strong)
        for check in model.checks
    )
    return PolicyTemplate(model.id, model.aho, model.value, checks)


def read_templates(path: pathlib.Path | str) -> list[PolicyTemplate]:
    """Reads a policy template file."""
    model: TemplateFileModel = read_json_model(path, TemplateFileModel)
    templates = [_template_from_model(record) for record in model.root]
    LOGGER.debug(f"Read {len(templates)} templates from {pathlib.Path(path).name}")
    return templates


def write_templates(path: pathlib.Path | str, templates: Iterable[PolicyTemplate]) -> None:
    """Writes templates as a policy template file, sorted by id."""
    model = TemplateFileModel(
        [
            TemplateModel(
                id=template.id,
                aho=template.aho,
                value=template.target_value,
                checks=[
                    CheckModel(type=check.device_type, attribute=check.attribute, value=str(check.required_value), strong=check.strong)
                    for check in template.checks
                ],
            )
            for template in sorted(templates, key=lambda template: template.id)
        ]
    )
    pathlib.Path(path).write_text(json.dumps(model.model_dump(mode="json"), indent=1) + "\n")
    LOGGER.info(f"Wrote {len(model.root)} templates to {path}")
