"""
Config
------

File formats of the platform, validated with ``pydantic``: the home configuration, the
device catalog, policy template files, inference tables, the device-attribute sources read by
the specification toolkit, scenario manifests and the compatibility suite. Loaders turn them
into the domain objects of `hendorse.home`.
"""

from __future__ import annotations

import json
import logging
import pathlib
from typing import Literal

from pydantic import BaseModel, ConfigDict, Field, RootModel, ValidationError, field_validator, model_validator

from hendorse.constants import DEFAULT_FRESHNESS_THRESHOLD_MS, DEFAULT_RESET_DELAY_MS, DEVICE_CATALOG
from hendorse.errors import ConfigurationError, EndorsementError
from hendorse.home import (
    Aho,
    ApiToken,
    AttributeValue,
    DeviceAttribute,
    DeviceCatalog,
    DeviceInstance,
    Home,
    Interaction,
    InteractionRecord,
    TrustClass,
)

LOGGER = logging.getLogger(__name__)


def _check_value(text: str) -> str:
    AttributeValue.parse(text)  # raises ValueError, reported by pydantic
    return text


class _Model(BaseModel):
    model_config = ConfigDict(extra="forbid")


# ----- Device Catalog ----- #


class AttributeEntryModel(_Model):
    device_type: str
    attribute: str
    trust_class: TrustClass = TrustClass.UNTRUSTED
    values: list[str] = Field(min_length=1)
    neutral: str | None = None

    @field_validator("values")
    @classmethod
    def check_values(cls, values: list[str]) -> list[str]:
        return [_check_value(value) for value in values]

    def to_attribute(self) -> DeviceAttribute:
        return DeviceAttribute(
            device_type=self.device_type,
            attribute=self.attribute,
            trust_class=self.trust_class,
            value_domain=frozenset(AttributeValue.parse(value) for value in self.values),
            neutral=None if self.neutral is None else AttributeValue.parse(self.neutral),
        )

    @classmethod
    def from_attribute(cls, entry: DeviceAttribute) -> AttributeEntryModel:
        return cls(
            device_type=entry.device_type,
            attribute=entry.attribute,
            trust_class=entry.trust_class,
            values=entry.sorted_values(),
            neutral=None if entry.neutral is None else str(entry.neutral),
        )


class InteractionRecordModel(_Model):
    attribute: str
    value: str
    reset: bool = False
    reset_after_ms: int | None = Field(default=None, gt=0)


class InteractionModel(_Model):
    params: dict[str, str] = Field(default_factory=dict)
    records: list[InteractionRecordModel] = Field(min_length=1)


class CatalogModel(_Model):
    attributes: list[AttributeEntryModel]
    interactions: dict[str, dict[str, InteractionModel]] = Field(default_factory=dict)


# ----- Home Configuration ----- #


class DeviceModel(_Model):
    id: str
    type: str
    location: str
    online: bool = True
    state: dict[str, str] = Field(default_factory=dict)  # initial device reports at boot


class AhoModel(_Model):
    name: str
    values: list[str] = Field(min_length=1)
    initial: str | None = None
    endorsed: bool = False
    grants: list[str] = Field(default_factory=list)


class TokenModel(_Model):
    token: str
    label: str
    local: bool = False
    device_attributes: list[str] = Field(default_factory=list)


class ObjectValueModel(_Model):
    """Either ``{"aho": ..., "value": ...}`` or ``{"device": ..., "attribute": ..., "value": ...}``."""

    aho: str | None = None
    device: str | None = None
    attribute: str | None = None
    value: str

    @model_validator(mode="after")
    def check_one_object(self) -> ObjectValueModel:
        if (self.aho is None) == (self.device is None or self.attribute is None):
            errmsg = "give either 'aho' or both 'device' and 'attribute'"
            raise ValueError(errmsg)
        _check_value(self.value)
        return self


class RoutineModel(_Model):
    id: str
    trigger: ObjectValueModel
    action: ObjectValueModel


class HomeConfig(_Model):
    """
    Home configuration file. Cross references (grants, routine objects, initial values)
    are checked when the home is loaded, as they need the catalog.
    """

    name: str = "home"
    freshness_threshold_ms: int = Field(default=DEFAULT_FRESHNESS_THRESHOLD_MS, gt=0)
    reset_delay_ms: int = Field(default=DEFAULT_RESET_DELAY_MS, gt=0)
    history_limit: int | None = Field(default=None, gt=0)
    catalog: pathlib.Path | None = None
    locations: list[str] = Field(default_factory=list)
    adjacency: dict[str, list[str]] = Field(default_factory=dict)
    devices: list[DeviceModel] = Field(default_factory=list)
    ahos: list[AhoModel] = Field(default_factory=list)
    tokens: list[TokenModel] = Field(default_factory=list)
    routines: list[RoutineModel] = Field(default_factory=list)


# ----- Policies & Inferences ----- #


class CheckModel(_Model):
    type: str
    attribute: str
    value: str
    strong: bool = False

    @field_validator("value")
    @classmethod
    def check_value(cls, value: str) -> str:
        return _check_value(value)


class TemplateModel(_Model):
    id: str
    aho: str
    value: str
    checks: list[CheckModel] = Field(min_length=1)


class TemplateFileModel(RootModel[list[TemplateModel]]):
    """A policy template file: a JSON list of template records."""


class InferenceModel(_Model):
    device_type: str
    attribute: str
    value: str
    aho: str
    target: str
    strength: Literal["STRONG", "SUPPORTING"] = "SUPPORTING"
    note: str | None = None

    @field_validator("value")
    @classmethod
    def check_value(cls, value: str) -> str:
        return _check_value(value)


class InferenceTableModel(_Model):
    inferences: list[InferenceModel]


# ----- Device-Attribute Sources ----- #


class _SourceModel(BaseModel):
    model_config = ConfigDict(extra="ignore")  # vendor documents carry much more than we read


class OcfPropertyModel(_SourceModel):
    access: Literal["R", "RW", "W"] = "RW"
    values: list[str] = Field(default_factory=list)


class OcfResourceModel(_SourceModel):
    properties: dict[str, OcfPropertyModel] = Field(default_factory=dict)


class OcfDeviceModel(_SourceModel):
    rt: str | None = None
    resources: dict[str, OcfResourceModel] = Field(default_factory=dict)


class OcfDocumentModel(_SourceModel):
    """An OCF-style device document: device type -> resources -> properties."""

    devices: dict[str, OcfDeviceModel]


class AttrRecordModel(_SourceModel):
    type: str
    attribute: str
    writable: bool
    values: list[str] = Field(default_factory=list)


class AttrListModel(RootModel[list[AttrRecordModel]]):
    """A flat attribute list: one record per (device type, attribute)."""


class DesignatedModel(_Model):
    designated: list[str]

    @field_validator("designated")
    @classmethod
    def check_pairs(cls, pairs: list[str]) -> list[str]:
        for pair in pairs:
            if pair.count(".") != 1 or pair.startswith(".") or pair.endswith("."):
                errmsg = f"Designated entries are written 'device-type.attribute', got '{pair}'"
                raise ValueError(errmsg)
        return pairs


# ----- Scenarios ----- #


class ScenarioEntryModel(_Model):
    id: str
    script: str
    home: str
    decision: Literal["ALLOW", "DENY"]
    golden: bool = False


class ManifestModel(_Model):
    scenarios: list[ScenarioEntryModel] = Field(min_length=1)


class CompatSuiteModel(_Model):
    home: str
    events: int = Field(gt=0)
    seed: int
    min_gap_ms: int = Field(default=100, ge=0)
    max_gap_ms: int = Field(default=5000, gt=0)
    stimuli: list[str] = Field(min_length=1)

    @model_validator(mode="after")
    def check_gaps(self) -> CompatSuiteModel:
        if self.min_gap_ms > self.max_gap_ms:
            errmsg = "min_gap_ms must not exceed max_gap_ms"
            raise ValueError(errmsg)
        return self


# ----- Loaders ----- #


def read_json_model(path: pathlib.Path | str, model: type[BaseModel]) -> BaseModel:
    """
    Reads and validates a JSON file against a ``pydantic`` model.

    Raises:
        ConfigurationError: if the file is not valid JSON or does not match the model.
    """
    path = pathlib.Path(path)
    LOGGER.debug(f"Loading {model.__name__} from {path.absolute()}")
    try:
        return model.model_validate(json.loads(path.read_text(encoding="utf-8")))
    except json.JSONDecodeError as error:
        errmsg = f"{path.name} is not valid JSON: {error}"
        raise ConfigurationError(errmsg) from error
    except ValidationError as error:
        LOGGER.error(f"Invalid {model.__name__} in {path.name}")
        errmsg = f"Invalid {path.name}: {error}"
        raise ConfigurationError(errmsg) from error


def load_home_config(path: pathlib.Path | str) -> HomeConfig:
    """Reads a home configuration file, resolving a relative catalog path against its directory."""
    path = pathlib.Path(path)
    config: HomeConfig = read_json_model(path, HomeConfig)
    if config.catalog is not None and not config.catalog.is_absolute():
        config = config.model_copy(update={"catalog": (path.parent / config.catalog).resolve()})
    return config


def load_catalog(path: pathlib.Path | str | None = None) -> DeviceCatalog:
    """
    Loads a device catalog file, the bundled one if no path is given. A device-attribute map
    written by ``he spec ingest`` is a valid catalog without interactions.
    """
    model: CatalogModel = read_json_model(path or DEVICE_CATALOG, CatalogModel)
    try:
        entries = [entry.to_attribute() for entry in model.attributes]
        interactions = {
            device_type: {
                verb: Interaction(
                    verb=verb,
                    params=dict(interaction.params),
                    records=tuple(InteractionRecord(**record.model_dump()) for record in interaction.records),
                )
                for verb, interaction in verbs.items()
            }
            for device_type, verbs in model.interactions.items()
        }
        catalog = DeviceCatalog(entries, interactions)
    except EndorsementError as error:
        errmsg = f"Invalid device catalog: {error}"
        raise ConfigurationError(errmsg) from error
    LOGGER.debug(f"Loaded catalog with {len(catalog.device_types)} device types and {len(catalog)} pairs")
    return catalog


def write_catalog(path: pathlib.Path | str, entries: DeviceCatalog | list[DeviceAttribute]) -> None:
    """Writes device-attribute entries in the catalog format (without interactions)."""
    model = CatalogModel(attributes=[AttributeEntryModel.from_attribute(entry) for entry in entries])
    pathlib.Path(path).write_text(json.dumps(model.model_dump(mode="json", exclude={"interactions"}), indent=2) + "\n")


def load_home(config: HomeConfig | pathlib.Path | str, catalog: DeviceCatalog | None = None) -> Home:
    """
    Builds a ``Home`` registry from a configuration: locations, adjacency, AHOs, tokens and
    devices, in that order. Routines and initial device states are applied by the platform.

    Args:
        config (HomeConfig | Path | str): the configuration or the path to its file.
        catalog (DeviceCatalog): the catalog to use. Defaults to the catalog named in the
            configuration, or the bundled one.

    Raises:
        ConfigurationError: on dangling references in the configuration.
    """
    if not isinstance(config, HomeConfig):
        config = load_home_config(config)
    catalog = catalog if catalog is not None else load_catalog(config.catalog)
    home = Home(
        catalog, locations=config.locations, adjacency=config.adjacency, history_limit=config.history_limit
    )

    known_tokens = {token.token for token in config.tokens}
    try:
        for token in config.tokens:
            home.add_token(ApiToken(token.token, token.label, token.local, frozenset(token.device_attributes)))
        for aho in config.ahos:
            unknown = set(aho.grants) - known_tokens
            if unknown:
                errmsg = f"AHO '{aho.name}' grants unknown tokens {sorted(unknown)}"
                raise ConfigurationError(errmsg)
            home.define_aho(Aho(aho.name, tuple(aho.values), aho.endorsed, frozenset(aho.grants), aho.initial))
        for device in config.devices:
            home.register_device(DeviceInstance(device.id, device.type, device.location, device.online))
        for token in config.tokens:
            for grant in token.device_attributes:
                device_id, _, attribute = grant.partition(".")
                if attribute != "*":
                    home.attribute_of(device_id, attribute)
    except EndorsementError as error:
        if isinstance(error, ConfigurationError):
            raise
        errmsg = f"Invalid home configuration '{config.name}': {error}"
        raise ConfigurationError(errmsg) from error
    LOGGER.info(f"Loaded home '{config.name}' with {len(home.devices)} devices and {len(home.ahos)} AHOs")
    return home
