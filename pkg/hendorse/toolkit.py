"""
Toolkit
-------

The policy specification pipeline: ingest device-attribute sources into one
``DeviceAttributeMap``, classify endorsement attributes, read human-authored inference
tables and generate policy templates from them.

.. admonition:: **Source formats**

    - ``OCF_JSON``: a JSON object whose ``devices`` map device types to resources and
      properties. Properties with ``R`` access are read-only.
    - ``ATTR_LIST``: a JSON list of ``{type, attribute, writable, values}`` records.
    - ``HANDLER_PREAMBLE``: device handler source code. Only the ``capability "X"`` lines
      inside ``definition (...) { }`` blocks are read, they carry no writability and no
      values.

    Designated attributes come from a separate override list, which also settles pairs
    whose sources disagree on writability.
"""

from __future__ import annotations

import itertools
import json
import logging
import pathlib
import re
from collections import defaultdict
from dataclasses import dataclass, field
from enum import Enum
from typing import TYPE_CHECKING

from pydantic import ValidationError

from hendorse.config import (
    AttrListModel,
    DesignatedModel,
    InferenceTableModel,
    OcfDocumentModel,
    read_json_model,
)
from hendorse.constants import ANY_VALUE, INFERENCES
from hendorse.errors import (
    ConfigurationError,
    ConflictingTrustClassError,
    EndorsementError,
    MixedTargetError,
    SourceParseError,
)
from hendorse.home import AttributeValue, DeviceAttribute, DeviceAttributeMap, TrustClass
from hendorse.policy import AttributeCheck, PolicyTemplate, read_templates

if TYPE_CHECKING:
    from collections.abc import Iterable, Sequence

    from pydantic import BaseModel

LOGGER = logging.getLogger(__name__)

_DEFINITION = re.compile(r"^\s*definition\s*\((?P<args>.*)\)\s*\{\s*$")
_DEFINITION_NAME = re.compile(r"\bname\s*:\s*\"(?P<name>[^\"]+)\"")
_CAPABILITY = re.compile(r"^\s*capability\s+\"(?P<name>[^\"]+)\"\s*$")


class SourceFormat(Enum):
    OCF_JSON = "OCF_JSON"
    ATTR_LIST = "ATTR_LIST"
    HANDLER_PREAMBLE = "HANDLER_PREAMBLE"


# ----- Names ----- #


def slugify(name: str) -> str:
    """Device type names as lower-case hyphenated slugs: ``Z-Wave Lock`` -> ``zwave-lock``."""
    return "-".join(re.sub(r"[^0-9a-z\s]", "", name.lower()).split())


def camel_case(name: str) -> str:
    """Capability names in lower camel case: ``Health Check`` -> ``healthCheck``."""
    words = re.findall(r"[0-9A-Za-z]+", name)
    if not words:
        errmsg = f"Cannot build an attribute name from '{name}'"
        raise ValueError(errmsg)
    return words[0].lower() + "".join(word[:1].upper() + word[1:] for word in words[1:])


# ----- Parsing ----- #


@dataclass(frozen=True)
class SourceEntry:
    """A pair as one source declares it. ``read_only`` is ``None`` when the source does not say."""

    device_type: str
    attribute: str
    read_only: bool | None
    values: tuple[str, ...] = ()

    @property
    def pair(self) -> str:
        return f"{self.device_type}.{self.attribute}"


def detect_format(path: pathlib.Path | str) -> SourceFormat | None:
    """
    Guesses the format of a source: handler code by suffix, JSON by its top-level shape.

    Returns:
        The format, or ``None`` for an empty file.

    Raises:
        SourceParseError: if the file is JSON of neither known shape.
    """
    path = pathlib.Path(path)
    if path.suffix in (".groovy", ".txt"):
        return SourceFormat.HANDLER_PREAMBLE
    text = path.read_text(encoding="utf-8")
    if not text.strip():
        return None
    document = _load_json(path, text)
    if isinstance(document, dict) and "devices" in document:
        return SourceFormat.OCF_JSON
    if isinstance(document, list):
        return SourceFormat.ATTR_LIST
    raise SourceParseError(path, 1, 1, "neither an OCF device document nor an attribute list")


def parse_source(path: pathlib.Path | str, source_format: SourceFormat | str | None = None) -> list[SourceEntry]:
    """
    Reads the raw entries of one source file. An empty file has no entries.

    Args:
        path (pathlib.Path | str): the source file.
        source_format (SourceFormat | str): its format, detected if not given.

    Raises:
        SourceParseError: if the file does not parse in its format.
    """
    path = pathlib.Path(path)
    text = path.read_text(encoding="utf-8")
    if not text.strip():
        LOGGER.debug(f"Empty source {path.name}")
        return []
    source_format = SourceFormat(source_format) if source_format is not None else detect_format(path)

    if source_format is SourceFormat.HANDLER_PREAMBLE:
        entries = _parse_preambles(path, text)
    elif source_format is SourceFormat.OCF_JSON:
        document = _validate(path, _load_json(path, text), OcfDocumentModel)
        entries = [
            SourceEntry(slugify(device_type), name, prop.access == "R", tuple(prop.values))
            for device_type, device in document.devices.items()
            for resource in device.resources.values()
            for name, prop in resource.properties.items()
        ]
    else:
        records = _validate(path, _load_json(path, text), AttrListModel)
        entries = [
            SourceEntry(slugify(record.type), record.attribute, not record.writable, tuple(record.values))
            for record in records.root
        ]
    LOGGER.debug(f"Parsed {len(entries)} entries from {path.name} ({source_format.value})")
    return entries


def _load_json(path: pathlib.Path, text: str) -> object:
    try:
        return json.loads(text)
    except json.JSONDecodeError as error:
        raise SourceParseError(path, error.lineno, error.colno, error.msg) from error


def _validate(path: pathlib.Path, document: object, model: type[BaseModel]) -> BaseModel:
    try:
        return model.model_validate(document)
    except ValidationError as error:
        first = error.errors()[0]
        location = ".".join(str(part) for part in first["loc"]) or "document"
        raise SourceParseError(path, 1, 1, f"{location}: {first['msg']}") from error


def _parse_preambles(path: pathlib.Path, text: str) -> list[SourceEntry]:
    entries: dict[tuple[str, str], SourceEntry] = {}
    device_type: str | None = None
    depth = 0
    start = 0
    for number, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if device_type is None:
            if not stripped.startswith("definition"):
                continue
            match = _DEFINITION.match(line)
            name = _DEFINITION_NAME.search(match["args"]) if match else None
            if name is None:
                column = line.index("definition") + 1
                raise SourceParseError(path, number, column, "definition without a quoted name or opening brace")
            device_type, depth, start = slugify(name["name"]), 1, number
            continue

        if stripped.startswith("capability"):
            match = _CAPABILITY.match(line)
            if match is None:
                raise SourceParseError(path, number, line.index("capability") + 1, "malformed capability declaration")
            attribute = camel_case(match["name"])
            entries.setdefault((device_type, attribute), SourceEntry(device_type, attribute, None))
        depth += line.count("{") - line.count("}")
        if depth <= 0:
            device_type = None
    if device_type is not None:
        raise SourceParseError(path, start, 1, f"definition of '{device_type}' is never closed")
    return list(entries.values())


# ----- Ingestion ----- #


@dataclass
class IngestReport:
    """What an ingestion run read: entries per source and the conflicts settled by overrides."""

    sources: dict[str, int] = field(default_factory=dict)
    conflicts: list[str] = field(default_factory=list)
    device_types: int = 0
    pairs: int = 0
    endorsement_attributes: int = 0

    def __str__(self) -> str:
        lines = [f"{name}: {count} entries" for name, count in self.sources.items()]
        lines.append(
            f"{self.device_types} device types, {self.pairs} device-attribute pairs, "
            f"{self.endorsement_attributes} endorsement attributes"
        )
        lines.extend(f"conflict resolved by override: {pair}" for pair in self.conflicts)
        return "\n".join(lines)


def read_designated(path: pathlib.Path | str) -> frozenset[str]:
    """Reads a designated override list of ``device-type.attribute`` entries."""
    model: DesignatedModel = read_json_model(path, DesignatedModel)
    return frozenset(model.designated)


def ingest(
    path: pathlib.Path | str,
    source_format: SourceFormat | str | None = None,
    designated: Iterable[str] = (),
) -> DeviceAttributeMap:
    """Ingests a single source file. See `ingest_all`."""
    device_map, _ = ingest_all([path], source_format, designated)
    return device_map


def ingest_all(
    paths: Sequence[pathlib.Path | str],
    source_format: SourceFormat | str | None = None,
    designated: Iterable[str] = (),
) -> tuple[DeviceAttributeMap, IngestReport]:
    """
    Merges source files into one device-attribute map.

    .. admonition:: **Trust classes**

        A pair listed in ``designated`` is ``DESIGNATED``. Otherwise it is ``READ_ONLY`` if
        a source says so and ``UNTRUSTED`` if none does. Value domains are the union of the
        declared values, or the ``ANY`` placeholder if no source declares any.

    Args:
        paths (Sequence[pathlib.Path | str]): the source files.
        source_format (SourceFormat | str): format of every file, detected per file if not given.
        designated (Iterable[str]): the designated override list.

    Returns:
        The merged map and an ``IngestReport``. Ingesting the same file twice changes nothing.

    Raises:
        SourceParseError: if a file does not parse.
        ConflictingTrustClassError: if sources disagree on writability of a pair that is
            not in the override list.
    """
    designated = frozenset(designated)
    report = IngestReport()
    flags: dict[tuple[str, str], set[bool]] = defaultdict(set)
    values: dict[tuple[str, str], set[str]] = defaultdict(set)

    for path in paths:
        path = pathlib.Path(path)
        entries = parse_source(path, source_format)
        report.sources[path.name] = len(entries)
        for entry in entries:
            key = (entry.device_type, entry.attribute)
            if entry.read_only is not None:
                flags[key].add(entry.read_only)
            else:
                flags.setdefault(key, set())
            values[key].update(entry.values)

    device_map = DeviceAttributeMap()
    for key in sorted(flags):
        pair = ".".join(key)
        seen = flags[key]
        if pair in designated:
            trust_class = TrustClass.DESIGNATED
            if len(seen) > 1:
                LOGGER.warning(f"Sources disagree on the writability of '{pair}', resolved as designated")
                report.conflicts.append(pair)
        elif len(seen) > 1:
            raise ConflictingTrustClassError(pair, TrustClass.READ_ONLY.value, TrustClass.UNTRUSTED.value)
        else:
            trust_class = TrustClass.READ_ONLY if True in seen else TrustClass.UNTRUSTED
        domain = values[key] or {ANY_VALUE}
        try:
            device_map.add(
                DeviceAttribute(key[0], key[1], trust_class, frozenset(AttributeValue.parse(value) for value in domain))
            )
        except ValueError as error:
            errmsg = f"Invalid value in the domain of '{pair}': {error}"
            raise ConfigurationError(errmsg) from error

    unmatched = designated - {".".join(key) for key in flags}
    if unmatched:
        LOGGER.warning(f"Designated pairs found in no source: {sorted(unmatched)}")

    report.device_types = len(device_map.device_types)
    report.pairs = len(device_map)
    report.endorsement_attributes = len(device_map.endorsement_attributes())
    LOGGER.info(
        f"Ingested {report.pairs} pairs over {report.device_types} device types "
        f"({report.endorsement_attributes} endorsement attributes)"
    )
    return device_map, report


# ----- Inferences ----- #


class Strength(Enum):
    STRONG = "STRONG"
    SUPPORTING = "SUPPORTING"


@dataclass(frozen=True)
class Inference:
    """A human-coded inference: ``pair == required_value`` supports ``aho == target_value``."""

    pair: DeviceAttribute
    required_value: AttributeValue
    aho: str
    target_value: str
    strength: Strength = Strength.SUPPORTING
    note: str | None = None

    def __post_init__(self) -> None:
        if not self.pair.is_endorsement:
            errmsg = f"Inference on untrusted attribute '{self.pair.pair}'"
            raise ConfigurationError(errmsg)
        if not self.pair.accepts(self.required_value) and not self.pair.accepts(AttributeValue(ANY_VALUE)):
            errmsg = f"Inference requires '{self.required_value}', outside the domain of '{self.pair.pair}'"
            raise ConfigurationError(errmsg)

    @property
    def target(self) -> tuple[str, str]:
        return (self.aho, self.target_value)

    def as_check(self) -> AttributeCheck:
        return AttributeCheck(
            self.pair.device_type, self.pair.attribute, self.required_value, self.strength is Strength.STRONG
        )


def load_inferences(path: pathlib.Path | str, catalog: DeviceAttributeMap) -> list[Inference]:
    """
    Reads an inference table against a device-attribute map.

    Raises:
        ConfigurationError: if a pair is unknown or untrusted, or a value is outside its domain.
    """
    model: InferenceTableModel = read_json_model(path, InferenceTableModel)
    inferences = []
    for record in model.inferences:
        try:
            pair = catalog.attribute(record.device_type, record.attribute)
        except EndorsementError as error:
            errmsg = f"Inference table {pathlib.Path(path).name}: {error}"
            raise ConfigurationError(errmsg) from error
        inferences.append(
            Inference(
                pair,
                AttributeValue.parse(record.value),
                record.aho,
                record.target,
                Strength(record.strength),
                record.note,
            )
        )
    return inferences


def group_by_target(inferences: Iterable[Inference]) -> dict[tuple[str, str], list[Inference]]:
    groups: dict[tuple[str, str], list[Inference]] = defaultdict(list)
    for inference in inferences:
        groups[inference.target].append(inference)
    return dict(sorted(groups.items()))


# ----- Templates ----- #


def generate_templates(inferences: Iterable[Inference]) -> list[PolicyTemplate]:
    """
    Generates one template per non-empty subset of the inferences of a single
    (AHO, value): ``2**n - 1`` templates for ``n`` inferences, sorted by id.

    Raises:
        ConfigurationError: if there are no inferences or a pair appears twice.
        MixedTargetError: if the inferences target more than one (AHO, value).
    """
    inferences = list(inferences)
    if not inferences:
        errmsg = "No inferences to generate templates from"
        raise ConfigurationError(errmsg)
    targets = {inference.target for inference in inferences}
    if len(targets) > 1:
        raise MixedTargetError({f"{aho}={value}" for aho, value in targets})
    aho, value = next(iter(targets))

    checks = [inference.as_check() for inference in inferences]
    if len({check.pair for check in checks}) != len(checks):
        errmsg = f"Inferences for {aho}={value} name a device attribute more than once"
        raise ConfigurationError(errmsg)

    templates = [
        PolicyTemplate.from_checks(aho, value, subset)
        for size in range(1, len(checks) + 1)
        for subset in itertools.combinations(checks, size)
    ]
    LOGGER.debug(f"Generated {len(templates)} templates for {aho}={value}")
    return sorted(templates, key=lambda template: template.id)


def generate_library(inferences: Iterable[Inference]) -> list[PolicyTemplate]:
    """Templates for every (AHO, value) the inferences target."""
    return [template for group in group_by_target(inferences).values() for template in generate_templates(group)]


@dataclass(frozen=True)
class FilterReport:
    templates: tuple[PolicyTemplate, ...]
    count: int
    total: int
    criteria: str = ""

    def __str__(self) -> str:
        return f"{self.count} of {self.total} templates kept ({self.criteria or 'no criteria'})"


def filter_templates(
    templates: Iterable[PolicyTemplate],
    min_strong: int | None = None,
    contains_pair: str | None = None,
    max_size: int | None = None,
) -> FilterReport:
    """
    Keeps the templates meeting every given criterion.

    Args:
        templates (Iterable[PolicyTemplate]): the templates to filter.
        min_strong (int): minimum number of strong checks.
        contains_pair (str): a ``device-type.attribute`` pair the template must check.
        max_size (int): maximum number of checks.
    """
    templates = list(templates)
    kept = tuple(
        template
        for template in templates
        if (min_strong is None or template.strong_count >= min_strong)
        and (contains_pair is None or any(check.pair == contains_pair for check in template.checks))
        and (max_size is None or len(template) <= max_size)
    )
    criteria = ", ".join(
        f"{name}={value}"
        for name, value in (("min_strong", min_strong), ("contains_pair", contains_pair), ("max_size", max_size))
        if value is not None
    )
    return FilterReport(kept, len(kept), len(templates), criteria)


# ----- Policy Sources ----- #


def load_policies(
    paths: Iterable[pathlib.Path | str] | None, catalog: DeviceAttributeMap
) -> list[PolicyTemplate]:
    """
    Reads policy files: inference tables are expanded into templates, template files are
    read as they are. Without paths, the bundled inference table is used.
    """
    templates: list[PolicyTemplate] = []
    for path in paths or [INFERENCES]:
        path = pathlib.Path(path)
        try:
            document = json.loads(path.read_text(encoding="utf-8"))
        except json.JSONDecodeError as error:
            errmsg = f"{path.name} is not valid JSON: {error}"
            raise ConfigurationError(errmsg) from error
        if isinstance(document, dict) and "inferences" in document:
            templates.extend(generate_library(load_inferences(path, catalog)))
        else:
            templates.extend(read_templates(path))
    return templates
