"""
Scenario
--------

Replays scenario scripts against a freshly booted platform on its logical clock and checks
their expectations, runs the bundled scenario manifest as a decision matrix, and runs the
seeded compatibility suite.

.. admonition:: **Script grammar**

    One command per line, ``#`` starts a comment::

        at +<ms> physical <device> <verb> [key=value]...
        at +<ms> api token=<token> set-aho <aho> <value>
        at +<ms> api token=<token> set-attr <device> <attribute> <value>
        at +<ms> local set-aho <aho> <value>
        at +<ms> device <device> online|offline
        at +<ms> expect allow
        at +<ms> expect deny permission|endorsement|tamper

    Offsets are milliseconds after boot and never decrease. An ``expect`` line checks the
    outcome of the latest ``api`` or ``local`` request.
"""

from __future__ import annotations

import logging
import pathlib
from collections import Counter
from dataclasses import dataclass, field
from typing import TYPE_CHECKING

import numpy as np

from hendorse.config import CompatSuiteModel, ManifestModel, load_catalog, read_json_model
from hendorse.constants import COMPAT_SUITE, HOMES_DIR, SCENARIO_MANIFEST
from hendorse.errors import EndorsementError, ScriptParseError
from hendorse.frame import RecordFrame
from hendorse.home import AttributeValue, Principal
from hendorse.monitor import AhoChange, DeviceAttributeChange, MediationStatus, StateChangeRequest
from hendorse.platform import PhysicalAction, boot_platform
from hendorse.policy import Action, EvidenceMode
from hendorse.toolkit import load_policies

if TYPE_CHECKING:
    from collections.abc import Sequence

    from hendorse.config import HomeConfig
    from hendorse.home import DeviceCatalog
    from hendorse.monitor import MediationOutcome, Notification
    from hendorse.platform import Platform
    from hendorse.policy import PolicyTemplate

LOGGER = logging.getLogger(__name__)

_EXPECTED_STATUS: dict[tuple[str, ...], MediationStatus] = {
    ("allow",): MediationStatus.APPLIED,
    ("deny", "permission"): MediationStatus.DENIED_PERMISSION,
    ("deny", "endorsement"): MediationStatus.DENIED_ENDORSEMENT,
    ("deny", "tamper"): MediationStatus.DENIED_TAMPER,
}


# ----- Script Model ----- #


@dataclass(frozen=True)
class PhysicalStep:
    action: PhysicalAction


@dataclass(frozen=True)
class RequestStep:
    """An ``api`` request (``token`` set) or a ``local`` dashboard request (``token`` is ``None``)."""

    target: AhoChange | DeviceAttributeChange
    token: str | None = None


@dataclass(frozen=True)
class AvailabilityStep:
    device_id: str
    online: bool


@dataclass(frozen=True)
class Expectation:
    status: MediationStatus


Command = PhysicalStep | RequestStep | AvailabilityStep | Expectation


@dataclass(frozen=True)
class ScriptStep:
    line: int
    offset: int
    command: Command


def parse_command(text: str, line: int = 1) -> Command:
    """
    Parses a command without its ``at +<ms>`` prefix.

    Raises:
        ScriptParseError: if the command does not follow the grammar.
    """
    words = text.split()
    if not words:
        raise ScriptParseError(line, text, "empty command")
    keyword, args = words[0], words[1:]

    try:
        if keyword == "physical" and len(args) >= 2:  # noqa: PLR2004
            params = {}
            for arg in args[2:]:
                key, equals, value = arg.partition("=")
                if not equals or not key or not value:
                    raise ScriptParseError(line, text, f"parameter '{arg}' is not key=value")
                params[key] = value
            return PhysicalStep(PhysicalAction(args[0], args[1], params))

        if keyword == "api" and args and args[0].startswith("token="):
            token = args[0].removeprefix("token=")
            if not token:
                raise ScriptParseError(line, text, "empty token")
            return RequestStep(_request_target(args[1:], text, line), token)

        if keyword == "local":
            return RequestStep(_request_target(args, text, line))

        if keyword == "device" and len(args) == 2 and args[1] in ("online", "offline"):  # noqa: PLR2004
            return AvailabilityStep(args[0], args[1] == "online")

        if keyword == "expect" and tuple(args) in _EXPECTED_STATUS:
            return Expectation(_EXPECTED_STATUS[tuple(args)])
    except ValueError as error:
        raise ScriptParseError(line, text, str(error)) from error
    raise ScriptParseError(line, text, f"unknown or malformed '{keyword}' command")


def _request_target(args: list[str], text: str, line: int) -> AhoChange | DeviceAttributeChange:
    if len(args) == 3 and args[0] == "set-aho":  # noqa: PLR2004
        return AhoChange(args[1], args[2])
    if len(args) == 4 and args[0] == "set-attr":  # noqa: PLR2004
        return DeviceAttributeChange(args[1], args[2], AttributeValue.parse(args[3]))
    raise ScriptParseError(line, text, "expected 'set-aho <aho> <value>' or 'set-attr <device> <attribute> <value>'")


def parse_script(text: str) -> list[ScriptStep]:
    """
    Parses a scenario script.

    Raises:
        ScriptParseError: on the first line breaking the grammar, or an offset going back in time.
    """
    steps = []
    last_offset = 0
    for number, raw in enumerate(text.splitlines(), start=1):
        content = raw.split("#", 1)[0].strip()
        if not content:
            continue
        words = content.split(maxsplit=2)
        if len(words) < 3 or words[0] != "at" or not words[1].startswith("+") or not words[1][1:].isdigit():  # noqa: PLR2004
            raise ScriptParseError(number, raw, "lines start with 'at +<ms>'")
        offset = int(words[1][1:])
        if offset < last_offset:
            raise ScriptParseError(number, raw, f"offset +{offset} is before the previous +{last_offset}")
        steps.append(ScriptStep(number, offset, parse_command(words[2], number)))
        last_offset = offset
    LOGGER.debug(f"Parsed script with {len(steps)} steps")
    return steps


def read_script(path: pathlib.Path | str) -> list[ScriptStep]:
    return parse_script(pathlib.Path(path).read_text(encoding="utf-8"))


# ----- Execution ----- #


def execute(platform: Platform, command: Command, time: int) -> MediationOutcome | None:
    """
    Runs one command on the platform at logical ``time``.

    Returns:
        The mediation outcome of a request, ``None`` for other commands.

    Raises:
        EndorsementError: for platform errors, such as interacting with an offline device.
    """
    if isinstance(command, PhysicalStep):
        platform.apply_physical(command.action, now=time)
        return None
    if isinstance(command, AvailabilityStep):
        platform.advance_to(time)
        platform.set_online(command.device_id, command.online)
        return None
    if isinstance(command, RequestStep):
        if command.token is None:
            principal = Principal.local_user()
        else:  # unknown tokens still go through mediation, which denies them
            principal = platform.home.principal_for(command.token) or Principal.third_party(command.token)
        return platform.submit(StateChangeRequest(principal, command.target, time))
    errmsg = f"{type(command).__name__} is not executable"
    raise TypeError(errmsg)


@dataclass(frozen=True)
class ExpectationResult:
    line: int
    time: int
    expected: MediationStatus
    actual: MediationStatus | None

    @property
    def passed(self) -> bool:
        return self.actual is self.expected

    def __str__(self) -> str:
        actual = "no request" if self.actual is None else self.actual.value
        verdict = "PASS" if self.passed else "FAIL"
        return f"{verdict} line {self.line} t={self.time}: expected {self.expected.value}, got {actual}"


@dataclass
class ScenarioResult:
    """
    Outcome of one scenario run. ``decision`` is the decision on the last ``api`` or
    ``local`` request of the script.
    """

    script_id: str
    expectations: list[ExpectationResult] = field(default_factory=list)
    decision: Action | None = None
    errors: list[str] = field(default_factory=list)
    audit: RecordFrame | None = None
    notifications: tuple[Notification, ...] = ()
    aho_states: dict[str, str] = field(default_factory=dict)
    device_states: dict[str, dict[str, str]] = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return not self.errors and all(result.passed for result in self.expectations)

    @property
    def first_failure(self) -> ExpectationResult | None:
        return next((result for result in self.expectations if not result.passed), None)

    def summary(self) -> str:
        lines = [f"{self.script_id}: {'PASS' if self.passed else 'FAIL'} (decision {self.decision_label})"]
        lines.extend(f"  {result}" for result in self.expectations)
        lines.extend(f"  ERROR {error}" for error in self.errors)
        return "\n".join(lines)

    @property
    def decision_label(self) -> str:
        return "none" if self.decision is None else self.decision.value


def run_steps(platform: Platform, steps: Sequence[ScriptStep], script_id: str = "script") -> ScenarioResult:
    """Replays parsed steps on an already booted platform."""
    result = ScenarioResult(script_id)
    last: MediationOutcome | None = None
    for step in steps:
        if isinstance(step.command, Expectation):
            actual = None if last is None else last.status
            result.expectations.append(ExpectationResult(step.line, step.offset, step.command.status, actual))
            continue
        try:
            outcome = execute(platform, step.command, step.offset)
        except EndorsementError as error:
            LOGGER.warning(f"{script_id} line {step.line}: {error}")
            result.errors.append(f"line {step.line}: {error}")
            continue
        if outcome is not None:
            last = outcome

    if last is not None:
        result.decision = Action.ALLOW if last.applied else Action.DENY
    result.audit = platform.monitor.audit_frame()
    result.audit.headers["SCENARIO"] = script_id
    result.notifications = platform.monitor.notifications.entries
    result.aho_states = platform.aho_states()
    result.device_states = platform.device_states()
    return result


def run_scenario(
    script: pathlib.Path | str,
    config: HomeConfig | pathlib.Path | str,
    templates: Sequence[PolicyTemplate] | None = None,
    evidence_mode: EvidenceMode = EvidenceMode.MOST_RECENT_CHANGE,
    enforcing: bool = True,  # noqa: FBT001, FBT002
    catalog: DeviceCatalog | None = None,
) -> ScenarioResult:
    """
    Boots a fresh platform and replays a scenario script on it. Expectation mismatches and
    platform errors are reported in the result, never raised.

    Args:
        script (pathlib.Path | str): the script file.
        config (HomeConfig | pathlib.Path | str): the home configuration.
        templates (Sequence[PolicyTemplate]): the policy template library, the templates
            generated from the bundled inference table if not given.
        evidence_mode (EvidenceMode): how policy checks read the state machine.
        enforcing (bool): ``False`` replays on the baseline platform.
        catalog (DeviceCatalog): overrides the catalog of the configuration.

    Raises:
        ScriptParseError: if the script does not parse.
    """
    script = pathlib.Path(script)
    steps = read_script(script)
    if templates is None:
        templates = load_policies(None, catalog or load_catalog())
    platform = boot_platform(config, templates, enforcing, evidence_mode, catalog)
    result = run_steps(platform, steps, script.stem)
    LOGGER.info(f"Scenario {result.script_id}: {'PASS' if result.passed else 'FAIL'}")
    return result


# ----- Manifest ----- #


@dataclass(frozen=True)
class ScenarioEntry:
    id: str
    script: pathlib.Path
    home: pathlib.Path
    decision: Action
    golden: bool = False


def home_path(name: str, base: pathlib.Path = HOMES_DIR) -> pathlib.Path:
    """A home given by name is looked up among the bundled homes."""
    path = pathlib.Path(name)
    if path.suffix == ".json":
        return path if path.is_absolute() else base / path
    return base / f"{name}.json"


def load_manifest(path: pathlib.Path | str = SCENARIO_MANIFEST) -> list[ScenarioEntry]:
    path = pathlib.Path(path)
    model: ManifestModel = read_json_model(path, ManifestModel)
    return [
        ScenarioEntry(entry.id, path.parent / entry.script, home_path(entry.home), Action(entry.decision), entry.golden)
        for entry in model.scenarios
    ]


@dataclass
class SuiteReport:
    entries: list[ScenarioEntry]
    results: list[ScenarioResult]

    @property
    def decisions(self) -> list[Action | None]:
        return [result.decision for result in self.results]

    @property
    def passed(self) -> bool:
        return all(
            result.passed and result.decision is entry.decision
            for entry, result in zip(self.entries, self.results, strict=True)
        )

    def matrix(self) -> RecordFrame:
        """The decision matrix: one row per scenario with expected and actual decisions."""
        rows = list(zip(self.entries, self.results, strict=True))
        return RecordFrame(
            {
                "SCENARIO": [entry.id for entry, _ in rows],
                "HOME": [entry.home.stem for entry, _ in rows],
                "GOLDEN": [entry.golden for entry, _ in rows],
                "EXPECTED": [entry.decision.value for entry, _ in rows],
                "ACTUAL": [result.decision_label for _, result in rows],
                "PASSED": [result.passed and result.decision is entry.decision for entry, result in rows],
            },
            headers={
                "TITLE": "scenario decision matrix",
                "SCENARIOS": len(rows),
                "MATCHED": sum(result.decision is entry.decision for entry, result in rows),
            },
        )


def run_suite(
    manifest: pathlib.Path | str = SCENARIO_MANIFEST,
    templates: Sequence[PolicyTemplate] | None = None,
    golden_only: bool = False,  # noqa: FBT001, FBT002
    evidence_mode: EvidenceMode = EvidenceMode.MOST_RECENT_CHANGE,
) -> SuiteReport:
    """Runs every scenario of a manifest, each on a freshly booted platform."""
    entries = [entry for entry in load_manifest(manifest) if entry.golden or not golden_only]
    if templates is None:
        templates = load_policies(None, load_catalog())
    results = [run_scenario(entry.script, entry.home, templates, evidence_mode) for entry in entries]
    report = SuiteReport(entries, results)
    LOGGER.info(f"Scenario suite: {report.matrix().headers['MATCHED']}/{len(entries)} decisions as expected")
    return report


# ----- Compatibility ----- #


@dataclass
class CompatReport:
    events: int = 0
    errors: list[str] = field(default_factory=list)
    endorsed_denials: int = 0
    other_denials: int = 0
    routine_runs: Counter = field(default_factory=Counter)

    @property
    def passed(self) -> bool:
        return not self.errors and self.other_denials == 0

    def __str__(self) -> str:
        fired = ", ".join(f"{routine}x{count}" for routine, count in sorted(self.routine_runs.items()))
        return (
            f"{self.events} events, {len(self.errors)} platform errors, "
            f"{self.endorsed_denials} endorsement denials, {self.other_denials} other denials\n"
            f"routines fired: {fired or 'none'}"
        )


def run_compatibility(
    suite: pathlib.Path | str = COMPAT_SUITE,
    templates: Sequence[PolicyTemplate] | None = None,
    seed: int | None = None,
) -> CompatReport:
    """
    Drives the suite's home with stimuli drawn at random (seeded) for the configured number
    of events, spaced by random gaps, and counts platform errors and denials.

    Args:
        suite (pathlib.Path | str): the compatibility suite file.
        templates (Sequence[PolicyTemplate]): the policy template library, the templates
            generated from the bundled inference table if not given.
        seed (int): overrides the seed of the suite file.
    """
    model: CompatSuiteModel = read_json_model(suite, CompatSuiteModel)
    commands = [parse_command(stimulus, number) for number, stimulus in enumerate(model.stimuli, start=1)]
    rng = np.random.default_rng(model.seed if seed is None else seed)
    if templates is None:
        templates = load_policies(None, load_catalog())
    platform = boot_platform(home_path(model.home), templates)

    report = CompatReport()
    time = 0
    for _ in range(model.events):
        time += int(rng.integers(model.min_gap_ms, model.max_gap_ms, endpoint=True))
        command = commands[int(rng.integers(len(commands)))]
        try:
            execute(platform, command, time)
        except EndorsementError as error:
            LOGGER.error(f"Platform error at t={time}: {error}")
            report.errors.append(f"t={time}: {error}")
        report.events += 1

    for entry in platform.monitor.audit:
        if entry.status is MediationStatus.DENIED_ENDORSEMENT:
            report.endorsed_denials += 1
        elif entry.status.denied:
            report.other_denials += 1
    report.routine_runs = Counter(run.routine_id for run in platform.runs)
    LOGGER.info(f"Compatibility run: {report.events} events, {len(report.errors)} errors")
    return report
