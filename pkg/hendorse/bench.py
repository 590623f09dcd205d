"""
Bench
-----

Latency benchmarks of the endorsement machinery against the baseline platform (same
home, same workload, endorsement disabled). Timings use a monotonic nanosecond timer
around the measured call only; setup and state resets between iterations are not timed.

.. admonition:: **Operations**

    ========  =======  ===================================================
    Number    Suite    Measured call
    ========  =======  ===================================================
    1         MICRO    platform boot, with policy instantiation
    2         MICRO    removing and re-registering a device
    3         MICRO    third-party write of a non-endorsed AHO
    4         MICRO    third-party write of an endorsed AHO
    5         MACRO    endorsed AHO write with the routine it triggers
    6         MACRO    non-endorsed AHO write with the routine it triggers
    ========  =======  ===================================================
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass
from enum import Enum
from typing import TYPE_CHECKING

import numpy as np

from hendorse.config import HomeConfig, load_catalog, load_home_config
from hendorse.constants import (
    CONFIDENCE_LEVEL,
    DEFAULT_BENCH_INNER,
    DEFAULT_BENCH_RUNS,
    MIN_BENCH_RUNS,
    TESTBED_HOME,
)
from hendorse.frame import RecordFrame
from hendorse.home import Principal
from hendorse.monitor import AhoChange, StateChangeRequest
from hendorse.platform import PhysicalAction, boot_platform
from hendorse.tools import describe, format_measurement
from hendorse.toolkit import load_policies

if TYPE_CHECKING:
    import pathlib
    from collections.abc import Callable, Sequence

    from hendorse.home import DeviceCatalog
    from hendorse.platform import Platform
    from hendorse.policy import PolicyTemplate

LOGGER = logging.getLogger(__name__)

_ARRIVAL: tuple[PhysicalAction, ...] = (
    PhysicalAction("lock-1", "unlock", {"method": "owner"}),
    PhysicalAction("door-1", "open"),
    PhysicalAction("panel-1", "disarm", {"method": "keypad"}),
    PhysicalAction("motion-1", "walk-past"),
    PhysicalAction("presence-1", "arrive"),
    PhysicalAction("beacon-1", "detect"),
    PhysicalAction("thermostat-1", "walk-past"),
)
_SWAPPABLE: tuple[str, ...] = ("beacon-1", "motion-1", "presence-1", "thermostat-1")
_MODES: tuple[str, ...] = ("day", "night", "vacation")
_STEP_MS: int = 10  # logical time between two measured iterations


class Suite(Enum):
    MICRO = "MICRO"
    MACRO = "MACRO"


@dataclass(frozen=True)
class Operation:
    number: int
    name: str
    suite: Suite


OPERATIONS: tuple[Operation, ...] = (
    Operation(1, "boot policy instantiation", Suite.MICRO),
    Operation(2, "policy update on device remove/add", Suite.MICRO),
    Operation(3, "non-endorsed AHO change", Suite.MICRO),
    Operation(4, "endorsed AHO change", Suite.MICRO),
    Operation(5, "automation with endorsed AHO", Suite.MACRO),
    Operation(6, "automation with non-endorsed AHO", Suite.MACRO),
)


# ----- Workloads ----- #


class _Workload:
    """Builds platforms for one mode and times the operations on them. Durations in ms."""

    def __init__(
        self,
        config: HomeConfig,
        catalog: DeviceCatalog,
        templates: Sequence[PolicyTemplate],
        enforcing: bool,  # noqa: FBT001
        seed: int,
    ) -> None:
        self.config = config
        self.catalog = catalog
        self.templates = templates
        self.enforcing = enforcing
        self.rng = np.random.default_rng(seed)

    def boot(self) -> Platform:
        return boot_platform(self.config, self.templates, self.enforcing, catalog=self.catalog)

    def measure(self, number: int, runs: int, inner: int) -> list[float]:
        measure: Callable[[int], float] = getattr(self, f"_op{number}")
        LOGGER.debug(f"Operation {number}, {'monitored' if self.enforcing else 'baseline'}: {runs} runs")
        return [measure(inner) for _ in range(runs)]

    @staticmethod
    def _timed(call: Callable[[], object]) -> int:
        start = time.perf_counter_ns()
        call()
        return time.perf_counter_ns() - start

    def _op1(self, inner: int) -> float:
        return self._timed(self.boot) / 1e6  # boots are slow enough to time one by one

    def _op2(self, inner: int) -> float:
        platform = self.boot()
        total = 0
        for _ in range(inner):
            device = platform.home.device(str(self.rng.choice(_SWAPPABLE)))
            total += self._timed(lambda device=device: (platform.remove_device(device.id), platform.add_device(device)))
        return total / inner / 1e6

    def _op3(self, inner: int) -> float:
        platform = self.boot()
        principal = Principal.third_party("ifttt")
        total = 0
        for iteration in range(1, inner + 1):
            mode = str(self.rng.choice(_MODES))
            request = StateChangeRequest(principal, AhoChange("mode", mode), iteration * _STEP_MS)
            platform.advance_to(request.request_time)
            total += self._timed(lambda request=request: platform.monitor.mediate(request))
            platform.settle()
        return total / inner / 1e6

    def _arrive(self, platform: Platform) -> int:
        now = platform.clock.now + _STEP_MS
        for action in _ARRIVAL:
            platform.apply_physical(action, now)
        return now

    def _op4(self, inner: int) -> float:
        platform = self.boot()
        principal = Principal.third_party("tracker")
        now = self._arrive(platform)
        total = 0
        for _ in range(inner):
            now += _STEP_MS
            request = StateChangeRequest(principal, AhoChange("home", "home"), now)
            platform.advance_to(now)
            total += self._timed(lambda request=request: platform.monitor.mediate(request))
            platform.settle()
            platform.set_aho(Principal.local_user(), "home", "away", now)
        return total / inner / 1e6

    def _op5(self, inner: int) -> float:
        platform = self.boot()
        now = self._arrive(platform)
        total = 0
        for _ in range(inner):
            now += _STEP_MS
            total += self._timed(lambda now=now: platform.set_aho(Principal.third_party("tracker"), "home", "home", now))
            platform.set_aho(Principal.local_user(), "home", "away", now)
        return total / inner / 1e6

    def _op6(self, inner: int) -> float:
        platform = self.boot()
        now = 0
        total = 0
        for _ in range(inner):
            now += _STEP_MS
            total += self._timed(lambda now=now: platform.set_aho(Principal.third_party("ifttt"), "mode", "night", now))
            platform.set_aho(Principal.local_user(), "mode", "day", now)
        return total / inner / 1e6


# ----- Reports ----- #


def _overhead_row(baseline: Sequence[float], monitored: Sequence[float]) -> dict[str, float | bool]:
    base_mean, base_std, base_ci = describe(baseline)
    mon_mean, mon_std, mon_ci = describe(monitored)
    overhead = mon_mean - base_mean
    return {
        "BASELINE_MEAN": base_mean,
        "BASELINE_STD": base_std,
        "BASELINE_CI": base_ci,
        "MONITORED_MEAN": mon_mean,
        "MONITORED_STD": mon_std,
        "MONITORED_CI": mon_ci,
        "OVERHEAD_MS": overhead,
        "OVERHEAD_PCT": 100 * overhead / base_mean if base_mean else float("nan"),
        "MEASURABLE": bool(abs(overhead) > np.hypot(base_ci, mon_ci)),
    }


def run_bench(
    suite: Suite | str = Suite.MICRO,
    baseline: bool = True,  # noqa: FBT001, FBT002
    runs: int = DEFAULT_BENCH_RUNS,
    inner: int = DEFAULT_BENCH_INNER,
    seed: int = 0,
    config: HomeConfig | pathlib.Path | str = TESTBED_HOME,
    templates: Sequence[PolicyTemplate] | None = None,
) -> RecordFrame:
    """
    Runs the operations of a suite on the monitored platform and, with ``baseline``, on the
    baseline platform with the same seed.

    .. admonition:: **Report**

        One row per operation with mean, sample standard deviation and confidence
        half-width of its latency in milliseconds. With the baseline, overhead columns
        are added and ``MEASURABLE`` is ``False`` when the difference of means lies
        within the combined confidence half-widths.

    Args:
        suite (Suite | str): ``MICRO`` (operations 1-4) or ``MACRO`` (operations 5-6).
        baseline (bool): also measure the baseline and report the overhead.
        runs (int): measurements per operation and mode, at least 50.
        inner (int): iterations averaged into one measurement for fast operations.
        seed (int): seed of the workload choices, shared by both modes.
        config (HomeConfig | Path | str): the benchmark home, the testbed by default.
        templates (Sequence[PolicyTemplate]): policy templates, generated from the bundled
            inference table if not given.

    Returns:
        The report as a ``RecordFrame``.
    """
    suite = Suite(suite.upper()) if isinstance(suite, str) else suite
    if runs < MIN_BENCH_RUNS:
        errmsg = f"At least {MIN_BENCH_RUNS} runs are needed, got {runs}"
        raise ValueError(errmsg)
    if inner < 1:
        errmsg = f"Inner iterations must be positive, got {inner}"
        raise ValueError(errmsg)
    if not isinstance(config, HomeConfig):
        config = load_home_config(config)
    catalog = load_catalog(config.catalog)
    templates = load_policies(None, catalog) if templates is None else templates

    monitored = _Workload(config, catalog, templates, enforcing=True, seed=seed)
    reference = _Workload(config, catalog, templates, enforcing=False, seed=seed)
    rows = []
    for operation in (op for op in OPERATIONS if op.suite is suite):
        LOGGER.info(f"Measuring operation {operation.number}: {operation.name}")
        samples = monitored.measure(operation.number, runs, inner)
        row = {"OPERATION": operation.number, "NAME": operation.name}
        if baseline:
            row.update(_overhead_row(reference.measure(operation.number, runs, inner), samples))
        else:
            mean, std, half_width = describe(samples)
            row.update({"MONITORED_MEAN": mean, "MONITORED_STD": std, "MONITORED_CI": half_width})
        rows.append(row)

    report = RecordFrame(
        rows,
        headers={
            "TITLE": "endorsement benchmark",
            "SUITE": suite.value,
            "RUNS": runs,
            "INNER": inner,
            "SEED": seed,
            "CONFIDENCE": CONFIDENCE_LEVEL,
            "BASELINE": baseline,
        },
    )
    LOGGER.info(f"Benchmark {suite.value} done over {runs} runs")
    return report


def render_report(report: RecordFrame) -> str:
    """Text rendering of a bench report, latencies rounded on their confidence half-width."""
    lines = [f"{report.headers['TITLE']} ({report.headers['SUITE']}, {report.headers['RUNS']} runs)"]
    for _, row in report.iterrows():
        monitored = format_measurement(row["MONITORED_MEAN"], row["MONITORED_CI"])
        line = f"({row['OPERATION']}) {row['NAME']:<36} monitored {monitored}"
        if "BASELINE_MEAN" in report.columns:
            base = format_measurement(row["BASELINE_MEAN"], row["BASELINE_CI"])
            overhead = (
                f"{row['OVERHEAD_MS']:+.4f} ms ({row['OVERHEAD_PCT']:+.2f}%)"
                if row["MEASURABLE"]
                else "no measurable overhead"
            )
            line += f"  baseline {base}  {overhead}"
        lines.append(line)
    return "\n".join(lines)
