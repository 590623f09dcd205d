"""
Constants
---------

General constants used throughout ``home-endorse``: defaults of the simulated platform,
markers of the record table format and locations of the bundled data.
"""

from __future__ import annotations

import pathlib

import numpy as np

# ----- Platform Defaults ----- #

DEFAULT_FRESHNESS_THRESHOLD_MS: int = 60_000
DEFAULT_RESET_DELAY_MS: int = 10_000
MAX_CASCADE_DEPTH: int = 16
DEFAULT_LISTEN: str = "127.0.0.1:8123"
SERVE_HISTORY_LIMIT: int = 10_000  # audit, state history and event log entries kept by `he serve`

# ----- Benchmarks ----- #

DEFAULT_BENCH_RUNS: int = 50
MIN_BENCH_RUNS: int = 50
DEFAULT_BENCH_INNER: int = 20
CONFIDENCE_LEVEL: float = 0.95

# ----- Spec Toolkit ----- #

ANY_VALUE: str = "ANY"  # placeholder for sources without value information
SOURCE_FORMATS: set[str] = {"OCF_JSON", "ATTR_LIST", "HANDLER_PREAMBLE"}

# ----- Record Table Format ----- #

HEADER: str = "@"
NAMES: str = "*"
TYPES: str = "$"
COMMENTS: str = "#"
INDEX_ID: str = "INDEX&&&"
NIL: str = "nil"

# These are used when reading files
ID_TO_TYPE: dict[str, type] = {
    "%s": str,
    "%b": bool,
    "%le": np.float64,
    "%d": np.int64,
}

VALID_TRUE_BOOLEANS: set[str] = {"True", "1"}  # checks resolve to capitalized case
VALID_FALSE_BOOLEANS: set[str] = {"False", "0"}
VALID_BOOLEANS_HEADERS: set[str] = VALID_TRUE_BOOLEANS | VALID_FALSE_BOOLEANS

DEFAULT_COLUMN_WIDTH: int = 20
MIN_COLUMN_WIDTH: int = 10

# ----- Bundled Data ----- #

DATA_DIR: pathlib.Path = pathlib.Path(__file__).parent / "data"
DEVICE_CATALOG: pathlib.Path = DATA_DIR / "device_catalog.json"
INFERENCES: pathlib.Path = DATA_DIR / "inferences.json"
SOURCES_DIR: pathlib.Path = DATA_DIR / "sources"
DESIGNATED: pathlib.Path = SOURCES_DIR / "designated.json"
HOMES_DIR: pathlib.Path = DATA_DIR / "homes"
SCENARIOS_DIR: pathlib.Path = DATA_DIR / "scenarios"
SCENARIO_MANIFEST: pathlib.Path = SCENARIOS_DIR / "manifest.json"
COMPAT_SUITE: pathlib.Path = DATA_DIR / "compat.json"
TESTBED_HOME: pathlib.Path = HOMES_DIR / "testbed.json"
