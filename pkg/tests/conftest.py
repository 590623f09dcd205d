import pathlib

import numpy as np
import pandas as pd
import pytest

from hendorse import RecordFrame
from hendorse.config import load_catalog, load_home_config
from hendorse.constants import TESTBED_HOME
from hendorse.platform import boot_platform
from hendorse.scenario import home_path
from hendorse.toolkit import load_policies

INPUTS_DIR = pathlib.Path(__file__).parent / "inputs"


# ----- Bundled Homes & Policies ----- #


@pytest.fixture(scope="session")
def _catalog():
    return load_catalog()


@pytest.fixture(scope="session")
def _templates(_catalog):
    """Templates generated from the bundled inference table."""
    return load_policies(None, _catalog)


@pytest.fixture
def _testbed_config():
    return load_home_config(TESTBED_HOME)


@pytest.fixture
def _testbed(_testbed_config, _templates, _catalog):
    """A freshly booted, enforcing testbed platform, its clock at 0."""
    return boot_platform(_testbed_config, _templates, catalog=_catalog)


@pytest.fixture
def _lock_motion(_templates, _catalog):
    """The smallest scenario home: a lock at the front door, a motion sensor in the hallway."""
    return boot_platform(home_path("lock_motion"), _templates, catalog=_catalog)


# ----- Record Tables ----- #


@pytest.fixture
def _record_file() -> pathlib.Path:
    """An audit log with string, integer and boolean columns."""
    return INPUTS_DIR / "audit.rec"


@pytest.fixture
def _record_file_booleans() -> pathlib.Path:
    """A record table with booleans in headers and in a column."""
    return INPUTS_DIR / "booleans.rec"


# The below return frames for the write tests, as we start
# with writing and don't want to read the files from disk.


@pytest.fixture
def _pd_dataframe() -> pd.DataFrame:
    return pd.DataFrame(
        index=range(3),
        columns="a b c d e".split(),
        data=np.random.rand(3, 5),
    )


@pytest.fixture
def _record_frame() -> RecordFrame:
    return RecordFrame(
        index=range(15),
        columns="a b c d e".split(),
        data=np.random.rand(15, 5),
        headers={"TITLE": "latencies", "CONFIDENCE": 0.95},
    )


@pytest.fixture
def _audit_frame() -> RecordFrame:
    """Shaped like a monitor audit log."""
    return RecordFrame(
        {
            "TIME": [0, 0, 5000, 20000],
            "PRINCIPAL": ["device(lock-1)", "device(motion-1)", "third-party(kasa)", "local-user"],
            "TARGET": ["report:lock-1.lock=LOCKED", "report:motion-1.motion=INACTIVE", "home=home", "home=home"],
            "STATUS": ["APPLIED", "APPLIED", "DENIED_ENDORSEMENT", "APPLIED"],
            "TEMPLATE": ["-", "-", "home=home:door-lock.lock+motion-sensor.motion", "-"],
            "EVALUATED": [False, False, True, False],
        },
        headers={"TITLE": "audit log", "ENFORCING": True, "MEDIATIONS": 4, "APPLIED": 3},
    )


@pytest.fixture
def _record_frame_booleans() -> RecordFrame:
    """RecordFrame with boolean values in the headers and data (1 column)."""
    df = RecordFrame(
        index=range(15),
        columns="a b c d e".split(),
        data=np.random.rand(15, 5),
        headers={"TITLE": "Bool Test", "BOOL1": True, "BOOL2": False, "BOOL3": 1},
    )
    df["bools"] = np.random.rand(15) > 0.5  # random from 0 to 1 and then boolean check
    return df
