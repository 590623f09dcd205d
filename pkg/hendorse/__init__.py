"""
Exposes the platform entry points, the record table I/O and the package version directly in
the ``hendorse`` namespace.
"""

from hendorse.errors import EndorsementError, TableFormatError
from hendorse.frame import RecordFrame, concat
from hendorse.platform import Platform, boot_platform
from hendorse.reader import read_records
from hendorse.scenario import run_scenario, run_suite
from hendorse.writer import write_records

__title__ = "home-endorse"
__description__ = "Smart-home platform with an endorsement reference monitor for abstract home objects."
__url__ = "https://github.com/home-endorse/home-endorse"
__version__ = "0.1.0"
__author__ = "home-endorse"
__author_email__ = "home-endorse@users.noreply.github.com"
__license__ = "MIT"

# aliases
read = read_records
write = write_records

__all__ = [
    "concat",
    "read",
    "read_records",
    "write",
    "write_records",
    "boot_platform",
    "run_scenario",
    "run_suite",
    "Platform",
    "RecordFrame",
    "EndorsementError",
    "TableFormatError",
    "__version__",
]
