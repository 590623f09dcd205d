"""
Testing
-------

Testing functionality for record frames and platform runs.
"""

from __future__ import annotations

from pathlib import Path
from typing import TYPE_CHECKING

from pandas._testing import assert_dict_equal
from pandas.testing import assert_frame_equal

if TYPE_CHECKING:
    from hendorse.frame import RecordFrame


def assert_record_frame_equal(df1: RecordFrame, df2: RecordFrame, compare_keys: bool = True, **kwargs):  # noqa: FBT001, FBT002
    """
    Compare two `RecordFrame` objects, with `df1` being the reference that `df2` is compared
    to. Both the data (with `pandas.testing.assert_frame_equal`) and the headers (with
    `pandas`'s `assert_dict_equal`) are compared.

    Args:
        df1 (RecordFrame): The reference frame.
        df2 (RecordFrame): The frame to compare to it.
        compare_keys (bool): If `True`, both headers must have the exact same set of keys.
            Values are compared for every key of `df1` in any case. Defaults to `True`.
        **kwargs: Additional keyword arguments are given to `pandas.testing.assert_frame_equal`.

    Example:
        .. code-block:: python

            first = run_scenario(script, config, policies)
            second = run_scenario(script, config, policies)
            assert_record_frame_equal(first.audit, second.audit)
    """
    assert_frame_equal(df1, df2, **kwargs)
    assert_dict_equal(df1.headers, df2.headers, compare_keys=compare_keys)


def assert_files_identical(path1: Path | str, path2: Path | str) -> None:
    """
    Assert two written record tables are byte-identical, as required from two replays of
    the same scenario script.

    Args:
        path1 (Path | str): The reference file.
        path2 (Path | str): The file to compare to it.
    """
    first, second = Path(path1).read_bytes(), Path(path2).read_bytes()
    if first != second:
        diverging = next(
            (number for number, (left, right) in enumerate(zip(first.splitlines(), second.splitlines(), strict=False), 1) if left != right),
            min(len(first.splitlines()), len(second.splitlines())) + 1,
        )
        errmsg = f"Files {Path(path1).name} and {Path(path2).name} differ, first at line {diverging}"
        raise AssertionError(errmsg)
