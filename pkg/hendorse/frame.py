"""
Frame
-----

Contains the class definition of a ``RecordFrame``, inherited from the ``pandas`` ``DataFrame``,
which holds audit logs, state traces and benchmark reports together with their headers. Also
provides a utility function to validate a frame before it is written to disk.
"""

from __future__ import annotations

import logging
from contextlib import suppress
from functools import reduce
from typing import TYPE_CHECKING, ClassVar

import numpy as np
import pandas as pd
from pandas.api import types as pdtypes

from hendorse.errors import TableFormatError

if TYPE_CHECKING:
    from collections.abc import Sequence


LOGGER = logging.getLogger(__name__)


class RecordFrame(pd.DataFrame):
    """
    A `pandas.DataFrame` carrying a ``headers`` dictionary, used for every record table the
    platform emits (audit log, state trace, benchmark report). To get a header value use
    ``frame.headers["NAME"]``, or ``frame["NAME"]`` if it does not conflict with a column name.
    """

    _metadata: ClassVar = ["headers"]

    def __init__(self, *args, **kwargs):
        self.headers = {}
        with suppress(IndexError, AttributeError):
            self.headers = dict(args[0].headers)
        self.headers = kwargs.pop("headers", self.headers)
        super().__init__(*args, **kwargs)

    def __getitem__(self, key: object) -> object:
        try:
            return super().__getitem__(key)
        except KeyError as error:
            try:
                return self.headers[key]
            except KeyError as kerror:
                errmsg = f"{key} is neither in the RecordFrame nor in headers."
                raise KeyError(errmsg) from kerror
            except TypeError as terror:
                raise error from terror

    def __getattr__(self, name: str) -> object:
        try:
            return super().__getattr__(name)
        except AttributeError:
            try:
                return self.headers[name]
            except KeyError as error:
                errmsg = f"{name} is neither in the RecordFrame nor in headers."
                raise AttributeError(errmsg) from error

    @property
    def _constructor(self):
        """Ensures frames created by pandas operations stay ``RecordFrame`` objects."""
        return RecordFrame

    def _constructor_from_mgr(self, mgr, axes):
        # pandas >= 2.1 builds from a manager without going through __init__
        obj = self._from_mgr(mgr, axes)
        obj.headers = {}
        return obj

    def __repr__(self) -> str:
        headers = "".join(f"    {key}: {value}\n" for key, value in self.headers.items())
        prefix = f"Headers:\n{headers}\n" if headers else ""
        return f"{prefix}{super().__repr__()}"


def concat(
    objs: Sequence[RecordFrame | pd.DataFrame],
    new_headers: dict | None = None,
    **kwargs,
) -> RecordFrame:
    """
    Concatenate record frames, for instance the audit logs of every scenario of a suite.
    Data is concatenated by `pandas.concat`. Headers are merged left to right (later frames
    win on duplicate keys) unless **new_headers** is given.

    Args:
        objs (Sequence[RecordFrame | pd.DataFrame]): the frames to concatenate.
        new_headers (dict): If provided, used as headers of the result.
        **kwargs: Any keyword argument is given to `pandas.concat`.

    Returns:
        A new ``RecordFrame`` with the concatenated data and merged headers.
    """
    LOGGER.debug(f"Concatenating {len(objs)} record frames")
    objs = [frame if hasattr(frame, "headers") else RecordFrame(frame) for frame in objs]
    data = pd.concat(objs, **kwargs)
    if new_headers is None:
        new_headers = reduce(lambda left, right: {**left, **right}, (frame.headers for frame in objs), {})
    return RecordFrame(data=data, headers=new_headers)


def validate(data_frame: RecordFrame | pd.DataFrame, info_str: str = "") -> None:
    """
    Enforce the rules of the record table format on a frame.

    .. admonition:: Methodology

        The following checks are performed, raising ``TableFormatError`` on failure:

          1. No single element in the data is a `list` or `tuple`.
          2. Column names are unique and are strings without spaces.
          3. Every column has a boolean, integer, float or string dtype.
          4. Header names are strings without spaces.

        Non-finite values only emit a warning, as benchmark overheads are ``NaN`` when
        no baseline was measured.

    Args:
        data_frame (RecordFrame | pd.DataFrame): the frame to check.
        info_str (str): additional information to include in logging statements.
    """

    def _element_is_list(element):
        return isinstance(element, list | tuple)

    if len(data_frame.index) and data_frame.apply(np.vectorize(_element_is_list)).to_numpy().any():
        LOGGER.error(f"RecordFrame {info_str} contains list/tuple values")
        errmsg = "Lists or tuple elements are not accepted in a RecordFrame"
        raise TableFormatError(errmsg)

    if data_frame.columns.has_duplicates:
        errmsg = f"RecordFrame {info_str} contains non-unique columns"
        raise TableFormatError(errmsg)

    if any(not isinstance(column, str) or " " in column for column in data_frame.columns):
        errmsg = f"Columns of RecordFrame {info_str} must be strings without spaces"
        raise TableFormatError(errmsg)

    for column, dtype in data_frame.dtypes.items():
        if pdtypes.is_complex_dtype(dtype):
            errmsg = f"Column '{column}' of RecordFrame {info_str} has unsupported dtype {dtype}"
            raise TableFormatError(errmsg)

    headers = getattr(data_frame, "headers", {}) or {}
    if any(not isinstance(name, str) or " " in name for name in headers):
        errmsg = f"Header names of RecordFrame {info_str} must be strings without spaces"
        raise TableFormatError(errmsg)

    numeric = data_frame.select_dtypes(include="number")
    if len(numeric.columns) and not np.isfinite(numeric.to_numpy(dtype=float)).all():
        LOGGER.warning(f"RecordFrame {info_str} contains non-finite values")

    LOGGER.debug(f"RecordFrame {info_str} validated")
