"""
Writer
------

Writing functionality for record tables.
"""

from __future__ import annotations

import logging
import pathlib
import string

import numpy as np
import pandas as pd
from pandas.api import types as pdtypes
from pandas.io.common import get_handle

from hendorse.constants import DEFAULT_COLUMN_WIDTH, INDEX_ID, MIN_COLUMN_WIDTH, NIL
from hendorse.frame import RecordFrame
from hendorse.frame import validate as validate_frame

LOGGER = logging.getLogger(__name__)


def write_records(
    file_path: pathlib.Path | str,
    data_frame: RecordFrame | pd.DataFrame,
    headers_dict: dict | None = None,
    save_index: str | bool = False,  # noqa: FBT002
    colwidth: int = DEFAULT_COLUMN_WIDTH,
    headerswidth: int = DEFAULT_COLUMN_WIDTH,
) -> None:
    """
    Writes the provided frame to disk at **file_path** as a record table. The frame is
    validated first (see `hendorse.frame.validate`). Writing the same frame twice yields
    byte-identical files, which scenario replays rely on.

    .. note::
        Compression of the output file is inferred from the **file_path** suffix, with any
        compression format supported by ``pandas`` (``.gz``, ``.bz2``, ``.zip``, ``.xz``...).

    Args:
        file_path (pathlib.Path | str): Path to the output file.
        data_frame (RecordFrame | pd.DataFrame): The frame to write.
        headers_dict (dict): Headers for the frame. If not provided, ``data_frame.headers``
            is used when present.
        save_index (str | bool): If ``True``, saves the index to a column identifiable by
            `INDEX&&&`. If given as string, saves it to a column of that name.
        colwidth (int): Column width, can not be smaller than `MIN_COLUMN_WIDTH`.
        headerswidth (int): Used to format the header width for both keys and values.

    Examples:
        .. code-block:: python

            write_records("audit.rec", monitor.audit_frame())
            write_records("bench.rec.gz", run_bench("MICRO"))
    """
    file_path = pathlib.Path(file_path)
    if headers_dict is None:
        headers_dict = getattr(data_frame, "headers", {})

    data_frame = RecordFrame(data_frame, headers=headers_dict)
    data_frame.columns = data_frame.columns.astype(str)
    validate_frame(data_frame, info_str=f"to be written in {file_path.absolute()}")

    left_align_first_column = False
    data_frame = data_frame.convert_dtypes(convert_integer=False, convert_floating=False, convert_string=False)
    if save_index:
        left_align_first_column = True
        _insert_index_column(data_frame, save_index)

    colwidth = max(MIN_COLUMN_WIDTH, colwidth)
    lines = (
        _get_headers_string(headers_dict, headerswidth),
        _get_colnames_string(data_frame.columns, colwidth, left_align_first_column),
        _get_coltypes_string(data_frame.dtypes, colwidth, left_align_first_column),
        _get_data_string(data_frame, colwidth, left_align_first_column),
    )

    LOGGER.debug(f"Writing record table {file_path.name} in {file_path.parent}")
    with get_handle(file_path, mode="w", compression="infer") as output:
        output.handle.write("\n".join(line for line in lines if line) + "\n")


# ----- Helpers ----- #


def _insert_index_column(data_frame: RecordFrame, save_index: str | bool) -> None:
    if isinstance(save_index, str):
        idx_name = save_index
    else:
        idx_name = INDEX_ID + (data_frame.index.name or "")
    data_frame.insert(0, idx_name, data_frame.index)


def _get_headers_string(headers_dict: dict, width: int) -> str:
    if headers_dict:
        return "\n".join(_get_header_line(name, value, width) for name, value in headers_dict.items())
    return ""


def _get_header_line(name: str, value, width: int) -> str:
    """
    Creates the string of a single header line. For instance an 'RUNS' header
    equal to 50 with the default width gives:
    "@ RUNS                 %d                   50"
    """
    if not isinstance(name, str):
        errmsg = f"{name} is not a string"
        raise TypeError(errmsg)
    dtype_ = np.dtype(object) if value is None else np.array(value).dtype
    type_identifier = _dtype_to_type_identifier(dtype_)
    value_str = ValueToStringFormatter().format_field(value, _dtype_to_formatter_string(dtype_, width)).strip()
    return f"@ {name:<{width}} {type_identifier} {value_str:>{width}}"


def _get_colnames_string(colnames: list[str], colwidth: int, left_align_first_column: bool) -> str:  # noqa: FBT001
    format_string = _get_row_format_string([None] * len(colnames), colwidth, left_align_first_column)
    return "* " + format_string.format(*colnames)


def _get_coltypes_string(types: pd.Series, colwidth: int, left_align_first_column: bool) -> str:  # noqa: FBT001
    fmt = _get_row_format_string([str] * len(types), colwidth, left_align_first_column)
    return "$ " + fmt.format(*[_dtype_to_type_identifier(type_) for type_ in types])


def _get_data_string(data_frame: RecordFrame, colwidth: int, left_align_first_column: bool) -> str:  # noqa: FBT001
    if len(data_frame.index) == 0 or len(data_frame.columns) == 0:
        return "\n"

    format_strings = "  " + _get_row_format_string(data_frame.dtypes, colwidth, left_align_first_column)
    data_frame = data_frame.astype(object)  # overrides pandas auto-conversion (lead to format bug)
    string_formatter = ValueToStringFormatter()
    return "\n".join(data_frame.apply(lambda series: string_formatter.format(format_strings, *series), axis=1))


def _get_row_format_string(dtypes: list, colwidth: int, left_align_first_column: bool) -> str:  # noqa: FBT001
    """Formatter string for a data row, one slot per column: "{0:>20s} {1:>20d} {2:>20.12g}"."""
    return " ".join(
        f"{{{indx:d}:{'<' if (not indx) and left_align_first_column else '>'}"
        f"{_dtype_to_formatter_string(type_, colwidth)}}}"
        for indx, type_ in enumerate(dtypes)
    )


def _dtype_to_type_identifier(type_) -> str:
    """Returns the table identifier of a dtype: '%b', '%d', '%le' or '%s'."""
    if pdtypes.is_bool_dtype(type_):
        return "%b"
    if pdtypes.is_integer_dtype(type_):
        return "%d"
    if pdtypes.is_float_dtype(type_):
        return "%le"
    if pdtypes.is_string_dtype(type_) or pdtypes.is_object_dtype(type_):
        return "%s"
    errmsg = f"Provided type '{type_}' could not be identified as either a bool, int, float or string dtype"
    raise TypeError(errmsg)


def _dtype_to_formatter_string(type_, colsize: int) -> str:
    if type_ is None:  # column names line
        return f"{colsize}"
    if pdtypes.is_bool_dtype(type_):
        return f"{colsize}b"  # handled by ValueToStringFormatter
    if pdtypes.is_integer_dtype(type_):
        return f"{colsize}d"
    if pdtypes.is_float_dtype(type_):
        return f"{colsize}.{colsize - len('-0.e-000')}g"  # make sure we don't round and lose info
    return f"{colsize}s"


# ----- Formatter Class ----- #


class ValueToStringFormatter(string.Formatter):
    """
    Formatter for values (headers, frame data) to write to file: booleans are written
    lowercase, strings are double-quoted and ``None`` is written as a bare ``nil``.
    """

    def format_field(self, value, format_spec):
        if format_spec.endswith("b"):
            bool_str = str(bool(value)).lower()
            return super().format_field(bool_str, f"{format_spec[:-1]}s")

        if format_spec.endswith("s"):
            if value is None or value is pd.NA:
                value = NIL
            else:
                value = str(value)
                if not value.startswith('"'):
                    value = f'"{value}"'

        return super().format_field(value, format_spec)
