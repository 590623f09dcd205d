"""
Reader
------

Reading functionality for record tables.
"""

from __future__ import annotations

import logging
import pathlib
import shlex
from contextlib import contextmanager
from dataclasses import dataclass
from typing import TYPE_CHECKING

import numpy as np
import pandas as pd
from pandas._libs.parsers import STR_NA_VALUES
from pandas.io.common import get_handle

from hendorse.constants import (
    COMMENTS,
    HEADER,
    ID_TO_TYPE,
    INDEX_ID,
    NAMES,
    NIL,
    TYPES,
    VALID_BOOLEANS_HEADERS,
    VALID_TRUE_BOOLEANS,
)
from hendorse.errors import TableFormatError
from hendorse.frame import RecordFrame

if TYPE_CHECKING:
    from io import TextIOWrapper


LOGGER = logging.getLogger(__name__)

# Default NA values of the pandas readers, without "" (empty strings stay empty strings) and with "nil"
_NA_VALUES: list[str] = [*list(STR_NA_VALUES), NIL]
_NA_VALUES.remove("")

# ----- Main Functionality ----- #


def read_records(file_path: pathlib.Path | str, index: str | None = None) -> RecordFrame:
    """
    Parses the record table present in **file_path** and returns a ``RecordFrame``.

    .. admonition:: **Methodology**

        A helper first parses the metadata of the file (headers, column names and types,
        number of non-data lines). The data part is then given to ``pandas.read_csv`` with
        the types determined from the file, and ``nil`` entries of string columns are turned
        back into ``None``.

    Args:
        file_path (pathlib.Path | str): Path to the file to read. Compressed files are
            handled based on their suffix.
        index (str): Name of the column to set as index. If not given, looks for a column
            starting with `INDEX&&&`.

    Returns:
        A ``RecordFrame`` with the loaded data and headers.

    Raises:
        TableFormatError: if column names or types are missing, or a type or header is invalid.

    Examples:
        .. code-block:: python

            audit = read_records("audit.rec")
            audit.headers["SCENARIO"]
    """
    file_path = pathlib.Path(file_path)
    LOGGER.debug(f"Reading path: {file_path.absolute()}")
    metadata: _TableMetaData = _read_metadata(file_path)

    if metadata.column_names is None:
        errmsg = f"Missing column name(s) in file {file_path.absolute()}. File not read."
        raise TableFormatError(errmsg)
    if metadata.column_types is None:
        errmsg = f"Missing column type(s) in file {file_path.absolute()}. File not read."
        raise TableFormatError(errmsg)

    dtypes_dict = dict(zip(metadata.column_names, metadata.column_types, strict=True))
    # DO NOT use `comment=COMMENTS` here: a '#' inside a string entry would break parsing
    data_frame = pd.read_csv(
        file_path,
        engine="c",
        skiprows=metadata.non_data_lines,
        sep=r"\s+",
        quotechar='"',
        names=metadata.column_names,
        dtype=dtypes_dict,
        na_values=_NA_VALUES,
        keep_default_na=False,
    )

    records = RecordFrame(data_frame, headers=metadata.headers)
    for column in records.select_dtypes(include=["string", "object"]):
        records[column] = records[column].replace([np.nan], [None])

    if index:
        LOGGER.debug(f"Setting '{index}' column as index")
        return records.set_index(index)
    return _find_and_set_index(records)


def read_headers(file_path: pathlib.Path | str) -> dict:
    """
    Parses the top of **file_path** and returns the headers only.

    Args:
        file_path (pathlib.Path | str): Path to the file to read.

    Returns:
        A dictionary with the headers read from the file.
    """
    return _read_metadata(file_path).headers


# ----- Helpers ----- #


@dataclass
class _TableMetaData:
    """Metadata read from the top of a record table."""

    headers: dict
    non_data_lines: int
    column_names: list[str] | None
    column_types: list[type] | None


@contextmanager
def _metadata_handle(file_path: pathlib.Path | str) -> TextIOWrapper:  # type: ignore[misc]
    handles = get_handle(file_path, mode="r", is_text=True, errors="strict", compression="infer")
    try:
        yield handles.handle
    finally:
        handles.close()


def _read_metadata(file_path: pathlib.Path | str) -> _TableMetaData:
    """Parses lines until the first data line, gathering headers, names and types."""
    LOGGER.debug("Reading headers and metadata from file")
    column_names = column_types = None
    headers = {}
    line_number = 0

    with _metadata_handle(pathlib.Path(file_path)) as file_reader:
        for line_number, line in enumerate(file_reader.readlines()):  # noqa: B007
            stripped_line = line.strip()
            if not stripped_line:
                continue
            line_components = shlex.split(stripped_line)
            if line_components[0] == HEADER:
                name, value = _parse_header_line(line_components[1:])
                headers[name] = value
            elif line_components[0] == NAMES:
                column_names = line_components[1:]
            elif line_components[0] == TYPES:
                column_types = [_id_to_type(identifier) for identifier in line_components[1:]]
            elif line_components[0] == COMMENTS:
                continue
            else:  # first data line, stop here
                break

    return _TableMetaData(
        headers=headers,
        non_data_lines=line_number,
        column_names=column_names,
        column_types=column_types,
    )


def _parse_header_line(str_list: list[str]) -> tuple[str, bool | str | int | float | None]:
    """Parses the elements of a header line (after '@') into its name and typed value."""
    type_index = next((index for index, part in enumerate(str_list) if part.startswith("%")), None)
    if type_index is None:
        errmsg = f"No data type found in header: '{' '.join(str_list)}'"
        raise TableFormatError(errmsg)

    name: str = " ".join(str_list[0:type_index])
    value_string: str = " ".join(str_list[(type_index + 1) :]).strip('"')
    value_type: type = _id_to_type(str_list[type_index])

    if value_type is str and value_string == NIL:
        return name, None
    if value_type is bool:
        return name, _string_to_bool(value_string)
    return name, value_type(value_string)


def _find_and_set_index(records: RecordFrame) -> RecordFrame:
    index_column = [colname for colname in records.columns if colname.startswith(INDEX_ID)]
    if index_column:
        records = records.set_index(index_column)
        index_name = index_column[0].replace(INDEX_ID, "") or None
        records = records.rename_axis(index=index_name)
    return records


def _string_to_bool(val_str: str) -> bool:
    if val_str.lower().capitalize() not in VALID_BOOLEANS_HEADERS:
        errmsg = f"Invalid boolean header value parsed: '{val_str}'"
        raise TableFormatError(errmsg)
    return val_str.lower().capitalize() in VALID_TRUE_BOOLEANS


def _id_to_type(type_identifier: str) -> type:
    try:
        return ID_TO_TYPE[type_identifier]
    except KeyError as err:
        errmsg = f"Unknown data type: {type_identifier}"
        raise TableFormatError(errmsg) from err
