import pathlib

import pytest
from pandas.api import types as pdtypes

import hendorse
from hendorse.constants import HEADER
from hendorse.errors import TableFormatError
from hendorse.reader import read_headers, read_records
from hendorse.testing import assert_record_frame_equal
from hendorse.writer import write_records

from .conftest import INPUTS_DIR


class TestRead:
    def test_read_pathlib_input(self, _record_file: pathlib.Path):
        audit = read_records(_record_file)
        assert len(audit.headers) == 5
        assert list(audit.columns) == ["TIME", "PRINCIPAL", "TARGET", "STATUS", "TEMPLATE", "FAILED", "EVALUATED"]
        assert len(audit.index) == 5
        assert len(str(audit)) > 0

        with pytest.raises(AttributeError):
            _ = audit.Not_HERE

        with pytest.raises(KeyError):
            _ = audit["Not_HERE"]

    def test_read_str_input(self, _record_file: pathlib.Path):
        audit = read_records(str(_record_file.absolute()), index="TIME")
        assert audit.index.name == "TIME"
        assert audit.index[3] == 5000

    def test_column_types(self, _record_file):
        audit = read_records(_record_file)
        assert pdtypes.is_integer_dtype(audit["TIME"].dtype)
        assert pdtypes.is_bool_dtype(audit["EVALUATED"].dtype)
        assert audit["EVALUATED"].tolist() == [False, False, False, True, False]
        assert audit.loc[3, "FAILED"] == "front-door:lock-1.lock==UNLOCKED(owner);front-door:motion-1.motion==ACTIVE"

    def test_read_headers(self, _record_file):
        headers = read_headers(_record_file)
        assert headers == {
            "TITLE": "audit log",
            "ENFORCING": True,
            "MEDIATIONS": 5,
            "APPLIED": 4,
            "SCENARIO": "malicious-1",
        }

    def test_read_write_read(self, _record_file: pathlib.Path, tmp_path):
        original = read_records(_record_file)
        write_location = tmp_path / "audit.rec"
        write_records(write_location, original)
        new = read_records(write_location)
        assert_record_frame_equal(original, new)

    def test_header_lines_survive_rewriting(self, _record_file, tmp_path):
        original_header_lines = [line for line in _record_file.read_text().splitlines() if line.startswith(HEADER)]
        out_path = tmp_path / "audit.rec"
        hendorse.write(out_path, hendorse.read(_record_file))

        new_text = out_path.read_text()
        assert [line for line in new_text.splitlines() if line.startswith(HEADER)] == original_header_lines

    def test_read_nil_values(self):
        df = read_records(INPUTS_DIR / "nils.rec")
        assert df.headers["SCENARIO"] is None  # a nil header reads as None
        assert df.loc[0, "DEVICE"] is None  # a nil in a string column too
        assert df["VALUE"].isna().tolist() == [False, True, False]
        assert df.loc[2, "VALUE"] == 2.5

    def test_read_file_with_booleans(self, _record_file_booleans):
        df = read_records(_record_file_booleans)
        assert df.headers["BOOLTRUE1"] is True  # true resolves to True
        assert df.headers["BOOLTRUE2"] is True  # True resolves to True
        assert df.headers["BOOLTRUE3"] is True  # 1 resolves to True
        assert df.headers["BOOLFALSE1"] is False  # false resolves to False
        assert df.headers["BOOLFALSE2"] is False  # False resolves to False
        assert df.headers["BOOLFALSE3"] is False  # 0 resolves to False

        assert pdtypes.is_bool_dtype(df["ONLINE"].dtype)
        assert df["ONLINE"].tolist() == [True, False, True]

    def test_read_write_read_with_booleans(self, _record_file_booleans, tmp_path):
        original = read_records(_record_file_booleans)
        write_location = tmp_path / "booleans.rec"
        write_records(write_location, original)
        assert_record_frame_equal(original, read_records(write_location))


class TestFailures:
    def test_unknown_type_identifier(self):
        with pytest.raises(TableFormatError, match="Unknown data type: %t"):
            read_records(INPUTS_DIR / "unknown_type.rec")

    def test_fail_read_no_coltypes(self):
        with pytest.raises(TableFormatError, match="Missing column type"):
            read_records(INPUTS_DIR / "no_coltypes.rec")

    def test_fail_read_no_colnames(self):
        with pytest.raises(TableFormatError, match="Missing column name"):
            read_records(INPUTS_DIR / "no_colnames.rec")

    def test_invalid_boolean_header(self, tmp_path):
        path = tmp_path / "bad_boolean.rec"
        path.write_text('@ ENFORCING %b maybe\n* TIME\n$ %d\n 0\n')
        with pytest.raises(TableFormatError, match="Invalid boolean header"):
            read_headers(path)

    def test_header_without_type(self, tmp_path):
        path = tmp_path / "untyped.rec"
        path.write_text('@ TITLE "audit log"\n* TIME\n$ %d\n 0\n')
        with pytest.raises(TableFormatError, match="No data type"):
            read_headers(path)
