import string

import numpy as np
import pandas as pd
import pytest
from pandas._testing import assert_dict_equal
from pandas.testing import assert_frame_equal, assert_series_equal

import hendorse
from hendorse import RecordFrame, read_records, write_records
from hendorse.errors import TableFormatError
from hendorse.testing import assert_files_identical, assert_record_frame_equal


class TestWrites:
    def test_write_series_like_dataframe(self, tmp_path):
        """Write-read a pandas.Series-like to disk, it comes back as a single column."""
        df = pd.Series([1, 2, 3, 4, 5])
        write_location = tmp_path / "series.rec"
        test_headers = {"RUNS": 1, "TITLE": "series"}
        write_records(write_location, df, headers_dict=test_headers)
        assert write_location.is_file()

        new = read_records(write_location)
        assert_series_equal(df, new["0"], check_names=False)
        assert_dict_equal(test_headers, new.headers, compare_keys=True)

    def test_write_empty_index_dataframe(self, tmp_path):
        df = RecordFrame(
            index=[],
            columns=["a", "b", "c"],
            data=np.random.rand(0, 3),
            headers={"TITLE": "empty trace", "RUNS": 0},
        )
        write_location = tmp_path / "empty.rec"
        write_records(write_location, df)
        assert write_location.is_file()

        new = read_records(write_location)
        assert_record_frame_equal(df, new, check_index_type=False)

    def test_write_int_float_str_columns(self, tmp_path):
        df = RecordFrame(
            data=[[0, 1.5, "APPLIED"], [2000, 2.25, "DENIED_TAMPER"], [4000, 0.125, "DENIED_ENDORSEMENT"]],
            columns=["TIME", "LATENCY", "STATUS"],
        )
        write_location = tmp_path / "mixed.rec"
        write_records(write_location, df)
        assert_record_frame_equal(df, read_records(write_location))

    def test_write_read_audit_frame(self, _audit_frame, tmp_path):
        write_location = tmp_path / "audit.rec"
        write_records(write_location, _audit_frame)
        new = read_records(write_location)
        assert_record_frame_equal(_audit_frame, new)
        assert new.loc[2, "STATUS"] == "DENIED_ENDORSEMENT"

    def test_write_read_float_frame(self, _record_frame, tmp_path):
        write_location = tmp_path / "latencies.rec"
        write_records(write_location, _record_frame)
        new = read_records(write_location)
        assert_record_frame_equal(_record_frame, new, check_exact=False)  # floats are written with 12 digits

    def test_write_read_empty_headers(self, tmp_path):
        df = RecordFrame(index=range(3), columns="a b c".split(), data=np.random.rand(3, 3), headers={})
        write_location = tmp_path / "no_headers.rec"
        write_records(write_location, df)

        new = read_records(write_location)
        assert_record_frame_equal(df, new, check_exact=False)
        assert not write_location.read_text().startswith("@")

    def test_write_read_pandas_dataframe(self, _pd_dataframe, tmp_path):
        # a plain pandas.DataFrame has no headers at all, which is not the same as empty headers
        write_records(tmp_path / "plain.rec", _pd_dataframe)
        new = read_records(tmp_path / "plain.rec")
        assert_frame_equal(_pd_dataframe, new, check_frame_type=False)
        assert new.headers == {}

    def test_write_read_pandas_dataframe_and_headers_dict(self, _pd_dataframe, tmp_path):
        headers = {"TITLE": "latencies", "CONFIDENCE": 0.95, "RUNS": 50}
        write_records(tmp_path / "plain.rec", _pd_dataframe, headers_dict=headers)
        new = read_records(tmp_path / "plain.rec")
        assert_frame_equal(_pd_dataframe, new, check_frame_type=False)
        assert_dict_equal(headers, new.headers, compare_keys=True)

    def test_headers_dict_takes_precedence(self, _audit_frame, tmp_path):
        write_records(tmp_path / "audit.rec", _audit_frame, headers_dict={"TITLE": "replay"})
        assert read_records(tmp_path / "audit.rec").headers == {"TITLE": "replay"}

    def test_write_read_spaces_in_strings(self, tmp_path):
        df = RecordFrame(data=["front door", "hallway motion", "living room"], columns=["ROOM"])
        write_location = tmp_path / "rooms.rec"
        write_records(write_location, df)
        assert_record_frame_equal(df, read_records(write_location))

    def test_write_read_hash_in_strings(self, tmp_path):
        df = RecordFrame(data=["#1", "lock # 2"], columns=["LABEL"])
        write_records(tmp_path / "labels.rec", df)
        assert read_records(tmp_path / "labels.rec")["LABEL"].tolist() == ["#1", "lock # 2"]

    def test_write_read_autoindex(self, _audit_frame, tmp_path):
        df = _audit_frame.set_index("TARGET")
        write_location = tmp_path / "indexed.rec"
        write_records(write_location, df, save_index=True)

        assert "INDEX&&&TARGET" in write_location.read_text()
        df_read = read_records(write_location)
        assert df_read.index.name == "TARGET"
        assert_record_frame_equal(df, df_read)

    def test_write_read_named_index_column(self, _audit_frame, tmp_path):
        df = _audit_frame.set_index("TIME", drop=False).rename_axis(index=None)
        write_records(tmp_path / "named.rec", df.drop(columns="TIME"), save_index="TIME")
        df_read = read_records(tmp_path / "named.rec", index="TIME")
        assert df_read.index.tolist() == [0, 0, 5000, 20000]

    def test_write_read_with_booleans(self, _record_frame_booleans, tmp_path):
        write_location = tmp_path / "booleans.rec"
        write_records(write_location, _record_frame_booleans)
        new = read_records(write_location)
        assert_record_frame_equal(_record_frame_booleans, new, check_exact=False)
        assert new.headers["BOOL1"] is True
        assert new.headers["BOOL2"] is False

    def test_booleans_written_lowercase(self, _audit_frame, tmp_path):
        write_records(tmp_path / "audit.rec", _audit_frame)
        text = (tmp_path / "audit.rec").read_text()
        assert "True" not in text
        assert "False" not in text
        assert text.splitlines()[1].split() == ["@", "ENFORCING", "%b", "true"]

    def test_write_none_values(self, _audit_frame, tmp_path):
        df = _audit_frame.copy()
        df.headers["SCENARIO"] = None
        df.loc[0, "TEMPLATE"] = None
        write_records(tmp_path / "nils.rec", df)

        text = (tmp_path / "nils.rec").read_text()
        assert text.splitlines()[4].split() == ["@", "SCENARIO", "%s", "nil"]
        new = read_records(tmp_path / "nils.rec")
        assert new.headers["SCENARIO"] is None
        assert new.loc[0, "TEMPLATE"] is None

    def test_header_line_format(self):
        assert hendorse.writer._get_header_line("RUNS", 50, 20) == "@ RUNS                 %d                   50"  # noqa: SLF001
        assert hendorse.writer._get_header_line("SUITE", "MICRO", 10) == '@ SUITE      %s    "MICRO"'  # noqa: SLF001

    def test_small_colwidth_is_clamped(self, _audit_frame, tmp_path):
        write_records(tmp_path / "narrow.rec", _audit_frame, colwidth=2)
        write_records(tmp_path / "min.rec", _audit_frame, colwidth=10)
        assert_files_identical(tmp_path / "narrow.rec", tmp_path / "min.rec")

    def test_same_frame_same_bytes(self, _record_frame, tmp_path):
        write_records(tmp_path / "first.rec", _record_frame)
        write_records(tmp_path / "second.rec", _record_frame.copy())
        assert_files_identical(tmp_path / "first.rec", tmp_path / "second.rec")

    def test_writing_does_not_modify_the_frame(self, _audit_frame, tmp_path):
        reference = _audit_frame.copy()
        write_records(tmp_path / "audit.rec", _audit_frame, save_index=True)
        assert_record_frame_equal(reference, _audit_frame)


class TestFailures:
    def test_raising_on_non_unique_columns(self, tmp_path):
        df = RecordFrame(columns=["A", "B", "A"])
        with pytest.raises(TableFormatError, match="non-unique columns"):
            write_records(tmp_path / "dups.rec", df)
        assert not (tmp_path / "dups.rec").exists()

    def test_fail_on_spaces_columns(self, tmp_path):
        df = RecordFrame(columns=["allowed", "not allowed"])
        with pytest.raises(TableFormatError, match="strings without spaces"):
            write_records(tmp_path / "spaces.rec", df)

    def test_list_column_dataframe_fails_writes(self, _list_column_in_dataframe, tmp_path, caplog):
        with pytest.raises(TableFormatError, match="Lists or tuple elements"):
            write_records(tmp_path / "lists.rec", _list_column_in_dataframe)

        for record in caplog.records:
            assert record.levelname == "ERROR"
        assert "contains list/tuple values" in caplog.text

    def test_dtype_to_formatter_string_fails_unexpected_dtypes(self):
        unexpected_list = list(range(10))
        with pytest.raises(TypeError):
            _ = hendorse.writer._dtype_to_type_identifier(unexpected_list)  # noqa: SLF001

    def test_header_line_raises_on_non_strings(self):
        not_a_string = {}
        with pytest.raises(TypeError):
            _ = hendorse.writer._get_header_line(not_a_string, 10, 10)  # noqa: SLF001


# ----- Helpers & Fixtures ----- #


@pytest.fixture
def _list_column_in_dataframe() -> RecordFrame:
    """Returns a RecordFrame with a column having lists as elements."""
    rng = np.random.default_rng(3)
    data = {
        "TIME": rng.integers(0, 100_000, 4),
        "LATENCY": rng.uniform(0, 10, 4).round(7),
        "DEVICE": [_rand_string(rng) for _ in range(4)],
        "READINGS": [[1.0, 14.777], [2.0, 1243.9], [3.0], [123414.0, 9909.12795]],
    }
    return RecordFrame(data, headers={"TITLE": "readings", "RUNS": 4})


def _rand_string(rng: np.random.Generator, string_length: int = 10) -> str:
    return "".join(rng.choice(list(string.ascii_letters), string_length))
