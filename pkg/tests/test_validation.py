import numpy as np
import pytest

from hendorse.errors import TableFormatError
from hendorse.frame import RecordFrame, validate
from hendorse.writer import write_records


class TestWarnings:
    def test_warn_non_finite_values(self, _record_frame, caplog):
        _record_frame.loc[3, "b"] = np.nan
        validate(_record_frame, info_str="with a hole")

        for record in caplog.records:
            assert record.levelname == "WARNING"
        assert "RecordFrame with a hole contains non-finite values" in caplog.text

    def test_infinite_values_are_written(self, _record_frame, tmp_path, caplog):
        _record_frame.loc[0, "a"] = np.inf
        write_records(tmp_path / "inf.rec", _record_frame)
        assert "non-finite values" in caplog.text
        assert (tmp_path / "inf.rec").is_file()

    def test_no_warning_on_finite_values(self, _audit_frame, caplog):
        validate(_audit_frame)
        assert "non-finite" not in caplog.text


class TestFailures:
    def test_validate_raises_on_non_unique_columns(self):
        df = RecordFrame(columns=["A", "B", "A"])
        with pytest.raises(TableFormatError, match="non-unique columns"):
            validate(df)

    def test_non_unique_index_is_accepted(self, _audit_frame):
        validate(_audit_frame.set_index("TIME"))  # two entries at time 0

    def test_validation_raises_space_in_colname(self):
        df = RecordFrame(columns=["TIME", "FAILED CHECKS"])
        with pytest.raises(TableFormatError, match="without spaces"):
            validate(df)

    def test_validation_raises_on_wrong_column_name_type(self):
        df = RecordFrame(columns=[1, 2, 3])
        with pytest.raises(TableFormatError, match="must be strings"):
            validate(df)

    def test_validation_raises_on_tuple_elements(self, _audit_frame, caplog):
        _audit_frame["TARGET"] = [("lock-1", "lock")] * 4
        with pytest.raises(TableFormatError, match="Lists or tuple"):
            validate(_audit_frame, info_str="from mediation")
        assert "RecordFrame from mediation contains list/tuple values" in caplog.text

    def test_validation_raises_on_complex_columns(self):
        df = RecordFrame({"SIGNAL": [1 + 2j, 3 - 1j]}, headers={"TITLE": "signal"})
        with pytest.raises(TableFormatError, match="unsupported dtype"):
            validate(df)

    def test_validation_raises_on_space_in_header_name(self, _audit_frame):
        _audit_frame.headers["EVIDENCE MODE"] = "RECENT_EVENTS"
        with pytest.raises(TableFormatError, match="Header names"):
            validate(_audit_frame)

    def test_writer_validates_first(self, _audit_frame, tmp_path):
        _audit_frame.headers["EVIDENCE MODE"] = "RECENT_EVENTS"
        with pytest.raises(TableFormatError):
            write_records(tmp_path / "audit.rec", _audit_frame)
        assert not (tmp_path / "audit.rec").exists()
