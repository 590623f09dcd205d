"""
Here we only test that writing and reading with compression keeps the data intact.
"""

import pytest

from hendorse.reader import read_headers, read_records
from hendorse.testing import assert_record_frame_equal
from hendorse.writer import write_records

SUPPORTED_EXTENSIONS: tuple[str] = ["gz", "bz2", "zip", "xz", "zst", "tar", "tar.gz"]  # through pandas


@pytest.mark.parametrize("extension", SUPPORTED_EXTENSIONS)
def test_write_read_compressed(_record_file, tmp_path, extension):
    """Ensure that writing in compressed format preserves data."""
    ref_df = read_records(_record_file)

    compressed_path = tmp_path / f"audit.rec.{extension}"
    write_records(compressed_path, ref_df)
    assert compressed_path.exists()
    assert compressed_path.stat().st_size > 0
    assert compressed_path.stat().st_size != _record_file.stat().st_size

    test_df = read_records(compressed_path)
    assert_record_frame_equal(ref_df, test_df)


@pytest.mark.parametrize("extension", SUPPORTED_EXTENSIONS)
def test_write_read_compressed_with_index(_audit_frame, tmp_path, extension):
    df = _audit_frame.set_index("TARGET")
    compressed_path = tmp_path / f"indexed.rec.{extension}"
    write_records(compressed_path, df, save_index=True)
    assert_record_frame_equal(df, read_records(compressed_path))


@pytest.mark.parametrize("extension", SUPPORTED_EXTENSIONS)
def test_read_headers_compressed(_record_file_booleans, tmp_path, extension):
    compressed_path = tmp_path / f"booleans.rec.{extension}"
    write_records(compressed_path, read_records(_record_file_booleans))

    headers = read_headers(compressed_path)
    assert headers == read_headers(_record_file_booleans)
    assert headers["BOOLTRUE3"] is True
    assert headers["TITLE"] == "booleans"
