"""Tests for CSV matrices and JSON run reports"""

import json

import numpy as np
import pytest

from exceptions import InputError, MatrixFileError
from matrix_io import (
    SCHEMA_FILE,
    SCHEMA_VERSION,
    build_run_report,
    describe_input,
    downsample_trace,
    dump_report,
    file_digest,
    load_report,
    parse_matrix,
    read_matrix,
    revalidate_report,
    to_jsonable,
    write_matrix,
)
from solver import solve


class TestParseMatrix:
    """Test CSV parsing and error locations"""

    def test_plain(self):
        """Test parsing a plain matrix"""
        matrix = parse_matrix("1,2\n3,4.5\n")
        np.testing.assert_array_equal(matrix, [[1.0, 2.0], [3.0, 4.5]])

    def test_header_and_blank_lines(self):
        """Test that a header and blank lines are skipped"""
        matrix = parse_matrix("exp1,exp2\n\n1,2\n\n3,4\n")
        assert matrix.shape == (2, 2)

    def test_exponent_and_negative_zero(self):
        """Test exponents, leading dots and negative zero"""
        matrix = parse_matrix("1e-3,-0\n.5,+2.\n")
        np.testing.assert_array_equal(matrix, [[1e-3, 0.0], [0.5, 2.0]])

    def test_single_column(self):
        """Test that one value per line is one experiment"""
        assert parse_matrix("1\n2\n3\n").shape == (3, 1)

    def test_ragged(self):
        """Test that a short row is reported by line"""
        with pytest.raises(MatrixFileError) as excinfo:
            parse_matrix("1,2\n3\n")
        assert excinfo.value.row == 2

    def test_negative_value_location(self):
        """Test that a negative value is reported by line and column"""
        with pytest.raises(MatrixFileError) as excinfo:
            parse_matrix("1,2,3\n4,-5,6\n")
        assert excinfo.value.row == 2
        assert excinfo.value.column == 2
        assert "negative" in str(excinfo.value)

    def test_non_numeric_location(self):
        """Test that a non-numeric cell is reported by line and column"""
        with pytest.raises(MatrixFileError) as excinfo:
            parse_matrix("1,2\n3,abc\n")
        assert (excinfo.value.row, excinfo.value.column) == (2, 2)

    def test_malformed_first_row_is_data(self):
        """A first row with any number in it is parsed, not skipped as a header"""
        with pytest.raises(MatrixFileError) as excinfo:
            parse_matrix("0.5,abc\n1,2\n")
        assert (excinfo.value.row, excinfo.value.column) == (1, 2)

    def test_nan_in_first_row(self):
        """nan and inf are number-like, so their row is data and fails to parse"""
        with pytest.raises(MatrixFileError) as excinfo:
            parse_matrix("nan,1\n1,2\n")
        assert (excinfo.value.row, excinfo.value.column) == (1, 1)
        with pytest.raises(MatrixFileError) as excinfo:
            parse_matrix("1,inf\n1,2\n")
        assert (excinfo.value.row, excinfo.value.column) == (1, 2)

    def test_decimal_comma_rejected(self):
        """Test that a decimal comma is rejected"""
        with pytest.raises(MatrixFileError):
            parse_matrix('1,2\n3,"4,5"\n')

    def test_empty(self):
        """Test that a file without data rows is rejected"""
        with pytest.raises(MatrixFileError):
            parse_matrix("\n\n")

    def test_input_error_exit_code(self):
        """Test that file errors carry exit status 1"""
        with pytest.raises(InputError) as excinfo:
            parse_matrix("x\n1,2\n3\n")
        assert excinfo.value.exit_code == 1


class TestMatrixFiles:
    """Test reading, writing and hashing matrix files"""

    def test_write_then_read(self, tmp_path):
        """Test that written matrices read back exactly"""
        path = tmp_path / "U.csv"
        matrix = np.array([[0.1, 1.0 / 3.0], [2.0, 0.0]])
        write_matrix(str(path), matrix)
        np.testing.assert_array_equal(read_matrix(str(path)), matrix)

    def test_missing_file(self, tmp_path):
        """Test that a missing file is a matrix file error"""
        with pytest.raises(MatrixFileError):
            read_matrix(str(tmp_path / "missing.csv"))

    def test_digest(self, tmp_path):
        """Test the file digest and input description"""
        path = tmp_path / "Y.csv"
        path.write_text("1,2\n")
        digest = file_digest(str(path))
        assert len(digest) == 64
        path.write_text("1,3\n")
        assert file_digest(str(path)) != digest
        assert describe_input(str(path), np.ones((1, 2))).shape == [1, 2]


class TestTraces:
    """Test trace downsampling and JSON conversion"""

    def test_short_trace_kept(self):
        """Test that short traces are kept whole"""
        trace = downsample_trace([3.0, 2.0, 1.0], 10)
        assert trace["values"] == [3.0, 2.0, 1.0]
        assert not trace["downsampled"]

    def test_long_trace_downsampled(self):
        """Test that long traces keep their endpoints"""
        trace = downsample_trace(list(range(1000)), 10)
        assert trace["downsampled"]
        assert trace["length"] == 1000
        assert len(trace["values"]) <= 10
        assert trace["values"][0] == 0
        assert trace["values"][-1] == 999

    def test_to_jsonable(self):
        """Test conversion of numpy values to JSON values"""
        value = to_jsonable({"a": np.float64(np.inf), "b": np.arange(2), "c": (np.bool_(True),)})
        assert value == {"a": None, "b": [0, 1], "c": [True]}


class TestRunReports:
    """Test run reports and their re-validation"""

    @pytest.fixture
    def estimate_report(self, toy_boundary):
        Y, U = toy_boundary
        report = solve(Y, U)
        text = dump_report(build_run_report("estimate", report.to_dict()))
        return text, Y, U

    def test_schema_version(self, estimate_report):
        """Test the report header"""
        text, _, _ = estimate_report
        data = json.loads(text)
        assert data["schema_version"] == SCHEMA_VERSION
        assert data["command"] == "estimate"

    def test_required_fields_listed_in_schema(self, estimate_report):
        """Test that reports carry every field the schema requires"""
        text, _, _ = estimate_report
        schema = json.loads(SCHEMA_FILE.read_text())
        data = json.loads(text)
        assert set(schema["required"]) <= set(data)

    def test_revalidate(self, estimate_report):
        """Test that a fresh estimate report re-validates"""
        text, Y, U = estimate_report
        result = revalidate_report(text, Y, U)
        assert result.ok, result.messages

    def test_revalidate_detects_tampering(self, estimate_report):
        """Test that an edited estimate fails re-validation"""
        text, Y, U = estimate_report
        data = json.loads(text)
        data["result"]["h_final"] = [1.0, 1.0]
        result = revalidate_report(json.dumps(data), Y, U)
        assert not result.ok

    def test_wrong_command(self):
        """Test that only estimate reports can be re-validated"""
        text = dump_report(build_run_report("check", {"well_posed": True}))
        assert not revalidate_report(text, np.ones((1, 1)), np.ones((1, 1))).ok

    def test_load_invalid(self):
        """Test that a report missing fields is rejected"""
        with pytest.raises(InputError):
            load_report(json.dumps({"schema_version": "2", "command": "estimate"}))

    def test_non_finite_values_become_null(self):
        """Test that nan is written as null"""
        text = dump_report(build_run_report("oracle", {"gap": float("nan")}))
        assert json.loads(text)["result"]["gap"] is None
