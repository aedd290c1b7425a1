"""Unit tests for report and file helpers."""

import csv
import json
import math

import numpy as np
import pytest

from coriolis_branches import utils


@pytest.mark.unit
class TestFilenameNormalization:
    """Tests for normalize_label_for_filename."""

    def test_keeps_safe_characters(self):
        """Alphanumerics, dots, dashes and underscores survive."""
        assert utils.normalize_label_for_filename("branch_T_T2.7565") == "branch_T_T2.7565"

    def test_replaces_unsafe_runs(self):
        """Spaces, slashes and symbols collapse into one underscore."""
        assert utils.normalize_label_for_filename("D1 / T=3.2") == "D1_T_3.2"

    def test_empty_label(self):
        """Empty or fully stripped labels fall back to 'unnamed'."""
        assert utils.normalize_label_for_filename("") == "unnamed"
        assert utils.normalize_label_for_filename("///") == "unnamed"


@pytest.mark.unit
class TestRoundFloats:
    """Tests for the JSON float normalization."""

    def test_twelve_significant_digits(self):
        """Floats keep 12 significant digits."""
        assert utils.round_floats(math.pi) == 3.14159265359
        assert utils.round_floats(2.0 / 3.0e-7) == 6666666.66667

    def test_non_finite_become_none(self):
        """inf and nan are not valid JSON numbers."""
        assert utils.round_floats([math.inf, -math.inf, math.nan]) == [None, None, None]

    def test_numpy_types(self):
        """numpy scalars and arrays turn into plain Python values."""
        out = utils.round_floats({"a": np.float64(0.5), "b": np.int64(3), "c": np.array([1.0, 2.0])})
        assert out == {"a": 0.5, "b": 3, "c": [1.0, 2.0]}
        assert type(out["b"]) is int

    def test_bools_stay_bools(self):
        """bool is not turned into int."""
        assert utils.round_floats({"ok": True, "np": np.bool_(False)}) == {"ok": True, "np": False}

    def test_tuples_become_lists(self):
        """Tuples serialize as lists."""
        assert utils.round_floats((1, (2.5, None))) == [1, [2.5, None]]


@pytest.mark.unit
class TestDumpsReport:
    """Tests for the versioned JSON document."""

    def test_schema_field_first(self):
        """The schema version leads the document."""
        text = utils.dumps_report({"region": "R1"})
        document = json.loads(text)
        assert list(document)[0] == "schema"
        assert document["schema"] == utils.SCHEMA_VERSION

    def test_deterministic(self):
        """The same payload always produces the same text."""
        payload = {"T": 2 * math.pi, "values": [1.0 / 3.0, math.inf]}
        assert utils.dumps_report(payload) == utils.dumps_report(dict(payload))
        assert json.loads(utils.dumps_report(payload))["values"] == [0.333333333333, None]


@pytest.mark.unit
class TestFileHelpers:
    """Tests for directory creation and CSV output."""

    def test_ensure_dir_exists_creates_nested(self, tmp_path):
        """Missing parents are created."""
        target = tmp_path / "a" / "b"
        utils.ensure_dir_exists(target)
        assert target.is_dir()

    def test_ensure_dir_exists_is_idempotent(self, temp_output_dir):
        """An existing directory is left alone."""
        utils.ensure_dir_exists(temp_output_dir)
        assert temp_output_dir.is_dir()

    def test_write_branch_csv(self, temp_output_dir):
        """Header and one line per orbit."""
        rows = [
            {"step": 0, "T": 2.75649, "amplitude": 1e-3, "max_abs_z": 1e-3, "samples": 64},
            {"step": 1, "T": 2.75650, "amplitude": 2.5e-3, "max_abs_z": 2.5e-3, "samples": 64},
        ]
        path = utils.write_branch_csv(temp_output_dir / "sub" / "branch.csv", rows)
        with path.open(encoding="utf-8", newline="") as handle:
            lines = list(csv.reader(handle))
        assert tuple(lines[0]) == utils.BRANCH_CSV_COLUMNS
        assert len(lines) == 3
        assert float(lines[2][1]) == pytest.approx(2.7565)
        assert lines[1][4] == "64"
