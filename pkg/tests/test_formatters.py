import json
import math

import numpy as np
import pytest

from src.extraction import ExtractedModel, ExtractionReport
from src.formatters import SCHEMA_VERSION, ResultFormatter


def data_lines(content: str):
    return [line for line in content.strip().splitlines() if not line.startswith("#")]


class TestResultFormatter:
    """Test cases for ResultFormatter."""

    @pytest.fixture
    def sweep_rows(self):
        """Two successful points and one failed point."""
        return [
            {"t_a_ns": 500.0, "populations": [0.4, 0.3, 0.3, 0.0], "mean_energy": -1.0},
            {"t_a_ns": 1000.0, "populations": None},
            {"t_a_ns": 2000.0, "populations": [0.5, 0.25, 0.25, 0.0], "mean_energy": -1.0},
        ]

    @pytest.fixture
    def report(self):
        """Extraction report with one failed method."""
        return ExtractionReport(
            instance="2S4",
            method1=ExtractedModel(lambdas=(-0.3948, 0.282, 0.564), beta=5.64, h1_hat=-0.07, h2_hat=0.05, J_hat=0.1),
            method2_error="NoSolutionError: no root",
        )

    def test_sweep_csv(self, sweep_rows):
        """Test header, schema line and values of the sweep table."""
        content = ResultFormatter.format_sweep_csv(sweep_rows, n_states=4)
        lines = content.splitlines()

        assert lines[0] == f"# schema_version={SCHEMA_VERSION}"
        assert lines[1] == "t_a_ns,p_0,p_1,p_2,p_3,mean_energy"
        assert lines[2] == "500.0,0.4,0.3,0.3,0.0,-1.0"
        assert len(lines) == 5

    def test_sweep_csv_failed_row(self, sweep_rows):
        """Test failed points are written as nan."""
        row = ResultFormatter.format_sweep_csv(sweep_rows, n_states=4).splitlines()[3]

        assert row == "1000.0,nan,nan,nan,nan,nan"

    def test_sweep_csv_seed_spread(self):
        """Test seed-averaged rows add one std column per state."""
        rows = [
            {"t_a_ns": 2.0, "populations": [0.5, 0.5], "mean_energy": 0.0, "spread": [0.1, 0.1]},
            {"t_a_ns": 4.0, "populations": None},
        ]
        lines = data_lines(ResultFormatter.format_sweep_csv(rows, n_states=2))

        assert lines[0] == "t_a_ns,p_0,p_1,mean_energy,std_p_0,std_p_1"
        assert lines[1] == "2.0,0.5,0.5,0.0,0.1,0.1"
        assert lines[2] == "4.0,nan,nan,nan,nan,nan"

    def test_sweep_csv_values_round_trip(self, sweep_rows):
        """Test written values parse back to the same floats."""
        rows = [{"t_a_ns": 1.0, "populations": [1 / 3, 2 / 3], "mean_energy": math.pi}]
        values = data_lines(ResultFormatter.format_sweep_csv(rows, n_states=2))[1].split(",")

        assert [float(v) for v in values] == [1.0, 1 / 3, 2 / 3, math.pi]

    def test_chain_csv(self):
        """Test the per-bond column of the chain table."""
        rows = [{"N": 11, "J": -0.1, "beta": 7.48, "mean_energy": -0.6}]
        lines = data_lines(ResultFormatter.format_chain_csv(rows))

        assert lines[0] == "N,J,beta,mean_energy,mean_energy_per_bond"
        values = lines[1].split(",")
        assert values[0] == "11"
        assert float(values[4]) == pytest.approx(-0.06)

    def test_gibbs_csv(self):
        """Test state labels, energies and probabilities."""
        content = ResultFormatter.format_gibbs_csv([0.2, 0.8], [-0.1, 0.1], ["↑", "↓"])
        lines = data_lines(content)

        assert lines[0] == "index,state,energy,probability"
        assert lines[1] == "0,↑,-0.1,0.2"
        assert lines[2] == "1,↓,0.1,0.8"

    @pytest.mark.parametrize("columns, header", [(3, "s,A_GHz,B_GHz"), (4, "s,A_GHz,B_GHz,B_prime_GHz")])
    def test_schedule_csv(self, columns, header):
        """Test the B' column appears only when tabulated."""
        table = np.zeros((5, columns))
        lines = data_lines(ResultFormatter.format_schedule_csv(table))

        assert lines[0] == header
        assert len(lines) == 6

    def test_manifest_is_deterministic(self):
        """Test manifests have sorted keys and the schema version."""
        first = ResultFormatter.format_manifest({"b": 1, "a": [1, 2]})
        second = ResultFormatter.format_manifest({"a": [1, 2], "b": 1})

        assert first == second
        data = json.loads(first)
        assert data["schema_version"] == SCHEMA_VERSION
        assert list(data) == ["a", "b", "schema_version"]

    def test_extraction_json(self, report):
        """Test temperatures are added and errors kept."""
        data = json.loads(ResultFormatter.format_extraction_json(report))

        assert data["instance"] == "2S4"
        assert data["method1"]["beta"] == 5.64
        assert data["method1"]["temperature_mk"] == pytest.approx(36.5, abs=0.1)
        assert data["method2_beta"] is None
        assert data["method2_temperature_mk"] is None
        assert data["method2_error"].startswith("NoSolutionError")

    def test_extraction_table(self, report):
        """Test one row per report with all parameter columns."""
        table = ResultFormatter.extraction_table([report, ExtractionReport(instance="2S1", method2_beta=6.93)])

        assert table.row_count == 2
        assert len(table.columns) == 8

    def test_format_result_dispatch(self, sweep_rows):
        """Test format_result routes to the named formatter."""
        content = ResultFormatter.format_result(sweep_rows, "sweep", n_states=4)

        assert content == ResultFormatter.format_sweep_csv(sweep_rows, n_states=4)

    def test_unsupported_format(self):
        """Test unsupported format raises error."""
        with pytest.raises(ValueError, match="Unsupported output format"):
            ResultFormatter.format_result({}, "xml")

    def test_save_result(self, tmp_path):
        """Test saving creates parent directories."""
        output = tmp_path / "a" / "b" / "result.csv"

        ResultFormatter.save_result("content\n", output)

        assert output.read_text(encoding="utf-8") == "content\n"
