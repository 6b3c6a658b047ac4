import json
from pathlib import Path
from unittest.mock import patch

import pytest
from click.testing import CliRunner

from src.cli import main


class TestCLI:
    """Test cases for CLI interface."""

    @pytest.fixture
    def runner(self):
        """Create CLI runner."""
        return CliRunner()

    def test_sweep(self, runner, tmp_path):
        """Test a sweep builds the config from its options."""
        with patch('src.cli.ExperimentApp') as mock_app_class:
            mock_app = mock_app_class.return_value
            mock_app.run_sweep.return_value.ok = True

            result = runner.invoke(main, [
                'sweep',
                '--model', 'markov',
                '--problem', '2S3',
                '--t-a', '0.5',
                '--t-a', '10',
                '--temperature', '28',
                '--out', str(tmp_path / 'out.csv'),
                '--verbose',
            ])

            assert result.exit_code == 0
            mock_app.run_sweep.assert_called_once()

            config = mock_app_class.call_args[0][0]
            assert config.model == 'markov'
            assert config.problem == '2S3'
            assert config.t_a_us == [0.5, 10.0]
            assert config.temperature_mk == 28.0
            assert config.output == tmp_path / 'out.csv'
            assert config.verbose is True

    def test_sweep_failures_exit_one(self, runner):
        """Test a sweep with failed points exits with status 1."""
        with patch('src.cli.ExperimentApp') as mock_app_class:
            mock_app_class.return_value.run_sweep.return_value.ok = False

            result = runner.invoke(main, ['sweep', '--t-a', '1'])

            assert result.exit_code == 1

    def test_sweep_error_exits_one(self, runner):
        """Test an exception during the sweep is reported with status 1."""
        with patch('src.cli.ExperimentApp') as mock_app_class:
            mock_app_class.return_value.run_sweep.side_effect = RuntimeError("Failed to save")

            result = runner.invoke(main, ['sweep', '--t-a', '1'])

            assert result.exit_code == 1
            assert "Failed to save" in result.output

    def test_empty_sweep_is_config_error(self, runner):
        """Test a sweep without annealing times exits with status 2."""
        with patch('src.cli.ExperimentApp') as mock_app_class:
            result = runner.invoke(main, ['sweep'])

            assert result.exit_code == 2
            assert "empty" in result.output
            mock_app_class.assert_not_called()

    def test_wrong_problem_size_is_config_error(self, runner):
        """Test the Bloch model with a two-spin problem exits with status 2."""
        with patch('src.cli.ExperimentApp'):
            result = runner.invoke(main, ['sweep', '--model', 'bloch', '--problem', '2S1', '--t-a', '1'])

            assert result.exit_code == 2

    def test_unknown_problem_is_config_error(self, runner):
        """Test an unknown instance name exits with status 2."""
        with patch('src.cli.ExperimentApp'):
            result = runner.invoke(main, ['sweep', '--problem', 'nope', '--t-a', '1'])

            assert result.exit_code == 2

    def test_config_file_with_overrides(self, runner, tmp_path):
        """Test command-line options override values from the config file."""
        config_file = tmp_path / 'experiment.json'
        config_file.write_text(json.dumps({'model': 'lindblad', 't_a_us': [1.0, 2.0], 'c': 0.02, 'jobs': 2}))

        with patch('src.cli.ExperimentApp') as mock_app_class:
            mock_app_class.return_value.run_sweep.return_value.ok = True

            result = runner.invoke(main, ['sweep', '--config', str(config_file), '--model', 'markov', '--seed', '5'])

            assert result.exit_code == 0
            config = mock_app_class.call_args[0][0]
            assert config.model == 'markov'
            assert config.t_a_us == [1.0, 2.0]
            assert config.c == 0.02
            assert config.jobs == 2
            assert config.seeds == [5]

    def test_config_file_unknown_key(self, runner, tmp_path):
        """Test unknown config keys exit with status 2."""
        config_file = tmp_path / 'experiment.json'
        config_file.write_text(json.dumps({'modle': 'lindblad'}))

        with patch('src.cli.ExperimentApp'):
            result = runner.invoke(main, ['sweep', '--config', str(config_file)])

            assert result.exit_code == 2
            assert "modle" in result.output

    def test_gibbs_chains(self, runner):
        """Test the gibbs subcommand passes chain lengths and beta."""
        with patch('src.cli.ExperimentApp') as mock_app_class:
            mock_app = mock_app_class.return_value

            result = runner.invoke(main, ['gibbs', '--beta', '7.48', '--chain-length', '10', '--chain-length', '100'])

            assert result.exit_code == 0
            mock_app.run_gibbs.assert_called_once()
            config = mock_app_class.call_args[0][0]
            assert config.model == 'gibbs'
            assert config.beta == 7.48
            assert config.chain_lengths == [10, 100]

    def test_gibbs_short_chain(self, runner):
        """Test a chain shorter than two spins exits with status 2."""
        with patch('src.cli.ExperimentApp'):
            result = runner.invoke(main, ['gibbs', '--beta', '1', '--chain-length', '1'])

            assert result.exit_code == 2

    def test_extract(self, runner, tmp_path):
        """Test the extract subcommand passes its input and options."""
        samples = tmp_path / 'samples.txt'
        samples.write_text("++\n+-\n")

        with patch('src.cli.ExperimentApp') as mock_app_class:
            mock_app = mock_app_class.return_value

            result = runner.invoke(main, ['extract', '--input', str(samples), '--problem', '2S4', '--smooth', '--bootstrap', '100'])

            assert result.exit_code == 0
            mock_app.run_extract.assert_called_once()
            config = mock_app_class.call_args[0][0]
            assert config.input == samples
            assert config.smooth is True
            assert config.bootstrap == 100

    def test_extract_missing_input(self, runner, tmp_path):
        """Test a missing input file is a usage error."""
        result = runner.invoke(main, ['extract', '--input', str(tmp_path / 'missing.txt')])

        assert result.exit_code == 2

    def test_schedules_to_stdout(self, runner):
        """Test the schedule table is printed without an output file."""
        result = runner.invoke(main, ['schedules', '--schedule', 'fast', '--points', '3'])

        assert result.exit_code == 0
        lines = result.output.strip().splitlines()
        assert lines[1] == "s,A_GHz,B_GHz"
        assert len(lines) == 5

    def test_schedules_with_onset(self, runner, tmp_path):
        """Test --t-a adds the B' column and --out writes a file."""
        out = tmp_path / 'schedule.csv'

        result = runner.invoke(main, ['schedules', '--points', '5', '--t-a', '2', '--onset', '0', '1', '--out', str(out)])

        assert result.exit_code == 0
        assert out.exists()
        assert "B_prime_GHz" in out.read_text()

    @pytest.mark.parametrize("flag, embedded", [([], False), (['--embed'], True)])
    def test_sweep_fast_schedule_with_fields(self, runner, flag, embedded):
        """Test fast anneals of problems with fields run directly or embedded on request."""
        with patch('src.cli.ExperimentApp') as mock_app_class:
            mock_app_class.return_value.run_sweep.return_value.ok = True

            result = runner.invoke(main, [
                'sweep', '--model', 'schrodinger', '--problem', '1S-0.25', '--schedule', 'fast', '--t-a', '0.005', *flag,
            ])

            assert result.exit_code == 0
            config = mock_app_class.call_args[0][0]
            assert config.schedule == 'fast'
            assert config.embed is embedded

    def test_sweep_schedule_files(self, runner, tmp_path):
        """Test --schedule-files reaches the config as a pair of paths."""
        a_file, b_file = tmp_path / 'a.csv', tmp_path / 'b.csv'
        a_file.write_text("0,1\n1,0\n")
        b_file.write_text("0,0\n1,2\n")

        with patch('src.cli.ExperimentApp') as mock_app_class:
            mock_app_class.return_value.run_sweep.return_value.ok = True

            result = runner.invoke(main, ['sweep', '--schedule-files', str(a_file), str(b_file), '--t-a', '1'])

            assert result.exit_code == 0
            config = mock_app_class.call_args[0][0]
            assert config.schedule_files == (a_file, b_file)
            assert config.annealing_schedule.kind == 'tabulated'

    def test_schedules_from_files(self, runner, tmp_path):
        """Test the schedule dump interpolates user tables."""
        a_file, b_file = tmp_path / 'a.csv', tmp_path / 'b.csv'
        a_file.write_text("0,1\n1,0\n")
        b_file.write_text("0,0\n1,2\n")

        result = runner.invoke(main, ['schedules', '--schedule-files', str(a_file), str(b_file), '--points', '3'])

        assert result.exit_code == 0
        lines = result.output.strip().splitlines()
        assert lines[3] == "0.5,0.5,1.0"

    def test_schedules_bad_table_is_config_error(self, runner, tmp_path):
        """Test a table with decreasing s exits with status 2."""
        a_file, b_file = tmp_path / 'a.csv', tmp_path / 'b.csv'
        a_file.write_text("1,1\n0,0\n")
        b_file.write_text("0,0\n1,2\n")

        result = runner.invoke(main, ['schedules', '--schedule-files', str(a_file), str(b_file)])

        assert result.exit_code == 2

    def test_schedules_needs_points(self, runner):
        """Test fewer than two points exits with status 2."""
        result = runner.invoke(main, ['schedules', '--points', '1'])

        assert result.exit_code == 2

    def test_help(self, runner):
        """Test help lists the subcommands."""
        result = runner.invoke(main, ['--help'])

        assert result.exit_code == 0
        for command in ('sweep', 'gibbs', 'extract', 'schedules'):
            assert command in result.output
