from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple

import numpy as np
from loguru import logger
from rich.console import Console
from rich.progress import BarColumn, Progress, SpinnerColumn, TextColumn, TimeElapsedColumn
from rich.table import Table

from . import __version__
from .config import ExperimentConfig
from .equilibrium import chain_mean_energy, gibbs_probabilities, temperature_mk
from .exceptions import AnnealingError
from .extraction import ExtractionReport, extract
from .file_processor import DataFileProcessor
from .formatters import ResultFormatter
from .problems import SpinConfiguration
from .schedules import tabulate
from .simulator import AnnealingSimulator, simulate_point
from .spinbath import run_manifest


class SweepResult:
    """Rows in sweep order plus the failures recorded along the way."""

    def __init__(self, rows: List[Dict[str, Any]], failures: List[Dict[str, Any]], output_path: Optional[Path] = None):
        self.rows = rows
        self.failures = failures
        self.output_path = output_path

    @property
    def ok(self) -> bool:
        return not self.failures


class ExperimentApp:
    """Coordinates sweeps, equilibrium tables, extraction reports and schedule dumps."""

    def __init__(self, config: ExperimentConfig):
        self.config = config
        self.console = Console()
        self.file_processor = DataFileProcessor(config)

        self._setup_logging()

    def _setup_logging(self) -> None:
        """Setup logging configuration."""
        logger.remove()

        if self.config.verbose:
            logger.add(
                lambda msg: self.console.print(f"[dim]{msg}[/dim]", markup=False),
                level="DEBUG",
                format="{time:HH:mm:ss} | {level} | {message}",
            )
        else:
            logger.add(
                lambda msg: self.console.print(f"ERROR: {msg}", markup=False, style="red"),
                level="ERROR",
                format="{message}",
            )

    def run_sweep(self) -> SweepResult:
        """Simulate every annealing time; rows are written in sweep order."""
        self.config.validate_for_model()
        simulator = AnnealingSimulator(self.config)
        times = self.config.annealing_times_ns()
        self._show_setup_info(simulator.get_model_info(), times)

        outcomes = self._run_points(times)
        rows, failures = [], []
        for t_a, (result, error) in zip(times, outcomes):
            if error is None:
                rows.append(result)
            else:
                rows.append({"t_a_ns": t_a, "populations": None})
                failures.append({"t_a_ns": t_a, "error": error})

        output_path = self.file_processor.get_output_path("sweep")
        self.file_processor.validate_output_path(output_path)
        n_states = 2**simulator.problem.n
        ResultFormatter.save_result(ResultFormatter.format_result(rows, "sweep", n_states=n_states), output_path)

        manifest = self._manifest(simulator.get_model_info(), failures)
        if self.config.model == "spinbath":
            manifest["spinbath"] = [
                run_manifest(
                    self.config.bath, self.config.onset, t, self.config.step_ns, self.config.seeds, row.get("seed_populations")
                )
                for t, row in zip(times, rows)
            ]
        ResultFormatter.save_result(
            ResultFormatter.format_result(manifest, "manifest"), self.file_processor.manifest_path(output_path)
        )

        if failures:
            self.console.print(f"[yellow]{len(failures)} of {len(times)} points failed; see the manifest.[/yellow]")
        else:
            self.console.print(f"\n[green]✓ Sweep written to {output_path}[/green]")
        return SweepResult(rows, failures, output_path)

    def _run_points(self, times: List[float]) -> List[Tuple[Optional[Dict[str, Any]], Optional[str]]]:
        outcomes: List[Tuple[Optional[Dict[str, Any]], Optional[str]]] = [(None, None)] * len(times)
        with Progress(
            SpinnerColumn(),
            TextColumn("[progress.description]{task.description}"),
            BarColumn(),
            TextColumn("[progress.percentage]{task.percentage:>3.0f}%"),
            TimeElapsedColumn(),
            console=self.console,
        ) as progress:
            task = progress.add_task(f"Sweeping {self.config.model}...", total=len(times))

            if self.config.jobs == 1:
                for k, t_a in enumerate(times):
                    progress.update(task, description=f"t_a = {t_a:g} ns")
                    outcomes[k] = self._guarded(lambda: simulate_point(self.config, t_a), t_a)
                    progress.advance(task)
                return outcomes

            with ProcessPoolExecutor(max_workers=self.config.jobs) as pool:
                futures = [pool.submit(simulate_point, self.config, t_a) for t_a in times]
                for k, (t_a, future) in enumerate(zip(times, futures)):
                    outcomes[k] = self._guarded(future.result, t_a)
                    progress.advance(task)
        return outcomes

    @staticmethod
    def _guarded(call, t_a: float) -> Tuple[Optional[Dict[str, Any]], Optional[str]]:
        try:
            return call(), None
        except (AnnealingError, ValueError, RuntimeError) as e:
            logger.error(f"Point t_a={t_a:g} ns failed: {e}")
            return None, f"{type(e).__name__}: {e}"

    def _manifest(self, model_info: Dict[str, Any], failures: List[Dict[str, Any]]) -> Dict[str, Any]:
        return {
            "version": __version__,
            "config": self.config.model_dump(mode="json"),
            "model_info": model_info,
            "failures": failures,
        }

    def run_gibbs(self) -> Path:
        """Equilibrium table: chain <E> per length, or Gibbs probabilities of the problem."""
        self.config.validate_for_model()
        beta = self.config.effective_beta
        output_path = self.file_processor.get_output_path("gibbs")
        self.file_processor.validate_output_path(output_path)

        if self.config.chain_lengths:
            rows = [
                {"N": N, "J": self.config.chain_j, "beta": beta, "mean_energy": chain_mean_energy(N, self.config.chain_j, beta)}
                for N in self.config.chain_lengths
            ]
            content = ResultFormatter.format_result(rows, "chain")
        else:
            p = self.config.resolve_problem()
            probabilities = gibbs_probabilities(p, beta)
            labels = [SpinConfiguration.from_index(p.n, i).label() for i in range(2**p.n)]
            content = ResultFormatter.format_result(probabilities, "gibbs", energies=p.energies(), labels=labels)
            self._show_gibbs(labels, probabilities, beta)

        ResultFormatter.save_result(content, output_path)
        manifest = self._manifest({"model": "gibbs", "beta": beta}, [])
        ResultFormatter.save_result(
            ResultFormatter.format_result(manifest, "manifest"), self.file_processor.manifest_path(output_path)
        )
        self.console.print(f"[green]✓ Equilibrium table written to {output_path}[/green]")
        return output_path

    def _show_gibbs(self, labels: List[str], probabilities: np.ndarray, beta: float) -> None:
        title = f"Gibbs probabilities (beta={beta:.3f}, T={temperature_mk(beta):.1f} mK)" if beta > 0 else "Gibbs probabilities"
        table = Table(title=title)
        table.add_column("State", style="cyan")
        table.add_column("Probability", justify="right")
        for label, p in zip(labels, probabilities):
            table.add_row(label, f"{p:.4f}")
        self.console.print(table)

    def run_extract(self) -> ExtractionReport:
        """Both extraction methods on the configured input, shown as a table."""
        self.config.validate_for_model()
        problem = self.config.resolve_problem()
        table = self.file_processor.load_frequency_input()
        report = extract(table, problem, smooth=self.config.smooth, resamples=self.config.bootstrap, seed=self.config.seeds[0] if self.config.seeds else 0)

        self.console.print(ResultFormatter.extraction_table([report]))
        for label, error in (("Method 1", report.method1_error), ("Method 2", report.method2_error)):
            if error:
                self.console.print(f"[yellow]{label}: {error}[/yellow]")
        for result in report.bootstrap:
            self.console.print(f"Bootstrap {result.method}: beta = {result.mean:.3f} ± {result.std:.3f} ({result.failures} failed)")

        output_path = self.file_processor.get_output_path("extract").with_suffix(".json")
        self.file_processor.validate_output_path(output_path)
        ResultFormatter.save_result(ResultFormatter.format_result(report, "extraction"), output_path)
        return report

    def show_schedules(self, points: int = 101, t_a_ns: Optional[float] = None, output_path: Optional[Path] = None) -> str:
        """A(s), B(s) and, given t_a, B'(s) under the configured onset window."""
        rows = tabulate(self.config.annealing_schedule, points, self.config.onset if t_a_ns else None, t_a_ns)
        content = ResultFormatter.format_result(rows, "schedule")
        if output_path is not None:
            self.file_processor.validate_output_path(output_path)
            ResultFormatter.save_result(content, output_path)
        return content

    def _show_setup_info(self, model_info: Dict[str, Any], times: List[float]) -> None:
        if not self.config.verbose:
            return

        stats = self.file_processor.get_sweep_stats(times)
        table = Table(title="Sweep Setup", show_header=False, box=None)
        table.add_column("Setting", style="cyan")
        table.add_column("Value", style="white")

        for key, value in model_info.items():
            table.add_row(key.replace("_", " ").title(), str(value))
        table.add_row("Points", str(stats["points"]))
        table.add_row("t_a range (ns)", f"{stats['first_ns']:g} - {stats['last_ns']:g}")
        table.add_row("Jobs", str(self.config.jobs))

        self.console.print()
        self.console.print(table)
        self.console.print()
