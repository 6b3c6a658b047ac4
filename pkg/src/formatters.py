import json
import math
from pathlib import Path
from typing import Any, Dict, List, Sequence

import numpy as np
from rich.table import Table

from .extraction import ExtractionReport

SCHEMA_VERSION = 1


def _number(value: float) -> str:
    """Shortest round-trip representation; 'nan' for failed rows."""
    if value is None or (isinstance(value, float) and math.isnan(value)):
        return "nan"
    return repr(float(value))


class ResultFormatter:
    """Format simulation results as CSV tables, JSON manifests and rich tables."""

    @staticmethod
    def format_sweep_csv(rows: Sequence[Dict[str, Any]], n_states: int) -> str:
        """Header ``t_a_ns,p_0..p_{2^n-1},mean_energy``; failed rows carry nan.

        Rows averaged over seeds add ``std_p_0..std_p_{2^n-1}`` columns.
        """
        with_spread = any("spread" in row for row in rows)
        header = ["t_a_ns"] + [f"p_{i}" for i in range(n_states)] + ["mean_energy"]
        if with_spread:
            header += [f"std_p_{i}" for i in range(n_states)]
        lines = [f"# schema_version={SCHEMA_VERSION}", ",".join(header)]
        for row in rows:
            populations = row.get("populations") or [math.nan] * n_states
            values = [row["t_a_ns"], *populations, row.get("mean_energy", math.nan)]
            if with_spread:
                values += row.get("spread") or [math.nan] * n_states
            lines.append(",".join(_number(v) for v in values))
        return "\n".join(lines) + "\n"

    @staticmethod
    def format_chain_csv(rows: Sequence[Dict[str, Any]]) -> str:
        lines = [f"# schema_version={SCHEMA_VERSION}", "N,J,beta,mean_energy,mean_energy_per_bond"]
        for row in rows:
            values = [row["N"], row["J"], row["beta"], row["mean_energy"], row["mean_energy"] / (row["N"] - 1)]
            lines.append(",".join(str(v) if isinstance(v, int) else _number(v) for v in values))
        return "\n".join(lines) + "\n"

    @staticmethod
    def format_gibbs_csv(probabilities: Sequence[float], energies: Sequence[float], labels: Sequence[str]) -> str:
        lines = [f"# schema_version={SCHEMA_VERSION}", "index,state,energy,probability"]
        for i, (label, e, p) in enumerate(zip(labels, energies, probabilities)):
            lines.append(f"{i},{label},{_number(e)},{_number(p)}")
        return "\n".join(lines) + "\n"

    @staticmethod
    def format_schedule_csv(table: np.ndarray) -> str:
        columns = ["s", "A_GHz", "B_GHz", "B_prime_GHz"][: table.shape[1]]
        lines = [f"# schema_version={SCHEMA_VERSION}", ",".join(columns)]
        lines.extend(",".join(_number(v) for v in row) for row in table)
        return "\n".join(lines) + "\n"

    @staticmethod
    def format_manifest(manifest: Dict[str, Any]) -> str:
        """Deterministic JSON: sorted keys, no timestamps."""
        return json.dumps({"schema_version": SCHEMA_VERSION, **manifest}, indent=2, sort_keys=True, ensure_ascii=False, default=str) + "\n"

    @staticmethod
    def format_extraction_json(report: ExtractionReport) -> str:
        data = report.model_dump(mode="json")
        if report.method1 is not None and report.method1.beta > 0:
            data["method1"]["temperature_mk"] = report.method1.temperature_mk
        data["method2_temperature_mk"] = report.method2_temperature_mk
        return json.dumps(data, indent=2, sort_keys=True) + "\n"

    @staticmethod
    def extraction_table(reports: List[ExtractionReport]) -> Table:
        """Parameters from both methods side by side."""
        table = Table(title="Extracted Parameters")
        table.add_column("Instance", style="cyan")
        for name in ("h1", "h2", "J", "beta (M1)", "T mK (M1)", "beta (M2)", "T mK (M2)"):
            table.add_column(name, justify="right")

        for report in reports:
            if report.method1 is not None:
                m1 = report.method1
                temperature = f"{m1.temperature_mk:.1f}" if m1.beta > 0 else "-"
                first = [f"{m1.h1_hat:.3f}", f"{m1.h2_hat:.3f}", f"{m1.J_hat:.3f}", f"{m1.beta:.2f}", temperature]
            else:
                first = ["-", "-", "-", "[red]failed[/red]", "-"]
            if report.method2_beta is not None:
                t2 = report.method2_temperature_mk
                second = [f"{report.method2_beta:.2f}", f"{t2:.1f}" if t2 is not None else "-"]
            else:
                second = ["[red]failed[/red]", "-"]
            table.add_row(report.instance, *first, *second)
        return table

    @classmethod
    def format_result(cls, result: Any, output_format: str, **kwargs) -> str:
        """Format result according to specified format."""
        formatters = {
            "sweep": cls.format_sweep_csv,
            "chain": cls.format_chain_csv,
            "gibbs": cls.format_gibbs_csv,
            "schedule": cls.format_schedule_csv,
            "manifest": cls.format_manifest,
            "extraction": cls.format_extraction_json,
        }

        formatter = formatters.get(output_format)
        if not formatter:
            raise ValueError(f"Unsupported output format: {output_format}")

        return formatter(result, **kwargs)

    @staticmethod
    def save_result(content: str, output_path: Path) -> None:
        """Save formatted content to file."""
        try:
            output_path.parent.mkdir(parents=True, exist_ok=True)
            output_path.write_text(content, encoding="utf-8")
        except Exception as e:
            raise RuntimeError(f"Failed to save to {output_path}: {e}")
