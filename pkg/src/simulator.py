from typing import Any, Dict, Optional, Tuple

import numpy as np
from loguru import logger

from .bloch import evolve_bloch
from .config import ExperimentConfig
from .lindblad import DissipationSpec, evolve_lindblad
from .markov import evolve_markov
from .problems import EmbeddedProblem, IsingProblem, embed_fast_anneal
from .schrodinger import AnnealRun, evolve_tdse, populations
from .spinbath import seed_populations


class AnnealingSimulator:
    """Runs one annealing time through the configured dynamical model."""

    def __init__(self, config: ExperimentConfig):
        self.config = config
        self.problem: IsingProblem = config.resolve_problem()
        self.schedule = config.annealing_schedule
        self.onset = config.onset
        self.embedded: Optional[EmbeddedProblem] = None
        if config.embed:
            self.embedded = embed_fast_anneal(self.problem, schedule=self.schedule)

    def simulate(self, t_a: float) -> Dict[str, Any]:
        """Populations (index order) and <E> at annealing time t_a (ns)."""
        model = self.config.model
        dt = self.config.step_ns
        logger.info(f"Simulating {self.problem.name} with {model} at t_a={t_a:g} ns")

        extras: Dict[str, Any] = {}
        if model == "schrodinger":
            probs = self._schrodinger(t_a, dt)
        elif model == "bloch":
            state = evolve_bloch(self.problem, self.schedule, self.config.bloch, t_a, dt=dt, onset=self.onset)
            probs = state.populations()
        elif model == "lindblad":
            probs = evolve_lindblad(self.problem, self.schedule, self.onset, self._dissipation(), t_a, dt=dt).populations()
        elif model == "markov":
            probs = evolve_markov(self.problem, self.schedule, self.onset, self._dissipation(), t_a, dt=dt).as_array()
        elif model == "spinbath":
            probs, extras = self._spinbath(t_a, dt)
        else:
            raise ValueError(f"Model '{model}' does not simulate annealing runs")

        probs = np.clip(np.asarray(probs, dtype=float), 0.0, None)
        result = {
            "t_a_ns": t_a,
            "populations": probs.tolist(),
            "mean_energy": float(probs @ self.problem.energies()),
        }
        result.update(extras)
        logger.success(f"Finished t_a={t_a:g} ns: p={np.round(probs, 6).tolist()}")
        return result

    def _dissipation(self) -> DissipationSpec:
        return DissipationSpec(c=self.config.dissipation_rate, beta=self.config.effective_beta)

    def _schrodinger(self, t_a: float, dt: float) -> np.ndarray:
        target = self.embedded or self.problem
        run = AnnealRun(problem=target, schedule=self.schedule, onset=self.onset, t_a=t_a, dt=dt)
        probs = populations(evolve_tdse(run, method=self.config.tdse_method))
        if self.embedded is not None:
            probs = self.embedded.original_marginals(probs)
        return probs

    def _spinbath(self, t_a: float, dt: float) -> Tuple[np.ndarray, Dict[str, Any]]:
        """Seed-averaged populations plus the per-seed curves and their spread."""
        runs = seed_populations(self.problem, self.schedule, self.onset, self.config.bath, t_a, self.config.seeds, dt)
        spread = runs.std(axis=0, ddof=1) if len(runs) > 1 else np.zeros(runs.shape[1])
        logger.debug(f"Seed spread at t_a={t_a:g} ns: {np.round(spread, 6).tolist()}")
        return runs.mean(axis=0), {"spread": spread.tolist(), "seed_populations": runs.tolist()}

    def get_model_info(self) -> Dict[str, Any]:
        info = {
            "model": self.config.model,
            "problem": self.problem.name,
            "qubits": self.problem.n,
            "schedule": "tabulated" if self.config.schedule_files else self.config.schedule,
            "onset_ns": [self.onset.t_start, self.onset.t_end],
            "dt_ns": self.config.step_ns,
        }
        if self.config.model in ("lindblad", "markov"):
            info.update(beta=self.config.effective_beta, c=self.config.dissipation_rate)
        if self.config.model == "bloch":
            info.update(self.config.bloch.model_dump())
        if self.embedded is not None:
            info.update(embedded_qubits=self.embedded.n, h_fb=self.embedded.h_fb)
        return info


def simulate_point(config: ExperimentConfig, t_a: float) -> Dict[str, Any]:
    """Worker entry point for process pools."""
    return AnnealingSimulator(config).simulate(t_a)
