"""Gibbs predictions, open-chain mean energy and inverse-temperature fitting.

The inverse temperature is dimensionless, ``beta = C / T`` with
``C = h B(1) / (2 k_B) = 0.206 K``, so ``beta * E`` uses problem-unit energies.
"""

from typing import List, Sequence, Tuple, Union

import numpy as np
from loguru import logger
from pydantic import BaseModel, ConfigDict, Field, model_validator
from scipy.optimize import minimize_scalar
from scipy.special import logsumexp

from .exceptions import NonIdentifiableError, ProblemValidationError
from .problems import IsingProblem

C_KELVIN = 0.206
MAX_ENUMERATION_QUBITS = 20


def temperature_mk(beta: float) -> float:
    """Effective temperature T = C / beta in millikelvin."""
    if beta <= 0:
        raise ValueError(f"Temperature is undefined for beta={beta}")
    return 1e3 * C_KELVIN / beta


def beta_from_temperature_mk(temperature: float) -> float:
    if temperature <= 0:
        raise ValueError(f"Temperature must be positive, got {temperature} mK")
    return 1e3 * C_KELVIN / temperature


def boltzmann_weights(energies: np.ndarray, beta: float) -> np.ndarray:
    """Normalized exp(-beta E) with log-sum-exp stabilization."""
    if beta < 0:
        raise ValueError(f"beta must be nonnegative, got {beta}")
    exponent = -beta * np.asarray(energies, dtype=float)
    return np.exp(exponent - logsumexp(exponent))


def gibbs_probabilities(p: IsingProblem, beta: float) -> np.ndarray:
    """Per-configuration Gibbs probabilities by exhaustive enumeration."""
    if p.n > MAX_ENUMERATION_QUBITS:
        raise ProblemValidationError(f"Exhaustive enumeration limited to {MAX_ENUMERATION_QUBITS} qubits")
    return boltzmann_weights(p.energies(), beta)


def mean_energy(p: IsingProblem, beta: float) -> float:
    return float(boltzmann_weights(p.energies(), beta) @ p.energies())


class GibbsSpec(BaseModel):
    """Degenerate energy levels of a spectrum with an inverse temperature."""

    model_config = ConfigDict(frozen=True)

    beta: float = Field(ge=0.0)
    levels: Tuple[Tuple[float, int], ...]

    @model_validator(mode="after")
    def _check_levels(self) -> "GibbsSpec":
        energies = [e for e, _ in self.levels]
        if any(b <= a for a, b in zip(energies, energies[1:])):
            raise ValueError("Level energies must be strictly increasing")
        if any(g < 1 for _, g in self.levels):
            raise ValueError("Degeneracies must be at least 1")
        return self

    def probabilities(self) -> np.ndarray:
        """Level probabilities g_i exp(-beta E_i) / Z."""
        energies = np.array([e for e, _ in self.levels])
        log_g = np.log([g for _, g in self.levels])
        exponent = log_g - self.beta * energies
        return np.exp(exponent - logsumexp(exponent))


def energy_levels(p: IsingProblem, decimals: int = 12) -> Tuple[Tuple[float, int], ...]:
    """Group the exhaustive spectrum into (E_i, g_i) levels."""
    energies = np.round(p.energies(), decimals)
    values, counts = np.unique(energies, return_counts=True)
    return tuple((float(e), int(g)) for e, g in zip(values, counts))


def gibbs_from_levels(p: IsingProblem, beta: float) -> GibbsSpec:
    return GibbsSpec(beta=beta, levels=energy_levels(p))


def chain_mean_energy(N: int, J: float, beta: float) -> float:
    """Closed-form <E> = -J (N - 1) tanh(beta J) for the open chain."""
    if N < 2:
        raise ValueError(f"Chain length must be at least 2, got {N}")
    return float(-J * (N - 1) * np.tanh(beta * J))


class ProbabilityObservation(BaseModel):
    problem: IsingProblem
    probabilities: Tuple[float, ...]


class ChainObservation(BaseModel):
    N: int = Field(ge=2)
    J: float
    mean_energy: float


Observation = Union[ProbabilityObservation, ChainObservation]


def _model_values(obs: Observation, beta: float) -> np.ndarray:
    if isinstance(obs, ChainObservation):
        return np.array([chain_mean_energy(obs.N, obs.J, beta)])
    return gibbs_probabilities(obs.problem, beta)


def _observed_values(obs: Observation) -> np.ndarray:
    if isinstance(obs, ChainObservation):
        return np.array([obs.mean_energy])
    return np.asarray(obs.probabilities, dtype=float)


def _is_beta_dependent(obs: Observation) -> bool:
    if isinstance(obs, ChainObservation):
        return obs.J != 0.0
    energies = obs.problem.energies()
    return float(np.ptp(energies)) > 0.0


def fit_beta(observations: Sequence[Observation], beta_max: float = 100.0, xatol: float = 1e-10) -> float:
    """Least-squares inverse temperature over probability and chain-energy observations."""
    observations: List[Observation] = list(observations)
    if not observations:
        raise ValueError("fit_beta needs at least one observation")
    if not any(_is_beta_dependent(obs) for obs in observations):
        raise NonIdentifiableError("No observation depends on beta")

    for obs in observations:
        if isinstance(obs, ProbabilityObservation) and len(obs.probabilities) != 2**obs.problem.n:
            raise ProblemValidationError(
                f"Observation has {len(obs.probabilities)} probabilities for a {obs.problem.n}-qubit problem"
            )

    def residual(beta: float) -> float:
        return float(sum(np.sum((_model_values(o, beta) - _observed_values(o)) ** 2) for o in observations))

    # coarse scan brackets the global minimum before the bounded Brent refinement
    grid = np.linspace(0.0, beta_max, 2001)
    values = np.array([residual(b) for b in grid])
    k = int(np.argmin(values))
    lo, hi = grid[max(k - 1, 0)], grid[min(k + 1, grid.size - 1)]
    result = minimize_scalar(residual, bounds=(lo, hi), method="bounded", options={"xatol": xatol})
    beta = float(result.x)
    logger.debug(f"fit_beta: beta={beta:.8f}, residual={result.fun:.3e} over {len(observations)} observations")
    return beta
