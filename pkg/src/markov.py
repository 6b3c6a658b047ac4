"""Classical master equation dP/dt = W(t) P(t) on the two-spin populations.

W routes every flow through state 0 (up-up) and uses the same rates as the
Lindblad model with the transverse field switched off.
"""

from typing import List, Optional, Sequence, Tuple

import numpy as np
from loguru import logger
from pydantic import BaseModel, ConfigDict, field_validator
from scipy.linalg import expm, null_space

from .exceptions import IntegrationError, ProblemValidationError
from .integrators import fixed_step_count
from .lindblad import DissipationSpec, rates_on_grid
from .problems import IsingProblem
from .schedules import AnySchedule, OnsetWindow

NORMALIZATION_TOLERANCE = 1e-8
EXPM_CHUNK = 4096


class ProbabilityVector(BaseModel):
    """Nonnegative populations in index order, summing to one."""

    model_config = ConfigDict(frozen=True)

    p: Tuple[float, ...]

    @field_validator("p")
    @classmethod
    def _check_distribution(cls, value: Tuple[float, ...]) -> Tuple[float, ...]:
        arr = np.asarray(value, dtype=float)
        if arr.size == 0 or arr.size & (arr.size - 1):
            raise ValueError(f"Population count must be a power of two, got {arr.size}")
        if np.any(arr < -1e-12):
            raise ValueError(f"Negative population {arr.min():.3e}")
        if abs(arr.sum() - 1.0) > 1e-9:
            raise ValueError(f"Populations sum to {arr.sum():.12f}, expected 1")
        return value

    @classmethod
    def from_array(cls, values: np.ndarray) -> "ProbabilityVector":
        """Clamp round-off negatives to zero and wrap."""
        arr = np.clip(np.real(np.asarray(values, dtype=float)), 0.0, None)
        return cls(p=tuple(float(x) for x in arr / arr.sum()))

    def as_array(self) -> np.ndarray:
        return np.array(self.p)


class RateMatrix(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    W: np.ndarray

    @field_validator("W")
    @classmethod
    def _check_generator(cls, W: np.ndarray) -> np.ndarray:
        W = np.asarray(W, dtype=float)
        if W.ndim != 2 or W.shape[0] != W.shape[1]:
            raise ValueError(f"Rate matrix must be square, got shape {W.shape}")
        off_diagonal = W - np.diag(np.diag(W))
        if np.any(off_diagonal < 0):
            raise ValueError("Off-diagonal rates must be nonnegative")
        if np.any(np.abs(W.sum(axis=0)) > 1e-12 * max(1.0, np.abs(W).max())):
            raise ValueError("Columns of the rate matrix must sum to zero")
        return W


def _assemble(rates: np.ndarray) -> np.ndarray:
    """W for one or many rate rows (..., 7) -> (..., 4, 4)."""
    g = np.moveaxis(rates, -1, 0)
    W = np.zeros(rates.shape[:-1] + (4, 4))
    W[..., 0, 1], W[..., 0, 2], W[..., 0, 3] = g[3], g[5], g[0]
    W[..., 1, 0], W[..., 2, 0], W[..., 3, 0] = g[4], g[6], g[1]
    W[..., 1, 1], W[..., 2, 2], W[..., 3, 3] = -g[3], -g[5], -g[0]
    W[..., 0, 0] = -(g[1] + g[4] + g[6])
    return W


def build_W(rates: Sequence[float]) -> RateMatrix:
    """Hub-topology rate matrix from gamma_1..gamma_7 (gamma_3 does not enter)."""
    rates = np.asarray(rates, dtype=float)
    if rates.shape != (7,):
        raise ProblemValidationError(f"Expected 7 rates, got shape {rates.shape}")
    if np.any(rates < 0):
        raise ProblemValidationError(f"Rates must be nonnegative, got {rates.tolist()}")
    return RateMatrix(W=_assemble(rates))


def stationary_distribution(W: RateMatrix) -> np.ndarray:
    """Normalized null vector of W."""
    kernel = null_space(W.W)
    if kernel.shape[1] != 1:
        raise ProblemValidationError(f"Rate matrix has a {kernel.shape[1]}-dimensional kernel")
    v = np.abs(kernel[:, 0])
    return v / v.sum()


def evolve_markov(
    p: IsingProblem,
    sch: AnySchedule,
    w: OnsetWindow,
    spec: DissipationSpec,
    t_a: float,
    dt: float = 1.0,
    sample_times: Optional[Sequence[float]] = None,
) -> ProbabilityVector:
    """Evolve P = (1/4, 1/4, 1/4, 1/4) to t_a with one exact exponential per step.

    Rates are frozen at the step midpoint; each step multiplies by exp(dt W),
    which is column stochastic.
    """
    probabilities, _ = markov_trajectory(p, sch, w, spec, t_a, dt=dt, sample_times=sample_times)
    return probabilities


def markov_trajectory(
    p: IsingProblem,
    sch: AnySchedule,
    w: OnsetWindow,
    spec: DissipationSpec,
    t_a: float,
    dt: float = 1.0,
    sample_times: Optional[Sequence[float]] = None,
) -> Tuple[ProbabilityVector, List[np.ndarray]]:
    steps, h = fixed_step_count(t_a, dt)
    logger.debug(f"Markov run: {p.name}, t_a={t_a} ns, {steps} steps of {h:.4g} ns")
    sample_steps = {}
    for t in sample_times or []:
        sample_steps.setdefault(int(round(min(max(t, 0.0), t_a) / h)), []).append(t)

    P = np.full(4, 0.25)
    samples: List[Tuple[float, np.ndarray]] = [(t, P.copy()) for t in sample_steps.get(0, [])]
    for start in range(0, steps, EXPM_CHUNK):
        stop = min(start + EXPM_CHUNK, steps)
        midpoints = (np.arange(start, stop) + 0.5) * h
        propagators = expm(h * _assemble(rates_on_grid(spec, p, sch, w, midpoints, t_a)))
        for k, U in enumerate(propagators, start=start + 1):
            P = U @ P
            for t in sample_steps.get(k, []):
                samples.append((t, P.copy()))

    drift = abs(P.sum() - 1.0)
    if drift > NORMALIZATION_TOLERANCE:
        logger.error(f"Normalization drift {drift:.3e} after Markov run")
        raise IntegrationError(f"Normalization drift {drift:.3e} exceeds {NORMALIZATION_TOLERANCE}")
    ordered = [x for _, x in sorted(samples, key=lambda item: item[0])]
    return ProbabilityVector.from_array(P), ordered
