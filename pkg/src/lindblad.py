"""GKSL master equation with time-dependent, Gibbs-tied dissipation rates.

The seven two-spin channels route every population flow through basis state
0 (up-up). Rates gamma_1 = gamma_3 = gamma_4 = gamma_6 = c; the partner rates
follow detailed balance with respect to the instantaneous Gibbs state of the
diagonal Hamiltonian, whose energies at time t are

    E_t(i) = (B'(t) / B(1)) sum_k h_k S_k + (B(s) / B(1)) sum J S S,

so that at s = 1 they coincide with the problem energies used with beta.
"""

import math
from typing import Callable, List, Literal, Optional, Sequence, Tuple

import numpy as np
from loguru import logger
from pydantic import BaseModel, ConfigDict, Field, model_validator

from .exceptions import IntegrationError, ProblemValidationError
from .integrators import ExponentialIntegrator, fixed_step_count, rk4_step
from .operators import SIGMA_MINUS, SIGMA_PLUS, SIGMA_Z, driver_matrix, lindblad_rhs, liouvillian
from .problems import DomainModel, IsingProblem
from .schedules import AnySchedule, OnsetWindow
from .schrodinger import DiagonalTerms

TRACE_TOLERANCE = 1e-6
HALVING_THRESHOLD = 0.1

Channels = List[Tuple[float, np.ndarray]]


def _ket_bra(i: int, j: int, d: int = 4) -> np.ndarray:
    op = np.zeros((d, d), dtype=complex)
    op[i, j] = 1.0
    return op


# L1..L7; L1/L2 connect states 0 and 3, L4/L5 states 0 and 1, L6/L7 states 0 and 2.
JUMP_OPERATORS: Tuple[np.ndarray, ...] = (
    _ket_bra(0, 3),
    _ket_bra(3, 0),
    np.diag([1.0, -1.0, -1.0, 1.0]).astype(complex),
    _ket_bra(0, 1),
    _ket_bra(1, 0),
    _ket_bra(0, 2),
    _ket_bra(2, 0),
)


class DensityMatrix(DomainModel):
    model_config = ConfigDict(arbitrary_types_allowed=True)

    rho: np.ndarray

    @model_validator(mode="after")
    def _check_square(self) -> "DensityMatrix":
        if self.rho.ndim != 2 or self.rho.shape[0] != self.rho.shape[1]:
            raise ProblemValidationError(f"Density matrix must be square, got shape {self.rho.shape}")
        return self

    @classmethod
    def pure(cls, amplitudes: np.ndarray) -> "DensityMatrix":
        amplitudes = np.asarray(amplitudes, dtype=complex)
        return cls(rho=np.outer(amplitudes, amplitudes.conj()))

    @classmethod
    def plus_state(cls, n: int) -> "DensityMatrix":
        return cls(rho=np.full((2**n, 2**n), 2.0**-n, dtype=complex))

    def trace(self) -> float:
        return float(np.real(np.trace(self.rho)))

    def hermiticity_error(self) -> float:
        return float(np.max(np.abs(self.rho - self.rho.conj().T)))

    def min_eigenvalue(self) -> float:
        return float(np.min(np.linalg.eigvalsh(0.5 * (self.rho + self.rho.conj().T))))

    def populations(self) -> np.ndarray:
        return np.real(np.diag(self.rho)).copy()

    def max_coherence(self) -> float:
        return float(np.max(np.abs(self.rho - np.diag(np.diag(self.rho)))))


class DissipationSpec(BaseModel):
    """Base rate c (1/ns) and the inverse temperature that fixes the partner rates."""

    model_config = ConfigDict(frozen=True)

    c: float = Field(default=0.01, ge=0.0, description="Base dissipation rate (1/ns)")
    beta: float = Field(ge=0.0, description="Inverse temperature (dimensionless)")

    @property
    def operators(self) -> Tuple[np.ndarray, ...]:
        return JUMP_OPERATORS


def instantaneous_energies(
    p: IsingProblem, sch: AnySchedule, w: OnsetWindow, times: np.ndarray, t_a: float
) -> np.ndarray:
    """Energies E_t(i) of the diagonal Hamiltonian, shape (len(times), 2**n)."""
    times = np.atleast_1d(np.asarray(times, dtype=float))
    s = np.clip(times / t_a, 0.0, 1.0)
    b_final = sch.B(1.0)
    b = np.asarray(sch.B(s)) / b_final
    b_prime = np.asarray(w.factor(times)) * b
    return np.outer(b_prime, p.field_energies()) + np.outer(b, p.coupling_energies())


def rates_on_grid(
    spec: DissipationSpec, p: IsingProblem, sch: AnySchedule, w: OnsetWindow, times: np.ndarray, t_a: float
) -> np.ndarray:
    """gamma_1..gamma_7 at every time, shape (len(times), 7)."""
    if p.n != 2:
        raise ProblemValidationError(f"Seven-channel dissipation needs a 2-spin problem, got n={p.n}")
    if math.isinf(spec.beta):
        raise ProblemValidationError("Hub population vanishes at infinite beta; rates undefined")
    energies = instantaneous_energies(p, sch, w, times, t_a)
    # gamma_partner = c * p_k / p_0 = c * exp(-beta (E_k - E_0))
    ratios = np.exp(-spec.beta * (energies - energies[:, :1]))
    if not np.all(np.isfinite(ratios)):
        raise ProblemValidationError("Hub population underflows at this beta; rates undefined")
    c = spec.c
    rates = np.empty((energies.shape[0], 7))
    rates[:, [0, 2, 3, 5]] = c
    rates[:, 1] = c * ratios[:, 3]
    rates[:, 4] = c * ratios[:, 1]
    rates[:, 6] = c * ratios[:, 2]
    return rates


def rates_at(
    spec: DissipationSpec, p: IsingProblem, sch: AnySchedule, w: OnsetWindow, t: float, t_a: float
) -> np.ndarray:
    """gamma_1..gamma_7 at time t (1/ns)."""
    if not 0.0 <= t <= t_a * (1.0 + 1e-12):
        raise ProblemValidationError(f"Time {t} outside [0, {t_a}] ns")
    return rates_on_grid(spec, p, sch, w, np.array([t]), t_a)[0]


def instantaneous_gibbs(
    spec: DissipationSpec, p: IsingProblem, sch: AnySchedule, w: OnsetWindow, t: float, t_a: float
) -> np.ndarray:
    energies = instantaneous_energies(p, sch, w, np.array([t]), t_a)[0]
    weights = np.exp(-spec.beta * (energies - energies.min()))
    return weights / weights.sum()


def single_spin_channels(gamma1: float, gamma2: float, gamma3: float) -> Channels:
    """sigma+, sigma-, sigma_z channels; equivalent to the Bloch equations."""
    return [(gamma1, SIGMA_PLUS), (gamma2, SIGMA_MINUS), (gamma3, SIGMA_Z)]


class LindbladSolver:
    """d rho/dt = -i[H, rho] + sum_j gamma_j D[L_j] rho for time-dependent H and rates."""

    def __init__(self, hamiltonian: Callable[[float], np.ndarray], channels: Callable[[float], Channels]):
        self.hamiltonian = hamiltonian
        self.channels = channels

    def generator(self, t: float) -> np.ndarray:
        return liouvillian(self.hamiltonian(t), self.channels(t))

    def rhs(self, t: float, rho: np.ndarray) -> np.ndarray:
        return lindblad_rhs(rho, self.hamiltonian(t), self.channels(t))

    def _rk4_segment(self, rho: np.ndarray, t: float, stop: float, dt: float) -> np.ndarray:
        steps, h = fixed_step_count(stop - t, dt)
        for k in range(steps):
            start = t + k * h
            size = h
            # halve while the step would move rho by more than the threshold
            while np.max(np.abs(self.rhs(start, rho))) * size > HALVING_THRESHOLD and size > 1e-6:
                size *= 0.5
            substeps = int(round(h / size))
            for j in range(substeps):
                rho = rk4_step(self.rhs, start + j * size, rho, size)
        return rho

    def evolve(
        self,
        rho0: np.ndarray,
        t0: float,
        t1: float,
        dt: float,
        method: Literal["rk4", "magnus"] = "magnus",
        sample_times: Optional[Sequence[float]] = None,
        tol: float = 1e-9,
    ) -> Tuple[np.ndarray, List[np.ndarray]]:
        d = rho0.shape[0]
        if method == "magnus":
            integrator = ExponentialIntegrator(self.generator, scheme="magnus4", tol=tol)
            y, samples = integrator.integrate(rho0.reshape(-1), t0, t1, dt, sample_times)
            logger.debug(f"Lindblad Magnus stepping: {integrator.accepted} steps, {integrator.rejected} rejected")
            return y.reshape(d, d), [x.reshape(d, d) for x in samples]
        if method != "rk4":
            raise ValueError(f"Unknown Lindblad method: {method}")

        rho = np.array(rho0, dtype=complex)
        checkpoints = sorted({float(t) for t in (sample_times or []) if t0 <= t <= t1} | {t1})
        samples: List[np.ndarray] = []
        t = t0
        for stop in checkpoints:
            if stop > t:
                rho = self._rk4_segment(rho, t, stop, dt)
                t = stop
            if sample_times is not None and stop in sample_times:
                samples.append(rho.copy())
        return rho, samples


def annealing_solver(
    p: IsingProblem, sch: AnySchedule, w: OnsetWindow, spec: DissipationSpec, t_a: float
) -> LindbladSolver:
    """Two-spin solver for H(t) = -pi A sum sx + pi (B' sum h sz + B sum J sz sz)."""
    if p.n != 2:
        raise ProblemValidationError(f"Lindblad annealing needs a 2-spin problem, got n={p.n}")
    driver = driver_matrix(2)
    terms = DiagonalTerms(p)

    def hamiltonian(t: float) -> np.ndarray:
        t = min(max(t, 0.0), t_a)
        s = t / t_a
        b = sch.B(s)
        return -math.pi * sch.A(s) * driver + np.diag(terms.at(float(w.factor(t)) * b, b))

    def channels(t: float) -> Channels:
        rates = rates_on_grid(spec, p, sch, w, np.array([min(max(t, 0.0), t_a)]), t_a)[0]
        return list(zip(rates, JUMP_OPERATORS))

    return LindbladSolver(hamiltonian, channels)


def lindblad_trajectory(
    p: IsingProblem,
    sch: AnySchedule,
    w: OnsetWindow,
    spec: DissipationSpec,
    t_a: float,
    dt: float = 0.1,
    sample_times: Optional[Sequence[float]] = None,
    method: Literal["rk4", "magnus"] = "magnus",
    tol: float = 1e-9,
) -> Tuple[DensityMatrix, List[DensityMatrix]]:
    solver = annealing_solver(p, sch, w, spec, t_a)
    rho0 = DensityMatrix.plus_state(2).rho
    rho, samples = solver.evolve(rho0, 0.0, t_a, dt, method=method, sample_times=sample_times, tol=tol)

    drift = abs(np.real(np.trace(rho)) - 1.0)
    if drift > TRACE_TOLERANCE:
        logger.error(f"Trace drift {drift:.3e} after Lindblad run")
        raise IntegrationError(f"Trace drift {drift:.3e} exceeds {TRACE_TOLERANCE}")
    return DensityMatrix(rho=rho), [DensityMatrix(rho=x) for x in samples]


def evolve_lindblad(
    p: IsingProblem,
    sch: AnySchedule,
    w: OnsetWindow,
    spec: DissipationSpec,
    t_a: float,
    dt: float = 0.1,
    method: Literal["rk4", "magnus"] = "magnus",
    tol: float = 1e-9,
) -> DensityMatrix:
    """Anneal |++><++| to t_a and return rho(t_a)."""
    logger.debug(f"Lindblad run: {p.name}, t_a={t_a} ns, c={spec.c}, beta={spec.beta:.4f}, method={method}")
    rho, _ = lindblad_trajectory(p, sch, w, spec, t_a, dt=dt, method=method, tol=tol)
    return rho
