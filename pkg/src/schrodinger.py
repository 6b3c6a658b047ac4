"""Closed-system annealing: TDSE for H(t)/hbar = -pi A sum sx + pi B' sum h sz + pi B sum J sz sz.

The default stepper is the second-order symmetric product formula
exp(-i dt D/2) exp(-i dt X) exp(-i dt D/2), with D the diagonal part applied
as phases and X the transverse driver applied as exact per-qubit rotations.
A dense fourth-order Magnus stepper is available for small systems and stiff
embeddings.
"""

import math
from typing import Literal, Optional, Union

import numpy as np
from loguru import logger
from pydantic import BaseModel, ConfigDict, Field, model_validator
from scipy.linalg import expm

from .exceptions import IntegrationError, ProblemValidationError
from .integrators import fixed_step_count, magnus4_exponent
from .operators import apply_driver, driver_matrix, z_spins
from .problems import MAX_QUBITS, DomainModel, EmbeddedProblem, IsingProblem
from .schedules import AnySchedule, OnsetWindow, Schedule

NORM_TOLERANCE = 1e-6
MAX_DENSE_QUBITS = 12


class QuantumState(DomainModel):
    """Normalized state vector in the computational basis."""

    model_config = ConfigDict(arbitrary_types_allowed=True)

    amplitudes: np.ndarray
    n: int = Field(ge=1, le=MAX_QUBITS)

    @model_validator(mode="after")
    def _check_shape(self) -> "QuantumState":
        if self.amplitudes.shape != (2**self.n,):
            raise ProblemValidationError(f"Expected {2**self.n} amplitudes, got shape {self.amplitudes.shape}")
        return self

    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def fidelity(self, other: "QuantumState") -> float:
        return float(abs(np.vdot(self.amplitudes, other.amplitudes)) ** 2)


class AnnealRun(BaseModel):
    """One anneal of a problem under a schedule; times in ns."""

    model_config = ConfigDict(frozen=True)

    problem: Union[IsingProblem, EmbeddedProblem]
    schedule: AnySchedule = Field(default_factory=Schedule.standard)
    onset: OnsetWindow = Field(default_factory=OnsetWindow.none)
    t_a: float = Field(gt=0.0, description="Annealing time (ns)")
    dt: float = Field(default=0.01, gt=0.0, description="Time step (ns)")

    @model_validator(mode="after")
    def _check_step(self) -> "AnnealRun":
        if self.dt > self.t_a:
            raise ValueError(f"Time step {self.dt} ns exceeds the annealing time {self.t_a} ns")
        return self

    @property
    def n(self) -> int:
        return self.problem.n


def uniform_superposition(n: int) -> QuantumState:
    """|++...+>, the ground state of the transverse driver."""
    if not 1 <= n <= MAX_QUBITS:
        raise ProblemValidationError(f"Qubit count must be in [1, {MAX_QUBITS}], got {n}")
    return QuantumState(amplitudes=np.full(2**n, 2.0 ** (-n / 2), dtype=complex), n=n)


def initial_state(problem: Union[IsingProblem, EmbeddedProblem]) -> QuantumState:
    """|+...+> on the problem qubits; auxiliary qubits of an embedding start pinned up."""
    if not isinstance(problem, EmbeddedProblem):
        return uniform_superposition(problem.n)
    pinned = np.zeros(2 ** len(problem.auxiliary_map), dtype=complex)
    pinned[0] = 1.0
    amplitudes = np.kron(uniform_superposition(problem.base.n).amplitudes, pinned)
    return QuantumState(amplitudes=amplitudes, n=problem.n)


def populations(state: QuantumState) -> np.ndarray:
    """Basis-state probabilities |c_i|^2 in index order."""
    return np.abs(state.amplitudes) ** 2


class DiagonalTerms:
    """Field, coupling and flux-bias energies of a (possibly embedded) problem."""

    def __init__(self, problem: Union[IsingProblem, EmbeddedProblem]):
        if isinstance(problem, EmbeddedProblem):
            target = problem.problem
            self.bias = -(problem.flux_bias() @ z_spins(problem.n))
        else:
            target = problem
            self.bias = np.zeros(2**problem.n)
        self.fields = target.field_energies()
        self.couplings = target.coupling_energies()

    def at(self, b_prime: float, b: float) -> np.ndarray:
        """Diagonal of H/hbar in rad/ns for given B'(s) and B(s) in GHz."""
        return math.pi * (b_prime * self.fields + b * self.couplings) + self.bias


def schedule_grid(run: AnnealRun, times: np.ndarray):
    """A(s), B(s), B'(s) at the given times (GHz)."""
    s = np.clip(times / run.t_a, 0.0, 1.0)
    a = np.asarray(run.schedule.A(s))
    b = np.asarray(run.schedule.B(s))
    b_prime = np.asarray(run.onset.factor(times)) * b
    return a, b, b_prime


def _evolve_product(run: AnnealRun, psi: np.ndarray, backward: bool) -> np.ndarray:
    steps, dt = fixed_step_count(run.t_a, run.dt)
    midpoints = (np.arange(steps) + 0.5) * dt
    a, b, b_prime = schedule_grid(run, midpoints)
    terms = DiagonalTerms(run.problem)
    order = range(steps - 1, -1, -1) if backward else range(steps)
    sign = -1.0 if backward else 1.0
    tensor = psi.reshape((2,) * run.n)
    axes = range(run.n)

    previous = None
    for k in order:
        diag = terms.at(b_prime[k], b[k])
        half = diag if previous is None else diag + previous
        tensor *= np.exp(-0.5j * sign * dt * half).reshape(tensor.shape)
        apply_driver(tensor, sign * math.pi * a[k] * dt, axes)
        previous = diag
    tensor *= np.exp(-0.5j * sign * dt * previous).reshape(tensor.shape)
    return tensor.reshape(-1)


def dense_hamiltonian(run: AnnealRun, t: float) -> np.ndarray:
    """H(t)/hbar in rad/ns as a dense matrix."""
    a, b, b_prime = schedule_grid(run, np.array([t]))
    terms = DiagonalTerms(run.problem)
    return -math.pi * a[0] * driver_matrix(run.n) + np.diag(terms.at(b_prime[0], b[0]))


def _evolve_magnus(run: AnnealRun, psi: np.ndarray, backward: bool) -> np.ndarray:
    if run.n > MAX_DENSE_QUBITS:
        raise ProblemValidationError(f"Dense stepping limited to {MAX_DENSE_QUBITS} qubits")
    steps, dt = fixed_step_count(run.t_a, run.dt)
    driver = driver_matrix(run.n)
    terms = DiagonalTerms(run.problem)

    def generator(t: float) -> np.ndarray:
        t = min(max(t, 0.0), run.t_a)
        a, b, b_prime = schedule_grid(run, np.array([t]))
        return -1j * (-math.pi * a[0] * driver + np.diag(terms.at(b_prime[0], b[0])))

    for k in range(steps):
        if backward:
            t = run.t_a - (k + 1) * dt
            psi = expm(magnus4_exponent(generator, t, dt)).conj().T @ psi
        else:
            psi = expm(magnus4_exponent(generator, k * dt, dt)) @ psi
    return psi


def evolve_tdse(
    run: AnnealRun,
    state: Optional[QuantumState] = None,
    method: Literal["product", "magnus"] = "product",
    backward: bool = False,
) -> QuantumState:
    """Evolve from t = 0 to t_a (or undo that evolution when ``backward``)."""
    state = state or initial_state(run.problem)
    if state.n != run.n:
        raise ProblemValidationError(f"State has {state.n} qubits, run has {run.n}")
    logger.debug(f"TDSE {method}: n={run.n}, t_a={run.t_a} ns, dt={run.dt} ns, backward={backward}")

    psi = state.amplitudes.astype(complex, copy=True)
    if method == "product":
        psi = _evolve_product(run, psi, backward)
    elif method == "magnus":
        psi = _evolve_magnus(run, psi, backward)
    else:
        raise ValueError(f"Unknown TDSE method: {method}")

    drift = abs(np.linalg.norm(psi) - state.norm())
    if drift > NORM_TOLERANCE:
        logger.error(f"Norm drift {drift:.3e} exceeds {NORM_TOLERANCE}")
        raise IntegrationError(f"Norm drift {drift:.3e} exceeds {NORM_TOLERANCE}; reduce dt")
    return QuantumState(amplitudes=psi, n=run.n)


def ground_state_probability(problem: IsingProblem, probabilities: np.ndarray) -> float:
    """Total population of the (possibly degenerate) ground level."""
    energies = problem.energies()
    ground = np.isclose(energies, energies.min(), atol=1e-12)
    return float(np.asarray(probabilities)[ground].sum())
