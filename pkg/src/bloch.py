"""Bloch equations for one spin under the annealing field.

H = -(1/2) B . sigma with B = (2 pi A(s), 0, -2 pi B'(s) h_1) rad/ns reproduces
the one-spin annealing Hamiltonian; relaxation follows T1, T2 and M0.
"""

import math
from typing import Callable, List, Literal, Optional, Sequence, Tuple

import numpy as np
from loguru import logger
from pydantic import BaseModel, ConfigDict, Field, model_validator

from .exceptions import ProblemValidationError
from .integrators import ExponentialIntegrator, fixed_step_count, rk4_step
from .problems import IsingProblem
from .schedules import AnySchedule, OnsetWindow

FieldFunction = Callable[[float], np.ndarray]

RK4_STEP_LIMIT = 200_000


class BlochState(BaseModel):
    """Magnetization (S^x, S^y, S^z)."""

    model_config = ConfigDict(frozen=True)

    S: Tuple[float, float, float] = (1.0, 0.0, 0.0)

    @property
    def p_up(self) -> float:
        return 0.5 * (1.0 + self.S[2])

    @property
    def p_down(self) -> float:
        return 0.5 * (1.0 - self.S[2])

    def populations(self) -> np.ndarray:
        return np.array([self.p_up, self.p_down])

    def length(self) -> float:
        return float(np.linalg.norm(self.S))


class BlochParams(BaseModel):
    """Relaxation times (ns) and equilibrium magnetization; T2 <= 2 T1."""

    model_config = ConfigDict(frozen=True)

    T1: float = Field(default=500.0, gt=0.0, description="Longitudinal relaxation time (ns)")
    T2: float = Field(default=125.0, gt=0.0, description="Transverse relaxation time (ns)")
    M0: float = Field(default=-0.58, ge=-1.0, le=1.0, description="Equilibrium magnetization")

    @model_validator(mode="after")
    def _check_times(self) -> "BlochParams":
        if self.T2 > 2.0 * self.T1 * (1.0 + 1e-12):
            raise ValueError(f"T2={self.T2} exceeds 2*T1={2.0 * self.T1}; not reachable with these dissipators")
        return self

    @classmethod
    def from_rates(cls, gamma1: float, gamma2: float, gamma3: float) -> "BlochParams":
        """Map sigma+/sigma-/sigma_z rates (1/ns) to (T1, T2, M0)."""
        if min(gamma1, gamma2, gamma3) < 0:
            raise ValueError("Rates must be nonnegative")
        total = gamma1 + gamma2
        T1 = math.inf if total == 0 else 1.0 / total
        dephasing = total + 4.0 * gamma3
        T2 = math.inf if dephasing == 0 else 2.0 / dephasing
        M0 = 0.0 if total == 0 else (gamma1 - gamma2) / total
        return cls(T1=T1, T2=T2, M0=M0)

    def to_rates(self) -> Tuple[float, float, float]:
        inverse_T1 = 1.0 / self.T1
        gamma1 = 0.5 * (1.0 + self.M0) * inverse_T1
        gamma2 = 0.5 * (1.0 - self.M0) * inverse_T1
        gamma3 = max(0.0, 0.25 * (2.0 / self.T2 - inverse_T1))
        return gamma1, gamma2, gamma3


def equilibrium_M0(h1: float, beta: float) -> float:
    """Gibbs S^z of the final one-spin Hamiltonian."""
    return float(-np.tanh(beta * h1))


def annealing_field(p: IsingProblem, sch: AnySchedule, t_a: float, onset: Optional[OnsetWindow] = None) -> FieldFunction:
    if p.n != 1:
        raise ProblemValidationError(f"Bloch equations need a 1-spin problem, got n={p.n}")
    onset = onset or OnsetWindow.none()
    h1 = p.h[0]

    def field(t: float) -> np.ndarray:
        s = min(max(t / t_a, 0.0), 1.0)
        b_prime = float(onset.factor(t)) * sch.B(s)
        return np.array([2.0 * math.pi * sch.A(s), 0.0, -2.0 * math.pi * b_prime * h1])

    return field


class BlochSolver:
    """Integrates dS/dt = S x B - relaxation for a given field."""

    def __init__(self, field: FieldFunction, params: BlochParams):
        self.field = field
        self.params = params
        self._relax = np.array([1.0 / params.T2, 1.0 / params.T2, 1.0 / params.T1])
        self._drive = np.array([0.0, 0.0, params.M0 / params.T1])

    def rhs(self, t: float, S: np.ndarray) -> np.ndarray:
        return np.cross(S, self.field(t)) - self._relax * S + self._drive

    def generator(self, t: float) -> np.ndarray:
        """Augmented 4x4 generator of the affine system acting on (S, 1)."""
        bx, by, bz = self.field(t)
        G = np.zeros((4, 4))
        G[:3, :3] = -np.array([[0.0, -bz, by], [bz, 0.0, -bx], [-by, bx, 0.0]]) - np.diag(self._relax)
        G[:3, 3] = self._drive
        return G

    def evolve(
        self,
        S0: Sequence[float],
        t0: float,
        t1: float,
        dt: float,
        method: Literal["rk4", "exponential"] = "rk4",
        sample_times: Optional[Sequence[float]] = None,
        tol: float = 1e-10,
    ) -> Tuple[np.ndarray, List[np.ndarray]]:
        S = np.asarray(S0, dtype=float)
        if method == "exponential":
            integrator = ExponentialIntegrator(self.generator, scheme="magnus4", tol=tol)
            y, samples = integrator.integrate(np.append(S, 1.0), t0, t1, dt, sample_times)
            logger.debug(f"Bloch exponential stepping: {integrator.accepted} steps, {integrator.rejected} rejected")
            return np.real(y[:3]), [np.real(x[:3]) for x in samples]

        checkpoints = sorted({float(t) for t in (sample_times or []) if t0 <= t <= t1} | {t1})
        samples: List[np.ndarray] = []
        t = t0
        for stop in checkpoints:
            if stop > t:
                steps, h = fixed_step_count(stop - t, dt)
                for k in range(steps):
                    S = rk4_step(self.rhs, t + k * h, S, h)
                t = stop
            if sample_times is not None and stop in sample_times:
                samples.append(S.copy())
        return S, samples


def evolve_bloch(
    p: IsingProblem,
    sch: AnySchedule,
    params: BlochParams,
    t_a: float,
    dt: float = 0.01,
    onset: Optional[OnsetWindow] = None,
    method: Literal["auto", "rk4", "exponential"] = "auto",
) -> BlochState:
    """Anneal from S = (1, 0, 0) and return S(t_a)."""
    if method == "auto":
        method = "rk4" if t_a / dt <= RK4_STEP_LIMIT else "exponential"
    logger.debug(f"Bloch run: h1={p.h[0] if p.n == 1 else None}, t_a={t_a} ns, method={method}")
    solver = BlochSolver(annealing_field(p, sch, t_a, onset), params)
    S, _ = solver.evolve((1.0, 0.0, 0.0), 0.0, t_a, dt, method=method)
    return BlochState(S=tuple(float(x) for x in S))
