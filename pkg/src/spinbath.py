"""Two system spins coupled to a bath of N_B random spins, solved as one TDSE.

H_total(t) = H(t) + H_B + g H_SB with

    H_B  = sum_n sum_a Omega_n^a I_n^a
    H_SB = sum_m sum_n sum_a K_nm^a I_n^a sigma_m^a

Energies are in GHz like A(s) and B(s); every term enters H/hbar with the
same factor pi as the system Hamiltonian, so a field Omega contributes
pi Omega sigma. State tensors put the system spins on axes 0 and 1 and the
bath spins after them.
"""

import math
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
from loguru import logger
from pydantic import BaseModel, ConfigDict, Field

from . import __version__
from .exceptions import IntegrationError, ProblemValidationError
from .integrators import fixed_step_count
from .markov import ProbabilityVector
from .operators import (
    apply_driver,
    apply_pair_blocks,
    apply_single_qubit,
    expectation_x,
    field_rotation,
    xx_yy_blocks,
    z_spins,
)
from .problems import IsingProblem
from .schedules import AnySchedule, OnsetWindow
from .schrodinger import DiagonalTerms

MAX_BATH_SPINS = 20
NORM_TOLERANCE = 1e-6
SYSTEM_SPINS = 2


class BathSpec(BaseModel):
    """Bath size, coupling strengths (GHz) and the seed that fixes the couplings."""

    model_config = ConfigDict(frozen=True)

    N_B: int = Field(default=16, ge=0, le=MAX_BATH_SPINS, description="Number of bath spins")
    g: float = Field(default=0.001, ge=0.0, description="System-bath strength multiplier")
    K: float = Field(default=1.0, ge=0.0, description="Coupling scale (GHz)")
    Omega: float = Field(default=0.1, ge=0.0, description="Bath field scale (GHz)")
    seed: int = Field(default=0, ge=0, description="RNG seed")


class BathCouplings(BaseModel):
    """Random K_nm^a (shape N_B x 2 x 3) and Omega_n^a (shape N_B x 3)."""

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    K: np.ndarray
    Omega: np.ndarray


class CompositeState(BaseModel):
    """Amplitudes c(i, p) of system state i and bath state p."""

    model_config = ConfigDict(arbitrary_types_allowed=True)

    amplitudes: np.ndarray
    n_bath: int = Field(ge=0, le=MAX_BATH_SPINS)

    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def tensor(self) -> np.ndarray:
        return self.amplitudes.reshape((2,) * (SYSTEM_SPINS + self.n_bath))

    def reduced_populations(self) -> np.ndarray:
        """p_i = sum_p |c(i, p)|^2."""
        return (np.abs(self.amplitudes.reshape(4, -1)) ** 2).sum(axis=1)


def _streams(seed: int) -> Tuple[np.random.Generator, np.random.Generator]:
    """Independent Philox streams: first for couplings, second for the bath state."""
    couplings, state = np.random.SeedSequence(seed).spawn(2)
    return np.random.Generator(np.random.Philox(couplings)), np.random.Generator(np.random.Philox(state))


def draw_couplings(bath: BathSpec) -> BathCouplings:
    """Uniform K in [-K, K] (n outer, m middle, a inner), then Omega in [-Omega, Omega]."""
    rng, _ = _streams(bath.seed)
    K = rng.uniform(-bath.K, bath.K, size=(bath.N_B, SYSTEM_SPINS, 3))
    Omega = rng.uniform(-bath.Omega, bath.Omega, size=(bath.N_B, 3))
    return BathCouplings(K=K, Omega=Omega)


def init_state(N_B: int, seed: int = 0) -> CompositeState:
    """|++> times a random bath state of independent complex Gaussian amplitudes."""
    if not 0 <= N_B <= MAX_BATH_SPINS:
        raise ProblemValidationError(f"Bath size must be in [0, {MAX_BATH_SPINS}], got {N_B}")
    system = np.full(4, 0.5, dtype=complex)
    if N_B == 0:
        return CompositeState(amplitudes=system, n_bath=0)
    _, rng = _streams(seed)
    phi = rng.standard_normal(2**N_B) + 1j * rng.standard_normal(2**N_B)
    phi /= np.linalg.norm(phi)
    return CompositeState(amplitudes=np.kron(system, phi), n_bath=N_B)


class BathSimulator:
    """Symmetric product-formula stepper for the system-plus-bath Hamiltonian.

    One step is exp(-i dt D/2) O(dt) exp(-i dt D/2), where D holds every
    sigma_z-only term and O(dt) is the symmetric composition of the system
    driver rotations, the bath x/y field rotations and the XX+YY pair blocks.
    Each factor is an exact unitary.
    """

    def __init__(
        self,
        problem: IsingProblem,
        schedule: AnySchedule,
        onset: OnsetWindow,
        bath: BathSpec,
        t_a: float,
        couplings: Optional[BathCouplings] = None,
    ):
        if problem.n != SYSTEM_SPINS:
            raise ProblemValidationError(f"Spin-bath model needs a 2-spin problem, got n={problem.n}")
        self.problem = problem
        self.schedule = schedule
        self.onset = onset
        self.bath = bath
        self.t_a = t_a
        self.couplings = couplings or draw_couplings(bath)
        self.terms = DiagonalTerms(problem)
        self.shape = (2,) * (SYSTEM_SPINS + bath.N_B)
        self._static = self._static_diagonal().reshape(4, -1)

    def _static_diagonal(self) -> np.ndarray:
        n_total = SYSTEM_SPINS + self.bath.N_B
        if self.bath.N_B == 0:
            return np.zeros(4)
        z = z_spins(n_total)
        bath_z = z[SYSTEM_SPINS:]
        diagonal = math.pi * (self.couplings.Omega[:, 2] @ bath_z)
        for m in range(SYSTEM_SPINS):
            diagonal += self.bath.g * math.pi * (self.couplings.K[:, m, 2] @ bath_z) * z[m]
        return diagonal

    def _bath_factors(self, tau: float) -> List[Callable[[np.ndarray], None]]:
        """Time-independent bath field rotations and pair blocks for a sweep of length tau."""
        g = self.bath.g
        ndim = len(self.shape)
        factors: List[Callable[[np.ndarray], None]] = []
        for n, omega in enumerate(self.couplings.Omega):
            axis = SYSTEM_SPINS + n
            U = field_rotation(math.pi * omega[0], math.pi * omega[1], 0.0, tau)
            factors.append(lambda psi, axis=axis, U=U: apply_single_qubit(psi, axis, U))
            if g == 0.0:
                continue
            for m in range(SYSTEM_SPINS):
                kx, ky = self.couplings.K[n, m, 0], self.couplings.K[n, m, 1]
                blocks = xx_yy_blocks(ndim, m, axis, g * math.pi * kx, g * math.pi * ky, tau)
                factors.append(lambda psi, blocks=blocks: apply_pair_blocks(psi, blocks))
        return factors

    def _transverse(
        self, psi: np.ndarray, a: float, tau: float, bath_factors: List[Callable[[np.ndarray], None]], reverse: bool
    ) -> None:
        if reverse:
            for factor in reversed(bath_factors):
                factor(psi)
            apply_driver(psi, math.pi * a * tau, range(SYSTEM_SPINS))
        else:
            apply_driver(psi, math.pi * a * tau, range(SYSTEM_SPINS))
            for factor in bath_factors:
                factor(psi)

    def _diagonal(self, t: float) -> np.ndarray:
        s = min(max(t / self.t_a, 0.0), 1.0)
        b = self.schedule.B(s)
        system = self.terms.at(float(self.onset.factor(t)) * b, b)
        return system[:, None] + self._static

    def system_energy(self, psi: np.ndarray, t: float) -> float:
        """<H(t)>/hbar of the two system spins (rad/ns)."""
        s = min(max(t / self.t_a, 0.0), 1.0)
        b = self.schedule.B(s)
        probs = (np.abs(psi.reshape(4, -1)) ** 2).sum(axis=1)
        diagonal = float(probs @ self.terms.at(float(self.onset.factor(t)) * b, b))
        transverse = sum(expectation_x(psi, m) for m in range(SYSTEM_SPINS))
        return diagonal - math.pi * self.schedule.A(s) * transverse

    def run(
        self,
        state: CompositeState,
        dt: float,
        record_every: int = 0,
    ) -> Tuple[CompositeState, List[Tuple[float, np.ndarray, float]]]:
        """Evolve to t_a; optionally record (t, populations, system energy) every few steps."""
        if state.n_bath != self.bath.N_B:
            raise ProblemValidationError(f"State has {state.n_bath} bath spins, bath has {self.bath.N_B}")
        steps, h = fixed_step_count(self.t_a, dt)
        psi = state.amplitudes.astype(complex, copy=True).reshape(self.shape)
        initial_norm = state.norm()
        records: List[Tuple[float, np.ndarray, float]] = []
        if record_every:
            records.append((0.0, CompositeState(amplitudes=psi.reshape(-1), n_bath=self.bath.N_B).reduced_populations(), self.system_energy(psi, 0.0)))

        bath_factors = self._bath_factors(0.5 * h)
        view = psi.reshape(4, -1)
        previous = None
        for k in range(steps):
            t_mid = (k + 0.5) * h
            diagonal = self._diagonal(t_mid)
            phase = diagonal if previous is None else diagonal + previous
            view *= np.exp(-0.5j * h * phase)
            a = self.schedule.A(t_mid / self.t_a)
            self._transverse(psi, a, 0.5 * h, bath_factors, reverse=False)
            self._transverse(psi, a, 0.5 * h, bath_factors, reverse=True)
            previous = diagonal
            if record_every and (k + 1) % record_every == 0 and k + 1 < steps:
                # close the pending half phase on a copy to sample at a step boundary
                snapshot = (view * np.exp(-0.5j * h * previous)).reshape(self.shape)
                t = (k + 1) * h
                probs = (np.abs(snapshot.reshape(4, -1)) ** 2).sum(axis=1)
                records.append((t, probs, self.system_energy(snapshot, t)))
        view *= np.exp(-0.5j * h * previous)

        drift = abs(np.linalg.norm(psi) - initial_norm)
        if drift > NORM_TOLERANCE:
            logger.error(f"Norm drift {drift:.3e} in spin-bath run")
            raise IntegrationError(f"Norm drift {drift:.3e} exceeds {NORM_TOLERANCE}")
        final = CompositeState(amplitudes=psi.reshape(-1), n_bath=self.bath.N_B)
        if record_every:
            records.append((self.t_a, final.reduced_populations(), self.system_energy(psi, self.t_a)))
        return final, records


def evolve_bath_tdse(
    p: IsingProblem,
    sch: AnySchedule,
    w: OnsetWindow,
    bath: BathSpec,
    t_a: float,
    dt: float = 0.01,
    state_seed: Optional[int] = None,
) -> ProbabilityVector:
    """Reduced system populations at t_a with the bath traced out."""
    state_seed = bath.seed if state_seed is None else state_seed
    logger.debug(f"Spin-bath run: N_B={bath.N_B}, g={bath.g}, Omega={bath.Omega}, t_a={t_a} ns, dt={dt} ns")
    simulator = BathSimulator(p, sch, w, bath, t_a)
    final, _ = simulator.run(init_state(bath.N_B, state_seed), dt)
    return ProbabilityVector.from_array(final.reduced_populations())


def seed_populations(
    p: IsingProblem,
    sch: AnySchedule,
    w: OnsetWindow,
    bath: BathSpec,
    t_a: float,
    seeds: Sequence[int],
    dt: float = 0.01,
) -> np.ndarray:
    """One population vector per seed, shape ``(len(seeds), 2**n)``.

    Couplings stay fixed by ``bath.seed``; each seed draws a new bath state.
    """
    if not seeds:
        raise ProblemValidationError("At least one seed is required")
    return np.array([evolve_bath_tdse(p, sch, w, bath, t_a, dt, state_seed=s).as_array() for s in seeds])


def average_over_seeds(
    p: IsingProblem,
    sch: AnySchedule,
    w: OnsetWindow,
    bath: BathSpec,
    t_a: float,
    seeds: Sequence[int],
    dt: float = 0.01,
) -> Tuple[np.ndarray, np.ndarray]:
    """Mean and standard deviation of the populations over random bath states."""
    runs = seed_populations(p, sch, w, bath, t_a, seeds, dt)
    spread = runs.std(axis=0, ddof=1) if len(seeds) > 1 else np.zeros(runs.shape[1])
    return runs.mean(axis=0), spread


def run_manifest(
    bath: BathSpec,
    w: OnsetWindow,
    t_a: float,
    dt: float,
    state_seeds: Sequence[int] = (),
    seed_curves: Optional[Sequence[Sequence[float]]] = None,
) -> Dict:
    """Everything needed to reproduce a spin-bath run bit for bit, plus its per-seed populations if given."""
    manifest = {
        "model": "spinbath",
        "version": __version__,
        "rng": "numpy Philox via SeedSequence(seed).spawn(2): couplings, state",
        "seed": bath.seed,
        "state_seeds": list(state_seeds) or [bath.seed],
        "N_B": bath.N_B,
        "g": bath.g,
        "K": bath.K,
        "Omega": bath.Omega,
        "dt_ns": dt,
        "t_a_ns": t_a,
        "onset_ns": [w.t_start, w.t_end],
    }
    if seed_curves is not None:
        manifest["seed_populations"] = {str(s): list(curve) for s, curve in zip(state_seeds, seed_curves)}
    return manifest
