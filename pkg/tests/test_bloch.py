import numpy as np
import pytest

from src.bloch import BlochParams, BlochSolver, BlochState, annealing_field, equilibrium_M0, evolve_bloch
from src.exceptions import ProblemValidationError
from src.lindblad import DensityMatrix, LindbladSolver, single_spin_channels
from src.operators import SIGMA_X, SIGMA_Y, SIGMA_Z
from src.problems import IsingProblem, get_instance
from src.schedules import OnsetWindow, Schedule


def bloch_vector(rho: np.ndarray) -> np.ndarray:
    return np.real([np.trace(rho @ SIGMA_X), np.trace(rho @ SIGMA_Y), np.trace(rho @ SIGMA_Z)])


def compare_with_lindblad(seed: int, samples: int, t_a: float = 20.0):
    """Bloch and one-spin Lindblad trajectories for random rates and field."""
    rng = np.random.default_rng(seed)
    gammas = rng.uniform(0.0, 0.05, 3)
    p = IsingProblem(n=1, h=(float(rng.uniform(-1.0, 1.0)),))
    field = annealing_field(p, Schedule.standard(), t_a, OnsetWindow(t_start=0.0, t_end=0.5 * t_a))
    params = BlochParams.from_rates(*gammas)
    times = list(np.linspace(0.0, t_a, samples + 1)[1:])

    bloch = BlochSolver(field, params)
    _, bloch_samples = bloch.evolve((1.0, 0.0, 0.0), 0.0, t_a, 0.01, method="exponential", sample_times=times, tol=1e-13)

    def hamiltonian(t):
        bx, by, bz = field(t)
        return -0.5 * (bx * SIGMA_X + by * SIGMA_Y + bz * SIGMA_Z)

    channels = single_spin_channels(*gammas)
    lindblad = LindbladSolver(hamiltonian, lambda t: channels)
    _, rho_samples = lindblad.evolve(DensityMatrix.plus_state(1).rho, 0.0, t_a, 0.01, sample_times=times, tol=1e-13)
    return params, np.array(bloch_samples), np.array([bloch_vector(rho) for rho in rho_samples])


class TestBlochParams:
    """Test cases for relaxation parameters."""

    def test_defaults(self):
        """Test default relaxation times and equilibrium magnetization."""
        params = BlochParams()
        assert params.T1 == 500.0
        assert params.T2 == 125.0
        assert params.M0 == -0.58

    def test_t2_bound(self):
        """Test T2 > 2 T1 is rejected."""
        with pytest.raises(ValueError):
            BlochParams(T1=10.0, T2=25.0)

    def test_rates_round_trip(self):
        """Test from_rates inverts to_rates."""
        params = BlochParams(T1=200.0, T2=150.0, M0=0.3)
        back = BlochParams.from_rates(*params.to_rates())
        assert back.T1 == pytest.approx(200.0)
        assert back.T2 == pytest.approx(150.0)
        assert back.M0 == pytest.approx(0.3)

    def test_mapped_rates_respect_t2_bound(self):
        """Test every nonnegative rate triple maps to T2 <= 2 T1."""
        rng = np.random.default_rng(0)
        for gammas in rng.uniform(0.0, 1.0, (50, 3)):
            params = BlochParams.from_rates(*gammas)
            assert params.T2 <= 2.0 * params.T1 * (1 + 1e-12)

    def test_negative_rates(self):
        """Test negative rates are rejected."""
        with pytest.raises(ValueError):
            BlochParams.from_rates(-0.1, 0.1, 0.0)

    def test_equilibrium_magnetization(self):
        """Test M0 = -tanh(beta h)."""
        assert equilibrium_M0(0.1, 6.93) == pytest.approx(-np.tanh(0.693))


class TestBlochState:
    """Test cases for the magnetization record."""

    def test_populations(self):
        """Test p_up = (1 + S_z) / 2."""
        state = BlochState(S=(0.0, 0.0, 0.5))
        np.testing.assert_allclose(state.populations(), [0.75, 0.25])


class TestEvolveBloch:
    """Test cases for annealed Bloch dynamics."""

    def test_requires_one_spin(self):
        """Test a two-spin problem is rejected."""
        with pytest.raises(ProblemValidationError):
            evolve_bloch(get_instance("2S1"), Schedule.standard(), BlochParams(), 10.0)

    def test_coherent_zero_field(self):
        """Test S stays along x without fields and relaxation."""
        params = BlochParams(T1=1e12, T2=1e12, M0=0.0)
        state = evolve_bloch(get_instance("1S-0"), Schedule.standard(), params, 20.0, dt=0.01)
        np.testing.assert_allclose(state.S, (1.0, 0.0, 0.0), atol=1e-8)

    def test_relaxes_to_m0(self):
        """Test S_z approaches M0 when t_a is many T1."""
        params = BlochParams(T1=10.0, T2=5.0, M0=-0.4)
        state = evolve_bloch(get_instance("1S-0.1"), Schedule.standard(), params, 500.0, dt=0.05, method="exponential")
        assert state.S[2] == pytest.approx(-0.4, abs=1e-3)
        assert state.length() <= 1.0 + 1e-9

    def test_steppers_agree(self):
        """Test RK4 and the exponential stepper give the same final state."""
        p = get_instance("1S-0.2")
        params = BlochParams(T1=50.0, T2=40.0, M0=-0.5)
        rk4 = evolve_bloch(p, Schedule.standard(), params, 10.0, dt=0.001, method="rk4")
        exponential = evolve_bloch(p, Schedule.standard(), params, 10.0, dt=0.01, method="exponential")
        np.testing.assert_allclose(rk4.S, exponential.S, atol=1e-3)

    def test_static_field_damped_precession(self):
        """Test a constant z field against the closed-form damped precession."""
        omega, params = 3.0, BlochParams(T1=40.0, T2=25.0, M0=-0.5)
        solver = BlochSolver(lambda t: np.array([0.0, 0.0, omega]), params)
        times = [1.0, 5.0, 20.0, 60.0]
        _, samples = solver.evolve((1.0, 0.0, 0.0), 0.0, 60.0, 0.1, method="exponential", sample_times=times, tol=1e-12)
        for t, S in zip(times, samples):
            transverse = np.exp(-1j * omega * t - t / params.T2)
            expected = (transverse.real, transverse.imag, params.M0 * (1.0 - np.exp(-t / params.T1)))
            np.testing.assert_allclose(S, expected, atol=1e-8)

    @pytest.mark.slow
    def test_millisecond_anneal_populations(self):
        """Test h = 0.1 with T1 = 500 ns, T2 = 125 ns, M0 = -0.58 ends near (0.2, 0.8) after 1 ms."""
        state = evolve_bloch(get_instance("1S-0.1"), Schedule.standard(), BlochParams(), 1e6, dt=0.01)
        np.testing.assert_allclose(state.populations(), [0.21, 0.79], atol=0.01)


class TestLindbladEquivalence:
    """Test cases for the Bloch equations against the one-spin master equation."""

    @pytest.mark.parametrize("seed", range(3))
    def test_trajectories_agree(self, seed):
        """Test trajectories agree at ten sample times for random rates and fields."""
        _, bloch, lindblad = compare_with_lindblad(seed, 10)
        np.testing.assert_allclose(bloch, lindblad, atol=1e-8)

    @pytest.mark.slow
    @pytest.mark.parametrize("seed", range(20))
    def test_trajectories_agree_dense_sampling(self, seed):
        """Test trajectories agree at 100 sample times and mapped T2 <= 2 T1."""
        params, bloch, lindblad = compare_with_lindblad(100 + seed, 100)
        assert params.T2 <= 2.0 * params.T1 * (1 + 1e-12)
        np.testing.assert_allclose(bloch, lindblad, atol=1e-8)
