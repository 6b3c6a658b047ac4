from unittest.mock import patch

import numpy as np
import pytest
from scipy.linalg import expm

from src.exceptions import ProblemValidationError
from src.operators import SIGMA_X, SIGMA_Y, apply_pair_blocks, field_rotation, xx_yy_blocks
from src.problems import get_instance
from src.schedules import OnsetWindow, Schedule
from src.schrodinger import AnnealRun, evolve_tdse, populations
from src.spinbath import (
    BathSimulator,
    BathSpec,
    average_over_seeds,
    draw_couplings,
    evolve_bath_tdse,
    init_state,
    run_manifest,
    seed_populations,
)


@pytest.fixture
def problem():
    return get_instance("2S1")


@pytest.fixture
def schedule():
    return Schedule.standard()


def bath_state(state):
    """Bath amplitudes of a product state |++> x |phi>."""
    return 2.0 * state.amplitudes.reshape(4, -1)[0]


class TestInitState:
    """Test cases for the random initial state."""

    def test_no_bath(self):
        """Test N_B = 0 gives the four-amplitude |++> state."""
        np.testing.assert_allclose(init_state(0).amplitudes, [0.5] * 4)

    def test_normalized(self):
        """Test the composite state has unit norm."""
        assert init_state(12, seed=3).norm() == pytest.approx(1.0, abs=1e-12)

    def test_reproducible(self):
        """Test the same seed draws the same bath state."""
        np.testing.assert_array_equal(init_state(6, seed=4).amplitudes, init_state(6, seed=4).amplitudes)

    def test_seeds_give_nearly_orthogonal_states(self):
        """Test different seeds give overlaps of order 1 / 2^N_B."""
        overlaps = [
            abs(np.vdot(bath_state(init_state(10, seed=s)), bath_state(init_state(10, seed=s + 100)))) ** 2
            for s in range(100)
        ]
        assert np.mean(overlaps) < 5.0 / 2**10

    def test_bath_size_limit(self):
        """Test baths beyond the supported size are rejected."""
        with pytest.raises(ProblemValidationError):
            init_state(21)


class TestCouplings:
    """Test cases for the random bath couplings."""

    def test_shapes_and_ranges(self):
        """Test K is (N_B, 2, 3) and Omega is (N_B, 3) within their scales."""
        couplings = draw_couplings(BathSpec(N_B=5, K=0.5, Omega=0.1, seed=2))
        assert couplings.K.shape == (5, 2, 3)
        assert couplings.Omega.shape == (5, 3)
        assert np.all(np.abs(couplings.K) <= 0.5)
        assert np.all(np.abs(couplings.Omega) <= 0.1)

    def test_reproducible(self):
        """Test the coupling draw depends only on the seed."""
        first = draw_couplings(BathSpec(N_B=4, seed=9))
        second = draw_couplings(BathSpec(N_B=4, seed=9))
        np.testing.assert_array_equal(first.K, second.K)
        np.testing.assert_array_equal(first.Omega, second.Omega)


class TestBathDynamics:
    """Test cases for the system-plus-bath evolution."""

    def test_decoupled_bath_matches_schrodinger(self, problem, schedule):
        """Test g = 0 reproduces the closed-system populations."""
        window = OnsetWindow(t_start=0.0, t_end=3.0)
        bath = BathSpec(N_B=4, g=0.0, Omega=0.1, seed=1)
        reduced = evolve_bath_tdse(problem, schedule, window, bath, 5.0, dt=0.01)
        run = AnnealRun(problem=problem, schedule=schedule, onset=window, t_a=5.0, dt=0.01)
        np.testing.assert_allclose(reduced.as_array(), populations(evolve_tdse(run)), atol=1e-6)

    def test_norm_preserved(self, problem, schedule):
        """Test the composite norm survives a coupled run."""
        bath = BathSpec(N_B=6, g=0.05, seed=0)
        simulator = BathSimulator(problem, schedule, OnsetWindow.none(), bath, 10.0)
        final, _ = simulator.run(init_state(6, seed=0), 0.01)
        assert final.norm() == pytest.approx(1.0, abs=1e-8)
        assert final.reduced_populations().sum() == pytest.approx(1.0, abs=1e-10)

    def test_energy_exchange(self, problem, schedule):
        """Test a coupled bath changes the system energy along the run."""
        window = OnsetWindow.none()
        coupled = BathSimulator(problem, schedule, window, BathSpec(N_B=4, g=0.05, seed=0), 20.0)
        decoupled = BathSimulator(problem, schedule, window, BathSpec(N_B=4, g=0.0, seed=0), 20.0)
        _, with_bath = coupled.run(init_state(4, seed=0), 0.01, record_every=100)
        _, without = decoupled.run(init_state(4, seed=0), 0.01, record_every=100)
        assert len(with_bath) == len(without)
        differences = [abs(a[2] - b[2]) for a, b in zip(with_bath, without)]
        assert max(differences) > 1e-6
        assert with_bath[0][0] == 0.0
        assert with_bath[-1][0] == pytest.approx(20.0)

    def test_bit_reproducible(self, problem, schedule):
        """Test identical seeds reproduce identical populations."""
        bath = BathSpec(N_B=3, g=0.01, seed=5)
        first = evolve_bath_tdse(problem, schedule, OnsetWindow.none(), bath, 2.0, dt=0.01)
        second = evolve_bath_tdse(problem, schedule, OnsetWindow.none(), bath, 2.0, dt=0.01)
        assert first.p == second.p

    def test_bath_unitaries_built_once_per_run(self, problem, schedule):
        """Test bath rotations are computed once per run, not once per step."""
        bath = BathSpec(N_B=3, g=0.01, seed=2)
        simulator = BathSimulator(problem, schedule, OnsetWindow.none(), bath, 2.0)

        with patch("src.spinbath.field_rotation", wraps=field_rotation) as rotation:
            simulator.run(init_state(3, seed=0), 0.01)

        assert rotation.call_count == 3

    def test_two_spins_required(self, schedule):
        """Test one-spin problems are rejected."""
        with pytest.raises(ProblemValidationError):
            BathSimulator(get_instance("1S-0.1"), schedule, OnsetWindow.none(), BathSpec(N_B=2), 1.0)

    def test_state_size_mismatch(self, problem, schedule):
        """Test a state with a different bath size is rejected."""
        simulator = BathSimulator(problem, schedule, OnsetWindow.none(), BathSpec(N_B=3), 1.0)
        with pytest.raises(ProblemValidationError):
            simulator.run(init_state(2), 0.1)


class TestSeedAveraging:
    """Test cases for averaging over random bath states."""

    def test_mean_and_spread(self, problem, schedule):
        """Test averages are normalized and the spread has one entry per state."""
        bath = BathSpec(N_B=4, g=0.05, seed=0)
        mean, spread = average_over_seeds(problem, schedule, OnsetWindow.none(), bath, 5.0, [0, 1, 2, 3], dt=0.01)
        assert mean.sum() == pytest.approx(1.0, abs=1e-10)
        assert spread.shape == (4,)
        assert np.all(spread >= 0)

    def test_per_seed_curves(self, problem, schedule):
        """Test the per-seed curves average to the reported mean."""
        bath = BathSpec(N_B=3, g=0.05, seed=0)
        curves = seed_populations(problem, schedule, OnsetWindow.none(), bath, 2.0, [0, 1, 2], dt=0.01)
        mean, spread = average_over_seeds(problem, schedule, OnsetWindow.none(), bath, 2.0, [0, 1, 2], dt=0.01)

        assert curves.shape == (3, 4)
        np.testing.assert_allclose(curves.mean(axis=0), mean, atol=1e-14)
        np.testing.assert_allclose(curves.std(axis=0, ddof=1), spread, atol=1e-14)

    def test_no_seeds(self, problem, schedule):
        """Test an empty seed list is rejected."""
        with pytest.raises(ProblemValidationError):
            average_over_seeds(problem, schedule, OnsetWindow.none(), BathSpec(N_B=2), 1.0, [])

    def test_manifest(self):
        """Test the manifest records everything needed to rerun."""
        manifest = run_manifest(BathSpec(N_B=16, g=0.001, seed=7), OnsetWindow(t_start=0.0, t_end=900.0), 2000.0, 0.01, [7, 8])
        assert manifest["seed"] == 7
        assert manifest["state_seeds"] == [7, 8]
        assert manifest["onset_ns"] == [0.0, 900.0]
        assert {"N_B", "g", "K", "Omega", "dt_ns", "t_a_ns", "rng", "version"} <= set(manifest)
        assert "seed_populations" not in manifest

    def test_manifest_with_seed_curves(self):
        """Test per-seed curves are keyed by their state seed."""
        manifest = run_manifest(BathSpec(N_B=2), OnsetWindow.none(), 10.0, 0.01, [3, 4], [[1.0, 0.0], [0.5, 0.5]])
        assert manifest["seed_populations"] == {"3": [1.0, 0.0], "4": [0.5, 0.5]}


class TestPairBlocks:
    """Test cases for the exact XX + YY pair exponential."""

    @pytest.mark.parametrize("a, b", [(0.3, -0.7), (1.0, 1.0), (0.0, 0.4)])
    def test_matches_dense_exponential(self, a, b):
        """Test the block form equals expm on qubits 0 and 2 of a three-qubit state."""
        rng = np.random.default_rng(0)
        psi = rng.normal(size=8) + 1j * rng.normal(size=8)
        psi /= np.linalg.norm(psi)
        tau = 0.37
        generator = a * np.kron(np.kron(SIGMA_X, np.eye(2)), SIGMA_X) + b * np.kron(np.kron(SIGMA_Y, np.eye(2)), SIGMA_Y)
        expected = expm(-1j * tau * generator) @ psi

        tensor = psi.reshape(2, 2, 2).copy()
        apply_pair_blocks(tensor, xx_yy_blocks(3, 0, 2, a, b, tau))

        np.testing.assert_allclose(tensor.reshape(-1), expected, atol=1e-12)


@pytest.mark.slow
class TestBathAnneals:
    """Long spin-bath anneals with the delayed field onset."""

    def test_dip_and_rise(self, problem, schedule):
        """Test p_upup at 200 ns lies well below its 2 us value with onset (0, 900 ns)."""
        bath = BathSpec(N_B=10, g=0.001, Omega=0.1, seed=0)
        window = OnsetWindow(t_start=0.0, t_end=900.0)
        short = evolve_bath_tdse(problem, schedule, window, bath, 200.0, dt=0.01)
        long = evolve_bath_tdse(problem, schedule, window, bath, 2000.0, dt=0.01)
        assert long.p[0] - short.p[0] >= 0.1

    def test_step_halving_converges(self, problem, schedule):
        """Test halving dt changes the populations at 1 us by less than 1e-4."""
        bath = BathSpec(N_B=6, g=0.001, Omega=0.1, seed=0)
        window = OnsetWindow(t_start=0.0, t_end=900.0)
        coarse = evolve_bath_tdse(problem, schedule, window, bath, 1000.0, dt=0.01).as_array()
        fine = evolve_bath_tdse(problem, schedule, window, bath, 1000.0, dt=0.005).as_array()
        np.testing.assert_allclose(coarse, fine, atol=1e-4)
