"""Tests for the closed-form steady state."""

import numpy as np
import pytest

from leaf_uptake.errors import DomainError
from leaf_uptake.model import CompoundParams, derive_geometry
from leaf_uptake.steady_state import STEADY_COLUMNS, steady_sim_state, steady_state, steady_state_sweep


@pytest.fixture
def geom():
    return derive_geometry(30, 4, 1000)


@pytest.fixture
def ai_params():
    """AI with equal partitioning K_1A = 0.754 and the reference initial concentration."""
    return CompoundParams(D=0.4, k_in=1 / 0.754, k_out=1 / 0.754, s_in=0.533, s_out=0.533, loss=0.0, c0=1.77e-3)


class TestSteadyState:
    """Tests for steady_state."""

    def test_reference_droplet_concentration(self, geom, ai_params):
        """Test the AI droplet concentration at equilibrium."""
        ss = steady_state(geom, ai_params)
        assert ss.c_drop == pytest.approx(3.45e-5, rel=5e-3)

    def test_partition_relations(self, geom, ai_params):
        """Test the flat profile satisfies both face equilibria."""
        ss = steady_state(geom, ai_params)
        assert ss.m_uniform * ai_params.k_in == pytest.approx(geom.A * ss.c_drop, rel=1e-12)
        assert ss.c_leaf == pytest.approx(ai_params.k_out / ai_params.k_in * ss.c_drop, rel=1e-12)

    def test_percentages_match_amounts(self, geom, ai_params):
        """Test percentages equal amounts relative to V_A c0."""
        ss = steady_state(geom, ai_params)
        total = geom.V_A * ai_params.c0
        assert ss.pct_drop == pytest.approx(100 * geom.V_A * ss.c_drop / total, rel=1e-10)
        assert ss.pct_cuticle == pytest.approx(100 * geom.L * ss.m_uniform / total, rel=1e-10)
        assert ss.pct_leaf == pytest.approx(100 * geom.V_B * ss.c_leaf / total, rel=1e-10)

    def test_loss_rejected(self, geom, ai_params):
        """Test a non-zero transfer rate is a precondition error."""
        with pytest.raises(DomainError):
            steady_state(geom, ai_params.model_copy(update={"loss": 0.0126}))

    def test_tiny_outlet_partition(self, geom, ai_params):
        """Test k_out -> 0 leaves nothing in the tissue."""
        p = ai_params.model_copy(update={"k_out": 1e-14})
        ss = steady_state(geom, p)
        assert ss.pct_leaf < 1e-6
        expected_drop = 100 * p.k_in * geom.V_A / (p.k_in * geom.V_A + geom.A * geom.L)
        assert ss.pct_drop == pytest.approx(expected_drop, rel=1e-6)

    def test_sink_dominated(self, ai_params):
        """Test a very thick tissue takes almost everything."""
        ss = steady_state(derive_geometry(30, 4, 1e9), ai_params)
        assert ss.pct_leaf > 99.99

    def test_percentages_sum_to_100_random(self):
        """Test the split sums to 100 for random valid parameters."""
        rng = np.random.default_rng(11)
        for _ in range(200):
            geom = derive_geometry(rng.uniform(1, 100), rng.uniform(0.5, 20), rng.uniform(10, 5000))
            p = CompoundParams(D=1.0, k_in=10 ** rng.uniform(-3, 2), k_out=10 ** rng.uniform(-3, 2),
                               s_in=1.0, s_out=1.0, c0=rng.uniform(0, 1))
            ss = steady_state(geom, p)
            assert ss.pct_drop + ss.pct_cuticle + ss.pct_leaf == pytest.approx(100.0, abs=1e-9)

    def test_zero_initial_amount(self, geom, ai_params):
        """Test c0 = 0 gives zero concentrations and a defined split."""
        ss = steady_state(geom, ai_params.model_copy(update={"c0": 0.0}))
        assert ss.c_drop == 0.0 and ss.c_leaf == 0.0
        assert ss.pct_drop + ss.pct_cuticle + ss.pct_leaf == pytest.approx(100.0)

    def test_sim_state(self, geom, ai_params):
        """Test the equilibrium as a mesh state."""
        state = steady_sim_state(geom, ai_params, 9)
        assert state.m.shape == (9,)
        assert np.all(state.m == state.m[0])


class TestSteadyStateSweep:
    """Tests for steady_state_sweep."""

    def test_columns(self, geom, ai_params):
        frame = steady_state_sweep(geom, ai_params, "L", [1, 2, 4])
        assert list(frame.columns) == STEADY_COLUMNS
        assert len(frame) == 3
        assert np.allclose(frame[["pct_droplet", "pct_cuticle", "pct_leaf"]].sum(axis=1), 100.0)

    def test_area_does_not_change_split(self, geom, ai_params):
        """Test the split is independent of the contact area."""
        frame = steady_state_sweep(geom, ai_params, "A", [100.0, 1000.0, geom.A, 1e5])
        for column in ("pct_droplet", "pct_cuticle", "pct_leaf"):
            assert frame[column].max() - frame[column].min() < 1e-9

    def test_thicker_cuticle_holds_more(self, geom, ai_params):
        """Test the cuticle share increases with its thickness."""
        frame = steady_state_sweep(geom, ai_params, "L", [1, 2, 4, 8, 16])
        assert np.all(np.diff(frame["pct_cuticle"]) > 0)

    def test_affinity_increases_cuticle_share(self, geom, ai_params):
        """Test a larger cuticle/water ratio moves mass into the cuticle."""
        frame = steady_state_sweep(geom, ai_params, "k", [0.1, 0.754, 14.8, 800])
        assert np.all(np.diff(frame["pct_cuticle"]) > 0)

    def test_empty_grid(self, geom, ai_params):
        with pytest.raises(DomainError):
            steady_state_sweep(geom, ai_params, "k", [])

    def test_non_positive_value(self, geom, ai_params):
        with pytest.raises(DomainError):
            steady_state_sweep(geom, ai_params, "L", [1.0, 0.0])

    def test_unknown_variable(self, geom, ai_params):
        with pytest.raises(ValueError):
            steady_state_sweep(geom, ai_params, "V_B", [1.0])
