"""Tests for the closed-form parameter estimators."""

import math

import pytest
from pydantic import ValidationError

from leaf_uptake.data_io import DatasetSeries, load_bundled_dataset
from leaf_uptake.errors import DomainError, MissingDataError
from leaf_uptake.estimation import (
    REPORT_COLUMNS,
    EstimateWithRange,
    diffusion_from_lag,
    estimate_all,
    loss_rate_from_balance,
    partition_from_equilibrium,
    speed_from_decay,
)
from leaf_uptake.model import Compartment, Compound, CompoundParams, ConstantDiffusion, derive_geometry
from leaf_uptake.solver import SolverConfig, simulate


@pytest.fixture
def geom():
    return derive_geometry(30, 4, 1000)


@pytest.fixture(scope="module")
def dataset():
    return load_bundled_dataset()


class TestEstimators:
    """Tests for the individual formulas."""

    def test_diffusion_from_lag(self):
        assert diffusion_from_lag(4, 12.5) == pytest.approx(0.64)
        assert diffusion_from_lag(4, 5) == 1.6
        assert diffusion_from_lag(4, 20) == 0.4

    def test_diffusion_decreases_with_lag(self):
        values = [diffusion_from_lag(4, t) for t in (1, 2, 5, 10, 50)]
        assert all(b < a for a, b in zip(values, values[1:]))

    def test_partition_from_equilibrium(self):
        assert partition_from_equilibrium(14.8, 1.0) == pytest.approx(14.8)
        with pytest.raises(DomainError):
            partition_from_equilibrium(1.0, 0.0)

    def test_speed_from_decay_inverts_exponential(self, geom):
        """Test an exact exponential decay returns its speed."""
        s, t, c0 = 0.858, 37.0, 1.77e-3
        c_t = c0 * math.exp(-s * geom.A * t / geom.V_A)
        assert speed_from_decay(geom.V_A, geom.A, c0, c_t, t) == pytest.approx(s, rel=1e-12)

    @pytest.mark.parametrize("c_t", [1.77e-3, 2e-3, 0.0, -1e-5])
    def test_speed_from_decay_domain(self, geom, c_t):
        with pytest.raises(DomainError):
            speed_from_decay(geom.V_A, geom.A, 1.77e-3, c_t, 37.0)

    def test_loss_rate_from_balance(self, geom):
        c_leaf = 6.5314 / geom.V_B
        assert loss_rate_from_balance(8.92e-2, geom.V_B, c_leaf) == pytest.approx(0.013657, rel=1e-3)

    def test_loss_rate_zero_tissue(self, geom):
        with pytest.raises(DomainError):
            loss_rate_from_balance(8.92e-2, geom.V_B, 0.0)


class TestEstimateWithRange:
    """Tests for EstimateWithRange."""

    def test_order_enforced(self):
        with pytest.raises(ValidationError):
            EstimateWithRange(mean=1.0, lo=2.0, hi=3.0, unit="-")

    def test_from_endpoints_any_order(self):
        est = EstimateWithRange.from_endpoints(1.0, 2.0, 0.5, "-")
        assert (est.lo, est.mean, est.hi) == (0.5, 1.0, 2.0)

    def test_reciprocal_swaps_ends(self):
        est = EstimateWithRange(mean=2.0, lo=1.0, hi=4.0, unit="-").reciprocal()
        assert (est.lo, est.mean, est.hi) == (0.25, 0.5, 1.0)

    def test_reciprocal_of_zero_lower_end(self):
        est = EstimateWithRange(mean=2.0, lo=0.0, hi=4.0, unit="-").reciprocal()
        assert (est.lo, est.mean, est.hi) == (0.25, 0.5, math.inf)


class TestEstimateAll:
    """Tests for estimate_all on the bundled dataset."""

    @pytest.fixture
    def estimates(self, dataset, geom):
        return estimate_all(dataset, geom, (5.0, 20.0))

    def test_diffusion_range(self, estimates):
        d = estimates[Compound.AJ].D
        assert (d.lo, d.mean, d.hi) == pytest.approx((0.4, 0.64, 1.6))

    def test_adjuvant_values(self, estimates):
        aj = estimates[Compound.AJ]
        assert aj.s_in.mean == pytest.approx(0.858, rel=1e-2)
        assert aj.s_in.lo == pytest.approx(0.8157, rel=1e-2)
        assert aj.s_in.hi == pytest.approx(0.9042, rel=1e-2)
        assert aj.k_1in.mean == pytest.approx(14.80, rel=1e-2)
        assert aj.loss.mean == pytest.approx(0.0137, rel=1e-2)

    def test_active_ingredient_values(self, estimates):
        ai = estimates[Compound.AI]
        assert ai.s_in.mean == pytest.approx(0.533, rel=1e-2)
        assert ai.k_1in.mean == pytest.approx(0.754, rel=1e-2)
        assert ai.loss.mean == pytest.approx(0.0126, rel=1e-2)

    def test_ranges_contain_means(self, estimates):
        for est in estimates:
            for value in (est.D, est.k_1in, est.k_in, est.s_in, est.loss):
                assert value.lo <= value.mean <= value.hi

    def test_reciprocal_partition(self, estimates):
        aj = estimates[Compound.AJ]
        assert aj.k_in.mean == pytest.approx(1 / aj.k_1in.mean)
        params = aj.to_params()
        assert isinstance(params, CompoundParams)
        assert params.k_in == params.k_out == pytest.approx(1 / 14.78, rel=1e-2)
        assert params.s_in == params.s_out

    def test_initial_concentration(self, estimates, geom):
        assert estimates[Compound.AI].c0 == pytest.approx(100 / geom.V_A)

    def test_report_frame(self, estimates):
        frame = estimates.to_frame()
        assert list(frame.columns) == REPORT_COLUMNS
        names = set(frame["param"])
        assert {"D_P", "kappa_1A", "kappa_A1", "lambda_A", "beta", "P_A0"} <= names
        assert {"D_Q0", "K_1A", "K_A1", "mu_A", "eta", "Q_A0"} <= names
        assert (frame["lo"] <= frame["mean"]).all() and (frame["mean"] <= frame["hi"]).all()

    def test_missing_rows_listed(self, dataset, geom):
        """Test every absent key appears in the error."""
        drop = {(Compound.AJ, Compartment.DROPLET, 37.0), (Compound.AI, Compartment.LEAF_TISSUE, 108.0)}
        rows = tuple(r for r in dataset.rows if (r[1], r[2], r[0]) not in drop)
        with pytest.raises(MissingDataError) as excinfo:
            estimate_all(DatasetSeries(rows=rows), geom, (5.0, 20.0))
        assert len(excinfo.value.keys) == 2
        message = str(excinfo.value)
        assert "(AJ, droplet, t=37)" in message
        assert "(AI, leaf_tissue, t=108)" in message

    def test_zero_tissue_amount(self, dataset, geom):
        rows = tuple(
            (t, c, p, 0.0, 0.0, 0.0) if (c, p, t) == (Compound.AI, Compartment.LEAF_TISSUE, 108.0) else (t, c, p, m, lo, hi)
            for t, c, p, m, lo, hi in dataset.rows
        )
        with pytest.raises(DomainError):
            estimate_all(DatasetSeries(rows=rows), geom, (5.0, 20.0))

    def test_reversed_lag_range(self, dataset, geom):
        with pytest.raises(DomainError):
            estimate_all(dataset, geom, (20.0, 5.0))

    def test_custom_balance_rates(self, dataset, geom):
        est = estimate_all(dataset, geom, (5.0, 20.0), balance_rates={"AI": 0.2566})
        assert est[Compound.AI].loss.mean == pytest.approx(0.025, rel=1e-2)

    @staticmethod
    def _with_zero_lower_band(dataset, compartment, times=None):
        return DatasetSeries(rows=tuple(
            (t, c, p, m, 0.0, hi) if (c, p) == (Compound.AI, compartment) and (times is None or t in times)
            else (t, c, p, m, lo, hi)
            for t, c, p, m, lo, hi in dataset.rows
        ))

    def test_zero_lower_band_at_decay_time(self, dataset, geom, estimates):
        """Test a droplet band reaching zero leaves the speed range open above."""
        data = self._with_zero_lower_band(dataset, Compartment.DROPLET, times={37.0})
        speed = estimate_all(data, geom, (5.0, 20.0))[Compound.AI].s_in
        assert speed.hi == math.inf
        assert speed.mean == estimates[Compound.AI].s_in.mean
        assert speed.lo == estimates[Compound.AI].s_in.lo

    def test_zero_lower_band_in_tissue(self, dataset, geom, estimates):
        data = self._with_zero_lower_band(dataset, Compartment.LEAF_TISSUE, times={108.0})
        loss = estimate_all(data, geom, (5.0, 20.0))[Compound.AI].loss
        assert loss.hi == math.inf
        assert loss.mean == estimates[Compound.AI].loss.mean

    def test_zero_lower_band_in_cuticle(self, dataset, geom):
        """Test a cuticle band reaching zero opens both partition conventions."""
        data = self._with_zero_lower_band(dataset, Compartment.CUTICLE)
        ai = estimate_all(data, geom, (5.0, 20.0))[Compound.AI]
        assert ai.k_1in.lo == 0.0
        assert ai.k_in.hi == math.inf
        assert ai.k_1in.mean == pytest.approx(0.754, rel=1e-2)


class TestClosedLoop:
    """Tests recovering a known speed from a simulated droplet decay."""

    def test_recovers_boundary_speed(self, geom):
        """Test early decay of a fast-diffusing compound returns the true speed within 15%."""
        s = 0.858
        p = CompoundParams(D=1.6, k_in=1 / 14.8, k_out=1 / 14.8, s_in=s, s_out=s, loss=0.0137, c0=100 / geom.V_A)
        traj = simulate(geom, p, p, ConstantDiffusion(D0=1.6),
                        SolverConfig(n_cells=20, t_end=5.0, output_times=[0.0, 5.0]))
        droplet = traj.percentages(Compound.AJ)[:, 0]
        estimate = speed_from_decay(geom.V_A, geom.A, droplet[0] / geom.V_A, droplet[-1] / geom.V_A, 5.0)
        assert estimate == pytest.approx(s, rel=0.15)
        assert estimate < s
