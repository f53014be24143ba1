"""Closed-form parameter estimators and their interval propagation.

Every estimator is monotone in each data argument, so a confidence range is
propagated by evaluating the formula at the interval endpoints. An endpoint
outside a formula's domain, such as a lower band of zero, leaves that end of
the range open (0 or infinity).
"""

import logging
import math
from dataclasses import dataclass
from typing import TYPE_CHECKING, Callable, Dict, Iterator, List, Literal, Mapping, Optional, Tuple

import pandas as pd
from pydantic import BaseModel, ConfigDict, model_validator

from leaf_uptake.errors import DomainError, MissingDataError
from leaf_uptake.model import Compartment, Compound, CompoundParams, Geometry

if TYPE_CHECKING:
    from leaf_uptake.data_io import DatasetSeries, Measurement

logger = logging.getLogger(__name__)

REPORT_COLUMNS = ["param", "mean", "lo", "hi", "unit"]

DEFAULT_BALANCE_RATES: Dict[Compound, float] = {Compound.AJ: 8.92e-2, Compound.AI: 1.29e-1}

Endpoint = Literal["mean", "lo", "hi"]


class EstimateWithRange(BaseModel):
    """Point estimate with the range implied by the data's confidence bands."""
    model_config = ConfigDict(frozen=True)

    mean: float
    lo: float
    hi: float
    unit: str

    @model_validator(mode='after')
    def validate_order(self) -> 'EstimateWithRange':
        if not self.lo <= self.mean <= self.hi:
            raise ValueError(f"range must satisfy lo <= mean <= hi, got ({self.lo}, {self.mean}, {self.hi})")
        return self

    @classmethod
    def from_endpoints(cls, mean: float, a: float, b: float, unit: str) -> "EstimateWithRange":
        """Build from two endpoint evaluations in either order."""
        return cls(mean=mean, lo=min(a, b), hi=max(a, b), unit=unit)

    def reciprocal(self, unit: str = "-") -> "EstimateWithRange":
        """Reciprocal range; a lower end of zero becomes an unbounded upper end."""
        if not (self.mean > 0 and self.lo >= 0):
            raise DomainError("reciprocal needs a positive estimate and a non-negative range")
        hi = 1.0 / self.lo if self.lo > 0 else math.inf
        return EstimateWithRange(mean=1.0 / self.mean, lo=1.0 / self.hi, hi=hi, unit=unit)

    def at(self, which: Endpoint) -> float:
        return getattr(self, which)


def _require_positive(**values: float) -> None:
    for name, value in values.items():
        if not (value > 0 and math.isfinite(value)):
            raise DomainError(f"{name} must be positive and finite, got {value}")


def diffusion_from_lag(L: float, t_lag: float) -> float:
    """Diffusion coefficient whose lag time across thickness L is t_lag: L^2 / (2 t_lag)."""
    _require_positive(L=L, t_lag=t_lag)
    return L * L / (2.0 * t_lag)


def partition_from_equilibrium(c_cuticle: float, c_aqueous: float) -> float:
    """Cuticle/aqueous concentration ratio at equilibrium (the reciprocal is the model's k_in)."""
    _require_positive(c_cuticle=c_cuticle, c_aqueous=c_aqueous)
    return c_cuticle / c_aqueous


def speed_from_decay(V_A: float, A: float, c0: float, c_t: float, t: float) -> float:
    """
    Boundary speed from the initial exponential decay of the droplet.

    Treats early uptake as first order with no back-flux:
    c(t) = c0 exp(-s A t / V_A).

    Raises:
        DomainError: If c_t >= c0 (no decay), c_t <= 0, or any other input is non-positive
    """
    _require_positive(V_A=V_A, A=A, c0=c0, t=t)
    if not c_t > 0:
        raise DomainError(f"droplet concentration must be positive, got {c_t}")
    if not c_t < c0:
        raise DomainError(f"no decay observed: c_t={c_t} >= c0={c0}")
    return -V_A * math.log(c_t / c0) / (A * t)


def loss_rate_from_balance(total_rate: float, V_B: float, c_leaf: float) -> float:
    """First-order transfer rate to the rest of the plant: total_rate / (V_B c_leaf)."""
    if not (total_rate >= 0 and math.isfinite(total_rate)):
        raise DomainError(f"total_rate must be non-negative, got {total_rate}")
    denom = V_B * c_leaf
    if not (denom > 0 and math.isfinite(denom)):
        raise DomainError(f"zero or invalid tissue amount V_B*c_leaf={denom}")
    return total_rate / denom


@dataclass(frozen=True)
class CompoundEstimate:
    """Estimated transport constants of one compound.

    ``k_1in`` is the cuticle/droplet ratio as measured; the model's inlet
    partition coefficient is its reciprocal. Equal speeds and partitions are
    assumed at both cuticle faces.
    """
    compound: Compound
    D: EstimateWithRange
    k_1in: EstimateWithRange
    s_in: EstimateWithRange
    loss: EstimateWithRange
    c0: float

    @property
    def k_in(self) -> EstimateWithRange:
        return self.k_1in.reciprocal()

    def to_params(self, which: Endpoint = "mean") -> CompoundParams:
        """CompoundParams built from one endpoint of every estimate."""
        k_in = 1.0 / self.k_1in.at(which)
        s = self.s_in.at(which)
        return CompoundParams(
            D=self.D.at(which),
            k_in=k_in,
            k_out=k_in,
            s_in=s,
            s_out=s,
            loss=self.loss.at(which),
            c0=self.c0,
        )


_NAMES = {
    Compound.AJ: {"D": "D_P", "k_1in": "kappa_1A", "k_in": "kappa_A1", "s_in": "lambda_A",
                  "s_out": "lambda_B", "loss": "beta", "c0": "P_A0"},
    Compound.AI: {"D": "D_Q0", "k_1in": "K_1A", "k_in": "K_A1", "s_in": "mu_A",
                  "s_out": "mu_B", "loss": "eta", "c0": "Q_A0"},
}


@dataclass(frozen=True)
class ParameterEstimates:
    aj: CompoundEstimate
    ai: CompoundEstimate

    def __iter__(self) -> Iterator[CompoundEstimate]:
        return iter((self.aj, self.ai))

    def __getitem__(self, compound: Compound) -> CompoundEstimate:
        return self.aj if Compound(compound) is Compound.AJ else self.ai

    def to_frame(self) -> pd.DataFrame:
        rows = []
        for est in self:
            names = _NAMES[est.compound]
            for key, value in (("D", est.D), ("k_1in", est.k_1in), ("k_in", est.k_in),
                               ("s_in", est.s_in), ("s_out", est.s_in), ("loss", est.loss)):
                rows.append((names[key], value.mean, value.lo, value.hi, value.unit))
            rows.append((names["c0"], est.c0, est.c0, est.c0, "%/um^3"))
        return pd.DataFrame(rows, columns=REPORT_COLUMNS)


def _average(measurements: List["Measurement"]) -> Tuple[float, float, float]:
    n = len(measurements)
    return (
        sum(m.mean for m in measurements) / n,
        sum(m.lo for m in measurements) / n,
        sum(m.hi for m in measurements) / n,
    )


def _open_ended(formula: Callable[..., float], open_end: float, *args: float) -> float:
    """Evaluate one end of a range; data outside the formula's domain leave that end open."""
    try:
        return formula(*args)
    except DomainError as e:
        logger.warning("%s: range end left open at %g (%s)", formula.__name__, open_end, e)
        return open_end


def _estimate_compound(
    dataset: "DatasetSeries",
    compound: Compound,
    geom: Geometry,
    d_estimate: EstimateWithRange,
    decay_time: float,
    balance_time: float,
    balance_rate: float,
    equilibrium_points: int,
    missing: List[Tuple[str, str, float]],
) -> Optional[CompoundEstimate]:
    def need(compartment: Compartment, t: float) -> Optional["Measurement"]:
        value = dataset.get(compound, compartment, t)
        if value is None:
            missing.append((compound.value, compartment.value, t))
        return value

    start = need(Compartment.DROPLET, 0.0)
    decayed = need(Compartment.DROPLET, decay_time)
    tissue = need(Compartment.LEAF_TISSUE, balance_time)

    times = dataset.times(compound)
    if len(times) < equilibrium_points:
        raise DomainError(
            f"{compound.value}: equilibrium needs {equilibrium_points} time points, dataset has {len(times)}"
        )
    eq_times = times[-equilibrium_points:]
    drops = [need(Compartment.DROPLET, t) for t in eq_times]
    cuts = [need(Compartment.CUTICLE, t) for t in eq_times]

    if None in (start, decayed, tissue) or None in drops or None in cuts:
        return None

    # percentages -> concentrations
    c0 = start.mean / geom.V_A
    speed = EstimateWithRange.from_endpoints(
        speed_from_decay(geom.V_A, geom.A, c0, decayed.mean / geom.V_A, decay_time),
        _open_ended(speed_from_decay, math.inf, geom.V_A, geom.A, c0, decayed.lo / geom.V_A, decay_time),
        _open_ended(speed_from_decay, 0.0, geom.V_A, geom.A, c0, decayed.hi / geom.V_A, decay_time),
        "um/min",
    )

    drop_mean, drop_lo, drop_hi = _average(drops)
    cut_mean, cut_lo, cut_hi = _average(cuts)
    v_cut = geom.cuticle_volume
    ratio = EstimateWithRange.from_endpoints(
        partition_from_equilibrium(cut_mean / v_cut, drop_mean / geom.V_A),
        _open_ended(partition_from_equilibrium, 0.0, cut_lo / v_cut, drop_hi / geom.V_A),
        _open_ended(partition_from_equilibrium, math.inf, cut_hi / v_cut, drop_lo / geom.V_A),
        "-",
    )

    loss = EstimateWithRange.from_endpoints(
        loss_rate_from_balance(balance_rate, geom.V_B, tissue.mean / geom.V_B),
        _open_ended(loss_rate_from_balance, math.inf, balance_rate, geom.V_B, tissue.lo / geom.V_B),
        _open_ended(loss_rate_from_balance, 0.0, balance_rate, geom.V_B, tissue.hi / geom.V_B),
        "1/min",
    )

    logger.info("%s: s=%.4g k_1=%.4g loss=%.4g", compound.value, speed.mean, ratio.mean, loss.mean)
    return CompoundEstimate(compound=compound, D=d_estimate, k_1in=ratio, s_in=speed, loss=loss, c0=c0)


def estimate_all(
    dataset: "DatasetSeries",
    geom: Geometry,
    t_lag_range: Tuple[float, float],
    *,
    decay_time: float = 37.0,
    balance_time: float = 108.0,
    balance_rates: Optional[Mapping[Compound, float]] = None,
    equilibrium_points: int = 3,
) -> ParameterEstimates:
    """
    Estimate both compounds' parameters from a dataset of compartment percentages.

    Args:
        dataset: Validated experimental series
        geom: Model geometry (converts percentages to concentrations)
        t_lag_range: (shortest, longest) plausible lag time across the cuticle (min)
        decay_time: Time of the droplet value used for the boundary speed
        balance_time: Time of the tissue value used for the transfer rate
        balance_rates: Observed rate of loss to the rest of the plant per compound (%/min)
        equilibrium_points: Number of trailing time points averaged for partitioning

    Returns:
        ParameterEstimates for AJ and AI

    Raises:
        MissingDataError: Listing every absent (compound, compartment, time) key
        DomainError: If a value lies outside an estimator's domain
    """
    t_short, t_long = t_lag_range
    if not t_short <= t_long:
        raise DomainError(f"lag-time range must be ordered, got {t_lag_range}")
    d_estimate = EstimateWithRange.from_endpoints(
        diffusion_from_lag(geom.L, 0.5 * (t_short + t_long)),
        diffusion_from_lag(geom.L, t_long),
        diffusion_from_lag(geom.L, t_short),
        "um^2/min",
    )

    rates = dict(DEFAULT_BALANCE_RATES)
    if balance_rates:
        rates.update({Compound(k): v for k, v in balance_rates.items()})

    missing: List[Tuple[str, str, float]] = []
    estimates = {
        compound: _estimate_compound(
            dataset, compound, geom, d_estimate, decay_time, balance_time,
            rates[compound], equilibrium_points, missing,
        )
        for compound in Compound
    }
    if missing:
        raise MissingDataError(missing)
    return ParameterEstimates(aj=estimates[Compound.AJ], ai=estimates[Compound.AI])
