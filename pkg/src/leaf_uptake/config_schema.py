"""Configuration schema and validation using Pydantic."""

from pathlib import Path
from typing import List, Optional, Tuple

import yaml
from pydantic import BaseModel, Field, field_validator, model_validator

from leaf_uptake.data_io import BUNDLED_CONFIG, bundled_path
from leaf_uptake.model import (
    Compartment,
    CompoundParams,
    ConstantDiffusion,
    DiffusionModel,
    Geometry,
    SaturatingDiffusion,
    derive_geometry,
)
from leaf_uptake.solver import SolverConfig
from leaf_uptake.sweep import parse_grid


def _one_of(forward: Optional[float], reverse: Optional[float], names: Tuple[str, str]) -> None:
    if (forward is None) == (reverse is None):
        raise ValueError(f"Exactly one of {names[0]} or {names[1]} must be given")


def _model_partition(forward: Optional[float], reverse: Optional[float]) -> Optional[float]:
    """Coefficient in the model convention from whichever of the pair is set."""
    if forward is not None:
        return forward
    if reverse is not None:
        return 1.0 / reverse
    return None


class GeometryConfig(BaseModel):
    """Droplet and leaf dimensions (µm)."""
    r: float = Field(30.0, gt=0, description="Droplet radius (um)")
    L: float = Field(4.0, gt=0, description="Cuticle thickness (um)")
    L_B: float = Field(1000.0, gt=0, description="Leaf-tissue thickness (um)")

    def to_geometry(self) -> Geometry:
        return derive_geometry(self.r, self.L, self.L_B)


class AdjuvantConfig(BaseModel):
    """Adjuvant transport constants."""
    D_P: float = Field(..., gt=0, description="Diffusion coefficient in the cuticle (um^2/min)")
    kappa_A1: Optional[float] = Field(None, gt=0, description="Partition coefficient droplet -> cuticle")
    kappa_1A: Optional[float] = Field(None, gt=0, description="Cuticle/droplet concentration ratio (1/kappa_A1)")
    kappa_B1: Optional[float] = Field(None, gt=0, description="Partition coefficient tissue -> cuticle (default: inlet value)")
    kappa_1B: Optional[float] = Field(None, gt=0, description="Cuticle/tissue concentration ratio (1/kappa_B1)")
    lambda_A: float = Field(..., ge=0, description="Boundary speed at the droplet face (um/min)")
    lambda_B: Optional[float] = Field(None, ge=0, description="Boundary speed at the tissue face (default: lambda_A)")
    beta: float = Field(0.0, ge=0, description="Transfer rate to the rest of the plant (1/min)")
    P_A0: Optional[float] = Field(None, ge=0, description="Initial droplet concentration (default: 100/V_A)")
    log_pow: Optional[float] = Field(None, description="log10 octanol/water partition coefficient")

    @model_validator(mode='after')
    def validate_partitions(self) -> 'AdjuvantConfig':
        _one_of(self.kappa_A1, self.kappa_1A, ("kappa_A1", "kappa_1A"))
        if self.kappa_B1 is not None and self.kappa_1B is not None:
            raise ValueError("Give at most one of kappa_B1 or kappa_1B")
        return self

    def to_params(self, geom: Geometry) -> CompoundParams:
        k_in = _model_partition(self.kappa_A1, self.kappa_1A)
        k_out = _model_partition(self.kappa_B1, self.kappa_1B) or k_in
        return CompoundParams(
            D=self.D_P,
            k_in=k_in,
            k_out=k_out,
            s_in=self.lambda_A,
            s_out=self.lambda_A if self.lambda_B is None else self.lambda_B,
            loss=self.beta,
            c0=100.0 / geom.V_A if self.P_A0 is None else self.P_A0,
        )


class ActiveIngredientConfig(BaseModel):
    """Active-ingredient transport constants and its adjuvant-dependent diffusion law."""
    D_Q0: float = Field(..., gt=0, description="Diffusion coefficient without adjuvant (um^2/min)")
    K_A1: Optional[float] = Field(None, gt=0, description="Partition coefficient droplet -> cuticle")
    K_1A: Optional[float] = Field(None, gt=0, description="Cuticle/droplet concentration ratio (1/K_A1)")
    K_B1: Optional[float] = Field(None, gt=0, description="Partition coefficient tissue -> cuticle (default: inlet value)")
    K_1B: Optional[float] = Field(None, gt=0, description="Cuticle/tissue concentration ratio (1/K_B1)")
    mu_A: float = Field(..., ge=0, description="Boundary speed at the droplet face (um/min)")
    mu_B: Optional[float] = Field(None, ge=0, description="Boundary speed at the tissue face (default: mu_A)")
    eta: float = Field(0.0, ge=0, description="Transfer rate to the rest of the plant (1/min)")
    Q_A0: Optional[float] = Field(None, ge=0, description="Initial droplet concentration (default: 100/V_A)")
    alpha: float = Field(0.0, ge=0, description="Maximal relative diffusion enhancement by the adjuvant")
    sigma: float = Field(3.0, gt=0, description="Half-saturation adjuvant density (%/um)")
    log_pow: Optional[float] = Field(None, description="log10 octanol/water partition coefficient")

    @model_validator(mode='after')
    def validate_partitions(self) -> 'ActiveIngredientConfig':
        _one_of(self.K_A1, self.K_1A, ("K_A1", "K_1A"))
        if self.K_B1 is not None and self.K_1B is not None:
            raise ValueError("Give at most one of K_B1 or K_1B")
        return self

    def to_params(self, geom: Geometry) -> CompoundParams:
        k_in = _model_partition(self.K_A1, self.K_1A)
        k_out = _model_partition(self.K_B1, self.K_1B) or k_in
        return CompoundParams(
            D=self.D_Q0,
            k_in=k_in,
            k_out=k_out,
            s_in=self.mu_A,
            s_out=self.mu_A if self.mu_B is None else self.mu_B,
            loss=self.eta,
            c0=100.0 / geom.V_A if self.Q_A0 is None else self.Q_A0,
        )

    def diffusion_model(self) -> DiffusionModel:
        if self.alpha == 0:
            return ConstantDiffusion(D0=self.D_Q0)
        return SaturatingDiffusion(D0=self.D_Q0, alpha=self.alpha, sigma=self.sigma)


class EstimationConfig(BaseModel):
    """Inputs of the closed-form estimators that do not come from the dataset."""
    t_lag_min: float = Field(5.0, gt=0, description="Shortest plausible lag time across the cuticle (min)")
    t_lag_max: float = Field(20.0, gt=0, description="Longest plausible lag time across the cuticle (min)")
    decay_time: float = Field(37.0, gt=0, description="Droplet measurement time for the boundary speed (min)")
    balance_time: float = Field(108.0, ge=0, description="Tissue measurement time for the transfer rate (min)")
    balance_rate_AJ: float = Field(8.92e-2, ge=0, description="Observed adjuvant loss rate to the plant (%/min)")
    balance_rate_AI: float = Field(1.29e-1, ge=0, description="Observed AI loss rate to the plant (%/min)")
    equilibrium_points: int = Field(3, ge=1, description="Trailing time points averaged for partitioning")

    @model_validator(mode='after')
    def validate_lag_range(self) -> 'EstimationConfig':
        if self.t_lag_min > self.t_lag_max:
            raise ValueError(f"t_lag_min ({self.t_lag_min}) exceeds t_lag_max ({self.t_lag_max})")
        return self


class SweepConfig(BaseModel):
    """(alpha, sigma) grid and the compartments whose bands define feasibility."""
    alpha: str = Field("0:3:0.1", description="alpha grid as start:stop:step")
    sigma: str = Field("0.1:6:0.1", description="sigma grid as start:stop:step")
    bands: List[str] = Field(default_factory=lambda: ["droplet", "leaf", "rest"],
                             description="Compartments intersected for the feasible region")
    band_time: Optional[float] = Field(None, ge=0, description="Dataset time of the bands (default: solver t_end)")
    jobs: Optional[int] = Field(None, ge=1, description="Worker processes (default: physical cores)")

    @field_validator('alpha', 'sigma')
    @classmethod
    def validate_grid(cls, v: str) -> str:
        parse_grid(v)
        return v

    @field_validator('bands')
    @classmethod
    def validate_bands(cls, v: List[str]) -> List[str]:
        if not v:
            raise ValueError("At least one band compartment is required")
        for token in v:
            Compartment.parse(token)
        return v


class Config(BaseModel):
    """Main configuration model."""
    geometry: GeometryConfig = Field(default_factory=GeometryConfig)
    adjuvant: AdjuvantConfig
    active_ingredient: ActiveIngredientConfig
    solver: SolverConfig = Field(default_factory=SolverConfig)
    estimation: EstimationConfig = Field(default_factory=EstimationConfig)
    sweep: SweepConfig = Field(default_factory=SweepConfig)
    out_dir: Path = Field(Path("runs"), description="Default output directory for results")

    def build(self) -> Tuple[Geometry, CompoundParams, CompoundParams, DiffusionModel]:
        """Geometry, adjuvant and AI parameters, and the AI diffusion law."""
        geom = self.geometry.to_geometry()
        return (
            geom,
            self.adjuvant.to_params(geom),
            self.active_ingredient.to_params(geom),
            self.active_ingredient.diffusion_model(),
        )


def bundled_config_path() -> Path:
    """Configuration shipped with the package (geometry and parameter means, alpha = 0)."""
    return bundled_path(BUNDLED_CONFIG)


def load_config(config_path: str | Path) -> Config:
    """
    Load and validate configuration from YAML file.

    Args:
        config_path: Path to config YAML file

    Returns:
        Validated Config object

    Raises:
        FileNotFoundError: If config file doesn't exist
        ValueError: If config validation fails
        yaml.YAMLError: If YAML parsing fails
    """
    config_path = Path(config_path)
    if not config_path.exists():
        raise FileNotFoundError(f"Configuration file not found: {config_path}")

    with open(config_path, 'r', encoding='utf-8') as f:
        config_dict = yaml.safe_load(f)

    if config_dict is None:
        raise ValueError(f"Configuration file is empty: {config_path}")
    if not isinstance(config_dict, dict):
        raise ValueError(f"Configuration file must hold a mapping: {config_path}")

    return Config(**config_dict)
