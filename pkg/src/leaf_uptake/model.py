"""Domain types shared by every part of the uptake model.

Units follow one convention throughout: lengths in µm, times in minutes,
compartment concentrations in % µm⁻³ (percent of the applied amount per
volume) and cuticle amount densities in % µm⁻¹, so that integrating the
density over the cuticle thickness gives a percentage.
"""

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Annotated, Literal, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, computed_field

from leaf_uptake.errors import DomainError

# Roundoff allowance for explicit updates of the cuticle profile.
NEGATIVE_CLAMP = 1e-12


class Compound(str, Enum):
    """Formulation components tracked by the model."""
    AJ = "AJ"
    AI = "AI"


class Compartment(str, Enum):
    """Places an applied amount can be found in."""
    DROPLET = "droplet"
    CUTICLE = "cuticle"
    LEAF_TISSUE = "leaf_tissue"
    REST = "rest"

    @property
    def short(self) -> str:
        """Token used in result column names (``pct_leaf`` rather than ``pct_leaf_tissue``)."""
        return "leaf" if self is Compartment.LEAF_TISSUE else self.value

    @classmethod
    def parse(cls, token: str) -> "Compartment":
        """Accept either the dataset token or the short column token."""
        token = token.strip()
        for member in cls:
            if token in (member.value, member.short):
                return member
        raise ValueError(f"Unknown compartment: {token!r}")


COMPARTMENTS: Tuple[Compartment, ...] = tuple(Compartment)


class Geometry(BaseModel):
    """Droplet, cuticle and leaf-tissue dimensions."""
    model_config = ConfigDict(frozen=True)

    r: float = Field(..., gt=0, description="Droplet radius (µm)")
    L: float = Field(..., gt=0, description="Cuticle thickness (µm)")
    L_B: float = Field(..., gt=0, description="Leaf-tissue thickness (µm)")
    V_A: float = Field(..., gt=0, description="Droplet volume (µm³)")
    A: float = Field(..., gt=0, description="Droplet-cuticle contact area (µm²)")
    V_B: float = Field(..., gt=0, description="Leaf-tissue volume (µm³)")

    @computed_field
    @property
    def cuticle_volume(self) -> float:
        """Volume of the cuticle slab under the droplet (µm³)."""
        return self.A * self.L

    def with_contact_area(self, area: float) -> "Geometry":
        """Rescale the contact area keeping droplet height and tissue thickness.

        The droplet and tissue volumes scale with the area, so every
        volume-to-area ratio is unchanged.
        """
        if not area > 0:
            raise DomainError(f"contact area must be positive, got {area}")
        scale = area / self.A
        return Geometry(
            r=math.sqrt(area / math.pi),
            L=self.L,
            L_B=self.L_B,
            V_A=self.V_A * scale,
            A=area,
            V_B=area * self.L_B,
        )

    def with_cuticle_thickness(self, thickness: float) -> "Geometry":
        if not thickness > 0:
            raise DomainError(f"cuticle thickness must be positive, got {thickness}")
        return self.model_copy(update={"L": thickness})


def derive_geometry(r: float, L: float, L_B: float) -> Geometry:
    """
    Build the geometry of a hemispherical droplet on a cuticle slab.

    Args:
        r: Droplet radius (µm)
        L: Cuticle thickness (µm)
        L_B: Leaf-tissue thickness (µm)

    Returns:
        Geometry with V_A = 2/3 π r³, A = π r² and V_B = A L_B

    Raises:
        DomainError: If any dimension is not strictly positive
    """
    for name, value in (("r", r), ("L", L), ("L_B", L_B)):
        if not (value > 0 and math.isfinite(value)):
            raise DomainError(f"{name} must be positive and finite, got {value}")

    area = math.pi * r ** 2
    return Geometry(
        r=r,
        L=L,
        L_B=L_B,
        V_A=2.0 / 3.0 * math.pi * r ** 3,
        A=area,
        V_B=area * L_B,
    )


class CompoundParams(BaseModel):
    """Transport constants of one compound.

    ``k_in`` and ``k_out`` follow the model convention (compartment to
    cuticle), i.e. the reciprocal of an estimated cuticle/water ratio.
    A boundary speed of zero seals that boundary.
    """
    model_config = ConfigDict(frozen=True)

    D: float = Field(..., gt=0, description="Baseline diffusion coefficient in the cuticle (µm²/min)")
    k_in: float = Field(..., gt=0, description="Partition coefficient droplet -> cuticle at x=0")
    k_out: float = Field(..., gt=0, description="Partition coefficient tissue -> cuticle at x=L")
    s_in: float = Field(..., ge=0, description="Boundary speed at x=0 (µm/min)")
    s_out: float = Field(..., ge=0, description="Boundary speed at x=L (µm/min)")
    loss: float = Field(0.0, ge=0, description="Transfer rate to the rest of the plant (1/min)")
    c0: float = Field(..., ge=0, description="Initial droplet concentration (% µm⁻³)")


def saturating_coefficient(d0, alpha, sigma, m):
    """D0 (1 + alpha m / (sigma + m)); broadcasts over numpy arrays."""
    return d0 * (1.0 + alpha * m / (sigma + m))


class ConstantDiffusion(BaseModel):
    model_config = ConfigDict(frozen=True)

    kind: Literal["constant"] = "constant"
    D0: float = Field(..., gt=0, description="Diffusion coefficient (µm²/min)")

    @property
    def upper_bound(self) -> float:
        return self.D0

    def evaluate(self, m):
        if np.ndim(m) == 0:
            return self.D0
        return np.full(np.shape(m), self.D0)


class SaturatingDiffusion(BaseModel):
    """Coefficient enhanced by the local adjuvant density, saturating at D0 (1 + alpha)."""
    model_config = ConfigDict(frozen=True)

    kind: Literal["saturating"] = "saturating"
    D0: float = Field(..., gt=0, description="Coefficient without adjuvant (µm²/min)")
    alpha: float = Field(..., ge=0, description="Maximal relative enhancement")
    sigma: float = Field(..., gt=0, description="Half-saturation adjuvant density (% µm⁻¹)")

    @property
    def upper_bound(self) -> float:
        return self.D0 * (1.0 + self.alpha)

    def evaluate(self, m):
        value = saturating_coefficient(self.D0, self.alpha, self.sigma, np.asarray(m, dtype=float))
        return float(value) if np.ndim(value) == 0 else value


DiffusionModel = Annotated[Union[ConstantDiffusion, SaturatingDiffusion], Field(discriminator="kind")]


def eval_diffusion(model: DiffusionModel, m_local):
    """
    Evaluate a diffusion model at a local adjuvant amount density.

    Args:
        model: Constant or saturating diffusion model
        m_local: Adjuvant density (% µm⁻¹), scalar or array; must be >= 0

    Returns:
        Coefficient in µm²/min with the shape of ``m_local``

    Raises:
        DomainError: If any density is negative or not a number
    """
    values = np.asarray(m_local, dtype=float)
    if not np.all(values >= 0):
        raise DomainError("adjuvant density must be non-negative; clamp roundoff negatives before evaluating")
    return model.evaluate(m_local)


@dataclass(frozen=True)
class SimState:
    """Snapshot of one compound's state."""
    t: float
    c_drop: float
    m: np.ndarray = field(repr=False)
    c_leaf: float
    lost: float

    def __post_init__(self):
        values = np.concatenate(([self.t, self.c_drop, self.c_leaf, self.lost], self.m))
        if not np.all(np.isfinite(values)):
            raise DomainError(f"non-finite state at t={self.t}")
        if min(self.c_drop, self.c_leaf, self.lost) < 0 or self.m.min(initial=0.0) < -NEGATIVE_CLAMP:
            raise DomainError(f"negative state at t={self.t}")

    @classmethod
    def initial(cls, params: CompoundParams, n_nodes: int) -> "SimState":
        return cls(t=0.0, c_drop=params.c0, m=np.zeros(n_nodes), c_leaf=0.0, lost=0.0)

    def amounts(self, geom: Geometry, weights: np.ndarray) -> Tuple[float, float, float, float]:
        """Amounts (%) in droplet, cuticle, leaf tissue and rest of plant."""
        return (
            geom.V_A * self.c_drop,
            float(np.dot(weights, self.m)),
            geom.V_B * self.c_leaf,
            self.lost,
        )

    def total(self, geom: Geometry, weights: np.ndarray) -> float:
        return sum(self.amounts(geom, weights))
