"""Literature correlations for partitioning and diffusion in plant cuticles.

Partition coefficients come from the octanol/water partition coefficient
(log Pow); diffusion coefficients from the McGowan molecular volume.
"""

import math
from enum import Enum
from typing import Optional, Tuple

import pandas as pd

from leaf_uptake.errors import DomainError
from leaf_uptake.model import CompoundParams

# 1 m^2 = 1e12 um^2 and 1 min = 60 s
M2S_TO_UM2MIN = 6.0e13

EMPIRICAL_COLUMNS = ["quantity", "relation", "input", "value", "unit"]


def _check_finite(name: str, value: float) -> None:
    if not math.isfinite(value):
        raise DomainError(f"{name} must be finite, got {value}")


def partition_wax_water(log_pow: float) -> float:
    """Wax/water partition coefficient: 10^(log Pow - 1)."""
    _check_finite("log_pow", log_pow)
    return 10.0 ** (log_pow - 1.0)


def partition_cuticle_water(log_pow: float) -> float:
    """Cuticle/water partition coefficient: 10^(-0.77 + 0.98 log Pow)."""
    _check_finite("log_pow", log_pow)
    return 10.0 ** (-0.77 + 0.98 * log_pow)


class McGowanRelation(str, Enum):
    """Correlations log10 D = a + b MV, D in m²/s and MV in cm³/mol."""
    AJ = "AJ"
    AI_WAX = "AI_wax"
    AI_CUTICLE = "AI_cuticle"

    @property
    def coefficients(self) -> Tuple[float, float]:
        return _MCGOWAN[self]


_MCGOWAN = {
    McGowanRelation.AJ: (-12.49, -0.015),
    McGowanRelation.AI_WAX: (-15.26, -0.01),
    McGowanRelation.AI_CUTICLE: (-13.0, -0.01),
}


def diffusion_from_mcgowan(mv: float, relation: McGowanRelation | str) -> float:
    """
    Diffusion coefficient (m²/s) from the McGowan volume.

    Args:
        mv: McGowan volume (cm³/mol), > 0
        relation: Which correlation to apply

    Raises:
        DomainError: If mv is not positive
        ValueError: If the relation tag is unknown
    """
    try:
        relation = McGowanRelation(relation)
    except ValueError:
        valid = ", ".join(r.value for r in McGowanRelation)
        raise ValueError(f"Unknown McGowan relation {relation!r}; expected one of {valid}") from None
    if not (mv > 0 and math.isfinite(mv)):
        raise DomainError(f"McGowan volume must be positive, got {mv}")
    a, b = relation.coefficients
    return 10.0 ** (a + b * mv)


def convert_m2s_to_um2min(d: float) -> float:
    return d * M2S_TO_UM2MIN


def literature_partitions(log_pow: float) -> Tuple[float, float]:
    """Model partition coefficients (k_in, k_out) implied by log Pow.

    The droplet side faces the wax, the tissue side the whole cuticle; both
    are reciprocals of the cuticle/water ratios.
    """
    return 1.0 / partition_wax_water(log_pow), 1.0 / partition_cuticle_water(log_pow)


def with_literature_partitions(params: CompoundParams, log_pow: float) -> CompoundParams:
    k_in, k_out = literature_partitions(log_pow)
    return params.model_copy(update={"k_in": k_in, "k_out": k_out})


def empirical_table(
    log_pow: Optional[float] = None,
    mcgowan: Optional[float] = None,
    relations: Tuple[McGowanRelation, ...] = tuple(McGowanRelation),
) -> pd.DataFrame:
    """All coefficients derivable from the given inputs, in both unit systems for diffusion."""
    if log_pow is None and mcgowan is None:
        raise ValueError("at least one of log_pow or mcgowan is required")

    rows = []
    if log_pow is not None:
        rows.append(("partition", "wax_water", log_pow, partition_wax_water(log_pow), "-"))
        rows.append(("partition", "cuticle_water", log_pow, partition_cuticle_water(log_pow), "-"))
    if mcgowan is not None:
        for relation in relations:
            d = diffusion_from_mcgowan(mcgowan, relation)
            rows.append(("diffusion", relation.value, mcgowan, d, "m^2/s"))
            rows.append(("diffusion", relation.value, mcgowan, convert_m2s_to_um2min(d), "um^2/min"))
    return pd.DataFrame(rows, columns=EMPIRICAL_COLUMNS)
