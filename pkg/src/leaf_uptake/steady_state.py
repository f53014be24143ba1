"""Closed-form equilibrium of the conservative (no-loss) system."""

from dataclasses import dataclass
from enum import Enum
from typing import Iterable

import numpy as np
import pandas as pd

from leaf_uptake.errors import DomainError
from leaf_uptake.model import CompoundParams, Geometry, SimState

STEADY_COLUMNS = ["value", "pct_droplet", "pct_cuticle", "pct_leaf"]


class SweepVariable(str, Enum):
    K_PARTITION = "k"
    AREA = "A"
    THICKNESS = "L"


@dataclass(frozen=True)
class SteadyState:
    c_drop: float
    m_uniform: float
    c_leaf: float
    pct_drop: float
    pct_cuticle: float
    pct_leaf: float


def steady_state(geom: Geometry, params: CompoundParams) -> SteadyState:
    """
    Equilibrium reached when every boundary flux vanishes.

    The cuticle profile is flat, the droplet side satisfies k_in m = A c_drop
    and the tissue side k_out m = A c_leaf.

    Args:
        geom: Model geometry
        params: Compound parameters; ``loss`` must be zero

    Returns:
        SteadyState with concentrations and percentage split

    Raises:
        DomainError: If params.loss is non-zero (everything ends up lost)
    """
    if params.loss != 0:
        raise DomainError(f"steady state requires loss = 0, got {params.loss}")

    cap_drop = params.k_in * geom.V_A
    cap_cuticle = geom.A * geom.L
    cap_leaf = params.k_out * geom.V_B
    denom = cap_drop + cap_cuticle + cap_leaf

    c_drop = cap_drop * params.c0 / denom
    return SteadyState(
        c_drop=c_drop,
        m_uniform=geom.A * c_drop / params.k_in,
        c_leaf=params.k_out / params.k_in * c_drop,
        pct_drop=100.0 * cap_drop / denom,
        pct_cuticle=100.0 * cap_cuticle / denom,
        pct_leaf=100.0 * cap_leaf / denom,
    )


def steady_sim_state(geom: Geometry, params: CompoundParams, n_nodes: int, t: float = 0.0) -> SimState:
    """The equilibrium as a solver state on a mesh with ``n_nodes`` nodes."""
    ss = steady_state(geom, params)
    return SimState(t=t, c_drop=ss.c_drop, m=np.full(n_nodes, ss.m_uniform), c_leaf=ss.c_leaf, lost=0.0)


def steady_state_sweep(
    geom: Geometry,
    params: CompoundParams,
    vary: SweepVariable | str,
    grid: Iterable[float],
) -> pd.DataFrame:
    """
    Steady-state split for a range of one parameter.

    ``k`` sets k_in = k_out = 1/K for each grid value K (equal partition at
    both cuticle faces). ``A`` rescales the contact area with droplet height
    and tissue thickness held, see Geometry.with_contact_area. ``L`` changes
    the cuticle thickness only.

    Returns:
        DataFrame with columns value, pct_droplet, pct_cuticle, pct_leaf

    Raises:
        DomainError: If the grid is empty or holds a non-positive value
    """
    vary = SweepVariable(vary)
    values = [float(v) for v in grid]
    if not values:
        raise DomainError("steady-state sweep grid is empty")

    rows = []
    for value in values:
        if not value > 0:
            raise DomainError(f"sweep values must be positive, got {value}")
        g, p = geom, params
        if vary is SweepVariable.K_PARTITION:
            p = params.model_copy(update={"k_in": 1.0 / value, "k_out": 1.0 / value})
        elif vary is SweepVariable.AREA:
            g = geom.with_contact_area(value)
        else:
            g = geom.with_cuticle_thickness(value)
        ss = steady_state(g, p)
        rows.append((value, ss.pct_drop, ss.pct_cuticle, ss.pct_leaf))

    return pd.DataFrame(rows, columns=STEADY_COLUMNS)
