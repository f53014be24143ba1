"""Explicit mass-conserving integration of the droplet / cuticle / tissue system.

The cuticle is discretised with linear finite elements on a uniform mesh and a
lumped (diagonal) mass matrix. With lumping, node i of the semi-discrete system
reads

    w_i dm_i/dt = J_{i-1/2} - J_{i+1/2}

where J_{e} = -D_e (m_{e+1} - m_e) / h is the element flux, and the two outer
"element" fluxes are the droplet inflow at x=0 and the tissue outflow at x=L.
The droplet and tissue equations receive exactly the same two boundary flux
values, so the discrete total is conserved up to rounding.

Both compounds advance with forward Euler from the same time level. The AI
coefficient of each element comes from the element mean of the (clamped)
adjuvant profile before the adjuvant itself is updated. When the AI
coefficients do not depend on the adjuvant at all, each compound takes its
own step size instead.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import List, Sequence, Tuple

import numpy as np
import pandas as pd
from pydantic import BaseModel, ConfigDict, Field, model_validator

from leaf_uptake.errors import DomainError, SolverError
from leaf_uptake.model import (
    COMPARTMENTS,
    NEGATIVE_CLAMP,
    Compound,
    CompoundParams,
    ConstantDiffusion,
    DiffusionModel,
    Geometry,
    SimState,
    saturating_coefficient,
)

logger = logging.getLogger(__name__)

TRAJECTORY_COLUMNS = ["t_min", "compound"] + [f"pct_{c.short}" for c in COMPARTMENTS]
PROFILE_COLUMNS = ["t_min", "compound", "x_um", "amount_density"]


@dataclass(frozen=True)
class Mesh:
    """Uniform 1-D mesh of the cuticle with lumped quadrature weights."""
    n_cells: int
    nodes: np.ndarray = field(repr=False)
    h: float
    lumped_weights: np.ndarray = field(repr=False)

    @classmethod
    def uniform(cls, length: float, n_cells: int) -> "Mesh":
        if n_cells < 1:
            raise DomainError(f"mesh needs at least one cell, got {n_cells}")
        if not length > 0:
            raise DomainError(f"mesh length must be positive, got {length}")
        h = length / n_cells
        nodes = np.linspace(0.0, length, n_cells + 1)
        weights = np.full(n_cells + 1, h)
        weights[0] = weights[-1] = h / 2.0
        return cls(n_cells=n_cells, nodes=nodes, h=h, lumped_weights=weights)

    @property
    def n_nodes(self) -> int:
        return self.n_cells + 1


class SolverConfig(BaseModel):
    """Discretisation and output settings."""
    model_config = ConfigDict(frozen=True)

    n_cells: int = Field(40, ge=4, description="Number of cuticle elements")
    dt_safety: float = Field(0.5, gt=0, le=1, description="Fraction of the explicit stability limit")
    t_end: float = Field(364.0, gt=0, description="Final time (min)")
    output_times: List[float] = Field(default_factory=list, description="Snapshot times (min); empty uses output_step")
    output_step: float = Field(4.0, gt=0, description="Snapshot spacing when output_times is empty (min)")
    negative_clamp: float = Field(NEGATIVE_CLAMP, ge=0, description="Tolerated negative roundoff in the cuticle profile")

    @model_validator(mode='after')
    def validate_output_times(self) -> 'SolverConfig':
        for t in self.output_times:
            if not 0.0 <= t <= self.t_end:
                raise ValueError(f"output time {t} outside [0, t_end={self.t_end}]")
        return self

    def snapshot_times(self) -> np.ndarray:
        if self.output_times:
            return np.unique(np.asarray(self.output_times, dtype=float))
        n = int(math.floor(self.t_end / self.output_step + 1e-9))
        times = np.round(self.output_step * np.arange(n + 1), 12)
        if times[-1] < self.t_end:
            times = np.append(times, self.t_end)
        return times


def flux_in(c_drop, m0, params: CompoundParams, A: float):
    """Droplet -> cuticle flux at x=0 (%/min); zero at partition equilibrium."""
    return params.s_in * A * (c_drop - params.k_in * m0 / A)


def flux_out(m_last, c_leaf, params: CompoundParams, A: float):
    """Cuticle -> tissue flux at x=L (%/min)."""
    return params.s_out * A * (params.k_out * m_last / A - c_leaf)


def stable_time_step(
    geom: Geometry,
    mesh: Mesh,
    compounds: Sequence[CompoundParams],
    d_max: float,
    dt_safety: float,
) -> float:
    """
    Largest forward-Euler step allowed by the diffusion and exchange terms.

    Args:
        geom: Model geometry
        mesh: Cuticle mesh
        compounds: Parameters of every compound advanced with this step
        d_max: Upper bound of every diffusion coefficient in use
        dt_safety: Fraction of the stability limit to use

    Returns:
        dt_safety * min(h^2 / (2 d_max), 1 / r) with r the fastest exchange rate

    Raises:
        SolverError: If the resulting step is not a positive finite number
    """
    h = mesh.h
    rate = 0.0
    for p in compounds:
        rate = max(
            rate,
            2.0 * p.s_in * p.k_in / h,
            2.0 * p.s_out * p.k_out / h,
            p.s_in * geom.A / geom.V_A,
            p.s_out * geom.A / geom.V_B + p.loss,
        )
    dt = dt_safety * h * h / (2.0 * d_max)
    if rate > 0:
        dt = min(dt, dt_safety / rate)
    if not (dt > 0 and math.isfinite(dt)):
        raise SolverError(f"no stable time step (d_max={d_max}, exchange rate={rate})")
    return dt


def _diffusion_arrays(models: Sequence[DiffusionModel]) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Column vectors (D0, alpha, sigma); a constant model is alpha = 0."""
    d0 = np.array([[m.D0] for m in models])
    alpha = np.array([[0.0 if isinstance(m, ConstantDiffusion) else m.alpha] for m in models])
    sigma = np.array([[1.0 if isinstance(m, ConstantDiffusion) else m.sigma] for m in models])
    return d0, alpha, sigma


class _Transport:
    """State arrays of one compound for a batch of independent members."""

    def __init__(self, params: CompoundParams, states: Sequence[SimState]):
        self.params = params
        self.c_drop = np.array([s.c_drop for s in states], dtype=float)
        self.m = np.array([s.m for s in states], dtype=float)
        self.c_leaf = np.array([s.c_leaf for s in states], dtype=float)
        self.lost = np.array([s.lost for s in states], dtype=float)
        self._fluxes = np.zeros((self.m.shape[0], self.m.shape[1] + 1))

    def advance(self, d_elem, dt: float, geom: Geometry, mesh: Mesh) -> None:
        p = self.params
        m = self.m
        J = self._fluxes
        f_in = flux_in(self.c_drop, m[:, 0], p, geom.A)
        f_out = flux_out(m[:, -1], self.c_leaf, p, geom.A)
        J[:, 0] = f_in
        J[:, 1:-1] = -d_elem * (m[:, 1:] - m[:, :-1]) / mesh.h
        J[:, -1] = f_out

        m += dt * (J[:, :-1] - J[:, 1:]) / mesh.lumped_weights
        self.c_drop -= dt * f_in / geom.V_A
        sink = p.loss * geom.V_B * self.c_leaf
        self.c_leaf += dt * (f_out - sink) / geom.V_B
        self.lost += dt * sink

    def first_violation(self, eps: float) -> int:
        """Index of the first member with a negative or non-finite entry, or -1."""
        ok = (self.m.min(axis=1) >= -eps) & (self.c_drop >= -eps) & (self.c_leaf >= -eps)
        bad = np.flatnonzero(~ok)
        return int(bad[0]) if bad.size else -1

    def states(self, t: float) -> List[SimState]:
        return [
            SimState(t=t, c_drop=float(self.c_drop[b]), m=self.m[b].copy(),
                     c_leaf=float(self.c_leaf[b]), lost=float(self.lost[b]))
            for b in range(self.m.shape[0])
        ]


class _CoupledSystem:
    """One adjuvant and a batch of active ingredients sharing its profile."""

    def __init__(self, geom, mesh, aj, ai, d_models, aj_state, ai_states, eps):
        self.geom = geom
        self.mesh = mesh
        self.eps = eps
        self.aj = _Transport(aj, [aj_state])
        self.ai = _Transport(ai, ai_states)
        self.aj_coeff = aj.D
        self.d0, self.alpha, self.sigma = _diffusion_arrays(d_models)
        self.steps = 0
        self.aj_steps = 0

    @property
    def coupled(self) -> bool:
        """Whether any AI coefficient depends on the adjuvant profile."""
        return bool(np.any(self.alpha != 0.0))

    def step(self, dt: float) -> None:
        m_aj = np.maximum(self.aj.m, 0.0)
        m_elem = 0.5 * (m_aj[:, :-1] + m_aj[:, 1:])
        d_ai = saturating_coefficient(self.d0, self.alpha, self.sigma, m_elem)

        self.aj.advance(self.aj_coeff, dt, self.geom, self.mesh)
        self.ai.advance(d_ai, dt, self.geom, self.mesh)
        self.steps += 1
        self.aj_steps += 1
        self._check(Compound.AJ, self.aj, self.steps)
        self._check(Compound.AI, self.ai, self.steps)

    def step_adjuvant(self, dt: float) -> None:
        self.aj.advance(self.aj_coeff, dt, self.geom, self.mesh)
        self.aj_steps += 1
        self._check(Compound.AJ, self.aj, self.aj_steps)

    def step_active(self, dt: float) -> None:
        """AI step with the adjuvant-free coefficients; valid only when not coupled."""
        self.ai.advance(self.d0, dt, self.geom, self.mesh)
        self.steps += 1
        self._check(Compound.AI, self.ai, self.steps)

    def _check(self, name: Compound, transport: "_Transport", n_step: int) -> None:
        member = transport.first_violation(self.eps)
        if member >= 0:
            raise SolverError(
                f"{name.value} state became negative or non-finite at step {n_step} "
                f"(batch member {member}); time step too large for the parameters",
                step=n_step,
                member=member,
            )


def step(
    state_pair: Tuple[SimState, SimState],
    dt: float,
    geom: Geometry,
    mesh: Mesh,
    aj: CompoundParams,
    ai: CompoundParams,
    d_model_ai: DiffusionModel,
    negative_clamp: float = NEGATIVE_CLAMP,
) -> Tuple[SimState, SimState]:
    """
    Advance an (AJ, AI) state pair by one forward-Euler step.

    Raises:
        SolverError: If dt is not positive and finite, exceeds the stability
            limit, or the update leaves the admissible state set
    """
    if not (dt > 0 and math.isfinite(dt)):
        raise SolverError(f"time step must be positive and finite, got {dt}", step=1)
    limit = stable_time_step(geom, mesh, (aj, ai), max(aj.D, d_model_ai.upper_bound), 1.0)
    if dt > limit:
        raise SolverError(f"time step {dt} exceeds the stability limit {limit}", step=1)

    aj_state, ai_state = state_pair
    system = _CoupledSystem(geom, mesh, aj, ai, [d_model_ai], aj_state, [ai_state], negative_clamp)
    system.step(dt)
    t = aj_state.t + dt
    return system.aj.states(t)[0], system.ai.states(t)[0]


@dataclass(frozen=True)
class Trajectory:
    """Snapshots of both compounds at the output times.

    ``dt`` and ``n_steps`` describe the AI integration.
    """
    geom: Geometry
    mesh: Mesh
    aj_states: Tuple[SimState, ...]
    ai_states: Tuple[SimState, ...]
    initial_totals: Tuple[float, float]
    dt: float
    n_steps: int

    @property
    def times(self) -> np.ndarray:
        return np.array([s.t for s in self.aj_states])

    def states(self, compound: Compound) -> Tuple[SimState, ...]:
        return self.aj_states if Compound(compound) is Compound.AJ else self.ai_states

    def percentages(self, compound: Compound) -> np.ndarray:
        """(n_times, 4) percentages of the initial total in droplet, cuticle, leaf and rest."""
        compound = Compound(compound)
        states = self.states(compound)
        amounts = np.array([s.amounts(self.geom, self.mesh.lumped_weights) for s in states])
        initial_total = self.initial_totals[0 if compound is Compound.AJ else 1]
        if initial_total == 0:
            return np.zeros_like(amounts)
        return 100.0 * amounts / initial_total

    def final_percentages(self, compound: Compound) -> np.ndarray:
        return self.percentages(compound)[-1]

    def to_frame(self) -> pd.DataFrame:
        frames = []
        for compound in Compound:
            pct = self.percentages(compound)
            frame = pd.DataFrame(pct, columns=TRAJECTORY_COLUMNS[2:])
            frame.insert(0, "compound", compound.value)
            frame.insert(0, "t_min", self.times)
            frames.append(frame)
        return pd.concat(frames, ignore_index=True)

    def profiles_frame(self) -> pd.DataFrame:
        rows = []
        for compound in Compound:
            for s in self.states(compound):
                for x, value in zip(self.mesh.nodes, s.m):
                    rows.append((s.t, compound.value, float(x), float(value)))
        return pd.DataFrame(rows, columns=PROFILE_COLUMNS)


def _substeps(segment: float, dt_max: float) -> Tuple[int, float]:
    n = max(1, math.ceil(segment / dt_max * (1.0 - 1e-12)))
    return n, segment / n


def simulate_batch(
    geom: Geometry,
    aj: CompoundParams,
    ai: CompoundParams,
    d_models: Sequence[DiffusionModel],
    cfg: SolverConfig,
) -> List[Trajectory]:
    """
    Simulate one adjuvant with several AI diffusion models at once.

    All members advance with the same time step, chosen from the largest
    coefficient bound in the batch. Members sharing that bound get results
    identical to separate ``simulate`` calls.

    When no member depends on the adjuvant (constant models or alpha = 0)
    the two compounds are stepped separately, each with its own limit, so
    the AI results do not change with any adjuvant input.

    Raises:
        DomainError: If a model's D0 differs from ai.D or the batch is empty
        SolverError: On a negative or non-finite state
    """
    if not d_models:
        raise DomainError("simulate_batch needs at least one diffusion model")
    for model in d_models:
        if model.D0 != ai.D:
            raise DomainError(f"AI diffusion model D0={model.D0} differs from CompoundParams.D={ai.D}")

    mesh = Mesh.uniform(geom.L, cfg.n_cells)
    system = _CoupledSystem(
        geom, mesh, aj, ai, d_models,
        SimState.initial(aj, mesh.n_nodes),
        [SimState.initial(ai, mesh.n_nodes)] * len(d_models),
        cfg.negative_clamp,
    )
    ai_bound = max(m.upper_bound for m in d_models)
    if system.coupled:
        dt_max = stable_time_step(geom, mesh, (aj, ai), max(aj.D, ai_bound), cfg.dt_safety)
    else:
        dt_max = stable_time_step(geom, mesh, (ai,), ai_bound, cfg.dt_safety)
        dt_aj = stable_time_step(geom, mesh, (aj,), aj.D, cfg.dt_safety)
    times = cfg.snapshot_times()
    logger.info("Simulating %d member(s): h=%.4g um, dt_max=%.4g min, %d snapshots to t=%g",
                len(d_models), mesh.h, dt_max, len(times), times[-1])
    if not system.coupled:
        logger.info("AI does not depend on the adjuvant; adjuvant dt_max=%.4g min", dt_aj)

    aj_snaps: List[SimState] = []
    ai_snaps: List[List[SimState]] = [[] for _ in d_models]

    t = 0.0
    for t_next in times:
        segment = t_next - t
        if segment > 0:
            n, dt = _substeps(segment, dt_max)
            logger.debug("Segment [%g, %g]: %d steps of %.6g min", t, t_next, n, dt)
            if system.coupled:
                for _ in range(n):
                    system.step(dt)
            else:
                n_aj, dt_sub = _substeps(segment, dt_aj)
                for _ in range(n_aj):
                    system.step_adjuvant(dt_sub)
                for _ in range(n):
                    system.step_active(dt)
            t = float(t_next)
        aj_snaps.append(system.aj.states(t)[0])
        for b, state in enumerate(system.ai.states(t)):
            ai_snaps[b].append(state)

    logger.info("Completed %d AI steps", system.steps)
    aj_states = tuple(aj_snaps)
    totals = (geom.V_A * aj.c0, geom.V_A * ai.c0)
    return [
        Trajectory(geom=geom, mesh=mesh, aj_states=aj_states, ai_states=tuple(snaps),
                   initial_totals=totals, dt=dt_max, n_steps=system.steps)
        for snaps in ai_snaps
    ]


def simulate(
    geom: Geometry,
    aj: CompoundParams,
    ai: CompoundParams,
    d_model_ai: DiffusionModel,
    cfg: SolverConfig,
) -> Trajectory:
    """
    Integrate the coupled adjuvant / active-ingredient system.

    The adjuvant diffuses with the constant coefficient aj.D. The active
    ingredient uses ``d_model_ai`` driven by the adjuvant profile.

    Args:
        geom: Model geometry
        aj: Adjuvant parameters
        ai: Active-ingredient parameters (ai.D must equal d_model_ai.D0)
        d_model_ai: Active-ingredient diffusion law
        cfg: Solver settings

    Returns:
        Trajectory with snapshots at cfg.snapshot_times()

    Raises:
        DomainError: If ai.D and d_model_ai.D0 disagree
        SolverError: On a negative or non-finite state
    """
    return simulate_batch(geom, aj, ai, [d_model_ai], cfg)[0]
