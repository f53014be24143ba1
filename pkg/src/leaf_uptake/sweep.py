"""Grid exploration of the saturating diffusion law's (alpha, sigma) plane.

Each alpha value is one task: all sigma values of the row share the
adjuvant solution and the time step, so the row runs as a single batched
simulation. Rows are independent and are distributed over worker processes;
results are placed by row index, so the layout never depends on completion
order.
"""

import logging
import math
from concurrent.futures import ProcessPoolExecutor, as_completed
from dataclasses import dataclass
from typing import Dict, Mapping, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
import psutil

from leaf_uptake.errors import DomainError, SolverError, SweepCellError
from leaf_uptake.model import COMPARTMENTS, Compartment, Compound, CompoundParams, Geometry, SaturatingDiffusion
from leaf_uptake.solver import SolverConfig, simulate_batch

logger = logging.getLogger(__name__)

SWEEP_COLUMNS = (
    ["alpha", "sigma"]
    + [f"pct_{c.short}" for c in COMPARTMENTS]
    + [f"feas_{c.short}" for c in COMPARTMENTS]
    + ["feas_all"]
)

Band = Tuple[float, float]


def parse_grid(text: str) -> np.ndarray:
    """
    Parse an inclusive grid specification ``start:stop:step``.

    Values are rounded to 12 decimals so that e.g. 1.5 is hit exactly. The
    grid never goes past stop; stop itself is included when the step reaches it.

    Raises:
        ValueError: On malformed text, a non-positive step or stop < start
    """
    parts = text.split(":")
    if len(parts) != 3:
        raise ValueError(f"grid must look like start:stop:step, got {text!r}")
    try:
        start, stop, step = (float(p) for p in parts)
    except ValueError:
        raise ValueError(f"grid values must be numbers, got {text!r}") from None
    if not step > 0:
        raise ValueError(f"grid step must be positive, got {step}")
    if stop < start:
        raise ValueError(f"grid stop {stop} is below start {start}")
    n = int(math.floor((stop - start) / step + 1e-9)) + 1
    return np.round(start + step * np.arange(n), 12)


def default_jobs() -> int:
    """Number of physical cores, at least 1."""
    return psutil.cpu_count(logical=False) or 1


@dataclass(frozen=True)
class SweepResult:
    alpha_grid: np.ndarray
    sigma_grid: np.ndarray
    pct: Dict[Compartment, np.ndarray]
    feasible: Dict[Compartment, np.ndarray]
    bands: Dict[Compartment, Band]
    selected: Tuple[Compartment, ...]

    @property
    def shape(self) -> Tuple[int, int]:
        return len(self.alpha_grid), len(self.sigma_grid)

    @property
    def intersection(self) -> np.ndarray:
        mask = np.ones(self.shape, dtype=bool)
        for compartment in self.selected:
            mask &= self.feasible[compartment]
        return mask

    def to_frame(self) -> pd.DataFrame:
        alpha, sigma = np.meshgrid(self.alpha_grid, self.sigma_grid, indexing="ij")
        data = {"alpha": alpha.ravel(), "sigma": sigma.ravel()}
        for c in COMPARTMENTS:
            data[f"pct_{c.short}"] = self.pct[c].ravel()
        for c in COMPARTMENTS:
            data[f"feas_{c.short}"] = self.feasible[c].ravel()
        data["feas_all"] = self.intersection.ravel()
        return pd.DataFrame(data, columns=SWEEP_COLUMNS)


def feasibility_masks(
    pct: Mapping[Compartment, np.ndarray],
    bands: Mapping[Compartment, Band],
) -> Dict[Compartment, np.ndarray]:
    """Closed-interval containment per compartment; compartments without a band are unconstrained."""
    masks = {}
    for c in COMPARTMENTS:
        if c in bands:
            lo, hi = bands[c]
            masks[c] = (pct[c] >= lo) & (pct[c] <= hi)
        else:
            masks[c] = np.ones(pct[c].shape, dtype=bool)
    return masks


def _simulate_alpha_row(
    row: int,
    geom: Geometry,
    aj: CompoundParams,
    ai: CompoundParams,
    alpha: float,
    sigma_grid: Tuple[float, ...],
    cfg: SolverConfig,
) -> Tuple[int, np.ndarray]:
    """Final-time AI percentages (n_sigma, 4) of one alpha row."""
    models = [SaturatingDiffusion(D0=ai.D, alpha=alpha, sigma=s) for s in sigma_grid]
    try:
        trajectories = simulate_batch(geom, aj, ai, models, cfg)
    except SolverError as e:
        member = e.member if e.member is not None else 0
        raise SweepCellError(alpha, sigma_grid[member], e) from e
    return row, np.array([t.final_percentages(Compound.AI) for t in trajectories])


def _normalize_bands(bands: Mapping[Compartment | str, Band]) -> Dict[Compartment, Band]:
    normalized = {}
    for key, (lo, hi) in bands.items():
        compartment = key if isinstance(key, Compartment) else Compartment.parse(key)
        if lo > hi:
            raise DomainError(f"band for {compartment.value} is reversed: ({lo}, {hi})")
        normalized[compartment] = (float(lo), float(hi))
    return normalized


def run_sweep(
    geom: Geometry,
    aj: CompoundParams,
    ai: CompoundParams,
    d_q0: float,
    alpha_grid: Sequence[float],
    sigma_grid: Sequence[float],
    bands: Mapping[Compartment | str, Band],
    cfg: SolverConfig,
    *,
    selected: Optional[Sequence[Compartment | str]] = None,
    jobs: int = 1,
) -> SweepResult:
    """
    Simulate every (alpha, sigma) cell and test it against confidence bands.

    Args:
        geom: Model geometry
        aj: Adjuvant parameters
        ai: Active-ingredient parameters (its D is replaced by d_q0)
        d_q0: AI diffusion coefficient without adjuvant (µm²/min)
        alpha_grid: Enhancement values, >= 0
        sigma_grid: Half-saturation densities, > 0
        bands: (lo, hi) percentage bands at cfg.t_end per compartment
        cfg: Solver settings; only the state at cfg.t_end is used
        selected: Compartments whose masks form the intersection (default: all banded ones)
        jobs: Worker processes; 1 runs in-process

    Returns:
        SweepResult with percentages and masks laid out (alpha, sigma)

    Raises:
        DomainError: On empty or invalid grids, reversed bands or unbanded selections
        SweepCellError: If any cell's simulation fails
    """
    alphas = np.asarray(alpha_grid, dtype=float)
    sigmas = np.asarray(sigma_grid, dtype=float)
    if alphas.size == 0 or sigmas.size == 0:
        raise DomainError("sweep grids must be non-empty")
    if np.any(alphas < 0):
        raise DomainError("alpha values must be >= 0")
    if np.any(sigmas <= 0):
        raise DomainError("sigma values must be > 0")

    band_map = _normalize_bands(bands)
    if selected is None:
        chosen = tuple(c for c in COMPARTMENTS if c in band_map)
    else:
        chosen = tuple(c if isinstance(c, Compartment) else Compartment.parse(c) for c in selected)
        unbanded = [c.value for c in chosen if c not in band_map]
        if unbanded:
            raise DomainError(f"selected compartments have no band: {', '.join(unbanded)}")

    ai = ai.model_copy(update={"D": d_q0})
    final_cfg = cfg.model_copy(update={"output_times": [cfg.t_end]})
    sigma_tuple = tuple(float(s) for s in sigmas)
    tasks = [(i, geom, aj, ai, float(a), sigma_tuple, final_cfg) for i, a in enumerate(alphas)]

    cells = np.empty((alphas.size, sigmas.size, len(COMPARTMENTS)))
    logger.info("Sweep: %d alpha x %d sigma cells, %d job(s)", alphas.size, sigmas.size, jobs)
    if jobs <= 1 or len(tasks) == 1:
        for task in tasks:
            row, values = _simulate_alpha_row(*task)
            cells[row] = values
            logger.info("alpha=%g done (%d/%d)", alphas[row], row + 1, len(tasks))
    else:
        with ProcessPoolExecutor(max_workers=min(jobs, len(tasks))) as executor:
            futures = {executor.submit(_simulate_alpha_row, *task): task[0] for task in tasks}
            done = 0
            for future in as_completed(futures):
                row, values = future.result()
                cells[row] = values
                done += 1
                logger.info("alpha=%g done (%d/%d)", alphas[row], done, len(tasks))

    pct = {c: cells[:, :, k] for k, c in enumerate(COMPARTMENTS)}
    return SweepResult(
        alpha_grid=alphas,
        sigma_grid=sigmas,
        pct=pct,
        feasible=feasibility_masks(pct, band_map),
        bands=band_map,
        selected=chosen,
    )


@dataclass(frozen=True)
class RegionReport:
    non_empty: bool
    n_feasible: int
    n_cells: int
    alpha_zero_in_grid: bool
    alpha_zero_feasible: bool
    bounding_box: Optional[Dict[str, float]]
    selected: Tuple[str, ...]

    def to_dict(self) -> dict:
        return {
            "non_empty": self.non_empty,
            "n_feasible": self.n_feasible,
            "n_cells": self.n_cells,
            "alpha_zero_in_grid": self.alpha_zero_in_grid,
            "alpha_zero_feasible": self.alpha_zero_feasible,
            "bounding_box": self.bounding_box,
            "selected": list(self.selected),
        }

    def describe(self) -> str:
        if not self.non_empty:
            return f"Feasible region is empty (0 of {self.n_cells} cells)"
        box = self.bounding_box
        lines = [
            f"Feasible cells: {self.n_feasible} of {self.n_cells}",
            f"alpha in [{box['alpha_min']:g}, {box['alpha_max']:g}], "
            f"sigma in [{box['sigma_min']:g}, {box['sigma_max']:g}]",
        ]
        if self.alpha_zero_in_grid:
            verdict = "feasible" if self.alpha_zero_feasible else "infeasible"
            lines.append(f"alpha = 0 (no adjuvant effect) is {verdict}")
        return "\n".join(lines)


def summarize_region(result: SweepResult) -> RegionReport:
    """Describe the intersection region: emptiness, the alpha=0 row and a bounding box."""
    mask = result.intersection
    rows, cols = np.nonzero(mask)
    zero_rows = result.alpha_grid == 0.0
    box = None
    if rows.size:
        box = {
            "alpha_min": float(result.alpha_grid[rows].min()),
            "alpha_max": float(result.alpha_grid[rows].max()),
            "sigma_min": float(result.sigma_grid[cols].min()),
            "sigma_max": float(result.sigma_grid[cols].max()),
        }
    return RegionReport(
        non_empty=bool(rows.size),
        n_feasible=int(rows.size),
        n_cells=int(mask.size),
        alpha_zero_in_grid=bool(zero_rows.any()),
        alpha_zero_feasible=bool(mask[zero_rows].any()),
        bounding_box=box,
        selected=tuple(c.value for c in result.selected),
    )
