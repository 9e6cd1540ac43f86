"""
Seeded Monte Carlo replication of the rank estimators.

A plan crosses a parameter grid with a ladder of sample sizes. Every
(parameter, n) cell draws ``replicates`` independent samples, each from its
own stream ``SeedSequence(seed, spawn_key=(cell_key, replicate))`` where
``cell_key`` is a digest of the model and n, so editing one cell of a plan
leaves every other cell's numbers unchanged.
"""

import hashlib
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Optional, Tuple

import numpy as np
import pandas as pd

from dirrho.copulas import make_copula, parameter_name
from dirrho.core import CoefficientEstimate, Direction, compute_ranks
from dirrho.errors import DomainError
from dirrho.estimators import (
    assemble_decomposition,
    decomposed_terms,
    rho_hat_directional,
    rho_hat_star3,
)
from dirrho.exact import DirectionalRho, directional_rho

logger = logging.getLogger(__name__)

RHO_HAT = "rho_hat"
RHO_STAR = "rho3_star"


def subset_label(subset):
    """Column label of a margin estimator, 1-based: (0, 3) -> ``rho_minus_14``."""
    return "rho_minus_" + "".join(str(i + 1) for i in subset)


@dataclass(frozen=True)
class ReplicationPlan:
    """
    Grid of simulation cells.

    Args:
        family (str): Copula family name
        dimension (int): Dimension d
        parameters (tuple): Parameter grid; ``(None,)`` for parameter-free families
        sizes (tuple): Sample sizes n
        directions (tuple): Directions to estimate
        replicates (int): Samples per cell
        seed (int): Master seed
        include_star (bool): Also record the mean pairwise estimator (d = 3)
        decomposition (bool): Record margin estimators and check the decomposition identity
        workers (int): Worker processes; results do not depend on it
    """

    family: str
    dimension: int
    parameters: Tuple = (None,)
    sizes: Tuple[int, ...] = (20, 50, 100, 500)
    directions: Tuple[Direction, ...] = ()
    replicates: int = 1000
    seed: int = 20240101
    include_star: bool = False
    decomposition: bool = False
    workers: int = 1

    def __post_init__(self):
        directions = tuple(a if isinstance(a, Direction) else Direction.parse(a) for a in self.directions)
        object.__setattr__(self, "directions", directions)
        object.__setattr__(self, "parameters", tuple(self.parameters) or (None,))
        object.__setattr__(self, "sizes", tuple(int(n) for n in self.sizes))
        if self.replicates < 1:
            raise DomainError(f"replicate count must be at least 1, got {self.replicates}")
        if not self.sizes or min(self.sizes) < 2:
            raise DomainError(f"sample sizes must be at least 2, got {self.sizes}")
        if not directions and not self.include_star:
            raise DomainError("a plan needs at least one direction")
        for alpha in directions:
            if alpha.d != self.dimension:
                raise DomainError(f"direction {alpha} does not have dimension {self.dimension}")
        if self.include_star and self.dimension != 3:
            raise DomainError("the mean pairwise estimator is only reported for d = 3")
        if self.workers < 1:
            raise DomainError("workers must be at least 1")
        # raises on inadmissible parameters
        self.models()

    @classmethod
    def from_preset(cls, preset, seed=None, replicates=None, workers=None, defaults=None):
        """
        Build a plan from a preset section of the settings file.

        Explicit arguments override the preset, which overrides ``defaults``
        (the ``simulation`` settings section).
        """
        defaults = defaults or {}
        return cls(
            family=preset["family"],
            dimension=preset["dimension"],
            parameters=tuple(preset.get("parameters", (None,))),
            sizes=tuple(preset["sizes"]),
            directions=tuple(preset.get("directions", ())),
            replicates=(replicates if replicates is not None
                        else preset.get("replicates", defaults.get("replicates", 1000))),
            seed=seed if seed is not None else preset.get("seed", defaults.get("seed", 20240101)),
            include_star=preset.get("include_star", False),
            decomposition=preset.get("decomposition", False),
            workers=workers if workers is not None else defaults.get("workers", 1),
        )

    @property
    def parameter_label(self):
        return parameter_name(self.family) or "parameter"

    def models(self):
        return [(p, make_copula(self.family, self.dimension, p)) for p in self.parameters]


@dataclass(frozen=True)
class CellSummary:
    """Mean and standard deviation of one statistic over the replicates of a cell."""

    parameter: Optional[float]
    n: int
    alpha: Optional[Direction]
    statistic: str
    mean: float
    sd: float
    replicates: int


@dataclass(frozen=True)
class SimulationReport:
    """Cell summaries of a plan with the population values they estimate."""

    plan: ReplicationPlan
    cells: Tuple[CellSummary, ...]
    exact: dict = field(default_factory=dict)
    max_identity_gap: float = 0.0

    def summary(self, parameter, n, alpha=None, statistic=RHO_HAT):
        for cell in self.cells:
            if (cell.parameter, cell.n, cell.alpha, cell.statistic) == (parameter, n, alpha, statistic):
                return cell
        raise KeyError((parameter, n, alpha, statistic))

    def _exact_value(self, parameter, alpha, statistic):
        entry = self.exact.get((parameter, alpha, statistic))
        return (entry.value, entry.estimate.method.value) if entry is not None else (math.nan, "")

    def to_frame(self):
        """Long table, one row per cell and statistic."""
        rows = []
        for cell in self.cells:
            exact, method = self._exact_value(cell.parameter, cell.alpha, cell.statistic)
            rows.append({
                "family": self.plan.family,
                self.plan.parameter_label: cell.parameter,
                "alpha": str(cell.alpha) if cell.alpha is not None else "",
                "statistic": cell.statistic,
                "n": cell.n,
                "mean": cell.mean,
                "sd": cell.sd,
                "replicates": cell.replicates,
                "exact": exact,
                "exact_method": method,
            })
        return pd.DataFrame(rows)

    def grid(self):
        """
        Wide table: one row per (direction, parameter), the exact value, then
        one mean column per n.
        """
        rows = []
        keys = [(a, RHO_HAT) for a in self.plan.directions]
        if self.plan.include_star:
            keys.append((None, RHO_STAR))
        for alpha, statistic in keys:
            for parameter in self.plan.parameters:
                exact, _ = self._exact_value(parameter, alpha, statistic)
                row = {
                    "alpha": str(alpha) if alpha is not None else statistic,
                    self.plan.parameter_label: parameter,
                    "exact": exact,
                }
                for n in self.plan.sizes:
                    row[f"n={n}"] = self.summary(parameter, n, alpha, statistic).mean
                rows.append(row)
        return pd.DataFrame(rows)

    def decomposition_frame(self):
        """
        Margin estimator means next to the assembled estimate, one row per
        (parameter, n), for a single-direction plan run with ``decomposition``.
        """
        if not self.plan.decomposition or len(self.plan.directions) != 1:
            raise DomainError("decomposition tables need a single-direction plan run with decomposition")
        alpha = self.plan.directions[0]
        statistics = [c.statistic for c in self.cells if c.alpha == alpha and c.statistic.startswith("rho_minus_")]
        labels = list(dict.fromkeys(statistics))
        rows = []
        for parameter in self.plan.parameters:
            for n in self.plan.sizes:
                row = {self.plan.parameter_label: parameter, "n": n}
                for label in labels:
                    row[label] = self.summary(parameter, n, alpha, label).mean
                row[RHO_HAT] = self.summary(parameter, n, alpha, RHO_HAT).mean
                rows.append(row)
        return pd.DataFrame(rows)


def _cell_key(model, n):
    digest = hashlib.sha256(f"{model.spec}|n={n}".encode("utf-8")).digest()
    return int.from_bytes(digest[:4], "big")


def _replicate_rng(seed, cell_key, replicate):
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(cell_key, replicate)))


def _mean_sd(values):
    values = np.asarray(values, dtype=float)
    if np.all(values == values[0]):
        return float(values[0]), 0.0
    mean = math.fsum(values) / values.size
    if values.size < 2:
        return mean, 0.0
    return mean, math.sqrt(math.fsum((values - mean) ** 2) / (values.size - 1))


def _run_cell(job):
    """Replicate one (parameter, n) cell; module level so worker processes can run it."""
    plan, parameter, model, n = job
    key = _cell_key(model, n)
    series = {}
    gap = 0.0
    for replicate in range(plan.replicates):
        sample = model.sample(n, _replicate_rng(plan.seed, key, replicate))
        ranks = compute_ranks(sample)
        for alpha in plan.directions:
            direct = rho_hat_directional(ranks, alpha)
            series.setdefault((alpha, RHO_HAT), []).append(direct.value)
            if plan.decomposition:
                terms = decomposed_terms(ranks, alpha)
                for subset, value in terms.items():
                    series.setdefault((alpha, subset_label(subset)), []).append(float(value))
                assembled = assemble_decomposition(alpha, terms, n)
                gap = max(gap, abs(float(assembled - direct.rational)))
        if plan.include_star:
            series.setdefault((None, RHO_STAR), []).append(rho_hat_star3(ranks))

    cells = []
    for (alpha, statistic), values in series.items():
        mean, sd = _mean_sd(values)
        cells.append(CellSummary(parameter, n, alpha, statistic, mean, sd, len(values)))
    logger.info("cell %s n=%d: %d replicate(s) done", model.spec, n, plan.replicates)
    return cells, gap


def _exact_values(plan, cfg):
    exact = {}
    for parameter, model in plan.models():
        for alpha in plan.directions:
            exact[(parameter, alpha, RHO_HAT)] = directional_rho(model, alpha, cfg)
        if plan.include_star:
            pairs = [(0, 1), (0, 2), (1, 2)]
            values = [directional_rho(model.margin(p), Direction.positive(2), cfg) for p in pairs]
            mean = math.fsum(v.value for v in values) / len(values)
            estimate = CoefficientEstimate(mean, values[0].estimate.method)
            exact[(parameter, None, RHO_STAR)] = DirectionalRho(None, estimate, model.family, dict(model.parameters))
    return exact


def run_plan(plan, cfg=None):
    """
    Run every cell of a plan and attach population values.

    Args:
        plan (ReplicationPlan): The plan
        cfg (IntegratorConfig): Integration settings for the population values

    Returns:
        SimulationReport: Identical for identical plans whatever ``plan.workers`` is
    """
    jobs = [(plan, p, model, n) for p, model in plan.models() for n in plan.sizes]
    logger.info("running %d cell(s) x %d replicate(s) on %d worker(s)", len(jobs), plan.replicates, plan.workers)
    if plan.workers > 1:
        with ProcessPoolExecutor(max_workers=plan.workers) as pool:
            results = list(pool.map(_run_cell, jobs))
    else:
        results = [_run_cell(job) for job in jobs]

    cells = tuple(cell for cell_list, _ in results for cell in cell_list)
    gap = max((g for _, g in results), default=0.0)
    if gap > 1e-10:
        logger.warning("decomposed and direct estimators differ by up to %.3g", gap)
    return SimulationReport(plan, cells, _exact_values(plan, cfg), gap)


def run_decomposition_table(plan, cfg=None):
    """
    Run a single-direction plan with margin estimators recorded.

    Returns:
        pandas.DataFrame: Columns parameter, n, one ``rho_minus_*`` mean per margin, and ``rho_hat``
    """
    if len(plan.directions) != 1:
        raise DomainError(f"a decomposition table needs exactly one direction, got {len(plan.directions)}")
    if not plan.decomposition:
        plan = replace(plan, decomposition=True)
    return run_plan(plan, cfg).decomposition_frame()


def convergence_diagnostic(family, parameter, alpha, sizes, replicates=200, seed=20240101, workers=1):
    """
    Spread of the directional estimator along a ladder of sample sizes.

    Args:
        family (str): Copula family
        parameter (float): Family parameter, or None
        alpha (Direction): Direction; its length sets the dimension
        sizes (list of int): At least three sample sizes
        replicates (int): Replicates per size
        seed (int): Master seed

    Returns:
        pandas.DataFrame: Columns n, mean, sd, sqrt_n_sd and sd_ratio (sd at the
        previous size over sd here, NaN on the first row)
    """
    if len(sizes) < 3:
        raise DomainError(f"a convergence ladder needs at least 3 sizes, got {len(sizes)}")
    plan = ReplicationPlan(
        family=family,
        dimension=alpha.d,
        parameters=(parameter,),
        sizes=tuple(sorted(sizes)),
        directions=(alpha,),
        replicates=replicates,
        seed=seed,
        workers=workers,
    )
    report = run_plan(plan)
    rows = []
    previous = None
    for n in plan.sizes:
        cell = report.summary(parameter, n, alpha)
        ratio = previous / cell.sd if previous is not None and cell.sd > 0 else float("nan")
        rows.append({"n": n, "mean": cell.mean, "sd": cell.sd, "sqrt_n_sd": math.sqrt(n) * cell.sd,
                     "sd_ratio": ratio})
        previous = cell.sd
    return pd.DataFrame(rows)
