"""Monte Carlo cutoffs, power estimates and power-maximizing choice of ``(M, a)``.

Replicate ``r`` of a data source always draws from the stream
``(master_seed, label, r)`` and its noise from ``(master_seed, "noise-" + label, r)``.
The same replicates therefore serve every ``(M, a)`` cell of a tuning grid
(common random numbers), and results do not depend on thread scheduling.
"""

from __future__ import annotations

import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import seeding
from .bayesfactor import ScalePolicy, TruncationParams, log_ratio, log_truncated_bf_from_log_ratio
from .mechanism import (
    InfeasiblePartitionError,
    Mechanism,
    PartitionPlan,
    make_partition,
    noise_scale,
    standard_noise,
)

__all__ = [
    "CalibrationSpec",
    "DataSource",
    "NonPrivatePipeline",
    "PowerSurface",
    "PrivatePipeline",
    "RegimeWarning",
    "ReplicateError",
    "TuningError",
    "TuningResult",
    "calibrate_cutoff",
    "estimate_power",
    "mc_standard_error",
    "quantile_cutoff",
    "simulate_statistics",
    "tune_hyperparams",
]


class ReplicateError(RuntimeError):
    """A Monte Carlo replicate could not be evaluated.

    ``master_seed``, ``label`` and ``replicate`` identify its random stream.
    """

    def __init__(self, message, master_seed, label, replicate):
        super().__init__(f"{message} (master_seed={master_seed}, stream={label!r}, replicate={replicate})")
        self.master_seed = master_seed
        self.label = label
        self.replicate = replicate


class TuningError(RuntimeError):
    """No cell of the tuning grid is feasible."""


class RegimeWarning(UserWarning):
    """A grid uses more partitions than the asymptotic regime allows."""


@dataclass(frozen=True)
class CalibrationSpec:
    alpha: float = 0.05
    n_mc: int = 1000
    master_seed: int = 0

    def __post_init__(self):
        if not 0.0 < self.alpha < 1.0:
            raise ValueError(f"alpha must lie in (0, 1), got {self.alpha}")
        if int(self.n_mc) != self.n_mc or self.n_mc < 100:
            raise ValueError(f"n_mc must be an integer >= 100, got {self.n_mc}")
        object.__setattr__(self, "n_mc", int(self.n_mc))
        object.__setattr__(self, "master_seed", seeding.check_seed(self.master_seed))


@dataclass(frozen=True)
class DataSource:
    """Seeded replicate datasets of size ``n``; replicate ``r`` uses ``effects[r % len(effects)]``."""

    experiment: object
    n: int
    effects: tuple
    label: str

    @classmethod
    def null(cls, experiment, n, label="null"):
        return cls(experiment, n, (experiment.null_effect,), label)

    @classmethod
    def alternative(cls, experiment, n, effects=None, label="alt"):
        effects = experiment.effect_grid if effects is None else effects
        return cls(experiment, n, tuple(effects), label)

    def batch(self, spec: CalibrationSpec):
        return self.experiment.simulate_batch(self.n, self.effects, spec.master_seed, self.label, spec.n_mc)

    def noise(self, spec: CalibrationSpec, mechanism) -> np.ndarray:
        return standard_noise(mechanism, spec.master_seed, range(spec.n_mc), label="noise-" + self.label)


class PrivatePipeline:
    """Partition, per-partition truncated log Bayes factors, average, add noise."""

    def __init__(self, experiment, n, n_partitions, a_bound, epsilon, mechanism=Mechanism.LAPLACE, policy=None):
        self.experiment = experiment
        self.n = int(n)
        self.plan: PartitionPlan = make_partition(self.n, int(n_partitions), experiment.family, experiment.n_regressors)
        self.trunc = TruncationParams(float(a_bound), int(n_partitions))
        if not (epsilon > 0 and math.isfinite(epsilon)):
            raise ValueError(f"epsilon must be positive and finite, got {epsilon}")
        self.epsilon = float(epsilon)
        self.mechanism = Mechanism(mechanism)
        self.policy = policy or ScalePolicy()

    @property
    def noise_scale(self) -> float:
        return noise_scale(self.trunc, self.epsilon)

    def log_ratios(self, batch, spec=None, label="") -> np.ndarray:
        """Per-partition ``log R``, shape ``(n_replicates, M)``."""
        return partition_log_ratios(self.experiment, self.plan.sizes, self.policy, batch, spec, label)

    def evidence(self, log_r) -> np.ndarray:
        """Average truncated log Bayes factor per replicate."""
        return log_truncated_bf_from_log_ratio(log_r, self.trunc.a_bound).mean(axis=1)

    def statistics(self, batch, noise, spec=None, label="") -> np.ndarray:
        """Privatized ``H`` per replicate given unit-scale ``noise``."""
        return self.evidence(self.log_ratios(batch, spec, label)) + self.noise_scale * noise


class NonPrivatePipeline:
    """Full-data statistic, untruncated ``log R``, no noise."""

    def __init__(self, experiment, n, policy=None):
        self.experiment = experiment
        self.n = int(n)
        self.policy = policy or ScalePolicy()

    def statistics(self, batch, noise=None, spec=None, label="") -> np.ndarray:
        return partition_log_ratios(self.experiment, (self.n,), self.policy, batch, spec, label)[:, 0]


def partition_log_ratios(experiment, sizes, policy, batch, spec=None, label=""):
    sizes = np.asarray(sizes, dtype=np.intp)
    values = experiment.batch_statistics(batch, sizes)
    bad = ~np.isfinite(values)
    if bad.any() and not experiment.degenerate_saturates():
        r = int(np.flatnonzero(bad.any(axis=1))[0])
        raise ReplicateError("degenerate partition statistic", spec.master_seed if spec else None, label, r)
    dof1, dof2 = experiment.dofs(sizes)
    tau2 = policy.tau2_for(sizes)
    out = np.full(values.shape, -np.inf)
    rows, cols = np.nonzero(~bad)
    if rows.size:
        out[rows, cols] = log_ratio(
            experiment.family,
            values[rows, cols],
            None if dof1 is None else dof1[cols],
            None if dof2 is None else dof2[cols],
            tau2=np.asarray(tau2)[cols] if np.ndim(tau2) else tau2,
        )
    return out


def quantile_cutoff(values, alpha: float) -> float:
    """Order statistic ``ceil((1 - alpha) n)`` (1-based) of ``values``."""
    values = np.sort(np.asarray(values, dtype=float))
    k = math.ceil((1.0 - alpha) * values.size - 1e-9)
    return float(values[max(k, 1) - 1])


def mc_standard_error(p: float, n_mc: int) -> float:
    return math.sqrt(max(p * (1.0 - p), 0.0) / n_mc)


def _noise_for(pipeline, source, spec):
    if isinstance(pipeline, PrivatePipeline):
        return source.noise(spec, pipeline.mechanism)
    return None


def simulate_statistics(source: DataSource, pipeline, spec: CalibrationSpec) -> np.ndarray:
    """Monte Carlo sample of the test statistic under ``source``."""
    return pipeline.statistics(source.batch(spec), _noise_for(pipeline, source, spec), spec, source.label)


def calibrate_cutoff(null_source: DataSource, pipeline, spec: CalibrationSpec) -> float:
    """Empirical ``1 - alpha`` quantile of the statistic over ``spec.n_mc`` null replicates."""
    return quantile_cutoff(simulate_statistics(null_source, pipeline, spec), spec.alpha)


def estimate_power(alt_source: DataSource, pipeline, cutoff: float, spec: CalibrationSpec) -> float:
    """Fraction of replicates with statistic ``>= cutoff``, averaged uniformly over effects."""
    if not math.isfinite(cutoff):
        raise ValueError("cutoff must be finite")
    h = simulate_statistics(alt_source, pipeline, spec)
    return float(np.count_nonzero(h >= cutoff)) / h.size


@dataclass
class PowerSurface:
    """Power and cutoff over an ``(M, a)`` grid; infeasible cells are ``nan``."""

    m_grid: list
    a_grid: list
    effect_grid: list
    power: np.ndarray
    cutoffs: np.ndarray
    n_mc: int
    mc_se: np.ndarray = field(init=False)

    def __post_init__(self):
        self.power = np.asarray(self.power, dtype=float)
        self.cutoffs = np.asarray(self.cutoffs, dtype=float)
        shape = (len(self.m_grid), len(self.a_grid))
        if self.power.shape != shape or self.cutoffs.shape != shape:
            raise ValueError("power and cutoffs must have shape (len(m_grid), len(a_grid))")
        finite = self.power[np.isfinite(self.power)]
        if np.any((finite < 0) | (finite > 1)):
            raise ValueError("power entries must lie in [0, 1]")
        self.mc_se = np.sqrt(self.power * (1.0 - self.power) / self.n_mc)

    def argmax(self):
        """Best ``(M, a)``; ties go to smaller M, then smaller a."""
        best = None
        for i, m in sorted(enumerate(self.m_grid), key=lambda p: p[1]):
            for j, a in sorted(enumerate(self.a_grid), key=lambda p: p[1]):
                value = self.power[i, j]
                if np.isnan(value):
                    continue
                if best is None or value > best[0]:
                    best = (value, m, a)
        if best is None:
            raise TuningError("every (M, a) cell is infeasible")
        return best[1], best[2]

    def rows(self):
        """``(M, a, cutoff, power, mc_se)`` in grid order."""
        for i, m in enumerate(self.m_grid):
            for j, a in enumerate(self.a_grid):
                yield m, a, self.cutoffs[i, j], self.power[i, j], self.mc_se[i, j]


@dataclass(frozen=True)
class TuningResult:
    n_partitions: int
    a_bound: float
    surface: PowerSurface


def _validate_grid(name, grid):
    grid = list(grid)
    if not grid:
        raise ValueError(f"{name} must not be empty")
    if len(set(grid)) != len(grid):
        raise ValueError(f"{name} has duplicate entries")
    return grid


def tune_hyperparams(
    experiment,
    n: int,
    m_grid,
    a_grid,
    epsilon: float,
    spec: CalibrationSpec,
    effects=None,
    mechanism=Mechanism.LAPLACE,
    policy: ScalePolicy | None = None,
    n_jobs: int = 1,
    labels=("null", "alt"),
) -> TuningResult:
    """Calibrate and estimate power for every ``(M, a)`` and return the best cell.

    Cells whose partitions would be too small get ``nan`` power and are
    skipped by the argmax.
    """
    m_grid = [int(m) for m in _validate_grid("m_grid", m_grid)]
    a_grid = [float(a) for a in _validate_grid("a_grid", a_grid)]
    if any(m < 1 for m in m_grid) or any(not a > 0 for a in a_grid):
        raise ValueError("grid entries must be positive")
    policy = policy or ScalePolicy()
    mechanism = Mechanism(mechanism)
    if max(m_grid) > n**0.9:
        warnings.warn(
            f"M up to {max(m_grid)} exceeds n**0.9 = {n**0.9:.1f}; outside the regime where the test is consistent",
            RegimeWarning,
            stacklevel=2,
        )

    null_src = DataSource.null(experiment, n, labels[0])
    alt_src = DataSource.alternative(experiment, n, effects, labels[1])
    null_batch, alt_batch = null_src.batch(spec), alt_src.batch(spec)
    null_noise, alt_noise = null_src.noise(spec, mechanism), alt_src.noise(spec, mechanism)

    def cell_row(m):
        power = np.full(len(a_grid), np.nan)
        cutoffs = np.full(len(a_grid), np.nan)
        try:
            pipe = PrivatePipeline(experiment, n, m, a_grid[0], epsilon, mechanism, policy)
        except InfeasiblePartitionError:
            return power, cutoffs
        lr0 = pipe.log_ratios(null_batch, spec, null_src.label)
        lr1 = pipe.log_ratios(alt_batch, spec, alt_src.label)
        for j, a in enumerate(a_grid):
            scale = 2.0 * a / m / epsilon
            h0 = log_truncated_bf_from_log_ratio(lr0, a).mean(axis=1) + scale * null_noise
            h1 = log_truncated_bf_from_log_ratio(lr1, a).mean(axis=1) + scale * alt_noise
            cutoffs[j] = quantile_cutoff(h0, spec.alpha)
            power[j] = np.count_nonzero(h1 >= cutoffs[j]) / spec.n_mc
        return power, cutoffs

    if n_jobs == 1:
        results = [cell_row(m) for m in m_grid]
    else:
        with ThreadPoolExecutor(max_workers=None if n_jobs < 1 else n_jobs) as pool:
            results = list(pool.map(cell_row, m_grid))

    surface = PowerSurface(
        m_grid=m_grid,
        a_grid=a_grid,
        effect_grid=list(alt_src.effects),
        power=np.array([r[0] for r in results]),
        cutoffs=np.array([r[1] for r in results]),
        n_mc=spec.n_mc,
    )
    best_m, best_a = surface.argmax()
    return TuningResult(best_m, best_a, surface)
