"""Data generators and study definitions for the normal-mean t test, the 2x2
independence chi-squared test and the regression F test.

An :class:`Experiment` knows how to simulate one dataset or a seeded stack
of replicate datasets, how to compute its statistic on partitions of a
dataset, and which effect and sample-size grids define its power study.
"""

from __future__ import annotations

import csv
import io
import itertools
from abc import ABC, abstractmethod
from dataclasses import dataclass

import numpy as np

from . import seeding, statistics
from .bayesfactor import Family, ScalePolicy, StatisticObservation
from .mechanism import Mechanism, min_partition_size

__all__ = [
    "ContingencyChi2",
    "EXPERIMENTS",
    "Experiment",
    "NormalMeanT",
    "NormalMeanZ",
    "PowerRow",
    "RegressionF",
    "format_effect",
    "gen_contingency",
    "gen_contingency_records",
    "gen_normal_mean",
    "gen_regression",
    "get_experiment",
    "power_rows_to_csv",
    "run_power_curve",
]


def _rng(seed):
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


# --- generators -------------------------------------------------------------


def gen_normal_mean(n: int, mu: float, sigma: float, seed) -> np.ndarray:
    """``n`` independent ``N(mu, sigma**2)`` draws."""
    if not sigma > 0:
        raise ValueError("sigma must be positive")
    return _rng(seed).normal(mu, sigma, size=int(n))


def _cell_probs(delta: float) -> np.ndarray:
    if not 0.0 <= delta < 0.25:
        raise ValueError(f"delta must lie in [0, 0.25), got {delta}")
    return np.array([0.25 + delta, 0.25 - delta, 0.25 - delta, 0.25 + delta])


def gen_contingency_records(n: int, delta: float, seed) -> np.ndarray:
    """Cell label ``2 X + Y`` for each of ``n`` records.

    Cells ``(0,0), (0,1), (1,0), (1,1)`` have probabilities
    ``1/4 + delta * (1, -1, -1, 1)``.
    """
    return _rng(seed).choice(4, size=int(n), p=_cell_probs(delta))


def gen_contingency(n: int, delta: float, seed) -> np.ndarray:
    """Counts over the four cells as a 2x2 table (rows X, columns Y)."""
    return np.bincount(gen_contingency_records(n, delta, seed), minlength=4).reshape(2, 2)


def gen_regression(n: int, p: int, beta0: float, beta, sigma: float, seed):
    """Standard-normal covariates ``X`` (n, p) and ``y = beta0 + X beta + N(0, sigma**2)``."""
    if not sigma > 0:
        raise ValueError("sigma must be positive")
    if p < 1:
        raise ValueError("p must be at least 1")
    beta = np.asarray(beta, dtype=float).ravel()
    if beta.size != p:
        raise ValueError(f"beta must have length p={p}")
    rng = _rng(seed)
    X = rng.standard_normal((int(n), p))
    y = beta0 + X @ beta + sigma * rng.standard_normal(int(n))
    return X, y


# --- experiments ----------------------------------------------------------------


def format_effect(effect) -> str:
    """Render an effect for CSV output; vectors are joined with ``:``."""
    if np.ndim(effect) == 0:
        return repr(float(effect))
    return ":".join(repr(float(e)) for e in effect)


class Experiment(ABC):
    """A simulation study for one statistic family."""

    family: Family
    name: str
    n_grid: tuple
    effect_grid: tuple
    mid_effect: object
    null_effect: object

    @property
    def n_regressors(self) -> int:
        return 1

    def min_partition_size(self) -> int:
        return min_partition_size(self.family, self.n_regressors)

    @abstractmethod
    def simulate(self, n: int, effect, rng):
        """One dataset of size ``n``."""

    @abstractmethod
    def stack(self, datasets):
        """Stack replicate datasets into batch arrays."""

    @abstractmethod
    def batch_statistics(self, batch, sizes) -> np.ndarray:
        """Statistic values, shape ``(n_replicates, len(sizes))``; ``nan`` marks degeneracy."""

    @abstractmethod
    def dofs(self, sizes):
        """Degrees of freedom ``(dof1, dof2)`` per partition size (``None`` where unused)."""

    @abstractmethod
    def statistic(self, data) -> StatisticObservation:
        """Statistic of one dataset (or one partition of it)."""

    @abstractmethod
    def n_obs(self, data) -> int:
        """Number of observations in a dataset."""

    @abstractmethod
    def take(self, data, idx):
        """Sub-dataset at observation indices ``idx``."""

    def simulate_batch(self, n: int, effects, master_seed: int, label: str, n_rep: int):
        """Seeded stack of ``n_rep`` datasets; replicate ``r`` uses ``effects[r % len(effects)]``."""
        effects = list(effects)
        data = [
            self.simulate(n, effects[r % len(effects)], seeding.stream(master_seed, label, r))
            for r in range(n_rep)
        ]
        return self.stack(data)

    def degenerate_saturates(self) -> bool:
        """Whether a degenerate partition counts as evidence ``-a`` instead of an error."""
        return False


class _NormalMean(Experiment):
    n_grid = (25, 50, 100, 200, 500)
    effect_grid = tuple(s * i / 100 for i in range(1, 101) for s in (1, -1))
    mid_effect = 0.5
    null_effect = 0.0

    def __init__(self, sigma: float = 1.0):
        if not sigma > 0:
            raise ValueError("sigma must be positive")
        self.sigma = float(sigma)

    def simulate(self, n, effect, rng):
        return gen_normal_mean(n, effect, self.sigma, rng)

    def stack(self, datasets):
        return np.stack(datasets)

    def n_obs(self, data):
        return int(np.asarray(data).size)

    def take(self, data, idx):
        return np.asarray(data)[idx]


class NormalMeanT(_NormalMean):
    """Normal mean with unknown variance, tested with the t statistic."""

    family = Family.T
    name = "t"

    def batch_statistics(self, batch, sizes):
        return statistics.batch_t(batch, sizes)

    def dofs(self, sizes):
        return np.asarray(sizes, dtype=float) - 1.0, None

    def statistic(self, data):
        return statistics.t_statistic(data)


class NormalMeanZ(_NormalMean):
    """Normal mean with known variance, tested with the z statistic."""

    family = Family.Z
    name = "z"

    def batch_statistics(self, batch, sizes):
        return statistics.batch_z(batch, sizes, self.sigma)

    def dofs(self, sizes):
        return None, None

    def statistic(self, data):
        return statistics.z_statistic(data, self.sigma)


class ContingencyChi2(Experiment):
    """Independence of two binary features, tested with the Pearson statistic.

    Datasets are arrays of cell labels ``2 X + Y``.
    """

    family = Family.CHI2
    name = "chi2"
    n_grid = (500, 1000, 1500, 2000)
    effect_grid = (0.05, 0.10, 0.15, 0.20)
    mid_effect = 0.10
    null_effect = 0.0

    def simulate(self, n, effect, rng):
        return gen_contingency_records(n, effect, rng)

    def stack(self, datasets):
        return np.stack(datasets)

    def batch_statistics(self, batch, sizes):
        return statistics.batch_chi2(batch, sizes)

    def dofs(self, sizes):
        return np.ones(len(sizes)), None

    def statistic(self, data):
        return statistics.chi2_statistic(np.bincount(np.asarray(data), minlength=4))

    def n_obs(self, data):
        return int(np.asarray(data).size)

    def take(self, data, idx):
        return np.asarray(data)[idx]

    def degenerate_saturates(self):
        return True

    @staticmethod
    def records_from_counts(counts) -> np.ndarray:
        """Expand four cell counts into one label per record, in cell order."""
        counts = np.asarray(counts, dtype=np.int64).ravel()
        if counts.size != 4 or np.any(counts < 0):
            raise ValueError("expected four non-negative counts")
        return np.repeat(np.arange(4), counts)


class RegressionF(Experiment):
    """Overall significance of a linear regression, tested with the F statistic.

    Datasets are ``(X, y)`` pairs.
    """

    family = Family.F
    name = "f"
    n_grid = (50, 100, 200, 500)
    coefficient_levels = (0.25, -0.25, 0.5, -0.5, 0.75, -0.75, 1.0, -1.0)

    def __init__(self, p: int = 2, beta0: float = 1.0, sigma: float = 0.1):
        if p < 1:
            raise ValueError("p must be at least 1")
        if not sigma > 0:
            raise ValueError("sigma must be positive")
        self.p = int(p)
        self.beta0 = float(beta0)
        self.sigma = float(sigma)
        self.effect_grid = tuple(itertools.product(self.coefficient_levels, repeat=self.p))
        self.mid_effect = (0.5,) * self.p
        self.null_effect = (0.0,) * self.p

    @property
    def n_regressors(self):
        return self.p

    def simulate(self, n, effect, rng):
        return gen_regression(n, self.p, self.beta0, effect, self.sigma, rng)

    def stack(self, datasets):
        return np.stack([d[0] for d in datasets]), np.stack([d[1] for d in datasets])

    def batch_statistics(self, batch, sizes):
        X, y = batch
        return statistics.batch_f(X, y, sizes)

    def dofs(self, sizes):
        sizes = np.asarray(sizes, dtype=float)
        return np.full(sizes.shape, float(self.p)), sizes - self.p - 1.0

    def statistic(self, data):
        X, y = data
        return statistics.f_statistic(X, y)

    def n_obs(self, data):
        return int(np.asarray(data[1]).size)

    def take(self, data, idx):
        return np.asarray(data[0])[idx], np.asarray(data[1])[idx]


EXPERIMENTS = {"t": NormalMeanT, "z": NormalMeanZ, "chi2": ContingencyChi2, "f": RegressionF}


def get_experiment(name: str, **kwargs) -> Experiment:
    try:
        return EXPERIMENTS[name](**kwargs)
    except KeyError:
        raise ValueError(f"unknown experiment {name!r}; choose from {sorted(EXPERIMENTS)}") from None


# --- power curves -----------------------------------------------------------------

POWER_CSV_HEADER = ("n", "effect", "pipeline", "power", "cutoff", "mc_se", "seed")


@dataclass(frozen=True)
class PowerRow:
    n: int
    effect: str
    pipeline: str
    power: float
    cutoff: float
    mc_se: float
    seed: int
    n_partitions: int | None = None
    a_bound: float | None = None


def run_power_curve(
    experiment: Experiment,
    spec,
    n_list=None,
    epsilon: float = 1.0,
    fixed=None,
    m_grid=range(2, 11),
    a_grid=range(1, 6),
    effect_settings=None,
    mechanism=Mechanism.LAPLACE,
    policy: ScalePolicy | None = None,
    n_jobs: int = 1,
) -> list[PowerRow]:
    """Private and non-private power at each sample size.

    Parameters
    ----------
    experiment : Experiment
    spec : CalibrationSpec
        Size, replicate count and master seed.
    n_list : sequence of int, optional
        Defaults to the experiment's sample-size grid.
    fixed : (int, float), optional
        Use this ``(M, a)`` at every ``n``. Otherwise ``(M, a)`` is tuned per
        ``n`` over ``m_grid x a_grid`` on replicate streams separate from the
        ones used for the reported powers.
    effect_settings : dict, optional
        Maps an effect label to the effects averaged for that row. Defaults
        to ``{"grid": experiment.effect_grid}``.

    Returns
    -------
    list of PowerRow
        Ordered by ``n``, then effect setting, then pipeline.
    """
    from .calibration import (
        DataSource,
        NonPrivatePipeline,
        PrivatePipeline,
        calibrate_cutoff,
        estimate_power,
        mc_standard_error,
        tune_hyperparams,
    )

    policy = policy or ScalePolicy()
    n_list = sorted(int(n) for n in (experiment.n_grid if n_list is None else n_list))
    if effect_settings is None:
        effect_settings = {"grid": experiment.effect_grid}
    rows = []
    for n in n_list:
        if fixed is None:
            tuned = tune_hyperparams(
                experiment, n, m_grid, a_grid, epsilon, spec,
                mechanism=mechanism, policy=policy, n_jobs=n_jobs, labels=("tune-null", "tune-alt"),
            )
            m, a = tuned.n_partitions, tuned.a_bound
        else:
            m, a = int(fixed[0]), float(fixed[1])
        pipelines = {
            "nonprivate": NonPrivatePipeline(experiment, n, policy),
            "private": PrivatePipeline(experiment, n, m, a, epsilon, mechanism, policy),
        }
        null_src = DataSource.null(experiment, n)
        cutoffs = {name: calibrate_cutoff(null_src, pipe, spec) for name, pipe in pipelines.items()}
        for label in sorted(effect_settings):
            alt_src = DataSource.alternative(experiment, n, effect_settings[label], label="alt-" + label)
            for name in sorted(pipelines):
                power = estimate_power(alt_src, pipelines[name], cutoffs[name], spec)
                rows.append(
                    PowerRow(
                        n, label, name, power, cutoffs[name], mc_standard_error(power, spec.n_mc),
                        spec.master_seed,
                        m if name == "private" else None,
                        a if name == "private" else None,
                    )
                )
    return rows


def _fmt10(x: float) -> str:
    return f"{x:.10g}"


def power_rows_to_csv(rows) -> str:
    """Render rows with the ``n,effect,pipeline,power,cutoff,mc_se,seed`` header."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(POWER_CSV_HEADER)
    for r in rows:
        writer.writerow([r.n, r.effect, r.pipeline, _fmt10(r.power), _fmt10(r.cutoff), _fmt10(r.mc_se), r.seed])
    return buf.getvalue()
