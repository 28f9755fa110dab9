"""Sub-sample-and-aggregate privatization of the average truncated log Bayes factor.

The data are split at random into ``M`` near-equal partitions, a test
statistic is computed on each, and the per-partition log Bayes factors,
each confined to ``[-a, a]``, are averaged. Changing one record moves at
most one partition, so the average has global sensitivity ``2 a / M`` and
additive Laplace or Gaussian noise with scale ``2 a / (M epsilon)`` makes
the released value ``H = f + noise`` private.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from . import seeding
from .bayesfactor import (
    Family,
    NonLocalScale,
    ScalePolicy,
    StatisticObservation,
    TruncationParams,
    combined_bf,
    log_truncated_bf,
)
from .statistics import DegenerateSampleError

__all__ = [
    "BoundsError",
    "InfeasiblePartitionError",
    "Mechanism",
    "PartitionPlan",
    "PrivacyConfig",
    "PrivateTestOutcome",
    "avg_log_bf",
    "decide",
    "make_partition",
    "min_partition_size",
    "noise_scale",
    "partition_evidence",
    "partition_indices",
    "privatize",
    "sensitivity",
    "standard_noise",
]

# Slack allowed when checking |f| <= a.
_BOUND_SLACK = 1e-12


class InfeasiblePartitionError(ValueError):
    """Too few observations for the requested number of partitions."""


class BoundsError(ValueError):
    """An average log Bayes factor lies outside ``[-a, a]``."""


class Mechanism(str, enum.Enum):
    LAPLACE = "laplace"
    GAUSSIAN = "gaussian"


def min_partition_size(family, n_regressors: int = 1) -> int:
    """Smallest partition on which the family's statistic is defined."""
    family = Family(family)
    if family is Family.T:
        return 2
    if family is Family.F:
        return n_regressors + 2
    return 1


@dataclass(frozen=True)
class PartitionPlan:
    """Near-equal partition sizes; the first ``n mod M`` partitions get one extra."""

    total_n: int
    sizes: tuple

    def __post_init__(self):
        sizes = tuple(int(s) for s in self.sizes)
        object.__setattr__(self, "sizes", sizes)
        if not sizes or min(sizes) < 1:
            raise ValueError("partition sizes must be positive")
        if sum(sizes) != self.total_n:
            raise ValueError("partition sizes must sum to total_n")
        if max(sizes) - min(sizes) > 1:
            raise ValueError("partition sizes must differ by at most one")

    @property
    def num_partitions(self) -> int:
        return len(self.sizes)


def make_partition(n: int, M: int, family=Family.Z, n_regressors: int = 1) -> PartitionPlan:
    """Split ``n`` observations into ``M`` near-equal partitions.

    >>> make_partition(10, 3).sizes
    (4, 3, 3)
    """
    if n < 1 or M < 1:
        raise ValueError("n and M must be positive")
    smallest = min_partition_size(family, n_regressors)
    if n < M * smallest:
        raise InfeasiblePartitionError(
            f"n={n} cannot be split into M={M} partitions of at least {smallest} observations"
        )
    q, r = divmod(n, M)
    return PartitionPlan(n, tuple(q + 1 if i < r else q for i in range(M)))


def partition_indices(plan: PartitionPlan, seed: int) -> list[np.ndarray]:
    """Shuffle ``0..n-1`` with the seeded partition stream and cut contiguous blocks."""
    perm = seeding.stream(seed, "partition").permutation(plan.total_n)
    cuts = np.cumsum(plan.sizes)[:-1]
    return np.split(perm, cuts)


@dataclass(frozen=True)
class PrivacyConfig:
    """Privacy budget, noise family and the seed of the noise stream."""

    epsilon: float
    mechanism: Mechanism = Mechanism.LAPLACE
    seed: int = 0

    def __post_init__(self):
        if not (self.epsilon > 0 and math.isfinite(self.epsilon)):
            raise ValueError(f"epsilon must be positive and finite, got {self.epsilon}")
        object.__setattr__(self, "mechanism", Mechanism(self.mechanism))
        object.__setattr__(self, "seed", seeding.check_seed(self.seed))


@dataclass(frozen=True)
class PrivateTestOutcome:
    avg_log_bf: float
    noise: float
    privatized: float
    cutoff: float = math.nan
    reject: bool = False


def sensitivity(trunc: TruncationParams) -> float:
    """Global sensitivity ``2 a / M`` of the average truncated log Bayes factor."""
    return 2.0 * trunc.a_bound / trunc.num_partitions


def noise_scale(trunc: TruncationParams, epsilon: float) -> float:
    """Laplace scale, or Gaussian standard deviation, ``GS / epsilon``."""
    return sensitivity(trunc) / epsilon


def standard_noise(mechanism, seed: int, counters, label: str = "noise") -> np.ndarray:
    """Unit-scale noise draws, one independent stream per counter value."""
    mechanism = Mechanism(mechanism)
    out = np.empty(len(counters))
    for i, c in enumerate(counters):
        rng = seeding.stream(seed, label, c)
        out[i] = rng.laplace(0.0, 1.0) if mechanism is Mechanism.LAPLACE else rng.standard_normal()
    return out


def privatize(f_value: float, trunc: TruncationParams, privacy: PrivacyConfig, counter: int = 0) -> PrivateTestOutcome:
    """Add mechanism noise to ``f_value``.

    The draw depends only on ``privacy.seed`` and ``counter``.
    """
    if not abs(f_value) <= trunc.a_bound + _BOUND_SLACK:
        raise BoundsError(f"|f| = {abs(f_value)} exceeds a = {trunc.a_bound}")
    f_value = float(f_value)
    draw = float(standard_noise(privacy.mechanism, privacy.seed, [counter])[0] * noise_scale(trunc, privacy.epsilon))
    privatized = f_value + draw
    # record the realized perturbation so privatized - f == noise holds exactly
    return PrivateTestOutcome(f_value, privatized - f_value, privatized)


def decide(privatized: float, cutoff: float) -> bool:
    """Reject the null iff ``privatized >= cutoff``."""
    if not (math.isfinite(privatized) and math.isfinite(cutoff)):
        raise ValueError("privatized value and cutoff must be finite")
    return bool(privatized >= cutoff)


def avg_log_bf(per_partition_stats, sizes, policy: ScalePolicy, trunc: TruncationParams) -> float:
    """Average over partitions of the truncated log Bayes factor.

    ``sizes`` gives each partition's observation count, which sets its
    ``tau2`` through ``policy``.
    """
    stats = list(per_partition_stats)
    if len(stats) != trunc.num_partitions or len(sizes) != trunc.num_partitions:
        raise ValueError(f"expected {trunc.num_partitions} partitions, got {len(stats)}")
    logs = []
    for stat, n_i in zip(stats, sizes):
        if not isinstance(stat, StatisticObservation):
            raise TypeError("per_partition_stats must hold StatisticObservation values")
        logs.append(log_truncated_bf(stat, NonLocalScale(float(policy.tau2_for(n_i))), trunc))
    f = math.fsum(logs) / trunc.num_partitions
    return min(max(f, -trunc.a_bound), trunc.a_bound)


def partition_evidence(data, experiment, trunc: TruncationParams, policy: ScalePolicy, seed: int) -> float:
    """Average truncated log Bayes factor of a raw dataset.

    The observations are shuffled with the seeded partition stream and cut
    into ``trunc.num_partitions`` near-equal blocks; each block's statistic
    is computed here from the raw records. A degenerate block counts as
    ``-a`` when the experiment allows it (sparse contingency tables) and
    raises otherwise.
    """
    n = experiment.n_obs(data)
    plan = make_partition(n, trunc.num_partitions, experiment.family, experiment.n_regressors)
    logs = []
    for block in partition_indices(plan, seed):
        try:
            stat = experiment.statistic(experiment.take(data, block))
        except DegenerateSampleError:
            if not experiment.degenerate_saturates():
                raise
            logs.append(-trunc.a_bound)
            continue
        logs.append(log_truncated_bf(stat, NonLocalScale(float(policy.tau2_for(block.size))), trunc))
    f = combined_bf(logs, trunc) / trunc.num_partitions
    return min(max(f, -trunc.a_bound), trunc.a_bound)
