"""Marginal-likelihood ratios for z, t, chi-squared and F statistics, and the
bounded (truncated) Bayes factor built from them.

Each ``log_ratio_*`` function returns ``log(m1 / m0)`` where ``m1`` is the
marginal density of the statistic when its noncentrality parameter follows a
non-local prior with scale ``tau2`` and ``m0`` is the central density. The
truncated Bayes factor then mixes the two hypotheses with weight ``omega``:

    g(R) = (omega + (1 - omega) R) / ((1 - omega) + omega R)

which is confined to ``[omega / (1 - omega), (1 - omega) / omega]``. With
``a = log((1 - omega) / omega)`` the log Bayes factor lies in ``[-a, a]``.

The ratio functions broadcast over numpy arrays.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from . import specfun

__all__ = [
    "DEFAULT_EFFECT_SIZE",
    "Family",
    "NonLocalScale",
    "ScalePolicy",
    "StatisticObservation",
    "TruncationParams",
    "combined_bf",
    "log_ratio",
    "log_ratio_chi2",
    "log_ratio_f",
    "log_ratio_t",
    "log_ratio_z",
    "log_truncated_bf",
    "log_truncated_bf_from_log_ratio",
    "ratio_chi2",
    "ratio_f",
    "ratio_t",
    "ratio_z",
    "truncated_bf",
]

DEFAULT_EFFECT_SIZE = 0.3

# log(Gamma(2) / Gamma(3/2))
_LOG_G2_OVER_G32 = -math.lgamma(1.5)


class Family(str, enum.Enum):
    """Test statistic family."""

    Z = "z"
    T = "t"
    CHI2 = "chi2"
    F = "f"


@dataclass(frozen=True)
class StatisticObservation:
    """One observed test statistic with its degrees of freedom.

    ``dof1`` is nu for ``T``, k for ``CHI2`` and the numerator degrees of
    freedom for ``F``; ``dof2`` is the F denominator degrees of freedom.
    """

    family: Family
    value: float
    dof1: float | None = None
    dof2: float | None = None

    def __post_init__(self):
        family = Family(self.family)
        object.__setattr__(self, "family", family)
        if not math.isfinite(self.value):
            raise ValueError("statistic value must be finite")
        if family in (Family.CHI2, Family.F) and self.value < 0:
            raise ValueError(f"{family.value} statistic must be non-negative, got {self.value}")
        needs_dof1 = family is not Family.Z
        needs_dof2 = family is Family.F
        if needs_dof1 != (self.dof1 is not None):
            raise ValueError(f"dof1 must be {'set' if needs_dof1 else 'absent'} for family {family.value}")
        if needs_dof2 != (self.dof2 is not None):
            raise ValueError(f"dof2 must be {'set' if needs_dof2 else 'absent'} for family {family.value}")
        for dof in (self.dof1, self.dof2):
            if dof is not None and not dof > 0:
                raise ValueError(f"degrees of freedom must be positive, got {dof}")


@dataclass(frozen=True)
class TruncationParams:
    """Truncation bound ``a`` on each per-partition log Bayes factor and the
    number of partitions ``M``.

    The mixture weight is derived, never stored: ``omega = 1 / (1 + e**a)``.
    """

    a_bound: float
    num_partitions: int = 1

    def __post_init__(self):
        if not (math.isfinite(self.a_bound) and self.a_bound > 0):
            raise ValueError(f"a_bound must be a positive finite number, got {self.a_bound}")
        if int(self.num_partitions) != self.num_partitions or self.num_partitions < 1:
            raise ValueError(f"num_partitions must be a positive integer, got {self.num_partitions}")
        object.__setattr__(self, "num_partitions", int(self.num_partitions))

    @classmethod
    def from_omega(cls, omega: float, num_partitions: int = 1) -> TruncationParams:
        _check_omega(omega)
        return cls(math.log((1.0 - omega) / omega), num_partitions)

    @property
    def omega(self) -> float:
        return 1.0 / (1.0 + math.exp(self.a_bound))


@dataclass(frozen=True)
class NonLocalScale:
    """Scale ``tau2`` of the non-local prior on the noncentrality parameter."""

    tau2: float

    def __post_init__(self):
        if not (math.isfinite(self.tau2) and self.tau2 > 0):
            raise ValueError(f"tau2 must be positive, got {self.tau2}")


@dataclass(frozen=True)
class ScalePolicy:
    """Rule assigning ``tau2`` to a partition of ``n_obs`` observations.

    By default ``tau2 = effect_size**2 * n_obs / 2``, which puts the modes
    ``+-sqrt(2) tau`` of the normal-moment prior at the noncentrality
    ``effect_size * sqrt(n_obs)`` implied by a standardized effect. A fixed
    ``tau2`` overrides the rule.
    """

    effect_size: float = DEFAULT_EFFECT_SIZE
    tau2: float | None = None

    def __post_init__(self):
        if not self.effect_size > 0:
            raise ValueError("effect_size must be positive")
        if self.tau2 is not None and not self.tau2 > 0:
            raise ValueError("tau2 must be positive")

    def tau2_for(self, n_obs):
        n_obs = np.asarray(n_obs, dtype=float)
        if self.tau2 is not None:
            return np.full(n_obs.shape, float(self.tau2))[()]
        return (self.effect_size**2 * n_obs / 2.0)[()]


def _check_omega(omega):
    omega = np.asarray(omega, dtype=float)
    if not np.all((omega > 0.0) & (omega < 0.5)):
        raise specfun.DomainError(f"omega must lie in (0, 1/2), got {omega}")


def _require(condition, message):
    if not np.all(condition):
        raise specfun.DomainError(message)


def _scalar_or_array(value, *args):
    if all(np.ndim(a) == 0 for a in args):
        return float(value)
    return value


def log_ratio_z(z, tau2, ctl=None):
    """``log R`` for a z statistic under the normal-moment prior."""
    z, tau2 = np.asarray(z, dtype=float), np.asarray(tau2, dtype=float)
    _require(tau2 > 0, "tau2 must be positive")
    x = tau2 * z * z / (2.0 * (1.0 + tau2))
    out = -1.5 * np.log1p(tau2) + specfun.log_hyp1f1(1.5, 0.5, x, ctl)
    return _scalar_or_array(out, z, tau2)


def log_ratio_t(t, nu, tau2, ctl=None):
    """``log R`` for a t statistic with ``nu`` degrees of freedom.

    R is the sum of an even term and an odd term in ``t``; the odd term is
    weighted so that the ratio corresponds to the skewed normal-moment prior
    ``J(lambda) * (1 + sign(lambda) / 2)``. R is therefore a proper marginal
    ratio and strictly positive for every ``t``.
    """
    t, nu, tau2 = (np.asarray(v, dtype=float) for v in (t, nu, tau2))
    _require((nu > 0) & (tau2 > 0), "nu and tau2 must be positive")
    y = np.sqrt(tau2) * t / np.sqrt((nu + t * t) * (1.0 + tau2))
    y2 = y * y
    log_even = specfun.log_hyp2f1((nu + 1.0) / 2.0, 1.5, 0.5, y2, ctl)
    log_odd = specfun.log_hyp2f1(nu / 2.0 + 1.0, 2.0, 1.5, y2, ctl)
    log_gratio = (
        specfun.log_gamma(nu / 2.0 + 1.0) - specfun.log_gamma((nu + 1.0) / 2.0) + _LOG_G2_OVER_G32
    )
    with np.errstate(divide="ignore"):
        log_q = np.log(np.abs(y)) + log_gratio + log_odd - log_even
    # Positive t adds to the even term; negative t subtracts (never below half of it).
    pos = np.logaddexp(0.0, log_q)
    with np.errstate(invalid="ignore"):
        neg = np.log1p(-np.exp(np.minimum(log_q, 0.0)))
    log_bracket = np.where(y >= 0, pos, neg)
    if not np.all(np.isfinite(log_bracket)):
        raise specfun.DomainError("t ratio lost positivity; arguments outside the supported range")
    out = -1.5 * np.log1p(tau2) + log_even + log_bracket
    return _scalar_or_array(out, t, nu, tau2)


def log_ratio_chi2(h, k, tau2, ctl=None):
    """``log R`` for a chi-squared statistic with ``k`` degrees of freedom."""
    h, k, tau2 = (np.asarray(v, dtype=float) for v in (h, k, tau2))
    _require(h >= 0, "chi-squared statistic must be non-negative")
    _require((k > 0) & (tau2 > 0), "k and tau2 must be positive")
    x = tau2 * h / (2.0 * (1.0 + tau2))
    out = -(k / 2.0 + 1.0) * np.log1p(tau2) + specfun.log_hyp1f1(k / 2.0 + 1.0, k / 2.0, x, ctl)
    return _scalar_or_array(out, h, k, tau2)


def log_ratio_f(f, a_df, b_df, tau2, ctl=None):
    """``log R`` for an F statistic with ``(a_df, b_df)`` degrees of freedom."""
    f, a_df, b_df, tau2 = (np.asarray(v, dtype=float) for v in (f, a_df, b_df, tau2))
    _require(f >= 0, "F statistic must be non-negative")
    _require((a_df > 0) & (b_df > 0) & (tau2 > 0), "degrees of freedom and tau2 must be positive")
    x = a_df * f * tau2 / ((1.0 + tau2) * (b_df + a_df * f))
    out = -(a_df / 2.0 + 1.0) * np.log1p(tau2) + specfun.log_hyp2f1(
        a_df / 2.0 + 1.0, (a_df + b_df) / 2.0, a_df / 2.0, x, ctl
    )
    return _scalar_or_array(out, f, a_df, b_df, tau2)


def _exp_ratio(log_r):
    with np.errstate(over="ignore"):
        return np.exp(log_r)


def ratio_z(z, tau2, ctl=None):
    return _exp_ratio(log_ratio_z(z, tau2, ctl))


def ratio_t(t, nu, tau2, ctl=None):
    return _exp_ratio(log_ratio_t(t, nu, tau2, ctl))


def ratio_chi2(h, k, tau2, ctl=None):
    return _exp_ratio(log_ratio_chi2(h, k, tau2, ctl))


def ratio_f(f, a_df, b_df, tau2, ctl=None):
    return _exp_ratio(log_ratio_f(f, a_df, b_df, tau2, ctl))


def log_ratio(family, value, dof1=None, dof2=None, tau2=1.0, ctl=None):
    """Dispatch to the ``log_ratio_*`` function for ``family``."""
    family = Family(family)
    if family is Family.Z:
        return log_ratio_z(value, tau2, ctl)
    if family is Family.T:
        return log_ratio_t(value, dof1, tau2, ctl)
    if family is Family.CHI2:
        return log_ratio_chi2(value, dof1, tau2, ctl)
    return log_ratio_f(value, dof1, dof2, tau2, ctl)


def truncated_bf(R, omega):
    """Truncated Bayes factor ``g(R)`` for ``R >= 0`` (``R = inf`` allowed)."""
    _check_omega(omega)
    omega = np.asarray(omega, dtype=float)
    R = np.asarray(R, dtype=float)
    if np.any(np.isnan(R)) or np.any(R < 0):
        raise ValueError("R must be non-negative")
    upper = (1.0 - omega) / omega
    with np.errstate(invalid="ignore"):
        g = (omega + (1.0 - omega) * R) / ((1.0 - omega) + omega * R)
    g = np.where(np.isinf(R), upper, g)
    return _scalar_or_array(g, R, omega)


def log_truncated_bf_from_log_ratio(log_r, a_bound):
    """``log g(R)`` computed from ``log R`` without leaving the log domain.

    With ``omega = 1 / (1 + e**a)``, ``g(R) = (1 + e**a R) / (e**a + R)``.
    ``log_r = -inf`` gives ``-a`` and ``log_r = +inf`` gives ``+a`` exactly.
    """
    log_r = np.asarray(log_r, dtype=float)
    a = np.asarray(a_bound, dtype=float)
    with np.errstate(invalid="ignore"):
        out = np.logaddexp(0.0, a + log_r) - np.logaddexp(a, log_r)
    out = np.where(np.isposinf(log_r), a, out)
    out = np.clip(out, -a, a)
    return _scalar_or_array(out, log_r, a_bound)


def log_truncated_bf(stat: StatisticObservation, scale: NonLocalScale, trunc: TruncationParams, ctl=None):
    """Log truncated Bayes factor of one statistic; lies in ``[-a, a]``."""
    log_r = log_ratio(stat.family, stat.value, stat.dof1, stat.dof2, scale.tau2, ctl)
    return log_truncated_bf_from_log_ratio(log_r, trunc.a_bound)


def combined_bf(per_partition_logs, trunc: TruncationParams) -> float:
    """Log of the product of the per-partition truncated Bayes factors."""
    logs = [float(v) for v in per_partition_logs]
    if len(logs) != trunc.num_partitions:
        raise ValueError(f"expected {trunc.num_partitions} partition values, got {len(logs)}")
    return math.fsum(logs)
