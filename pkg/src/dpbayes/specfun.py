"""Gamma-family and hypergeometric kernels behind the Bayes factor closed forms.

The hypergeometric series are summed with a running scale factor so that
arguments up to several hundred do not overflow; callers that only need the
logarithm should use :func:`log_hyp1f1` / :func:`log_hyp2f1`, which never
leave the log domain.

All functions broadcast over numpy arrays and return a Python ``float`` when
every argument is a scalar.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy import special

__all__ = [
    "ConvergenceError",
    "DEFAULT_CONTROL",
    "DomainError",
    "SeriesControl",
    "SeriesPrecisionWarning",
    "hyp1f1",
    "hyp2f1",
    "log_gamma",
    "log_hyp1f1",
    "log_hyp2f1",
]

# Rescale the running term once it passes this magnitude.
_RESCALE_AT = 1e250
# Consecutive small terms required before a series is declared converged.
_CONSECUTIVE_SMALL = 3
# Euler transform is used above this argument when c - a - b < 0.
_EULER_THRESHOLD = 0.9
# Cancellation (largest |term| / |sum|) beyond which a precision warning is raised.
_CANCELLATION_WARN = 1e3


class DomainError(ValueError):
    """Argument outside the domain where the function is defined or supported."""


class ConvergenceError(ArithmeticError):
    """A series did not converge within ``SeriesControl.max_terms`` terms.

    Attributes
    ----------
    partial_value : float or ndarray
        Log of the absolute partial sum reached when the budget ran out.
    n_terms : int
        Number of terms that were summed.
    """

    def __init__(self, message, partial_value, n_terms):
        super().__init__(message)
        self.partial_value = partial_value
        self.n_terms = n_terms


class SeriesPrecisionWarning(RuntimeWarning):
    """Raised when a series result may carry fewer digits than requested."""


@dataclass(frozen=True)
class SeriesControl:
    """Stopping rule for hypergeometric series.

    A series stops once ``|term| / |partial sum| < rel_tolerance`` holds for
    three consecutive terms, or fails after ``max_terms`` terms.
    """

    rel_tolerance: float = 1e-13
    max_terms: int = 10_000

    def __post_init__(self):
        if not (0.0 < self.rel_tolerance < 1e-6):
            raise ValueError(f"rel_tolerance must lie in (0, 1e-6), got {self.rel_tolerance}")
        if int(self.max_terms) != self.max_terms or self.max_terms < 100:
            raise ValueError(f"max_terms must be an integer >= 100, got {self.max_terms}")


DEFAULT_CONTROL = SeriesControl()


def _is_scalar(*args):
    return all(np.ndim(a) == 0 for a in args)


def _out(value, scalar):
    if scalar:
        return float(np.asarray(value).reshape(()))
    return value


def _nonpositive_integer(v):
    return (v <= 0) & (v == np.round(v))


def log_gamma(x):
    """Natural log of the gamma function for positive, finite ``x``.

    >>> log_gamma(1.0)
    0.0
    """
    arr = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(arr)) or np.any(arr <= 0):
        raise DomainError("log_gamma requires finite x > 0")
    return _out(special.gammaln(arr), np.ndim(x) == 0)


def _log_series(upper, lower, x, ctl):
    """Sum ``sum_i prod(upper)_i / prod(lower)_i * x**i / i!`` elementwise.

    Returns ``(sign, log_abs, log_cancellation)`` arrays, where the last entry
    is ``log(max|term| / |sum|)`` and measures digits lost to cancellation.
    """
    arrays = np.broadcast_arrays(*[np.asarray(v, dtype=float) for v in (*upper, *lower, x)])
    shape = arrays[0].shape
    flat = [a.ravel().copy() for a in arrays]
    up = flat[: len(upper)]
    lo = flat[len(upper) : len(upper) + len(lower)]
    xs = flat[-1]
    size = xs.size

    total = np.ones(size)
    term = np.ones(size)
    peak = np.ones(size)
    log_scale = np.zeros(size)
    small = np.zeros(size, dtype=int)
    active = np.arange(size)
    tol = ctl.rel_tolerance

    n = 0
    while active.size:
        if n >= ctl.max_terms:
            partial = np.log(np.abs(total)) + log_scale
            raise ConvergenceError(
                f"hypergeometric series did not converge within {ctl.max_terms} terms",
                partial_value=_out(partial.reshape(shape), shape == ()),
                n_terms=n,
            )
        ratio = xs[active] / (n + 1.0)
        for u in up:
            ratio = ratio * (u[active] + n)
        for v in lo:
            ratio = ratio / (v[active] + n)
        t = term[active] * ratio
        s = total[active] + t
        at = np.abs(t)
        p = np.maximum(peak[active], at)

        big = at > _RESCALE_AT
        if np.any(big):
            f = np.where(big, at, 1.0)
            t = t / f
            s = s / f
            p = p / f
            log_scale[active] += np.log(f)

        term[active] = t
        total[active] = s
        peak[active] = p
        converged = np.abs(t) <= tol * np.abs(s)
        small[active] = np.where(converged, small[active] + 1, 0)
        active = active[small[active] < _CONSECUTIVE_SMALL]
        n += 1

    with np.errstate(divide="ignore"):
        log_abs = np.log(np.abs(total)) + log_scale
        log_cancel = np.log(peak) - np.log(np.abs(total))
    return (
        np.sign(total).reshape(shape),
        log_abs.reshape(shape),
        log_cancel.reshape(shape),
    )


def _signed_log_hyp1f1(a, b, x, ctl):
    a, b, x = np.broadcast_arrays(*(np.asarray(v, dtype=float) for v in (a, b, x)))
    if np.any(_nonpositive_integer(b)):
        raise DomainError("hyp1f1 is undefined for b a non-positive integer")
    if not np.all(np.isfinite(x)):
        raise DomainError("hyp1f1 requires finite x")
    neg = x < 0
    # Kummer's transformation keeps the summed series free of alternation.
    a_eff = np.where(neg, b - a, a)
    sign, log_abs, _ = _log_series((a_eff,), (b,), np.abs(x), ctl)
    return sign, np.where(neg, log_abs + x, log_abs)


def hyp1f1(a, b, x, ctl: SeriesControl | None = None):
    """Kummer confluent hypergeometric function 1F1(a; b; x).

    Parameters
    ----------
    a, b, x : float or array_like
        Series parameters and argument; ``b`` must not be a non-positive
        integer.
    ctl : SeriesControl, optional
        Stopping rule; defaults to ``DEFAULT_CONTROL``.

    Returns
    -------
    float or ndarray
        ``inf`` only if the true value exceeds the double range; use
        :func:`log_hyp1f1` in that regime.
    """
    ctl = ctl or DEFAULT_CONTROL
    sign, log_abs = _signed_log_hyp1f1(a, b, x, ctl)
    with np.errstate(over="ignore"):
        value = sign * np.exp(log_abs)
    return _out(value, _is_scalar(a, b, x))


def log_hyp1f1(a, b, x, ctl: SeriesControl | None = None):
    """Logarithm of 1F1(a; b; x); the function value must be positive."""
    ctl = ctl or DEFAULT_CONTROL
    sign, log_abs = _signed_log_hyp1f1(a, b, x, ctl)
    if np.any(sign <= 0):
        raise DomainError("log_hyp1f1 requires a positive function value")
    return _out(log_abs, _is_scalar(a, b, x))


def _signed_log_hyp2f1(a, b, c, x, ctl):
    a, b, c, x = np.broadcast_arrays(*(np.asarray(v, dtype=float) for v in (a, b, c, x)))
    if np.any(_nonpositive_integer(c)):
        raise DomainError("hyp2f1 is undefined for c a non-positive integer")
    if not np.all(np.isfinite(x)) or np.any(x >= 1.0) or np.any(x <= -1.0):
        raise DomainError("hyp2f1 requires -1 < x < 1")

    excess = c - a - b
    euler = (x > _EULER_THRESHOLD) & (excess < 0)
    ua = np.where(euler, c - a, a)
    ub = np.where(euler, c - b, b)
    sign, log_abs, log_cancel = _log_series((ua, ub), (c,), x, ctl)
    with np.errstate(divide="ignore", invalid="ignore"):
        prefactor = np.where(euler, excess * np.log1p(-x), 0.0)
    log_abs = log_abs + prefactor

    lossy = euler & (log_cancel > math.log(_CANCELLATION_WARN))
    # A raw series with positive parameters has no cancellation; prefer it when it converges.
    retry = lossy & (a > 0) & (b > 0) & (c > 0)
    if np.any(retry):
        try:
            r_sign, r_log, _ = _log_series((a[retry], b[retry]), (c[retry],), x[retry], ctl)
        except ConvergenceError:
            pass
        else:
            sign = np.array(sign, dtype=float)
            log_abs = np.array(log_abs, dtype=float)
            sign[retry] = r_sign
            log_abs[retry] = r_log
            lossy = lossy & ~retry

    if np.any(lossy):
        warnings.warn(
            "Euler-transformed 2F1 series lost more than three digits to cancellation",
            SeriesPrecisionWarning,
            stacklevel=3,
        )
    if np.any((x > _EULER_THRESHOLD) & ~euler):
        warnings.warn(
            "2F1 evaluated by the raw series with x > 0.9; convergence is slow there",
            SeriesPrecisionWarning,
            stacklevel=3,
        )
    return sign, log_abs


def hyp2f1(a, b, c, x, ctl: SeriesControl | None = None):
    """Gauss hypergeometric function 2F1(a, b; c; x) for ``-1 < x < 1``.

    Above ``x = 0.9`` the Euler transformation
    ``2F1(a, b; c; x) = (1 - x)**(c - a - b) * 2F1(c - a, c - b; c; x)``
    is applied whenever ``c - a - b < 0``; otherwise a
    :class:`SeriesPrecisionWarning` is emitted.
    """
    ctl = ctl or DEFAULT_CONTROL
    sign, log_abs = _signed_log_hyp2f1(a, b, c, x, ctl)
    with np.errstate(over="ignore"):
        value = sign * np.exp(log_abs)
    return _out(value, _is_scalar(a, b, c, x))


def log_hyp2f1(a, b, c, x, ctl: SeriesControl | None = None):
    """Logarithm of 2F1(a, b; c; x); the function value must be positive."""
    ctl = ctl or DEFAULT_CONTROL
    sign, log_abs = _signed_log_hyp2f1(a, b, c, x, ctl)
    if np.any(sign <= 0):
        raise DomainError("log_hyp2f1 requires a positive function value")
    return _out(log_abs, _is_scalar(a, b, c, x))
