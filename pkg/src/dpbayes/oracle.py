"""Brute-force marginal-likelihood ratios by direct numerical integration.

Every function here integrates the sampling density of the statistic, given
its noncentrality ``lam``, against the prior on ``lam``. Noncentral densities
are built from scratch (a one-dimensional integral for t, Poisson mixtures
for chi-squared and F) using only ``math.lgamma`` and ``scipy.integrate``,
so nothing in this module touches :mod:`dpbayes.specfun`.

The integrand is always the likelihood *ratio* ``p(x | lam) / p(x | 0)``
times the prior density, so the integral is ``m1 / m0`` directly and stays
of order one even where both densities are tiny.

Frozen oracle values live in a plain-text fixture file, one row per grid
point::

    family, params..., tau2, oracle_value, accuracy
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import integrate

__all__ = [
    "FIXTURE_PATH",
    "GRIDS",
    "ACCURACY",
    "FixtureRow",
    "OracleError",
    "QuadratureControl",
    "gamma_prior_pdf",
    "normal_moment_pdf",
    "oracle_ratio",
    "oracle_ratio_chi2",
    "oracle_ratio_f",
    "oracle_ratio_t",
    "oracle_ratio_z",
    "prior_mass",
    "read_fixtures",
    "regenerate_fixtures",
    "skewed_normal_moment_pdf",
    "write_fixtures",
]

FIXTURE_PATH = Path(__file__).with_name("data") / "oracle_fixtures.txt"

GRIDS = {
    "z": [((z,), tau2) for z in range(-5, 6) for tau2 in (0.5, 1.0, 5.0, 50.0)],
    "chi2": [
        ((h, k), tau2)
        for h in (0.5, 2.0, 5.0, 12.0, 30.0)
        for k in (1.0, 3.0, 9.0)
        for tau2 in (1.0, 8.0, 50.0)
    ],
    "t": [
        ((t, nu), tau2)
        for t in (-3.0, -1.0, 0.5, 2.0, 4.0)
        for nu in (4.0, 24.0, 99.0)
        for tau2 in (1.0, 6.0, 25.0)
    ],
    "f": [
        ((f, a, b), tau2)
        for f in (0.2, 1.0, 3.0, 6.5)
        for a, b in ((2.0, 20.0), (2.0, 47.0), (5.0, 94.0))
        for tau2 in (1.0, 10.0)
    ],
}

# Relative accuracy claimed for (and demanded of) each family.
ACCURACY = {"z": 1e-6, "chi2": 1e-6, "t": 1e-5, "f": 1e-5}

_POISSON_BLOCK = 64
_SERIES_CUTOFF = 1e-16


class OracleError(RuntimeError):
    """Quadrature failed to reach the requested tolerance."""


@dataclass(frozen=True)
class QuadratureControl:
    """Quadrature settings.

    ``integration_halfwidth`` is the truncation of the ``lam`` domain in
    units of the prior scale.
    """

    abs_tolerance: float = 1e-12
    max_subdivisions: int = 200
    integration_halfwidth: float = 12.0

    def __post_init__(self):
        if not (0 < self.abs_tolerance <= 1e-10):
            raise ValueError("abs_tolerance must lie in (0, 1e-10]")
        if self.max_subdivisions < 1:
            raise ValueError("max_subdivisions must be positive")
        if self.integration_halfwidth < 10:
            raise ValueError("integration_halfwidth must be at least 10")


DEFAULT_QUADRATURE = QuadratureControl()


def _quad(func, lo, hi, ctl, points=None):
    pts = None
    if points:
        pts = sorted(p for p in points if lo < p < hi) or None
    value, err, *rest = integrate.quad(
        func,
        lo,
        hi,
        epsabs=ctl.abs_tolerance,
        epsrel=1e-12,
        limit=ctl.max_subdivisions,
        points=pts,
        full_output=1,
    )
    if len(rest) > 1 and "roundoff" not in rest[1] and err > 10 * max(ctl.abs_tolerance, 1e-12 * abs(value)):
        raise OracleError(f"quadrature did not converge on [{lo}, {hi}]: {rest[1]}")
    return value


def _ladder_quad(func, lo, hi, scale, ctl):
    """Integrate over ``[lo, hi]`` (``lo`` is 0 or ``-hi``) with breakpoints on a
    geometric ladder of ``scale`` multiples, so narrow priors are not missed."""
    edges = [scale * 2.0**j for j in range(-3, 60) if scale * 2.0**j < hi] + [hi]
    edges = [0.0] + edges
    total = 0.0
    for a, b in itertools.pairwise(edges):
        total += _quad(func, a, b, ctl)
        if lo < 0:
            total += _quad(func, -b, -a, ctl)
    return total


# --- priors -----------------------------------------------------------------


def normal_moment_pdf(lam, tau2):
    """Order-1 normal-moment density ``lam**2 exp(-lam**2 / 2 tau2) / ((2 tau2)**1.5 Gamma(3/2))``."""
    return lam * lam * math.exp(-lam * lam / (2.0 * tau2)) / ((2.0 * tau2) ** 1.5 * math.gamma(1.5))


def skewed_normal_moment_pdf(lam, tau2):
    """Normal-moment density reweighted by ``1 + sign(lam) / 2``.

    This is the prior on the t noncentrality for which the two-term t
    ratio is exact: three quarters of the mass on positive shifts, one
    quarter on negative shifts.
    """
    w = 1.5 if lam > 0 else 0.5
    return w * normal_moment_pdf(lam, tau2)


def gamma_prior_pdf(lam, shape, tau2):
    """Gamma density with the given shape and rate ``1 / (2 tau2)``."""
    if lam <= 0:
        return 0.0
    scale = 2.0 * tau2
    return math.exp((shape - 1.0) * math.log(lam) - lam / scale - math.lgamma(shape) - shape * math.log(scale))


def prior_mass(prior: str, tau2: float, shape: float = 1.0, ctl: QuadratureControl = DEFAULT_QUADRATURE) -> float:
    """Total mass of a prior density by quadrature; should be 1.

    ``prior`` is ``"normal_moment"``, ``"skewed_normal_moment"`` or ``"gamma"``
    (the last uses ``shape``).
    """
    _check_tau2(tau2)
    tau = math.sqrt(tau2)
    if prior == "gamma":
        return _ladder_quad(lambda v: gamma_prior_pdf(v, shape, tau2), 0.0, _gamma_upper(shape, tau2, 0.0, ctl), 2.0 * tau2, ctl)
    pdf = {"normal_moment": normal_moment_pdf, "skewed_normal_moment": skewed_normal_moment_pdf}[prior]
    w = ctl.integration_halfwidth * tau
    return _ladder_quad(lambda v: pdf(v, tau2), -w, w, tau, ctl)


# --- likelihood ratios --------------------------------------------------------


def _poisson_mixture(lam, log_component):
    """``sum_i Pois(i; lam/2) * exp(log_component(i))`` with adaptive truncation."""
    half = lam / 2.0
    if half == 0.0:
        return math.exp(log_component(np.zeros(1))[0])
    total_log = -math.inf
    start = 0
    while True:
        i = np.arange(start, start + _POISSON_BLOCK, dtype=float)
        log_pois = -half + i * math.log(half) - np.array([math.lgamma(v + 1.0) for v in i])
        logs = log_pois + log_component(i)
        block_max = logs.max()
        total_log = np.logaddexp(total_log, np.logaddexp.reduce(logs))
        start += _POISSON_BLOCK
        past_mode = logs[-1] < logs[0] or start > half
        if past_mode and block_max < total_log + math.log(_SERIES_CUTOFF):
            return math.exp(total_log)
        if start > 10_000_000:
            raise OracleError("Poisson mixture did not converge")


def _chi2_lr(h, k, lam):
    """Noncentral over central chi-squared density at ``h``."""
    lg_half_k = math.lgamma(k / 2.0)
    if h == 0.0:
        return math.exp(-lam / 2.0)
    log_h2 = math.log(h / 2.0)

    def comp(i):
        return i * log_h2 + lg_half_k - np.array([math.lgamma(k / 2.0 + v) for v in i])

    return _poisson_mixture(lam, comp)


def _f_lr(f, a, b, lam):
    """Noncentral over central F density at ``f``."""
    if f == 0.0:
        return math.exp(-lam / 2.0)
    log_u = math.log(a * f / (b + a * f))
    c = math.lgamma(a / 2.0) - math.lgamma((a + b) / 2.0)

    def comp(i):
        return (
            c
            + np.array([math.lgamma((a + b) / 2.0 + v) - math.lgamma(a / 2.0 + v) for v in i])
            + i * log_u
        )

    return _poisson_mixture(lam, comp)


def _student_log_pdf(t, nu):
    return (
        math.lgamma((nu + 1.0) / 2.0)
        - math.lgamma(nu / 2.0)
        - 0.5 * math.log(nu * math.pi)
        - (nu + 1.0) / 2.0 * math.log1p(t * t / nu)
    )


def _t_lr(t, nu, lam, ctl):
    """Noncentral over central t density at ``t``.

    Uses ``T = (Z + lam) / S`` with ``S = sqrt(V / nu)``, ``V ~ chi2(nu)``:
    the density is ``int_0^inf s * phi(t s - lam) * p_S(s) ds``.
    """
    log_m0 = _student_log_pdf(t, nu)
    c = math.log(2.0 * nu) - (nu / 2.0) * math.log(2.0) - math.lgamma(nu / 2.0) - 0.5 * math.log(2.0 * math.pi)

    def integrand(s):
        if s <= 0.0:
            return 0.0
        v = nu * s * s
        log_ps = (nu / 2.0 - 1.0) * math.log(v) - v / 2.0 + c + math.log(s)
        return math.exp(math.log(s) - 0.5 * (t * s - lam) ** 2 + log_ps - log_m0)

    hi = 3.0 + 40.0 / math.sqrt(nu)
    points = [1.0]
    if t != 0.0 and 0.0 < lam / t < hi:
        points.append(lam / t)
    return _quad(integrand, 0.0, hi, ctl, points)


# --- oracles -------------------------------------------------------------------


def _check_tau2(tau2):
    if not tau2 > 0:
        raise ValueError("tau2 must be positive")


def oracle_ratio_z(z, tau2, ctl: QuadratureControl = DEFAULT_QUADRATURE) -> float:
    """``m1(z) / m0(z)`` with ``z | lam ~ N(lam, 1)`` and ``lam ~ J(tau2)``."""
    _check_tau2(tau2)
    tau = math.sqrt(tau2)

    def integrand(lam):
        # phi(z - lam) / phi(z)
        return math.exp(z * lam - 0.5 * lam * lam) * normal_moment_pdf(lam, tau2)

    w = ctl.integration_halfwidth * tau + abs(z)
    return _ladder_quad(integrand, -w, w, tau, ctl)


def oracle_ratio_t(t, nu, tau2, ctl: QuadratureControl = DEFAULT_QUADRATURE) -> float:
    """``m1(t) / m0(t)`` with ``t | lam ~ T_nu(lam)`` and the skewed normal-moment prior."""
    _check_tau2(tau2)
    if not nu > 0:
        raise ValueError("nu must be positive")
    tau = math.sqrt(tau2)

    def integrand(lam):
        return _t_lr(t, nu, lam, ctl) * skewed_normal_moment_pdf(lam, tau2)

    w = ctl.integration_halfwidth * tau + abs(t)
    return _ladder_quad(integrand, -w, w, tau, ctl)


def _gamma_upper(shape, tau2, x, ctl):
    scale = 2.0 * tau2
    return ctl.integration_halfwidth * scale * (shape + math.sqrt(shape)) + 4.0 * x + 50.0


def oracle_ratio_chi2(h, k, tau2, ctl: QuadratureControl = DEFAULT_QUADRATURE) -> float:
    """``m1(h) / m0(h)`` with ``h | lam ~ chi2_k(lam)`` and ``lam ~ G(k/2 + 1, 1/(2 tau2))``."""
    _check_tau2(tau2)
    if h < 0 or not k > 0:
        raise ValueError("need h >= 0 and k > 0")
    shape = k / 2.0 + 1.0

    def integrand(lam):
        return _chi2_lr(h, k, lam) * gamma_prior_pdf(lam, shape, tau2)

    return _ladder_quad(integrand, 0.0, _gamma_upper(shape, tau2, h, ctl), 2.0 * tau2, ctl)


def oracle_ratio_f(f, a_df, b_df, tau2, ctl: QuadratureControl = DEFAULT_QUADRATURE) -> float:
    """``m1(f) / m0(f)`` with ``f | lam ~ F_{a,b}(lam)`` and ``lam ~ G(a/2 + 1, 1/(2 tau2))``."""
    _check_tau2(tau2)
    if f < 0 or not (a_df > 0 and b_df > 0):
        raise ValueError("need f >= 0 and positive degrees of freedom")
    shape = a_df / 2.0 + 1.0

    def integrand(lam):
        return _f_lr(f, a_df, b_df, lam) * gamma_prior_pdf(lam, shape, tau2)

    return _ladder_quad(integrand, 0.0, _gamma_upper(shape, tau2, a_df * f, ctl), 2.0 * tau2, ctl)


_ORACLES = {
    "z": oracle_ratio_z,
    "t": oracle_ratio_t,
    "chi2": oracle_ratio_chi2,
    "f": oracle_ratio_f,
}


def oracle_ratio(family: str, params, tau2, ctl: QuadratureControl = DEFAULT_QUADRATURE) -> float:
    return _ORACLES[family](*params, tau2, ctl)


# --- fixtures -------------------------------------------------------------------


@dataclass(frozen=True)
class FixtureRow:
    family: str
    params: tuple
    tau2: float
    value: float
    accuracy: float

    def label(self) -> str:
        args = ", ".join(f"{p:g}" for p in self.params)
        return f"{self.family}({args}; tau2={self.tau2:g})"


def _fmt(x: float) -> str:
    return f"{x:.17g}"


def write_fixtures(rows, path=FIXTURE_PATH) -> Path:
    path = Path(path)
    lines = ["# family, params..., tau2, oracle_value, accuracy"]
    for r in rows:
        fields = [r.family, *(_fmt(p) for p in r.params), _fmt(r.tau2), _fmt(r.value), _fmt(r.accuracy)]
        lines.append(", ".join(fields))
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text("\n".join(lines) + "\n")
    return path


def read_fixtures(path=FIXTURE_PATH) -> list[FixtureRow]:
    rows = []
    for lineno, line in enumerate(Path(path).read_text().splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        fields = [f.strip() for f in line.split(",")]
        family = fields[0]
        if family not in _ORACLES:
            raise ValueError(f"{path}:{lineno}: unknown family {family!r}")
        try:
            nums = [float(f) for f in fields[1:]]
        except ValueError as exc:
            raise ValueError(f"{path}:{lineno}: {exc}") from None
        *params, tau2, value, accuracy = nums
        rows.append(FixtureRow(family, tuple(params), tau2, value, accuracy))
    return rows


def compute_fixture_rows(ctl: QuadratureControl = DEFAULT_QUADRATURE, families=None) -> list[FixtureRow]:
    rows = []
    for family in families or GRIDS:
        for params, tau2 in GRIDS[family]:
            value = oracle_ratio(family, params, tau2, ctl)
            rows.append(FixtureRow(family, tuple(float(p) for p in params), float(tau2), value, ACCURACY[family]))
    return rows


def regenerate_fixtures(path=FIXTURE_PATH, ctl: QuadratureControl = DEFAULT_QUADRATURE) -> list[FixtureRow]:
    """Recompute every grid point by quadrature and overwrite ``path``."""
    rows = compute_fixture_rows(ctl)
    write_fixtures(rows, path)
    return rows
