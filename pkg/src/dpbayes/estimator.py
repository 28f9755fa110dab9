"""scikit-learn style front end for the private Bayes factor test.

Only the shape of the training data is used by ``fit``: the cutoff is
calibrated on simulated null data of the same size, so fitting never reads
the confidential values.

Data conventions
----------------
``"t"`` / ``"z"``
    ``X`` is a vector of observations (or one column).
``"chi2"``
    ``X`` is an ``(n, 2)`` array of binary features ``(X, Y)``.
``"f"``
    ``X`` is the ``(n, p)`` covariate matrix and ``y`` the responses.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from .bayesfactor import ScalePolicy, TruncationParams
from .calibration import (
    CalibrationSpec,
    DataSource,
    PrivatePipeline,
    calibrate_cutoff,
    tune_hyperparams,
)
from .experiments import get_experiment
from .mechanism import PrivacyConfig, PrivateTestOutcome, decide, partition_evidence, privatize

__all__ = ["PrivateBayesFactorTest", "PrivateTestTuner", "to_dataset"]


def to_dataset(experiment, X, y=None):
    """Validate ``X`` (and ``y``) and convert them to the experiment's dataset form."""
    name = experiment.name
    if name in ("t", "z"):
        arr = check_array(np.asarray(X, dtype=float).reshape(-1, 1), ensure_min_samples=1)
        return arr[:, 0]
    if name == "chi2":
        arr = check_array(X, dtype=None, ensure_min_samples=1)
        if arr.shape[1] != 2 or not np.isin(arr, (0, 1)).all():
            raise ValueError("chi2 data must be an (n, 2) array of 0/1 features")
        arr = arr.astype(np.int64)
        return 2 * arr[:, 0] + arr[:, 1]
    if y is None:
        raise ValueError("the f experiment needs responses y")
    Xc, yc = check_X_y(X, y, dtype=float, y_numeric=True)
    return Xc, yc


def _experiment_kwargs(name, X):
    if name == "f":
        return {"p": np.asarray(X).shape[1] if np.ndim(X) == 2 else 1}
    return {}


class PrivateBayesFactorTest(BaseEstimator):
    """Differentially private test based on averaged truncated Bayes factors.

    Parameters
    ----------
    experiment : {"t", "z", "chi2", "f"}
    n_partitions : int
        Number of partitions ``M``.
    a_bound : float
        Bound ``a`` on each per-partition log Bayes factor.
    epsilon : float
        Privacy budget.
    alpha : float
        Size of the test.
    mechanism : {"laplace", "gaussian"}
    effect_size : float
        Standardized effect that sets the prior scale.
    n_mc : int
        Monte Carlo replicates used to calibrate the cutoff.
    random_state : int
        Master seed for calibration, partitioning and the noise draw.

    Attributes
    ----------
    cutoff_ : float
        Calibrated rejection threshold.
    n_obs_ : int
        Sample size the cutoff was calibrated for.
    """

    def __init__(
        self,
        experiment="t",
        n_partitions=5,
        a_bound=3.0,
        epsilon=1.0,
        alpha=0.05,
        mechanism="laplace",
        effect_size=0.3,
        n_mc=1000,
        random_state=0,
    ):
        self.experiment = experiment
        self.n_partitions = n_partitions
        self.a_bound = a_bound
        self.epsilon = epsilon
        self.alpha = alpha
        self.mechanism = mechanism
        self.effect_size = effect_size
        self.n_mc = n_mc
        self.random_state = random_state

    def _spec(self):
        return CalibrationSpec(self.alpha, self.n_mc, self.random_state)

    def fit(self, X, y=None):
        """Calibrate the cutoff for datasets shaped like ``X``."""
        exp = get_experiment(self.experiment, **_experiment_kwargs(self.experiment, X))
        data = to_dataset(exp, X, y)
        n = exp.n_obs(data)
        pipeline = PrivatePipeline(
            exp, n, self.n_partitions, self.a_bound, self.epsilon, self.mechanism, ScalePolicy(self.effect_size)
        )
        self.experiment_ = exp
        self.n_obs_ = n
        self.cutoff_ = calibrate_cutoff(DataSource.null(exp, n), pipeline, self._spec())
        return self

    def test(self, X, y=None, counter: int = 0) -> PrivateTestOutcome:
        """Run the private test on a dataset of the fitted size."""
        check_is_fitted(self, "cutoff_")
        data = to_dataset(self.experiment_, X, y)
        if self.experiment_.n_obs(data) != self.n_obs_:
            raise ValueError(f"fitted for n={self.n_obs_}, got n={self.experiment_.n_obs(data)}")
        trunc = TruncationParams(float(self.a_bound), int(self.n_partitions))
        f = partition_evidence(data, self.experiment_, trunc, ScalePolicy(self.effect_size), self.random_state)
        out = privatize(f, trunc, PrivacyConfig(self.epsilon, self.mechanism, self.random_state), counter)
        return PrivateTestOutcome(out.avg_log_bf, out.noise, out.privatized, self.cutoff_, decide(out.privatized, self.cutoff_))

    def decision_function(self, X, y=None) -> float:
        """Privatized evidence ``H``."""
        return self.test(X, y).privatized

    def predict(self, X, y=None) -> bool:
        """``True`` when the null hypothesis is rejected."""
        return self.test(X, y).reject


class PrivateTestTuner(BaseEstimator):
    """Grid search over ``(M, a)`` maximizing simulated power.

    Attributes
    ----------
    best_params_ : dict
    best_estimator_ : PrivateBayesFactorTest
        Fitted with the best ``(M, a)``.
    surface_ : PowerSurface
    """

    def __init__(
        self,
        experiment="t",
        m_grid=tuple(range(2, 11)),
        a_grid=(1.0, 2.0, 3.0, 4.0, 5.0),
        epsilon=1.0,
        alpha=0.05,
        mechanism="laplace",
        effect_size=0.3,
        effects=None,
        n_mc=1000,
        random_state=0,
        n_jobs=1,
    ):
        self.experiment = experiment
        self.m_grid = m_grid
        self.a_grid = a_grid
        self.epsilon = epsilon
        self.alpha = alpha
        self.mechanism = mechanism
        self.effect_size = effect_size
        self.effects = effects
        self.n_mc = n_mc
        self.random_state = random_state
        self.n_jobs = n_jobs

    def fit(self, X, y=None):
        exp = get_experiment(self.experiment, **_experiment_kwargs(self.experiment, X))
        n = exp.n_obs(to_dataset(exp, X, y))
        result = tune_hyperparams(
            exp,
            n,
            self.m_grid,
            self.a_grid,
            self.epsilon,
            CalibrationSpec(self.alpha, self.n_mc, self.random_state),
            effects=self.effects,
            mechanism=self.mechanism,
            policy=ScalePolicy(self.effect_size),
            n_jobs=self.n_jobs,
        )
        self.surface_ = result.surface
        self.best_params_ = {"n_partitions": result.n_partitions, "a_bound": result.a_bound}
        params = {k: v for k, v in self.get_params().items() if k in PrivateBayesFactorTest().get_params()}
        self.best_estimator_ = PrivateBayesFactorTest(**params, **self.best_params_).fit(X, y)
        return self
