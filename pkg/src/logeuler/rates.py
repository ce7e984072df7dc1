"""Convergence-rate fits on log-transformed coordinates.

Two models are supported:

* ``"power"``:  e = C * nu**beta           (regress log e on log nu)
* ``"loglog"``: e = C * |log nu|**(-gamma)  (regress log e on log|log nu|)
"""

from dataclasses import dataclass, field

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_array, check_consistent_length, check_is_fitted

from .exceptions import DomainError

MODELS = ("power", "loglog")


@dataclass
class RateFit:
    model: str
    C: float
    exponent: float
    residual: float
    table: list = field(default_factory=list)

    def as_dict(self):
        return {"model": self.model, "C": self.C, "exponent": self.exponent,
                "residual": self.residual, "table": [list(r) for r in self.table]}


def _design(nu, model):
    if model == "power":
        return np.log(nu)
    if np.any(nu >= 1):
        raise DomainError("the loglog model needs nu < 1")
    return np.log(np.abs(np.log(nu)))


class RateFitter(RegressorMixin, BaseEstimator):
    """Least-squares rate fit exposing the scikit-learn regressor interface.

    ``X`` holds viscosities (shape (n,) or (n, 1)), ``y`` the positive errors.
    After fitting, ``C_``, ``exponent_`` and ``residual_`` (max relative
    deviation of the fitted curve from the data) are available; for the
    loglog model ``exponent_`` is the decay exponent gamma > 0 of
    ``C |log nu|^-gamma``.
    """

    def __init__(self, model="power"):
        self.model = model

    def fit(self, X, y):
        if self.model not in MODELS:
            raise ValueError(f"model must be one of {MODELS}, got {self.model!r}")
        nu = check_array(X, ensure_2d=False, dtype=np.float64).reshape(-1)
        err = check_array(y, ensure_2d=False, dtype=np.float64).reshape(-1)
        check_consistent_length(nu, err)
        if nu.size < 3:
            raise DomainError("a rate fit needs at least 3 points")
        if np.any(err <= 0):
            raise DomainError("errors must be positive for a log-transformed fit")
        if np.any(nu <= 0):
            raise DomainError("viscosities must be positive")
        slope, intercept = np.polyfit(_design(nu, self.model), np.log(err), 1)
        self.C_ = float(np.exp(intercept))
        self.exponent_ = float(slope if self.model == "power" else -slope)
        self.residual_ = float(np.max(np.abs(self._curve(nu) / err - 1.0)))
        self.n_features_in_ = 1
        return self

    def _curve(self, nu):
        if self.model == "power":
            return self.C_ * nu ** self.exponent_
        return self.C_ * np.abs(np.log(nu)) ** (-self.exponent_)

    def predict(self, X):
        check_is_fitted(self, "C_")
        nu = check_array(X, ensure_2d=False, dtype=np.float64).reshape(-1)
        return self._curve(nu)


def fit_rate(table, model="power"):
    """Fit ``model`` to rows of (nu, error) and return a :class:`RateFit`."""
    rows = [tuple(map(float, r)) for r in table]
    if len(rows) < 3:
        raise DomainError("a rate fit needs at least 3 points")
    nu, err = np.array(rows).T
    est = RateFitter(model).fit(nu, err)
    return RateFit(model, est.C_, est.exponent_, est.residual_, rows)
