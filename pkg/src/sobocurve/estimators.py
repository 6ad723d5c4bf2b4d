"""scikit-learn adapters: curves as ``(n_samples, M, d)`` arrays."""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from .curves import DiscreteCurve, constant_speed_reparam
from .geodesics import solve_bvp
from .metrics import MetricSpec
from .shape_space import shape_distance


def check_curves(X, scheme: str = "spectral") -> list[DiscreteCurve]:
    """Validate a stack of sampled curves and wrap each one."""
    if isinstance(X, DiscreteCurve):
        X = [X]
    curves = [x if isinstance(x, DiscreteCurve) else DiscreteCurve(np.asarray(x, dtype=float), scheme) for x in X]
    if not curves:
        raise ValueError("need at least one curve")
    M, d = curves[0].M, curves[0].dim
    if any(c.M != M or c.dim != d for c in curves):
        raise ValueError("all curves must share M and dim")
    return curves


class ConstantSpeedResampler(BaseEstimator, TransformerMixin):
    """Reparametrize each curve to constant speed, keeping its base point."""

    def __init__(self, scheme="spectral"):
        self.scheme = scheme

    def fit(self, X, y=None):
        check_curves(X, self.scheme)
        return self

    def transform(self, X):
        return np.stack([constant_speed_reparam(c)[0].samples for c in check_curves(X, self.scheme)])


class GeodesicDistanceTransformer(BaseEstimator, TransformerMixin):
    """Distances to the curves seen in ``fit``.

    Parameters
    ----------
    metric : str
        Metric description, as accepted by :meth:`MetricSpec.parse`.
    knots : int
        Time intervals of the discrete geodesic.
    quotient : bool
        Use the reparametrization-invariant shape distance instead.
    dp_grid : int
        Grid of the dynamic-programming seed (quotient only).
    tol : float
        Gradient tolerance of the geodesic solver.

    ``transform(X)`` returns an array of shape ``(len(X), n_templates)``.
    """

    def __init__(self, metric="n=2,a0=1,a2=1", knots=16, quotient=False, dp_grid=64, tol=1e-6, scheme="spectral"):
        self.metric = metric
        self.knots = knots
        self.quotient = quotient
        self.dp_grid = dp_grid
        self.tol = tol
        self.scheme = scheme

    def fit(self, X, y=None):
        self.spec_ = MetricSpec.parse(self.metric)
        self.templates_ = check_curves(X, self.scheme)
        self.n_templates_ = len(self.templates_)
        return self

    def _dist(self, a, b):
        if self.quotient:
            return shape_distance(a, b, self.spec_, dp_grid=self.dp_grid, N=self.knots, grad_tol=self.tol).distance
        return solve_bvp(a, b, self.spec_, N=self.knots, grad_tol=self.tol).distance_estimate

    def transform(self, X):
        check_is_fitted(self, "templates_")
        curves = check_curves(X, self.scheme)
        ref = self.templates_[0]
        if curves[0].M != ref.M or curves[0].dim != ref.dim:
            raise ValueError("curves must match the fitted templates in M and dim")
        return np.array([[self._dist(c, t) for t in self.templates_] for c in curves])
