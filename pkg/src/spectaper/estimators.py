"""scikit-learn wrappers so gate schedules compose with pipelines."""
import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from ._errors import InvalidParameterError, ShapeError
from .gates import (
    RWKV_LAMBDA,
    ModulationInput,
    RwkvInit,
    mamba_gates,
    rwkv_gates,
    rwkv_taper,
)
from .spectrum import PostParams, post_map
from .taper import TaperVector, adaptive_taper
from .kernel_approx import ExpSumRegressor  # noqa: F401  re-exported


class TaperedDecay(TransformerMixin, BaseEstimator):
    """Turn an L x N modulation matrix into position-adaptive decay gates.

    Parameters
    ----------
    theta, delta : anchor and gap parameters of the cumulative-softplus map.
    T_train : design length used for the spectrum-adaptive taper.
    gate : ``"exp"`` treats X as positive step sizes (Mamba-style gates,
        ``X = 1`` gives the plain exponential gate); ``"sigmoid"`` treats X
        as additive logit modulation (RWKV-style gates) with the map output
        used as base logits.
    t0 : position offset of the first row.
    """

    def __init__(self, theta=0.0, delta=None, T_train=2048, gate="exp", t0=0):
        self.theta = theta
        self.delta = delta
        self.T_train = T_train
        self.gate = gate
        self.t0 = t0

    def fit(self, X=None, y=None):
        delta = np.zeros(0) if self.delta is None else self.delta
        self.params_ = PostParams(self.theta, delta)
        self.spectrum_ = post_map(self.params_)
        N = self.spectrum_.N
        if self.gate == "exp":
            self.taper_ = (adaptive_taper(self.spectrum_, self.T_train) if N > 1
                           else TaperVector(np.zeros(1)))
        elif self.gate == "sigmoid":
            if N < 2:
                raise InvalidParameterError("sigmoid gates need at least two channels")
            self.init_ = RwkvInit(self.spectrum_.p, np.zeros(N), RWKV_LAMBDA)
            self.taper_ = rwkv_taper(self.init_, self.T_train)
        else:
            raise InvalidParameterError(f"unknown gate family {self.gate!r}")
        self.n_features_in_ = N
        return self

    @property
    def alpha_(self):
        return self.taper_.alpha

    def transform(self, X):
        check_is_fitted(self, "taper_")
        X = check_array(X)
        if X.shape[1] != self.n_features_in_:
            raise ShapeError(f"expected {self.n_features_in_} columns, got {X.shape[1]}")
        L = X.shape[0]
        if self.gate == "exp":
            return mamba_gates(self.params_, ModulationInput(X, "mamba"), self.t0, L,
                               self.T_train).w
        return rwkv_gates(self.init_, ModulationInput(X, "rwkv"), self.taper_, self.t0, L).w
