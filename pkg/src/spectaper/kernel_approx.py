"""Exponential-sum fits to the power-law kernel under fixed node placements.

The sup-norm optimum over weights is approached by Lawson's iteratively
reweighted least squares on a log-spaced grid; the error is then measured
on a grid four times finer. Node placement is what the experiments vary.
"""
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from ._errors import DomainError, IllConditionedError, InvalidParameterError
from ._random import make_rng

STRATEGIES = ("random", "linear", "geometric")
DEFAULT_GRID = 8192
FINE_FACTOR = 4
DEFAULT_ITERS = 30
MIN_REL_SEPARATION = 1e-10
#: errors below this are at the least-squares floor and excluded from slopes
SOLVER_FLOOR = 1e-12
#: Lawson result is called converged when best sup is this close to the lower bound
CONVERGENCE_GAP = 0.05

# span multipliers searched for the geometric curve: [lo / T, hi]
GEOMETRIC_LO = (0.25, 1.0, 4.0)
GEOMETRIC_HI = (1.0, 2.0, 4.0, 8.0, 16.0, 64.0)


@dataclass(frozen=True)
class PowerLawKernel:
    beta: float
    T: float

    def __post_init__(self):
        if not 0 < self.beta < 1:
            raise DomainError(f"beta must lie in (0, 1), got {self.beta}")
        if not self.T > 1:
            raise DomainError(f"T must exceed 1, got {self.T}")

    def __call__(self, s):
        return np.asarray(s, dtype=float) ** -self.beta


@dataclass(frozen=True, eq=False)
class NodePlacement:
    strategy: str
    rates: np.ndarray
    seed: Optional[int] = None
    c: Optional[float] = None

    def __post_init__(self):
        rates = np.atleast_1d(np.asarray(self.rates, dtype=float))
        if np.any(rates <= 0) or not np.all(np.isfinite(rates)):
            raise InvalidParameterError("node rates must be positive and finite")
        object.__setattr__(self, "rates", rates)

    @property
    def N(self):
        return self.rates.size


@dataclass(frozen=True, eq=False)
class ExpSumApprox:
    nodes: NodePlacement
    weights: np.ndarray
    sup_error: float
    grid_size: int
    fine_grid_size: int
    lower_bound: float
    converged: bool
    condition: float
    lawson_weights: np.ndarray = field(default=None, repr=False)

    def __call__(self, s):
        return np.exp(-np.outer(np.asarray(s, float), self.nodes.rates)) @ self.weights


def place_nodes(strategy, N, T, c=None, seed=0, span=None):
    """Rates for ``N`` nodes covering timescales up to ``T``.

    ``span=(lo, hi)`` overrides the geometric interval, which defaults to
    ``[1/T, 1]``. Random rates are log-uniform on ``[1/T, 1]``.
    """
    if N < 1:
        raise InvalidParameterError("N must be >= 1")
    if not T > 1:
        raise DomainError(f"T must exceed 1, got {T}")
    if strategy == "geometric":
        lo, hi = span if span is not None else (1.0 / T, 1.0)
        rates = np.geomspace(lo, hi, N) if N > 1 else np.array([lo])
        return NodePlacement(strategy, rates)
    if strategy == "linear":
        c = 1.0 / T if c is None else float(c)
        return NodePlacement(strategy, c * np.arange(1, N + 1), c=c)
    if strategy == "random":
        rng = make_rng(seed, N)
        rates = np.exp(rng.uniform(-np.log(T), 0.0, size=N))
        return NodePlacement(strategy, np.sort(rates), seed=seed)
    raise InvalidParameterError(f"unknown placement strategy {strategy!r}; use one of {STRATEGIES}")


def _check_separation(rates):
    order = np.argsort(rates)
    r = rates[order]
    rel = np.diff(r) / r[1:]
    if rel.size and rel.min() < MIN_REL_SEPARATION:
        k = int(np.argmin(rel))
        pair = (int(order[k]), int(order[k + 1]))
        raise IllConditionedError(
            f"nodes {pair} are nearly coincident (relative separation {rel[k]:.3g})", pair
        )


class ExpSumRegressor(RegressorMixin, BaseEstimator):
    """Sup-norm fit of ``y ~ sum_k w_k exp(-rates_k x)`` with fixed rates.

    Lawson iterations reweight the sample points by the absolute residual.
    The weighted RMS residual of every iterate is a lower bound on the
    discrete minimax error, reported as ``lower_bound_``.
    """

    def __init__(self, rates=None, n_iter=DEFAULT_ITERS):
        self.rates = rates
        self.n_iter = n_iter

    def _design(self, X):
        return np.exp(-np.outer(X[:, 0], self.rates_))

    def fit(self, X, y, eval_set=None, init=None):
        """Fit weights.

        eval_set : (X, y) on which the best iterate is chosen (defaults to
            the training samples).
        init : optional ``(coef, sample_weight)`` warm start; ``coef`` is a
            feasible candidate kept if nothing better is found.
        """
        X, y = check_X_y(X, y, ensure_min_features=1)
        if X.shape[1] != 1:
            raise InvalidParameterError("X must hold a single column of lags")
        self.rates_ = np.atleast_1d(np.asarray(self.rates, dtype=float))
        _check_separation(self.rates_)
        n = X.shape[0]
        if n < 4 * self.rates_.size:
            raise InvalidParameterError("need at least 4 samples per node")
        E = self._design(X)
        if eval_set is None:
            E_eval, y_eval = E, y
        else:
            X_eval = check_array(eval_set[0])
            E_eval, y_eval = self._design(X_eval), np.asarray(eval_set[1], float)

        omega = np.full(n, 1.0 / n)
        best_err, best_coef = np.inf, None
        if init is not None:
            coef0, omega0 = init
            if coef0 is not None:
                best_coef = np.asarray(coef0, float)
                best_err = np.max(np.abs(y_eval - E_eval @ best_coef))
            if omega0 is not None and len(omega0) == n:
                omega = np.asarray(omega0, float) / np.sum(omega0)

        lower = 0.0
        self.condition_ = np.nan
        for it in range(self.n_iter + 1):
            sw = np.sqrt(omega)
            A = E * sw[:, None]
            scale = np.linalg.norm(A, axis=0)
            scale[scale == 0] = 1.0
            coef, _, _, sv = np.linalg.lstsq(A / scale, y * sw, rcond=None)
            coef = coef / scale
            if it == 0:
                self.condition_ = float(sv[0] / sv[-1]) if sv[-1] > 0 else np.inf
            resid = y - E @ coef
            lower = max(lower, float(np.sqrt(np.sum(omega * resid**2))))
            err = np.max(np.abs(y_eval - E_eval @ coef))
            if err < best_err:
                best_err, best_coef = err, coef
            nxt = omega * np.abs(resid)
            total = nxt.sum()
            if not total > 0:
                break
            omega = nxt / total

        self.coef_ = best_coef
        self.sup_error_ = float(best_err)
        self.lower_bound_ = lower
        self.sample_weight_ = omega
        self.converged_ = bool(best_err - lower <= CONVERGENCE_GAP * best_err)
        return self

    def predict(self, X):
        check_is_fitted(self, "coef_")
        X = check_array(X)
        return self._design(X) @ self.coef_


def log_grid(T, size):
    return np.geomspace(1.0, float(T), int(size))


def fit_weights(nodes, kernel, grid_size=DEFAULT_GRID, n_iter=DEFAULT_ITERS, warm_start=None):
    """Fit weights for fixed nodes to ``kernel`` on ``[1, kernel.T]``.

    ``warm_start`` may be a previous :class:`ExpSumApprox` on a subset of
    these nodes; its solution seeds the fit, so errors never grow when a
    node is added.
    """
    N = nodes.N
    if grid_size < 4 * N:
        raise InvalidParameterError(f"grid_size must be >= 4N = {4 * N}")
    s = log_grid(kernel.T, grid_size)
    s_fine = log_grid(kernel.T, FINE_FACTOR * grid_size)

    init = None
    if warm_start is not None:
        coef = np.zeros(N)
        prev = warm_start.nodes.rates
        for j, r in enumerate(prev):
            hit = np.flatnonzero(nodes.rates == r)
            if hit.size == 0:
                raise InvalidParameterError("warm start nodes must be a subset of the new nodes")
            coef[hit[0]] = warm_start.weights[j]
        omega = warm_start.lawson_weights if warm_start.grid_size == grid_size else None
        init = (coef, omega)

    reg = ExpSumRegressor(rates=nodes.rates, n_iter=n_iter)
    reg.fit(s[:, None], kernel(s), eval_set=(s_fine[:, None], kernel(s_fine)), init=init)
    return ExpSumApprox(
        nodes=nodes,
        weights=reg.coef_,
        sup_error=reg.sup_error_,
        grid_size=int(grid_size),
        fine_grid_size=int(FINE_FACTOR * grid_size),
        lower_bound=reg.lower_bound_,
        converged=reg.converged_,
        condition=reg.condition_,
        lawson_weights=reg.sample_weight_,
    )


@dataclass
class RateCurve:
    strategy: str
    beta: float
    T: float
    N: np.ndarray
    error: np.ndarray
    #: quartiles over seeds for random placement, else equal to ``error``
    q25: np.ndarray
    q75: np.ndarray
    #: placement parameter chosen per N (c for linear, span for geometric)
    chosen: list
    slope: Optional[float] = None
    intercept: Optional[float] = None
    r2: Optional[float] = None


def log_linear_fit(N, error, floor=SOLVER_FLOOR):
    """Least-squares line through ``(N, ln error)`` above the solver floor."""
    N = np.asarray(N, float)
    error = np.asarray(error, float)
    keep = error > floor
    x, y = N[keep], np.log(error[keep])
    if x.size < 2:
        return None, None, None
    A = np.column_stack([x, np.ones_like(x)])
    (slope, intercept), *_ = np.linalg.lstsq(A, y, rcond=None)
    ss_tot = np.sum((y - y.mean()) ** 2)
    r2 = 1.0 - np.sum((y - A @ [slope, intercept]) ** 2) / ss_tot if ss_tot > 0 else 1.0
    return float(slope), float(intercept), float(r2)


def linear_slopes(T):
    return (1.0 / T, 2.0 / T, 1.0 / np.sqrt(T))


def geometric_spans(T):
    return [(lo / T, hi) for lo in GEOMETRIC_LO for hi in GEOMETRIC_HI]


def rate_experiment(strategy, beta, T, N_list, seeds=(0,), grid_size=DEFAULT_GRID,
                    span_search=True):
    """Sup error against N for one placement strategy.

    Geometric and linear placements report the best member of a small
    family (span grid for geometric, slope grid for linear); random
    placement reports the median and quartiles over ``seeds``.
    """
    N_list = [int(n) for n in N_list]
    if any(b <= a for a, b in zip(N_list, N_list[1:])):
        raise InvalidParameterError("N_list must be strictly ascending")
    kernel = PowerLawKernel(beta, T)
    errs, q25, q75, chosen = [], [], [], []
    for N in N_list:
        if strategy == "random":
            vals = [fit_weights(place_nodes("random", N, T, seed=s), kernel, grid_size).sup_error
                    for s in seeds]
            lo_q, med, hi_q = np.percentile(vals, [25, 50, 75])
            errs.append(med)
            q25.append(lo_q)
            q75.append(hi_q)
            chosen.append(None)
            continue
        if strategy == "linear":
            cands = [(c, place_nodes("linear", N, T, c=c)) for c in linear_slopes(T)]
        elif strategy == "geometric":
            spans = geometric_spans(T) if span_search else [(1.0 / T, 1.0)]
            cands = [(sp, place_nodes("geometric", N, T, span=sp)) for sp in spans]
        else:
            raise InvalidParameterError(f"unknown placement strategy {strategy!r}")
        best = min(((fit_weights(nd, kernel, grid_size).sup_error, i)
                    for i, (_, nd) in enumerate(cands)))
        errs.append(best[0])
        q25.append(best[0])
        q75.append(best[0])
        chosen.append(cands[best[1]][0])
    curve = RateCurve(strategy, beta, T, np.array(N_list), np.array(errs),
                      np.array(q25), np.array(q75), chosen)
    if strategy == "geometric":
        curve.slope, curve.intercept, curve.r2 = log_linear_fit(curve.N, curve.error)
    return curve


@dataclass
class ScaleMismatch:
    static_error: float
    adapted_error: float
    N_eff: float


def scale_mismatch_experiment(N, T, t, beta, grid_size=DEFAULT_GRID):
    """Fit on ``[1, t]`` with the spectrum for ``[1, T]`` versus one rescaled to ``[1, t]``."""
    if not 1 < t <= T:
        raise DomainError(f"position t must satisfy 1 < t <= T, got t={t}, T={T}")
    kernel = PowerLawKernel(beta, t)
    static = fit_weights(place_nodes("geometric", N, T), kernel, grid_size)
    if t == T:
        adapted = static
    else:
        adapted = fit_weights(place_nodes("geometric", N, t), kernel, grid_size)
    return ScaleMismatch(static.sup_error, adapted.sup_error, N * np.log(t) / np.log(T))
