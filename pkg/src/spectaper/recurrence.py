"""Minimal diagonal linear recurrence engine.

``S_t = diag(w_t) S_{t-1} + u_t`` with ``S_t`` of shape (N, d). Gates come
from a :class:`~spectaper.gates.GateSchedule` or a raw L x N array.
"""
import warnings
from dataclasses import dataclass

import numpy as np

from ._errors import DomainError, InvalidParameterError, ShapeError
from ._random import iter_blocks


def _as_gates(gates):
    w = getattr(gates, "w", gates)
    w = np.asarray(w, dtype=float)
    if w.ndim != 2:
        raise ShapeError("gates must be an L x N matrix")
    return w


def _check(w, inputs, initial):
    inputs = np.asarray(inputs, dtype=float)
    if inputs.ndim != 3 or inputs.shape[:2] != w.shape:
        raise ShapeError(f"inputs must be {w.shape + ('d',)}, got {inputs.shape}")
    L, N, d = inputs.shape
    if initial is None:
        initial = np.zeros((N, d))
    initial = np.asarray(initial, dtype=float)
    if initial.shape != (N, d):
        raise ShapeError(f"initial state must be {(N, d)}, got {initial.shape}")
    return inputs, initial


def sequential_scan(gates, inputs, initial=None):
    """All states, shape (L, N, d), computed strictly left to right."""
    w = _as_gates(gates)
    inputs, S = _check(w, inputs, initial)
    out = np.empty_like(inputs)
    for t in range(inputs.shape[0]):
        S = w[t][:, None] * S + inputs[t]
        out[t] = S
    return out


def _segsum(x):
    """``out[l, m] = sum(x[m+1 : l+1])`` for ``l >= m``, ``-inf`` above the diagonal."""
    c = x.shape[0]
    rep = np.broadcast_to(x[:, None, :], (c, c) + x.shape[1:]).copy()
    lower = np.tril(np.ones((c, c), bool), -1)
    rep[~lower] = 0.0
    seg = np.cumsum(rep, axis=0)
    seg[~np.tril(np.ones((c, c), bool))] = -np.inf
    return seg


def chunked_scan(gates, inputs, chunk, initial=None):
    """Same result as :func:`sequential_scan`, one chunk at a time.

    Inside a chunk the state is an explicit decay-weighted sum of the
    chunk's inputs plus the carried state decayed by the chunk prefix.
    """
    if chunk < 1:
        raise InvalidParameterError("chunk must be >= 1")
    w = _as_gates(gates)
    inputs, S = _check(w, inputs, initial)
    L = inputs.shape[0]
    with np.errstate(divide="ignore"):
        log_w = np.log(w)
    out = np.empty_like(inputs)
    for a in range(0, L, chunk):
        b = min(a + chunk, L)
        lw = log_w[a:b]
        decay = np.exp(_segsum(lw))  # (c, c, N)
        prefix = np.exp(np.cumsum(lw, axis=0))  # (c, N)
        states = np.einsum("lmn,mnd->lnd", decay, inputs[a:b]) + prefix[:, :, None] * S
        out[a:b] = states
        S = states[-1]
    return out


@dataclass(frozen=True, eq=False)
class ImpulseRecord:
    channel: int
    t0: int
    lags: np.ndarray
    measured: np.ndarray
    idealized: np.ndarray

    @property
    def log_mismatch(self):
        return np.abs(np.log(self.measured) - np.log(self.idealized))

    @property
    def relative_log_mismatch(self):
        """Log mismatch as a fraction of the idealized log response."""
        ideal = np.abs(np.log(self.idealized))
        with np.errstate(invalid="ignore", divide="ignore"):
            rel = self.log_mismatch / ideal
        return np.where(ideal > 0, rel, 0.0)


def impulse_response(spectrum, taper, channel, t0, lags):
    """Product of tapered gates over a lag window versus its constant-gate idealization.

    For a response observed at ``t = t0 + s`` the measured value is the
    product of gates at positions ``t - s, ..., t - 1``; the idealization
    freezes the gate at position ``t``: ``exp(-s * rate / t**alpha)``.
    """
    if t0 < 1:
        raise DomainError("emission position t0 must be >= 1")
    lags = np.atleast_1d(np.asarray(lags, dtype=np.int64))
    if np.any(lags < 0):
        raise DomainError("lags must be non-negative")
    ell = float(np.exp(spectrum.p[channel]))
    alpha = float(taper.alpha[channel])
    smax = int(lags.max()) if lags.size else 0
    j = np.arange(t0, t0 + max(smax, 1), dtype=float)
    # cumulative sum of j**-alpha over the window, prefixed with 0 for s = 0
    csum = np.concatenate([[0.0], np.cumsum(np.exp(-alpha * np.log(j)))])
    measured = np.exp(-ell * csum[lags])
    t = (t0 + lags).astype(float)
    idealized = np.exp(-(ell * lags / t**alpha))
    return ImpulseRecord(channel, int(t0), lags, measured, idealized)


@dataclass(frozen=True, eq=False)
class EnergyResult:
    alpha: float
    ell: float
    t: np.ndarray
    mean: np.ndarray
    stderr: np.ndarray
    closed_form: np.ndarray
    exact: np.ndarray
    tau: np.ndarray
    trials: int
    samples: np.ndarray

    def ratio(self, t1, t2):
        """Monte Carlo ``E(t2)/E(t1)`` with a delta-method standard error."""
        i, k = _index(self.t, t1), _index(self.t, t2)
        x, y = self.samples[:, i], self.samples[:, k]
        mx, my = x.mean(), y.mean()
        r = my / mx
        cov = np.cov(np.vstack([x, y]))
        var = r**2 * (cov[1, 1] / my**2 + cov[0, 0] / mx**2 - 2 * cov[0, 1] / (mx * my))
        return float(r), float(np.sqrt(var / x.size))

    def exact_ratio(self, t1, t2):
        return float(self.exact[_index(self.t, t2)] / self.exact[_index(self.t, t1)])


def _index(ts, t):
    hit = np.flatnonzero(ts == t)
    if hit.size == 0:
        raise InvalidParameterError(f"position {t} was not recorded")
    return int(hit[0])


def energy_closed_form(alpha, ell, t):
    t = np.asarray(t, dtype=float)
    return t**alpha / (2 * ell) * -np.expm1(-2 * ell * t ** (1 - alpha))


def energy_mc(alpha, ell, t_list, trials, seed):
    """Second moment of a white-noise-driven tapered channel at each ``t``.

    The channel uses gates ``exp(-ell * t**-alpha)`` and starts from zero.
    ``exact`` is the discrete-time expectation obtained by the variance
    recursion, ``closed_form`` the continuous-time approximation.
    """
    t_arr = np.asarray(sorted(set(int(t) for t in t_list)))
    if t_arr.size == 0 or t_arr[0] < 1:
        raise DomainError("positions must be >= 1")
    if trials < 2:
        raise InvalidParameterError("need at least 2 trials")
    T = int(t_arr[-1])
    pos = np.arange(1, T + 1, dtype=float)
    w = np.exp(-ell * np.exp(-alpha * np.log(pos)))
    tau = t_arr.astype(float) ** alpha / ell
    if tau[-1] < 10:
        warnings.warn(f"timescale {tau[-1]:.3g} < 10 at t={T}; continuous form is coarse",
                      RuntimeWarning, stacklevel=2)

    exact = np.empty(T)
    e = 0.0
    for i in range(T):
        e = w[i] ** 2 * e + 1.0
        exact[i] = e

    record = np.zeros(T + 1, dtype=np.int64) - 1
    record[t_arr] = np.arange(t_arr.size)
    samples = np.empty((trials, t_arr.size))
    start = 0
    for rng, n in iter_blocks(trials, seed, 0xE):
        S = np.zeros(n)
        for i in range(T):
            S = w[i] * S + rng.standard_normal(n)
            col = record[i + 1]
            if col >= 0:
                samples[start:start + n, col] = S * S
        start += n

    mean = samples.mean(axis=0)
    se = samples.std(axis=0, ddof=1) / np.sqrt(trials)
    return EnergyResult(float(alpha), float(ell), t_arr, mean, se,
                        energy_closed_form(alpha, ell, t_arr), exact[t_arr - 1], tau,
                        int(trials), samples)


def energy_ratio_distortion(alpha_i, alpha_j, t1, t2):
    """Asymptotic factor by which the energy ratio of two modes drifts from t1 to t2."""
    if not t2 > t1 >= 1:
        raise DomainError("need t2 > t1 >= 1")
    return float((t2 / t1) ** (alpha_i - alpha_j))
