"""Decay spectra and the cumulative-softplus reparameterization.

Convention: ``DecaySpectrum.p`` holds log-rates. Channel ``k`` has rate
``r_k = exp(p_k)`` (nats lost per token), timescale ``1 / r_k`` and
multiplicative gate ``exp(-r_k)``.
"""
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from ._errors import DomainError, InvalidParameterError, NotStrictlyOrderedError


def softplus(x):
    return np.logaddexp(0.0, x)


def softplus_inv(y):
    """Inverse of softplus for ``y > 0``.

    Written as ``y + log(-expm1(-y))`` so that both tiny gaps (1e-12) and
    large ones keep full relative precision.
    """
    y = np.asarray(y, dtype=float)
    if np.any(y <= 0):
        raise NotStrictlyOrderedError("softplus inverse needs strictly positive gaps")
    return y + np.log(-np.expm1(-y))


def sech(x):
    return 1.0 / np.cosh(x)


@dataclass(frozen=True, eq=False)
class DecaySpectrum:
    p: np.ndarray

    def __post_init__(self):
        p = np.atleast_1d(np.asarray(self.p, dtype=float))
        if p.ndim != 1 or p.size == 0:
            raise InvalidParameterError("spectrum must be a non-empty 1-d vector")
        if not np.all(np.isfinite(p)):
            raise InvalidParameterError("spectrum contains non-finite log-rates")
        p.setflags(write=False)
        object.__setattr__(self, "p", p)

    @property
    def N(self):
        return self.p.size

    @property
    def rates(self):
        return np.exp(self.p)

    @property
    def timescales(self):
        return np.exp(-self.p)

    @property
    def gates(self):
        return np.exp(-self.rates)

    @property
    def gaps(self):
        return np.diff(self.p)

    def is_strictly_ordered(self):
        return bool(np.all(np.diff(self.p) > 0))

    @classmethod
    def from_rates(cls, rates):
        rates = np.asarray(rates, dtype=float)
        if np.any(rates <= 0):
            raise DomainError("rates must be positive")
        return cls(np.log(rates))


@dataclass(frozen=True, eq=False)
class PostParams:
    theta: float
    delta: np.ndarray = field(default_factory=lambda: np.zeros(0))

    def __post_init__(self):
        delta = np.atleast_1d(np.asarray(self.delta, dtype=float))
        if delta.ndim != 1:
            raise InvalidParameterError("delta must be a 1-d vector")
        theta = float(self.theta)
        if not np.isfinite(theta) or not np.all(np.isfinite(delta)):
            raise InvalidParameterError("theta and delta must be finite")
        delta.setflags(write=False)
        object.__setattr__(self, "theta", theta)
        object.__setattr__(self, "delta", delta)

    @property
    def N(self):
        return self.delta.size + 1

    @property
    def gaps(self):
        return softplus(self.delta)


@dataclass(frozen=True)
class SpectrumStats:
    min_gap: Optional[float]
    max_gap: Optional[float]
    mean_gap: Optional[float]
    max_coherence: Optional[float]
    is_strictly_ordered: bool


def post_map(params):
    """Anchor plus cumulative softplus gaps; always strictly ascending."""
    # sequential accumulation p_k = p_{k-1} + g keeps inverse round trips tight
    p = np.cumsum(np.concatenate([[params.theta], params.gaps]))
    return DecaySpectrum(p)


def inverse_post_map(spectrum):
    gaps = np.diff(spectrum.p)
    if np.any(gaps <= 0):
        k = int(np.argmax(gaps <= 0))
        raise NotStrictlyOrderedError(
            f"spectrum not strictly ascending at positions {k} and {k + 1}"
        )
    return PostParams(spectrum.p[0], softplus_inv(gaps))


def coherence(p_i, p_j):
    """Normalized L2 overlap of two exponential impulse responses.

    With ``p`` in log-rate space this is ``sech(|p_i - p_j| / 2)``.
    """
    return sech(np.abs(np.asarray(p_i, dtype=float) - np.asarray(p_j, dtype=float)) / 2.0)


def spectrum_stats(spectrum):
    ordered = spectrum.is_strictly_ordered()
    if spectrum.N < 2:
        return SpectrumStats(None, None, None, None, ordered)
    gaps = np.diff(np.sort(spectrum.p))
    # coherence is monotone in the gap, so the closest pair decides the max
    return SpectrumStats(
        min_gap=float(gaps.min()),
        max_gap=float(gaps.max()),
        mean_gap=float(gaps.mean()),
        max_coherence=float(sech(gaps.min() / 2.0)),
        is_strictly_ordered=ordered,
    )


def geometric_init(N, T):
    """Equal gaps so the rates run geometrically from ``1/T`` to 1."""
    if N < 2:
        raise InvalidParameterError("geometric_init needs N >= 2")
    if not T > 1:
        raise InvalidParameterError(f"T must exceed 1, got {T}")
    log_T = np.log(T)
    gap = log_T / (N - 1)
    return PostParams(-log_T, np.full(N - 1, float(softplus_inv(gap))))


def nondegeneracy_bound(theta, c):
    """Coherence bound for a spectrum built in *rate* space.

    ``theta`` is the anchor rate and every gap parameter is at least ``c``.
    The bound is attained by channels 1 and 2 when all gaps equal ``c``.
    Later adjacent pairs have rate ratios closer to 1, so for N >= 3 the
    overall maximum can exceed this value; see :func:`lograte_coherence_bound`
    for the bound that holds for every pair.
    """
    if not theta > 0:
        raise DomainError(f"anchor rate theta must be positive, got {theta}")
    return float(sech(0.5 * np.log1p(softplus(c) / theta)))


def lograte_coherence_bound(c):
    """Max coherence when log-rate gaps are softplus(delta) with delta >= c."""
    return float(sech(softplus(c) / 2.0))
