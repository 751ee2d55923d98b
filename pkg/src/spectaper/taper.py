"""Taper exponents for position-adaptive scaling.

A taper ``alpha`` shrinks channel ``k``'s rate as ``r_k * t**(-alpha_k)``.
The slowest channel (index 0, smallest log-rate) gets ``alpha = 1`` and
the fastest gets ``alpha = 0``.
"""
from dataclasses import dataclass

import numpy as np

from ._errors import DomainError, InvalidParameterError
from .spectrum import DecaySpectrum, softplus

# corrections below this many ulps of the spectrum scale are round-off
_SNAP_ULPS = 64


@dataclass(frozen=True, eq=False)
class TaperVector:
    alpha: np.ndarray
    #: channels whose unclamped exponent fell outside [0, 1]
    clamped: np.ndarray = None

    def __post_init__(self):
        alpha = np.atleast_1d(np.asarray(self.alpha, dtype=float))
        if np.any(alpha < 0) or np.any(alpha > 1):
            raise InvalidParameterError("taper exponents must lie in [0, 1]")
        clamped = self.clamped
        clamped = np.zeros(alpha.shape, bool) if clamped is None else np.asarray(clamped, bool)
        object.__setattr__(self, "alpha", alpha)
        object.__setattr__(self, "clamped", clamped)

    @property
    def N(self):
        return self.alpha.size

    @property
    def any_clamped(self):
        return bool(self.clamped.any())


@dataclass(frozen=True, eq=False)
class EquipartitionBand:
    epsilon: float
    deviation: np.ndarray


def linear_taper(N):
    if N < 1:
        raise InvalidParameterError("N must be >= 1")
    if N == 1:
        # lone channel behaves like a plain recurrence
        return TaperVector(np.zeros(1))
    k = np.arange(1, N + 1)
    return TaperVector((N - k) / (N - 1))


def _taper_correction(p, log_T):
    N = p.size
    k = np.arange(N)
    mean_gap = (p[-1] - p[0]) / (N - 1)
    offset = (p - p[0]) - k * mean_gap
    offset[0] = 0.0
    offset[-1] = 0.0
    tol = _SNAP_ULPS * np.finfo(float).eps * max(1.0, float(np.max(np.abs(p))))
    offset[np.abs(offset) <= tol] = 0.0
    return offset / log_T


def adaptive_taper(spectrum, T_ref, return_raw=False):
    """Taper that makes the effective log-rates equally spaced at ``T_ref``.

    Deviations of the spectrum from equal spacing are folded into the
    exponents, then clamped to [0, 1]. Deviations at round-off level are
    treated as zero so exactly geometric inputs give the linear taper.
    """
    p = spectrum.p if isinstance(spectrum, DecaySpectrum) else np.asarray(spectrum, float)
    N = p.size
    if N < 2:
        raise InvalidParameterError("adaptive_taper needs N >= 2")
    if not T_ref > 1:
        raise DomainError(f"T_ref must exceed 1, got {T_ref}")
    if np.any(np.diff(p) < 0):
        raise InvalidParameterError("spectrum must be ascending")
    raw = linear_taper(N).alpha + _taper_correction(p.astype(float), np.log(T_ref))
    alpha = np.clip(raw, 0.0, 1.0)
    taper = TaperVector(alpha, clamped=(raw < 0) | (raw > 1))
    return (taper, raw) if return_raw else taper


def sigmoid_lograte_proxy(w0):
    """``log(sigmoid(w0))`` evaluated as ``-softplus(-w0)``."""
    w0 = np.asarray(w0, dtype=float)
    if not np.all(np.isfinite(w0)):
        raise InvalidParameterError("logits must be finite")
    return -softplus(-w0)


def equipartition_band(N, epsilon):
    if N < 2:
        raise InvalidParameterError("equipartition_band needs N >= 2")
    if not 0 <= epsilon < 1:
        raise DomainError(f"epsilon must lie in [0, 1), got {epsilon}")
    scale = 2.0 * epsilon / (1.0 - epsilon)
    return EquipartitionBand(float(epsilon), scale * linear_taper(N).alpha)


def effective_spectrum(spectrum, taper, t):
    """Log-rates at position ``t``: ``p_k - alpha_k * ln t``."""
    if not t >= 1:
        raise DomainError(f"position t must be >= 1, got {t}")
    if taper.N != spectrum.N:
        raise InvalidParameterError("taper and spectrum lengths differ")
    if t == 1:
        return spectrum
    return DecaySpectrum(spectrum.p - taper.alpha * np.log(t))
