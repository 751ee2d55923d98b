"""Position-adaptive decay-gate schedules for several recurrence families.

Positions are 1-indexed with an offset: row ``l`` (0-based) of a schedule
sits at position ``t0 + l + 1``, so ``t = 0`` never occurs.
"""
from dataclasses import dataclass

import numpy as np
from scipy.special import expit, logit

from ._errors import DomainError, InvalidModulationError, InvalidParameterError, ShapeError
from .spectrum import post_map
from .taper import TaperVector, adaptive_taper, sigmoid_lograte_proxy

#: fixed RWKV-style decay scale exp(-1/2)
RWKV_LAMBDA = float(np.exp(-0.5))
RWKV_FAST_LOGIT = 0.5
ZIGZAG_AMPLITUDE = 2.5


@dataclass(frozen=True, eq=False)
class GateSchedule:
    w: np.ndarray
    t0: int = 0
    #: per-step log-decay factors when the family exposes them (RWKV)
    log_decay: np.ndarray = None

    @property
    def L(self):
        return self.w.shape[0]

    @property
    def N(self):
        return self.w.shape[1]

    @property
    def positions(self):
        return positions(self.t0, self.L)


@dataclass(frozen=True, eq=False)
class ModulationInput:
    values: np.ndarray
    kind: str = "mamba"

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.ndim != 2:
            raise ShapeError("modulation must be an L x N matrix")
        if self.kind not in ("mamba", "rwkv"):
            raise InvalidParameterError(f"unknown modulation kind {self.kind!r}")
        if not np.all(np.isfinite(values)):
            raise InvalidModulationError("modulation contains non-finite entries")
        if self.kind == "mamba" and np.any(values <= 0):
            raise InvalidModulationError("Mamba step sizes must be strictly positive")
        object.__setattr__(self, "values", values)


@dataclass(frozen=True, eq=False)
class RwkvInit:
    w0: np.ndarray
    zigzag: np.ndarray
    lam: float = RWKV_LAMBDA

    @property
    def C(self):
        return self.w0.size


def positions(t0, L):
    if t0 < 0:
        raise DomainError(f"offset t0 must be non-negative, got {t0}")
    if L < 1:
        raise DomainError(f"window length must be >= 1, got {L}")
    return np.arange(t0 + 1, t0 + L + 1, dtype=float)


def position_scale(alpha, t0, L):
    """``t**(-alpha)`` as an L x N matrix, evaluated as ``exp(-alpha ln t)``."""
    log_t = np.log(positions(t0, L))
    return np.exp(-np.outer(log_t, np.asarray(alpha, dtype=float)))


def _spectrum_and_taper(params, T_train):
    spectrum = post_map(params)
    if spectrum.N == 1:
        return spectrum, TaperVector(np.zeros(1))
    return spectrum, adaptive_taper(spectrum, T_train)


def generic_gates(params, t0, L, T_train):
    spectrum, taper = _spectrum_and_taper(params, T_train)
    d_base = -np.exp(spectrum.p)
    w = np.exp(d_base * position_scale(taper.alpha, t0, L))
    return GateSchedule(w, t0)


def mamba_gates(params, delta, t0, L, T_train):
    if not isinstance(delta, ModulationInput):
        delta = ModulationInput(delta, "mamba")
    if delta.kind != "mamba":
        raise InvalidModulationError("mamba_gates needs step-size modulation")
    if delta.values.shape != (L, params.N):
        raise ShapeError(f"step sizes must be {(L, params.N)}, got {delta.values.shape}")
    spectrum, taper = _spectrum_and_taper(params, T_train)
    A = -np.exp(spectrum.p)
    w = np.exp(A * position_scale(taper.alpha, t0, L) * delta.values)
    return GateSchedule(w, t0)


def retnet_gates(params, t0, L, T_train):
    """Per-head retention decays ``gamma_h ** (t ** -alpha_h)``."""
    if params.N < 2:
        raise InvalidParameterError("retnet_gates needs at least two heads")
    spectrum, taper = _spectrum_and_taper(params, T_train)
    rate = np.exp(spectrum.p)
    # gamma_h = exp(-rate_h); raising to t^-alpha scales the exponent
    gamma = np.exp(-(rate * position_scale(taper.alpha, t0, L)))
    return GateSchedule(gamma, t0)


def rwkv_init(C, T_train, d_h=None):
    """Logits linearly spaced from ``logit(1/(lambda T))`` to 0.5."""
    if C < 2:
        raise InvalidParameterError("rwkv_init needs C >= 2")
    x = 1.0 / (RWKV_LAMBDA * T_train)
    if not 0 < x < 1:
        raise DomainError("lambda * T_train must exceed 1")
    w0 = np.linspace(logit(x), RWKV_FAST_LOGIT, C)
    zig = zigzag_bias(C, d_h) if d_h is not None else np.zeros(C)
    return RwkvInit(w0, zig)


def zigzag_bias(C, d_h):
    if d_h < 2:
        raise InvalidParameterError("head dimension must be >= 2")
    if C % d_h:
        raise ShapeError(f"C={C} is not a multiple of head dimension {d_h}")
    half = (d_h - 1) / 2.0
    u = (np.arange(C) % d_h - half) / half
    return ZIGZAG_AMPLITUDE * u * np.abs(u)


def rwkv_taper(init, T_train):
    if np.any(np.diff(init.w0) <= 0):
        raise InvalidParameterError("RWKV logits must be strictly increasing")
    return adaptive_taper(sigmoid_lograte_proxy(init.w0), T_train)


def rwkv_gates(init, modulation, taper, t0, L):
    """Sigmoid gates with the taper subtracted inside the logit."""
    if not isinstance(modulation, ModulationInput):
        modulation = ModulationInput(modulation, "rwkv")
    C = init.C
    if modulation.values.shape != (L, C):
        raise ShapeError(f"modulation must be {(L, C)}, got {modulation.values.shape}")
    if taper.N != C:
        raise ShapeError("taper length differs from channel count")
    log_t = np.log(positions(t0, L))
    logits = init.w0 + modulation.values - np.outer(log_t, taper.alpha)
    factor = -init.lam * expit(logits)
    return GateSchedule(np.exp(factor), t0, log_decay=factor)
