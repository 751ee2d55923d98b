"""Order statistics of i.i.d. decay parameters.

Checks the minimum-spacing law of uniform samples, growth of the maximum
spacing, and the resulting collapse of spectral coherence.
"""
from dataclasses import dataclass

import numpy as np

from ._errors import DomainError, InvalidParameterError
from ._random import iter_blocks
from .spectrum import sech

DENSITIES = ("uniform", "triangular")


@dataclass(frozen=True, eq=False)
class GapTrialResult:
    N: int
    trials: int
    mean_min_gap: float
    stderr_min_gap: float
    mean_max_gap: float
    stderr_max_gap: float
    mean_max_coherence: float
    density: str
    a: float
    b: float
    #: smallest density value on [a, b]; the min-gap bound scales with 1/m
    density_floor: float
    min_gaps: np.ndarray = None

    @property
    def closed_form_min_gap(self):
        """Uniform-density mean of the minimum internal spacing."""
        return (self.b - self.a) / ((self.N - 1) * (self.N + 1))

    @property
    def min_gap_bound(self):
        return 1.0 / (self.density_floor * (self.N - 1) * (self.N + 1))


def spacing_survival(N, x):
    """``P(S_min > x) = (1 - (N - 1) x)_+ ** N`` for N uniform points on [0, 1]."""
    if N < 2:
        raise InvalidParameterError("spacing law needs N >= 2")
    x = np.asarray(x, dtype=float)
    return np.clip(1.0 - (N - 1) * x, 0.0, None) ** N


def _draw(rng, n, N, density, a, b):
    u = rng.random((n, N))
    if density == "uniform":
        return a + (b - a) * u
    # density 0.5 + x on [0, 1] (floor 0.5), inverse CDF of (x + x^2) / 2
    x = (np.sqrt(1.0 + 8.0 * u) - 1.0) / 2.0
    return a + (b - a) * x


def _density_floor(density, a, b):
    return 1.0 / (b - a) if density == "uniform" else 0.5 / (b - a)


def _check_common(N, trials, a, b, density):
    if N < 2:
        raise InvalidParameterError("N must be >= 2")
    if trials < 2:
        raise InvalidParameterError("trials must be >= 2")
    if not b > a:
        raise DomainError("need b > a")
    if density not in DENSITIES:
        raise InvalidParameterError(f"unknown density {density!r}")


def min_gap_mc(N, trials, a=0.0, b=1.0, seed=0, density="uniform", keep_samples=True):
    """Minimum and maximum internal spacing of N i.i.d. draws, averaged over trials."""
    _check_common(N, trials, a, b, density)
    mins, maxs, cohs = [], [], []
    for rng, n in iter_blocks(trials, seed, N, DENSITIES.index(density)):
        vals = np.sort(_draw(rng, n, N, density, a, b), axis=1)
        gaps = np.diff(vals, axis=1)
        mins.append(gaps.min(axis=1))
        maxs.append(gaps.max(axis=1))
        if a > 0:
            cohs.append(sech(np.diff(np.log(vals), axis=1).min(axis=1) / 2.0))
    mins = np.concatenate(mins)
    maxs = np.concatenate(maxs)
    coh = float(np.concatenate(cohs).mean()) if cohs else float("nan")
    root = np.sqrt(trials)
    return GapTrialResult(
        N=N, trials=trials,
        mean_min_gap=float(mins.mean()), stderr_min_gap=float(mins.std(ddof=1) / root),
        mean_max_gap=float(maxs.mean()), stderr_max_gap=float(maxs.std(ddof=1) / root),
        mean_max_coherence=coh, density=density, a=float(a), b=float(b),
        density_floor=_density_floor(density, a, b),
        min_gaps=mins if keep_samples else None,
    )


def survival_ks_distance(result):
    """Sup distance between the empirical survival of S_min and the closed form.

    Only meaningful for uniform draws; spacings are rescaled to [0, 1].
    """
    x = np.sort(result.min_gaps / (result.b - result.a))
    n = x.size
    model = spacing_survival(result.N, x)
    # empirical survival just after and just before each sample point
    after = 1.0 - np.arange(1, n + 1) / n
    before = 1.0 - np.arange(0, n) / n
    return float(max(np.max(np.abs(after - model)), np.max(np.abs(before - model))))


def max_gap_mc(N_list, trials, seed=0):
    """Mean maximum internal spacing on uniform [0, 1] for each N."""
    out = []
    for N in N_list:
        r = min_gap_mc(int(N), trials, 0.0, 1.0, seed, keep_samples=False)
        out.append((int(N), r.mean_max_gap, r.stderr_max_gap))
    return out


def coherence_collapse_mc(N_list, trials, seed=0, a=1.0, b=2.0):
    """Mean over trials of the largest pairwise coherence among N uniform rates on [a, b]."""
    if not a > 0:
        raise DomainError("rates must be positive: need a > 0")
    if not b > a:
        raise DomainError("need b > a")
    out = []
    for N in N_list:
        N = int(N)
        if N < 2:
            raise InvalidParameterError("N must be >= 2")
        acc = 0.0
        for rng, n in iter_blocks(trials, seed, N, 0xC0):
            rates = np.sort(a + (b - a) * rng.random((n, N)), axis=1)
            gap = np.diff(np.log(rates), axis=1).min(axis=1)
            # 1 - sech(x/2) loses all digits near 1; keep the complement directly
            one_minus = 1.0 - sech(gap / 2.0)
            small = gap < 1e-4
            one_minus[small] = gap[small] ** 2 / 8.0
            acc += one_minus.sum()
        mean_c = acc / trials
        out.append((N, 1.0 - mean_c, mean_c))
    return out
