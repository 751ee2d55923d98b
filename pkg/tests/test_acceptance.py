"""Acceptance criteria, one test each, at the stated tolerances.

A PASS/FAIL line per criterion is printed in the terminal summary.
"""
import json
import time

import numpy as np
import pytest

from spectaper import DecaySpectrum, PostParams, coherence, geometric_init, post_map
from spectaper import adaptive_taper, effective_spectrum, inverse_post_map, linear_taper
from spectaper import nondegeneracy_bound
from spectaper.cli import main
from spectaper.gates import RWKV_LAMBDA, rwkv_init
from spectaper.kernel_approx import rate_experiment, scale_mismatch_experiment
from spectaper.recurrence import chunked_scan, energy_mc, impulse_response, sequential_scan
from spectaper.spacing_mc import coherence_collapse_mc, min_gap_mc, survival_ks_distance
from test_spectrum import quad_coherence


def test_01_min_gap_constant(criterion):
    start = time.perf_counter()
    worst = 0.0
    for N in (8, 16, 32, 64):
        r = min_gap_mc(N, 100_000, seed=7, keep_samples=False)
        worst = max(worst, abs(r.mean_min_gap - 1 / ((N - 1) * (N + 1))) / r.stderr_min_gap)
    elapsed = time.perf_counter() - start
    criterion(worst <= 3 and elapsed <= 30, f"max |z|={worst:.2f} SE, {elapsed:.1f}s")


def test_02_survival_law(criterion):
    start = time.perf_counter()
    ks = {N: survival_ks_distance(min_gap_mc(N, 100_000, seed=7)) for N in (8, 32)}
    elapsed = time.perf_counter() - start
    criterion(max(ks.values()) < 0.01 and elapsed <= 30,
              f"KS={ {k: round(v, 5) for k, v in ks.items()} }, {elapsed:.1f}s")


def test_03_coherence_identity(criterion):
    start = time.perf_counter()
    rng = np.random.default_rng(2024)
    worst = 0.0
    for _ in range(100):
        r = np.exp(rng.uniform(-6, 3, 2))
        worst = max(worst, abs(coherence(*np.log(r)) - quad_coherence(*r)))
    elapsed = time.perf_counter() - start
    criterion(worst < 1e-6 and elapsed <= 5, f"max dev={worst:.2e}, {elapsed:.1f}s")


def test_04_coherence_collapse(criterion):
    start = time.perf_counter()
    out = coherence_collapse_mc([4, 16, 64, 256], 100_000, seed=7)
    elapsed = time.perf_counter() - start
    means = [m for _, m, _ in out]
    shrink = out[1][2] / out[3][2]
    ok = all(b > a for a, b in zip(means, means[1:])) and shrink >= 10 and elapsed <= 60
    criterion(ok, f"1-mu: {[f'{c:.2e}' for _, _, c in out]}, shrink={shrink:.3g}x, "
                  f"{elapsed:.1f}s")


def test_05_round_trip(criterion):
    rng = np.random.default_rng(5)
    worst = 0.0
    for _ in range(1000):
        n = int(rng.integers(2, 33))
        gaps = np.exp(rng.uniform(np.log(1e-9), np.log(10.0), n - 1))
        p = np.cumsum(np.concatenate([[rng.uniform(-10, 2)], gaps]))
        worst = max(worst, np.max(np.abs(post_map(inverse_post_map(DecaySpectrum(p))).p - p)))
    criterion(worst <= 1e-12, f"max abs err={worst:.2e}")


def test_06_nondegeneracy_tightness(criterion):
    rng = np.random.default_rng(6)
    worst = 0.0
    for _ in range(20):
        theta, c = float(np.exp(rng.uniform(-3, 3))), float(rng.uniform(-4, 4))
        # rate-space build: anchor rate theta, rate gaps softplus(c)
        rates = post_map(PostParams(theta, [c, c, c])).p
        measured = coherence(np.log(rates[0]), np.log(rates[1]))
        worst = max(worst, abs(measured - nondegeneracy_bound(theta, c)))
    criterion(worst <= 1e-12, f"max abs err={worst:.2e}")


def test_07_taper(criterion):
    exact = pinned = True
    for N in (2, 3, 8, 16, 64):
        for T in (16.0, 4096.0, 2.0**20):
            t = adaptive_taper(post_map(geometric_init(N, T)), T).alpha
            exact &= np.array_equal(t, linear_taper(N).alpha)
            pinned &= t[0] == 1.0 and t[-1] == 0.0
    rng = np.random.default_rng(7)
    done, worst = 0, 0.0
    while done < 100:
        N = int(rng.integers(3, 16))
        gaps = rng.uniform(0.3, 1.7, N - 1)
        spec = DecaySpectrum(np.cumsum(np.concatenate([[rng.normal(-4, 2)], gaps])))
        T = float(np.exp(rng.uniform(6, 14)))
        taper = adaptive_taper(spec, T)
        if taper.any_clamped or np.allclose(gaps, gaps[0]):
            continue
        g = effective_spectrum(spec, taper, T).gaps
        worst = max(worst, np.max(np.abs(g - g.mean())))
        done += 1
    criterion(exact and pinned and worst <= 1e-12,
              f"(a) {exact} (b) max gap dev={worst:.2e} (c) {pinned}")


@pytest.fixture(scope="module")
def geometric_curves():
    start = time.perf_counter()
    N = list(range(4, 21))
    small = rate_experiment("geometric", 0.5, 1024, N)
    large = rate_experiment("geometric", 0.5, 2.0**20, N)
    return small, large, time.perf_counter() - start


def test_08_geometric_rate(criterion, geometric_curves):
    small, large, elapsed = geometric_curves
    ratio = large.slope / small.slope
    ok = (small.r2 >= 0.95 and large.r2 >= 0.95 and 0.35 < ratio < 1 and elapsed <= 300
          and np.all(np.diff(small.error) < 0))
    criterion(ok, f"slope {small.slope:.3f} (R2 {small.r2:.3f}) -> {large.slope:.3f} "
                  f"(R2 {large.r2:.3f}), ratio {ratio:.3f}, {elapsed:.0f}s")


def test_09_strategy_ordering(criterion):
    start = time.perf_counter()
    ok, parts = True, []
    for beta in (0.25, 0.5, 0.75):
        g = rate_experiment("geometric", beta, 4096, [16], span_search=False).error[0]
        lin = rate_experiment("linear", beta, 4096, [16]).error[0]
        rnd = rate_experiment("random", beta, 4096, [16], seeds=range(32)).error[0]
        ok &= g <= 0.9 * lin and g <= 0.9 * rnd
        parts.append(f"b={beta}: geo {g:.2e} lin {lin:.2e} rnd {rnd:.2e}")
    elapsed = time.perf_counter() - start
    criterion(ok and elapsed <= 600, "; ".join(parts) + f", {elapsed:.0f}s")


def test_10_scale_mismatch(criterion):
    ok, parts = True, []
    for t in (64, 256, 1024, 4096):
        r = scale_mismatch_experiment(16, 4096, t, 0.5)
        ok &= r.adapted_error <= r.static_error
        ok &= abs(r.N_eff - 16 * np.log(t) / np.log(4096)) <= 1e-12
        if t == 4096:
            ok &= r.adapted_error == r.static_error
        parts.append(f"t={t}: {r.static_error:.2e}/{r.adapted_error:.2e}")
    criterion(ok, "; ".join(parts))


def test_11_scan_equivalence(criterion):
    worst_chunk = worst_oracle = 0.0
    for i in range(20):
        rng = np.random.default_rng(1100 + i)
        w = rng.uniform(0.5, 1.0, (512, 8))
        u = rng.standard_normal((512, 8, 4))
        seq = sequential_scan(w, u)
        scale = np.max(np.abs(seq))
        for c in (1, 16, 64, 512):
            worst_chunk = max(worst_chunk, np.max(np.abs(chunked_scan(w, u, c) - seq)) / scale)
        # brute-force convolution of inputs with gate suffix products
        suffix = np.vstack([np.cumprod(w[:0:-1], axis=0)[::-1], np.ones((1, 8))])
        oracle = np.einsum("sn,snd->nd", suffix, u)
        worst_oracle = max(worst_oracle, np.max(np.abs(oracle - seq[-1])) / scale)
    criterion(worst_chunk <= 1e-10 and worst_oracle <= 1e-12,
              f"chunked {worst_chunk:.2e}, oracle {worst_oracle:.2e}")


def test_12_impulse(criterion):
    spec = post_map(geometric_init(8, 4096))
    taper = linear_taper(8)
    t = 2000
    exact = bool(np.array_equal(*(lambda r: (r.measured, r.idealized))(
        impulse_response(spec, taper, 7, t - 200, [0, 50, 100, 200]))))
    mis = {}
    for phi in (0.05, 0.1):
        s = int(phi * t)
        mis[phi] = impulse_response(spec, taper, 0, t - s, [s]).relative_log_mismatch[0]
    shrink = mis[0.1] / mis[0.05]
    invariant = all(
        impulse_response(spec, taper, 0, tt - s, [s]).idealized[0]
        == impulse_response(spec, taper, 0, 2 * (tt - s), [2 * s]).idealized[0]
        for tt, s in [(1000, 100), (2000, 100), (777, 31)])
    criterion(exact and shrink >= 1.6 and invariant,
              f"alpha0 exact {exact}, shrink {shrink:.3f}x, phi-invariant {invariant}")


def test_13_energy(criterion):
    start = time.perf_counter()
    t1, t2 = 200, 800
    q = t2 / t1
    r1, se1 = energy_mc(1.0, 0.05, [t1, t2], 10_000, seed=13).ratio(t1, t2)
    r0, se0 = energy_mc(0.0, 0.05, [t1, t2], 10_000, seed=13).ratio(t1, t2)
    rh, _ = energy_mc(0.5, 0.02, [t1, t2], 10_000, seed=13).ratio(t1, t2)
    elapsed = time.perf_counter() - start
    ok = abs(r1 - q) <= 3 * se1 and abs(r0 - 1) <= 3 * se0 and q**0.5 < rh < q
    criterion(ok and elapsed <= 120,
              f"a=1 {r1:.3f}+-{se1:.3f}, a=0 {r0:.3f}+-{se0:.3f}, a=.5 {rh:.3f}, "
              f"{elapsed:.0f}s")


def test_14_rwkv_endpoints(criterion):
    init = rwkv_init(64, 2048)
    sig_fast = 1 / (1 + np.exp(-init.w0[-1]))
    tau = 1 / (RWKV_LAMBDA * sig_fast)
    slow = 1 / (1 + np.exp(-init.w0[0])) * RWKV_LAMBDA * 2048
    criterion(abs(sig_fast - 0.6225) < 5e-4 and abs(tau - 2.65) < 5e-3 and abs(slow - 1) < 1e-10,
              f"sigma={sig_fast:.5f}, tau={tau:.4f}, slow endpoint err={abs(slow - 1):.1e}")


DETERMINISM = {
    "spectrum-report": {"N": 6, "T": 512, "n_roundtrip": 100, "n_bound_pairs": 5},
    "collapse": {"N_list": [4, 8], "trials": 10000},
    "approx-rates": {"strategy": "all", "beta": 0.5, "T": 256, "N_list": [4, 6],
                     "seeds": [0, 1, 2], "grid_size": 256},
    "scale-mismatch": {"N": 6, "T": 1024, "t_list": [32, 1024], "grid_size": 256},
    "taper-check": {"N": 5, "T_ref": 1000, "n_spectra": 10},
    "gates-dump": {"architecture": "rwkv", "N": 8, "L": 8, "head_dim": 4},
    "impulse": {"N": 4, "T": 512, "t_list": [400], "fractions": [0.05, 0.1]},
    "energy": {"alpha": 0.5, "ell": 0.05, "t_list": [20, 80], "trials": 1000},
    "scan-check": {"L": 64, "N": 3, "d": 2, "instances": 2, "chunks": [1, 8, 64]},
}


def test_15_determinism(criterion, tmp_path):
    same = {}
    for name, params in DETERMINISM.items():
        outs = []
        for run in range(2):
            cfg = tmp_path / f"{name}.json"
            cfg.write_text(json.dumps({"experiment": name, "seed": 99, "params": params}))
            d = tmp_path / f"{name}-{run}"
            assert main(["run", str(cfg), "--out-dir", str(d)]) == 0
            meta = json.loads((d / f"{name}.csv.meta.json").read_text())
            meta["metadata"].pop("wall_time")
            outs.append(((d / f"{name}.csv").read_bytes(), meta))
        same[name] = outs[0] == outs[1]
    criterion(all(same.values()), f"{sum(same.values())}/{len(same)} experiments byte-identical")
