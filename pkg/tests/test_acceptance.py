"""Acceptance suite. Each test prints one PASS/FAIL line, visible without -s."""

import dataclasses
import math
import time

import numpy as np
import pytest
from scipy.stats import spearmanr

from uwisac import io
from uwisac.channel import ChannelResponse, subcarrier_freqs
from uwisac.harness import (SweepSpec, derive_seed, run_sweep, run_trial, sweep_seeds,
                            trial_context)
from uwisac.metrics import prr, user_rate
from uwisac.optimizer import (TdgrsConfig, all_pair_paprs, exhaustive_search, init_sequential,
                              tdgrs)
from uwisac.scenario import Scenario
from uwisac.sensing import TargetSpec, default_tau_grid, delay_profile, profile_values
from uwisac.waveform import (InterleavePattern, PowerVector, beam_pattern, papr_all_elements,
                             papr_db, synth_element_signal)


@pytest.fixture
def report(capsys):
    def emit(n, ok, detail, t0):
        with capsys.disabled():
            print(f"\n[acceptance {n}] {'PASS' if ok else 'FAIL'} ({time.time() - t0:.1f}s) {detail}")
        assert ok, detail
    return emit


def largest_feasible(rows, threshold=0.5):
    """Largest grid value at which a majority of trials are feasible."""
    ok = [r["sweep_value"] for r in rows if r["infeasible_frac"] < threshold]
    return max(ok) if ok else -math.inf


def test_1_beam_pattern_flatness(report):
    t0 = time.time()
    K, Mt, P = 64, 4, 1.0
    sc = Scenario()
    theta = np.linspace(-np.pi / 2, np.pi / 2, 181)
    rng = np.random.default_rng(2024)
    p = PowerVector.uniform(P, K)
    worst = 0.0
    for _ in range(1000):
        W = InterleavePattern(rng.permutation(np.arange(K) % Mt), Mt)
        g = beam_pattern(W, p, theta, sc.freqs, sc.d_t, sc.sound_speed)
        worst = max(worst, float(np.max(np.abs(g - P))))
    dt = time.time() - t0
    report(1, worst < 1e-9 * P and dt < 10, f"max |G - P_total| = {worst:.3e} over 1000 draws", t0)


def test_2_exhaustive_oracle_equivalence(report):
    t0 = time.time()
    sc = Scenario().replace(K=8, Mt=2, Nu=2)
    loose_hits = bound_hits = 0
    for s in range(100):
        ctx = trial_context(sc, s)
        cfg = TdgrsConfig(groups=1, e1=200, e2=200, seed=derive_seed(s, 2))
        ex = exhaustive_search(ctx)
        st = tdgrs(cfg, ctx)
        loose_hits += abs(st.prr_best - ex.prr_best) <= 1e-9 * ex.prr_best
        papr_0 = float(np.percentile(all_pair_paprs(ctx), 30))
        ex2 = exhaustive_search(ctx, papr_0=papr_0)
        st2 = tdgrs(dataclasses.replace(cfg, papr_0=papr_0), ctx)
        bound_hits += (ex2.found == st2.found) and abs(st2.prr_best - ex2.prr_best) <= 1e-9 * max(ex2.prr_best, 1.0)
    dt = time.time() - t0
    ok = loose_hits >= 99 and bound_hits >= 95 and dt < 120
    report(2, ok, f"loose {loose_hits}/100 (need 99), papr-bound {bound_hits}/100 (need 95)", t0)


def test_3_convergence_trend(report):
    t0 = time.time()
    sc = Scenario()
    search = TdgrsConfig(e1=256, e2=256, seed_incumbent=False)  # whole-run budgets
    spec = SweepSpec("groups", (1, 8), 200, sc, search, budget="total", seed=3)
    g1, g8 = run_sweep(spec)
    ratio = g8["mean_shuffles_95"] / g1["mean_shuffles_95"]
    prr_ok = g1["mean_prr_kbpskm"] >= 0.95 * g8["mean_prr_kbpskm"]
    dt = time.time() - t0
    detail = (f"shuffles-to-95% G=8 {g8['mean_shuffles_95']:.1f} vs G=1 {g1['mean_shuffles_95']:.1f} "
              f"(ratio {ratio:.3f}); mean PRR G=1 {g1['mean_prr_kbpskm']:.2f} vs G=8 {g8['mean_prr_kbpskm']:.2f}")
    report(3, ratio <= 0.25 and prr_ok and dt < 600, detail, t0)


def test_4_prr_min_sweep(report):
    t0 = time.time()
    sc = Scenario()
    search = TdgrsConfig(groups=8, e1=64, e2=64, papr_0=8.5)
    grid = tuple(float(v) for v in range(56, 67))
    rows = {}
    for scheme, n_random in (("tdgrs", None), ("sequential", None), ("random", 1)):
        spec = SweepSpec("prr_min", grid, 200, sc, search, scheme=scheme, random_trials=n_random, seed=4)
        rows[scheme] = run_sweep(spec)
    mean = [r["mean_prr_kbpskm"] for r in rows["tdgrs"]]
    infeas = [r["infeasible_frac"] for r in rows["tdgrs"]]
    rho = spearmanr(grid, mean)[0]
    mono = all(b >= a for a, b in zip(infeas, infeas[1:]))
    best = {k: largest_feasible(v) for k, v in rows.items()}
    beats = best["tdgrs"] > best["sequential"] and best["tdgrs"] > best["random"]
    dt = time.time() - t0
    detail = (f"spearman {rho:.3f}, infeasible non-decreasing {mono}, largest feasible prr_min "
              f"tdgrs {best['tdgrs']} / sequential {best['sequential']} / random {best['random']}")
    report(4, rho <= -0.9 and mono and beats and dt < 600, detail, t0)


def test_5_papr_sweep(report):
    t0 = time.time()
    grid = (6.5, 7.0, 7.5, 8.0, 8.5, 9.0)
    spec = SweepSpec("papr_0", grid, 200, Scenario(), TdgrsConfig(groups=8, e1=64, e2=64, prr_min=4.0), seed=5)
    rows = run_sweep(spec)
    mean = [r["mean_prr_kbpskm"] for r in rows]
    rho = spearmanr(grid, mean)[0]
    dt = time.time() - t0
    report(5, rho >= 0.9 and dt < 600, f"spearman {rho:.3f}, means {[round(m, 2) for m in mean]}", t0)


def test_6_delay_profile_identities(report):
    t0 = time.time()
    sc = Scenario()
    f, K, B = sc.freqs, sc.K, sc.bandwidth
    peak_err = null_rel = 0.0
    wins = 0
    for s in range(50):
        rng = np.random.default_rng([6, s])
        gamma = complex(*rng.normal(size=2))
        tau_q = float(rng.uniform(1e-3, 2e-2))
        tg = TargetSpec(gamma, tau_q)
        w = rng.uniform(0.5, 1.5, K)
        p_rand = PowerVector(sc.P_total * w / w.sum())
        peak = abs(profile_values(p_rand, f, tg, [tau_q])[0])
        peak_err = max(peak_err, abs(peak - abs(gamma) * p_rand.total) / (abs(gamma) * p_rand.total))

        uni = PowerVector.uniform(sc.P_total, K)
        v = profile_values(uni, f, tg, [tau_q, tau_q + 1 / B])
        null_rel = max(null_rel, abs(v[1]) / abs(v[0]))

        grid = default_tau_grid(f, tau_q)
        base = delay_profile(uni, f, tg, grid).isl_db
        others = []
        for _ in range(20):
            w = rng.uniform(0.5, 1.5, K)
            others.append(delay_profile(PowerVector(sc.P_total * w / w.sum()), f, tg, grid).isl_db)
        wins += base < min(others)
    dt = time.time() - t0
    ok = peak_err < 1e-9 and null_rel < 1e-6 and wins == 50 and dt < 60
    report(6, ok, f"peak rel err {peak_err:.1e}, null/peak {null_rel:.1e}, ISL minimal in {wins}/50", t0)


def test_7_papr_closed_forms(report):
    t0 = time.time()
    K = 16
    p = PowerVector.uniform(1.0, K)
    single = papr_db(synth_element_signal(0, InterleavePattern(np.arange(K), K), p, np.ones(K), 4))
    two_w = InterleavePattern(np.repeat(np.arange(K // 2), 2), K // 2)
    two = papr_db(synth_element_signal(3, two_w, p, np.exp(1j * np.arange(K)), 4))
    dt = time.time() - t0
    ok = abs(single) <= 1e-9 and abs(two - 3.0103) <= 1e-3 and dt < 1
    report(7, ok, f"single tone {single:.2e} dB, two adjacent tones {two:.6f} dB", t0)


def test_8_rate_arithmetic(report):
    t0 = time.time()
    K, Nu = 1024, 4
    f = subcarrier_freqs(1000.0, 4000.0, K)
    chans = [ChannelResponse(n + 1, 1000.0, f, np.ones(K, dtype=complex)) for n in range(Nu)]
    p = PowerVector.uniform(1.0, K)
    noise = p.p.copy()  # SNR = 1
    _, X = init_sequential(K, 4, Nu)
    rates = [user_rate(n, X, p, chans[n], noise) for n in range(Nu)]
    err = max(abs(r - 1000.0) / 1000.0 for r in rates)
    dt = time.time() - t0
    report(8, f[1] - f[0] == 3.90625 and err <= 1e-9 and dt < 1, f"R_n = {rates[0]!r} b/s, rel err {err:.1e}", t0)


def test_9_determinism_and_roundtrip(report, tmp_path):
    t0 = time.time()
    sc = Scenario()
    search = TdgrsConfig(groups=8, e1=16, e2=16, papr_0=8.5)
    spec = SweepSpec("prr_min", (0.0, 62.0), 8, sc, search, seed=9)
    blobs = []
    for workers in (1, 4, 8):
        io.write_sweep_csv(tmp_path / f"sweep{workers}.csv", run_sweep(spec, workers=workers))
        blobs.append((tmp_path / f"sweep{workers}.csv").read_bytes())
    same_bytes = blobs[0] == blobs[1] == blobs[2]

    worst = 0.0
    rows = io.read_sweep_csv(tmp_path / "sweep1.csv")
    direct = run_sweep(spec, workers=1)
    for a, b in zip(rows, direct):
        worst = max(worst, abs(a["mean_prr_kbpskm"] - b["mean_prr_kbpskm"]) / b["mean_prr_kbpskm"])

    seed = sweep_seeds(spec)[0]
    res = run_trial(sc, search, seed)
    ctx = res.context
    io.write_channels_csv(tmp_path / "channels.csv", ctx.channels)
    io.write_solution_csv(tmp_path / "solution.csv", res.state.w_best, res.state.x_best)
    io.write_history_csv(tmp_path / "history.csv", res.state.history)
    ctx2 = trial_context(sc.replace(channel_file=str(tmp_path / "channels.csv")), seed)
    W, X = io.read_solution_csv(tmp_path / "solution.csv", sc.Mt, sc.Nu)
    rep = prr(X, ctx2.p, ctx2.channels, ctx2.noise)
    paprs = papr_all_elements(W, X, ctx2.p, ctx2.frame, ctx2.channels, ctx2.L)
    worst = max(worst, abs(rep.total_kbpskm - res.report.total_kbpskm) / res.report.total_kbpskm,
                float(np.max(np.abs(paprs - res.papr_db) / res.papr_db)))
    hist = io.read_history_csv(tmp_path / "history.csv")
    worst = max(worst, abs(hist[-1][1] - res.state.prr_best) / res.state.prr_best)
    dt = time.time() - t0
    ok = same_bytes and worst <= 1e-9 and dt < 60
    report(9, ok, f"byte-identical under 1/4/8 threads {same_bytes}, worst re-ingest rel err {worst:.1e}", t0)
