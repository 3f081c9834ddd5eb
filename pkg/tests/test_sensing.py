import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from uwisac.channel import subcarrier_freqs
from uwisac.optimizer import init_sequential
from uwisac.sensing import (SensingError, TargetSpec, default_tau_grid, delay_profile,
                            echo_snapshot, echo_snapshots, joint_spectrum, local_maxima,
                            profile_values, sidelobe_metrics)
from uwisac.waveform import InterleavePattern, PowerVector

K, B, F_L = 64, 4000.0, 1000.0
FREQS = subcarrier_freqs(F_L, B, K)
DF = B / K
D_R = 0.75  # half wavelength at 1 kHz


def uniform():
    return PowerVector.uniform(1.0, K)


def perturbed(rng, scale=0.5):
    w = rng.uniform(1 - scale, 1 + scale, K)
    return PowerVector(w / w.sum())


def test_peak_equals_total_power():
    tg = TargetSpec(1.0, 2e-3)
    assert abs(profile_values(uniform(), FREQS, tg, [2e-3])[0]) == pytest.approx(1.0, abs=1e-12)
    tg = TargetSpec(0.3 - 0.4j, 5e-3)
    p = perturbed(np.random.default_rng(0))
    assert abs(profile_values(p, FREQS, tg, [5e-3])[0]) == pytest.approx(0.5 * p.total, rel=1e-12)


def test_grating_repeat_and_first_null():
    tg = TargetSpec(1.0, 1e-3)
    v = profile_values(uniform(), FREQS, tg, [1e-3 + 1 / DF, 1e-3 + 1 / B, 1e-3 - 1 / B])
    assert abs(v[0]) == pytest.approx(1.0, rel=1e-9)
    assert abs(v[1]) < 1e-9
    assert abs(v[2]) < 1e-9


def test_profile_matches_zero_padded_idft():
    L = 8
    rng = np.random.default_rng(1)
    p = perturbed(rng)
    tg = TargetSpec(1.0, 0.0)
    tau = np.arange(L * K) / (L * B)
    direct = profile_values(p, FREQS, tg, tau)
    spec = np.zeros(L * K)
    spec[:K] = p.p
    via_fft = np.fft.ifft(spec) * (L * K)
    np.testing.assert_allclose(np.abs(direct), np.abs(via_fft), atol=1e-12)


@given(seed=st.integers(0, 2**32 - 1))
@settings(max_examples=30)
def test_profile_magnitude_symmetric_about_target(seed):
    p = perturbed(np.random.default_rng(seed))
    tg = TargetSpec(1.0, 3e-3)
    off = np.linspace(0, 2 / B, 17)
    a = np.abs(profile_values(p, FREQS, tg, 3e-3 + off))
    b = np.abs(profile_values(p, FREQS, tg, 3e-3 - off))
    np.testing.assert_allclose(a, b, atol=1e-12)


def test_uniform_psl_is_dirichlet_first_sidelobe():
    tg = TargetSpec(1.0, 2e-3)
    prof = delay_profile(uniform(), FREQS, tg, default_tau_grid(FREQS, 2e-3))
    assert prof.tau_grid[prof.peak_index] == pytest.approx(2e-3, abs=1e-15)
    # sin(Kx)/(K sin x) first sidelobe, sampled on a 1/(8B) grid
    x = np.linspace(1.0, 2.0, 200001) * np.pi / K
    dense = np.abs(np.sin(K * x) / (K * np.sin(x)))
    assert 20 * np.log10(dense.max()) == pytest.approx(-13.3, abs=0.2)
    assert prof.psl_db == pytest.approx(-13.3, abs=0.2)
    assert prof.psl_db <= 20 * np.log10(dense.max()) + 1e-9


def test_sidelobe_scale_invariance():
    grid = default_tau_grid(FREQS, 2e-3)
    p = perturbed(np.random.default_rng(2))
    a = delay_profile(p, FREQS, TargetSpec(1.0, 2e-3), grid)
    b = delay_profile(p, FREQS, TargetSpec(-7.0 + 2j, 2e-3), grid)
    assert b.psl_db == pytest.approx(a.psl_db, abs=1e-9)
    assert b.isl_db == pytest.approx(a.isl_db, abs=1e-9)


def test_uniform_power_minimizes_isl():
    tg = TargetSpec(1.0, 2e-3)
    grid = default_tau_grid(FREQS, 2e-3)
    base = delay_profile(uniform(), FREQS, tg, grid).isl_db
    rng = np.random.default_rng(3)
    others = [delay_profile(perturbed(rng), FREQS, tg, grid).isl_db for _ in range(20)]
    assert base < min(others)


def test_delay_profile_errors():
    tg = TargetSpec(1.0, 2e-3)
    with pytest.raises(SensingError):
        delay_profile(uniform(), FREQS, tg, np.linspace(3e-3, 4e-3, 200))
    with pytest.raises(SensingError):
        delay_profile(uniform(), FREQS, tg, np.linspace(0, 4e-3, 10))
    prof = delay_profile(uniform(), FREQS, tg, default_tau_grid(FREQS, 2e-3))
    with pytest.raises(SensingError):
        sidelobe_metrics(prof, 1e-9)
    with pytest.raises(SensingError):
        TargetSpec(1.0, -1.0)
    with pytest.raises(SensingError):
        TargetSpec(1.0, 0.0, 2.0)


def _waveform(seed=0):
    rng = np.random.default_rng(seed)
    W = InterleavePattern(rng.permutation(np.arange(K) % 4), 4)
    dbar = np.exp(2j * np.pi * rng.integers(0, 4, K) / 4)
    return W, uniform(), dbar


def test_echo_broadside_entries_equal_tone():
    W, p, dbar = _waveform()
    y = echo_snapshot(5, W, p, dbar, [TargetSpec(1.0, 0.0, 0.0)], FREQS, 4, D_R, n_samples=8)
    t = np.arange(8) / (8 * DF)
    tone = np.sqrt(p.p[5]) * dbar[5] * np.exp(2j * np.pi * 5 * DF * t)
    for r in range(4):
        np.testing.assert_allclose(y[r], tone, atol=1e-15)


def test_echo_zero_targets_and_linearity():
    W, p, dbar = _waveform(1)
    assert np.all(echo_snapshots(W, p, dbar, [], FREQS, 4, D_R) == 0)
    t1 = TargetSpec(0.5, 2e-3, 0.3)
    t2 = TargetSpec(0.2j, 7e-3, -0.6)
    both = echo_snapshots(W, p, dbar, [t1, t2], FREQS, 4, D_R)
    parts = echo_snapshots(W, p, dbar, [t1], FREQS, 4, D_R) + echo_snapshots(W, p, dbar, [t2], FREQS, 4, D_R)
    np.testing.assert_allclose(both, parts, atol=1e-14)


def test_echo_noise_is_seeded():
    W, p, dbar = _waveform(2)
    a = echo_snapshots(W, p, dbar, [], FREQS, 4, D_R, noise_power=1e-3, rng=9)
    b = echo_snapshots(W, p, dbar, [], FREQS, 4, D_R, noise_power=1e-3, rng=9)
    np.testing.assert_array_equal(a, b)
    assert np.mean(np.abs(a) ** 2) == pytest.approx(1e-3, rel=0.1)


def test_joint_spectrum_broadside_reduces_to_delay_profile():
    W, p, dbar = _waveform(3)
    tg = TargetSpec(0.7, 3e-3, 0.0)
    y = echo_snapshots(W, p, dbar, [tg], FREQS, 4, D_R)
    tau = default_tau_grid(FREQS, 3e-3)
    S = joint_spectrum(y, W, p, dbar, FREQS, tau, [0.0], D_R)
    np.testing.assert_allclose(S[:, 0], delay_profile(p, FREQS, tg, tau).magnitude, atol=1e-12)
    i = int(np.argmax(S[:, 0]))
    assert tau[i] == pytest.approx(3e-3, abs=1e-15)


def test_joint_spectrum_two_targets_and_scaling():
    W, p, dbar = _waveform(4)
    truth = [TargetSpec(1.0, 2e-3, np.radians(20)), TargetSpec(1.0, 9e-3, np.radians(-35))]
    tau = np.arange(8 * K) / (8 * B)
    theta = np.radians(np.arange(-90, 91, 1.0))
    y = echo_snapshots(W, p, dbar, truth, FREQS, 4, D_R)
    S = joint_spectrum(y, W, p, dbar, FREQS, tau, theta, D_R)
    peaks = local_maxima(S, 2)
    found = sorted((tau[i], theta[j]) for i, j in peaks)
    for (t_hat, th_hat), tg in zip(found, truth):
        assert abs(t_hat - tg.delay_s) <= tau[1] - tau[0]
        assert abs(th_hat - tg.angle_rad) <= theta[1] - theta[0]

    loud = [TargetSpec(10 * tg.scatter_coeff, tg.delay_s, tg.angle_rad) for tg in truth]
    S10 = joint_spectrum(echo_snapshots(W, p, dbar, loud, FREQS, 4, D_R), W, p, dbar, FREQS, tau, theta, D_R)
    np.testing.assert_allclose(S10, 10 * S, rtol=1e-9, atol=1e-12)
    assert np.argmax(S10) == np.argmax(S)


def test_local_maxima_simple():
    m = np.zeros((5, 5))
    m[1, 1], m[3, 4] = 2.0, 3.0
    assert local_maxima(m, 2) == [(3, 4), (1, 1)]
