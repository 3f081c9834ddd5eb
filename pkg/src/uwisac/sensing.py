"""Target-echo simulation, matched filtering with beamforming, and
delay-profile sidelobe metrics."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .channel import SOUND_SPEED
from .waveform import InterleavePattern, PowerVector, steering_vector


class SensingError(ValueError):
    pass


@dataclass(frozen=True)
class TargetSpec:
    scatter_coeff: complex
    delay_s: float
    angle_rad: float = 0.0

    def __post_init__(self):
        if self.delay_s < 0:
            raise SensingError("target delay must be >= 0")
        if abs(self.angle_rad) > np.pi / 2:
            raise SensingError("target angle must lie in [-pi/2, pi/2]")


@dataclass(frozen=True, eq=False)
class DelayProfile:
    tau_grid: np.ndarray
    values: np.ndarray
    peak_index: int
    psl_db: float
    isl_db: float

    @property
    def magnitude(self) -> np.ndarray:
        return np.abs(self.values)


def _bandwidth(freqs_hz):
    f = np.asarray(freqs_hz, dtype=float)
    return f.size * (f[1] - f[0])


def default_tau_grid(freqs_hz, center_s: float, span_s: float | None = None, oversample: int = 8):
    """Grid with spacing 1/(oversample*B) spanning +-span_s around ``center_s``.

    The default span is half the grating period 1/df.
    """
    f = np.asarray(freqs_hz, dtype=float)
    B = _bandwidth(f)
    step = 1.0 / (oversample * B)
    if span_s is None:
        span_s = 0.5 / (f[1] - f[0])
    n = int(np.floor(span_s / step))
    return center_s + step * np.arange(-n, n + 1)


def profile_values(p, freqs_hz, target: TargetSpec, tau_grid) -> np.ndarray:
    p = p.p if isinstance(p, PowerVector) else np.asarray(p, dtype=float)
    f = np.asarray(freqs_hz, dtype=float)
    tau = np.asarray(tau_grid, dtype=float)
    phase = np.exp(2j * np.pi * np.outer(tau - target.delay_s, f))
    return target.scatter_coeff * (phase @ p)


def delay_profile(p, freqs_hz, target: TargetSpec, tau_grid, mainlobe_width_s=None) -> DelayProfile:
    """Noiseless single-target delay profile c(tau) = gamma sum_k p_k e^{j2pi f_k (tau - tau_q)}."""
    tau = np.asarray(tau_grid, dtype=float)
    if tau.size < 2 or not tau[0] <= target.delay_s <= tau[-1]:
        raise SensingError("tau grid does not cover the target delay")
    B = _bandwidth(freqs_hz)
    if np.max(np.diff(tau)) > 1.0 / (4 * B) * (1 + 1e-9):
        raise SensingError("tau grid spacing exceeds 1/(4B)")
    values = profile_values(p, freqs_hz, target, tau)
    width = 1.0 / B if mainlobe_width_s is None else mainlobe_width_s
    peak = int(np.argmax(np.abs(values)))
    prof = DelayProfile(tau, values, peak, 0.0, 0.0)
    psl, isl = sidelobe_metrics(prof, width)
    return DelayProfile(tau, values, peak, psl, isl)


def sidelobe_metrics(profile: DelayProfile, mainlobe_width_s: float):
    """(PSL, ISL) in dB with the mainlobe taken as |tau - tau_peak| < width."""
    tau = profile.tau_grid
    if mainlobe_width_s <= np.min(np.diff(tau)):
        raise SensingError("mainlobe width must exceed the grid spacing")
    mag2 = np.abs(profile.values) ** 2
    main = np.abs(tau - tau[profile.peak_index]) < mainlobe_width_s
    if main.all():
        raise SensingError("mainlobe covers the whole grid")
    psl = 10 * np.log10(mag2[~main].max() / mag2[profile.peak_index])
    isl = 10 * np.log10(mag2[~main].sum() / mag2[main].sum())
    return float(psl), float(isl)


def _receive_axes(freqs_hz, theta, Mr, d_r, Mt, d_t, c):
    a_r = steering_vector(freqs_hz, theta, Mr, d_r, c)  # (K, T, Mr)
    a_t = steering_vector(freqs_hz, theta, Mt, d_t, c)  # (K, T, Mt)
    return a_r, a_t


def echo_snapshot(k: int, W: InterleavePattern, p: PowerVector, dbar, targets, freqs_hz,
                  Mr: int, d_r: float, d_t: float | None = None, noise_power: float = 0.0,
                  n_samples: int = 16, rng=None, c=SOUND_SPEED) -> np.ndarray:
    """Mr x n_samples echo of subcarrier k over one symbol.

    Each target returns a delayed, array-phased copy of the subcarrier-k
    tone; ZP keeps the delayed tone inside the receive window.
    """
    if Mr < 1:
        raise SensingError("Mr must be >= 1")
    f = np.asarray(freqs_hz, dtype=float)
    d_t = Mr * d_r if d_t is None else d_t
    df = f[1] - f[0]
    t = np.arange(n_samples) / (n_samples * df)
    tone = np.sqrt(p.p[k]) * dbar[k] * np.exp(2j * np.pi * k * df * t)
    m_k = W.assign[k]
    y = np.zeros((Mr, n_samples), dtype=complex)
    for tg in targets:
        th = [tg.angle_rad]
        a_r = steering_vector(f[k], th, Mr, d_r, c)[0, 0]
        a_t = steering_vector(f[k], th, W.Mt, d_t, c)[0, 0, m_k]
        y += (tg.scatter_coeff * np.exp(-2j * np.pi * f[k] * tg.delay_s) * a_t) * np.outer(a_r, tone)
    if noise_power > 0:
        rng = np.random.default_rng(rng)
        noise = rng.standard_normal((Mr, n_samples, 2)) @ np.array([1, 1j])
        y += np.sqrt(noise_power / 2) * noise
    return y


def echo_snapshots(W, p, dbar, targets, freqs_hz, Mr, d_r, d_t=None, noise_power=0.0,
                   n_samples=16, rng=None, c=SOUND_SPEED) -> np.ndarray:
    """Snapshots for all subcarriers, shape (K, Mr, n_samples)."""
    rng = np.random.default_rng(rng)
    return np.stack([
        echo_snapshot(k, W, p, dbar, targets, freqs_hz, Mr, d_r, d_t, noise_power, n_samples, rng, c)
        for k in range(W.K)
    ])


def joint_spectrum(snapshots, W: InterleavePattern, p: PowerVector, dbar, freqs_hz, tau_grid,
                   theta_grid, d_r: float, d_t: float | None = None, c=SOUND_SPEED) -> np.ndarray:
    """|C(tau, theta)| map, shape (len(tau_grid), len(theta_grid)).

    Per subcarrier: correlate with the known tone (zero-lag response p_k),
    steer the virtual array (receive response times the emitting element's
    transmit phase), then sum over subcarriers with the delay phase.
    """
    y = np.asarray(snapshots)
    K, Mr, N = y.shape
    f = np.asarray(freqs_hz, dtype=float)
    d_t = Mr * d_r if d_t is None else d_t
    df = f[1] - f[0]
    t = np.arange(N) / (N * df)
    template = (np.sqrt(p.p) * np.asarray(dbar))[:, None] * np.exp(2j * np.pi * np.arange(K)[:, None] * df * t)
    mf = np.einsum("krn,kn->kr", y, template.conj()) / N  # (K, Mr)
    a_r, a_t = _receive_axes(f, theta_grid, Mr, d_r, W.Mt, d_t, c)
    a_tk = a_t[np.arange(K), :, W.assign]  # (K, T)
    beam = np.einsum("ktr,kr->kt", a_r.conj(), mf) * a_tk.conj() / Mr  # (K, T)
    delay = np.exp(2j * np.pi * np.outer(np.asarray(tau_grid, dtype=float), f))  # (tau, K)
    return np.abs(delay @ beam)


def local_maxima(spectrum: np.ndarray, count: int):
    """Grid indices of the ``count`` largest strict 2-D local maxima (8-neighbourhood)."""
    m = np.asarray(spectrum)
    pad = np.pad(m, 1, constant_values=-np.inf)
    is_max = np.ones_like(m, dtype=bool)
    for di in (-1, 0, 1):
        for dj in (-1, 0, 1):
            if di or dj:
                nb = pad[1 + di: 1 + di + m.shape[0], 1 + dj: 1 + dj + m.shape[1]]
                is_max &= m > nb
    idx = np.argwhere(is_max)
    order = np.argsort(-m[is_max], kind="stable")
    return [tuple(i) for i in idx[order[:count]]]
