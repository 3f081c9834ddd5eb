"""Underwater acoustic channel: spreading/absorption loss, multipath
frequency response and four-source ambient noise."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

SOUND_SPEED = 1500.0  # m/s
DEFAULT_SPREADING = 1.5
# 1 W of omnidirectional acoustic power radiates 170.8 dB re 1 uPa @ 1 m.
SOURCE_LEVEL_DB_PER_WATT = 170.8


class ChannelError(ValueError):
    """Raised on invalid channel-model inputs."""


@dataclass(frozen=True)
class PathSpec:
    delay_s: float
    path_length_m: float
    reflection_coeff: complex = 1.0
    n_surface: int = 0
    n_bottom: int = 0

    def __post_init__(self):
        if self.delay_s < 0:
            raise ChannelError(f"negative path delay {self.delay_s}")
        if self.path_length_m <= 0:
            raise ChannelError(f"non-positive path length {self.path_length_m}")
        if abs(self.reflection_coeff) > 1 + 1e-12:
            raise ChannelError(f"|reflection_coeff| > 1: {self.reflection_coeff}")


@dataclass(frozen=True)
class NoiseModelParams:
    shipping_activity: float = 0.5
    wind_speed_mps: float = 0.0

    def __post_init__(self):
        if not 0.0 <= self.shipping_activity <= 1.0:
            raise ChannelError("shipping_activity must lie in [0, 1]")
        if self.wind_speed_mps < 0:
            raise ChannelError("wind_speed_mps must be >= 0")


@dataclass(frozen=True, eq=False)
class ChannelResponse:
    """Frequency response of one SCN-to-user link on the subcarrier grid."""

    user_id: int
    range_m: float
    freqs_hz: np.ndarray
    h: np.ndarray = field(repr=False)

    def __post_init__(self):
        freqs = np.asarray(self.freqs_hz, dtype=float)
        h = np.asarray(self.h, dtype=complex)
        if freqs.ndim != 1 or freqs.shape != h.shape:
            raise ChannelError("freqs_hz and h must be 1-D with equal length")
        if freqs.size > 1 and np.any(np.diff(freqs) <= 0):
            raise ChannelError("freqs_hz must be strictly increasing")
        if not np.all(np.isfinite(h)):
            raise ChannelError(f"non-finite channel gain for user {self.user_id}")
        if self.range_m <= 0:
            raise ChannelError(f"non-positive range for user {self.user_id}")
        freqs.setflags(write=False)
        h.setflags(write=False)
        object.__setattr__(self, "freqs_hz", freqs)
        object.__setattr__(self, "h", h)

    @property
    def K(self) -> int:
        return self.h.size

    @property
    def phase(self) -> np.ndarray:
        return np.angle(self.h)

    @property
    def gain2(self) -> np.ndarray:
        return np.abs(self.h) ** 2


def subcarrier_freqs(f_l: float, bandwidth: float, K: int) -> np.ndarray:
    """f_k = f_l + k * bandwidth / K for k = 0..K-1."""
    if K < 1 or bandwidth <= 0 or f_l <= 0:
        raise ChannelError("need K >= 1, bandwidth > 0, f_l > 0")
    return f_l + np.arange(K) * (bandwidth / K)


def _check_freq(f_hz):
    f = np.asarray(f_hz, dtype=float)
    if np.any(f <= 0):
        raise ChannelError("frequency must be positive")
    return f


def absorption_coeff_db_per_km(f_hz):
    """Thorp absorption in dB/km (frequency in Hz)."""
    F = _check_freq(f_hz) / 1000.0
    F2 = F * F
    return 0.11 * F2 / (1 + F2) + 44 * F2 / (4100 + F2) + 2.75e-4 * F2 + 0.003


def transmission_loss_db(r_m, f_hz, spreading=DEFAULT_SPREADING, L0=1.0):
    r = np.asarray(r_m, dtype=float)
    if np.any(r <= 0):
        raise ChannelError("range must be positive")
    if not 1.0 <= spreading <= 2.0:
        raise ChannelError("spreading factor must lie in [1, 2]")
    return spreading * 10 * np.log10(r) + absorption_coeff_db_per_km(f_hz) * r / 1000.0 + 10 * np.log10(L0)


def transmission_loss(r_m, f_hz, spreading=DEFAULT_SPREADING, L0=1.0):
    """Linear power loss L0 * r^s * a(f)^(r/1000)."""
    return 10.0 ** (transmission_loss_db(r_m, f_hz, spreading, L0) / 10.0)


def path_gain(r_m, f_hz, gains=(1.0, 1.0), spreading=DEFAULT_SPREADING, L0=1.0):
    g_t, g_r = gains
    if g_t <= 0 or g_r <= 0:
        raise ChannelError("transmit/receive gains must be positive")
    # via dB: extreme losses underflow to 0 instead of overflowing L
    return g_t * g_r * 10.0 ** (-transmission_loss_db(r_m, f_hz, spreading, L0) / 20.0)


def synth_channel(paths, freqs_hz, gains=(1.0, 1.0), spreading=DEFAULT_SPREADING,
                  L0=1.0, range_m=None, user_id=0) -> ChannelResponse:
    """Sum the multipath arrivals into a frequency response on ``freqs_hz``.

    ``range_m`` defaults to the shortest path length.
    """
    if not paths:
        raise ChannelError("need at least one propagation path")
    f = _check_freq(freqs_hz)
    h = np.zeros(f.shape, dtype=complex)
    for p in paths:
        amp = path_gain(p.path_length_m, f, gains, spreading, L0)
        h += amp * p.reflection_coeff * np.exp(-2j * np.pi * f * p.delay_s)
    if range_m is None:
        range_m = min(p.path_length_m for p in paths)
    return ChannelResponse(user_id=user_id, range_m=float(range_m), freqs_hz=f, h=h)


def noise_components_db(f_hz, params: NoiseModelParams):
    """Turbulence, shipping, wave and thermal noise PSD in dB (F in kHz)."""
    F = _check_freq(f_hz) / 1000.0
    s, w = params.shipping_activity, params.wind_speed_mps
    turb = 17 - 30 * np.log10(F)
    ship = 40 + 20 * (s - 0.5) + 26 * np.log10(F) - 60 * np.log10(F + 0.03)
    wave = 50 + 7.5 * np.sqrt(w) + 20 * np.log10(F) - 40 * np.log10(F + 0.4)
    therm = -15 + 20 * np.log10(F)
    return turb, ship, wave, therm


def noise_psd(f_hz, params: NoiseModelParams | None = None):
    """Total ambient noise PSD, linear power sum of the four components."""
    params = params or NoiseModelParams()
    return sum(10.0 ** (c / 10.0) for c in noise_components_db(f_hz, params))


def noise_variance(freqs_hz, params: NoiseModelParams | None = None,
                   source_level_db_per_watt=SOURCE_LEVEL_DB_PER_WATT):
    """Per-subcarrier noise power sigma_k^2 = PSD(f_k) * df, in watt-equivalent
    units so that p_k |H|^2 / sigma_k^2 is an SNR with p_k in watts."""
    f = np.asarray(freqs_hz, dtype=float)
    df = f[1] - f[0] if f.size > 1 else 1.0
    return noise_psd(f, params) * df / 10.0 ** (source_level_db_per_watt / 10.0)


def _image_families(j, D, zs, zr):
    # (vertical separation, surface bounces, bottom bounces) of the four
    # image-source families with j full water-column traversals
    return [
        (2 * j * D + zs + zr, j + 1, j),
        (2 * (j + 1) * D - zs - zr, j, j + 1),
        (2 * (j + 1) * D + zs - zr, j + 1, j + 1),
        (2 * (j + 1) * D - zs + zr, j + 1, j + 1),
    ]


def random_multipath(rng_seed, geometry, n_paths, c=SOUND_SPEED, beta_range=(0.3, 0.9)):
    """Image-method multipath for an isovelocity waveguide.

    ``geometry`` is ``(water_depth, src_depth, rcv_depth, horizontal_range)``.
    Path 0 is the direct arrival; the rest are the shortest surface/bottom
    bounce families with a random reflection magnitude and a sign flip per
    surface bounce.
    """
    D, zs, zr, R = (float(g) for g in geometry)
    if n_paths < 1:
        raise ChannelError("n_paths must be >= 1")
    if min(D, zs, zr, R) <= 0:
        raise ChannelError("geometry values must be positive")
    if zs > D or zr > D:
        raise ChannelError(f"source/receiver depth exceeds water depth {D}")
    rng = np.random.default_rng(rng_seed)
    direct = float(np.hypot(R, zs - zr))
    paths = [PathSpec(direct / c, direct, 1.0)]
    bounces = []
    j = 0
    while len(bounces) < n_paths - 1:
        bounces.extend(_image_families(j, D, zs, zr))
        j += 1
    bounces.extend(_image_families(j, D, zs, zr))
    bounces.sort(key=lambda b: b[0])
    for dz, ns, nb in bounces[: n_paths - 1]:
        length = float(np.hypot(R, dz))
        mag = rng.uniform(*beta_range)
        paths.append(PathSpec(length / c, length, complex(mag * (-1) ** ns), ns, nb))
    paths.sort(key=lambda p: p.delay_s)
    return paths
