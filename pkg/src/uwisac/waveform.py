"""Interleaved MIMO-OFDM waveform: subcarrier-to-element and
subcarrier-to-user assignments, per-element baseband synthesis, PAPR and the
transmit beam pattern.

Assignments are stored 0-based (``assign[k]`` is the element/user index of
subcarrier k); files use 1-based indices.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .channel import SOUND_SPEED, ChannelResponse


class PatternError(ValueError):
    """Raised when an assignment violates its structural constraints."""


def _label_counts(assign, n_labels):
    return np.bincount(assign, minlength=n_labels)


@dataclass(frozen=True, eq=False)
class _Assignment:
    assign: np.ndarray
    n_labels: int
    balanced: bool = True

    def __post_init__(self):
        a = np.array(self.assign, dtype=np.int64)
        if a.ndim != 1 or a.size == 0:
            raise PatternError("assignment must be a non-empty 1-D vector")
        if self.n_labels < 1 or a.min() < 0 or a.max() >= self.n_labels:
            raise PatternError(f"labels must lie in [0, {self.n_labels})")
        if self.balanced:
            K = a.size
            if K % self.n_labels:
                raise PatternError(f"{self.n_labels} labels do not divide K={K}")
            counts = _label_counts(a, self.n_labels)
            if np.any(counts != K // self.n_labels):
                raise PatternError(f"unequal label counts {counts.tolist()}")
        a.setflags(write=False)
        object.__setattr__(self, "assign", a)

    @property
    def K(self) -> int:
        return self.assign.size

    def counts(self) -> np.ndarray:
        return _label_counts(self.assign, self.n_labels)

    def matrix(self) -> np.ndarray:
        """Binary K x n_labels one-hot matrix."""
        out = np.zeros((self.K, self.n_labels), dtype=np.int8)
        out[np.arange(self.K), self.assign] = 1
        return out

    def __eq__(self, other):
        return (type(self) is type(other) and self.n_labels == other.n_labels
                and np.array_equal(self.assign, other.assign))

    def __hash__(self):
        return hash((type(self).__name__, self.n_labels, self.assign.tobytes()))


class InterleavePattern(_Assignment):
    """Subcarrier-to-transmit-element map W."""

    @property
    def Mt(self) -> int:
        return self.n_labels


class AllocationMatrix(_Assignment):
    """Subcarrier-to-user map X."""

    @property
    def Nu(self) -> int:
        return self.n_labels


@dataclass(frozen=True, eq=False)
class PowerVector:
    p: np.ndarray

    def __post_init__(self):
        p = np.array(self.p, dtype=float)
        if p.ndim != 1 or np.any(p <= 0) or not np.all(np.isfinite(p)):
            raise PatternError("powers must be a finite positive 1-D vector")
        p.setflags(write=False)
        object.__setattr__(self, "p", p)

    @classmethod
    def uniform(cls, P_total: float, K: int) -> "PowerVector":
        return cls(np.full(K, P_total / K))

    @property
    def total(self) -> float:
        return float(self.p.sum())

    @property
    def amplitude(self) -> np.ndarray:
        return np.sqrt(self.p)

    def is_uniform(self, P_total: float, rtol=1e-9) -> bool:
        return bool(np.allclose(self.p, P_total / self.p.size, rtol=rtol, atol=0))


@dataclass(frozen=True, eq=False)
class SymbolFrame:
    """Unit-modulus J-PSK symbols, one row per user."""

    indices: np.ndarray
    psk_order: int = 4

    def __post_init__(self):
        idx = np.array(self.indices, dtype=np.int64)
        if idx.ndim != 2:
            raise PatternError("symbol indices must be an Nu x (K/Nu) matrix")
        if self.psk_order < 2 or idx.min() < 0 or idx.max() >= self.psk_order:
            raise PatternError("symbol indices must lie in [0, J) with J >= 2")
        idx.setflags(write=False)
        object.__setattr__(self, "indices", idx)

    @classmethod
    def random(cls, rng, Nu: int, per_user: int, psk_order: int = 4) -> "SymbolFrame":
        rng = np.random.default_rng(rng)
        return cls(rng.integers(0, psk_order, size=(Nu, per_user)), psk_order)

    @property
    def user_symbols(self) -> np.ndarray:
        return np.exp(2j * np.pi * self.indices / self.psk_order)


def subcarrier_rank(assign: np.ndarray, n_labels: int) -> np.ndarray:
    """Rank of each subcarrier among those sharing its label, ascending k."""
    assign = np.asarray(assign)
    onehot = assign[..., None] == np.arange(n_labels)
    seen = np.cumsum(onehot, axis=-2) - 1
    return np.take_along_axis(seen, assign[..., None], axis=-1)[..., 0]


def channel_phase_matrix(channels) -> np.ndarray:
    """Nu x K matrix of conj(e^{j angle H_n(f_k)})."""
    return np.stack([np.exp(-1j * ch.phase) for ch in channels])


def modified_symbols(X: AllocationMatrix, frame: SymbolFrame, channels) -> np.ndarray:
    """Phase-precompensated symbol vector: subcarrier k carries user
    ``X.assign[k]``'s next symbol rotated by the conjugate channel phase."""
    if any(ch.K != X.K for ch in channels):
        raise PatternError("channel length does not match allocation K")
    if len(channels) != X.Nu or frame.indices.shape[0] != X.Nu:
        raise PatternError("need one channel and one symbol row per user")
    return _modified_symbols(X.assign, frame.user_symbols, channel_phase_matrix(channels))


def _modified_symbols(x_assign, user_symbols, conj_phase):
    rank = subcarrier_rank(x_assign, user_symbols.shape[0])
    k = np.arange(x_assign.shape[-1])
    return conj_phase[x_assign, k] * user_symbols[x_assign, rank]


def _element_spectra(w_assign, amp_dbar, Mt, L):
    # (..., Mt, L*K) zero-padded spectra, subcarrier k on bin k
    w_assign = np.asarray(w_assign)
    K = w_assign.shape[-1]
    mask = w_assign[..., None, :] == np.arange(Mt)[:, None]
    spec = np.zeros(w_assign.shape[:-1] + (Mt, L * K), dtype=complex)
    spec[..., :K] = np.where(mask, amp_dbar[..., None, :], 0)
    return spec


def _synthesize(spec, K):
    # F^H with 1/sqrt(K) normalization on the L-times finer time grid
    n = spec.shape[-1]
    return np.fft.ifft(spec, axis=-1) * (n / np.sqrt(K))


def synth_element_signal(m: int, W: InterleavePattern, p: PowerVector, dbar, oversample: int = 4):
    """Baseband samples of element ``m`` over one symbol, ``oversample*K`` long."""
    if not 0 <= m < W.Mt:
        raise PatternError(f"element index {m} out of range")
    if oversample < 1:
        raise PatternError("oversample must be >= 1")
    dbar = np.asarray(dbar, dtype=complex)
    if dbar.size != W.K or p.p.size != W.K:
        raise PatternError("W, p and symbols must have the same length")
    amp = np.where(W.assign == m, p.amplitude * dbar, 0)
    spec = np.zeros(oversample * W.K, dtype=complex)
    spec[: W.K] = amp
    return _synthesize(spec, W.K)


def papr_db(signal) -> float:
    s = np.asarray(signal)
    power = np.abs(s) ** 2
    mean = power.mean()
    if mean == 0:
        raise PatternError("PAPR of an all-zero signal is undefined")
    return float(10 * np.log10(power.max() / mean))


def _papr_batch(signals):
    power = np.abs(signals) ** 2
    return 10 * np.log10(power.max(axis=-1) / power.mean(axis=-1))


def papr_batch(w_assign, dbar, amplitude, Mt: int, oversample: int = 4) -> np.ndarray:
    """PAPR in dB of every element for a batch of (W, symbol-vector) pairs.

    ``w_assign`` and ``dbar`` have shape (B, K); returns (B, Mt).
    """
    amp_dbar = np.asarray(amplitude) * np.asarray(dbar)
    spec = _element_spectra(w_assign, amp_dbar, Mt, oversample)
    return _papr_batch(_synthesize(spec, np.shape(w_assign)[-1]))


def papr_all_elements(W: InterleavePattern, X: AllocationMatrix, p: PowerVector,
                      frame: SymbolFrame, channels, oversample: int = 4) -> np.ndarray:
    if W.K != X.K:
        raise PatternError("W and X disagree on K")
    dbar = modified_symbols(X, frame, channels)
    return papr_batch(W.assign, dbar, p.amplitude, W.Mt, oversample)


def steering_vector(freqs_hz, theta, n_elem: int, spacing_m: float, c=SOUND_SPEED):
    """ULA response a(f, theta); shape (len(f), len(theta), n_elem)."""
    f = np.atleast_1d(np.asarray(freqs_hz, dtype=float))
    th = np.atleast_1d(np.asarray(theta, dtype=float))
    eta = 2 * np.pi * spacing_m * np.sin(th) / c
    return np.exp(1j * f[:, None, None] * eta[None, :, None] * np.arange(n_elem))


def beam_pattern(W, p: PowerVector, theta_grid, freqs_hz, d_t: float, c=SOUND_SPEED):
    """Radiated power G(theta) = sum_k p_k |W[k] a_t(f_k, theta)|^2.

    ``W`` is an InterleavePattern or a K x Mt binary matrix.
    """
    Wm = W.matrix() if isinstance(W, _Assignment) else np.asarray(W)
    th = np.asarray(theta_grid, dtype=float)
    if np.any(np.abs(th) > np.pi / 2 + 1e-12):
        raise PatternError("angles must lie in [-pi/2, pi/2]")
    K, Mt = Wm.shape
    if p.p.size != K or np.size(freqs_hz) != K:
        raise PatternError("W, p and frequency grid must share K")
    a = steering_vector(freqs_hz, th, Mt, d_t, c)  # (K, T, Mt)
    proj = np.einsum("km,ktm->kt", Wm, a)
    return p.p @ (np.abs(proj) ** 2)
