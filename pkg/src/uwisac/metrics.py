"""Communication metrics (rate, product of rate and range) and the full
constraint check of the joint allocation problem."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .waveform import AllocationMatrix, InterleavePattern, PowerVector, papr_all_elements

# bits/s * m -> kbps * km
KBPS_KM = 1e6

CONSTRAINT_TAGS = ("16a", "16b", "16c", "16d", "16e", "16f", "16g", "16h")


class MetricsError(ValueError):
    pass


def _subcarrier_spacing(freqs_hz):
    f = np.asarray(freqs_hz, dtype=float)
    if f.size < 2:
        raise MetricsError("need at least two subcarriers to infer spacing")
    return float(f[1] - f[0])


def rate_matrix(p: PowerVector, channels, noise) -> np.ndarray:
    """Nu x K matrix of df * log2(1 + p_k |H_n(f_k)|^2 / sigma_k^2)."""
    noise = np.asarray(noise, dtype=float)
    if np.any(noise <= 0):
        raise MetricsError("noise variance must be positive")
    df = _subcarrier_spacing(channels[0].freqs_hz)
    gain2 = np.stack([ch.gain2 for ch in channels])
    return df * np.log2(1 + p.p * gain2 / noise)


def user_rate(n: int, X: AllocationMatrix, p: PowerVector, channel_n, noise) -> float:
    """Achievable rate of user ``n`` (0-based) in bits/s."""
    if channel_n.K != X.K or np.size(noise) != X.K or p.p.size != X.K:
        raise MetricsError("inconsistent K")
    r = rate_matrix(p, [channel_n], noise)[0]
    return float(r[X.assign == n].sum())


@dataclass(frozen=True)
class PrrReport:
    per_user_rate: np.ndarray  # bits/s
    per_user_prr: np.ndarray  # bits/s * m
    total_prr: float

    @property
    def total_kbpskm(self) -> float:
        return self.total_prr / KBPS_KM

    @property
    def per_user_kbpskm(self) -> np.ndarray:
        return self.per_user_prr / KBPS_KM

    def to_text(self) -> str:
        lines = [f"total_prr_kbpskm={self.total_kbpskm:.17g}",
                 f"total_prr_bpsm={self.total_prr:.17g}"]
        for n, (r, q) in enumerate(zip(self.per_user_rate, self.per_user_prr)):
            lines.append(f"user{n + 1}_rate_bps={r:.17g}")
            lines.append(f"user{n + 1}_prr_kbpskm={q / KBPS_KM:.17g}")
        return "\n".join(lines)


def prr_from_rates(rates: np.ndarray, x_assign, ranges) -> PrrReport:
    rates = np.asarray(rates)
    Nu, K = rates.shape
    r_n = np.bincount(x_assign, weights=rates[x_assign, np.arange(K)], minlength=Nu)
    per_user = r_n * np.asarray(ranges, dtype=float)
    return PrrReport(r_n, per_user, float(per_user.sum()))


def prr(X: AllocationMatrix, p: PowerVector, channels, noise) -> PrrReport:
    if len(channels) != X.Nu:
        raise MetricsError("need one channel per user")
    return prr_from_rates(rate_matrix(p, channels, noise), X.assign, [ch.range_m for ch in channels])


@dataclass(frozen=True)
class FeasibilityReport:
    ok: bool
    violated: list
    margins: dict = field(default_factory=dict)

    def to_text(self) -> str:
        lines = [f"feasible={str(self.ok).lower()}",
                 f"violated={','.join(self.violated)}"]
        lines += [f"margin_{k}={v:.17g}" for k, v in self.margins.items()]
        return "\n".join(lines)


def _structural_ok(assign, n_labels, K):
    a = np.asarray(assign)
    labels_ok = bool(a.size == K and a.min() >= 0 and a.max() < n_labels)
    counts_ok = labels_ok and K % n_labels == 0 and bool(
        np.all(np.bincount(a, minlength=n_labels) == K // n_labels))
    return labels_ok, counts_ok


def check_feasibility(W: InterleavePattern, X: AllocationMatrix, p: PowerVector, frame,
                      channels, noise, prr_min_kbpskm: float, papr_0: float,
                      P_total: float, oversample: int = 4) -> FeasibilityReport:
    """Evaluate every constraint; infeasibility is reported, never raised.

    Dense label encodings make the one-hot rows (16h) and binary entries
    (16b/16d) hold whenever the labels are in range.
    """
    K = p.p.size
    margins = {}
    w_lab, w_cnt = _structural_ok(W.assign, W.Mt, K)
    x_lab, x_cnt = _structural_ok(X.assign, X.Nu, K)
    checks = {"16a": w_cnt, "16b": w_lab, "16c": x_cnt, "16d": x_lab, "16h": w_lab and x_lab}
    for tag in ("16a", "16b", "16c", "16d", "16h"):
        margins[tag] = 1.0 if checks[tag] else -1.0

    g_dev = float(np.max(np.abs(p.p - P_total / K)))
    checks["16g"] = g_dev <= 1e-9 * P_total / K
    margins["16g"] = -g_dev

    if x_lab:
        report = prr(X, p, channels, noise)
        margins["16e"] = float(np.min(report.per_user_kbpskm) - prr_min_kbpskm)
        checks["16e"] = margins["16e"] >= 0
    else:
        margins["16e"], checks["16e"] = -math.inf, False

    # an idle element has no defined PAPR
    if w_lab and x_cnt and W.K == X.K and W.counts().min() > 0:
        max_papr = float(np.max(papr_all_elements(W, X, p, frame, channels, oversample)))
        margins["16f"] = papr_0 - max_papr
        checks["16f"] = max_papr <= papr_0
    else:
        margins["16f"], checks["16f"] = -math.inf, False

    violated = [t for t in CONSTRAINT_TAGS if not checks[t]]
    return FeasibilityReport(not violated, violated, {t: margins[t] for t in CONSTRAINT_TAGS})
