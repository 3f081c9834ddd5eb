"""CSV and key=value text formats for channels, solutions, histories,
sweep tables and sensing maps. Floats are written with ``repr`` so every
file re-reads to the identical value."""

from __future__ import annotations

import csv
from pathlib import Path

import numpy as np

from .channel import ChannelError, ChannelResponse
from .waveform import AllocationMatrix, InterleavePattern

CHANNEL_HEADER = ["user_id", "range_m", "f_hz", "re", "im"]
SOLUTION_HEADER = ["k", "element", "user"]
HISTORY_HEADER = ["shuffle_count", "prr_kbpskm"]
SWEEP_HEADER = ["sweep_value", "mean_prr_kbpskm", "std_prr", "infeasible_frac", "mean_shuffles_95"]
SPECTRUM_HEADER = ["tau_s", "theta_rad", "magnitude"]


def _fmt(x) -> str:
    return repr(float(x))


def _read_rows(path, header):
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        got = next(reader, None)
        if got != header:
            raise ValueError(f"{path}: expected header {','.join(header)}, got {got}")
        return [row for row in reader if row]


def _write_rows(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def write_channels_csv(path, channels) -> None:
    rows = []
    for ch in channels:
        for f, h in zip(ch.freqs_hz, ch.h):
            rows.append([ch.user_id, _fmt(ch.range_m), _fmt(f), _fmt(h.real), _fmt(h.imag)])
    _write_rows(path, CHANNEL_HEADER, rows)


def read_channels_csv(path, freqs_hz=None, rtol=1e-9) -> list:
    """Channels ordered by user_id. With ``freqs_hz`` given, every user must
    cover exactly that subcarrier grid."""
    by_user = {}
    for row in _read_rows(path, CHANNEL_HEADER):
        uid = int(row[0])
        by_user.setdefault(uid, []).append((float(row[1]), float(row[2]), complex(float(row[3]), float(row[4]))))
    if not by_user:
        raise ChannelError(f"{path}: no channel rows")
    out = []
    for uid in sorted(by_user):
        rows = sorted(by_user[uid], key=lambda r: r[1])
        ranges = {r[0] for r in rows}
        if len(ranges) != 1:
            raise ChannelError(f"{path}: user {uid} has inconsistent range_m")
        f = np.array([r[1] for r in rows])
        if freqs_hz is not None:
            ref = np.asarray(freqs_hz, dtype=float)
            if f.shape != ref.shape or not np.allclose(f, ref, rtol=rtol, atol=0):
                raise ChannelError(f"{path}: user {uid} does not cover the scenario's {ref.size} subcarriers")
        out.append(ChannelResponse(uid, rows[0][0], f, np.array([r[2] for r in rows])))
    return out


def write_solution_csv(path, W: InterleavePattern, X: AllocationMatrix) -> None:
    rows = [[k + 1, int(w) + 1, int(x) + 1] for k, (w, x) in enumerate(zip(W.assign, X.assign))]
    _write_rows(path, SOLUTION_HEADER, rows)


def read_solution_csv(path, Mt: int, Nu: int):
    rows = sorted((int(r[0]), int(r[1]), int(r[2])) for r in _read_rows(path, SOLUTION_HEADER))
    ks = [r[0] for r in rows]
    if ks != list(range(1, len(rows) + 1)):
        raise ValueError(f"{path}: subcarrier indices must be 1..K")
    W = InterleavePattern([r[1] - 1 for r in rows], Mt)
    X = AllocationMatrix([r[2] - 1 for r in rows], Nu)
    return W, X


def write_history_csv(path, history) -> None:
    _write_rows(path, HISTORY_HEADER, [[int(c), _fmt(v)] for c, v in history])


def read_history_csv(path) -> list:
    return [(int(r[0]), float(r[1])) for r in _read_rows(path, HISTORY_HEADER)]


def write_sweep_csv(path, rows) -> None:
    _write_rows(path, SWEEP_HEADER, [[_fmt(r[h]) for h in SWEEP_HEADER] for r in rows])


def read_sweep_csv(path) -> list:
    return [dict(zip(SWEEP_HEADER, map(float, r))) for r in _read_rows(path, SWEEP_HEADER)]


def write_spectrum_csv(path, tau_grid, theta_grid, magnitude) -> None:
    """Rows of (tau, theta, |C|); ``magnitude`` is (len(tau), len(theta))."""
    mag = np.asarray(magnitude).reshape(len(tau_grid), len(theta_grid))
    rows = [[_fmt(t), _fmt(th), _fmt(mag[i, j])]
            for i, t in enumerate(tau_grid) for j, th in enumerate(theta_grid)]
    _write_rows(path, SPECTRUM_HEADER, rows)


def read_spectrum_csv(path):
    rows = [tuple(map(float, r)) for r in _read_rows(path, SPECTRUM_HEADER)]
    tau = np.array(sorted({r[0] for r in rows}))
    theta = np.array(sorted({r[1] for r in rows}))
    mag = np.empty((tau.size, theta.size))
    ti = {t: i for i, t in enumerate(tau)}
    hi = {h: j for j, h in enumerate(theta)}
    for t, h, m in rows:
        mag[ti[t], hi[h]] = m
    return tau, theta, mag


def write_text_block(path, *blocks: str) -> None:
    Path(path).write_text("\n".join(b.rstrip("\n") for b in blocks) + "\n")


def read_text_block(path) -> dict:
    out = {}
    for line in Path(path).read_text().splitlines():
        if "=" in line:
            k, v = line.split("=", 1)
            out[k.strip()] = v.strip()
    return out
