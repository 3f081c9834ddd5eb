"""Joint optimization of the interleave pattern W and user allocation X.

``tdgrs`` is the two-dimensional grouped random search: group by group it
shuffles X inside the group (keeping candidates whose weakest user meets the
PRR floor), then shuffles W inside the group, pairs each W with every kept X
and keeps the best pair whose element PAPRs all pass. Exhaustive enumeration,
sequential and pure-random searches serve as oracle and baselines.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .metrics import KBPS_KM, rate_matrix
from .waveform import (AllocationMatrix, InterleavePattern, PowerVector, SymbolFrame,
                       _modified_symbols, channel_phase_matrix, papr_batch)


class ConfigError(ValueError):
    """Invalid search or scenario configuration."""


class SearchBudgetError(RuntimeError):
    """Exhaustive enumeration would exceed the candidate budget."""


def init_sequential(K: int, Mt: int, Nu: int):
    """Round-robin W0 and X0."""
    if Mt < 1 or Nu < 1 or K % Mt or K % Nu:
        raise ConfigError(f"Mt={Mt} and Nu={Nu} must both divide K={K}")
    k = np.arange(K)
    return InterleavePattern(k % Mt, Mt), AllocationMatrix(k % Nu, Nu)


def group_slice(g: int, G: int, K: int) -> slice:
    size = K // G
    return slice(g * size, (g + 1) * size)


def shuffle_group(assign, g: int, G: int, rng) -> np.ndarray:
    """Copy of ``assign`` with the labels of contiguous block ``g`` permuted."""
    out = np.array(assign, copy=True)
    sl = group_slice(g, G, out.size)
    out[sl] = np.random.default_rng(rng).permutation(out[sl])
    return out


def candidate_rng(seed: int, *path: int) -> np.random.Generator:
    """Independent stream for one candidate, keyed by its position."""
    return np.random.default_rng([seed, *path])


@dataclass(frozen=True)
class TdgrsConfig:
    groups: int = 8
    e1: int = 64
    e2: int = 64
    feasible_cap: int = 8
    prr_min: float = 0.0  # kbps*km, per user
    papr_0: float = math.inf  # dB, per element
    seed: int = 0
    # Start the incumbent at the sequential pattern when it is feasible.
    # False reproduces a search that begins from an empty incumbent.
    seed_incumbent: bool = True

    def validate(self, K: int, Mt: int, Nu: int) -> None:
        for name in ("groups", "e1", "e2", "feasible_cap"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1")
        if K % self.groups:
            raise ConfigError(f"groups={self.groups} must divide K={K}")
        size = K // self.groups
        if size % Mt or size % Nu:
            raise ConfigError(f"group size {size} must be divisible by Mt={Mt} and Nu={Nu}")


@dataclass
class SearchState:
    w_best: InterleavePattern
    x_best: AllocationMatrix
    prr_best: float  # kbps*km; 0 with found=False means no feasible solution
    found: bool
    history: list = field(default_factory=list)  # (shuffle_count, incumbent kbps*km)
    evaluations: int = 0

    @property
    def status(self) -> str:
        return "feasible" if self.found else "no_feasible_solution"


class SearchContext:
    """Everything the search needs, precomputed: per-(user, subcarrier)
    rates, channel phase conjugates, the fixed symbol frame."""

    def __init__(self, channels, noise, frame: SymbolFrame, p: PowerVector, oversample: int = 4,
                 Mt: int = 4):
        self.channels = list(channels)
        self.noise = np.asarray(noise, dtype=float)
        self.frame = frame
        self.p = p
        self.L = int(oversample)
        self.Mt = int(Mt)
        self.Nu = len(self.channels)
        self.K = p.p.size
        if self.K % self.Mt or self.K % self.Nu:
            raise ConfigError(f"Mt={self.Mt} and Nu={self.Nu} must divide K={self.K}")
        if frame.indices.shape != (self.Nu, self.K // self.Nu):
            raise ConfigError("symbol frame shape does not match Nu x K/Nu")
        self.rates = rate_matrix(p, self.channels, self.noise)
        self.ranges = np.array([ch.range_m for ch in self.channels])
        self.conj_phase = channel_phase_matrix(self.channels)
        self.user_symbols = frame.user_symbols
        self.amplitude = p.amplitude

    def user_prr(self, x_assign) -> np.ndarray:
        """Per-user PRR in kbps*km; ``x_assign`` (K,) or (B, K)."""
        x = np.atleast_2d(x_assign)
        vals = self.rates[x, np.arange(self.K)]
        out = np.stack([np.where(x == n, vals, 0.0).sum(axis=-1) for n in range(self.Nu)], axis=-1)
        out = out * self.ranges / KBPS_KM
        return out if np.ndim(x_assign) == 2 else out[0]

    def dbar(self, x_assign) -> np.ndarray:
        return _modified_symbols(np.asarray(x_assign), self.user_symbols, self.conj_phase)

    def papr(self, w_assign, dbar) -> np.ndarray:
        return papr_batch(w_assign, dbar, self.amplitude, self.Mt, self.L)

    def pattern(self, w_assign, x_assign):
        return InterleavePattern(w_assign, self.Mt), AllocationMatrix(x_assign, self.Nu)


def _feasible_pair(ctx: SearchContext, w, x, prr_min, papr_0):
    per_user = ctx.user_prr(x)
    if per_user.min() < prr_min:
        return None
    if np.max(ctx.papr(w[None], ctx.dbar(x)[None])) > papr_0:
        return None
    return float(per_user.sum())


def tdgrs(cfg: TdgrsConfig, ctx: SearchContext) -> SearchState:
    K, Mt, Nu, G = ctx.K, ctx.Mt, ctx.Nu, cfg.groups
    cfg.validate(K, Mt, Nu)
    W0, X0 = init_sequential(K, Mt, Nu)
    w0, x0 = W0.assign.copy(), X0.assign.copy()
    w_best, x_best = w0, x0
    delta, found, evals = 0.0, False, 0
    if cfg.seed_incumbent:
        evals += 1
        val = _feasible_pair(ctx, w0, x0, cfg.prr_min, cfg.papr_0)
        if val is not None:
            delta, found = val, True
    history = [(0, delta)]
    count = 0
    for g in range(G):
        # Step I: group-g reassignments of X, filtered by the per-user floor
        xs = np.stack([shuffle_group(x0, g, G, candidate_rng(cfg.seed, g, 0, e)) for e in range(cfg.e1)])
        per_user = ctx.user_prr(xs)
        evals += cfg.e1
        ok = np.flatnonzero(per_user.min(axis=1) >= cfg.prr_min)
        totals = per_user[ok].sum(axis=1)
        ranked = ok[np.argsort(-totals, kind="stable")]
        # a set: repeated draws of the same X occupy one slot
        _, first = np.unique(xs[ranked], axis=0, return_index=True)
        keep = ranked[np.sort(first)][: cfg.feasible_cap]
        feas_x = xs[keep]
        feas_prr = per_user[keep].sum(axis=1)
        feas_dbar = ctx.dbar(feas_x) if keep.size else None

        # Step II: group-g reassignments of W paired with every kept X
        best_val, best_pair = -math.inf, None
        for e in range(cfg.e2):
            w = shuffle_group(w0, g, G, candidate_rng(cfg.seed, g, 1, e))
            count += 1
            # PRR does not depend on W: only X candidates beating the group
            # best so far can change the outcome
            elig = np.flatnonzero(feas_prr > best_val) if keep.size else []
            if len(elig):
                paprs = ctx.papr(np.broadcast_to(w, (len(elig), K)), feas_dbar[elig])
                evals += len(elig)
                passing = np.flatnonzero(paprs.max(axis=1) <= cfg.papr_0)
                if passing.size:
                    j = elig[passing[0]]
                    best_val, best_pair = float(feas_prr[j]), (w, feas_x[j])
            if e == cfg.e2 - 1 and best_pair is not None and best_val > delta:
                delta, found = best_val, True
                w_best, x_best = best_pair
                w0, x0 = best_pair[0].copy(), best_pair[1].copy()
            history.append((count, delta))
    W, X = ctx.pattern(w_best, x_best)
    return SearchState(W, X, delta, found, history, evals)


def _balanced_labelings(K: int, n_labels: int):
    """All K-vectors with each of ``n_labels`` labels appearing K/n_labels times."""
    size = K // n_labels

    def rec(free, label, out):
        if label == n_labels - 1:
            out[list(free)] = label
            yield out.copy()
            return
        for combo in itertools.combinations(free, size):
            out[list(combo)] = label
            rest = tuple(i for i in free if i not in combo)
            yield from rec(rest, label + 1, out)

    yield from rec(tuple(range(K)), 0, np.zeros(K, dtype=np.int64))


def n_balanced_labelings(K: int, n_labels: int) -> int:
    size = K // n_labels
    return math.factorial(K) // math.factorial(size) ** n_labels


def exhaustive_search(ctx: SearchContext, prr_min: float = 0.0, papr_0: float = math.inf,
                      budget: int = 10_000_000) -> SearchState:
    """Global optimum over every structurally valid (W, X) pair."""
    n_w, n_x = n_balanced_labelings(ctx.K, ctx.Mt), n_balanced_labelings(ctx.K, ctx.Nu)
    if n_w * n_x > budget:
        raise SearchBudgetError(f"{n_w} x {n_x} candidate pairs exceeds budget {budget}")
    ws = np.stack(list(_balanced_labelings(ctx.K, ctx.Mt)))
    xs = np.stack(list(_balanced_labelings(ctx.K, ctx.Nu)))
    per_user = ctx.user_prr(xs)
    totals = per_user.sum(axis=1)
    evals = len(xs)
    W0, X0 = init_sequential(ctx.K, ctx.Mt, ctx.Nu)
    for i in np.argsort(-totals, kind="stable"):
        if per_user[i].min() < prr_min:
            continue
        dbar = np.broadcast_to(ctx.dbar(xs[i]), ws.shape)
        paprs = ctx.papr(ws, dbar).max(axis=1)
        evals += len(ws)
        passing = np.flatnonzero(paprs <= papr_0)
        if passing.size:
            W, X = ctx.pattern(ws[passing[0]], xs[i])
            val = float(totals[i])
            return SearchState(W, X, val, True, [(evals, val)], evals)
    return SearchState(W0, X0, 0.0, False, [(evals, 0.0)], evals)


def all_pair_paprs(ctx: SearchContext, budget: int = 10_000_000) -> np.ndarray:
    """Max-element PAPR of every (W, X) pair, shape (n_x, n_w)."""
    n_w, n_x = n_balanced_labelings(ctx.K, ctx.Mt), n_balanced_labelings(ctx.K, ctx.Nu)
    if n_w * n_x > budget:
        raise SearchBudgetError(f"{n_w} x {n_x} candidate pairs exceeds budget {budget}")
    ws = np.stack(list(_balanced_labelings(ctx.K, ctx.Mt)))
    xs = np.stack(list(_balanced_labelings(ctx.K, ctx.Nu)))
    return np.stack([ctx.papr(ws, np.broadcast_to(ctx.dbar(x), ws.shape)).max(axis=1) for x in xs])


def baseline_sequential(ctx: SearchContext, prr_min: float = 0.0, papr_0: float = math.inf) -> SearchState:
    W0, X0 = init_sequential(ctx.K, ctx.Mt, ctx.Nu)
    val = _feasible_pair(ctx, W0.assign, X0.assign, prr_min, papr_0)
    found = val is not None
    val = val if found else 0.0
    return SearchState(W0, X0, val, found, [(0, val)], 1)


def baseline_random(trials: int, ctx: SearchContext, prr_min: float = 0.0,
                    papr_0: float = math.inf, seed: int = 0) -> SearchState:
    """Best feasible pair among ``trials`` independent uniform (W, X) draws.

    Draw i depends only on (seed, i), so a larger ``trials`` extends the
    same sequence.
    """
    if trials < 1:
        raise ConfigError("trials must be >= 1")
    W0, X0 = init_sequential(ctx.K, ctx.Mt, ctx.Nu)
    best_val, best, found = 0.0, (W0.assign, X0.assign), False
    history = []
    for i in range(trials):
        rng = candidate_rng(seed, 2, i)
        w, x = rng.permutation(W0.assign), rng.permutation(X0.assign)
        val = _feasible_pair(ctx, w, x, prr_min, papr_0)
        if val is not None and (not found or val > best_val):
            best_val, best, found = val, (w, x), True
        history.append((i + 1, best_val))
    W, X = ctx.pattern(*best)
    return SearchState(W, X, best_val, found, history, trials)
