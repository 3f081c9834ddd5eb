"""Monte Carlo trials and parameter sweeps.

Every random draw is keyed by position (trial seed, user index, ...), so a
trial's outcome does not depend on how trials are scheduled across threads.
"""

from __future__ import annotations

import dataclasses
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .channel import noise_variance, random_multipath, synth_channel
from .io import read_channels_csv
from .metrics import PrrReport, prr
from .optimizer import (ConfigError, SearchContext, SearchState, TdgrsConfig, baseline_random,
                        baseline_sequential, tdgrs)
from .scenario import Scenario
from .sensing import DelayProfile, default_tau_grid, delay_profile
from .waveform import PowerVector, SymbolFrame, papr_all_elements

THREADS_ENV = "ISAC_ALLOC_THREADS"
SWEEP_VARIABLES = ("prr_min", "papr_0", "groups", "e1", "e2", "Nu")
SCHEMES = ("tdgrs", "random", "sequential")


def derive_seed(*parts: int) -> int:
    return int(np.random.SeedSequence([int(p) for p in parts]).generate_state(1, np.uint64)[0])


def default_workers() -> int:
    env = os.environ.get(THREADS_ENV)
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise ConfigError(f"{THREADS_ENV} must be an integer, got {env!r}") from None
    return os.cpu_count() or 1


def trial_channels(scenario: Scenario, trial_seed: int) -> list:
    if scenario.channel_file is not None:
        chans = read_channels_csv(scenario.channel_file, scenario.freqs)
        if len(chans) < scenario.Nu:
            raise ConfigError(f"scenario.channel_file holds {len(chans)} users, Nu={scenario.Nu}")
        return chans[: scenario.Nu]
    chans = []
    for n, u in enumerate(scenario.users[: scenario.Nu]):
        geom = (scenario.water_depth_m, scenario.array_depth_m, u.depth_m, u.range_m)
        paths = random_multipath(derive_seed(trial_seed, 0, n), geom, scenario.n_paths,
                                 c=scenario.sound_speed)
        chans.append(synth_channel(paths, scenario.freqs, scenario.gains, scenario.spreading,
                                   scenario.L0, user_id=n + 1))
    return chans


def trial_frame(scenario: Scenario, trial_seed: int) -> SymbolFrame:
    return SymbolFrame.random(derive_seed(trial_seed, 1), scenario.Nu, scenario.K // scenario.Nu,
                              scenario.psk_order)


def trial_noise(scenario: Scenario) -> np.ndarray:
    return noise_variance(scenario.freqs, scenario.noise, scenario.source_level_db_per_watt)


def trial_context(scenario: Scenario, trial_seed: int) -> SearchContext:
    p = PowerVector.uniform(scenario.P_total, scenario.K)
    return SearchContext(trial_channels(scenario, trial_seed), trial_noise(scenario),
                         trial_frame(scenario, trial_seed), p, scenario.oversample, scenario.Mt)


@dataclass
class TrialResult:
    state: SearchState
    report: PrrReport
    papr_db: np.ndarray
    profile: DelayProfile | None
    context: SearchContext = field(repr=False)
    search_seed: int = 0


def run_trial(scenario: Scenario, cfg: TdgrsConfig, trial_seed: int, scheme: str = "tdgrs",
              random_trials: int | None = None, sensing: bool = False) -> TrialResult:
    """One Monte Carlo draw: channels, symbols, search, final metrics."""
    ctx = trial_context(scenario, trial_seed)
    search_seed = derive_seed(trial_seed, 2)
    if scheme == "tdgrs":
        state = tdgrs(dataclasses.replace(cfg, seed=search_seed), ctx)
    elif scheme == "random":
        n = random_trials or cfg.groups * cfg.e1
        state = baseline_random(n, ctx, cfg.prr_min, cfg.papr_0, search_seed)
    elif scheme == "sequential":
        state = baseline_sequential(ctx, cfg.prr_min, cfg.papr_0)
    else:
        raise ConfigError(f"unknown scheme {scheme!r}; expected one of {SCHEMES}")
    report = prr(state.x_best, ctx.p, ctx.channels, ctx.noise)
    paprs = papr_all_elements(state.w_best, state.x_best, ctx.p, ctx.frame, ctx.channels, ctx.L)
    profile = None
    if sensing and scenario.targets:
        tg = scenario.targets[0]
        profile = delay_profile(ctx.p, scenario.freqs, tg, default_tau_grid(scenario.freqs, tg.delay_s))
    return TrialResult(state, report, paprs, profile, ctx, search_seed)


def shuffles_to_fraction(history, frac: float = 0.95) -> float:
    """First shuffle count whose incumbent reaches ``frac`` of the final value."""
    final = history[-1][1]
    if final <= 0:
        return math.nan
    for count, val in history:
        if val >= frac * final:
            return float(count)
    return float(history[-1][0])


@dataclass(frozen=True)
class SweepSpec:
    variable: str
    values: tuple
    trials: int
    scenario: Scenario = field(default_factory=Scenario)
    search: TdgrsConfig = field(default_factory=TdgrsConfig)
    scheme: str = "tdgrs"
    # "total": e1/e2 are whole-run budgets split evenly over the groups
    budget: str = "per_group"
    random_trials: int | None = None
    seed: int = 0

    def __post_init__(self):
        if self.variable not in SWEEP_VARIABLES:
            raise ConfigError(f"sweep.variable must be one of {SWEEP_VARIABLES}, got {self.variable!r}")
        if not self.values:
            raise ConfigError("sweep.values must be non-empty")
        if self.trials < 1:
            raise ConfigError("sweep.trials must be >= 1")
        if self.scheme not in SCHEMES:
            raise ConfigError(f"sweep.scheme must be one of {SCHEMES}")
        if self.budget not in ("per_group", "total"):
            raise ConfigError("sweep.budget must be 'per_group' or 'total'")

    def point(self, value):
        scenario, search = self.scenario, self.search
        if self.variable == "Nu":
            scenario = scenario.replace(Nu=int(value))
        elif self.variable in ("groups", "e1", "e2"):
            search = dataclasses.replace(search, **{self.variable: int(value)})
        else:
            search = dataclasses.replace(search, **{self.variable: float(value)})
        if self.budget == "total":
            G = search.groups
            if search.e1 % G or search.e2 % G:
                raise ConfigError(f"total budgets e1={search.e1}, e2={search.e2} must divide by G={G}")
            search = dataclasses.replace(search, e1=search.e1 // G, e2=search.e2 // G)
        return scenario, search


@dataclass
class TrialSummary:
    prr_kbpskm: float
    found: bool
    shuffles_95: float
    min_user_kbpskm: float


def _summarize(res: TrialResult) -> TrialSummary:
    st = res.state
    return TrialSummary(st.prr_best if st.found else 0.0, st.found,
                        shuffles_to_fraction(st.history), float(np.min(res.report.per_user_kbpskm)))


def run_trials(scenario, search, trial_seeds, scheme="tdgrs", random_trials=None, workers=None):
    """Summaries in seed order, independent of the worker count."""
    workers = workers or default_workers()

    def one(seed):
        return _summarize(run_trial(scenario, search, seed, scheme, random_trials))

    if workers == 1:
        return [one(s) for s in trial_seeds]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(one, trial_seeds))


def sweep_seeds(spec: SweepSpec) -> list:
    return [derive_seed(spec.seed, i) for i in range(spec.trials)]


def aggregate(value, summaries) -> dict:
    prrs = np.array([s.prr_kbpskm for s in summaries])
    shuf = np.array([s.shuffles_95 for s in summaries])
    shuf = shuf[~np.isnan(shuf)]
    return {
        "sweep_value": float(value),
        "mean_prr_kbpskm": float(prrs.mean()),
        "std_prr": float(prrs.std()),
        "infeasible_frac": float(np.mean([not s.found for s in summaries])),
        "mean_shuffles_95": float(shuf.mean()) if shuf.size else math.nan,
    }


def run_sweep(spec: SweepSpec, workers=None, return_trials: bool = False):
    """One aggregated row per sweep value. Infeasible trials count as PRR 0."""
    seeds = sweep_seeds(spec)
    rows, per_value = [], []
    for v in spec.values:
        scenario, search = spec.point(v)
        summaries = run_trials(scenario, search, seeds, spec.scheme, spec.random_trials, workers)
        rows.append(aggregate(v, summaries))
        per_value.append(summaries)
    return (rows, per_value) if return_trials else rows


def sweep_from_dict(d: dict, scenario: Scenario, search: TdgrsConfig) -> SweepSpec:
    for k in ("variable", "values", "trials"):
        if k not in d:
            raise ConfigError(f"missing config key 'sweep.{k}'")
    allowed = {"variable", "values", "trials", "scheme", "budget", "random_trials", "seed"}
    for k in d:
        if k not in allowed:
            raise ConfigError(f"unknown config key 'sweep.{k}'")
    values = tuple(math.inf if str(v).lower() in ("inf", "+inf", "infinity") else float(v) for v in d["values"])
    return SweepSpec(d["variable"], values, int(d["trials"]), scenario, search,
                     d.get("scheme", "tdgrs"), d.get("budget", "per_group"),
                     d.get("random_trials"), int(d.get("seed", scenario.seed)))
