"""Command-line interface.

Exit status: 0 success, 2 configuration error, 3 infeasible result when
``--require-feasible`` is given.
"""

from __future__ import annotations

import argparse
import dataclasses
import sys
from pathlib import Path

import numpy as np

from . import io
from .channel import ChannelError
from .harness import SCHEMES, run_sweep, run_trial, sweep_from_dict, trial_channels, trial_context
from .metrics import check_feasibility, prr
from .optimizer import ConfigError, SearchContext, TdgrsConfig, init_sequential
from .scenario import Scenario, load_config, full_scale_scenario, scenario_from_dict, search_from_dict
from .sensing import default_tau_grid, delay_profile, echo_snapshots, joint_spectrum
from .waveform import PatternError, papr_all_elements

EXIT_OK, EXIT_CONFIG, EXIT_INFEASIBLE = 0, 2, 3

SHUFFLE_NOTE = "shuffle_count counts Step-II interleave shuffles"


def _load(args):
    cfg = load_config(args.config) if args.config else {}
    if "scenario" in cfg:
        scenario = scenario_from_dict(cfg["scenario"])
    else:
        scenario = full_scale_scenario() if getattr(args, "full_scale", False) else Scenario()
    if args.seed is not None:
        scenario = scenario.replace(seed=args.seed)
    search = search_from_dict(cfg.get("search") or {})
    return cfg, scenario, search


def _out_dir(args) -> Path:
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _channels_override(scenario, path):
    return scenario.replace(channel_file=str(path)) if path else scenario


def _params_block(scenario: Scenario, search: TdgrsConfig, scheme: str) -> str:
    return "\n".join([
        f"scheme={scheme}", f"seed={scenario.seed}", f"K={scenario.K}", f"Mt={scenario.Mt}",
        f"Mr={scenario.Mr}", f"Nu={scenario.Nu}", f"groups={search.groups}", f"e1={search.e1}",
        f"e2={search.e2}", f"feasible_cap={search.feasible_cap}", f"prr_min_kbpskm={search.prr_min!r}",
        f"papr_0_db={search.papr_0!r}", f"note={SHUFFLE_NOTE}",
    ])


def _papr_block(paprs) -> str:
    return "\n".join(f"element{m + 1}_papr_db={v!r}" for m, v in enumerate(map(float, paprs)))


def cmd_channel(args) -> int:
    _, scenario, _ = _load(args)
    if args.action == "synth":
        chans = trial_channels(scenario.replace(channel_file=None), scenario.seed)
        out = _out_dir(args) / "channels.csv"
        io.write_channels_csv(out, chans)
        print(f"wrote {out}")
        return EXIT_OK
    if not args.file:
        raise ConfigError(f"channel {args.action} needs a channel CSV file")
    chans = io.read_channels_csv(args.file, scenario.freqs)
    for ch in chans:
        print(f"user_id={ch.user_id} range_m={ch.range_m!r} K={ch.K} "
              f"mean_gain_db={10 * np.log10(np.mean(ch.gain2)):.3f}")
    if args.action == "export":
        out = _out_dir(args) / "channels.csv"
        io.write_channels_csv(out, chans)
        print(f"wrote {out}")
    return EXIT_OK


def cmd_optimize(args) -> int:
    _, scenario, search = _load(args)
    scenario = _channels_override(scenario, args.channels)
    res = run_trial(scenario, search, scenario.seed, args.scheme, sensing=bool(scenario.targets))
    st, ctx = res.state, res.context
    feas = check_feasibility(st.w_best, st.x_best, ctx.p, ctx.frame, ctx.channels, ctx.noise,
                             search.prr_min, search.papr_0, scenario.P_total, ctx.L)
    out = _out_dir(args)
    io.write_solution_csv(out / "solution.csv", st.w_best, st.x_best)
    io.write_history_csv(out / "history.csv", st.history)
    io.write_channels_csv(out / "channels.csv", ctx.channels)
    blocks = [f"final_prr_kbpskm={float(st.prr_best)!r}", f"status={st.status}", f"evaluations={st.evaluations}",
              _params_block(scenario, search, args.scheme), res.report.to_text(), feas.to_text(),
              _papr_block(res.papr_db)]
    if res.profile is not None:
        blocks.append(f"target1_psl_db={float(res.profile.psl_db)!r}\ntarget1_isl_db={float(res.profile.isl_db)!r}")
    io.write_text_block(out / "summary.txt", *blocks)
    print((out / "summary.txt").read_text(), end="")
    if args.require_feasible and not st.found:
        return EXIT_INFEASIBLE
    return EXIT_OK


def _eval_context(scenario, channels_path) -> SearchContext:
    scenario = _channels_override(scenario, channels_path)
    return trial_context(scenario, scenario.seed)


def cmd_eval(args) -> int:
    _, scenario, search = _load(args)
    ctx = _eval_context(scenario, args.channels)
    if args.solution:
        W, X = io.read_solution_csv(args.solution, scenario.Mt, scenario.Nu)
    else:
        W, X = init_sequential(scenario.K, scenario.Mt, scenario.Nu)
    if W.K != scenario.K:
        raise ConfigError(f"solution has K={W.K}, scenario.K={scenario.K}")
    report = prr(X, ctx.p, ctx.channels, ctx.noise)
    paprs = papr_all_elements(W, X, ctx.p, ctx.frame, ctx.channels, ctx.L)
    feas = check_feasibility(W, X, ctx.p, ctx.frame, ctx.channels, ctx.noise,
                             search.prr_min, search.papr_0, scenario.P_total, ctx.L)
    text = "\n".join([report.to_text(), feas.to_text(), _papr_block(paprs)]) + "\n"
    if args.out_dir:
        io.write_text_block(_out_dir(args) / "eval.txt", text)
    print(text, end="")
    if args.require_feasible and not feas.ok:
        return EXIT_INFEASIBLE
    return EXIT_OK


def cmd_sweep(args) -> int:
    cfg, scenario, search = _load(args)
    if "sweep" not in cfg:
        raise ConfigError("missing config key 'sweep'")
    spec = sweep_from_dict(cfg["sweep"], scenario, search)
    if args.seed is not None:
        spec = dataclasses.replace(spec, seed=args.seed)
    rows = run_sweep(spec, workers=args.threads)
    out = _out_dir(args) / "sweep.csv"
    io.write_sweep_csv(out, rows)
    print(out.read_text(), end="")
    return EXIT_OK


def cmd_sense(args) -> int:
    _, scenario, _ = _load(args)
    if not scenario.targets:
        raise ConfigError("scenario.targets is empty")
    ctx = _eval_context(scenario, args.channels)
    if args.solution:
        W, X = io.read_solution_csv(args.solution, scenario.Mt, scenario.Nu)
    else:
        W, X = init_sequential(scenario.K, scenario.Mt, scenario.Nu)
    freqs = scenario.freqs
    dbar = ctx.dbar(X.assign)
    rng = np.random.default_rng([scenario.seed, 3])
    snaps = echo_snapshots(W, ctx.p, dbar, scenario.targets, freqs, scenario.Mr, scenario.d_r,
                           scenario.d_t, scenario.sensing_noise_power, rng=rng, c=scenario.sound_speed)
    tau = np.arange(8 * scenario.K) / (8 * scenario.bandwidth)
    theta = np.radians(np.arange(-90, 91, 1.0))
    spec = joint_spectrum(snaps, W, ctx.p, dbar, freqs, tau, theta, scenario.d_r, scenario.d_t,
                          scenario.sound_speed)
    out = _out_dir(args)
    io.write_spectrum_csv(out / "joint_spectrum.csv", tau, theta, spec)
    lines = []
    with open(out / "delay_profile.csv", "w") as fh:
        fh.write(",".join(io.SPECTRUM_HEADER) + "\n")
        for q, tg in enumerate(scenario.targets):
            prof = delay_profile(ctx.p, freqs, tg, default_tau_grid(freqs, tg.delay_s))
            for t, m in zip(prof.tau_grid, prof.magnitude):
                fh.write(f"{float(t)!r},{float(tg.angle_rad)!r},{float(m)!r}\n")
            lines.append(f"target{q + 1}_psl_db={prof.psl_db!r}\ntarget{q + 1}_isl_db={prof.isl_db!r}")
    i, j = np.unravel_index(np.argmax(spec), spec.shape)
    lines.append(f"map_peak_tau_s={float(tau[i])!r}\nmap_peak_theta_rad={float(theta[j])!r}")
    io.write_text_block(out / "sense.txt", *lines)
    print((out / "sense.txt").read_text(), end="")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="YAML config file (schema_version: 1)")
    common.add_argument("--seed", type=int, help="override scenario.seed")
    common.add_argument("--out-dir", default=".", help="output directory")
    common.add_argument("--full-scale", action="store_true", help="K=1024 defaults when no scenario is configured")

    parser = argparse.ArgumentParser(prog="uwisac", description="Underwater MIMO-OFDM ISAC allocation")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("channel", parents=[common], help="synthesize, import or export channels")
    p.add_argument("action", choices=("synth", "import", "export"))
    p.add_argument("file", nargs="?", help="channel CSV for import/export")
    p.set_defaults(func=cmd_channel)

    p = sub.add_parser("optimize", parents=[common], help="optimize one scenario")
    p.add_argument("--scheme", choices=SCHEMES, default="tdgrs")
    p.add_argument("--channels", help="channel CSV to use instead of synthetic channels")
    p.add_argument("--require-feasible", action="store_true")
    p.set_defaults(func=cmd_optimize)

    p = sub.add_parser("eval", parents=[common], help="metrics for a W/X solution CSV")
    p.add_argument("--solution", help="solution CSV (default: sequential pattern)")
    p.add_argument("--channels", help="channel CSV")
    p.add_argument("--require-feasible", action="store_true")
    p.set_defaults(func=cmd_eval, out_dir=None)

    p = sub.add_parser("sweep", parents=[common], help="Monte Carlo sweep from the config's sweep section")
    p.add_argument("--threads", type=int, default=None, help="worker threads (default $ISAC_ALLOC_THREADS)")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("sense", parents=[common], help="delay profiles and joint spectrum")
    p.add_argument("--solution", help="solution CSV (default: sequential pattern)")
    p.add_argument("--channels", help="channel CSV")
    p.set_defaults(func=cmd_sense)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, ChannelError, PatternError, FileNotFoundError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
