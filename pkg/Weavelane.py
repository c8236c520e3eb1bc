"""
weavelane command line: train, evaluate, baseline, report and plot
"""

import argparse
import logging
import sys
from concurrent.futures import ProcessPoolExecutor
from itertools import repeat
from pathlib import Path

import pandas as pd
from tqdm import tqdm

import config
from agents import HumanDriverAgent, PolicyAgent, RandomAgent
from analysis.metrics import ComparisonReport, MetricsRecord, aggregate_runs, compute_metrics, summarize_records
from analysis.render import render_comparison, render_episode, render_reward_curve
from environment.weave_env import run_episode
from learning.checkpoint import latest_checkpoint, load_checkpoint
from learning.ppo_trainer import train
from simulation.episode_log import EpisodeLog
from utils.config_loader import load_config, load_run_echo, resolve_inflow
from utils.errors import ConfigError, StructuralError, WeaveLaneError
from utils.seeding import evaluation_seeds
from utils.state_manager import configure_logging, initialize_run_state, log_activity, save_activity_log

CLI = "Weavelane CLI"
EPISODE_DIR = "episodes"
FIGURE_DIR = "figures"


def build_parser():
    parser = argparse.ArgumentParser(prog=config.APP_TITLE, description="Freeway weaving-area control with multi-agent PPO")
    sub = parser.add_subparsers(dest="command", required=True)

    def run_options(p):
        p.add_argument("--config", help="KEY=VALUE configuration file")
        p.add_argument("--seed", type=int, help=f"base seed (default {config.DEFAULT_SEED})")
        p.add_argument("--inflow", help="vphpl or a preset: " + ", ".join(config.SCENARIO_PRESETS))
        p.add_argument("--workers", type=int, help="parallel episode workers")
        p.add_argument("--out", required=True, help="run directory")
        p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE", help="override any config key")
        p.add_argument("--verbose", action="store_true")
        p.add_argument("--quiet", action="store_true", help="no progress bars")

    train_parser = sub.add_parser("train", help="train the shared policy")
    run_options(train_parser)
    train_parser.add_argument("--max-iterations", type=int)
    train_parser.add_argument("--resume", help="checkpoint file or run directory to continue from")

    for name, help_text in (("evaluate", "evaluate a policy"), ("baseline", "evaluate the human-driver baseline")):
        p = sub.add_parser(name, help=help_text)
        run_options(p)
        p.add_argument("--episodes", type=int)
        p.add_argument("--rewards", action="store_true", help="also write per-agent reward breakdowns")
        if name == "evaluate":
            p.add_argument("--checkpoint", help="policy checkpoint (.npz)")
            p.add_argument("--policy", choices=("ppo", "baseline", "random"), default="ppo")

    report_parser = sub.add_parser("report", help="compare baseline and policy run directories")
    report_parser.add_argument("runs", nargs="+", help="run directories")
    report_parser.add_argument("--out", required=True)
    report_parser.add_argument("--verbose", action="store_true")

    plot_parser = sub.add_parser("plot", help="re-render the figures of a run directory")
    plot_parser.add_argument("run", help="run directory")
    plot_parser.add_argument("--verbose", action="store_true")
    return parser


def _run_config(args, kind):
    run_config = load_config(args.config, args.set)
    if args.seed is not None:
        run_config.set("SEED", args.seed)
    if args.inflow is not None:
        run_config.set_inflow(resolve_inflow(args.inflow))
    if args.workers is not None:
        if args.workers < 1:
            raise ConfigError("--workers must be at least 1")
        run_config.set("WORKERS", args.workers)
    run_config.set("RUN_KIND", kind)
    return run_config


def _resume_checkpoint(resume):
    """A checkpoint file, or the latest checkpoint of a run directory"""
    if resume is None or not Path(resume).is_dir():
        return resume
    latest = latest_checkpoint(resume)
    if latest is None:
        raise StructuralError(f"no checkpoints in {resume}")
    return latest


def cmd_train(args):
    run_config = _run_config(args, "train")
    if args.max_iterations is not None:
        run_config.set("MAX_ITERATIONS", args.max_iterations)
    run_config.set("RUN_POLICY", "ppo")
    train_config = run_config.train_config()
    out_dir = initialize_run_state(args.out)
    run_config.write_echo(out_dir)
    log_activity(CLI, "Train", f"seed {run_config.seed}, inflow {run_config.scenario_label} vphpl, "
                               f"{train_config.max_iterations} iterations")
    resume = _resume_checkpoint(args.resume)
    result = train(train_config, out_dir, resume_from=resume, progress=not args.quiet)
    render_reward_curve(result.reward_curve, out_dir / "reward_curve.svg")
    log_activity(CLI, "Trained", f"final checkpoint {result.checkpoint}")
    save_activity_log(out_dir)
    return config.EXIT_OK


def _make_policy(policy, checkpoint):
    if policy == "baseline":
        return HumanDriverAgent()
    if policy == "random":
        return RandomAgent()
    if checkpoint is None:
        raise ConfigError("evaluate needs --checkpoint unless --policy baseline or random")
    params, iteration, _, _ = load_checkpoint(checkpoint)
    log_activity(CLI, "Loaded checkpoint", f"{checkpoint} (iteration {iteration})")
    return PolicyAgent(params, deterministic=True)


def _evaluate_episode(policy, scenario, seed, record_rewards):
    return run_episode(policy, scenario, seed=seed, record_rewards=record_rewards)


def run_evaluation(policy, run_config, out_dir, record_rewards=False, progress=True):
    """Run the evaluation episodes and write logs, figures, metrics and summary"""
    scenario = run_config.scenario()
    coefficients = run_config.emissions()
    seeds = evaluation_seeds(run_config.seed, run_config["EPISODES"])
    workers = run_config["WORKERS"]
    out_dir = Path(out_dir)

    rows, records, reward_frames = [], [], []
    executor = ProcessPoolExecutor(max_workers=workers) if workers > 1 else None
    try:
        if executor is not None:
            results = executor.map(_evaluate_episode, repeat(policy), repeat(scenario), seeds, repeat(record_rewards))
        else:
            results = (_evaluate_episode(policy, scenario, s, record_rewards) for s in seeds)
        for k, (seed, result) in enumerate(tqdm(zip(seeds, results), total=len(seeds),
                                                desc=policy.name, unit="episode", disable=not progress)):
            name = f"episode_{k:03d}"
            result.log.write(out_dir / EPISODE_DIR, name)
            render_episode(result.log, out_dir / FIGURE_DIR, name)
            record = compute_metrics(result.log, coefficients)
            records.append(record)
            rows.append({"episode": k, "seed": seed, **record.as_dict()})
            if record_rewards:
                frame = result.reward_frame()
                frame.insert(0, "episode", k)
                reward_frames.append(frame)
            policy.log_activity("Episode", f"{k} (seed {seed}): {record.throughput_vph:.0f} vph, "
                                           f"{record.mean_speed_mps:.2f} m/s, exits {result.log.exit_count()}")
    finally:
        if executor is not None:
            executor.shutdown()

    pd.DataFrame(rows).to_csv(out_dir / "metrics.csv", index=False)
    summary = summarize_records(records)
    summary.to_csv(out_dir / "summary.csv", index_label="metric")
    if reward_frames:
        pd.concat(reward_frames, ignore_index=True).to_csv(out_dir / "rewards.csv", index=False)
    return records


def cmd_evaluate(args, policy_name=None):
    policy_name = policy_name or args.policy
    run_config = _run_config(args, "evaluate")
    if args.episodes is not None:
        if args.episodes < 1:
            raise ConfigError("--episodes must be at least 1")
        run_config.set("EPISODES", args.episodes)
    run_config.set("RUN_POLICY", policy_name)
    out_dir = initialize_run_state(args.out)
    policy = _make_policy(policy_name, getattr(args, "checkpoint", None))
    run_config.write_echo(out_dir)
    log_activity(CLI, "Evaluate", f"{policy.name}: {run_config['EPISODES']} episodes at "
                                  f"{run_config.scenario_label} vphpl, seed {run_config.seed}")
    run_evaluation(policy, run_config, out_dir, args.rewards, progress=not args.quiet)
    save_activity_log(out_dir)
    return config.EXIT_OK


def cmd_baseline(args):
    return cmd_evaluate(args, policy_name="baseline")


def _read_records(run_dir):
    path = Path(run_dir) / "metrics.csv"
    if not path.is_file():
        raise StructuralError(f"{run_dir} has no metrics.csv; is it an evaluation run?")
    frame = pd.read_csv(path, float_precision="round_trip")
    names = MetricsRecord.metric_names()
    return [MetricsRecord(**{name: float(row[name]) for name in names}) for _, row in frame.iterrows()]


def cmd_report(args):
    baseline, policy = {}, {}
    for run_dir in args.runs:
        echo = load_run_echo(run_dir)
        scenario = echo.scenario_label
        target = baseline if echo["RUN_POLICY"] == "baseline" else policy
        if scenario in target:
            raise StructuralError(f"two {echo['RUN_POLICY']} runs for scenario {scenario}: {run_dir}")
        target[scenario] = _read_records(run_dir)

    report = aggregate_runs(baseline, policy)
    out_dir = initialize_run_state(args.out)
    report.table.to_csv(out_dir / "comparison.csv", index=False)
    (out_dir / "comparison.txt").write_text(report.to_text(), encoding="utf-8")
    render_comparison(report, out_dir / "comparison.svg")
    log_activity(CLI, "Report", f"{len(report.scenarios)} scenarios from {len(args.runs)} runs")
    print(report.to_text(), end="")
    save_activity_log(out_dir)
    return config.EXIT_OK


def cmd_plot(args):
    run_dir = Path(args.run)
    episode_dir = run_dir / EPISODE_DIR
    metas = sorted(episode_dir.glob("*_meta.json"))
    comparison = run_dir / "comparison.csv"
    curve = run_dir / "reward_curve.csv"
    if not metas and not comparison.is_file() and not curve.is_file():
        raise StructuralError(f"{run_dir} has no episode logs, comparison table or reward curve to plot")
    for meta in metas:
        name = meta.name[: -len("_meta.json")]
        render_episode(EpisodeLog.read(episode_dir, name), run_dir / FIGURE_DIR, name)
    if comparison.is_file():
        table = pd.read_csv(comparison, dtype={"scenario": str}, float_precision="round_trip")
        scenarios = list(dict.fromkeys(table["scenario"]))
        render_comparison(ComparisonReport(table, scenarios), run_dir / "comparison.svg")
    if curve.is_file():
        render_reward_curve(pd.read_csv(curve, float_precision="round_trip"), run_dir / "reward_curve.svg")
    log_activity(CLI, "Plot", f"{len(metas)} episodes in {run_dir}")
    return config.EXIT_OK


COMMANDS = {
    "train": cmd_train,
    "evaluate": cmd_evaluate,
    "baseline": cmd_baseline,
    "report": cmd_report,
    "plot": cmd_plot,
}


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return config.EXIT_OK if exc.code in (0, None) else config.EXIT_USAGE
    configure_logging(getattr(args, "verbose", False))
    try:
        return COMMANDS[args.command](args)
    except WeaveLaneError as exc:
        log_activity(CLI, type(exc).__name__, str(exc), level=logging.ERROR)
        return exc.exit_code
    except OSError as exc:
        log_activity(CLI, "IOError", f"{exc.filename or ''} {exc.strerror or exc}".strip(), level=logging.ERROR)
        return config.EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
