#!/usr/bin/env python3
"""
Command-line runner for the speller laboratory

Subcommands: schedule, synth, features, train, evaluate, run, analyze, home-sim
"""

import argparse
import logging
import sys
from pathlib import Path
from typing import List, Optional

import numpy as np
import pandas as pd
from colorama import Fore, Style, init
from tabulate import tabulate

from analysis import accuracy_statistics, accuracy_table, peak_statistics
from config import lab_config, load_experiment_config
from decoder import epoch_auc, score_batch, train_from_labels
from exceptions import (
    EXIT_OK,
    ConfigValidationError,
    SpellerError,
    describe_validation_error,
    exit_code_for,
)
from experiment import (
    Phase,
    decode_phase,
    derive_seed,
    phase_trials,
    run_experiment,
    simulate_phase,
    subject_profile,
)
from models import Condition, ExperimentConfig, SpellerMode
from paradigm import generate_schedule
from performance_diagnostics import PhaseTimer, phase_timings
from pipeline import trials_frame
from results_repository import ResultsRepository
from smarthome import decode_log_frame, initial_state, load_manifest, run_closed_loop
from synthgen import render_stream

logger = logging.getLogger(__name__)

# Initialize colorama
init()


def print_status(message: str, color=Fore.GREEN):
    """Print a coloured status line"""
    print(f"{color}{message}{Style.RESET_ALL}")


class LabArgumentParser(argparse.ArgumentParser):
    """ArgumentParser whose usage errors surface as validation failures (exit 1)"""

    def error(self, message: str):
        raise ConfigValidationError([("arguments", message)])


def positive_int(value: str) -> int:
    try:
        number = int(value)
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid int value: '{value}'")
    if number < 1:
        raise argparse.ArgumentTypeError(f"must be a positive integer, got {number}")
    return number


def print_table(frame: pd.DataFrame, floatfmt: str = ".2f"):
    print(tabulate(frame, headers="keys", tablefmt="simple", showindex=False, floatfmt=floatfmt))


def _resolve_config(args) -> ExperimentConfig:
    overrides = {
        "output_dir": args.output_dir,
        "master_seed": args.seed,
        "trials_per_phase": getattr(args, "trials", None),
        "n_subjects": getattr(args, "subjects", None),
        "shrinkage": getattr(args, "shrinkage", None),
        "workers": getattr(args, "workers", None),
    }
    conditions = getattr(args, "conditions", None)
    if conditions:
        overrides["conditions"] = conditions
    if getattr(args, "zero_noise", False):
        overrides["profile"] = {"white_sigma": 0.0, "pink_sigma": 0.0}
    config = load_experiment_config(args.config, overrides)
    if args.seed is None and lab_config.master_seed_defaulted and not args.config:
        print_status(f"Using default master seed {config.master_seed}", Fore.YELLOW)
    return config


def _master_seed(args) -> int:
    if args.seed is not None:
        return args.seed
    if lab_config.master_seed_defaulted:
        print_status(f"Using default master seed {lab_config.master_seed}", Fore.YELLOW)
    return lab_config.master_seed


# ========== SUBCOMMANDS ==========

def cmd_schedule(args) -> int:
    """Write flash schedules in the trial,sequence,flash,obj1..obj6 format"""
    seed = _master_seed(args)
    schedules = [generate_schedule(seed if args.trials == 1 else derive_seed(seed, t)) for t in range(args.trials)]
    repo = ResultsRepository(args.output_dir)
    path = repo.write_schedules(args.out, schedules)
    print_status(f"✅ Wrote {len(schedules)} schedule(s) to {path}")
    return EXIT_OK


def cmd_synth(args) -> int:
    """Render one trial to a stream CSV plus its schedule"""
    config = _resolve_config(args)
    condition = Condition(args.condition)
    rng = np.random.default_rng(derive_seed(config.master_seed, args.subject, int(condition), 2))
    target = args.target if args.target is not None else int(rng.integers(config.timing.n_objects))
    profile = subject_profile(config.master_seed, args.subject, config.profile)
    schedule = generate_schedule(int(rng.integers(2**31 - 1)), config.timing)

    with PhaseTimer("render stream"):
        stream = render_stream(schedule, condition, target, profile, config.timing,
                               noise_seed=int(rng.integers(2**31 - 1)))

    repo = ResultsRepository(config.output_dir)
    stream_path = repo.write_stream(args.out, stream)
    schedule_path = repo.write_schedules(str(Path(args.out).with_suffix("")) + "_schedule.txt", [schedule])
    print_status(f"✅ Stream ({stream.n_samples} samples, target {target}) written to {stream_path}")
    print_status(f"✅ Schedule written to {schedule_path}")
    return EXIT_OK


def cmd_features(args) -> int:
    """Export the feature table of a simulated training phase"""
    config = _resolve_config(args)
    condition = Condition(args.condition)
    profile = subject_profile(config.master_seed, args.subject, config.profile)

    with PhaseTimer("feature export"):
        trials = phase_trials(profile, condition, config.trials_per_phase, config.master_seed,
                              (args.subject, int(condition), Phase.TRAINING), config.timing)
        frame = trials_frame(trials, config.timing)

    path = ResultsRepository(config.output_dir).write_table(args.out, frame)
    print_status(f"✅ {len(frame)} feature rows ({int(frame['is_target'].sum())} targets) written to {path}")
    return EXIT_OK


def cmd_train(args) -> int:
    """Simulate a training phase and fit one decoder"""
    config = _resolve_config(args)
    condition = Condition(args.condition)
    profile = subject_profile(config.master_seed, args.subject, config.profile)
    print_status(f"🔥 Training on condition {int(condition)}: {condition.label}", Fore.YELLOW)

    with PhaseTimer("training phase"):
        training = simulate_phase(profile, condition, config.trials_per_phase, config.master_seed,
                                  (args.subject, int(condition), Phase.TRAINING), config.timing)
        model = train_from_labels(training.features, training.labels, config.shrinkage)

    auc = epoch_auc(score_batch(model, training.features), training.labels)
    path = ResultsRepository(config.output_dir).write_model(args.out, model)
    print_status(f"✅ Model written to {path}")
    print(tabulate(
        [["lambda", model.shrinkage], ["nu", model.nu], ["bias", model.bias], ["training AUC", auc]],
        tablefmt="simple", floatfmt=".4f",
    ))
    return EXIT_OK


def cmd_evaluate(args) -> int:
    """Decode a simulated testing phase with a saved model"""
    config = _resolve_config(args)
    condition = Condition(args.condition)
    repo = ResultsRepository(config.output_dir)
    model = repo.read_model(args.model)
    profile = subject_profile(config.master_seed, args.subject, config.profile)

    with PhaseTimer("testing phase"):
        testing = simulate_phase(profile, condition, config.trials_per_phase, config.master_seed,
                                 (args.subject, int(condition), Phase.TESTING), config.timing)
        decoded = decode_phase(model, testing, config.timing)

    selections = pd.DataFrame([
        {"subject": args.subject, "condition": int(condition), "trial": trial, "sequence": k + 1,
         "selected": chosen, "target": target}
        for trial, (per_k, target) in enumerate(zip(decoded, testing.targets))
        for k, chosen in enumerate(per_k)
    ])
    table = accuracy_table(selections)
    repo.write_table(args.out, table)
    print_status(f"📊 Test AUC {epoch_auc(score_batch(model, testing.features), testing.labels):.3f}", Fore.CYAN)
    print_table(table[["sequence", "mean"]].rename(columns={"mean": "accuracy %"}))
    return EXIT_OK


def cmd_run(args) -> int:
    """Full experiment: every subject x condition, all tables and models"""
    config = _resolve_config(args)
    print_status(f"🔥 Running {config.n_subjects} subject(s) x conditions {[int(c) for c in config.conditions]} "
                 f"(seed {config.master_seed})", Fore.YELLOW)
    result = run_experiment(config)
    ResultsRepository(config.output_dir).save_experiment(result)

    summary = result.accuracy.pivot(index="sequence", columns="condition", values="mean")
    summary.columns = [f"condition {c} %" for c in summary.columns]
    print_status("\n📊 Mean accuracy per sequence", Fore.CYAN)
    print(tabulate(summary.reset_index(), headers="keys", tablefmt="simple", showindex=False, floatfmt=".1f"))
    if args.timings:
        print_table(pd.DataFrame(phase_timings.rows()))
    print_status(f"✅ Results written to {config.output_dir}")
    return EXIT_OK


def cmd_analyze(args) -> int:
    """Recompute statistics tables from a previous run's selections and L2 values"""
    source = ResultsRepository(args.input or args.output_dir)
    target = ResultsRepository(args.output_dir or args.input)
    selections = source.read_table("selections.csv")
    l2 = source.read_table("erp_l2.csv")

    accuracy = accuracy_table(selections)
    target.write_table("accuracy.csv", accuracy)
    target.write_table("accuracy_stats.csv", accuracy_statistics(selections))
    peaks = peak_statistics(l2)
    target.write_table("peak_stats.csv", peaks)

    print_status("\n📊 Accuracy statistics", Fore.CYAN)
    print_table(accuracy_statistics(selections), floatfmt=".4f")
    if not peaks.empty:
        print_status("\n📊 Channels with p < 0.05", Fore.CYAN)
        print_table(peaks[peaks["p_value"] < 0.05][["component", "region", "channel", "chi_square", "p_value"]],
                    floatfmt=".4f")
    return EXIT_OK


def cmd_home_sim(args) -> int:
    """Closed-loop smart-home session with a freshly trained decoder"""
    config = _resolve_config(args)
    condition = Condition(args.condition)
    manifest = load_manifest(args.manifest or lab_config.manifest_path)
    profile = subject_profile(config.master_seed, args.subject, config.profile)

    if args.intents:
        intents = [int(v) for v in args.intents.split(",") if v.strip()]
    else:
        rng = np.random.default_rng(derive_seed(config.master_seed, args.subject, int(condition), 3))
        intents = [int(v) for v in rng.integers(config.timing.n_objects, size=args.steps)]

    with PhaseTimer("decoder training"):
        training = simulate_phase(profile, condition, config.trials_per_phase, config.master_seed,
                                  (args.subject, int(condition), Phase.TRAINING), config.timing)
        model = train_from_labels(training.features, training.labels, config.shrinkage)

    with PhaseTimer("closed loop"):
        state, log = run_closed_loop(intents, model, profile, initial_state(manifest), condition, config.timing,
                                     seed=derive_seed(config.master_seed, args.subject, int(condition), 4))

    frame = decode_log_frame(log)
    ResultsRepository(config.output_dir).write_table(args.out, frame)
    accuracy = frame["correct"].mean() * 100 if len(frame) else 0.0
    print_status(f"📊 {int(frame['correct'].sum())}/{len(frame)} selections correct ({accuracy:.1f}%)", Fore.CYAN)
    active = [[d.object_id, manifest.rooms[d.room], d.label] for d in state.devices if d.active]
    if active:
        print(tabulate(active, headers=["id", "room", "active device"], tablefmt="simple"))
    mode = "character speller" if state.mode == SpellerMode.CHARACTER else "home speller"
    print_status(f"Final screen: {mode}; text buffer: '{state.text_buffer}'; events: {len(state.events)}", Fore.YELLOW)
    return EXIT_OK


# ========== ENTRY POINT ==========

def build_parser() -> argparse.ArgumentParser:
    parser = LabArgumentParser(description="ERP + speech-imagery smart-home speller laboratory")
    parser.add_argument("--config", help="JSON experiment configuration", default=None)
    parser.add_argument("--seed", type=int, default=None, help="Master seed (default SPELLER_MASTER_SEED)")
    parser.add_argument("--output-dir", dest="output_dir", default=None, help="Output directory")
    parser.add_argument("--log-level", dest="log_level", default=None, help="Logging level")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("schedule", help="Generate flash schedules")
    p.add_argument("--trials", type=positive_int, default=1)
    p.add_argument("--out", default="schedules.txt")
    p.set_defaults(handler=cmd_schedule)

    p = sub.add_parser("synth", help="Render one synthetic trial")
    p.add_argument("--condition", type=int, choices=[1, 2, 3], default=1)
    p.add_argument("--subject", type=int, default=0)
    p.add_argument("--target", type=int, default=None)
    p.add_argument("--zero-noise", dest="zero_noise", action="store_true")
    p.add_argument("--out", default="stream.csv")
    p.set_defaults(handler=cmd_synth)

    p = sub.add_parser("features", help="Export the feature table of a simulated training phase")
    p.add_argument("--condition", type=int, choices=[1, 2, 3], default=1)
    p.add_argument("--subject", type=int, default=0)
    p.add_argument("--trials", type=positive_int, default=None)
    p.add_argument("--zero-noise", dest="zero_noise", action="store_true")
    p.add_argument("--out", default="features.csv")
    p.set_defaults(handler=cmd_features)

    p = sub.add_parser("train", help="Train a decoder on a simulated training phase")
    p.add_argument("--condition", type=int, choices=[1, 2, 3], default=1)
    p.add_argument("--subject", type=int, default=0)
    p.add_argument("--trials", type=positive_int, default=None)
    p.add_argument("--shrinkage", type=float, default=None)
    p.add_argument("--out", default="model.json")
    p.set_defaults(handler=cmd_train)

    p = sub.add_parser("evaluate", help="Evaluate a saved decoder on a simulated testing phase")
    p.add_argument("--model", required=True)
    p.add_argument("--condition", type=int, choices=[1, 2, 3], default=1)
    p.add_argument("--subject", type=int, default=0)
    p.add_argument("--trials", type=positive_int, default=None)
    p.add_argument("--out", default="evaluation_accuracy.csv")
    p.set_defaults(handler=cmd_evaluate)

    p = sub.add_parser("run", help="Run the full simulated experiment")
    p.add_argument("--subjects", type=positive_int, default=None)
    p.add_argument("--trials", type=positive_int, default=None)
    p.add_argument("--conditions", type=int, nargs="+", choices=[1, 2, 3], default=None)
    p.add_argument("--shrinkage", type=float, default=None)
    p.add_argument("--workers", type=positive_int, default=None)
    p.add_argument("--zero-noise", dest="zero_noise", action="store_true")
    p.add_argument("--timings", action="store_true", help="Print per-phase timings")
    p.set_defaults(handler=cmd_run)

    p = sub.add_parser("analyze", help="Recompute statistics from a previous run")
    p.add_argument("--input", default=None, help="Directory holding selections.csv and erp_l2.csv")
    p.set_defaults(handler=cmd_analyze)

    p = sub.add_parser("home-sim", help="Closed-loop smart-home simulation")
    p.add_argument("--condition", type=int, choices=[1, 2, 3], default=3)
    p.add_argument("--subject", type=int, default=0)
    p.add_argument("--intents", default=None, help="Comma-separated object ids")
    p.add_argument("--steps", type=positive_int, default=10)
    p.add_argument("--trials", type=positive_int, default=None)
    p.add_argument("--manifest", default=None)
    p.add_argument("--zero-noise", dest="zero_noise", action="store_true")
    p.add_argument("--out", default="home_decode_log.csv")
    p.set_defaults(handler=cmd_home_sim)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    try:
        args = build_parser().parse_args(argv)
        logging.basicConfig(
            level=(args.log_level or lab_config.log_level).upper(),
            format="%(asctime)s %(levelname)s %(name)s: %(message)s",
        )
        return args.handler(args)
    except Exception as e:
        code = exit_code_for(e)
        if code == 1:
            print_status("❌ Invalid configuration", Fore.RED)
            for item in describe_validation_error(e):
                print_status(f"  {item['field']}: {item['message']}", Fore.RED)
        elif isinstance(e, SpellerError):
            print_status(f"❌ {type(e).__name__}: {str(e)}", Fore.RED)
        else:
            logger.exception("Unexpected failure")
            print_status(f"❌ Unexpected error: {str(e)}", Fore.RED)
        return code


if __name__ == "__main__":
    sys.exit(main())
