"""
Monte-Carlo experiment harness

Every (subject, condition) pair is simulated independently: a training phase
fits one decoder, a testing phase is decoded after 1..10 sequences. All
randomness is derived from the master seed through numpy SeedSequence spawn
keys, so adding subjects or conditions never changes existing ones.
"""

import logging
from concurrent.futures import ProcessPoolExecutor
from enum import IntEnum
from typing import List, Optional, Tuple

import numpy as np
import pandas as pd
from pydantic import BaseModel, ConfigDict

from analysis import (
    L2_COLUMNS,
    accuracy_statistics,
    accuracy_table,
    component_l2_rows,
    peak_statistics,
)
from decoder import decode_trial, epoch_auc, score_batch, train_from_labels
from models import (
    DEFAULT_TIMING,
    N_CHANNELS,
    Condition,
    DecodeStep,
    ExperimentConfig,
    FlashSchedule,
    ProfileOverrides,
    RldaModel,
    SubjectProfile,
    TimingConfig,
    Trial,
)
from paradigm import generate_schedule
from performance_diagnostics import PhaseTimer
from pipeline import epoch_trial, extract_features_array, flash_epochs
from synthgen import EegStream, default_profile, render_stream

logger = logging.getLogger(__name__)

SELECTION_COLUMNS = ["subject", "condition", "trial", "sequence", "selected", "target"]
DECODE_LOG_COLUMNS = ["subject", "step", "condition", "intent", "selected", "correct"]


class Phase(IntEnum):
    """Protocol phases"""
    TRAINING = 0
    TESTING = 1


def derive_seed(master_seed: int, *keys: int) -> int:
    """
    Child seed for a position in the experiment tree

    Args:
        master_seed: Experiment master seed
        keys: Non-negative path, e.g. (subject, condition, phase, trial)

    Returns:
        A 32-bit seed that depends only on master_seed and keys
    """
    sequence = np.random.SeedSequence(master_seed, spawn_key=tuple(int(k) for k in keys))
    return int(sequence.generate_state(1)[0])


def subject_profile(master_seed: int, subject: int, overrides: Optional[ProfileOverrides] = None) -> SubjectProfile:
    """Calibrated profile of one synthetic subject"""
    return default_profile(derive_seed(master_seed, subject), overrides)


def render_trial(
    profile: SubjectProfile,
    condition: Condition,
    target: int,
    schedule_seed: int,
    noise_seed: int,
    cfg: TimingConfig = DEFAULT_TIMING,
) -> Tuple[FlashSchedule, EegStream]:
    """Schedule and rendered stream of one trial aimed at `target`"""
    schedule = generate_schedule(schedule_seed, cfg)
    return schedule, render_stream(schedule, condition, target, profile, cfg, noise_seed=noise_seed)


def render_phase_trial(
    profile: SubjectProfile,
    condition: Condition,
    master_seed: int,
    seed_keys: Tuple[int, ...],
    trial: int,
    cfg: TimingConfig = DEFAULT_TIMING,
) -> Tuple[int, FlashSchedule, EegStream]:
    """Target, schedule and stream of trial `trial` of a phase"""
    rng = np.random.default_rng(derive_seed(master_seed, *seed_keys, trial))
    target = int(rng.integers(cfg.n_objects))
    schedule_seed, noise_seed = (int(v) for v in rng.integers(2**31 - 1, size=2))
    return (target, *render_trial(profile, condition, target, schedule_seed, noise_seed, cfg))


def phase_trials(
    profile: SubjectProfile,
    condition: Condition,
    n_trials: int,
    master_seed: int,
    seed_keys: Tuple[int, ...],
    cfg: TimingConfig = DEFAULT_TIMING,
) -> List[Trial]:
    """Epoched trials of a phase with per-epoch metadata; the same trials simulate_phase renders"""
    trials = []
    for trial in range(n_trials):
        target, schedule, stream = render_phase_trial(profile, condition, master_seed, seed_keys, trial, cfg)
        trials.append(epoch_trial(stream, schedule, condition, target, trial, cfg))
    return trials


class PhaseData(BaseModel):
    """Features, labels and mean epochs of one simulated phase"""
    model_config = ConfigDict(arbitrary_types_allowed=True)

    features: np.ndarray
    labels: np.ndarray
    targets: List[int]
    schedules: List[FlashSchedule]
    target_sum: np.ndarray
    nontarget_sum: np.ndarray
    n_target: int
    n_nontarget: int

    @property
    def target_mean(self) -> np.ndarray:
        return self.target_sum / max(self.n_target, 1)

    @property
    def nontarget_mean(self) -> np.ndarray:
        return self.nontarget_sum / max(self.n_nontarget, 1)


def simulate_phase(
    profile: SubjectProfile,
    condition: Condition,
    n_trials: int,
    master_seed: int,
    seed_keys: Tuple[int, ...],
    cfg: TimingConfig = DEFAULT_TIMING,
) -> PhaseData:
    """
    Render, epoch and featurize the trials of one phase

    Args:
        profile: Synthetic subject
        condition: Condition of every trial
        n_trials: Number of trials
        master_seed: Experiment master seed
        seed_keys: Seed path of the phase, e.g. (subject, condition, phase)
        cfg: Timing configuration

    Returns:
        PhaseData with one feature row per flash, in trial then flash order
    """
    features, labels, targets, schedules = [], [], [], []
    target_sum = np.zeros((N_CHANNELS, cfg.n_epoch_samples))
    nontarget_sum = np.zeros_like(target_sum)
    n_target = n_nontarget = 0

    for trial in range(n_trials):
        target, schedule, stream = render_phase_trial(profile, condition, master_seed, seed_keys, trial, cfg)
        epochs = flash_epochs(stream, schedule, cfg)
        is_target = np.array([target in group for group in schedule.flashes])

        features.append(extract_features_array(epochs, cfg))
        labels.append(is_target)
        targets.append(target)
        schedules.append(schedule)
        target_sum += epochs[is_target].sum(axis=0)
        nontarget_sum += epochs[~is_target].sum(axis=0)
        n_target += int(is_target.sum())
        n_nontarget += int((~is_target).sum())

    return PhaseData(
        features=np.vstack(features),
        labels=np.concatenate(labels),
        targets=targets,
        schedules=schedules,
        target_sum=target_sum,
        nontarget_sum=nontarget_sum,
        n_target=n_target,
        n_nontarget=n_nontarget,
    )


class SubjectConditionResult(BaseModel):
    """Outcome of one (subject, condition) simulation"""
    model_config = ConfigDict(arbitrary_types_allowed=True)

    subject: int
    condition: Condition
    model: RldaModel
    selections: List[dict]
    l2_rows: List[dict]
    decode_log: List[DecodeStep]
    auc: float


def decode_phase(model: RldaModel, phase: PhaseData, cfg: TimingConfig = DEFAULT_TIMING) -> List[List[int]]:
    """Selections after 1..n sequences for every trial of a phase"""
    scores = score_batch(model, phase.features).reshape(len(phase.schedules), -1)
    return [decode_trial(trial_scores, schedule, cfg) for trial_scores, schedule in zip(scores, phase.schedules)]


def run_subject_condition(config: ExperimentConfig, subject: int, condition: Condition) -> SubjectConditionResult:
    """
    Train on the training phase, decode the testing phase

    Args:
        config: Experiment configuration
        subject: Subject index
        condition: Condition to simulate

    Returns:
        SubjectConditionResult with selections per trial and sequence count,
        L2 rows of both phases' mean epochs, and the decode log
    """
    cfg = config.timing
    condition = Condition(condition)
    profile = subject_profile(config.master_seed, subject, config.profile)
    label = f"subject {subject} condition {int(condition)}"

    with PhaseTimer(f"{label} training phase", level=logging.DEBUG):
        training = simulate_phase(profile, condition, config.trials_per_phase, config.master_seed,
                                  (subject, int(condition), Phase.TRAINING), cfg)
        model = train_from_labels(training.features, training.labels, config.shrinkage)
    with PhaseTimer(f"{label} testing phase", level=logging.DEBUG):
        testing = simulate_phase(profile, condition, config.trials_per_phase, config.master_seed,
                                 (subject, int(condition), Phase.TESTING), cfg)
        decoded = decode_phase(model, testing, cfg)

    selections = [
        {"subject": subject, "condition": int(condition), "trial": trial, "sequence": k + 1,
         "selected": chosen, "target": target}
        for trial, (per_k, target) in enumerate(zip(decoded, testing.targets))
        for k, chosen in enumerate(per_k)
    ]
    decode_log = [
        DecodeStep(step=trial, condition=condition, intent=target, selected=per_k[-1], correct=per_k[-1] == target)
        for trial, (per_k, target) in enumerate(zip(decoded, testing.targets))
    ]

    n_target = training.n_target + testing.n_target
    n_nontarget = training.n_nontarget + testing.n_nontarget
    l2_rows = [
        {"subject": subject, "condition": int(condition), **row}
        for row in component_l2_rows(
            (training.target_sum + testing.target_sum) / n_target,
            (training.nontarget_sum + testing.nontarget_sum) / n_nontarget,
            cfg=cfg,
        )
    ]

    auc = epoch_auc(score_batch(model, testing.features), testing.labels)
    logger.info(f"✅ {label}: lambda={model.shrinkage:.3f}, AUC={auc:.3f}, "
                f"final accuracy={np.mean([s.correct for s in decode_log]) * 100:.1f}%")
    return SubjectConditionResult(
        subject=subject, condition=condition, model=model, selections=selections,
        l2_rows=l2_rows, decode_log=decode_log, auc=auc,
    )


def _run_task(task: Tuple[ExperimentConfig, int, int]) -> SubjectConditionResult:
    config, subject, condition = task
    return run_subject_condition(config, subject, Condition(condition))


class ExperimentResult(BaseModel):
    """Every table of a full experiment"""
    model_config = ConfigDict(arbitrary_types_allowed=True)

    config: ExperimentConfig
    results: List[SubjectConditionResult]
    selections: pd.DataFrame
    accuracy: pd.DataFrame
    accuracy_stats: pd.DataFrame
    l2: pd.DataFrame
    peak_stats: pd.DataFrame
    decode_log: pd.DataFrame


def run_experiment(config: ExperimentConfig) -> ExperimentResult:
    """
    Simulate every subject under every configured condition

    Subjects x conditions run in a process pool when config.workers > 1;
    results are ordered by (subject, condition) either way.
    """
    tasks = [(config, subject, int(condition)) for subject in range(config.n_subjects) for condition in config.conditions]
    logger.info(f"🔥 Running {len(tasks)} subject/condition simulations (workers={config.workers})")

    with PhaseTimer("experiment"):
        if config.workers > 1 and len(tasks) > 1:
            with ProcessPoolExecutor(max_workers=config.workers) as pool:
                results = list(pool.map(_run_task, tasks))
        else:
            results = [_run_task(task) for task in tasks]

    selections = pd.DataFrame([row for r in results for row in r.selections], columns=SELECTION_COLUMNS)
    l2 = pd.DataFrame([row for r in results for row in r.l2_rows], columns=L2_COLUMNS)
    decode_log = pd.DataFrame(
        [
            {"subject": r.subject, "step": s.step, "condition": int(s.condition), "intent": s.intent,
             "selected": s.selected, "correct": int(s.correct)}
            for r in results for s in r.decode_log
        ],
        columns=DECODE_LOG_COLUMNS,
    )
    accuracy = accuracy_table(selections)
    logger.info(f"📊 Mean single-epoch AUC {np.mean([r.auc for r in results]):.3f}")
    return ExperimentResult(
        config=config,
        results=results,
        selections=selections,
        accuracy=accuracy,
        accuracy_stats=accuracy_statistics(selections),
        l2=l2,
        peak_stats=peak_statistics(l2),
        decode_log=decode_log,
    )


def measure_auc(
    profile: SubjectProfile,
    condition: Condition,
    cfg: TimingConfig = DEFAULT_TIMING,
    n_train: int = 20,
    n_test: int = 20,
    seed: int = 0,
    shrinkage: Optional[float] = None,
) -> float:
    """
    Single-epoch target/non-target AUC of a decoder trained on simulated data

    Args:
        profile: Synthetic subject
        condition: Condition to render
        cfg: Timing configuration
        n_train: Training trials
        n_test: Testing trials (120 epochs each)
        seed: Master seed of the simulated phases
        shrinkage: Fixed lambda, analytic when None

    Returns:
        ROC AUC of the test-epoch scores
    """
    training = simulate_phase(profile, condition, n_train, seed, (0, int(condition), Phase.TRAINING), cfg)
    testing = simulate_phase(profile, condition, n_test, seed, (0, int(condition), Phase.TESTING), cfg)
    model = train_from_labels(training.features, training.labels, shrinkage)
    return epoch_auc(score_batch(model, testing.features), testing.labels)
