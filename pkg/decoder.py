"""
Regularized LDA decoder and per-object evidence accumulation
"""

import json
import logging
from typing import Iterable, List, Optional, Sequence, Union

import numpy as np
from sklearn.covariance import ledoit_wolf_shrinkage
from sklearn.metrics import roc_auc_score

from exceptions import (
    ArtifactIOError,
    DecoderNumericalError,
    DimensionMismatchError,
    EmptyInputError,
    ParameterRangeError,
    SelectionError,
)
from models import (
    CHANNEL_LABELS,
    DEFAULT_TIMING,
    FlashSchedule,
    RldaModel,
    ScoreBoard,
    TimingConfig,
    WindowSpec,
)
from performance_diagnostics import measure_time
from pipeline import FeatureVector

logger = logging.getLogger(__name__)

# Condition number above which the shrunk covariance is treated as singular
MAX_CONDITION_NUMBER = 1e12


def _as_matrix(values, name: str) -> np.ndarray:
    matrix = np.asarray(values, dtype=float)
    if matrix.ndim == 1:
        matrix = matrix[None, :]
    if matrix.ndim != 2:
        raise DimensionMismatchError(f"{name} must be a samples x features matrix")
    return matrix


def pooled_covariance(features_target: np.ndarray, features_nontarget: np.ndarray) -> np.ndarray:
    """Class-centered pooled covariance divided by (n - 2)"""
    centered = np.vstack([
        features_target - features_target.mean(axis=0),
        features_nontarget - features_nontarget.mean(axis=0),
    ])
    return centered.T @ centered / (centered.shape[0] - 2)


def analytic_shrinkage(features_target: np.ndarray, features_nontarget: np.ndarray) -> float:
    """Ledoit-Wolf intensity toward a scaled identity, estimated on class-centered data"""
    centered = np.vstack([
        features_target - features_target.mean(axis=0),
        features_nontarget - features_nontarget.mean(axis=0),
    ])
    return float(np.clip(ledoit_wolf_shrinkage(centered, assume_centered=True), 0.0, 1.0))


@measure_time("rlda training")
def train(
    features_target,
    features_nontarget,
    shrinkage: Optional[float] = None,
    channel_order: Sequence[str] = CHANNEL_LABELS,
    window_spec: Optional[WindowSpec] = None,
) -> RldaModel:
    """
    Train the shrinkage LDA

    Args:
        features_target: Target feature rows (n_T x d)
        features_nontarget: Non-target feature rows (n_NT x d)
        shrinkage: Fixed lambda in [0, 1]; the analytic estimate is used when None
        channel_order: Channel labels recorded with the model
        window_spec: Feature window layout recorded with the model

    Returns:
        RldaModel whose score is positive for target-like features

    Raises:
        EmptyInputError: fewer than 2 rows in a class
        DecoderNumericalError: the shrunk covariance cannot be inverted
    """
    target = _as_matrix(features_target, "features_target")
    nontarget = _as_matrix(features_nontarget, "features_nontarget")
    if target.shape[0] < 2 or nontarget.shape[0] < 2:
        raise EmptyInputError(
            f"need at least 2 samples per class, got {target.shape[0]} target and {nontarget.shape[0]} non-target"
        )
    if target.shape[1] != nontarget.shape[1]:
        raise DimensionMismatchError(
            f"class feature dimensions differ: {target.shape[1]} vs {nontarget.shape[1]}"
        )
    if shrinkage is not None and not 0.0 <= shrinkage <= 1.0:
        raise ParameterRangeError(f"shrinkage must lie in [0, 1], got {shrinkage}")

    d = target.shape[1]
    mean_target = target.mean(axis=0)
    mean_nontarget = nontarget.mean(axis=0)
    covariance = pooled_covariance(target, nontarget)
    nu = float(np.trace(covariance) / d)
    lam = analytic_shrinkage(target, nontarget) if shrinkage is None else float(shrinkage)

    shrunk = (1.0 - lam) * covariance + lam * nu * np.eye(d)
    try:
        if np.linalg.cond(shrunk) > MAX_CONDITION_NUMBER:
            raise np.linalg.LinAlgError("shrunk covariance is singular to working precision")
        weights = np.linalg.solve(shrunk, mean_target - mean_nontarget)
    except np.linalg.LinAlgError as e:
        raise DecoderNumericalError(
            f"cannot invert the shrunk covariance at lambda={lam}: {e}; use a shrinkage lambda > 0"
        )
    if not np.all(np.isfinite(weights)):
        raise DecoderNumericalError(f"non-finite weights at lambda={lam}; use a shrinkage lambda > 0")

    bias = float(-weights @ (mean_target + mean_nontarget) / 2.0)
    logger.debug(f"Trained RLDA on {target.shape[0]}+{nontarget.shape[0]} samples, d={d}, lambda={lam:.4f}")
    return RldaModel(
        weights=weights,
        bias=bias,
        shrinkage=lam,
        nu=nu,
        target_mean=mean_target,
        nontarget_mean=mean_nontarget,
        channel_order=tuple(channel_order),
        window_spec=window_spec or WindowSpec(),
    )


def train_from_labels(features, labels, shrinkage: Optional[float] = None) -> RldaModel:
    """Train from a feature matrix and boolean target labels"""
    features = _as_matrix(features, "features")
    labels = np.asarray(labels, dtype=bool)
    if labels.shape[0] != features.shape[0]:
        raise DimensionMismatchError(f"{features.shape[0]} feature rows but {labels.shape[0]} labels")
    return train(features[labels], features[~labels], shrinkage)


def score(model: RldaModel, features: Union[FeatureVector, np.ndarray, Sequence[float]]) -> float:
    """weights . f + bias"""
    values = np.asarray(features.values if isinstance(features, FeatureVector) else features, dtype=float)
    if values.shape != (model.dimension,):
        raise DimensionMismatchError(f"expected {model.dimension} features, got shape {values.shape}")
    return float(values @ model.weights + model.bias)


def score_batch(model: RldaModel, features: np.ndarray) -> np.ndarray:
    """Scores of every row of a feature matrix"""
    matrix = _as_matrix(features, "features")
    if matrix.shape[1] != model.dimension:
        raise DimensionMismatchError(f"expected {model.dimension} features, got {matrix.shape[1]}")
    return matrix @ model.weights + model.bias


def accumulate(board: ScoreBoard, epoch_score: float, object_flags: Iterable[int]) -> ScoreBoard:
    """Add one flash's score to every flagged object"""
    scores = list(board.scores)
    counts = list(board.counts)
    for object_id in set(object_flags):
        if not 0 <= object_id < len(scores):
            raise SelectionError(f"object id {object_id} outside 0..{len(scores) - 1}")
        scores[object_id] += float(epoch_score)
        counts[object_id] += 1
    return ScoreBoard(scores=tuple(scores), counts=tuple(counts), flashes_seen=board.flashes_seen + 1)


def select(board: ScoreBoard, flashes_per_sequence: int = DEFAULT_TIMING.flashes_per_sequence) -> int:
    """
    Object with the highest cumulative score; ties go to the lowest id

    Raises:
        SelectionError: fewer flashes than one full sequence were accumulated
    """
    if board.flashes_seen < flashes_per_sequence:
        raise SelectionError(
            f"need at least {flashes_per_sequence} flashes before selecting, got {board.flashes_seen}"
        )
    return int(np.argmax(np.asarray(board.scores)))


def decode_trial(scores: Sequence[float], schedule: FlashSchedule, cfg: TimingConfig = DEFAULT_TIMING) -> List[int]:
    """
    Selections after 1..n sequences of a trial

    Args:
        scores: One classifier score per flash, in schedule order
        schedule: The trial's flash schedule
        cfg: Timing configuration

    Returns:
        Selected object after each number of sequences (cumulative sum, then argmax)
    """
    scores = np.asarray(scores, dtype=float)
    if scores.shape != (len(schedule.flashes),):
        raise DimensionMismatchError(f"expected {len(schedule.flashes)} flash scores, got shape {scores.shape}")
    membership = np.zeros((len(schedule.flashes), schedule.n_objects))
    for k, group in enumerate(schedule.flashes):
        membership[k, list(group)] = 1.0

    per_sequence = (membership * scores[:, None]).reshape(
        schedule.n_sequences, schedule.flashes_per_sequence, schedule.n_objects
    ).sum(axis=1)
    cumulative = np.cumsum(per_sequence, axis=0)
    return [int(i) for i in np.argmax(cumulative, axis=1)]


def epoch_auc(scores: Sequence[float], labels: Sequence[bool]) -> float:
    """Area under the ROC curve of single-epoch scores"""
    labels = np.asarray(labels, dtype=int)
    if labels.min(initial=1) == labels.max(initial=0):
        raise EmptyInputError("AUC needs both target and non-target epochs")
    return float(roc_auc_score(labels, np.asarray(scores, dtype=float)))


# ========== SERIALIZATION ==========

def model_to_json(model: RldaModel) -> str:
    """JSON document {lambda, nu, bias, weights, class_means, channel_order, window_spec}"""
    document = {
        "lambda": model.shrinkage,
        "nu": model.nu,
        "bias": model.bias,
        "weights": np.asarray(model.weights).tolist(),
        "class_means": {
            "target": np.asarray(model.target_mean).tolist(),
            "nontarget": np.asarray(model.nontarget_mean).tolist(),
        },
        "channel_order": list(model.channel_order),
        "window_spec": model.window_spec.model_dump(),
    }
    return json.dumps(document, indent=2)


def model_from_json(text: str) -> RldaModel:
    """
    Inverse of model_to_json

    Raises:
        ArtifactIOError: text is not JSON or a required field is missing
    """
    try:
        document = json.loads(text)
    except ValueError as e:
        raise ArtifactIOError(f"model document is not valid JSON: {str(e)}")
    if not isinstance(document, dict):
        raise ArtifactIOError("model document must be a JSON object")
    missing = [key for key in ("weights", "bias", "lambda", "nu") if key not in document]
    means = document.get("class_means") or {}
    missing += [f"class_means.{key}" for key in ("target", "nontarget") if key not in means]
    if missing:
        raise ArtifactIOError(f"model document lacks {', '.join(missing)}")
    return RldaModel(
        weights=document["weights"],
        bias=document["bias"],
        shrinkage=document["lambda"],
        nu=document["nu"],
        target_mean=means["target"],
        nontarget_mean=means["nontarget"],
        channel_order=tuple(document.get("channel_order", CHANNEL_LABELS)),
        window_spec=WindowSpec(**document.get("window_spec", {})),
    )
