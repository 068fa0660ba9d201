"""
Component distances, nonparametric tests and result tables
"""

import itertools
import logging
from typing import Dict, List, Mapping, Optional, Sequence, Union

import numpy as np
import pandas as pd
from scipy import stats

from exceptions import DimensionMismatchError, EmptyInputError, ParameterRangeError
from models import (
    COMPONENT_WINDOWS,
    DEFAULT_MONTAGE,
    DEFAULT_TIMING,
    N700_WINDOW,
    ComponentName,
    ComponentWindow,
    Epoch,
    Montage,
    Region,
    TestMethod,
    TestResult,
    TimingConfig,
)

logger = logging.getLogger(__name__)

ALPHA = 0.05
EXACT_RANK_SUM_LIMIT = 10

ACCURACY_COLUMNS = ["condition", "sequence", "mean", "sd", "n_subjects"]
L2_COLUMNS = ["subject", "condition", "component", "region", "channel", "l2"]


def component_l2(target_mean: Sequence[float], nontarget_mean: Sequence[float]) -> float:
    """Euclidean distance between the target and non-target mean waveforms"""
    target = np.asarray(target_mean, dtype=float)
    nontarget = np.asarray(nontarget_mean, dtype=float)
    if target.shape != nontarget.shape:
        raise DimensionMismatchError(f"waveform lengths differ: {target.shape} vs {nontarget.shape}")
    return float(np.sqrt(np.sum((target - nontarget) ** 2)))


def window_mean_series(
    epochs: Union[Sequence[Epoch], np.ndarray],
    channel: Union[int, str],
    window: ComponentWindow,
    cfg: TimingConfig = DEFAULT_TIMING,
    montage: Montage = DEFAULT_MONTAGE,
) -> np.ndarray:
    """
    Pointwise mean over epochs of one channel inside a component window

    Args:
        epochs: Baseline-corrected epochs, or an (n, channels, samples) array
        channel: Row index or channel label
        window: Inclusive component window, clipped to the epoch end
        cfg: Timing configuration
        montage: Channel order used to resolve labels

    Returns:
        Mean waveform over the window samples
    """
    if isinstance(epochs, np.ndarray):
        stack = epochs
    else:
        stack = np.stack([np.asarray(epoch.samples) for epoch in epochs]) if len(epochs) else np.empty((0,))
    if stack.shape[0] == 0:
        raise EmptyInputError("window_mean_series needs at least one epoch")
    row = montage.index(channel) if isinstance(channel, str) else int(channel)
    return stack[:, row, window.column_slice(cfg)].mean(axis=0)


# ========== TESTS ==========

def kruskal_wallis(groups: Sequence[Sequence[float]]) -> TestResult:
    """
    Kruskal-Wallis H test with midrank tie correction and chi-square p-value

    All-identical data gives H = 0 and p = 1.
    """
    arrays = [np.asarray(g, dtype=float).ravel() for g in groups]
    if len(arrays) < 2:
        raise EmptyInputError("Kruskal-Wallis needs at least 2 groups")
    if any(a.size == 0 for a in arrays):
        raise EmptyInputError("every Kruskal-Wallis group must be non-empty")

    df = len(arrays) - 1
    pooled = np.concatenate(arrays)
    if np.all(pooled == pooled[0]):
        return TestResult(statistic=0.0, df=df, p_value=1.0, method=TestMethod.KRUSKAL_WALLIS)

    result = stats.kruskal(*arrays)
    return TestResult(
        statistic=float(result.statistic),
        df=df,
        p_value=float(np.clip(result.pvalue, 0.0, 1.0)),
        method=TestMethod.KRUSKAL_WALLIS,
    )


def wilcoxon_rank_sum(a: Sequence[float], b: Sequence[float]) -> TestResult:
    """
    Two-sided Wilcoxon rank-sum test

    The statistic is the rank sum of `a`. Small samples without ties use the
    exact permutation distribution; everything else uses the normal
    approximation with tie-corrected variance and continuity correction.
    """
    x = np.asarray(a, dtype=float).ravel()
    y = np.asarray(b, dtype=float).ravel()
    if x.size == 0 or y.size == 0:
        raise EmptyInputError("rank-sum test needs two non-empty samples")

    rank_offset = x.size * (x.size + 1) / 2.0
    pooled = np.concatenate([x, y])
    if np.all(pooled == pooled[0]):
        return TestResult(
            statistic=float(x.size * y.size / 2.0 + rank_offset),
            p_value=1.0,
            method=TestMethod.WILCOXON_RANK_SUM,
        )

    has_ties = np.unique(pooled).size < pooled.size
    if not has_ties and max(x.size, y.size) <= EXACT_RANK_SUM_LIMIT:
        result = stats.mannwhitneyu(x, y, alternative="two-sided", method="exact")
    else:
        result = stats.mannwhitneyu(x, y, alternative="two-sided", use_continuity=True, method="asymptotic")

    return TestResult(
        statistic=float(result.statistic + rank_offset),
        p_value=float(np.clip(result.pvalue, 0.0, 1.0)),
        method=TestMethod.WILCOXON_RANK_SUM,
    )


def bonferroni(p_values: Sequence[float], alpha: float = ALPHA) -> List[bool]:
    """Flag p-values below alpha / m"""
    p_values = list(p_values)
    if any(not 0.0 <= p <= 1.0 for p in p_values):
        raise ParameterRangeError("p-values must lie in [0, 1]")
    if not p_values:
        return []
    threshold = alpha / len(p_values)
    return [p < threshold for p in p_values]


def significance_mark(p_value: float, corrected: bool, alpha: float = ALPHA) -> str:
    """'**' when significant after Bonferroni, '*' when only uncorrected, '' otherwise"""
    if corrected:
        return "**"
    if p_value < alpha:
        return "*"
    return ""


def pairwise_rank_sum(groups: Mapping[int, Sequence[float]], alpha: float = ALPHA) -> Dict[str, object]:
    """
    Post-hoc rank-sum tests over every pair of groups with Bonferroni flags

    Returns:
        Flat mapping p_<a>_<b> and mark_<a>_<b> for every pair a < b
    """
    keys = sorted(groups)
    pairs = list(itertools.combinations(keys, 2))
    p_values = [wilcoxon_rank_sum(groups[a], groups[b]).p_value for a, b in pairs]
    flags = bonferroni(p_values, alpha)
    row: Dict[str, object] = {}
    for (a, b), p, flag in zip(pairs, p_values, flags):
        row[f"p_{int(a)}_{int(b)}"] = p
        row[f"mark_{int(a)}_{int(b)}"] = significance_mark(p, flag, alpha)
    return row


# ========== TABLES ==========

def per_subject_accuracy(selections: pd.DataFrame) -> pd.DataFrame:
    """
    Accuracy in percent per (subject, condition, sequence)

    Args:
        selections: Rows with subject, condition, trial, sequence, selected, target
    """
    frame = selections.assign(correct=(selections["selected"] == selections["target"]).astype(float))
    grouped = frame.groupby(["subject", "condition", "sequence"], as_index=False)["correct"].mean()
    grouped["accuracy"] = grouped.pop("correct") * 100.0
    return grouped


def accuracy_table(selections: pd.DataFrame) -> pd.DataFrame:
    """
    Mean and sd across subjects of per-subject accuracy, per (condition, sequence)

    Args:
        selections: Rows with subject, condition, trial, sequence, selected, target

    Returns:
        DataFrame with condition, sequence, mean, sd, n_subjects
    """
    if selections.empty:
        return pd.DataFrame(columns=ACCURACY_COLUMNS)
    if not selections["sequence"].between(1, 10).all():
        raise ParameterRangeError("sequence counts must lie in 1..10")
    per_subject = per_subject_accuracy(selections)
    table = per_subject.groupby(["condition", "sequence"]).agg(
        mean=("accuracy", "mean"),
        sd=("accuracy", "std"),
        n_subjects=("subject", "nunique"),
    ).reset_index()
    table["sd"] = table["sd"].fillna(0.0)
    return table[ACCURACY_COLUMNS]


def accuracy_statistics(selections: pd.DataFrame, alpha: float = ALPHA) -> pd.DataFrame:
    """
    Kruskal-Wallis across conditions of per-subject accuracy at every sequence count,
    with post-hoc pairwise rank-sum tests

    Returns:
        DataFrame with sequence, chi_square, df, p_value and pairwise columns
        (empty when fewer than two conditions were run)
    """
    if selections.empty or selections["condition"].nunique() < 2:
        return pd.DataFrame(columns=["sequence", "chi_square", "df", "p_value"])
    per_subject = per_subject_accuracy(selections)
    rows = []
    for sequence, block in per_subject.groupby("sequence"):
        groups = {int(c): g["accuracy"].to_numpy() for c, g in block.groupby("condition")}
        result = kruskal_wallis([groups[c] for c in sorted(groups)])
        row = {"sequence": int(sequence), "chi_square": result.statistic, "df": result.df, "p_value": result.p_value}
        row.update(pairwise_rank_sum(groups, alpha))
        rows.append(row)
    return pd.DataFrame(rows)


def component_l2_rows(
    target_mean: np.ndarray,
    nontarget_mean: np.ndarray,
    montage: Montage = DEFAULT_MONTAGE,
    cfg: TimingConfig = DEFAULT_TIMING,
    windows: Sequence[ComponentWindow] = COMPONENT_WINDOWS,
) -> List[dict]:
    """
    L2 distance per channel and component window between two mean epochs

    Args:
        target_mean: Mean baseline-corrected target epoch (channels x samples)
        nontarget_mean: Mean baseline-corrected non-target epoch
        montage: Channel labels and regions
        cfg: Timing configuration
        windows: Component windows to evaluate

    Returns:
        Rows with component, region, channel, l2
    """
    target_mean = np.asarray(target_mean, dtype=float)
    nontarget_mean = np.asarray(nontarget_mean, dtype=float)
    if target_mean.shape != nontarget_mean.shape:
        raise DimensionMismatchError(f"mean epochs differ in shape: {target_mean.shape} vs {nontarget_mean.shape}")
    rows = []
    for window in windows:
        columns = window.column_slice(cfg)
        for row, label in enumerate(montage.channels):
            rows.append({
                "component": window.name.value,
                "region": montage.regions[label].value,
                "channel": label,
                "l2": component_l2(target_mean[row, columns], nontarget_mean[row, columns]),
            })
    return rows


def peak_statistics(l2_frame: pd.DataFrame, alpha: float = ALPHA) -> pd.DataFrame:
    """
    Per component and channel: Kruskal-Wallis across conditions of the subjects' L2 values,
    with post-hoc pairwise rank-sum tests

    Args:
        l2_frame: Rows with subject, condition, component, region, channel, l2

    Returns:
        DataFrame with component, region, channel, chi_square, df, p_value and pairwise columns
    """
    columns = ["component", "region", "channel", "chi_square", "df", "p_value"]
    if l2_frame.empty or l2_frame["condition"].nunique() < 2:
        return pd.DataFrame(columns=columns)
    channel_order = {label: i for i, label in enumerate(DEFAULT_MONTAGE.channels)}
    rows = []
    for (component, channel), block in l2_frame.groupby(["component", "channel"], sort=False):
        groups = {int(c): g["l2"].to_numpy() for c, g in block.groupby("condition")}
        result = kruskal_wallis([groups[c] for c in sorted(groups)])
        row = {
            "component": component,
            "region": block["region"].iloc[0],
            "channel": channel,
            "chi_square": result.statistic,
            "df": result.df,
            "p_value": result.p_value,
        }
        row.update(pairwise_rank_sum(groups, alpha))
        rows.append(row)
    frame = pd.DataFrame(rows)
    frame["_order"] = frame["channel"].map(channel_order)
    return frame.sort_values(["component", "_order"]).drop(columns="_order").reset_index(drop=True)


def region_mean_l2(
    l2_frame: pd.DataFrame,
    region: Region = Region.FRONTAL,
    component: ComponentName = N700_WINDOW.name,
) -> pd.Series:
    """Mean L2 over a region's channels and all subjects, indexed by condition"""
    mask = (l2_frame["region"] == Region(region).value) & (l2_frame["component"] == ComponentName(component).value)
    block = l2_frame[mask]
    if block.empty:
        raise EmptyInputError(f"no {ComponentName(component).value} rows for region {Region(region).value}")
    return block.groupby("condition")["l2"].mean()


def region_kruskal_wallis(
    l2_frame: pd.DataFrame,
    region: Region,
    component: ComponentName,
) -> Optional[TestResult]:
    """Kruskal-Wallis across conditions of every (subject, channel) L2 value in a region"""
    mask = (l2_frame["region"] == Region(region).value) & (l2_frame["component"] == ComponentName(component).value)
    block = l2_frame[mask]
    if block["condition"].nunique() < 2:
        return None
    return kruskal_wallis([g["l2"].to_numpy() for _, g in block.groupby("condition")])
