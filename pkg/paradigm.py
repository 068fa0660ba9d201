"""
Flash scheduling for the 36-object speller

A sequence is described by its co-flash graph: one vertex per flash and one
edge per object, joining the two flashes that highlight it. Every vertex has
degree objects_per_flash. A simple graph means two flashes of a sequence share
at most one object, so the pair of flashes hit by an object names it. Flashes
at consecutive positions are never joined, which keeps objects out of
neighbouring flashes. The graph starts as a circulant and is shuffled by
random degree-preserving edge swaps before objects are dealt onto the edges.
"""

import logging
from typing import Iterable, List, Optional, Sequence, Set, Tuple

import numpy as np

from exceptions import SchedulingError
from models import (
    DEFAULT_TIMING,
    FlashEvent,
    FlashSchedule,
    StimulusTimeline,
    TimingConfig,
    schedule_violations,
)

logger = logging.getLogger(__name__)

SHUFFLE_SWAPS = 150

Edge = Tuple[int, int]


def _circulant_edges(cfg: TimingConfig) -> List[Edge]:
    """Regular co-flash graph with no edge between consecutive positions"""
    n, degree = cfg.flashes_per_sequence, cfg.objects_per_flash
    if degree > n - 3:
        raise SchedulingError(
            f"{degree} objects per flash cannot be spread over {n} flashes "
            f"with at most one shared object per pair of flashes"
        )
    offsets = list(range(2, 2 + degree // 2))
    edges = {(min(v, (v + o) % n), max(v, (v + o) % n)) for v in range(n) for o in offsets}
    if degree % 2:
        edges |= {(v, v + n // 2) for v in range(n // 2)}
    return sorted(edges)


def _shuffle_edges(rng: np.random.Generator, edges: List[Edge], n_swaps: int) -> List[Edge]:
    edges = list(edges)
    present = set(edges)
    picks = rng.integers(len(edges), size=(n_swaps, 2))
    flips = rng.integers(2, size=n_swaps)

    for (i, j), flip in zip(picks, flips):
        if i == j:
            continue
        a, b = edges[i]
        c, d = edges[j] if not flip else edges[j][::-1]
        first, second = (min(a, d), max(a, d)), (min(c, b), max(c, b))
        # consecutive positions stay unjoined
        if a == d or c == b or first[1] - first[0] == 1 or second[1] - second[0] == 1:
            continue
        if first in present or second in present or first == second:
            continue
        present -= {edges[i], edges[j]}
        present |= {first, second}
        edges[i], edges[j] = first, second

    return edges


def _build_sequence(
    rng: np.random.Generator,
    cfg: TimingConfig,
    previous: Optional[Set[int]],
    n_swaps: int,
) -> List[Set[int]]:
    """Flash groups of one sequence; the first group avoids the previous flash"""
    edges = _shuffle_edges(rng, _circulant_edges(cfg), n_swaps)
    opening = [e for e, edge in enumerate(edges) if 0 in edge]
    rest = [e for e, edge in enumerate(edges) if 0 not in edge]

    allowed = np.array(sorted(set(range(cfg.n_objects)) - (previous or set())))
    chosen = rng.choice(allowed, size=len(opening), replace=False)
    remaining = rng.permutation(np.setdiff1d(np.arange(cfg.n_objects), chosen))

    flashes: List[Set[int]] = [set() for _ in range(cfg.flashes_per_sequence)]
    for e, obj in zip(opening + rest, np.concatenate([chosen, remaining])):
        u, v = edges[e]
        flashes[u].add(int(obj))
        flashes[v].add(int(obj))
    return flashes


def generate_schedule(
    seed: int,
    cfg: TimingConfig = DEFAULT_TIMING,
    n_swaps: int = SHUFFLE_SWAPS,
) -> FlashSchedule:
    """
    Generate the flash schedule of one trial

    Args:
        seed: Seed for numpy's default generator; equal seeds give equal schedules
        cfg: Timing configuration (sequence counts and group sizes)
        n_swaps: Edge swaps attempted when shuffling each sequence's co-flash graph

    Returns:
        A FlashSchedule with every object twice per sequence, no object in two
        consecutive flashes (sequence boundaries included) and no two flashes
        of a sequence sharing more than one object

    Raises:
        SchedulingError: cfg leaves no room for such a sequence
    """
    rng = np.random.default_rng(seed)
    flashes = []
    previous: Optional[Set[int]] = None

    for _ in range(cfg.sequences_per_trial):
        sequence = _build_sequence(rng, cfg, previous, n_swaps)
        flashes.extend(tuple(sorted(group)) for group in sequence)
        previous = sequence[-1]

    return FlashSchedule(
        flashes=tuple(flashes),
        seed=seed,
        flashes_per_sequence=cfg.flashes_per_sequence,
        n_objects=cfg.n_objects,
        objects_per_flash=cfg.objects_per_flash,
    )


def validate_schedule(schedule: FlashSchedule) -> None:
    """Raise SchedulingError naming every violated schedule constraint"""
    problems = schedule_violations(
        schedule.flashes, schedule.flashes_per_sequence, schedule.n_objects, schedule.objects_per_flash
    )
    if problems:
        raise SchedulingError("; ".join(problems))


def timeline(schedule: FlashSchedule, cfg: TimingConfig = DEFAULT_TIMING) -> StimulusTimeline:
    """
    Place every flash of a schedule on the time axis

    Flash k starts at k * soa() ms after the first flash.
    """
    soa = cfg.soa()
    events = tuple(
        FlashEvent(
            onset_ms=float(k * soa),
            objects=group,
            sequence_index=k // schedule.flashes_per_sequence,
            flash_index=k % schedule.flashes_per_sequence,
        )
        for k, group in enumerate(schedule.flashes)
    )
    return StimulusTimeline(events=events)


def target_flash_indices(schedule: FlashSchedule, target: int) -> List[int]:
    """Indices of the flashes that highlight the target object"""
    return [k for k, group in enumerate(schedule.flashes) if target in group]


# ========== TEXT FORMAT ==========

def format_schedules(schedules: Sequence[FlashSchedule], first_trial: int = 0) -> str:
    """
    Render schedules as `trial,sequence,flash,obj1..objN` lines

    Args:
        schedules: Schedules in trial order
        first_trial: Trial number of the first schedule

    Returns:
        Text with one line per flash and a trailing newline
    """
    lines = []
    for t, schedule in enumerate(schedules, start=first_trial):
        for k, group in enumerate(schedule.flashes):
            sequence, flash = divmod(k, schedule.flashes_per_sequence)
            lines.append(",".join(str(v) for v in (t, sequence, flash, *group)))
    return "\n".join(lines) + "\n"


def parse_schedules(lines: Iterable[str], cfg: TimingConfig = DEFAULT_TIMING) -> List[FlashSchedule]:
    """
    Parse the text produced by format_schedules back into validated schedules

    Blank lines and lines starting with '#' or 'trial' are skipped.
    """
    trials: dict = {}
    for number, raw in enumerate(lines, start=1):
        line = raw.strip()
        if not line or line.startswith("#") or line.startswith("trial"):
            continue
        try:
            values = [int(v) for v in line.split(",")]
        except ValueError:
            raise SchedulingError(f"line {number}: expected comma-separated integers")
        if len(values) != 3 + cfg.objects_per_flash:
            raise SchedulingError(
                f"line {number}: expected {3 + cfg.objects_per_flash} fields, got {len(values)}"
            )
        trial, sequence, flash = values[:3]
        trials.setdefault(trial, []).append((sequence, flash, tuple(values[3:])))

    schedules = []
    for trial in sorted(trials):
        rows = sorted(trials[trial], key=lambda row: (row[0], row[1]))
        schedule = FlashSchedule.model_construct(
            flashes=tuple(group for _, _, group in rows),
            flashes_per_sequence=cfg.flashes_per_sequence,
            n_objects=cfg.n_objects,
            objects_per_flash=cfg.objects_per_flash,
        )
        try:
            validate_schedule(schedule)
        except SchedulingError as e:
            raise SchedulingError(f"trial {trial}: {str(e)}")
        schedules.append(schedule)
    logger.info(f"✅ Parsed {len(schedules)} schedule(s)")
    return schedules
