"""
Smart-home state machine driven by decoded selections
"""

import json
import logging
from typing import List, Sequence, Tuple

import pandas as pd
from pydantic import BaseModel, ConfigDict, Field, model_validator

from decoder import decode_trial, score_batch
from exceptions import ArtifactIOError, SelectionError
from experiment import derive_seed, render_trial
from models import (
    CHARSET,
    DEFAULT_TIMING,
    Condition,
    DecodeStep,
    Device,
    HomeState,
    RldaModel,
    SpecialIds,
    SpellerMode,
    SubjectProfile,
    TimingConfig,
)
from pipeline import extract_features_array, flash_epochs

logger = logging.getLogger(__name__)

EXIT_SYMBOL = "_"
DECODE_LOG_COLUMNS = ["step", "condition", "intent", "selected", "correct"]


class DeviceEntry(BaseModel):
    """Manifest row"""
    model_config = ConfigDict(frozen=True)

    id: int = Field(..., ge=0, le=35)
    room: int = Field(..., ge=0, le=3)
    label: str = Field(..., min_length=1, max_length=100)
    initial_active: bool = False


class HomeManifest(BaseModel):
    """Rooms, devices, special objects and contacts of the virtual home"""
    model_config = ConfigDict(frozen=True)

    rooms: Tuple[str, ...] = Field(..., min_length=4, max_length=4)
    devices: Tuple[DeviceEntry, ...]
    special_ids: SpecialIds
    contacts: Tuple[str, ...] = ()

    @model_validator(mode="after")
    def check_devices(self):
        ids = sorted(entry.id for entry in self.devices)
        if ids != list(range(36)):
            raise ValueError("manifest must list each object id 0..35 exactly once")
        return self


def load_manifest(path: str) -> HomeManifest:
    """Read and validate a device manifest JSON file"""
    try:
        with open(path, "r", encoding="utf-8") as handle:
            document = json.load(handle)
    except (OSError, ValueError) as e:
        raise ArtifactIOError(f"Failed to read manifest {path}: {str(e)}")
    manifest = HomeManifest(**document)
    logger.info(f"✅ Loaded manifest with {len(manifest.devices)} devices in {len(manifest.rooms)} rooms")
    return manifest


def initial_state(manifest: HomeManifest) -> HomeState:
    """HomeState with every device at its manifest default"""
    devices = tuple(
        Device(object_id=entry.id, room=entry.room, label=entry.label, active=entry.initial_active)
        for entry in sorted(manifest.devices, key=lambda entry: entry.id)
    )
    return HomeState(devices=devices, special_ids=manifest.special_ids, call_list=manifest.contacts)


def apply_selection(state: HomeState, object_id: int) -> HomeState:
    """
    Apply one decoded selection

    Home mode: an ordinary id toggles its device, the character-speller id
    switches screens and the call-list id opens the call list. Character mode:
    the id appends its symbol; the underscore selected twice in a row confirms
    the text (without the trailing underscore) and returns to home mode.

    Raises:
        SelectionError: object_id outside 0..35
    """
    if not 0 <= object_id < len(state.devices):
        raise SelectionError(f"object id {object_id} outside 0..{len(state.devices) - 1}")

    if state.mode == SpellerMode.HOME:
        if object_id == state.special_ids.to_char_speller:
            return state.model_copy(update={
                "mode": SpellerMode.CHARACTER,
                "pending_exit": False,
                "events": state.events + ("mode:character_speller",),
            })
        if object_id == state.special_ids.call_list:
            return state.model_copy(update={"events": state.events + ("call_list:opened",)})

        devices = list(state.devices)
        device = devices[object_id]
        devices[object_id] = device.model_copy(update={"active": not device.active})
        status = "on" if not device.active else "off"
        return state.model_copy(update={
            "devices": tuple(devices),
            "events": state.events + (f"device:{object_id}:{status}",),
        })

    symbol = CHARSET[object_id]
    if symbol == EXIT_SYMBOL and state.pending_exit:
        text = state.text_buffer[:-1]
        return state.model_copy(update={
            "mode": SpellerMode.HOME,
            "text_buffer": "",
            "pending_exit": False,
            "events": state.events + (f"text:confirmed:{text}", "mode:home_speller"),
        })
    return state.model_copy(update={
        "text_buffer": state.text_buffer + symbol,
        "pending_exit": symbol == EXIT_SYMBOL,
        "events": state.events + (f"char:{symbol}",),
    })


def decode_selection(
    intent: int,
    model: RldaModel,
    profile: SubjectProfile,
    condition: Condition,
    schedule_seed: int,
    noise_seed: int,
    cfg: TimingConfig = DEFAULT_TIMING,
) -> int:
    """Simulate one trial aimed at `intent` and return the decoded object"""
    schedule, stream = render_trial(profile, condition, intent, schedule_seed, noise_seed, cfg)
    features = extract_features_array(flash_epochs(stream, schedule, cfg), cfg)
    return decode_trial(score_batch(model, features), schedule, cfg)[-1]


def run_closed_loop(
    intents: Sequence[int],
    model: RldaModel,
    profile: SubjectProfile,
    state: HomeState,
    condition: Condition = Condition.ERP_PLUS_MEANINGFUL,
    cfg: TimingConfig = DEFAULT_TIMING,
    seed: int = 0,
) -> Tuple[HomeState, List[DecodeStep]]:
    """
    Drive the home with decoded selections

    Args:
        intents: Objects the synthetic user wants, in order
        model: Trained decoder
        profile: Synthetic subject
        state: Starting state
        condition: Condition the trials are rendered under
        cfg: Timing configuration
        seed: Seed for every schedule and noise draw of the run

    Returns:
        Final state and one DecodeStep per intent
    """
    log: List[DecodeStep] = []
    for step, intent in enumerate(intents):
        if not 0 <= intent < cfg.n_objects:
            raise SelectionError(f"intent {intent} outside 0..{cfg.n_objects - 1}")
        selected = decode_selection(
            intent, model, profile, condition,
            schedule_seed=derive_seed(seed, step, 0),
            noise_seed=derive_seed(seed, step, 1),
            cfg=cfg,
        )
        state = apply_selection(state, selected)
        log.append(DecodeStep(step=step, condition=condition, intent=intent, selected=selected,
                              correct=selected == intent))

    correct = sum(entry.correct for entry in log)
    if log:
        logger.info(f"📊 Closed loop: {correct}/{len(log)} selections correct")
    return state, log


def decode_log_frame(log: Sequence[DecodeStep]) -> pd.DataFrame:
    """Decode log as a table"""
    rows = [
        {"step": e.step, "condition": int(e.condition), "intent": e.intent, "selected": e.selected,
         "correct": int(e.correct)}
        for e in log
    ]
    return pd.DataFrame(rows, columns=DECODE_LOG_COLUMNS)
