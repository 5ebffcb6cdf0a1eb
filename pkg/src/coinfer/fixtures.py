"""Paths and loaders for the bundled synthetic fixtures in ``coinfer/data``.

Regenerate them with ``scripts/make_fixtures.py``.
"""

from __future__ import annotations

from pathlib import Path

from .bandwidth import BandwidthTrace, extract_states, load_state_traces, load_trace, rescale_trace
from .latency_model import LatencyPredictor, calibrated_ground_truth, load_predictor, predictor_from_ground_truth
from .model_graph import BranchyModel, load_model

DATA_DIR = Path(__file__).resolve().parent / "data"

ALEXNET_MODEL = DATA_DIR / "branchy_alexnet.json"
ALEXNET_PREDICTOR = DATA_DIR / "predictor.json"
PROFILES = DATA_DIR / "profiles.csv"
BUS_TRACE = DATA_DIR / "bus.csv"
OBOE_DIR = DATA_DIR / "oboe"
HAND_MODEL = DATA_DIR / "hand_model.json"
HAND_PREDICTOR = DATA_DIR / "hand_predictor.json"

# The raw bus log is mapped onto this kbps range before replay.
BUS_RESCALE_KBPS = (100.0, 10_000.0)


def alexnet() -> tuple[BranchyModel, LatencyPredictor]:
    return load_model(ALEXNET_MODEL), load_predictor(ALEXNET_PREDICTOR)


def calibrated_alexnet() -> tuple[BranchyModel, LatencyPredictor]:
    """Same model with the slower calibrated ground truth as predictor."""
    return load_model(ALEXNET_MODEL), predictor_from_ground_truth(calibrated_ground_truth())


def hand() -> tuple[BranchyModel, LatencyPredictor]:
    return load_model(HAND_MODEL), load_predictor(HAND_PREDICTOR)


def bus_trace() -> BandwidthTrace:
    return rescale_trace(load_trace(BUS_TRACE, format="belgium"), *BUS_RESCALE_KBPS)


def oboe_states() -> list[float]:
    return extract_states(load_state_traces(OBOE_DIR))
