"""Regenerate the bundled synthetic fixtures under src/coinfer/data/.

    python3 scripts/make_fixtures.py

Everything is seeded; re-running produces byte-identical files.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

from coinfer.bandwidth import synthesize_bus_log, synthesize_state_traces, write_state_trace
from coinfer.latency_model import (
    default_ground_truth,
    fit,
    generate_synthetic_profiles,
    write_predictor,
    write_profiles,
)

DATA = Path(__file__).resolve().parents[1] / "src" / "coinfer" / "data"

FLOAT32 = 4


def conv(ifm, size, stride, filters, out_elems):
    return ("Convolutional", {"input_feature_maps": ifm, "filter_compute": (size / stride) ** 2 * filters}, out_elems)


def relu(n):
    return ("Relu", {"input_size": n}, n)


def pool(n_in, n_out):
    return ("Pooling", {"input_size": n_in, "output_size": n_out}, n_out)


def lrn(n):
    return ("LocalResponseNormalization", {"input_size": n}, n)


def drop(n):
    return ("Dropout", {"input_size": n}, n)


def fc(n_in, n_out):
    return ("FullyConnected", {"input_size": n_in, "output_size": n_out}, n_out)


# AlexNet-style trunk on a 224x224x3 input.
TRUNK = [
    conv(3, 11, 4, 96, 96 * 55 * 55),
    relu(96 * 55 * 55),
    pool(96 * 55 * 55, 96 * 27 * 27),
    lrn(96 * 27 * 27),
    conv(96, 5, 1, 256, 256 * 27 * 27),
    relu(256 * 27 * 27),
    pool(256 * 27 * 27, 256 * 13 * 13),
    lrn(256 * 13 * 13),
    conv(256, 3, 1, 384, 384 * 13 * 13),
    relu(384 * 13 * 13),
    conv(384, 3, 1, 384, 384 * 13 * 13),
    relu(384 * 13 * 13),
    conv(384, 3, 1, 256, 256 * 13 * 13),
    relu(256 * 13 * 13),
    pool(256 * 13 * 13, 256 * 6 * 6),
]

CLASSES = 10

BRANCHES = [
    # (accuracy, layers) shortest first: 12, 16, 19, 20, 22 layers
    (0.45, TRUNK[:8] + [
        conv(256, 3, 1, 384, 384 * 13 * 13),
        relu(384 * 13 * 13),
        conv(384, 3, 1, 384, 384 * 13 * 13),
        fc(384 * 13 * 13, CLASSES),
    ]),
    (0.58, TRUNK[:12] + [
        conv(384, 3, 1, 256, 256 * 13 * 13),
        pool(256 * 13 * 13, 256 * 6 * 6),
        fc(256 * 6 * 6, 1024),
        fc(1024, CLASSES),
    ]),
    (0.66, TRUNK[:14] + [
        pool(256 * 13 * 13, 256 * 6 * 6),
        fc(256 * 6 * 6, 2048),
        relu(2048),
        drop(2048),
        fc(2048, CLASSES),
    ]),
    (0.72, TRUNK[:15] + [
        fc(256 * 6 * 6, 4096),
        relu(4096),
        drop(4096),
        fc(4096, 2048),
        fc(2048, CLASSES),
    ]),
    (0.78, TRUNK + [
        fc(256 * 6 * 6, 4096),
        relu(4096),
        drop(4096),
        fc(4096, 4096),
        relu(4096),
        drop(4096),
        fc(4096, CLASSES),
    ]),
]


def alexnet_model() -> dict:
    branches = []
    for idx, (acc, layers) in enumerate(BRANCHES, start=1):
        branches.append({
            "exit_index": idx,
            "accuracy": acc,
            "layers": [
                {"id": j, "kind": kind, "features": {k: float(v) for k, v in feats.items()},
                 "output_bytes": int(out * FLOAT32)}
                for j, (kind, feats, out) in enumerate(layers, start=1)
            ],
        })
    return {"name": "branchy_alexnet_synthetic", "input_bytes": 224 * 224 * 3, "branches": branches}


def hand_model() -> dict:
    # one branch, two layers; the predictor below is intercept-only, so the
    # per-layer costs are edge [1, 2] ms and device [10, 20] ms
    return {
        "name": "hand_fixture",
        "input_bytes": 12500,
        "branches": [{
            "exit_index": 1,
            "accuracy": 0.8,
            "layers": [
                {"id": 1, "kind": "Relu", "features": {"input_size": 3125.0}, "output_bytes": 1250},
                {"id": 2, "kind": "Dropout", "features": {"input_size": 3125.0}, "output_bytes": 40},
            ],
        }],
    }


def hand_predictor() -> dict:
    cost = {("Relu", "Edge"): 1.0, ("Relu", "Device"): 10.0, ("Dropout", "Edge"): 2.0, ("Dropout", "Device"): 20.0}
    return {
        "models": [
            {"kind": k, "side": s, "intercept": ms, "weights": {"input_size": 0.0}}
            for (k, s), ms in cost.items()
        ],
        "skipped": [],
    }


def main() -> None:
    DATA.mkdir(parents=True, exist_ok=True)
    (DATA / "hand_model.json").write_text(json.dumps(hand_model(), indent=2) + "\n")
    (DATA / "hand_predictor.json").write_text(json.dumps(hand_predictor(), indent=2) + "\n")
    (DATA / "branchy_alexnet.json").write_text(json.dumps(alexnet_model(), indent=2) + "\n")

    profiles = generate_synthetic_profiles(default_ground_truth(), n=40, noise_sd=0.01, seed=7)
    write_profiles(profiles, DATA / "profiles.csv")
    write_predictor(fit(profiles), DATA / "predictor.json")

    with (DATA / "bus.csv").open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["timestamp_ms", "bytes", "interval_ms"])
        w.writerows(synthesize_bus_log())

    oboe = DATA / "oboe"
    oboe.mkdir(exist_ok=True)
    for old in oboe.glob("*.csv"):
        old.unlink()
    for trace in synthesize_state_traces():
        write_state_trace(trace, oboe / f"{trace.source}.csv")


if __name__ == "__main__":
    main()
