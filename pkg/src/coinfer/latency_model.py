"""Per-layer-kind latency regression.

Each (layer kind, side) pair gets an ordinary-least-squares model with an
intercept over that kind's regression features:

    latency_ms = intercept + sum(weight[f] * features[f])

Predictions are clamped at zero so extrapolation cannot produce negative time.
Profiling is replaced by a synthetic generator with a known linear ground truth.
"""

from __future__ import annotations

import csv
import enum
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import CollinearityError, MissingModelError, ParseError, ValidationError
from .model_graph import FEATURES, LayerKind, LayerSpec, check_features


class Side(str, enum.Enum):
    DEVICE = "Device"
    EDGE = "Edge"

    @classmethod
    def parse(cls, text: str) -> "Side":
        lowered = str(text).strip().lower()
        for side in cls:
            if side.value.lower() == lowered:
                return side
        raise ValidationError(f"unknown side {text!r}")


@dataclass(frozen=True)
class ProfileRecord:
    kind: LayerKind
    side: Side
    features: Mapping[str, float]
    latency_ms: float

    def __post_init__(self):
        object.__setattr__(self, "features", check_features(self.kind, self.features))
        if not (math.isfinite(self.latency_ms) and self.latency_ms > 0):
            raise ValidationError(f"latency_ms must be positive, got {self.latency_ms}")


@dataclass(frozen=True)
class LinearModel:
    intercept: float
    weights: Mapping[str, float]

    def evaluate(self, features: Mapping[str, float]) -> float:
        total = self.intercept
        for name, w in self.weights.items():
            total += w * features[name]
        return total


@dataclass(frozen=True)
class FitStats:
    n_samples: int
    rmse: float


@dataclass(frozen=True)
class LatencyPredictor:
    coefficients: Mapping[tuple[LayerKind, Side], LinearModel]
    fit_stats: Mapping[tuple[LayerKind, Side], FitStats] = field(default_factory=dict)
    # (kind, side) pairs that were present in the profiles but too small to fit
    skipped: tuple[tuple[LayerKind, Side], ...] = ()
    _costs_cache: dict = field(default_factory=dict, init=False, repr=False, compare=False)

    def model_for(self, kind: LayerKind, side: Side) -> LinearModel:
        try:
            return self.coefficients[(kind, side)]
        except KeyError:
            raise MissingModelError(f"no fitted latency model for ({kind.value}, {side.value})") from None

    def predict(self, layer: LayerSpec, side: Side) -> float:
        return predict(self, layer, side)


def predict(p: LatencyPredictor, layer: LayerSpec, side: Side) -> float:
    """Predicted latency of `layer` on `side`, in milliseconds."""
    return max(0.0, p.model_for(layer.kind, side).evaluate(layer.features))


def _design_matrix(records: Sequence[ProfileRecord], names: Sequence[str]) -> np.ndarray:
    X = np.ones((len(records), len(names) + 1))
    for row, rec in enumerate(records):
        for col, name in enumerate(names, start=1):
            X[row, col] = rec.features[name]
    return X


def _ols(X: np.ndarray, y: np.ndarray) -> np.ndarray:
    # Column scaling keeps the solve well conditioned when features are in the
    # hundreds of thousands and the intercept column is 1.
    scale = np.abs(X).max(axis=0)
    scale[scale == 0] = 1.0
    Xs = X / scale
    rank = np.linalg.matrix_rank(Xs)
    if rank < X.shape[1]:
        raise np.linalg.LinAlgError(f"rank {rank} < {X.shape[1]}")
    beta, *_ = np.linalg.lstsq(Xs, y, rcond=None)
    return beta / scale


def fit(records: Iterable[ProfileRecord]) -> LatencyPredictor:
    """Fit one OLS model per (kind, side) pair present in `records`.

    Pairs with fewer than (#features + 2) samples are left out and listed in
    ``LatencyPredictor.skipped``.
    """
    groups: dict[tuple[LayerKind, Side], list[ProfileRecord]] = {}
    for rec in records:
        groups.setdefault((rec.kind, rec.side), []).append(rec)

    coefficients = {}
    stats = {}
    skipped = []
    for key in sorted(groups, key=lambda k: (k[0].value, k[1].value)):
        kind, side = key
        recs = groups[key]
        names = FEATURES[kind]
        if len(recs) < len(names) + 2:
            skipped.append(key)
            continue
        X = _design_matrix(recs, names)
        y = np.array([r.latency_ms for r in recs])
        try:
            beta = _ols(X, y)
        except np.linalg.LinAlgError:
            raise CollinearityError(
                f"collinear features for ({kind.value}, {side.value}); cannot fit"
            ) from None
        resid = y - X @ beta
        coefficients[key] = LinearModel(
            intercept=float(beta[0]),
            weights={name: float(b) for name, b in zip(names, beta[1:])},
        )
        stats[key] = FitStats(n_samples=len(recs), rmse=float(np.sqrt(np.mean(resid**2))))
    return LatencyPredictor(coefficients=coefficients, fit_stats=stats, skipped=tuple(skipped))


# -- ground truth for synthetic profiling -----------------------------------

GroundTruth = Mapping[tuple[LayerKind, Side], LinearModel]

# Uniform sampling ranges for synthetic profiling; they cover the bundled
# AlexNet-style fixture.
FEATURE_RANGES: dict[LayerKind, dict[str, tuple[float, float]]] = {
    LayerKind.CONVOLUTIONAL: {"input_feature_maps": (1.0, 512.0), "filter_compute": (100.0, 8000.0)},
    LayerKind.RELU: {"input_size": (1_000.0, 400_000.0)},
    LayerKind.POOLING: {"input_size": (1_000.0, 400_000.0), "output_size": (100.0, 100_000.0)},
    LayerKind.LOCAL_RESPONSE_NORMALIZATION: {"input_size": (1_000.0, 400_000.0)},
    LayerKind.DROPOUT: {"input_size": (100.0, 10_000.0)},
    LayerKind.FULLY_CONNECTED: {"input_size": (100.0, 70_000.0), "output_size": (10.0, 5_000.0)},
}

# Edge-side coefficients; the device side is the same table scaled by
# DEVICE_SLOWDOWN.
_EDGE_TRUTH: dict[LayerKind, tuple[float, dict[str, float]]] = {
    LayerKind.CONVOLUTIONAL: (0.3, {"input_feature_maps": 0.0012, "filter_compute": 0.00105}),
    LayerKind.RELU: (0.3, {"input_size": 1.0e-6}),
    LayerKind.POOLING: (0.3, {"input_size": 1.2e-6, "output_size": 3.0e-6}),
    LayerKind.LOCAL_RESPONSE_NORMALIZATION: (0.3, {"input_size": 2.0e-6}),
    LayerKind.DROPOUT: (0.3, {"input_size": 5.0e-5}),
    LayerKind.FULLY_CONNECTED: (0.3, {"input_size": 2.0e-5, "output_size": 2.0e-4}),
}

DEVICE_SLOWDOWN = 20.0


def scale_ground_truth(truth: GroundTruth, factor: float, side: Side | None = None) -> dict:
    """Multiply every coefficient (optionally only those of `side`) by `factor`."""
    out = {}
    for (kind, s), m in truth.items():
        f = factor if side is None or s is side else 1.0
        out[(kind, s)] = LinearModel(m.intercept * f, {k: w * f for k, w in m.weights.items()})
    return out


def default_ground_truth() -> dict[tuple[LayerKind, Side], LinearModel]:
    truth = {}
    for kind, (intercept, weights) in _EDGE_TRUTH.items():
        truth[(kind, Side.EDGE)] = LinearModel(intercept, dict(weights))
        truth[(kind, Side.DEVICE)] = LinearModel(
            intercept * DEVICE_SLOWDOWN, {k: w * DEVICE_SLOWDOWN for k, w in weights.items()}
        )
    return truth


def calibrated_ground_truth() -> dict[tuple[LayerKind, Side], LinearModel]:
    """Both sides 4x slower than the default: device-only inference of the
    deepest fixture branch then takes more than two seconds."""
    return scale_ground_truth(default_ground_truth(), 4.0)


def predictor_from_ground_truth(truth: GroundTruth) -> LatencyPredictor:
    return LatencyPredictor(coefficients=dict(truth))


_MIN_LATENCY_MS = 1e-6


def generate_synthetic_profiles(
    ground_truth: GroundTruth | None = None,
    n: int = 100,
    noise_sd: float = 0.0,
    seed: int = 0,
    ranges: Mapping[LayerKind, Mapping[str, tuple[float, float]]] | None = None,
) -> list[ProfileRecord]:
    """Draw `n` profile rows per (kind, side) of `ground_truth` from its linear model.

    Features are uniform over `ranges`; latencies get N(0, noise_sd^2) noise and
    are kept strictly positive.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    if noise_sd < 0:
        raise ValueError("noise_sd must be >= 0")
    table = default_ground_truth() if ground_truth is None else ground_truth
    ranges = FEATURE_RANGES if ranges is None else ranges
    rng = np.random.default_rng(seed)
    records = []
    for kind, side in sorted(table, key=lambda k: (list(LayerKind).index(k[0]), list(Side).index(k[1]))):
        truth = table[(kind, side)]
        names = FEATURES[kind]
        lows = np.array([ranges[kind][f][0] for f in names])
        highs = np.array([ranges[kind][f][1] for f in names])
        feats = rng.uniform(lows, highs, size=(n, len(names)))
        noise = rng.normal(0.0, noise_sd, size=n) if noise_sd > 0 else np.zeros(n)
        for row, eps in zip(feats, noise):
            features = dict(zip(names, (float(v) for v in row)))
            latency = truth.evaluate(features) + float(eps)
            records.append(ProfileRecord(kind, side, features, max(latency, _MIN_LATENCY_MS)))
    return records


# -- file formats -----------------------------------------------------------

PROFILE_HEADER = ("kind", "side", "latency_ms", "features")


def _format_features(features: Mapping[str, float]) -> str:
    return ";".join(f"{k}={v!r}" for k, v in features.items())


def _parse_features(text: str, path, line) -> dict[str, float]:
    features = {}
    for item in filter(None, (s.strip() for s in text.split(";"))):
        name, sep, value = item.partition("=")
        if not sep:
            raise ParseError(f"feature item {item!r} is not name=value", path=path, line=line)
        try:
            features[name.strip()] = float(value)
        except ValueError:
            raise ParseError(f"feature {name!r} has non-numeric value {value!r}", path=path, line=line) from None
    return features


def load_profiles(path: str | Path) -> list[ProfileRecord]:
    """Read a profile CSV: ``kind,side,latency_ms,name=value;name=value``."""
    path = Path(path)
    records = []
    with path.open(newline="") as fh:
        for line, row in enumerate(csv.reader(fh), start=1):
            if not row or all(not c.strip() for c in row):
                continue
            if line == 1 and row[0].strip().lower() == "kind":
                continue
            if len(row) != 4:
                raise ParseError(f"expected 4 columns, got {len(row)}", path=path, line=line)
            try:
                latency = float(row[2])
            except ValueError:
                raise ParseError(f"latency {row[2]!r} is not a number", path=path, line=line) from None
            features = _parse_features(row[3], path, line)
            try:
                records.append(ProfileRecord(LayerKind.parse(row[0]), Side.parse(row[1]), features, latency))
            except ValidationError as exc:
                raise ValidationError(f"{path}:{line}: {exc}") from None
    return records


def write_profiles(records: Iterable[ProfileRecord], path: str | Path) -> None:
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(PROFILE_HEADER)
        for r in records:
            w.writerow([r.kind.value, r.side.value, repr(r.latency_ms), _format_features(r.features)])


def predictor_to_dict(p: LatencyPredictor) -> dict:
    models = []
    for (kind, side), m in sorted(p.coefficients.items(), key=lambda kv: (kv[0][0].value, kv[0][1].value)):
        entry = {"kind": kind.value, "side": side.value, "intercept": m.intercept, "weights": dict(m.weights)}
        st = p.fit_stats.get((kind, side))
        if st is not None:
            entry["n_samples"] = st.n_samples
            entry["rmse"] = st.rmse
        models.append(entry)
    return {
        "models": models,
        "skipped": [{"kind": k.value, "side": s.value} for k, s in p.skipped],
    }


def predictor_from_dict(data: Mapping) -> LatencyPredictor:
    coefficients = {}
    stats = {}
    try:
        for entry in data["models"]:
            kind = LayerKind.parse(entry["kind"])
            side = Side.parse(entry["side"])
            weights = {k: float(v) for k, v in entry["weights"].items()}
            if set(weights) != set(FEATURES[kind]):
                raise ValidationError(f"({kind.value}, {side.value}): weights must cover {list(FEATURES[kind])}")
            coefficients[(kind, side)] = LinearModel(
                float(entry["intercept"]), {name: weights[name] for name in FEATURES[kind]}
            )
            if "n_samples" in entry:
                stats[(kind, side)] = FitStats(int(entry["n_samples"]), float(entry["rmse"]))
        skipped = tuple((LayerKind.parse(s["kind"]), Side.parse(s["side"])) for s in data.get("skipped", []))
    except (KeyError, TypeError, AttributeError) as exc:
        raise ValidationError(f"predictor: bad or missing field {exc}") from None
    return LatencyPredictor(coefficients=coefficients, fit_stats=stats, skipped=skipped)


def load_predictor(path: str | Path) -> LatencyPredictor:
    path = Path(path)
    try:
        data = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ParseError(exc.msg, path=path, line=exc.lineno) from None
    return predictor_from_dict(data)


def write_predictor(p: LatencyPredictor, path: str | Path) -> None:
    Path(path).write_text(json.dumps(predictor_to_dict(p), indent=2) + "\n")


def ground_truth_from_dict(data: Mapping) -> dict[tuple[LayerKind, Side], LinearModel]:
    """Ground-truth tables share the predictor JSON layout."""
    return dict(predictor_from_dict(data).coefficients)
