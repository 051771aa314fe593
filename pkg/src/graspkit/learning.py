"""Binary patch classifiers and their cross-entropy trainer.

The reference model is logistic regression on a 10x10 grid of block means,
trained by plain mini-batch gradient descent from zero weights.
"""

from __future__ import annotations

import json
import time
import warnings
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import List, Optional, Protocol, Union

import numpy as np

from .dataset import LabelScheme, LabeledView, PATCH_SIZE

N_BLOCKS = 10
N_FEATURES = N_BLOCKS * N_BLOCKS
P_CLAMP = 1e-7
MODEL_KIND = "block-logistic"


class PatchClassifier(Protocol):
    kind: str

    def predict(self, patch: np.ndarray) -> float: ...

    def predict_many(self, patches: np.ndarray) -> np.ndarray: ...

    def to_dict(self) -> dict: ...


def pool_features(patches: np.ndarray) -> np.ndarray:
    """Row-major 10x10 block means scaled to [0, 1].

    Accepts one patch (100, 100) or a stack (N, 100, 100).
    """
    arr = np.asarray(patches)
    single = arr.ndim == 2
    if single:
        arr = arr[None]
    if arr.ndim != 3 or arr.shape[1:] != (PATCH_SIZE, PATCH_SIZE):
        raise ValueError(f"expected 100x100 patches, got shape {np.shape(patches)}")
    b = PATCH_SIZE // N_BLOCKS
    feats = arr.astype(np.float64).reshape(len(arr), N_BLOCKS, b, N_BLOCKS, b).mean(axis=(2, 4)) / 255.0
    feats = feats.reshape(len(arr), N_FEATURES)
    return feats[0] if single else feats


def sigmoid(z):
    return np.where(z >= 0, 1.0 / (1.0 + np.exp(-np.abs(z))), np.exp(-np.abs(z)) / (1.0 + np.exp(-np.abs(z))))


@dataclass
class ReferenceModel:
    """101 weights: 100 block features followed by the bias."""

    weights: np.ndarray = field(default_factory=lambda: np.zeros(N_FEATURES + 1))
    preset: Optional[str] = None
    training: dict = field(default_factory=dict)
    kind: str = MODEL_KIND

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=np.float64)
        if self.weights.shape != (N_FEATURES + 1,):
            raise ValueError(f"reference model needs {N_FEATURES + 1} weights")
        if not np.all(np.isfinite(self.weights)):
            raise ValueError("model weights must be finite")

    def logits(self, feats: np.ndarray) -> np.ndarray:
        return feats @ self.weights[:-1] + self.weights[-1]

    def predict_features(self, feats: np.ndarray) -> np.ndarray:
        return sigmoid(self.logits(feats))

    def predict(self, patch: np.ndarray) -> float:
        return float(self.predict_features(pool_features(patch)))

    def predict_many(self, patches: np.ndarray) -> np.ndarray:
        return self.predict_features(pool_features(patches))

    def to_dict(self) -> dict:
        return {"kind": self.kind, "preset": self.preset,
                "weights": [float(w) for w in self.weights], "training": self.training}

    @classmethod
    def from_dict(cls, d: dict) -> "ReferenceModel":
        if d.get("kind") != MODEL_KIND:
            raise ValueError(f"unsupported model kind {d.get('kind')!r}")
        return cls(np.array(d["weights"], dtype=np.float64), d.get("preset"), d.get("training", {}))


def is_positive(p) -> np.ndarray:
    return np.asarray(p) >= 0.5


def save_model(model: ReferenceModel, path: Union[str, Path]) -> None:
    Path(path).write_text(json.dumps(model.to_dict(), sort_keys=True, indent=1) + "\n", encoding="utf-8")


def load_model(path: Union[str, Path]) -> ReferenceModel:
    return ReferenceModel.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


# -- objective ------------------------------------------------------------------

def _clamped(p):
    return np.clip(p, P_CLAMP, 1.0 - P_CLAMP)


def loss_from_features(weights: np.ndarray, feats: np.ndarray, labels: np.ndarray) -> float:
    p = _clamped(sigmoid(feats @ weights[:-1] + weights[-1]))
    s = np.asarray(labels, dtype=np.float64)
    return float(-np.sum(s * np.log(p) + (1.0 - s) * np.log(1.0 - p)))


def grad_from_features(weights: np.ndarray, feats: np.ndarray, labels: np.ndarray) -> np.ndarray:
    """Gradient of the summed loss; zero where the clamp is active."""
    p = sigmoid(feats @ weights[:-1] + weights[-1])
    r = p - np.asarray(labels, dtype=np.float64)
    r = np.where((p < P_CLAMP) | (p > 1.0 - P_CLAMP), 0.0, r)
    return np.concatenate([feats.T @ r, [r.sum()]])


def loss(model: ReferenceModel, patches: np.ndarray, labels) -> float:
    return loss_from_features(model.weights, pool_features(np.asarray(patches).reshape(-1, PATCH_SIZE, PATCH_SIZE)),
                              np.asarray(labels).reshape(-1))


def gradient_check(model: ReferenceModel, patches: np.ndarray, labels, h: float = 1e-5) -> float:
    """Max relative error between analytic and central-difference gradients.

    Components where both gradients are below 1e-8 are compared absolutely.
    """
    feats = pool_features(np.asarray(patches).reshape(-1, PATCH_SIZE, PATCH_SIZE))
    labels = np.asarray(labels).reshape(-1)
    w = model.weights.copy()
    analytic = grad_from_features(w, feats, labels)
    numeric = np.empty_like(w)
    for j in range(len(w)):
        wp, wm = w.copy(), w.copy()
        wp[j] += h
        wm[j] -= h
        numeric[j] = (loss_from_features(wp, feats, labels) - loss_from_features(wm, feats, labels)) / (2 * h)
    scale = np.maximum(np.abs(analytic), np.abs(numeric))
    diff = np.abs(analytic - numeric)
    err = np.where(scale < 1e-8, diff, diff / np.where(scale < 1e-8, 1.0, scale))
    return float(err.max())


# -- training -----------------------------------------------------------------

@dataclass(frozen=True)
class TrainConfig:
    batch_size: int
    epochs: int = 165
    lr: float = 0.01
    seed: int = 0
    preset: Optional[str] = None

    def __post_init__(self):
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if not self.lr >= 0:
            raise ValueError("lr must be >= 0")


PRESETS = {
    LabelScheme.GRE: TrainConfig(batch_size=20, epochs=165, lr=0.01, preset="gre"),
    LabelScheme.SCG: TrainConfig(batch_size=25, epochs=165, lr=0.01, preset="scg"),
    LabelScheme.VISION: TrainConfig(batch_size=25, epochs=165, lr=0.01, preset="vision"),
}


def preset_config(scheme, **overrides) -> TrainConfig:
    base = PRESETS[LabelScheme(scheme)]
    fields = asdict(base)
    fields.update({k: v for k, v in overrides.items() if v is not None})
    return TrainConfig(**fields)


@dataclass
class TrainReport:
    epoch_losses: List[float]
    train_accuracy: float
    heldout_accuracy: Optional[float]
    wall_time_s: float


def train(view: LabeledView, config: TrainConfig,
          heldout: Optional[LabeledView] = None) -> "tuple[ReferenceModel, TrainReport]":
    """Mini-batch gradient descent on the summed cross-entropy.

    Each step uses ``w -= lr * grad(batch) / len(batch)``; batch order comes
    from a per-epoch shuffle of a generator seeded by ``config.seed``.
    """
    n = len(view)
    if n == 0:
        raise ValueError("cannot train on an empty view")
    if len(np.unique(view.labels)) < 2:
        warnings.warn("training view contains a single label")
    t0 = time.perf_counter()
    feats = pool_features(view.patches)
    labels = view.labels.astype(np.float64)
    w = np.zeros(N_FEATURES + 1)
    rng = np.random.default_rng(np.random.SeedSequence(int(config.seed)))
    epoch_losses = []
    for _ in range(config.epochs):
        order = rng.permutation(n)
        total = 0.0
        for start in range(0, n, config.batch_size):
            idx = order[start:start + config.batch_size]
            total += loss_from_features(w, feats[idx], labels[idx])
            w = w - config.lr * grad_from_features(w, feats[idx], labels[idx]) / len(idx)
        epoch_losses.append(total / n)
    model = ReferenceModel(w, config.preset, {"config": asdict(config), "dataset_sha256": view.digest(),
                                              "records": n})
    report = TrainReport(epoch_losses, evaluate(model, view)["accuracy"],
                         None if heldout is None or len(heldout) == 0 else evaluate(model, heldout)["accuracy"],
                         time.perf_counter() - t0)
    return model, report


def evaluate(model, view: LabeledView) -> dict:
    if len(view) == 0:
        raise ValueError("cannot evaluate on an empty view")
    pred = is_positive(model.predict_many(view.patches)).astype(np.int64)
    truth = view.labels
    tp = int(np.sum((pred == 1) & (truth == 1)))
    tn = int(np.sum((pred == 0) & (truth == 0)))
    fp = int(np.sum((pred == 1) & (truth == 0)))
    fn = int(np.sum((pred == 0) & (truth == 1)))
    return {"accuracy": (tp + tn) / len(truth), "tp": tp, "tn": tn, "fp": fp, "fn": fn, "n": len(truth)}
