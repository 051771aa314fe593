"""Two-phase grasp planning: region estimation, then stable configuration selection.

Phase one slides a 100x100 window over the scene and picks one window at
random among those the region model calls positive.  Phase two expands that
window into 54 gripper-frame proposals (3x3 centers x 6 angles) and keeps the
most confident positive.  The vision baseline reuses phase two with a model
trained on the looser label.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import List, Optional, Sequence

import numpy as np

from .dataset import PATCH_SIZE, extract_patch
from .learning import is_positive
from .scene import GRASP_ANGLES, GraspConfiguration, Scene

WINDOW = PATCH_SIZE
STRIDE = (80, 78)
CENTER_OFFSETS = (25, 50, 75)


class PlanningError(RuntimeError):
    exit_code = 1


class NoGraspableRegion(PlanningError):
    exit_code = 2


class NoStableConfiguration(PlanningError):
    exit_code = 3


@dataclass(frozen=True)
class CandidateWindow:
    x: int
    y: int
    size: int = WINDOW

    def crop(self, image: np.ndarray) -> np.ndarray:
        return image[self.y:self.y + self.size, self.x:self.x + self.size]


@dataclass
class ConfigurationProposal:
    config: GraspConfiguration
    patch: np.ndarray
    probability: Optional[float] = None


def _origins(extent: int, stride: int) -> List[int]:
    last = extent - WINDOW
    out = list(range(0, last + 1, stride))
    if out[-1] != last:
        out.append(last)
    return out


def candidate_windows(scene_or_shape) -> List[CandidateWindow]:
    """Sliding windows with stride (80, 78); the last row/column is clamped to the edge."""
    if isinstance(scene_or_shape, Scene):
        height, width = scene_or_shape.image.shape
    elif isinstance(scene_or_shape, np.ndarray):
        height, width = scene_or_shape.shape[:2]
    else:
        width, height = scene_or_shape
    if width < WINDOW or height < WINDOW:
        raise ValueError(f"scene {width}x{height} is smaller than the 100x100 window")
    return [CandidateWindow(x, y) for y in _origins(height, STRIDE[1]) for x in _origins(width, STRIDE[0])]


def _image(scene) -> np.ndarray:
    return scene.image if isinstance(scene, Scene) else np.asarray(scene)


def select_region(gre_model, scene, windows: Sequence[CandidateWindow], seed: int) -> CandidateWindow:
    if not windows:
        raise ValueError("no candidate windows")
    img = _image(scene)
    probs = gre_model.predict_many(np.stack([w.crop(img) for w in windows]))
    positives = [w for w, p in zip(windows, probs) if p >= 0.5]
    if not positives:
        raise NoGraspableRegion("no window classified as graspable")
    rng = np.random.default_rng(np.random.SeedSequence(int(seed)))
    return positives[int(rng.integers(len(positives)))]


def expand_configurations(scene, window: CandidateWindow) -> List[ConfigurationProposal]:
    img = _image(scene)
    out = []
    for dy in CENTER_OFFSETS:
        for dx in CENTER_OFFSETS:
            for a in GRASP_ANGLES:
                cfg = GraspConfiguration(window.x + dx, window.y + dy, a)
                out.append(ConfigurationProposal(cfg, extract_patch(img, cfg)))
    return out


def score_proposals(model, proposals: Sequence[ConfigurationProposal]) -> None:
    probs = model.predict_many(np.stack([p.patch for p in proposals]))
    for prop, p in zip(proposals, probs):
        prop.probability = float(p)


def select_configuration(model, proposals: Sequence[ConfigurationProposal]) -> ConfigurationProposal:
    """Most probable positive proposal; ties go to the smallest (v, u, a).

    ``model`` may be None when the proposals are already scored.
    """
    if model is not None:
        score_proposals(model, proposals)
    positives = [p for p in proposals if p.probability is not None and is_positive(p.probability)]
    if not positives:
        raise NoStableConfiguration("no proposal classified as stable")
    return min(positives, key=lambda p: (-p.probability, p.config.v, p.config.u, p.config.a))


def plan(scene, region_model, config_model, seed: int) -> ConfigurationProposal:
    window = select_region(region_model, scene, candidate_windows(_image(scene)), seed)
    return select_configuration(config_model, expand_configurations(scene, window))


def plan_bayesian(scene, gre_model, scg_model, seed: int) -> GraspConfiguration:
    return plan(scene, gre_model, scg_model, seed).config


def plan_vision(scene, gre_model, vision_model, seed: int) -> GraspConfiguration:
    return plan(scene, gre_model, vision_model, seed).config
