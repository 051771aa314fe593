"""VPT visual-tactile dataset: self-supervised build, augmentation, labels, persistence.

On-disk layout (``format_version: 1``)::

    manifest.json        counts, objects, seed, build parameters
    records.jsonl        one record's metadata per line
    patches/<id>.pgm     100x100 gripper-frame patch (P5)
    tactile/<id>.csv     5x5 tactile imprint
"""

from __future__ import annotations

import enum
import hashlib
import json
import math
import warnings
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Union

import numpy as np

from . import pgm
from .scene import (BACKGROUND, DEFAULT_ORACLE, GRASP_ANGLES, GraspConfiguration, ObjectSpec,
                    OracleConfig, Pose, Scene, SCENE_HEIGHT, SCENE_WIDTH, ground_truth_outcome,
                    place_objects_random, render_scene)
from .shake import simulate_shake
from .tactile import StabilityCategory, categorize, format_tactile, grasp_score, parse_tactile

PATCH_SIZE = 100
FORMAT_VERSION = 1
NEAR_FRACTION = 0.6
NEAR_SIGMA = 14.0


class DatasetError(ValueError):
    """Inconsistent or corrupt dataset on disk."""


# -- gripper-frame patches ----------------------------------------------------

_OFFSETS = np.arange(PATCH_SIZE, dtype=float) - PATCH_SIZE // 2
_GX, _GY = np.meshgrid(_OFFSETS, _OFFSETS)  # patch column -> x, patch row -> y


def _sample_index(u: float, v: float, a: float, width: int, height: int):
    t = math.radians(a)
    c, s = math.cos(t), math.sin(t)
    su = np.floor(u + _GX * c - _GY * s + 0.5).astype(np.int64)
    sv = np.floor(v + _GX * s + _GY * c + 0.5).astype(np.int64)
    inside = (su >= 0) & (su < width) & (sv >= 0) & (sv < height)
    return su, sv, inside


def extract_patch(scene_or_image, config: GraspConfiguration) -> np.ndarray:
    """100x100 nearest-neighbour crop in the gripper frame.

    The closing direction is horizontal in the patch; samples falling outside
    the scene read as background.
    """
    img = scene_or_image.image if isinstance(scene_or_image, Scene) else np.asarray(scene_or_image)
    h, w = img.shape
    su, sv, inside = _sample_index(config.u, config.v, config.a, w, h)
    out = np.full((PATCH_SIZE, PATCH_SIZE), BACKGROUND, dtype=np.uint8)
    out[inside] = img[sv[inside], su[inside]]
    return out


def rotate180(patch: np.ndarray) -> np.ndarray:
    return np.ascontiguousarray(np.rot90(patch, 2))


# -- records ------------------------------------------------------------------

@dataclass(eq=False)
class VPTRecord:
    record_id: str
    object_id: str
    config: GraspConfiguration
    patch: np.ndarray
    score: float
    category: StabilityCategory
    scenario: dict
    augmented: bool = False
    tactile: Optional[np.ndarray] = None
    pose: Optional[Pose] = None
    source_id: Optional[str] = None

    def __post_init__(self):
        self.category = StabilityCategory(self.category)
        if self.patch.shape != (PATCH_SIZE, PATCH_SIZE):
            raise DatasetError(f"{self.record_id}: patch must be 100x100")
        if not 0.0 <= self.score <= 1.0:
            raise DatasetError(f"{self.record_id}: score {self.score} outside [0, 1]")
        if categorize(self.score) is not self.category:
            raise DatasetError(f"{self.record_id}: category does not match score")

    def meta(self) -> dict:
        return {
            "id": self.record_id,
            "object": self.object_id,
            "u": self.config.u, "v": self.config.v, "a": self.config.a,
            "score": self.score,
            "category": self.category.value,
            "scenario": self.scenario,
            "augmented": self.augmented,
            "source": self.source_id,
            "pose": None if self.pose is None else
            {"u": self.pose.u, "v": self.pose.v, "theta": self.pose.theta},
        }

    def __eq__(self, other):
        if not isinstance(other, VPTRecord):
            return NotImplemented
        same_tactile = (self.tactile is None and other.tactile is None) or (
            self.tactile is not None and other.tactile is not None
            and np.array_equal(self.tactile, other.tactile))
        return (self.meta() == other.meta() and np.array_equal(self.patch, other.patch)
                and same_tactile)


def augment_rotate180(record: VPTRecord, record_id: Optional[str] = None) -> VPTRecord:
    if record.augmented:
        raise ValueError(f"{record.record_id} is already augmented")
    return replace(record, record_id=record_id or record.record_id + "r",
                   patch=rotate180(record.patch), augmented=True,
                   source_id=record.record_id)


class LabelScheme(str, enum.Enum):
    GRE = "gre"
    SCG = "scg"
    VISION = "vision"

    @property
    def threshold(self) -> float:
        return {"gre": 0.0, "scg": 0.85, "vision": 0.5}[self.value]

    def label(self, score: float) -> int:
        return int(score > self.threshold)


@dataclass
class Dataset:
    records: List[VPTRecord]
    manifest: dict

    def __len__(self):
        return len(self.records)

    def __eq__(self, other):
        if not isinstance(other, Dataset):
            return NotImplemented
        return self.manifest == other.manifest and len(self) == len(other) and all(
            a == b for a, b in zip(self.records, other.records))

    def object_ids(self) -> List[str]:
        return [o["id"] for o in self.manifest["objects"]]


@dataclass
class LabeledView:
    patches: np.ndarray          # (N, 100, 100) uint8
    labels: np.ndarray           # (N,) int
    object_ids: List[str]
    record_ids: List[str]
    scheme: Optional[LabelScheme] = None

    def __len__(self):
        return len(self.labels)

    def subset(self, idx) -> "LabeledView":
        idx = np.asarray(idx, dtype=np.int64)
        return LabeledView(self.patches[idx], self.labels[idx],
                           [self.object_ids[i] for i in idx],
                           [self.record_ids[i] for i in idx], self.scheme)

    def digest(self) -> str:
        h = hashlib.sha256()
        h.update(np.ascontiguousarray(self.patches).tobytes())
        h.update(self.labels.astype(np.int8).tobytes())
        return h.hexdigest()


def project_labels(dataset: Union[Dataset, Sequence[VPTRecord]], scheme: LabelScheme) -> LabeledView:
    scheme = LabelScheme(scheme)
    records = dataset.records if isinstance(dataset, Dataset) else list(dataset)
    patches = (np.stack([r.patch for r in records]) if records
               else np.zeros((0, PATCH_SIZE, PATCH_SIZE), np.uint8))
    labels = np.array([scheme.label(r.score) for r in records], dtype=np.int64)
    return LabeledView(patches, labels, [r.object_id for r in records],
                       [r.record_id for r in records], scheme)


# -- build --------------------------------------------------------------------

def sample_grasp(rng: np.random.Generator, pose: Pose, near: bool,
                 width: int = SCENE_WIDTH, height: int = SCENE_HEIGHT) -> GraspConfiguration:
    a = GRASP_ANGLES[int(rng.integers(len(GRASP_ANGLES)))]
    if near:
        du, dv = rng.normal(0.0, NEAR_SIGMA, size=2)
        u = int(np.clip(round(pose.u + du), 0, width - 1))
        v = int(np.clip(round(pose.v + dv), 0, height - 1))
    else:
        u = int(rng.integers(width))
        v = int(rng.integers(height))
    return GraspConfiguration(u, v, a)


def run_grasp(spec: ObjectSpec, seed_words: Sequence[int], oracle: OracleConfig = DEFAULT_ORACLE,
              near_fraction: float = NEAR_FRACTION):
    """One self-supervised grasp trial: place, grasp, shake, score."""
    rng = np.random.default_rng(np.random.SeedSequence(list(seed_words)))
    place_seed, shake_seed = (int(x) for x in rng.integers(0, 2**63, size=2))
    poses = place_objects_random([spec], place_seed)
    scene = render_scene([spec], poses)
    near = bool(rng.random() < near_fraction)
    config = sample_grasp(rng, poses[0], near)
    scenario = ground_truth_outcome(scene, config, oracle, seed=shake_seed)
    tactile = simulate_shake(scenario)
    return scene, config, scenario, tactile


def build_vpt(objects: Sequence[ObjectSpec], per_object: int = 300, seed: int = 7, *,
              oracle: OracleConfig = DEFAULT_ORACLE, augment: bool = True,
              near_fraction: float = NEAR_FRACTION) -> Dataset:
    if not objects:
        raise ValueError("need at least one object")
    if per_object < 1:
        raise ValueError("per_object must be >= 1")
    records: List[VPTRecord] = []
    step = 2 if augment else 1
    for oi, spec in enumerate(objects):
        for gi in range(per_object):
            scene, config, scenario, tactile = run_grasp(spec, (int(seed), oi, gi), oracle, near_fraction)
            score = grasp_score(tactile)
            idx = (oi * per_object + gi) * step
            rec = VPTRecord(f"r{idx:05d}", spec.id, config, extract_patch(scene, config), score,
                            categorize(score), scenario.summary(), False, tactile, scene.poses[0])
            records.append(rec)
            if augment:
                records.append(augment_rotate180(rec, f"r{idx + 1:05d}"))
    present = {r.category for r in records}
    missing = [c.value for c in StabilityCategory if c not in present]
    manifest_warnings = [f"category absent: {c}" for c in missing]
    for w in manifest_warnings:
        warnings.warn(w)
    manifest = {
        "format_version": FORMAT_VERSION,
        "objects": [_spec_dict(o) for o in objects],
        "per_object": {o.id: per_object for o in objects},
        "augmented": augment,
        "total": len(records),
        "seed": int(seed),
        "params": {
            "near_fraction": near_fraction,
            "near_sigma": NEAR_SIGMA,
            "oracle": {
                "gripper_width": oracle.gripper_width,
                "fall_distance": oracle.fall_distance,
                "base_pressure": oracle.base_pressure,
                "noise_std": oracle.noise_std,
                "contact_mask": list(oracle.contact_mask),
            },
        },
        "warnings": manifest_warnings,
    }
    return Dataset(records, manifest)


def _spec_dict(o: ObjectSpec) -> dict:
    return {"id": o.id, "name": o.name, "shape": o.shape, "ext1": o.ext1, "ext2": o.ext2,
            "mass": o.mass, "friction": o.friction, "albedo": o.albedo, "slip_prone": o.slip_prone}


def objects_from_manifest(manifest: dict) -> List[ObjectSpec]:
    return [ObjectSpec(**d) for d in manifest["objects"]]


# -- persistence --------------------------------------------------------------

def _dumps(obj) -> str:
    return json.dumps(obj, sort_keys=True, ensure_ascii=False, allow_nan=False)


def save_dataset(dataset: Dataset, directory: Union[str, Path]) -> Path:
    root = Path(directory)
    (root / "patches").mkdir(parents=True, exist_ok=True)
    (root / "tactile").mkdir(parents=True, exist_ok=True)
    with open(root / "records.jsonl", "w", encoding="utf-8", newline="\n") as fh:
        for rec in dataset.records:
            fh.write(_dumps(rec.meta()) + "\n")
            pgm.write_pgm(root / "patches" / f"{rec.record_id}.pgm", rec.patch)
            if rec.tactile is not None:
                (root / "tactile" / f"{rec.record_id}.csv").write_text(
                    format_tactile(rec.tactile), encoding="utf-8", newline="\n")
    (root / "manifest.json").write_text(json.dumps(dataset.manifest, sort_keys=True, indent=2) + "\n",
                                        encoding="utf-8", newline="\n")
    return root


def load_dataset(directory: Union[str, Path]) -> Dataset:
    root = Path(directory)
    mpath = root / "manifest.json"
    if not mpath.is_file():
        raise DatasetError(f"{mpath}: manifest missing")
    try:
        manifest = json.loads(mpath.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise DatasetError(f"{mpath}: {exc}") from None
    if manifest.get("format_version") != FORMAT_VERSION:
        raise DatasetError(f"{mpath}: unsupported format_version {manifest.get('format_version')!r}")
    lines = (root / "records.jsonl").read_text(encoding="utf-8").splitlines()
    records = []
    for n, line in enumerate(lines):
        try:
            meta = json.loads(line)
        except json.JSONDecodeError as exc:
            raise DatasetError(f"records.jsonl line {n + 1}: {exc}") from None
        records.append(_load_record(root, meta))
    total = manifest.get("total")
    if not isinstance(total, int) or total < 0:
        raise DatasetError(f"{mpath}: invalid total {total!r}")
    if len(records) < total:
        ids = [r.record_id for r in records]
        sequential = ids == [f"r{i:05d}" for i in range(len(ids))]
        missing = f"r{len(ids):05d}" if sequential else f"#{len(ids) + 1}"
        raise DatasetError(f"record {missing}: declared by manifest (total {total}) but absent "
                           f"from records.jsonl ({len(records)} present)")
    if len(records) > total:
        raise DatasetError(f"record {records[total].record_id}: present in records.jsonl but beyond "
                           f"the manifest total {total}")
    factor = 2 if manifest.get("augmented") else 1
    expected = sum(manifest["per_object"].values()) * factor
    if total != expected:
        raise DatasetError(f"manifest total {total} != per-object counts x {factor} = {expected}")
    counts: Dict[str, int] = {}
    for r in records:
        counts[r.object_id] = counts.get(r.object_id, 0) + 1
    for oid, k in manifest["per_object"].items():
        if counts.get(oid, 0) != k * factor:
            raise DatasetError(f"object {oid}: {counts.get(oid, 0)} records, manifest says {k * factor}")
    return Dataset(records, manifest)


def _load_record(root: Path, meta: dict) -> VPTRecord:
    rid = meta.get("id", "<unknown>")
    ppath = root / "patches" / f"{rid}.pgm"
    if not ppath.is_file():
        raise DatasetError(f"record {rid}: missing patch file {ppath}")
    try:
        patch = pgm.read_pgm(ppath)
    except pgm.PGMError as exc:
        raise DatasetError(f"record {rid}: corrupt patch file {ppath}: {exc}") from None
    if patch.shape != (PATCH_SIZE, PATCH_SIZE):
        raise DatasetError(f"record {rid}: patch file {ppath} is {patch.shape}, expected 100x100")
    tpath = root / "tactile" / f"{rid}.csv"
    tactile = None
    if tpath.is_file():
        try:
            tactile = parse_tactile(tpath.read_text(encoding="utf-8"))
        except ValueError as exc:
            raise DatasetError(f"record {rid}: corrupt tactile file {tpath}: {exc}") from None
    pose = meta.get("pose")
    try:
        return VPTRecord(
            rid, meta["object"], GraspConfiguration(meta["u"], meta["v"], meta["a"]), patch,
            meta["score"], meta["category"], meta["scenario"], meta["augmented"], tactile,
            None if pose is None else Pose(meta["object"], pose["u"], pose["v"], pose["theta"]),
            meta.get("source"))
    except (KeyError, ValueError) as exc:
        raise DatasetError(f"record {rid}: invalid metadata: {exc}") from None
