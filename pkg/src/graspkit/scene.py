"""Synthetic tabletop scenes and the ground-truth grasp oracle.

Coordinates: ``u`` is the pixel column, ``v`` the pixel row, angles are in
degrees measured from the +u axis towards +v.  A grasp angle ``a`` is the
direction in which the two jaws close.  The oracle's jaw segment is the
opening stroke: ``gripper_width`` long, centered on the grasp point, along
``a``.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np

from .shake import ContactScenario, DEFAULT_MASK

SCENE_WIDTH = 400
SCENE_HEIGHT = 300
BACKGROUND = 200
GRASP_ANGLES = (0, 30, 60, 90, 120, 150)
SHAPES = ("disc", "rectangle", "capsule")


class PlacementError(ValueError):
    """Overlapping or out-of-bounds object poses."""


class PlacementInfeasible(PlacementError):
    """Rejection sampling could not place the objects."""


@dataclass(frozen=True)
class ObjectSpec:
    """One tabletop object.

    ``ext1``/``ext2`` are pixel half-extents: radius for a disc (``ext2`` is
    ignored), half-length/half-width for a rectangle, and half-length/radius for
    a capsule.  ``ext1`` runs along the object's orientation.
    """

    id: str
    name: str
    shape: str
    ext1: float
    ext2: float
    mass: float
    friction: float
    albedo: int
    slip_prone: float

    def __post_init__(self):
        if self.shape not in SHAPES:
            raise ValueError(f"unknown shape {self.shape!r}")
        ext2 = self.ext1 if self.shape == "disc" else self.ext2
        if min(self.ext1, ext2) < 4:
            raise ValueError(f"{self.id}: half-extents must be >= 4 px")
        if self.shape == "capsule" and self.ext1 < self.ext2:
            raise ValueError(f"{self.id}: capsule half-length must be >= its radius")
        if not self.mass > 0:
            raise ValueError(f"{self.id}: mass must be > 0")
        if not 0 < self.friction <= 1:
            raise ValueError(f"{self.id}: friction must be in (0, 1]")
        if not 0 <= int(self.albedo) <= 255:
            raise ValueError(f"{self.id}: albedo must be 8-bit")
        if not self.slip_prone >= 0:
            raise ValueError(f"{self.id}: slip_prone must be >= 0")

    @property
    def half_width(self) -> float:
        return self.ext1 if self.shape == "disc" else self.ext2

    @property
    def bounding_radius(self) -> float:
        if self.shape == "rectangle":
            return math.hypot(self.ext1, self.ext2)
        return self.ext1

    def half_bbox(self, theta: float) -> Tuple[float, float]:
        """Half-extents of the axis-aligned bounding box at orientation theta."""
        if self.shape == "disc":
            return self.ext1, self.ext1
        c, s = abs(math.cos(math.radians(theta))), abs(math.sin(math.radians(theta)))
        if self.shape == "rectangle":
            return self.ext1 * c + self.ext2 * s, self.ext1 * s + self.ext2 * c
        core = self.ext1 - self.ext2
        return core * c + self.ext2, core * s + self.ext2

    def contains(self, pose: "Pose", u, v) -> np.ndarray:
        """Strict point-in-footprint test for arrays of pixel coordinates."""
        du = np.asarray(u, dtype=float) - pose.u
        dv = np.asarray(v, dtype=float) - pose.v
        if self.shape == "disc":
            return du * du + dv * dv < self.ext1 * self.ext1
        t = math.radians(pose.theta)
        c, s = math.cos(t), math.sin(t)
        x = du * c + dv * s
        y = -du * s + dv * c
        if self.shape == "rectangle":
            return (np.abs(x) < self.ext1) & (np.abs(y) < self.ext2)
        core = self.ext1 - self.ext2
        xc = np.clip(x, -core, core)
        return (x - xc) ** 2 + y * y < self.ext2 * self.ext2

    def preferred_axis(self, theta: float) -> Optional[float]:
        """Closing direction that squeezes the short axis; None for discs."""
        if self.shape == "disc":
            return None
        return (theta + 90.0) % 180.0


@dataclass(frozen=True)
class Pose:
    object_id: str
    u: float
    v: float
    theta: float


@dataclass(frozen=True)
class GraspConfiguration:
    u: float
    v: float
    a: float

    def validate(self, width: int = SCENE_WIDTH, height: int = SCENE_HEIGHT) -> "GraspConfiguration":
        if not (0 <= self.u < width and 0 <= self.v < height):
            raise ValueError(f"grasp ({self.u}, {self.v}) outside the scene")
        if self.a not in GRASP_ANGLES:
            raise ValueError(f"grasp angle {self.a} not in {GRASP_ANGLES}")
        return self


@dataclass(frozen=True)
class Scene:
    image: np.ndarray
    poses: Tuple[Pose, ...]
    objects: Tuple[ObjectSpec, ...] = ()

    @property
    def width(self) -> int:
        return self.image.shape[1]

    @property
    def height(self) -> int:
        return self.image.shape[0]

    def spec(self, object_id: str) -> ObjectSpec:
        for o in self.objects:
            if o.id == object_id:
                return o
        raise KeyError(object_id)


@dataclass(frozen=True)
class OracleConfig:
    gripper_width: float = 80.0
    fall_distance: float = 30.0
    base_pressure: float = 100.0
    noise_std: float = 0.5
    contact_mask: tuple = DEFAULT_MASK


DEFAULT_ORACLE = OracleConfig()


# -- presets ------------------------------------------------------------------
# Masses are those of real household objects; geometry and friction are made up.
# Albedo darkens with mass so that stability has a visual cue.

def _albedo(mass: float) -> int:
    return int(round(min(255.0, max(0.0, 110.0 - 0.3 * mass))))


KNOWN_OBJECTS: Tuple[ObjectSpec, ...] = (
    ObjectSpec("screw", "Screw", "capsule", 34, 11, 292.52, 0.9, _albedo(292.52), 2.0),
    ObjectSpec("yogurt", "Yogurt", "rectangle", 30, 20, 211.72, 0.85, _albedo(211.72), 2.0),
    ObjectSpec("tennis_container", "Tennis container", "capsule", 55, 20, 221.10, 0.85, _albedo(221.10), 2.0),
    ObjectSpec("flashlight", "Flashlight", "capsule", 39, 13, 76.52, 0.5, _albedo(76.52), 2.0),
    ObjectSpec("metal_bar", "Metal bar", "rectangle", 39, 10, 222.62, 0.8, _albedo(222.62), 2.0),
)

NOVEL_OBJECTS: Tuple[ObjectSpec, ...] = (
    ObjectSpec("lays", "Lay's", "rectangle", 45, 28, 128.48, 0.6, _albedo(128.48), 2.0),
    ObjectSpec("realsense_box", "Realsense box", "rectangle", 36, 18, 130.90, 0.7, _albedo(130.90), 2.0),
    ObjectSpec("shaving_foam", "Shaving foam", "capsule", 33, 14, 134.36, 0.6, _albedo(134.36), 2.0),
    ObjectSpec("guangming", "Guangming", "rectangle", 34, 20, 304.29, 0.9, _albedo(304.29), 2.0),
    ObjectSpec("unity_knife", "Unity knife", "capsule", 33, 7, 71.25, 0.5, _albedo(71.25), 2.0),
)

PRESET_FIELDS = ("id", "name", "shape", "ext1", "ext2", "mass", "friction", "albedo", "slip_prone")


def format_presets(objects: Iterable[ObjectSpec]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    for o in objects:
        w.writerow([o.id, o.name, o.shape, repr(float(o.ext1)), repr(float(o.ext2)),
                    repr(float(o.mass)), repr(float(o.friction)), int(o.albedo), repr(float(o.slip_prone))])
    return buf.getvalue()


def parse_presets(text: str) -> List[ObjectSpec]:
    out = []
    for row in csv.reader(io.StringIO(text)):
        if not row or row[0].startswith("#") or row[0] == "id":
            continue
        if len(row) != len(PRESET_FIELDS):
            raise ValueError(f"preset row needs {len(PRESET_FIELDS)} fields: {row}")
        oid, name, shape, e1, e2, mass, fr, alb, sp = row
        out.append(ObjectSpec(oid, name, shape, float(e1), float(e2), float(mass),
                              float(fr), int(alb), float(sp)))
    ids = [o.id for o in out]
    if len(set(ids)) != len(ids):
        raise ValueError("duplicate object ids in preset file")
    return out


def load_presets(path: Union[str, Path]) -> List[ObjectSpec]:
    return parse_presets(Path(path).read_text(encoding="utf-8"))


def save_presets(path: Union[str, Path], objects: Iterable[ObjectSpec]) -> None:
    Path(path).write_text(format_presets(objects), encoding="utf-8")


# -- rendering and placement --------------------------------------------------

def _in_bounds(spec: ObjectSpec, pose: Pose, width: int, height: int, margin: float = 0.0) -> bool:
    hu, hv = spec.half_bbox(pose.theta)
    return (pose.u - hu >= margin and pose.u + hu <= width - 1 - margin
            and pose.v - hv >= margin and pose.v + hv <= height - 1 - margin)


def render_scene(objects: Sequence[ObjectSpec], poses: Sequence[Pose],
                 width: int = SCENE_WIDTH, height: int = SCENE_HEIGHT) -> Scene:
    by_id = {o.id: o for o in objects}
    img = np.full((height, width), BACKGROUND, dtype=np.uint8)
    occupied = np.zeros((height, width), dtype=bool)
    vv, uu = np.mgrid[0:height, 0:width]
    for pose in poses:
        spec = by_id.get(pose.object_id)
        if spec is None:
            raise PlacementError(f"pose refers to unknown object {pose.object_id!r}")
        if not _in_bounds(spec, pose, width, height):
            raise PlacementError(f"{pose.object_id} extends outside the scene")
        mask = spec.contains(pose, uu, vv)
        if np.any(mask & occupied):
            raise PlacementError(f"{pose.object_id} overlaps another object")
        occupied |= mask
        img[mask] = spec.albedo
    img.setflags(write=False)
    used = tuple(by_id[p.object_id] for p in poses)
    return Scene(img, tuple(poses), used)


def place_objects_random(objects: Sequence[ObjectSpec], seed: int, *,
                         width: int = SCENE_WIDTH, height: int = SCENE_HEIGHT,
                         margin: float = 10.0, max_attempts: int = 1000) -> List[Pose]:
    """Seeded rejection sampling of non-overlapping poses."""
    if len(objects) > 5:
        raise ValueError("at most 5 objects per scene")
    rng = np.random.default_rng(np.random.SeedSequence(int(seed)))
    poses: List[Pose] = []
    attempts = 0
    for spec in objects:
        while True:
            attempts += 1
            if attempts > max_attempts:
                raise PlacementInfeasible(f"could not place {len(objects)} objects in {max_attempts} attempts")
            theta = float(rng.uniform(0.0, 180.0))
            hu, hv = spec.half_bbox(theta)
            lo_u, hi_u = margin + hu, width - 1 - margin - hu
            lo_v, hi_v = margin + hv, height - 1 - margin - hv
            if lo_u > hi_u or lo_v > hi_v:
                continue
            u = float(np.floor(rng.uniform(lo_u, hi_u + 1)))
            v = float(np.floor(rng.uniform(lo_v, hi_v + 1)))
            cand = Pose(spec.id, min(u, math.floor(hi_u)), min(v, math.floor(hi_v)), theta)
            if not _in_bounds(spec, cand, width, height, margin):
                continue
            clear = True
            for other in poses:
                ospec = next(o for o in objects if o.id == other.object_id)
                gap = math.hypot(cand.u - other.u, cand.v - other.v)
                if gap <= spec.bounding_radius + ospec.bounding_radius + 1.0:
                    clear = False
                    break
            if clear:
                poses.append(cand)
                break
    return poses


# -- oracle -------------------------------------------------------------------

def _seg_point_dist(p0, p1, q) -> float:
    d = p1 - p0
    L = float(d @ d)
    t = 0.0 if L == 0 else float(np.clip((q - p0) @ d / L, 0.0, 1.0))
    return float(np.linalg.norm(p0 + t * d - q))


def _seg_seg_dist(p0, p1, q0, q1) -> float:
    # segments in 2-D: zero if they cross, otherwise min endpoint-to-segment
    def orient(a, b, c):
        return (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
    o1, o2 = orient(p0, p1, q0), orient(p0, p1, q1)
    o3, o4 = orient(q0, q1, p0), orient(q0, q1, p1)
    if o1 * o2 < 0 and o3 * o4 < 0:
        return 0.0
    return min(_seg_point_dist(p0, p1, q0), _seg_point_dist(p0, p1, q1),
               _seg_point_dist(q0, q1, p0), _seg_point_dist(q0, q1, p1))


def _seg_hits_box(p0, p1, hx, hy) -> bool:
    """Liang-Barsky clip of segment p0->p1 against the open box |x|<hx, |y|<hy."""
    t0, t1 = 0.0, 1.0
    d = p1 - p0
    for pk, qk in ((-d[0], p0[0] + hx), (d[0], hx - p0[0]), (-d[1], p0[1] + hy), (d[1], hy - p0[1])):
        if pk == 0:
            if qk <= 0:
                return False
            continue
        r = qk / pk
        if pk < 0:
            t0 = max(t0, r)
        else:
            t1 = min(t1, r)
        if t0 >= t1:
            return False
    return True


def segment_hits(spec: ObjectSpec, pose: Pose, p0: np.ndarray, p1: np.ndarray) -> bool:
    """Does the segment p0-p1 enter the (open) footprint of the object?"""
    center = np.array([pose.u, pose.v], dtype=float)
    if spec.shape == "disc":
        return _seg_point_dist(p0, p1, center) < spec.ext1
    t = math.radians(pose.theta)
    axis = np.array([math.cos(t), math.sin(t)])
    if spec.shape == "capsule":
        core = spec.ext1 - spec.ext2
        return _seg_seg_dist(p0, p1, center - core * axis, center + core * axis) < spec.ext2
    rot = np.array([axis, [-axis[1], axis[0]]])
    return _seg_hits_box(rot @ (p0 - center), rot @ (p1 - center), spec.ext1, spec.ext2)


def angle_misalignment(a: float, axis: Optional[float]) -> float:
    """Smallest angle between two undirected axes, in [0, 90]."""
    if axis is None:
        return 0.0
    diff = abs(a - axis) % 180.0
    return min(diff, 180.0 - diff)


@dataclass(frozen=True)
class OracleDetail:
    object_id: Optional[str]
    offset: float = 0.0
    misalignment: float = 0.0


def closing_axis(a: float) -> np.ndarray:
    t = math.radians(a)
    return np.array([math.cos(t), math.sin(t)])


def contact_object(scene: Scene, config: GraspConfiguration,
                   oracle: OracleConfig = DEFAULT_ORACLE) -> OracleDetail:
    c = np.array([config.u, config.v], dtype=float)
    axis = closing_axis(config.a)
    half = oracle.gripper_width / 2.0
    p0, p1 = c - half * axis, c + half * axis
    hits = []
    for pose in scene.poses:
        spec = scene.spec(pose.object_id)
        if segment_hits(spec, pose, p0, p1):
            centroid = np.array([pose.u, pose.v])
            hits.append((float(np.linalg.norm(centroid - c)), pose, spec))
    if not hits:
        return OracleDetail(None)
    _, pose, spec = min(hits, key=lambda h: h[0])
    offset = abs(float((np.array([pose.u, pose.v]) - c) @ axis))
    return OracleDetail(spec.id, offset, angle_misalignment(config.a, spec.preferred_axis(pose.theta)))


def fall_index(offset: float, fall_distance: float) -> int:
    raw = 4.0 * (1.0 - (offset - fall_distance) / fall_distance)
    return int(min(4, max(1, math.floor(raw + 0.5))))


def ground_truth_outcome(scene: Scene, config: GraspConfiguration,
                         oracle: OracleConfig = DEFAULT_ORACLE, seed: int = 0) -> ContactScenario:
    """Physical outcome of executing ``config`` in ``scene``."""
    kw = dict(base_pressure=oracle.base_pressure, noise_std=oracle.noise_std,
              contact_mask=oracle.contact_mask, seed=int(seed))
    detail = contact_object(scene, config, oracle)
    if detail.object_id is None:
        return ContactScenario.no_contact(**kw)
    if detail.offset > oracle.fall_distance:
        return ContactScenario.fall_after(fall_index(detail.offset, oracle.fall_distance), **kw)
    spec = scene.spec(detail.object_id)
    m = spec.slip_prone * spec.mass * (detail.offset / oracle.fall_distance
                                       + detail.misalignment / 90.0) / spec.friction
    return ContactScenario.slip(m, **kw)

