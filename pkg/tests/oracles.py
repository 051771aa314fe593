"""Independent reference implementations used only by the tests.

Nothing here imports the package's numeric code paths; each oracle is written
from the definitions with plain loops, shapely geometry or scipy.
"""

import math

import numpy as np
from shapely import affinity
from shapely.geometry import LineString, Point, Polygon

EPS = 1.0


# -- metric --------------------------------------------------------------------

def time_diff(img):
    return [[img[t + 1][p] - img[t][p] for p in range(5)] for t in range(4)]


def space_diff(img):
    return [[(img[t][p] - img[t][p + 1]) - (img[t + 1][p] - img[t + 1][p + 1]) for p in range(4)]
            for t in range(4)]


def slip_x(img):
    return sum(abs(v) for row in space_diff(img) for v in row)


def score(img):
    """The three-branch score written out with loops."""
    if all(v < EPS for v in img[0]):
        return 0.0
    if any(all(v < EPS for v in img[t]) for t in range(1, 5)):
        d = time_diff(img)
        peaks = [max(abs(v) for v in row) for row in d]
        i = 1 + peaks.index(max(peaks))
        return 0.5 * i / 5
    return 0.5 * math.exp(-slip_x(img) / 1000) + 0.5


def closed_form(mode, param=0.0):
    if mode == "none":
        return 0.0
    if mode == "fall":
        return 0.1 * param
    return 0.5 * math.exp(-param / 1000.0) + 0.5


def category(s):
    if s == 0:
        return "failure"
    if 0 < s <= 0.5:
        return "falling"
    if 0.5 < s <= 0.85:
        return "slippery"
    return "stable"


# -- geometry ------------------------------------------------------------------

def footprint(spec, pose, resolution=256):
    """Shapely polygon of an object footprint."""
    c = Point(pose.u, pose.v)
    if spec.shape == "disc":
        return c.buffer(spec.ext1, resolution)
    if spec.shape == "rectangle":
        box = Polygon([(-spec.ext1, -spec.ext2), (spec.ext1, -spec.ext2),
                       (spec.ext1, spec.ext2), (-spec.ext1, spec.ext2)])
        shape = box
    else:
        core = spec.ext1 - spec.ext2
        shape = LineString([(-core, 0), (core, 0)]).buffer(spec.ext2, resolution) if core > 0 \
            else Point(0, 0).buffer(spec.ext2, resolution)
    shape = affinity.rotate(shape, pose.theta, origin=(0, 0))
    return affinity.translate(shape, pose.u, pose.v)


def jaw(u, v, a, width=80.0):
    t = math.radians(a)
    dx, dy = math.cos(t) * width / 2, math.sin(t) * width / 2
    return LineString([(u - dx, v - dy), (u + dx, v + dy)])


def disc_raster(width, height, cx, cy, r, albedo, background=200):
    img = [[background] * width for _ in range(height)]
    for y in range(height):
        for x in range(width):
            if (x - cx) ** 2 + (y - cy) ** 2 < r * r:
                img[y][x] = albedo
    return np.array(img, dtype=np.uint8)


def outcome(specs_poses, u, v, a, width=80.0, fall=30.0):
    """(mode, param) of a grasp from shapely geometry and the stated formulas."""
    seg = jaw(u, v, a, width)
    hits = [(math.hypot(p.u - u, p.v - v), s, p) for s, p in specs_poses if seg.intersects(footprint(s, p))]
    if not hits:
        return "none", 0.0
    _, s, p = min(hits, key=lambda h: h[0])
    t = math.radians(a)
    d = abs((p.u - u) * math.cos(t) + (p.v - v) * math.sin(t))
    if d > fall:
        k = int(math.floor(4 * (1 - (d - fall) / fall) + 0.5))
        return "fall", max(1, min(4, k))
    if s.shape == "disc":
        theta = 0.0
    else:
        diff = abs((a - (p.theta + 90.0)) % 180.0)
        theta = min(diff, 180.0 - diff)
    return "slip", s.slip_prone * s.mass * (d / fall + theta / 90.0) / s.friction


def gripper_patch(img, u, v, a, background=200):
    """Per-pixel nearest-neighbour sampling, written as loops."""
    h, w = img.shape
    t = math.radians(a)
    out = np.full((100, 100), background, dtype=np.uint8)
    for i in range(100):
        for j in range(100):
            x, y = j - 50, i - 50
            su = math.floor(u + x * math.cos(t) - y * math.sin(t) + 0.5)
            sv = math.floor(v + x * math.sin(t) + y * math.cos(t) + 0.5)
            if 0 <= su < w and 0 <= sv < h:
                out[i, j] = img[sv, su]
    return out


# -- learning -----------------------------------------------------------------

def block_features(patch):
    f = []
    for bi in range(10):
        for bj in range(10):
            f.append(float(np.asarray(patch[bi * 10:(bi + 1) * 10, bj * 10:(bj + 1) * 10], dtype=float).sum())
                     / 100.0 / 255.0)
    return f


def bce_loss(weights, feats, labels):
    total = 0.0
    for f, s in zip(feats, labels):
        z = sum(w * x for w, x in zip(weights[:-1], f)) + weights[-1]
        p = 1.0 / (1.0 + math.exp(-z))
        p = min(max(p, 1e-7), 1 - 1e-7)
        total += -(s * math.log(p) + (1 - s) * math.log(1 - p))
    return total


def fd_gradient(weights, feats, labels, h=1e-6):
    g = []
    for j in range(len(weights)):
        wp, wm = list(weights), list(weights)
        wp[j] += h
        wm[j] -= h
        g.append((bce_loss(wp, feats, labels) - bce_loss(wm, feats, labels)) / (2 * h))
    return g
