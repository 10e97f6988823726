"""
Synthetic voter fields planted from known poses: every voter cell emits the
exact log-polar class of the displacement to each keypoint of the person it
belongs to, optionally corrupted by background and label noise.
"""
import math
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .exceptions import ShapeError
from .geometry import bin_classes
from .models import Annotation, LogPolarGrid, VoterField, VoterFieldFile
from .skeleton import ANNOTATED_NAMES, NUM_ANNOTATED, augment_keypoints, default_skeleton

DEFAULT_IMAGE_SIZE = (504, 504)


@dataclass
class SyntheticNoise:
    """
    label: probability that a voter replaces its exact class with a uniformly
    random non-background class. background: probability that it votes
    background instead. distractors: further (30, 2) poses sharing the image.
    """

    label: float = 0.0
    background: float = 0.0
    distractors: List[np.ndarray] = field(default_factory=list)

    def __post_init__(self):
        for name in ("label", "background"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise ShapeError(f"{name} noise must lie in [0, 1], got {value}")


def _owners(persons: List[np.ndarray], shape: Tuple[int, int], stride: int) -> np.ndarray:
    """Index of the person whose nearest keypoint is closest to each voter cell centre."""
    rows, cols = np.indices(shape, dtype=np.float64)
    centres = np.stack([(rows + 0.5) * stride, (cols + 0.5) * stride], axis=-1)
    distances = []
    for pose in persons:
        present = pose[~np.isnan(pose).any(axis=1)]
        if len(present) == 0:
            distances.append(np.full(shape, np.inf))
            continue
        d = np.linalg.norm(centres[:, :, None, :] - present[None, None, :, :], axis=-1)
        distances.append(d.min(axis=2))
    return np.argmin(np.stack(distances), axis=0)


def _check_pose(pose: np.ndarray, image_size: Tuple[int, int]):
    present = pose[~np.isnan(pose).any(axis=1)]
    if np.any(present < 0) or np.any(present[:, 0] >= image_size[0]) or np.any(present[:, 1] >= image_size[1]):
        raise ShapeError(f"pose leaves the {image_size[0]}x{image_size[1]} image")


def gen_synthetic(
    pose: np.ndarray,
    noise: Optional[SyntheticNoise] = None,
    grid: Optional[LogPolarGrid] = None,
    seed: int = 0,
    image_size: Tuple[int, int] = DEFAULT_IMAGE_SIZE,
    stride: int = 4,
    keypoints: Optional[Sequence[int]] = None,
) -> VoterFieldFile:
    """
    One-hot voter fields for the keypoints of `pose` ((30, 2) pixel rows and
    columns, NaN for missing). Without noise each cell votes exactly
    bin_of(keypoint cell - voter cell) for the person it belongs to.
    """
    noise = noise or SyntheticNoise()
    grid = grid or LogPolarGrid()
    persons = [np.asarray(pose, dtype=np.float64)] + [np.asarray(p, dtype=np.float64) for p in noise.distractors]
    for person in persons:
        _check_pose(person, image_size)
    keypoints = list(range(len(persons[0]))) if keypoints is None else list(keypoints)

    shape = (-(-image_size[0] // stride), -(-image_size[1] // stride))
    owner = _owners(persons, shape, stride)
    rows, cols = np.indices(shape)
    rng = np.random.default_rng(seed)
    background = grid.background_class

    fields = []
    for kid in keypoints:
        target = np.stack([person[kid] for person in persons])
        missing = np.isnan(target).any(axis=1)
        cells = np.floor(np.where(missing[:, None], 0.0, target) / stride).astype(np.int64)
        own = cells[owner]
        classes = bin_classes(own[..., 0] - rows, own[..., 1] - cols, grid)
        classes = np.where(missing[owner], background, classes)

        draw_background = rng.random(shape) < noise.background
        draw_label = rng.random(shape) < noise.label
        random_class = rng.integers(0, background, size=shape)
        classes = np.where(draw_label, random_class, classes)
        classes = np.where(draw_background, background, classes)

        values = np.zeros(shape + (grid.num_classes,), dtype=np.float32)
        values[rows, cols, classes] = 1.0
        fields.append(VoterField(keypoint_id=kid, values=values, stride=stride, grid=grid, image_size=tuple(image_size)))
    return VoterFieldFile(image_size=tuple(image_size), stride=stride, grid=grid, fields=fields)


def _rotate(vector: np.ndarray, angle: float) -> np.ndarray:
    """Rotate a (row, col) vector counter-clockwise on screen."""
    c, s = math.cos(angle), math.sin(angle)
    row, col = vector
    return np.array([c * row - s * col, s * row + c * col])


def _limb(rng, length: Tuple[float, float], base_angle: float, spread: float) -> np.ndarray:
    """(row, col) offset of the given length range pointing base_angle +- spread (0 = straight down)."""
    angle = base_angle + rng.uniform(-spread, spread)
    return rng.uniform(*length) * np.array([math.cos(angle), math.sin(angle)])


def random_pose(rng=None, image_size: Tuple[int, int] = DEFAULT_IMAGE_SIZE, margin: float = 24.0) -> np.ndarray:
    """
    Plausible upright person as (16, 2) pixel (row, col). Neighboring joints
    stay close enough that every skeleton link (direct edge or half limb) is
    within the consensus reach of one voter.
    """
    rng = rng if rng is not None else np.random.default_rng()
    names = {name: n for n, name in enumerate(ANNOTATED_NAMES)}
    points = np.zeros((NUM_ANNOTATED, 2))

    def put(name, at):
        points[names[name]] = at

    pelvis = np.zeros(2)
    put("pelvis", pelvis)
    thorax = pelvis + _limb(rng, (50.0, 66.0), math.pi, 0.15)
    put("thorax", thorax)
    neck = thorax + _limb(rng, (14.0, 22.0), math.pi, 0.2)
    put("upper_neck", neck)
    put("head_top", neck + _limb(rng, (28.0, 38.0), math.pi, 0.25))

    for side, sign in (("r", -1.0), ("l", 1.0)):
        shoulder = thorax + np.array([rng.uniform(2.0, 8.0), sign * rng.uniform(18.0, 26.0)])
        put(f"{side}_shoulder", shoulder)
        elbow = shoulder + _limb(rng, (42.0, 56.0), sign * 0.4, 0.7)
        put(f"{side}_elbow", elbow)
        put(f"{side}_wrist", elbow + _limb(rng, (38.0, 50.0), sign * 0.3, 1.0))

        hip = pelvis + np.array([rng.uniform(-4.0, 4.0), sign * rng.uniform(14.0, 20.0)])
        put(f"{side}_hip", hip)
        knee = hip + _limb(rng, (52.0, 66.0), sign * 0.1, 0.3)
        put(f"{side}_knee", knee)
        put(f"{side}_ankle", knee + _limb(rng, (52.0, 66.0), 0.0, 0.3))

    tilt = rng.uniform(-0.25, 0.25)
    points = np.stack([_rotate(p, tilt) for p in points])

    low = points.min(axis=0)
    high = points.max(axis=0)
    span = np.asarray(image_size, dtype=np.float64) - 2 * margin - (high - low)
    if np.any(span < 0):
        raise ShapeError(f"image {image_size} too small for a synthetic person")
    offset = margin - low + rng.uniform(0.0, 1.0, size=2) * span
    return points + offset


def full_pose(points: np.ndarray) -> np.ndarray:
    """(16, 2) annotated points extended to all 30 keypoints."""
    pose, _ = augment_keypoints(points, skeleton=default_skeleton())
    return pose


def annotation_for(points: np.ndarray, person_id: str = "synthetic") -> Annotation:
    """Ground truth for a planted pose; scale is the person height in pixels."""
    points = np.asarray(points, dtype=np.float64)[:NUM_ANNOTATED]
    names = {name: n for n, name in enumerate(ANNOTATED_NAMES)}
    head = np.stack([points[names["head_top"]], points[names["upper_neck"]]])
    labeled = points[~np.isnan(points).any(axis=1)]
    height = float(labeled[:, 0].max() - labeled[:, 0].min()) if len(labeled) else None
    pose = full_pose(points)
    centre = pose[default_skeleton()["mid_body"].id]
    return Annotation(
        person_id=person_id,
        points=points.copy(),
        visible=~np.isnan(points).any(axis=1),
        head=head,
        scale=height,
        position=(float(centre[0]), float(centre[1])),
    )
