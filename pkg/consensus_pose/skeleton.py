"""
The 30-keypoint body model: 16 annotated joints (MPII order), 12 limb
midpoints and 2 extrapolated hands, the edge tree used for inference and the
three inference stages.
"""
from typing import Dict, Iterable, List, Optional, Sequence

import numpy as np

from .exceptions import ConfigError
from .models import Keypoint, KeypointKind, Skeleton, SkeletonEdge

ANNOTATED_NAMES = [
    "r_ankle",
    "r_knee",
    "r_hip",
    "l_hip",
    "l_knee",
    "l_ankle",
    "pelvis",
    "thorax",
    "upper_neck",
    "head_top",
    "r_wrist",
    "r_elbow",
    "r_shoulder",
    "l_shoulder",
    "l_elbow",
    "l_wrist",
]
NUM_ANNOTATED = len(ANNOTATED_NAMES)

MIDPOINTS = [
    ("r_shin", "r_ankle", "r_knee"),
    ("r_thigh", "r_knee", "r_hip"),
    ("l_thigh", "l_hip", "l_knee"),
    ("l_shin", "l_knee", "l_ankle"),
    ("r_forearm", "r_wrist", "r_elbow"),
    ("r_upper_arm", "r_elbow", "r_shoulder"),
    ("l_upper_arm", "l_shoulder", "l_elbow"),
    ("l_forearm", "l_elbow", "l_wrist"),
    ("mid_body", "thorax", "pelvis"),
    ("mid_head", "head_top", "upper_neck"),
    ("r_mid_torso", "r_shoulder", "r_hip"),
    ("l_mid_torso", "l_shoulder", "l_hip"),
]

HANDS = [
    ("r_hand", "r_elbow", "r_wrist"),
    ("l_hand", "l_elbow", "l_wrist"),
]

DEFAULT_STAGES = [
    ["head_top", "upper_neck", "thorax", "pelvis"],
    ["r_shoulder", "l_shoulder", "r_hip", "l_hip"],
    ["r_elbow", "l_elbow", "r_wrist", "l_wrist", "r_knee", "l_knee", "r_ankle", "l_ankle"],
]

DEFAULT_EDGES = [
    "head_top-upper_neck@mid_head",
    "upper_neck-thorax",
    "thorax-pelvis@mid_body",
    "thorax-r_shoulder",
    "thorax-l_shoulder",
    "pelvis-r_hip",
    "pelvis-l_hip",
    "r_shoulder-r_elbow@r_upper_arm",
    "l_shoulder-l_elbow@l_upper_arm",
    "r_elbow-r_wrist@r_forearm+r_hand",
    "l_elbow-l_wrist@l_forearm+l_hand",
    "r_hip-r_knee@r_thigh",
    "l_hip-l_knee@l_thigh",
    "r_knee-r_ankle@r_shin",
    "l_knee-l_ankle@l_shin",
]


def parse_edges(specs: Iterable[str], names: Dict[str, int], key: str = "edges") -> List[SkeletonEdge]:
    """Parse "i-j" or "i-j@s1+s2" edge specs into SkeletonEdges."""
    edges = []
    for spec in specs:
        spec = spec.strip()
        if not spec:
            continue
        pair, _, folded = spec.partition("@")
        ends = pair.split("-")
        if len(ends) != 2:
            raise ConfigError(key, f"malformed edge {spec!r}")
        lookup = [name.strip() for name in ends] + [name.strip() for name in folded.split("+") if name.strip()]
        for name in lookup:
            if name not in names:
                raise ConfigError(key, f"unknown keypoint {name!r} in edge {spec!r}")
        edges.append(
            SkeletonEdge(
                i=names[lookup[0]],
                j=names[lookup[1]],
                folded=tuple(names[name] for name in lookup[2:]),
            )
        )
    return edges


def build_skeleton(
    stages: Optional[Sequence[Sequence[str]]] = None, edges: Optional[Sequence[str]] = None
) -> Skeleton:
    stages = DEFAULT_STAGES if stages is None else stages
    edges = DEFAULT_EDGES if edges is None else edges

    names = {name: n for n, name in enumerate(ANNOTATED_NAMES)}
    for offset, (name, _, _) in enumerate(MIDPOINTS + HANDS):
        names[name] = NUM_ANNOTATED + offset

    stage_of = {}
    for number, members in enumerate(stages, start=1):
        for name in members:
            if name not in names or names[name] >= NUM_ANNOTATED:
                raise ConfigError(f"stage{number}", f"{name!r} is not an annotated keypoint")
            if name in stage_of:
                raise ConfigError(f"stage{number}", f"{name!r} already belongs to stage {stage_of[name]}")
            stage_of[name] = number
    missing = [name for name in ANNOTATED_NAMES if name not in stage_of]
    if missing:
        raise ConfigError("stages", f"keypoints without a stage: {', '.join(missing)}")

    keypoints = [Keypoint(id=n, name=name, stage=stage_of[name]) for n, name in enumerate(ANNOTATED_NAMES)]
    for kind, table in ((KeypointKind.MIDPOINT, MIDPOINTS), (KeypointKind.HAND, HANDS)):
        for name, first, second in table:
            keypoints.append(
                Keypoint(
                    id=names[name],
                    name=name,
                    kind=kind,
                    parents=(names[first], names[second]),
                    stage=max(stage_of[first], stage_of[second]),
                )
            )

    skeleton = Skeleton(keypoints=keypoints, edges=parse_edges(edges, names))
    _check_edges(skeleton)
    return skeleton


def _check_edges(skeleton: Skeleton):
    for edge in skeleton.edges:
        for end in edge.pair:
            if skeleton[end].synthetic:
                raise ConfigError("edges", f"edge end {skeleton[end].name} must be an annotated keypoint")
        for sid in edge.folded:
            kp = skeleton[sid]
            if not kp.synthetic:
                raise ConfigError("edges", f"{kp.name} is annotated and cannot be folded")
            if set(kp.parents) != set(edge.pair):
                raise ConfigError("edges", f"{kp.name} is not derived from the ends of its edge")
            if kp.kind == KeypointKind.HAND and kp.parents != edge.pair:
                raise ConfigError("edges", f"{kp.name} must fold into its (elbow, wrist) edge in that order")

    parent = {kp.id: kp.id for kp in skeleton.annotated}

    def find(node):
        while parent[node] != node:
            node = parent[node]
        return node

    for edge in skeleton.edges:
        parent[find(edge.i)] = find(edge.j)
    roots = {find(kp.id) for kp in skeleton.annotated}
    if len(roots) != 1:
        raise ConfigError("edges", "edges do not connect every annotated keypoint")


def default_skeleton() -> Skeleton:
    return build_skeleton()


def synthetic_location(keypoint: Keypoint, points: np.ndarray) -> np.ndarray:
    a, b = keypoint.coefficients()
    first, second = keypoint.parents
    return a * points[first] + b * points[second]


def augment_keypoints(points: np.ndarray, visible: Optional[np.ndarray] = None, skeleton: Skeleton = None):
    """
    Extend 16 annotated (row, col) locations to all 30 keypoints. Midpoints sit
    halfway between their parents; a hand extends the elbow-wrist vector by 30%
    past the wrist. A synthetic point is missing (NaN) when a parent is missing,
    and visible only when both parents are.
    """
    skeleton = skeleton or default_skeleton()
    points = np.asarray(points, dtype=np.float64)
    if visible is None:
        visible = ~np.isnan(points).any(axis=1)
    out = np.full((len(skeleton.keypoints), 2), np.nan)
    out_visible = np.zeros(len(skeleton.keypoints), dtype=bool)
    out[:NUM_ANNOTATED] = points[:NUM_ANNOTATED]
    out_visible[:NUM_ANNOTATED] = visible[:NUM_ANNOTATED]
    for kp in skeleton.synthetic:
        # NaN parents propagate through the arithmetic
        out[kp.id] = synthetic_location(kp, out)
        out_visible[kp.id] = bool(all(out_visible[p] for p in kp.parents)) and not np.isnan(out[kp.id]).any()
    return out, out_visible
