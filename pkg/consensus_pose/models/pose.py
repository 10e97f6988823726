import enum
import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np


class KeypointKind(enum.Enum):
    ANNOTATED = "annotated"
    MIDPOINT = "midpoint"
    HAND = "hand"


@dataclass(frozen=True)
class Keypoint:
    id: int
    name: str
    kind: KeypointKind = KeypointKind.ANNOTATED
    parents: Tuple[int, ...] = ()
    stage: int = 3

    @property
    def synthetic(self) -> bool:
        return self.kind != KeypointKind.ANNOTATED

    def coefficients(self) -> Tuple[float, float]:
        """
        Weights (a, b) with location = a * parents[0] + b * parents[1]. A hand's
        parents are (elbow, wrist): hand = wrist + 0.3 * (wrist - elbow).
        """
        if self.kind == KeypointKind.MIDPOINT:
            return 0.5, 0.5
        if self.kind == KeypointKind.HAND:
            return -0.3, 1.3
        raise ValueError(f"{self.name} is not a synthetic keypoint")

    def info(self):
        return {
            "id": self.id,
            "name": self.name,
            "kind": self.kind.value,
            "parents": list(self.parents),
            "stage": self.stage,
        }


@dataclass(frozen=True)
class SkeletonEdge:
    """
    Edge (i, j) between annotated keypoints. `folded` lists the synthetic
    keypoints whose constraints are folded into this edge; an empty tuple means
    a direct consensus edge.
    """

    i: int
    j: int
    folded: Tuple[int, ...] = ()

    @property
    def pair(self) -> Tuple[int, int]:
        return self.i, self.j


@dataclass
class Skeleton:
    keypoints: List[Keypoint]
    edges: List[SkeletonEdge]

    def __post_init__(self):
        self._by_name = {kp.name: kp for kp in self.keypoints}
        self._by_id = {kp.id: kp for kp in self.keypoints}

    def __getitem__(self, key) -> Keypoint:
        if isinstance(key, str):
            return self._by_name[key]
        return self._by_id[key]

    def __contains__(self, key) -> bool:
        return key in self._by_name or key in self._by_id

    @property
    def annotated(self) -> List[Keypoint]:
        return [kp for kp in self.keypoints if kp.kind == KeypointKind.ANNOTATED]

    @property
    def synthetic(self) -> List[Keypoint]:
        return [kp for kp in self.keypoints if kp.synthetic]

    def ids(self, names) -> List[int]:
        return [self[name].id for name in names]

    def stage_members(self, stage: int) -> List[int]:
        return [kp.id for kp in self.annotated if kp.stage == stage]

    @property
    def num_stages(self) -> int:
        return max(kp.stage for kp in self.annotated)

    def links(self) -> List[Tuple[int, int]]:
        """Every keypoint pair that needs a joint table: direct edges plus fold links."""
        out = []
        for edge in self.edges:
            if not edge.folded:
                out.append(edge.pair)
            for sid in edge.folded:
                for link in fold_links(self[sid], edge):
                    out.append(link)
        return list(dict.fromkeys(out))

    def info(self):
        return {
            "keypoints": [kp.info() for kp in self.keypoints],
            "edges": [{"i": e.i, "j": e.j, "folded": list(e.folded)} for e in self.edges],
        }


def fold_links(synthetic: Keypoint, edge: SkeletonEdge) -> List[Tuple[int, int]]:
    """Pairs whose binary terms are folded into `edge` through `synthetic`."""
    if synthetic.kind == KeypointKind.MIDPOINT:
        return [(edge.i, synthetic.id), (synthetic.id, edge.j)]
    # hand: only the wrist (second parent) links to it
    return [(edge.j, synthetic.id)]


@dataclass
class PersonHint:
    """Person position (row, col) in image pixels and approximate height in pixels."""

    center: Tuple[float, float]
    scale: float = math.inf


@dataclass
class Annotation:
    """
    Ground truth for one person. points is (16, 2) (row, col) pixels with NaN for
    unlabeled keypoints, indexed by annotated keypoint id.
    """

    person_id: str
    points: np.ndarray
    visible: np.ndarray
    head: Optional[np.ndarray] = None
    scale: Optional[float] = None
    position: Optional[Tuple[float, float]] = None

    def labeled(self) -> np.ndarray:
        return ~np.isnan(self.points).any(axis=1)

    def head_length(self) -> Optional[float]:
        if self.head is None or np.isnan(self.head).any():
            return None
        length = float(np.linalg.norm(self.head[1] - self.head[0]))
        return length if length > 0 else None

    def hint(self) -> Optional[PersonHint]:
        if self.position is None:
            return None
        return PersonHint(center=tuple(self.position), scale=self.scale or math.inf)


@dataclass
class PoseEstimate:
    """
    keypoints maps keypoint id -> (row, col, confidence) in image pixels.
    """

    keypoints: Dict[int, Tuple[float, float, float]]
    person_id: str = ""
    metadata: Dict = field(default_factory=dict)

    def points(self, ids: List[int]) -> np.ndarray:
        out = np.full((len(ids), 2), np.nan)
        for n, kid in enumerate(ids):
            if kid in self.keypoints:
                out[n] = self.keypoints[kid][:2]
        return out

    def info(self, skeleton: Optional[Skeleton] = None):
        keypoints = {}
        for kid, (row, col, confidence) in sorted(self.keypoints.items()):
            key = skeleton[kid].name if skeleton is not None else str(kid)
            keypoints[key] = {"row": row, "col": col, "confidence": confidence}
        return {"person_id": self.person_id, "keypoints": keypoints, "metadata": self.metadata}
