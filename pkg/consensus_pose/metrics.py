"""
PCKh and person-centric PCP over matched prediction/annotation pairs.
"""
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .exceptions import ShapeError
from .models import Annotation, PoseEstimate
from .skeleton import ANNOTATED_NAMES, NUM_ANNOTATED

PCKH_GROUPS = {
    "head": ["head_top", "upper_neck"],
    "shoulder": ["r_shoulder", "l_shoulder"],
    "elbow": ["r_elbow", "l_elbow"],
    "wrist": ["r_wrist", "l_wrist"],
    "hip": ["r_hip", "l_hip"],
    "knee": ["r_knee", "l_knee"],
    "ankle": ["r_ankle", "l_ankle"],
}

PCP_LIMBS = {
    "head": ("head_top", "upper_neck"),
    "torso": ("thorax", "pelvis"),
    "r_upper_leg": ("r_hip", "r_knee"),
    "l_upper_leg": ("l_hip", "l_knee"),
    "r_lower_leg": ("r_knee", "r_ankle"),
    "l_lower_leg": ("l_knee", "l_ankle"),
    "r_upper_arm": ("r_shoulder", "r_elbow"),
    "l_upper_arm": ("l_shoulder", "l_elbow"),
    "r_forearm": ("r_elbow", "r_wrist"),
    "l_forearm": ("l_elbow", "l_wrist"),
}

PCP_GROUPS = {
    "head": ["head"],
    "torso": ["torso"],
    "upper_leg": ["r_upper_leg", "l_upper_leg"],
    "lower_leg": ["r_lower_leg", "l_lower_leg"],
    "upper_arm": ["r_upper_arm", "l_upper_arm"],
    "forearm": ["r_forearm", "l_forearm"],
}

SWEEP_ALPHAS = [round(0.05 * n, 2) for n in range(11)]

_INDEX = {name: n for n, name in enumerate(ANNOTATED_NAMES)}


@dataclass
class MetricReport:
    """Per-item and per-group rates; `mean` averages the groups that have samples."""

    metric: str
    rates: Dict[str, float]
    groups: Dict[str, float]
    mean: float
    counts: Dict[str, int] = field(default_factory=dict)
    excluded: int = 0
    samples: int = 0
    alpha: Optional[float] = None

    def info(self):
        out = {f"{self.metric}.mean": self.mean, f"{self.metric}.samples": self.samples}
        out[f"{self.metric}.excluded"] = self.excluded
        if self.alpha is not None:
            out[f"{self.metric}.alpha"] = self.alpha
        for name, rate in self.groups.items():
            out[f"{self.metric}.group.{name}"] = rate
        for name, rate in self.rates.items():
            out[f"{self.metric}.{name}"] = rate
        return out


def _pairs(predictions: Sequence, annotations: Sequence[Annotation]):
    if len(predictions) != len(annotations):
        raise ShapeError(f"{len(predictions)} predictions for {len(annotations)} annotations")
    for prediction, annotation in zip(predictions, annotations):
        if isinstance(prediction, PoseEstimate):
            points = prediction.points(list(range(NUM_ANNOTATED)))
        else:
            points = np.asarray(prediction, dtype=np.float64)[:NUM_ANNOTATED]
        yield points, annotation


def _rate(correct: int, total: int) -> float:
    return correct / total if total else float("nan")


def _group_rates(correct: Dict[str, int], total: Dict[str, int], groups: Dict[str, List[str]]):
    out = {}
    for group, members in groups.items():
        n = sum(total[m] for m in members)
        if n:
            out[group] = sum(correct[m] for m in members) / n
    return out


def _mean(groups: Dict[str, float]) -> float:
    return float(np.mean(list(groups.values()))) if groups else float("nan")


def pckh(predictions: Sequence, annotations: Sequence[Annotation], alpha: float = 0.5) -> MetricReport:
    """
    A keypoint is correct when its error is at most alpha times the head
    segment length. Samples without a head segment are excluded and counted;
    unlabeled ground-truth keypoints are skipped and missing predictions count
    as wrong.
    """
    correct = {name: 0 for name in ANNOTATED_NAMES}
    total = {name: 0 for name in ANNOTATED_NAMES}
    excluded = samples = 0
    for points, annotation in _pairs(predictions, annotations):
        head = annotation.head_length()
        if head is None:
            excluded += 1
            continue
        samples += 1
        labeled = annotation.labeled()
        errors = np.linalg.norm(points - annotation.points[:NUM_ANNOTATED], axis=1)
        for n, name in enumerate(ANNOTATED_NAMES):
            if not labeled[n]:
                continue
            total[name] += 1
            if not np.isnan(errors[n]) and errors[n] <= alpha * head:
                correct[name] += 1

    rates = {name: _rate(correct[name], total[name]) for name in ANNOTATED_NAMES if total[name]}
    groups = _group_rates(correct, total, PCKH_GROUPS)
    return MetricReport(
        metric="pckh",
        rates=rates,
        groups=groups,
        mean=_mean(groups),
        counts=dict(total),
        excluded=excluded,
        samples=samples,
        alpha=alpha,
    )


def pcp(predictions: Sequence, annotations: Sequence[Annotation], threshold: float = 0.5) -> MetricReport:
    """
    A limb is correct when both endpoint errors are at most `threshold` times
    its ground-truth length. Limbs with an unlabeled endpoint are skipped;
    zero-length limbs are excluded and counted.
    """
    correct = {limb: 0 for limb in PCP_LIMBS}
    total = {limb: 0 for limb in PCP_LIMBS}
    excluded = samples = 0
    for points, annotation in _pairs(predictions, annotations):
        samples += 1
        labeled = annotation.labeled()
        for limb, (first, second) in PCP_LIMBS.items():
            a, b = _INDEX[first], _INDEX[second]
            if not (labeled[a] and labeled[b]):
                continue
            length = float(np.linalg.norm(annotation.points[a] - annotation.points[b]))
            if length <= 0:
                excluded += 1
                continue
            total[limb] += 1
            err_a = float(np.linalg.norm(points[a] - annotation.points[a]))
            err_b = float(np.linalg.norm(points[b] - annotation.points[b]))
            if err_a <= threshold * length and err_b <= threshold * length:
                correct[limb] += 1

    rates = {limb: _rate(correct[limb], total[limb]) for limb in PCP_LIMBS if total[limb]}
    groups = _group_rates(correct, total, PCP_GROUPS)
    return MetricReport(
        metric="pcp",
        rates=rates,
        groups=groups,
        mean=_mean(groups),
        counts=dict(total),
        excluded=excluded,
        samples=samples,
    )


def pckh_sweep(
    predictions: Sequence, annotations: Sequence[Annotation], alphas: Sequence[float] = SWEEP_ALPHAS
) -> List[Tuple[float, float]]:
    return [(alpha, pckh(predictions, annotations, alpha).mean) for alpha in alphas]


def format_table(report: MetricReport) -> str:
    title = report.metric.upper() if report.alpha is None else f"{report.metric.upper()}@{report.alpha:g}"
    lines = [f"{title:<14}{'rate':>8}"]
    for name, rate in report.groups.items():
        lines.append(f"{name:<14}{100.0 * rate:>7.1f}%")
    lines.append(f"{'mean':<14}{100.0 * report.mean:>7.1f}%")
    lines.append(f"samples={report.samples} excluded={report.excluded}")
    return "\n".join(lines)


def format_key_values(*reports: MetricReport) -> str:
    lines = []
    for report in reports:
        for key, value in report.info().items():
            lines.append(f"{key}={value}")
    return "\n".join(lines) + "\n"


def format_sweep(sweep: Sequence[Tuple[float, float]]) -> str:
    return "alpha,rate\n" + "".join(f"{alpha:.2f},{rate:.6f}\n" for alpha, rate in sweep)
