"""
Pose inference: aggregate votes, build consensus joints, then minimize the pose
energy in stages where every stage anchors on the keypoints already solved.
"""
import math
from typing import Callable, Dict, Iterable, List, Optional, Tuple

import numpy as np

from .config import Config
from .consensus import coarse_project, joint_table
from .exceptions import NoEvidenceError, ShapeError, StageError
from .geometry import build_kernel, coarse_kernel
from .logger import Logger
from .models import EnergyModel, Heatmap, JointTable, PersonHint, PoseEstimate, PriorTable, Skeleton, VoterField
from .mrf import build_binary, build_unary, fold_synthetic, get_solver, grid_cells, prune_labels
from .mrf.energy import link_role
from .models.pose import fold_links
from .prior import uniform_prior
from .skeleton import synthetic_location
from .voting import aggregate, apply_person_mask, pool_heatmap
from .workers import TaskRunner

Pair = Tuple[int, int]
ModelSink = Callable[[int, EnergyModel], None]


def mirror_prior(prior: PriorTable) -> PriorTable:
    """Prior of (j, i) from the prior of (i, j): the displacement changes sign."""
    return PriorTable(
        pair=(prior.pair[1], prior.pair[0]),
        values=prior.values[::-1, ::-1].copy(),
        radius=prior.radius,
        factor=prior.factor,
        sigma=prior.sigma,
        floor=prior.floor,
        samples=prior.samples,
        clamped=prior.clamped,
    )


class _Oriented:
    """Pair-keyed tables that answer for either orientation of a pair."""

    def __init__(self, tables: Dict[Pair, object], flip):
        self.tables = dict(tables)
        self.flip = flip

    def get(self, pair: Pair):
        if pair in self.tables:
            return self.tables[pair]
        reverse = (pair[1], pair[0])
        if reverse in self.tables:
            self.tables[pair] = self.flip(self.tables[reverse])
            return self.tables[pair]
        return None


def _keypoint_name(skeleton: Skeleton, kid: int) -> str:
    return skeleton[kid].name if kid in skeleton else str(kid)


class StageSolver:
    """
    Builds and solves the energy of one stage. Nodes are the annotated
    keypoints of this and earlier stages (ordered by id); earlier ones are
    clamped to a single label. Edges whose ends are both nodes carry either a
    direct binary term or the folded terms of their synthetic keypoints.
    """

    def __init__(
        self,
        coarse_heatmaps: Dict[int, Heatmap],
        joints: Dict[Pair, JointTable],
        priors: Dict[Pair, PriorTable],
        skeleton: Skeleton,
        config: Config,
        logger: Logger = None,
    ):
        self.heatmaps = coarse_heatmaps
        self.joints = _Oriented(joints, JointTable.transpose)
        self.priors = _Oriented(priors, mirror_prior)
        self.skeleton = skeleton
        self.config = config
        self.logger = logger
        first = next(iter(coarse_heatmaps.values()))
        self.grid_shape = first.shape
        self.factor = first.stride
        self.all_cells = grid_cells(self.grid_shape)
        self.solver_class = get_solver(config.SOLVER)

    def _joint(self, pair: Pair) -> JointTable:
        joint = self.joints.get(pair)
        if joint is None:
            raise ShapeError(
                f"no joint table for {_keypoint_name(self.skeleton, pair[0])}-{_keypoint_name(self.skeleton, pair[1])}"
            )
        return joint

    def _prior(self, pair: Pair) -> Optional[PriorTable]:
        if self.config.LAMBDA >= 1.0:
            return None
        prior = self.priors.get(pair)
        if prior is None:
            prior = uniform_prior(pair, self.factor, self.config.PRIOR_RADIUS)
            self.priors.tables[pair] = prior
        return prior

    def _binary(self, pair: Pair, labels_i: np.ndarray, labels_j: np.ndarray) -> np.ndarray:
        return build_binary(
            self._joint(pair), self._prior(pair), self.config.LAMBDA, labels_i, labels_j, self.config.EPSILON
        )

    def _heatmap(self, kid: int) -> Heatmap:
        if kid not in self.heatmaps:
            raise ShapeError(f"no heatmap for keypoint {_keypoint_name(self.skeleton, kid)}")
        return self.heatmaps[kid]

    def label_space(self, kid: int, fixed: Dict[int, Tuple[int, int]]):
        if kid in fixed:
            return np.array([fixed[kid]], dtype=np.int64), np.zeros(1)
        values = self._heatmap(kid).values
        labels = prune_labels(values, self.config.PRUNE_K)
        return labels, build_unary(values, labels, self.config.EPSILON)

    def edge_cost(self, edge, labels_i: np.ndarray, labels_j: np.ndarray) -> np.ndarray:
        if not edge.folded:
            return self._binary(edge.pair, labels_i, labels_j)

        cost = np.zeros((len(labels_i), len(labels_j)))
        for sid in edge.folded:
            synthetic = self.skeleton[sid]
            phi_s = build_unary(self._heatmap(sid).values, self.all_cells, self.config.EPSILON)
            links = []
            for link in fold_links(synthetic, edge):
                role = link_role(link, edge.pair, sid)
                if role == "i":
                    links.append(("i", self._binary(link, labels_i, self.all_cells)))
                elif link[0] == sid:
                    links.append(("j", self._binary(link, self.all_cells, labels_j)))
                else:
                    links.append(("j", self._binary(link, labels_j, self.all_cells).T))
            a, b = synthetic.coefficients()
            cost = cost + fold_synthetic(
                phi_s, links, a, b, labels_i, labels_j, self.grid_shape, self.config.EPSILON
            )
        return cost

    def model(self, stage: int, fixed: Dict[int, Tuple[int, int]]) -> EnergyModel:
        nodes = sorted(kp.id for kp in self.skeleton.annotated if kp.stage <= stage)
        labels, unaries = {}, {}
        for kid in nodes:
            labels[kid], unaries[kid] = self.label_space(kid, fixed)
        binaries = {}
        for edge in self.skeleton.edges:
            if edge.i in labels and edge.j in labels:
                binaries[edge.pair] = self.edge_cost(edge, labels[edge.i], labels[edge.j])
        return EnergyModel(
            nodes=nodes,
            labels=labels,
            unaries=unaries,
            binaries=binaries,
            lam=self.config.LAMBDA,
            eps=self.config.EPSILON,
        )

    def solve(self, stage: int, fixed: Dict[int, Tuple[int, int]]):
        try:
            model = self.model(stage, fixed)
        except NoEvidenceError as e:
            raise StageError(stage, str(e)) from e
        solver = self.solver_class(self.logger, self.config.MAX_ITERS, self.config.TOL)
        labeling = solver.solve(model)
        if self.logger is not None:
            self.logger.info(
                f"stage {stage}: {len(model.nodes)} nodes, {len(model.binaries)} edges, "
                f"energy {labeling.energy:.4f}, gap {labeling.gap:.2e}"
            )
        return model, labeling


def refine(cell: Tuple[int, int], fine: Optional[Heatmap], field_shape, stride: int, factor: int):
    """
    Pixel (row, col) of a solved coarse cell: the centre of the strongest fine
    heatmap cell inside it, or the coarse cell centre without fine evidence.
    """
    row, col = cell
    if fine is not None:
        pool = factor // stride
        top, left = -fine.offset[0], -fine.offset[1]
        r0, c0 = row * pool, col * pool
        r1, c1 = min(r0 + pool, field_shape[0]), min(c0 + pool, field_shape[1])
        block = fine.values[top + r0:top + r1, left + c0:left + c1]
        if block.size and block.max() > 0:
            br, bc = np.unravel_index(int(np.argmax(block)), block.shape)
            return fine.cell_to_pixel(top + r0 + br, left + c0 + bc)
    return (row + 0.5) * factor, (col + 0.5) * factor


def sequential_predict(
    coarse_heatmaps: Dict[int, Heatmap],
    joints: Dict[Pair, JointTable],
    priors: Dict[Pair, PriorTable],
    skeleton: Skeleton,
    config: Config,
    fine_heatmaps: Optional[Dict[int, Heatmap]] = None,
    field_shape: Optional[Tuple[int, int]] = None,
    logger: Logger = None,
    on_model: Optional[ModelSink] = None,
) -> PoseEstimate:
    """
    Solve the stages in order. After a stage, its keypoints are clamped to
    their chosen coarse cells for every later stage. on_model, if given,
    receives every solved stage number with its energy model.
    """
    stages = StageSolver(coarse_heatmaps, joints, priors, skeleton, config, logger)
    fixed: Dict[int, Tuple[int, int]] = {}
    report = []
    for stage in range(1, skeleton.num_stages + 1):
        members = skeleton.stage_members(stage)
        if not members:
            continue
        model, labeling = stages.solve(stage, fixed)
        if on_model is not None:
            on_model(stage, model)
        for kid in members:
            fixed[kid] = labeling.cells[kid]
        report.append(
            {
                "stage": stage,
                "keypoints": [skeleton[kid].name for kid in members],
                "nodes": len(model.nodes),
                "edges": len(model.binaries),
                "energy": labeling.energy,
                "lower_bound": labeling.lower_bound,
                "gap": labeling.gap,
                "converged": labeling.converged,
                "iterations": labeling.iterations,
            }
        )

    factor = stages.factor
    field_shape = field_shape or tuple(s * (factor // config.STRIDE) for s in stages.grid_shape)
    points = np.full((len(skeleton.keypoints), 2), np.nan)
    confidence = {}
    for kp in skeleton.annotated:
        cell = fixed[kp.id]
        fine = fine_heatmaps.get(kp.id) if fine_heatmaps else None
        points[kp.id] = refine(cell, fine, field_shape, config.STRIDE, factor)
        coarse = coarse_heatmaps[kp.id].values
        total = float(coarse.sum())
        confidence[kp.id] = float(coarse[cell]) / total if total > 0 else 0.0

    keypoints = {}
    for kp in skeleton.annotated:
        keypoints[kp.id] = (float(points[kp.id, 0]), float(points[kp.id, 1]), confidence[kp.id])
    for kp in skeleton.synthetic:
        row, col = synthetic_location(kp, points)
        keypoints[kp.id] = (float(row), float(col), min(confidence[p] for p in kp.parents))

    return PoseEstimate(keypoints=keypoints, metadata={"stages": report, "coarse_cells": dict(fixed)})


class PosePredictor:
    """
    Orchestrates predict(): per-keypoint aggregation and coarse projection, per
    link consensus joints (both on the TaskRunner), the person mask and the
    staged solve.
    """

    def __init__(self, config: Config, logger: Logger = None, priors: Dict[Pair, PriorTable] = None):
        self.config = config
        self.logger = logger or Logger("consensus_pose_quiet", log_dir=None, console=False)
        self.priors = dict(priors or {})
        self.skeleton = config.skeleton()
        self.grid = config.grid()
        self.kernel = build_kernel(self.grid, config.KERNEL_SIZE, config.KERNEL_SIZE)
        self.coarse_kernel = coarse_kernel(self.grid, config.STRIDE, config.COARSE_FACTOR, config.KEPT_RINGS)
        self.runner = TaskRunner(self.logger, config.THREADS)
        for pair, prior in self.priors.items():
            if prior.factor != config.COARSE_FACTOR:
                raise ShapeError(f"prior {pair} is at {prior.factor}px, expected {config.COARSE_FACTOR}px")

    @property
    def pool(self) -> int:
        return self.config.COARSE_FACTOR // self.config.STRIDE

    def required_keypoints(self) -> List[int]:
        needed = {kp.id for kp in self.skeleton.annotated}
        for edge in self.skeleton.edges:
            needed.update(edge.folded)
        if self.config.MASK_KEYPOINT:
            needed.add(self.skeleton[self.config.MASK_KEYPOINT].id)
        return sorted(needed)

    def _check(self, fields: Dict[int, VoterField]):
        shapes = {field.shape for field in fields.values()}
        if len(shapes) > 1:
            raise ShapeError(f"voter fields differ in shape: {sorted(shapes)}")
        for field in fields.values():
            if field.stride != self.config.STRIDE:
                raise ShapeError(f"field {field.keypoint_id} has stride {field.stride}, expected {self.config.STRIDE}")
            if field.grid != self.grid:
                raise ShapeError(f"field {field.keypoint_id} was binned with a different log-polar grid")
            field.validate_distributions()
        missing = [self.skeleton[kid].name for kid in self.required_keypoints() if kid not in fields]
        if missing:
            raise ShapeError(f"missing voter fields: {', '.join(missing)}")

    def heatmaps(self, fields: Dict[int, VoterField], hint: Optional[PersonHint] = None):
        """Fine aggregated heatmaps and their coarse-grid pooling, by keypoint id."""
        ids = sorted(fields)
        fine = self.runner.map(
            (f"aggregating keypoint {kid}", aggregate, (fields[kid], self.kernel)) for kid in ids
        )
        fine = dict(zip(ids, fine))
        if hint is not None and self.config.MASK_KEYPOINT:
            mask_id = self.skeleton[self.config.MASK_KEYPOINT].id
            if mask_id in fine:
                fine[mask_id] = self.mask(fine[mask_id], hint)
        first = fields[ids[0]]
        coarse = {kid: pool_heatmap(fine[kid], first.shape, self.pool) for kid in ids}
        return fine, coarse

    def mask(self, heatmap: Heatmap, hint: PersonHint) -> Heatmap:
        center = heatmap.pixel_to_cell(hint.center[0], hint.center[1])
        center = (center[0] - 0.5, center[1] - 0.5)
        scale = hint.scale / heatmap.stride if not math.isinf(hint.scale) else math.inf
        return apply_person_mask(heatmap, center, scale, self.config.MASK_SIGMA_FACTOR)

    def joints(self, fields: Dict[int, VoterField]) -> Dict[Pair, JointTable]:
        links = self.skeleton.links()
        needed = sorted({kid for link in links for kid in link})
        coarse = self.runner.map(
            (
                f"projecting keypoint {kid}",
                coarse_project,
                (fields[kid], self.config.COARSE_FACTOR, self.config.KEPT_RINGS),
            )
            for kid in needed
        )
        coarse = dict(zip(needed, coarse))
        tables = self.runner.map(
            (f"consensus {i}-{j}", joint_table, (coarse[i], coarse[j], self.coarse_kernel)) for i, j in links
        )
        return dict(zip(links, tables))

    def predict(
        self,
        fields: Iterable[VoterField],
        hint: Optional[PersonHint] = None,
        on_model: Optional[ModelSink] = None,
    ) -> PoseEstimate:
        fields = {field.keypoint_id: field for field in fields}
        self._check(fields)
        fine, coarse = self.heatmaps(fields, hint)
        joints = self.joints(fields)
        self.logger.debug(f"built {len(joints)} consensus tables on a {next(iter(coarse.values())).shape} grid")
        first = fields[min(fields)]
        estimate = sequential_predict(
            coarse,
            joints,
            self.priors,
            self.skeleton,
            self.config,
            fine_heatmaps=fine,
            field_shape=first.shape,
            logger=self.logger,
            on_model=on_model,
        )
        estimate.metadata["image_size"] = list(first.image_size)
        return estimate


def predict(
    voter_fields: Iterable[VoterField],
    person_hint: Optional[PersonHint],
    config: Config,
    logger: Logger = None,
    priors: Dict[Pair, PriorTable] = None,
) -> PoseEstimate:
    return PosePredictor(config, logger, priors).predict(voter_fields, person_hint)
