import argparse
import json
import math
import os
import sys

import numpy as np

from .config import CFG_FL_NAME, Config
from .consensus import coarse_project, conditional, joint_table
from .exceptions import ConfigError, PoseError
from .geometry import build_kernel, coarse_kernel
from .logger import Logger
from .metrics import format_key_values, format_sweep, format_table, pckh, pckh_sweep, pcp
from .models import PersonHint
from .pipeline import PosePredictor
from .prior import fit_prior
from .selftest import selftest
from .skeleton import default_skeleton, parse_edges
from .storage import (
    dump_model_text,
    heatmap_record,
    joint_record,
    load_annotations,
    load_fields,
    load_poses,
    load_priors,
    save_annotations,
    save_fields,
    save_grids,
    save_heatmaps,
    save_poses,
    save_priors,
)
from .synthetic import SyntheticNoise, annotation_for, full_pose, gen_synthetic, random_pose
from .voting import aggregate, pool_heatmap


def _pair(text: str, key: str, cast=float):
    try:
        first, second = (cast(v) for v in text.split(","))
    except ValueError as e:
        raise ConfigError(key, f"expected two comma-separated numbers, got {text!r}") from e
    return first, second


def _stages(text: str):
    return [[name.strip() for name in stage.split(",") if name.strip()] for stage in text.split(";") if stage.strip()]


def cmd_synth(args, config: Config, logger: Logger):
    rng = np.random.default_rng(args.seed)
    size = tuple(args.image_size)
    if args.pose:
        annotations = load_annotations(args.pose)
        if not annotations:
            raise ConfigError("pose", f"{args.pose} holds no annotation")
        points = annotations[0].points
    else:
        points = random_pose(rng, size)
    distractors = [full_pose(random_pose(rng, size)) for _ in range(args.distractors)]
    noise = SyntheticNoise(label=args.label_noise, background=args.background_noise, distractors=distractors)
    fields = gen_synthetic(full_pose(points), noise, config.grid(), args.seed, size, config.STRIDE)
    save_fields(args.out, fields)
    if args.annotations_out:
        save_annotations(args.annotations_out, [annotation_for(points, person_id=f"synthetic-{args.seed}")])
    logger.info(f"wrote {len(fields.fields)} voter fields for a {size[0]}x{size[1]} image to {args.out}")


def cmd_aggregate(args, config: Config, logger: Logger):
    fields = load_fields(args.fields)
    kernel = build_kernel(fields.grid, config.KERNEL_SIZE, config.KERNEL_SIZE)
    heatmaps = [aggregate(field, kernel) for field in fields.fields]
    if args.coarse:
        pool = config.COARSE_FACTOR // fields.stride
        heatmaps = [pool_heatmap(h, field.shape, pool) for h, field in zip(heatmaps, fields.fields)]
    skeleton = default_skeleton()
    save_heatmaps(args.out, heatmaps, skeleton if all(h.keypoint_id in skeleton for h in heatmaps) else None)
    logger.info(f"wrote {len(heatmaps)} heatmaps to {args.out}")


def cmd_consensus(args, config: Config, logger: Logger):
    fields = load_fields(args.fields).by_id()
    skeleton = default_skeleton()
    names = {kp.name: kp.id for kp in skeleton.keypoints}
    edge = parse_edges([args.edge], names, key="edge")[0]
    for kid in edge.pair:
        if kid not in fields:
            raise ConfigError("edge", f"the field file has no keypoint {skeleton[kid].name}")
    coarse = [coarse_project(fields[kid], config.COARSE_FACTOR, config.KEPT_RINGS) for kid in edge.pair]
    kernel = coarse_kernel(config.grid(), config.STRIDE, config.COARSE_FACTOR, config.KEPT_RINGS)
    joint = joint_table(coarse[0], coarse[1], kernel)
    records = [joint_record(joint)]
    if args.given:
        given = tuple(int(v) for v in _pair(args.given, "given", int))
        records.append(heatmap_record(conditional(joint, given), skeleton[edge.i].name))
    save_grids(args.out, records)
    logger.info(f"wrote the {skeleton[edge.i].name}-{skeleton[edge.j].name} joint table to {args.out}")


def _model_dumper(directory: str, logger: Logger):
    """Writes every stage's energy model to DIRECTORY/stage<n>.txt."""
    os.makedirs(directory, exist_ok=True)

    def dump(stage, model):
        path = os.path.join(directory, f"stage{stage}.txt")
        with open(path, "w", encoding="utf-8") as fh:
            dump_model_text(model, fh)
        logger.info(f"wrote the stage {stage} energy model to {path}")

    return dump


def cmd_infer(args, config: Config, logger: Logger):
    if args.single_stage:
        config.single_stage()
    elif args.stages:
        config.override(stages=_stages(args.stages))
    priors = load_priors(args.priors or config.PRIOR_FILE) if (args.priors or config.PRIOR_FILE) else {}

    hint = None
    if args.person_center:
        scale = args.person_scale if args.person_scale is not None else math.inf
        hint = PersonHint(center=_pair(args.person_center, "person_center"), scale=scale)
    elif args.person_scale is not None:
        raise ConfigError("person_scale", "needs --person-center")

    fields = load_fields(args.fields)
    predictor = PosePredictor(config, logger, priors)
    sink = _model_dumper(args.dump_model, logger) if args.dump_model else None
    estimate = predictor.predict(fields.fields, hint, on_model=sink)
    estimate.person_id = args.person_id
    save_poses(args.out, [estimate], predictor.skeleton)
    logger.info(f"wrote pose to {args.out}")


def cmd_eval(args, config: Config, logger: Logger):
    skeleton = default_skeleton()
    poses = load_poses(args.poses, skeleton)
    annotations = load_annotations(args.annotations)
    by_id = {annotation.person_id: annotation for annotation in annotations}
    if all(pose.person_id in by_id for pose in poses) and len(by_id) == len(annotations):
        annotations = [by_id[pose.person_id] for pose in poses]

    pckh_report = pckh(poses, annotations, args.alpha)
    pcp_report = pcp(poses, annotations)
    text = format_table(pckh_report) + "\n\n" + format_table(pcp_report) + "\n"
    print(text, end="")
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text)
    if args.kv:
        with open(args.kv, "w", encoding="utf-8") as fh:
            fh.write(format_key_values(pckh_report, pcp_report))
    if args.pckh_sweep:
        sweep = format_sweep(pckh_sweep(poses, annotations))
        with open(args.pckh_sweep, "w", encoding="utf-8") as fh:
            fh.write(sweep)
    logger.info(f"evaluated {len(poses)} poses: PCKh {pckh_report.mean:.4f}, PCP {pcp_report.mean:.4f}")


def cmd_selftest(args, config: Config, logger: Logger):
    results = selftest(seed=args.seed, scale=args.scale, logger=logger, progress=not args.quiet)
    for result in results:
        print(json.dumps(result.info()))
    if not all(result.passed for result in results):
        raise RuntimeError("selftest failures: " + ", ".join(r.name for r in results if not r.passed))


def cmd_prior(args, config: Config, logger: Logger):
    annotations = load_annotations(args.annotations)
    skeleton = config.skeleton()
    priors = {}
    for pair in skeleton.links():
        priors[pair] = fit_prior(
            annotations,
            pair,
            config.COARSE_FACTOR,
            config.PRIOR_RADIUS,
            config.PRIOR_SIGMA,
            config.PRIOR_FLOOR,
            skeleton,
        )
        if priors[pair].clamped:
            logger.warning(
                f"prior {skeleton[pair[0]].name}-{skeleton[pair[1]].name}: "
                f"{priors[pair].clamped} displacements clamped to radius {config.PRIOR_RADIUS}"
            )
    save_priors(args.out, priors)
    logger.info(f"wrote {len(priors)} priors fitted on {len(annotations)} annotations to {args.out}")


def build_parser():
    parser = argparse.ArgumentParser(prog="consensus_pose", description="Consensus-voting pose inference")
    parser.add_argument("--config", default=CFG_FL_NAME, help="run configuration file")
    parser.add_argument("--log-dir", default="logs", help="directory of the log file ('' disables it)")
    commands = parser.add_subparsers(dest="command", required=True)

    synth = commands.add_parser("synth", help="plant voter fields from a pose")
    synth.add_argument("--pose", help="annotation JSON lines file; its first person is planted")
    synth.add_argument("--seed", type=int, default=0)
    synth.add_argument("--image-size", type=int, nargs=2, default=[504, 504], metavar=("H", "W"))
    synth.add_argument("--label-noise", type=float, default=0.0)
    synth.add_argument("--background-noise", type=float, default=0.0)
    synth.add_argument("--distractors", type=int, default=0)
    synth.add_argument("--annotations-out", help="write the planted pose as an annotation")
    synth.add_argument("--out", required=True)
    synth.set_defaults(func=cmd_synth)

    agg = commands.add_parser("aggregate", help="aggregate voter fields into heatmaps")
    agg.add_argument("fields")
    agg.add_argument("--coarse", action="store_true", help="pool to the coarse grid")
    agg.add_argument("--out", required=True)
    agg.set_defaults(func=cmd_aggregate)

    cons = commands.add_parser("consensus", help="joint table (and conditional) for one edge")
    cons.add_argument("fields")
    cons.add_argument("--edge", required=True, help="i-j keypoint names")
    cons.add_argument("--given", help="coarse row,col of keypoint j to condition on")
    cons.add_argument("--out", required=True)
    cons.set_defaults(func=cmd_consensus)

    infer = commands.add_parser("infer", help="estimate the pose")
    infer.add_argument("fields")
    infer.add_argument("--out", required=True)
    infer.add_argument("--person-center", help="row,col in pixels")
    infer.add_argument("--person-scale", type=float, help="person height in pixels")
    infer.add_argument("--person-id", default="")
    infer.add_argument("--lambda", dest="lam", type=float)
    infer.add_argument("--stages", help="stages as 'a,b;c,d;...' keypoint names")
    infer.add_argument("--single-stage", action="store_true")
    infer.add_argument("--priors", help="float-grid file written by the prior command")
    infer.add_argument("--threads", type=int)
    infer.add_argument("--dump-model", metavar="DIR", help="write each stage's energy model as text into DIR")
    infer.set_defaults(func=cmd_infer)

    evaluate = commands.add_parser("eval", help="PCKh and PCP of poses against annotations")
    evaluate.add_argument("poses")
    evaluate.add_argument("annotations")
    evaluate.add_argument("--alpha", type=float, default=0.5)
    evaluate.add_argument("--out", help="text report")
    evaluate.add_argument("--kv", help="key=value report")
    evaluate.add_argument("--pckh-sweep", help="write alpha,rate lines to this file")
    evaluate.set_defaults(func=cmd_eval)

    test = commands.add_parser("selftest", help="oracle-equivalence suites")
    test.add_argument("--seed", type=int, default=0)
    test.add_argument("--scale", type=float, default=1.0, help="multiplier on the number of rounds")
    test.add_argument("--quiet", action="store_true")
    test.set_defaults(func=cmd_selftest)

    prior = commands.add_parser("prior", help="fit location priors from annotations")
    prior.add_argument("annotations")
    prior.add_argument("--out", required=True)
    prior.set_defaults(func=cmd_prior)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logger = Logger(log_dir=args.log_dir or None)
    try:
        config = Config(args.config, logger)
        config.override(**{"lambda": getattr(args, "lam", None), "threads": getattr(args, "threads", None)})
        args.func(args, config, logger)
    except PoseError as e:
        logger.debug(f"{args.command} failed: {e}")
        print("error " + json.dumps(e.info()), file=sys.stderr)
        return 2
    except Exception as e:  # pylint: disable=broad-except
        logger.error(f"{args.command} failed: {e}")
        print("error " + json.dumps({"type": type(e).__name__, "message": str(e)}), file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    try:
        sys.exit(main())
    except KeyboardInterrupt:
        pass
