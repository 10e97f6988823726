# Config consts
import configparser
import os

from .exceptions import ConfigError, GridError
from .models import LogPolarGrid
from .skeleton import DEFAULT_EDGES, DEFAULT_STAGES, build_skeleton

CFG_FL_NAME = "pose.cfg"
POSE_CFG_SECTION = "consensus_pose"


def _names(value: str):
    return [item.strip() for item in value.split(",") if item.strip()]


class Config:  # pylint: disable=too-few-public-methods,too-many-instance-attributes
    def __init__(self, path=CFG_FL_NAME, logger=None):
        # Init config
        config = configparser.ConfigParser()
        config["DEFAULT"] = {
            "num_rings": "4",
            "angular_bins": "12",
            "ring_boundaries": "2, 5, 11, 21, 32",
            "angular_offset": "0.0",
            "kernel_size": "65",
            "stride": "4",
            "coarse_factor": "12",
            "kept_rings": "2",
            "lambda": "0.5",
            "epsilon": "1e-8",
            "prune_k": "128",
            "solver": "trws",
            "max_iters": "100",
            "tol": "1e-6",
            "mask_sigma_factor": "1.0",
            "mask_keypoint": "mid_body",
            "prior_sigma": "1.0",
            "prior_floor": "1e-6",
            "prior_radius": "8",
            "prior_file": "",
            "stage1": ", ".join(DEFAULT_STAGES[0]),
            "stage2": ", ".join(DEFAULT_STAGES[1]),
            "stage3": ", ".join(DEFAULT_STAGES[2]),
            "edges": ", ".join(DEFAULT_EDGES),
            "threads": "1",
        }

        if path is None or not os.path.exists(path):
            if logger is not None:
                logger.info(f"No configuration file ({path}) found! Assuming default config...")
            config[POSE_CFG_SECTION] = {}
            self.SOURCE = None
        else:
            try:
                config.read(path)
            except configparser.Error as e:
                raise ConfigError("file", f"cannot parse {path}: {e}") from e
            if not config.has_section(POSE_CFG_SECTION):
                config[POSE_CFG_SECTION] = {}
            self.SOURCE = path

        def get(key, cast=str):
            raw = config.get(POSE_CFG_SECTION, key)
            try:
                return cast(raw)
            except ValueError as e:
                raise ConfigError(key, f"cannot read {raw!r} as {cast.__name__}") from e

        # Log-polar grid
        self.NUM_RINGS = get("num_rings", int)
        self.ANGULAR_BINS = get("angular_bins", int)
        self.RING_BOUNDARIES = tuple(float(r) for r in _names(get("ring_boundaries")))
        self.ANGULAR_OFFSET = get("angular_offset", float)
        self.KERNEL_SIZE = get("kernel_size", int)
        self.STRIDE = get("stride", int)

        # Consensus
        self.COARSE_FACTOR = get("coarse_factor", int)
        self.KEPT_RINGS = get("kept_rings", int)

        # Energy and solver
        self.LAMBDA = get("lambda", float)
        self.EPSILON = get("epsilon", float)
        self.PRUNE_K = get("prune_k", int)
        self.SOLVER = get("solver")
        self.MAX_ITERS = get("max_iters", int)
        self.TOL = get("tol", float)

        # Person mask
        self.MASK_SIGMA_FACTOR = get("mask_sigma_factor", float)
        self.MASK_KEYPOINT = get("mask_keypoint")

        # Priors
        self.PRIOR_SIGMA = get("prior_sigma", float)
        self.PRIOR_FLOOR = get("prior_floor", float)
        self.PRIOR_RADIUS = get("prior_radius", int)
        self.PRIOR_FILE = get("prior_file")

        # Skeleton
        self.STAGES = [_names(get(f"stage{n}")) for n in (1, 2, 3)]
        self.STAGES = [stage for stage in self.STAGES if stage]
        self.EDGES = _names(get("edges"))

        self.THREADS = get("threads", int)

        self.validate()

    def override(self, **values):
        """Replace attributes (CLI flags) and validate again; None values are ignored."""
        for key, value in values.items():
            if value is not None:
                setattr(self, key.upper(), value)
        self.validate()
        return self

    def single_stage(self):
        """Put every annotated keypoint in one stage."""
        return self.override(stages=[[name for stage in self.STAGES for name in stage]])

    def grid(self) -> LogPolarGrid:
        try:
            return LogPolarGrid(
                num_rings=self.NUM_RINGS,
                angular_bins=self.ANGULAR_BINS,
                ring_boundaries=self.RING_BOUNDARIES,
                angular_offset=self.ANGULAR_OFFSET,
            )
        except GridError as e:
            raise ConfigError("ring_boundaries", str(e)) from e

    def skeleton(self):
        return build_skeleton(self.STAGES, self.EDGES)

    def validate(self):
        grid = self.grid()
        if self.KERNEL_SIZE % 2 == 0:
            raise ConfigError("kernel_size", f"must be odd, got {self.KERNEL_SIZE}")
        if (self.KERNEL_SIZE - 1) // 2 < grid.outer_radius:
            raise ConfigError("kernel_size", f"{self.KERNEL_SIZE} cannot contain radius {grid.outer_radius}")
        if self.STRIDE <= 0:
            raise ConfigError("stride", "must be positive")
        if self.COARSE_FACTOR <= 0 or self.COARSE_FACTOR % self.STRIDE != 0:
            raise ConfigError("coarse_factor", f"must be a positive multiple of the stride {self.STRIDE}")
        if not 1 <= self.KEPT_RINGS <= self.NUM_RINGS:
            raise ConfigError("kept_rings", f"must lie in [1, {self.NUM_RINGS}]")
        if not 0.0 <= self.LAMBDA <= 1.0:
            raise ConfigError("lambda", f"must lie in [0, 1], got {self.LAMBDA}")
        if not 0.0 < self.EPSILON < 1.0:
            raise ConfigError("epsilon", "must lie in (0, 1)")
        if self.PRUNE_K < 0:
            raise ConfigError("prune_k", "must be non-negative (0 keeps every cell)")
        if self.MAX_ITERS < 1:
            raise ConfigError("max_iters", "must be at least 1")
        if self.TOL < 0:
            raise ConfigError("tol", "must be non-negative")
        if not self.MASK_SIGMA_FACTOR > 0:
            raise ConfigError("mask_sigma_factor", "must be positive")
        if self.PRIOR_SIGMA < 0:
            raise ConfigError("prior_sigma", "must be non-negative")
        if self.PRIOR_RADIUS < 0:
            raise ConfigError("prior_radius", "must be non-negative")
        if not 0.0 <= self.PRIOR_FLOOR * (2 * self.PRIOR_RADIUS + 1) ** 2 < 1.0:
            raise ConfigError("prior_floor", "too large for the prior table")
        if self.THREADS < 1:
            raise ConfigError("threads", "must be at least 1")

        from .mrf import get_solver  # pylint: disable=import-outside-toplevel

        if get_solver(self.SOLVER) is None:
            raise ConfigError("solver", f"unknown solver {self.SOLVER!r}")

        skeleton = self.skeleton()
        if self.MASK_KEYPOINT and self.MASK_KEYPOINT not in skeleton:
            raise ConfigError("mask_keypoint", f"unknown keypoint {self.MASK_KEYPOINT!r}")
