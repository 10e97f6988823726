import pytest

from consensus_pose.config import Config
from consensus_pose.exceptions import ConfigError


def write_cfg(tmp_path, body):
    path = tmp_path / "pose.cfg"
    path.write_text("[consensus_pose]\n" + body)
    return str(path)


def test_defaults(config):
    assert config.SOURCE is None
    assert config.RING_BOUNDARIES == (2.0, 5.0, 11.0, 21.0, 32.0)
    assert config.KERNEL_SIZE == 65 and config.STRIDE == 4 and config.COARSE_FACTOR == 12
    assert config.LAMBDA == 0.5 and config.SOLVER == "trws" and config.PRUNE_K == 128
    assert [len(stage) for stage in config.STAGES] == [4, 4, 8]
    assert config.grid().num_classes == 50
    assert len(config.skeleton().keypoints) == 30


def test_file_values(tmp_path, quiet_logger):
    path = write_cfg(tmp_path, "lambda = 0.8\nsolver = brute_force\nstage1 = head_top, upper_neck, thorax, pelvis, r_shoulder, l_shoulder, r_hip, l_hip\nstage2 = r_elbow, l_elbow, r_wrist, l_wrist, r_knee, l_knee, r_ankle, l_ankle\nstage3 =\n")
    config = Config(path, quiet_logger)
    assert config.SOURCE == path
    assert config.LAMBDA == 0.8 and config.SOLVER == "brute_force"
    assert len(config.STAGES) == 2
    assert config.skeleton().num_stages == 2


def test_missing_section_keeps_defaults(tmp_path, quiet_logger):
    path = tmp_path / "other.cfg"
    path.write_text("[elsewhere]\nlambda = 0.1\n")
    assert Config(str(path), quiet_logger).LAMBDA == 0.5


@pytest.mark.parametrize(
    "body, key",
    [
        ("kernel_size = 64\n", "kernel_size"),
        ("kernel_size = 33\n", "kernel_size"),
        ("lambda = 1.5\n", "lambda"),
        ("lambda = heavy\n", "lambda"),
        ("solver = annealing\n", "solver"),
        ("mask_keypoint = tail\n", "mask_keypoint"),
        ("coarse_factor = 10\n", "coarse_factor"),
        ("kept_rings = 5\n", "kept_rings"),
        ("ring_boundaries = 2, 5, 4, 21, 32\n", "ring_boundaries"),
        ("stage1 = head_top, upper_neck, thorax, wing\n", "stage1"),
        ("stage3 = r_elbow\n", "stages"),
        ("threads = 0\n", "threads"),
    ],
)
def test_invalid_values(tmp_path, quiet_logger, body, key):
    with pytest.raises(ConfigError) as error:
        Config(write_cfg(tmp_path, body), quiet_logger)
    assert error.value.key == key


def test_override(config):
    config.override(**{"lambda": 0.25, "threads": None})
    assert config.LAMBDA == 0.25 and config.THREADS == 1
    with pytest.raises(ConfigError):
        config.override(prune_k=-1)


def test_single_stage(config):
    config.single_stage()
    assert len(config.STAGES) == 1 and len(config.STAGES[0]) == 16
    assert config.skeleton().num_stages == 1


def test_error_info():
    error = ConfigError("lambda", "must lie in [0, 1]")
    assert error.info()["key"] == "lambda"
