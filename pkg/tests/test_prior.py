import numpy as np
import pytest

from consensus_pose.exceptions import GridError, NoEvidenceError
from consensus_pose.models import Annotation
from consensus_pose.prior import fit_prior, prior_score, prior_scores, uniform_prior
from consensus_pose.skeleton import NUM_ANNOTATED, default_skeleton

SKELETON = default_skeleton()
THORAX = SKELETON["thorax"].id
PELVIS = SKELETON["pelvis"].id
MID_BODY = SKELETON["mid_body"].id


def _annotation(**points):
    array = np.full((NUM_ANNOTATED, 2), np.nan)
    for name, point in points.items():
        array[SKELETON[name].id] = point
    return Annotation(person_id="p", points=array, visible=~np.isnan(array).any(axis=1))


def test_histogram_peak_without_smoothing():
    annotations = [_annotation(thorax=(100, 100), pelvis=(160, 100))] * 3
    prior = fit_prior(annotations, (THORAX, PELVIS), factor=12, radius=8, sigma=0.0, floor=0.0)
    assert prior.samples == 3 and prior.clamped == 0
    assert prior.values[8 + 5, 8] == pytest.approx(1.0)
    assert prior_score(prior, (2, 2), (7, 2)) == pytest.approx(1.0)
    assert prior_score(prior, (7, 2), (2, 2)) == 0.0


def test_smoothing_and_floor():
    annotations = [_annotation(thorax=(100, 100), pelvis=(160, 100))]
    prior = fit_prior(annotations, (THORAX, PELVIS), factor=12, radius=8, sigma=1.0, floor=1e-6)
    assert prior.values.sum() == pytest.approx(1.0)
    assert prior.values.min() >= 1e-6
    assert np.unravel_index(np.argmax(prior.values), prior.values.shape) == (13, 8)
    assert prior.values[13, 9] < prior.values[13, 8]


def test_far_displacements_are_clamped():
    annotations = [_annotation(thorax=(0, 0), pelvis=(200, 0)), _annotation(thorax=(0, 0), pelvis=(12, 0))]
    prior = fit_prior(annotations, (THORAX, PELVIS), factor=12, radius=8, sigma=0.0, floor=0.0)
    assert prior.clamped == 1 and prior.samples == 2
    assert prior.values[16, 8] == pytest.approx(0.5)
    # lookups past the radius read the border bin
    assert prior_score(prior, (0, 0), (30, 0)) == pytest.approx(0.5)


def test_synthetic_pairs_use_augmented_points():
    annotations = [_annotation(thorax=(100, 100), pelvis=(160, 100))]
    prior = fit_prior(annotations, (THORAX, MID_BODY), factor=12, radius=4, sigma=0.0, floor=0.0)
    # (30, 0) px is 2.5 cells, rounded away from zero
    assert prior.values[4 + 3, 4] == pytest.approx(1.0)


def test_unlabeled_pairs():
    annotations = [_annotation(thorax=(100, 100))]
    with pytest.raises(NoEvidenceError):
        fit_prior(annotations, (THORAX, PELVIS), factor=12)


def test_parameter_checks():
    with pytest.raises(GridError):
        fit_prior([], (THORAX, PELVIS), factor=12, radius=-1)
    with pytest.raises(GridError):
        fit_prior([], (THORAX, PELVIS), factor=12, radius=1, floor=0.2)


def test_uniform_prior():
    prior = uniform_prior((THORAX, PELVIS), factor=12, radius=2)
    assert prior.values.shape == (5, 5)
    np.testing.assert_allclose(prior.values, 1.0 / 25)
    scores = prior_scores(prior, np.array([[0, 0], [1, 1]]), np.array([[0, 0], [5, 5], [9, 9]]))
    assert scores.shape == (2, 3)
    np.testing.assert_allclose(scores, 1.0 / 25)
