import json

import numpy as np
import pytest

from decoder import (
    accumulate,
    analytic_shrinkage,
    decode_trial,
    epoch_auc,
    model_from_json,
    model_to_json,
    pooled_covariance,
    score,
    score_batch,
    select,
    train,
    train_from_labels,
)
from exceptions import (
    ArtifactIOError,
    DecoderNumericalError,
    DimensionMismatchError,
    EmptyInputError,
    ParameterRangeError,
    SelectionError,
)
from experiment import Phase, render_trial, simulate_phase
from models import Condition, ScoreBoard
from paradigm import generate_schedule
from pipeline import extract_features_array, flash_epochs


def _gaussian_classes(rng, d=10, n_target=200, n_nontarget=800, shift=0.5):
    mixing = rng.normal(size=(d, d))
    target = rng.normal(size=(n_target, d)) @ mixing + shift
    nontarget = rng.normal(size=(n_nontarget, d)) @ mixing
    return target, nontarget


def _oracle_weights(target, nontarget, lam):
    n = len(target) + len(nontarget)
    pooled = ((len(target) - 1) * np.cov(target, rowvar=False)
              + (len(nontarget) - 1) * np.cov(nontarget, rowvar=False)) / (n - 2)
    nu = np.trace(pooled) / pooled.shape[0]
    shrunk = (1 - lam) * pooled + lam * nu * np.eye(pooled.shape[0])
    return np.linalg.solve(shrunk, target.mean(axis=0) - nontarget.mean(axis=0)), nu


def test_identity_covariance_gives_weights_along_mean_difference():
    offsets = np.array([[1.0, 0.0], [-1.0, 0.0], [0.0, 1.0], [0.0, -1.0]])
    model = train(offsets + [1.0, 0.0], offsets, shrinkage=0.0)
    assert model.weights[0] > 0
    assert model.weights[1] == pytest.approx(0.0, abs=1e-12)


@pytest.mark.parametrize("lam", [0.0, 0.3, 1.0])
def test_weights_match_closed_form(rng, lam):
    target, nontarget = _gaussian_classes(rng)
    model = train(target, nontarget, shrinkage=lam)
    expected, nu = _oracle_weights(target, nontarget, lam)
    np.testing.assert_allclose(model.weights, expected, rtol=1e-8, atol=1e-10)
    assert model.nu == pytest.approx(nu, rel=1e-10)
    assert model.shrinkage == lam


def test_full_shrinkage_points_along_mean_difference(rng):
    target, nontarget = _gaussian_classes(rng)
    model = train(target, nontarget, shrinkage=1.0)
    diff = target.mean(axis=0) - nontarget.mean(axis=0)
    cosine = model.weights @ diff / (np.linalg.norm(model.weights) * np.linalg.norm(diff))
    assert np.arccos(min(cosine, 1.0)) < 1e-6


def test_pooled_covariance_matches_numpy(rng):
    target, nontarget = _gaussian_classes(rng, d=4, n_target=30, n_nontarget=50)
    expected = (29 * np.cov(target, rowvar=False) + 49 * np.cov(nontarget, rowvar=False)) / 78
    np.testing.assert_allclose(pooled_covariance(target, nontarget), expected, atol=1e-10)


def test_analytic_shrinkage_lies_in_unit_interval(rng):
    target, nontarget = _gaussian_classes(rng, d=30, n_target=40, n_nontarget=60)
    lam = analytic_shrinkage(target, nontarget)
    assert 0.0 <= lam <= 1.0
    assert train(target, nontarget).shrinkage == pytest.approx(lam)


def test_score_sign_and_midpoint(rng):
    target, nontarget = _gaussian_classes(rng)
    model = train(target, nontarget, shrinkage=0.3)
    mu_t, mu_nt = target.mean(axis=0), nontarget.mean(axis=0)
    assert score(model, mu_t) > 0
    assert score(model, mu_nt) < 0
    assert score(model, (mu_t + mu_nt) / 2) == pytest.approx(0.0, abs=1e-9)
    np.testing.assert_allclose(score_batch(model, target[:5]), [score(model, row) for row in target[:5]])


def test_score_rejects_wrong_dimension(rng):
    model = train(*_gaussian_classes(rng), shrinkage=0.3)
    with pytest.raises(DimensionMismatchError):
        score(model, np.zeros(9))
    with pytest.raises(DimensionMismatchError):
        train(np.zeros((3, 4)), np.zeros((3, 5)))


def test_unregularized_rank_deficient_covariance_fails(rng):
    target = rng.normal(size=(3, 10))
    nontarget = rng.normal(size=(3, 10))
    with pytest.raises(DecoderNumericalError):
        train(target, nontarget, shrinkage=0.0)
    assert train(target, nontarget, shrinkage=0.5).dimension == 10


def test_training_needs_two_rows_per_class():
    with pytest.raises(EmptyInputError):
        train(np.zeros((1, 3)), np.ones((4, 3)))


def test_train_from_labels_splits_rows(rng):
    target, nontarget = _gaussian_classes(rng)
    features = np.vstack([nontarget, target])
    labels = np.r_[np.zeros(len(nontarget), bool), np.ones(len(target), bool)]
    np.testing.assert_allclose(train_from_labels(features, labels, 0.2).weights,
                               train(target, nontarget, 0.2).weights)


def test_rescaled_features_decode_identically(rng):
    target, nontarget = _gaussian_classes(rng)
    schedule = generate_schedule(4)
    held_out = rng.normal(size=(120, 10))
    model = train(target, nontarget, shrinkage=0.3)
    scaled = train(target * 7.5, nontarget * 7.5, shrinkage=0.3)
    np.testing.assert_allclose(score_batch(scaled, held_out * 7.5), score_batch(model, held_out), rtol=1e-8, atol=1e-8)
    assert decode_trial(score_batch(scaled, held_out * 7.5), schedule) == decode_trial(score_batch(model, held_out), schedule)


def test_accumulate_adds_score_to_flagged_objects():
    board = accumulate(ScoreBoard.empty(), 0.7, {1, 2, 3, 4, 5, 6})
    assert board.scores[1] == board.scores[6] == 0.7
    assert board.scores[0] == 0.0
    assert board.counts[3] == 1
    assert board.flashes_seen == 1


def test_accumulate_rejects_unknown_objects():
    with pytest.raises(SelectionError):
        accumulate(ScoreBoard.empty(), 1.0, {36})


def test_full_sequence_counts_every_object_twice():
    schedule = generate_schedule(0)
    board = ScoreBoard.empty()
    for group in schedule.sequence(0):
        board = accumulate(board, 1.0, group)
    assert set(board.counts) == {2}
    assert board.flashes_seen == 12


def test_accumulation_order_does_not_matter(rng):
    schedule = generate_schedule(0)
    scores = rng.integers(-5, 5, size=12).astype(float)
    forward, backward = ScoreBoard.empty(), ScoreBoard.empty()
    groups = schedule.sequence(0)
    for s, group in zip(scores, groups):
        forward = accumulate(forward, s, group)
    for s, group in reversed(list(zip(scores, groups))):
        backward = accumulate(backward, s, group)
    assert forward.scores == backward.scores
    assert select(forward) == select(backward)


def test_select_picks_highest_score_and_lowest_id_on_ties():
    schedule = generate_schedule(0)
    board = ScoreBoard.empty()
    for group in schedule.sequence(0):
        board = accumulate(board, 0.0, group)
    assert select(board) == 0
    target = 17
    board = ScoreBoard.empty()
    for group in schedule.sequence(0):
        board = accumulate(board, 1.0 if target in group else -1.0, group)
    assert select(board) == target


def test_select_before_a_full_sequence_fails():
    with pytest.raises(SelectionError):
        select(accumulate(ScoreBoard.empty(), 1.0, {0}))


def test_decode_trial_matches_incremental_accumulation(rng):
    schedule = generate_schedule(21)
    scores = rng.normal(size=120)
    board = ScoreBoard.empty()
    expected = []
    for k, (s, group) in enumerate(zip(scores, schedule.flashes), start=1):
        board = accumulate(board, s, group)
        if k % 12 == 0:
            expected.append(select(board))
    assert decode_trial(scores, schedule) == expected
    with pytest.raises(DimensionMismatchError):
        decode_trial(scores[:100], schedule)


def test_noise_free_trial_is_decoded_after_one_sequence(quiet_model, quiet_profile):
    phase = simulate_phase(quiet_profile, Condition.ERP_ONLY, 5, 1234, (0, 1, Phase.TESTING))
    scores = score_batch(quiet_model, phase.features).reshape(5, 120)
    for trial_scores, schedule, target in zip(scores, phase.schedules, phase.targets):
        assert decode_trial(trial_scores, schedule)[0] == target


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_noise_free_decoding_finds_every_target(quiet_model, quiet_profile, seed):
    for target in range(36):
        schedule, stream = render_trial(quiet_profile, Condition.ERP_ONLY, target,
                                        schedule_seed=1000 * seed + target, noise_seed=0)
        scores = score_batch(quiet_model, extract_features_array(flash_epochs(stream, schedule)))
        decoded = decode_trial(scores, schedule)
        assert decoded[0] == target, f"schedule seed {1000 * seed + target}"
        assert set(decoded) == {target}


def test_epoch_auc():
    assert epoch_auc([0.1, 0.2, 0.9, 0.8], [False, False, True, True]) == 1.0
    with pytest.raises(EmptyInputError):
        epoch_auc([0.1, 0.2], [True, True])


def test_model_json_keeps_lambda_and_weights(rng):
    model = train(*_gaussian_classes(rng), shrinkage=0.3)
    text = model_to_json(model)
    assert '"lambda": 0.3' in text
    restored = model_from_json(text)
    np.testing.assert_array_equal(restored.weights, model.weights)
    assert restored.bias == model.bias
    assert restored.shrinkage == 0.3


def test_train_rejects_shrinkage_outside_unit_interval(rng):
    with pytest.raises(ParameterRangeError, match="shrinkage"):
        train(*_gaussian_classes(rng), shrinkage=1.2)


def test_model_json_without_class_means_is_rejected(rng):
    document = json.loads(model_to_json(train(*_gaussian_classes(rng), shrinkage=0.3)))
    del document["class_means"]["nontarget"]
    with pytest.raises(ArtifactIOError, match="class_means.nontarget"):
        model_from_json(json.dumps(document))
    with pytest.raises(ArtifactIOError, match="JSON"):
        model_from_json("[1, 2")
