"""Accuracy scoring against independent recounts, and the gain simulation."""

from __future__ import annotations

import math
import random
from collections import Counter
from datetime import datetime, timezone

import pytest

from fleetlens.backends.stochastic import StochasticProfile
from fleetlens.domain import NO_DETECTION, Prediction, Task
from fleetlens.errors import DuplicateTally, MissingTruth
from fleetlens.evaluation import (
    build_eval_report,
    majority_probability_binomial,
    majority_probability_enumerated,
    mvi_accuracy,
    simulate_mvi_gain,
    svi_accuracy,
)
from fleetlens.inference import run_mvi, tally_votes

STAMP = datetime(2025, 4, 2, 9, 0, 0, tzinfo=timezone.utc)


def pred(record_id, plate, label, confidence=0.9):
    return Prediction(
        record_id=record_id,
        plate_id=plate,
        task=Task.COLOUR,
        backend_id="mock:x",
        label=label,
        confidence=confidence if label != NO_DETECTION else 0.0,
        produced_at=STAMP,
    )


# Hand-built 12-prediction fixture: truth and predicted labels chosen so the
# expected numbers are recountable on paper.
SVI_FIXTURE = [
    # (record, truth, predicted)
    ("r01", "Red", "Red"),
    ("r02", "Red", "Red"),
    ("r03", "Red", "White"),
    ("r04", "Red", NO_DETECTION),
    ("r05", "White", "White"),
    ("r06", "White", "White"),
    ("r07", "White", "Red"),
    ("r08", "White", "White"),
    ("r09", "Blue", "Blue"),
    ("r10", "Blue", NO_DETECTION),
    ("r11", "Blue", "Blue"),
    ("r12", "Blue", "White"),
]


def recount(pairs):
    """Independent spreadsheet-style recount over (truth, predicted) pairs."""
    total = len(pairs)
    correct = sum(1 for truth, predicted in pairs if truth == predicted)
    unknown = sum(1 for _, predicted in pairs if predicted == NO_DETECTION)
    cells = Counter(pairs)
    return correct / total, unknown / total, cells


class TestSviAccuracy:
    def test_eight_correct_one_wrong_one_unknown(self):
        predictions = [pred(f"r{i}", "P", "Red") for i in range(8)]
        predictions.append(pred("r8", "P", "Blue"))
        predictions.append(pred("r9", "P", NO_DETECTION))
        truth = {p.record_id: "Red" for p in predictions}
        outcome = svi_accuracy(predictions, truth)
        assert outcome.accuracy == pytest.approx(0.80)
        assert outcome.unknown_rate == pytest.approx(0.10)

    def test_all_no_detection(self):
        predictions = [pred(f"r{i}", "P", NO_DETECTION) for i in range(5)]
        outcome = svi_accuracy(predictions, {p.record_id: "Red" for p in predictions})
        assert outcome.accuracy == 0.0
        assert outcome.unknown_rate == 1.0

    def test_twelve_prediction_fixture_matches_recount(self):
        predictions = [pred(r, "P", predicted) for r, _, predicted in SVI_FIXTURE]
        truth = {r: t for r, t, _ in SVI_FIXTURE}
        outcome = svi_accuracy(predictions, truth)

        expected_acc, expected_unknown, cells = recount(
            [(t, p) for _, t, p in SVI_FIXTURE]
        )
        assert outcome.accuracy == expected_acc == pytest.approx(7 / 12)
        assert outcome.unknown_rate == expected_unknown == pytest.approx(2 / 12)
        for (truth_label, predicted), count in cells.items():
            assert outcome.confusion[truth_label][predicted] == count
        # row sums equal the truth-class support
        for truth_label in ("Red", "White", "Blue"):
            support = sum(1 for _, t, _ in SVI_FIXTURE if t == truth_label)
            assert sum(outcome.confusion[truth_label].values()) == support
        assert outcome.per_class_accuracy == {
            "Red": pytest.approx(2 / 4),
            "White": pytest.approx(3 / 4),
            "Blue": pytest.approx(2 / 4),
        }

    def test_missing_truth_raises(self):
        with pytest.raises(MissingTruth):
            svi_accuracy([pred("r1", "P", "Red")], {})

    def test_permuted_predictions_identical_outcome(self):
        predictions = [pred(r, "P", p_) for r, _, p_ in SVI_FIXTURE]
        truth = {r: t for r, t, _ in SVI_FIXTURE}
        base = svi_accuracy(predictions, truth)
        shuffled = predictions[:]
        random.Random(5).shuffle(shuffled)
        assert svi_accuracy(shuffled, truth) == base


# 6 plates x 3 views; truth per plate and the per-view predictions.
MVI_FIXTURE = {
    "PA": ("Red", ["Red", "Red", "White"]),
    "PB": ("Red", ["White", "White", "Red"]),
    "PC": ("White", ["White", NO_DETECTION, NO_DETECTION]),
    "PD": ("White", [NO_DETECTION, NO_DETECTION, NO_DETECTION]),
    "PE": ("Blue", ["Blue", "Red", "Red"]),
    "PF": ("Blue", ["Blue", "Blue", NO_DETECTION]),
}


def mvi_fixture_predictions():
    predictions = []
    for plate, (_, labels) in MVI_FIXTURE.items():
        for i, label in enumerate(labels):
            predictions.append(pred(f"{plate}v{i}", plate, label))
    return predictions


class TestMviAccuracy:
    def test_four_plate_example(self):
        groups = {
            "P1": ["T"], "P2": ["T"], "P3": ["F"], "P4": [NO_DETECTION],
        }
        tallies = [
            tally_votes([pred(f"{p}r", p, label) for label in labels])
            for p, labels in groups.items()
        ]
        truth = {p: "T" for p in groups}
        outcome = mvi_accuracy(tallies, truth)
        assert outcome.accuracy == pytest.approx(0.50)
        assert outcome.unknown_rate == pytest.approx(0.25)

    def test_six_plate_fixture_matches_brute_force(self):
        tallies = run_mvi(mvi_fixture_predictions())
        truth = {plate: t for plate, (t, _) in MVI_FIXTURE.items()}
        outcome = mvi_accuracy(tallies, truth)

        # independent recount: plurality with the no-detection rule applied
        # by hand on the fixture literals
        expected_winners = {
            "PA": "Red", "PB": "White", "PC": "White",
            "PD": NO_DETECTION, "PE": "Red", "PF": "Blue",
        }
        pairs = [(t, expected_winners[p]) for p, (t, _) in MVI_FIXTURE.items()]
        expected_acc, expected_unknown, cells = recount(pairs)
        assert outcome.accuracy == expected_acc == pytest.approx(3 / 6)
        assert outcome.unknown_rate == expected_unknown == pytest.approx(1 / 6)
        for (truth_label, predicted), count in cells.items():
            assert outcome.confusion[truth_label][predicted] == count

    def test_singleton_groups_reduce_to_svi(self):
        predictions = [pred(f"r{i}", f"P{i}", label) for i, label in
                       enumerate(["Red", "Blue", NO_DETECTION, "Red"])]
        record_truth = {p.record_id: "Red" for p in predictions}
        plate_truth = {p.plate_id: "Red" for p in predictions}
        svi = svi_accuracy(predictions, record_truth)
        mvi = mvi_accuracy(run_mvi(predictions), plate_truth)
        assert svi.accuracy == mvi.accuracy
        assert svi.unknown_rate == mvi.unknown_rate

    def test_duplicate_tally_rejected(self):
        tally = tally_votes([pred("r1", "P1", "Red")])
        with pytest.raises(DuplicateTally):
            mvi_accuracy([tally, tally], {"P1": "Red"})

    def test_missing_plate_truth(self):
        tally = tally_votes([pred("r1", "P1", "Red")])
        with pytest.raises(MissingTruth):
            mvi_accuracy([tally], {})


class TestEvalReport:
    def test_report_combines_both_outcomes(self):
        predictions = mvi_fixture_predictions()
        record_truth = {
            f"{plate}v{i}": t
            for plate, (t, labels) in MVI_FIXTURE.items()
            for i in range(len(labels))
        }
        plate_truth = {plate: t for plate, (t, _) in MVI_FIXTURE.items()}
        svi = svi_accuracy(predictions, record_truth)
        mvi = mvi_accuracy(run_mvi(predictions), plate_truth)
        report = build_eval_report(Task.COLOUR, "mock:x", svi, mvi)
        assert report.images_evaluated == 18
        assert report.plates_evaluated == 6
        assert report.svi_accuracy == pytest.approx(7 / 18)
        assert report.mvi_accuracy == pytest.approx(3 / 6)
        assert report.confusion_matrix == mvi.confusion


class TestAnalyticOracles:
    def test_binomial_five_views(self):
        # frozen from the independent binomial-sum oracle
        assert majority_probability_binomial(0.8, 5) == pytest.approx(0.94208)

    def test_binomial_one_view_reduces_to_p(self):
        assert majority_probability_binomial(0.8, 1) == pytest.approx(0.8)

    def test_binomial_seven_views(self):
        assert majority_probability_binomial(0.8, 7) == pytest.approx(0.9666560)

    def test_enumeration_agrees_with_binomial(self):
        # dual route: the general enumerator must reproduce the closed form
        profile = StochasticProfile(p_correct=0.8, p_no_detection=0.0, seed=0)
        for views in (1, 3, 5, 7):
            assert majority_probability_enumerated(profile, 2, views) == pytest.approx(
                majority_probability_binomial(0.8, views)
            )

    def test_enumeration_bails_out_above_limit(self):
        profile = StochasticProfile(p_correct=0.8, seed=0)
        assert majority_probability_enumerated(profile, 30, 12) is None


class TestSimulateMviGain:
    def test_perfect_profile(self):
        profile = StochasticProfile(p_correct=1.0, seed=3)
        result = simulate_mvi_gain(profile, num_labels=2, views=5, plates=200)
        assert result.svi_accuracy == 1.0
        assert result.mvi_accuracy == 1.0
        assert result.analytic_mvi == pytest.approx(1.0)

    def test_k1_reduction(self):
        profile = StochasticProfile(p_correct=0.8, seed=3)
        result = simulate_mvi_gain(profile, num_labels=2, views=1, plates=2000)
        assert result.analytic_mvi == pytest.approx(0.8)
        assert result.svi_accuracy == result.mvi_accuracy

    def test_monte_carlo_matches_enumeration_three_labels(self):
        profile = StochasticProfile(p_correct=0.6, p_no_detection=0.1, seed=11)
        plates = 20_000
        result = simulate_mvi_gain(profile, num_labels=3, views=5, plates=plates)
        assert result.analytic_mvi is not None
        sigma = math.sqrt(result.analytic_mvi * (1 - result.analytic_mvi) / plates)
        assert abs(result.mvi_accuracy - result.analytic_mvi) < 3 * sigma

    def test_svi_estimate_tracks_p_correct(self):
        profile = StochasticProfile(p_correct=0.8, seed=21)
        plates = 10_000
        result = simulate_mvi_gain(profile, num_labels=2, views=5, plates=plates)
        sigma = math.sqrt(0.8 * 0.2 / (plates * 5))
        assert abs(result.svi_accuracy - 0.8) < 3 * sigma
