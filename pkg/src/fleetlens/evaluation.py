"""SVI/MVI accuracy, confusion matrices, and the majority-vote gain
simulation.

NO_DETECTION outcomes count as incorrect in every accuracy denominator and
are additionally surfaced as an unknown rate, so the alternative convention
(excluding unknowns) stays recoverable from the report.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from datetime import datetime, timezone
from typing import Mapping, Sequence

from .backends.stochastic import StochasticBackend, StochasticProfile
from .domain import NO_DETECTION, EvalReport, Prediction, Task, VoteTally
from .errors import DuplicateTally, MissingTruth
from .inference import tally_votes

ENUMERATION_LIMIT = 10**6


@dataclass(frozen=True)
class EvalOutcome:
    """Accuracy, unknown rate, and confusion for one inference mode."""

    accuracy: float
    unknown_rate: float
    confusion: Mapping[str, Mapping[str, int]]
    per_class_accuracy: Mapping[str, float]
    total: int


def _score(pairs: list[tuple[str, str]]) -> EvalOutcome:
    """Fold (truth, predicted) pairs into an EvalOutcome."""
    total = len(pairs)
    labels = sorted({t for t, _ in pairs} | {p for _, p in pairs if p != NO_DETECTION})
    axis = labels + [NO_DETECTION]
    confusion = {row: {col: 0 for col in axis} for row in axis}
    for truth_label, predicted in pairs:
        confusion[truth_label][predicted] += 1

    correct = sum(confusion[label][label] for label in labels)
    unknown = sum(confusion[row][NO_DETECTION] for row in axis)
    per_class = {}
    for label in labels:
        support = sum(confusion[label].values())
        if support:
            per_class[label] = confusion[label][label] / support
    return EvalOutcome(
        accuracy=correct / total if total else 0.0,
        unknown_rate=unknown / total if total else 0.0,
        confusion=confusion,
        per_class_accuracy=per_class,
        total=total,
    )


def svi_accuracy(
    predictions: Sequence[Prediction], truth: Mapping[str, str]
) -> EvalOutcome:
    """Image-level accuracy: each image is scored as its own entity."""
    pairs = []
    for p in predictions:
        if p.record_id not in truth:
            raise MissingTruth(f"no ground truth for record {p.record_id}")
        pairs.append((truth[p.record_id], p.label))
    return _score(pairs)


def mvi_accuracy(
    tallies: Sequence[VoteTally], truth_per_plate: Mapping[str, str]
) -> EvalOutcome:
    """Plate-level accuracy after majority voting."""
    seen = set()
    pairs = []
    for t in tallies:
        if t.plate_id in seen:
            raise DuplicateTally(f"more than one tally for plate {t.plate_id}")
        seen.add(t.plate_id)
        if t.plate_id not in truth_per_plate:
            raise MissingTruth(f"no ground truth for plate {t.plate_id}")
        pairs.append((truth_per_plate[t.plate_id], t.winner))
    return _score(pairs)


def build_eval_report(
    task: Task,
    backend_id: str,
    svi: EvalOutcome,
    mvi: EvalOutcome,
) -> EvalReport:
    """Combine the two outcomes into the per-(task, backend) report."""
    return EvalReport(
        task=task,
        backend_id=backend_id,
        svi_accuracy=svi.accuracy,
        mvi_accuracy=mvi.accuracy,
        unknown_rate_svi=svi.unknown_rate,
        unknown_rate_mvi=mvi.unknown_rate,
        confusion_matrix=mvi.confusion,
        per_class_accuracy=mvi.per_class_accuracy,
        images_evaluated=svi.total,
        plates_evaluated=mvi.total,
    )


@dataclass(frozen=True)
class SimulationResult:
    svi_accuracy: float
    mvi_accuracy: float
    analytic_mvi: float | None
    profile: StochasticProfile
    num_labels: int
    views: int
    plates: int

    def to_dict(self) -> dict:
        return {
            "svi_accuracy": self.svi_accuracy,
            "mvi_accuracy": self.mvi_accuracy,
            "analytic_mvi": self.analytic_mvi,
            "p_correct": self.profile.p_correct,
            "p_no_detection": self.profile.p_no_detection,
            "seed": self.profile.seed,
            "num_labels": self.num_labels,
            "views": self.views,
            "plates": self.plates,
        }


def majority_probability_binomial(p_correct: float, views: int) -> float:
    """Closed-form majority probability: 2 labels, no no-detections, odd k.

    P(majority correct) = sum over j > k/2 of C(k, j) p^j (1-p)^(k-j).
    """
    if views % 2 == 0:
        raise ValueError("binomial majority formula requires odd k")
    return sum(
        math.comb(views, j) * p_correct**j * (1 - p_correct) ** (views - j)
        for j in range(views // 2 + 1, views + 1)
    )


def majority_probability_enumerated(
    profile: StochasticProfile, num_labels: int, views: int
) -> float | None:
    """Exact majority probability by outcome enumeration.

    Per-view outcomes: truth (p), no-detection (q), each wrong label with
    (1-p-q)/(L-1). A count tie among m top real labels is won by the truth
    with probability 1/m (confidence sums are exchangeable). Returns None
    when the outcome space exceeds the enumeration limit.
    """
    outcomes_per_view = num_labels + 1
    if outcomes_per_view**views > ENUMERATION_LIMIT:
        return None
    p, q = profile.p_correct, profile.p_no_detection
    wrong = (1 - p - q) / (num_labels - 1)
    # Outcome 0 = truth, 1 = no-detection, 2.. = each wrong label.
    probs = [p, q] + [wrong] * (num_labels - 1)

    total = 0.0
    for combo in itertools.product(range(outcomes_per_view), repeat=views):
        prob = 1.0
        for outcome in combo:
            prob *= probs[outcome]
        if prob == 0.0:
            continue
        counts = [0] * outcomes_per_view
        for outcome in combo:
            counts[outcome] += 1
        real = [counts[0]] + counts[2:]
        top = max(real)
        if top == 0:
            continue  # all no-detection: truth cannot win
        contenders = sum(1 for c in real if c == top)
        if counts[0] == top:
            total += prob / contenders
    return total


def simulate_mvi_gain(
    profile: StochasticProfile, num_labels: int, views: int, plates: int
) -> SimulationResult:
    """Monte Carlo SVI vs MVI accuracy for a synthetic plate population.

    Every plate gets ``views`` seeded draws through the stochastic backend
    and the production voting path; the analytic value comes from the
    closed-form binomial sum when it applies, else from exhaustive
    enumeration when feasible.
    """
    if views < 1 or plates < 1:
        raise ValueError("views and plates must be >= 1")
    if num_labels < 2:
        raise ValueError("num_labels must be >= 2")
    labels = [f"label_{i:02d}" for i in range(num_labels)]
    task = Task.MAKE

    truth: dict[str, str] = {}
    plate_truth: dict[str, str] = {}
    plate_records: list[tuple[str, list[str]]] = []
    for i in range(plates):
        plate_id = f"SIM{i:06d}"
        truth_label = labels[i % num_labels]
        plate_truth[plate_id] = truth_label
        record_ids = [f"{plate_id}#{v}" for v in range(views)]
        for record_id in record_ids:
            truth[record_id] = truth_label
        plate_records.append((plate_id, record_ids))

    backend = StochasticBackend(
        backend_id=f"sim:p={profile.p_correct},q={profile.p_no_detection},seed={profile.seed}",
        task=task,
        labels=labels,
        truth=truth,
        profile=profile,
    )
    stamp = datetime.now(timezone.utc)

    svi_correct = 0
    mvi_correct = 0
    for plate_id, record_ids in plate_records:
        group = []
        for record_id in record_ids:
            label, confidence = backend.draw(record_id)
            if label == plate_truth[plate_id]:
                svi_correct += 1
            group.append(
                Prediction(
                    record_id=record_id,
                    plate_id=plate_id,
                    task=task,
                    backend_id=backend.descriptor.backend_id,
                    label=label if label is not None else NO_DETECTION,
                    confidence=confidence,
                    produced_at=stamp,
                )
            )
        if tally_votes(group).winner == plate_truth[plate_id]:
            mvi_correct += 1

    if num_labels == 2 and profile.p_no_detection == 0.0 and views % 2 == 1:
        analytic = majority_probability_binomial(profile.p_correct, views)
    else:
        analytic = majority_probability_enumerated(profile, num_labels, views)

    return SimulationResult(
        svi_accuracy=svi_correct / (plates * views),
        mvi_accuracy=mvi_correct / plates,
        analytic_mvi=analytic,
        profile=profile,
        num_labels=num_labels,
        views=views,
        plates=plates,
    )
