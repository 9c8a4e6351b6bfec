"""Confidence-thresholded purification: reconstruct, classify, accept or reject."""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Sequence

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.validation import check_is_fitted

from .containers import array_sha256
from .train import LengthMismatch
from .vqc import predict_from_logits

REJECTED = -1
DEFAULT_DELTA = 0.05
DEFAULT_GAMMA = 0.01


class NeedTwoClasses(ValueError):
    pass


class NoIncorrectSamples(UserWarning):
    """The classifier made no mistakes on the validation set."""


@dataclass(frozen=True)
class Confidence:
    encoding_fidelity: float
    logit_difference: float

    @property
    def value(self) -> float:
        return self.encoding_fidelity + self.logit_difference / 2


def logit_differences(logits: np.ndarray) -> np.ndarray:
    """Gap between the largest and second-largest logit of every row."""
    z = np.atleast_2d(np.asarray(logits, dtype=float))
    if z.shape[1] < 2:
        raise NeedTwoClasses(f"need at least two logits, got {z.shape[1]}")
    top2 = np.sort(z, axis=1)[:, -2:]
    return top2[:, 1] - top2[:, 0]


def confidence(encoding_fidelity: float, logits) -> Confidence:
    return Confidence(float(encoding_fidelity), float(logit_differences(logits)[0]))


def confidence_values(fidelities: np.ndarray, logits: np.ndarray) -> np.ndarray:
    return np.asarray(fidelities, dtype=float) + logit_differences(logits) / 2


@dataclass(frozen=True)
class ThresholdSpec:
    fidelity_threshold: float
    logit_threshold: float
    delta: float = DEFAULT_DELTA
    gamma: float = DEFAULT_GAMMA
    validation_checksum: str = ""

    @property
    def value(self) -> float:
        return self.fidelity_threshold + self.logit_threshold / 2

    @classmethod
    def constant(cls, value: float) -> "ThresholdSpec":
        """A threshold of the given total value (all of it on the fidelity part)."""
        return cls(float(value), 0.0, 0.0, 0.0)

    def to_record(self) -> dict:
        record = asdict(self)
        record["value"] = self.value
        return record

    @classmethod
    def from_record(cls, record: dict) -> "ThresholdSpec":
        spec = cls(
            record["fidelity_threshold"],
            record["logit_threshold"],
            record["delta"],
            record["gamma"],
            record.get("validation_checksum", ""),
        )
        if "value" in record and abs(spec.value - record["value"]) > 1e-12:
            raise ValueError(f"threshold record is inconsistent: value {record['value']} != {spec.value}")
        return spec

    def save(self, path) -> Path:
        path = Path(path)
        path.write_text(json.dumps(self.to_record(), indent=2, sort_keys=True) + "\n")
        return path

    @classmethod
    def load(cls, path) -> "ThresholdSpec":
        return cls.from_record(json.loads(Path(path).read_text()))


def calibrate_threshold(
    validation_fidelities,
    validation_logits,
    validation_labels,
    delta: float = DEFAULT_DELTA,
    gamma: float = DEFAULT_GAMMA,
    logit_population: str = "incorrect",
) -> ThresholdSpec:
    """Threshold from clean validation data.

    The fidelity part is the linearly interpolated 1st percentile of the
    validation fidelities minus ``delta``. The logit part is the mean top-two
    logit gap minus ``gamma``, averaged over the misclassified validation
    samples (``logit_population="incorrect"``) or over all of them (``"all"``).
    """
    fids = np.asarray(validation_fidelities, dtype=float)
    logits = np.atleast_2d(np.asarray(validation_logits, dtype=float))
    labels = np.asarray(validation_labels, dtype=int)
    if fids.size == 0 or logits.shape[0] == 0:
        raise ValueError("validation set is empty")
    if not (fids.shape[0] == logits.shape[0] == labels.shape[0]):
        raise LengthMismatch("fidelities, logits and labels differ in length")
    fidelity_threshold = float(np.percentile(fids, 1, method="linear")) - delta

    gaps = logit_differences(logits)
    if logit_population == "incorrect":
        wrong = predict_from_logits(logits) != labels
        if not wrong.any():
            warnings.warn("no misclassified validation samples; logit threshold falls back to -gamma",
                          NoIncorrectSamples, stacklevel=2)
            logit_threshold = -gamma
        else:
            logit_threshold = float(gaps[wrong].mean()) - gamma
    elif logit_population == "all":
        logit_threshold = float(gaps.mean()) - gamma
    else:
        raise ValueError(f"logit_population must be 'incorrect' or 'all', got {logit_population!r}")
    checksum = array_sha256(fids, logits, labels)
    return ThresholdSpec(fidelity_threshold, logit_threshold, delta, gamma, checksum)


@dataclass(frozen=True)
class Verdict:
    """Decision for one sample. ``label`` is the classifier's argmax either way."""

    accepted: bool
    label: int
    confidence: Confidence
    threshold_used: float

    @property
    def outcome(self) -> int:
        return self.label if self.accepted else REJECTED


def decide(fidelity: float, logits, threshold: ThresholdSpec) -> Verdict:
    conf = confidence(fidelity, logits)
    # reject strictly below the threshold; ties accept
    return Verdict(conf.value >= threshold.value, int(np.argmax(logits)), conf, threshold.value)


def qaepp_classify(classifier, autoencoder, x, threshold: ThresholdSpec) -> Verdict:
    recon, fid = autoencoder.reconstruct(np.asarray(x, dtype=float)[None, :])
    logits = classifier.decision_function(recon)[0]
    return decide(float(fid[0]), logits, threshold)


@dataclass(frozen=True)
class OutcomeTable:
    correct_accept: int
    incorrect_reject: int
    incorrect_accept: int
    correct_reject: int

    @property
    def total(self) -> int:
        return self.correct_accept + self.incorrect_reject + self.incorrect_accept + self.correct_reject

    @property
    def accuracy(self) -> float:
        return (self.correct_accept + self.incorrect_reject) / self.total if self.total else math.nan

    @property
    def rejected(self) -> int:
        return self.incorrect_reject + self.correct_reject

    def as_dict(self) -> dict:
        return {**asdict(self), "total": self.total, "accuracy": self.accuracy}


def outcome_counts(accepted, true_labels, predictions) -> OutcomeTable:
    accepted = np.asarray(accepted, dtype=bool)
    true_labels = np.asarray(true_labels)
    predictions = np.asarray(predictions)
    if not (accepted.shape == true_labels.shape == predictions.shape):
        raise LengthMismatch(f"lengths differ: {accepted.shape}, {true_labels.shape}, {predictions.shape}")
    correct = predictions == true_labels
    return OutcomeTable(
        int(np.sum(accepted & correct)),
        int(np.sum(~accepted & ~correct)),
        int(np.sum(accepted & ~correct)),
        int(np.sum(~accepted & correct)),
    )


def score_outcomes(verdicts: Sequence[Verdict], true_labels, vqc_predictions) -> OutcomeTable:
    """Four-way outcome counts; accepted-correct and rejected-incorrect both score."""
    if len(verdicts) != len(true_labels) or len(verdicts) != len(vqc_predictions):
        raise LengthMismatch(f"{len(verdicts)} verdicts, {len(true_labels)} labels, {len(vqc_predictions)} predictions")
    return outcome_counts([v.accepted for v in verdicts], true_labels, vqc_predictions)


class QAEPlusPlus(ClassifierMixin, BaseEstimator):
    """Purify with a fitted autoencoder, classify, and reject low-confidence samples.

    ``fit`` calibrates the threshold on clean validation data; the wrapped
    estimators must already be fitted. ``predict`` returns ``-1`` for rejected
    samples and ``score`` the outcome accuracy (accepted-correct plus
    rejected-incorrect).
    """

    def __init__(self, classifier, autoencoder, delta=DEFAULT_DELTA, gamma=DEFAULT_GAMMA,
                 logit_population="incorrect", threshold=None):
        self.classifier = classifier
        self.autoencoder = autoencoder
        self.delta = delta
        self.gamma = gamma
        self.logit_population = logit_population
        self.threshold = threshold

    def fit(self, X, y):
        if self.threshold is not None:
            self.threshold_ = self.threshold
        else:
            recon, fid = self.autoencoder.reconstruct(X)
            logits = self.classifier.decision_function(recon)
            self.threshold_ = calibrate_threshold(fid, logits, y, self.delta, self.gamma, self.logit_population)
        self.classes_ = self.classifier.classes_
        return self

    def evaluate(self, X) -> dict:
        """Per-sample arrays: reconstructions, fidelities, logits, predictions, confidences, accepted."""
        check_is_fitted(self, "threshold_")
        recon, fid = self.autoencoder.reconstruct(X)
        logits = self.classifier.decision_function(recon)
        conf = confidence_values(fid, logits)
        return {
            "reconstruction": recon,
            "fidelity": fid,
            "logits": logits,
            "prediction": predict_from_logits(logits),
            "confidence": conf,
            "accepted": conf >= self.threshold_.value,
        }

    def decide(self, X) -> list[Verdict]:
        ev = self.evaluate(X)
        t = self.threshold_.value
        return [
            Verdict(bool(a), int(p), Confidence(float(f), float(g)), t)
            for a, p, f, g in zip(ev["accepted"], ev["prediction"], ev["fidelity"], logit_differences(ev["logits"]))
        ]

    def predict(self, X) -> np.ndarray:
        ev = self.evaluate(X)
        return np.where(ev["accepted"], ev["prediction"], REJECTED)

    def outcomes(self, X, y) -> OutcomeTable:
        ev = self.evaluate(X)
        return outcome_counts(ev["accepted"], y, ev["prediction"])

    def score(self, X, y, sample_weight=None) -> float:
        return self.outcomes(X, y).accuracy
