import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import percentile_linear
from qaepp.defense import (
    REJECTED,
    Confidence,
    LengthMismatch,
    NeedTwoClasses,
    NoIncorrectSamples,
    OutcomeTable,
    QAEPlusPlus,
    ThresholdSpec,
    Verdict,
    calibrate_threshold,
    confidence,
    decide,
    logit_differences,
    outcome_counts,
    qaepp_classify,
    score_outcomes,
)
from qaepp.qae import QuantumAutoencoder
from qaepp.vqc import VQCClassifier


def verdicts(accepted):
    c = Confidence(1.0, 0.0)
    return [Verdict(bool(a), 0, c, 0.0) for a in accepted]


class TestConfidence:
    def test_clean_anchor_value(self):
        # 0.9754 + 0.1977 / 2
        assert Confidence(0.9754, 0.1977).value == pytest.approx(1.07425, abs=1e-12)

    def test_attacked_anchor_value(self):
        assert Confidence(0.7781, 0.0513).value == pytest.approx(0.80375, abs=1e-6)

    def test_flat_logits(self):
        c = confidence(1.0, np.full(10, 0.3))
        assert c.logit_difference == 0.0 and c.value == 1.0

    def test_top_two_gap(self):
        np.testing.assert_allclose(logit_differences([[0.1, 0.9, -0.4, 0.5]]), [0.4])

    def test_need_two_classes(self):
        with pytest.raises(NeedTwoClasses):
            confidence(0.5, [0.3])


class TestThreshold:
    def test_constant_fidelities(self):
        logits = np.array([[1.0, 0.0], [0.0, 0.4]])
        spec = calibrate_threshold([0.8, 0.8], logits, [1, 1])
        assert spec.fidelity_threshold == pytest.approx(0.75, abs=1e-15)
        assert spec.logit_threshold == pytest.approx(1.0 - 0.01)
        assert spec.value == pytest.approx(0.75 + 0.99 / 2)

    def test_defaults(self):
        spec = calibrate_threshold([0.9], [[1.0, 0.0]], [1])
        assert (spec.delta, spec.gamma) == (0.05, 0.01)

    def test_percentile_matches_oracle(self):
        fids = np.arange(200) / 200
        rng = np.random.default_rng(0)
        rng.shuffle(fids)
        logits = np.tile([0.0, 1.0], (200, 1))
        spec = calibrate_threshold(fids, logits, np.zeros(200, dtype=int), delta=0.0)
        assert abs(spec.fidelity_threshold - percentile_linear(fids, 1)) <= 1e-12

    @settings(max_examples=30, deadline=None)
    @given(st.lists(st.floats(0, 1), min_size=1, max_size=60))
    def test_percentile_oracle_property(self, fids):
        spec = calibrate_threshold(fids, np.tile([0.0, 1.0], (len(fids), 1)), np.zeros(len(fids), dtype=int), delta=0)
        assert abs(spec.fidelity_threshold - percentile_linear(fids, 1)) <= 1e-12

    def test_population_switch(self):
        logits = np.array([[1.0, 0.0], [0.0, 0.2], [0.6, 0.0]])
        labels = np.array([0, 0, 0])
        wrong = calibrate_threshold([1, 1, 1], logits, labels, gamma=0)
        every = calibrate_threshold([1, 1, 1], logits, labels, gamma=0, logit_population="all")
        assert wrong.logit_threshold == pytest.approx(0.2)
        assert every.logit_threshold == pytest.approx(1.8 / 3)
        with pytest.raises(ValueError):
            calibrate_threshold([1], [[1.0, 0.0]], [0], logit_population="some")

    def test_perfect_classifier_warns(self):
        with pytest.warns(NoIncorrectSamples):
            spec = calibrate_threshold([0.9, 0.95], [[1.0, 0.0], [0.0, 1.0]], [0, 1])
        assert spec.logit_threshold == -0.01

    def test_errors(self):
        with pytest.raises(ValueError):
            calibrate_threshold([], np.zeros((0, 2)), [])
        with pytest.raises(LengthMismatch):
            calibrate_threshold([0.9, 0.9], [[1.0, 0.0]], [0])

    def test_record_roundtrip(self, tmp_path):
        spec = calibrate_threshold([0.9, 0.7, 0.8], [[1, 0], [0, 0.5], [0.2, 0]], [1, 1, 1])
        path = spec.save(tmp_path / "t.json")
        back = ThresholdSpec.load(path)
        assert back == spec
        record = json.loads(path.read_text())
        assert abs(record["value"] - (record["fidelity_threshold"] + record["logit_threshold"] / 2)) <= 1e-12
        assert len(record["validation_checksum"]) == 64
        record["value"] += 1
        with pytest.raises(ValueError):
            ThresholdSpec.from_record(record)


class TestDecide:
    def test_tie_accepts(self):
        logits = [0.5, 0.1]
        c = confidence(0.8, logits).value
        assert decide(0.8, logits, ThresholdSpec.constant(c)).accepted

    def test_just_above_rejects(self):
        assert not decide(0.8, [0.5, 0.1], ThresholdSpec.constant(1.0 + 1e-12)).accepted

    @settings(max_examples=50, deadline=None)
    @given(st.floats(0, 1), st.lists(st.floats(-1, 1), min_size=2, max_size=6), st.floats(-1, 3), st.floats(0, 2))
    def test_threshold_monotone(self, fid, logits, t, bump):
        lo = decide(fid, logits, ThresholdSpec.constant(t))
        hi = decide(fid, logits, ThresholdSpec.constant(t + bump))
        assert not (hi.accepted and not lo.accepted)
        assert hi.label == lo.label == int(np.argmax(logits))

    def test_outcome_label(self):
        v = decide(0.1, [0.0, 0.3], ThresholdSpec.constant(5))
        assert v.outcome == REJECTED and v.label == 1


class TestScoring:
    def test_anchor_counts(self):
        t = OutcomeTable(494, 5751, 503, 1252)
        assert t.total == 8000
        assert t.accuracy == pytest.approx(0.780625, abs=1e-12)
        assert round(100 * t.accuracy, 2) == 78.06

    def test_anchor_counts_via_verdicts(self):
        # build per-sample data realizing (494, 5751, 503, 1252)
        accepted = [True] * 494 + [False] * 5751 + [True] * 503 + [False] * 1252
        correct = [True] * 494 + [False] * 5751 + [False] * 503 + [True] * 1252
        labels = np.zeros(8000, dtype=int)
        preds = np.where(correct, 0, 1)
        t = score_outcomes(verdicts(accepted), labels, preds)
        assert (t.correct_accept, t.incorrect_reject, t.incorrect_accept, t.correct_reject) == (494, 5751, 503, 1252)
        assert t.accuracy == pytest.approx(0.7806, abs=1e-4)

    def test_all_accepted_correct(self):
        t = score_outcomes(verdicts([True] * 5), [1] * 5, [1] * 5)
        assert t.as_dict()["correct_accept"] == 5 and t.accuracy == 1.0

    def test_all_rejected_incorrect(self):
        t = score_outcomes(verdicts([False] * 5), [1] * 5, [0] * 5)
        assert t.incorrect_reject == 5 and t.accuracy == 1.0

    def test_length_mismatch(self):
        with pytest.raises(LengthMismatch):
            score_outcomes(verdicts([True]), [0, 1], [0, 1])
        with pytest.raises(LengthMismatch):
            outcome_counts([True], [0, 1], [0, 1])

    def test_empty_table(self):
        assert math.isnan(OutcomeTable(0, 0, 0, 0).accuracy)

    @settings(max_examples=50, deadline=None)
    @given(st.integers(0, 2**32 - 1), st.integers(1, 300))
    def test_partition_and_identity(self, seed, n):
        rng = np.random.default_rng(seed)
        accepted = rng.random(n) < 0.5
        y = rng.integers(0, 3, size=n)
        p = rng.integers(0, 3, size=n)
        t = outcome_counts(accepted, y, p)
        assert t.total == n
        direct = np.mean(np.where(accepted, p == y, p != y))
        assert t.accuracy == direct


@pytest.fixture(scope="module")
def pipeline():
    vqc = VQCClassifier(n_qubits=4, n_layers=2, n_classes=4, seed=1).init_params()
    qae = QuantumAutoencoder(n_qubits=4, n_layers=2, n_trash=1, seed=2).init_params()
    rng = np.random.default_rng(3)
    return vqc, qae, rng.random((30, 16)), rng.integers(0, 4, size=30)


class TestPipeline:
    def test_degenerate_thresholds(self, pipeline):
        vqc, qae, X, _ = pipeline
        recon, _ = qae.reconstruct(X[:3])
        expected = vqc.predict(recon)
        for x, label in zip(X[:3], expected):
            low = qaepp_classify(vqc, qae, x, ThresholdSpec.constant(-10))
            assert low.accepted and low.outcome == label
            assert not qaepp_classify(vqc, qae, x, ThresholdSpec.constant(10)).accepted

    def test_estimator_agrees_with_single_sample_path(self, pipeline):
        vqc, qae, X, y = pipeline
        model = QAEPlusPlus(vqc, qae).fit(X, y)
        singles = [qaepp_classify(vqc, qae, x, model.threshold_) for x in X]
        np.testing.assert_array_equal(model.predict(X), [v.outcome for v in singles])
        batch = model.decide(X)
        for a, b in zip(batch, singles):
            assert a.accepted == b.accepted and a.label == b.label
            assert a.confidence.value == pytest.approx(b.confidence.value, abs=1e-12)
        t = model.outcomes(X, y)
        assert t.total == len(X)
        assert model.score(X, y) == t.accuracy

    def test_fixed_threshold(self, pipeline):
        vqc, qae, X, y = pipeline
        model = QAEPlusPlus(vqc, qae, threshold=ThresholdSpec.constant(10)).fit(X, y)
        assert np.all(model.predict(X) == REJECTED)
