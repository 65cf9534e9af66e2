import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from transduct import (
    BackendConfig,
    FeatureVector,
    RunConfig,
    SerializationConfig,
    build_bundle,
    build_plan,
    compute_metrics,
    derive_error_detection_set,
    run_accuracy_improvement,
    run_error_detection,
)
from transduct.backends import prompt_hash
from transduct.core import argmax_index
from transduct.errors import ContractError
from transduct.workflow import base_classifier_report


def fv(*v):
    return FeatureVector.of(v)


def oracle_metrics(predictions, truths, class_count):
    """Independent confusion/metric computation, plain loops."""
    confusion = [[0] * class_count for _ in range(class_count)]
    for p, t in zip(predictions, truths):
        confusion[t][p] += 1
    recalls = []
    per_class = []
    for c in range(class_count):
        support = sum(confusion[c])
        r = confusion[c][c] / support if support else 0.0
        per_class.append(r)
        if support:
            recalls.append(r)
    return confusion, per_class, sum(recalls) / len(recalls)


class TestComputeMetrics:
    def test_perfect_predictions(self):
        report = compute_metrics([0, 1, 2, 0], [0, 1, 2, 0], 3)
        assert report.balanced_accuracy == 1.0
        assert report.per_class_accuracy == (1.0, 1.0, 1.0)
        assert report.precision is None  # only reported for binary tasks

    def test_hand_confusion(self):
        # TP=3 FP=2 FN=1 TN=4 with positive class 1
        predictions = [1, 1, 1, 0, 1, 1, 0, 0, 0, 0]
        truths = [1, 1, 1, 1, 0, 0, 0, 0, 0, 0]
        report = compute_metrics(predictions, truths, 2, positive_class=1)
        assert report.precision == pytest.approx(0.6)
        assert report.recall == pytest.approx(0.75)
        assert report.f_score == pytest.approx(2 / 3)
        # balanced accuracy is the mean of per-class recalls: (3/4 + 4/6) / 2
        assert report.balanced_accuracy == pytest.approx(17 / 24)

    def test_all_one_class_on_balanced_binary(self):
        report = compute_metrics([0, 0, 0, 0], [0, 0, 1, 1], 2)
        assert report.balanced_accuracy == pytest.approx(0.5)
        assert report.recall == 0.0
        assert report.f_score == 0.0

    def test_positive_class_flip(self):
        predictions = [1, 1, 0, 0]
        truths = [1, 0, 1, 0]
        rep_pos1 = compute_metrics(predictions, truths, 2, positive_class=1)
        rep_pos0 = compute_metrics(predictions, truths, 2, positive_class=0)
        assert rep_pos1.precision == pytest.approx(0.5)
        assert rep_pos0.precision == pytest.approx(0.5)
        assert rep_pos1.balanced_accuracy == rep_pos0.balanced_accuracy

    def test_confusion_sums_to_n(self):
        rng = np.random.default_rng(0)
        preds = rng.integers(0, 4, size=100)
        truths = rng.integers(0, 4, size=100)
        report = compute_metrics(list(preds), list(truths), 4)
        assert sum(sum(row) for row in report.confusion) == 100
        assert report.n_test == 100

    def test_empty_rejected(self):
        with pytest.raises(ContractError):
            compute_metrics([], [], 2)

    @settings(max_examples=60, deadline=None)
    @given(st.integers(min_value=0, max_value=100_000))
    def test_matches_independent_oracle(self, seed):
        rng = np.random.default_rng(seed)
        c = int(rng.integers(2, 5))
        n = int(rng.integers(1, 40))
        preds = [int(x) for x in rng.integers(0, c, size=n)]
        truths = [int(x) for x in rng.integers(0, c, size=n)]
        report = compute_metrics(preds, truths, c)
        confusion, per_class, balanced = oracle_metrics(preds, truths, c)
        assert [list(r) for r in report.confusion] == confusion
        assert report.per_class_accuracy == pytest.approx(per_class)
        assert report.balanced_accuracy == pytest.approx(balanced)


def echo_truth_fixtures(ref, test_probs, truths, ratio=0.5, interleave=True, ser=SerializationConfig()):
    """Mock fixture table scripting the backend to answer the ground truth."""
    plan = build_plan(ref, ratio, interleave)
    table = {}
    for f, t in zip(test_probs, truths):
        bundle = build_bundle(ref, f, plan, ser)
        table[prompt_hash(bundle.prompt)] = f" {t}"
    return table


VAL_PROBS = [fv(0.9, 0.1), fv(0.2, 0.8), fv(0.4, 0.6), fv(0.7, 0.3), fv(0.3, 0.7), fv(0.6, 0.4)]
VAL_TRUE = [0, 1, 0, 1, 1, 0]  # errors at indices 2 and 3
TEST_PROBS = [
    fv(0.8, 0.2), fv(0.1, 0.9), fv(0.45, 0.55), fv(0.65, 0.35), fv(0.25, 0.75),
    fv(0.9, 0.1), fv(0.4, 0.6), fv(0.55, 0.45), fv(0.35, 0.65), fv(0.15, 0.85),
]
TEST_TRUE = [0, 1, 0, 1, 1, 0, 0, 0, 1, 1]


def error_truths():
    return [1 if argmax_index(p.values) != t else 0 for p, t in zip(TEST_PROBS, TEST_TRUE)]


class TestRunErrorDetection:
    def test_perfect_mock_detector(self):
        ref = derive_error_detection_set(VAL_PROBS, VAL_TRUE)
        truths = error_truths()
        table = echo_truth_fixtures(ref, TEST_PROBS, truths)
        cfg = RunConfig(
            backend=BackendConfig(kind="mock", mock_fixtures=table),
            selection_ratio=0.5,
        )
        report = run_error_detection(VAL_PROBS, VAL_TRUE, TEST_PROBS, TEST_TRUE, cfg)
        assert report.precision == 1.0
        assert report.recall == 1.0
        assert report.f_score == 1.0
        assert report.balanced_accuracy == 1.0
        assert report.fallback_count == 0

    def test_always_zero_mock(self):
        cfg = RunConfig(backend=BackendConfig(kind="mock", mock_default=" 0"), selection_ratio=0.5)
        report = run_error_detection(VAL_PROBS, VAL_TRUE, TEST_PROBS, TEST_TRUE, cfg)
        truths = error_truths()
        assert sum(truths) == 3  # fixture has 3 base-classifier errors
        assert report.recall == 0.0
        assert report.balanced_accuracy == pytest.approx(0.5)

    def test_local_backend_equals_1nn_oracle_pipeline(self):
        from conftest import oracle_1nn

        cfg = RunConfig(
            backend=BackendConfig(kind="local-attention"),
            selection_ratio=1.0,
            serialization=SerializationConfig(decimals=6),
        )
        report = run_error_detection(VAL_PROBS, VAL_TRUE, TEST_PROBS, TEST_TRUE, cfg)
        ref = derive_error_detection_set(VAL_PROBS, VAL_TRUE)
        plan = build_plan(ref, 1.0, True)
        selected = ref.subset(list(plan.ordered_indices))
        # re-run the pipeline with a brute-force 1NN on the rounded prompts
        from transduct.prompt import parse_prompt

        ser = SerializationConfig(decimals=6)
        preds = []
        for f in TEST_PROBS:
            bundle = build_bundle(ref, f, plan, ser)
            ref_p, f_p = parse_prompt(bundle.prompt)
            preds.append(oracle_1nn(ref_p, f_p))
        expected = compute_metrics(preds, error_truths(), 2)
        assert report.confusion == expected.confusion
        assert report.balanced_accuracy == expected.balanced_accuracy


THREE_CLASS_PROTOS = {
    0: (0.8, 0.1, 0.1),
    1: (0.1, 0.8, 0.1),
    2: (0.15, 0.55, 0.3),  # systematic confusion: class 2 mass leaks into class 1
}


def three_class_split(rng, n_per_class):
    probs, trues = [], []
    for c, proto in THREE_CLASS_PROTOS.items():
        for _ in range(n_per_class):
            jitter = rng.normal(0, 0.01, size=3)
            v = np.clip(np.asarray(proto) + jitter, 0.01, None)
            probs.append(FeatureVector.of(v / v.sum()))
            trues.append(c)
    return probs, trues


class TestRunAccuracyImprovement:
    def test_mock_echoing_argmax_matches_base(self):
        rng = np.random.default_rng(3)
        val_probs, val_true = three_class_split(rng, 4)
        test_probs, test_true = three_class_split(rng, 3)
        from transduct.core import ReferenceSet

        ref = ReferenceSet.build(val_probs, val_true, 3)
        argmaxes = [argmax_index(p.values) for p in test_probs]
        table = echo_truth_fixtures(ref, test_probs, argmaxes)
        cfg = RunConfig(
            backend=BackendConfig(kind="mock", mock_fixtures=table), selection_ratio=0.5
        )
        report, base = run_accuracy_improvement(val_probs, val_true, test_probs, test_true, cfg)
        assert report.confusion == base.confusion
        assert report.balanced_accuracy == base.balanced_accuracy

    def test_local_backend_fixes_systematic_confusion(self):
        rng = np.random.default_rng(4)
        val_probs, val_true = three_class_split(rng, 6)
        test_probs, test_true = three_class_split(rng, 5)
        cfg = RunConfig(backend=BackendConfig(kind="local-attention"), selection_ratio=1.0)
        report, base = run_accuracy_improvement(val_probs, val_true, test_probs, test_true, cfg)
        # base argmax calls every class-2 sample class 1
        assert base.per_class_accuracy[2] == 0.0
        assert report.per_class_accuracy[2] == 1.0
        assert report.balanced_accuracy >= base.balanced_accuracy

    def test_per_class_accuracies_average_to_balanced(self):
        rng = np.random.default_rng(5)
        val_probs, val_true = three_class_split(rng, 4)
        test_probs, test_true = three_class_split(rng, 3)
        cfg = RunConfig(backend=BackendConfig(kind="local-attention"), selection_ratio=0.5)
        report, _ = run_accuracy_improvement(val_probs, val_true, test_probs, test_true, cfg)
        assert report.balanced_accuracy == pytest.approx(
            sum(report.per_class_accuracy) / 3
        )

    def test_feature_dimension_must_match_class_count(self):
        probs = [fv(0.6, 0.3, 0.1), fv(0.2, 0.7, 0.1)]
        with pytest.raises(ContractError):
            run_accuracy_improvement(probs, [0, 1], probs, [0, 1], RunConfig())

    def test_base_report_never_predicted_class(self):
        # a class the base argmax never predicts gets per-class accuracy 0
        probs = [fv(0.6, 0.3, 0.1), fv(0.5, 0.4, 0.1), fv(0.2, 0.7, 0.1)]
        trues = [0, 2, 1]
        base = base_classifier_report(probs, trues, 3)
        assert base.per_class_accuracy[2] == 0.0


class TestWorkflowProperties:
    def test_part1_shared_across_test_samples(self, small_ref):
        plan = build_plan(small_ref, 0.5)
        b1 = build_bundle(small_ref, fv(0.7, 0.3), plan)
        b2 = build_bundle(small_ref, fv(0.2, 0.8), plan)
        assert b1.part1 == b2.part1
        assert b1.part2 != b2.part2

    def test_end_to_end_determinism(self):
        cfg = RunConfig(backend=BackendConfig(kind="local-attention"), selection_ratio=0.5)
        first = run_error_detection(VAL_PROBS, VAL_TRUE, TEST_PROBS, TEST_TRUE, cfg)
        second = run_error_detection(VAL_PROBS, VAL_TRUE, TEST_PROBS, TEST_TRUE, cfg)
        assert first == second

    def test_knn_and_ubknn_methods_run(self):
        from transduct import KnnConfig, UbKnnConfig

        # the derived reference has only 2 error samples, so keep k small
        configs = [
            RunConfig(method="knn", knn=KnnConfig(k_neighbors=3)),
            RunConfig(method="ubknn", ubknn=UbKnnConfig(KnnConfig(k_neighbors=3))),
        ]
        for cfg in configs:
            report = run_error_detection(VAL_PROBS, VAL_TRUE, TEST_PROBS, TEST_TRUE, cfg)
            assert report.n_test == len(TEST_PROBS)
            assert report.fallback_count == 0
