import math

import numpy as np
import pytest

from activepool.acquisition import (
    score_bald,
    score_entropy,
    select_coreset_greedy,
    select_dbal,
    select_entropy,
    select_least_confidence,
    select_random,
)
from activepool.errors import ConfigurationError, PreconditionError, ValidationError
from activepool.model import EmbeddingMatrix, PredictionTensor

from reference import (
    ref_bald,
    ref_coreset_greedy,
    ref_covering_radius,
    ref_entropy,
    ref_max_prob,
    ref_optimal_kcenter_radius,
    ref_select_ascending,
    ref_select_descending,
)


def tensor_from_rows(rows, ids=None, passes=1):
    values = np.asarray(rows, dtype=np.float64)
    if values.ndim == 2:
        values = values[np.newaxis, :, :]
    assert values.shape[0] == passes
    if ids is None:
        ids = list(range(values.shape[1]))
    return PredictionTensor(values=values, sample_ids=ids)


def random_prediction_tensor(rng, u, n, t=1):
    raw = rng.random((t, u, n)) + 1e-3
    return PredictionTensor(values=raw / raw.sum(axis=2, keepdims=True),
                            sample_ids=list(rng.permutation(u * 3)[:u]))


class TestScoreEntropy:
    def test_uniform_nine(self):
        assert score_entropy([1 / 9] * 9) == pytest.approx(math.log(9), abs=1e-12)

    def test_one_hot_is_zero(self):
        assert score_entropy([0.0, 0.0, 1.0, 0.0]) == 0.0

    def test_derived_value(self):
        # independent summation of -sum p ln p
        assert ref_entropy([0.7, 0.2, 0.1]) == pytest.approx(0.8018185525433373, abs=1e-12)
        assert score_entropy([0.7, 0.2, 0.1]) == pytest.approx(0.80182, abs=1e-5)

    def test_negative_entry_rejected(self):
        with pytest.raises(ValidationError):
            score_entropy([-0.1, 0.6, 0.5])

    def test_bad_sum_rejected(self):
        with pytest.raises(ValidationError):
            score_entropy([0.6, 0.6])

    def test_bounds_property(self):
        rng = np.random.default_rng(0)
        for _ in range(200):
            n = int(rng.integers(2, 12))
            row = rng.random(n) + 1e-9
            row /= row.sum()
            h = score_entropy(row)
            assert 0.0 <= h <= math.log(n) + 1e-12


class TestLeastConfidence:
    def test_fixture_rows(self):
        tensor = tensor_from_rows([[0.9, 0.1], [0.6, 0.4], [0.5, 0.5]], ids=[0, 1, 2])
        batch = select_least_confidence(tensor, b=2)
        assert batch.selected_ids == [2, 1]
        assert batch.scores == pytest.approx([0.5, 0.6])

    def test_tie_break_smaller_id(self):
        tensor = tensor_from_rows([[0.7, 0.3]] * 4, ids=[9, 2, 5, 0])
        batch = select_least_confidence(tensor, b=2)
        assert batch.selected_ids == [0, 2]

    def test_exhaustion(self):
        rng = np.random.default_rng(1)
        tensor = random_prediction_tensor(rng, u=7, n=3)
        batch = select_least_confidence(tensor, b=7)
        assert sorted(batch.selected_ids) == sorted(tensor.sample_ids)

    def test_b_zero_rejected(self):
        tensor = tensor_from_rows([[0.5, 0.5]])
        with pytest.raises(ConfigurationError):
            select_least_confidence(tensor, b=0)

    def test_requires_single_pass(self):
        rng = np.random.default_rng(2)
        tensor = random_prediction_tensor(rng, u=3, n=2, t=2)
        with pytest.raises(PreconditionError):
            select_least_confidence(tensor, b=1)


class TestEntropySelection:
    def test_uniform_row_wins(self):
        tensor = tensor_from_rows([[1.0, 0.0], [0.5, 0.5], [0.8, 0.2]], ids=[4, 5, 6])
        batch = select_entropy(tensor, b=1)
        assert batch.selected_ids == [5]

    def test_binary_order_matches_least_confidence(self):
        rng = np.random.default_rng(7)
        for _ in range(100):
            u = int(rng.integers(2, 20))
            tensor = random_prediction_tensor(rng, u=u, n=2)
            by_entropy = select_entropy(tensor, b=u).selected_ids
            by_lc = select_least_confidence(tensor, b=u).selected_ids
            assert by_entropy == by_lc

    def test_exhaustion(self):
        rng = np.random.default_rng(3)
        tensor = random_prediction_tensor(rng, u=5, n=4)
        assert len(select_entropy(tensor, b=99).selected_ids) == 5


class TestScoreBald:
    def test_identical_passes_vanish(self):
        assert score_bald([[0.3, 0.7]] * 5) == 0.0

    def test_opposing_one_hot_passes(self):
        assert score_bald([[1.0, 0.0], [0.0, 1.0]]) == pytest.approx(math.log(2), abs=1e-12)

    def test_derived_value(self):
        # H([0.7,0.3]) - (H([0.8,0.2]) + H([0.6,0.4]))/2, each via the
        # independent evaluator
        expected = ref_bald([[0.8, 0.2], [0.6, 0.4]])
        assert expected == pytest.approx(0.02415, abs=1e-5)
        assert score_bald([[0.8, 0.2], [0.6, 0.4]]) == pytest.approx(expected, abs=1e-12)

    def test_bounds_property(self):
        rng = np.random.default_rng(4)
        for _ in range(200):
            t = int(rng.integers(1, 8))
            n = int(rng.integers(2, 9))
            raw = rng.random((t, n)) + 1e-6
            rows = raw / raw.sum(axis=1, keepdims=True)
            i = score_bald(rows)
            h_mean = ref_entropy(rows.mean(axis=0))
            assert -1e-12 <= i <= h_mean + 1e-12
            assert h_mean <= math.log(n) + 1e-12


class TestDbalSelection:
    def test_only_disagreeing_sample_wins(self):
        values = np.zeros((2, 3, 2))
        values[:, 0] = [0.9, 0.1]
        values[:, 1] = [0.2, 0.8]
        values[0, 2] = [1.0, 0.0]
        values[1, 2] = [0.0, 1.0]
        tensor = PredictionTensor(values=values, sample_ids=[3, 4, 5])
        batch = select_dbal(tensor, b=1)
        assert batch.selected_ids == [5]

    def test_single_pass_rejected(self):
        tensor = tensor_from_rows([[0.5, 0.5]])
        with pytest.raises(PreconditionError):
            select_dbal(tensor, b=1)

    def test_identical_passes_degenerate_with_warning(self):
        values = np.tile(np.array([[[0.4, 0.6], [0.7, 0.3]]]), (3, 1, 1))
        tensor = PredictionTensor(values=values, sample_ids=[1, 0])
        with pytest.warns(UserWarning, match="identical"):
            batch = select_dbal(tensor, b=2)
        assert batch.scores == [0.0, 0.0]
        assert batch.selected_ids == [0, 1]  # pure id tie-break

    def test_oracle_equivalence(self):
        rng = np.random.default_rng(5)
        for _ in range(100):
            u = int(rng.integers(2, 30))
            t = int(rng.integers(2, 6))
            tensor = random_prediction_tensor(rng, u=u, n=int(rng.integers(2, 6)), t=t)
            batch = select_dbal(tensor, b=5)
            scores = {i: ref_bald(tensor.values[:, j])
                      for j, i in enumerate(tensor.sample_ids)}
            assert batch.selected_ids == ref_select_descending(scores, 5)


class TestCoresetGreedy:
    def test_hand_traced_one_dimensional(self):
        unl = EmbeddingMatrix(values=np.array([[1.0], [2.0], [5.0]]), sample_ids=[0, 1, 2])
        lab = EmbeddingMatrix(values=np.array([[0.0]]), sample_ids=[100])
        batch = select_coreset_greedy(unl, lab, b=2)
        assert batch.selected_ids == [2, 1]
        assert batch.scores == [5.0, 2.0]

    def test_single_point(self):
        unl = EmbeddingMatrix(values=np.array([[3.0, 4.0]]), sample_ids=[7])
        lab = EmbeddingMatrix(values=np.array([[0.0, 0.0]]), sample_ids=[1])
        batch = select_coreset_greedy(unl, lab, b=1)
        assert batch.selected_ids == [7]
        assert batch.scores == [5.0]

    def test_empty_labeled_rejected(self):
        unl = EmbeddingMatrix(values=np.array([[1.0]]), sample_ids=[0])
        lab = EmbeddingMatrix(values=np.zeros((0, 1)), sample_ids=[])
        with pytest.raises(PreconditionError):
            select_coreset_greedy(unl, lab, b=1)

    def test_oracle_equivalence_random_instances(self):
        rng = np.random.default_rng(6)
        for _ in range(40):
            u = int(rng.integers(2, 60))
            l_count = int(rng.integers(1, 10))
            e = int(rng.integers(1, 6))
            pts = rng.normal(size=(u, e))
            labs = rng.normal(size=(l_count, e))
            ids = [int(i) for i in rng.permutation(u * 2)[:u]]
            batch = select_coreset_greedy(
                EmbeddingMatrix(values=pts, sample_ids=ids),
                EmbeddingMatrix(values=labs, sample_ids=list(range(u * 2, u * 2 + l_count))),
                b=min(8, u),
            )
            ref_ids, ref_scores = ref_coreset_greedy(
                {i: pts[j] for j, i in enumerate(ids)}, [row for row in labs], b=min(8, u))
            assert batch.selected_ids == ref_ids
            assert batch.scores == pytest.approx(ref_scores, abs=1e-9)

    def test_two_approximation_on_exhaustive_instances(self):
        rng = np.random.default_rng(8)
        for _ in range(20):
            u = int(rng.integers(3, 9))
            b = int(rng.integers(1, 4))
            b = min(b, u)
            pts = rng.normal(size=(u, 2))
            lab = rng.normal(size=(1, 2))
            batch = select_coreset_greedy(
                EmbeddingMatrix(values=pts, sample_ids=list(range(u))),
                EmbeddingMatrix(values=lab, sample_ids=[999]),
                b=b,
            )
            unl = {i: pts[i] for i in range(u)}
            centers = [lab[0]] + [pts[i] for i in batch.selected_ids]
            greedy_radius = ref_covering_radius(list(unl.values()), centers)
            optimal = ref_optimal_kcenter_radius(unl, [lab[0]], k=b)
            assert greedy_radius <= 2 * optimal + 1e-9


class TestRandomSelection:
    def test_exhaustion_is_permutation(self):
        batch = select_random([5, 9, 2, 4], b=4, seed=3)
        assert sorted(batch.selected_ids) == [2, 4, 5, 9]
        assert batch.scores == [0.0] * 4

    def test_seeded_determinism(self):
        a = select_random(list(range(50)), b=10, seed=11)
        b = select_random(list(range(50)), b=10, seed=11)
        assert a.selected_ids == b.selected_ids

    def test_uniform_frequency(self):
        counts = {i: 0 for i in range(4)}
        for trial in range(10_000):
            batch = select_random([0, 1, 2, 3], b=1, seed=trial)
            counts[batch.selected_ids[0]] += 1
        for i in range(4):
            assert abs(counts[i] / 10_000 - 0.25) < 0.02


class TestSelectionProperties:
    def test_monotone_transform_invariance(self):
        rng = np.random.default_rng(9)
        for _ in range(50):
            u = int(rng.integers(2, 25))
            tensor = random_prediction_tensor(rng, u=u, n=3)
            rows = tensor.values[0]
            ids = tensor.sample_ids
            batch = select_entropy(tensor, b=5)
            # oracle ranks by a strictly monotone transform of the entropy
            transformed = {i: 3.0 * math.exp(ref_entropy(rows[j])) + 1.0
                           for j, i in enumerate(ids)}
            assert batch.selected_ids == ref_select_descending(transformed, 5)
            lc = select_least_confidence(tensor, b=5)
            transformed_lc = {i: math.log(ref_max_prob(rows[j]))
                              for j, i in enumerate(ids)}
            assert lc.selected_ids == ref_select_ascending(transformed_lc, 5)

    def test_permutation_equivariance(self):
        rng = np.random.default_rng(10)
        tensor = random_prediction_tensor(rng, u=12, n=4)
        perm = rng.permutation(12)
        shuffled = PredictionTensor(values=tensor.values[:, perm, :],
                                    sample_ids=[tensor.sample_ids[int(j)] for j in perm])
        for select in (select_entropy, select_least_confidence):
            assert select(tensor, b=6).selected_ids == select(shuffled, b=6).selected_ids

    def test_batch_exhaustion_all_strategies(self):
        rng = np.random.default_rng(12)
        u = 9
        det = random_prediction_tensor(rng, u=u, n=3)
        raw = np.repeat(det.values, 3, axis=0) + rng.random((3, u, 3)) * 0.01
        sto = PredictionTensor(values=raw / raw.sum(axis=2, keepdims=True),
                               sample_ids=det.sample_ids)
        emb_u = EmbeddingMatrix(values=rng.normal(size=(u, 4)), sample_ids=det.sample_ids)
        emb_l = EmbeddingMatrix(values=rng.normal(size=(2, 4)), sample_ids=[100, 101])
        for batch in (
            select_entropy(det, b=99),
            select_least_confidence(det, b=99),
            select_dbal(sto, b=99),
            select_coreset_greedy(emb_u, emb_l, b=99),
            select_random(det.sample_ids, b=99, seed=0),
        ):
            assert sorted(batch.selected_ids) == sorted(det.sample_ids)
