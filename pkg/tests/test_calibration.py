import numpy as np
import pytest

from mgtkit.calibration import (
    CalibrationParams,
    beta,
    build_adjacency,
    calibrated_token_scores,
    enhance,
    final_calibration,
    mean_field_calibrate,
)
from mgtkit.detectors import METHODS, aggregate_mean
from mgtkit.errors import ValidationError
from mgtkit.records import UnaryProbabilities, normalize_scores
from mgtkit.synth import default_spec, synth_corpus

from conftest import make_record

BETA_ONE_T0 = -10**6  # drives the positional weight to exactly 1 everywhere


def straight_line_update(p, w, t0, iterations):
    """Independent dense implementation of the iterative update."""
    p = np.asarray(p, dtype=float)
    n = p.size
    adjacency = np.zeros((n, n))
    for i in range(1, n):  # pair {i, i+1} 1-based, later position governs
        adjacency[i - 1, i] = adjacency[i, i - 1] = 1.0 / (1.0 + np.exp(-(i + 1 - t0)))
    coupling = np.full((2, 2), w) * np.array([[-1.0, 1.0], [1.0, -1.0]])
    q = np.stack([np.clip(1 - p, 1e-12, 1 - 1e-12), np.clip(p, 1e-12, 1 - 1e-12)], axis=1)
    for _ in range(iterations):
        logits = np.log(q) - adjacency @ q @ coupling
        out = np.empty_like(q)
        for t in range(n):
            e = np.exp(logits[t] - logits[t].max())
            out[t] = e / e.sum()
        q = out
    return q


class TestBeta:
    def test_center_is_half(self):
        assert beta(20, 20) == 0.5

    def test_three_steps_after_center(self):
        assert beta(23, 20) == pytest.approx(0.952574, abs=1e-6)

    def test_far_before_center(self):
        value = beta(1, 20)
        assert value < 1e-8
        assert value == pytest.approx(5.6e-9, rel=0.02)

    def test_monotone(self):
        js = np.arange(1, 1001)
        values = beta(js, 20)
        assert np.all(np.diff(values) >= 0)
        # strict where the sigmoid is numerically resolvable
        window = values[(js > 0) & (js < 55)]
        assert np.all(np.diff(window) > 0)


class TestBuildAdjacency:
    def test_single_token_empty(self):
        assert build_adjacency(1, 20).weights == {}

    def test_three_tokens_later_position_rule(self):
        adj = build_adjacency(3, 2)
        assert adj.weights[(1, 2)] == adj.weights[(2, 1)] == 0.5  # beta(2, 2)
        expected = 1.0 / (1.0 + np.exp(-1.0))  # beta(3, 2)
        assert adj.weights[(2, 3)] == adj.weights[(3, 2)] == pytest.approx(expected, abs=1e-15)

    def test_weights_are_in_unit_interval(self):
        adj = build_adjacency(30, 20)
        values = np.array(list(adj.weights.values()))
        assert np.all(values > 0) and np.all(values < 1)

    def test_only_adjacent_pairs(self):
        adj = build_adjacency(5, 2)
        assert all(abs(i - j) == 1 for i, j in adj.weights)


class TestMeanFieldCalibrate:
    def test_zero_coupling_exact_fixpoint(self, rng):
        p = UnaryProbabilities(rng.random(40))
        params = CalibrationParams(w=np.zeros((2, 2)), t0=20, iterations=10)
        q = mean_field_calibrate(p, params)
        q0 = np.stack([np.clip(1 - p.p, 1e-12, 1 - 1e-12),
                       np.clip(p.p, 1e-12, 1 - 1e-12)], axis=1)
        assert np.array_equal(q.q, q0)

    def test_single_token_fixpoint(self):
        p = UnaryProbabilities(np.array([0.8]))
        q = mean_field_calibrate(p, CalibrationParams.uniform(2.0))
        assert np.array_equal(q.q, np.stack([1.0 - p.p, p.p], axis=1))

    def test_three_token_hand_case(self):
        p = np.array([0.9, 0.5, 0.9])
        params = CalibrationParams.uniform(1.0, t0=0, iterations=1)
        q = mean_field_calibrate(UnaryProbabilities(p), params)
        oracle = straight_line_update(p, w=1.0, t0=0, iterations=1)
        assert np.allclose(q.q, oracle, atol=1e-12)
        assert q.q[1, 1] > 0.5
        assert q.q[1, 1] == pytest.approx(0.9494727448122215, abs=1e-12)

    def test_matches_straight_line_for_many_iterations(self, rng):
        p = rng.random(17)
        params = CalibrationParams.uniform(0.7, t0=5, iterations=10)
        q = mean_field_calibrate(UnaryProbabilities(p), params)
        oracle = straight_line_update(p, w=0.7, t0=5, iterations=10)
        assert np.allclose(q.q, oracle, atol=1e-10)

    def test_rows_stay_normalized_each_iteration(self, rng):
        for _ in range(10):
            n = int(rng.integers(2, 200))
            p = UnaryProbabilities(rng.random(n))
            params = CalibrationParams(w=rng.random((2, 2)) * 2, t0=20, iterations=10)
            deviations = []
            mean_field_calibrate(
                p, params,
                on_iteration=lambda q: deviations.append(np.abs(q.sum(axis=1) - 1).max()),
            )
            assert len(deviations) == 10
            assert max(deviations) < 1e-9

    def test_clamping_handles_extreme_probabilities(self):
        p = UnaryProbabilities(np.array([0.0, 1.0, 0.0]))
        q = mean_field_calibrate(p, CalibrationParams.uniform(1.0))
        assert np.all(np.isfinite(q.q))

    def test_locality_one_iteration(self, rng):
        n = 30
        base = rng.random(n)
        params = CalibrationParams.uniform(1.0, t0=5, iterations=1)
        q_base = mean_field_calibrate(UnaryProbabilities(base), params).q
        t = 14
        moved = base.copy()
        moved[t] = 1.0 - moved[t]
        q_moved = mean_field_calibrate(UnaryProbabilities(moved), params).q
        changed = np.where(np.any(q_base != q_moved, axis=1))[0]
        assert set(changed) <= {t - 1, t, t + 1}

    def test_deterministic(self, rng):
        p = UnaryProbabilities(rng.random(25))
        params = CalibrationParams.uniform(1.3, t0=10, iterations=7)
        a = mean_field_calibrate(p, params).q
        b = mean_field_calibrate(p, params).q
        assert np.array_equal(a, b)

    def test_invalid_params(self):
        with pytest.raises(ValidationError):
            CalibrationParams(w=np.array([[1.0, -0.1], [0.0, 0.0]]))
        with pytest.raises(ValidationError):
            CalibrationParams.uniform(1.0, iterations=0)


class TestFinalCalibration:
    def test_small_t0_close_to_beliefs(self, rng):
        p = UnaryProbabilities(rng.random(6))
        q = mean_field_calibrate(p, CalibrationParams.uniform(0.5, t0=0))
        out = final_calibration(q, 0)
        expected = beta(np.arange(1, 7), 0) * q.machine
        assert np.array_equal(out, expected)
        assert np.all(beta(np.arange(1, 7), 0) > 0.73)

    def test_unit_beliefs_recover_beta_curve(self):
        from mgtkit.calibration import BeliefMatrix

        n = 50
        q = BeliefMatrix(np.column_stack([np.zeros(n), np.ones(n)]))
        out = final_calibration(q, 20)
        assert np.array_equal(out, beta(np.arange(1, n + 1), 20))

    def test_damping_strictly_below_beliefs(self, rng):
        p = UnaryProbabilities(rng.random(30))
        q = mean_field_calibrate(p, CalibrationParams.uniform(1.0, t0=20))
        out = final_calibration(q, 20)
        b = beta(np.arange(1, 31), 20)
        mask = b < 1.0
        assert np.all(out[mask] < q.machine[mask])
        assert np.all(out > 0) and np.all(out < 1)


class TestEnhance:
    def test_disabled_calibration_reduces_to_normalized_base(self, rng):
        scores = rng.standard_normal(40)
        rec = make_record(scores)
        params = CalibrationParams(w=np.zeros((2, 2)), t0=BETA_ONE_T0, iterations=10)
        expected = aggregate_mean(normalize_scores(scores).p)
        assert enhance(rec, METHODS["likelihood"], params) == pytest.approx(expected, abs=1e-12)

    def test_constant_stream_neutral_beliefs(self):
        n = 60
        rec = make_record(np.full(n, 3.25))
        params = CalibrationParams.uniform(1.0, t0=20, iterations=10)
        # degenerate normalization pins every belief at 0.5; the output is
        # the position-damped mean of those neutral beliefs
        expected = 0.5 * beta(np.arange(2, n + 1), 20).mean()
        assert enhance(rec, METHODS["likelihood"], params) == pytest.approx(expected, abs=1e-12)
        flat = CalibrationParams.uniform(1.0, t0=BETA_ONE_T0, iterations=10)
        assert enhance(rec, METHODS["likelihood"], flat) == pytest.approx(0.5, abs=1e-12)

    def test_machine_scores_above_human_on_synthetic(self):
        corpus = synth_corpus(default_spec(seed=1, n_machine=120, n_human=120))
        params = CalibrationParams.uniform(1.0, t0=20, iterations=10)
        by_label = {"machine": [], "human": []}
        for rec in corpus:
            by_label[rec.label].append(enhance(rec, METHODS["likelihood"], params))
        assert np.mean(by_label["machine"]) > np.mean(by_label["human"])

    def test_needs_two_tokens(self):
        rec = make_record([1.0])
        with pytest.raises(ValidationError):
            calibrated_token_scores(rec, METHODS["likelihood"], CalibrationParams.uniform(1.0))

    def test_zscore_family_uses_raw_aux(self):
        scores = np.array([-3.0, -1.0, -2.0, -0.5])
        rec = make_record(scores, aux={"perturbed": [-2.0, -1.5]})
        params = CalibrationParams(w=np.zeros((2, 2)), t0=BETA_ONE_T0, iterations=1)
        cal = calibrated_token_scores(rec, METHODS["detectgpt"], params)
        assert np.allclose(cal, normalize_scores(scores).p, atol=1e-12)
        from mgtkit.detectors import aggregate_zscore

        expected = aggregate_zscore(cal[1:].mean(), np.array([-2.0, -1.5]))
        assert enhance(rec, METHODS["detectgpt"], params) == pytest.approx(expected, abs=1e-12)
