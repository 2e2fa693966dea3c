"""Predictor construction, the batch contract, and the line protocol."""

from __future__ import annotations

import threading

import numpy as np
import pytest

from limestab import (
    ExternalPredictor,
    Predictor,
    PredictorError,
    builtin_catalog,
    make_builtin,
    make_predictor,
    predict,
)


def rows(*values):
    return np.array(values, dtype=np.float64)


class TestBuiltins:
    def test_linear_hand_case(self):
        p = make_builtin("linear:1,2,0")
        assert predict(p, rows([1.0, 1.0, 1.0])) == pytest.approx([3.0])

    def test_linear_zero_coefficients(self):
        p = make_builtin("linear:0,0")
        out = predict(p, rows([4.2, -7.0], [0.0, 0.0]))
        assert out.tolist() == [0.0, 0.0]

    def test_linear_ignores_extra_columns(self):
        p = make_builtin("linear:2,3")
        assert predict(p, rows([1.0, 1.0, 99.0, -99.0])) == pytest.approx([5.0])

    def test_linear_rejects_narrow_rows(self):
        p = make_builtin("linear:1,2,3")
        with pytest.raises(PredictorError, match="at least 3 features"):
            predict(p, rows([1.0, 2.0]))

    def test_logistic_midpoint(self):
        p = make_builtin("logistic-linear:0")
        assert predict(p, rows([123.0])) == pytest.approx([0.5])

    def test_logistic_range(self):
        p = make_builtin("logistic-linear:5,-3")
        out = predict(p, np.random.default_rng(0).normal(size=(200, 2)))
        assert np.all(out > 0.0) and np.all(out < 1.0)

    def test_step_threshold(self):
        p = make_builtin("step:0:0.5")
        out = predict(p, rows([0.4], [0.6], [0.5]))
        assert out.tolist() == [0.0, 1.0, 0.0]

    def test_friedman1_at_origin(self):
        p = make_builtin("friedman1")
        assert predict(p, rows([0.0] * 5)) == pytest.approx([5.0])

    def test_friedman1_formula(self):
        p = make_builtin("friedman1")
        x = np.random.default_rng(1).uniform(size=(50, 5))
        expected = (
            10.0 * np.sin(np.pi * x[:, 0] * x[:, 1])
            + 20.0 * (x[:, 2] - 0.5) ** 2
            + 10.0 * x[:, 3]
            + 5.0 * x[:, 4]
        )
        assert predict(p, x) == pytest.approx(expected, abs=0.0)

    def test_friedman1_needs_five_columns(self):
        with pytest.raises(PredictorError, match="at least 5"):
            predict(make_builtin("friedman1"), rows([1.0, 2.0, 3.0]))

    def test_sum_is_width_agnostic(self):
        p = make_builtin("sum")
        assert predict(p, rows([1.0, 2.0, 3.0])) == pytest.approx([6.0])
        assert predict(p, rows([5.0])) == pytest.approx([5.0])

    def test_unknown_name(self):
        with pytest.raises(PredictorError, match="unknown builtin"):
            make_builtin("polynomial:1,2")

    def test_bad_coefficient_list(self):
        with pytest.raises(PredictorError, match="coefficient"):
            make_builtin("linear:1,abc")

    def test_empty_coefficient_list(self):
        with pytest.raises(PredictorError, match="coefficient"):
            make_builtin("linear:")

    def test_non_finite_coefficient(self):
        with pytest.raises(PredictorError, match="finite"):
            make_builtin("linear:1,inf")

    def test_bad_step_spec(self):
        with pytest.raises(PredictorError, match="step"):
            make_builtin("step:zero:0.5")
        with pytest.raises(PredictorError, match="step"):
            make_builtin("step:-1:0.5")

    def test_catalog_covers_every_constructor(self):
        names = {key.split(":")[0] for key in builtin_catalog()}
        assert names == {"linear", "logistic-linear", "friedman1", "step", "sum"}

    def test_determinism(self):
        p = make_builtin("friedman1")
        x = np.random.default_rng(2).uniform(size=(100, 5))
        first = predict(p, x)
        second = predict(p, x)
        assert np.array_equal(first, second)


class _CountingSum(Predictor):
    """Sum predictor that records batch sizes, for chunking checks."""

    def __init__(self, batch_limit):
        self.batch_limit = batch_limit
        self.calls = []

    def predict_batch(self, points):
        self.calls.append(points.shape[0])
        return points.sum(axis=1)

    def describe(self):
        return "test:counting-sum"


class _BrokenPredictor(Predictor):
    def __init__(self, values):
        self._values = values

    def predict_batch(self, points):
        return np.asarray(self._values, dtype=np.float64)

    def describe(self):
        return "test:broken"


class TestPredictContract:
    def test_chunking_is_invisible_in_the_result(self):
        x = np.random.default_rng(3).normal(size=(100, 4))
        chunked = _CountingSum(batch_limit=7)
        whole = _CountingSum(batch_limit=10_000)
        assert np.array_equal(predict(chunked, x), predict(whole, x))
        assert chunked.calls == [7] * 14 + [2]
        assert whole.calls == [100]

    def test_rejects_wrong_count(self):
        with pytest.raises(PredictorError, match="returned .* values"):
            predict(_BrokenPredictor([1.0]), rows([1.0], [2.0]))

    def test_rejects_non_finite(self):
        with pytest.raises(PredictorError, match="non-finite"):
            predict(_BrokenPredictor([float("nan")]), rows([1.0]))
        with pytest.raises(PredictorError, match="non-finite"):
            predict(_BrokenPredictor([float("inf")]), rows([1.0]))

    def test_rejects_non_2d_input(self):
        with pytest.raises(ValueError, match="2-D"):
            predict(make_builtin("sum"), np.zeros(5))

    def test_checks_declared_width(self):
        p = _CountingSum(batch_limit=100)
        p.expected_features = 3
        with pytest.raises(PredictorError, match="expects 3 features"):
            predict(p, rows([1.0, 2.0]))


class TestMakePredictor:
    def test_builtin_descriptor(self):
        p = make_predictor("builtin:sum", num_features=4)
        assert p.describe() == "builtin:sum"

    def test_cmd_descriptor_splits_shell_style(self):
        p = make_predictor("cmd:python3 'serve model.json'", num_features=2)
        assert isinstance(p, ExternalPredictor)
        assert p.describe() == "cmd:python3 'serve model.json'"

    def test_rejects_other_kinds(self):
        with pytest.raises(PredictorError, match="builtin:<spec> or cmd:<argv>"):
            make_predictor("http://example.com", num_features=2)
        with pytest.raises(PredictorError, match="builtin:<spec> or cmd:<argv>"):
            make_predictor("builtin:", num_features=2)


class TestExternalRoundTrip:
    def test_matches_row_sums_exactly(self, echo_server_argv):
        x = np.random.default_rng(4).normal(size=(1000, 6))
        # repr() on the far side and %.17g on this side both round-trip
        # IEEE doubles, so the answers must be bit-identical to a local sum.
        expected = np.array([sum(row.tolist()) for row in x])
        with ExternalPredictor(echo_server_argv("sum"), num_features=6) as p:
            out = predict(p, x)
        assert np.array_equal(out, expected)

    def test_three_row_hand_case(self, echo_server_argv):
        with ExternalPredictor(echo_server_argv("sum"), num_features=2) as p:
            out = predict(p, rows([1.0, 2.0], [0.5, 0.25], [-1.0, 1.0]))
        assert out.tolist() == [3.0, 0.75, 0.0]

    def test_single_row_batch(self, echo_server_argv):
        with ExternalPredictor(echo_server_argv("sum"), num_features=3) as p:
            assert predict(p, rows([1.0, 2.0, 3.0])).tolist() == [6.0]

    def test_child_survives_many_batches(self, echo_server_argv):
        rng = np.random.default_rng(5)
        with ExternalPredictor(echo_server_argv("sum"), num_features=4) as p:
            for _ in range(20):
                x = rng.normal(size=(rng.integers(1, 40), 4))
                expected = np.array([sum(row.tolist()) for row in x])
                assert np.array_equal(predict(p, x), expected)

    def test_shared_across_threads(self, echo_server_argv):
        x = np.random.default_rng(6).normal(size=(50, 3))
        expected = [sum(row.tolist()) for row in x]
        failures = []

        def worker(p):
            for _ in range(5):
                out = predict(p, x)
                if out.tolist() != expected:
                    failures.append(out)

        with ExternalPredictor(echo_server_argv("sum"), num_features=3) as p:
            threads = [
                threading.Thread(target=worker, args=(p,)) for _ in range(4)
            ]
            for t in threads:
                t.start()
            for t in threads:
                t.join()
        assert not failures

    def test_close_is_idempotent(self, echo_server_argv):
        p = ExternalPredictor(echo_server_argv("sum"), num_features=2)
        predict(p, rows([1.0, 1.0]))
        p.close()
        p.close()


class TestExternalFailureModes:
    def test_nan_answers_violate_finiteness(self, echo_server_argv):
        with ExternalPredictor(echo_server_argv("nan"), num_features=2) as p:
            with pytest.raises(PredictorError, match="non-finite"):
                predict(p, rows([1.0, 2.0]))

    def test_garbage_answer(self, echo_server_argv):
        with ExternalPredictor(echo_server_argv("garbage"), num_features=2) as p:
            with pytest.raises(PredictorError, match="malformed prediction"):
                predict(p, rows([1.0, 2.0]))

    def test_short_batch(self, echo_server_argv):
        with ExternalPredictor(echo_server_argv("short"), num_features=2) as p:
            with pytest.raises(PredictorError, match="2 predictions for 3 rows"):
                predict(p, rows([1.0, 0.0], [2.0, 0.0], [3.0, 0.0]))

    def test_timeout(self, echo_server_argv):
        p = ExternalPredictor(
            echo_server_argv("slow"), num_features=2, timeout=0.5
        )
        with p:
            with pytest.raises(PredictorError, match="timed out after 0.5s"):
                predict(p, rows([1.0, 2.0]))

    def test_child_dies_before_handshake(self, echo_server_argv):
        with ExternalPredictor(echo_server_argv("dead"), num_features=2) as p:
            with pytest.raises(PredictorError, match="during handshake"):
                predict(p, rows([1.0, 2.0]))

    def test_wrong_handshake_token(self, echo_server_argv):
        with ExternalPredictor(echo_server_argv("noready"), num_features=2) as p:
            with pytest.raises(PredictorError, match="instead of READY"):
                predict(p, rows([1.0, 2.0]))

    def test_missing_binary(self):
        with ExternalPredictor(["/no/such/binary"], num_features=2) as p:
            with pytest.raises(PredictorError, match="cannot start"):
                predict(p, rows([1.0, 2.0]))

    def test_empty_command(self):
        with pytest.raises(PredictorError, match="non-empty command"):
            ExternalPredictor([], num_features=2)

    def test_bad_feature_count(self, echo_server_argv):
        with pytest.raises(PredictorError, match="num_features"):
            ExternalPredictor(echo_server_argv("sum"), num_features=0)

    def test_width_enforced_before_spawn(self, echo_server_argv):
        with ExternalPredictor(echo_server_argv("sum"), num_features=5) as p:
            with pytest.raises(PredictorError, match="expects 5 features"):
                predict(p, rows([1.0, 2.0]))
