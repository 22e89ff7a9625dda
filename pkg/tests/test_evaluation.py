"""Metrics and improvement aggregation."""

import numpy as np
import pytest

from sinecast.autodiff import Tensor
from sinecast.data import TimeSeriesTable, make_windows
from sinecast.errors import ConfigError, ShapeError
from sinecast.evaluation import (
    EvalResult,
    ImprovementRow,
    aggregate_improvements,
    evaluate,
    improvement,
    mae,
)
from sinecast.models import Forecaster, ModelConfig


class TestMae:
    def test_identical_arrays(self):
        x = np.random.default_rng(0).normal(size=(2, 3, 4))
        assert mae(x, x.copy()) == 0.0

    def test_small_example(self):
        assert mae(np.array([1.0, 2.0]), np.array([2.0, 4.0])) == 1.5

    def test_matches_flat_loop(self):
        rng = np.random.default_rng(1)
        p = rng.normal(size=(3, 4, 2))
        t = rng.normal(size=(3, 4, 2))
        total = 0.0
        for i in range(3):
            for j in range(4):
                for c in range(2):
                    total += abs(p[i, j, c] - t[i, j, c])
        assert abs(mae(p, t) - total / 24) < 1e-12

    def test_accepts_tensors(self):
        assert mae(Tensor(np.ones((2, 2))), Tensor(np.zeros((2, 2)))) == 1.0

    def test_shape_mismatch(self):
        with pytest.raises(ShapeError):
            mae(np.zeros((2, 2)), np.zeros((2, 3)))


class TestEvaluate:
    def _periodic(self, n=200, period=8):
        t = np.arange(n, dtype=float)
        return TimeSeriesTable(
            name="periodic", values=np.sin(2 * np.pi * (t % period) / period).reshape(n, 1)
        )

    def test_persistence_on_divisible_period_is_exact(self):
        table = self._periodic()
        ds = make_windows(table, input_len=16, horizon=8)
        model = Forecaster(ModelConfig(variant="Persistence", input_len=16, horizon=8, channels=1))
        result = evaluate(model, ds, dataset_name="periodic")
        assert result.mae < 1e-12
        assert result.n_windows == len(ds)

    def test_bitwise_deterministic(self):
        table = TimeSeriesTable(name="r", values=np.random.default_rng(2).normal(size=(150, 2)))
        ds = make_windows(table, input_len=12, horizon=6)
        model = Forecaster(ModelConfig(variant="Linear", input_len=12, horizon=6, channels=2, seed=1))
        a = evaluate(model, ds, dataset_name="r")
        b = evaluate(model, ds, dataset_name="r")
        assert a.mae == b.mae

    def test_batched_equals_single_shot(self):
        table = TimeSeriesTable(name="r", values=np.random.default_rng(3).normal(size=(90, 1)))
        ds = make_windows(table, input_len=10, horizon=5)
        model = Forecaster(ModelConfig(variant="Linear", input_len=10, horizon=5, channels=1, seed=2))
        small = evaluate(model, ds, batch_size=7).mae
        big = evaluate(model, ds, batch_size=10_000).mae
        assert abs(small - big) < 1e-12

    def test_empty_test_rejected(self):
        table = self._periodic(20)
        ds = make_windows(table, input_len=16, horizon=8)
        assert len(ds) == 0
        model = Forecaster(ModelConfig(variant="Persistence", input_len=16, horizon=8, channels=1))
        with pytest.raises(ConfigError, match="empty"):
            evaluate(model, ds)


class TestImprovement:
    def test_equal_is_zero(self):
        assert improvement(0.5, 0.5) == 0.0

    def test_published_pair(self):
        got = improvement(0.480, 0.392)
        assert abs(got - (0.480 - 0.392) / 0.480) < 1e-15
        assert abs(got - 0.18333333333333332) < 1e-9

    def test_double_is_minus_one(self):
        assert improvement(0.4, 0.8) == -1.0

    def test_antitone_in_model_mae(self):
        vals = [improvement(1.0, m) for m in (0.2, 0.5, 0.9, 1.5)]
        assert all(a > b for a, b in zip(vals, vals[1:]))

    def test_nonpositive_baseline_rejected(self):
        with pytest.raises(ConfigError):
            improvement(0.0, 0.5)
        with pytest.raises(ConfigError):
            improvement(-1.0, 0.5)


def _result(dataset, model, horizon, value):
    return EvalResult(dataset=dataset, model=model, horizon=horizon, input_len=horizon,
                      mae=value, n_windows=10)


class TestAggregateImprovements:
    def test_single_dataset_row(self):
        base = [_result("a", "Persistence", 96, 0.5)]
        res = [_result("a", "SLP", 96, 0.4)]
        rows = aggregate_improvements(res, base)
        assert len(rows) == 1
        assert rows[0].model == "SLP" and rows[0].horizon == 96
        assert abs(rows[0].mean_improvement - 0.2) < 1e-15
        assert rows[0].beats_baseline

    def test_mean_over_datasets(self):
        base = [_result("a", "Persistence", 96, 1.0), _result("b", "Persistence", 96, 1.0)]
        res = [_result("a", "SLP", 96, 0.8), _result("b", "SLP", 96, 0.6)]
        rows = aggregate_improvements(res, base)
        assert abs(rows[0].mean_improvement - 0.3) < 1e-15
        assert rows[0].n_datasets == 2

    def test_separate_rows_per_horizon_and_model(self):
        base = [_result("a", "Persistence", h, 1.0) for h in (96, 192)]
        res = [_result("a", m, h, 0.9) for m in ("SLP", "MLP") for h in (96, 192)]
        rows = aggregate_improvements(res, base)
        assert {(r.model, r.horizon) for r in rows} == {
            ("SLP", 96), ("SLP", 192), ("MLP", 96), ("MLP", 192)
        }

    def test_worse_than_baseline_is_negative(self):
        base = [_result("a", "Persistence", 96, 0.5)]
        rows = aggregate_improvements([_result("a", "MLP", 96, 0.9)], base)
        assert rows[0].mean_improvement < 0
        assert not rows[0].beats_baseline

    def test_missing_baseline_named(self):
        base = [_result("a", "Persistence", 96, 0.5)]
        with pytest.raises(ConfigError, match="horizon=192"):
            aggregate_improvements([_result("a", "SLP", 192, 0.4)], base)

    def test_improvement_row_cap(self):
        with pytest.raises(ConfigError, match="exceeds 1"):
            ImprovementRow(model="SLP", horizon=96, mean_improvement=1.2)
