import json

import numpy as np
import pytest

from tikgraph.datasets import gen_clique_distance, gen_diameter, split_dataset
from tikgraph.model import SolverOpts, init_model
from tikgraph.training import (
    AdamState,
    EarlyStopper,
    TaskEncoding,
    TrainConfig,
    TrainingDiverged,
    adam_step,
    checkpoint_from_dict,
    checkpoint_to_dict,
    export_explanation,
    forward_dataset,
    train,
)


def tiny_config(**kw):
    base = dict(learning_rate=5e-3, batch_size=64, patience=5, max_epochs=8, seed=0,
                hidden=4, qnet_layers=2, qnet_order=2, qnet_hidden=4, q_init=0.1,
                pooling="mean_sum_max_layernorm", loss="cross_entropy")
    base.update(kw)
    return TrainConfig(**base)


@pytest.fixture(scope="module")
def clique_splits():
    samples = gen_clique_distance(80, seed=5)
    return split_dataset(samples, seed=5)


class TestAdam:
    def test_zero_gradient_leaves_parameters(self):
        params = {"w": np.array([1.0, -2.0])}
        state = AdamState()
        adam_step(params, {"w": np.zeros(2)}, state, lr=0.1)
        np.testing.assert_array_equal(params["w"], [1.0, -2.0])
        assert state.t == 1

    def test_first_step_is_signed_lr_for_large_gradient(self):
        params = {"w": np.array([0.0, 0.0])}
        adam_step(params, {"w": np.array([1e6, -1e6])}, AdamState(), lr=0.01)
        np.testing.assert_allclose(params["w"], [-0.01, 0.01], rtol=1e-7)

    def test_quadratic_convergence(self):
        # minimize 0.5 (x - 3)^2 from x = 1; oracle minimizer is 3
        params = {"x": np.array([1.0])}
        state = AdamState()
        for _ in range(100):
            grad = params["x"] - 3.0
            adam_step(params, {"x": grad}, state, lr=0.3)
        assert abs(params["x"][0] - 3.0) <= 1e-3

    def test_nan_gradient_rejected_with_name(self):
        params = {"w": np.zeros(2)}
        with pytest.raises(TrainingDiverged, match="'w'"):
            adam_step(params, {"w": np.array([np.nan, 0.0])}, AdamState(), lr=0.1)

    def test_untracked_keys_ignored(self):
        params = {"w": np.zeros(2)}
        adam_step(params, {"w": np.ones(2), "__x__": np.ones(3)}, AdamState(), lr=0.1)


class TestEarlyStopper:
    def test_patience_one_stops_after_two_epochs(self):
        stopper = EarlyStopper(patience=1)
        assert not stopper.update(1, 1.0)
        assert stopper.update(2, 2.0)  # strictly worse: stop at epoch 2
        assert stopper.best_epoch == 1

    def test_equal_loss_counts_as_stale(self):
        stopper = EarlyStopper(patience=2)
        assert not stopper.update(1, 1.0)
        assert not stopper.update(2, 1.0)
        assert stopper.update(3, 1.0)

    def test_improvement_resets(self):
        stopper = EarlyStopper(patience=2)
        stopper.update(1, 1.0)
        stopper.update(2, 1.1)
        assert not stopper.update(3, 0.9)
        assert stopper.best_epoch == 3
        assert stopper.stale == 0


class TestTaskEncoding:
    def test_classification_maps_observed_labels(self):
        samples = gen_clique_distance(20, seed=1)
        enc = TaskEncoding.fit(samples, "cross_entropy")
        assert enc.classes == [0, 1]
        np.testing.assert_array_equal(enc.encode([1, 0, 1]), [1, 0, 1])
        with pytest.raises(ValueError, match="class range"):
            enc.encode([7])

    def test_regression_standardization_round_trip(self):
        samples = gen_diameter(30, seed=2)
        enc = TaskEncoding.fit(samples, "mae")
        labels = np.array([s.label for s in samples])
        encoded = enc.encode(labels)
        assert abs(encoded.mean()) < 1e-12
        pred = encoded[:, None]
        np.testing.assert_allclose(enc.decode_predictions(pred), labels, atol=1e-10)

    def test_metrics(self):
        enc = TaskEncoding(task="classification", classes=[0, 1])
        pred = np.array([[2.0, -1.0], [0.0, 3.0]])
        assert enc.metric(pred, [0, 0]) == 0.5
        renc = TaskEncoding(task="regression", target_mean=10.0, target_std=2.0)
        pred = np.array([[1.0], [0.0]])  # decodes to 12, 10
        assert renc.metric(pred, [13.0, 10.0]) == pytest.approx(0.5)


class TestTrainLoop:
    def test_constant_val_loss_stops_after_patience(self, clique_splits):
        tr, va, te = clique_splits
        # lr ~ 0 freezes the model: no strict improvement after epoch 1
        cfg = tiny_config(learning_rate=1e-30, patience=1, max_epochs=8)
        result = train(tr, va, te, cfg)
        assert result.report["final"]["epochs_run"] == 2
        assert result.report["final"]["best_epoch"] == 1

    def test_deterministic_given_seed(self, clique_splits):
        tr, va, te = clique_splits
        cfg = tiny_config(max_epochs=3, patience=3)
        r1 = train(tr, va, te, cfg)
        r2 = train(tr, va, te, cfg)
        assert json.dumps(r1.report, sort_keys=True) == json.dumps(r2.report, sort_keys=True)
        for name, arr in r1.params.to_flat().items():
            np.testing.assert_array_equal(arr, r2.params.to_flat()[name])

    def test_report_shape(self, clique_splits):
        tr, va, te = clique_splits
        result = train(tr, va, te, tiny_config(max_epochs=3, patience=3))
        assert set(result.report["final"]) == {"test_metric", "epochs_run", "best_epoch"}
        for row in result.report["epochs"]:
            assert set(row) == {"train_loss", "val_loss", "val_metric"}

    def test_trace_records_have_schema(self, clique_splits):
        tr, va, te = clique_splits
        records = []
        train(tr, va, te, tiny_config(max_epochs=1, patience=1), trace=records.append)
        assert records
        assert set(records[0]) == {"graph_id", "channel", "col", "iters", "residual", "converged"}

    def test_restores_best_parameters(self, clique_splits):
        tr, va, te = clique_splits
        cfg = tiny_config(max_epochs=6, patience=6, learning_rate=0.05)
        result = train(tr, va, te, cfg)
        best_epoch = result.report["final"]["best_epoch"]
        losses = [row["val_loss"] for row in result.report["epochs"]]
        assert losses[best_epoch - 1] == min(losses)
        enc = result.encoding
        opts = cfg.solver_opts()
        pred = forward_dataset(result.params, va, opts)
        val_loss_re = None
        from tikgraph.model import loss_and_grad

        val_loss_re, _ = loss_and_grad(pred, enc.encode([s.label for s in va]), cfg.loss)
        assert val_loss_re == pytest.approx(min(losses), rel=1e-12)

    def test_nan_loss_aborts_with_report(self, clique_splits, monkeypatch):
        tr, va, te = clique_splits
        import tikgraph.training as tmod

        real = tmod.loss_and_grad
        calls = {"n": 0}

        def poisoned(pred, labels, kind):
            calls["n"] += 1
            if calls["n"] == 2:
                return float("nan"), np.zeros_like(np.atleast_2d(pred))
            return real(pred, labels, kind)

        monkeypatch.setattr(tmod, "loss_and_grad", poisoned)
        with pytest.raises(TrainingDiverged):
            train(tr, va, te, tiny_config(max_epochs=3, patience=3, batch_size=16))

    def test_empty_split_rejected(self, clique_splits):
        tr, va, te = clique_splits
        with pytest.raises(ValueError, match="nonempty"):
            train(tr, va, [], tiny_config())


class TestCheckpoint:
    def test_round_trip_preserves_predictions(self, clique_splits):
        tr, va, te = clique_splits
        cfg = tiny_config(max_epochs=2, patience=2)
        result = train(tr, va, te, cfg)
        blob = checkpoint_to_dict(result.params, result.encoding, cfg)
        blob = json.loads(json.dumps(blob))  # force a serialization cycle
        params2, enc2 = checkpoint_from_dict(blob)
        opts = cfg.solver_opts()
        p1 = forward_dataset(result.params, te, opts)
        p2 = forward_dataset(params2, te, opts)
        np.testing.assert_array_equal(p1, p2)
        assert enc2.classes == result.encoding.classes

    def test_schema_version_checked(self):
        with pytest.raises(ValueError, match="schema version"):
            checkpoint_from_dict({"schema_version": 99})

    def test_wrong_shape_rejected(self, clique_splits):
        tr, va, te = clique_splits
        cfg = tiny_config(max_epochs=1, patience=1)
        result = train(tr, va, te, cfg)
        blob = checkpoint_to_dict(result.params, result.encoding)
        blob["params"]["w"]["data"] = blob["params"]["w"]["data"][:-1]
        with pytest.raises(ValueError):
            checkpoint_from_dict(blob)


class TestExplanation:
    def test_node_count_and_purity(self, clique_splits):
        tr, va, te = clique_splits
        cfg = tiny_config(max_epochs=2, patience=2)
        result = train(tr, va, te, cfg)
        sample = te[0]
        exp1 = export_explanation(result.params, result.encoding, sample)
        exp2 = export_explanation(result.params, result.encoding, sample)
        assert json.dumps(exp1, sort_keys=True) == json.dumps(exp2, sort_keys=True)
        assert len(exp1["q"][0]) == sample.graph.n
        assert len(exp1["filters"]) == 1
        assert len(exp1["filters"][0]["samples"]) == 101
        assert exp1["label"] == sample.label

    def test_huge_importance_regime_exported(self, clique_splits):
        # head bias log(1e6) puts every node in the feature-preserving regime
        tr, va, te = clique_splits
        from tikgraph.model import ModelSpec

        spec = ModelSpec(d_in=1, hidden=4, out_dim=2, q_init=1e6,
                         qnet_layers=2, qnet_order=2, qnet_hidden=4, pooling="mean")
        params = init_model(spec, np.random.SeedSequence(0))
        enc = TaskEncoding(task="classification", classes=[0, 1])
        exp = export_explanation(params, enc, te[0])
        assert all(v >= 1e3 for v in exp["q"][0])


class TestConfigValidation:
    def test_positive_fields_enforced(self):
        with pytest.raises(ValueError, match="positive"):
            TrainConfig(learning_rate=-1.0)
        with pytest.raises(ValueError, match="patience"):
            TrainConfig(patience=10, max_epochs=5)
