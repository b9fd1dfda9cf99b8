"""Training loop: Adam, early stopping on validation loss, reporting, checkpoints."""

from __future__ import annotations

import json
from dataclasses import dataclass, field, asdict

import numpy as np

from .bernstein import filter_to_dict
from .graph import Graph, batch_graphs, graph_to_dict
from .model import (
    ModelParams,
    ModelSpec,
    SolverOpts,
    init_model,
    loss_and_grad,
    model_backward,
    model_forward,
)
from .seeding import child_seed, rng_for

CHECKPOINT_SCHEMA_VERSION = 1


class TrainingDiverged(RuntimeError):
    """Raised when the loss turns non-finite; carries the partial report."""

    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report


@dataclass
class TrainConfig:
    """Run-level knobs. Architecture fields mirror ModelSpec; solver and
    clamping defaults follow the hyperparameter appendix conventions."""

    learning_rate: float = 5e-3
    batch_size: int = 128
    patience: int = 50
    max_epochs: int = 500
    seed: int = 0
    pcg_tol: float = 1e-6
    pcg_max_iter: int = 30
    q_min: float = 1e-10
    q_max: float = 1e10
    pooling: str = "mean_sum_max_layernorm"
    loss: str = "cross_entropy"  # cross_entropy | mae | mse
    hidden: int = 8
    channels: int = 1
    degree: int = 5
    filter_init: str = "linear"
    qnet_layers: int = 5
    qnet_order: int = 3
    qnet_hidden: int = 8
    q_init: float = 0.1
    precond: str = "approx"

    def __post_init__(self):
        for name in ("learning_rate", "batch_size", "patience", "max_epochs",
                     "pcg_tol", "pcg_max_iter", "q_min", "q_max"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.patience > self.max_epochs:
            raise ValueError("patience cannot exceed max_epochs")

    def solver_opts(self) -> SolverOpts:
        return SolverOpts(tol=self.pcg_tol, max_iter=self.pcg_max_iter, precond=self.precond)

    def to_dict(self) -> dict:
        return asdict(self)


# ---------------------------------------------------------------------------
# optimizer


@dataclass
class AdamState:
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)
    t: int = 0


def adam_step(
    params_flat: dict,
    grads: dict,
    state: AdamState,
    lr: float,
    beta1: float = 0.9,
    beta2: float = 0.999,
    eps: float = 1e-8,
):
    """Standard bias-corrected Adam, updating parameter arrays in place.

    Only keys present in grads are touched. Raises on non-finite gradients
    so divergence surfaces with the offending parameter name.
    """
    state.t += 1
    t = state.t
    for name, g in grads.items():
        if name.startswith("__") or name not in params_flat:
            continue
        if not np.all(np.isfinite(g)):
            raise TrainingDiverged(f"non-finite gradient for parameter {name!r}")
        if name not in state.m:
            state.m[name] = np.zeros_like(g)
            state.v[name] = np.zeros_like(g)
        m, v = state.m[name], state.v[name]
        m[...] = beta1 * m + (1 - beta1) * g
        v[...] = beta2 * v + (1 - beta2) * g * g
        mhat = m / (1 - beta1**t)
        vhat = v / (1 - beta2**t)
        params_flat[name] -= lr * mhat / (np.sqrt(vhat) + eps)


class EarlyStopper:
    """Stop after `patience` consecutive epochs without strict improvement."""

    def __init__(self, patience: int):
        self.patience = patience
        self.best = np.inf
        self.best_epoch = 0
        self.stale = 0

    def update(self, epoch: int, val_loss: float) -> bool:
        """Record one epoch; returns True when training should stop."""
        if val_loss < self.best:
            self.best = val_loss
            self.best_epoch = epoch
            self.stale = 0
            return False
        self.stale += 1
        return self.stale >= self.patience


# ---------------------------------------------------------------------------
# dataset plumbing


@dataclass
class TaskEncoding:
    """Label handling shared by training and inference.

    Classification maps observed labels onto 0..C-1; regression standardizes
    targets with train-split statistics (predictions are un-standardized
    before metrics are computed)."""

    task: str
    classes: list | None = None
    target_mean: float = 0.0
    target_std: float = 1.0

    @staticmethod
    def fit(samples, loss_kind: str) -> "TaskEncoding":
        labels = [s.label for s in samples]
        if loss_kind == "cross_entropy":
            classes = sorted({int(l) for l in labels})
            return TaskEncoding(task="classification", classes=classes)
        arr = np.asarray(labels, dtype=float)
        std = float(arr.std())
        return TaskEncoding(
            task="regression",
            target_mean=float(arr.mean()),
            target_std=std if std > 0 else 1.0,
        )

    @property
    def out_dim(self) -> int:
        return len(self.classes) if self.task == "classification" else 1

    def encode(self, labels) -> np.ndarray:
        if self.task == "classification":
            index = {c: i for i, c in enumerate(self.classes)}
            try:
                return np.array([index[int(l)] for l in labels], dtype=int)
            except KeyError as exc:
                raise ValueError(f"label {exc.args[0]} outside the class range") from None
        return (np.asarray(labels, dtype=float) - self.target_mean) / self.target_std

    def decode_predictions(self, pred: np.ndarray):
        if self.task == "classification":
            return np.array([self.classes[i] for i in pred.argmax(axis=1)])
        return pred[:, 0] * self.target_std + self.target_mean

    def metric(self, pred: np.ndarray, labels) -> float:
        """Accuracy for classification, MAE in original units for regression."""
        decoded = self.decode_predictions(pred)
        if self.task == "classification":
            truth = np.array([int(l) for l in labels])
            return float((decoded == truth).mean())
        truth = np.asarray(labels, dtype=float)
        return float(np.abs(decoded - truth).mean())

    def to_dict(self) -> dict:
        return asdict(self)

    @staticmethod
    def from_dict(d: dict) -> "TaskEncoding":
        return TaskEncoding(**d)


def _batches(indices: np.ndarray, batch_size: int):
    for start in range(0, len(indices), batch_size):
        yield indices[start : start + batch_size]


def forward_dataset(params: ModelParams, samples, opts: SolverOpts, batch_size: int = 256):
    """Predictions for a list of samples in eval mode (batch-norm uses running stats)."""
    preds = []
    for idx in _batches(np.arange(len(samples)), batch_size):
        chunk = [samples[i] for i in idx]
        graph, feats, graph_of = batch_graphs([(s.graph, s.features) for s in chunk])
        pred, _ = model_forward(graph, feats, graph_of, params, opts, training=False)
        preds.append(pred)
    return np.vstack(preds)


# ---------------------------------------------------------------------------
# training


@dataclass
class TrainResult:
    params: ModelParams
    encoding: TaskEncoding
    report: dict
    config: TrainConfig


def train(train_samples, val_samples, test_samples, cfg: TrainConfig, trace=None) -> TrainResult:
    """Deterministic training run; restores the best-validation parameters
    before computing the test metric.

    trace, when given, is a callable receiving solver-diagnostic dicts
    (one per solved column) for JSONL emission.
    """
    if not train_samples or not val_samples or not test_samples:
        raise ValueError("train/val/test splits must all be nonempty")
    encoding = TaskEncoding.fit(train_samples, cfg.loss)
    d_in = train_samples[0].features.shape[1]
    spec = ModelSpec(
        d_in=d_in,
        hidden=cfg.hidden,
        out_dim=encoding.out_dim,
        task=encoding.task,
        channels=cfg.channels,
        degree=cfg.degree,
        filter_init=cfg.filter_init,
        qnet_layers=cfg.qnet_layers,
        qnet_order=cfg.qnet_order,
        qnet_hidden=cfg.qnet_hidden,
        q_init=cfg.q_init,
        pooling=cfg.pooling,
        q_min=cfg.q_min,
        q_max=cfg.q_max,
    )
    params = init_model(spec, child_seed(cfg.seed, "model-init"))
    opts = cfg.solver_opts()
    state = AdamState()
    stopper = EarlyStopper(cfg.patience)
    shuffle_rng = rng_for(cfg.seed, "batch-shuffle")

    epochs_log = []
    best_params = params.copy()
    report: dict = {}
    epochs_run = 0
    for epoch in range(1, cfg.max_epochs + 1):
        epochs_run = epoch
        order = shuffle_rng.permutation(len(train_samples))
        losses = []
        for batch_idx, idx in enumerate(_batches(order, cfg.batch_size)):
            chunk = [train_samples[i] for i in idx]
            graph, feats, graph_of = batch_graphs([(s.graph, s.features) for s in chunk])
            pred, tape = model_forward(graph, feats, graph_of, params, opts, training=True)
            y = encoding.encode([s.label for s in chunk])
            loss, dpred = loss_and_grad(pred, y, cfg.loss)
            if not np.isfinite(loss):
                raise TrainingDiverged(
                    f"loss became non-finite at epoch {epoch}", report=_report(epochs_log, None)
                )
            grads = model_backward(params, tape, dpred, opts)
            adam_step(params.to_flat(), grads, state, cfg.learning_rate)
            losses.append(loss)
            if trace is not None:
                _emit_trace(trace, epoch, batch_idx, tape)
        train_loss = float(np.mean(losses))

        val_pred = forward_dataset(params, val_samples, opts, cfg.batch_size)
        val_y = encoding.encode([s.label for s in val_samples])
        val_loss, _ = loss_and_grad(val_pred, val_y, cfg.loss)
        val_metric = encoding.metric(val_pred, [s.label for s in val_samples])
        epochs_log.append(
            {"train_loss": train_loss, "val_loss": float(val_loss), "val_metric": val_metric}
        )
        improved = val_loss < stopper.best
        stop = stopper.update(epoch, float(val_loss))
        if improved:
            best_params = params.copy()
        if stop:
            break

    params = best_params
    test_pred = forward_dataset(params, test_samples, opts, cfg.batch_size)
    test_metric = encoding.metric(test_pred, [s.label for s in test_samples])
    report = _report(epochs_log, {
        "test_metric": test_metric,
        "epochs_run": epochs_run,
        "best_epoch": stopper.best_epoch,
    })
    return TrainResult(params=params, encoding=encoding, report=report, config=cfg)


def _report(epochs_log, final):
    return {"epochs": epochs_log, "final": final}


def _emit_trace(trace, epoch, batch_idx, tape):
    for channel, res in enumerate(tape.solves):
        iters = np.atleast_1d(res.iterations)
        resid = np.atleast_1d(res.residual)
        conv = np.atleast_1d(res.converged)
        for col in range(len(iters)):
            trace(
                {
                    "graph_id": f"epoch{epoch}/batch{batch_idx}",
                    "channel": channel,
                    "col": col,
                    "iters": int(iters[col]),
                    "residual": float(resid[col]),
                    "converged": bool(conv[col]),
                }
            )


# ---------------------------------------------------------------------------
# checkpoints


def checkpoint_to_dict(params: ModelParams, encoding: TaskEncoding, cfg: TrainConfig | None = None) -> dict:
    arrays = {
        name: {"shape": list(arr.shape), "data": [float(x) for x in np.ravel(arr)]}
        for name, arr in params.to_flat().items()
    }
    out = {
        "schema_version": CHECKPOINT_SCHEMA_VERSION,
        "spec": params.spec.to_dict(),
        "filter_trainable": params.filter_trainable,
        "encoding": encoding.to_dict(),
        "params": arrays,
    }
    if cfg is not None:
        out["config"] = cfg.to_dict()
    return out


def checkpoint_from_dict(d: dict) -> tuple[ModelParams, TaskEncoding]:
    if d.get("schema_version") != CHECKPOINT_SCHEMA_VERSION:
        raise ValueError(
            f"checkpoint schema version {d.get('schema_version')} != {CHECKPOINT_SCHEMA_VERSION}"
        )
    spec = ModelSpec.from_dict(d["spec"])
    params = init_model(spec, np.random.SeedSequence(0))
    params.filter_trainable = bool(d.get("filter_trainable", True))
    flat = params.to_flat()
    stored = d["params"]
    if set(stored) != set(flat):
        missing = set(flat) ^ set(stored)
        raise ValueError(f"checkpoint parameters do not match the spec: {sorted(missing)}")
    for name, arr in flat.items():
        entry = stored[name]
        data = np.array(entry["data"], dtype=float).reshape(entry["shape"])
        if data.shape != arr.shape:
            raise ValueError(f"shape mismatch for {name}: {data.shape} vs {arr.shape}")
        arr[...] = data
    return params, TaskEncoding.from_dict(d["encoding"])


def save_checkpoint(path, params, encoding, cfg=None):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(checkpoint_to_dict(params, encoding, cfg), fh, sort_keys=True)
        fh.write("\n")


def load_checkpoint(path) -> tuple[ModelParams, TaskEncoding]:
    with open(path, encoding="utf-8") as fh:
        return checkpoint_from_dict(json.load(fh))


# ---------------------------------------------------------------------------
# explanations


def export_explanation(params: ModelParams, encoding: TaskEncoding, sample, opts: SolverOpts | None = None) -> dict:
    """Per-graph explanation: post-clamp q values per channel, the sampled
    filter curves, the prediction, and the sample's ground-truth annotations."""
    from .graph import normalized_laplacian
    from .qnet import qnet_forward
    from .solver import clamp_q

    opts = opts or SolverOpts()
    g = sample.graph
    x = sample.features
    pred, tape = model_forward(g, x, np.zeros(g.n, dtype=int), params, opts, training=False)
    decoded = encoding.decode_predictions(pred)
    prediction = decoded[0]
    out = {
        "schema_version": 1,
        "graph": graph_to_dict(g),
        "q": [[float(v) for v in q] for q in tape.qs],
        "filters": [filter_to_dict(f) for f in params.filters()],
        "prediction": float(prediction) if encoding.task == "regression" else int(prediction),
        "label": sample.label,
        "meta": sample.meta,
    }
    return out
