"""Full model: Q-networks -> multichannel Tikhonov layer -> pooling -> MLP head.

The prediction is a single computation
    MLP(pool(relu(R_1 X W | ... | R_J X W)))
with one shared feature weight matrix W across channels. Each channel owns a
Q-network (producing its node importances) and a Bernstein filter. Backward is
exact: the Tikhonov part differentiates through one adjoint solve per channel,
everything else is hand-derived reverse mode.
"""

from __future__ import annotations

from dataclasses import dataclass, field, asdict

import numpy as np

from .bernstein import BernsteinFilter, make_filter
from .graph import Graph, normalized_laplacian
from .qnet import QNetParams, init_qnet, qnet_backward, qnet_forward
from .solver import TikhonovOperator, backward as solver_backward, clamp_q, forward as solver_forward

POOL_MODES = ("mean", "sum", "max", "mean_sum_max_layernorm", "sum_sumsq_batchnorm")
_NORM_EPS = 1e-5
_BN_MOMENTUM = 0.9  # running = momentum * running + (1 - momentum) * batch


@dataclass
class ModelSpec:
    """Architecture hyperparameters (everything needed to rebuild parameter shapes)."""

    d_in: int
    hidden: int = 8
    out_dim: int = 2
    task: str = "classification"  # or "regression"
    channels: int = 1
    degree: int = 5
    filter_init: str = "linear"
    qnet_layers: int = 5
    qnet_order: int = 3
    qnet_hidden: int = 8
    q_init: float = 0.1
    pooling: str = "mean_sum_max_layernorm"
    q_min: float = 1e-10
    q_max: float = 1e10

    def pooled_dim(self) -> int:
        width = self.channels * self.hidden
        if self.pooling == "mean_sum_max_layernorm":
            return 3 * width
        if self.pooling == "sum_sumsq_batchnorm":
            return 2 * width
        return width

    def to_dict(self) -> dict:
        return asdict(self)

    @staticmethod
    def from_dict(d: dict) -> "ModelSpec":
        return ModelSpec(**d)


@dataclass
class SolverOpts:
    tol: float = 1e-6
    max_iter: int = 30
    precond: str = "approx"


@dataclass
class ModelParams:
    spec: ModelSpec
    w: np.ndarray
    b_w: np.ndarray
    thetas: list  # per-channel (K+1,) arrays
    filter_trainable: bool
    qnets: list  # per-channel QNetParams
    head_w1: np.ndarray
    head_b1: np.ndarray
    head_w2: np.ndarray
    head_b2: np.ndarray
    pool_gamma: np.ndarray | None = None
    pool_beta: np.ndarray | None = None
    bn_mean: np.ndarray | None = None  # batch-norm running stats, not trained
    bn_var: np.ndarray | None = None

    def filters(self) -> list[BernsteinFilter]:
        return [BernsteinFilter(t, trainable=self.filter_trainable) for t in self.thetas]

    def to_flat(self) -> dict[str, np.ndarray]:
        """Name -> array view, in a stable order. Mutating the arrays mutates
        the model; batch-norm running stats are included (suffix marks them
        non-trainable for the optimizer)."""
        out: dict[str, np.ndarray] = {"w": self.w, "b_w": self.b_w}
        for j, theta in enumerate(self.thetas):
            out[f"filter{j}.theta"] = theta
        for j, qnet in enumerate(self.qnets):
            for l, layer in enumerate(qnet.layers):
                out[f"qnet{j}.layer{l}.weight"] = layer.weight
                out[f"qnet{j}.layer{l}.bias"] = layer.bias
                if layer.skip is not None:
                    out[f"qnet{j}.layer{l}.skip"] = layer.skip
            out[f"qnet{j}.head.w1"] = qnet.head_w1
            out[f"qnet{j}.head.b1"] = qnet.head_b1
            out[f"qnet{j}.head.w2"] = qnet.head_w2
            out[f"qnet{j}.head.b2"] = qnet.head_b2
        out["head.w1"] = self.head_w1
        out["head.b1"] = self.head_b1
        out["head.w2"] = self.head_w2
        out["head.b2"] = self.head_b2
        if self.pool_gamma is not None:
            out["pool.gamma"] = self.pool_gamma
            out["pool.beta"] = self.pool_beta
        if self.bn_mean is not None:
            out["pool.running_mean"] = self.bn_mean
            out["pool.running_var"] = self.bn_var
        return out

    def copy(self) -> "ModelParams":
        import copy as _copy

        return _copy.deepcopy(self)


def init_model(spec: ModelSpec, seed_seq: np.random.SeedSequence) -> ModelParams:
    if spec.pooling not in POOL_MODES:
        raise ValueError(f"unknown pooling mode {spec.pooling!r}")
    rng = np.random.default_rng(seed_seq)
    w = rng.normal(0.0, spec.d_in**-0.5, size=(spec.d_in, spec.hidden))
    filters = [make_filter(spec.degree, spec.filter_init) for _ in range(spec.channels)]
    qnets = [
        init_qnet(rng, spec.d_in, spec.qnet_hidden, spec.qnet_layers, spec.qnet_order, spec.q_init)
        for _ in range(spec.channels)
    ]
    pooled = spec.pooled_dim()
    params = ModelParams(
        spec=spec,
        w=w,
        b_w=np.zeros(spec.hidden),
        thetas=[f.theta.copy() for f in filters],
        filter_trainable=filters[0].trainable,
        qnets=qnets,
        head_w1=rng.normal(0.0, pooled**-0.5, size=(pooled, pooled)),
        head_b1=np.zeros(pooled),
        head_w2=rng.normal(0.0, pooled**-0.5, size=(pooled, spec.out_dim)),
        head_b2=np.zeros(spec.out_dim),
    )
    if spec.pooling in ("mean_sum_max_layernorm", "sum_sumsq_batchnorm"):
        params.pool_gamma = np.ones(pooled)
        params.pool_beta = np.zeros(pooled)
    if spec.pooling == "sum_sumsq_batchnorm":
        params.bn_mean = np.zeros(pooled)
        params.bn_var = np.ones(pooled)
    return params


# ---------------------------------------------------------------------------
# pooling


def _segments(graph_of: np.ndarray, num_graphs: int):
    counts = np.bincount(graph_of, minlength=num_graphs)
    starts = np.concatenate([[0], np.cumsum(counts)[:-1]])
    return counts, starts


def pool_forward(a, graph_of, num_graphs, params: ModelParams, training: bool):
    """Per-graph reduction of node activations; returns (pooled, cache)."""
    mode = params.spec.pooling
    if mode not in POOL_MODES:
        raise ValueError(f"unknown pooling mode {mode!r}")
    counts, starts = _segments(graph_of, num_graphs)
    sums = np.add.reduceat(a, starts, axis=0)
    cache: dict = {"mode": mode, "counts": counts, "starts": starts, "n": a.shape[0]}
    if mode == "mean":
        return sums / counts[:, None], cache
    if mode == "sum":
        return sums, cache
    if mode in ("max", "mean_sum_max_layernorm"):
        arg = np.empty((num_graphs, a.shape[1]), dtype=np.int64)
        mx = np.empty((num_graphs, a.shape[1]))
        for g in range(num_graphs):
            seg = a[starts[g] : starts[g] + counts[g]]
            idx = seg.argmax(axis=0)
            arg[g] = starts[g] + idx
            mx[g] = seg[idx, np.arange(a.shape[1])]
        cache["argmax"] = arg
        if mode == "max":
            return mx, cache
        vec = np.hstack([sums / counts[:, None], sums, mx])
        return _layernorm_forward(vec, params, cache)
    if mode == "sum_sumsq_batchnorm":
        sq_sums = np.add.reduceat(a * a, starts, axis=0)
        cache["a"] = a
        vec = np.hstack([sums, sq_sums])
        return _batchnorm_forward(vec, params, training, cache)
    raise AssertionError


def _layernorm_forward(vec, params: ModelParams, cache):
    mu = vec.mean(axis=1, keepdims=True)
    var = vec.var(axis=1, keepdims=True)
    std = np.sqrt(var + _NORM_EPS)
    xhat = (vec - mu) / std
    cache.update({"xhat": xhat, "std": std})
    return xhat * params.pool_gamma + params.pool_beta, cache


def _batchnorm_forward(vec, params: ModelParams, training: bool, cache):
    if training:
        mu = vec.mean(axis=0)
        var = vec.var(axis=0)
        params.bn_mean[:] = _BN_MOMENTUM * params.bn_mean + (1 - _BN_MOMENTUM) * mu
        params.bn_var[:] = _BN_MOMENTUM * params.bn_var + (1 - _BN_MOMENTUM) * var
    else:
        mu, var = params.bn_mean, params.bn_var
    std = np.sqrt(var + _NORM_EPS)
    xhat = (vec - mu) / std
    cache.update({"xhat": xhat, "std": std, "batch_stats": training})
    return xhat * params.pool_gamma + params.pool_beta, cache


def pool_backward(dpooled, cache, params: ModelParams):
    """Returns (d_activations, dgamma, dbeta); the norm grads are None for
    plain mean/sum/max."""
    mode = cache["mode"]
    counts, starts, n = cache["counts"], cache["starts"], cache["n"]
    dgamma = dbeta = None
    if mode in ("mean_sum_max_layernorm", "sum_sumsq_batchnorm"):
        xhat, std = cache["xhat"], cache["std"]
        dgamma = (dpooled * xhat).sum(axis=0)
        dbeta = dpooled.sum(axis=0)
        dxhat = dpooled * params.pool_gamma
        if mode == "mean_sum_max_layernorm":
            dvec = (
                dxhat - dxhat.mean(axis=1, keepdims=True)
                - xhat * (dxhat * xhat).mean(axis=1, keepdims=True)
            ) / std
        elif cache["batch_stats"]:
            dvec = (
                dxhat - dxhat.mean(axis=0) - xhat * (dxhat * xhat).mean(axis=0)
            ) / std
        else:  # eval mode: stats are constants
            dvec = dxhat / std
        dpooled = dvec

    width = (
        dpooled.shape[1]
        if mode in ("mean", "sum", "max")
        else dpooled.shape[1] // (3 if mode == "mean_sum_max_layernorm" else 2)
    )
    da = np.zeros((n, width))
    rep = np.repeat(np.arange(len(counts)), counts)
    if mode == "mean":
        da += dpooled[rep] / counts[rep][:, None]
    elif mode == "sum":
        da += dpooled[rep]
    elif mode == "max":
        _scatter_max(da, dpooled, cache["argmax"])
    elif mode == "mean_sum_max_layernorm":
        dmean, dsum, dmax = np.split(dpooled, 3, axis=1)
        da += dmean[rep] / counts[rep][:, None] + dsum[rep]
        _scatter_max(da, dmax, cache["argmax"])
    elif mode == "sum_sumsq_batchnorm":
        dsum, dsq = np.split(dpooled, 2, axis=1)
        da += dsum[rep] + 2.0 * cache["a"] * dsq[rep]
    return da, dgamma, dbeta


def _scatter_max(da, dmax, argmax):
    cols = np.arange(da.shape[1])
    for g in range(argmax.shape[0]):
        da[argmax[g], cols] += dmax[g]


# ---------------------------------------------------------------------------
# losses


def loss_and_grad(pred: np.ndarray, labels, kind: str):
    """Mean loss over the batch and its gradient w.r.t. the predictions."""
    pred = np.asarray(pred, dtype=float)
    g = pred.shape[0]
    if kind == "cross_entropy":
        y = np.asarray(labels, dtype=int)
        if np.any(y < 0) or np.any(y >= pred.shape[1]):
            raise ValueError("label outside the class range")
        shifted = pred - pred.max(axis=1, keepdims=True)
        logz = np.log(np.exp(shifted).sum(axis=1, keepdims=True))
        logp = shifted - logz
        loss = -float(logp[np.arange(g), y].mean())
        dpred = np.exp(logp)
        dpred[np.arange(g), y] -= 1.0
        return loss, dpred / g
    y = np.asarray(labels, dtype=float)
    err = pred[:, 0] - y
    if kind == "mae":
        loss = float(np.abs(err).mean())
        dpred = np.zeros_like(pred)
        dpred[:, 0] = np.sign(err) / g  # subgradient at 0 taken as 0
        return loss, dpred
    if kind == "mse":
        loss = float((err**2).mean())
        dpred = np.zeros_like(pred)
        dpred[:, 0] = 2.0 * err / g
        return loss, dpred
    raise ValueError(f"unknown loss kind {kind!r}")


# ---------------------------------------------------------------------------
# forward / backward


@dataclass
class ModelTape:
    graph: Graph
    x: np.ndarray
    graph_of: np.ndarray
    num_graphs: int
    L: object
    h: np.ndarray
    qtapes: list
    qs: list
    dq_masks: list
    ops: list
    solves: list
    zcat: np.ndarray
    act: np.ndarray
    pool_cache: dict
    pooled: np.ndarray
    head_pre: np.ndarray
    head_hidden: np.ndarray


def model_forward(
    graph: Graph,
    x: np.ndarray,
    graph_of: np.ndarray,
    params: ModelParams,
    opts: SolverOpts = SolverOpts(),
    training: bool = False,
):
    """Run the full pipeline on a (possibly batched) graph.

    Returns (predictions (num_graphs, out_dim), tape). Solver convergence
    flags ride along in tape.solves for diagnostics.
    """
    x = np.asarray(x, dtype=float)
    spec = params.spec
    if x.shape != (graph.n, spec.d_in):
        raise ValueError(f"feature matrix shape {x.shape}, expected ({graph.n}, {spec.d_in})")
    graph_of = np.asarray(graph_of, dtype=np.int64)
    num_graphs = int(graph_of.max()) + 1 if graph.n else 0

    L = normalized_laplacian(graph)
    h = x @ params.w + params.b_w

    qtapes, qs, masks, ops, solves, blocks = [], [], [], [], [], []
    for j in range(spec.channels):
        q_tilde, qtape = qnet_forward(L, x, params.qnets[j])
        q, dmask = clamp_q(q_tilde, spec.q_min, spec.q_max)
        op = TikhonovOperator(graph, BernsteinFilter(params.thetas[j], params.filter_trainable), q, L=L)
        res = solver_forward(op, h, opts.tol, opts.max_iter, opts.precond)
        qtapes.append(qtape)
        qs.append(q)
        masks.append(dmask)
        ops.append(op)
        solves.append(res)
        blocks.append(res.z)
    zcat = np.hstack(blocks)
    act = np.maximum(zcat, 0.0)

    pooled, pcache = pool_forward(act, graph_of, num_graphs, params, training)
    head_pre = pooled @ params.head_w1 + params.head_b1
    head_hidden = np.maximum(head_pre, 0.0)
    pred = head_hidden @ params.head_w2 + params.head_b2

    tape = ModelTape(
        graph=graph,
        x=x,
        graph_of=graph_of,
        num_graphs=num_graphs,
        L=L,
        h=h,
        qtapes=qtapes,
        qs=qs,
        dq_masks=masks,
        ops=ops,
        solves=solves,
        zcat=zcat,
        act=act,
        pool_cache=pcache,
        pooled=pooled,
        head_pre=head_pre,
        head_hidden=head_hidden,
    )
    return pred, tape


def model_backward(params: ModelParams, tape: ModelTape, dpred: np.ndarray, opts: SolverOpts = SolverOpts()):
    """Gradients for every trainable array, keyed like ModelParams.to_flat().

    Also returns dX under the key "__x__" (useful for end-to-end checks).
    """
    spec = params.spec
    grads: dict[str, np.ndarray] = {}

    dhidden = dpred @ params.head_w2.T
    grads["head.w2"] = tape.head_hidden.T @ dpred
    grads["head.b2"] = dpred.sum(axis=0)
    dhead_pre = dhidden * (tape.head_pre > 0)
    grads["head.w1"] = tape.pooled.T @ dhead_pre
    grads["head.b1"] = dhead_pre.sum(axis=0)
    dpooled = dhead_pre @ params.head_w1.T

    dact, dgamma, dbeta = pool_backward(dpooled, tape.pool_cache, params)
    if dgamma is not None:
        grads["pool.gamma"] = dgamma
        grads["pool.beta"] = dbeta
    dzcat = dact * (tape.zcat > 0)

    dh = np.zeros_like(tape.h)
    dx = np.zeros_like(tape.x)
    width = spec.hidden
    for j in range(spec.channels):
        dz = dzcat[:, j * width : (j + 1) * width]
        bw = solver_backward(
            tape.ops[j], tape.h, tape.solves[j].z, dz, opts.tol, opts.max_iter, opts.precond
        )
        dh += bw.dx
        if params.filter_trainable:
            grads[f"filter{j}.theta"] = bw.dtheta
        else:
            grads[f"filter{j}.theta"] = np.zeros_like(bw.dtheta)
        dq_tilde = bw.dq * tape.dq_masks[j]
        qg, dx_q = qnet_backward(params.qnets[j], tape.qtapes[j], dq_tilde)
        dx += dx_q
        for l, (dwt, dbi, dsk) in enumerate(qg.layers):
            grads[f"qnet{j}.layer{l}.weight"] = dwt
            grads[f"qnet{j}.layer{l}.bias"] = dbi
            if dsk is not None:
                grads[f"qnet{j}.layer{l}.skip"] = dsk
        grads[f"qnet{j}.head.w1"] = qg.head_w1
        grads[f"qnet{j}.head.b1"] = qg.head_b1
        grads[f"qnet{j}.head.w2"] = qg.head_w2
        grads[f"qnet{j}.head.b2"] = qg.head_b2

    grads["w"] = tape.x.T @ dh
    grads["b_w"] = dh.sum(axis=0)
    grads["__x__"] = dx + dh @ params.w.T
    return grads
