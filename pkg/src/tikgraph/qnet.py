"""Chebyshev-convolution network producing one unconstrained score per node.

Architecture: a stack of spectral convolution layers on the shifted Laplacian
Lt = L - I (spectrum in [-1, 1]), each computing tanh(sum_k T_k(Lt) H W_k + b)
with the Chebyshev recurrence, wired with additive skip connections (identity
when widths match, learned projection otherwise), followed by a 2-layer MLP
head that maps each node to a scalar. Backpropagation is exact and hand
derived for this fixed architecture; a forward keeps a tape of intermediates.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp


@dataclass
class ChebLayerParams:
    weight: np.ndarray  # (order+1, d_in, d_out)
    bias: np.ndarray  # (d_out,)
    skip: np.ndarray | None  # (d_in, d_out) projection, None when d_in == d_out

    @property
    def order(self) -> int:
        return self.weight.shape[0] - 1


@dataclass
class QNetParams:
    layers: list[ChebLayerParams]
    head_w1: np.ndarray
    head_b1: np.ndarray
    head_w2: np.ndarray  # (hidden, 1); init to zero so q_tilde starts at head_b2
    head_b2: np.ndarray  # (1,)


def init_qnet(
    rng: np.random.Generator,
    d_in: int,
    hidden: int = 8,
    num_layers: int = 5,
    order: int = 3,
    q_init: float = 0.1,
) -> QNetParams:
    """Seeded initialization; the head's last layer is zeroed with bias
    log(q_init) so every node starts at importance q_init (plus the floor)."""
    layers = []
    for layer_idx in range(num_layers):
        fan_in = d_in if layer_idx == 0 else hidden
        std = (fan_in * (order + 1)) ** -0.5
        weight = rng.normal(0.0, std, size=(order + 1, fan_in, hidden))
        skip = None
        if fan_in != hidden:
            skip = rng.normal(0.0, fan_in**-0.5, size=(fan_in, hidden))
        layers.append(ChebLayerParams(weight, np.zeros(hidden), skip))
    head_w1 = rng.normal(0.0, hidden**-0.5, size=(hidden, hidden))
    return QNetParams(
        layers=layers,
        head_w1=head_w1,
        head_b1=np.zeros(hidden),
        head_w2=np.zeros((hidden, 1)),
        head_b2=np.array([float(np.log(q_init))]),
    )


def shifted_laplacian(L: sp.spmatrix) -> sp.csr_matrix:
    lt = (L - sp.identity(L.shape[0], format="csr")).tocsr()
    lt.sort_indices()
    return lt


def _cheb_stack(Lt: sp.spmatrix, h: np.ndarray, order: int) -> list[np.ndarray]:
    """[T_0 H, ..., T_order H] with T_{k+1} = 2 Lt T_k - T_{k-1}."""
    ts = [h]
    if order >= 1:
        ts.append(Lt @ h)
    for _ in range(2, order + 1):
        ts.append(2.0 * (Lt @ ts[-1]) - ts[-2])
    return ts


def cheb_layer(Lt: sp.spmatrix, h: np.ndarray, layer: ChebLayerParams, activation: str = "tanh"):
    """One spectral convolution: activation(sum_k T_k(Lt) H W_k + b).

    Returns (output, cache) where cache holds what backward needs. The skip
    connection is applied by the caller (see qnet_forward), not here.
    """
    if h.shape[1] != layer.weight.shape[1]:
        raise ValueError(
            f"input width {h.shape[1]} does not match layer width {layer.weight.shape[1]}"
        )
    ts = _cheb_stack(Lt, h, layer.order)
    pre = sum(t @ layer.weight[k] for k, t in enumerate(ts)) + layer.bias
    if activation == "tanh":
        out = np.tanh(pre)
    elif activation == "identity":
        out = pre
    else:
        raise ValueError(f"unknown activation {activation!r}")
    return out, {"ts": ts, "out": out, "h": h}


def _cheb_layer_backward(Lt, cache, layer: ChebLayerParams, dout, activation: str):
    if activation == "tanh":
        dpre = dout * (1.0 - cache["out"] ** 2)
    else:
        dpre = dout
    dweight = np.stack([t.T @ dpre for t in cache["ts"]])
    dbias = dpre.sum(axis=0)
    # d/dH of sum_k T_k(Lt) H W_k  =  sum_k T_k(Lt) (dPre W_k^T), T_k symmetric
    gs = _cheb_stack(Lt, dpre, layer.order)
    dh = sum(g @ layer.weight[k].T for k, g in enumerate(gs))
    return dh, dweight, dbias


@dataclass
class QNetTape:
    Lt: sp.csr_matrix
    x: np.ndarray
    activation: str
    layer_caches: list = field(default_factory=list)
    skip_inputs: list = field(default_factory=list)
    head_cache: dict = field(default_factory=dict)
    n: int = 0


def qnet_forward(L: sp.spmatrix, x: np.ndarray, params: QNetParams, activation: str = "tanh"):
    """Per-node unconstrained scores q_tilde plus the backward tape."""
    x = np.asarray(x, dtype=float)
    if x.ndim != 2 or x.shape[0] != L.shape[0]:
        raise ValueError(f"feature matrix shape {x.shape} does not match n={L.shape[0]}")
    Lt = shifted_laplacian(L)
    tape = QNetTape(Lt=Lt, x=x, activation=activation, n=x.shape[0])
    h = x
    for layer in params.layers:
        out, cache = cheb_layer(Lt, h, layer, activation)
        tape.layer_caches.append(cache)
        tape.skip_inputs.append(h)
        h = out + (h @ layer.skip if layer.skip is not None else h)
    a1 = h @ params.head_w1 + params.head_b1
    v1 = np.tanh(a1) if activation == "tanh" else a1
    q_tilde = (v1 @ params.head_w2 + params.head_b2)[:, 0]
    tape.head_cache = {"h": h, "v1": v1}
    return q_tilde, tape


@dataclass
class QNetGrads:
    layers: list  # (dweight, dbias, dskip or None) per layer
    head_w1: np.ndarray
    head_b1: np.ndarray
    head_w2: np.ndarray
    head_b2: np.ndarray


def qnet_backward(params: QNetParams, tape: QNetTape, dq_tilde: np.ndarray):
    """Exact gradients for every weight and for the input features.

    Returns (QNetGrads, dX). Raises on a tape/gradient shape mismatch.
    """
    dq_tilde = np.asarray(dq_tilde, dtype=float)
    if dq_tilde.shape != (tape.n,):
        raise ValueError("gradient shape does not match the tape")
    if len(tape.layer_caches) != len(params.layers):
        raise ValueError("stale tape: layer count mismatch")

    hc = tape.head_cache
    dv1 = dq_tilde[:, None] @ params.head_w2.T
    dhead_w2 = hc["v1"].T @ dq_tilde[:, None]
    dhead_b2 = np.array([dq_tilde.sum()])
    da1 = dv1 * (1.0 - hc["v1"] ** 2) if tape.activation == "tanh" else dv1
    dhead_w1 = hc["h"].T @ da1
    dhead_b1 = da1.sum(axis=0)
    dh = da1 @ params.head_w1.T

    layer_grads: list = [None] * len(params.layers)
    for idx in range(len(params.layers) - 1, -1, -1):
        layer = params.layers[idx]
        cache = tape.layer_caches[idx]
        dconv, dweight, dbias = _cheb_layer_backward(
            tape.Lt, cache, layer, dh, tape.activation
        )
        if layer.skip is not None:
            dskip = tape.skip_inputs[idx].T @ dh
            dh_in = dconv + dh @ layer.skip.T
        else:
            dskip = None
            dh_in = dconv + dh
        layer_grads[idx] = (dweight, dbias, dskip)
        dh = dh_in

    grads = QNetGrads(
        layers=layer_grads,
        head_w1=dhead_w1,
        head_b1=dhead_b1,
        head_w2=dhead_w2,
        head_b2=dhead_b2,
    )
    return grads, dh
