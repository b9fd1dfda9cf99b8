"""tikgraph: interpretable graph Tikhonov propagation layer.

The propagation operator R = (p(L) + Q)^{-1} Q combines a learnable bounded
spectral polynomial p with learnable positive node importances q_i; applying
it to features solves a graph Tikhonov problem whose learned parameters are
themselves the model's explanation. The package ships the PCG-based solver
with implicit-differentiation gradients, a Chebyshev Q-network, training,
dataset generators, a verification suite, and a CLI.
"""

from .bernstein import BernsteinFilter, apply_filter, eval_poly, make_filter, monomial_coeffs
from .datasets import GraphSample, load_jsonl, save_jsonl
from .estimator import TikhonovGraphClassifier, TikhonovGraphRegressor
from .graph import Graph, batch_graphs, build_graph, diameter, hop_distance, normalized_laplacian
from .solver import (
    SolveResult,
    TikhonovOperator,
    backward,
    clamp_q,
    dense_resolvent,
    forward,
    jacobi_precond,
    multichannel_forward,
    pcg_solve,
)
from .training import TrainConfig, train
from .verification import run_all, run_property

__version__ = "0.1.0"

__all__ = [
    "BernsteinFilter",
    "Graph",
    "GraphSample",
    "SolveResult",
    "TikhonovGraphClassifier",
    "TikhonovGraphRegressor",
    "TikhonovOperator",
    "TrainConfig",
    "apply_filter",
    "backward",
    "batch_graphs",
    "build_graph",
    "clamp_q",
    "dense_resolvent",
    "diameter",
    "eval_poly",
    "forward",
    "hop_distance",
    "jacobi_precond",
    "load_jsonl",
    "make_filter",
    "monomial_coeffs",
    "multichannel_forward",
    "normalized_laplacian",
    "pcg_solve",
    "run_all",
    "run_property",
    "save_jsonl",
    "train",
]
