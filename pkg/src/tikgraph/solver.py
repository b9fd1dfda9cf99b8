"""Tikhonov operator M = p(L) + Q: PCG forward solve and implicit-diff backward.

The forward pass solves M z = Q x column by column with Jacobi-preconditioned
conjugate gradients from a zero initial guess. Gradients with respect to x,
the node importances q, and the filter parameters theta all come from a single
adjoint solve u = M^{-1} zbar with the same matrix:

    d/dq_i   = sum_c u_{c,i} (x_{c,i} - z_{c,i})
    d/dx     = q .* u
    d/dtheta_k = -sigmoid'(theta_k) * sum_c u_c^T b_{k,K}(L/2) z_c
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
import scipy.sparse as sp

from .bernstein import (
    BernsteinFilter,
    apply_basis_all,
    dense_filter_matrix,
    monomial_coeffs,
    sigmoid_deriv,
)
from .graph import Graph, normalized_laplacian

RHS_NORM_FLOOR = 1e-30  # guards the relative residual when the rhs is zero


def clamp_q(q_tilde, q_min: float = 1e-10, q_max: float = 1e10):
    """Map unconstrained scores to strictly positive importances.

    q_i = exp(min(q_tilde_i, log q_max)) + q_min, clamping in log-space to
    prevent overflow. Returns (q, dq/dq_tilde); the derivative is
    exp(q_tilde_i) below the cap and exactly 0 once clamped.
    """
    if q_min <= 0 or q_max <= q_min:
        raise ValueError("require 0 < q_min < q_max")
    q_tilde = np.asarray(q_tilde, dtype=float)
    cap = math.log(q_max)
    clipped = np.minimum(q_tilde, cap)
    expd = np.exp(clipped)
    q = expd + q_min
    deriv = np.where(q_tilde < cap, expd, 0.0)
    return q, deriv


class TikhonovOperator:
    """Implicit SPD operator scale * (p(L) + diag(q)) over one graph.

    Immutable after construction; caches the monomial coefficients of p and
    the preconditioner diagonal. `scale` multiplies both p(L) and Q, which
    leaves the resolvent (and hence every solve) unchanged; it exists so
    rescaling-invariance checks can build the scaled operator directly.
    """

    def __init__(self, graph: Graph, filt: BernsteinFilter, q, L=None, scale: float = 1.0):
        q = np.asarray(q, dtype=float)
        if q.shape != (graph.n,):
            raise ValueError(f"q has shape {q.shape}, expected ({graph.n},)")
        if np.any(q <= 0):
            raise ValueError("node importances must be strictly positive")
        if scale <= 0:
            raise ValueError("scale must be positive")
        self.graph = graph
        self.filter = filt
        self.q = q
        self.scale = float(scale)
        self.L = normalized_laplacian(graph) if L is None else L
        self.coeffs = monomial_coeffs(filt)
        self._diag_cache: dict[str, np.ndarray] = {}

    @property
    def n(self) -> int:
        return self.graph.n

    @property
    def shape(self) -> tuple[int, int]:
        return (self.n, self.n)

    def filter_matvec(self, v):
        """p(L) v by Horner; v may be a vector or a matrix of columns."""
        out = self.coeffs[-1] * v
        for j in range(len(self.coeffs) - 2, -1, -1):
            out = self.L @ out + self.coeffs[j] * v
        return out

    def matvec(self, v):
        """M v = scale * (p(L) v + q .* v)."""
        v = np.asarray(v, dtype=float)
        if v.shape[0] != self.n:
            raise ValueError("dimension mismatch in matvec")
        qv = self.q[:, None] * v if v.ndim == 2 else self.q * v
        return self.scale * (self.filter_matvec(v) + qv)

    def rhs(self, x):
        """Right-hand side scale * Q x."""
        x = np.asarray(x, dtype=float)
        return self.scale * (self.q[:, None] * x if x.ndim == 2 else self.q * x)

    def precond_diag(self, mode: str = "approx") -> np.ndarray:
        if mode not in self._diag_cache:
            self._diag_cache[mode] = jacobi_precond(self, mode)
        return self._diag_cache[mode]


def jacobi_precond(op: TikhonovOperator, mode: str = "exact") -> np.ndarray:
    """Diagonal of M for Jacobi preconditioning.

    "exact" probes diag(p(L)) with unit-vector columns (n matvecs, n <= 5000).
    "approx" uses the exactly computable low-order terms
    a0 + a1*diag(L) + a2*rowSumSq(L) plus diag(L)^j for j >= 3, clipped into
    [1e-12, 1] before adding q so the result is always strictly positive.
    Any positive diagonal only changes the iteration count, never the solution.
    """
    a = op.coeffs
    n = op.n
    if mode == "exact":
        if n > 5000:
            raise ValueError("exact Jacobi probing is restricted to n <= 5000")
        diag_p = np.empty(n)
        step = 1024
        for start in range(0, n, step):
            stop = min(start + step, n)
            eye_chunk = np.zeros((n, stop - start))
            eye_chunk[np.arange(start, stop), np.arange(stop - start)] = 1.0
            block = op.filter_matvec(eye_chunk)
            diag_p[start:stop] = block[np.arange(start, stop), np.arange(stop - start)]
        return op.scale * (diag_p + op.q)
    if mode == "approx":
        diag_l = op.L.diagonal()
        diag_p = a[0] * np.ones(n)
        if len(a) > 1:
            diag_p = diag_p + a[1] * diag_l
        if len(a) > 2:
            row_sq = np.asarray(op.L.multiply(op.L).sum(axis=1)).ravel()
            diag_p = diag_p + a[2] * row_sq
        for j in range(3, len(a)):
            diag_p = diag_p + a[j] * diag_l**j
        diag_p = np.clip(diag_p, 1e-12, 1.0)
        return op.scale * (diag_p + op.q)
    raise ValueError(f"unknown preconditioner mode {mode!r}")


@dataclass
class SolveResult:
    """Outcome of a (multi-rhs) PCG solve.

    residual is the true relative residual ||M z - b|| / max(||b||, eps) per
    column; converged implies residual <= tol by construction.
    """

    z: np.ndarray
    iterations: np.ndarray
    residual: np.ndarray
    converged: np.ndarray
    breakdown: np.ndarray

    def all_converged(self) -> bool:
        return bool(np.all(self.converged))


def pcg_solve(apply_m, rhs, precond_diag, tol: float = 1e-6, max_iter: int = 30) -> SolveResult:
    """Preconditioned CG from a zero initial guess, vectorized over columns.

    A column stops once its relative residual ||M z - b|| / ||b|| reaches tol,
    confirmed against a freshly computed true residual, or after max_iter
    iterations. Convergence additionally requires the Jacobi-scaled residual
    ||r / diag|| / ||b / diag|| <= tol: with heterogeneous q the plain
    residual norm is dominated by large-q rows and can under-report the
    solution error by a factor of cond(M); the scaled test keeps the achieved
    solution accuracy near tol itself. Breakdown (nonpositive curvature or a
    nonfinite step) is flagged, never propagated as NaN into the solution.
    """
    b = np.asarray(rhs, dtype=float)
    squeeze = b.ndim == 1
    if squeeze:
        b = b[:, None]
    n, d = b.shape
    diag = np.asarray(precond_diag, dtype=float)
    if np.any(diag <= 0):
        raise ValueError("preconditioner diagonal must be strictly positive")

    x = np.zeros_like(b)
    bnorm = np.linalg.norm(b, axis=0)
    scale = np.maximum(bnorm, RHS_NORM_FLOOR)
    scale_pre = np.maximum(np.linalg.norm(b / diag[:, None], axis=0), RHS_NORM_FLOOR)
    iters = np.zeros(d, dtype=int)
    converged = bnorm == 0.0  # zero rhs: solution 0 in 0 iterations
    breakdown = np.zeros(d, dtype=bool)
    resid = np.where(bnorm == 0.0, 0.0, 1.0)

    def passes(res_block, cols):
        rel = np.linalg.norm(res_block, axis=0) / scale[cols]
        rel_pre = np.linalg.norm(res_block / diag[:, None], axis=0) / scale_pre[cols]
        return rel, (rel <= tol) & (rel_pre <= tol)

    active = np.flatnonzero(~converged)
    if active.size:
        r = b[:, active].copy()
        z = r / diag[:, None]
        p = z.copy()
        rz = np.einsum("ij,ij->j", r, z)

    it = 0
    while active.size and it < max_iter:
        it += 1
        ap = apply_m(p)
        pap = np.einsum("ij,ij->j", p, ap)
        bad = ~(pap > 0) | ~np.isfinite(pap)
        if np.any(bad):
            cols = active[bad]
            true_r = b[:, cols] - apply_m(x[:, cols])
            rel, ok = passes(true_r, cols)
            resid[cols] = rel
            converged[cols[ok]] = True
            breakdown[cols[~ok]] = True
            keep = ~bad
            active = active[keep]
            if not active.size:
                break
            r, z, p, ap = r[:, keep], z[:, keep], p[:, keep], ap[:, keep]
            rz, pap = rz[keep], pap[keep]
        alpha = rz / pap
        x[:, active] += alpha * p
        r -= alpha * ap
        iters[active] = it
        rel_est = np.linalg.norm(r, axis=0) / scale[active]
        pre_est = np.linalg.norm(r / diag[:, None], axis=0) / scale_pre[active]
        cand = (rel_est <= tol) & (pre_est <= tol)
        if np.any(cand):
            cols = active[cand]
            true_r = b[:, cols] - apply_m(x[:, cols])
            rel_true, confirmed = passes(true_r, cols)
            done = cols[confirmed]
            converged[done] = True
            resid[done] = rel_true[confirmed]
            # Refresh drifted recurrence residuals for unconfirmed columns.
            r[:, np.flatnonzero(cand)[~confirmed]] = true_r[:, ~confirmed]
            keep = np.ones(active.size, dtype=bool)
            keep[np.flatnonzero(cand)[confirmed]] = False
            active = active[keep]
            if not active.size:
                break
            r, p = r[:, keep], p[:, keep]
            rz = rz[keep]
        z = r / diag[:, None]
        rz_new = np.einsum("ij,ij->j", r, z)
        beta = rz_new / rz
        p = z + beta * p
        rz = rz_new

    if active.size:  # max_iter hit: report the true residual honestly
        true_r = b[:, active] - apply_m(x[:, active])
        rel, ok = passes(true_r, active)
        resid[active] = rel
        converged[active] = ok

    if squeeze:
        return SolveResult(x[:, 0], iters, resid, converged, breakdown)
    return SolveResult(x, iters, resid, converged, breakdown)


def forward(
    op: TikhonovOperator,
    x,
    tol: float = 1e-6,
    max_iter: int = 30,
    precond: str = "approx",
) -> SolveResult:
    """Solve M z = Q x for each column of x (z minimizes the fidelity+smoothness
    functional sum_i q_i (x_i - z_i)^2 + z^T p(L) z per column)."""
    x = np.asarray(x, dtype=float)
    if x.shape[0] != op.n:
        raise ValueError("dimension mismatch between operator and features")
    return pcg_solve(op.matvec, op.rhs(x), op.precond_diag(precond), tol, max_iter)


@dataclass
class BackwardResult:
    dx: np.ndarray
    dq: np.ndarray
    dtheta: np.ndarray
    adjoint: SolveResult


def backward(
    op: TikhonovOperator,
    x,
    z,
    zbar,
    tol: float = 1e-6,
    max_iter: int = 30,
    precond: str = "approx",
) -> BackwardResult:
    """All gradients from one adjoint solve u = M^{-1} zbar.

    z must come from a (converged) forward solve with the same operator.
    Non-convergence of the adjoint is flagged in the returned SolveResult.
    """
    x = np.asarray(x, dtype=float)
    z = np.asarray(z, dtype=float)
    zbar = np.asarray(zbar, dtype=float)
    if x.shape != z.shape or z.shape != zbar.shape:
        raise ValueError("x, z and zbar must share a shape")
    squeeze = x.ndim == 1
    xm = x[:, None] if squeeze else x
    zm = z[:, None] if squeeze else z
    adj = pcg_solve(op.matvec, zbar, op.precond_diag(precond), tol, max_iter)
    um = adj.z[:, None] if squeeze else adj.z

    s = op.scale
    dq = s * np.einsum("ij,ij->i", um, xm - zm)
    dx = s * op.q[:, None] * um
    basis = apply_basis_all(op.L, op.filter.degree, zm)
    dtheta = np.array(
        [-s * float(np.sum(um * basis[k])) for k in range(op.filter.degree + 1)]
    )
    dtheta *= sigmoid_deriv(op.filter.theta)
    return BackwardResult(dx[:, 0] if squeeze else dx, dq, dtheta, adj)


def dense_resolvent(op: TikhonovOperator) -> np.ndarray:
    """Dense R = (p(L) + Q)^{-1} Q via Cholesky; verification oracle, n <= 500."""
    if op.n > 500:
        raise ValueError("dense resolvent is restricted to n <= 500")
    p_dense = dense_filter_matrix(op.L.toarray(), op.filter)
    return dense_resolvent_from_parts(p_dense, op.q)


def dense_resolvent_from_parts(p_dense: np.ndarray, q) -> np.ndarray:
    """Dense (P + diag(q))^{-1} diag(q) for a raw SPD matrix P."""
    q = np.asarray(q, dtype=float)
    m = p_dense + np.diag(q)
    c = scipy.linalg.cho_factor(m)
    return scipy.linalg.cho_solve(c, np.diag(q))


def multichannel_forward(
    ops: list[TikhonovOperator],
    h,
    tol: float = 1e-6,
    max_iter: int = 30,
    precond: str = "approx",
) -> tuple[np.ndarray, list[SolveResult]]:
    """Column-block concatenation (R_1 H | ... | R_J H) of per-channel solves."""
    if not ops:
        raise ValueError("need at least one channel")
    base = ops[0].graph
    for op in ops[1:]:
        if op.graph is not base and op.graph.n != base.n:
            raise ValueError("all channels must share the same graph")
    results = [forward(op, h, tol, max_iter, precond) for op in ops]
    return np.hstack([np.atleast_2d(r.z.T).T for r in results]), results
