"""Constrained spectral polynomials in the Bernstein basis.

A filter of degree K is parametrized by K+1 unconstrained reals theta_k and
evaluates as p(lam) = sum_k sigmoid(theta_k) * b_{k,K}(lam / 2) on [0, 2].
Because the basis is a partition of unity with positive weights, p is pinned
strictly inside (0, 1) for finite theta. Scalar evaluation uses the de
Casteljau recursion; operator application converts to monomial coefficients
once and runs Horner with K sparse matvecs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

MAX_DEGREE = 15  # monomial conversion is ill-conditioned past this


def sigmoid(x):
    x = np.asarray(x, dtype=float)
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out if out.ndim else float(out)


def sigmoid_deriv(x):
    s = np.asarray(sigmoid(x))
    out = s * (1.0 - s)
    return out if out.ndim else float(out)


def logit(p):
    p = np.asarray(p, dtype=float)
    with np.errstate(divide="ignore"):
        out = np.log(p) - np.log1p(-p)
    return out if out.ndim else float(out)


@dataclass(frozen=True)
class BernsteinFilter:
    """Degree-K spectral polynomial with sigmoid-squashed Bernstein weights."""

    theta: np.ndarray
    trainable: bool = True

    def __post_init__(self):
        theta = np.asarray(self.theta, dtype=float).reshape(-1)
        if len(theta) < 2:
            raise ValueError("filter needs degree >= 1, i.e. at least 2 parameters")
        object.__setattr__(self, "theta", theta)

    @property
    def degree(self) -> int:
        return len(self.theta) - 1

    def coefficients(self) -> np.ndarray:
        """Bernstein weights c_k = sigmoid(theta_k), each in [0, 1]."""
        return np.asarray(sigmoid(self.theta))


def make_filter(degree: int = 5, init: str = "linear") -> BernsteinFilter:
    """Initialization presets.

    "linear": theta_k = logit(clip(k/K, 1e-3, 1-1e-3)), giving p close to
    lam/2 while keeping every parameter trainable. "flat": theta = 0, giving
    p identically 0.5. "fixed": the non-trainable ramp eps + (1/2 - eps)*lam
    with eps = 1e-3, exactly representable since its Bernstein weights are
    affine in k.
    """
    k = np.arange(degree + 1, dtype=float)
    if init == "linear":
        return BernsteinFilter(logit(np.clip(k / degree, 1e-3, 1.0 - 1e-3)))
    if init == "flat":
        return BernsteinFilter(np.zeros(degree + 1))
    if init == "fixed":
        eps = 1e-3
        c = eps + (1.0 - 2.0 * eps) * (k / degree)
        return BernsteinFilter(logit(c), trainable=False)
    raise ValueError(f"unknown filter init {init!r}")


def bernstein_basis(degree: int, t) -> np.ndarray:
    """All basis values b_{k,K}(t), shape (K+1,) + shape(t)."""
    t = np.asarray(t, dtype=float)
    vals = np.zeros((degree + 1,) + t.shape)
    vals[0] = 1.0
    for r in range(1, degree + 1):
        prev = vals[: r + 1].copy()
        vals[0] = (1.0 - t) * prev[0]
        for k in range(1, r):
            vals[k] = (1.0 - t) * prev[k] + t * prev[k - 1]
        vals[r] = t * prev[r - 1]
    return vals


def eval_poly(f: BernsteinFilter, lam):
    """Evaluate p(lam) for lam in [0, 2] via de Casteljau (stable).

    Accepts scalars or arrays; raises ValueError outside [0, 2].
    """
    lam = np.asarray(lam, dtype=float)
    if np.any(lam < 0) or np.any(lam > 2):
        raise ValueError("spectral argument outside [0, 2]")
    t = lam / 2.0
    beta = np.broadcast_to(
        f.coefficients().reshape((-1,) + (1,) * t.ndim), (f.degree + 1,) + t.shape
    ).copy()
    for r in range(f.degree):
        beta = (1.0 - t) * beta[:-1] + t * beta[1:]
    out = beta[0]
    return out if out.ndim else float(out)


def eval_poly_grad(f: BernsteinFilter, lam) -> np.ndarray:
    """d p(lam) / d theta_k = sigmoid'(theta_k) * b_{k,K}(lam/2)."""
    lam = np.asarray(lam, dtype=float)
    basis = bernstein_basis(f.degree, lam / 2.0)
    return sigmoid_deriv(f.theta).reshape((-1,) + (1,) * lam.ndim) * basis


def monomial_coeffs(f: BernsteinFilter) -> np.ndarray:
    """Exact conversion to power-basis coefficients a_j with p(lam) = sum a_j lam^j.

    Uses the binomial expansion of the basis; restricted to K <= 15 because the
    alternating sums lose roughly one digit per degree past that.
    """
    K = f.degree
    if K > MAX_DEGREE:
        raise ValueError(f"degree {K} exceeds supported maximum {MAX_DEGREE}")
    c = f.coefficients()
    a = np.zeros(K + 1)
    for j in range(K + 1):
        s = sum((-1.0) ** (j - k) * math.comb(j, k) * c[k] for k in range(j + 1))
        a[j] = math.comb(K, j) * s / 2.0**j
    return a


def _as_columns(x):
    x = np.asarray(x, dtype=float)
    if x.ndim == 1:
        return x[:, None], True
    if x.ndim == 2:
        return x, False
    raise ValueError("expected a vector or a matrix of column vectors")


def apply_filter(L: sp.spmatrix, f: BernsteinFilter, x):
    """Compute p(L) x with K sparse matvecs (Horner on monomial coefficients)."""
    cols, squeeze = _as_columns(x)
    if cols.shape[0] != L.shape[0]:
        raise ValueError(
            f"dimension mismatch: operator is {L.shape[0]}, vector is {cols.shape[0]}"
        )
    a = monomial_coeffs(f)
    out = a[-1] * cols
    for j in range(len(a) - 2, -1, -1):
        out = L @ out + a[j] * cols
    return out[:, 0] if squeeze else out


def apply_basis_all(L: sp.spmatrix, degree: int, z) -> np.ndarray:
    """All basis-operator images w_k = b_{k,K}(L/2) z, shape (K+1, n[, d]).

    Triangular recurrence b_{k,r} = (1-t) b_{k,r-1} + t b_{k-1,r-1} with
    t = L/2 applied to vectors; sum_k w_k = z by partition of unity.
    """
    cols, squeeze = _as_columns(z)
    if cols.shape[0] != L.shape[0]:
        raise ValueError("dimension mismatch between operator and vector")
    level = [cols]
    for r in range(1, degree + 1):
        halves = [0.5 * (L @ w) for w in level]
        nxt = []
        for k in range(r + 1):
            w = np.zeros_like(cols)
            if k < r:
                w = w + level[k] - halves[k]
            if k > 0:
                w = w + halves[k - 1]
            nxt.append(w)
        level = nxt
    out = np.stack(level)
    return out[:, :, 0] if squeeze else out


@dataclass
class KhopReport:
    """Support check of P = p(L) against hop distances.

    P should have a nonzero entry (|P_ij| > tol) exactly where the hop
    distance is at most K. Violations list (i, j, distance, P_ij).
    """

    ok: bool
    degree: int
    tol: float
    violations: list = field(default_factory=list)


def check_complete_khop(L: sp.spmatrix, f: BernsteinFilter, tol: float = 1e-12) -> KhopReport:
    """Dense support check; feasible for n <= 200 only."""
    from scipy.sparse import csgraph

    n = L.shape[0]
    if n > 200:
        raise ValueError("dense k-hop check is restricted to n <= 200")
    pattern = sp.csr_matrix(L, copy=True)
    pattern.setdiag(0)
    pattern.eliminate_zeros()
    dist = csgraph.shortest_path(abs(pattern), method="D", unweighted=True)
    dense = dense_filter_matrix(L.toarray(), f)
    violations = []
    for i in range(n):
        for j in range(n):
            within = dist[i, j] <= f.degree
            nonzero = abs(dense[i, j]) > tol
            if within != nonzero:
                violations.append((i, j, dist[i, j], dense[i, j]))
    return KhopReport(ok=not violations, degree=f.degree, tol=tol, violations=violations)


def dense_filter_matrix(L_dense: np.ndarray, f: BernsteinFilter) -> np.ndarray:
    """p(L) as a dense matrix (Horner with dense matmuls); test/verification oracle."""
    a = monomial_coeffs(f)
    n = L_dense.shape[0]
    out = a[-1] * np.eye(n)
    for j in range(len(a) - 2, -1, -1):
        out = L_dense @ out + a[j] * np.eye(n)
    return out


def filter_to_dict(f: BernsteinFilter, num_samples: int = 101) -> dict:
    """Export schema: {"K", "theta", "samples": [[lam, p(lam)], ...]}."""
    lam = np.linspace(0.0, 2.0, num_samples)
    vals = eval_poly(f, lam)
    return {
        "K": f.degree,
        "theta": [float(t) for t in f.theta],
        "samples": [[float(l), float(v)] for l, v in zip(lam, vals)],
    }
