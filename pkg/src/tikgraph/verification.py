"""Mechanical verification suite: randomized dense-algebra checks of every
structural property of the resolvent R = (p(L) + Q)^{-1} Q.

Each property id pairs a seeded instance sampler with a deterministic checker;
failures serialize the full instance (graph JSON, theta, q, extras) so a
single case can be replayed bit-for-bit. Checkers deliberately use general
dense solves (LU, symmetric eigendecompositions of explicitly formed
matrices) rather than the library's optimized paths, so they stay independent
oracles.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, asdict

import numpy as np
import scipy.linalg

from .bernstein import BernsteinFilter, check_complete_khop, dense_filter_matrix, eval_poly
from .graph import Graph, all_hop_distances, build_graph, graph_from_dict, graph_to_dict
from .graph import normalized_laplacian
from .seeding import rng_for
from .solver import TikhonovOperator, backward as solver_backward, forward as solver_forward
from .solver import multichannel_forward, pcg_solve

# Patch point used by every checker; fault-injection tests replace it.
_laplacian = normalized_laplacian

VERIFY_TOL = 1e-12


def _verify_iters(n: int) -> int:
    return 10 * max(n, 1)


@dataclass
class PropertyReport:
    property_id: str
    trials: int
    failures: list = field(default_factory=list)
    worst_margin: float = math.inf

    @property
    def passed(self) -> bool:
        return not self.failures

    def to_dict(self) -> dict:
        return {
            "trials": self.trials,
            "failures": self.failures,
            "worst_margin": self.worst_margin,
            "pass": self.passed,
        }


# ---------------------------------------------------------------------------
# instance sampling


def _connected_er(rng, n, mean_degree=3.0):
    p = min(1.0, mean_degree / max(n - 1, 1))
    for _ in range(200):
        iu, ju = np.triu_indices(n, k=1)
        hit = rng.random(len(iu)) < p
        g = build_graph(list(zip(iu[hit].tolist(), ju[hit].tolist())), n)
        if g.num_components == 1:
            return g
    raise RuntimeError("failed to sample a connected graph")


def _path(n):
    return build_graph([(i, i + 1) for i in range(n - 1)], n)


def _cycle(n):
    return build_graph([(i, (i + 1) % n) for i in range(n)], n)


def _tree(rng, n):
    edges = [(int(rng.integers(0, i)), i) for i in range(1, n)]
    return build_graph(edges, n)


def random_graph(rng, n_cap=100, family=None) -> Graph:
    """Random trial graph from one of five families: connected ER, path,
    cycle, random tree, or a two-component union of two of those."""
    family = family or rng.choice(["er", "path", "cycle", "tree", "union"])
    n = int(rng.integers(4, max(5, n_cap + 1)))
    if family == "er":
        return _connected_er(rng, n)
    if family == "path":
        return _path(n)
    if family == "cycle":
        return _cycle(n)
    if family == "tree":
        return _tree(rng, n)
    n1 = max(2, n // 2)
    n2 = max(2, n - n1)
    g1 = _tree(rng, n1)
    g2 = _connected_er(rng, n2)
    e1, _ = g1.edge_list()
    e2, _ = g2.edge_list()
    edges = [tuple(e) for e in e1.tolist()] + [(i + n1, j + n1) for i, j in e2.tolist()]
    return build_graph(edges, n1 + n2)


def _random_theta(rng, degree=None):
    k = int(rng.choice([1, 3, 5])) if degree is None else degree
    return rng.normal(0.0, 1.5, size=k + 1)


def _random_q(rng, n, decades=2.0):
    return 10.0 ** rng.uniform(-decades, decades, size=n)


def _dense_parts(g: Graph, theta, q):
    ld = _laplacian(g).toarray()
    filt = BernsteinFilter(np.asarray(theta, dtype=float))
    p = dense_filter_matrix(ld, filt)
    q = np.asarray(q, dtype=float)
    m = p + np.diag(q)
    r = scipy.linalg.solve(m, np.diag(q))
    return ld, p, m, r


def _instance(pid, g, theta, q, **extra):
    inst = {
        "property": pid,
        "graph": graph_to_dict(g),
        "theta": [float(t) for t in np.ravel(theta)],
        "q": [float(v) for v in np.ravel(q)],
    }
    inst.update(extra)
    return inst


def _graph_of(inst) -> Graph:
    return graph_from_dict(inst["graph"])


# ---------------------------------------------------------------------------
# P1: spectrum in (0,1), plus the vanishing-norm (oversmoothing) bound


def _sample_p1_spectrum(rng, n_cap):
    g = random_graph(rng, min(n_cap, 100))
    theta = _random_theta(rng)
    # every third draw uses uniformly tiny q to exercise ||R|| -> 0
    if rng.random() < 1 / 3:
        q = 10.0 ** rng.uniform(-6.0, -3.0, size=g.n)
    else:
        q = _random_q(rng, g.n)
    return _instance("P1_spectrum", g, theta, q)


def _check_p1_spectrum(inst):
    g = _graph_of(inst)
    theta, q = np.array(inst["theta"]), np.array(inst["q"])
    ld, p, m, r = _dense_parts(g, theta, q)
    qs = 1.0 / np.sqrt(q)
    sym = qs[:, None] * p * qs[None, :]
    eigs = 1.0 / (1.0 + scipy.linalg.eigvalsh(sym))
    margin = float(min(eigs.min(), 1.0 - eigs.max()))
    lam = scipy.linalg.eigvalsh(ld)
    p_min = float(eval_poly(BernsteinFilter(theta), np.clip(lam, 0.0, 2.0)).min())
    norm_bound = q.max() / p_min
    r_norm = float(np.linalg.norm(r, 2))
    ok = margin > 1e-10 and r_norm <= norm_bound
    detail = {"spectrum_margin": margin, "norm": r_norm, "norm_bound": norm_bound}
    return ok, margin, detail


# ---------------------------------------------------------------------------
# P1: symmetry iff q constant per component


def _sample_p1_symmetry(rng, n_cap):
    g = random_graph(rng, min(n_cap, 80))
    theta = _random_theta(rng)
    const = 10.0 ** rng.uniform(-1.5, 1.5, size=g.num_components)
    q_const = const[g.component_of]
    perturb = int(rng.integers(0, g.n))
    return _instance("P1_symmetry", g, theta, q_const, perturb_index=perturb)


def _check_p1_symmetry(inst):
    g = _graph_of(inst)
    theta, q = np.array(inst["theta"]), np.array(inst["q"])
    _, _, _, r = _dense_parts(g, theta, q)
    asym_const = float(np.abs(r - r.T).max())
    margin = 1e-10 - asym_const
    detail = {"asym_constant_q": asym_const}
    # A single perturbed entry must break symmetry on a component with >= 2 nodes.
    idx = int(inst["perturb_index"])
    comp_size = int(np.sum(g.component_of == g.component_of[idx]))
    if comp_size >= 2:
        q2 = q.copy()
        q2[idx] *= 2.5
        _, _, _, r2 = _dense_parts(g, theta, q2)
        asym_pert = float(np.abs(r2 - r2.T).max())
        detail["asym_perturbed_q"] = asym_pert
        margin = min(margin, asym_pert - 1e-8)
    ok = margin >= 0
    return ok, float(margin), detail


# ---------------------------------------------------------------------------
# P2: feature preservation and near-harmonicity bounds


def _sample_p2(rng, n_cap):
    g = random_graph(rng, min(n_cap, 80))
    theta = _random_theta(rng)
    q = _random_q(rng, g.n, decades=3.0)
    x = rng.normal(size=g.n)
    return _instance("P2_bounds", g, theta, q, x=[float(v) for v in x])


def _check_p2(inst):
    g = _graph_of(inst)
    theta, q = np.array(inst["theta"]), np.array(inst["q"])
    x = np.array(inst["x"])
    ld, p, m, r = _dense_parts(g, theta, q)
    z = r @ x
    lam = scipy.linalg.eigvalsh(ld)
    p_max = float(eval_poly(BernsteinFilter(theta), np.clip(lam, 0.0, 2.0)).max())
    xnorm = float(np.linalg.norm(x))
    slack1 = p_max / q * xnorm - np.abs(z - x)
    slack2 = np.sqrt(q) * math.sqrt(p_max) * xnorm - np.abs(p @ z)
    margin = float(min(slack1.min(), slack2.min()))
    return margin >= 0, margin, {"preservation_slack": float(slack1.min()), "harmonic_slack": float(slack2.min())}


# ---------------------------------------------------------------------------
# P3: spectral-filter equivalence iff homogeneous (commutation criterion)
#     plus the constructive density corollary on fixed targets


def _sample_p3(rng, n_cap):
    g = random_graph(rng, min(n_cap, 60), family=rng.choice(["er", "path", "cycle", "tree"]))
    theta = _random_theta(rng)
    q_hom = float(10.0 ** rng.uniform(-1.0, 1.0))
    q_het = _random_q(rng, g.n, decades=1.5)
    return _instance("P3_commutation", g, theta, q_het, q_hom=q_hom)


def _check_p3(inst):
    g = _graph_of(inst)
    theta = np.array(inst["theta"])
    q_het = np.array(inst["q"])
    ld, p, _, _ = _dense_parts(g, theta, np.full(g.n, inst["q_hom"]))
    _, _, _, r_hom = _dense_parts(g, theta, np.full(g.n, inst["q_hom"]))
    _, _, _, r_het = _dense_parts(g, theta, q_het)
    com_hom = float(np.abs(r_hom @ ld - ld @ r_hom).max())
    com_het = float(np.abs(r_het @ ld - ld @ r_het).max())
    margin = min(1e-9 - com_hom, com_het - 1e-8)
    return margin >= 0, float(margin), {"commutator_hom": com_hom, "commutator_het": com_het}


def _density_corollary(eps=0.05, grid=400):
    """Homogeneous rational filters q/(p+q) approximate fixed continuous
    targets to eps, with q < c/(1+c*eps) and a polynomial fit of q(1-h)/h."""
    lam = np.linspace(0.0, 2.0, grid)
    targets = {
        "bump": 0.3 + 0.25 * np.sin(math.pi * lam / 2.0) ** 2,
        "decay": 0.2 + 0.3 * np.exp(-lam),
    }
    results = {}
    for name, h in targets.items():
        c = float((h / (1.0 - h)).min())
        q = 0.9 * c / (1.0 + c * eps)
        f = q * (1.0 - h) / h
        cheb = np.polynomial.chebyshev.Chebyshev.fit(lam, f, deg=16, domain=[0.0, 2.0])
        p = cheb(lam)
        sup_fit = float(np.abs(p - f).max())
        approx = q / (p + q)
        sup_err = float(np.abs(approx - h).max())
        inside = bool(np.all(p > 0) and np.all(p < 1))
        results[name] = {
            "q": q,
            "fit_error": sup_fit,
            "sup_error": sup_err,
            "poly_in_unit_band": inside,
            "ok": bool(sup_err <= eps and inside and sup_fit < q * eps),
        }
    return results


# ---------------------------------------------------------------------------
# P4: receptive field


def _sample_p4(rng, n_cap):
    # The nonzero side is a float proxy for exact nonvanishing; entries decay
    # exponentially with hop distance, so connected trials use short-diameter
    # ER graphs and a modest q spread to keep true entries above the 1e-12
    # threshold. The cross-component side has no size constraint.
    g_union = random_graph(rng, min(n_cap, 60), family="union")
    n = int(rng.integers(4, min(n_cap, 40) + 1))
    g_conn = _connected_er(rng, n, mean_degree=3.5)
    th0 = rng.normal(0.0, 1.0)
    theta_lin = np.array([th0, th0 + abs(rng.normal(0.5, 0.5)) + 0.1])  # increasing degree 1
    theta_gen = _random_theta(rng, degree=int(rng.choice([2, 3, 5])))
    q_union = _random_q(rng, g_union.n)
    q_conn = _random_q(rng, g_conn.n, decades=1.0)
    return {
        "property": "P4_receptive",
        "graph": graph_to_dict(g_union),
        "theta": [float(t) for t in theta_gen],
        "q": [float(v) for v in q_union],
        "graph_connected": graph_to_dict(g_conn),
        "theta_linear": [float(t) for t in theta_lin],
        "q_connected": [float(v) for v in q_conn],
    }


def _check_p4(inst):
    g_u = _graph_of(inst)
    theta_gen = np.array(inst["theta"])
    q_u = np.array(inst["q"])
    _, _, _, r_u = _dense_parts(g_u, theta_gen, q_u)
    cross = g_u.component_of[:, None] != g_u.component_of[None, :]
    max_cross = float(np.abs(r_u[cross]).max()) if cross.any() else 0.0

    g_c = graph_from_dict(inst["graph_connected"])
    q_c = np.array(inst["q_connected"])
    _, _, _, r_lin = _dense_parts(g_c, np.array(inst["theta_linear"]), q_c)
    min_lin = float(r_lin.min())

    _, _, _, r_gen = _dense_parts(g_c, theta_gen[: len(theta_gen)], q_c)
    min_gen = float(np.abs(r_gen).min())

    ok = max_cross == 0.0 and min_lin > 0.0 and min_gen > 1e-12
    margin = min(-max_cross, min_lin, min_gen - 1e-12)
    return ok, float(margin), {
        "max_cross_component": max_cross,
        "min_entry_linear": min_lin,
        "min_abs_entry_generic": min_gen,
    }


# ---------------------------------------------------------------------------
# P5: spatial decay bound


def _sample_p5(rng, n_cap):
    n = int(rng.integers(5, min(50, max(6, n_cap)) + 1))
    g = _path(n)
    theta = _random_theta(rng)
    q = _random_q(rng, n, decades=1.5)
    return _instance("P5_decay", g, theta, q)


def _check_p5(inst):
    g = _graph_of(inst)
    theta, q = np.array(inst["theta"]), np.array(inst["q"])
    _, p, _, r = _dense_parts(g, theta, q)
    k = len(theta) - 1
    qs = 1.0 / np.sqrt(q)
    s = np.eye(g.n) + qs[:, None] * p * qs[None, :]
    eigs = scipy.linalg.eigvalsh(s)
    kappa = float(eigs.max() / eigs.min())
    dist = all_hop_distances(g)
    bound = 2.0 * np.sqrt(q[None, :] / q[:, None]) * np.exp(-2.0 * dist / (k * math.sqrt(kappa)))
    slack = bound - np.abs(r)
    margin = float(slack.min())
    return margin >= 0, margin, {"kappa": kappa, "min_slack": margin}


# ---------------------------------------------------------------------------
# P6: injectivity of Q -> R


def _sample_p6(rng, n_cap):
    g = random_graph(rng, min(n_cap, 50))
    theta = _random_theta(rng)
    q = _random_q(rng, g.n)
    idx = int(rng.integers(0, g.n))
    factor = float(rng.uniform(1.5, 3.0))
    return _instance("P6_injectivity", g, theta, q, perturb_index=idx, factor=factor)


def _check_p6(inst):
    g = _graph_of(inst)
    theta, q = np.array(inst["theta"]), np.array(inst["q"])
    q2 = q.copy()
    q2[int(inst["perturb_index"])] *= inst["factor"]
    _, _, _, r1 = _dense_parts(g, theta, q)
    _, _, _, r2 = _dense_parts(g, theta, q2)
    diff = float(np.abs(r1 - r2).max())
    margin = diff - 1e-12
    return margin > 0, float(margin), {"max_resolvent_diff": diff}


# ---------------------------------------------------------------------------
# P7: joint rescaling invariance


def _sample_p7(rng, n_cap):
    g = random_graph(rng, min(n_cap, 50))
    theta = _random_theta(rng)
    q = _random_q(rng, g.n)
    return _instance("P7_rescaling", g, theta, q, alphas=[0.5, 2.0])


def _check_p7(inst):
    g = _graph_of(inst)
    theta, q = np.array(inst["theta"]), np.array(inst["q"])
    ld = _laplacian(g).toarray()
    p = dense_filter_matrix(ld, BernsteinFilter(theta))
    base = scipy.linalg.solve(p + np.diag(q), np.diag(q))
    worst = 0.0
    for alpha in inst["alphas"]:
        # alpha*p may leave (0,1); build the scaled operator as a raw matrix
        scaled = scipy.linalg.solve(alpha * p + np.diag(alpha * q), np.diag(alpha * q))
        worst = max(worst, float(np.abs(base - scaled).max()))
    margin = 1e-9 - worst
    return margin >= 0, float(margin), {"max_rescaling_diff": worst}


# ---------------------------------------------------------------------------
# P8: multichannel permutation structure


def _sample_p8(rng, n_cap):
    g = random_graph(rng, min(n_cap, 40), family=rng.choice(["er", "path", "tree"]))
    theta_a = _random_theta(rng, degree=3)
    theta_b = _random_theta(rng, degree=3)
    q_a = _random_q(rng, g.n, decades=1.0)
    q_b = _random_q(rng, g.n, decades=1.0)
    h = rng.normal(size=(g.n, 2))
    return {
        "property": "P8_multichannel",
        "graph": graph_to_dict(g),
        "theta": [float(t) for t in theta_a],
        "q": [float(v) for v in q_a],
        "theta_b": [float(t) for t in theta_b],
        "q_b": [float(v) for v in q_b],
        "h": [[float(v) for v in row] for row in h],
    }


def _check_p8(inst):
    g = _graph_of(inst)
    h = np.array(inst["h"])
    op_a = TikhonovOperator(g, BernsteinFilter(np.array(inst["theta"])), np.array(inst["q"]))
    op_b = TikhonovOperator(g, BernsteinFilter(np.array(inst["theta_b"])), np.array(inst["q_b"]))
    iters = _verify_iters(g.n)
    z_ab, _ = multichannel_forward([op_a, op_b], h, VERIFY_TOL, iters)
    z_ba, _ = multichannel_forward([op_b, op_a], h, VERIFY_TOL, iters)
    d = h.shape[1]
    swap_err = float(
        max(np.abs(z_ab[:, :d] - z_ba[:, d:]).max(), np.abs(z_ab[:, d:] - z_ba[:, :d]).max())
    )
    single = solver_forward(op_a, h, VERIFY_TOL, iters)
    single_err = float(np.abs(z_ab[:, :d] - single.z).max())
    margin = 1e-12 - max(swap_err, single_err)
    return margin >= 0, float(margin), {"swap_error": swap_err, "single_channel_error": single_err}


# ---------------------------------------------------------------------------
# L1: complete K-hop support


def _sample_l1(rng, n_cap):
    g = random_graph(rng, min(n_cap, 40), family=rng.choice(["er", "path", "cycle", "tree", "union"]))
    theta = _random_theta(rng)
    return _instance("L1_khop", g, theta, np.ones(g.n))


def _check_l1(inst):
    g = _graph_of(inst)
    theta = np.array(inst["theta"])
    report = check_complete_khop(_laplacian(g), BernsteinFilter(theta))
    k = len(theta) - 1
    dist = all_hop_distances(g)
    dense = dense_filter_matrix(_laplacian(g).toarray(), BernsteinFilter(theta))
    within = dist <= k
    min_within = float(np.abs(dense[within]).min()) if within.any() else math.inf
    margin = min_within - 1e-12
    return report.ok, float(margin), {
        "violations": len(report.violations),
        "min_abs_within_k": min_within,
    }


# ---------------------------------------------------------------------------
# V: variational identity


def _sample_v(rng, n_cap):
    g = random_graph(rng, min(n_cap, 60))
    theta = _random_theta(rng)
    q = _random_q(rng, g.n)
    x = rng.normal(size=g.n)
    deltas = rng.normal(size=(100, g.n))
    return _instance(
        "V_variational", g, theta, q,
        x=[float(v) for v in x],
        deltas=[[float(v) for v in row] for row in deltas],
    )


def _check_v(inst):
    g = _graph_of(inst)
    theta, q = np.array(inst["theta"]), np.array(inst["q"])
    x = np.array(inst["x"])
    filt = BernsteinFilter(theta)
    op = TikhonovOperator(g, filt, q)
    res = solver_forward(op, x, VERIFY_TOL, _verify_iters(g.n), precond="exact")
    z = res.z
    ld = _laplacian(g).toarray()
    p = dense_filter_matrix(ld, filt)

    def functional(v):
        return float(np.sum(q * (x - v) ** 2) + v @ (p @ v))

    grad = 2.0 * (p @ z + q * z - q * x)
    gtol = 10.0 * VERIFY_TOL * float(np.linalg.norm(q * x))
    grad_norm = float(np.linalg.norm(grad))
    f0 = functional(z)
    worst_gap = math.inf
    for row in inst["deltas"]:
        delta = np.array(row)
        delta *= 1e-2 * max(1.0, float(np.linalg.norm(z))) / max(np.linalg.norm(delta), 1e-30)
        worst_gap = min(worst_gap, functional(z + delta) - f0)
    ok = bool(res.all_converged()) and grad_norm <= gtol and worst_gap >= 0
    margin = min(gtol - grad_norm, worst_gap)
    return ok, float(margin), {
        "grad_norm": grad_norm,
        "grad_tolerance": gtol,
        "worst_perturbation_gap": worst_gap,
        "solver_converged": bool(res.all_converged()),
    }


# ---------------------------------------------------------------------------
# R1: truncated-solver reach


def _sample_r1(rng, n_cap):
    n = int(rng.integers(12, min(30, max(13, n_cap)) + 1))
    g = _path(n)
    k = int(rng.choice([1, 2, 3]))
    theta = _random_theta(rng, degree=k)
    q = _random_q(rng, n, decades=1.0)
    t = int(rng.choice([2, 3, 4]))
    return _instance("R1_reach", g, theta, q, iterations=t)


def _check_r1(inst):
    g = _graph_of(inst)
    theta, q = np.array(inst["theta"]), np.array(inst["q"])
    t = int(inst["iterations"])
    k = len(theta) - 1
    op = TikhonovOperator(g, BernsteinFilter(theta), q)
    # Probe every basis vector at once: column j of the result is the t-step
    # PCG approximation of R e_j; entries beyond (t-1)K hops must be exact zeros.
    rhs = np.diag(q)
    res = pcg_solve(op.matvec, rhs, op.precond_diag("approx"), tol=0.0, max_iter=t)
    dist = all_hop_distances(g)
    outside = dist > (t - 1) * k
    leaked = float(np.abs(res.z[outside]).max()) if outside.any() else 0.0
    ok = leaked == 0.0
    return ok, -leaked, {"max_leak_beyond_reach": leaked, "iterations": t, "degree": k}


# ---------------------------------------------------------------------------
# G: implicit-differentiation gradients vs. finite differences


def _sample_g(rng, n_cap):
    g = random_graph(rng, min(n_cap, 30))
    theta = _random_theta(rng, degree=int(rng.choice([1, 2, 3])))
    q = _random_q(rng, g.n, decades=1.5)
    d = int(rng.integers(1, 4))
    x = rng.normal(size=(g.n, d))
    zbar = rng.normal(size=(g.n, d))
    return _instance(
        "G_gradients", g, theta, q,
        x=[[float(v) for v in row] for row in x],
        zbar=[[float(v) for v in row] for row in zbar],
    )


def _dense_objective(g, theta, q, x, zbar):
    ld = _laplacian(g).toarray()
    p = dense_filter_matrix(ld, BernsteinFilter(np.asarray(theta)))
    z = scipy.linalg.solve(p + np.diag(q), q[:, None] * x)
    return float(np.sum(zbar * z))


def _rel_err(got, want):
    denom = max(float(np.linalg.norm(want)), 1e-12)
    return float(np.linalg.norm(got - want)) / denom


def _check_g(inst):
    g = _graph_of(inst)
    theta, q = np.array(inst["theta"]), np.array(inst["q"])
    x = np.array(inst["x"])
    zbar = np.array(inst["zbar"])
    op = TikhonovOperator(g, BernsteinFilter(theta), q)
    iters = _verify_iters(g.n)
    fwd = solver_forward(op, x, VERIFY_TOL, iters, precond="exact")
    bwd = solver_backward(op, x, fwd.z, zbar, VERIFY_TOL, iters, precond="exact")

    def fd(setter, base, h):
        hi = setter(base + h)
        lo = setter(base - h)
        return (hi - lo) / (2.0 * h)

    fd_theta = np.zeros_like(theta)
    for k in range(len(theta)):
        h = 1e-5 * max(1.0, abs(theta[k]))
        tp, tm = theta.copy(), theta.copy()
        tp[k] += h
        tm[k] -= h
        fd_theta[k] = (_dense_objective(g, tp, q, x, zbar) - _dense_objective(g, tm, q, x, zbar)) / (2 * h)
    fd_q = np.zeros_like(q)
    for i in range(g.n):
        h = 1e-5 * max(1.0, abs(q[i]))
        qp, qm = q.copy(), q.copy()
        qp[i] += h
        qm[i] -= h
        fd_q[i] = (_dense_objective(g, theta, qp, x, zbar) - _dense_objective(g, theta, qm, x, zbar)) / (2 * h)
    fd_x = np.zeros_like(x)
    for i in range(x.shape[0]):
        for c in range(x.shape[1]):
            h = 1e-5 * max(1.0, abs(x[i, c]))
            xp, xm = x.copy(), x.copy()
            xp[i, c] += h
            xm[i, c] -= h
            fd_x[i, c] = (_dense_objective(g, theta, q, xp, zbar) - _dense_objective(g, theta, q, xm, zbar)) / (2 * h)

    errs = {
        "dtheta": _rel_err(bwd.dtheta, fd_theta),
        "dq": _rel_err(bwd.dq, fd_q),
        "dx": _rel_err(bwd.dx, fd_x),
    }
    worst = max(errs.values())
    margin = 1e-4 - worst
    return margin >= 0, float(margin), errs


# ---------------------------------------------------------------------------
# registry and drivers


PROPERTY_DEFS = {
    "P1_spectrum": (_sample_p1_spectrum, _check_p1_spectrum),
    "P1_symmetry": (_sample_p1_symmetry, _check_p1_symmetry),
    "P2_bounds": (_sample_p2, _check_p2),
    "P3_commutation": (_sample_p3, _check_p3),
    "P4_receptive": (_sample_p4, _check_p4),
    "P5_decay": (_sample_p5, _check_p5),
    "P6_injectivity": (_sample_p6, _check_p6),
    "P7_rescaling": (_sample_p7, _check_p7),
    "P8_multichannel": (_sample_p8, _check_p8),
    "L1_khop": (_sample_l1, _check_l1),
    "V_variational": (_sample_v, _check_v),
    "R1_reach": (_sample_r1, _check_r1),
    "G_gradients": (_sample_g, _check_g),
}

DEFAULT_TRIALS = {pid: 100 for pid in PROPERTY_DEFS}
DEFAULT_TRIALS["P1_spectrum"] = 200


def run_property(property_id: str, trials: int | None = None, seed: int = 0, n_cap: int = 100) -> PropertyReport:
    """Run one property id over seeded random instances."""
    if property_id not in PROPERTY_DEFS:
        raise ValueError(f"unknown property id {property_id!r}")
    sampler, checker = PROPERTY_DEFS[property_id]
    trials = DEFAULT_TRIALS[property_id] if trials is None else trials
    rng = rng_for(seed, f"verify/{property_id}")
    report = PropertyReport(property_id=property_id, trials=trials)
    for trial in range(trials):
        inst = sampler(rng, n_cap)
        ok, margin, detail = checker(inst)
        report.worst_margin = min(report.worst_margin, margin)
        if not ok:
            report.failures.append(
                {"trial": trial, "margin": margin, "detail": detail, "instance": inst}
            )
    if property_id == "P3_commutation":
        density = _density_corollary()
        if not all(r["ok"] for r in density.values()):
            report.failures.append(
                {"trial": -1, "margin": 0.0, "detail": {"density_corollary": density}, "instance": None}
            )
    return report


def run_all(seed: int = 0, trials: dict | int | None = None, only=None, n_cap: int = 100) -> dict:
    """Run every property id; returns a JSON-ready summary."""
    properties = {}
    for pid in PROPERTY_DEFS:
        if only and not any(s in pid for s in only):
            continue
        t = trials.get(pid) if isinstance(trials, dict) else trials
        properties[pid] = run_property(pid, t, seed, n_cap)
    return {
        "seed": seed,
        "properties": {pid: rep.to_dict() for pid, rep in properties.items()},
        "all_passed": all(rep.passed for rep in properties.values()),
    }


def replay(instance: dict):
    """Re-run a serialized failure instance; returns (ok, margin, detail)."""
    pid = instance["property"]
    if pid not in PROPERTY_DEFS:
        raise ValueError(f"unknown property id {pid!r}")
    _, checker = PROPERTY_DEFS[pid]
    return checker(instance)


def format_table(summary: dict) -> str:
    rows = [f"{'property':<18} {'trials':>6} {'fail':>5} {'worst margin':>14}  status"]
    for pid, rep in summary["properties"].items():
        status = "pass" if rep["pass"] else "FAIL"
        rows.append(
            f"{pid:<18} {rep['trials']:>6} {len(rep['failures']):>5} {rep['worst_margin']:>14.3e}  {status}"
        )
    rows.append("overall: " + ("pass" if summary["all_passed"] else "FAIL"))
    return "\n".join(rows)
