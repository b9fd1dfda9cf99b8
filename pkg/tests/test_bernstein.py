import math

import numpy as np
import pytest
import sympy
from hypothesis import given, settings
from hypothesis import strategies as st

from tikgraph.bernstein import (
    BernsteinFilter,
    apply_basis_all,
    apply_filter,
    bernstein_basis,
    check_complete_khop,
    dense_filter_matrix,
    eval_poly,
    eval_poly_grad,
    filter_to_dict,
    logit,
    make_filter,
    monomial_coeffs,
    sigmoid,
)
from tikgraph.graph import build_graph, normalized_laplacian

finite_theta = st.lists(
    st.floats(min_value=-6.0, max_value=6.0, allow_nan=False), min_size=2, max_size=11
)


def sympy_monomials(coeffs):
    """Independent symbolic expansion of sum_k c_k b_{k,K}(lam/2)."""
    lam = sympy.Symbol("lam")
    K = len(coeffs) - 1
    t = lam / 2
    p = sum(
        sympy.Rational(math.comb(K, k)) * sympy.Float(c, 30) * t**k * (1 - t) ** (K - k)
        for k, c in enumerate(coeffs)
    )
    poly = sympy.Poly(sympy.expand(p), lam)
    out = np.zeros(K + 1)
    for j, c in enumerate(reversed(poly.all_coeffs())):
        out[j] = float(c)
    return out


class TestEvalPoly:
    def test_flat_theta_gives_half(self):
        f = BernsteinFilter(np.zeros(6))
        lam = np.linspace(0, 2, 100)
        np.testing.assert_allclose(eval_poly(f, lam), 0.5, atol=1e-15)

    def test_right_endpoint_is_last_coefficient(self):
        f = BernsteinFilter(np.array([0.7, -1.3]))
        assert eval_poly(f, 2.0) == pytest.approx(sigmoid(-1.3), abs=1e-15)
        assert eval_poly(f, 0.0) == pytest.approx(sigmoid(0.7), abs=1e-15)

    def test_linear_reproduction_exact(self):
        # theta_k = logit(k/K) makes p(lam) = lam/2 (endpoints hit +-inf)
        K = 5
        f = BernsteinFilter(logit(np.arange(K + 1) / K))
        lam = np.linspace(0, 2, 100)
        assert np.abs(eval_poly(f, lam) - lam / 2).max() <= 1e-12

    def test_domain_check(self):
        f = make_filter(3, "flat")
        with pytest.raises(ValueError, match=r"\[0, 2\]"):
            eval_poly(f, 2.5)
        with pytest.raises(ValueError, match=r"\[0, 2\]"):
            eval_poly(f, -0.1)

    @settings(max_examples=50, deadline=None)
    @given(theta=finite_theta)
    def test_strictly_inside_unit_band(self, theta):
        f = BernsteinFilter(np.array(theta))
        vals = eval_poly(f, np.linspace(0, 2, 100))
        assert np.all(vals > 0.0)
        assert np.all(vals < 1.0)

    @settings(max_examples=40, deadline=None)
    @given(theta=finite_theta)
    def test_de_casteljau_matches_horner(self, theta):
        f = BernsteinFilter(np.array(theta))
        lam = np.linspace(0, 2, 57)
        a = monomial_coeffs(f)
        horner = np.zeros_like(lam) + a[-1]
        for j in range(len(a) - 2, -1, -1):
            horner = horner * lam + a[j]
        np.testing.assert_allclose(eval_poly(f, lam), horner, rtol=1e-10, atol=1e-12)

    def test_gradient_matches_finite_differences(self):
        rng = np.random.default_rng(0)
        f = BernsteinFilter(rng.normal(size=6))
        lam = np.array([0.0, 0.31, 1.0, 1.7, 2.0])
        grad = eval_poly_grad(f, lam)
        step = 1e-6
        for k in range(6):
            tp, tm = f.theta.copy(), f.theta.copy()
            tp[k] += step
            tm[k] -= step
            fd = (eval_poly(BernsteinFilter(tp), lam) - eval_poly(BernsteinFilter(tm), lam)) / (2 * step)
            np.testing.assert_allclose(grad[k], fd, rtol=1e-6, atol=1e-12)


class TestMonomialCoeffs:
    def test_constant_half(self):
        np.testing.assert_allclose(
            monomial_coeffs(BernsteinFilter(np.zeros(4))), [0.5, 0, 0, 0], atol=1e-15
        )

    def test_linear_k5(self):
        f = BernsteinFilter(logit(np.arange(6) / 5))
        np.testing.assert_allclose(monomial_coeffs(f), [0, 0.5, 0, 0, 0, 0], atol=1e-15)

    def test_degree_one_algebra(self):
        theta = np.array([0.3, -1.1])
        a = monomial_coeffs(BernsteinFilter(theta))
        s0, s1 = sigmoid(0.3), sigmoid(-1.1)
        np.testing.assert_allclose(a, [s0, (s1 - s0) / 2.0], atol=1e-15)

    def test_matches_sympy_expansion(self):
        rng = np.random.default_rng(1)
        for K in (2, 5, 8):
            f = BernsteinFilter(rng.normal(size=K + 1))
            expected = sympy_monomials(f.coefficients())
            np.testing.assert_allclose(monomial_coeffs(f), expected, rtol=1e-10, atol=1e-12)

    def test_degree_cap(self):
        with pytest.raises(ValueError, match="degree"):
            monomial_coeffs(BernsteinFilter(np.zeros(17)))

    def test_grid_agreement_for_k10(self):
        rng = np.random.default_rng(2)
        f = BernsteinFilter(rng.normal(size=11))
        lam = np.linspace(0, 2, 80)
        a = monomial_coeffs(f)
        vals = sum(a[j] * lam**j for j in range(11))
        np.testing.assert_allclose(vals, eval_poly(f, lam), atol=1e-10)


class TestApplyFilter:
    def test_zero_vector(self):
        g = build_graph([(0, 1), (1, 2)], 3)
        f = make_filter(5, "linear")
        np.testing.assert_array_equal(
            apply_filter(normalized_laplacian(g), f, np.zeros(3)), np.zeros(3)
        )

    def test_constant_filter_scales(self):
        g = build_graph([(0, 1), (1, 2), (0, 2)], 3)
        f = make_filter(4, "flat")
        x = np.array([1.0, -2.0, 0.5])
        np.testing.assert_allclose(
            apply_filter(normalized_laplacian(g), f, x), 0.5 * x, atol=1e-14
        )

    def test_two_node_ramp(self):
        g = build_graph([(0, 1)], 2)
        f = BernsteinFilter(logit(np.array([0.0, 1.0])))  # p(lam) = lam/2
        out = apply_filter(normalized_laplacian(g), f, np.array([1.0, 0.0]))
        np.testing.assert_allclose(out, [0.5, -0.5], atol=1e-14)

    def test_matches_dense_on_random_graphs(self):
        rng = np.random.default_rng(3)
        for _ in range(5):
            n = int(rng.integers(10, 200))
            iu, ju = np.triu_indices(n, k=1)
            keep = rng.random(len(iu)) < 4.0 / n
            g = build_graph(list(zip(iu[keep].tolist(), ju[keep].tolist())), n)
            lap = normalized_laplacian(g)
            f = BernsteinFilter(rng.normal(size=6))
            x = rng.normal(size=n)
            dense = dense_filter_matrix(lap.toarray(), f) @ x
            got = apply_filter(lap, f, x)
            assert np.linalg.norm(got - dense) <= 1e-9 * max(np.linalg.norm(dense), 1.0)

    def test_dimension_mismatch(self):
        g = build_graph([(0, 1)], 2)
        with pytest.raises(ValueError, match="mismatch"):
            apply_filter(normalized_laplacian(g), make_filter(3, "flat"), np.ones(5))


class TestApplyBasisAll:
    def test_degree_one_base_case(self):
        g = build_graph([(0, 1), (1, 2)], 3)
        lap = normalized_laplacian(g)
        z = np.array([0.5, -1.0, 2.0])
        w = apply_basis_all(lap, 1, z)
        np.testing.assert_allclose(w[0], z - 0.5 * (lap @ z), atol=1e-14)
        np.testing.assert_allclose(w[1], 0.5 * (lap @ z), atol=1e-14)

    def test_partition_of_unity(self):
        rng = np.random.default_rng(4)
        g = build_graph([(0, 1), (1, 2), (2, 3), (0, 3), (1, 3)], 4)
        lap = normalized_laplacian(g)
        for K in (1, 3, 6):
            z = rng.normal(size=4)
            w = apply_basis_all(lap, K, z)
            assert np.abs(w.sum(axis=0) - z).max() <= 1e-10

    def test_matches_dense_polynomial_of_matrix(self):
        # independent oracle: eigendecompose L and apply scalar basis values
        g = build_graph([(0, 1), (1, 2), (0, 2)], 3)
        lap = normalized_laplacian(g).toarray()
        rng = np.random.default_rng(5)
        z = rng.normal(size=3)
        eigval, eigvec = np.linalg.eigh(lap)
        w = apply_basis_all(normalized_laplacian(g), 3, z)
        basis_at_eigs = bernstein_basis(3, eigval / 2.0)
        for k in range(4):
            dense = eigvec @ (basis_at_eigs[k] * (eigvec.T @ z))
            np.testing.assert_allclose(w[k], dense, atol=1e-12)


class TestCompleteKhop:
    def test_path_of_eight_k3(self):
        rng = np.random.default_rng(6)
        g = build_graph([(i, i + 1) for i in range(7)], 8)
        report = check_complete_khop(normalized_laplacian(g), BernsteinFilter(rng.normal(size=4)))
        assert report.ok, report.violations

    def test_exact_zero_beyond_degree(self):
        g = build_graph([(i, i + 1) for i in range(7)], 8)
        f = BernsteinFilter(np.random.default_rng(7).normal(size=4))
        dense = dense_filter_matrix(normalized_laplacian(g).toarray(), f)
        assert dense[0, 7] == 0.0  # distance 7 > K=3: exact zero
        assert dense[0, 4] == 0.0

    def test_single_node(self):
        g = build_graph([], 1)
        f = BernsteinFilter(np.array([0.4, -0.2]))
        report = check_complete_khop(normalized_laplacian(g), f)
        assert report.ok
        dense = dense_filter_matrix(normalized_laplacian(g).toarray(), f)
        assert dense[0, 0] == pytest.approx(eval_poly(f, 0.0))

    def test_size_cap(self):
        g = build_graph([(i, i + 1) for i in range(250)], 251)
        with pytest.raises(ValueError, match="n <= 200"):
            check_complete_khop(normalized_laplacian(g), make_filter(3, "flat"))


class TestPresets:
    def test_flat(self):
        f = make_filter(5, "flat")
        assert np.all(f.theta == 0.0)
        assert f.trainable

    def test_linear_close_to_ramp(self):
        f = make_filter(5, "linear")
        lam = np.linspace(0, 2, 50)
        assert np.abs(eval_poly(f, lam) - lam / 2).max() < 2.5e-3
        assert np.all(np.isfinite(f.theta))

    def test_fixed_ramp(self):
        f = make_filter(5, "fixed")
        assert not f.trainable
        eps = 1e-3
        lam = np.linspace(0, 2, 50)
        np.testing.assert_allclose(eval_poly(f, lam), eps + (0.5 - eps) * lam, atol=1e-12)

    def test_unknown_init(self):
        with pytest.raises(ValueError, match="init"):
            make_filter(5, "mystery")


def test_export_schema():
    f = make_filter(5, "flat")
    d = filter_to_dict(f)
    assert d["K"] == 5
    assert len(d["theta"]) == 6
    assert len(d["samples"]) == 101
    assert d["samples"][0][0] == 0.0
    assert d["samples"][-1][0] == 2.0
    assert all(0.0 < v < 1.0 for _, v in d["samples"])
