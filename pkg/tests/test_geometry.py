import math

import numpy as np
import pytest
import sympy as sp
from conftest import S3_BOX, s3_field, s3_frame, s3_metric
from oracles import X1, X2, X3, fd_christoffel, fd_gradient, lambdify_nested, sympy_christoffel

from torselab import exprlang as el
from torselab.errors import SchemaError, SingularMetric
from torselab.geometry import (
    Chart,
    MetricField,
    OneForm,
    VectorField,
    basis_field,
    christoffel,
    covariant_derivative,
    exterior_derivative,
    flat,
    flat_field,
    frame_connection,
    frame_matrix,
    gradient,
    lie_derivative_metric,
    orthonormality_residual,
    sharp,
)
from torselab.torse import fit_torse

EUCLID3 = MetricField.diagonal(["1", "1", "1"])
P_S3 = np.array([math.pi / 4, math.pi / 3, 1.0])

# Example 2.5 family with the fully general alpha(y, z), beta(y, z)
LAM, H = "exp(x1)", "exp(x1)*sqrt(1+exp(2*x1))"
ALPHA, BETA = "2 + sin(x2)*cos(x3)", "2 + cos(x2)*sin(x3)"


def warped(lam=LAM, h=H, alpha=ALPHA, beta=BETA) -> MetricField:
    return MetricField.diagonal([f"({lam})^2", f"({h})^2*({alpha})^2", f"({h})^2*({beta})^2"])


def test_chart_sampling_is_seeded_and_inside_box():
    chart = Chart.standard(S3_BOX)
    a, b = chart.sample(64, 3), chart.sample(64, 3)
    assert a.shape == (64, 3)
    np.testing.assert_array_equal(a, b)
    lo, hi = np.array(S3_BOX).T
    assert np.all(a > lo) and np.all(a < hi)
    assert not np.array_equal(a, chart.sample(64, 4))


@pytest.mark.parametrize("box", [[], [(0, 1)] * 10, [(1.0, 0.0)], [(0.0, math.inf)]])
def test_chart_rejects_bad_boxes(box):
    with pytest.raises(SchemaError):
        Chart.standard(box)


def test_metric_must_be_symmetric():
    with pytest.raises(SchemaError):
        MetricField.from_rows([["1", "x1"], ["0", "1"]])


def test_euclidean_christoffels_vanish():
    c = christoffel(EUCLID3, [0.3, -1.0, 2.0])
    assert np.all(c.gamma == 0.0)


def test_singular_metric():
    g = MetricField.diagonal(["1", "x2^2"])
    with pytest.raises(SingularMetric):
        christoffel(g, [1.0, 0.0])
    with pytest.raises(SingularMetric):
        christoffel(MetricField.diagonal(["1", "-1"]), [0.0, 0.0])


def test_s3_frame_derivative_e2_e1():
    C = frame_connection(s3_metric(), s3_frame(), P_S3)
    np.testing.assert_allclose(C[1, 0], [0.0, 1.0, 0.0], atol=1e-14)  # cot(pi/4) e2


def test_warped_frame_derivative_e2_e1():
    g = warped(lam="exp(x1)", h="exp(x1)", alpha="1", beta="1")
    frame = [VectorField.of("exp(-x1)", "0", "0"), VectorField.of("0", "exp(-x1)", "0"), VectorField.of("0", "0", "exp(-x1)")]
    C = frame_connection(g, frame, [0.0, 0.0, 0.0])
    np.testing.assert_allclose(C[1, 0], [0.0, 1.0, 0.0], atol=1e-14)  # h'/(lam h) = 1 at 0


def _np_warped(p):
    x, y, z = p
    lam = math.exp(x)
    h = math.exp(x) * math.sqrt(1 + math.exp(2 * x))
    a = 2 + math.sin(y) * math.cos(z)
    b = 2 + math.cos(y) * math.sin(z)
    return np.diag([lam**2, h**2 * a**2, h**2 * b**2])


def test_christoffel_matches_finite_difference_koszul(rng):
    g = warped()
    for p in rng.uniform(-1, 1, (10, 3)):
        np.testing.assert_allclose(christoffel(g, p).gamma, fd_christoffel(_np_warped, p), atol=1e-7)


def test_christoffel_matches_sympy_on_general_metric():
    # non-diagonal metric so every Koszul term contributes
    G = sp.Matrix(
        [
            [2 + sp.sin(X2) ** 2, X1 * X3 / 4, 0],
            [X1 * X3 / 4, 1 + X1**2, sp.cos(X3) / 3],
            [0, sp.cos(X3) / 3, sp.exp(X1 / 2)],
        ]
    )
    ref = lambdify_nested(sympy_christoffel(G))
    g = MetricField.from_rows(
        [
            ["2 + sin(x2)^2", "x1*x3/4", "0"],
            ["x1*x3/4", "1 + x1^2", "cos(x3)/3"],
            ["0", "cos(x3)/3", "exp(x1/2)"],
        ]
    )
    for p in np.random.default_rng(1).uniform(-0.8, 0.8, (16, 3)):
        np.testing.assert_allclose(christoffel(g, p).gamma, ref(p), atol=1e-13)


def test_constant_field_flat_space():
    V = VectorField.of("1", "-2", "0.5")
    X = VectorField.of("x2", "x1*x3", "sin(x1)")
    np.testing.assert_allclose(covariant_derivative(EUCLID3, V, X, [0.2, 0.4, 1.1]), 0.0, atol=0)


def test_s3_covariant_derivative_along_e3():
    x1, x2, x3 = P_S3
    h, dh = 2 + math.sin(x3), math.cos(x3)
    g, frame = s3_metric(), s3_frame()
    got = covariant_derivative(g, s3_field(), frame[2], P_S3)
    E = frame_matrix(frame, P_S3)
    want = E @ np.array([dh / math.sin(x2), 0.0, h * math.cos(x1)])
    np.testing.assert_allclose(got, want, atol=1e-14)


def test_warped_covariant_derivative_along_e2():
    p = np.array([0.2, 0.1, 0.3])
    g = warped()
    frame = [VectorField.of(f"1/({LAM})", "0", "0"), VectorField.of("0", f"1/(({H})*({ALPHA}))", "0"), VectorField.of("0", "0", f"1/(({H})*({BETA}))")]
    V = VectorField.of("1", "0", "0")  # mu lam e1 with mu = 1 is d/dx in coordinates
    x = p[0]
    h = math.exp(x) * math.sqrt(1 + math.exp(2 * x))
    dh = h + math.exp(3 * x) / math.sqrt(1 + math.exp(2 * x))
    got = covariant_derivative(g, V, frame[1], p)
    np.testing.assert_allclose(got, dh / h * frame[1].at(p), atol=1e-14)


def test_flat_sharp_euclidean_identity():
    V = VectorField.of("x1", "x2^2", "1")
    p = [0.5, 1.5, -2.0]
    np.testing.assert_array_equal(flat(EUCLID3, V, p), V.at(p))


def test_s3_omega_of_v_is_norm_squared():
    g, V = s3_metric(), s3_field()
    x1, _, x3 = P_S3
    w = flat(g, V, P_S3)
    assert w @ V.at(P_S3) == pytest.approx((2 + math.sin(x3)) ** 2 * math.sin(x1) ** 2, rel=1e-15)


def test_s3_gradient_of_conformal_factor():
    g = s3_metric()
    sigma = el.parse("ln(1/sin(x1))")
    grad = gradient(g, sigma, P_S3)
    E = frame_matrix(s3_frame(), P_S3)
    np.testing.assert_allclose(np.linalg.solve(E, grad), [-1.0 / math.tan(P_S3[0]), 0, 0], atol=1e-15)


def test_sharp_flat_round_trip(rng):
    g = warped()
    V = VectorField.of("sin(x2)", "x1*x3", "exp(x3)")
    for p in rng.uniform(-1, 1, (8, 3)):
        w = OneForm.of(*[str(float(c)) for c in flat(g, V, p)])
        np.testing.assert_allclose(sharp(g, w, p), V.at(p), rtol=1e-10)
        assert flat_field(g, V).at(p) == pytest.approx(flat(g, V, p), rel=1e-14)


def test_rotation_is_killing():
    g = MetricField.diagonal(["1", "1"])
    V = VectorField.of("-x2", "x1")
    np.testing.assert_allclose(lie_derivative_metric(g, V, [0.7, -1.2]), 0.0, atol=0)


def test_lie_derivative_of_torse_field():
    g, V = s3_metric(), s3_field()
    fit = fit_torse(g, V, P_S3)
    G = g.at(P_S3)
    w = G @ V.at(P_S3)
    want = 2 * fit.f * G + np.outer(fit.theta, w) + np.outer(w, fit.theta)
    np.testing.assert_allclose(lie_derivative_metric(g, V, P_S3), want, atol=1e-13)


def test_lie_derivative_against_coordinate_formula(rng):
    # (L_V g)_ij = V^k d_k g_ij + g_kj d_i V^k + g_ik d_j V^k
    g = warped()
    V = VectorField.of("sin(x2)", "x1*x3", "exp(x3)")
    for p in rng.uniform(-1, 1, (6, 3)):
        G, dg = g.jet(p)
        v, jac = V.jet(p)
        want = np.einsum("k,ijk->ij", v, dg) + G.T @ jac + (G.T @ jac).T
        np.testing.assert_allclose(lie_derivative_metric(g, V, p), want, atol=1e-12)


def test_d_omega_vanishes_for_concircular(s3_points):
    g = s3_metric()
    w = flat_field(g, s3_field("1"))
    for p in s3_points[:16]:
        dw = exterior_derivative(w, p)
        np.testing.assert_allclose(dw, 0.0, atol=1e-14)
        # brute force: antisymmetrized central differences of omega
        jac = np.array([fd_gradient(lambda q, j=j: float(w.at(q)[j]), p) for j in range(3)])
        np.testing.assert_allclose(0.5 * (jac.T - jac), 0.0, atol=1e-9)


def test_d_omega_matches_torse_formula():
    # 2 d omega(X, Z) = g(nabla_X V, Z) - g(nabla_Z V, X) = theta(X) omega(Z) - theta(Z) omega(X)
    g, V = s3_metric(), s3_field()
    fit = fit_torse(g, V, P_S3)
    w = g.at(P_S3) @ V.at(P_S3)
    dw = exterior_derivative(flat_field(g, V), P_S3)
    np.testing.assert_allclose(2 * dw, np.outer(fit.theta, w) - np.outer(w, fit.theta), atol=1e-13)
    np.testing.assert_allclose(dw, -dw.T, atol=1e-15)


def test_kernel_invariants_on_sampled_points(s3_points, rng):
    metrics = [(s3_metric(), s3_points), (warped(), rng.uniform(-1, 1, (32, 3)))]
    for g, pts in metrics:
        for p in pts:
            c = christoffel(g, p)
            assert c.torsion_residual() <= 1e-10
            assert c.compatibility_residual() <= 1e-8


def test_frames_are_orthonormal(s3_points):
    for p in s3_points:
        assert orthonormality_residual(s3_metric(), s3_frame(), p) < 1e-12


def test_basis_field():
    assert basis_field(3, 1).at([0, 0, 0]).tolist() == [0.0, 1.0, 0.0]
