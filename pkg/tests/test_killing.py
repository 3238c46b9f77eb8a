import itertools
import math

import numpy as np
import pytest
import sympy as sp

from ppwave.checks import analyse, random_plane_wave
from ppwave.expr import QuadraticForm, parse
from ppwave.families import BUNDLED_SPECS, rank1_example, to_ppwave
from ppwave.geometry import GridSpec, Point, PpWave, dimension_bound
from ppwave.killing import (
    BracketError,
    ExplicitPsi,
    IntegrationError,
    KillingError,
    KillingField,
    NotNormalForm,
    PerturbedPsi,
    SimElement,
    a_zero_dimension,
    bracket,
    combine,
    derived_algebra_dimension,
    heisenberg_basis,
    homogeneity_report,
    integrability_residual,
    integrate_psi,
    kappa,
    kappa_defect,
    kappa_defect_closed_form,
    killing_algebra,
    killing_residual,
    lambda_map,
    propagator,
    reductive_decomposition,
    structure_constants,
    transversal_dimension,
    v_field,
)


def cw(S):
    return PpWave(QuadraticForm.constant_matrix(np.atleast_2d(np.asarray(S, dtype=float))))


def flat(n):
    return PpWave(parse("0", n))


def explicit(n, f, df, ddf):
    return ExplicitPsi(n, f, df, ddf)


# --------------------------------------------------------------------------
# normal form and the axis ODE


def test_require_normal_form_examples():
    from ppwave.killing import require_normal_form

    assert not require_normal_form(PpWave(parse("exp(2*x1)", 1)))
    assert require_normal_form(PpWave(parse("exp(2*x1) - 1 - 2*x1", 1)))
    assert require_normal_form(cw(np.diag([1.0, -2.0])))


@pytest.mark.parametrize("pw", [cw([[1.0]]), PpWave(parse("0.5*x1^2", 1))], ids=["expm", "dop853"])
def test_integrate_psi_sinh(pw):
    psi = integrate_psi(pw, [0.0], [1.0])
    assert abs(psi(1.0)[0] - 1.1752012) < 1e-8
    for u in (-1.0, -0.3, 0.5):
        p, dp = psi.value(u)
        assert p[0] == pytest.approx(math.sinh(u), abs=1e-10)
        assert dp[0] == pytest.approx(math.cosh(u), abs=1e-10)


def test_integrate_psi_flat_and_oscillating():
    psi = integrate_psi(flat(2), [1.0, 0.0], [0.0, 0.0])
    assert np.array_equal(psi(0.8), [1.0, 0.0])
    for pw in (cw(-np.eye(2)), PpWave(parse("-0.5*(x1^2 + x2^2)", 2))):
        psi = integrate_psi(pw, [0.0, 0.0], [0.0, 1.0])
        for u in (-0.9, 0.4, 1.0):
            assert psi(u) == pytest.approx([0.0, math.sin(u)], abs=1e-10)
            assert psi.ddot(u) == pytest.approx([0.0, -math.sin(u)], abs=1e-10)


def test_propagator_range_is_enforced():
    prop = propagator(PpWave(parse("0.5*x1^2*(1 + u^2)", 1)), (-1.0, 1.0))
    with pytest.raises(IntegrationError):
        prop(3.0)


def test_wronskian_constancy(rng):
    for n in (1, 2, 3):
        pw = random_plane_wave(rng, n)
        for _ in range(3):
            p = integrate_psi(pw, rng.normal(size=n), rng.normal(size=n))
            q = integrate_psi(pw, rng.normal(size=n), rng.normal(size=n))
            ws = []
            for u in np.linspace(-1, 1, 21):
                (a, da), (b, db) = p.value(u), q.value(u)
                ws.append(a @ db - b @ da)
            assert max(ws) - min(ws) <= 1e-8


# --------------------------------------------------------------------------
# residuals and the algebra


def test_residual_displayed_ex_dim3_field():
    doc = analyse("ex_dim3").doc
    K = doc.displayed_fields()[0]
    assert (K.a, K.b, K.c) == (1.0, 0.0, 0.0) and K.psi(0.3).tolist() == [-1.0]
    assert killing_residual(K, doc.pw(), doc.grid) < 1e-10


def test_residual_of_null_translation_vanishes(rng):
    for pw in (PpWave(parse("exp(x1*x2) + u*x1^3", 2)), cw(np.eye(3)), random_plane_wave(rng, 2)):
        grid = GridSpec((-0.5, 0.5, 3), 0.5, 3)
        assert killing_residual(v_field(pw), pw, grid) == 0.0


def test_residual_negative_control(rng):
    pw = PpWave(parse("x1^2*x2 + u*x1*x2^2 + x2^3", 2))
    K = KillingField.from_vector(rng.normal(size=8), propagator(pw))
    assert killing_residual(K, pw, GridSpec((-1, 1, 5), 1.0, 3)) > 0.01


def test_residual_with_phi_term():
    # the phi' term enters additively
    pw = PpWave(parse("x1", 1))
    K = v_field(flat(1))
    grid = GridSpec((-1, 1, 3), 0.5, 3)
    assert killing_residual(K, pw, grid, phi_dot=lambda u: 0.0) == 0.0
    assert killing_residual(K, pw, grid, phi_dot=lambda u: 2.0) == 2.0


def test_algebra_ex_dim3():
    alg = analyse("ex_dim3").algebra
    assert alg.dimension == 3 and alg.trusted and alg.gap >= 1e3
    assert transversal_dimension(alg.basis) == 2


def test_algebra_ehlers_kundt():
    a = analyse("ehlers_kundt_exp")
    assert a.algebra.dimension == 3 and a.algebra.trusted
    assert not a.homogeneity.spans_tangent


def test_algebra_flat_has_every_parameter():
    n = 2
    alg = killing_algebra(flat(n), GridSpec((-1, 1, 5), 1.0, 3))
    assert alg.dimension == 2 * n + 3 + n * (n - 1) // 2 == dimension_bound(n)
    assert alg.gap == math.inf


def test_algebra_basis_fields_solve_killing_equation(rng):
    grid = GridSpec((-1, 1, 7), 1.0, 3)
    for pw in (analyse("ex_dim3").normal, to_ppwave(rank1_example()), random_plane_wave(rng, 2)):
        alg = killing_algebra(pw, grid)
        assert 1 <= alg.dimension <= dimension_bound(pw.n)
        for K in alg.basis:
            assert killing_residual(K, pw, grid) < 1e-7


def test_algebra_preconditions():
    with pytest.raises(NotNormalForm):
        killing_algebra(PpWave(parse("exp(2*x1)", 1)))
    with pytest.raises(KillingError):
        killing_algebra(cw(np.eye(2)), GridSpec((0, 0, 1), 1.0, 1))


# --------------------------------------------------------------------------
# brackets


def test_bracket_with_null_translation_vanishes(rng):
    pw = to_ppwave(rank1_example())
    for K in killing_algebra(pw).basis:
        assert np.max(np.abs(bracket(v_field(pw), K).vector())) < 1e-12


def test_bracket_scaling_field_against_formula():
    n = 2
    K1 = KillingField(1.0, 0.0, 0.0, np.zeros((n, n)), ExplicitPsi.constant(np.zeros(n)))
    K2 = KillingField(0.0, 0.0, 0.0, np.zeros((n, n)), explicit(
        n, lambda u: np.array([math.sin(u), u**3]), lambda u: np.array([math.cos(u), 3 * u**2]),
        lambda u: np.array([-math.sin(u), 6 * u])))
    B = bracket(K1, K2)
    assert B.b == 0.0 and B.a == 0.0
    for u in (-0.5, 0.2, 1.3):
        assert B.psi(u) == pytest.approx(-u * K2.psi.value(u)[1], abs=1e-15)


def _sym_field(K, coords, psi_sym):
    v, xs, u = coords[0], coords[1:-1], coords[-1]
    n = len(xs)
    psi = sp.Matrix(psi_sym)
    dpsi = psi.diff(u)
    x = sp.Matrix(xs)
    F = sp.Matrix(K.F.tolist())
    comp_v = K.c - K.a * v - (dpsi.T * x)[0]
    comp_x = psi + F * x
    comp_u = K.a * u + K.b
    return sp.Matrix([comp_v] + [comp_x[i] for i in range(n)] + [comp_u])


def _commutator(X, Y, coords):
    JX, JY = X.jacobian(coords), Y.jacobian(coords)
    return JY * X - JX * Y


def test_bracket_matches_negated_commutator_flat(rng):
    n = 2
    coords = sp.symbols("v x1 x2 u")
    u = coords[-1]
    fields = []
    for _ in range(2):
        a, b, c, f = rng.normal(size=4)
        p, q = rng.normal(size=n), rng.normal(size=n)
        F = np.array([[0.0, f], [-f, 0.0]])
        K = KillingField(a, b, c, F, explicit(n, lambda t, p=p, q=q: p + t * q, lambda t, q=q: q.copy(),
                                                 lambda t: np.zeros(n)))
        fields.append((K, [p[i] + u * q[i] for i in range(n)]))
    (K1, s1), (K2, s2) = fields
    comm = _commutator(_sym_field(K1, coords, s1), _sym_field(K2, coords, s2), coords)
    B = bracket(K1, K2)
    f = sp.lambdify(coords, comm, "numpy")
    for _ in range(5):
        pt = rng.uniform(-1, 1, size=n + 2)
        got = B.value_at(Point(tuple(pt[1:-1]), pt[-1], pt[0]))
        assert got == pytest.approx(-np.array(f(*pt), dtype=float).ravel(), abs=1e-12)


def test_bracket_matches_negated_commutator_cahen_wallach():
    coords = sp.symbols("v x1 u")
    v, x1, u = coords
    H = x1**2 / 2
    L = KillingField(0, 0, 0, np.zeros((1, 1)), explicit(1, lambda t: np.array([math.sinh(t)]),
                                                         lambda t: np.array([math.cosh(t)]),
                                                         lambda t: np.array([math.sinh(t)])))
    D = KillingField(0, 1, 0, np.zeros((1, 1)), ExplicitPsi.constant([0.0]))
    XL = _sym_field(L, coords, [sp.sinh(u)])
    XD = _sym_field(D, coords, [0])
    # both are Killing for g = 2 du (dv + H du) + dx^2
    g = sp.Matrix([[0, 0, 1], [0, 1, 0], [1, 0, 2 * H]])
    for X in (XL, XD):
        lie = sp.zeros(3, 3)
        for i, j in itertools.product(range(3), repeat=2):
            lie[i, j] = sum(X[k] * sp.diff(g[i, j], coords[k]) for k in range(3)) + sum(
                g[k, j] * sp.diff(X[k], coords[i]) + g[i, k] * sp.diff(X[k], coords[j]) for k in range(3))
        assert sp.simplify(lie) == sp.zeros(3, 3)
    comm = _commutator(XL, XD, coords)
    B = bracket(L, D)
    f = sp.lambdify(coords, comm, "numpy")
    for pt in [(0.1, 0.2, 0.3), (-0.4, 0.7, -0.9)]:
        got = B.value_at(Point((pt[1],), pt[2], pt[0]))
        assert got == pytest.approx(-np.array(f(*pt), dtype=float).ravel(), abs=1e-12)


def test_heisenberg_sinh_cosh():
    hb = heisenberg_basis(cw([[1.0]]))
    (L,), (K,) = hb.L, hb.K
    for u in (-0.8, 0.5):
        assert L.psi(u)[0] == pytest.approx(math.sinh(u), abs=1e-12)
        assert K.psi(u)[0] == pytest.approx(math.cosh(u), abs=1e-12)
    B = bracket(L, K).vector()
    assert B[2] == pytest.approx(-1.0, abs=1e-12) and np.max(np.abs(np.delete(B, 2))) < 1e-12


@pytest.mark.parametrize("n", [1, 2, 3])
def test_heisenberg_relations(rng, n):
    for pw in (flat(n), random_plane_wave(rng, n)):
        hb = heisenberg_basis(pw)
        for i, j in itertools.product(range(n), repeat=2):
            B = bracket(hb.L[i], hb.K[j]).vector()
            target = np.zeros_like(B)
            target[2] = -1.0 if i == j else 0.0
            assert np.max(np.abs(B - target)) < 1e-8
        v = v_field(pw)
        for group in (hb.L, hb.K, (v,) + hb.K):
            for A, C in itertools.combinations(group, 2):
                assert np.max(np.abs(bracket(A, C).vector())) < 1e-8


def test_heisenberg_rejects_non_plane_wave():
    with pytest.raises(KillingError):
        heisenberg_basis(analyse("ex_dim3").normal)


def test_bracket_closure_failure_is_reported():
    pw = to_ppwave(rank1_example())
    prop = propagator(pw)
    scale = KillingField(1.0, 0.0, 0.0, np.zeros((2, 2)), integrate_psi(pw, [0, 0], [0, 0]))
    K = heisenberg_basis(pw).K[0]
    assert K.psi.prop is prop
    with pytest.raises(BracketError):
        bracket(scale, K)
    with pytest.raises(BracketError):
        bracket(K, v_field(flat(3)))


def test_jacobi_identity(rng):
    for pw in (to_ppwave(rank1_example()), analyse("ex_dim3").normal, random_plane_wave(rng, 2)):
        basis = killing_algebra(pw).basis
        for A, B, C in itertools.combinations(basis, 3):
            total = (bracket(A, bracket(B, C)).vector() + bracket(B, bracket(C, A)).vector()
                     + bracket(C, bracket(A, B)).vector())
            assert np.max(np.abs(total)) < 1e-7


def test_structure_constants_heisenberg():
    pw = cw(np.diag([1.0, -1.0]))
    hb = heisenberg_basis(pw)
    basis = [v_field(pw)] + list(hb.L) + list(hb.K)
    C = structure_constants(basis)
    assert np.array_equal(C, -np.transpose(C, (1, 0, 2)))
    assert C[1, 3, 0] == pytest.approx(-1.0, abs=1e-10)
    assert C[2, 4, 0] == pytest.approx(-1.0, abs=1e-10)
    assert abs(C[1, 4, 0]) < 1e-10


# --------------------------------------------------------------------------
# evaluation maps


def test_kappa_examples():
    pw = cw(np.eye(2))
    k = kappa(v_field(pw))
    assert k.a == 0 and not k.F.any() and not k.Y.any()
    assert k.translation().tolist() == [1.0, 0.0, 0.0, 0.0]
    hb = heisenberg_basis(pw)
    kl = kappa(hb.L[1])
    assert kl.Y.tolist() == [0.0, 1.0] and not kl.X.any()
    kx = kappa(analyse("ex_dim3").doc.displayed_fields()[0])
    assert kx.a == 1.0 and kx.X.tolist() == [-1.0]
    with pytest.raises(KillingError):
        kappa(v_field(pw), pw, Point((0.1, 0.0)))


def test_kappa_matrix_layout():
    e = SimElement(2.0, np.array([[0.0, 1.0], [-1.0, 0.0]]), np.array([3.0, 4.0]), 5.0, np.array([6.0, 7.0]), 8.0)
    A = e.matrix()
    assert A[0, 0] == -2.0 and A[-1, -1] == 2.0
    assert A[0, 1:3].tolist() == [-3.0, -4.0] and A[1:3, -1].tolist() == [3.0, 4.0]
    back = SimElement.from_parts(A, e.translation())
    assert (back - e).norm() == 0.0


def test_kappa_is_linear_and_injective(rng):
    pw = to_ppwave(rank1_example())
    basis = killing_algebra(pw).basis
    flat_k = lambda K: np.concatenate([kappa(K).matrix().ravel(), kappa(K).translation()])  # noqa: E731
    M = np.array([flat_k(K) for K in basis])
    assert np.linalg.matrix_rank(M, 1e-9) == len(basis)
    w = rng.normal(size=2)
    mixed = combine(w, basis[1:3])
    assert np.max(np.abs(flat_k(mixed) - w[0] * flat_k(basis[1]) - w[1] * flat_k(basis[2]))) < 1e-13


def test_kappa_defect_closed_form_example():
    S = np.array([[2.0, 1.0], [1.0, -1.0]])
    pw = cw(S)
    Ki = heisenberg_basis(pw).K[0]
    du = KillingField(0, 1, 0, np.zeros((2, 2)), integrate_psi(pw, [0, 0], [0, 0]))
    d = kappa_defect(Ki, du, pw)
    assert d.Y == pytest.approx(-S[:, 0], abs=1e-12)
    assert d.a == 0 and not d.F.any() and d.c == 0 and not d.X.any() and d.b == 0


def test_kappa_defect_random_pairs(rng):
    for _ in range(4):
        pw = random_plane_wave(rng, int(rng.integers(1, 4)))
        basis = killing_algebra(pw).basis
        S = pw.H.hessian(0.0, np.zeros(pw.n))
        for K1, K2 in itertools.combinations(basis, 2):
            d = kappa_defect(K1, K2, pw)
            assert (d - kappa_defect_closed_form(K1, K2, S)).norm() < 1e-8
            if abs(K1.b) < 1e-14 and abs(K2.b) < 1e-14:
                assert d.norm() < 1e-8


def test_kappa_defect_vanishes_on_flat(rng):
    pw = flat(2)
    basis = killing_algebra(pw, GridSpec((-1, 1, 5), 1.0, 3)).basis
    for K1, K2 in itertools.combinations(basis, 2):
        assert kappa_defect(K1, K2, pw).norm() < 1e-12


def test_lambda_examples_and_homomorphism(rng):
    pw = cw(np.diag([1.0, -1.0, 0.5]))
    assert lambda_map(v_field(pw)).X.tolist() == [0.0, 0.0, 0.0]
    Ki = heisenberg_basis(pw).K[2]
    m = lambda_map(Ki)
    assert m.X.tolist() == [0.0, 0.0, 1.0] and not m.F.any()
    pw = to_ppwave(BUNDLED_SPECS["rank1_example"]())
    basis = [K for K in killing_algebra(pw).basis if abs(K.b) < 1e-12]
    assert len(basis) >= 4
    for K1, K2 in itertools.combinations(basis, 2):
        lhs = lambda_map(bracket(K1, K2))
        rhs = lambda_map(K1).bracket(lambda_map(K2))
        assert np.max(np.abs(lhs.X - rhs.X)) < 1e-8 and np.max(np.abs(lhs.F - rhs.F)) < 1e-12
    with pytest.raises(KillingError):
        lambda_map(KillingField(0, 1, 0, np.zeros((1, 1)), ExplicitPsi.constant([0.0])))


# --------------------------------------------------------------------------
# integrability, transversality, homogeneity, reductivity


def test_integrability_examples(rng):
    K = analyse("ex_dim3").doc.displayed_fields()[0]
    pw = analyse("ex_dim3").pw
    assert integrability_residual(K, pw, Point((0.3,), 0.2)) < 1e-7
    assert integrability_residual(v_field(flat(2)), PpWave(parse("exp(x1*x2)", 2)), Point((0.2, 0.1))) == 0.0
    rk = to_ppwave(rank1_example())
    for K in killing_algebra(rk).basis:
        p = Point(tuple(rng.uniform(-0.5, 0.5, 2)), float(rng.uniform(-0.5, 0.5)))
        assert integrability_residual(K, rk, p) < 1e-7
        bad = K.with_psi(PerturbedPsi(K.psi, 0.5))
        if abs(K.a) + abs(K.b) > 0.1:
            assert integrability_residual(bad, rk, p) >= integrability_residual(K, rk, p)


def test_integrability_negative_control():
    pw = analyse("ex_dim3").pw
    K = analyse("ex_dim3").doc.displayed_fields()[0]
    bad = K.with_psi(PerturbedPsi(K.psi, 0.5))
    assert integrability_residual(bad, pw, Point((0.3,), 0.7)) > 1e-2


def test_transversal_dimension_examples():
    pw = cw(np.eye(2))
    assert transversal_dimension([v_field(pw)]) == 0
    assert transversal_dimension([]) == 0
    assert transversal_dimension(analyse("ex_dim3").algebra.basis) == 2


def test_homogeneity_examples():
    assert analyse("ex_dim3").homogeneity.spans_tangent
    eh = analyse("ehlers_kundt_exp").homogeneity
    assert not eh.spans_tangent and eh.evaluation_rank == 3
    rep = homogeneity_report(flat(2), killing_algebra(flat(2), GridSpec((-1, 1, 5), 1.0, 3)).basis)
    assert rep.spans_tangent and rep.spans_Vperp and rep.evaluation_rank == 4


@pytest.mark.parametrize("name", ["cw_ricci_flat_2d", "rank1_example", "cw_flat"])
def test_reductive_decomposition(name):
    pw = to_ppwave(BUNDLED_SPECS[name]())
    grid = GridSpec((-1, 1, 7), 1.0, 3)
    rd = reductive_decomposition(pw, killing_algebra(pw, grid).basis)
    assert rd.max_violation < 1e-7 and rd.max_residual < 1e-7
    assert len(rd.h_basis) == 2 and len(rd.m_basis) == 4


def test_reductive_needs_transversal_field():
    pw = cw(np.eye(1))
    with pytest.raises(KillingError, match="not homogeneous"):
        reductive_decomposition(pw, list(heisenberg_basis(pw).L))


def test_derived_and_a_zero_dimensions():
    basis = analyse("ex_dim3").algebra.basis
    assert a_zero_dimension(basis) == 2
    assert derived_algebra_dimension(basis) == 2
    rk = killing_algebra(to_ppwave(rank1_example())).basis
    assert a_zero_dimension(rk) == len(rk) == 6


# --------------------------------------------------------------------------
# serialization and validation


def test_killing_field_json_roundtrip():
    pw = to_ppwave(rank1_example())
    for K in killing_algebra(pw).basis:
        d = K.to_json()
        assert set(d) == {"a", "b", "c", "F", "psi0", "dpsi0", "u_range"}
        back = KillingField.from_json(d, pw)
        p = Point((0.3, -0.2), 0.6, 0.1)
        assert np.max(np.abs(back.value_at(p) - K.value_at(p))) < 1e-12


def test_killing_field_validation():
    with pytest.raises(ValueError):
        KillingField(0, 0, 0, np.eye(2), ExplicitPsi.constant([0.0, 0.0]))


def test_value_at_components():
    L = heisenberg_basis(cw(np.eye(1))).L[0]
    assert L.value_at(Point((2.0,), 0.0, 0.0)).tolist() == [-2.0, 0.0, 0.0]
