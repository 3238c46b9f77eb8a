import math

import numpy as np
import pytest
import sympy as sp
from hypothesis import given
from hypothesis import strategies as st

from ppwave.families import (
    BUNDLED_SPECS,
    PlaneWaveSpec,
    S_dot_of,
    S_of,
    matrix_ode_residual,
    rank1_example,
    skew_exp,
    skew_from_upper,
    to_ppwave,
)
from ppwave.geometry import Domain, GridSpec, Point, is_plane_wave, nabla_curvature, ricci
from ppwave.killing import killing_algebra, transversal_dimension

J = np.array([[0.0, -1.0], [1.0, 0.0]])


@given(st.floats(-10, 10))
def test_skew_exp_rotation(t):
    R = np.array([[math.cos(t), -math.sin(t)], [math.sin(t), math.cos(t)]])
    assert np.max(np.abs(skew_exp(J, t) - R)) < 1e-12


def test_skew_exp_special_values():
    assert np.array_equal(skew_exp(np.zeros((3, 3)), 2.0), np.eye(3))
    assert np.max(np.abs(skew_exp(J, math.pi) + np.eye(2))) < 1e-12


@given(st.lists(st.floats(-3, 3), min_size=3, max_size=3), st.floats(-4, 4))
def test_skew_exp_rodrigues(w, t):
    w = np.array(w)
    F = np.array([[0, -w[2], w[1]], [w[2], 0, -w[0]], [-w[1], w[0], 0]])
    th = np.linalg.norm(w) * t
    if abs(th) < 1e-8:
        expected = np.eye(3) + t * F
    else:
        K = F / np.linalg.norm(w)
        expected = np.eye(3) + math.sin(th) * K + (1 - math.cos(th)) * K @ K
    E = skew_exp(F, t)
    assert np.max(np.abs(E - expected)) < 1e-11
    assert np.max(np.abs(E @ E.T - np.eye(3))) < 1e-12


def test_skew_exp_rejects_non_skew():
    with pytest.raises(ValueError):
        skew_exp(np.eye(2))


def test_rank1_example_matrix():
    spec = rank1_example()
    for u in np.linspace(-2, 2, 9):
        c, s = math.cos(u), math.sin(u)
        assert S_of(spec, u) == pytest.approx(np.array([[c * c, -c * s], [-c * s, s * s]]), abs=1e-14)


def test_rank1_sdot_matches_symbolic_oracle():
    u = sp.symbols("u")
    S = sp.Matrix([[sp.cos(u) ** 2, -sp.cos(u) * sp.sin(u)], [-sp.cos(u) * sp.sin(u), sp.sin(u) ** 2]])
    dS = S.diff(u)
    assert sp.simplify(dS.det()) == -1
    printed = -6 * sp.cos(u) ** 2 * sp.sin(u) ** 2 - sp.cos(u) ** 4 - sp.sin(u) ** 4
    assert sp.simplify(printed + 1) != 0  # the printed polynomial is not constant
    f = sp.lambdify(u, dS, "numpy")
    spec = rank1_example()
    for t in np.linspace(-1, 1, 21):
        assert S_dot_of(spec, t) == pytest.approx(np.array(f(t), dtype=float), abs=1e-14)


def test_cahen_wallach_constant():
    spec = BUNDLED_SPECS["cw_ricci_flat_2d"]()
    assert np.array_equal(S_of(spec, 17.0), np.diag([1.0, -1.0]))
    pw = to_ppwave(spec)
    p = Point((0.3, 0.2), 0.5)
    assert ricci(pw, p) == 0.0
    assert not nabla_curvature(pw, p).u_block.any()


def test_type2_values():
    spec = PlaneWaveSpec("type2", np.eye(2), np.zeros((2, 2)), 1.0)
    assert S_of(spec, 1.0) == pytest.approx(np.eye(2) / 4)
    with pytest.raises(ValueError):
        S_of(spec, -1.0)
    with pytest.raises(ValueError):
        to_ppwave(spec, Domain(-2.0, 1.0))


def _random_spec(rng, family, n, b=0.0):
    S = rng.normal(size=(n, n))
    F = rng.normal(size=(n, n))
    return PlaneWaveSpec(family, S + S.T, F - F.T, b)


@pytest.mark.parametrize("family,b", [("type1", 0.0), ("type2", 1.5), ("cahen_wallach", 0.0)])
def test_sdot_against_central_differences(rng, family, b):
    spec = _random_spec(rng, family, 3, b)
    h = 1e-5
    for u in (-0.3, 0.2, 0.9):
        fd = (S_of(spec, u + h) - S_of(spec, u - h)) / (2 * h)
        assert S_dot_of(spec, u) == pytest.approx(fd, abs=1e-7)


def test_type1_eigenvalues_are_conjugation_invariant(rng):
    spec = _random_spec(rng, "type1", 3)
    ev = np.linalg.eigvalsh(spec.S_minus)
    for u in rng.uniform(-5, 5, 10):
        assert np.linalg.eigvalsh(S_of(spec, u)) == pytest.approx(ev, abs=1e-12)


def test_type2_eigenvalues_scale(rng):
    spec = _random_spec(rng, "type2", 3, 0.5)
    ev = np.linalg.eigvalsh(spec.S_minus)
    for u in (0.0, 1.0, 3.0):
        assert np.linalg.eigvalsh(S_of(spec, u)) == pytest.approx(ev / (u + 0.5) ** 2, abs=1e-12)


def test_type2_shift_isometry(rng):
    a = _random_spec(rng, "type2", 2, 1.0)
    b = PlaneWaveSpec("type2", a.S_minus, a.F, 3.0)
    for u in (-0.5, 0.0, 2.0):
        assert S_of(a, u) == pytest.approx(S_of(b, u - 2.0), abs=1e-14)


def test_type1_with_zero_F_is_cahen_wallach(rng):
    spec = _random_spec(rng, "type1", 2)
    spec = PlaneWaveSpec("type1", spec.S_minus, np.zeros((2, 2)))
    assert np.array_equal(S_of(spec, 3.0), spec.S_minus)
    assert to_ppwave(spec).H.constant


def test_matrix_ode_residuals(rng):
    grid = GridSpec((-1, 1, 11), 1.0, 1)
    r1 = rank1_example()
    assert matrix_ode_residual(r1, 0.0, 1.0, r1.F, grid) < 1e-10
    t2 = _random_spec(rng, "type2", 3, 2.0)
    assert matrix_ode_residual(t2, 1.0, 2.0, t2.F, grid) < 1e-10
    cw = BUNDLED_SPECS["cw_ricci_flat_2d"]()
    assert matrix_ode_residual(cw, 0.0, 1.0, np.zeros((2, 2)), grid) == 0.0
    wrong = matrix_ode_residual(r1, 0.0, 1.0, np.zeros((2, 2)), grid)
    assert wrong == pytest.approx(math.sqrt(2.0), abs=1e-12)  # |S'| = sqrt(2) for every u


def test_families_are_plane_waves_with_heisenberg_brackets(rng):
    from ppwave.killing import bracket, heisenberg_basis

    for spec in (rank1_example(), _random_spec(rng, "type2", 2, 2.0), BUNDLED_SPECS["cw_flat"]()):
        pw = to_ppwave(spec)
        assert is_plane_wave(pw)
        hb = heisenberg_basis(pw)
        for i, L in enumerate(hb.L):
            for j, K in enumerate(hb.K):
                v = bracket(L, K).vector()
                assert v[2] == pytest.approx(-1.0 if i == j else 0.0, abs=1e-8)


def test_type1_has_translation_field(rng):
    spec = _random_spec(rng, "type1", 2)
    alg = killing_algebra(to_ppwave(spec))
    ab = np.array([[K.a, K.b] for K in alg.basis])
    assert not ab[:, 0].any()
    assert np.abs(ab[:, 1]).max() > 0.1
    assert transversal_dimension(alg.basis) == 1


def test_spec_json_roundtrip():
    spec = PlaneWaveSpec("type2", np.diag([1.0, 2.0, 3.0]), skew_from_upper([1.0, 2.0, 3.0], 3), 0.5)
    back = PlaneWaveSpec.from_json(spec.to_json())
    assert back.family == "type2" and back.b_shift == 0.5
    assert np.array_equal(back.S_minus, spec.S_minus) and np.array_equal(back.F, spec.F)
    assert rank1_example().to_json()["F"] == [1.0]


def test_spec_validation():
    with pytest.raises(ValueError):
        PlaneWaveSpec("type3", np.eye(2), np.zeros((2, 2)))
    with pytest.raises(ValueError):
        PlaneWaveSpec("type1", np.array([[1.0, 2.0], [0.0, 1.0]]), np.zeros((2, 2)))
    with pytest.raises(ValueError):
        PlaneWaveSpec("type1", np.eye(2), np.eye(2))
