"""Named regression checks over the bundled documents, used by ``ppwave verify-paper``."""
from __future__ import annotations

import csv
import itertools
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from . import geometry as geo
from .documents import bundled_names, load_document
from .families import PlaneWaveSpec, S_dot_of, S_of, matrix_ode_residual, rank1_example, to_ppwave
from .geometry import Domain, GridSpec, Point
from .killing import (
    KillingField,
    PerturbedPsi,
    bracket,
    heisenberg_basis,
    homogeneity_report,
    integrability_residual,
    kappa,
    kappa_defect,
    kappa_defect_closed_form,
    killing_algebra,
    killing_residual,
    reductive_decomposition,
    transversal_dimension,
    v_field,
)
from .normalize import normalize_at, orthogonal_frame_ode

SEED = 20240611


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    detail: str

    def line(self) -> str:
        return f"{'PASS' if self.passed else 'FAIL'}  {self.name}: {self.detail}"


@dataclass(frozen=True)
class Analysis:
    doc: object
    pw: geo.PpWave
    normal: geo.PpWave
    algebra: object
    transversal: int
    homogeneity: object
    certificate: object
    min_rank: int
    plane_wave: bool


@lru_cache(maxsize=None)
def analyse(name: str) -> Analysis:
    doc = load_document(name)
    pw = doc.pw()
    normal, _ = normalize_at(pw, doc.base())
    alg = killing_algebra(normal, doc.normal_grid())
    cert = geo.decomposability_certificate(pw, doc.grid)
    ranks = geo.rank_report(pw, doc.grid)
    return Analysis(doc, pw, normal, alg, transversal_dimension(alg.basis),
                    homogeneity_report(normal, alg.basis), cert, ranks.min_rank,
                    bool(geo.is_plane_wave(pw, doc.grid)))


def random_plane_wave(rng: np.random.Generator, n: int) -> geo.PpWave:
    S = rng.normal(size=(n, n))
    S = S + S.T
    F = rng.normal(size=(n, n))
    F = F - F.T
    family = rng.choice(["type1", "type2", "cahen_wallach"])
    spec = PlaneWaveSpec(str(family), S, F, 2.0 if family == "type2" else 0.0)
    return to_ppwave(spec, Domain(-1.0, 1.0, 1.0))


def _fmt(x: float) -> str:
    return f"{x:.2e}"


# --------------------------------------------------------------------------


def check_ex_dim3() -> CheckResult:
    a = analyse("ex_dim3")
    K = a.doc.displayed_fields()[0]
    res = killing_residual(K, a.pw, a.doc.grid)
    ok = (a.algebra.dimension == 3 and a.transversal == 2 and not a.plane_wave
          and a.homogeneity.spans_tangent and res < 1e-10 and a.algebra.gap >= 1e3)
    return CheckResult("ex_dim3", ok, f"dim={a.algebra.dimension} transversal={a.transversal} "
                       f"plane_wave={a.plane_wave} spans_tangent={a.homogeneity.spans_tangent} "
                       f"residual={_fmt(res)} gap={_fmt(a.algebra.gap)}")


def heisenberg_errors(pw: geo.PpWave) -> tuple[float, float]:
    """(max error of [L_i, K_j] = -delta_ij d_v, max parameter of commuting pairs)."""
    hb = heisenberg_basis(pw)
    n = pw.n
    err = 0.0
    for i, j in itertools.product(range(n), repeat=2):
        target = np.zeros_like(hb.L[0].vector())
        target[2] = -1.0 if i == j else 0.0
        err = max(err, float(np.max(np.abs(bracket(hb.L[i], hb.K[j]).vector() - target))))
    comm = 0.0
    v = v_field(pw)
    for group in (hb.L, hb.K, (v,) + hb.K):
        for A, B in itertools.combinations(group, 2):
            comm = max(comm, float(np.max(np.abs(bracket(A, B).vector()))))
    return err, comm


def check_heisenberg_brackets() -> CheckResult:
    rng = np.random.default_rng(SEED)
    err = comm = 0.0
    for n in (1, 2, 3, 2, 3):
        e, c = heisenberg_errors(random_plane_wave(rng, n))
        err, comm = max(err, e), max(comm, c)
    ok = err < 1e-8 and comm < 1e-8
    return CheckResult("heisenberg_brackets", ok, f"[L_i,K_j]+delta_ij d_v error={_fmt(err)} "
                       f"commuting pairs max={_fmt(comm)}")


def check_dimension_bound() -> CheckResult:
    worst = []
    for name in bundled_names():
        a = analyse(name)
        bound = geo.dimension_bound(a.pw.n)
        if not 1 <= a.algebra.dimension <= bound:
            worst.append(f"{name}:{a.algebra.dimension}>{bound}")
    flat = analyse("flat_n2").algebra.dimension
    ok = not worst and flat == geo.dimension_bound(2) == 8
    return CheckResult("dimension_bound", ok, f"violations={worst or 'none'} flat_n2={flat} bound(2)=8")


def check_flat_n2_attains_10() -> CheckResult:
    flat = analyse("flat_n2").algebra.dimension
    return CheckResult("flat_n2_attains_10", flat == 10,
                       f"flat_n2 dimension={flat}; the parameter count bounds it by 8")


def check_rank1_example() -> CheckResult:
    spec = rank1_example()
    pw = to_ppwave(spec, Domain(-1.0, 1.0, 1.0))
    us = np.linspace(-1.0, 1.0, 21)
    ranks = {geo.curvature_rank(pw, Point((0.0, 0.0), u)) for u in us}
    dets = [float(np.linalg.det(S_dot_of(spec, u))) for u in us]
    grid = GridSpec((-1.0, 1.0, 21), 1.0, 3)
    cert = geo.decomposability_certificate(pw, grid)
    ode = matrix_ode_residual(spec, 0.0, 1.0, spec.F, grid)
    ok = (ranks == {1} and all(abs(d) > 1e-9 for d in dets) and cert is None
          and bool(geo.is_plane_wave(pw)) and ode < 1e-10)
    return CheckResult("rank1_example", ok, f"ranks={sorted(ranks)} det(S')∈[{min(dets):.12f},{max(dets):.12f}] "
                       f"certificate={cert} ode_residual={_fmt(ode)}")


def check_sippel_goenner() -> CheckResult:
    a = analyse("sippel_goenner")
    cert = a.certificate
    target = np.array([1.0, 1.0]) / np.sqrt(2.0)
    res = geo.certificate_residual(a.pw, cert, a.doc.grid) if cert is not None else np.inf
    ok = (cert is not None and np.allclose(cert, target, atol=1e-9) and res < 1e-9
          and a.homogeneity.evaluation_rank == 4)
    return CheckResult("sippel_goenner", ok, f"certificate={None if cert is None else cert.round(10).tolist()} "
                       f"residual={_fmt(res)} span_rank={a.homogeneity.evaluation_rank} dim={a.algebra.dimension}")


def random_field(rng, basis) -> KillingField:
    from .killing import combine

    return combine(rng.normal(size=len(basis)), basis)


def check_kappa_defect() -> CheckResult:
    rng = np.random.default_rng(SEED + 1)
    worst = zero_b = 0.0
    for _ in range(20):
        n = int(rng.integers(1, 4))
        pw = random_plane_wave(rng, n)
        basis = killing_algebra(pw).basis
        K1, K2 = random_field(rng, basis), random_field(rng, basis)
        d = kappa(K1).bracket(kappa(K2)) - kappa(bracket(K1, K2))
        S = pw.H.hessian(0.0, np.zeros(n))
        worst = max(worst, (d - kappa_defect_closed_form(K1, K2, S)).norm())
        hb = heisenberg_basis(pw)
        A, B = random_field(rng, hb.L + hb.K), random_field(rng, hb.L + hb.K)
        zero_b = max(zero_b, kappa_defect(A, B, pw).norm())
    ok = worst < 1e-8 and zero_b < 1e-8
    return CheckResult("kappa_defect", ok, f"closed-form mismatch={_fmt(worst)} b=0 defect={_fmt(zero_b)}")


def check_integrability() -> CheckResult:
    rng = np.random.default_rng(SEED + 2)
    worst, control = 0.0, np.inf
    for name in bundled_names():
        a = analyse(name)
        g = a.doc.normal_grid()
        pts = [Point(rng.uniform(-g.x_radius, g.x_radius, a.pw.n), rng.uniform(g.u[0], g.u[1]))
               for _ in range(5)]
        for K in a.algebra.basis:
            worst = max(worst, max(integrability_residual(K, a.normal, p) for p in pts))
    a = analyse("ex_dim3")
    K = next(K for K in a.algebra.basis if K.a != 0.0)
    bad = K.with_psi(PerturbedPsi(K.psi, 1.0))
    control = integrability_residual(bad, a.normal, Point((0.3,), 0.6))
    ok = worst < 1e-7 and control > 1e-2
    return CheckResult("integrability", ok, f"max residual={_fmt(worst)} perturbed control={_fmt(control)}")


NON_NORMAL = {
    "exp(2*x1)": 1,
    "x1 + x1^2*u": 1,
    "exp(x1 - x2)": 2,
    "cosh(x1)*(1 + u^2) + x2*u": 2,
    "sin(x1 + u) + x1*x2": 2,
}


def check_normal_coordinates() -> CheckResult:
    from .expr import parse
    from .killing import require_normal_form

    worst, dims, idem = 0.0, [], 0.0
    for text, n in NON_NORMAL.items():
        pw = geo.PpWave(parse(text, n), Domain(-0.5, 0.5, 0.5))
        p1 = Point(np.zeros(n), 0.0)
        p2 = Point(np.full(n, 0.2), 0.1)
        pn, _ = normalize_at(pw, p1)
        zero = np.zeros(n)
        for u in np.linspace(-0.5, 0.5, 11):
            worst = max(worst, abs(pn.H(u, zero)), float(np.max(np.abs(pn.H.gradient(u, zero)))))
        grid = GridSpec((-0.4, 0.4, 5), 0.3, 5)
        d1 = killing_algebra(pn, grid).dimension
        d2 = killing_algebra(normalize_at(pw, p2)[0], grid).dimension
        dims.append((d1, d2))
        _, T2 = normalize_at(pn)
        idem = max(idem, max(float(np.max(np.abs(T2.c(u)))) + abs(float(T2.beta(u)[0]))
                             for u in np.linspace(-0.5, 0.5, 11)))
        assert require_normal_form(pn, tol=1e-8)
    ok = worst < 1e-8 and all(a == b for a, b in dims) and dims[0][0] == 3 and idem < 1e-10
    return CheckResult("normal_coordinates", ok, f"max |H'|,|dH'| on axis={_fmt(worst)} dims={dims} "
                       f"idempotence={_fmt(idem)}")


def check_structure_preservation() -> CheckResult:
    rng = np.random.default_rng(SEED + 3)
    pieces = []
    for _ in range(8):
        W = rng.normal(size=(3, 3))
        pieces.append(W - W.T)
    M = lambda t: pieces[min(int(t / 2.5), 7)]  # noqa: E731
    drift = orthogonal_frame_ode(M, np.eye(3), (0.0, 20.0)).drift()
    wr = 0.0
    for n in (1, 2, 3):
        pw = random_plane_wave(rng, n)
        from .killing import propagator

        prop = propagator(pw)
        J = np.block([[np.zeros((n, n)), np.eye(n)], [-np.eye(n), np.zeros((n, n))]])
        for u in np.linspace(prop.u_min, prop.u_max, 21):
            P = prop(u)
            wr = max(wr, float(np.max(np.abs(P.T @ J @ P - J))))
    ok = drift < 1e-10 and wr < 1e-8
    return CheckResult("structure_preservation", ok, f"frame drift={_fmt(drift)} Wronskian drift={_fmt(wr)}")


def check_reductivity() -> CheckResult:
    out = []
    for name in ("cw_ricci_flat_2d", "rank1_example"):
        a = analyse(name)
        out.append(reductive_decomposition(a.normal, a.algebra.basis).max_violation)
    ok = max(out) < 1e-7
    return CheckResult("reductivity", ok, f"h-violation cw={_fmt(out[0])} rank1={_fmt(out[1])}")


def check_maintheo_oracle() -> CheckResult:
    hits, bad = [], []
    for name in bundled_names():
        a = analyse(name)
        if a.certificate is None and a.min_rank >= 2 and a.homogeneity.spans_Vperp:
            hits.append(name)
            if not a.plane_wave:
                bad.append(name)
    e = analyse("ex_dim3")
    outside = not (e.min_rank >= 2) and e.homogeneity.spans_Vperp and not e.plane_wave
    ok = not bad and outside
    return CheckResult("maintheo_oracle", ok, f"hypothesis met by {hits}; violations={bad or 'none'}; "
                       f"ex_dim3 rank-1 homogeneous non-plane-wave outside hypothesis={outside}")


def check_transprop_oracle() -> CheckResult:
    rows = []
    for name in bundled_names():
        a = analyse(name)
        if a.plane_wave and a.certificate is None:
            rows.append((name, a.transversal))
    ok = all(t <= 1 for _, t in rows)
    return CheckResult("transprop_oracle", ok, f"strongly indecomposable plane waves: {rows}")


def check_displayed_fields() -> CheckResult:
    rows = []
    for name in bundled_names():
        doc = load_document(name)
        pw = doc.pw()
        for K in doc.displayed_fields():
            rows.append((name, K.label, killing_residual(K, pw, doc.grid)))
    worst = max(r for *_, r in rows)
    return CheckResult("displayed_fields", worst < 1e-10, f"{len(rows)} fields, max residual={_fmt(worst)}")


CHECKS = {
    "ex_dim3": check_ex_dim3,
    "heisenberg_brackets": check_heisenberg_brackets,
    "dimension_bound": check_dimension_bound,
    "flat_n2_attains_10": check_flat_n2_attains_10,
    "rank1_example": check_rank1_example,
    "sippel_goenner": check_sippel_goenner,
    "kappa_defect": check_kappa_defect,
    "integrability": check_integrability,
    "normal_coordinates": check_normal_coordinates,
    "structure_preservation": check_structure_preservation,
    "reductivity": check_reductivity,
    "maintheo_oracle": check_maintheo_oracle,
    "transprop_oracle": check_transprop_oracle,
    "displayed_fields": check_displayed_fields,
}


def run(name: str) -> CheckResult:
    try:
        return CHECKS[name]()
    except Exception as exc:  # a crash is a failed row, not a crashed table
        return CheckResult(name, False, f"{type(exc).__name__}: {exc}")


def write_curves(path: str, samples: int = 101) -> None:
    """Per-u curves: entries of S(u) and det S'(u) for the rank-one example, Heisenberg Wronskians."""
    spec = rank1_example()
    pw = to_ppwave(spec, Domain(-1.0, 1.0, 1.0))
    hb = heisenberg_basis(pw)
    n = pw.n
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        head = ["u"] + [f"S{i + 1}{j + 1}" for i in range(n) for j in range(n)] + ["det_S_dot"]
        head += [f"W_L{i + 1}_K{j + 1}" for i in range(n) for j in range(n)]
        w.writerow(head)
        for u in np.linspace(-1.0, 1.0, samples):
            S = S_of(spec, u)
            row = [repr(float(u))] + [repr(float(v)) for v in S.ravel()]
            row.append(repr(float(np.linalg.det(S_dot_of(spec, u)))))
            for L, K in itertools.product(hb.L, hb.K):
                pl, dl = L.psi.value(u)
                pk, dk = K.psi.value(u)
                row.append(repr(float(pl @ dk - dl @ pk)))
            w.writerow(row)
