"""Curvature data and classification predicates of pp-waves in Brinkmann coordinates.

The metric is ``g = 2 du (dv + H du) + dx.dx`` with ``u = x+`` and ``v = x-``.
Everything here is read off the profile H: the only non-trivial curvature
components are ``R(d_i, d_u, d_j, d_u) = d_i d_j H``.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .expr import ProfileFunction, QuadraticForm, Symbolic

DEFAULT_TOL = 1e-9


@dataclass(frozen=True)
class Domain:
    u_min: float = -1.0
    u_max: float = 1.0
    radius: float = 1.0

    def __post_init__(self):
        if not self.u_min < self.u_max:
            raise ValueError("empty u-range")
        if self.radius <= 0:
            raise ValueError("radius must be positive")


@dataclass(frozen=True, eq=False)
class PpWave:
    """A pp-wave metric given by its profile function H(u, x)."""

    H: ProfileFunction
    domain: Domain = Domain()
    name: str = ""
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    @property
    def n(self) -> int:
        return self.H.n

    @property
    def dim(self) -> int:
        return self.H.n + 2

    def metric(self, p: "Point") -> np.ndarray:
        """Metric matrix in the coordinate order (v, x1..xn, u)."""
        n = self.n
        g = np.zeros((n + 2, n + 2))
        g[0, -1] = g[-1, 0] = 1.0
        g[1:-1, 1:-1] = np.eye(n)
        g[-1, -1] = 2.0 * self.H(p.u, p.x)
        return g


@dataclass(frozen=True)
class Point:
    """Coordinates (x-, x, x+); ``xm`` never enters any computation."""

    x: tuple
    u: float = 0.0
    xm: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "x", tuple(float(v) for v in np.atleast_1d(self.x)))

    @classmethod
    def origin(cls, n: int) -> "Point":
        return cls(x=(0.0,) * n, u=0.0)

    def to_json(self) -> dict:
        return {"xm": self.xm, "x": list(self.x), "u": self.u}


@dataclass(frozen=True)
class GridSpec:
    """Tensor-product sample grid: linspace in u times a cube of side 2*radius in x."""

    u: tuple = (-1.0, 1.0, 5)
    x_radius: float = 1.0
    x_count: int = 5
    x_center: tuple | None = None

    def __post_init__(self):
        if int(self.u[2]) < 1 or self.x_count < 1:
            raise ValueError("grid counts must be positive")

    @classmethod
    def from_json(cls, data: dict) -> "GridSpec":
        u = data.get("u", [-1.0, 1.0, 5])
        center = data.get("x_center")
        return cls((float(u[0]), float(u[1]), int(u[2])), float(data.get("x_radius", 1.0)),
                   int(data.get("x_count", 5)), None if center is None else tuple(map(float, center)))

    @classmethod
    def for_domain(cls, domain: Domain, count: int = 5) -> "GridSpec":
        return cls((domain.u_min, domain.u_max, count), domain.radius, count)

    def to_json(self) -> dict:
        d = {"u": list(self.u), "x_radius": self.x_radius, "x_count": self.x_count}
        if self.x_center is not None:
            d["x_center"] = list(self.x_center)
        return d

    def u_values(self) -> np.ndarray:
        return np.linspace(self.u[0], self.u[1], int(self.u[2]))

    def points(self, n: int) -> list[Point]:
        xs = np.linspace(-self.x_radius, self.x_radius, self.x_count)
        center = np.zeros(n) if self.x_center is None else np.asarray(self.x_center, dtype=float)
        return [Point(x=center + np.array(c), u=u) for u in self.u_values()
                for c in itertools.product(xs, repeat=n)]


def as_points(grid, pw: PpWave) -> list[Point]:
    if grid is None:
        grid = GridSpec.for_domain(pw.domain)
    if isinstance(grid, dict):
        grid = GridSpec.from_json(grid)
    if isinstance(grid, GridSpec):
        return grid.points(pw.n)
    return [p if isinstance(p, Point) else Point(x=p[1:], u=p[0]) for p in grid]


def u_values(grid, pw: PpWave) -> np.ndarray:
    if grid is None:
        grid = GridSpec.for_domain(pw.domain)
    if isinstance(grid, dict):
        grid = GridSpec.from_json(grid)
    if isinstance(grid, GridSpec):
        return grid.u_values()
    return np.unique([p.u for p in as_points(grid, pw)])


# --------------------------------------------------------------------------
# connection and curvature


@dataclass(frozen=True)
class Connection:
    grad_H: np.ndarray
    H_dot: float
    H_val: float


def connection(pw: PpWave, p: Point) -> Connection:
    """The data fixing the Levi-Civita connection at ``p``.

    Non-zero Christoffel terms: ``nabla d_i = H_i du (x) d_v`` and
    ``nabla d_u = dH (x) d_v - du (x) grad H``.
    """
    return Connection(pw.H.gradient(p.u, p.x), pw.H.u_derivative(p.u, p.x), pw.H(p.u, p.x))


@dataclass(frozen=True)
class CurvatureMatrix:
    R: np.ndarray
    base: Point

    def to_json(self) -> dict:
        return {"base": self.base.to_json(), "R": self.R.ravel().tolist()}

    @classmethod
    def from_json(cls, data: dict) -> "CurvatureMatrix":
        R = np.asarray(data["R"], dtype=float)
        n = int(round(np.sqrt(R.size)))
        b = data["base"]
        return cls(R.reshape(n, n), Point(x=b["x"], u=b["u"], xm=b.get("xm", 0.0)))


def curvature(pw: PpWave, p: Point) -> CurvatureMatrix:
    return CurvatureMatrix(pw.H.hessian(p.u, p.x), p)


def ricci(pw: PpWave, p: Point) -> float:
    """Ric(d_u, d_u) = -Laplacian(H); all other components vanish."""
    return -float(np.trace(curvature(pw, p).R))


def matrix_rank(R: np.ndarray, tol: float = DEFAULT_TOL) -> int:
    s = np.linalg.svd(np.atleast_2d(R), compute_uv=False)
    if s.size == 0:
        return 0
    return int(np.sum(s > tol * max(1.0, s[0])))


def curvature_rank(pw: PpWave, p: Point, tol: float = DEFAULT_TOL) -> int:
    if tol <= 0:
        raise ValueError("tol must be positive")
    return matrix_rank(curvature(pw, p).R, tol)


@dataclass(frozen=True)
class NablaCurvature:
    """nabla_k R_ij = d_k d_i d_j H (x-block) and nabla_u R_ij = d_u d_i d_j H (u-block)."""

    x_block: np.ndarray
    u_block: np.ndarray | None


def nabla_curvature(pw: PpWave, p: Point, include_u: bool = True) -> NablaCurvature:
    x_block = pw.H.third(p.u, p.x)
    u_block = pw.H.hessian(p.u, p.x, du=1) if include_u else None
    return NablaCurvature(x_block, u_block)


# --------------------------------------------------------------------------
# classification


@dataclass(frozen=True)
class PlaneWaveVerdict:
    value: bool
    method: str  # "structural" or "sampled"
    max_third: float = 0.0

    def __bool__(self) -> bool:
        return self.value


def _third_tags(n: int):
    return list(itertools.combinations_with_replacement(range(n), 3))


def is_plane_wave(pw: PpWave, grid=None, tol: float = DEFAULT_TOL) -> PlaneWaveVerdict:
    """Decide whether all third transverse derivatives of H vanish."""
    H = pw.H
    if isinstance(H, QuadraticForm):
        return PlaneWaveVerdict(True, "structural")
    derived = [H._partial(t, 0) for t in _third_tags(pw.n)]
    if all(d.is_zero for d in derived):
        return PlaneWaveVerdict(True, "structural")
    worst = 0.0
    for p in as_points(grid, pw):
        for d in derived:
            worst = max(worst, abs(d(p.u, p.x)))
    return PlaneWaveVerdict(worst < tol, "sampled", worst)


def decomposability_certificate(pw: PpWave, grid=None, tol: float = DEFAULT_TOL):
    """A unit vector in the common kernel of Hess H over the grid, or None.

    A constant direction L annihilated by every Hessian gives R(X, Y)L = 0,
    so the metric splits off a flat factor along L.
    """
    pts = as_points(grid, pw)
    if not pts:
        raise ValueError("grid is empty")
    stack = np.vstack([pw.H.hessian(p.u, p.x) for p in pts])
    _, s, vt = np.linalg.svd(stack)
    scale = max(1.0, s[0])
    if s[-1] >= tol * scale:
        return None
    v = vt[-1]
    k = int(np.argmax(np.abs(v) > 1e-12))
    if v[k] < 0:
        v = -v
    return v / np.linalg.norm(v)


def certificate_residual(pw: PpWave, v, grid=None) -> float:
    """max over the grid of |Hess H(p) v|, the testable contract of a certificate."""
    v = np.asarray(v, dtype=float)
    return max(float(np.max(np.abs(pw.H.hessian(p.u, p.x) @ v))) for p in as_points(grid, pw))


@dataclass(frozen=True)
class RankReport:
    ranks: tuple
    histogram: dict
    exceptional: tuple  # points where the rank is <= 1

    @property
    def min_rank(self) -> int:
        return min(self.ranks)


def rank_report(pw: PpWave, grid=None, tol: float = DEFAULT_TOL) -> RankReport:
    pts = as_points(grid, pw)
    ranks = [curvature_rank(pw, p, tol) for p in pts]
    hist: dict[int, int] = {}
    for r in ranks:
        hist[r] = hist.get(r, 0) + 1
    exceptional = tuple(p for p, r in zip(pts, ranks) if r <= 1)
    return RankReport(tuple(ranks), dict(sorted(hist.items())), exceptional)


@dataclass(frozen=True)
class IndecomposabilityReport:
    certified_decomposable: bool
    certificate: np.ndarray | None
    det_dS: tuple  # det of d_u Hess at the sampled u values (plane waves only)

    @property
    def verdict(self) -> str:
        return "certified decomposable" if self.certified_decomposable else "no obstruction found"

    @property
    def strongly_indecomposable_witness(self) -> bool:
        return not self.certified_decomposable and any(abs(d) > 1e-9 for d in self.det_dS)


def indecomposability_report(pw: PpWave, grid=None, tol: float = DEFAULT_TOL) -> IndecomposabilityReport:
    cert = decomposability_certificate(pw, grid, tol)
    dets: tuple = ()
    if isinstance(pw.H, QuadraticForm) and (pw.H.S_dot is not None or pw.H.constant):
        origin = np.zeros(pw.n)
        dets = tuple(float(np.linalg.det(pw.H.hessian(u, origin, du=1))) for u in u_values(grid, pw))
    return IndecomposabilityReport(cert is not None, cert, dets)


@dataclass(frozen=True)
class RicciFlatRankReport:
    hypothesis_met: bool
    max_abs_R: float | None = None

    @property
    def flat(self) -> bool:
        return self.hypothesis_met


def ricci_flat_rank_check(pw: PpWave, grid=None, tol: float = DEFAULT_TOL) -> RicciFlatRankReport:
    """If H is harmonic with rank <= 1 Hessian on the grid, the Hessian must vanish."""
    pts = as_points(grid, pw)
    mats = [curvature(pw, p).R for p in pts]
    for R in mats:
        if abs(np.trace(R)) > tol * max(1.0, np.max(np.abs(R))) or matrix_rank(R, tol) > 1:
            return RicciFlatRankReport(False)
    worst = max(float(np.max(np.abs(R))) for R in mats)
    if worst >= tol:
        raise AssertionError(f"Ricci-flat rank<=1 curvature is not flat: max|R| = {worst:.3e}")
    return RicciFlatRankReport(True, worst)


def dimension_bound(n: int) -> int:
    """Upper bound on the dimension of the Killing algebra of an indecomposable pp-wave."""
    return (2 * n + 3) + n * (n - 1) // 2
