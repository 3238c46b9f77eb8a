"""Killing vector fields of pp-waves in (normal) Brinkmann coordinates.

A Killing field is stored through its parameters

    K = (c - a v - dPsi(u).x) d_v + (Psi(u) + F x) d_x + (a u + b) d_u

where Psi solves Psi'' = Hess H(u, 0) Psi. The Lie bracket follows the
isometry-group convention ``[K1, K2] = -(K1 K2 - K2 K1)``, under which the
evaluation map K -> (nabla K, K) at the origin is a homomorphism on b = 0 fields.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.integrate import solve_ivp
from scipy.linalg import expm

from .families import skew_from_upper, upper_of
from .geometry import (
    GridSpec,
    Point,
    PpWave,
    as_points,
    is_plane_wave,
    matrix_rank,
    u_values,
)

RTOL = 1e-12
ATOL = 1e-14


class KillingError(Exception):
    pass


class NotNormalForm(KillingError):
    pass


class IntegrationError(KillingError):
    pass


class BracketError(KillingError):
    pass


class DefectMismatch(KillingError):
    pass


# --------------------------------------------------------------------------
# normal form and the on-axis ODE


def require_normal_form(pw: PpWave, grid=None, tol: float = 1e-8) -> bool:
    """True iff H(u, 0) and grad H(u, 0) vanish on the u-grid."""
    zero = np.zeros(pw.n)
    for u in u_values(grid, pw):
        if abs(pw.H(u, zero)) >= tol or np.max(np.abs(pw.H.gradient(u, zero))) >= tol:
            return False
    return True


class Propagator:
    """Fundamental matrix Phi(u) of y' = [[0, I], [S(u), 0]] y with Phi(0) = I.

    S(u) = Hess H(u, 0). Constant S is propagated with expm; otherwise DOP853
    with dense output, integrated forwards and backwards from u = 0.
    """

    def __init__(self, pw: PpWave, u_range: tuple[float, float] | None = None):
        lo, hi = u_range if u_range is not None else (pw.domain.u_min, pw.domain.u_max)
        self.pw = pw
        self.n = n = pw.n
        self.u_min, self.u_max = min(lo, 0.0), max(hi, 0.0)
        self._zero = np.zeros(n)
        self._const = getattr(pw.H, "constant", False)
        if self._const:
            B = np.zeros((2 * n, 2 * n))
            B[:n, n:] = np.eye(n)
            B[n:, :n] = self.S(0.0)
            self._B = B
            return
        self._sols = []
        for end in (self.u_max, self.u_min):
            if end == 0.0:
                continue
            sol = solve_ivp(self._rhs, (0.0, end), np.eye(2 * n).ravel(), method="DOP853",
                            rtol=RTOL, atol=ATOL, dense_output=True)
            if not sol.success:
                raise IntegrationError(f"propagator failed towards u={end}: {sol.message}")
            self._sols.append((min(0.0, end), max(0.0, end), sol))

    def S(self, u: float) -> np.ndarray:
        return self.pw.H.hessian(u, self._zero)

    def _rhs(self, u, y):
        n = self.n
        P = y.reshape(2 * n, 2 * n)
        out = np.empty_like(P)
        out[:n] = P[n:]
        out[n:] = self.S(u) @ P[:n]
        return out.ravel()

    def __call__(self, u: float) -> np.ndarray:
        if not self.u_min - 1e-12 <= u <= self.u_max + 1e-12:
            raise IntegrationError(f"u={u} outside propagated range [{self.u_min}, {self.u_max}]")
        if self._const:
            return expm(u * self._B)
        if u == 0.0:
            return np.eye(2 * self.n)
        for lo, hi, sol in self._sols:
            if lo - 1e-12 <= u <= hi + 1e-12:
                return sol.sol(u).reshape(2 * self.n, 2 * self.n)
        raise IntegrationError(f"u={u} not covered")


def propagator(pw: PpWave, u_range=None) -> Propagator:
    key = ("propagator", None if u_range is None else tuple(map(float, u_range)))
    prop = pw._cache.get(key)
    if prop is None:
        prop = pw._cache[key] = Propagator(pw, u_range)
    return prop


class Psi:
    """A curve u -> Psi(u) with its first two derivatives."""

    n: int

    def value(self, u: float) -> tuple[np.ndarray, np.ndarray]:
        raise NotImplementedError

    def ddot(self, u: float) -> np.ndarray:
        raise NotImplementedError

    def __call__(self, u: float) -> np.ndarray:
        return self.value(u)[0]


class ODEPsi(Psi):
    """Solution of Psi'' = S(u) Psi determined by (Psi(0), Psi'(0))."""

    def __init__(self, prop: Propagator, psi0, dpsi0):
        self.prop = prop
        self.n = prop.n
        self.init = np.concatenate([np.asarray(psi0, float).ravel(), np.asarray(dpsi0, float).ravel()])
        if self.init.size != 2 * self.n:
            raise ValueError("initial data has wrong length")

    @property
    def psi0(self) -> np.ndarray:
        return self.init[: self.n]

    @property
    def dpsi0(self) -> np.ndarray:
        return self.init[self.n:]

    def value(self, u):
        y = self.prop(u) @ self.init
        return y[: self.n], y[self.n:]

    def ddot(self, u):
        return self.prop.S(u) @ self.value(u)[0]


class ExplicitPsi(Psi):
    """Psi given by closed-form callables; used for fields in raw coordinates."""

    def __init__(self, n: int, f, df, ddf):
        self.n, self._f, self._df, self._ddf = n, f, df, ddf

    @classmethod
    def constant(cls, vec) -> "ExplicitPsi":
        v = np.asarray(vec, dtype=float).ravel()
        z = np.zeros_like(v)
        return cls(v.size, lambda u: v, lambda u: z, lambda u: z)

    def value(self, u):
        return np.asarray(self._f(u), float), np.asarray(self._df(u), float)

    def ddot(self, u):
        return np.asarray(self._ddf(u), float)


class PerturbedPsi(Psi):
    """Psi + eps * u^2 in every component (a non-Killing control)."""

    def __init__(self, base: Psi, eps: float):
        self.base, self.eps, self.n = base, eps, base.n

    def value(self, u):
        p, dp = self.base.value(u)
        return p + self.eps * u * u, dp + 2.0 * self.eps * u

    def ddot(self, u):
        return self.base.ddot(u) + 2.0 * self.eps


def integrate_psi(pw: PpWave, psi0, dpsi0, u_range=None) -> ODEPsi:
    return ODEPsi(propagator(pw, u_range), psi0, dpsi0)


# --------------------------------------------------------------------------
# Killing fields


@dataclass(frozen=True, eq=False)
class KillingField:
    a: float
    b: float
    c: float
    F: np.ndarray
    psi: Psi
    label: str = field(default="", compare=False)

    def __post_init__(self):
        F = np.array(self.F, dtype=float)
        if F.ndim != 2 or F.shape[0] != F.shape[1] or np.max(np.abs(F + F.T), initial=0.0) > 1e-12:
            raise ValueError("F must be a skew-symmetric square matrix")
        object.__setattr__(self, "F", 0.5 * (F - F.T))
        for k in ("a", "b", "c"):
            object.__setattr__(self, k, float(getattr(self, k)))

    @property
    def n(self) -> int:
        return self.F.shape[0]

    @property
    def is_ode(self) -> bool:
        return isinstance(self.psi, ODEPsi)

    def vector(self) -> np.ndarray:
        """Parameter vector (a, b, c, F upper, Psi(0), Psi'(0))."""
        psi0, dpsi0 = self.psi.value(0.0)
        return np.concatenate([[self.a, self.b, self.c], upper_of(self.F), psi0, dpsi0])

    @classmethod
    def from_vector(cls, vec, prop: Propagator, label: str = "") -> "KillingField":
        n = prop.n
        m = n * (n - 1) // 2
        vec = np.asarray(vec, dtype=float)
        F = skew_from_upper(vec[3:3 + m], n)
        return cls(vec[0], vec[1], vec[2], F, ODEPsi(prop, vec[3 + m:3 + m + n], vec[3 + m + n:]), label)

    def value_at(self, p: Point) -> np.ndarray:
        """Components (d_v, d_x, d_u) of K at p."""
        x = np.asarray(p.x)
        psi, dpsi = self.psi.value(p.u)
        return np.concatenate([[self.c - self.a * p.xm - dpsi @ x], psi + self.F @ x, [self.a * p.u + self.b]])

    def with_psi(self, psi: Psi) -> "KillingField":
        return KillingField(self.a, self.b, self.c, self.F, psi, self.label)

    def to_json(self) -> dict:
        psi0, dpsi0 = self.psi.value(0.0)
        d = {
            "a": self.a, "b": self.b, "c": self.c, "F": upper_of(self.F),
            "psi0": psi0.tolist(), "dpsi0": dpsi0.tolist(),
        }
        if self.is_ode:
            d["u_range"] = [self.psi.prop.u_min, self.psi.prop.u_max]
        return d

    @classmethod
    def from_json(cls, data: dict, pw: PpWave) -> "KillingField":
        n = pw.n
        rng = tuple(data["u_range"]) if "u_range" in data else None
        prop = propagator(pw, rng)
        F = skew_from_upper(data.get("F", [0.0] * (n * (n - 1) // 2)), n)
        return cls(data["a"], data["b"], data["c"], F, ODEPsi(prop, data["psi0"], data["dpsi0"]))


def v_field(pw: PpWave, u_range=None) -> KillingField:
    """The parallel null field d_v."""
    n = pw.n
    return KillingField(0.0, 0.0, 1.0, np.zeros((n, n)), integrate_psi(pw, np.zeros(n), np.zeros(n), u_range), "d_v")


def combine(coeffs, fields: Sequence[KillingField], label: str = "") -> KillingField:
    props = {id(K.psi.prop) for K in fields if K.is_ode}
    if len(props) != 1 or not all(K.is_ode for K in fields):
        raise KillingError("linear combinations need ODE fields on a common propagator")
    vec = sum(float(w) * K.vector() for w, K in zip(coeffs, fields))
    return KillingField.from_vector(vec, fields[0].psi.prop, label)


def killing_residual(K: KillingField, pw: PpWave, grid=None, phi_dot=None) -> float:
    """max over the grid of |Psi''.x + phi' - grad H.(Psi + F x) - (a u + b) H_u - 2 a H|.

    ``phi_dot`` (a callable of u) is the extra d_v term of fields written in
    non-normal coordinates; it is zero in normal coordinates.
    """
    worst = 0.0
    for p in as_points(grid, pw):
        x = np.asarray(p.x)
        psi, _ = K.psi.value(p.u)
        r = K.psi.ddot(p.u) @ x
        if phi_dot is not None:
            r += float(phi_dot(p.u))
        r -= pw.H.gradient(p.u, x) @ (psi + K.F @ x)
        r -= (K.a * p.u + K.b) * pw.H.u_derivative(p.u, x)
        r -= 2.0 * K.a * pw.H(p.u, x)
        worst = max(worst, abs(r))
    return worst


@dataclass(frozen=True)
class KillingAlgebra:
    basis: tuple  # d_v first
    dimension: int
    singular_values: np.ndarray
    gap: float
    tol: float

    @property
    def trusted(self) -> bool:
        return self.gap > 1e3


def _skew_basis(n: int):
    for k, l in itertools.combinations(range(n), 2):
        E = np.zeros((n, n))
        E[k, l], E[l, k] = 1.0, -1.0
        yield E


def killing_algebra(pw: PpWave, grid=None, tol: float = 1e-7, normal_tol: float = 1e-8) -> KillingAlgebra:
    """Numerical basis of the Killing algebra of a pp-wave in normal coordinates.

    Every parameter enters the Killing equation linearly, so the residual at
    each grid point is a row of a matrix acting on
    theta = (a, b, F upper, Psi(0), Psi'(0)); its kernel is the algebra modulo d_v.
    """
    if not require_normal_form(pw, grid, normal_tol):
        raise NotNormalForm("profile is not in normal form at x = 0; normalize first")
    n = pw.n
    skews = list(_skew_basis(n))
    m = len(skews)
    pts = as_points(grid, pw)
    n_par = 2 + m + 2 * n
    if len(pts) < n_par + 1:
        raise KillingError(f"grid has {len(pts)} points, need at least {n_par + 1}")
    us = [p.u for p in pts]
    prop = propagator(pw, (min(us), max(us)))
    M = np.empty((len(pts), n_par))
    for r, p in enumerate(pts):
        x = np.asarray(p.x)
        grad = pw.H.gradient(p.u, x)
        Hu = pw.H.u_derivative(p.u, x)
        M[r, 0] = -p.u * Hu - 2.0 * pw.H(p.u, x)
        M[r, 1] = -Hu
        for k, E in enumerate(skews):
            M[r, 2 + k] = -grad @ (E @ x)
        top = prop(p.u)[:n]
        M[r, 2 + m:] = top.T @ (prop.S(p.u) @ x - grad)
    scale = np.linalg.norm(M, axis=0)
    scale[scale == 0.0] = 1.0
    _, s, vt = np.linalg.svd(M / scale, full_matrices=True)
    s_full = np.zeros(n_par)
    s_full[: s.size] = s
    smax = s_full[0]
    keep = s_full > tol * smax if smax > 0 else np.zeros(n_par, bool)
    kernel = vt[~keep]
    kept, dropped = s_full[keep], s_full[~keep]
    if kept.size == 0 or dropped.size == 0:
        gap = np.inf
    else:
        gap = kept.min() / dropped.max() if dropped.max() > 0 else np.inf
    basis = [v_field(pw, (prop.u_min, prop.u_max))]
    for i, y in enumerate(kernel):
        theta = y / scale
        theta = theta / np.max(np.abs(theta))
        theta[np.abs(theta) < 1e-13] = 0.0
        vec = np.concatenate([theta[:2], [0.0], theta[2:]])
        basis.append(KillingField.from_vector(vec, prop, f"K{i + 1}"))
    return KillingAlgebra(tuple(basis), len(basis), s_full, float(gap), tol)


# --------------------------------------------------------------------------
# bracket


class BracketPsi(Psi):
    """Psi of [K1, K2] evaluated pointwise from the parameters of K1, K2."""

    def __init__(self, K1: KillingField, K2: KillingField):
        self.K1, self.K2, self.n = K1, K2, K1.n

    def value(self, u):
        K1, K2 = self.K1, self.K2
        p1, d1 = K1.psi.value(u)
        p2, d2 = K2.psi.value(u)
        dd1, dd2 = K1.psi.ddot(u), K2.psi.ddot(u)
        w1, w2 = K1.a * u + K1.b, K2.a * u + K2.b
        psi = K1.F @ p2 - K2.F @ p1 - w1 * d2 + w2 * d1
        dpsi = K1.F @ d2 - K2.F @ d1 - K1.a * d2 - w1 * dd2 + K2.a * d1 + w2 * dd1
        return psi, dpsi

    def ddot(self, u, h: float = 1e-4):
        # only needed for non-ODE inputs; central difference of dpsi
        return (self.value(u + h)[1] - self.value(u - h)[1]) / (2 * h)


def _c_hat(K1: KillingField, K2: KillingField, u: float) -> float:
    p1, d1 = K1.psi.value(u)
    p2, d2 = K2.psi.value(u)
    return float(p1 @ d2 - d1 @ p2 + K2.a * K1.c - K1.a * K2.c)


def bracket(K1: KillingField, K2: KillingField, check_tol: float = 1e-8,
            closure_tol: float = 1e-7, nodes: int = 9) -> KillingField:
    """Lie bracket in the isometry-group convention.

    b^ = a1 b2 - a2 b1, c^ = Psi1.Psi2' - Psi1'.Psi2 + a2 c1 - a1 c2,
    F^ = [F1, F2], Psi^ = F1 Psi2 - F2 Psi1 - (a1 u + b1) Psi2' + (a2 u + b2) Psi1'.
    """
    if K1.n != K2.n:
        raise BracketError("fields have different transverse dimension")
    raw = BracketPsi(K1, K2)
    b = K1.a * K2.b - K2.a * K1.b
    F = K1.F @ K2.F - K2.F @ K1.F
    c0 = _c_hat(K1, K2, 0.0)
    if not (K1.is_ode and K2.is_ode and K1.psi.prop is K2.psi.prop):
        return KillingField(0.0, b, c0, F, raw)
    prop = K1.psi.prop
    us = np.linspace(prop.u_min, prop.u_max, nodes)
    drift = max(abs(_c_hat(K1, K2, u) - c0) for u in us)
    if drift > check_tol * max(1.0, abs(c0)):
        raise BracketError(f"c^ not constant along u: drift {drift:.3e}")
    psi0, dpsi0 = raw.value(0.0)
    out = KillingField(0.0, b, c0, F, ODEPsi(prop, psi0, dpsi0))
    worst, size = 0.0, 1.0
    for u in us:
        p, dp = raw.value(u)
        q, dq = out.psi.value(u)
        worst = max(worst, np.max(np.abs(p - q), initial=0.0), np.max(np.abs(dp - dq), initial=0.0))
        size = max(size, np.max(np.abs(p), initial=0.0), np.max(np.abs(dp), initial=0.0))
    if worst > closure_tol * size:
        raise BracketError(f"bracket Psi does not solve the axis ODE: mismatch {worst:.3e}")
    return out


def structure_constants(basis: Sequence[KillingField]) -> np.ndarray:
    """C[i, j, k] with [E_i, E_j] = sum_k C[i, j, k] E_k (least squares)."""
    B = np.array([K.vector() for K in basis]).T
    d = len(basis)
    C = np.zeros((d, d, d))
    for i in range(d):
        for j in range(i + 1, d):
            v = bracket(basis[i], basis[j]).vector()
            coef = np.linalg.lstsq(B, v, rcond=None)[0]
            C[i, j], C[j, i] = coef, -coef
    return C


@dataclass(frozen=True)
class HeisenbergBasis:
    L: tuple  # Psi(0) = 0, Psi'(0) = e_i
    K: tuple  # Psi(0) = e_i, Psi'(0) = 0


def heisenberg_basis(pw: PpWave, u_range=None) -> HeisenbergBasis:
    if not is_plane_wave(pw):
        raise KillingError("Heisenberg fields exist only for plane waves")
    n = pw.n
    prop = propagator(pw, u_range)
    Z, I = np.zeros((n, n)), np.eye(n)
    L = tuple(KillingField(0, 0, 0, Z, ODEPsi(prop, np.zeros(n), I[i]), f"L{i + 1}") for i in range(n))
    K = tuple(KillingField(0, 0, 0, Z, ODEPsi(prop, I[i], np.zeros(n)), f"K{i + 1}") for i in range(n))
    return HeisenbergBasis(L, K)


# --------------------------------------------------------------------------
# evaluation maps


@dataclass(frozen=True)
class SimElement:
    """(nabla K, K) at the origin, an element of sim(n) semidirect R^{1,n+1}.

    Linear part in the frame (d_v, d_x, d_u): [[-a, -Y^T, 0], [0, F, Y], [0, 0, a]].
    """

    a: float
    F: np.ndarray
    Y: np.ndarray
    c: float
    X: np.ndarray
    b: float

    @property
    def n(self) -> int:
        return len(self.X)

    def matrix(self) -> np.ndarray:
        n = self.n
        A = np.zeros((n + 2, n + 2))
        A[0, 0], A[-1, -1] = -self.a, self.a
        A[0, 1:-1] = -self.Y
        A[1:-1, -1] = self.Y
        A[1:-1, 1:-1] = self.F
        return A

    def translation(self) -> np.ndarray:
        return np.concatenate([[self.c], self.X, [self.b]])

    @classmethod
    def from_parts(cls, A: np.ndarray, t: np.ndarray) -> "SimElement":
        return cls(-A[0, 0], A[1:-1, 1:-1].copy(), A[1:-1, -1].copy(), t[0], t[1:-1].copy(), t[-1])

    def bracket(self, other: "SimElement") -> "SimElement":
        A1, A2 = self.matrix(), other.matrix()
        t1, t2 = self.translation(), other.translation()
        return SimElement.from_parts(A1 @ A2 - A2 @ A1, A1 @ t2 - A2 @ t1)

    def __sub__(self, other: "SimElement") -> "SimElement":
        return SimElement.from_parts(self.matrix() - other.matrix(), self.translation() - other.translation())

    def norm(self) -> float:
        return float(max(np.max(np.abs(self.matrix())), np.max(np.abs(self.translation()))))

    def to_json(self) -> dict:
        return {"a": self.a, "F": upper_of(self.F), "Y": list(self.Y), "c": self.c, "X": list(self.X), "b": self.b}


def _check_origin(pw: PpWave, p0: Point | None):
    if p0 is not None and (p0.u != 0.0 or any(p0.x) or p0.xm != 0.0):
        raise KillingError("the evaluation map is defined at the origin of normal coordinates")


def kappa(K: KillingField, pw: PpWave | None = None, p0: Point | None = None) -> SimElement:
    _check_origin(pw, p0)
    X, Y = K.psi.value(0.0)
    return SimElement(K.a, K.F.copy(), Y.copy(), K.c, X.copy(), K.b)


def kappa_defect_closed_form(K1: KillingField, K2: KillingField, S: np.ndarray) -> SimElement:
    """Pure Y-part b1 S X2 - b2 S X1, everything else zero."""
    X1, X2 = K1.psi.value(0.0)[0], K2.psi.value(0.0)[0]
    n = K1.n
    Y = K1.b * (S @ X2) - K2.b * (S @ X1)
    return SimElement(0.0, np.zeros((n, n)), Y, 0.0, np.zeros(n), 0.0)


def kappa_defect(K1: KillingField, K2: KillingField, pw: PpWave, p0: Point | None = None,
                 tol: float = 1e-8) -> SimElement:
    """[kappa K1, kappa K2] - kappa [K1, K2], cross-checked against its closed form."""
    _check_origin(pw, p0)
    defect = kappa(K1).bracket(kappa(K2)) - kappa(bracket(K1, K2))
    S = pw.H.hessian(0.0, np.zeros(pw.n))
    expected = kappa_defect_closed_form(K1, K2, S)
    err = (defect - expected).norm()
    if err > tol * max(1.0, expected.norm()):
        raise DefectMismatch(f"defect differs from closed form by {err:.3e}")
    return defect


@dataclass(frozen=True)
class EuclideanMotion:
    F: np.ndarray
    X: np.ndarray

    def bracket(self, other: "EuclideanMotion") -> "EuclideanMotion":
        return EuclideanMotion(self.F @ other.F - other.F @ self.F, self.F @ other.X - other.F @ self.X)


def lambda_map(K: KillingField, tol: float = 1e-12) -> EuclideanMotion:
    if abs(K.b) > tol:
        raise KillingError("lambda is defined on fields with b = 0")
    return EuclideanMotion(K.F.copy(), K.psi.value(0.0)[0].copy())


# --------------------------------------------------------------------------
# integrability, transversality, homogeneity


def integrability_residual(K: KillingField, pw: PpWave, p: Point) -> float:
    """max |(nabla_K R) - (phi . R)| over the slots (d_i, d_u, d_j, d_u).

    nabla_K R = (Psi + F x).nabla_x Hess + (a u + b) d_u Hess and, with phi = nabla K,
    (phi . R) = -([Hess, F] + 2 a Hess).
    """
    x = np.asarray(p.x)
    psi, _ = K.psi.value(p.u)
    T = pw.H.third(p.u, x)
    hess = pw.H.hessian(p.u, x)
    w = K.a * p.u + K.b
    lhs = np.einsum("k,kij->ij", psi + K.F @ x, T)
    if w != 0.0:
        lhs = lhs + w * pw.H.hessian(p.u, x, du=1)
    rhs = -(hess @ K.F - K.F @ hess + 2.0 * K.a * hess)
    return float(np.max(np.abs(lhs - rhs)))


def transversal_dimension(basis: Sequence[KillingField], tol: float = 1e-8) -> int:
    if not basis:
        return 0
    ab = np.array([[K.a, K.b] for K in basis])
    if not np.any(ab):
        return 0
    return matrix_rank(ab, tol)


@dataclass(frozen=True)
class HomogeneityReport:
    spans_tangent: bool
    spans_Vperp: bool
    evaluation_rank: int

    def to_json(self) -> dict:
        return {"spans_tangent": self.spans_tangent, "spans_Vperp": self.spans_Vperp,
                "evaluation_rank": self.evaluation_rank}


def homogeneity_report(pw: PpWave, basis: Sequence[KillingField], p0: Point | None = None,
                       tol: float = 1e-8) -> HomogeneityReport:
    """Rank of the field values at p0; V-perp is spanned iff the values contain {du = 0}."""
    p0 = p0 or Point.origin(pw.n)
    W = np.array([K.value_at(p0) for K in basis])
    r = matrix_rank(W, tol)
    r_u = matrix_rank(W[:, -1:], tol)
    n = pw.n
    return HomogeneityReport(r == n + 2, r - r_u == n + 1, r)


@dataclass(frozen=True)
class ReductiveDecomposition:
    h_basis: tuple
    m_basis: tuple
    max_violation: float
    max_residual: float


def reductive_decomposition(pw: PpWave, basis: Sequence[KillingField], p0: Point | None = None,
                            tol: float = 1e-8) -> ReductiveDecomposition:
    """h = span(L_i), m = span(d_v, K+, [K+, L_i]); measure the h-part of [h, m]."""
    _check_origin(pw, p0)
    cands = [K for K in basis if abs(K.b) > tol]
    if not cands:
        raise KillingError("not homogeneous at p0: no field with b != 0")
    best = min(cands, key=lambda K: abs(K.a))  # min() keeps the first on ties
    kplus = combine([1.0 / best.b], [best], "K+")
    prop = kplus.psi.prop
    heis = heisenberg_basis(pw, (prop.u_min, prop.u_max))
    h = list(heis.L)
    m = [v_field(pw, (prop.u_min, prop.u_max)), kplus] + [bracket(kplus, L) for L in h]
    B = np.array([K.vector() for K in h + m]).T
    worst = resid = 0.0
    for L in h:
        for Y in m:
            v = bracket(L, Y).vector()
            coef, *_ = np.linalg.lstsq(B, v, rcond=None)
            worst = max(worst, float(np.max(np.abs(coef[: len(h)]))))
            resid = max(resid, float(np.max(np.abs(B @ coef - v))))
    return ReductiveDecomposition(tuple(h), tuple(m), worst, resid)


def derived_algebra_dimension(basis: Sequence[KillingField], tol: float = 1e-8) -> int:
    """dim [k, k], for comparison with the a = 0 subalgebra."""
    vecs = [bracket(K1, K2).vector() for K1, K2 in itertools.combinations(basis, 2)]
    return matrix_rank(np.array(vecs), tol) if vecs else 0


def a_zero_dimension(basis: Sequence[KillingField], tol: float = 1e-8) -> int:
    """dim of the subalgebra {a = 0}, i.e. fields with nabla_V K = 0."""
    a = np.array([[K.a] for K in basis])
    return len(basis) - matrix_rank(a, tol)
