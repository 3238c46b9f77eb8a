"""Coordinate changes preserving Brinkmann form, and normal coordinates at a point.

A transform T = (a, b, A, c, beta) sends old coordinates (v, x, u) to

    u~ = a u + b,   x~ = A x + c(u),   v~ = (v - c'(u).A x) / a + beta(u),

and the new profile is

    H~ = (H(u, x) + c''.(x~ - c) - a beta' - |c'|^2 / 2) / a^2.

The curves c and beta are parametrized by the *old* u.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import solve_ivp
from scipy.interpolate import CubicHermiteSpline

from .expr import ProfileFunction, QuadraticForm
from .geometry import Domain, Point, PpWave

RTOL = 1e-12
ATOL = 1e-14


class NormalizationError(Exception):
    def __init__(self, message: str, escape_time: float | None = None):
        super().__init__(message)
        self.escape_time = escape_time


class CoverageError(ValueError):
    pass


# --------------------------------------------------------------------------
# curves u -> (value, derivatives)


class Curve:
    """A vector-valued curve with derivatives; ``curve(u, k)`` is the k-th derivative."""

    dim: int
    u_min: float = -math.inf
    u_max: float = math.inf

    def __call__(self, u: float, k: int = 0) -> np.ndarray:
        raise NotImplementedError

    def _cover(self, u: float):
        if not self.u_min - 1e-9 <= u <= self.u_max + 1e-9:
            raise CoverageError(f"u={u} outside curve coverage [{self.u_min}, {self.u_max}]")


class ZeroCurve(Curve):
    def __init__(self, dim: int):
        self.dim = dim

    def __call__(self, u, k=0):
        return np.zeros(self.dim)


class PolynomialCurve(Curve):
    """c(u) = sum_j coeffs[j] u^j, with coeffs of shape (degree + 1, dim)."""

    def __init__(self, coeffs):
        self.coeffs = np.atleast_2d(np.asarray(coeffs, dtype=float))
        self.dim = self.coeffs.shape[1]

    def __call__(self, u, k=0):
        out = np.zeros(self.dim)
        for j in range(k, self.coeffs.shape[0]):
            out += math.perm(j, k) * u ** (j - k) * self.coeffs[j]
        return out


class HermiteCurve(Curve):
    """Cubic Hermite interpolant through (u, value, derivative) nodes."""

    def __init__(self, us, values, derivs):
        us = np.asarray(us, dtype=float)
        values = np.asarray(values, dtype=float).reshape(len(us), -1)
        derivs = np.asarray(derivs, dtype=float).reshape(len(us), -1)
        self.dim = values.shape[1]
        self.u_min, self.u_max = float(us[0]), float(us[-1])
        self.nodes = (us, values, derivs)
        if len(us) == 1:
            self._spline = None
        else:
            self._spline = CubicHermiteSpline(us, values, derivs, axis=0)

    def __call__(self, u, k=0):
        self._cover(u)
        if self._spline is None:
            return self.nodes[1][0] if k == 0 else (self.nodes[2][0] if k == 1 else np.zeros(self.dim))
        return self._spline(u, k) if k <= 3 else np.zeros(self.dim)


# --------------------------------------------------------------------------
# transforms


@dataclass(frozen=True, eq=False)
class BrinkmannTransform:
    a: float
    b: float
    A: np.ndarray
    c: Curve
    beta: Curve
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        A = np.array(self.A, dtype=float)
        if self.a == 0:
            raise ValueError("a must be non-zero")
        if A.ndim != 2 or A.shape[0] != A.shape[1] or np.linalg.norm(A.T @ A - np.eye(len(A))) >= 1e-12:
            raise ValueError("A must be orthogonal")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "a", float(self.a))
        object.__setattr__(self, "b", float(self.b))

    @property
    def n(self) -> int:
        return self.A.shape[0]

    @classmethod
    def identity(cls, n: int) -> "BrinkmannTransform":
        return cls(1.0, 0.0, np.eye(n), ZeroCurve(n), ZeroCurve(1))

    def old_u(self, u_new: float) -> float:
        return (u_new - self.b) / self.a

    def map_point(self, p: Point) -> Point:
        x = np.asarray(p.x)
        Ax = self.A @ x
        v = (p.xm - self.c(p.u, 1) @ Ax) / self.a + float(self.beta(p.u)[0])
        return Point(x=Ax + self.c(p.u), u=self.a * p.u + self.b, xm=v)

    def pull_point(self, q: Point) -> Point:
        u = self.old_u(q.u)
        x = self.A.T @ (np.asarray(q.x) - self.c(u))
        v = self.a * (q.xm - float(self.beta(u)[0])) + self.c(u, 1) @ (self.A @ x)
        return Point(x=x, u=u, xm=v)

    def inverse(self) -> "BrinkmannTransform":
        return BrinkmannTransform(1.0 / self.a, -self.b / self.a, self.A.T.copy(),
                                  _InverseC(self), _InverseBeta(self))

    def to_json(self, nodes=None) -> dict:
        us = np.asarray(nodes if nodes is not None else self.meta.get("nodes", [0.0]), dtype=float)
        return {
            "a": self.a,
            "b": self.b,
            "A": self.A.ravel().tolist(),
            "c_nodes": [[float(u), *self.c(u).tolist(), *self.c(u, 1).tolist()] for u in us],
            "beta_nodes": [[float(u), float(self.beta(u)[0]), float(self.beta(u, 1)[0])] for u in us],
        }

    @classmethod
    def from_json(cls, data: dict) -> "BrinkmannTransform":
        A = np.asarray(data["A"], dtype=float)
        n = int(round(math.sqrt(A.size)))
        cn = np.asarray(data["c_nodes"], dtype=float)
        bn = np.asarray(data["beta_nodes"], dtype=float)
        c = HermiteCurve(cn[:, 0], cn[:, 1:1 + n], cn[:, 1 + n:1 + 2 * n])
        beta = HermiteCurve(bn[:, 0], bn[:, 1:2], bn[:, 2:3])
        return cls(float(data["a"]), float(data["b"]), A.reshape(n, n), c, beta, {"nodes": cn[:, 0].tolist()})


class _InverseC(Curve):
    def __init__(self, T: BrinkmannTransform):
        self.T, self.dim = T, T.n

    def __call__(self, u, k=0):
        T = self.T
        return -(T.A.T @ T.c(T.old_u(u), k)) / T.a**k


class _InverseBeta(Curve):
    dim = 1

    def __init__(self, T: BrinkmannTransform):
        self.T = T

    def __call__(self, u, k=0):
        T = self.T
        s = T.old_u(u)
        a, c = T.a, T.c
        if k == 0:
            v = -a * T.beta(s)[0] - c(s, 1) @ c(s)
        elif k == 1:
            v = (-a * T.beta(s, 1)[0] - c(s, 2) @ c(s) - c(s, 1) @ c(s, 1)) / a
        elif k == 2:
            v = (-a * T.beta(s, 2)[0] - c(s, 3) @ c(s) - 3.0 * c(s, 2) @ c(s, 1)) / a**2
        else:
            raise NotImplementedError("third derivative of an inverse beta curve")
        return np.array([v])


def _rotate(A: np.ndarray, t):
    """Apply A to every slot of a symmetric tensor."""
    t = np.asarray(t)
    for axis in range(t.ndim):
        t = np.moveaxis(np.tensordot(A, t, axes=([1], [axis])), 0, axis)
    return t


class TransformedProfile(ProfileFunction):
    """H~ evaluated by pulling back to the old coordinates; derivatives by the chain rule.

    Supports x~-derivatives of any order up to three and a single u~-derivative
    of order at most two in x~, which covers curvature, its gradient and d_u Hess.
    """

    def __init__(self, H: ProfileFunction, T: BrinkmannTransform, _xs=(), _du=0):
        self.H, self.T, self.n = H, T, H.n
        self._xs, self._du = tuple(sorted(_xs)), _du

    def __repr__(self):
        return f"TransformedProfile({self.H!r}, xs={self._xs}, du={self._du})"

    def tensor(self, u_new, x_new, k, du=0):
        T = self.T
        if du > 1 or (du == 1 and k > 2):
            raise NotImplementedError("derivative order not supported for transformed profiles")
        u = T.old_u(u_new)
        xt = np.asarray(x_new, dtype=float)
        c = T.c(u)
        x = T.A.T @ (xt - c)
        H = self.H
        if du == 0:
            if k == 0:
                cd = T.c(u, 1)
                g = H(u, x) + T.c(u, 2) @ (xt - c) - T.a * T.beta(u, 1)[0] - 0.5 * cd @ cd
            else:
                g = _rotate(T.A, H.tensor(u, x, k))
                if k == 1:
                    g = g + T.c(u, 2)
        else:
            cd = T.c(u, 1)
            shift = T.A.T @ cd
            if k == 0:
                g = (H.u_derivative(u, x) - H.gradient(u, x) @ shift + T.c(u, 3) @ (xt - c)
                     - 2.0 * T.c(u, 2) @ cd - T.a * T.beta(u, 2)[0])
            else:
                nxt = H.tensor(u, x, k + 1)
                g = _rotate(T.A, H.tensor(u, x, k, 1) - np.tensordot(nxt, shift, axes=([k], [0])))
                if k == 1:
                    g = g + T.c(u, 3)
        return g / (T.a**2 * T.a**du)

    def __call__(self, u, x):
        if not self._xs and not self._du:
            return float(self.tensor(u, x, 0))
        t = self.tensor(u, x, len(self._xs), self._du)
        return float(t[self._xs] if self._xs else t)

    def derive(self, tags):
        from .expr import parse_tags

        xs, du = parse_tags(tags, self.n)
        return TransformedProfile(self.H, self.T, self._xs + xs, self._du + du)

    def gradient(self, u, x):
        return np.asarray(self.tensor(u, x, 1))

    def hessian(self, u, x, du=0):
        return np.asarray(self.tensor(u, x, 2, du))

    def third(self, u, x):
        return np.asarray(self.tensor(u, x, 3))

    def u_derivative(self, u, x):
        return float(self.tensor(u, x, 0, 1))

    def grad_u(self, u, x):
        return np.asarray(self.tensor(u, x, 1, 1))


def _image_domain(pw: PpWave, T: BrinkmannTransform) -> Domain:
    ends = sorted([T.a * pw.domain.u_min + T.b, T.a * pw.domain.u_max + T.b])
    return Domain(ends[0], ends[1], pw.domain.radius)


def apply_transform(pw: PpWave, T: BrinkmannTransform, name: str | None = None) -> PpWave:
    if T.n != pw.n:
        raise ValueError("transform and metric have different transverse dimension")
    return PpWave(TransformedProfile(pw.H, T), _image_domain(pw, T), name or pw.name)


# --------------------------------------------------------------------------
# normal coordinates


class NormalizingC(Curve):
    """c solving c'' = -grad H(u, -c); higher derivatives are read off H."""

    def __init__(self, H: ProfileFunction, sols, u_min: float, u_max: float):
        self.H, self.sols = H, sols
        self.dim = H.n
        self.u_min, self.u_max = u_min, u_max

    def state(self, u):
        self._cover(u)
        for lo, hi, sol in self.sols:
            if lo - 1e-9 <= u <= hi + 1e-9:
                return sol.sol(u)
        raise CoverageError(f"u={u} not covered")

    def __call__(self, u, k=0):
        n = self.dim
        y = self.state(u)
        c, cd = y[:n], y[n:2 * n]
        if k == 0:
            return c
        if k == 1:
            return cd
        if k == 2:
            return -self.H.gradient(u, -c)
        if k == 3:
            return -(self.H.grad_u(u, -c) - self.H.hessian(u, -c) @ cd)
        raise NotImplementedError


class NormalizingBeta(Curve):
    """beta' = H(u, -c) + grad H(u, -c).c - |c'|^2 / 2."""

    dim = 1

    def __init__(self, C: NormalizingC):
        self.C = C
        self.u_min, self.u_max = C.u_min, C.u_max

    def __call__(self, u, k=0):
        H, n = self.C.H, self.C.dim
        y = self.C.state(u)
        c, cd = y[:n], y[n:2 * n]
        if k == 0:
            return y[2 * n:]
        g = H.gradient(u, -c)
        if k == 1:
            return np.array([H(u, -c) + g @ c - 0.5 * cd @ cd])
        if k == 2:
            cdd = -g
            return np.array([H.u_derivative(u, -c) + (H.grad_u(u, -c) - H.hessian(u, -c) @ cd) @ c - cd @ cdd])
        raise NotImplementedError


def _already_normal(pw: PpWave, samples: int = 33) -> bool:
    if isinstance(pw.H, QuadraticForm):
        return True
    zero = np.zeros(pw.n)
    for u in np.linspace(pw.domain.u_min, pw.domain.u_max, samples):
        if pw.H(u, zero) != 0.0 or np.any(pw.H.gradient(u, zero) != 0.0):
            return False
    return True


def normalize_at(pw: PpWave, p0: Point | None = None, nodes: int = 41) -> tuple[PpWave, BrinkmannTransform]:
    """Normal Brinkmann coordinates centred at p0: H~(u, 0) = 0 and grad H~(u, 0) = 0.

    a = 1, A = I, b = -u0; c(u0) = -x0, c'(u0) = 0 and beta(u0) = -v0.
    """
    n = pw.n
    p0 = p0 or Point.origin(n)
    u0, x0 = float(p0.u), np.asarray(p0.x, dtype=float)
    lo, hi = pw.domain.u_min, pw.domain.u_max
    if not lo <= u0 <= hi:
        raise ValueError(f"base point u={u0} outside the domain [{lo}, {hi}]")
    if u0 == 0.0 and not x0.any() and p0.xm == 0.0 and _already_normal(pw):
        return pw, BrinkmannTransform.identity(n)

    H = pw.H

    def rhs(u, y):
        c, cd = y[:n], y[n:2 * n]
        g = H.gradient(u, -c)
        return np.concatenate([cd, -g, [H(u, -c) + g @ c - 0.5 * cd @ cd]])

    def blowup(u, y):
        return 1e8 - np.max(np.abs(y))

    blowup.terminal = True
    y0 = np.concatenate([-x0, np.zeros(n), [-p0.xm]])
    sols = []
    for end in (hi, lo):
        if end == u0:
            continue
        try:
            sol = solve_ivp(rhs, (u0, end), y0, method="DOP853", rtol=RTOL, atol=ATOL,
                            dense_output=True, events=blowup)
        except ArithmeticError as exc:
            raise NormalizationError(f"profile undefined along the normalizing curve: {exc}") from exc
        if sol.status != 0:
            t = float(sol.t[-1])
            raise NormalizationError(f"normalizing ODE escapes at u={t:.6g}", escape_time=t)
        sols.append((min(u0, end), max(u0, end), sol))
    if not sols:
        raise ValueError("degenerate u-range")
    C = NormalizingC(H, sols, lo, hi)
    T = BrinkmannTransform(1.0, 0.0 - u0, np.eye(n), C, NormalizingBeta(C),
                           {"nodes": np.linspace(lo, hi, nodes).tolist(), "base": p0.to_json()})
    return apply_transform(pw, T, pw.name), T


# --------------------------------------------------------------------------
# orthogonal frames


@dataclass(frozen=True)
class FrameTrajectory:
    ts: np.ndarray
    frames: np.ndarray
    M: object = field(repr=False)
    step: float = 0.0

    def __call__(self, t: float) -> np.ndarray:
        ts = self.ts
        lo, hi = min(ts[0], ts[-1]), max(ts[0], ts[-1])
        if not lo - 1e-12 <= t <= hi + 1e-12:
            raise ValueError(f"t={t} outside the integrated range")
        i = int(np.argmin(np.abs(ts - t)))
        return _polar(_rk4(self.M, ts[i], self.frames[i], t - ts[i]))

    def drift(self) -> float:
        eye = np.eye(self.frames.shape[1])
        return float(max(np.linalg.norm(A @ A.T - eye) for A in self.frames))


def _polar(A: np.ndarray) -> np.ndarray:
    U, _, Vt = np.linalg.svd(A)
    return U @ Vt


def _rk4(M, t, A, h):
    if h == 0:
        return A
    f = lambda s, X: -X @ M(s)  # noqa: E731
    k1 = f(t, A)
    k2 = f(t + h / 2, A + h / 2 * k1)
    k3 = f(t + h / 2, A + h / 2 * k2)
    k4 = f(t + h, A + h * k3)
    return A + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)


def orthogonal_frame_ode(M, A0, t_range=(0.0, 1.0), step: float = 2e-3) -> FrameTrajectory:
    """Solve A' = -A M(t), A(t0) = A0, with M skew; RK4 steps each followed by polar projection."""
    A0 = np.asarray(A0, dtype=float)
    if np.linalg.norm(A0 @ A0.T - np.eye(len(A0))) > 1e-10:
        raise ValueError("A0 must be orthogonal")
    if not callable(M):
        Mc = np.asarray(M, dtype=float)
        M = lambda t: Mc  # noqa: E731
    t0, t1 = map(float, t_range)
    count = max(1, int(math.ceil(abs(t1 - t0) / step)))
    ts = np.linspace(t0, t1, count + 1)
    frames = np.empty((count + 1,) + A0.shape)
    frames[0] = A0
    for i in range(count):
        frames[i + 1] = _polar(_rk4(M, ts[i], frames[i], ts[i + 1] - ts[i]))
    return FrameTrajectory(ts, frames, M, step)
