"""Homogeneous plane waves: the two Blau-O'Loughlin families and Cahen-Wallach spaces.

``type1``          S(u) = e^{uF} S_- e^{-uF}
``type2``          S(u) = (u+b)^-2 e^{log(u+b)F} S_- e^{-log(u+b)F},  u > -b
``cahen_wallach``  S(u) = S_-
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import expm

from .expr import QuadraticForm
from .geometry import Domain, PpWave, u_values

FAMILIES = ("type1", "type2", "cahen_wallach")


def skew_from_upper(upper, n: int) -> np.ndarray:
    """Build a skew matrix from its strict upper triangle (row-major)."""
    F = np.zeros((n, n))
    iu = np.triu_indices(n, 1)
    upper = np.asarray(upper, dtype=float).ravel()
    if upper.size != len(iu[0]):
        raise ValueError(f"expected {len(iu[0])} upper-triangle entries, got {upper.size}")
    F[iu] = upper
    return F - F.T


def upper_of(F: np.ndarray) -> list:
    return np.asarray(F)[np.triu_indices(F.shape[0], 1)].tolist()


def skew_exp(F, t: float = 1.0) -> np.ndarray:
    """exp(tF) for skew F (Pade scaling and squaring), re-orthogonalised."""
    F = np.asarray(F, dtype=float)
    if np.max(np.abs(F + F.T), initial=0.0) > 1e-12 * max(1.0, np.max(np.abs(F), initial=0.0)):
        raise ValueError("F is not skew-symmetric")
    E = expm(t * F)
    # one Newton step towards the polar factor; removes accumulated O(eps*|tF|) drift
    return 1.5 * E - 0.5 * E @ E.T @ E


@dataclass(frozen=True)
class PlaneWaveSpec:
    family: str
    S_minus: np.ndarray
    F: np.ndarray
    b_shift: float = 0.0
    name: str = ""

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown family {self.family!r}")
        S = np.array(self.S_minus, dtype=float)
        n = S.shape[0]
        F = np.zeros((n, n)) if self.F is None else np.array(self.F, dtype=float)
        if S.shape != (n, n) or F.shape != (n, n):
            raise ValueError("S_minus and F must be square of equal size")
        if np.max(np.abs(S - S.T)) > 1e-12:
            raise ValueError("S_minus must be symmetric")
        if np.max(np.abs(F + F.T)) > 1e-12:
            raise ValueError("F must be skew-symmetric")
        object.__setattr__(self, "S_minus", 0.5 * (S + S.T))
        object.__setattr__(self, "F", 0.5 * (F - F.T))

    @property
    def n(self) -> int:
        return self.S_minus.shape[0]

    def u_lower(self) -> float:
        return -self.b_shift if self.family == "type2" else -math.inf

    @classmethod
    def from_json(cls, data: dict) -> "PlaneWaveSpec":
        n = int(data["n"])
        S = np.asarray(data["S_minus"], dtype=float).reshape(n, n)
        F = skew_from_upper(data.get("F", [0.0] * (n * (n - 1) // 2)), n)
        return cls(data["family"], S, F, float(data.get("b_shift", 0.0)), data.get("name", ""))

    def to_json(self) -> dict:
        d = {
            "family": self.family,
            "n": self.n,
            "S_minus": self.S_minus.ravel().tolist(),
            "F": upper_of(self.F),
        }
        if self.family == "type2":
            d["b_shift"] = self.b_shift
        return d


def _check_u(spec: PlaneWaveSpec, u: float):
    if spec.family == "type2" and not u > -spec.b_shift:
        raise ValueError(f"type2 profile only defined for u > {-spec.b_shift}, got {u}")


def S_of(spec: PlaneWaveSpec, u: float) -> np.ndarray:
    _check_u(spec, u)
    if spec.family == "cahen_wallach":
        return spec.S_minus.copy()
    if spec.family == "type1":
        E = skew_exp(spec.F, u)
        S = E @ spec.S_minus @ E.T
    else:
        s = u + spec.b_shift
        E = skew_exp(spec.F, math.log(s))
        S = E @ spec.S_minus @ E.T / s**2
    return 0.5 * (S + S.T)


def S_dot_of(spec: PlaneWaveSpec, u: float) -> np.ndarray:
    """Closed-form u-derivative of S_of."""
    if spec.family == "cahen_wallach":
        return np.zeros_like(spec.S_minus)
    S = S_of(spec, u)
    C = spec.F @ S - S @ spec.F
    if spec.family == "type1":
        return C
    return (C - 2.0 * S) / (u + spec.b_shift)


def to_ppwave(spec: PlaneWaveSpec, domain: Domain | None = None) -> PpWave:
    if domain is None:
        lo = -1.0 if spec.family != "type2" else max(-1.0, -spec.b_shift + 0.5)
        domain = Domain(lo, lo + 2.0, 1.0)
    if domain.u_min <= spec.u_lower():
        raise ValueError(f"domain starts at u={domain.u_min}, family requires u > {spec.u_lower()}")
    H = QuadraticForm(
        spec.n,
        lambda u: S_of(spec, u),
        lambda u: S_dot_of(spec, u),
        constant=spec.family == "cahen_wallach" or (spec.family == "type1" and not spec.F.any()),
    )
    return PpWave(H, domain, spec.name or spec.family)


def matrix_ode_residual(spec: PlaneWaveSpec, a: float, b: float, F_test, grid=None) -> float:
    """max ||[S, F] + (a u + b) S' + 2 a S||_F over the u-values of the grid."""
    F_test = np.asarray(F_test, dtype=float)
    pw = to_ppwave(spec) if grid is None else None
    us = u_values(grid, pw) if pw is not None else _grid_us(grid)
    worst = 0.0
    for u in us:
        S, dS = S_of(spec, u), S_dot_of(spec, u)
        lhs = S @ F_test - F_test @ S + (a * u + b) * dS + 2.0 * a * S
        worst = max(worst, float(np.linalg.norm(lhs)))
    return worst


def _grid_us(grid):
    from .geometry import GridSpec

    if isinstance(grid, dict):
        grid = GridSpec.from_json(grid)
    if isinstance(grid, GridSpec):
        return grid.u_values()
    return np.asarray(grid, dtype=float).ravel()


def rank1_example() -> PlaneWaveSpec:
    """Rank-one homogeneous plane wave with S(u) = [[c^2, -cs], [-cs, s^2]]."""
    return PlaneWaveSpec("type1", np.diag([1.0, 0.0]), skew_from_upper([1.0], 2), name="rank1_example")


def cahen_wallach(S) -> PlaneWaveSpec:
    S = np.asarray(S, dtype=float)
    return PlaneWaveSpec("cahen_wallach", S, np.zeros_like(S), name="cahen_wallach")


BUNDLED_SPECS = {
    "rank1_example": rank1_example,
    "cw_flat": lambda: PlaneWaveSpec("cahen_wallach", np.zeros((2, 2)), np.zeros((2, 2)), name="cw_flat"),
    "cw_ricci_flat_2d": lambda: PlaneWaveSpec(
        "cahen_wallach", np.diag([1.0, -1.0]), np.zeros((2, 2)), name="cw_ricci_flat_2d"
    ),
}
