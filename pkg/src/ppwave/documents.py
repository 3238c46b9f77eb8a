"""Metric documents: JSON descriptions of a pp-wave plus optional displayed Killing fields."""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import jsonschema
import numpy as np

from .expr import ExprError, parse
from .families import PlaneWaveSpec, skew_from_upper, to_ppwave
from .geometry import Domain, GridSpec, Point, PpWave
from .killing import ExplicitPsi, KillingField
from .normalize import PolynomialCurve

DATA = resources.files("ppwave") / "data"


class DocumentError(ValueError):
    pass


def _load_json(name: str) -> dict:
    return json.loads((DATA / name).read_text())


SCHEMA = _load_json("metric_document.schema.json")


def bundled_names() -> list[str]:
    skip = {"provenance.json", "metric_document.schema.json"}
    return sorted(p.name[:-5] for p in DATA.iterdir() if p.name.endswith(".json") and p.name not in skip)


def provenance() -> dict:
    return _load_json("provenance.json")


@dataclass(frozen=True)
class MetricDocument:
    name: str
    n: int
    profile: dict
    grid: GridSpec
    base_point: Point | None = None
    killing_fields: tuple = ()
    raw: dict = field(default_factory=dict, repr=False)

    @classmethod
    def from_json(cls, data: dict) -> "MetricDocument":
        try:
            jsonschema.validate(data, SCHEMA)
        except jsonschema.ValidationError as exc:
            raise DocumentError(f"invalid metric document: {exc.message}") from exc
        grid = GridSpec.from_json(data.get("domain", {}))
        bp = data.get("base_point")
        base = None if bp is None else Point(x=bp["x"], u=bp.get("u", 0.0), xm=bp.get("xm", 0.0))
        doc = cls(data["name"], int(data["n"]), data["profile"], grid, base,
                  tuple(data.get("killing_fields", ())), data)
        if "family" in doc.profile and int(doc.profile["n"]) != doc.n:
            raise DocumentError("profile n differs from document n")
        if base is not None and len(base.x) != doc.n:
            raise DocumentError("base point has wrong dimension")
        doc.pw()  # validate by construction
        return doc

    def to_json(self) -> dict:
        return self.raw

    @property
    def domain(self) -> Domain:
        return Domain(self.grid.u[0], self.grid.u[1], self.grid.x_radius)

    @property
    def spec(self) -> PlaneWaveSpec | None:
        if "family" not in self.profile:
            return None
        return PlaneWaveSpec.from_json(self.profile)

    def pw(self) -> PpWave:
        if "family" in self.profile:
            try:
                return PpWave(to_ppwave(self.spec, self.domain).H, self.domain, self.name)
            except ValueError as exc:
                raise DocumentError(str(exc)) from exc
        try:
            H = parse(self.profile["expr"], self.n, self.profile.get("constants", {}))
        except (ExprError, ValueError) as exc:
            raise DocumentError(f"profile: {exc}") from exc
        return PpWave(H, self.domain, self.name)

    def base(self) -> Point:
        return self.base_point or Point.origin(self.n)

    def normal_grid(self) -> GridSpec:
        """The document grid moved so that the base point sits at the origin."""
        u0 = self.base().u
        g = self.grid
        return GridSpec((g.u[0] - u0, g.u[1] - u0, g.u[2]), g.x_radius, g.x_count)

    def displayed_fields(self) -> list[KillingField]:
        out = []
        m = self.n * (self.n - 1) // 2
        for f in self.killing_fields:
            coeffs = np.asarray(f["psi"], dtype=float).reshape(-1, self.n)
            curve = PolynomialCurve(coeffs)
            psi = ExplicitPsi(self.n, curve, lambda u, c=curve: c(u, 1), lambda u, c=curve: c(u, 2))
            F = skew_from_upper(f.get("F", [0.0] * m), self.n)
            out.append(KillingField(f["a"], f["b"], f["c"], F, psi, f.get("label", "")))
        return out


def load_document(ref: str | Path) -> MetricDocument:
    """Load from a path, or by bundled name (``ex_dim3``, ``rank1_example``, ...)."""
    path = Path(ref)
    if path.is_file():
        try:
            data = json.loads(path.read_text())
        except json.JSONDecodeError as exc:
            raise DocumentError(f"{path}: {exc}") from exc
    else:
        name = path.name[:-5] if path.name.endswith(".json") else path.name
        if name not in bundled_names():
            raise DocumentError(f"no such document: {ref}")
        data = _load_json(f"{name}.json")
    return MetricDocument.from_json(data)


def spec_document(spec: PlaneWaveSpec, name: str, grid: GridSpec | None = None) -> dict:
    grid = grid or GridSpec()
    return {"name": name, "n": spec.n, "profile": spec.to_json(), "domain": grid.to_json()}
