"""Projection bodies of polytopes and the Petty projection functional.

A polytope enters through its surface area measure, the discrete measure
``sum a_i delta_{nu_i}`` on facet normals. Volume-dependent quantities need
vertices as well.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
from scipy.spatial import ConvexHull, QhullError

from .constants import unit_ball_volume
from .sphere import SphereRule, coarse_rule, sphere_rule

__all__ = [
    "FacetPolytope",
    "from_vertices",
    "polytope_from_json",
    "projection_area",
    "polytope_volume",
    "petty_functional",
    "petty_rhs",
    "petty_margin",
    "PettyResult",
    "polar_projection_volume",
    "cube",
    "simplex",
    "crosspolytope",
    "regular_ngon",
    "random_hull",
    "builtin_polytope",
]


@dataclass(frozen=True, eq=False)
class FacetPolytope:
    normals: np.ndarray
    areas: np.ndarray
    vertices: np.ndarray | None = None
    name: str = field(default="", compare=False)

    def __post_init__(self):
        nu = np.atleast_2d(np.asarray(self.normals, dtype=float))
        a = np.asarray(self.areas, dtype=float).reshape(-1)
        n = nu.shape[1]
        if not 2 <= n <= 4:
            raise ValueError("polytopes are supported for 2 <= n <= 4")
        if a.shape[0] != nu.shape[0] or np.any(a <= 0):
            raise ValueError("need one positive area per facet normal")
        if np.max(np.abs(np.linalg.norm(nu, axis=1) - 1)) > 1e-12:
            raise ValueError("facet normals must be unit vectors")
        closure = np.linalg.norm(a @ nu)
        if closure > 1e-10 * max(1.0, float(a.sum())):
            raise ValueError(f"surface area measure does not close: |sum a_i nu_i| = {closure:.3e}")
        v = None if self.vertices is None else np.asarray(self.vertices, dtype=float)
        if v is not None and (v.ndim != 2 or v.shape[1] != n):
            raise ValueError("vertices must be an (m, n) array")
        object.__setattr__(self, "normals", nu)
        object.__setattr__(self, "areas", a)
        object.__setattr__(self, "vertices", v)

    @property
    def n(self) -> int:
        return self.normals.shape[1]

    def to_json(self) -> dict:
        out = {
            "n": self.n,
            "facets": [{"normal": nu.tolist(), "area": float(a)} for nu, a in zip(self.normals, self.areas)],
        }
        if self.vertices is not None:
            out["vertices"] = self.vertices.tolist()
        return out


def _hull(points: np.ndarray) -> ConvexHull:
    try:
        return ConvexHull(points)
    except QhullError as exc:
        raise ValueError(f"degenerate (lower-dimensional) point set: {exc.args[0].splitlines()[0]}") from None


def from_vertices(points, name: str = "") -> FacetPolytope:
    """Facet normals and areas of ``conv(points)``."""
    pts = np.asarray(points, dtype=float)
    hull = _hull(pts)
    n = pts.shape[1]
    normals = hull.equations[:, :n]
    normals = normals / np.linalg.norm(normals, axis=1, keepdims=True)
    simplices = pts[hull.simplices]  # (facets, n, n)
    edges = simplices[:, 1:, :] - simplices[:, :1, :]  # (facets, n-1, n)
    gram = edges @ np.swapaxes(edges, 1, 2)
    areas = np.sqrt(np.abs(np.linalg.det(gram))) / math.factorial(n - 1)
    keep = areas > 1e-14 * areas.max()
    return FacetPolytope(normals[keep], areas[keep], pts[hull.vertices], name)


def polytope_from_json(obj: dict) -> FacetPolytope:
    try:
        n = int(obj["n"])
        if "facets" in obj:
            normals = np.array([f["normal"] for f in obj["facets"]], dtype=float)
            areas = np.array([f["area"] for f in obj["facets"]], dtype=float)
            poly = FacetPolytope(normals.reshape(-1, n), areas, obj.get("vertices"), obj.get("name", ""))
        else:
            poly = from_vertices(obj["vertices"], obj.get("name", ""))
    except (KeyError, TypeError) as exc:
        raise ValueError(f"malformed polytope description: {exc!r}") from None
    if poly.n != n:
        raise ValueError("declared n does not match the normals")
    return poly


def projection_area(K: FacetPolytope, u) -> np.ndarray | float:
    """``|P_{u^perp} K|_{n-1} = (1/2) sum a_i |<nu_i, u>|`` for one or many directions."""
    u = np.asarray(u, dtype=float)
    vals = 0.5 * np.abs(np.atleast_2d(u) @ K.normals.T) @ K.areas
    return float(vals[0]) if u.ndim == 1 else vals


def polytope_volume(K: FacetPolytope) -> float:
    if K.vertices is None:
        raise ValueError("volume unavailable: polytope was given without vertices")
    return float(_hull(K.vertices).volume)


class PettyResult(NamedTuple):
    value: float
    rule_tolerance: float


def _neg_n_mean(h: np.ndarray, w: np.ndarray, n: int) -> float:
    return float(np.dot(w, h ** (-float(n))))


def petty_functional_result(K: FacetPolytope, rule: SphereRule | None = None) -> PettyResult:
    """Petty functional; tolerance is twice the change from the half-resolution rule."""
    n = K.n
    rule = sphere_rule(n) if rule is None else rule
    scale = n * unit_ball_volume(n) / unit_ball_volume(n - 1)

    def value_on(r):
        return scale * _neg_n_mean(projection_area(K, r.nodes), r.weights, n) ** (-1 / n)

    value = value_on(rule)
    coarse = coarse_rule(rule)
    tol = 0.0 if coarse is None else 2 * abs(value_on(coarse) - value)
    return PettyResult(value, tol)


def petty_functional(K: FacetPolytope, rule: SphereRule | None = None) -> float:
    """``(n omega_n / omega_{n-1}) (int |P_{u^perp} K|^{-n} du)^{-1/n}``."""
    return petty_functional_result(K, rule).value


def petty_rhs(K: FacetPolytope) -> float:
    n = K.n
    return n * unit_ball_volume(n) ** (1 / n) * polytope_volume(K) ** ((n - 1) / n)


def petty_margin(K: FacetPolytope, rule: SphereRule | None = None) -> float:
    """Petty functional minus ``n omega_n^{1/n} |K|^{(n-1)/n}``; nonnegative for convex K."""
    return petty_functional(K, rule) - petty_rhs(K)


def polar_projection_volume(K: FacetPolytope, rule: SphereRule | None = None) -> float:
    """``|Pi^* K| = omega_n int h(Pi K, u)^{-n} du`` with the normalized measure."""
    n = K.n
    rule = sphere_rule(n) if rule is None else rule
    return unit_ball_volume(n) * _neg_n_mean(projection_area(K, rule.nodes), rule.weights, n)


# ---------------------------------------------------------------------------
# built-in polytopes


def cube(n: int, side: float = 1.0) -> FacetPolytope:
    normals = np.concatenate([np.eye(n), -np.eye(n)])
    areas = np.full(2 * n, side ** (n - 1))
    verts = side * np.array(np.meshgrid(*[[0.0, 1.0]] * n, indexing="ij")).reshape(n, -1).T
    return FacetPolytope(normals, areas, verts, f"cube{n}")


def simplex(n: int) -> FacetPolytope:
    verts = np.vstack([np.zeros(n), np.eye(n)])
    return from_vertices(verts, f"simplex{n}")


def crosspolytope(n: int) -> FacetPolytope:
    verts = np.vstack([np.eye(n), -np.eye(n)])
    return from_vertices(verts, f"crosspolytope{n}")


def regular_ngon(m: int, radius: float = 1.0) -> FacetPolytope:
    """Regular m-gon inscribed in the circle of the given radius."""
    if m < 3:
        raise ValueError("need m >= 3")
    theta = 2 * math.pi * np.arange(m) / m
    verts = radius * np.column_stack([np.cos(theta), np.sin(theta)])
    mid = theta + math.pi / m
    normals = np.column_stack([np.cos(mid), np.sin(mid)])
    areas = np.full(m, 2 * radius * math.sin(math.pi / m))
    return FacetPolytope(normals, areas, verts, f"regular_{m}gon")


def random_hull(k: int, seed: int = 0, n: int = 3) -> FacetPolytope:
    """Convex hull of ``k`` standard Gaussian points."""
    rng = np.random.default_rng(seed)
    return from_vertices(rng.standard_normal((k, n)), f"random_hull(k={k}, seed={seed}, n={n})")


def builtin_polytope(name: str) -> FacetPolytope:
    """Resolve names such as ``square``, ``cube3``, ``simplex3``, ``ngon1024``, ``random_hull:20:7:3``."""
    if name == "square":
        return cube(2)
    if name == "ball":
        return regular_ngon(1024)
    if name.startswith("random_hull"):
        parts = name.split(":")[1:]
        k = int(parts[0]) if parts else 20
        seed = int(parts[1]) if len(parts) > 1 else 0
        n = int(parts[2]) if len(parts) > 2 else 3
        return random_hull(k, seed, n)
    for prefix, fn in (("cube", cube), ("simplex", simplex), ("crosspolytope", crosspolytope), ("ngon", regular_ngon)):
        if name.startswith(prefix) and name[len(prefix) :].isdigit():
            return fn(int(name[len(prefix) :]))
    raise KeyError(f"unknown built-in polytope {name!r}")
