"""Functions sampled on uniform cell-centred grids in R^n, 2 <= n <= 4.

Every integral here is a midpoint sum over cells. Gradients use the
fourth-order central stencil in the interior (second order next to the box
edge), which keeps grid bias well under the 1e-3 relative margins the
inequality checks run at.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Callable

import numpy as np
from scipy import ndimage, special

from .constants import unit_ball_volume
from .profiles import LinearBlock, PowerSegment, Profile, zero_profile

__all__ = [
    "SampledField",
    "sample",
    "DEFAULT_CELLS",
    "named_field",
    "FIELD_NAMES",
    "lq_norm",
    "gradient",
    "grad_lp_norm",
    "dir_deriv_norm",
    "decreasing_rearrangement",
    "smooth_rearrangement",
    "level_measure",
    "schwarz_symmetrization",
    "affine_image",
    "save_field",
    "load_field",
]

DEFAULT_CELLS = {2: 257, 3: 97, 4: 49}
PAD_CELLS = 3


@dataclass(frozen=True, eq=False)
class SampledField:
    """Values at the centres of a ``shape`` grid of cells covering ``[lo, hi]``."""

    values: np.ndarray
    lo: np.ndarray
    hi: np.ndarray
    name: str = ""

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        lo = np.asarray(self.lo, dtype=float).reshape(-1)
        hi = np.asarray(self.hi, dtype=float).reshape(-1)
        if v.ndim < 2 or v.ndim > 4:
            raise ValueError("fields are supported for 2 <= n <= 4")
        if lo.shape != (v.ndim,) or hi.shape != (v.ndim,) or np.any(hi <= lo):
            raise ValueError("box must have one positive-width interval per axis")
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @property
    def n(self) -> int:
        return self.values.ndim

    @property
    def shape(self) -> tuple[int, ...]:
        return self.values.shape

    @property
    def spacing(self) -> np.ndarray:
        return (self.hi - self.lo) / np.array(self.shape)

    @property
    def cell_volume(self) -> float:
        return float(np.prod(self.spacing))

    def axes(self) -> list[np.ndarray]:
        return [self.lo[i] + (np.arange(m) + 0.5) * self.spacing[i] for i, m in enumerate(self.shape)]

    def points(self) -> list[np.ndarray]:
        return np.meshgrid(*self.axes(), indexing="ij")

    def boundary_max(self) -> float:
        """Largest ``|value|`` in the outermost cell layer."""
        v = np.abs(self.values)
        out = 0.0
        for ax in range(self.n):
            out = max(out, float(np.take(v, 0, axis=ax).max()), float(np.take(v, -1, axis=ax).max()))
        return out

    def scaled(self, c: float) -> "SampledField":
        return SampledField(c * self.values, self.lo, self.hi, self.name)


def sample(
    func: Callable, lo, hi, shape, name: str = "", pad: int = PAD_CELLS
) -> SampledField:
    """Sample ``func(*coords)`` on a grid whose outer ``pad`` cells surround ``[lo, hi]``."""
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    shape = tuple(int(s) for s in np.broadcast_to(shape, lo.shape))
    h = (hi - lo) / (np.array(shape) - 2 * pad)
    blo, bhi = lo - pad * h, hi + pad * h
    axes = [blo[i] + (np.arange(m) + 0.5) * h[i] for i, m in enumerate(shape)]
    pts = np.meshgrid(*axes, indexing="ij")
    return SampledField(np.asarray(func(*pts), dtype=float), blo, bhi, name)


# ---------------------------------------------------------------------------
# named test fields


def _r2(xs, center=None):
    if center is None:
        return sum(x * x for x in xs)
    return sum((x - c) ** 2 for x, c in zip(xs, center))


def _shear(n: int, theta: float) -> np.ndarray:
    a = np.eye(n)
    a[0, 1] = theta
    return a


def _pull_back(xs, a):
    """Coordinates ``A^{-1} x`` for a list of coordinate arrays."""
    inv = np.linalg.inv(a)
    return [sum(inv[i, j] * xs[j] for j in range(len(xs))) for i in range(len(xs))]


def _affine_bbox(a, radius, center=None):
    """Bounding box of ``A(ball(center, radius))``."""
    a = np.asarray(a, dtype=float)
    c = np.zeros(a.shape[0]) if center is None else np.asarray(center, dtype=float)
    half = radius * np.sqrt((a * a).sum(axis=1))
    mid = a @ c
    return mid - half, mid + half


_GAUSS_R = 6.0  # exp(-36) ~ 2e-16


def _gaussian(n, cells, a=None):
    a = np.eye(n) if a is None else a
    lo, hi = _affine_bbox(a, _GAUSS_R)
    return sample(lambda *xs: np.exp(-_r2(_pull_back(xs, a))), lo, hi, cells)


def _bump(n, cells, center=None, a=None):
    a = np.eye(n) if a is None else a
    c = np.zeros(n) if center is None else np.asarray(center, dtype=float)
    lo, hi = _affine_bbox(a, 1.0, c)
    ac = a @ c

    def fn(*xs):
        y = _pull_back([x - m for x, m in zip(xs, ac)], a)
        return np.clip(1 - _r2(y), 0, None) ** 3

    return sample(fn, lo, hi, cells)


def _cone(n, cells, center=None):
    c = np.zeros(n) if center is None else np.asarray(center, dtype=float)
    return sample(lambda *xs: np.clip(1 - np.sqrt(_r2(xs, c)), 0, None), c - 1, c + 1, cells)


def _two_bumps_fn(n):
    c1 = np.zeros(n)
    c1[0] = -1.6
    c2 = np.zeros(n)
    c2[0] = 1.8

    def fn(*xs):
        return np.exp(-_r2(xs, c1) / 0.64) + 0.6 * np.exp(-_r2(xs, c2) * 1.5)

    return fn


def _two_bumps(n, cells, a=None):
    a = np.eye(n) if a is None else a
    fn = _two_bumps_fn(n)
    corners = np.array(np.meshgrid(*([[-1.6 - 5.0, 1.8 + 5.0]] + [[-5.0, 5.0]] * (n - 1)), indexing="ij"))
    corners = corners.reshape(n, -1)
    img = a @ corners
    return sample(lambda *xs: fn(*_pull_back(xs, a)), img.min(axis=1), img.max(axis=1), cells)


def _ring(n, cells):
    # radial but not radially decreasing: r^2 exp(-r^2)
    return sample(lambda *xs: _r2(xs) * np.exp(-_r2(xs)), [-6.5] * n, [6.5] * n, cells)


def _lopsided(n, cells):
    return sample(
        lambda *xs: np.exp(-_r2(xs)) * (1 + 0.6 * np.sin(1.3 * xs[0] + 0.4 * xs[1])),
        [-_GAUSS_R] * n,
        [_GAUSS_R] * n,
        cells,
    )


_BUILDERS: dict[str, Callable] = {
    "gaussian": lambda n, c, **k: _gaussian(n, c),
    "cone": lambda n, c, **k: _cone(n, c),
    "bump": lambda n, c, **k: _bump(n, c),
    "two_bumps": lambda n, c, **k: _two_bumps(n, c),
    "ring": lambda n, c, **k: _ring(n, c),
    "lopsided": lambda n, c, **k: _lopsided(n, c),
    "sheared_gaussian": lambda n, c, theta=1.0, **k: _gaussian(n, c, _shear(n, theta)),
    "sheared_two_bumps": lambda n, c, theta=0.5, **k: _two_bumps(n, c, _shear(n, theta)),
    "sheared_bump": lambda n, c, theta=1.0, **k: _bump(n, c, a=_shear(n, theta)),
    "translated_bump": lambda n, c, **k: _bump(n, c, center=np.r_[0.7, -0.4, [0.2] * (n - 2)]),
    "translated_cone": lambda n, c, **k: _cone(n, c, center=np.r_[0.3, -0.2, [0.1] * (n - 2)]),
}
FIELD_NAMES = tuple(sorted(_BUILDERS))


def named_field(name: str, n: int = 2, cells: int | None = None, **params) -> SampledField:
    """Built-in test fields, e.g. ``named_field("sheared_gaussian", theta=0.5)``.

    A trailing dimension in the name is accepted: ``"cone2d"``, ``"gaussian3"``.
    """
    base = name
    for suffix in ("2d", "3d", "4d", "2", "3", "4"):
        if name.endswith(suffix) and name[: -len(suffix)] in _BUILDERS:
            base = name[: -len(suffix)]
            n = int(suffix[0])
            break
    if base not in _BUILDERS:
        raise KeyError(f"unknown field {name!r}; known: {', '.join(FIELD_NAMES)}")
    if n not in DEFAULT_CELLS:
        raise ValueError("fields are supported for 2 <= n <= 4")
    cells = DEFAULT_CELLS[n] if cells is None else cells
    f = _BUILDERS[base](n, cells, **params)
    label = base if not params else f"{base}({', '.join(f'{k}={v}' for k, v in sorted(params.items()))})"
    return SampledField(f.values, f.lo, f.hi, f"{label}[n={n}]")


# ---------------------------------------------------------------------------
# norms and derivatives


def lq_norm(f: SampledField, q: float) -> float:
    """Midpoint-rule ``(int |f|^q)^{1/q}``."""
    if not q >= 1 or math.isinf(q):
        raise ValueError("q must be finite and >= 1")
    return float((np.sum(np.abs(f.values) ** q) * f.cell_volume) ** (1 / q))


def _diff_axis(v: np.ndarray, h: float, ax: int) -> np.ndarray:
    m = v.shape[ax]
    out = np.empty_like(v)

    def sl(a, b=None):
        idx = [slice(None)] * v.ndim
        idx[ax] = slice(a, b)
        return tuple(idx)

    if m >= 5:
        out[sl(2, m - 2)] = (
            -v[sl(4, None)] + 8 * v[sl(3, m - 1)] - 8 * v[sl(1, m - 3)] + v[sl(0, m - 4)]
        ) / (12 * h)
        for i in (1, m - 2):
            out[sl(i, i + 1)] = (v[sl(i + 1, i + 2)] - v[sl(i - 1, i)]) / (2 * h)
    else:
        out[sl(1, m - 1)] = (v[sl(2, None)] - v[sl(0, m - 2)]) / (2 * h)
    out[sl(0, 1)] = (-3 * v[sl(0, 1)] + 4 * v[sl(1, 2)] - v[sl(2, 3)]) / (2 * h)
    out[sl(m - 1, m)] = (3 * v[sl(m - 1, m)] - 4 * v[sl(m - 2, m - 1)] + v[sl(m - 3, m - 2)]) / (2 * h)
    return out


def gradient(f: SampledField) -> np.ndarray:
    """Finite-difference gradient, shape ``f.shape + (n,)``."""
    if min(f.shape) < 3:
        raise ValueError("need at least 3 cells per axis")
    return np.stack([_diff_axis(f.values, float(f.spacing[ax]), ax) for ax in range(f.n)], axis=-1)


def grad_lp_norm(f: SampledField, p: float, grad: np.ndarray | None = None) -> float:
    """``||grad f||_p`` with the Euclidean norm of the gradient."""
    if not p >= 1:
        raise ValueError("p must be >= 1")
    g = gradient(f) if grad is None else grad
    mag = np.sqrt(np.sum(g * g, axis=-1))
    return float((np.sum(mag**p) * f.cell_volume) ** (1 / p))


def dir_deriv_norm(
    f: SampledField, u, p: float, positive_part: bool = False, grad: np.ndarray | None = None
) -> float:
    """``||D_u f||_p`` or, with ``positive_part``, ``||max(D_u f, 0)||_p``."""
    u = np.asarray(u, dtype=float)
    if u.shape != (f.n,) or abs(np.linalg.norm(u) - 1) > 1e-12:
        raise ValueError("u must be a unit vector of the field's dimension")
    g = gradient(f) if grad is None else grad
    d = g @ u
    if positive_part:
        d = np.maximum(d, 0.0)
    return float((np.sum(np.abs(d) ** p) * f.cell_volume) ** (1 / p))


# ---------------------------------------------------------------------------
# rearrangements


def decreasing_rearrangement(f: SampledField) -> Profile:
    """Staircase ``f*`` from the sorted cell values of ``|f|``.

    Equal values merge into one step, so the result depends only on the
    multiset of values.
    """
    v = np.abs(f.values).ravel()
    v = v[v > 0]
    if v.size == 0:
        return zero_profile()
    vals, counts = np.unique(v, return_counts=True)
    vals, counts = vals[::-1], counts[::-1]
    t = np.concatenate([[0.0], np.cumsum(counts) * f.cell_volume])
    block = LinearBlock(t, vals, vals)
    return Profile((block,), {"rearrangement_of": f.name})


def _k6_cdf(z: np.ndarray) -> np.ndarray:
    # CDF of the sixth-order Gaussian kernel (15 - 10 z^2 + z^4)/8 phi(z)
    return special.ndtr(z) + np.exp(-0.5 * z * z) * (7 * z - z**3) / (8 * math.sqrt(2 * math.pi))


_K6_CUT = 9.0


def level_measure(
    f: SampledField,
    levels: np.ndarray,
    width: float = 0.7,
    grad: np.ndarray | None = None,
    chunk: int = 4_000_000,
) -> np.ndarray:
    """Smoothed ``|{|f| > lam}|`` for each level.

    Each cell's indicator is replaced by a sixth-order smooth step in value
    whose width is ``width * h * |grad f|``, i.e. a smoothing of about
    ``width`` cells in physical distance. That removes the lattice-count
    noise of plain cell counting while keeping the bias at high order.
    """
    levels = np.asarray(levels, dtype=float)
    v = np.abs(f.values).ravel()
    g = gradient(f) if grad is None else grad
    gm = np.sqrt(np.sum(g * g, axis=-1)).ravel()
    h = float(np.exp(np.mean(np.log(f.spacing))))
    keep = v > 0
    v, eps = v[keep], np.maximum(width * h * gm[keep], 1e-300)
    lower, upper = v - _K6_CUT * eps, v + _K6_CUT * eps

    order = np.argsort(levels)
    lev = levels[order]
    # cells whose whole smoothing window lies above the level count fully
    full = v.size - np.searchsorted(np.sort(lower), lev, side="right")
    k0 = np.searchsorted(lev, lower, side="left")
    k1 = np.searchsorted(lev, upper, side="right")
    counts = k1 - k0
    partial = np.zeros(lev.size)
    cells = np.nonzero(counts > 0)[0]
    start = 0
    while start < cells.size:
        # chunk so that the expanded (cell, level) pairs stay bounded
        cum = np.cumsum(counts[cells[start:]])
        stop = start + max(1, int(np.searchsorted(cum, chunk, side="right")))
        idx = cells[start:stop]
        c = counts[idx]
        rep = np.repeat(idx, c)
        off = np.arange(rep.size) - np.repeat(np.cumsum(c) - c, c)
        li = k0[rep] + off
        z = (v[rep] - lev[li]) / eps[rep]
        val = _k6_cdf(z)
        # pairs whose window lies entirely above were already counted as full
        above = lower[rep] > lev[li]
        val[above] = 0.0
        partial += np.bincount(li, weights=val, minlength=lev.size)
        start = stop
    m = (full + partial) * f.cell_volume
    out = np.empty_like(m)
    out[order] = m
    return out


def _default_levels(top: float, count: int) -> np.ndarray:
    uniform = np.linspace(0.0, top, count + 1)[1:-1]
    near_zero = top * np.geomspace(1e-12, 1.0 / count, 48)[:-1]
    near_top = top * (1 - np.geomspace(1e-6, 1.0 / count, 24)[:-1])
    return np.unique(np.concatenate([near_zero, uniform, near_top]))


def smooth_rearrangement(
    f: SampledField, levels: int = 400, width: float = 0.7, grad: np.ndarray | None = None
) -> Profile:
    """Continuous piecewise-linear ``f*`` through smoothed level-set measures.

    Knots are ``(|{|f| > lam}|, lam)`` at ``levels`` uniformly spaced values
    plus geometric refinements toward 0 and toward ``max |f|``. Monotonicity
    is enforced by a running maximum in ``t``.
    """
    top = float(np.max(np.abs(f.values)))
    if top == 0:
        return zero_profile()
    lam = _default_levels(top, levels)[::-1]  # decreasing values
    m = level_measure(f, lam, width=width, grad=grad)
    t = np.maximum.accumulate(np.concatenate([[0.0], m]))
    v = np.concatenate([[top], lam])
    keep = np.concatenate([[True], np.diff(t) > 0])
    t, v = t[keep], v[keep]
    # close the profile at the measure of the smoothed support
    if v[-1] > 0:
        t_end = t[-1] * (1 + 1e-9) + 1e-300
        t, v = np.append(t, t_end), np.append(v, 0.0)
    block = LinearBlock(t, v[:-1], v[1:])
    return Profile((block,), {"smooth_rearrangement_of": f.name})


def schwarz_symmetrization(f: SampledField, profile: Profile | None = None, cells: int | None = None) -> SampledField:
    """``f°(x) = f*(omega_n |x|^n)`` on a centred cube with the input's finest spacing.

    ``f*`` defaults to :func:`smooth_rearrangement`, i.e. monotone linear
    interpolation of the level-set measures.
    """
    prof = smooth_rearrangement(f) if profile is None else profile
    n = f.n
    om = unit_ball_volume(n)
    top = float(np.max(np.abs(f.values)))
    supp = _effective_support(prof, top)
    radius = (supp / om) ** (1 / n)
    h = float(np.min(f.spacing))
    m = int(np.ceil(2 * radius / h)) + 2 * PAD_CELLS if cells is None else cells
    m = max(m, 2 * PAD_CELLS + 3)
    half = 0.5 * m * h
    axes = [(np.arange(m) + 0.5) * h - half] * n
    pts = np.meshgrid(*axes, indexing="ij")
    r2 = sum(x * x for x in pts)
    vals = prof(om * r2 ** (n / 2))
    name = f"schwarz({f.name})" if f.name else "schwarz"
    return SampledField(vals, [-half] * n, [half] * n, name)


def _effective_support(prof: Profile, top: float) -> float:
    b = prof.support_bound
    if math.isfinite(b):
        # ignore a far tail below 1e-13 of the maximum
        grid = np.linspace(0, b, 20001)
        vals = prof(grid)
        above = np.nonzero(vals > 1e-13 * top)[0]
        return float(grid[min(above[-1] + 1, grid.size - 1)]) if above.size else b
    return 1.0


def affine_image(f: SampledField, a, x0=None, cells=None) -> SampledField:
    """``g(x) = f(A^{-1}(x - x0))`` by multilinear interpolation.

    The output box is the bounding box of the image of the input's support
    box, padded by three cells; the cell count per axis is kept unless
    ``cells`` is given.
    """
    a = np.asarray(a, dtype=float)
    n = f.n
    if a.shape != (n, n):
        raise ValueError("A must be n x n")
    if abs(np.linalg.det(a)) < 1e-12 * max(1.0, float(np.abs(a).max())) ** n:
        raise ValueError("A is singular")
    x0 = np.zeros(n) if x0 is None else np.asarray(x0, dtype=float)
    h = f.spacing
    slo, shi = f.lo + PAD_CELLS * h, f.hi - PAD_CELLS * h
    corners = np.array(np.meshgrid(*[[slo[i], shi[i]] for i in range(n)], indexing="ij")).reshape(n, -1)
    img = a @ corners + x0[:, None]
    shape = f.shape if cells is None else tuple(np.broadcast_to(cells, (n,)))
    inv = np.linalg.inv(a)

    def fn(*xs):
        ys = [sum(inv[i, j] * (xs[j] - x0[j]) for j in range(n)) for i in range(n)]
        idx = [(ys[i] - f.lo[i]) / h[i] - 0.5 for i in range(n)]
        return ndimage.map_coordinates(f.values, idx, order=1, mode="constant", cval=0.0)

    g = sample(fn, img.min(axis=1), img.max(axis=1), shape)
    return SampledField(g.values, g.lo, g.hi, f"affine({f.name})")


# ---------------------------------------------------------------------------
# I/O


def save_field(f: SampledField, path) -> None:
    """Flat little-endian float64 values plus a ``.json`` sidecar ``{n, box, shape}``."""
    path = Path(path)
    np.ascontiguousarray(f.values, dtype="<f8").tofile(path)
    meta = {"n": f.n, "box": [f.lo.tolist(), f.hi.tolist()], "shape": list(f.shape), "name": f.name}
    path.with_suffix(path.suffix + ".json").write_text(json.dumps(meta, indent=1))


def load_field(path) -> SampledField:
    path = Path(path)
    sidecar = path.with_suffix(path.suffix + ".json")
    meta = json.loads(sidecar.read_text())
    shape = tuple(meta["shape"])
    if len(shape) != meta["n"]:
        raise ValueError("sidecar shape does not match n")
    data = np.fromfile(path, dtype="<f8")
    if data.size != int(np.prod(shape)):
        raise ValueError(f"{path} holds {data.size} values, sidecar expects {int(np.prod(shape))}")
    lo, hi = meta["box"]
    return SampledField(data.reshape(shape), lo, hi, meta.get("name", path.stem))
