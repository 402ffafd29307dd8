"""Signed-margin checks of the affine Sobolev inequality chain.

Two tolerance regimes are used: ``-1e-3`` relative for quantities that go
through grids and sphere rules, ``-1e-8`` for one-dimensional profile
quantities computed by adaptive quadrature or in closed form.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import stats

from . import profiles as P
from .constants import (
    alpha_constant,
    bmr_constant,
    exponents,
    hsp_constant,
    ip_constant,
    sharp_constant,
    sobolev_conjugate,
    unit_ball_volume,
)
from .fields import SampledField, gradient, lq_norm, schwarz_symmetrization, smooth_rearrangement
from .sphere import SphereRule, energies, sphere_rule

__all__ = [
    "GRID_RTOL",
    "PROFILE_TOL",
    "Link",
    "InequalityReport",
    "SweepCurve",
    "verify_chain",
    "theorem_ratio",
    "sharpness_sweep",
    "prop24_check",
    "hsp_comparison",
    "prop31_check",
    "extremizer_search",
    "ExtremizerResult",
]

GRID_RTOL = 1e-3
PROFILE_TOL = 1e-8


@dataclass
class Link:
    """``larger >= smaller`` with absolute and relative signed margins."""

    larger: str
    smaller: str
    margin: float
    relative_margin: float
    tolerance: float
    verdict: str  # pass | fail | not applicable | degenerate

    @property
    def ok(self) -> bool:
        return self.verdict != "fail"


def _link(values: dict, larger: str, smaller: str, rtol: float, relative: bool = True) -> Link:
    a, b = values[larger], values[smaller]
    if a is None or b is None or math.isinf(b):
        return Link(larger, smaller, math.nan, math.nan, rtol, "not applicable")
    margin = a - b
    size = max(abs(a), abs(b))
    rel = margin / size if size > 0 else 0.0
    if relative:
        ok = rel >= -rtol
    else:
        ok = margin >= -rtol * max(1.0, size)
    return Link(larger, smaller, margin, rel, rtol, "pass" if ok else "fail")


@dataclass
class InequalityReport:
    """Values in chain order, the links between them, and flags."""

    kind: str
    inputs: dict
    values: dict
    links: list[Link]
    flags: dict = field(default_factory=dict)
    degenerate: bool = False

    @property
    def verdict(self) -> str:
        if self.degenerate:
            return "degenerate"
        return "pass" if all(l.ok for l in self.links) else "fail"

    @property
    def passed(self) -> bool:
        return self.verdict != "fail"

    def link(self, larger: str, smaller: str) -> Link:
        for l in self.links:
            if l.larger == larger and l.smaller == smaller:
                return l
        raise KeyError((larger, smaller))

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "inputs": self.inputs,
            "values": self.values,
            "links": [l.__dict__ | {"ok": l.ok} for l in self.links],
            "flags": self.flags,
            "verdict": self.verdict,
        }


# ---------------------------------------------------------------------------
# n-dimensional chain


def _field_input(f: SampledField, p: float, rule: SphereRule) -> dict:
    return {
        "field": f.name,
        "n": f.n,
        "shape": list(f.shape),
        "box": [f.lo.tolist(), f.hi.tolist()],
        "p": p,
        "rule": {"resolution": rule.resolution, "seed": rule.seed, "nodes": int(rule.nodes.shape[0])},
    }


@dataclass
class _ChainParts:
    grad: float
    e: float
    e_plus: float
    e_sym: float
    e_plus_sym: float
    tol: float
    profile: P.Profile
    degenerate: bool


def _chain_parts(f: SampledField, p: float, rule: SphereRule) -> _ChainParts:
    g = gradient(f)
    e, e_plus, grad = energies(f, p, rule, g)
    prof = smooth_rearrangement(f, grad=g)
    if e.degenerate or prof.sup_value == 0:
        return _ChainParts(grad, 0.0, 0.0, 0.0, 0.0, 0.0, prof, True)
    sym = schwarz_symmetrization(f, prof)
    es, eps, _ = energies(sym, p, rule)
    tol = max(e.rule_tolerance, e_plus.rule_tolerance, es.rule_tolerance, eps.rule_tolerance)
    return _ChainParts(grad, e.value, e_plus.value, es.value, eps.value, tol, prof, es.degenerate)


def verify_chain(f: SampledField, p: float, rule: SphereRule | None = None) -> InequalityReport:
    """``||grad f||_p >= E_p(f) >= E_p^+(f) >= E_p(f°) >= K ||f||_{inf,p}``.

    ``E_p(f°)`` is evaluated on the sampled Schwarz symmetrization with the
    same stencil and rule as ``f``, so grid bias cancels in the equality
    cases. ``||f||_{inf,p}`` comes from the smoothed profile of ``f``.
    Extra links: the isoperimetric bound ``n omega_n^{1/n} ||f||_{n/(n-1)}``
    at p = 1 and the older constant ``(n-1) omega_n^{1/n}`` at p = n.
    """
    n = f.n
    rule = sphere_rule(n) if rule is None else rule
    inputs = _field_input(f, p, rule)
    parts = _chain_parts(f, p, rule)
    k = sharp_constant(p, n)
    values: dict = {
        "grad_norm": parts.grad,
        "E_p": parts.e,
        "E_p_plus": parts.e_plus,
        "E_p_sym": parts.e_sym,
    }
    flags: dict = {"rule_tolerance": parts.tol}
    if parts.degenerate:
        values["sharp_times_ainfp"] = 0.0
        names = list(values)
        links = [Link(a, b, 0.0, 0.0, GRID_RTOL, "degenerate") for a, b in zip(names, names[1:])]
        flags["degenerate"] = True
        return InequalityReport("chain", inputs, values, links, flags, degenerate=True)
    ainf = P.ainfp_norm(parts.profile, p, n)
    values["sharp_times_ainfp"] = None if math.isinf(ainf) else k * ainf
    flags["ainfp_norm"] = ainf
    flags["sharp_constant"] = k
    names = list(values)
    links = [_link(values, a, b, GRID_RTOL) for a, b in zip(names, names[1:])]
    values["E_p_plus_sym"] = parts.e_plus_sym
    if p == 1:
        values["isoperimetric_rhs"] = n * unit_ball_volume(n) ** (1 / n) * lq_norm(f, n / (n - 1))
        links.append(_link(values, "E_p_sym", "isoperimetric_rhs", GRID_RTOL))
    elif p < n:
        # the sharp constant for 1 < p < n is not available here: ratio only
        flags["sobolev_ratio_E_sym_over_Lq"] = parts.e_sym / lq_norm(f, sobolev_conjugate(p, n))
    if p == n and values["sharp_times_ainfp"] is not None:
        values["older_constant_times_ainfp"] = bmr_constant(n) * ainf
        links.append(_link(values, "sharp_times_ainfp", "older_constant_times_ainfp", GRID_RTOL))
    return InequalityReport("chain", inputs, values, links, flags)


def prop31_check(f: SampledField, p: float, rule: SphereRule | None = None) -> InequalityReport:
    """``E_p(f°) <= (I_p/I_1) E_p(f)`` and the same for ``E_p^+``.

    The unpenalized margins ``E_p(f) - E_p(f°)`` and ``E_p^+(f) - E_p^+(f°)``
    are reported alongside.
    """
    n = f.n
    rule = sphere_rule(n) if rule is None else rule
    inputs = _field_input(f, p, rule)
    parts = _chain_parts(f, p, rule)
    factor = ip_constant(p, n) / ip_constant(1, n)
    values = {
        "penalty_factor": factor,
        "factor_times_E_p": factor * parts.e,
        "E_p_sym": parts.e_sym,
        "factor_times_E_p_plus": factor * parts.e_plus,
        "E_p_plus_sym": parts.e_plus_sym,
        "E_p": parts.e,
        "E_p_plus": parts.e_plus,
    }
    if parts.degenerate:
        links = [
            Link("factor_times_E_p", "E_p_sym", 0.0, 0.0, GRID_RTOL, "degenerate"),
            Link("factor_times_E_p_plus", "E_p_plus_sym", 0.0, 0.0, GRID_RTOL, "degenerate"),
        ]
        return InequalityReport("prop31", inputs, values, links, {"degenerate": True}, degenerate=True)
    links = [
        _link(values, "factor_times_E_p", "E_p_sym", GRID_RTOL),
        _link(values, "factor_times_E_p_plus", "E_p_plus_sym", GRID_RTOL),
        _link(values, "E_p", "E_p_sym", GRID_RTOL),
        _link(values, "E_p_plus", "E_p_plus_sym", GRID_RTOL),
    ]
    return InequalityReport("prop31", inputs, values, links, {"rule_tolerance": parts.tol})


# ---------------------------------------------------------------------------
# one-dimensional checks


def theorem_ratio(f: P.Profile, p: float, n: int) -> float:
    """``K ||f||_{inf,p} / E_p^+(f°)``; 0 for non-Sobolev or constant profiles, nan if both diverge."""
    energy = P.radial_energy(f, p, n)
    ainf = P.ainfp_norm(f, p, n)
    if math.isinf(energy):
        return math.nan if math.isinf(ainf) else 0.0
    if ainf == 0:
        return 0.0
    if energy == 0:
        return math.nan
    return sharp_constant(p, n) * ainf / energy


@dataclass
class SweepCurve:
    family: str
    p: float
    n: int
    params: list[dict]
    ratios: list[float]
    tolerance: float = PROFILE_TOL

    @property
    def best_ratio(self) -> float:
        return max(self.ratios)

    @property
    def passed(self) -> bool:
        return all(r <= 1 + self.tolerance for r in self.ratios)

    def to_dict(self) -> dict:
        return {
            "kind": "sweep",
            "family": self.family,
            "p": self.p,
            "n": self.n,
            "params": self.params,
            "ratios": self.ratios,
            "best_ratio": self.best_ratio,
            "verdict": "pass" if self.passed else "fail",
        }


SWEEP_FAMILIES = ("power_tail", "log", "one_minus_power")


def _family_member(family: str, p: float, n: int, k: int, base: float) -> tuple[P.Profile, dict]:
    q = sobolev_conjugate(p, n)
    small, large = base ** (-k), base**k
    if family == "power_tail":
        if not p < n:
            raise ValueError("the power family needs p < n")
        return P.power_tail(q, small, large), {"q": q, "eps": small, "T": large}
    if family == "log":
        if p != n:
            raise ValueError("the log family needs p = n")
        return P.log_family(small, large), {"eps": small, "T": large}
    if family == "one_minus_power":
        if not p > n:
            raise ValueError("the one-minus-power family needs p > n")
        return P.one_minus_power(-1 / q, small), {"r": -1 / q, "eps": small}
    raise ValueError(f"unknown sweep family {family!r}; choose from {SWEEP_FAMILIES}")


def default_family(p: float, n: int) -> str:
    return "power_tail" if p < n else ("log" if p == n else "one_minus_power")


def sharpness_sweep(family: str, p: float, n: int, steps: int = 12, base: float = 10.0) -> SweepCurve:
    """Ratios along truncations ``eps = base^{-k}``, ``T = base^k``, ``k = 1..steps``."""
    params, ratios = [], []
    for k in range(1, steps + 1):
        prof, prm = _family_member(family, p, n, k, base)
        params.append(prm)
        ratios.append(theorem_ratio(prof, p, n))
    return SweepCurve(family, p, n, params, ratios)


def _profile_inputs(f: P.Profile, p: float, n: int) -> dict:
    return {"profile": json.loads(f.to_json()), "p": p, "n": n}


def prop24_check(f: P.Profile, p: float, n: int) -> InequalityReport:
    """``sup_t (||f||_inf - f*(t)) t^{1/q} <= alpha_{p,n} ||f||_{inf,p}`` for p > n."""
    if not p > n:
        raise ValueError("prop24_check needs p > n")
    if math.isinf(f.sup_value):
        raise ValueError("prop24_check needs a bounded profile")
    q = sobolev_conjugate(p, n)
    alpha = alpha_constant(p, n)
    ainf = P.ainfp_norm(f, p, n)
    deficit = P.sup_deficit(f, q)
    flags = {"alpha": alpha, "ainfp_norm": ainf}
    values = {"alpha_times_ainfp": alpha * ainf, "sup_deficit": deficit}
    if math.isinf(ainf):
        flags["ainfp_infinite"] = True
        link = Link("alpha_times_ainfp", "sup_deficit", math.inf, 1.0, PROFILE_TOL, "pass")
    else:
        link = _link(values, "alpha_times_ainfp", "sup_deficit", PROFILE_TOL, relative=False)
    return InequalityReport("prop24", _profile_inputs(f, p, n), values, [link], flags)


def hsp_comparison(f: P.Profile, p: float, n: int) -> InequalityReport:
    """Support-dependent bound for p > n and its comparison with the sup deficit.

    ``E_p^+(f°) >= (p'/|q|)^{1/p'} n omega_n^{1/n} ||f||_inf |supp f|^{1/q}``
    and ``||f||_inf |supp f|^{1/q} <= sup_t (||f||_inf - f*(t)) t^{1/q}``.
    """
    if not p > n:
        raise ValueError("hsp_comparison needs p > n")
    supp = f.support_bound
    if math.isinf(supp):
        raise ValueError("hsp_comparison needs a profile with finite support")
    q = exponents(p, n).q
    top = f.sup_value
    size_term = top * supp ** (1 / q) if top > 0 else 0.0
    values = {
        "E_p_plus_sym": P.radial_energy(f, p, n),
        "support_bound_rhs": hsp_constant(p, n) * size_term,
        "sup_deficit": P.sup_deficit(f, q) if top > 0 else 0.0,
        "sup_times_support_power": size_term,
    }
    links = [
        _link(values, "E_p_plus_sym", "support_bound_rhs", PROFILE_TOL, relative=False),
        _link(values, "sup_deficit", "sup_times_support_power", PROFILE_TOL, relative=False),
    ]
    return InequalityReport("hsp", _profile_inputs(f, p, n), values, links, {"hsp_constant": hsp_constant(p, n)})


# ---------------------------------------------------------------------------
# extremizer search


@dataclass
class ExtremizerResult:
    profile: P.Profile
    ratio: float
    knots: np.ndarray
    values: np.ndarray
    evaluations: int
    history: list[float]

    def rank_correlation(self, reference: Callable[[np.ndarray], np.ndarray]) -> float:
        """Spearman correlation with ``reference`` on the interior knots where the profile is positive."""
        t, v = self.knots[1:-1], self.values[1:-1]
        keep = v > 0
        if keep.sum() < 3:
            return math.nan
        return float(stats.spearmanr(v[keep], reference(t[keep])).statistic)


_INV_PHI = (math.sqrt(5) - 1) / 2


class _Budget(Exception):
    pass


def _project(v: np.ndarray) -> np.ndarray:
    """Monotone repair: sort descending, clip to ``[0, 1]``, pin the ends."""
    w = np.clip(np.sort(v)[::-1], 0.0, 1.0)
    w[0] = 1.0
    w[-1] = 0.0
    return w


def extremizer_search(
    p: float,
    n: int,
    knots: int = 16,
    budget: int = 2000,
    seed: int = 0,
    span: float = 1e6,
    restarts: int = 3,
    golden_steps: int = 10,
) -> ExtremizerResult:
    """Maximize :func:`theorem_ratio` over profiles linear in ``log t``.

    Knots are log-spaced on ``[1/span, span]``; values are normalized to
    start at 1 and end at 0. Each sweep runs a golden-section line search on
    every interior knot inside its monotone bracket; proposals are repaired
    by sort-and-clip. The first start is the cone profile sampled at the
    knots, the others are random monotone profiles drawn from ``seed``.
    """
    if knots < 4:
        raise ValueError("need at least 4 knots")
    if budget < 0:
        raise ValueError("budget must be >= 0")
    t = np.geomspace(1 / span, span, knots)
    cone_v = np.clip(1 - (t / unit_ball_volume(n)) ** (1 / n), 0, None)
    cone_v = _project(cone_v / cone_v[0])
    rng = np.random.default_rng(seed)
    history: list[float] = []
    used = 0

    def objective(v: np.ndarray) -> float:
        nonlocal used
        if used >= budget:
            raise _Budget
        used += 1
        r = theorem_ratio(P.log_linear(t, v), p, n)
        r = 0.0 if math.isnan(r) else r
        history.append(r)
        return r

    best_v = cone_v
    best_r = theorem_ratio(P.log_linear(t, cone_v), p, n)
    starts = [cone_v] + [
        _project(np.concatenate([[1.0], np.sort(rng.uniform(0, 1, knots - 2))[::-1], [0.0]]))
        for _ in range(restarts - 1)
    ]
    per_start = budget // max(1, len(starts))
    try:
        for i, v0 in enumerate(starts):
            limit = budget if i == len(starts) - 1 else min(budget, used + per_start)
            v = v0.copy()
            cur = objective(v)
            if cur > best_r:
                best_v, best_r = v.copy(), cur
            while used < limit:
                before = cur
                for j in range(1, knots - 1):
                    lo, hi = v[j + 1], v[j - 1]
                    if hi - lo <= 1e-14:
                        continue

                    def at(x):
                        w = v.copy()
                        w[j] = x
                        return objective(_project(w))

                    a, b = lo, hi
                    c, d = b - _INV_PHI * (b - a), a + _INV_PHI * (b - a)
                    fc, fd = at(c), at(d)
                    for _ in range(golden_steps):
                        if fc >= fd:
                            b, d, fd = d, c, fc
                            c = b - _INV_PHI * (b - a)
                            fc = at(c)
                        else:
                            a, c, fc = c, d, fd
                            d = a + _INV_PHI * (b - a)
                            fd = at(d)
                    x, fx = (c, fc) if fc >= fd else (d, fd)
                    if fx > cur:
                        v = _project(np.where(np.arange(knots) == j, x, v))
                        cur = fx
                        if cur > best_r:
                            best_v, best_r = v.copy(), cur
                    if used >= limit:
                        break
                if cur - before <= 1e-12:
                    break
    except _Budget:
        pass
    prof = P.log_linear(t, best_v)
    return ExtremizerResult(prof, best_r, t, best_v, used, history)
