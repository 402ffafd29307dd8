"""The acceptance suite: eleven numerical checks with fixed tolerances.

Each ``criterion_k`` returns a :class:`CriterionResult` whose ``details``
hold every number that went into the verdict. ``run_all`` runs them in
order and optionally writes one JSON report per criterion.
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, TextIO

import numpy as np
from scipy import integrate

from . import constants as C
from . import convexgeom as G
from . import fields as F
from . import inequalities as I
from . import profiles as P
from . import sphere as S

# ten fields for the chain and penalty-factor suites
CHAIN_SUITE = (
    ("gaussian", 2, {}),
    ("cone", 2, {}),
    ("two_bumps", 2, {}),
    ("ring", 2, {}),
    ("lopsided", 2, {}),
    ("sheared_gaussian", 2, {"theta": 1.0}),
    ("sheared_two_bumps", 2, {"theta": 0.5}),
    ("translated_cone", 2, {}),
    ("gaussian", 3, {}),
    ("two_bumps", 3, {}),
)
RADIAL_FIELDS = ("gaussian", "cone")


@dataclass
class CriterionResult:
    key: str
    title: str
    passed: bool
    seconds: float
    details: dict = field(default_factory=dict)

    def line(self) -> str:
        return f"[{'PASS' if self.passed else 'FAIL'}] criterion {self.key}: {self.title} ({self.seconds:.1f} s)"


def _timed(key: str, title: str, body: Callable[[], tuple[bool, dict]]) -> CriterionResult:
    t0 = time.perf_counter()
    ok, details = body()
    return CriterionResult(key, title, bool(ok), time.perf_counter() - t0, details)


def suite_fields():
    for name, n, params in CHAIN_SUITE:
        yield F.named_field(name, n, **params)


# ---------------------------------------------------------------------------
# random instances


def random_profile(rng: np.random.Generator, jumps: bool = True, tail: bool = True) -> P.Profile:
    """Random bounded nonincreasing profile.

    Piecewise linear on log-uniform knots, optionally with jumps, and
    either compactly supported or followed by a positive constant floor
    (when ``tail``).
    """
    k = int(rng.integers(2, 9))
    t = np.sort(10 ** rng.uniform(-3, 3, k))
    t = np.concatenate([[0.0], t]) if rng.random() < 0.5 else t
    v = np.sort(rng.uniform(0, 1, t.size))[::-1] * 10 ** rng.uniform(-1, 1)
    knots = [[float(a), float(b)] for a, b in zip(t, v)]
    if jumps and rng.random() < 0.5:
        i = int(rng.integers(0, len(knots)))
        knots.insert(i + 1, [knots[i][0], knots[i][1] * rng.uniform(0, 1)])
        # keep values nonincreasing after the inserted drop
        for j in range(i + 2, len(knots)):
            knots[j][1] = min(knots[j][1], knots[j - 1][1])
    knots.append([knots[-1][0] * (1 + rng.uniform(0.1, 10)), 0.0])
    prof = P.piecewise_linear(knots)
    if tail and rng.random() < 0.3:
        floor = float(rng.uniform(0, 0.5)) * prof.sup_value
        knots = [[a, max(b, floor)] for a, b in knots[:-1]]
        return P.Profile(
            P.piecewise_linear(knots).segments
            + (P.PowerSegment(knots[-1][0], math.inf, knots[-1][1], 0.0, 1.0),),
            {"piecewise_linear_with_floor": knots},
        )
    return prof


def random_lipschitz_profile(rng: np.random.Generator) -> P.Profile:
    """Random continuous profile: piecewise linear in ``t`` or in ``log t``."""
    k = int(rng.integers(3, 10))
    t = np.sort(10 ** rng.uniform(-4, 4, k))
    v = np.concatenate([np.sort(rng.uniform(0, 1, k - 1))[::-1], [0.0]])
    v[0] = max(v[0], 1e-3)
    if rng.random() < 0.5:
        return P.log_linear(t, v)
    return P.piecewise_linear([[0.0, float(v[0])]] + [[float(a), float(b)] for a, b in zip(t[1:], v[1:])])


def random_steps(rng: np.random.Generator) -> P.SampledFunction:
    k = int(rng.integers(1, 8))
    edges = np.concatenate([[0.0], np.cumsum(10 ** rng.uniform(-2, 1, k))])
    heights = rng.uniform(0, 3, k) * (rng.random(k) < 0.85)
    if rng.random() < 0.5:
        heights[0] = 0.0
    return P.SampledFunction.steps(edges, heights)


# ---------------------------------------------------------------------------
# oracles


def gaussian_radial_energy(p: float, n: int) -> float:
    """``||grad f°||_p`` for ``f* = exp(-(t/omega_n)^{2/n})`` by 1-D quadrature in ``t``."""
    om = C.unit_ball_volume(n)

    def integrand(s):
        x = (s / om) ** (2 / n)
        deriv = math.exp(-x) * (2 / n) * x / s
        return s ** ((n - 1) * p / n) * deriv**p

    val = sum(
        integrate.quad(integrand, a, b, epsabs=0, epsrel=1e-12, limit=200)[0]
        for a, b in ((0, om), (om, 10 * om), (10 * om, 200 * om))
    )
    return n * om ** (1 / n) * val ** (1 / p)


def cone_ratio_by_quadrature() -> float:
    """Theorem ratio of the n = 2 cone, p = 2, straight from the definitions."""
    om = math.pi

    def fstar(t):
        return max(0.0, 1 - math.sqrt(t / om))

    def fss(t):
        tt = min(t, om)
        mass = tt - (2 / 3) * tt**1.5 / math.sqrt(om)
        return mass / t

    osc = integrate.quad(lambda t: (fss(t) - fstar(t)) ** 2 / t, 0, om, epsabs=0, epsrel=1e-12, limit=200)[0]
    osc += integrate.quad(lambda t: (fss(t)) ** 2 / t, om, np.inf, epsabs=0, epsrel=1e-12, limit=200)[0]
    # radial side: |f*'|^2 s = 1/(4 om)
    radial = 2 * math.sqrt(om) * math.sqrt(integrate.quad(lambda s: s / (4 * om * s), 0, om)[0])
    return C.sharp_constant(2, 2) * math.sqrt(osc) / radial


# ---------------------------------------------------------------------------
# criteria


def criterion_1() -> CriterionResult:
    def body():
        cases, ok = [], True
        for name in RADIAL_FIELDS:
            for n in (2, 3):
                f = F.named_field(name, n)
                g = F.gradient(f)
                rule = S.sphere_rule(n)
                for p in sorted({1, 2, n}):
                    t0 = time.perf_counter()
                    e = S.energy(f, p, rule, grad=g).value
                    ref = P.radial_energy(P.cone(n), p, n) if name == "cone" else gaussian_radial_energy(p, n)
                    rel = abs(e - ref) / ref
                    secs = time.perf_counter() - t0
                    good = rel <= 1e-2 and secs <= 30
                    ok &= good
                    cases.append({"field": name, "n": n, "p": p, "E_p": e, "radial_oracle": ref, "rel_err": rel, "seconds": secs, "ok": good})
        return ok, {"cases": cases}

    return _timed("1", "normalization identity E_p(f) = ||grad f°||_p on radial fields", body)


def criterion_2(fields=None) -> CriterionResult:
    def body():
        t0 = time.perf_counter()
        reports, ok = [], True
        for f in fields or suite_fields():
            rule = S.sphere_rule(f.n)
            for p in sorted({1, 2, f.n, f.n + 1}):
                rep = I.verify_chain(f, p, rule)
                worst = min((l.relative_margin for l in rep.links if l.verdict == "pass" or l.verdict == "fail"), default=0.0)
                ok &= rep.passed
                reports.append({"field": f.name, "p": p, "verdict": rep.verdict, "worst_relative_margin": worst, "report": rep.to_dict()})
        secs = time.perf_counter() - t0
        return ok and secs <= 600, {"reports": reports, "seconds": secs}

    return _timed("2", "inequality chain on the ten-field suite", body)


def criterion_3() -> CriterionResult:
    def body():
        t0 = time.perf_counter()
        curves = [I.sharpness_sweep(fam, p, n, 12) for fam, p, n in (("power_tail", 1, 2), ("log", 2, 2), ("one_minus_power", 3, 2))]
        ok = all(c.best_ratio >= 0.95 and max(c.ratios) <= 1 + 1e-8 for c in curves)
        secs = time.perf_counter() - t0
        return ok and secs <= 120, {"curves": [c.to_dict() for c in curves], "seconds": secs}

    return _timed("3", "sharp-constant approach in all three regimes", body)


def criterion_4() -> CriterionResult:
    def body():
        r = I.theorem_ratio(P.cone(2), 2, 2)
        quad = cone_ratio_by_quadrature()
        exact = math.sqrt(2 / 3)
        ok = abs(r - exact) <= 1e-6 and abs(quad - exact) <= 1e-6
        return ok, {"ratio": r, "quadrature": quad, "exact": exact}

    return _timed("4", "cone theorem ratio equals sqrt(2/3)", body)


def criterion_5() -> CriterionResult:
    def body():
        rep = I.hsp_comparison(P.one_minus_power(0.25), 3, 2)
        lhs, rhs = rep.values["E_p_plus_sym"], rep.values["support_bound_rhs"]
        exact = 2 * math.sqrt(math.pi) / 16 ** (1 / 3)
        ok = abs(lhs - rhs) <= 1e-6 and abs(lhs - exact) <= 1e-6 and rep.passed
        return ok, {"E_p_plus_sym": lhs, "rhs": rhs, "closed_form": exact, "report": rep.to_dict()}

    return _timed("5", "equality in the support-dependent bound", body)


def criterion_6(count: int = 1000, seed: int = 6) -> CriterionResult:
    def body():
        rng = np.random.default_rng(seed)
        worst, fails = math.inf, []
        for i in range(count):
            p, n = ((3, 2), (4, 3))[i % 2]
            f = random_profile(rng)
            rep = I.prop24_check(f, p, n)
            m = rep.links[0].margin
            worst = min(worst, m)
            if not m >= -1e-8:
                fails.append({"profile": f.to_json(), "p": p, "n": n, "margin": m})
        rep = I.prop24_check(P.piecewise_linear([[0, 1], [1, 0]]), 3, 2)
        alpha_closed = C.alpha_constant(3, 2) * (3 / 35) ** (1 / 3)
        exact_ok = abs(rep.values["sup_deficit"] - 1) <= 1e-6 and abs(rep.values["alpha_times_ainfp"] - alpha_closed) <= 1e-6
        return not fails and exact_ok, {
            "count": count,
            "worst_margin": worst,
            "failures": fails[:10],
            "exact_case": rep.to_dict(),
            "alpha_times_ainfp_closed_form": alpha_closed,
        }

    return _timed("6", "support-free sup bound for p > n", body)


def criterion_7() -> CriterionResult:
    def body():
        t0 = time.perf_counter()
        ball = G.petty_margin(G.regular_ngon(1024))
        square = G.petty_margin(G.cube(2))
        square_exact = math.pi**1.5 / math.sqrt(2) - 2 * math.sqrt(math.pi)
        hulls = {}
        for n in (2, 3):
            rule = S.sphere_rule(n)
            hulls[n] = [G.petty_margin(G.random_hull(int(k), seed, n), rule) for seed, k in zip(range(50), np.resize([8, 12, 20, 40, 80], 50))]
        ok = abs(ball) <= 1e-3 and abs(square - square_exact) <= 1e-3 and all(min(v) >= -1e-3 for v in hulls.values())
        secs = time.perf_counter() - t0
        return ok and secs <= 120, {
            "ball_margin": ball,
            "square_margin": square,
            "square_closed_form": square_exact,
            "min_hull_margin": {str(n): min(v) for n, v in hulls.items()},
            "seconds": secs,
        }

    return _timed("7", "Petty projection inequality for polytopes", body)


def criterion_8(fields=None) -> CriterionResult:
    def body():
        rows, ok = [], True
        for f in fields or suite_fields():
            rule = S.sphere_rule(f.n)
            radial = f.name.split("[")[0] in RADIAL_FIELDS
            for p in (1, 2, 4):
                rep = I.prop31_check(f, p, rule)
                row = {"field": f.name, "p": p, "verdict": rep.verdict}
                good = all(rep.links[i].ok for i in (0, 1))
                if radial:
                    expected = (rep.values["penalty_factor"] - 1) * rep.values["E_p"]
                    got = rep.links[0].margin
                    dev = abs(got - expected) / rep.values["E_p"]
                    row |= {"margin": got, "expected": expected, "deviation": dev}
                    good &= dev <= 1e-2
                ok &= good
                row["ok"] = good
                rows.append(row)
        return ok, {"rows": rows}

    return _timed("8", "penalty-factor rearrangement bound on the ten-field suite", body)


def criterion_9(count: int = 1000, seed: int = 9) -> CriterionResult:
    def body():
        rng = np.random.default_rng(seed)
        worst, bad = math.inf, []
        pn = ((1, 2), (2, 2), (3, 2), (1.5, 3), (2, 3), (4, 3))
        checked = 0
        for i in range(count):
            p, n = pn[i % len(pn)]
            g = random_steps(rng)
            res = P.hardy_inequality_margin(g, p, n)
            if res.divergent:
                continue
            checked += 1
            worst = min(worst, res.margin)
            # p = 1 is an identity, so allow rounding at the 1e-12 level
            if not res.margin >= -1e-12 * max(res.lhs, res.rhs):
                bad.append({"edges": g.edges.tolist(), "heights": g.start.tolist(), "p": p, "n": n, "margin": res.margin})
        exact = P.hardy_inequality_margin(P.SampledFunction.linear([0, 1], [0, 1]), 2, 2).margin
        return not bad and abs(exact - 0.25) <= 1e-10, {"checked": checked, "worst_margin": worst, "failures": bad[:10], "exact_case": exact}

    return _timed("9", "weighted Hardy step", body)


def criterion_10(theta: float = 1.0) -> CriterionResult:
    def body():
        shear = np.array([[1.0, theta], [0.0, 1.0]])
        rule = S.sphere_rule(2)
        rows, ok = [], True
        for p in (1, 2, 3):
            disc = {}
            for label, cells in (("default", F.DEFAULT_CELLS[2]), ("half_spacing", 2 * F.DEFAULT_CELLS[2] - 1)):
                f = F.named_field("gaussian", 2, cells)
                g = F.affine_image(f, shear)
                e0, e1 = S.energy(f, p, rule).value, S.energy(g, p, rule).value
                a0 = P.ainfp_norm(F.smooth_rearrangement(f), p, 2)
                a1 = P.ainfp_norm(F.smooth_rearrangement(g), p, 2)
                disc[label] = {"energy": abs(e1 - e0) / e0, "ainfp": abs(a1 - a0) / a0}
            good = all(disc["default"][k] <= 0.02 and disc["half_spacing"][k] <= 0.5 * disc["default"][k] for k in ("energy", "ainfp"))
            ok &= good
            rows.append({"p": p, **disc, "ok": good})
        return ok, {"theta": theta, "rows": rows}

    return _timed("10", "invariance under a volume-preserving shear", body)


def criterion_11() -> CriterionResult:
    def body():
        rows, ok = [], True
        refs = {(1, 2): lambda t: t**-0.5, (2, 2): lambda t: np.log(1 / t)}
        for (p, n), ref in refs.items():
            res = I.extremizer_search(p, n, knots=16, budget=2000, seed=0)
            rho = res.rank_correlation(ref)
            good = res.ratio >= 0.9 and res.ratio <= 1 + 1e-8 and rho >= 0.99 and res.evaluations <= 2000
            ok &= good
            rows.append({"p": p, "n": n, "ratio": res.ratio, "evaluations": res.evaluations, "rank_correlation": rho, "values": res.values.tolist(), "ok": good})
        return ok, {"rows": rows}

    return _timed("11", "extremizer search recovers the extremal shapes", body)


CRITERIA = {str(k): globals()[f"criterion_{k}"] for k in range(1, 12)}


def run_all(out: Path | None = None, only: str | None = None, progress: TextIO | None = None) -> list[CriterionResult]:
    from .cli import SCHEMA, dumps
    from . import __version__

    keys = [k.strip() for k in only.split(",")] if only else list(CRITERIA)
    results = []
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
    for key in keys:
        res = CRITERIA[key]()
        results.append(res)
        if progress is not None:
            print(res.line(), file=progress, flush=True)
        if out is not None:
            doc = {
                "schema": SCHEMA,
                "version": __version__,
                "criterion": key,
                "title": res.title,
                "passed": res.passed,
                "seconds": res.seconds,
                "details": res.details,
            }
            (out / f"criterion_{int(key):02d}.json").write_text(dumps(doc) + "\n")
    return results
