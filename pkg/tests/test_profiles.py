import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate

from affine_sobolev import constants as C
from affine_sobolev import profiles as P
from affine_sobolev.reproduce import random_lipschitz_profile, random_profile, random_steps

SQRT_PI = math.sqrt(math.pi)


def _q(*a, **k):
    return integrate.quad(*a, epsabs=0, epsrel=1e-12, limit=400, **k)[0]


def brute_ainfp(fstar, p, n, breaks):
    """Oracle: f** by nested quadrature, then the weighted integral piece by piece in log t."""
    pts = sorted(set(breaks))

    def fss(t):
        inner = [b for b in pts if 0 < b < t]
        return _q(fstar, 0, t, points=inner or None) / t if inner else _q(fstar, 0, t) / t

    def integrand(u):
        t = math.exp(u)
        return max(fss(t) - fstar(t), 0.0) ** p * t ** (1 - p / n)

    edges = [-40.0] + [math.log(b) for b in pts if b > 0] + [40.0]
    return sum(_q(integrand, a, b) for a, b in zip(edges, edges[1:])) ** (1 / p)


# ---------------------------------------------------------------------------
# Hardy transform


@pytest.mark.parametrize("t, expected", [(0.5, 1.0), (2.0, 0.5)])
def test_hardy_transform_step(t, expected):
    assert P.hardy_transform(P.step(), t) == pytest.approx(expected, rel=1e-15)


def test_hardy_transform_exponential():
    assert P.hardy_transform(P.exponential(), 1.0) == pytest.approx(1 - math.exp(-1), rel=1e-13)


def test_hardy_transform_flags_non_integrable():
    assert P.hardy_transform(P.power_tail(0.5), 1.0) == math.inf
    with pytest.raises(ValueError):
        P.hardy_transform(P.step(), 0.0)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_hardy_transform_dominates_and_decreases(seed):
    f = random_profile(np.random.default_rng(seed))
    t = np.geomspace(1e-4, 1e4, 60)
    fss = P.hardy_transform(f, t)
    assert np.all(fss >= f(t) - 1e-12 * max(1.0, f.sup_value))
    assert np.all(np.diff(fss) <= 1e-12 * max(1.0, f.sup_value))


@pytest.mark.parametrize(
    "prof",
    [P.exponential(), P.cone(2), P.cone(3), P.power_tail(2.0, 1e-3, 1e3), P.one_minus_power(0.3)],
    ids=["exp", "cone2", "cone3", "power", "one_minus"],
)
def test_oscillation_identity(prof):
    # f** - f* = (1/t) int_0^t s |f*'(s)| ds on smooth pieces
    for t in (0.01, 0.3, 0.9, 2.5):
        if t >= prof.support_bound:
            continue
        breaks = [float(b) for b in prof.breakpoints() if 0 < b < t]
        rhs = _q(lambda s: s * abs(float(prof.derivative(s))), 0, t, points=breaks or None) / t
        lhs = P.hardy_transform(prof, t) - float(prof(t))
        assert lhs == pytest.approx(rhs, rel=1e-8, abs=1e-14)


# ---------------------------------------------------------------------------
# A_{inf,p} norm


def test_ainfp_step():
    assert P.ainfp_norm(P.step(), 2, 2) == pytest.approx(math.sqrt(0.5), rel=1e-13)


def test_ainfp_zero_profile():
    assert P.ainfp_norm(P.zero_profile(), 2, 2) == 0.0
    assert P.ainfp_norm(P.constant_profile(3.0), 2, 2) == 0.0


def test_ainfp_divergent_sharp_profile():
    f = P.one_minus_power(1 / 6)
    assert P.ainfp_norm(f, 3, 2) == math.inf
    assert P.diagnose(f, 3, 2)["ainfp"] == "0"


@pytest.mark.parametrize(
    "prof, p, n",
    [
        (P.cone(2), 2, 2),
        (P.cone(3), 1.5, 3),
        (P.exponential(0.7), 3, 2),
        (P.one_minus_power(0.5), 4, 3),
        (P.piecewise_linear([[0, 2], [0.5, 1], [0.5, 0.6], [2, 0]]), 2, 3),
    ],
    ids=["cone2", "cone3", "exp", "one_minus", "pl_jump"],
)
def test_ainfp_against_nested_quadrature(prof, p, n):
    breaks = list(prof.breakpoints()) + [j[0] for j in prof.jumps()]
    ref = brute_ainfp(lambda s: float(prof(s)), p, n, breaks)
    assert P.ainfp_norm(prof, p, n) == pytest.approx(ref, rel=1e-7)


def test_ainfp_cone_closed_form():
    assert P.ainfp_norm(P.cone(2), 2, 2) == pytest.approx(6**-0.5, rel=1e-12)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_ainfp_invariant_under_resegmentation(seed):
    rng = np.random.default_rng(seed)
    f = random_lipschitz_profile(rng)
    cuts = sorted(10 ** rng.uniform(-3, 3, 4))
    g = f.resegmented(cuts)
    for p, n in ((1, 2), (2, 2), (3, 2), (2, 3)):
        a, b = P.ainfp_norm(f, p, n), P.ainfp_norm(g, p, n)
        assert a == pytest.approx(b, rel=1e-9)


# ---------------------------------------------------------------------------
# radial energy


def test_radial_energy_cone():
    assert P.radial_energy(P.cone(2), 2, 2) == pytest.approx(SQRT_PI, rel=1e-13)
    assert P.radial_integral(P.cone(2), 2, 2) == pytest.approx(0.25, rel=1e-13)


def test_radial_energy_support_bound_profile():
    assert P.radial_energy(P.one_minus_power(0.25), 3, 2) == pytest.approx(2 * SQRT_PI / 16 ** (1 / 3), rel=1e-12)


@pytest.mark.parametrize("p", [1, 2, 3.5])
def test_radial_energy_step_is_infinite(p):
    assert P.radial_energy(P.step(), p, 2) == math.inf
    assert P.diagnose(P.step(), p, 2)["radial_energy"].startswith("jump")


@pytest.mark.parametrize("n", [2, 3, 4])
@pytest.mark.parametrize("p", [1, 2, 3])
def test_radial_energy_cone_closed_form(n, p):
    # |grad f°| = 1 on the unit ball
    assert P.radial_energy(P.cone(n), p, n) == pytest.approx(C.unit_ball_volume(n) ** (1 / p), rel=1e-11)


def test_radial_energy_exponential_gamma_form():
    # f* = e^{-t}, n = 2: R_p = int s^{p/2} e^{-p s} ds = Gamma(p/2+1) / p^{p/2+1}
    for p in (1, 2, 3):
        rp = math.gamma(p / 2 + 1) / p ** (p / 2 + 1)
        assert P.radial_energy(P.exponential(), p, 2) == pytest.approx(2 * SQRT_PI * rp ** (1 / p), rel=1e-11)


def test_cone_radial_energy_matches_sampled_cone():
    from affine_sobolev import fields as F

    f = F.named_field("cone", 2)
    assert F.grad_lp_norm(f, 2) == pytest.approx(P.radial_energy(P.cone(2), 2, 2), rel=3e-3)


# ---------------------------------------------------------------------------
# theorem inequality on families


FAMILY_INSTANCES = [
    P.cone(2),
    P.cone(3),
    P.exponential(),
    P.exponential(3.0),
    P.power_tail(2.0, 1e-4, 1e4),
    P.power_tail(3.0, 1e-2, 1e2),
    P.log_family(1e-5, 1e3),
    P.one_minus_power(1 / 6, 1e-6),
    P.one_minus_power(0.25),
    P.one_minus_power(0.75, 0.1),
    P.piecewise_linear([[0, 1], [1, 0]]),
    P.log_linear([1e-2, 1, 10], [3, 1, 0]),
]


@pytest.mark.parametrize("prof", FAMILY_INSTANCES, ids=lambda f: f.to_json()[:40])
@pytest.mark.parametrize("p, n", [(1, 2), (2, 2), (3, 2), (1.5, 3), (3, 3), (5, 3)])
def test_sharp_inequality_on_families(prof, p, n):
    lhs = P.radial_energy(prof, p, n)
    rhs = C.sharp_constant(p, n) * P.ainfp_norm(prof, p, n)
    if math.isinf(lhs):
        return
    assert lhs - rhs >= -1e-6 * lhs


# ---------------------------------------------------------------------------
# sup deficit


@pytest.mark.parametrize("p, n", [(3, 2), (4, 2), (4, 3), (7, 3)])
def test_sup_deficit_sharp_profile(p, n):
    q = C.sobolev_conjugate(p, n)
    assert P.sup_deficit(P.one_minus_power(-1 / q), q) == pytest.approx(1.0, rel=1e-9)


def test_sup_deficit_linear_profile():
    assert P.sup_deficit(P.piecewise_linear([[0, 1], [1, 0]]), -6) == pytest.approx(1.0, rel=1e-10)


def test_sup_deficit_constant():
    assert P.sup_deficit(P.constant_profile(2.5), -6) == 0.0
    assert P.sup_deficit(P.constant_profile(2.5), math.inf) == 0.0


def test_sup_deficit_unbounded_profile():
    assert P.sup_deficit(P.power_tail(2.0), -6) == math.inf


# ---------------------------------------------------------------------------
# Hardy inequality margin


def test_hardy_margin_linear_example():
    res = P.hardy_inequality_margin(P.SampledFunction.linear([0, 1], [0, 1]), 2, 2)
    assert res.margin == pytest.approx(0.25, abs=1e-10)
    assert res.rhs == pytest.approx(0.5, abs=1e-12)


def test_hardy_margin_zero():
    res = P.hardy_inequality_margin(P.SampledFunction.steps([0, 1, 2], [0, 0]), 2, 2)
    assert res.margin == 0.0


def test_hardy_margin_divergent_flag():
    res = P.hardy_inequality_margin(P.SampledFunction.steps([0, 1], [1.0]), 2, 2)
    assert res.divergent and math.isnan(res.margin)


def _hardy_oracle(g, p, n):
    e = g.edges
    w = -p / n
    inner = list(e[1:-1])
    rhs = _q(lambda s: float(g(s)) ** p * s**w, 0, e[-1], points=inner or None)
    total = g.cumulative(e[-1])

    def avg(t):
        return _q(lambda s: float(g(s)), 0, t, points=[x for x in inner if x < t] or None) / t

    lhs = _q(lambda t: avg(t) ** p * t**w, 0, e[-1], points=inner or None)
    ex = p + p / n - 1
    lhs += total**p * e[-1] ** (-ex) / ex
    return (p / ex) ** p * rhs - lhs


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1), st.sampled_from([(1, 2), (2, 2), (3, 2), (1.5, 3), (2, 4)]))
def test_hardy_margin_random_steps(seed, pn):
    p, n = pn
    g = random_steps(np.random.default_rng(seed))
    res = P.hardy_inequality_margin(g, p, n)
    if res.divergent:
        assert g.start[0] > 0 and p / n >= 1
        return
    assert res.margin >= -1e-12 * max(res.lhs, res.rhs)
    assert res.margin == pytest.approx(_hardy_oracle(g, p, n), rel=1e-6, abs=1e-9 * max(1.0, res.rhs))


# ---------------------------------------------------------------------------
# structure, metadata, serialization


def test_profile_rejects_increasing():
    with pytest.raises(ValueError):
        P.piecewise_linear([[0, 0], [1, 1]])


def test_profile_rejects_gap():
    with pytest.raises(ValueError):
        P.Profile((P.PowerSegment(0.0, 1.0, 1.0), P.PowerSegment(2.0, 3.0, 0.5)))


@pytest.mark.parametrize(
    "prof, end, expected_power",
    [
        (P.power_tail(2.0), "zero", -0.5),
        (P.power_tail(2.0), "inf", -0.5),
        (P.power_tail(3.0), "inf", -1 / 3),
        (P.cone(2), "zero", 0.0),
    ],
)
def test_asymptote_metadata_matches_values(prof, end, expected_power):
    if end == "zero":
        seg, (t1, t2) = prof.segments[0], (1e-7, 1e-6)
        meta = seg.zero_asymptotes()[0]
    else:
        seg, (t1, t2) = prof.segments[-1], (1e6, 1e7)
        meta = seg.inf_asymptotes()[0]
    slope = math.log(float(prof(t2)) / float(prof(t1))) / math.log(t2 / t1)
    assert meta.power == pytest.approx(expected_power, abs=1e-12)
    assert slope == pytest.approx(meta.power, abs=1e-3)


def test_derivative_metadata_cone():
    seg = P.cone(2).segments[0]
    d1, d2 = abs(float(seg.deriv(1e-7))), abs(float(seg.deriv(1e-6)))
    assert math.log(d2 / d1) / math.log(10) == pytest.approx(seg.zero_asymptotes()[1].power, abs=1e-9)


@pytest.mark.parametrize(
    "obj",
    [
        {"family": "cone", "params": {"n": 3}},
        {"family": "power_tail", "params": {"q": 2.0, "eps": 1e-3, "T": "inf"}},
        {"piecewise_linear": [[0, 2], [1, 1], [1, 0.5], [3, 0]]},
        {"log_linear": {"t": [0.1, 1, 10], "v": [2, 1, 0]}},
    ],
)
def test_json_roundtrip(obj):
    f = P.profile_from_json(obj)
    g = P.profile_from_json(json.loads(f.to_json()))
    t = np.geomspace(1e-3, 1e3, 50)
    np.testing.assert_array_equal(f(t), g(t))


def test_unknown_family():
    with pytest.raises(ValueError):
        P.profile_from_json({"family": "nope"})


def test_piecewise_linear_jump_encoding():
    f = P.piecewise_linear([[0, 2], [1, 1], [1, 0.5], [3, 0]])
    assert f.jumps()[0][0] == pytest.approx(1.0)
    assert float(f(0.999999)) == pytest.approx(1.0, abs=1e-5)
    assert float(f(1.0)) == pytest.approx(0.5)
