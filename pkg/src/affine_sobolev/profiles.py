"""Decreasing-rearrangement profiles on (0, inf) and their 1-D functionals.

A :class:`Profile` is a nonincreasing, right-continuous, nonnegative function
stored as contiguous segments. Analytic segments (power, logarithm,
exponential) carry closed-form antiderivatives plus endpoint asymptotics; a
:class:`LinearBlock` packs many short linear (or log-linear) pieces into
arrays so that profiles extracted from grids or produced by the optimizer
stay cheap.

Two quantities drive every functional here. The running moment

    O(t) = int_{(0, t]} s d|f*|(s)

(jump atoms at ``s`` contribute ``s * jump``) gives ``f** - f* = O(t)/t``
without cancellation, and the radial integral

    R_p = int_0^inf s^{(n-1)p/n} |f*'(s)|^p ds

gives ``||grad f°||_p = n omega_n^{1/n} R_p^{1/p}``.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np
from scipy import integrate, special

from .constants import sharp_constant, unit_ball_volume

__all__ = [
    "Asymptote",
    "PowerSegment",
    "LogSegment",
    "ExpSegment",
    "LinearBlock",
    "Profile",
    "power_tail",
    "log_family",
    "one_minus_power",
    "cone",
    "exponential",
    "step",
    "piecewise_linear",
    "log_linear",
    "zero_profile",
    "constant_profile",
    "profile_from_json",
    "hardy_transform",
    "ainfp_norm",
    "radial_energy",
    "diagnose",
    "sup_deficit",
    "SampledFunction",
    "HardyMargin",
    "hardy_inequality_margin",
]

QUAD_RTOL = 1e-10
_GL_X, _GL_W = np.polynomial.legendre.leggauss(16)
_EXP_TOL = 1e-12


class Asymptote(NamedTuple):
    """Leading behaviour ``~ t^power * |log t|^log`` at an endpoint.

    ``power = +inf`` at 0 (``-inf`` at infinity) means identically zero.
    """

    power: float
    log: float = 0.0


_NONE_AT_ZERO = Asymptote(math.inf)
_NONE_AT_INF = Asymptote(-math.inf)


def _diverges_at_zero(a: Asymptote) -> bool:
    return a.power < -_EXP_TOL or (abs(a.power) <= _EXP_TOL and a.log >= -1)


def _diverges_at_inf(a: Asymptote) -> bool:
    return a.power > _EXP_TOL or (abs(a.power) <= _EXP_TOL and a.log >= -1)


# ---------------------------------------------------------------------------
# analytic segments


_U_SPLITS = (-60.0, -30.0, -15.0, -5.0, 0.0, 5.0, 15.0, 30.0, 60.0)


def _quad_log_range(func, a: float, b: float) -> float:
    """Adaptive Gauss-Kronrod over ``(a, b)`` in ``u = log t``, split into panels."""
    cuts = [a, *(u for u in _U_SPLITS if a < u < b), b]
    total = 0.0
    for lo, hi in zip(cuts, cuts[1:]):
        val, _ = integrate.quad(func, lo, hi, epsabs=0.0, epsrel=QUAD_RTOL, limit=400)
        total += val
    return total


class _AnalyticSegment:
    """Shared quadrature for segments with closed-form ``moment``."""

    lo: float
    hi: float

    def _u_limits(self):
        a = -math.inf if self.lo == 0 else math.log(self.lo)
        b = math.inf if math.isinf(self.hi) else math.log(self.hi)
        return a, b

    def osc_integral(self, o0: float, p: float, n: int) -> float:
        """``int_lo^hi ((o0 + moment(t)) / t)^p t^{-p/n} dt`` in ``u = log t``."""

        def integrand(u):
            if not -700 < u < 700:
                return 0.0
            t = math.exp(u)
            o = o0 + self.moment(t)
            if o <= 0:
                return 0.0
            return math.exp(p * math.log(o) - p * u - p * u / n + u)

        return _quad_log_range(integrand, *self._u_limits())

    def radial_integral(self, p: float, n: int) -> float:
        w = (n - 1) * p / n

        def integrand(u):
            if not -700 < u < 700:
                return 0.0
            t = math.exp(u)
            d = abs(float(self.deriv(t)))
            if d == 0:
                return 0.0
            return math.exp(p * math.log(d) + w * u + u)

        return _quad_log_range(integrand, *self._u_limits())

    @property
    def jumps(self) -> list[tuple[float, float]]:
        return []

    def breakpoints(self) -> list[float]:
        return [self.lo] if math.isinf(self.hi) else [self.lo, self.hi]


@dataclass(frozen=True)
class PowerSegment(_AnalyticSegment):
    """``a + b t^c`` on ``[lo, hi)``; ``c = 1`` is linear, ``b = 0`` constant."""

    lo: float
    hi: float
    a: float
    b: float = 0.0
    c: float = 1.0

    @property
    def _flat(self) -> bool:
        return self.b == 0 or self.c == 0

    def value(self, t):
        t = np.asarray(t, dtype=float)
        if self._flat:
            return np.full_like(t, self.a + (self.b if self.c == 0 else 0.0))
        return self.a + self.b * t**self.c

    def deriv(self, t):
        t = np.asarray(t, dtype=float)
        if self._flat:
            return np.zeros_like(t)
        return self.b * self.c * t ** (self.c - 1)

    def left_value(self) -> float:
        if self.lo == 0 and not self._flat and self.c < 0:
            return math.inf
        return float(self.value(self.lo))

    def right_value(self) -> float:
        if math.isinf(self.hi):
            if self._flat:
                return float(self.value(1.0))
            return self.a if self.c < 0 else (math.inf if self.b > 0 else -math.inf)
        return float(self.value(self.hi))

    def _pow_int(self, k: float, t0: float, t1: float) -> float:
        # int_{t0}^{t1} s^k ds
        if abs(k + 1) < 1e-15:
            return math.log(t1 / t0)
        return (t1 ** (k + 1) - t0 ** (k + 1)) / (k + 1)

    def mass(self, t: float) -> float:
        if self._flat:
            return float(self.value(1.0)) * (t - self.lo)
        return self.a * (t - self.lo) + self.b * self._pow_int(self.c, self.lo, t)

    def moment(self, t: float) -> float:
        if self._flat:
            return 0.0
        return abs(self.b * self.c) * self._pow_int(self.c, self.lo, t)

    def zero_asymptotes(self) -> tuple[Asymptote, Asymptote]:
        if self._flat:
            return Asymptote(0.0), _NONE_AT_ZERO
        vp = self.c if (self.c < 0 or self.a == 0) else 0.0
        return Asymptote(vp), Asymptote(self.c - 1)

    def inf_asymptotes(self) -> tuple[Asymptote, Asymptote]:
        if self._flat:
            return Asymptote(0.0), _NONE_AT_INF
        vp = self.c if (self.c > 0 or self.a == 0) else 0.0
        return Asymptote(vp), Asymptote(self.c - 1)


@dataclass(frozen=True)
class LogSegment(_AnalyticSegment):
    """``a + b log t`` on ``[lo, hi)`` (``b <= 0`` for a decreasing profile)."""

    lo: float
    hi: float
    a: float
    b: float

    def value(self, t):
        t = np.asarray(t, dtype=float)
        with np.errstate(divide="ignore"):
            return self.a + self.b * np.log(t)

    def deriv(self, t):
        t = np.asarray(t, dtype=float)
        return self.b / t

    def left_value(self) -> float:
        if self.lo == 0:
            return math.inf if self.b < 0 else (-math.inf if self.b > 0 else self.a)
        return float(self.value(self.lo))

    def right_value(self) -> float:
        if math.isinf(self.hi):
            return -math.inf if self.b < 0 else self.a
        return float(self.value(self.hi))

    def mass(self, t: float) -> float:
        def anti(s):
            return 0.0 if s == 0 else self.a * s + self.b * (s * math.log(s) - s)

        return anti(t) - anti(self.lo)

    def moment(self, t: float) -> float:
        return abs(self.b) * (t - self.lo)

    def zero_asymptotes(self) -> tuple[Asymptote, Asymptote]:
        if self.b == 0:
            return Asymptote(0.0), _NONE_AT_ZERO
        return Asymptote(0.0, 1.0), Asymptote(-1.0)

    def inf_asymptotes(self) -> tuple[Asymptote, Asymptote]:
        if self.b == 0:
            return Asymptote(0.0), _NONE_AT_INF
        return Asymptote(0.0, 1.0), Asymptote(-1.0)


@dataclass(frozen=True)
class ExpSegment(_AnalyticSegment):
    """``a exp(-r t)`` on ``[lo, hi)``."""

    lo: float
    hi: float
    a: float
    r: float

    def value(self, t):
        return self.a * np.exp(-self.r * np.asarray(t, dtype=float))

    def deriv(self, t):
        return -self.r * self.a * np.exp(-self.r * np.asarray(t, dtype=float))

    def left_value(self) -> float:
        return float(self.value(self.lo))

    def right_value(self) -> float:
        return 0.0 if math.isinf(self.hi) else float(self.value(self.hi))

    def mass(self, t: float) -> float:
        return self.a / self.r * (math.exp(-self.r * self.lo) - math.exp(-self.r * t))

    def moment(self, t: float) -> float:
        # a e^{-r lo} [(lo + 1/r)(1 - e^{-x}) - d e^{-x}],  d = t - lo, x = r d
        r, lo = self.r, self.lo
        if math.isinf(t):
            return abs(self.a) * (lo + 1 / r) * math.exp(-r * lo)
        d = t - lo
        x = r * d
        if lo == 0 and x < 0.1:
            # 1 - (1 + x) e^{-x} = sum_{k>=2} (-1)^k (k-1) x^k / k!
            term, total = 1.0, 0.0
            for k in range(1, 30):
                term *= x / k
                if k >= 2:
                    total += (-1) ** k * (k - 1) * term
            return abs(self.a) / r * total
        inner = -(lo + 1 / r) * math.expm1(-x) - d * math.exp(-x)
        return abs(self.a) * math.exp(-r * lo) * inner

    def radial_integral(self, p: float, n: int) -> float:
        # (a r)^p int s^w e^{-r p s} ds via the regularized upper incomplete gamma
        w = (n - 1) * p / n
        k = self.r * p
        upper = 0.0 if math.isinf(self.hi) else special.gammaincc(w + 1, k * self.hi)
        tail = special.gammaincc(w + 1, k * self.lo) - upper
        return float((abs(self.a) * self.r) ** p * special.gamma(w + 1) * k ** (-(w + 1)) * tail)

    def zero_asymptotes(self) -> tuple[Asymptote, Asymptote]:
        return Asymptote(0.0), Asymptote(0.0)

    def inf_asymptotes(self) -> tuple[Asymptote, Asymptote]:
        return _NONE_AT_INF, _NONE_AT_INF


# ---------------------------------------------------------------------------
# vectorized piecewise-linear block


@dataclass(frozen=True, eq=False)
class LinearBlock:
    """Many consecutive pieces, linear in ``t`` (or in ``log t``).

    Piece ``k`` lives on ``[t[k], t[k+1])`` and runs from ``start[k]`` to
    ``end[k]``; ``end[k] != start[k+1]`` encodes a downward jump at ``t[k+1]``.
    Staircases are blocks with ``start == end``.
    """

    t: np.ndarray
    start: np.ndarray
    end: np.ndarray
    log: bool = False

    def __post_init__(self):
        t = np.asarray(self.t, dtype=float)
        start = np.asarray(self.start, dtype=float)
        end = np.asarray(self.end, dtype=float)
        if t.ndim != 1 or t.size < 2 or start.shape != (t.size - 1,) or end.shape != start.shape:
            raise ValueError("LinearBlock needs k+1 knots and k start/end values")
        if np.any(np.diff(t) <= 0):
            raise ValueError("LinearBlock knots must be strictly increasing")
        if self.log and t[0] <= 0:
            raise ValueError("log-linear pieces need positive knots")
        object.__setattr__(self, "t", t)
        object.__setattr__(self, "start", start)
        object.__setattr__(self, "end", end)

    @property
    def lo(self) -> float:
        return float(self.t[0])

    @property
    def hi(self) -> float:
        return float(self.t[-1])

    def _x(self, t):
        return np.log(t) if self.log else t

    @property
    def slopes(self) -> np.ndarray:
        """Slope in the piece variable (``t`` or ``log t``)."""
        x = self._x(self.t)
        return (self.end - self.start) / np.diff(x)

    def _piece(self, t):
        k = np.searchsorted(self.t, t, side="right") - 1
        return np.clip(k, 0, self.t.size - 2)

    def value(self, t):
        t = np.asarray(t, dtype=float)
        k = self._piece(t)
        x = self._x(np.maximum(t, self.t[0]))
        return self.start[k] + self.slopes[k] * (x - self._x(self.t[k]))

    def deriv(self, t):
        t = np.asarray(t, dtype=float)
        k = self._piece(t)
        s = self.slopes[k]
        return s / t if self.log else s

    def left_value(self) -> float:
        return float(self.start[0])

    def right_value(self) -> float:
        return float(self.end[-1])

    @property
    def jumps(self) -> list[tuple[float, float]]:
        gap = self.end[:-1] - self.start[1:]
        idx = np.nonzero(gap != 0)[0]
        return [(float(self.t[i + 1]), float(gap[i])) for i in idx]

    def breakpoints(self) -> list[float]:
        return list(self.t)

    def _piece_mass(self) -> np.ndarray:
        t0, t1 = self.t[:-1], self.t[1:]
        if not self.log:
            return 0.5 * (self.start + self.end) * (t1 - t0)
        b = self.slopes
        a = self.start - b * np.log(t0)
        return a * (t1 - t0) + b * (t1 * np.log(t1) - t1 - t0 * np.log(t0) + t0)

    def _piece_moment(self) -> np.ndarray:
        t0, t1 = self.t[:-1], self.t[1:]
        b = np.abs(self.slopes)
        if self.log:
            return b * (t1 - t0)
        return 0.5 * b * (t1**2 - t0**2)

    def mass(self, t: float) -> float:
        k = int(self._piece(t))
        full = float(np.sum(self._piece_mass()[:k]))
        sub = LinearBlock(
            np.array([self.t[k], t]), self.start[k : k + 1], self.value(np.array([t])), self.log
        ) if t > self.t[k] else None
        return full + (float(sub._piece_mass()[0]) if sub is not None else 0.0)

    def moment(self, t: float) -> float:
        """Continuous part only; jump atoms are added by :class:`Profile`."""
        k = int(self._piece(t))
        full = float(np.sum(self._piece_moment()[:k]))
        b = abs(self.slopes[k])
        t0 = self.t[k]
        part = b * (t - t0) if self.log else 0.5 * b * (t * t - t0 * t0)
        return full + float(part)

    def zero_asymptotes(self) -> tuple[Asymptote, Asymptote]:
        if self.slopes[0] == 0:
            return Asymptote(0.0), _NONE_AT_ZERO
        return Asymptote(0.0), Asymptote(0.0)

    def inf_asymptotes(self):  # never infinite
        raise AssertionError("LinearBlock has a finite right end")

    def osc_integral(self, o0: float, p: float, n: int) -> float:
        """Vectorized ``int ((O(t))/t)^p t^{-p/n} dt`` over all pieces.

        Flat pieces and a linear first piece starting at 0 are integrated in
        closed form; the rest use 16-point Gauss-Legendre in ``log t`` on
        panels no wider than a factor ``e``.
        """
        t0, t1 = self.t[:-1], self.t[1:]
        slopes = np.abs(self.slopes)
        pm = self._piece_moment()
        jump_atoms = np.zeros_like(t0)
        gap = self.end[:-1] - self.start[1:]
        jump_atoms[1:] = self.t[1:-1] * gap
        o_start = o0 + np.concatenate([[0.0], np.cumsum(pm[:-1])]) + np.cumsum(jump_atoms)

        ex = -p - p / n + 1  # exponent of t in O^p t^{-p-p/n}
        total = 0.0
        flat = slopes == 0
        if np.any(flat):
            a, b, o = t0[flat], t1[flat], o_start[flat]
            pos = o > 0
            if np.any(pos):
                total += float(np.sum(o[pos] ** p * (b[pos] ** ex - a[pos] ** ex) / ex))
        rest = ~flat
        if rest[0] and t0[0] == 0:
            if not self.log and o_start[0] == 0:
                # O(t) = b t^2 / 2 exactly, integrand (b/2)^p t^{p - p/n}
                e = p - p / n + 1
                total += float((slopes[0] / 2) ** p * t1[0] ** e / e)
                rest[0] = False
            else:
                # O(0+) > 0 with t -> 0 only occurs with a jump at 0, impossible
                raise AssertionError("unexpected moment at t = 0")
        idx = np.nonzero(rest)[0]
        if idx.size:
            u0, u1 = np.log(t0[idx]), np.log(t1[idx])
            npan = np.maximum(1, np.ceil((u1 - u0) / 1.0)).astype(int)
            rep = np.repeat(np.arange(idx.size), npan)
            offs = np.arange(rep.size) - np.repeat(np.cumsum(npan) - npan, npan)
            width = (u1 - u0)[rep] / npan[rep]
            a = u0[rep] + offs * width
            uu = a[:, None] + 0.5 * width[:, None] * (_GL_X[None, :] + 1)
            tt = np.exp(uu)
            k = idx[rep][:, None]
            if self.log:
                mom = slopes[k] * (tt - self.t[k])
            else:
                mom = 0.5 * slopes[k] * (tt**2 - self.t[k] ** 2)
            o = o_start[k] + mom
            integrand = np.exp(p * np.log(np.maximum(o, 1e-300)) + uu * ex)
            integrand[o <= 0] = 0.0
            total += float(np.sum(0.5 * width[:, None] * _GL_W[None, :] * integrand))
        return total

    def total_moment(self, o0: float) -> float:
        """O at the right end of the block (jump atoms inside included)."""
        gap = self.end[:-1] - self.start[1:]
        return o0 + float(np.sum(self._piece_moment())) + float(np.sum(self.t[1:-1] * gap))

    def radial_integral(self, p: float, n: int) -> float:
        t0, t1 = self.t[:-1], self.t[1:]
        s = np.abs(self.slopes)
        keep = s > 0
        if not np.any(keep):
            return 0.0
        t0, t1, s = t0[keep], t1[keep], s[keep]
        if self.log:
            e = 1 - p / n
            if abs(e) < 1e-15:
                pw = np.log(t1 / t0)
            else:
                pw = (t1**e - t0**e) / e
        else:
            e = (n - 1) * p / n + 1
            pw = (t1**e - t0**e) / e
        return float(np.sum(s**p * pw))


# ---------------------------------------------------------------------------
# profile


@dataclass(frozen=True, eq=False)
class Profile:
    """A decreasing rearrangement ``f*`` as contiguous segments from 0.

    ``support_bound`` is the right end of the last segment (``inf`` for
    infinite support); beyond it the profile is 0.
    """

    segments: tuple
    description: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        segs = tuple(self.segments)
        if not segs:
            raise ValueError("a profile needs at least one segment")
        object.__setattr__(self, "segments", segs)
        if segs[0].lo != 0:
            raise ValueError("first segment must start at t = 0")
        for a, b in zip(segs, segs[1:]):
            if not math.isclose(a.hi, b.lo, rel_tol=1e-14, abs_tol=0):
                raise ValueError(f"segments not contiguous at {a.hi} / {b.lo}")
        self._validate()

    # -- basic structure

    @property
    def support_bound(self) -> float:
        return float(self.segments[-1].hi)

    @property
    def sup_value(self) -> float:
        return float(self.segments[0].left_value())

    def _validate(self) -> None:
        scale = 0.0
        for seg in self.segments:
            pts = self._probe_points(seg)
            v = np.asarray(seg.value(pts), dtype=float)
            d = np.asarray(seg.deriv(pts), dtype=float)
            finite = np.isfinite(v)
            if finite.any():
                scale = max(scale, float(np.max(np.abs(v[finite]))))
            tol = 1e-12 * max(scale, 1.0)
            if np.any(v[finite] < -tol):
                raise ValueError("profile must be nonnegative")
            if np.any(d > 1e-12 * max(1.0, float(np.max(np.abs(d))))):
                raise ValueError("profile must be nonincreasing")
            if hasattr(seg, "start") and np.any(seg.end > seg.start + tol):
                raise ValueError("profile must be nonincreasing")
        for a, b in zip(self.segments, self.segments[1:]):
            left, right = a.right_value(), b.left_value()
            if right > left + 1e-12 * max(abs(left), 1.0):
                raise ValueError(f"profile increases at t = {b.lo}")
        for seg in self.segments:
            for _, size in seg.jumps:
                if size < -1e-12:
                    raise ValueError("profile increases inside a block")
        last = self.segments[-1]
        if math.isinf(last.hi) and last.right_value() < -1e-12:
            raise ValueError("profile must stay nonnegative at infinity")

    @staticmethod
    def _probe_points(seg) -> np.ndarray:
        if isinstance(seg, LinearBlock):
            return 0.5 * (seg.t[:-1] + seg.t[1:])
        lo = seg.lo if seg.lo > 0 else (min(seg.hi, 1.0) * 1e-9 if not math.isinf(seg.hi) else 1e-9)
        hi = seg.hi if not math.isinf(seg.hi) else max(lo, 1.0) * 1e9
        if hi <= lo:
            return np.array([lo])
        return np.geomspace(lo, hi, 33)[:-1] if lo > 0 else np.linspace(lo, hi, 33)[:-1]

    def jumps(self) -> list[tuple[float, float]]:
        """Downward jumps ``(t, size)`` including the drop to 0 at the support bound."""
        out = []
        for seg in self.segments:
            out.extend(seg.jumps)
        for a, b in zip(self.segments, self.segments[1:]):
            gap = a.right_value() - b.left_value()
            if gap > _jump_tol(a.right_value()):
                out.append((b.lo, gap))
        last = self.segments[-1]
        if not math.isinf(last.hi) and last.right_value() > _jump_tol(self.sup_value):
            out.append((last.hi, last.right_value()))
        return sorted(out)

    def breakpoints(self) -> np.ndarray:
        pts = set()
        for seg in self.segments:
            pts.update(float(x) for x in seg.breakpoints())
        return np.array(sorted(pts))

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        out = np.zeros_like(t)
        for seg in self.segments:
            mask = (t >= seg.lo) & (t < seg.hi)
            if np.any(mask):
                out[mask] = seg.value(t[mask])
        return out

    def derivative(self, t):
        t = np.asarray(t, dtype=float)
        out = np.zeros_like(t)
        for seg in self.segments:
            mask = (t >= seg.lo) & (t < seg.hi)
            if np.any(mask):
                out[mask] = seg.deriv(t[mask])
        return out

    def limit_at_infinity(self) -> float:
        last = self.segments[-1]
        return max(0.0, last.right_value()) if math.isinf(last.hi) else 0.0

    # -- cumulative quantities

    def _segment_index(self, t: float) -> int:
        for i, seg in enumerate(self.segments):
            if t < seg.hi:
                return i
        return len(self.segments)

    def mass(self, t: float) -> float:
        """``int_0^t f*(s) ds`` (``inf`` if ``f*`` is not integrable at 0)."""
        if t <= 0:
            return 0.0
        if self.segments[0].lo == 0:
            vz, _ = self.segments[0].zero_asymptotes()
            if vz.power <= -1:
                return math.inf
        total = 0.0
        for seg in self.segments:
            if t <= seg.lo:
                break
            total += seg.mass(min(t, seg.hi))
        return total

    def moments_at_starts(self) -> list[float]:
        """``O`` just after each segment start (atoms at the start included)."""
        out = []
        o = 0.0
        prev = None
        for seg in self.segments:
            if prev is not None:
                gap = prev.right_value() - seg.left_value()
                if gap > _jump_tol(prev.right_value()):
                    o += seg.lo * gap
            out.append(o)
            if isinstance(seg, LinearBlock):
                o = seg.total_moment(o)
            elif not math.isinf(seg.hi):
                o += seg.moment(seg.hi)
            prev = seg
        return out

    def oscillation(self, t):
        """``f**(t) - f*(t) = O(t)/t``, vectorized."""
        t = np.atleast_1d(np.asarray(t, dtype=float))
        starts = self.moments_at_starts()
        out = np.empty_like(t)
        jumps = self.jumps()
        total_end = self._total_moment()
        for j, tj in enumerate(t):
            i = self._segment_index(tj)
            if i == len(self.segments):
                out[j] = total_end / tj
                continue
            seg = self.segments[i]
            o = starts[i] + seg.moment(tj)
            if isinstance(seg, LinearBlock):
                o += sum(s * g for s, g in seg.jumps if s <= tj)
            out[j] = o / tj
        return out

    def _total_moment(self) -> float:
        last = self.segments[-1]
        if math.isinf(last.hi):
            return math.inf
        o = self.moments_at_starts()[-1]
        o = last.total_moment(o) if isinstance(last, LinearBlock) else o + last.moment(last.hi)
        if last.right_value() > _jump_tol(self.sup_value):
            o += last.hi * last.right_value()
        return o

    # -- serialization

    def to_json(self) -> str:
        if not self.description:
            raise ValueError("profile has no serializable description")
        return json.dumps(self.description, sort_keys=True)

    def resegmented(self, cuts: Sequence[float]) -> "Profile":
        """The same function with analytic segments split at ``cuts``."""
        segs = []
        for seg in self.segments:
            inner = sorted(c for c in cuts if seg.lo < c < seg.hi)
            if not inner or isinstance(seg, LinearBlock):
                segs.append(seg)
                continue
            edges = [seg.lo, *inner, seg.hi]
            for a, b in zip(edges, edges[1:]):
                segs.append(_replace_bounds(seg, a, b))
        return Profile(tuple(segs), self.description)


def _jump_tol(scale: float) -> float:
    return 1e-12 * max(abs(scale), 1.0) if math.isfinite(scale) else 1e-12


def _replace_bounds(seg, lo, hi):
    kw = {f: getattr(seg, f) for f in seg.__dataclass_fields__}
    kw["lo"], kw["hi"] = lo, hi
    return type(seg)(**kw)


# ---------------------------------------------------------------------------
# families


def _truncate_bottom(value: float) -> float:
    return 0.0 if math.isinf(value) else value


def power_tail(q: float, eps: float = 0.0, T: float = math.inf) -> Profile:
    """``max(t, eps)^{-1/q} - T^{-1/q}`` on ``(0, T)``, the ``p < n`` extremal shape."""
    if not q > 0:
        raise ValueError("power_tail needs q > 0")
    if eps < 0 or not T > eps:
        raise ValueError("need 0 <= eps < T")
    shift = 0.0 if math.isinf(T) else T ** (-1 / q)
    segs = []
    if eps > 0:
        segs.append(PowerSegment(0.0, eps, eps ** (-1 / q) - shift, 0.0, 1.0))
    segs.append(PowerSegment(eps, T, -shift, 1.0, -1 / q))
    return Profile(tuple(segs), {"family": "power_tail", "params": {"q": q, "eps": eps, "T": T}})


def log_family(eps: float = 0.0, T: float = 1.0) -> Profile:
    """``log(T / max(t, eps))`` on ``(0, T)``, the ``p = n`` extremal shape."""
    if eps < 0 or not T > eps:
        raise ValueError("need 0 <= eps < T")
    segs = []
    if eps > 0:
        segs.append(PowerSegment(0.0, eps, math.log(T / eps), 0.0, 1.0))
    segs.append(LogSegment(eps, T, math.log(T), -1.0))
    return Profile(tuple(segs), {"family": "log", "params": {"eps": eps, "T": T}})


def one_minus_power(r: float, eps: float = 0.0) -> Profile:
    """``(1 - max(t, eps)^r) chi_[0,1)`` with ``r > 0``, the ``p > n`` shapes."""
    if not r > 0:
        raise ValueError("one_minus_power needs r > 0")
    if not 0 <= eps < 1:
        raise ValueError("need 0 <= eps < 1")
    segs = []
    if eps > 0:
        segs.append(PowerSegment(0.0, eps, 1 - eps**r, 0.0, 1.0))
    segs.append(PowerSegment(eps, 1.0, 1.0, -1.0, r))
    return Profile(tuple(segs), {"family": "one_minus_power", "params": {"r": r, "eps": eps}})


def cone(n: int) -> Profile:
    """Profile of ``max(0, 1 - |x|)`` in R^n: ``1 - (t/omega_n)^{1/n}``."""
    om = unit_ball_volume(n)
    seg = PowerSegment(0.0, om, 1.0, -(om ** (-1 / n)), 1 / n)
    return Profile((seg,), {"family": "cone", "params": {"n": n}})


def exponential(rate: float = 1.0) -> Profile:
    seg = ExpSegment(0.0, math.inf, 1.0, rate)
    return Profile((seg,), {"family": "exponential", "params": {"rate": rate}})


def step(height: float = 1.0, width: float = 1.0) -> Profile:
    seg = PowerSegment(0.0, width, height, 0.0, 1.0)
    return Profile((seg,), {"family": "step", "params": {"height": height, "width": width}})


def zero_profile() -> Profile:
    return Profile((PowerSegment(0.0, math.inf, 0.0, 0.0, 1.0),), {"family": "zero", "params": {}})


def constant_profile(c: float) -> Profile:
    return Profile((PowerSegment(0.0, math.inf, c, 0.0, 1.0),), {"family": "constant", "params": {"c": c}})


def piecewise_linear(knots: Sequence[Sequence[float]]) -> Profile:
    """Linear interpolation of ``[[t, v], ...]``; constant before the first knot.

    Repeated ``t`` values encode jumps. The profile is 0 after the last knot.
    """
    arr = np.asarray(knots, dtype=float)
    if arr.ndim != 2 or arr.shape[1] != 2 or arr.shape[0] < 1:
        raise ValueError("piecewise_linear expects [[t, v], ...]")
    t, v = arr[:, 0], arr[:, 1]
    if t[0] < 0 or np.any(np.diff(t) < 0):
        raise ValueError("knot abscissae must be nonnegative and nondecreasing")
    segs = []
    if t[0] > 0:
        segs.append(PowerSegment(0.0, float(t[0]), float(v[0]), 0.0, 1.0))
    # collapse repeated abscissae into jumps
    uniq_t, starts, ends = [], [], []
    i = 0
    while i < len(t) - 1:
        j = i
        while j + 1 < len(t) and t[j + 1] == t[i]:
            j += 1
        if j + 1 >= len(t):
            break
        uniq_t.append(t[j])
        starts.append(v[j])
        ends.append(v[j + 1])
        i = j + 1
    if uniq_t:
        uniq_t.append(t[-1])
        # a run of equal abscissae at the end: value before the drop
        segs.append(LinearBlock(np.array(uniq_t), np.array(starts), np.array(ends)))
    elif not segs:
        raise ValueError("piecewise_linear needs a nonempty interval")
    return Profile(tuple(segs), {"piecewise_linear": arr.tolist()})


def log_linear(t: Sequence[float], v: Sequence[float]) -> Profile:
    """Linear in ``log t`` between knots, constant ``v[0]`` before ``t[0]``, 0 after."""
    t = np.asarray(t, dtype=float)
    v = np.asarray(v, dtype=float)
    if t.shape != v.shape or t.size < 2:
        raise ValueError("need matching knot arrays with at least 2 knots")
    segs = [PowerSegment(0.0, float(t[0]), float(v[0]), 0.0, 1.0), LinearBlock(t, v[:-1], v[1:], log=True)]
    return Profile(tuple(segs), {"log_linear": {"t": t.tolist(), "v": v.tolist()}})


_FAMILIES = {
    "power_tail": power_tail,
    "log": log_family,
    "one_minus_power": one_minus_power,
    "cone": cone,
    "exponential": exponential,
    "step": step,
    "zero": lambda: zero_profile(),
    "constant": constant_profile,
}


def profile_from_json(obj) -> Profile:
    """Build a profile from ``{family, params}``, ``{piecewise_linear: ...}`` or ``{log_linear: ...}``."""
    if isinstance(obj, str):
        obj = json.loads(obj)
    if "piecewise_linear" in obj:
        return piecewise_linear(obj["piecewise_linear"])
    if "log_linear" in obj:
        return log_linear(obj["log_linear"]["t"], obj["log_linear"]["v"])
    name = obj.get("family")
    if name not in _FAMILIES:
        raise ValueError(f"unknown profile family {name!r}")
    params = {k: (math.inf if v in ("inf", "Infinity") else v) for k, v in obj.get("params", {}).items()}
    return _FAMILIES[name](**params)


# ---------------------------------------------------------------------------
# functionals


def hardy_transform(f: Profile, t):
    """``f**(t) = (1/t) int_0^t f*``; ``inf`` where ``f*`` is not integrable at 0."""
    t_arr = np.atleast_1d(np.asarray(t, dtype=float))
    if np.any(t_arr <= 0):
        raise ValueError("hardy_transform needs t > 0")
    out = np.array([f.mass(float(x)) / x for x in t_arr])
    return out if np.ndim(t) else float(out[0])


def _ainfp_divergence(f: Profile, p: float, n: int) -> str | None:
    first = f.segments[0]
    vz, dz = first.zero_asymptotes()
    if vz.power <= -1 + _EXP_TOL:
        return "0"
    if dz.power != math.inf:
        osc = Asymptote(dz.power + 1, dz.log)
        if _diverges_at_zero(Asymptote(1 + p * osc.power - p / n, p * osc.log)):
            return "0"
    last = f.segments[-1]
    if math.isinf(last.hi):
        _, di = last.inf_asymptotes()
        if di.power != -math.inf:
            g = di.power + 2
            if g > _EXP_TOL:
                osc = Asymptote(g - 1, di.log)
            elif abs(g) <= _EXP_TOL:
                osc = Asymptote(-1.0, di.log + 1)
            else:
                osc = Asymptote(-1.0)
            if _diverges_at_inf(Asymptote(1 + p * osc.power - p / n, p * osc.log)):
                return "inf"
    return None


def _radial_divergence(f: Profile, p: float, n: int) -> str | None:
    jumps = f.jumps()
    if jumps:
        return f"jump at t={jumps[0][0]:.17g}"
    w = (n - 1) * p / n
    _, dz = f.segments[0].zero_asymptotes()
    if dz.power != math.inf and _diverges_at_zero(Asymptote(1 + w + p * dz.power, p * dz.log)):
        return "0"
    last = f.segments[-1]
    if math.isinf(last.hi):
        _, di = last.inf_asymptotes()
        if di.power != -math.inf and _diverges_at_inf(Asymptote(1 + w + p * di.power, p * di.log)):
            return "inf"
    return None


def diagnose(f: Profile, p: float, n: int) -> dict:
    """Where (if anywhere) ``||f||_{inf,p}`` and the radial energy diverge."""
    return {"ainfp": _ainfp_divergence(f, p, n), "radial_energy": _radial_divergence(f, p, n)}


def ainfp_power(f: Profile, p: float, n: int) -> float:
    """``||f||_{inf,p}^p = int_0^inf (f** - f*)^p t^{-p/n} dt``."""
    if not p >= 1:
        raise ValueError("p must be >= 1")
    if _ainfp_divergence(f, p, n) is not None:
        return math.inf
    total = 0.0
    starts = f.moments_at_starts()
    for seg, o0 in zip(f.segments, starts):
        total += seg.osc_integral(o0, p, n)
    if not math.isinf(f.support_bound):
        o_end = f._total_moment()
        if o_end > 0:
            # O constant beyond the support: closed-form tail
            e = p + p / n - 1
            total += o_end**p * f.support_bound ** (-e) / e
    return total


def ainfp_norm(f: Profile, p: float, n: int) -> float:
    """The class norm ``(int_0^inf (f** - f*)^p t^{-p/n} dt)^{1/p}``; ``inf`` on divergence."""
    return ainfp_power(f, p, n) ** (1 / p)


def radial_integral(f: Profile, p: float, n: int) -> float:
    """``int_0^inf s^{(n-1)p/n} |f*'(s)|^p ds``; ``inf`` for jumps or divergent ends."""
    if _radial_divergence(f, p, n) is not None:
        return math.inf
    return float(sum(seg.radial_integral(p, n) for seg in f.segments))


def radial_energy(f: Profile, p: float, n: int) -> float:
    """``||grad f°||_p`` by polar integration: ``n omega_n^{1/n} R_p^{1/p}``.

    This is also ``E_p(f°) = E_p^+(f°)``.
    """
    if not p >= 1:
        raise ValueError("p must be >= 1")
    r = radial_integral(f, p, n)
    return n * unit_ball_volume(n) ** (1 / n) * r ** (1 / p)


def sup_deficit(f: Profile, q: float, probes: int = 400) -> float:
    """``sup_{t>0} (||f||_inf - f*(t)) t^{1/q}``.

    A 400-point log grid over ``[1e-8 s0, 1e8 s0]`` (``s0`` the support
    scale) plus the profile's breakpoints, then golden-section refinement
    around the best probe. Ties go to the smallest ``t``.
    """
    if q == 0:
        raise ValueError("q must be nonzero")
    top = f.sup_value
    if math.isinf(top):
        return math.inf
    inv_q = 0.0 if math.isinf(q) else 1.0 / q
    tail_gap = top - f.limit_at_infinity()
    if inv_q == 0.0:
        return max(0.0, tail_gap)
    if inv_q > 0 and tail_gap > 0:
        return math.inf
    s0 = f.support_bound if not math.isinf(f.support_bound) else 1.0
    grid = np.geomspace(1e-8 * s0, 1e8 * s0, probes)
    bp = f.breakpoints()
    bp = bp[(bp > 0) & np.isfinite(bp)]
    grid = np.unique(np.concatenate([grid, bp, np.nextafter(bp, 0)]))

    def g(t):
        return (top - f(np.atleast_1d(t))) * np.atleast_1d(t) ** inv_q

    vals = g(grid)
    k = int(np.argmax(vals))
    best_t, best = float(grid[k]), float(vals[k])
    lo = grid[max(k - 1, 0)]
    hi = grid[min(k + 1, grid.size - 1)]
    a, b = math.log(lo), math.log(hi)
    ratio = (math.sqrt(5) - 1) / 2
    c, d = b - ratio * (b - a), a + ratio * (b - a)
    gc, gd = float(g(math.exp(c))[0]), float(g(math.exp(d))[0])
    for _ in range(200):
        if b - a < 1e-14:
            break
        if gc >= gd:
            b, d, gd = d, c, gc
            c = b - ratio * (b - a)
            gc = float(g(math.exp(c))[0])
        else:
            a, c, gc = c, d, gd
            d = a + ratio * (b - a)
            gd = float(g(math.exp(d))[0])
    for cand_t, cand in ((math.exp(c), gc), (math.exp(d), gd)):
        if cand > best:
            best_t, best = cand_t, cand
    return max(0.0, best)


# ---------------------------------------------------------------------------
# weighted Hardy inequality on sampled nonnegative functions


@dataclass(frozen=True, eq=False)
class SampledFunction:
    """Nonnegative function on ``(0, inf)``: linear on each ``[edges[k], edges[k+1])``.

    Zero after ``edges[-1]``; jumps allowed between pieces.
    """

    edges: np.ndarray
    start: np.ndarray
    end: np.ndarray

    def __post_init__(self):
        e = np.asarray(self.edges, dtype=float)
        s = np.asarray(self.start, dtype=float)
        t = np.asarray(self.end, dtype=float)
        if e[0] != 0 or np.any(np.diff(e) <= 0):
            raise ValueError("edges must start at 0 and increase")
        if s.shape != (e.size - 1,) or t.shape != s.shape:
            raise ValueError("need one start/end value per piece")
        if np.any(s < 0) or np.any(t < 0):
            raise ValueError("function must be nonnegative")
        object.__setattr__(self, "edges", e)
        object.__setattr__(self, "start", s)
        object.__setattr__(self, "end", t)

    @classmethod
    def steps(cls, edges, heights) -> "SampledFunction":
        h = np.asarray(heights, dtype=float)
        return cls(edges, h, h)

    @classmethod
    def linear(cls, knots, values) -> "SampledFunction":
        v = np.asarray(values, dtype=float)
        return cls(knots, v[:-1], v[1:])

    def __call__(self, s):
        s = np.asarray(s, dtype=float)
        k = np.clip(np.searchsorted(self.edges, s, side="right") - 1, 0, self.start.size - 1)
        w = (s - self.edges[k]) / (self.edges[k + 1] - self.edges[k])
        out = self.start[k] + w * (self.end[k] - self.start[k])
        return np.where((s >= 0) & (s < self.edges[-1]), out, 0.0)

    def cumulative(self, s: float) -> float:
        """``int_0^s g``."""
        e = self.edges
        full = 0.5 * (self.start + self.end) * np.diff(e)
        k = int(np.clip(np.searchsorted(e, s, side="right") - 1, 0, self.start.size))
        if k >= self.start.size:
            return float(full.sum())
        part = 0.5 * (self.start[k] + float(self(s))) * (s - e[k])
        return float(full[:k].sum() + part)


class HardyMargin(NamedTuple):
    margin: float
    lhs: float
    rhs: float
    divergent: bool


def hardy_inequality_margin(g: SampledFunction, p: float, n: int) -> HardyMargin:
    """Signed margin of the weighted Hardy inequality used for the sharp constant.

    ``margin = C int g^p s^{-p/n} ds - int ((1/t) int_0^t g)^p t^{-p/n} dt``
    with ``C = (p / (p + p/n - 1))^p``.
    """
    if not p >= 1:
        raise ValueError("p must be >= 1")
    w = -p / n
    const = (p / (p + p / n - 1)) ** p
    e = g.edges
    g0 = g.start[0]
    if g0 > 0 and w <= -1:
        return HardyMargin(math.nan, math.inf, math.inf, True)

    kw = dict(epsabs=0.0, epsrel=1e-12, limit=200)
    rhs = 0.0
    lhs = 0.0
    for k in range(g.start.size):
        a, b = e[k], e[k + 1]
        sa, sb = g.start[k], g.end[k]
        if sa == 0 and sb == 0:
            continue

        def gk(s, a=a, b=b, sa=sa, sb=sb):
            return sa + (sb - sa) * (s - a) / (b - a)

        if a == 0 and sa > 0:
            val, _ = integrate.quad(lambda s: gk(s) ** p, a, b, weight="alg", wvar=(w, 0.0), **kw)
        else:
            val, _ = integrate.quad(lambda s: gk(s) ** p * s**w, a, b, **kw)
        rhs += val
    for k in range(g.start.size):
        a, b = e[k], e[k + 1]
        base = g.cumulative(a)
        sa, sb = g.start[k], g.end[k]

        def avg(t, a=a, b=b, sa=sa, sb=sb, base=base):
            if t == 0:
                return sa  # limit of the running average at the origin
            gt = sa + (sb - sa) * (t - a) / (b - a)
            return (base + 0.5 * (sa + gt) * (t - a)) / t

        if a == 0 and sa > 0:
            val, _ = integrate.quad(lambda t: avg(t) ** p, a, b, weight="alg", wvar=(w, 0.0), **kw)
        else:
            if base == 0 and sa == 0 and sb == 0:
                continue
            val, _ = integrate.quad(lambda t: avg(t) ** p * t**w, a, b, **kw)
        lhs += val
    total = g.cumulative(e[-1])
    if total > 0:
        ex = p + p / n - 1
        lhs += total**p * e[-1] ** (-ex) / ex
    return HardyMargin(const * rhs - lhs, lhs, const * rhs, False)
