"""Scalar constants: unit-ball volumes, sphere moments, exponent bookkeeping.

Extended reals are plain floats: ``math.inf`` stands for ``q = +inf`` at
``p = n`` and for ``p' = +inf`` at ``p = 1``, with ``1/inf = 0``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

from scipy import integrate, special

__all__ = [
    "ExponentSet",
    "exponents",
    "unit_ball_volume",
    "sobolev_conjugate",
    "holder_conjugate",
    "ip_constant",
    "ip_closed_form",
    "sharp_constant",
    "alpha_constant",
    "hsp_constant",
    "bmr_constant",
]


def _recip(x: float) -> float:
    return 0.0 if math.isinf(x) else 1.0 / x


@dataclass(frozen=True)
class ExponentSet:
    """The exponents attached to a pair ``(p, n)``."""

    p: float
    n: int
    q: float
    p_prime: float

    @property
    def inv_q(self) -> float:
        return _recip(self.q)

    @property
    def regime(self) -> str:
        """``"subcritical"`` (p < n), ``"critical"`` (p = n) or ``"supercritical"``."""
        if self.p < self.n:
            return "subcritical"
        if self.p == self.n:
            return "critical"
        return "supercritical"


def _check_pn(p: float, n: int, min_n: int = 1) -> None:
    if not p >= 1:
        raise ValueError(f"p must be >= 1, got {p}")
    if int(n) != n or n < min_n:
        raise ValueError(f"n must be an integer >= {min_n}, got {n}")


@lru_cache(maxsize=None)
def unit_ball_volume(n: int) -> float:
    """Lebesgue measure of the Euclidean unit ball in R^n."""
    if int(n) != n or n < 1:
        raise ValueError(f"n must be a positive integer, got {n}")
    return math.pi ** (n / 2) / math.gamma(n / 2 + 1)


@lru_cache(maxsize=None)
def sobolev_conjugate(p: float, n: int) -> float:
    """The exponent ``q`` with ``1/q = 1/p - 1/n`` (``+inf`` at ``p == n``)."""
    _check_pn(p, n)
    if p == n:
        return math.inf
    # written as a single quotient so that e.g. (3, 2) gives exactly -6
    return p * n / (n - p)


def holder_conjugate(p: float) -> float:
    """``p' = p/(p-1)``, ``+inf`` at ``p == 1``."""
    if not p >= 1:
        raise ValueError(f"p must be >= 1, got {p}")
    return math.inf if p == 1 else p / (p - 1)


def exponents(p: float, n: int) -> ExponentSet:
    return ExponentSet(float(p), int(n), sobolev_conjugate(p, n), holder_conjugate(p))


@lru_cache(maxsize=None)
def ip_constant(p: float, n: int) -> float:
    """``I_p = (int_{S^{n-1}} |u_1|^p du)^{1/p}`` for the normalized measure.

    Evaluated as a one-dimensional integral against the density of the first
    coordinate of a uniform point on the sphere,
    ``c_n (1 - x^2)^{(n-3)/2}`` on ``[-1, 1]``. The endpoint factor
    ``(1 - x)^{(n-3)/2}`` is handled by QUADPACK's algebraic weight, so the
    n = 2 arcsine singularity costs nothing.
    """
    _check_pn(p, n, min_n=2)
    beta = (n - 3) / 2
    c_n = math.exp(special.gammaln(n / 2) - special.gammaln((n - 1) / 2)) / math.sqrt(math.pi)
    val, _ = integrate.quad(
        lambda x: x**p * (1 + x) ** beta,
        0.0,
        1.0,
        weight="alg",
        wvar=(0.0, beta),
        epsabs=0.0,
        epsrel=1e-13,
        limit=200,
    )
    return (2 * c_n * val) ** (1 / p)


def ip_closed_form(p: float, n: int) -> float:
    """Gamma-function value of ``I_p``; used to cross-check :func:`ip_constant`."""
    _check_pn(p, n, min_n=2)
    log_moment = (
        special.gammaln(n / 2)
        + special.gammaln((p + 1) / 2)
        - 0.5 * math.log(math.pi)
        - special.gammaln((n + p) / 2)
    )
    return math.exp(log_moment / p)


@lru_cache(maxsize=None)
def sharp_constant(p: float, n: int) -> float:
    """Best constant ``(1 - 1/q) n omega_n^{1/n}`` linking E_p^+ and the A_{inf,p} norm."""
    _check_pn(p, n)
    one_minus_inv_q = 1.0 - 1.0 / p + 1.0 / n
    return one_minus_inv_q * n * unit_ball_volume(n) ** (1 / n)


def bmr_constant(n: int) -> float:
    """The older constant ``(n-1) omega_n^{1/n}`` for the p = n case."""
    return (n - 1) * unit_ball_volume(n) ** (1 / n)


@lru_cache(maxsize=None)
def alpha_constant(p: float, n: int) -> float:
    """``alpha_{p,n} = ((p(1-1/q))^{p'/p} + |q|/p')^{1/p'}`` for ``p > n``."""
    _check_pn(p, n)
    if not p > n:
        raise ValueError(f"alpha_constant needs p > n, got p={p}, n={n}")
    q = sobolev_conjugate(p, n)
    pp = holder_conjugate(p)
    return ((p * (1 - 1 / q)) ** (pp / p) + abs(q) / pp) ** (1 / pp)


def hsp_constant(p: float, n: int) -> float:
    """``(p'/|q|)^{1/p'} n omega_n^{1/n}``, the support-dependent bound for ``p > n``."""
    if not p > n:
        raise ValueError(f"hsp_constant needs p > n, got p={p}, n={n}")
    q = sobolev_conjugate(p, n)
    pp = holder_conjugate(p)
    return (pp / abs(q)) ** (1 / pp) * n * unit_ball_volume(n) ** (1 / n)
