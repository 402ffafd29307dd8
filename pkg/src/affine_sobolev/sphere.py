"""Quadrature on the unit sphere and the affine energies E_p, E_p^+.

Every rule stores its nodes as ``k`` directions followed by their ``k``
antipodes, so a single matrix product yields both ``||D_u^+ f||_p`` and
``||D_{-u}^+ f||_p`` per pair, and ``||D_u f||_p^p`` is their sum.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy import special, stats

from .constants import ip_constant
from .fields import SampledField, gradient

__all__ = [
    "SphereRule",
    "sphere_rule",
    "DEFAULT_RESOLUTION",
    "EnergyResult",
    "DirectionalNorms",
    "directional_norms",
    "energy",
    "energies",
    "coarse_rule",
]

DEFAULT_RESOLUTION = {2: 2048, 3: 4096, 4: 16384}
DEGENERACY_THRESHOLD = 1e-12
_GOLDEN = (1 + 5**0.5) / 2


@dataclass(frozen=True, eq=False)
class SphereRule:
    """Nodes ``u_i`` and positive weights ``w_i`` summing to one.

    The first half of the nodes are paired with the second half by
    ``u_{i + k} = -u_i``.
    """

    n: int
    nodes: np.ndarray
    weights: np.ndarray
    resolution: int
    seed: int

    def __post_init__(self):
        m = self.nodes.shape[0]
        if m % 2 or self.nodes.shape[1] != self.n:
            raise ValueError("nodes must come in antipodal pairs")
        k = m // 2
        if not np.array_equal(self.nodes[k:], -self.nodes[:k]) or not np.array_equal(
            self.weights[k:], self.weights[:k]
        ):
            raise ValueError("second half of the nodes must be the antipodes of the first")

    @property
    def half(self) -> int:
        return self.nodes.shape[0] // 2

    def integrate(self, values: np.ndarray) -> float:
        return float(np.dot(self.weights, values))


def _pair(half: np.ndarray) -> np.ndarray:
    half = half / np.linalg.norm(half, axis=1, keepdims=True)
    return np.concatenate([half, -half])


def _circle(resolution: int) -> np.ndarray:
    k = resolution // 2
    theta = 2 * math.pi * (np.arange(k) + 0.5) / resolution
    return np.column_stack([np.cos(theta), np.sin(theta)])


def _fibonacci(resolution: int) -> np.ndarray:
    # spiral on the upper hemisphere; the antipodes fill the lower one
    k = resolution // 2
    i = np.arange(k)
    z = 1 - (i + 0.5) / k
    r = np.sqrt(np.clip(1 - z * z, 0, None))
    phi = 2 * math.pi * i / _GOLDEN
    return np.column_stack([r * np.cos(phi), r * np.sin(phi), z])


def _random_rotation(n: int, seed: int) -> np.ndarray:
    if seed == 0:
        return np.eye(n)
    return stats.special_ortho_group.rvs(n, random_state=np.random.default_rng(seed))


def _qmc_s3(resolution: int, seed: int) -> np.ndarray:
    k = resolution // 2
    sob = stats.qmc.Sobol(d=4, scramble=True, seed=np.random.default_rng(seed))
    m = int(math.ceil(math.log2(k)))
    pts = sob.random_base2(m)[:k]
    # normal quantiles of a low-discrepancy cube sample, projected radially
    return special.ndtri(np.clip(pts, 1e-15, 1 - 1e-15))


def sphere_rule(n: int, resolution: int | None = None, seed: int = 0) -> SphereRule:
    """Equal-weight antipodal rule on ``S^{n-1}``.

    n = 2 is the offset trapezoid rule (exact for trigonometric polynomials
    of degree < ``resolution``); n = 3 a Fibonacci spiral; n = 4 a scrambled
    Sobol sample mapped to the sphere. A nonzero seed rotates the n = 3 spiral
    and reseeds the n = 4 scrambling.
    """
    if n not in DEFAULT_RESOLUTION:
        raise ValueError(f"sphere rules are available for n in 2..4, got {n}")
    res = DEFAULT_RESOLUTION[n] if resolution is None else int(resolution)
    if res < 4 or res % 2:
        raise ValueError("resolution must be an even integer >= 4")
    if n == 2:
        half = _circle(res)
    elif n == 3:
        half = _fibonacci(res) @ _random_rotation(3, seed).T
    else:
        half = _qmc_s3(res, seed)
    nodes = _pair(half)
    weights = np.full(nodes.shape[0], 1.0 / nodes.shape[0])
    return SphereRule(n, nodes, weights, res, seed)


class DirectionalNorms(NamedTuple):
    """``||D_u^+ f||_p^p`` per node and ``||grad f||_p``."""

    plus_pow: np.ndarray
    full_pow: np.ndarray
    grad_norm: float


def _moment_polynomial(g: np.ndarray, nodes: np.ndarray, p: int) -> np.ndarray:
    """``sum_i <g_i, u>^p`` at every node through the order-p moment tensor."""
    n = g.shape[1]
    out = np.zeros(nodes.shape[0])
    for combo in itertools.combinations_with_replacement(range(n), p):
        counts = np.bincount(combo, minlength=n)
        coef = math.factorial(p) / math.prod(math.factorial(c) for c in counts)
        mono_g = np.prod(g[:, list(combo)], axis=1).sum()
        mono_u = np.prod(nodes[:, list(combo)], axis=1)
        out += coef * mono_g * mono_u
    return out


def _positive_part_sums(g: np.ndarray, nodes: np.ndarray, p: float, cell_block: int, node_block: int):
    """``sum_i max(<g_i, u>, 0)^p`` per node, blocked to keep temporaries small."""
    out = np.zeros(nodes.shape[0])
    integer = p == int(p) and p <= 8
    for c0 in range(0, g.shape[0], cell_block):
        gb = g[c0 : c0 + cell_block]
        for s in range(0, nodes.shape[0], node_block):
            x = gb @ nodes[s : s + node_block].T
            np.maximum(x, 0.0, out=x)
            if p == 1:
                y = x
            elif integer:
                y = x * x
                for _ in range(int(p) - 2):
                    y *= x
            else:
                y = np.power(x, p, out=x)
            out[s : s + node_block] += y.sum(axis=0)
    return out


def directional_norms(
    f: SampledField,
    p: float,
    rule: SphereRule,
    grad: np.ndarray | None = None,
    cell_block: int = 16384,
    node_block: int = 128,
) -> DirectionalNorms:
    """p-th powers of ``||D_u^+ f||_p`` and ``||D_u f||_p`` at every node.

    For integer ``p <= 8`` the signed sum ``sum <g, u>^p`` is a polynomial in
    ``u`` and comes from the gradient moment tensor, so only the first half
    of the nodes needs a pass over the cells. Other exponents evaluate the
    positive part at all nodes.
    """
    if rule.n != f.n:
        raise ValueError("rule and field dimensions differ")
    g = gradient(f) if grad is None else grad
    flat = g.reshape(-1, f.n)
    mag = np.sqrt(np.sum(flat * flat, axis=1))
    vol = f.cell_volume
    grad_norm = float((np.sum(mag**p) * vol) ** (1 / p))
    if grad_norm == 0:
        z = np.zeros(rule.nodes.shape[0])
        return DirectionalNorms(z, z, 0.0)
    # a cell below 1e-13 max|grad f| changes no sum beyond rounding
    flat = flat[mag > 1e-13 * mag.max()]
    k = rule.half
    if p == int(p) and p <= 8:
        ip = int(p)
        pos = _positive_part_sums(flat, rule.nodes[:k], p, cell_block, node_block)
        signed = _moment_polynomial(flat, rule.nodes[:k], ip)
        if ip % 2:
            neg = pos - signed
        else:
            neg = np.maximum(signed - pos, 0.0)
    else:
        both = _positive_part_sums(flat, rule.nodes, p, cell_block, node_block)
        pos, neg = both[:k], both[k:]
    neg = np.maximum(neg, 0.0)
    plus = np.concatenate([pos, neg]) * vol
    full = np.concatenate([pos + neg, pos + neg]) * vol
    return DirectionalNorms(plus, full, grad_norm)


class EnergyResult(NamedTuple):
    value: float
    rule_tolerance: float
    degenerate: bool


def _affine_mean(norm_pow: np.ndarray, weights: np.ndarray, p: float, n: int) -> float:
    """``(sum w ||.||_p^{-n})^{-1/n}`` computed in log space."""
    logs = np.log(norm_pow) / p
    return float(math.exp(-special.logsumexp(-n * logs, b=weights) / n))


def coarse_rule(rule: SphereRule) -> SphereRule | None:
    """The rule of half the resolution with the same seed, used for error estimates."""
    res = rule.resolution // 2
    if res < 4 or res % 2:
        return None
    return sphere_rule(rule.n, res, rule.seed)


def _coarse_index(rule: SphereRule, coarse: SphereRule) -> np.ndarray | None:
    # nested rules (the n = 4 Sobol prefixes) reuse the fine-rule norms
    kc = coarse.half
    if kc <= rule.half and np.array_equal(coarse.nodes[:kc], rule.nodes[:kc]):
        return np.concatenate([np.arange(kc), rule.half + np.arange(kc)])
    return None


def _coarse_norms(f, p, rule, grad, fine: DirectionalNorms):
    coarse = coarse_rule(rule)
    if coarse is None:
        return None, None
    idx = _coarse_index(rule, coarse)
    if idx is not None:
        return coarse, DirectionalNorms(fine.plus_pow[idx], fine.full_pow[idx], fine.grad_norm)
    return coarse, directional_norms(f, p, coarse, grad)


def _energy_from_norms(
    norm_pow: np.ndarray,
    grad_norm: float,
    p: float,
    rule: SphereRule,
    factor: float,
    coarse: SphereRule | None = None,
    coarse_pow: np.ndarray | None = None,
) -> EnergyResult:
    n = rule.n
    if grad_norm == 0 or np.min(norm_pow) ** (1 / p) < DEGENERACY_THRESHOLD * grad_norm:
        return EnergyResult(0.0, 0.0, True)
    scale = factor / ip_constant(p, n)
    value = scale * _affine_mean(norm_pow, rule.weights, p, n)
    if coarse is not None and np.min(coarse_pow) > 0:
        # twice the change from the half-resolution rule; convergence is not
        # monotone for kinked integrands (p = 1), hence the factor
        tol = 2 * abs(scale * _affine_mean(coarse_pow, coarse.weights, p, n) - value)
    else:
        k = rule.half
        subs = []
        for parity in (0, 1):
            idx = np.arange(parity, k, 2)
            idx = np.concatenate([idx, idx + k])
            w = rule.weights[idx] / rule.weights[idx].sum()
            subs.append(scale * _affine_mean(norm_pow[idx], w, p, n))
        tol = max(abs(s - value) for s in subs)
    return EnergyResult(value, tol, False)


def energy(
    f: SampledField,
    p: float,
    rule: SphereRule | None = None,
    plus: bool = False,
    grad: np.ndarray | None = None,
) -> EnergyResult:
    """``E_p(f)``, or ``E_p^+(f)`` with ``plus``.

    A direction whose norm falls below ``1e-12 ||grad f||_p`` (or a zero
    field) gives value 0 with ``degenerate`` set. ``rule_tolerance`` is twice
    the difference to the same energy on the half-resolution rule.
    """
    full, plus_res, _ = energies(f, p, rule, grad)
    return plus_res if plus else full


def energies(
    f: SampledField, p: float, rule: SphereRule | None = None, grad: np.ndarray | None = None
) -> tuple[EnergyResult, EnergyResult, float]:
    """``(E_p, E_p^+, ||grad f||_p)`` from one pass over the nodes."""
    if not p >= 1:
        raise ValueError("p must be >= 1")
    rule = sphere_rule(f.n) if rule is None else rule
    g = gradient(f) if grad is None else grad
    d = directional_norms(f, p, rule, g)
    coarse, dc = _coarse_norms(f, p, rule, g, d) if d.grad_norm > 0 else (None, None)
    cf = None if dc is None else dc.full_pow
    cp = None if dc is None else dc.plus_pow
    full = _energy_from_norms(d.full_pow, d.grad_norm, p, rule, 1.0, coarse, cf)
    plus = _energy_from_norms(d.plus_pow, d.grad_norm, p, rule, 2 ** (1 / p), coarse, cp)
    return full, plus, d.grad_norm
