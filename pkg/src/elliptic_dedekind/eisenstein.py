"""Hecke-regularised Eisenstein series E_1(z) and E_2(0) for the lattice O_K = Z + Z*w.

With tau = w, q = exp(i*pi*tau) and A = Im(tau) (the covolume of O_K):

    eta_1   = (pi^2/3) (1 - 24 sum_n n q^(2n) / (1 - q^(2n)))     quasi-period of 1
    zeta(z) = eta_1 z + pi cot(pi z) + 4 pi sum_n q^(2n)/(1 - q^(2n)) sin(2 pi n z)
    s_2     = E_2(0) = eta_1 - pi/A
    E_1(z)  = zeta(z) - s_2 z - (pi/A) conj(z)

E_1 is odd and exactly lattice-periodic; E_1(0) is taken to be 0.
"""

from __future__ import annotations

import cmath
import logging
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .errors import BudgetExceededError, PoleError, PrecisionError, ZeroModulusError
from .qfield import CosetTable, FieldContext, QuadInt, coset_reps, lattice_points

logger = logging.getLogger(__name__)

# Rounding allowance added to the series tail in err_bound.
ROUNDING_BOUND = 1e-13
# Points closer than this to O_K count as lattice points in e1.
LATTICE_TOL = 1e-12


@dataclass
class EvaluationCounter:
    """Counts E_1 evaluations."""

    count: int = 0

    def add(self, k: int = 1) -> None:
        self.count += k

    def reset(self) -> None:
        self.count = 0


@dataclass(frozen=True)
class EisensteinContext:
    """Lattice constants and truncation data for one field."""

    K: FieldContext
    eta1: complex
    s2: complex
    pi_over_A: float
    prec: float
    n_terms: int
    err_bound: float
    coeffs: tuple[complex, ...] = field(repr=False)
    counter: EvaluationCounter = field(default_factory=EvaluationCounter, compare=False)

    @property
    def tau(self) -> complex:
        return self.K.omega


def _series_tail(r: float, n: int) -> float:
    """Bound for the zeta series terms beyond n when |Im z| <= Im(tau)/2."""
    return 4 * math.pi * r ** (n + 1) / ((1 - r) * (1 - r * r))


def make_context(K: FieldContext, prec: float = 1e-10) -> EisensteinContext:
    """Compute eta_1 and s_2 and pick the number of series terms for prec."""
    tau = K.omega
    q = cmath.exp(1j * math.pi * tau)
    r = abs(q)

    eta_sum = 0j
    n = 1
    while True:
        q2n = q ** (2 * n)
        term = n * q2n / (1 - q2n)
        eta_sum += term
        if abs(term) < 1e-18:
            break
        n += 1
    eta1 = (math.pi**2 / 3) * (1 - 24 * eta_sum)
    pi_over_A = math.pi / K.area
    s2 = eta1 - pi_over_A

    n_terms = 1
    while _series_tail(r, n_terms) > min(prec, 1e-6) / 100:
        n_terms += 1
    err_bound = _series_tail(r, n_terms) + ROUNDING_BOUND
    if prec < err_bound:
        raise PrecisionError(
            f"requested precision {prec:g} is below the certified error {err_bound:.2e}"
        )
    coeffs = tuple(
        4 * math.pi * q ** (2 * k) / (1 - q ** (2 * k)) for k in range(1, n_terms + 1)
    )

    ctx = EisensteinContext(
        K=K,
        eta1=complex(eta1),
        s2=complex(s2),
        pi_over_A=pi_over_A,
        prec=prec,
        n_terms=n_terms,
        err_bound=err_bound,
        coeffs=coeffs,
    )
    logger.debug(f"Eisenstein context D={K.D}: eta1={eta1}, s2={s2}, terms={n_terms}")
    return ctx


def eta_omega(ctx: EisensteinContext) -> complex:
    """Quasi-period of w from the Legendre relation eta_1 w - eta_w = 2 pi i."""
    return ctx.eta1 * ctx.tau - 2j * math.pi


def e2_zero(ctx: EisensteinContext) -> complex:
    """E_2(0) = eta_1 - pi/A."""
    return ctx.s2


def _reduce(z: np.ndarray, K: FieldContext) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Split z = z' + m + n*w with z' centred in the period parallelogram."""
    n = np.round(z.imag / K.omega.imag)
    z1 = z - n * K.omega
    m = np.round(z1.real)
    return z1 - m, m, n


def _zeta_reduced(zr: np.ndarray, ctx: EisensteinContext) -> np.ndarray:
    """zeta on centred points (no lattice points allowed)."""
    pz = np.pi * zr
    out = ctx.eta1 * zr + np.pi * np.cos(pz) / np.sin(pz)
    for k, c in enumerate(ctx.coeffs, start=1):
        out = out + c * np.sin(2 * k * pz)
    return out


def weierstrass_zeta(z: complex, ctx: EisensteinContext) -> complex:
    """Weierstrass zeta of O_K at z, via argument reduction and the q-series."""
    zr, m, n = _reduce(np.asarray([complex(z)]), ctx.K)
    if abs(zr[0]) < ctx.prec:
        raise PoleError(f"zeta evaluated within {ctx.prec:g} of a lattice point ({z})")
    value = _zeta_reduced(zr, ctx)[0]
    return complex(value + m[0] * ctx.eta1 + n[0] * eta_omega(ctx))


def _e1_reduced(zr: np.ndarray, ctx: EisensteinContext) -> np.ndarray:
    out = np.zeros(zr.shape, dtype=complex)
    mask = np.abs(zr) >= LATTICE_TOL
    if np.any(mask):
        pts = zr[mask]
        out[mask] = _zeta_reduced(pts, ctx) - ctx.s2 * pts - ctx.pi_over_A * np.conj(pts)
    ctx.counter.add(int(zr.size))
    return out


def e1(z: complex, ctx: EisensteinContext) -> complex:
    """E_1(z) = zeta(z) - s_2 z - (pi/A) conj(z); 0 on the lattice."""
    zr, _, _ = _reduce(np.asarray([complex(z)]), ctx.K)
    return complex(_e1_reduced(zr, ctx)[0])


def e1_many(zs: Sequence[complex] | np.ndarray, ctx: EisensteinContext) -> np.ndarray:
    """Vectorised E_1."""
    zr, _, _ = _reduce(np.asarray(zs, dtype=complex), ctx.K)
    return _e1_reduced(zr, ctx)


def _centred(v: np.ndarray, N: int) -> np.ndarray:
    return np.mod(v + N // 2, N) - N // 2


def e1_table(
    c: QuadInt,
    ctx: EisensteinContext,
    budget: Optional[int] = None,
    table: Optional[CosetTable] = None,
) -> np.ndarray:
    """E_1(mu/c) for every coset representative mu, in CosetTable order.

    mu/c = mu*conj(c)/N(c) is reduced modulo O_K in exact integer arithmetic, so the
    entry for mu = 0 is exactly 0.
    """
    if not c:
        raise ZeroModulusError("E_1 table for the zero modulus")
    N = c.norm()
    if budget is not None and N > budget:
        raise BudgetExceededError(N, budget)
    table = table or coset_reps(c)
    K = ctx.K
    cb = c.conjugate()
    i, j = table.rep_x, table.rep_y
    X = i * cb.x - K.norm_w * j * cb.y
    Y = i * cb.y + j * cb.x + K.trace * j * cb.y
    zr = (_centred(X, N) + _centred(Y, N) * K.omega) / N
    values = _e1_reduced(zr, ctx)
    values[0] = 0.0
    logger.debug(f"E_1 table for c={c}: {N} cosets")
    return values


# ----------------------------------------------------------------------------
# Direct lattice-sum oracles
# ----------------------------------------------------------------------------


def _smooth_cutoff(r: np.ndarray, R: float) -> np.ndarray:
    """C-infinity weight: 1 on [0, R/2], 0 beyond R."""
    u = np.clip(2 * r / R - 1, 0.0, 1.0)

    def bump(v: np.ndarray) -> np.ndarray:
        safe = np.where(v > 0, v, 1.0)
        return np.where(v > 0, np.exp(-1.0 / safe), 0.0)

    lo, hi = bump(1 - u), bump(u)
    return lo / (lo + hi)


def _nonzero_points(K: FieldContext, radius: float) -> np.ndarray:
    xs, ys = lattice_points(K, radius)
    pts = K.embed(xs, ys)
    return pts[(xs != 0) | (ys != 0)]


def e2_zero_direct(
    K: FieldContext,
    radius: float = 600.0,
    s_values: Sequence[float] = (0.2, 0.1, 0.05, 0.025),
) -> complex:
    """E_2(0) from the sums sum' x^-2 |x|^-s, extrapolated polynomially to s = 0.

    Each sum is taken over the disc of the given radius with a smooth radial cutoff.
    """
    pts = _nonzero_points(K, radius)
    r = np.abs(pts)
    base = _smooth_cutoff(r, radius) / pts**2
    s_arr = np.asarray(s_values, dtype=float)
    sums = np.array([np.sum(base * r ** (-s)) for s in s_arr])
    deg = len(s_arr) - 1
    re0 = np.polynomial.polynomial.polyfit(s_arr, sums.real, deg)[0]
    im0 = np.polynomial.polynomial.polyfit(s_arr, sums.imag, deg)[0]
    logger.debug(f"direct E_2(0) for D={K.D} over {pts.size} points: {re0}+{im0}j")
    return complex(re0, im0)


def e1_direct(z: complex, ctx: EisensteinContext, radius: float = 200.0) -> complex:
    """E_1 from the Weierstrass series summed over a smoothly cut-off disc."""
    zr, _, _ = _reduce(np.asarray([complex(z)]), ctx.K)
    w = complex(zr[0])
    if abs(w) < LATTICE_TOL:
        return 0j
    pts = _nonzero_points(ctx.K, radius)
    weight = _smooth_cutoff(np.abs(pts), radius)
    terms = 1 / (w - pts) + 1 / pts + w / pts**2
    zeta = 1 / w + np.sum(weight * terms)
    return complex(zeta - ctx.s2 * w - ctx.pi_over_A * w.conjugate())
