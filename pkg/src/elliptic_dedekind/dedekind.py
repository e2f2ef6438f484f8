"""Elliptic Dedekind sums and the Sczech homomorphism on GL_2(O_K).

    D(a, c)  = (1/c) sum_{mu in O_K/cO_K} E_1(a*mu/c) E_1(mu/c)
    D~(a, c) = D(a, c) / (i sqrt|d_K| E_2(0))

    Phi(A) = E_2(0) I(A(inf) - det(A) A^-1(inf)) - D(a, c)   if c != 0
    Phi(A) = E_2(0) I(A(0))                                  if c == 0

with I(z) = z - conj(z).
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .eisenstein import EisensteinContext, e1_table
from .errors import BudgetExceededError, NormalizationUndefinedError, NotInvertibleError
from .models import DedekindReport, PhiCheckReport, cpair
from .qfield import FieldContext, KElement, QuadInt, coset_reps, elements_by_norm

logger = logging.getLogger(__name__)

# |E_2(0)| below this means the normalization is undefined (D = 1, 3).
S2_ZERO_TOL = 1e-9
SCALING_TOL = 1e-6
PHI_TOL = 1e-6


def imag_part_operator(z: complex) -> complex:
    """I(z) = z - conj(z) = 2i Im(z)."""
    return complex(0.0, 2 * complex(z).imag)


def normalization_defined(ctx: EisensteinContext) -> bool:
    return abs(ctx.s2) > S2_ZERO_TOL


@dataclass(frozen=True)
class DedekindResult:
    """D(a, c) with its normalization (None when E_2(0) = 0)."""

    a: QuadInt
    c: QuadInt
    value: complex
    normalized: Optional[float]
    normalized_imag: Optional[float]
    ncosets: int
    err_bound: float

    def normalized_value(self) -> float:
        if self.normalized is None:
            raise NormalizationUndefinedError(
                f"E_2(0) = 0 for D={self.c.K.D}; the normalized sum is undefined"
            )
        return self.normalized

    def report(self) -> DedekindReport:
        return DedekindReport(
            D=self.c.K.D,
            a=str(self.a),
            c=str(self.c),
            ncosets=self.ncosets,
            value=cpair(self.value),
            normalized=self.normalized,
            normalized_imag=self.normalized_imag,
            err_bound=self.err_bound,
        )


def dedekind_sum(
    a: QuadInt,
    c: QuadInt,
    ctx: EisensteinContext,
    budget: Optional[int] = None,
    tables: Optional[dict[QuadInt, np.ndarray]] = None,
) -> DedekindResult:
    """D(a, c) from one E_1 table over O_K/cO_K and the permutation mu -> a*mu.

    Pass a dict as `tables` to reuse E_1 tables across calls with the same c.
    """
    K = ctx.K
    table = coset_reps(c)
    N = len(table)
    if budget is not None and N > budget:
        raise BudgetExceededError(N, budget)

    values = tables.get(c) if tables is not None else None
    if values is None:
        values = e1_table(c, ctx, budget, table)
        if tables is not None:
            tables[c] = values

    i, j = table.rep_x, table.rep_y
    X = a.x * i - K.norm_w * a.y * j
    Y = a.x * j + a.y * i + K.trace * a.y * j
    perm = table.reduce_many(X, Y)

    cc = c.to_complex()
    value = complex(np.sum(values[perm] * values) / cc)

    peak = float(np.max(np.abs(values))) if N > 1 else 0.0
    err_bound = N * (2 * peak * ctx.err_bound + ctx.err_bound**2 + 1e-16 * peak * peak) / abs(cc)

    normalized: Optional[float] = None
    normalized_imag: Optional[float] = None
    if normalization_defined(ctx):
        dt = value / (1j * K.sqrt_abs_disc * ctx.s2)
        normalized, normalized_imag = dt.real, dt.imag
        err_bound = err_bound / abs(K.sqrt_abs_disc * ctx.s2)

    logger.debug(f"D({a}, {c}) = {value} over {N} cosets")
    return DedekindResult(
        a=a,
        c=c,
        value=value,
        normalized=normalized,
        normalized_imag=normalized_imag,
        ncosets=N,
        err_bound=err_bound,
    )


def scaling_check(
    a: QuadInt,
    c: QuadInt,
    lam: QuadInt,
    ctx: EisensteinContext,
    budget: Optional[int] = None,
) -> bool:
    """D(a, c) = D(lam*a, lam*c) for nonzero lam."""
    if not lam:
        raise ValueError("scaling factor must be nonzero")
    lhs = dedekind_sum(a, c, ctx, budget).value
    rhs = dedekind_sum(lam * a, lam * c, ctx, budget).value
    residual = abs(lhs - rhs)
    logger.debug(f"scaling by {lam}: |D(a,c) - D(la,lc)| = {residual:.3e}")
    return residual < SCALING_TOL


# ----------------------------------------------------------------------------
# 2x2 matrices over O_K
# ----------------------------------------------------------------------------


@dataclass(frozen=True)
class Mat2O:
    """[[a, b], [c, d]] with entries in O_K."""

    a: QuadInt
    b: QuadInt
    c: QuadInt
    d: QuadInt

    @property
    def K(self) -> FieldContext:
        return self.a.K

    @classmethod
    def identity(cls, K: FieldContext) -> Mat2O:
        return cls(K.one, K.zero, K.zero, K.one)

    @classmethod
    def T(cls, u: QuadInt) -> Mat2O:
        K = u.K
        return cls(K.one, u, K.zero, K.one)

    @classmethod
    def quarter_turn(cls, K: FieldContext) -> Mat2O:
        """[[0, -1], [1, 0]]."""
        return cls(K.zero, -K.one, K.one, K.zero)

    @classmethod
    def from_k(cls, a: KElement, b: KElement, c: KElement, d: KElement) -> Mat2O:
        """Build from K-elements; raises ValueError unless all are integral."""
        return cls(a.to_quadint(), b.to_quadint(), c.to_quadint(), d.to_quadint())

    def det(self) -> QuadInt:
        return self.a * self.d - self.b * self.c

    def __matmul__(self, other: Mat2O) -> Mat2O:
        return Mat2O(
            self.a * other.a + self.b * other.c,
            self.a * other.b + self.b * other.d,
            self.c * other.a + self.d * other.c,
            self.c * other.b + self.d * other.d,
        )

    def inverse(self) -> Mat2O:
        det = self.det()
        if not self.K.is_unit(det):
            raise NotInvertibleError(f"det = {det} is not a unit of O_K")
        # det^-1 = conj(det) for a unit.
        inv = det.conjugate()
        return Mat2O(inv * self.d, -(inv * self.b), -(inv * self.c), inv * self.a)

    def apply_inf(self) -> Optional[KElement]:
        """A(inf) = a/c, or None for infinity."""
        if not self.c:
            return None
        return self.a / self.c

    def apply_zero(self) -> Optional[KElement]:
        """A(0) = b/d, or None for infinity."""
        if not self.d:
            return None
        return self.b / self.d

    def apply(self, z: complex) -> complex:
        return (self.a.to_complex() * z + self.b.to_complex()) / (
            self.c.to_complex() * z + self.d.to_complex()
        )

    def entries(self) -> list[str]:
        return [str(self.a), str(self.b), str(self.c), str(self.d)]

    def __str__(self) -> str:
        return f"[[{self.a}, {self.b}], [{self.c}, {self.d}]]"


def phi(
    A: Mat2O,
    ctx: EisensteinContext,
    budget: Optional[int] = None,
    tables: Optional[dict[QuadInt, np.ndarray]] = None,
) -> complex:
    """Sczech's Phi on GL_2(O_K), in its Moebius form."""
    det = A.det()
    if not A.K.is_unit(det):
        raise NotInvertibleError(f"Phi needs a unit determinant, got det = {det}")
    s2 = ctx.s2
    if not A.c:
        at_zero = A.apply_zero()
        assert at_zero is not None  # d is a unit when c = 0
        return s2 * imag_part_operator(at_zero.to_complex())
    # A(inf) - det*A^-1(inf) = (a + det*d)/c
    shifted = (A.a + det * A.d) / A.c
    d_sum = dedekind_sum(A.a, A.c, ctx, budget, tables).value
    return s2 * imag_part_operator(shifted.to_complex()) - d_sum


def random_sl2_word(
    K: FieldContext,
    rng: np.random.Generator,
    max_len: int = 8,
    max_u_norm: int = 10,
) -> Mat2O:
    """Product of at most max_len factors T^u (N(u) <= max_u_norm) and quarter turns."""
    xs, ys, _ = elements_by_norm(K, max_u_norm)
    J = Mat2O.quarter_turn(K)
    word = Mat2O.identity(K)
    for _ in range(int(rng.integers(1, max_len + 1))):
        if rng.random() < 0.5:
            word = word @ J
        else:
            k = int(rng.integers(0, xs.size))
            word = word @ Mat2O.T(K.elt(int(xs[k]), int(ys[k])))
    return word


def _small_word(
    K: FieldContext, rng: np.random.Generator, max_c_norm: int, attempts: int = 200
) -> Mat2O:
    for _ in range(attempts):
        A = random_sl2_word(K, rng)
        if A.c.norm() <= max_c_norm:
            return A
    return Mat2O.identity(K)


def phi_check(
    K: FieldContext,
    trials: int,
    seed: int,
    ctx: EisensteinContext,
    max_c_norm: int = 200,
    budget: Optional[int] = None,
) -> PhiCheckReport:
    """|Phi(AB) - Phi(A) - Phi(B)| over random word pairs with small lower-left entries."""
    rng = np.random.default_rng(seed)
    tables: dict[QuadInt, np.ndarray] = {}
    worst = 0.0
    done = 0
    while done < trials:
        A = _small_word(K, rng, max_c_norm)
        B = _small_word(K, rng, max_c_norm)
        AB = A @ B
        if AB.c.norm() > max_c_norm:
            continue
        residual = abs(
            phi(AB, ctx, budget, tables) - phi(A, ctx, budget, tables) - phi(B, ctx, budget, tables)
        )
        worst = max(worst, residual)
        done += 1
        logger.debug(f"phi trial {done}: residual {residual:.3e}")

    identity_value = phi(Mat2O.identity(K), ctx)
    quarter_value = phi(Mat2O.quarter_turn(K), ctx)
    passed = worst < PHI_TOL and abs(identity_value) < 1e-10 and abs(quarter_value) < 1e-10
    logger.info(f"phi homomorphism over {trials} pairs (D={K.D}): max residual {worst:.3e}")
    return PhiCheckReport(
        D=K.D,
        trials=trials,
        seed=seed,
        max_c_norm=max_c_norm,
        max_residual=worst,
        identity_value=cpair(identity_value),
        quarter_turn_value=cpair(quarter_value),
        passed=passed,
    )
