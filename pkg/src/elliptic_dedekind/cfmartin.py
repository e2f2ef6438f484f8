"""Continued fractions over imaginary quadratic fields with a finite admissible set of denominators.

Each step picks (a, b) in O_K x B with |b*z_n - a| <= eps, widened to eps |b_n| when no
such pair keeps the convergents integral, and moves to the next remainder
z_{n+1} = b_n / (b*z_n - a). Convergent matrices are kept exactly:

    M_0 = I,   M_n = M_{n-1} S(a_n / b_{n-1}, b_n / b_{n-1}),   S(x, y) = [[x, 1], [y, 0]]

so that M_n = [[p_n, p_{n-1}], [q_n, q_{n-1}]] and det M_n = (-1)^n b_n. Only steps that keep
every M_n in M_2(O_K) are taken.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Iterator, Literal, Optional, Sequence

import mpmath
import numpy as np

from .errors import InadmissibleEpsilonError, InvariantViolationError, RationalPointReached
from .models import ExpansionReport, ExpansionStep, GrowthReport, cpair
from .qfield import (
    FieldContext,
    KElement,
    QuadInt,
    divides,
    lattice_ball,
    nearest_lattice_distance,
)

logger = logging.getLogger(__name__)

Policy = Literal["greedy", "unit_first"]
POLICIES: tuple[str, ...] = ("greedy", "unit_first")

# Relative size below which a step residual counts as zero.
RESIDUAL_TOL = 1e-12
# Relative slack for the floating-point bound checks.
BOUND_TOL = 1e-12


# ----------------------------------------------------------------------------
# Admissible sets
# ----------------------------------------------------------------------------


@dataclass(frozen=True)
class AdmissibleSet:
    """Denominator set B with its eps and mu = max |b|."""

    B: tuple[QuadInt, ...]
    eps: float
    mu: float
    threshold: float = 0.0

    @property
    def zeta(self) -> float:
        """(1 - eps^2)^2 / (4 eps^2 mu^2), the growth ratio of consecutive q_n."""
        e2 = self.eps * self.eps
        return (1 - e2) ** 2 / (4 * e2 * self.mu * self.mu)


def default_denominators(K: FieldContext) -> tuple[QuadInt, ...]:
    """B = {1, ..., floor(sqrt|d_K|)}."""
    return tuple(K.elt(k) for k in range(1, math.isqrt(abs(K.d_K)) + 1))


def _covering_distance(points: np.ndarray, B: Sequence[QuadInt], K: FieldContext) -> np.ndarray:
    best = np.full(points.shape, np.inf)
    for b in B:
        np.minimum(best, nearest_lattice_distance(points * b.to_complex(), K), out=best)
    return best


@lru_cache(maxsize=64)
def _covering_cached(
    D: int, coords: tuple[tuple[int, int], ...], grid: int, refine_top: int, levels: int
) -> float:
    from .qfield import make_field

    K = make_field(D)
    B = [K.elt(x, y) for x, y in coords]

    s = np.arange(grid, dtype=float) / grid
    S, T = np.meshgrid(s, s, indexing="ij")
    S, T = S.ravel(), T.ravel()
    values = _covering_distance(S + T * K.omega, B, K)
    best = float(values.max())

    offsets = np.linspace(-1.0, 1.0, 11)
    dS, dT = (g.ravel() for g in np.meshgrid(offsets, offsets, indexing="ij"))
    for idx in np.argsort(values)[-refine_top:]:
        s0, t0 = S[idx], T[idx]
        step = 1.0 / grid
        for _ in range(levels):
            ls, lt = s0 + step * dS, t0 + step * dT
            local = _covering_distance(ls + lt * K.omega, B, K)
            k = int(np.argmax(local))
            s0, t0 = ls[k], lt[k]
            best = max(best, float(local[k]))
            step /= 5

    # Lipschitz slack for the finest refinement cell.
    mu = max(abs(b.to_complex()) for b in B)
    return best + mu * step * (1 + abs(K.omega))


def covering_epsilon(
    B: Sequence[QuadInt],
    K: FieldContext,
    grid: int = 400,
    refine_top: int = 16,
    levels: int = 5,
) -> float:
    """Estimate sup_w min_{b, a} |b*w - a| over the fundamental parallelogram.

    Coarse grid search followed by local refinement around the largest values.
    """
    if not B:
        raise ValueError("admissible set B must be nonempty")
    coords = tuple(sorted((b.x, b.y) for b in B))
    value = _covering_cached(K.D, coords, grid, refine_top, levels)
    logger.debug(f"covering_epsilon D={K.D} B={[str(b) for b in B]}: {value:.6f}")
    return value


def default_admissible(
    K: FieldContext,
    eps: float,
    B: Sequence[QuadInt] | None = None,
    grid: int = 400,
) -> AdmissibleSet:
    """Admissible set for K; B defaults to {1, ..., floor(sqrt|d_K|)}."""
    B = tuple(B) if B else default_denominators(K)
    if any(not b for b in B):
        raise ValueError("admissible set contains 0")
    threshold = covering_epsilon(B, K, grid=grid)
    if not (0.0 < eps < 1.0) or eps <= threshold:
        raise InadmissibleEpsilonError(eps, threshold)
    mu = max(abs(b.to_complex()) for b in B)
    return AdmissibleSet(B=B, eps=float(eps), mu=mu, threshold=threshold)


# ----------------------------------------------------------------------------
# Step rule
# ----------------------------------------------------------------------------


def _mp_omega(K: FieldContext) -> mpmath.mpc:
    if K.trace == 1:
        return mpmath.mpc(mpmath.mpf(1) / 2, mpmath.sqrt(K.D) / 2)
    return mpmath.mpc(0, mpmath.sqrt(K.D))


def _mp_quad(u: QuadInt, omega: mpmath.mpc) -> mpmath.mpc:
    return u.x + u.y * omega


def _mp_k(k: KElement, omega: mpmath.mpc) -> mpmath.mpc:
    return _mp_quad(k.num, omega) / k.den


@dataclass(frozen=True)
class _Candidate:
    residual: float
    a: QuadInt
    b: QuadInt

    def key(self) -> tuple[float, int, tuple[int, int, int]]:
        return (round(self.residual, 12), self.b.norm(), self.a.sort_key())


def step_candidates(
    z_n: complex | mpmath.mpc,
    b_n: QuadInt,
    adm: AdmissibleSet,
    policy: Policy = "greedy",
    keeps_integral: Callable[[QuadInt, QuadInt], bool] | None = None,
    radius: float | None = None,
) -> list[tuple[QuadInt, QuadInt]]:
    """All (a, b) in O_K x B with |b*z_n - a| <= radius, best first.

    radius defaults to eps. greedy orders by residual, then smaller N(b), then the
    nearest_lattice order on a; unit_first moves the b = 1 candidates to the front.
    Pairs rejected by keeps_integral are dropped.
    """
    if policy not in POLICIES:
        raise ValueError(f"unknown step policy {policy!r}")
    K = b_n.K
    radius = adm.eps if radius is None else radius
    omega = _mp_omega(K)
    zmp = mpmath.mpc(z_n)
    zc = complex(zmp)

    feasible = False
    candidates: list[_Candidate] = []
    for b in adm.B:
        bz = _mp_quad(b, omega) * zmp
        for a in lattice_ball(b.to_complex() * zc, radius + 1e-9, K):
            r = float(abs(bz - _mp_quad(a, omega)))
            if r > radius:
                continue
            feasible = True
            if keeps_integral is None or keeps_integral(a, b):
                candidates.append(_Candidate(r, a, b))

    if not feasible:
        raise InvariantViolationError(
            f"no (a, b) with |b*z - a| <= {radius} at z={zc}; eps does not cover the plane",
            name="covering",
        )

    candidates.sort(key=_Candidate.key)
    if candidates:
        exact = min(candidates, key=lambda c: (c.residual, c.b.norm()))
        if exact.residual < RESIDUAL_TOL * max(1.0, abs(exact.b.to_complex() * zc)):
            raise RationalPointReached(exact.a, exact.b, exact.residual)
    if policy == "unit_first":
        candidates.sort(key=lambda c: c.b != K.one)
    return [(c.a, c.b) for c in candidates]


def cf_step(
    z_n: complex | mpmath.mpc,
    b_n: QuadInt,
    adm: AdmissibleSet,
    policy: Policy = "greedy",
    keeps_integral: Callable[[QuadInt, QuadInt], bool] | None = None,
) -> tuple[QuadInt, QuadInt, mpmath.mpc]:
    """Choose (a, b) with |b*z_n - a| <= eps and return (a, b, z_{n+1}).

    greedy: minimum residual, then smaller N(b), then the nearest_lattice order on a.
    unit_first: b = 1 whenever it is feasible, otherwise greedy.
    """
    options = step_candidates(z_n, b_n, adm, policy, keeps_integral)
    if not options:
        raise InvariantViolationError(
            f"no (a, b) within eps={adm.eps} of z_n={complex(z_n)} keeps the "
            "convergent matrix in O_K",
            name="integrality",
        )
    a, b = options[0]
    omega = _mp_omega(b_n.K)
    z_next = _mp_quad(b_n, omega) / (_mp_quad(b, omega) * mpmath.mpc(z_n) - _mp_quad(a, omega))
    return a, b, z_next


# ----------------------------------------------------------------------------
# Expansions
# ----------------------------------------------------------------------------

# Search nodes the integral expansion may visit per requested step.
SEARCH_NODES_PER_STEP = 200


@dataclass
class CFExpansion:
    """Coefficients, exact convergents and remainders of one expansion.

    Lists are indexed so that b[n] = b_n (n >= 0), a[n - 1] = a_n (n >= 1),
    P[n + 1] = p_n and Q[n + 1] = q_n (n >= -1), zrem[n] = z_n, residuals[n] = |q_n z - p_n|.
    """

    z: complex
    K: FieldContext
    adm: AdmissibleSet
    policy: str = "greedy"
    a: list[QuadInt] = field(default_factory=list)
    b: list[QuadInt] = field(default_factory=list)
    P: list[KElement] = field(default_factory=list)
    Q: list[KElement] = field(default_factory=list)
    zrem: list[Optional[mpmath.mpc]] = field(default_factory=list)
    residuals: list[mpmath.mpf] = field(default_factory=list)
    terminated: bool = False
    integral_upto: int = 0
    dps: int = 60

    def __len__(self) -> int:
        return len(self.a)

    def p(self, n: int) -> KElement:
        return self.P[n + 1]

    def q(self, n: int) -> KElement:
        return self.Q[n + 1]

    def matrix(self, n: int) -> tuple[KElement, KElement, KElement, KElement]:
        """Entries (p_n, p_{n-1}, q_n, q_{n-1}) of M_n."""
        return self.p(n), self.p(n - 1), self.q(n), self.q(n - 1)

    def det(self, n: int) -> KElement:
        p, pp, q, qp = self.matrix(n)
        return p * qp - pp * q

    def det_ok(self, n: int) -> bool:
        sign = 1 if n % 2 == 0 else -1
        return self.det(n) == KElement(self.b[n] * sign, 1)

    def is_integral(self, n: int) -> bool:
        return all(e.is_integral() for e in self.matrix(n))

    def convergent(self, n: int) -> KElement:
        return self.p(n) / self.q(n)

    def remainder_abs(self, n: int) -> float | None:
        zn = self.zrem[n]
        return None if zn is None else float(abs(zn))

    def approx_error(self, n: int) -> float:
        """|z - p_n/q_n|."""
        return float(self.residuals[n]) / abs(self.q(n).to_complex())

    def push(self, a: QuadInt, b: QuadInt) -> None:
        """Append the step (a, b): M_{n+1} = M_n S(a / b_n, b / b_n)."""
        p_n, p_prev, q_n, q_prev = self.matrix(len(self))
        b_n = self.b[-1]
        self.a.append(a)
        self.b.append(b)
        self.P.append((p_n * a + p_prev * b) / b_n)
        self.Q.append((q_n * a + q_prev * b) / b_n)

    def pop(self) -> None:
        """Drop the last step; remainders are left to the caller."""
        self.a.pop()
        self.b.pop()
        self.P.pop()
        self.Q.pop()


def _working_dps(base: int, *entries: KElement) -> int:
    digits = max(len(str(abs(v))) for e in entries for v in (e.num.x, e.num.y, e.den))
    return base + 2 * digits


def _close_remainder(exp: CFExpansion, n: int) -> Optional[mpmath.mpc]:
    """Append |q_n z - p_n| and z_n = (q_{n-1} z - p_{n-1}) / (p_n - q_n z)."""
    p_n, p_prev, q_n, q_prev = exp.matrix(n)
    with mpmath.workdps(_working_dps(exp.dps, p_n, p_prev, q_n, q_prev)):
        omega = _mp_omega(exp.K)
        zmp = mpmath.mpc(exp.z.real, exp.z.imag)
        num = _mp_k(q_prev, omega) * zmp - _mp_k(p_prev, omega)
        den = _mp_k(p_n, omega) - _mp_k(q_n, omega) * zmp
        zn = num / den if den != 0 else None
        exp.residuals.append(abs(den))
    exp.zrem.append(zn)
    return zn


def _integrality_filter(exp: CFExpansion, n: int) -> Callable[[QuadInt, QuadInt], bool] | None:
    b_n = exp.b[n]
    if b_n == exp.K.one:
        return None
    rows = [
        (e1.to_quadint(), e2.to_quadint())
        for e1, e2 in ((exp.p(n), exp.p(n - 1)), (exp.q(n), exp.q(n - 1)))
    ]

    def keeps(a: QuadInt, b: QuadInt) -> bool:
        return all(divides(b_n, e1 * a + e2 * b) for e1, e2 in rows)

    return keeps


def _integral_options(exp: CFExpansion, n: int, policy: Policy) -> list[tuple[QuadInt, QuadInt]]:
    """Steps out of state n that keep M_{n+1} in O_K.

    Pairs inside the eps-disc come first. After a step with b_n != 1 the disc
    widens to eps |b_n|, which still gives |z_{n+1}| >= 1/eps and
    |r_{n+1}| <= eps |r_n|.
    """
    b_n = exp.b[n]
    keeps = _integrality_filter(exp, n)
    with mpmath.workdps(_working_dps(exp.dps, *exp.matrix(n))):
        zn = exp.zrem[n]
        options = step_candidates(zn, b_n, exp.adm, policy, keeps)
        if b_n != exp.K.one:
            radius = exp.adm.eps * abs(b_n.to_complex())
            wide = step_candidates(zn, b_n, exp.adm, policy, keeps, radius=radius)
            options += [c for c in wide if c not in options]
    return options


def _backtrack(
    exp: CFExpansion, pending: list[list[tuple[QuadInt, QuadInt]]], n: int
) -> int:
    """Unwind from a dead state n to the latest untried step; returns the new state index."""
    while True:
        exp.residuals.pop()
        exp.zrem.pop()
        if not pending:
            raise InvariantViolationError(
                f"no expansion of z={exp.z} keeps its convergent matrices in O_K "
                f"(eps={exp.adm.eps})",
                name="integrality",
                index=n,
            )
        exp.pop()
        n -= 1
        if pending[-1]:
            exp.push(*pending[-1].pop(0))
            logger.debug(f"backtracked to step {n + 1}")
            return n + 1
        pending.pop()


def expand(
    z: complex,
    n_max: int,
    K: FieldContext,
    adm: AdmissibleSet,
    policy: Policy = "greedy",
    dps: int = 60,
) -> CFExpansion:
    """Expand z to at most n_max steps with every M_n in M_2(O_K).

    A step (a, b) out of state n must satisfy b_n | a p_n + b p_{n-1} and
    b_n | a q_n + b q_{n-1}. Candidates are tried in policy order; a state with
    no integral continuation, or whose step breaks a bound of check_growth, is
    abandoned for the next candidate of an earlier state.

    Remainders are recomputed from z and the exact convergents at every step as
    z_n = (q_{n-1} z - p_{n-1}) / (p_n - q_n z). Reaching a point of K ends the
    expansion early with terminated=True.
    """
    if n_max < 1:
        raise ValueError("n_max must be at least 1")
    if policy not in POLICIES:
        raise ValueError(f"unknown step policy {policy!r}")
    z = complex(z)
    one = KElement(K.one, 1)
    zero = KElement(K.zero, 1)
    exp = CFExpansion(
        z=z, K=K, adm=adm, policy=policy, b=[K.one], P=[zero, one], Q=[one, zero], dps=dps
    )

    pending: list[list[tuple[QuadInt, QuadInt]]] = []
    budget = SEARCH_NODES_PER_STEP * n_max
    visited = backtracks = 0
    n = 0
    while True:
        zn = _close_remainder(exp, n)
        if n == 0 or not _step_failures(exp, n):
            if n == n_max or zn is None:
                break
            visited += 1
            if visited > budget:
                raise InvariantViolationError(
                    f"no integral expansion of z={z} to depth {n_max} within {budget} "
                    "search nodes",
                    name="integrality",
                    index=n,
                )
            try:
                options = _integral_options(exp, n, policy)
            except RationalPointReached as signal:
                exp.push(signal.a, signal.b)
                exp.terminated = True
                exp.residuals.append(mpmath.mpf(0))
                exp.zrem.append(None)
                logger.info(f"expansion reached a point of K at step {n + 1}")
                break
            if options:
                pending.append(options[1:])
                exp.push(*options[0])
                n += 1
                continue
        backtracks += 1
        n = _backtrack(exp, pending, n)

    exp.integral_upto = len(exp)
    logger.info(
        f"expanded z={z} over D={K.D}: {len(exp)} steps, eps={adm.eps}, "
        f"{backtracks} backtracks"
    )
    return exp


# ----------------------------------------------------------------------------
# Monitors
# ----------------------------------------------------------------------------


def _bounds_at(
    exp: CFExpansion, n: int, qabs: Sequence[float]
) -> Iterator[tuple[str, float, bool]]:
    """Yield (name, ratio, strict) for each bound at index n.

    A bound holds when ratio < 1, or ratio <= 1 + BOUND_TOL for the non-strict ones.
    """
    eps, mu = exp.adm.eps, exp.adm.mu
    c = (1 - eps * eps) ** 2 / (4 * mu * mu)

    zn = exp.remainder_abs(n)
    if zn is not None:
        yield "remainder", (1 / (zn * eps) if zn > 0 else math.inf), False

    r_n, r_prev = float(exp.residuals[n]), float(exp.residuals[n - 1])
    if r_prev > 0:
        yield "residual", r_n / (eps * r_prev), False
    else:
        yield "residual", (0.0 if r_n == 0 else math.inf), False

    for n_prime in range(n):
        zp = exp.remainder_abs(n_prime)
        if zp is None:
            continue
        lower = c * qabs[n_prime] * zp / eps ** (n - n_prime)
        yield "growth", (lower / qabs[n] if qabs[n] > 0 else math.inf), True

    bound = 4 * eps ** (2 * n) * mu * mu / (1 - eps * eps) ** 2
    error = float(exp.residuals[n]) / qabs[n] if qabs[n] > 0 else math.inf
    yield "approximation", error / bound, True

    if n >= 2:
        ratio = exp.adm.zeta * qabs[n - 1] / qabs[n] if qabs[n] > 0 else math.inf
        yield "zeta_ratio", ratio, True


def _fails(ratio: float, strict: bool) -> bool:
    return not ratio < 1 if strict else not ratio <= 1 + BOUND_TOL


def _step_failures(exp: CFExpansion, n: int) -> list[str]:
    qabs = [abs(exp.q(k).to_complex()) for k in range(n + 1)]
    return [name for name, ratio, strict in _bounds_at(exp, n, qabs) if _fails(ratio, strict)]


def check_growth(exp: CFExpansion, raise_on_failure: bool = True) -> GrowthReport:
    """Check the remainder, residual, growth and approximation bounds on an expansion.

    For n >= 1 and 0 <= n' < n:
      |z_n| >= 1/eps
      |q_n z - p_n| <= eps |q_{n-1} z - p_{n-1}|
      |q_n| > (1 - eps^2)^2 |q_n' z_n'| / (4 eps^(n - n') mu^2)
      |z - p_n/q_n| < 4 eps^(2n) mu^2 / (1 - eps^2)^2
      |q_n| > zeta |q_{n-1}|  (n >= 2)
    """
    N = len(exp)
    if N < 2:
        raise ValueError("check_growth needs an expansion of length >= 2")
    report = GrowthReport(
        length=N,
        min_margin_remainder=math.inf,
        min_margin_growth=math.inf,
    )
    failures: list[tuple[str, int]] = []
    qabs = [abs(exp.q(n).to_complex()) for n in range(N + 1)]

    for n in range(1, N + 1):
        for name, ratio, strict in _bounds_at(exp, n, qabs):
            report.checks += 1
            margin = 1 / ratio if ratio > 0 else math.inf
            if name == "remainder":
                report.min_margin_remainder = min(report.min_margin_remainder, margin)
            elif name == "residual":
                report.max_ratio_residual = max(report.max_ratio_residual, ratio)
            elif name == "growth":
                report.min_margin_growth = min(report.min_margin_growth, margin)
            elif name == "approximation":
                report.max_ratio_approx = max(report.max_ratio_approx, ratio)
            if _fails(ratio, strict):
                failures.append((name, n))

    report.failures = [f"{name} bound fails at n={n}" for name, n in failures]
    report.passed = not failures
    if failures and raise_on_failure:
        name, n = failures[0]
        raise InvariantViolationError(report.failures[0], name=name, index=n)
    return report


def check_determinants(exp: CFExpansion) -> int:
    """Verify det M_n = (-1)^n b_n exactly for every n; returns the number of checks."""
    for n in range(len(exp) + 1):
        if not exp.det_ok(n):
            raise InvariantViolationError(
                f"det M_{n} = {exp.det(n)} but (-1)^n b_n = {exp.b[n]}", name="det", index=n
            )
    return len(exp) + 1


def check_integrality(exp: CFExpansion) -> int:
    """Verify every M_n has entries in O_K; returns the number of checks."""
    for n in range(len(exp) + 1):
        if not exp.is_integral(n):
            raise InvariantViolationError(
                f"M_{n} = {[str(e) for e in exp.matrix(n)]} has an entry outside O_K",
                name="integrality",
                index=n,
            )
    return len(exp) + 1


def _paren(s: str) -> str:
    return s if s.lstrip("-").isdigit() else f"({s})"


def continued_fraction_display(exp: CFExpansion, n: int | None = None) -> tuple[str, KElement]:
    """Nested display a_1/b_1 + (b_0/b_1)/(a_2/b_2 + ... + (b_{n-2}/b_{n-1})/(a_n/b_n)).

    Returns the text and its exact value, which equals p_n/q_n.
    """
    n = len(exp) if n is None else n
    if not 1 <= n <= len(exp):
        raise ValueError(f"display depth must lie in [1, {len(exp)}]")
    a, b = exp.a, exp.b

    value = KElement(a[n - 1], 1) / b[n]
    text = f"{_paren(str(a[n - 1]))}/{_paren(str(b[n]))}"
    for k in range(n - 1, 0, -1):
        value = KElement(a[k - 1], 1) / b[k] + (KElement(b[k - 1], 1) / b[k]) / value
        text = (
            f"{_paren(str(a[k - 1]))}/{_paren(str(b[k]))} + "
            f"({_paren(str(b[k - 1]))}/{_paren(str(b[k]))})/({text})"
        )
    return text, value


def expansion_report(exp: CFExpansion, display: bool = False) -> ExpansionReport:
    """The expansion in its JSON layout."""
    steps = [
        ExpansionStep(
            n=n,
            a=str(exp.a[n - 1]),
            b=str(exp.b[n]),
            p=str(exp.p(n)),
            q=str(exp.q(n)),
            det_check=exp.det_ok(n),
            abs_residual=float(exp.residuals[n]),
            abs_remainder=exp.remainder_abs(n),
        )
        for n in range(1, len(exp) + 1)
    ]
    return ExpansionReport(
        D=exp.K.D,
        eps=exp.adm.eps,
        z=cpair(exp.z),
        policy=exp.policy,
        B=[str(b) for b in exp.adm.B],
        mu=exp.adm.mu,
        steps=steps,
        terminated=exp.terminated,
        integral_upto=exp.integral_upto,
        display=continued_fraction_display(exp)[0] if display and len(exp) else None,
    )
