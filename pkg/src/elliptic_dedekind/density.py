"""Density witnesses for the graph {(alpha, D~(alpha)) : alpha in K}.

Given targets x, z outside K and eps > 0, the witness is

    A = M_x T^u S* T^-u M_z^-1,   S = M_x^-1 M_z,

with M_x, M_z convergent matrices of x and z. Then alpha = A(inf) is within eps of x,
beta = A^-1(inf) is within eps of z, and evaluating Phi(A) = 0 both directly and
factor by factor gives D~(alpha) = (sqrt|d| i)^-1 I(alpha - beta).
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Any, Iterator, Literal, Optional

import numpy as np

from .cfmartin import AdmissibleSet, CFExpansion, expand
from .dedekind import Mat2O, dedekind_sum, normalization_defined, phi
from .eisenstein import EisensteinContext
from .errors import (
    BudgetExceededError,
    InvariantViolationError,
    NormalizationUndefinedError,
    SearchFailureError,
)
from .models import GraphPoint, LemmaReport, PhiFactor, WitnessReport, cpair
from .qfield import FieldContext, KElement, QuadInt, elements_by_norm, nearest_lattice

logger = logging.getLogger(__name__)

UMode = Literal["lemma", "direct"]
U_MODES: tuple[str, ...] = ("lemma", "direct")

PHI_TOL = 1e-6
TWO_WAY_TOL = 1e-5
# Largest |Im D~| accepted for an emitted sample.
REAL_TOL = 1e-6
FIRST_SHELL = 256
# Widest norm range screened at once by the u search.
MAX_SHELL_WIDTH = 1 << 19


# ----------------------------------------------------------------------------
# Approximation by M_n W(inf)
# ----------------------------------------------------------------------------


def approx_diagnostic(
    exp: CFExpansion, W: Mat2O, delta: float, eps: Optional[float] = None
) -> LemmaReport:
    """Follow M_n W(inf) along an expansion and check the denominator bound.

    Requires 0 < delta < zeta and |W(inf)| >= 1/(zeta - delta); otherwise the
    report comes back with accepted=False and the reason. With w = 1/W(inf):

        |q_n + w q_{n-1}| > delta |q_{n-1}|
        |z - M_n W(inf)| <= |z - p_n/q_n| + mu |w| / (delta |q_n q_{n-1}|)
    """
    zeta = exp.adm.zeta
    report = LemmaReport(accepted=False, delta=delta, zeta=zeta)
    if not 0 < delta < zeta:
        report.reason = f"delta={delta} outside (0, zeta={zeta:.6g})"
        return report
    w_inf = W.apply_inf()
    if w_inf is None:
        report.reason = "W(inf) is infinite"
        return report
    wv = w_inf.to_complex()
    report.w_inf = cpair(wv)
    need = 1.0 / (zeta - delta)
    if not w_inf or abs(wv) < need:
        report.reason = f"|W(inf)|={abs(wv):.6g} below 1/(zeta - delta)={need:.6g}"
        return report

    report.accepted = True
    w = 1 / wv
    mu = exp.adm.mu
    margins: list[float] = []
    for n in range(2, len(exp) + 1):
        p, pp, q, qp = exp.matrix(n)
        report.checks += 1
        if not (q * w_inf + qp):
            report.denominators_ok = False
            report.distances.append(math.inf)
            report.bounds.append(math.inf)
            continue
        qc, qpc = q.to_complex(), qp.to_complex()
        den = qc + w * qpc
        if qpc:
            margin = abs(den) / (delta * abs(qpc))
            margins.append(margin)
            if margin <= 1:
                report.denominators_ok = False
            bound = exp.approx_error(n) + mu * abs(w) / (delta * abs(qc * qpc))
        else:
            bound = exp.approx_error(n)
        report.distances.append(abs(exp.z - (p.to_complex() + w * pp.to_complex()) / den))
        report.bounds.append(bound)

    if margins:
        report.min_denominator_margin = min(margins)
    if eps is not None:
        for k, d in enumerate(report.distances):
            if d < eps:
                report.first_within = k + 2
                break
        certified = None
        for k in range(len(report.bounds) - 1, -1, -1):
            if report.bounds[k] >= eps:
                break
            certified = k + 2
        report.certified_n = certified
    return report


def convergent_matrix(exp: CFExpansion, m: int) -> Mat2O:
    """M_m as a matrix of determinant 1 (second column negated when det = -1).

    Needs b_m = 1 and integral convergents up to m.
    """
    K = exp.K
    if exp.b[m] != K.one:
        raise ValueError(f"b_{m} = {exp.b[m]} is not 1")
    M = Mat2O.from_k(*exp.matrix(m))
    if M.det() == -K.one:
        M = Mat2O(M.a, -M.b, M.c, -M.d)
    return M


def select_depth(exp: CFExpansion, eps: float, zeta: float, cap: int) -> int:
    """Smallest m <= cap with b_m = 1, M_m integral, and |x - M_m W(inf)| < eps
    certified for every W with |W(inf)| >= 2/zeta."""
    half = zeta / 2
    best = math.inf
    for m in range(1, min(len(exp), cap) + 1):
        if exp.b[m] != exp.K.one or m > exp.integral_upto:
            continue
        qc, qpc = abs(exp.q(m).to_complex()), abs(exp.q(m - 1).to_complex())
        if qc <= half * qpc:
            continue
        bound = exp.approx_error(m) + half / (qc * (qc - half * qpc))
        best = min(best, bound)
        if bound < eps:
            return m
    raise SearchFailureError(
        f"no depth <= {cap} with b_m = 1 certifies eps={eps} for z={exp.z}",
        best,
        label="best certified bound",
    )


# ----------------------------------------------------------------------------
# The witness matrix
# ----------------------------------------------------------------------------


def build_sstar(S: Mat2O) -> Mat2O:
    """S when S(inf) is finite, else [[0, -1], [1, 0]] S."""
    if S.c:
        return S
    return Mat2O.quarter_turn(S.K) @ S


@dataclass(frozen=True)
class WitnessParams:
    """Targets, tolerance and search limits of one witness."""

    x: complex
    z: complex
    eps_target: float
    zeta: float
    m_max: int = 40
    n_max: int = 40
    u_search_norm: int = 40_000_000
    u_mode: UMode = "lemma"

    def __post_init__(self) -> None:
        if not self.eps_target > 0:
            raise ValueError(f"eps must be positive, got {self.eps_target}")
        if not self.zeta > 0:
            raise ValueError(f"zeta must be positive, got {self.zeta}")
        if self.u_mode not in U_MODES:
            raise ValueError(f"u_mode must be one of {U_MODES}, got {self.u_mode!r}")
        for v in (self.x, self.z):
            if not (math.isfinite(v.real) and math.isfinite(v.imag)):
                raise ValueError(f"targets must be finite, got {v}")

    @property
    def delta(self) -> float:
        return self.zeta / 2

    @property
    def w_bound(self) -> float:
        """1/(zeta - delta) = 2/zeta."""
        return 1.0 / (self.zeta - self.delta)

    @classmethod
    def for_admissible(
        cls, x: complex, z: complex, eps_target: float, adm: AdmissibleSet, **kwargs: Any
    ) -> WitnessParams:
        return cls(x=complex(x), z=complex(z), eps_target=eps_target, zeta=adm.zeta, **kwargs)


def _norm_shells(K: FieldContext, max_norm: int) -> Iterator[tuple[np.ndarray, np.ndarray]]:
    """Elements of O_K with N(u) <= max_norm, in (norm, x, y) order, shell by shell."""
    t, n = K.trace, K.norm_w
    m = 4 * n - t * t
    lo, hi = 0, FIRST_SHELL
    while lo <= max_norm:
        hi = min(hi, lo + MAX_SHELL_WIDTH, max_norm + 1)
        y_max = math.isqrt(4 * hi // m) + 1
        xs_parts, ys_parts = [], []
        for y in range(-y_max, y_max + 1):
            outer = 4 * hi - m * y * y
            if outer < 0:
                continue
            r = math.sqrt(outer)
            x_lo, x_hi = math.floor((-t * y - r) / 2) - 1, math.ceil((-t * y + r) / 2) + 1
            runs = [(x_lo, x_hi)]
            inner = 4 * lo - m * y * y
            if inner > 0:
                # x strictly inside this run has N(x + y*w) < lo.
                ri = math.sqrt(inner)
                in_lo, in_hi = math.ceil((-t * y - ri) / 2) + 1, math.floor((-t * y + ri) / 2) - 1
                if in_lo <= in_hi:
                    runs = [(x_lo, in_lo - 1), (in_hi + 1, x_hi)]
            for r0, r1 in runs:
                if r1 < r0:
                    continue
                xs_parts.append(np.arange(r0, r1 + 1, dtype=np.int64))
                ys_parts.append(np.full(r1 - r0 + 1, y, dtype=np.int64))
        xs, ys = np.concatenate(xs_parts), np.concatenate(ys_parts)
        norms = xs * xs + t * xs * ys + n * ys * ys
        mask = (norms >= lo) & (norms < hi)
        xs, ys, norms = xs[mask], ys[mask], norms[mask]
        order = np.lexsort((ys, xs, norms))
        yield xs[order], ys[order]
        lo, hi = hi, 2 * hi


@dataclass(frozen=True)
class _Frame:
    """Fixed matrices of the u search."""

    Mx: Mat2O
    Mz: Mat2O
    Sstar: Mat2O
    Sinv: Mat2O
    Mx_inv: Mat2O
    Mz_inv: Mat2O

    def w1(self, u: QuadInt) -> Mat2O:
        return Mat2O.T(u) @ self.Sstar @ Mat2O.T(-u) @ self.Mz_inv

    def w2(self, u: QuadInt) -> Mat2O:
        return Mat2O.T(u) @ self.Sinv @ Mat2O.T(-u) @ self.Mx_inv


def exclusions(Sstar: Mat2O, Mx: Mat2O, Mz: Mat2O) -> tuple[KElement, KElement]:
    """The u making W_1(inf) or W_2(inf) infinite.

    With xi_1 = M_z^-1(inf) and xi_2 = M_x^-1(inf):
    u = xi_1 + s_4/s_3 for W_1 and u = xi_2 + t_4/t_3 for W_2, where
    S* = [[s_1, s_2], [s_3, s_4]] and S*^-1 = [[t_1, t_2], [t_3, t_4]].
    """
    xi1, xi2 = Mz.inverse().apply_inf(), Mx.inverse().apply_inf()
    if xi1 is None or xi2 is None:
        raise InvariantViolationError("convergent matrix with q = 0", name="exclusion")
    Sinv = Sstar.inverse()
    return xi1 + Sstar.d / Sstar.c, xi2 + Sinv.d / Sinv.c


def _verify_u(u: QuadInt, frame: _Frame, params: WitnessParams) -> bool:
    w1, w2 = frame.w1(u).apply_inf(), frame.w2(u).apply_inf()
    if w1 is None or w2 is None:
        return False
    if params.u_mode == "lemma":
        bound = params.w_bound
        return abs(w1.to_complex()) >= bound and abs(w2.to_complex()) >= bound
    alpha = (frame.Mx @ frame.w1(u)).apply_inf()
    beta = (frame.Mz @ frame.w2(u)).apply_inf()
    if alpha is None or beta is None:
        return False
    eps = params.eps_target
    return abs(alpha.to_complex() - params.x) < eps and abs(beta.to_complex() - params.z) < eps


def choose_u(Sstar: Mat2O, Mx: Mat2O, Mz: Mat2O, params: WitnessParams) -> QuadInt:
    """First u in (norm, x, y) order meeting the u_mode condition, exclusions skipped.

    lemma:  |W_1(inf)| >= 2/zeta and |W_2(inf)| >= 2/zeta
    direct: |M_x W_1(inf) - x| < eps and |M_z W_2(inf) - z| < eps, checked directly
    Candidates are screened in numpy and confirmed in exact arithmetic.
    """
    K = Sstar.K
    if not Sstar.c:
        raise ValueError("S*(inf) must be finite; pass the output of build_sstar")
    frame = _Frame(
        Mx=Mx,
        Mz=Mz,
        Sstar=Sstar,
        Sinv=Sstar.inverse(),
        Mx_inv=Mx.inverse(),
        Mz_inv=Mz.inverse(),
    )
    excluded = {(e.num.x, e.num.y) for e in exclusions(Sstar, Mx, Mz) if e.is_integral()}

    s1, s2, s3, s4 = (e.to_complex() for e in (Sstar.a, Sstar.b, Sstar.c, Sstar.d))
    t1, t2, t3, t4 = (
        e.to_complex() for e in (frame.Sinv.a, frame.Sinv.b, frame.Sinv.c, frame.Sinv.d)
    )
    xi1 = frame.Mz_inv.apply_inf()
    xi2 = frame.Mx_inv.apply_inf()
    assert xi1 is not None and xi2 is not None
    x1, x2 = xi1.to_complex(), xi2.to_complex()
    mx = [e.to_complex() for e in (Mx.a, Mx.b, Mx.c, Mx.d)]
    mz = [e.to_complex() for e in (Mz.a, Mz.b, Mz.c, Mz.d)]

    best = 0.0
    tried = 0
    for xs, ys in _norm_shells(K, params.u_search_norm):
        us = K.embed(xs, ys)
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            w1 = us + (s1 * (x1 - us) + s2) / (s3 * (x1 - us) + s4)
            w2 = us + (t1 * (x2 - us) + t2) / (t3 * (x2 - us) + t4)
            reach = np.nan_to_num(np.minimum(np.abs(w1), np.abs(w2)), nan=0.0, posinf=0.0)
            ok = np.isfinite(w1) & np.isfinite(w2)
            if params.u_mode == "lemma":
                ok &= reach >= params.w_bound * (1 - 1e-9)
            else:
                alpha = (mx[0] * w1 + mx[1]) / (mx[2] * w1 + mx[3])
                beta = (mz[0] * w2 + mz[1]) / (mz[2] * w2 + mz[3])
                eps = params.eps_target
                ok &= (np.abs(alpha - params.x) < eps) & (np.abs(beta - params.z) < eps)
        if reach.size:
            best = max(best, float(reach.max()))
        tried += int(xs.size)
        for k in np.flatnonzero(ok):
            coords = (int(xs[k]), int(ys[k]))
            if coords in excluded:
                continue
            u = K.elt(*coords)
            if _verify_u(u, frame, params):
                logger.info(f"chose u={u} (N(u)={u.norm()}) after {tried} candidates")
                return u
    raise SearchFailureError(
        f"no u with N(u) <= {params.u_search_norm} meets the {params.u_mode} condition", best
    )


@dataclass(frozen=True)
class WitnessResult:
    """All artifacts of one witness construction."""

    K: FieldContext
    cf_eps: float
    params: WitnessParams
    m: int
    n: int
    Mx: Mat2O
    Mz: Mat2O
    S: Mat2O
    Sstar: Mat2O
    u: QuadInt
    A: Mat2O
    alpha: KElement
    beta: KElement
    delta1: complex
    delta2: complex
    target: float
    predicted: float
    bound: float
    computed: Optional[float] = None
    phi_factors: tuple[tuple[str, Optional[complex], int], ...] = field(default=())
    phi_total: Optional[complex] = None
    phi_direct: Optional[complex] = None
    err_bound: float = 0.0

    @property
    def det_ok(self) -> bool:
        return self.A.det() == self.K.one

    def report(self) -> WitnessReport:
        return WitnessReport(
            D=self.K.D,
            eps=self.params.eps_target,
            u_mode=self.params.u_mode,
            x=cpair(self.params.x),
            z=cpair(self.params.z),
            m=self.m,
            n=self.n,
            Mx=self.Mx.entries(),
            Mz=self.Mz.entries(),
            S=self.S.entries(),
            Sstar=self.Sstar.entries(),
            u=str(self.u),
            A=self.A.entries(),
            det_ok=self.det_ok,
            alpha=str(self.alpha),
            beta=str(self.beta),
            alpha_value=cpair(self.alpha.to_complex()),
            beta_value=cpair(self.beta.to_complex()),
            delta1=cpair(self.delta1),
            delta2=cpair(self.delta2),
            target=self.target,
            predicted=self.predicted,
            bound=self.bound,
            computed=self.computed,
            c_norm=self.A.c.norm(),
            phi_factors=[
                PhiFactor(name=name, value=None if v is None else cpair(v), c_norm=cn)
                for name, v, cn in self.phi_factors
            ],
            phi_total=None if self.phi_total is None else cpair(self.phi_total),
            phi_direct=None if self.phi_direct is None else cpair(self.phi_direct),
            err_bound=self.err_bound,
        )


def _violation(name: str, message: str) -> InvariantViolationError:
    return InvariantViolationError(f"witness {name} check failed: {message}", name=name)


def witness(
    params: WitnessParams,
    K: FieldContext,
    adm: AdmissibleSet,
    ctx: EisensteinContext,
    budget: Optional[int] = None,
    dps: int = 60,
) -> WitnessResult:
    """Build A for the targets in params and check every witness invariant.

    The direct D~(alpha) and Phi(A) are computed only when N(c_A) is within budget.
    """
    if not normalization_defined(ctx):
        raise NormalizationUndefinedError(f"D~ is trivial for D={K.D}; no density witness")
    eps = params.eps_target

    exp_x = expand(params.x, params.m_max, K, adm, policy="unit_first", dps=dps)
    exp_z = expand(params.z, params.n_max, K, adm, policy="unit_first", dps=dps)
    m = select_depth(exp_x, eps, params.zeta, params.m_max)
    n = select_depth(exp_z, eps, params.zeta, params.n_max)
    logger.info(f"witness depths m={m}, n={n} (D={K.D}, eps={eps})")

    Mx, Mz = convergent_matrix(exp_x, m), convergent_matrix(exp_z, n)
    S = Mx.inverse() @ Mz
    Sstar = build_sstar(S)
    u = choose_u(Sstar, Mx, Mz, params)

    Tu, Tmu, Mz_inv = Mat2O.T(u), Mat2O.T(-u), Mz.inverse()
    A = Mx @ Tu @ Sstar @ Tmu @ Mz_inv
    if A.det() != K.one:
        raise _violation("det", f"det A = {A.det()}")
    alpha, beta = A.apply_inf(), A.inverse().apply_inf()
    if alpha is None or beta is None:
        raise _violation("finite", "A(inf) or A^-1(inf) is infinite")

    delta1 = alpha.to_complex() - params.x
    delta2 = beta.to_complex() - params.z
    if not (abs(delta1) < eps and abs(delta2) < eps):
        raise _violation("approximation", f"|delta1|={abs(delta1):.3g}, |delta2|={abs(delta2):.3g}")

    root = K.sqrt_abs_disc
    target = 2 * (params.x - params.z).imag / root
    predicted = 2 * (alpha.to_complex() - beta.to_complex()).imag / root
    bound = 4 * eps / root
    if abs(predicted - target) > bound * (1 + 1e-12):
        gap = abs(predicted - target)
        raise _violation("bound", f"|predicted - target| = {gap:.3g} > {bound:.3g}")

    tables: dict[QuadInt, np.ndarray] = {}
    factors: list[tuple[str, Optional[complex], int]] = []
    for name, M in (("M_x", Mx), ("T^u", Tu), ("S*", Sstar), ("T^-u", Tmu), ("M_z^-1", Mz_inv)):
        try:
            value: Optional[complex] = phi(M, ctx, budget, tables)
        except BudgetExceededError:
            value = None
        factors.append((name, value, M.c.norm()))
    phi_total: Optional[complex] = None
    if all(v is not None for _, v, _ in factors):
        phi_total = sum((v for _, v, _ in factors if v is not None), 0j)
        if abs(phi_total) >= PHI_TOL:
            raise _violation("phi_telescoping", f"|sum of factor Phi| = {abs(phi_total):.3e}")
    else:
        logger.warning("factor Phi values exceed the coset budget; telescoping sum skipped")

    computed: Optional[float] = None
    phi_direct: Optional[complex] = None
    err_bound = 1e-12 * max(1.0, abs(predicted))
    if budget is None or A.c.norm() <= budget:
        result = dedekind_sum(A.a, A.c, ctx, budget, tables)
        computed = result.normalized_value()
        phi_direct = phi(A, ctx, budget, tables)
        err_bound = result.err_bound
        if abs(computed - predicted) >= TWO_WAY_TOL:
            raise _violation("two_way", f"D~(alpha)={computed} but predicted {predicted}")
    else:
        logger.warning(
            f"N(c_A)={A.c.norm()} exceeds the budget {budget}; direct D~(alpha) skipped"
        )

    return WitnessResult(
        K=K,
        cf_eps=adm.eps,
        params=params,
        m=m,
        n=n,
        Mx=Mx,
        Mz=Mz,
        S=S,
        Sstar=Sstar,
        u=u,
        A=A,
        alpha=alpha,
        beta=beta,
        delta1=delta1,
        delta2=delta2,
        target=target,
        predicted=predicted,
        bound=bound,
        computed=computed,
        phi_factors=tuple(factors),
        phi_total=phi_total,
        phi_direct=phi_direct,
        err_bound=err_bound,
    )


# ----------------------------------------------------------------------------
# Graph samples
# ----------------------------------------------------------------------------


@dataclass(frozen=True)
class Region:
    """Rectangle [re_min, re_max] x [im_min, im_max], optionally an interval for D~."""

    re_min: float
    re_max: float
    im_min: float
    im_max: float
    d_min: Optional[float] = None
    d_max: Optional[float] = None

    def __post_init__(self) -> None:
        if not (self.re_min < self.re_max and self.im_min < self.im_max):
            raise ValueError("region bounds must satisfy min < max")
        if self.d_min is not None and self.d_max is not None and self.d_min > self.d_max:
            raise ValueError("D~ interval must satisfy min <= max")

    @classmethod
    def parse(cls, text: str) -> Region:
        """"re_min,re_max,im_min,im_max[,d_min,d_max]"."""
        parts = [float(p) for p in text.split(",")]
        if len(parts) not in (4, 6):
            raise ValueError(f"region needs 4 or 6 numbers, got {text!r}")
        return cls(*parts)

    def admits(self, value: float) -> bool:
        if self.d_min is not None and value < self.d_min:
            return False
        return self.d_max is None or value <= self.d_max


def graph_sample(
    K: FieldContext,
    ctx: EisensteinContext,
    region: Region,
    count: int,
    max_norm: int,
    seed: int = 0,
    budget: Optional[int] = None,
) -> list[GraphPoint]:
    """Sample (Re alpha, Im alpha, D~(alpha)) with alpha = a/c, N(c) <= max_norm.

    Each sample draws a point w of the rectangle and a modulus c, and takes
    a = nearest_lattice(c*w).
    """
    if not normalization_defined(ctx):
        raise NormalizationUndefinedError(f"D~ is trivial for D={K.D}")
    xs, ys, _ = elements_by_norm(K, max_norm)
    rng = np.random.default_rng(seed)
    tables: dict[QuadInt, np.ndarray] = {}
    points: list[GraphPoint] = []
    attempts = 0
    while len(points) < count and attempts < 50 * count:
        attempts += 1
        w = complex(
            rng.uniform(region.re_min, region.re_max), rng.uniform(region.im_min, region.im_max)
        )
        k = int(rng.integers(0, xs.size))
        c = K.elt(int(xs[k]), int(ys[k]))
        a = nearest_lattice(c.to_complex() * w, K)
        result = dedekind_sum(a, c, ctx, budget, tables)
        if abs(result.normalized_imag or 0.0) > REAL_TOL:
            raise InvariantViolationError(
                f"D~({a}, {c}) has imaginary part {result.normalized_imag}",
                name="real",
                index=(str(a), str(c)),
            )
        value = result.normalized_value()
        if not region.admits(value):
            continue
        alpha = (a / c).to_complex()
        points.append(
            GraphPoint(re_alpha=alpha.real, im_alpha=alpha.imag, d_tilde=value, a=str(a), c=str(c))
        )
    if len(points) < count:
        logger.warning(f"graph_sample produced {len(points)} of {count} points")
    logger.info(f"sampled {len(points)} graph points (D={K.D}, N(c) <= {max_norm})")
    return points
