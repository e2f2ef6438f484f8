"""Command-line interface: JSON/CSV artifacts on stdout, logs on stderr."""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Optional, Sequence, TextIO

import numpy as np
from pydantic import BaseModel

from . import __version__
from .brackets import verify_convergent_lemma, verify_random
from .cfmartin import (
    POLICIES,
    AdmissibleSet,
    check_determinants,
    check_growth,
    check_integrality,
    continued_fraction_display,
    default_admissible,
    default_denominators,
    expand,
    expansion_report,
)
from .config import FieldProfile, RunConfig, Settings, get_field_profiles, get_settings, resolve_eps
from .dedekind import (
    dedekind_sum,
    normalization_defined,
    phi_check,
    random_sl2_word,
    scaling_check,
)
from .density import U_MODES, Region, WitnessParams, graph_sample, witness
from .eisenstein import (
    EisensteinContext,
    e1,
    e1_many,
    e2_zero,
    e2_zero_direct,
    make_context,
)
from .errors import EXIT_INVARIANT, EXIT_OK, EXIT_USAGE, EllipticDedekindError
from .models import EisensteinValue, FieldInfo, SuiteResult, VerifyAllReport, cpair
from .qfield import FieldContext, QuadInt, elements_by_norm, make_field, parse_complex

logger = logging.getLogger(__name__)

GRAPH_COLUMNS = ("re_alpha", "im_alpha", "d_tilde")


@dataclass
class Session:
    """Field, admissible set and Eisenstein context resolved for one run."""

    settings: Settings
    run: RunConfig
    K: FieldContext
    profile: FieldProfile
    adm: AdmissibleSet
    ctx: EisensteinContext


def open_session(args: argparse.Namespace, settings: Settings) -> Session:
    run = RunConfig(
        D=args.D,
        eps=args.eps,
        prec=args.prec if args.prec is not None else settings.eisenstein_prec,
        budget=args.budget if args.budget is not None else settings.dedekind_budget,
        seed=args.seed,
        output=args.output,
    )
    K = make_field(run.D)
    profile = get_field_profiles(settings).get(run.D)
    B = profile.admissible_elements(K) or list(default_denominators(K))
    eps = resolve_eps(K, B, settings, profile, explicit=run.eps)
    adm = default_admissible(K, eps, B, grid=settings.covering_grid)
    ctx = make_context(K, run.prec)
    return Session(settings=settings, run=run, K=K, profile=profile, adm=adm, ctx=ctx)


def emit(model: BaseModel, output: str) -> None:
    """Write a model to stdout in the requested format (sorted-key JSON by default)."""
    data = model.model_dump(mode="json")
    if output == "text":
        for key in sorted(data):
            print(f"{key}: {data[key]}")
    elif output == "csv":
        writer = csv.writer(sys.stdout, lineterminator="\n")
        keys = sorted(data)
        writer.writerow(keys)
        writer.writerow(
            [
                json.dumps(v, sort_keys=True) if isinstance(v, (list, dict)) else v
                for v in (data[k] for k in keys)
            ]
        )
    else:
        print(json.dumps(data, sort_keys=True, indent=2))


# ----------------------------------------------------------------------------
# Commands
# ----------------------------------------------------------------------------


def cmd_field_info(args: argparse.Namespace, s: Session) -> int:
    K = s.K
    emit(
        FieldInfo(
            D=K.D,
            d_K=K.d_K,
            omega=cpair(K.omega),
            min_poly=f"w^2 - {K.trace}*w + {K.norm_w}" if K.trace else f"w^2 + {K.norm_w}",
            units=[str(u) for u in K.units()],
            B=[str(b) for b in s.adm.B],
            eps=s.adm.eps,
            covering_threshold=s.adm.threshold,
            mu=s.adm.mu,
            zeta=s.adm.zeta,
            description=s.profile.description,
        ),
        s.run.output,
    )
    return EXIT_OK


def cmd_cf_expand(args: argparse.Namespace, s: Session) -> int:
    z = parse_complex(args.z)
    exp = expand(z, args.depth, s.K, s.adm, policy=args.policy, dps=s.settings.mp_dps)
    check_determinants(exp)
    check_integrality(exp)
    if len(exp) >= 2 and not exp.terminated:
        check_growth(exp)
    report = expansion_report(exp)
    if args.display and len(exp) >= 1:
        report.display, _ = continued_fraction_display(exp)
    emit(report, s.run.output)
    return EXIT_OK


def cmd_brackets_verify(args: argparse.Namespace, s: Session) -> int:
    report = verify_random(s.K, args.depth, args.trials, s.run.seed, max_den=args.max_den)
    emit(report, s.run.output)
    return EXIT_OK


def cmd_eisen_e2(args: argparse.Namespace, s: Session) -> int:
    emit(
        EisensteinValue(
            D=s.K.D, kind="E2(0)", value=cpair(e2_zero(s.ctx)), err_bound=s.ctx.err_bound
        ),
        s.run.output,
    )
    return EXIT_OK


def cmd_eisen_e1(args: argparse.Namespace, s: Session) -> int:
    z = parse_complex(args.z)
    emit(
        EisensteinValue(
            D=s.K.D, kind="E1", point=cpair(z), value=cpair(e1(z, s.ctx)), err_bound=s.ctx.err_bound
        ),
        s.run.output,
    )
    return EXIT_OK


def cmd_dedekind_eval(args: argparse.Namespace, s: Session) -> int:
    a, c = s.K.parse(args.a), s.K.parse(args.c)
    result = dedekind_sum(a, c, s.ctx, s.run.budget)
    if args.normalized:
        result.normalized_value()
    emit(result.report(), s.run.output)
    return EXIT_OK


def cmd_phi_check(args: argparse.Namespace, s: Session) -> int:
    report = phi_check(
        s.K, args.trials, s.run.seed, s.ctx, max_c_norm=args.max_c_norm, budget=s.run.budget
    )
    emit(report, s.run.output)
    return EXIT_OK if report.passed else EXIT_INVARIANT


def cmd_density_witness(args: argparse.Namespace, s: Session) -> int:
    params = WitnessParams.for_admissible(
        parse_complex(args.x),
        parse_complex(args.z),
        args.target_eps,
        s.adm,
        m_max=args.m_max,
        n_max=args.n_max,
        u_search_norm=s.settings.u_search_norm,
        u_mode=args.u_mode,
    )
    result = witness(params, s.K, s.adm, s.ctx, s.run.budget, dps=s.settings.mp_dps)
    emit(result.report(), "json" if args.json else s.run.output)
    return EXIT_OK


def write_graph_csv(points: Sequence[BaseModel], handle: TextIO) -> None:
    writer = csv.writer(handle, lineterminator="\n")
    writer.writerow(GRAPH_COLUMNS)
    for p in points:
        data = p.model_dump()
        writer.writerow([repr(float(data[k])) for k in GRAPH_COLUMNS])


def cmd_density_sample(args: argparse.Namespace, s: Session) -> int:
    region = Region.parse(args.region)
    points = graph_sample(
        s.K, s.ctx, region, args.count, args.max_norm, seed=s.run.seed, budget=s.run.budget
    )
    if args.out:
        with open(args.out, "w", encoding="utf-8", newline="") as f:
            write_graph_csv(points, f)
        logger.info(f"wrote {len(points)} points to {args.out}")
    else:
        write_graph_csv(points, sys.stdout)
    return EXIT_OK


# ----------------------------------------------------------------------------
# verify-all
# ----------------------------------------------------------------------------


def _run_suite(name: str, body: Callable[[SuiteResult], None]) -> SuiteResult:
    suite = SuiteResult(name=name)
    try:
        body(suite)
    except EllipticDedekindError as e:
        suite.failures.append(f"{type(e).__name__}: {e}")
    logger.info(f"suite {name}: {suite.checks} checks, {len(suite.failures)} failures")
    return suite


def _random_points(K: FieldContext, rng: np.random.Generator, count: int) -> np.ndarray:
    s, t = rng.uniform(-1.5, 1.5, size=count), rng.uniform(-1.5, 1.5, size=count)
    return s + t * K.omega


def _random_pair(
    K: FieldContext, rng: np.random.Generator, max_norm: int
) -> tuple[QuadInt, QuadInt]:
    xs, ys, _ = elements_by_norm(K, max_norm)
    k = int(rng.integers(0, xs.size))
    c = K.elt(int(xs[k]), int(ys[k]))
    a = K.elt(int(rng.integers(-10, 11)), int(rng.integers(-10, 11)))
    return a, c


def verify_all(s: Session) -> VerifyAllReport:
    K, ctx, adm, seed = s.K, s.ctx, s.adm, s.run.seed
    budget = s.run.budget
    rng = np.random.default_rng(seed)
    suites: list[SuiteResult] = []

    def cf_suite(suite: SuiteResult) -> None:
        for z in _random_points(K, rng, 20):
            exp = expand(complex(z), 15, K, adm, dps=s.settings.mp_dps)
            suite.checks += check_determinants(exp)
            suite.checks += check_integrality(exp)
            if len(exp) >= 2 and not exp.terminated:
                report = check_growth(exp, raise_on_failure=False)
                suite.checks += report.checks
                suite.failures.extend(report.failures)
            verify_convergent_lemma(exp)
            suite.checks += 2 * (len(exp) + 1)

    def bracket_suite(suite: SuiteResult) -> None:
        for report in (
            verify_random(K, 12, 100, seed),
            verify_random(K, 8, 20, seed + 1, max_den=3),
        ):
            suite.checks += sum(report.checks.values())

    def eisenstein_suite(suite: SuiteResult) -> None:
        zs = _random_points(K, rng, 100)
        base = e1_many(zs, ctx)
        residuals = {
            "period_1": np.abs(e1_many(zs + 1, ctx) - base),
            "period_w": np.abs(e1_many(zs + K.omega, ctx) - base),
            "odd": np.abs(e1_many(-zs, ctx) + base),
            "conjugate": np.abs(e1_many(np.conj(zs), ctx) - np.conj(base)),
        }
        for name, r in residuals.items():
            suite.checks += int(r.size)
            if float(r.max()) >= 1e-9:
                suite.failures.append(f"E1 {name} residual {float(r.max()):.3e}")
        suite.checks += 1
        if K.D in (1, 3):
            if abs(ctx.s2) >= 1e-9:
                suite.failures.append(f"E2(0) = {ctx.s2} should vanish")
        else:
            oracle = e2_zero_direct(K)
            if abs(oracle - ctx.s2) >= 1e-4:
                suite.failures.append(f"E2(0) closed form {ctx.s2} vs direct {oracle}")

    def dedekind_suite(suite: SuiteResult) -> None:
        if not normalization_defined(ctx):
            for _ in range(20):
                a, c = _random_pair(K, rng, 100)
                suite.checks += 1
                value = dedekind_sum(a, c, ctx, budget).value
                if abs(value) >= 1e-6:
                    suite.failures.append(f"D({a}, {c}) = {value} should vanish")
            return
        lams = elements_by_norm(K, 4)
        for _ in range(5):
            a, c = _random_pair(K, rng, 100)
            base = dedekind_sum(a, c, ctx, budget)
            gamma = K.elt(int(rng.integers(-3, 4)), int(rng.integers(-3, 4)))
            shifted = dedekind_sum(a + gamma * c, c, ctx, budget)
            negated = dedekind_sum(-a, c, ctx, budget)
            k = int(rng.integers(0, lams[0].size))
            lam = K.elt(int(lams[0][k]), int(lams[1][k]))
            suite.checks += 3
            if abs(shifted.value - base.value) >= 1e-9:
                suite.failures.append(f"periodicity fails for ({a}, {c})")
            if abs(negated.value + base.value) >= 1e-9:
                suite.failures.append(f"oddness fails for ({a}, {c})")
            if not scaling_check(a, c, lam, ctx, budget):
                suite.failures.append(f"scaling by {lam} fails for ({a}, {c})")
        for _ in range(10):
            A = random_sl2_word(K, rng)
            if not A.c or A.c.norm() > 200:
                continue
            suite.checks += 1
            result = dedekind_sum(A.a, A.c, ctx, budget)
            if abs(result.normalized_imag or 0.0) >= 1e-6:
                suite.failures.append(
                    f"D~({A.a}, {A.c}) has imaginary part {result.normalized_imag}"
                )

    def phi_suite(suite: SuiteResult) -> None:
        report = phi_check(K, 20, seed, ctx, budget=budget)
        suite.checks += report.trials + 2
        if not report.passed:
            suite.failures.append(f"phi residual {report.max_residual:.3e}")

    def density_suite(suite: SuiteResult) -> None:
        if not normalization_defined(ctx):
            suite.skipped = True
            return
        x = complex(rng.uniform(-1, 1), rng.uniform(0.2, 1.2))
        z = complex(rng.uniform(-1, 1), rng.uniform(0.2, 1.2))
        params = WitnessParams.for_admissible(
            x, z, 0.25, adm, u_search_norm=s.settings.u_search_norm, u_mode="direct"
        )
        result = witness(params, K, adm, ctx, budget, dps=s.settings.mp_dps)
        suite.checks += 4 + (1 if result.computed is not None else 0)

    for name, body in (
        ("cfmartin", cf_suite),
        ("brackets", bracket_suite),
        ("eisenstein", eisenstein_suite),
        ("dedekind", dedekind_suite),
        ("phi", phi_suite),
        ("density", density_suite),
    ):
        suites.append(_run_suite(name, body))

    passed = all(suite.passed for suite in suites)
    return VerifyAllReport(D=K.D, seed=seed, suites=suites, passed=passed)


def cmd_verify_all(args: argparse.Namespace, s: Session) -> int:
    report = verify_all(s)
    emit(report, s.run.output)
    return EXIT_OK if report.passed else EXIT_INVARIANT


# ----------------------------------------------------------------------------
# Parser
# ----------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="elliptic-dedekind",
        description="Continued fractions, elliptic Dedekind sums and density witnesses "
        "over imaginary quadratic fields.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("--log-level", default=None, help="Logging level (default: LOG_LEVEL)")
    parser.add_argument("--budget", type=int, default=None, help="Largest N(c) summed over")
    parser.add_argument("--eps", type=float, default=None, help="Continued-fraction eps")
    parser.add_argument("--prec", type=float, default=None, help="Accuracy of E_1")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--output", choices=("json", "csv", "text"), default="json")

    # Accepted after the subcommand too; SUPPRESS keeps the global value when absent.
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--D", type=int, required=True, help="Squarefree D of Q(sqrt(-D))")
    common.add_argument("--budget", type=int, default=argparse.SUPPRESS)
    common.add_argument("--prec", type=float, default=argparse.SUPPRESS)
    common.add_argument("--seed", type=int, default=argparse.SUPPRESS)
    common.add_argument("--output", choices=("json", "csv", "text"), default=argparse.SUPPRESS)

    sub = parser.add_subparsers(dest="command", required=True)

    field = sub.add_parser("field").add_subparsers(dest="action", required=True)
    p = field.add_parser("info", parents=[common], help="Ring data and admissible set")
    p.set_defaults(handler=cmd_field_info)

    cf = sub.add_parser("cf").add_subparsers(dest="action", required=True)
    p = cf.add_parser("expand", parents=[common], help="Continued-fraction expansion of z")
    p.add_argument("--z", required=True, help='Complex point "re,im"')
    p.add_argument("--depth", type=int, default=15)
    p.add_argument("--policy", choices=POLICIES, default="greedy")
    p.add_argument("--display", action="store_true", help="Include the nested display")
    p.set_defaults(handler=cmd_cf_expand)

    br = sub.add_parser("brackets").add_subparsers(dest="action", required=True)
    p = br.add_parser("verify", parents=[common], help="Bracket identities on random sequences")
    p.add_argument("--depth", type=int, default=12)
    p.add_argument("--trials", type=int, default=100)
    p.add_argument("--max-den", type=int, default=None)
    p.set_defaults(handler=cmd_brackets_verify)

    eisen = sub.add_parser("eisen").add_subparsers(dest="action", required=True)
    p = eisen.add_parser("e2", parents=[common], help="E_2(0)")
    p.set_defaults(handler=cmd_eisen_e2)
    p = eisen.add_parser("e1", parents=[common], help="E_1(z)")
    p.add_argument("--z", required=True, help='Complex point "re,im"')
    p.set_defaults(handler=cmd_eisen_e1)

    ded = sub.add_parser("dedekind").add_subparsers(dest="action", required=True)
    p = ded.add_parser("eval", parents=[common], help="D(a, c) and its normalization")
    p.add_argument("--a", required=True, help='Element "x+y*w"')
    p.add_argument("--c", required=True, help='Element "x+y*w"')
    p.add_argument("--normalized", action="store_true", help="Require the normalized value")
    p.set_defaults(handler=cmd_dedekind_eval)

    ph = sub.add_parser("phi").add_subparsers(dest="action", required=True)
    p = ph.add_parser("check", parents=[common], help="Homomorphism check on random words")
    p.add_argument("--trials", type=int, default=50)
    p.add_argument("--max-c-norm", type=int, default=200)
    p.set_defaults(handler=cmd_phi_check)

    dens = sub.add_parser("density").add_subparsers(dest="action", required=True)
    p = dens.add_parser("witness", parents=[common], help="Witness matrix for targets x, z")
    p.add_argument("--x", required=True, help='Target "re,im"')
    p.add_argument("--z", required=True, help='Target "re,im"')
    p.add_argument("--eps", dest="target_eps", type=float, default=0.05, help="Target tolerance")
    p.add_argument("--u-mode", choices=U_MODES, default="lemma")
    p.add_argument("--m-max", type=int, default=40)
    p.add_argument("--n-max", type=int, default=40)
    p.add_argument("--json", action="store_true", help="Force JSON output")
    p.set_defaults(handler=cmd_density_witness)
    p = dens.add_parser("sample", parents=[common], help="Graph samples as CSV")
    p.add_argument("--count", type=int, default=500)
    p.add_argument("--max-norm", type=int, default=50)
    p.add_argument(
        "--region", default="-0.5,0.5,-1,1", help='"re_min,re_max,im_min,im_max[,d_min,d_max]"'
    )
    p.add_argument("--out", type=Path, default=None, help="CSV file (default: stdout)")
    p.set_defaults(handler=cmd_density_sample)

    p = sub.add_parser("verify-all", parents=[common], help="Run every invariant suite")
    p.set_defaults(handler=cmd_verify_all)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    """Entry point of the elliptic-dedekind command."""
    args = build_parser().parse_args(argv)
    settings = get_settings()

    logging.basicConfig(
        level=getattr(logging, (args.log_level or settings.log_level).upper(), logging.INFO),
        format="%(asctime)s - %(name)s - %(levelname)s - %(message)s",
        stream=sys.stderr,
    )

    try:
        session = open_session(args, settings)
        return int(args.handler(args, session))
    except EllipticDedekindError as e:
        logger.error(f"{type(e).__name__}: {e}")
        return e.exit_code
    except ValueError as e:
        logger.error(f"usage error: {e}")
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
