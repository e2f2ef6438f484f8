"""Bracket recurrence [b_0, a_1, b_1, ..., a_n, b_n] over K and its identities.

    [b_i]            = b_i
    [b_i, a_{i+1}, b_{i+1}] = a_{i+1}
    [b_i, ..., a_j, b_j]  = (a_j/b_{j-1}) [b_i, ..., b_{j-1}] + (b_j/b_{j-1}) [b_i, ..., b_{j-2}]

The empty bracket [b_i, ..., b_{i-1}] is 0, which is consistent with the recurrence.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .cfmartin import CFExpansion
from .errors import InvariantViolationError
from .models import BracketReport
from .qfield import FieldContext, KElement, QuadInt, as_k

logger = logging.getLogger(__name__)

IDENTITIES = ("first_entry", "reversal", "determinant")


@dataclass(frozen=True)
class BracketSeq:
    """b_0..b_n (nonzero) and a_1..a_n."""

    b: tuple[KElement, ...]
    a: tuple[KElement, ...]

    def __post_init__(self) -> None:
        if len(self.b) != len(self.a) + 1:
            raise ValueError("a bracket sequence needs exactly one more b than a")
        if any(not bi for bi in self.b):
            raise ZeroDivisionError("bracket entries b_i must be nonzero")

    @property
    def n(self) -> int:
        return len(self.a)

    def reversed(self) -> BracketSeq:
        return BracketSeq(b=self.b[::-1], a=self.a[::-1])


@dataclass
class Brackets:
    """Memoised sub-brackets [b_i, ..., b_j] of one sequence."""

    seq: BracketSeq
    _memo: dict[tuple[int, int], KElement] = field(default_factory=dict, repr=False)

    def value(self, i: int, j: int) -> KElement:
        if j < i:
            return self.seq.b[0] * 0
        key = (i, j)
        cached = self._memo.get(key)
        if cached is not None:
            return cached

        b, a = self.seq.b, self.seq.a
        if j == i:
            v = b[i]
        elif j == i + 1:
            v = a[i]
        else:
            v = (a[j - 1] / b[j - 1]) * self.value(i, j - 1) + (b[j] / b[j - 1]) * self.value(
                i, j - 2
            )
        self._memo[key] = v
        return v


def bracket(seq: BracketSeq) -> KElement:
    """Exact value of [b_0, a_1, b_1, ..., a_n, b_n]."""
    return Brackets(seq).value(0, seq.n)


def _fail(identity: str, index: object, lhs: KElement, rhs: KElement) -> None:
    raise InvariantViolationError(
        f"{identity} identity fails at {index}: {lhs} != {rhs}", name=identity, index=index
    )


def verify_identities(seq: BracketSeq) -> BracketReport:
    """Check the first-entry expansion, reversal symmetry and determinant identity.

    first_entry:  [b_i..b_n] = (a_{i+1}/b_{i+1}) [b_{i+1}..b_n] + (b_i/b_{i+1}) [b_{i+2}..b_n]
    reversal:     [b_0, a_1, ..., a_n, b_n] = [b_n, a_n, ..., a_1, b_0]
    determinant:  [b_m..b_n][b_{m+1}..b_{n-1}] - [b_m..b_{n-1}][b_{m+1}..b_n] = (-1)^(n-m) b_n b_m
    """
    fwd = Brackets(seq)
    rev = Brackets(seq.reversed())
    b, a, n = seq.b, seq.a, seq.n
    checks = {name: 0 for name in IDENTITIES}

    for i in range(n):
        lhs = fwd.value(i, n)
        rhs = (a[i] / b[i + 1]) * fwd.value(i + 1, n) + (b[i] / b[i + 1]) * fwd.value(i + 2, n)
        if lhs != rhs:
            _fail("first_entry", i, lhs, rhs)
        checks["first_entry"] += 1

    for end in range(n + 1):
        lhs = fwd.value(0, end)
        # [b_end, a_end, ..., a_1, b_0] sits at the tail of the reversed sequence.
        rhs = rev.value(n - end, n)
        if lhs != rhs:
            _fail("reversal", end, lhs, rhs)
        checks["reversal"] += 1

    for top in range(1, n + 1):
        for m in range(top):
            lhs = fwd.value(m, top) * fwd.value(m + 1, top - 1) - fwd.value(
                m, top - 1
            ) * fwd.value(m + 1, top)
            rhs = b[top] * b[m] * (1 if (top - m) % 2 == 0 else -1)
            if lhs != rhs:
                _fail("determinant", (m, top), lhs, rhs)
            checks["determinant"] += 1

    return BracketReport(depth=n, trials=1, checks=checks)


def verify_convergent_lemma(exp: CFExpansion) -> bool:
    """p_n = [b_0, a_1, ..., a_n, b_n] and q_n = [b_1, a_2, ..., a_n, b_n] for every n."""
    K = exp.K
    seq = BracketSeq(
        b=tuple(as_k(bi, K) for bi in exp.b),
        a=tuple(as_k(ai, K) for ai in exp.a),
    )
    br = Brackets(seq)
    for n in range(len(exp) + 1):
        if br.value(0, n) != exp.p(n):
            _fail("convergent_p", n, br.value(0, n), exp.p(n))
        if br.value(1, n) != exp.q(n):
            _fail("convergent_q", n, br.value(1, n), exp.q(n))
    return True


def random_sequence(
    K: FieldContext,
    depth: int,
    rng: np.random.Generator,
    bound: int = 5,
    max_den: Optional[int] = None,
) -> BracketSeq:
    """Random sequence with coordinates in [-bound, bound], all b_i nonzero.

    With max_den the entries become fractions with denominators in [1, max_den].
    """

    def entry(nonzero: bool) -> KElement:
        while True:
            x, y = (int(v) for v in rng.integers(-bound, bound + 1, size=2))
            den = int(rng.integers(1, max_den + 1)) if max_den else 1
            u = QuadInt(x, y, K)
            if u or not nonzero:
                return KElement.make(u, den)

    b = tuple(entry(True) for _ in range(depth + 1))
    a = tuple(entry(False) for _ in range(depth))
    return BracketSeq(b=b, a=a)


def verify_random(
    K: FieldContext, depth: int, trials: int, seed: int, max_den: Optional[int] = None
) -> BracketReport:
    """Run verify_identities on random sequences of every depth up to depth."""
    rng = np.random.default_rng(seed)
    totals = {name: 0 for name in IDENTITIES}
    for t in range(trials):
        n = int(rng.integers(1, depth + 1))
        report = verify_identities(random_sequence(K, n, rng, max_den=max_den))
        for name, count in report.checks.items():
            totals[name] += count
        logger.debug(f"bracket trial {t}: depth {n} ok")
    logger.info(f"bracket identities hold on {trials} random sequences (D={K.D})")
    return BracketReport(depth=depth, trials=trials, checks=totals)
