"""Exact arithmetic in O_K and K = Q(sqrt(-D)), lattice geometry and cosets of O_K/cO_K.

Elements are stored by their integer coordinates over the basis (1, w) where
w = i*sqrt(D) when -D = 2, 3 (mod 4) and w = (1 + i*sqrt(D))/2 when -D = 1 (mod 4).
In both cases w satisfies w^2 = t*w - n with (t, n) = (0, D) or (1, (1 + D)/4).
"""

from __future__ import annotations

import logging
import math
import re
from dataclasses import dataclass, field
from functools import cached_property
from typing import Union

import numpy as np

from .errors import ElementParseError, InvalidFieldError, ZeroModulusError

logger = logging.getLogger(__name__)

# Relative slack used when comparing floating distances for ties.
TIE_TOLERANCE = 1e-12

_ELEMENT_RE = re.compile(
    r"(?P<x>[+-]?\d+)?(?P<wpart>(?P<sign>[+-])?(?:(?P<y>\d+)\*?)?w)?"
)


def is_squarefree(n: int) -> bool:
    """Check squarefreeness by trial division (D is small in practice)."""
    if n < 1:
        return False
    k = 2
    while k * k <= n:
        if n % (k * k) == 0:
            return False
        k += 1
    return True


def xgcd(a: int, b: int) -> tuple[int, int, int]:
    """Extended Euclid: return (g, u, v) with u*a + v*b = g >= 0."""
    old_r, r = a, b
    old_u, u = 1, 0
    old_v, v = 0, 1
    while r:
        q = old_r // r
        old_r, r = r, old_r - q * r
        old_u, u = u, old_u - q * u
        old_v, v = v, old_v - q * v
    if old_r < 0:
        old_r, old_u, old_v = -old_r, -old_u, -old_v
    return old_r, old_u, old_v


@dataclass(frozen=True)
class FieldContext:
    """The field Q(sqrt(-D)) with its ring basis (1, w)."""

    D: int
    d_K: int = field(compare=False)
    trace: int = field(compare=False)
    norm_w: int = field(compare=False)
    omega: complex = field(compare=False)
    area: float = field(compare=False)

    def elt(self, x: int, y: int = 0) -> QuadInt:
        return QuadInt(int(x), int(y), self)

    @property
    def zero(self) -> QuadInt:
        return QuadInt(0, 0, self)

    @property
    def one(self) -> QuadInt:
        return QuadInt(1, 0, self)

    @property
    def w(self) -> QuadInt:
        return QuadInt(0, 1, self)

    @property
    def sqrt_abs_disc(self) -> float:
        return math.sqrt(abs(self.d_K))

    def units(self) -> tuple[QuadInt, ...]:
        """All units of O_K (6 for D = 3, 4 for D = 1, else +-1)."""
        bound = 2
        found = [
            QuadInt(x, y, self)
            for y in range(-bound, bound + 1)
            for x in range(-bound, bound + 1)
            if x * x + self.trace * x * y + self.norm_w * y * y == 1
        ]
        return tuple(sorted(found, key=lambda u: (u.x, u.y)))

    def is_unit(self, u: QuadInt) -> bool:
        return u.norm() == 1

    def embed(self, xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
        """Complex embedding of coordinate arrays."""
        return np.asarray(xs, dtype=float) + np.asarray(ys, dtype=float) * self.omega

    def coordinates(self, z: complex) -> tuple[float, float]:
        """Real coordinates (s, t) with z = s + t*w."""
        t = z.imag / self.omega.imag
        return z.real - t * self.omega.real, t

    def parse(self, text: str) -> QuadInt:
        return parse_quadint(text, self)

    def parse_k(self, text: str) -> KElement:
        return parse_kelement(text, self)


def make_field(D: int) -> FieldContext:
    """Build the context of K = Q(sqrt(-D)) for squarefree D >= 1."""
    if isinstance(D, bool) or not isinstance(D, int) or not is_squarefree(D):
        raise InvalidFieldError(f"D must be a positive squarefree integer, got {D!r}")

    if (-D) % 4 == 1:
        d_K = -D
        trace, norm_w = 1, (1 + D) // 4
        omega = complex(0.5, math.sqrt(D) / 2)
    else:
        d_K = -4 * D
        trace, norm_w = 0, D
        omega = complex(0.0, math.sqrt(D))

    ctx = FieldContext(
        D=D,
        d_K=d_K,
        trace=trace,
        norm_w=norm_w,
        omega=omega,
        area=math.sqrt(abs(d_K)) / 2,
    )
    logger.debug(f"Field Q(sqrt(-{D})): d_K={d_K}, omega={omega}")
    return ctx


@dataclass(frozen=True)
class QuadInt:
    """Element x + y*w of O_K."""

    x: int
    y: int
    K: FieldContext = field(repr=False)

    def _coerce(self, other: object) -> QuadInt | None:
        if isinstance(other, QuadInt):
            if other.K != self.K:
                raise ValueError("elements of different fields")
            return other
        if isinstance(other, int) and not isinstance(other, bool):
            return QuadInt(other, 0, self.K)
        return None

    def __add__(self, other: object) -> QuadInt:
        o = self._coerce(other)
        if o is None:
            return NotImplemented
        return QuadInt(self.x + o.x, self.y + o.y, self.K)

    def __radd__(self, other: object) -> QuadInt:
        return self.__add__(other)

    def __neg__(self) -> QuadInt:
        return QuadInt(-self.x, -self.y, self.K)

    def __sub__(self, other: object) -> QuadInt:
        o = self._coerce(other)
        if o is None:
            return NotImplemented
        return QuadInt(self.x - o.x, self.y - o.y, self.K)

    def __rsub__(self, other: object) -> QuadInt:
        o = self._coerce(other)
        if o is None:
            return NotImplemented
        return o - self

    def __mul__(self, other: object) -> QuadInt:
        o = self._coerce(other)
        if o is None:
            return NotImplemented
        K = self.K
        yy = self.y * o.y
        return QuadInt(
            self.x * o.x - K.norm_w * yy,
            self.x * o.y + self.y * o.x + K.trace * yy,
            K,
        )

    def __rmul__(self, other: object) -> QuadInt:
        return self.__mul__(other)

    def __truediv__(self, other: object) -> KElement:
        return KElement.from_quadint(self) / other

    def __pow__(self, k: int) -> QuadInt:
        result = self.K.one
        base = self
        while k > 0:
            if k & 1:
                result = result * base
            base = base * base
            k >>= 1
        return result

    def __bool__(self) -> bool:
        return self.x != 0 or self.y != 0

    def conjugate(self) -> QuadInt:
        # conj(w) = t - w
        return QuadInt(self.x + self.K.trace * self.y, -self.y, self.K)

    def norm(self) -> int:
        K = self.K
        return self.x * self.x + K.trace * self.x * self.y + K.norm_w * self.y * self.y

    def to_complex(self) -> complex:
        return self.x + self.y * self.K.omega

    def sort_key(self) -> tuple[int, int, int]:
        return (self.norm(), self.x, self.y)

    def __str__(self) -> str:
        return format_coords(self.x, self.y)


def format_coords(x: int, y: int) -> str:
    """Render coordinates as "x+y*w" ("3+1*w", "-2*w", "5")."""
    if y == 0:
        return str(x)
    if x == 0:
        return f"{y}*w"
    sign = "+" if y > 0 else "-"
    return f"{x}{sign}{abs(y)}*w"


def parse_quadint(text: str, K: FieldContext) -> QuadInt:
    """Parse "x+y*w" (also "y*w", "-w", "x")."""
    s = re.sub(r"\s*([+\-*])\s*", r"\1", text.strip())
    m = _ELEMENT_RE.fullmatch(s)
    if not s or m is None or (m.group("x") is None and m.group("wpart") is None):
        raise ElementParseError(f"cannot parse element {text!r}; expected 'x+y*w'")
    x = int(m.group("x")) if m.group("x") is not None else 0
    y = 0
    if m.group("wpart") is not None:
        y = int(m.group("y")) if m.group("y") is not None else 1
        if m.group("sign") == "-":
            y = -y
    return QuadInt(x, y, K)


def divides(c: QuadInt, u: QuadInt) -> bool:
    """True when c | u in O_K."""
    if not c:
        return not u
    n = c.norm()
    prod = u * c.conjugate()
    return prod.x % n == 0 and prod.y % n == 0


def exact_div(u: QuadInt, c: QuadInt) -> QuadInt:
    """Return u / c, which must lie in O_K."""
    if not c:
        raise ZeroModulusError("division by zero in O_K")
    n = c.norm()
    prod = u * c.conjugate()
    if prod.x % n or prod.y % n:
        raise ValueError(f"{c} does not divide {u}")
    return QuadInt(prod.x // n, prod.y // n, u.K)


@dataclass(frozen=True)
class KElement:
    """Element num/den of K in lowest terms (den > 0, content of (x, y, den) is 1)."""

    num: QuadInt
    den: int = 1

    @classmethod
    def make(cls, num: QuadInt, den: int) -> KElement:
        if den == 0:
            raise ZeroDivisionError("zero denominator")
        if den < 0:
            num, den = -num, -den
        g = math.gcd(num.x, num.y, den)
        if g > 1:
            num = QuadInt(num.x // g, num.y // g, num.K)
            den //= g
        return cls(num, den)

    @classmethod
    def from_quadint(cls, u: QuadInt) -> KElement:
        return cls(u, 1)

    @property
    def K(self) -> FieldContext:
        return self.num.K

    def _coerce(self, other: object) -> KElement | None:
        if isinstance(other, KElement):
            return other
        if isinstance(other, QuadInt):
            return KElement(other, 1)
        if isinstance(other, int) and not isinstance(other, bool):
            return KElement(QuadInt(other, 0, self.K), 1)
        return None

    def __add__(self, other: object) -> KElement:
        o = self._coerce(other)
        if o is None:
            return NotImplemented
        return KElement.make(self.num * o.den + o.num * self.den, self.den * o.den)

    def __radd__(self, other: object) -> KElement:
        return self.__add__(other)

    def __neg__(self) -> KElement:
        return KElement(-self.num, self.den)

    def __sub__(self, other: object) -> KElement:
        o = self._coerce(other)
        if o is None:
            return NotImplemented
        return self + (-o)

    def __rsub__(self, other: object) -> KElement:
        o = self._coerce(other)
        if o is None:
            return NotImplemented
        return o - self

    def __mul__(self, other: object) -> KElement:
        o = self._coerce(other)
        if o is None:
            return NotImplemented
        return KElement.make(self.num * o.num, self.den * o.den)

    def __rmul__(self, other: object) -> KElement:
        return self.__mul__(other)

    def __truediv__(self, other: object) -> KElement:
        o = self._coerce(other)
        if o is None:
            return NotImplemented
        if not o.num:
            raise ZeroDivisionError("division by zero in K")
        # (a/d) / (b/e) = a*e*conj(b) / (d*N(b))
        return KElement.make(self.num * o.num.conjugate() * o.den, self.den * o.num.norm())

    def __rtruediv__(self, other: object) -> KElement:
        o = self._coerce(other)
        if o is None:
            return NotImplemented
        return o / self

    def __bool__(self) -> bool:
        return bool(self.num)

    def inverse(self) -> KElement:
        return KElement(self.K.one, 1) / self

    def conjugate(self) -> KElement:
        return KElement(self.num.conjugate(), self.den)

    def is_integral(self) -> bool:
        return self.den == 1

    def to_quadint(self) -> QuadInt:
        if self.den != 1:
            raise ValueError(f"{self} is not in O_K")
        return self.num

    def to_complex(self) -> complex:
        return self.num.to_complex() / self.den

    def __str__(self) -> str:
        if self.den == 1:
            return str(self.num)
        return f"({self.num})/{self.den}"


def as_k(value: Union[int, QuadInt, KElement], K: FieldContext) -> KElement:
    if isinstance(value, KElement):
        return value
    if isinstance(value, QuadInt):
        return KElement(value, 1)
    return KElement(QuadInt(int(value), 0, K), 1)


def parse_kelement(text: str, K: FieldContext) -> KElement:
    """Parse "x+y*w", "(x+y*w)/d" or "x/d"."""
    s = text.strip()
    if "/" in s:
        head, _, tail = s.rpartition("/")
        head = head.strip()
        if head.startswith("(") and head.endswith(")"):
            head = head[1:-1]
        try:
            den = int(tail)
        except ValueError as e:
            raise ElementParseError(f"bad denominator in {text!r}") from e
        if den == 0:
            raise ElementParseError(f"zero denominator in {text!r}")
        return KElement.make(parse_quadint(head, K), den)
    return KElement(parse_quadint(s, K), 1)


def parse_complex(text: str) -> complex:
    """Parse a locale-free "re,im" pair."""
    parts = text.split(",")
    if len(parts) != 2:
        raise ElementParseError(f"expected 're,im', got {text!r}")
    try:
        return complex(float(parts[0]), float(parts[1]))
    except ValueError as e:
        raise ElementParseError(f"expected 're,im', got {text!r}") from e


# ----------------------------------------------------------------------------
# Lattice geometry
# ----------------------------------------------------------------------------


def lattice_ball(w: complex, radius: float, K: FieldContext) -> list[QuadInt]:
    """All a in O_K with |w - a| <= radius."""
    wi = K.omega.imag
    out = []
    y_lo = math.ceil((w.imag - radius) / wi)
    y_hi = math.floor((w.imag + radius) / wi)
    for y in range(y_lo, y_hi + 1):
        dy = w.imag - y * wi
        span = radius * radius - dy * dy
        if span < 0:
            continue
        half = math.sqrt(span)
        cx = w.real - y * K.omega.real
        for x in range(math.ceil(cx - half), math.floor(cx + half) + 1):
            out.append(QuadInt(x, y, K))
    return out


def nearest_lattice(w: complex, K: FieldContext) -> QuadInt:
    """The a in O_K closest to w; ties go to smallest N(a), then lexicographic (x, y)."""
    if not (math.isfinite(w.real) and math.isfinite(w.imag)):
        raise ValueError(f"nearest_lattice needs a finite point, got {w}")
    _, t = K.coordinates(w)
    candidates = []
    for y in range(math.floor(t) - 1, math.floor(t) + 3):
        cx = w.real - y * K.omega.real
        for x in range(math.floor(cx) - 1, math.floor(cx) + 3):
            a = QuadInt(x, y, K)
            candidates.append((abs(w - a.to_complex()), a))
    dmin = min(d for d, _ in candidates)
    slack = dmin * TIE_TOLERANCE + 1e-15
    tied = [a for d, a in candidates if d <= dmin + slack]
    return min(tied, key=QuadInt.sort_key)


def nearest_lattice_distance(points: np.ndarray, K: FieldContext) -> np.ndarray:
    """Vectorised dist(p, O_K) for an array of complex points."""
    points = np.asarray(points, dtype=complex)
    t = np.floor(points.imag / K.omega.imag)
    best = np.full(points.shape, np.inf)
    for dy in (-1, 0, 1, 2):
        y = t + dy
        shifted = points - y * K.omega
        base = np.floor(shifted.real)
        for dx in (-1, 0, 1, 2):
            d = np.abs(shifted - (base + dx))
            np.minimum(best, d, out=best)
    return best


def lattice_points(K: FieldContext, radius: float) -> tuple[np.ndarray, np.ndarray]:
    """Coordinates (xs, ys) of all lattice points with |x + y*w| <= radius."""
    wi = K.omega.imag
    y_max = int(math.floor(radius / wi))
    x_max = int(math.ceil(radius + y_max * abs(K.omega.real))) + 1
    ys, xs = np.meshgrid(
        np.arange(-y_max, y_max + 1, dtype=np.int64),
        np.arange(-x_max, x_max + 1, dtype=np.int64),
        indexing="ij",
    )
    xs, ys = xs.ravel(), ys.ravel()
    values = K.embed(xs, ys)
    mask = np.abs(values) <= radius
    return xs[mask], ys[mask]


def elements_by_norm(
    K: FieldContext, max_norm: int, min_norm: int = 1
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """All elements with min_norm <= N(u) <= max_norm, sorted by (N(u), x, y)."""
    xs, ys = lattice_points(K, math.sqrt(max_norm) + 1e-9)
    norms = xs * xs + K.trace * xs * ys + K.norm_w * ys * ys
    mask = (norms >= min_norm) & (norms <= max_norm)
    xs, ys, norms = xs[mask], ys[mask], norms[mask]
    order = np.lexsort((ys, xs, norms))
    return xs[order], ys[order], norms[order]


# ----------------------------------------------------------------------------
# Cosets of O_K / cO_K
# ----------------------------------------------------------------------------


@dataclass(frozen=True)
class CosetTable:
    """Representatives {i + j*w : 0 <= i < d1, 0 <= j < d2} of O_K / cO_K.

    The sublattice cO_K has the Hermite basis (d1, 0), (h, d2) in coordinates, and
    position(i, j) = i + d1*j. The representative of 0 sits at position 0.
    """

    modulus: QuadInt
    d1: int
    d2: int
    h: int

    @property
    def K(self) -> FieldContext:
        return self.modulus.K

    def __len__(self) -> int:
        return self.d1 * self.d2

    @cached_property
    def rep_x(self) -> np.ndarray:
        return np.tile(np.arange(self.d1, dtype=np.int64), self.d2)

    @cached_property
    def rep_y(self) -> np.ndarray:
        return np.repeat(np.arange(self.d2, dtype=np.int64), self.d1)

    @cached_property
    def reps(self) -> tuple[QuadInt, ...]:
        K = self.K
        return tuple(
            QuadInt(i, j, K) for j in range(self.d2) for i in range(self.d1)
        )

    def index(self, i: int, j: int) -> int:
        """Position of the reduced coordinates (i, j)."""
        return i + self.d1 * j

    def reduce_coords(self, x: int, y: int) -> tuple[int, int]:
        j = y % self.d2
        k = (y - j) // self.d2
        i = (x - k * self.h) % self.d1
        return i, j

    def reduce_many(self, xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
        """Vectorised positions of many (x, y) pairs."""
        xs = np.asarray(xs, dtype=np.int64)
        ys = np.asarray(ys, dtype=np.int64)
        j = np.mod(ys, self.d2)
        k = (ys - j) // self.d2
        i = np.mod(xs - k * self.h, self.d1)
        return i + self.d1 * j


def coset_reps(c: QuadInt) -> CosetTable:
    """Coset table of O_K / cO_K from the Hermite form of multiplication by c."""
    if not c:
        raise ZeroModulusError("coset table of the zero modulus")
    K = c.K
    # Columns of multiplication by c in the basis (1, w): c*1 and c*w.
    v1 = (c.x, c.y)
    v2 = (-K.norm_w * c.y, c.x + K.trace * c.y)
    a, b = v1[1], v2[1]
    g, u, v = xgcd(a, b)
    top2 = u * v1[0] + v * v2[0]
    d1 = abs((b // g) * v1[0] - (a // g) * v2[0])
    d2 = g
    table = CosetTable(modulus=c, d1=d1, d2=d2, h=top2 % d1)
    if d1 * d2 != c.norm():
        raise ArithmeticError(f"Hermite form mismatch for c={c}: {d1}*{d2} != {c.norm()}")
    return table


def reduce_mod(mu: QuadInt, table: CosetTable) -> int:
    """Position of the canonical representative of mu modulo c."""
    i, j = table.reduce_coords(mu.x, mu.y)
    return table.index(i, j)
