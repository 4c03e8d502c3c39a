"""Exact quadratic surds ``(p + q*sqrt(d)) / r`` and their continued fractions.

All arithmetic uses Python integers, so nothing here can overflow or round.
Quadratic irrationals have eventually periodic continued fractions and
therefore bounded partial quotients, i.e. they are badly approximable.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction


def _squarefree_split(d: int) -> tuple[int, int]:
    """Return (k, e) with d = k*k*e and e squarefree."""
    k, e = 1, d
    f = 2
    while f * f <= e:
        while e % (f * f) == 0:
            e //= f * f
            k *= f
        f += 1
    return k, e


@dataclass(frozen=True)
class QuadraticSurd:
    """The number ``(p + q*sqrt(d)) / r``, kept in lowest terms with ``r > 0``.

    ``d`` is reduced to its squarefree part; if it becomes 1 (or ``q == 0``)
    the value is rational and stored with ``q = 0, d = 1``.
    """

    p: int
    q: int
    d: int
    r: int = 1

    def __post_init__(self):
        p, q, d, r = (int(v) for v in (self.p, self.q, self.d, self.r))
        if r == 0:
            raise ZeroDivisionError("surd denominator is zero")
        if d < 0:
            raise ValueError("only real surds (d >= 0) are supported")
        if q != 0 and d != 0:
            k, d = _squarefree_split(d)
            q *= k
        if q == 0 or d in (0, 1):
            p, q, d = p + q * (1 if d == 1 else 0), 0, 1
        if r < 0:
            p, q, r = -p, -q, -r
        g = math.gcd(math.gcd(p, q), r)
        object.__setattr__(self, "p", p // g)
        object.__setattr__(self, "q", q // g)
        object.__setattr__(self, "d", d)
        object.__setattr__(self, "r", r // g)

    # construction helpers
    @classmethod
    def rational(cls, x: int | Fraction) -> "QuadraticSurd":
        x = Fraction(x)
        return cls(x.numerator, 0, 1, x.denominator)

    @classmethod
    def sqrt(cls, n: int) -> "QuadraticSurd":
        return cls(0, 1, n, 1)

    @classmethod
    def golden_ratio(cls) -> "QuadraticSurd":
        return cls(1, 1, 5, 2)

    @property
    def is_rational(self) -> bool:
        return self.q == 0

    def _coerce(self, other) -> "QuadraticSurd":
        if isinstance(other, QuadraticSurd):
            o = other
        elif isinstance(other, (int, Fraction)):
            o = QuadraticSurd.rational(other)
        else:
            return NotImplemented
        if not (self.is_rational or o.is_rational or self.d == o.d):
            raise ValueError(f"cannot mix sqrt({self.d}) and sqrt({o.d})")
        return o

    def _field_d(self, o: "QuadraticSurd") -> int:
        return o.d if self.is_rational else self.d

    def __add__(self, other):
        o = self._coerce(other)
        if o is NotImplemented:
            return o
        d = self._field_d(o)
        return QuadraticSurd(self.p * o.r + o.p * self.r, self.q * o.r + o.q * self.r, d, self.r * o.r)

    __radd__ = __add__

    def __neg__(self):
        return QuadraticSurd(-self.p, -self.q, self.d, self.r)

    def __sub__(self, other):
        o = self._coerce(other)
        if o is NotImplemented:
            return o
        return self + (-o)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        o = self._coerce(other)
        if o is NotImplemented:
            return o
        d = self._field_d(o)
        return QuadraticSurd(self.p * o.p + self.q * o.q * d, self.p * o.q + self.q * o.p, d, self.r * o.r)

    __rmul__ = __mul__

    def conjugate(self) -> "QuadraticSurd":
        return QuadraticSurd(self.p, -self.q, self.d, self.r)

    def norm(self) -> Fraction:
        """Field norm ``x * conj(x)`` (a rational number)."""
        return Fraction(self.p * self.p - self.q * self.q * self.d, self.r * self.r)

    def inverse(self) -> "QuadraticSurd":
        n = self.norm()
        if n == 0:
            raise ZeroDivisionError("inverse of zero")
        c = self.conjugate()
        return QuadraticSurd(c.p * n.denominator, c.q * n.denominator, c.d, c.r * n.numerator)

    def __truediv__(self, other):
        o = self._coerce(other)
        if o is NotImplemented:
            return o
        return self * o.inverse()

    def __rtruediv__(self, other):
        return self.inverse() * other

    def sign(self) -> int:
        # sign of p + q*sqrt(d), decided without floating point
        a, b = self.p, self.q
        if b == 0:
            return (a > 0) - (a < 0)
        if a >= 0 and b >= 0:
            return 1 if (a or b) else 0
        if a <= 0 and b <= 0:
            return -1
        lhs, rhs = a * a, b * b * self.d
        if a > 0:  # b < 0
            return (lhs > rhs) - (lhs < rhs)
        return (rhs > lhs) - (rhs < lhs)

    def __abs__(self):
        return -self if self.sign() < 0 else self

    def __lt__(self, other):
        return (self - other).sign() < 0

    def __le__(self, other):
        return (self - other).sign() <= 0

    def floor(self) -> int:
        s = math.isqrt(self.q * self.q * self.d)  # floor(|q| sqrt(d))
        if self.q == 0:
            return self.p // self.r
        exact = s * s == self.q * self.q * self.d
        if self.q > 0:
            return (self.p + s) // self.r
        # p - |q|sqrt(d) lies in (p - s - 1, p - s], equal only when exact
        return (self.p - s) // self.r if exact else (self.p - s - 1) // self.r

    def __float__(self) -> float:
        if self.q == 0:
            return self.p / self.r
        # Fraction keeps the division exact until the final rounding
        val = Fraction(self.p, self.r) + Fraction(self.q, self.r) * Fraction(_sqrt_fraction(self.d))
        return float(val)

    def __str__(self) -> str:
        if self.q == 0:
            return f"{self.p}/{self.r}" if self.r != 1 else f"{self.p}"
        return f"({self.p} + {self.q}*sqrt({self.d}))/{self.r}"


def _sqrt_fraction(d: int, bits: int = 120) -> Fraction:
    return Fraction(math.isqrt(d << (2 * bits)), 1 << bits)


@dataclass(frozen=True)
class ContinuedFraction:
    quotients: list[int]
    rational: bool
    preperiod: int | None = None
    period: int | None = None
    period_found_at: int | None = None  # iterations until a repeated state was seen


def cf_partial_quotients(x: QuadraticSurd, n: int) -> ContinuedFraction:
    """First ``n`` partial quotients of ``x`` in exact integer arithmetic.

    Irrational input runs the classical ``(P + sqrt(D)) / Q`` recurrence and
    reports the period once a state repeats; rational input runs Euclid and
    is flagged ``rational=True`` with its (terminating) expansion.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    if x.is_rational:
        num, den = x.p, x.r
        out: list[int] = []
        while den and len(out) < n:
            a = num // den
            out.append(a)
            num, den = den, num - a * den
        return ContinuedFraction(out, rational=True)

    # x = (p + q sqrt(d)) / r  ->  (P + sqrt(D)) / Q with Q | D - P^2
    p, q, d, r = x.p, x.q, x.d, x.r
    P, D, Q = p, q * q * d, r
    if q < 0:
        P, Q = -p, -r
    if (D - P * P) % Q:
        P, D, Q = P * abs(Q), D * Q * Q, Q * abs(Q)
    s = math.isqrt(D)
    seen: dict[tuple[int, int], int] = {}
    out = []
    pre = per = found = None
    i = 0
    while len(out) < n:
        if per is None:
            state = (P, Q)
            if state in seen:
                pre, per, found = seen[state], i - seen[state], i
            else:
                seen[state] = i
        a = (P + s) // Q if Q > 0 else (P + s + 1) // Q
        out.append(a)
        P = a * Q - P
        Q = (D - P * P) // Q
        i += 1
    if per is None:
        # keep iterating (without recording quotients) until the period shows up
        while per is None:
            state = (P, Q)
            if state in seen:
                pre, per, found = seen[state], i - seen[state], i
                break
            seen[state] = i
            a = (P + s) // Q if Q > 0 else (P + s + 1) // Q
            P = a * Q - P
            Q = (D - P * P) // Q
            i += 1
    return ContinuedFraction(out, rational=False, preperiod=pre, period=per, period_found_at=found)


def is_badly_approximable(x: QuadraticSurd) -> bool:
    """Quadratic irrationals are badly approximable, rationals are not."""
    return not x.is_rational


def surd_basis_admissible(r: QuadraticSurd, s: QuadraticSurd, u: QuadraticSurd, v: QuadraticSurd) -> bool:
    """Admissibility test for the lattice ``[[r, s], [u, v]] Z^2`` with surd entries.

    Uses the criterion on the row quotients: ``r/s`` and ``u/v`` must be
    distinct irrational badly approximable numbers (all entries nonzero).
    """
    if any(e.sign() == 0 for e in (r, s, u, v)):
        return False
    x, y = r / s, u / v
    return is_badly_approximable(x) and is_badly_approximable(y) and (x - y).sign() != 0
