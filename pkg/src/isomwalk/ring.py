"""Exact arithmetic in the quadratic ring attached to a rational-cosine angle.

An angle with cos(theta) = b/(2a) (gcd(a,b)=1, a >= 2, |b| < 2a) makes
z = e^{i theta} a root of the palindromic integer polynomial
a z^2 - b z + a, so the ring Z[1/a][z] consists of values (u + v z)/a^k
with integer u, v.  Walk endpoints, test frequencies and polynomial values
all live in this ring, which is what makes exact enumeration and exact
rounding-error analysis possible.  Angles given only numerically get a
high-precision embedding instead and are rejected by the exact-only
operations.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from typing import Union

import mpmath

from .errors import ExactnessUnavailable, PrecisionShortfall

DEFAULT_PRECISION_BITS = 64


class RationalCosine:
    """An angle theta with cos(theta) = b/(2a), held exactly."""

    __slots__ = ("_a", "_b", "_zpow_p", "_zpow_q", "__dict__")

    def __init__(self, a: int, b: int):
        if a < 2:
            raise ValueError(f"a must be >= 2, got {a}")
        if abs(b) >= 2 * a:
            raise ValueError(f"|b| must be < 2a, got b={b}, a={a}")
        if math.gcd(a, b) != 1:
            raise ValueError(f"gcd(a, b) must be 1, got a={a}, b={b}")
        self._a = a
        self._b = b
        # Coordinate tables for z^j = (p_j + q_j z) / a^(j-1), j >= 1.
        self._zpow_p = [None, 0]
        self._zpow_q = [None, 1]

    @property
    def a(self) -> int:
        return self._a

    @property
    def b(self) -> int:
        return self._b

    @property
    def cos_value(self) -> Fraction:
        return Fraction(self._b, 2 * self._a)

    @cached_property
    def discriminant(self) -> int:
        """4a^2 - b^2 > 0; its square root scales the imaginary part of z."""
        return 4 * self._a * self._a - self._b * self._b

    @cached_property
    def is_exact_gaussian(self) -> bool:
        """True when sqrt(4a^2-b^2) is an integer, so z has rational parts."""
        r = math.isqrt(self.discriminant)
        return r * r == self.discriminant

    @property
    def minimal_polynomial(self) -> tuple[int, int, int]:
        """Coefficients (c0, c1, c2) of a z^2 - b z + a, ascending."""
        return (self._a, -self._b, self._a)

    def theta(self, precision_bits: int = DEFAULT_PRECISION_BITS) -> mpmath.mpf:
        """The angle in (0, pi) as a high-precision real."""
        with mpmath.workprec(precision_bits + 16):
            return mpmath.acos(mpmath.mpf(self._b) / (2 * self._a))

    def zero(self) -> "RingPoint":
        return RingPoint(self, 0, 0, 0)

    def one(self) -> "RingPoint":
        return RingPoint(self, 1, 0, 0)

    @cached_property
    def z(self) -> "RingPoint":
        return RingPoint(self, 0, 1, 0)

    def from_int(self, n: int) -> "RingPoint":
        return RingPoint(self, n, 0, 0)

    def _pq(self, j: int) -> tuple[int, int]:
        """Integer coordinates of z^j for j >= 1 (denominator a^(j-1))."""
        p, q, a, b = self._zpow_p, self._zpow_q, self._a, self._b
        while len(p) <= j:
            p.append(-a * q[-1])
            q.append(a * p[-2] + b * q[-1])
        return p[j], q[j]

    def z_power(self, j: int) -> "RingPoint":
        """z^j as a ring point; negative powers via z^-1 = conj(z)."""
        if j == 0:
            return self.one()
        if j < 0:
            return self.z_power(-j).conj()
        pj, qj = self._pq(j)
        return RingPoint(self, pj, qj, j - 1)

    def to_json(self) -> dict:
        return {"a": self._a, "b": self._b}

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, RationalCosine)
            and self._a == other._a
            and self._b == other._b
        )

    def __hash__(self) -> int:
        return hash(("RationalCosine", self._a, self._b))

    def __repr__(self) -> str:
        return f"RationalCosine(a={self._a}, b={self._b})"


class NumericAngle:
    """An angle known only as a high-precision real in [0, 2 pi)."""

    __slots__ = ("_theta", "_precision_bits")

    def __init__(self, theta, precision_bits: int = DEFAULT_PRECISION_BITS):
        if precision_bits < 64:
            raise ValueError("precision_bits must be >= 64")
        with mpmath.workprec(precision_bits + 16):
            t = mpmath.mpf(theta)
            if t < 0 or t >= 2 * mpmath.pi:
                raise ValueError("theta must lie in [0, 2*pi)")
        self._theta = t
        self._precision_bits = precision_bits

    @property
    def precision_bits(self) -> int:
        return self._precision_bits

    def theta(self, precision_bits: int | None = None) -> mpmath.mpf:
        bits = self._precision_bits if precision_bits is None else precision_bits
        if bits > self._precision_bits:
            raise PrecisionShortfall(
                f"angle was supplied with {self._precision_bits} bits, "
                f"{bits} requested",
                required_bits=bits,
            )
        return self._theta

    def to_json(self) -> dict:
        return {
            "theta": mpmath.nstr(self._theta, int(self._precision_bits / 3.3) + 2),
            "precision_bits": self._precision_bits,
        }

    def __repr__(self) -> str:
        return f"NumericAngle({mpmath.nstr(self._theta, 17)}, {self._precision_bits})"


Angle = Union[RationalCosine, NumericAngle]


def require_exact(angle: Angle) -> RationalCosine:
    """Return the angle if exact, else signal that exactness is unavailable."""
    if not isinstance(angle, RationalCosine):
        raise ExactnessUnavailable(
            "this operation needs a rational-cosine angle; "
            "a numeric angle only supports the embedded/float paths"
        )
    return angle


def _canonical(a: int, u: int, v: int, k: int) -> tuple[int, int, int]:
    if u == 0 and v == 0:
        return 0, 0, 0
    while k > 0 and u % a == 0 and v % a == 0:
        u //= a
        v //= a
        k -= 1
    return u, v, k


class RingPoint:
    """(u + v*z)/a^k, stored canonically: k = 0 or not both u, v divisible by a.

    Immutable value type; equality and hashing use the canonical triple, so
    ring points deduplicate exactly in sets and dict keys.
    """

    __slots__ = ("_angle", "_u", "_v", "_k")

    def __init__(self, angle: RationalCosine, u: int, v: int, k: int = 0):
        if k < 0:
            raise ValueError("denominator exponent k must be >= 0")
        u, v, k = _canonical(angle.a, u, v, k)
        self._angle = angle
        self._u = u
        self._v = v
        self._k = k

    @property
    def angle(self) -> RationalCosine:
        return self._angle

    @property
    def u(self) -> int:
        return self._u

    @property
    def v(self) -> int:
        return self._v

    @property
    def k(self) -> int:
        return self._k

    @property
    def triple(self) -> tuple[int, int, int]:
        return (self._u, self._v, self._k)

    @property
    def is_zero(self) -> bool:
        return self._u == 0 and self._v == 0

    def _check_same_angle(self, other: "RingPoint") -> None:
        if self._angle != other._angle:
            raise ValueError("ring points belong to different angles")

    def __add__(self, other: "RingPoint") -> "RingPoint":
        if not isinstance(other, RingPoint):
            return NotImplemented
        self._check_same_angle(other)
        a = self._angle.a
        k = max(self._k, other._k)
        s1 = a ** (k - self._k)
        s2 = a ** (k - other._k)
        return RingPoint(
            self._angle,
            self._u * s1 + other._u * s2,
            self._v * s1 + other._v * s2,
            k,
        )

    def __neg__(self) -> "RingPoint":
        return RingPoint(self._angle, -self._u, -self._v, self._k)

    def __sub__(self, other: "RingPoint") -> "RingPoint":
        if not isinstance(other, RingPoint):
            return NotImplemented
        return self + (-other)

    def __mul__(self, other) -> "RingPoint":
        if isinstance(other, int):
            return RingPoint(self._angle, self._u * other, self._v * other, self._k)
        if not isinstance(other, RingPoint):
            return NotImplemented
        self._check_same_angle(other)
        a, b = self._angle.a, self._angle.b
        u1, v1, u2, v2 = self._u, self._v, other._u, other._v
        # (u1+v1 z)(u2+v2 z) with z^2 = (b z - a)/a, cleared to denominator a.
        u = a * (u1 * u2 - v1 * v2)
        v = a * (u1 * v2 + u2 * v1) + b * v1 * v2
        return RingPoint(self._angle, u, v, self._k + other._k + 1)

    def __rmul__(self, other) -> "RingPoint":
        if isinstance(other, int):
            return self.__mul__(other)
        return NotImplemented

    def conj(self) -> "RingPoint":
        """Complex conjugate; exact because conj(z) = (b/a) - z = z^-1."""
        a, b = self._angle.a, self._angle.b
        return RingPoint(
            self._angle, a * self._u + b * self._v, -a * self._v, self._k + 1
        )

    def mul_z(self, power: int) -> "RingPoint":
        """Multiply by z^power (either sign), exactly."""
        if power == 0:
            return self
        return self * self._angle.z_power(power)

    def real_part(self) -> Fraction:
        """Re of the embedded value, exact (Re z = b/(2a))."""
        a, b = self._angle.a, self._angle.b
        return Fraction(2 * a * self._u + b * self._v, 2 * a ** (self._k + 1))

    def norm_sq(self) -> Fraction:
        """|value|^2, exact (uses z * conj(z) = 1)."""
        a, b = self._angle.a, self._angle.b
        u, v = self._u, self._v
        return Fraction(a * (u * u + v * v) + b * u * v, a ** (2 * self._k + 1))

    def to_text(self) -> str:
        """Canonical textual form "(u+v*z)/a^k"."""
        sign = "+" if self._v >= 0 else "-"
        return f"({self._u}{sign}{abs(self._v)}*z)/{self._angle.a}^{self._k}"

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, RingPoint)
            and self._angle == other._angle
            and self._u == other._u
            and self._v == other._v
            and self._k == other._k
        )

    def __hash__(self) -> int:
        return hash((self._u, self._v, self._k))

    def __repr__(self) -> str:
        return f"RingPoint{(self._u, self._v, self._k)}"


def ring_point_from_text(angle: RationalCosine, text: str) -> RingPoint:
    """Parse the canonical textual form back into a ring point."""
    import re

    m = re.fullmatch(
        r"\((-?\d+)([+-]\d+)\*z\)(?:/(\d+)\^(\d+))?", text.replace(" ", "")
    )
    if not m:
        raise ValueError(f"not a ring point: {text!r}")
    u, v = int(m.group(1)), int(m.group(2))
    k = int(m.group(4)) if m.group(4) else 0
    if m.group(3) and int(m.group(3)) != angle.a:
        raise ValueError(f"denominator base {m.group(3)} does not match a={angle.a}")
    return RingPoint(angle, u, v, k)


class EmbeddingContext:
    """Numeric evaluation layer: z = (b + i*sqrt(4a^2-b^2))/(2a) at fixed precision."""

    def __init__(self, angle: Angle, precision_bits: int = DEFAULT_PRECISION_BITS):
        if precision_bits < 53:
            raise ValueError("precision_bits must be >= 53")
        self.angle = angle
        self.precision_bits = precision_bits
        with mpmath.workprec(precision_bits + 16):
            if isinstance(angle, RationalCosine):
                self.s = mpmath.sqrt(angle.discriminant)
                self.z = mpmath.mpc(angle.b, self.s) / (2 * angle.a)
            else:
                t = angle.theta(min(precision_bits, angle.precision_bits))
                self.z = mpmath.mpc(mpmath.cos(t), mpmath.sin(t))
                self.s = mpmath.sin(t) * 2  # kept for uniformity; unused numerically

    @property
    def is_exact_gaussian(self) -> bool:
        return isinstance(self.angle, RationalCosine) and self.angle.is_exact_gaussian

    def embed(self, x: RingPoint) -> mpmath.mpc:
        """Numeric value of a ring point, relative error <= 2^-(precision_bits-8)."""
        with mpmath.workprec(self.precision_bits + 16):
            num = mpmath.mpc(x.u) + x.v * self.z
            if x.k == 0:
                return num
            return num / mpmath.mpf(self.angle.a) ** x.k

    def embed_z_power(self, j: int) -> mpmath.mpc:
        """Numeric z^j without building the exact ring point (for big |j|)."""
        with mpmath.workprec(self.precision_bits + 16):
            return self.z ** j


def ring_add(x: RingPoint, y: RingPoint) -> RingPoint:
    """Exact sum of canonical ring points (function form of ``x + y``)."""
    return x + y


def ring_mul_z(x: RingPoint, power: int) -> RingPoint:
    """Exact x * z^power (function form of ``x.mul_z(power)``)."""
    return x.mul_z(power)


def embed(x: RingPoint, ctx: EmbeddingContext) -> mpmath.mpc:
    """Numeric value of a ring point under the given embedding context."""
    if isinstance(ctx.angle, RationalCosine) and ctx.angle != x.angle:
        raise ValueError("embedding context belongs to a different angle")
    return ctx.embed(x)


def cos_multiple(angle: Angle, j: int) -> Fraction:
    """Exact rational cos(j*theta) via the three-term recurrence.

    Fully reduced; no denominator shape is assumed (b may be even).
    """
    exact = require_exact(angle)
    j = abs(j)
    if j == 0:
        return Fraction(1)
    # cos(j theta) = Re z^j = (2a p_j + b q_j) / (2 a^j).
    pj, qj = exact._pq(j)
    return Fraction(2 * exact.a * pj + exact.b * qj, 2 * exact.a ** j)


def real_pairing(xi: RingPoint, j: int) -> Fraction:
    """Exact <xi, z^j> = Re(conj(xi) * z^j); the walk's window values.

    Satisfies y_{j+1} + y_{j-1} = (b/a) y_j exactly in j.
    """
    return (xi.conj() * xi.angle.z_power(j)).real_part()


@dataclass
class DiophantineReport:
    """Running minima of q^m * dist(q*theta, 2*pi*Z); empirical evidence only."""

    m: int
    q_max: int
    minima: list = field(default_factory=list)  # (q, value) at each new minimum
    q_min: int = 0
    value: float = float("inf")
    flagged: bool = False
    note: str = ""

    def to_json(self) -> dict:
        return {
            "m": self.m,
            "q_max": self.q_max,
            "minima": [[q, float(val)] for q, val in self.minima],
            "q_min": self.q_min,
            "value": float(self.value),
            "flagged": self.flagged,
            "note": self.note,
            "label": "evidence",
        }


def diophantine_scan(
    angle: Angle,
    q_max: int,
    m: int,
    precision_bits: int | None = None,
) -> DiophantineReport:
    """Scan q <= q_max for the minimum of q^m * dist(q*theta, 2*pi*Z).

    Reports the full running-minimum sequence.  This is empirical evidence
    about the angle's approximation quality, never a certificate.
    """
    if q_max < 1 or m < 1:
        raise ValueError("q_max and m must be >= 1")
    needed = q_max.bit_length() + 96
    if isinstance(angle, NumericAngle) and angle.precision_bits < needed:
        raise PrecisionShortfall(
            f"scan to q_max={q_max} needs ~{needed} bits, angle has "
            f"{angle.precision_bits}",
            required_bits=needed,
        )
    bits = max(needed, precision_bits or 0)
    report = DiophantineReport(m=m, q_max=q_max)
    with mpmath.workprec(bits):
        theta = (
            angle.theta(bits)
            if isinstance(angle, RationalCosine)
            else angle.theta()
        )
        two_pi = 2 * mpmath.pi
        alpha = mpmath.mpf(0)
        tiny = mpmath.mpf(2) ** (-(bits // 2))
        for q in range(1, q_max + 1):
            alpha = (alpha + theta) % two_pi
            dist = min(alpha, two_pi - alpha)
            val = mpmath.mpf(q) ** m * dist
            if val < report.value:
                report.minima.append((q, float(val)))
                report.q_min, report.value = q, float(val)
            if dist < tiny and not report.flagged:
                report.flagged = True
                report.note = (
                    f"dist(q*theta, 2*pi*Z) ~ 0 at q={q}: theta is a rational "
                    "multiple of 2*pi, so no power-law lower bound can hold"
                )
    return report
