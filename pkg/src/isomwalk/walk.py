"""Finitely supported isometry measures and the exact law of the walk endpoint.

A step g = (rotation_power j, translation v) acts on the plane as
x -> z^j x + v.  Composition is exact in the quadratic ring, so the full
distribution of Y_N = (g_1 ... g_N)(0) is a finite table of ring points with
big-integer multiplicities over a common total — small probabilities like
2e-4 come out exactly, which is the point of enumerating instead of sampling.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Sequence

import numpy as np

from .errors import BudgetExceeded, ExactnessUnavailable
from .ring import EmbeddingContext, RationalCosine, RingPoint, require_exact

DEFAULT_MEMORY_BUDGET = 8 * 10**8  # state entries, refuse beyond this


class Isometry:
    """Exact planar isometry x -> z^rotation_power * x + translation."""

    __slots__ = ("_rot", "_trans")

    def __init__(self, rotation_power: int, translation: RingPoint):
        self._rot = rotation_power
        self._trans = translation

    @property
    def rotation_power(self) -> int:
        return self._rot

    @property
    def translation(self) -> RingPoint:
        return self._trans

    @property
    def angle(self) -> RationalCosine:
        return self._trans.angle

    @classmethod
    def identity(cls, angle: RationalCosine) -> "Isometry":
        return cls(0, angle.zero())

    def compose(self, other: "Isometry") -> "Isometry":
        """self after other is applied first: (g o h)(x) = g(h(x))."""
        return Isometry(
            self._rot + other._rot,
            self._trans + other._trans.mul_z(self._rot),
        )

    def __mul__(self, other: "Isometry") -> "Isometry":
        if not isinstance(other, Isometry):
            return NotImplemented
        return self.compose(other)

    def inverse(self) -> "Isometry":
        return Isometry(-self._rot, -(self._trans.mul_z(-self._rot)))

    def apply(self, point: RingPoint) -> RingPoint:
        return point.mul_z(self._rot) + self._trans

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, Isometry)
            and self._rot == other._rot
            and self._trans == other._trans
        )

    def __hash__(self) -> int:
        return hash((self._rot, self._trans))

    def __repr__(self) -> str:
        return f"Isometry(rot={self._rot}, trans={self._trans!r})"


@dataclass(frozen=True)
class NumericIsometry:
    """Float companion of Isometry for numeric-only angles."""

    theta_part: float
    v: complex

    def compose(self, other: "NumericIsometry") -> "NumericIsometry":
        rot = complex(math.cos(self.theta_part), math.sin(self.theta_part))
        return NumericIsometry(self.theta_part + other.theta_part, self.v + rot * other.v)


@dataclass(frozen=True)
class WalkState:
    """Accumulated translation plus rotation power of a partial product."""

    point: RingPoint
    rotation_power: int


class GeneratorMeasure:
    """Finitely supported step measure with exact rational weights."""

    def __init__(self, atoms: Sequence[tuple[Isometry, Fraction]], name: str = ""):
        if not atoms:
            raise ValueError("measure needs at least one atom")
        weights = [Fraction(w) for _, w in atoms]
        if any(w <= 0 for w in weights):
            raise ValueError("weights must be positive")
        if sum(weights) != 1:
            raise ValueError(f"weights must sum to 1, got {sum(weights)}")
        self.atoms: tuple[tuple[Isometry, Fraction], ...] = tuple(
            (g, Fraction(w)) for (g, _), w in zip(atoms, weights)
        )
        self.name = name

    @property
    def angle(self) -> RationalCosine:
        return self.atoms[0][0].angle

    @property
    def denominator(self) -> int:
        """lcm of the weight denominators; multiplicities live over d^N."""
        d = 1
        for _, w in self.atoms:
            d = d * w.denominator // math.gcd(d, w.denominator)
        return d

    @property
    def numerators(self) -> tuple[int, ...]:
        d = self.denominator
        return tuple(int(w * d) for _, w in self.atoms)

    @property
    def is_symmetric(self) -> bool:
        """True iff the weighted atom multiset is closed under inversion."""
        bag: dict[Isometry, Fraction] = {}
        for g, w in self.atoms:
            bag[g] = bag.get(g, Fraction(0)) + w
        for g, w in bag.items():
            if bag.get(g.inverse(), None) != w:
                return False
        return True

    def step_variance(self) -> Fraction:
        """Half the mean squared step translation: (1/2) E|g(0)|^2, exact."""
        total = Fraction(0)
        for g, w in self.atoms:
            total += w * g.translation.norm_sq()
        return total / 2

    def __repr__(self) -> str:
        return f"GeneratorMeasure({self.name or len(self.atoms)} atoms)"


def presets(name: str, angle: RationalCosine, **params) -> GeneratorMeasure:
    """Named step measures.

    littlewood   two atoms, weight 1/2: translate +-1 then rotate by theta.
    symmetric4   four atoms, weight 1/4: rotations by +-theta, translations +-1.
    asymmetric3  three atoms, weight 1/3: rotation by theta, translations +-1.
    wreath       rotations +-theta with weights p_plus/p_minus, translations
                 +-1 sharing p_tau equally (p_plus + p_minus + p_tau = 1).
    """
    exact = require_exact(angle)
    one = exact.one()
    zero = exact.zero()
    half = Fraction(1, 2)
    if name == "littlewood":
        atoms = [
            (Isometry(1, one), half),
            (Isometry(1, -one), half),
        ]
    elif name == "symmetric4":
        q = Fraction(1, 4)
        atoms = [
            (Isometry(1, zero), q),
            (Isometry(-1, zero), q),
            (Isometry(0, one), q),
            (Isometry(0, -one), q),
        ]
    elif name == "asymmetric3":
        t = Fraction(1, 3)
        atoms = [
            (Isometry(1, zero), t),
            (Isometry(0, one), t),
            (Isometry(0, -one), t),
        ]
    elif name == "wreath":
        p_plus = Fraction(params["p_plus"])
        p_minus = Fraction(params["p_minus"])
        p_tau = Fraction(params["p_tau"])
        if p_plus + p_minus + p_tau != 1:
            raise ValueError("wreath weights must sum to 1")
        atoms = []
        if p_plus > 0:
            atoms.append((Isometry(1, zero), p_plus))
        if p_minus > 0:
            atoms.append((Isometry(-1, zero), p_minus))
        if p_tau > 0:
            atoms.append((Isometry(0, one), p_tau / 2))
            atoms.append((Isometry(0, -one), p_tau / 2))
    else:
        raise ValueError(f"unknown preset {name!r}")
    return GeneratorMeasure(atoms, name=name)


class DistributionTable:
    """Exact law of Y_N (or of (Y_N, rotation power)) as multiplicity/total."""

    def __init__(
        self,
        angle: RationalCosine,
        N: int,
        total: int,
        entries: dict,
        marginal: str,
    ):
        if marginal not in ("endpoint_only", "endpoint_and_rotation"):
            raise ValueError(f"unknown marginal {marginal!r}")
        self.angle = angle
        self.N = N
        self.total = total
        self.entries = entries  # RingPoint -> mult, or (RingPoint, rot) -> mult
        self.marginal = marginal

    def __len__(self) -> int:
        return len(self.entries)

    def mass_check(self) -> bool:
        return sum(self.entries.values()) == self.total

    def probability(self, key) -> Fraction:
        return Fraction(self.entries.get(key, 0), self.total)

    def marginalize(self) -> "DistributionTable":
        """Drop the rotation coordinate."""
        if self.marginal == "endpoint_only":
            return self
        merged: dict[RingPoint, int] = {}
        for (point, _rot), mult in self.entries.items():
            merged[point] = merged.get(point, 0) + mult
        return DistributionTable(self.angle, self.N, self.total, merged, "endpoint_only")

    def points(self) -> Iterable[tuple[RingPoint, int]]:
        if self.marginal == "endpoint_only":
            yield from self.entries.items()
        else:
            for (point, _rot), mult in self.entries.items():
                yield point, mult

    def embedded(self, ctx: EmbeddingContext | None = None):
        """(complex128 endpoints, float64 probabilities) for numeric engines."""
        table = self.marginalize()
        ctx = ctx or EmbeddingContext(self.angle)
        pts = np.empty(len(table.entries), dtype=np.complex128)
        prob = np.empty(len(table.entries), dtype=np.float64)
        inv_total = 1.0 / float(self.total)
        for i, (point, mult) in enumerate(sorted(
            table.entries.items(), key=lambda kv: kv[0].triple
        )):
            pts[i] = complex(ctx.embed(point))
            prob[i] = mult * inv_total
        return pts, prob

    def to_csv(self, path: str) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            if self.marginal == "endpoint_only":
                writer.writerow(["u", "v", "k", "multiplicity"])
                for point, mult in sorted(
                    self.entries.items(), key=lambda kv: kv[0].triple
                ):
                    writer.writerow([point.u, point.v, point.k, mult])
            else:
                writer.writerow(["u", "v", "k", "rotation_power", "multiplicity"])
                for (point, rot), mult in sorted(
                    self.entries.items(), key=lambda kv: (kv[0][0].triple, kv[0][1])
                ):
                    writer.writerow([point.u, point.v, point.k, rot, mult])

    def header_json(self) -> dict:
        return {
            "a": self.angle.a,
            "b": self.angle.b,
            "N": self.N,
            "total": self.total,
            "marginal": self.marginal,
            "distinct_states": len(self.entries),
        }

    def point_cloud_csv(self, path: str, ctx: EmbeddingContext | None = None) -> None:
        """CSV (x, y, probability) for plotting."""
        ctx = ctx or EmbeddingContext(self.angle)
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["x", "y", "probability"])
            for point, mult in sorted(
                self.marginalize().entries.items(), key=lambda kv: kv[0].triple
            ):
                val = ctx.embed(point)
                writer.writerow(
                    [
                        mpf_str(val.real),
                        mpf_str(val.imag),
                        float(Fraction(mult, self.total)),
                    ]
                )


def mpf_str(x) -> str:
    return repr(float(x))


def enumerate_exact(
    mu: GeneratorMeasure,
    N: int,
    marginal: str = "endpoint_only",
    memory_budget: int = DEFAULT_MEMORY_BUDGET,
) -> DistributionTable:
    """Exact law of Y_N by level-synchronous convolution.

    Each level holds every reachable (endpoint, rotation) state once, with its
    path multiplicity as a big integer; states at level n share the fixed
    denominator a^n, so deduplication is plain integer-pair equality.  The
    result is independent of atom order, and of whether the int64 fast path
    or the big-integer path ran (tested).
    """
    if N < 0:
        raise ValueError("N must be >= 0")
    angle = mu.angle
    d = mu.denominator
    projected = len(mu.atoms) ** min(N, 40)
    if projected > memory_budget and _estimate_too_big(mu, N, memory_budget):
        raise BudgetExceeded(
            f"estimated state count exceeds memory budget of {memory_budget} entries",
            budget="memory",
        )

    use_numpy = _int64_safe(mu, N) and N > 0
    if use_numpy:
        entries = _enumerate_numpy(mu, N, memory_budget)
    else:
        entries = _enumerate_bigint(mu, N, memory_budget)

    table_entries: dict = {}
    for (u, v, rot), mult in entries.items():
        point = RingPoint(angle, u, v, N)
        key = (point, rot) if marginal == "endpoint_and_rotation" else point
        table_entries[key] = table_entries.get(key, 0) + mult
    return DistributionTable(angle, N, d**N, table_entries, marginal)


def _estimate_too_big(mu: GeneratorMeasure, N: int, budget: int) -> bool:
    # Walk a few levels to see whether dedup keeps the state count in check.
    count = 1
    for n in range(N):
        count *= len(mu.atoms)
        if count > budget:
            return True
        if count > 10**6:
            # dedup will only help if states collide; be conservative but
            # do not refuse runs whose raw path count is still modest
            return len(mu.atoms) ** N > budget * 8
    return False


def _step_table(mu: GeneratorMeasure, n: int) -> list[tuple[np.ndarray, np.ndarray]]:
    """Per atom: scaled coordinates of z^r * translation for r in [-n, n]."""
    angle = mu.angle
    scale = n + 1
    out = []
    for g, _ in mu.atoms:
        su = np.empty(2 * n + 1, dtype=object)
        sv = np.empty(2 * n + 1, dtype=object)
        for r in range(-n, n + 1):
            u, v = _scale_pair(angle, g.translation.mul_z(r), scale)
            su[r + n], sv[r + n] = u, v
        out.append((su, sv))
    return out


def _int64_safe(mu: GeneratorMeasure, N: int) -> bool:
    if N > 0 and mu.denominator ** N > 2**62:
        return False
    a = mu.angle.a
    # Coordinates grow by |U'| <= a|U| + |step at final scale|.
    steps = _step_table(mu, N - 1) if N > 0 else []
    step = 0
    for su, sv in steps:
        step = max(step, max(abs(int(x)) for x in su), max(abs(int(x)) for x in sv))
    bound = 0
    for _ in range(N):
        bound = a * bound + step
        if bound > 2**62:
            return False
    return True


def _enumerate_bigint(mu: GeneratorMeasure, N: int, budget: int) -> dict:
    angle = mu.angle
    a = angle.a
    nums = mu.numerators
    level: dict[tuple[int, int, int], int] = {(0, 0, 0): 1}
    for n in range(N):
        if len(level) * len(mu.atoms) > budget:
            raise BudgetExceeded(
                f"level {n} would exceed the {budget}-entry memory budget",
                budget="memory",
            )
        scale = n + 1
        # scaled step translation per (atom, rotation power) pair, cached
        step_cache: dict[tuple[int, int], tuple[int, int]] = {}
        nxt: dict[tuple[int, int, int], int] = {}
        for (u, v, rot), mult in level.items():
            for idx, (g, _) in enumerate(mu.atoms):
                key = (idx, rot)
                su_sv = step_cache.get(key)
                if su_sv is None:
                    moved = g.translation.mul_z(rot)
                    su_sv = _scale_pair(angle, moved, scale)
                    step_cache[key] = su_sv
                su, sv = su_sv
                state = (a * u + su, a * v + sv, rot + g.rotation_power)
                m = mult * nums[idx]
                if state in nxt:
                    nxt[state] += m
                else:
                    nxt[state] = m
        level = nxt
    return level


def _scale_pair(angle: RationalCosine, point: RingPoint, scale: int) -> tuple[int, int]:
    if point.k > scale:
        raise ValueError("scale too small")
    s = angle.a ** (scale - point.k)
    return point.u * s, point.v * s


def _enumerate_numpy(mu: GeneratorMeasure, N: int, budget: int) -> dict:
    angle = mu.angle
    a = angle.a
    nums = mu.numerators
    U = np.zeros(1, dtype=np.int64)
    V = np.zeros(1, dtype=np.int64)
    R = np.zeros(1, dtype=np.int64)
    M = np.ones(1, dtype=np.int64)
    for n in range(N):
        if len(U) * len(mu.atoms) > budget:
            raise BudgetExceeded(
                f"level {n} would exceed the {budget}-entry memory budget",
                budget="memory",
            )
        steps = _step_table(mu, n)
        parts = []
        ridx = R + n
        for idx, (g, _) in enumerate(mu.atoms):
            if g.translation.is_zero:
                nu, nv = a * U, a * V
            else:
                su = steps[idx][0].astype(np.int64)
                sv = steps[idx][1].astype(np.int64)
                nu = a * U + su[ridx]
                nv = a * V + sv[ridx]
            parts.append((nu, nv, R + g.rotation_power, M * nums[idx]))
        U = np.concatenate([p[0] for p in parts])
        V = np.concatenate([p[1] for p in parts])
        R = np.concatenate([p[2] for p in parts])
        M = np.concatenate([p[3] for p in parts])
        order = np.lexsort((R, V, U))
        U, V, R, M = U[order], V[order], R[order], M[order]
        boundary = np.empty(len(U), dtype=bool)
        boundary[0] = True
        np.not_equal(U[1:], U[:-1], out=boundary[1:])
        np.logical_or(boundary[1:], V[1:] != V[:-1], out=boundary[1:])
        np.logical_or(boundary[1:], R[1:] != R[:-1], out=boundary[1:])
        starts = np.flatnonzero(boundary)
        M = np.add.reduceat(M, starts)
        U, V, R = U[starts], V[starts], R[starts]
    return {
        (int(u), int(v), int(r)): int(m)
        for u, v, r, m in zip(U, V, R, M)
    }


def atom_probability(table: DistributionTable, point: RingPoint) -> Fraction:
    """Exact probability of one endpoint; 0 if absent."""
    if table.marginal != "endpoint_only":
        raise ValueError("atom_probability needs an endpoint_only table")
    return table.probability(point)


@dataclass(frozen=True)
class ProbInterval:
    """[lo, hi] bracket for a probability; width > 0 only at undecided boundaries."""

    lo: Fraction
    hi: Fraction

    @property
    def width(self) -> Fraction:
        return self.hi - self.lo

    @property
    def mid(self) -> Fraction:
        return (self.lo + self.hi) / 2

    def __float__(self) -> float:
        return float(self.mid)


def ball_probability(
    table: DistributionTable,
    center,
    radius,
    ctx: EmbeddingContext | None = None,
) -> ProbInterval:
    """Mass of the closed ball B_radius(center).

    With a ring-point center and rational radius everything is exact and the
    bracket collapses unless atoms sit exactly on the boundary (those are
    reported as the interval width rather than tie-broken).  Numeric centers
    get an embedding band of width set by the context precision.
    """
    if radius <= 0:
        raise ValueError("radius must be > 0")
    t = table.marginalize()
    if isinstance(center, RingPoint) and isinstance(radius, (int, Fraction)):
        rsq = Fraction(radius) ** 2
        rn, rd = rsq.numerator, rsq.denominator
        a, b = t.angle.a, t.angle.b
        inside = 0
        boundary = 0
        for point, mult in t.entries.items():
            w = point - center
            u, v, k = w.u, w.v, w.k
            lhs = (a * (u * u + v * v) + b * u * v) * rd
            rhs = rn * a ** (2 * k + 1)
            if lhs < rhs:
                inside += mult
            elif lhs == rhs:
                boundary += mult
        return ProbInterval(
            Fraction(inside, t.total), Fraction(inside + boundary, t.total)
        )
    ctx = ctx or EmbeddingContext(t.angle)
    c = complex(center) if not isinstance(center, RingPoint) else complex(ctx.embed(center))
    r = float(radius)
    inside_f = Fraction(0)
    band_f = Fraction(0)
    for point, mult in t.entries.items():
        p = complex(ctx.embed(point))
        eps = (abs(p) + abs(c) + 1.0) * 2.0 ** (-(ctx.precision_bits - 10))
        dist = abs(p - c)
        if dist <= r - eps:
            inside_f += Fraction(mult, t.total)
        elif dist <= r + eps:
            band_f += Fraction(mult, t.total)
    return ProbInterval(inside_f, inside_f + band_f)


def sample(
    mu: GeneratorMeasure,
    N: int,
    count: int,
    seed: int,
    embedded: bool = False,
):
    """i.i.d. draws of Y_N; reproducible from one 64-bit seed (PCG64).

    embedded=False composes exactly and returns ring points (fine up to ~1e5
    draws); embedded=True returns complex128 endpoints via a vectorized path
    for large Monte Carlo runs.
    """
    if count < 1:
        raise ValueError("count must be >= 1")
    rng = np.random.default_rng(seed)
    d = mu.denominator
    cuts = np.cumsum(mu.numerators)
    draws = rng.integers(0, d, size=(count, N), dtype=np.int64)
    idx = np.searchsorted(cuts, draws, side="right")
    if not embedded:
        angle = mu.angle
        out = []
        atoms = [g for g, _ in mu.atoms]
        for row in idx:
            g = Isometry.identity(angle)
            for j in row:
                g = g.compose(atoms[j])
            out.append(g.translation)
        return out
    ctx = EmbeddingContext(mu.angle)
    rots = np.array([g.rotation_power for g, _ in mu.atoms], dtype=np.int64)
    trans = np.array(
        [complex(ctx.embed(g.translation)) for g, _ in mu.atoms], dtype=np.complex128
    )
    step_rot = rots[idx]  # (count, N)
    prefix = np.cumsum(step_rot, axis=1) - step_rot  # rotation before each step
    zpow = np.array(
        [complex(ctx.embed_z_power(r)) for r in range(-N, N + 1)], dtype=np.complex128
    )
    return (zpow[prefix + N] * trans[idx]).sum(axis=1)
