"""Characteristic-function engines for the walk endpoint.

phi(xi) = E exp(-i<xi, Y_N>) with <xi, x> = Re(conj(xi) x).  Three routes:
a closed product over cosines for the two-atom rotate-and-translate walk, a
direct sum over an exact distribution table, and a conditional product over
rotation paths for wreath-type measures (exact dynamic program or Monte
Carlo).  Inner phases are exact rationals whenever the angle has a rational
cosine and xi is a ring point; only the outermost cosines are numeric, at a
requested precision with a certified error bound.
"""
from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import mpmath as mp
import numpy as np

from .errors import ConvergenceError
from .ring import (
    Angle,
    EmbeddingContext,
    RationalCosine,
    RingPoint,
    real_pairing,
)
from .walk import DistributionTable, GeneratorMeasure

DEFAULT_PRODUCT_PRECISION = 128


@dataclass(frozen=True)
class CharFnEstimate:
    """A characteristic-function value with a certified absolute error."""

    value: complex
    abs_error: float
    method: str  # product_formula | table_exact | monte_carlo | wreath_conditional
    std_error: float = 0.0

    def __post_init__(self):
        if self.abs_error < 0:
            raise ValueError("abs_error must be >= 0")
        if abs(self.value) > 1 + self.abs_error + 1e-15:
            raise ValueError("characteristic function cannot exceed 1 in modulus")

    def agrees_with(self, other: "CharFnEstimate", slack: float = 0.0) -> bool:
        gap = abs(self.value - other.value)
        return gap <= self.abs_error + other.abs_error + 3 * (
            self.std_error + other.std_error
        ) + slack


def _cos_fraction(y: Fraction, prec: int):
    """cos of an exact rational, correct to ~2^-prec absolute."""
    extra = max(y.numerator.bit_length() - y.denominator.bit_length(), 0)
    with mp.workprec(prec + extra + 16):
        return mp.cos(mp.mpf(y.numerator) / mp.mpf(y.denominator))


def _cos_sin_fraction(y: Fraction, prec: int):
    extra = max(y.numerator.bit_length() - y.denominator.bit_length(), 0)
    with mp.workprec(prec + extra + 16):
        return mp.cos_sin(mp.mpf(y.numerator) / mp.mpf(y.denominator))


def _phase_numeric(angle: Angle, xi: complex, indices: Sequence[int], prec: int):
    ctx = EmbeddingContext(angle, max(prec, 64))
    with mp.workprec(prec + 16):
        xin = mp.mpc(xi)
        return [(mp.conj(xin) * ctx.embed_z_power(j)).real for j in indices]


def charfn_littlewood(
    angle: Angle,
    N: int,
    xi,
    index_from_one: bool = True,
    precision_bits: int = DEFAULT_PRODUCT_PRECISION,
) -> CharFnEstimate:
    """prod_j cos(<xi, z^j>) over j = 1..N (default) or j = 0..N-1.

    The j = 0..N-1 indexing matches the exact law of the two-atom walk
    (translate by +-1, then rotate) and so agrees with charfn_table; the
    default shifts the window by one power of z, a global-rotation
    reparametrization of the frequency.
    """
    if N < 1:
        raise ValueError("N must be >= 1")
    indices = range(1, N + 1) if index_from_one else range(0, N)
    if isinstance(angle, RationalCosine) and isinstance(xi, RingPoint):
        r_abs = math.sqrt(float(xi.norm_sq()))
        with mp.workprec(precision_bits + 16):
            prod = mp.mpf(1)
            for j in indices:
                prod *= _cos_fraction(real_pairing(xi, j), precision_bits + 16)
            value = complex(prod)
    else:
        if isinstance(xi, RingPoint):
            xin = complex(EmbeddingContext(xi.angle, precision_bits).embed(xi))
        else:
            xin = complex(xi)
        r_abs = abs(xin)
        phases = _phase_numeric(angle, xin, list(indices), precision_bits)
        with mp.workprec(precision_bits + 16):
            prod = mp.mpf(1)
            for y in phases:
                prod *= mp.cos(y)
            value = complex(prod)
    abs_error = (N + 2) * (4.0 + r_abs) * 2.0 ** (-precision_bits) + 2.0 ** -51
    return CharFnEstimate(value, abs_error, "product_formula")


def charfn_table(
    table: DistributionTable,
    xi,
    ctx: EmbeddingContext | None = None,
    precision_bits: int = 80,
) -> CharFnEstimate:
    """Direct sum over the exact table: sum_p P(p) exp(-i <xi, p>)."""
    if table.marginal != "endpoint_only":
        raise ValueError("charfn_table needs an endpoint_only table")
    if isinstance(xi, RingPoint):
        acc_re = mp.mpf(0)
        acc_im = mp.mpf(0)
        with mp.workprec(precision_bits + 32):
            for point, mult in table.entries.items():
                y = (xi.conj() * point).real_part()
                c, s = _cos_sin_fraction(y, precision_bits + 16)
                acc_re += mult * c
                acc_im -= mult * s
            total = mp.mpf(table.total)
            value = complex(acc_re / total, acc_im / total)
        abs_error = (len(table.entries) + 8) * 2.0 ** (-precision_bits) + 2.0 ** -51
        return CharFnEstimate(value, abs_error, "table_exact")
    ctx = ctx or EmbeddingContext(table.angle)
    pts, prob = table.embedded(ctx)
    xin = complex(xi)
    phases = np.real(np.conj(xin) * pts)
    value = complex(np.sum(prob * np.exp(-1j * phases)))
    scale = (1.0 + abs(xin)) * (1.0 + float(np.max(np.abs(pts), initial=0.0)))
    abs_error = scale * 2.0 ** (-(ctx.precision_bits - 12)) + len(pts) * 2.0 ** -50
    return CharFnEstimate(value, abs_error, "table_exact")


def _wreath_shape(mu: GeneratorMeasure):
    """Split a wreath-type measure into rotation and translation weights.

    Requires every atom to be a pure rotation by +-theta or a pure
    translation, with translations paired as +-t at equal weight.
    """
    p_plus = Fraction(0)
    p_minus = Fraction(0)
    trans: dict[RingPoint, Fraction] = {}
    for g, w in mu.atoms:
        if g.translation.is_zero and g.rotation_power in (1, -1):
            if g.rotation_power == 1:
                p_plus += w
            else:
                p_minus += w
        elif g.rotation_power == 0 and not g.translation.is_zero:
            trans[g.translation] = trans.get(g.translation, Fraction(0)) + w
        else:
            raise ValueError("measure is not wreath-type (mixed or trivial atom)")
    if not trans:
        raise ValueError("measure is not wreath-type (no translation atoms)")
    step = None
    for t, w in trans.items():
        if trans.get(-t) != w:
            raise ValueError("translations must come in +-t pairs of equal weight")
        if step is None or (t.u, t.v) > (step.u, step.v):
            step = t
    if len(trans) != 2:
        raise ValueError("wreath-type needs exactly one +-t translation pair")
    p_tau = sum(trans.values())
    return p_plus, p_minus, p_tau, step


def charfn_wreath(
    mu: GeneratorMeasure,
    N: int,
    xi,
    seed: int | None = None,
    paths="all",
    precision_bits: int = 80,
) -> CharFnEstimate:
    """Average over rotation paths of the conditional cosine product.

    Conditional on which steps rotate (and which way), the translation signs
    are independent, so the conditional characteristic function is the product
    of cos(<xi, z^alpha t>) over translation steps at accumulated rotation
    alpha.  paths="all" sums every rotation path exactly by dynamic
    programming over alpha; an integer runs seeded Monte Carlo over paths.
    """
    if N < 0:
        raise ValueError("N must be >= 0")
    p_plus, p_minus, p_tau, step = _wreath_shape(mu)
    angle = mu.angle
    exact = isinstance(angle, RationalCosine) and isinstance(xi, RingPoint)

    def pair_cos(alpha: int, prec: int):
        if exact:
            y = (xi.conj() * step.mul_z(alpha)).real_part()
            return _cos_fraction(y, prec)
        ctx = EmbeddingContext(angle, max(prec, 64))
        xin = complex(xi) if not isinstance(xi, RingPoint) else complex(ctx.embed(xi))
        t = complex(ctx.embed(step))
        z = complex(ctx.embed_z_power(alpha))
        return mp.cos((np.conj(xin) * z * t).real)

    if paths == "all":
        with mp.workprec(precision_bits + 32):
            cos_cache = {
                alpha: pair_cos(alpha, precision_bits + 16)
                for alpha in range(-N, N + 1)
            }
            cur = {0: mp.mpf(1)}
            wp, wm, wt = (mp.mpf(x.numerator) / x.denominator for x in (p_plus, p_minus, p_tau))
            for _ in range(N):
                nxt: dict[int, mp.mpf] = {}
                for alpha, g in cur.items():
                    if p_plus:
                        nxt[alpha + 1] = nxt.get(alpha + 1, mp.mpf(0)) + wp * g
                    if p_minus:
                        nxt[alpha - 1] = nxt.get(alpha - 1, mp.mpf(0)) + wm * g
                    nxt[alpha] = nxt.get(alpha, mp.mpf(0)) + wt * cos_cache[alpha] * g
                cur = nxt
            value = complex(sum(cur.values()))
        abs_error = (N + 2) * (2 * N + 4) * 2.0 ** (-precision_bits) + 2.0 ** -51
        return CharFnEstimate(value, abs_error, "wreath_conditional")

    n_paths = int(paths)
    if n_paths < 1:
        raise ValueError("paths must be >= 1 or 'all'")
    if seed is None:
        raise ValueError("Monte Carlo path sampling needs a seed")
    rng = np.random.default_rng(seed)
    lookup = np.array([float(pair_cos(alpha, 64)) for alpha in range(-N, N + 1)])
    probs = np.array([float(p_plus), float(p_minus), float(p_tau)])
    choices = rng.choice(3, size=(n_paths, max(N, 1)), p=probs / probs.sum())
    delta = np.where(choices == 0, 1, 0) + np.where(choices == 1, -1, 0)
    alpha_before = np.cumsum(delta, axis=1) - delta
    factors = np.where(choices == 2, lookup[alpha_before + N], 1.0)
    vals = factors.prod(axis=1) if N > 0 else np.ones(n_paths)
    mean = float(vals.mean())
    std_error = float(vals.std(ddof=1) / math.sqrt(n_paths)) if n_paths > 1 else 1.0
    return CharFnEstimate(
        complex(mean), (N + 4) * 1e-15, "monte_carlo", std_error=std_error
    )


def gaussian_charfn(sigma2: float, N: int, xi) -> float:
    """exp(-sigma^2 N |xi|^2 / 2), the Gaussian comparison transform."""
    if sigma2 <= 0:
        raise ValueError("sigma2 must be > 0")
    r = abs(complex(xi)) if not isinstance(xi, (int, float, Fraction)) else float(xi)
    return math.exp(-0.5 * float(sigma2) * N * r * r)


class LittlewoodFormula:
    """Vectorized float64 product formula, for quadrature grids.

    Not certified like charfn_littlewood; accuracy ~ N * |xi| * 1e-15, which
    the callers fold into their own error estimates.
    """

    def __init__(self, angle: Angle, N: int, index_from_one: bool = True):
        self.angle = angle
        self.N = N
        ctx = EmbeddingContext(angle, 64)
        indices = range(1, N + 1) if index_from_one else range(0, N)
        self._zpow = np.array(
            [complex(ctx.embed_z_power(j)) for j in indices], dtype=np.complex128
        )

    def __call__(self, xi: np.ndarray) -> np.ndarray:
        """phi at an array of complex frequencies."""
        xi = np.asarray(xi, dtype=np.complex128)
        flat = xi.reshape(-1)
        out = np.empty(len(flat), dtype=np.float64)
        chunk = max(1, 10**7 // max(self.N, 1))
        for lo in range(0, len(flat), chunk):
            sub = flat[lo : lo + chunk]
            phases = np.real(np.conj(sub)[:, None] * self._zpow)
            out[lo : lo + chunk] = np.prod(np.cos(phases), axis=-1)
        return out.reshape(xi.shape)


class TableFormula:
    """Vectorized float64 table transform, for quadrature grids."""

    def __init__(self, table: DistributionTable, ctx: EmbeddingContext | None = None):
        self.angle = table.angle
        self.N = table.N
        self._pts, self._prob = table.embedded(ctx)

    def __call__(self, xi: np.ndarray) -> np.ndarray:
        xi = np.asarray(xi, dtype=np.complex128)
        out = np.empty(xi.shape, dtype=np.complex128)
        flat = xi.reshape(-1)
        res = np.empty(len(flat), dtype=np.complex128)
        chunk = max(1, 10**7 // max(len(self._pts), 1))
        for lo in range(0, len(flat), chunk):
            sub = flat[lo : lo + chunk]
            phases = np.real(np.conj(sub)[:, None] * self._pts[None, :])
            res[lo : lo + chunk] = (self._prob * np.exp(-1j * phases)).sum(axis=1)
        return res.reshape(out.shape)


@dataclass
class LowFreqReport:
    """Measured constant for the low-frequency Gaussian comparison."""

    engine: str
    sigma2: float
    N_list: tuple[int, ...]
    r_grid: tuple[float, ...]
    phi_points: int
    max_ratio: float
    per_N: dict[int, float] = field(default_factory=dict)
    excluded: list[tuple[int, float, float]] = field(default_factory=list)

    def to_json(self) -> dict:
        return {
            "engine": self.engine,
            "sigma2": self.sigma2,
            "N_list": list(self.N_list),
            "r_grid": list(self.r_grid),
            "phi_points": self.phi_points,
            "max_ratio": self.max_ratio,
            "per_N": {str(k): v for k, v in self.per_N.items()},
            "excluded_points": [list(t) for t in self.excluded],
        }


NEAR_ZERO_CUTOFF = 1e-6


def lowfreq_check(
    angle: Angle,
    mu: GeneratorMeasure,
    N_list: Sequence[int],
    r_grid: Sequence[float],
    phi_points: int = 8,
    precision_bits: int = DEFAULT_PRODUCT_PRECISION,
) -> LowFreqReport:
    """Measured |log phi(xi) + sigma^2 N r^2 / 2| / (N r^3 + N r^4) over a grid.

    Uses the product formula when the measure has the two-atom
    rotate-and-translate shape, otherwise the wreath dynamic program.  Grid
    points where |phi| < 1e-6 are excluded from the maximum (log blowup there
    is a numerical artifact) and reported.
    """
    if not r_grid or max(r_grid) > 0.5 or min(r_grid) <= 0:
        raise ValueError("r_grid must lie in (0, 0.5]")
    sigma2 = mu.step_variance()
    littlewood_like = all(
        g.rotation_power == 1 and not g.translation.is_zero for g, _ in mu.atoms
    )
    engine = "product_formula" if littlewood_like else "wreath_conditional"
    per_N: dict[int, float] = {}
    excluded: list[tuple[int, float, float]] = []
    for N in N_list:
        worst = 0.0
        for r in r_grid:
            for t in range(phi_points):
                phi_ang = 2 * math.pi * t / phi_points
                xi = r * complex(math.cos(phi_ang), math.sin(phi_ang))
                if engine == "product_formula":
                    est = charfn_littlewood(angle, N, xi, precision_bits=precision_bits)
                else:
                    est = charfn_wreath(mu, N, xi, precision_bits=precision_bits)
                if abs(est.value) < NEAR_ZERO_CUTOFF:
                    excluded.append((N, r, phi_ang))
                    continue
                lhs = abs(cmath.log(complex(est.value)) + 0.5 * float(sigma2) * N * r * r)
                ratio = lhs / (N * r**3 + N * r**4)
                worst = max(worst, ratio)
        per_N[N] = worst
    return LowFreqReport(
        engine=engine,
        sigma2=float(sigma2),
        N_list=tuple(N_list),
        r_grid=tuple(float(r) for r in r_grid),
        phi_points=phi_points,
        max_ratio=max(per_N.values()) if per_N else 0.0,
        per_N=per_N,
        excluded=excluded,
    )


@dataclass(frozen=True)
class RadialL2Result:
    value: float
    error_estimate: float
    points_used: int


def radial_l2(
    source,
    r: float,
    quad_points: int = 64,
    rel_tol: float = 1e-6,
    max_points: int = 2**20,
) -> RadialL2Result:
    """Integral of |phi|^2 over the circle of radius r (arc-length measure).

    Doubling trapezoid quadrature with Richardson stopping; the integrand is
    smooth and 2pi-periodic, so the trapezoid rule converges spectrally.
    source is a DistributionTable or any callable mapping complex frequency
    arrays to phi values (e.g. LittlewoodFormula).
    """
    if r <= 0:
        raise ValueError("r must be > 0")
    if quad_points < 64:
        raise ValueError("quad_points must be >= 64")
    fn = TableFormula(source) if isinstance(source, DistributionTable) else source

    def integral(m: int) -> float:
        ang = 2 * math.pi * np.arange(m) / m
        xi = r * np.exp(1j * ang)
        vals = np.abs(fn(xi)) ** 2
        return float(vals.mean() * 2 * math.pi * r)

    # start above the integrand's Nyquist scale so stagnation is not aliasing
    m = quad_points
    oscillation = 8 * getattr(fn, "N", 8) * r + 64
    while m < oscillation:
        m *= 2
    prev = integral(m)
    while True:
        m *= 2
        if m > max_points:
            raise ConvergenceError(
                f"radial quadrature did not reach rel {rel_tol} within {max_points} points"
            )
        cur = integral(m)
        err = abs(cur - prev)
        if err <= rel_tol * max(abs(cur), 1e-300):
            round_err = 1e-14 * (getattr(fn, "N", 64) + 4) * (1 + r) * 2 * math.pi * r
            return RadialL2Result(cur, err + round_err, m)
        prev = cur


def rounding_energy(angle: Angle, xi, k: int, window: int):
    """Sum over j = k..k+window of d(Re(z^j xi), Z)^2.

    Exact Fraction for rational-cosine angles with a ring-point xi, float
    otherwise.  Satisfies the reindexing identity
    rounding_energy(xi * z, k, w) == rounding_energy(xi, k+1, w) exactly.
    """
    if window < 1:
        raise ValueError("window must be >= 1")
    if isinstance(angle, RationalCosine) and isinstance(xi, RingPoint):
        total = Fraction(0)
        for j in range(k, k + window + 1):
            y = real_pairing(xi.conj(), j)
            frac = y - math.floor(y)
            d = min(frac, 1 - frac)
            total += d * d
        return total
    ctx = EmbeddingContext(angle, 64)
    xin = complex(xi) if not isinstance(xi, RingPoint) else complex(ctx.embed(xi))
    total_f = 0.0
    for j in range(k, k + window + 1):
        y = (complex(ctx.embed_z_power(j)) * xin).real
        d = abs(y - round(y))
        total_f += d * d
    return total_f
