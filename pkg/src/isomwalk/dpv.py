"""Dense polynomial values at z = e^{i theta}: search, certificates, words.

Everything here is organized around one question: which complex numbers of
the form p(z), for integer polynomials p of bounded weight, exist near a
prescribed log-modulus and argument?  The module provides the weight
bookkeeping, an exact resultant lower bound for |q(z)|, a meet-in-the-middle
minimizer over bounded-coefficient polynomials, a gadget family
l * z^j * (z^q - 1)^k whose values tile the log rectangle, grid certificates
with re-verifiable witnesses, and the translation words realizing a*p(z)
inside the group generated by one rotation and one translation.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Sequence

import mpmath as mp
import numpy as np

from .errors import BudgetExceeded, ExactnessUnavailable
from .ring import (
    Angle,
    EmbeddingContext,
    NumericAngle,
    RationalCosine,
    RingPoint,
    cos_multiple,
)
from .walk import Isometry

TWO_PI = 2 * math.pi
DEFAULT_CELL = 0.1
ARG_CELLS = 63  # 2*pi/63 < 0.1

__all__ = [
    "IntPolynomial",
    "weight",
    "near_return_q",
    "GadgetCatalog",
    "gadget_search",
    "pigeonhole_search",
    "pigeonhole_bruteforce",
    "resultant_sylvester",
    "resultant_euclid",
    "resultant_check",
    "injectivity_bruteforce",
    "NetCertificate",
    "certify_dpv",
    "Word",
    "word_synthesis",
    "generators",
    "commutator_translation",
    "ample_check",
]


class IntPolynomial:
    """Integer polynomial in z, stored sparsely as exponent -> coefficient."""

    __slots__ = ("_c",)

    def __init__(self, coeffs):
        if isinstance(coeffs, dict):
            self._c = {int(e): int(c) for e, c in coeffs.items() if c != 0}
        else:
            self._c = {e: int(c) for e, c in enumerate(coeffs) if c != 0}
        if any(e < 0 for e in self._c):
            raise ValueError("exponents must be >= 0")

    @classmethod
    def zero(cls) -> "IntPolynomial":
        return cls({})

    @classmethod
    def one(cls) -> "IntPolynomial":
        return cls({0: 1})

    @classmethod
    def monomial(cls, exp: int, coeff: int = 1) -> "IntPolynomial":
        return cls({exp: coeff})

    @classmethod
    def from_string(cls, text: str) -> "IntPolynomial":
        """Parse '3*z^2 - z + 1' style input (also accepts 'x')."""
        s = text.replace(" ", "").replace("x", "z").replace("**", "^")
        if not s:
            raise ValueError("empty polynomial")
        s = s.replace("-", "+-")
        terms = [t for t in s.split("+") if t]
        coeffs: dict[int, int] = {}
        for term in terms:
            if "z" in term:
                head, _, tail = term.partition("z")
                exp = int(tail[1:]) if tail.startswith("^") else 1
                if head in ("", "-"):
                    coeff = -1 if head == "-" else 1
                else:
                    coeff = int(head.rstrip("*"))
            else:
                exp, coeff = 0, int(term)
            coeffs[exp] = coeffs.get(exp, 0) + coeff
        return cls(coeffs)

    @property
    def is_zero(self) -> bool:
        return not self._c

    @property
    def degree(self) -> int:
        """Largest exponent; 0 for the zero polynomial by convention."""
        return max(self._c) if self._c else 0

    def items(self) -> list[tuple[int, int]]:
        return sorted(self._c.items())

    def coeff(self, exp: int) -> int:
        return self._c.get(exp, 0)

    def coeffs_list(self) -> list[int]:
        out = [0] * (self.degree + 1)
        for e, c in self._c.items():
            out[e] = c
        return out

    @property
    def weight(self) -> int:
        """degree + 1 + sum of |coefficients| (1 for the zero polynomial)."""
        return self.degree + 1 + sum(abs(c) for c in self._c.values())

    def __add__(self, other: "IntPolynomial") -> "IntPolynomial":
        if not isinstance(other, IntPolynomial):
            return NotImplemented
        c = dict(self._c)
        for e, v in other._c.items():
            c[e] = c.get(e, 0) + v
        return IntPolynomial(c)

    def __neg__(self) -> "IntPolynomial":
        return IntPolynomial({e: -v for e, v in self._c.items()})

    def __sub__(self, other: "IntPolynomial") -> "IntPolynomial":
        if not isinstance(other, IntPolynomial):
            return NotImplemented
        return self + (-other)

    def __mul__(self, other) -> "IntPolynomial":
        if isinstance(other, int):
            return IntPolynomial({e: other * v for e, v in self._c.items()})
        if not isinstance(other, IntPolynomial):
            return NotImplemented
        c: dict[int, int] = {}
        for e1, v1 in self._c.items():
            for e2, v2 in other._c.items():
                e = e1 + e2
                c[e] = c.get(e, 0) + v1 * v2
        return IntPolynomial(c)

    __rmul__ = __mul__

    def __pow__(self, k: int) -> "IntPolynomial":
        if k < 0:
            raise ValueError("negative power")
        out = IntPolynomial.one()
        base = self
        while k:
            if k & 1:
                out = out * base
            base = base * base
            k >>= 1
        return out

    def shift(self, exp: int) -> "IntPolynomial":
        """Multiply by z^exp."""
        return IntPolynomial({e + exp: v for e, v in self._c.items()})

    def evaluate(self, angle: RationalCosine) -> RingPoint:
        """Exact value p(z) as a ring point."""
        total = angle.zero()
        for e, c in self._c.items():
            total = total + angle.z_power(e) * c
        return total

    def evaluate_embedded(self, ctx: EmbeddingContext):
        """Numeric p(z) at the context precision."""
        with mp.workprec(ctx.precision_bits + 16):
            total = mp.mpc(0)
            for e, c in self._c.items():
                total += c * ctx.embed_z_power(e)
            return total

    def log_value(self, angle: Angle, precision_bits: int = 64):
        """(log |p(z)|, arg p(z) in [0, 2pi)) at the requested precision."""
        ctx = EmbeddingContext(angle, precision_bits)
        with mp.workprec(precision_bits + 16):
            val = self.evaluate_embedded(ctx)
            if val == 0:
                raise ValueError("p(z) = 0 has no logarithm")
            lm = mp.log(abs(val))
            ar = mp.arg(val) % (2 * mp.pi)
        return lm, ar

    def to_json(self) -> list[list[int]]:
        return [[e, c] for e, c in self.items()]

    @classmethod
    def from_json(cls, data) -> "IntPolynomial":
        return cls({int(e): int(c) for e, c in data})

    def to_text(self) -> str:
        if self.is_zero:
            return "0"
        parts = []
        for e, c in sorted(self._c.items(), reverse=True):
            mag = abs(c)
            if e == 0:
                body = str(mag)
            else:
                zpart = "z" if e == 1 else f"z^{e}"
                body = zpart if mag == 1 else f"{mag}*{zpart}"
            parts.append(("-" if c < 0 else "+", body))
        sign, first = parts[0]
        text = ("-" if sign == "-" else "") + first
        for sign, body in parts[1:]:
            text += f" {sign} {body}"
        return text

    def __eq__(self, other) -> bool:
        return isinstance(other, IntPolynomial) and self._c == other._c

    def __hash__(self) -> int:
        return hash(tuple(self.items()))

    def __repr__(self) -> str:
        return f"IntPolynomial({self.to_text()!r})"


def weight(p: IntPolynomial) -> int:
    return p.weight


def _abs_z_power_minus_one_sq(angle: RationalCosine, q: int) -> Fraction:
    """|z^q - 1|^2 = 2 - 2 cos(q theta), exact."""
    return 2 - 2 * cos_multiple(angle, q)


def near_return_q(angle: Angle, n: int, q_max: int = 10**6) -> int:
    """Smallest q with 1/(2n) < |z^q - 1| < 1/n.

    A fast numeric scan locates candidates; for rational-cosine angles the
    window membership is then confirmed exactly via 2 - 2cos(q theta).
    """
    if n < 2:
        raise ValueError("n must be >= 2")
    lo = Fraction(1, 4 * n * n)
    hi = Fraction(1, n * n)
    prec = 128
    with mp.workprec(prec):
        if isinstance(angle, RationalCosine):
            theta = angle.theta(prec)
        else:
            theta = angle.theta()
        two_pi = 2 * mp.pi
        alpha = mp.mpf(0)
        margin = mp.mpf(2) ** (-90)
        for q in range(1, q_max + 1):
            alpha = (alpha + theta) % two_pi
            d2 = 2 - 2 * mp.cos(alpha)
            if float(lo) - float(margin) < d2 < float(hi) + float(margin):
                if isinstance(angle, RationalCosine):
                    exact = _abs_z_power_minus_one_sq(angle, q)
                    if lo < exact < hi:
                        return q
                elif float(lo) < d2 < float(hi):
                    return q
    raise ValueError(f"no q <= {q_max} with |z^q - 1| in (1/(2n), 1/n); raise q_max")


@dataclass(frozen=True)
class _GadgetScale:
    """One (q, k) pair: the value (z^q - 1)^k with its log-modulus and arg."""

    q: int
    k: int
    logmod: float
    arg: float  # arg((z^q - 1)^k) mod 2pi
    base_weight: int  # q*k (degree part); coefficient part is l * 2^k


class GadgetCatalog:
    """Reusable search tables for gadgets l * z^j * (z^q - 1)^k of weight <= n."""

    def __init__(self, angle: Angle, n: int, j_max: int | None = None,
                 q_cap: int = 200000, depth: float = -18.0):
        if n < 16:
            raise ValueError("weight budget must be >= 16")
        self.angle = angle
        self.n = n
        prec = 160
        with mp.workprec(prec):
            if isinstance(angle, RationalCosine):
                theta = angle.theta(prec)
            else:
                theta = angle.theta()
            self.theta = float(theta)
            two_pi = 2 * mp.pi
            # record-setting near-returns: q where |z^q - 1| hits a new minimum
            records: list[tuple[int, float, float]] = []  # (q, log|z^q-1|, arg)
            best = mp.mpf(10)
            alpha = mp.mpf(0)
            for q in range(1, q_cap + 1):
                alpha = (alpha + theta) % two_pi
                dist = abs(mp.exp(1j * alpha) - 1)
                if dist < best:
                    best = dist
                    records.append(
                        (q, float(mp.log(dist)), float(mp.arg(mp.exp(1j * alpha) - 1) % two_pi))
                    )
                if 2 * q > n:  # q*k <= n needs q <= n/2 for k >= 2
                    break
        # scales: every (q, k) with feasible weight and useful depth
        scales: list[_GadgetScale] = []
        for q, lg, ar in records:
            if lg >= 0:
                continue
            k = 1
            while True:
                base_weight = q * k
                if base_weight + 2**k + 1 > n or k * lg < depth:
                    break
                scales.append(
                    _GadgetScale(q, k, k * lg, (k * ar) % TWO_PI, base_weight)
                )
                k += 1
        scales.sort(key=lambda s: s.logmod)
        self.scales = scales
        # angle lookup: j theta mod 2pi, sorted, for monomial corrections
        if j_max is None:
            j_max = min(max(n // 2, 64), 6000)
        self.j_max = j_max
        j = np.arange(j_max + 1, dtype=np.int64)
        ang = (j * self.theta) % TWO_PI
        order = np.argsort(ang)
        self._ang_sorted = ang[order]
        self._j_sorted = j[order]
        gaps = np.diff(np.concatenate([self._ang_sorted, [self._ang_sorted[0] + TWO_PI]]))
        self.max_angle_gap = float(gaps.max())

    def nearest_j(self, target: float) -> tuple[int, float]:
        """Monomial power whose angle is closest to target (mod 2pi)."""
        t = target % TWO_PI
        i = int(np.searchsorted(self._ang_sorted, t))
        best_j, best_err = 0, TWO_PI
        for cand in (i - 1, i, i % len(self._ang_sorted)):
            c = cand % len(self._ang_sorted)
            err = abs(self._ang_sorted[c] - t)
            err = min(err, TWO_PI - err)
            if err < best_err:
                best_err, best_j = err, int(self._j_sorted[c])
        return best_j, best_err


def gadget_search(
    angle: Angle,
    n: int,
    target_logmod: float,
    target_arg: float,
    catalog: GadgetCatalog | None = None,
    tol: float = 0.045,
    precision_bits: int = 64,
) -> IntPolynomial:
    """A polynomial of weight <= n with log p(z) within tol of the target.

    p = l * z^j * (z^q - 1)^k: the (q, k) scale sets a coarse negative
    log-modulus, the integer l >= 1 lifts it onto the target (consecutive
    l >= 10 are log-spaced below 0.1), and z^j turns the value to the target
    argument.  Raises BudgetExceeded when no gadget of weight <= n fits,
    which certify_dpv records as an uncovered cell.
    """
    if target_logmod > math.log(200 * n) + 0.1:
        raise ValueError("target modulus beyond the l <= 200 n regime")
    cat = catalog or GadgetCatalog(angle, n)
    candidates: list[tuple[int, int, int, int, float, float]] = []

    def consider(q: int, k: int, scale_logmod: float, scale_arg: float, base_weight: int):
        need = target_logmod - scale_logmod
        if need < -1e-9:
            return
        for ell in {math.floor(math.exp(need)), math.ceil(math.exp(need))}:
            if ell < 1:
                continue
            logmod_err = abs(math.log(ell) - need)
            if logmod_err > tol:
                continue
            w_coeff = ell * 2**k
            w_left = n - (base_weight + w_coeff + 1)
            if w_left < 0:
                continue
            want = (target_arg - scale_arg) % TWO_PI
            j, ang_err = cat.nearest_j(want)
            if ang_err > tol or j > w_left or j > cat.j_max:
                continue
            total_w = base_weight + w_coeff + 1 + j
            candidates.append((total_w, q, k, ell, float(j), max(logmod_err, ang_err)))

    consider(1, 0, 0.0, 0.0, 0)  # pure l * z^j
    for s in cat.scales:
        consider(s.q, s.k, s.logmod, s.arg, s.base_weight)
    if not candidates:
        raise BudgetExceeded(
            f"no gadget of weight <= {n} reaches ({target_logmod:.3f}, {target_arg:.3f})",
            budget="weight",
        )
    candidates.sort(key=lambda c: (c[0], c[5]))
    for total_w, q, k, ell, j_f, _err in candidates[:8]:
        j = int(j_f)
        if k == 0:
            p = IntPolynomial.monomial(j, ell)
        else:
            p = (IntPolynomial({q: 1, 0: -1}) ** k * ell).shift(j)
        if p.weight > n:
            continue
        lm, ar = p.log_value(angle, precision_bits)
        dlm = abs(float(lm) - target_logmod)
        dar = abs((float(ar) - target_arg + math.pi) % TWO_PI - math.pi)
        if dlm <= tol + 1e-6 and dar <= tol + 1e-6:
            return p
    raise BudgetExceeded(
        f"gadget candidates missed ({target_logmod:.3f}, {target_arg:.3f}) on verification",
        budget="weight",
    )


def _mixed_radix_values(
    angle: RationalCosine, exps: Sequence[int], idx: np.ndarray
) -> np.ndarray:
    """Embedded sum c . (z^e) for difference digits decoded from flat indices."""
    ctx = EmbeddingContext(angle, 64)
    a = angle.a
    radix = 2 * a - 1
    vals = np.zeros(len(idx), dtype=np.complex128)
    rem = idx.copy()
    for e in exps:
        digit = rem % radix
        rem //= radix
        coeff = digit.astype(np.int64) - (a - 1)
        vals += coeff * complex(ctx.embed_z_power(e))
    return vals


def _decode_digits(angle: RationalCosine, exps: Sequence[int], flat: int) -> dict[int, int]:
    a = angle.a
    radix = 2 * a - 1
    out = {}
    rem = flat
    for e in exps:
        digit = rem % radix
        rem //= radix
        c = digit - (a - 1)
        if c:
            out[e] = c
    return out


def pigeonhole_search(
    angle: RationalCosine,
    D: int,
    memory_budget: int = 8 * 10**8,
    block: int = 4 * 10**6,
) -> IntPolynomial:
    """Nonzero difference of two digit polynomials minimizing |q(z)|.

    The coefficient space [1-a, a-1]^{D+1} is split into two halves of
    exponents; the low half's embedded partial sums are bucketed on a grid of
    side tau, and the high half is streamed against the 3x3 neighborhood of
    each bucket, which catches every pair within tau.  Starting from
    tau = 4 D a^{1 - D/2} (above the pigeonhole upper bound, so the true
    minimizer is always in range) and doubling on a miss, the reported
    minimum is the global one.
    """
    if D < 1:
        raise ValueError("D must be >= 1")
    a = angle.a
    radix = 2 * a - 1
    m_low = (D + 1) // 2
    exps_low = list(range(0, m_low))
    exps_high = list(range(m_low, D + 1))
    n_low = radix ** len(exps_low)
    n_high = radix ** len(exps_high)
    if n_low * 3 + block * 4 > memory_budget:
        raise BudgetExceeded(
            f"meet-in-the-middle table for D={D} exceeds the memory budget",
            budget="memory",
        )
    low_vals = _mixed_radix_values(angle, exps_low, np.arange(n_low, dtype=np.int64))
    tau = 4.0 * D * a ** (1 - D / 2)
    zero_low = (n_low - 1) // 2  # flat index of the all-zero low digits
    zero_high = (n_high - 1) // 2
    while True:
        inv_tau = 1.0 / tau
        cx = np.floor(low_vals.real * inv_tau).astype(np.int64)
        cy = np.floor(low_vals.imag * inv_tau).astype(np.int64)
        keys = ((cx + 2**30) << 32) | (cy + 2**30)
        order = np.argsort(keys, kind="stable")
        keys_sorted = keys[order]
        best_val = math.inf
        best_pair = None
        for lo in range(0, n_high, block):
            idx_high = np.arange(lo, min(lo + block, n_high), dtype=np.int64)
            high_vals = _mixed_radix_values(angle, exps_high, idx_high)
            hx = np.floor(-high_vals.real * inv_tau).astype(np.int64)
            hy = np.floor(-high_vals.imag * inv_tau).astype(np.int64)
            for dx in (-1, 0, 1):
                for dy in (-1, 0, 1):
                    nk = ((hx + dx + 2**30) << 32) | (hy + dy + 2**30)
                    left = np.searchsorted(keys_sorted, nk, side="left")
                    right = np.searchsorted(keys_sorted, nk, side="right")
                    hit = np.flatnonzero(right > left)
                    for h in hit:
                        for pos in range(left[h], right[h]):
                            li = int(order[pos])
                            hi_flat = int(idx_high[h])
                            if li == zero_low and hi_flat == zero_high:
                                continue
                            v = abs(low_vals[li] + high_vals[h])
                            if v < best_val:
                                best_val = v
                                best_pair = (li, hi_flat)
        if best_pair is not None and best_val <= tau:
            coeffs = _decode_digits(angle, exps_low, best_pair[0])
            coeffs.update(_decode_digits(angle, exps_high, best_pair[1]))
            return IntPolynomial(coeffs)
        tau *= 2


def pigeonhole_bruteforce(angle: RationalCosine, D: int) -> float:
    """Exact minimum over all distinct pairs of P_D, via a nearest-pair tree."""
    from scipy.spatial import cKDTree

    a = angle.a
    count = a ** (D + 1)
    if count > 3 * 10**6:
        raise BudgetExceeded(f"brute force over a^{D + 1} points too large", budget="memory")
    ctx = EmbeddingContext(angle, 64)
    idx = np.arange(count, dtype=np.int64)
    vals = np.zeros(count, dtype=np.complex128)
    rem = idx.copy()
    for e in range(D + 1):
        digit = rem % a
        rem //= a
        vals += digit.astype(np.int64) * complex(ctx.embed_z_power(e))
    pts = np.column_stack([vals.real, vals.imag])
    tree = cKDTree(pts)
    dist, _ = tree.query(pts, k=2)
    return float(dist[:, 1].min())


def _sylvester_matrix(p: Sequence[int], q: Sequence[int]) -> list[list[int]]:
    m = len(p) - 1
    n = len(q) - 1
    size = m + n
    rows = []
    for i in range(n):
        row = [0] * size
        for j, c in enumerate(reversed(p)):
            row[i + j] = c
        rows.append(row)
    for i in range(m):
        row = [0] * size
        for j, c in enumerate(reversed(q)):
            row[i + j] = c
        rows.append(row)
    return rows


def _bareiss_det(matrix: list[list[int]]) -> int:
    """Fraction-free determinant over the integers."""
    m = [row[:] for row in matrix]
    n = len(m)
    if n == 0:
        return 1
    sign = 1
    prev = 1
    for k in range(n - 1):
        if m[k][k] == 0:
            for swap in range(k + 1, n):
                if m[swap][k] != 0:
                    m[k], m[swap] = m[swap], m[k]
                    sign = -sign
                    break
            else:
                return 0
        for i in range(k + 1, n):
            for j in range(k + 1, n):
                m[i][j] = (m[i][j] * m[k][k] - m[i][k] * m[k][j]) // prev
            m[i][k] = 0
        prev = m[k][k]
    return sign * m[n - 1][n - 1]


def _trim(coeffs: Sequence[int]) -> list[int]:
    out = list(coeffs)
    while len(out) > 1 and out[-1] == 0:
        out.pop()
    return out


def resultant_sylvester(p: IntPolynomial, q: IntPolynomial) -> int:
    """Res(p, q) as the Sylvester determinant, exact over the integers."""
    pc = _trim(p.coeffs_list())
    qc = _trim(q.coeffs_list())
    if pc == [0] or qc == [0]:
        return 0
    m, n = len(pc) - 1, len(qc) - 1
    if n == 0:
        return qc[0] ** m
    if m == 0:
        return pc[0] ** n
    return _bareiss_det(_sylvester_matrix(pc, qc))


def resultant_euclid(p: IntPolynomial, q: IntPolynomial) -> int:
    """Res(p, q) by the Euclidean transformation rules over the rationals."""
    pc = [Fraction(c) for c in _trim(p.coeffs_list())]
    qc = [Fraction(c) for c in _trim(q.coeffs_list())]
    if pc == [Fraction(0)] or qc == [Fraction(0)]:
        return 0
    res = Fraction(1)
    while True:
        m, n = len(pc) - 1, len(qc) - 1
        if n == 0:
            res *= qc[0] ** m
            break
        if m < n:
            pc, qc = qc, pc
            if (m * n) % 2 == 1:
                res = -res
            continue
        # remainder of pc by qc
        rem = pc[:]
        lead = qc[-1]
        for i in range(m, n - 1, -1):
            f = rem[i] / lead
            if f:
                for j in range(n + 1):
                    rem[i - n + j] -= f * qc[j]
        rem = rem[:n]
        while len(rem) > 1 and rem[-1] == 0:
            rem.pop()
        if rem == [Fraction(0)] or not rem:
            return 0
        d = len(rem) - 1
        res *= lead ** (m - d)
        if (m * n) % 2 == 1:
            res = -res
        pc, qc = qc, rem
    assert res.denominator == 1
    return int(res)


def resultant_check(angle: RationalCosine, q: IntPolynomial) -> tuple[int, float]:
    """(Res(p_min, q), relative gap of |Res| against a^D |q(z)|^2).

    Both sides are exact rationals, so the gap is exactly zero unless
    something is broken; it is still reported as a number per the contract.
    Raises ValueError when the resultant vanishes (p_min divides q).
    """
    c2, c1, c0 = angle.minimal_polynomial  # a z^2 - b z + a, ascending (a, -b, a)
    p_min = IntPolynomial([c2, c1, c0])
    res = resultant_sylvester(p_min, q)
    if res == 0:
        raise ValueError("resultant vanished: minimal polynomial divides q")
    D = len(_trim(q.coeffs_list())) - 1
    expected = Fraction(angle.a) ** D * q.evaluate(angle).norm_sq()
    gap = abs(Fraction(abs(res)) - expected) / expected
    return res, float(gap)


def injectivity_bruteforce(
    angle: RationalCosine, D: int, memory_budget: int = 8 * 10**8
) -> bool:
    """Whether q -> q(z) is injective on digit polynomials of degree <= D.

    Values are compared exactly: q(z) scaled by a^max(D-1, 0) has integer
    coordinates, and all a^(D+1) coordinate pairs must be distinct.
    """
    a = angle.a
    count = a ** (D + 1)
    if count * 4 > memory_budget:
        raise BudgetExceeded(f"injectivity scan a^{D + 1} exceeds budget", budget="memory")
    scale = max(D - 1, 0)
    us = np.zeros(count, dtype=np.int64)
    vs = np.zeros(count, dtype=np.int64)
    idx = np.arange(count, dtype=np.int64)
    rem = idx.copy()
    limit = 2**62
    for e in range(D + 1):
        digit = (rem % a).astype(np.int64)
        rem //= a
        zp = angle.z_power(e)
        s = a ** (scale - zp.k)
        pu, pv = zp.u * s, zp.v * s
        if max(abs(pu), abs(pv)) * (a - 1) * (D + 1) > limit:
            raise BudgetExceeded("coordinates exceed int64 range", budget="memory")
        us += digit * pu
        vs += digit * pv
    packed = np.stack([us, vs], axis=1)
    uniq = np.unique(packed, axis=0)
    return len(uniq) == count


@dataclass
class NetCertificate:
    """Grid coverage certificate for log p(z) over a log-modulus range."""

    a: int | None
    b: int | None
    n: int
    R: float | None
    logmod_range: tuple[float, float]
    rows: int
    cols: int
    cell: float
    witnesses: dict[tuple[int, int], IntPolynomial] = field(default_factory=dict)
    uncovered: list[tuple[int, int]] = field(default_factory=list)
    strategy: str = "gadget_only"

    @property
    def is_complete(self) -> bool:
        return not self.uncovered

    @property
    def row_height(self) -> float:
        lo, hi = self.logmod_range
        return (hi - lo) / self.rows if self.rows else 0.0

    @property
    def col_width(self) -> float:
        return TWO_PI / self.cols

    def cell_bounds(self, i: int, j: int) -> tuple[float, float, float, float]:
        lo, _ = self.logmod_range
        h, w = self.row_height, self.col_width
        return lo + i * h, lo + (i + 1) * h, j * w, (j + 1) * w

    def verify(self, angle: Angle, precision_bits: int = 256, inflate: float = 1e-6) -> bool:
        """Re-evaluate every witness at high precision; True if all in-cell."""
        for (i, j), p in self.witnesses.items():
            if p.weight > self.n:
                return False
            lm, ar = p.log_value(angle, precision_bits)
            lm_lo, lm_hi, ar_lo, ar_hi = self.cell_bounds(i, j)
            if not (lm_lo - inflate <= float(lm) <= lm_hi + inflate):
                return False
            arf = float(ar)
            in_arc = ar_lo - inflate <= arf <= ar_hi + inflate
            if not in_arc:
                # wraparound cells are glued at 0 == 2pi
                in_arc = ar_lo - inflate <= arf - TWO_PI <= ar_hi + inflate or (
                    ar_lo - inflate <= arf + TWO_PI <= ar_hi + inflate
                )
            if not in_arc:
                return False
        return True

    def to_json(self) -> dict:
        return {
            "a": self.a,
            "b": self.b,
            "n": self.n,
            "R": self.R,
            "cell": self.cell,
            "rows": self.rows,
            "cols": self.cols,
            "logmod_range": list(self.logmod_range),
            "strategy": self.strategy,
            "witnesses": [
                {"cell_ij": [i, j], "coeffs": p.to_json()}
                for (i, j), p in sorted(self.witnesses.items())
            ],
            "uncovered": [list(c) for c in sorted(self.uncovered)],
        }

    @classmethod
    def from_json(cls, data: dict) -> "NetCertificate":
        cert = cls(
            a=data.get("a"),
            b=data.get("b"),
            n=data["n"],
            R=data.get("R"),
            logmod_range=tuple(data["logmod_range"]),
            rows=data["rows"],
            cols=data["cols"],
            cell=data["cell"],
            strategy=data.get("strategy", "gadget_only"),
        )
        for item in data["witnesses"]:
            i, j = item["cell_ij"]
            cert.witnesses[(i, j)] = IntPolynomial.from_json(item["coeffs"])
        cert.uncovered = [tuple(c) for c in data["uncovered"]]
        return cert

    def save(self, path: str) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_json(), fh, indent=1, sort_keys=True)

    @classmethod
    def load(cls, path: str) -> "NetCertificate":
        with open(path) as fh:
            return cls.from_json(json.load(fh))


def certify_dpv(
    angle: Angle,
    n: int,
    R: float | None = None,
    logmod_range: tuple[float, float] | None = None,
    strategy: str = "gadget_only",
    cell: float = DEFAULT_CELL,
    precision_bits: int = 64,
) -> NetCertificate:
    """Coverage certificate: a weight <= n witness in every 0.1-cell.

    The rectangle is [-log R, 0] x [0, 2pi) by default, or an explicit
    logmod_range (which may extend above 0, as needed when witnesses are to
    be multiplied by a fixed ring element afterwards).  Uncovered cells are
    recorded, not raised: an incomplete certificate is a result.
    """
    if strategy not in ("gadget_only", "gadget_plus_pigeonhole"):
        raise ValueError(f"unknown strategy {strategy!r}")
    if n < 16:
        raise ValueError("n must be >= 16")
    if (R is None) == (logmod_range is None):
        raise ValueError("give exactly one of R or logmod_range")
    if R is not None:
        if R < 1:
            raise ValueError("R must be >= 1")
        logmod_range = (-math.log(R), 0.0)
    lo, hi = logmod_range
    if hi < lo:
        raise ValueError("empty logmod range")
    rows = max(1, math.ceil((hi - lo) / cell - 1e-9))
    cols = ARG_CELLS
    cert = NetCertificate(
        a=angle.a if isinstance(angle, RationalCosine) else None,
        b=angle.b if isinstance(angle, RationalCosine) else None,
        n=n,
        R=R,
        logmod_range=(lo, hi),
        rows=rows,
        cols=cols,
        cell=cell,
        strategy=strategy,
    )
    catalog = GadgetCatalog(angle, n)
    h = cert.row_height
    w = cert.col_width
    pigeon_cache: list[tuple[float, float, IntPolynomial]] = []
    if strategy == "gadget_plus_pigeonhole" and isinstance(angle, RationalCosine):
        D = 2
        while True:
            p1 = pigeonhole_search(angle, D)
            lm, ar = p1.log_value(angle, 64)
            if float(lm) < lo - 1.0 or p1.weight > n // 4 or D > 24:
                break
            pigeon_cache.append((float(lm), float(ar), p1))
            D += 2
    for i in range(rows):
        t_lm = lo + (i + 0.5) * h
        for j in range(cols):
            t_ar = (j + 0.5) * w
            witness = None
            try:
                witness = gadget_search(
                    angle, n, t_lm, t_ar, catalog=catalog,
                    tol=0.45 * min(h, w), precision_bits=precision_bits,
                )
            except BudgetExceeded:
                if strategy == "gadget_plus_pigeonhole":
                    witness = _pigeonhole_compose(
                        angle, n, t_lm, t_ar, catalog, pigeon_cache,
                        tol=0.45 * min(h, w), precision_bits=precision_bits,
                    )
            if witness is None:
                cert.uncovered.append((i, j))
            else:
                cert.witnesses[(i, j)] = witness
    return cert


def _pigeonhole_compose(
    angle: Angle,
    n: int,
    t_lm: float,
    t_ar: float,
    catalog: GadgetCatalog,
    pigeon_cache: Sequence[tuple[float, float, IntPolynomial]],
    tol: float,
    precision_bits: int,
) -> IntPolynomial | None:
    """Coarse pigeonhole factor, then a gadget correction on the residual.

    Mirrors the product refinement q1 q2 ... z^k: q1 sets the rough
    magnitude, the gadget supplies the geometrically finer correction and
    the monomial turn.  The expanded product's true weight must stay <= n.
    """
    for lm1, ar1, p1 in pigeon_cache:
        residual_lm = t_lm - lm1
        residual_ar = (t_ar - ar1) % TWO_PI
        if residual_lm < -0.5:
            continue
        try:
            p2 = gadget_search(
                angle, n - p1.weight, residual_lm, residual_ar,
                catalog=catalog, tol=tol / 2, precision_bits=precision_bits,
            )
        except (BudgetExceeded, ValueError):
            continue
        product = p1 * p2
        if product.weight > n:
            continue
        lm, ar = product.log_value(angle, precision_bits)
        dlm = abs(float(lm) - t_lm)
        dar = abs((float(ar) - t_ar + math.pi) % TWO_PI - math.pi)
        if dlm <= tol + 1e-6 and dar <= tol + 1e-6:
            return product
    return None


_LETTER_NAMES = ("A", "a", "B", "b")  # g1, g1^-1, g2, g2^-1


class Word:
    """Word over the generators g1 (rotation) and g2 (translation)."""

    __slots__ = ("_letters",)

    def __init__(self, letters: Iterable[int]):
        letters = tuple(letters)
        if any(l not in (0, 1, 2, 3) for l in letters):
            raise ValueError("letters must be in {0: g1, 1: g1inv, 2: g2, 3: g2inv}")
        self._letters = letters

    @classmethod
    def from_string(cls, text: str) -> "Word":
        try:
            return cls(_LETTER_NAMES.index(ch) for ch in text)
        except ValueError:
            raise ValueError(f"word letters must be among 'AaBb': {text!r}") from None

    def __str__(self) -> str:
        return "".join(_LETTER_NAMES[l] for l in self._letters)

    def __len__(self) -> int:
        return len(self._letters)

    def __eq__(self, other) -> bool:
        return isinstance(other, Word) and self._letters == other._letters

    def __hash__(self) -> int:
        return hash(self._letters)

    def __add__(self, other: "Word") -> "Word":
        if not isinstance(other, Word):
            return NotImplemented
        return Word(self._letters + other._letters)

    def inverse(self) -> "Word":
        flip = {0: 1, 1: 0, 2: 3, 3: 2}
        return Word(flip[l] for l in reversed(self._letters))

    def evaluate(self, g1: Isometry, g2: Isometry) -> Isometry:
        """Exact isometry product of the word."""
        table = (g1, g1.inverse(), g2, g2.inverse())
        out = Isometry.identity(g1.angle)
        for l in self._letters:
            out = out.compose(table[l])
        return out

    def __repr__(self) -> str:
        return f"Word({str(self)!r})"


COMMUTATOR = Word((0, 2, 1, 3))  # g1 g2 g1^-1 g2^-1


def generators(angle: RationalCosine) -> tuple[Isometry, Isometry]:
    """The standard pair: g1 rotates by theta, g2 translates by 1."""
    return Isometry(1, angle.zero()), Isometry(0, angle.one())


def commutator_translation(angle: RationalCosine) -> RingPoint:
    """v(g1 g2 g1^-1 g2^-1) = z - 1, the unit the words are measured in."""
    g1, g2 = generators(angle)
    comm = COMMUTATOR.evaluate(g1, g2)
    if comm.rotation_power != 0:
        raise AssertionError("commutator of a rotation and a translation must be a translation")
    if comm.translation.is_zero:
        raise ValueError("generators commute; no commutator translation exists")
    return comm.translation


def word_synthesis(p: IntPolynomial) -> Word:
    """A word of length <= 4 weight(p) evaluating to the translation by v*p(z).

    v is the commutator translation.  The recursion peels the constant term
    one unit at a time (4 letters each) and conjugates by the rotation to
    divide by z (2 letters); both steps are exact identities of isometries.
    """
    if p.is_zero:
        raise ValueError("p must be nonzero")
    c0 = p.coeff(0)
    if c0 != 0:
        step = COMMUTATOR if c0 > 0 else COMMUTATOR.inverse()
        rest = p - IntPolynomial({0: 1 if c0 > 0 else -1})
        if rest.is_zero:
            return step
        return word_synthesis(rest) + step
    shifted = IntPolynomial({e - 1: c for e, c in p.items()})
    inner = word_synthesis(shifted)
    return Word((0,)) + inner + Word((1,))


def ample_check(
    points: Sequence, delta: float, cell: float = DEFAULT_CELL
) -> tuple[bool, list[tuple[int, int]]]:
    """Do the logs of the points cover every 0.1-cell of [log delta, 0] x [0, 2pi)?

    Points may be ring points (embedded at 64 bits) or complex numbers.
    Returns (complete, uncovered cells).
    """
    if not 0 < delta <= 1:
        raise ValueError("delta must be in (0, 1]")
    lo = math.log(delta)
    rows = max(1, math.ceil(-lo / cell - 1e-9))
    cols = ARG_CELLS
    h = -lo / rows if lo < 0 else 1.0
    w = TWO_PI / cols
    seen = np.zeros((rows, cols), dtype=bool)
    ctx_cache: dict = {}
    for x in points:
        if isinstance(x, RingPoint):
            ctx = ctx_cache.get(x.angle)
            if ctx is None:
                ctx = ctx_cache[x.angle] = EmbeddingContext(x.angle, 64)
            val = complex(ctx.embed(x))
        else:
            val = complex(x)
        if val == 0:
            continue
        lm = math.log(abs(val))
        if lm < lo - 1e-9 or lm > 1e-9:
            continue
        i = min(rows - 1, max(0, int((lm - lo) / h))) if lo < 0 else 0
        j = int((math.atan2(val.imag, val.real) % TWO_PI) / w) % cols
        seen[i, j] = True
    uncovered = [(int(i), int(j)) for i, j in np.argwhere(~seen)]
    return not uncovered, uncovered
