"""Positivity tools around Polya's theorem.

``sphere_extrema`` brackets the infimum and supremum of a form on the unit
sphere with rational numbers.  Even forms are handled exactly through the
substitution t_i = x_i^2, which maps the sphere onto the standard simplex;
on each simplex cell the Bernstein coefficients enclose the range.  Other
forms fall back to a sampled octahedral grid with a Lipschitz error term.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional

from .certificates import GramCertificate, verify_gram_exact
from .basis import MonomialBasis
from .forms import Form, FormError, evaluate, is_even_form, linear_change, monomials_of_degree, mul, power

# certified enclosure of log(2)
LN2_LOWER = Fraction("0.6931471805")
LN2_UPPER = Fraction("0.6931471806")

STRICT = "strict"
NONNEG = "nonneg"


@dataclass(frozen=True)
class EpsilonEstimate:
    inf_lower: Fraction
    inf_upper: Fraction
    sup_lower: Fraction
    sup_upper: Fraction
    epsilon_lower: Optional[Fraction]
    epsilon_upper: Optional[Fraction]
    depth: int = 0
    cells: int = 0
    method: str = ""

    def as_dict(self) -> dict:
        def q(v):
            return None if v is None else [str(v.numerator), str(v.denominator)]

        return {"inf": [q(self.inf_lower), q(self.inf_upper)], "sup": [q(self.sup_lower), q(self.sup_upper)],
                "epsilon": [q(self.epsilon_lower), q(self.epsilon_upper)], "depth": self.depth,
                "cells": self.cells, "method": self.method}


@dataclass
class PolyaReport:
    form_id: str
    positivity_mode: str
    N_bound: Optional[int]
    N_measured: Optional[int]
    estimate: Optional[EpsilonEstimate] = None
    stats: dict = field(default_factory=dict)

    def as_dict(self) -> dict:
        return {"form": self.form_id, "mode": self.positivity_mode, "N_bound": self.N_bound,
                "N_measured": self.N_measured,
                "estimate": self.estimate.as_dict() if self.estimate else None, "stats": self.stats}


def _epsilon_bracket(il, iu, sl, su):
    if sl <= 0:
        return None, None
    lo = il / su if il >= 0 else il / sl
    hi = iu / sl if iu >= 0 else iu / su
    return lo, hi


# -- sphere extrema ---------------------------------------------------------------

def _multinomial(d: int, beta) -> int:
    out = math.factorial(d)
    for b in beta:
        out //= math.factorial(b)
    return out


class _Cell:
    __slots__ = ("verts", "lower", "upper", "samples")

    def __init__(self, f: Form, verts):
        self.verts = verts
        n = f.n_vars
        d = f.degree
        A = [[verts[i][j] for i in range(n)] for j in range(n)]
        g = linear_change(f, A)
        coeffs = [g.coeff(b) / _multinomial(d, b) for b in monomials_of_degree(n, d)]
        self.lower = min(coeffs)
        self.upper = max(coeffs)
        centre = [sum(v[j] for v in verts) / n for j in range(n)]
        self.samples = [evaluate(f, v) for v in verts] + [evaluate(f, centre)]

    def split(self, f: Form):
        n = len(self.verts)
        best, pair = -1, (0, 1)
        for i, j in itertools.combinations(range(n), 2):
            dist = sum((a - b) ** 2 for a, b in zip(self.verts[i], self.verts[j]))
            if dist > best:
                best, pair = dist, (i, j)
        i, j = pair
        mid = tuple((a + b) / 2 for a, b in zip(self.verts[i], self.verts[j]))
        left = list(self.verts)
        right = list(self.verts)
        left[j] = mid
        right[i] = mid
        return _Cell(f, tuple(left)), _Cell(f, tuple(right))


def _even_extrema(p: Form, depth: int, max_cells: int) -> EpsilonEstimate:
    n = p.n_vars
    f = Form(n, {tuple(k // 2 for k in e): c for e, c in p.items()})
    if f.degree == 0:
        c = next(iter(f.items()))[1]
        lo, hi = _epsilon_bracket(c, c, c, c)
        return EpsilonEstimate(c, c, c, c, lo, hi, depth, 1, "bernstein")
    root = tuple(tuple(Fraction(int(i == j)) for j in range(n)) for i in range(n))
    cells = [_Cell(f, root)]
    il = min(c.lower for c in cells)
    su = max(c.upper for c in cells)
    iu = min(min(c.samples) for c in cells)
    sl = max(max(c.samples) for c in cells)
    for _ in range(depth):
        nxt = []
        for c in cells:
            # only cells that can still move a bracket are refined
            if (c.lower < iu or c.upper > sl) and len(nxt) + len(cells) < max_cells:
                nxt.extend(c.split(f))
            else:
                nxt.append(c)
        cells = nxt
        il = max(il, min(c.lower for c in cells))
        su = min(su, max(c.upper for c in cells))
        iu = min(iu, min(min(c.samples) for c in cells))
        sl = max(sl, max(max(c.samples) for c in cells))
    lo, hi = _epsilon_bracket(il, iu, sl, su)
    return EpsilonEstimate(il, iu, sl, su, lo, hi, depth, len(cells), "bernstein")


def _sqrt_bracket(r: Fraction, bits: int = 48) -> tuple[Fraction, Fraction]:
    scale = 1 << (2 * bits)
    num = r.numerator * scale // r.denominator
    lo = math.isqrt(num)
    return Fraction(lo, 1 << bits), Fraction(lo + 1, 1 << bits) + Fraction(1, 1 << bits)


def _grid_extrema(p: Form, depth: int) -> EpsilonEstimate:
    """Octahedral grid samples with the error term m * |p|_1 * delta."""
    n, m = p.n_vars, p.degree
    k = 1 << depth
    norm1 = sum(abs(c) for _, c in p.items())
    lip = m * norm1
    delta = Fraction(2 * (math.isqrt(2 * n) + 1), k)
    inf_u = sup_l = None
    for w in itertools.product(range(k + 1), repeat=n - 1):
        if sum(w) > k:
            continue
        base = list(w) + [k - sum(w)]
        for signs in itertools.product((1, -1), repeat=n):
            if any(s < 0 and b == 0 for s, b in zip(signs, base)):
                continue
            pt = [Fraction(s * b, k) for s, b in zip(signs, base)]
            val = evaluate(p, pt)
            r2 = sum(x * x for x in pt)
            if m % 2 == 0:
                lo = hi = val / r2 ** (m // 2)
            else:
                rl, rh = _sqrt_bracket(r2)
                norm_lo = rl * r2 ** (m // 2)
                norm_hi = rh * r2 ** (m // 2)
                cands = [val / norm_lo, val / norm_hi]
                lo, hi = min(cands), max(cands)
            inf_u = hi if inf_u is None else min(inf_u, hi)
            sup_l = lo if sup_l is None else max(sup_l, lo)
    il = max(inf_u - lip * delta, -norm1)
    su = min(sup_l + lip * delta, norm1)
    lo, hi = _epsilon_bracket(il, inf_u, sup_l, su)
    return EpsilonEstimate(il, inf_u, sup_l, su, lo, hi, depth, k, "lipschitz-grid")


def sphere_extrema(p: Form, depth: int = 8, max_cells: int = 20000) -> EpsilonEstimate:
    """Rational brackets for inf and sup of p on the unit sphere, and for their ratio."""
    if depth < 0:
        raise ValueError("depth must be non-negative")
    if p.is_zero():
        z = Fraction(0)
        return EpsilonEstimate(z, z, z, z, None, None, depth, 0, "zero")
    if is_even_form(p):
        return _even_extrema(p, depth, max_cells)
    return _grid_extrema(p, min(depth, 6))


# -- the exponent bound -------------------------------------------------------------

def polya_bound(n: int, m: int, epsilon) -> int:
    """Smallest integer N with N >= n m (m - 1) / (4 ln2 eps) - (n + m) / 2, floored at 0.

    ln 2 is replaced by the lower end of a certified rational enclosure, which
    makes the right-hand side as large as it can be, and the result is the
    ceiling of that value.
    """
    eps = Fraction(epsilon)
    if eps <= 0:
        raise ValueError("epsilon must be positive (the form must be positive definite)")
    if n < 1 or m < 2:
        raise ValueError("need n >= 1 and m >= 2")
    rhs = Fraction(n * m * (m - 1)) / (4 * LN2_LOWER * eps) - Fraction(n + m, 2)
    return max(0, math.ceil(rhs))


# -- exponent searches ----------------------------------------------------------------

def _all_coefficients(f: Form, strict: bool) -> bool:
    if f.is_zero():
        return False
    if strict:
        return all(f.coeff(e) > 0 for e in monomials_of_degree(f.n_vars, f.degree))
    return all(c >= 0 for _, c in f.items())


def polya_exponent_search(f: Form, N_max: int, strictness: str = STRICT) -> Optional[int]:
    """Minimal N <= N_max with (x_1 + ... + x_n)^N f having positive (or non-negative) coefficients.

    Returns None when every N up to N_max fails.
    """
    if strictness not in (STRICT, NONNEG):
        raise ValueError(f"strictness must be {STRICT!r} or {NONNEG!r}")
    s = Form.linear([1] * f.n_vars)
    g = f
    for N in range(N_max + 1):
        if _all_coefficients(g, strictness == STRICT):
            return N
        g = mul(g, s)
    return None


def even_denominator_search(p: Form, N_max: int, strictness: str = NONNEG) -> Optional[int]:
    """Minimal N <= N_max with (x_1^2 + ... + x_n^2)^N p having non-negative (or positive) coefficients."""
    if not is_even_form(p):
        raise FormError("even_denominator_search needs an even form")
    q = Form(p.n_vars, {tuple(2 * int(i == j) for j in range(p.n_vars)): 1 for i in range(p.n_vars)})
    g = p
    strict = strictness == STRICT
    for N in range(N_max + 1):
        if strict:
            ok = not g.is_zero() and all(g.coeff(tuple(2 * k for k in e)) > 0
                                         for e in monomials_of_degree(p.n_vars, g.degree // 2))
        else:
            ok = _all_coefficients(g, False)
        if ok:
            return N
        g = mul(g, q)
    return None


def monomial_square_certificate(q: Form) -> Optional[GramCertificate]:
    """Diagonal Gram certificate for an even form with non-negative coefficients."""
    if q.is_zero() or not is_even_form(q) or any(c < 0 for _, c in q.items()):
        return None
    half = {tuple(k // 2 for k in e): c for e, c in q.items()}
    mons = tuple(sorted(half))
    basis = MonomialBasis(q.n_vars, q.degree // 2, mons)
    gram = tuple(tuple(half[a] if a == b else Fraction(0) for b in basis.monomials) for a in basis.monomials)
    cert = GramCertificate(basis, gram)
    return cert if verify_gram_exact(q, cert) else None


def polya_report(p: Form, form_id: str = "form", mode: str = "even", depth: int = 8,
                 N_max: int = 200) -> PolyaReport:
    """Bound versus measured exponent for one form.

    ``mode`` is "even" (multiplier sum of squares of the variables, p must be
    even) or "simplex" (multiplier sum of the variables, strict positivity).
    """
    est = sphere_extrema(p, depth)
    bound = None
    if est.epsilon_lower is not None and est.epsilon_lower > 0 and p.degree and p.degree >= 2:
        bound = polya_bound(p.n_vars, p.degree, est.epsilon_lower)
    if mode == "even":
        measured = even_denominator_search(p, N_max)
        stats: dict = {"N_max": N_max}
        if measured is not None:
            q = mul(power(Form(p.n_vars, {tuple(2 * int(i == j) for j in range(p.n_vars)): 1
                                          for i in range(p.n_vars)}), measured), p)
            stats["diagonal_certificate"] = monomial_square_certificate(q) is not None
    elif mode == "simplex":
        measured = polya_exponent_search(p, N_max, STRICT)
        stats = {"N_max": N_max}
    else:
        raise ValueError(f"unknown positivity mode {mode!r}")
    stats["cells"] = est.cells
    return PolyaReport(form_id, mode, bound, measured, est, stats)
