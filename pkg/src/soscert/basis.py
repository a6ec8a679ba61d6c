"""Monomial bases for Gram matrices and half-Newton-polytope reduction."""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
from scipy.optimize import linprog

from .forms import Exponent, Form, FormError, grlex_key, monomials_of_degree


@dataclass(frozen=True)
class MonomialBasis:
    n_vars: int
    half_degree: int
    monomials: tuple[Exponent, ...]
    # excluded monomial -> integer direction c with c.(2*beta) > c.alpha for all alpha in supp(p)
    exclusions: dict = field(default_factory=dict, compare=False, repr=False)

    def __post_init__(self):
        mons = tuple(tuple(m) for m in self.monomials)
        if len(set(mons)) != len(mons):
            raise ValueError("duplicate monomials in basis")
        if any(len(m) != self.n_vars or sum(m) != self.half_degree for m in mons):
            raise ValueError("basis monomials must have length n_vars and total degree half_degree")
        object.__setattr__(self, "monomials", tuple(sorted(mons, key=grlex_key)))

    def __len__(self) -> int:
        return len(self.monomials)

    def __iter__(self):
        return iter(self.monomials)

    def index(self, m: Exponent) -> int:
        return self.monomials.index(tuple(m))


def full_basis(n_vars: int, half_degree: int) -> MonomialBasis:
    return MonomialBasis(n_vars, half_degree, tuple(monomials_of_degree(n_vars, half_degree)))


def separates(direction, point, support) -> bool:
    """Exact check that ``direction`` strictly separates ``point`` from ``support``."""
    c = [Fraction(v) for v in direction]
    val = sum(ci * pi for ci, pi in zip(c, point))
    return all(val > sum(ci * ai for ci, ai in zip(c, a)) for a in support)


def _separating_direction(point, support):
    n = len(point)
    lo = [min(a[i] for a in support) for i in range(n)]
    hi = [max(a[i] for a in support) for i in range(n)]
    for i in range(n):
        if point[i] > hi[i]:
            return tuple(int(i == j) for j in range(n))
        if point[i] < lo[i]:
            return tuple(-int(i == j) for j in range(n))
    # maximise c.point - s subject to c.alpha <= s, -1 <= c <= 1
    pts = np.array(support, dtype=float)
    obj = np.concatenate([-np.array(point, dtype=float), [1.0]])
    a_ub = np.hstack([pts, -np.ones((len(support), 1))])
    res = linprog(obj, A_ub=a_ub, b_ub=np.zeros(len(support)),
                  bounds=[(-1, 1)] * n + [(None, None)], method="highs")
    if res.status != 0 or -res.fun <= 1e-9:
        return None
    for den in (1, 2, 3, 4, 6, 8, 12, 24, 60, 120, 1000):
        cand = [Fraction(v).limit_denominator(den) for v in res.x[:n]]
        scale = 1
        for v in cand:
            scale = scale * v.denominator // np.gcd(scale, v.denominator)
        cand = tuple(int(v * scale) for v in cand)
        if separates(cand, point, support):
            return cand
    return None


def half_newton_basis(p: Form) -> MonomialBasis:
    """Degree-m/2 monomials whose double lies in the Newton polytope of p.

    A candidate is dropped only when an exact separating direction is found,
    so numerical trouble can only enlarge the basis.
    """
    if p.is_zero():
        raise FormError("the zero form has no Newton polytope")
    m = p.degree
    if m % 2:
        raise FormError(f"odd degree {m}: no square-root basis")
    support = p.support()
    keep, excluded = [], {}
    for beta in monomials_of_degree(p.n_vars, m // 2):
        point = tuple(2 * b for b in beta)
        if point in p.terms:
            keep.append(beta)
            continue
        c = _separating_direction(point, support)
        if c is None:
            keep.append(beta)
        else:
            excluded[beta] = c
    return MonomialBasis(p.n_vars, m // 2, tuple(keep), excluded)


def basis_for(p: Form, kind: str = "newton") -> MonomialBasis:
    if p.degree is not None and p.degree % 2:
        raise FormError(f"odd degree {p.degree}: a sum of squares has even degree")
    if kind == "full":
        return full_basis(p.n_vars, p.degree // 2)
    if kind == "newton":
        return half_newton_basis(p)
    raise ValueError(f"unknown basis kind {kind!r}")
