"""Exact sparse homogeneous forms over the rationals."""

from __future__ import annotations

import math
import re
from fractions import Fraction
from itertools import combinations_with_replacement
from typing import Mapping, Sequence, Union

Exponent = tuple[int, ...]
RationalLike = Union[int, Fraction, str]

ZERO_DEGREE = None
"""Degree marker carried by the zero form."""


class FormError(ValueError):
    """Raised for malformed forms or invalid form operations."""


class FormSyntaxError(FormError):
    def __init__(self, message: str, position: int):
        super().__init__(f"{message} at position {position}")
        self.position = position


def grlex_key(e: Exponent) -> tuple:
    """Sort key placing higher graded-lex monomials first."""
    return (-sum(e), tuple(-k for k in e))


def monomials_of_degree(n: int, d: int) -> list[Exponent]:
    """All exponent vectors of length n summing to d, in graded-lex order."""
    out = []
    for combo in combinations_with_replacement(range(n), d):
        e = [0] * n
        for i in combo:
            e[i] += 1
        out.append(tuple(e))
    return sorted(out, key=grlex_key)


def dimension_of_space(n: int, d: int) -> int:
    """Number of monomials of degree d in n variables."""
    if n < 1 or d < 0:
        raise FormError("need n >= 1 and d >= 0")
    return math.comb(n + d - 1, n - 1)


def _frac(c: RationalLike) -> Fraction:
    return c if isinstance(c, Fraction) else Fraction(c)


class Form:
    """Immutable homogeneous polynomial with rational coefficients.

    ``terms`` maps exponent tuples to non-zero Fractions.
    """

    __slots__ = ("n_vars", "_terms", "_degree", "_hash")

    def __init__(self, n_vars: int, terms: Mapping[Exponent, RationalLike] | None = None):
        if n_vars < 1:
            raise FormError("n_vars must be >= 1")
        clean: dict[Exponent, Fraction] = {}
        degree = ZERO_DEGREE
        for e, c in (terms or {}).items():
            e = tuple(int(k) for k in e)
            if len(e) != n_vars or any(k < 0 for k in e):
                raise FormError(f"bad exponent vector {e} for {n_vars} variables")
            c = _frac(c)
            if c == 0:
                continue
            if degree is None:
                degree = sum(e)
            elif sum(e) != degree:
                raise FormError("form is not homogeneous")
            clean[e] = clean.get(e, 0) + c
        self.n_vars = n_vars
        self._terms = {e: clean[e] for e in sorted(clean, key=grlex_key) if clean[e] != 0}
        self._degree = degree if self._terms else ZERO_DEGREE
        self._hash = None

    @classmethod
    def _trusted(cls, n_vars: int, terms: dict[Exponent, Fraction]) -> "Form":
        f = cls.__new__(cls)
        f.n_vars = n_vars
        f._terms = {e: terms[e] for e in sorted(terms, key=grlex_key) if terms[e] != 0}
        f._degree = sum(next(iter(f._terms))) if f._terms else ZERO_DEGREE
        f._hash = None
        return f

    @classmethod
    def monomial(cls, exponent: Sequence[int], coeff: RationalLike = 1) -> "Form":
        return cls(len(exponent), {tuple(exponent): coeff})

    @classmethod
    def variable(cls, i: int, n_vars: int) -> "Form":
        e = [0] * n_vars
        e[i] = 1
        return cls.monomial(e)

    @classmethod
    def constant(cls, c: RationalLike, n_vars: int) -> "Form":
        return cls(n_vars, {(0,) * n_vars: c})

    @classmethod
    def linear(cls, coeffs: Sequence[RationalLike]) -> "Form":
        n = len(coeffs)
        return cls(n, {tuple(int(i == j) for j in range(n)): c for i, c in enumerate(coeffs)})

    # -- accessors ---------------------------------------------------------
    @property
    def terms(self) -> dict[Exponent, Fraction]:
        return dict(self._terms)

    @property
    def degree(self):
        """Total degree, or ``ZERO_DEGREE`` (None) for the zero form."""
        return self._degree

    def is_zero(self) -> bool:
        return not self._terms

    def support(self) -> list[Exponent]:
        return list(self._terms)

    def coeff(self, e: Exponent) -> Fraction:
        return self._terms.get(tuple(e), Fraction(0))

    def items(self):
        return self._terms.items()

    def __len__(self) -> int:
        return len(self._terms)

    def __eq__(self, other) -> bool:
        if not isinstance(other, Form):
            return NotImplemented
        return self.n_vars == other.n_vars and self._terms == other._terms

    def __hash__(self) -> int:
        if self._hash is None:
            self._hash = hash((self.n_vars, tuple(self._terms.items())))
        return self._hash

    def __repr__(self) -> str:
        return f"Form({self.n_vars}, {format_form(self)!r})"

    def __str__(self) -> str:
        return format_form(self)

    # -- arithmetic ----------------------------------------------------------
    def _check_vars(self, other: "Form") -> None:
        if self.n_vars != other.n_vars:
            raise FormError(f"dimension mismatch: {self.n_vars} vs {other.n_vars} variables")

    def __add__(self, other: "Form") -> "Form":
        return add(self, other)

    def __sub__(self, other: "Form") -> "Form":
        return add(self, -other)

    def __neg__(self) -> "Form":
        return Form._trusted(self.n_vars, {e: -c for e, c in self._terms.items()})

    def __mul__(self, other) -> "Form":
        if isinstance(other, Form):
            return mul(self, other)
        c = _frac(other)
        return Form._trusted(self.n_vars, {e: c * v for e, v in self._terms.items()})

    __rmul__ = __mul__

    def __pow__(self, k: int) -> "Form":
        return power(self, k)

    def __call__(self, *point) -> Fraction:
        if len(point) == 1 and isinstance(point[0], (list, tuple)):
            point = point[0]
        return evaluate(self, point)


def add(p: Form, q: Form) -> Form:
    p._check_vars(q)
    if p.is_zero():
        return q
    if q.is_zero():
        return p
    if p.degree != q.degree:
        raise FormError(f"degree mismatch: {p.degree} vs {q.degree}")
    out = dict(p._terms)
    for e, c in q._terms.items():
        out[e] = out.get(e, 0) + c
    return Form._trusted(p.n_vars, out)


def mul(p: Form, q: Form) -> Form:
    p._check_vars(q)
    out: dict[Exponent, Fraction] = {}
    for e1, c1 in p._terms.items():
        for e2, c2 in q._terms.items():
            e = tuple(a + b for a, b in zip(e1, e2))
            out[e] = out.get(e, 0) + c1 * c2
    return Form._trusted(p.n_vars, out)


def power(p: Form, k: int) -> Form:
    if k < 0:
        raise FormError("negative exponent")
    result = Form.constant(1, p.n_vars)
    base = p
    while k:
        if k & 1:
            result = mul(result, base)
        k >>= 1
        if k:
            base = mul(base, base)
    return result


def evaluate(p: Form, point: Sequence[RationalLike]) -> Fraction:
    if len(point) != p.n_vars:
        raise FormError(f"point has {len(point)} coordinates, form has {p.n_vars} variables")
    pt = [_frac(v) for v in point]
    total = Fraction(0)
    for e, c in p._terms.items():
        term = c
        for v, k in zip(pt, e):
            if k:
                term *= v**k
        total += term
    return total


def evaluate_float(p: Form, point: Sequence[float]) -> float:
    total = 0.0
    for e, c in p._terms.items():
        term = float(c)
        for v, k in zip(point, e):
            if k:
                term *= v**k
        total += term
    return total


def scale_variables(p: Form, scales: Sequence[RationalLike]) -> Form:
    """Return p(s1*x1, ..., sn*xn)."""
    if len(scales) != p.n_vars:
        raise FormError("scales length does not match n_vars")
    s = [_frac(v) for v in scales]
    if any(v == 0 for v in s):
        raise FormError("zero scale entry")
    out = {}
    for e, c in p._terms.items():
        f = c
        for v, k in zip(s, e):
            if k:
                f *= v**k
        out[e] = f
    return Form._trusted(p.n_vars, out)


def determinant(matrix: Sequence[Sequence[RationalLike]]) -> Fraction:
    a = [[_frac(v) for v in row] for row in matrix]
    n = len(a)
    det = Fraction(1)
    for k in range(n):
        piv = next((i for i in range(k, n) if a[i][k] != 0), None)
        if piv is None:
            return Fraction(0)
        if piv != k:
            a[k], a[piv] = a[piv], a[k]
            det = -det
        det *= a[k][k]
        for i in range(k + 1, n):
            if a[i][k]:
                f = a[i][k] / a[k][k]
                for j in range(k, n):
                    a[i][j] -= f * a[k][j]
    return det


def linear_change(p: Form, matrix: Sequence[Sequence[RationalLike]]) -> Form:
    """Return p(A x) for an invertible n x n rational matrix A."""
    n = p.n_vars
    if len(matrix) != n or any(len(row) != n for row in matrix):
        raise FormError(f"matrix must be {n}x{n}")
    if determinant(matrix) == 0:
        raise FormError("singular matrix")
    images = [Form.linear(list(row)) for row in matrix]
    if p.is_zero():
        return p
    out = Form(n)
    cache: dict[tuple[int, int], Form] = {}

    def img_pow(i: int, k: int) -> Form:
        if (i, k) not in cache:
            cache[(i, k)] = power(images[i], k)
        return cache[(i, k)]

    for e, c in p._terms.items():
        term = Form.constant(c, n)
        for i, k in enumerate(e):
            if k:
                term = mul(term, img_pow(i, k))
        out = add(out, term)
    return out


def divide_exact(p: Form, d: Form) -> Form:
    """Exact division p / d; raises FormError with the remainder's lead term otherwise."""
    p._check_vars(d)
    if d.is_zero():
        raise FormError("division by zero form")
    if p.is_zero():
        return p
    lead_e, lead_c = next(iter(d._terms.items()))
    rem = dict(p._terms)
    quot: dict[Exponent, Fraction] = {}
    while rem:
        e = min(rem, key=grlex_key)
        c = rem[e]
        shift = tuple(a - b for a, b in zip(e, lead_e))
        if any(k < 0 for k in shift):
            raise FormError(f"not divisible: remainder has leading term {_fmt_term(c, e, _names(p.n_vars))}")
        q = c / lead_c
        quot[shift] = q
        for de, dc in d._terms.items():
            t = tuple(a + b for a, b in zip(shift, de))
            v = rem.get(t, 0) - q * dc
            if v:
                rem[t] = v
            else:
                rem.pop(t, None)
    return Form._trusted(p.n_vars, quot)


def divide_by_linear_square(p: Form, ell: Form) -> Form:
    if ell.is_zero() or ell.degree != 1:
        raise FormError("divisor must be a non-zero linear form")
    return divide_exact(p, mul(ell, ell))


def divides(d: Form, p: Form) -> bool:
    try:
        divide_exact(p, d)
    except FormError:
        return False
    return True


def square_root(p: Form) -> Form | None:
    """Form r with r^2 = p exactly and positive lowest coefficient, or None."""
    if p.is_zero():
        return p
    if p.degree % 2:
        return None
    low_e, low_c = next(iter(p._terms.items()))
    if low_c < 0 or any(k % 2 for k in low_e):
        return None
    num, den = low_c.numerator, low_c.denominator
    rn, rd = math.isqrt(num), math.isqrt(den)
    if rn * rn != num or rd * rd != den:
        return None
    root = {tuple(k // 2 for k in low_e): Fraction(rn, rd)}
    base_e, base_c = next(iter(root.items()))
    bound = dimension_of_space(p.n_vars, p.degree // 2)
    for _ in range(bound):
        r = Form._trusted(p.n_vars, dict(root))
        rem = add(p, -mul(r, r))
        if rem.is_zero():
            return r
        e, c = next(iter(rem._terms.items()))
        shift = tuple(a - b for a, b in zip(e, base_e))
        if any(k < 0 for k in shift) or shift in root:
            return None
        root[shift] = c / (2 * base_c)
    return None


def is_even_form(p: Form) -> bool:
    return all(k % 2 == 0 for e in p._terms for k in e)


def substitute_permutation(p: Form, perm: Sequence[int]) -> Form:
    """Return p with variable perm[i] put in slot i, e.g. (0, 2, 1) gives p(x, z, y)."""
    out = {}
    for e, c in p._terms.items():
        new = [0] * p.n_vars
        for i, src in enumerate(perm):
            new[src] = e[i]
        out[tuple(new)] = c
    return Form._trusted(p.n_vars, out)


def gradient_float(p: Form):
    """List of callables giving the partial derivatives in floating point."""
    parts = []
    for i in range(p.n_vars):
        terms = []
        for e, c in p._terms.items():
            if e[i]:
                e2 = list(e)
                e2[i] -= 1
                terms.append((float(c) * e[i], tuple(e2)))
        parts.append(terms)
    return parts


# -- text syntax ---------------------------------------------------------------

def _names(n: int) -> list[str]:
    if n <= 3:
        return ["x", "y", "z"][:n]
    return [f"x{i + 1}" for i in range(n)]


def _fmt_monomial(e: Exponent, names: list[str]) -> str:
    parts = []
    for name, k in zip(names, e):
        if k == 1:
            parts.append(name)
        elif k > 1:
            parts.append(f"{name}^{k}")
    return "*".join(parts)


def _fmt_term(c: Fraction, e: Exponent, names: list[str]) -> str:
    mono = _fmt_monomial(e, names)
    if not mono:
        return str(c)
    if c == 1:
        return mono
    if c == -1:
        return "-" + mono
    return f"{c}*{mono}"


def format_form(p: Form) -> str:
    if p.is_zero():
        return "0"
    names = _names(p.n_vars)
    out = ""
    for e, c in p._terms.items():
        mag = _fmt_term(abs(c), e, names)
        if not out:
            out = ("-" if c < 0 else "") + mag
        else:
            out += (" - " if c < 0 else " + ") + mag
    return out


_TOKEN = re.compile(r"\s*(?:(?P<num>\d+(?:/\d+)?)|(?P<var>[A-Za-z]\w*)|(?P<op>[-+*^()]))")


def _tokenize(text: str):
    pos = 0
    tokens = []
    while pos < len(text):
        if text[pos:].strip() == "":
            break
        m = _TOKEN.match(text, pos)
        if not m:
            raise FormSyntaxError(f"unexpected character {text[pos]!r}", pos)
        kind = m.lastgroup
        start = m.start(kind)
        tokens.append((kind, m.group(kind), start))
        pos = m.end()
    tokens.append(("end", "", len(text)))
    return tokens


def _variable_map(n_vars: int) -> dict[str, int]:
    names = {f"x{i + 1}": i for i in range(n_vars)}
    if n_vars <= 3:
        names.update({v: i for i, v in enumerate("xyz"[:n_vars])})
    return names


def parse_form(text: str, n_vars: int) -> Form:
    """Parse ``x^4*y^2 - 3*x^2*y^2*z^2 + 1/2*z^6`` style input.

    Parenthesised sub-expressions with integer powers are accepted, so
    ``(x^2 + y^2)^2`` also parses.
    """
    tokens = _tokenize(text)
    varmap = _variable_map(n_vars)
    pos = 0

    def peek():
        return tokens[pos]

    def take(kind=None, value=None):
        nonlocal pos
        tok = tokens[pos]
        if kind and tok[0] != kind or value and tok[1] != value:
            expected = value or kind
            raise FormSyntaxError(f"expected {expected!r}, found {tok[1] or 'end of input'!r}", tok[2])
        pos += 1
        return tok

    def integer_exponent():
        tok = take("num")
        if "/" in tok[1]:
            raise FormSyntaxError("exponent must be a non-negative integer", tok[2])
        return int(tok[1])

    def atom() -> _Poly:
        tok = peek()
        if tok[0] == "num":
            take()
            base = _Poly.const(Fraction(tok[1]), n_vars)
        elif tok[0] == "var":
            take()
            if tok[1] not in varmap:
                raise FormSyntaxError(f"unknown variable {tok[1]!r}", tok[2])
            e = [0] * n_vars
            e[varmap[tok[1]]] = 1
            base = _Poly({tuple(e): Fraction(1)})
        elif tok[1] == "(":
            take()
            base = expr()
            take("op", ")")
        else:
            raise FormSyntaxError(f"unexpected token {tok[1] or 'end of input'!r}", tok[2])
        if peek()[1] == "^":
            take()
            base = base.pow(integer_exponent())
        return base

    def factor() -> _Poly:
        sign = 1
        while peek()[1] in "+-" and peek()[0] == "op":
            if take()[1] == "-":
                sign = -sign
        f = atom()
        return f if sign > 0 else f.scale(Fraction(-1))

    def term() -> _Poly:
        t = factor()
        while peek()[1] == "*":
            take()
            t = t.mul(factor())
        return t

    def expr() -> _Poly:
        e = term()
        while peek()[0] == "op" and peek()[1] in "+-":
            op = take()[1]
            t = term()
            e = e.add(t if op == "+" else t.scale(Fraction(-1)))
        return e

    result = expr()
    if peek()[0] != "end":
        tok = peek()
        raise FormSyntaxError(f"unexpected token {tok[1]!r}", tok[2])
    degrees = {sum(e) for e in result.terms}
    if len(degrees) > 1:
        raise FormError(f"non-homogeneous input: term degrees {sorted(degrees)}")
    return Form(n_vars, result.terms)


class _Poly:
    """Inhomogeneous scratch polynomial used only while parsing."""

    def __init__(self, terms):
        self.terms = {e: c for e, c in terms.items() if c != 0}

    @classmethod
    def const(cls, c, n):
        return cls({(0,) * n: c})

    def add(self, other):
        out = dict(self.terms)
        for e, c in other.terms.items():
            out[e] = out.get(e, 0) + c
        return _Poly(out)

    def mul(self, other):
        out = {}
        for e1, c1 in self.terms.items():
            for e2, c2 in other.terms.items():
                e = tuple(a + b for a, b in zip(e1, e2))
                out[e] = out.get(e, 0) + c1 * c2
        return _Poly(out)

    def scale(self, c):
        return _Poly({e: c * v for e, v in self.terms.items()})

    def pow(self, k):
        n = len(next(iter(self.terms))) if self.terms else 0
        result = _Poly.const(Fraction(1), n) if n else _Poly({})
        if not self.terms:
            return _Poly({}) if k else result
        for _ in range(k):
            result = result.mul(self)
        return result
