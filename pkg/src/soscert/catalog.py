"""Named forms and classical identities.

The three ternary sextics of Motzkin, Robinson and Choi-Lam are psd but not
sums of squares, each vanishing at (1, 1, 1).  Stengle's sextic has the same
status, and so do all its odd powers.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

from .facial import Arc, _series_mul
from .forms import Form, FormError, add, mul, parse_form, substitute_permutation

PSD_NOT_SOS = "psd_not_sos"
SOS = "sos"
PSD = "psd"


@dataclass(frozen=True)
class NamedForm:
    key: str
    form: Form
    provenance: str
    known_status: str
    citation: str


def motzkin() -> Form:
    return parse_form("x^4*y^2 + x^2*y^4 + z^6 - 3*x^2*y^2*z^2", 3)


def robinson() -> Form:
    return parse_form("x^6 + y^6 + z^6 - x^4*y^2 - x^2*y^4 - x^4*z^2 - x^2*z^4 - y^4*z^2 - y^2*z^4"
                      " + 3*x^2*y^2*z^2", 3)


def choi_lam() -> Form:
    return parse_form("x^4*y^2 + y^4*z^2 + z^4*x^2 - 3*x^2*y^2*z^2", 3)


def swap_yz(p: Form) -> Form:
    return substitute_permutation(p, (0, 2, 1))


def stengle() -> Form:
    """x^3 z^3 + (y^2 z - x^3 - z^2 x)^2, stored expanded."""
    return parse_form("x^6 + 2*x^4*z^2 - 2*x^3*y^2*z + x^3*z^3 + x^2*z^4 - 2*x*y^2*z^3 + y^4*z^2", 3)


def stengle_curve() -> Form:
    """The cubic y^2 z - x^3 - z^2 x whose square appears in Stengle's form."""
    return parse_form("y^2*z - x^3 - x*z^2", 3)


def stengle_arcs(order: int = 40) -> tuple[Arc, Arc]:
    """Truncated branches of the cubic through the real zeros of Stengle's form.

    At (0, 0, 1) the branch is s -> (x(s), s, 1) with x = s^2 - x^3, at
    (0, 1, 0) it is s -> (s, 1, z(s)) with z = s^3 + s z^2.  Both series have
    integer coefficients and are computed by fixed-point iteration.
    """
    x = [Fraction(0)] * (order + 1)
    z = [Fraction(0)] * (order + 1)
    for _ in range(order + 1):
        cube = _series_mul(_series_mul(x, x, order), x, order)
        x = [Fraction(int(k == 2)) - c for k, c in enumerate(cube)]
        sq = _series_mul(z, z, order)
        z = [Fraction(int(k == 3)) + (sq[k - 1] if k else 0) for k in range(order + 1)]
    one, ident = (Fraction(1),), (Fraction(0), Fraction(1))
    return Arc((tuple(x), ident, one)), Arc((ident, one, tuple(z)))


def hilbert_degree_bound(m: int) -> int:
    """floor((m - 2)^2 / 8): degree of a ternary multiplier q with q^2 p a sum of four squares."""
    if m < 4 or m % 2:
        raise ValueError(f"m must be even and at least 4, got {m}")
    return (m - 2) ** 2 // 8


def four_square_compose(a: Sequence[Form], b: Sequence[Form]) -> tuple[Form, Form, Form, Form]:
    """Euler's four-square identity as a quaternion product.

    c1 = a1 b1 - a2 b2 - a3 b3 - a4 b4
    c2 = a1 b2 + a2 b1 + a3 b4 - a4 b3
    c3 = a1 b3 - a2 b4 + a3 b1 + a4 b2
    c4 = a1 b4 + a2 b3 - a3 b2 + a4 b1
    """
    if len(a) != 4 or len(b) != 4:
        raise FormError("four_square_compose needs four forms on each side")
    n = a[0].n_vars
    for f in (*a, *b):
        if f.n_vars != n:
            raise FormError("dimension mismatch among the composed forms")
    for side in (a, b):
        degs = {f.degree for f in side if not f.is_zero()}
        if len(degs) > 1:
            raise FormError(f"degree mismatch within a quadruple: {sorted(degs)}")
    a1, a2, a3, a4 = a
    b1, b2, b3, b4 = b

    def comb(*terms):
        out = Form(n)
        for sign, x, y in terms:
            t = mul(x, y)
            out = add(out, t if sign > 0 else -t)
        return out

    return (
        comb((1, a1, b1), (-1, a2, b2), (-1, a3, b3), (-1, a4, b4)),
        comb((1, a1, b2), (1, a2, b1), (1, a3, b4), (-1, a4, b3)),
        comb((1, a1, b3), (-1, a2, b4), (1, a3, b1), (1, a4, b2)),
        comb((1, a1, b4), (1, a2, b3), (-1, a3, b2), (1, a4, b1)),
    )


def sum_of_squares(forms: Sequence[Form]) -> Form:
    out = Form(forms[0].n_vars)
    for f in forms:
        out = add(out, mul(f, f))
    return out


def _entries() -> dict[str, NamedForm]:
    s = choi_lam()
    return {
        "M": NamedForm("M", motzkin(), "Motzkin's sextic", PSD_NOT_SOS, "Motzkin (1967)"),
        "R": NamedForm("R", robinson(), "Robinson's simplification of Hilbert's construction",
                       PSD_NOT_SOS, "Robinson (1973)"),
        "S": NamedForm("S", s, "Choi-Lam sextic", PSD_NOT_SOS, "Choi and Lam (1977)"),
        "stengle": NamedForm("stengle", stengle(), "Stengle's sextic x^3 z^3 + (y^2 z - x^3 - z^2 x)^2",
                             PSD_NOT_SOS, "Stengle (1979)"),
        "S_swap": NamedForm("S_swap", swap_yz(s), "Choi-Lam sextic with y and z exchanged",
                            PSD_NOT_SOS, "Choi and Lam (1977)"),
        "S_product": NamedForm("S_product", mul(s, swap_yz(s)), "S(x,y,z) S(x,z,y)", SOS,
                               "Choi and Lam (1977)"),
    }


CATALOG: dict[str, NamedForm] = _entries()
ALIASES = {"motzkin": "M", "robinson": "R", "choi_lam": "S", "choi-lam": "S"}


def get(key: str) -> NamedForm:
    k = ALIASES.get(key.lower(), key) if key not in CATALOG else key
    if k not in CATALOG:
        raise KeyError(f"unknown form key {key!r}; known: {', '.join(sorted(CATALOG))}")
    return CATALOG[k]
