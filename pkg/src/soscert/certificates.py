"""Certificate and verdict types with exact verification and JSON round-trip."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Optional

from .basis import MonomialBasis, separates
from .exact import is_psd, ldl_terms
from .forms import Exponent, Form, monomials_of_degree

FEASIBLE = "Feasible"
INFEASIBLE = "Infeasible"
UNDECIDED = "Undecided"

SCHEMA_VERSION = 1


@dataclass(frozen=True)
class GramCertificate:
    """``p = z^T G z`` with ``G`` exactly PSD and ``z`` the basis monomials."""

    basis: MonomialBasis
    gram: tuple[tuple[Fraction, ...], ...]

    def expand(self) -> Form:
        return gram_expansion(self.basis, self.gram)


@dataclass(frozen=True)
class DualCertificate:
    """Linear functional on degree-m forms, non-negative on squares over ``basis``.

    ``exclusions`` maps every degree m/2 monomial left out of ``basis`` to an
    integer direction separating its double from the Newton polytope of the
    target, so the certificate rules out squares over any basis.
    """

    basis: MonomialBasis
    functional: dict
    exclusions: dict = field(default_factory=dict)

    def value(self, p: Form) -> Fraction:
        return sum((c * self.functional.get(e, Fraction(0)) for e, c in p.items()), Fraction(0))

    def moment_matrix(self) -> list[list[Fraction]]:
        mons = self.basis.monomials
        return [[self.functional.get(tuple(a + b for a, b in zip(u, v)), Fraction(0)) for v in mons]
                for u in mons]


@dataclass
class SosVerdict:
    status: str
    certificate: Optional[GramCertificate] = None
    dual: Optional[DualCertificate] = None
    diagnostics: dict = field(default_factory=dict)

    @property
    def feasible(self) -> bool:
        return self.status == FEASIBLE

    @property
    def infeasible(self) -> bool:
        return self.status == INFEASIBLE


def gram_expansion(basis: MonomialBasis, gram) -> Form:
    mons = basis.monomials
    out: dict[Exponent, Fraction] = {}
    for i, u in enumerate(mons):
        for j, v in enumerate(mons):
            g = gram[i][j]
            if g:
                e = tuple(a + b for a, b in zip(u, v))
                out[e] = out.get(e, 0) + g
    return Form(basis.n_vars, out)


def verify_gram_exact(p: Form, cert: GramCertificate) -> bool:
    g = cert.gram
    n = len(cert.basis)
    if len(g) != n or any(len(row) != n for row in g):
        return False
    if any(g[i][j] != g[j][i] for i in range(n) for j in range(i)):
        return False
    if n == 0:
        return p.is_zero()
    if cert.basis.n_vars != p.n_vars:
        return False
    if gram_expansion(cert.basis, g) != p:
        return False
    return is_psd(g)


def verify_dual_exact(p: Form, dual: DualCertificate) -> bool:
    basis = dual.basis
    if p.is_zero() or p.degree % 2 or basis.n_vars != p.n_vars or basis.half_degree * 2 != p.degree:
        return False
    present = set(basis.monomials)
    support = p.support()
    for beta in monomials_of_degree(p.n_vars, basis.half_degree):
        if beta in present:
            continue
        c = dual.exclusions.get(beta)
        if c is None or not separates(c, tuple(2 * b for b in beta), support):
            return False
    if dual.value(p) >= 0:
        return False
    return is_psd(dual.moment_matrix())


def extract_squares(cert: GramCertificate) -> list[tuple[Fraction, Form]]:
    """Weighted squares ``[(w_k, g_k)]`` with ``sum w_k g_k^2`` equal to the certified form."""
    if not is_psd(cert.gram):
        raise ValueError("certificate Gram matrix is not PSD")
    mons = cert.basis.monomials
    out = []
    for w, col in ldl_terms(cert.gram):
        g = Form(cert.basis.n_vars, {m: c for m, c in zip(mons, col) if c})
        out.append((w, g))
    return out


# -- JSON --------------------------------------------------------------------

def _q(v: Fraction) -> list[str]:
    v = Fraction(v)
    return [str(v.numerator), str(v.denominator)]


def _unq(pair) -> Fraction:
    return Fraction(int(pair[0]), int(pair[1]))


def form_to_json(p: Form) -> dict:
    return {"n_vars": p.n_vars, "terms": [[list(e), _q(c)] for e, c in p.items()]}


def form_from_json(obj: dict) -> Form:
    return Form(int(obj["n_vars"]), {tuple(e): _unq(c) for e, c in obj["terms"]})


def _basis_json(b: MonomialBasis) -> dict:
    return {"n_vars": b.n_vars, "half_degree": b.half_degree, "monomials": [list(m) for m in b.monomials]}


def certificate_to_json(cert, target: Form | None = None) -> dict:
    out: dict = {"schema": SCHEMA_VERSION}
    if target is not None:
        out["form"] = form_to_json(target)
    if isinstance(cert, GramCertificate):
        out["kind"] = "gram"
        out["basis"] = [list(m) for m in cert.basis.monomials]
        out["n_vars"] = cert.basis.n_vars
        out["half_degree"] = cert.basis.half_degree
        out["gram"] = [[_q(v) for v in row] for row in cert.gram]
    elif isinstance(cert, DualCertificate):
        out["kind"] = "dual"
        out["basis"] = [list(m) for m in cert.basis.monomials]
        out["n_vars"] = cert.basis.n_vars
        out["half_degree"] = cert.basis.half_degree
        out["functional"] = [[list(e), _q(v)] for e, v in sorted(cert.functional.items()) if v]
        out["exclusions"] = [[list(b), list(c)] for b, c in sorted(cert.exclusions.items())]
    else:
        raise TypeError(f"not a certificate: {type(cert).__name__}")
    return out


def certificate_from_json(obj: dict):
    basis = MonomialBasis(int(obj["n_vars"]), int(obj["half_degree"]), tuple(tuple(m) for m in obj["basis"]))
    order = [basis.monomials.index(tuple(m)) for m in obj["basis"]]
    if obj["kind"] == "gram":
        raw = [[_unq(v) for v in row] for row in obj["gram"]]
        # rows in file order; re-sort into the basis' graded-lex order
        n = len(order)
        gram = [[Fraction(0)] * n for _ in range(n)]
        for a, i in enumerate(order):
            for b, j in enumerate(order):
                gram[i][j] = raw[a][b]
        return GramCertificate(basis, tuple(tuple(r) for r in gram))
    if obj["kind"] == "dual":
        functional = {tuple(e): _unq(v) for e, v in obj["functional"]}
        exclusions = {tuple(b): tuple(int(x) for x in c) for b, c in obj.get("exclusions", [])}
        return DualCertificate(basis, functional, exclusions)
    raise ValueError(f"unknown certificate kind {obj.get('kind')!r}")


def save_certificate(path, cert, target: Form | None = None) -> Path:
    path = Path(path)
    path.write_text(json.dumps(certificate_to_json(cert, target), indent=1))
    return path


def load_certificate(path):
    obj = json.loads(Path(path).read_text())
    target = form_from_json(obj["form"]) if "form" in obj else None
    return certificate_from_json(obj), target
