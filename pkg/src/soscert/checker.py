"""Stand-alone re-verification of certificate JSON files.

Deliberately shares no code with the rest of the package: it re-expands the
Gram product from the raw JSON, re-derives the moment matrix, and decides
semidefiniteness with plain rational Gaussian elimination (diagonal pivots
in natural order, with the zero-pivot rule for semidefinite matrices)
instead of the fraction-free elimination used by the engine.  Only the
standard library is used.

    python -m soscert.checker cert1.json [cert2.json ...]
"""

from __future__ import annotations

import json
import sys
from fractions import Fraction
from itertools import combinations_with_replacement
from pathlib import Path


def _q(pair) -> Fraction:
    num, den = pair
    den = int(den)
    if den <= 0:
        raise ValueError("denominators must be positive")
    return Fraction(int(num), den)


def _form(obj) -> tuple[int, dict]:
    n = int(obj["n_vars"])
    terms: dict = {}
    for e, c in obj["terms"]:
        e = tuple(int(k) for k in e)
        if len(e) != n or min(e, default=0) < 0:
            raise ValueError("bad exponent in target form")
        terms[e] = terms.get(e, Fraction(0)) + _q(c)
    return n, {e: c for e, c in terms.items() if c}


def semidefinite(a: list[list[Fraction]]) -> bool:
    """Symmetric Gaussian elimination in natural pivot order.

    A zero pivot is acceptable only when its whole remaining row is zero;
    a negative pivot means an indefinite matrix.
    """
    n = len(a)
    m = [list(row) for row in a]
    for i in range(n):
        for j in range(n):
            if m[i][j] != m[j][i]:
                return False
    for k in range(n):
        piv = m[k][k]
        if piv < 0:
            return False
        if piv == 0:
            if any(m[k][j] != 0 for j in range(k, n)):
                return False
            continue
        for i in range(k + 1, n):
            f = m[i][k] / piv
            if f:
                for j in range(k, n):
                    m[i][j] -= f * m[k][j]
    return True


def _monomials(n: int, d: int):
    out = set()
    for combo in combinations_with_replacement(range(n), d):
        e = [0] * n
        for i in combo:
            e[i] += 1
        out.add(tuple(e))
    return out


def check_gram(obj: dict) -> tuple[bool, str]:
    n, target = _form(obj["form"])
    basis = [tuple(int(k) for k in m) for m in obj["basis"]]
    half = int(obj["half_degree"])
    if len(set(basis)) != len(basis) or any(len(m) != n or sum(m) != half for m in basis):
        return False, "malformed basis"
    g = [[_q(v) for v in row] for row in obj["gram"]]
    if len(g) != len(basis) or any(len(r) != len(basis) for r in g):
        return False, "Gram matrix has the wrong shape"
    expanded: dict = {}
    for i, u in enumerate(basis):
        for j, v in enumerate(basis):
            if g[i][j]:
                e = tuple(a + b for a, b in zip(u, v))
                expanded[e] = expanded.get(e, Fraction(0)) + g[i][j]
    expanded = {e: c for e, c in expanded.items() if c}
    if expanded != target:
        return False, "z^T G z does not reproduce the form"
    if not semidefinite(g):
        return False, "Gram matrix is not PSD"
    return True, "ok"


def check_dual(obj: dict) -> tuple[bool, str]:
    n, target = _form(obj["form"])
    if not target:
        return False, "zero form cannot be separated"
    degree = sum(next(iter(target)))
    half = int(obj["half_degree"])
    if 2 * half != degree:
        return False, "basis degree is not half the form degree"
    basis = [tuple(int(k) for k in m) for m in obj["basis"]]
    if len(set(basis)) != len(basis) or any(len(m) != n or sum(m) != half for m in basis):
        return False, "malformed basis"
    y = {tuple(int(k) for k in e): _q(v) for e, v in obj["functional"]}
    excl = {tuple(int(k) for k in b): [int(c) for c in d] for b, d in obj.get("exclusions", [])}
    support = list(target)
    for beta in _monomials(n, half) - set(basis):
        d = excl.get(beta)
        if d is None or len(d) != n:
            return False, f"no separating direction for excluded monomial {beta}"
        top = sum(c * 2 * b for c, b in zip(d, beta))
        if not all(top > sum(c * a for c, a in zip(d, alpha)) for alpha in support):
            return False, f"direction {d} does not separate {beta}"
    value = sum(c * y.get(e, Fraction(0)) for e, c in target.items())
    if value >= 0:
        return False, "functional is not negative on the form"
    moment = [[y.get(tuple(a + b for a, b in zip(u, v)), Fraction(0)) for v in basis] for u in basis]
    if not semidefinite(moment):
        return False, "moment matrix is not PSD"
    return True, "ok"


def check_certificate_json(obj: dict) -> tuple[bool, str]:
    try:
        if "form" not in obj:
            return False, "certificate does not name its form"
        kind = obj.get("kind")
        if kind == "gram":
            return check_gram(obj)
        if kind == "dual":
            return check_dual(obj)
        return False, f"unknown certificate kind {kind!r}"
    except (KeyError, TypeError, ValueError) as exc:
        return False, f"malformed certificate: {exc}"


def check_file(path) -> tuple[bool, str]:
    try:
        obj = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        return False, f"unreadable: {exc}"
    return check_certificate_json(obj)


def main(argv=None) -> int:
    paths = sys.argv[1:] if argv is None else argv
    if not paths:
        print("usage: python -m soscert.checker CERT.json [...]", file=sys.stderr)
        return 2
    bad = 0
    for p in paths:
        ok, why = check_file(p)
        print(f"{'PASS' if ok else 'FAIL'}  {p}  {why}")
        bad += not ok
    return 1 if bad else 0


if __name__ == "__main__":
    sys.exit(main())
