"""Exact rational linear algebra used by the certificate pipeline."""

from __future__ import annotations

from fractions import Fraction
from math import lcm
from typing import Sequence

Matrix = list[list[Fraction]]


def to_fraction_matrix(rows: Sequence[Sequence]) -> Matrix:
    return [[v if isinstance(v, Fraction) else Fraction(v) for v in row] for row in rows]


def clear_denominators(rows: Sequence[Sequence[Fraction]]) -> list[list[int]]:
    """Scale a rational matrix by the positive lcm of its denominators."""
    den = 1
    for row in rows:
        for v in row:
            den = lcm(den, Fraction(v).denominator)
    return [[int(Fraction(v) * den) for v in row] for row in rows]


def is_psd(rows: Sequence[Sequence], strict: bool = False) -> bool:
    """Exact PSD test (PD with ``strict``) by fraction-free symmetric elimination.

    Pivots are chosen as the largest remaining diagonal entry.  Entries of the
    working matrix are the Bareiss minors, so their signs equal those of the
    Schur complement as long as every earlier pivot is positive.  Once the
    remaining diagonal is all zero the remaining block must vanish entirely.
    """
    n = len(rows)
    if n == 0:
        return True
    if any(len(r) != n for r in rows):
        raise ValueError("matrix is not square")
    a = clear_denominators(rows)
    for i in range(n):
        for j in range(i):
            if a[i][j] != a[j][i]:
                return False
    active = list(range(n))
    prev = 1
    while active:
        k = max(active, key=lambda i: a[i][i])
        pivot = a[k][k]
        if pivot < 0:
            return False
        if pivot == 0:
            return not strict and all(a[i][j] == 0 for i in active for j in active)
        active.remove(k)
        for pos, i in enumerate(active):
            aik = a[i][k]
            for j in active[pos:]:
                q, r = divmod(pivot * a[i][j] - aik * a[k][j], prev)
                assert r == 0, "Bareiss division must be exact"
                a[i][j] = q
                a[j][i] = q
        prev = pivot
        if any(a[i][i] < 0 for i in active):
            return False
    return True


def ldl_terms(rows: Sequence[Sequence]) -> list[tuple[Fraction, list[Fraction]]]:
    """Decompose a PSD rational matrix as a sum of weighted rank-one terms.

    Returns ``[(d_k, l_k), ...]`` with ``G = sum d_k l_k l_k^T`` and every
    ``d_k > 0``.  Raises ValueError if the matrix is not PSD.
    """
    a = to_fraction_matrix(rows)
    n = len(a)
    active = list(range(n))
    out = []
    while active:
        k = max(active, key=lambda i: a[i][i])
        d = a[k][k]
        if d < 0:
            raise ValueError("negative pivot: matrix is not PSD")
        if d == 0:
            if any(a[i][j] != 0 for i in active for j in active):
                raise ValueError("zero pivot with non-zero row: matrix is not PSD")
            break
        col = [Fraction(0)] * n
        for i in active:
            col[i] = a[i][k] / d
        out.append((d, col))
        active.remove(k)
        for i in active:
            if col[i] == 0:
                continue
            f = a[i][k]
            for j in active:
                a[i][j] -= f * col[j]
    return out


def rref(rows: Sequence[Sequence[Fraction]], ncols: int | None = None):
    """Reduced row echelon form; returns (matrix, pivot column list)."""
    a = [list(r) for r in rows]
    if ncols is None:
        ncols = len(a[0]) if a else 0
    pivots = []
    r = 0
    for c in range(ncols):
        if r >= len(a):
            break
        piv = next((i for i in range(r, len(a)) if a[i][c] != 0), None)
        if piv is None:
            continue
        a[r], a[piv] = a[piv], a[r]
        pv = a[r][c]
        if pv != 1:
            a[r] = [v / pv for v in a[r]]
        prow = a[r]
        nz = [j for j in range(c, len(prow)) if prow[j] != 0]
        for i in range(len(a)):
            if i != r and a[i][c] != 0:
                f = a[i][c]
                row = a[i]
                for j in nz:
                    row[j] -= f * prow[j]
        pivots.append(c)
        r += 1
    return a[:r], pivots


def solve_affine(rows: Sequence[Sequence[Fraction]], rhs: Sequence[Fraction]):
    """Solve A x = b exactly.

    Returns ``(particular, null_basis)`` where every solution is
    ``particular + sum c_i null_basis[i]``, or ``None`` when inconsistent.
    """
    ncols = len(rows[0]) if rows else 0
    aug = [list(r) + [Fraction(b)] for r, b in zip(rows, rhs)]
    red, pivots = rref(aug, ncols + 1)
    if pivots and pivots[-1] == ncols:
        return None
    x = [Fraction(0)] * ncols
    for row, c in zip(red, pivots):
        x[c] = row[ncols]
    free = [c for c in range(ncols) if c not in set(pivots)]
    basis = []
    for f in free:
        v = [Fraction(0)] * ncols
        v[f] = Fraction(1)
        for row, c in zip(red, pivots):
            v[c] = -row[f]
        basis.append(v)
    return x, basis


def nullspace(rows: Sequence[Sequence[Fraction]], ncols: int) -> list[list[Fraction]]:
    if not rows:
        return [[Fraction(int(i == j)) for j in range(ncols)] for i in range(ncols)]
    sol = solve_affine(rows, [Fraction(0)] * len(rows))
    return sol[1]


def matmul(a: Matrix, b: Matrix) -> Matrix:
    bt = list(zip(*b))
    return [[sum((x * y for x, y in zip(row, col)), Fraction(0)) for col in bt] for row in a]


def transpose(a: Matrix) -> Matrix:
    return [list(r) for r in zip(*a)]
