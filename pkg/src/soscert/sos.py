"""Deciding SOS membership with exactly verified certificates.

The numeric side solves a Gram margin problem with the interior-point code
in :mod:`soscert.sdp`.  Nothing is concluded from floats: a feasible answer
is turned into a rational PSD Gram matrix satisfying the coefficient
equations exactly, an infeasible one into a rational moment functional.
When every Gram matrix is singular (forms with real zeros, boundary
cases) the search moves to a smaller face, ``G = W Q W^T``, using kernel
vectors that are either exact (monomial vectors of rational zeros, forced
zero diagonals) or rationalised from the numeric kernel.  A wrong guess
only costs an Undecided verdict because every reduction is re-checked
exactly.
"""

from __future__ import annotations

import itertools
import logging
import time
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np

from .basis import MonomialBasis, basis_for
from .certificates import (FEASIBLE, INFEASIBLE, UNDECIDED, DualCertificate, GramCertificate,
                           SosVerdict, verify_dual_exact, verify_gram_exact)
from .exact import is_psd, nullspace, rref, solve_affine
from .forms import Exponent, Form, FormError, evaluate, grlex_key, square_root
from .facial import certified_reduction
from .sdp import SDPOptions, SDPResult, solve_margin_sdp

logger = logging.getLogger(__name__)

DEFAULT_DENOMINATORS = (2**10, 2**16, 2**24, 2**32)


@dataclass
class SosOptions:
    basis: str = "newton"  # or "full"
    residual_tol: float = 1e-9
    gap_tol: float = 1e-10
    margin_tol: float = 1e-7
    denominators: tuple[int, ...] = DEFAULT_DENOMINATORS
    max_iter: int = 120
    max_reductions: int = 8
    use_symmetry: bool = True
    sample_radius: int = 2
    facial_chain: bool = True
    arcs: tuple = ()  # polynomial arcs (facial.Arc) offered to the exact facial reduction

    def sdp_options(self) -> SDPOptions:
        return SDPOptions(max_iter=self.max_iter, residual_tol=self.residual_tol, gap_tol=self.gap_tol)


@dataclass
class GramSystem:
    """Coefficient equations ``sum_{b_i + b_j = g} G[i, j] = p_g``."""

    target: Form
    basis: MonomialBasis
    monomials: list[Exponent]
    pairs: dict[Exponent, list[tuple[int, int]]]
    rhs: dict[Exponent, Fraction]
    uncovered: list[Exponent] = field(default_factory=list)

    def equations(self) -> list[tuple[Exponent, dict[tuple[int, int], int], Fraction]]:
        """Readable form: off-diagonal entries appear with multiplicity 2."""
        out = []
        for g in self.monomials:
            coeffs = {(i, j): (1 if i == j else 2) for i, j in self.pairs[g]}
            out.append((g, coeffs, self.rhs[g]))
        return out


def gram_system(p: Form, basis: MonomialBasis) -> GramSystem:
    if not p.is_zero() and basis.half_degree * 2 != p.degree:
        raise FormError("basis degree must be half the form degree")
    mons = basis.monomials
    pairs: dict[Exponent, list[tuple[int, int]]] = {}
    for i in range(len(mons)):
        for j in range(i, len(mons)):
            g = tuple(a + b for a, b in zip(mons[i], mons[j]))
            pairs.setdefault(g, []).append((i, j))
    gammas = sorted(pairs, key=grlex_key)
    rhs = {g: p.coeff(g) for g in gammas}
    uncovered = [e for e in p.support() if e not in pairs]
    return GramSystem(p, basis, gammas, pairs, rhs, uncovered)


# -- structure ------------------------------------------------------------------

def sign_flips(p: Form) -> list[tuple[int, ...]]:
    """Non-trivial sign patterns s (as 0/1 vectors) with p(s x) = p(x)."""
    return [s for s in itertools.product((0, 1), repeat=p.n_vars)
            if any(s) and all(sum(a * b for a, b in zip(s, e)) % 2 == 0 for e in p.support())]


def even_character(gamma: Exponent, flips) -> bool:
    return all(sum(a * b for a, b in zip(s, gamma)) % 2 == 0 for s in flips)


def sign_symmetry_blocks(p: Form, basis: MonomialBasis) -> list[list[int]]:
    """Group basis indices by their character under the sign flips fixing p.

    A flip ``s`` fixes p when ``s . alpha`` is even for every exponent of p;
    averaging a Gram matrix over those flips keeps it valid and zeroes all
    entries between monomials of different character.
    """
    flips = sign_flips(p)
    groups: dict[tuple, list[int]] = {}
    for i, beta in enumerate(basis.monomials):
        key = tuple(sum(a * b for a, b in zip(s, beta)) % 2 for s in flips)
        groups.setdefault(key, []).append(i)
    return list(groups.values())


@dataclass
class _Face:
    """Block of basis indices with an exact column basis ``W`` of the allowed range."""

    idx: list[int]
    W: list[list[Fraction]]  # len(idx) x r

    @property
    def rank(self) -> int:
        return len(self.W[0]) if self.W else 0

    def float_W(self) -> np.ndarray:
        if not self.idx or not self.rank:
            return np.zeros((len(self.idx), 0))
        return np.array([[float(v) for v in row] for row in self.W])


def _identity(k: int) -> list[list[Fraction]]:
    return [[Fraction(int(i == j)) for j in range(k)] for i in range(k)]


def _block_pairs(system: GramSystem, faces: list[_Face]):
    """Per face, map gamma -> list of local (a, b) index pairs with a <= b."""
    where = {}
    for f, face in enumerate(faces):
        for a, i in enumerate(face.idx):
            where[i] = (f, a)
    out = [dict() for _ in faces]
    for g in system.monomials:
        for i, j in system.pairs[g]:
            fi, a = where.get(i, (None, None))
            fj, b = where.get(j, (None, None))
            if fi is None or fi != fj:
                continue
            out[fi].setdefault(g, []).append((min(a, b), max(a, b)))
    return out


def _active_gammas(system: GramSystem, bpairs) -> list[Exponent]:
    used = set()
    for d in bpairs:
        used.update(d)
    return [g for g in system.monomials if g in used or system.rhs[g] != 0]


def _numeric_problem(system: GramSystem, faces: list[_Face], bpairs, gammas, scale: float):
    m = len(gammas)
    gidx = {g: k for k, g in enumerate(gammas)}
    A = []
    for face, pairs in zip(faces, bpairs):
        k = len(face.idx)
        E = np.zeros((m, k, k))
        for g, lst in pairs.items():
            for a, b in lst:
                E[gidx[g], a, b] = 1.0
                E[gidx[g], b, a] = 1.0
        Wf = face.float_W()
        A.append(np.einsum("ia,mij,jb->mab", Wf, E, Wf) if face.rank else np.zeros((m, 0, 0)))
    b = np.array([float(system.rhs[g]) / scale for g in gammas])
    d = np.array(sum(np.trace(a, axis1=1, axis2=2) for a in A)) if A else np.zeros(m)
    return A, b, np.atleast_1d(d)


def _exact_face_matrices(system: GramSystem, face: _Face, pairs):
    """gamma -> exact r x r matrix W^T E_gamma W."""
    r = face.rank
    W = face.W
    out = {}
    for g, lst in pairs.items():
        M = [[Fraction(0)] * r for _ in range(r)]
        for a, b in lst:
            wa, wb = W[a], W[b]
            for k in range(r):
                if wa[k] == 0 and wb[k] == 0:
                    continue
                for l in range(r):
                    v = wa[k] * wb[l]
                    if a != b:
                        v += wb[k] * wa[l]
                    if v:
                        M[k][l] += v
        out[g] = M
    return out


@dataclass
class _AffineFace:
    faces: list[_Face]
    offsets: list[int]
    particular: list[Fraction]
    null: list[list[Fraction]]
    nvar: int


def _affine_parametrisation(system: GramSystem, faces: list[_Face], bpairs) -> _AffineFace | None:
    """Exact solution set of the coefficient equations in face coordinates."""
    offsets, nvar = [], 0
    for face in faces:
        offsets.append(nvar)
        r = face.rank
        nvar += r * (r + 1) // 2
    gammas = _active_gammas(system, bpairs)
    rows = {g: [Fraction(0)] * nvar for g in gammas}
    for face, pairs, off in zip(faces, bpairs, offsets):
        if not face.rank:
            continue
        mats = _exact_face_matrices(system, face, pairs)
        r = face.rank
        for g, M in mats.items():
            row = rows[g]
            pos = off
            for k in range(r):
                for l in range(k, r):
                    row[pos] += M[k][k] if k == l else 2 * M[k][l]
                    pos += 1
    sol = solve_affine([rows[g] for g in gammas], [system.rhs[g] for g in gammas]) if gammas else ([], _identity(nvar))
    if sol is None:
        return None
    x, null = sol
    if not gammas:
        x = [Fraction(0)] * nvar
    return _AffineFace(faces, offsets, x, null, nvar)


def _unpack(vec, faces, offsets):
    out = []
    for face, off in zip(faces, offsets):
        r = face.rank
        Q = [[None] * r for _ in range(r)]
        pos = off
        for k in range(r):
            for l in range(k, r):
                Q[k][l] = Q[l][k] = vec[pos]
                pos += 1
        out.append(Q)
    return out


def _pack_float(Qs: list[np.ndarray]) -> np.ndarray:
    vals = []
    for Q in Qs:
        r = len(Q)
        for k in range(r):
            for l in range(k, r):
                vals.append(Q[k, l])
    return np.array(vals)


def _assemble_gram(system: GramSystem, faces: list[_Face], Qs) -> tuple[tuple[Fraction, ...], ...]:
    n = len(system.basis)
    G = [[Fraction(0)] * n for _ in range(n)]
    for face, Q in zip(faces, Qs):
        W = face.W
        r = face.rank
        if not r:
            continue
        WQ = [[sum((W[a][k] * Q[k][l] for k in range(r) if W[a][k]), Fraction(0)) for l in range(r)]
              for a in range(len(face.idx))]
        for a, i in enumerate(face.idx):
            for b, j in enumerate(face.idx):
                if b < a:
                    continue
                v = sum((WQ[a][l] * W[b][l] for l in range(r) if W[b][l]), Fraction(0))
                G[i][j] = v
                G[j][i] = v
    return tuple(tuple(row) for row in G)


# -- numeric helpers -------------------------------------------------------------------

def sdp_feasibility(system: GramSystem, options: SosOptions | None = None,
                    blocks: list[list[int]] | None = None) -> SDPResult:
    """Numeric margin problem for a Gram system over the full (or block) basis."""
    opt = options or SosOptions()
    if blocks is None:
        blocks = [list(range(len(system.basis)))]
    faces = [_Face(list(bl), _identity(len(bl))) for bl in blocks]
    bpairs = _block_pairs(system, faces)
    gammas = _active_gammas(system, bpairs)
    scale = _scale(system)
    A, b, d = _numeric_problem(system, faces, bpairs, gammas, scale)
    res = solve_margin_sdp(A, b, d, opt.sdp_options())
    res.gammas = gammas
    res.scale = scale
    res.blocks = blocks
    return res


def _scale(system: GramSystem) -> float:
    vals = [abs(float(v)) for v in system.rhs.values() if v]
    return max(vals) if vals else 1.0


def _rationalize(x: float, den: int) -> Fraction:
    return Fraction(round(x * den), den)


def round_gram_to_rational(gram: np.ndarray, system: GramSystem, denominator_bound: int,
                           margin_tol: float = 1e-7) -> GramCertificate | None:
    """Round a full-basis numeric Gram matrix and project it onto the equations.

    Each coefficient equation touches its own set of Gram entries, so the
    orthogonal projection just spreads every residual evenly over the
    entries of its equation.
    """
    gram = np.asarray(gram, dtype=float)
    n = len(system.basis)
    if n == 0:
        return GramCertificate(system.basis, ()) if system.target.is_zero() else None
    if np.linalg.eigvalsh(0.5 * (gram + gram.T))[0] <= margin_tol * max(1.0, _scale(system)):
        return None
    if system.uncovered:
        return None
    schedule = [d for d in DEFAULT_DENOMINATORS if d <= denominator_bound] or [denominator_bound]
    for den in schedule:
        G = [[_rationalize(0.5 * (gram[i, j] + gram[j, i]), den) for j in range(n)] for i in range(n)]
        for g in system.monomials:
            lst = system.pairs[g]
            count = sum(1 if i == j else 2 for i, j in lst)
            total = sum((G[i][j] if i == j else 2 * G[i][j] for i, j in lst), Fraction(0))
            corr = (system.rhs[g] - total) / count
            if corr:
                for i, j in lst:
                    G[i][j] += corr
                    if i != j:
                        G[j][i] += corr
        cert = GramCertificate(system.basis, tuple(tuple(r) for r in G))
        if verify_gram_exact(system.target, cert):
            return cert
    return None


def _kernel_split(w: np.ndarray, scale: float) -> int:
    """Number of eigenvalues (ascending ``w``) treated as kernel."""
    top = max(float(w[-1]), scale, 1e-300)
    best_k, best_ratio = 0, 1e3
    for k in range(1, len(w) + 1):
        lo = max(float(w[k - 1]), 1e-300)
        if lo > 1e-5 * top:
            break
        hi = float(w[k]) if k < len(w) else top
        ratio = hi / max(abs(lo), 1e-16 * top)
        if ratio > best_ratio:
            best_k, best_ratio = k, ratio
    return best_k


def _rational_row_space(V: np.ndarray, max_den: int = 1000, tol: float = 1e-7):
    """Rational basis (as rows) for the column span of V, or None."""
    Vt = V.T.copy()
    k, r = Vt.shape
    pivots = []
    R = Vt
    for row in range(k):
        sub = np.abs(R[row:, :])
        cols = [c for c in range(r) if c not in pivots]
        c = max(cols, key=lambda c: sub[:, c].max())
        prow = row + int(np.argmax(sub[:, c]))
        R[[row, prow]] = R[[prow, row]]
        R[row] /= R[row, c]
        for i in range(k):
            if i != row:
                R[i] -= R[i, c] * R[row]
        pivots.append(c)
    out = []
    for row in range(k):
        vals = []
        for c in range(r):
            x = R[row, c]
            fr = Fraction(x).limit_denominator(max_den)
            if abs(float(fr) - x) > tol * max(1.0, abs(x)):
                return None
            vals.append(fr)
        out.append(vals)
    return out


def _reduce_face(face: _Face, kernel_rows: list[list[Fraction]]) -> _Face | None:
    if not kernel_rows:
        return face
    N = nullspace(kernel_rows, face.rank)
    if len(N) == face.rank:
        return face
    cols = len(N)
    newW = []
    for row in face.W:
        newW.append([sum((row[k] * N[c][k] for k in range(face.rank) if row[k] and N[c][k]), Fraction(0))
                     for c in range(cols)])
    # keep columns on a comparable scale
    for c in range(cols):
        mx = max((abs(newW[a][c]) for a in range(len(newW))), default=Fraction(1))
        if mx:
            for a in range(len(newW)):
                newW[a][c] /= mx
    return _Face(face.idx, newW)


# -- zeros ------------------------------------------------------------------------

def sample_points(n: int, radius: int = 2) -> list[tuple[int, ...]]:
    """Integer points of the cube, one per +- pair, small norm first."""
    pts = []
    for v in itertools.product(range(-radius, radius + 1), repeat=n):
        if not any(v):
            continue
        first = next(x for x in v if x)
        if first < 0:
            continue
        pts.append(v)
    pts.sort(key=lambda v: (sum(x * x for x in v), tuple(-x for x in v)))
    return pts


def _monomial_vector(v: Sequence[Fraction], mons) -> list[Fraction]:
    out = []
    for e in mons:
        val = Fraction(1)
        for x, k in zip(v, e):
            if k:
                val *= x**k
        out.append(val)
    return out


def find_rational_zeros(p: Form, extra_starts: int = 0, max_den: int = 10**6) -> list[tuple[Fraction, ...]]:
    """Rational projective zeros from a small grid plus polished local minima.

    Every returned point is an exact zero of p.
    """
    zeros = []
    seen = set()

    def add(v):
        v = tuple(Fraction(x) for x in v)
        top = max(v, key=abs)
        key = tuple(x / top for x in v)
        if key not in seen and evaluate(p, v) == 0:
            seen.add(key)
            zeros.append(v)

    for v in sample_points(p.n_vars, 2):
        add(v)
    if extra_starts:
        for u in _local_minima(p, extra_starts):
            k = int(np.argmax(np.abs(u)))
            u = u / u[k]
            v = [Fraction(float(x)).limit_denominator(max_den) for x in u]
            add(v)
    return zeros


def _local_minima(p: Form, count: int) -> list[np.ndarray]:
    from scipy.optimize import minimize

    n = p.n_vars
    m = p.degree
    terms = [(float(c), np.array(e)) for e, c in p.items()]
    expo = np.array([e for _, e in terms], dtype=float)
    coef = np.array([c for c, _ in terms])

    def f_and_grad(u):
        r2 = float(u @ u)
        with np.errstate(divide="ignore", invalid="ignore"):
            mon = np.prod(np.power(u[None, :], expo), axis=1)
        val = coef @ mon
        grad = np.zeros(n)
        for i in range(n):
            e = expo[:, i]
            with np.errstate(divide="ignore", invalid="ignore"):
                part = np.where(e > 0, e * np.prod(np.power(u[None, :], expo - np.eye(n)[i]), axis=1), 0.0)
            grad[i] = coef @ part
        # homogeneous normalisation: f(u) / |u|^m
        fv = val / r2 ** (m / 2)
        g = grad / r2 ** (m / 2) - m * val * u / r2 ** (m / 2 + 1)
        return fv, g

    golden = (1 + 5**0.5) / 2
    starts = []
    for k in range(count):
        # deterministic spread over the sphere, generalised Fibonacci lattice
        u = np.array([np.cos(2 * np.pi * ((k + 0.5) * golden ** (-(i + 1)) % 1.0)) + 0.1 * (i + 1)
                      for i in range(n)])
        starts.append(u / np.linalg.norm(u))
    out = []
    scale = max(abs(coef)) if len(coef) else 1.0
    for u0 in starts:
        res = minimize(f_and_grad, u0, jac=True, method="BFGS", options={"gtol": 1e-14, "maxiter": 500})
        u = res.x / np.linalg.norm(res.x)
        if abs(res.fun) < 1e-9 * scale:
            out.append(u)
    return out


# -- the decision procedure -----------------------------------------------------------

def _point_dual(p: Form, basis: MonomialBasis, v) -> DualCertificate:
    system_gammas = {tuple(a + b for a, b in zip(u, w)) for u in basis.monomials for w in basis.monomials}
    keys = system_gammas | set(p.support())
    functional = {}
    for g in keys:
        val = Fraction(1)
        for x, k in zip(v, g):
            if k:
                val *= Fraction(x) ** k
        functional[g] = val
    return DualCertificate(basis, functional, dict(basis.exclusions))


def _anchor_functional(p: Form, basis: MonomialBasis, keys, radius: int = 2):
    """Average of point evaluations: a rational functional with PD moment matrix."""
    m = p.degree
    pts = [v for v in itertools.product(range(-radius, radius + 1), repeat=p.n_vars) if any(v)]
    y = {g: Fraction(0) for g in keys}
    for v in pts:
        w = Fraction(1, sum(x * x for x in v) ** (m // 2))
        for g in keys:
            val = w
            for x, k in zip(v, g):
                if k:
                    val *= x**k
            y[g] += val
    return y


def _round_dual(p: Form, system: GramSystem, res: SDPResult, options: SosOptions) -> DualCertificate | None:
    basis = system.basis
    gammas = res.gammas
    keys = set(system.monomials) | set(p.support())
    mu = res.mu
    # normalise so that the trace of the moment matrix is one
    diag_count = {g: 0 for g in gammas}
    for beta in basis.monomials:
        g = tuple(2 * b for b in beta)
        if g in diag_count:
            diag_count[g] += 1
    tr = sum(mu[k] * diag_count[g] for k, g in enumerate(gammas))
    if tr <= 0:
        return None
    mu = mu / tr
    value = float(sum(mu[k] * float(system.rhs[g]) for k, g in enumerate(gammas)))
    if value >= 0:
        return None
    anchor = _anchor_functional(p, basis, keys)
    a_tr = sum(anchor[tuple(2 * b for b in beta)] for beta in basis.monomials)
    anchor = {g: v / a_tr for g, v in anchor.items()}
    a_val = float(sum(c * anchor.get(e, 0) for e, c in p.items()))
    theta_max = -value / (max(a_val, 0.0) - value)
    exclusions = dict(basis.exclusions)
    for den in options.denominators:
        mu_r = {g: _rationalize(mu[k], den) for k, g in enumerate(gammas)}
        for frac in (Fraction(1, 2), Fraction(1, 8), Fraction(1, 64), Fraction(7, 8)):
            theta = Fraction(theta_max).limit_denominator(den) * frac
            if not 0 < theta < 1:
                continue
            y = {g: (1 - theta) * mu_r.get(g, Fraction(0)) + theta * anchor[g] for g in keys}
            cert = DualCertificate(basis, y, exclusions)
            if verify_dual_exact(p, cert):
                return cert
    return None


def check_sos(p: Form, options: SosOptions | None = None) -> SosVerdict:
    opt = options or SosOptions()
    start = time.perf_counter()
    diag: dict = {"n_vars": p.n_vars, "degree": p.degree}
    if p.is_zero():
        empty = MonomialBasis(p.n_vars, 0, ())
        return SosVerdict(FEASIBLE, GramCertificate(empty, ()), None, diag)
    if p.degree % 2:
        raise FormError(f"odd degree {p.degree}: a sum of squares has even degree")

    basis = basis_for(p, opt.basis)
    if opt.basis == "full":
        # still carry separating directions so a dual may be stated over any basis
        basis = MonomialBasis(basis.n_vars, basis.half_degree, basis.monomials, {})
    diag["basis_size"] = len(basis)
    system = gram_system(p, basis)

    def done(verdict: SosVerdict) -> SosVerdict:
        verdict.diagnostics.update(diag)
        verdict.diagnostics["seconds"] = round(time.perf_counter() - start, 4)
        return verdict

    if system.uncovered:
        g = system.uncovered[0]
        sign = -1 if p.coeff(g) > 0 else 1
        dual = DualCertificate(basis, {g: Fraction(sign)}, dict(basis.exclusions))
        diag["route"] = "uncovered-monomial"
        if verify_dual_exact(p, dual):
            return done(SosVerdict(INFEASIBLE, None, dual))
        # full basis without exclusions cannot leave monomials uncovered
        return done(SosVerdict(UNDECIDED, None, None, {"reason": "uncovered monomial"}))

    cert = _square_certificate(p, basis)
    if cert is not None:
        diag["route"] = "perfect-square"
        return done(SosVerdict(FEASIBLE, cert, None))

    for v in sample_points(p.n_vars, opt.sample_radius):
        if evaluate(p, v) < 0:
            dual = _point_dual(p, basis, v)
            diag["route"] = "negative-sample"
            diag["witness_point"] = list(v)
            if verify_dual_exact(p, dual):
                return done(SosVerdict(INFEASIBLE, None, dual))
            break

    blocks = sign_symmetry_blocks(p, basis) if opt.use_symmetry else [list(range(len(basis)))]
    diag["blocks"] = [len(b) for b in blocks]
    res = sdp_feasibility(system, opt, blocks)
    t = res.t
    diag["sdp"] = res.as_dict()
    diag["margin"] = t
    logger.debug("top-level margin t=%.3e status=%s", t, res.status)

    if t < 0:
        dual = _round_dual(p, system, res, opt)
        if dual is not None:
            diag["route"] = "sdp-dual"
            return done(SosVerdict(INFEASIBLE, None, dual))
        if t < -opt.margin_tol:
            diag["route"] = "sdp-dual"
            return done(SosVerdict(UNDECIDED, None, None, {"reason": "dual rounding failed"}))

    cert, info = _primal_search(p, system, blocks, res, opt)
    diag.update(info)
    if cert is not None:
        return done(SosVerdict(FEASIBLE, cert, None))
    if opt.facial_chain:
        chain = certified_reduction(p, system, blocks, opt, arcs=opt.arcs,
                                    zeros=find_rational_zeros(p), flips=sign_flips(p) if opt.use_symmetry else ())
        diag["facial_chain"] = chain.info
        if chain.certificate is not None:
            diag["route"] = "facial-chain"
            return done(SosVerdict(FEASIBLE, chain.certificate, None))
        if chain.dual is not None:
            diag["route"] = "facial-chain"
            return done(SosVerdict(INFEASIBLE, None, chain.dual))
    return done(SosVerdict(UNDECIDED, None, None, {"reason": info.get("failure", "rounding failed")}))


def _square_certificate(p: Form, basis: MonomialBasis) -> GramCertificate | None:
    """Rank-one certificate when p is a positive multiple of a rational square."""
    low = next(iter(p.items()))[1]
    if low <= 0:
        return None
    r = square_root(p * (1 / low))
    if r is None or any(e not in basis.monomials for e in r.support()):
        return None
    c = [r.coeff(b) for b in basis.monomials]
    gram = tuple(tuple(low * a * b for b in c) for a in c)
    cert = GramCertificate(basis, gram)
    return cert if verify_gram_exact(p, cert) else None


def _diagonal_elimination(system: GramSystem, faces: list[_Face]) -> list[_Face]:
    """Drop monomials whose diagonal Gram entry is forced to zero."""
    faces = [_Face(list(f.idx), f.W) for f in faces]
    changed = True
    while changed:
        changed = False
        bpairs = _block_pairs(system, faces)
        for fi, (face, pairs) in enumerate(zip(faces, bpairs)):
            for g, lst in pairs.items():
                if system.rhs[g] == 0 and len(lst) == 1 and lst[0][0] == lst[0][1]:
                    a = lst[0][0]
                    # any other face contributing to g?
                    if any(g in other for k, other in enumerate(bpairs) if k != fi):
                        continue
                    idx = face.idx[:a] + face.idx[a + 1:]
                    faces[fi] = _Face(idx, _identity(len(idx)))
                    changed = True
                    break
            if changed:
                break
    return [f for f in faces if f.idx]


def _round_in_face(system: GramSystem, aff: _AffineFace, Qnum: list[np.ndarray],
                   options: SosOptions) -> GramCertificate | None:
    q0 = np.array([float(v) for v in aff.particular])
    target = _pack_float(Qnum)
    if aff.null:
        N = np.array([[float(v) for v in col] for col in aff.null]).T
        c, *_ = np.linalg.lstsq(N, target - q0, rcond=None)
    else:
        c = np.zeros(0)
    for den in options.denominators:
        cr = [_rationalize(x, den) for x in c]
        vec = list(aff.particular)
        for coef, col in zip(cr, aff.null):
            if coef:
                for k, v in enumerate(col):
                    if v:
                        vec[k] += coef * v
        Qs = _unpack(vec, aff.faces, aff.offsets)
        if not all(is_psd(Q) for Q in Qs):
            continue
        gram = _assemble_gram(system, aff.faces, Qs)
        cert = GramCertificate(system.basis, gram)
        if verify_gram_exact(system.target, cert):
            return cert
    return None


def _primal_search(p: Form, system: GramSystem, blocks, top: SDPResult, opt: SosOptions):
    info: dict = {"reductions": []}
    scale = _scale(system)
    faces = [_Face(list(bl), _identity(len(bl))) for bl in blocks]

    if top.t > opt.margin_tol:
        bpairs = _block_pairs(system, faces)
        aff = _affine_parametrisation(system, faces, bpairs)
        if aff is not None:
            Q = [(x + top.t * np.eye(len(x))) * scale for x in top.X]
            cert = _round_in_face(system, aff, Q, opt)
            if cert is not None:
                info["route"] = "strict-rounding"
                return cert, info

    reduced = _diagonal_elimination(system, faces)
    if sum(len(f.idx) for f in reduced) < sum(len(f.idx) for f in faces):
        info["reductions"].append({"kind": "diagonal", "removed": sum(len(f.idx) for f in faces) - sum(len(f.idx) for f in reduced)})
    faces = reduced

    zeros = find_rational_zeros(p)
    if zeros:
        faces = _apply_zeros(system, faces, zeros)
        info["reductions"].append({"kind": "zeros", "count": len(zeros)})
    tried_local = tried_algebraic = False

    for step in range(opt.max_reductions):
        bpairs = _block_pairs(system, faces)
        aff = _affine_parametrisation(system, faces, bpairs)
        if aff is None:
            info["failure"] = "face reduction made the coefficient equations inconsistent"
            return None, info
        if aff.nvar == 0:
            gram = _assemble_gram(system, faces, [[] for _ in faces])
            cert = GramCertificate(system.basis, gram)
            return (cert, info) if verify_gram_exact(p, cert) else (None, info)
        gammas = _active_gammas(system, bpairs)
        A, b, d = _numeric_problem(system, faces, bpairs, gammas, scale)
        res = solve_margin_sdp(A, b, d, opt.sdp_options())
        info["reductions"].append({"kind": "solve", "t": res.t, "status": res.status,
                                   "ranks": [f.rank for f in faces]})
        Q = [(x + res.t * np.eye(len(x))) * scale for x in res.X]
        if res.t > opt.margin_tol:
            cert = _round_in_face(system, aff, Q, opt)
            if cert is not None:
                info["route"] = "face-rounding"
                return cert, info
        if res.t < -opt.margin_tol:
            info["failure"] = f"face margin negative ({res.t:.3e})"
            return None, info
        # find kernel directions of the numeric Gram blocks
        new_faces = _numeric_kernel_faces(faces, Q, scale)
        if new_faces is not None:
            check = _affine_parametrisation(system, new_faces, _block_pairs(system, new_faces))
            if check is None:
                info["reductions"].append({"kind": "kernel-rejected"})
                new_faces = None
        if new_faces is None and not tried_local:
            tried_local = True
            more = find_rational_zeros(p, extra_starts=40)
            if len(more) > len(zeros):
                zeros = more
                candidate = _apply_zeros(system, faces, zeros)
                if [f.rank for f in candidate] != [f.rank for f in faces]:
                    faces = candidate
                    info["reductions"].append({"kind": "local-zeros", "count": len(zeros)})
                    continue
        if new_faces is None and not tried_algebraic:
            tried_algebraic = True
            candidate = _algebraic_zero_faces(p, system, faces)
            if candidate is not None and _affine_parametrisation(system, candidate, _block_pairs(system, candidate)):
                faces = candidate
                info["reductions"].append({"kind": "algebraic-zeros", "ranks": [f.rank for f in faces]})
                continue
        if new_faces is None:
            # last resort: round the face as it stands
            cert = _round_in_face(system, aff, Q, opt)
            if cert is not None:
                info["route"] = "face-rounding"
                return cert, info
            info["failure"] = "no rational kernel found"
            return None, info
        faces = new_faces
        info["reductions"].append({"kind": "kernel", "ranks": [f.rank for f in faces]})
    info["failure"] = "too many reductions"
    return None, info


def _numeric_kernel_faces(faces: list[_Face], Q: list[np.ndarray], scale: float) -> list[_Face] | None:
    """Faces cut down by rationalised numeric kernels; None when nothing usable was found."""
    out = []
    progress = False
    for face, Qb in zip(faces, Q):
        if not face.rank:
            out.append(face)
            continue
        w, V = np.linalg.eigh(Qb / scale)
        k = _kernel_split(w, 1.0)
        rows = _rational_row_space(V[:, :k]) if k else None
        if rows is None:
            nf = _numeric_range_face(face, Qb / scale, k) if k else None
            if nf is None:
                out.append(face)
                continue
        else:
            nf = _reduce_face(face, rows)
        progress = progress or nf.rank < face.rank
        out.append(nf)
    return out if progress else None


def _refine_zero(p: Form, u: np.ndarray, dps: int = 60, max_iter: int = 30):
    """Polish an approximate real zero to high precision, or None.

    Works in the affine chart of the largest coordinate and runs Newton on
    the gradient; the Hessian is pseudo-inverted so that zeros lying on a
    curve of zeros converge too.  Zeros where Newton is not quadratically
    convergent (high multiplicity) are given up on.
    """
    import mpmath

    n = p.n_vars
    k = int(np.argmax(np.abs(u)))
    free = [i for i in range(n) if i != k]
    m = p.degree
    with mpmath.workdps(dps):
        terms = [(mpmath.mpf(c.numerator) / c.denominator, e) for e, c in p.items()]
        x = [mpmath.mpf(float(u[i] / u[k])) for i in free]

        def point(x):
            v = [mpmath.mpf(1)] * n
            for i, xi in zip(free, x):
                v[i] = xi
            return v

        def derivs(x):
            v = point(x)
            pw = [[mpmath.mpf(1)] + [None] * m for _ in range(n)]
            for i in range(n):
                for d in range(1, m + 1):
                    pw[i][d] = pw[i][d - 1] * v[i]

            def mono(e, drop):
                out = mpmath.mpf(1)
                for i in range(n):
                    out *= pw[i][e[i] - drop.count(i)]
                return out

            r = len(free)
            g = [mpmath.mpf(0)] * r
            H = mpmath.matrix(r, r)
            val = mpmath.mpf(0)
            for c, e in terms:
                val += c * mono(e, ())
                for a, ia in enumerate(free):
                    if not e[ia]:
                        continue
                    g[a] += c * e[ia] * mono(e, (ia,))
                    for b in range(a, r):
                        ib = free[b]
                        eb = e[ib] - (ib == ia)
                        if eb <= 0:
                            continue
                        h = c * e[ia] * eb * mono(e, (ia, ib))
                        H[a, b] += h
                        if b != a:
                            H[b, a] += h
            return val, g, H

        scale = max(abs(c) for c, _ in terms)
        last = None
        for _ in range(max_iter):
            val, g, H = derivs(x)
            size = max((abs(t) for t in g), default=mpmath.mpf(0))
            if size < mpmath.mpf(10) ** (-dps + 8) * scale:
                break
            if last is not None and size > last * mpmath.mpf(10) ** -3 and size > mpmath.mpf(10) ** -12 * scale:
                # not converging quadratically
                return None
            last = size
            w, Q = mpmath.eigsy(H)
            top = max(abs(t) for t in w)
            step = [mpmath.mpf(0)] * len(free)
            for j in range(len(free)):
                if abs(w[j]) > top * mpmath.mpf(10) ** (-dps // 3):
                    coef = sum(Q[i, j] * g[i] for i in range(len(free))) / w[j]
                    for i in range(len(free)):
                        step[i] += coef * Q[i, j]
            x = [a - b for a, b in zip(x, step)]
        val, _, _ = derivs(x)
        if abs(val) > mpmath.mpf(10) ** (-dps + 10) * scale:
            return None
        return point(x)


def _integer_relations(cols, dps: int) -> list[list[int]]:
    """Short integer vectors c with c . col ~ 0 for every column, found by LLL.

    ``cols`` are mpmath vectors of equal length accurate to about ``dps``
    digits.  Only relations with modest coefficients that hold to nearly
    that precision are returned.
    """
    import mpmath
    from sympy import ZZ
    from sympy.polys.matrices import DomainMatrix

    r = len(cols[0])
    bits = int(dps * 3.32 * 0.75)
    big = mpmath.mpf(2) ** bits
    rows = []
    for j in range(r):
        rows.append([ZZ(int(j == k)) for k in range(r)] + [ZZ(int(mpmath.nint(big * c[j]))) for c in cols])
    red = DomainMatrix(rows, (r, r + len(cols)), ZZ).lll().to_list()
    # a genuine relation holds to nearly full precision with small
    # coefficients; the lattice also offers long near-relations, rejected here
    tiny = mpmath.mpf(10) ** (-dps + 10)
    out = []
    for row in red:
        c = [int(v) for v in row[:r]]
        if not any(c) or max(abs(int(v)) for v in row[r:]) > 2 ** (bits // 2):
            continue
        norm = max(abs(v) for v in c)
        if norm > 2 ** (bits // 3):
            continue
        if all(abs(sum(cj * col[j] for j, cj in enumerate(c) if cj)) <= tiny * norm for col in cols):
            out.append(c)
    return out


def _algebraic_zero_faces(p: Form, system: GramSystem, faces: list[_Face], count: int = 40,
                          dps: int = 60) -> list[_Face] | None:
    """Cut faces down using high-precision real zeros that need not be rational.

    A Gram vector c must satisfy c . z(v) = 0 at every real zero v.  When the
    zeros are irrational the admissible rational vectors are the integer
    relations of the numbers z(v), found by lattice reduction; their span is
    the new face.  Every certificate found in it is still verified exactly.
    """
    import mpmath

    starts = []
    for u in _local_minima(p, count):
        u = u / u[int(np.argmax(np.abs(u)))]
        if not any(np.abs(u - w).max() < 1e-6 for w in starts):
            starts.append(u)
    pts, seen = [], []
    for u in starts:
        v = _refine_zero(p, u, dps)
        if v is None:
            continue
        with mpmath.workdps(dps):
            top = max(v, key=abs)
            key = [x / top for x in v]
            if any(max(abs(a - b) for a, b in zip(key, k)) < mpmath.mpf(10) ** (-dps // 2) for k in seen):
                continue
            seen.append(key)
            pts.append(key)
    if not pts:
        return None
    mons = system.basis.monomials
    out, progress = [], False
    with mpmath.workdps(dps):
        for face in faces:
            if not face.rank:
                out.append(face)
                continue
            Wm = [[mpmath.mpf(w.numerator) / w.denominator for w in row] for row in face.W]
            cols = []
            for v in pts:
                z = []
                for i in face.idx:
                    val = mpmath.mpf(1)
                    for x, e in zip(v, mons[i]):
                        val *= x**e
                    z.append(val)
                col = [sum((z[a] * Wm[a][c] for a in range(len(z)) if face.W[a][c]), mpmath.mpf(0))
                       for c in range(face.rank)]
                size = max(abs(t) for t in col)
                if size > mpmath.mpf(10) ** (-dps // 2):
                    cols.append([t / size for t in col])
            if not cols:
                out.append(face)
                continue
            rels = _integer_relations(cols, dps)
            if rels:
                basis_rows = rref([[Fraction(t) for t in c] for c in rels], face.rank)[0]
                rels = [row for row in basis_rows if any(row)]
            if not rels or len(rels) >= face.rank:
                out.append(face)
                continue
            newW = [[sum((row[k] * c[k] for k in range(face.rank) if row[k] and c[k]), Fraction(0))
                     for c in rels] for row in face.W]
            out.append(_Face(face.idx, newW))
            progress = True
    return out if progress else None


def _numeric_range_face(face: _Face, Qb: np.ndarray, k: int) -> _Face | None:
    """Face spanned by the rationalised range of the Gram block in monomial coordinates.

    Used when the kernel has no small rational basis in face coordinates; for
    a sum of a few squares with rational coefficients the range is simply
    their span.  A wrong guess only costs a failed rounding attempt.
    """
    W = np.array([[float(v) for v in row] for row in face.W])
    G = W @ Qb @ W.T
    w, V = np.linalg.eigh((G + G.T) / 2)
    keep = face.rank - k
    if keep <= 0:
        return None
    rows = _rational_row_space(V[:, len(w) - keep:])
    if rows is None:
        return None
    return _Face(face.idx, [list(col) for col in zip(*rows)])


def _apply_zeros(system: GramSystem, faces: list[_Face], zeros) -> list[_Face]:
    mons = system.basis.monomials
    out = []
    for face in faces:
        if not face.rank:
            out.append(face)
            continue
        rows = []
        for v in zeros:
            z = _monomial_vector(v, [mons[i] for i in face.idx])
            k = [sum((face.W[a][c] * z[a] for a in range(len(z)) if face.W[a][c]), Fraction(0))
                 for c in range(face.rank)]
            if any(k):
                rows.append(k)
        out.append(_reduce_face(face, rows))
    return out
