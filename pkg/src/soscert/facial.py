"""Facial reduction driven by exact reducing functionals.

When every Gram matrix of p is singular the Gram spectrahedron sits in a
proper face of the PSD cone and interior-point numerics degrade with each
hidden level of degeneracy.  Here each reduction is justified exactly: a
functional ``y`` with ``y(p) = 0`` whose moment matrix, compressed to the
current face, is PSD forces every Gram matrix of p into the kernel of that
compression.  Candidate functionals are

* evaluation at a rational zero of p,
* a single coordinate ``+-e_g`` with ``p_g = 0``,
* Taylor coefficients along a polynomial arc ``s -> a(s)``:
  ``L_j(f) = [s^(2j)] f(a(s))`` is PSD on the face where every square root
  has order at least j along the arc.

Once no candidate applies, the last face is either inconsistent with the
coefficient equations, strictly separated from p, or strictly feasible.  A
separating functional on the last face is lifted back through the chain by
adding growing multiples of the reducing functionals, which yields one
rational functional whose moment matrix is positive definite on the whole
basis.  Because that final functional is checked from scratch, none of the
bookkeeping here has to be trusted.
"""

from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np

from .certificates import DualCertificate, GramCertificate, verify_dual_exact, verify_gram_exact
from .exact import is_psd, solve_affine
from .forms import Exponent, Form, evaluate
from .sdp import solve_margin_sdp

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Arc:
    """Polynomial curve ``s -> (c_1(s), ..., c_n(s))``; ``coords[i][k]`` is the s^k coefficient."""

    coords: tuple[tuple[Fraction, ...], ...]

    def __post_init__(self):
        object.__setattr__(self, "coords", tuple(tuple(Fraction(v) for v in c) for c in self.coords))

    @property
    def point(self) -> tuple[Fraction, ...]:
        return tuple(c[0] if c else Fraction(0) for c in self.coords)


def _series_mul(a: list, b: list, top: int) -> list:
    out = [Fraction(0)] * (top + 1)
    for i, x in enumerate(a[: top + 1]):
        if not x:
            continue
        for j, v in enumerate(b[: top + 1 - i]):
            if v:
                out[i + j] += x * v
    return out


def arc_moments(arc: Arc, keys, top: int) -> dict[Exponent, list[Fraction]]:
    """For each exponent g, the coefficients of s^0..s^top in a(s)^g."""
    maxdeg = [max((g[i] for g in keys), default=0) for i in range(len(arc.coords))]
    powers = []
    for i, c in enumerate(arc.coords):
        base = list(c[: top + 1]) + [Fraction(0)] * max(0, top + 1 - len(c))
        pw = [[Fraction(1)] + [Fraction(0)] * top]
        for _ in range(maxdeg[i]):
            pw.append(_series_mul(pw[-1], base, top))
        powers.append(pw)
    out = {}
    for g in keys:
        acc = powers[0][g[0]]
        for i in range(1, len(g)):
            acc = _series_mul(acc, powers[i][g[i]], top)
        out[g] = acc
    return out


@dataclass
class _Step:
    label: str
    functional: dict
    faces: list
    mats: list


@dataclass
class ChainResult:
    certificate: GramCertificate | None = None
    dual: DualCertificate | None = None
    info: dict = field(default_factory=dict)


def _compress(mats: dict, y: dict, r: int) -> list[list[Fraction]]:
    C = [[Fraction(0)] * r for _ in range(r)]
    for g, M in mats.items():
        c = y.get(g)
        if not c:
            continue
        for k in range(r):
            row, src = C[k], M[k]
            for l in range(r):
                if src[l]:
                    row[l] += c * src[l]
    return C


def _value(p: Form, y: dict) -> Fraction:
    return sum((c * y.get(e, Fraction(0)) for e, c in p.items()), Fraction(0))


def grid_functional(keys, n_vars: int, radius: int) -> dict:
    """Sum of point evaluations over the integer cube; PD on every degree below 2*radius + 1."""
    pts = [v for v in itertools.product(range(-radius, radius + 1), repeat=n_vars) if any(v)]
    top = max((max(g) for g in keys), default=0)
    pw = {x: [x**k for k in range(top + 1)] for x in range(-radius, radius + 1)}
    out = {}
    for g in keys:
        total = 0
        for v in pts:
            term = 1
            for x, k in zip(v, g):
                if k:
                    term *= pw[x][k]
                    if not term:
                        break
            total += term
        out[g] = Fraction(total)
    return out


def certified_reduction(p: Form, system, blocks, options, arcs: Sequence[Arc] = (),
                        zeros: Sequence = (), flips=()) -> ChainResult:
    from .sos import (_Face, _active_gammas, _affine_parametrisation, _block_pairs,
                      _exact_face_matrices, _identity, _numeric_problem, _reduce_face,
                      _round_in_face, _scale, even_character)

    info: dict = {"steps": []}
    keys = sorted(set(system.monomials) | set(p.support()))
    sym = [g for g in keys if even_character(g, flips)]

    def symmetrise(y: dict) -> dict:
        return {g: y[g] for g in sym if y.get(g)}

    faces = [_Face(list(bl), _identity(len(bl))) for bl in blocks]

    # candidate sources; each yields functionals in the order they may apply
    point_cands = []
    seen = set()
    for v in list(zeros) + [a.point for a in arcs]:
        v = tuple(Fraction(x) for x in v)
        if not any(v) or v in seen or evaluate(p, v) != 0:
            continue
        seen.add(v)
        point_cands.append(("zero", symmetrise({g: _monomial(v, g) for g in keys})))
    coord_cands = []
    for g in sym:
        if system.rhs.get(g, Fraction(0)) == 0:
            coord_cands.append(("coordinate", {g: Fraction(1)}))
            coord_cands.append(("coordinate", {g: Fraction(-1)}))
    arc_state = []
    for a in arcs:
        top = 2 * max(len(c) for c in a.coords) * max(1, p.degree)
        top = min(top, 4 * p.degree + 8)
        mom = arc_moments(a, keys, top)
        along = [sum((c * mom[e][k] for e, c in p.items()), Fraction(0)) for k in range(top + 1)]
        order = next((k for k, v in enumerate(along) if v), top + 1)
        arc_state.append({"mom": mom, "j": 0, "limit": (order - 1) // 2})

    def arc_functional(st) -> dict:
        return symmetrise({g: st["mom"][g][2 * st["j"]] for g in keys})

    steps: list[_Step] = []
    used_points = set()
    used_coords = set()
    for _round in range(10_000):
        bpairs = _block_pairs(system, faces)
        mats = [_exact_face_matrices(system, f, pr) if f.rank else {} for f, pr in zip(faces, bpairs)]

        def attempt(label, y):
            comp = [_compress(m, y, f.rank) for m, f in zip(mats, faces)]
            if all(not any(any(row) for row in C) for C in comp):
                return "null"
            if all(is_psd(C) for C in comp):
                new = [_reduce_face(f, C) if f.rank else f for f, C in zip(faces, comp)]
                steps.append(_Step(label, y, faces, mats))
                return new
            return None

        applied = None
        for i, (label, y) in enumerate(point_cands):
            if i in used_points:
                continue
            res = attempt(label, y)
            if res is not None:
                used_points.add(i)
            if isinstance(res, list):
                applied = res
                break
        if applied is None:
            for st in arc_state:
                while applied is None and st["j"] <= st["limit"]:
                    res = attempt(f"arc-{st['j']}", arc_functional(st))
                    if res is None:
                        break
                    st["j"] += 1
                    if isinstance(res, list):
                        applied = res
                if applied is not None:
                    break
        if applied is None:
            for i, (label, y) in enumerate(coord_cands):
                if i in used_coords:
                    continue
                res = attempt(label, y)
                if res == "null":
                    continue
                if isinstance(res, list):
                    used_coords.add(i)
                    applied = res
                    break
        if applied is None:
            break
        faces = applied
        info["steps"].append({"kind": steps[-1].label, "ranks": [f.rank for f in faces]})
    info["final_ranks"] = [f.rank for f in faces]
    logger.debug("facial chain: %d steps, final ranks %s", len(steps), info["final_ranks"])

    bpairs = _block_pairs(system, faces)
    mats = [_exact_face_matrices(system, f, pr) if f.rank else {} for f, pr in zip(faces, bpairs)]
    aff = _affine_parametrisation(system, faces, bpairs)
    anchor = None

    def get_anchor():
        nonlocal anchor
        if anchor is None:
            radius = (system.basis.half_degree + 2) // 2
            anchor = symmetrise(grid_functional(keys, p.n_vars, radius))
        return anchor

    final = None
    if aff is None:
        y = _linear_certificate(system, faces, mats, bpairs)
        if y is None:
            info["failure"] = "inconsistent face without a linear certificate"
            return ChainResult(info=info)
        a = get_anchor()
        av = _value(p, a)
        eps = Fraction(1, 2) / av if av > 0 else Fraction(1)
        final = {g: y.get(g, Fraction(0)) + eps * a.get(g, Fraction(0)) for g in keys}
        info["final"] = "linear"
    else:
        if aff.nvar == 0:
            from .sos import _assemble_gram
            cert = GramCertificate(system.basis, _assemble_gram(system, faces, [[] for _ in faces]))
            if verify_gram_exact(p, cert):
                info["final"] = "rigid"
                return ChainResult(cert, None, info)
        gammas = _active_gammas(system, bpairs)
        scale = _scale(system)
        A, b, d = _numeric_problem(system, faces, bpairs, gammas, scale)
        res = solve_margin_sdp(A, b, d, options.sdp_options())
        info["final_margin"] = res.t
        if res.t > options.margin_tol:
            Q = [(x + res.t * np.eye(len(x))) * scale for x in res.X]
            cert = _round_in_face(system, aff, Q, options)
            if cert is not None:
                info["final"] = "strict-face"
                return ChainResult(cert, None, info)
            info["failure"] = "face rounding failed"
            return ChainResult(info=info)
        if res.t >= -options.margin_tol:
            info["failure"] = f"facial chain stalled with margin {res.t:.3e}"
            return ChainResult(info=info)
        final = _round_face_dual(p, res.mu, gammas, faces, mats, get_anchor(), options)
        if final is None:
            info["failure"] = "face dual rounding failed"
            return ChainResult(info=info)
        info["final"] = "face-dual"

    y = final
    for step in reversed(steps):
        y = _lift(y, step)
        if y is None:
            info["failure"] = "could not lift the separating functional"
            return ChainResult(info=info)
    dual = DualCertificate(system.basis, {g: v for g, v in y.items() if v}, dict(system.basis.exclusions))
    if verify_dual_exact(p, dual):
        return ChainResult(None, dual, info)
    info["failure"] = "lifted functional failed verification"
    return ChainResult(info=info)


def _monomial(v, g) -> Fraction:
    out = Fraction(1)
    for x, k in zip(v, g):
        if k:
            out *= x**k
    return out


def _linear_certificate(system, faces, mats, bpairs) -> dict | None:
    """y with compressed moment matrices all zero and y(p) = -1."""
    from .sos import _active_gammas

    gammas = _active_gammas(system, bpairs)
    rows, rhs = [], []
    for f, m in zip(faces, mats):
        for k in range(f.rank):
            for l in range(k, f.rank):
                row = [m[g][k][l] if g in m else Fraction(0) for g in gammas]
                if any(row):
                    rows.append(row)
                    rhs.append(Fraction(0))
    rows.append([system.rhs[g] for g in gammas])
    rhs.append(Fraction(-1))
    sol = solve_affine(rows, rhs)
    if sol is None:
        return None
    return {g: v for g, v in zip(gammas, sol[0]) if v}


def _round_face_dual(p, mu, gammas, faces, mats, anchor, options) -> dict | None:
    mu = {g: float(v) for g, v in zip(gammas, mu)}
    a_tr = sum(sum(_compress(m, anchor, f.rank)[k][k] for k in range(f.rank)) for m, f in zip(mats, faces))
    if a_tr <= 0:
        return None
    anc = {g: v / a_tr for g, v in anchor.items()}
    value = sum(float(c) * mu.get(e, 0.0) for e, c in p.items())
    if value >= 0:
        return None
    a_val = float(_value(p, anc))
    theta_max = -value / (max(a_val, 0.0) - value)
    for den in options.denominators:
        mu_r = {g: Fraction(round(v * den), den) for g, v in mu.items()}
        for frac in (Fraction(1, 2), Fraction(1, 8), Fraction(1, 64), Fraction(7, 8)):
            theta = Fraction(theta_max).limit_denominator(den) * frac
            if not 0 < theta < 1:
                continue
            keys = set(mu_r) | set(anc)
            y = {g: (1 - theta) * mu_r.get(g, Fraction(0)) + theta * anc.get(g, Fraction(0)) for g in keys}
            if _value(p, y) >= 0:
                continue
            if all(is_psd(_compress(m, y, f.rank), strict=True) for m, f in zip(mats, faces)):
                return y
    return None


def _lift(y: dict, step: _Step, max_exponent: int = 1 << 16) -> dict | None:
    """Add 2^e * step.functional to y, e as small as a galloping search finds, until PD on the step's faces."""

    def shifted(e):
        if e is None:
            return dict(y)
        c = Fraction(2) ** e
        z = dict(y)
        for g, v in step.functional.items():
            z[g] = z.get(g, Fraction(0)) + c * v
        return z

    def ok(z):
        return all(is_psd(_compress(m, z, f.rank), strict=True) for m, f in zip(step.mats, step.faces))

    z = shifted(None)
    if ok(z):
        return z
    lo, hi = -1, 0
    while not ok(shifted(hi)):
        lo, hi = hi, max(1, 2 * hi)
        if hi > max_exponent:
            return None
    # the PD set in c is an interval unbounded above, so bisect on the exponent
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if ok(shifted(mid)):
            hi = mid
        else:
            lo = mid
    return shifted(hi)
