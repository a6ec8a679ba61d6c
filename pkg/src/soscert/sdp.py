"""Dense primal-dual interior-point solver for the Gram margin problem.

The problem solved is

    maximise t  subject to  <A_i, X> + d_i t = b_i,  X >= 0 (block diagonal)

whose dual is

    minimise <b, mu>  subject to  sum_i mu_i A_i >= 0,  <d, mu> = 1.

For Gram systems ``X = G - t I`` so a positive optimum means a strictly
positive definite Gram matrix exists, and a negative optimum comes with a
moment functional ``mu`` separating the target from the SOS cone.
Directions are HKM with Mehrotra predictor-corrector steps.  Nothing in the
iteration is randomised, so equal inputs give equal outputs.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

logger = logging.getLogger(__name__)


@dataclass
class SDPOptions:
    max_iter: int = 120
    residual_tol: float = 1e-9
    gap_tol: float = 1e-10
    step_fraction: float = 0.98


@dataclass
class SDPResult:
    status: str  # "optimal", "stalled", "max_iter" or "breakdown"; non-optimal runs return the best iterate
    t: float
    X: list[np.ndarray]
    mu: np.ndarray
    S: list[np.ndarray]
    iterations: int
    primal_residual: float
    dual_residual: float
    gap: float
    kept_rows: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=int))

    @property
    def gram(self) -> list[np.ndarray]:
        """Blocks of X + t I, the Gram matrix in the caller's coordinates."""
        return [x + self.t * np.eye(len(x)) for x in self.X]

    def as_dict(self) -> dict:
        return {
            "status": self.status,
            "t": self.t,
            "iterations": self.iterations,
            "primal_residual": self.primal_residual,
            "dual_residual": self.dual_residual,
            "gap": self.gap,
        }


def _independent_rows(A: list[np.ndarray], d: np.ndarray, tol: float = 1e-10) -> np.ndarray:
    m = len(d)
    if m == 0:
        return np.zeros(0, dtype=int)
    rows = np.hstack([a.reshape(m, -1) for a in A] + [d[:, None]])
    norms = np.linalg.norm(rows, axis=1)
    nz = np.flatnonzero(norms > tol)
    if len(nz) == 0:
        return nz
    _, r, piv = sla.qr(rows[nz].T, mode="economic", pivoting=True)
    diag = np.abs(np.diag(r))
    rank = int(np.sum(diag > tol * max(1.0, diag[0])))
    return np.sort(nz[piv[:rank]])


def _max_step(X: np.ndarray, dX: np.ndarray) -> float:
    if X.size == 0:
        return np.inf
    try:
        L = np.linalg.cholesky(X)
    except np.linalg.LinAlgError:
        return 0.0
    Li = sla.solve_triangular(L, np.eye(len(X)), lower=True)
    w = np.linalg.eigvalsh(Li @ dX @ Li.T)
    lo = w[0]
    return np.inf if lo >= 0 else -1.0 / lo


def _schur_solver(M: np.ndarray):
    try:
        cho = sla.cho_factor(M)
        return lambda v: sla.cho_solve(cho, v)
    except sla.LinAlgError:
        pass
    # near-singular Schur complement late in degenerate runs
    w, V = np.linalg.eigh(M)
    if not np.all(np.isfinite(w)) or w[-1] <= 0:
        raise sla.LinAlgError("Schur complement is not positive")
    floor = w[-1] * 1e-15
    winv = 1.0 / np.maximum(w, floor)
    return lambda v: V @ (winv * (V.T @ v))


def solve_margin_sdp(A: list[np.ndarray], b: np.ndarray, d: np.ndarray,
                     options: SDPOptions | None = None) -> SDPResult:
    """Solve the margin problem.

    ``A`` holds one array per block, of shape (m, n_b, n_b), each slice symmetric.
    """
    opt = options or SDPOptions()
    b = np.asarray(b, dtype=float)
    d = np.asarray(d, dtype=float)
    m_all = len(b)
    sizes = [a.shape[1] for a in A]
    keep = _independent_rows(A, d)
    dropped = np.setdiff1d(np.arange(m_all), keep)
    A = [a[keep] for a in A]
    b_full, d_full = b, d
    b, d = b[keep], d[keep]
    m = len(b)
    ntot = sum(sizes)

    bnorm = max(1.0, np.linalg.norm(b))
    xi = max(1.0, float(np.max(np.abs(b))) if m else 1.0)
    X = [xi * np.eye(k) for k in sizes]
    S = [np.eye(k) for k in sizes]
    y = np.zeros(m)
    t = 0.0

    def A_op(Z: list[np.ndarray]) -> np.ndarray:
        out = np.zeros(m)
        for a, z in zip(A, Z):
            if a.size:
                out += a.reshape(m, -1) @ z.reshape(-1)
        return out

    def At_op(v: np.ndarray) -> list[np.ndarray]:
        return [np.tensordot(v, a, axes=1) if a.size else np.zeros((k, k)) for a, k in zip(A, sizes)]

    status = "max_iter"
    it = 0
    rp_norm = rd_norm = gap = np.inf
    best = None
    stall = 0
    for it in range(1, opt.max_iter + 1):
        rp = b - A_op(X) - d * t
        AtY = At_op(y)
        Rd = [-aty - s for aty, s in zip(AtY, S)]
        rf = -1.0 - d @ y
        mu = sum(float(np.sum(x * s)) for x, s in zip(X, S)) / ntot
        rp_norm = np.linalg.norm(rp) / bnorm
        rd_norm = max([np.linalg.norm(r) for r in Rd] + [abs(rf)])
        gap = mu * ntot / (1.0 + abs(t))
        logger.debug("it %d t=%.6e rp=%.2e rd=%.2e mu=%.2e", it, t, rp_norm, rd_norm, mu)
        merit = max(rp_norm / opt.residual_tol, rd_norm / opt.residual_tol, gap / opt.gap_tol)
        if best is None or merit < best[0]:
            best = (merit, it, [x.copy() for x in X], t, y.copy(), [s.copy() for s in S],
                    rp_norm, rd_norm, gap)
            stall = 0
        else:
            stall += 1
        if merit <= 1.0:
            status = "optimal"
            break
        if stall >= 5:
            status = "stalled"
            break
        try:
            Sinv = [np.linalg.inv(s) for s in S]
            M = np.zeros((m, m))
            for a, x, si in zip(A, X, Sinv):
                if not a.size:
                    continue
                T = x[None, :, :] @ a @ si[None, :, :]
                M += T.reshape(m, -1) @ a.reshape(m, -1).T
            M = 0.5 * (M + M.T)
            solve = _schur_solver(M)
        except (np.linalg.LinAlgError, sla.LinAlgError, ValueError):
            status = "breakdown"
            break

        Md = solve(d)
        dMd = d @ Md

        def direction(target: list[np.ndarray]):
            # target = sigma*mu*S^{-1} - X - X Rd S^{-1} (+ corrector term)
            h = rp - A_op(target)
            Mh = solve(h)
            dt = (d @ Mh - rf) / dMd
            dy = Mh - Md * dt
            AtdY = At_op(dy)
            dS = [r - a for r, a in zip(Rd, AtdY)]
            dX = []
            for tg, x, aty, si in zip(target, X, AtdY, Sinv):
                z = tg + x @ aty @ si
                dX.append(0.5 * (z + z.T))
            return dX, dt, dy, dS

        base = [-x - x @ r @ si for x, r, si in zip(X, Rd, Sinv)]
        dXa, dta, dya, dSa = direction(base)
        ap = min([1.0] + [_max_step(x, dx) for x, dx in zip(X, dXa)])
        ad = min([1.0] + [_max_step(s, ds) for s, ds in zip(S, dSa)])
        mu_aff = sum(float(np.sum((x + ap * dx) * (s + ad * ds)))
                     for x, dx, s, ds in zip(X, dXa, S, dSa)) / ntot
        sigma = min(1.0, max(0.0, (mu_aff / mu) ** 3)) if mu > 0 else 0.0
        target = [bs + sigma * mu * si - dxa @ dsa @ si
                  for bs, si, dxa, dsa in zip(base, Sinv, dXa, dSa)]
        dX, dt, dy, dS = direction(target)
        ap = min([1.0] + [opt.step_fraction * _max_step(x, dx) for x, dx in zip(X, dX)])
        ad = min([1.0] + [opt.step_fraction * _max_step(s, ds) for s, ds in zip(S, dS)])
        if not np.isfinite(ap) or not np.isfinite(ad) or (ap < 1e-12 and ad < 1e-12):
            status = "breakdown"
            break
        X = [x + ap * dx for x, dx in zip(X, dX)]
        X = [0.5 * (x + x.T) for x in X]
        t = t + ap * dt
        y = y + ad * dy
        S = [s + ad * ds for s, ds in zip(S, dS)]
        S = [0.5 * (s + s.T) for s in S]

    if best is not None and status != "optimal":
        _, it, X, t, y, S, rp_norm, rd_norm, gap = best
    mu_full = np.zeros(m_all)
    mu_full[keep] = -y
    logger.debug("margin sdp: status=%s it=%d t=%.3e rp=%.1e rd=%.1e gap=%.1e dropped=%d",
                 status, it, t, rp_norm, rd_norm, gap, len(dropped))
    return SDPResult(status, float(t), X, mu_full, S, it, float(rp_norm), float(rd_norm),
                     float(gap), keep)
