"""
Per-user covariance optimization and its optimality certificate.

The inner problem is the small SDP

    maximize    h^T S h
    subject to  h_j^T S h_j <= z_j^2,  tr(S) <= Pbar,  S >= 0,

solved through its dual

    minimize    sum_j lam_j z_j^2 + lam_t Pbar
    subject to  Z(lam) = sum_j lam_j h_j h_j^T + lam_t I - h h^T >= 0,  lam >= 0

with a log-barrier path-following method. A rank-one KKT point is then
polished with Newton's method on the active constraints; its duality gap
is certified against a dual point that is made exactly feasible.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .channel import Beamformer, InterferenceBudget, MisoNetwork, check_network
from .reduction import ReducedProblem, lift_solution, reduce_user_problem

__all__ = [
    "QcqpProblem", "SolveResult", "KktCertificate", "UserSolution",
    "PurificationError", "solve_reduced_sdp", "solve_power_split",
    "extract_beamformer", "certify_kkt", "solve_user", "full_problem",
    "dual_upper_bound", "purify_rank_one", "reduced_qcqp",
]

log = logging.getLogger(__name__)

GAP_TOL = 1e-9            # target gap, relative to (1 + value)
SEARCH_GAP_TOL = 1e-6     # barrier accuracy before polishing inside the P-bar search
RANK_RATIO_TOL = 1e-6     # second/first eigenvalue above which S is purified
KKT_TOL = 1e-7            # certificate residual tolerance, relative to (1 + value)
FEAS_TOL = 1e-9
ZERO_REL = 1e-14          # budgets / vectors below this (relative) count as zero


class PurificationError(RuntimeError):
    pass


@dataclass(frozen=True)
class QcqpProblem:
    h: np.ndarray
    hj: np.ndarray      # (k, n)
    z2: np.ndarray      # (k,), may hold inf
    Pbar: float

    def __init__(self, h, hj, z2, Pbar):
        h = np.atleast_1d(np.asarray(h, dtype=float))
        n = h.size
        z2 = np.atleast_1d(np.asarray(z2, dtype=float)).reshape(-1)
        hj = np.asarray(hj, dtype=float).reshape(z2.size if n == 0 else -1, n)
        if z2.size != hj.shape[0]:
            raise ValueError(f"{hj.shape[0]} constraint vectors but {z2.size} budgets")
        if np.any(np.isnan(z2)) or np.any(z2 < 0):
            raise ValueError("budgets must be nonnegative")
        if not Pbar >= 0:
            raise ValueError(f"trace budget must be nonnegative, got {Pbar}")
        object.__setattr__(self, "h", h)
        object.__setattr__(self, "hj", hj)
        object.__setattr__(self, "z2", z2)
        object.__setattr__(self, "Pbar", float(Pbar))

    @property
    def n(self) -> int:
        return self.h.size

    @property
    def k(self) -> int:
        return self.z2.size


@dataclass(frozen=True)
class SolveResult:
    problem: QcqpProblem
    S11: np.ndarray
    value: float
    lam: np.ndarray          # (k + 1,): constraint multipliers, then the trace multiplier
    dual_value: float
    duality_gap: float
    central: np.ndarray      # interior-point primal iterate (not rank-projected)
    polished: bool
    newton_steps: int = 0

    @property
    def lambda_trace(self) -> float:
        return float(self.lam[-1])


# ---------------------------------------------------------------------------
# problem preprocessing


@dataclass
class _Effective:
    """Problem restricted to the subspace that zero budgets leave open and
    normalized so that ||h|| = 1, ||h_j|| = 1 and the trace budget is 1."""

    V: np.ndarray            # n x d orthonormal basis
    h: np.ndarray            # (d,)
    G: np.ndarray            # (k', d) unit rows
    c: np.ndarray            # (k',) normalized budgets, all in (0, 1)
    index: np.ndarray        # positions of the kept constraints in the original problem
    hscale: float            # ||V^T h||^2
    gscale: np.ndarray       # ||V^T h_j||^2 of kept constraints
    eliminated: np.ndarray   # bool mask: zero-budget constraints (enforced by V)

    @property
    def d(self) -> int:
        return self.h.size


def _effective(p: QcqpProblem) -> _Effective:
    n = p.n
    norms2 = np.einsum("ij,ij->i", p.hj, p.hj) if p.k else np.zeros(0)
    vec_scale = max(float(p.h @ p.h), float(norms2.max(initial=0.0)), 1e-300)
    nonzero = norms2 > ZERO_REL * vec_scale
    finite = np.isfinite(p.z2)
    with np.errstate(invalid="ignore", divide="ignore"):
        reach = p.Pbar * norms2
        zero_budget = nonzero & finite & (p.z2 <= ZERO_REL * np.maximum(reach, 1e-300))

    V = np.eye(n)
    if np.any(zero_budget):
        A = p.hj[zero_budget]
        _, s, Vt = np.linalg.svd(A, full_matrices=True)
        rank = int(np.sum(s > 1e-12 * s[0]))
        V = Vt[rank:].T

    hr = V.T @ p.h
    Gr = p.hj @ V
    gn2 = np.einsum("ij,ij->i", Gr, Gr) if p.k else np.zeros(0)
    hscale = float(hr @ hr)
    keep = (~zero_budget & finite & (gn2 > ZERO_REL * vec_scale)
            & (p.z2 < p.Pbar * gn2))   # otherwise the trace cap already implies it
    idx = np.flatnonzero(keep)
    h_unit = hr / np.sqrt(hscale) if hscale > 0 else hr
    G = Gr[idx] / np.sqrt(gn2[idx])[:, None]
    c = p.z2[idx] / (p.Pbar * gn2[idx]) if p.Pbar > 0 else np.zeros(idx.size)
    return _Effective(V=V, h=h_unit, G=G, c=c, index=idx, hscale=hscale,
                      gscale=gn2[idx], eliminated=zero_budget)


# ---------------------------------------------------------------------------
# normalized solver: max h^T S h, g_j^T S g_j <= c_j, tr S <= 1


def _slack_matrix(h, G, y):
    k = G.shape[0]
    Z = (G.T * y[:k]) @ G + y[k] * np.eye(h.size) - np.outer(h, h)
    return (Z + Z.T) / 2


def _barrier(h, G, c, gap_tol, max_newton=400):
    """Dual log-barrier path following. Returns (y, S_central, steps)."""
    k, d = G.shape
    nu = d + k + 1
    cost = np.append(c, 1.0)
    y = np.append(np.ones(k), 2.0)
    t = max(1.0, nu / float(cost @ y))
    steps = 0

    def phi(yy):
        if np.any(yy <= 0):
            return np.inf
        Z = _slack_matrix(h, G, yy)
        try:
            L = np.linalg.cholesky(Z)
        except np.linalg.LinAlgError:
            return np.inf
        return t * float(cost @ yy) - 2.0 * np.sum(np.log(np.diag(L))) - np.sum(np.log(yy))

    while True:
        # centering
        for _ in range(60):
            Z = _slack_matrix(h, G, y)
            W = np.linalg.inv(Z)
            W = (W + W.T) / 2
            WG = W @ G.T                      # d x k
            M = G @ WG                        # k x k, g_i^T W g_j
            grad = t * cost - 1.0 / y
            grad[:k] -= np.diag(M)
            grad[k] -= np.trace(W)
            H = np.empty((k + 1, k + 1))
            H[:k, :k] = M * M
            H[:k, k] = H[k, :k] = np.einsum("ij,ij->j", WG, WG)
            H[k, k] = np.sum(W * W)
            H[np.diag_indices(k + 1)] += 1.0 / y ** 2
            try:
                dy = -np.linalg.solve(H, grad)
            except np.linalg.LinAlgError:
                dy = -np.linalg.lstsq(H, grad, rcond=None)[0]
            dec = -float(grad @ dy)
            steps += 1
            if dec / 2 <= 1e-10:
                break
            f0, s = phi(y), 1.0
            while True:
                f1 = phi(y + s * dy)
                if f1 <= f0 - 0.25 * s * dec or s < 1e-12:
                    break
                s *= 0.5
            if s < 1e-12:
                break
            y = y + s * dy
            if steps >= max_newton:
                break
        if nu / t <= gap_tol or steps >= max_newton:
            break
        t *= 10.0
    Z = _slack_matrix(h, G, y)
    S = np.linalg.inv(Z) / t
    return y, (S + S.T) / 2, steps


def _dual_bound(h, G, c, lam):
    """Smallest trace multiplier making Z >= 0, and the resulting dual objective."""
    lam = np.maximum(lam, 0.0)
    Z = _slack_matrix(h, G, lam)
    shift = max(0.0, -float(np.linalg.eigvalsh(Z)[0])) if h.size else 0.0
    lam = lam.copy()
    lam[-1] += shift
    return lam, float(lam[:-1] @ c + lam[-1])


def _feasible_scale(b, G, c):
    """Largest factor s <= 1 with (s b) feasible for the normalized problem."""
    s2 = 1.0
    bb = float(b @ b)
    if bb > 1.0:
        s2 = 1.0 / bb
    if G.shape[0]:
        q = (G @ b) ** 2
        with np.errstate(divide="ignore"):
            ratio = np.where(q > 0, c / np.where(q > 0, q, 1.0), np.inf)
        s2 = min(s2, float(ratio.min()))
    return np.sqrt(s2)


def _newton_kkt(h, G, c, b0, lam0, active, trace_active):
    """Newton's method on the KKT system of the rank-one problem.

    Unknowns: the beamformer, multipliers of the constraints in ``active``,
    and the trace multiplier if ``trace_active``. Returns ``(b, lam)`` or None.
    """
    k, d = G.shape
    a = active.size
    nvar = d + a + int(trace_active)
    Ga, ca = G[active], c[active]
    x = np.concatenate([b0, np.maximum(lam0[active], 1e-3),
                        [max(lam0[k], 1e-3)] if trace_active else []])

    def unpack(x):
        return x[:d], x[d:d + a], (x[d + a] if trace_active else 0.0)

    def residual(x):
        bb, la, lt = unpack(x)
        Gb = Ga @ bb
        F1 = Ga.T @ (la * Gb) + lt * bb - h * (h @ bb)
        F3 = [bb @ bb - 1.0] if trace_active else []
        return np.concatenate([F1, Gb ** 2 - ca, F3])

    for it in range(50):
        F = residual(x)
        nF = float(np.linalg.norm(F))
        if nF < 1e-15:
            break
        bb, la, lt = unpack(x)
        Gb = Ga @ bb
        J = np.zeros((nvar, nvar))
        J[:d, :d] = (Ga.T * la) @ Ga + lt * np.eye(d) - np.outer(h, h)
        J[:d, d:d + a] = Ga.T * Gb
        J[d:d + a, :d] = 2.0 * Gb[:, None] * Ga
        if trace_active:
            J[:d, d + a] = bb
            J[d + a, :d] = 2.0 * bb
        x_new = x + np.linalg.lstsq(J, -F, rcond=None)[0]
        if it > 5 and np.linalg.norm(residual(x_new)) >= nF:
            break
        x = x_new
    bb, la, lt = unpack(x)
    if not np.all(np.isfinite(x)) or np.linalg.norm(residual(x)) > 1e-10:
        return None
    if np.any(la < -1e-10) or lt < -1e-10:
        return None
    lam = np.zeros(k + 1)
    lam[active] = np.maximum(la, 0.0)
    lam[k] = max(lt, 0.0)
    return bb * _feasible_scale(bb, G, c), lam


def _certified(h, G, c, b, lam, gap_tol):
    """Dual-feasible multipliers and the gap they certify for ``b b^T``."""
    lam, dual = _dual_bound(h, G, c, lam)
    primal = float(h @ b) ** 2
    return lam, dual, dual - primal <= gap_tol * (1.0 + primal)


def _active_sets(k, first_active, first_trace):
    """Active-set guesses: the barrier's guess first, then all others."""
    first = (tuple(first_active.tolist()), bool(first_trace))
    yield first
    for mask in range(1 << k):
        act = tuple(j for j in range(k) if mask >> j & 1)
        for tr in (True, False):
            if (act, tr) != first and (act or tr):
                yield act, tr


def _polish(h, G, c, S, y, gap_tol):
    k = G.shape[0]
    lam_s, vec_s = np.linalg.eigh(S)
    b0 = np.sqrt(max(lam_s[-1], 0.0)) * vec_s[:, -1]
    if h @ b0 < 0:
        b0 = -b0
    slack = c - np.einsum("ij,jk,ik->i", G, S, G) if k else np.zeros(0)
    active = np.flatnonzero(slack < y[:k])
    trace_active = (1.0 - np.trace(S)) < y[k]
    for act, tr in _active_sets(k, active, trace_active):
        out = _newton_kkt(h, G, c, b0, y, np.array(act, dtype=int), tr)
        if out is None:
            continue
        b, lam = out
        lam, dual, ok = _certified(h, G, c, b, lam, gap_tol)
        if ok:
            return b, lam, dual
    return None


def _scaled_central(h, G, c, S):
    """Central iterate shrunk onto the feasible set (guards inexact centering)."""
    s = 1.0
    tr = float(np.trace(S))
    if tr > 1.0:
        s = 1.0 / tr
    if G.shape[0]:
        q = np.einsum("ij,jk,ik->i", G, S, G)
        with np.errstate(divide="ignore"):
            s = min(s, float(np.min(np.where(q > c, c / np.where(q > 0, q, 1.0), 1.0))))
    return s * S


def _solve_normalized(h, G, c, gap_tol, search=False, warm=None):
    """Return (S, lam, dual, central, polished, steps) for the normalized problem."""
    k, d = G.shape
    if d == 1:
        return _solve_scalar(h, G, c)
    if warm is not None:
        b0, lam0 = warm
        for act, tr in _active_sets(k, np.flatnonzero(lam0[:k] > 0), lam0[k] > 0):
            out = _newton_kkt(h, G, c, b0, lam0, np.array(act, dtype=int), tr)
            if out is None:
                continue
            b, lam = out
            lam, dual, ok = _certified(h, G, c, b, lam, gap_tol)
            if ok:
                S = np.outer(b, b)
                return S, lam, dual, S, True, 0
    steps = 0
    y = S_c = None
    for tol in ([SEARCH_GAP_TOL, gap_tol] if search else [gap_tol]):
        y, S_c, n_steps = _barrier(h, G, c, tol)
        steps += n_steps
        pol = _polish(h, G, c, S_c, y, gap_tol)
        if pol is not None:
            b, lam, dual = pol
            return np.outer(b, b), lam, dual, S_c, True, steps
    S_c = _scaled_central(h, G, c, S_c)
    lam, dual = _dual_bound(h, G, c, y)
    return S_c, lam, dual, S_c, False, steps


def _solve_scalar(h, G, c):
    """One-dimensional case: a linear program in the scalar s = S."""
    h2 = float(h[0] ** 2)
    g2 = G[:, 0] ** 2
    caps = np.where(g2 > 0, c / np.where(g2 > 0, g2, 1.0), np.inf)
    s = min(1.0, float(caps.min(initial=np.inf)))
    lam = np.zeros(G.shape[0] + 1)
    if s >= 1.0:
        lam[-1] = h2
    else:
        j = int(np.argmin(caps))
        lam[j] = h2 / g2[j]
    S = np.array([[s]])
    dual = float(lam[:-1] @ c + lam[-1])
    return S, lam, dual, S, True, 0


def solve_reduced_sdp(p: QcqpProblem, gap_tol: float = GAP_TOL,
                      search: bool = False,
                      warm: SolveResult | None = None) -> SolveResult:
    """Solve the small SDP and return primal, multipliers and certified gap.

    ``search=True`` polishes from a coarse barrier iterate first and skips
    the high-accuracy central iterate when that already certifies.
    ``warm`` seeds the KKT Newton polish from a neighbouring solve; it is only
    accepted when its duality gap certifies.
    """
    n, k = p.n, p.k
    eff = _effective(p)
    lam = np.zeros(k + 1)
    if n == 0 or eff.d == 0 or eff.hscale <= ZERO_REL * max(float(p.h @ p.h), 1e-300) \
            or p.Pbar <= 0:
        # nothing to gain: S = 0; lam_t = ||V^T h||^2 keeps the dual feasible
        lam[k] = eff.hscale
        Z0 = np.zeros((n, n))
        dual = lam[k] * p.Pbar
        return SolveResult(p, Z0, 0.0, lam, dual, dual, Z0, True)

    V, scale = eff.V, eff.hscale * p.Pbar
    warm_n = None
    if warm is not None and warm.value > 0 and warm.S11.shape == (n, n):
        b, _ = _dominant_factor(warm.S11)
        tr = float(b @ b)
        if tr > 0:
            b_n = V.T @ b / np.sqrt(tr)
            lam_w = np.append(warm.lam[eff.index] * eff.gscale, warm.lam[k]) / eff.hscale
            warm_n = (_orient(b_n, eff.h), lam_w)

    S_n, lam_n, dual_n, central_n, polished, steps = _solve_normalized(
        eff.h, eff.G, eff.c, gap_tol=0.1 * gap_tol / max(1.0, scale),
        search=search, warm=warm_n)

    S = p.Pbar * (V @ S_n @ V.T)
    central = p.Pbar * (V @ central_n @ V.T)
    lam[eff.index] = lam_n[:-1] * eff.hscale / eff.gscale
    lam[k] = lam_n[-1] * eff.hscale
    value = float(p.h @ S @ p.h)
    dual = dual_n * scale
    return SolveResult(p, (S + S.T) / 2, value, lam, dual, max(dual - value, 0.0),
                       (central + central.T) / 2, polished, steps)


def dual_upper_bound(p: QcqpProblem, lam: np.ndarray) -> float:
    """Rigorous upper bound on the optimal value from any multipliers.

    Zero-budget constraints are handled by restriction to the subspace they
    leave open, which describes the same feasible set.
    """
    eff = _effective(p)
    if eff.d == 0 or p.Pbar <= 0:
        return 0.0
    lam = np.asarray(lam, dtype=float)
    lam_n = np.append(lam[eff.index] * eff.gscale, lam[-1]) / max(eff.hscale, 1e-300)
    if eff.hscale <= 0:
        return 0.0
    _, dual_n = _dual_bound(eff.h, eff.G, eff.c, lam_n)
    return dual_n * eff.hscale * p.Pbar


# ---------------------------------------------------------------------------
# KKT certificate


@dataclass(frozen=True)
class KktCertificate:
    C: np.ndarray
    eigenvalues: np.ndarray          # ascending
    inertia: tuple[int, int]         # (positive, negative)
    stationarity: float              # ||S (C + lam_t I)||_F
    slackness: np.ndarray            # |lam_j (h_j^T S h_j - z_j^2)|, trace last
    primal_violation: float
    dual_violation: float
    lambda_trace: float
    verdict: str
    reasons: tuple[str, ...] = ()

    @property
    def passed(self) -> bool:
        return self.verdict == "pass"

    def to_dict(self) -> dict:
        return {"verdict": self.verdict, "reasons": list(self.reasons),
                "inertia": list(self.inertia),
                "eigenvalues": self.eigenvalues.tolist(),
                "stationarity_residual": self.stationarity,
                "slackness_residuals": self.slackness.tolist(),
                "primal_violation": self.primal_violation,
                "dual_violation": self.dual_violation,
                "lambda_trace": self.lambda_trace}


def _count_inertia(eigs: np.ndarray) -> tuple[int, int]:
    scale = float(np.max(np.abs(eigs), initial=0.0))
    thr = 1e-10 * scale
    return int(np.sum(eigs > thr)), int(np.sum(eigs < -thr))


def certify_kkt(p: QcqpProblem, res: SolveResult, tol: float = KKT_TOL) -> KktCertificate:
    """Check first-order optimality of ``res`` and the inertia structure of C.

    ``C = -h h^T + sum_j lam_j h_j h_j^T``. Zero-budget constraints are
    enforced by restricting to the subspace orthogonal to their vectors; all
    matrices below live in that subspace.
    """
    eff = _effective(p)
    lam = np.asarray(res.lam, dtype=float)
    k = p.k
    lam_c, lam_t = lam[:k], float(lam[k])
    finite = np.isfinite(p.z2)
    Cfull = -np.outer(p.h, p.h) + (p.hj.T * np.where(finite, lam_c, 0.0)) @ p.hj
    V = eff.V
    C = V.T @ Cfull @ V
    C = (C + C.T) / 2
    S = res.S11
    Sr = V.T @ S @ V
    scale = 1.0 + abs(res.value)
    reasons = []

    eigs = np.linalg.eigvalsh(C) if C.size else np.zeros(0)
    pos, neg = _count_inertia(eigs)
    if pos > k:
        reasons.append(f"positive inertia {pos} exceeds {k}")
    if neg > 1:
        reasons.append(f"negative inertia {neg} exceeds 1")
    # C can cancel to zero exactly, so measure the ordering against its terms
    terms = float(p.h @ p.h) + float(np.sum(np.where(finite, lam_c, 0.0) * np.sum(p.hj ** 2, axis=1)))
    thr = 1e-10 * max(terms, float(np.max(np.abs(eigs), initial=0.0)))
    if eigs.size and res.value > 0 and eigs[0] > thr:
        reasons.append("smallest eigenvalue of C is positive")
    if eigs.size > 1 and eigs[1] < -thr:
        reasons.append("second eigenvalue of C is negative")

    Z = C + lam_t * np.eye(C.shape[0])
    stationarity = float(np.linalg.norm(Sr @ Z)) if Z.size else 0.0
    if stationarity > tol * scale:
        reasons.append(f"stationarity residual {stationarity:.3e}")

    quad = np.einsum("ij,jk,ik->i", p.hj, S, p.hj) if k else np.zeros(0)
    cs = np.zeros(k + 1)
    cs[:k] = np.where(finite, np.abs(lam_c * (quad - np.where(finite, p.z2, 0.0))), 0.0)
    cs[k] = abs(lam_t * (np.trace(S) - p.Pbar))
    if np.any(cs > tol * scale):
        reasons.append(f"complementary slackness residual {cs.max():.3e}")

    viol = [float(np.trace(S) - p.Pbar)]
    if k:
        viol.append(float(np.max(np.where(finite, quad - np.where(finite, p.z2, 0.0), -np.inf))))
    if S.size:
        # PSD up to 1e-10 * trace, and no mass outside the open subspace
        viol.append(-float(np.linalg.eigvalsh(S)[0]) - 1e-10 * max(float(np.trace(S)), 0.0))
        viol.append(float(np.linalg.norm(S - V @ Sr @ V.T)))
    primal_violation = max(viol)
    if primal_violation > FEAS_TOL * scale:
        reasons.append(f"primal infeasibility {primal_violation:.3e}")

    dual_violation = max(-float(lam.min(initial=0.0)),
                         -float(np.linalg.eigvalsh(Z)[0]) if Z.size else 0.0)
    if dual_violation > tol * scale:
        reasons.append(f"dual infeasibility {dual_violation:.3e}")

    if lam_t > tol * scale and Z.size:
        zeig = np.linalg.eigvalsh(Z)
        zthr = 1e-10 * float(np.max(np.abs(zeig)))
        if int(np.sum(np.abs(zeig) > zthr)) < Z.shape[0] - 1:
            reasons.append("rank(C + lam_t I) below dim - 1")

    return KktCertificate(C=C, eigenvalues=eigs, inertia=(pos, neg),
                          stationarity=stationarity, slackness=cs,
                          primal_violation=primal_violation,
                          dual_violation=dual_violation, lambda_trace=lam_t,
                          verdict="fail" if reasons else "pass",
                          reasons=tuple(reasons))


# ---------------------------------------------------------------------------
# power split and beamformer extraction


def reduced_qcqp(red: ReducedProblem, Pbar: float) -> QcqpProblem:
    return QcqpProblem(red.h, red.hj, red.z2, Pbar)


def _split_objective(value: float, h_hat2: float, P: float, Pbar: float) -> float:
    return (np.sqrt(max(value, 0.0)) + np.sqrt(h_hat2 * max(P - Pbar, 0.0))) ** 2


def solve_power_split(red: ReducedProblem, tol: float = 1e-9,
                      gap_tol: float = GAP_TOL) -> tuple[float, SolveResult]:
    """Maximize ``(sqrt(v(Pbar)) + ||h_hat|| sqrt(P - Pbar))^2`` over ``Pbar``.

    ``v`` is concave, so the square root of the objective is concave and a
    golden-section search on ``[0, P]`` finds the maximizer.
    """
    P, hh2 = red.P, red.h_hat_norm2
    if hh2 <= 0.0 or red.dim == 0:
        Pbar = P if red.dim else 0.0
        return Pbar, solve_reduced_sdp(reduced_qcqp(red, Pbar), gap_tol)

    cache: dict[float, float] = {}
    last: list[SolveResult] = []

    def f(x: float) -> float:
        if x not in cache:
            res = solve_reduced_sdp(reduced_qcqp(red, x), gap_tol, search=True,
                                    warm=last[0] if last else None)
            last[:] = [res]
            cache[x] = _split_objective(res.value, hh2, P, x)
        return cache[x]

    invphi = (np.sqrt(5.0) - 1.0) / 2.0
    a, b = 0.0, P
    x1, x2 = b - invphi * (b - a), a + invphi * (b - a)
    f1, f2 = f(x1), f(x2)
    while b - a > tol * P:
        if f1 >= f2:
            b, x2, f2 = x2, x1, f1
            x1 = b - invphi * (b - a)
            f1 = f(x1)
        else:
            a, x1, f1 = x1, x2, f2
            x2 = a + invphi * (b - a)
            f2 = f(x2)
    candidates = [(f(0.0), 0.0), (f(P), P), (f1, x1), (f2, x2)]
    best = max(candidates, key=lambda fx: fx[0])[1]
    return best, solve_reduced_sdp(reduced_qcqp(red, best), gap_tol)


def purify_rank_one(p: QcqpProblem, S: np.ndarray, max_rounds: int = 10) -> np.ndarray:
    """Lower the rank of an optimal ``S`` keeping objective and active constraints.

    Each round finds a symmetric direction ``D`` in the range of ``S`` that is
    orthogonal to the objective and the active constraints and steps to the
    boundary of the PSD cone. Raises :class:`PurificationError` when no such
    direction exists before rank one is reached.
    """
    S = (np.asarray(S, dtype=float) + np.asarray(S, dtype=float).T) / 2
    value = float(p.h @ S @ p.h)
    for _ in range(max_rounds):
        w, Q = np.linalg.eigh(S)
        if w[-1] <= 0:
            return np.zeros_like(S)
        keep = w > RANK_RATIO_TOL * w[-1]
        r = int(keep.sum())
        if r <= 1:
            return w[-1] * np.outer(Q[:, -1], Q[:, -1])
        R = Q[:, keep] * np.sqrt(w[keep])           # S ~= R R^T
        scale = 1.0 + value
        vecs = [p.h]
        for j in range(p.k):
            if np.isfinite(p.z2[j]) and p.z2[j] - p.hj[j] @ S @ p.hj[j] <= 1e-9 * scale:
                vecs.append(p.hj[j])
        rows = []
        iu = np.triu_indices(r)
        for a in vecs:
            u = R.T @ a
            E = np.outer(u, u)
            E = 2 * E - np.diag(np.diag(E))
            rows.append(E[iu])
        if p.Pbar - np.trace(S) <= 1e-9 * max(1.0, p.Pbar):
            E = R.T @ R
            E = 2 * E - np.diag(np.diag(E))
            rows.append(E[iu])
        A = np.array(rows)
        _, sv, Vt = np.linalg.svd(A)
        rank = int(np.sum(sv > 1e-10 * max(sv[0], 1e-300)))
        if rank >= Vt.shape[0]:
            raise PurificationError(f"no rank-reducing direction at rank {r}")
        D = np.zeros((r, r))
        D[iu] = Vt[rank]
        D = D + D.T - np.diag(np.diag(D))
        ev = np.linalg.eigvalsh(D)
        if ev[-1] <= 0:
            D, ev = -D, -ev[::-1]
        S = R @ (np.eye(r) - D / ev[-1]) @ R.T
        S = (S + S.T) / 2
        if p.k and np.any(np.einsum("ij,jk,ik->i", p.hj, S, p.hj) > p.z2 + FEAS_TOL * scale):
            raise PurificationError("rank reduction broke an inactive constraint")
        if np.trace(S) > p.Pbar + FEAS_TOL * max(1.0, p.Pbar):
            raise PurificationError("rank reduction broke the trace constraint")
    raise PurificationError("rank reduction did not converge")


def _dominant_factor(S: np.ndarray) -> tuple[np.ndarray, float]:
    w, Q = np.linalg.eigh((S + S.T) / 2)
    if w.size == 0 or w[-1] <= 1e-300:
        return np.zeros(S.shape[0]), 0.0
    ratio = max(w[-2], 0.0) / w[-1] if w.size > 1 else 0.0
    return np.sqrt(w[-1]) * Q[:, -1], ratio


def _orient(b: np.ndarray, ref: np.ndarray) -> np.ndarray:
    s = float(ref @ b)
    if s < 0 or s == 0 and b[np.flatnonzero(np.abs(b) > 0)[:1]].sum() < 0:
        return -b
    return b


def _extract(res: SolveResult, red: ReducedProblem) -> tuple[Beamformer, str]:
    S11 = res.S11
    b_red, ratio = _dominant_factor(S11)
    if ratio > RANK_RATIO_TOL:
        S11 = purify_rank_one(res.problem, S11)
        b_red, ratio = _dominant_factor(S11)
    b_red = _orient(b_red, red.h)
    lifted = lift_solution(red, np.outer(b_red, b_red))
    b, _ = _dominant_factor(lifted.S)
    direct = red.lift @ np.concatenate([red.h, red.h_hat])
    return Beamformer(red.user, _orient(b, direct)), lifted.case


def extract_beamformer(res: SolveResult, red: ReducedProblem) -> Beamformer:
    """Rank-one factor of the reduced optimum, completed and rotated back.

    Purifies first when the second eigenvalue of ``S11`` exceeds
    ``1e-6`` times the first; raises :class:`PurificationError` if that fails.
    """
    return _extract(res, red)[0]


# ---------------------------------------------------------------------------
# full per-user pipeline


@dataclass(frozen=True)
class UserSolution:
    beamformer: Beamformer
    signal: float
    certificate: KktCertificate
    Pbar: float
    result: SolveResult
    reduced: ReducedProblem
    case: str
    interference: np.ndarray = field(repr=False)   # realized, constraint order

    @property
    def value(self) -> float:
        return self.signal


def full_problem(net: MisoNetwork, user: int, budget: InterferenceBudget) -> QcqpProblem:
    """The per-user problem in its original ``t``-dimensional coordinates."""
    others = [j for j in range(net.m) if j != user]
    hj = np.array([net.h[user][j] for j in others]).reshape(len(others), net.t[user])
    return QcqpProblem(net.h[user][user], hj, budget.for_user(user), net.P[user])


def solve_user(net: MisoNetwork, user: int, budget: InterferenceBudget,
               gap_tol: float = GAP_TOL) -> UserSolution:
    """Best beamformer for ``user`` under its interference budgets."""
    check_network(net)
    red = reduce_user_problem(net, user, budget)
    Pbar, res = solve_power_split(red, gap_tol=gap_tol)
    cert = certify_kkt(res.problem, res)
    reasons = list(cert.reasons)
    case = "n/a"
    try:
        bf, case = _extract(res, red)
    except PurificationError as exc:
        log.warning("user %d: %s", user + 1, exc)
        reasons.append(f"purification failed: {exc}")
        b_red, _ = _dominant_factor(res.S11)
        fp = full_problem(net, user, budget)
        b = red.lift[:, :red.dim] @ b_red
        G = fp.hj
        scale = 1.0
        if b @ b > fp.Pbar:
            scale = min(scale, np.sqrt(fp.Pbar / (b @ b)))
        for j in range(fp.k):
            q = float(G[j] @ b) ** 2
            if q > 0 and np.isfinite(fp.z2[j]):
                scale = min(scale, np.sqrt(fp.z2[j] / q))
        bf = Beamformer(user, scale * b)

    b = bf.b
    hm = net.h[user][user]
    signal = float(hm @ b) ** 2
    others = red.others
    interference = np.array([float(net.h[user][j] @ b) ** 2 for j in others])
    z2 = red.z2
    over = interference - z2
    if np.any(over > FEAS_TOL * (1.0 + np.where(np.isfinite(z2), z2, 0.0))):
        reasons.append(f"realized interference exceeds budget by {over.max():.3e}")
    if b @ b > net.P[user] * (1 + 1e-12) + 1e-12:
        reasons.append("beamformer exceeds the power budget")
    target = _split_objective(res.value, red.h_hat_norm2, red.P, float(np.trace(res.S11)))
    if abs(signal - target) > 1e-7 * max(1.0, target):
        reasons.append(f"lifted signal {signal} differs from reduced objective {target}")
    if len(reasons) != len(cert.reasons):
        cert = KktCertificate(**{**cert.__dict__, "verdict": "fail",
                                 "reasons": tuple(reasons)})
    return UserSolution(bf, signal, cert, Pbar, res, red, case, interference)
