"""
Orthogonal reduction of one user's beamforming problem.

For user ``u`` with ``t`` antennas and ``m - 1`` interference constraints,
successive Householder reflections rotate the k-th constraint vector so
that only its first ``k`` coordinates are nonzero. Every constraint then
lives in the leading ``mbar = min(t, m - 1)`` coordinates, and the direct
channel splits into a coupled part ``h`` and an interference-free residual
``h_hat`` whose power can be handed out with the block completion.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .channel import InterferenceBudget, MisoNetwork, check_network
from .completion import CompletionInput, complete_matrix

__all__ = ["ReducedProblem", "householder_to_axis", "reduce_user_problem",
           "lift_solution", "LiftedSolution"]


@dataclass(frozen=True)
class ReducedProblem:
    user: int
    dim: int
    h: np.ndarray            # reduced direct channel, length dim
    h_hat: np.ndarray        # residual direct channel, length t - dim
    hj: np.ndarray           # (m-1, dim) reduced constraint vectors
    z2: np.ndarray           # (m-1,) budgets, same order as hj
    P: float
    lift: np.ndarray         # t x t orthogonal, original = lift @ rotated
    others: tuple[int, ...]  # receiver index of each constraint

    @property
    def h_hat_norm2(self) -> float:
        return float(self.h_hat @ self.h_hat)

    @property
    def t(self) -> int:
        return self.lift.shape[0]


def householder_to_axis(v: np.ndarray) -> np.ndarray:
    """Orthogonal ``U`` with ``U.T @ v = (||v||, 0, ..., 0)``; identity for ``v = 0``."""
    v = np.asarray(v, dtype=float)
    n = v.size
    U = np.eye(n)
    scale = np.abs(v).max(initial=0.0)
    if scale == 0.0 or n == 1 and v[0] >= 0:
        return U
    # the reflector is scale invariant; normalizing avoids underflow in the norm
    v = v / scale
    nv = np.linalg.norm(v)
    if n == 1:
        return -U
    s = 1.0 if v[0] >= 0 else -1.0
    u = v.copy()
    u[0] += s * nv
    H = U - 2.0 * np.outer(u, u) / (u @ u)
    # H v = -s ||v|| e1; flipping the first column restores a nonnegative lead
    H[:, 0] *= -s
    return H


def reduce_user_problem(net: MisoNetwork, user: int,
                        budget: InterferenceBudget) -> ReducedProblem:
    check_network(net)
    m, t = net.m, net.t[user]
    others = tuple(j for j in range(m) if j != user)
    z2 = budget.for_user(user)
    cons = np.array([net.h[user][j] for j in others]).reshape(len(others), t)
    direct = np.array(net.h[user][user])
    dim = min(t, m - 1)
    lift = np.eye(t)

    if t > m - 1:
        for k in range(m - 1):
            # rotate coordinates k.. of the current k-th constraint onto axis k
            sub = cons[k, k:]
            U = householder_to_axis(sub)
            cons[:, k:] = cons[:, k:] @ U
            direct[k:] = U.T @ direct[k:]
            lift[:, k:] = lift[:, k:] @ U
            cons[k, k + 1:] = 0.0

    return ReducedProblem(
        user=user, dim=dim, h=direct[:dim].copy(), h_hat=direct[dim:].copy(),
        hj=cons[:, :dim].copy(), z2=np.asarray(z2, dtype=float),
        P=float(net.P[user]), lift=lift, others=others)


@dataclass(frozen=True)
class LiftedSolution:
    S: np.ndarray        # full t x t covariance in original coordinates
    case: str            # completion case used
    signal: float        # h_uu^T S h_uu
    bound: float         # completion bound in rotated coordinates


def lift_solution(red: ReducedProblem, S11: np.ndarray,
                  power_used: float | None = None) -> LiftedSolution:
    """Complete a reduced covariance with the residual channel and rotate back.

    Whatever power ``S11`` leaves unused goes along ``h_hat``.
    """
    S11 = np.asarray(S11, dtype=float).reshape(red.dim, red.dim)
    tr = float(np.trace(S11))
    if power_used is not None and abs(power_used - tr) > 1e-9 * max(1.0, red.P):
        raise ValueError(f"power_used={power_used} disagrees with tr(S11)={tr}")
    inp = CompletionInput(x=red.h, y=red.h_hat, K11=S11, P=red.P)
    res = complete_matrix(inp)   # raises on trace/PSD violations
    S = red.lift @ res.K @ red.lift.T
    S = (S + S.T) / 2
    direct = red.lift @ np.concatenate([red.h, red.h_hat])
    return LiftedSolution(S=S, case=res.case, signal=float(direct @ S @ direct),
                          bound=res.bound)
