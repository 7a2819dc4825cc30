"""
Block completion of a PSD matrix with a prescribed upper-left block.

Given ``K11 >= 0``, a trace budget ``P`` and probe vectors ``x``, ``y``, the
quadratic form ``[x; y]^T K [x; y]`` over all PSD completions ``K`` with
``tr(K) <= P`` is at most

    (sqrt(x^T K11 x) + ||y|| sqrt(P - tr K11))^2

and the completions built here attain it with
``rank(K) <= max(rank(K11), 1)``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Literal

import numpy as np

__all__ = ["CompletionInput", "CompletionResult", "completion_bound",
           "complete_matrix", "psd_sqrt_factor"]

Case = Literal["aligned", "degenerate-x", "zero-y"]

PSD_TOL = 1e-10
TRACE_TOL = 1e-12
DISPATCH_TOL = 1e-12
EIG_CUTOFF = 1e-12


@dataclass(frozen=True)
class CompletionInput:
    x: np.ndarray
    y: np.ndarray
    K11: np.ndarray
    P: float

    def __post_init__(self):
        x = np.atleast_1d(np.asarray(self.x, dtype=float))
        y = np.atleast_1d(np.asarray(self.y, dtype=float))
        K11 = np.asarray(self.K11, dtype=float).reshape(x.size, x.size)
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "K11", (K11 + K11.T) / 2)
        object.__setattr__(self, "P", float(self.P))

    def check(self) -> None:
        tr = float(np.trace(self.K11))
        if tr > self.P + TRACE_TOL * max(1.0, abs(self.P)):
            raise ValueError(f"tr(K11)={tr} exceeds the trace budget P={self.P}")
        if self.K11.size and np.linalg.eigvalsh(self.K11)[0] < -PSD_TOL * max(tr, 1e-300):
            raise ValueError("K11 is not positive semidefinite")

    @property
    def residual_power(self) -> float:
        return max(self.P - float(np.trace(self.K11)), 0.0)


@dataclass(frozen=True)
class CompletionResult:
    K: np.ndarray
    case: Case
    bound: float

    def blocks(self, t1: int):
        return self.K[:t1, :t1], self.K[t1:, :t1], self.K[t1:, t1:]


def _quad(inp: CompletionInput) -> float:
    # ||F x||^2 rather than x^T K11 x: exact zero for x in the truncated null
    # space, where the square root in the bound would amplify rounding noise
    if inp.x.size == 0:
        return 0.0
    Fx = psd_sqrt_factor(inp.K11) @ inp.x
    return float(Fx @ Fx)


def completion_bound(inp: CompletionInput) -> float:
    inp.check()
    q = _quad(inp)
    return (np.sqrt(q) + np.linalg.norm(inp.y) * np.sqrt(inp.residual_power)) ** 2


def psd_sqrt_factor(K11: np.ndarray) -> np.ndarray:
    """Factor ``F`` with ``F^T F = K11``.

    Rows are ``sqrt(lam_k) q_k^T`` with eigenvalues in descending order and
    each eigenvector's first nonzero entry made positive; rows for
    eigenvalues below ``1e-12 * lam_max`` are zero.
    """
    K11 = np.asarray(K11, dtype=float)
    K11 = (K11 + K11.T) / 2
    n = K11.shape[0]
    if n == 0:
        return np.zeros((0, 0))
    lam, V = np.linalg.eigh(K11)
    lam, V = lam[::-1], V[:, ::-1]
    scale = max(lam[0], 0.0)
    if lam[-1] < -PSD_TOL * max(np.trace(K11), scale, 1e-300):
        raise ValueError("matrix is indefinite")
    F = np.zeros((n, n))
    for k in range(n):
        if scale == 0.0 or lam[k] <= EIG_CUTOFF * scale:
            break
        v = V[:, k]
        lead = v[np.flatnonzero(np.abs(v) > 1e-14)[0]]
        F[k] = np.sqrt(lam[k]) * np.sign(lead) * v
    return F


def complete_matrix(inp: CompletionInput) -> CompletionResult:
    """Build the bound-attaining completion ``K*``.

    Case ``aligned`` (x^T K11 x > 0, y != 0) couples the new block to
    ``K11 x``; ``degenerate-x`` (x^T K11 x = 0) couples it to the dominant
    square-root row of ``K11``, which is orthogonal to ``x``; ``zero-y``
    leaves the new block empty.
    """
    inp.check()
    x, y, K11 = inp.x, inp.y, inp.K11
    t1, t2 = x.size, y.size
    tr = float(np.trace(K11))
    zero_tol = DISPATCH_TOL * (1.0 + tr)
    q = _quad(inp)
    ny2 = float(y @ y)
    rest = inp.residual_power
    bound = completion_bound(inp)

    K = np.zeros((t1 + t2, t1 + t2))
    K[:t1, :t1] = K11
    if ny2 <= zero_tol:
        return CompletionResult(K, "zero-y", bound)

    ny = np.sqrt(ny2)
    K[t1:, t1:] = (rest / ny2) * np.outer(y, y)
    if q > zero_tol:
        coef = np.sqrt(rest) / (ny * np.sqrt(q))
        K21 = coef * np.outer(y, K11 @ x)
        case: Case = "aligned"
    else:
        F = psd_sqrt_factor(K11)
        lead_row = F[0] if t1 else np.zeros(0)
        # x^T F[0] is zero up to the dispatch tolerance; keep its sign nonnegative
        if lead_row @ x < 0:
            lead_row = -lead_row
        K21 = (np.sqrt(rest) / ny) * np.outer(y, lead_row)
        case = "degenerate-x"
    K[t1:, :t1] = K21
    K[:t1, t1:] = K21.T
    return CompletionResult(K, case, bound)
