"""
Independent checks: sampling oracles, random instances and inertia counts.

Nothing here calls the solver; these routines only produce lower bounds
(by sampling feasible points) and property checks to hold it against.
"""

from __future__ import annotations

import zlib
from typing import NamedTuple

import numpy as np

from .channel import InterferenceBudget, MisoNetwork

__all__ = ["stream", "brute_force_user", "brute_force_qcqp",
           "random_feasible_covariances", "random_beamformers",
           "random_beamformer_rates", "InertiaCount",
           "inertia", "check_lemma3", "random_network", "random_budget",
           "random_completion_input", "random_completion"]

INERTIA_ZERO = 1e-10


def stream(seed: int, name: str) -> np.random.Generator:
    """Independent, reproducible generator for operation ``name`` under ``seed``."""
    ss = np.random.SeedSequence(entropy=int(seed) % 2 ** 64,
                                spawn_key=(zlib.crc32(name.encode()),))
    return np.random.Generator(np.random.PCG64(ss))


def _sphere(rng: np.random.Generator, n: int, dim: int) -> np.ndarray:
    x = rng.standard_normal((n, dim))
    return x / np.linalg.norm(x, axis=1, keepdims=True)


def brute_force_qcqp(h, hj, z2, P, samples: int, seed: int = 0,
                     chunk: int = 20000) -> float:
    """Best ``(h^T b)^2`` over random directions, each scaled to the largest
    feasible length under ``(h_j^T b)^2 <= z_j^2`` and ``||b||^2 <= P``."""
    h = np.asarray(h, dtype=float)
    hj = np.asarray(hj, dtype=float).reshape(-1, h.size)
    z2 = np.asarray(z2, dtype=float).reshape(-1)
    rng = stream(seed, "brute_force")
    best = 0.0
    done = 0
    while done < samples:
        n = min(chunk, samples - done)
        U = _sphere(rng, n, h.size)
        scale2 = np.full(n, float(P))
        if hj.shape[0]:
            q = (U @ hj.T) ** 2
            with np.errstate(divide="ignore", invalid="ignore"):
                caps = np.where(q > 0, z2 / q, np.inf)
            scale2 = np.minimum(scale2, caps.min(axis=1))
        best = max(best, float(np.max(scale2 * (U @ h) ** 2)))
        done += n
    return best


def brute_force_user(net: MisoNetwork, user: int, budget: InterferenceBudget,
                     samples: int = 100_000, seed: int = 0) -> float:
    others = [j for j in range(net.m) if j != user]
    hj = np.array([net.h[user][j] for j in others]).reshape(len(others), net.t[user])
    return brute_force_qcqp(net.h[user][user], hj, budget.for_user(user),
                            net.P[user], samples, seed)


def random_feasible_covariances(net: MisoNetwork, seed: int) -> list[np.ndarray]:
    """``S_i = A_i^T A_i`` rescaled to trace ``u_i P_i`` with ``u_i ~ U[0, 1]``."""
    rng = stream(seed, "random_covariances")
    out = []
    for i in range(net.m):
        A = rng.standard_normal((net.t[i], net.t[i]))
        S = A.T @ A
        S *= rng.uniform() * net.P[i] / np.trace(S)
        out.append(S)
    return out


def random_beamformers(net: MisoNetwork, n: int, seed: int) -> list[np.ndarray]:
    """``n`` random beamformers per user: uniform direction, power ``u P_i``."""
    rng = stream(seed, "random_beamformers")
    out = []
    for i in range(net.m):
        U = _sphere(rng, n, net.t[i])
        out.append(U * np.sqrt(rng.uniform(size=(n, 1)) * net.P[i]))
    return out


def random_beamformer_rates(net: MisoNetwork, n: int, seed: int) -> np.ndarray:
    """Rate points ``(n, m)`` of :func:`random_beamformers` draws."""
    B = random_beamformers(net, n, seed)
    power = np.stack([(B[i] @ net.matrix(i)) ** 2 for i in range(net.m)], axis=1)
    signal = np.einsum("nii->ni", power)
    interference = power.sum(axis=1) - signal
    return 0.5 * np.log2(1.0 + signal / (1.0 + interference))


class InertiaCount(NamedTuple):
    positive: int
    negative: int


def inertia(A: np.ndarray) -> InertiaCount:
    """Counts of positive and negative eigenvalues; ``|eta| <= 1e-10 ||A||`` is zero."""
    A = np.asarray(A, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError("inertia needs a square matrix")
    if not np.allclose(A, A.T, atol=1e-12 * (1.0 + np.abs(A).max(initial=0.0))):
        raise ValueError("inertia needs a symmetric matrix")
    if A.size == 0:
        return InertiaCount(0, 0)
    eigs = np.linalg.eigvalsh((A + A.T) / 2)
    thr = INERTIA_ZERO * float(np.max(np.abs(eigs)))
    return InertiaCount(int(np.sum(eigs > thr)), int(np.sum(eigs < -thr)))


def check_lemma3(H: np.ndarray, A: np.ndarray) -> bool:
    """``pi(H A H^T) <= pi(A)`` and ``nu(H A H^T) <= nu(A)``."""
    H = np.asarray(H, dtype=float)
    inner = inertia(A)
    outer = inertia(H @ A @ H.T)
    return outer.positive <= inner.positive and outer.negative <= inner.negative


# ---------------------------------------------------------------------------
# random instances


def random_network(rng: np.random.Generator, m: int, t, P=None) -> MisoNetwork:
    """Standard-normal channels; ``t`` is an int or per-user sequence."""
    t = [int(t)] * m if np.isscalar(t) else [int(v) for v in t]
    if P is None:
        P = rng.uniform(0.5, 2.0, size=m)
    h = [[rng.standard_normal(t[j]) for _ in range(m)] for j in range(m)]
    return MisoNetwork(t, h, P)


def random_budget(rng: np.random.Generator, net: MisoNetwork,
                  low: float = 1e-3) -> InterferenceBudget:
    """Finite budgets, log-uniform in ``[low, 1]`` times the largest realizable value."""
    m = net.m
    z2 = np.full((m, m), np.inf)
    for i in range(m):
        for j in range(m):
            if i != j:
                U = net.P[i] * float(net.h[i][j] @ net.h[i][j])
                z2[i, j] = U * np.exp(rng.uniform(np.log(low), 0.0))
    return InterferenceBudget(z2)


def random_completion_input(rng: np.random.Generator):
    """Random probe vectors, PSD block of random rank (possibly 0 or 1), budget."""
    from .completion import CompletionInput

    t1 = int(rng.integers(1, 5))
    t2 = int(rng.integers(1, 4))
    r = int(rng.integers(0, t1 + 1))
    A = rng.standard_normal((t1, r))
    K11 = A @ A.T
    P = float(np.trace(K11)) * rng.uniform(1.0, 3.0) + rng.uniform(0.0, 1.0)
    x = rng.standard_normal(t1)
    y = rng.standard_normal(t2)
    roll = rng.uniform()
    if roll < 0.1:
        y = np.zeros(t2)
    elif roll < 0.2 and r < t1:
        # x in the null space of K11
        if r:
            x = x - A @ np.linalg.lstsq(A, x, rcond=None)[0]
    return CompletionInput(x=x, y=y, K11=K11, P=P)


def random_completion(rng: np.random.Generator, inp) -> np.ndarray:
    """A random PSD completion of ``inp.K11`` with trace at most ``inp.P``.

    ``K = [F; B] [F; B]^T + diag(0, C C^T)`` with ``F F^T = K11``.
    """
    t1, t2 = inp.x.size, inp.y.size
    w, Q = np.linalg.eigh(inp.K11)
    F = Q * np.sqrt(np.maximum(w, 0.0))
    B = rng.standard_normal((t2, t1))
    C = rng.standard_normal((t2, t2)) * rng.uniform()
    extra = np.sum(B * B) + np.sum(C * C)
    room = max(inp.P - np.trace(inp.K11), 0.0) * rng.uniform() ** 0.25
    s = np.sqrt(room / extra) if extra > 0 else 0.0
    B, C = s * B, s * C
    top = np.hstack([F, np.zeros((t1, t2))])
    bot = np.hstack([B, C])
    L = np.vstack([top, bot])
    return L @ L.T
