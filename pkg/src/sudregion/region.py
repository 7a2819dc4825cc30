"""
Rate-region tracing by interference-budget sweeps.

Every boundary point of the SUD rate region is produced by some choice of
per-pair interference budgets, and for fixed budgets the users decouple:
user ``i`` only sees its own outgoing budgets. So each user is solved once
per distinct budget tuple, and rate points are assembled from all
combinations using the *realized* interference of the chosen beamformers.
"""

from __future__ import annotations

import csv
import itertools
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Literal, Sequence

import numpy as np

from .channel import Beamformer, InterferenceBudget, MisoNetwork, check_network, single_user_rates
from .solver import solve_user

__all__ = ["RegionGrid", "ParetoSet", "trace_region", "pareto_mask",
           "pareto_filter", "weighted_boundary", "project_2d",
           "frontier_violation", "write_region_csv", "write_projection_csv",
           "region_header"]

log = logging.getLogger(__name__)

AT_MAX_REL = 1e-3


@dataclass(frozen=True)
class RegionGrid:
    """Budget samples per transmitter/receiver pair.

    Each pair gets ``{0} U {G log-spaced values in [lower * U, U]} U {inf}``
    with ``U = P_i ||h_ij||^2``. For more than three users the product grid
    is replaced by ``samples`` scrambled Sobol points over the grid indices.
    """

    G: int = 8
    lower: float = 1e-3
    samples: int = 4096
    seed: int = 0

    def __post_init__(self):
        if self.G < 2:
            raise ValueError("grid size G must be at least 2")
        if not 0 < self.lower < 1:
            raise ValueError("lower must be in (0, 1)")

    def values(self, net: MisoNetwork, i: int, j: int) -> np.ndarray:
        U = net.P[i] * float(net.h[i][j] @ net.h[i][j])
        if U <= 0:
            return np.array([0.0, np.inf])
        return np.concatenate([[0.0], np.geomspace(self.lower * U, U, self.G), [np.inf]])


@dataclass
class ParetoSet:
    rates: np.ndarray                    # (N, m)
    beams: list[np.ndarray]              # per user, (N, t_i)
    interference: np.ndarray             # (N, m, m), realized, zero diagonal
    grid: RegionGrid | None = None
    network: MisoNetwork | None = field(default=None, repr=False)
    meta: dict = field(default_factory=dict)

    def __len__(self) -> int:
        return self.rates.shape[0]

    @property
    def m(self) -> int:
        return self.rates.shape[1]

    def beamformers(self, k: int) -> list[Beamformer]:
        return [Beamformer(i, self.beams[i][k]) for i in range(self.m)]


# ---------------------------------------------------------------------------
# Pareto filtering


def pareto_mask(R: np.ndarray) -> np.ndarray:
    """Boolean mask of points not dominated by any other point.

    Exact duplicates keep their first occurrence only.
    """
    R = np.asarray(R, dtype=float)
    if R.ndim != 2:
        raise ValueError("points must be a 2-D array")
    N, m = R.shape
    mask = np.zeros(N, dtype=bool)
    if N == 0:
        return mask
    U, first = np.unique(R, axis=0, return_index=True)
    if m == 1:
        keep = [int(np.argmax(U[:, 0]))]
    elif m == 2:
        keep = _pareto_2d(U)
    elif m == 3:
        keep = _pareto_3d(U)
    else:
        keep = _pareto_blocked(U)
    mask[first[np.asarray(keep, dtype=int)]] = True
    return mask


def _pareto_2d(U: np.ndarray) -> list[int]:
    order = np.lexsort((-U[:, 1], -U[:, 0]))
    keep, best = [], -np.inf
    for k in order:
        if U[k, 1] > best:
            keep.append(int(k))
            best = U[k, 1]
    return keep


def _pareto_3d(U: np.ndarray) -> list[int]:
    # sweep in decreasing R1; a Fenwick tree over R2 ranks holds the best R3
    # seen among processed points with at least that R2
    order = np.lexsort((-U[:, 2], -U[:, 1], -U[:, 0]))
    ranks = np.unique(U[:, 1], return_inverse=True)[1].ravel()
    size = int(ranks.max()) + 1
    tree = [-np.inf] * (size + 1)
    keep = []
    col2 = U[:, 2].tolist()
    for k in order.tolist():
        pos = size - int(ranks[k])          # reversed rank: larger R2 -> smaller index
        best, p = -np.inf, pos
        while p > 0:
            if tree[p] > best:
                best = tree[p]
            p -= p & -p
        r3 = col2[k]
        if best >= r3:
            continue
        keep.append(k)
        p = pos
        while p <= size:
            if tree[p] < r3:
                tree[p] = r3
            p += p & -p
    return keep


def _pareto_blocked(U: np.ndarray, block: int = 256) -> list[int]:
    order = np.argsort(-U.sum(axis=1), kind="stable")
    kept = np.zeros((0, U.shape[1]))
    kept_idx: list[int] = []
    for start in range(0, order.size, block):
        idx = order[start:start + block]
        P = U[idx]
        dom = np.zeros(idx.size, dtype=bool)
        for ks in range(0, kept.shape[0], 2048):
            K = kept[ks:ks + 2048]
            ge = np.all(K[None, :, :] >= P[:, None, :], axis=2)
            gt = np.any(K[None, :, :] > P[:, None, :], axis=2)
            dom |= np.any(ge & gt, axis=1)
        ge = np.all(P[None, :, :] >= P[:, None, :], axis=2)
        gt = np.any(P[None, :, :] > P[:, None, :], axis=2)
        dom |= np.any(ge & gt, axis=1)
        kept = np.vstack([kept, P[~dom]])
        kept_idx.extend(idx[~dom].tolist())
    # float ties in the sums can put a dominator after its victim
    final = np.ones(len(kept_idx), dtype=bool)
    for s in range(0, kept.shape[0], block):
        P = kept[s:s + block]
        ge = np.all(kept[None, :, :] >= P[:, None, :], axis=2)
        gt = np.any(kept[None, :, :] > P[:, None, :], axis=2)
        final[s:s + block] = ~np.any(ge & gt, axis=1)
    return [k for k, f in zip(kept_idx, final) if f]


def pareto_filter(points) -> np.ndarray:
    """Non-dominated points in their original order."""
    R = np.asarray(points, dtype=float)
    if R.size == 0:
        return R.reshape(0, R.shape[1] if R.ndim == 2 else 0)
    return R[pareto_mask(R)]


# ---------------------------------------------------------------------------
# tracing


def _solve_task(args):
    net, user, z2_row = args
    m = net.m
    z2 = np.full((m, m), np.inf)
    for j, v in z2_row.items():
        z2[user, j] = v
    sol = solve_user(net, user, InterferenceBudget(z2))
    return sol.beamformer.b, sol.certificate.passed


def _budget_tuples(net: MisoNetwork, grid: RegionGrid):
    """Per user: list of budget tuples (one value per other receiver), and for
    m > 3 the sampled joint index combinations."""
    m = net.m
    values = {(i, j): grid.values(net, i, j) for i in range(m) for j in range(m) if i != j}
    per_user = []
    if m <= 3:
        for i in range(m):
            others = [j for j in range(m) if j != i]
            per_user.append([dict(zip(others, combo)) for combo in
                             itertools.product(*(values[i, j] for j in others))])
        return per_user, None
    from scipy.stats import qmc

    pairs = [(i, j) for i in range(m) for j in range(m) if i != j]
    sob = qmc.Sobol(d=len(pairs), scramble=True, seed=grid.seed)
    u = sob.random(grid.samples)
    joint = np.empty((grid.samples, m), dtype=int)
    for i in range(m):
        lookup: dict[tuple, int] = {}
        rows = []
        others = [j for j in range(m) if j != i]
        cols = [pairs.index((i, j)) for j in others]
        for s in range(grid.samples):
            key = tuple(int(np.floor(u[s, c] * len(values[i, j])))
                        for c, j in zip(cols, others))
            if key not in lookup:
                lookup[key] = len(rows)
                rows.append({j: values[i, j][kk] for kk, j in zip(key, others)})
            joint[s, i] = lookup[key]
        per_user.append(rows)
    return per_user, joint


def _prune(signal: np.ndarray, leak: np.ndarray) -> np.ndarray:
    """Indices of candidates not beaten by another one (more signal, less leakage)."""
    score = np.column_stack([signal, -leak]) if leak.size else signal[:, None]
    return np.flatnonzero(pareto_mask(score))


def trace_region(net: MisoNetwork, grid: RegionGrid | None = None,
                 workers: int = 1) -> ParetoSet:
    grid = grid or RegionGrid()
    check_network(net)
    m = net.m
    per_user, joint = _budget_tuples(net, grid)

    tasks = [(net, i, row) for i in range(m) for row in per_user[i]]
    if workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            results = list(ex.map(_solve_task, tasks, chunksize=4))
    else:
        results = [_solve_task(tk) for tk in tasks]
    n_fail = sum(not ok for _, ok in results)
    if n_fail:
        log.warning("%d of %d per-user solves did not certify", n_fail, len(results))

    # realized signal and leakage per candidate beamformer
    cand_b, cand_sig, cand_leak, cand_keep = [], [], [], []
    pos = 0
    for i in range(m):
        B = np.array([results[pos + k][0] for k in range(len(per_user[i]))])
        pos += len(per_user[i])
        Hi = net.matrix(i)                               # t_i x m
        P = (B @ Hi) ** 2                                # realized powers at each receiver
        sig = P[:, i]
        leak = np.delete(P, i, axis=1)
        cand_b.append(B)
        cand_sig.append(sig)
        cand_leak.append(P)
        cand_keep.append(_prune(sig, leak) if joint is None else np.arange(B.shape[0]))

    if joint is None:
        combos = np.array(list(itertools.product(*cand_keep)), dtype=int).reshape(-1, m)
    else:
        combos = joint

    power = np.stack([cand_leak[i][combos[:, i]] for i in range(m)], axis=1)  # (N, m_tx, m_rx)
    signal = np.einsum("nii->ni", power)
    interference = power.copy()
    interference[:, np.arange(m), np.arange(m)] = 0.0
    rates = 0.5 * np.log2(1.0 + signal / (1.0 + interference.sum(axis=1)))

    keep = pareto_mask(rates)
    sel = combos[keep]
    beams = [cand_b[i][sel[:, i]] for i in range(m)]
    meta = {"G": grid.G, "lower": grid.lower, "seed": grid.seed,
            "solves": len(tasks), "combinations": int(combos.shape[0]),
            "uncertified": n_fail}
    return ParetoSet(rates[keep], beams, interference[keep], grid, net, meta)


# ---------------------------------------------------------------------------
# queries


def weighted_boundary(ps: ParetoSet, weights: Sequence[float]):
    """Stored point maximizing ``sum mu_i R_i``; ties go to the lexicographically
    largest rate tuple. Returns ``(rates, beamformers)``."""
    if len(ps) == 0:
        raise ValueError("empty Pareto set")
    mu = np.asarray(weights, dtype=float)
    if mu.shape != (ps.m,) or np.any(mu < 0) or not np.any(mu > 0):
        raise ValueError("weights must be nonnegative, not all zero, one per user")
    score = ps.rates @ mu
    best = np.flatnonzero(score >= score.max() - 1e-12 * max(1.0, abs(score.max())))
    k = max(best.tolist(), key=lambda j: tuple(ps.rates[j]))
    return ps.rates[k].copy(), ps.beamformers(k)


Mode = Literal["inactive", "at_max", "level"]


def project_2d(ps: ParetoSet, fixed_user: int, mode: Mode = "at_max",
               level: float | None = None, half_width: float | None = None,
               workers: int = 1) -> tuple[tuple[int, int], np.ndarray]:
    """Two-user frontier with ``fixed_user``'s rate held at a constant.

    Returns ``((a, b), curve)`` with ``curve`` sorted by ``R_a``. For a
    two-user set the full frontier is returned whatever the mode.
    """
    m = ps.m
    if m == 2:
        pts = ps.rates
        users = (0, 1)
    else:
        if not 0 <= fixed_user < m:
            raise ValueError(f"no user {fixed_user}")
        others = [j for j in range(m) if j != fixed_user]
        if m > 3:
            raise ValueError("2-D projections are defined for three users")
        users = (others[0], others[1])
        if mode == "inactive":
            if ps.network is None:
                raise ValueError("inactive projection needs the network")
            sub = trace_region(ps.network.subnetwork(others), ps.grid, workers=workers)
            pts = sub.rates
        else:
            Rf = ps.rates[:, fixed_user]
            if mode == "at_max":
                sel = Rf >= (1.0 - AT_MAX_REL) * Rf.max()
            elif mode == "level":
                if level is None:
                    raise ValueError("level mode needs a rate level")
                hw = half_width if half_width is not None else _half_spacing(Rf, level)
                sel = np.abs(Rf - level) <= hw
            else:
                raise ValueError(f"unknown mode {mode!r}")
            pts = ps.rates[sel][:, others]
    curve = pareto_filter(pts)
    if curve.shape[0] == 0:
        log.warning("projection for user %d (%s) selected no points", fixed_user + 1, mode)
        return users, curve.reshape(0, 2)
    return users, curve[np.lexsort((curve[:, 1], curve[:, 0]))]


def _half_spacing(values: np.ndarray, level: float) -> float:
    u = np.unique(values)
    if u.size < 2:
        return 0.0
    k = int(np.clip(np.searchsorted(u, level), 1, u.size - 1))
    return 0.5 * float(u[k] - u[k - 1])


def frontier_violation(front: np.ndarray, points: np.ndarray, chunk: int = 2000) -> float:
    """Largest amount by which any of ``points`` sticks out of ``front``.

    For each point the shortfall is ``min_p max_i (r_i - p_i)``, the smallest
    uniform shift that makes some frontier point dominate it; clipped at 0.
    """
    front = np.asarray(front, dtype=float)
    points = np.asarray(points, dtype=float)
    if points.size == 0:
        return 0.0
    if front.size == 0:
        return float(np.inf)
    worst = 0.0
    for s in range(0, points.shape[0], chunk):
        P = points[s:s + chunk]
        d = np.max(P[:, None, :] - front[None, :, :], axis=2).min(axis=1)
        worst = max(worst, float(d.max()))
    return worst


# ---------------------------------------------------------------------------
# files


def region_header(net: MisoNetwork) -> list[str]:
    m = net.m
    cols = [f"R_{i + 1}" for i in range(m)]
    cols += [f"b_{i + 1}_{k + 1}" for i in range(m) for k in range(net.t[i])]
    cols += [f"zr_{i + 1}_{j + 1}" for i in range(m) for j in range(m) if i != j]
    return cols


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def write_region_csv(ps: ParetoSet, path) -> None:
    net = ps.network
    m = ps.m
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(region_header(net))
        for k in range(len(ps)):
            row = [_fmt(v) for v in ps.rates[k]]
            for i in range(m):
                row += [_fmt(v) for v in ps.beams[i][k]]
            row += [_fmt(ps.interference[k, i, j]) for i in range(m) for j in range(m) if i != j]
            w.writerow(row)


def write_projection_csv(users: tuple[int, int], curve: np.ndarray, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([f"R_{users[0] + 1}", f"R_{users[1] + 1}"])
        for a, b in curve:
            w.writerow([_fmt(a), _fmt(b)])


def corner_rates(net: MisoNetwork) -> np.ndarray:
    return single_user_rates(net)
