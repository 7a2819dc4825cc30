"""
Property suites run by ``sudregion verify`` and by the acceptance tests.

Each suite draws its own seeded random instances, checks one family of
properties and returns a :class:`SuiteReport` with the worst observed
margins. Thresholds come from :data:`DEFAULT_TOLERANCES` and can be
overridden per run.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .channel import InterferenceBudget, MisoNetwork
from .completion import complete_matrix
from .oracle import (brute_force_user, check_lemma3, inertia, random_beamformer_rates,
                     random_budget, random_completion, random_completion_input,
                     random_network, stream)
from .region import RegionGrid, frontier_violation, trace_region
from .reduction import lift_solution, reduce_user_problem
from .solver import (QcqpProblem, SolveResult, certify_kkt, full_problem,
                     solve_reduced_sdp, solve_user)

__all__ = ["DEFAULT_TOLERANCES", "DEFAULT_TRIALS", "SuiteReport", "SUITES",
           "random_instance", "run_suites", "parse_tolerances"]

DEFAULT_TOLERANCES = {
    "rank_ratio": 1e-6,        # second / first eigenvalue of the reduced optimum
    "sandwich": 1e-6,          # absolute slack in oracle <= value <= dual
    "attain": 1e-10,           # completion attains its bound, relative
    "psd": 1e-10,              # min eigenvalue >= -psd * trace
    "trace": 1e-10,
    "beat": 1e-8,              # random completions vs bound, relative to 1 + bound
    "rank_gap": 1e-8,          # eigenvalues below rank_gap * largest count as zero
    "cross_term": 1e-12,
    "reduction_value": 1e-7,
    "reduction_constraint": 1e-10,
    "orthogonality": 1e-10,
    "kkt": 1e-7,
    "lambda": 1e-6,
    "monotone": 1e-8,          # relative slack for nondecreasing values
    "coverage_factor": 1.5,    # required violation shrink per grid doubling
}

DEFAULT_TRIALS = {
    "rank1": 200, "sandwich": 200, "lemma2": 10_000, "reduction": 100,
    "kkt": 200, "inertia": 500, "monotonicity": 100, "coverage": 5,
}


@dataclass
class SuiteReport:
    name: str
    trials: int
    failures: list[str] = field(default_factory=list)
    metrics: dict[str, float] = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return not self.failures

    def worst(self, key: str, value: float, larger_is_worse: bool = True) -> None:
        old = self.metrics.get(key)
        if old is None or (value > old if larger_is_worse else value < old):
            self.metrics[key] = float(value)

    def fail(self, trial: int, msg: str) -> None:
        if len(self.failures) < 20:
            self.failures.append(f"trial {trial}: {msg}")
        elif len(self.failures) == 20:
            self.failures.append("further failures suppressed")

    def to_dict(self) -> dict:
        return {"suite": self.name, "passed": self.passed, "trials": self.trials,
                "metrics": dict(sorted(self.metrics.items())),
                "failures": list(self.failures)}


def parse_tolerances(items) -> dict[str, float]:
    """``["name=value", ...]`` to a tolerance dict; unknown names are errors."""
    out = {}
    for item in items or ():
        name, sep, value = item.partition("=")
        name = name.strip()
        if not sep or name not in DEFAULT_TOLERANCES:
            raise ValueError(f"unknown tolerance override {item!r}")
        out[name] = float(value)
    return out


def random_instance(rng: np.random.Generator, m_choices=(2, 3, 4),
                    t_range=(2, 6)) -> tuple[MisoNetwork, int, InterferenceBudget]:
    """Standard-normal network, random user, finite random budgets."""
    m = int(rng.choice(m_choices))
    t = rng.integers(t_range[0], t_range[1] + 1, size=m)
    net = random_network(rng, m, t)
    user = int(rng.integers(m))
    return net, user, random_budget(rng, net)


def _rel(a: float, b: float) -> float:
    return abs(a - b) / max(1.0, abs(b))


# ---------------------------------------------------------------------------
# suites


def suite_rank1(trials: int, seed: int, tol: dict) -> SuiteReport:
    rep = SuiteReport("rank1", trials)
    rng = stream(seed, "instances")
    for k in range(trials):
        net, user, budget = random_instance(rng)
        sol = solve_user(net, user, budget)
        w = np.linalg.eigvalsh(sol.result.central)
        ratio = max(w[-2], 0.0) / w[-1] if w.size > 1 and w[-1] > 0 else 0.0
        rep.worst("max_ratio", ratio)
        if ratio > tol["rank_ratio"]:
            rep.fail(k, f"eigenvalue ratio {ratio:.3e}")
    return rep


def suite_sandwich(trials: int, seed: int, tol: dict, samples: int = 100_000) -> SuiteReport:
    rep = SuiteReport("sandwich", trials)
    rng = stream(seed, "instances")
    for k in range(trials):
        net, user, budget = random_instance(rng)
        sol = solve_user(net, user, budget)
        oracle = brute_force_user(net, user, budget, samples=samples, seed=seed + k)
        dual = solve_reduced_sdp(full_problem(net, user, budget)).dual_value
        rep.worst("max_oracle_excess", oracle - sol.signal)
        rep.worst("max_dual_deficit", sol.signal - dual)
        rep.worst("min_oracle_ratio", oracle / sol.signal if sol.signal > 0 else 1.0,
                  larger_is_worse=False)
        if oracle > sol.signal + tol["sandwich"]:
            rep.fail(k, f"oracle {oracle:.12g} beats solver {sol.signal:.12g}")
        if sol.signal > dual + tol["sandwich"]:
            rep.fail(k, f"solver {sol.signal:.12g} exceeds dual bound {dual:.12g}")
    return rep


def suite_lemma2(trials: int, seed: int, tol: dict) -> SuiteReport:
    rep = SuiteReport("lemma2", trials)
    rng = stream(seed, "completion")
    for k in range(trials):
        inp = random_completion_input(rng)
        res = complete_matrix(inp)
        v = np.concatenate([inp.x, inp.y])
        form = float(v @ res.K @ v)
        tr = float(np.trace(res.K))
        w = np.linalg.eigvalsh(res.K)
        attain = _rel(form, res.bound)
        rep.worst("max_attain_error", attain)
        if attain > tol["attain"]:
            rep.fail(k, f"form {form} misses bound {res.bound} ({res.case})")
        if w[0] < -tol["psd"] * max(tr, 1e-300):
            rep.fail(k, f"K not PSD, min eigenvalue {w[0]:.3e}")
        if tr > inp.P + tol["trace"]:
            rep.fail(k, f"trace {tr} exceeds P={inp.P}")
        thr = tol["rank_gap"] * max(w[-1], 0.0)
        rank_k = int(np.sum(w > thr))
        w11 = np.linalg.eigvalsh(inp.K11)
        rank_11 = int(np.sum(w11 > tol["rank_gap"] * max(w11[-1], 0.0)))
        if rank_k > max(rank_11, 1):
            rep.fail(k, f"rank {rank_k} > max(rank K11 = {rank_11}, 1)")
        if res.case == "degenerate-x":
            t1 = inp.x.size
            cross = abs(float(inp.y @ res.K[t1:, :t1] @ inp.x))
            rep.worst("max_cross_term", cross)
            if cross > tol["cross_term"] * (1.0 + inp.P * np.linalg.norm(inp.x) * np.linalg.norm(inp.y)):
                rep.fail(k, f"cross term {cross:.3e} in the degenerate case")
        rand = random_completion(rng, inp)
        beat = (float(v @ rand @ v) - res.bound) / (1.0 + res.bound)
        rep.worst("max_random_excess", beat)
        if beat > tol["beat"]:
            rep.fail(k, f"random completion beats bound by {beat:.3e}")
        rep.metrics[f"count_{res.case}"] = rep.metrics.get(f"count_{res.case}", 0) + 1
    return rep


def suite_reduction(trials: int, seed: int, tol: dict) -> SuiteReport:
    rep = SuiteReport("reduction", trials)
    rng = stream(seed, "reduction")
    for k in range(trials):
        m = int(rng.choice((2, 3, 4)))
        t = rng.integers(2, 7, size=m)
        user = int(rng.integers(m))
        t[user] = max(int(t[user]), m)               # t_user > m - 1
        net = random_network(rng, m, t)
        budget = random_budget(rng, net)
        red = reduce_user_problem(net, user, budget)
        orth = float(np.abs(red.lift.T @ red.lift - np.eye(red.t)).max())
        rep.worst("max_orthogonality_error", orth)
        if orth > tol["orthogonality"]:
            rep.fail(k, f"lift not orthogonal ({orth:.3e})")

        sol = solve_user(net, user, budget)
        full = solve_reduced_sdp(full_problem(net, user, budget))
        err = _rel(sol.signal, full.value)
        rep.worst("max_value_error", err)
        if err > tol["reduction_value"]:
            rep.fail(k, f"pipeline {sol.signal:.12g} vs full solve {full.value:.12g}")

        A = rng.standard_normal((red.dim, red.dim))
        S11 = A @ A.T
        S11 *= rng.uniform() * red.P / np.trace(S11)
        lifted = lift_solution(red, S11)
        for j, other in enumerate(red.others):
            hmj = net.h[user][other]
            got = float(hmj @ lifted.S @ hmj)
            want = float(red.hj[j] @ S11 @ red.hj[j])
            e = abs(got - want) / max(abs(want), 1e-300) if want else abs(got)
            rep.worst("max_constraint_error", e)
            if e > tol["reduction_constraint"] and abs(got - want) > tol["reduction_constraint"]:
                rep.fail(k, f"constraint {other + 1}: lifted {got} vs reduced {want}")
    return rep


def hand_instance() -> QcqpProblem:
    return QcqpProblem(np.array([1.0, 1.0]), np.array([[1.0, 0.0]]), np.array([0.25]), 1.0)


def suite_kkt(trials: int, seed: int, tol: dict) -> SuiteReport:
    rep = SuiteReport("kkt", trials)
    p = hand_instance()
    res = solve_reduced_sdp(p)
    want = np.array([2 / np.sqrt(3), (1 + np.sqrt(3)) / np.sqrt(3)])
    err = float(np.abs(res.lam - want).max())
    rep.metrics["hand_lambda_error"] = err
    if err > tol["lambda"] or not certify_kkt(p, res, tol["kkt"]).passed:
        rep.fail(-1, f"hand instance multipliers {res.lam.tolist()}")
    wrong = SolveResult(p, res.S11, res.value, np.zeros(2), res.dual_value, 0.0,
                        res.central, True)
    if certify_kkt(p, wrong, tol["kkt"]).passed:
        rep.fail(-1, "zero multipliers were certified")

    rng = stream(seed, "kkt")
    for k in range(trials):
        net, user, budget = random_instance(rng)
        sol = solve_user(net, user, budget)
        cert = certify_kkt(sol.result.problem, sol.result, tol["kkt"])
        scale = 1.0 + sol.result.value
        rep.worst("max_stationarity", cert.stationarity / scale)
        rep.worst("max_slackness", float(cert.slackness.max(initial=0.0)) / scale)
        if not cert.passed or not sol.certificate.passed:
            rep.fail(k, "; ".join(cert.reasons or sol.certificate.reasons))
    return rep


def suite_inertia(trials: int, seed: int, tol: dict) -> SuiteReport:
    rep = SuiteReport("inertia", trials)
    rng = stream(seed, "inertia")
    for k in range(trials):
        H = rng.standard_normal((3, 5))
        B = rng.standard_normal((5, 5))
        A = B + B.T
        if rng.uniform() < 0.5:
            w, Q = np.linalg.eigh(A)
            w[rng.uniform(size=5) < 0.4] = 0.0
            A = (Q * w) @ Q.T
            A = (A + A.T) / 2
        if not check_lemma3(H, A):
            rep.fail(k, f"inertia grew: {inertia(H @ A @ H.T)} vs {inertia(A)}")
    # the certificate's C is a congruence of diag(-1, lambda)
    rng = stream(seed, "inertia_solver")
    for k in range(min(trials, 50)):
        net, user, budget = random_instance(rng)
        sol = solve_user(net, user, budget)
        p, lam = sol.result.problem, sol.result.lam
        Hc = np.column_stack([p.h, *p.hj]) if p.k else p.h[:, None]
        A = np.diag(np.concatenate([[-1.0], lam[:-1]]))
        C = Hc @ A @ Hc.T
        pos, neg = inertia(C)
        if pos > p.k or neg > 1 or not check_lemma3(Hc, A):
            rep.fail(k, f"solver C inertia ({pos}, {neg}) with k={p.k}")
    return rep


def _random_qcqp(rng: np.random.Generator) -> QcqpProblem:
    n = int(rng.integers(1, 5))
    k = int(rng.integers(1, 4))
    hj = rng.standard_normal((k, n))
    z2 = np.sum(hj ** 2, axis=1) * np.exp(rng.uniform(np.log(1e-3), 0.0, size=k))
    return QcqpProblem(rng.standard_normal(n), hj, z2, float(rng.uniform(0.2, 2.0)))


def suite_monotonicity(trials: int, seed: int, tol: dict) -> SuiteReport:
    rep = SuiteReport("monotonicity", trials)
    rng = stream(seed, "monotonicity")
    for k in range(trials):
        p = _random_qcqp(rng)
        base = solve_reduced_sdp(p).value
        j = int(rng.integers(p.k))
        z2 = p.z2.copy()
        z2[j] *= 1.0 + rng.uniform(0.01, 1.0)
        up_z = solve_reduced_sdp(QcqpProblem(p.h, p.hj, z2, p.Pbar)).value
        up_p = solve_reduced_sdp(QcqpProblem(p.h, p.hj, p.z2,
                                             p.Pbar * (1 + rng.uniform(0.01, 1.0)))).value
        for label, v in (("budget", up_z), ("power", up_p)):
            drop = (base - v) / (1.0 + base)
            rep.worst(f"max_drop_{label}", drop)
            if drop > tol["monotone"]:
                rep.fail(k, f"value fell from {base:.12g} to {v:.12g} as {label} grew")
    return rep


def suite_coverage(trials: int, seed: int, tol: dict, grids=(4, 8, 16),
                   samples: int = 100_000) -> SuiteReport:
    """Random two-user, two-antenna networks: the worst violation of the traced
    frontiers by random beamformer rate points, taken over all networks,
    shrinks by ``coverage_factor`` each time the grid doubles."""
    rep = SuiteReport("coverage", trials)
    rng = stream(seed, "coverage")
    worst = np.zeros(len(grids))
    for k in range(trials):
        net = random_network(rng, 2, 2)
        pts = random_beamformer_rates(net, samples, seed + k)
        viol = [frontier_violation(trace_region(net, RegionGrid(G=G)).rates, pts)
                for G in grids]
        worst = np.maximum(worst, viol)
    for G, v in zip(grids, worst):
        rep.metrics[f"max_violation_G{G}"] = float(v)
    for a, b, G in zip(worst, worst[1:], grids):
        if b > a / tol["coverage_factor"]:
            rep.fail(-1, f"worst violation {a:.3e} at G={G} only fell to {b:.3e}")
    return rep


SUITES: dict[str, Callable[..., SuiteReport]] = {
    "rank1": suite_rank1,
    "sandwich": suite_sandwich,
    "lemma2": suite_lemma2,
    "reduction": suite_reduction,
    "kkt": suite_kkt,
    "inertia": suite_inertia,
    "monotonicity": suite_monotonicity,
    "coverage": suite_coverage,
}


def run_suites(names=None, trials: int | None = None, seed: int = 0,
               tolerances: dict | None = None) -> list[SuiteReport]:
    tol = {**DEFAULT_TOLERANCES, **(tolerances or {})}
    names = list(SUITES) if not names else list(names)
    out = []
    for name in names:
        if name not in SUITES:
            raise ValueError(f"unknown suite {name!r}")
        n = trials if trials is not None else DEFAULT_TRIALS[name]
        out.append(SUITES[name](n, seed, tol))
    return out
