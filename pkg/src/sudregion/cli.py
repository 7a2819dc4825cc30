"""
Command-line entry point: ``sudregion {solve,trace,verify}``.

Exit codes: 0 success, 1 usage or I/O error, 2 a certificate or property
check failed.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .channel import (BUILTIN_NETWORKS, InterferenceBudget, MisoNetwork, beamformer_to_covariance,
                      builtin_network, load_network, rate_vector)
from .region import RegionGrid, project_2d, trace_region, write_projection_csv, write_region_csv
from .solver import solve_user
from .verify import DEFAULT_TOLERANCES, SUITES, parse_tolerances, run_suites

log = logging.getLogger("sudregion")

EXIT_OK, EXIT_USAGE, EXIT_FAIL = 0, 1, 2


class UsageError(Exception):
    pass


@dataclass
class RunConfig:
    command: str
    network: str | None = None
    budget: str = "inf"
    grid: int = 8
    samples: int = 4096
    seed: int = 0
    out: str | None = None
    threads: int = 1
    suites: list[str] = field(default_factory=list)
    trials: int | None = None
    tolerances: dict[str, float] = field(default_factory=dict)

    def __post_init__(self):
        if self.grid < 2:
            raise UsageError("--grid must be at least 2")
        if not 0 <= self.seed < 2 ** 64:
            raise UsageError("--seed must be a 64-bit unsigned value")
        if self.threads < 1:
            raise UsageError("--threads must be positive")
        if self.trials is not None and self.trials < 1:
            raise UsageError("--trials must be positive")


def _number(x: float):
    # JSON has no infinity; budgets use the string "inf"
    return "inf" if np.isinf(x) else float(x)


def _resolve_network(spec: str | None) -> MisoNetwork:
    if spec is None:
        raise UsageError("--network is required")
    path = Path(spec)
    if not path.exists() and spec in BUILTIN_NETWORKS:
        return builtin_network(spec)
    try:
        return load_network(path)
    except OSError as exc:
        raise UsageError(f"cannot read network {spec}: {exc.strerror or exc}") from None
    except (ValueError, KeyError, TypeError) as exc:
        raise UsageError(f"bad network {spec}: {exc}") from None


def _emit(doc: dict, out: str | None, name: str) -> None:
    text = json.dumps(doc, indent=2, allow_nan=False) + "\n"
    if out is None:
        sys.stdout.write(text)
        return
    d = Path(out)
    d.mkdir(parents=True, exist_ok=True)
    (d / name).write_text(text)


def cmd_solve(cfg: RunConfig) -> int:
    net = _resolve_network(cfg.network)
    try:
        budget = InterferenceBudget.parse(cfg.budget, net.m)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    users, covs, ok = [], [], True
    for i in range(net.m):
        sol = solve_user(net, i, budget)
        ok &= sol.certificate.passed
        covs.append(beamformer_to_covariance(sol.beamformer, net.P[i]))
        users.append({
            "user": i + 1,
            "beamformer": sol.beamformer.b.tolist(),
            "signal_power": sol.signal,
            "interference": {str(j + 1): float(v) for j, v in zip(sol.reduced.others, sol.interference)},
            "budget": {str(j + 1): _number(budget.z2[i, j]) for j in sol.reduced.others},
            "power_split": sol.Pbar,
            "completion_case": sol.case,
            "multipliers": sol.result.lam.tolist(),
            "duality_gap": sol.result.duality_gap,
            "certificate": sol.certificate.to_dict(),
        })
    # rates: each user alone on the channel; joint_rates: all beams active at once
    alone = [0.5 * float(np.log2(1.0 + u["signal_power"])) for u in users]
    doc = {"command": "solve", "network": cfg.network, "seed": cfg.seed,
           "rates": alone, "joint_rates": rate_vector(net, covs).tolist(),
           "all_certified": bool(ok), "users": users}
    _emit(doc, cfg.out, "solve.json")
    return EXIT_OK if ok else EXIT_FAIL


def cmd_trace(cfg: RunConfig) -> int:
    net = _resolve_network(cfg.network)
    grid = RegionGrid(G=cfg.grid, samples=cfg.samples, seed=cfg.seed)
    out = Path(cfg.out or ".")
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise UsageError(f"cannot create {out}: {exc}") from None
    ps = trace_region(net, grid, workers=cfg.threads)
    write_region_csv(ps, out / "region.csv")
    projections = {}
    if net.m == 3:
        for u in range(3):
            for mode in ("inactive", "at_max"):
                users, curve = project_2d(ps, u, mode, workers=cfg.threads)
                name = f"proj_user{u + 1}_{mode}.csv"
                write_projection_csv(users, curve, out / name)
                projections[name] = int(curve.shape[0])
    doc = {"command": "trace", "network": cfg.network, "seed": cfg.seed,
           "grid": cfg.grid, "samples": cfg.samples if net.m > 3 else None,
           "points": len(ps), "max_rates": ps.rates.max(axis=0).tolist(),
           "solves": ps.meta["solves"], "uncertified_solves": ps.meta["uncertified"],
           "projections": projections}
    (out / "trace.json").write_text(json.dumps(doc, indent=2) + "\n")
    return EXIT_OK


def cmd_verify(cfg: RunConfig) -> int:
    unknown = [s for s in cfg.suites if s not in SUITES]
    if unknown:
        raise UsageError(f"unknown suite(s) {unknown}; choose from {list(SUITES)}")
    reports = run_suites(cfg.suites or None, trials=cfg.trials, seed=cfg.seed,
                         tolerances=cfg.tolerances)
    for r in reports:
        print(f"{r.name:14s} {'PASS' if r.passed else 'FAIL'}", file=sys.stderr)
    doc = {"command": "verify", "seed": cfg.seed,
           "tolerances": {**DEFAULT_TOLERANCES, **cfg.tolerances},
           "passed": all(r.passed for r in reports),
           "suites": [r.to_dict() for r in reports]}
    _emit(doc, cfg.out, "verify.json")
    return EXIT_OK if doc["passed"] else EXIT_FAIL


COMMANDS = {"solve": cmd_solve, "trace": cmd_trace, "verify": cmd_verify}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="sudregion",
                                 description="SUD rate regions of MISO interference channels")
    sub = ap.add_subparsers(dest="command", required=True)
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--out", help="output directory (JSON goes to stdout if omitted)")
    common.add_argument("-v", "--verbose", action="store_true")

    net_help = f"network JSON file or built-in name ({', '.join(BUILTIN_NETWORKS)})"
    p = sub.add_parser("solve", parents=[common], help="per-user beamformers for one budget")
    p.add_argument("--network", required=True, help=net_help)
    p.add_argument("--budget", default="inf",
                   help='e.g. "z12=0.5,z31=inf"; omitted pairs are unconstrained')

    p = sub.add_parser("trace", parents=[common], help="Pareto boundary by budget sweep")
    p.add_argument("--network", required=True, help=net_help)
    p.add_argument("--grid", type=int, default=8, help="log-spaced budgets per pair")
    p.add_argument("--samples", type=int, default=4096, help="budget samples for m > 3")
    p.add_argument("--threads", type=int, default=1)

    p = sub.add_parser("verify", parents=[common], help="run the property suites")
    p.add_argument("--suite", action="append", default=[],
                   help=f"one of {', '.join(SUITES)}; repeatable or comma-separated")
    p.add_argument("--trials", type=int)
    p.add_argument("--tol", action="append", default=[], metavar="NAME=VALUE",
                   help="override a check threshold")
    return ap


def config_from_args(args: argparse.Namespace) -> RunConfig:
    suites = [s for item in getattr(args, "suite", []) for s in item.split(",") if s]
    try:
        tol = parse_tolerances(getattr(args, "tol", []))
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    return RunConfig(command=args.command, network=getattr(args, "network", None),
                     budget=getattr(args, "budget", "inf"), grid=getattr(args, "grid", 8),
                     samples=getattr(args, "samples", 4096), seed=args.seed, out=args.out,
                     threads=getattr(args, "threads", 1), suites=suites,
                     trials=getattr(args, "trials", None), tolerances=tol)


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        cfg = config_from_args(args)
        return COMMANDS[cfg.command](cfg)
    except UsageError as exc:
        print(f"sudregion: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"sudregion: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
