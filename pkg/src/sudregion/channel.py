"""
Multi-user MISO interference channel with single-user detection.

Receiver ``i`` observes ``Y_i = sum_j h_ji^T x_j + N_i`` with unit noise
variance. Transmitter ``j`` has ``t_j`` antennas and power budget ``P_j``.
All indices are 0-based in code; file formats and the CLI use 1-based
user numbers.
"""

from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Sequence

import numpy as np

__all__ = [
    "MisoNetwork", "Beamformer", "InterferenceBudget",
    "validate_network", "check_network", "load_network", "builtin_network",
    "network_to_dict", "validate_covariances", "rate_vector",
    "single_user_rates", "beamformer_to_covariance", "interference_map",
    "signal_powers",
]

PSD_TOL = 1e-10
POWER_TOL = 1e-10


def _frozen(a) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class MisoNetwork:
    """Channel vectors, antenna counts and power budgets of an m-user MISO IC.

    ``h[j][i]`` is the channel from transmitter ``j`` to receiver ``i`` and
    has ``t[j]`` entries.
    """

    t: tuple[int, ...]
    h: tuple[tuple[np.ndarray, ...], ...]
    P: np.ndarray

    def __init__(self, t: Sequence[int], h, P: Sequence[float]):
        object.__setattr__(self, "t", tuple(int(v) for v in t))
        object.__setattr__(
            self, "h", tuple(tuple(_frozen(hji) for hji in row) for row in h))
        object.__setattr__(self, "P", _frozen(P))

    @property
    def m(self) -> int:
        return len(self.t)

    @classmethod
    def from_matrices(cls, H: Sequence, P: Sequence[float]) -> "MisoNetwork":
        """Build from per-transmitter matrices ``H[j]`` (t_j x m, column i = h_ji)."""
        mats = [np.asarray(Hj, dtype=float) for Hj in H]
        if any(M.ndim != 2 for M in mats):
            raise ValueError("dimension mismatch: every H_j must be a 2-D matrix")
        t = [M.shape[0] for M in mats]
        h = [[M[:, i] for i in range(M.shape[1])] for M in mats]
        return cls(t, h, P)

    def matrix(self, j: int) -> np.ndarray:
        """``[h_j1, ..., h_jm]`` for transmitter ``j``."""
        return np.column_stack(self.h[j])

    def subnetwork(self, users: Sequence[int]) -> "MisoNetwork":
        users = list(users)
        return MisoNetwork([self.t[j] for j in users],
                           [[self.h[j][i] for i in users] for j in users],
                           [self.P[j] for j in users])


def validate_network(net: MisoNetwork) -> list[str]:
    """Return a list of violations; an empty list means the network is usable."""
    problems = []
    m = net.m
    if m < 1:
        problems.append("network must have at least one user")
    if len(net.P) != m:
        problems.append(f"dimension mismatch: {len(net.P)} power budgets for {m} users")
    if len(net.h) != m:
        problems.append(f"dimension mismatch: {len(net.h)} transmitters for {m} users")
    for j, tj in enumerate(net.t):
        if tj < 1:
            problems.append(f"transmitter {j + 1} has t={tj} antennas")
    for j, Pj in enumerate(net.P):
        if not np.isfinite(Pj):
            problems.append(f"non-finite power budget P_{j + 1}")
        elif Pj <= 0:
            problems.append(f"non-positive power P_{j + 1}={Pj}")
    for j, row in enumerate(net.h):
        if len(row) != m:
            problems.append(f"dimension mismatch: transmitter {j + 1} has "
                            f"{len(row)} channels for {m} receivers")
        for i, hji in enumerate(row):
            tag = f"h_{j + 1}{i + 1}" if m < 10 else f"h_{j + 1}_{i + 1}"
            if j < len(net.t) and hji.shape != (net.t[j],):
                problems.append(f"dimension mismatch: {tag} has shape "
                                f"{hji.shape}, expected ({net.t[j]},)")
            if not np.all(np.isfinite(hji)):
                problems.append(f"non-finite entries in {tag}")
    return problems


def check_network(net: MisoNetwork) -> MisoNetwork:
    problems = validate_network(net)
    if problems:
        raise ValueError("invalid network: " + "; ".join(problems))
    return net


def load_network(path) -> MisoNetwork:
    """Read a network JSON file ``{"m", "t", "P", "H"}`` and validate it."""
    with open(path) as fh:
        doc = json.load(fh)
    return network_from_dict(doc)


def network_from_dict(doc: dict) -> MisoNetwork:
    try:
        net = MisoNetwork.from_matrices(doc["H"], doc["P"])
    except KeyError as exc:
        raise ValueError(f"network document lacks field {exc}") from None
    problems = validate_network(net)
    if "m" in doc and int(doc["m"]) != net.m:
        problems.append(f"dimension mismatch: m={doc['m']} but {net.m} matrices")
    if "t" in doc and list(doc["t"]) != list(net.t):
        problems.append(f"dimension mismatch: t={doc['t']} but matrices give {list(net.t)}")
    if problems:
        raise ValueError("invalid network: " + "; ".join(problems))
    return net


def network_to_dict(net: MisoNetwork) -> dict:
    return {"m": net.m, "t": list(net.t), "P": [float(p) for p in net.P],
            "H": [net.matrix(j).tolist() for j in range(net.m)]}


BUILTIN_NETWORKS = ("three_user_t5",)


def builtin_network(name: str = "three_user_t5") -> MisoNetwork:
    """Networks shipped with the package.

    ``three_user_t5``: three users with five transmit antennas each and
    powers (1, 1.5, 2).
    """
    return load_network(builtin_network_path(name))


def builtin_network_path(name: str = "three_user_t5") -> Path:
    if name not in BUILTIN_NETWORKS:
        raise ValueError(f"no built-in network {name!r}; choose from {BUILTIN_NETWORKS}")
    return Path(str(resources.files("sudregion") / "data" / f"{name}.json"))


@dataclass(frozen=True)
class Beamformer:
    user: int
    b: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "b", _frozen(self.b))

    @property
    def power(self) -> float:
        return float(self.b @ self.b)


@dataclass(frozen=True)
class InterferenceBudget:
    """Caps ``z2[i, j]`` on the power transmitter ``i`` leaks at receiver ``j``.

    ``inf`` means unconstrained. The diagonal is ignored.
    """

    z2: np.ndarray = field()

    def __post_init__(self):
        z2 = np.array(self.z2, dtype=float)
        if z2.ndim != 2 or z2.shape[0] != z2.shape[1]:
            raise ValueError("budget matrix must be square")
        np.fill_diagonal(z2, np.inf)
        if np.any(np.isnan(z2)) or np.any(z2 < 0):
            raise ValueError("interference budgets must be nonnegative")
        z2.setflags(write=False)
        object.__setattr__(self, "z2", z2)

    @property
    def m(self) -> int:
        return self.z2.shape[0]

    @classmethod
    def unconstrained(cls, m: int) -> "InterferenceBudget":
        return cls(np.full((m, m), np.inf))

    @classmethod
    def uniform(cls, m: int, value: float) -> "InterferenceBudget":
        return cls(np.full((m, m), float(value)))

    @classmethod
    def parse(cls, spec: str, m: int) -> "InterferenceBudget":
        """Parse ``"z12=0.5,z13=inf"``; ``z1_12`` style is accepted for m >= 10.

        A bare ``inf`` or number applies to every pair. Omitted pairs are
        unconstrained.
        """
        spec = (spec or "").strip()
        z2 = np.full((m, m), np.inf)
        if not spec:
            return cls(z2)
        if "=" not in spec:
            return cls(np.full((m, m), _parse_value(spec)))
        for item in spec.split(","):
            item = item.strip()
            if not item:
                continue
            key, _, val = item.partition("=")
            match = (re.fullmatch(r"z(\d+)_(\d+)", key.strip())
                     or re.fullmatch(r"z(\d)(\d)", key.strip()))
            if match is None:
                raise ValueError(f"bad budget entry {item!r}")
            i, j = int(match.group(1)) - 1, int(match.group(2)) - 1
            if not (0 <= i < m and 0 <= j < m) or i == j:
                raise ValueError(f"budget entry {item!r} out of range for m={m}")
            z2[i, j] = _parse_value(val)
        return cls(z2)

    def for_user(self, i: int) -> np.ndarray:
        """Budgets of transmitter ``i`` towards every other receiver, in index order."""
        return np.array([self.z2[i, j] for j in range(self.m) if j != i])


def _parse_value(text: str) -> float:
    v = float(text.strip())
    if math.isnan(v) or v < 0:
        raise ValueError(f"bad budget value {text!r}")
    return v


def validate_covariances(net: MisoNetwork, cov: Sequence[np.ndarray]) -> list[str]:
    problems = []
    if len(cov) != net.m:
        return [f"dimension mismatch: {len(cov)} covariances for {net.m} users"]
    for i, S in enumerate(cov):
        S = np.asarray(S, dtype=float)
        if S.shape != (net.t[i], net.t[i]):
            problems.append(f"dimension mismatch: S_{i + 1} has shape {S.shape}")
            continue
        if not np.allclose(S, S.T, atol=1e-12 * (1 + np.abs(S).max())):
            problems.append(f"S_{i + 1} is not symmetric")
        tr = float(np.trace(S))
        if np.linalg.eigvalsh((S + S.T) / 2)[0] < -PSD_TOL * max(tr, 1.0):
            problems.append(f"S_{i + 1} is not positive semidefinite")
        if tr > net.P[i] + POWER_TOL:
            problems.append(f"tr(S_{i + 1})={tr} exceeds P_{i + 1}={net.P[i]}")
    return problems


def _check_shapes(net: MisoNetwork, cov) -> None:
    if len(cov) != net.m:
        raise ValueError(f"dimension mismatch: {len(cov)} covariances for {net.m} users")
    for i, S in enumerate(cov):
        if np.shape(S) != (net.t[i], net.t[i]):
            raise ValueError(f"dimension mismatch: S_{i + 1} has shape {np.shape(S)}")


def interference_map(net: MisoNetwork, cov: Sequence[np.ndarray]) -> np.ndarray:
    """Matrix with entry (i, j) = ``h_ij^T S_i h_ij`` for i != j, zero diagonal."""
    _check_shapes(net, cov)
    m = net.m
    out = np.zeros((m, m))
    for i in range(m):
        S = np.asarray(cov[i], dtype=float)
        for j in range(m):
            if j != i:
                hij = net.h[i][j]
                out[i, j] = max(float(hij @ S @ hij), 0.0)
    return out


def signal_powers(net: MisoNetwork, cov: Sequence[np.ndarray]) -> np.ndarray:
    _check_shapes(net, cov)
    return np.array([max(float(net.h[i][i] @ np.asarray(S) @ net.h[i][i]), 0.0)
                     for i, S in enumerate(cov)])


def rates_from_powers(signal: np.ndarray, interference: np.ndarray) -> np.ndarray:
    """SUD rates in bits per real channel use from received powers.

    ``interference[i, j]`` is the power transmitter i produces at receiver j.
    """
    interference = np.array(interference, dtype=float)
    np.fill_diagonal(interference, 0.0)
    noise = 1.0 + interference.sum(axis=0)
    return 0.5 * np.log2(1.0 + np.asarray(signal) / noise)


def rate_vector(net: MisoNetwork, cov: Sequence[np.ndarray]) -> np.ndarray:
    """``R_i = 1/2 log2(1 + h_ii^T S_i h_ii / (1 + sum_{j!=i} h_ji^T S_j h_ji))``."""
    return rates_from_powers(signal_powers(net, cov), interference_map(net, cov))


def single_user_rates(net: MisoNetwork) -> np.ndarray:
    """Interference-free upper bounds ``1/2 log2(1 + P_i ||h_ii||^2)``."""
    return np.array([0.5 * np.log2(1.0 + net.P[i] * float(net.h[i][i] @ net.h[i][i]))
                     for i in range(net.m)])


def beamformer_to_covariance(bf: Beamformer, P: float | None = None) -> np.ndarray:
    """Rank-one covariance ``b b^T``; raises if ``||b||^2`` exceeds ``P``."""
    b = np.asarray(bf.b, dtype=float)
    if P is not None and b @ b > P + POWER_TOL:
        raise ValueError(f"beamformer power {b @ b} exceeds budget {P}")
    return np.outer(b, b)
