"""Brute-force reference for the bit-delivery problem and a concavity probe.

The oracle does not use any of the closed forms. It enumerates every
binary mode vector, walks a barycentric lattice over the time simplex
``tau_0 + ... + tau_K = T`` and, per lattice point, gives each
conventional node the largest power allowed by both the interference
threshold and the energy harvested before its slot (bits are increasing in
power, so this is exact for fixed times and modes).
"""

from __future__ import annotations

import csv
import itertools
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, List, Optional, Sequence, Tuple

import numpy as np

from .channels import trial_rng
from .errors import ValidationError
from .model import Allocation, ChannelRealization, SystemParams

MAX_ORACLE_HOPS = 3


@dataclass(frozen=True)
class GridSpec:
    """Lattice resolution: number of steps along each time coordinate."""

    resolution: int = 64

    def __post_init__(self):
        if int(self.resolution) != self.resolution or self.resolution < 8:
            raise ValidationError("resolution", f"must be an integer >= 8, got {self.resolution!r}")


@dataclass(frozen=True)
class OracleResult:
    delivery: float
    allocation: Allocation
    resolution: int
    modes_evaluated: int
    points_evaluated: int


def simplex_lattice(dim: int, resolution: int) -> np.ndarray:
    """All nonnegative integer vectors of length ``dim`` summing to ``resolution``."""
    if dim == 1:
        return np.array([[resolution]], dtype=np.int64)
    # stars and bars: choose dim-1 bar positions among resolution+dim-1 slots
    bars = np.array(list(itertools.combinations(range(resolution + dim - 1), dim - 1)), dtype=np.int64)
    edges = np.concatenate(
        [np.full((len(bars), 1), -1), bars, np.full((len(bars), 1), resolution + dim - 1)], axis=1
    )
    return np.diff(edges, axis=1) - 1


def _bits_for_modes(taus: np.ndarray, modes: Sequence[int], ch: ChannelRealization, params: SystemParams):
    """Per-link bits (P, K) and the powers used, for lattice times ``taus`` of shape (P, K+1)."""
    k_hops = params.num_hops
    zeta_pt = params.zeta_pt
    harvest_time = np.cumsum(taus, axis=1)[:, :k_hops]  # tau_0 + ... + tau_{k-1}
    slot = taus[:, 1:]
    bits = np.empty_like(slot)
    power = np.zeros_like(slot)
    for k in range(k_hops):
        if modes[k]:
            bits[:, k] = slot[:, k] * params.backscatter_rates[k]
            continue
        energy = zeta_pt * ch.h[k] * harvest_time[:, k]
        with np.errstate(divide="ignore", invalid="ignore"):
            pk = np.where(slot[:, k] > 0, energy / slot[:, k], 0.0)
        pk = np.minimum(pk, params.interference_threshold / ch.f[k])
        power[:, k] = pk
        bits[:, k] = slot[:, k] * params.bandwidth * np.log2(1.0 + pk * ch.gamma[k])
    return bits, power


def brute_force_primal(
    ch: ChannelRealization,
    params: SystemParams,
    grid: GridSpec = GridSpec(),
    modes: Optional[Iterable[Sequence[int]]] = None,
) -> OracleResult:
    """Best max-min delivery over lattice times and binary modes.

    ``modes`` restricts the enumeration, e.g. ``[(0, 0)]`` for the
    conventional-only problem. Always a lower bound on the continuous
    optimum for the same mode set.
    """
    k_hops = params.num_hops
    if k_hops > MAX_ORACLE_HOPS:
        raise ValidationError("num_hops", f"oracle enumerates at most {MAX_ORACLE_HOPS} hops, got {k_hops}")
    if ch.num_hops != k_hops:
        raise ValidationError("channel", "hop count differs from params")
    T = params.block_duration
    n = grid.resolution
    taus = simplex_lattice(k_hops + 1, n).astype(float) * (T / n)
    mode_list = [tuple(int(v) for v in m) for m in (modes if modes is not None else itertools.product((0, 1), repeat=k_hops))]

    best = (-math.inf, None, None, None)
    for m in mode_list:
        bits, power = _bits_for_modes(taus, m, ch, params)
        delivery = bits.min(axis=1)
        i = int(np.argmax(delivery))  # first maximizer: deterministic
        if delivery[i] > best[0]:
            best = (float(delivery[i]), m, i, (bits[i], power[i]))
    value, m, i, (bits_i, power_i) = best
    alloc = _as_allocation(taus[i], m, power_i, bits_i, ch, params)
    return OracleResult(value, alloc, n, len(mode_list), len(taus) * len(mode_list))


def _as_allocation(tau_row, m, power, bits, ch, params) -> Allocation:
    k_hops = params.num_hops
    tau = tuple(float(v) for v in tau_row[1:])
    p = tuple(float(v) if not m[k] else 0.0 for k, v in enumerate(power))
    omega = tuple(params.bandwidth * math.log2(1.0 + pk * gk) for pk, gk in zip(p, ch.gamma))
    x = tuple(params.backscatter_rates[k] if m[k] else omega[k] for k in range(k_hops))
    e = tuple(p[k] * tau[k] for k in range(k_hops))
    return Allocation(
        tau0=float(tau_row[0]),
        tau=tau,
        c=tuple(m),
        p=p,
        e=e,
        omega=omega,
        x=x,
        per_link_bits=tuple(float(b) for b in bits),
        delivery=float(min(bits)),
        feasible=True,
    )


def check_allocation_constraints(alloc: Allocation, ch: ChannelRealization, params: SystemParams, rtol: float = 1e-9) -> List[str]:
    """Names of violated constraints (time budget, IPC, CPC, slot bounds); empty when all hold."""
    problems = []
    T = params.block_duration
    total = alloc.tau0 + math.fsum(alloc.tau)
    if abs(total - T) > 1e-12 * max(1.0, T):
        problems.append(f"time budget: sum={total!r} != T={T!r}")
    if alloc.tau0 < 0 or any(t < 0 for t in alloc.tau):
        problems.append("negative slot")
    harvested_time = alloc.tau0
    for k in range(alloc.num_hops):
        pk = alloc.p[k]
        if pk * ch.f[k] > params.interference_threshold * (1 + 1e-12) + 1e-300:
            problems.append(f"IPC at hop {k + 1}")
        avail = params.zeta_pt * ch.h[k] * harvested_time
        if alloc.e[k] > avail * (1 + rtol) + 1e-300:
            problems.append(f"CPC at hop {k + 1}")
        harvested_time += alloc.tau[k]
    return problems


def delivery_bits(tau: np.ndarray, phi: np.ndarray, e: np.ndarray, ch: ChannelRealization, params: SystemParams) -> float:
    """min_k of ``phi W log2(1 + e gamma / phi) + (tau - phi) B`` (zero-length phi contributes 0)."""
    gamma = np.asarray(ch.gamma)
    bb = np.asarray(params.backscatter_rates)
    with np.errstate(divide="ignore", invalid="ignore"):
        conv = np.where(phi > 0, phi * params.bandwidth * np.log2(1.0 + e * gamma / np.where(phi > 0, phi, 1.0)), 0.0)
    return float(np.min(conv + (tau - phi) * bb))


def random_feasible_point(rng: np.random.Generator, ch: ChannelRealization, params: SystemParams):
    """Uniform-ish feasible (tau, phi, e) in the convexified problem's domain."""
    k_hops = params.num_hops
    times = rng.dirichlet(np.ones(k_hops + 1)) * params.block_duration
    tau = times[1:]
    phi = tau * rng.uniform(0.0, 1.0, size=k_hops)
    harvested = params.zeta_pt * np.asarray(ch.h) * np.cumsum(times)[:k_hops]
    ipc = params.interference_threshold / np.asarray(ch.f) * phi
    e = np.minimum(harvested, ipc) * rng.uniform(0.0, 1.0, size=k_hops)
    return tau, phi, e


@dataclass(frozen=True)
class ConcavityReport:
    trials: int
    violations: int
    worst_gap: float

    @property
    def passed(self) -> bool:
        return self.violations == 0


def concavity_check(
    ch: ChannelRealization,
    params: SystemParams,
    trials: int,
    seed: int,
    tol: float = 1e-9,
    invert: bool = False,
    pairs: Optional[Sequence[Tuple[tuple, tuple]]] = None,
) -> ConcavityReport:
    """Midpoint test of joint concavity of max-min bits in (tau, phi, e).

    A violation is ``R(mid) < (R(x) + R(y)) / 2 - tol * scale``. With
    ``invert=True`` the inequality is flipped (a convexity test), which a
    concave, non-affine function must fail; used to prove the harness can
    detect violations. ``pairs`` supplies explicit point pairs instead of
    random ones.
    """
    if trials < 1:
        raise ValidationError("trials", f"must be >= 1, got {trials!r}")
    if pairs is None:
        rng = trial_rng(seed, 0, stream=7)
        pairs = [
            (random_feasible_point(rng, ch, params), random_feasible_point(rng, ch, params))
            for _ in range(trials)
        ]
    violations = 0
    worst = 0.0
    for a, b in pairs:
        ra = delivery_bits(*a, ch, params)
        rb = delivery_bits(*b, ch, params)
        mid = tuple(0.5 * (np.asarray(u) + np.asarray(v)) for u, v in zip(a, b))
        rm = delivery_bits(*mid, ch, params)
        scale = max(1.0, abs(ra), abs(rb))
        gap = (rm - 0.5 * (ra + rb)) / scale
        if invert:
            gap = -gap
        if gap < -tol:
            violations += 1
        worst = min(worst, gap)
    return ConcavityReport(trials=len(pairs), violations=violations, worst_gap=worst)


def export_oracle_csv(rows: Sequence[dict], path) -> Path:
    """Write oracle comparison rows with a fixed column order."""
    path = Path(path)
    fields = list(rows[0].keys()) if rows else ["instance", "oracle_bits", "solver_bits", "rel_gap"]
    try:
        with path.open("w", newline="") as fh:
            w = csv.DictWriter(fh, fieldnames=fields, lineterminator="\n")
            w.writeheader()
            for r in rows:
                w.writerow({k: (f"{v:.12g}" if isinstance(v, float) else v) for k, v in r.items()})
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc}") from exc
    return path
