"""Monte-Carlo sweeps comparing the hybrid allocator with both baselines.

Sweep values are in configuration units: dB for ``pt_power`` and ``ipc``,
hop counts for ``hops``. Trial ``t`` always draws its channels from
``(seed, t)``, so every sweep point sees the same fading sequence and a
run does not depend on how trials are spread over worker processes.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .channels import place_nodes, sample_channels
from .dual import SearchOptions
from .errors import InfeasibleError, PropertyViolation, ValidationError
from .hybrid import hbct
from .model import BACKSCATTER_RATE_TABLE, SystemParams, db_to_linear

ALGORITHMS = ("HBCT", "JOTPA", "AB")
SWEEP_KINDS = ("pt_power", "hops", "ipc")
DOMINANCE_RTOL = 1e-6

DEFAULT_VALUES = {
    "pt_power": tuple(float(v) for v in range(10, 51, 2)),
    "ipc": tuple(float(v) for v in range(-30, 16, 5)),
    "hops": (1, 2, 3, 4, 5),
}
DEFAULT_TRIALS = 500


@dataclass(frozen=True)
class TrialOutcome:
    """One algorithm on one channel draw; ``delivery`` is NaN when infeasible."""

    delivery: float
    c: Tuple[int, ...]
    times: Tuple[float, ...]

    @property
    def feasible(self) -> bool:
        return not math.isnan(self.delivery)


_INFEASIBLE = TrialOutcome(math.nan, (), ())


@dataclass(frozen=True)
class SweepResult:
    """Aggregated sweep.

    Means of delivery count infeasible trials as 0 bits; tendencies and the
    time breakdown average over the feasible trials only (a row of an
    infeasible trial has no times). ``deliveries[algo]`` keeps the raw
    per-trial values, shape (points, trials), with NaN for infeasible;
    ``harvest_slots[algo]`` holds the per-trial harvest-only slot the same way.
    """

    kind: str
    values: Tuple[float, ...]
    num_hops: Tuple[int, ...]
    trials: int
    seed: int
    mean_delivery: Dict[str, Tuple[float, ...]]
    tendency: Dict[str, Tuple[Tuple[float, ...], ...]]
    mean_times: Dict[str, Tuple[Tuple[float, ...], ...]]
    infeasible: Dict[str, Tuple[int, ...]]
    deliveries: Dict[str, np.ndarray] = field(repr=False, compare=False)
    harvest_slots: Dict[str, np.ndarray] = field(repr=False, compare=False, default_factory=dict)

    @property
    def points(self) -> int:
        return len(self.values)

    def stderr(self, algo: str) -> Tuple[float, ...]:
        """Standard error of the mean delivery at every point (infeasible as 0)."""
        d = np.nan_to_num(self.deliveries[algo], nan=0.0)
        n = d.shape[1]
        if n < 2:
            return (0.0,) * len(d)
        return tuple(float(v) for v in d.std(axis=1, ddof=1) / math.sqrt(n))

    def harvest_slot_stats(self, algo: str) -> Tuple[np.ndarray, np.ndarray]:
        """Mean and standard error of the harvest-only slot over feasible trials."""
        t0 = self.harvest_slots[algo]
        n = np.sum(~np.isnan(t0), axis=1)
        mean = np.nanmean(t0, axis=1)
        se = np.where(n > 1, np.nanstd(t0, axis=1, ddof=1) / np.sqrt(np.maximum(n, 1)), 0.0)
        return mean, se

    def paired_gap(self, a: str, b: str) -> Tuple[np.ndarray, np.ndarray]:
        """Mean and standard error of the per-trial difference ``a - b``."""
        d = np.nan_to_num(self.deliveries[a], nan=0.0) - np.nan_to_num(self.deliveries[b], nan=0.0)
        n = d.shape[1]
        se = d.std(axis=1, ddof=1) / math.sqrt(n) if n > 1 else np.zeros(len(d))
        return d.mean(axis=1), se


def params_for_point(kind: str, value, base: SystemParams) -> SystemParams:
    if kind == "pt_power":
        return base.replace(pt_power=db_to_linear(value))
    if kind == "ipc":
        return base.replace(interference_threshold=db_to_linear(value))
    if kind == "hops":
        if int(value) != value or int(value) not in BACKSCATTER_RATE_TABLE:
            raise ValidationError(
                "hops", f"no tabulated backscatter rate for {value!r} hops (available: {sorted(BACKSCATTER_RATE_TABLE)})"
            )
        return base.replace(num_hops=int(value))
    raise ValidationError("kind", f"must be one of {SWEEP_KINDS}, got {kind!r}")


def _outcome(alloc) -> TrialOutcome:
    return TrialOutcome(alloc.delivery, alloc.c, alloc.time_breakdown)


def run_trial(params: SystemParams, seed: int, trial: int, opts: SearchOptions, fading: bool = True, energy_cap: bool = True):
    """All three algorithms on the channel draw ``(seed, trial)``."""
    ch = sample_channels(place_nodes(params), params, seed, trial, fading=fading)
    try:
        res = hbct(ch, params, opts, energy_cap=energy_cap)
    except InfeasibleError:
        return {name: _INFEASIBLE for name in ALGORITHMS}
    return {
        "HBCT": _outcome(res.allocation),
        "JOTPA": _INFEASIBLE if res.conventional is None else _outcome(res.conventional),
        "AB": _INFEASIBLE if res.backscatter is None else _outcome(res.backscatter),
    }


def check_dominance(outcomes: Dict[str, TrialOutcome], rtol: float = DOMINANCE_RTOL) -> Optional[str]:
    """Describe the violation if the hybrid result trails a baseline, else None."""
    h = outcomes["HBCT"].delivery if outcomes["HBCT"].feasible else 0.0
    for name in ("JOTPA", "AB"):
        o = outcomes[name]
        if o.feasible and h < o.delivery - rtol * h:
            return f"HBCT {h!r} < {name} {o.delivery!r}"
    return None


def _run_task(task):
    params, seed, trial, opts, fading, energy_cap = task
    return run_trial(params, seed, trial, opts, fading, energy_cap)


def default_threads() -> int:
    return len(os.sched_getaffinity(0)) if hasattr(os, "sched_getaffinity") else (os.cpu_count() or 1)


def run_sweep(
    kind: str,
    values: Sequence,
    trials: int,
    params: SystemParams = SystemParams(),
    seed: int = 0,
    opts: SearchOptions = SearchOptions(),
    threads: Optional[int] = None,
    fading: bool = True,
    energy_cap: bool = True,
) -> SweepResult:
    """Run every algorithm on ``trials`` draws at each sweep value.

    Raises :class:`PropertyViolation` if any trial breaks the dominance of
    the hybrid allocator over both baselines.
    """
    if kind not in SWEEP_KINDS:
        raise ValidationError("kind", f"must be one of {SWEEP_KINDS}, got {kind!r}")
    values = tuple(values)
    if not values:
        raise ValidationError("values", "must be non-empty")
    if isinstance(trials, bool) or not isinstance(trials, int) or trials < 1:
        raise ValidationError("trials", f"must be an integer >= 1, got {trials!r}")
    point_params = [params_for_point(kind, v, params) for v in values]
    tasks = [(pp, seed, t, opts, fading, energy_cap) for pp in point_params for t in range(trials)]
    threads = default_threads() if threads is None else threads
    if threads < 1:
        raise ValidationError("threads", f"must be >= 1, got {threads!r}")
    if threads == 1:
        results = [_run_task(t) for t in tasks]
    else:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(_run_task, tasks, chunksize=max(1, len(tasks) // (8 * threads))))

    mean_delivery = {a: [] for a in ALGORITHMS}
    tendency = {a: [] for a in ALGORITHMS}
    mean_times = {a: [] for a in ALGORITHMS}
    infeasible = {a: [] for a in ALGORITHMS}
    deliveries = {a: np.empty((len(values), trials)) for a in ALGORITHMS}
    harvest_slots = {a: np.full((len(values), trials), np.nan) for a in ALGORITHMS}
    for i, (v, pp) in enumerate(zip(values, point_params)):
        chunk = results[i * trials:(i + 1) * trials]
        for t, outcomes in enumerate(chunk):
            bad = check_dominance(outcomes)
            if bad:
                raise PropertyViolation(f"dominance violated at {kind}={v!r}, trial {t}: {bad}")
        k_hops = pp.num_hops
        for a in ALGORITHMS:
            rows = [o[a] for o in chunk]
            ok = [o for o in rows if o.feasible]
            deliveries[a][i] = [o.delivery for o in rows]
            harvest_slots[a][i] = [o.times[0] if o.feasible else math.nan for o in rows]
            # fsum in trial order keeps the means independent of scheduling
            mean_delivery[a].append(math.fsum(o.delivery for o in ok) / trials)
            infeasible[a].append(trials - len(ok))
            if ok:
                tendency[a].append(tuple(math.fsum(o.c[k] for o in ok) / len(ok) for k in range(k_hops)))
                mean_times[a].append(tuple(math.fsum(o.times[k] for o in ok) / len(ok) for k in range(k_hops + 1)))
            else:
                tendency[a].append((math.nan,) * k_hops)
                mean_times[a].append((math.nan,) * (k_hops + 1))
    return SweepResult(
        kind=kind,
        values=values,
        num_hops=tuple(pp.num_hops for pp in point_params),
        trials=trials,
        seed=seed,
        mean_delivery={a: tuple(v) for a, v in mean_delivery.items()},
        tendency={a: tuple(v) for a, v in tendency.items()},
        mean_times={a: tuple(v) for a, v in mean_times.items()},
        infeasible={a: tuple(v) for a, v in infeasible.items()},
        deliveries=deliveries,
        harvest_slots=harvest_slots,
    )


# ---------------------------------------------------------------------------
# export


def _fmt(v) -> str:
    if isinstance(v, (int, np.integer)) and not isinstance(v, bool):
        return str(int(v))
    v = float(v)
    if math.isnan(v):
        return "nan"
    return f"{v:.12g}"


def csv_header(max_hops: int) -> List[str]:
    return (
        ["sweep_value", "algo", "mean_delivery_bits"]
        + [f"tendency_su{k}" for k in range(1, max_hops + 1)]
        + [f"mean_tau{k}" for k in range(0, max_hops + 1)]
        + ["trials", "seed", "infeasible_trials"]
    )


def csv_rows(result: Optional[SweepResult]) -> List[List[str]]:
    if result is None:
        return []
    max_hops = max(result.num_hops)
    rows = []
    for i, v in enumerate(result.values):
        k_hops = result.num_hops[i]
        pad_t = [""] * (max_hops - k_hops)
        for a in ALGORITHMS:
            rows.append(
                [_fmt(v), a, _fmt(result.mean_delivery[a][i])]
                + [_fmt(x) for x in result.tendency[a][i]] + pad_t
                + [_fmt(x) for x in result.mean_times[a][i]] + pad_t
                + [str(result.trials), str(result.seed), str(result.infeasible[a][i])]
            )
    return rows


def _write(path, text: str) -> Path:
    path = Path(path)
    try:
        with path.open("w", newline="") as fh:
            fh.write(text)
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc.strerror or exc}") from exc
    return path


def _meta_lines(config_lines: Sequence[str]) -> str:
    return "".join(f"#@ {line}\n" for line in config_lines)


def export_csv(result: Optional[SweepResult], path, config_lines: Sequence[str] = (), max_hops: Optional[int] = None) -> Path:
    """Comma-separated sweep table, optionally preceded by ``#@ key=value`` config lines.

    ``result=None`` writes only the header (``max_hops`` columns, default 3).
    Cells of nodes a deployment does not have are left empty.
    """
    if max_hops is None:
        max_hops = max(result.num_hops) if result is not None else 3
    lines = [",".join(csv_header(max_hops))] + [",".join(r) for r in csv_rows(result)]
    return _write(path, _meta_lines(config_lines) + "\n".join(lines) + "\n")


def export_plot_data(result: SweepResult, path, config_lines: Sequence[str] = ()) -> Path:
    """Whitespace-separated columns: sweep value, mean delivery per algorithm, hybrid tendencies."""
    max_hops = max(result.num_hops)
    head = ["sweep_value"] + [f"{a}_bits" for a in ALGORITHMS] + [f"HBCT_su{k}" for k in range(1, max_hops + 1)]
    out = ["# " + " ".join(head)]
    for i, v in enumerate(result.values):
        tend = list(result.tendency["HBCT"][i]) + [math.nan] * (max_hops - result.num_hops[i])
        out.append(" ".join([_fmt(v)] + [_fmt(result.mean_delivery[a][i]) for a in ALGORITHMS] + [_fmt(x) for x in tend]))
    return _write(path, _meta_lines(config_lines) + "\n".join(out) + "\n")


# ---------------------------------------------------------------------------
# trend analysis


def isotonic_fit(y: Sequence[float], weights: Optional[Sequence[float]] = None, increasing: bool = True) -> np.ndarray:
    """Weighted least-squares monotone fit (pool adjacent violators)."""
    y = np.asarray(y, dtype=float)
    w = np.ones_like(y) if weights is None else np.asarray(weights, dtype=float)
    if not increasing:
        return -isotonic_fit(-y, w, True)
    blocks = []  # [mean, weight, count]
    for yi, wi in zip(y, w):
        blocks.append([yi, wi, 1])
        while len(blocks) > 1 and blocks[-2][0] > blocks[-1][0]:
            m2, w2, n2 = blocks.pop()
            m1, w1, n1 = blocks.pop()
            blocks.append([(m1 * w1 + m2 * w2) / (w1 + w2), w1 + w2, n1 + n2])
    return np.concatenate([np.full(n, m) for m, _, n in blocks]) if blocks else y.copy()


def _weights(se: Sequence[float]) -> np.ndarray:
    se = np.asarray(se, dtype=float)
    floor = max(float(se.max()) * 1e-6, 1e-300) if se.size else 1.0
    return 1.0 / np.maximum(se, floor) ** 2


def monotone_within_noise(y, se, increasing: bool = False, z: float = 3.0) -> Tuple[bool, float]:
    """Whether ``y`` differs from its monotone fit by at most ``z`` standard errors anywhere.

    Returns the verdict and the largest deviation measured in standard errors.
    """
    y = np.asarray(y, dtype=float)
    se = np.asarray(se, dtype=float)
    fit = isotonic_fit(y, _weights(se), increasing)
    dev = _scaled_dev(y, fit, se)
    return dev <= z, dev


def _scaled_dev(y, fit, se) -> float:
    diff = np.abs(y - fit)
    safe = np.where(se > 0, se, np.inf)
    scaled = np.where(diff == 0, 0.0, diff / safe)
    return float(scaled.max()) if scaled.size else 0.0


def unimodal_within_noise(y, se, z: float = 3.0) -> Tuple[bool, int, float]:
    """Best rise-then-fall fit; (verdict, peak index, deviation in standard errors).

    Every split point gives a nondecreasing fit of the head and a
    nonincreasing fit of the tail, whose concatenation is unimodal. The
    verdict also requires an interior peak: the fit must strictly rise from
    the first point and strictly fall to the last one.
    """
    y = np.asarray(y, dtype=float)
    se = np.asarray(se, dtype=float)
    w = _weights(se)
    best = (math.inf, -1)
    for m in range(1, len(y)):
        fit = np.concatenate([isotonic_fit(y[:m], w[:m], True), isotonic_fit(y[m:], w[m:], False)])
        top = fit.max()
        if not (top > fit[0] and top > fit[-1]):
            continue
        dev = _scaled_dev(y, fit, se)
        if dev < best[0]:
            best = (dev, int(np.argmax(fit)))
    dev, m = best
    return dev <= z, m, dev


def sign_crossover(diff: Sequence[float]) -> Optional[int]:
    """First index ``i`` with every ``diff[:i] < 0`` and every ``diff[i:] > 0``, else None."""
    d = list(diff)
    for i in range(1, len(d)):
        if all(v < 0 for v in d[:i]) and all(v > 0 for v in d[i:]):
            return i
    return None
