"""Outer search over the per-link multipliers.

Bit delivery of the closed-form allocation is only piecewise smooth in the
multipliers (the power caps and the mode switches create kinks), so the
search is derivative-free: a Nelder-Mead simplex on log-multipliers with
several deterministic restarts. Only ratios of multipliers matter, so the
first one is pinned and the simplex lives in K-1 dimensions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, List, Optional, Sequence, Tuple

from .channels import trial_rng
from .errors import HbctError, InfeasibleError, NumericalError, ValidationError
from .inner import CPC_RTOL, Problem, _pipeline, _to_allocation
from .model import Allocation, ChannelRealization, DualWeights, SystemParams

# log-multipliers are clipped to this box; beyond it the power equation
# bracket no longer fits in double precision
U_BOUND = 50.0
PENALTY_WEIGHT = 100.0


@dataclass(frozen=True)
class SearchOptions:
    """Multi-start simplex settings.

    ``tolerance`` is the simplex size (largest coordinate distance from the
    best vertex) in log-multiplier space at which a restart stops.
    """

    restarts: int = 8
    max_evals: int = 2000
    tolerance: float = 1e-6
    seed: int = 0
    init_spread: float = 2.0
    init_step: float = 1.0

    def __post_init__(self):
        if self.restarts < 1:
            raise ValidationError("restarts", f"must be >= 1, got {self.restarts!r}")
        if self.max_evals < 1:
            raise ValidationError("max_evals", f"must be >= 1, got {self.max_evals!r}")
        if not self.tolerance > 0:
            raise ValidationError("tolerance", f"must be > 0, got {self.tolerance!r}")


@dataclass(frozen=True)
class SimplexResult:
    x: Tuple[float, ...]
    fun: float
    evals: int
    converged: bool


def nelder_mead(
    func: Callable[[Sequence[float]], float],
    x0: Sequence[float],
    step: float = 1.0,
    tol: float = 1e-6,
    max_evals: int = 2000,
) -> SimplexResult:
    """Minimize ``func`` with the standard reflect/expand/contract/shrink simplex.

    Coefficients 1, 2, 1/2, 1/2. Vertex ordering is a stable sort on the
    objective, so ties always resolve the same way.
    """
    n = len(x0)
    if n == 0:
        return SimplexResult((), func(()), 1, True)
    sim = [list(map(float, x0))]
    for i in range(n):
        v = list(sim[0])
        v[i] += step
        sim.append(v)
    fs = [func(v) for v in sim]
    evals = n + 1
    converged = False
    while True:
        order = sorted(range(n + 1), key=fs.__getitem__)
        sim = [sim[i] for i in order]
        fs = [fs[i] for i in order]
        best = sim[0]
        size = max(abs(v[j] - best[j]) for v in sim[1:] for j in range(n))
        if size <= tol:
            converged = True
            break
        if evals >= max_evals:
            break
        cen = [sum(v[j] for v in sim[:-1]) / n for j in range(n)]
        worst = sim[-1]
        xr = [2.0 * cen[j] - worst[j] for j in range(n)]
        fr = func(xr)
        evals += 1
        if fr < fs[0]:
            xe = [3.0 * cen[j] - 2.0 * worst[j] for j in range(n)]
            fe = func(xe)
            evals += 1
            if fe < fr:
                sim[-1], fs[-1] = xe, fe
            else:
                sim[-1], fs[-1] = xr, fr
            continue
        if fr < fs[-2]:
            sim[-1], fs[-1] = xr, fr
            continue
        if fr < fs[-1]:
            xc = [1.5 * cen[j] - 0.5 * worst[j] for j in range(n)]
            fc = func(xc)
            evals += 1
            if fc <= fr:
                sim[-1], fs[-1] = xc, fc
                continue
        else:
            xc = [0.5 * cen[j] + 0.5 * worst[j] for j in range(n)]
            fc = func(xc)
            evals += 1
            if fc < fs[-1]:
                sim[-1], fs[-1] = xc, fc
                continue
        for i in range(1, n + 1):
            sim[i] = [0.5 * (best[j] + sim[i][j]) for j in range(n)]
            fs[i] = func(sim[i])
        evals += n
    return SimplexResult(tuple(sim[0]), fs[0], evals, converged)


def _lam_from_u(u: Sequence[float]) -> List[float]:
    # node 1's multiplier is the pinned reference
    vals = [0.0] + [min(max(v, -U_BOUND), U_BOUND) for v in u]
    top = max(vals)
    return [math.exp(v - top) for v in vals]


class _Objective:
    """Penalized negative delivery; remembers the best feasible point it has seen."""

    def __init__(self, prob: Problem, fixed_modes, energy_cap: bool):
        self.prob = prob
        self.fixed_modes = fixed_modes
        self.energy_cap = energy_cap
        self.best_value = -math.inf
        self.best_lam: Optional[List[float]] = None
        self.evals = 0

    def __call__(self, u: Sequence[float]) -> float:
        self.evals += 1
        lam = _lam_from_u(u)
        try:
            raw = _pipeline(self.prob, lam, self.fixed_modes, self.energy_cap)
        except (HbctError, OverflowError, ZeroDivisionError):
            return math.inf
        tau, x, worst = raw[5], raw[6], raw[8]
        r = min(t * xk for t, xk in zip(tau, x))
        if worst <= CPC_RTOL:
            if r > self.best_value:
                self.best_value, self.best_lam = r, lam
            return -r
        if not math.isfinite(worst):
            return math.inf
        return -r + PENALTY_WEIGHT * r * worst


def restart_points(num_hops: int, opts: SearchOptions) -> List[Tuple[float, ...]]:
    """Starting log-multipliers: the uniform point first, then seeded uniform draws."""
    dim = num_hops - 1
    pts = [(0.0,) * dim]
    rng = trial_rng(opts.seed, 0, stream=1)
    for _ in range(opts.restarts - 1):
        pts.append(tuple(float(v) for v in rng.uniform(-opts.init_spread, opts.init_spread, size=dim)))
    return pts


@dataclass(frozen=True)
class DualSearchResult:
    weights: DualWeights
    allocation: Allocation
    restart_values: Tuple[float, ...]
    evals: int


def search_lambda(
    ch: ChannelRealization,
    params: SystemParams,
    opts: SearchOptions = SearchOptions(),
    fixed_modes: Optional[Sequence[int]] = None,
    energy_cap: bool = True,
    problem: Optional[Problem] = None,
) -> DualSearchResult:
    """Multi-start search; reports every restart's best value alongside the winner."""
    prob = problem if problem is not None else Problem(ch, params)
    k_hops = prob.k
    starts = restart_points(k_hops, opts) if k_hops > 1 else [()]
    per_restart = []
    evals = 0
    for u0 in starts:
        obj = _Objective(prob, fixed_modes, energy_cap)
        nelder_mead(obj, u0, step=opts.init_step, tol=opts.tolerance, max_evals=opts.max_evals)
        per_restart.append((obj.best_value, obj.best_lam))
        evals += obj.evals
        if k_hops == 1:
            break
    # first restart wins ties
    best_i = max(range(len(per_restart)), key=lambda i: (per_restart[i][0], -i))
    value, lam = per_restart[best_i]
    if lam is None:
        raise InfeasibleError("infeasible scenario: no feasible multipliers found in any restart")
    weights = DualWeights(tuple(lam))
    alloc = _to_allocation(_pipeline(prob, weights.lam, fixed_modes, energy_cap))
    if not alloc.feasible:
        raise NumericalError("best multipliers became infeasible after normalization")
    return DualSearchResult(weights, alloc, tuple(v for v, _ in per_restart), evals)


def optimize_lambda(
    ch: ChannelRealization,
    params: SystemParams,
    opts: SearchOptions = SearchOptions(),
    energy_cap: bool = True,
) -> Tuple[DualWeights, Allocation]:
    """Multipliers maximizing bit delivery of the hybrid allocation, and that allocation."""
    res = search_lambda(ch, params, opts, energy_cap=energy_cap)
    return res.weights, res.allocation
