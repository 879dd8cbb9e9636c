"""Run-time invariant checks shared by the ``selftest`` command and the test suite."""

from __future__ import annotations

import math
from typing import Callable, List, Tuple

from .baselines import ab
from .channels import place_nodes, sample_channels, trial_rng
from .dual import SearchOptions
from .errors import PropertyViolation
from .experiments import TrialOutcome, check_dominance
from .hybrid import hbct
from .inner import Problem, _excess, power_equation, solve_power_equation
from .model import Allocation, BACKSCATTER_RATE_TABLE, ChannelRealization, SystemParams, db_to_linear
from .oracle import check_allocation_constraints, concavity_check

BITS_RTOL = 1e-6


def allocation_problems(alloc: Allocation, ch: ChannelRealization, params: SystemParams, bits_rtol: float = BITS_RTOL) -> List[str]:
    """Constraint violations of a feasible allocation, including unequal per-link bits."""
    problems = check_allocation_constraints(alloc, ch, params)
    if any(c not in (0, 1) for c in alloc.c):
        problems.append(f"modes not binary: {alloc.c}")
    bits = alloc.per_link_bits
    top = max(bits)
    if top > 0 and (top - min(bits)) > bits_rtol * top:
        problems.append(f"per-link bits differ: {bits}")
    return problems


def require(ok: bool, message: str):
    if not ok:
        raise PropertyViolation(message)


def _spot_values():
    require(abs(1.0 + solve_power_equation(0.0, 1.0) - math.e) <= 1e-12, "D=1 must give A=e")
    require(solve_power_equation(0.0, 0.0) == 0.0, "D=0 must give A=1 exactly")
    for k, b in BACKSCATTER_RATE_TABLE.items():
        p = SystemParams(num_hops=k)
        ch = ChannelRealization(h=(1.0,) * k, g=(1.0,) * k, f=(1.0,) * k)
        r = ab(ch, p).delivery
        require(math.isclose(r, b / k, rel_tol=1e-12), f"AB delivery for K={k}: {r!r}")
    return "power-equation spot values and AB bits"


def _roots(seed: int, n: int):
    rng = trial_rng(seed, 0, stream=11)
    worst = 0.0
    for t in range(n):
        p = SystemParams(pt_power=db_to_linear(float(rng.uniform(10, 50))))
        ch = sample_channels(place_nodes(p), p, seed, t)
        prob = Problem(ch, p)
        lam = [math.exp(v) for v in rng.uniform(-1, 1, size=p.num_hops)]
        ex = _excess(prob, lam)
        acc = 0.0
        for k in range(p.num_hops):
            b = 0.0 if k == 0 else prob.zeta_pt * acc / lam[k]
            res = abs(power_equation(ex[k], b, prob.d[k]))
            worst = max(worst, res)
            acc += lam[k] * prob.wgh[k] / (1.0 + ex[k])
    require(worst <= 1e-9, f"power-equation residual {worst!r}")
    return f"{n} random roots, worst residual {worst:.2e}"


def _feasibility_and_dominance(seed: int, n: int, opts: SearchOptions):
    checked = 0
    for t in range(n):
        pt_db = (10, 20, 30, 40, 50)[t % 5]
        p = SystemParams(pt_power=db_to_linear(pt_db))
        ch = sample_channels(place_nodes(p), p, seed, t)
        res = hbct(ch, p, opts)
        allocs = {"HBCT": res.allocation}
        if res.backscatter is not None:
            allocs["AB"] = res.backscatter
        if res.conventional is not None:
            allocs["JOTPA"] = res.conventional
            checked += 1
        for name, a in allocs.items():
            probs = allocation_problems(a, ch, p)
            require(not probs, f"{name} trial {t}: {probs}")
        outcomes = {
            name: TrialOutcome(allocs[name].delivery, (), ()) if name in allocs else TrialOutcome(math.nan, (), ())
            for name in ("HBCT", "JOTPA", "AB")
        }
        bad = check_dominance(outcomes)
        require(bad is None, f"trial {t}: {bad}")
    return f"{n} trials feasible and dominant ({checked} with a feasible JOTPA)"


def _concavity(seed: int, n: int):
    p = SystemParams()
    ch = sample_channels(place_nodes(p), p, seed, 0)
    rep = concavity_check(ch, p, n, seed)
    require(rep.passed, f"{rep.violations} concavity violations, worst gap {rep.worst_gap!r}")
    return f"{n} midpoint tests, worst gap {rep.worst_gap:.2e}"


def selftest(seed: int = 0, trials: int = 10, opts: SearchOptions = SearchOptions(restarts=4)) -> List[Tuple[str, bool, str]]:
    """Run every check; returns (name, passed, detail) rows and never raises PropertyViolation."""
    suite: List[Tuple[str, Callable[[], str]]] = [
        ("spot_values", _spot_values),
        ("root_residuals", lambda: _roots(seed, 10 * trials)),
        ("feasibility_dominance", lambda: _feasibility_and_dominance(seed, trials, opts)),
        ("concavity", lambda: _concavity(seed, 10 * trials)),
    ]
    rows = []
    for name, fn in suite:
        try:
            rows.append((name, True, fn()))
        except PropertyViolation as exc:
            rows.append((name, False, str(exc)))
    return rows
