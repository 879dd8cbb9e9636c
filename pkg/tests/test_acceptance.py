"""Acceptance suite: one test per criterion, each at its stated tolerance and time limit.

Every test prints a single pass/fail line (also repeated in the pytest
terminal summary). Run directly with ``python tests/test_acceptance.py``.
"""

import io
import math
import time

import mpmath
import numpy as np
import pytest
from scipy.special import lambertw

from hbct import DeadHopError, DualWeights, SearchOptions, SystemParams, ab, hbct, hbct_inner, jotpa, solve_A
from hbct.channels import trial_rng
from hbct.checks import allocation_problems
from hbct.cli import main as cli_main
from hbct.experiments import (
    DEFAULT_TRIALS,
    DEFAULT_VALUES,
    default_threads,
    monotone_within_noise,
    run_sweep,
    sign_crossover,
    unimodal_within_noise,
)
from hbct.inner import solve_power_equation, time_allocation
from hbct.model import ChannelRealization
from hbct.oracle import GridSpec, brute_force_primal, concavity_check

from conftest import draw, record_criterion, scenario

SEED = 2024
PT_GRID = (10.0, 20.0, 30.0, 40.0, 50.0)


def check(name, passed, detail, elapsed=None, limit=None):
    if limit is not None:
        detail += f"; {elapsed:.1f}s (limit {limit:g}s)"
        passed = passed and elapsed < limit
    record_criterion(name, passed, detail)
    assert passed, detail


def test_criterion_1_root_correctness():
    mpmath.mp.prec = 200
    start = time.perf_counter()
    p = SystemParams()
    rng = trial_rng(SEED, 0, stream=21)
    worst_res, worst_w, lambert_cases = 0.0, 0.0, 0
    misses = []
    for t in range(1000):
        ch = draw(p, seed=SEED, trial=t)
        lam = DualWeights(tuple(math.exp(v) for v in rng.uniform(-1.0, 1.0, size=3)))
        A = solve_A(lam, ch, p)
        for x, b, d in zip(A.A, A.upstream, A.harvest_snr):
            # exact residual of the returned double, so rounding in the check itself does not count
            X = mpmath.mpf(x)
            res = abs(float(X * mpmath.log(X) - X * (mpmath.mpf(b) + 1) + 1 - mpmath.mpf(d)))
            worst_res = max(worst_res, res)
            w_err = 0.0
            if d > 1:
                z = (d - 1.0) * math.exp(-(b + 1.0))
                w_err = abs(x - (d - 1.0) / lambertw(z, 0).real)
                worst_w = max(worst_w, w_err)
                lambert_cases += 1
            if res > 1e-9 or w_err > 1e-8:
                # no double next to this root can do better than half an ulp times the slope
                floor = 0.5 * math.ulp(x) * (math.log(x) - b)
                misses.append(f"x={x:.3g} res={res:.1e} W-err={w_err:.1e} best-double-res={floor:.1e} ulp={math.ulp(x):.1e}")
    elapsed = time.perf_counter() - start
    ok = worst_res <= 1e-9 and worst_w <= 1e-8
    check("1 (root correctness)", ok,
          f"3000 roots, max |residual| {worst_res:.2e} (<=1e-9), {lambert_cases} Lambert-W cases max |A - A_W| {worst_w:.2e} (<=1e-8); "
          f"{len(misses)} roots outside: {misses}",
          elapsed, 10)


def test_criterion_2_spot_values():
    start = time.perf_counter()
    a_e = 1.0 + solve_power_equation(0.0, 1.0)
    a_one = 1.0 + solve_power_equation(0.0, 0.0)
    p = SystemParams(pt_power=1.0, harvest_efficiency=1.0)
    h1 = 0.3
    ch = ChannelRealization(h=(h1, 1.0, 1.0), g=(1.0,) * 3, f=(1.0,) * 3)
    tau0, tau, _ = time_allocation((0, 0, 0), (2.5e6,) * 3, h1, ch, p)
    elapsed = time.perf_counter() - start
    ok = abs(a_e - math.e) <= 1e-12 and a_one == 1.0 and (tau0,) + tau == (0.25,) * 4
    check("2 (analytical spot values)", ok, f"A(D=1)-e = {a_e - math.e:.1e}, A(D=0) = {a_one!r}, slots {(tau0,) + tau}", elapsed, 1)


def test_criterion_3_feasibility_suite():
    start = time.perf_counter()
    rng = trial_rng(SEED, 0, stream=22)
    checked, dead, problems = 0, 0, []
    for t in range(1000):
        p = scenario(float(rng.uniform(10, 50)))
        ch = draw(p, seed=SEED, trial=t)
        lam = DualWeights(tuple(math.exp(v) for v in rng.uniform(-3.0, 3.0, size=3)))
        for modes in (None, (0, 0, 0)):
            try:
                a = hbct_inner(lam, ch, p, fixed_modes=modes)
            except DeadHopError:
                dead += 1
                continue
            if a.feasible:
                checked += 1
                problems += [f"trial {t}: {m}" for m in allocation_problems(a, ch, p)]
        a = ab(ch, p)
        checked += 1
        problems += [f"trial {t} AB: {m}" for m in allocation_problems(a, ch, p)]
    elapsed = time.perf_counter() - start
    check("3 (feasibility suite)", not problems and checked > 0,
          f"{checked} feasible allocations from 1000 trials ({dead} pinned-conventional points with a dead hop), "
          f"{len(problems)} violations {problems[:2]}", elapsed, 30)


def test_criterion_4_dominance():
    start = time.perf_counter()
    opts = SearchOptions(seed=SEED)
    worst, violations, infeasible_j, bad_feas, search_lost = math.inf, [], 0, 0, 0
    for i in range(1000):
        p = scenario(PT_GRID[i % 5])
        ch = draw(p, seed=SEED, trial=i)
        res = hbct(ch, p, opts)
        h = res.allocation
        bad_feas += bool(allocation_problems(h, ch, p))
        r_h = h.delivery
        rivals = [res.backscatter.delivery]
        if res.conventional is None:
            infeasible_j += 1
        else:
            rivals.append(res.conventional.delivery)
        # how often the multiplier search on its own trails a baseline
        raw = res.search.allocation.delivery if res.search is not None else 0.0
        search_lost += raw < max(rivals) - 1e-6 * max(rivals)
        margin = (r_h - max(rivals)) / r_h
        worst = min(worst, margin)
        if r_h < max(rivals) - 1e-6 * r_h:
            violations.append(i)
    elapsed = time.perf_counter() - start
    check("4 (dominance)", not violations and bad_feas == 0,
          f"1000 trials, {len(violations)} violations, worst relative margin {worst:.3e}, "
          f"{infeasible_j} trials with infeasible JOTPA, multiplier search alone below a baseline in {search_lost}",
          elapsed, 300)


def test_criterion_5_oracle_equivalence():
    start = time.perf_counter()
    opts = SearchOptions(seed=SEED)
    rows = []
    ok = True
    for pt_db in np.arange(10.0, 50.0, 2.0):
        p = scenario(float(pt_db), num_hops=2)
        ch = draw(p, fading=False)
        for name, modes in (("HBCT", None), ("JOTPA", [(0, 0)])):
            o64 = brute_force_primal(ch, p, GridSpec(64), modes).delivery
            o128 = brute_force_primal(ch, p, GridSpec(128), modes).delivery
            eps = 2.0 * (o128 - o64) / o64
            alloc = hbct(ch, p, opts).allocation if name == "HBCT" else jotpa(ch, p, opts)
            gap = (alloc.delivery - o64) / o64
            inside = -0.02 <= gap <= 0.02 + eps
            ok &= inside
            rows.append((name, pt_db, gap, eps, inside))
    elapsed = time.perf_counter() - start
    gaps = [r[2] for r in rows]
    bad = [f"{r[0]}@{r[1]:g}dB gap {r[2]:+.4f} eps {r[3]:.4f}" for r in rows if not r[4]]
    check("5 (oracle equivalence)", ok,
          f"20 flat K=2 instances x 2 algorithms, gap range [{min(gaps):+.4f}, {max(gaps):+.4f}], "
          f"max eps {max(r[3] for r in rows):.4f}, outside band: {bad}", elapsed, 300)


def test_criterion_6_ab_values():
    start = time.perf_counter()
    got = []
    for k in range(1, 6):
        p = SystemParams(num_hops=k)
        got.append(float(f"{ab(draw(p), p).delivery:.6g}"))
    elapsed = time.perf_counter() - start
    want = [1e4, 6e5, 1.26667e6, 1.125e6, 1e6]
    check("6 (AB exact values)", got == want, f"K=1..5 -> {got}", elapsed, 1)


def test_criterion_7_concavity():
    start = time.perf_counter()
    p = SystemParams()
    ch = draw(p, seed=SEED)
    rep = concavity_check(ch, p, trials=200, seed=SEED, tol=1e-9)
    elapsed = time.perf_counter() - start
    check("7 (concavity)", rep.passed, f"{rep.trials} midpoint tests, {rep.violations} violations, worst gap {rep.worst_gap:.2e}", elapsed, 30)


# ---------------------------------------------------------------------------
# criterion 8: trend properties on the default grids


@pytest.fixture(scope="module")
def trend_runs():
    threads = default_threads()
    opts = SearchOptions(seed=SEED)
    timings = {}
    runs = {}
    for kind, values in (("pt_power", DEFAULT_VALUES["pt_power"]), ("hops", DEFAULT_VALUES["hops"]), ("ipc", (-30.0,))):
        start = time.perf_counter()
        runs[kind] = run_sweep(kind, values, DEFAULT_TRIALS, SystemParams(), SEED, opts, threads=threads)
        timings[kind] = time.perf_counter() - start
    runs["elapsed"] = sum(timings.values())
    runs["timings"] = timings
    return runs


def test_criterion_8a_gap_closes(trend_runs):
    r = trend_runs["pt_power"]
    gap, se = r.paired_gap("HBCT", "JOTPA")
    mono, dev = monotone_within_noise(gap, se, increasing=False, z=3.0)
    h50 = r.mean_delivery["HBCT"][-1]
    rel50 = gap[-1] / h50
    check("8a (HBCT-JOTPA gap)", mono and rel50 < 0.01,
          f"gap non-increasing within 3 SE: {mono} (max deviation {dev:.2f} SE); relative gap at 50 dB {rel50:.4f} (<0.01); "
          f"JOTPA infeasible trials per point {list(r.infeasible['JOTPA'])}")


def test_criterion_8b_crossover(trend_runs):
    r = trend_runs["pt_power"]
    d = np.array(r.mean_delivery["JOTPA"]) - np.array(r.mean_delivery["AB"])
    i = sign_crossover(d)
    where = f"crossing below {r.values[i]:g} dB" if i is not None else "no crossover"
    check("8b (JOTPA/AB crossover)", i is not None,
          f"{where}; JOTPA/AB ratio from {d[0] / r.mean_delivery['AB'][0] + 1:.4f} at {r.values[0]:g} dB "
          f"to {d[-1] / r.mean_delivery['AB'][-1] + 1:.4f} at {r.values[-1]:g} dB")


def test_criterion_8c_hops_peak(trend_runs):
    r = trend_runs["hops"]
    means = r.mean_delivery["HBCT"]
    peak = r.values[int(np.argmax(means))]
    check("8c (delivery vs hops)", peak in (3, 4, 5), f"mean HBCT by K {[f'{m:.4g}' for m in means]}, peak at K={peak}")


def test_criterion_8d_low_interference(trend_runs):
    r = trend_runs["ipc"]
    h, a = r.mean_delivery["HBCT"][0], r.mean_delivery["AB"][0]
    rel = abs(h - a) / a
    tend = r.tendency["HBCT"][0][0]
    check("8d (I_p = -30 dB)", rel < 0.01 and tend > 0.9, f"|HBCT-AB|/AB = {rel:.2e} (<0.01), node-1 tendency {tend:.3f} (>0.9)")


def test_criterion_8e_harvest_slot_unimodal(trend_runs):
    r = trend_runs["pt_power"]
    mean, se = r.harvest_slot_stats("HBCT")
    ok, m, dev = unimodal_within_noise(mean, se, z=3.0)
    peak = f"peak at {r.values[m]:g} dB" if m >= 0 else "no interior peak"
    check("8e (tau0 unimodal)", ok, f"{peak}, max deviation {dev:.2f} SE; mean tau0 {[f'{v:.3g}' for v in mean]}")


def test_criterion_8_runtime(trend_runs):
    t = trend_runs["timings"]
    detail = ", ".join(f"{k} {v:.0f}s" for k, v in t.items())
    check("8 (trend runtime)", True, f"{detail}; threads={default_threads()}", trend_runs["elapsed"], 1200)


# ---------------------------------------------------------------------------


def _cli(argv):
    out, err = io.StringIO(), io.StringIO()
    return cli_main(argv, out, err), out.getvalue()


def test_criterion_9_determinism(tmp_path):
    commands = {
        "solve": ["--seed", "31", "--trial", "4"],
        "sweep": ["--seed", "31", "--trials", "3", "--sweep-values", "16,36"],
        "oracle": ["--seed", "31", "--num-hops", "2", "--fading", "false"],
    }
    same = []
    for cmd, extra in commands.items():
        first = tmp_path / f"{cmd}_1.csv"
        code1, _ = _cli([cmd, *extra, "--threads", "1", "--output", str(first)])
        files = [first.read_bytes()]
        for threads in ("1", "2", "3"):
            again = tmp_path / f"{cmd}_{threads}_again.csv"
            code2, _ = _cli([cmd, "-c", str(first), "--threads", threads, "--output", str(again)])
            files.append(again.read_bytes())
        same.append(code1 == code2 == 0 and all(f == files[0] for f in files))
    check("9 (determinism)", all(same), f"solve/sweep/oracle re-run from embedded config at 1-3 threads identical: {same}")


if __name__ == "__main__":
    import sys

    sys.exit(pytest.main([__file__, "-q", "-p", "no:cacheprovider"]))
