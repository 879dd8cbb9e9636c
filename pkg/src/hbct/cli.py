"""Command-line entry point: ``hbct {solve,sweep,oracle,selftest}``.

Exit codes: 0 success, 1 invalid input, 2 numerical failure or infeasible
scenario, 3 violated invariant.
"""

from __future__ import annotations

import argparse
import math
import sys
import traceback
from pathlib import Path
from typing import List, Optional, Sequence

from . import checks
from .channels import place_nodes, sample_channels
from .config import DEFAULTS, RunConfig, parse_config
from .errors import HbctError, InfeasibleError, PropertyViolation, ValidationError
from .hybrid import hbct
from .experiments import export_csv, export_plot_data, run_sweep
from .oracle import MAX_ORACLE_HOPS, GridSpec, brute_force_primal

COMMANDS = ("solve", "sweep", "oracle", "selftest")
ORACLE_BAND = 0.02


def _fmt(v) -> str:
    if isinstance(v, bool):
        return str(v).lower()
    if isinstance(v, int):
        return str(v)
    if isinstance(v, float):
        return "nan" if math.isnan(v) else f"{v:.12g}"
    if isinstance(v, (tuple, list)):
        return ",".join(_fmt(x) for x in v)
    return str(v)


def _meta(cfg: RunConfig) -> str:
    return "".join(f"#@ {line}\n" for line in cfg.result_lines())


def _write(path: str, text: str):
    try:
        Path(path).write_text(text)
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc.strerror or exc}") from None


def _allocation_report(name: str, alloc) -> List[str]:
    keys = [
        ("delivery_bits", alloc.delivery),
        ("modes", alloc.c),
        ("tau0", alloc.tau0),
        ("tau", alloc.tau),
        ("power", alloc.p),
        ("energy", alloc.e),
        ("rate_conventional", alloc.omega),
        ("per_link_bits", alloc.per_link_bits),
    ]
    return [f"{name}.{k}={_fmt(v)}" for k, v in keys]


def cmd_solve(cfg: RunConfig, out) -> int:
    params = cfg.params
    ch = sample_channels(place_nodes(params), params, cfg.seed, cfg.trial, fading=cfg.fading)
    res = hbct(ch, params, cfg.search, energy_cap=cfg.energy_cap)
    allocs = {"HBCT": res.allocation, "JOTPA": res.conventional, "AB": res.backscatter}

    lines = [f"channel.h={_fmt(ch.h)}", f"channel.g={_fmt(ch.g)}", f"channel.f={_fmt(ch.f)}"]
    lines.append(f"HBCT.source={res.source}")
    if res.search is not None:
        lines.append(f"HBCT.lambda={_fmt(res.search.weights.lam)}")
    for name, alloc in allocs.items():
        if alloc is None:
            lines.append(f"{name}.delivery_bits=infeasible")
        else:
            lines.extend(_allocation_report(name, alloc))
    out.write("\n".join(lines) + "\n")

    k = params.num_hops
    head = ["algo", "delivery_bits"] + [f"c{i}" for i in range(1, k + 1)] + [f"tau{i}" for i in range(k + 1)] + [f"p{i}" for i in range(1, k + 1)]
    rows = [",".join(head)]
    for name, alloc in allocs.items():
        if alloc is None:
            rows.append(",".join([name, "infeasible"] + [""] * (len(head) - 2)))
            continue
        cells = [name, _fmt(alloc.delivery)] + [str(c) for c in alloc.c] + [_fmt(t) for t in alloc.time_breakdown] + [_fmt(p) for p in alloc.p]
        rows.append(",".join(cells))
    _write(cfg.output or "solve.csv", _meta(cfg) + "\n".join(rows) + "\n")
    return 0


def cmd_sweep(cfg: RunConfig, out) -> int:
    res = run_sweep(
        cfg.sweep_kind, cfg.sweep_values, cfg.trials, cfg.params, cfg.seed, cfg.search,
        threads=cfg.threads, fading=cfg.fading, energy_cap=cfg.energy_cap,
    )
    path = export_csv(res, cfg.output or "sweep.csv", cfg.result_lines())
    if cfg.plot_output:
        export_plot_data(res, cfg.plot_output, cfg.result_lines())
    for i, v in enumerate(res.values):
        cells = " ".join(f"{a}={_fmt(res.mean_delivery[a][i])}" for a in res.mean_delivery)
        out.write(f"{cfg.sweep_kind}={_fmt(v)} {cells}\n")
    out.write(f"wrote {path}\n")
    return 0


def oracle_rows(cfg: RunConfig):
    """Solver vs grid-oracle rows and the grid error estimate used for the upper band.

    The lattice value is a lower bound on the continuous optimum; the
    refinement at twice the resolution gives a Richardson-style estimate
    ``eps = 2 (R_2n - R_n) / R_n`` of how far below it the lattice sits.
    """
    params = cfg.params
    if params.num_hops > MAX_ORACLE_HOPS:
        raise ValidationError("num_hops", f"oracle enumerates at most {MAX_ORACLE_HOPS} hops, got {params.num_hops}")
    ch = sample_channels(place_nodes(params), params, cfg.seed, cfg.trial, fading=cfg.fading)
    n = cfg.oracle_resolution
    rows = []
    try:
        res = hbct(ch, params, cfg.search, energy_cap=cfg.energy_cap)
        solved = {"HBCT": res.allocation, "JOTPA": res.conventional}
    except InfeasibleError:
        solved = {"HBCT": None, "JOTPA": None}
    for name, modes in (("HBCT", None), ("JOTPA", [(0,) * params.num_hops])):
        coarse = brute_force_primal(ch, params, GridSpec(n), modes).delivery
        fine = brute_force_primal(ch, params, GridSpec(2 * n), modes).delivery
        eps = max(0.0, 2.0 * (fine - coarse) / coarse) if coarse > 0 else 0.0
        solver = math.nan if solved[name] is None else solved[name].delivery
        gap = (solver - coarse) / coarse if coarse > 0 else math.nan
        ok = (not math.isnan(gap)) and -ORACLE_BAND <= gap <= ORACLE_BAND + eps
        rows.append({"algo": name, "oracle_bits": coarse, "solver_bits": solver, "rel_gap": gap, "grid_eps": eps, "within_band": ok})
    return rows


def cmd_oracle(cfg: RunConfig, out) -> int:
    rows = oracle_rows(cfg)
    head = ["algo", "oracle_bits", "solver_bits", "rel_gap", "grid_eps", "within_band"]
    lines = [",".join(head)] + [",".join(_fmt(r[h]) for h in head) for r in rows]
    _write(cfg.output or "oracle.csv", _meta(cfg) + "\n".join(lines) + "\n")
    out.write("\n".join(lines) + "\n")
    bad = [r["algo"] for r in rows if not r["within_band"]]
    if bad:
        raise PropertyViolation(f"solver outside the oracle band for {', '.join(bad)}")
    return 0


def cmd_selftest(cfg: RunConfig, out) -> int:
    rows = checks.selftest(cfg.seed)
    for name, ok, detail in rows:
        out.write(f"{'PASS' if ok else 'FAIL'} {name}: {detail}\n")
    if not all(ok for _, ok, _ in rows):
        raise PropertyViolation("selftest failed: " + ", ".join(n for n, ok, _ in rows if not ok))
    return 0


HANDLERS = {"solve": cmd_solve, "sweep": cmd_sweep, "oracle": cmd_oracle, "selftest": cmd_selftest}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="hbct", description="Hybrid backscatter / harvest-then-transmit multi-hop allocation.")
    ap.add_argument("command", choices=COMMANDS)
    ap.add_argument("-c", "--config", help="key=value file (or a file written by this tool)")
    ap.add_argument("--set", action="append", default=[], metavar="KEY=VALUE", help="override any key; repeatable")
    for key in DEFAULTS:
        ap.add_argument("--" + key.replace("_", "-"), dest="key_" + key, metavar="VALUE", help=f"default: {DEFAULTS[key] or '(empty)'}")
    return ap


def _where(exc: BaseException) -> str:
    tb = traceback.extract_tb(exc.__traceback__)
    for frame in reversed(tb):
        p = Path(frame.filename)
        if p.parent.name == "hbct":
            return f"hbct.{p.stem}.{frame.name}"
    return "hbct"


def main(argv: Optional[Sequence[str]] = None, out=None, err=None) -> int:
    out = out or sys.stdout
    err = err or sys.stderr
    args = build_parser().parse_args(argv)
    try:
        overrides = {}
        for item in args.set:
            if "=" not in item:
                raise ValidationError("--set", f"expected KEY=VALUE, got {item!r}")
            k, v = item.split("=", 1)
            overrides[k.strip()] = v
        for key in DEFAULTS:
            v = getattr(args, "key_" + key)
            if v is not None:
                overrides[key] = v
        cfg = parse_config(args.config, overrides)
        out.write(cfg.echo())
        out.write("---\n")
        return HANDLERS[args.command](cfg, out)
    except HbctError as exc:
        err.write(f"{_where(exc)} ({args.command}): {type(exc).__name__}: {exc}\n")
        return exc.exit_code
    except OSError as exc:
        err.write(f"{_where(exc)} ({args.command}): {exc}\n")
        return 1


if __name__ == "__main__":
    sys.exit(main())
