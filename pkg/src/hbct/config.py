"""Flat ``key=value`` run configuration.

Every key has a default, so an empty file is a complete configuration.
Files written by the CLI embed their resolved configuration as ``#@``
lines; such a file can be passed back as a configuration and only those
lines are read.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Mapping, Optional, Tuple

from .dual import SearchOptions
from .errors import ValidationError
from .experiments import DEFAULT_TRIALS, DEFAULT_VALUES, SWEEP_KINDS, default_threads, params_for_point
from .model import SystemParams, db_to_linear

# canonical key order; the value is the default in text form
DEFAULTS: Dict[str, str] = {
    "num_hops": "3",
    "pt_db": "40",
    "ip_db": "0",
    "zeta": "0.8",
    "block_duration": "1",
    "noise_power": "1",
    "bandwidth": "1000000",
    "backscatter_rates": "table",
    "pt_position": "-8,10",
    "pr_position": "-2,10",
    "source_position": "-10,0",
    "destination_position": "0,0",
    "path_loss_exponent": "2",
    "reference_distance": "1",
    "fading": "true",
    "energy_cap": "true",
    "seed": "0",
    "trial": "0",
    "restarts": "8",
    "max_evals": "2000",
    "tolerance": "1e-06",
    "init_spread": "2",
    "init_step": "1",
    "sweep_kind": "pt_power",
    "sweep_values": "default",
    "trials": str(DEFAULT_TRIALS),
    "oracle_resolution": "64",
    "threads": "auto",
    "output": "",
    "plot_output": "",
}

# keys that only say where or how fast to run; they never change results
IO_KEYS = ("threads", "output", "plot_output")

# SystemParams field -> config key, so validation errors name what the user typed
_PARAM_KEYS = {
    "num_hops": "num_hops",
    "pt_power": "pt_db",
    "interference_threshold": "ip_db",
    "harvest_efficiency": "zeta",
    "block_duration": "block_duration",
    "noise_power": "noise_power",
    "bandwidth": "bandwidth",
    "backscatter_rates": "backscatter_rates",
    "pt_position": "pt_position",
    "pr_position": "pr_position",
    "source_position": "source_position",
    "destination_position": "destination_position",
    "path_loss_exponent": "path_loss_exponent",
    "reference_distance": "reference_distance",
}


def _num(key: str, text: str) -> float:
    try:
        v = float(text)
    except ValueError:
        raise ValidationError(key, f"malformed number {text!r}") from None
    if not math.isfinite(v):
        raise ValidationError(key, f"must be finite, got {text!r}")
    return v


def _int(key: str, text: str) -> int:
    try:
        return int(text)
    except ValueError:
        pass
    v = _num(key, text)
    if v != int(v):
        raise ValidationError(key, f"must be an integer, got {text!r}")
    return int(v)


def _bool(key: str, text: str) -> bool:
    t = text.lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValidationError(key, f"expected true or false, got {text!r}")


def _nums(key: str, text: str) -> Tuple[float, ...]:
    parts = [p.strip() for p in text.split(",")]
    if not text.strip() or any(not p for p in parts):
        raise ValidationError(key, f"expected a comma-separated list of numbers, got {text!r}")
    return tuple(_num(key, p) for p in parts)


def _point(key: str, text: str) -> Tuple[float, float]:
    v = _nums(key, text)
    if len(v) != 2:
        raise ValidationError(key, f"expected two coordinates x,y, got {text!r}")
    return v


def _canon_num(v) -> str:
    if isinstance(v, int) or (isinstance(v, float) and v.is_integer() and abs(v) < 1e15):
        return str(int(v))
    return repr(float(v))


@dataclass(frozen=True)
class RunConfig:
    params: SystemParams
    search: SearchOptions
    seed: int
    trial: int
    fading: bool
    energy_cap: bool
    sweep_kind: str
    sweep_values: Tuple
    trials: int
    oracle_resolution: int
    threads: int
    output: str
    plot_output: str
    values: Tuple[Tuple[str, str], ...]  # canonical (key, text) pairs, in key order

    def lines(self, include_io: bool = True) -> List[str]:
        return [f"{k}={v}" for k, v in self.values if include_io or k not in IO_KEYS]

    def result_lines(self) -> List[str]:
        """Lines embedded in output files: every key that can change a result."""
        return self.lines(include_io=False)

    def echo(self) -> str:
        notes = {"bandwidth": "  # Hz; artifact default, not a physical constant of the scenario"}
        return "\n".join(f"{k}={v}{notes.get(k, '')}" for k, v in self.values) + "\n"


def read_config_text(text: str, source: str = "<config>") -> Dict[str, str]:
    """Parse ``key=value`` lines. If any ``#@`` line exists, only those lines count."""
    lines = text.splitlines()
    embedded = [ln[2:] for ln in lines if ln.startswith("#@")]
    if embedded:
        lines = embedded
    out: Dict[str, str] = {}
    for n, raw in enumerate(lines, 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if " #" in line:
            line = line[: line.index(" #")].strip()
        if "=" not in line:
            raise ValidationError("config", f"{source}:{n}: expected key=value, got {raw.strip()!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        if key not in DEFAULTS:
            raise ValidationError(key, f"unknown key ({source}:{n})")
        if key in out:
            raise ValidationError(key, f"given twice ({source}:{n})")
        out[key] = value
    return out


def parse_config(path: Optional[str] = None, overrides: Optional[Mapping[str, str]] = None) -> RunConfig:
    """Resolve defaults, then the file at ``path``, then ``overrides``."""
    merged = dict(DEFAULTS)
    if path is not None:
        p = Path(path)
        try:
            text = p.read_text()
        except OSError as exc:
            raise ValidationError("config", f"cannot read {p}: {exc.strerror or exc}") from None
        merged.update(read_config_text(text, str(p)))
    for key, value in (overrides or {}).items():
        if key not in DEFAULTS:
            raise ValidationError(key, "unknown key")
        merged[key] = str(value).strip()
    return resolve(merged)


def resolve(raw: Mapping[str, str]) -> RunConfig:
    v = raw
    num_hops = _int("num_hops", v["num_hops"])
    rates_text = v["backscatter_rates"].strip().lower()
    rates = None if rates_text == "table" else _nums("backscatter_rates", v["backscatter_rates"])
    zeta = _num("zeta", v["zeta"])
    if not 0 <= zeta <= 1:
        raise ValidationError("zeta", f"harvest efficiency must lie in [0, 1], got {v['zeta']!r}")
    try:
        params = SystemParams(
            num_hops=num_hops,
            block_duration=_num("block_duration", v["block_duration"]),
            pt_power=db_to_linear(_num("pt_db", v["pt_db"])),
            interference_threshold=db_to_linear(_num("ip_db", v["ip_db"])),
            harvest_efficiency=zeta,
            noise_power=_num("noise_power", v["noise_power"]),
            bandwidth=_num("bandwidth", v["bandwidth"]),
            backscatter_rates=rates,
            pt_position=_point("pt_position", v["pt_position"]),
            pr_position=_point("pr_position", v["pr_position"]),
            source_position=_point("source_position", v["source_position"]),
            destination_position=_point("destination_position", v["destination_position"]),
            path_loss_exponent=_num("path_loss_exponent", v["path_loss_exponent"]),
            reference_distance=_num("reference_distance", v["reference_distance"]),
        )
    except ValidationError as exc:
        key = _PARAM_KEYS.get(exc.field, exc.field)
        msg = str(exc).split(": ", 1)[-1]
        raise ValidationError(key, msg) from None

    seed = _int("seed", v["seed"])
    if seed < 0:
        raise ValidationError("seed", f"must be >= 0, got {seed}")
    trial = _int("trial", v["trial"])
    if trial < 0:
        raise ValidationError("trial", f"must be >= 0, got {trial}")
    search = SearchOptions(
        restarts=_int("restarts", v["restarts"]),
        max_evals=_int("max_evals", v["max_evals"]),
        tolerance=_num("tolerance", v["tolerance"]),
        seed=seed,
        init_spread=_num("init_spread", v["init_spread"]),
        init_step=_num("init_step", v["init_step"]),
    )
    kind = v["sweep_kind"].strip()
    if kind not in SWEEP_KINDS:
        raise ValidationError("sweep_kind", f"must be one of {', '.join(SWEEP_KINDS)}, got {kind!r}")
    if v["sweep_values"].strip().lower() == "default":
        values = DEFAULT_VALUES[kind]
    else:
        values = _nums("sweep_values", v["sweep_values"])
    if kind == "hops":
        values = tuple(_int("sweep_values", _canon_num(x)) for x in values)
    for x in values:
        try:
            params_for_point(kind, x, params)
        except ValidationError as exc:
            raise ValidationError("sweep_values", str(exc)) from None
    trials = _int("trials", v["trials"])
    if trials < 1:
        raise ValidationError("trials", f"must be >= 1, got {trials}")
    resolution = _int("oracle_resolution", v["oracle_resolution"])
    if resolution < 8:
        raise ValidationError("oracle_resolution", f"must be >= 8, got {resolution}")
    threads_text = v["threads"].strip().lower()
    threads = default_threads() if threads_text == "auto" else _int("threads", v["threads"])
    if threads < 1:
        raise ValidationError("threads", f"must be >= 1, got {threads}")
    for key in ("output", "plot_output"):
        out = v[key].strip()
        if out and not Path(out).resolve().parent.is_dir():
            raise ValidationError(key, f"directory of {out!r} does not exist")

    canon = {
        "num_hops": str(num_hops),
        "pt_db": _canon_num(_num("pt_db", v["pt_db"])),
        "ip_db": _canon_num(_num("ip_db", v["ip_db"])),
        "zeta": _canon_num(zeta),
        "block_duration": _canon_num(params.block_duration),
        "noise_power": _canon_num(params.noise_power),
        "bandwidth": _canon_num(params.bandwidth),
        "backscatter_rates": "table" if rates is None else ",".join(_canon_num(b) for b in rates),
        "pt_position": ",".join(_canon_num(c) for c in params.pt_position),
        "pr_position": ",".join(_canon_num(c) for c in params.pr_position),
        "source_position": ",".join(_canon_num(c) for c in params.source_position),
        "destination_position": ",".join(_canon_num(c) for c in params.destination_position),
        "path_loss_exponent": _canon_num(params.path_loss_exponent),
        "reference_distance": _canon_num(params.reference_distance),
        "fading": "true" if _bool("fading", v["fading"]) else "false",
        "energy_cap": "true" if _bool("energy_cap", v["energy_cap"]) else "false",
        "seed": str(seed),
        "trial": str(trial),
        "restarts": str(search.restarts),
        "max_evals": str(search.max_evals),
        "tolerance": repr(search.tolerance),
        "init_spread": _canon_num(search.init_spread),
        "init_step": _canon_num(search.init_step),
        "sweep_kind": kind,
        "sweep_values": ",".join(_canon_num(x) for x in values),
        "trials": str(trials),
        "oracle_resolution": str(resolution),
        "threads": str(threads),
        "output": v["output"].strip(),
        "plot_output": v["plot_output"].strip(),
    }
    return RunConfig(
        params=params,
        search=search,
        seed=seed,
        trial=trial,
        fading=canon["fading"] == "true",
        energy_cap=canon["energy_cap"] == "true",
        sweep_kind=kind,
        sweep_values=tuple(values),
        trials=trials,
        oracle_resolution=resolution,
        threads=threads,
        output=canon["output"],
        plot_output=canon["plot_output"],
        values=tuple((k, canon[k]) for k in DEFAULTS),
    )
