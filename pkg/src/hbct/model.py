"""Scenario parameters, channel draws and allocation results.

All powers are linear and normalized to the receiver noise power. Decibels
only appear at the configuration boundary (see :func:`db_to_linear`).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence, Tuple

from .errors import ValidationError

Point = Tuple[float, float]

# Backscatter bit rate (bits/s) per deployment size, indexed by hop count.
BACKSCATTER_RATE_TABLE = {
    1: 0.01e6,
    2: 1.2e6,
    3: 3.8e6,
    4: 4.5e6,
    5: 5.0e6,
}


def db_to_linear(value_db: float) -> float:
    """Convert a power ratio in dB to linear scale."""
    value_db = float(value_db)
    if not math.isfinite(value_db):
        raise ValidationError("value_db", f"must be finite, got {value_db!r}")
    return 10.0 ** (value_db / 10.0)


def table_backscatter_rates(num_hops: int) -> Tuple[float, ...]:
    """Per-hop backscatter rates for a ``num_hops`` deployment (uniform across hops)."""
    try:
        rate = BACKSCATTER_RATE_TABLE[num_hops]
    except KeyError:
        raise ValidationError(
            "num_hops",
            f"no tabulated backscatter rate for {num_hops} hops "
            f"(available: {sorted(BACKSCATTER_RATE_TABLE)})",
        ) from None
    return (rate,) * num_hops


@dataclass(frozen=True)
class SystemParams:
    """Constants of one multi-hop scenario.

    ``backscatter_rates`` may be left as ``None``, in which case the tabulated
    rate for ``num_hops`` is used on every hop.
    """

    num_hops: int = 3
    block_duration: float = 1.0
    pt_power: float = 1e4
    interference_threshold: float = 1.0
    harvest_efficiency: float = 0.8
    noise_power: float = 1.0
    bandwidth: float = 1e6
    backscatter_rates: Optional[Tuple[float, ...]] = None
    pt_position: Point = (-8.0, 10.0)
    pr_position: Point = (-2.0, 10.0)
    source_position: Point = (-10.0, 0.0)
    destination_position: Point = (0.0, 0.0)
    path_loss_exponent: float = 2.0
    reference_distance: float = 1.0

    def __post_init__(self):
        if self.backscatter_rates is None:
            if isinstance(self.num_hops, int) and self.num_hops in BACKSCATTER_RATE_TABLE:
                rates = table_backscatter_rates(self.num_hops)
            else:
                raise ValidationError(
                    "backscatter_rates",
                    f"required for num_hops={self.num_hops!r} (no tabulated rate)",
                )
        else:
            rates = tuple(float(b) for b in self.backscatter_rates)
        object.__setattr__(self, "backscatter_rates", rates)
        for name in ("pt_position", "pr_position", "source_position", "destination_position"):
            pos = tuple(float(v) for v in getattr(self, name))
            object.__setattr__(self, name, pos)
        validate_params(self)

    @property
    def zeta_pt(self) -> float:
        return self.harvest_efficiency * self.pt_power

    def replace(self, **changes) -> "SystemParams":
        """Copy with fields changed; resets tabulated rates when only ``num_hops`` changes."""
        if "num_hops" in changes and "backscatter_rates" not in changes:
            changes["backscatter_rates"] = None
        values = {f: getattr(self, f) for f in self.__dataclass_fields__}
        values.update(changes)
        return SystemParams(**values)


def validate_params(params: SystemParams) -> SystemParams:
    """Check every scenario invariant, raising :class:`ValidationError` on the first violation."""
    p = params
    if isinstance(p.num_hops, bool) or not isinstance(p.num_hops, int) or p.num_hops < 1:
        raise ValidationError("num_hops", f"must be a positive integer, got {p.num_hops!r}")

    def finite(name, lo=None, lo_strict=False, hi=None):
        v = getattr(p, name)
        if not isinstance(v, (int, float)) or not math.isfinite(v):
            raise ValidationError(name, f"must be a finite number, got {v!r}")
        if lo is not None and (v <= lo if lo_strict else v < lo):
            op = ">" if lo_strict else ">="
            raise ValidationError(name, f"must be {op} {lo}, got {v!r}")
        if hi is not None and v > hi:
            raise ValidationError(name, f"must be <= {hi}, got {v!r}")

    finite("block_duration", 0.0, lo_strict=True)
    finite("pt_power", 0.0)
    finite("interference_threshold", 0.0)
    finite("harvest_efficiency", 0.0, hi=1.0)
    finite("noise_power", 0.0, lo_strict=True)
    finite("bandwidth", 0.0, lo_strict=True)
    finite("path_loss_exponent", 0.0, lo_strict=True)
    finite("reference_distance", 0.0, lo_strict=True)

    rates = p.backscatter_rates
    if len(rates) != p.num_hops:
        raise ValidationError(
            "backscatter_rates", f"expected {p.num_hops} values, got {len(rates)}"
        )
    for b in rates:
        if not math.isfinite(b) or b < 0:
            raise ValidationError("backscatter_rates", f"entries must be finite and >= 0, got {b!r}")
    for name in ("pt_position", "pr_position", "source_position", "destination_position"):
        pos = getattr(p, name)
        if len(pos) != 2 or not all(math.isfinite(v) for v in pos):
            raise ValidationError(name, f"must be a finite 2-D point, got {pos!r}")
    return params


@dataclass(frozen=True)
class ChannelRealization:
    """Power gains of one fading block.

    ``h``: PT -> node k, ``g``: node k -> next hop, ``f``: node k -> PR.
    ``gamma`` is filled from ``g`` and the noise power.
    """

    h: Tuple[float, ...]
    g: Tuple[float, ...]
    f: Tuple[float, ...]
    noise_power: float = 1.0
    gamma: Tuple[float, ...] = field(init=False)

    def __post_init__(self):
        h, g, f = (tuple(float(v) for v in arr) for arr in (self.h, self.g, self.f))
        if not (len(h) == len(g) == len(f)) or len(h) == 0:
            raise ValidationError("channel", "h, g and f must be non-empty and equally long")
        for name, arr in (("h", h), ("g", g), ("f", f)):
            for v in arr:
                if not (math.isfinite(v) and v > 0):
                    raise ValidationError(name, f"gains must be strictly positive and finite, got {v!r}")
        if not (math.isfinite(self.noise_power) and self.noise_power > 0):
            raise ValidationError("noise_power", f"must be positive, got {self.noise_power!r}")
        object.__setattr__(self, "h", h)
        object.__setattr__(self, "g", g)
        object.__setattr__(self, "f", f)
        object.__setattr__(self, "gamma", tuple(gk / self.noise_power for gk in g))

    @property
    def num_hops(self) -> int:
        return len(self.h)


@dataclass(frozen=True)
class DualWeights:
    """Non-negative per-link multipliers, stored scaled so that the largest is 1."""

    lam: Tuple[float, ...]

    def __post_init__(self):
        lam = tuple(float(v) for v in self.lam)
        if not lam:
            raise ValidationError("lam", "must contain at least one multiplier")
        if any(not math.isfinite(v) or v < 0 for v in lam):
            raise ValidationError("lam", f"multipliers must be finite and >= 0, got {lam!r}")
        top = max(lam)
        if top <= 0:
            raise ValidationError("lam", "at least one multiplier must be positive")
        object.__setattr__(self, "lam", tuple(v / top for v in lam))

    @classmethod
    def uniform(cls, num_hops: int) -> "DualWeights":
        return cls((1.0,) * num_hops)

    @classmethod
    def from_log(cls, u: Sequence[float]) -> "DualWeights":
        """Build from log-multipliers; the max is subtracted first so exp() cannot overflow."""
        top = max(u)
        return cls(tuple(math.exp(v - top) for v in u))


@dataclass(frozen=True)
class Allocation:
    """Time, mode and power decision for one block, with the resulting bit counts.

    ``tau`` holds the K transmission slots; the harvest-only slot is ``tau0``.
    ``cpc_violation`` is the largest relative excess of spent over harvested
    energy (0 when the consumed-power constraint holds everywhere).
    """

    tau0: float
    tau: Tuple[float, ...]
    c: Tuple[int, ...]
    p: Tuple[float, ...]
    e: Tuple[float, ...]
    omega: Tuple[float, ...]
    x: Tuple[float, ...]
    per_link_bits: Tuple[float, ...]
    delivery: float
    feasible: bool
    cpc_violation: float = 0.0

    @property
    def num_hops(self) -> int:
        return len(self.tau)

    @property
    def time_breakdown(self) -> Tuple[float, ...]:
        return (self.tau0,) + tuple(self.tau)

    def objective(self) -> float:
        """Delivery as seen by a maximizer: infeasible allocations count as -inf."""
        return self.delivery if self.feasible else -math.inf
