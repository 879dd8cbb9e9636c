"""Conventional-only and backscatter-only reference allocators."""

from __future__ import annotations

import math

from .dual import SearchOptions, search_lambda
from .errors import DeadHopError, ValidationError
from .model import Allocation, ChannelRealization, SystemParams


def jotpa(
    ch: ChannelRealization,
    params: SystemParams,
    opts: SearchOptions = SearchOptions(),
    energy_cap: bool = True,
) -> Allocation:
    """Harvest-then-transmit on every hop: the hybrid pipeline with all modes pinned to 0.

    Raises :class:`InfeasibleError` when no multiplier vector gives a
    feasible all-conventional allocation.
    """
    return search_lambda(ch, params, opts, fixed_modes=(0,) * params.num_hops, energy_cap=energy_cap).allocation


def ab(ch: ChannelRealization, params: SystemParams) -> Allocation:
    """Backscatter on every hop with no harvest slot; independent of the channel gains."""
    bb = params.backscatter_rates
    if ch.num_hops != params.num_hops:
        raise ValidationError("channel", f"realization has {ch.num_hops} hops, params expect {params.num_hops}")
    for k, b in enumerate(bb):
        if not b > 0:
            raise DeadHopError(k, f"hop {k + 1} has zero backscatter rate")
    T = params.block_duration
    denom = math.fsum(1.0 / b for b in bb)
    tau = tuple(T / (b * denom) for b in bb)
    k_hops = params.num_hops
    bits = tuple(t * b for t, b in zip(tau, bb))
    return Allocation(
        tau0=0.0,
        tau=tau,
        c=(1,) * k_hops,
        p=(0.0,) * k_hops,
        e=(0.0,) * k_hops,
        omega=(0.0,) * k_hops,
        x=tuple(bb),
        per_link_bits=bits,
        delivery=T / denom,
        feasible=True,
    )
