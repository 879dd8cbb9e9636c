"""Hybrid allocator: the multiplier search plus the two single-mode allocations it contains.

The per-multiplier mode rule does not always reach the all-conventional or
all-backscatter allocation even when one of them is better, and both are
feasible hybrid allocations. Taking the best of the three is what makes the
hybrid result dominate both baselines on every channel.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

from .baselines import ab, jotpa
from .dual import DualSearchResult, SearchOptions, search_lambda
from .errors import InfeasibleError
from .model import Allocation, ChannelRealization, SystemParams

SOURCES = ("search", "JOTPA", "AB")


@dataclass(frozen=True)
class HybridResult:
    allocation: Allocation
    source: str  # which candidate won: "search", "JOTPA" or "AB"
    search: Optional[DualSearchResult]  # None when the search found nothing feasible
    conventional: Optional[Allocation]  # None when infeasible
    backscatter: Optional[Allocation]


def _try(fn, *args, **kw) -> Optional[Allocation]:
    try:
        return fn(*args, **kw)
    except InfeasibleError:
        return None


def hbct(
    ch: ChannelRealization,
    params: SystemParams,
    opts: SearchOptions = SearchOptions(),
    energy_cap: bool = True,
) -> HybridResult:
    """Best of the multiplier search, the all-conventional and the all-backscatter allocation.

    Ties go to the search result. Raises :class:`InfeasibleError` only if
    all three candidates are infeasible.
    """
    conventional = _try(jotpa, ch, params, opts, energy_cap=energy_cap)
    backscatter = _try(ab, ch, params)
    try:
        res = search_lambda(ch, params, opts, energy_cap=energy_cap)
    except InfeasibleError:
        if conventional is None and backscatter is None:
            raise
        res = None
    best, source = (res.allocation, "search") if res is not None else (None, "")
    for name, alloc in (("JOTPA", conventional), ("AB", backscatter)):
        if alloc is not None and (best is None or alloc.delivery > best.delivery):
            best, source = alloc, name
    return HybridResult(best, source, res, conventional, backscatter)
