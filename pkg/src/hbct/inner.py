"""Closed-form hybrid allocation for fixed per-link multipliers.

For a given multiplier vector the optimal power-to-SNR ratio of each node
solves a scalar transcendental equation (solved sequentially, since node k
depends on nodes 1..k-1). Powers and conventional rates follow; each node
then picks the backscatter or conventional mode, and the slot lengths that
equalize per-link bits close the time budget.

Everything here works on plain floats: these functions sit inside the outer
multiplier search and are evaluated hundreds of thousands of times.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

from .errors import DeadHopError, DegenerateMultiplierError, NumericalError, ValidationError
from .model import Allocation, ChannelRealization, DualWeights, SystemParams

LN2 = math.log(2.0)
MAX_DOUBLINGS = 1000
RESIDUAL_TOL = 1e-9
CPC_RTOL = 1e-9


def power_equation(t: float, b: float, d: float) -> float:
    """Residual of ``x ln x - x (b + 1) + 1 - d`` at ``x = 1 + t``.

    Written in terms of ``t`` with log1p so that roots close to 1 (weak
    harvesting) keep their relative precision.
    """
    return (1.0 + t) * math.log1p(t) - t - b * (1.0 + t) - d


def solve_power_equation(b: float, d: float) -> float:
    """Return ``t = x - 1`` for the unique root ``x >= exp(b)``.

    The left end ``exp(b)`` is the minimizer of the residual (value
    ``1 - d - exp(b) <= 0``), and the residual is convex and increasing to
    its right. The right end starts at an analytic upper bound and is
    doubled until the residual turns positive; Newton iterates started
    there descend monotonically onto the root. Bisection takes over
    whenever a Newton step would leave the bracket.
    """
    if not (b >= 0 and d >= 0 and math.isfinite(b) and math.isfinite(d)):
        raise NumericalError(f"power equation needs finite b, d >= 0 (b={b!r}, d={d!r})")
    if b > 700:
        raise NumericalError(f"power equation bracket overflows (b={b!r})")
    lo = math.expm1(b)
    f_lo = power_equation(lo, b, d)
    if f_lo >= 0:
        return lo
    # With y = x / e^(b+1) the root solves y ln y = z; y <= 1 for z <= 0,
    # y <= 1 + z always and y <= 2 z / ln z for z > 1 give a first right end.
    z = (d - 1.0) * math.exp(-(b + 1.0))
    y_hi = 1.0 if z <= 0 else (min(1.0 + z, 2.0 * z / math.log(z)) if z > 1 else 1.0 + z)
    hi = max(math.exp(b + 1.0) * y_hi - 1.0, lo)
    for _ in range(MAX_DOUBLINGS):
        f_hi = power_equation(hi, b, d)
        if f_hi > 0:
            break
        lo, f_lo = hi, f_hi
        hi = 2.0 * hi + 1.0
        if not math.isfinite(hi):
            break
    else:
        raise NumericalError(f"no sign change after {MAX_DOUBLINGS} doublings (b={b!r}, d={d!r})")
    if not f_hi > 0:
        raise NumericalError(f"bracket growth overflowed (b={b!r}, d={d!r})")

    t, f_t = hi, f_hi
    for _ in range(200):
        slope = math.log1p(t) - b
        step = f_t / slope if slope > 0 else math.inf
        cand = t - step
        if not (lo < cand < hi):
            cand = 0.5 * (lo + hi)
        f_c = power_equation(cand, b, d)
        if f_c > 0:
            hi = cand
        elif f_c < 0:
            lo = cand
        else:
            return cand
        if abs(cand - t) <= 4e-16 * (1.0 + cand) or hi - lo <= 4e-16 * (1.0 + hi):
            return cand if abs(f_c) <= abs(f_t) else t
        t, f_t = cand, f_c
    raise NumericalError(f"power equation did not converge (b={b!r}, d={d!r})")


class Problem:
    """Per-realization constants shared by every evaluation of the pipeline."""

    __slots__ = (
        "k", "T", "W", "zeta_pt", "gamma", "h", "d", "wgh", "ipc_power",
        "bb", "harvest_rate", "excess1",
    )

    def __init__(self, ch: ChannelRealization, params: SystemParams):
        if ch.num_hops != params.num_hops:
            raise ValidationError(
                "channel", f"realization has {ch.num_hops} hops, params expect {params.num_hops}"
            )
        self.k = params.num_hops
        self.T = params.block_duration
        self.W = params.bandwidth
        self.zeta_pt = params.zeta_pt
        self.gamma = ch.gamma
        self.h = ch.h
        # harvest-SNR product of each node and the weight it contributes downstream
        self.d = tuple(self.zeta_pt * gk * hk for gk, hk in zip(ch.gamma, ch.h))
        self.wgh = tuple(gk * hk for gk, hk in zip(ch.gamma, ch.h))
        self.ipc_power = tuple(params.interference_threshold / fk for fk in ch.f)
        self.bb = params.backscatter_rates
        self.harvest_rate = tuple(self.zeta_pt * hk for hk in ch.h)
        # node 1 has no upstream term, so its root does not depend on the multipliers
        self.excess1 = solve_power_equation(0.0, self.d[0])


def _excess(prob: Problem, lam: Sequence[float]) -> list:
    """A_k - 1 for every node, solved in hop order."""
    for k, lk in enumerate(lam):
        if not lk > 0:
            raise DegenerateMultiplierError(f"degenerate multiplier: lambda_{k + 1} = {lk!r}")
    out = [prob.excess1]
    acc = 0.0
    for k in range(1, prob.k):
        acc += lam[k - 1] * prob.wgh[k - 1] / (1.0 + out[k - 1])
        out.append(solve_power_equation(prob.zeta_pt * acc / lam[k], prob.d[k]))
    return out


def energy_capped_snr(kappa: float) -> float:
    """Largest ``q >= 0`` with ``q <= kappa * ln(1 + q)``.

    For a conventional node, ``q = p * gamma`` and ``kappa`` is the
    harvested energy per delivered bit expressed in units of the minimum
    energy per bit; no positive power is affordable when ``kappa <= 1``.
    """
    if not kappa > 1.0:
        return 0.0
    if not math.isfinite(kappa):
        return math.inf
    lo = 0.0
    hi = 2.0 * kappa * math.log1p(2.0 * kappa)
    q = hi
    for _ in range(200):
        g = q - kappa * math.log1p(q)
        if g > 0:
            hi = q
        else:
            lo = q
        slope = 1.0 - kappa / (1.0 + q)
        cand = q - g / slope if slope > 0 else 0.5 * (lo + hi)
        if not (lo < cand < hi):
            cand = 0.5 * (lo + hi)
        if abs(cand - q) <= 4e-16 * (1.0 + q):
            break
        q = cand
    # Newton descends from above, so the last iterate may sit a few ulps
    # on the unaffordable side; lo always satisfies the inequality
    for _ in range(64):
        if q - kappa * math.log1p(q) <= 0:
            return q
        q = math.nextafter(q, 0.0)
    return lo


def _pipeline(
    prob: Problem,
    lam: Sequence[float],
    fixed_modes: Optional[Sequence[int]] = None,
    energy_cap: bool = True,
):
    """Raw evaluation: powers, rates, modes, slots and the worst relative CPC excess.

    With ``energy_cap`` a downstream node's power is also limited by what
    its harvest window can pay for. Writing every slot per unit of
    delivered bits, node k's harvest window is ``a / X_1 + sum_{i<k} 1 / X_i``
    with ``a`` the harvest-slot ratio of node 1, so the cap only involves
    upstream nodes and is applied in hop order.
    """
    k_hops = prob.k
    excess = _excess(prob, lam)
    gamma, W, bb = prob.gamma, prob.W, prob.bb
    p = [min(t / gk, cap) for t, gk, cap in zip(excess, gamma, prob.ipc_power)]
    omega = [W * math.log1p(p[0] * gamma[0]) / LN2]
    if fixed_modes is None:
        c = _modes(omega, p[0], prob.harvest_rate[0], bb)
    else:
        c = [int(fixed_modes[0])]
    x1 = bb[0] if c[0] else omega[0]
    window = 0.0
    if x1 > 0:
        a = (p[0] / prob.harvest_rate[0]) if (not c[0] and p[0] > 0) else 0.0
        window = (a + 1.0) / x1
    for k in range(1, k_hops):
        if energy_cap:
            kappa = gamma[k] * prob.harvest_rate[k] * window * W / LN2
            p[k] = min(p[k], energy_capped_snr(kappa) / gamma[k])
        om = W * math.log1p(p[k] * gamma[k]) / LN2
        omega.append(om)
        if fixed_modes is None:
            ck = 1 if om < bb[k] else 0
        else:
            ck = int(fixed_modes[k])
        c.append(ck)
        xk = bb[k] if ck else om
        if xk > 0:
            window += 1.0 / xk
    tau0, tau, x = _slots(c, omega, p[0], prob.harvest_rate[0], bb, prob.T)
    e = [pk * tk if not ck else 0.0 for pk, tk, ck in zip(p, tau, c)]
    worst = 0.0
    harvested_time = tau0
    for k in range(k_hops):
        if e[k] > 0:
            avail = prob.harvest_rate[k] * harvested_time
            if avail <= 0:
                worst = math.inf
            else:
                worst = max(worst, e[k] / avail - 1.0)
        harvested_time += tau[k]
    return excess, p, omega, c, tau0, tau, x, e, worst


def _modes(omega, p1, harvest_rate1, bb):
    # node 1 pays for its own harvest slot, which raises its switching threshold
    ratio1 = p1 / harvest_rate1 if p1 > 0 else 0.0
    c = [1 if omega[0] < bb[0] * (1.0 + ratio1) else 0]
    c.extend(1 if om < b else 0 for om, b in zip(omega[1:], bb[1:]))
    return c


def _slots(c, omega, p1, harvest_rate1, bb, T):
    x = [b if ck else om for ck, om, b in zip(c, omega, bb)]
    for k, xk in enumerate(x):
        if not xk > 0:
            raise DeadHopError(k)
    a = (p1 / harvest_rate1) if (not c[0] and p1 > 0) else 0.0
    # slot k gets the share w_k / S of the block; with equal weights the
    # shares come out exact because fsum returns the correctly rounded S
    w = [1.0 / xk for xk in x]
    share = math.fsum([a * w[0]] + w)
    tau = [T * (wk / share) for wk in w]
    return a * tau[0], tau, x


# ---------------------------------------------------------------------------
# public operations


@dataclass(frozen=True)
class AVector:
    """Roots ``A_k`` of the per-node power equation and their residuals."""

    A: Tuple[float, ...]
    excess: Tuple[float, ...]
    upstream: Tuple[float, ...]
    harvest_snr: Tuple[float, ...]
    residual: Tuple[float, ...]


def solve_A(lam: DualWeights, ch: ChannelRealization, params: SystemParams) -> AVector:
    """Solve the power equation node by node for the multipliers ``lam``."""
    prob = Problem(ch, params)
    if len(lam.lam) != prob.k:
        raise ValidationError("lam", f"expected {prob.k} multipliers, got {len(lam.lam)}")
    excess = _excess(prob, lam.lam)
    upstream = [0.0]
    acc = 0.0
    for k in range(1, prob.k):
        acc += lam.lam[k - 1] * prob.wgh[k - 1] / (1.0 + excess[k - 1])
        upstream.append(prob.zeta_pt * acc / lam.lam[k])
    res = tuple(power_equation(t, b, d) for t, b, d in zip(excess, upstream, prob.d))
    return AVector(
        A=tuple(1.0 + t for t in excess),
        excess=tuple(excess),
        upstream=tuple(upstream),
        harvest_snr=prob.d,
        residual=res,
    )


def power_allocation(A: AVector, ch: ChannelRealization, params: SystemParams) -> Tuple[float, ...]:
    """Transmit powers: the root's power, capped by the interference threshold."""
    return tuple(
        min(t / gk, params.interference_threshold / fk)
        for t, gk, fk in zip(A.excess, ch.gamma, ch.f)
    )


def conventional_rate(p: float, gamma: float, bandwidth: float) -> float:
    """Shannon rate ``W log2(1 + p gamma)`` in bits/s."""
    if p < 0:
        raise ValidationError("p", f"power must be >= 0, got {p!r}")
    return bandwidth * math.log1p(p * gamma) / LN2


def mode_select(
    omega: Sequence[float], p1: float, ch: ChannelRealization, params: SystemParams
) -> Tuple[int, ...]:
    """1 (backscatter) where the hop's backscatter rate beats its conventional rate.

    Exact ties stay conventional.
    """
    return tuple(_modes(list(omega), p1, params.zeta_pt * ch.h[0], params.backscatter_rates))


def time_allocation(
    c: Sequence[int],
    omega: Sequence[float],
    p1: float,
    ch: ChannelRealization,
    params: SystemParams,
) -> Tuple[float, Tuple[float, ...], Tuple[float, ...]]:
    """Harvest slot, per-node slots and effective slot rates for fixed modes.

    Slots make ``tau_k * X_k`` equal on every hop and sum (with the harvest
    slot) to the block duration. Raises :class:`DeadHopError` when some hop
    has zero effective rate.
    """
    tau0, tau, x = _slots(
        list(c), list(omega), p1, params.zeta_pt * ch.h[0], params.backscatter_rates,
        params.block_duration,
    )
    return tau0, tuple(tau), tuple(x)


def _to_allocation(raw) -> Allocation:
    excess, p, omega, c, tau0, tau, x, e, worst = raw
    bits = tuple(tk * xk for tk, xk in zip(tau, x))
    return Allocation(
        tau0=tau0,
        tau=tuple(tau),
        c=tuple(int(v) for v in c),
        # a backscattering node spends no conventional power
        p=tuple(0.0 if ck else pk for pk, ck in zip(p, c)),
        e=tuple(e),
        omega=tuple(omega),
        x=tuple(x),
        per_link_bits=bits,
        delivery=min(bits),
        feasible=worst <= CPC_RTOL,
        cpc_violation=max(worst, 0.0),
    )


def hbct_inner(
    lam: DualWeights,
    ch: ChannelRealization,
    params: SystemParams,
    fixed_modes: Optional[Sequence[int]] = None,
    problem: Optional[Problem] = None,
    energy_cap: bool = True,
) -> Allocation:
    """Full closed-form allocation for the multipliers ``lam``.

    ``fixed_modes`` overrides the mode rule (all zeros gives the
    conventional-only scheme). ``energy_cap=False`` keeps the uncapped root
    powers. The result is flagged infeasible when some node would spend
    more energy than it harvested before its slot.
    """
    prob = problem if problem is not None else Problem(ch, params)
    if len(lam.lam) != prob.k:
        raise ValidationError("lam", f"expected {prob.k} multipliers, got {len(lam.lam)}")
    if fixed_modes is not None and len(fixed_modes) != prob.k:
        raise ValidationError("fixed_modes", f"expected {prob.k} entries")
    return _to_allocation(_pipeline(prob, lam.lam, fixed_modes, energy_cap))
