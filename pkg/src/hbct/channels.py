"""Line topology and Rayleigh block-fading channel draws."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Tuple

import numpy as np

from .errors import ValidationError
from .model import ChannelRealization, Point, SystemParams


@dataclass(frozen=True)
class Topology:
    """Node positions and the three link distances of every transmitting node.

    Node k forwards to node k+1; the last node forwards to ``destination``.
    """

    nodes: Tuple[Point, ...]
    destination: Point
    pt: Point
    pr: Point
    d_g: Tuple[float, ...]
    d_h: Tuple[float, ...]
    d_f: Tuple[float, ...]

    @property
    def num_hops(self) -> int:
        return len(self.nodes)


def _dist(a: Point, b: Point) -> float:
    return math.hypot(a[0] - b[0], a[1] - b[1])


def place_nodes(params: SystemParams) -> Topology:
    """Spread ``num_hops`` transmitters evenly from the source towards the destination."""
    k_hops = params.num_hops
    (sx, sy), (dx, dy) = params.source_position, params.destination_position
    span = math.hypot(dx - sx, dy - sy)
    if span == 0:
        raise ValidationError("destination_position", "coincides with source_position")
    nodes = tuple((sx + k / k_hops * (dx - sx), sy + k / k_hops * (dy - sy)) for k in range(k_hops))
    hop = span / k_hops
    return Topology(
        nodes=nodes,
        destination=(dx, dy),
        pt=params.pt_position,
        pr=params.pr_position,
        d_g=(hop,) * k_hops,
        d_h=tuple(_dist(params.pt_position, n) for n in nodes),
        d_f=tuple(_dist(params.pr_position, n) for n in nodes),
    )


def path_loss_gain(distance: float, fading_power: float, params: SystemParams) -> float:
    """Power gain ``fading_power * (distance / d0) ** -alpha``."""
    if not distance > 0:
        raise ValidationError("distance", f"path loss is singular at distance {distance!r}")
    if fading_power < 0:
        raise ValidationError("fading_power", f"must be >= 0, got {fading_power!r}")
    return fading_power * (distance / params.reference_distance) ** (-params.path_loss_exponent)


def trial_rng(seed: int, trial: int = 0, stream: int = 0) -> np.random.Generator:
    """Independent generator for one (seed, trial, stream) triple, order-independent."""
    ss = np.random.SeedSequence(entropy=int(seed) % 2**64, spawn_key=(int(trial), int(stream)))
    return np.random.default_rng(ss)


def sample_channels(
    topology: Topology,
    params: SystemParams,
    seed: int,
    trial: int = 0,
    fading: bool = True,
) -> ChannelRealization:
    """Draw h, g, f for every hop with unit-mean exponential power fading.

    ``fading=False`` pins every fading power to 1, leaving pure path loss.
    """
    k_hops = topology.num_hops
    if fading:
        beta2 = trial_rng(seed, trial).exponential(1.0, size=(3, k_hops))
        # exponential() can return exactly 0.0 with vanishing probability
        beta2 = np.maximum(beta2, np.finfo(float).tiny)
    else:
        beta2 = np.ones((3, k_hops))
    gains = [
        tuple(path_loss_gain(d, float(b), params) for d, b in zip(dists, row))
        for dists, row in zip((topology.d_h, topology.d_g, topology.d_f), beta2)
    ]
    return ChannelRealization(h=gains[0], g=gains[1], f=gains[2], noise_power=params.noise_power)
