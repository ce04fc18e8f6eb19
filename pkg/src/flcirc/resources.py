"""Per-round sampling of available compute and bandwidth.

Background processes consume a random fraction of each node's compute and of
each link's bandwidth; what remains for training in round k is the baseline
capacity times a utilization ratio drawn fresh each round. Ratios are drawn
uniformly from a configured closed interval, once per node and once per
unordered link, and the sampled values hold for the whole round.

Draw order is fixed (ascending node id, then ascending (i, j) pairs with
i < j) so a seed fully determines the resource trace.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .domain import InvariantViolation, LinkProfile, NodeProfile


@dataclass(frozen=True)
class UtilizationRange:
    """Closed interval [lower, upper] the per-round availability ratio is drawn from."""

    lower: float
    upper: float

    def __post_init__(self) -> None:
        if not 0.0 <= self.lower <= 1.0:
            raise InvariantViolation("utilization lower bound must be in [0, 1]")
        if not 0.0 < self.upper <= 1.0:
            raise InvariantViolation("utilization upper bound must be in (0, 1]")
        if self.lower > self.upper:
            raise InvariantViolation("utilization lower bound exceeds upper bound")

    def sample(self, rng: np.random.Generator) -> float:
        if self.lower == self.upper:
            return self.lower
        return float(rng.uniform(self.lower, self.upper))


@dataclass(frozen=True)
class RoundResources:
    """Resources actually available in one round.

    compute[i] is node i's usable FLOPS; bandwidth[i, j] the usable
    bits/second on link (i, j). Bandwidth is symmetric and its diagonal
    is unused.
    """

    compute: np.ndarray
    bandwidth: np.ndarray

    @property
    def n_nodes(self) -> int:
        return int(self.compute.size)


def sample_round(
    profiles: list[NodeProfile],
    links: LinkProfile,
    compute_range: UtilizationRange,
    bandwidth_range: UtilizationRange,
    rng: np.random.Generator,
) -> RoundResources:
    """Draw one round's available resources from the baselines.

    One fresh ratio per node and per unordered link; prediction is exact, so
    the sampled values are the resources the round actually sees.
    """
    n = len(profiles)
    if links.n_nodes != n:
        raise InvariantViolation("link profile does not cover the node set")

    compute = np.empty(n)
    for i in range(n):
        compute[i] = profiles[i].baseline_compute * compute_range.sample(rng)

    bandwidth = np.zeros((n, n))
    for i in range(n):
        for j in range(i + 1, n):
            ratio = bandwidth_range.sample(rng)
            usable = links.baseline_bandwidth[i, j] * ratio
            bandwidth[i, j] = usable
            bandwidth[j, i] = usable

    return RoundResources(compute=compute, bandwidth=bandwidth)
