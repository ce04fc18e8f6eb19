"""Core value types shared by every other module.

Node and label identifiers are dense integers (0..n-1), and everything keyed
by them is stored as a numpy array indexed by id. That keeps iteration order
fixed, which the determinism guarantees of the simulator rely on.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

NodeId = int
LabelId = int


class InvariantViolation(ValueError):
    """A value failed one of its structural invariants."""


@dataclass(frozen=True)
class NodeProfile:
    """Static description of one node: its label pool sizes and compute.

    label_counts[c] is the number of samples with label c held by the node;
    baseline_compute is the node's unloaded capacity in FLOPS.
    """

    label_counts: np.ndarray
    baseline_compute: float

    def __post_init__(self) -> None:
        counts = np.asarray(self.label_counts, dtype=np.int64)
        object.__setattr__(self, "label_counts", counts)
        if counts.ndim != 1 or counts.size < 2:
            raise InvariantViolation("label_counts must be a 1-d array over >= 2 labels")
        if (counts < 0).any():
            raise InvariantViolation("label_counts must be nonnegative")
        if self.baseline_compute <= 0:
            raise InvariantViolation("baseline_compute must be positive")

    @property
    def n_labels(self) -> int:
        return int(self.label_counts.size)

    @property
    def total_samples(self) -> int:
        return int(self.label_counts.sum())


@dataclass(frozen=True)
class LinkProfile:
    """Symmetric baseline bandwidth (bits/second) for every node pair.

    Stored as an (n, n) matrix; the diagonal is unused (a node never
    transmits to itself) and forced to zero.
    """

    baseline_bandwidth: np.ndarray

    def __post_init__(self) -> None:
        bw = np.asarray(self.baseline_bandwidth, dtype=float).copy()
        if bw.ndim != 2 or bw.shape[0] != bw.shape[1] or bw.shape[0] < 2:
            raise InvariantViolation("baseline_bandwidth must be a square matrix over >= 2 nodes")
        if not np.allclose(bw, bw.T, rtol=0, atol=0):
            raise InvariantViolation("baseline_bandwidth must be symmetric")
        off_diag = bw[~np.eye(bw.shape[0], dtype=bool)]
        if (off_diag <= 0).any():
            raise InvariantViolation("baseline_bandwidth must be positive for every node pair")
        np.fill_diagonal(bw, 0.0)
        bw.flags.writeable = False
        object.__setattr__(self, "baseline_bandwidth", bw)

    @property
    def n_nodes(self) -> int:
        return int(self.baseline_bandwidth.shape[0])

    @classmethod
    def uniform(cls, n_nodes: int, bits_per_sec: float) -> "LinkProfile":
        bw = np.full((n_nodes, n_nodes), float(bits_per_sec))
        return cls(bw)


@dataclass(frozen=True)
class ModelSpec:
    """Cost model of the trained network: per-sample FLOPs and wire size in bits."""

    flops_per_sample: float
    model_bits: float

    def __post_init__(self) -> None:
        if self.flops_per_sample <= 0:
            raise InvariantViolation("flops_per_sample must be positive")
        if self.model_bits <= 0:
            raise InvariantViolation("model_bits must be positive")


@dataclass(frozen=True)
class SchedulerConstants:
    """Scheduling knobs: variance bound, skip wait, horizon, objective offset.

    objective_time_offset is the constant second added to the cumulative time
    in the efficiency objective's denominator. It prevents a zero denominator
    in round 1 and is a modeling constant with time units, so rescaling
    experiments must rescale it together with every other time quantity.
    """

    variance_bound: float
    idle_wait: float = 1.0
    total_rounds: int = 500
    objective_time_offset: float = 1.0

    def __post_init__(self) -> None:
        if self.variance_bound < 0:
            raise InvariantViolation("variance_bound must be nonnegative")
        if self.idle_wait <= 0:
            raise InvariantViolation("idle_wait must be positive")
        if self.total_rounds < 0:
            raise InvariantViolation("total_rounds must be nonnegative")
        if self.objective_time_offset <= 0:
            raise InvariantViolation("objective_time_offset must be positive")

    @property
    def variance_slack(self) -> float:
        """Feasibility tolerance on the variance bound (floating-point KKT slack)."""
        return 1e-6 * max(1.0, self.variance_bound)


def mean_label_usage(usage: np.ndarray, extra: np.ndarray | None = None) -> float:
    """Average per-label sample usage after adding a candidate allocation.

    Computed over the full label set, including labels with zero usage.
    """
    usage = np.asarray(usage, dtype=float)
    total = usage if extra is None else usage + np.asarray(extra, dtype=float)
    return float(total.mean())


def label_variance(usage: np.ndarray, extra: np.ndarray | None = None) -> float:
    """Population variance, across labels, of cumulative sample usage.

    This is the quantity the scheduler bounds by the variance constraint; it
    is shift-invariant and zero exactly when every label has equal usage.
    """
    usage = np.asarray(usage, dtype=float)
    total = usage if extra is None else usage + np.asarray(extra, dtype=float)
    mean = total.mean()
    return float(np.mean((total - mean) ** 2))


@dataclass
class ScheduleState:
    """Cumulative training history: per-label usage, totals, and model holder.

    Single-writer: owned and mutated only by the simulation loop. Snapshots
    taken via copy() are safe to share.
    """

    label_usage: np.ndarray
    cumulative_samples: float
    cumulative_time: float
    holder: NodeId
    round_index: int
    initial_holder: NodeId = field(default=-1)

    def __post_init__(self) -> None:
        self.label_usage = np.asarray(self.label_usage, dtype=float).copy()
        if self.initial_holder < 0:
            self.initial_holder = self.holder

    @classmethod
    def fresh(cls, n_labels: int, holder: NodeId) -> "ScheduleState":
        return cls(
            label_usage=np.zeros(n_labels),
            cumulative_samples=0.0,
            cumulative_time=0.0,
            holder=holder,
            round_index=0,
        )

    @property
    def n_labels(self) -> int:
        return int(self.label_usage.size)

    def mean_usage(self, extra: np.ndarray | None = None) -> float:
        return mean_label_usage(self.label_usage, extra)

    def usage_variance(self, extra: np.ndarray | None = None) -> float:
        return label_variance(self.label_usage, extra)

    def commit_training(self, node: NodeId, counts: np.ndarray, duration: float) -> None:
        """Record a completed training round on `node` with integer counts."""
        counts = np.asarray(counts, dtype=float)
        self.label_usage = self.label_usage + counts
        self.cumulative_samples += float(counts.sum())
        self.cumulative_time += duration
        self.holder = node
        self.round_index += 1

    def commit_skip(self, duration: float) -> None:
        """Record a skipped round: the holder keeps the model, time advances."""
        self.cumulative_time += duration
        self.round_index += 1

    def copy(self) -> "ScheduleState":
        return ScheduleState(
            label_usage=self.label_usage,
            cumulative_samples=self.cumulative_samples,
            cumulative_time=self.cumulative_time,
            holder=self.holder,
            round_index=self.round_index,
            initial_holder=self.initial_holder,
        )


@dataclass(frozen=True)
class RoundDecision:
    """Outcome of one scheduling step: train on one node, or skip the round.

    A training decision carries both the real-valued fractions found by the
    solver and the integer per-label counts actually executed.
    """

    node: NodeId | None
    fractions: np.ndarray | None = None
    counts: np.ndarray | None = None

    @classmethod
    def train(cls, node: NodeId, fractions: np.ndarray, counts: np.ndarray) -> "RoundDecision":
        counts = np.asarray(counts, dtype=np.int64)
        if counts.sum() < 1:
            raise InvariantViolation("a training decision must use at least one sample")
        if (counts < 0).any():
            raise InvariantViolation("sample counts must be nonnegative")
        return cls(node=node, fractions=np.asarray(fractions, dtype=float), counts=counts)

    @classmethod
    def skip(cls) -> "RoundDecision":
        return cls(node=None)

    @property
    def is_skip(self) -> bool:
        return self.node is None

    @property
    def total_samples(self) -> int:
        return 0 if self.counts is None else int(self.counts.sum())


def validate_label_coverage(profiles: list[NodeProfile]) -> None:
    """Reject scenarios where some label is held by no node (unlearnable)."""
    if not profiles:
        raise InvariantViolation("at least one node profile is required")
    stacked = np.stack([p.label_counts for p in profiles])
    uncovered = np.flatnonzero(stacked.sum(axis=0) == 0)
    if uncovered.size:
        raise InvariantViolation(
            f"labels {uncovered.tolist()} are held by no node and cannot be learned"
        )
