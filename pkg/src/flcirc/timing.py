"""Round time model: computation, transfer, and idle components.

A round's wall time is the sum of three parts: training compute (per-sample
FLOPs over available FLOPS), model transfer (model bits over available link
bandwidth, zero when the model stays put), and a fixed idle wait charged only
when the round trains nothing.
"""

from __future__ import annotations

from dataclasses import dataclass

from .domain import ModelSpec, NodeId, SchedulerConstants


class InvalidResourceError(ValueError):
    """A timing computation was asked to divide by a nonpositive resource."""


@dataclass(frozen=True)
class RoundTiming:
    """Time spent in one round, split by cause. total is the exact sum."""

    comp: float
    comm: float
    idle: float

    @property
    def total(self) -> float:
        return self.comp + self.comm + self.idle

    @classmethod
    def skip(cls, constants: SchedulerConstants) -> "RoundTiming":
        # A skipped round transmits and computes nothing; it only waits.
        return cls(comp=0.0, comm=0.0, idle=constants.idle_wait)


def compute_time(samples: float, model: ModelSpec, flops_available: float) -> float:
    """Seconds of training compute for `samples` samples at the given FLOPS."""
    if flops_available <= 0:
        raise InvalidResourceError(f"available compute must be positive, got {flops_available}")
    if samples < 0:
        raise ValueError("sample count must be nonnegative")
    return model.flops_per_sample * samples / flops_available

def transfer_time(
    sender: NodeId, receiver: NodeId, model: ModelSpec, bits_per_sec: float
) -> float:
    """Seconds to move the model between nodes; zero when it stays in place."""
    if sender == receiver:
        return 0.0
    if bits_per_sec <= 0:
        raise InvalidResourceError(f"available bandwidth must be positive, got {bits_per_sec}")
    return model.model_bits / bits_per_sec


def idle_time(samples: float, constants: SchedulerConstants) -> float:
    """Fixed wait charged when the round trains on less than one sample."""
    return constants.idle_wait if samples < 1 else 0.0


def training_round_timing(
    samples: float,
    node: NodeId,
    holder: NodeId,
    model: ModelSpec,
    flops_available: float,
    bits_per_sec: float,
    constants: SchedulerConstants,
) -> RoundTiming:
    """Assemble the full timing of a round that trains `samples` on `node`.

    Transfer is charged only when the model actually moves (node differs from
    the current holder and at least one sample is trained); the idle wait is
    charged exactly when nothing is trained.
    """
    if samples < 1:
        return RoundTiming(comp=0.0, comm=0.0, idle=constants.idle_wait)
    comm = transfer_time(holder, node, model, bits_per_sec) if node != holder else 0.0
    return RoundTiming(
        comp=compute_time(samples, model, flops_available),
        comm=comm,
        idle=0.0,
    )
