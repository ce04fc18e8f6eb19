"""The four scheduling strategies behind one dispatch, so the simulation loop
is strategy-agnostic.

load-aware    full per-round optimization over nodes and data amounts.
random        uniform node pick, per-label usage ratios drawn from [0, 0.1].
time-first    fixed 10% usage, picks the node minimizing this round's time.
variance-first fixed cyclic node order, data amount optimized per round
              under the variance bound (the circulation-only reference).
"""

from __future__ import annotations

from enum import Enum

import numpy as np

from .domain import (
    ModelSpec,
    NodeProfile,
    RoundDecision,
    ScheduleState,
    SchedulerConstants,
)
from .resources import RoundResources
from .scheduler import (
    decide_round,
    efficiency_score,
    integerize_counts,
    max_feasible_samples,
)
from .timing import training_round_timing


class Strategy(str, Enum):
    LOAD_AWARE = "load-aware"
    RANDOM = "random"
    TIME_FIRST = "time-first"
    VARIANCE_FIRST = "variance-first"

    @property
    def enforces_variance(self) -> bool:
        """Whether committed rounds are expected to satisfy the variance bound."""
        return self in (Strategy.LOAD_AWARE, Strategy.VARIANCE_FIRST)


def _floor_counts(fractions: np.ndarray, profile: NodeProfile) -> np.ndarray:
    counts = np.floor(profile.label_counts * fractions).astype(np.int64)
    return np.minimum(counts, profile.label_counts)


def _decide_random(
    state: ScheduleState,
    profiles: list[NodeProfile],
    rng: np.random.Generator,
) -> RoundDecision:
    node = int(rng.integers(len(profiles)))
    fractions = rng.uniform(0.0, 0.1, size=profiles[node].n_labels)
    counts = _floor_counts(fractions, profiles[node])
    if counts.sum() < 1:
        # A draw below one whole sample trains nothing; the round waits.
        return RoundDecision.skip()
    return RoundDecision.train(node, fractions, counts)


def _decide_time_first(
    state: ScheduleState,
    profiles: list[NodeProfile],
    resources: RoundResources,
    model: ModelSpec,
    constants: SchedulerConstants,
) -> RoundDecision:
    best_node = 0
    best_time = np.inf
    for node, profile in enumerate(profiles):
        samples = 0.1 * profile.total_samples
        timing = training_round_timing(
            samples=samples,
            node=node,
            holder=state.holder,
            model=model,
            flops_available=float(resources.compute[node]),
            bits_per_sec=float(resources.bandwidth[node, state.holder]),
            constants=constants,
        )
        if timing.total < best_time:
            best_time = timing.total
            best_node = node
    profile = profiles[best_node]
    fractions = np.full(profile.n_labels, 0.1)
    counts = _floor_counts(fractions, profile)
    if counts.sum() < 1:
        return RoundDecision.skip()
    return RoundDecision.train(best_node, fractions, counts)


def _decide_variance_first(
    state: ScheduleState,
    profiles: list[NodeProfile],
    resources: RoundResources,
    model: ModelSpec,
    constants: SchedulerConstants,
) -> RoundDecision:
    # Fixed cyclic order, advancing every round whether or not training
    # happened: round k visits (initial holder + k) mod n.
    node = (state.initial_holder + state.round_index + 1) % len(profiles)
    solution = max_feasible_samples(node, profiles[node], state, constants)
    at_zero = efficiency_score(node, 0.0, state, resources, model, constants)
    at_star = efficiency_score(node, solution.s_star, state, resources, model, constants)
    if solution.s_star < 1.0 or at_star < at_zero:
        return RoundDecision.skip()
    counts = integerize_counts(solution.fractions, profiles[node], state, constants)
    total = int(counts.sum())
    if total < 1:
        return RoundDecision.skip()
    if efficiency_score(node, float(total), state, resources, model, constants) < at_zero:
        return RoundDecision.skip()
    return RoundDecision.train(node, solution.fractions, counts)


def decide(
    kind: Strategy,
    state: ScheduleState,
    profiles: list[NodeProfile],
    resources: RoundResources,
    model: ModelSpec,
    constants: SchedulerConstants,
    rng: np.random.Generator,
) -> RoundDecision:
    """Produce this round's decision under the given strategy.

    Only the random strategy consumes the generator; passing it everywhere
    keeps call sites uniform and traces reproducible.
    """
    if kind is Strategy.LOAD_AWARE:
        return decide_round(state, profiles, resources, model, constants)
    if kind is Strategy.RANDOM:
        return _decide_random(state, profiles, rng)
    if kind is Strategy.TIME_FIRST:
        return _decide_time_first(state, profiles, resources, model, constants)
    if kind is Strategy.VARIANCE_FIRST:
        return _decide_variance_first(state, profiles, resources, model, constants)
    raise ValueError(f"unknown strategy: {kind!r}")
