"""Greedy per-round scheduler: pick the node and data amount that maximize
training efficiency under a label-balance constraint.

Each round, every node is scored as a candidate. For a candidate we first
find the largest sample count it could train without pushing the variance of
cumulative per-label usage past the configured bound (a linear objective over
the intersection of a box and a variance ball), then compare the efficiency
objective at that count against the efficiency of skipping the round. The
candidate with the best winning score is adopted; if no candidate beats
skipping, the round is skipped.

Efficiency of training s samples on node i while node j holds the model:

    (s + samples_so_far) / (t_comp(s) + t_comm(i, j) + t_idle(s)
                            + time_so_far + time_offset)

The solver works in cumulative-usage space y_c = prior_c + pool_c * x_c.
KKT analysis of "maximize sum(y) subject to Var(y) <= bound, y in box" shows
the optimum is a water level h clipped to the box, y_c = clip(h, lo_c, hi_c),
and that Var(y(h)) is quasiconvex in h. Bisection on h therefore finds the
largest feasible level deterministically; a closed-form coordinate-ascent
polish then absorbs any residual slack.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .domain import (
    ModelSpec,
    NodeId,
    NodeProfile,
    RoundDecision,
    ScheduleState,
    SchedulerConstants,
    label_variance,
)
from .resources import RoundResources
from .timing import training_round_timing

_LEVEL_TOL = 1e-13
_MAX_BISECT = 200
_ASCENT_REL_TOL = 1e-9
_MAX_SWEEPS = 100


@dataclass(frozen=True)
class AllocationSolution:
    """Result of the per-node data-amount optimization.

    s_star is the largest feasible sample count; fractions the per-label
    usage ratios achieving it. prior_feasible is False when the incoming
    state already violated the variance bound beyond tolerance, in which
    case the solution degrades to zero allocation.
    """

    s_star: float
    fractions: np.ndarray
    prior_feasible: bool = True


@dataclass(frozen=True)
class CandidateEvaluation:
    """One node's scores for the current round."""

    node: NodeId
    s_star: float
    fractions: np.ndarray
    objective_at_star: float
    objective_at_zero: float
    trains: bool


def _clip_level(level: float, lower: np.ndarray, upper: np.ndarray) -> np.ndarray:
    return np.clip(level, lower, upper)


def _variance(y: np.ndarray) -> float:
    mean = y.mean()
    return float(np.mean((y - mean) ** 2))


def _variance_minimizing_level(lower: np.ndarray, upper: np.ndarray) -> float:
    """Level h with h = mean(clip(h, lower, upper)), the box variance minimizer.

    h - mean(y(h)) is nondecreasing in h and changes sign inside
    [min(lower), max(upper)], so plain bisection suffices.
    """
    lo = float(lower.min())
    hi = float(upper.max())
    for _ in range(_MAX_BISECT):
        if hi - lo <= _LEVEL_TOL * max(1.0, abs(lo), abs(hi)):
            break
        mid = 0.5 * (lo + hi)
        if mid - _clip_level(mid, lower, upper).mean() < 0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def _coordinate_ascent(
    y: np.ndarray, upper: np.ndarray, bound: float
) -> np.ndarray:
    """Greedy per-coordinate polish: raise one coordinate at a time as far as
    the variance bound and the box allow, until sweep improvement stalls.

    Raising coordinate c by d changes the variance by
    (2 d / n)(y_c - mean) + d^2 (n - 1) / n^2, so the admissible step is a
    quadratic root. Feasibility is preserved exactly at every step.
    """
    y = y.copy()
    n = y.size
    quad = (n - 1) / n**2
    for _ in range(_MAX_SWEEPS):
        gained = 0.0
        for c in range(n):
            room = upper[c] - y[c]
            if room <= 0:
                continue
            var = _variance(y)
            lin = 2.0 * (y[c] - y.mean()) / n
            margin = bound - var
            if margin <= 0:
                continue
            # Largest d >= 0 with quad*d^2 + lin*d - margin <= 0.
            disc = lin * lin + 4.0 * quad * margin
            step = (-lin + np.sqrt(disc)) / (2.0 * quad)
            step = min(step, room)
            if step > 0:
                y[c] += step
                gained += step
        if gained < _ASCENT_REL_TOL * (1.0 + abs(float(y.sum()))):
            break
    return y


def max_feasible_samples(
    node: NodeId,
    profile: NodeProfile,
    state: ScheduleState,
    constants: SchedulerConstants,
) -> AllocationSolution:
    """Largest sample count `node` can train this round within the variance bound.

    Returns the count and the per-label fractions achieving it. Labels the
    node does not hold get fraction zero. A prior state that violates the
    bound beyond tolerance yields a zero allocation flagged infeasible.
    """
    pool = profile.label_counts.astype(float)
    prior = state.label_usage
    bound = constants.variance_bound
    slack = constants.variance_slack

    zero = AllocationSolution(0.0, np.zeros(pool.size))
    if state.usage_variance() > bound + slack:
        return AllocationSolution(0.0, np.zeros(pool.size), prior_feasible=False)

    lower = prior
    upper = prior + pool

    if _variance(upper) <= bound:
        y = upper
    else:
        lo = float(lower.min())
        hi = float(upper.max())
        if _variance(_clip_level(lo, lower, upper)) > bound:
            # Prior sits on the bound within tolerance; restart the bracket
            # from the variance-minimizing level if that one is feasible.
            lo = _variance_minimizing_level(lower, upper)
            if _variance(_clip_level(lo, lower, upper)) > bound:
                return zero
        for _ in range(_MAX_BISECT):
            if hi - lo <= _LEVEL_TOL * max(1.0, abs(lo), abs(hi)):
                break
            mid = 0.5 * (lo + hi)
            if _variance(_clip_level(mid, lower, upper)) <= bound:
                lo = mid
            else:
                hi = mid
        y = _clip_level(lo, lower, upper)
        y = _coordinate_ascent(y, upper, bound)

    with np.errstate(divide="ignore", invalid="ignore"):
        fractions = np.where(pool > 0, (y - prior) / np.where(pool > 0, pool, 1.0), 0.0)
    fractions = np.clip(fractions, 0.0, 1.0)
    s_star = float((pool * fractions).sum())
    return AllocationSolution(s_star=s_star, fractions=fractions)


def efficiency_score(
    node: NodeId,
    s_round: float,
    state: ScheduleState,
    resources: RoundResources,
    model: ModelSpec,
    constants: SchedulerConstants,
) -> float:
    """Samples-per-second efficiency of training s_round samples on `node`.

    Transfer is charged only when the model would actually move (the node is
    not the holder and at least one sample is trained); below one sample the
    round idles instead. The denominator offset keeps the score finite in
    round 1.
    """
    timing = training_round_timing(
        samples=s_round,
        node=node,
        holder=state.holder,
        model=model,
        flops_available=float(resources.compute[node]),
        bits_per_sec=float(resources.bandwidth[node, state.holder]),
        constants=constants,
    )
    denom = timing.total + state.cumulative_time + constants.objective_time_offset
    return (s_round + state.cumulative_samples) / denom


def integerize_counts(
    fractions: np.ndarray,
    profile: NodeProfile,
    state: ScheduleState,
    constants: SchedulerConstants,
) -> np.ndarray:
    """Round a real allocation down to whole samples, repairing the variance
    bound if flooring broke it.

    Repair decrements the label whose cumulative usage sits farthest above
    the mean, one sample at a time; it terminates because counts of zero
    reproduce the (feasible) prior state.
    """
    pool = profile.label_counts
    counts = np.floor(pool * fractions).astype(np.int64)
    counts = np.minimum(np.maximum(counts, 0), pool)

    limit = constants.variance_bound + constants.variance_slack
    while label_variance(state.label_usage, counts) > limit:
        positive = counts > 0
        if not positive.any():
            break
        y = state.label_usage + counts
        excess = np.where(positive, y - y.mean(), -np.inf)
        counts[int(np.argmax(excess))] -= 1
    return counts


def evaluate_candidates(
    state: ScheduleState,
    profiles: list[NodeProfile],
    resources: RoundResources,
    model: ModelSpec,
    constants: SchedulerConstants,
) -> list[CandidateEvaluation]:
    """Score every node for the current round, in ascending node order.

    Per-candidate work is independent; evaluating sequentially in id order
    keeps the reduction deterministic.
    """
    evaluations = []
    for node in range(len(profiles)):
        solution = max_feasible_samples(node, profiles[node], state, constants)
        at_zero = efficiency_score(node, 0.0, state, resources, model, constants)
        at_star = efficiency_score(node, solution.s_star, state, resources, model, constants)
        # Below one sample nothing can be trained, so the candidate skips.
        trains = solution.s_star >= 1.0 and at_star >= at_zero
        evaluations.append(
            CandidateEvaluation(
                node=node,
                s_star=solution.s_star,
                fractions=solution.fractions,
                objective_at_star=at_star,
                objective_at_zero=at_zero,
                trains=trains,
            )
        )
    return evaluations


def decide_round(
    state: ScheduleState,
    profiles: list[NodeProfile],
    resources: RoundResources,
    model: ModelSpec,
    constants: SchedulerConstants,
) -> RoundDecision:
    """Choose the training node and integer sample counts for one round.

    Ties between equal winning objectives go to the lower node id. After
    integerization the committed counts are re-checked: a total below one
    sample, or a score that fell below the node's skip score, degrades the
    round to a skip so a committed round never scores worse than skipping.
    """
    evaluations = evaluate_candidates(state, profiles, resources, model, constants)

    best = evaluations[0]
    for cand in evaluations[1:]:
        winning = cand.objective_at_star if cand.trains else cand.objective_at_zero
        incumbent = best.objective_at_star if best.trains else best.objective_at_zero
        if winning > incumbent:
            best = cand

    if not best.trains:
        return RoundDecision.skip()

    counts = integerize_counts(best.fractions, profiles[best.node], state, constants)
    total = int(counts.sum())
    if total < 1:
        return RoundDecision.skip()
    committed_score = efficiency_score(
        best.node, float(total), state, resources, model, constants
    )
    if committed_score < best.objective_at_zero:
        return RoundDecision.skip()
    return RoundDecision.train(best.node, best.fractions, counts)
