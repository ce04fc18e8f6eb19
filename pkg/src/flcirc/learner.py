"""Pluggable training backends invoked when a round commits.

Two learners are provided. The real one is multinomial logistic regression
trained with momentum SGD on cross-entropy, small enough to run thousands of
simulated rounds on a laptop while still rewarding balanced label coverage.
The surrogate replaces training entirely with a deterministic accuracy curve
driven by cumulative per-label usage; it exists to exercise the scheduler at
scale and makes no claim about any real model's learning dynamics.

Timing constants and the executed learner are decoupled on purpose: the
simulator charges time for the configured model cost profile regardless of
which learner actually updates weights.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .domain import InvariantViolation, NodeId


class TrainingContractError(ValueError):
    """A training request exceeded the data actually available at the node."""


@dataclass(frozen=True)
class TrainerConfig:
    learning_rate: float = 0.001
    momentum: float = 0.9
    batch_size: int = 32
    epochs_per_round: int = 1

    def __post_init__(self) -> None:
        if self.learning_rate <= 0:
            raise InvariantViolation("learning_rate must be positive")
        if not 0.0 <= self.momentum < 1.0:
            raise InvariantViolation("momentum must be in [0, 1)")
        if self.batch_size < 1:
            raise InvariantViolation("batch_size must be a positive integer")
        if self.epochs_per_round < 1:
            raise InvariantViolation("epochs_per_round must be a positive integer")


@dataclass
class ModelState:
    """Weights, biases, and the momentum velocity that travels with them.

    The velocity is part of the circulating state: a single model (and its
    optimizer buffer) moves from node to node, so momentum carries across
    rounds.
    """

    weights: np.ndarray
    bias: np.ndarray
    vel_weights: np.ndarray
    vel_bias: np.ndarray

    @classmethod
    def zeros(cls, n_classes: int, n_features: int) -> "ModelState":
        return cls(
            weights=np.zeros((n_classes, n_features)),
            bias=np.zeros(n_classes),
            vel_weights=np.zeros((n_classes, n_features)),
            vel_bias=np.zeros(n_classes),
        )

    def copy(self) -> "ModelState":
        return ModelState(
            weights=self.weights.copy(),
            bias=self.bias.copy(),
            vel_weights=self.vel_weights.copy(),
            vel_bias=self.vel_bias.copy(),
        )

    def check_finite(self) -> None:
        for arr in (self.weights, self.bias, self.vel_weights, self.vel_bias):
            if not np.isfinite(arr).all():
                raise InvariantViolation("model state contains non-finite values")


def log_softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))


def cross_entropy_gradients(
    model: ModelState, features: np.ndarray, labels: np.ndarray
) -> tuple[np.ndarray, np.ndarray, float]:
    """Mean cross-entropy loss and its analytic gradients for one batch."""
    logits = features @ model.weights.T + model.bias
    logp = log_softmax(logits)
    batch = features.shape[0]
    probs = np.exp(logp)
    probs[np.arange(batch), labels] -= 1.0
    probs /= batch
    grad_w = probs.T @ features
    grad_b = probs.sum(axis=0)
    loss = -float(logp[np.arange(batch), labels].mean())
    return grad_w, grad_b, loss


def momentum_step(
    model: ModelState, grad_w: np.ndarray, grad_b: np.ndarray, config: TrainerConfig
) -> None:
    """In-place momentum SGD update: v <- m*v + g; w <- w - lr*v."""
    model.vel_weights = config.momentum * model.vel_weights + grad_w
    model.vel_bias = config.momentum * model.vel_bias + grad_b
    model.weights = model.weights - config.learning_rate * model.vel_weights
    model.bias = model.bias - config.learning_rate * model.vel_bias


def draw_training_batch(
    pools: list[np.ndarray], counts: np.ndarray, rng: np.random.Generator
) -> tuple[np.ndarray, np.ndarray]:
    """Sample counts[c] feature rows per label without replacement.

    Each round draws fresh from the full pools, so a node's data is reusable
    across rounds. Raises when a request exceeds the pool.
    """
    xs = []
    ys = []
    for c, pool in enumerate(pools):
        want = int(counts[c])
        if want == 0:
            continue
        if want > len(pool):
            raise TrainingContractError(
                f"label {c}: requested {want} samples but only {len(pool)} available"
            )
        picked = rng.choice(len(pool), size=want, replace=False)
        xs.append(pool[picked])
        ys.append(np.full(want, c, dtype=np.int64))
    if not xs:
        return np.empty((0, 0)), np.empty(0, dtype=np.int64)
    return np.concatenate(xs), np.concatenate(ys)


def train_round(
    model: ModelState,
    node: NodeId,
    counts: np.ndarray,
    node_pools: list[np.ndarray],
    config: TrainerConfig,
    rng: np.random.Generator,
) -> ModelState:
    """Run one round of momentum SGD on exactly the committed sample counts.

    Returns a new ModelState; the input is not mutated. Zero counts return
    the model unchanged.
    """
    features, labels = draw_training_batch(node_pools, counts, rng)
    updated = model.copy()
    if len(labels) == 0:
        return updated
    for _ in range(config.epochs_per_round):
        order = rng.permutation(len(labels))
        for start in range(0, len(labels), config.batch_size):
            batch = order[start : start + config.batch_size]
            grad_w, grad_b, _ = cross_entropy_gradients(updated, features[batch], labels[batch])
            momentum_step(updated, grad_w, grad_b, config)
    updated.check_finite()
    return updated


def evaluate_model(
    model: ModelState, features: np.ndarray, labels: np.ndarray
) -> tuple[float, float]:
    """Accuracy under argmax (ties to the lowest class index) and mean cross-entropy."""
    if len(labels) == 0:
        raise ValueError("cannot evaluate on an empty test set")
    logits = features @ model.weights.T + model.bias
    logp = log_softmax(logits)
    predictions = logits.argmax(axis=1)
    accuracy = float((predictions == labels).mean())
    loss = -float(logp[np.arange(len(labels)), labels].mean())
    return accuracy, loss


@dataclass
class SurrogateState:
    """Accuracy stand-in driven by the scarcest label's cumulative usage.

    Accuracy starts at chance (1/n_labels) and saturates toward `ceiling` as
    u / (u + halfway) of the minimum per-label usage u. Deterministic and
    monotone nondecreasing in balanced usage; not a model of any real
    learner.
    """

    usage: np.ndarray
    ceiling: float = 0.95
    halfway: float = 500.0

    def __post_init__(self) -> None:
        self.usage = np.asarray(self.usage, dtype=float).copy()
        if not 0.0 < self.ceiling <= 1.0:
            raise InvariantViolation("surrogate ceiling must be in (0, 1]")
        if self.halfway <= 0:
            raise InvariantViolation("surrogate halfway constant must be positive")

    @classmethod
    def fresh(cls, n_labels: int, ceiling: float = 0.95, halfway: float = 500.0) -> "SurrogateState":
        return cls(usage=np.zeros(n_labels), ceiling=ceiling, halfway=halfway)

    def _saturation(self, minimum_usage: float) -> float:
        base = 1.0 / self.usage.size
        return base + (self.ceiling - base) * (minimum_usage / (minimum_usage + self.halfway))

    def accuracy(self) -> float:
        return self._saturation(float(self.usage.min()))

    def local_accuracy(self, held: np.ndarray) -> float:
        """Saturation over only the labels a node holds (held is a boolean mask)."""
        if not held.any():
            return 1.0 / self.usage.size
        return self._saturation(float(self.usage[held].min()))


def surrogate_train(state: SurrogateState, counts: np.ndarray) -> SurrogateState:
    """Advance the surrogate by the committed counts. Pure; returns a new state."""
    return SurrogateState(
        usage=state.usage + np.asarray(counts, dtype=float),
        ceiling=state.ceiling,
        halfway=state.halfway,
    )
