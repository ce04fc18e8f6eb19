"""Dataset generation, ingestion, and non-IID partitioning into node pools."""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

IDX_IMAGES_MAGIC = 0x00000803
IDX_LABELS_MAGIC = 0x00000801


class DataFormatError(ValueError):
    """A dataset file is malformed; the message names the offending field."""


class PartitionError(ValueError):
    """A scenario demands more samples of some label than the dataset supplies."""


@dataclass(frozen=True)
class RawDataset:
    """Flat feature matrix with integer labels in [0, n_labels)."""

    features: np.ndarray
    labels: np.ndarray
    n_labels: int

    def __post_init__(self) -> None:
        if self.features.shape[0] != self.labels.shape[0]:
            raise DataFormatError("features and labels disagree on sample count")

    @property
    def n_samples(self) -> int:
        return int(self.labels.size)

    def per_label_counts(self) -> np.ndarray:
        return np.bincount(self.labels, minlength=self.n_labels).astype(np.int64)


@dataclass(frozen=True)
class PartitionedDataset:
    """Per-node label pools plus a shared test set.

    node_pools[i][c] is the feature matrix of node i's label-c samples;
    node_indices keeps the originating raw-sample indices for audits.
    """

    node_pools: list[list[np.ndarray]]
    node_indices: list[list[np.ndarray]]
    test_features: np.ndarray
    test_labels: np.ndarray
    n_labels: int

    @property
    def n_nodes(self) -> int:
        return len(self.node_pools)

    def label_counts(self) -> np.ndarray:
        """(n_nodes, n_labels) sample counts, the scheduler-visible pool sizes."""
        return np.array(
            [[pool.shape[0] for pool in pools] for pools in self.node_pools], dtype=np.int64
        )

    def held_labels(self, node: int) -> np.ndarray:
        return np.array([pool.shape[0] > 0 for pool in self.node_pools[node]])


def generate_blobs(
    classes: int,
    per_class: int | np.ndarray,
    dim: int,
    separation: float,
    rng: np.random.Generator,
) -> RawDataset:
    """Gaussian class clusters with unit covariance and centers `separation` apart.

    For classes <= dim the centers sit on scaled basis vectors, making every
    pairwise center distance exactly `separation`; beyond that, centers are
    random directions of the same radius.
    """
    if classes < 2:
        raise ValueError("at least two classes are required")
    counts = np.broadcast_to(np.asarray(per_class, dtype=np.int64), (classes,))
    radius = separation / np.sqrt(2.0)
    if classes <= dim:
        centers = np.eye(classes, dim) * radius
    else:
        directions = rng.standard_normal((classes, dim))
        directions /= np.linalg.norm(directions, axis=1, keepdims=True)
        centers = directions * radius

    features = []
    labels = []
    for c in range(classes):
        features.append(centers[c] + rng.standard_normal((int(counts[c]), dim)))
        labels.append(np.full(int(counts[c]), c, dtype=np.int64))
    return RawDataset(
        features=np.concatenate(features),
        labels=np.concatenate(labels),
        n_labels=classes,
    )


def _read_idx_header(blob: bytes, path: str, expected_magic: int, n_dims: int) -> tuple[int, ...]:
    header_len = 4 * (1 + n_dims)
    if len(blob) < header_len:
        raise DataFormatError(f"{path}: header truncated")
    magic = struct.unpack(">I", blob[:4])[0]
    if magic != expected_magic:
        raise DataFormatError(
            f"{path}: bad magic 0x{magic:08x} (expected 0x{expected_magic:08x})"
        )
    return struct.unpack(f">{n_dims}I", blob[4:header_len])


def load_idx_images(path: str | Path) -> np.ndarray:
    """Parse a big-endian IDX unsigned-byte image tensor, scaled to [0, 1]."""
    blob = Path(path).read_bytes()
    count, rows, cols = _read_idx_header(blob, str(path), IDX_IMAGES_MAGIC, 3)
    expected = 16 + count * rows * cols
    if len(blob) != expected:
        raise DataFormatError(
            f"{path}: image payload size mismatch (got {len(blob) - 16} bytes, "
            f"expected {count * rows * cols})"
        )
    pixels = np.frombuffer(blob, dtype=np.uint8, offset=16)
    return pixels.reshape(count, rows * cols).astype(np.float64) / 255.0


def load_idx_labels(path: str | Path) -> np.ndarray:
    """Parse a big-endian IDX unsigned-byte label vector."""
    blob = Path(path).read_bytes()
    (count,) = _read_idx_header(blob, str(path), IDX_LABELS_MAGIC, 1)
    if len(blob) != 8 + count:
        raise DataFormatError(f"{path}: label count mismatch")
    return np.frombuffer(blob, dtype=np.uint8, offset=8).astype(np.int64)


def load_idx_dataset(images_path: str | Path, labels_path: str | Path) -> RawDataset:
    features = load_idx_images(images_path)
    labels = load_idx_labels(labels_path)
    if features.shape[0] != labels.shape[0]:
        raise DataFormatError(
            f"{images_path} and {labels_path}: image/label count disagreement "
            f"({features.shape[0]} vs {labels.shape[0]})"
        )
    return RawDataset(features=features, labels=labels, n_labels=int(labels.max()) + 1)


def partition(
    raw: RawDataset,
    demand: np.ndarray,
    rng: np.random.Generator,
    shared_labels: bool = False,
) -> PartitionedDataset:
    """Assign samples to node pools according to a (n_nodes, n_labels) demand table.

    Pools are disjoint by default: a label's samples are shuffled once and
    sliced out per node. With shared_labels, nodes holding the same label all
    receive the same leading slice instead. Leftover samples form the test
    set. Raises listing every label whose demand exceeds supply.
    """
    demand = np.asarray(demand, dtype=np.int64)
    n_nodes, n_labels = demand.shape
    if n_labels != raw.n_labels:
        raise PartitionError(
            f"demand table covers {n_labels} labels but the dataset has {raw.n_labels}"
        )
    supply = raw.per_label_counts()
    needed = demand.max(axis=0) if shared_labels else demand.sum(axis=0)
    short = np.flatnonzero(needed > supply)
    if short.size:
        detail = ", ".join(
            f"label {c}: need {int(needed[c])}, have {int(supply[c])}" for c in short
        )
        raise PartitionError(f"demand exceeds supply ({detail})")

    node_pools: list[list[np.ndarray]] = [[] for _ in range(n_nodes)]
    node_indices: list[list[np.ndarray]] = [[] for _ in range(n_nodes)]
    leftover = []
    for c in range(n_labels):
        pool = rng.permutation(np.flatnonzero(raw.labels == c))
        cursor = 0
        for i in range(n_nodes):
            take = int(demand[i, c])
            if shared_labels:
                chosen = pool[:take]
                cursor = max(cursor, take)
            else:
                chosen = pool[cursor : cursor + take]
                cursor += take
            node_pools[i].append(raw.features[chosen])
            node_indices[i].append(chosen)
        leftover.append(pool[cursor:])

    test_idx = np.concatenate(leftover) if leftover else np.empty(0, dtype=np.int64)
    test_idx = np.sort(test_idx)
    return PartitionedDataset(
        node_pools=node_pools,
        node_indices=node_indices,
        test_features=raw.features[test_idx],
        test_labels=raw.labels[test_idx],
        n_labels=n_labels,
    )


def attach_test_set(
    parts: PartitionedDataset, features: np.ndarray, labels: np.ndarray
) -> PartitionedDataset:
    """Replace the partition's test set, e.g. with an official held-out split."""
    return PartitionedDataset(
        node_pools=parts.node_pools,
        node_indices=parts.node_indices,
        test_features=features,
        test_labels=labels,
        n_labels=parts.n_labels,
    )
