"""Datasets, synthetic generation, CSV ingestion, and non-IID partitioners."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, InputError, ParseError


@dataclass
class Dataset:
    features: np.ndarray  # (n, d)
    labels: np.ndarray  # (n,) ints in [0, num_classes)
    num_classes: int

    def __len__(self) -> int:
        return len(self.labels)

    def subset(self, indices: np.ndarray) -> "Dataset":
        return Dataset(self.features[indices], self.labels[indices], self.num_classes)


@dataclass
class IndexPartition:
    """Disjoint per-client index sets into a parent dataset."""

    client_indices: list[np.ndarray]

    @property
    def num_clients(self) -> int:
        return len(self.client_indices)


@dataclass
class SyntheticSpec:
    num_classes: int = 8
    dim: int = 16
    samples_per_class: int = 400
    class_center_scale: float = 1.0
    noise_sigma: float = 0.35

    def __post_init__(self):
        if min(self.num_classes, self.dim, self.samples_per_class) < 1:
            raise ConfigurationError("synthetic spec sizes must be positive")
        if self.class_center_scale <= 0 or self.noise_sigma < 0:
            raise ConfigurationError("synthetic spec scales must be positive")


def gen_synthetic(spec: SyntheticSpec, rng: np.random.Generator) -> Dataset:
    """Gaussian blobs: one uniform-random center per class plus isotropic noise."""
    centers = rng.uniform(
        -spec.class_center_scale, spec.class_center_scale, (spec.num_classes, spec.dim)
    )
    labels = np.repeat(np.arange(spec.num_classes), spec.samples_per_class)
    noise = rng.normal(0.0, spec.noise_sigma, (len(labels), spec.dim))
    return Dataset(centers[labels] + noise, labels, spec.num_classes)


def save_csv(dataset: Dataset, path) -> None:
    dim = dataset.features.shape[1]
    header = ",".join([f"f{i}" for i in range(dim)] + ["label"])
    with open(path, "w") as fh:
        fh.write(header + "\n")
        for row, label in zip(dataset.features, dataset.labels):
            fh.write(",".join("%.17g" % v for v in row) + f",{int(label)}\n")


def load_csv(path) -> Dataset:
    """Read a dataset CSV: header f0..f{d-1},label then one sample per row."""
    with open(path) as fh:
        lines = fh.read().splitlines()
    if not lines:
        raise InputError(f"{path}: empty dataset file")
    header = lines[0].split(",")
    if header[-1] != "label":
        raise ParseError(f"{path}: line 1: header must end with 'label'")
    dim = len(header) - 1
    features, labels = [], []
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        cells = line.split(",")
        if len(cells) != dim + 1:
            raise ParseError(f"{path}: line {lineno}: expected {dim + 1} columns, got {len(cells)}")
        try:
            features.append([float(c) for c in cells[:-1]])
            labels.append(int(cells[-1]))
        except ValueError as exc:
            raise ParseError(f"{path}: line {lineno}: {exc}") from exc
    if not labels:
        raise InputError(f"{path}: no data rows")
    labels = np.asarray(labels)
    if labels.min() < 0:
        raise ParseError(f"{path}: negative class label")
    return Dataset(np.asarray(features), labels, int(labels.max()) + 1)


def _repair_empty_clients(client_indices: list[np.ndarray]) -> list[np.ndarray]:
    # Local training needs at least one sample; move singles from the largest client.
    while any(len(idx) == 0 for idx in client_indices):
        donor = max(range(len(client_indices)), key=lambda i: len(client_indices[i]))
        if len(client_indices[donor]) <= 1:
            raise InputError("not enough samples to give every client at least one")
        empty = next(i for i, idx in enumerate(client_indices) if len(idx) == 0)
        client_indices[empty] = client_indices[donor][-1:]
        client_indices[donor] = client_indices[donor][:-1]
    return client_indices


def partition_dirichlet(
    dataset: Dataset, num_clients: int, beta: float, rng: np.random.Generator
) -> IndexPartition:
    """Label-skew split: per class, client proportions drawn from Dir(beta)."""
    if num_clients < 1:
        raise ConfigurationError("need at least one client")
    if beta <= 0:
        raise ConfigurationError("Dirichlet concentration beta must be > 0")
    if len(dataset) < num_clients:
        raise InputError("fewer samples than clients")
    buckets: list[list[np.ndarray]] = [[] for _ in range(num_clients)]
    for cls in range(dataset.num_classes):
        idx = np.flatnonzero(dataset.labels == cls)
        if len(idx) == 0:
            continue
        idx = rng.permutation(idx)
        props = rng.dirichlet(np.full(num_clients, beta))
        cuts = (np.cumsum(props)[:-1] * len(idx)).astype(int)
        for client, chunk in enumerate(np.split(idx, cuts)):
            buckets[client].append(chunk)
    client_indices = [
        np.concatenate(b) if b else np.array([], dtype=int) for b in buckets
    ]
    return IndexPartition(_repair_empty_clients(client_indices))


def partition_pathological(
    dataset: Dataset, num_clients: int, r: int, rng: np.random.Generator
) -> IndexPartition:
    """Shard split: every client gets shards from exactly r distinct classes."""
    k = dataset.num_classes
    if r < 1 or r > k:
        raise ConfigurationError(f"classes per client r must lie in [1, {k}]")
    if num_clients * r < k:
        raise ConfigurationError(
            f"infeasible partition: {num_clients} clients x {r} classes cannot cover {k} classes"
        )
    # Distribute the num_clients*r shard slots as evenly as possible over classes.
    base, extra = divmod(num_clients * r, k)
    shard_counts = np.full(k, base)
    shard_counts[rng.permutation(k)[:extra]] += 1
    shards: list[list[np.ndarray]] = []
    for cls in range(k):
        idx = np.flatnonzero(dataset.labels == cls)
        if len(idx) < shard_counts[cls]:
            raise InputError(f"class {cls} has too few samples for {shard_counts[cls]} shards")
        shards.append(list(np.array_split(rng.permutation(idx), shard_counts[cls])))
    remaining = shard_counts.copy()
    client_indices: list[np.ndarray] = [None] * num_clients
    for pos, client in enumerate(rng.permutation(num_clients)):
        # Take from the classes with the most shards left; this keeps the
        # deal feasible for the clients that follow. Random keys break ties.
        order = np.lexsort((rng.random(k), -remaining))
        chosen = [c for c in order if remaining[c] > 0][:r]
        parts = []
        for cls in chosen:
            remaining[cls] -= 1
            parts.append(shards[cls].pop())
        client_indices[client] = np.concatenate(parts)
    return IndexPartition(client_indices)


def label_histogram(dataset: Dataset, indices: np.ndarray) -> np.ndarray:
    """Per-class sample counts for one client's index set."""
    return np.bincount(dataset.labels[indices], minlength=dataset.num_classes)
