"""Hierarchical non-IID world construction.

Every device holds a single label. The four scenarios differ only in how
labels are spread across the devices of one edge:

==== ============== ==========================
name labels / edge devices per label
==== ============== ==========================
D1   1              all
D2   5              1/5 of the edge each
D3   8              3/10 predominant, 1/10 x 7
D4   num_classes    1/num_classes each
==== ============== ==========================

Edge ``e`` (0-based) always has predominant label ``e mod num_classes`` and
the remaining labels follow cyclically.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import floor

import numpy as np

from .exceptions import ConfigurationError
from .model import Dataset

SCENARIOS = ("D1", "D2", "D3", "D4")
TEST_MODES = ("imbalanced", "balanced")


def _scenario_pattern(scenario: str, devices_per_edge: int, num_classes: int) -> list[int]:
    """Device counts per label offset 0, 1, 2, ... from the predominant label."""
    d = devices_per_edge
    if scenario == "D1":
        return [d]
    if scenario == "D2":
        if d % 5 or num_classes < 5:
            raise ConfigurationError(
                f"D2 needs devices_per_edge divisible by 5 and >= 5 classes "
                f"(got {d} devices, {num_classes} classes)"
            )
        return [d // 5] * 5
    if scenario == "D3":
        if d % 10 or num_classes < 8:
            raise ConfigurationError(
                f"D3 needs devices_per_edge divisible by 10 and >= 8 classes "
                f"(got {d} devices, {num_classes} classes)"
            )
        return [3 * d // 10] + [d // 10] * 7
    if scenario == "D4":
        if d % num_classes:
            raise ConfigurationError(
                f"D4 needs devices_per_edge divisible by num_classes "
                f"(got {d} devices, {num_classes} classes)"
            )
        return [d // num_classes] * num_classes
    raise ConfigurationError(f"unknown scenario {scenario!r}; expected one of {SCENARIOS}")


def assign_device_labels(scenario, num_edges=10, devices_per_edge=10, num_classes=10) -> np.ndarray:
    """Label matrix of shape ``(num_edges, devices_per_edge)``."""
    if num_edges < 1 or devices_per_edge < 1 or num_classes < 2:
        raise ConfigurationError("num_edges, devices_per_edge must be >= 1 and num_classes >= 2")
    pattern = _scenario_pattern(scenario, devices_per_edge, num_classes)
    labels = np.empty((num_edges, devices_per_edge), dtype=np.int64)
    for e in range(num_edges):
        row = []
        for offset, count in enumerate(pattern):
            row += [(e + offset) % num_classes] * count
        labels[e] = row
    return labels


@dataclass(frozen=True, eq=False)
class PartitionPlan:
    scenario: str
    device_labels: np.ndarray
    samples_per_device: int
    num_classes: int = 10

    @classmethod
    def build(cls, scenario, num_edges=10, devices_per_edge=10, num_classes=10, samples_per_device=50):
        if samples_per_device < 1:
            raise ConfigurationError("samples_per_device must be positive")
        labels = assign_device_labels(scenario, num_edges, devices_per_edge, num_classes)
        return cls(scenario, labels, int(samples_per_device), num_classes)

    @property
    def num_edges(self) -> int:
        return self.device_labels.shape[0]

    @property
    def devices_per_edge(self) -> int:
        return self.device_labels.shape[1]

    def edge_device_counts(self) -> np.ndarray:
        """``(num_edges, num_classes)`` matrix of devices holding each label."""
        out = np.zeros((self.num_edges, self.num_classes), dtype=np.int64)
        for e, row in enumerate(self.device_labels):
            out[e] = np.bincount(row, minlength=self.num_classes)
        return out

    def label_demand(self) -> np.ndarray:
        """Training examples needed per label across the whole plan."""
        return self.edge_device_counts().sum(axis=0) * self.samples_per_device


def partition_train(dataset: Dataset, plan: PartitionPlan, seed: int) -> list[list[Dataset]]:
    """Carve disjoint single-label shards, indexed ``[edge][device]``.

    Each label's examples are permuted once and dealt out in (edge, device)
    order, so no example lands on two devices.
    """
    demand = plan.label_demand()
    available = dataset.label_counts(plan.num_classes)
    short = [(c, int(demand[c] - available[c])) for c in range(plan.num_classes) if available[c] < demand[c]]
    if short:
        detail = ", ".join(f"label {c} short by {n}" for c, n in short)
        raise ConfigurationError(f"not enough training examples: {detail}")

    rng = np.random.default_rng(seed)
    queues = [rng.permutation(np.flatnonzero(dataset.y == c)) for c in range(plan.num_classes)]
    cursor = [0] * plan.num_classes
    n = plan.samples_per_device
    shards = []
    for row in plan.device_labels:
        edge = []
        for label in row:
            take = queues[label][cursor[label]:cursor[label] + n]
            cursor[label] += n
            edge.append(dataset.subset(take))
        shards.append(edge)
    return shards


def _per_label_pool(test_pool: Dataset, num_classes: int) -> list[np.ndarray]:
    idx = [np.flatnonzero(test_pool.y == c) for c in range(num_classes)]
    sizes = {len(i) for i in idx}
    if len(sizes) != 1 or 0 in sizes:
        raise ConfigurationError(
            f"test pool must hold an equal, non-zero count per label (got {[len(i) for i in idx]})"
        )
    return idx


def build_imbalanced_test(test_pool: Dataset, plan: PartitionPlan) -> list[Dataset]:
    """Per-edge test sets whose label proportions equal the edge's training proportions.

    Label ``c`` on an edge gets ``devices_with_c * unit`` examples, where
    ``unit`` is the largest value the per-label pool supports for every edge.
    For D1, D2 and D4 this uses each present label's whole pool.
    """
    pools = _per_label_pool(test_pool, plan.num_classes)
    counts = plan.edge_device_counts()
    unit = len(pools[0]) // counts.max()
    if unit == 0:
        raise ConfigurationError(
            f"test pool of {len(pools[0])} per label cannot hold {counts.max()} shares of one label"
        )
    out = []
    for row in counts:
        take = [pools[c][: row[c] * unit] for c in range(plan.num_classes) if row[c]]
        out.append(test_pool.subset(np.sort(np.concatenate(take))))
    return out


def build_balanced_test(test_pool: Dataset, plan: PartitionPlan) -> list[Dataset]:
    """Per-edge test sets holding the full pool of every label seen in training."""
    pools = _per_label_pool(test_pool, plan.num_classes)
    out = []
    for row in plan.edge_device_counts():
        take = [pools[c] for c in range(plan.num_classes) if row[c]]
        out.append(test_pool.subset(np.sort(np.concatenate(take))))
    return out


def split_ptd_etd(ttd: Dataset, fraction: float = 0.15, seed: int = 0) -> tuple[Dataset, Dataset]:
    """Label-stratified random split into (personalization, evaluation) sets.

    The personalization size is ``round(fraction * len(ttd))``, apportioned
    across labels by largest remainder so each label's share is within one
    example of ``fraction * count``. Both outputs keep the input order.
    """
    if len(ttd) == 0:
        raise ConfigurationError("cannot split an empty test set")
    if not 0.0 < fraction < 1.0:
        raise ConfigurationError(f"fraction must lie strictly in (0, 1), got {fraction}")

    labels = np.unique(ttd.y)
    groups = [np.flatnonzero(ttd.y == c) for c in labels]
    exact = np.array([fraction * len(g) for g in groups])
    quota = np.floor(exact + 1e-9).astype(np.int64)
    total = floor(fraction * len(ttd) + 0.5)
    remainder = exact - quota
    # stable sort: ties go to the lower label
    for i in np.argsort(-remainder, kind="stable")[: max(0, total - int(quota.sum()))]:
        quota[i] += 1

    rng = np.random.default_rng(seed)
    chosen = np.zeros(len(ttd), dtype=bool)
    for g, k in zip(groups, quota):
        chosen[rng.permutation(g)[:k]] = True
    return ttd.subset(np.flatnonzero(chosen)), ttd.subset(np.flatnonzero(~chosen))


@dataclass(frozen=True, eq=False)
class EdgeTestSets:
    ttd: list[Dataset]
    ptd: list[Dataset]
    etd: list[Dataset]
    mode: str


def build_edge_test_sets(test_pool, plan, mode="imbalanced", fraction=0.15, seed=0) -> EdgeTestSets:
    if mode == "imbalanced":
        ttds = build_imbalanced_test(test_pool, plan)
    elif mode == "balanced":
        ttds = build_balanced_test(test_pool, plan)
    else:
        raise ConfigurationError(f"unknown test mode {mode!r}; expected one of {TEST_MODES}")
    ptd, etd = [], []
    for e, ttd in enumerate(ttds):
        p, v = split_ptd_etd(ttd, fraction, seed=[seed, e])
        ptd.append(p)
        etd.append(v)
    return EdgeTestSets(ttds, ptd, etd, mode)


def label_matrix(datasets: list[Dataset], num_classes: int) -> np.ndarray:
    """``(len(datasets), num_classes)`` label histogram."""
    return np.stack([d.label_counts(num_classes) for d in datasets])
