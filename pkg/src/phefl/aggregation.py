"""Weight-space operations shared by the edge and cloud tiers."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .exceptions import AggregationError, ConfigurationError, InputError
from .model import ParameterVector


@dataclass(frozen=True)
class WeightedModel:
    """A model paired with the example count it was trained on."""

    params: ParameterVector
    weight: int

    def __post_init__(self):
        if int(self.weight) != self.weight or self.weight < 1:
            raise AggregationError(f"model weight must be a positive integer, got {self.weight}")


@dataclass(frozen=True)
class AlphaRecord:
    edge_id: int
    acc_edge: float
    acc_cloud: float
    alpha: float
    round: int
    forced: bool = False


def weighted_average(models: Sequence[WeightedModel]) -> ParameterVector:
    """Example-count-weighted mean, accumulated in list order.

    Computed as ``v0 + sum_i (w_i / W) (v_i - v0)`` so that averaging identical
    vectors is exact, then clipped to the coordinate-wise input range to absorb
    last-ulp rounding.
    """
    if not models:
        raise AggregationError("cannot average an empty list of models")
    fingerprint = models[0].params.spec_fingerprint
    if any(m.params.spec_fingerprint != fingerprint for m in models):
        raise AggregationError("models belong to different specs")
    total = sum(int(m.weight) for m in models)
    if total <= 0:
        raise AggregationError("total weight is zero")

    base = models[0].params.values
    out = base.copy()
    lo = base.copy()
    hi = base.copy()
    for m in models[1:]:
        v = m.params.values
        out += (m.weight / total) * (v - base)
        np.minimum(lo, v, out=lo)
        np.maximum(hi, v, out=hi)
    np.clip(out, lo, hi, out=out)
    return ParameterVector(out, fingerprint)


def cloud_aggregate_per_edge(edge_models: Sequence[WeightedModel]) -> list[ParameterVector]:
    """Leave-one-out cloud models: entry ``e`` averages every edge except ``e``."""
    if len(edge_models) < 2:
        raise ConfigurationError(
            "leave-one-out cloud aggregation needs at least two edges; use only_edge for one edge"
        )
    return [
        weighted_average([m for k, m in enumerate(edge_models) if k != e])
        for e in range(len(edge_models))
    ]


def compute_alpha(acc_edge: float, acc_cloud: float) -> float:
    """Share of the edge model in the mixture: ``acc_edge / (acc_edge + acc_cloud)``.

    Both accuracies zero gives 0.5.
    """
    for name, v in (("acc_edge", acc_edge), ("acc_cloud", acc_cloud)):
        if not 0.0 <= v <= 1.0:
            raise InputError(f"{name} must lie in [0, 1], got {v}")
    if acc_edge == 0.0 and acc_cloud == 0.0:
        return 0.5
    return acc_edge / (acc_edge + acc_cloud)


def personalize(eam: ParameterVector, cam: ParameterVector, alpha: float) -> ParameterVector:
    """``alpha * eam + (1 - alpha) * cam``; the endpoints return the inputs unchanged."""
    if eam.spec_fingerprint != cam.spec_fingerprint:
        raise AggregationError("edge and cloud models belong to different specs")
    if not 0.0 <= alpha <= 1.0:
        raise InputError(f"alpha must lie in [0, 1], got {alpha}")
    if alpha == 1.0:
        return eam
    if alpha == 0.0:
        return cam
    return ParameterVector(cam.values + alpha * (eam.values - cam.values), eam.spec_fingerprint)


def global_aggregate(edge_models: Sequence[WeightedModel]) -> ParameterVector:
    return weighted_average(edge_models)
