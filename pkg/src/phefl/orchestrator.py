"""Round loop for PHE-FL and the EdgeCloud / OnlyEdge baselines."""

from __future__ import annotations

import hashlib
import time
from concurrent.futures import Executor, ProcessPoolExecutor
from dataclasses import dataclass, field, fields
from enum import Enum
from typing import Callable, Optional

import numpy as np

from . import aggregation as agg
from .data import balance_pool, generate_synthetic, load_idx, resolve_idx_paths
from .exceptions import ConfigurationError
from .model import Dataset, ModelSpec, ParameterVector, evaluate_accuracy, init_params, train_local
from .partition import SCENARIOS, TEST_MODES, EdgeTestSets, PartitionPlan, build_edge_test_sets, partition_train


class Strategy(str, Enum):
    PHE_FL = "phe_fl"
    EDGE_CLOUD = "edge_cloud"
    ONLY_EDGE = "only_edge"


def derive_seed(master_seed: int, role: str, *indices: int) -> int:
    """Stable 64-bit seed from a master seed, a role tag and integer indices."""
    key = "|".join([str(int(master_seed)), role, *(str(int(i)) for i in indices)])
    return int.from_bytes(hashlib.blake2b(key.encode(), digest_size=8).digest(), "big")


@dataclass(frozen=True)
class ExperimentConfig:
    scenario: str
    strategy: Strategy
    rounds: int
    forced_alpha: Optional[float] = None
    epochs: int = 5
    batch_size: int = 32
    lr: float = 0.1
    num_edges: int = 10
    devices_per_edge: int = 10
    num_classes: int = 10
    samples_per_device: int = 50
    edge_aggregation_frequency: int = 1
    test_mode: str = "imbalanced"
    ptd_fraction: float = 0.15
    hidden_dims: tuple[int, ...] = (64,)
    seed: int = 0
    data_source: str = "synthetic"
    synthetic_dim: int = 16
    synthetic_separation: float = 6.0
    synthetic_test_per_label: int = 100
    idx_paths: Optional[dict] = None

    def __post_init__(self):
        object.__setattr__(self, "strategy", Strategy(self.strategy))
        object.__setattr__(self, "hidden_dims", tuple(int(h) for h in self.hidden_dims))
        self.validate()

    def validate(self):
        def bad(key, msg):
            raise ConfigurationError(f"{key}: {msg}")

        if self.scenario not in SCENARIOS:
            bad("scenario", f"expected one of {SCENARIOS}, got {self.scenario!r}")
        if self.test_mode not in TEST_MODES:
            bad("test_mode", f"expected one of {TEST_MODES}, got {self.test_mode!r}")
        if self.data_source not in ("synthetic", "idx"):
            bad("data_source", f"expected 'synthetic' or 'idx', got {self.data_source!r}")
        for key in ("rounds",):
            if getattr(self, key) < 0:
                bad(key, "must be >= 0")
        for key in ("epochs", "batch_size", "num_edges", "devices_per_edge", "samples_per_device",
                    "edge_aggregation_frequency", "synthetic_dim", "synthetic_test_per_label"):
            if getattr(self, key) < 1:
                bad(key, "must be >= 1")
        if self.num_classes < 2:
            bad("num_classes", "must be >= 2")
        if not self.lr > 0:
            bad("lr", "must be positive")
        if not 0.0 < self.ptd_fraction < 1.0:
            bad("ptd_fraction", "must lie in (0, 1)")
        if self.forced_alpha is not None:
            if self.strategy is not Strategy.PHE_FL:
                bad("forced_alpha", "only valid with strategy phe_fl")
            if not 0.0 <= self.forced_alpha <= 1.0:
                bad("forced_alpha", "must lie in [0, 1]")
        if self.strategy is Strategy.PHE_FL and self.num_edges < 2:
            bad("num_edges", "phe_fl needs at least two edges for leave-one-out aggregation")
        # raises on scenario/size combinations that cannot be realised
        PartitionPlan.build(self.scenario, self.num_edges, self.devices_per_edge,
                            self.num_classes, self.samples_per_device)

    def replace(self, **changes) -> "ExperimentConfig":
        values = {f.name: getattr(self, f.name) for f in fields(self)}
        values.update(changes)
        return ExperimentConfig(**values)



@dataclass(frozen=True)
class RoundRecord:
    round: int
    edge_accuracies: tuple[float, ...]
    alphas: tuple[agg.AlphaRecord, ...] = ()
    aggregated: bool = True
    wall_time: float = field(default=0.0, compare=False)

    @property
    def mean_accuracy(self) -> float:
        return float(np.mean(self.edge_accuracies))


RoundLog = list


@dataclass
class World:
    """Everything fixed for the life of one experiment."""

    spec: ModelSpec
    plan: PartitionPlan
    shards: list[list[Dataset]]
    tests: EdgeTestSets

    @property
    def device_weights(self) -> list[list[int]]:
        return [[len(d) for d in edge] for edge in self.shards]


@dataclass
class RoundState:
    round: int
    device_params: list[list[ParameterVector]]


def build_world(config: ExperimentConfig) -> World:
    plan = PartitionPlan.build(config.scenario, config.num_edges, config.devices_per_edge,
                               config.num_classes, config.samples_per_device)
    if config.data_source == "synthetic":
        train_per_label = int(plan.label_demand().max())
        train_pool, test_pool = generate_synthetic(
            config.num_classes,
            (train_per_label, config.synthetic_test_per_label),
            config.synthetic_dim,
            config.synthetic_separation,
            derive_seed(config.seed, "synthetic-data"),
        )
    else:
        paths = resolve_idx_paths(config.idx_paths)
        train_pool = load_idx(paths["train_images"], paths["train_labels"])
        test_pool = balance_pool(load_idx(paths["test_images"], paths["test_labels"]), config.num_classes)
    spec = ModelSpec(train_pool.dim, config.hidden_dims, config.num_classes)
    shards = partition_train(train_pool, plan, derive_seed(config.seed, "partition"))
    tests = build_edge_test_sets(test_pool, plan, config.test_mode, config.ptd_fraction,
                                 derive_seed(config.seed, "ptd-split"))
    return World(spec, plan, shards, tests)


def initial_state(config: ExperimentConfig, world: World) -> RoundState:
    gm0 = init_params(world.spec, derive_seed(config.seed, "init"))
    return RoundState(0, [[gm0] * config.devices_per_edge for _ in range(config.num_edges)])


def _train_job(job):
    return train_local(*job)


def _edge_models(world: World, device_params) -> list[agg.WeightedModel]:
    out = []
    for params, weights in zip(device_params, world.device_weights):
        eam = agg.weighted_average([agg.WeightedModel(p, w) for p, w in zip(params, weights)])
        out.append(agg.WeightedModel(eam, sum(weights)))
    return out


def run_round(state: RoundState, config: ExperimentConfig, world: World,
              executor: Optional[Executor] = None) -> tuple[RoundState, RoundRecord]:
    """Train every device, aggregate per the strategy, evaluate each edge on its ETD."""
    start = time.perf_counter()
    t = state.round + 1
    spec = world.spec
    jobs = [
        (spec, params, world.shards[k][c], config.epochs, config.batch_size, config.lr,
         derive_seed(config.seed, "device-train", t, k, c))
        for k, edge in enumerate(state.device_params)
        for c, params in enumerate(edge)
    ]
    results = list(executor.map(_train_job, jobs)) if executor else [_train_job(j) for j in jobs]
    dpe = config.devices_per_edge
    trained = [results[k * dpe:(k + 1) * dpe] for k in range(config.num_edges)]

    edge_models = _edge_models(world, trained)
    alphas = []
    if t % config.edge_aggregation_frequency:
        # off-cycle round: devices keep their own weights, edges are scored on the average
        distributed = [m.params for m in edge_models]
        next_params = trained
        aggregated = False
    else:
        aggregated = True
        if config.strategy is Strategy.ONLY_EDGE:
            distributed = [m.params for m in edge_models]
        elif config.strategy is Strategy.EDGE_CLOUD:
            gm = agg.global_aggregate(edge_models)
            distributed = [gm] * config.num_edges
        else:
            cams = agg.cloud_aggregate_per_edge(edge_models)
            distributed = []
            for k, (em, cam) in enumerate(zip(edge_models, cams)):
                ptd = world.tests.ptd[k]
                acc_edge = evaluate_accuracy(spec, em.params, ptd)
                acc_cloud = evaluate_accuracy(spec, cam, ptd)
                if config.forced_alpha is None:
                    alpha = agg.compute_alpha(acc_edge, acc_cloud)
                else:
                    alpha = float(config.forced_alpha)
                alphas.append(agg.AlphaRecord(k, acc_edge, acc_cloud, alpha, t,
                                              forced=config.forced_alpha is not None))
                distributed.append(agg.personalize(em.params, cam, alpha))
        next_params = [[p] * dpe for p in distributed]

    accs = tuple(evaluate_accuracy(spec, p, etd) for p, etd in zip(distributed, world.tests.etd))
    record = RoundRecord(t, accs, tuple(alphas), aggregated, time.perf_counter() - start)
    return RoundState(t, next_params), record


def run_experiment(config: ExperimentConfig, workers: int = 1,
                   on_round: Optional[Callable[[RoundRecord], None]] = None) -> RoundLog:
    """Build the world from ``config`` and run ``config.rounds`` rounds.

    ``workers`` only changes where device training runs; results are
    collected and aggregated in fixed device order either way.
    """
    world = build_world(config)
    state = initial_state(config, world)
    log: RoundLog = []
    if config.rounds == 0:
        return log
    executor = ProcessPoolExecutor(workers) if workers > 1 else None
    try:
        for _ in range(config.rounds):
            state, record = run_round(state, config, world, executor)
            log.append(record)
            if on_round is not None:
                on_round(record)
    finally:
        if executor is not None:
            executor.shutdown()
    return log
