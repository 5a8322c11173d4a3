"""Hardware-specialized search-space generation.

Each of the 32 pool operators gets a per-layer deployment score::

    score = (flops * params) ** alpha / latency_ms

i.e. a capacity proxy over measured cost.  A layer keeps its top-p operators
by score.  Layers flagged for exploration (by default the last four, where
feature maps are smallest) additionally receive one exploring operator: the
highest-capacity (flops * params) operator not already selected whose latency
stays within ``explore_latency_cap_ratio`` times the slowest selected one.
If nothing qualifies the layer keeps p candidates.

All ties break on ascending operator id so generation is reproducible.
"""

from __future__ import annotations

from dataclasses import dataclass

from .backbone import Backbone, SearchSpace
from .errors import MissingLatencyError
from .ops import LayerContext, OperatorSpec, op_cost
from .profiles import LatencyTable, coverage_check


@dataclass(frozen=True)
class SpaceGenConfig:
    alpha: float = 1.0
    p: int = 4
    explore_last: int = 4
    explore_latency_cap_ratio: float = 2.0

    def __post_init__(self):
        if self.alpha < 0:
            raise ValueError("alpha must be non-negative")
        if self.p < 1:
            raise ValueError("p must be at least 1")
        if self.explore_last < 0:
            raise ValueError("explore_last must be non-negative")

    def explore_layers(self, n_layers: int) -> frozenset[int]:
        return frozenset(range(n_layers - self.explore_last + 1, n_layers + 1))


def score(op: OperatorSpec, layer: int, table: LatencyTable,
          ctx: LayerContext, alpha: float) -> float:
    cost = op_cost(op, ctx)
    capacity = cost.flops * cost.params
    if capacity <= 0:
        raise ValueError(f"{op.id}: flops*params must be positive to score")
    return capacity ** alpha / table.latency(layer, op.id)


def rank_layer(layer: int, pool: list[OperatorSpec], table: LatencyTable,
               ctx: LayerContext, alpha: float) -> list[OperatorSpec]:
    """All pool operators by descending score; equal scores order by id."""
    return sorted(pool, key=lambda op: (-score(op, layer, table, ctx, alpha), op.id))


def _exploring_operator(layer: int, ctx: LayerContext, pool: list[OperatorSpec],
                        selected: list[OperatorSpec], table: LatencyTable,
                        cap_ratio: float) -> OperatorSpec | None:
    cap = cap_ratio * max(table.latency(layer, op.id) for op in selected)
    chosen_ids = {op.id for op in selected}
    best = None
    best_capacity = -1
    for op in pool:
        if op.id in chosen_ids:
            continue
        if table.latency(layer, op.id) > cap:
            continue
        cost = op_cost(op, ctx)
        capacity = cost.flops * cost.params
        if capacity > best_capacity or (capacity == best_capacity and op.id < best.id):
            best, best_capacity = op, capacity
    return best


def generate_space(backbone: Backbone, pool: list[OperatorSpec],
                   table: LatencyTable, cfg: SpaceGenConfig = SpaceGenConfig()
                   ) -> SearchSpace:
    missing = coverage_check(table, backbone, pool)
    if missing:
        raise MissingLatencyError(*missing[0])
    explore = cfg.explore_layers(backbone.n_layers)
    candidates = []
    exploring = []
    for layer in range(1, backbone.n_layers + 1):
        ctx = backbone.context(layer)
        ranked = rank_layer(layer, pool, table, ctx, cfg.alpha)
        top = ranked[:cfg.p]
        extra = None
        if layer in explore:
            extra = _exploring_operator(layer, ctx, pool, top, table,
                                        cfg.explore_latency_cap_ratio)
        candidates.append(tuple(top) + ((extra,) if extra else ()))
        exploring.append(extra.id if extra else None)
    return SearchSpace(
        backbone=backbone,
        candidates=tuple(candidates),
        exploring=tuple(exploring),
        hardware=table.hardware,
        alpha=cfg.alpha,
        p=cfg.p,
    )
