"""Hardware-aware neural architecture search over per-operator latency tables."""

from .backbone import (
    Architecture,
    Backbone,
    SearchSpace,
    default_backbone,
    reduction_factor,
    space_size,
    validate_architecture,
)
from .evaluators import Evaluator, FileOracle, SynthOracle, brute_force_best
from .latency import additive_latency, encode_features, fit_brr, fit_predictor, mape, predict
from .ops import LayerContext, OpCost, OperatorSpec, enumerate_pool, flops_of, memory_access_of, params_of
from .profiles import HardwareKind, LatencyTable, coverage_check, load_latency_table, synth_profile
from .search import (
    EvolutionConfig,
    SearchReport,
    SearchRequest,
    evolve,
    init_winning,
    restrict_space,
    run_search,
    sample_constrained,
    two_stage_search,
)
from .spacegen import SpaceGenConfig, generate_space, rank_layer, score

__version__ = "0.1.0"
