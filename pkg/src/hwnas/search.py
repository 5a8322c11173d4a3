"""Constrained evolutionary search and the two-stage layer-group schedule.

A latency constraint is enforced by rejection: uniform per-layer sampling,
crossover, and mutation all retry until the candidate's predicted latency
fits under the bound.  Evaluator calls are memoized by choices, so duplicate
architectures never consume evaluation budget.

Two-stage mode splits the layers at boundary ``t``: stage 1 searches layers
t+1..n with the earlier layers pinned to their rank-1 operators, stage 2
searches layers 1..t with the later layers pinned to the stage-1 winner.
``t=0`` degenerates to a single full-space search.  By default each stage
gets the full configured budget; with ``split`` one budget is divided across
stages proportionally to the log of each stage's sub-space size.

Determinism: all randomness flows from the config seed, and ranking ties
break on lexicographic choices, so reports are identical regardless of how
evaluations are parallelized.
"""

from __future__ import annotations

import math
import random
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

from .backbone import (
    Architecture,
    SearchSpace,
    space_size,
    validate_architecture,
)
from .errors import EvaluatorFailureError, InfeasibleConstraintError
from .evaluators import Evaluator


@dataclass(frozen=True)
class EvolutionConfig:
    population: int = 50
    iterations: int = 20
    parents_topk: int = 10
    n_crossover: int = 25
    n_mutation: int = 25
    mutation_prob: float = 0.1
    max_sample_attempts: int = 1000
    seed: int = 0

    def __post_init__(self):
        if self.population < 1 or self.iterations < 1:
            raise ValueError("population and iterations must be positive")
        if self.n_crossover + self.n_mutation > self.population:
            raise ValueError("n_crossover + n_mutation must not exceed population")
        if not 0 <= self.mutation_prob <= 1:
            raise ValueError("mutation_prob must be in [0, 1]")

    @property
    def budget(self) -> int:
        return self.population * self.iterations


@dataclass
class SearchRequest:
    space: SearchSpace
    tau_c: float
    latency_fn: object                 # callable(space, arch) -> ms
    evaluator: Evaluator
    latency_label: str = "additive"
    two_stage: bool = False
    t: int = 8
    split: bool = False
    audit_fn: object = None            # optional second latency_fn for audit

    def __post_init__(self):
        if self.tau_c <= 0:
            raise ValueError("tau_c must be positive")
        if not 0 <= self.t <= self.space.n_layers:
            raise ValueError(f"t must be in [0, {self.space.n_layers}]")


@dataclass
class SearchReport:
    best: Architecture
    best_ids: tuple[str, ...]
    best_accuracy: float
    best_latency: float
    tau_c: float
    evaluations_used: int
    history: list[dict] = field(default_factory=list)
    stages: list[dict] = field(default_factory=list)
    best_latency_audit: float | None = None
    latency_label: str = "additive"
    seed: int = 0


def init_winning(space: SearchSpace) -> Architecture:
    """Rank-1 operator at every layer (candidate lists are score-ordered)."""
    return Architecture((0,) * space.n_layers)


def restrict_space(space: SearchSpace, active, winner: Architecture) -> SearchSpace:
    """Pin non-active layers to the winner's choices; active keep full lists."""
    validate_architecture(space, winner)
    active = set(active)
    candidates = []
    exploring = []
    for i in range(space.n_layers):
        if i + 1 in active:
            candidates.append(space.candidates[i])
            exploring.append(space.exploring[i])
        else:
            candidates.append((space.candidates[i][winner.choices[i]],))
            exploring.append(None)
    return SearchSpace(
        backbone=space.backbone,
        candidates=tuple(candidates),
        exploring=tuple(exploring),
        hardware=space.hardware,
        alpha=space.alpha,
        p=space.p,
    )


def sample_uniform(space: SearchSpace, rng: random.Random) -> Architecture:
    return Architecture(tuple(
        rng.randrange(len(cands)) for cands in space.candidates))


def sample_constrained(space: SearchSpace, latency_fn, tau_c: float,
                       rng: random.Random,
                       max_attempts: int = 1000) -> Architecture:
    for _ in range(max_attempts):
        arch = sample_uniform(space, rng)
        if latency_fn(space, arch) <= tau_c:
            return arch
    raise InfeasibleConstraintError(
        f"no architecture under {tau_c} ms in {max_attempts} samples")


def _evaluate_population(population, evaluator, memo, threads):
    fresh = [a for a in dict.fromkeys(population) if a.choices not in memo]
    if threads > 1 and evaluator.concurrent_safe and len(fresh) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            for arch, acc in zip(fresh, pool.map(evaluator.evaluate, fresh)):
                memo[arch.choices] = acc
    else:
        for arch in fresh:
            memo[arch.choices] = evaluator.evaluate(arch)


def evolve(space: SearchSpace, evaluator: Evaluator, latency_fn,
           tau_c: float, cfg: EvolutionConfig, threads: int = 1,
           stage: int = 1) -> SearchReport:
    rng = random.Random(cfg.seed + stage - 1)
    evaluator.prepare(space)
    memo: dict[tuple[int, ...], float] = {}
    lat_cache: dict[tuple[int, ...], float] = {}

    def lat(arch: Architecture) -> float:
        if arch.choices not in lat_cache:
            lat_cache[arch.choices] = latency_fn(space, arch)
        return lat_cache[arch.choices]

    def fresh_sample() -> Architecture:
        for _ in range(cfg.max_sample_attempts):
            arch = sample_uniform(space, rng)
            if lat(arch) <= tau_c:
                return arch
        raise InfeasibleConstraintError(
            f"no architecture under {tau_c} ms in {cfg.max_sample_attempts} samples")

    def deduped(arch: Architecture, seen: set) -> Architecture:
        if arch.choices not in seen:
            return arch
        for _ in range(cfg.max_sample_attempts):
            arch = fresh_sample()
            if arch.choices not in seen:
                return arch
        return arch  # space exhausted; duplicates cost nothing (memoized)

    def feasible_child(make) -> Architecture:
        for _ in range(cfg.max_sample_attempts):
            child = make()
            if lat(child) <= tau_c:
                return child
        return fresh_sample()

    population: list[Architecture] = []
    seen: set[tuple[int, ...]] = set()
    for _ in range(cfg.population):
        arch = deduped(fresh_sample(), seen)
        seen.add(arch.choices)
        population.append(arch)

    best: Architecture | None = None
    best_acc = -math.inf
    history: list[dict] = []

    def partial_report() -> SearchReport:
        return _make_report(space, best, best_acc, lat, tau_c, memo, history,
                            [_stage_entry(stage, space, cfg, memo)], cfg.seed)

    for iteration in range(1, cfg.iterations + 1):
        try:
            _evaluate_population(population, evaluator, memo, threads)
        except EvaluatorFailureError:
            raise
        except Exception as exc:
            raise EvaluatorFailureError(
                f"evaluator failed at stage {stage} iteration {iteration}: {exc}",
                partial_report=partial_report() if best is not None else None,
            ) from exc
        accs = [memo[a.choices] for a in population]
        for arch in population:
            acc = memo[arch.choices]
            if acc > best_acc or (acc == best_acc and best is not None
                                  and arch.choices < best.choices):
                best, best_acc = arch, acc
        history.append({
            "stage": stage,
            "iteration": iteration,
            "best_accuracy": best_acc,
            "mean_accuracy": sum(accs) / len(accs),
            "best_latency": lat(best),
        })
        if iteration == cfg.iterations:
            break

        ranked = sorted(population, key=lambda a: (-memo[a.choices], a.choices))
        parents = ranked[:cfg.parents_topk]
        next_pop: list[Architecture] = []
        seen = set()

        def crossover() -> Architecture:
            pa, pb = rng.choice(parents), rng.choice(parents)
            return Architecture(tuple(
                (pa if rng.random() < 0.5 else pb).choices[i]
                for i in range(space.n_layers)))

        def mutation() -> Architecture:
            parent = rng.choice(parents)
            return Architecture(tuple(
                rng.randrange(len(space.candidates[i]))
                if rng.random() < cfg.mutation_prob else parent.choices[i]
                for i in range(space.n_layers)))

        for _ in range(cfg.n_crossover):
            child = deduped(feasible_child(crossover), seen)
            seen.add(child.choices)
            next_pop.append(child)
        for _ in range(cfg.n_mutation):
            child = deduped(feasible_child(mutation), seen)
            seen.add(child.choices)
            next_pop.append(child)
        while len(next_pop) < cfg.population:
            child = deduped(fresh_sample(), seen)
            seen.add(child.choices)
            next_pop.append(child)
        population = next_pop

    return _make_report(space, best, best_acc, lat, tau_c, memo, history,
                        [_stage_entry(stage, space, cfg, memo)], cfg.seed)


def _stage_entry(stage: int, space: SearchSpace, cfg: EvolutionConfig, memo) -> dict:
    return {
        "stage": stage,
        "space_size": space_size(space),
        "iterations": cfg.iterations,
        "population": cfg.population,
        "evaluations_used": len(memo),
    }


def _make_report(space, best, best_acc, lat, tau_c, memo, history, stages,
                 seed) -> SearchReport:
    best_ids = space.arch_ids(best)
    for entry in stages:
        entry["winner_choices"] = list(best_ids)
        entry["evaluations_used"] = len(memo)
    return SearchReport(
        best=best,
        best_ids=best_ids,
        best_accuracy=best_acc,
        best_latency=lat(best),
        tau_c=tau_c,
        evaluations_used=len(memo),
        history=history,
        stages=stages,
        seed=seed,
    )


def _split_config(cfg: EvolutionConfig, size1: int, size2: int
                  ) -> tuple[EvolutionConfig, EvolutionConfig]:
    """Divide one iteration budget across stages by log sub-space size."""
    log1, log2 = math.log(max(size1, 2)), math.log(max(size2, 2))
    iters1 = max(1, round(cfg.iterations * log1 / (log1 + log2)))
    iters1 = min(iters1, cfg.iterations - 1) if cfg.iterations > 1 else 1
    iters2 = max(1, cfg.iterations - iters1)
    return replace(cfg, iterations=iters1), replace(cfg, iterations=iters2)


def two_stage_search(request: SearchRequest, cfg: EvolutionConfig,
                     threads: int = 1) -> SearchReport:
    space = request.space
    n = space.n_layers
    t = request.t

    if not request.two_stage or t == 0:
        report = evolve(space, request.evaluator, request.latency_fn,
                        request.tau_c, cfg, threads=threads, stage=1)
        report.stages[0]["active_layers"] = [1, n]
        report.stages[0]["degenerate_single_stage"] = request.two_stage
        _attach_audit(report, request, space)
        return report

    active1 = range(t + 1, n + 1)
    active2 = range(1, t + 1)
    space1 = restrict_space(space, active1, init_winning(space))
    space2_size_preview = 1
    for i in range(t):
        space2_size_preview *= len(space.candidates[i])
    if request.split:
        cfg1, cfg2 = _split_config(cfg, space_size(space1), space2_size_preview)
    else:
        cfg1, cfg2 = cfg, cfg

    rep1 = evolve(space1, request.evaluator, request.latency_fn,
                  request.tau_c, cfg1, threads=threads, stage=1)
    win1 = space.arch_from_ids(rep1.best_ids)

    space2 = restrict_space(space, active2, win1)
    rep2 = evolve(space2, request.evaluator, request.latency_fn,
                  request.tau_c, cfg2, threads=threads, stage=2)
    win2 = space.arch_from_ids(rep2.best_ids)

    rep1.stages[0]["active_layers"] = [t + 1, n]
    rep2.stages[0]["active_layers"] = [1, t]
    report = SearchReport(
        best=win2,
        best_ids=rep2.best_ids,
        best_accuracy=rep2.best_accuracy,
        best_latency=rep2.best_latency,
        tau_c=request.tau_c,
        evaluations_used=rep1.evaluations_used + rep2.evaluations_used,
        history=rep1.history + rep2.history,
        stages=rep1.stages + rep2.stages,
        seed=cfg.seed,
    )
    _attach_audit(report, request, space)
    return report


def _attach_audit(report: SearchReport, request: SearchRequest,
                  space: SearchSpace) -> None:
    report.latency_label = request.latency_label
    if request.audit_fn is not None:
        best_full = space.arch_from_ids(report.best_ids)
        report.best_latency_audit = request.audit_fn(space, best_full)


def run_search(request: SearchRequest, cfg: EvolutionConfig,
               threads: int = 1) -> SearchReport:
    return two_stage_search(request, cfg, threads=threads)


def report_to_obj(report: SearchReport) -> dict:
    return {
        "constraint_ms": report.tau_c,
        "latency_fn": report.latency_label,
        "seed": report.seed,
        "best": {
            "choices": list(report.best_ids),
            "accuracy": report.best_accuracy,
            "latency_ms": report.best_latency,
            "latency_ms_additive_audit": report.best_latency_audit,
        },
        "evaluations_used": report.evaluations_used,
        "stages": report.stages,
        "history": report.history,
    }
