"""Fixed 20-layer backbone, search spaces, and architecture encoding.

The macro-structure is four resolution stages over 20 learnable layers
(56^2x64 for layers 1-4, 28^2x160 for 5-8, 14^2x320 for 9-16, 7^2x640 for
17-20); the first layer of each stage strides by 2 and changes the channel
count.  A 3x3 stride-2 stem to 16 channels precedes layer 1 and a 1x1 tail
to 1024 channels plus classifier follows layer 20; both are informational
only and take no part in cost scoring.

Layer indices are 1-based everywhere in the public API, matching the CSV and
JSON file formats.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from fractions import Fraction

from .errors import IndexOutOfRangeError, LengthMismatchError, ParseError
from .ops import LayerContext, OperatorSpec, pool_by_id

STEM = {"kernel": 3, "stride": 2, "c_out": 16, "input_resolution": 224}
TAIL = {"kernel": 1, "c_out": 1024, "classifier": True}

# (output h/w, output channels, number of layers) per resolution stage
STAGE_SHAPES = ((56, 64, 4), (28, 160, 4), (14, 320, 8), (7, 640, 4))


@dataclass(frozen=True)
class Backbone:
    contexts: tuple[LayerContext, ...]
    stem: dict = field(default_factory=lambda: dict(STEM))
    tail: dict = field(default_factory=lambda: dict(TAIL))

    @property
    def n_layers(self) -> int:
        return len(self.contexts)

    def context(self, layer: int) -> LayerContext:
        """Context of a 1-based layer index."""
        if not 1 <= layer <= self.n_layers:
            raise IndexOutOfRangeError(layer, layer, self.n_layers)
        return self.contexts[layer - 1]

    def stage_of(self, layer: int) -> int:
        """Resolution stage (1-based); a new stage starts at each stride-2 layer."""
        stage = 0
        for i in range(layer):
            if self.contexts[i].stride == 2 or i == 0:
                stage += 1
        return stage


def default_backbone() -> Backbone:
    contexts = []
    c = STEM["c_out"]
    for h_out, c_out, n in STAGE_SHAPES:
        contexts.append(LayerContext(h_in=h_out * 2, w_in=h_out * 2,
                                     c_in=c, c_out=c_out, stride=2))
        for _ in range(n - 1):
            contexts.append(LayerContext(h_in=h_out, w_in=h_out,
                                         c_in=c_out, c_out=c_out, stride=1))
        c = c_out
    return Backbone(contexts=tuple(contexts))


@dataclass(frozen=True)
class Architecture:
    """One candidate-index choice per learnable layer."""

    choices: tuple[int, ...]


@dataclass(frozen=True)
class SearchSpace:
    """Per-layer ordered candidate lists plus generation provenance.

    Candidate lists are rank-ordered by generation score; a layer's exploring
    operator, when present, is the last entry and also named in ``exploring``.
    """

    backbone: Backbone
    candidates: tuple[tuple[OperatorSpec, ...], ...]
    exploring: tuple[str | None, ...]
    hardware: str = ""
    alpha: float = 1.0
    p: int = 4

    def __post_init__(self):
        if len(self.candidates) != self.backbone.n_layers:
            raise LengthMismatchError(
                f"{len(self.candidates)} candidate lists for "
                f"{self.backbone.n_layers} layers"
            )
        for i, cands in enumerate(self.candidates):
            if not cands:
                raise ValueError(f"layer {i + 1} has no candidates")
            ids = [op.id for op in cands]
            if len(set(ids)) != len(ids):
                raise ValueError(f"layer {i + 1} has duplicate candidates")

    @property
    def n_layers(self) -> int:
        return self.backbone.n_layers

    @property
    def explore_layers(self) -> tuple[int, ...]:
        return tuple(i + 1 for i, x in enumerate(self.exploring) if x is not None)

    def layer_candidates(self, layer: int) -> tuple[OperatorSpec, ...]:
        return self.candidates[layer - 1]

    def arch_ids(self, arch: Architecture) -> tuple[str, ...]:
        validate_architecture(self, arch)
        return tuple(self.candidates[i][c].id for i, c in enumerate(arch.choices))

    def arch_from_ids(self, ids) -> Architecture:
        ids = tuple(ids)
        if len(ids) != self.n_layers:
            raise LengthMismatchError(
                f"{len(ids)} choices for {self.n_layers} layers"
            )
        choices = []
        for i, op_id in enumerate(ids):
            layer_ids = [op.id for op in self.candidates[i]]
            if op_id not in layer_ids:
                raise ParseError(f"layer {i + 1}: operator {op_id!r} not a candidate")
            choices.append(layer_ids.index(op_id))
        return Architecture(tuple(choices))

    def chosen_ops(self, arch: Architecture) -> tuple[OperatorSpec, ...]:
        validate_architecture(self, arch)
        return tuple(self.candidates[i][c] for i, c in enumerate(arch.choices))


def validate_architecture(space: SearchSpace, arch: Architecture) -> None:
    if len(arch.choices) != space.n_layers:
        raise LengthMismatchError(
            f"architecture has {len(arch.choices)} choices, "
            f"space has {space.n_layers} layers"
        )
    for i, c in enumerate(arch.choices):
        if not 0 <= c < len(space.candidates[i]):
            raise IndexOutOfRangeError(i + 1, c, len(space.candidates[i]))


def space_size(space: SearchSpace) -> int:
    """Exact number of architectures (arbitrary-precision product)."""
    size = 1
    for cands in space.candidates:
        size *= len(cands)
    return size


def reduction_factor(space: SearchSpace, t: int) -> Fraction:
    """Search-space shrink from two-stage grouping at boundary t.

    Stage 1 frees layers t+1..n, stage 2 frees layers 1..t; the factor is
    full size over the sum of the two sub-space sizes.  t=0 rolls back to a
    single full search, so no reduction (factor 1).
    """
    n = space.n_layers
    if not 0 <= t <= n:
        raise ValueError(f"t must be in [0, {n}], got {t}")
    if t == 0:
        return Fraction(1)
    stage1 = 1
    for cands in space.candidates[t:]:
        stage1 *= len(cands)
    stage2 = 1
    for cands in space.candidates[:t]:
        stage2 *= len(cands)
    return Fraction(space_size(space), stage1 + stage2)


def _context_obj(ctx: LayerContext) -> dict:
    return {"h_in": ctx.h_in, "w_in": ctx.w_in, "c_in": ctx.c_in,
            "c_out": ctx.c_out, "stride": ctx.stride}


def space_to_obj(space: SearchSpace) -> dict:
    layers = []
    for i in range(space.n_layers):
        layers.append({
            "index": i + 1,
            "stage": space.backbone.stage_of(i + 1),
            "context": _context_obj(space.backbone.contexts[i]),
            "candidates": [op.id for op in space.candidates[i]],
            "exploring": space.exploring[i],
        })
    return {"hardware": space.hardware, "alpha": space.alpha, "p": space.p,
            "layers": layers}


def space_from_obj(obj: dict) -> SearchSpace:
    pool = pool_by_id()
    contexts = []
    candidates = []
    exploring = []
    for layer in obj["layers"]:
        c = layer["context"]
        contexts.append(LayerContext(h_in=c["h_in"], w_in=c["w_in"],
                                     c_in=c["c_in"], c_out=c["c_out"],
                                     stride=c["stride"]))
        try:
            candidates.append(tuple(pool[op_id] for op_id in layer["candidates"]))
        except KeyError as exc:
            raise ParseError(f"unknown operator id {exc.args[0]!r}") from None
        exploring.append(layer.get("exploring"))
    return SearchSpace(
        backbone=Backbone(contexts=tuple(contexts)),
        candidates=tuple(candidates),
        exploring=tuple(exploring),
        hardware=obj.get("hardware", ""),
        alpha=obj.get("alpha", 1.0),
        p=obj.get("p", 4),
    )


def space_hash(space: SearchSpace) -> str:
    payload = json.dumps(space_to_obj(space), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(payload.encode()).hexdigest()


def arch_to_obj(space: SearchSpace, arch: Architecture) -> dict:
    return {"space_hash": space_hash(space), "choices": list(space.arch_ids(arch))}


def arch_from_obj(space: SearchSpace, obj: dict) -> Architecture:
    # choices are operator ids, so files survive re-ranked spaces; the stored
    # space_hash is provenance only
    return space.arch_from_ids(obj["choices"])
