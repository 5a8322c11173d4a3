"""Per-(layer, operator) latency tables: CSV ingestion and synthetic profiles.

A latency table maps every (layer index, operator id) pair to milliseconds
for one hardware target.  Real measurements arrive as CSV with the header
``hardware,layer,operator,latency_ms``; the synthetic generators below mimic
the qualitative behavior of three mobile platforms so the full pipeline can
run and be verified without devices:

* DSP -- compute-bound; small kernels are heavily optimized (cost penalty
  grows steeply with kernel size), SE is nearly free.
* VPU -- SE falls off the accelerator onto slow scalar execution (large
  multiplicative penalty); big kernels run as efficiently as small ones.
* CPU -- memory traffic dominates for everything except the shuffle-based
  Choice/ChoiceX blocks, whose split/concat pattern the platform handles
  well, making Choice_3 the cheapest operator at early layers.

Synthetic latency for operator ``op`` at layer ``l``::

    base_ms * (w_flops * flops + w_mem * mem_bytes)
            * kernel_penalty[k] * se_penalty(op) * (1 + jitter)

with jitter drawn deterministically from (seed, hardware, layer, op) in
[-amplitude, +amplitude].  Same inputs always give a bit-identical table.
"""

from __future__ import annotations

import hashlib
import math
import os
from dataclasses import dataclass, field
from enum import Enum

from .backbone import Backbone
from .errors import (
    DuplicateKeyError,
    MissingLatencyError,
    NonPositiveLatencyError,
    ParseError,
)
from .ops import OperatorSpec, op_cost

CSV_HEADER = "hardware,layer,operator,latency_ms"


class HardwareKind(str, Enum):
    DSP = "dsp"
    CPU = "cpu"
    VPU = "vpu"


@dataclass(frozen=True)
class CostRules:
    """Deterministic synthetic cost rule set for one hardware target."""

    base_ms: float
    w_flops: float
    w_mem: float
    kernel_penalty: tuple[float, float, float]  # factors for k = 3, 5, 7
    se_penalty: float
    w_mem_choice: float | None = None  # Choice/ChoiceX override, defaults to w_mem
    jitter_amplitude: float = 0.03


# base_ms scales pick millisecond magnitudes under which the reference
# constraints (17 ms DSP, 310 ms CPU, 36 ms VPU) bind but stay feasible for
# the default generated spaces
RULES: dict[HardwareKind, CostRules] = {
    # int8-like accelerator: flops-bound, steep kernel-size penalty
    HardwareKind.DSP: CostRules(
        base_ms=5.1e-9, w_flops=1.0, w_mem=0.05,
        kernel_penalty=(1.0, 3.0, 6.0), se_penalty=1.1,
    ),
    # single big-core float32: memory-bound except for shuffle units
    HardwareKind.CPU: CostRules(
        base_ms=5.3e-8, w_flops=1.0, w_mem=1.5, w_mem_choice=0.25,
        kernel_penalty=(1.0, 1.15, 1.3), se_penalty=1.3,
    ),
    # vision accelerator: kernel-size agnostic, SE unsupported natively
    HardwareKind.VPU: CostRules(
        base_ms=9.6e-9, w_flops=1.0, w_mem=0.3,
        kernel_penalty=(1.0, 1.0, 1.0), se_penalty=15.0,
    ),
}

REFERENCE_CONSTRAINTS_MS: dict[HardwareKind, float] = {
    HardwareKind.DSP: 17.0,
    HardwareKind.CPU: 310.0,
    HardwareKind.VPU: 36.0,
}


@dataclass(frozen=True)
class LatencyTable:
    hardware: str
    entries: dict[tuple[int, str], float]
    meta: dict = field(default_factory=dict)

    def latency(self, layer: int, op_id: str) -> float:
        try:
            return self.entries[(layer, op_id)]
        except KeyError:
            raise MissingLatencyError(layer, op_id) from None


def _unit(*parts) -> float:
    """Deterministic hash of parts to [0, 1)."""
    key = "|".join(str(p) for p in parts).encode()
    digest = hashlib.blake2b(key, digest_size=8).digest()
    return int.from_bytes(digest, "big") / 2.0**64


def synth_profile(kind: HardwareKind | CostRules, backbone: Backbone,
                  pool: list[OperatorSpec], seed: int,
                  hardware: str | None = None) -> LatencyTable:
    """Generate a full synthetic latency table, reproducible from seed."""
    if isinstance(kind, HardwareKind):
        rules = RULES[kind]
        hardware = hardware or kind.value
    else:
        rules = kind
        hardware = hardware or "custom"
    kpen = dict(zip((3, 5, 7), rules.kernel_penalty))
    entries = {}
    for layer in range(1, backbone.n_layers + 1):
        ctx = backbone.context(layer)
        for op in pool:
            cost = op_cost(op, ctx)
            w_mem = rules.w_mem
            if rules.w_mem_choice is not None and op.family.value.startswith("Choice"):
                w_mem = rules.w_mem_choice
            ms = rules.base_ms * (rules.w_flops * cost.flops + w_mem * cost.mem_bytes)
            ms *= kpen[op.kernel]
            if op.se:
                ms *= rules.se_penalty
            jitter = (2.0 * _unit(seed, hardware, layer, op.id) - 1.0)
            ms *= 1.0 + rules.jitter_amplitude * jitter
            entries[(layer, op.id)] = ms
    return LatencyTable(hardware=hardware, entries=entries,
                        meta={"source": "synthetic", "seed": seed})


def coverage_check(table: LatencyTable, backbone: Backbone,
                   pool: list[OperatorSpec]) -> list[tuple[int, str]]:
    """Every (layer, operator) pair absent from the table, sorted."""
    missing = []
    for layer in range(1, backbone.n_layers + 1):
        for op in pool:
            if (layer, op.id) not in table.entries:
                missing.append((layer, op.id))
    return missing


def save_latency_table(table: LatencyTable, path) -> None:
    lines = [CSV_HEADER]
    for (layer, op_id), ms in sorted(table.entries.items()):
        lines.append(f"{table.hardware},{layer},{op_id},{ms!r}")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def load_latency_table(path) -> LatencyTable:
    with open(path, encoding="utf-8") as fh:
        raw = fh.read().splitlines()
    if not raw or raw[0].strip() != CSV_HEADER:
        raise ParseError(f"expected header {CSV_HEADER!r}", line=1)
    hardware = None
    entries: dict[tuple[int, str], float] = {}
    for lineno, line in enumerate(raw[1:], start=2):
        if not line.strip():
            continue
        parts = line.split(",")
        if len(parts) != 4:
            raise ParseError(f"expected 4 fields, got {len(parts)}", line=lineno)
        hw, layer_s, op_id, ms_s = (p.strip() for p in parts)
        if hardware is None:
            hardware = hw
        elif hw != hardware:
            raise ParseError(
                f"mixed hardware ids {hardware!r} and {hw!r}", line=lineno)
        try:
            layer = int(layer_s)
            ms = float(ms_s)
        except ValueError:
            raise ParseError(f"malformed row {line!r}", line=lineno) from None
        if not math.isfinite(ms) or ms <= 0:
            raise NonPositiveLatencyError(
                f"line {lineno}: latency must be positive and finite, got {ms_s}")
        key = (layer, op_id)
        if key in entries:
            raise DuplicateKeyError(f"line {lineno}: duplicate entry for {key}")
        entries[key] = ms
    if hardware is None:
        raise ParseError("table has no rows")
    return LatencyTable(hardware=hardware, entries=entries,
                        meta={"source": "measured", "path": os.fspath(path)})
