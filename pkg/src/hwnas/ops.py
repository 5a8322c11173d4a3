"""Candidate operator pool and analytic per-operator costs.

The pool holds 32 operators built from four block structures, each optionally
followed by a squeeze-and-excitation (SE) module:

* ``SEP_k``      -- depthwise-separable convolution applied twice:
                    [dw k x k, stride s, on c_in -> pw 1x1 c_in->c_out] then
                    [dw k x k, stride 1, on c_out -> pw 1x1 c_out->c_out].
* ``MB_k_e``     -- mobile inverted bottleneck: pw expand c_in -> e*c_in at
                    input resolution (skipped when e == 1) -> dw k x k stride
                    s -> pw project e*c_in -> c_out.
* ``Choice_k``   -- shuffle unit.  Stride 1: channel split c_in/2; active
                    branch pw(c_in/2 -> c_out/2) -> dw k stride 1 ->
                    pw(c_out/2 -> c_out/2); concat; channel shuffle.
                    Stride 2: no split; left branch dw k stride 2 +
                    pw(c_in -> c_out/2); right branch pw(c_in -> c_out/2) at
                    input resolution + dw k stride 2 + pw(c_out/2 -> c_out/2);
                    concat; shuffle.
* ``ChoiceX``    -- Choice topology whose active branch is three dw/pw pairs
                    with kernel fixed at 3: dw3(stride s)-pw-dw3-pw-dw3-pw.

SE uses reduction ratio 4 and is applied to the block's final output tensor
(c_out channels at output resolution): global pool (0 MACs), two
fully-connected layers (MACs and weights counted), and a per-element rescale
(one multiply per output element).

Cost conventions: FLOPs are multiply-adds; BN, biases, and activations count
0 FLOPs and 0 params.  Channel split/concat/shuffle count 0 FLOPs but their
tensor traffic is included in memory access.  Memory access sums, over every
stage, the elements read (inputs and weights) and written (outputs), times a
configurable bytes-per-element.

This module is the calculator side of the contract above; the test suite
carries an independent loop-based counter over the same compositions.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

from .errors import DegenerateGeometryError

KERNELS = (3, 5, 7)
EXPANSIONS = (1, 3, 6)
SE_REDUCTION = 4
DEFAULT_BYTES_PER_ELEMENT = 4


class Family(str, Enum):
    SEP = "SEP"
    MB = "MB"
    CHOICE = "Choice"
    CHOICE_X = "ChoiceX"


@dataclass(frozen=True)
class OperatorSpec:
    """One candidate operator: family, kernel, optional expansion, SE flag."""

    family: Family
    kernel: int
    expansion: int | None
    se: bool

    def __post_init__(self):
        if self.family is Family.CHOICE_X:
            if self.kernel != 3:
                raise ValueError("ChoiceX kernel is fixed at 3")
        elif self.kernel not in KERNELS:
            raise ValueError(f"kernel must be one of {KERNELS}, got {self.kernel}")
        if self.family is Family.MB:
            if self.expansion not in EXPANSIONS:
                raise ValueError(f"MB expansion must be one of {EXPANSIONS}")
        elif self.expansion is not None:
            raise ValueError(f"{self.family.value} takes no expansion ratio")

    @property
    def id(self) -> str:
        if self.family is Family.SEP:
            base = f"SEP_{self.kernel}"
        elif self.family is Family.MB:
            base = f"MB_{self.kernel}_{self.expansion}"
        elif self.family is Family.CHOICE:
            base = f"Choice_{self.kernel}"
        else:
            base = "ChoiceX"
        return base + "_SE" if self.se else base


@dataclass(frozen=True)
class LayerContext:
    """Spatial size, channel counts, and stride at one learnable layer."""

    h_in: int
    w_in: int
    c_in: int
    c_out: int
    stride: int

    def __post_init__(self):
        if self.stride not in (1, 2):
            raise ValueError(f"stride must be 1 or 2, got {self.stride}")
        if min(self.h_in, self.w_in, self.c_in, self.c_out) < 1:
            raise ValueError("feature map dimensions must be positive")
        if self.h_in % self.stride or self.w_in % self.stride:
            raise ValueError("h_in and w_in must be divisible by stride")

    @property
    def h_out(self) -> int:
        return self.h_in // self.stride

    @property
    def w_out(self) -> int:
        return self.w_in // self.stride


@dataclass(frozen=True)
class OpCost:
    flops: int
    params: int
    mem_bytes: int


def enumerate_pool() -> list[OperatorSpec]:
    """The 32-operator pool, ordered by (family, kernel, expansion, se)."""
    pool = []
    for k in KERNELS:
        for se in (False, True):
            pool.append(OperatorSpec(Family.SEP, k, None, se))
    for k in KERNELS:
        for e in EXPANSIONS:
            for se in (False, True):
                pool.append(OperatorSpec(Family.MB, k, e, se))
    for k in KERNELS:
        for se in (False, True):
            pool.append(OperatorSpec(Family.CHOICE, k, None, se))
    for se in (False, True):
        pool.append(OperatorSpec(Family.CHOICE_X, 3, None, se))
    return pool


def pool_by_id() -> dict[str, OperatorSpec]:
    return {op.id: op for op in enumerate_pool()}


class _Tally:
    """Accumulates MACs, weights, and element traffic across block stages."""

    def __init__(self):
        self.flops = 0
        self.params = 0
        self.elems = 0

    def conv(self, c_in, c_out, k, h_in, w_in, h_out, w_out, groups=1):
        weights = (c_in // groups) * k * k * c_out
        self.flops += weights * h_out * w_out
        self.params += weights
        self.elems += c_in * h_in * w_in + weights + c_out * h_out * w_out

    def move(self, reads, writes):
        # split/concat/shuffle/pool bookkeeping: traffic only, no arithmetic
        self.elems += sum(reads) + sum(writes)

    def se(self, c, h, w):
        mid = max(1, c // SE_REDUCTION)
        self.move([c * h * w], [c])                     # global average pool
        self.conv(c, mid, 1, 1, 1, 1, 1)                # FC reduce
        self.conv(mid, c, 1, 1, 1, 1, 1)                # FC expand
        self.flops += h * w * c                         # per-element rescale
        self.move([c * h * w, c], [c * h * w])


def _check_geometry(kernel: int, ctx: LayerContext) -> None:
    # convs use symmetric same-padding of (k-1)//2 per side; a kernel wider
    # than the padded input has no valid placement
    pad = (kernel - 1) // 2
    if kernel > ctx.h_in + 2 * pad or kernel > ctx.w_in + 2 * pad:
        raise DegenerateGeometryError(
            f"kernel {kernel} exceeds padded {ctx.h_in}x{ctx.w_in} input"
        )


def _require_even(op: OperatorSpec, ctx: LayerContext) -> None:
    if ctx.c_out % 2 or (ctx.stride == 1 and ctx.c_in % 2):
        raise ValueError(f"{op.id} splits channels in half; even channel counts required")


def _sep(t: _Tally, op: OperatorSpec, ctx: LayerContext) -> None:
    k, ho, wo = op.kernel, ctx.h_out, ctx.w_out
    t.conv(ctx.c_in, ctx.c_in, k, ctx.h_in, ctx.w_in, ho, wo, groups=ctx.c_in)
    t.conv(ctx.c_in, ctx.c_out, 1, ho, wo, ho, wo)
    t.conv(ctx.c_out, ctx.c_out, k, ho, wo, ho, wo, groups=ctx.c_out)
    t.conv(ctx.c_out, ctx.c_out, 1, ho, wo, ho, wo)


def _mb(t: _Tally, op: OperatorSpec, ctx: LayerContext) -> None:
    k, ho, wo = op.kernel, ctx.h_out, ctx.w_out
    mid = op.expansion * ctx.c_in
    if op.expansion > 1:
        t.conv(ctx.c_in, mid, 1, ctx.h_in, ctx.w_in, ctx.h_in, ctx.w_in)
    t.conv(mid, mid, k, ctx.h_in, ctx.w_in, ho, wo, groups=mid)
    t.conv(mid, ctx.c_out, 1, ho, wo, ho, wo)


def _merge(t: _Tally, left_c, right_c, ho, wo):
    merged = left_c + right_c
    t.move([left_c * ho * wo, right_c * ho * wo], [merged * ho * wo])  # concat
    t.move([merged * ho * wo], [merged * ho * wo])                     # shuffle


def _choice(t: _Tally, op: OperatorSpec, ctx: LayerContext) -> None:
    _require_even(op, ctx)
    k, ho, wo = op.kernel, ctx.h_out, ctx.w_out
    half_out = ctx.c_out // 2
    if ctx.stride == 1:
        half_in = ctx.c_in // 2
        h, w = ctx.h_in, ctx.w_in
        t.move([ctx.c_in * h * w], [half_in * h * w, half_in * h * w])
        t.conv(half_in, half_out, 1, h, w, h, w)
        t.conv(half_out, half_out, k, h, w, h, w, groups=half_out)
        t.conv(half_out, half_out, 1, h, w, h, w)
        _merge(t, half_in, half_out, ho, wo)
    else:
        t.conv(ctx.c_in, ctx.c_in, k, ctx.h_in, ctx.w_in, ho, wo, groups=ctx.c_in)
        t.conv(ctx.c_in, half_out, 1, ho, wo, ho, wo)
        t.conv(ctx.c_in, half_out, 1, ctx.h_in, ctx.w_in, ctx.h_in, ctx.w_in)
        t.conv(half_out, half_out, k, ctx.h_in, ctx.w_in, ho, wo, groups=half_out)
        t.conv(half_out, half_out, 1, ho, wo, ho, wo)
        _merge(t, half_out, half_out, ho, wo)


def _choice_x_branch(t: _Tally, c_in, c_out, h_in, w_in, ho, wo):
    # three dw3/pw pairs; the first dw carries the block stride
    c = c_in
    for i in range(3):
        hi, wi = (h_in, w_in) if i == 0 else (ho, wo)
        t.conv(c, c, 3, hi, wi, ho, wo, groups=c)
        t.conv(c, c_out, 1, ho, wo, ho, wo)
        c = c_out


def _choice_x(t: _Tally, op: OperatorSpec, ctx: LayerContext) -> None:
    _require_even(op, ctx)
    ho, wo = ctx.h_out, ctx.w_out
    half_out = ctx.c_out // 2
    if ctx.stride == 1:
        half_in = ctx.c_in // 2
        h, w = ctx.h_in, ctx.w_in
        t.move([ctx.c_in * h * w], [half_in * h * w, half_in * h * w])
        _choice_x_branch(t, half_in, half_out, h, w, ho, wo)
        _merge(t, half_in, half_out, ho, wo)
    else:
        t.conv(ctx.c_in, ctx.c_in, 3, ctx.h_in, ctx.w_in, ho, wo, groups=ctx.c_in)
        t.conv(ctx.c_in, half_out, 1, ho, wo, ho, wo)
        _choice_x_branch(t, ctx.c_in, half_out, ctx.h_in, ctx.w_in, ho, wo)
        _merge(t, half_out, half_out, ho, wo)


_BLOCKS = {
    Family.SEP: _sep,
    Family.MB: _mb,
    Family.CHOICE: _choice,
    Family.CHOICE_X: _choice_x,
}


def op_cost(op: OperatorSpec, ctx: LayerContext,
            bytes_per_element: int = DEFAULT_BYTES_PER_ELEMENT) -> OpCost:
    """Analytic FLOPs, parameter count, and memory traffic for op at ctx."""
    _check_geometry(op.kernel, ctx)
    t = _Tally()
    _BLOCKS[op.family](t, op, ctx)
    if op.se:
        t.se(ctx.c_out, ctx.h_out, ctx.w_out)
    return OpCost(flops=t.flops, params=t.params, mem_bytes=t.elems * bytes_per_element)


def flops_of(op: OperatorSpec, ctx: LayerContext) -> int:
    return op_cost(op, ctx).flops


def params_of(op: OperatorSpec, ctx: LayerContext) -> int:
    return op_cost(op, ctx).params


def memory_access_of(op: OperatorSpec, ctx: LayerContext,
                     bytes_per_element: int = DEFAULT_BYTES_PER_ELEMENT) -> int:
    return op_cost(op, ctx, bytes_per_element=bytes_per_element).mem_bytes


def dump_pool(ctx: LayerContext,
              bytes_per_element: int = DEFAULT_BYTES_PER_ELEMENT) -> list[dict]:
    """Pool with per-operator costs at ctx, as JSON-ready records."""
    rows = []
    for op in enumerate_pool():
        cost = op_cost(op, ctx, bytes_per_element=bytes_per_element)
        rows.append({
            "id": op.id,
            "family": op.family.value,
            "kernel": op.kernel,
            "expansion": op.expansion,
            "se": op.se,
            "flops": cost.flops,
            "params": cost.params,
            "mem_bytes": cost.mem_bytes,
        })
    return rows
