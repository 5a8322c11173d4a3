from __future__ import annotations

import random

import pytest

from hwnas.backbone import Backbone, SearchSpace, default_backbone
from hwnas.ops import LayerContext, enumerate_pool, pool_by_id
from hwnas.profiles import HardwareKind, synth_profile

# cheap operators used to assemble small hand-built spaces
SMALL_SPACE_IDS = ("Choice_3", "MB_3_1", "SEP_3", "ChoiceX", "Choice_5")


@pytest.fixture(scope="session")
def pool():
    return enumerate_pool()


@pytest.fixture(scope="session")
def backbone20():
    return default_backbone()


@pytest.fixture(scope="session")
def dsp_table(backbone20, pool):
    return synth_profile(HardwareKind.DSP, backbone20, pool, seed=0)


def mini_backbone(n_layers: int, h: int = 8, c: int = 8) -> Backbone:
    ctx = LayerContext(h_in=h, w_in=h, c_in=c, c_out=c, stride=1)
    return Backbone(contexts=(ctx,) * n_layers)


def small_space(n_layers: int = 6, n_candidates: int = 3,
                h: int = 8, c: int = 8) -> SearchSpace:
    """Hand-built uniform space over a flat mini backbone."""
    by_id = pool_by_id()
    cands = tuple(by_id[i] for i in SMALL_SPACE_IDS[:n_candidates])
    return SearchSpace(
        backbone=mini_backbone(n_layers, h=h, c=c),
        candidates=(cands,) * n_layers,
        exploring=(None,) * n_layers,
        hardware="test",
        alpha=1.0,
        p=n_candidates,
    )


def small_table(space: SearchSpace, seed: int = 0,
                kind: HardwareKind = HardwareKind.CPU):
    return synth_profile(kind, space.backbone, enumerate_pool(), seed=seed)


def random_context(rng: random.Random) -> LayerContext:
    """Valid context with even channels, kernel-compatible spatial size."""
    stride = rng.choice((1, 2))
    h = rng.choice((8, 14, 16, 28, 56))
    c_in = 2 * rng.randint(1, 48)
    c_out = 2 * rng.randint(1, 48)
    return LayerContext(h_in=h, w_in=h, c_in=c_in, c_out=c_out, stride=stride)


def _unit_hash(*parts) -> float:
    import hashlib

    key = "|".join(str(p) for p in parts).encode()
    digest = hashlib.blake2b(key, digest_size=8).digest()
    return int.from_bytes(digest, "big") / 2.0**64


def pairwise_perturbed_targets(space, table, archs, seed=0, amplitude=0.03):
    """Additive latency times (1 + amplitude * g) where g has unit variance
    and is built from interactions between adjacent layers' choices, i.e.
    structure a per-layer one-hot model cannot fully capture."""
    import math

    from hwnas.latency import additive_latency

    n = space.n_layers
    scale = amplitude * math.sqrt(3.0 / (n - 1))
    targets = []
    for arch in archs:
        ids = space.arch_ids(arch)
        g = sum(2.0 * _unit_hash(seed, "pair", i, ids[i], ids[i + 1]) - 1.0
                for i in range(n - 1))
        targets.append(additive_latency(arch, space, table) * (1.0 + scale * g))
    return targets
