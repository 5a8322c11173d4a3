"""Pluggable accuracy oracles for the search engine.

``SynthOracle`` is a deterministic tabular stand-in for supernet validation
accuracy.  Each layer gets a positive weight, geometric in depth so layers
near the classifier matter most (w_i proportional to rho^(n-i), normalized to
sum 1), each (layer, operator) pair gets a unary quality in [0, 1] hashed
from the seed, and adjacent layers contribute small pairwise interaction
terms of amplitude epsilon.  Accuracy is the affine-rescaled, clamped-to-
[0, 1] sum; the rescale maps the theoretical maximum raw score to 1 so the
ceiling is never saturated in practice (and is the identity when epsilon is
0).  Values are keyed by operator id, so restricted sub-spaces score
architectures identically to the full space.

``FileOracle`` serves accuracies from a CSV of semicolon-joined operator id
sequences, letting externally trained tabular benchmarks plug in unchanged.
"""

from __future__ import annotations

import csv
import hashlib
import itertools
import math
from abc import ABC, abstractmethod

from .backbone import Architecture, SearchSpace, space_size, validate_architecture
from .errors import (
    EvaluatorFailureError,
    InfeasibleConstraintError,
    SpaceTooLargeError,
    UnpreparedEvaluatorError,
)

BRUTE_FORCE_GUARD = 10**6


class Evaluator(ABC):
    """Accuracy oracle contract: prepare once per space, then evaluate."""

    concurrent_safe: bool = True

    @abstractmethod
    def prepare(self, space: SearchSpace) -> None: ...

    @abstractmethod
    def evaluate(self, arch: Architecture) -> float: ...


def _unit(*parts) -> float:
    key = "|".join(str(p) for p in parts).encode()
    digest = hashlib.blake2b(key, digest_size=8).digest()
    return int.from_bytes(digest, "big") / 2.0**64


class SynthOracle(Evaluator):
    def __init__(self, seed: int = 0, rho: float = 0.8, epsilon: float = 0.05):
        if not 0 < rho <= 1:
            raise ValueError("rho must be in (0, 1]")
        if epsilon < 0:
            raise ValueError("epsilon must be non-negative")
        self.seed = seed
        self.rho = rho
        self.epsilon = epsilon
        self._space: SearchSpace | None = None

    def prepare(self, space: SearchSpace) -> None:
        n = space.n_layers
        raw = [self.rho ** (n - i) for i in range(1, n + 1)]
        total = sum(raw)
        self._weights = [w / total for w in raw]
        self._scale = 1.0 / (1.0 + self.epsilon * (n - 1))
        # unary and pairwise tables, keyed by candidate indices of this space
        self._q = [
            [_unit(self.seed, "q", layer + 1, op.id) for op in cands]
            for layer, cands in enumerate(space.candidates)
        ]
        self._pair = [
            [
                [2.0 * _unit(self.seed, "pair", layer + 1, a.id, b.id) - 1.0
                 for b in space.candidates[layer + 1]]
                for a in space.candidates[layer]
            ]
            for layer in range(n - 1)
        ]
        self._space = space

    def layer_weights(self) -> list[float]:
        if self._space is None:
            raise UnpreparedEvaluatorError("prepare() has not been called")
        return list(self._weights)

    def unary(self, layer: int, candidate: int) -> float:
        """q value for a 1-based layer and candidate index."""
        if self._space is None:
            raise UnpreparedEvaluatorError("prepare() has not been called")
        return self._q[layer - 1][candidate]

    def evaluate(self, arch: Architecture) -> float:
        if self._space is None:
            raise UnpreparedEvaluatorError("prepare() has not been called")
        validate_architecture(self._space, arch)
        c = arch.choices
        raw = sum(w * q[i] for w, q, i in zip(self._weights, self._q, c))
        if self.epsilon:
            raw += self.epsilon * sum(
                self._pair[layer][c[layer]][c[layer + 1]]
                for layer in range(len(c) - 1)
            )
        return min(1.0, max(0.0, raw * self._scale))


class FileOracle(Evaluator):
    """Tabular oracle from a CSV of `choices,accuracy` rows.

    `choices` is the semicolon-joined operator ids of an architecture.
    """

    def __init__(self, path):
        self._table: dict[tuple[str, ...], float] = {}
        with open(path, encoding="utf-8") as fh:
            for row in csv.reader(fh):
                if not row or row[0].strip() == "choices":
                    continue
                ids = tuple(x.strip() for x in row[0].split(";"))
                self._table[ids] = float(row[1])
        self._space: SearchSpace | None = None

    def prepare(self, space: SearchSpace) -> None:
        self._space = space

    def evaluate(self, arch: Architecture) -> float:
        if self._space is None:
            raise UnpreparedEvaluatorError("prepare() has not been called")
        ids = self._space.arch_ids(arch)
        try:
            return self._table[ids]
        except KeyError:
            raise EvaluatorFailureError(
                f"architecture {';'.join(ids)} not in oracle table") from None


def save_file_oracle(path, rows: list[tuple[tuple[str, ...], float]]) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["choices", "accuracy"])
        for ids, acc in rows:
            writer.writerow([";".join(ids), repr(acc)])


def brute_force_best(space: SearchSpace, oracle: Evaluator,
                     latency_fn=None, tau_c: float = math.inf,
                     guard: int = BRUTE_FORCE_GUARD
                     ) -> tuple[Architecture, float]:
    """Exhaustive constrained optimum; ties go to lexicographically smallest
    choices.  Guarded against spaces too large to enumerate."""
    size = space_size(space)
    if size > guard:
        raise SpaceTooLargeError(f"{size} architectures exceeds guard {guard}")
    oracle.prepare(space)
    best: Architecture | None = None
    best_acc = -math.inf
    for combo in itertools.product(*(range(len(c)) for c in space.candidates)):
        arch = Architecture(combo)
        if latency_fn is not None and latency_fn(space, arch) > tau_c:
            continue
        acc = oracle.evaluate(arch)
        if acc > best_acc:
            best, best_acc = arch, acc
    if best is None:
        raise InfeasibleConstraintError(
            f"no architecture satisfies latency <= {tau_c}")
    return best, best_acc
