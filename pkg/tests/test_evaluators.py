from __future__ import annotations

import itertools
import math
import random

import pytest

from hwnas.backbone import Architecture
from hwnas.errors import (
    EvaluatorFailureError,
    InfeasibleConstraintError,
    SpaceTooLargeError,
    UnpreparedEvaluatorError,
)
from hwnas.evaluators import FileOracle, SynthOracle, brute_force_best, save_file_oracle
from hwnas.latency import make_additive_fn
from hwnas.search import sample_uniform

from conftest import small_space, small_table


def test_evaluate_deterministic():
    space = small_space()
    a = SynthOracle(seed=7)
    b = SynthOracle(seed=7)
    a.prepare(space)
    b.prepare(space)
    arch = Architecture((0, 1, 2, 0, 1, 2))
    assert a.evaluate(arch) == b.evaluate(arch)
    assert a.evaluate(arch) == a.evaluate(arch)  # repeat is bit-identical


def test_different_seed_changes_values():
    space = small_space()
    a, b = SynthOracle(seed=1), SynthOracle(seed=2)
    a.prepare(space)
    b.prepare(space)
    arch = Architecture((0,) * 6)
    assert a.evaluate(arch) != b.evaluate(arch)


def test_unprepared_raises():
    with pytest.raises(UnpreparedEvaluatorError):
        SynthOracle(seed=0).evaluate(Architecture((0,)))


def test_outputs_bounded_for_10k_archs():
    space = small_space(n_layers=8, n_candidates=3)
    oracle = SynthOracle(seed=5)
    oracle.prepare(space)
    rng = random.Random(0)
    for _ in range(10_000):
        acc = oracle.evaluate(sample_uniform(space, rng))
        assert 0.0 <= acc <= 1.0


def test_epsilon_zero_linear_difference_at_last_layer():
    space = small_space(n_layers=6, n_candidates=3)
    oracle = SynthOracle(seed=3, epsilon=0.0)
    oracle.prepare(space)
    w = oracle.layer_weights()
    assert w[-1] == max(w)  # later layers dominate
    base = Architecture((0,) * 6)
    for cand in (1, 2):
        other = Architecture((0,) * 5 + (cand,))
        dq = abs(oracle.unary(6, cand) - oracle.unary(6, 0))
        diff = abs(oracle.evaluate(other) - oracle.evaluate(base))
        assert diff == pytest.approx(w[-1] * dq, abs=1e-15)


def test_epsilon_zero_unconstrained_optimum_is_separable():
    space = small_space(n_layers=5, n_candidates=3)
    oracle = SynthOracle(seed=11, epsilon=0.0)
    best, best_acc = brute_force_best(space, oracle)
    expected = tuple(
        max(range(3), key=lambda c: oracle.unary(layer, c))
        for layer in range(1, 6))
    assert best.choices == expected
    assert best_acc == oracle.evaluate(Architecture(expected))


def test_geometric_weights_normalized():
    space = small_space(n_layers=6)
    oracle = SynthOracle(seed=0, rho=0.8)
    oracle.prepare(space)
    w = oracle.layer_weights()
    assert sum(w) == pytest.approx(1.0)
    for earlier, later in zip(w, w[1:]):
        assert earlier == pytest.approx(later * 0.8)


def test_brute_force_single_candidate_space():
    space = small_space(n_layers=4, n_candidates=1)
    oracle = SynthOracle(seed=0)
    best, _ = brute_force_best(space, oracle)
    assert best.choices == (0, 0, 0, 0)


def test_brute_force_two_by_two_hand_enumeration():
    space = small_space(n_layers=2, n_candidates=2)
    oracle = SynthOracle(seed=9)
    oracle.prepare(space)
    accs = {(i, j): oracle.evaluate(Architecture((i, j)))
            for i in range(2) for j in range(2)}
    best, best_acc = brute_force_best(space, oracle)
    assert best_acc == max(accs.values())
    assert accs[best.choices] == best_acc


def test_brute_force_respects_constraint():
    space = small_space(n_layers=4, n_candidates=3)
    table = small_table(space, seed=2)
    fn = make_additive_fn(table)
    oracle = SynthOracle(seed=4)
    all_lats = sorted(fn(space, Architecture(c)) for c in
                      itertools.product(range(3), repeat=4))
    tau = all_lats[len(all_lats) // 2]
    best, _ = brute_force_best(space, oracle, latency_fn=fn, tau_c=tau)
    assert fn(space, best) <= tau


def test_brute_force_infeasible():
    space = small_space(n_layers=3, n_candidates=2)
    table = small_table(space, seed=0)
    fn = make_additive_fn(table)
    with pytest.raises(InfeasibleConstraintError):
        brute_force_best(space, SynthOracle(seed=0), latency_fn=fn, tau_c=1e-9)


def test_brute_force_space_guard():
    space = small_space(n_layers=20, n_candidates=4)  # 4^20 >> guard
    with pytest.raises(SpaceTooLargeError):
        brute_force_best(space, SynthOracle(seed=0))


def test_brute_force_tie_breaks_lexicographically(tmp_path):
    space = small_space(n_layers=2, n_candidates=2)
    ids = [space.arch_ids(Architecture((i, j))) for i in range(2) for j in range(2)]
    rows = [(x, 0.5) for x in ids]  # all tied
    path = tmp_path / "flat.csv"
    save_file_oracle(path, rows)
    best, acc = brute_force_best(space, FileOracle(path))
    assert best.choices == (0, 0)
    assert acc == 0.5


def test_file_oracle_round_trip(tmp_path):
    space = small_space(n_layers=3, n_candidates=2)
    synth = SynthOracle(seed=21)
    synth.prepare(space)
    rows = []
    for combo in itertools.product(range(2), repeat=3):
        arch = Architecture(combo)
        rows.append((space.arch_ids(arch), synth.evaluate(arch)))
    path = tmp_path / "oracle.csv"
    save_file_oracle(path, rows)
    loaded = FileOracle(path)
    loaded.prepare(space)
    for combo in itertools.product(range(2), repeat=3):
        arch = Architecture(combo)
        assert loaded.evaluate(arch) == synth.evaluate(arch)


def test_file_oracle_missing_arch(tmp_path):
    space = small_space(n_layers=2, n_candidates=2)
    path = tmp_path / "partial.csv"
    save_file_oracle(path, [(space.arch_ids(Architecture((0, 0))), 0.9)])
    oracle = FileOracle(path)
    oracle.prepare(space)
    with pytest.raises(EvaluatorFailureError):
        oracle.evaluate(Architecture((1, 1)))


def test_brute_force_result_satisfies_constraint_always():
    space = small_space(n_layers=4, n_candidates=3)
    table = small_table(space, seed=6)
    fn = make_additive_fn(table)
    for seed in range(5):
        oracle = SynthOracle(seed=seed)
        lats = sorted(fn(space, Architecture(c)) for c in
                      itertools.product(range(3), repeat=4))
        for quantile in (0.3, 0.6, 0.9):
            tau = lats[int(quantile * (len(lats) - 1))]
            best, _ = brute_force_best(space, oracle, latency_fn=fn, tau_c=tau)
            assert fn(space, best) <= tau


def test_synth_oracle_rejects_bad_params():
    with pytest.raises(ValueError):
        SynthOracle(rho=0.0)
    with pytest.raises(ValueError):
        SynthOracle(epsilon=-1.0)
    with pytest.raises(ValueError):
        SynthOracle(rho=1.5)


def test_accuracy_keyed_by_operator_id_not_index():
    # the same underlying architecture scores identically in a space whose
    # candidate lists are ordered differently
    from hwnas.backbone import SearchSpace

    space = small_space(n_layers=4, n_candidates=3)
    reordered = SearchSpace(
        backbone=space.backbone,
        candidates=tuple(tuple(reversed(c)) for c in space.candidates),
        exploring=space.exploring,
        hardware=space.hardware,
        alpha=space.alpha,
        p=space.p,
    )
    oracle_a, oracle_b = SynthOracle(seed=2), SynthOracle(seed=2)
    oracle_a.prepare(space)
    oracle_b.prepare(reordered)
    arch = Architecture((0, 1, 2, 0))
    twin = reordered.arch_from_ids(space.arch_ids(arch))
    assert oracle_b.evaluate(twin) == oracle_a.evaluate(arch)


def test_evaluate_uses_math_not_nan():
    space = small_space()
    oracle = SynthOracle(seed=0)
    oracle.prepare(space)
    acc = oracle.evaluate(Architecture((0,) * 6))
    assert math.isfinite(acc)
