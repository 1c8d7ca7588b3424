from fractions import Fraction
from itertools import product

import numpy as np
import pandas as pd
import pytest

from config.settings import SOLVER_LIMITS
from src.graph_analysis import bsccs, induced_edges, min_mean_cycle
from src.mc_window import (
    bwmp_mc,
    build_path_chain,
    build_threshold_product,
    check_alt_good_window,
    convergence_window_bound,
    dirfix_tail_probability,
    dirfixwmp_mc,
    dirfixwmp_unfold,
    exp_val_bscc,
    fixwmp_mc,
    fixwmp_sweep,
    non_neg_window_bscc,
    possible_values,
    realized_window_values,
)
from src.models import Edge, MarkovChain, ValueDistribution
from src.oracles import brute_c_bscc, brute_dirfix_distribution, brute_good_states, brute_m_bscc
from src.testgen import random_bscc, random_chain
from src.utils.error_handler import PreconditionError, ResourceLimitError
from src.windows import window_mean_payoff


def _component_edges(chain, names):
    return tuple(induced_edges(chain, sorted(chain.state_id(n) for n in names)))


def test_two_bscc_fixed_window_value(two_bscc):
    assert exp_val_bscc(_component_edges(two_bscc, ['s1']), 2) == 2
    assert exp_val_bscc(_component_edges(two_bscc, ['s3', 's4']), 2) == 1
    result = fixwmp_mc(two_bscc, 2)
    assert result.value == Fraction(3, 2)
    assert [(c.states, c.reach_probability, c.value) for c in result.components] == [
        (('s1',), Fraction(1, 2), Fraction(2)),
        (('s3', 's4'), Fraction(1, 2), Fraction(1)),
    ]


def test_two_bscc_two_step_window_table(two_bscc):
    values = []
    for start in ('s3', 's4'):
        frontier = [(two_bscc.state_id(start), ())]
        for _ in range(2):
            frontier = [(e.dst, weights + (e.weight,)) for s, weights in frontier for e in two_bscc.successors[s]]
        values += [window_mean_payoff(weights, 2) for _, weights in frontier]
    assert sorted(values, reverse=True) == [3, 3, 2, 2, Fraction(3, 2), 1, 1, 1]


def test_cycle_fixtures(plain_cycle, shifted_cycle):
    assert fixwmp_mc(plain_cycle, 3).value == Fraction(11, 3)
    assert fixwmp_mc(shifted_cycle, 3).value == Fraction(2, 3)
    assert bwmp_mc(plain_cycle).value == Fraction(11, 3)
    assert fixwmp_mc(plain_cycle, 1).value == 2


@pytest.mark.parametrize("l_max", [1, 2, 3, 4, 5])
def test_zero_gap_chain(zero_gap, l_max):
    assert fixwmp_mc(zero_gap, l_max).value == Fraction(-1, l_max)
    assert bwmp_mc(zero_gap).value == 0


def test_self_loop_bscc():
    edges = (('x', 'x', Fraction(4)),)
    assert exp_val_bscc(edges, 3) == 4
    assert brute_m_bscc(edges, 3) == 4


def test_exp_val_rejects_open_component():
    with pytest.raises(PreconditionError):
        exp_val_bscc((('a', 'b', Fraction(1)),), 2)


def test_possible_values():
    assert possible_values(2, 2) == [0, Fraction(1, 2), 1, Fraction(3, 2), 2]
    assert possible_values(1, 1, -1) == [-1, 0, 1]


@pytest.mark.slow
def test_bscc_values_match_enumeration():
    rng = np.random.default_rng(2024)
    for seed in range(200):
        size = int(rng.integers(1, 7))
        l_max = int(rng.integers(1, 6))
        chain = random_bscc(size, 5, seed)
        edges = tuple(induced_edges(chain, range(chain.num_states)))
        assert exp_val_bscc(edges, l_max) == brute_m_bscc(edges, l_max), seed
        assert min_mean_cycle(edges) == brute_c_bscc(edges), seed


def test_good_states_match_enumeration():
    for seed in range(40):
        chain = random_bscc(4, 4, seed, min_weight=-4)
        edges = induced_edges(chain, range(chain.num_states))
        for l_max in (1, 2, 3):
            assert non_neg_window_bscc(edges, l_max) == brute_good_states(edges, l_max), seed


def test_two_bscc_direct_fixed_distribution(two_bscc):
    result = dirfixwmp_mc(two_bscc, 2)
    assert result.distribution == ValueDistribution({Fraction(1): Fraction(1)})
    assert dirfixwmp_unfold(two_bscc, 2).distribution == result.distribution


def _random_dag(seed):
    rng = np.random.default_rng(seed)
    n = 5
    edges = []
    for s in range(n - 2):
        targets = sorted({int(t) for t in rng.integers(s + 1, n, size=2)})
        share = Fraction(1, len(targets))
        edges += [Edge(s, t, share, Fraction(int(rng.integers(0, 4)))) for t in targets]
    edges += [Edge(s, s, Fraction(1), Fraction(int(rng.integers(0, 4)))) for s in (n - 2, n - 1)]
    return MarkovChain(states=tuple(f"s{i}" for i in range(n)), initial=0, edges=tuple(edges))


def test_direct_fixed_distribution_matches_path_enumeration():
    for seed in range(40):
        chain = _random_dag(seed)
        for l_max in (1, 2, 3):
            expected = ValueDistribution(brute_dirfix_distribution(chain, l_max))
            assert dirfixwmp_mc(chain, l_max).distribution == expected, (seed, l_max)


@pytest.mark.slow
def test_product_and_unfold_agree():
    rng = np.random.default_rng(7)
    for seed in range(100):
        size = int(rng.integers(1, 6))
        l_max = int(rng.integers(1, 4))
        chain = random_chain(size, 3, seed)
        law = dirfixwmp_mc(chain, l_max).distribution
        assert dirfixwmp_unfold(chain, l_max).distribution == law, seed
        for threshold in possible_values(3, l_max):
            assert dirfix_tail_probability(chain, threshold, l_max) == law.tail_mass(threshold), (seed, threshold)


def test_direct_fixed_is_thread_count_independent():
    for seed in range(10):
        chain = random_chain(4, 3, seed)
        assert dirfixwmp_mc(chain, 2, threads=3).distribution == dirfixwmp_mc(chain, 2).distribution, seed
        assert fixwmp_mc(chain, 2, threads=4).value == fixwmp_mc(chain, 2).value, seed


def test_direct_fixed_with_rational_weights():
    chain = MarkovChain.from_named_edges('a', [('a', 'b', 1, '-1/2'), ('b', 'a', '1/2', 1), ('b', 'b', '1/2', 0)])
    payoff = dirfixwmp_mc(chain, 2)
    assert payoff.distribution == dirfixwmp_unfold(chain, 2).distribution
    assert not payoff.transform.is_identity


def test_threshold_product_requires_integer_weights():
    chain = MarkovChain.from_named_edges('a', [('a', 'a', 1, '1/2')])
    with pytest.raises(PreconditionError):
        build_threshold_product(chain, 0, 2)


def test_threshold_product_trap(two_bscc):
    assert build_threshold_product(two_bscc, 1, 2).trap_probability() == 0
    assert build_threshold_product(two_bscc, Fraction(3, 2), 2).trap_probability() == 1
    assert dirfix_tail_probability(two_bscc, Fraction(3, 2), 2) == 0


def test_realized_window_values(two_bscc):
    assert realized_window_values(two_bscc, 2) == [1, Fraction(3, 2), 2, 3]
    assert realized_window_values(two_bscc, 2, max_paths=2) is None


def test_unfold_size_guard(two_bscc, monkeypatch):
    monkeypatch.setitem(SOLVER_LIMITS, 'unfold_max_states', 10)
    with pytest.raises(ResourceLimitError):
        build_path_chain(two_bscc, 2)


def test_path_chain_labels(plain_cycle):
    unfolded = build_path_chain(plain_cycle, 3)
    assert sorted(unfolded.labels.values()) == [Fraction(11, 3), 4, 5]
    assert unfolded.chain.states[0] == 'init'


def test_fixwmp_sweep_table(two_bscc):
    table = fixwmp_sweep(two_bscc, [1, 2, 3])
    assert isinstance(table, pd.DataFrame)
    assert list(table.columns) == ['l_max', 'fixwmp', 'bwmp', 'gap']
    assert list(table['fixwmp']) == [1, Fraction(3, 2), Fraction(3, 2)]
    assert list(table['gap']) == [Fraction(1, 2), 0, 0]


@pytest.mark.slow
def test_fixed_window_converges_to_bounded_on_chains():
    for seed in range(20):
        chain = random_chain(4, 2, seed)
        limit = bwmp_mc(chain).value
        previous = None
        for l_max in range(1, 6):
            value = fixwmp_mc(chain, l_max).value
            assert value <= limit, seed
            assert previous is None or value >= previous, seed
            previous = value

        lower_bound = Fraction(0)
        longest = 1
        for states, prob in bsccs(chain):
            edges = tuple(induced_edges(chain, sorted(states)))
            c_b = min_mean_cycle(edges)
            gap = Fraction(1, 2 * len(states))
            longest = max(longest, convergence_window_bound(edges, c_b - gap))
            lower_bound += prob * (c_b - gap)
        assert fixwmp_mc(chain, longest).value >= lower_bound, seed


@pytest.mark.slow
def test_convergence_window_makes_every_state_good():
    for seed in range(50):
        chain = random_bscc(4, 3, seed)
        edges = induced_edges(chain, range(chain.num_states))
        size = chain.num_states
        threshold = min_mean_cycle(edges) - Fraction(1, 2 * size)
        l_max = convergence_window_bound(edges, threshold)
        shifted = [(u, v, w - threshold) for u, v, w in edges]
        assert non_neg_window_bscc(shifted, l_max) == frozenset(range(size)), seed


def test_convergence_bound_needs_threshold_below_cycle_mean(plain_cycle):
    edges = induced_edges(plain_cycle, range(3))
    with pytest.raises(PreconditionError):
        convergence_window_bound(edges, Fraction(11, 3))


def test_good_window_check(two_bscc):
    report = check_alt_good_window(two_bscc, Fraction(1, 2), 2, 1)
    assert report.holds_globally
    assert set(report.masses.values()) == {Fraction(1)}

    strict = check_alt_good_window(two_bscc, Fraction(1, 2), 2, 2)
    assert strict.masses['s1'] == 1
    assert strict.masses['s4'] == 0
    assert not strict.satisfied['s4']
    assert not strict.holds_globally


def test_window_paths_from_small_chain_cover_all_combinations():
    chain = MarkovChain.from_named_edges('a', [('a', 'a', '1/2', 1), ('a', 'b', '1/2', 0), ('b', 'a', 1, 2)])
    unfolded = build_path_chain(chain, 2)
    reachable_paths = {tuple(chain.states[s] for s in p) for p in unfolded.paths}
    candidates = {('a',) + rest for rest in product('ab', repeat=2)} | {('b', 'a', 'a'), ('b', 'a', 'b')}
    assert reachable_paths <= candidates
    assert ('a', 'a', 'a') in reachable_paths
