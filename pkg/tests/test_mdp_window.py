import itertools
import math
from fractions import Fraction

import numpy as np
import pytest

from config.settings import ORACLE_LIMITS, SOLVER_LIMITS
from src.graph_analysis import EndComponent, mecs
from src.mc_window import bwmp_mc, dirfixwmp_mc, fixwmp_mc
from src.mdp_window import (
    build_dirfix_product,
    bwmp_mdp,
    bwmp_mec,
    dirfixwmp_mdp,
    expected_mean_payoff_const_mec,
    fixwmp_mdp,
    fixwmp_mec,
    fixwmp_sweep,
    replace_mecs,
    sub_mdp,
)
from src.models import Edge, Kind, MarkovChain, Mdp, normalize, reweight
from src.oracles import brute_expected_const_mec
from src.testgen import random_chain, random_mdp, random_model
from src.utils.error_handler import ResourceLimitError, UnsupportedInputError, ValidationError


@pytest.fixture
def detour():
    """p either stays for 1 or takes a two-step detour worth 0 then 4"""
    return Mdp.from_named_transitions('p', [
        ('p', 'stay', 'p', 1, 1),
        ('p', 'go', 'q', 1, 0),
        ('q', 'back', 'p', 1, 4),
    ])


def test_coin_choice_values(coin_choice):
    assert expected_mean_payoff_const_mec(coin_choice) == Fraction(5, 2)
    assert brute_expected_const_mec(coin_choice) == Fraction(5, 2)
    assert fixwmp_mdp(coin_choice, 1).value == Fraction(5, 2)
    assert bwmp_mdp(coin_choice).value == Fraction(5, 2)


def test_coin_choice_direct_fixed(coin_choice):
    assert dirfixwmp_mdp(coin_choice, 1).value == 0
    assert dirfixwmp_mdp(coin_choice, 2).value == Fraction(5, 4)


def test_mec_values_grow_with_window(detour):
    mec = mecs(detour).mecs[0]
    assert fixwmp_mec(detour, mec, 1) == 1
    assert fixwmp_mec(detour, mec, 2) == 2
    assert bwmp_mec(detour, mec) == 2
    assert fixwmp_mdp(detour, 2).components[0].states == ('p', 'q')


def test_mdp_values_are_affine_in_weights(detour):
    scaled = reweight(detour, Fraction(1, 3), -2)
    assert fixwmp_mdp(scaled, 2).value == Fraction(2, 3) - 2
    assert bwmp_mdp(scaled).value == Fraction(2, 3) - 2


def test_sweep_table(detour):
    table = fixwmp_sweep(detour, [1, 2, 3])
    assert list(table['fixwmp']) == [1, 2, 2]
    assert list(table['gap']) == [1, 0, 0]


def test_sub_mdp_rejects_open_or_disconnected_sets(coin_choice):
    coin = coin_choice.actions.index('coin')
    stay = coin_choice.actions.index('stay')
    with pytest.raises(ValidationError, match="end-component"):
        sub_mdp(coin_choice, EndComponent(frozenset({0}), ((0, (coin,)),)))
    with pytest.raises(ValidationError, match="end-component"):
        sub_mdp(coin_choice, EndComponent(frozenset({1, 2}), ((1, (stay,)), (2, (stay,)))))
    single = sub_mdp(coin_choice, EndComponent(frozenset({3}), ((3, (stay,)),)))
    assert single.states == ('five',)
    assert list(single.weights) == [5]


def test_expected_mean_payoff_needs_constant_mecs(detour):
    with pytest.raises(UnsupportedInputError, match="constant-mec"):
        expected_mean_payoff_const_mec(detour)


def test_replace_mecs_writes_values_on_internal_transitions(coin_choice):
    annotation = replace_mecs(coin_choice, 1, Kind.FIXED)
    assert sorted(annotation.values) == [0, 1, 5]
    assert sorted(c.value for c in annotation.components()) == [0, 1, 5]
    init_weights = {o.weight for c in annotation.mdp.choices if c.state == 0 for o in c.outcomes}
    assert init_weights == {0}
    with pytest.raises(ValidationError):
        replace_mecs(coin_choice, 1, Kind.DIRECT_FIXED)


def test_quotient_policy_iteration_matches_strategy_enumeration():
    for seed in range(30):
        mdp = random_mdp(4, 2, 3, seed)
        annotation = replace_mecs(mdp, 1, Kind.FIXED)
        expected = brute_expected_const_mec(annotation.mdp)
        assert expected_mean_payoff_const_mec(annotation.mdp, annotation.partition) == expected, seed


def test_dirfix_product_guards(coin_choice, monkeypatch):
    with pytest.raises(ValidationError):
        build_dirfix_product(reweight(coin_choice, Fraction(1, 2), 0), 2)
    with pytest.raises(ValidationError):
        build_dirfix_product(reweight(coin_choice, 1, -1), 2)
    product = build_dirfix_product(coin_choice, 2)
    assert product.keys[product.mdp.initial] == (0, (5,), 5)
    monkeypatch.setitem(SOLVER_LIMITS, 'dirfix_product_max_states', 3)
    with pytest.raises(ResourceLimitError):
        build_dirfix_product(coin_choice, 2)


def test_threads_do_not_change_mdp_values():
    mdp = random_mdp(6, 2, 3, seed=4)
    assert fixwmp_mdp(mdp, 2, threads=4) == fixwmp_mdp(mdp, 2, threads=1)


@pytest.mark.slow
def test_single_action_mdps_agree_with_chain_solvers():
    rng = np.random.default_rng(5)
    for seed in range(100):
        chain = random_chain(int(rng.integers(1, 5)), 3, seed)
        mdp = Mdp.from_chain(chain)
        l_max = int(rng.integers(1, 3))
        assert fixwmp_mdp(mdp, l_max).value == fixwmp_mc(chain, l_max).value, seed
        assert bwmp_mdp(mdp).value == bwmp_mc(chain).value, seed
        assert dirfixwmp_mdp(mdp, l_max).value == dirfixwmp_mc(chain, l_max).value, seed


@pytest.mark.slow
def test_mdp_fixed_values_climb_towards_bounded():
    for seed in range(10):
        mdp = random_mdp(4, 2, 3, seed)
        limit = bwmp_mdp(mdp).value
        values = [fixwmp_mdp(mdp, l_max).value for l_max in (1, 2, 3)]
        assert values == sorted(values), seed
        assert values[-1] <= limit, seed


def _memoryless_chains(mdp: Mdp):
    options = [mdp.actions_of(s) for s in range(mdp.num_states)]
    for picks in itertools.product(*options):
        edges = tuple(Edge(s, o.dst, o.prob, o.weight) for s, a in enumerate(picks) for o in mdp.outcomes(s, a))
        yield MarkovChain(states=mdp.states, initial=mdp.initial, edges=edges)


@pytest.mark.slow
def test_no_memoryless_strategy_beats_the_mdp_values():
    for seed in range(40):
        mdp = random_model('mdp', 3, 2, seed)
        chains = list(_memoryless_chains(mdp))
        for l_max in (1, 2):
            fixed = fixwmp_mdp(mdp, l_max).value
            direct = dirfixwmp_mdp(mdp, l_max).value
            assert max(fixwmp_mc(chain, l_max).value for chain in chains) <= fixed, (seed, l_max)
            assert max(dirfixwmp_mc(chain, l_max).value for chain in chains) <= direct, (seed, l_max)


def test_direct_value_never_exceeds_fixed_value():
    for seed in range(40):
        mdp = random_model('mdp', 3, 2, seed)
        for l_max in (1, 2):
            assert dirfixwmp_mdp(mdp, l_max).value <= fixwmp_mdp(mdp, l_max).value, (seed, l_max)


@pytest.mark.slow
def test_direct_value_matches_product_strategy_enumeration():
    checked = 0
    for seed in range(20):
        mdp = random_model('mdp', 3, 2, seed)
        normalized, transform = normalize(mdp)
        for l_max in (1, 2):
            product = build_dirfix_product(normalized, l_max).mdp
            strategies = math.prod(len(product.actions_of(s)) for s in range(product.num_states))
            if strategies > ORACLE_LIMITS['max_strategy_pairs']:
                continue
            expected = transform.denormalize(brute_expected_const_mec(product))
            assert dirfixwmp_mdp(mdp, l_max).value == expected, (seed, l_max)
            checked += 1
    assert checked >= 20
