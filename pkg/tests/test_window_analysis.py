from fractions import Fraction

import pytest

from src.models import Flavor, Kind, Objective, negate_weights, reweight
from src.testgen import random_chain, random_game, random_mdp
from src.utils.error_handler import UnsupportedInputError, UsageError
from src.window_analysis import (
    DIRECT_BOUNDED_NOTE,
    WindowAnalyzer,
    components_table,
    distribution_table,
)

SCALE = Fraction(3, 2)
OFFSET = -2
SEEDS = range(20)

CHAIN_OBJECTIVES = [
    Objective(Kind.FIXED, 2),
    Objective(Kind.DIRECT_FIXED, 2),
    Objective(Kind.BOUNDED),
    Objective(Kind.DIRECT_BOUNDED),
]
MDP_OBJECTIVES = [
    Objective(Kind.FIXED, 2),
    Objective(Kind.DIRECT_FIXED, 2),
    Objective(Kind.BOUNDED),
]


def _affine(value):
    return SCALE * value + OFFSET


@pytest.mark.parametrize("objective", CHAIN_OBJECTIVES, ids=lambda o: o.label)
def test_chain_values_follow_affine_reweighting(objective):
    for seed in SEEDS:
        chain = random_chain(4, 3, seed)
        base = WindowAnalyzer(chain).analyze(objective)
        moved = WindowAnalyzer(reweight(chain, SCALE, OFFSET)).analyze(objective)
        assert moved.value == _affine(base.value), seed
        if base.distribution is not None:
            assert moved.distribution == base.distribution.mapped(_affine), seed


@pytest.mark.slow
@pytest.mark.parametrize("objective", MDP_OBJECTIVES, ids=lambda o: o.label)
def test_mdp_values_follow_affine_reweighting(objective):
    for seed in SEEDS:
        mdp = random_mdp(3, 2, 2, seed)
        base = WindowAnalyzer(mdp).analyze(objective).value
        assert WindowAnalyzer(reweight(mdp, SCALE, OFFSET)).analyze(objective).value == _affine(base), seed


def test_game_values_follow_affine_reweighting():
    objective = Objective(Kind.DIRECT_FIXED, 2)
    for seed in SEEDS:
        game = random_game(3, 2, seed)
        base = WindowAnalyzer(game).analyze(objective).value
        assert WindowAnalyzer(reweight(game, SCALE, OFFSET)).analyze(objective).value == _affine(base), seed


@pytest.mark.parametrize("build, objectives", [
    (lambda seed: random_chain(4, 3, seed), CHAIN_OBJECTIVES),
    pytest.param(lambda seed: random_mdp(3, 2, 2, seed), MDP_OBJECTIVES, marks=pytest.mark.slow),
    (lambda seed: random_game(3, 2, seed), [Objective(Kind.DIRECT_FIXED, 2)]),
], ids=['mc', 'mdp', 'game'])
def test_cost_is_the_negated_payoff_of_negated_weights(build, objectives):
    for seed in SEEDS:
        model = build(seed)
        for objective in objectives:
            cost = Objective(objective.kind, objective.window, Flavor.COST)
            result = WindowAnalyzer(model).analyze(cost)
            payoff = WindowAnalyzer(negate_weights(model)).analyze(objective)
            assert result.value == -payoff.value, (seed, objective.label)
            assert result.objective.flavor == Flavor.COST


def test_cost_flips_the_direct_distribution(two_bscc):
    result = WindowAnalyzer(two_bscc).analyze(Objective(Kind.DIRECT_FIXED, 2, Flavor.COST))
    mirrored = WindowAnalyzer(negate_weights(two_bscc)).analyze(Objective(Kind.DIRECT_FIXED, 2))
    assert result.distribution == mirrored.distribution.mapped(lambda v: -v)
    assert result.value == result.distribution.expectation()


def test_direct_bounded_reuses_the_bounded_value(two_bscc):
    analyzer = WindowAnalyzer(two_bscc)
    direct = analyzer.analyze(Objective(Kind.DIRECT_BOUNDED))
    assert direct.value == analyzer.analyze(Objective(Kind.BOUNDED)).value == Fraction(3, 2)
    assert DIRECT_BOUNDED_NOTE in direct.notes
    assert direct.objective.kind == Kind.DIRECT_BOUNDED


def test_algorithm_and_model_checks(two_bscc, coin_choice):
    with pytest.raises(UsageError):
        WindowAnalyzer(coin_choice).analyze(Objective(Kind.DIRECT_FIXED, 2), algorithm='unfold')
    with pytest.raises(UsageError):
        WindowAnalyzer(two_bscc).analyze(Objective(Kind.FIXED, 2), algorithm='enumerate')
    game = random_game(2, 2, seed=0)
    with pytest.raises(UnsupportedInputError):
        WindowAnalyzer(game).analyze(Objective(Kind.BOUNDED))
    with pytest.raises(UnsupportedInputError):
        WindowAnalyzer(game).sweep([1, 2])


def test_unfold_and_product_agree(two_bscc):
    analyzer = WindowAnalyzer(two_bscc)
    product = analyzer.analyze(Objective(Kind.DIRECT_FIXED, 2))
    unfolded = analyzer.analyze(Objective(Kind.DIRECT_FIXED, 2), algorithm='unfold')
    assert product.distribution == unfolded.distribution
    assert product.algorithm != unfolded.algorithm


def test_cost_sweep_negates_both_columns(coin_choice):
    payoff = WindowAnalyzer(negate_weights(coin_choice)).sweep([1, 2])
    cost = WindowAnalyzer(coin_choice, show_progress=True).sweep([1, 2], Flavor.COST)
    assert list(cost['fixwmp']) == [-v for v in payoff['fixwmp']]
    assert list(cost['bwmp']) == [-v for v in payoff['bwmp']]


def test_result_tables(two_bscc):
    analyzer = WindowAnalyzer(two_bscc)
    fixed = analyzer.analyze(Objective(Kind.FIXED, 2))
    assert distribution_table(fixed) is None
    components = components_table(fixed)
    assert sorted(components['value']) == ['1', '2']
    assert list(components.columns) == ['kind', 'states', 'reach', 'value']
    direct = distribution_table(analyzer.analyze(Objective(Kind.DIRECT_FIXED, 2)))
    assert list(direct['value']) == ['1']
    assert list(direct['probability']) == ['1 (100.00%)']
