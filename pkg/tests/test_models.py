from fractions import Fraction

import numpy as np
import pytest

from src.models import (
    AnalysisResult,
    ComponentValue,
    FinitePath,
    Flavor,
    Kind,
    MarkovChain,
    Objective,
    ValueDistribution,
    negate_weights,
    normalize,
    reweight,
    to_rational,
)
from src.utils.error_handler import PreconditionError, ValidationError
from src.windows import finite_direct_window_value, window_mean_payoff, window_total_payoff, wmp, wtp


def _path(weights):
    return FinitePath.from_weights(weights)


@pytest.mark.parametrize("weights,l,expected", [
    ([2, 5, 4], 3, 11),
    ([7], 1, 7),
    (['-3/2'], 1, Fraction(-3, 2)),
    ([-1, 2, 1], 3, 2),
])
def test_wtp_examples(weights, l, expected):
    assert wtp(_path(weights), l) == expected


@pytest.mark.parametrize("weights,expected", [
    ([2, 0], 2),
    ([0, 2], 1),
    ([1, 0], 1),
])
def test_wmp_examples(weights, expected):
    assert wmp(_path(weights), 2) == expected


def test_window_needs_enough_edges():
    with pytest.raises(PreconditionError):
        wmp(_path([1, 2]), 3)
    with pytest.raises(PreconditionError):
        finite_direct_window_value(_path([1]), 2)


def test_finite_direct_window_value():
    assert finite_direct_window_value(_path([2, 0] * 3), 2) == 1
    assert finite_direct_window_value(_path([5] * 7), 3) == 5
    assert finite_direct_window_value(_path([2, 5, 4] * 3), 3) == Fraction(11, 3)


def _random_weights(rng, length):
    return [Fraction(int(p), int(q)) for p, q in zip(rng.integers(-6, 7, length), rng.integers(1, 4, length))]


def test_wmp_affine_equivariance_and_monotonicity():
    rng = np.random.default_rng(11)
    for trial in range(200):
        weights = _random_weights(rng, 6)
        scale = Fraction(int(rng.integers(1, 5)), int(rng.integers(1, 4)))
        offset = Fraction(int(rng.integers(-5, 6)), int(rng.integers(1, 4)))
        for l in range(1, 6):
            moved = [scale * w + offset for w in weights]
            assert window_mean_payoff(moved, l) == scale * window_mean_payoff(weights, l) + offset, trial
            assert window_mean_payoff(weights, l + 1) >= window_mean_payoff(weights, l), trial
            assert (window_mean_payoff(weights, l) >= 0) == (window_total_payoff(weights, l) >= 0), trial


def test_normalize_identity_for_non_negative_integers():
    chain = MarkovChain.from_named_edges('a', [('a', 'b', '1/2', 3), ('a', 'a', '1/2', 2),
                                               ('b', 'a', '1/2', 0), ('b', 'b', '1/2', 1)])
    normalized, transform = normalize(chain)
    assert transform.is_identity
    assert normalized is chain


def test_normalize_rational_weights():
    chain = MarkovChain.from_named_edges('a', [('a', 'b', 1, -1), ('b', 'a', 1, '1/2')])
    normalized, transform = normalize(chain)
    assert (transform.scale, transform.shift) == (2, 2)
    assert sorted(normalized.weights) == [0, 3]


def test_normalize_round_trip_on_paths():
    rng = np.random.default_rng(5)
    for trial in range(50):
        weights = _random_weights(rng, 5)
        cycle = [(f"s{i}", f"s{(i + 1) % len(weights)}", 1, w) for i, w in enumerate(weights)]
        normalized, transform = normalize(MarkovChain.from_named_edges('s0', cycle))
        assert all(w.denominator == 1 and w >= 0 for w in normalized.weights), trial
        scaled = [transform.apply(w) for w in weights]
        for l in range(1, 6):
            assert transform.denormalize(window_mean_payoff(scaled, l)) == window_mean_payoff(weights, l), trial


def test_chain_validation_rules():
    with pytest.raises(ValidationError, match="probability-sum"):
        MarkovChain.from_named_edges('a', [('a', 'a', '1/2', 0), ('a', 'b', '1/3', 0), ('b', 'b', 1, 0)])
    with pytest.raises(ValidationError, match="duplicate-edge"):
        MarkovChain.from_named_edges('a', [('a', 'a', '1/2', 0), ('a', 'a', '1/2', 1)])
    with pytest.raises(ValidationError, match="deadlock"):
        MarkovChain.from_named_edges('a', [('a', 'b', 1, 0)])
    with pytest.raises(ValidationError, match="exact-rational"):
        to_rational(0.5)


def test_three_thirds_sum_to_one():
    chain = MarkovChain.from_named_edges('a', [('a', 'a', '1/3', 0), ('a', 'b', '1/3', 0), ('a', 'c', '1/3', 0),
                                               ('b', 'b', 1, 0), ('c', 'c', 1, 0)])
    assert sum(e.prob for e in chain.successors[0]) == 1


def test_objective_window_rules():
    assert Objective.parse('fixwmp', 2).label == 'fixwmp(l_max=2)[payoff]'
    with pytest.raises(ValidationError, match="window-required"):
        Objective(Kind.FIXED)
    with pytest.raises(ValidationError, match="window-forbidden"):
        Objective(Kind.BOUNDED, 3)
    with pytest.raises(ValidationError):
        Objective.parse('meanpayoff')


def test_value_distribution():
    law = ValueDistribution({Fraction(2): Fraction(1, 2), Fraction(1): Fraction(1, 4), Fraction(0): Fraction(1, 4)})
    assert law.expectation() == Fraction(5, 4)
    assert law.tail_mass(1) == Fraction(3, 4)
    assert law.support() == [0, 1, 2]
    assert law.mapped(lambda v: -v).probability(-2) == Fraction(1, 2)
    with pytest.raises(ValidationError):
        ValueDistribution({Fraction(1): Fraction(1, 2)})


def test_negated_result_flips_values():
    result = AnalysisResult(
        objective=Objective(Kind.BOUNDED),
        value=Fraction(3, 2),
        distribution=ValueDistribution({Fraction(1): Fraction(1, 2), Fraction(2): Fraction(1, 2)}),
        components=(ComponentValue('bscc', ('s1',), Fraction(2), Fraction(1, 2)),),
    )
    cost = result.negated()
    assert cost.objective.flavor == Flavor.COST
    assert cost.value == Fraction(-3, 2)
    assert cost.distribution.support() == [-2, -1]
    assert cost.components[0].value == -2


def test_negate_and_reweight(two_bscc):
    assert negate_weights(two_bscc).weights == [-w for w in two_bscc.weights]
    assert reweight(two_bscc, 2, -1).weights == [2 * w - 1 for w in two_bscc.weights]
    with pytest.raises(ValidationError):
        reweight(two_bscc, 0, 1)
