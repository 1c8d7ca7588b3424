"""
Monte Carlo sampling
Statistical sanity estimates of fixed and direct-fixed window values on Markov chains
"""

import logging
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional

import numpy as np

from config.settings import SIMULATION_DEFAULTS, validate_positive, validate_window
from src.models import Flavor, Kind, MarkovChain, Model, Objective, negate_weights
from src.utils.error_handler import PreconditionError, UnsupportedInputError

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class MonteCarloEstimate:
    """Sample mean with a normal-approximation confidence interval"""

    mean: float
    std: float
    samples: int
    sigmas: float

    @property
    def half_width(self) -> float:
        return self.sigmas * self.std / math.sqrt(self.samples)

    @property
    def low(self) -> float:
        return self.mean - self.half_width

    @property
    def high(self) -> float:
        return self.mean + self.half_width

    def contains(self, value) -> bool:
        # float rounding of exact values sits well inside this slack
        slack = 1e-9 * max(1.0, abs(float(value)))
        return self.low - slack <= float(value) <= self.high + slack

    def negated(self) -> 'MonteCarloEstimate':
        return MonteCarloEstimate(mean=-self.mean, std=self.std, samples=self.samples, sigmas=self.sigmas)


class MonteCarloSimulator:
    """
    Vectorized path sampler for a Markov chain

    Transitions are packed into padded (state, slot) tables so a whole batch
    of paths advances with one lookup per step.
    """

    def __init__(self, chain: MarkovChain, seed: Optional[int] = None):
        self.chain = chain
        self.rng = np.random.default_rng(SIMULATION_DEFAULTS['seed'] if seed is None else seed)
        width = max(len(out) for out in chain.successors)
        n = chain.num_states
        self.degree = np.array([len(out) for out in chain.successors])
        self.cumulative = np.ones((n, width))
        self.targets = np.zeros((n, width), dtype=np.int64)
        self.weights = np.zeros((n, width))
        for s, out in enumerate(chain.successors):
            running = Fraction(0)
            for slot, edge in enumerate(out):
                running += edge.prob
                self.cumulative[s, slot] = float(running)
                self.targets[s, slot] = edge.dst
                self.weights[s, slot] = float(edge.weight)

    def sample_weights(self, count: int, horizon: int) -> np.ndarray:
        """Weights of `count` paths of `horizon` steps from the initial state"""
        states = np.full(count, self.chain.initial, dtype=np.int64)
        out = np.empty((count, horizon))
        for step in range(horizon):
            draws = self.rng.random(count)
            slots = (draws[:, None] >= self.cumulative[states]).sum(axis=1)
            slots = np.minimum(slots, self.degree[states] - 1)
            out[:, step] = self.weights[states, slots]
            states = self.targets[states, slots]
        return out

    @staticmethod
    def window_means(weights: np.ndarray, l_max: int) -> np.ndarray:
        """Window mean-payoff at every position with a full window ahead"""
        horizon = weights.shape[1]
        prefix = np.concatenate([np.zeros((weights.shape[0], 1)), np.cumsum(weights, axis=1)], axis=1)
        positions = horizon - l_max + 1
        best = np.full((weights.shape[0], positions), -np.inf)
        for k in range(1, l_max + 1):
            means = (prefix[:, k:k + positions] - prefix[:, :positions]) / k
            best = np.maximum(best, means)
        return best

    def estimate(self, objective: Objective, samples: int, horizon: int, burn_in: int) -> MonteCarloEstimate:
        l_max = objective.window
        start = 0 if objective.kind == Kind.DIRECT_FIXED else burn_in
        if horizon - l_max + 1 <= start:
            raise PreconditionError(
                f"horizon {horizon} leaves no full window after burn-in {start} for l_max={l_max}")
        chunk = SIMULATION_DEFAULTS['chunk_size']
        values = []
        remaining = samples
        while remaining > 0:
            count = min(chunk, remaining)
            means = self.window_means(self.sample_weights(count, horizon), l_max)
            values.append(means[:, start:].min(axis=1))
            remaining -= count
        values = np.concatenate(values)
        logger.debug("sampled %d paths of %d steps for %s", samples, horizon, objective.label)
        return MonteCarloEstimate(
            mean=float(values.mean()),
            std=float(values.std(ddof=1)) if samples > 1 else 0.0,
            samples=samples,
            sigmas=SIMULATION_DEFAULTS['confidence_sigmas'],
        )


def monte_carlo(model: Model, objective: Objective, samples: Optional[int] = None, horizon: Optional[int] = None,
                burn_in: Optional[int] = None, seed: Optional[int] = None) -> MonteCarloEstimate:
    """
    Estimate an expected window value by sampling

    Fixed objectives take the minimum window value over positions after
    `burn_in`; direct-fixed objectives take it over every position.

    Args:
        model: Markov chain
        objective: fixwmp or dirfixwmp objective, either flavor
        samples: Number of sampled paths
        horizon: Steps per path
        burn_in: Positions skipped for fixed objectives
        seed: Generator seed

    Returns:
        MonteCarloEstimate
    """
    if objective.kind not in (Kind.FIXED, Kind.DIRECT_FIXED):
        raise UnsupportedInputError(
            f"{objective.kind.value} has no finite-horizon evaluator; simulate fixwmp or dirfixwmp",
            rule="simulate-objective")
    if not isinstance(model, MarkovChain):
        raise UnsupportedInputError("Monte Carlo sampling needs a Markov chain", rule="simulate-model")
    validate_window(objective.window)
    samples = validate_positive('samples', samples or SIMULATION_DEFAULTS['samples'])
    horizon = validate_positive('horizon', horizon or SIMULATION_DEFAULTS['horizon'])
    burn_in = SIMULATION_DEFAULTS['burn_in'] if burn_in is None else burn_in

    chain = negate_weights(model) if objective.flavor == Flavor.COST else model
    estimate = MonteCarloSimulator(chain, seed).estimate(objective, samples, horizon, burn_in)
    return estimate.negated() if objective.flavor == Flavor.COST else estimate
