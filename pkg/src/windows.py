"""
Finite-path window evaluators
Window total-payoff, window mean-payoff and the finite direct-window value
"""

from fractions import Fraction
from typing import Sequence

from src.models import FinitePath
from src.utils.error_handler import PreconditionError


def _check_length(length: int, l: int):
    if not isinstance(l, int) or l < 1:
        raise PreconditionError(f"window length must be a positive integer, got {l!r}")
    if length < l:
        raise PreconditionError(f"path has {length} edges, window needs {l}")


def window_total_payoff(weights: Sequence[Fraction], l: int) -> Fraction:
    """Max over k in 1..l of the sum of the first k weights"""
    _check_length(len(weights), l)
    total = Fraction(0)
    best = None
    for w in weights[:l]:
        total += w
        if best is None or total > best:
            best = total
    return best


def window_mean_payoff(weights: Sequence[Fraction], l: int) -> Fraction:
    """Max over k in 1..l of the mean of the first k weights"""
    _check_length(len(weights), l)
    total = Fraction(0)
    best = None
    for k, w in enumerate(weights[:l], start=1):
        total += w
        mean = total / k
        if best is None or mean > best:
            best = mean
    return best


def wtp(path: FinitePath, l: int) -> Fraction:
    return window_total_payoff(path.weights, l)


def wmp(path: FinitePath, l: int) -> Fraction:
    return window_mean_payoff(path.weights, l)


def finite_direct_window_value(path: FinitePath, l_max: int) -> Fraction:
    """
    Min over every position with a full window ahead of the window mean-payoff there

    Args:
        path: Finite path with at least l_max edges
        l_max: Window length

    Returns:
        Fraction: min_i wmp(path from i, l_max) for i in 0..|path|-l_max
    """
    weights = path.weights
    _check_length(len(weights), l_max)
    return min(window_mean_payoff(weights[i:i + l_max], l_max) for i in range(len(weights) - l_max + 1))
