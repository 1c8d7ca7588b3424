"""
Markov chain window solvers
Fixed and bounded window values per BSCC, the trap product for direct fixed
windows, the path-chain unfolding and the probabilistic good-window checker
"""

import logging
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from math import ceil, lcm
from typing import Dict, FrozenSet, Hashable, Iterable, List, Optional, Sequence, Tuple

import networkx as nx
import pandas as pd

from config.settings import SOLVER_LIMITS
from src.graph_analysis import (
    bsccs,
    expected_hit_value,
    induced_edges,
    min_mean_cycle,
    reach_prob,
    reachable_states,
)
from src.models import (
    AnalysisResult,
    ComponentValue,
    Edge,
    Kind,
    MarkovChain,
    Objective,
    ValueDistribution,
    WeightTransform,
    normalize,
)
from src.utils.cache_manager import solver_cache
from src.utils.error_handler import InternalSolverError, PreconditionError, ResourceLimitError
from src.utils.workers import ordered_map
from src.windows import window_mean_payoff

logger = logging.getLogger(__name__)

WeightedEdge = Tuple[Hashable, Hashable, Fraction]

# =============================================================================
# FIXED WINDOW INSIDE A BSCC
# =============================================================================

def possible_values(max_w, l_max: int, min_w=0) -> List[Fraction]:
    """
    Every window mean a path of at most l_max integer weights in [min_w, max_w] can take

    Returns:
        Sorted list of distinct p/q with 1 <= q <= l_max and q*min_w <= p <= q*max_w
    """
    max_w, min_w = int(max_w), int(min_w)
    values = {Fraction(p, q) for q in range(1, l_max + 1) for p in range(q * min_w, q * max_w + 1)}
    return sorted(values)


def window_table(edges: Sequence[WeightedEdge], l_max: int) -> Dict[Hashable, Fraction]:
    """
    Least window total-payoff over l_max-step paths, per state

    C_0 = 0 and C_i(s) = min over edges (s, t, w) of max(w, w + C_{i-1}(t)).
    """
    nodes = {u for u, _, _ in edges} | {v for _, v, _ in edges}
    table = {s: 0 for s in nodes}
    for _ in range(l_max):
        current: Dict[Hashable, Fraction] = {}
        for u, v, w in edges:
            candidate = max(w, w + table[v])
            if u not in current or candidate < current[u]:
                current[u] = candidate
        table = current
    return table


def non_neg_window_bscc(edges: Sequence[WeightedEdge], l_max: int) -> FrozenSet[Hashable]:
    """States from which every l_max-step path has a non-negative window total-payoff"""
    return frozenset(s for s, value in window_table(edges, l_max).items() if value >= 0)


def _integer_edges(edges: Sequence[WeightedEdge]) -> Tuple[List[Tuple[Hashable, Hashable, int]], int]:
    scale = lcm(*(Fraction(w).denominator for _, _, w in edges))
    return [(u, v, int(Fraction(w) * scale)) for u, v, w in edges], scale


def _check_component(edges: Sequence[WeightedEdge]):
    if not edges:
        raise PreconditionError("component has no edges")
    graph = nx.DiGraph()
    graph.add_edges_from((u, v) for u, v, _ in edges)
    if not nx.is_strongly_connected(graph):
        raise PreconditionError("component is not strongly connected")


@solver_cache.cache_data
def exp_val_bscc(edges: Tuple[WeightedEdge, ...], l_max: int) -> Fraction:
    """
    Fixed window value m_B of a BSCC

    The least window mean-payoff over every state and every l_max-step path
    of the component, found by binary search over the finite set of window
    means. A threshold a/b is feasible iff every state keeps a non-negative
    window total-payoff under the reduced weights b*w - a.

    Args:
        edges: (src, dst, weight) triples of a closed strongly connected component
        l_max: Window length

    Returns:
        Fraction: m_B
    """
    _check_component(edges)
    scaled, scale = _integer_edges(edges)
    nodes = {u for u, _, _ in scaled}
    weights = [w for _, _, w in scaled]
    candidates = possible_values(max(weights), l_max, min(weights))

    def feasible(threshold: Fraction) -> bool:
        a, b = threshold.numerator, threshold.denominator
        reduced = [(u, v, b * w - a) for u, v, w in scaled]
        return non_neg_window_bscc(reduced, l_max) == nodes

    # candidates[0] is the least weight, always feasible
    lo, hi = 0, len(candidates) - 1
    while lo < hi:
        mid = (lo + hi + 1) // 2
        if feasible(candidates[mid]):
            lo = mid
        else:
            hi = mid - 1
    logger.debug("m_B=%s over %d candidates (l_max=%d)", candidates[lo] / scale, len(candidates), l_max)
    return candidates[lo] / scale


@solver_cache.cache_data
def bscc_min_mean(edges: Tuple[WeightedEdge, ...]) -> Fraction:
    """Bounded window value c_B of a BSCC: its least elementary cycle mean"""
    return min_mean_cycle(edges)


def convergence_window_bound(edges: Sequence[WeightedEdge], threshold) -> int:
    """
    Window length at which every state of a BSCC is good for `threshold`

    With d = c_B - threshold > 0 and W the largest absolute weight of the
    component reduced by the threshold, returns
    ceil(|B| * W * (|B| - 1) / d) + |B| - 1.
    """
    threshold = Fraction(threshold)
    gap = bscc_min_mean(tuple(edges)) - threshold
    if gap <= 0:
        raise PreconditionError(f"threshold {threshold} is not below the least cycle mean")
    size = len({u for u, _, _ in edges})
    largest = max(abs(Fraction(w) - threshold) for _, _, w in edges)
    return ceil(size * largest * (size - 1) / gap) + size - 1


def _component_results(mc: MarkovChain, solve, threads: int) -> List[Tuple[FrozenSet[int], Fraction, Fraction]]:
    reachable = [(states, prob) for states, prob in bsccs(mc) if prob > 0]
    values = ordered_map(lambda item: solve(tuple(induced_edges(mc, sorted(item[0])))), reachable, threads)
    return [(states, prob, value) for (states, prob), value in zip(reachable, values)]


def _component_values(mc: MarkovChain, results, transform: WeightTransform) -> Tuple[ComponentValue, ...]:
    return tuple(
        ComponentValue(
            kind='bscc',
            states=tuple(mc.states[s] for s in sorted(states)),
            value=transform.denormalize(value),
            reach_probability=prob,
        )
        for states, prob, value in results
    )


def fixwmp_mc(mc: MarkovChain, l_max: int, threads: int = 1) -> AnalysisResult:
    """
    Expected fixed window mean-payoff: sum over BSCCs of Pr(reach B) * m_B

    Args:
        mc: Markov chain
        l_max: Window length
        threads: Worker threads for the per-BSCC values

    Returns:
        AnalysisResult with one component entry per reachable BSCC
    """
    objective = Objective(Kind.FIXED, l_max)
    normalized, transform = normalize(mc)
    results = _component_results(normalized, lambda edges: exp_val_bscc(edges, l_max), threads)
    total = sum((prob * value for _, prob, value in results), Fraction(0))
    return AnalysisResult(
        objective=objective,
        value=transform.denormalize(total),
        components=_component_values(mc, results, transform),
        transform=transform,
        algorithm='bscc-binary-search',
    )


def bwmp_mc(mc: MarkovChain, threads: int = 1) -> AnalysisResult:
    """Expected bounded window mean-payoff: sum over BSCCs of Pr(reach B) * c_B"""
    results = _component_results(mc, bscc_min_mean, threads)
    total = sum((prob * value for _, prob, value in results), Fraction(0))
    return AnalysisResult(
        objective=Objective(Kind.BOUNDED),
        value=total,
        components=_component_values(mc, results, WeightTransform()),
        algorithm='bscc-min-mean-cycle',
    )


def fixwmp_sweep(mc: MarkovChain, l_values: Iterable[int], threads: int = 1) -> pd.DataFrame:
    """
    Fixed window values for several window lengths next to the bounded value

    Returns:
        DataFrame with columns l_max, fixwmp, bwmp and gap (bwmp - fixwmp)
    """
    limit = bwmp_mc(mc, threads).value
    rows = []
    for l_max in l_values:
        value = fixwmp_mc(mc, l_max, threads).value
        rows.append({'l_max': l_max, 'fixwmp': value, 'bwmp': limit, 'gap': limit - value})
    return pd.DataFrame(rows, columns=['l_max', 'fixwmp', 'bwmp', 'gap'])

# =============================================================================
# DIRECT FIXED WINDOW: TRAP PRODUCT
# =============================================================================

@dataclass(frozen=True)
class ThresholdProductMc:
    """
    Chain over (state, window age, deficit) plus an absorbing trap

    Reaching the trap means some window stayed open for l_max steps at the
    threshold. `keys[i]` is the (state, age, deficit) triple of product
    state i, None for the trap.
    """

    chain: MarkovChain
    keys: Tuple[Optional[Tuple[int, int, int]], ...]
    trap: int
    threshold: Fraction
    l_max: int

    def trap_probability(self) -> Fraction:
        return reach_prob(self.chain, {self.trap})[self.chain.initial]


def _require_integer_weights(mc: MarkovChain):
    if any(w.denominator != 1 for w in mc.weights):
        raise PreconditionError("chain must have integer weights; normalize it first")


def build_threshold_product(mc: MarkovChain, threshold, l_max: int) -> ThresholdProductMc:
    """
    Trap product of an integer-weighted chain for threshold a/b

    From (s, d, x) an edge of reduced weight b*w - a leads to x' = x - (b*w - a).
    If x' <= 0 the window closed and the product moves to (s', 0, 0);
    otherwise it moves to (s', d + 1, x'), or to the trap when d = l_max - 1.

    Args:
        mc: Chain with integer weights
        threshold: Rational threshold
        l_max: Window length

    Returns:
        ThresholdProductMc built by forward reachability
    """
    _require_integer_weights(mc)
    threshold = Fraction(threshold)
    a, b = threshold.numerator, threshold.denominator
    cap = SOLVER_LIMITS['threshold_product_max_states']
    max_drop = max(0, max(a - b * int(e.weight) for e in mc.edges))

    keys: List[Optional[Tuple[int, int, int]]] = [None]
    index: Dict[Tuple[int, int, int], int] = {}
    edges: List[Edge] = [Edge(0, 0, Fraction(1), Fraction(0))]

    def intern(key: Tuple[int, int, int]) -> int:
        if key not in index:
            if len(keys) >= cap:
                raise ResourceLimitError(
                    f"trap product exceeds {cap} states (threshold {threshold}, l_max={l_max})",
                    size=len(keys) + 1, cap=cap)
            index[key] = len(keys)
            keys.append(key)
            frontier.append(key)
        return index[key]

    frontier: List[Tuple[int, int, int]] = []
    initial = intern((mc.initial, 0, 0))
    while frontier:
        s, d, deficit = key = frontier.pop()
        source = index[key]
        to_trap = Fraction(0)
        for e in mc.successors[s]:
            remaining = deficit - (b * int(e.weight) - a)
            if remaining <= 0:
                edges.append(Edge(source, intern((e.dst, 0, 0)), e.prob, e.weight))
            elif d == l_max - 1:
                to_trap += e.prob
            else:
                if remaining > max_drop * (d + 1):
                    raise InternalSolverError(f"deficit {remaining} exceeds its bound at age {d + 1}")
                edges.append(Edge(source, intern((e.dst, d + 1, remaining)), e.prob, e.weight))
        if to_trap:
            edges.append(Edge(source, 0, to_trap, Fraction(0)))

    names = ['trap'] + [f"{mc.states[s]}|{d}|{x}" for s, d, x in keys[1:]]
    logger.debug("trap product for threshold %s: %d states", threshold, len(names))
    chain = MarkovChain(states=tuple(names), initial=initial, edges=tuple(edges))
    return ThresholdProductMc(chain=chain, keys=tuple(keys), trap=0, threshold=threshold, l_max=l_max)


def realized_window_values(mc: MarkovChain, l_max: int, max_paths: Optional[int] = None) -> Optional[List[Fraction]]:
    """
    Window means of l_max-step paths starting in reachable states

    Paths are collapsed on (state, running total, best mean), so the
    frontier counts distinct partial evaluations. Returns None when the
    frontier outgrows `max_paths`.
    """
    max_paths = max_paths or SOLVER_LIMITS['realized_value_max_paths']
    frontier = {(s, Fraction(0), None) for s in reachable_states(mc)}
    for step in range(1, l_max + 1):
        following = set()
        for s, total, best in frontier:
            for e in mc.successors[s]:
                mean = (total + e.weight) / step
                following.add((e.dst, total + e.weight, mean if best is None or mean > best else best))
        if len(following) > max_paths:
            logger.debug("realized value enumeration stopped at %d partial paths", len(following))
            return None
        frontier = following
    return sorted({best for _, _, best in frontier})


def dirfix_tail_probability(mc: MarkovChain, threshold, l_max: int) -> Fraction:
    """Pr(direct fixed window value >= threshold) = 1 - Pr(reach trap)"""
    normalized, transform = normalize(mc)
    product = build_threshold_product(normalized, transform.apply(threshold), l_max)
    return 1 - product.trap_probability()


def dirfixwmp_mc(mc: MarkovChain, l_max: int, threads: int = 1) -> AnalysisResult:
    """
    Distribution and expectation of the direct fixed window mean-payoff

    Thresholds are visited in descending order; Pr(f >= threshold) comes
    from the trap product and point masses from successive differences.
    The sweep stops once the tail probability reaches 1.

    Args:
        mc: Markov chain
        l_max: Window length
        threads: Thresholds evaluated per batch

    Returns:
        AnalysisResult carrying the ValueDistribution
    """
    normalized, transform = normalize(mc)
    thresholds = realized_window_values(normalized, l_max)
    if thresholds is None:
        weights = normalized.weights
        thresholds = possible_values(max(weights), l_max, min(weights))
    thresholds = sorted(thresholds, reverse=True)

    def tail(threshold: Fraction) -> Fraction:
        return 1 - build_threshold_product(normalized, threshold, l_max).trap_probability()

    masses: Dict[Fraction, Fraction] = {}
    covered = Fraction(0)
    batch = max(1, threads)
    for start in range(0, len(thresholds), batch):
        chunk = thresholds[start:start + batch]
        for threshold, probability in zip(chunk, ordered_map(tail, chunk, threads)):
            if covered < 1:
                masses[threshold] = probability - covered
                covered = probability
        if covered == 1:
            break
    if covered != 1:
        raise InternalSolverError(f"direct window tail mass ends at {covered} instead of 1")
    logger.debug("direct fixed distribution over %d thresholds", len(masses))

    distribution = ValueDistribution(masses).mapped(transform.denormalize)
    return AnalysisResult(
        objective=Objective(Kind.DIRECT_FIXED, l_max),
        value=distribution.expectation(),
        distribution=distribution,
        transform=transform,
        algorithm='threshold-product',
    )

# =============================================================================
# DIRECT FIXED WINDOW: PATH-CHAIN UNFOLDING
# =============================================================================

@dataclass(frozen=True)
class PathChain:
    """
    Chain whose states are the l_max-step paths of a chain, plus a root

    The root moves to each l_max-step path from the initial state with that
    path's probability; a path moves to its one-step shift. `labels` maps
    every non-root state to the window mean of its weights.
    """

    chain: MarkovChain
    root: int
    paths: Tuple[Tuple[int, ...], ...]
    labels: Dict[int, Fraction]


def _paths_from(mc: MarkovChain, origin: int, length: int):
    """(states, probability, weights) of every `length`-step path from `origin`"""
    partial = [((origin,), Fraction(1), ())]
    for _ in range(length):
        partial = [
            (states + (e.dst,), prob * e.prob, weights + (e.weight,))
            for states, prob, weights in partial
            for e in mc.successors[states[-1]]
        ]
    return partial


def build_path_chain(mc: MarkovChain, l_max: int) -> PathChain:
    cap = SOLVER_LIMITS['unfold_max_states']
    estimate = mc.num_states ** l_max
    if estimate > cap:
        raise ResourceLimitError(
            f"path unfolding needs up to |S|^l_max = {mc.num_states}^{l_max} = {estimate} states, cap is {cap}",
            size=estimate, cap=cap)

    index: Dict[Tuple[int, ...], int] = {}
    paths: List[Tuple[int, ...]] = []
    labels: Dict[int, Fraction] = {}
    weight_of = {(e.src, e.dst): e for e in mc.edges}
    frontier: List[Tuple[int, ...]] = []

    def intern(path: Tuple[int, ...]) -> int:
        if path not in index:
            index[path] = len(paths) + 1
            paths.append(path)
            weights = [weight_of[(u, v)].weight for u, v in zip(path, path[1:])]
            labels[index[path]] = window_mean_payoff(weights, l_max)
            frontier.append(path)
        return index[path]

    edges = [Edge(0, intern(states), prob, Fraction(0)) for states, prob, _ in _paths_from(mc, mc.initial, l_max)]
    while frontier:
        path = frontier.pop()
        source = index[path]
        for e in mc.successors[path[-1]]:
            edges.append(Edge(source, intern(path[1:] + (e.dst,)), e.prob, e.weight))

    names = ['init'] + [f"p({','.join(mc.states[s] for s in path)})" for path in paths]
    logger.debug("path chain for l_max=%d: %d states", l_max, len(names))
    chain = MarkovChain(states=tuple(names), initial=0, edges=tuple(edges))
    return PathChain(chain=chain, root=0, paths=tuple(paths), labels=labels)


def dirfixwmp_unfold(mc: MarkovChain, l_max: int) -> AnalysisResult:
    """
    Direct fixed window distribution through the path chain

    The value of a run is the least label it visits. For each label m in
    increasing order, Pr(value = m) is the probability of first hitting a
    label-m state while every earlier state carried a larger label, and of
    never reaching a smaller label afterwards.
    """
    unfolded = build_path_chain(mc, l_max)
    chain, labels = unfolded.chain, unfolded.labels
    masses: Dict[Fraction, Fraction] = {}
    for m in sorted(set(labels.values())):
        lower = {s for s, label in labels.items() if label < m}
        escape = reach_prob(chain, lower) if lower else {}
        boundary = {s: 1 - escape.get(s, Fraction(0)) for s, label in labels.items() if label == m}
        stay = {unfolded.root} | {s for s, label in labels.items() if label > m}
        masses[m] = expected_hit_value(chain, stay, boundary)[unfolded.root]

    distribution = ValueDistribution(masses)
    return AnalysisResult(
        objective=Objective(Kind.DIRECT_FIXED, l_max),
        value=distribution.expectation(),
        distribution=distribution,
        algorithm='path-unfold',
    )

# =============================================================================
# PROBABILISTIC GOOD WINDOWS
# =============================================================================

@dataclass(frozen=True)
class GoodWindowReport:
    masses: Dict[str, Fraction]
    satisfied: Dict[str, bool]
    holds_globally: bool


def check_alt_good_window(mc: MarkovChain, p, l_max: int, threshold) -> GoodWindowReport:
    """
    Probabilistic good-window check

    A state is satisfied when the l_max-step paths from it whose window
    mean-payoff reaches `threshold` carry probability at least `p`. The
    global verdict asks this of every state reachable from the initial one.
    """
    p, threshold = Fraction(p), Fraction(threshold)

    @lru_cache(maxsize=None)
    def good_mass(state: int, remaining: int, total: Fraction) -> Fraction:
        if remaining == 0:
            return Fraction(0)
        mass = Fraction(0)
        for e in mc.successors[state]:
            reduced = total + e.weight - threshold
            if reduced >= 0:
                mass += e.prob
            else:
                mass += e.prob * good_mass(e.dst, remaining - 1, reduced)
        return mass

    masses = {mc.states[s]: good_mass(s, l_max, Fraction(0)) for s in range(mc.num_states)}
    satisfied = {name: mass >= p for name, mass in masses.items()}
    verdict = all(satisfied[mc.states[s]] for s in reachable_states(mc))
    return GoodWindowReport(masses=masses, satisfied=satisfied, holds_globally=verdict)
