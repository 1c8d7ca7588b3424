"""
Graph analysis for weighted Markov chains and MDPs
Bottom SCCs, maximal end components, exact reachability probabilities
and Karp's minimum mean cycle
"""

import logging
from collections import deque
from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property
from typing import Dict, FrozenSet, Hashable, Iterable, List, Optional, Sequence, Set, Tuple

import networkx as nx
import numpy as np

from src.models import MarkovChain, Mdp
from src.utils.error_handler import InternalSolverError, PreconditionError

logger = logging.getLogger(__name__)

WeightedEdge = Tuple[Hashable, Hashable, Fraction]


@dataclass(frozen=True)
class BsccPartition:
    bsccs: Tuple[FrozenSet[int], ...]
    transient: FrozenSet[int]
    reach_probabilities: Tuple[Fraction, ...]

    def __iter__(self):
        return iter(zip(self.bsccs, self.reach_probabilities))


@dataclass(frozen=True)
class EndComponent:
    """Sub-MDP (T, A): states T and, per state, the allowed action ids"""

    states: FrozenSet[int]
    actions: Tuple[Tuple[int, Tuple[int, ...]], ...]

    @cached_property
    def allowed(self) -> Dict[int, FrozenSet[int]]:
        return {s: frozenset(acts) for s, acts in self.actions}

    def contains_choice(self, state: int, action: int) -> bool:
        return state in self.states and action in self.allowed.get(state, ())


@dataclass(frozen=True)
class MecPartition:
    mecs: Tuple[EndComponent, ...]

    def __iter__(self):
        return iter(self.mecs)

    def __len__(self):
        return len(self.mecs)

    def component_of(self) -> Dict[int, int]:
        return {s: i for i, mec in enumerate(self.mecs) for s in mec.states}

# =============================================================================
# STRUCTURE
# =============================================================================

def chain_digraph(mc: MarkovChain, states: Optional[Iterable[int]] = None) -> nx.DiGraph:
    """Underlying weighted graph of a chain, optionally restricted to `states`"""
    keep = set(range(mc.num_states)) if states is None else set(states)
    graph = nx.DiGraph()
    graph.add_nodes_from(sorted(keep))
    for e in mc.edges:
        if e.src in keep and e.dst in keep:
            graph.add_edge(e.src, e.dst, weight=e.weight, prob=e.prob)
    return graph


def induced_edges(mc: MarkovChain, states: Iterable[int]) -> List[Tuple[int, int, Fraction]]:
    """(src, dst, weight) of the edges leaving `states` (all internal for a closed set)"""
    keep = set(states)
    return [(e.src, e.dst, e.weight) for e in mc.edges if e.src in keep]


def reachable_states(mc: MarkovChain, source: Optional[int] = None) -> Set[int]:
    source = mc.initial if source is None else source
    graph = chain_digraph(mc)
    return {source} | nx.descendants(graph, source)


def bsccs(mc: MarkovChain) -> BsccPartition:
    """
    Bottom strongly connected components with their reachability probabilities

    Args:
        mc: A validated Markov chain

    Returns:
        BsccPartition ordered by smallest member state
    """
    graph = chain_digraph(mc)
    condensed = nx.condensation(graph)
    bottoms = sorted(
        (frozenset(condensed.nodes[c]['members']) for c in condensed.nodes if condensed.out_degree(c) == 0),
        key=min,
    )
    probabilities = tuple(reach_prob(mc, b)[mc.initial] for b in bottoms)
    if sum(probabilities, Fraction(0)) != 1:
        raise InternalSolverError(f"BSCC reachability sums to {sum(probabilities)} instead of 1")
    members = frozenset().union(*bottoms)
    logger.debug("found %d BSCCs over %d states", len(bottoms), mc.num_states)
    return BsccPartition(
        bsccs=tuple(bottoms),
        transient=frozenset(range(mc.num_states)) - members,
        reach_probabilities=probabilities,
    )


def mecs(mdp: Mdp) -> MecPartition:
    """
    Maximal end components by iterated SCC decomposition and action pruning

    An action survives only while all its successors stay in the SCC of its
    state; states without surviving actions are removed. The loop stops when
    a pass prunes nothing.
    """
    remaining: Dict[int, Set[int]] = {s: set(mdp.actions_of(s)) for s in range(mdp.num_states)}
    while True:
        graph = nx.DiGraph()
        graph.add_nodes_from(remaining)
        for s, acts in remaining.items():
            for a in acts:
                graph.add_edges_from((s, t) for t in mdp.post(s, a) if t in remaining)
        component = {}
        for i, scc in enumerate(nx.strongly_connected_components(graph)):
            for s in scc:
                component[s] = i

        changed = False
        for s, acts in remaining.items():
            for a in list(acts):
                if any(component.get(t) != component[s] for t in mdp.post(s, a)):
                    acts.discard(a)
                    changed = True
        emptied = [s for s, acts in remaining.items() if not acts]
        for s in emptied:
            del remaining[s]
            changed = True
        if not changed:
            break

    grouped: Dict[int, List[int]] = {}
    for s in remaining:
        grouped.setdefault(component[s], []).append(s)
    result = []
    for states in grouped.values():
        states = sorted(states)
        result.append(EndComponent(
            states=frozenset(states),
            actions=tuple((s, tuple(sorted(remaining[s]))) for s in states),
        ))
    result.sort(key=lambda mec: min(mec.states))
    logger.debug("found %d MECs over %d states", len(result), mdp.num_states)
    return MecPartition(tuple(result))

# =============================================================================
# LINEAR SYSTEMS & REACHABILITY
# =============================================================================

def solve_linear_system(matrix: Sequence[Sequence[Fraction]], rhs: Sequence[Fraction]) -> List[Fraction]:
    """
    Exact Gauss-Jordan elimination over rationals

    Args:
        matrix: n x n coefficients
        rhs: n right-hand side values

    Returns:
        List of n Fractions solving matrix . x = rhs
    """
    n = len(rhs)
    if n == 0:
        return []
    a = np.empty((n, n + 1), dtype=object)
    for i in range(n):
        for j in range(n):
            a[i, j] = Fraction(matrix[i][j])
        a[i, n] = Fraction(rhs[i])

    for col in range(n):
        pivot = next((r for r in range(col, n) if a[r, col] != 0), None)
        if pivot is None:
            raise InternalSolverError("singular linear system after qualitative preprocessing")
        if pivot != col:
            a[[col, pivot]] = a[[pivot, col]]
        a[col, :] = a[col, :] / a[col, col]
        for r in range(n):
            if r != col and a[r, col] != 0:
                a[r, :] = a[r, :] - a[r, col] * a[col, :]
    return [a[i, n] for i in range(n)]


def _predecessors(mc: MarkovChain) -> List[List[int]]:
    preds: List[List[int]] = [[] for _ in range(mc.num_states)]
    for e in mc.edges:
        preds[e.dst].append(e.src)
    return preds


def _backward_closure(preds: List[List[int]], seeds: Iterable[int], through: Set[int]) -> Set[int]:
    """Seeds plus every state in `through` with a path into the seeds via `through`"""
    seen = set(seeds)
    queue = deque(seen)
    while queue:
        t = queue.popleft()
        for s in preds[t]:
            if s not in seen and s in through:
                seen.add(s)
                queue.append(s)
    return seen


def until_prob(mc: MarkovChain, stay: Iterable[int], target: Iterable[int]) -> Dict[int, Fraction]:
    """
    Pr_s(stay U target) for every state s

    Prob-0 and prob-1 states are fixed graph-theoretically; the rest are
    solved exactly.
    """
    target = set(target)
    stay = set(stay)
    states = set(range(mc.num_states))
    preds = _predecessors(mc)
    passing = stay - target

    can_reach = _backward_closure(preds, target, passing)
    never = states - can_reach
    maybe = _backward_closure(preds, never, passing) & (can_reach - target)
    surely = can_reach - maybe

    result = {s: Fraction(0) for s in never}
    result.update({s: Fraction(1) for s in surely})
    result.update(_solve_unknowns(mc, sorted(maybe), result))
    return result


def reach_prob(mc: MarkovChain, target: Iterable[int]) -> Dict[int, Fraction]:
    """Pr_s(eventually target) for every state s"""
    return until_prob(mc, range(mc.num_states), target)


def expected_hit_value(mc: MarkovChain, stay: Iterable[int], boundary: Dict[int, Fraction]) -> Dict[int, Fraction]:
    """
    Expected boundary value collected when first leaving `stay`

    Runs that exit into a state outside `stay` and outside the boundary, or
    never leave, contribute 0.
    """
    boundary = {s: Fraction(v) for s, v in boundary.items()}
    stay = set(stay) - set(boundary)
    states = set(range(mc.num_states))
    preds = _predecessors(mc)

    can_reach = _backward_closure(preds, boundary, stay)
    result = {s: Fraction(0) for s in states - can_reach}
    result.update(boundary)
    result.update(_solve_unknowns(mc, sorted(can_reach & stay), result))
    return result


def _solve_unknowns(mc: MarkovChain, unknown: List[int], known: Dict[int, Fraction]) -> Dict[int, Fraction]:
    """x_s = sum_t P(s,t) x_t over `unknown`, with `known` values as constants"""
    if not unknown:
        return {}
    position = {s: i for i, s in enumerate(unknown)}
    n = len(unknown)
    matrix = [[Fraction(0)] * n for _ in range(n)]
    rhs = [Fraction(0)] * n
    for s, i in position.items():
        matrix[i][i] += 1
        for e in mc.successors[s]:
            if e.dst in position:
                matrix[i][position[e.dst]] -= e.prob
            else:
                rhs[i] += e.prob * known[e.dst]
    solution = solve_linear_system(matrix, rhs)
    return {s: solution[i] for s, i in position.items()}

# =============================================================================
# MEAN CYCLES
# =============================================================================

def min_mean_cycle(edges: Sequence[WeightedEdge]) -> Fraction:
    """
    Karp's minimum cycle mean on a strongly connected weighted graph

    Args:
        edges: (src, dst, weight) triples; every node must lie on a cycle

    Returns:
        Fraction: minimum mean weight over all cycles
    """
    edges = [(u, v, Fraction(w)) for u, v, w in edges]
    if not edges:
        raise PreconditionError("minimum mean cycle needs at least one edge")
    graph = nx.DiGraph()
    graph.add_edges_from((u, v) for u, v, _ in edges)
    if not nx.is_strongly_connected(graph):
        raise PreconditionError("minimum mean cycle needs a strongly connected graph")

    nodes = sorted(graph.nodes, key=str)
    n = len(nodes)
    # walks[k][v]: least weight of a k-edge walk from nodes[0] to v
    walks: List[Dict[Hashable, Fraction]] = [{nodes[0]: Fraction(0)}]
    for _ in range(n):
        previous, current = walks[-1], {}
        for u, v, w in edges:
            if u in previous:
                candidate = previous[u] + w
                if v not in current or candidate < current[v]:
                    current[v] = candidate
        walks.append(current)

    best = None
    for v, total in walks[n].items():
        worst = max((total - walks[k][v]) / (n - k) for k in range(n) if v in walks[k])
        if best is None or worst < best:
            best = worst
    return best
