"""
Brute-force oracles
Exhaustive reference computations used to cross-check the solvers. None of
them imports solver code; recurrences, traversals and linear solves are
written out separately.
"""

import itertools
import logging
from fractions import Fraction
from math import lcm
from typing import Dict, FrozenSet, Hashable, List, Sequence, Set, Tuple

import networkx as nx

from config.settings import ORACLE_LIMITS
from src.models import MarkovChain, Mdp, TwoPlayerGame
from src.utils.error_handler import InternalSolverError, PreconditionError, ResourceLimitError

logger = logging.getLogger(__name__)

WeightedEdge = Tuple[Hashable, Hashable, Fraction]


def _adjacency(edges: Sequence[WeightedEdge]) -> Dict[Hashable, List[Tuple[Hashable, Fraction]]]:
    out: Dict[Hashable, List[Tuple[Hashable, Fraction]]] = {}
    for u, v, w in edges:
        out.setdefault(u, []).append((v, Fraction(w)))
        out.setdefault(v, [])
    return out


def _weight_sequences(adjacency, origin, length: int, budget: List[int]):
    """Every weight sequence of a `length`-step walk from origin"""
    if length == 0:
        yield ()
        return
    for v, w in adjacency[origin]:
        for rest in _weight_sequences(adjacency, v, length - 1, budget):
            budget[0] -= 1
            if budget[0] < 0:
                raise ResourceLimitError("oracle path enumeration over budget", cap=ORACLE_LIMITS['max_paths'])
            yield (w,) + rest


def _best_prefix_mean(weights: Sequence[Fraction]) -> Fraction:
    best, running = None, Fraction(0)
    for k, w in enumerate(weights, start=1):
        running += w
        if best is None or running / k > best:
            best = running / k
    return best

# =============================================================================
# MARKOV CHAIN ORACLES
# =============================================================================

def brute_m_bscc(edges: Sequence[WeightedEdge], l_max: int) -> Fraction:
    """Least window mean over every state and every l_max-step path, by enumeration"""
    adjacency = _adjacency(edges)
    budget = [ORACLE_LIMITS['max_paths']]
    return min(
        _best_prefix_mean(seq)
        for s in adjacency
        for seq in _weight_sequences(adjacency, s, l_max, budget)
    )


def brute_good_states(edges: Sequence[WeightedEdge], l_max: int) -> FrozenSet[Hashable]:
    """States whose every l_max-step path reaches a non-negative prefix sum"""
    adjacency = _adjacency(edges)
    budget = [ORACLE_LIMITS['max_paths']]
    good = set()
    for s in adjacency:
        if all(max(itertools.accumulate(seq)) >= 0 for seq in _weight_sequences(adjacency, s, l_max, budget)):
            good.add(s)
    return frozenset(good)


def enum_elementary_cycles(edges: Sequence[WeightedEdge]) -> List[List[Hashable]]:
    """All elementary cycles (Johnson's enumeration), each as its node list"""
    graph = nx.DiGraph()
    graph.add_edges_from((u, v) for u, v, _ in edges)
    return [list(cycle) for cycle in nx.simple_cycles(graph)]


def brute_c_bscc(edges: Sequence[WeightedEdge]) -> Fraction:
    """Least mean over the elementary cycles"""
    weight = {(u, v): Fraction(w) for u, v, w in edges}
    means = []
    for cycle in enum_elementary_cycles(edges):
        hops = list(zip(cycle, cycle[1:] + cycle[:1]))
        means.append(sum(weight[h] for h in hops) / len(hops))
    return min(means)


def brute_dirfix_distribution(mc: MarkovChain, l_max: int) -> Dict[Fraction, Fraction]:
    """
    Direct fixed window distribution of a chain that is acyclic until absorbing self-loops

    Enumerates every path from the initial state to an absorbing state,
    pads it with l_max turns of the absorbing loop and takes the least
    window mean over the positions up to the loop.
    """
    out: Dict[int, List[Tuple[int, Fraction, Fraction]]] = {s: [] for s in range(mc.num_states)}
    for e in mc.edges:
        out[e.src].append((e.dst, e.prob, e.weight))
    absorbing = {s for s, edges in out.items() if len(edges) == 1 and edges[0][0] == s}

    law: Dict[Fraction, Fraction] = {}
    stack = [(mc.initial, Fraction(1), ())]
    while stack:
        s, prob, weights = stack.pop()
        if len(weights) > mc.num_states:
            raise PreconditionError("chain has a cycle outside its absorbing self-loops")
        if s in absorbing:
            padded = weights + (out[s][0][2],) * l_max
            value = min(_best_prefix_mean(padded[i:i + l_max]) for i in range(len(weights) + 1))
            law[value] = law.get(value, Fraction(0)) + prob
            continue
        for dst, p, w in out[s]:
            stack.append((dst, prob * p, weights + (w,)))
    return law

# =============================================================================
# GAME ORACLES
# =============================================================================

def _window_means(weights: Sequence[int], l_max: int) -> List[Fraction]:
    low, high = min(weights), max(weights)
    return sorted({Fraction(p, q) for q in range(1, l_max + 1) for p in range(q * low, q * high + 1)})


def _safety_winners(game: TwoPlayerGame, reduced: Dict[Tuple[int, int], int], l_max: int) -> Set[int]:
    """Vertices v with (v, 0, 0) outside the Player-2 attractor of the failed-window sink"""
    cap = ORACLE_LIMITS['max_product_states']
    successors: Dict[Tuple[int, int, int], List] = {}
    pending = [(v, 0, 0) for v in range(game.num_vertices)]
    while pending:
        node = pending.pop()
        if node in successors:
            continue
        if len(successors) >= cap:
            raise ResourceLimitError("oracle safety product over budget", size=len(successors), cap=cap)
        v, age, deficit = node
        targets = []
        for e in game.edges:
            if e.src != v:
                continue
            left = deficit - reduced[(e.src, e.dst)]
            if left <= 0:
                target = (e.dst, 0, 0)
            elif age == l_max - 1:
                target = 'sink'
            else:
                target = (e.dst, age + 1, left)
            targets.append(target)
            if target != 'sink':
                pending.append(target)
        successors[node] = targets

    attractor = {'sink'}
    grown = True
    while grown:
        grown = False
        for node, targets in successors.items():
            if node in attractor:
                continue
            owner = game.owners[node[0]]
            hit = [t in attractor for t in targets]
            if (owner == 2 and any(hit)) or (owner == 1 and all(hit)):
                attractor.add(node)
                grown = True
    return {v for v in range(game.num_vertices) if (v, 0, 0) not in attractor}


def brute_direct_window_game_value(game: TwoPlayerGame, l_max: int) -> Dict[int, Fraction]:
    """
    Direct window value of every vertex from explicit safety games

    For each candidate window mean a/b, solves the safety game on
    (vertex, window age, deficit) under weights b*w - a and records the
    largest candidate each vertex still wins.
    """
    scale = lcm(*(e.weight.denominator for e in game.edges))
    ints = {(e.src, e.dst): int(e.weight * scale) for e in game.edges}
    values: Dict[int, Fraction] = {}
    for threshold in _window_means(list(ints.values()), l_max):
        a, b = threshold.numerator, threshold.denominator
        reduced = {edge: b * w - a for edge, w in ints.items()}
        for v in _safety_winners(game, reduced, l_max):
            values[v] = threshold / scale
    return values


def _positional_strategies(game: TwoPlayerGame, player: int):
    owned = [v for v in range(game.num_vertices) if game.owners[v] == player]
    options = [[e.dst for e in game.edges if e.src == v] for v in owned]
    for picks in itertools.product(*options):
        yield dict(zip(owned, picks))


def _cycle_mean_from(start: int, move: Dict[int, int], weight: Dict[Tuple[int, int], Fraction]) -> Fraction:
    order: Dict[int, int] = {}
    trail = []
    v = start
    while v not in order:
        order[v] = len(trail)
        trail.append(v)
        v = move[v]
    cycle = trail[order[v]:]
    hops = list(zip(cycle, cycle[1:] + [v]))
    return sum(weight[h] for h in hops) / len(hops)


def brute_mean_payoff_game_value(game: TwoPlayerGame) -> Dict[int, Fraction]:
    """
    Mean-payoff value by enumerating positional strategy pairs

    Computes both min-max and max-min and insists they agree.
    """
    weight = {(e.src, e.dst): e.weight for e in game.edges}
    first = list(_positional_strategies(game, 1))
    second = list(_positional_strategies(game, 2))
    cap = ORACLE_LIMITS['max_strategy_pairs']
    if len(first) * len(second) > cap:
        raise ResourceLimitError("too many positional strategy pairs", size=len(first) * len(second), cap=cap)

    outcome = {}
    for i, s1 in enumerate(first):
        for j, s2 in enumerate(second):
            move = {**s1, **s2}
            for v in range(game.num_vertices):
                outcome[(i, j, v)] = _cycle_mean_from(v, move, weight)

    values = {}
    for v in range(game.num_vertices):
        min_max = min(max(outcome[(i, j, v)] for i in range(len(first))) for j in range(len(second)))
        max_min = max(min(outcome[(i, j, v)] for j in range(len(second))) for i in range(len(first)))
        if min_max != max_min:
            raise InternalSolverError(f"positional determinacy fails at vertex {v}: {min_max} != {max_min}")
        values[v] = min_max
    return values

# =============================================================================
# MDP ORACLES
# =============================================================================

def naive_sccs(nodes: Sequence[int], successors: Dict[int, Set[int]]) -> List[FrozenSet[int]]:
    """SCCs as intersections of forward and backward reachability"""
    def reach(start: int, step) -> Set[int]:
        seen, todo = {start}, [start]
        while todo:
            for t in step(todo.pop()):
                if t not in seen:
                    seen.add(t)
                    todo.append(t)
        return seen

    predecessors: Dict[int, Set[int]] = {v: set() for v in nodes}
    for u in nodes:
        for v in successors[u]:
            predecessors[v].add(u)
    components, assigned = [], set()
    for v in nodes:
        if v in assigned:
            continue
        component = frozenset(reach(v, successors.__getitem__) & reach(v, predecessors.__getitem__))
        assigned |= component
        components.append(component)
    return components


def naive_mecs(mdp: Mdp) -> List[Tuple[FrozenSet[int], Dict[int, FrozenSet[int]]]]:
    """
    MECs by the plain fixed point: drop (state, action) pairs whose
    successors leave the candidate SCC, drop states without pairs, repeat
    """
    pairs = {(c.state, c.action) for c in mdp.choices}
    post = {(c.state, c.action): {o.dst for o in c.outcomes} for c in mdp.choices}
    while True:
        states = sorted({s for s, _ in pairs})
        successors = {s: set() for s in states}
        for s, a in pairs:
            successors[s] |= {t for t in post[(s, a)] if t in successors}
        component = {}
        for comp in naive_sccs(states, successors):
            for s in comp:
                component[s] = comp
        kept = {(s, a) for s, a in pairs if all(component.get(t) is component[s] for t in post[(s, a)])}
        if kept == pairs:
            break
        pairs = kept
    result = []
    for comp in {component[s] for s, _ in pairs}:
        actions = {s: frozenset(a for t, a in pairs if t == s) for s in comp}
        result.append((comp, actions))
    return sorted(result, key=lambda item: min(item[0]))


def _exact_solve(matrix: List[List[Fraction]], rhs: List[Fraction]) -> List[Fraction]:
    n = len(rhs)
    rows = [row[:] + [b] for row, b in zip(matrix, rhs)]
    for col in range(n):
        pivot = next(r for r in range(col, n) if rows[r][col] != 0)
        rows[col], rows[pivot] = rows[pivot], rows[col]
        for r in range(n):
            if r != col and rows[r][col] != 0:
                factor = rows[r][col] / rows[col][col]
                rows[r] = [x - factor * y for x, y in zip(rows[r], rows[col])]
    return [rows[i][n] / rows[i][i] for i in range(n)]


def _chain_expectation(n: int, initial: int, edges: List[Tuple[int, int, Fraction, Fraction]]) -> Fraction:
    successors = {s: set() for s in range(n)}
    for u, v, _, _ in edges:
        successors[u].add(v)
    components = naive_sccs(list(range(n)), successors)
    bottoms = [c for c in components if all(successors[s] <= c for s in c)]
    in_bottom = {s for c in bottoms for s in c}
    transient = [s for s in range(n) if s not in in_bottom]
    position = {s: i for i, s in enumerate(transient)}

    total = Fraction(0)
    for bottom in bottoms:
        constants = {w for u, _, _, w in edges if u in bottom}
        if len(constants) != 1:
            raise PreconditionError("oracle expects constant weights inside bottom components")
        constant = constants.pop()
        if initial in bottom:
            reach = Fraction(1)
        elif initial not in position:
            reach = Fraction(0)
        else:
            matrix = [[Fraction(int(i == j)) for j in range(len(transient))] for i in range(len(transient))]
            rhs = [Fraction(0)] * len(transient)
            for u, v, p, _ in edges:
                if u in position:
                    if v in position:
                        matrix[position[u]][position[v]] -= p
                    elif v in bottom:
                        rhs[position[u]] += p
            reach = _exact_solve(matrix, rhs)[position[initial]]
        total += reach * constant
    return total


def brute_expected_const_mec(mdp: Mdp) -> Fraction:
    """Best expected mean-payoff over memoryless deterministic strategies"""
    options = [mdp.actions_of(s) for s in range(mdp.num_states)]
    count = 1
    for acts in options:
        count *= len(acts)
    if count > ORACLE_LIMITS['max_strategy_pairs']:
        raise ResourceLimitError("too many memoryless strategies", size=count, cap=ORACLE_LIMITS['max_strategy_pairs'])
    best = None
    for picks in itertools.product(*options):
        edges = [(s, o.dst, o.prob, o.weight) for s, a in enumerate(picks) for o in mdp.outcomes(s, a)]
        value = _chain_expectation(mdp.num_states, mdp.initial, edges)
        if best is None or value > best:
            best = value
    return best
