"""
Two-player game solvers
MDP-to-game construction, direct window games and exact mean-payoff game values
"""

import logging
from dataclasses import dataclass
from fractions import Fraction
from math import ceil, floor, lcm
from typing import Dict, FrozenSet, Iterable, List, Optional, Set, Tuple

import numpy as np
from tqdm import tqdm

from config.settings import SOLVER_LIMITS
from src.mc_window import possible_values
from src.models import GameEdge, Mdp, TwoPlayerGame
from src.utils.error_handler import InternalSolverError, ResourceLimitError

logger = logging.getLogger(__name__)

PLAYER1 = 1
PLAYER2 = 2


@dataclass(frozen=True)
class GameFromMdp:
    """
    Game G_Gamma of an MDP

    Player 1 picks an action at state vertices (weight 0 edges); Player 2
    picks the successor at (state, action) vertices and collects the
    transition weight. Every MDP path of n steps maps to a game path of 2n
    steps with half the mean.
    """

    game: TwoPlayerGame
    state_vertex: Dict[int, int]
    choice_vertex: Dict[Tuple[int, int], int]

    @property
    def state_vertices(self) -> List[int]:
        return [self.state_vertex[s] for s in sorted(self.state_vertex)]


def mdp_to_game(mdp: Mdp) -> GameFromMdp:
    names = list(mdp.states)
    owners = [PLAYER1] * mdp.num_states
    state_vertex = {s: s for s in range(mdp.num_states)}
    choice_vertex: Dict[Tuple[int, int], int] = {}
    edges: List[GameEdge] = []
    for choice in sorted(mdp.choices, key=lambda c: (c.state, c.action)):
        vertex = len(names)
        names.append(f"{mdp.states[choice.state]}[{mdp.actions[choice.action]}]")
        owners.append(PLAYER2)
        choice_vertex[(choice.state, choice.action)] = vertex
        edges.append(GameEdge(choice.state, vertex, Fraction(0)))
        edges.extend(GameEdge(vertex, o.dst, o.weight) for o in choice.outcomes)
    game = TwoPlayerGame(vertices=tuple(names), owners=tuple(owners), initial=mdp.initial, edges=tuple(edges))
    return GameFromMdp(game=game, state_vertex=state_vertex, choice_vertex=choice_vertex)


def _scaled_edges(game: TwoPlayerGame) -> Tuple[List[Tuple[int, int, int]], int]:
    scale = lcm(*(e.weight.denominator for e in game.edges))
    return [(e.src, e.dst, int(e.weight * scale)) for e in game.edges], scale

# =============================================================================
# DIRECT WINDOW GAMES
# =============================================================================

def _window_table(owners, edges, l_max: int, vertices: Iterable[int]) -> Dict[int, Fraction]:
    table = {v: 0 for v in vertices}
    for _ in range(l_max):
        current: Dict[int, Fraction] = {}
        for u, v, w in edges:
            candidate = max(w, w + table[v])
            if u not in current:
                current[u] = candidate
            elif owners[u] == PLAYER1:
                current[u] = max(current[u], candidate)
            else:
                current[u] = min(current[u], candidate)
        table = current
    return table


def good_win(game: TwoPlayerGame, l_max: int) -> Tuple[Dict[int, Fraction], FrozenSet[int]]:
    """
    Window total-payoff Player 1 can guarantee within l_max steps

    Returns:
        (table, good) where table[v] = C_l_max(v) and good = {v : C_l_max(v) >= 0}
    """
    edges = [(e.src, e.dst, e.weight) for e in game.edges]
    table = _window_table(game.owners, edges, l_max, range(game.num_vertices))
    return table, frozenset(v for v, value in table.items() if value >= 0)


def _restrict(game_owners, successors: Dict[int, List[int]], keep: Set[int]) -> Set[int]:
    """Largest subset where Player 1 can stay and Player 2 cannot leave"""
    keep = set(keep)
    changed = True
    while changed:
        changed = False
        for v in list(keep):
            targets = successors[v]
            if game_owners[v] == PLAYER1:
                drop = not any(t in keep for t in targets)
            else:
                drop = not all(t in keep for t in targets)
            if drop:
                keep.discard(v)
                changed = True
    return keep


def _direct_winning(owners, edges, num_vertices: int, l_max: int) -> FrozenSet[int]:
    successors: Dict[int, List[int]] = {v: [] for v in range(num_vertices)}
    for u, v, _ in edges:
        successors[u].append(v)
    winning = set(range(num_vertices))
    while True:
        region = _restrict(owners, successors, winning)
        if not region:
            return frozenset()
        inside = [(u, v, w) for u, v, w in edges if u in region and v in region]
        table = _window_table(owners, inside, l_max, region)
        shrunk = {v for v in region if table[v] >= 0}
        if shrunk == winning:
            return frozenset(winning)
        winning = shrunk


def direct_fwmp_winning(game: TwoPlayerGame, l_max: int) -> FrozenSet[int]:
    """
    Vertices from which Player 1 closes every window within l_max steps

    Greatest fixpoint: restrict the game to the candidate set, keep the
    vertices with a non-negative good-window table there, repeat until stable.
    """
    edges = [(e.src, e.dst, e.weight) for e in game.edges]
    return _direct_winning(game.owners, edges, game.num_vertices, l_max)


@dataclass(frozen=True)
class WindowGameValues:
    per_vertex: Dict[int, Fraction]
    best: Fraction

    def at(self, vertex: int) -> Fraction:
        return self.per_vertex[vertex]


def max_direct_window_value(game: TwoPlayerGame, l_max: int,
                            vertices: Optional[Iterable[int]] = None) -> WindowGameValues:
    """
    Direct window value of every vertex

    The value of v is the largest window mean lambda such that v wins the
    direct window game on weights w - lambda. Winning sets shrink as lambda
    grows, so each vertex is a binary search over the finite set of window
    means; winning sets are memoized per threshold.

    Args:
        game: Two-player game
        l_max: Window length
        vertices: Vertices whose value is needed (all by default); `best` is their max

    Returns:
        WindowGameValues
    """
    scaled, scale = _scaled_edges(game)
    weights = [w for _, _, w in scaled]
    candidates = possible_values(max(weights), l_max, min(weights))
    memo: Dict[Fraction, FrozenSet[int]] = {}

    def winning(threshold: Fraction) -> FrozenSet[int]:
        if threshold not in memo:
            a, b = threshold.numerator, threshold.denominator
            reduced = [(u, v, b * w - a) for u, v, w in scaled]
            memo[threshold] = _direct_winning(game.owners, reduced, game.num_vertices, l_max)
        return memo[threshold]

    targets = list(range(game.num_vertices)) if vertices is None else list(vertices)
    per_vertex: Dict[int, Fraction] = {}
    for vertex in targets:
        lo, hi = 0, len(candidates) - 1
        while lo < hi:
            mid = (lo + hi + 1) // 2
            if vertex in winning(candidates[mid]):
                lo = mid
            else:
                hi = mid - 1
        per_vertex[vertex] = candidates[lo] / scale
    logger.debug("direct window values for %d vertices from %d winning-set solves", len(per_vertex), len(memo))
    return WindowGameValues(per_vertex=per_vertex, best=max(per_vertex.values()))

# =============================================================================
# MEAN-PAYOFF GAMES
# =============================================================================

def _snap(total: int, steps: int, radius: int, n: int) -> Fraction:
    """The unique p/q with q <= n within radius/steps of total/steps"""
    lower, upper = Fraction(total - radius, steps), Fraction(total + radius, steps)
    found = set()
    for q in range(1, n + 1):
        for p in range(ceil(lower * q), floor(upper * q) + 1):
            found.add(Fraction(p, q))
    if len(found) != 1:
        raise InternalSolverError(
            f"value snapping found {len(found)} candidates in [{lower}, {upper}] with denominator <= {n}")
    return found.pop()


def mean_payoff_game_value(game: TwoPlayerGame, show_progress: bool = False) -> Dict[int, Fraction]:
    """
    Exact mean-payoff value of every vertex

    Runs k = 4 n^3 W rounds of finite-horizon value iteration, where v_k(v)
    is the best total Player 1 can force in k steps, then snaps v_k / k to
    the unique rational with denominator at most n within 2 n W / k.

    Args:
        game: Two-player game
        show_progress: tqdm progress bar over the rounds

    Returns:
        Dict vertex -> value
    """
    n = game.num_vertices
    scaled, scale = _scaled_edges(game)
    bound = max(abs(w) for _, _, w in scaled)
    if bound == 0:
        return {v: Fraction(0) for v in range(n)}

    steps = 4 * n ** 3 * bound
    cap = SOLVER_LIMITS['mean_payoff_max_iterations']
    if steps > cap:
        raise ResourceLimitError(
            f"instance too large for exact mean-payoff solve: {steps} value-iteration rounds, cap is {cap}",
            size=steps, cap=cap)

    dtype = object if steps * bound >= 2 ** 62 else np.int64
    order = sorted(range(len(scaled)), key=lambda i: scaled[i][0])
    src = np.array([scaled[i][0] for i in order])
    dst = np.array([scaled[i][1] for i in order])
    weight = np.array([scaled[i][2] for i in order], dtype=dtype)
    starts = np.searchsorted(src, np.arange(n))
    maximizer = np.array([owner == PLAYER1 for owner in game.owners])

    values = np.zeros(n, dtype=dtype)
    for _ in tqdm(range(steps), desc="mean-payoff rounds", disable=not show_progress):
        candidates = weight + values[dst]
        values = np.where(
            maximizer,
            np.maximum.reduceat(candidates, starts),
            np.minimum.reduceat(candidates, starts),
        )

    radius = 2 * n * bound
    result = {v: _snap(int(values[v]), steps, radius, n) / scale for v in range(n)}
    logger.debug("mean-payoff values after %d rounds over %d vertices", steps, n)
    return result
