"""
Model generators
Worked-example fixtures, seeded random models and the reset constructions
that turn a game into an MDP with a known value
"""

import logging
from fractions import Fraction
from typing import Dict, List, Optional, Tuple

import numpy as np

from src.models import Choice, Edge, GameEdge, MarkovChain, Mdp, Model, Outcome, TwoPlayerGame
from src.utils.error_handler import ValidationError

logger = logging.getLogger(__name__)

# =============================================================================
# FIXTURES
# =============================================================================

def two_bscc_chain() -> MarkovChain:
    """Two BSCCs reached with probability 1/2 each; fixed window value 3/2 at l_max=2"""
    return MarkovChain.from_named_edges('s0', [
        ('s0', 's1', '1/2', 0),
        ('s0', 's3', '1/2', 0),
        ('s1', 's1', 1, 2),
        ('s3', 's3', '1/2', 3),
        ('s3', 's4', '1/2', 2),
        ('s4', 's3', '1/2', 0),
        ('s4', 's4', '1/2', 1),
    ])


def _cycle(weights) -> MarkovChain:
    n = len(weights)
    return MarkovChain.from_named_edges('s0', [(f"s{i}", f"s{(i + 1) % n}", 1, w) for i, w in enumerate(weights)])


def plain_cycle_chain() -> MarkovChain:
    return _cycle([2, 5, 4])


def shifted_cycle_chain() -> MarkovChain:
    """The weight-2,5,4 cycle reduced by 3"""
    return _cycle([-1, 2, 1])


def zero_gap_chain() -> MarkovChain:
    """Fixed window value -1/l_max for every l_max while the bounded value is 0"""
    return MarkovChain.from_named_edges('s0', [
        ('s0', 's1', 1, -1),
        ('s1', 's1', '1/2', 0),
        ('s1', 's0', '1/2', 1),
    ])


def coin_choice_mdp() -> Mdp:
    """Safe action to a value-1 MEC or a coin flip between value-0 and value-5 MECs"""
    return Mdp.from_named_transitions('init', [
        ('init', 'safe', 'one', 1, 0),
        ('init', 'coin', 'zero', '1/2', 0),
        ('init', 'coin', 'five', '1/2', 0),
        ('one', 'stay', 'one', 1, 1),
        ('zero', 'stay', 'zero', 1, 0),
        ('five', 'stay', 'five', 1, 5),
    ])

# =============================================================================
# RANDOM MODELS
# =============================================================================

def _split(rng: np.random.Generator, parts: int) -> List[Fraction]:
    """Random positive rationals summing to exactly 1"""
    shares = [int(x) for x in rng.integers(1, 5, size=parts)]
    total = sum(shares)
    return [Fraction(c, total) for c in shares]


def _targets(rng: np.random.Generator, n: int, density: float, forced: Optional[int] = None) -> List[int]:
    count = 1 + int(rng.binomial(n - 1, density)) if n > 1 else 1
    chosen = set(int(t) for t in rng.choice(n, size=count, replace=False))
    if forced is not None:
        chosen.add(forced)
    return sorted(chosen)


def _weight(rng: np.random.Generator, min_weight: int, max_weight: int) -> int:
    return int(rng.integers(min_weight, max_weight + 1))


def random_chain(num_states: int, max_weight: int, seed: int, density: float = 0.4,
                 min_weight: int = 0) -> MarkovChain:
    rng = np.random.default_rng(seed)
    edges = []
    for s in range(num_states):
        targets = _targets(rng, num_states, density)
        for t, p in zip(targets, _split(rng, len(targets))):
            edges.append(Edge(s, t, p, Fraction(_weight(rng, min_weight, max_weight))))
    return MarkovChain(states=tuple(f"s{i}" for i in range(num_states)), initial=0, edges=tuple(edges))


def random_bscc(num_states: int, max_weight: int, seed: int, density: float = 0.3,
                min_weight: int = 0) -> MarkovChain:
    """Strongly connected chain: a random Hamiltonian cycle plus extra edges"""
    rng = np.random.default_rng(seed)
    order = [int(s) for s in rng.permutation(num_states)]
    following = {order[i]: order[(i + 1) % num_states] for i in range(num_states)}
    edges = []
    for s in range(num_states):
        targets = _targets(rng, num_states, density, forced=following[s])
        for t, p in zip(targets, _split(rng, len(targets))):
            edges.append(Edge(s, t, p, Fraction(_weight(rng, min_weight, max_weight))))
    return MarkovChain(states=tuple(f"s{i}" for i in range(num_states)), initial=0, edges=tuple(edges))


def random_mdp(num_states: int, num_actions: int, max_weight: int, seed: int, density: float = 0.4,
               min_weight: int = 0) -> Mdp:
    rng = np.random.default_rng(seed)
    choices = []
    for s in range(num_states):
        enabled = 1 + int(rng.integers(0, num_actions))
        for a in sorted(int(x) for x in rng.choice(num_actions, size=enabled, replace=False)):
            targets = _targets(rng, num_states, density)
            outcomes = tuple(
                Outcome(t, p, Fraction(_weight(rng, min_weight, max_weight)))
                for t, p in zip(targets, _split(rng, len(targets)))
            )
            choices.append(Choice(s, a, outcomes))
    return Mdp(
        states=tuple(f"s{i}" for i in range(num_states)),
        initial=0,
        actions=tuple(f"a{i}" for i in range(num_actions)),
        choices=tuple(choices),
    )


def random_game(num_vertices: int, max_weight: int, seed: int, density: float = 0.4, min_weight: int = 0,
                bipartite: bool = False, unique_predecessor: bool = False) -> TwoPlayerGame:
    """
    Seeded random game

    With `bipartite`, num_vertices counts the Player-1 vertices; each gets
    its own Player-2 children when `unique_predecessor` is set, otherwise
    Player-2 vertices are shared. Player-1 vertices are named u*, Player-2
    vertices v*.
    """
    rng = np.random.default_rng(seed)
    if not bipartite:
        owners = [1 + int(rng.integers(0, 2)) for _ in range(num_vertices)]
        edges = [
            GameEdge(v, t, Fraction(_weight(rng, min_weight, max_weight)))
            for v in range(num_vertices)
            for t in _targets(rng, num_vertices, density)
        ]
        return TwoPlayerGame(
            vertices=tuple(f"v{i}" for i in range(num_vertices)),
            owners=tuple(owners), initial=0, edges=tuple(edges))

    names = [f"u{i}" for i in range(num_vertices)]
    owners = [1] * num_vertices
    edges: List[GameEdge] = []
    if unique_predecessor:
        for u in range(num_vertices):
            for _ in range(1 + int(rng.integers(0, 2))):
                child = len(names)
                names.append(f"v{child - num_vertices}")
                owners.append(2)
                edges.append(GameEdge(u, child, Fraction(_weight(rng, min_weight, max_weight))))
    else:
        shared = max(1, num_vertices)
        names += [f"v{i}" for i in range(shared)]
        owners += [2] * shared
        for u in range(num_vertices):
            for t in _targets(rng, shared, density):
                edges.append(GameEdge(u, num_vertices + t, Fraction(_weight(rng, min_weight, max_weight))))
    for child in range(num_vertices, len(names)):
        for t in _targets(rng, num_vertices, density):
            edges.append(GameEdge(child, t, Fraction(_weight(rng, min_weight, max_weight))))
    return TwoPlayerGame(vertices=tuple(names), owners=tuple(owners), initial=0, edges=tuple(edges))


def random_model(kind: str, size: int, max_weight: int, seed: int, density: float = 0.4,
                 actions: int = 2, bipartite: bool = False) -> Model:
    """Dispatch on kind: mc, bscc, mdp or game"""
    if kind == 'mc':
        return random_chain(size, max_weight, seed, density)
    if kind == 'bscc':
        return random_bscc(size, max_weight, seed, density)
    if kind == 'mdp':
        return random_mdp(size, actions, max_weight, seed, density)
    if kind == 'game':
        return random_game(size, max_weight, seed, density, bipartite=bipartite, unique_predecessor=bipartite)
    raise ValidationError(f"unknown model kind {kind!r}")

# =============================================================================
# RESET CONSTRUCTIONS
# =============================================================================

def _check_reset_source(game: TwoPlayerGame) -> int:
    """Validate a bipartite Player-1/Player-2 game with non-negative integer weights; return W"""
    if game.owners[game.initial] != 1:
        raise ValidationError("reset constructions start from a Player-1 vertex", rule="reset-source")
    for e in game.edges:
        if game.owners[e.src] == game.owners[e.dst]:
            raise ValidationError(
                f"edge {game.vertices[e.src]}->{game.vertices[e.dst]} breaks player alternation", rule="reset-source")
        if e.weight < 0 or e.weight.denominator != 1:
            raise ValidationError("reset constructions need non-negative integer weights", rule="reset-source")
    return int(max(game.weights))


def reset_weight(max_weight: int, l_max: int) -> int:
    return (max_weight + 1) * 2 * l_max


def _reset_game(game: TwoPlayerGame, big: int) -> TwoPlayerGame:
    names = list(game.vertices)
    owners = list(game.owners)
    edges: List[GameEdge] = []
    for e in game.edges:
        if game.owners[e.src] == 2:
            edges.append(e)
            continue
        pick, land = len(names), len(names) + 1
        pair = f"{game.vertices[e.src]},{game.vertices[e.dst]}"
        names += [f"({pair},2)", f"({pair},1)"]
        owners += [2, 1]
        edges += [
            GameEdge(e.src, pick, Fraction(0)),
            GameEdge(pick, land, e.weight),
            GameEdge(land, e.dst, Fraction(0)),
            GameEdge(pick, game.initial, Fraction(big)),
        ]
    return TwoPlayerGame(vertices=tuple(names), owners=tuple(owners), initial=game.initial, edges=tuple(edges))


def _reset_mdp(game: TwoPlayerGame, big: int) -> Mdp:
    player1 = [v for v in range(game.num_vertices) if game.owners[v] == 1]
    names = [game.vertices[v] for v in player1]
    index = {v: i for i, v in enumerate(player1)}
    actions: Dict[str, int] = {}
    choices: List[Choice] = []

    def action(name: str) -> int:
        return actions.setdefault(name, len(actions))

    landing: List[Tuple[int, int]] = []
    for e in game.edges:
        if game.owners[e.src] != 1:
            continue
        land = len(names)
        names.append(f"({game.vertices[e.src]},{game.vertices[e.dst]},1)")
        landing.append((land, e.dst))
        choices.append(Choice(index[e.src], action(f"to_{game.vertices[e.dst]}"), (
            Outcome(land, Fraction(1, 2), e.weight),
            Outcome(index[game.initial], Fraction(1, 2), Fraction(big)),
        )))
    for land, middle in landing:
        onward = [e for e in game.edges if e.src == middle]
        choices.append(Choice(land, action('go'), tuple(
            Outcome(index[e.dst], Fraction(1, len(onward)), e.weight) for e in onward
        )))
    return Mdp(states=tuple(names), initial=index[game.initial], actions=tuple(actions), choices=tuple(choices))


def build_reset_game(game: TwoPlayerGame, l_max: int) -> TwoPlayerGame:
    """
    Game with a Player-2 reset to the initial vertex after every Player-1 move

    Each Player-1 edge (s, s') becomes s -> (s,s',2) -> (s,s',1) -> s'
    carrying w(s, s') on the middle hop, and (s,s',2) may jump back to the
    initial vertex with weight (W + 1) * 2 * l_max.
    """
    return _reset_game(game, reset_weight(_check_reset_source(game), l_max))


def build_reset_mdp(game: TwoPlayerGame, l_max: int) -> Mdp:
    """
    MDP whose derived game is the reset game

    At a Player-1 vertex s the action toward s' lands on (s,s',1) or resets
    to the initial vertex with probability 1/2 each; from (s,s',1) the only
    action moves uniformly to the successors of s'.
    """
    return _reset_mdp(game, reset_weight(_check_reset_source(game), l_max))


def bounded_reset_weight(game: TwoPlayerGame) -> int:
    """(W + 1) times the vertex count of the reset game"""
    max_weight = _check_reset_source(game)
    player1_edges = sum(1 for e in game.edges if game.owners[e.src] == 1)
    return (max_weight + 1) * (game.num_vertices + 2 * player1_edges)


def build_bounded_reset_game(game: TwoPlayerGame) -> TwoPlayerGame:
    return _reset_game(game, bounded_reset_weight(game))


def build_bounded_reset_mdp(game: TwoPlayerGame) -> Mdp:
    return _reset_mdp(game, bounded_reset_weight(game))
