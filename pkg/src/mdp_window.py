"""
MDP window solvers
Per-MEC fixed and bounded window values, the expected mean-payoff of
constant-weight-MEC MDPs, and the window-vector product for direct fixed windows
"""

import logging
from dataclasses import dataclass
from fractions import Fraction
from typing import Dict, Iterable, List, Optional, Tuple

import networkx as nx
import pandas as pd

from config.settings import SOLVER_LIMITS
from src.game_solvers import max_direct_window_value, mdp_to_game, mean_payoff_game_value
from src.graph_analysis import EndComponent, MecPartition, mecs, solve_linear_system
from src.models import (
    AnalysisResult,
    Choice,
    ComponentValue,
    Kind,
    Mdp,
    Objective,
    Outcome,
    normalize,
)
from src.utils.cache_manager import solver_cache
from src.utils.error_handler import (
    InternalSolverError,
    ResourceLimitError,
    UnsupportedInputError,
    ValidationError,
)
from src.utils.workers import ordered_map
from src.windows import window_mean_payoff

logger = logging.getLogger(__name__)

COMMIT = 0

# =============================================================================
# PER-MEC VALUES
# =============================================================================

def sub_mdp(mdp: Mdp, mec: EndComponent) -> Mdp:
    """
    The end component as a standalone MDP

    Raises ValidationError when the component is not closed under its
    actions or not strongly connected.
    """
    states = sorted(mec.states)
    if not states or any(not mec.allowed.get(s) for s in states):
        raise ValidationError("end component needs at least one action per state", rule="end-component")
    position = {s: i for i, s in enumerate(states)}
    graph = nx.DiGraph()
    graph.add_nodes_from(states)
    choices = []
    for s in states:
        for a in sorted(mec.allowed[s]):
            outcomes = mdp.outcomes(s, a)
            if any(o.dst not in position for o in outcomes):
                raise ValidationError(
                    f"action {mdp.actions[a]} of {mdp.states[s]} leaves the component", rule="end-component")
            graph.add_edges_from((s, o.dst) for o in outcomes)
            choices.append(Choice(position[s], a, tuple(Outcome(position[o.dst], o.prob, o.weight) for o in outcomes)))
    if not nx.is_strongly_connected(graph):
        raise ValidationError("end component is not strongly connected", rule="end-component")
    return Mdp(states=tuple(mdp.states[s] for s in states), initial=0, actions=mdp.actions, choices=tuple(choices))


@solver_cache.cache_data
def _fixed_component_value(component: Mdp, l_max: int) -> Fraction:
    normalized, transform = normalize(component)
    derived = mdp_to_game(normalized)
    values = max_direct_window_value(derived.game, 2 * l_max, vertices=derived.state_vertices)
    return transform.denormalize(2 * values.best)


@solver_cache.cache_data
def _bounded_component_value(component: Mdp, show_progress: bool = False) -> Fraction:
    derived = mdp_to_game(component)
    values = mean_payoff_game_value(derived.game, show_progress)
    return 2 * max(values[v] for v in derived.state_vertices)


def fixwmp_mec(mdp: Mdp, mec: EndComponent, l_max: int) -> Fraction:
    """
    Fixed window value of one MEC

    Twice the best direct window value, over state vertices, of the game
    derived from the MEC with window 2 * l_max (game paths take two steps
    per MDP step and halve the mean). Weights are made non-negative first so
    the zero-weight action edges never raise a window mean.

    Args:
        mdp: The MDP
        mec: One of its maximal end components
        l_max: Window length

    Returns:
        Fraction: lambda_M in user weights
    """
    return _fixed_component_value(sub_mdp(mdp, mec), l_max)


def bwmp_mec(mdp: Mdp, mec: EndComponent, show_progress: bool = False) -> Fraction:
    """Bounded window value of one MEC: twice the best mean-payoff game value over state vertices"""
    return _bounded_component_value(sub_mdp(mdp, mec), show_progress)


@dataclass(frozen=True)
class MecValueAnnotation:
    """MDP whose in-MEC transitions all carry the value of their MEC"""

    mdp: Mdp
    partition: MecPartition
    values: Tuple[Fraction, ...]

    def components(self) -> Tuple[ComponentValue, ...]:
        return tuple(
            ComponentValue(kind='mec', states=tuple(self.mdp.states[s] for s in sorted(mec.states)), value=value)
            for mec, value in zip(self.partition, self.values)
        )


def replace_mecs(mdp: Mdp, l_max: Optional[int], mode: Kind, threads: int = 1,
                 show_progress: bool = False) -> MecValueAnnotation:
    """
    Replace the weight of every in-MEC transition by the value of its MEC

    Args:
        mdp: The MDP
        l_max: Window length (Kind.FIXED only)
        mode: Kind.FIXED or Kind.BOUNDED
        threads: Worker threads for the per-MEC values
        show_progress: tqdm progress bars for the bounded mean-payoff solves

    Returns:
        MecValueAnnotation
    """
    if mode == Kind.FIXED:
        solve = lambda mec: fixwmp_mec(mdp, mec, l_max)  # noqa: E731
    elif mode == Kind.BOUNDED:
        solve = lambda mec: bwmp_mec(mdp, mec, show_progress)  # noqa: E731
    else:
        raise ValidationError(f"MEC replacement supports fixwmp and bwmp, not {mode.value}")

    partition = mecs(mdp)
    values = tuple(ordered_map(solve, list(partition), threads))
    value_of = {}
    for mec, value in zip(partition, values):
        for s in mec.states:
            for a in mec.allowed[s]:
                value_of[(s, a)] = value

    choices = tuple(
        Choice(c.state, c.action, tuple(Outcome(o.dst, o.prob, value_of[(c.state, c.action)]) for o in c.outcomes))
        if (c.state, c.action) in value_of else c
        for c in mdp.choices
    )
    logger.debug("replaced weights inside %d MECs (%s)", len(partition), mode.value)
    rewritten = Mdp(states=mdp.states, initial=mdp.initial, actions=mdp.actions, choices=choices)
    return MecValueAnnotation(mdp=rewritten, partition=partition, values=values)

# =============================================================================
# EXPECTED MEAN-PAYOFF WITH CONSTANT MECS
# =============================================================================

def _mec_constants(mdp: Mdp, partition: MecPartition) -> List[Fraction]:
    constants = []
    for mec in partition:
        weights = {o.weight for s in mec.states for a in mec.allowed[s] for o in mdp.outcomes(s, a)}
        if len(weights) != 1:
            names = ", ".join(mdp.states[s] for s in sorted(mec.states))
            raise UnsupportedInputError(
                f"MEC {{{names}}} carries several weights; expected mean-payoff needs constant MECs",
                rule="constant-mec")
        constants.append(weights.pop())
    return constants


def _quotient(mdp: Mdp, partition: MecPartition):
    """
    Nodes are the states outside MECs plus one node per MEC

    Returns (node_of_state, node_actions, first_mec_node) where
    node_actions[node] lists distributions {target node: probability}; a MEC
    node's first entry is None, its commit action.
    """
    component = partition.component_of()
    outside = [s for s in range(mdp.num_states) if s not in component]
    node_of = {s: i for i, s in enumerate(outside)}
    for s, m in component.items():
        node_of[s] = len(outside) + m
    node_actions: List[List[Optional[Dict[int, Fraction]]]] = [[] for _ in range(len(outside) + len(partition))]
    for m in range(len(partition)):
        node_actions[len(outside) + m].append(None)

    for s in range(mdp.num_states):
        allowed = partition.mecs[component[s]].allowed[s] if s in component else frozenset()
        for a in mdp.actions_of(s):
            if a in allowed:
                continue
            distribution: Dict[int, Fraction] = {}
            for o in mdp.outcomes(s, a):
                target = node_of[o.dst]
                distribution[target] = distribution.get(target, Fraction(0)) + o.prob
            node_actions[node_of[s]].append(distribution)
    return node_of, node_actions, len(outside)


def action_value(distribution: Optional[Dict[int, Fraction]], terminal: Fraction,
                 values: List[Fraction]) -> Fraction:
    """Expected next-node value of one quotient action"""
    if distribution is None:
        return terminal
    return sum((prob * values[target] for target, prob in distribution.items()), Fraction(0))


def state_values(node_actions, terminals: Dict[int, Fraction], policy: List[int]) -> List[Fraction]:
    """Exact value of every quotient node under a policy"""
    n = len(node_actions)
    matrix = [[Fraction(0)] * n for _ in range(n)]
    rhs = [Fraction(0)] * n
    for node in range(n):
        matrix[node][node] = Fraction(1)
        distribution = node_actions[node][policy[node]]
        if distribution is None:
            rhs[node] = terminals[node]
            continue
        for target, prob in distribution.items():
            matrix[node][target] -= prob
    return solve_linear_system(matrix, rhs)


def expected_mean_payoff_const_mec(mdp: Mdp, partition: Optional[MecPartition] = None) -> Fraction:
    """
    Optimal expected mean-payoff of an MDP whose MECs carry constant weights

    Every run settles in some MEC and then earns its constant, so the value
    is the best expected constant at absorption. Solved by policy iteration
    on the MEC quotient, where each MEC node can commit to its constant.
    Actions switch only on strict improvement, ties going to the lowest index.

    Args:
        mdp: MDP with constant-weight MECs
        partition: Its MEC partition (computed when omitted)

    Returns:
        Fraction: expected mean-payoff from the initial state
    """
    partition = mecs(mdp) if partition is None else partition
    constants = _mec_constants(mdp, partition)
    node_of, node_actions, offset = _quotient(mdp, partition)
    terminals = {offset + m: value for m, value in enumerate(constants)}
    policy = [COMMIT] * len(node_actions)

    rounds = 0
    while True:
        rounds += 1
        values = state_values(node_actions, terminals, policy)
        changed = False
        for node, actions in enumerate(node_actions):
            scores = [action_value(d, terminals.get(node), values) for d in actions]
            best = max(scores)
            if best > scores[policy[node]]:
                policy[node] = scores.index(best)
                changed = True
        if not changed:
            break
    logger.debug("policy iteration converged after %d rounds on %d quotient nodes", rounds, len(node_actions))
    return values[node_of[mdp.initial]]


def _mdp_result(objective: Objective, annotation: MecValueAnnotation, algorithm: str) -> AnalysisResult:
    value = expected_mean_payoff_const_mec(annotation.mdp, annotation.partition)
    return AnalysisResult(
        objective=objective,
        value=value,
        components=annotation.components(),
        algorithm=algorithm,
    )


def fixwmp_mdp(mdp: Mdp, l_max: int, threads: int = 1) -> AnalysisResult:
    """Optimal expected fixed window mean-payoff"""
    annotation = replace_mecs(mdp, l_max, Kind.FIXED, threads)
    return _mdp_result(Objective(Kind.FIXED, l_max), annotation, 'mec-window-game')


def bwmp_mdp(mdp: Mdp, threads: int = 1, show_progress: bool = False) -> AnalysisResult:
    """Optimal expected bounded window mean-payoff"""
    annotation = replace_mecs(mdp, None, Kind.BOUNDED, threads, show_progress)
    return _mdp_result(Objective(Kind.BOUNDED), annotation, 'mec-mean-payoff-game')


def fixwmp_sweep(mdp: Mdp, l_values: Iterable[int], threads: int = 1,
                 show_progress: bool = False) -> pd.DataFrame:
    """Fixed window values per window length next to the bounded value"""
    limit = bwmp_mdp(mdp, threads, show_progress).value
    rows = []
    for l_max in l_values:
        value = fixwmp_mdp(mdp, l_max, threads).value
        rows.append({'l_max': l_max, 'fixwmp': value, 'bwmp': limit, 'gap': limit - value})
    return pd.DataFrame(rows, columns=['l_max', 'fixwmp', 'bwmp', 'gap'])

# =============================================================================
# DIRECT FIXED WINDOW: WINDOW-VECTOR PRODUCT
# =============================================================================

ProductKey = Tuple[int, Tuple[int, ...], Fraction]


@dataclass(frozen=True)
class DirFixProductMdp:
    """
    Product tracking the last l_max - 1 weights and the least window mean so far

    keys[i] = (state, recent weights, lambda). Every transition carries the
    lambda of its source, so a run's mean-payoff is its eventual lambda.
    """

    mdp: Mdp
    keys: Tuple[ProductKey, ...]
    l_max: int
    sentinel: int


def build_dirfix_product(mdp: Mdp, l_max: int) -> DirFixProductMdp:
    """
    Window-vector product of an MDP with non-negative integer weights

    Starts from (init, (W, ..., W), W) with W the largest weight. Taking an
    outcome of weight w updates lambda to min(lambda, wmp(recent + (w,))) and
    shifts w into the recent weights. Built by forward reachability.

    Args:
        mdp: Normalized MDP
        l_max: Window length

    Returns:
        DirFixProductMdp
    """
    weights = mdp.weights
    if any(w.denominator != 1 or w < 0 for w in weights):
        raise ValidationError("window-vector product needs non-negative integer weights; normalize first")
    top = int(max(weights))
    cap = SOLVER_LIMITS['dirfix_product_max_states']

    keys: List[ProductKey] = []
    index: Dict[ProductKey, int] = {}
    frontier: List[ProductKey] = []

    def intern(key: ProductKey) -> int:
        if key not in index:
            if len(keys) >= cap:
                raise ResourceLimitError(
                    f"window-vector product exceeds {cap} states (l_max={l_max}, W={top})",
                    size=len(keys) + 1, cap=cap)
            index[key] = len(keys)
            keys.append(key)
            frontier.append(key)
        return index[key]

    initial = intern((mdp.initial, (top,) * (l_max - 1), Fraction(top)))
    choices: List[Choice] = []
    while frontier:
        s, recent, level = key = frontier.pop()
        source = index[key]
        for a in mdp.actions_of(s):
            outcomes = []
            for o in mdp.outcomes(s, a):
                window = recent + (int(o.weight),)
                lowered = min(level, window_mean_payoff(window, l_max))
                outcomes.append(Outcome(intern((o.dst, window[1:], lowered)), o.prob, level))
            choices.append(Choice(source, a, tuple(outcomes)))

    names = tuple(
        f"{mdp.states[s]}|{','.join(str(w) for w in recent)}|{level}" for s, recent, level in keys
    )
    logger.debug("window-vector product for l_max=%d: %d states", l_max, len(names))
    product = Mdp(states=names, initial=initial, actions=mdp.actions, choices=tuple(choices))
    return DirFixProductMdp(mdp=product, keys=tuple(keys), l_max=l_max, sentinel=top)


def _check_constant_levels(product: DirFixProductMdp, partition: MecPartition):
    for mec in partition:
        levels = {product.keys[s][2] for s in mec.states}
        if len(levels) != 1:
            raise InternalSolverError(f"window-vector product MEC mixes levels {sorted(levels)}")


def dirfixwmp_mdp(mdp: Mdp, l_max: int) -> AnalysisResult:
    """
    Optimal expected direct fixed window mean-payoff

    The expected mean-payoff of the window-vector product, whose MECs all
    carry a single lambda.
    """
    normalized, transform = normalize(mdp)
    product = build_dirfix_product(normalized, l_max)
    partition = mecs(product.mdp)
    _check_constant_levels(product, partition)
    value = expected_mean_payoff_const_mec(product.mdp, partition)
    return AnalysisResult(
        objective=Objective(Kind.DIRECT_FIXED, l_max),
        value=transform.denormalize(value),
        transform=transform,
        algorithm='window-vector-product',
        notes=(f"product has {len(product.keys)} states and {len(partition)} MECs",),
    )
