"""
Model data types
Weighted Markov chains, MDPs and two-player games over exact rationals,
weight normalization, objectives and analysis results
"""

from dataclasses import dataclass, field, replace
from enum import Enum
from fractions import Fraction
from functools import cached_property
from math import lcm
from typing import Callable, Dict, Iterable, List, Optional, Sequence, Tuple, Union

from src.utils.error_handler import InternalSolverError, ValidationError

Rational = Fraction


def to_rational(value) -> Fraction:
    """Coerce int, str ("p" or "p/q") or Fraction to an exact rational"""
    if isinstance(value, float):
        raise ValidationError(f"floating point value {value!r} is not exact; write it as p/q", rule="exact-rational")
    try:
        return Fraction(value)
    except (ValueError, ZeroDivisionError, TypeError):
        raise ValidationError(f"not a rational number: {value!r}", rule="exact-rational")


def _intern(names: Iterable[str]) -> Tuple[str, ...]:
    seen: Dict[str, None] = {}
    for name in names:
        seen.setdefault(str(name), None)
    return tuple(seen)

# =============================================================================
# MARKOV CHAINS
# =============================================================================

@dataclass(frozen=True)
class Edge:
    src: int
    dst: int
    prob: Fraction
    weight: Fraction


@dataclass(frozen=True)
class MarkovChain:
    """
    Finite weighted Markov chain

    States are interned integers 0..n-1; `states` keeps their external names.
    """

    states: Tuple[str, ...]
    initial: int
    edges: Tuple[Edge, ...]

    def __post_init__(self):
        object.__setattr__(self, 'states', tuple(self.states))
        object.__setattr__(self, 'edges', tuple(
            Edge(e.src, e.dst, to_rational(e.prob), to_rational(e.weight)) for e in self.edges
        ))
        _check_states(self.states, self.initial)
        n = len(self.states)
        totals = [Fraction(0)] * n
        pairs = set()
        for e in self.edges:
            if not (0 <= e.src < n and 0 <= e.dst < n):
                raise ValidationError(f"edge {e.src}->{e.dst} references an unknown state", rule="dangling-state")
            if e.prob <= 0 or e.prob > 1:
                raise ValidationError(
                    f"edge {self.states[e.src]}->{self.states[e.dst]} has probability {e.prob} outside (0, 1]",
                    rule="probability-range")
            if (e.src, e.dst) in pairs:
                raise ValidationError(
                    f"duplicate edge {self.states[e.src]}->{self.states[e.dst]}", rule="duplicate-edge")
            pairs.add((e.src, e.dst))
            totals[e.src] += e.prob
        for s, total in enumerate(totals):
            if total == 0:
                raise ValidationError(f"state {self.states[s]} has no outgoing edge", rule="deadlock")
            if total != 1:
                raise ValidationError(
                    f"probability sum of state {self.states[s]} is {total}, expected 1", rule="probability-sum")

    @classmethod
    def from_named_edges(cls, initial: str, edges: Sequence[Tuple[str, str, object, object]],
                         states: Optional[Sequence[str]] = None) -> 'MarkovChain':
        """Build a chain from (src, dst, prob, weight) tuples over state names"""
        names = _intern(list(states or []) + [initial] + [x for e in edges for x in (e[0], e[1])])
        index = {name: i for i, name in enumerate(names)}
        return cls(
            states=names,
            initial=index[str(initial)],
            edges=tuple(Edge(index[str(s)], index[str(t)], to_rational(p), to_rational(w)) for s, t, p, w in edges),
        )

    @property
    def num_states(self) -> int:
        return len(self.states)

    @cached_property
    def successors(self) -> Tuple[Tuple[Edge, ...], ...]:
        out: List[List[Edge]] = [[] for _ in self.states]
        for e in self.edges:
            out[e.src].append(e)
        return tuple(tuple(edges) for edges in out)

    @property
    def weights(self) -> List[Fraction]:
        return [e.weight for e in self.edges]

    def state_id(self, name: str) -> int:
        try:
            return self.states.index(str(name))
        except ValueError:
            raise ValidationError(f"unknown state {name!r}", rule="dangling-state")

    def with_weights(self, func: Callable[[Fraction], Fraction]) -> 'MarkovChain':
        return replace(self, edges=tuple(replace(e, weight=to_rational(func(e.weight))) for e in self.edges))

    def with_initial(self, state: int) -> 'MarkovChain':
        return replace(self, initial=state)

# =============================================================================
# MARKOV DECISION PROCESSES
# =============================================================================

@dataclass(frozen=True)
class Outcome:
    dst: int
    prob: Fraction
    weight: Fraction


@dataclass(frozen=True)
class Choice:
    state: int
    action: int
    outcomes: Tuple[Outcome, ...]


@dataclass(frozen=True)
class Mdp:
    """
    Finite weighted MDP

    `actions` is the side table of action names; Act(s) is the set of action ids
    with a choice at s.
    """

    states: Tuple[str, ...]
    initial: int
    actions: Tuple[str, ...]
    choices: Tuple[Choice, ...]

    def __post_init__(self):
        object.__setattr__(self, 'states', tuple(self.states))
        object.__setattr__(self, 'actions', tuple(self.actions))
        object.__setattr__(self, 'choices', tuple(
            Choice(c.state, c.action, tuple(
                Outcome(o.dst, to_rational(o.prob), to_rational(o.weight)) for o in c.outcomes))
            for c in self.choices
        ))
        _check_states(self.states, self.initial)
        n, m = len(self.states), len(self.actions)
        seen = set()
        enabled = [False] * n
        for c in self.choices:
            if not (0 <= c.state < n) or not (0 <= c.action < m):
                raise ValidationError(f"choice ({c.state}, {c.action}) references an unknown id", rule="dangling-state")
            label = f"{self.states[c.state]}[{self.actions[c.action]}]"
            if (c.state, c.action) in seen:
                raise ValidationError(f"action {label} is defined twice", rule="duplicate-action")
            seen.add((c.state, c.action))
            enabled[c.state] = True
            total = Fraction(0)
            targets = set()
            for o in c.outcomes:
                if not 0 <= o.dst < n:
                    raise ValidationError(f"{label} targets an unknown state", rule="dangling-state")
                if o.prob <= 0 or o.prob > 1:
                    raise ValidationError(f"{label} has probability {o.prob} outside (0, 1]", rule="probability-range")
                if o.dst in targets:
                    raise ValidationError(f"duplicate edge {label}->{self.states[o.dst]}", rule="duplicate-edge")
                targets.add(o.dst)
                total += o.prob
            if total != 1:
                raise ValidationError(f"probability sum of {label} is {total}, expected 1", rule="probability-sum")
        for s, ok in enumerate(enabled):
            if not ok:
                raise ValidationError(f"state {self.states[s]} has no enabled action", rule="deadlock")

    @classmethod
    def from_named_transitions(cls, initial: str, transitions: Sequence[Tuple[str, str, str, object, object]],
                               states: Optional[Sequence[str]] = None) -> 'Mdp':
        """Build an MDP from (state, action, dst, prob, weight) tuples"""
        names = _intern(list(states or []) + [initial] + [x for t in transitions for x in (t[0], t[2])])
        actions = _intern(t[1] for t in transitions)
        index = {name: i for i, name in enumerate(names)}
        action_index = {name: i for i, name in enumerate(actions)}
        grouped: Dict[Tuple[int, int], List[Outcome]] = {}
        for s, a, t, p, w in transitions:
            key = (index[str(s)], action_index[str(a)])
            grouped.setdefault(key, []).append(Outcome(index[str(t)], to_rational(p), to_rational(w)))
        choices = tuple(Choice(s, a, tuple(outs)) for (s, a), outs in grouped.items())
        return cls(states=names, initial=index[str(initial)], actions=actions, choices=choices)

    @classmethod
    def from_chain(cls, chain: MarkovChain, action: str = "a") -> 'Mdp':
        """Single-action MDP with the same transition structure as `chain`"""
        choices = tuple(
            Choice(s, 0, tuple(Outcome(e.dst, e.prob, e.weight) for e in chain.successors[s]))
            for s in range(chain.num_states)
        )
        return cls(states=chain.states, initial=chain.initial, actions=(action,), choices=choices)

    @property
    def num_states(self) -> int:
        return len(self.states)

    @cached_property
    def _choice_index(self) -> Dict[Tuple[int, int], Choice]:
        return {(c.state, c.action): c for c in self.choices}

    @cached_property
    def enabled(self) -> Tuple[Tuple[int, ...], ...]:
        acts: List[List[int]] = [[] for _ in self.states]
        for c in self.choices:
            acts[c.state].append(c.action)
        return tuple(tuple(sorted(a)) for a in acts)

    def actions_of(self, state: int) -> Tuple[int, ...]:
        return self.enabled[state]

    def outcomes(self, state: int, action: int) -> Tuple[Outcome, ...]:
        return self._choice_index[(state, action)].outcomes

    def post(self, state: int, action: int) -> frozenset:
        return frozenset(o.dst for o in self.outcomes(state, action))

    @property
    def weights(self) -> List[Fraction]:
        return [o.weight for c in self.choices for o in c.outcomes]

    def with_weights(self, func: Callable[[Fraction], Fraction]) -> 'Mdp':
        return replace(self, choices=tuple(
            replace(c, outcomes=tuple(replace(o, weight=to_rational(func(o.weight))) for o in c.outcomes))
            for c in self.choices
        ))

    def induced_chain(self, strategy: Dict[int, int]) -> MarkovChain:
        """Markov chain of a memoryless deterministic strategy state -> action"""
        edges = []
        for s in range(self.num_states):
            action = strategy[s]
            edges.extend(Edge(s, o.dst, o.prob, o.weight) for o in self.outcomes(s, action))
        return MarkovChain(states=self.states, initial=self.initial, edges=tuple(edges))

# =============================================================================
# TWO-PLAYER GAMES
# =============================================================================

@dataclass(frozen=True)
class GameEdge:
    src: int
    dst: int
    weight: Fraction


@dataclass(frozen=True)
class TwoPlayerGame:
    """Weighted game graph; owners[v] is 1 (maximizer) or 2 (minimizer)"""

    vertices: Tuple[str, ...]
    owners: Tuple[int, ...]
    initial: int
    edges: Tuple[GameEdge, ...]

    def __post_init__(self):
        object.__setattr__(self, 'vertices', tuple(self.vertices))
        object.__setattr__(self, 'owners', tuple(self.owners))
        object.__setattr__(self, 'edges', tuple(GameEdge(e.src, e.dst, to_rational(e.weight)) for e in self.edges))
        _check_states(self.vertices, self.initial)
        n = len(self.vertices)
        if len(self.owners) != n or any(o not in (1, 2) for o in self.owners):
            raise ValidationError("every vertex must belong to player1 or player2", rule="vertex-owner")
        pairs = set()
        has_out = [False] * n
        for e in self.edges:
            if not (0 <= e.src < n and 0 <= e.dst < n):
                raise ValidationError(f"edge {e.src}->{e.dst} references an unknown vertex", rule="dangling-state")
            if (e.src, e.dst) in pairs:
                raise ValidationError(
                    f"duplicate edge {self.vertices[e.src]}->{self.vertices[e.dst]}", rule="duplicate-edge")
            pairs.add((e.src, e.dst))
            has_out[e.src] = True
        for v, ok in enumerate(has_out):
            if not ok:
                raise ValidationError(f"vertex {self.vertices[v]} has no outgoing edge", rule="deadlock")

    @classmethod
    def from_named_edges(cls, owners: Dict[str, int], initial: str,
                         edges: Sequence[Tuple[str, str, object]]) -> 'TwoPlayerGame':
        """Build a game from a name -> owner table and (src, dst, weight) tuples"""
        names = _intern(list(owners))
        index = {name: i for i, name in enumerate(names)}
        return cls(
            vertices=names,
            owners=tuple(int(owners[name]) for name in names),
            initial=index[str(initial)],
            edges=tuple(GameEdge(index[str(s)], index[str(t)], to_rational(w)) for s, t, w in edges),
        )

    @property
    def num_vertices(self) -> int:
        return len(self.vertices)

    @cached_property
    def successors(self) -> Tuple[Tuple[GameEdge, ...], ...]:
        out: List[List[GameEdge]] = [[] for _ in self.vertices]
        for e in self.edges:
            out[e.src].append(e)
        return tuple(tuple(edges) for edges in out)

    @property
    def weights(self) -> List[Fraction]:
        return [e.weight for e in self.edges]

    def with_weights(self, func: Callable[[Fraction], Fraction]) -> 'TwoPlayerGame':
        return replace(self, edges=tuple(replace(e, weight=to_rational(func(e.weight))) for e in self.edges))

    def vertex_id(self, name: str) -> int:
        try:
            return self.vertices.index(str(name))
        except ValueError:
            raise ValidationError(f"unknown vertex {name!r}", rule="dangling-state")


Model = Union[MarkovChain, Mdp, TwoPlayerGame]


def _check_states(names: Tuple[str, ...], initial: int):
    if not names:
        raise ValidationError("model has no states", rule="empty-model")
    if len(set(names)) != len(names):
        raise ValidationError("state names must be unique", rule="duplicate-state")
    if not 0 <= initial < len(names):
        raise ValidationError("initial state is not a declared state", rule="dangling-state")


def model_kind(model: Model) -> str:
    if isinstance(model, MarkovChain):
        return 'mc'
    if isinstance(model, Mdp):
        return 'mdp'
    if isinstance(model, TwoPlayerGame):
        return 'game'
    raise ValidationError(f"not a model: {type(model).__name__}")

# =============================================================================
# WEIGHT NORMALIZATION
# =============================================================================

@dataclass(frozen=True)
class WeightTransform:
    """w_int = scale * w + shift; window values map the same way"""

    scale: int = 1
    shift: int = 0

    def __post_init__(self):
        if self.scale < 1 or self.shift < 0:
            raise InternalSolverError(f"invalid weight transform scale={self.scale} shift={self.shift}")

    @property
    def is_identity(self) -> bool:
        return self.scale == 1 and self.shift == 0

    def apply(self, value) -> Fraction:
        return self.scale * Fraction(value) + self.shift

    def denormalize(self, value) -> Fraction:
        return (Fraction(value) - self.shift) / self.scale


def normalize(model: Model) -> Tuple[Model, WeightTransform]:
    """
    Rescale weights to non-negative integers

    Multiplies by the LCM of the weight denominators, then shifts by the
    opposite of the smallest scaled weight when it is negative.

    Returns:
        (normalized model, transform) with wmp' = scale * wmp + shift on every path
    """
    weights = model.weights
    scale = lcm(*(w.denominator for w in weights)) if weights else 1
    lowest = min((w * scale for w in weights), default=Fraction(0))
    shift = int(-lowest) if lowest < 0 else 0
    transform = WeightTransform(scale=scale, shift=shift)
    if transform.is_identity:
        return model, transform
    return model.with_weights(transform.apply), transform


def negate_weights(model: Model) -> Model:
    """Cost flavor: window mean-cost is the negated payoff of the negated weights"""
    return model.with_weights(lambda w: -w)


def reweight(model: Model, scale, offset) -> Model:
    """Affine reweighting w -> scale * w + offset (scale > 0)"""
    scale, offset = to_rational(scale), to_rational(offset)
    if scale <= 0:
        raise ValidationError("reweighting scale must be positive")
    return model.with_weights(lambda w: scale * w + offset)

# =============================================================================
# PATHS
# =============================================================================

@dataclass(frozen=True)
class PathStep:
    src: int
    dst: int
    weight: Fraction


@dataclass(frozen=True)
class FinitePath:
    origin: int
    steps: Tuple[PathStep, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, 'steps', tuple(self.steps))
        current = self.origin
        for i, step in enumerate(self.steps):
            if step.src != current:
                raise ValidationError(f"path step {i} starts at {step.src}, expected {current}", rule="path-chaining")
            current = step.dst

    @classmethod
    def from_weights(cls, weights: Iterable, origin: int = 0) -> 'FinitePath':
        """Path of self-loop steps carrying the given weights"""
        return cls(origin, tuple(PathStep(origin, origin, to_rational(w)) for w in weights))

    @property
    def weights(self) -> Tuple[Fraction, ...]:
        return tuple(step.weight for step in self.steps)

    def suffix(self, start: int) -> 'FinitePath':
        origin = self.steps[start].src if start < len(self.steps) else self.last
        return FinitePath(origin, self.steps[start:])

    @property
    def last(self) -> int:
        return self.steps[-1].dst if self.steps else self.origin

    def __len__(self) -> int:
        return len(self.steps)

# =============================================================================
# OBJECTIVES & RESULTS
# =============================================================================

class Kind(Enum):
    FIXED = 'fixwmp'
    DIRECT_FIXED = 'dirfixwmp'
    BOUNDED = 'bwmp'
    DIRECT_BOUNDED = 'dirbwmp'


class Flavor(Enum):
    PAYOFF = 'payoff'
    COST = 'cost'


@dataclass(frozen=True)
class Objective:
    kind: Kind
    window: Optional[int] = None
    flavor: Flavor = Flavor.PAYOFF

    def __post_init__(self):
        if self.kind in (Kind.FIXED, Kind.DIRECT_FIXED):
            if not isinstance(self.window, int) or self.window < 1:
                raise ValidationError(f"{self.kind.value} requires a window length l_max >= 1", rule="window-required")
        elif self.window is not None:
            raise ValidationError(f"{self.kind.value} does not take a window length", rule="window-forbidden")

    @classmethod
    def parse(cls, name: str, window: Optional[int] = None, flavor: str = 'payoff') -> 'Objective':
        try:
            return cls(Kind(name), window, Flavor(flavor))
        except ValueError as e:
            if isinstance(e, ValidationError):
                raise
            raise ValidationError(f"unknown objective or flavor: {name!r}/{flavor!r}")

    @property
    def label(self) -> str:
        suffix = f"(l_max={self.window})" if self.window is not None else ""
        return f"{self.kind.value}{suffix}[{self.flavor.value}]"


class ValueDistribution:
    """Finite law of a window value over paths: value -> probability"""

    def __init__(self, masses: Dict[Fraction, Fraction]):
        cleaned = {}
        for value, prob in masses.items():
            value, prob = to_rational(value), to_rational(prob)
            if prob < 0:
                raise ValidationError(f"negative probability {prob} for value {value}")
            if prob > 0:
                cleaned[value] = cleaned.get(value, Fraction(0)) + prob
        total = sum(cleaned.values(), Fraction(0))
        if total != 1:
            raise ValidationError(f"distribution masses sum to {total}, expected 1", rule="probability-sum")
        self._masses = dict(sorted(cleaned.items()))

    def items(self) -> List[Tuple[Fraction, Fraction]]:
        return list(self._masses.items())

    def support(self) -> List[Fraction]:
        return list(self._masses)

    def probability(self, value) -> Fraction:
        return self._masses.get(Fraction(value), Fraction(0))

    def expectation(self) -> Fraction:
        return sum((v * p for v, p in self._masses.items()), Fraction(0))

    def tail_mass(self, threshold) -> Fraction:
        """Pr(value >= threshold)"""
        threshold = Fraction(threshold)
        return sum((p for v, p in self._masses.items() if v >= threshold), Fraction(0))

    def mapped(self, func: Callable[[Fraction], Fraction]) -> 'ValueDistribution':
        out: Dict[Fraction, Fraction] = {}
        for v, p in self._masses.items():
            key = Fraction(func(v))
            out[key] = out.get(key, Fraction(0)) + p
        return ValueDistribution(out)

    def __eq__(self, other) -> bool:
        return isinstance(other, ValueDistribution) and self._masses == other._masses

    def __len__(self) -> int:
        return len(self._masses)

    def __repr__(self) -> str:
        body = ", ".join(f"{v}: {p}" for v, p in self._masses.items())
        return f"ValueDistribution({{{body}}})"


@dataclass(frozen=True)
class ComponentValue:
    """Value of one BSCC or MEC together with how likely the run ends there"""

    kind: str
    states: Tuple[str, ...]
    value: Fraction
    reach_probability: Optional[Fraction] = None


@dataclass(frozen=True)
class AnalysisResult:
    objective: Objective
    value: Fraction
    distribution: Optional[ValueDistribution] = None
    components: Tuple[ComponentValue, ...] = ()
    transform: WeightTransform = field(default_factory=WeightTransform)
    algorithm: str = ""
    notes: Tuple[str, ...] = ()

    def negated(self) -> 'AnalysisResult':
        """Result of the cost flavor from the payoff analysis of negated weights"""
        return replace(
            self,
            objective=replace(self.objective, flavor=Flavor.COST),
            value=-self.value,
            distribution=self.distribution.mapped(lambda v: -v) if self.distribution is not None else None,
            components=tuple(replace(c, value=-c.value) for c in self.components),
        )
