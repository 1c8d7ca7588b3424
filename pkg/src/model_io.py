"""
Model file reading and writing
Line-oriented text format for Markov chains, MDPs and two-player games
"""

import logging
import re
from fractions import Fraction
from pathlib import Path
from typing import Dict, List, Optional, Tuple

from src.models import Choice, Edge, GameEdge, MarkovChain, Mdp, Model, Outcome, TwoPlayerGame, model_kind
from src.utils.cache_manager import CacheManager
from src.utils.error_handler import ModelParseError, UsageError, ValidationError

logger = logging.getLogger(__name__)

RATIONAL = re.compile(r'^-?\d+(/\d+)?$')
ACTION = re.compile(r'^\[([^\[\]\s]+)\]$')
OWNERS = {'player1': 1, 'player2': 2}

Token = Tuple[str, int]


class ModelReader:
    """
    Parser for the model text format

    The first significant line names the model kind (mc, mdp or game); the
    remaining lines declare states, the initial state and edges in any order;
    state names are resolved once the whole text is read. `#` starts a
    comment.
    """

    def __init__(self):
        """Initialize an empty reader"""
        self.kind: Optional[str] = None
        self.states: Dict[str, int] = {}
        self.owners: List[int] = []
        self.init_ref: Optional[Tuple[Token, int]] = None
        self.initial: Optional[int] = None
        self.edge_refs: List[tuple] = []
        self.edges: List[tuple] = []
        self.seen_pairs: Dict[tuple, int] = {}
        self.group_lines: Dict[tuple, int] = {}

    def parse(self, text: str) -> Model:
        """
        Parse model text

        Args:
            text: Model in the line-oriented grammar

        Returns:
            MarkovChain, Mdp or TwoPlayerGame
        """
        for number, raw in enumerate(text.splitlines(), start=1):
            tokens = self._tokenize(raw.split('#', 1)[0])
            if not tokens:
                continue
            if self.kind is None:
                self._parse_header(tokens, number)
                continue
            keyword, column = tokens[0]
            if keyword == 'state':
                self._parse_state(tokens, number)
            elif keyword == 'init':
                self._parse_init(tokens, number)
            elif keyword == 'edge':
                self._parse_edge(tokens, number)
            else:
                raise ModelParseError(f"unknown keyword {keyword!r}", number, column)
        if self.kind is None:
            raise ModelParseError("empty model text: expected mc, mdp or game", 1, 1)
        if self.init_ref is None:
            raise ValidationError("no init line", rule="dangling-state")
        self._resolve()
        self._check_sums()
        model = self._build()
        logger.debug("parsed %s with %d states", self.kind, len(self.states))
        return model

    @staticmethod
    def _tokenize(line: str) -> List[Token]:
        return [(m.group(0), m.start() + 1) for m in re.finditer(r'\S+', line)]

    def _parse_header(self, tokens: List[Token], number: int):
        word, column = tokens[0]
        if word not in ('mc', 'mdp', 'game') or len(tokens) != 1:
            raise ModelParseError(f"expected model kind mc, mdp or game, got {word!r}", number, column)
        self.kind = word

    def _state_ref(self, token: Token, number: int) -> int:
        name, column = token
        if name not in self.states:
            raise ValidationError(f"undeclared state {name!r} (column {column})", rule="dangling-state", line=number)
        return self.states[name]

    def _rational(self, token: Token, number: int) -> Fraction:
        text, column = token
        if not RATIONAL.match(text):
            raise ModelParseError(f"expected a rational int or int/int, got {text!r}", number, column)
        numerator, _, denominator = text.partition('/')
        if denominator and int(denominator) == 0:
            raise ModelParseError(f"zero denominator in {text!r}", number, column)
        return Fraction(text)

    def _expect(self, tokens: List[Token], index: int, word: str, number: int):
        if index >= len(tokens):
            last, column = tokens[-1]
            raise ModelParseError(f"expected {word!r} after {last!r}", number, column + len(last))
        found, column = tokens[index]
        if found != word:
            raise ModelParseError(f"expected {word!r}, got {found!r}", number, column)

    def _parse_state(self, tokens: List[Token], number: int):
        if len(tokens) < 2:
            raise ModelParseError("state needs a name", number, tokens[0][1] + 5)
        name, column = tokens[1]
        if name in self.states:
            raise ValidationError(f"state {name!r} declared twice", rule="duplicate-state", line=number)
        if name.startswith('[') or name == '->':
            raise ModelParseError(f"invalid state name {name!r}", number, column)
        if self.kind == 'game':
            if len(tokens) != 3 or tokens[2][0] not in OWNERS:
                where = tokens[2][1] if len(tokens) > 2 else column + len(name)
                raise ModelParseError("game states need a player1 or player2 tag", number, where)
            self.owners.append(OWNERS[tokens[2][0]])
        elif len(tokens) != 2:
            raise ModelParseError(f"unexpected {tokens[2][0]!r} after state name", number, tokens[2][1])
        self.states[name] = len(self.states)

    def _parse_init(self, tokens: List[Token], number: int):
        if len(tokens) != 2:
            raise ModelParseError("init takes exactly one state", number, tokens[0][1])
        if self.init_ref is not None:
            raise ValidationError("init declared twice", rule="duplicate-init", line=number)
        self.init_ref = (tokens[1], number)

    def _parse_edge(self, tokens: List[Token], number: int):
        if len(tokens) < 2:
            raise ModelParseError("edge needs a source state", number, tokens[0][1] + 4)
        src = tokens[1]
        index = 2
        action = None
        if self.kind == 'mdp':
            if index >= len(tokens) or not ACTION.match(tokens[index][0]):
                where = tokens[index][1] if index < len(tokens) else tokens[-1][1]
                raise ModelParseError("MDP edges need an action written [name]", number, where)
            action = ACTION.match(tokens[index][0]).group(1)
            index += 1
        self._expect(tokens, index, '->', number)
        if index + 1 >= len(tokens):
            raise ModelParseError("edge needs a target state", number, tokens[index][1] + 2)
        dst = tokens[index + 1]
        index += 2

        prob = None
        if self.kind != 'game':
            self._expect(tokens, index, 'prob', number)
            if index + 1 >= len(tokens):
                raise ModelParseError("prob needs a value", number, tokens[index][1] + 4)
            prob = self._rational(tokens[index + 1], number)
            if prob <= 0 or prob > 1:
                raise ValidationError(f"probability {prob} outside (0, 1]", rule="probability-range", line=number)
            index += 2
        self._expect(tokens, index, 'weight', number)
        if index + 1 >= len(tokens):
            raise ModelParseError("weight needs a value", number, tokens[index][1] + 6)
        weight = self._rational(tokens[index + 1], number)
        if index + 2 < len(tokens):
            raise ModelParseError(f"unexpected {tokens[index + 2][0]!r}", number, tokens[index + 2][1])

        pair = (src[0], action, dst[0])
        if pair in self.seen_pairs:
            raise ValidationError(
                f"duplicate edge, first given on line {self.seen_pairs[pair]}", rule="duplicate-edge", line=number)
        self.seen_pairs[pair] = number
        self.group_lines[(src[0], action)] = number
        self.edge_refs.append((src, action, dst, prob, weight, number))

    def _resolve(self):
        token, number = self.init_ref
        self.initial = self._state_ref(token, number)
        self.edges = [
            (self._state_ref(src, number), action, self._state_ref(dst, number), prob, weight)
            for src, action, dst, prob, weight, number in self.edge_refs
        ]

    def _check_sums(self):
        if self.kind == 'game':
            return
        totals: Dict[tuple, Fraction] = {}
        for src, action, _, prob, _, _ in self.edge_refs:
            totals[(src[0], action)] = totals.get((src[0], action), Fraction(0)) + prob
        for key, total in totals.items():
            if total != 1:
                raise ValidationError(
                    f"probability sum is {total}, expected 1", rule="probability-sum", line=self.group_lines[key])

    def _build(self) -> Model:
        names = tuple(self.states)
        if self.kind == 'mc':
            return MarkovChain(
                states=names, initial=self.initial,
                edges=tuple(Edge(src, dst, prob, weight) for src, _, dst, prob, weight in self.edges))
        if self.kind == 'game':
            return TwoPlayerGame(
                vertices=names, owners=tuple(self.owners), initial=self.initial,
                edges=tuple(GameEdge(src, dst, weight) for src, _, dst, _, weight in self.edges))
        actions: Dict[str, int] = {}
        grouped: Dict[Tuple[int, int], List[Outcome]] = {}
        for src, action, dst, prob, weight in self.edges:
            key = (src, actions.setdefault(action, len(actions)))
            grouped.setdefault(key, []).append(Outcome(dst, prob, weight))
        return Mdp(
            states=names, initial=self.initial, actions=tuple(actions),
            choices=tuple(Choice(s, a, tuple(outcomes)) for (s, a), outcomes in grouped.items()))


def parse_model(text: str) -> Model:
    return ModelReader().parse(text)


def print_model(model: Model) -> str:
    """Render a model in the text format; parse_model reads it back"""
    kind = model_kind(model)
    lines = [kind]
    if kind == 'game':
        tags = {owner: tag for tag, owner in OWNERS.items()}
        lines += [f"state {name} {tags[owner]}" for name, owner in zip(model.vertices, model.owners)]
        lines.append(f"init {model.vertices[model.initial]}")
        lines += [f"edge {model.vertices[e.src]} -> {model.vertices[e.dst]} weight {e.weight}" for e in model.edges]
    elif kind == 'mc':
        lines += [f"state {name}" for name in model.states]
        lines.append(f"init {model.states[model.initial]}")
        lines += [
            f"edge {model.states[e.src]} -> {model.states[e.dst]} prob {e.prob} weight {e.weight}"
            for e in model.edges
        ]
    else:
        lines += [f"state {name}" for name in model.states]
        lines.append(f"init {model.states[model.initial]}")
        for choice in model.choices:
            action = model.actions[choice.action]
            lines += [
                f"edge {model.states[choice.state]} [{action}] -> {model.states[o.dst]} prob {o.prob} weight {o.weight}"
                for o in choice.outcomes
            ]
    return "\n".join(lines) + "\n"


def load_model(path) -> Model:
    """Read and parse a model file"""
    try:
        text = Path(path).read_text(encoding='utf-8')
    except OSError as e:
        raise UsageError(f"cannot read model file {path}: {e.strerror or e}")
    return parse_model(text)


def model_hash(model: Model) -> str:
    """Content hash of the canonical rendering"""
    return CacheManager.fingerprint(print_model(model))
