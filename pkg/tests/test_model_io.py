from fractions import Fraction

import pytest

from src.model_io import load_model, model_hash, parse_model, print_model
from src.models import MarkovChain, Mdp, TwoPlayerGame
from src.testgen import coin_choice_mdp, two_bscc_chain, random_game, random_mdp
from src.utils.error_handler import ModelParseError, UsageError, ValidationError

LOOP = """\
mc
state s0
init s0
edge s0 -> s0 prob 1 weight 2
"""


def _lines(*body):
    return "\n".join(("mc", "state s0", "state s1", "init s0") + body) + "\n"


def test_corpus_fixtures_parse_to_the_builders(corpus_dir):
    assert load_model(corpus_dir / 'two_bscc.mc') == two_bscc_chain()
    assert load_model(corpus_dir / 'coin_choice.mdp') == coin_choice_mdp()


def test_every_corpus_file_survives_printing(corpus_dir):
    files = sorted(corpus_dir.iterdir())
    assert len(files) >= 10
    for path in files:
        model = load_model(path)
        assert parse_model(print_model(model)) == model, path.name


def test_printed_text_is_canonical():
    assert print_model(parse_model(LOOP)) == LOOP
    mdp = random_mdp(4, 2, 3, seed=1)
    text = print_model(mdp)
    assert print_model(parse_model(text)) == text
    game = random_game(3, 2, seed=1, min_weight=-2)
    assert parse_model(print_model(game)) == game


def test_exact_thirds_are_accepted(corpus_dir):
    chain = load_model(corpus_dir / 'dice.mc')
    assert isinstance(chain, MarkovChain)
    assert {e.prob for e in chain.edges} == {Fraction(1, 3)}


def test_rational_weights(corpus_dir):
    chain = load_model(corpus_dir / 'branch.mc')
    assert Fraction(-1, 2) in chain.weights


def test_game_and_mdp_kinds(corpus_dir):
    game = load_model(corpus_dir / 'small.game')
    assert isinstance(game, TwoPlayerGame)
    assert game.owners == (1, 1, 2, 2)
    assert game.vertices[game.initial] == 'u0'
    mdp = load_model(corpus_dir / 'coin_choice.mdp')
    assert isinstance(mdp, Mdp)
    assert mdp.actions == ('safe', 'coin', 'stay')


def test_probability_sum_reported_at_group_line():
    text = _lines(
        "edge s0 -> s0 prob 1/3 weight 0",
        "edge s0 -> s1 prob 1/3 weight 0",
        "edge s1 -> s1 prob 1 weight 0",
    )
    with pytest.raises(ValidationError, match="probability-sum") as info:
        parse_model(text)
    assert info.value.line == 6


def test_syntax_errors_carry_line_and_column():
    with pytest.raises(ModelParseError) as info:
        parse_model("mc\nstate s0\ninit s0\nedge s0 -> s0 prob 1 weigth 2\n")
    assert (info.value.line, info.value.column) == (4, 22)

    with pytest.raises(ModelParseError) as info:
        parse_model(_lines("edge s0 -> s1 prob 0.5 weight 1"))
    assert info.value.line == 5

    with pytest.raises(ModelParseError, match="zero denominator"):
        parse_model(_lines("edge s0 -> s1 prob 1/0 weight 1"))
    with pytest.raises(ModelParseError, match="unknown keyword"):
        parse_model(_lines("node s2"))
    with pytest.raises(ModelParseError, match="empty model"):
        parse_model("# nothing here\n\n")
    with pytest.raises(ModelParseError, match="model kind"):
        parse_model("chain\n")


@pytest.mark.parametrize("body, rule", [
    (("edge s0 -> s2 prob 1 weight 0",), "dangling-state"),
    (("state s0",), "duplicate-state"),
    (("init s1",), "duplicate-init"),
    (("edge s0 -> s1 prob 1/2 weight 0", "edge s0 -> s1 prob 1/2 weight 1"), "duplicate-edge"),
    (("edge s0 -> s1 prob 0 weight 0",), "probability-range"),
    (("edge s0 -> s1 prob 3/2 weight 0",), "probability-range"),
])
def test_validation_rules(body, rule):
    with pytest.raises(ValidationError, match=rule) as info:
        parse_model(_lines(*body))
    assert info.value.line == 5 + len(body) - 1


def test_states_may_be_declared_after_use():
    chain = parse_model("mc\ninit s1\nedge s1 -> s0 prob 1 weight 3\nstate s1\nedge s0 -> s0 prob 1 weight 0\nstate s0\n")
    assert chain.states == ('s1', 's0')
    assert chain.states[chain.initial] == 's1'
    assert [(e.src, e.dst, e.weight) for e in chain.edges] == [(0, 1, 3), (1, 1, 0)]

    game = parse_model("game\nedge u -> u weight 2\ninit u\nstate u player2\n")
    assert game.owners == (2,) and game.initial == 0


def test_undeclared_state_reported_at_referencing_line():
    text = "mc\ninit s0\nedge s0 -> s9 prob 1 weight 0\nstate s0\n"
    with pytest.raises(ValidationError, match="s9") as info:
        parse_model(text)
    assert info.value.rule == "dangling-state"
    assert info.value.line == 3


def test_missing_init_is_rejected():
    with pytest.raises(ValidationError, match="dangling-state"):
        parse_model("mc\nstate s0\nedge s0 -> s0 prob 1 weight 0\n")


def test_kind_specific_grammar():
    with pytest.raises(ModelParseError, match="player1 or player2"):
        parse_model("game\nstate u\ninit u\n")
    with pytest.raises(ModelParseError, match="action"):
        parse_model("mdp\nstate s\ninit s\nedge s -> s prob 1 weight 0\n")
    with pytest.raises(ModelParseError):
        parse_model("game\nstate u player1\ninit u\nedge u -> u prob 1 weight 0\n")


def test_model_hash_ignores_layout_but_not_content():
    spaced = "# comment\nmc\n\nstate  s0\ninit s0   # start\nedge s0 -> s0 prob 1 weight 2\n"
    assert model_hash(parse_model(spaced)) == model_hash(parse_model(LOOP))
    assert model_hash(parse_model(LOOP.replace("weight 2", "weight 3"))) != model_hash(parse_model(LOOP))


def test_unreadable_file_is_a_usage_error(tmp_path):
    with pytest.raises(UsageError):
        load_model(tmp_path / 'missing.mc')
