"""
Window analysis dispatcher
Routes an objective to the right solver, handles the cost flavor and
tabulates results
"""

import logging
from dataclasses import replace
from typing import Iterable, List, Optional

import pandas as pd

from config.settings import format_decimal, format_probability, format_rational
from src.game_solvers import max_direct_window_value
from src.mc_window import (
    bwmp_mc,
    dirfixwmp_mc,
    dirfixwmp_unfold,
    fixwmp_mc,
    fixwmp_sweep as mc_fixwmp_sweep,
)
from src.mdp_window import bwmp_mdp, dirfixwmp_mdp, fixwmp_mdp, fixwmp_sweep as mdp_fixwmp_sweep
from src.models import (
    AnalysisResult,
    Flavor,
    Kind,
    MarkovChain,
    Mdp,
    Model,
    Objective,
    TwoPlayerGame,
    negate_weights,
)
from src.utils.error_handler import UnsupportedInputError, UsageError

logger = logging.getLogger(__name__)

DIRECT_BOUNDED_NOTE = "dirbwmp equals bwmp on every path; answered by the bounded pipeline"


class WindowAnalyzer:
    """
    Window mean-payoff analysis of one model
    """

    def __init__(self, model: Model, threads: int = 1, show_progress: bool = False):
        """Initialize the analyzer for a model"""
        self.model = model
        self.threads = threads
        self.show_progress = show_progress

    def analyze(self, objective: Objective, algorithm: str = 'product') -> AnalysisResult:
        """
        Solve one objective

        Args:
            objective: Objective with kind, window and flavor
            algorithm: 'product' or 'unfold' (Markov chains, dirfixwmp only)

        Returns:
            AnalysisResult in user weights and the requested flavor
        """
        if algorithm == 'unfold' and not isinstance(self.model, MarkovChain):
            raise UsageError("--algorithm unfold is only available for Markov chains")
        if algorithm not in ('product', 'unfold'):
            raise UsageError(f"unknown algorithm {algorithm!r}")

        cost = objective.flavor == Flavor.COST
        model = negate_weights(self.model) if cost else self.model
        payoff = replace(objective, flavor=Flavor.PAYOFF)
        result = self._solve(model, payoff, algorithm)
        if cost:
            result = result.negated()
        logger.debug("%s solved by %s", result.objective.label, result.algorithm)
        return result

    def _solve(self, model: Model, objective: Objective, algorithm: str) -> AnalysisResult:
        if objective.kind == Kind.DIRECT_BOUNDED:
            bounded = self._solve(model, Objective(Kind.BOUNDED), algorithm)
            return replace(bounded, objective=objective, notes=bounded.notes + (DIRECT_BOUNDED_NOTE,))

        if isinstance(model, MarkovChain):
            if objective.kind == Kind.FIXED:
                return fixwmp_mc(model, objective.window, self.threads)
            if objective.kind == Kind.BOUNDED:
                return bwmp_mc(model, self.threads)
            if algorithm == 'unfold':
                return dirfixwmp_unfold(model, objective.window)
            return dirfixwmp_mc(model, objective.window, self.threads)

        if isinstance(model, Mdp):
            if objective.kind == Kind.FIXED:
                return fixwmp_mdp(model, objective.window, self.threads)
            if objective.kind == Kind.BOUNDED:
                return bwmp_mdp(model, self.threads, self.show_progress)
            return dirfixwmp_mdp(model, objective.window)

        if isinstance(model, TwoPlayerGame) and objective.kind == Kind.DIRECT_FIXED:
            values = max_direct_window_value(model, objective.window, [model.initial])
            return AnalysisResult(objective=objective, value=values.at(model.initial), algorithm='direct-window-game')
        raise UnsupportedInputError(
            f"{objective.kind.value} is not available for two-player games; use dirfixwmp", rule="game-objective")

    def sweep(self, l_values: Iterable[int], flavor: Flavor = Flavor.PAYOFF) -> pd.DataFrame:
        """
        Fixed window values for several window lengths next to the bounded value

        Returns:
            DataFrame with columns l_max, fixwmp, bwmp and gap (distance to the bounded value)
        """
        l_values = list(l_values)
        cost = flavor == Flavor.COST
        model = negate_weights(self.model) if cost else self.model
        if isinstance(model, MarkovChain):
            table = mc_fixwmp_sweep(model, l_values, self.threads)
        elif isinstance(model, Mdp):
            table = mdp_fixwmp_sweep(model, l_values, self.threads, self.show_progress)
        else:
            raise UnsupportedInputError("window sweeps need a Markov chain or an MDP", rule="sweep-model")
        if cost:
            table['fixwmp'] = table['fixwmp'].map(lambda v: -v)
            table['bwmp'] = table['bwmp'].map(lambda v: -v)
        return table


def distribution_table(result: AnalysisResult) -> Optional[pd.DataFrame]:
    if result.distribution is None:
        return None
    rows = [
        {'value': format_rational(v), 'decimal': format_decimal(v), 'probability': format_probability(p)}
        for v, p in result.distribution.items()
    ]
    return pd.DataFrame(rows, columns=['value', 'decimal', 'probability'])


def components_table(result: AnalysisResult) -> Optional[pd.DataFrame]:
    if not result.components:
        return None
    rows: List[dict] = []
    for component in result.components:
        rows.append({
            'kind': component.kind,
            'states': ",".join(component.states),
            'reach': format_rational(component.reach_probability) if component.reach_probability is not None else "",
            'value': format_rational(component.value),
        })
    return pd.DataFrame(rows, columns=['kind', 'states', 'reach', 'value'])
