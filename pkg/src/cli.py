"""
Command-line driver
analyze, simulate, check-gw, sweep and gen subcommands with JSON or text result documents
"""

import argparse
import json
import logging
import sys
import time
from datetime import datetime
from typing import Any, Callable, Dict, List, Optional

import pytz

from config.settings import (
    ALGORITHM_NAMES,
    EXIT_CODES,
    FLAVOR_NAMES,
    OBJECTIVE_NAMES,
    OUTPUT_CONFIG,
    RUNTIME_DEFAULTS,
    SIMULATION_DEFAULTS,
    apply_env_overrides,
    format_decimal,
    format_rational,
    validate_positive,
    validate_probability,
    validate_threads,
    validate_window,
)
from src.mc_window import check_alt_good_window
from src.model_io import load_model, model_hash, print_model
from src.models import AnalysisResult, Flavor, MarkovChain, Model, Objective, model_kind, to_rational
from src.simulation import monte_carlo
from src.testgen import random_model
from src.utils.error_handler import ErrorHandler, UnsupportedInputError, UsageError, ValidationError
from src.window_analysis import WindowAnalyzer, components_table, distribution_table

logger = logging.getLogger(__name__)

DECIMAL_NOTE = "decimal rendering is display only; value is exact"


class _ArgumentParser(argparse.ArgumentParser):
    """argparse that raises UsageError instead of exiting"""

    def error(self, message):
        raise UsageError(message)


def _checked(validator: Callable, value, error=UsageError):
    try:
        return validator(value)
    except ValueError as e:
        if isinstance(e, ValidationError):
            raise
        raise error(str(e))


def build_parser(runtime: Dict[str, Any]) -> argparse.ArgumentParser:
    common = _ArgumentParser(add_help=False)
    common.add_argument('--log-level', default=runtime['log_level'], help='logging level (default from WMP_LOG_LEVEL)')
    common.add_argument('--output', metavar='FILE', help='write the result document to FILE instead of stdout')
    common.add_argument('--threads', type=int, default=runtime['threads'], help='worker threads')
    common.add_argument('--progress', action='store_true', help='progress bars for long value iterations')
    fmt = common.add_mutually_exclusive_group()
    fmt.add_argument('--json', dest='format', action='store_const', const='json')
    fmt.add_argument('--text', dest='format', action='store_const', const='text')
    common.set_defaults(format=OUTPUT_CONFIG['default_format'])

    parser = _ArgumentParser(prog='wmp', description='Expected window mean-payoff analysis in exact arithmetic')
    commands = parser.add_subparsers(dest='command', required=True)

    analyze = commands.add_parser('analyze', parents=[common], help='solve an objective exactly')
    analyze.add_argument('--model', required=True, metavar='FILE')
    analyze.add_argument('--objective', required=True, choices=OBJECTIVE_NAMES)
    analyze.add_argument('--lmax', type=int)
    analyze.add_argument('--flavor', default='payoff', choices=FLAVOR_NAMES)
    analyze.add_argument('--algorithm', default='product', choices=ALGORITHM_NAMES)

    simulate = commands.add_parser('simulate', parents=[common], help='Monte Carlo estimate')
    simulate.add_argument('--model', required=True, metavar='FILE')
    simulate.add_argument('--objective', required=True, choices=OBJECTIVE_NAMES)
    simulate.add_argument('--lmax', type=int)
    simulate.add_argument('--flavor', default='payoff', choices=FLAVOR_NAMES)
    simulate.add_argument('--samples', type=int, default=SIMULATION_DEFAULTS['samples'])
    simulate.add_argument('--horizon', type=int, default=SIMULATION_DEFAULTS['horizon'])
    simulate.add_argument('--burn-in', type=int, default=SIMULATION_DEFAULTS['burn_in'])
    simulate.add_argument('--seed', type=int, default=SIMULATION_DEFAULTS['seed'])

    check = commands.add_parser('check-gw', parents=[common], help='probabilistic good-window check')
    check.add_argument('--model', required=True, metavar='FILE')
    check.add_argument('--p', required=True, metavar='RAT')
    check.add_argument('--lmax', type=int, required=True)
    check.add_argument('--lambda', dest='threshold', required=True, metavar='RAT')

    sweep = commands.add_parser('sweep', parents=[common], help='fixed window values for l = 1..N')
    sweep.add_argument('--model', required=True, metavar='FILE')
    sweep.add_argument('--lmax-max', type=int, required=True)
    sweep.add_argument('--flavor', default='payoff', choices=FLAVOR_NAMES)

    gen = commands.add_parser('gen', parents=[common], help='print a seeded random model')
    gen.add_argument('--kind', required=True, choices=['mc', 'mdp', 'game', 'bscc'])
    gen.add_argument('--states', type=int, default=4)
    gen.add_argument('--max-weight', type=int, default=3)
    gen.add_argument('--seed', type=int, default=0)
    gen.add_argument('--actions', type=int, default=2)
    gen.add_argument('--density', type=float, default=0.4)
    gen.add_argument('--bipartite', action='store_true')
    return parser

# =============================================================================
# RESULT DOCUMENTS
# =============================================================================

def _objective(args) -> Objective:
    fixed = args.objective in ('fixwmp', 'dirfixwmp')
    if fixed and args.lmax is None:
        raise UsageError(f"--lmax is required for {args.objective}")
    if not fixed and args.lmax is not None:
        raise UsageError(f"--lmax does not apply to {args.objective}")
    window = _checked(validate_window, args.lmax) if fixed else None
    return Objective.parse(args.objective, window, args.flavor)


def _header(command: str, model: Model) -> Dict[str, Any]:
    return {
        'schema': OUTPUT_CONFIG['schema_version'],
        'command': command,
        'model_kind': model_kind(model),
        'model_hash': model_hash(model),
    }


def _timing(started_at: datetime, clock: float) -> Dict[str, Any]:
    return {'started_at': started_at.isoformat(), 'elapsed_seconds': round(time.perf_counter() - clock, 6)}


def result_document(result: AnalysisResult, model: Model) -> Dict[str, Any]:
    """Structured rendering of an analysis result; exact strings are authoritative"""
    document = _header('analyze', model)
    document.update({
        'objective': result.objective.kind.value,
        'flavor': result.objective.flavor.value,
        'lmax': result.objective.window,
        'algorithm': result.algorithm,
        'value': format_rational(result.value),
        'value_decimal': format_decimal(result.value),
        'decimal_note': DECIMAL_NOTE,
        'distribution': None,
        'components': [
            {
                'kind': c.kind,
                'states': list(c.states),
                'reach_probability': format_rational(c.reach_probability) if c.reach_probability is not None else None,
                'value': format_rational(c.value),
            }
            for c in result.components
        ],
        'transform': {'scale': result.transform.scale, 'shift': result.transform.shift},
        'notes': list(result.notes),
    })
    if result.distribution is not None:
        document['distribution'] = [
            {'value': format_rational(v), 'probability': format_rational(p)} for v, p in result.distribution.items()
        ]
    return document


def _render_text(document: Dict[str, Any], tables: List) -> str:
    lines = []
    for key, value in document.items():
        if isinstance(value, (list, dict)) or value is None:
            continue
        lines.append(f"{key}: {value}")
    for note in document.get('notes', []):
        lines.append(f"note: {note}")
    for title, table in tables:
        if table is not None and not table.empty:
            lines += ["", f"{title}:", table.to_string(index=False)]
    if 'timing' in document:
        lines.append(f"elapsed_seconds: {document['timing']['elapsed_seconds']}")
    return "\n".join(lines) + "\n"


def _emit(args, document: Dict[str, Any], tables: Optional[List] = None):
    if args.format == 'text':
        text = _render_text(document, tables or [])
    else:
        text = json.dumps(document, indent=OUTPUT_CONFIG['json_indent']) + "\n"
    _write(args, text)


def _write(args, text: str):
    if args.output:
        try:
            with open(args.output, 'w', encoding='utf-8') as handle:
                handle.write(text)
        except OSError as e:
            raise UsageError(f"cannot write {args.output}: {e.strerror or e}")
    else:
        sys.stdout.write(text)

# =============================================================================
# COMMANDS
# =============================================================================

def _now() -> datetime:
    return datetime.now(pytz.timezone(OUTPUT_CONFIG['timezone']))


def cmd_analyze(args) -> int:
    started_at, clock = _now(), time.perf_counter()
    model = load_model(args.model)
    objective = _objective(args)
    result = WindowAnalyzer(model, args.threads, args.progress).analyze(objective, args.algorithm)
    document = result_document(result, model)
    document['timing'] = _timing(started_at, clock)
    _emit(args, document, [('distribution', distribution_table(result)), ('components', components_table(result))])
    return EXIT_CODES['ok']


def cmd_simulate(args) -> int:
    started_at, clock = _now(), time.perf_counter()
    model = load_model(args.model)
    objective = _objective(args)
    samples = _checked(lambda v: validate_positive('--samples', v), args.samples)
    horizon = _checked(lambda v: validate_positive('--horizon', v), args.horizon)
    estimate = monte_carlo(model, objective, samples, horizon, args.burn_in, args.seed)
    document = _header('simulate', model)
    document.update({
        'objective': objective.kind.value,
        'flavor': objective.flavor.value,
        'lmax': objective.window,
        'samples': samples,
        'horizon': horizon,
        'burn_in': args.burn_in,
        'seed': args.seed,
        'mean': estimate.mean,
        'std': estimate.std,
        'ci_low': estimate.low,
        'ci_high': estimate.high,
        'ci_sigmas': estimate.sigmas,
        'timing': _timing(started_at, clock),
    })
    _emit(args, document)
    return EXIT_CODES['ok']


def cmd_check_gw(args) -> int:
    started_at, clock = _now(), time.perf_counter()
    model = load_model(args.model)
    if not isinstance(model, MarkovChain):
        raise UnsupportedInputError("the good-window check needs a Markov chain", rule="check-gw-model")
    p = _checked(validate_probability, to_rational(args.p), error=ValidationError)
    l_max = _checked(validate_window, args.lmax)
    threshold = to_rational(args.threshold)
    report = check_alt_good_window(model, p, l_max, threshold)
    document = _header('check-gw', model)
    document.update({
        'p': format_rational(p),
        'lmax': l_max,
        'lambda': format_rational(threshold),
        'holds': report.holds_globally,
        'states': [
            {'state': name, 'good_mass': format_rational(mass), 'satisfied': report.satisfied[name]}
            for name, mass in report.masses.items()
        ],
        'timing': _timing(started_at, clock),
    })
    _emit(args, document)
    return EXIT_CODES['ok']


def cmd_sweep(args) -> int:
    started_at, clock = _now(), time.perf_counter()
    model = load_model(args.model)
    top = _checked(validate_window, args.lmax_max)
    table = WindowAnalyzer(model, args.threads, args.progress).sweep(range(1, top + 1), Flavor(args.flavor))
    document = _header('sweep', model)
    document.update({
        'flavor': args.flavor,
        'rows': [
            {
                'lmax': int(row['l_max']),
                'fixwmp': format_rational(row['fixwmp']),
                'bwmp': format_rational(row['bwmp']),
                'gap': format_rational(row['gap']),
            }
            for row in table.to_dict('records')
        ],
        'timing': _timing(started_at, clock),
    })
    shown = table.assign(**{col: table[col].map(format_rational) for col in ('fixwmp', 'bwmp', 'gap')})
    _emit(args, document, [('sweep', shown)])
    return EXIT_CODES['ok']


def cmd_gen(args) -> int:
    size = _checked(lambda v: validate_positive('--states', v), args.states)
    actions = _checked(lambda v: validate_positive('--actions', v), args.actions)
    if args.max_weight < 0:
        raise UsageError("--max-weight must be non-negative")
    if not 0 <= args.density <= 1:
        raise UsageError("--density must lie in [0, 1]")
    model = random_model(args.kind, size, args.max_weight, args.seed, args.density,
                         actions=actions, bipartite=args.bipartite)
    _write(args, print_model(model))
    return EXIT_CODES['ok']


COMMANDS = {
    'analyze': cmd_analyze,
    'simulate': cmd_simulate,
    'check-gw': cmd_check_gw,
    'sweep': cmd_sweep,
    'gen': cmd_gen,
}


def main(argv: Optional[List[str]] = None) -> int:
    """Run one command; returns the process exit code"""
    handler = ErrorHandler(RUNTIME_DEFAULTS['log_level'])

    def run(argv) -> int:
        runtime = _checked(lambda env: apply_env_overrides(env), None)
        args = build_parser(runtime).parse_args(argv)
        handler.setup_logging(args.log_level)
        args.threads = _checked(validate_threads, args.threads)
        args.progress = args.progress or runtime['show_progress']
        logger.debug("running %s", args.command)
        return COMMANDS[args.command](args)

    return handler.handle_exception(run)(argv)
