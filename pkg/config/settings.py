"""
Configuration Settings for the Window Mean-Payoff Analyzer
Solver limits, output formatting, simulation defaults and exit codes
"""

import os
from decimal import Decimal, ROUND_HALF_EVEN, localcontext
from fractions import Fraction

# =============================================================================
# SOLVER LIMITS
# =============================================================================

# Size guards for the constructions that grow exponentially in l_max or W
SOLVER_LIMITS = {
    'unfold_max_states': 10**6,          # |S|^l_max guard for the path-chain algorithm
    'dirfix_product_max_states': 10**6,  # reachable states of the MDP window-vector product
    'threshold_product_max_states': 10**6,
    'mean_payoff_max_iterations': 10**8,
    'realized_value_max_paths': 10**5,   # above this, fall back to the full candidate set
}

# Brute-force oracles are only meant for desk-sized instances
ORACLE_LIMITS = {
    'max_paths': 10**6,
    'max_product_states': 10**5,
    'max_strategy_pairs': 10**5,
}

# =============================================================================
# OUTPUT & RESULT DOCUMENTS
# =============================================================================

OUTPUT_CONFIG = {
    'schema_version': 1,
    'decimal_digits': 12,
    'timezone': 'UTC',
    'default_format': 'json',
    'json_indent': 2,
}

# Process exit codes
EXIT_CODES = {
    'ok': 0,
    'internal': 1,
    'usage': 2,
    'parse': 3,
    'validation': 4,
    'resource': 5,
}

# =============================================================================
# SIMULATION
# =============================================================================

SIMULATION_DEFAULTS = {
    'samples': 100_000,
    'horizon': 300,
    'burn_in': 100,
    'seed': 0,
    'confidence_sigmas': 4,
    'chunk_size': 20_000,     # paths sampled per vectorized batch
}

# =============================================================================
# RUNTIME
# =============================================================================

RUNTIME_DEFAULTS = {
    'threads': 1,
    'log_level': 'WARNING',
    'show_progress': False,
}

OBJECTIVE_NAMES = ['fixwmp', 'dirfixwmp', 'bwmp', 'dirbwmp']
FLAVOR_NAMES = ['payoff', 'cost']
ALGORITHM_NAMES = ['product', 'unfold']

# =============================================================================
# ENVIRONMENT VARIABLES
# =============================================================================

def load_env_vars():
    """Load runtime overrides from the environment"""
    return {
        'threads': os.getenv('WMP_THREADS'),
        'log_level': os.getenv('WMP_LOG_LEVEL'),
        'unfold_cap': os.getenv('WMP_UNFOLD_CAP'),
        'product_cap': os.getenv('WMP_PRODUCT_CAP'),
        'show_progress': os.getenv('WMP_SHOW_PROGRESS'),
    }


def apply_env_overrides(env=None):
    """
    Fold environment overrides into the runtime and limit tables

    Args:
        env: Mapping as returned by load_env_vars (read from os.environ if None)

    Returns:
        Dict with the effective runtime settings
    """
    env = load_env_vars() if env is None else env
    runtime = dict(RUNTIME_DEFAULTS)
    if env.get('threads'):
        runtime['threads'] = validate_threads(int(env['threads']))
    if env.get('log_level'):
        runtime['log_level'] = env['log_level'].upper()
    if env.get('show_progress'):
        runtime['show_progress'] = env['show_progress'].lower() in ('1', 'true', 'yes')
    if env.get('unfold_cap'):
        SOLVER_LIMITS['unfold_max_states'] = validate_positive('WMP_UNFOLD_CAP', int(env['unfold_cap']))
    if env.get('product_cap'):
        cap = validate_positive('WMP_PRODUCT_CAP', int(env['product_cap']))
        SOLVER_LIMITS['dirfix_product_max_states'] = cap
        SOLVER_LIMITS['threshold_product_max_states'] = cap
    return runtime

# =============================================================================
# VALIDATION FUNCTIONS
# =============================================================================

def validate_positive(name, value):
    """Validate a strictly positive integer setting"""
    if not isinstance(value, int) or isinstance(value, bool):
        raise ValueError(f"{name} must be an integer")
    if value < 1:
        raise ValueError(f"{name} must be at least 1, got {value}")
    return value


def validate_window(l_max):
    """Validate a window length"""
    return validate_positive("window length l_max", l_max)


def validate_threads(threads):
    """Validate a worker thread count"""
    return validate_positive("thread count", threads)


def validate_probability(p):
    """Validate a rational probability threshold"""
    p = Fraction(p)
    if p < 0 or p > 1:
        raise ValueError(f"probability must lie in [0, 1], got {p}")
    return p

# =============================================================================
# UTILITY FUNCTIONS
# =============================================================================

def format_rational(value):
    """Exact rendering: "p/q", or "p" for integers"""
    value = Fraction(value)
    return str(value)


def format_decimal(value, digits=None):
    """Display-only decimal with a fixed number of significant digits"""
    digits = digits or OUTPUT_CONFIG['decimal_digits']
    value = Fraction(value)
    with localcontext() as ctx:
        ctx.prec = digits
        ctx.rounding = ROUND_HALF_EVEN
        rendered = Decimal(value.numerator) / Decimal(value.denominator)
    return format(rendered.normalize(), 'f') if rendered != 0 else '0'


def format_probability(value):
    """Probability as exact string plus a percentage for humans"""
    value = Fraction(value)
    return f"{value} ({float(value):.2%})"
