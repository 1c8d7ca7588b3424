"""
Analyzer Utilities Package
Error handling, solver caching and worker fan-out
"""

from .error_handler import (
    ErrorHandler,
    WindowAnalysisError,
    UsageError,
    ModelParseError,
    ValidationError,
    PreconditionError,
    UnsupportedInputError,
    ResourceLimitError,
    InternalSolverError,
)
from .cache_manager import CacheManager, solver_cache
from .workers import ordered_map

__all__ = [
    'ErrorHandler', 'CacheManager', 'solver_cache', 'ordered_map',
    'WindowAnalysisError', 'UsageError', 'ModelParseError', 'ValidationError',
    'PreconditionError', 'UnsupportedInputError', 'ResourceLimitError',
    'InternalSolverError',
]
