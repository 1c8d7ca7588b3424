"""
Error Handler Utility
Exception hierarchy, exit-code mapping and logging setup for the analyzer
"""

import functools
import logging
import sys
import traceback
from datetime import datetime
from typing import Any, Callable, Dict, Optional

from config.settings import EXIT_CODES


class WindowAnalysisError(Exception):
    """Base class for every error the analyzer reports to its caller"""

    exit_code = EXIT_CODES['internal']
    title = "Analysis Error"


class UsageError(WindowAnalysisError):
    """Inconsistent command-line flags"""

    exit_code = EXIT_CODES['usage']
    title = "Usage Error"


class ModelParseError(WindowAnalysisError):
    """Model text that does not follow the grammar"""

    exit_code = EXIT_CODES['parse']
    title = "Parse Error"

    def __init__(self, message: str, line: Optional[int] = None, column: Optional[int] = None):
        self.line = line
        self.column = column
        location = ""
        if line is not None:
            location = f"line {line}"
            if column is not None:
                location += f", column {column}"
            location += ": "
        super().__init__(f"{location}{message}")


class ValidationError(WindowAnalysisError, ValueError):
    """A model or argument violates a semantic rule"""

    exit_code = EXIT_CODES['validation']
    title = "Validation Error"

    def __init__(self, message: str, rule: Optional[str] = None, line: Optional[int] = None):
        self.rule = rule
        self.line = line
        prefix = f"line {line}: " if line is not None else ""
        suffix = f" [{rule}]" if rule else ""
        super().__init__(f"{prefix}{message}{suffix}")


class PreconditionError(ValidationError):
    """An operation was called outside its domain (e.g. path shorter than the window)"""

    title = "Precondition Violated"


class UnsupportedInputError(ValidationError):
    """Input is well formed but outside what the solver handles"""

    title = "Unsupported Input"


class ResourceLimitError(WindowAnalysisError):
    """A construction would exceed its configured size cap"""

    exit_code = EXIT_CODES['resource']
    title = "Resource Limit"

    def __init__(self, message: str, size: Optional[int] = None, cap: Optional[int] = None):
        self.size = size
        self.cap = cap
        super().__init__(message)


class InternalSolverError(WindowAnalysisError):
    """A solver invariant failed; indicates a bug rather than bad input"""

    exit_code = EXIT_CODES['internal']
    title = "Internal Solver Error"


class ErrorHandler:
    """Error logging and exit-code mapping for the command-line driver"""

    def __init__(self, level: str = "WARNING", stream=None):
        """Initialize the error handler"""
        self.error_log = []
        self.stream = stream if stream is not None else sys.stderr
        self.setup_logging(level)

    def setup_logging(self, level: str = "WARNING"):
        """Setup logging configuration"""
        logging.basicConfig(
            level=getattr(logging, str(level).upper(), logging.WARNING),
            format='%(asctime)s - %(name)s - %(levelname)s - %(message)s'
        )
        logging.getLogger().setLevel(getattr(logging, str(level).upper(), logging.WARNING))
        self.logger = logging.getLogger('WindowAnalysisErrorHandler')

    def report(self, exc: BaseException, show_traceback: bool = False) -> int:
        """
        Log an exception and print a one-line diagnostic

        Args:
            exc: The exception raised by a command
            show_traceback: Whether to include technical details

        Returns:
            int: Process exit code for the exception
        """
        if isinstance(exc, WindowAnalysisError):
            title, code = exc.title, exc.exit_code
        else:
            title, code = "Unexpected Error", EXIT_CODES['internal']
        context = {'exception': type(exc).__name__}
        for attribute in ('line', 'column', 'rule', 'size', 'cap'):
            value = getattr(exc, attribute, None)
            if value is not None:
                context[attribute] = value

        self.log_error(title, str(exc), "error", context)
        print(f"error: {title}: {exc}", file=self.stream)
        if show_traceback:
            print(traceback.format_exc(), file=self.stream)
        return code

    def handle_exception(self, func: Callable) -> Callable:
        """Decorator turning raised errors into exit codes"""
        @functools.wraps(func)
        def wrapper(*args, **kwargs):
            try:
                return func(*args, **kwargs)
            except WindowAnalysisError as e:
                return self.report(e)
            except Exception as e:
                return self.report(e, show_traceback=True)
        return wrapper

    def safe_execute(self, func, *args, fallback=None, **kwargs):
        """
        Safely execute a function with error handling

        Args:
            func: Function to execute
            *args: Function arguments
            fallback: Fallback value if function fails
            **kwargs: Function keyword arguments

        Returns:
            Function result or fallback value
        """
        try:
            return func(*args, **kwargs)
        except WindowAnalysisError as e:
            self.log_error(
                "Execution Error",
                f"Failed to execute {func.__name__}: {e}",
                "warning",
                context={"function": func.__name__}
            )
            return fallback

    def log_error(self, title: str, message: str, error_type: str, context: Optional[Dict[str, Any]] = None):
        """Log error for debugging and monitoring"""
        error_entry = {
            'timestamp': datetime.now().isoformat(),
            'title': title,
            'message': message,
            'type': error_type,
            'context': context or {}
        }

        self.error_log.append(error_entry)

        if error_type == "error":
            self.logger.error(f"{title}: {message}")
        elif error_type == "warning":
            self.logger.warning(f"{title}: {message}")
        else:
            self.logger.info(f"{title}: {message}")

    def get_error_summary(self) -> Dict[str, Any]:
        """Get summary of recent errors for monitoring"""
        if not self.error_log:
            return {"total_errors": 0, "error_types": {}, "recent_errors": []}

        error_types = {}
        for error in self.error_log:
            error_types[error['title']] = error_types.get(error['title'], 0) + 1

        return {
            "total_errors": len(self.error_log),
            "error_types": error_types,
            "recent_errors": self.error_log[-5:]
        }

    def clear_error_log(self):
        """Clear the error log"""
        self.error_log.clear()
        self.logger.info("Error log cleared")
