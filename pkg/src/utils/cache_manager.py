"""
Cache Manager Utility
Memoization of per-component solver values and model fingerprints
"""

import functools
import hashlib
import json
import threading
from typing import Any, Callable, Dict


class CacheManager:
    """In-process cache for pure solver functions"""

    def __init__(self, max_entries: int = 4096):
        """Initialize the cache manager"""
        self.max_entries = max_entries
        self._store: Dict[str, Any] = {}
        self._lock = threading.Lock()
        self.cache_stats = {
            'hits': 0,
            'misses': 0,
            'total_requests': 0
        }

    def generate_cache_key(self, func_name: str, *args, **kwargs) -> str:
        """
        Generate unique cache key for function and arguments

        Args:
            func_name: Name of the function
            *args: Function arguments
            **kwargs: Function keyword arguments

        Returns:
            str: Unique cache key
        """
        key_data = {
            'func': func_name,
            'args': args,
            'kwargs': kwargs
        }

        # Fractions and frozensets serialize through str
        key_string = json.dumps(key_data, sort_keys=True, default=str)
        return hashlib.md5(key_string.encode()).hexdigest()

    def cache_data(self, func: Callable) -> Callable:
        """Decorator memoizing a pure function on its (serializable) arguments"""
        @functools.wraps(func)
        def wrapper(*args, **kwargs):
            cache_key = self.generate_cache_key(func.__qualname__, *args, **kwargs)
            with self._lock:
                self.cache_stats['total_requests'] += 1
                if cache_key in self._store:
                    self.cache_stats['hits'] += 1
                    return self._store[cache_key]
                self.cache_stats['misses'] += 1

            result = func(*args, **kwargs)
            with self._lock:
                if len(self._store) >= self.max_entries:
                    # drop the oldest entry
                    self._store.pop(next(iter(self._store)))
                self._store[cache_key] = result
            return result
        return wrapper

    def get_cache_stats(self) -> Dict[str, Any]:
        """Hit/miss statistics plus the current hit rate"""
        with self._lock:
            stats = dict(self.cache_stats)
            stats['entries'] = len(self._store)
        total = stats['total_requests']
        stats['hit_rate'] = stats['hits'] / total if total else 0.0
        return stats

    def clear_cache(self):
        """Drop every cached value and reset the statistics"""
        with self._lock:
            self._store.clear()
            for key in self.cache_stats:
                self.cache_stats[key] = 0

    @staticmethod
    def fingerprint(text: str) -> str:
        """Stable content hash used to identify models in result documents"""
        return hashlib.sha256(text.encode('utf-8')).hexdigest()


# Shared by the solver modules
solver_cache = CacheManager()
