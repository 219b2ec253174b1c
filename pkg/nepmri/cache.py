"""
Operator caching for repeated solves at the same sample point

This module provides in-memory caching of assembled operators T(z) with:
- LRU (Least Recently Used) eviction policy
- Lazy factorization, stored next to the operator it belongs to
- Thread-safe operations for concurrent access
"""

from collections import OrderedDict
from typing import Any, Callable, Dict, Optional
import threading
import logging

logger = logging.getLogger(__name__)


class OperatorEntry:
    """Assembled operator with its (lazily computed) factorization"""

    __slots__ = ('matrix', 'factorization')

    def __init__(self, matrix: Any):
        self.matrix = matrix
        self.factorization: Optional[Any] = None


class OperatorCache:
    """
    In-memory LRU cache of assembled operators keyed by sample point

    The greedy loop, residual verification and validation sweeps may all
    touch T(z) at the same z. Assembly and factorization are the expensive
    parts of a solve, so both are kept here and reused.

    Features:
    - LRU eviction when cache is full
    - Thread-safe operations with per-key locks (one assembly and one
      factorization per key; different keys proceed in parallel)
    - Hit/miss accounting
    """

    def __init__(self, max_size: int = 64):
        """
        Initialize the operator cache

        Args:
            max_size: Maximum number of operators to keep (default: 64)
        """
        if max_size < 1:
            raise ValueError("Cache size must be at least 1")
        self.max_size = max_size
        self._cache: "OrderedDict[complex, OperatorEntry]" = OrderedDict()
        self._key_locks: Dict[complex, threading.Lock] = {}
        self._lock = threading.Lock()  # Guards the bookkeeping only, never assembly or factorization
        self._hits = 0
        self._misses = 0

        logger.debug(f"OperatorCache initialized with max_size={max_size}")

    @staticmethod
    def _make_key(z: complex) -> complex:
        """Normalize the sample point (real input and 0j imaginary part share a key)"""
        return complex(z)

    def _key_lock(self, key: complex) -> threading.Lock:
        with self._lock:
            return self._key_locks.setdefault(key, threading.Lock())

    def _lookup(self, key: complex) -> Optional[OperatorEntry]:
        with self._lock:
            entry = self._cache.get(key)
            if entry is not None:
                self._cache.move_to_end(key)
                self._hits += 1
                logger.debug(f"Cache HIT: z={key}")
            return entry

    def get_entry(self, z: complex, assemble: Callable[[complex], Any]) -> OperatorEntry:
        """
        Retrieve the cached operator at z, assembling it on a miss

        Threads asking for the same z wait for a single assembly; different
        z assemble concurrently.

        Args:
            z: Sample point
            assemble: Callable building T(z) when it is not cached

        Returns:
            The cache entry holding T(z)
        """
        key = self._make_key(z)
        entry = self._lookup(key)
        if entry is not None:
            return entry

        with self._key_lock(key):
            # Another thread may have assembled it while we waited
            entry = self._lookup(key)
            if entry is not None:
                return entry

            with self._lock:
                self._misses += 1
            logger.debug(f"Cache MISS: z={key}")
            entry = OperatorEntry(assemble(key))

            with self._lock:
                self._cache[key] = entry
                # Evict LRU if cache is full
                if len(self._cache) > self.max_size:
                    evicted_key, _ = self._cache.popitem(last=False)
                    self._key_locks.pop(evicted_key, None)
                    logger.debug(f"Evicted LRU operator: z={evicted_key}")

            return entry

    def matrix(self, z: complex, assemble: Callable[[complex], Any]) -> Any:
        """Return T(z), assembling it if needed"""
        return self.get_entry(z, assemble).matrix

    def factorization(
        self,
        z: complex,
        assemble: Callable[[complex], Any],
        factorize: Callable[[Any], Any],
    ) -> Any:
        """
        Return the factorization of T(z), computing it at most once per key

        Args:
            z: Sample point
            assemble: Callable building T(z)
            factorize: Callable factorizing the assembled matrix; its
                exceptions propagate and nothing is stored

        Returns:
            Whatever ``factorize`` returned for T(z)
        """
        entry = self.get_entry(z, assemble)
        if entry.factorization is not None:
            return entry.factorization

        with self._key_lock(self._make_key(z)):
            if entry.factorization is None:
                entry.factorization = factorize(entry.matrix)
            return entry.factorization

    def get_stats(self) -> dict:
        """
        Get cache statistics

        Returns:
            Dictionary with cache metrics
        """
        with self._lock:
            total_requests = self._hits + self._misses
            hit_rate = (self._hits / total_requests * 100) if total_requests > 0 else 0

            return {
                'size': len(self._cache),
                'max_size': self.max_size,
                'hits': self._hits,
                'misses': self._misses,
                'hit_rate': round(hit_rate, 2),
                'total_requests': total_requests
            }

    def clear(self):
        """Clear all cached operators"""
        with self._lock:
            self._cache.clear()
            self._key_locks.clear()
            self._hits = 0
            self._misses = 0
            logger.debug("Operator cache cleared")
