"""
Mridangam Stroke Transcriber - Caching Module

In-memory memo of extracted feature blocks so that experiment grids that
revisit the same (recording, shift) pair extract its features once.
"""

import logging
from threading import RLock
from typing import Any, Callable, Dict, Hashable, Optional

logger = logging.getLogger(__name__)


class FeatureCache:
    """
    Thread-safe in-memory cache keyed by hashable tuples.

    Grid rows may run on worker threads, so every access holds the lock.
    """

    def __init__(self):
        """Initialize an empty cache."""
        self._cache: Dict[Hashable, Any] = {}
        self._lock = RLock()
        self.hits = 0
        self.misses = 0
        logger.debug("Feature cache initialized")

    def get(self, key: Hashable) -> Optional[Any]:
        """Return the cached value or None."""
        with self._lock:
            if key not in self._cache:
                self.misses += 1
                return None
            self.hits += 1
            logger.debug(f"Cache hit for key {key!r}")
            return self._cache[key]

    def set(self, key: Hashable, value: Any) -> None:
        with self._lock:
            self._cache[key] = value

    def get_or_compute(self, key: Hashable, compute: Callable[[], Any]) -> Any:
        """
        Return the cached value, computing and storing it on a miss.

        The lock is not held while computing; two threads racing on one
        key both compute and the last write wins.
        """
        value = self.get(key)
        if value is not None:
            return value
        value = compute()
        self.set(key, value)
        return value

    def get_stats(self) -> Dict[str, int]:
        with self._lock:
            return {"entries": len(self._cache), "hits": self.hits, "misses": self.misses}
