"""
Thread-safe in-memory cache for loaded checkpoints
"""
import threading
from dataclasses import dataclass
from datetime import datetime, timedelta
from typing import Any, Callable, Dict, List, Optional


@dataclass
class CacheEntry:
    data: Any
    loaded_at: datetime
    expires_at: datetime
    source_mtime: Optional[float] = None

    def is_expired(self) -> bool:
        return datetime.now() > self.expires_at


class MemoryCache:
    """Key -> value store with per-entry time-to-live.

    An entry also goes stale when the file it was loaded from changes
    (``source_mtime`` differs from the caller's current value).
    """

    def __init__(self, ttl_seconds: int = 300):
        self._cache: Dict[str, CacheEntry] = {}
        self._lock = threading.RLock()
        self.ttl_seconds = ttl_seconds
        self.hits = 0
        self.misses = 0

    def get(self, key: str, source_mtime: Optional[float] = None) -> Optional[Any]:
        with self._lock:
            entry = self._cache.get(key)
            if entry is None:
                self.misses += 1
                return None
            if entry.is_expired() or (source_mtime is not None and entry.source_mtime != source_mtime):
                del self._cache[key]
                self.misses += 1
                return None
            self.hits += 1
            return entry.data

    def set(self, key: str, value: Any, ttl_seconds: Optional[int] = None, source_mtime: Optional[float] = None) -> None:
        ttl = self.ttl_seconds if ttl_seconds is None else ttl_seconds
        with self._lock:
            now = datetime.now()
            self._cache[key] = CacheEntry(
                data=value, loaded_at=now, expires_at=now + timedelta(seconds=ttl), source_mtime=source_mtime
            )

    def get_or_load(self, key: str, loader: Callable[[], Any], source_mtime: Optional[float] = None) -> Any:
        """Cached value, or the loader's result stored under key"""
        with self._lock:
            value = self.get(key, source_mtime)
            if value is None:
                value = loader()
                self.set(key, value, source_mtime=source_mtime)
            return value

    def invalidate(self, key: str) -> None:
        with self._lock:
            self._cache.pop(key, None)

    def clear(self) -> None:
        with self._lock:
            self._cache.clear()

    def keys(self) -> List[str]:
        with self._lock:
            return [k for k, e in self._cache.items() if not e.is_expired()]

    def stats(self) -> Dict[str, Any]:
        with self._lock:
            return {"entries": len(self.keys()), "hits": self.hits, "misses": self.misses, "ttl_seconds": self.ttl_seconds}


# Global cache instance for the inference service
checkpoint_cache = MemoryCache()
