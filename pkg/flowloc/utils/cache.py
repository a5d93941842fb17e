"""
Decomposition Cache for FlowLoc
Avoids recomputing the spectral decomposition of a graph that several checks share
"""

import hashlib
import logging
import threading
from datetime import datetime
from typing import Any, Dict, Optional

import numpy as np

from flowloc.utils.config import CACHE_MAX_ENTRIES

logger = logging.getLogger(__name__)

# In-memory cache, insertion ordered; oldest entries evicted first
_cache: Dict[str, Dict[str, Any]] = {}
_lock = threading.Lock()


def array_fingerprint(*arrays: np.ndarray) -> str:
    """
    Hash the exact bytes, dtypes and shapes of numpy arrays

    Returns:
        str: 16 hex characters identifying the arrays
    """
    digest = hashlib.sha256()
    for array in arrays:
        array = np.ascontiguousarray(array)
        digest.update(str(array.dtype).encode())
        digest.update(str(array.shape).encode())
        digest.update(array.tobytes())
    return digest.hexdigest()[:16]


def generate_cache_key(fingerprint: str, data_type: str, data_snapshot: Optional[np.ndarray] = None) -> str:
    """
    Generate a cache key from a graph fingerprint, data type and optional array snapshot

    Args:
        fingerprint: Graph fingerprint (see WeightedMultigraph.fingerprint)
        data_type: Kind of cached object (e.g. 'decomposition')
        data_snapshot: Extra array the cached object depends on (e.g. the scaling diagonal)

    Returns:
        str: Unique cache key
    """
    base_key = f"{fingerprint}_{data_type}"
    if data_snapshot is not None:
        base_key = f"{base_key}_{array_fingerprint(data_snapshot)}"
    return base_key


def get_cached(cache_key: str) -> Optional[Any]:
    """
    Retrieve an object from the cache

    Args:
        cache_key: Cache key to lookup

    Returns:
        Cached object if present, None otherwise
    """
    with _lock:
        entry = _cache.get(cache_key)
        if entry is None:
            logger.debug(f"Cache miss: {cache_key}")
            return None
        entry['hits'] += 1
    logger.debug(f"Cache hit: {cache_key}")
    return entry['data']


def set_cache(cache_key: str, data: Any, max_entries: int = CACHE_MAX_ENTRIES) -> None:
    """
    Store an object, evicting the oldest entries beyond max_entries

    Args:
        cache_key: Unique cache key
        data: Object to cache (must be immutable)
        max_entries: Capacity of the cache
    """
    if max_entries <= 0:
        return

    with _lock:
        _cache.pop(cache_key, None)
        _cache[cache_key] = {
            'data': data,
            'created': datetime.now(),
            'hits': 0,
        }
        while len(_cache) > max_entries:
            oldest = next(iter(_cache))
            del _cache[oldest]
            logger.debug(f"Evicted: {oldest}")

    logger.debug(f"Cached: {cache_key}")


def invalidate_cache(fingerprint: Optional[str] = None, data_type: Optional[str] = None) -> int:
    """
    Invalidate cache entries

    Args:
        fingerprint: If provided, invalidate all entries for this graph
        data_type: If provided, invalidate all entries of this type

    Returns:
        int: Number of entries invalidated
    """
    with _lock:
        if fingerprint is None and data_type is None:
            count = len(_cache)
            _cache.clear()
            logger.info(f"Cleared entire cache ({count} entries)")
            return count

        keys_to_delete = [
            key for key in _cache
            if (fingerprint and key.startswith(fingerprint))
            or (data_type and f"_{data_type}" in key)
        ]
        for key in keys_to_delete:
            del _cache[key]

    logger.info(f"Invalidated {len(keys_to_delete)} cache entries")
    return len(keys_to_delete)


def get_cache_stats() -> Dict[str, Any]:
    """
    Get cache statistics

    Returns:
        dict: total entries, entries per data type, total hits
    """
    with _lock:
        types: Dict[str, int] = {}
        for key in _cache:
            parts = key.split('_')
            if len(parts) >= 2:
                types[parts[1]] = types.get(parts[1], 0) + 1
        return {
            'total_entries': len(_cache),
            'entries_by_type': types,
            'total_hits': sum(e['hits'] for e in _cache.values()),
        }
