import numpy as np
import pytest

from flowloc.analyzers.linalg import decompose
from flowloc.utils.cache import (
    array_fingerprint,
    generate_cache_key,
    get_cache_stats,
    get_cached,
    invalidate_cache,
    set_cache,
)


@pytest.fixture(autouse=True)
def empty_cache():
    invalidate_cache()
    yield
    invalidate_cache()


def test_fingerprint_sensitive_to_bytes_and_dtype():
    a = np.array([1.0, 2.0])
    assert array_fingerprint(a) == array_fingerprint(a.copy())
    assert array_fingerprint(a) != array_fingerprint(np.array([1.0, 2.0 + 1e-15]))
    assert array_fingerprint(a) != array_fingerprint(a.astype(np.float32))
    assert len(array_fingerprint(a)) == 16


def test_key_includes_snapshot():
    plain = generate_cache_key("abc", "decomposition")
    assert plain == "abc_decomposition"
    assert generate_cache_key("abc", "decomposition", np.ones(3)).startswith(plain + "_")


def test_hit_and_miss():
    assert get_cached("k_decomposition") is None
    set_cache("k_decomposition", 42)
    assert get_cached("k_decomposition") == 42
    assert get_cache_stats()["total_hits"] == 1


def test_eviction_keeps_newest():
    for i in range(5):
        set_cache(f"g{i}_decomposition", i, max_entries=3)
    assert get_cached("g0_decomposition") is None
    assert get_cached("g4_decomposition") == 4
    assert get_cache_stats()["total_entries"] == 3


def test_disabled_cache_stores_nothing():
    set_cache("g_decomposition", 1, max_entries=0)
    assert get_cached("g_decomposition") is None


def test_invalidate_by_fingerprint_and_type():
    set_cache("aaa_decomposition", 1)
    set_cache("aaa_other", 2)
    set_cache("bbb_decomposition", 3)
    assert invalidate_cache(fingerprint="aaa") == 2
    assert invalidate_cache(data_type="decomposition") == 1
    assert get_cache_stats()["total_entries"] == 0


def test_stats_by_type():
    set_cache("aaa_decomposition", 1)
    set_cache("bbb_decomposition", 2)
    assert get_cache_stats()["entries_by_type"] == {"decomposition": 2}


def test_decompose_reuses_entry(triangle):
    first = decompose(triangle)
    assert get_cache_stats()["total_entries"] == 1
    assert decompose(triangle) is first
