"""PySizing simulation cache tests"""
from numpy.testing import assert_equal, assert_raises

from pysizing.sim.cache import SimCache
from pysizing.sim.engine import digest

DECK = '* deck\nR1 a 0 1k\n.op\n.end\n'


def test_deck_and_digest_keys():
    cache = SimCache()
    cache[DECK] = 'result'
    assert digest(DECK) in cache
    assert_equal(cache[digest(DECK)], 'result')
    assert_equal(len(cache), 1)
    assert_equal(list(cache), [digest(DECK)])


def test_counters():
    cache = SimCache()
    assert DECK not in cache
    cache[DECK] = 'result'
    assert DECK in cache
    assert DECK in cache
    assert_equal((cache.hits, cache.misses), (2, 1))
    cache.clear()
    assert_equal((cache.hits, cache.misses, len(cache)), (0, 0, 0))


def test_eviction():
    cache = SimCache(maxsize=2)
    for i in range(3):
        cache['deck {0}\n'.format(i)] = i
    assert_equal(len(cache), 2)
    assert 'deck 0\n' not in cache
    assert 'deck 2\n' in cache
    del cache['deck 2\n']
    assert_equal(len(cache), 1)


def test_bad_keys():
    cache = SimCache()
    assert_raises(TypeError, cache.__setitem__, 42, 'result')
