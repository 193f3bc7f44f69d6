"""This module provides a simulation cache so that identical decks are not
simulated twice across iterations and attempts."""
import hashlib
import logging
import threading
from collections import OrderedDict
from collections.abc import MutableMapping

logger = logging.getLogger(__name__)


def _deck_key(key):
    if isinstance(key, str) and len(key) == 40 and '\n' not in key:
        return key
    if isinstance(key, str):
        return hashlib.sha1(key.encode('utf-8')).hexdigest()
    raise TypeError("cache keys are deck text or deck digests, not {0!r}".format(type(key)))


###############################################################################
### Set up a simulation cache so the same deck isn't run repetitively ###
###############################################################################

class SimCache(MutableMapping):
    """A lightweight cache of simulation results keyed by deck digest.  Deck
    text may be used as a key directly; it is hashed on the way in.  Only
    successful results are stored.

    Parameters
    ----------
    maxsize : int, optional
        Oldest entries are evicted beyond this many results; unbounded when
        None.

    """

    def __init__(self, maxsize=None):
        self._cache = OrderedDict()
        self._lock = threading.Lock()
        self.maxsize = maxsize
        self.hits = 0
        self.misses = 0

    #
    # Mutable mapping pass-through interface
    #

    def __len__(self):
        return len(self._cache)

    def __iter__(self):
        return iter(list(self._cache))

    def __contains__(self, key):
        with self._lock:
            found = _deck_key(key) in self._cache
            if found:
                self.hits += 1
            else:
                self.misses += 1
            return found

    def __delitem__(self, key):
        with self._lock:
            del self._cache[_deck_key(key)]

    #
    # Explicit overrides
    #

    def __getitem__(self, key):
        with self._lock:
            return self._cache[_deck_key(key)]

    def __setitem__(self, key, value):
        with self._lock:
            self._cache[_deck_key(key)] = value
            if self.maxsize is not None:
                while len(self._cache) > self.maxsize:
                    old, _ = self._cache.popitem(last=False)
                    logger.debug("evicted cached result %s", old)

    def clear(self):
        """Clears the cache and its counters."""
        with self._lock:
            self._cache.clear()
            self.hits = self.misses = 0
