"""Run-time configuration for pysizing.

A single instance, ``pysizing_conf``, is shared by the package.  Values come
from built-in defaults, then a JSON config file (named by the
``PYSIZING_CONFIG`` environment variable or loaded explicitly), then
command-line flags, each layer overriding the one before it.
"""
import os
import copy
import logging
from collections.abc import MutableMapping

try:
    import simplejson as json
except ImportError:
    import json

from pysizing.utils import ConfigurationError

logger = logging.getLogger(__name__)

DEFAULT_PROVIDER = {
    'dialect': 'anthropic',
    'endpoint': 'https://api.anthropic.com/v1/messages',
    'model_id': 'claude-3-5-sonnet-20240620',
    'api_key_env': 'ANTHROPIC_API_KEY',
    'max_retries': 5,
    'timeout': 120.0,
    'rate_limit': 50.0,
    'backoff_base': 1.0,
    'backoff_ceiling': 120.0,
    'temperature': 0.0,
    'max_tokens': 4096,
    }

DEFAULTS = {
    'engine_path': 'ngspice',
    'sim_timeout': 120.0,
    'workdir': 'pysizing-run',
    'workers': 1,
    'ac_points_per_decade': 20,
    'ac_fstart': 1.0,
    'ac_fstop': 1e10,
    'dc_step': 1e-3,
    'thd_frequency': 1e3,
    'thd_amplitude': 0.8,
    'thd_harmonics': 5,
    'max_engine_failures': 3,
    'verbosity': 'info',
    'provider': DEFAULT_PROVIDER,
    }


class PySizingConfig(MutableMapping):
    """Layered configuration mapping with attribute access.

    Parameters
    ----------
    defaults : dict, optional
        Built-in values; the module defaults when not given.

    """

    def __init__(self, defaults=None):
        self._conf = copy.deepcopy(DEFAULTS if defaults is None else defaults)
        self.sources = ['defaults']

    #
    # Mutable mapping pass-through interface
    #

    def __len__(self):
        return len(self._conf)

    def __iter__(self):
        return iter(self._conf)

    def __getitem__(self, key):
        return self._conf[key]

    def __delitem__(self, key):
        del self._conf[key]

    def __setitem__(self, key, value):
        if key == 'provider':
            merged = dict(self._conf.get('provider', {}))
            merged.update(value)
            if 'api_key' in merged:
                raise ConfigurationError("API keys are never stored in config; "
                                         "set 'api_key_env' to the variable name.")
            value = merged
        self._conf[key] = value

    def __getattr__(self, name):
        if name.startswith('_'):
            raise AttributeError(name)
        try:
            return self._conf[name]
        except KeyError:
            raise AttributeError(name)

    #
    # Layers
    #

    def load(self, path):
        """Overlays the keys of a JSON config file."""
        try:
            with open(path) as f:
                data = json.load(f)
        except (IOError, OSError, ValueError) as e:
            raise ConfigurationError("could not read config file {0!r}: {1}".format(path, e))
        if not isinstance(data, dict):
            raise ConfigurationError("config file {0!r} must hold an object".format(path))
        for key, value in data.items():
            if key not in DEFAULTS:
                logger.warning("ignoring unknown config key %r in %s", key, path)
                continue
            self[key] = value
        self.sources.append(path)
        logger.debug("loaded config file %s", path)
        return self

    def load_environ(self, environ=None):
        """Overlays the environment: PYSIZING_CONFIG and PYSIZING_ENGINE."""
        environ = os.environ if environ is None else environ
        path = environ.get('PYSIZING_CONFIG')
        if path:
            self.load(path)
        engine = environ.get('PYSIZING_ENGINE')
        if engine:
            self['engine_path'] = engine
            self.sources.append('PYSIZING_ENGINE')
        return self

    def override(self, **kwargs):
        """Overlays explicit values (command-line flags); None means unset."""
        for key, value in kwargs.items():
            if value is not None:
                self[key] = value
        return self

    def copy(self):
        new = PySizingConfig(self._conf)
        new.sources = list(self.sources)
        return new


# The package-wide configuration
pysizing_conf = PySizingConfig()
