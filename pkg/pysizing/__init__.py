"""Agent-in-the-loop sizing of fixed-topology analog circuits."""
import logging

from pysizing.pysizing_config import pysizing_conf

__version__ = '0.1.0'

logging.getLogger(__name__).addHandler(logging.NullHandler())
