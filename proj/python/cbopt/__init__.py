"""Constrained Bayesian optimization of training time under a metric constraint."""

from ._cbopt import *  # noqa: F401,F403
from ._cbopt import __doc__  # noqa: F401

__version__ = "0.1.0"
