"""Continual-learning lab for the architecture-driven logit-shift proxy."""

from . import ads, archpool, calib, clrun, datasets, harness, nncore, stats, synthdata

__version__ = "0.1.0"
