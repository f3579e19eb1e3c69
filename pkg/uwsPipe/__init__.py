"""Core library for uwsPipe.

This is a library of discretizer and segmenter modules, plus the supporting
utilities, designed to run unsupervised word segmentation (UWS) from speech:
acoustic features are turned into discrete unit sequences, the unit
sequences are segmented into word hypotheses, and the hypotheses are scored
against gold boundaries.

"""

import logging

try:
    from importlib import metadata
except ImportError:
    import importlib_metadata as metadata

# Set up the package logger before importing sub-modules that use it
logger = logging.getLogger(__name__)
if not logger.handlers:
    _handler = logging.StreamHandler()
    _handler.setFormatter(logging.Formatter(
        '%(name)s %(levelname)s: %(message)s'))
    logger.addHandler(_handler)
    logger.setLevel(logging.INFO)

from uwsPipe import utils  # noqa F401
from uwsPipe import discretizers  # noqa F401
from uwsPipe import segmenters  # noqa F401

try:
    __version__ = metadata.version('uwsPipe')
except metadata.PackageNotFoundError:
    __version__ = '0.0.0'
