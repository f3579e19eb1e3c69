#!/usr/bin/env python
# Full license can be found in LICENSE
# ----------------------------------------------------------------------------
"""Import the segmenter sub-modules and methods."""
# Import the segmenter methods
from uwsPipe.segmenters import methods  # noqa F401

# Import the segmenters
from uwsPipe.segmenters import align
from uwsPipe.segmenters import dpseg

# Define variable name with all available segmenters
__all__ = ['align', 'dpseg']

# Look up a segmenter by its `name` attribute
registry = {mod.name: mod for mod in [align, dpseg]}
