#!/usr/bin/env python
# Full license can be found in LICENSE
# ----------------------------------------------------------------------------
"""Import the discretizer sub-modules and methods."""
# Import the discretizer methods
from uwsPipe.discretizers import methods  # noqa F401

# Import the discretizers
from uwsPipe.discretizers import aud_hmm
from uwsPipe.discretizers import aud_hshmm
from uwsPipe.discretizers import aud_shmm
from uwsPipe.discretizers import gold_units
from uwsPipe.discretizers import vq_vae

# Define variable name with all available discretizers
__all__ = ['aud_hmm', 'aud_hshmm', 'aud_shmm', 'gold_units', 'vq_vae']

# Look up a discretizer by its `name` attribute
registry = {mod.name: mod for mod in [aud_hmm, aud_hshmm, aud_shmm,
                                      gold_units, vq_vae]}
