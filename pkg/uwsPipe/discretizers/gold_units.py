#!/usr/bin/env python
# -*- coding: utf-8 -*-
# Full license can be found in LICENSE
# ----------------------------------------------------------------------------
"""Uses the gold units of the manifest in place of discovered units.

Properties
----------
name
    'gold'
model_kind
    'gold'

Note
----
This is the topline condition: every later stage runs on the reference
units, so it bounds what a discretizer can contribute.

"""

import functools

from uwsPipe.discretizers.methods import general
from uwsPipe.utils import corpus

# ----------------------------------------------------------------------------
# Discretizer attributes

name = 'gold'
model_kind = 'gold'
description = 'Gold unit transcriptions (topline)'

# Extension of the saved model file
file_suffix = '.txt'

# Keyword settings accepted by `train`
settings = ()


# ----------------------------------------------------------------------------
# Discretizer methods

def train(features, manifest=None, seed=0):
    """Collect the gold units of every utterance with features.

    Parameters
    ----------
    features : dict
        FrameSequence objects keyed by utterance id
    manifest : CorpusManifest
        Manifest holding the gold units
    seed : int
        Unused (default=0)

    Returns
    -------
    model : dict
        Gold UnitSequence objects keyed by utterance id
    info : dict
        Number of gold unit types

    Raises
    ------
    ValueError
        If there is no manifest or an utterance lacks gold units

    """
    if manifest is None:
        raise ValueError('the gold discretizer needs a manifest')

    model = dict()
    for uid in features.keys():
        if manifest[uid].gold_units is None:
            raise ValueError('utterance {:} has no gold units'.format(uid))
        model[uid] = manifest[uid].gold_units

    types = set([tok.label for seq in model.values() for tok in seq.tokens])
    return model, {'n_types': len(types)}


def decode_utterance(model, seq):
    """Look up the gold units of one utterance.

    Raises
    ------
    ValueError
        If the utterance has no gold units

    """
    if seq.utterance_id not in model.keys():
        raise ValueError('no gold units for {:}'.format(seq.utterance_id))
    return model[seq.utterance_id]


def save(model, path):
    """Write the gold units as a time-stamped unit file."""
    corpus.write_units(list(model.values()), path, timed=True)
    return


def load(path):
    """Read gold units written by `save`."""
    return corpus.read_units(path)


decode = functools.partial(general.decode_corpus, decode_utterance)
