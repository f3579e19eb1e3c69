#!/usr/bin/env python
# -*- coding: utf-8 -*-
# Full license can be found in LICENSE
# ----------------------------------------------------------------------------
"""Segments unit sequences with the unigram Dirichlet-process model.

Properties
----------
name
    'dpseg'

Examples
--------
::

    from uwsPipe.segmenters import dpseg
    segs, info = dpseg.segment(units, alpha0=20.0, n_sweeps=100)

"""

import dataclasses

from uwsPipe import logger
from uwsPipe.segmenters.methods import dpseg as dp_methods

# ----------------------------------------------------------------------------
# Segmenter attributes

name = 'dpseg'
description = 'Monolingual unigram Dirichlet-process segmentation'
needs_translation = False

# Keyword settings accepted by `segment`
settings = tuple(fld.name for fld in dataclasses.fields(dp_methods.DpsegConfig)
                 if fld.name != 'seed')


# ----------------------------------------------------------------------------
# Segmenter methods

def segment(sequences, manifest=None, seed=0, **cfg_kwargs):
    """Segment every unit sequence.

    Parameters
    ----------
    sequences : dict
        UnitSequence objects keyed by utterance id
    manifest : CorpusManifest or NoneType
        Unused, accepted for a uniform segmenter interface (default=None)
    seed : int
        Random seed (default=0)
    **cfg_kwargs : dict
        DpsegConfig fields other than `seed`

    Returns
    -------
    segmentations : dict
        Segmentation objects keyed by utterance id
    info : dict
        Winning sweep and its joint log probability

    """
    cfg = dp_methods.DpsegConfig(seed=seed, **cfg_kwargs)
    segs, trace = dp_methods.gibbs_segment(sequences, cfg)
    best = trace.attrs['best_sweep']
    logger.info('dpseg kept sweep {:d} of {:d}'.format(best, cfg.n_sweeps))
    return segs, {'best_sweep': int(best),
                  'log_prob': float(trace.loc[best, 'log_prob'])}
