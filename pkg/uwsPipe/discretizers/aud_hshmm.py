#!/usr/bin/env python
# -*- coding: utf-8 -*-
# Full license can be found in LICENSE
# ----------------------------------------------------------------------------
"""Discretizes speech with a hierarchical subspace phone loop.

Properties
----------
name
    'hshmm'
model_kind
    'hshmm'

Examples
--------
::

    from uwsPipe.discretizers import aud_hshmm
    model, info = aud_hshmm.train(features, hier='sources.uwsh')
    units = aud_hshmm.decode(model, features)


Note
----
The templates come from a model file written by `save_hier_subspace`, or
are fit on the fly from one labelled manifest per source language given as
`sources`.  The language embedding of the target corpus is learnt with the
units and reported as 'alpha'.

"""

import functools

from uwsPipe import logger
from uwsPipe.discretizers.methods import general
from uwsPipe.discretizers.methods import hmm
from uwsPipe.discretizers.methods import subspace as sub_methods

# ----------------------------------------------------------------------------
# Discretizer attributes

name = 'hshmm'
model_kind = 'hshmm'
description = 'Hierarchical subspace phone loop adapted to the target language'

# Extension of the saved model file
file_suffix = '.h5'

# Keyword settings accepted by `train`
settings = ('n_units', 'n_iters', 'hier', 'sources', 'n_lang_dim', 'e_dim',
            'source_iters') + general.setting_names(
                sub_methods.SubspaceTrainConfig, hmm.AudHyperParams)


# ----------------------------------------------------------------------------
# Discretizer methods

def load_or_fit_hier(hier=None, sources=None, n_lang_dim=6, e_dim=100,
                     source_iters=5, seed=0):
    """Read a hierarchical subspace file or fit one on source languages.

    Parameters
    ----------
    hier : str or NoneType
        Hierarchical subspace model file (default=None)
    sources : list or NoneType
        One labelled manifest per source language (default=None)
    n_lang_dim : int
        Language embedding dimension when fitting (default=6)
    e_dim : int
        Unit embedding dimension when fitting (default=100)
    source_iters : int
        Training iterations of each source unit HMM (default=5)
    seed : int
        Random seed (default=0)

    Returns
    -------
    hier : HierSubspace
        Template subspaces

    Raises
    ------
    ValueError
        If neither a file nor source manifests are given

    """
    if hier is not None:
        return sub_methods.load_hier_subspace(hier)
    if not sources:
        raise ValueError('the hshmm discretizer needs a hierarchical subspace '
                         'file or labelled source manifests')

    return sub_methods.fit_hier_subspace(
        [general.labelled_source(path) for path in sources],
        n_lang_dim=n_lang_dim, e_dim=e_dim, n_iters=source_iters, seed=seed)


def train(features, manifest=None, seed=0, n_units=100, n_iters=10,
          hier=None, sources=None, n_lang_dim=6, e_dim=100, source_iters=5,
          **settings):
    """Train a hierarchical subspace phone loop on a corpus.

    Parameters
    ----------
    features : dict
        FrameSequence objects keyed by utterance id
    manifest : CorpusManifest or NoneType
        Manifest with silence annotations (default=None)
    seed : int
        Random seed (default=0)
    n_units : int
        Number of units (default=100)
    n_iters : int
        Training iterations (default=10)
    hier : str or NoneType
        Hierarchical subspace model file (default=None)
    sources : list or NoneType
        One labelled manifest per source language (default=None)
    n_lang_dim : int
        Language embedding dimension when fitting (default=6)
    e_dim : int
        Unit embedding dimension when fitting (default=100)
    source_iters : int
        Training iterations of each source unit HMM (default=5)
    **settings : dict
        SubspaceTrainConfig and AudHyperParams fields

    Returns
    -------
    model : PhoneLoop
        Trained phone loop
    info : dict
        Lower bound trace, silence unit and language embedding

    """
    cfg, hyper = sub_methods.split_settings(settings)
    templates = load_or_fit_hier(hier=hier, sources=sources,
                                 n_lang_dim=n_lang_dim, e_dim=e_dim,
                                 source_iters=source_iters, seed=seed)
    loop, state, alpha = sub_methods.train_hshmm(
        features, templates, n_units=n_units, n_iters=n_iters, seed=seed,
        cfg=cfg, hyper=hyper, silence=general.silence_masks(manifest,
                                                            features))
    logger.info('target language embedding: {:}'.format(
        ', '.join(['{:.4f}'.format(val) for val in alpha])))
    return loop, {'elbo': [float(val) for val in state.elbo],
                  'silence_unit': loop.silence_unit,
                  'alpha': [float(val) for val in alpha]}


def decode_utterance(model, seq):
    """Viterbi-decode one utterance with the point parameters."""
    return hmm.viterbi_decode(seq, model)


decode = functools.partial(general.decode_corpus, decode_utterance)
save = functools.partial(hmm.save_phone_loop, kind=model_kind)
load = functools.partial(hmm.load_loop_of_kind, model_kind)
