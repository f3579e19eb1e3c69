#!/usr/bin/env python
# -*- coding: utf-8 -*-
# Full license can be found in LICENSE
# ----------------------------------------------------------------------------
"""Discretizes speech with a subspace phone loop.

Properties
----------
name
    'shmm'
model_kind
    'shmm'

Examples
--------
::

    from uwsPipe.discretizers import aud_shmm
    model, info = aud_shmm.train(features, subspace='source.uwss')
    units = aud_shmm.decode(model, features)


Note
----
The subspace comes from a model file written by `save_subspace`, or is fit
on the fly from labelled source manifests given as `sources`.

"""

import functools

from uwsPipe import logger
from uwsPipe.discretizers.methods import general
from uwsPipe.discretizers.methods import hmm
from uwsPipe.discretizers.methods import subspace as sub_methods

# ----------------------------------------------------------------------------
# Discretizer attributes

name = 'shmm'
model_kind = 'shmm'
description = 'Subspace phone loop with units constrained to a linear subspace'

# Extension of the saved model file
file_suffix = '.h5'

# Keyword settings accepted by `train`
settings = ('n_units', 'n_iters', 'subspace', 'sources', 'e_dim',
            'source_iters') + general.setting_names(
                sub_methods.SubspaceTrainConfig, hmm.AudHyperParams)


# ----------------------------------------------------------------------------
# Discretizer methods

def load_or_fit_subspace(subspace=None, sources=None, e_dim=100,
                         source_iters=5, seed=0):
    """Read a subspace file or fit one on labelled source corpora.

    Parameters
    ----------
    subspace : str or NoneType
        Subspace model file (default=None)
    sources : list or NoneType
        Manifests of labelled source corpora (default=None)
    e_dim : int
        Embedding dimension when fitting (default=100)
    source_iters : int
        Training iterations of each source unit HMM (default=5)
    seed : int
        Random seed (default=0)

    Returns
    -------
    sub : Subspace
        Subspace

    Raises
    ------
    ValueError
        If neither a file nor source manifests are given

    """
    if subspace is not None:
        return sub_methods.load_subspace(subspace)
    if not sources:
        raise ValueError('the shmm discretizer needs a subspace file or '
                         'labelled source manifests')

    return sub_methods.fit_subspace(
        [general.labelled_source(path) for path in sources], e_dim=e_dim,
        n_iters=source_iters, seed=seed)


def train(features, manifest=None, seed=0, n_units=100, n_iters=10,
          subspace=None, sources=None, e_dim=100, source_iters=5,
          **settings):
    """Train a subspace phone loop on a corpus.

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
    subspace : str or NoneType
        Subspace model file (default=None)
    sources : list or NoneType
        Labelled source manifests, used without a subspace file
        (default=None)
    e_dim : int
        Embedding dimension when fitting (default=100)
    source_iters : int
        Training iterations of each source unit HMM (default=5)
    **settings : dict
        SubspaceTrainConfig and AudHyperParams fields

    Returns
    -------
    model : PhoneLoop
        Trained phone loop
    info : dict
        Lower bound trace, silence unit and subspace reconstruction error

    """
    cfg, hyper = sub_methods.split_settings(settings)
    sub = load_or_fit_subspace(subspace=subspace, sources=sources,
                               e_dim=e_dim, source_iters=source_iters,
                               seed=seed)
    loop, state = sub_methods.train_shmm(
        features, sub, n_units=n_units, n_iters=n_iters, seed=seed, cfg=cfg,
        hyper=hyper, silence=general.silence_masks(manifest, features))
    logger.info('trained a {:d}-unit subspace phone loop'.format(
        loop.n_units))
    return loop, {'elbo': [float(val) for val in state.elbo],
                  'silence_unit': loop.silence_unit,
                  'subspace_error': sub.reconstruction_error}


def decode_utterance(model, seq):
    """Viterbi-decode one utterance with the point parameters."""
    return hmm.viterbi_decode(seq, model)


decode = functools.partial(general.decode_corpus, decode_utterance)
save = functools.partial(hmm.save_phone_loop, kind=model_kind)
load = functools.partial(hmm.load_loop_of_kind, model_kind)
