#!/usr/bin/env python
# -*- coding: utf-8 -*-
# Full license can be found in LICENSE
# ----------------------------------------------------------------------------
"""Discretizes speech with a Bayesian phone-loop HMM.

Properties
----------
name
    'hmm'
model_kind
    'hmm'

Examples
--------
::

    from uwsPipe.discretizers import aud_hmm
    model, info = aud_hmm.train(features, manifest=manifest, n_units=100)
    units = aud_hmm.decode(model, features)


Note
----
Unit 0 is reserved for silence when the manifest annotates any silence; its
tokens carry the silence label.

"""

import functools

from uwsPipe import logger
from uwsPipe.discretizers.methods import general
from uwsPipe.discretizers.methods import hmm

# ----------------------------------------------------------------------------
# Discretizer attributes

name = 'hmm'
model_kind = 'hmm'
description = 'Bayesian phone-loop HMM trained by variational Bayes'

# Extension of the saved model file
file_suffix = '.h5'

# Keyword settings accepted by `train`
settings = ('n_units', 'n_iters') + general.setting_names(hmm.AudHyperParams)


# ----------------------------------------------------------------------------
# Discretizer methods

def train(features, manifest=None, seed=0, n_units=100, n_iters=10,
          **hyper_kwargs):
    """Train a phone loop on a corpus.

    Parameters
    ----------
    features : dict
        FrameSequence objects keyed by utterance id
    manifest : CorpusManifest or NoneType
        Manifest with silence annotations (default=None)
    seed : int
        Random seed (default=0)
    n_units : int
        Truncation of the unit inventory (default=100)
    n_iters : int
        Training iterations (default=10)
    **hyper_kwargs : dict
        AudHyperParams fields

    Returns
    -------
    model : PhoneLoop
        Trained phone loop
    info : dict
        Lower bound trace and silence unit

    """
    hyper = hmm.AudHyperParams(**hyper_kwargs)
    loop, state = hmm.train_hmm(features, n_units=n_units, hyper=hyper,
                                n_iters=n_iters, seed=seed,
                                silence=general.silence_masks(manifest,
                                                              features))
    logger.info('trained a {:d}-unit phone loop'.format(loop.n_units))
    return loop, {'elbo': [float(val) for val in state.elbo],
                  'silence_unit': loop.silence_unit}


def decode_utterance(model, seq):
    """Viterbi-decode one utterance with the expected log-likelihoods."""
    return hmm.viterbi_decode(seq, model)


decode = functools.partial(general.decode_corpus, decode_utterance)
save = functools.partial(hmm.save_phone_loop, kind=model_kind)
load = functools.partial(hmm.load_loop_of_kind, model_kind)
