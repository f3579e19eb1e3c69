#!/usr/bin/env python
# -*- coding: utf-8 -*-
# Full license can be found in LICENSE
# ----------------------------------------------------------------------------
"""Discretizes speech with a frame-level VQ-VAE.

Properties
----------
name
    'vqvae'
model_kind
    'vqvae'

Examples
--------
::

    from uwsPipe.discretizers import vq_vae
    model, info = vq_vae.train(features, n_units=50, epochs=20)
    units = vq_vae.decode(model, features)

"""

import functools

from uwsPipe.discretizers.methods import general
from uwsPipe.discretizers.methods import vq

# ----------------------------------------------------------------------------
# Discretizer attributes

name = 'vqvae'
model_kind = 'vqvae'
description = 'VQ-VAE whose nearest codebook rows label the frames'

# Extension of the saved model file
file_suffix = '.h5'

# Keyword settings accepted by `train`
settings = general.setting_names(vq.VqVaeConfig)


# ----------------------------------------------------------------------------
# Discretizer methods

def train(features, manifest=None, seed=0, **cfg_kwargs):
    """Train a VQ-VAE on every frame of a corpus.

    Parameters
    ----------
    features : dict
        FrameSequence objects keyed by utterance id
    manifest : CorpusManifest or NoneType
        Unused, accepted for a uniform discretizer interface (default=None)
    seed : int
        Random seed (default=0)
    **cfg_kwargs : dict
        VqVaeConfig fields

    Returns
    -------
    model : VqVaeModel
        Trained model
    info : dict
        Per-epoch loss and learning rate

    """
    model, trace = vq.vqvae_train(features, cfg=vq.VqVaeConfig(**cfg_kwargs),
                                  seed=seed)
    return model, {'loss': trace['loss'].tolist(), 'lr': trace['lr'].tolist()}


decode_utterance = vq.decode_units
decode = functools.partial(general.decode_corpus, decode_utterance)
save = vq.save_vqvae
load = vq.load_vqvae
