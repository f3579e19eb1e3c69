#!/usr/bin/env python
# -*- coding: utf-8 -*-
# Full license can be found in LICENSE
# ----------------------------------------------------------------------------
"""Segments unit sequences from soft alignments to their translations.

Properties
----------
name
    'align'

Examples
--------
::

    from uwsPipe.segmenters import align
    segs, info = align.segment(units, alignments='attention.txt')


Note
----
Alignments come from a file of matrices, one or several averaged together,
or are simulated from the gold words of the manifest with `oracle_noise`.

"""

import dataclasses

from uwsPipe.segmenters.methods import align as al_methods

# ----------------------------------------------------------------------------
# Segmenter attributes

name = 'align'
description = 'Bilingual segmentation by alignment peaks'
needs_translation = True

# Keyword settings accepted by `segment`
settings = tuple(fld.name
                 for fld in dataclasses.fields(al_methods.AlignConfig))


# ----------------------------------------------------------------------------
# Segmenter methods

def collect_alignments(sequences, cfg, manifest=None):
    """Gather one alignment matrix per unit sequence.

    Parameters
    ----------
    sequences : dict
        UnitSequence objects keyed by utterance id
    cfg : AlignConfig
        Alignment source
    manifest : CorpusManifest or NoneType
        Manifest with translations and gold words, needed for simulated
        alignments (default=None)

    Returns
    -------
    matrices : dict
        Alignment matrices keyed by utterance id

    Raises
    ------
    ValueError
        If an utterance has no matrix, or lacks the gold words or the
        translation needed to simulate one

    """
    if cfg.alignments is not None:
        loaded = [al_methods.load_alignments(path) for path in cfg.paths]
        matrices = dict()
        for uid in sequences.keys():
            if any([uid not in mats for mats in loaded]):
                raise ValueError('no alignment for utterance {:}'.format(uid))
            matrices[uid] = al_methods.average_alignments(
                [mats[uid] for mats in loaded])
        return matrices

    if manifest is None:
        raise ValueError('simulated alignments need a manifest')

    matrices = dict()
    for uid, seq in sequences.items():
        utt = manifest[uid]
        if utt.gold_words is None or utt.translation is None:
            raise ValueError('utterance {:} needs gold words and a '
                             'translation'.format(uid))
        matrices[uid] = al_methods.oracle_alignments(
            utt.gold_words, utt.translation, noise=cfg.oracle_noise,
            units=seq)
    return matrices


def segment(sequences, manifest=None, seed=0, **cfg_kwargs):
    """Segment every unit sequence by its alignment peaks.

    Parameters
    ----------
    sequences : dict
        UnitSequence objects keyed by utterance id
    manifest : CorpusManifest or NoneType
        Manifest with translations and gold words (default=None)
    seed : int
        Unused; alignment peaks are deterministic (default=0)
    **cfg_kwargs : dict
        AlignConfig fields

    Returns
    -------
    segmentations : dict
        Segmentation objects keyed by utterance id
    info : dict
        Alignment source

    """
    cfg = al_methods.AlignConfig(**cfg_kwargs)
    matrices = collect_alignments(sequences, cfg, manifest=manifest)
    segs = {uid: al_methods.segment_from_alignment(seq, matrices[uid])
            for uid, seq in sequences.items()}
    return segs, {'alignments': 'oracle' if cfg.alignments is None
                  else 'file'}
