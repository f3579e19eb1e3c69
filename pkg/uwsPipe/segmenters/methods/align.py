#!/usr/bin/env python
# -*- coding: utf-8 -*-
# Full license can be found in LICENSE
# ----------------------------------------------------------------------------
"""Bilingual segmentation from soft alignments to a translation.

An alignment matrix holds, for every unit token of an utterance, a
probability distribution over the words of its translation.  Neighbouring
units whose distributions peak at the same translation word form a word.

Alignment files hold blocks of a header line ``<id> <rows> <cols>`` followed
by `rows` lines of `cols` space-separated floats.

"""

import dataclasses
from typing import Optional, Tuple, Union

import numpy as np
import xarray as xr

from uwsPipe import logger
from uwsPipe.utils import corpus

# Largest row-sum deviation that is renormalized rather than rejected
RENORM_TOL = 1.0e-3

# Largest row-sum deviation of a valid alignment matrix
STOCHASTIC_TOL = 1.0e-6


@dataclasses.dataclass(frozen=True)
class AlignConfig(object):
    """Alignment source of the bilingual segmenter.

    Parameters
    ----------
    alignments : str, tuple or NoneType
        Alignment file, or files whose matrices are averaged (default=None)
    oracle_noise : float or NoneType
        Simulate alignments from the gold words with this noise when no
        file is given (default=None)

    """

    alignments: Optional[Union[str, Tuple[str, ...]]] = None
    oracle_noise: Optional[float] = None

    def __post_init__(self):
        """Check that exactly one alignment source is set."""
        if self.alignments is not None and not isinstance(self.alignments,
                                                          str):
            object.__setattr__(self, 'alignments', tuple(self.alignments))
        if (self.alignments is None) == (self.oracle_noise is None):
            raise ValueError('set either alignments or oracle_noise')
        if (self.oracle_noise is not None
                and not 0.0 <= self.oracle_noise < 1.0):
            raise ValueError('oracle_noise must lie in [0, 1)')
        return

    @property
    def paths(self):
        """List the alignment files."""
        if self.alignments is None:
            return []
        if isinstance(self.alignments, str):
            return [self.alignments]
        return list(self.alignments)


def alignment_matrix(values, utterance_id, target_words=None):
    """Build a labelled alignment matrix.

    Parameters
    ----------
    values : array-like
        Source length x target length probabilities
    utterance_id : str
        Utterance identifier
    target_words : list or NoneType
        Translation words labelling the columns, their positions if None
        (default=None)

    Returns
    -------
    matrix : xr.DataArray
        Matrix with dims ('unit', 'word') and the utterance id in its attrs

    Raises
    ------
    ValueError
        If the values are not a non-negative row-stochastic matrix

    """
    values = np.asarray(values, dtype=np.float64)
    if values.ndim != 2 or values.shape[1] < 1:
        raise ValueError('alignment for {:} must be a matrix with at least '
                         'one column'.format(utterance_id))
    if np.any(values < 0.0) or not np.all(np.isfinite(values)):
        raise ValueError('alignment for {:} has negative or non-finite '
                         'values'.format(utterance_id))
    if values.shape[0] > 0 and np.any(np.abs(values.sum(axis=1) - 1.0)
                                      > STOCHASTIC_TOL):
        raise ValueError('alignment rows for {:} must sum to 1'.format(
            utterance_id))

    if target_words is None:
        target_words = np.arange(values.shape[1])
    elif len(target_words) != values.shape[1]:
        raise ValueError(''.join(['alignment for {:} has '.format(
            utterance_id), '{:d} columns but the '.format(values.shape[1]),
            'translation has {:d} words'.format(len(target_words))]))

    return xr.DataArray(values, dims=('unit', 'word'),
                        coords={'unit': np.arange(values.shape[0]),
                                'word': list(target_words)},
                        attrs={'utterance_id': utterance_id})


def peaks(matrix):
    """Column position of each row maximum, ties to the lowest position."""
    return np.argmax(np.asarray(matrix), axis=1)


def segment_from_alignment(units, matrix):
    """Segment a unit sequence by the peaks of its alignment rows.

    Parameters
    ----------
    units : UnitSequence
        Unit tokens of one utterance
    matrix : xr.DataArray
        Alignment matrix with one row per unit token

    Returns
    -------
    seg : Segmentation
        Maximal runs of units sharing a peak, each forming a word

    Raises
    ------
    ValueError
        If the matrix rows do not match the unit tokens

    """
    if matrix.shape[0] != len(units):
        raise ValueError(''.join(['alignment for {:} has '.format(
            units.utterance_id), '{:d} rows but the '.format(matrix.shape[0]),
            'sequence has {:d} units'.format(len(units))]))

    top = peaks(matrix)
    starts = np.flatnonzero(top[1:] != top[:-1]) + 1
    return corpus.Segmentation.from_starts(units, starts)


def _renormalize(values, uid):
    """Scale rows that are nearly stochastic and reject the others."""
    sums = values.sum(axis=1)
    bad = np.abs(sums - 1.0) > RENORM_TOL
    if np.any(bad):
        raise ValueError(''.join(['alignment {:}, row '.format(uid),
                                  '{:d} sums to '.format(int(np.argmax(bad))),
                                  '{:.6g}'.format(sums[np.argmax(bad)])]))

    off = np.abs(sums - 1.0) > STOCHASTIC_TOL
    if np.any(off):
        logger.warning('renormalized {:d} alignment rows of {:}'.format(
            int(off.sum()), uid))
    return values / sums[:, None]


def load_alignments(path):
    """Read alignment matrices.

    Parameters
    ----------
    path : str
        Alignment file

    Returns
    -------
    matrices : dict
        Alignment matrices keyed by utterance id, in file order

    Raises
    ------
    ValueError
        For malformed blocks, negative values, duplicate ids or rows more
        than 1e-3 away from summing to 1

    """
    with open(path, 'r') as fin:
        lines = [line.split() for line in fin]

    matrices = dict()
    i = 0
    while i < len(lines):
        if len(lines[i]) == 0:
            i += 1
            continue
        header = lines[i]
        try:
            uid, n_rows, n_cols = header[0], int(header[1]), int(header[2])
        except (IndexError, ValueError):
            raise ValueError('{:}, line {:d}: bad header "{:}"'.format(
                path, i + 1, ' '.join(header)))
        if len(header) != 3 or n_rows < 0 or n_cols < 1:
            raise ValueError('{:}, line {:d}: bad header "{:}"'.format(
                path, i + 1, ' '.join(header)))
        if uid in matrices:
            raise ValueError('{:}, line {:d}: duplicate id "{:}"'.format(
                path, i + 1, uid))

        rows = lines[i + 1:i + 1 + n_rows]
        if len(rows) != n_rows or any([len(row) != n_cols for row in rows]):
            raise ValueError('{:}: block "{:}" needs {:d} rows of {:d} '
                             'values'.format(path, uid, n_rows, n_cols))
        try:
            values = np.array(rows, dtype=np.float64).reshape((n_rows,
                                                               n_cols))
        except ValueError:
            raise ValueError('{:}: non-numeric value in block "{:}"'.format(
                path, uid))
        if np.any(values < 0.0) or not np.all(np.isfinite(values)):
            raise ValueError('{:}: negative or non-finite value in block '
                             '"{:}"'.format(path, uid))

        matrices[uid] = alignment_matrix(_renormalize(values, uid), uid)
        i += 1 + n_rows

    return matrices


def write_alignments(matrices, path):
    """Write alignment matrices in the block format.

    Parameters
    ----------
    matrices : dict or iterable
        Alignment matrices, keyed by utterance id or carrying it in attrs
    path : str
        Output file

    """
    if isinstance(matrices, dict):
        items = matrices.items()
    else:
        items = [(mat.attrs['utterance_id'], mat) for mat in matrices]

    with open(path, 'w') as fout:
        for uid, mat in items:
            fout.write('{:} {:d} {:d}\n'.format(uid, mat.shape[0],
                                                mat.shape[1]))
            for row in np.asarray(mat):
                fout.write(' '.join(['{:.17g}'.format(val) for val in row])
                           + '\n')
    return


def average_alignments(matrices):
    """Average alignment matrices of one utterance from several models.

    Parameters
    ----------
    matrices : list
        Alignment matrices of equal shape

    Returns
    -------
    matrix : xr.DataArray
        Element-wise mean with rows renormalized

    Raises
    ------
    ValueError
        If no matrices are given or their shapes differ

    """
    if len(matrices) == 0:
        raise ValueError('no alignment matrices to average')
    if len(set([mat.shape for mat in matrices])) != 1:
        raise ValueError('alignment matrices to average differ in shape')

    mean = xr.concat(matrices, dim='model', coords='minimal',
                     compat='override').mean(dim='model')
    mean = mean / mean.sum(dim='word')
    mean.attrs = dict(matrices[0].attrs)
    return mean


def gold_word_index(units, gold):
    """Index of the gold word holding the midpoint of each unit token.

    Parameters
    ----------
    units : UnitSequence
        Unit tokens of one utterance
    gold : Segmentation
        Gold words of the same utterance

    Returns
    -------
    index : np.ndarray
        Gold word index per unit token, the nearest word for midpoints
        outside every word

    """
    starts = np.array([word.start_s for word in gold.words])
    ends = np.array([word.end_s for word in gold.words])
    index = np.zeros(len(units), dtype=int)
    for i, tok in enumerate(units.tokens):
        mid = 0.5 * (tok.start_s + tok.end_s)
        dist = np.maximum(starts - mid, 0.0) + np.maximum(mid - ends, 0.0)
        index[i] = int(np.argmin(dist))
    return index


def oracle_alignments(gold, translation, noise=0.0, seed=0, units=None):
    """Simulate an alignment that peaks on one target word per gold word.

    Parameters
    ----------
    gold : Segmentation
        Gold words over the unit tokens of one utterance
    translation : list
        Translation words
    noise : float
        Probability mass spread uniformly over the columns (default=0.0)
    seed : int or NoneType
        Unused, the simulated rows involve no random draws (default=0)
    units : UnitSequence or NoneType
        Unit tokens given rows, each assigned to the gold word holding its
        midpoint; one row per gold unit token if None (default=None)

    Returns
    -------
    matrix : xr.DataArray
        Rows of the k-th gold word hold 1 - noise + noise / cols on target
        word min(k, cols - 1) and noise / cols on every other column

    Raises
    ------
    ValueError
        If `noise` is outside [0, 1) or the translation is empty

    """
    if not 0.0 <= noise < 1.0:
        raise ValueError('noise must lie in [0, 1)')
    n_cols = len(translation)
    if n_cols < 1:
        raise ValueError('translation of {:} is empty'.format(
            gold.utterance_id))

    if units is None:
        word_index = [k for k, word in enumerate(gold.words)
                      for _ in word.tokens]
    else:
        word_index = gold_word_index(units, gold)

    values = np.full((len(word_index), n_cols), noise / n_cols)
    for row, k in enumerate(word_index):
        values[row, min(k, n_cols - 1)] += 1.0 - noise
    return alignment_matrix(values, gold.utterance_id)
