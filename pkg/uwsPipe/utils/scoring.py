#!/usr/bin/env python
# -*- coding: utf-8 -*-
# Full license can be found in LICENSE
# ----------------------------------------------------------------------------
"""Boundary, token and type scores for word segmentations.

Boundaries are scored on two planes: symbolic positions between unit tokens
(tolerance 0) and times in seconds (tolerance 20 ms by default).  Counts are
summed over utterances before the ratios are taken.

"""

import dataclasses

import numpy as np
import pandas as pds
from scipy import optimize

from uwsPipe import logger
from uwsPipe.utils import corpus

DEFAULT_TOLERANCE_S = 0.02

# Absorbs float noise in time comparisons
TIME_EPS = 1.0e-9


def fscore(precision, recall):
    """Harmonic mean of precision and recall, 0 when both are 0."""
    if precision + recall == 0.0:
        return 0.0
    return 2.0 * precision * recall / (precision + recall)


def _ratio(num, den):
    """Divide counts, defining 0 / 0 as 0."""
    return num / den if den > 0 else 0.0


def project_boundaries(seg):
    """Project word boundaries onto the time axis.

    Parameters
    ----------
    seg : Segmentation
        Segmentation with unit time-stamps

    Returns
    -------
    times : list
        End time of every word but the last, in seconds

    """
    return [word.end_s for word in seg.words[:-1]]


def symbolic_boundaries(seg):
    """Provide the inter-token positions of the word boundaries.

    Parameters
    ----------
    seg : Segmentation
        Segmentation over a unit sequence

    Returns
    -------
    positions : list
        Number of units before each internal boundary

    """
    return seg.word_starts()


def _check_sorted(values, name, uid):
    """Raise a ValueError if a boundary list is not sorted."""
    if np.any(np.diff(np.asarray(values, dtype=np.float64)) < 0.0):
        raise ValueError('{:} boundaries of {:} are not sorted'.format(
            name, uid))
    return


def match_boundaries(hyp, gold, tolerance_s=0.0):
    """Greedily match two sorted boundary lists one to one.

    Parameters
    ----------
    hyp : list
        Sorted hypothesized boundaries
    gold : list
        Sorted gold boundaries
    tolerance_s : float
        Largest distance between matched boundaries (default=0.0)

    Returns
    -------
    hits : int
        Number of matched pairs

    """
    hits = 0
    i = 0
    j = 0
    while i < len(hyp) and j < len(gold):
        if abs(hyp[i] - gold[j]) <= tolerance_s + TIME_EPS:
            hits += 1
            i += 1
            j += 1
        elif hyp[i] < gold[j]:
            i += 1
        else:
            j += 1
    return hits


@dataclasses.dataclass(frozen=True)
class BoundaryReport(object):
    """Micro-averaged boundary scores.

    Parameters
    ----------
    precision : float
        hits / n_hyp
    recall : float
        hits / n_gold
    fscore : float
        Harmonic mean of precision and recall
    hits : int
        Matched boundaries
    n_hyp : int
        Hypothesized boundaries
    n_gold : int
        Gold boundaries
    per_utterance : pds.DataFrame
        hits, n_hyp and n_gold per utterance id

    """

    precision: float
    recall: float
    fscore: float
    hits: int
    n_hyp: int
    n_gold: int
    per_utterance: pds.DataFrame = dataclasses.field(compare=False,
                                                     repr=False)

    def to_dict(self):
        """Summarize as JSON-ready values."""
        return {'precision': self.precision, 'recall': self.recall,
                'fscore': self.fscore, 'hits': self.hits,
                'n_hyp': self.n_hyp, 'n_gold': self.n_gold}


def _paired(hyp, gold):
    """Pair per-utterance entries given as dicts or equal-length lists."""
    if isinstance(hyp, dict) or isinstance(gold, dict):
        if set(hyp.keys()) != set(gold.keys()):
            raise ValueError('hypothesis and gold cover different utterances')
        return [(uid, hyp[uid], gold[uid]) for uid in sorted(gold.keys())]

    if len(hyp) != len(gold):
        raise ValueError('hypothesis and gold hold {:d} and {:d} utterances'
                         .format(len(hyp), len(gold)))
    return [(str(i), hh, gg) for i, (hh, gg) in enumerate(zip(hyp, gold))]


def boundary_score(hyp, gold, tolerance_s=DEFAULT_TOLERANCE_S):
    """Score hypothesized boundaries against gold boundaries.

    Parameters
    ----------
    hyp : dict or list
        Sorted boundary lists per utterance, keyed by utterance id or in
        the same order as `gold`
    gold : dict or list
        Sorted gold boundary lists per utterance
    tolerance_s : float
        Matching tolerance; use 0 for symbolic positions
        (default=DEFAULT_TOLERANCE_S)

    Returns
    -------
    report : BoundaryReport
        Scores from counts summed over utterances

    Raises
    ------
    ValueError
        If a boundary list is unsorted or the utterance sets differ

    """
    rows = list()
    for uid, hyp_b, gold_b in _paired(hyp, gold):
        _check_sorted(hyp_b, 'hypothesis', uid)
        _check_sorted(gold_b, 'gold', uid)
        rows.append({'utterance_id': uid,
                     'hits': match_boundaries(list(hyp_b), list(gold_b),
                                              tolerance_s),
                     'n_hyp': len(hyp_b), 'n_gold': len(gold_b)})

    table = pds.DataFrame(rows, columns=['utterance_id', 'hits', 'n_hyp',
                                         'n_gold']).set_index('utterance_id')
    hits = int(table['hits'].sum())
    n_hyp = int(table['n_hyp'].sum())
    n_gold = int(table['n_gold'].sum())

    precision = _ratio(hits, n_hyp)
    recall = _ratio(hits, n_gold)
    return BoundaryReport(precision, recall, fscore(precision, recall), hits,
                          n_hyp, n_gold, table)


def score_segmentations(hyp, gold, tolerance_s=DEFAULT_TOLERANCE_S):
    """Score time-stamped segmentations on the time plane.

    Parameters
    ----------
    hyp : dict
        Hypothesized Segmentation objects keyed by utterance id
    gold : dict
        Gold Segmentation objects keyed by utterance id
    tolerance_s : float
        Matching tolerance (default=DEFAULT_TOLERANCE_S)

    Returns
    -------
    report : BoundaryReport
        Boundary scores

    """
    return boundary_score({uid: project_boundaries(seg)
                           for uid, seg in hyp.items()},
                          {uid: project_boundaries(seg)
                           for uid, seg in gold.items()},
                          tolerance_s=tolerance_s)


@dataclasses.dataclass(frozen=True)
class TypeReport(object):
    """Token and type retrieval scores.

    Parameters
    ----------
    token_precision, token_recall, token_fscore : float
        Scores of word tokens matched by label and span
    type_precision, type_recall, type_fscore : float
        Scores of the word-type sets
    type_token_ratio : float
        Hypothesis types over hypothesis tokens
    n_hyp_tokens, n_gold_tokens : int
        Token counts
    n_hyp_types, n_gold_types : int
        Type counts

    """

    token_precision: float
    token_recall: float
    token_fscore: float
    type_precision: float
    type_recall: float
    type_fscore: float
    type_token_ratio: float
    n_hyp_tokens: int
    n_gold_tokens: int
    n_hyp_types: int
    n_gold_types: int

    def to_dict(self):
        """Summarize as JSON-ready values."""
        return dataclasses.asdict(self)


def _word_keys(seg):
    """List (label, start, end) keys of the non-silence words."""
    return [(word.label, round(word.start_s, 6), round(word.end_s, 6))
            for word in seg.words if not word.is_silence]


def token_type_score(hyp, gold):
    """Score word tokens and types against a gold segmentation.

    Parameters
    ----------
    hyp : dict
        Hypothesized Segmentation objects keyed by utterance id
    gold : dict
        Gold Segmentation objects keyed by utterance id

    Returns
    -------
    report : TypeReport
        Token and type scores; reintroduced silence words are ignored

    Raises
    ------
    ValueError
        If the utterance sets differ

    """
    hits = 0
    hyp_tokens = list()
    gold_tokens = list()
    for uid, hyp_seg, gold_seg in _paired(hyp, gold):
        hyp_keys = _word_keys(hyp_seg)
        gold_keys = set(_word_keys(gold_seg))
        hits += sum([1 for key in hyp_keys if key in gold_keys])
        hyp_tokens.extend([key[0] for key in hyp_keys])
        gold_tokens.extend([key[0] for key in gold_keys])

    hyp_types = set(hyp_tokens)
    gold_types = set(gold_tokens)
    common = len(hyp_types.intersection(gold_types))

    tok_p = _ratio(hits, len(hyp_tokens))
    tok_r = _ratio(hits, len(gold_tokens))
    typ_p = _ratio(common, len(hyp_types))
    typ_r = _ratio(common, len(gold_types))

    if len(hyp_tokens) == 0:
        logger.warning('no hypothesis word tokens to score')

    return TypeReport(tok_p, tok_r, fscore(tok_p, tok_r), typ_p, typ_r,
                      fscore(typ_p, typ_r),
                      _ratio(len(hyp_types), len(hyp_tokens)),
                      len(hyp_tokens), len(gold_tokens), len(hyp_types),
                      len(gold_types))


def type_token_ratio(segmentations):
    """Compute distinct word types over word tokens.

    Parameters
    ----------
    segmentations : iterable
        Segmentation objects

    Returns
    -------
    ttr : float
        Type-token ratio, 0 for a corpus without words

    """
    labels = [word.label for seg in segmentations for word in seg.words
              if not word.is_silence]
    return _ratio(len(set(labels)), len(labels))


def relabel_with_gold(seg, gold_units):
    """Rewrite hypothesized words as the gold units they cover.

    Parameters
    ----------
    seg : Segmentation
        Hypothesized segmentation
    gold_units : UnitSequence
        Gold unit tokens of the same utterance

    Returns
    -------
    out_seg : Segmentation
        One word per hypothesized word, holding the gold units whose
        midpoints fall inside it; words covering no gold unit are dropped
        and silence words are kept as they are

    """
    mids = np.array([0.5 * (tok.start_s + tok.end_s)
                     for tok in gold_units.tokens])
    words = list()
    for word in seg.words:
        if word.is_silence:
            words.append(word)
            continue

        inside = np.where((mids >= word.start_s - TIME_EPS)
                          & (mids < word.end_s - TIME_EPS))[0]
        if len(inside) > 0:
            words.append(corpus.Word(tuple(gold_units.tokens[i]
                                           for i in inside)))

    return corpus.Segmentation(seg.utterance_id, tuple(words))


def _contingency(hyp_labels, gold_labels, ignore):
    """Cross-tabulate two per-frame label arrays."""
    hyp_labels = np.asarray(hyp_labels).astype(str)
    gold_labels = np.asarray(gold_labels).astype(str)
    if hyp_labels.shape != gold_labels.shape:
        raise ValueError('label arrays differ in length: {:} and {:}'.format(
            hyp_labels.shape, gold_labels.shape))

    if ignore is not None:
        keep = gold_labels != str(ignore)
        hyp_labels = hyp_labels[keep]
        gold_labels = gold_labels[keep]

    if hyp_labels.shape[0] == 0:
        raise ValueError('no frames to score')

    return pds.crosstab(pds.Series(hyp_labels, name='hyp'),
                        pds.Series(gold_labels, name='gold'))


def frame_purity(hyp_labels, gold_labels, ignore=None):
    """Many-to-one purity of frame labels.

    Parameters
    ----------
    hyp_labels : array-like
        Discovered label per frame
    gold_labels : array-like
        Gold label per frame
    ignore : object or NoneType
        Gold label whose frames are left out (default=None)

    Returns
    -------
    purity : float
        Fraction of frames carrying the majority gold label of their
        discovered label

    """
    table = _contingency(hyp_labels, gold_labels, ignore)
    return float(table.max(axis=1).sum() / table.values.sum())


def assignment_accuracy(hyp_labels, gold_labels, ignore=None):
    """One-to-one accuracy under the best label permutation.

    Parameters
    ----------
    hyp_labels : array-like
        Discovered label per frame
    gold_labels : array-like
        Gold label per frame
    ignore : object or NoneType
        Gold label whose frames are left out (default=None)

    Returns
    -------
    accuracy : float
        Fraction of frames matched by the best one-to-one label mapping

    """
    table = _contingency(hyp_labels, gold_labels, ignore)
    rows, cols = optimize.linear_sum_assignment(table.values, maximize=True)
    return float(table.values[rows, cols].sum() / table.values.sum())
