#!/usr/bin/env python
# -*- coding: utf-8 -*-
# Full license can be found in LICENSE
# ----------------------------------------------------------------------------
"""Transformations between frame labels, unit tokens and word tokens."""

import collections
import dataclasses
from typing import Tuple

import numpy as np
import pandas as pds

from uwsPipe import logger
from uwsPipe.utils import corpus

# Sequences longer than this are flagged for the Bayesian segmenter
MAX_SEQUENCE_TOKENS = 350


def _clock(index, hop_s):
    """Time of a frame edge, free of accumulated float noise."""
    return round(index * hop_s, 9)


def merge_windows(frame_labels, hop_s=0.01, utterance_id=''):
    """Merge consecutive frames that share the same label.

    Parameters
    ----------
    frame_labels : array-like
        One label per frame
    hop_s : float
        Frame hop in seconds (default=0.01)
    utterance_id : str
        Identifier of the output sequence (default='')

    Returns
    -------
    seq : UnitSequence
        Run-length encoded RAW sequence, each token spanning its frames

    Raises
    ------
    ValueError
        If no frame labels are supplied

    """
    labels = [str(label) for label in frame_labels]
    if len(labels) == 0:
        raise ValueError('no frame labels to merge for {:}'.format(
            utterance_id))

    tokens = list()
    run_start = 0
    for i in range(1, len(labels) + 1):
        if i == len(labels) or labels[i] != labels[run_start]:
            tokens.append(corpus.Token(labels[run_start],
                                       _clock(run_start, hop_s),
                                       _clock(i, hop_s)))
            run_start = i

    return corpus.UnitSequence(utterance_id, tuple(tokens))


def expand_to_frames(seq, hop_s=0.01):
    """Expand frame-aligned tokens back to one label per frame.

    Parameters
    ----------
    seq : UnitSequence
        Sequence whose token edges fall on frame edges
    hop_s : float
        Frame hop in seconds (default=0.01)

    Returns
    -------
    frame_labels : list
        One label per frame, starting at the first token

    """
    frame_labels = list()
    for tok in seq.tokens:
        n_frames = int(round((tok.end_s - tok.start_s) / hop_s))
        frame_labels.extend([tok.label] * n_frames)
    return frame_labels


def strip_silence_tokens(seq, label=corpus.SILENCE_LABEL):
    """Remove the discretizer's own silence tokens.

    Parameters
    ----------
    seq : UnitSequence
        Sequence to filter
    label : str
        Silence token label (default=corpus.SILENCE_LABEL)

    Returns
    -------
    out_seq : UnitSequence
        Sequence without tokens labelled `label`, other fields unchanged

    """
    tokens = tuple(tok for tok in seq.tokens if tok.label != label)
    return dataclasses.replace(seq, tokens=tokens)


def _inside(time_s, silences):
    """Test whether a time lies within any of the silence intervals."""
    return any([start <= time_s <= end for start, end in silences])


def remove_silence_units(seq, silences):
    """Drop the units predicted inside annotated silence windows.

    Parameters
    ----------
    seq : UnitSequence
        RAW sequence
    silences : iterable
        Sorted (start_s, end_s) silence intervals

    Returns
    -------
    plus_sil : UnitSequence
        PLUS_SIL sequence recording the silences and the dropped tokens

    Raises
    ------
    ValueError
        If the sequence is already PLUS_SIL

    Note
    ----
    A token is dropped when its midpoint lies inside a silence interval.

    """
    if seq.variant == corpus.Variant.PLUS_SIL:
        raise ValueError('silence already removed from {:}'.format(
            seq.utterance_id))

    silences = tuple((float(start), float(end)) for start, end in silences)
    kept = list()
    dropped = list()
    for tok in seq.tokens:
        if _inside(0.5 * (tok.start_s + tok.end_s), silences):
            dropped.append(tok)
        else:
            kept.append(tok)

    return dataclasses.replace(seq, tokens=tuple(kept),
                               variant=corpus.Variant.PLUS_SIL,
                               silences=silences, removed=tuple(dropped))


def reintroduce_silence(seg, silences):
    """Restore silence windows as word boundaries.

    Parameters
    ----------
    seg : Segmentation
        Segmentation of a PLUS_SIL sequence
    silences : iterable
        Sorted (start_s, end_s) silence intervals

    Returns
    -------
    out_seg : Segmentation
        Segmentation where every silence inside the utterance becomes a
        `corpus.SILENCE_WORD` pseudo-word, splitting any word it falls in, so
        that both silence edges are word boundaries

    Note
    ----
    Silences before the first unit or after the last unit touch the utterance
    edges and are not reintroduced.

    """
    tokens = seg.tokens
    if len(tokens) == 0:
        return seg

    first = tokens[0].start_s
    last = tokens[-1].end_s
    inner = [(start, end) for start, end in silences
             if end > first and start < last]
    if len(inner) == 0:
        return seg

    # Slot each word's units into the gaps between silences, by midpoint
    pieces = list()
    for word in seg.words:
        current = list()
        current_slot = None
        for tok in word.tokens:
            mid = 0.5 * (tok.start_s + tok.end_s)
            slot = sum([1 for start, _ in inner if start <= mid])
            if current_slot is not None and slot != current_slot:
                pieces.append((current_slot, current))
                current = list()
            current.append(tok)
            current_slot = slot
        pieces.append((current_slot, current))

    words = list()
    placed = 0
    prev_end = first
    for slot, toks in pieces:
        while placed < slot:
            # Clip to the gap between the kept tokens around the silence
            start = max(inner[placed][0], prev_end)
            end = min(inner[placed][1], toks[0].start_s)
            if end > start:
                words.append(corpus.Word((corpus.Token(corpus.SILENCE_WORD,
                                                       start, end),)))
            placed += 1
        words.append(corpus.Word(tuple(toks)))
        prev_end = toks[-1].end_s

    return corpus.Segmentation(seg.utterance_id, tuple(words))


# ----------------------------------------------------------------------------
# Byte pair encoding


@dataclasses.dataclass(frozen=True)
class BpeModel(object):
    """Ordered unit-pair merges.

    Parameters
    ----------
    merges : tuple
        (left, right, merged) label triples in application order
    alphabet : tuple
        Sorted base labels seen when learning
    vocab_size : int
        Target vocabulary size used when learning

    """

    merges: Tuple[Tuple[str, str, str], ...]
    alphabet: Tuple[str, ...]
    vocab_size: int


def _merge_pair(tokens, left, right, merged):
    """Replace non-overlapping left-to-right occurrences of a pair."""
    out = list()
    i = 0
    while i < len(tokens):
        if (i < len(tokens) - 1 and tokens[i].label == left
                and tokens[i + 1].label == right):
            out.append(corpus.Token(merged, tokens[i].start_s,
                                    tokens[i + 1].end_s))
            i += 2
        else:
            out.append(tokens[i])
            i += 1
    return out


def bpe_learn(sequences, vocab_size):
    """Learn byte pair merges over unit sequences.

    Parameters
    ----------
    sequences : iterable
        UnitSequence objects
    vocab_size : int
        Target vocabulary size, base alphabet included

    Returns
    -------
    model : BpeModel
        Learned merges; learning stops early when no pair occurs twice

    Raises
    ------
    ValueError
        If the corpus holds no tokens

    Note
    ----
    The most frequent adjacent pair is merged at each step, ties going to
    the lexicographically smallest pair.  Merged labels concatenate their
    constituents, joined by '+' when the plain concatenation is already a
    label.

    """
    corpus_tokens = [list(seq.tokens) for seq in sequences]
    alphabet = sorted(set([tok.label for toks in corpus_tokens
                           for tok in toks]))
    if len(alphabet) == 0:
        raise ValueError('cannot learn BPE from an empty corpus')

    vocab = set(alphabet)
    merges = list()
    while len(vocab) < vocab_size:
        pairs = collections.Counter()
        for toks in corpus_tokens:
            for first, second in zip(toks[:-1], toks[1:]):
                pairs[(first.label, second.label)] += 1

        if len(pairs) == 0:
            break

        best = max(pairs.values())
        if best < 2:
            break
        left, right = min([pair for pair, count in pairs.items()
                           if count == best])
        merged = left + right
        if merged in vocab:
            merged = '+'.join([left, right])
        merges.append((left, right, merged))
        vocab.add(merged)
        corpus_tokens = [_merge_pair(toks, left, right, merged)
                         for toks in corpus_tokens]

    logger.debug('learned {:d} BPE merges'.format(len(merges)))
    return BpeModel(tuple(merges), tuple(alphabet), int(vocab_size))


def bpe_apply(seq, model):
    """Apply learned merges to a unit sequence.

    Parameters
    ----------
    seq : UnitSequence
        Sequence over the model's base alphabet
    model : BpeModel
        Learned merges

    Returns
    -------
    out_seq : UnitSequence
        Sequence with merged tokens spanning their constituents

    Raises
    ------
    ValueError
        If a label is not in the model's base alphabet

    """
    known = set(model.alphabet)
    for tok in seq.tokens:
        if tok.label not in known:
            raise ValueError('label "{:}" in {:} not in the BPE alphabet'
                             .format(tok.label, seq.utterance_id))

    tokens = list(seq.tokens)
    for left, right, merged in model.merges:
        tokens = _merge_pair(tokens, left, right, merged)

    return dataclasses.replace(seq, tokens=tuple(tokens))


def bpe_detokenize(seq, model):
    """Undo the merges, restoring the base-label tokens.

    Parameters
    ----------
    seq : UnitSequence
        Output of `bpe_apply`
    model : BpeModel
        Model that produced `seq`

    Returns
    -------
    out_seq : UnitSequence
        Sequence of base labels; split tokens share their parent span evenly

    """
    parts = {merged: (left, right) for left, right, merged in model.merges}

    def _split(tok):
        if tok.label not in parts:
            return [tok]
        left, right = parts[tok.label]
        mid = 0.5 * (tok.start_s + tok.end_s)
        return (_split(corpus.Token(left, tok.start_s, mid))
                + _split(corpus.Token(right, mid, tok.end_s)))

    tokens = [piece for tok in seq.tokens for piece in _split(tok)]
    return dataclasses.replace(seq, tokens=tuple(tokens))


# ----------------------------------------------------------------------------
# Descriptive statistics


@dataclasses.dataclass(frozen=True)
class UnitStats(object):
    """Corpus-level unit statistics.

    Parameters
    ----------
    n_distinct_units : int
        Number of distinct labels
    total_tokens : int
        Number of tokens in the corpus
    mean_seq_len : float
        Mean tokens per non-empty sequence
    max_seq_len : int
        Longest sequence length
    units_per_second : float
        Tokens per second of non-empty sequence duration
    over_limit : tuple
        Ids of sequences longer than the limit
    empty : tuple
        Ids of sequences without tokens
    per_utterance : pds.DataFrame
        Length and duration of each sequence, indexed by utterance id

    """

    n_distinct_units: int
    total_tokens: int
    mean_seq_len: float
    max_seq_len: int
    units_per_second: float
    over_limit: Tuple[str, ...]
    empty: Tuple[str, ...]
    per_utterance: pds.DataFrame = dataclasses.field(compare=False)

    def to_dict(self):
        """Summarize as JSON-ready values."""
        return {'n_distinct_units': self.n_distinct_units,
                'total_tokens': self.total_tokens,
                'mean_seq_len': self.mean_seq_len,
                'max_seq_len': self.max_seq_len,
                'units_per_second': self.units_per_second,
                'over_limit': list(self.over_limit),
                'empty': list(self.empty)}


def unit_stats(sequences, max_len=MAX_SEQUENCE_TOKENS):
    """Describe a corpus of unit sequences.

    Parameters
    ----------
    sequences : iterable
        UnitSequence objects
    max_len : int
        Length above which sequences are flagged
        (default=MAX_SEQUENCE_TOKENS)

    Returns
    -------
    stats : UnitStats
        Exact counts; empty sequences are excluded from the mean length

    Raises
    ------
    ValueError
        If no sequences are supplied

    """
    sequences = list(sequences)
    if len(sequences) == 0:
        raise ValueError('no unit sequences to describe')

    table = pds.DataFrame(
        {'n_tokens': [len(seq.tokens) for seq in sequences],
         'duration_s': [seq.duration_s for seq in sequences]},
        index=pds.Index([seq.utterance_id for seq in sequences],
                        name='utterance_id'))

    empty = table.index[table['n_tokens'] == 0]
    for uid in empty:
        logger.warning('no units left in {:}, excluded from the mean'.format(
            uid))

    over = table.index[table['n_tokens'] > max_len]
    for uid in over:
        logger.warning('{:} has {:d} units, above the {:d} unit limit'.format(
            uid, int(table.loc[uid, 'n_tokens']), max_len))

    live = table[table['n_tokens'] > 0]
    total = int(table['n_tokens'].sum())
    duration = float(live['duration_s'].sum())
    labels = set([tok.label for seq in sequences for tok in seq.tokens])

    return UnitStats(
        n_distinct_units=len(labels), total_tokens=total,
        mean_seq_len=float(live['n_tokens'].mean()) if len(live) else 0.0,
        max_seq_len=int(table['n_tokens'].max()),
        units_per_second=total / duration if duration > 0 else np.nan,
        over_limit=tuple(over), empty=tuple(empty), per_utterance=table)
