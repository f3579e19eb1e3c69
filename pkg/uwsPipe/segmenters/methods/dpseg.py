#!/usr/bin/env python
# -*- coding: utf-8 -*-
# Full license can be found in LICENSE
# ----------------------------------------------------------------------------
"""Unigram Dirichlet-process word segmentation by Gibbs sampling.

Words are tuples of unit labels.  The base distribution draws a word length
from a geometric distribution and each unit uniformly from the alphabet.
Every boundary between two units of an utterance is resampled in turn, with
the words it touches taken out of the table counts.  An optional
Beta-Bernoulli factor models whether a word ends its utterance.

"""

import collections
import dataclasses
import math
from typing import Tuple

import numpy as np
import pandas as pds
from scipy import special

from uwsPipe import logger
from uwsPipe.utils import corpus
from uwsPipe.utils import units as unit_utils


def default_schedule():
    """Ten annealing temperatures falling from 2.0 to 1.0."""
    return tuple(float(temp) for temp in np.linspace(2.0, 1.0, 10))


@dataclasses.dataclass(frozen=True)
class DpsegConfig(object):
    """Settings of the unigram segmenter.

    Parameters
    ----------
    alpha0 : float
        Dirichlet-process concentration (default=20.0)
    p_boundary : float
        Stop probability of the geometric word length (default=0.5)
    n_sweeps : int
        Gibbs sweeps over the corpus (default=100)
    anneal : tuple
        Temperatures, each used for an equal share of the sweeps
        (default=ten values from 2.0 to 1.0)
    rho : float
        Beta-Bernoulli concentration of the utterance-end factor
        (default=2.0)
    utterance_boundary_term : bool
        Include the utterance-end factor (default=True)
    init_boundary_prob : float
        Probability of a boundary in the random initial segmentation
        (default=0.5)
    max_len : int
        Longest unit sequence accepted (default=350)
    seed : int
        Random seed (default=0)

    """

    alpha0: float = 20.0
    p_boundary: float = 0.5
    n_sweeps: int = 100
    anneal: Tuple[float, ...] = dataclasses.field(
        default_factory=default_schedule)
    rho: float = 2.0
    utterance_boundary_term: bool = True
    init_boundary_prob: float = 0.5
    max_len: int = unit_utils.MAX_SEQUENCE_TOKENS
    seed: int = 0

    def __post_init__(self):
        """Check the configuration invariants."""
        object.__setattr__(self, 'anneal', tuple(float(temp)
                                                 for temp in self.anneal))
        if not self.alpha0 > 0.0:
            raise ValueError('alpha0 must be positive')
        if not 0.0 < self.p_boundary < 1.0:
            raise ValueError('p_boundary must lie in (0, 1)')
        if self.n_sweeps < 1:
            raise ValueError('n_sweeps must be positive')
        if len(self.anneal) == 0 or min(self.anneal) <= 0.0:
            raise ValueError('anneal needs positive temperatures')
        if not self.rho > 0.0:
            raise ValueError('rho must be positive')
        if not 0.0 <= self.init_boundary_prob <= 1.0:
            raise ValueError('init_boundary_prob must lie in [0, 1]')
        return

    def temperature(self, sweep):
        """Temperature of a zero-based sweep index."""
        block = sweep * len(self.anneal) // self.n_sweeps
        return self.anneal[min(block, len(self.anneal) - 1)]


@dataclasses.dataclass(eq=False)
class CrpState(object):
    """Table counts and boundaries of the collapsed sampler.

    Parameters
    ----------
    counts : collections.Counter
        Word tuple counts
    n_words : int
        Total word tokens
    n_final : int
        Word tokens that end an utterance
    alphabet_size : int
        Number of distinct unit labels, A
    boundaries : dict
        Boolean arrays keyed by utterance id; entry i is True when a word
        ends after unit i

    """

    counts: collections.Counter = dataclasses.field(
        default_factory=collections.Counter)
    n_words: int = 0
    n_final: int = 0
    alphabet_size: int = 1
    boundaries: dict = dataclasses.field(default_factory=dict)

    def add(self, word, final):
        """Add a word token to the tables."""
        self.counts[word] += 1
        self.n_words += 1
        self.n_final += int(final)
        return

    def remove(self, word, final):
        """Remove a word token from the tables."""
        self.counts[word] -= 1
        if self.counts[word] == 0:
            del self.counts[word]
        self.n_words -= 1
        self.n_final -= int(final)
        return


def log_p0(word, p_boundary, alphabet_size):
    """Log base probability of a word tuple."""
    length = len(word)
    return math.log(p_boundary) + (length - 1) * math.log(1.0 - p_boundary) \
        - length * math.log(alphabet_size)


def p0(word, cfg, alphabet_size):
    """Base probability of a word.

    Parameters
    ----------
    word : tuple
        Unit labels of the word
    cfg : DpsegConfig
        Segmenter settings
    alphabet_size : int
        Number of distinct unit labels, A

    Returns
    -------
    prob : float
        p_b (1 - p_b)^(|w| - 1) A^(-|w|)

    Raises
    ------
    ValueError
        For an empty word

    """
    if len(word) == 0:
        raise ValueError('words must contain at least one unit')
    return math.exp(log_p0(tuple(word), cfg.p_boundary, alphabet_size))


def crp_predictive(word, state, cfg):
    """Predictive probability of a word given the table counts.

    Parameters
    ----------
    word : tuple
        Unit labels of the word
    state : CrpState
        Current tables
    cfg : DpsegConfig
        Segmenter settings

    Returns
    -------
    prob : float
        (count(w) + alpha0 P0(w)) / (n + alpha0)

    """
    word = tuple(word)
    return (state.counts.get(word, 0) + cfg.alpha0
            * p0(word, cfg, state.alphabet_size)) \
        / (state.n_words + cfg.alpha0)


def words_of(labels, bounds):
    """Split unit labels into word tuples at the flagged boundaries."""
    words = list()
    start = 0
    for i, cut in enumerate(bounds):
        if cut:
            words.append(tuple(labels[start:i + 1]))
            start = i + 1
    if len(labels) > 0:
        words.append(tuple(labels[start:]))
    return words


def recount(sequences, boundaries):
    """Rebuild the word counts from the boundaries.

    Parameters
    ----------
    sequences : dict
        UnitSequence objects keyed by utterance id
    boundaries : dict
        Boolean arrays keyed by utterance id

    Returns
    -------
    counts : collections.Counter
        Word tuple counts
    n_final : int
        Number of utterance-final words

    """
    counts = collections.Counter()
    n_final = 0
    for uid, seq in sequences.items():
        words = words_of(seq.labels, boundaries[uid])
        counts.update(words)
        n_final += int(len(words) > 0)
    return counts, n_final


def joint_log_prob(state, cfg):
    """Log probability of the whole segmentation under the model.

    Parameters
    ----------
    state : CrpState
        Current tables
    cfg : DpsegConfig
        Segmenter settings

    Returns
    -------
    log_prob : float
        Log probability of the word tokens, in any order, plus the
        utterance-end factor if enabled

    """
    if state.n_words == 0:
        return 0.0

    words = list(state.counts.keys())
    base = cfg.alpha0 * np.exp([log_p0(word, cfg.p_boundary,
                                       state.alphabet_size)
                                for word in words])
    counts = np.array([state.counts[word] for word in words], dtype=float)
    log_prob = special.gammaln(cfg.alpha0) \
        - special.gammaln(state.n_words + cfg.alpha0) \
        + np.sum(special.gammaln(counts + base) - special.gammaln(base))

    if cfg.utterance_boundary_term:
        half = 0.5 * cfg.rho
        log_prob += special.gammaln(cfg.rho) \
            - special.gammaln(state.n_words + cfg.rho) \
            + special.gammaln(state.n_final + half) \
            + special.gammaln(state.n_words - state.n_final + half) \
            - 2.0 * special.gammaln(half)
    return float(log_prob)


def _log_predictive(word, extra, n_extra, state, cfg, log_base):
    """Log predictive of a word with `n_extra` pending tokens added."""
    return math.log(state.counts.get(word, 0) + extra
                    + cfg.alpha0 * math.exp(log_base(word))) \
        - math.log(state.n_words + n_extra + cfg.alpha0)


def _log_final(final, n_extra, n_extra_final, state, cfg):
    """Log Beta-Bernoulli probability of a word ending its utterance."""
    if not cfg.utterance_boundary_term:
        return 0.0
    half = 0.5 * cfg.rho
    n_fin = state.n_final + n_extra_final
    n_all = state.n_words + n_extra
    num = n_fin + half if final else n_all - n_fin + half
    return math.log(num) - math.log(n_all + cfg.rho)


def _resample(labels, bounds, pos, state, cfg, temperature, uniform,
              log_base):
    """Resample the boundary after unit `pos` of one utterance."""
    start = pos
    while start > 0 and not bounds[start - 1]:
        start -= 1
    stop = pos + 1
    while stop < len(bounds) and not bounds[stop]:
        stop += 1
    final = stop == len(bounds)

    left = tuple(labels[start:pos + 1])
    right = tuple(labels[pos + 1:stop + 1])
    merged = left + right

    if bounds[pos]:
        state.remove(left, False)
        state.remove(right, final)
    else:
        state.remove(merged, final)

    log_merged = _log_predictive(merged, 0, 0, state, cfg, log_base) \
        + _log_final(final, 0, 0, state, cfg)
    log_split = _log_predictive(left, 0, 0, state, cfg, log_base) \
        + _log_final(False, 0, 0, state, cfg) \
        + _log_predictive(right, int(left == right), 1, state, cfg,
                          log_base) \
        + _log_final(final, 1, 0, state, cfg)

    cut = uniform < special.expit((log_split - log_merged) / temperature)
    bounds[pos] = cut
    if cut:
        state.add(left, False)
        state.add(right, final)
    else:
        state.add(merged, final)
    return


def check_lengths(sequences, max_len):
    """Reject sequences longer than the segmenter accepts.

    Raises
    ------
    ValueError
        Naming the first utterance over the limit

    """
    for uid, seq in sequences.items():
        if len(seq) > max_len:
            raise ValueError(''.join(['utterance {:} has {:d} '.format(
                uid, len(seq)), 'units, more than the {:d} '.format(max_len),
                'the segmenter accepts']))
    return


def init_state(sequences, cfg, rng):
    """Draw a random initial segmentation and fill the tables."""
    alphabet = set([label for seq in sequences.values()
                    for label in seq.labels])
    state = CrpState(alphabet_size=max(1, len(alphabet)))
    for uid, seq in sequences.items():
        bounds = rng.random(max(0, len(seq) - 1)) < cfg.init_boundary_prob
        state.boundaries[uid] = bounds
        words = words_of(seq.labels, bounds)
        for i, word in enumerate(words):
            state.add(word, i == len(words) - 1)
    return state


def gibbs_segment(sequences, cfg=None):
    """Segment unit sequences with the unigram Dirichlet-process model.

    Parameters
    ----------
    sequences : dict or iterable
        UnitSequence objects, keyed by utterance id or in a list
    cfg : DpsegConfig or NoneType
        Segmenter settings, defaults if None (default=None)

    Returns
    -------
    segmentations : dict
        Segmentation objects keyed by utterance id, from the sweep with the
        highest joint probability
    trace : pds.DataFrame
        Per-sweep 'temperature', 'log_prob' and 'n_words', indexed by
        sweep number starting at 1, with the winning sweep in
        `trace.attrs['best_sweep']`

    Raises
    ------
    ValueError
        If a sequence is longer than `cfg.max_len`

    """
    if cfg is None:
        cfg = DpsegConfig()
    if not isinstance(sequences, dict):
        sequences = {seq.utterance_id: seq for seq in sequences}
    check_lengths(sequences, cfg.max_len)

    rng = np.random.default_rng(cfg.seed)
    state = init_state(sequences, cfg, rng)
    labels = {uid: seq.labels for uid, seq in sequences.items()}

    base_cache = dict()

    def log_base(word):
        if word not in base_cache:
            base_cache[word] = log_p0(word, cfg.p_boundary,
                                      state.alphabet_size)
        return base_cache[word]

    best = (-np.inf, 0, None)
    rows = list()
    for sweep in range(cfg.n_sweeps):
        temp = cfg.temperature(sweep)
        for uid in sequences.keys():
            bounds = state.boundaries[uid]
            draws = rng.random(bounds.shape[0])
            for pos in range(bounds.shape[0]):
                _resample(labels[uid], bounds, pos, state, cfg, temp,
                          draws[pos], log_base)

        log_prob = joint_log_prob(state, cfg)
        rows.append({'temperature': temp, 'log_prob': log_prob,
                     'n_words': state.n_words})
        if log_prob > best[0]:
            best = (log_prob, sweep + 1, {uid: bounds.copy() for uid, bounds
                                          in state.boundaries.items()})

    trace = pds.DataFrame(rows, columns=['temperature', 'log_prob',
                                         'n_words'],
                          index=pds.RangeIndex(1, len(rows) + 1,
                                               name='sweep'))
    trace.attrs['best_sweep'] = best[1]
    logger.info('dpseg: best joint log probability {:.6g} at sweep {:d}'
                .format(best[0], best[1]))

    segmentations = {uid: corpus.Segmentation.from_starts(
        seq, np.flatnonzero(best[2][uid]) + 1)
        for uid, seq in sequences.items()}
    return segmentations, trace


def restart_seeds(seed, restarts):
    """Seeds of independent sampler restarts, counting up from `seed`."""
    return [seed + run for run in range(restarts)]
