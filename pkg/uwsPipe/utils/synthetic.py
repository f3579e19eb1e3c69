#!/usr/bin/env python
# -*- coding: utf-8 -*-
# Full license can be found in LICENSE
# ----------------------------------------------------------------------------
"""Synthetic corpora with known units, words and silences.

Features are emitted by left-to-right Gaussian HMMs, one per unit, so every
downstream stage can be checked against the generating truth.

Example
-------
::

    from uwsPipe.utils import synthetic
    spec = synthetic.SyntheticSpec(n_units=2, lexicon=('01', '10'),
                                   word_dist=(0.5, 0.5), n_utterances=1,
                                   seed=7)
    corp = synthetic.generate_synthetic(spec)

"""

import dataclasses
import os
from typing import Dict, Optional, Tuple

import numpy as np

from uwsPipe import logger
from uwsPipe.utils import corpus

# Frame label marking silence in `SyntheticCorpus.frame_labels`
SILENCE_FRAME = -1


@dataclasses.dataclass(frozen=True)
class SyntheticSpec(object):
    """Settings of the synthetic corpus generator.

    Parameters
    ----------
    n_units : int
        Number of acoustic units
    unit_hmm_states : int
        Left-to-right states per unit (default=3)
    feature_dim : int
        Feature dimension (default=4)
    lexicon : tuple
        Words as unit strings, either one digit per unit or dash-joined unit
        indices (default=('01', '10'))
    word_dist : tuple or NoneType
        Word probabilities, uniform if None (default=None)
    utterance_length_words : tuple
        Inclusive (min, max) number of words per utterance (default=(1, 4))
    n_utterances : int
        Number of utterances (default=10)
    silence_prob : float
        Probability of a silence at each word edge (default=0.0)
    seed : int
        Random seed (default=0)
    separation_sigma : float
        Minimum distance between state means, in emission standard
        deviations (default=4.0)
    noise_sigma : float
        Emission standard deviation (default=1.0)
    self_loop : float
        Self-loop probability of every state (default=0.5)
    silence_frames : tuple
        Inclusive (min, max) silence length in frames (default=(10, 30))
    hop_s : float
        Frame hop in seconds (default=0.01)
    name : str
        Corpus name (default='synthetic')
    unit_means : tuple or NoneType
        Nested n_units x unit_hmm_states x feature_dim state means replacing
        the lattice layout (default=None)

    """

    n_units: int
    unit_hmm_states: int = 3
    feature_dim: int = 4
    lexicon: Tuple[str, ...] = ('01', '10')
    word_dist: Optional[Tuple[float, ...]] = None
    utterance_length_words: Tuple[int, int] = (1, 4)
    n_utterances: int = 10
    silence_prob: float = 0.0
    seed: int = 0
    separation_sigma: float = 4.0
    noise_sigma: float = 1.0
    self_loop: float = 0.5
    silence_frames: Tuple[int, int] = (10, 30)
    hop_s: float = 0.01
    name: str = 'synthetic'
    unit_means: Optional[tuple] = None

    def __post_init__(self):
        """Coerce the containers and check the invariants."""
        object.__setattr__(self, 'lexicon', tuple(self.lexicon))
        if self.word_dist is None:
            object.__setattr__(self, 'word_dist', tuple(
                [1.0 / max(1, len(self.lexicon))] * len(self.lexicon)))
        else:
            object.__setattr__(self, 'word_dist', tuple(
                float(prob) for prob in self.word_dist))
        object.__setattr__(self, 'utterance_length_words',
                           tuple(self.utterance_length_words))
        object.__setattr__(self, 'silence_frames', tuple(self.silence_frames))
        validate_spec(self)
        return

    @property
    def word_units(self):
        """List the unit labels of each lexicon word."""
        return [parse_word(word, self.n_units) for word in self.lexicon]


def parse_word(word, n_units):
    """Split a lexicon word into unit labels.

    Parameters
    ----------
    word : str
        Dash-joined unit indices, or one digit per unit when no dash occurs
    n_units : int
        Alphabet size

    Returns
    -------
    labels : list
        Unit labels as strings of integers in [0, n_units)

    Raises
    ------
    ValueError
        If the word is empty or uses units outside the alphabet

    """
    if len(word) == 0:
        raise ValueError('empty lexicon word')

    parts = word.split(corpus.WORD_JOINER) if corpus.WORD_JOINER in word \
        else list(word)
    labels = list()
    for part in parts:
        if not part.isdigit() or int(part) >= n_units:
            raise ValueError('lexicon word "{:}" uses unit "{:}" outside [0, '
                             '{:d})'.format(word, part, n_units))
        labels.append(str(int(part)))
    return labels


def validate_spec(spec):
    """Check the invariants of a synthetic corpus specification.

    Parameters
    ----------
    spec : SyntheticSpec
        Specification to check

    Raises
    ------
    ValueError
        If any field is out of range

    """
    if spec.n_units < 1:
        raise ValueError('n_units must be positive')
    if spec.unit_hmm_states < 1 or spec.feature_dim < 1:
        raise ValueError('unit_hmm_states and feature_dim must be positive')
    if len(spec.lexicon) == 0:
        raise ValueError('the lexicon must hold at least one word')
    if len(spec.word_dist) != len(spec.lexicon):
        raise ValueError('word_dist and lexicon lengths differ')
    if np.any(np.asarray(spec.word_dist) < 0.0) \
            or abs(sum(spec.word_dist) - 1.0) > 1.0e-9:
        raise ValueError('word_dist must be a probability vector')

    lo, hi = spec.utterance_length_words
    if lo < 1 or hi < lo:
        raise ValueError('bad utterance_length_words {:}'.format(
            spec.utterance_length_words))
    lo, hi = spec.silence_frames
    if lo < 1 or hi < lo:
        raise ValueError('bad silence_frames {:}'.format(spec.silence_frames))
    if not 0.0 <= spec.silence_prob <= 1.0:
        raise ValueError('silence_prob must lie in [0, 1]')
    if not 0.0 <= spec.self_loop < 1.0:
        raise ValueError('self_loop must lie in [0, 1)')
    if spec.n_utterances < 0 or spec.noise_sigma <= 0.0 or spec.hop_s <= 0.0:
        raise ValueError('n_utterances, noise_sigma and hop_s out of range')

    for word in spec.lexicon:
        parse_word(word, spec.n_units)

    if spec.unit_means is not None:
        shape = np.shape(spec.unit_means)
        if shape != (spec.n_units, spec.unit_hmm_states, spec.feature_dim):
            raise ValueError('unit_means has shape {:}, expected {:}'.format(
                shape, (spec.n_units, spec.unit_hmm_states,
                        spec.feature_dim)))
    return


@dataclasses.dataclass(frozen=True, eq=False)
class GeneratorParams(object):
    """Hidden parameters of the generating HMMs.

    Parameters
    ----------
    unit_means : np.ndarray
        n_units x unit_hmm_states x feature_dim state means
    silence_mean : np.ndarray
        Mean of the single silence state
    noise_sigma : float
        Emission standard deviation
    self_loop : float
        Self-loop probability of every state

    """

    unit_means: np.ndarray
    silence_mean: np.ndarray
    noise_sigma: float
    self_loop: float


@dataclasses.dataclass(frozen=True, eq=False)
class SyntheticCorpus(object):
    """Output of `generate_synthetic`.

    Parameters
    ----------
    manifest : CorpusManifest
        Manifest with silences, durations, translations and gold data
    features : dict
        FrameSequence objects keyed by utterance id
    gold_units : dict
        Gold UnitSequence objects, without silence, keyed by utterance id
    gold_words : dict
        Gold Segmentation objects keyed by utterance id
    frame_labels : dict
        Integer unit index per frame, `SILENCE_FRAME` for silence
    params : GeneratorParams
        Hidden generator parameters

    """

    manifest: corpus.CorpusManifest
    features: Dict[str, corpus.FrameSequence]
    gold_units: Dict[str, corpus.UnitSequence]
    gold_words: Dict[str, corpus.Segmentation]
    frame_labels: Dict[str, np.ndarray]
    params: GeneratorParams


def lattice_means(n_points, dim, spacing, rng):
    """Place points on a shuffled cubic lattice.

    Parameters
    ----------
    n_points : int
        Number of points
    dim : int
        Space dimension
    spacing : float
        Lattice spacing, the minimum pairwise distance
    rng : np.random.Generator
        Random generator used to shuffle the lattice sites

    Returns
    -------
    points : np.ndarray
        n_points x dim centred coordinates

    """
    side = 1
    while side**dim < n_points:
        side += 1

    sites = np.array(np.unravel_index(np.arange(side**dim),
                                      tuple([side] * dim))).T
    chosen = sites[rng.permutation(sites.shape[0])[:n_points]]
    points = chosen * spacing
    return points - points.mean(axis=0)


def _state_frames(n_states, self_loop, rng):
    """Sample the number of frames spent in each state."""
    return rng.geometric(1.0 - self_loop, size=n_states)


def generate_synthetic(spec):
    """Generate a synthetic corpus.

    Parameters
    ----------
    spec : SyntheticSpec
        Corpus specification

    Returns
    -------
    corp : SyntheticCorpus
        Manifest, features, gold units and words, frame labels and hidden
        generator parameters; identical for identical specifications

    Note
    ----
    Words are drawn independently from `word_dist`.  A silence may open the
    utterance, close it, and separate any two words.  Gold unit sequences
    exclude silence and each utterance's translation lists ``tr<k>`` for the
    k-th lexicon word of each gold word.

    """
    rng = np.random.default_rng(spec.seed)
    spacing = spec.separation_sigma * spec.noise_sigma
    n_states = spec.unit_hmm_states

    points = lattice_means(spec.n_units * n_states + 1, spec.feature_dim,
                           spacing, rng)
    if spec.unit_means is None:
        unit_means = points[:-1].reshape((spec.n_units, n_states,
                                          spec.feature_dim))
        silence_mean = points[-1]
    else:
        unit_means = np.asarray(spec.unit_means, dtype=np.float64)
        silence_mean = unit_means.reshape((-1, spec.feature_dim)).min(
            axis=0) - spacing

    params = GeneratorParams(unit_means, silence_mean, spec.noise_sigma,
                             spec.self_loop)

    word_units = spec.word_units
    utterances = list()
    features = dict()
    gold_units = dict()
    gold_words = dict()
    frame_labels = dict()
    for i in range(spec.n_utterances):
        uid = 'utt{:04d}'.format(i)
        n_words = rng.integers(spec.utterance_length_words[0],
                               spec.utterance_length_words[1] + 1)
        word_ids = rng.choice(len(spec.lexicon), size=n_words,
                              p=np.asarray(spec.word_dist))

        means = list()
        labels = list()
        silences = list()
        words = list()
        for j in range(n_words + 1):
            # Silence may fall at either edge and between words
            if rng.random() < spec.silence_prob:
                n_sil = rng.integers(spec.silence_frames[0],
                                     spec.silence_frames[1] + 1)
                start = len(labels)
                means.extend([silence_mean] * n_sil)
                labels.extend([SILENCE_FRAME] * n_sil)
                silences.append((round(start * spec.hop_s, 9),
                                 round(len(labels) * spec.hop_s, 9)))

            if j == n_words:
                break

            toks = list()
            for label in word_units[word_ids[j]]:
                unit = int(label)
                start = len(labels)
                for state, dur in enumerate(_state_frames(
                        n_states, spec.self_loop, rng)):
                    means.extend([unit_means[unit, state]] * dur)
                    labels.extend([unit] * dur)
                toks.append(corpus.Token(label, round(start * spec.hop_s, 9),
                                         round(len(labels) * spec.hop_s, 9)))
            words.append(corpus.Word(tuple(toks)))

        means = np.array(means)
        frames = means + spec.noise_sigma * rng.standard_normal(means.shape)

        features[uid] = corpus.FrameSequence(uid, frames, hop_s=spec.hop_s)
        frame_labels[uid] = np.array(labels, dtype=int)
        gold_words[uid] = corpus.Segmentation(uid, tuple(words))
        gold_units[uid] = corpus.UnitSequence(uid, tuple(
            gold_words[uid].tokens))
        utterances.append(corpus.Utterance(
            id=uid, silences=tuple(silences),
            translation=tuple(['tr{:d}'.format(k) for k in word_ids]),
            duration_s=round(len(labels) * spec.hop_s, 9),
            gold_units=gold_units[uid], gold_words=gold_words[uid]))

    manifest = corpus.CorpusManifest(name=spec.name,
                                     frame_rate_hz=1.0 / spec.hop_s,
                                     utterances=utterances)
    logger.debug('generated {:d} synthetic utterances'.format(
        len(utterances)))

    return SyntheticCorpus(manifest, features, gold_units, gold_words,
                           frame_labels, params)


def write_synthetic(corp, out_dir):
    """Write a synthetic corpus in the on-disk formats.

    Parameters
    ----------
    corp : SyntheticCorpus
        Corpus to write
    out_dir : str
        Output directory, created if needed

    Returns
    -------
    manifest_path : str
        Path of the written manifest, which references ``feats/<id>.feat``,
        ``gold_units.txt`` and ``gold_words.txt`` relative to itself

    """
    feat_dir = os.path.join(out_dir, 'feats')
    os.makedirs(feat_dir, exist_ok=True)

    utterances = list()
    for utt in corp.manifest.utterances:
        rel_feat = os.path.join('feats', '{:s}.feat'.format(utt.id))
        corpus.write_features(corp.features[utt.id],
                              os.path.join(out_dir, rel_feat))
        utterances.append(dataclasses.replace(
            utt, feature_path=rel_feat, gold_units_path='gold_units.txt',
            gold_words_path='gold_words.txt'))

    ids = corp.manifest.ids
    corpus.write_units([corp.gold_units[uid] for uid in ids],
                       os.path.join(out_dir, 'gold_units.txt'), timed=True)
    corpus.write_segmentations([corp.gold_words[uid] for uid in ids],
                               os.path.join(out_dir, 'gold_words.txt'),
                               timed=True)

    manifest_path = os.path.join(out_dir, 'manifest.json')
    corpus.save_manifest(corp.manifest.replace_utterances(utterances),
                         manifest_path)
    logger.info('wrote synthetic corpus "{:}" to {:}'.format(
        corp.manifest.name, out_dir))
    return manifest_path
