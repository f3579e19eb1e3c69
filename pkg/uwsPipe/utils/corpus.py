#!/usr/bin/env python
# -*- coding: utf-8 -*-
# Full license can be found in LICENSE
# ----------------------------------------------------------------------------
"""Data model and file formats for corpora, features, units and words.

Note
----
Three text formats share one layout, one utterance per line::

    <id> <token> <token> ...

Unit tokens are unit labels and word tokens are dash-joined unit labels.  The
time-stamped variant writes each token as ``<label>:<start_s>:<end_s>`` with
3-decimal fixed-point seconds.

"""

import dataclasses
import enum
import json
import os
from typing import NamedTuple, Optional, Tuple

import numpy as np

from uwsPipe import logger

# Feature binary: magic, u32 rows, u32 cols, f32 row-major payload
FEATURE_MAGIC = b'UWSF'
FEATURE_HEADER_BYTES = 12

# Label reserved for the dedicated silence unit of the Bayesian models
SILENCE_LABEL = 'sil'

# Label of the pseudo-words that carry reintroduced silence windows
SILENCE_WORD = '<sil>'

WORD_JOINER = '-'


class Variant(enum.Enum):
    """Marks a unit sequence as direct discretizer output or silence-free."""

    RAW = 'raw'
    PLUS_SIL = 'plus_sil'


class Token(NamedTuple):
    """A single labelled span in seconds."""

    label: str
    start_s: float
    end_s: float


@dataclasses.dataclass(frozen=True)
class UnitSequence(object):
    """Discrete unit tokens of a single utterance.

    Parameters
    ----------
    utterance_id : str
        Utterance identifier
    tokens : tuple
        Time-ordered, non-overlapping `Token` objects
    variant : Variant
        RAW for direct output, PLUS_SIL after silence removal
        (default=Variant.RAW)
    silences : tuple
        Silence intervals, as (start_s, end_s), recorded by silence removal
        (default=())
    removed : tuple
        Tokens dropped by silence removal (default=())

    """

    utterance_id: str
    tokens: Tuple[Token, ...]
    variant: Variant = Variant.RAW
    silences: Tuple[Tuple[float, float], ...] = ()
    removed: Tuple[Token, ...] = ()

    def __post_init__(self):
        """Coerce the containers and check the time ordering."""
        object.__setattr__(self, 'tokens',
                           tuple(Token(*tok) for tok in self.tokens))
        object.__setattr__(self, 'silences',
                           tuple(tuple(sil) for sil in self.silences))
        object.__setattr__(self, 'removed',
                           tuple(Token(*tok) for tok in self.removed))

        prev_end = -np.inf
        for tok in self.tokens:
            if not tok.end_s > tok.start_s:
                raise ValueError(''.join([
                    'token {:} in utterance {:} '.format(tok,
                                                        self.utterance_id),
                    'does not end after it starts']))
            if tok.start_s < prev_end - 1.0e-9:
                raise ValueError(''.join([
                    'tokens in utterance {:} '.format(self.utterance_id),
                    'overlap or are not time-ordered']))
            prev_end = tok.end_s
        return

    def __len__(self):
        """Provide the number of tokens."""
        return len(self.tokens)

    @property
    def labels(self):
        """List the token labels."""
        return [tok.label for tok in self.tokens]

    @property
    def duration_s(self):
        """Time from the first token start to the last token end."""
        if len(self.tokens) == 0:
            return 0.0
        return self.tokens[-1].end_s - self.tokens[0].start_s


@dataclasses.dataclass(frozen=True)
class Word(object):
    """A word hypothesis, made of consecutive unit tokens."""

    tokens: Tuple[Token, ...]

    def __post_init__(self):
        """Coerce the tokens and reject empty words."""
        object.__setattr__(self, 'tokens',
                           tuple(Token(*tok) for tok in self.tokens))
        if len(self.tokens) == 0:
            raise ValueError('words must contain at least one unit')
        return

    @property
    def label(self):
        """Dash-joined unit labels."""
        return WORD_JOINER.join([tok.label for tok in self.tokens])

    @property
    def start_s(self):
        """Start time of the first unit."""
        return self.tokens[0].start_s

    @property
    def end_s(self):
        """End time of the last unit."""
        return self.tokens[-1].end_s

    @property
    def is_silence(self):
        """True for a reintroduced silence window."""
        return self.label == SILENCE_WORD


@dataclasses.dataclass(frozen=True)
class Segmentation(object):
    """Ordered word tokens over the unit sequence of one utterance."""

    utterance_id: str
    words: Tuple[Word, ...]

    def __post_init__(self):
        """Coerce the word container."""
        object.__setattr__(self, 'words', tuple(self.words))
        return

    def __len__(self):
        """Provide the number of words."""
        return len(self.words)

    @classmethod
    def from_starts(cls, units, starts):
        """Build a segmentation from the unit indices that open a word.

        Parameters
        ----------
        units : UnitSequence
            Unit sequence being segmented
        starts : array-like
            Indices of the units that start a new word; index 0 is implied

        Returns
        -------
        seg : Segmentation
            Segmentation of `units`

        """
        cuts = sorted(set([0] + [int(ss) for ss in starts]
                          + [len(units.tokens)]))
        words = [Word(units.tokens[lo:hi]) for lo, hi in zip(cuts[:-1],
                                                             cuts[1:])
                 if hi > lo]
        return cls(units.utterance_id, tuple(words))

    @property
    def tokens(self):
        """List all unit tokens in order."""
        return [tok for word in self.words for tok in word.tokens]

    @property
    def labels(self):
        """List the word labels."""
        return [word.label for word in self.words]

    def word_starts(self):
        """Provide the unit indices that open the second and later words.

        Returns
        -------
        starts : list
            Inter-token boundary indices, excluding the utterance edges

        """
        starts = list()
        index = 0
        for word in self.words[:-1]:
            index += len(word.tokens)
            starts.append(index)
        return starts


@dataclasses.dataclass(frozen=True, eq=False)
class FrameSequence(object):
    """Per-utterance matrix of acoustic feature vectors.

    Parameters
    ----------
    utterance_id : str
        Utterance identifier
    frames : array-like
        N x dim matrix of finite feature values
    hop_s : float
        Frame hop in seconds (default=0.01)

    """

    utterance_id: str
    frames: np.ndarray
    hop_s: float = 0.01

    def __post_init__(self):
        """Validate the frame matrix and freeze it."""
        frames = np.array(self.frames, dtype=np.float64, ndmin=2)
        if frames.ndim != 2:
            raise ValueError('frames for {:} must be a matrix'.format(
                self.utterance_id))
        if frames.shape[0] < 1 or frames.shape[1] < 1:
            raise ValueError(''.join(['frames for {:} '.format(
                self.utterance_id), 'need at least one row and one column',
                ', got shape {:}'.format(frames.shape)]))
        if not np.all(np.isfinite(frames)):
            raise ValueError('non-finite feature values in {:}'.format(
                self.utterance_id))
        if not self.hop_s > 0.0:
            raise ValueError('hop must be positive')

        frames.setflags(write=False)
        object.__setattr__(self, 'frames', frames)
        return

    @property
    def n_frames(self):
        """Number of frames, N."""
        return self.frames.shape[0]

    @property
    def dim(self):
        """Feature dimension."""
        return self.frames.shape[1]

    @property
    def duration_s(self):
        """Utterance duration implied by the frame count."""
        return self.n_frames * self.hop_s


@dataclasses.dataclass(frozen=True)
class Utterance(object):
    """Manifest entry for a single utterance."""

    id: str
    audio_path: Optional[str] = None
    feature_path: Optional[str] = None
    translation: Optional[Tuple[str, ...]] = None
    silences: Tuple[Tuple[float, float], ...] = ()
    gold_units_path: Optional[str] = None
    gold_words_path: Optional[str] = None
    duration_s: Optional[float] = None
    gold_units: Optional[UnitSequence] = None
    gold_words: Optional[Segmentation] = None

    def __post_init__(self):
        """Coerce the containers and validate the utterance."""
        if self.translation is not None:
            object.__setattr__(self, 'translation', tuple(self.translation))
        object.__setattr__(self, 'silences', tuple(
            (float(sil[0]), float(sil[1])) for sil in self.silences))
        validate_utterance(self)
        return


@dataclasses.dataclass(frozen=True)
class CorpusManifest(object):
    """A named collection of utterances at a fixed frame rate."""

    name: str
    frame_rate_hz: float = 100.0
    utterances: Tuple[Utterance, ...] = ()

    def __post_init__(self):
        """Validate the frame rate and the utterance ids."""
        object.__setattr__(self, 'utterances', tuple(self.utterances))
        if not self.frame_rate_hz > 0.0:
            raise ValueError('frame_rate_hz must be positive, got {:}'.format(
                self.frame_rate_hz))

        seen = set()
        for utt in self.utterances:
            if utt.id in seen:
                raise ValueError('duplicate utterance id "{:s}"'.format(
                    utt.id))
            seen.add(utt.id)
        return

    @property
    def hop_s(self):
        """Frame hop in seconds."""
        return 1.0 / self.frame_rate_hz

    @property
    def ids(self):
        """List the utterance ids in manifest order."""
        return [utt.id for utt in self.utterances]

    def __getitem__(self, utt_id):
        """Retrieve an utterance by id."""
        for utt in self.utterances:
            if utt.id == utt_id:
                return utt
        raise KeyError('unknown utterance id "{:}"'.format(utt_id))

    def replace_utterances(self, utterances):
        """Create a copy holding a different list of utterances."""
        return dataclasses.replace(self, utterances=tuple(utterances))


def validate_utterance(utt):
    """Check the invariants of a manifest utterance.

    Parameters
    ----------
    utt : Utterance
        Utterance to check

    Raises
    ------
    ValueError
        If the id is empty or the silence intervals are malformed,
        overlapping, unsorted, or outside the utterance duration.

    """
    if not isinstance(utt.id, str) or len(utt.id) == 0:
        raise ValueError('utterance id must be a non-empty string')

    if any([char.isspace() for char in utt.id]):
        raise ValueError('utterance id "{:}" contains whitespace'.format(
            utt.id))

    prev_end = -np.inf
    for start, end in utt.silences:
        if not end > start or start < 0.0:
            raise ValueError('bad silence ({:}, {:}) in utterance {:}'.format(
                start, end, utt.id))
        if start < prev_end:
            raise ValueError(''.join(['overlapping or unsorted silences in ',
                                      'utterance {:}'.format(utt.id)]))
        if utt.duration_s is not None and end > utt.duration_s + 1.0e-9:
            raise ValueError(''.join(['silence ({:}, {:}) '.format(start, end),
                                      'beyond the end of utterance ',
                                      '{:}'.format(utt.id)]))
        prev_end = end

    return


# ----------------------------------------------------------------------------
# Manifest format


def _resolve(path, base_dir):
    """Resolve a manifest path against the manifest directory."""
    if path is None:
        return None
    return os.path.normpath(os.path.join(base_dir, path))


def load_manifest(path):
    """Load and validate a corpus manifest.

    Parameters
    ----------
    path : str
        Path to the JSON manifest

    Returns
    -------
    manifest : CorpusManifest
        Validated manifest with paths resolved against the manifest directory

    Raises
    ------
    ValueError
        If the JSON does not parse (with line and column) or an utterance
        violates the manifest invariants (with the utterance index and id)

    """
    with open(path, 'r') as fin:
        text = fin.read()

    try:
        raw = json.loads(text)
    except json.JSONDecodeError as jerr:
        raise ValueError('unable to parse {:}: line {:d}, column {:d}: {:}'
                         .format(path, jerr.lineno, jerr.colno, jerr.msg))

    if not isinstance(raw, dict):
        raise ValueError('manifest {:} must hold a JSON object'.format(path))

    for key in ['name', 'utterances']:
        if key not in raw:
            raise ValueError('manifest {:} missing field "{:s}"'.format(
                path, key))

    base_dir = os.path.dirname(os.path.abspath(path))
    gold_cache = dict()
    utterances = list()
    for i, entry in enumerate(raw['utterances']):
        uid = entry.get('id') if isinstance(entry, dict) else None
        try:
            utterances.append(_parse_utterance(entry, base_dir, gold_cache))
        except (TypeError, ValueError, KeyError) as err:
            raise ValueError('utterance {:d} ("{:}") in {:}: {:}'.format(
                i, uid, path, err))

    manifest = CorpusManifest(name=str(raw['name']),
                              frame_rate_hz=float(raw.get('frame_rate_hz',
                                                          100.0)),
                              utterances=utterances)
    logger.debug('loaded {:d} utterances from {:}'.format(
        len(manifest.utterances), path))
    return manifest


def _parse_utterance(entry, base_dir, gold_cache):
    """Build an `Utterance` from a manifest JSON entry."""
    known = {'id', 'audio_path', 'feature_path', 'translation', 'silences',
             'gold_units_path', 'gold_words_path', 'duration_s'}
    unknown = set(entry.keys()).difference(known)
    if len(unknown) > 0:
        raise ValueError('unknown field(s) {:}'.format(sorted(unknown)))

    if 'id' not in entry:
        raise ValueError('missing field "id"')

    silences = entry.get('silences', [])
    for sil in silences:
        if len(sil) != 2:
            raise ValueError('field "silences" needs [start, end] pairs')

    kwargs = {'id': entry['id'],
              'audio_path': _resolve(entry.get('audio_path'), base_dir),
              'feature_path': _resolve(entry.get('feature_path'), base_dir),
              'translation': entry.get('translation'),
              'silences': silences,
              'gold_units_path': _resolve(entry.get('gold_units_path'),
                                          base_dir),
              'gold_words_path': _resolve(entry.get('gold_words_path'),
                                          base_dir),
              'duration_s': entry.get('duration_s')}

    # Gold files hold many utterances, read each file once
    if kwargs['gold_units_path'] is not None:
        fname = kwargs['gold_units_path']
        if fname not in gold_cache:
            gold_cache[fname] = read_units(fname)
        kwargs['gold_units'] = gold_cache[fname].get(entry['id'])

    # Words are laid over the gold units, when present, to keep unit times
    if kwargs['gold_words_path'] is not None:
        fname = kwargs['gold_words_path']
        if fname not in gold_cache:
            gold_cache[fname] = read_segmentations(
                fname, units=gold_cache.get(kwargs['gold_units_path']))
        kwargs['gold_words'] = gold_cache[fname].get(entry['id'])

    return Utterance(**kwargs)


def save_manifest(manifest, path):
    """Write a manifest as a single JSON document.

    Parameters
    ----------
    manifest : CorpusManifest
        Manifest to write
    path : str
        Output path

    Note
    ----
    Gold units and words are written as the paths they were loaded from.

    """
    entries = list()
    for utt in manifest.utterances:
        entry = {'id': utt.id, 'silences': [list(sil) for sil in utt.silences]}
        for key in ['audio_path', 'feature_path', 'gold_units_path',
                    'gold_words_path', 'duration_s']:
            if getattr(utt, key) is not None:
                entry[key] = getattr(utt, key)
        if utt.translation is not None:
            entry['translation'] = list(utt.translation)
        entries.append(entry)

    out = {'name': manifest.name, 'frame_rate_hz': manifest.frame_rate_hz,
           'utterances': entries}
    with open(path, 'w') as fout:
        json.dump(out, fout, indent=1, sort_keys=True)
        fout.write('\n')
    return


# ----------------------------------------------------------------------------
# Feature binaries


def write_features(seq, path):
    """Write a frame sequence to the little-endian feature binary.

    Parameters
    ----------
    seq : FrameSequence
        Frames to write; the payload is stored as 32-bit floats
    path : str
        Output path

    Raises
    ------
    ValueError
        If the frame matrix is empty or holds non-finite values

    """
    frames = np.asarray(seq.frames)
    if frames.ndim != 2 or frames.shape[0] < 1 or frames.shape[1] < 1:
        raise ValueError('refusing to write empty frame matrix for {:}'
                         .format(seq.utterance_id))
    if not np.all(np.isfinite(frames)):
        raise ValueError('refusing to write non-finite features for {:}'
                         .format(seq.utterance_id))

    header = np.asarray(frames.shape, dtype='<u4').tobytes()
    with open(path, 'wb') as fout:
        fout.write(FEATURE_MAGIC)
        fout.write(header)
        fout.write(np.ascontiguousarray(frames, dtype='<f4').tobytes())
    return


def read_features(path, utterance_id=None, hop_s=0.01):
    """Read a feature binary.

    Parameters
    ----------
    path : str
        Feature binary path
    utterance_id : str or NoneType
        Utterance id, if None the file stem is used (default=None)
    hop_s : float
        Frame hop in seconds (default=0.01)

    Returns
    -------
    seq : FrameSequence
        Frame sequence holding the 32-bit payload

    Raises
    ------
    ValueError
        For a bad magic string, a truncated payload, or NaN values

    """
    with open(path, 'rb') as fin:
        raw = fin.read()

    if raw[:4] != FEATURE_MAGIC:
        raise ValueError('bad magic in feature file {:}'.format(path))
    if len(raw) < FEATURE_HEADER_BYTES:
        raise ValueError('truncated header in feature file {:}'.format(path))

    rows, cols = np.frombuffer(raw[4:FEATURE_HEADER_BYTES], dtype='<u4')
    nbytes = int(rows) * int(cols) * 4
    if len(raw) - FEATURE_HEADER_BYTES != nbytes:
        raise ValueError(''.join(['truncated payload in feature file ',
                                  '{:}: expected {:d} bytes, found {:d}'.format(
                                      path, nbytes,
                                      len(raw) - FEATURE_HEADER_BYTES)]))

    frames = np.frombuffer(raw[FEATURE_HEADER_BYTES:], dtype='<f4').reshape(
        (int(rows), int(cols)))
    if np.any(np.isnan(frames)):
        raise ValueError('NaN values in feature file {:}'.format(path))

    if utterance_id is None:
        utterance_id = os.path.splitext(os.path.basename(path))[0]

    seq = FrameSequence(utterance_id, frames.astype(np.float32), hop_s=hop_s)
    return seq


def load_corpus_features(manifest):
    """Read the feature binaries of every utterance in a manifest.

    Parameters
    ----------
    manifest : CorpusManifest
        Manifest whose utterances all have a `feature_path`

    Returns
    -------
    features : dict
        FrameSequence objects keyed by utterance id, in manifest order

    Raises
    ------
    ValueError
        If an utterance has no feature path

    """
    features = dict()
    for utt in manifest.utterances:
        if utt.feature_path is None:
            raise ValueError('utterance {:} has no feature_path'.format(
                utt.id))
        features[utt.id] = read_features(utt.feature_path,
                                         utterance_id=utt.id,
                                         hop_s=manifest.hop_s)
    return features


# ----------------------------------------------------------------------------
# Unit and word text files


def _format_time(value):
    """Format seconds as 3-decimal fixed point."""
    return '{:.3f}'.format(value)


def _check_label(label):
    """Ensure a label can be written to the text formats."""
    if len(label) == 0 or any([char.isspace() or char == ':'
                               for char in label]):
        raise ValueError('label "{:}" cannot be written'.format(label))
    return


def write_units(sequences, path, timed=True):
    """Write unit sequences, one utterance per line.

    Parameters
    ----------
    sequences : iterable
        UnitSequence objects
    path : str
        Output path
    timed : bool
        Write `<label>:<start>:<end>` tokens if True (default=True)

    """
    with open(path, 'w') as fout:
        for seq in sequences:
            fields = [seq.utterance_id]
            for tok in seq.tokens:
                _check_label(tok.label)
                if timed:
                    fields.append(':'.join([tok.label,
                                            _format_time(tok.start_s),
                                            _format_time(tok.end_s)]))
                else:
                    fields.append(tok.label)
            fout.write(' '.join(fields) + '\n')
    return


def _parse_line(line, path, line_num):
    """Split a text line into an id and (label, start, end) entries."""
    fields = line.split()
    entries = list()
    for field in fields[1:]:
        parts = field.split(':')
        if len(parts) == 1:
            entries.append((parts[0], None, None))
        elif len(parts) == 3:
            try:
                entries.append((parts[0], float(parts[1]), float(parts[2])))
            except ValueError:
                raise ValueError('{:}, line {:d}: bad time in "{:}"'.format(
                    path, line_num, field))
        else:
            raise ValueError('{:}, line {:d}: bad token "{:}"'.format(
                path, line_num, field))
    return fields[0], entries


def read_units(path, hop_s=0.01, variant=Variant.RAW):
    """Read a unit file in the plain or time-stamped format.

    Parameters
    ----------
    path : str
        Unit file path
    hop_s : float
        Span assigned to each token of an untimed line (default=0.01)
    variant : Variant
        Variant marker for the loaded sequences (default=Variant.RAW)

    Returns
    -------
    sequences : dict
        UnitSequence objects keyed by utterance id, in file order

    Raises
    ------
    ValueError
        For malformed lines or a duplicated utterance id

    """
    sequences = dict()
    with open(path, 'r') as fin:
        for line_num, line in enumerate(fin, start=1):
            if len(line.strip()) == 0:
                continue
            uid, entries = _parse_line(line, path, line_num)
            if uid in sequences:
                raise ValueError('{:}, line {:d}: duplicate id "{:}"'.format(
                    path, line_num, uid))
            tokens = list()
            for i, (label, start, end) in enumerate(entries):
                if start is None:
                    start = round(i * hop_s, 9)
                    end = round((i + 1) * hop_s, 9)
                tokens.append(Token(label, start, end))
            sequences[uid] = UnitSequence(uid, tuple(tokens), variant=variant)
    return sequences


def write_segmentations(segmentations, path, timed=False):
    """Write word segmentations, one utterance per line.

    Parameters
    ----------
    segmentations : iterable
        Segmentation objects
    path : str
        Output path
    timed : bool
        Write `<word>:<start>:<end>` tokens if True (default=False)

    """
    with open(path, 'w') as fout:
        for seg in segmentations:
            fields = [seg.utterance_id]
            for word in seg.words:
                _check_label(word.label)
                if timed:
                    fields.append(':'.join([word.label,
                                            _format_time(word.start_s),
                                            _format_time(word.end_s)]))
                else:
                    fields.append(word.label)
            fout.write(' '.join(fields) + '\n')
    return


def read_segmentations(path, units=None, hop_s=0.01):
    """Read a word file in the plain or time-stamped format.

    Parameters
    ----------
    path : str
        Word file path
    units : dict or NoneType
        UnitSequence objects keyed by utterance id.  When given, the words
        are laid over these unit tokens, which must spell the same labels.
        (default=None)
    hop_s : float
        Span of each unit for untimed lines without `units` (default=0.01)

    Returns
    -------
    segmentations : dict
        Segmentation objects keyed by utterance id, in file order

    Raises
    ------
    ValueError
        For malformed lines or words that do not spell the unit sequence

    """
    segmentations = dict()
    with open(path, 'r') as fin:
        for line_num, line in enumerate(fin, start=1):
            if len(line.strip()) == 0:
                continue
            uid, entries = _parse_line(line, path, line_num)
            if units is not None and uid in units:
                segmentations[uid] = _words_over_units(
                    [entry[0] for entry in entries], units[uid])
                continue

            words = list()
            clock = 0.0
            for label, start, end in entries:
                parts = label.split(WORD_JOINER)
                if start is None:
                    start = clock
                    end = clock + len(parts) * hop_s
                step = (end - start) / len(parts)
                words.append(Word(tuple(
                    Token(part, round(start + i * step, 9),
                          round(start + (i + 1) * step, 9))
                    for i, part in enumerate(parts))))
                clock = end
            segmentations[uid] = Segmentation(uid, tuple(words))
    return segmentations


def _words_over_units(word_labels, units):
    """Lay dash-joined word labels over the tokens of a unit sequence."""
    words = list()
    index = 0
    for label in word_labels:
        parts = label.split(WORD_JOINER)
        toks = units.tokens[index:index + len(parts)]
        if [tok.label for tok in toks] != parts:
            raise ValueError(''.join(['word "{:}" does not match '.format(
                label), 'the units of utterance {:}'.format(
                    units.utterance_id)]))
        words.append(Word(toks))
        index += len(parts)

    if index != len(units.tokens):
        raise ValueError('words do not cover the units of utterance {:}'
                         .format(units.utterance_id))
    return Segmentation(units.utterance_id, tuple(words))
