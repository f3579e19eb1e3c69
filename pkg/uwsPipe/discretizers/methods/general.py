#!/usr/bin/env python
# -*- coding: utf-8 -*-
# Full license can be found in LICENSE
# ----------------------------------------------------------------------------
"""General routines shared by the discretizer plug-ins."""

import dataclasses
import json

import h5py
import numpy as np
from packaging import version

from uwsPipe import logger
from uwsPipe.utils import corpus
from uwsPipe.utils import units

# Version written to, and the newest version read from, model files
MODEL_FORMAT_VERSION = '1.0'

model_magic = {'aud': 'UWSA', 'vq': 'UWSV', 'subspace': 'UWSS',
               'hier_subspace': 'UWSH'}


def write_model_file(path, magic, arrays, attrs=None):
    """Write a versioned HDF5 model file.

    Parameters
    ----------
    path : str
        Output file name
    magic : str
        Model type marker, one of the `model_magic` values
    arrays : dict
        Arrays keyed by dataset name, '/' separating groups
    attrs : dict or NoneType
        JSON-serializable settings stored with the model (default=None)

    """
    with h5py.File(path, 'w', track_order=True) as fout:
        fout.attrs['magic'] = magic
        fout.attrs['format_version'] = MODEL_FORMAT_VERSION
        fout.attrs['settings'] = json.dumps({} if attrs is None else attrs,
                                            sort_keys=True)
        for name in sorted(arrays.keys()):
            fout.create_dataset(name, data=np.asarray(arrays[name]),
                                track_times=False)
    return


def read_model_file(path, magic):
    """Read a versioned HDF5 model file.

    Parameters
    ----------
    path : str
        Input file name
    magic : str
        Expected model type marker

    Returns
    -------
    arrays : dict
        Arrays keyed by dataset name
    attrs : dict
        Settings stored with the model

    Raises
    ------
    ValueError
        If the marker differs or the file was written by a newer or
        incompatible format version

    """
    arrays = dict()
    with h5py.File(path, 'r') as fin:
        stored = fin.attrs.get('magic')
        if stored != magic:
            raise ValueError('{:} is not a "{:}" model file (found {:})'.format(
                path, magic, stored))

        file_version = version.Version(str(fin.attrs['format_version']))
        supported = version.Version(MODEL_FORMAT_VERSION)
        if file_version.major != supported.major or file_version > supported:
            raise ValueError(''.join(['model file {:} has format '.format(
                path), 'version {:}, '.format(file_version),
                'this reader supports {:}'.format(supported)]))

        attrs = json.loads(fin.attrs['settings'])

        def _collect(name, obj):
            if isinstance(obj, h5py.Dataset):
                arrays[name] = obj[()]
            return

        fin.visititems(_collect)

    return arrays, attrs


def setting_names(*config_classes):
    """List the field names of configuration dataclasses, in order."""
    return tuple(fld.name for cls in config_classes
                 for fld in dataclasses.fields(cls))


def as_feature_dict(features):
    """Key frame sequences by utterance id.

    Parameters
    ----------
    features : dict or iterable
        FrameSequence objects, keyed by utterance id or in a list

    Returns
    -------
    features : dict
        FrameSequence objects keyed by utterance id, input order kept

    Raises
    ------
    ValueError
        If no features are given or the feature dimensions differ

    """
    if not isinstance(features, dict):
        features = {seq.utterance_id: seq for seq in features}

    if len(features) == 0:
        raise ValueError('at least one utterance is needed')

    dims = set([seq.dim for seq in features.values()])
    if len(dims) != 1:
        raise ValueError('feature dimensions differ across utterances: '
                         '{:}'.format(sorted(dims)))
    return features


def stack_frames(features):
    """Concatenate the frames of every utterance.

    Parameters
    ----------
    features : dict
        FrameSequence objects keyed by utterance id

    Returns
    -------
    frames : np.ndarray
        Total frames x dim matrix in utterance order

    """
    return np.vstack([seq.frames for seq in features.values()])


def silence_masks(manifest, features):
    """Flag the frames whose centre lies inside an annotated silence.

    Parameters
    ----------
    manifest : CorpusManifest or NoneType
        Manifest holding the silence annotations
    features : dict
        FrameSequence objects keyed by utterance id

    Returns
    -------
    masks : dict
        Boolean arrays keyed by utterance id, empty if no manifest is given

    """
    masks = dict()
    if manifest is None:
        return masks

    for uid, seq in features.items():
        centres = (np.arange(seq.n_frames) + 0.5) * seq.hop_s
        mask = np.zeros(seq.n_frames, dtype=bool)
        for start, end in manifest[uid].silences:
            mask |= (centres >= start) & (centres < end)
        masks[uid] = mask
    return masks


def frame_labels_from_units(seq, n_frames, hop_s, fill=-1):
    """Label each frame with the integer unit whose token covers it.

    Parameters
    ----------
    seq : UnitSequence
        Tokens labelled with integer strings
    n_frames : int
        Number of frames
    hop_s : float
        Frame hop in seconds
    fill : int
        Label of frames outside every token (default=-1)

    Returns
    -------
    labels : np.ndarray
        Integer label per frame

    """
    labels = np.full(n_frames, fill, dtype=int)
    centres = (np.arange(n_frames) + 0.5) * hop_s
    for tok in seq.tokens:
        labels[(centres >= tok.start_s) & (centres < tok.end_s)] = int(
            tok.label)
    return labels


def unit_label(index, silence_unit=None):
    """Name a discovered unit, using the silence label for the silence unit.

    Parameters
    ----------
    index : int
        Unit index
    silence_unit : int or NoneType
        Index of the dedicated silence unit (default=None)

    Returns
    -------
    label : str
        Unit label

    """
    if silence_unit is not None and index == silence_unit:
        return corpus.SILENCE_LABEL
    return str(int(index))


def labels_to_units(frame_units, hop_s, utterance_id, silence_unit=None):
    """Turn per-frame unit indices into a RAW unit sequence.

    Parameters
    ----------
    frame_units : array-like
        Unit index per frame
    hop_s : float
        Frame hop in seconds
    utterance_id : str
        Utterance identifier
    silence_unit : int or NoneType
        Index of the dedicated silence unit (default=None)

    Returns
    -------
    seq : UnitSequence
        Run-length merged sequence

    """
    labels = [unit_label(index, silence_unit) for index in frame_units]
    return units.merge_windows(labels, hop_s=hop_s, utterance_id=utterance_id)


def decode_corpus(decoder, model, features):
    """Decode every utterance with a plug-in frame decoder.

    Parameters
    ----------
    decoder : function
        Maps (model, FrameSequence) to a UnitSequence
    model : object
        Trained model
    features : dict or iterable
        FrameSequence objects

    Returns
    -------
    sequences : dict
        UnitSequence objects keyed by utterance id

    """
    features = as_feature_dict(features)
    sequences = {uid: decoder(model, seq) for uid, seq in features.items()}
    logger.info('decoded {:d} utterances'.format(len(sequences)))
    return sequences


def labelled_source(manifest_path):
    """Load the features and gold units of a labelled source corpus.

    Parameters
    ----------
    manifest_path : str
        Manifest of the source corpus

    Returns
    -------
    features : dict
        FrameSequence objects keyed by utterance id
    gold : dict
        Gold UnitSequence objects keyed by utterance id

    Raises
    ------
    ValueError
        If an utterance lacks gold units

    """
    manifest = corpus.load_manifest(manifest_path)
    missing = [utt.id for utt in manifest.utterances
               if utt.gold_units is None]
    if len(missing) > 0:
        raise ValueError('source corpus {:} lacks gold units for {:}'.format(
            manifest_path, missing[0]))

    gold = {utt.id: utt.gold_units for utt in manifest.utterances}
    return corpus.load_corpus_features(manifest), gold
