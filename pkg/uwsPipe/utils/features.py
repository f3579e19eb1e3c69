#!/usr/bin/env python
# -*- coding: utf-8 -*-
# Full license can be found in LICENSE
# ----------------------------------------------------------------------------
"""MFCC feature extraction and per-utterance mean-variance normalization."""

import dataclasses
import os

import numpy as np
from scipy import fft
from scipy import signal
from scipy.io import wavfile

from uwsPipe import logger
from uwsPipe.utils import corpus

LOG_FLOOR = 1.0e-10


@dataclasses.dataclass(frozen=True)
class MfccConfig(object):
    """Settings for MFCC extraction.

    Parameters
    ----------
    sample_rate_hz : int
        Expected WAV sample rate (default=16000)
    window_s : float
        Analysis window length in seconds (default=0.025)
    hop_s : float
        Frame hop in seconds (default=0.010)
    n_fft : int
        FFT length (default=512)
    n_mels : int
        Number of mel filters (default=23)
    n_ceps : int
        Number of cepstral coefficients kept (default=13)
    pre_emphasis : float
        Pre-emphasis coefficient (default=0.97)
    add_deltas : bool
        Append deltas and delta-deltas (default=False)
    delta_window : int
        Half-width of the delta regression window (default=2)
    dither : float
        Standard deviation of additive dither, 0 disables it (default=0.0)
    seed : int
        Seed for the dither noise (default=0)

    """

    sample_rate_hz: int = 16000
    window_s: float = 0.025
    hop_s: float = 0.010
    n_fft: int = 512
    n_mels: int = 23
    n_ceps: int = 13
    pre_emphasis: float = 0.97
    add_deltas: bool = False
    delta_window: int = 2
    dither: float = 0.0
    seed: int = 0

    def __post_init__(self):
        """Check the configuration invariants."""
        if self.hop_s > self.window_s:
            raise ValueError('hop_s must not exceed window_s')
        if self.n_ceps > self.n_mels:
            raise ValueError('n_ceps must not exceed n_mels')
        if self.n_fft < self.window_samples:
            raise ValueError(''.join(['n_fft ({:d}) '.format(self.n_fft),
                                      'shorter than the window (',
                                      '{:d} samples)'.format(
                                          self.window_samples)]))
        return

    @property
    def window_samples(self):
        """Window length in samples."""
        return int(round(self.window_s * self.sample_rate_hz))

    @property
    def hop_samples(self):
        """Hop length in samples."""
        return int(round(self.hop_s * self.sample_rate_hz))


def hz_to_mel(freq):
    """Convert frequency to the HTK mel scale."""
    return 2595.0 * np.log10(1.0 + np.asarray(freq) / 700.0)


def mel_to_hz(mel):
    """Convert HTK mels to frequency in Hz."""
    return 700.0 * (10.0**(np.asarray(mel) / 2595.0) - 1.0)


def mel_filterbank(cfg):
    """Build triangular mel filters over the FFT bins.

    Parameters
    ----------
    cfg : MfccConfig
        Extraction settings

    Returns
    -------
    fbank : np.ndarray
        n_mels x (n_fft // 2 + 1) filter weights

    Note
    ----
    Triangles are laid out in the mel domain between 0 Hz and the Nyquist
    frequency, as HTK does.

    """
    bin_mel = hz_to_mel(np.arange(cfg.n_fft // 2 + 1) * cfg.sample_rate_hz
                        / cfg.n_fft)
    edges = np.linspace(0.0, hz_to_mel(cfg.sample_rate_hz / 2.0),
                        cfg.n_mels + 2)

    fbank = np.zeros(shape=(cfg.n_mels, bin_mel.shape[0]))
    for i in range(cfg.n_mels):
        rise = (bin_mel - edges[i]) / (edges[i + 1] - edges[i])
        fall = (edges[i + 2] - bin_mel) / (edges[i + 2] - edges[i + 1])
        fbank[i] = np.maximum(0.0, np.minimum(rise, fall))

    return fbank


def frame_signal(samples, cfg):
    """Cut a signal into overlapping frames.

    Parameters
    ----------
    samples : np.ndarray
        1D signal
    cfg : MfccConfig
        Extraction settings

    Returns
    -------
    frames : np.ndarray
        N x window_samples matrix, with
        N = floor((n_samples - window) / hop) + 1

    Raises
    ------
    ValueError
        If the signal is shorter than one window

    """
    win = cfg.window_samples
    hop = cfg.hop_samples
    if samples.shape[0] < win:
        raise ValueError('audio shorter than one window ({:d} < {:d})'.format(
            samples.shape[0], win))

    n_frames = (samples.shape[0] - win) // hop + 1
    index = np.arange(win)[None, :] + hop * np.arange(n_frames)[:, None]
    return samples[index]


def filterbank_energies(samples, cfg):
    """Compute log mel filterbank energies.

    Parameters
    ----------
    samples : np.ndarray
        1D signal as floats
    cfg : MfccConfig
        Extraction settings

    Returns
    -------
    log_fbank : np.ndarray
        N x n_mels log energies, floored at `LOG_FLOOR` before the log

    """
    samples = np.asarray(samples, dtype=np.float64)
    if cfg.dither > 0.0:
        rng = np.random.default_rng(cfg.seed)
        samples = samples + cfg.dither * rng.standard_normal(samples.shape)

    emphasized = np.append(samples[:1],
                           samples[1:] - cfg.pre_emphasis * samples[:-1])
    frames = frame_signal(emphasized, cfg)
    frames = frames * signal.get_window('hann', cfg.window_samples)

    power = np.abs(fft.rfft(frames, n=cfg.n_fft, axis=1))**2
    energies = power @ mel_filterbank(cfg).T

    return np.log(np.maximum(energies, LOG_FLOOR))


def add_deltas(feats, width=2):
    """Append regression deltas and delta-deltas.

    Parameters
    ----------
    feats : np.ndarray
        N x d feature matrix
    width : int
        Half-width of the regression window (default=2)

    Returns
    -------
    out : np.ndarray
        N x 3d matrix [feats, deltas, delta-deltas]

    """
    def _delta(mat):
        padded = np.pad(mat, ((width, width), (0, 0)), mode='edge')
        denom = 2.0 * sum([k**2 for k in range(1, width + 1)])
        num = np.zeros(shape=mat.shape)
        for k in range(1, width + 1):
            num += k * (padded[width + k:width + k + mat.shape[0]]
                        - padded[width - k:width - k + mat.shape[0]])
        return num / denom

    deltas = _delta(feats)
    return np.hstack([feats, deltas, _delta(deltas)])


def read_wav(wav_path, cfg):
    """Read mono 16-bit PCM audio.

    Parameters
    ----------
    wav_path : str
        WAV file path
    cfg : MfccConfig
        Extraction settings holding the expected sample rate

    Returns
    -------
    samples : np.ndarray
        Samples as floats

    Raises
    ------
    ValueError
        If the file is not mono PCM16 at the configured sample rate

    """
    rate, samples = wavfile.read(wav_path)
    if samples.dtype != np.int16:
        raise ValueError('unsupported WAV encoding {:} in {:}'.format(
            samples.dtype, wav_path))
    if samples.ndim != 1:
        raise ValueError('expected mono audio in {:}'.format(wav_path))
    if rate != cfg.sample_rate_hz:
        raise ValueError('sample rate {:d} != configured {:d} in {:}'.format(
            rate, cfg.sample_rate_hz, wav_path))
    return samples.astype(np.float64)


def samples_to_frames(samples, cfg, utterance_id=''):
    """Compute MFCCs from a signal.

    Parameters
    ----------
    samples : np.ndarray
        1D signal
    cfg : MfccConfig
        Extraction settings
    utterance_id : str
        Identifier stored in the output (default='')

    Returns
    -------
    seq : FrameSequence
        MFCC frames at `cfg.hop_s`

    """
    log_fbank = filterbank_energies(samples, cfg)
    ceps = fft.dct(log_fbank, type=2, axis=1, norm='ortho')[:, :cfg.n_ceps]

    if cfg.add_deltas:
        ceps = add_deltas(ceps, width=cfg.delta_window)

    return corpus.FrameSequence(utterance_id, ceps, hop_s=cfg.hop_s)


def wav_to_frames(wav_path, cfg, utterance_id=None):
    """Compute MFCC features from a WAV file.

    Parameters
    ----------
    wav_path : str
        Mono PCM16 WAV file
    cfg : MfccConfig
        Extraction settings
    utterance_id : str or NoneType
        Identifier, the file stem if None (default=None)

    Returns
    -------
    seq : FrameSequence
        MFCC frames

    """
    if utterance_id is None:
        utterance_id = os.path.splitext(os.path.basename(wav_path))[0]

    return samples_to_frames(read_wav(wav_path, cfg), cfg,
                             utterance_id=utterance_id)


def cmvn(seq):
    """Normalize each feature dimension to zero mean and unit variance.

    Parameters
    ----------
    seq : FrameSequence
        Input frames

    Returns
    -------
    norm_seq : FrameSequence
        Normalized frames; constant dimensions map to zero

    Raises
    ------
    ValueError
        If fewer than two frames are supplied

    """
    if seq.n_frames < 2:
        raise ValueError('cmvn needs at least 2 frames, {:} has {:d}'.format(
            seq.utterance_id, seq.n_frames))

    mean = seq.frames.mean(axis=0)
    std = seq.frames.std(axis=0)
    constant = std <= 1.0e-12 * np.maximum(1.0, np.abs(mean))

    norm = np.zeros(shape=seq.frames.shape)
    live = ~constant
    norm[:, live] = (seq.frames[:, live] - mean[live]) / std[live]

    return corpus.FrameSequence(seq.utterance_id, norm, hop_s=seq.hop_s)


def extract_corpus(manifest, out_dir, cfg, normalize=True):
    """Compute features for every utterance with audio.

    Parameters
    ----------
    manifest : CorpusManifest
        Manifest whose utterances carry `audio_path`
    out_dir : str
        Directory for the feature binaries
    cfg : MfccConfig
        Extraction settings
    normalize : bool
        Apply per-utterance CMVN (default=True)

    Returns
    -------
    new_manifest : CorpusManifest
        Copy of the manifest with `feature_path` pointing at the new files

    Raises
    ------
    ValueError
        If an utterance lacks audio

    """
    os.makedirs(out_dir, exist_ok=True)
    utterances = list()
    for utt in manifest.utterances:
        if utt.audio_path is None:
            raise ValueError('utterance {:} has no audio_path'.format(utt.id))

        seq = wav_to_frames(utt.audio_path, cfg, utterance_id=utt.id)
        if normalize:
            seq = cmvn(seq)

        fname = os.path.join(out_dir, '{:s}.feat'.format(utt.id))
        corpus.write_features(seq, fname)
        utterances.append(dataclasses.replace(utt, feature_path=fname))

    logger.info('wrote features for {:d} utterances to {:}'.format(
        len(utterances), out_dir))
    return dataclasses.replace(manifest, frame_rate_hz=1.0 / cfg.hop_s,
                               utterances=tuple(utterances))
