#!/usr/bin/env python
# -*- coding: utf-8 -*-
# Full license can be found in LICENSE
# ----------------------------------------------------------------------------
"""Phone-loop HMMs for Bayesian acoustic unit discovery.

Each unit is a left-to-right HMM whose states emit mixtures of diagonal
Gaussians.  The phone loop enters a unit at its first state with the unit
weight, and leaves it through the forward transition of its last state.  An
utterance must end by leaving the last state of a unit.

Variational Bayes keeps Dirichlet posteriors over the unit weights,
transitions and mixture weights, and Normal-Gamma posteriors over each
Gaussian mean and precision.  In expected mode, forward-backward and Viterbi
work with the expected log-parameters under these posteriors.

"""

import dataclasses
from typing import Dict, Optional, Tuple

import numpy as np
from scipy import special

from uwsPipe import logger
from uwsPipe.discretizers.methods import general
from uwsPipe.utils import corpus

LOG_2PI = np.log(2.0 * np.pi)


@dataclasses.dataclass(frozen=True, eq=False)
class UnitHmm(object):
    """Left-to-right HMM of a single acoustic unit.

    Parameters
    ----------
    trans : np.ndarray
        S x 2 [self-loop, forward] probabilities; the forward transition of
        the last state leaves the unit
    weights : np.ndarray
        S x C mixture weights
    means : np.ndarray
        S x C x D Gaussian means
    variances : np.ndarray
        S x C x D diagonal variances

    """

    trans: np.ndarray
    weights: np.ndarray
    means: np.ndarray
    variances: np.ndarray

    def __post_init__(self):
        """Coerce the arrays and check the HMM invariants."""
        for name in ['trans', 'weights', 'means', 'variances']:
            object.__setattr__(self, name, np.array(getattr(self, name),
                                                    dtype=np.float64))

        n_states, n_comp, dim = self.means.shape
        if self.trans.shape != (n_states, 2) \
                or self.weights.shape != (n_states, n_comp) \
                or self.variances.shape != self.means.shape:
            raise ValueError('inconsistent unit HMM shapes')
        if np.any(self.trans < 0.0) \
                or np.any(np.abs(self.trans.sum(axis=1) - 1.0) > 1.0e-9):
            raise ValueError('transition rows must sum to 1')
        if np.any(self.weights < 0.0) \
                or np.any(np.abs(self.weights.sum(axis=1) - 1.0) > 1.0e-9):
            raise ValueError('mixture weights must lie on the simplex')
        if not np.all(self.variances > 0.0) \
                or not np.all(np.isfinite(self.means)):
            raise ValueError('variances must be positive and means finite')
        return

    @property
    def n_states(self):
        """Number of states, S."""
        return self.means.shape[0]

    @property
    def n_components(self):
        """Gaussians per state, C."""
        return self.means.shape[1]

    @property
    def dim(self):
        """Feature dimension, D."""
        return self.means.shape[2]


@dataclasses.dataclass(frozen=True, eq=False)
class VbParams(object):
    """Dirichlet and Normal-Gamma parameters of a phone loop.

    Parameters
    ----------
    pi : np.ndarray
        U Dirichlet concentrations of the unit weights
    trans : np.ndarray
        U x S x 2 Dirichlet concentrations of the transitions
    weights : np.ndarray
        U x S x C Dirichlet concentrations of the mixture weights
    mean : np.ndarray
        U x S x C x D Normal-Gamma means
    kappa : np.ndarray
        U x S x C Normal-Gamma mean counts
    shape : np.ndarray
        U x S x C x D Gamma shapes of the precisions
    rate : np.ndarray
        U x S x C x D Gamma rates of the precisions

    """

    pi: np.ndarray
    trans: np.ndarray
    weights: np.ndarray
    mean: np.ndarray
    kappa: np.ndarray
    shape: np.ndarray
    rate: np.ndarray

    def arrays(self):
        """Collect the parameter arrays by name."""
        return {field.name: getattr(self, field.name)
                for field in dataclasses.fields(self)}


@dataclasses.dataclass(frozen=True, eq=False)
class PhoneLoop(object):
    """A loop over unit HMMs.

    Parameters
    ----------
    units : tuple
        UnitHmm objects sharing S, C and D
    pi : np.ndarray
        Unit weights on the simplex
    silence_unit : int or NoneType
        Index of the dedicated silence unit (default=None)
    posterior : VbParams or NoneType
        Variational posterior the point parameters were taken from, needed
        for expected-mode inference (default=None)

    """

    units: Tuple[UnitHmm, ...]
    pi: np.ndarray
    silence_unit: Optional[int] = None
    posterior: Optional[VbParams] = None

    def __post_init__(self):
        """Check the loop invariants."""
        object.__setattr__(self, 'units', tuple(self.units))
        object.__setattr__(self, 'pi', np.array(self.pi, dtype=np.float64))
        if len(self.units) < 1:
            raise ValueError('a phone loop needs at least one unit')
        if self.pi.shape != (len(self.units),) or np.any(self.pi < 0.0) \
                or abs(self.pi.sum() - 1.0) > 1.0e-9:
            raise ValueError('unit weights must lie on the simplex')
        if len(set([unit.means.shape for unit in self.units])) != 1:
            raise ValueError('all units must share states, components and '
                             'dimension')
        if self.silence_unit is not None \
                and not 0 <= self.silence_unit < len(self.units):
            raise ValueError('silence unit {:} out of range'.format(
                self.silence_unit))
        return

    @property
    def n_units(self):
        """Number of units, U."""
        return len(self.units)

    @property
    def n_states(self):
        """States per unit, S."""
        return self.units[0].n_states

    @property
    def dim(self):
        """Feature dimension, D."""
        return self.units[0].dim


@dataclasses.dataclass(frozen=True, eq=False)
class LogParams(object):
    """Log-domain parameters driving inference.

    Parameters
    ----------
    log_pi : np.ndarray
        U log unit weights
    log_trans : np.ndarray
        U x S x 2 log transitions
    mean : np.ndarray
        U x S x C x D Gaussian means
    prec : np.ndarray
        U x S x C x D Gaussian precisions
    const : np.ndarray
        U x S x C log weight plus normalization of each Gaussian

    """

    log_pi: np.ndarray
    log_trans: np.ndarray
    mean: np.ndarray
    prec: np.ndarray
    const: np.ndarray


@dataclasses.dataclass(frozen=True, eq=False)
class Posteriors(object):
    """Output of `forward_backward`.

    Parameters
    ----------
    state_posteriors : np.ndarray
        N x U x S state occupation probabilities
    unit_posteriors : np.ndarray
        N x U unit occupation probabilities
    component_posteriors : np.ndarray
        N x U x S x C Gaussian occupation probabilities
    transition_counts : np.ndarray
        U x S x 2 expected [self-loop, forward] transition counts
    unit_entries : np.ndarray
        U expected unit entries, the first frame included
    log_marginal : float
        Log marginal likelihood of the frames

    """

    state_posteriors: np.ndarray
    unit_posteriors: np.ndarray
    component_posteriors: np.ndarray
    transition_counts: np.ndarray
    unit_entries: np.ndarray
    log_marginal: float


def _safe_log(values):
    """Take logs, mapping zeros to -inf without warnings."""
    with np.errstate(divide='ignore'):
        return np.log(values)


def stack_units(units):
    """Stack unit HMM parameters along a leading unit axis.

    Parameters
    ----------
    units : iterable
        UnitHmm objects

    Returns
    -------
    trans, weights, means, variances : np.ndarray
        U x S x 2, U x S x C, U x S x C x D and U x S x C x D arrays

    """
    units = list(units)
    return (np.stack([unit.trans for unit in units]),
            np.stack([unit.weights for unit in units]),
            np.stack([unit.means for unit in units]),
            np.stack([unit.variances for unit in units]))


def point_log_params(loop):
    """Build log-domain parameters from point estimates.

    Parameters
    ----------
    loop : PhoneLoop
        Phone loop

    Returns
    -------
    lp : LogParams
        Log parameters

    """
    trans, weights, means, variances = stack_units(loop.units)
    const = _safe_log(weights) - 0.5 * np.sum(LOG_2PI + np.log(variances),
                                              axis=-1)
    return LogParams(_safe_log(loop.pi), _safe_log(trans), means,
                     1.0 / variances, const)


def expected_log_dirichlet(conc):
    """Expected log-probabilities under a Dirichlet, along the last axis."""
    return special.digamma(conc) - special.digamma(conc.sum(axis=-1,
                                                            keepdims=True))


def expected_log_params(post):
    """Build log-domain parameters from a variational posterior.

    Parameters
    ----------
    post : VbParams
        Variational posterior

    Returns
    -------
    lp : LogParams
        Expected log parameters; Gaussian terms use E[ln N(x | mu, lambda)]

    """
    const = expected_log_dirichlet(post.weights) + 0.5 * np.sum(
        special.digamma(post.shape) - np.log(post.rate) - LOG_2PI
        - 1.0 / post.kappa[..., None], axis=-1)
    return LogParams(expected_log_dirichlet(post.pi),
                     expected_log_dirichlet(post.trans), post.mean,
                     post.shape / post.rate, const)


def component_loglik(frames, lp):
    """Evaluate the log term of every Gaussian at every frame.

    Parameters
    ----------
    frames : np.ndarray
        N x D frames
    lp : LogParams
        Log parameters

    Returns
    -------
    comp_ll : np.ndarray
        N x U x S x C log weight plus log density

    """
    shape = lp.const.shape
    dim = lp.mean.shape[-1]
    prec = lp.prec.reshape((-1, dim))
    mean = lp.mean.reshape((-1, dim))

    quad = (frames**2) @ prec.T - 2.0 * frames @ (mean * prec).T \
        + np.sum(mean**2 * prec, axis=1)
    comp_ll = lp.const.reshape(-1) - 0.5 * quad
    return comp_ll.reshape((frames.shape[0],) + shape)


def _frames_of(features, dim):
    """Extract a frame matrix and check its dimension."""
    frames = np.asarray(getattr(features, 'frames', features),
                        dtype=np.float64)
    if frames.ndim != 2 or frames.shape[1] != dim:
        raise ValueError('frames of shape {:} do not match dimension {:d}'
                         .format(frames.shape, dim))
    return frames


def infer(frames, lp):
    """Run scaled forward-backward over the phone loop.

    Parameters
    ----------
    frames : np.ndarray
        N x D frames
    lp : LogParams
        Log parameters

    Returns
    -------
    post : Posteriors
        Frame posteriors, expected counts and log marginal

    Raises
    ------
    ValueError
        If a frame has no finite likelihood or no path explains the frames

    """
    comp_ll = component_loglik(frames, lp)
    frame_ll = special.logsumexp(comp_ll, axis=-1)
    n_frames, n_units, n_states = frame_ll.shape

    peak = frame_ll.reshape((n_frames, -1)).max(axis=1)
    if not np.all(np.isfinite(peak)):
        raise ValueError('degenerate model: frame {:d} has no finite '
                         'likelihood'.format(int(np.argmin(np.isfinite(
                             peak)))))
    emis = np.exp(frame_ll - peak[:, None, None])

    a_self = np.exp(lp.log_trans[:, :, 0])
    a_fwd = np.exp(lp.log_trans[:, :, 1])
    a_exit = a_fwd[:, -1]
    pi = np.exp(lp.log_pi)

    alpha = np.zeros(shape=frame_ll.shape)
    scale = np.zeros(n_frames)
    cur = np.zeros(shape=(n_units, n_states))
    cur[:, 0] = pi * emis[0, :, 0]
    for t in range(n_frames):
        if t > 0:
            prev = alpha[t - 1]
            cur = prev * a_self
            cur[:, 1:] += prev[:, :-1] * a_fwd[:, :-1]
            cur[:, 0] += pi * np.dot(prev[:, -1], a_exit)
            cur *= emis[t]
        scale[t] = cur.sum()
        if not scale[t] > 0.0:
            raise ValueError('degenerate model: no path reaches frame '
                             '{:d}'.format(t))
        alpha[t] = cur / scale[t]

    final = alpha[-1, :, -1] * a_exit
    final_sum = final.sum()
    if not final_sum > 0.0:
        raise ValueError('degenerate model: no path ends a unit at the last '
                         'frame')
    log_marginal = float(np.sum(np.log(scale)) + np.sum(peak)
                         + np.log(final_sum))

    beta = np.zeros(shape=frame_ll.shape)
    beta[-1, :, -1] = a_exit / final_sum
    for t in range(n_frames - 2, -1, -1):
        nxt = emis[t + 1] * beta[t + 1]
        cur = a_self * nxt
        cur[:, :-1] += a_fwd[:, :-1] * nxt[:, 1:]
        cur[:, -1] += a_exit * np.dot(pi, nxt[:, 0])
        beta[t] = cur / scale[t + 1]

    gamma = alpha * beta
    gamma /= gamma.sum(axis=(1, 2), keepdims=True)

    # Expected transitions, from each frame to the next
    counts = np.zeros(shape=(n_units, n_states, 2))
    entries = gamma[0, :, 0].copy()
    counts[:, -1, 1] = final / final_sum
    if n_frames > 1:
        nb = emis[1:] * beta[1:] / scale[1:, None, None]
        counts[:, :, 0] = np.sum(alpha[:-1] * nb, axis=0) * a_self
        counts[:, :-1, 1] = np.sum(alpha[:-1, :, :-1] * nb[:, :, 1:],
                                   axis=0) * a_fwd[:, :-1]
        enter = nb[:, :, 0] @ pi
        counts[:, -1, 1] += np.sum(alpha[:-1, :, -1] * enter[:, None],
                                   axis=0) * a_exit
        leave = alpha[:-1, :, -1] @ a_exit
        entries += np.sum(leave[:, None] * nb[:, :, 0], axis=0) * pi

    comp_post = gamma[..., None] * special.softmax(comp_ll, axis=-1)

    return Posteriors(gamma, gamma.sum(axis=2), comp_post, counts, entries,
                      log_marginal)


def model_log_params(model, expected=False):
    """Select point or expected log parameters of a phone loop.

    Parameters
    ----------
    model : PhoneLoop
        Phone loop
    expected : bool
        Use expected log parameters under the model posterior
        (default=False)

    Returns
    -------
    lp : LogParams
        Log parameters

    Raises
    ------
    ValueError
        If expected mode is requested for a loop without posterior

    """
    if expected:
        if model.posterior is None:
            raise ValueError('expected mode needs a variational posterior')
        return expected_log_params(model.posterior)
    return point_log_params(model)


def forward_backward(features, model, expected=False):
    """Compute frame posteriors over the phone loop.

    Parameters
    ----------
    features : FrameSequence or np.ndarray
        Frames of one utterance
    model : PhoneLoop
        Phone loop
    expected : bool
        Use E_q[ln p(x | eta)] in place of point log-likelihoods
        (default=False)

    Returns
    -------
    post : Posteriors
        Per-frame state, unit and Gaussian posteriors, expected transition
        counts and the log marginal

    Raises
    ------
    ValueError
        For a degenerate model

    """
    return infer(_frames_of(features, model.dim),
                 model_log_params(model, expected=expected))


def best_path(frames, lp):
    """Find the most likely state path through the phone loop.

    Parameters
    ----------
    frames : np.ndarray
        N x D frames
    lp : LogParams
        Log parameters

    Returns
    -------
    units : np.ndarray
        Unit index per frame
    states : np.ndarray
        State index per frame
    log_prob : float
        Log probability of the path

    Raises
    ------
    ValueError
        If no path explains the frames

    Note
    ----
    Ties go to the self-loop, then the forward move, then a unit entry; the
    unit left before an entry is the lowest-index best one.

    """
    frame_ll = special.logsumexp(component_loglik(frames, lp), axis=-1)
    n_frames, n_units, n_states = frame_ll.shape

    log_self = lp.log_trans[:, :, 0]
    log_fwd = lp.log_trans[:, :, 1]
    log_exit = log_fwd[:, -1]

    delta = np.full((n_units, n_states), -np.inf)
    delta[:, 0] = lp.log_pi + frame_ll[0, :, 0]
    back = np.zeros(shape=frame_ll.shape, dtype=np.int8)
    exit_src = np.zeros(n_frames, dtype=int)

    for t in range(1, n_frames):
        best = delta + log_self
        code = np.zeros(shape=best.shape, dtype=np.int8)

        fwd = np.full(best.shape, -np.inf)
        fwd[:, 1:] = delta[:, :-1] + log_fwd[:, :-1]
        better = fwd > best
        best[better] = fwd[better]
        code[better] = 1

        leave = delta[:, -1] + log_exit
        exit_src[t] = int(np.argmax(leave))
        entry = np.full(best.shape, -np.inf)
        entry[:, 0] = leave[exit_src[t]] + lp.log_pi
        better = entry > best
        best[better] = entry[better]
        code[better] = 2

        delta = best + frame_ll[t]
        back[t] = code

    final = delta[:, -1] + log_exit
    unit = int(np.argmax(final))
    if not np.isfinite(final[unit]):
        raise ValueError('degenerate model: no path explains the frames')

    units = np.zeros(n_frames, dtype=int)
    states = np.zeros(n_frames, dtype=int)
    state = n_states - 1
    for t in range(n_frames - 1, -1, -1):
        units[t] = unit
        states[t] = state
        if t == 0:
            break
        if back[t, unit, state] == 1:
            state -= 1
        elif back[t, unit, state] == 2:
            unit = exit_src[t]
            state = n_states - 1

    return units, states, float(final.max())


def viterbi_decode(features, model, hop_s=None, expected=None):
    """Decode an utterance into a RAW unit sequence.

    Parameters
    ----------
    features : FrameSequence
        Frames of one utterance
    model : PhoneLoop
        Phone loop
    hop_s : float or NoneType
        Frame hop in seconds, from `features` if None (default=None)
    expected : bool or NoneType
        Use expected log-likelihoods; if None, whenever the model holds a
        posterior (default=None)

    Returns
    -------
    seq : UnitSequence
        Consecutive frames of a unit merged into one token; the silence unit
        is labelled as silence

    """
    if expected is None:
        expected = model.posterior is not None
    if hop_s is None:
        hop_s = features.hop_s

    path, _, _ = best_path(_frames_of(features, model.dim),
                           model_log_params(model, expected=expected))
    return general.labels_to_units(path, hop_s, features.utterance_id,
                                   silence_unit=model.silence_unit)


# ----------------------------------------------------------------------------
# Variational Bayes training


@dataclasses.dataclass(frozen=True)
class AudHyperParams(object):
    """Model sizes, priors and initialization of the phone-loop trainers.

    Parameters
    ----------
    n_states : int
        States per unit (default=3)
    n_components : int
        Gaussians per state (default=4)
    unit_concentration : float
        Dirichlet concentration per unit weight (default=1.0)
    trans_concentration : float
        Dirichlet concentration per transition (default=1.0)
    weight_concentration : float
        Dirichlet concentration per mixture weight (default=1.0)
    mean_count : float
        Prior pseudo-count of the Gaussian means (default=1.0)
    prec_shape : float
        Gamma shape of the precision prior (default=1.0)
    prec_scale : float
        Prior expected variance as a fraction of the data variance
        (default=1.0)

    """

    n_states: int = 3
    n_components: int = 4
    unit_concentration: float = 1.0
    trans_concentration: float = 1.0
    weight_concentration: float = 1.0
    mean_count: float = 1.0
    prec_shape: float = 1.0
    prec_scale: float = 1.0

    def __post_init__(self):
        """Check the hyperparameters."""
        if self.n_states < 1 or self.n_components < 1:
            raise ValueError('n_states and n_components must be positive')
        if min(self.unit_concentration, self.trans_concentration,
               self.weight_concentration, self.mean_count, self.prec_shape,
               self.prec_scale) <= 0.0:
            raise ValueError('prior parameters must be positive')
        return


@dataclasses.dataclass(eq=False)
class VbState(object):
    """Variational state of a phone-loop trainer.

    Parameters
    ----------
    prior : VbParams
        Prior parameters
    posterior : VbParams
        Current posterior parameters
    elbo : list
        Lower bound after every E-step, the initial one first
    responsibilities : dict
        N x U unit posteriors of the last E-step, keyed by utterance id

    """

    prior: VbParams
    posterior: VbParams
    elbo: list = dataclasses.field(default_factory=list)
    responsibilities: Dict[str, np.ndarray] = dataclasses.field(
        default_factory=dict)


@dataclasses.dataclass(eq=False)
class SufficientStats(object):
    """Expected counts accumulated over a corpus.

    Parameters
    ----------
    entries : np.ndarray
        U unit entries
    trans : np.ndarray
        U x S x 2 transitions
    occupancy : np.ndarray
        U x S x C Gaussian occupancies
    sum_x : np.ndarray
        U x S x C x D first-order sums
    sum_xx : np.ndarray
        U x S x C x D second-order sums
    log_marginal : float
        Summed log marginals
    responsibilities : dict
        N x U unit posteriors keyed by utterance id

    """

    entries: np.ndarray
    trans: np.ndarray
    occupancy: np.ndarray
    sum_x: np.ndarray
    sum_xx: np.ndarray
    log_marginal: float = 0.0
    responsibilities: Dict[str, np.ndarray] = dataclasses.field(
        default_factory=dict)

    def is_finite(self):
        """Test every accumulated value for finiteness."""
        return all([np.all(np.isfinite(val)) for val in
                    [self.entries, self.trans, self.occupancy, self.sum_x,
                     self.sum_xx, self.log_marginal]])


def accumulate_stats(features, lp):
    """Run the E-step over a corpus.

    Parameters
    ----------
    features : dict
        FrameSequence objects keyed by utterance id
    lp : LogParams
        Log parameters

    Returns
    -------
    stats : SufficientStats
        Counts summed in utterance order

    """
    n_units, n_states, n_comp, dim = lp.mean.shape
    stats = SufficientStats(np.zeros(n_units),
                            np.zeros((n_units, n_states, 2)),
                            np.zeros((n_units, n_states, n_comp)),
                            np.zeros((n_units, n_states, n_comp, dim)),
                            np.zeros((n_units, n_states, n_comp, dim)))

    for uid, seq in features.items():
        post = infer(seq.frames, lp)
        resp = post.component_posteriors
        stats.entries += post.unit_entries
        stats.trans += post.transition_counts
        stats.occupancy += resp.sum(axis=0)
        stats.sum_x += np.einsum('tusc,td->uscd', resp, seq.frames)
        stats.sum_xx += np.einsum('tusc,td->uscd', resp, seq.frames**2)
        stats.log_marginal += post.log_marginal
        stats.responsibilities[uid] = post.unit_posteriors

    return stats


def kl_dirichlet(post, prior):
    """KL divergence between Dirichlets along the last axis, summed."""
    post_sum = post.sum(axis=-1)
    prior_sum = prior.sum(axis=-1)
    kl = special.gammaln(post_sum) - special.gammaln(post).sum(axis=-1) \
        - special.gammaln(prior_sum) + special.gammaln(prior).sum(axis=-1) \
        + np.sum((post - prior) * expected_log_dirichlet(post), axis=-1)
    return float(np.sum(kl))


def kl_normal_gamma(post, prior):
    """KL divergence between the Normal-Gamma posteriors and priors, summed.

    Parameters
    ----------
    post : VbParams
        Posterior parameters
    prior : VbParams
        Prior parameters

    Returns
    -------
    kl : float
        Sum over every Gaussian and dimension

    """
    kl_gamma = (post.shape - prior.shape) * special.digamma(post.shape) \
        - special.gammaln(post.shape) + special.gammaln(prior.shape) \
        + prior.shape * (np.log(post.rate) - np.log(prior.rate)) \
        + post.shape * (prior.rate - post.rate) / post.rate

    ratio = (prior.kappa / post.kappa)[..., None]
    kl_mean = 0.5 * (ratio - 1.0 - np.log(ratio) + prior.kappa[..., None]
                     * post.shape / post.rate * (post.mean - prior.mean)**2)
    return float(np.sum(kl_gamma + kl_mean))


def vb_divergence(post, prior):
    """Total KL divergence of a phone-loop posterior from its prior."""
    return kl_dirichlet(post.pi, prior.pi) \
        + kl_dirichlet(post.trans, prior.trans) \
        + kl_dirichlet(post.weights, prior.weights) \
        + kl_normal_gamma(post, prior)


def make_prior(frames, n_units, hyper):
    """Build the data-driven prior of a phone loop.

    Parameters
    ----------
    frames : np.ndarray
        All training frames
    n_units : int
        Number of units
    hyper : AudHyperParams
        Hyperparameters

    Returns
    -------
    prior : VbParams
        Prior centred on the data mean, with expected variance equal to
        `hyper.prec_scale` times the data variance

    """
    n_states = hyper.n_states
    n_comp = hyper.n_components
    dim = frames.shape[1]
    gshape = (n_units, n_states, n_comp, dim)

    variance = np.maximum(frames.var(axis=0), 1.0e-6)
    return VbParams(
        pi=np.full(n_units, hyper.unit_concentration),
        trans=np.full((n_units, n_states, 2), hyper.trans_concentration),
        weights=np.full((n_units, n_states, n_comp),
                        hyper.weight_concentration),
        mean=np.broadcast_to(frames.mean(axis=0), gshape).copy(),
        kappa=np.full((n_units, n_states, n_comp), hyper.mean_count),
        shape=np.full(gshape, hyper.prec_shape),
        rate=np.broadcast_to(hyper.prec_shape * hyper.prec_scale * variance,
                             gshape).copy())


def init_posterior(prior, features, rng, silence=None, silence_unit=None):
    """Start the posterior from the prior with means on random frames.

    Parameters
    ----------
    prior : VbParams
        Prior parameters
    features : dict
        FrameSequence objects keyed by utterance id
    rng : np.random.Generator
        Random generator
    silence : dict or NoneType
        Boolean silence masks keyed by utterance id (default=None)
    silence_unit : int or NoneType
        Unit started on silence frames (default=None)

    Returns
    -------
    post : VbParams
        Initial posterior

    """
    frames = general.stack_frames(features)
    mask = np.zeros(frames.shape[0], dtype=bool)
    if silence:
        mask = np.concatenate([silence.get(uid, np.zeros(seq.n_frames,
                                                         dtype=bool))
                               for uid, seq in features.items()])

    speech = frames[~mask] if np.any(~mask) else frames
    n_units, n_states, n_comp, dim = prior.mean.shape
    pick = rng.integers(speech.shape[0], size=(n_units, n_states, n_comp))
    mean = speech[pick]

    if silence_unit is not None and np.any(mask):
        sil = frames[mask]
        mean[silence_unit] = sil[rng.integers(sil.shape[0],
                                              size=(n_states, n_comp))]

    return dataclasses.replace(prior, mean=mean)


def update_posterior(prior, stats):
    """Conjugate update of every posterior factor.

    Parameters
    ----------
    prior : VbParams
        Prior parameters
    stats : SufficientStats
        Expected counts

    Returns
    -------
    post : VbParams
        Updated posterior

    """
    kappa = prior.kappa + stats.occupancy
    mean = (prior.kappa[..., None] * prior.mean + stats.sum_x) \
        / kappa[..., None]
    shape = prior.shape + 0.5 * stats.occupancy[..., None]
    rate = prior.rate + 0.5 * (stats.sum_xx + prior.kappa[..., None]
                               * prior.mean**2 - kappa[..., None] * mean**2)
    rate = np.maximum(rate, 1.0e-6 * prior.rate)

    return VbParams(pi=prior.pi + stats.entries,
                    trans=prior.trans + stats.trans,
                    weights=prior.weights + stats.occupancy,
                    mean=mean, kappa=kappa, shape=shape, rate=rate)


def loop_from_posterior(post, silence_unit=None):
    """Take point estimates of a phone loop from its posterior.

    Parameters
    ----------
    post : VbParams
        Variational posterior
    silence_unit : int or NoneType
        Index of the silence unit (default=None)

    Returns
    -------
    loop : PhoneLoop
        Posterior-mean weights and means, inverse expected precisions as
        variances, with the posterior attached

    """
    trans = post.trans / post.trans.sum(axis=-1, keepdims=True)
    weights = post.weights / post.weights.sum(axis=-1, keepdims=True)
    variances = post.rate / post.shape

    units = [UnitHmm(trans[u], weights[u], post.mean[u], variances[u])
             for u in range(post.pi.shape[0])]
    return PhoneLoop(units, post.pi / post.pi.sum(),
                     silence_unit=silence_unit, posterior=post)


def check_elbo(trace, name):
    """Warn when the last lower bound fell below the previous one."""
    if len(trace) > 1 and trace[-1] < trace[-2] - 1.0e-6 * abs(trace[-2]):
        logger.warning('{:} lower bound decreased from {:.10g} to {:.10g}'
                       .format(name, trace[-2], trace[-1]))
    return


def resolve_silence_unit(silence, silence_unit):
    """Reserve unit 0 for silence only when silence frames are annotated."""
    if silence_unit is None and silence \
            and any([np.any(mask) for mask in silence.values()]):
        return 0
    return silence_unit


def train_hmm(features, n_units=100, hyper=None, n_iters=10, seed=0,
              silence=None, silence_unit=None):
    """Train a phone loop by variational Bayes.

    Parameters
    ----------
    features : dict or iterable
        FrameSequence objects
    n_units : int
        Truncation of the unit inventory, U (default=100)
    hyper : AudHyperParams or NoneType
        Hyperparameters, defaults if None (default=None)
    n_iters : int
        Number of E-step and M-step iterations (default=10)
    seed : int
        Random seed (default=0)
    silence : dict or NoneType
        Boolean silence masks keyed by utterance id (default=None)
    silence_unit : int or NoneType
        Unit reserved for silence; unit 0 when `silence` flags any frame and
        None is given (default=None)

    Returns
    -------
    loop : PhoneLoop
        Trained phone loop with its posterior
    state : VbState
        Prior, posterior, lower bound trace of n_iters + 1 values and the
        final unit responsibilities

    Raises
    ------
    FloatingPointError
        If the statistics stop being finite

    """
    if hyper is None:
        hyper = AudHyperParams()
    features = general.as_feature_dict(features)
    silence_unit = resolve_silence_unit(silence, silence_unit)

    rng = np.random.default_rng(seed)
    prior = make_prior(general.stack_frames(features), n_units, hyper)
    state = VbState(prior, init_posterior(prior, features, rng,
                                          silence=silence,
                                          silence_unit=silence_unit))

    for iteration in range(n_iters + 1):
        stats = accumulate_stats(features, expected_log_params(
            state.posterior))
        if not stats.is_finite():
            raise FloatingPointError('NaN in AUD statistics at iteration '
                                     '{:d}'.format(iteration))

        state.elbo.append(stats.log_marginal
                          - vb_divergence(state.posterior, prior))
        state.responsibilities = stats.responsibilities
        check_elbo(state.elbo, 'HMM')
        logger.info('HMM iteration {:d}: lower bound {:.6g}'.format(
            iteration, state.elbo[-1]))

        if iteration < n_iters:
            state.posterior = update_posterior(prior, stats)

    return loop_from_posterior(state.posterior, silence_unit), state


def train_unit_hmm(segments, hyper=None, n_iters=5, seed=0):
    """Train the HMM of one unit from its labelled segments.

    Parameters
    ----------
    segments : iterable
        Frame matrices, each covering one occurrence of the unit
    hyper : AudHyperParams or NoneType
        Hyperparameters, defaults if None (default=None)
    n_iters : int
        Training iterations (default=5)
    seed : int
        Random seed (default=0)

    Returns
    -------
    unit : UnitHmm
        Posterior point estimates of the unit

    Raises
    ------
    ValueError
        If no segment has at least one frame per state

    """
    if hyper is None:
        hyper = AudHyperParams()

    usable = [corpus.FrameSequence('seg{:d}'.format(i), seg)
              for i, seg in enumerate(segments)
              if np.asarray(seg).shape[0] >= hyper.n_states]
    if len(usable) == 0:
        raise ValueError('insufficient data: no segment has {:d} frames'
                         .format(hyper.n_states))

    loop, _ = train_hmm(usable, n_units=1, hyper=hyper, n_iters=n_iters,
                        seed=seed)
    return loop.units[0]


def save_phone_loop(loop, path, kind='hmm', arrays=None, attrs=None):
    """Write a phone-loop model file.

    Parameters
    ----------
    loop : PhoneLoop
        Model to write
    path : str
        Output file
    kind : str
        Model family, 'hmm', 'shmm' or 'hshmm' (default='hmm')
    arrays : dict or NoneType
        Extra arrays stored under 'extra/' (default=None)
    attrs : dict or NoneType
        Extra settings (default=None)

    """
    trans, weights, means, variances = stack_units(loop.units)
    out = {'pi': loop.pi, 'trans': trans, 'weights': weights, 'means': means,
           'variances': variances}
    if loop.posterior is not None:
        out.update({'posterior/' + key: val
                    for key, val in loop.posterior.arrays().items()})
    if arrays is not None:
        out.update({'extra/' + key: val for key, val in arrays.items()})

    settings = {'kind': kind, 'silence_unit': loop.silence_unit}
    if attrs is not None:
        settings.update(attrs)
    general.write_model_file(path, general.model_magic['aud'], out,
                             attrs=settings)
    return


def load_phone_loop(path):
    """Read a phone-loop model file.

    Parameters
    ----------
    path : str
        Model file

    Returns
    -------
    loop : PhoneLoop
        Stored phone loop
    extra : dict
        Extra arrays
    attrs : dict
        Stored settings, including 'kind'

    """
    arrays, attrs = general.read_model_file(path, general.model_magic['aud'])
    posterior = None
    if 'posterior/pi' in arrays:
        posterior = VbParams(**{field.name: arrays['posterior/' + field.name]
                                for field in dataclasses.fields(VbParams)})

    units = [UnitHmm(arrays['trans'][u], arrays['weights'][u],
                     arrays['means'][u], arrays['variances'][u])
             for u in range(arrays['pi'].shape[0])]
    loop = PhoneLoop(units, arrays['pi'], silence_unit=attrs['silence_unit'],
                     posterior=posterior)
    extra = {key[len('extra/'):]: val for key, val in arrays.items()
             if key.startswith('extra/')}
    return loop, extra, attrs


def load_loop_of_kind(kind, path):
    """Read a phone-loop model file and check its model family.

    Parameters
    ----------
    kind : str
        Expected model family
    path : str
        Model file

    Returns
    -------
    loop : PhoneLoop
        Stored phone loop

    Raises
    ------
    ValueError
        If the file holds another model family

    """
    loop, _, attrs = load_phone_loop(path)
    if attrs['kind'] != kind:
        raise ValueError('{:} holds a "{:}" model, not "{:}"'.format(
            path, attrs['kind'], kind))
    return loop
