from .optimizer import OptimState, TrainConfig, applyUpdate
from ..ingest.augment import augment
from ..ingest.preprocess import AugmentConfig
from ..model.config import ModelConfig
from ..model.network import PreparedCloud, forward, prepare
from ..model.params import ModelParams, initParams, normLayers
from ..tensor.ops import softmaxCrossEntropy
from ..tensor.tensor import Tape
from ..util.errors import TrainingError
from ..util.helpers import logLoopProgress

import logging

import numpy as np


def computeGradients(params: ModelParams, prepared: PreparedCloud,
                     mode: str='train', rng=None,
                     loss_scale: float=1.0) -> float:
    """Function running one forward and backward pass of the cross-entropy
    loss, leaving fresh gradients (scaled by `loss_scale`) on every
    parameter.

    Arguments:
        params {ModelParams} -- Parameters.
        prepared {PreparedCloud} -- Labeled forward inputs.

    Keyword Arguments:
        mode {str} -- Batch-norm mode (default: {'train'}).
        rng -- Neighbor-dropout generator or seed (default: {None}).
        loss_scale {float} -- Backward seed (default: {1.0}).

    Raises:
        TrainingError -- Raised when the loss is not finite.

    Returns:
        float -- Unscaled loss.
    """

    if prepared.labels is None:
        raise ValueError('Training needs a labeled cloud')

    params.zeroGrad()
    with Tape() as tape:
        logits = forward(prepared, params, mode=mode, rng=rng)
        loss = softmaxCrossEntropy(logits, prepared.labels,
                                   params.config.ignore_class)

    value = float(loss.data)
    if not np.isfinite(value):
        message = 'Non-finite loss {0}: max |logit| {1:.3e}, {2} points' \
            .format(value, float(np.max(np.abs(logits.data))),
                    prepared.n_points)
        logging.error(message)
        raise TrainingError(message)

    tape.backward(loss, loss_scale)
    return value


def trainStep(params: ModelParams, state: OptimState,
              prepared: PreparedCloud, rng=None) -> tuple:
    """Function performing one optimization step: forward, backward and an
    adaptive-moment update.

    Arguments:
        params {ModelParams} -- Parameters, updated in place.
        state {OptimState} -- Optimizer state, updated in place.
        prepared {PreparedCloud} -- Labeled forward inputs (augmentation is
            applied upstream).

    Keyword Arguments:
        rng -- Neighbor-dropout generator or seed (default: {None}).

    Raises:
        TrainingError -- Raised when the loss is not finite.

    Returns:
        tuple -- (params, state, loss).
    """

    try:
        loss = computeGradients(params, prepared, mode='train', rng=rng)
    except TrainingError:
        logging.error('Training halted at step {0} (lr {1:.3e})'
                      .format(state.step, state.learningRate()))
        raise
    applyUpdate(params, state)
    return params, state, loss


def calibrateNorms(params: ModelParams, prepared_clouds: list):
    """Function to recompute every batch-norm running statistic: each cloud
    gets one calibrate-mode pass (normalization by batch statistics), and
    the running statistics are set to the mean of the per-cloud batch
    statistics.

    Arguments:
        params {ModelParams} -- Parameters, running statistics updated in
            place.
        prepared_clouds {list} -- PreparedClouds.
    """

    if not prepared_clouds:
        return

    totals = {name: np.zeros_like(b) for name, b in params.buffers.items()}
    for prepared in prepared_clouds:
        forward(prepared, params, mode='calibrate')
        for name in totals:
            totals[name] += params.buffers[name]

    for name, total in totals.items():
        params.buffers[name][...] = total / len(prepared_clouds)

    logging.info('Calibrated {0} batch-norm layers over {1} clouds'
                 .format(len(normLayers(params.config)),
                         len(prepared_clouds)))


class Manager:
    def __init__(self, model_config: ModelConfig, clouds: list,
                 train_config: TrainConfig=None,
                 augment_config: AugmentConfig=None, params=None,
                 threads: int=None, dtype=np.float64):
        """Training harness over a small list of preprocessed labeled clouds.
        Steps cycle through the clouds in order; when augmentation is enabled
        each step re-prepares an augmented copy drawn from a per-step seed.

        Arguments:
            model_config {ModelConfig} -- Model configuration.
            clouds {list} -- Preprocessed labeled PointClouds.

        Keyword Arguments:
            train_config {TrainConfig} -- Optimizer settings (default:
                {None}, defaults).
            augment_config {AugmentConfig} -- Augmentations (default: {None},
                none).
            params {ModelParams} -- Starting parameters (default: {None},
                initialized from the train seed).
            threads {int} -- kNN threads (default: {None}, configured).
            dtype -- Parameter dtype (default: {np.float64}).
        """

        if not clouds:
            raise ValueError('Training needs at least one cloud')

        self.model_config = model_config
        self.clouds = clouds
        self.train_config = TrainConfig() if train_config is None \
            else train_config
        self.augment_config = AugmentConfig() if augment_config is None \
            else augment_config
        self.threads = threads
        self.dtype = dtype

        self.params = initParams(model_config, self.train_config.seed,
                                 dtype=dtype) if params is None else params
        self.state = OptimState(self.params, self.train_config)

        logging.info('Preparing {0} training clouds'.format(len(clouds)))
        self.prepared = [prepare(c, model_config, threads=threads,
                                 dtype=dtype) for c in clouds]
        self.losses = []

    def _batch(self, step: int) -> PreparedCloud:
        index = step % len(self.clouds)
        augmenting = self.augment_config.flip_x or \
            self.augment_config.flip_y or self.augment_config.rotate_z or \
            self.augment_config.scale
        if not augmenting:
            return self.prepared[index]

        cloud = augment(self.clouds[index], self.augment_config,
                        (self.train_config.seed, step))
        return prepare(cloud, self.model_config, threads=self.threads,
                       dtype=self.dtype)

    def start(self, calibrate: bool=True) -> ModelParams:
        """Function to run the configured number of steps, then recalibrate
        the batch-norm statistics on the un-augmented clouds.

        Keyword Arguments:
            calibrate {bool} -- Recalibrate batch-norm statistics after
                training (default: {True}).

        Raises:
            TrainingError -- Raised when the loss is not finite.

        Returns:
            ModelParams -- Trained parameters.
        """

        steps = self.train_config.steps
        logging.info('Starting training of model {0} for {1} steps on {2} '
                     'clouds'.format(self.model_config.name, steps,
                                     len(self.clouds)))

        last_check = 0
        for step in range(steps):
            rng = np.random.default_rng((self.train_config.seed, step))
            _, _, loss = trainStep(self.params, self.state,
                                   self._batch(step), rng=rng)
            self.losses.append(loss)
            last_check = logLoopProgress(step + 1, last_check, steps,
                                         'Training (loss {0:.4f})'
                                         .format(loss))

        if self.losses:
            logging.info('Training done: loss {0:.4f} -> {1:.4f}'
                         .format(self.losses[0], self.losses[-1]))

        if calibrate:
            calibrateNorms(self.params, self.prepared)
        return self.params
