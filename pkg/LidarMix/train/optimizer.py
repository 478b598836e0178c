from ..model.params import ModelParams
from ..util.errors import ConfigurationError

from collections import OrderedDict
import math

import attr
import numpy as np


def _nonNegative(instance, attribute, value):
    if value < 0:
        raise ConfigurationError('{0} must be >= 0, got {1}'
                                 .format(attribute.name, value))


def _betas(value) -> tuple:
    betas = tuple(float(b) for b in value)
    if len(betas) != 2 or not all(0.0 <= b < 1.0 for b in betas):
        raise ConfigurationError('betas must be two values in [0, 1), got '
                                 '{0}'.format(value))
    return betas


@attr.s(frozen=True)
class TrainConfig:
    """Optimizer and schedule settings: adaptive-moment updates with
    decoupled weight decay, learning rate cosine-decayed from `lr` to
    `lr_min` over `steps` steps.
    """

    lr = attr.ib(default=1e-3, converter=float, validator=_nonNegative)
    lr_min = attr.ib(default=0.0, converter=float, validator=_nonNegative)
    weight_decay = attr.ib(default=0.003, converter=float,
                           validator=_nonNegative)
    betas = attr.ib(default=(0.9, 0.999), converter=_betas)
    adam_eps = attr.ib(default=1e-8, converter=float)
    steps = attr.ib(default=500, converter=int, validator=_nonNegative)
    seed = attr.ib(default=0, converter=int)

    @classmethod
    def fromParameters(cls, parameters: dict, **overrides) -> 'TrainConfig':
        """Builds the configuration from a `train` (or `toy`) section,
        ignoring keys that are not optimizer settings.
        """

        known = {field.name for field in attr.fields(cls)}
        values = {k: v for k, v in parameters.items() if k in known}
        values.update({k: v for k, v in overrides.items() if v is not None})
        return cls(**values)


class OptimState:
    def __init__(self, params: ModelParams, config: TrainConfig):
        """First and second moment buffers mirroring every parameter, the
        step count, and the schedule settings.

        Arguments:
            params {ModelParams} -- Parameters being optimized.
            config {TrainConfig} -- Optimizer settings.
        """

        self.config = config
        self.step = 0
        self.first = OrderedDict((name, np.zeros_like(t.data))
                                 for name, t in params)
        self.second = OrderedDict((name, np.zeros_like(t.data))
                                  for name, t in params)

    def learningRate(self) -> float:
        """Cosine-decayed learning rate of the next step.
        """

        config = self.config
        if config.steps <= 1:
            return config.lr
        progress = min(self.step, config.steps - 1) / (config.steps - 1)
        return config.lr_min + 0.5 * (config.lr - config.lr_min) * \
            (1.0 + math.cos(math.pi * progress))


def applyUpdate(params: ModelParams, state: OptimState) -> float:
    """Function applying one adaptive-moment update with decoupled weight
    decay to every parameter, in place, from the accumulated gradients.
    Parameters without a gradient are treated as having a zero gradient.
    With a zero learning rate the parameters are left untouched.

    Arguments:
        params {ModelParams} -- Parameters with gradients.
        state {OptimState} -- Moment buffers, updated in place.

    Returns:
        float -- Learning rate used.
    """

    config = state.config
    lr = state.learningRate()
    beta1, beta2 = config.betas
    state.step += 1
    correction1 = 1.0 - beta1 ** state.step
    correction2 = 1.0 - beta2 ** state.step

    for name, tensor in params:
        grad = tensor.grad if tensor.grad is not None else \
            np.zeros_like(tensor.data)
        first = state.first[name]
        second = state.second[name]
        first *= beta1
        first += (1.0 - beta1) * grad
        second *= beta2
        second += (1.0 - beta2) * grad * grad

        if lr > 0.0:
            step = (first / correction1) / \
                (np.sqrt(second / correction2) + config.adam_eps)
            tensor.data -= (lr * (step + config.weight_decay * tensor.data)) \
                .astype(tensor.dtype)

    return lr
