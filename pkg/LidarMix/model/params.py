from .config import ModelConfig
from ..ingest.point_cloud import FEATURE_COUNT
from ..tensor.tensor import Tensor
from ..util.errors import ShapeError

from collections import OrderedDict
import logging

import numpy as np


def _norm(prefix: str, channels: int) -> list:
    return [(prefix + '.gamma', (channels,)), (prefix + '.beta', (channels,))]


def _conv(prefix: str, weight_shape: tuple) -> list:
    return [(prefix + '.weight', weight_shape),
            (prefix + '.bias', (weight_shape[0],))]


def parameterShapes(config: ModelConfig) -> OrderedDict:
    """Name and shape of every learnable parameter, in initialization order.

    Arguments:
        config {ModelConfig} -- Model configuration.

    Returns:
        OrderedDict -- Parameter name -> shape.
    """

    f = config.features
    k = config.kernel_size
    hidden = config.neighbor_hidden

    shapes = []
    shapes += _conv('embed.stem', (f, FEATURE_COUNT))
    shapes += _norm('embed.neighbor.bn', FEATURE_COUNT)
    shapes += _conv('embed.neighbor.conv1', (hidden, FEATURE_COUNT))
    shapes += _conv('embed.neighbor.conv2', (f, hidden))
    shapes += _conv('embed.fuse', (f, 2 * f))

    for layer in range(config.layers):
        spatial = 'layers.{0}.spatial'.format(layer)
        shapes += _norm(spatial + '.bn', f)
        shapes += _conv(spatial + '.dw1', (f, k, k))
        shapes += _conv(spatial + '.dw2', (f, k, k))
        shapes += _conv(spatial + '.proj', (f, f // config.groups))

        channel = 'layers.{0}.channel'.format(layer)
        shapes += _norm(channel + '.bn', f)
        shapes += _conv(channel + '.conv', (f, f))
        shapes += _conv(channel + '.dw', (f,))

    shapes += _conv('head', (config.classes, f))
    return OrderedDict(shapes)


def normLayers(config: ModelConfig) -> list:
    """Prefixes of every batch-norm layer, each owning running statistics.
    """

    names = ['embed.neighbor.bn']
    for layer in range(config.layers):
        names.append('layers.{0}.spatial.bn'.format(layer))
        names.append('layers.{0}.channel.bn'.format(layer))
    return names


def parameterCount(config: ModelConfig) -> int:
    return int(sum(np.prod(shape) for shape in
                   parameterShapes(config).values()))


def _fanIn(shape: tuple) -> int:
    # Depthwise kernels see one input channel; pointwise see all columns
    if len(shape) == 1:
        return 1
    return int(np.prod(shape[1:]))


class ModelParams:
    def __init__(self, config: ModelConfig, tensors: OrderedDict,
                 buffers: OrderedDict):
        """Learnable weights of the embedding, the backbone layers and the
        head, keyed by dotted names (`layers.3.spatial.dw1.weight`), plus the
        running statistics of every batch-norm layer.

        Arguments:
            config {ModelConfig} -- Configuration the shapes follow.
            tensors {OrderedDict} -- Name -> Tensor.
            buffers {OrderedDict} -- Name -> np.ndarray running statistics.

        Raises:
            ShapeError -- Raised when names or shapes disagree with the
                configuration.
        """

        self.config = config
        self.tensors = tensors
        self.buffers = buffers

        expected = parameterShapes(config)
        if list(expected) != list(tensors):
            missing = sorted(set(expected) - set(tensors))
            extra = sorted(set(tensors) - set(expected))
            logging.error('Parameter names disagree with the configuration')
            raise ShapeError('Parameter names disagree with the '
                             'configuration: missing {0}, unexpected {1}'
                             .format(missing, extra))
        for name, shape in expected.items():
            if tensors[name].shape != tuple(shape):
                raise ShapeError('Parameter {0} has shape {1}, expected {2}'
                                 .format(name, tensors[name].shape, shape))

    def __getitem__(self, name: str) -> Tensor:
        return self.tensors[name]

    def __iter__(self):
        return iter(self.tensors.items())

    def __len__(self) -> int:
        return len(self.tensors)

    @property
    def dtype(self):
        return next(iter(self.tensors.values())).dtype

    def runningStats(self, prefix: str) -> tuple:
        return (self.buffers[prefix + '.running_mean'],
                self.buffers[prefix + '.running_var'])

    def count(self) -> int:
        return int(sum(t.data.size for t in self.tensors.values()))

    def zeroGrad(self):
        for tensor in self.tensors.values():
            tensor.zeroGrad()

    def copy(self) -> 'ModelParams':
        """Deep copy of every parameter and buffer.
        """

        tensors = OrderedDict(
            (name, Tensor(t.data.copy(), requires_grad=t.requires_grad))
            for name, t in self.tensors.items())
        buffers = OrderedDict((name, b.copy())
                              for name, b in self.buffers.items())
        return ModelParams(self.config, tensors, buffers)

    def astype(self, dtype) -> 'ModelParams':
        tensors = OrderedDict(
            (name, Tensor(t.data, requires_grad=t.requires_grad, dtype=dtype))
            for name, t in self.tensors.items())
        buffers = OrderedDict((name, b.astype(dtype))
                              for name, b in self.buffers.items())
        return ModelParams(self.config, tensors, buffers)


def initBuffers(config: ModelConfig, dtype=np.float64) -> OrderedDict:
    """Identity running statistics (mean 0, variance 1) of every batch-norm
    layer.
    """

    buffers = OrderedDict()
    shapes = parameterShapes(config)
    for prefix in normLayers(config):
        channels = shapes[prefix + '.gamma'][0]
        buffers[prefix + '.running_mean'] = np.zeros(channels, dtype=dtype)
        buffers[prefix + '.running_var'] = np.ones(channels, dtype=dtype)
    return buffers


def initParams(config: ModelConfig, rng_seed: int=0,
               dtype=np.float64) -> ModelParams:
    """Function to initialize every parameter: convolution weights and biases
    uniform in +-1/sqrt(fan_in), batch-norm gamma 1 and beta 0. Parameters
    are drawn in name order from one generator, so a seed always gives the
    same parameters.

    Arguments:
        config {ModelConfig} -- Model configuration.

    Keyword Arguments:
        rng_seed {int} -- Seed (default: {0}).
        dtype -- Parameter dtype (default: {np.float64}).

    Returns:
        ModelParams -- Initialized parameters.
    """

    rng = np.random.default_rng(rng_seed)
    shapes = parameterShapes(config)

    tensors = OrderedDict()
    fan_in = None
    for name, shape in shapes.items():
        if name.endswith('.gamma'):
            data = np.ones(shape)
        elif name.endswith('.beta'):
            data = np.zeros(shape)
        else:
            if name.endswith('.weight'):
                fan_in = _fanIn(shape)
            bound = 1.0 / np.sqrt(fan_in)
            data = rng.uniform(-bound, bound, size=shape)
        tensors[name] = Tensor(data, requires_grad=True, dtype=dtype)

    logging.info('Initialized {0} parameters ({1} tensors) for model {2}'
                 .format(parameterCount(config), len(tensors), config.name))
    return ModelParams(config, tensors, initBuffers(config, dtype))
