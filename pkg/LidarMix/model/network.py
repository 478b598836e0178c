from .config import ModelConfig
from .params import ModelParams
from ..ingest.point_cloud import PointCloud
from ..projection.flatten import flatten, inflate
from ..projection.grid import CellAssignment, assign
from ..spatial.kdtree import KdTree, build, queryKnn
from ..tensor.ops import (activation, add, batchNorm, concat, conv1dDepthwise,
                          conv1dPointwise, conv2dDepthwise, gather,
                          maxOverAxis, reshape, softmax, sub)
from ..tensor.tensor import Tensor
from ..util.errors import ShapeError
from ..util.helpers import Stopwatch

import logging

import attr
import numpy as np


@attr.s(frozen=True, eq=False)
class PreparedCloud:
    """Everything a forward pass needs that does not depend on parameters:
    channel-first raw features [5, N], the neighbor ids [K, N] (slot 0 is the
    nearest) and one cell assignment per view in the cycle.
    """

    features = attr.ib()
    neighbors = attr.ib()
    assignments = attr.ib()
    labels = attr.ib(default=None)

    @property
    def n_points(self) -> int:
        return self.features.shape[1]

    def permuted(self, order: np.ndarray) -> 'PreparedCloud':
        """Prepared cloud of the permuted input whose point i is point
        `order[i]` here; neighbor ids are renamed accordingly.
        """

        inverse = np.empty_like(order)
        inverse[order] = np.arange(order.size)
        labels = None if self.labels is None else self.labels[order]
        return PreparedCloud(
            features=np.ascontiguousarray(self.features[:, order]),
            neighbors=np.ascontiguousarray(inverse[self.neighbors[:, order]]),
            assignments={view: a.permuted(order)
                         for view, a in self.assignments.items()},
            labels=labels)


@attr.s(frozen=True, eq=False)
class EmbeddingOutput:
    """Embedded point features Pe [F, N] and the neighbor branch P2 [F, N]
    kept for the head skip.
    """

    features = attr.ib()
    neighbor_embedding = attr.ib()


def prepare(cloud: PointCloud, config: ModelConfig, tree: KdTree=None,
            threads: int=None, dtype=np.float64) -> PreparedCloud:
    """Function computing the kNN ids and the per-view cell assignments of a
    preprocessed cloud.

    Arguments:
        cloud {PointCloud} -- Preprocessed cloud.
        config {ModelConfig} -- Model configuration.

    Keyword Arguments:
        tree {KdTree} -- Tree over the same cloud (default: {None}, built).
        threads {int} -- kNN threads (default: {None}, configured).
        dtype -- Feature dtype (default: {np.float64}).

    Raises:
        ValueError -- Raised when K exceeds the available neighbors.

    Returns:
        PreparedCloud -- Parameter-independent forward inputs.
    """

    if tree is None:
        tree = build(cloud, threads=threads)
    elif tree.n_points != len(cloud):
        raise ShapeError('Tree indexes {0} points, cloud has {1}'
                         .format(tree.n_points, len(cloud)))

    knn = queryKnn(tree, cloud, config.neighbors, threads=threads,
                   exclude_self=config.exclude_self)
    specs = config.gridSpecs()
    assignments = {view: assign(cloud, specs[view])
                   for view in sorted(set(config.cycle))}

    return PreparedCloud(
        features=np.ascontiguousarray(cloud.points.T, dtype=dtype),
        neighbors=np.ascontiguousarray(knn.indices.T),
        assignments=assignments, labels=cloud.labels)


def _norm(x: Tensor, params: ModelParams, prefix: str, mode: str) -> Tensor:
    running_mean, running_var = params.runningStats(prefix)
    return batchNorm(x, params[prefix + '.gamma'], params[prefix + '.beta'],
                     running_mean, running_var, mode=mode)


def _pointwise(x: Tensor, params: ModelParams, prefix: str,
               groups: int=1) -> Tensor:
    return conv1dPointwise(x, params[prefix + '.weight'],
                           params[prefix + '.bias'], groups=groups)


def _dropNeighbors(neighbors: np.ndarray, p: float, rng) -> np.ndarray:
    # Dropped slots fall back to the nearest neighbor, leaving the max intact
    # when every slot is dropped
    dropped = rng.random(neighbors.shape) < p
    dropped[0] = False
    return np.where(dropped, neighbors[0][None, :], neighbors)


def embed(prepared: PreparedCloud, params: ModelParams, mode: str='eval',
          rng=None) -> EmbeddingOutput:
    """Point cloud embedding. The raw features P0 [5, N] are mapped to P1 by a
    pointwise convolution; the stacked raw features of every point's K
    neighbors Pn [5, K, N] go through batch norm and two pointwise
    convolutions (5 -> hidden -> F) and a max over K, giving P2. The output
    is a pointwise convolution of concat(P1, P2).

    Arguments:
        prepared {PreparedCloud} -- Forward inputs.
        params {ModelParams} -- Parameters.

    Keyword Arguments:
        mode {str} -- Batch-norm mode (default: {'eval'}).
        rng -- Generator for neighbor dropout in train mode (default:
            {None}).

    Returns:
        EmbeddingOutput -- Pe and P2, both [F, N].
    """

    config = params.config
    n = prepared.n_points
    raw = Tensor(prepared.features.astype(params.dtype, copy=False))
    p1 = _pointwise(raw, params, 'embed.stem')

    neighbors = prepared.neighbors
    if mode == 'train' and config.neighbor_dropout_p > 0.0:
        rng = np.random.default_rng(rng)
        neighbors = _dropNeighbors(neighbors, config.neighbor_dropout_p, rng)
    k = neighbors.shape[0]

    stacked = gather(raw, neighbors)
    if config.relative_neighbors:
        centers = np.broadcast_to(np.arange(n), neighbors.shape)
        stacked = sub(stacked, gather(raw, centers))

    # Batch norm over the K * N neighbor slots jointly
    h = reshape(stacked, (raw.shape[0], k * n))
    h = _norm(h, params, 'embed.neighbor.bn', mode)
    h = _pointwise(h, params, 'embed.neighbor.conv1')
    h = activation(h, config.activation)
    h = _pointwise(h, params, 'embed.neighbor.conv2')
    p2 = maxOverAxis(reshape(h, (config.features, k, n)), axis=1)

    fused = _pointwise(concat([p1, p2], axis=0), params, 'embed.fuse')
    return EmbeddingOutput(features=fused, neighbor_embedding=p2)


def spatialMix(x: Tensor, cell_assignment: CellAssignment,
               params: ModelParams, layer: int, mode: str='eval') -> Tensor:
    """Spatial mixing through one view: batch norm, flatten onto the grid,
    two depthwise 2D convolutions separated by the activation, inflate back
    to the points, a (grouped) pointwise convolution, then the residual add.
    """

    config = params.config
    prefix = 'layers.{0}.spatial'.format(layer)

    h = _norm(x, params, prefix + '.bn', mode)
    h = flatten(h, cell_assignment)
    h = conv2dDepthwise(h, params[prefix + '.dw1.weight'],
                        params[prefix + '.dw1.bias'])
    h = activation(h, config.activation)
    h = conv2dDepthwise(h, params[prefix + '.dw2.weight'],
                        params[prefix + '.dw2.bias'])
    h = inflate(h, cell_assignment)
    h = _pointwise(h, params, prefix + '.proj', groups=config.groups)
    return add(x, h)


def channelMix(x: Tensor, params: ModelParams, layer: int,
               mode: str='eval') -> Tensor:
    """Per-point channel mixing: batch norm, pointwise convolution,
    activation, depthwise kernel-1 convolution, then the residual add.
    """

    prefix = 'layers.{0}.channel'.format(layer)

    h = _norm(x, params, prefix + '.bn', mode)
    h = _pointwise(h, params, prefix + '.conv')
    h = activation(h, params.config.activation)
    h = conv1dDepthwise(h, params[prefix + '.dw.weight'],
                        params[prefix + '.dw.bias'])
    return add(x, h)


def forward(prepared: PreparedCloud, params: ModelParams, mode: str='eval',
            rng=None, stopwatch: Stopwatch=None) -> Tensor:
    """Full network: embedding, then for every layer a spatial mix through
    the view `cycle[layer mod len(cycle)]` followed by a channel mix, then the
    optional skip from the neighbor branch and the pointwise head.

    Arguments:
        prepared {PreparedCloud} -- Forward inputs.
        params {ModelParams} -- Parameters.

    Keyword Arguments:
        mode {str} -- Batch-norm mode, `train`, `eval` or `calibrate`
            (default: {'eval'}).
        rng -- Neighbor-dropout generator or seed (default: {None}).
        stopwatch {Stopwatch} -- Collects embed / backbone / head timings
            (default: {None}).

    Returns:
        Tensor -- Logits [C, N].
    """

    config = params.config
    stopwatch = Stopwatch() if stopwatch is None else stopwatch

    with stopwatch.phase('embed'):
        embedding = embed(prepared, params, mode=mode, rng=rng)

    with stopwatch.phase('backbone'):
        x = embedding.features
        for layer in range(config.layers):
            view = config.layerView(layer)
            x = spatialMix(x, prepared.assignments[view], params, layer,
                           mode=mode)
            x = channelMix(x, params, layer, mode=mode)

    with stopwatch.phase('head'):
        if config.head_skip:
            x = add(x, embedding.neighbor_embedding)
        logits = _pointwise(x, params, 'head')

    logging.debug('Forward over {0} points: {1}'.format(
        prepared.n_points, ', '.join('{0} {1:.1f} ms'.format(k, v)
                                     for k, v in stopwatch.millis.items())))
    return logits


def predict(prepared: PreparedCloud, params: ModelParams,
            stopwatch: Stopwatch=None) -> tuple:
    """Eval-mode prediction.

    Returns:
        tuple -- (class ids [N], probabilities [C, N]).
    """

    logits = forward(prepared, params, mode='eval', stopwatch=stopwatch)
    probabilities = softmax(logits.data, axis=0)
    return np.argmax(logits.data, axis=0), probabilities
