from .tensor import Tensor, result
from ..util.errors import ShapeError

import logging

import numpy as np
from scipy import special


BATCHNORM_MODES = ('train', 'eval', 'calibrate')


def _shapeError(message: str):
    logging.error(message)
    raise ShapeError(message)


def _sameShape(a: Tensor, b: Tensor, name: str):
    if a.shape != b.shape:
        _shapeError('{0}: shapes {1} and {2} differ'
                    .format(name, a.shape, b.shape))


def add(a: Tensor, b: Tensor) -> Tensor:
    _sameShape(a, b, 'add')
    return result(a.data + b.data, (a, b), lambda g: (g, g))


def sub(a: Tensor, b: Tensor) -> Tensor:
    _sameShape(a, b, 'sub')
    return result(a.data - b.data, (a, b), lambda g: (g, -g))


def reshape(x: Tensor, shape: tuple) -> Tensor:
    original = x.shape
    return result(x.data.reshape(shape), (x,),
                  lambda g: (g.reshape(original),))


def concat(tensors: list, axis: int=0) -> Tensor:
    sizes = [t.shape[axis] for t in tensors]
    splits = np.cumsum(sizes)[:-1]

    def backward(g):
        return tuple(np.split(g, splits, axis=axis))

    return result(np.concatenate([t.data for t in tensors], axis=axis),
                  tuple(tensors), backward)


def gather(x: Tensor, index: np.ndarray) -> Tensor:
    """Selects columns of `x` [C, N]: out[:, ...] = x[:, index]; the output
    has shape [C, *index.shape]. Gradients of repeated columns add up.
    """

    index = np.asarray(index, dtype=np.int64)
    if index.size and (index.min() < 0 or index.max() >= x.shape[1]):
        _shapeError('gather: index outside [0, {0})'.format(x.shape[1]))

    def backward(g):
        gx = np.zeros_like(x.data)
        np.add.at(gx, (slice(None), index), g)
        return (gx,)

    return result(x.data[:, index], (x,), backward)


def conv1dPointwise(x: Tensor, w: Tensor, b: Tensor,
                    groups: int=1) -> Tensor:
    """Kernel-size-1 convolution along the point axis:
    out[o, n] = b[o] + sum_i w[o, i] x[i, n], optionally grouped.

    Arguments:
        x {Tensor} -- [C_in, N] input.
        w {Tensor} -- [C_out, C_in / groups] weights.
        b {Tensor} -- [C_out] bias.

    Keyword Arguments:
        groups {int} -- Channel groups (default: {1}).

    Raises:
        ShapeError -- Raised when shapes disagree.

    Returns:
        Tensor -- [C_out, N] output.
    """

    c_in, n = x.shape
    c_out = w.shape[0]
    if c_in % groups or c_out % groups:
        _shapeError('conv1dPointwise: channels in={0} out={1} not divisible '
                    'by groups={2}'.format(c_in, c_out, groups))
    if w.shape != (c_out, c_in // groups) or b.shape != (c_out,):
        _shapeError('conv1dPointwise: x [C_in={0}, N={1}] needs w [{2}, {3}]'
                    ' and b [{2}], got w {4} and b {5}'
                    .format(c_in, n, c_out, c_in // groups, w.shape, b.shape))

    if groups == 1:
        out = w.data @ x.data + b.data[:, None]

        def backward(g):
            return (w.data.T @ g, g @ x.data.T, g.sum(axis=1))

        return result(out, (x, w, b), backward)

    xg = x.data.reshape(groups, c_in // groups, n)
    wg = w.data.reshape(groups, c_out // groups, c_in // groups)
    out = np.matmul(wg, xg).reshape(c_out, n) + b.data[:, None]

    def groupedBackward(g):
        gg = g.reshape(groups, c_out // groups, n)
        gx = np.matmul(wg.transpose(0, 2, 1), gg).reshape(c_in, n)
        gw = np.matmul(gg, xg.transpose(0, 2, 1)).reshape(w.shape)
        return (gx, gw, g.sum(axis=1))

    return result(out, (x, w, b), groupedBackward)


def conv2dDepthwise(x: Tensor, w: Tensor, b: Tensor) -> Tensor:
    """Per-channel 2D cross-correlation with zero padding (k - 1) / 2, so the
    spatial shape is preserved; channels are never mixed.

    Arguments:
        x {Tensor} -- [C, H, W] input.
        w {Tensor} -- [C, k, k] kernels, k odd.
        b {Tensor} -- [C] bias.

    Raises:
        ShapeError -- Raised for an even kernel or mismatched shapes.

    Returns:
        Tensor -- [C, H, W] output.
    """

    c, h, width = x.shape
    k = w.shape[-1]
    if k % 2 == 0:
        _shapeError('conv2dDepthwise: kernel size must be odd, got {0}'
                    .format(k))
    if w.shape != (c, k, k) or b.shape != (c,):
        _shapeError('conv2dDepthwise: x [C={0}, H, W] needs w [{0}, k, k] '
                    'and b [{0}], got w {1} and b {2}'
                    .format(c, w.shape, b.shape))

    pad = (k - 1) // 2
    xp = np.pad(x.data, ((0, 0), (pad, pad), (pad, pad)))
    out = np.empty_like(x.data)
    out[...] = b.data[:, None, None]
    for u in range(k):
        for v in range(k):
            out += w.data[:, u, v, None, None] * xp[:, u:u + h, v:v + width]

    def backward(g):
        gxp = np.zeros_like(xp)
        gw = np.empty_like(w.data)
        for u in range(k):
            for v in range(k):
                gxp[:, u:u + h, v:v + width] += w.data[:, u, v, None, None] * g
                gw[:, u, v] = np.einsum('chw,chw->c',
                                        xp[:, u:u + h, v:v + width], g)
        gx = gxp[:, pad:pad + h, pad:pad + width]
        return (gx, gw, g.sum(axis=(1, 2)))

    return result(out, (x, w, b), backward)


def conv1dDepthwise(x: Tensor, w: Tensor, b: Tensor) -> Tensor:
    """Kernel-size-1 depthwise convolution: out[c, n] = w[c] x[c, n] + b[c].
    """

    if w.shape != (x.shape[0],) or b.shape != (x.shape[0],):
        _shapeError('conv1dDepthwise: x [C={0}, N] needs w and b [{0}], got '
                    '{1} and {2}'.format(x.shape[0], w.shape, b.shape))

    out = w.data[:, None] * x.data + b.data[:, None]

    def backward(g):
        return (w.data[:, None] * g, (g * x.data).sum(axis=1), g.sum(axis=1))

    return result(out, (x, w, b), backward)


def batchNorm(x: Tensor, gamma: Tensor, beta: Tensor,
              running_mean: np.ndarray, running_var: np.ndarray,
              mode: str='train', momentum: float=0.99,
              eps: float=1e-5) -> Tensor:
    """Per-channel standardization over the M axis followed by the affine
    map (gamma, beta).

    `train` normalizes with the (biased) batch statistics and updates the
    running statistics in place as `running = momentum * running +
    (1 - momentum) * batch`; `calibrate` normalizes like `train` but
    overwrites the running statistics with the batch statistics; `eval`
    normalizes with the stored running statistics.

    Arguments:
        x {Tensor} -- [C, M] input.
        gamma {Tensor} -- [C] scale.
        beta {Tensor} -- [C] shift.
        running_mean {np.ndarray} -- [C] running mean, updated in place.
        running_var {np.ndarray} -- [C] running variance, updated in place.

    Keyword Arguments:
        mode {str} -- `train`, `eval` or `calibrate` (default: {'train'}).
        momentum {float} -- Running statistics momentum (default: {0.99}).
        eps {float} -- Variance floor (default: {1e-5}).

    Raises:
        ShapeError -- Raised for M = 0 or mismatched shapes.

    Returns:
        Tensor -- [C, M] output.
    """

    if mode not in BATCHNORM_MODES:
        raise ValueError('Unknown batchnorm mode {0}'.format(mode))
    if x.data.ndim != 2 or x.shape[1] == 0:
        _shapeError('batchNorm: needs [C, M] input with M >= 1, got {0}'
                    .format(x.shape))
    c, m = x.shape
    if gamma.shape != (c,) or beta.shape != (c,):
        _shapeError('batchNorm: x [C={0}, M] needs gamma and beta [{0}], got '
                    '{1} and {2}'.format(c, gamma.shape, beta.shape))

    data = x.data
    if mode == 'eval':
        mean = running_mean.astype(data.dtype)
        var = running_var.astype(data.dtype)
    else:
        mean = data.mean(axis=1)
        var = data.var(axis=1)
        if mode == 'train':
            running_mean *= momentum
            running_mean += (1.0 - momentum) * mean
            running_var *= momentum
            running_var += (1.0 - momentum) * var
        else:
            running_mean[...] = mean
            running_var[...] = var

    inv_std = 1.0 / np.sqrt(var + eps)
    xhat = (data - mean[:, None]) * inv_std[:, None]
    out = gamma.data[:, None] * xhat + beta.data[:, None]

    def backward(g):
        gxhat = g * gamma.data[:, None]
        if mode == 'eval':
            gx = gxhat * inv_std[:, None]
        else:
            gx = (inv_std[:, None] / m) * (
                m * gxhat - gxhat.sum(axis=1, keepdims=True) -
                xhat * (gxhat * xhat).sum(axis=1, keepdims=True))
        return (gx, (g * xhat).sum(axis=1), g.sum(axis=1))

    return result(out, (x, gamma, beta), backward)


def relu(x: Tensor) -> Tensor:
    mask = x.data > 0
    return result(np.where(mask, x.data, 0).astype(x.dtype), (x,),
                  lambda g: (g * mask,))


def gelu(x: Tensor) -> Tensor:
    """Exact (erf) Gaussian error linear unit.
    """

    cdf = 0.5 * (1.0 + special.erf(x.data / np.sqrt(2.0)))
    pdf = np.exp(-0.5 * x.data * x.data) / np.sqrt(2.0 * np.pi)
    return result((x.data * cdf).astype(x.dtype), (x,),
                  lambda g: (g * (cdf + x.data * pdf),))


ACTIVATIONS = {
    'relu': relu,
    'gelu': gelu
}


def activation(x: Tensor, name: str) -> Tensor:
    return ACTIVATIONS[name](x)


def maxOverAxis(x: Tensor, axis: int=0) -> Tensor:
    """Maximum over `axis`. The gradient is routed to the argmax element
    only, the first index on ties.
    """

    if x.shape[axis] < 1:
        _shapeError('maxOverAxis: empty axis {0}'.format(axis))

    index = np.expand_dims(np.argmax(x.data, axis=axis), axis)
    out = np.take_along_axis(x.data, index, axis=axis).squeeze(axis)

    def backward(g):
        gx = np.zeros_like(x.data)
        np.put_along_axis(gx, index, np.expand_dims(g, axis), axis=axis)
        return (gx,)

    return result(out, (x,), backward)


def softmax(logits: np.ndarray, axis: int=0) -> np.ndarray:
    """Class probabilities from [C, N] logits (max-subtracted).
    """

    return special.softmax(logits, axis=axis)


def softmaxCrossEntropy(logits: Tensor, targets: np.ndarray,
                        ignore_class: int) -> Tensor:
    """Mean negative log-softmax of the target class over the points whose
    target is not `ignore_class`.

    Arguments:
        logits {Tensor} -- [C, N] logits.
        targets {np.ndarray} -- [N] class ids in [0, C) or `ignore_class`.
        ignore_class {int} -- Excluded target value.

    Raises:
        ValueError -- Raised when every point is ignored or a target is out
            of range.

    Returns:
        Tensor -- Scalar loss.
    """

    c, n = logits.shape
    targets = np.asarray(targets, dtype=np.int64)
    if targets.shape != (n,):
        _shapeError('softmaxCrossEntropy: logits [C={0}, N={1}] need {1} '
                    'targets, got {2}'.format(c, n, targets.shape))

    valid = np.flatnonzero(targets != ignore_class)
    if valid.size == 0:
        logging.error('Every point carries the ignore class')
        raise ValueError('Cross-entropy undefined: every point is ignored')
    picked = targets[valid]
    if picked.min() < 0 or picked.max() >= c:
        raise ValueError('Targets must be in [0, {0}) or {1}'
                         .format(c, ignore_class))

    columns = logits.data[:, valid]
    log_norm = special.logsumexp(columns, axis=0)
    rows = np.arange(valid.size)
    loss = np.mean(log_norm - columns[picked, rows])

    def backward(g):
        probabilities = np.exp(columns - log_norm[None, :])
        probabilities[picked, rows] -= 1.0
        grad = np.zeros_like(logits.data)
        grad[:, valid] = probabilities * (g / valid.size)
        return (grad,)

    return result(np.asarray(loss, dtype=logits.dtype), (logits,), backward)
