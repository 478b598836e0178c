from .tensor import Tape, Tensor

import logging

import numpy as np


def _weightedSum(op, arrays: list, weights: np.ndarray) -> float:
    out = op(*[Tensor(a) for a in arrays])
    return float(np.sum(out.data * weights))


def gradCheck(op, inputs: list, eps: float=1e-5, seed: int=0,
              wrt: list=None, atol: float=1e-7, floor: float=1e-8) -> float:
    """Compares the tape gradients of `op` against central finite differences
    on every element of the checked inputs. The output is contracted with a
    fixed random weight array so a single backward pass covers every output
    element.

    The error of one element is the part of `|analytic - numeric|` above
    `atol`, divided by `max(floor, |analytic|, |numeric|)`. Differences within
    the finite-difference noise `atol` count as zero; anything larger is
    measured relative to the gradient, however small it is.

    Arguments:
        op -- Callable taking `len(inputs)` Tensors and returning a Tensor.
        inputs {list} -- Input arrays (or Tensors); promoted to float64.

    Keyword Arguments:
        eps {float} -- Finite-difference step (default: {1e-5}).
        seed {int} -- Seed of the output weights (default: {0}).
        wrt {list} -- Indices of the inputs to check (default: {None}, all).
        atol {float} -- Absolute difference treated as finite-difference
            noise (default: {1e-7}).
        floor {float} -- Lower bound of the relative scale (default: {1e-8}).

    Returns:
        float -- Maximum relative error over all checked elements.
    """

    arrays = [np.array(x.data if isinstance(x, Tensor) else x,
                       dtype=np.float64) for x in inputs]
    wrt = list(range(len(arrays))) if wrt is None else list(wrt)

    tensors = [Tensor(a.copy(), requires_grad=i in wrt)
               for i, a in enumerate(arrays)]
    with Tape() as tape:
        out = op(*tensors)
    weights = np.random.default_rng(seed).standard_normal(out.shape)
    tape.backward(out, weights)

    worst = 0.0
    for i in wrt:
        analytic = tensors[i].grad
        if analytic is None:
            analytic = np.zeros_like(arrays[i])
        analytic = analytic.reshape(-1)

        flat = arrays[i].reshape(-1)
        for j in range(flat.size):
            original = flat[j]
            flat[j] = original + eps
            plus = _weightedSum(op, arrays, weights)
            flat[j] = original - eps
            minus = _weightedSum(op, arrays, weights)
            flat[j] = original

            numeric = (plus - minus) / (2.0 * eps)
            excess = max(0.0, abs(analytic[j] - numeric) - atol)
            error = excess / max(floor, abs(analytic[j]), abs(numeric))
            worst = max(worst, error)

    logging.debug('Gradient check over {0} inputs: max relative error {1:.3e}'
                  .format(len(wrt), worst))
    return worst
