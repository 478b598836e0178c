import threading

import numpy as np


PROFILES = {
    'float64': np.float64,
    'float32': np.float32
}

_state = threading.local()


def profileDtype(profile: str):
    """Maps a numeric profile name (`float64` for tests and gradient checks,
    `float32` for runtime) to its numpy dtype.
    """

    try:
        return PROFILES[profile]
    except KeyError:
        raise ValueError('Unknown numeric profile {0}, expected one of {1}'
                         .format(profile, sorted(PROFILES)))


class Tensor:
    def __init__(self, data, requires_grad: bool=False, dtype=None):
        """Dense row-major array participating in reverse-mode
        differentiation.

        Arguments:
            data -- Array-like values.

        Keyword Arguments:
            requires_grad {bool} -- Accumulate gradients into `grad`
                (default: {False}).
            dtype -- Optional dtype, otherwise that of `data` (float64 for
                non-float input) (default: {None}).
        """

        data = np.asarray(data)
        if dtype is None and data.dtype not in (np.float32, np.float64):
            dtype = np.float64
        if dtype is not None:
            data = data.astype(dtype, copy=False)
        if not data.flags.c_contiguous:
            data = np.ascontiguousarray(data)
        self.data = data
        self.requires_grad = requires_grad
        self.grad = None
        self.is_leaf = True

    @property
    def shape(self) -> tuple:
        return self.data.shape

    @property
    def dtype(self):
        return self.data.dtype

    def zeroGrad(self):
        self.grad = None

    def numpy(self) -> np.ndarray:
        return self.data

    def __repr__(self):
        return 'Tensor(shape={0}, dtype={1}, requires_grad={2})'.format(
            self.shape, self.dtype, self.requires_grad)


class Tape:
    def __init__(self):
        """Ordered record of the differentiable operations executed while the
        tape is active (`with Tape() as tape:`). Tapes are thread-local, so
        concurrent forward passes in different threads use separate tapes.
        """

        self.records = []
        self._outer = None

    def __enter__(self) -> 'Tape':
        self._outer = getattr(_state, 'tape', None)
        _state.tape = self
        return self

    def __exit__(self, *exc):
        _state.tape = self._outer
        self._outer = None
        return False

    def record(self, out: Tensor, parents: tuple, backward):
        self.records.append((out, parents, backward))

    def backward(self, out: Tensor, grad=None):
        """Propagates gradients from `out` through the records in strictly
        reverse execution order. Leaf tensors requiring gradients accumulate
        into `grad` additively.

        Arguments:
            out {Tensor} -- Tensor to differentiate (usually a scalar loss).

        Keyword Arguments:
            grad -- Seed gradient, same shape as `out`, or a scalar scale
                (default: {None}, ones).
        """

        seed = np.ones_like(out.data) if grad is None else \
            np.broadcast_to(np.asarray(grad, dtype=out.dtype),
                            out.shape).copy()
        grads = {id(out): seed}
        leaves = {id(out): out} if out.is_leaf else {}

        for record_out, parents, backward in reversed(self.records):
            g = grads.pop(id(record_out), None)
            if g is None:
                continue
            parent_grads = backward(g)
            for parent, parent_grad in zip(parents, parent_grads):
                if parent_grad is None or not parent.requires_grad:
                    continue
                key = id(parent)
                if key in grads:
                    grads[key] = grads[key] + parent_grad
                else:
                    grads[key] = parent_grad
                if parent.is_leaf:
                    leaves[key] = parent

        for key, leaf in leaves.items():
            if key not in grads:
                continue
            if leaf.grad is None:
                leaf.grad = np.array(grads[key], dtype=leaf.dtype)
            else:
                leaf.grad += grads[key]


def currentTape() -> Tape:
    return getattr(_state, 'tape', None)


def result(data: np.ndarray, parents: tuple, backward) -> Tensor:
    """Wraps the output of a differentiable operation, recording it on the
    active tape when any parent requires gradients.

    Arguments:
        data {np.ndarray} -- Forward value.
        parents {tuple} -- Input tensors, in the order `backward` returns
            their gradients.
        backward -- Callable mapping the output gradient to a tuple of
            parent gradients (`None` for non-differentiable inputs).

    Returns:
        Tensor -- Output tensor.
    """

    tape = currentTape()
    needs_grad = tape is not None and \
        any(p.requires_grad for p in parents)
    out = Tensor(data, requires_grad=needs_grad, dtype=data.dtype)
    if needs_grad:
        out.is_leaf = False
        tape.record(out, parents, backward)
    return out
