from .grid import CellAssignment, OUT_OF_VIEW
from ..tensor.tensor import Tensor, result
from ..util.errors import ConfigurationError, ShapeError

import logging

import numba
import numpy as np
from scipy import sparse


@numba.njit(parallel=True, cache=False)
def _scatterKernel(features, cell_index, weights, cells):
    # features [C, N]; each channel row is reduced independently
    channels, n_points = features.shape
    out = np.zeros((channels, cells), dtype=features.dtype)
    for c in numba.prange(channels):
        for n in range(n_points):
            cell = cell_index[n]
            if cell >= 0:
                out[c, cell] += weights[n] * features[c, n]
    return out


@numba.njit(parallel=True, cache=False)
def _gatherKernel(grid, cell_index, weights):
    # grid [C, HW] -> [C, N], out-of-view points stay zero
    channels = grid.shape[0]
    n_points = cell_index.size
    out = np.zeros((channels, n_points), dtype=grid.dtype)
    for c in numba.prange(channels):
        for n in range(n_points):
            cell = cell_index[n]
            if cell >= 0:
                out[c, n] = weights[n] * grid[c, cell]
    return out


def checkAssignment(assign: CellAssignment, n_points: int, cells: int=None):
    """Raises ShapeError when the assignment does not cover `n_points` points
    or holds indices outside [0, cells) other than the out-of-view sentinel.
    """

    cells = assign.cells if cells is None else cells
    if len(assign) != n_points:
        message = 'Assignment covers {0} points, features have {1}' \
            .format(len(assign), n_points)
        logging.error(message)
        raise ShapeError(message)
    index = assign.cell_index
    if index.size and (index.max() >= cells or index.min() < OUT_OF_VIEW):
        message = 'Cell index out of range [0, {0}): min {1}, max {2}' \
            .format(cells, index.min(), index.max())
        logging.error(message)
        raise ShapeError(message)


def _weights(assign: CellAssignment, dtype) -> np.ndarray:
    return assign.inv_density.astype(dtype)


def flattenScatter(features: np.ndarray, assign: CellAssignment,
                   cells: int=None) -> np.ndarray:
    """Projects per-point features into grid cells by inverse-density
    weighted summation: grid[cell] = sum of inv_density * feature over the
    cell's members. Empty cells are zero and out-of-view points contribute
    nothing.

    Arguments:
        features {np.ndarray} -- [N, C] point features.
        assign {CellAssignment} -- Assignment over the same N points.

    Keyword Arguments:
        cells {int} -- Grid size HW (default: {None}, from the assignment).

    Raises:
        ShapeError -- Raised for a corrupt assignment.

    Returns:
        np.ndarray -- [HW, C] grid.
    """

    cells = assign.cells if cells is None else cells
    checkAssignment(assign, features.shape[0], cells)
    channel_first = np.ascontiguousarray(features.T)
    return _scatterKernel(channel_first, assign.cell_index,
                          _weights(assign, features.dtype), cells).T


def projectionMatrix(assign: CellAssignment, cells: int=None,
                     dtype=np.float64, max_elements: int=None) -> np.ndarray:
    """Dense [HW, N] matrix with M[cell(n), n] = inv_density(n).

    Raises:
        ConfigurationError -- Raised when HW * N exceeds `max_elements`.
    """

    cells = assign.cells if cells is None else cells
    n_points = len(assign)
    if max_elements is not None and cells * n_points > max_elements:
        message = 'Dense projection matrix of {0} x {1} exceeds the cap of ' \
            '{2} elements'.format(cells, n_points, max_elements)
        logging.error(message)
        raise ConfigurationError(message)

    matrix = np.zeros((cells, n_points), dtype=dtype)
    members = np.flatnonzero(assign.in_view)
    matrix[assign.cell_index[members], members] = assign.inv_density[members]
    return matrix


def flattenMatmulOracle(features: np.ndarray, assign: CellAssignment,
                        cells: int=None,
                        max_elements: int=None) -> np.ndarray:
    """Reference flatten materializing the dense projection matrix and
    multiplying it with the features.

    Arguments:
        features {np.ndarray} -- [N, C] point features.
        assign {CellAssignment} -- Assignment over the same N points.

    Keyword Arguments:
        cells {int} -- Grid size HW (default: {None}, from the assignment).
        max_elements {int} -- Cap on HW * N (default: {None}, no cap).

    Returns:
        np.ndarray -- [HW, C] grid.
    """

    checkAssignment(assign, features.shape[0], cells)
    matrix = projectionMatrix(assign, cells, dtype=features.dtype,
                              max_elements=max_elements)
    return matrix @ features


def flattenSparse(features: np.ndarray, assign: CellAssignment,
                  cells: int=None) -> np.ndarray:
    """Flatten through a compressed sparse row projection matrix.
    """

    cells = assign.cells if cells is None else cells
    checkAssignment(assign, features.shape[0], cells)
    members = np.flatnonzero(assign.in_view)
    matrix = sparse.csr_matrix(
        (assign.inv_density[members].astype(features.dtype),
         (assign.cell_index[members], members)),
        shape=(cells, features.shape[0]))
    return np.asarray(matrix @ features)


def inflateGrid(grid: np.ndarray, assign: CellAssignment) -> np.ndarray:
    """Every point inherits the features of its cell; out-of-view points get
    zeros.

    Arguments:
        grid {np.ndarray} -- [HW, C] grid.
        assign {CellAssignment} -- Assignment of the N points.

    Returns:
        np.ndarray -- [N, C] point features.
    """

    checkAssignment(assign, len(assign), grid.shape[0])
    ones = np.ones(len(assign), dtype=grid.dtype)
    return _gatherKernel(np.ascontiguousarray(grid.T), assign.cell_index,
                         ones).T


def flatten(x: Tensor, assign: CellAssignment) -> Tensor:
    """Differentiable flatten of channel-first point features [C, N] into the
    grid [C, H, W]. The gradient of a point is its cell's gradient scaled by
    the point's inverse density.
    """

    channels, n_points = x.shape
    checkAssignment(assign, n_points)
    height, width = assign.grid_shape
    weights = _weights(assign, x.dtype)
    out = _scatterKernel(x.data, assign.cell_index, weights, assign.cells)

    def backward(g):
        return (_gatherKernel(np.ascontiguousarray(g).reshape(channels, -1),
                              assign.cell_index, weights),)

    return result(out.reshape(channels, height, width), (x,), backward)


def inflate(grid: Tensor, assign: CellAssignment) -> Tensor:
    """Differentiable inflate of a grid [C, H, W] back onto the N points,
    [C, N]. Point gradients accumulate into their cells.
    """

    channels = grid.shape[0]
    if tuple(grid.shape[1:]) != assign.grid_shape:
        message = 'Grid {0} does not match the assignment grid {1}' \
            .format(grid.shape[1:], assign.grid_shape)
        logging.error(message)
        raise ShapeError(message)

    ones = np.ones(len(assign), dtype=grid.dtype)
    flat = np.ascontiguousarray(grid.data).reshape(channels, -1)
    out = _gatherKernel(flat, assign.cell_index, ones)

    def backward(g):
        cells = _scatterKernel(np.ascontiguousarray(g), assign.cell_index,
                               ones, assign.cells)
        return (cells.reshape(grid.shape),)

    return result(out, (grid,), backward)
