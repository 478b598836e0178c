from .flatten import flattenScatter, flattenSparse, flattenMatmulOracle
from .grid import CellAssignment, assignmentFromCells

import logging
import math
import time

import numpy as np
import pandas as pd


REPORT_COLUMNS = ['arm', 'N', 'HW', 'C', 'millis']

ARMS = {
    'scatter': flattenScatter,
    'sparse': flattenSparse,
    'matmul': flattenMatmulOracle
}


def randomAssignment(n_points: int, cells: int, rng) -> CellAssignment:
    """Uniformly random cell per point on a square-ish grid of `cells`
    cells.
    """

    width = max(1, int(math.isqrt(cells)))
    while cells % width:
        width -= 1
    grid_shape = (cells // width, width)
    return assignmentFromCells(rng.integers(0, cells, n_points), grid_shape)


def benchFlatten(n_points: int, cells: int, channels: int, reps: int,
                 warmup: int=3, seed: int=0, dtype=np.float32,
                 max_dense_elements: int=None) -> pd.DataFrame:
    """Function timing the flatten arms (numba scatter, scipy sparse matrix,
    dense matrix product) on a random assignment. The arms' outputs are
    compared before any timing; the dense arm is skipped with a warning when
    HW * N exceeds `max_dense_elements`. The first `warmup` calls of every arm
    are discarded.

    Arguments:
        n_points {int} -- Point count N.
        cells {int} -- Grid size HW.
        channels {int} -- Feature channels C.
        reps {int} -- Timed calls per arm; 0 returns an empty report.

    Keyword Arguments:
        warmup {int} -- Discarded calls per arm (default: {3}).
        seed {int} -- Seed of features and assignment (default: {0}).
        dtype -- Feature dtype (default: {np.float32}).
        max_dense_elements {int} -- Cap on the dense matrix (default:
            {None}, no cap).

    Raises:
        RuntimeError -- Raised when the arms disagree.

    Returns:
        pd.DataFrame -- Rows `arm,N,HW,C,millis` (median per arm).
    """

    if reps <= 0:
        return pd.DataFrame(columns=REPORT_COLUMNS)

    rng = np.random.default_rng(seed)
    assign = randomAssignment(n_points, cells, rng)
    features = rng.standard_normal((n_points, channels)).astype(dtype)

    arms = dict(ARMS)
    if max_dense_elements is not None and \
            n_points * cells > max_dense_elements:
        logging.warning('Skipping the dense arm: {0} x {1} exceeds {2} '
                        'elements'.format(cells, n_points,
                                          max_dense_elements))
        del arms['matmul']

    tolerance = 1e-9 if np.dtype(dtype) == np.float64 else 1e-4
    reference = flattenScatter(features, assign)
    for name, arm in arms.items():
        error = np.max(np.abs(arm(features, assign) - reference),
                       initial=0.0)
        if error > tolerance:
            logging.error('Flatten arm {0} differs from scatter by {1:.3e}'
                          .format(name, error))
            raise RuntimeError('Flatten arm {0} differs from scatter by '
                               '{1:.3e}'.format(name, error))

    rows = []
    for name, arm in arms.items():
        times = []
        for rep in range(warmup + reps):
            start = time.perf_counter()
            arm(features, assign)
            elapsed = (time.perf_counter() - start) * 1000.0
            if rep >= warmup:
                times.append(elapsed)

        millis = float(np.median(times))
        logging.info('Flatten arm {0}: {1:.2f} ms (N={2}, HW={3}, C={4})'
                     .format(name, millis, n_points, cells, channels))
        rows.append({'arm': name, 'N': n_points, 'HW': cells,
                     'C': channels, 'millis': millis})

    return pd.DataFrame(rows, columns=REPORT_COLUMNS)
