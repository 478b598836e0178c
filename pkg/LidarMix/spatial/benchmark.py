from .kdtree import build, queryKnn
from ..util.helpers import resolveThreads

import hashlib
import logging
import time

import numpy as np
import pandas as pd


def _median(values: list) -> float:
    return float(np.median(values)) if values else float('nan')


def resultChecksum(result) -> str:
    """Digest of a KnnResult (indices and distances), used to compare results
    across thread counts.
    """

    digest = hashlib.sha1()
    digest.update(np.ascontiguousarray(result.indices).tobytes())
    digest.update(np.ascontiguousarray(result.distances).tobytes())
    return digest.hexdigest()


def benchBuildQuery(cloud, k: int, threads: int, reps: int=5,
                    warmup: int=3, leaf_size: int=32) -> pd.DataFrame:
    """Function timing the tree build and a batched all-points query at one
    thread and at `threads` threads. The first `warmup` repetitions of every
    arm are discarded (they include JIT compilation). Results of every arm
    are compared before the report is returned.

    Arguments:
        cloud -- `PointCloud` or [N, 3] coordinates.
        k {int} -- Neighbors per query.
        threads {int} -- Parallel thread count (>= 1).

    Keyword Arguments:
        reps {int} -- Timed repetitions per arm (default: {5}).
        warmup {int} -- Discarded repetitions per arm (default: {3}).
        leaf_size {int} -- Tree leaf size (default: {32}).

    Raises:
        RuntimeError -- Raised when results differ across thread counts.

    Returns:
        pd.DataFrame -- Rows `phase,threads,millis,checksum`.
    """

    if threads < 1:
        raise ValueError('threads must be >= 1, got {0}'.format(threads))

    rows = []
    checksums = set()
    thread_counts = [1] if threads == 1 else [1, threads]

    for thread_count in thread_counts:
        thread_count = resolveThreads(thread_count)
        build_times = []
        query_times = []
        for rep in range(warmup + reps):
            start = time.perf_counter()
            tree = build(cloud, leaf_size=leaf_size, threads=thread_count)
            built = time.perf_counter()
            result = queryKnn(tree, cloud, k, threads=thread_count)
            queried = time.perf_counter()

            checksums.add(resultChecksum(result))
            if rep >= warmup:
                build_times.append((built - start) * 1000.0)
                query_times.append((queried - built) * 1000.0)

        checksum = resultChecksum(result)
        rows.append({'phase': 'build', 'threads': thread_count,
                     'millis': _median(build_times), 'checksum': checksum})
        rows.append({'phase': 'query', 'threads': thread_count,
                     'millis': _median(query_times), 'checksum': checksum})

        logging.info('kNN bench at {0} threads: build {1:.2f} ms, query '
                     '{2:.2f} ms'.format(thread_count, rows[-2]['millis'],
                                         rows[-1]['millis']))

    if len(checksums) != 1:
        logging.error('kNN results differ across thread counts')
        raise RuntimeError('kNN results differ across thread counts')

    return pd.DataFrame(rows, columns=['phase', 'threads', 'millis',
                                       'checksum'])
