from .configuration import Parameters as config

from contextlib import contextmanager
import logging
import time

import numba


def logLoopProgress(count: int, last_check: int, N: int,
                    name: str) -> int:
    """Function to log the progress of loops through a range of size N.

    Arguments:
        count {int} -- Current iteration count.
        last_check {int} -- Last time logging was done.
        N {int} -- Number of elements being iterated over.
        name {str} -- Name of the iteration to be used in log.

    Returns:
        int -- Updated last_check.
    """

    # Falls back to a 10% increment when configuration was never set up
    runtime = getattr(config, 'runtime', {})
    log_increment = (N / 100) * runtime.get('log_freq', 10.0)

    # Check if the current count has exceeded the increment
    if (count - last_check) >= log_increment:
        percent_complete = '%5.1f' % (count / N * 100)

        logging.info('{0} iteration is {1}% complete'
                     .format(name, percent_complete))

        return count  # Return this to update last_check to current count

    # If increment has not passed, return same last_check
    return last_check


def resolveThreads(threads: int=None) -> int:
    """Function to set the number of worker threads used by the parallel
    numba kernels, capped at the number of threads numba was started with.

    Keyword Arguments:
        threads {int} -- Requested thread count, `None` or 0 for the
            configured default (default: {None}).

    Returns:
        int -- Effective thread count.
    """

    if not threads:
        threads = getattr(config, 'runtime', {}).get('threads') or \
            numba.config.NUMBA_NUM_THREADS
    if threads < 1:
        raise ValueError('Thread count must be >= 1, got {0}'
                         .format(threads))

    effective = min(int(threads), numba.config.NUMBA_NUM_THREADS)
    if effective != threads:
        logging.warning('Requested {0} threads, numba allows {1}'
                        .format(threads, effective))
    numba.set_num_threads(effective)
    return effective


class Stopwatch:
    def __init__(self):
        """Accumulates monotonic wall-clock time per named phase, used for
        the runtime breakdowns printed by the command line.
        """

        self.millis = {}

    @contextmanager
    def phase(self, name: str):
        """Context manager timing one execution of the phase `name`.

        Arguments:
            name {str} -- Phase name.
        """

        start = time.perf_counter()
        try:
            yield
        finally:
            elapsed = (time.perf_counter() - start) * 1000.0
            self.millis[name] = self.millis.get(name, 0.0) + elapsed

    def total(self) -> float:
        return sum(self.millis.values())
