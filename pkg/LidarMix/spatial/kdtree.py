from ..ingest.point_cloud import PointCloud
from ..util.helpers import resolveThreads

import logging

import attr
import numba
import numpy as np


DEFAULT_LEAF_SIZE = 32


@attr.s(frozen=True, eq=False)
class KnnResult:
    """K neighbor ids per query with their squared Euclidean distances,
    ascending; ties are ordered by the smaller point id.
    """

    indices = attr.ib()
    distances = attr.ib()

    def euclidean(self) -> np.ndarray:
        return np.sqrt(self.distances)


@numba.njit(cache=False)
def _nodeRanges(n_points, depth):
    node_count = 2 ** (depth + 1) - 1
    start = np.zeros(node_count, dtype=np.int64)
    end = np.zeros(node_count, dtype=np.int64)
    end[0] = n_points
    for node in range(2 ** depth - 1):
        mid = start[node] + (end[node] - start[node]) // 2
        start[2 * node + 1] = start[node]
        end[2 * node + 1] = mid
        start[2 * node + 2] = mid
        end[2 * node + 2] = end[node]
    return start, end


@numba.njit(parallel=True, cache=False)
def _buildLevel(points, perm, start, end, split_axis, split_value,
                first_node, last_node):
    # Nodes of one level cover disjoint ranges of `perm`
    for node in numba.prange(first_node, last_node):
        lo = start[node]
        hi = end[node]
        size = hi - lo
        if size == 0:
            continue
        if size == 1:
            split_axis[node] = 0
            split_value[node] = points[perm[lo], 0]
            continue

        # Widest-spread axis, first axis on ties
        best_axis = 0
        best_spread = -1.0
        for axis in range(3):
            low = np.inf
            high = -np.inf
            for j in range(lo, hi):
                v = points[perm[j], axis]
                if v < low:
                    low = v
                if v > high:
                    high = v
            if high - low > best_spread:
                best_spread = high - low
                best_axis = axis

        # Sort by (coordinate, point index)
        members = np.sort(perm[lo:hi])
        keys = np.empty(size, dtype=np.float64)
        for j in range(size):
            keys[j] = points[members[j], best_axis]
        order = np.argsort(keys, kind='mergesort')
        for j in range(size):
            perm[lo + j] = members[order[j]]

        mid = lo + size // 2
        split_axis[node] = best_axis
        split_value[node] = points[perm[mid], best_axis]


@numba.njit(cache=False)
def _queryOne(points, perm, start, end, split_axis, split_value, depth,
              q0, q1, q2, k, skip, out_index, out_dist):
    n_points = points.shape[0]
    for j in range(k):
        out_dist[j] = np.inf
        out_index[j] = n_points

    first_leaf = 2 ** depth - 1
    stack_node = np.empty(2 * depth + 2, dtype=np.int64)
    stack_bound = np.empty(2 * depth + 2, dtype=np.float64)
    stack_node[0] = 0
    stack_bound[0] = 0.0
    top = 1

    while top > 0:
        top -= 1
        node = stack_node[top]
        bound = stack_bound[top]
        # Equal bounds are still visited: a smaller id may win the tie
        if bound > out_dist[k - 1]:
            continue

        if node >= first_leaf:
            for j in range(start[node], end[node]):
                p = perm[j]
                if p == skip:
                    continue
                dx = points[p, 0] - q0
                dy = points[p, 1] - q1
                dz = points[p, 2] - q2
                d = dx * dx + dy * dy + dz * dz
                worst_d = out_dist[k - 1]
                if d > worst_d or (d == worst_d and p >= out_index[k - 1]):
                    continue
                pos = k - 1
                while pos > 0 and (d < out_dist[pos - 1] or
                                   (d == out_dist[pos - 1] and
                                    p < out_index[pos - 1])):
                    out_dist[pos] = out_dist[pos - 1]
                    out_index[pos] = out_index[pos - 1]
                    pos -= 1
                out_dist[pos] = d
                out_index[pos] = p
            continue

        axis = split_axis[node]
        if axis == 0:
            diff = q0 - split_value[node]
        elif axis == 1:
            diff = q1 - split_value[node]
        else:
            diff = q2 - split_value[node]

        left = 2 * node + 1
        right = 2 * node + 2
        far_bound = max(bound, diff * diff)
        if diff < 0.0:
            near, far = left, right
        elif diff > 0.0:
            near, far = right, left
        else:
            near, far = left, right
            far_bound = bound

        # Far side is pushed first so the near side is explored first
        stack_node[top] = far
        stack_bound[top] = far_bound
        top += 1
        stack_node[top] = near
        stack_bound[top] = bound
        top += 1


@numba.njit(parallel=True, cache=False)
def _queryBatch(points, perm, start, end, split_axis, split_value, depth,
                queries, k, skip_ids, out_index, out_dist):
    for qi in numba.prange(queries.shape[0]):
        _queryOne(points, perm, start, end, split_axis, split_value, depth,
                  queries[qi, 0], queries[qi, 1], queries[qi, 2], k,
                  skip_ids[qi], out_index[qi], out_dist[qi])


class KdTree:
    def __init__(self, points: np.ndarray, leaf_size: int=DEFAULT_LEAF_SIZE,
                 threads: int=None):
        """Builds a balanced median-split kd-tree over [N, 3] coordinates.
        Nodes use an implicit layout: node `i` has children `2i + 1` and
        `2i + 2`, and covers a contiguous range of the permutation `perm`.
        Each internal node splits its range at the median along its
        widest-spread axis, with ties in coordinate ordered by point index, so
        the tree only depends on the input order.

        Arguments:
            points {np.ndarray} -- [N, 3] coordinates (N >= 1).

        Keyword Arguments:
            leaf_size {int} -- Maximum points per leaf (default: {32}).
            threads {int} -- Build threads (default: {None}, configured).

        Raises:
            ValueError -- Raised for an empty cloud or a bad leaf size.
        """

        points = np.ascontiguousarray(points, dtype=np.float64)
        if points.ndim != 2 or points.shape[1] != 3:
            raise ValueError('KdTree expects [N, 3] coordinates, got {0}'
                             .format(points.shape))
        if points.shape[0] == 0:
            logging.error('Cannot build a KdTree over an empty cloud')
            raise ValueError('Cannot build a KdTree over an empty cloud')
        if leaf_size < 1:
            raise ValueError('leaf_size must be >= 1, got {0}'
                             .format(leaf_size))

        self.points = points
        self.n_points = points.shape[0]
        self.leaf_size = int(leaf_size)
        self.depth = 0
        while self.n_points > self.leaf_size * 2 ** self.depth:
            self.depth += 1

        resolveThreads(threads)

        self.start, self.end = _nodeRanges(self.n_points, self.depth)
        node_count = self.start.size
        self.split_axis = np.zeros(node_count, dtype=np.int64)
        self.split_value = np.zeros(node_count, dtype=np.float64)
        self.perm = np.arange(self.n_points, dtype=np.int64)

        for level in range(self.depth):
            _buildLevel(self.points, self.perm, self.start, self.end,
                        self.split_axis, self.split_value,
                        2 ** level - 1, 2 ** (level + 1) - 1)

    def query(self, queries: np.ndarray, k: int, threads: int=None,
              self_ids: np.ndarray=None) -> KnnResult:
        """Exact k-nearest-neighbor query by squared Euclidean distance. Ties
        at equal distance are ordered by the smaller point index.

        Arguments:
            queries {np.ndarray} -- [M, 3] query coordinates.
            k {int} -- Neighbors per query, 1 <= k <= N.

        Keyword Arguments:
            threads {int} -- Query threads (default: {None}, configured).
            self_ids {np.ndarray} -- Per-query point id excluded from its own
                result, -1 for none (default: {None}, self-match allowed).

        Raises:
            ValueError -- Raised when k is out of range.

        Returns:
            KnnResult -- [M, k] indices and squared distances.
        """

        queries = np.ascontiguousarray(queries, dtype=np.float64) \
            .reshape(-1, 3)
        available = self.n_points if self_ids is None else self.n_points - 1
        if not 1 <= k <= available:
            logging.error('k={0} outside [1, {1}]'.format(k, available))
            raise ValueError('k must be in [1, {0}], got {1}'
                             .format(available, k))

        if self_ids is None:
            self_ids = np.full(queries.shape[0], -1, dtype=np.int64)
        self_ids = np.ascontiguousarray(self_ids, dtype=np.int64)

        resolveThreads(threads)

        out_index = np.empty((queries.shape[0], k), dtype=np.int64)
        out_dist = np.empty((queries.shape[0], k), dtype=np.float64)
        _queryBatch(self.points, self.perm, self.start, self.end,
                    self.split_axis, self.split_value, self.depth, queries,
                    k, self_ids, out_index, out_dist)

        return KnnResult(indices=out_index, distances=out_dist)

    def leaves(self) -> list:
        """Returns the point ids of every leaf, in node order.
        """

        first_leaf = 2 ** self.depth - 1
        return [self.perm[self.start[node]:self.end[node]]
                for node in range(first_leaf, self.start.size)]

    def validate(self) -> bool:
        """Audits the structural invariants: every point lies in exactly one
        leaf, and for every internal node the left subtree is <= and the
        right subtree >= the split value on the split axis.

        Returns:
            bool -- True when every invariant holds.
        """

        members = np.concatenate(self.leaves())
        if members.size != self.n_points or \
                not np.array_equal(np.sort(members),
                                   np.arange(self.n_points)):
            return False

        for node in range(2 ** self.depth - 1):
            left = 2 * node + 1
            right = 2 * node + 2
            axis = self.split_axis[node]
            value = self.split_value[node]
            left_ids = self.perm[self.start[left]:self.end[left]]
            right_ids = self.perm[self.start[right]:self.end[right]]
            if np.any(self.points[left_ids, axis] > value):
                return False
            if np.any(self.points[right_ids, axis] < value):
                return False
        return True


def build(cloud, leaf_size: int=DEFAULT_LEAF_SIZE,
          threads: int=None) -> KdTree:
    """Function to build a KdTree over the coordinates of a cloud.

    Arguments:
        cloud -- `PointCloud` or [N, 3] array.

    Returns:
        KdTree -- Immutable spatial index.
    """

    xyz = cloud.xyz if isinstance(cloud, PointCloud) else cloud
    return KdTree(xyz, leaf_size=leaf_size, threads=threads)


def queryKnn(tree: KdTree, queries, k: int, threads: int=None,
             exclude_self: bool=False) -> KnnResult:
    """Function querying the k nearest indexed points of every query. With
    `exclude_self`, queries must be the indexed points themselves (in index
    order) and each point is excluded from its own neighbors.
    """

    queries = queries.xyz if isinstance(queries, PointCloud) else queries
    self_ids = None
    if exclude_self:
        self_ids = np.arange(tree.n_points, dtype=np.int64)
    return tree.query(queries, k, threads=threads, self_ids=self_ids)


def bruteForceKnn(points: np.ndarray, queries: np.ndarray, k: int,
                  exclude_self: bool=False) -> KnnResult:
    """O(N * M) reference search with the same distance arithmetic and tie
    rule as `KdTree.query`.
    """

    points = np.asarray(points, dtype=np.float64)
    queries = np.asarray(queries, dtype=np.float64).reshape(-1, 3)
    ids = np.arange(points.shape[0])
    indices = np.empty((queries.shape[0], k), dtype=np.int64)
    distances = np.empty((queries.shape[0], k), dtype=np.float64)
    for qi, q in enumerate(queries):
        diff = points - q
        d = diff[:, 0] * diff[:, 0] + diff[:, 1] * diff[:, 1] + \
            diff[:, 2] * diff[:, 2]
        if exclude_self:
            d[qi] = np.inf
        order = np.lexsort((ids, d))[:k]
        indices[qi] = order
        distances[qi] = d[order]
    return KnnResult(indices=indices, distances=distances)
