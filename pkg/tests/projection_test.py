from context import LidarMix

import math
import os
import unittest

import numpy as np

projection = LidarMix.projection
tensor = LidarMix.tensor

GridSpec = projection.GridSpec
OUT_OF_VIEW = projection.OUT_OF_VIEW


def _planar(resolution=0.1, bounds_min=(0.0, 0.0), bounds_max=(1.0, 1.0),
            axes=(0, 1)):
    return GridSpec.planar('test', axes, resolution, bounds_min, bounds_max)


def _sphere(height=16, width=64, fov_up=10.0, fov_down=-30.0,
            reduction='mean'):
    return GridSpec.spherical('range', height, width, fov_up, fov_down,
                              reduction=reduction)


def _randomAssignment(rng, n_points, grid_shape, out_of_view=0.1):
    cells = grid_shape[0] * grid_shape[1]
    index = rng.integers(0, cells, n_points)
    index[rng.random(n_points) < out_of_view] = OUT_OF_VIEW
    return projection.assignmentFromCells(index, grid_shape)


class TestPlanarGrid(unittest.TestCase):
    """Tests for planar cell assignment.
    """

    def test_gridShape(self):
        spec = _planar(resolution=0.5, bounds_min=(-10, -2),
                       bounds_max=(10, 4))
        self.assertEqual(spec.shape, (40, 12))
        self.assertEqual(spec.cells, 480)

    def test_cellInterior(self):
        result = projection.assignPlanar(np.array([[0.05, 0.05, 0.0]]),
                                         _planar())
        self.assertEqual(result.cell_index[0], 0)
        self.assertEqual(result.inv_density[0], 1.0)

    def test_cellBoundaryFloor(self):
        """Testing that a point on a cell boundary goes to the upper cell.
        """

        spec = _planar()
        result = projection.assignPlanar(np.array([[0.1, 0.0, 0.0]]), spec)
        self.assertEqual(result.cell_index[0], 1 * spec.width + 0)

    def test_maxEdgeClamped(self):
        spec = _planar()
        result = projection.assignPlanar(np.array([[1.0, 1.0, 0.0],
                                                   [1.01, 0.5, 0.0],
                                                   [-0.01, 0.5, 0.0]]), spec)
        self.assertEqual(result.cell_index[0], spec.cells - 1)
        self.assertEqual(result.cell_index[1], OUT_OF_VIEW)
        self.assertEqual(result.cell_index[2], OUT_OF_VIEW)
        np.testing.assert_array_equal(result.inv_density[1:], 0.0)

    def test_axesSelection(self):
        """Testing an xz grid: rows from x, columns from z; y is ignored.
        """

        spec = _planar(resolution=1.0, bounds_min=(0, 0), bounds_max=(4, 4),
                       axes=(0, 2))
        result = projection.assign(np.array([[2.5, 99.0, 1.2]]), spec)
        self.assertEqual(result.cell_index[0], 2 * 4 + 1)

    def test_formulaOracle(self):
        """Testing random points against the per-point scalar formula.
        """

        rng = np.random.default_rng(0)
        spec = _planar(resolution=0.3, bounds_min=(-3, -2),
                       bounds_max=(3, 2))
        points = rng.uniform(-4, 4, size=(500, 3))
        result = projection.assignPlanar(points, spec)

        for n, (x, y, _) in enumerate(points):
            if not (-3 <= x <= 3 and -2 <= y <= 2):
                self.assertEqual(result.cell_index[n], OUT_OF_VIEW)
                continue
            row = min(math.floor((x + 3) / 0.3), spec.height - 1)
            col = min(math.floor((y + 2) / 0.3), spec.width - 1)
            self.assertEqual(result.cell_index[n], row * spec.width + col)

    def test_partitionOfUnity(self):
        """Testing that member weights of every occupied cell sum to 1.
        """

        rng = np.random.default_rng(1)
        spec = _planar(resolution=0.5, bounds_min=(-2, -2),
                       bounds_max=(2, 2))
        result = projection.assignPlanar(rng.normal(size=(1000, 3)), spec)
        inside = result.in_view
        sums = np.bincount(result.cell_index[inside],
                           weights=result.inv_density[inside],
                           minlength=spec.cells)
        occupied = np.bincount(result.cell_index[inside],
                               minlength=spec.cells) > 0
        np.testing.assert_allclose(sums[occupied], 1.0, rtol=1e-12)
        np.testing.assert_array_equal(sums[~occupied], 0.0)

    def test_badSpecs(self):
        errors = LidarMix.util.errors
        with self.assertRaises(errors.ConfigurationError):
            _planar(resolution=0.0)
        with self.assertRaises(errors.ConfigurationError):
            _planar(bounds_min=(1, 0), bounds_max=(1, 1))
        with self.assertRaises(errors.ConfigurationError):
            _planar(axes=(1, 1))
        with self.assertRaises(errors.ConfigurationError):
            _sphere(fov_up=-30.0, fov_down=10.0)


class TestSphericalGrid(unittest.TestCase):
    """Tests for range-image cell assignment.
    """

    def test_forwardIsCenter(self):
        spec = _sphere(width=64)
        rows, cols, in_view, ranges = projection.sphericalRowsCols(
            np.array([[10.0, 0.0, 0.0]]), spec)
        self.assertEqual(cols[0], 32)
        self.assertTrue(in_view[0])
        self.assertEqual(ranges[0], 10.0)

    def test_pitchAtFovUp(self):
        """Testing that a point exactly at the top of the field of view lands
        in row 0.
        """

        spec = _sphere(fov_up=10.0)
        pitch = math.radians(10.0)
        point = np.array([[math.cos(pitch), 0.0, math.sin(pitch)]]) * 5.0
        result = projection.assignSpherical(point, spec)
        self.assertNotEqual(result.cell_index[0], OUT_OF_VIEW)
        self.assertEqual(result.cell_index[0] // spec.width, 0)

    def test_outOfView(self):
        spec = _sphere(fov_up=10.0, fov_down=-30.0)
        points = np.array([[0.0, 0.0, 0.0],
                           [1.0, 0.0, 5.0],
                           [1.0, 0.0, -5.0],
                           [1.0, 1.0, 0.0]])
        result = projection.assignSpherical(points, spec)
        np.testing.assert_array_equal(result.cell_index[:3], OUT_OF_VIEW)
        self.assertNotEqual(result.cell_index[3], OUT_OF_VIEW)

    def test_formulaOracle(self):
        rng = np.random.default_rng(2)
        spec = _sphere(height=32, width=128, fov_up=15.0, fov_down=-25.0)
        points = rng.normal(size=(400, 3)) * [20.0, 20.0, 3.0]
        result = projection.assignSpherical(points, spec)
        up = math.radians(15.0)
        down = math.radians(-25.0)

        for n, (x, y, z) in enumerate(points):
            r = math.sqrt(x * x + y * y + z * z)
            pitch = math.asin(z / r)
            if pitch > up + 1e-9 or pitch < down - 1e-9:
                self.assertEqual(result.cell_index[n], OUT_OF_VIEW)
                continue
            yaw = math.atan2(y, x)
            col = math.floor(0.5 * (1.0 - yaw / math.pi) * 128)
            row = math.floor((1.0 - (pitch - down) / (up - down)) * 32)
            col = min(max(col, 0), 127)
            row = min(max(row, 0), 31)
            self.assertEqual(result.cell_index[n], row * 128 + col)

    def test_closestReduction(self):
        """Testing that the closest point of a cell gets weight 1 and the
        other members 0, smaller index winning ties.
        """

        spec = _sphere(reduction='closest')
        points = np.array([[10.0, 0.0, 0.0],
                           [5.0, 0.0, 0.0],
                           [5.0, 0.0, 0.0],
                           [0.0, 8.0, 0.0]])
        result = projection.assignSpherical(points, spec)
        self.assertEqual(result.cell_index[0], result.cell_index[1])
        np.testing.assert_array_equal(result.inv_density, [0, 1, 0, 1])

    def test_meanReduction(self):
        spec = _sphere()
        points = np.array([[10.0, 0.0, 0.0], [5.0, 0.0, 0.0]])
        result = projection.assignSpherical(points, spec)
        np.testing.assert_array_equal(result.inv_density, [0.5, 0.5])


class TestFlatten(unittest.TestCase):
    """Tests for the flatten and inflate operators.
    """

    def test_singlePointCell(self):
        assign = projection.assignmentFromCells(np.array([3]), (2, 2))
        grid = projection.flattenScatter(np.array([[2.0, 4.0]]), assign)
        self.assertEqual(grid.shape, (4, 2))
        np.testing.assert_array_equal(grid[3], [2.0, 4.0])
        np.testing.assert_array_equal(grid[:3], 0.0)

    def test_sharedCellAverage(self):
        assign = projection.assignmentFromCells(np.array([1, 1]), (1, 2))
        grid = projection.flattenScatter(np.array([[1.0, 3.0], [3.0, 5.0]]),
                                         assign)
        np.testing.assert_array_equal(grid[1], [2.0, 4.0])

        points = projection.inflateGrid(grid, assign)
        np.testing.assert_array_equal(points, [[2.0, 4.0], [2.0, 4.0]])

    def test_outOfViewContributesNothing(self):
        assign = projection.assignmentFromCells(np.array([0, OUT_OF_VIEW]),
                                                (1, 1))
        features = np.array([[1.0], [100.0]])
        grid = projection.flattenScatter(features, assign)
        np.testing.assert_array_equal(grid, [[1.0]])
        np.testing.assert_array_equal(projection.inflateGrid(grid, assign),
                                      [[1.0], [0.0]])

    def test_identityLayout(self):
        """Testing that one point per cell makes the projection matrix a
        permutation matrix.
        """

        order = np.array([2, 0, 3, 1])
        assign = projection.assignmentFromCells(order, (2, 2))
        matrix = projection.projectionMatrix(assign)
        np.testing.assert_array_equal(matrix.sum(axis=0), 1.0)
        np.testing.assert_array_equal(matrix.sum(axis=1), 1.0)

        features = np.arange(8.0).reshape(4, 2)
        grid = projection.flattenMatmulOracle(features, assign)
        np.testing.assert_array_equal(grid[order], features)

    def test_singleCellMean(self):
        rng = np.random.default_rng(3)
        features = rng.normal(size=(10, 3))
        assign = projection.assignmentFromCells(np.full(10, 2), (1, 4))
        grid = projection.flattenMatmulOracle(features, assign)
        np.testing.assert_allclose(grid[2], features.mean(axis=0),
                                   atol=1e-12)
        self.assertEqual(np.count_nonzero(np.abs(grid).sum(axis=1)), 1)

    def test_oracleEquivalence(self):
        """Testing scatter, sparse and dense arms on 100 random cases with up
        to 10^4 points, 10^4 cells and 64 channels, float64. Fixed extremes
        come first; the dense matrix is kept under 2 * 10^7 elements.
        """

        rng = np.random.default_rng(4)
        cases = [(10000, (100, 20), 64), (2000, (100, 100), 64),
                 (1, (1, 1), 1)]
        while len(cases) < 100:
            grid_shape = tuple(int(v) for v in rng.integers(1, 101, 2))
            n_points = int(10 ** rng.uniform(0.0, 4.0))
            if n_points * grid_shape[0] * grid_shape[1] > 2 * 10 ** 7:
                continue
            cases.append((n_points, grid_shape, int(rng.integers(1, 65))))

        for n_points, grid_shape, channels in cases:
            assign = _randomAssignment(rng, n_points, grid_shape)
            features = rng.normal(size=(n_points, channels))
            dense = projection.flattenMatmulOracle(features, assign)
            scatter = projection.flattenScatter(features, assign)
            sparse = projection.flattenSparse(features, assign)
            self.assertLessEqual(np.abs(scatter - dense).max(), 1e-9,
                                 msg=str((n_points, grid_shape, channels)))
            self.assertLessEqual(np.abs(sparse - dense).max(), 1e-9)

    def test_inflateGatherOracle(self):
        rng = np.random.default_rng(5)
        assign = _randomAssignment(rng, 50, (3, 4))
        grid = rng.normal(size=(12, 5))
        points = projection.inflateGrid(grid, assign)
        for n, cell in enumerate(assign.cell_index):
            expected = np.zeros(5) if cell == OUT_OF_VIEW else grid[cell]
            np.testing.assert_array_equal(points[n], expected)

    def test_permutationInvariance(self):
        """Testing that permuting the points leaves the grid unchanged.
        """

        rng = np.random.default_rng(6)
        assign = _randomAssignment(rng, 100, (4, 4))
        features = rng.normal(size=(100, 6))
        order = rng.permutation(100)
        grid = projection.flattenScatter(features, assign)
        permuted = projection.flattenScatter(features[order],
                                             assign.permuted(order))
        np.testing.assert_allclose(permuted, grid, atol=1e-12)

    def test_corruptAssignment(self):
        errors = LidarMix.util.errors
        assign = projection.assignmentFromCells(np.array([0, 1]), (1, 2))
        with self.assertRaises(errors.ShapeError):
            projection.flattenScatter(np.ones((3, 2)), assign)
        with self.assertRaises(errors.ShapeError):
            projection.flattenScatter(np.ones((2, 2)), assign, cells=1)

    def test_denseCap(self):
        assign = projection.assignmentFromCells(np.arange(4), (2, 2))
        with self.assertRaises(LidarMix.util.errors.ConfigurationError):
            projection.projectionMatrix(assign, max_elements=15)

    def test_tensorFlattenInflate(self):
        """Testing the channel-first differentiable operators against the
        [N, C] kernels.
        """

        rng = np.random.default_rng(7)
        assign = _randomAssignment(rng, 30, (3, 5))
        features = rng.normal(size=(4, 30))
        grid = projection.flatten(tensor.Tensor(features), assign)
        self.assertEqual(grid.shape, (4, 3, 5))
        np.testing.assert_allclose(
            grid.data.reshape(4, -1).T,
            projection.flattenScatter(features.T, assign), atol=1e-12)

        points = projection.inflate(grid, assign)
        self.assertEqual(points.shape, (4, 30))
        np.testing.assert_allclose(
            points.data.T,
            projection.inflateGrid(grid.data.reshape(4, -1).T, assign),
            atol=1e-12)

    def test_singlePointRoundTrip(self):
        assign = projection.assignmentFromCells(np.array([0, 1, 1]), (1, 2))
        x = tensor.Tensor(np.array([[5.0, 1.0, 3.0]]))
        out = projection.inflate(projection.flatten(x, assign), assign)
        np.testing.assert_array_equal(out.data, [[5.0, 2.0, 2.0]])

    def test_flattenGradient(self):
        rng = np.random.default_rng(8)
        assign = _randomAssignment(rng, 20, (2, 3))
        error = tensor.gradCheck(lambda x: projection.flatten(x, assign),
                                 [rng.normal(size=(3, 20))])
        self.assertLess(error, 1e-8)

    def test_flattenInflateGradient(self):
        rng = np.random.default_rng(9)
        assign = _randomAssignment(rng, 25, (3, 3))
        error = tensor.gradCheck(
            lambda x: projection.inflate(projection.flatten(x, assign),
                                         assign),
            [rng.normal(size=(2, 25))])
        self.assertLess(error, 1e-8)


class TestFlattenBenchmark(unittest.TestCase):
    """Tests for the flatten timing report.
    """

    def test_noReps(self):
        report = projection.benchFlatten(100, 16, 4, 0)
        self.assertEqual(len(report), 0)
        self.assertEqual(list(report.columns), ['arm', 'N', 'HW', 'C',
                                                'millis'])

    def test_smallCase(self):
        report = projection.benchFlatten(10, 4, 3, 2, warmup=1,
                                         dtype=np.float64)
        self.assertEqual(report['arm'].tolist(),
                         ['scatter', 'sparse', 'matmul'])
        self.assertTrue((report['N'] == 10).all())
        self.assertTrue((report['HW'] == 4).all())

    def test_denseArmSkipped(self):
        with self.assertLogs(level='WARNING'):
            report = projection.benchFlatten(100, 16, 2, 1, warmup=0,
                                             max_dense_elements=100)
        self.assertNotIn('matmul', report['arm'].tolist())

    @unittest.skipUnless(os.environ.get('LIDARMIX_BENCH'),
                         'timing checks run with LIDARMIX_BENCH=1')
    def test_scatterBeatsDense(self):
        """Testing that the scatter arm's median over 20 calls is below the
        dense product's at N = 10^5, HW = 4096, C = 64 (a 1.6 GB matrix).
        """

        report = projection.benchFlatten(100000, 4096, 64, 20, warmup=3)
        millis = report.set_index('arm')['millis']
        self.assertLess(millis['scatter'], millis['matmul'])

    def test_randomAssignmentShape(self):
        assign = projection.randomAssignment(50, 12,
                                             np.random.default_rng(0))
        self.assertEqual(assign.grid_shape, (4, 3))
        self.assertTrue(assign.in_view.all())


if __name__ == '__main__':
    unittest.main()
