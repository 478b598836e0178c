from context import LidarMix

import os
import tempfile
import unittest

import numpy as np
from scipy import special

model = LidarMix.model
tensor = LidarMix.tensor
ModelConfig = model.ModelConfig


def _config(**overrides) -> ModelConfig:
    values = dict(features=8, layers=2, neighbors=4, classes=3,
                  range_height=4, range_width=16, activation='gelu')
    values.update(overrides)
    return ModelConfig.preset('toy', **values)


def _cloud(n_points: int, seed: int=0) -> LidarMix.ingest.PointCloud:
    rng = np.random.default_rng(seed)
    xyz = rng.uniform([-8, -8, -1.5], [8, 8, 3], size=(n_points, 3))
    labels = rng.integers(0, 3, n_points)
    return LidarMix.ingest.PointCloud.fromXYZI(
        np.column_stack((xyz, rng.uniform(size=n_points))), labels=labels)


def _mlp(columns, params, prefix, activation=True, name='gelu'):
    out = params[prefix + '.weight'].data @ columns + \
        params[prefix + '.bias'].data[:, None]
    if activation:
        out = tensor.activation(tensor.Tensor(out), name).data
    return out


def _zeroBackbone(params):
    for name, t in params:
        if name.startswith('layers.') and not name.endswith(('.gamma',
                                                              '.beta')):
            t.data[...] = 0.0


class TestModelConfig(unittest.TestCase):
    """Tests for configuration, presets and parameter shapes.
    """

    def test_parameterCount(self):
        """Testing the closed-form count at F = 32, L = 2, C = 4.
        """

        config = ModelConfig.preset('toy', layers=2, classes=4)
        self.assertEqual(config.features, 32)
        self.assertEqual(model.parameterCount(config), 10766)
        self.assertEqual(model.initParams(config).count(), 10766)

    def test_presetAudit(self):
        """Testing that every preset builds and its shapes are consistent.
        """

        for name in model.PRESETS:
            config = ModelConfig.preset(name)
            shapes = model.parameterShapes(config)
            f = config.features
            self.assertEqual(shapes['embed.fuse.weight'], (f, 2 * f))
            self.assertEqual(shapes['head.weight'], (config.classes, f))
            last = config.layers - 1
            self.assertEqual(
                shapes['layers.{0}.spatial.dw1.weight'.format(last)],
                (f, 3, 3))
            self.assertNotIn('layers.{0}.channel.bn.gamma'.format(
                config.layers), shapes)

    def test_fullScaleGrid(self):
        config = ModelConfig.preset('semantic-kitti')
        self.assertEqual((config.features, config.layers), (256, 48))
        specs = config.gridSpecs()
        self.assertEqual(specs['xy'].shape, (250, 250))
        self.assertEqual(specs['xz'].shape, (250, 25))
        self.assertEqual(specs['range'].shape, (64, 2048))

    def test_invalidConfigs(self):
        errors = LidarMix.util.errors
        with self.assertRaises(errors.ConfigurationError):
            _config(features=6, groups=4)
        with self.assertRaises(errors.ConfigurationError):
            _config(kernel_size=4)
        with self.assertRaises(errors.ConfigurationError):
            _config(cycle=('xy', 'polar'))
        with self.assertRaises(errors.ConfigurationError):
            _config(ignore_class=1)
        with self.assertRaises(errors.ConfigurationError):
            ModelConfig.preset('waymo')

    def test_textRoundTrip(self):
        config = _config(cycle=('xy', 'range'), head_skip=False,
                         neighbor_dropout_p=0.25)
        self.assertEqual(ModelConfig.fromText(config.toText()), config)
        with self.assertRaises(LidarMix.util.errors.ConfigurationError):
            ModelConfig.fromText('features=8\ndepth=3\n')
        with self.assertRaises(LidarMix.util.errors.ConfigurationError):
            ModelConfig.fromText('features 8\n')

    def test_differences(self):
        config = _config()
        other = config.evolve(features=16, neighbors=8)
        self.assertEqual(config.differences(other), ['features',
                                                     'neighbors'])
        self.assertEqual(config.differences(config), [])

    def test_viewCycle(self):
        config = _config(layers=6)
        self.assertEqual([config.layerView(l) for l in range(6)],
                         ['xy', 'xz', 'yz', 'range', 'xy', 'xz'])

    def test_fromParameters(self):
        config = ModelConfig.fromParameters({'preset': 'toy', 'layers': 1})
        self.assertEqual(config.name, 'toy')
        self.assertEqual(config.layers, 1)
        self.assertEqual(config.features, 32)


class TestParams(unittest.TestCase):
    """Tests for parameter initialization.
    """

    def test_sameSeed(self):
        config = _config()
        a = model.initParams(config, rng_seed=7)
        b = model.initParams(config, rng_seed=7)
        for (name, t), (_, u) in zip(a, b):
            np.testing.assert_array_equal(t.data, u.data, err_msg=name)

    def test_differentSeeds(self):
        config = _config()
        a = model.initParams(config, rng_seed=1)
        b = model.initParams(config, rng_seed=2)
        self.assertFalse(np.array_equal(a['head.weight'].data,
                                        b['head.weight'].data))

    def test_initRanges(self):
        params = model.initParams(_config())
        np.testing.assert_array_equal(params['embed.neighbor.bn.gamma'].data,
                                      1.0)
        np.testing.assert_array_equal(params['layers.1.channel.bn.beta'].data,
                                      0.0)
        self.assertLessEqual(np.abs(params['embed.fuse.weight'].data).max(),
                             1.0 / 4.0)
        self.assertLessEqual(np.abs(params['layers.0.spatial.dw1.weight']
                                    .data).max(), 1.0 / 3.0)
        mean, var = params.runningStats('layers.0.spatial.bn')
        np.testing.assert_array_equal(mean, 0.0)
        np.testing.assert_array_equal(var, 1.0)

    def test_copyIsDeep(self):
        params = model.initParams(_config())
        clone = params.copy()
        clone['head.bias'].data[...] = 5.0
        clone.buffers['embed.neighbor.bn.running_mean'][...] = 5.0
        self.assertFalse(np.any(params['head.bias'].data == 5.0))
        self.assertFalse(np.any(
            params.buffers['embed.neighbor.bn.running_mean'] == 5.0))

    def test_float32(self):
        params = model.initParams(_config(), dtype=np.float32)
        self.assertEqual(params.dtype, np.float32)
        self.assertEqual(params.astype(np.float64).dtype, np.float64)


class TestEmbedding(unittest.TestCase):
    """Tests for the point cloud embedding.
    """

    def test_singleNeighborIsSelf(self):
        """Testing K = 1: the neighbor branch is a per-point MLP of the point's
        own raw features.
        """

        config = _config(neighbors=1)
        params = model.initParams(config, rng_seed=3)
        prepared = model.prepare(_cloud(40), config)
        np.testing.assert_array_equal(prepared.neighbors[0], np.arange(40))

        out = model.embed(prepared, params, mode='eval')
        raw = prepared.features
        normed = raw / np.sqrt(1.0 + 1e-5)
        expected = _mlp(_mlp(normed, params, 'embed.neighbor.conv1'),
                        params, 'embed.neighbor.conv2', activation=False)
        np.testing.assert_allclose(out.neighbor_embedding.data, expected,
                                   atol=1e-12)

    def test_neighborOrderInvariance(self):
        """Testing that reordering the K neighbor slots leaves P2 unchanged.
        """

        config = _config()
        params = model.initParams(config, rng_seed=4)
        prepared = model.prepare(_cloud(60), config)
        shuffled = LidarMix.model.PreparedCloud(
            features=prepared.features,
            neighbors=prepared.neighbors[[3, 1, 0, 2]],
            assignments=prepared.assignments)

        a = model.embed(prepared, params).neighbor_embedding.data
        b = model.embed(shuffled, params).neighbor_embedding.data
        np.testing.assert_allclose(a, b, rtol=0, atol=1e-12)

    def test_bruteForceOracle(self):
        """Testing the embedding of a 100-point cloud against a loop
        implementation over brute-force neighbors.
        """

        config = _config(neighbors=5, activation='relu')
        params = model.initParams(config, rng_seed=5)
        cloud = _cloud(100, seed=1)
        prepared = model.prepare(cloud, config)
        out = model.embed(prepared, params, mode='eval')

        knn = LidarMix.spatial.bruteForceKnn(cloud.xyz, cloud.xyz, 5)
        raw = cloud.points
        expected_p2 = np.empty((8, 100))
        for n in range(100):
            stacked = raw[knn.indices[n]].T / np.sqrt(1.0 + 1e-5)
            hidden = _mlp(stacked, params, 'embed.neighbor.conv1',
                          name='relu')
            pooled = _mlp(hidden, params, 'embed.neighbor.conv2',
                          activation=False)
            expected_p2[:, n] = pooled.max(axis=1)

        p1 = _mlp(raw.T, params, 'embed.stem', activation=False)
        expected = _mlp(np.vstack((p1, expected_p2)), params, 'embed.fuse',
                        activation=False)
        np.testing.assert_allclose(out.neighbor_embedding.data, expected_p2,
                                   atol=1e-10)
        np.testing.assert_allclose(out.features.data, expected, atol=1e-10)

    def test_relativeNeighbors(self):
        """Testing that relative neighbor features of the point itself are
        zero, so K = 1 gives a constant neighbor branch.
        """

        config = _config(neighbors=1, relative_neighbors=True)
        params = model.initParams(config, rng_seed=6)
        out = model.embed(model.prepare(_cloud(20), config), params)
        p2 = out.neighbor_embedding.data
        np.testing.assert_allclose(p2, p2[:, :1].repeat(20, axis=1),
                                   atol=1e-14)

    def test_excludeSelf(self):
        config = _config(neighbors=2, exclude_self=True)
        prepared = model.prepare(_cloud(30), config)
        self.assertFalse(np.any(prepared.neighbors == np.arange(30)))

    def test_neighborDropoutOnlyInTrain(self):
        config = _config(neighbor_dropout_p=0.5)
        params = model.initParams(config)
        prepared = model.prepare(_cloud(50), config)
        a = model.embed(prepared, params, mode='eval').features.data
        b = model.embed(prepared, params, mode='eval').features.data
        np.testing.assert_array_equal(a, b)
        c = model.embed(prepared, params.copy(), mode='train', rng=0)
        d = model.embed(prepared, params.copy(), mode='train', rng=0)
        np.testing.assert_array_equal(c.features.data, d.features.data)


class TestBackbone(unittest.TestCase):
    """Tests for the spatial and channel mixing blocks and the full model.
    """

    def test_residualIdentity(self):
        """Testing that zero weights and biases make both blocks the
        identity.
        """

        config = _config()
        params = model.initParams(config)
        _zeroBackbone(params)
        prepared = model.prepare(_cloud(30), config)
        x = tensor.Tensor(np.random.default_rng(0).normal(size=(8, 30)))

        for view in ('xy', 'range'):
            out = model.spatialMix(x, prepared.assignments[view], params, 0,
                                   mode='train')
            np.testing.assert_array_equal(out.data, x.data)
        out = model.channelMix(x, params, 1, mode='train')
        np.testing.assert_array_equal(out.data, x.data)

    def test_channelMixSinglePoint(self):
        """Testing that a single point in eval mode is a plain MLP of that
        point.
        """

        config = _config()
        params = model.initParams(config, rng_seed=8)
        x = np.random.default_rng(1).normal(size=(8, 1))
        out = model.channelMix(tensor.Tensor(x), params, 0, mode='eval')

        h = _mlp(x / np.sqrt(1.0 + 1e-5), params, 'layers.0.channel.conv')
        h = params['layers.0.channel.dw.weight'].data[:, None] * h + \
            params['layers.0.channel.dw.bias'].data[:, None]
        np.testing.assert_allclose(out.data, x + h, atol=1e-12)

    def test_collapsedBackbone(self):
        """Testing that a zeroed single-layer backbone makes the logits the
        head applied to Pe + P2.
        """

        config = _config(layers=1)
        params = model.initParams(config, rng_seed=9)
        _zeroBackbone(params)
        prepared = model.prepare(_cloud(25), config)

        embedding = model.embed(prepared, params)
        logits = model.forward(prepared, params)
        expected = _mlp(embedding.features.data +
                        embedding.neighbor_embedding.data, params, 'head',
                        activation=False)
        np.testing.assert_allclose(logits.data, expected, atol=1e-12)

    def test_headSkipIsLive(self):
        config = _config(layers=1)
        params = model.initParams(config, rng_seed=10)
        prepared = model.prepare(_cloud(25), config)
        with_skip = model.forward(prepared, params).data

        no_skip_config = config.evolve(head_skip=False)
        no_skip = model.ModelParams(no_skip_config, params.tensors,
                                    params.buffers)
        without = model.forward(prepared, no_skip).data
        self.assertGreater(np.abs(with_skip - without).max(), 1e-6)

    def test_permutationEquivariance(self):
        """Testing that permuting the input cloud permutes the logits.
        """

        config = _config(layers=4)
        params = model.initParams(config, rng_seed=11)
        cloud = _cloud(300, seed=2)
        order = np.random.default_rng(3).permutation(300)

        logits = model.forward(model.prepare(cloud, config), params).data
        permuted = model.forward(model.prepare(cloud.select(order), config),
                                 params).data
        np.testing.assert_allclose(permuted, logits[:, order], atol=1e-10)

        classes, probabilities = model.predict(
            model.prepare(cloud, config), params)
        np.testing.assert_array_equal(classes, np.argmax(logits, axis=0))
        np.testing.assert_allclose(probabilities,
                                   special.softmax(logits, axis=0))
        np.testing.assert_allclose(probabilities.sum(axis=0), 1.0)

    def test_preparedPermutation(self):
        """Testing that permuting a prepared cloud matches preparing the
        permuted cloud.
        """

        config = _config()
        cloud = _cloud(80, seed=4)
        order = np.random.default_rng(5).permutation(80)
        direct = model.prepare(cloud.select(order), config)
        permuted = model.prepare(cloud, config).permuted(order)
        np.testing.assert_array_equal(direct.neighbors, permuted.neighbors)
        np.testing.assert_array_equal(direct.labels, permuted.labels)
        for view in config.cycle:
            np.testing.assert_array_equal(
                direct.assignments[view].cell_index,
                permuted.assignments[view].cell_index)

    def test_stopwatchPhases(self):
        config = _config(layers=1)
        stopwatch = LidarMix.util.Stopwatch()
        model.forward(model.prepare(_cloud(20), config),
                      model.initParams(config), stopwatch=stopwatch)
        self.assertEqual(list(stopwatch.millis), ['embed', 'backbone',
                                                  'head'])


class TestModelGradients(unittest.TestCase):
    """Finite-difference checks of the blocks and the full model, float64.
    """

    def test_spatialMix(self):
        config = _config()
        params = model.initParams(config, rng_seed=12)
        prepared = model.prepare(_cloud(30), config)
        assignment = prepared.assignments['xy']
        x = np.random.default_rng(6).normal(size=(8, 30))

        error = tensor.gradCheck(
            lambda t: model.spatialMix(t, assignment, params, 0,
                                       mode='train'), [x])
        self.assertLess(error, 1e-4)

    def test_channelMix(self):
        config = _config()
        params = model.initParams(config, rng_seed=13)
        x = np.random.default_rng(7).normal(size=(8, 20))
        error = tensor.gradCheck(
            lambda t: model.channelMix(t, params, 1, mode='train'), [x])
        self.assertLess(error, 1e-4)

    def test_fullModel(self):
        """Testing parameter gradients of the whole network, F = 8, L = 2,
        N = 25.
        """

        config = _config()
        params = model.initParams(config, rng_seed=14)
        prepared = model.prepare(_cloud(25), config)

        for name in ('embed.stem.weight', 'layers.0.spatial.dw1.weight',
                     'layers.1.spatial.proj.bias', 'head.weight'):
            def op(t, name=name):
                params.tensors[name] = t
                return model.forward(prepared, params, mode='train')

            original = params[name]
            error = tensor.gradCheck(op, [original.data])
            params.tensors[name] = original
            self.assertLess(error, 1e-4, msg=name)


class TestCheckpoint(unittest.TestCase):
    """Tests for checkpoint files.
    """

    def setUp(self):
        self.folder = tempfile.TemporaryDirectory()
        self.path = self.folder.name + '/model.ckpt'

    def tearDown(self):
        self.folder.cleanup()

    def test_roundTrip(self):
        """Testing that a reloaded checkpoint gives the same parameters (as
        float32) and the same predictions.
        """

        config = _config()
        params = model.initParams(config, rng_seed=15, dtype=np.float32)
        params.buffers['layers.0.spatial.bn.running_var'][...] = 2.5
        model.saveCheckpoint(self.path, params)

        loaded = model.loadCheckpoint(self.path, expected_config=config,
                                      dtype=np.float32)
        self.assertEqual(loaded.config, config)
        for (name, t), (_, u) in zip(params, loaded):
            np.testing.assert_array_equal(t.data, u.data, err_msg=name)
        np.testing.assert_array_equal(
            loaded.buffers['layers.0.spatial.bn.running_var'], 2.5)
        self.assertEqual(model.readCheckpointConfig(self.path), config)

        prepared = model.prepare(_cloud(30), config, dtype=np.float32)
        np.testing.assert_array_equal(model.predict(prepared, params)[0],
                                      model.predict(prepared, loaded)[0])

    def test_configMismatch(self):
        config = _config()
        model.saveCheckpoint(self.path, model.initParams(config))
        with self.assertRaises(LidarMix.util.errors.ConfigurationError) \
                as context:
            model.loadCheckpoint(self.path,
                                 expected_config=config.evolve(layers=3))
        self.assertIn('layers', str(context.exception))

    def test_badMagic(self):
        with open(self.path, 'wb') as handle:
            handle.write(b'NOTACKPT' + bytes(16))
        with self.assertRaises(LidarMix.util.errors.FormatError):
            model.loadCheckpoint(self.path)

    def test_truncated(self):
        model.saveCheckpoint(self.path, model.initParams(_config()))
        with open(self.path, 'rb') as handle:
            payload = handle.read()
        with open(self.path, 'wb') as handle:
            handle.write(payload[:-10])
        with self.assertRaises(LidarMix.util.errors.FormatError):
            model.loadCheckpoint(self.path)


class TestRealScan(unittest.TestCase):
    """Published configuration on a real scan.
    """

    @unittest.skipUnless(os.environ.get('LIDARMIX_DATA_DIR'),
                         'needs a SemanticKITTI dataset')
    def test_publishedConfigForward(self):
        config = ModelConfig.preset('semantic-kitti')
        point_file, _ = LidarMix.ingest.listScans(
            os.environ['LIDARMIX_DATA_DIR'], '08')[0]
        cloud = LidarMix.ingest.readPointFile(point_file)
        reduced, _ = LidarMix.ingest.preprocess(
            cloud, LidarMix.ingest.PreprocessConfig())

        params = model.initParams(config, dtype=np.float32)
        prepared = model.prepare(reduced, config, dtype=np.float32)
        logits = model.forward(prepared, params, mode='eval')
        self.assertEqual(logits.shape, (19, len(reduced)))
        self.assertTrue(np.all(np.isfinite(logits.data)))


if __name__ == '__main__':
    unittest.main()
