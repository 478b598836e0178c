from context import LidarMix

import unittest

import numpy as np

train = LidarMix.train


class TestConfusionMatrix(unittest.TestCase):
    """Tests for confusion counts, IoU and mIoU.
    """

    def test_iouFormula(self):
        """Testing TP = 5, FP = 3, FN = 2 for class 0, giving IoU 0.5.
        """

        labels = np.array([0] * 5 + [1] * 3 + [0] * 2)
        predictions = np.array([0] * 5 + [0] * 3 + [1] * 2)
        cm = train.ConfusionMatrix(2).add(labels, predictions)
        self.assertEqual((cm.tp[0], cm.fp[0], cm.fn[0]), (5, 3, 2))
        self.assertEqual(train.iouPerClass(cm)[0], 0.5)

    def test_perfectPrediction(self):
        labels = np.array([0, 1, 1, 0, 255])
        cm = train.ConfusionMatrix(3).add(labels, np.array([0, 1, 1, 0, 2]))
        iou = train.iouPerClass(cm)
        np.testing.assert_array_equal(iou[:2], [1.0, 1.0])
        self.assertTrue(np.isnan(iou[2]))
        self.assertEqual(train.miou(cm), 1.0)
        self.assertEqual(cm.total(), 4)
        self.assertEqual(cm.pointAccuracy(), 1.0)

    def test_setIntersectionOracle(self):
        """Testing 1000 random labels and predictions over 4 classes against
        per-class set arithmetic.
        """

        rng = np.random.default_rng(0)
        labels = rng.integers(0, 4, 1000)
        labels[rng.random(1000) < 0.1] = 255
        predictions = rng.integers(0, 4, 1000)
        cm = train.ConfusionMatrix(4).add(labels, predictions)

        scored = labels != 255
        expected = []
        for c in range(4):
            truth = set(np.flatnonzero(scored & (labels == c)))
            predicted = set(np.flatnonzero(scored & (predictions == c)))
            expected.append(len(truth & predicted) / len(truth | predicted))
        np.testing.assert_allclose(train.iouPerClass(cm), expected,
                                   rtol=1e-15)
        self.assertAlmostEqual(train.miou(cm), np.mean(expected), places=15)

    def test_relabelInvariance(self):
        """Testing that renaming classes consistently permutes the IoUs and
        keeps the mIoU.
        """

        rng = np.random.default_rng(1)
        labels = rng.integers(0, 4, 500)
        predictions = rng.integers(0, 4, 500)
        mapping = np.array([2, 0, 3, 1])

        cm = train.ConfusionMatrix(4).add(labels, predictions)
        renamed = train.ConfusionMatrix(4).add(mapping[labels],
                                               mapping[predictions])
        np.testing.assert_allclose(train.iouPerClass(renamed)[mapping],
                                   train.iouPerClass(cm))
        self.assertAlmostEqual(train.miou(renamed), train.miou(cm),
                               places=14)

    def test_accumulation(self):
        """Testing that summed matrices equal one matrix over the
        concatenation.
        """

        rng = np.random.default_rng(2)
        labels = rng.integers(0, 3, 200)
        predictions = rng.integers(0, 3, 200)
        whole = train.ConfusionMatrix(3).add(labels, predictions)
        parts = train.ConfusionMatrix(3).add(labels[:80], predictions[:80]) + \
            train.ConfusionMatrix(3).add(labels[80:], predictions[80:])
        np.testing.assert_array_equal(parts.counts, whole.counts)

    def test_noClassPresent(self):
        cm = train.ConfusionMatrix(3).add(np.array([255, 255]),
                                          np.array([0, 1]))
        with self.assertRaises(ValueError):
            train.miou(cm)

    def test_outOfRangeIds(self):
        with self.assertRaises(ValueError):
            train.ConfusionMatrix(3).add(np.array([0, 3]), np.array([0, 1]))
        with self.assertRaises(ValueError):
            train.ConfusionMatrix(3).add(np.array([0, 1]), np.array([0, 5]))
        with self.assertRaises(ValueError):
            train.ConfusionMatrix(3).add(np.array([0]), np.array([0, 1]))

    def test_report(self):
        labels = np.array([0, 0, 1, 1])
        predictions = np.array([0, 1, 1, 1])
        cm = train.ConfusionMatrix(2).add(labels, predictions)
        report = train.metricsReport(cm, ['ground', 'box'])
        self.assertEqual(report['class'].tolist(),
                         ['ground', 'box', 'miou', 'accuracy'])
        self.assertEqual(list(report.columns),
                         ['class', 'tp', 'fp', 'fn', 'iou'])
        np.testing.assert_allclose(report['iou'], [0.5, 2.0 / 3.0,
                                                   7.0 / 12.0, 0.75])


if __name__ == '__main__':
    unittest.main()
