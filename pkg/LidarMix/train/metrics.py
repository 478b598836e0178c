import logging

import numpy as np
import pandas as pd


class ConfusionMatrix:
    def __init__(self, classes: int, ignore_class: int=255,
                 counts: np.ndarray=None):
        """C x C point counts, rows indexed by ground truth and columns by
        prediction. Points whose ground truth is the ignore class are never
        counted.

        Arguments:
            classes {int} -- Class count C.

        Keyword Arguments:
            ignore_class {int} -- Excluded ground-truth id (default: {255}).
            counts {np.ndarray} -- Initial counts (default: {None}, zeros).
        """

        self.classes = classes
        self.ignore_class = ignore_class
        self.counts = np.zeros((classes, classes), dtype=np.int64) \
            if counts is None else np.asarray(counts, dtype=np.int64)

    def add(self, labels: np.ndarray, predictions: np.ndarray) \
            -> 'ConfusionMatrix':
        """Accumulates one labeled prediction.

        Arguments:
            labels {np.ndarray} -- [N] ground-truth ids or the ignore class.
            predictions {np.ndarray} -- [N] predicted ids in [0, C).

        Raises:
            ValueError -- Raised for mismatched lengths or ids out of range.

        Returns:
            ConfusionMatrix -- self.
        """

        labels = np.asarray(labels, dtype=np.int64)
        predictions = np.asarray(predictions, dtype=np.int64)
        if labels.shape != predictions.shape:
            raise ValueError('{0} labels vs {1} predictions'
                             .format(labels.shape, predictions.shape))

        keep = labels != self.ignore_class
        labels = labels[keep]
        predictions = predictions[keep]
        for name, ids in (('label', labels), ('prediction', predictions)):
            if ids.size and (ids.min() < 0 or ids.max() >= self.classes):
                logging.error('{0} ids outside [0, {1})'
                              .format(name, self.classes))
                raise ValueError('{0} ids outside [0, {1})'
                                 .format(name, self.classes))

        self.counts += np.bincount(
            labels * self.classes + predictions,
            minlength=self.classes ** 2).reshape(self.classes, self.classes)
        return self

    def __add__(self, other: 'ConfusionMatrix') -> 'ConfusionMatrix':
        return ConfusionMatrix(self.classes, self.ignore_class,
                               self.counts + other.counts)

    @property
    def tp(self) -> np.ndarray:
        return np.diag(self.counts)

    @property
    def fp(self) -> np.ndarray:
        return self.counts.sum(axis=0) - self.tp

    @property
    def fn(self) -> np.ndarray:
        return self.counts.sum(axis=1) - self.tp

    def total(self) -> int:
        return int(self.counts.sum())

    def pointAccuracy(self) -> float:
        total = self.total()
        return float(self.tp.sum()) / total if total else float('nan')


def iouPerClass(cm: ConfusionMatrix) -> np.ndarray:
    """IoU = TP / (TP + FP + FN) per class; classes with a zero denominator
    are absent and reported as NaN.
    """

    denominator = (cm.tp + cm.fp + cm.fn).astype(np.float64)
    iou = np.full(cm.classes, np.nan)
    present = denominator > 0
    iou[present] = cm.tp[present] / denominator[present]
    return iou


def miou(cm: ConfusionMatrix) -> float:
    """Mean IoU over the present classes.

    Raises:
        ValueError -- Raised when no class is present.
    """

    iou = iouPerClass(cm)
    if np.all(np.isnan(iou)):
        logging.error('mIoU undefined: no class is present')
        raise ValueError('mIoU undefined: no class is present')
    return float(np.nanmean(iou))


def metricsReport(cm: ConfusionMatrix, names: list=None) -> pd.DataFrame:
    """Per-class table `class,tp,fp,fn,iou` followed by a `miou` row (its
    `iou` column holds the mean) and an `accuracy` row.
    """

    names = [str(c) for c in range(cm.classes)] if names is None else names
    report = pd.DataFrame({
        'class': names,
        'tp': cm.tp,
        'fp': cm.fp,
        'fn': cm.fn,
        'iou': iouPerClass(cm)
    })
    summary = pd.DataFrame({
        'class': ['miou', 'accuracy'],
        'tp': [cm.tp.sum()] * 2,
        'fp': [cm.fp.sum()] * 2,
        'fn': [cm.fn.sum()] * 2,
        'iou': [miou(cm), cm.pointAccuracy()]
    })
    return pd.concat([report, summary], ignore_index=True)
