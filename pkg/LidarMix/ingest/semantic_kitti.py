from .point_cloud import PointCloud, INTENSITY
from ..util.errors import FormatError

import glob
import logging
import os

import numpy as np
import yaml


POINT_RECORD = np.dtype('<f4')
POINT_RECORD_BYTES = 16
LABEL_RECORD = np.dtype('<u4')
SEMANTIC_MASK = 0xFFFF
IGNORE_RAW_ID = 0


def readPointRows(path: str) -> (PointCloud, np.ndarray):
    """Function to read a SemanticKITTI point file: a sequence of
    little-endian (x, y, z, intensity) float32 records. The range column is
    computed, point order is preserved, rows with non-finite values are
    dropped and intensities outside [0, 1] are clamped (both with a warning).

    Arguments:
        path {str} -- Path of the `.bin` point file.

    Raises:
        FormatError -- Raised when the file is truncated mid-record.

    Returns:
        (PointCloud, np.ndarray) -- Parsed point cloud, and a boolean mask
            over the rows of the file marking the rows it holds.
    """

    with open(path, 'rb') as point_file:
        raw = point_file.read()

    remainder = len(raw) % POINT_RECORD_BYTES
    if remainder != 0:
        offset = len(raw) - remainder
        logging.error('Point file {0} truncated at byte offset {1}'
                      .format(path, offset))
        raise FormatError('Truncated point file {0}: {1} trailing bytes at '
                          'byte offset {2}'.format(path, remainder, offset))

    xyzi = np.frombuffer(raw, dtype=POINT_RECORD).reshape(-1, 4)
    xyzi = xyzi.astype(np.float64)

    finite = np.isfinite(xyzi).all(axis=1)
    dropped = int(np.count_nonzero(~finite))
    if dropped > 0:
        logging.warning('Dropped {0} non-finite rows from {1}'
                        .format(dropped, path))
        xyzi = xyzi[finite]

    outside = (xyzi[:, 3] < 0.0) | (xyzi[:, 3] > 1.0)
    clamped = int(np.count_nonzero(outside))
    if clamped > 0:
        logging.warning('Clamped {0} intensities outside [0, 1] in {1}'
                        .format(clamped, path))
        xyzi[:, 3] = np.clip(xyzi[:, 3], 0.0, 1.0)

    logging.info('Read {0} points from {1}'.format(xyzi.shape[0], path))

    return PointCloud.fromXYZI(xyzi), finite


def readPointFile(path: str) -> PointCloud:
    return readPointRows(path)[0]


def writePointFile(path: str, cloud: PointCloud):
    """Function to write a cloud in the SemanticKITTI point layout. The range
    column is not stored.

    Arguments:
        path {str} -- Output path.
        cloud {PointCloud} -- Cloud to write.
    """

    columns = np.column_stack((cloud.xyz, cloud.points[:, INTENSITY]))
    with open(path, 'wb') as point_file:
        point_file.write(columns.astype(POINT_RECORD).tobytes())


def readRawLabels(path: str, n_points: int=None) -> np.ndarray:
    """Function to read the raw uint32 values of a SemanticKITTI label file.

    Arguments:
        path {str} -- Path of the `.label` file.

    Keyword Arguments:
        n_points {int} -- Expected number of labels (default: {None}).

    Raises:
        FormatError -- Raised on a partial record or a count mismatch.

    Returns:
        np.ndarray -- Raw label values.
    """

    with open(path, 'rb') as label_file:
        raw = label_file.read()

    if len(raw) % LABEL_RECORD.itemsize != 0:
        raise FormatError('Truncated label file {0}: {1} bytes is not a '
                          'multiple of 4'.format(path, len(raw)))

    labels = np.frombuffer(raw, dtype=LABEL_RECORD).astype(np.uint32)

    if n_points is not None and labels.size != n_points:
        logging.error('Label file {0} has {1} labels, expected {2}'
                      .format(path, labels.size, n_points))
        raise FormatError('Label count mismatch for {0}: expected {1}, '
                          'actual {2}'.format(path, n_points, labels.size))

    return labels


def writeRawLabels(path: str, raw_labels: np.ndarray):
    with open(path, 'wb') as label_file:
        label_file.write(np.asarray(raw_labels).astype(LABEL_RECORD).tobytes())


def readLabelFile(path: str, n_points: int, remap: 'LabelRemap',
                  kept: np.ndarray=None) -> np.ndarray:
    """Function to read a SemanticKITTI label file and map the lower 16 bits
    of every value to a training id.

    Arguments:
        path {str} -- Path of the `.label` file.
        n_points {int} -- Number of rows of the matching point file.
        remap {LabelRemap} -- Raw id -> training id table.

    Keyword Arguments:
        kept {np.ndarray} -- Row mask from `readPointRows`; labels of dropped
            rows are removed (default: {None}, keep all).

    Returns:
        np.ndarray -- Training ids, the ignore class for unknown raw ids.
    """

    labels = remap.toTrain(readRawLabels(path, n_points=n_points))
    if kept is not None:
        labels = labels[kept]
    return labels


def expandLabels(labels: np.ndarray, kept: np.ndarray,
                 fill: int) -> np.ndarray:
    """Function to lay labels of the kept rows back over every row of the
    point file, `fill` marking the dropped rows.
    """

    full = np.full(kept.size, fill, dtype=np.int64)
    full[kept] = labels
    return full


def writeLabelFile(path: str, labels: np.ndarray, remap: 'LabelRemap'):
    """Function to write training ids as a SemanticKITTI label file, mapping
    them back to raw semantic ids (instance bits are zero).
    """

    writeRawLabels(path, remap.toRaw(labels))


class LabelRemap:
    def __init__(self, table: dict, ignore_class: int=255,
                 inverse: dict=None, names: dict=None):
        """Lookup table between raw SemanticKITTI semantic ids and training
        ids.

        Arguments:
            table {dict} -- Raw semantic id -> training id.

        Keyword Arguments:
            ignore_class {int} -- Training id of ignored points
                (default: {255}).
            inverse {dict} -- Training id -> raw id used for export; by
                default the first raw id listed for each training id
                (default: {None}).
            names {dict} -- Optional raw id -> class name (default: {None}).
        """

        self.ignore_class = ignore_class
        self.names = names or {}

        self.forward = np.full(SEMANTIC_MASK + 1, ignore_class, dtype=np.int64)
        self.known = np.zeros(SEMANTIC_MASK + 1, dtype=bool)
        for raw_id, train_id in table.items():
            self.forward[int(raw_id)] = int(train_id)
            self.known[int(raw_id)] = True

        if inverse is None:
            inverse = {}
            for raw_id, train_id in table.items():
                if int(train_id) != ignore_class:
                    inverse.setdefault(int(train_id), int(raw_id))
        self.inverse = {int(k): int(v) for k, v in inverse.items()}
        self.inverse[ignore_class] = IGNORE_RAW_ID

        self.class_count = max([k for k in self.inverse
                                if k != ignore_class], default=-1) + 1

    @classmethod
    def fromFile(cls, path: str, ignore_class: int=255) -> 'LabelRemap':
        """Loads a remap table from a plain-text file of `raw_id train_id`
        lines (`#` comments allowed) or from a SemanticKITTI YAML file with a
        `learning_map` (and optionally `learning_map_inv` and `labels`).

        Arguments:
            path {str} -- Table path.

        Keyword Arguments:
            ignore_class {int} -- Training id of ignored points
                (default: {255}).

        Raises:
            FormatError -- Raised for malformed lines.

        Returns:
            LabelRemap -- Parsed table.
        """

        if os.path.splitext(path)[1] in ('.yaml', '.yml'):
            with open(path) as yaml_file:
                document = yaml.safe_load(yaml_file)
            table = document['learning_map']
            # SemanticKITTI maps ignored classes to 0 and counts from 1
            inverse = document.get('learning_map_inv')
            if 0 in set(table.values()) and inverse is not None:
                table = {k: (ignore_class if v == 0 else v - 1)
                         for k, v in table.items()}
                inverse = {k - 1: v for k, v in inverse.items() if k != 0}
            return cls(table, ignore_class=ignore_class, inverse=inverse,
                       names=document.get('labels'))

        table = {}
        with open(path) as text_file:
            for line_number, line in enumerate(text_file, start=1):
                line = line.split('#', 1)[0].strip()
                if not line:
                    continue
                fields = line.split()
                if len(fields) != 2:
                    raise FormatError('Remap table {0} line {1}: expected '
                                      '"raw_id train_id", got "{2}"'
                                      .format(path, line_number, line))
                table[int(fields[0])] = int(fields[1])

        logging.info('Loaded {0} remap entries from {1}'
                     .format(len(table), path))

        return cls(table, ignore_class=ignore_class)

    def toTrain(self, raw_labels: np.ndarray) -> np.ndarray:
        semantic = np.asarray(raw_labels, dtype=np.uint32) & SEMANTIC_MASK
        unknown = ~self.known[semantic]
        if unknown.any():
            logging.warning('Mapped {0} labels with unknown raw ids {1} to '
                            'the ignore class'.format(
                                int(np.count_nonzero(unknown)),
                                np.unique(semantic[unknown]).tolist()))
        return self.forward[semantic]

    def toRaw(self, train_labels: np.ndarray) -> np.ndarray:
        train_labels = np.asarray(train_labels, dtype=np.int64)
        unknown = np.setdiff1d(np.unique(train_labels),
                               list(self.inverse.keys()))
        if unknown.size > 0:
            raise FormatError('Training ids {0} have no raw id'
                              .format(unknown.tolist()))
        lookup = np.zeros(int(train_labels.max(initial=0)) + 1,
                          dtype=np.uint32)
        for train_id, raw_id in self.inverse.items():
            if train_id < lookup.size:
                lookup[train_id] = raw_id
        return lookup[train_labels]


def listScans(data_dir: str, sequence: str) -> list:
    """Function to list the (point file, label file) pairs of one
    SemanticKITTI sequence (`sequences/<seq>/velodyne/*.bin` and
    `sequences/<seq>/labels/*.label`). Missing label files yield `None`.

    Arguments:
        data_dir {str} -- Dataset root.
        sequence {str} -- Sequence id, e.g. `08`.

    Returns:
        list -- Sorted list of (point path, label path or None) tuples.
    """

    sequence_dir = os.path.join(data_dir, 'sequences',
                                '{0:0>2}'.format(sequence))
    point_files = sorted(glob.glob(os.path.join(sequence_dir, 'velodyne',
                                                '*.bin')))
    scans = []
    for point_file in point_files:
        stem = os.path.splitext(os.path.basename(point_file))[0]
        label_file = os.path.join(sequence_dir, 'labels', stem + '.label')
        scans.append((point_file,
                      label_file if os.path.exists(label_file) else None))

    logging.info('Found {0} scans in {1}'.format(len(scans), sequence_dir))

    return scans
