import attr
import numpy as np

from ..util.errors import ShapeError


# Column layout of `PointCloud.points`
X, Y, Z, INTENSITY, RANGE = range(5)
FEATURE_COUNT = 5


def _checkPoints(instance, attribute, value):
    if value.ndim != 2 or value.shape[1] != FEATURE_COUNT:
        raise ShapeError('PointCloud.points must be [N, 5], got {0}'
                         .format(value.shape))


def _checkLabels(instance, attribute, value):
    if value is not None and value.shape != (instance.points.shape[0],):
        raise ShapeError('PointCloud.labels must have {0} entries, got {1}'
                         .format(instance.points.shape[0], value.shape))


@attr.s(frozen=True, eq=False)
class PointCloud:
    """N points with 5 features each (x, y, z, intensity, range) and optional
    per-point training labels. Instances are never mutated; every operation
    returns a new cloud.
    """

    points = attr.ib(converter=lambda a: np.asarray(a, dtype=np.float64),
                     validator=_checkPoints)
    labels = attr.ib(default=None,
                     converter=attr.converters.optional(
                         lambda a: np.asarray(a, dtype=np.int64)),
                     validator=_checkLabels)

    @classmethod
    def fromXYZI(cls, xyzi: np.ndarray, labels: np.ndarray=None) \
            -> 'PointCloud':
        """Builds a cloud from [N, 4] (x, y, z, intensity) rows, computing the
        range column as the Euclidean norm of (x, y, z).

        Arguments:
            xyzi {np.ndarray} -- [N, 4] array.

        Keyword Arguments:
            labels {np.ndarray} -- Optional per-point labels (default: {None}).

        Returns:
            PointCloud -- New point cloud.
        """

        xyzi = np.asarray(xyzi, dtype=np.float64).reshape(-1, 4)
        ranges = np.linalg.norm(xyzi[:, :3], axis=1)
        return cls(points=np.column_stack((xyzi, ranges)), labels=labels)

    def __len__(self) -> int:
        return self.points.shape[0]

    @property
    def xyz(self) -> np.ndarray:
        return self.points[:, :3]

    @property
    def intensity(self) -> np.ndarray:
        return self.points[:, INTENSITY]

    @property
    def range(self) -> np.ndarray:
        return self.points[:, RANGE]

    def select(self, index: np.ndarray) -> 'PointCloud':
        """Returns the sub-cloud given by an integer index or boolean mask,
        keeping labels aligned.
        """

        labels = None if self.labels is None else self.labels[index]
        return PointCloud(points=self.points[index], labels=labels)

    def withXYZ(self, xyz: np.ndarray) -> 'PointCloud':
        """Returns a cloud with replaced coordinates and a recomputed range
        column; intensity and labels are untouched.
        """

        xyzi = np.column_stack((xyz, self.intensity))
        return PointCloud.fromXYZI(xyzi, labels=self.labels)

    def withLabels(self, labels: np.ndarray) -> 'PointCloud':
        return PointCloud(points=self.points, labels=labels)
