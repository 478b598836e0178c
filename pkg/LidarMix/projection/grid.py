from ..ingest.point_cloud import PointCloud
from ..util.errors import ConfigurationError

import math

import attr
import numpy as np


# Flat cell index of points outside the view
OUT_OF_VIEW = -1

KINDS = ('planar', 'spherical')
REDUCTIONS = ('mean', 'closest')

# Pitch slack so points exactly on the field-of-view edges stay in view
_PITCH_TOLERANCE = 1e-9
_MIN_RANGE = 1e-6


def _positive(instance, attribute, value):
    if not value > 0:
        raise ConfigurationError('{0} must be > 0, got {1}'
                                 .format(attribute.name, value))


def _pair(value) -> tuple:
    return tuple(float(v) for v in value)


@attr.s(frozen=True)
class GridSpec:
    """Parameters of one 2D view.

    A `planar` grid projects onto the coordinate axes `axes` (row from the
    first, column from the second) with square cells of `resolution` meters
    over the closed box [`bounds_min`, `bounds_max`]. A `spherical` grid is a
    `height` x `width` range image whose rows cover the vertical field of view
    [`fov_down`, `fov_up`] (degrees) in equal angles and whose columns cover
    the full yaw circle; `reduction` picks whether a cell averages its member
    points (`mean`) or keeps the closest one (`closest`).
    """

    name = attr.ib()
    kind = attr.ib(validator=attr.validators.in_(KINDS))
    axes = attr.ib(default=(0, 1), converter=tuple)
    resolution = attr.ib(default=1.0, converter=float, validator=_positive)
    bounds_min = attr.ib(default=(0.0, 0.0), converter=_pair)
    bounds_max = attr.ib(default=(1.0, 1.0), converter=_pair)
    height = attr.ib(default=1, converter=int, validator=_positive)
    width = attr.ib(default=1, converter=int, validator=_positive)
    fov_up = attr.ib(default=3.0, converter=float)
    fov_down = attr.ib(default=-25.0, converter=float)
    reduction = attr.ib(default='mean',
                        validator=attr.validators.in_(REDUCTIONS))

    def __attrs_post_init__(self):
        if self.kind == 'planar':
            if len(self.axes) != 2 or self.axes[0] == self.axes[1] or \
                    not set(self.axes) <= {0, 1, 2}:
                raise ConfigurationError('Planar axes must be two distinct '
                                         'axes of (0, 1, 2), got {0}'
                                         .format(self.axes))
            if not all(lo < hi for lo, hi in
                       zip(self.bounds_min, self.bounds_max)):
                raise ConfigurationError('Grid {0}: bounds_min {1} must be < '
                                         'bounds_max {2}'
                                         .format(self.name, self.bounds_min,
                                                 self.bounds_max))
            # Sizes follow from the bounds
            rows, cols = (max(1, math.ceil((hi - lo) / self.resolution))
                          for lo, hi in zip(self.bounds_min,
                                            self.bounds_max))
            object.__setattr__(self, 'height', rows)
            object.__setattr__(self, 'width', cols)
        elif not self.fov_up > self.fov_down:
            raise ConfigurationError('fov_up {0} must exceed fov_down {1}'
                                     .format(self.fov_up, self.fov_down))

    @classmethod
    def planar(cls, name: str, axes: tuple, resolution: float,
               bounds_min: tuple, bounds_max: tuple) -> 'GridSpec':
        return cls(name=name, kind='planar', axes=axes, resolution=resolution,
                   bounds_min=bounds_min, bounds_max=bounds_max)

    @classmethod
    def spherical(cls, name: str, height: int, width: int, fov_up: float,
                  fov_down: float, reduction: str='mean') -> 'GridSpec':
        return cls(name=name, kind='spherical', height=height, width=width,
                   fov_up=fov_up, fov_down=fov_down, reduction=reduction)

    @property
    def shape(self) -> tuple:
        return (self.height, self.width)

    @property
    def cells(self) -> int:
        return self.height * self.width


@attr.s(frozen=True, eq=False)
class CellAssignment:
    """Per-point flat cell index (row * W + col, or OUT_OF_VIEW) and weight.
    Member weights of every occupied cell sum to 1; out-of-view points carry
    weight 0.
    """

    cell_index = attr.ib(converter=lambda a: np.asarray(a, dtype=np.int64))
    inv_density = attr.ib(converter=lambda a: np.asarray(a,
                                                         dtype=np.float64))
    grid_shape = attr.ib(converter=tuple)

    @property
    def cells(self) -> int:
        return self.grid_shape[0] * self.grid_shape[1]

    @property
    def in_view(self) -> np.ndarray:
        return self.cell_index != OUT_OF_VIEW

    def __len__(self) -> int:
        return self.cell_index.size

    def permuted(self, order: np.ndarray) -> 'CellAssignment':
        """Assignment of the cloud whose point i is point `order[i]` here.
        """

        return CellAssignment(cell_index=self.cell_index[order],
                              inv_density=self.inv_density[order],
                              grid_shape=self.grid_shape)


def _coordinates(cloud) -> np.ndarray:
    if isinstance(cloud, PointCloud):
        return cloud.xyz
    return np.asarray(cloud, dtype=np.float64).reshape(-1, 3)


def assignmentFromCells(cell_index: np.ndarray,
                        grid_shape: tuple) -> CellAssignment:
    """Builds the mean-reduction assignment of precomputed flat cell indices:
    every in-view point gets 1 / (members of its cell).

    Arguments:
        cell_index {np.ndarray} -- [N] flat indices or OUT_OF_VIEW.
        grid_shape {tuple} -- (H, W).

    Returns:
        CellAssignment -- Weighted assignment.
    """

    cell_index = np.asarray(cell_index, dtype=np.int64)
    in_view = cell_index != OUT_OF_VIEW
    counts = np.bincount(cell_index[in_view],
                         minlength=grid_shape[0] * grid_shape[1])
    inv_density = np.zeros(cell_index.size, dtype=np.float64)
    inv_density[in_view] = 1.0 / counts[cell_index[in_view]]
    return CellAssignment(cell_index=cell_index, inv_density=inv_density,
                          grid_shape=grid_shape)


def assignPlanar(cloud, spec: GridSpec) -> CellAssignment:
    """Function to project points onto a planar grid: cell = floor((coord -
    min) / resolution) per projected axis. Points inside the closed bounds
    whose cell falls past the last row or column (points on the max edge) are
    clamped into the grid; points outside the bounds are out of view.

    Arguments:
        cloud -- `PointCloud` or [N, 3] coordinates.
        spec {GridSpec} -- Planar grid.

    Returns:
        CellAssignment -- Weighted assignment.
    """

    if spec.kind != 'planar':
        raise ConfigurationError('Grid {0} is not planar'.format(spec.name))

    xyz = _coordinates(cloud)
    first = xyz[:, spec.axes[0]]
    second = xyz[:, spec.axes[1]]
    (min_a, min_b), (max_a, max_b) = spec.bounds_min, spec.bounds_max

    in_view = (first >= min_a) & (first <= max_a) & \
        (second >= min_b) & (second <= max_b)
    rows = np.clip(np.floor((first - min_a) / spec.resolution),
                   0, spec.height - 1)
    cols = np.clip(np.floor((second - min_b) / spec.resolution),
                   0, spec.width - 1)

    cell_index = np.where(in_view,
                          rows.astype(np.int64) * spec.width +
                          cols.astype(np.int64), OUT_OF_VIEW)
    return assignmentFromCells(cell_index, spec.shape)


def sphericalRowsCols(xyz: np.ndarray, spec: GridSpec) -> tuple:
    """Range-image coordinates of [N, 3] points.

    Returns:
        tuple -- (rows, cols, in_view, ranges), rows and cols clamped into
            the image.
    """

    ranges = np.linalg.norm(xyz, axis=1)
    valid = ranges >= _MIN_RANGE
    safe = np.where(valid, ranges, 1.0)

    yaw = np.arctan2(xyz[:, 1], xyz[:, 0])
    pitch = np.arcsin(np.clip(xyz[:, 2] / safe, -1.0, 1.0))
    fov_up = np.radians(spec.fov_up)
    fov_down = np.radians(spec.fov_down)

    cols = np.floor(0.5 * (1.0 - yaw / np.pi) * spec.width)
    rows = np.floor((1.0 - (pitch - fov_down) / (fov_up - fov_down)) *
                    spec.height)
    cols = np.clip(cols, 0, spec.width - 1).astype(np.int64)
    rows = np.clip(rows, 0, spec.height - 1).astype(np.int64)

    in_view = valid & (pitch >= fov_down - _PITCH_TOLERANCE) & \
        (pitch <= fov_up + _PITCH_TOLERANCE)
    return rows, cols, in_view, ranges


def assignSpherical(cloud, spec: GridSpec) -> CellAssignment:
    """Function to project points onto the range image. Columns follow the
    yaw (forward direction at the image center), rows follow the pitch from
    `fov_up` (row 0) down to `fov_down`. Points closer than 1e-6 m to the
    sensor, or with a pitch outside the field of view, are out of view.

    With `closest` reduction each cell keeps only its point of smallest range
    (smallest index on ties) at weight 1; other members still inherit the
    cell features on inflation but contribute nothing to the cell.

    Arguments:
        cloud -- `PointCloud` or [N, 3] coordinates.
        spec {GridSpec} -- Spherical grid.

    Returns:
        CellAssignment -- Weighted assignment.
    """

    if spec.kind != 'spherical':
        raise ConfigurationError('Grid {0} is not spherical'
                                 .format(spec.name))

    rows, cols, in_view, ranges = sphericalRowsCols(_coordinates(cloud), spec)
    cell_index = np.where(in_view, rows * spec.width + cols, OUT_OF_VIEW)

    if spec.reduction == 'mean':
        return assignmentFromCells(cell_index, spec.shape)

    members = np.flatnonzero(in_view)
    # Sorted by cell, then range, then point index
    order = members[np.lexsort((members, ranges[members],
                                cell_index[members]))]
    first = np.ones(order.size, dtype=bool)
    first[1:] = cell_index[order[1:]] != cell_index[order[:-1]]

    inv_density = np.zeros(cell_index.size, dtype=np.float64)
    inv_density[order[first]] = 1.0
    return CellAssignment(cell_index=cell_index, inv_density=inv_density,
                          grid_shape=spec.shape)


def assign(cloud, spec: GridSpec) -> CellAssignment:
    """Function dispatching to the planar or spherical assignment.
    """

    if spec.kind == 'planar':
        return assignPlanar(cloud, spec)
    return assignSpherical(cloud, spec)
