from .point_cloud import PointCloud
from ..util.errors import ConfigurationError

import logging

import attr
import numpy as np


def _positive(instance, attribute, value):
    if not value > 0:
        raise ConfigurationError('{0} must be > 0, got {1}'
                                 .format(attribute.name, value))


def _unitInterval(instance, attribute, value):
    if not 0.0 <= value < 1.0:
        raise ConfigurationError('{0} must be in [0, 1), got {1}'
                                 .format(attribute.name, value))


def _probability(instance, attribute, value):
    if not 0.0 <= value <= 1.0:
        raise ConfigurationError('{0} must be in [0, 1], got {1}'
                                 .format(attribute.name, value))


def _vector3(value) -> tuple:
    return tuple(float(v) for v in value)


@attr.s(frozen=True)
class AugmentConfig:
    """Random geometric augmentations. Flips fire with `flip_probability`
    when enabled; `scale_z` False restricts scaling to x-y.
    """

    flip_x = attr.ib(default=False)
    flip_y = attr.ib(default=False)
    rotate_z = attr.ib(default=False)
    scale = attr.ib(default=False)
    scale_max = attr.ib(default=0.1, converter=float, validator=_unitInterval)
    scale_z = attr.ib(default=True)
    flip_probability = attr.ib(default=0.5, converter=float,
                               validator=_probability)

    @classmethod
    def fromParameters(cls, parameters: dict) -> 'AugmentConfig':
        return cls(**parameters)


@attr.s(frozen=True)
class PreprocessConfig:
    """Voxel size and field-of-view crop box (meters), plus augmentation
    flags.
    """

    voxel_size = attr.ib(default=0.1, converter=float, validator=_positive)
    crop_min = attr.ib(default=(-50.0, -50.0, -5.0), converter=_vector3)
    crop_max = attr.ib(default=(50.0, 50.0, 5.0), converter=_vector3)
    augment = attr.ib(default=attr.Factory(AugmentConfig))

    @crop_max.validator
    def _checkBox(self, attribute, value):
        if len(self.crop_min) != 3 or len(value) != 3:
            raise ConfigurationError('Crop bounds must have 3 entries')
        if not all(lo < hi for lo, hi in zip(self.crop_min, value)):
            raise ConfigurationError('crop_min {0} must be < crop_max {1} '
                                     'per axis'.format(self.crop_min, value))

    @classmethod
    def fromParameters(cls, parameters: dict) -> 'PreprocessConfig':
        """Builds the configuration from the `ingest` section of the JSON
        configuration.
        """

        return cls(voxel_size=parameters['voxel_size'],
                   crop_min=parameters['crop_min'],
                   crop_max=parameters['crop_max'],
                   augment=AugmentConfig.fromParameters(
                       parameters.get('augment', {})))


def voxelDownsample(cloud: PointCloud, voxel_size: float) \
        -> (PointCloud, np.ndarray):
    """Function to keep at most one point per occupied voxel. The
    representative of a voxel is the first of its points in input order, and
    survivors keep their relative order.

    Arguments:
        cloud {PointCloud} -- Input cloud.
        voxel_size {float} -- Voxel edge length in meters.

    Raises:
        ConfigurationError -- Raised when `voxel_size` is not positive.

    Returns:
        (PointCloud, np.ndarray) -- Downsampled cloud, and for every input
            point the index of its representative in the downsampled cloud.
    """

    if not voxel_size > 0:
        raise ConfigurationError('voxel_size must be > 0, got {0}'
                                 .format(voxel_size))

    if len(cloud) == 0:
        return cloud, np.zeros(0, dtype=np.int64)

    keys = np.floor(cloud.xyz / voxel_size).astype(np.int64)
    _, first, inverse = np.unique(keys, axis=0, return_index=True,
                                  return_inverse=True)
    inverse = inverse.reshape(-1)

    # Rank voxels by their first point so survivors keep input order
    order = np.argsort(first, kind='stable')
    rank = np.empty_like(order)
    rank[order] = np.arange(order.size)

    survivors = first[order]
    back_map = rank[inverse]

    logging.info('Voxel downsample ({0} m) kept {1} of {2} points'
                 .format(voxel_size, survivors.size, len(cloud)))

    return cloud.select(survivors), back_map


def fovCrop(cloud: PointCloud, crop_min, crop_max,
            return_index: bool=False):
    """Function to keep the points inside the closed box
    [crop_min, crop_max], preserving order.

    Arguments:
        cloud {PointCloud} -- Input cloud.
        crop_min -- Per-axis lower bounds (meters).
        crop_max -- Per-axis upper bounds (meters).

    Keyword Arguments:
        return_index {bool} -- Also return the kept input indices
            (default: {False}).

    Returns:
        PointCloud -- Cropped cloud (and kept indices when requested).
    """

    lo = np.asarray(crop_min, dtype=np.float64)
    hi = np.asarray(crop_max, dtype=np.float64)
    inside = np.all((cloud.xyz >= lo) & (cloud.xyz <= hi), axis=1)
    kept = np.flatnonzero(inside)

    cropped = cloud.select(kept)
    if return_index:
        return cropped, kept
    return cropped


def preprocess(cloud: PointCloud, config: PreprocessConfig) \
        -> (PointCloud, np.ndarray):
    """Function to crop a cloud to the field of view and voxel-downsample it.

    Arguments:
        cloud {PointCloud} -- Full-resolution cloud.
        config {PreprocessConfig} -- Preprocessing configuration.

    Returns:
        (PointCloud, np.ndarray) -- Reduced cloud, and for every input point
            the index of its representative in the reduced cloud, or -1 when
            the point was cropped.
    """

    cropped, kept = fovCrop(cloud, config.crop_min, config.crop_max,
                            return_index=True)
    reduced, voxel_map = voxelDownsample(cropped, config.voxel_size)

    back_map = np.full(len(cloud), -1, dtype=np.int64)
    back_map[kept] = voxel_map

    logging.info('Preprocessed {0} points into {1} ({2} cropped)'
                 .format(len(cloud), len(reduced), len(cloud) - kept.size))

    return reduced, back_map
