from .point_cloud import PointCloud
from .preprocess import AugmentConfig

import numpy as np


def transformXYZ(cloud: PointCloud, flip_x: bool=False, flip_y: bool=False,
                 angle: float=0.0, scale=1.0) -> PointCloud:
    """Function applying a fixed flip / rotation / scale to the coordinates:
    x- and y-negation first, then a rotation by `angle` about z, then the
    scale (a scalar, or a per-axis triple). The range column is recomputed.

    Arguments:
        cloud {PointCloud} -- Input cloud.

    Returns:
        PointCloud -- Transformed cloud.
    """

    xyz = cloud.xyz.copy()
    if flip_x:
        xyz[:, 0] = -xyz[:, 0]
    if flip_y:
        xyz[:, 1] = -xyz[:, 1]
    if angle != 0.0:
        c, s = np.cos(angle), np.sin(angle)
        rotation = np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])
        xyz = xyz @ rotation.T
    xyz = xyz * np.asarray(scale, dtype=np.float64)
    return cloud.withXYZ(xyz)


def augment(cloud: PointCloud, config: AugmentConfig,
            rng_seed) -> PointCloud:
    """Function to apply the random augmentations enabled in `config`. Draws
    are made in a fixed order from a generator seeded with `rng_seed`, so a
    seed always reproduces the same transform. With every flag disabled the
    cloud is returned unchanged.

    Arguments:
        cloud {PointCloud} -- Input cloud.
        config {AugmentConfig} -- Enabled augmentations.
        rng_seed -- Seed (or `np.random.Generator`).

    Returns:
        PointCloud -- Augmented cloud.
    """

    if not (config.flip_x or config.flip_y or config.rotate_z or
            config.scale):
        return cloud

    rng = np.random.default_rng(rng_seed)

    flip_x = bool(config.flip_x and rng.random() < config.flip_probability)
    flip_y = bool(config.flip_y and rng.random() < config.flip_probability)
    angle = rng.uniform(0.0, 2.0 * np.pi) if config.rotate_z else 0.0

    scale = 1.0
    if config.scale:
        factor = rng.uniform(1.0 - config.scale_max, 1.0 + config.scale_max)
        scale = factor if config.scale_z else (factor, factor, 1.0)

    return transformXYZ(cloud, flip_x=flip_x, flip_y=flip_y, angle=angle,
                        scale=scale)
