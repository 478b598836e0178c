from ..ingest.point_cloud import PointCloud

import logging

import numpy as np


GROUND, BOX, POLE = 0, 1, 2
CLASS_NAMES = ['ground', 'box', 'pole']

GROUND_Z = -1.5
GROUND_BAND = 0.05
EXTENT = 8.0

# Share of points per part of a scene; noise is labeled with the ignore class
SHARES = {GROUND: 0.4, BOX: 0.3, POLE: 0.2}


def _ground(rng, count: int) -> np.ndarray:
    xy = rng.uniform(-EXTENT, EXTENT, size=(count, 2))
    # Keep the sensor surroundings clear
    near = np.linalg.norm(xy, axis=1) < 1.0
    xy[near] *= 1.0 / np.linalg.norm(xy[near], axis=1, keepdims=True)
    z = GROUND_Z + rng.uniform(-GROUND_BAND, GROUND_BAND, size=count)
    return np.column_stack((xy, z))


def _boxes(rng, count: int, boxes: int=3) -> np.ndarray:
    points = []
    for index, share in enumerate(np.array_split(np.arange(count), boxes)):
        angle = 2.0 * np.pi * (index + rng.uniform(0.1, 0.9)) / boxes
        distance = rng.uniform(3.0, 6.0)
        center = distance * np.array([np.cos(angle), np.sin(angle)])
        half = rng.uniform(0.6, 1.0, size=2)
        top = GROUND_Z + rng.uniform(1.0, 1.4)

        # Points on the four sides and the top face
        u = rng.uniform(-1.0, 1.0, size=(share.size, 2))
        face = rng.integers(0, 5, size=share.size)
        xy = u * half
        xy[face == 0, 0] = half[0]
        xy[face == 1, 0] = -half[0]
        xy[face == 2, 1] = half[1]
        xy[face == 3, 1] = -half[1]
        z = np.where(face == 4, top,
                     rng.uniform(GROUND_Z + 0.2, top, size=share.size))
        points.append(np.column_stack((xy + center, z)))
    return np.concatenate(points)


def _poles(rng, count: int, poles: int=3) -> np.ndarray:
    points = []
    for index, share in enumerate(np.array_split(np.arange(count), poles)):
        angle = 2.0 * np.pi * (index + 0.5 + rng.uniform(-0.2, 0.2)) / poles
        distance = rng.uniform(2.5, 7.0)
        center = distance * np.array([np.cos(angle), np.sin(angle)])
        theta = rng.uniform(0.0, 2.0 * np.pi, size=share.size)
        radius = 0.1
        xy = center + radius * np.column_stack((np.cos(theta),
                                                np.sin(theta)))
        z = rng.uniform(GROUND_Z + 0.2, 2.0, size=share.size)
        points.append(np.column_stack((xy, z)))
    return np.concatenate(points)


def makeToyScene(rng, n_points: int=500, ignore_class: int=255) \
        -> PointCloud:
    """One synthetic labeled scene: a ground plane (class 0) inside a thin z
    band, box surfaces (class 1), thin poles (class 2), and uniform noise
    labeled with the ignore class.
    """

    counts = {part: int(round(share * n_points))
              for part, share in SHARES.items()}
    noise = n_points - sum(counts.values())

    parts = [
        (_ground(rng, counts[GROUND]), GROUND),
        (_boxes(rng, counts[BOX]), BOX),
        (_poles(rng, counts[POLE]), POLE),
        (np.column_stack((rng.uniform(-EXTENT, EXTENT, size=(noise, 2)),
                          rng.uniform(GROUND_Z + 0.2, 3.0, size=noise))),
         ignore_class)
    ]
    xyz = np.concatenate([p for p, _ in parts])
    labels = np.concatenate([np.full(len(p), label, dtype=np.int64)
                             for p, label in parts])
    intensity = rng.uniform(0.0, 1.0, size=len(xyz))

    # Shuffled so the classes are not stored in blocks
    order = rng.permutation(len(xyz))
    return PointCloud.fromXYZI(np.column_stack((xyz, intensity))[order],
                               labels=labels[order])


def makeToyDataset(seed: int, scenes: int=1, n_points: int=500,
                   ignore_class: int=255) -> list:
    """Function to generate deterministic synthetic scenes for the overfit
    harness and desk-scale evaluation.

    Arguments:
        seed {int} -- Generator seed; a seed always gives the same scenes.

    Keyword Arguments:
        scenes {int} -- Scene count (default: {1}).
        n_points {int} -- Points per scene (default: {500}).
        ignore_class {int} -- Label of noise points (default: {255}).

    Returns:
        list -- Labeled PointClouds.
    """

    rng = np.random.default_rng(seed)
    dataset = [makeToyScene(rng, n_points, ignore_class)
               for _ in range(scenes)]
    logging.info('Generated {0} toy scenes of {1} points (seed {2})'
                 .format(scenes, n_points, seed))
    return dataset
