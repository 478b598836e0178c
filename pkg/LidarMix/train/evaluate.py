from .metrics import ConfusionMatrix, miou
from ..ingest.point_cloud import PointCloud
from ..ingest.preprocess import PreprocessConfig, preprocess
from ..model.config import ModelConfig
from ..model.network import predict, prepare
from ..model.params import ModelParams
from ..spatial.kdtree import build, queryKnn

import logging
import multiprocessing

import attr
import numpy as np


def propagatePredictions(full_cloud: PointCloud, reduced_cloud: PointCloud,
                         back_map: np.ndarray,
                         predictions: np.ndarray) -> np.ndarray:
    """Function to bring predictions of a preprocessed cloud back to full
    resolution: voxel mates take their representative's prediction, and
    cropped points (back_map -1) take the prediction of the nearest
    surviving point.

    Arguments:
        full_cloud {PointCloud} -- Cloud before preprocessing.
        reduced_cloud {PointCloud} -- Preprocessed cloud.
        back_map {np.ndarray} -- Output of `preprocess`.
        predictions {np.ndarray} -- [len(reduced_cloud)] class ids.

    Raises:
        ValueError -- Raised when no point survived preprocessing.

    Returns:
        np.ndarray -- [len(full_cloud)] class ids.
    """

    if len(reduced_cloud) == 0:
        logging.error('No point survived preprocessing')
        raise ValueError('Cannot propagate predictions of an empty cloud')

    predictions = np.asarray(predictions)
    full = np.empty(len(full_cloud), dtype=predictions.dtype)
    kept = back_map >= 0
    full[kept] = predictions[back_map[kept]]

    cropped = np.flatnonzero(~kept)
    if cropped.size:
        tree = build(reduced_cloud)
        nearest = queryKnn(tree, full_cloud.xyz[cropped], 1)
        full[cropped] = predictions[nearest.indices[:, 0]]
    return full


def modelPreprocess(preprocess_config: PreprocessConfig,
                    model_config: ModelConfig) -> PreprocessConfig:
    """Function returning the preprocessing settings with the crop box
    replaced by the model's, so every surviving point lies inside the planar
    grids.

    Arguments:
        preprocess_config {PreprocessConfig} -- Configured voxel and crop
            settings.
        model_config {ModelConfig} -- Model whose crop box is used.

    Returns:
        PreprocessConfig -- Settings cropping to the model's box.
    """

    crop_min = tuple(model_config.crop_min)
    crop_max = tuple(model_config.crop_max)
    if (preprocess_config.crop_min, preprocess_config.crop_max) != \
            (crop_min, crop_max):
        logging.info('Cropping to the model box {0} .. {1} instead of {2} '
                     '.. {3}'.format(crop_min, crop_max,
                                     preprocess_config.crop_min,
                                     preprocess_config.crop_max))
        preprocess_config = attr.evolve(preprocess_config, crop_min=crop_min,
                                        crop_max=crop_max)
    return preprocess_config


def segmentCloud(cloud: PointCloud, params: ModelParams,
                 preprocess_config: PreprocessConfig, threads: int=None,
                 stopwatch=None) -> np.ndarray:
    """Function predicting full-resolution class ids of one raw cloud,
    preprocessed with the voxel size of `preprocess_config` and the crop box
    of the model.
    """

    preprocess_config = modelPreprocess(preprocess_config, params.config)
    reduced, back_map = preprocess(cloud, preprocess_config)
    prepared = prepare(reduced, params.config, threads=threads,
                       dtype=params.dtype)
    predictions, _ = predict(prepared, params, stopwatch=stopwatch)
    return propagatePredictions(cloud, reduced, back_map, predictions)


# Worker state, set once per evaluation process
_worker = {}


def _initWorker(params: ModelParams, preprocess_config: PreprocessConfig,
                threads: int):
    _worker['params'] = params
    _worker['preprocess_config'] = preprocess_config
    _worker['threads'] = threads


def _evaluateCloud(cloud: PointCloud) -> np.ndarray:
    params = _worker['params']
    predictions = segmentCloud(cloud, params, _worker['preprocess_config'],
                               threads=_worker['threads'])
    return ConfusionMatrix(params.config.classes,
                           params.config.ignore_class) \
        .add(cloud.labels, predictions).counts


def evaluate(params: ModelParams, dataset: list,
             preprocess_config: PreprocessConfig, processes: int=1,
             threads: int=None) -> tuple:
    """Function to evaluate labeled full-resolution clouds: every cloud is
    preprocessed, segmented, its predictions propagated back to all points,
    and the per-cloud confusion matrices are summed.

    Arguments:
        params {ModelParams} -- Trained parameters (eval mode).
        dataset {list} -- Labeled PointClouds (training ids).
        preprocess_config {PreprocessConfig} -- Crop and voxel settings.

    Keyword Arguments:
        processes {int} -- Worker processes, clouds are spread over them
            (default: {1}, in-process).
        threads {int} -- kNN threads per process (default: {None}).

    Returns:
        tuple -- (ConfusionMatrix, mIoU).
    """

    config = params.config
    cm = ConfusionMatrix(config.classes, config.ignore_class)
    preprocess_config = modelPreprocess(preprocess_config, config)
    logging.info('Evaluating {0} clouds on {1} processes'
                 .format(len(dataset), processes))

    if processes <= 1 or len(dataset) <= 1:
        _initWorker(params, preprocess_config, threads)
        results = [_evaluateCloud(cloud) for cloud in dataset]
    else:
        # Spawned workers start without the parent's numba thread pools
        context = multiprocessing.get_context('spawn')
        pool = context.Pool(processes=processes, initializer=_initWorker,
                            initargs=(params, preprocess_config, threads))
        try:
            results = pool.map(_evaluateCloud, dataset)
        finally:
            pool.close()
            pool.join()

    for counts in results:
        cm.counts += counts

    score = miou(cm)
    logging.info('Evaluated {0} points: mIoU {1:.4f}, accuracy {2:.4f}'
                 .format(cm.total(), score, cm.pointAccuracy()))
    return cm, score
