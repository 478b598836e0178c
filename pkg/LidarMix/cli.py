from .ingest import (LabelRemap, PointCloud, PreprocessConfig, expandLabels,
                     listScans, preprocess, readLabelFile, readPointFile,
                     readPointRows, writeLabelFile)
from .model import ModelConfig, loadCheckpoint, predict, saveCheckpoint
from .model.config import RANGE_VIEW
from .projection import benchFlatten
from .spatial import benchBuildQuery
from .tensor import profileDtype
from .train import (CLASS_NAMES, ConfusionMatrix, Manager, TrainConfig,
                    evaluate, makeToyDataset, metricsReport, modelPreprocess,
                    segmentCloud)
from .util import (Export, Stopwatch, config, configSetup, resolvePath,
                   resolveThreads)
from .util.errors import ConfigurationError

import json
import logging
import sys

import argh
import numpy as np
import pandas as pd


SECTIONS = ('ingest', 'model', 'toy', 'train', 'bench', 'runtime')
SUITES = ('knn', 'flatten')


def setupLogging(log_file: str='', level: int=logging.INFO):
    """Installs the stderr (and optional file) handlers on the root logger.
    Reports go to stdout, so logs never mix with them.
    """

    formatter = logging.Formatter(
        '%(asctime)s - %(name)s - %(levelname)s - %(message)s')

    root = logging.getLogger()
    root.setLevel(level)
    for handler in list(root.handlers):
        root.removeHandler(handler)

    log_stderr = logging.StreamHandler(sys.stderr)
    log_stderr.setFormatter(formatter)
    root.addHandler(log_stderr)

    if log_file:
        file_handler = logging.FileHandler(log_file)
        file_handler.setFormatter(formatter)
        root.addHandler(file_handler)


def resolveRun(command: str, config_file: str='', threads: int=0,
               profile: str='', data_dir: str='', **flags) -> dict:
    """Loads the configuration (base, override file, environment), applies
    the command-line flags on top and logs the resolved run configuration.

    Returns:
        dict -- Resolved run configuration.
    """

    configSetup(override=config_file)
    runtime = config.runtime
    if threads:
        runtime['threads'] = threads
    if profile:
        profileDtype(profile)
        runtime['profile'] = profile
    if data_dir:
        runtime['data_dir'] = data_dir
    runtime['threads'] = resolveThreads(runtime.get('threads') or None)

    resolved = {
        'command': command,
        'flags': flags,
        'config': {section: getattr(config, section, {})
                   for section in SECTIONS}
    }
    logging.info('Run configuration: {0}'.format(
        json.dumps(resolved, sort_keys=True, default=str)))
    return resolved


def _report(report: pd.DataFrame, name: str, export: bool=False):
    exporter = Export(report, name)
    exporter.toStdout()
    if export:
        exporter.toCSV()
        exporter.toExcel()


def _remap(remap_file: str='') -> LabelRemap:
    ingest = config.ingest
    return LabelRemap.fromFile(resolvePath(remap_file or ingest['remap_file']),
                               ignore_class=ingest['ignore_class'])


def _classNames(remap: LabelRemap, classes: int) -> list:
    names = []
    for train_id in range(classes):
        raw_id = remap.inverse.get(train_id)
        names.append(str(remap.names.get(raw_id, train_id)))
    return names


def _timingReport(stopwatch: Stopwatch) -> pd.DataFrame:
    phases = list(stopwatch.millis.items()) + [('total', stopwatch.total())]
    return pd.DataFrame(phases, columns=['phase', 'millis'])


@argh.arg('--input', help='SemanticKITTI point file (.bin)')
@argh.arg('--model', help='Checkpoint written by train-toy')
@argh.arg('--out', help='Output label file (.label)')
@argh.arg('--model-config', help='key=value model config the checkpoint '
          'must match')
def segment(*, input: str, model: str, out: str, model_config: str='',
            remap_file: str='', config_file: str='', threads: int=0,
            profile: str='', export: bool=False, log_file: str=''):
    """Segments one point file and writes SemanticKITTI labels.
    """

    setupLogging(log_file)
    resolveRun('segment', config_file, threads=threads, profile=profile,
               input=input, model=model, out=out, model_config=model_config)

    expected = ModelConfig.fromFile(model_config) if model_config else None
    params = loadCheckpoint(model, expected_config=expected,
                            dtype=profileDtype(config.runtime['profile']))
    remap = _remap(remap_file)
    if params.config.classes > remap.class_count:
        raise ConfigurationError('classes: model predicts {0} classes, the '
                                 'remap table defines {1}'
                                 .format(params.config.classes,
                                         remap.class_count))

    cloud, kept = readPointRows(input)
    stopwatch = Stopwatch()
    predictions = segmentCloud(
        cloud, params, PreprocessConfig.fromParameters(config.ingest),
        threads=config.runtime['threads'], stopwatch=stopwatch)
    # Rows dropped while reading are written with the ignore id
    labels = expandLabels(predictions, kept, remap.ignore_class)
    writeLabelFile(out, labels, remap)
    logging.info('Wrote {0} labels to {1}'.format(labels.size, out))

    counts = np.bincount(predictions, minlength=params.config.classes)
    _report(pd.DataFrame({
        'class': _classNames(remap, params.config.classes),
        'count': counts
    }), 'class_counts', export)
    _report(_timingReport(stopwatch), 'timing', export)


@argh.named('train-toy')
@argh.arg('--no-range', help='Remove the range image from the view cycle')
def trainToy(*, seed: int=0, steps: int=0, out: str='toy.ckpt',
             points: int=0, lr: float=0.0, no_range: bool=False,
             config_file: str='', threads: int=0, profile: str='',
             export: bool=False, log_file: str=''):
    """Trains the toy model on synthetic scenes and writes a checkpoint.
    """

    setupLogging(log_file)
    resolveRun('train-toy', config_file, threads=threads, profile=profile,
               seed=seed, steps=steps, out=out, points=points, lr=lr,
               no_range=no_range)

    toy = config.toy
    model_config = ModelConfig.fromParameters(toy['model'])
    if no_range:
        model_config = model_config.evolve(
            cycle=tuple(v for v in model_config.cycle if v != RANGE_VIEW))

    train_config = TrainConfig.fromParameters(
        toy, seed=seed, steps=steps or None, lr=lr or None)
    dataset = makeToyDataset(seed, scenes=toy['scenes'],
                             n_points=points or toy['points'],
                             ignore_class=model_config.ignore_class)
    # Same voxel size and crop box as segment and eval
    preprocess_config = modelPreprocess(
        PreprocessConfig.fromParameters(config.ingest), model_config)
    dataset = [preprocess(cloud, preprocess_config)[0] for cloud in dataset]

    manager = Manager(model_config, dataset, train_config,
                      threads=config.runtime['threads'],
                      dtype=profileDtype(config.runtime['profile']))
    params = manager.start()
    saveCheckpoint(out, params)

    cm = ConfusionMatrix(model_config.classes, model_config.ignore_class)
    for prepared in manager.prepared:
        cm.add(prepared.labels, predict(prepared, params)[0])

    _report(pd.DataFrame({
        'steps': [train_config.steps],
        'initial_loss': [manager.losses[0] if manager.losses else np.nan],
        'final_loss': [manager.losses[-1] if manager.losses else np.nan],
        'accuracy': [cm.pointAccuracy()]
    }), 'train_toy', export)


def _loadSequence(data_dir: str, split: str, remap: LabelRemap) -> list:
    if not data_dir:
        raise ConfigurationError('data_dir: set --data-dir or '
                                 'LIDARMIX_DATA_DIR')
    dataset = []
    for point_file, label_file in listScans(data_dir, split):
        if label_file is None:
            logging.warning('Skipping unlabeled scan {0}'.format(point_file))
            continue
        cloud, kept = readPointRows(point_file)
        labels = readLabelFile(label_file, kept.size, remap, kept=kept)
        dataset.append(PointCloud(points=cloud.points, labels=labels))
    if not dataset:
        raise ConfigurationError('data_dir: no labeled scans in sequence {0}'
                                 ' of {1}'.format(split, data_dir))
    return dataset


@argh.named('eval')
@argh.arg('--split', help='Sequence id, or "toy" for synthetic scenes')
def evaluateModel(*, model: str, data_dir: str='', split: str='08',
                  seed: int=0, processes: int=1, remap_file: str='',
                  config_file: str='', threads: int=0, profile: str='',
                  export: bool=False, log_file: str=''):
    """Evaluates a checkpoint and prints per-class IoU and mIoU.
    """

    setupLogging(log_file)
    resolveRun('eval', config_file, threads=threads, profile=profile,
               data_dir=data_dir, model=model, split=split, seed=seed,
               processes=processes)

    params = loadCheckpoint(model,
                            dtype=profileDtype(config.runtime['profile']))
    if split == 'toy':
        dataset = makeToyDataset(seed, scenes=config.toy['scenes'],
                                 n_points=config.toy['points'],
                                 ignore_class=params.config.ignore_class)
        names = CLASS_NAMES[:params.config.classes]
    else:
        remap = _remap(remap_file)
        dataset = _loadSequence(config.runtime['data_dir'], split, remap)
        names = _classNames(remap, params.config.classes)

    cm, _ = evaluate(params, dataset,
                     PreprocessConfig.fromParameters(config.ingest),
                     processes=processes, threads=config.runtime['threads'])
    _report(metricsReport(cm, names), 'metrics', export)


@argh.arg('--suite', choices=SUITES, help='Benchmark to run')
def bench(*, suite: str, points: int=100000, neighbors: int=16,
          cells: int=4096, channels: int=64, reps: int=-1, warmup: int=-1,
          seed: int=0, input: str='', config_file: str='', threads: int=0,
          export: bool=False, log_file: str=''):
    """Times the kNN index (1 vs --threads threads) or the flatten arms.
    """

    setupLogging(log_file)
    resolveRun('bench', config_file, threads=threads, suite=suite,
               points=points, neighbors=neighbors, cells=cells,
               channels=channels, reps=reps, warmup=warmup, seed=seed,
               input=input)

    settings = config.bench
    reps = settings['reps'] if reps < 0 else reps
    warmup = settings['warmup'] if warmup < 0 else warmup

    if suite == 'knn':
        if input:
            cloud = readPointFile(input)
        else:
            rng = np.random.default_rng(seed)
            cloud = PointCloud.fromXYZI(np.column_stack((
                rng.uniform(-50.0, 50.0, size=(points, 3)),
                rng.uniform(0.0, 1.0, size=points))))
        report = benchBuildQuery(cloud, neighbors, config.runtime['threads'],
                                 reps=reps, warmup=warmup)
    else:
        report = benchFlatten(points, cells, channels, reps, warmup=warmup,
                              seed=seed,
                              max_dense_elements=settings[
                                  'max_dense_elements'])

    _report(report, 'bench_{0}'.format(suite), export)


COMMANDS = [segment, trainToy, evaluateModel, bench]


def main(argv: list=None) -> int:
    """Command-line entry point. Returns 0 when the command completed;
    otherwise writes a single `error,<Type>,<message>` line to stderr and
    returns 1. Argument errors exit with status 2.
    """

    parser = argh.ArghParser(prog='lidarmix',
                             description='Point cloud segmentation engine')
    parser.add_commands(COMMANDS)

    try:
        parser.dispatch(argv=argv)
    except Exception as error:
        logging.error('Command failed: {0}'.format(error))
        message = ' '.join(str(error).split())
        sys.stderr.write('error,{0},{1}\n'.format(type(error).__name__,
                                                  message))
        sys.stderr.flush()
        return 1
    return 0
