from .config import ModelConfig
from .params import ModelParams, initBuffers, parameterShapes
from ..tensor.tensor import Tensor
from ..util.errors import ConfigurationError, FormatError

from collections import OrderedDict
import logging
import struct

import numpy as np


MAGIC = b'LMIXCKPT'
VERSION = 1


def _writeBlob(handle, name: str, array: np.ndarray):
    encoded = name.encode('utf-8')
    data = np.ascontiguousarray(array, dtype='<f4')
    handle.write(struct.pack('<I', len(encoded)))
    handle.write(encoded)
    handle.write(struct.pack('<I', data.ndim))
    handle.write(struct.pack('<{0}I'.format(data.ndim), *data.shape))
    handle.write(struct.pack('<Q', data.nbytes))
    handle.write(data.tobytes())


def saveCheckpoint(path: str, params: ModelParams):
    """Function to write a checkpoint: magic, format version, the model
    configuration as `key=value` text, then every parameter and running
    statistic as a length-prefixed blob (name, shape, float32 little-endian
    data).

    Arguments:
        path {str} -- Output path.
        params {ModelParams} -- Parameters to store.
    """

    config_text = params.config.toText().encode('utf-8')
    blobs = [(name, t.data) for name, t in params] + \
        list(params.buffers.items())

    with open(path, 'wb') as handle:
        handle.write(MAGIC)
        handle.write(struct.pack('<I', VERSION))
        handle.write(struct.pack('<I', len(config_text)))
        handle.write(config_text)
        handle.write(struct.pack('<I', len(blobs)))
        for name, array in blobs:
            _writeBlob(handle, name, array)

    logging.info('Saved checkpoint of model {0} ({1} blobs) to {2}'
                 .format(params.config.name, len(blobs), path))


class _Reader:
    def __init__(self, payload: bytes, path: str):
        self.payload = payload
        self.path = path
        self.offset = 0

    def take(self, size: int) -> bytes:
        if self.offset + size > len(self.payload):
            message = 'Checkpoint {0} truncated at byte {1}'.format(
                self.path, self.offset)
            logging.error(message)
            raise FormatError(message)
        chunk = self.payload[self.offset:self.offset + size]
        self.offset += size
        return chunk

    def unpack(self, fmt: str) -> tuple:
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))


def readCheckpointConfig(path: str) -> ModelConfig:
    """Reads only the configuration echoed in a checkpoint header.
    """

    with open(path, 'rb') as handle:
        reader = _Reader(handle.read(), path)
    return _readHeader(reader)


def _readHeader(reader: _Reader) -> ModelConfig:
    if reader.take(len(MAGIC)) != MAGIC:
        message = '{0} is not a LidarMix checkpoint'.format(reader.path)
        logging.error(message)
        raise FormatError(message)
    version, = reader.unpack('<I')
    if version != VERSION:
        message = 'Checkpoint {0} has format version {1}, expected {2}' \
            .format(reader.path, version, VERSION)
        logging.error(message)
        raise FormatError(message)
    length, = reader.unpack('<I')
    return ModelConfig.fromText(reader.take(length).decode('utf-8'))


def loadCheckpoint(path: str, expected_config: ModelConfig=None,
                   dtype=np.float64) -> ModelParams:
    """Function to read a checkpoint written by `saveCheckpoint`.

    Arguments:
        path {str} -- Checkpoint path.

    Keyword Arguments:
        expected_config {ModelConfig} -- When given, the stored configuration
            must match it (default: {None}).
        dtype -- Parameter dtype after loading (default: {np.float64}).

    Raises:
        FormatError -- Raised for a malformed or truncated file.
        ConfigurationError -- Raised when the stored configuration differs
            from `expected_config`, naming the differing fields.

    Returns:
        ModelParams -- Loaded parameters.
    """

    with open(path, 'rb') as handle:
        reader = _Reader(handle.read(), path)

    config = _readHeader(reader)
    if expected_config is not None:
        fields = config.differences(expected_config)
        if fields:
            message = 'Checkpoint {0} does not match the model configuration;' \
                ' differing fields: {1}'.format(path, ', '.join(fields))
            logging.error(message)
            raise ConfigurationError(message)

    blobs = {}
    count, = reader.unpack('<I')
    for _ in range(count):
        name_length, = reader.unpack('<I')
        name = reader.take(name_length).decode('utf-8')
        ndim, = reader.unpack('<I')
        shape = reader.unpack('<{0}I'.format(ndim))
        nbytes, = reader.unpack('<Q')
        if nbytes != 4 * int(np.prod(shape)):
            raise FormatError('Blob {0} holds {1} bytes, shape {2} needs {3}'
                              .format(name, nbytes, shape,
                                      4 * int(np.prod(shape))))
        blobs[name] = np.frombuffer(reader.take(nbytes), dtype='<f4') \
            .reshape(shape)

    tensors = OrderedDict()
    for name in parameterShapes(config):
        if name not in blobs:
            raise FormatError('Checkpoint {0} lacks parameter {1}'
                              .format(path, name))
        tensors[name] = Tensor(blobs[name].copy(), requires_grad=True,
                               dtype=dtype)

    buffers = initBuffers(config, dtype)
    for name in buffers:
        if name in blobs:
            buffers[name] = blobs[name].astype(dtype)

    logging.info('Loaded checkpoint of model {0} from {1}'
                 .format(config.name, path))
    return ModelParams(config, tensors, buffers)
