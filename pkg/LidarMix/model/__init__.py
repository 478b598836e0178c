from .config import ModelConfig, PRESETS, VIEWS, PLANAR_VIEWS, RANGE_VIEW
from .params import (ModelParams, parameterShapes, parameterCount, initParams,
                     initBuffers, normLayers)
from .network import (PreparedCloud, EmbeddingOutput, prepare, embed,
                      spatialMix, channelMix, forward, predict)
from .checkpoint import saveCheckpoint, loadCheckpoint, readCheckpointConfig
