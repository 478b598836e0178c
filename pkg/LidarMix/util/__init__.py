from .configuration import setup as configSetup
from .configuration import Parameters as config
from .configuration import resolvePath
from .errors import (LidarMixError, FormatError, ShapeError,
                     ConfigurationError, TrainingError)
from .helpers import logLoopProgress, Stopwatch, resolveThreads
from .export import Export
