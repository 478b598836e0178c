# Imports
from . import util
from . import ingest
from . import spatial
from . import tensor
from . import projection
from . import model
from . import train
