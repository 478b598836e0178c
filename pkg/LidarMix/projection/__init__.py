from .grid import (GridSpec, CellAssignment, OUT_OF_VIEW, assign,
                   assignPlanar, assignSpherical, assignmentFromCells,
                   sphericalRowsCols)
from .flatten import (flattenScatter, flattenMatmulOracle, flattenSparse,
                      projectionMatrix, inflateGrid, flatten, inflate,
                      checkAssignment)
from .benchmark import benchFlatten, randomAssignment
