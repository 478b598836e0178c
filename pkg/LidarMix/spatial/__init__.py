from .kdtree import KdTree, KnnResult, build, queryKnn, bruteForceKnn
from .benchmark import benchBuildQuery, resultChecksum
