from .point_cloud import PointCloud
from .semantic_kitti import (readPointFile, readPointRows, writePointFile,
                             readRawLabels, writeRawLabels, readLabelFile,
                             writeLabelFile, expandLabels, LabelRemap,
                             listScans)
from .preprocess import (AugmentConfig, PreprocessConfig, voxelDownsample,
                         fovCrop, preprocess)
from .augment import augment, transformXYZ
