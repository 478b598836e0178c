from .metrics import ConfusionMatrix, iouPerClass, miou, metricsReport
from .optimizer import TrainConfig, OptimState, applyUpdate
from .trainer import computeGradients, trainStep, calibrateNorms, Manager
from .evaluate import (evaluate, modelPreprocess, propagatePredictions,
                       segmentCloud)
from .toy import makeToyDataset, makeToyScene, CLASS_NAMES
