from .tensor import Tensor, Tape, currentTape, result, profileDtype, PROFILES
from .ops import add, sub, reshape, concat, gather, conv1dPointwise, \
    conv2dDepthwise, conv1dDepthwise, batchNorm, relu, gelu, activation, \
    maxOverAxis, softmax, softmaxCrossEntropy, BATCHNORM_MODES
from .gradcheck import gradCheck
