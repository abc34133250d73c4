"""Dense-tensor engine: tape autodiff, nn primitives, gradient checking, serialization."""
from .gradcheck import GradCheckReport, grad_check
from .ops import (
    BatchNormState,
    activation,
    batch_norm_1d,
    conv1d,
    depthwise_conv1d,
    dropout,
    glu,
    layer_norm,
    relu,
    sigmoid,
    softmax_lastdim,
    swish,
    tanh,
)
from .serialize import (
    load_container,
    load_tensor,
    read_tensor,
    save_container,
    save_tensor,
    write_tensor,
)
from .tensor import (
    Graph,
    Tensor,
    add,
    backward,
    exp,
    index_rows,
    linear,
    log,
    matmul,
    mul,
    neg,
    ones,
    reshape,
    square,
    stop_gradient,
    sub,
    tabs,
    tensor,
    tmean,
    transpose,
    tsum,
    zeros,
)

__all__ = [
    "Graph",
    "Tensor",
    "GradCheckReport",
    "BatchNormState",
    "grad_check",
    "backward",
    "tensor",
    "zeros",
    "ones",
    "add",
    "sub",
    "mul",
    "neg",
    "matmul",
    "linear",
    "tsum",
    "tmean",
    "tabs",
    "square",
    "exp",
    "log",
    "reshape",
    "transpose",
    "index_rows",
    "stop_gradient",
    "conv1d",
    "depthwise_conv1d",
    "layer_norm",
    "batch_norm_1d",
    "activation",
    "relu",
    "swish",
    "glu",
    "tanh",
    "sigmoid",
    "softmax_lastdim",
    "dropout",
    "save_tensor",
    "load_tensor",
    "save_container",
    "load_container",
    "read_tensor",
    "write_tensor",
]
