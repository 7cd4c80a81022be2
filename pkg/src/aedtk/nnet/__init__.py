from .layers import (
    Conv2d,
    Dense,
    Dropout,
    Flatten,
    MaxPool2d,
    Param,
    Relu,
    ShapeError,
    Softmax,
    conv2d_forward,
    dropout_forward,
    fc_forward,
    maxpool2d_forward,
    softmax,
)
from .losses import add_l1_subgradient, cross_entropy, l1_penalty, loss_and_grads
from .network import (
    LayerSpec,
    Network,
    NetworkSpec,
    conv,
    count_params,
    dropout,
    fc,
    flatten,
    maxpool,
    propagate_shapes,
    relu,
    softmax_spec,
)
from .optim import SgdConfig, SgdMomentum
from .gradcheck import check_network_gradients, relative_errors

__all__ = [
    "Conv2d",
    "Dense",
    "Dropout",
    "Flatten",
    "LayerSpec",
    "MaxPool2d",
    "Network",
    "NetworkSpec",
    "Param",
    "Relu",
    "SgdConfig",
    "SgdMomentum",
    "ShapeError",
    "Softmax",
    "add_l1_subgradient",
    "check_network_gradients",
    "conv",
    "conv2d_forward",
    "count_params",
    "cross_entropy",
    "dropout",
    "dropout_forward",
    "fc",
    "fc_forward",
    "flatten",
    "l1_penalty",
    "loss_and_grads",
    "maxpool",
    "maxpool2d_forward",
    "propagate_shapes",
    "relative_errors",
    "relu",
    "softmax",
    "softmax_spec",
]
