"""Declarative network specs and their instantiation.

A NetworkSpec is an ordered list of layer descriptions plus the input shape
(channels, time frames, frequency bands) and class count. Specs are plain
data: they serialize to JSON inside checkpoints, and shape propagation over
a spec both validates it and yields the learnable parameter count without
instantiating anything.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .layers import (
    Conv2d,
    Dense,
    Dropout,
    Flatten,
    Layer,
    MaxPool2d,
    Param,
    Relu,
    ShapeError,
    Softmax,
)

KERNEL_SIZES = {"conv3x3": 3, "conv5x5": 5}
LAYER_KINDS = ("conv3x3", "conv5x5", "maxpool", "fc", "relu", "dropout", "softmax", "flatten")


@dataclass
class LayerSpec:
    kind: str
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in LAYER_KINDS:
            raise ValueError(f"unknown layer kind {self.kind!r}")

    def to_dict(self) -> dict:
        return {"kind": self.kind, **self.params}

    @classmethod
    def from_dict(cls, record: dict) -> "LayerSpec":
        params = {k: v for k, v in record.items() if k != "kind"}
        return cls(record["kind"], params)


def conv(in_channels: int, out_channels: int, kernel: int = 3) -> LayerSpec:
    kind = {3: "conv3x3", 5: "conv5x5"}.get(kernel)
    if kind is None:
        raise ValueError(f"unsupported kernel size {kernel}")
    return LayerSpec(kind, {"in_channels": in_channels, "out_channels": out_channels})


def maxpool(pool_t: int, pool_f: int) -> LayerSpec:
    return LayerSpec("maxpool", {"pool_t": pool_t, "pool_f": pool_f})


def fc(width: int) -> LayerSpec:
    return LayerSpec("fc", {"width": width})


def relu() -> LayerSpec:
    return LayerSpec("relu")


def dropout(keep_p: float) -> LayerSpec:
    return LayerSpec("dropout", {"keep_p": keep_p})


def softmax_spec() -> LayerSpec:
    return LayerSpec("softmax")


def flatten() -> LayerSpec:
    return LayerSpec("flatten")


@dataclass
class NetworkSpec:
    layers: list[LayerSpec]
    input_shape: tuple[int, int, int]
    num_classes: int

    def to_dict(self) -> dict:
        return {
            "layers": [layer.to_dict() for layer in self.layers],
            "input_shape": list(self.input_shape),
            "num_classes": self.num_classes,
        }

    @classmethod
    def from_dict(cls, record: dict) -> "NetworkSpec":
        return cls(
            layers=[LayerSpec.from_dict(r) for r in record["layers"]],
            input_shape=tuple(record["input_shape"]),
            num_classes=int(record["num_classes"]),
        )


def propagate_shapes(spec: NetworkSpec) -> list[tuple]:
    """Shapes after each layer, starting from the input. Raises ShapeError
    when a feature map underflows a kernel or pool, or channel counts clash."""
    shape: tuple = spec.input_shape
    shapes = [shape]
    for layer in spec.layers:
        kind = layer.kind
        if kind in KERNEL_SIZES:
            k = KERNEL_SIZES[kind]
            if len(shape) != 3:
                raise ShapeError(f"{kind} needs a (C,H,W) input, got {shape}")
            c, h, w = shape
            if layer.params["in_channels"] != c:
                raise ShapeError(
                    f"{kind} expects {layer.params['in_channels']} channels, got {c}"
                )
            if h < k or w < k:
                raise ShapeError(f"feature map {h}x{w} underflows a {k}x{k} kernel")
            shape = (layer.params["out_channels"], h - k + 1, w - k + 1)
        elif kind == "maxpool":
            c, h, w = shape
            pt, pf = layer.params["pool_t"], layer.params["pool_f"]
            if h < pt or w < pf:
                raise ShapeError(f"feature map {h}x{w} underflows pool {pt}x{pf}")
            shape = (c, h // pt, w // pf)
        elif kind == "flatten":
            shape = (int(np.prod(shape)),)
        elif kind == "fc":
            if len(shape) != 1:
                raise ShapeError(f"fc needs a flat input, got {shape}")
            shape = (layer.params["width"],)
        elif kind in ("relu", "dropout", "softmax"):
            pass
        shapes.append(shape)
    if shapes[-1] != (spec.num_classes,):
        raise ShapeError(
            f"final layer produces {shapes[-1]}, expected ({spec.num_classes},)"
        )
    return shapes


def count_params(spec: NetworkSpec) -> int:
    """Total learnable scalars (weights plus biases)."""
    shapes = propagate_shapes(spec)
    total = 0
    for layer, in_shape in zip(spec.layers, shapes[:-1]):
        if layer.kind in KERNEL_SIZES:
            k = KERNEL_SIZES[layer.kind]
            c_in = layer.params["in_channels"]
            c_out = layer.params["out_channels"]
            total += k * k * c_in * c_out + c_out
        elif layer.kind == "fc":
            total += in_shape[0] * layer.params["width"] + layer.params["width"]
    return total


class Network:
    """An instantiated spec: owns parameters and runs forward/backward.

    Public tensors use (N, C, H, W); internally activations are channels
    last. A trailing softmax layer is kept separate so training code can
    work on logits while `forward_proba` returns normalized distributions.
    """

    def __init__(self, spec: NetworkSpec, seed: int = 0, dtype=np.float32):
        propagate_shapes(spec)
        self.spec = spec
        self.dtype = np.dtype(dtype)
        self.rng = np.random.default_rng(seed)
        init_rng = np.random.default_rng(seed)
        self.layers: list[Layer] = []
        self._has_softmax = bool(spec.layers) and spec.layers[-1].kind == "softmax"
        body = spec.layers[:-1] if self._has_softmax else spec.layers
        shapes = propagate_shapes(spec)
        for i, layer_spec in enumerate(body):
            kind = layer_spec.kind
            if kind in KERNEL_SIZES:
                self.layers.append(
                    Conv2d(
                        layer_spec.params["in_channels"],
                        layer_spec.params["out_channels"],
                        KERNEL_SIZES[kind],
                        init_rng,
                        self.dtype,
                        name=f"layer{i}",
                    )
                )
            elif kind == "maxpool":
                self.layers.append(
                    MaxPool2d(layer_spec.params["pool_t"], layer_spec.params["pool_f"])
                )
            elif kind == "flatten":
                self.layers.append(Flatten())
            elif kind == "fc":
                in_features = shapes[i][0] if len(shapes[i]) == 1 else int(np.prod(shapes[i]))
                self.layers.append(
                    Dense(in_features, layer_spec.params["width"], init_rng, self.dtype, name=f"layer{i}")
                )
            elif kind == "relu":
                self.layers.append(Relu())
            elif kind == "dropout":
                self.layers.append(Dropout(layer_spec.params["keep_p"], lambda: self.rng))
            elif kind == "softmax":
                raise ShapeError("softmax is only supported as the final layer")
        self._softmax = Softmax() if self._has_softmax else None
        if self.layers and isinstance(self.layers[0], Conv2d):
            # nothing consumes the gradient at the network input
            self.layers[0].needs_input_grad = False

    def set_rng(self, rng: np.random.Generator):
        self.rng = rng

    def forward_logits(self, x: np.ndarray, train: bool = False) -> np.ndarray:
        """Run every layer except the trailing softmax. x is (N, C, H, W)."""
        x = np.ascontiguousarray(np.asarray(x, dtype=self.dtype).transpose(0, 2, 3, 1))
        for layer in self.layers:
            x = layer.forward(x, train)
        return x

    def forward_proba(self, x: np.ndarray, train: bool = False) -> np.ndarray:
        logits = self.forward_logits(x, train)
        if self._softmax is None:
            return logits
        return self._softmax.forward(logits, train=False)

    def backward(self, dlogits: np.ndarray) -> None:
        """Accumulate parameter gradients from the loss gradient at the
        logits. Requires a preceding train-mode forward_logits call."""
        dy = dlogits.astype(self.dtype, copy=False)
        for layer in reversed(self.layers):
            dy = layer.backward(dy)

    def params(self) -> list[Param]:
        out = []
        for layer in self.layers:
            out.extend(layer.params())
        return out

    def weight_params(self) -> list[Param]:
        return [p for p in self.params() if p.is_weight]

    def zero_grads(self):
        for p in self.params():
            p.zero_grad()

    def state_dict(self) -> dict[str, np.ndarray]:
        """Parameter arrays in the public layout: conv weights (F,C,k,k),
        dense weights (D_out, D_in)."""
        state = {}
        for layer in self.layers:
            for p in layer.params():
                value = p.value
                if isinstance(layer, Conv2d) and p.is_weight:
                    value = value.transpose(3, 2, 0, 1)
                elif isinstance(layer, Dense) and p.is_weight:
                    value = value.T
                state[p.name] = np.ascontiguousarray(value)
        return state

    def load_state_dict(self, state: dict[str, np.ndarray]):
        for layer in self.layers:
            for p in layer.params():
                if p.name not in state:
                    raise KeyError(f"checkpoint is missing parameter {p.name}")
                value = np.asarray(state[p.name], dtype=self.dtype)
                if isinstance(layer, Conv2d) and p.is_weight:
                    value = value.transpose(2, 3, 1, 0)
                elif isinstance(layer, Dense) and p.is_weight:
                    value = value.T
                if value.shape != p.value.shape:
                    raise ShapeError(
                        f"parameter {p.name}: shape {value.shape} != {p.value.shape}"
                    )
                p.value[...] = value
