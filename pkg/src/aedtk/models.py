"""Network architectures and multiple-instance aggregation.

Two builders produce the small-kernel deep CNNs: variant A with four
convolutional and three fully connected layers, and variant B which extends
A with a 256-channel convolution block (deepest stack: nine weight layers).
All convolutions are 3x3, stride 1, unpadded; pools are time x frequency
with stride equal to the pool size; every hidden layer is followed by ReLU
and each hidden fully connected layer by dropout with keep probability 0.5.

`width_divisor` scales all channel and fully-connected widths down for
desk-scale experiments without changing the topology.

For bag-level training the final softmax is replaced by an aggregation over
the instances of a bag, either:

* max: elementwise max over per-instance pre-softmax activations, then
  softmax; or
* noisy-or: per-instance softmax p_j, combined as 1 - prod_j(1 - p_j), then
  renormalized to sum to one so the cross-entropy objective applies
  unchanged.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .nnet import (
    LayerSpec,
    Network,
    NetworkSpec,
    conv,
    dropout,
    fc,
    flatten,
    maxpool,
    relu,
    softmax,
    softmax_spec,
)

AGGREGATIONS = ("max", "noisy_or")


def _scaled(width: int, divisor: int) -> int:
    if divisor < 1:
        raise ValueError("width divisor must be >= 1")
    return max(1, width // divisor)


def build_arch_a(
    num_classes: int,
    patch_frames: int = 400,
    bands: int = 50,
    width_divisor: int = 1,
    dropout_keep: float = 0.5,
) -> NetworkSpec:
    d = width_divisor
    layers = [
        conv(3, _scaled(64, d)),
        relu(),
        conv(_scaled(64, d), _scaled(64, d)),
        relu(),
        maxpool(1, 2),
        conv(_scaled(64, d), _scaled(128, d)),
        relu(),
        conv(_scaled(128, d), _scaled(128, d)),
        relu(),
        maxpool(2, 2),
        flatten(),
        fc(_scaled(1024, d)),
        relu(),
        dropout(dropout_keep),
        fc(_scaled(1024, d)),
        relu(),
        dropout(dropout_keep),
        fc(num_classes),
        softmax_spec(),
    ]
    return NetworkSpec(layers, (3, patch_frames, bands), num_classes)


def build_arch_b(
    num_classes: int,
    patch_frames: int = 400,
    bands: int = 50,
    width_divisor: int = 1,
    dropout_keep: float = 0.5,
) -> NetworkSpec:
    d = width_divisor
    layers = [
        conv(3, _scaled(64, d)),
        relu(),
        conv(_scaled(64, d), _scaled(64, d)),
        relu(),
        maxpool(1, 2),
        conv(_scaled(64, d), _scaled(128, d)),
        relu(),
        conv(_scaled(128, d), _scaled(128, d)),
        relu(),
        maxpool(2, 2),
        # the second convolution of this block takes the 256-channel output
        # of the first; conv(256,256) is also what reproduces the published
        # parameter count
        conv(_scaled(128, d), _scaled(256, d)),
        relu(),
        conv(_scaled(256, d), _scaled(256, d)),
        relu(),
        maxpool(2, 1),
        flatten(),
        fc(_scaled(2048, d)),
        relu(),
        dropout(dropout_keep),
        fc(_scaled(2048, d)),
        relu(),
        dropout(dropout_keep),
        fc(num_classes),
        softmax_spec(),
    ]
    return NetworkSpec(layers, (3, patch_frames, bands), num_classes)


def build_architecture(
    arch: str,
    num_classes: int,
    patch_frames: int = 400,
    bands: int = 50,
    width_divisor: int = 1,
    dropout_keep: float = 0.5,
) -> NetworkSpec:
    builders = {"a": build_arch_a, "b": build_arch_b}
    if arch not in builders:
        raise ValueError(f"unknown architecture {arch!r} (expected 'a' or 'b')")
    return builders[arch](num_classes, patch_frames, bands, width_divisor, dropout_keep)


# ---------------------------------------------------------------------------
# multiple-instance aggregation

def aggregate_max(h: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Max over instances of pre-softmax activations, then softmax.

    h is (bags, instances, classes); returns (proba (bags, classes), argmax
    indices used for gradient routing).
    """
    idx = h.argmax(axis=1)
    hhat = np.take_along_axis(h, idx[:, None, :], axis=1)[:, 0, :]
    return softmax(hhat), idx


def aggregate_noisy_or(p_inst: np.ndarray) -> np.ndarray:
    """Raw noisy-or bag distribution 1 - prod_j (1 - p_ij), not normalized.

    p_inst is (bags, instances, classes).
    """
    return 1.0 - np.prod(1.0 - p_inst, axis=1)


def mil_forward(network: Network, instances: np.ndarray, agg: str) -> np.ndarray:
    """Bag-level class distribution for one bag of shape (N, C, H, W)."""
    instances = np.asarray(instances)
    if instances.ndim != 4 or instances.shape[0] < 1:
        raise ValueError("a bag must be a non-empty (N, C, H, W) array")
    proba, _ = mil_forward_batch(network, instances[None], agg, train=False)
    return proba[0]


def mil_forward_batch(
    network: Network, bags: np.ndarray, agg: str, train: bool = False
) -> tuple[np.ndarray, dict]:
    """Forward a batch of bags (B, N, C, H, W) through the shared network.

    Returns the bag distributions (B, M) plus a cache for mil_backward.
    """
    if agg not in AGGREGATIONS:
        raise ValueError(f"unknown aggregation {agg!r}")
    bags = np.asarray(bags)
    b, n = bags.shape[:2]
    if n < 1:
        raise ValueError("bags must contain at least one instance")
    h = network.forward_logits(bags.reshape((b * n,) + bags.shape[2:]), train=train)
    h = h.reshape(b, n, -1)
    cache: dict = {"agg": agg, "bags": b, "instances": n}
    if agg == "max":
        proba, idx = aggregate_max(h)
        cache["idx"] = idx
        cache["proba"] = proba
    else:
        p_inst = softmax(h)
        if n == 1:
            # a single instance reduces exactly to its own softmax; skip the
            # complement-product round trip so the reduction is bitwise
            raw = p_inst[:, 0, :]
            total = np.ones((b, 1), dtype=raw.dtype)
            proba = raw
        else:
            raw = aggregate_noisy_or(p_inst)
            total = raw.sum(axis=1, keepdims=True)
            proba = raw / np.maximum(total, 1e-300)
        cache["p_inst"] = p_inst
        cache["raw"] = raw
        cache["total"] = total
    return proba, cache


def mil_loss_gradient(cache: dict, labels: np.ndarray) -> np.ndarray:
    """Gradient of mean cross entropy at the per-instance logits (B, N, M).

    For max aggregation the bag gradient routes to each class's argmax
    instance. For noisy-or it flows through the renormalization, the product
    over instances, and each instance's softmax.
    """
    labels = np.asarray(labels)
    b, n = cache["bags"], cache["instances"]
    if cache["agg"] == "max":
        proba = cache["proba"]
        dhhat = proba.copy()
        dhhat[np.arange(b), labels] -= 1.0
        dhhat /= b
        dh = np.zeros((b, n, proba.shape[1]), dtype=dhhat.dtype)
        np.put_along_axis(dh, cache["idx"][:, None, :], dhhat[:, None, :], axis=1)
        return dh
    p_inst = cache["p_inst"]
    raw = cache["raw"]
    total = cache["total"][:, 0]
    m = raw.shape[1]
    # loss = -log(raw[y]/total) = -log raw[y] + log total
    draw = np.ones_like(raw) / np.maximum(total[:, None], 1e-300)
    draw[np.arange(b), labels] -= 1.0 / np.maximum(raw[np.arange(b), labels], 1e-300)
    draw /= b
    # d raw_i / d p_inst[j, i] = prod_{j' != j} (1 - p_inst[j', i])
    one_minus = 1.0 - p_inst
    left = np.ones_like(one_minus)
    np.cumprod(one_minus[:, :-1, :], axis=1, out=left[:, 1:, :])
    right = np.ones_like(one_minus)
    np.cumprod(one_minus[:, :0:-1, :], axis=1, out=right[:, -2::-1, :])
    dp = draw[:, None, :] * left * right
    # back through each instance's softmax
    return p_inst * (dp - (dp * p_inst).sum(axis=2, keepdims=True))


def mil_backward(network: Network, cache: dict, labels: np.ndarray) -> None:
    dh = mil_loss_gradient(cache, labels)
    b, n = cache["bags"], cache["instances"]
    network.backward(dh.reshape(b * n, -1))


def mil_loss(proba: np.ndarray, labels: np.ndarray) -> float:
    labels = np.asarray(labels)
    picked = proba[np.arange(proba.shape[0]), labels]
    return float(np.mean(-np.log(np.maximum(picked, 1e-300))))


# ---------------------------------------------------------------------------
# bag assembly

@dataclass
class Bag:
    """Indices of same-class instances sharing one bag-level label."""

    instance_indices: list[int]
    label: int


def make_bags(labels, bag_size: int, seed: int, epoch: int = 0) -> list[Bag]:
    """Group instance indices into same-class bags of `bag_size`.

    Instances are re-paired every epoch: the permutation is deterministic in
    (seed, epoch). Leftover instances that do not fill a bag are dropped for
    that epoch. Every class must have at least `bag_size` instances.
    """
    labels = np.asarray(labels)
    rng = np.random.default_rng([seed, epoch, 0x6261675F])
    bags: list[Bag] = []
    for cls in np.unique(labels):
        idx = np.flatnonzero(labels == cls)
        if len(idx) < bag_size:
            raise ValueError(
                f"class {cls} has {len(idx)} instances; bags need {bag_size}"
            )
        order = rng.permutation(idx)
        for start in range(0, len(order) - bag_size + 1, bag_size):
            bags.append(Bag(order[start : start + bag_size].tolist(), int(cls)))
    return bags
