"""Training objective: mean cross entropy plus an L1 penalty on weights.

The penalty covers weight matrices/kernels only, never biases, and its
subgradient at exactly zero is taken as zero.
"""

from __future__ import annotations

import numpy as np

from .layers import Param, softmax


def cross_entropy(logits: np.ndarray, labels: np.ndarray) -> tuple[float, np.ndarray]:
    """Mean negative log-likelihood over the batch and its logit gradient."""
    labels = np.asarray(labels)
    n = logits.shape[0]
    if labels.shape != (n,):
        raise ValueError(f"labels shape {labels.shape} does not match batch {n}")
    if labels.min() < 0 or labels.max() >= logits.shape[1]:
        raise ValueError("label index out of range")
    shifted = logits - logits.max(axis=1, keepdims=True)
    log_z = np.log(np.exp(shifted).sum(axis=1))
    loss = float(np.mean(log_z - shifted[np.arange(n), labels]))
    dlogits = softmax(logits)
    dlogits[np.arange(n), labels] -= 1.0
    return loss, dlogits / n


def l1_penalty(weight_params: list[Param], lam: float) -> float:
    return lam * float(sum(np.abs(p.value).sum() for p in weight_params))


def add_l1_subgradient(weight_params: list[Param], lam: float) -> None:
    for p in weight_params:
        p.grad += lam * np.sign(p.value)


def loss_and_grads(network, x: np.ndarray, labels: np.ndarray, lam: float) -> float:
    """One train-mode forward/backward pass through `network`.

    Parameter gradients are zeroed first, then filled with the gradient of
    mean cross entropy at the labels plus lam * sum|W|. Returns the loss.
    """
    network.zero_grads()
    logits = network.forward_logits(x, train=True)
    loss, dlogits = cross_entropy(logits, labels)
    network.backward(dlogits)
    weights = network.weight_params()
    loss += l1_penalty(weights, lam)
    add_l1_subgradient(weights, lam)
    return loss
