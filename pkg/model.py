"""Hybrid quantum-classical classifier.

QuantumConv (one kernel) -> flatten -> dense(n_features -> hidden) -> RReLU
-> dense(hidden -> n_classes) -> softmax.
"""
import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np

import nn
from qconv import QuantumConv
from templates import CircuitTemplate

logger = logging.getLogger(__name__)


@dataclass
class ForwardCache:
    """Activations kept for the backward pass."""

    images: np.ndarray
    features: np.ndarray
    hidden_pre: np.ndarray
    hidden: np.ndarray
    slopes: np.ndarray
    feature_shape: tuple[int, int]


class HybridModel:
    """QCNN block plus a two-layer classical head."""

    def __init__(
        self,
        template: CircuitTemplate,
        image_size: int,
        hidden_width: int,
        rng: np.random.Generator,
        stride: int = 1,
        n_classes: int = 2,
    ):
        self.conv = QuantumConv.initialized(template, rng, stride)
        self.feature_shape = self.conv.output_shape(image_size, image_size)
        self.n_features = self.feature_shape[0] * self.feature_shape[1]
        self.dense1 = nn.DenseLayer.initialized(self.n_features, hidden_width, rng)
        self.dense2 = nn.DenseLayer.initialized(hidden_width, n_classes, rng)

    # ============ PARAMETERS ============

    def parameters(self) -> dict[str, np.ndarray]:
        return {
            "quantum": self.conv.params,
            "dense1.weight": self.dense1.weights,
            "dense1.bias": self.dense1.bias,
            "dense2.weight": self.dense2.weights,
            "dense2.bias": self.dense2.bias,
        }

    def set_parameters(self, params: dict[str, np.ndarray]) -> None:
        self.conv.params = np.asarray(params["quantum"], dtype=np.float64)
        self.dense1 = nn.DenseLayer(params["dense1.weight"], params["dense1.bias"])
        self.dense2 = nn.DenseLayer(params["dense2.weight"], params["dense2.bias"])

    @property
    def n_parameters(self) -> int:
        return sum(p.size for p in self.parameters().values())

    # ============ FORWARD / BACKWARD ============

    def forward(
        self,
        images: np.ndarray,
        mode: str = nn.EVAL,
        rng: Optional[np.random.Generator] = None,
        slopes: Optional[np.ndarray] = None,
    ) -> tuple[np.ndarray, ForwardCache]:
        """Logits for a batch of angle images (N, H, W, C)."""
        maps = self.conv.forward(images)
        features = maps.reshape(maps.shape[0], -1)
        hidden_pre = nn.dense_forward(self.dense1, features)
        hidden, used_slopes = nn.rrelu(hidden_pre, mode, rng, slopes)
        logits = nn.dense_forward(self.dense2, hidden)
        cache = ForwardCache(images, features, hidden_pre, hidden, used_slopes, maps.shape[1:])
        return logits, cache

    def backward(self, cache: ForwardCache, dlogits: np.ndarray) -> dict[str, np.ndarray]:
        """Gradients for every entry of parameters()."""
        dw2, db2, dhidden = nn.dense_backward(self.dense2, cache.hidden, dlogits)
        dpre = nn.rrelu_backward(cache.hidden_pre, cache.slopes, dhidden)
        dw1, db1, dfeatures = nn.dense_backward(self.dense1, cache.features, dpre)
        upstream = dfeatures.reshape((-1,) + tuple(cache.feature_shape))
        dq = self.conv.backward(cache.images, upstream)
        return {
            "quantum": dq,
            "dense1.weight": dw1,
            "dense1.bias": db1,
            "dense2.weight": dw2,
            "dense2.bias": db2,
        }

    def loss_and_grads(
        self,
        images: np.ndarray,
        labels: np.ndarray,
        mode: str = nn.TRAIN,
        rng: Optional[np.random.Generator] = None,
        slopes: Optional[np.ndarray] = None,
    ) -> tuple[float, np.ndarray, dict[str, np.ndarray]]:
        logits, cache = self.forward(images, mode, rng, slopes)
        loss, dlogits = nn.softmax_xent(logits, labels)
        return loss, logits, self.backward(cache, dlogits)

    def loss(self, images: np.ndarray, labels: np.ndarray, slopes: Optional[np.ndarray] = None) -> float:
        """Batch-mean loss; eval-mode slopes unless frozen slopes are given."""
        logits, _ = self.forward(images, nn.EVAL, slopes=slopes)
        return nn.softmax_xent(logits, labels)[0]

    def predict_proba(self, images: np.ndarray) -> np.ndarray:
        logits, _ = self.forward(images, nn.EVAL)
        return nn.softmax(logits)

    def predict(self, images: np.ndarray) -> np.ndarray:
        return np.argmax(self.predict_proba(images), axis=-1)
