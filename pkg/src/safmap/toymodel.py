"""Small synthetic MLP used by the Monte Carlo evaluation harness.

A seeded Gaussian-blob classification task (4 classes in 16 dimensions,
2000 train / 500 test points) and a 16 -> 32 -> 4 ReLU MLP trained with
plain full-batch gradient descent on softmax cross-entropy, implemented
directly on numpy.  Hidden activations are non-negative, so everything
after the first layer can stream as unsigned activations.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .numfmt import MODE_TWOS_COMPLEMENT, MODE_UNSIGNED
from .quant import QuantizedTensor, quantize


class TrainingDivergedError(RuntimeError):
    """Training failed to reach the clean-accuracy floor."""


@dataclass
class DenseLayer:
    weights: np.ndarray  # float64, (fan_in, fan_out)
    bias: np.ndarray  # float64, (fan_out,)
    relu: bool


@dataclass
class ToyModel:
    layers: list[DenseLayer]
    input_dim: int
    classes: int

    def forward(self, x: np.ndarray) -> np.ndarray:
        for layer in self.layers:
            x = x @ layer.weights + layer.bias
            if layer.relu:
                x = np.maximum(x, 0.0)
        return x

    def predict(self, x: np.ndarray) -> np.ndarray:
        return self.forward(x).argmax(axis=1)

    def to_json_dict(self) -> dict:
        return {
            "layers": [
                {
                    "rows": layer.weights.shape[0],
                    "cols": layer.weights.shape[1],
                    "weights": layer.weights.ravel(order="C").tolist(),
                    "bias": layer.bias.tolist(),
                    "relu": layer.relu,
                }
                for layer in self.layers
            ],
            "input_dim": self.input_dim,
            "classes": self.classes,
        }

    @classmethod
    def from_json_dict(cls, obj: dict) -> "ToyModel":
        layers = [
            DenseLayer(
                weights=np.asarray(spec["weights"], dtype=np.float64).reshape(
                    spec["rows"], spec["cols"]
                ),
                bias=np.asarray(spec["bias"], dtype=np.float64),
                relu=bool(spec["relu"]),
            )
            for spec in obj["layers"]
        ]
        return cls(layers=layers, input_dim=obj["input_dim"], classes=obj["classes"])

    def save(self, path: str | Path, extra: dict | None = None) -> None:
        obj = self.to_json_dict()
        if extra:
            obj.update(extra)
        Path(path).write_text(json.dumps(obj))

    @classmethod
    def load(cls, path: str | Path) -> "ToyModel":
        return cls.from_json_dict(json.loads(Path(path).read_text()))


def make_blob_dataset(
    seed: int,
    classes: int = 4,
    dim: int = 16,
    train_points: int = 2000,
    test_points: int = 500,
    center_spread: float = 1.0,
) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Seeded Gaussian blobs; returns (x_train, y_train, x_test, y_test)."""
    rng = np.random.default_rng([seed, 0xDA7A])
    centers = rng.normal(0.0, center_spread, size=(classes, dim))
    total = train_points + test_points
    labels = rng.integers(0, classes, size=total)
    points = centers[labels] + rng.normal(0.0, 1.0, size=(total, dim))
    order = rng.permutation(total)
    points, labels = points[order], labels[order]
    return (
        points[:train_points],
        labels[:train_points],
        points[train_points:],
        labels[train_points:],
    )


def _softmax(z: np.ndarray) -> np.ndarray:
    z = z - z.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def train_toy(
    seed: int = 0,
    hidden: int = 32,
    epochs: int = 400,
    learning_rate: float = 0.05,
    accuracy_floor: float = 0.95,
) -> ToyModel:
    """Train the MLP with full-batch gradient descent; deterministic per seed."""
    x_train, y_train, x_test, y_test = make_blob_dataset(seed)
    dim, classes = x_train.shape[1], int(y_train.max()) + 1
    rng = np.random.default_rng([seed, 0x1417])
    w1 = rng.normal(0.0, np.sqrt(2.0 / dim), size=(dim, hidden))
    b1 = np.zeros(hidden)
    w2 = rng.normal(0.0, np.sqrt(2.0 / hidden), size=(hidden, classes))
    b2 = np.zeros(classes)

    onehot = np.eye(classes)[y_train]
    count = x_train.shape[0]
    for _ in range(epochs):
        h_pre = x_train @ w1 + b1
        h = np.maximum(h_pre, 0.0)
        probs = _softmax(h @ w2 + b2)
        g_out = (probs - onehot) / count
        g_w2 = h.T @ g_out
        g_b2 = g_out.sum(axis=0)
        g_h = (g_out @ w2.T) * (h_pre > 0)
        g_w1 = x_train.T @ g_h
        g_b1 = g_h.sum(axis=0)
        w2 -= learning_rate * g_w2
        b2 -= learning_rate * g_b2
        w1 -= learning_rate * g_w1
        b1 -= learning_rate * g_b1

    model = ToyModel(
        layers=[DenseLayer(w1, b1, relu=True), DenseLayer(w2, b2, relu=False)],
        input_dim=dim,
        classes=classes,
    )
    accuracy = float((model.predict(x_test) == y_test).mean())
    if accuracy < accuracy_floor:
        raise TrainingDivergedError(
            f"clean float accuracy {accuracy:.3f} below floor {accuracy_floor}"
        )
    return model


@dataclass
class QuantizedLayer:
    """One layer ready for integer inference."""

    weights: QuantizedTensor
    bias: np.ndarray
    relu: bool
    act_bits: int
    act_mode: str  # mode the layer's INPUT activations stream in


@dataclass
class QuantizedModel:
    layers: list[QuantizedLayer]

    @property
    def weight_bits(self) -> int:
        return self.layers[0].weights.bits


def quantize_model(
    model: ToyModel, weight_bits: int = 8, act_bits: int = 8
) -> QuantizedModel:
    """Per-tensor symmetric quantization of every layer.

    The first layer sees raw (possibly negative) inputs and streams them
    as two's complement; ReLU outputs stream unsigned.
    """
    layers = []
    mode = MODE_TWOS_COMPLEMENT
    for layer in model.layers:
        layers.append(
            QuantizedLayer(
                weights=quantize(layer.weights, weight_bits, MODE_TWOS_COMPLEMENT),
                bias=layer.bias.copy(),
                relu=layer.relu,
                act_bits=act_bits,
                act_mode=mode,
            )
        )
        mode = MODE_UNSIGNED if layer.relu else MODE_TWOS_COMPLEMENT
    return QuantizedModel(layers=layers)


def quantized_predict(qmodel: QuantizedModel, x: np.ndarray) -> np.ndarray:
    """Software reference of integer inference (exact matrix products)."""
    for layer in qmodel.layers:
        aq = quantize(x, layer.act_bits, layer.act_mode)
        y_int = aq.codes @ layer.weights.codes
        x = y_int.astype(np.float64) * (aq.scale * layer.weights.scale) + layer.bias
        if layer.relu:
            x = np.maximum(x, 0.0)
    return x.argmax(axis=1)
