"""One-hidden-layer classifier with Monte Carlo dropout, in plain numpy."""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from eerlab.errors import TrainingError
from eerlab.posterior import PosteriorPredictiveTensor

CHECKPOINT_FORMAT = "eerlab-mlp-1"
_PARAMS = ("W1", "b1", "W2", "b2")


def softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=1, keepdims=True)
    np.exp(z, out=z)
    z /= z.sum(axis=1, keepdims=True)
    return z


class DropoutMlp:
    """``input -> ReLU hidden -> dropout -> softmax`` trained with SGD.

    Optimiser defaults mirror a standard image-classification recipe: momentum
    0.9, weight decay 5e-4, learning rate divided by 10 every ``lr_step``
    iterations. Dropout is inverted (survivors scaled by ``1 / (1 - p)``), so
    :meth:`point_predictive` simply runs without a mask.

    At inference each Monte Carlo pass draws one hidden-unit mask and applies
    it to every input, which makes a pass a single parameter sample shared by
    all points. Per-example masks would make labels of different points
    independent within a pass and erase their posterior correlation.
    """

    def __init__(
        self,
        n_features: int,
        n_classes: int,
        hidden: int = 64,
        dropout: float = 0.25,
        lr: float = 0.05,
        momentum: float = 0.9,
        weight_decay: float = 5e-4,
        batch_size: int = 64,
        lr_step: int | None = None,
        seed=0,
    ):
        if n_classes < 2:
            raise ValueError("need at least two classes")
        if not 0.0 <= dropout < 1.0:
            raise ValueError("dropout rate must lie in [0, 1)")
        self.n_features = int(n_features)
        self.n_classes = int(n_classes)
        self.hidden = int(hidden)
        self.dropout = float(dropout)
        self.lr = float(lr)
        self.momentum = float(momentum)
        self.weight_decay = float(weight_decay)
        self.batch_size = int(batch_size)
        self.lr_step = lr_step
        self.rng = np.random.default_rng(seed)
        self.iterations_done = 0

        # He initialisation for the ReLU layer, Glorot-style for the output.
        self.W1 = self.rng.normal(0.0, np.sqrt(2.0 / n_features), (n_features, hidden))
        self.b1 = np.zeros(hidden)
        self.W2 = self.rng.normal(0.0, np.sqrt(1.0 / hidden), (hidden, n_classes))
        self.b2 = np.zeros(n_classes)
        self._velocity = {name: np.zeros_like(getattr(self, name)) for name in _PARAMS}

    # -- forward / backward -------------------------------------------------

    def params(self) -> dict[str, np.ndarray]:
        return {name: getattr(self, name) for name in _PARAMS}

    def _hidden(self, X: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        z1 = X @ self.W1 + self.b1
        return z1, np.maximum(z1, 0.0)

    def loss_and_grads(self, X, y, mask=None) -> tuple[float, dict[str, np.ndarray]]:
        """Mean cross-entropy and its exact gradients.

        ``mask`` multiplies the hidden activations (already scaled); ``None``
        means no dropout. Weight decay is not part of the loss.
        """
        X = np.asarray(X, dtype=np.float64)
        y = np.asarray(y, dtype=np.intp)
        n = X.shape[0]
        z1, a1 = self._hidden(X)
        d1 = a1 if mask is None else a1 * mask
        probs = softmax(d1 @ self.W2 + self.b2)
        loss = float(-np.log(np.maximum(probs[np.arange(n), y], 1e-300)).mean())

        dlogits = probs
        dlogits[np.arange(n), y] -= 1.0
        dlogits /= n
        grads = {"W2": d1.T @ dlogits, "b2": dlogits.sum(axis=0)}
        dd1 = dlogits @ self.W2.T
        if mask is not None:
            dd1 = dd1 * mask
        dz1 = dd1 * (z1 > 0)
        grads["W1"] = X.T @ dz1
        grads["b1"] = dz1.sum(axis=0)
        return loss, grads

    def _train_mask(self, n: int) -> np.ndarray | None:
        if self.dropout == 0.0:
            return None
        keep = 1.0 - self.dropout
        return (self.rng.random((n, self.hidden)) < keep) / keep

    # -- training -----------------------------------------------------------

    def fit(self, X, y, iterations: int) -> "DropoutMlp":
        """Run ``iterations`` minibatch SGD steps on ``(X, y)``.

        Continues from the current weights; build a fresh model to retrain
        from scratch.
        """
        X = np.asarray(X, dtype=np.float64)
        y = np.asarray(y, dtype=np.intp)
        if X.shape[0] < 1:
            raise ValueError("need at least one training sample")
        if y.min() < 0 or y.max() >= self.n_classes:
            raise ValueError("labels outside [0, n_classes)")
        n = X.shape[0]
        bs = min(self.batch_size, n)
        order = self.rng.permutation(n)
        cursor = 0
        for _ in range(iterations):
            if cursor + bs > n:
                order = self.rng.permutation(n)
                cursor = 0
            batch = order[cursor:cursor + bs]
            cursor += bs
            loss, grads = self.loss_and_grads(X[batch], y[batch], self._train_mask(bs))
            if not np.isfinite(loss):
                raise TrainingError("non-finite training loss", self.iterations_done)
            lr = self.current_lr()
            for name in _PARAMS:
                w = getattr(self, name)
                g = grads[name] + self.weight_decay * w
                v = self._velocity[name]
                v *= self.momentum
                v += g
                w -= lr * v
            self.iterations_done += 1
        return self

    def current_lr(self) -> float:
        if not self.lr_step:
            return self.lr
        return self.lr * 0.1 ** (self.iterations_done // self.lr_step)

    # -- inference ----------------------------------------------------------

    def point_predictive(self, X) -> np.ndarray:
        """``(N, C)`` softmax outputs with dropout disabled."""
        _, a1 = self._hidden(np.asarray(X, dtype=np.float64))
        return softmax(a1 @ self.W2 + self.b2)

    def predict(self, X) -> np.ndarray:
        return self.point_predictive(X).argmax(axis=1)

    def embeddings(self, X) -> np.ndarray:
        """Penultimate (post-ReLU hidden) representation."""
        return self._hidden(np.asarray(X, dtype=np.float64))[1]

    def posterior_predictive(self, X, T: int, seed) -> PosteriorPredictiveTensor:
        """``T`` dropout passes, one shared hidden mask per pass."""
        if T < 1:
            raise ValueError("T must be at least 1")
        _, a1 = self._hidden(np.asarray(X, dtype=np.float64))
        rng = np.random.default_rng(seed)
        keep = 1.0 - self.dropout
        out = np.empty((T, a1.shape[0], self.n_classes))
        for t in range(T):
            if self.dropout == 0.0:
                h = a1
            else:
                h = a1 * ((rng.random(self.hidden) < keep) / keep)
            out[t] = softmax(h @ self.W2 + self.b2)
        return PosteriorPredictiveTensor(out, check=False)

    # -- checkpoints --------------------------------------------------------

    def _hyper(self) -> dict:
        return {
            "n_features": self.n_features,
            "n_classes": self.n_classes,
            "hidden": self.hidden,
            "dropout": self.dropout,
            "lr": self.lr,
            "momentum": self.momentum,
            "weight_decay": self.weight_decay,
            "batch_size": self.batch_size,
            "lr_step": self.lr_step,
        }

    def save(self, path) -> None:
        """Write weights, optimiser state and RNG state to an ``.npz`` file."""
        meta = {
            "format": CHECKPOINT_FORMAT,
            "hyper": self._hyper(),
            "iterations_done": self.iterations_done,
            "rng": self.rng.bit_generator.state,
        }
        arrays = {name: getattr(self, name) for name in _PARAMS}
        arrays.update({f"v_{name}": v for name, v in self._velocity.items()})
        with open(Path(path), "wb") as fh:
            np.savez(fh, meta=np.array(json.dumps(meta)), **arrays)

    @classmethod
    def load(cls, path) -> "DropoutMlp":
        with np.load(Path(path), allow_pickle=False) as data:
            meta = json.loads(str(data["meta"]))
            if meta.get("format") != CHECKPOINT_FORMAT:
                raise ValueError(f"unsupported checkpoint format {meta.get('format')!r}")
            model = cls(**meta["hyper"], seed=0)
            for name in _PARAMS:
                setattr(model, name, data[name].copy())
                model._velocity[name] = data[f"v_{name}"].copy()
        model.iterations_done = meta["iterations_done"]
        model.rng.bit_generator.state = meta["rng"]
        return model
