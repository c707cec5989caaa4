"""One-vs-rest linear SVMs trained by seeded stochastic subgradient descent.

Each category minimises

    lam/2 * (|w|^2 + b^2) + mean_i max(0, 1 - y_i (w.x_i + b))

with Pegasos steps ``1 / (lam * t)`` and projection onto the ball of radius
``1 / sqrt(lam)``. The bias is treated as the weight of a constant feature, so
it is regularised too. Stochastic steps are not monotone, so after every epoch
the full objective is evaluated and the best iterate so far is kept; the
recorded checkpoint history is therefore non-increasing.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence, Union

import numpy as np

from ..model import CATEGORY_ORDER, Category

Vector = Union[Mapping[int, float], Sequence[float], np.ndarray]


@dataclass(frozen=True)
class SvmModel:
    categories: tuple[Category, ...]
    weights: np.ndarray  # (len(categories), dim)
    bias: np.ndarray  # (len(categories),)
    lam: float
    epochs: int = 20
    seed: int = 0
    history: Mapping[Category, tuple[float, ...]] = field(default_factory=dict)

    @property
    def dim(self) -> int:
        return self.weights.shape[1]

    def to_json(self) -> dict:
        return {
            "kind": "svm",
            "lam": self.lam,
            "epochs": self.epochs,
            "seed": self.seed,
            "categories": [c.value for c in self.categories],
            "weights": self.weights.tolist(),
            "bias": self.bias.tolist(),
            "history": {c.value: list(h) for c, h in self.history.items()},
        }

    @classmethod
    def from_json(cls, data: Mapping) -> "SvmModel":
        cats = tuple(Category.parse(c) for c in data["categories"])
        return cls(
            categories=cats,
            weights=np.asarray(data["weights"], dtype=float).reshape(len(cats), -1),
            bias=np.asarray(data["bias"], dtype=float),
            lam=float(data["lam"]),
            epochs=int(data["epochs"]),
            seed=int(data["seed"]),
            history={Category.parse(k): tuple(v) for k, v in data.get("history", {}).items()},
        )


def _as_matrix(vectors: Sequence[Vector] | np.ndarray, dim: int | None) -> np.ndarray:
    if isinstance(vectors, np.ndarray):
        return np.asarray(vectors, dtype=float)
    if vectors and isinstance(vectors[0], Mapping):
        if dim is None:
            raise ValueError("dim is required for sparse vectors")
        X = np.zeros((len(vectors), dim))
        for row, vec in enumerate(vectors):
            for i, w in vec.items():  # type: ignore[union-attr]
                X[row, i] = w
        return X
    return np.asarray(vectors, dtype=float)


def hinge_subgradient(w: np.ndarray, b: float, x: np.ndarray, y: float) -> tuple[np.ndarray, float]:
    """Subgradient of ``max(0, 1 - y(w.x + b))``; zero once the margin reaches 1."""
    if y * (float(w @ x) + b) >= 1.0:
        return np.zeros_like(w), 0.0
    return -y * x, -y


def svm_objective(w: np.ndarray, b: float, X: np.ndarray, y: np.ndarray, lam: float) -> float:
    margins = y * (X @ w + b)
    return 0.5 * lam * (float(w @ w) + b * b) + float(np.mean(np.maximum(0.0, 1.0 - margins)))


def _train_binary(X: np.ndarray, y: np.ndarray, lam: float, epochs: int, rng: np.random.Generator):
    n, d = X.shape
    Xa = np.hstack([X, np.ones((n, 1))])
    w = np.zeros(d + 1)
    radius = 1.0 / math.sqrt(lam)
    best_w = w.copy()
    best_obj = svm_objective(w[:d], w[d], X, y, lam)
    history = [best_obj]
    w_avg = np.zeros(d + 1)  # running mean of the iterates
    t = 0
    for _ in range(epochs):
        for i in rng.permutation(n):
            t += 1
            eta = 1.0 / (lam * t)
            violated = y[i] * float(Xa[i] @ w) < 1.0
            w *= 1.0 - eta * lam
            if violated:
                w += eta * y[i] * Xa[i]
            norm = float(np.linalg.norm(w))
            if norm > radius:
                w *= radius / norm
            w_avg += (w - w_avg) / t
        # the last iterate oscillates for small lambda; the average is the one with the convergence guarantee
        for cand in (w, w_avg):
            obj = svm_objective(cand[:d], cand[d], X, y, lam)
            if obj < best_obj:
                best_obj, best_w = obj, cand.copy()
        history.append(best_obj)
    return best_w[:d], float(best_w[d]), tuple(history)


def svm_train(
    vectors: Sequence[Vector] | np.ndarray,
    labels: Mapping[Category, Sequence[bool]],
    lam: float = 1e-4,
    epochs: int = 20,
    seed: int = 0,
    dim: int | None = None,
) -> SvmModel:
    """Train one binary separator per category in ``labels``.

    ``labels[c][i]`` says whether example ``i`` belongs to category ``c``.
    """
    if not lam > 0:
        raise ValueError("lam must be positive")
    if epochs < 1:
        raise ValueError("epochs must be >= 1")
    X = _as_matrix(vectors, dim)
    if X.ndim != 2 or X.shape[0] == 0:
        raise ValueError("need a non-empty 2-D set of training vectors")
    cats = tuple(c for c in CATEGORY_ORDER if c in labels)
    if not cats:
        raise ValueError("no categories to train")
    weights, bias, history = [], [], {}
    for cat in cats:
        y = np.where(np.asarray(labels[cat], dtype=bool), 1.0, -1.0)
        if y.shape[0] != X.shape[0]:
            raise ValueError(f"{cat}: {y.shape[0]} labels for {X.shape[0]} vectors")
        if not (y > 0).any() or not (y < 0).any():
            raise ValueError(f"{cat}: need at least one positive and one negative example")
        # one independent stream per category, fixed by (seed, category)
        rng = np.random.default_rng([seed, cat.rank])
        w, b, hist = _train_binary(X, y, lam, epochs, rng)
        weights.append(w)
        bias.append(b)
        history[cat] = hist
    return SvmModel(cats, np.vstack(weights), np.asarray(bias), lam, epochs, seed, history)


def svm_margins(model: SvmModel, vector: Vector) -> dict[Category, float]:
    if isinstance(vector, Mapping):
        if any(not 0 <= i < model.dim for i in vector):
            raise ValueError(f"sparse index outside model dimension {model.dim}")
        idx = np.fromiter(vector.keys(), dtype=int, count=len(vector))
        val = np.fromiter(vector.values(), dtype=float, count=len(vector))
        raw = model.weights[:, idx] @ val + model.bias
    else:
        x = np.asarray(vector, dtype=float)
        if x.shape != (model.dim,):
            raise ValueError(f"vector dimension {x.shape} does not match model dimension {model.dim}")
        raw = model.weights @ x + model.bias
    return {c: float(m) for c, m in zip(model.categories, raw)}


def svm_classify(model: SvmModel, vector: Vector) -> tuple[frozenset[Category], dict[Category, float]]:
    margins = svm_margins(model, vector)
    return frozenset(c for c, m in margins.items() if m > 0), margins
