"""Clustering, classification, and evaluation for behavior labeling.

Kmeans (Lloyd's algorithm from a nominal, named initialization) bootstraps
labels; a one-vs-rest linear SVM trained by seeded stochastic subgradient
descent on the L2-regularized hinge loss learns from verified labels.
Both models serialize to JSON and round-trip exactly.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ValidationError
from .store.types import utc_now_iso

# Nominal starting centroids for the three airport behaviors, expressed on
# the 5-bin vertical-rate histogram (strong descent ... strong climb).
NOMINAL_CENTROIDS = {
    "landing": (0.5, 0.5, 0.0, 0.0, 0.0),
    "touch_and_go": (0.0, 0.3, 0.4, 0.3, 0.0),
    "takeoff": (0.0, 0.0, 0.0, 0.5, 0.5),
}


@dataclass
class KmeansModel:
    centroids: np.ndarray  # k x d
    class_names: tuple[str, ...]

    def __post_init__(self):
        self.centroids = np.asarray(self.centroids, dtype=float)
        if len(self.centroids) != len(self.class_names):
            raise ValidationError("one class name per centroid required")

    @property
    def k(self) -> int:
        return len(self.class_names)


def nominal_kmeans_init() -> KmeansModel:
    names = tuple(NOMINAL_CENTROIDS)
    return KmeansModel(
        centroids=np.array([NOMINAL_CENTROIDS[n] for n in names]),
        class_names=names,
    )


def kmeans_fit(features: np.ndarray, init: KmeansModel, max_iter: int = 100,
               tol: float = 1e-6) -> KmeansModel:
    """Lloyd iterations from the given initialization.

    Class names stay attached to the centroid they initialized; a cluster
    that loses all members keeps its previous centroid.
    """
    X = np.asarray(features, dtype=float)
    if X.ndim != 2:
        raise ValidationError("features must be a 2-D array")
    if len(X) < init.k:
        raise ValidationError(f"need at least {init.k} points, got {len(X)}")
    centroids = init.centroids.copy()
    for _ in range(max_iter):
        d2 = ((X[:, None, :] - centroids[None, :, :]) ** 2).sum(axis=2)
        assign = np.argmin(d2, axis=1)
        new = centroids.copy()
        for j in range(init.k):
            members = X[assign == j]
            if len(members):
                new[j] = members.mean(axis=0)
        shift = float(np.max(np.linalg.norm(new - centroids, axis=1)))
        centroids = new
        if shift < tol:
            break
    return KmeansModel(centroids=centroids, class_names=init.class_names)


def kmeans_assign(model: KmeansModel, feature) -> str:
    """Class of the nearest centroid; ties go to the lowest class index."""
    x = np.asarray(feature, dtype=float)
    d2 = ((model.centroids - x) ** 2).sum(axis=1)
    return model.class_names[int(np.argmin(d2))]


def kmeans_objective(model: KmeansModel, features) -> float:
    X = np.asarray(features, dtype=float)
    d2 = ((X[:, None, :] - model.centroids[None, :, :]) ** 2).sum(axis=2)
    return float(d2.min(axis=1).sum())


@dataclass
class SvmModel:
    weights: np.ndarray  # k x d
    biases: np.ndarray  # k
    class_names: tuple[str, ...]
    hyperparameters: dict = field(default_factory=dict)

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=float)
        self.biases = np.asarray(self.biases, dtype=float)
        if len(self.weights) != len(self.class_names) or len(self.biases) != len(self.class_names):
            raise ValidationError("one weight vector and bias per class required")


def svm_train(features, labels: list[str], lam: float = 1e-3, epochs: int = 200,
              seed: int = 0, class_names: tuple[str, ...] | None = None) -> SvmModel:
    """One-vs-rest linear SVM via Pegasos-style subgradient descent.

    The step size at update t is 1/(lam*t). Training order is a seeded
    shuffle per epoch, so results are bit-for-bit reproducible for a given
    (data order, seed).
    """
    X = np.asarray(features, dtype=float)
    if X.ndim != 2 or len(X) != len(labels):
        raise ValidationError("features/labels shape mismatch")
    present = sorted(set(labels))
    if len(present) < 2:
        raise ValidationError("need at least 2 classes to train")
    if class_names is None:
        names = tuple(present)
    else:
        unknown = set(labels) - set(class_names)
        if unknown:
            raise ValidationError(f"labels outside class set: {sorted(unknown)}")
        names = tuple(class_names)

    n, d = X.shape
    rng = np.random.default_rng(seed)
    # bias as an augmented constant feature keeps the 1/(lam*t) schedule
    # stable; a free bias takes a 1/lam-sized first step and never recovers
    Xa = np.hstack([X, np.ones((n, 1))])
    weights = np.zeros((len(names), d))
    biases = np.zeros(len(names))
    for ci, cls in enumerate(names):
        y = np.where(np.array(labels) == cls, 1.0, -1.0)
        w = np.zeros(d + 1)
        t = 0
        for _ in range(epochs):
            for i in rng.permutation(n):
                t += 1
                eta = 1.0 / (lam * t)
                violated = y[i] * (w @ Xa[i]) < 1.0
                w = (1.0 - eta * lam) * w
                if violated:
                    w = w + eta * y[i] * Xa[i]
        weights[ci] = w[:d]
        biases[ci] = w[d]
    return SvmModel(
        weights=weights, biases=biases, class_names=names,
        hyperparameters={"lambda": lam, "epochs": epochs, "seed": seed},
    )


def svm_decision(model: SvmModel, feature) -> np.ndarray:
    x = np.asarray(feature, dtype=float)
    return model.weights @ x + model.biases


def svm_predict(model: SvmModel, feature) -> str:
    """Argmax of the per-class decision values; ties to the lowest index."""
    return model.class_names[int(np.argmax(svm_decision(model, feature)))]


def svm_objective(model: SvmModel, features, labels: list[str]) -> float:
    """Summed one-vs-rest regularized hinge objective (lower is better)."""
    X = np.asarray(features, dtype=float)
    lam = model.hyperparameters.get("lambda", 1e-3)
    total = 0.0
    for ci, cls in enumerate(model.class_names):
        y = np.where(np.array(labels) == cls, 1.0, -1.0)
        margins = y * (X @ model.weights[ci] + model.biases[ci])
        total += lam / 2.0 * float(model.weights[ci] @ model.weights[ci])
        total += float(np.maximum(0.0, 1.0 - margins).mean())
    return total


@dataclass(frozen=True)
class EvalReport:
    accuracy: float
    class_names: tuple[str, ...]
    precision: dict[str, float]
    recall: dict[str, float]
    f1: dict[str, float]
    support: dict[str, int]
    confusion: tuple[tuple[int, ...], ...]  # rows = truth, cols = predicted
    zero_division_flags: tuple[str, ...] = ()

    def to_dict(self) -> dict:
        return {
            "accuracy": self.accuracy,
            "class_names": list(self.class_names),
            "precision": dict(self.precision),
            "recall": dict(self.recall),
            "f1": dict(self.f1),
            "support": dict(self.support),
            "confusion": [list(row) for row in self.confusion],
            "zero_division_flags": list(self.zero_division_flags),
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "EvalReport":
        return cls(
            accuracy=doc["accuracy"],
            class_names=tuple(doc["class_names"]),
            precision=dict(doc["precision"]),
            recall=dict(doc["recall"]),
            f1=dict(doc["f1"]),
            support=dict(doc["support"]),
            confusion=tuple(tuple(row) for row in doc["confusion"]),
            zero_division_flags=tuple(doc.get("zero_division_flags", ())),
        )


def f1_score(precision: float, recall: float) -> float:
    if precision + recall == 0:
        return 0.0
    return 2.0 * precision * recall / (precision + recall)


def evaluate(predicted: list[str], truth: list[str],
             class_names: tuple[str, ...]) -> EvalReport:
    """Accuracy, per-class precision/recall/F1, and the confusion matrix.

    Zero-denominator precision or recall yields 0 and is flagged rather
    than raising.
    """
    if len(predicted) != len(truth):
        raise ValidationError("predicted/truth length mismatch")
    if not predicted:
        raise ValidationError("cannot evaluate empty label lists")
    index = {name: i for i, name in enumerate(class_names)}
    unknown = (set(predicted) | set(truth)) - set(class_names)
    if unknown:
        raise ValidationError(f"labels outside class set: {sorted(unknown)}")
    k = len(class_names)
    confusion = np.zeros((k, k), dtype=int)
    for p, t in zip(predicted, truth):
        confusion[index[t], index[p]] += 1
    total = confusion.sum()
    accuracy = float(np.trace(confusion)) / float(total)
    precision, recall, f1, support = {}, {}, {}, {}
    flags = []
    for i, name in enumerate(class_names):
        tp = int(confusion[i, i])
        fp = int(confusion[:, i].sum()) - tp
        fn = int(confusion[i, :].sum()) - tp
        if tp + fp == 0:
            precision[name] = 0.0
            flags.append(f"precision/{name}")
        else:
            precision[name] = tp / (tp + fp)
        if tp + fn == 0:
            recall[name] = 0.0
            flags.append(f"recall/{name}")
        else:
            recall[name] = tp / (tp + fn)
        f1[name] = f1_score(precision[name], recall[name])
        support[name] = tp + fn
    return EvalReport(
        accuracy=accuracy,
        class_names=tuple(class_names),
        precision=precision,
        recall=recall,
        f1=f1,
        support=support,
        confusion=tuple(tuple(int(v) for v in row) for row in confusion),
        zero_division_flags=tuple(flags),
    )


def model_to_json(model: KmeansModel | SvmModel) -> dict:
    """Serialize a model; floats survive the JSON round trip exactly."""
    if isinstance(model, KmeansModel):
        return {
            "kind": "kmeans",
            "class_names": list(model.class_names),
            "centroids": model.centroids.tolist(),
            "hyperparameters": {},
            "seed": None,
            "created_at": utc_now_iso(),
        }
    if isinstance(model, SvmModel):
        return {
            "kind": "svm",
            "class_names": list(model.class_names),
            "weights": model.weights.tolist(),
            "biases": model.biases.tolist(),
            "hyperparameters": dict(model.hyperparameters),
            "seed": model.hyperparameters.get("seed"),
            "created_at": utc_now_iso(),
        }
    raise ValidationError(f"unknown model type: {type(model).__name__}")


def model_from_json(doc: dict) -> KmeansModel | SvmModel:
    kind = doc.get("kind")
    if kind == "kmeans":
        return KmeansModel(
            centroids=np.array(doc["centroids"], dtype=float),
            class_names=tuple(doc["class_names"]),
        )
    if kind == "svm":
        return SvmModel(
            weights=np.array(doc["weights"], dtype=float),
            biases=np.array(doc["biases"], dtype=float),
            class_names=tuple(doc["class_names"]),
            hyperparameters=dict(doc.get("hyperparameters", {})),
        )
    raise ValidationError(f"unknown model kind: {kind!r}")
