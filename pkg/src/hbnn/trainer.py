"""Training loop: feature embedding, optimizers, metrics, evaluation.

Euclidean feature vectors enter hyperbolic space through a norm clip
followed by the origin exponential map.  All optimization is plain
Euclidean on the raw (unconstrained) parameters; the constrained values
(positive scales, unit directions, on-manifold biases) are realized at
read time inside the layers, so no Riemannian machinery is needed.

Per-epoch wall-clock is recorded separately from the metric history: the
history must be bit-reproducible across identical runs, and timing is not.
"""

from __future__ import annotations

import math
import time
import warnings
from dataclasses import dataclass, field

import numpy as np
from sklearn.metrics import (
    accuracy_score,
    confusion_matrix,
    f1_score,
    matthews_corrcoef,
    roc_auc_score,
)

from .autodiff import softmax_cross_entropy
from .errors import NumericError, UsageError
from .layers import (
    BmlrParams,
    EuclideanMlrParams,
    LorentzHyperplaneMlrParams,
    PoincareHyperplaneMlrParams,
    PoincareReparamMlrParams,
    PseudoBusemannMlrParams,
    baseline_mlr_logits,
    bmlr_logits,
)


@dataclass(frozen=True)
class EmbedConfig:
    model: str
    k: float = -1.0
    clip_r: float = 1.0

    def __post_init__(self):
        if self.model not in ("poincare", "lorentz"):
            raise UsageError(f"model must be poincare or lorentz, got {self.model!r}")
        if not math.isfinite(self.k) or self.k >= 0:
            raise UsageError(f"curvature must be negative, got {self.k}")
        if not self.clip_r > 0:
            raise UsageError(f"clip_r must be positive, got {self.clip_r}")


def clip_rows(X: np.ndarray, r: float) -> np.ndarray:
    """Scale each row x to min(1, r/|x|) x."""
    norms = np.linalg.norm(X, axis=1, keepdims=True)
    scale = np.minimum(1.0, r / np.maximum(norms, 1e-300))
    return X * scale


def embed(X: np.ndarray, cfg: EmbedConfig) -> np.ndarray:
    """Clip features and push them through the origin exponential map.

    Returns ball coordinates (B, n) or hyperboloid coordinates (B, n+1);
    the Lorentz tangent lift of a clipped vector x is (0, x).
    """
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2:
        raise UsageError(f"expected a (B, n) feature matrix, got shape {X.shape}")
    if not np.all(np.isfinite(X)):
        raise NumericError("non-finite features")
    kappa = math.sqrt(-cfg.k)
    clipped = clip_rows(X, cfg.clip_r)
    r = np.linalg.norm(clipped, axis=1, keepdims=True)
    safe = np.maximum(r, 1e-300)
    if cfg.model == "poincare":
        return np.where(r > 0, np.tanh(kappa * safe) / (kappa * safe), 1.0) * clipped
    xs = np.where(r > 0, np.sinh(kappa * safe) / (kappa * safe), 1.0) * clipped
    xt = np.cosh(kappa * r) / kappa
    return np.concatenate([xt, xs], axis=1)


@dataclass(frozen=True)
class OptimConfig:
    algorithm: str = "adam"
    lr: float = 1e-2
    weight_decay: float = 0.0
    momentum: float = 0.9
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    epochs: int = 200
    batch_size: int = 32
    milestones: tuple = ()
    gamma: float = 0.1
    seed: int = 0

    def __post_init__(self):
        if self.algorithm not in ("sgd", "adam"):
            raise UsageError(f"algorithm must be sgd or adam, got {self.algorithm!r}")
        if not self.lr > 0:
            raise UsageError(f"lr must be positive, got {self.lr}")
        if self.weight_decay < 0:
            raise UsageError("weight_decay must be nonnegative")
        if self.epochs < 1 or self.batch_size < 1:
            raise UsageError("epochs and batch_size must be >= 1")
        ms = tuple(self.milestones)
        if any(b <= a for a, b in zip(ms, ms[1:])):
            raise UsageError(f"milestones must be strictly increasing, got {ms}")
        if not self.gamma > 0:
            raise UsageError("gamma must be positive")


class _Sgd:
    def __init__(self, cfg: OptimConfig, leaves: dict, exempt: set):
        self.cfg = cfg
        self.leaves = leaves
        self.exempt = exempt
        self.velocity = {name: np.zeros_like(leaf.data) for name, leaf in leaves.items()}

    def step(self, lr: float) -> None:
        for name, leaf in self.leaves.items():
            g = _grad_of(leaf, name)
            if self.cfg.weight_decay and name not in self.exempt:
                g = g + self.cfg.weight_decay * leaf.data
            v = self.velocity[name]
            v *= self.cfg.momentum
            v += g
            leaf.data -= lr * v


class _Adam:
    def __init__(self, cfg: OptimConfig, leaves: dict, exempt: set):
        self.cfg = cfg
        self.leaves = leaves
        self.exempt = exempt
        self.t = 0
        self.m = {name: np.zeros_like(leaf.data) for name, leaf in leaves.items()}
        self.v = {name: np.zeros_like(leaf.data) for name, leaf in leaves.items()}

    def step(self, lr: float) -> None:
        self.t += 1
        c = self.cfg
        bc1 = 1.0 - c.beta1**self.t
        bc2 = 1.0 - c.beta2**self.t
        for name, leaf in self.leaves.items():
            g = _grad_of(leaf, name)
            if c.weight_decay and name not in self.exempt:
                g = g + c.weight_decay * leaf.data
            m = self.m[name]
            v = self.v[name]
            m *= c.beta1
            m += (1.0 - c.beta1) * g
            v *= c.beta2
            v += (1.0 - c.beta2) * g * g
            leaf.data -= lr * (m / bc1) / (np.sqrt(v / bc2) + c.eps)


def _grad_of(leaf, name: str) -> np.ndarray:
    if leaf.grad is None:
        raise UsageError(f"no gradient on parameter {name!r}; run backward first")
    if not np.all(np.isfinite(leaf.grad)):
        raise NumericError(f"non-finite gradient on parameter {name!r}")
    return leaf.grad


def make_optimizer(cfg: OptimConfig, params):
    leaves = params.leaves()
    exempt = set(params.decay_exempt)
    if cfg.algorithm == "sgd":
        return _Sgd(cfg, leaves, exempt)
    return _Adam(cfg, leaves, exempt)


HEAD_KINDS = (
    "bmlr_poincare",
    "bmlr_lorentz",
    "euclidean_mlr",
    "poincare_hyperplane_mlr",
    "poincare_reparam_mlr",
    "poincare_pseudo_busemann_mlr",
    "lorentz_hyperplane_mlr",
)


def make_head(kind: str, k: float, n: int, classes: int, seed: int = 0):
    if kind == "bmlr_poincare":
        return BmlrParams("poincare", k, n, classes, seed)
    if kind == "bmlr_lorentz":
        return BmlrParams("lorentz", k, n, classes, seed)
    if kind == "euclidean_mlr":
        return EuclideanMlrParams(n, classes, seed)
    if kind == "poincare_hyperplane_mlr":
        return PoincareHyperplaneMlrParams(k, n, classes, seed)
    if kind == "poincare_reparam_mlr":
        return PoincareReparamMlrParams(k, n, classes, seed)
    if kind == "poincare_pseudo_busemann_mlr":
        return PseudoBusemannMlrParams(k, n, classes, seed)
    if kind == "lorentz_hyperplane_mlr":
        return LorentzHyperplaneMlrParams(k, n, classes, seed)
    raise UsageError(f"unknown head kind {kind!r}; expected one of {HEAD_KINDS}")


def head_logits(params, coords):
    if params.kind in ("bmlr_poincare", "bmlr_lorentz"):
        return bmlr_logits(params, coords)
    return baseline_mlr_logits(params, coords)


def embed_config_for(params, clip_r: float = 1.0) -> EmbedConfig | None:
    """The embedding a head needs, or None for the Euclidean head."""
    if params.kind == "euclidean_mlr":
        return None
    return EmbedConfig(params.model, params.k, clip_r)


def compute_metrics(labels: np.ndarray, logits: np.ndarray) -> dict:
    """Standard classification metrics from raw logits.

    AUC is reported only for binary problems with both classes present;
    otherwise the field is None.
    """
    pred = np.argmax(logits, axis=1)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        mcc = float(matthews_corrcoef(labels, pred))
    out = {
        "accuracy": float(accuracy_score(labels, pred)),
        "mcc": mcc,
        "macro_f1": float(f1_score(labels, pred, average="macro", zero_division=0)),
    }
    if logits.shape[1] == 2 and np.unique(labels).size == 2:
        shifted = logits - logits.max(axis=1, keepdims=True)
        probs = np.exp(shifted)
        probs /= probs.sum(axis=1, keepdims=True)
        out["auc"] = float(roc_auc_score(labels, probs[:, 1]))
    else:
        out["auc"] = None
    return out


def _mean_nll(labels: np.ndarray, logits: np.ndarray) -> float:
    shifted = logits - logits.max(axis=1, keepdims=True)
    lse = np.log(np.sum(np.exp(shifted), axis=1))
    picked = shifted[np.arange(labels.shape[0]), labels]
    return float(np.mean(lse - picked))


@dataclass
class TrainResult:
    params: object
    history: list = field(default_factory=list)
    timings: list = field(default_factory=list)


def _prepare(params, X, labels, embed_cfg):
    X = np.asarray(X, dtype=np.float64)
    labels = np.asarray(labels)
    if X.ndim != 2 or labels.ndim != 1 or X.shape[0] != labels.shape[0]:
        raise UsageError("features must be (B, n) with one label per row")
    if X.shape[1] != params.n:
        raise UsageError(f"feature dim {X.shape[1]} != head input dim {params.n}")
    if labels.min() < 0 or labels.max() >= params.classes:
        raise UsageError("label outside the head's class range")
    if embed_cfg is None:
        coords = X
        if params.kind != "euclidean_mlr":
            raise UsageError("hyperbolic heads need an embedding config")
    else:
        if params.kind != "euclidean_mlr" and embed_cfg.model != params.model:
            raise UsageError("embedding model differs from the head's model")
        coords = embed(X, embed_cfg)
    return coords, labels.astype(np.int64)


def train(params, X, labels, ocfg: OptimConfig, embed_cfg: EmbedConfig | None) -> TrainResult:
    """Full-batch-shuffled minibatch training with per-epoch metrics.

    Identical (params seed, data, config) reproduce the metric history
    bit for bit; wall-clock goes to `timings`, never into the history.
    """
    coords, labels = _prepare(params, X, labels, embed_cfg)
    optimizer = make_optimizer(ocfg, params)
    rng = np.random.default_rng(ocfg.seed)
    milestones = set(ocfg.milestones)
    lr = ocfg.lr
    result = TrainResult(params)
    count = labels.shape[0]
    for epoch in range(ocfg.epochs):
        started = time.perf_counter()
        if epoch in milestones:
            lr *= ocfg.gamma
        order = rng.permutation(count)
        for lo in range(0, count, ocfg.batch_size):
            idx = order[lo : lo + ocfg.batch_size]
            loss = softmax_cross_entropy(head_logits(params, coords[idx]), labels[idx])
            loss.backward()
            optimizer.step(lr)
        logits = head_logits(params, coords).data
        entry = {"epoch": epoch, "loss": _mean_nll(labels, logits), "lr": lr}
        entry.update(compute_metrics(labels, logits))
        entry["saturation"] = int(getattr(params, "saturation_events", 0))
        result.history.append(entry)
        result.timings.append(time.perf_counter() - started)
    return result


def evaluate(params, X, labels, embed_cfg: EmbedConfig | None) -> dict:
    coords, labels = _prepare(params, X, labels, embed_cfg)
    logits = head_logits(params, coords).data
    report = {"loss": _mean_nll(labels, logits)}
    report.update(compute_metrics(labels, logits))
    pred = np.argmax(logits, axis=1)
    report["confusion"] = confusion_matrix(
        labels, pred, labels=np.arange(params.classes)
    ).tolist()
    return report
