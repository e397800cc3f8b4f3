"""Mini-batch AdaGrad training with validation-based model selection."""

from __future__ import annotations

import logging
from collections import defaultdict
from dataclasses import dataclass, field

import numpy as np

from .._validation import check_feature_map, check_multilabel
from ..exceptions import InvalidInputError
from ..metrics import evaluate
from .model import Network, NetworkSpec

logger = logging.getLogger(__name__)

__all__ = ["AdaGrad", "TrainConfig", "TrainResult", "train", "predict_many"]


@dataclass
class TrainConfig:
    learning_rate: float = 0.01
    dropout_rate: float = 0.5
    epochs: int = 100
    batch_size: int = 16
    rng_seed: int = 0

    def violations(self) -> list[str]:
        errs = []
        if not self.learning_rate > 0:
            errs.append(f"learning_rate must be > 0 (got {self.learning_rate})")
        if not 0.0 <= self.dropout_rate < 1.0:
            errs.append(f"dropout_rate must lie in [0, 1) (got {self.dropout_rate})")
        if int(self.epochs) != self.epochs or self.epochs < 0:
            errs.append(f"epochs must be a non-negative integer (got {self.epochs})")
        if int(self.batch_size) != self.batch_size or self.batch_size < 1:
            errs.append(f"batch_size must be a positive integer (got {self.batch_size})")
        return errs


class AdaGrad:
    """Per-parameter AdaGrad: ``p -= lr * g / sqrt(G + eps)`` with ``G`` the running sum of ``g**2``."""

    def __init__(self, params: dict[str, np.ndarray], learning_rate: float = 0.01, eps: float = 1e-8):
        self.learning_rate = learning_rate
        self.eps = eps
        self.accumulators = {name: np.zeros_like(p) for name, p in params.items()}

    def step(self, params: dict[str, np.ndarray], grads: dict[str, np.ndarray]) -> None:
        for name, g in grads.items():
            acc = self.accumulators[name]
            acc += g * g
            params[name] -= self.learning_rate * g / np.sqrt(acc + self.eps)


@dataclass
class TrainResult:
    best: Network
    final: Network
    history: list[dict] = field(default_factory=list)
    best_epoch: int = 0


def predict_many(network: Network, maps, batch_size: int = 64) -> np.ndarray:
    """Scores for a list of feature maps, batching maps of equal length."""
    scores = np.empty((len(maps), network.spec.num_tags))
    for length, idx in _group_by_length(maps, range(len(maps))).items():
        for start in range(0, len(idx), batch_size):
            chunk = idx[start : start + batch_size]
            scores[chunk] = network.predict_proba(np.stack([maps[i] for i in chunk]))
    return scores


def _group_by_length(maps, indices) -> dict[int, list[int]]:
    groups: dict[int, list[int]] = defaultdict(list)
    for i in indices:
        groups[maps[i].shape[1]].append(i)
    return groups


def train(
    spec: NetworkSpec | Network,
    X,
    Y,
    cfg: TrainConfig | None = None,
    X_val=None,
    Y_val=None,
    epoch_callback=None,
) -> TrainResult:
    """Train a network with AdaGrad on mean binary cross-entropy.

    Parameters
    ----------
    spec : NetworkSpec or Network
        Architecture to initialise from ``cfg.rng_seed``, or an existing
        network to continue from.
    X : list of ndarray of shape (channels, time)
    Y : array-like of shape (n_clips, num_tags)
        Multi-hot labels.
    X_val, Y_val : optional
        Validation clips. The returned ``best`` network is the epoch snapshot
        with the highest validation per-class AUC; without validation data it
        is the final network.

    Returns
    -------
    TrainResult
    """
    cfg = cfg or TrainConfig()
    errs = cfg.violations()
    if errs:
        raise InvalidInputError("invalid training config:\n  - " + "\n  - ".join(errs))
    rng = np.random.default_rng(cfg.rng_seed)
    network = spec.copy() if isinstance(spec, Network) else Network.initialize(spec, rng)
    spec = network.spec

    maps = [check_feature_map(x) for x in X]
    if not maps:
        raise InvalidInputError("training data is empty")
    Y = check_multilabel(Y, len(maps), spec.num_tags)
    for x in maps:
        if x.shape[0] != spec.input_channels:
            raise InvalidInputError(f"feature map has {x.shape[0]} channels, network expects {spec.input_channels}")
        spec.output_lengths(x.shape[1])
    has_val = X_val is not None and len(X_val) > 0
    if has_val:
        val_maps = [check_feature_map(x) for x in X_val]
        Y_val = check_multilabel(Y_val, len(val_maps), spec.num_tags)

    opt = AdaGrad(network.params, cfg.learning_rate)
    best = network.copy()
    best_auc = -np.inf
    best_epoch = 0
    history: list[dict] = []
    n = len(maps)

    for epoch in range(1, cfg.epochs + 1):
        order = rng.permutation(n)
        losses = []
        for start in range(0, n, cfg.batch_size):
            batch = order[start : start + cfg.batch_size]
            total = {name: np.zeros_like(p) for name, p in network.params.items()}
            batch_loss = 0.0
            for idx in _group_by_length(maps, batch.tolist()).values():
                xb = np.stack([maps[i] for i in idx])
                loss, grads, _ = network.loss_and_grad(
                    xb, Y[idx], dropout_rate=cfg.dropout_rate, rng=rng, training=True
                )
                w = len(idx) / len(batch)
                batch_loss += w * loss
                for name, g in grads.items():
                    total[name] += w * g
            opt.step(network.params, total)
            losses.append(batch_loss)
        record = {
            "epoch": epoch,
            "train_loss": float(np.mean(losses)),
            "val_perclass_auc": float("nan"),
            "val_perclip_auc": float("nan"),
        }
        if has_val:
            report = evaluate(predict_many(network, val_maps), Y_val)
            record["val_perclass_auc"] = report["perclass_auc"]
            record["val_perclip_auc"] = report["perclip_auc"]
            if report["perclass_auc"] > best_auc:
                best_auc = report["perclass_auc"]
                best = network.copy()
                best_epoch = epoch
        history.append(record)
        logger.info(
            "epoch %d loss %.5f val per-class AUC %.4f",
            epoch, record["train_loss"], record["val_perclass_auc"],
        )
        if epoch_callback is not None:
            epoch_callback(record, network)

    if best_epoch == 0:
        # no validation data, or every validation column was undefined
        best = network.copy()
        best_epoch = cfg.epochs
    return TrainResult(best=best, final=network, history=history, best_epoch=best_epoch)
