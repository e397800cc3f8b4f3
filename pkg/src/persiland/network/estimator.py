"""scikit-learn style wrapper around :func:`persiland.network.train`."""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from .._validation import check_feature_map, check_multilabel
from ..data import ZScoreNormalizer
from ..landscape import LandscapeSpec
from ..metrics import evaluate
from .layers import ConvLayerSpec, PersistenceLayerSpec
from .model import Network, NetworkSpec
from .training import TrainConfig, predict_many, train

__all__ = ["PersistentTagger"]


class PersistentTagger(BaseEstimator):
    """Multi-label tagger over variable-length ``(channels, frames)`` feature maps.

    Parameters
    ----------
    branch : {"cnn", "pnn", "pcnn"}, default="pcnn"
        Middle convolution only, persistence layer only, or both concatenated.
    early : sequence of (K, L, S), default=((64, 8, 4),)
    middle : (K, L, S), default=(3200, 1, 32)
        Ignored for ``branch="pnn"``.
    landscape : (c0, c1, P, Q), default=(0.0, 5.0, 5, 10)
        Ignored for ``branch="cnn"``.
    segment_length : int, default=32
    late_hidden : sequence of (K, 1, 1), default=((512, 1, 1), (512, 1, 1))
        Hidden late layers; the ``(num_tags, 1, 1)`` output layer is added in ``fit``.
    learning_rate, dropout_rate, epochs, batch_size
        AdaGrad training settings.
    normalize : bool, default=True
        Z-score each feature dimension with statistics of the training maps.
    random_state : int, default=0

    Attributes
    ----------
    network_ : Network
        Best-validation snapshot (the final network without validation data).
    final_network_ : Network
    normalizer_ : ZScoreNormalizer or None
    history_ : list of dict
    n_tags_ : int
    """

    def __init__(
        self,
        branch="pcnn",
        early=((64, 8, 4),),
        middle=(3200, 1, 32),
        landscape=(0.0, 5.0, 5, 10),
        segment_length=32,
        late_hidden=((512, 1, 1), (512, 1, 1)),
        learning_rate=0.01,
        dropout_rate=0.5,
        epochs=100,
        batch_size=16,
        normalize=True,
        random_state=0,
    ):
        self.branch = branch
        self.early = early
        self.middle = middle
        self.landscape = landscape
        self.segment_length = segment_length
        self.late_hidden = late_hidden
        self.learning_rate = learning_rate
        self.dropout_rate = dropout_rate
        self.epochs = epochs
        self.batch_size = batch_size
        self.normalize = normalize
        self.random_state = random_state

    def build_spec(self, input_channels: int, num_tags: int) -> NetworkSpec:
        c0, c1, p, q = self.landscape
        return NetworkSpec(
            input_channels=int(input_channels),
            num_tags=int(num_tags),
            branch=self.branch,
            early=[ConvLayerSpec(*map(int, e)) for e in self.early],
            middle=ConvLayerSpec(*map(int, self.middle)) if self.branch != "pnn" else None,
            persistence=(
                PersistenceLayerSpec(LandscapeSpec(float(c0), float(c1), int(p), int(q)), int(self.segment_length))
                if self.branch != "cnn"
                else None
            ),
            late=[ConvLayerSpec(*map(int, h)) for h in self.late_hidden] + [ConvLayerSpec(int(num_tags), 1, 1)],
        ).validate()

    def _prepare(self, X) -> list[np.ndarray]:
        maps = [check_feature_map(x) for x in X]
        if self.normalizer_ is not None:
            maps = self.normalizer_.transform(maps)
        return maps

    def fit(self, X, y, X_val=None, y_val=None):
        maps = [check_feature_map(x) for x in X]
        Y = check_multilabel(y, len(maps))
        self.n_tags_ = Y.shape[1]
        self.n_features_in_ = maps[0].shape[0] if maps else 0
        self.normalizer_ = ZScoreNormalizer().fit(maps) if self.normalize else None
        if self.normalizer_ is not None:
            maps = self.normalizer_.transform(maps)
        val_maps = self._prepare(X_val) if X_val is not None and len(X_val) else None
        spec = self.build_spec(self.n_features_in_, self.n_tags_)
        cfg = TrainConfig(
            learning_rate=self.learning_rate,
            dropout_rate=self.dropout_rate,
            epochs=self.epochs,
            batch_size=self.batch_size,
            rng_seed=self.random_state,
        )
        result = train(spec, maps, Y, cfg, val_maps, y_val if val_maps is not None else None)
        self.network_ = result.best
        self.final_network_ = result.final
        self.history_ = result.history
        self.best_epoch_ = result.best_epoch
        return self

    @classmethod
    def from_network(cls, network: Network, normalizer: ZScoreNormalizer | None = None) -> "PersistentTagger":
        """Wrap an already trained network, e.g. one read with ``load_model``."""
        s = network.spec
        est = cls(
            branch=s.branch,
            early=tuple(tuple(e.to_list()) for e in s.early),
            middle=tuple(s.middle.to_list()) if s.middle is not None else (3200, 1, 32),
            landscape=(
                (s.persistence.landscape.c0, s.persistence.landscape.c1,
                 s.persistence.landscape.num_pieces, s.persistence.landscape.num_samples)
                if s.persistence is not None else (0.0, 5.0, 5, 10)
            ),
            segment_length=s.persistence.segment_length if s.persistence is not None else 32,
            late_hidden=tuple(tuple(h.to_list()) for h in s.late[:-1]),
            normalize=normalizer is not None,
        )
        est.network_ = est.final_network_ = network
        est.normalizer_ = normalizer
        est.n_tags_ = s.num_tags
        est.n_features_in_ = s.input_channels
        est.history_ = []
        return est

    def decision_function(self, X) -> np.ndarray:
        check_is_fitted(self, "network_")
        maps = self._prepare(X)
        return np.stack([self.network_.forward(m)[0][0] for m in maps])

    def predict_proba(self, X) -> np.ndarray:
        check_is_fitted(self, "network_")
        return predict_many(self.network_, self._prepare(X))

    def predict(self, X, threshold: float = 0.5) -> np.ndarray:
        return (self.predict_proba(X) >= threshold).astype(np.int8)

    def score(self, X, y) -> float:
        """Mean per-class AUC."""
        proba = self.predict_proba(X)
        return evaluate(proba, check_multilabel(y, len(proba), self.n_tags_))["perclass_auc"]

