"""From-scratch CNN / PNN / PCNN tagging networks."""

from .layers import (
    ConvLayerSpec,
    PersistenceLayerSpec,
    concat_backward,
    concat_forward,
    conv1d_backward,
    conv1d_forward,
    dropout_forward,
    mean_pool_backward,
    mean_pool_forward,
    persistence_backward,
    persistence_forward,
    sigmoid,
)
from .model import BRANCHES, Network, NetworkSpec, default_spec
from .serialization import load_model, model_from_bytes, model_to_bytes, save_model
from .training import AdaGrad, TrainConfig, TrainResult, predict_many, train
from .estimator import PersistentTagger
