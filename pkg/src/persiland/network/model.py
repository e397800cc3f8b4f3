"""Network description and the CNN / PNN / PCNN forward and backward passes."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..exceptions import InvalidInputError
from ..landscape import LandscapeSpec
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

__all__ = ["BRANCHES", "NetworkSpec", "Network", "default_spec"]

BRANCHES = ("cnn", "pnn", "pcnn")


@dataclass
class NetworkSpec:
    """Architecture of a tagging network.

    ``late`` includes the output layer, whose width must equal ``num_tags``.
    ``branch`` selects the middle convolution (``"cnn"``), the persistence
    layer (``"pnn"``) or both concatenated (``"pcnn"``).
    """

    input_channels: int
    num_tags: int
    branch: str = "pcnn"
    early: list[ConvLayerSpec] = field(default_factory=lambda: [ConvLayerSpec(64, 8, 4)])
    middle: ConvLayerSpec | None = ConvLayerSpec(3200, 1, 32)
    persistence: PersistenceLayerSpec | None = PersistenceLayerSpec()
    late: list[ConvLayerSpec] = field(default_factory=list)
    activation: str = "relu"

    def violations(self) -> list[str]:
        errs: list[str] = []
        if not isinstance(self.input_channels, (int, np.integer)) or self.input_channels < 1:
            errs.append(f"input_channels must be a positive integer (got {self.input_channels!r})")
        if not isinstance(self.num_tags, (int, np.integer)) or self.num_tags < 1:
            errs.append(f"num_tags must be a positive integer (got {self.num_tags!r})")
        if self.branch not in BRANCHES:
            errs.append(f"branch must be one of {BRANCHES} (got {self.branch!r})")
        if self.activation not in ("relu", "linear"):
            errs.append(f"activation must be 'relu' or 'linear' (got {self.activation!r})")
        for i, layer in enumerate(self.early):
            errs += layer.violations(f"early[{i}]")
        if self.branch in ("cnn", "pcnn"):
            if self.middle is None:
                errs.append(f"branch {self.branch!r} requires a middle convolution")
            else:
                errs += self.middle.violations("middle")
        if self.branch in ("pnn", "pcnn"):
            if self.persistence is None:
                errs.append(f"branch {self.branch!r} requires a persistence layer")
            elif not isinstance(self.persistence.segment_length, (int, np.integer)) or self.persistence.segment_length < 2:
                errs.append(f"persistence.segment_length must be an integer >= 2 (got {self.persistence.segment_length!r})")
        if (
            self.branch == "pcnn"
            and self.middle is not None
            and self.persistence is not None
            and self.middle.pool_size != self.persistence.segment_length
        ):
            errs.append(
                f"pcnn requires middle.pool_size == persistence.segment_length "
                f"(got {self.middle.pool_size} and {self.persistence.segment_length})"
            )
        if not self.late:
            errs.append("late must contain at least the output layer")
        for i, layer in enumerate(self.late):
            errs += layer.violations(f"late[{i}]")
            if layer.filter_length != 1 or layer.pool_size != 1:
                errs.append(f"late[{i}] must have filter_length 1 and pool_size 1")
        if self.late and self.late[-1].num_filters != self.num_tags:
            errs.append(
                f"last late layer must have num_tags={self.num_tags} filters (got {self.late[-1].num_filters})"
            )
        return errs

    def validate(self) -> "NetworkSpec":
        errs = self.violations()
        if errs:
            raise InvalidInputError("invalid network spec:\n  - " + "\n  - ".join(errs))
        return self

    @property
    def uses_conv(self) -> bool:
        return self.branch in ("cnn", "pcnn")

    @property
    def uses_persistence(self) -> bool:
        return self.branch in ("pnn", "pcnn")

    @property
    def early_channels(self) -> int:
        return self.early[-1].num_filters if self.early else self.input_channels

    @property
    def conv_channels(self) -> int:
        return self.middle.num_filters if self.uses_conv else 0

    @property
    def persistence_channels(self) -> int:
        return self.early_channels * self.persistence.channels_per_filter if self.uses_persistence else 0

    @property
    def mid_channels(self) -> int:
        return self.conv_channels + self.persistence_channels

    def parameter_shapes(self) -> dict[str, tuple[int, ...]]:
        """Parameter names and shapes in declaration (serialization) order."""
        shapes: dict[str, tuple[int, ...]] = {}
        c = self.input_channels
        for i, layer in enumerate(self.early):
            shapes[f"early{i}.weight"] = (layer.num_filters, c, layer.filter_length)
            shapes[f"early{i}.bias"] = (layer.num_filters,)
            c = layer.num_filters
        if self.uses_conv:
            m = self.middle
            shapes["middle.weight"] = (m.num_filters, c, m.filter_length)
            shapes["middle.bias"] = (m.num_filters,)
        c = self.mid_channels
        for i, layer in enumerate(self.late):
            shapes[f"late{i}.weight"] = (layer.num_filters, c, 1)
            shapes[f"late{i}.bias"] = (layer.num_filters,)
            c = layer.num_filters
        return shapes

    def min_input_length(self) -> int:
        n = 1
        while True:
            try:
                self.output_lengths(n)
                return n
            except InvalidInputError:
                n += 1

    def output_lengths(self, n: int) -> dict[str, int]:
        """Time length after every layer; raises naming the first layer that cannot run."""
        lengths = {"input": n}
        for i, layer in enumerate(self.early):
            n_next = layer.output_length(n)
            if n_next < 1:
                raise InvalidInputError(
                    f"input of length {lengths['input']} is too short for layer 'early{i}' "
                    f"({n} frames reach it, needs {layer.filter_length + layer.pool_size - 1})"
                )
            n = lengths[f"early{i}"] = n_next
        mids = []
        if self.uses_conv:
            m = self.middle.output_length(n)
            if m < 1:
                raise InvalidInputError(
                    f"input of length {lengths['input']} is too short for layer 'middle' "
                    f"({n} frames reach it, needs {self.middle.filter_length + self.middle.pool_size - 1})"
                )
            lengths["middle"] = m
            mids.append(m)
        if self.uses_persistence:
            p = self.persistence.output_length(n)
            if p < 1:
                raise InvalidInputError(
                    f"input of length {lengths['input']} is too short for layer 'persistence' "
                    f"({n} frames reach it, needs {self.persistence.segment_length})"
                )
            lengths["persistence"] = p
            mids.append(p)
        if len(set(mids)) > 1:
            raise InvalidInputError(f"middle and persistence outputs disagree in length: {mids}")
        lengths["late"] = mids[0]
        return lengths

    def to_dict(self) -> dict:
        return {
            "input_channels": int(self.input_channels),
            "num_tags": int(self.num_tags),
            "branch": self.branch,
            "early": [layer.to_list() for layer in self.early],
            "middle": self.middle.to_list() if self.middle is not None else None,
            "persistence": self.persistence.to_dict() if self.persistence is not None else None,
            "late": [layer.to_list() for layer in self.late],
            "activation": self.activation,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "NetworkSpec":
        pers = d.get("persistence")
        if pers is not None:
            pers = PersistenceLayerSpec(
                LandscapeSpec(float(pers["c0"]), float(pers["c1"]), int(pers["pieces"]), int(pers["samples"])),
                int(pers["segment_length"]),
            )
        middle = d.get("middle")
        return cls(
            input_channels=int(d["input_channels"]),
            num_tags=int(d["num_tags"]),
            branch=d.get("branch", "pcnn"),
            early=[ConvLayerSpec(*map(int, layer)) for layer in d.get("early", [])],
            middle=ConvLayerSpec(*map(int, middle)) if middle is not None else None,
            persistence=pers,
            late=[ConvLayerSpec(*map(int, layer)) for layer in d["late"]],
            activation=d.get("activation", "relu"),
        )


def default_spec(input_channels: int = 128, num_tags: int = 50, branch: str = "pcnn") -> NetworkSpec:
    """Default architecture: early (64, 8, 4), persistence (0, 5, 5, 10) with
    ``T = 32``, middle (3200, 1, 32), late (512, 1, 1) x 2 + (num_tags, 1, 1)."""
    return NetworkSpec(
        input_channels=input_channels,
        num_tags=num_tags,
        branch=branch,
        early=[ConvLayerSpec(64, 8, 4)],
        middle=ConvLayerSpec(3200, 1, 32) if branch != "pnn" else None,
        persistence=PersistenceLayerSpec(LandscapeSpec(0.0, 5.0, 5, 10), 32) if branch != "cnn" else None,
        late=[ConvLayerSpec(512, 1, 1), ConvLayerSpec(512, 1, 1), ConvLayerSpec(num_tags, 1, 1)],
    ).validate()


class Network:
    """Parameters plus forward/backward passes for a :class:`NetworkSpec`.

    ``params`` maps names from :meth:`NetworkSpec.parameter_shapes` to
    float64 arrays and preserves their declaration order.
    """

    def __init__(self, spec: NetworkSpec, params: dict[str, np.ndarray]):
        self.spec = spec.validate()
        shapes = spec.parameter_shapes()
        if list(params) != list(shapes):
            raise InvalidInputError(f"parameter names {list(params)} do not match spec {list(shapes)}")
        for name, shape in shapes.items():
            if params[name].shape != shape:
                raise InvalidInputError(f"parameter {name} has shape {params[name].shape}, expected {shape}")
        self.params = {k: np.asarray(v, dtype=np.float64) for k, v in params.items()}

    @classmethod
    def initialize(cls, spec: NetworkSpec, rng: np.random.Generator | int | None = None) -> "Network":
        """Uniform Glorot initialisation of weights, zero biases."""
        rng = np.random.default_rng(rng)
        params = {}
        for name, shape in spec.validate().parameter_shapes().items():
            if name.endswith(".weight"):
                k, c, ell = shape
                limit = np.sqrt(6.0 / (c * ell + k * ell))
                params[name] = rng.uniform(-limit, limit, size=shape)
            else:
                params[name] = np.zeros(shape)
        return cls(spec, params)

    def copy(self) -> "Network":
        return Network(self.spec, {k: v.copy() for k, v in self.params.items()})

    # -- forward -----------------------------------------------------------

    def forward_mid(self, x):
        """Run the early stack and the middle branches; returns the pieces and caches."""
        spec = self.spec
        h = x
        caches: dict = {"early": []}
        for i, layer in enumerate(spec.early):
            h, c = conv1d_forward(
                h, self.params[f"early{i}.weight"], self.params[f"early{i}.bias"],
                layer.pool_size, spec.activation, name=f"early{i}",
            )
            caches["early"].append(c)
        conv_out = pers_out = None
        if spec.uses_conv:
            conv_out, caches["middle"] = conv1d_forward(
                h, self.params["middle.weight"], self.params["middle.bias"],
                spec.middle.pool_size, spec.activation, name="middle",
            )
        if spec.uses_persistence:
            pers_out, caches["persistence"] = persistence_forward(h, spec.persistence)
        return h, conv_out, pers_out, caches

    def forward(self, x, *, training: bool = False, dropout_rate: float = 0.0, rng=None):
        """Clip-level logits of shape ``(B, num_tags)`` and the backward cache.

        Dropout is applied to the inputs of every late layer except the
        output layer, and only when ``training`` is true.
        """
        x = np.asarray(x, dtype=np.float64)
        if x.ndim == 2:
            x = x[np.newaxis]
        self.spec.output_lengths(x.shape[2])
        _, conv_out, pers_out, caches = self.forward_mid(x)
        if conv_out is not None and pers_out is not None:
            h, caches["concat"] = concat_forward(conv_out, pers_out)
        else:
            h = conv_out if conv_out is not None else pers_out
        caches["late"] = []
        caches["dropout"] = []
        n_late = len(self.spec.late)
        for i in range(n_late):
            last = i == n_late - 1
            mask = None
            if training and not last and dropout_rate > 0.0:
                h, mask = dropout_forward(h, dropout_rate, rng)
            caches["dropout"].append(mask)
            h, c = conv1d_forward(
                h, self.params[f"late{i}.weight"], self.params[f"late{i}.bias"],
                1, "linear" if last else self.spec.activation, name=f"late{i}",
            )
            caches["late"].append(c)
        logits, caches["mean"] = mean_pool_forward(h)
        return logits, caches

    def predict_proba(self, x) -> np.ndarray:
        """Tag scores in ``(0, 1)`` for a single ``(channels, time)`` map or a batch."""
        x = np.asarray(x, dtype=np.float64)
        single = x.ndim == 2
        logits, _ = self.forward(x)
        scores = sigmoid(logits)
        return scores[0] if single else scores

    # -- backward ----------------------------------------------------------

    def backward(self, grad_logits, caches) -> tuple[dict[str, np.ndarray], np.ndarray]:
        """Parameter gradients (declaration order) and the input gradient."""
        spec = self.spec
        grads: dict[str, np.ndarray] = {}
        g = mean_pool_backward(np.asarray(grad_logits, dtype=np.float64), caches["mean"])
        for i in reversed(range(len(spec.late))):
            g, grads[f"late{i}.weight"], grads[f"late{i}.bias"] = conv1d_backward(g, caches["late"][i])
            mask = caches["dropout"][i]
            if mask is not None:
                g = g * mask
        if spec.uses_conv and spec.uses_persistence:
            g_conv, g_pers = concat_backward(g, caches["concat"])
        elif spec.uses_conv:
            g_conv, g_pers = g, None
        else:
            g_conv, g_pers = None, g
        g_h = 0.0
        if g_conv is not None:
            g_in, grads["middle.weight"], grads["middle.bias"] = conv1d_backward(g_conv, caches["middle"])
            g_h = g_h + g_in
        if g_pers is not None:
            g_h = g_h + persistence_backward(g_pers, caches["persistence"])
        for i in reversed(range(len(spec.early))):
            g_h, grads[f"early{i}.weight"], grads[f"early{i}.bias"] = conv1d_backward(g_h, caches["early"][i])
        ordered = {name: grads[name] for name in self.params}
        return ordered, g_h

    def loss_and_grad(self, x, y, *, dropout_rate: float = 0.0, rng=None, training: bool = False):
        """Mean binary cross-entropy over tags and batch, with gradients."""
        y = np.asarray(y, dtype=np.float64)
        logits, caches = self.forward(x, training=training, dropout_rate=dropout_rate, rng=rng)
        if y.shape != logits.shape:
            raise InvalidInputError(f"labels of shape {y.shape} do not match outputs {logits.shape}")
        loss = bce_with_logits(logits, y)
        grad_logits = (sigmoid(logits) - y) / y.size
        grads, grad_x = self.backward(grad_logits, caches)
        return loss, grads, grad_x


def bce_with_logits(logits, y) -> float:
    # log(1 + e^z) - y z, computed stably
    z = np.asarray(logits, dtype=np.float64)
    return float(np.mean(np.logaddexp(0.0, z) - y * z))
