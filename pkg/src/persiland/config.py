"""JSON run configuration for the command line.

Every key is optional; missing keys take the defaults below. ``late_hidden``
lists the hidden late layers only; the ``(num_tags, 1, 1)`` output layer is
appended once the number of tags is known from the dataset.
"""

from __future__ import annotations

import copy
import json
from pathlib import Path

from .exceptions import InvalidInputError
from .landscape import LandscapeSpec
from .network.layers import ConvLayerSpec, PersistenceLayerSpec
from .network.model import BRANCHES, NetworkSpec
from .network.training import TrainConfig

DEFAULTS: dict = {
    "variant": "pcnn",
    "early": [[64, 8, 4]],
    "middle": [3200, 1, 32],
    "persistence": {"c0": 0.0, "c1": 5.0, "pieces": 5, "samples": 10, "segment_length": 32},
    "late_hidden": [[512, 1, 1], [512, 1, 1]],
    "activation": "relu",
    "train": {"learning_rate": 0.01, "dropout_rate": 0.5, "epochs": 100, "batch_size": 16, "seed": 0},
    "data": {"manifest": None, "normalize": True},
    "output_dir": "run",
}


class ConfigError(InvalidInputError):
    def __init__(self, problems: list[str]):
        self.problems = problems
        super().__init__("invalid configuration:\n  - " + "\n  - ".join(problems))


def _merge(defaults: dict, given: dict, path: str, problems: list[str]) -> dict:
    out = copy.deepcopy(defaults)
    for key, value in given.items():
        if key not in defaults:
            problems.append(f"unknown key {path}{key}")
        elif isinstance(defaults[key], dict) and key != "persistence":
            if not isinstance(value, dict):
                problems.append(f"{path}{key} must be an object")
            else:
                out[key] = _merge(defaults[key], value, f"{path}{key}.", problems)
        elif key == "persistence":
            if value is None:
                out[key] = None
            elif not isinstance(value, dict):
                problems.append("persistence must be an object or null")
            else:
                out[key] = _merge(defaults[key], value, "persistence.", problems)
        else:
            out[key] = value
    return out


def _layer(value, name: str, problems: list[str]) -> ConvLayerSpec | None:
    if not isinstance(value, (list, tuple)) or len(value) != 3:
        problems.append(f"{name} must be a [K, L, S] triple (got {value!r})")
        return None
    if not all(isinstance(v, int) and not isinstance(v, bool) for v in value):
        problems.append(f"{name} entries must be integers (got {value!r})")
        return None
    return ConvLayerSpec(*value)


class RunConfig:
    """Parsed and default-merged run configuration."""

    def __init__(self, raw: dict | None = None):
        problems: list[str] = []
        if raw is not None and not isinstance(raw, dict):
            raise ConfigError(["configuration must be a JSON object"])
        self.data = _merge(DEFAULTS, raw or {}, "", problems)
        self._problems = problems

    @classmethod
    def load(cls, path) -> "RunConfig":
        path = Path(path)
        try:
            raw = json.loads(path.read_text())
        except json.JSONDecodeError as exc:
            raise ConfigError([f"{path}: not valid JSON ({exc})"]) from None
        cfg = cls(raw)
        manifest = cfg.data["data"]["manifest"]
        if manifest is not None and not Path(manifest).is_absolute():
            cfg.data["data"]["manifest"] = str((path.parent / manifest).resolve())
        return cfg

    def override(self, **values) -> "RunConfig":
        """Apply command-line overrides given as dotted keys, e.g. ``train.seed``."""
        for dotted, value in values.items():
            if value is None:
                continue
            node = self.data
            *parents, leaf = dotted.split(".")
            for p in parents:
                node = node[p]
            node[leaf] = value
        return self

    def network_spec(self, input_channels: int, num_tags: int) -> NetworkSpec:
        """Build and validate the network spec; every violation is reported at once."""
        d = self.data
        problems = list(self._problems)
        variant = d["variant"]
        if variant not in BRANCHES:
            problems.append(f"variant must be one of {', '.join(BRANCHES)} (got {variant!r})")
        early = [_layer(e, f"early[{i}]", problems) for i, e in enumerate(d["early"] or [])]
        late = [_layer(h, f"late_hidden[{i}]", problems) for i, h in enumerate(d["late_hidden"] or [])]
        middle = _layer(d["middle"], "middle", problems) if variant in ("cnn", "pcnn") else None
        pers = None
        if variant in ("pnn", "pcnn"):
            p = d["persistence"]
            if p is None:
                problems.append(f"variant {variant!r} requires a persistence section")
            else:
                try:
                    pers = PersistenceLayerSpec(
                        LandscapeSpec(float(p["c0"]), float(p["c1"]), p["pieces"], p["samples"]),
                        p["segment_length"],
                    )
                except (InvalidInputError, TypeError, ValueError) as exc:
                    problems.append(f"persistence: {exc}")
        spec = None
        if None not in early and None not in late and not (variant in ("cnn", "pcnn") and middle is None):
            spec = NetworkSpec(
                input_channels=input_channels,
                num_tags=num_tags,
                branch=variant if variant in BRANCHES else "pcnn",
                early=early,
                middle=middle,
                persistence=pers,
                late=late + [ConvLayerSpec(num_tags, 1, 1)],
                activation=d["activation"],
            )
            if not (variant in ("pnn", "pcnn") and pers is None):
                problems += spec.violations()
        problems += [f"train: {e}" for e in self.train_config(check=False).violations()]
        if problems:
            raise ConfigError(problems)
        return spec

    def train_config(self, check: bool = True) -> TrainConfig:
        t = self.data["train"]
        cfg = TrainConfig(
            learning_rate=t["learning_rate"],
            dropout_rate=t["dropout_rate"],
            epochs=t["epochs"],
            batch_size=t["batch_size"],
            rng_seed=t["seed"],
        )
        if check and cfg.violations():
            raise ConfigError([f"train: {e}" for e in cfg.violations()])
        return cfg

    def to_json(self) -> str:
        return json.dumps(self.data, indent=2, sort_keys=True)
