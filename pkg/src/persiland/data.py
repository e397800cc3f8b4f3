"""Feature-map datasets: manifest I/O, z-score normalisation and a synthetic peak-count task."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from ._validation import check_feature_map
from .exceptions import InvalidInputError

__all__ = [
    "Clip",
    "Dataset",
    "NormalizationParams",
    "ZScoreNormalizer",
    "SyntheticConfig",
    "fit_normalizer",
    "apply_normalizer",
    "generate_synthetic",
    "load_features",
    "save_features",
    "read_feature_file",
    "write_feature_file",
]

MANIFEST_COLUMNS = ["clip_id", "file_path", "num_channels", "num_frames", "split"]
SPLITS = ("train", "valid", "test")


@dataclass
class Clip:
    features: np.ndarray  # (channels, frames)
    labels: np.ndarray  # multi-hot, (num_tags,)
    clip_id: str
    split: str = "train"
    peak_count: int | None = None


@dataclass
class Dataset:
    clips: list[Clip]
    tag_names: list[str]

    def __post_init__(self):
        n_tags = len(self.tag_names)
        seen = set()
        for clip in self.clips:
            if clip.labels.shape != (n_tags,):
                raise InvalidInputError(f"clip {clip.clip_id} has {clip.labels.size} labels, expected {n_tags}")
            if clip.split not in SPLITS:
                raise InvalidInputError(f"clip {clip.clip_id} has unknown split {clip.split!r}")
            if clip.clip_id in seen:
                raise InvalidInputError(f"duplicate clip_id {clip.clip_id!r}")
            seen.add(clip.clip_id)

    def __len__(self) -> int:
        return len(self.clips)

    def split(self, name: str) -> "Dataset":
        return Dataset([c for c in self.clips if c.split == name], list(self.tag_names))

    @property
    def X(self) -> list[np.ndarray]:
        return [c.features for c in self.clips]

    @property
    def Y(self) -> np.ndarray:
        if not self.clips:
            return np.zeros((0, len(self.tag_names)))
        return np.stack([c.labels for c in self.clips]).astype(np.float64)

    @property
    def clip_ids(self) -> list[str]:
        return [c.clip_id for c in self.clips]


# -- feature files -----------------------------------------------------------

def write_feature_file(path, features) -> None:
    """Raw little-endian float32, channel-major."""
    arr = np.ascontiguousarray(np.asarray(features), dtype="<f4")
    Path(path).write_bytes(arr.tobytes())


def read_feature_file(path, num_channels: int, num_frames: int) -> np.ndarray:
    raw = Path(path).read_bytes()
    expected = 4 * num_channels * num_frames
    if len(raw) != expected:
        raise InvalidInputError(
            f"{path}: holds {len(raw)} bytes, manifest shape ({num_channels}, {num_frames}) needs {expected}"
        )
    return np.frombuffer(raw, dtype="<f4").reshape(num_channels, num_frames).astype(np.float32)


def save_features(dataset: Dataset, directory, manifest_name: str = "manifest.csv") -> Path:
    """Write one feature file per clip plus a manifest; returns the manifest path."""
    directory = Path(directory)
    (directory / "features").mkdir(parents=True, exist_ok=True)
    manifest = directory / manifest_name
    with manifest.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(MANIFEST_COLUMNS + list(dataset.tag_names))
        for clip in dataset.clips:
            rel = Path("features") / f"{clip.clip_id}.f32"
            write_feature_file(directory / rel, clip.features)
            c, t = clip.features.shape
            writer.writerow([clip.clip_id, rel.as_posix(), c, t, clip.split] + [int(v) for v in clip.labels])
    return manifest


def load_features(path) -> Dataset:
    """Load a dataset from a manifest CSV or a directory containing ``manifest.csv``.

    Relative ``file_path`` entries are resolved against the manifest's directory.
    """
    path = Path(path)
    manifest = path / "manifest.csv" if path.is_dir() else path
    if not manifest.exists():
        raise InvalidInputError(f"manifest not found: {manifest}")
    with manifest.open(newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise InvalidInputError(f"{manifest}: empty manifest") from None
        if header[: len(MANIFEST_COLUMNS)] != MANIFEST_COLUMNS:
            raise InvalidInputError(f"{manifest}: header must start with {','.join(MANIFEST_COLUMNS)}")
        tag_names = header[len(MANIFEST_COLUMNS):]
        clips = []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise InvalidInputError(f"{manifest}:{lineno}: expected {len(header)} fields, got {len(row)}")
            clip_id, file_path, n_ch, n_fr, split = row[:5]
            try:
                n_ch, n_fr = int(n_ch), int(n_fr)
                labels = np.array([int(v) for v in row[5:]], dtype=np.int8)
            except ValueError:
                raise InvalidInputError(f"{manifest}:{lineno}: malformed integer field (clip {clip_id})") from None
            if np.any((labels != 0) & (labels != 1)):
                raise InvalidInputError(f"{manifest}:{lineno}: labels must be 0/1 (clip {clip_id})")
            fpath = Path(file_path)
            if not fpath.is_absolute():
                fpath = manifest.parent / fpath
            if not fpath.exists():
                raise InvalidInputError(f"feature file for clip {clip_id} not found: {fpath}")
            try:
                feats = read_feature_file(fpath, n_ch, n_fr)
            except InvalidInputError as exc:
                raise InvalidInputError(f"clip {clip_id}: {exc}") from None
            clips.append(Clip(feats, labels, clip_id, split))
    return Dataset(clips, tag_names)


# -- normalisation -----------------------------------------------------------

@dataclass
class NormalizationParams:
    mean: np.ndarray
    std: np.ndarray


def fit_normalizer(maps) -> NormalizationParams:
    """Per-feature-dimension mean and std pooled over all frames of all maps."""
    maps = [check_feature_map(m) for m in maps]
    if not maps:
        raise InvalidInputError("cannot fit a normalizer on an empty split")
    stacked = np.concatenate(maps, axis=1)
    mean = stacked.mean(axis=1)
    std = stacked.std(axis=1)
    std[std == 0.0] = 1.0
    return NormalizationParams(mean, std)


def apply_normalizer(params: NormalizationParams, feature_map) -> np.ndarray:
    x = check_feature_map(feature_map)
    if x.shape[0] != params.mean.size:
        raise InvalidInputError(f"feature map has {x.shape[0]} dimensions, normalizer has {params.mean.size}")
    return (x - params.mean[:, None]) / params.std[:, None]


class ZScoreNormalizer(TransformerMixin, BaseEstimator):
    """Per-dimension z-scoring of ``(channels, frames)`` feature maps.

    ``fit`` and ``transform`` take a list of feature maps rather than a 2-D
    sample matrix, since clips may differ in length.
    """

    def fit(self, X, y=None):
        params = fit_normalizer(X)
        self.mean_ = params.mean
        self.scale_ = params.std
        self.n_features_in_ = params.mean.size
        return self

    def transform(self, X):
        check_is_fitted(self, "mean_")
        params = NormalizationParams(self.mean_, self.scale_)
        return [apply_normalizer(params, x) for x in X]


# -- synthetic data ----------------------------------------------------------

@dataclass
class SyntheticConfig:
    """Peak-count task: each clip carries ``m`` raised-cosine bumps on a noisy zero baseline.

    Tag ``j`` (0-based) is on when ``m >= j + 1``. ``split_sizes`` gives the
    number of train/valid/test clips and must sum to ``num_clips``; by default
    the clips are split 70/10/20.
    """

    num_clips: int = 700
    length: int = 256
    num_channels: int = 1
    max_peaks: int = 5
    noise_std: float = 0.05
    rng_seed: int = 0
    bump_width: int = 8
    amplitude_range: tuple[float, float] = (1.0, 3.0)
    split_sizes: tuple[int, int, int] | None = None

    def resolved_splits(self) -> tuple[int, int, int]:
        if self.split_sizes is not None:
            sizes = tuple(int(s) for s in self.split_sizes)
            if len(sizes) != 3 or sum(sizes) != self.num_clips or min(sizes) < 0:
                raise InvalidInputError(f"split_sizes {self.split_sizes} must be 3 counts summing to {self.num_clips}")
            return sizes
        n_train = int(round(0.7 * self.num_clips))
        n_valid = int(round(0.1 * self.num_clips))
        return n_train, n_valid, self.num_clips - n_train - n_valid


def generate_synthetic(cfg: SyntheticConfig | None = None, **overrides) -> Dataset:
    """Seed-deterministic synthetic dataset.

    Bump centres are drawn so that centres are at least ``2 * bump_width``
    apart and supports stay inside the clip; without noise each channel then
    has exactly ``m`` local-maximum runs. Channels share bump positions but
    draw their own amplitudes.
    """
    cfg = cfg or SyntheticConfig()
    if overrides:
        cfg = SyntheticConfig(**{**cfg.__dict__, **overrides})
    if cfg.max_peaks < 1:
        raise InvalidInputError("max_peaks must be >= 1")
    w = int(cfg.bump_width)
    if w < 1:
        raise InvalidInputError("bump_width must be >= 1")
    # centres in [w, length - 1 - w], pairwise >= 2w apart
    span = cfg.length - 2 * w - (cfg.max_peaks - 1) * 2 * w
    if span < 1:
        raise InvalidInputError(
            f"length {cfg.length} cannot hold {cfg.max_peaks} bumps of width {w} with separation {2 * w}"
        )
    lo_amp, hi_amp = cfg.amplitude_range
    n_train, n_valid, _ = cfg.resolved_splits()
    rng = np.random.default_rng(cfg.rng_seed)
    t = np.arange(cfg.length)
    clips = []
    for i in range(cfg.num_clips):
        m = int(rng.integers(1, cfg.max_peaks + 1))
        # m sorted offsets in [0, span) then spread by the minimum separation
        offsets = np.sort(rng.choice(span, size=m, replace=False)) if span >= m else np.sort(rng.integers(0, span, m))
        centres = w + offsets + np.arange(m) * 2 * w
        amps = rng.uniform(lo_amp, hi_amp, size=(cfg.num_channels, m))
        x = np.zeros((cfg.num_channels, cfg.length))
        for j, c in enumerate(centres):
            d = np.abs(t - c)
            shape = np.where(d < w, 0.5 * (1.0 + np.cos(np.pi * d / w)), 0.0)
            x += amps[:, j : j + 1] * shape[None, :]
        if cfg.noise_std > 0:
            x += rng.normal(0.0, cfg.noise_std, size=x.shape)
        labels = (np.arange(1, cfg.max_peaks + 1) <= m).astype(np.int8)
        split = "train" if i < n_train else "valid" if i < n_train + n_valid else "test"
        clips.append(Clip(x.astype(np.float32), labels, f"clip{i:05d}", split, peak_count=m))
    tags = [f"peaks_ge_{j}" for j in range(1, cfg.max_peaks + 1)]
    return Dataset(clips, tags)
