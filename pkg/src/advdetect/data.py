"""Dataset containers and loaders: MNIST IDX, CIFAR-10 binary, synthetic."""

import gzip
import struct
from dataclasses import dataclass, field

import numpy as np

from .blur import blur_grid
from .errors import (
    BadMagicError,
    CountMismatchError,
    DimensionMismatchError,
    TruncatedFileError,
)

IDX_IMAGE_MAGIC = 2051
IDX_LABEL_MAGIC = 2049
CIFAR_RECORD_BYTES = 3073  # 1 label byte + 32*32*3 pixel bytes


@dataclass(frozen=True, eq=False)
class Dataset:
    """Labeled flat image vectors.

    ``examples`` is an (n, d) float64 array with every pixel inside
    ``pixel_range``; ``shape`` is (height, width, channels) with
    d = height*width*channels. Instances are immutable; the arrays are
    marked read-only so they can be shared across threads.
    """

    examples: np.ndarray
    labels: np.ndarray
    pixel_range: tuple = (0.0, 1.0)
    shape: tuple = (28, 28, 1)
    name: str = "dataset"
    n_classes: int = 10

    def __post_init__(self):
        examples = np.ascontiguousarray(self.examples, dtype=np.float64)
        labels = np.ascontiguousarray(self.labels, dtype=np.int64)
        h, w, c = self.shape
        if examples.ndim != 2 or examples.shape[1] != h * w * c:
            raise DimensionMismatchError(
                f"examples shape {examples.shape} does not match image shape {self.shape}"
            )
        if labels.shape != (examples.shape[0],):
            raise CountMismatchError(
                f"{labels.shape[0]} labels for {examples.shape[0]} examples"
            )
        lo, hi = self.pixel_range
        if examples.size and (examples.min() < lo or examples.max() > hi):
            raise ValueError(f"pixels outside declared range [{lo}, {hi}]")
        if labels.size and (labels.min() < 0 or labels.max() >= self.n_classes):
            raise ValueError(f"labels outside [0, {self.n_classes})")
        examples.setflags(write=False)
        labels.setflags(write=False)
        object.__setattr__(self, "examples", examples)
        object.__setattr__(self, "labels", labels)

    @property
    def n(self):
        return self.examples.shape[0]

    @property
    def dim(self):
        return self.examples.shape[1]

    def image(self, i):
        """Example ``i`` reshaped to (height, width, channels)."""
        return self.examples[i].reshape(self.shape)

    def subset(self, indices, name=None):
        return Dataset(
            self.examples[indices],
            self.labels[indices],
            self.pixel_range,
            self.shape,
            name if name is not None else self.name,
            self.n_classes,
        )


@dataclass(frozen=True, eq=False)
class CenteredDataset:
    """A dataset shifted by the training-split per-pixel mean."""

    base: Dataset
    mean: np.ndarray
    examples: np.ndarray = field(init=False)

    def __post_init__(self):
        mean = np.ascontiguousarray(self.mean, dtype=np.float64)
        if mean.shape != (self.base.dim,):
            raise DimensionMismatchError(
                f"mean length {mean.shape} does not match dimension {self.base.dim}"
            )
        centered = self.base.examples - mean
        mean.setflags(write=False)
        centered.setflags(write=False)
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "examples", centered)

    @property
    def labels(self):
        return self.base.labels


def _read_be_u32(buf, offset, what):
    if len(buf) < offset + 4:
        raise TruncatedFileError(f"file ends inside the {what} header field")
    return struct.unpack_from(">I", buf, offset)[0]


def parse_idx(image_bytes, label_bytes, name="mnist"):
    """Decode a big-endian IDX image/label file pair into a Dataset.

    Pixels are rescaled from [0, 255] bytes to [0, 1] reals, flattened
    row-major.
    """
    image_bytes = bytes(image_bytes)
    label_bytes = bytes(label_bytes)

    magic = _read_be_u32(image_bytes, 0, "image magic")
    if magic != IDX_IMAGE_MAGIC:
        raise BadMagicError(f"image magic is {magic}, expected {IDX_IMAGE_MAGIC}")
    n_images = _read_be_u32(image_bytes, 4, "image count")
    rows = _read_be_u32(image_bytes, 8, "row count")
    cols = _read_be_u32(image_bytes, 12, "column count")

    label_magic = _read_be_u32(label_bytes, 0, "label magic")
    if label_magic != IDX_LABEL_MAGIC:
        raise BadMagicError(f"label magic is {label_magic}, expected {IDX_LABEL_MAGIC}")
    n_labels = _read_be_u32(label_bytes, 4, "label count")
    if n_labels != n_images:
        raise CountMismatchError(f"image count {n_images} != label count {n_labels}")

    n_pixels = n_images * rows * cols
    if len(image_bytes) < 16 + n_pixels:
        raise TruncatedFileError(
            f"image data has {len(image_bytes) - 16} bytes, header promises {n_pixels}"
        )
    if len(label_bytes) < 8 + n_labels:
        raise TruncatedFileError(
            f"label data has {len(label_bytes) - 8} bytes, header promises {n_labels}"
        )

    pixels = np.frombuffer(image_bytes, dtype=np.uint8, count=n_pixels, offset=16)
    examples = pixels.reshape(n_images, rows * cols).astype(np.float64) / 255.0
    labels = np.frombuffer(label_bytes, dtype=np.uint8, count=n_labels, offset=8)
    return Dataset(examples, labels.astype(np.int64), (0.0, 1.0), (rows, cols, 1), name)


def to_idx_bytes(dataset):
    """Serialize a [0, 1]-range dataset back to an IDX image/label byte pair.

    Pixels must sit on the k/255 grid (as anything decoded by parse_idx does).
    """
    h, w, c = dataset.shape
    if c != 1:
        raise DimensionMismatchError("IDX serialization covers single-channel images")
    scaled = dataset.examples * 255.0
    rounded = np.rint(scaled)
    if np.max(np.abs(scaled - rounded)) > 1e-6:
        raise ValueError("pixels are not on the 1/255 grid; refusing lossy IDX write")
    image_bytes = struct.pack(">IIII", IDX_IMAGE_MAGIC, dataset.n, h, w)
    image_bytes += rounded.astype(np.uint8).tobytes()
    label_bytes = struct.pack(">II", IDX_LABEL_MAGIC, dataset.n)
    label_bytes += dataset.labels.astype(np.uint8).tobytes()
    return image_bytes, label_bytes


def parse_cifar10(batch_bytes, name="cifar10"):
    """Decode a CIFAR-10 binary batch (3073-byte records, channel-major)."""
    batch_bytes = bytes(batch_bytes)
    if len(batch_bytes) == 0 or len(batch_bytes) % CIFAR_RECORD_BYTES != 0:
        raise TruncatedFileError(
            f"{len(batch_bytes)} bytes is not a multiple of the {CIFAR_RECORD_BYTES}-byte record"
        )
    raw = np.frombuffer(batch_bytes, dtype=np.uint8).reshape(-1, CIFAR_RECORD_BYTES)
    labels = raw[:, 0].astype(np.int64)
    examples = raw[:, 1:].astype(np.float64) / 255.0
    return Dataset(examples, labels, (0.0, 1.0), (32, 32, 3), name)


def _bar_templates(side, classes):
    # one smooth oriented bar per class, fixed geometry independent of seed
    center = (side - 1) / 2.0
    ii, jj = np.meshgrid(np.arange(side), np.arange(side), indexing="ij")
    width = max(side / 12.0, 0.9)
    templates = np.empty((classes, side * side))
    for c in range(classes):
        angle = np.pi * c / classes
        # distance from the line through the center with direction (cos, sin)
        dist = -np.sin(angle) * (ii - center) + np.cos(angle) * (jj - center)
        bar = np.exp(-0.5 * (dist / width) ** 2)
        templates[c] = (0.72 * bar).ravel()
    return templates


def make_synthetic(seed, n, side=28, classes=10, name="synthetic"):
    """Deterministic synthetic image dataset for download-free runs.

    Each class is a smooth oriented bar; examples add per-example amplitude
    jitter and low-pass (blurred) pixel noise, clipped to [0, 1]. Templates
    depend only on (side, classes), so splits built from different seeds share
    the same class geometry.
    """
    if classes < 2:
        raise ValueError("need at least 2 classes")
    if side < 4:
        raise ValueError("side must be at least 4 pixels")
    rng = np.random.default_rng(seed)
    shape = (side, side, 1)
    templates = _bar_templates(side, classes)
    labels = rng.permutation(np.arange(n) % classes)
    amplitude = rng.uniform(0.75, 1.0, size=n)
    noise = rng.normal(0.0, 0.5, size=(n, side * side))
    noise = blur_grid(noise, shape, sigma=1.4)
    examples = 0.12 + amplitude[:, None] * templates[labels] + noise
    np.clip(examples, 0.0, 1.0, out=examples)
    return Dataset(examples, labels, (0.0, 1.0), shape, name, classes)


def center_data(train, others=()):
    """Center ``train`` about its own mean and shift ``others`` by that mean."""
    dims = {ds.dim for ds in (train, *others)}
    if len(dims) != 1:
        raise DimensionMismatchError(f"datasets disagree on dimension: {sorted(dims)}")
    mean = train.examples.mean(axis=0)
    centered_train = CenteredDataset(train, mean)
    centered_others = [CenteredDataset(ds, mean) for ds in others]
    return centered_train, centered_others


def _maybe_gunzip(raw):
    return gzip.decompress(raw) if raw[:2] == b"\x1f\x8b" else raw


def load_idx_pair(image_path, label_path, name="mnist"):
    """Read an IDX image/label file pair from disk (plain or gzipped)."""
    with open(image_path, "rb") as fh:
        image_bytes = _maybe_gunzip(fh.read())
    with open(label_path, "rb") as fh:
        label_bytes = _maybe_gunzip(fh.read())
    return parse_idx(image_bytes, label_bytes, name=name)
