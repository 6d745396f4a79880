"""Dataset ingestion and secret-label construction.

CIFAR-10 provides a common 10-class secret shared by every eavesdropper;
CelebA provides per-eavesdropper secrets built from pairs of binary face
attributes (4 classes per pair).  A deterministic synthetic dataset with a
planted, learnable low-frequency class pattern backs fast end-to-end tests.
All pixel values are normalized by ``pixel_max`` (255) into [0, 1] at load
time; de-normalization happens only when exporting images.
"""

from __future__ import annotations

import dataclasses
import pickle
import tarfile
from pathlib import Path
from typing import Dict, Optional, Sequence

import numpy as np
import torch

from .codec import ImageBatch

PIXEL_MAX = 255.0

CIFAR10_DIR = "cifar-10-batches-py"
CIFAR10_TAR = "cifar-10-python.tar.gz"
CIFAR10_TRAIN_FILES = tuple(f"data_batch_{i}" for i in range(1, 6))
CIFAR10_TEST_FILES = ("test_batch",)

CELEBA_IMAGE_DIR = "img_align_celeba"
CELEBA_ATTR_FILE = "list_attr_celeba.txt"
CELEBA_PARTITION_FILE = "list_eval_partition.txt"


class IngestionError(RuntimeError):
    """A dataset file is missing or unreadable; the message names the file."""


class DataConfigError(ValueError):
    """Invalid secret mapping or dataset configuration."""


@dataclasses.dataclass(frozen=True)
class SecretLabel:
    """Ground-truth class index with its one-hot encoding."""

    class_index: int
    num_classes: int

    def __post_init__(self) -> None:
        if not 0 <= self.class_index < self.num_classes:
            raise DataConfigError(
                f"class index {self.class_index} outside [0, {self.num_classes})"
            )

    @property
    def one_hot(self) -> np.ndarray:
        vec = np.zeros(self.num_classes, dtype=np.int64)
        vec[self.class_index] = 1
        return vec


@dataclasses.dataclass(frozen=True)
class SecretMapping:
    """How one secret stream is derived from the dataset annotations."""

    secret_id: str
    source: str  # "class_label" | "attribute_pair"
    attributes: Optional[tuple] = None
    num_classes: int = 0

    def __post_init__(self) -> None:
        if self.source not in ("class_label", "attribute_pair"):
            raise DataConfigError(f"unknown secret source {self.source!r}")
        if self.source == "attribute_pair":
            if self.attributes is None or len(self.attributes) != 2:
                raise DataConfigError(
                    f"secret {self.secret_id!r} needs exactly two attribute names"
                )
            if self.num_classes != 4:
                raise DataConfigError(
                    f"attribute-pair secrets have 4 classes, got {self.num_classes}"
                )


CELEBA_TABLE3 = (
    SecretMapping("eve1", "attribute_pair", ("Wavy_Hair", "Black_Hair"), 4),
    SecretMapping("eve2", "attribute_pair", ("Wearing_Lipstick", "Smiling"), 4),
    SecretMapping("eve3", "attribute_pair", ("Double_Chin", "Wearing_Necklace"), 4),
    SecretMapping("eve4", "attribute_pair", ("No_Beard", "5_o_Clock_Shadow"), 4),
    SecretMapping("eve5", "attribute_pair", ("Bags_Under_Eyes", "Arched_Eyebrows"), 4),
    SecretMapping("eve6", "attribute_pair", ("High_Cheekbones", "Pointy_Nose"), 4),
)

SECRET_MAPPING_PRESETS = {"celeba-table3": CELEBA_TABLE3}


@dataclasses.dataclass
class ImageDataset:
    """In-memory split: images (N, H, W, C) float32 in [0, 1] plus secret streams."""

    images: np.ndarray
    labels: Dict[str, np.ndarray]
    num_classes: Dict[str, int]
    pixel_max: float = PIXEL_MAX

    def __post_init__(self) -> None:
        for secret_id, arr in self.labels.items():
            if len(arr) != len(self.images):
                raise DataConfigError(
                    f"secret {secret_id!r} has {len(arr)} labels for "
                    f"{len(self.images)} images"
                )

    def __len__(self) -> int:
        return len(self.images)

    @property
    def image_shape(self) -> tuple:
        return tuple(self.images.shape[1:])

    def subset(self, count: int) -> "ImageDataset":
        count = min(count, len(self))
        return ImageDataset(
            images=self.images[:count],
            labels={k: v[:count] for k, v in self.labels.items()},
            num_classes=dict(self.num_classes),
            pixel_max=self.pixel_max,
        )


def normalize_pixels(raw: np.ndarray, pixel_max: float = PIXEL_MAX) -> np.ndarray:
    return (raw.astype(np.float32)) / np.float32(pixel_max)


def denormalize_pixels(img01: np.ndarray, pixel_max: float = PIXEL_MAX) -> np.ndarray:
    return np.clip(np.rint(img01 * pixel_max), 0, pixel_max).astype(np.uint8)


def _read_cifar_batch(path: Path):
    if not path.is_file():
        raise IngestionError(f"missing CIFAR-10 batch file: {path}")
    try:
        with open(path, "rb") as fh:
            raw = pickle.load(fh, encoding="bytes")
        data = raw[b"data"]
        labels = raw.get(b"labels", raw.get(b"fine_labels"))
        images = data.reshape(-1, 3, 32, 32).transpose(0, 2, 3, 1)
    except (pickle.UnpicklingError, KeyError, ValueError, OSError) as exc:
        raise IngestionError(f"corrupt CIFAR-10 batch file {path}: {exc}") from exc
    return images, np.asarray(labels, dtype=np.int64)


def _cifar_base(root) -> Path:
    root = Path(root)
    base = root / CIFAR10_DIR if (root / CIFAR10_DIR).is_dir() else root
    if not (base / "test_batch").is_file():
        tar_path = root / CIFAR10_TAR
        if tar_path.is_file():
            with tarfile.open(tar_path, "r:gz") as tar:
                tar.extractall(root)
            base = root / CIFAR10_DIR
    return base


def load_cifar10(root, split: str) -> ImageDataset:
    """Load the canonical CIFAR-10 split (50000 train / 10000 test) from a cache.

    ``root`` may hold the extracted ``cifar-10-batches-py`` directory, the
    batch files directly, or the distribution tarball (extracted on first use).
    """
    if split not in ("train", "test"):
        raise DataConfigError(f"unknown CIFAR-10 split {split!r}")
    base = _cifar_base(root)
    files = CIFAR10_TRAIN_FILES if split == "train" else CIFAR10_TEST_FILES
    images, labels = [], []
    for name in files:
        imgs, labs = _read_cifar_batch(base / name)
        images.append(imgs)
        labels.append(labs)
    return ImageDataset(
        images=normalize_pixels(np.concatenate(images)),
        labels={"class": np.concatenate(labels)},
        num_classes={"class": 10},
    )


def attribute_pair_to_class(a: int, b: int) -> int:
    """Two binary attributes -> class index 2a + b in [0, 4)."""
    if a not in (0, 1) or b not in (0, 1):
        raise DataConfigError(f"attribute bits must be 0/1, got ({a}, {b})")
    return 2 * a + b


def _parse_celeba_attrs(path: Path):
    if not path.is_file():
        raise IngestionError(f"missing CelebA attribute file: {path}")
    with open(path) as fh:
        lines = fh.read().splitlines()
    names = lines[1].split()
    table = {}
    for line in lines[2:]:
        parts = line.split()
        if not parts:
            continue
        bits = [(1 if int(v) > 0 else 0) for v in parts[1:]]
        table[parts[0]] = bits
    return names, table


def _parse_celeba_partition(path: Path):
    if not path.is_file():
        raise IngestionError(f"missing CelebA partition file: {path}")
    split_code = {"train": 0, "val": 1, "test": 2}
    by_split: Dict[int, list] = {0: [], 1: [], 2: []}
    with open(path) as fh:
        for line in fh:
            parts = line.split()
            if len(parts) == 2:
                by_split[int(parts[1])].append(parts[0])
    return split_code, by_split


def load_celeba(
    root,
    split: str,
    mappings: Sequence[SecretMapping] = CELEBA_TABLE3,
    image_size: int = 64,
    max_count: Optional[int] = None,
) -> ImageDataset:
    """Load a CelebA split with one secret stream per attribute-pair mapping.

    Images are center-cropped to a square and resized to ``image_size``.
    Unknown attribute names raise a configuration error listing the valid
    per-eavesdropper attribute pairs.
    """
    from PIL import Image

    root = Path(root)
    names, attr_table = _parse_celeba_attrs(root / CELEBA_ATTR_FILE)
    name_index = {n: i for i, n in enumerate(names)}
    for mapping in mappings:
        if mapping.source != "attribute_pair":
            raise DataConfigError(
                f"CelebA secrets must be attribute pairs, got {mapping.source!r}"
            )
        for attr in mapping.attributes:
            if attr not in name_index:
                known = ", ".join(
                    f"{m.secret_id}=({m.attributes[0]}, {m.attributes[1]})"
                    for m in CELEBA_TABLE3
                )
                raise DataConfigError(
                    f"unknown CelebA attribute {attr!r}; known mappings: {known}"
                )

    split_code, by_split = _parse_celeba_partition(root / CELEBA_PARTITION_FILE)
    if split not in split_code:
        raise DataConfigError(f"unknown CelebA split {split!r}")
    filenames = by_split[split_code[split]]
    if max_count is not None:
        filenames = filenames[:max_count]

    images = np.empty((len(filenames), image_size, image_size, 3), dtype=np.float32)
    labels = {m.secret_id: np.empty(len(filenames), dtype=np.int64) for m in mappings}
    for row, fname in enumerate(filenames):
        path = root / CELEBA_IMAGE_DIR / fname
        if not path.is_file():
            raise IngestionError(f"missing CelebA image: {path}")
        with Image.open(path) as im:
            im = im.convert("RGB")
            side = min(im.size)
            left = (im.width - side) // 2
            top = (im.height - side) // 2
            im = im.crop((left, top, left + side, top + side))
            im = im.resize((image_size, image_size), Image.BILINEAR)
            images[row] = normalize_pixels(np.asarray(im))
        bits = attr_table.get(fname)
        if bits is None:
            raise IngestionError(f"CelebA image {fname} has no attribute row")
        for mapping in mappings:
            a = bits[name_index[mapping.attributes[0]]]
            b = bits[name_index[mapping.attributes[1]]]
            labels[mapping.secret_id][row] = attribute_pair_to_class(a, b)

    return ImageDataset(
        images=images,
        labels=labels,
        num_classes={m.secret_id: m.num_classes for m in mappings},
    )


def class_weights(labels: np.ndarray, num_classes: int, w_max: float = 20.0) -> np.ndarray:
    """Inverse-frequency weights w_l = N / (L * count_l), capped at ``w_max``.

    The sample-weighted mean of the uncapped weights is 1; empty classes get
    the cap instead of an infinite weight.
    """
    labels = np.asarray(labels)
    if labels.size == 0:
        raise DataConfigError("cannot compute class weights from an empty stream")
    counts = np.bincount(labels, minlength=num_classes).astype(np.float64)
    weights = np.full(num_classes, w_max, dtype=np.float64)
    nonzero = counts > 0
    weights[nonzero] = labels.size / (num_classes * counts[nonzero])
    return np.minimum(weights, w_max)


def _class_patterns(height: int, width: int, num_classes: int) -> np.ndarray:
    yy, xx = np.mgrid[0:height, 0:width]
    yy = yy / height
    xx = xx / width
    patterns = np.empty((num_classes, height, width), dtype=np.float64)
    for c in range(num_classes):
        fx = 1 + c % 4
        fy = 1 + (c // 4) % 4
        phase = (np.pi / 2.0) * (c // 16)
        patterns[c] = np.cos(2 * np.pi * (fx * xx + fy * yy) + phase)
    return patterns


def synthetic_dataset(
    n_images: int,
    height: int = 32,
    width: int = 32,
    channels: int = 3,
    num_classes: int = 10,
    seed: int = 0,
    pattern_gain: float = 0.3,
    noise_std: float = 0.12,
) -> ImageDataset:
    """Deterministic pseudo-random images with a planted low-frequency class pattern.

    Each class plants a distinct 2-D cosine; the label is recoverable from raw
    pixels by a linear probe, which makes the stream a usable stand-in secret
    for fast end-to-end runs.
    """
    rng = np.random.default_rng(seed)
    labels = rng.integers(0, num_classes, size=n_images)
    patterns = _class_patterns(height, width, num_classes)
    base = 0.5 + pattern_gain * patterns[labels][..., None]
    noise = noise_std * rng.normal(size=(n_images, height, width, channels))
    images = np.clip(base + noise, 0.0, 1.0).astype(np.float32)
    return ImageDataset(
        images=images,
        labels={"class": labels.astype(np.int64)},
        num_classes={"class": num_classes},
    )


def iter_batches(
    dataset: ImageDataset,
    batch_size: int,
    rng: Optional[np.random.Generator] = None,
    order: Optional[np.ndarray] = None,
):
    """Yield (ImageBatch, {secret_id: LongTensor}) batches.

    The iteration order is the dataset order unless ``order`` (an index
    permutation) or ``rng`` (which draws one) is given; a fixed seed therefore
    reproduces the exact batch sequence.
    """
    n = len(dataset)
    if order is None:
        order = rng.permutation(n) if rng is not None else np.arange(n)
    for start in range(0, n, batch_size):
        idx = order[start : start + batch_size]
        pixels = torch.from_numpy(dataset.images[idx])
        labels = {
            key: torch.from_numpy(arr[idx]) for key, arr in dataset.labels.items()
        }
        yield ImageBatch(pixels, dataset.pixel_max), labels
