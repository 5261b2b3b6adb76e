"""Synthetic MNIST-family stand-in generator.

Writes class-structured 28x28 grayscale image sets in the standard IDX
binary layout so the whole ingestion path (binary parsing, scenarios,
training) can run offline at desk scale. Each named dataset gets its own
class prototypes: smooth random fields plus per-sample jitter and noise,
separable enough for small ReLU nets to fit within a couple of epochs.
"""

from __future__ import annotations

import os
import struct

import numpy as np

IDX_FILENAMES = {
    ("train", "images"): "train-images-idx3-ubyte",
    ("train", "labels"): "train-labels-idx1-ubyte",
    ("test", "images"): "t10k-images-idx3-ubyte",
    ("test", "labels"): "t10k-labels-idx1-ubyte",
}

# distinct prototype seeds per stand-in dataset name
NAME_SEEDS = {"mnist": 101, "fashion_mnist": 202, "cifar10": 303}


def _bilinear_upsample(coarse: np.ndarray, side: int) -> np.ndarray:
    k = coarse.shape[0]
    pos = np.linspace(0, k - 1, side)
    i0 = np.floor(pos).astype(int)
    i1 = np.minimum(i0 + 1, k - 1)
    f = pos - i0
    rows = coarse[i0][:, i0] * np.outer(1 - f, 1 - f) \
        + coarse[i0][:, i1] * np.outer(1 - f, f) \
        + coarse[i1][:, i0] * np.outer(f, 1 - f) \
        + coarse[i1][:, i1] * np.outer(f, f)
    return rows


def class_prototypes(seed: int, n_classes: int = 10, side: int = 28) -> np.ndarray:
    rng = np.random.default_rng(seed)
    protos = np.empty((n_classes, side, side))
    for c in range(n_classes):
        coarse = rng.standard_normal((7, 7))
        field = _bilinear_upsample(coarse, side)
        field = (field - field.min()) / (field.max() - field.min() + 1e-12)
        protos[c] = 0.1 + 0.8 * field
    return protos


def synth_images(name: str, split: str, n: int, seed: int,
                 noise: float = 0.06, max_shift: int = 1) -> tuple[np.ndarray, np.ndarray]:
    """Sample (uint8 images (n, 28, 28), labels (n,)) for one split."""
    proto_seed = NAME_SEEDS.get(name, sum(name.encode()))
    protos = class_prototypes(proto_seed)
    side = protos.shape[1]
    rng = np.random.default_rng(np.random.SeedSequence([seed, proto_seed, 0 if split == "train" else 1]))
    labels = rng.integers(0, len(protos), size=n)
    shifts = rng.integers(-max_shift, max_shift + 1, size=(n, 2))
    eps = rng.standard_normal((n, side, side)) * noise
    images = np.empty((n, side, side))
    for i in range(n):
        img = np.roll(protos[labels[i]], tuple(shifts[i]), axis=(0, 1)) + eps[i]
        images[i] = np.clip(img, 0.0, 1.0)
    return np.round(images * 255).astype(np.uint8), labels.astype(np.uint8)


def write_idx_pair(images: np.ndarray, labels: np.ndarray, images_path, labels_path) -> None:
    n, rows, cols = images.shape
    with open(images_path, "wb") as fh:
        fh.write(struct.pack(">IIII", 0x00000803, n, rows, cols))
        fh.write(images.tobytes())
    with open(labels_path, "wb") as fh:
        fh.write(struct.pack(">II", 0x00000801, n))
        fh.write(labels.tobytes())


def generate_dataset(root, name: str, n_train: int = 6000, n_test: int = 1500,
                     seed: int = 0) -> dict:
    """Write a full synthetic IDX quartet under root/<name>/; returns the paths."""
    out_dir = os.path.join(str(root), name)
    os.makedirs(out_dir, exist_ok=True)
    paths = {}
    for split, n in (("train", n_train), ("test", n_test)):
        images, labels = synth_images(name, split, n, seed)
        ip = os.path.join(out_dir, IDX_FILENAMES[(split, "images")])
        lp = os.path.join(out_dir, IDX_FILENAMES[(split, "labels")])
        write_idx_pair(images, labels, ip, lp)
        paths[(split, "images")] = ip
        paths[(split, "labels")] = lp
    return paths
