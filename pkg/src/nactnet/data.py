"""Datasets: CIFAR-10 binary batches and a synthetic two-class 2D set."""

from __future__ import annotations

from pathlib import Path

import numpy as np
from sklearn.datasets import make_moons

RECORD_BYTES = 3073
IMAGE_SHAPE = (3, 32, 32)
TRAIN_FILES = tuple(f"data_batch_{i}.bin" for i in range(1, 6))
TEST_FILE = "test_batch.bin"


class DatasetError(OSError):
    pass


def read_cifar_batch(path: str | Path) -> tuple[np.ndarray, np.ndarray]:
    """Raw records as ``(uint8 images (n, 3, 32, 32), int64 labels)``."""
    path = Path(path)
    if not path.is_file():
        raise DatasetError(f"missing CIFAR-10 batch file {path}")
    raw = np.fromfile(path, dtype=np.uint8)
    if raw.size == 0 or raw.size % RECORD_BYTES:
        raise DatasetError(
            f"{path}: size {raw.size} is not a positive multiple of {RECORD_BYTES}")
    rec = raw.reshape(-1, RECORD_BYTES)
    labels = rec[:, 0].astype(np.int64)
    if labels.max() > 9:
        raise DatasetError(f"{path}: label byte out of range")
    return rec[:, 1:].reshape(-1, *IMAGE_SHAPE), labels


def load_cifar10(data_dir: str | Path, flatten: bool = True):
    """``((X_train, y_train), (X_test, y_test), mean)``.

    Pixels are scaled to [0, 1] and the per-channel training mean is
    subtracted from both splits.  With ``flatten`` images become rows of
    length 3072 in channel-plane order.
    """
    d = Path(data_dir)
    parts = [read_cifar_batch(d / name) for name in TRAIN_FILES]
    xtr = np.concatenate([p[0] for p in parts]).astype(np.float64) / 255.0
    ytr = np.concatenate([p[1] for p in parts])
    xte, yte = read_cifar_batch(d / TEST_FILE)
    xte = xte.astype(np.float64) / 255.0
    mean = xtr.mean(axis=(0, 2, 3))
    xtr -= mean[None, :, None, None]
    xte -= mean[None, :, None, None]
    if flatten:
        xtr, xte = xtr.reshape(len(xtr), -1), xte.reshape(len(xte), -1)
    return (xtr, ytr), (xte, yte), mean


def flip_and_crop(X: np.ndarray, rng: np.random.Generator, pad: int = 4) -> np.ndarray:
    """Random horizontal flip and padded random crop for (n, 3, 32, 32) or flat rows."""
    flat = X.ndim == 2
    imgs = X.reshape(len(X), *IMAGE_SHAPE) if flat else X
    n, _, h, w = imgs.shape
    flip = rng.random(n) < 0.5
    out = np.where(flip[:, None, None, None], imgs[..., ::-1], imgs)
    padded = np.pad(out, ((0, 0), (0, 0), (pad, pad), (pad, pad)))
    dy = rng.integers(0, 2 * pad + 1, size=n)
    dx = rng.integers(0, 2 * pad + 1, size=n)
    res = np.empty_like(imgs)
    for i in range(n):
        res[i] = padded[i, :, dy[i]:dy[i] + h, dx[i]:dx[i] + w]
    return res.reshape(n, -1) if flat else res


def synthetic_2d(n: int = 1000, seed: int = 0, noise: float = 0.1, scale: float = 2.0,
                 test_fraction: float = 0.2):
    """Two interleaved half-moons, split into ``(train, test)``.

    ``scale`` stretches the unit-size moons so that the class gap is wide
    compared to the margins a 1-Lipschitz classifier is trained for.
    """
    X, y = make_moons(n_samples=n, noise=noise, random_state=seed)
    X = X * scale
    n_test = int(round(n * test_fraction))
    return (X[n_test:], y[n_test:]), (X[:n_test], y[:n_test])
