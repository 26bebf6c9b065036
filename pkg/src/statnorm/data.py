"""Datasets: synthetic Gaussian blobs and the CIFAR-10 binary format.

Both loaders return standardised features (per-feature zero mean, unit
variance, statistics taken from the training split) so that inputs enter the
network at unit scale.
"""

import os
from dataclasses import dataclass

import numpy as np

from .errors import FilesystemError, FormatError, InvalidArgumentError

CIFAR_RECORD = 3073
CIFAR_PIXELS = 3072
CIFAR_TRAIN_FILES = tuple(f"data_batch_{i}.bin" for i in range(1, 6))
CIFAR_TEST_FILE = "test_batch.bin"


@dataclass
class Dataset:
    x_train: np.ndarray
    y_train: np.ndarray
    x_test: np.ndarray
    y_test: np.ndarray
    classes: int

    @property
    def input_dim(self):
        return self.x_train.shape[1]


def standardize(x_train, x_test, eps=1e-12):
    mean = x_train.mean(axis=0)
    std = x_train.std(axis=0)
    std = np.where(std > eps, std, 1.0)
    return (x_train - mean) / std, (x_test - mean) / std


def synthetic_blobs(classes=10, n_train=2000, n_test=500, dim=128, seed=0, separation=1.0,
                    latent_dim=None, normalize=True):
    """Gaussian class clusters, optionally living in a random low-dimensional subspace.

    Class centres are ``separation * N(0, I)`` in ``latent_dim`` coordinates,
    samples add unit noise there, and the result is embedded into ``dim``
    coordinates by a random orthonormal map plus unit isotropic noise.
    """
    if classes < 2 or n_train < 1 or n_test < 0 or dim < 1:
        raise InvalidArgumentError("classes >= 2, n_train >= 1, n_test >= 0 and dim >= 1 are required")
    rng = np.random.default_rng([seed, 0xB10B])
    latent_dim = dim if latent_dim is None else latent_dim
    centres = separation * rng.standard_normal((classes, latent_dim))
    if latent_dim < dim:
        q, _ = np.linalg.qr(rng.standard_normal((dim, latent_dim)))
        embed = q.T
    else:
        embed = np.eye(dim)

    def draw(n):
        y = np.arange(n) % classes
        y = y[rng.permutation(n)]
        z = centres[y] + rng.standard_normal((n, latent_dim))
        x = z @ embed
        if latent_dim < dim:
            x = x + rng.standard_normal((n, dim))
        return x, y

    x_train, y_train = draw(n_train)
    x_test, y_test = draw(n_test)
    if normalize:
        x_train, x_test = standardize(x_train, x_test)
    return Dataset(x_train, y_train.astype(np.int64), x_test, y_test.astype(np.int64), classes)


def read_cifar_file(path, limit=None):
    """Records of one CIFAR-10 binary file: 1 label byte followed by 3072 pixel bytes."""
    try:
        with open(path, "rb") as fh:
            blob = fh.read()
    except FileNotFoundError as exc:
        raise FilesystemError(f"missing CIFAR-10 file: {path}") from exc
    except OSError as exc:
        raise FilesystemError(f"cannot read {path}: {exc}") from exc
    if len(blob) % CIFAR_RECORD:
        whole = len(blob) // CIFAR_RECORD
        raise FormatError(
            f"{path}: length {len(blob)} is not a multiple of {CIFAR_RECORD}; "
            f"partial record starts at byte {whole * CIFAR_RECORD}",
            offset=whole * CIFAR_RECORD,
        )
    records = np.frombuffer(blob, dtype=np.uint8).reshape(-1, CIFAR_RECORD)
    if limit is not None:
        records = records[:limit]
    labels = records[:, 0].astype(np.int64)
    bad = np.flatnonzero(labels > 9)
    if bad.size:
        raise FormatError(f"{path}: label {labels[bad[0]]} out of range", offset=int(bad[0]) * CIFAR_RECORD)
    return records[:, 1:].astype(np.float64), labels


def load_cifar10(path, n_train=None, n_test=None, normalize=True):
    """Load a CIFAR-10 binary directory (``data_batch_*.bin``, ``test_batch.bin``).

    Images stay flattened in file order (3072 values: red, green, blue planes).
    """
    if not os.path.isdir(path):
        raise FilesystemError(f"CIFAR-10 directory not found: {path}")
    xs, ys = [], []
    for name in CIFAR_TRAIN_FILES:
        full = os.path.join(path, name)
        if os.path.exists(full):
            x, y = read_cifar_file(full)
            xs.append(x)
            ys.append(y)
        if n_train is not None and sum(len(y) for y in ys) >= n_train:
            break
    if not xs:
        raise FilesystemError(f"no data_batch_*.bin files in {path}")
    x_train, y_train = np.concatenate(xs)[:n_train], np.concatenate(ys)[:n_train]
    x_test, y_test = read_cifar_file(os.path.join(path, CIFAR_TEST_FILE), limit=n_test)
    if normalize:
        x_train, x_test = standardize(x_train, x_test)
    else:
        x_train, x_test = x_train / 255.0, x_test / 255.0
    return Dataset(x_train, y_train, x_test, y_test, 10)
