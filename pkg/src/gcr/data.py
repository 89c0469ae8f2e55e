"""Synthetic Gaussian-mixture classification data and CSV round-tripping."""
import csv

import numpy as np

from .errors import CorruptContainer, InvalidSpec
from .train import Dataset


def make_blobs(num_classes, dim, per_class, spread, seed=0, modes=1, test_per_class=0):
    """Balanced mixture with ``modes`` unit-norm centers per class.

    Each sample is ``center + spread * xi / sqrt(dim)`` with ``xi`` standard
    normal, so ``spread`` is the typical ratio of noise length to center
    length (about the tangent of the angular deviation). Samples cycle through
    a class's modes in order. Returns ``(train, test)``; ``test`` is None when
    ``test_per_class`` is 0. Train and test share the same centers.
    """
    if num_classes < 1 or dim < 1 or per_class < 1 or modes < 1:
        raise InvalidSpec("num_classes, dim, per_class and modes must be positive")
    if spread < 0 or test_per_class < 0:
        raise InvalidSpec("spread and test_per_class must be nonnegative")
    centers_seq, train_seq, test_seq = np.random.SeedSequence(seed).spawn(3)
    rng = np.random.default_rng(centers_seq)
    centers = rng.standard_normal((num_classes, modes, dim))
    centers /= np.linalg.norm(centers, axis=2, keepdims=True)

    def draw(count, seq):
        r = np.random.default_rng(seq)
        labels = np.repeat(np.arange(num_classes), count)
        mode = np.tile(np.arange(count) % modes, num_classes)
        x = centers[labels, mode] + spread * r.standard_normal((len(labels), dim)) / np.sqrt(dim)
        return Dataset(x, labels, num_classes)

    train = draw(per_class, train_seq)
    test = draw(test_per_class, test_seq) if test_per_class else None
    return train, test


def write_dataset(dataset, features_path, labels_path):
    d = dataset.x.shape[1]
    with open(features_path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([f"x{j}" for j in range(d)])
        for row in dataset.x:
            w.writerow([repr(float(v)) for v in row])
    with open(labels_path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["label"])
        for v in dataset.y:
            w.writerow([int(v)])


def read_matrix_csv(path):
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise CorruptContainer(f"{path}: empty CSV")
    try:
        return np.array([[float(v) for v in r] for r in rows[1:]], dtype=np.float64)
    except ValueError as exc:
        raise CorruptContainer(f"{path}: {exc}") from exc


def read_dataset(features_path, labels_path, num_classes=None):
    x = read_matrix_csv(features_path)
    y = read_matrix_csv(labels_path)
    if y.ndim != 2 or y.shape[1] != 1 or np.any(y != np.round(y)):
        raise CorruptContainer(f"{labels_path}: expected one integer label column")
    if len(y) != len(x):
        raise CorruptContainer("feature and label files have different row counts")
    return Dataset(x, y[:, 0].astype(np.int64), num_classes)
