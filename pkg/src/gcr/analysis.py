"""Geometry metrics: principal angles between class subspaces, intra-class
feature variability, and class separation R^2."""
import csv
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateFeature, DimensionError, EmptyClass

NORM_EPS = 1e-12


def principal_angles(a, b):
    """Principal angles in degrees, ascending, between span(a) and span(b).

    ``a`` (n x p) and ``b`` (n x q) must have orthonormal columns. Cosines are
    the singular values of ``a.T @ b`` clamped to [0, 1]; angles whose cosine
    exceeds 1/sqrt(2) are taken from the sines instead, which keeps small
    angles accurate.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.ndim != 2 or b.ndim != 2 or a.shape[0] != b.shape[0]:
        raise DimensionError(f"bases live in different ambient spaces: {a.shape} vs {b.shape}")
    if a.shape[1] < b.shape[1]:
        a, b = b, a
    cross = a.T @ b
    cos = np.clip(np.linalg.svd(cross, compute_uv=False), 0.0, 1.0)
    resid = b - a @ cross
    sin = np.clip(np.sort(np.linalg.svd(resid, compute_uv=False)), 0.0, 1.0)
    theta = np.where(cos > np.sqrt(0.5), np.arcsin(sin), np.arccos(cos))
    return np.sort(np.degrees(theta))


@dataclass
class AngleReport:
    """Pairwise principal angles between the class blocks of a parameter.

    ``angles[i, j, :m]`` holds the m = min(k_i, k_j) angles of pair (i, j)
    in ascending order; the remaining slots (heterogeneous dims only) are NaN.
    """

    angles: np.ndarray
    min_angle: np.ndarray
    max_angle: np.ndarray

    @property
    def num_classes(self):
        return self.angles.shape[0]

    def write_csv(self, pairs_path, min_path, max_path):
        c, _, k = self.angles.shape
        with open(pairs_path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["i", "j"] + [f"theta{t + 1}" for t in range(k)])
            for i in range(c):
                for j in range(c):
                    w.writerow([i, j] + [_fmt(v) for v in self.angles[i, j]])
        for path, mat in ((min_path, self.min_angle), (max_path, self.max_angle)):
            with open(path, "w", newline="") as fh:
                w = csv.writer(fh)
                w.writerow([f"c{j}" for j in range(c)])
                for row in mat:
                    w.writerow([_fmt(v) for v in row])


def _fmt(v):
    return "" if np.isnan(v) else repr(float(v))


def angle_report(param):
    """Principal angles for every ordered pair of class blocks."""
    blocks = param.blocks()
    c = len(blocks)
    kmax = max(param.dims)
    angles = np.full((c, c, kmax), np.nan)
    for i in range(c):
        angles[i, i, :param.dims[i]] = 0.0
        for j in range(i + 1, c):
            th = principal_angles(blocks[i], blocks[j])
            angles[i, j, :th.size] = th
            angles[j, i, :th.size] = th
    return AngleReport(angles, np.nanmin(angles, axis=2), np.nanmax(angles, axis=2))


@dataclass
class FeatureBank:
    features: np.ndarray
    labels: np.ndarray
    centered: bool = False

    def __post_init__(self):
        self.features = np.asarray(self.features, dtype=np.float64)
        self.labels = np.asarray(self.labels).astype(np.int64)
        if self.features.ndim != 2 or self.labels.shape != (len(self.features),):
            raise DimensionError("features must be (N, n) with N labels")

    @classmethod
    def from_features(cls, features, labels, center=True):
        features = np.asarray(features, dtype=np.float64)
        if center:
            features = features - features.mean(axis=0)
        return cls(features, labels, centered=center)

    def centered_copy(self):
        if self.centered:
            return self
        return FeatureBank.from_features(self.features, self.labels, center=True)

    def class_ids(self, num_classes=None):
        c = num_classes if num_classes is not None else int(self.labels.max()) + 1
        counts = np.bincount(self.labels, minlength=c)
        empty = np.flatnonzero(counts == 0)
        if empty.size:
            raise EmptyClass(f"class {empty[0]} has no samples")
        return np.arange(c)


def _unit_rows(x, labels, drop=True):
    r = np.linalg.norm(x, axis=1)
    bad = r < NORM_EPS
    if bad.any():
        if not drop:
            raise DegenerateFeature(f"{int(bad.sum())} feature vectors have zero norm")
        warnings.warn(f"dropped {int(bad.sum())} near-zero feature vectors", RuntimeWarning,
                      stacklevel=3)
    keep = ~bad
    return x[keep] / r[keep, None], labels[keep]


def intra_class_variability(bank, num_classes=None):
    """Mean pairwise angle (degrees) within each class, averaged over classes.

    Uses globally centered features. Each class mean runs over all |F_i|^2
    ordered pairs, self-pairs included (they contribute 0).
    """
    bank = bank.centered_copy()
    classes = bank.class_ids(num_classes)
    u, labels = _unit_rows(bank.features, bank.labels)
    means = []
    for c in classes:
        f = u[labels == c]
        if len(f) == 0:
            raise EmptyClass(f"class {c} has no usable samples")
        ang = np.degrees(np.arccos(np.clip(f @ f.T, -1.0, 1.0)))
        np.fill_diagonal(ang, 0.0)
        means.append(ang.sum() / len(f) ** 2)
    return float(np.mean(means))


def class_separation_r2(bank, num_classes=None, center=False):
    """1 - (mean within-class cosine distance) / (mean overall cosine distance).

    Within-class means are taken over all ordered pairs of a class and then
    averaged with equal class weight; the overall mean runs over all ordered
    sample pairs. Features are used uncentered unless ``center`` is set.
    """
    x = bank.features
    if center and not bank.centered:
        x = x - x.mean(axis=0)
    classes = bank.class_ids(num_classes)
    if len(classes) < 2:
        raise EmptyClass("class separation needs at least two classes")
    u, labels = _unit_rows(x, bank.labels, drop=False)
    # mean cosine over all pairs of a set = |sum of unit vectors|^2 / size^2
    intra = []
    for c in classes:
        f = u[labels == c]
        intra.append(1.0 - np.sum(f.sum(axis=0) ** 2) / len(f) ** 2)
    overall = 1.0 - np.sum(u.sum(axis=0) ** 2) / len(u) ** 2
    return float(1.0 - np.mean(intra) / overall)


def subspace_distance(a, b):
    """Largest principal angle in degrees (0 means the subspaces coincide)."""
    return float(principal_angles(a, b)[-1])

