"""Dataset handling: CSV I/O, stratified splits, synthetic spectra, noise.

The on-disk dataset format is a plain UTF-8 CSV whose header names the
bands followed by a final ``label`` column; labels are 0/1 and
reflectances are nonnegative decimal floats. Synthetic generation and
splitting are deterministic functions of their seeds.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from importlib import resources as importlib_resources

import numpy as np

__all__ = [
    "Dataset",
    "SplitSpec",
    "SynthSpec",
    "DataFormatError",
    "load_csv",
    "save_csv",
    "stratified_split",
    "synth_generate",
    "inject_noise",
    "load_synth_spec",
    "default_synth_spec",
]


class DataFormatError(ValueError):
    """A dataset file violated the expected format; message carries row/column."""


@dataclass
class Dataset:
    """Band vectors with binary labels.

    ``X`` is (n_samples, n_bands) float64, ``y`` is (n_samples,) int64 in
    {0, 1}. Values loaded from disk or generated synthetically are
    nonnegative; ``inject_noise`` is the one producer that may emit small
    negatives, which evaluation routes through the signed-tolerant
    forward.
    """

    band_names: list
    X: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        self.X = np.asarray(self.X, dtype=np.float64)
        self.y = np.asarray(self.y, dtype=np.int64)
        if self.X.ndim != 2 or self.X.shape[1] != len(self.band_names):
            raise ValueError(
                f"X shape {self.X.shape} inconsistent with "
                f"{len(self.band_names)} band names"
            )
        if self.y.shape != (self.X.shape[0],):
            raise ValueError("labels must be one per row")
        if not np.isfinite(self.X).all():
            raise ValueError("band values must be finite")
        if not np.isin(self.y, (0, 1)).all():
            raise ValueError("labels must be 0 or 1")

    @property
    def n_samples(self) -> int:
        return self.X.shape[0]

    @property
    def n_bands(self) -> int:
        return self.X.shape[1]

    def subset(self, indices) -> "Dataset":
        idx = np.asarray(indices, dtype=np.intp)
        return Dataset(list(self.band_names), self.X[idx].copy(), self.y[idx].copy())

    def copy(self) -> "Dataset":
        return Dataset(list(self.band_names), self.X.copy(), self.y.copy())


@dataclass
class SplitSpec:
    """Train/validation/test fractions and the fold layout for CV."""

    train_frac: float = 0.70
    val_frac: float = 0.20
    test_frac: float = 0.10
    n_folds: int = 10
    seed: int = 0

    def __post_init__(self):
        total = self.train_frac + self.val_frac + self.test_frac
        if abs(total - 1.0) > 1e-12:
            raise ValueError(f"split fractions sum to {total}, expected 1")
        if min(self.train_frac, self.val_frac, self.test_frac) <= 0:
            raise ValueError("split fractions must be positive")
        if self.n_folds < 2:
            raise ValueError("need at least 2 folds")


@dataclass
class SynthSpec:
    """Recipe for a synthetic two-class spectral dataset.

    Each sample is gain * (class_mean + sigma * z) with z standard normal
    per band and the gain drawn uniformly from [gain_low, gain_high] per
    sample: a multiplicative illumination nuisance that a common-scaling
    invariant feature cancels but raw reflectances do not.
    """

    n_samples: int
    band_names: list
    class0_mean: list
    class1_mean: list
    noise_sigma: float
    gain_low: float
    gain_high: float
    seed: int = 0

    def __post_init__(self):
        n = len(self.band_names)
        if len(self.class0_mean) != n or len(self.class1_mean) != n:
            raise ValueError("class means must match the band count")
        if min(min(self.class0_mean), min(self.class1_mean)) <= 0:
            raise ValueError("class mean spectra must be strictly positive")
        if self.noise_sigma < 0:
            raise ValueError("noise_sigma must be nonnegative")
        if not (0 < self.gain_low <= self.gain_high):
            raise ValueError("gain range must satisfy 0 < low <= high")
        if self.n_samples < 2:
            raise ValueError("need at least 2 samples")

    @property
    def n_bands(self) -> int:
        return len(self.band_names)

    @classmethod
    def from_dict(cls, doc: dict) -> "SynthSpec":
        fields = ("n_samples", "band_names", "class0_mean", "class1_mean",
                  "noise_sigma", "gain_low", "gain_high", "seed")
        missing = [k for k in fields if k not in doc]
        if missing:
            raise DataFormatError(f"synthetic spec missing fields: {missing}")
        return cls(**{k: doc[k] for k in fields})

    def to_dict(self) -> dict:
        return {
            "n_samples": self.n_samples,
            "band_names": list(self.band_names),
            "class0_mean": list(self.class0_mean),
            "class1_mean": list(self.class1_mean),
            "noise_sigma": self.noise_sigma,
            "gain_low": self.gain_low,
            "gain_high": self.gain_high,
            "seed": self.seed,
        }


# ---------------------------------------------------------------------------
# CSV I/O

LABEL_COLUMN = "label"


def load_csv(path) -> Dataset:
    """Read a dataset CSV; header is band names then ``label``.

    Violations raise DataFormatError naming the offending 1-based row
    (header is row 1) and column.
    """
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataFormatError(f"{path}: empty file, missing header") from None
        if len(header) < 2 or header[-1] != LABEL_COLUMN:
            raise DataFormatError(
                f"{path}: header must name at least one band followed by "
                f"'{LABEL_COLUMN}', got {header!r}"
            )
        band_names = header[:-1]
        rows, labels = [], []
        for row_num, row in enumerate(reader, start=2):
            if len(row) != len(header):
                raise DataFormatError(
                    f"{path}: row {row_num} has {len(row)} cells, expected "
                    f"{len(header)}"
                )
            values = []
            for col, cell in zip(band_names, row[:-1]):
                try:
                    value = float(cell)
                except ValueError:
                    raise DataFormatError(
                        f"{path}: row {row_num}, column {col!r}: "
                        f"non-numeric cell {cell!r}"
                    ) from None
                if not np.isfinite(value):
                    raise DataFormatError(
                        f"{path}: row {row_num}, column {col!r}: "
                        f"non-finite value {cell!r}"
                    )
                if value < 0:
                    raise DataFormatError(
                        f"{path}: row {row_num}, column {col!r}: "
                        f"negative reflectance {cell!r}"
                    )
                values.append(value)
            if row[-1] not in ("0", "1"):
                raise DataFormatError(
                    f"{path}: row {row_num}, column '{LABEL_COLUMN}': "
                    f"label must be 0 or 1, got {row[-1]!r}"
                )
            rows.append(values)
            labels.append(int(row[-1]))
    if not rows:
        raise DataFormatError(f"{path}: no data rows")
    return Dataset(band_names, np.array(rows), np.array(labels))


def save_csv(dataset: Dataset, path):
    """Write a dataset CSV that ``load_csv`` reads back value-exactly."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(list(dataset.band_names) + [LABEL_COLUMN])
        for row, label in zip(dataset.X, dataset.y):
            writer.writerow([repr(float(v)) for v in row] + [int(label)])


# ---------------------------------------------------------------------------
# stratified cross-validation splits


def _class_fold_layout(dataset: Dataset, spec: SplitSpec):
    """Per class: dealt (shuffled) order and round-robin fold membership."""
    rng = np.random.default_rng(spec.seed)
    layout = []
    for cls in (0, 1):
        members = np.flatnonzero(dataset.y == cls)
        if len(members) < spec.n_folds:
            raise ValueError(
                f"class {cls} has {len(members)} samples, fewer than "
                f"{spec.n_folds} folds"
            )
        dealt = members[rng.permutation(len(members))]
        layout.append(dealt)
    return layout


def stratified_split(dataset: Dataset, spec: SplitSpec, fold: int):
    """Deterministic stratified (train, validation, test) split for a fold.

    Each class is shuffled once by the spec seed and dealt round-robin
    into folds; fold ``fold`` forms the test set. The rest of each class
    keeps its dealt order and splits train/validation in the
    train:(train+val) proportion. Splits are disjoint and cover the
    dataset, with class proportions within one sample of the global ones.
    """
    if not (0 <= fold < spec.n_folds):
        raise ValueError(f"fold {fold} out of range for {spec.n_folds} folds")
    layout = _class_fold_layout(dataset, spec)

    train_idx, val_idx, test_idx = [], [], []
    train_share = spec.train_frac / (spec.train_frac + spec.val_frac)
    for dealt in layout:
        in_test = np.zeros(len(dealt), dtype=bool)
        in_test[fold::spec.n_folds] = True
        test_idx.append(dealt[in_test])
        remaining = dealt[~in_test]
        n_train = int(round(len(remaining) * train_share))
        train_idx.append(remaining[:n_train])
        val_idx.append(remaining[n_train:])

    def gather(parts):
        return dataset.subset(np.sort(np.concatenate(parts)))

    return gather(train_idx), gather(val_idx), gather(test_idx)


# ---------------------------------------------------------------------------
# synthetic data


def synth_generate(spec: SynthSpec) -> Dataset:
    """Generate a balanced synthetic dataset from the spec, deterministically.

    Draw order per sample: per-band standard normals, then the gain.
    Values are clamped to at least 1e-4 so reflectances stay strictly
    positive even for wide noise settings.
    """
    rng = np.random.default_rng(spec.seed)
    n = spec.n_samples
    n1 = n // 2
    labels = np.concatenate([np.zeros(n - n1, dtype=np.int64),
                             np.ones(n1, dtype=np.int64)])
    means = np.array([spec.class0_mean, spec.class1_mean], dtype=np.float64)
    z = rng.standard_normal((n, spec.n_bands))
    gains = rng.uniform(spec.gain_low, spec.gain_high, size=n)
    X = gains[:, None] * (means[labels] + spec.noise_sigma * z)
    X = np.maximum(X, 1e-4)
    order = rng.permutation(n)
    return Dataset(list(spec.band_names), X[order], labels[order])


def load_synth_spec(path) -> SynthSpec:
    with open(path, "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    return SynthSpec.from_dict(doc)


def default_synth_spec() -> SynthSpec:
    """The packaged 2000-sample, 10-band recipe used by the demos and tests."""
    ref = importlib_resources.files("ndnet").joinpath("resources/synth_default.json")
    with ref.open("r", encoding="utf-8") as fh:
        return SynthSpec.from_dict(json.load(fh))


# ---------------------------------------------------------------------------
# noise injection


def inject_noise(dataset: Dataset, eta: float, seed: int) -> Dataset:
    """Multiplicative noise: each value becomes b + eta*|b|*z, z ~ N(0, 1).

    ``eta`` is the noise level as a fraction of signal magnitude, allowed
    in [0, 0.5]. Labels are untouched and values are NOT clamped: rare
    small negatives are legitimate outputs and evaluation handles them
    through the signed-tolerant forward. eta = 0 returns the dataset
    unchanged bit-for-bit.
    """
    if not (0 <= eta <= 0.5):
        raise ValueError(f"eta must lie in [0, 0.5], got {eta}")
    if eta == 0:
        return dataset.copy()
    rng = np.random.default_rng(seed)
    z = rng.standard_normal(dataset.X.shape)
    noisy = dataset.X + eta * np.abs(dataset.X) * z
    return Dataset(list(dataset.band_names), noisy, dataset.y.copy())
