"""Datasets, synthetic benchmark generation, CSV ingestion, and splitting.

All randomness flows through ``numpy.random.default_rng`` (PCG64). Every
randomized operation takes an explicit 64-bit seed and is a pure function of
(inputs, seed), so generated data is bit-identical across runs on the same
platform.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Callable

import numpy as np


class DomainTag(Enum):
    SOURCE = "source"
    TARGET = "target"
    VALIDATION = "validation"


class CsvError(ValueError):
    """Malformed CSV input: ragged rows, non-numeric cells, bad label column."""


@dataclass(frozen=True)
class Dataset:
    """An immutable regression sample: features (n, d), labels (n,).

    ``x_bound`` and ``y_bound`` record the radii of the compact sets the
    rows are known to live in (max row 2-norm and max absolute label when
    derived from data). A bound of 0 means "not asserted".
    """

    features: np.ndarray
    labels: np.ndarray
    domain_tag: DomainTag = DomainTag.TARGET
    x_bound: float = 0.0
    y_bound: float = 0.0

    def __post_init__(self):
        features = np.atleast_2d(np.asarray(self.features, dtype=float))
        labels = np.asarray(self.labels, dtype=float).ravel()
        if features.shape[0] != labels.shape[0]:
            raise ValueError(
                f"feature rows ({features.shape[0]}) != labels ({labels.shape[0]})"
            )
        if features.shape[0] < 1:
            raise ValueError("dataset must contain at least one row")
        if self.x_bound < 0 or self.y_bound < 0:
            raise ValueError("bounds must be nonnegative")
        if self.x_bound > 0:
            norms = np.linalg.norm(features, axis=1)
            if norms.max() > self.x_bound * (1 + 1e-12):
                raise ValueError(
                    f"row norm {norms.max():g} exceeds x_bound {self.x_bound:g}"
                )
        if self.y_bound > 0 and np.abs(labels).max() > self.y_bound * (1 + 1e-12):
            raise ValueError(
                f"|label| {np.abs(labels).max():g} exceeds y_bound {self.y_bound:g}"
            )
        features.setflags(write=False)
        labels.setflags(write=False)
        object.__setattr__(self, "features", features)
        object.__setattr__(self, "labels", labels)

    @property
    def n(self) -> int:
        return self.features.shape[0]

    @property
    def dim(self) -> int:
        return self.features.shape[1]


# Truth functions map a feature matrix (n, d) to labels (n,).
TruthFn = Callable[[np.ndarray], np.ndarray]
# Samplers map (rng, n) to a feature matrix (n, d).
InputSampler = Callable[[np.random.Generator, int], np.ndarray]


def uniform_sampler(dim: int, low: float = 0.0, high: float = 1.0) -> InputSampler:
    """I.i.d. uniform draws on [low, high]^dim (the default input law)."""

    def sample(rng: np.random.Generator, n: int) -> np.ndarray:
        return rng.uniform(low, high, size=(n, dim))

    return sample


@dataclass(frozen=True)
class SyntheticSpec:
    """A source/target pair of regression truths with Gaussian label noise.

    ``holder_constant`` and ``holder_exponent`` document the smoothness class
    the truths are taken to lie in; they are metadata only. If ``y_bound`` is
    set, generated labels are clipped to +-y_bound; otherwise labels are left
    as drawn and the dataset's bound is computed from the sample.
    """

    source_fn: TruthFn
    target_fn: TruthFn
    input_sampler: InputSampler = field(default_factory=lambda: uniform_sampler(1))
    noise_variance_source: float = 0.0
    noise_variance_target: float = 0.0
    holder_constant: float = 1.0
    holder_exponent: float = 1.0
    y_bound: float | None = None

    def __post_init__(self):
        if self.noise_variance_source < 0 or self.noise_variance_target < 0:
            raise ValueError("noise variances must be nonnegative")
        if not 0 < self.holder_exponent <= 1:
            raise ValueError("holder_exponent must lie in (0, 1]")

    def truth(self, tag: DomainTag) -> TruthFn:
        return self.source_fn if tag is DomainTag.SOURCE else self.target_fn

    def noise_variance(self, tag: DomainTag) -> float:
        if tag is DomainTag.SOURCE:
            return self.noise_variance_source
        return self.noise_variance_target


def doppler(x):
    """The Doppler benchmark curve sqrt(x(1-x)) * sin(2.1*pi / (x + 0.05)).

    Defined on [0, 1]; rough near 0, where the oscillation period shrinks
    like (x + 0.05)^2. Accepts scalars or arrays.
    """
    x = np.asarray(x, dtype=float)
    if np.any(x < 0) or np.any(x > 1):
        raise ValueError("doppler is defined on [0, 1]")
    out = np.sqrt(x * (1.0 - x)) * np.sin(2.1 * np.pi / (x + 0.05))
    return float(out) if out.ndim == 0 else out


def doppler_fn(X: np.ndarray) -> np.ndarray:
    """Doppler as a truth function of a 1-d feature matrix."""
    return doppler(np.asarray(X)[:, 0])


def doppler_offset_spec(noise_variance: float = 0.01, slope: float = 1.0) -> SyntheticSpec:
    """Doppler source with target = source + slope * x (offset benchmark)."""
    return SyntheticSpec(
        source_fn=doppler_fn,
        target_fn=lambda X: doppler_fn(X) + slope * np.asarray(X)[:, 0],
        input_sampler=uniform_sampler(1),
        noise_variance_source=noise_variance,
        noise_variance_target=noise_variance,
    )


def doppler_scale_spec(noise_variance: float = 0.01, factor: float = 5.0) -> SyntheticSpec:
    """Doppler source with target = factor * source (scale benchmark)."""
    return SyntheticSpec(
        source_fn=doppler_fn,
        target_fn=lambda X: factor * doppler_fn(X),
        input_sampler=uniform_sampler(1),
        noise_variance_source=noise_variance,
        noise_variance_target=noise_variance,
    )


def kin_analog_spec(
    noise_variance_source: float = 0.001, noise_variance_target: float = 0.01
) -> SyntheticSpec:
    """An 8-dimensional stand-in for the robot-arm transfer benchmarks:
    a smooth, low-noise source and a rougher, noisier target offset from it."""
    w = np.array([0.35, -0.2, 0.15, 0.1, -0.25, 0.2, 0.05, -0.1])

    def f_so(X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        return X @ w + 0.25 * np.sin(2.0 * np.pi * X[:, 0])

    def f_ta(X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        return f_so(X) + 0.5 * np.sin(4.0 * np.pi * X[:, 1]) * X[:, 2]

    return SyntheticSpec(
        source_fn=f_so,
        target_fn=f_ta,
        input_sampler=uniform_sampler(8),
        noise_variance_source=noise_variance_source,
        noise_variance_target=noise_variance_target,
    )


def generate_synthetic(
    spec: SyntheticSpec, n: int, domain_tag: DomainTag, seed: int
) -> Dataset:
    """Draw n i.i.d. inputs and noisy labels for the tagged domain.

    Validation data is drawn from the target domain's law. Identical seeds
    give bit-identical datasets.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    rng = np.random.default_rng(seed)
    X = spec.input_sampler(rng, n)
    truth = spec.truth(domain_tag)
    sigma2 = spec.noise_variance(domain_tag)
    labels = np.asarray(truth(X), dtype=float).ravel()
    if sigma2 > 0:
        labels = labels + rng.normal(0.0, math.sqrt(sigma2), size=n)
    if spec.y_bound is not None:
        labels = np.clip(labels, -spec.y_bound, spec.y_bound)
        y_bound = spec.y_bound
    else:
        y_bound = float(np.abs(labels).max())
    return Dataset(
        features=X,
        labels=labels,
        domain_tag=domain_tag,
        x_bound=float(np.linalg.norm(X, axis=1).max()),
        y_bound=y_bound,
    )


def load_csv(path, label_column) -> Dataset:
    """Load a numeric CSV (one header line, comma-delimited) as a Dataset.

    ``label_column`` selects the label by header name or 0-based index; the
    remaining columns become features in file order. Bounds are computed
    from the data. Raises FileNotFoundError for a missing file and CsvError
    (naming the offending row/column) for structural problems.
    """
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"no such CSV file: {path}")
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise CsvError(f"{path}: empty file, expected a header row")
        header = [h.strip() for h in header]
        if isinstance(label_column, int):
            if not 0 <= label_column < len(header):
                raise CsvError(
                    f"{path}: label column index {label_column} out of range "
                    f"for {len(header)} columns"
                )
            label_idx = label_column
        else:
            if label_column not in header:
                raise CsvError(
                    f"{path}: label column {label_column!r} not in header {header}"
                )
            label_idx = header.index(label_column)
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise CsvError(
                    f"{path}: row at line {lineno} has {len(row)} cells, "
                    f"expected {len(header)}"
                )
            parsed = []
            for col, cell in enumerate(row):
                try:
                    value = float(cell)
                except ValueError:
                    raise CsvError(
                        f"{path}: non-numeric cell {cell!r} at line {lineno}, "
                        f"column {header[col]!r}"
                    ) from None
                if not math.isfinite(value):
                    raise CsvError(
                        f"{path}: non-finite value {cell!r} at line {lineno}, "
                        f"column {header[col]!r}"
                    )
                parsed.append(value)
            rows.append(parsed)
    if not rows:
        raise CsvError(f"{path}: no data rows")
    table = np.asarray(rows, dtype=float)
    labels = table[:, label_idx]
    features = np.delete(table, label_idx, axis=1)
    if features.shape[1] == 0:
        raise CsvError(f"{path}: no feature columns besides the label")
    return Dataset(
        features=features,
        labels=labels,
        domain_tag=DomainTag.TARGET,
        x_bound=float(np.linalg.norm(features, axis=1).max()),
        y_bound=float(np.abs(labels).max()),
    )


def save_csv(data: Dataset, path, label_name: str = "y") -> None:
    """Write a Dataset as a numeric CSV (features x0..x{d-1}, then the label)."""
    path = Path(path)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow([f"x{i}" for i in range(data.dim)] + [label_name])
        for row, label in zip(data.features, data.labels):
            writer.writerow([repr(float(v)) for v in row] + [repr(float(label))])


def split(
    data: Dataset, fractions: tuple[float, float], seed: int
) -> tuple[Dataset, Dataset, Dataset]:
    """Disjoint shuffled (train, validation, rest) partition of the rows.

    Part sizes are floor(f * n) for train and validation; the remainder makes
    the three parts sum to n. The validation part is tagged VALIDATION;
    train and rest keep the input's domain tag.
    """
    f_train, f_val = fractions
    if f_train < 0 or f_val < 0 or f_train + f_val > 1 + 1e-12:
        raise ValueError("fractions must be nonnegative and sum to at most 1")
    n = data.n
    # tiny epsilon guards float representation of f*n (e.g. 0.7*10 = 6.999...)
    n_train = math.floor(f_train * n + 1e-9)
    n_val = math.floor(f_val * n + 1e-9)
    if n_train < 1:
        raise ValueError(
            f"training part would be empty: floor({f_train} * {n}) = {n_train}"
        )
    rng = np.random.default_rng(seed)
    perm = rng.permutation(n)
    idx_train = perm[:n_train]
    idx_val = perm[n_train : n_train + n_val]
    idx_rest = perm[n_train + n_val :]

    def take(idx: np.ndarray, tag: DomainTag) -> Dataset | None:
        if len(idx) == 0:
            return None
        return Dataset(
            features=data.features[idx],
            labels=data.labels[idx],
            domain_tag=tag,
            x_bound=data.x_bound,
            y_bound=data.y_bound,
        )

    return (
        take(idx_train, data.domain_tag),
        take(idx_val, DomainTag.VALIDATION),
        take(idx_rest, data.domain_tag),
    )


def subsample(data: Dataset, n: int, seed: int) -> Dataset:
    """A uniform random subset of n rows, without replacement."""
    if not 1 <= n <= data.n:
        raise ValueError(f"cannot take {n} rows from {data.n}")
    rng = np.random.default_rng(seed)
    idx = rng.choice(data.n, size=n, replace=False)
    return Dataset(
        features=data.features[idx],
        labels=data.labels[idx],
        domain_tag=data.domain_tag,
        x_bound=data.x_bound,
        y_bound=data.y_bound,
    )
