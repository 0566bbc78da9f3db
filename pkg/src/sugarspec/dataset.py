"""Labelled spectra: CSV I/O, synthetic generation, fold splitting, stats.

Spectra are addressed by wavelength-point index only. The synthetic
generator is an additive Beer-Lambert style model (absorbance linear in
concentration per Gaussian band) with per-sample multiplicative scatter,
additive offset and white noise. It stands in for measured fruit spectra,
which are not available.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator, NamedTuple, Sequence

import numpy as np


class DatasetError(ValueError):
    pass


class CsvFormatError(DatasetError):
    def __init__(self, message: str, row: int | None = None):
        self.row = row
        if row is not None:
            message = f"row {row}: {message}"
        super().__init__(message)


@dataclass(frozen=True)
class LabeledSample:
    id: str
    spectrum: np.ndarray
    sugar: float


@dataclass(frozen=True, eq=False)
class SpectraDataset:
    """n spectra of common length ``dim`` with positive sugar labels (°Brix)."""

    ids: tuple[str, ...]
    X: np.ndarray
    sugar: np.ndarray

    def __post_init__(self):
        X = np.array(self.X, dtype=float, copy=True)
        y = np.array(self.sugar, dtype=float, copy=True).ravel()
        ids = tuple(str(i) for i in self.ids)
        if X.ndim != 2:
            raise DatasetError("spectra must form a 2-D matrix")
        n, dim = X.shape
        if n < 1:
            raise DatasetError("dataset needs at least one sample")
        if dim < 1:
            raise DatasetError("spectra need at least one wavelength point")
        if y.size != n or len(ids) != n:
            raise DatasetError(f"{n} spectra but {y.size} labels and {len(ids)} ids")
        if not np.all(np.isfinite(X)):
            raise DatasetError("spectra contain non-finite values")
        if not np.all(np.isfinite(y)) or np.any(y <= 0):
            raise DatasetError("sugar values must be finite and > 0")
        for i in ids:
            if "," in i or "\n" in i:
                raise DatasetError(f"id {i!r} contains a comma or newline")
        X.setflags(write=False)
        y.setflags(write=False)
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "sugar", y)
        object.__setattr__(self, "ids", ids)

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def dim(self) -> int:
        return self.X.shape[1]

    def __len__(self) -> int:
        return self.n

    def __getitem__(self, i: int) -> LabeledSample:
        return LabeledSample(self.ids[i], self.X[i], float(self.sugar[i]))

    def __iter__(self) -> Iterator[LabeledSample]:
        for i in range(self.n):
            yield self[i]

    def subset(self, index) -> "SpectraDataset":
        index = np.asarray(index, dtype=int)
        return SpectraDataset(tuple(self.ids[i] for i in index), self.X[index], self.sugar[index])

    def equals(self, other: "SpectraDataset", atol: float = 0.0) -> bool:
        return (
            self.ids == other.ids
            and self.X.shape == other.X.shape
            and bool(np.allclose(self.X, other.X, rtol=0, atol=atol))
            and bool(np.allclose(self.sugar, other.sugar, rtol=0, atol=atol))
        )

    @classmethod
    def from_samples(cls, samples: Sequence[LabeledSample]) -> "SpectraDataset":
        if not samples:
            raise DatasetError("dataset needs at least one sample")
        return cls(
            tuple(s.id for s in samples),
            np.vstack([np.asarray(s.spectrum, dtype=float) for s in samples]),
            np.array([s.sugar for s in samples], dtype=float),
        )


# --------------------------------------------------------------------------
# CSV
# --------------------------------------------------------------------------
def load_csv(path) -> SpectraDataset:
    """Read ``id,w0,...,w{D-1},sugar`` rows; raises CsvFormatError on bad input."""
    text = Path(path).read_text(encoding="utf-8")
    if not text.strip():
        raise CsvFormatError("empty file")
    reader = csv.reader(io.StringIO(text))
    header = next(reader)
    if len(header) < 3 or header[0] != "id" or header[-1] != "sugar":
        raise CsvFormatError("header must be id,w0,...,w{D-1},sugar", row=1)
    ncol = len(header)
    ids, rows, sugars = [], [], []
    for lineno, row in enumerate(reader, start=2):
        if not row:
            continue
        if len(row) != ncol:
            raise CsvFormatError(f"expected {ncol} columns, found {len(row)}", row=lineno)
        try:
            values = np.array(row[1:], dtype=float)
        except ValueError:
            bad = next(c for c in row[1:] if not _is_float(c))
            raise CsvFormatError(f"non-numeric cell {bad!r}", row=lineno) from None
        ids.append(row[0])
        rows.append(values[:-1])
        sugars.append(values[-1])
    if not rows:
        raise CsvFormatError("no data rows")
    try:
        return SpectraDataset(tuple(ids), np.vstack(rows), np.array(sugars))
    except DatasetError as exc:
        raise CsvFormatError(str(exc)) from exc


def _is_float(s: str) -> bool:
    try:
        float(s)
    except ValueError:
        return False
    return True


def save_csv(dataset: SpectraDataset, path) -> None:
    if dataset.n < 1:
        raise DatasetError("refusing to write an empty dataset")
    lines = ["id," + ",".join(f"w{i}" for i in range(dataset.dim)) + ",sugar"]
    for sid, row, s in zip(dataset.ids, dataset.X, dataset.sugar):
        lines.append(sid + "," + ",".join(map(repr, row.tolist())) + "," + repr(float(s)))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8", newline="\n")


# --------------------------------------------------------------------------
# Synthetic spectra
# --------------------------------------------------------------------------
class Peak(NamedTuple):
    center: float
    width: float
    amplitude: float  # absorbance per °Brix


@dataclass(frozen=True)
class SynthConfig:
    n_samples: int = 300
    dim: int = 1600
    sugar_mean: float = 12.04
    sugar_std: float = 0.95
    peaks: tuple[Peak, ...] = field(default_factory=lambda: default_peaks(1600))
    baseline_amplitude: float = 0.5
    scatter_std: float = 0.0
    offset_std: float = 0.0
    noise_std: float = 0.0
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "peaks", tuple(Peak(*p) for p in self.peaks))
        self.validate()

    def validate(self) -> None:
        if self.n_samples < 1:
            raise DatasetError("n_samples must be >= 1")
        if self.dim < 1:
            raise DatasetError("dim must be >= 1")
        if not self.peaks:
            raise DatasetError("at least one peak is required")
        for name in ("sugar_std", "scatter_std", "offset_std", "noise_std"):
            if getattr(self, name) < 0:
                raise DatasetError(f"{name} must be >= 0")
        if self.sugar_mean <= 0:
            raise DatasetError("sugar_mean must be > 0")
        max_width = max(p.width for p in self.peaks)
        if max_width <= 0:
            raise DatasetError("peak widths must be > 0")
        if self.dim < 2 * max_width:
            raise DatasetError(f"dim {self.dim} < 2 x widest peak ({max_width})")


def default_peaks(dim: int) -> tuple[Peak, ...]:
    """Three sugar-linked absorption bands placed proportionally along the axis."""
    return (
        Peak(0.22 * dim, dim / 40, 0.012),
        Peak(0.48 * dim, dim / 25, 0.008),
        Peak(0.74 * dim, dim / 50, 0.010),
    )


def baseline_curve(dim: int, amplitude: float) -> np.ndarray:
    t = np.linspace(0.0, 1.0, dim) if dim > 1 else np.zeros(1)
    return amplitude * (1.0 + 0.6 * t - 0.4 * t**2 + 0.15 * np.sin(3.0 * np.pi * t))


def band_matrix(dim: int, peaks: Sequence[Peak]) -> np.ndarray:
    """Per-°Brix absorbance profile: sum of Gaussian bands."""
    lam = np.arange(dim, dtype=float)
    out = np.zeros(dim)
    for c, w, a in peaks:
        out += a * np.exp(-((lam - c) ** 2) / (2.0 * w * w))
    return out


SUGAR_FLOOR = 1e-3


def synthesize(config: SynthConfig) -> SpectraDataset:
    config.validate()
    rng = np.random.default_rng(config.seed)
    n, dim = config.n_samples, config.dim
    sugar = rng.normal(config.sugar_mean, config.sugar_std, n)
    sugar = np.maximum(sugar, SUGAR_FLOOR)
    m = rng.normal(1.0, config.scatter_std, n)
    b = rng.normal(0.0, config.offset_std, n)
    eps = rng.normal(0.0, config.noise_std, (n, dim))
    base = baseline_curve(dim, config.baseline_amplitude)
    bands = band_matrix(dim, config.peaks)
    X = m[:, None] * (base[None, :] + sugar[:, None] * bands[None, :]) + b[:, None] + eps
    ids = tuple(f"s{i:04d}" for i in range(n))
    return SpectraDataset(ids, X, sugar)


def profile(name: str, *, n_samples: int = 300, dim: int = 1600, seed: int = 0) -> SynthConfig:
    """Named synthetic presets.

    ``pear`` and ``navel`` match the label mean/STD of the two fruit sets;
    ``scatter`` adds strong multiplicative scatter and offsets on top of the
    pear labels, the regime where scatter correction should pay off.
    """
    peaks = default_peaks(dim)
    if name == "pear":
        return SynthConfig(n_samples, dim, 12.04, 0.95, peaks, 0.5, 0.03, 0.02, 0.04, seed)
    if name == "navel":
        return SynthConfig(n_samples, dim, 14.57, 1.64, peaks, 0.5, 0.03, 0.02, 0.04, seed)
    if name == "scatter":
        return SynthConfig(n_samples, dim, 12.04, 0.95, peaks, 0.5, 0.08, 0.05, 0.05, seed)
    if name == "clean":
        return SynthConfig(n_samples, dim, 12.04, 0.95, peaks, 0.5, 0.0, 0.0, 0.0, seed)
    raise DatasetError(f"unknown profile {name!r}; choose pear, navel, scatter or clean")


PROFILES = ("pear", "navel", "scatter", "clean")


# --------------------------------------------------------------------------
# Folds and stats
# --------------------------------------------------------------------------
@dataclass(frozen=True)
class FoldSplit:
    folds: tuple[tuple[np.ndarray, np.ndarray], ...]
    k: int
    seed: int

    def __iter__(self):
        return iter(self.folds)

    def __len__(self) -> int:
        return len(self.folds)

    @property
    def n(self) -> int:
        return sum(len(v) for _, v in self.folds)


def kfold_split(n: int, k: int, seed: int) -> FoldSplit:
    """Shuffle 0..n-1 with ``seed`` and deal round-robin into k folds."""
    if k < 2 or k > n:
        raise DatasetError(f"need 2 <= k <= n, got k={k}, n={n}")
    perm = np.random.default_rng(seed).permutation(n)
    folds = []
    all_idx = np.arange(n)
    for f in range(k):
        val = np.sort(perm[f::k])
        train = np.setdiff1d(all_idx, val, assume_unique=True)
        val.setflags(write=False)
        train.setflags(write=False)
        folds.append((train, val))
    return FoldSplit(tuple(folds), k, seed)


class DatasetStats(NamedTuple):
    mean: float
    std: float
    min: float
    max: float
    n_distinct: int


def dataset_stats(dataset: SpectraDataset, *, ddof: int = 0) -> DatasetStats:
    """Sugar summary; ``std`` is the population (1/n) form unless ``ddof=1``."""
    y = dataset.sugar
    std = float(np.std(y, ddof=ddof)) if y.size > ddof else 0.0
    return DatasetStats(float(y.mean()), std, float(y.min()), float(y.max()), int(np.unique(y).size))
