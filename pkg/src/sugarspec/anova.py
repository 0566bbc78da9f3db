"""Dataset reliability check by per-wavelength one-way ANOVA.

Samples are split into low / mid / high sugar groups. Every wavelength
point is a separate one-dimensional problem: points whose group variances
pass Levene's test (p > 0.05) are "valid", and a group pair's similarity is
the mean two-group ANOVA p-value over the valid points, as a percentage.
Similar groups give p-values near uniform (about 50%); well-separated
groups drive it towards 0.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from itertools import combinations

import numpy as np
from scipy import stats

from .dataset import SpectraDataset

SIGNIFICANCE = 0.05
GROUP_NAMES = ("low", "mid", "high")


class AnovaError(ValueError):
    pass


@dataclass(frozen=True)
class SugarGroups:
    t1: float
    t2: float
    low: np.ndarray
    mid: np.ndarray
    high: np.ndarray
    warnings: tuple[str, ...] = ()

    def named(self) -> dict[str, np.ndarray]:
        return {"low": self.low, "mid": self.mid, "high": self.high}

    @property
    def sizes(self) -> dict[str, int]:
        return {k: int(v.size) for k, v in self.named().items()}


def group_by_thresholds(dataset_or_sugar, t1: float, t2: float) -> SugarGroups:
    """low: sugar < t1, mid: t1 <= sugar < t2, high: sugar >= t2."""
    if not t1 < t2:
        raise AnovaError(f"need t1 < t2, got t1={t1}, t2={t2}")
    y = dataset_or_sugar.sugar if isinstance(dataset_or_sugar, SpectraDataset) else np.asarray(dataset_or_sugar)
    low = np.flatnonzero(y < t1)
    mid = np.flatnonzero((y >= t1) & (y < t2))
    high = np.flatnonzero(y >= t2)
    notes = tuple(f"{name} group is empty" for name, idx in zip(GROUP_NAMES, (low, mid, high)) if idx.size == 0)
    for msg in notes:
        warnings.warn(msg, stacklevel=2)
    return SugarGroups(t1, t2, low, mid, high, notes)


def tercile_thresholds(sugar) -> tuple[float, float]:
    t1, t2 = np.quantile(np.asarray(sugar, dtype=float), [1 / 3, 2 / 3])
    return float(t1), float(t2)


# --------------------------------------------------------------------------
# Vectorised per-dimension tests; each group is an (n_g, D) matrix
# --------------------------------------------------------------------------
def levene_p(groups) -> np.ndarray:
    """Median-centred Levene (Brown-Forsythe) p-value per column. NaN when degenerate."""
    groups = [np.atleast_2d(np.asarray(g, dtype=float)) for g in groups]
    k = len(groups)
    ns = np.array([g.shape[0] for g in groups], dtype=float)
    N = ns.sum()
    Z = [np.abs(g - np.median(g, axis=0)) for g in groups]
    zbar_g = np.stack([z.mean(axis=0) for z in Z])
    zbar = (ns[:, None] * zbar_g).sum(axis=0) / N
    between = (ns[:, None] * (zbar_g - zbar) ** 2).sum(axis=0)
    within = sum(((z - zg) ** 2).sum(axis=0) for z, zg in zip(Z, zbar_g))
    with np.errstate(divide="ignore", invalid="ignore"):
        W = (N - k) / (k - 1) * between / within
        p = stats.f.sf(W, k - 1, N - k)
    return np.where(within > 0, p, np.nan)


def bartlett_p(groups) -> np.ndarray:
    groups = [np.atleast_2d(np.asarray(g, dtype=float)) for g in groups]
    k = len(groups)
    ns = np.array([g.shape[0] for g in groups], dtype=float)
    N = ns.sum()
    v = np.stack([g.var(axis=0, ddof=1) for g in groups])
    with np.errstate(divide="ignore", invalid="ignore"):
        sp = ((ns[:, None] - 1) * v).sum(axis=0) / (N - k)
        num = (N - k) * np.log(sp) - ((ns[:, None] - 1) * np.log(v)).sum(axis=0)
        den = 1 + (np.sum(1 / (ns - 1)) - 1 / (N - k)) / (3 * (k - 1))
        p = stats.chi2.sf(num / den, k - 1)
    return np.where(np.all(v > 0, axis=0), p, np.nan)


def variance_homogeneity(groups, *, test: str = "levene", alpha: float = SIGNIFICANCE) -> np.ndarray:
    """Boolean mask of columns whose group variances pass the homogeneity test."""
    groups = [np.atleast_2d(np.asarray(g, dtype=float)) for g in groups]
    groups = [g for g in groups if g.shape[0] > 0]
    if len(groups) < 2 or any(g.shape[0] < 2 for g in groups):
        raise AnovaError("variance homogeneity needs >= 2 groups of >= 2 samples")
    p = levene_p(groups) if test == "levene" else bartlett_p(groups)
    return np.nan_to_num(p, nan=0.0) > alpha


def oneway_p(a, b) -> np.ndarray | float:
    """Two-group one-way ANOVA p-value, per column for matrices.

    Zero within-group spread: p = 1 for equal means, 0 otherwise.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    scalar = a.ndim == 1
    a2, b2 = (a[:, None], b[:, None]) if scalar else (a, b)
    na, nb = a2.shape[0], b2.shape[0]
    if na < 2 or nb < 2:
        raise AnovaError("oneway ANOVA needs >= 2 samples per group")
    ma, mb = a2.mean(axis=0), b2.mean(axis=0)
    grand = (na * ma + nb * mb) / (na + nb)
    ssb = na * (ma - grand) ** 2 + nb * (mb - grand) ** 2
    ssw = ((a2 - ma) ** 2).sum(axis=0) + ((b2 - mb) ** 2).sum(axis=0)
    df_w = na + nb - 2
    with np.errstate(divide="ignore", invalid="ignore"):
        F = ssb / (ssw / df_w)
        p = stats.f.sf(F, 1, df_w)
    scale = np.maximum(np.abs(ma), np.abs(mb)) + 1.0
    degenerate = ssw <= (1e-24 * scale**2) * (na + nb)
    p = np.where(degenerate, np.where(np.isclose(ma, mb, rtol=0, atol=1e-12 * scale), 1.0, 0.0), p)
    p = np.clip(p, 0.0, 1.0)
    return float(p[0]) if scalar else p


def _mean_p_over(valid, a, b) -> float:
    if not np.any(valid):
        return float("nan")
    return float(np.mean(oneway_p(a[:, valid], b[:, valid])))


@dataclass
class SimilarityReport:
    t1: float
    t2: float
    group_sizes: dict
    valid_dims: int
    n_dims: int
    between: dict
    within: dict
    repeats: int
    seed: int
    draw_size: int = 15
    n_subgroups: int = 10
    warnings: list = field(default_factory=list)

    def to_json(self) -> dict:
        def pct(v):
            return None if v is None or not np.isfinite(v) else float(v)

        return {
            "t1": self.t1,
            "t2": self.t2,
            "group_sizes": self.group_sizes,
            "valid_dims": self.valid_dims,
            "n_dims": self.n_dims,
            "between_pct": {k: pct(v) for k, v in self.between.items()},
            "within_pct": {k: pct(v) for k, v in self.within.items()},
            "repeats": self.repeats,
            "seed": self.seed,
            "draw_size": self.draw_size,
            "n_subgroups": self.n_subgroups,
            "warnings": list(self.warnings),
        }


def between_group_similarity(dataset: SpectraDataset, groups: SugarGroups, repeats: int = 30,
                             seed: int = 0, *, draw_size: int = 15, test: str = "levene",
                             valid_mode: str = "per_draw", notes: list | None = None) -> dict[str, float]:
    """Per group pair, mean ANOVA p (percent) on random equal-size draws."""
    notes = notes if notes is not None else []
    X = dataset.X
    named = {k: v for k, v in groups.named().items()}
    usable = {k: v for k, v in named.items() if v.size >= 2}
    for k, v in named.items():
        if v.size < 2:
            notes.append(f"{k} group has {v.size} samples; its pairs are skipped")
        elif v.size < draw_size:
            notes.append(f"{k} group has only {v.size} samples; all are used in each draw")
    out = {f"{a}-{b}": float("nan") for a, b in combinations(GROUP_NAMES, 2)}
    if len(usable) < 2:
        return out
    full_valid = None
    if valid_mode == "full":
        full_valid = variance_homogeneity([X[v] for v in usable.values()], test=test)
    sums = {key: [] for key in out}
    for r in range(repeats):
        rng = np.random.default_rng([seed, r])
        drawn = {k: X[np.sort(rng.choice(v, size=min(draw_size, v.size), replace=False))]
                 for k, v in usable.items()}
        valid = full_valid if full_valid is not None else variance_homogeneity(list(drawn.values()), test=test)
        for a, b in combinations(GROUP_NAMES, 2):
            if a in drawn and b in drawn:
                m = _mean_p_over(valid, drawn[a], drawn[b])
                if np.isfinite(m):
                    sums[f"{a}-{b}"].append(m)
    for key, vals in sums.items():
        if vals:
            out[key] = 100.0 * float(np.mean(vals))
    return out


def within_group_similarity(dataset: SpectraDataset, index, n_subgroups: int = 10, repeats: int = 30,
                            seed: int = 0, *, test: str = "levene", notes: list | None = None) -> float:
    """Mean ANOVA p (percent) over all pairs of random near-equal subgroups of one group."""
    notes = notes if notes is not None else []
    index = np.asarray(index, dtype=int)
    if index.size < 4:
        notes.append(f"group of {index.size} samples is too small for subgroup analysis")
        return float("nan")
    if index.size < 2 * n_subgroups:
        reduced = index.size // 2
        notes.append(f"group of {index.size} samples: subgroups reduced from {n_subgroups} to {reduced}")
        n_subgroups = reduced
    X = dataset.X
    vals = []
    for r in range(repeats):
        rng = np.random.default_rng([seed, r])
        parts = [X[np.sort(p)] for p in np.array_split(rng.permutation(index), n_subgroups)]
        valid = variance_homogeneity(parts, test=test)
        if not np.any(valid):
            continue
        pair_means = [np.mean(oneway_p(parts[i][:, valid], parts[j][:, valid]))
                      for i, j in combinations(range(n_subgroups), 2)]
        vals.append(float(np.mean(pair_means)))
    return 100.0 * float(np.mean(vals)) if vals else float("nan")


def similarity_report(dataset: SpectraDataset, t1: float, t2: float, *, repeats: int = 30, seed: int = 0,
                      draw_size: int = 15, n_subgroups: int = 10, test: str = "levene",
                      valid_mode: str = "per_draw") -> SimilarityReport:
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        groups = group_by_thresholds(dataset, t1, t2)
    notes = list(groups.warnings)
    usable = [dataset.X[v] for v in groups.named().values() if v.size >= 2]
    valid_dims = int(variance_homogeneity(usable, test=test).sum()) if len(usable) >= 2 else 0
    between = between_group_similarity(dataset, groups, repeats, seed, draw_size=draw_size,
                                       test=test, valid_mode=valid_mode, notes=notes)
    within = {}
    for name, idx in groups.named().items():
        within[name] = within_group_similarity(dataset, idx, n_subgroups, repeats, seed,
                                               test=test, notes=notes)
    return SimilarityReport(t1, t2, groups.sizes, valid_dims, dataset.dim, between, within,
                            repeats, seed, draw_size, n_subgroups, notes)
