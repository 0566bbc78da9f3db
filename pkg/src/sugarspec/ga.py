"""Fixed-size feature-subset genetic algorithm scored by PLS RMSECV.

One generation:

1. score every individual by cross-validated PLS RMSECV (lower is better);
2. keep the best 20% plus a random 5% of the rest as parents (25% total);
3. pair the parents at random, each couple producing 8 children;
4. mutate a Normal(0.10, 0.01) fraction of the children;
5. the children become the next mature generation.

Every chromosome is a sorted array of exactly ``k_select`` column indices.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .dataset import kfold_split
from .pls import DEFAULT_MAX_COMPONENTS, argmin_first


class GaError(ValueError):
    pass


def _count(frac: float, population: int) -> int:
    return math.ceil(round(frac * population, 9))


@dataclass(frozen=True)
class GaConfig:
    k_select: int = 100
    population: int = 400
    elite_frac: float = 0.20
    lucky_frac: float = 0.05
    children_per_pair: int = 8
    mutation_frac_mean: float = 0.10
    mutation_frac_std: float = 0.01
    generations: int = 20
    inner_cv_folds: int = 10
    max_components: int = DEFAULT_MAX_COMPONENTS
    elitism: bool = True
    seed: int = 0

    def __post_init__(self):
        if self.k_select < 1:
            raise GaError("k_select must be >= 1")
        if self.generations < 1:
            raise GaError("generations must be >= 1")
        if self.mutation_frac_std < 0:
            raise GaError("mutation_frac_std must be >= 0")
        pool = self.n_elite + self.n_lucky
        if pool % 2:
            raise GaError(f"parent pool of {pool} cannot be paired")
        if pool // 2 * self.children_per_pair != self.population:
            raise GaError(
                f"{pool // 2} couples x {self.children_per_pair} children != population {self.population}"
            )

    @property
    def n_elite(self) -> int:
        return _count(self.elite_frac, self.population)

    @property
    def n_lucky(self) -> int:
        return _count(self.lucky_frac, self.population)

    @property
    def pool_size(self) -> int:
        return self.n_elite + self.n_lucky


@dataclass(frozen=True)
class GenerationRecord:
    generation: int
    best_rmsecv: float
    best_mask: tuple[int, ...]
    population_size: int
    n_elite: int
    n_lucky: int
    n_mutated: int
    n_evaluated: int


@dataclass(frozen=True)
class GaResult:
    best_mask: tuple[int, ...]
    best_rmsecv: float
    trace: tuple[float, ...]
    history: tuple[GenerationRecord, ...] = field(repr=False, default=())

    def to_json(self) -> list[dict]:
        return [
            {"generation": int(r.generation), "best_rmsecv": float(r.best_rmsecv),
             "best_mask": [int(i) for i in r.best_mask]}
            for r in self.history
        ]


def validate_individual(mask, k_select: int, n_features: int) -> None:
    m = np.asarray(mask)
    if m.size != k_select:
        raise GaError(f"individual has {m.size} genes, expected {k_select}")
    if np.any(m < 0) or np.any(m >= n_features):
        raise GaError("gene index out of range")
    if np.unique(m).size != m.size:
        raise GaError("duplicate gene")


# --------------------------------------------------------------------------
# Fitness
# --------------------------------------------------------------------------
class SubsetFitness:
    """Cached PLS RMSECV of column subsets over a fixed fold split.

    Training-fold Gram matrices over all columns are built once; each
    subset is then scored from the relevant sub-blocks. RMSECV is pooled
    over all validation rows and minimised over A = 1..max_components
    (same A for every fold; ties go to the smaller A).
    """

    def __init__(self, X, y, folds: int = 10, seed: int = 0,
                 max_components: int = DEFAULT_MAX_COMPONENTS):
        X = np.asarray(X, dtype=float)
        y = np.asarray(y, dtype=float).ravel()
        n, d = X.shape
        self.n_features = d
        self.split = kfold_split(n, folds, seed)
        k = len(self.split)
        self._G = np.empty((k, d, d))
        self._c = np.empty((k, d))
        xv, yv, offsets = [], [], [0]
        min_train = n
        for f, (train, val) in enumerate(self.split):
            xm = X[train].mean(axis=0)
            ym = y[train].mean()
            Xc = X[train] - xm
            self._G[f] = Xc.T @ Xc
            self._c[f] = Xc.T @ (y[train] - ym)
            xv.append(X[val] - xm)
            yv.append(y[val] - ym)
            offsets.append(offsets[-1] + val.size)
            min_train = min(min_train, train.size)
        self._Xv = np.ascontiguousarray(np.vstack(xv))
        self._yv = np.concatenate(yv)
        self._offsets = np.asarray(offsets, dtype=np.int64)
        self._n = n
        self._a_cap = max(1, min(max_components, min_train - 1))
        self.cache: dict[bytes, float] = {}
        self.evaluations = 0

    def curve(self, mask) -> np.ndarray:
        cols = np.ascontiguousarray(np.sort(np.asarray(mask, dtype=np.int64)))
        max_a = min(self._a_cap, cols.size)
        sse = _kernels.gram_pls_sse(self._G, self._c, self._Xv, self._yv, self._offsets,
                                    cols, max_a, _kernels.DEGENERATE_TOL)
        return np.sqrt(sse / self._n)

    def __call__(self, mask) -> float:
        key = np.sort(np.asarray(mask, dtype=np.int64)).tobytes()
        hit = self.cache.get(key)
        if hit is not None:
            return hit
        curve = self.curve(mask)
        value = float(curve[argmin_first(curve)])
        self.cache[key] = value
        self.evaluations += 1
        return value


def fitness(X, y, mask, folds: int = 10, seed: int = 0,
            max_components: int = DEFAULT_MAX_COMPONENTS) -> float:
    """RMSECV of plain PLS on the masked columns."""
    mask = np.asarray(mask, dtype=np.int64)
    X = np.asarray(X, dtype=float)
    validate_individual(mask, mask.size, X.shape[1])
    return SubsetFitness(X[:, np.sort(mask)], y, folds, seed, max_components)(np.arange(mask.size))


# --------------------------------------------------------------------------
# Operators
# --------------------------------------------------------------------------
def select_parents(population: np.ndarray, fitnesses, config: GaConfig, rng) -> tuple[np.ndarray, np.ndarray]:
    """Indices of (elite, lucky) parents; elite ties broken by population order."""
    if len(population) != config.population:
        raise GaError(f"population has {len(population)} individuals, expected {config.population}")
    order = np.argsort(np.asarray(fitnesses, dtype=float), kind="stable")
    elite = order[: config.n_elite]
    rest = order[config.n_elite:]
    lucky = np.sort(rng.choice(rest, size=config.n_lucky, replace=False))
    return elite, lucky


def crossover(parent_a, parent_b, k_select: int, rng, n_children: int = 8,
              n_features: int | None = None) -> np.ndarray:
    """Children keep the parents' shared genes and draw the rest from the non-shared ones."""
    a = np.asarray(parent_a)
    b = np.asarray(parent_b)
    shared = np.intersect1d(a, b)
    pool = np.setxor1d(a, b)
    need = k_select - shared.size
    children = np.empty((n_children, k_select), dtype=np.int64)
    for c in range(n_children):
        if need <= pool.size:
            fill = rng.choice(pool, size=need, replace=False)
        else:
            if n_features is None:
                raise GaError("parents too small to fill a child and n_features unknown")
            rest = np.setdiff1d(np.arange(n_features), np.union1d(a, b))
            fill = np.concatenate([pool, rng.choice(rest, size=need - pool.size, replace=False)])
        children[c] = np.sort(np.concatenate([shared, fill]))
    return children


def mutate_generation(children: np.ndarray, n_features: int, config: GaConfig, rng) -> tuple[np.ndarray, np.ndarray]:
    """Swap one selected gene for one unselected gene in a random share of children.

    Returns (mutated population, indices of the mutated individuals).
    """
    out = np.array(children, copy=True)
    P, k = out.shape
    if P != config.population:
        raise GaError(f"expected {config.population} children, got {P}")
    frac = min(1.0, max(0.0, rng.normal(config.mutation_frac_mean, config.mutation_frac_std)))
    n_mut = int(round(frac * P))
    who = np.sort(rng.choice(P, size=n_mut, replace=False))
    if k >= n_features:
        return out, who[:0]
    everything = np.arange(n_features)
    for i in who:
        row = out[i]
        pos = rng.integers(k)
        unselected = np.setdiff1d(everything, row, assume_unique=True)
        row[pos] = rng.choice(unselected)
        out[i] = np.sort(row)
    return out, who


def random_population(n_features: int, config: GaConfig, rng) -> np.ndarray:
    pop = np.empty((config.population, config.k_select), dtype=np.int64)
    for i in range(config.population):
        pop[i] = np.sort(rng.choice(n_features, size=config.k_select, replace=False))
    return pop


def reproduce(population, scores, n_features, config: GaConfig, rng):
    """One full reproduction step; returns (next population, record counts)."""
    elite, lucky = select_parents(population, scores, config, rng)
    pool = np.concatenate([elite, lucky])
    pairs = rng.permutation(pool).reshape(-1, 2)
    children = np.vstack([
        crossover(population[i], population[j], config.k_select, rng,
                  config.children_per_pair, n_features)
        for i, j in pairs
    ])
    children, mutated = mutate_generation(children, n_features, config, rng)
    if config.elitism:
        best = population[int(np.argmin(scores))]
        children[rng.integers(config.population)] = best
    return children, len(elite), len(lucky), len(mutated)


def ga_run(X, y, config: GaConfig, *, fitness_fn: SubsetFitness | None = None) -> GaResult:
    X = np.asarray(X, dtype=float)
    n_features = X.shape[1]
    if config.k_select > n_features:
        raise GaError(f"k_select={config.k_select} exceeds {n_features} features")
    rng = np.random.default_rng(config.seed)
    score = fitness_fn or SubsetFitness(X, y, config.inner_cv_folds, config.seed, config.max_components)
    population = random_population(n_features, config, rng)
    history = []
    best_mask, best_val = None, math.inf
    n_elite = n_lucky = n_mut = 0
    for g in range(config.generations):
        before = score.evaluations
        scores = np.array([score(ind) for ind in population])
        i_best = int(np.argmin(scores))
        if scores[i_best] < best_val:
            best_val = float(scores[i_best])
            best_mask = tuple(int(v) for v in population[i_best])
        history.append(GenerationRecord(
            g + 1, float(scores[i_best]), tuple(int(v) for v in population[i_best]),
            len(population), n_elite, n_lucky, n_mut, score.evaluations - before,
        ))
        if g + 1 < config.generations:
            population, n_elite, n_lucky, n_mut = reproduce(population, scores, n_features, config, rng)
    return GaResult(best_mask, best_val, tuple(r.best_rmsecv for r in history), tuple(history))
