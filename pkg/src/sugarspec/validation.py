"""Cross-validation of whole strategies (preprocessing chain + model)."""

from __future__ import annotations

import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from ._backend import thread_cap
from .dataset import FoldSplit, SpectraDataset, dataset_stats, kfold_split
from .metrics import MetricError, closeness, r_squared, rmse
from .nn.model import MODEL_KIND, ModelArch, NeuralRegressor, TrainConfig
from .pls import (DEFAULT_INNER_FOLDS, DEFAULT_MAX_COMPONENTS, fit_pls_auto, pls_predict,
                  segment_bounds, segmented_pls)
from .preprocess import FitContext, FittedGA, Strategy, chain_fit_apply, parse_strategy


class FoldError(RuntimeError):
    def __init__(self, fold: int, cause: Exception):
        self.fold = fold
        self.cause = cause
        super().__init__(f"fold {fold}: {cause}")


def derive_seed(seed: int, *keys: int) -> int:
    """Independent 32-bit seed for a (seed, key...) stream."""
    return int(np.random.SeedSequence([seed, *keys]).generate_state(1)[0])


@dataclass(frozen=True)
class RunOptions:
    max_components: int = DEFAULT_MAX_COMPONENTS
    inner_folds: int = DEFAULT_INNER_FOLDS
    n_components: int | None = None
    ga: dict = field(default_factory=dict)
    train: TrainConfig = field(default_factory=TrainConfig)
    arch: dict = field(default_factory=dict)
    threads: int | None = None

    def arch_for(self, model_kind: str) -> ModelArch:
        return ModelArch(kind=MODEL_KIND[model_kind], **self.arch)


@dataclass
class FoldResult:
    val_index: np.ndarray
    predictions: np.ndarray
    rmse: float
    r2: float
    ga_trace: list | None = None
    loss_trace: list | None = None


@dataclass
class EvalReport:
    strategy: str
    folds: int
    seed: int
    per_fold_rmse: list[float]
    per_fold_r2: list[float]
    rmsecv: float
    r2_mean: float
    std: float
    closeness_pct: float
    wall_time: float = 0.0
    ga_trace: list | None = None
    nn_loss_trace: list | None = None
    predictions: np.ndarray | None = field(default=None, repr=False)

    def to_json(self) -> dict:
        """Stable JSON form (wall time left out so reruns are byte-identical)."""
        out = {
            "strategy": self.strategy,
            "folds": self.folds,
            "seed": self.seed,
            "per_fold_rmse": [float(v) for v in self.per_fold_rmse],
            "rmsecv": float(self.rmsecv),
            "r2_mean": _json_float(self.r2_mean),
            "std": float(self.std),
            "closeness_pct": _json_float(self.closeness_pct),
        }
        if self.ga_trace is not None:
            out["ga_trace"] = self.ga_trace
        if self.nn_loss_trace is not None:
            out["nn_loss_trace"] = self.nn_loss_trace
        return out


def _json_float(v: float):
    return None if not np.isfinite(v) else float(v)


def cv_pls_rmsecv(X, y, folds: FoldSplit, *, seed: int = 0, max_A: int = DEFAULT_MAX_COMPONENTS,
                  k_inner: int = DEFAULT_INNER_FOLDS, n_components: int | None = None) -> float:
    """Pooled RMSECV of PLS whose component count is chosen inside each training fold."""
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    pred = np.empty_like(y)
    for f, (train, val) in enumerate(folds):
        model = fit_pls_auto(X[train], y[train], k_inner=k_inner, max_A=max_A,
                             seed=derive_seed(seed, f), n_components=n_components)
        pred[val] = pls_predict(model, X[val])
    return rmse(pred, y)


def _fit_predict(strategy: Strategy, Xt, yt, Xv, fseed: int, opts: RunOptions):
    """Returns (predictions on Xv, loss trace or None)."""
    model = strategy.model
    if model.kind == "PLS":
        pls = fit_pls_auto(Xt, yt, k_inner=opts.inner_folds, max_A=opts.max_components,
                           seed=fseed, n_components=opts.n_components)
        return pls_predict(pls, Xv), None
    if model.kind == "SEGPLS":
        best, _ = segmented_pls(Xt, yt, model.segment_len, opts.inner_folds, fseed,
                                max_A=opts.max_components, k_inner=opts.inner_folds)
        lo, hi = segment_bounds(Xt.shape[1], model.segment_len)[best]
        pls = fit_pls_auto(Xt[:, lo:hi], yt, k_inner=opts.inner_folds, max_A=opts.max_components,
                           seed=fseed, n_components=opts.n_components)
        return pls_predict(pls, Xv[:, lo:hi]), None
    cfg = TrainConfig(**{**opts.train.__dict__, "seed": fseed})
    reg = NeuralRegressor(opts.arch_for(model.kind), cfg).fit(Xt, yt)
    return reg.predict(Xv), [float(v) for v in reg.loss_trace]


def _run_fold(strategy, X, y, f, train, val, seed, opts) -> FoldResult:
    fseed = derive_seed(seed, f)
    try:
        ctx = FitContext(seed=fseed, ga_options=dict(opts.ga))
        fitted, Xt, Xv = chain_fit_apply(strategy.chain, X[train], y[train], X[val], ctx)
        pred, loss_trace = _fit_predict(strategy, Xt, y[train], Xv, fseed, opts)
    except Exception as exc:  # annotate with the fold, keep the original as cause
        raise FoldError(f, exc) from exc
    try:
        r2 = r_squared(pred, y[val])
    except MetricError:
        r2 = float("nan")
    ga_trace = None
    for step in fitted.fitted:
        if isinstance(step, FittedGA) and step.result is not None:
            ga_trace = step.result.to_json()
    return FoldResult(val, pred, rmse(pred, y[val]), r2, ga_trace, loss_trace)


def cross_validate(strategy, dataset: SpectraDataset, k: int = 10, seed: int = 0, *,
                   options: RunOptions | None = None, folds: FoldSplit | None = None) -> EvalReport:
    """k-fold CV: fit chain and model per training fold, pool validation residuals."""
    if isinstance(strategy, str):
        strategy = parse_strategy(strategy)
    opts = options or RunOptions()
    if folds is None:
        folds = kfold_split(dataset.n, k, seed)
    elif folds.n != dataset.n:
        raise ValueError("fold split does not match the dataset size")
    X, y = dataset.X, dataset.sugar
    t0 = time.perf_counter()
    jobs = [(f, tr, va) for f, (tr, va) in enumerate(folds)]
    workers = min(opts.threads or thread_cap(), len(jobs))
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(lambda j: _run_fold(strategy, X, y, *j, seed, opts), jobs))
    else:
        results = [_run_fold(strategy, X, y, *j, seed, opts) for j in jobs]
    pred = np.empty_like(y)
    for r in results:
        pred[r.val_index] = r.predictions
    rmsecv = rmse(pred, y)
    std = dataset_stats(dataset).std
    r2s = [r.r2 for r in results]
    finite = [v for v in r2s if np.isfinite(v)]
    ga = [{"fold": i, "generations": r.ga_trace} for i, r in enumerate(results) if r.ga_trace is not None]
    nn = [r.loss_trace for r in results if r.loss_trace is not None]
    return EvalReport(
        strategy=strategy.render(),
        folds=len(folds),
        seed=seed,
        per_fold_rmse=[r.rmse for r in results],
        per_fold_r2=r2s,
        rmsecv=rmsecv,
        r2_mean=float(np.mean(finite)) if finite else float("nan"),
        std=std,
        closeness_pct=closeness(rmsecv, std) if std > 0 else float("nan"),
        wall_time=time.perf_counter() - t0,
        ga_trace=ga or None,
        nn_loss_trace=nn or None,
        predictions=pred,
    )
