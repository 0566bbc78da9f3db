"""Spectral transforms and the ``A>B>C>MODEL`` strategy language.

All transforms act on row-stacked spectra (n, D). Steps that learn state
(MSC, PCA, GA) are fitted on training rows only and return a frozen fitted
step; stateless steps return themselves from ``fit``.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from typing import Protocol

import numpy as np


class PreprocessError(ValueError):
    pass


class StrategyParseError(PreprocessError):
    def __init__(self, message: str, token: str | None = None, position: int | None = None):
        self.token = token
        self.position = position
        if token is not None:
            message = f"{message} at token {position}: {token!r}"
        super().__init__(message)


def _as_matrix(X) -> tuple[np.ndarray, bool]:
    a = np.asarray(X, dtype=float)
    if a.ndim == 1:
        return a[None, :], True
    if a.ndim != 2:
        raise PreprocessError("expected a spectrum or a matrix of spectra")
    return a, False


def _restore(a: np.ndarray, was_vector: bool) -> np.ndarray:
    return a[0] if was_vector else a


# --------------------------------------------------------------------------
# Savitzky-Golay
# --------------------------------------------------------------------------
def sg_coefficients(window: int, polyorder: int) -> np.ndarray:
    """Least-squares fit matrix: row r gives the smoothed value at offset r.

    Row ``window // 2`` is the classic centre filter; the other rows are
    used at the two edges so every output point comes from a polynomial
    fit and the length is preserved.
    """
    half = window // 2
    offsets = np.arange(-half, half + 1, dtype=float)
    A = np.vander(offsets, polyorder + 1, increasing=True)
    # hat matrix A (A^T A)^-1 A^T, via least squares
    coef, *_ = np.linalg.lstsq(A, np.eye(window), rcond=None)
    return A @ coef


def sg_smooth(X, window: int = 5, polyorder: int = 2) -> np.ndarray:
    M, vec = _as_matrix(X)
    d = M.shape[1]
    if window % 2 == 0 or window < 1:
        raise PreprocessError(f"SG window must be odd, got {window}")
    if window > d:
        raise PreprocessError(f"SG window {window} exceeds spectrum length {d}")
    if polyorder >= window or polyorder < 0:
        raise PreprocessError(f"SG polyorder must be in [0, window), got {polyorder}")
    H = sg_coefficients(window, polyorder)
    half = window // 2
    out = np.empty_like(M)
    centre = H[half]
    # sliding windows for interior points
    win = np.lib.stride_tricks.sliding_window_view(M, window, axis=1)
    out[:, half:d - half] = win @ centre
    # edges: evaluate the fit of the first / last full window
    out[:, :half] = M[:, :window] @ H[:half].T
    out[:, d - half:] = M[:, d - window:] @ H[half + 1:].T
    return _restore(out, vec)


# --------------------------------------------------------------------------
# MSC / SNV / derivatives
# --------------------------------------------------------------------------
def msc_fit(X) -> np.ndarray:
    M = np.asarray(X, dtype=float)
    if M.ndim != 2 or M.shape[0] < 2:
        raise PreprocessError("MSC needs at least 2 training spectra")
    return M.mean(axis=0)


MSC_MIN_SLOPE = 1e-9


def msc_apply(X, reference) -> np.ndarray:
    """Regress each spectrum on ``reference`` (x = a + b*ref) and return (x - a)/b."""
    M, vec = _as_matrix(X)
    ref = np.asarray(reference, dtype=float)
    if ref.shape != (M.shape[1],):
        raise PreprocessError("spectrum and reference lengths differ")
    rc = ref - ref.mean()
    ss = float(rc @ rc)
    if ss <= 0.0:
        raise PreprocessError("MSC reference is constant")
    xm = M.mean(axis=1)
    b = ((M - xm[:, None]) @ rc) / ss
    if np.any(np.abs(b) <= MSC_MIN_SLOPE):
        raise PreprocessError("degenerate MSC slope (|b| <= 1e-9)")
    a = xm - b * ref.mean()
    return _restore((M - a[:, None]) / b[:, None], vec)


SNV_MIN_STD = 1e-12


def snv(X) -> np.ndarray:
    M, vec = _as_matrix(X)
    mu = M.mean(axis=1, keepdims=True)
    sd = M.std(axis=1, keepdims=True)
    if np.any(sd <= SNV_MIN_STD):
        raise PreprocessError("SNV of a constant spectrum")
    return _restore((M - mu) / sd, vec)


def derivative(X, order: int = 1) -> np.ndarray:
    """Central differences, second-order one-sided stencils at the ends."""
    if order not in (1, 2):
        raise PreprocessError("derivative order must be 1 or 2")
    M, vec = _as_matrix(X)
    d = M.shape[1]
    if d < order + 1:
        raise PreprocessError(f"need at least {order + 1} points for derivative order {order}")
    edge = 2 if d >= 3 else 1
    out = M
    for _ in range(order):
        out = np.gradient(out, axis=1, edge_order=edge)
    return _restore(out, vec)


# --------------------------------------------------------------------------
# Haar wavelet decomposition
# --------------------------------------------------------------------------
def haar_levels(dim: int, target_dim: int) -> int:
    if target_dim < 1 or dim % target_dim:
        raise PreprocessError(f"WD target {target_dim} does not divide dimension {dim}")
    ratio = dim // target_dim
    if ratio & (ratio - 1):
        raise PreprocessError(f"{dim}/{target_dim} = {ratio} is not a power of two")
    return ratio.bit_length() - 1


_SQRT2 = math.sqrt(2.0)


def haar_analysis(X, levels: int) -> tuple[np.ndarray, list[np.ndarray]]:
    """Orthonormal Haar: returns (approximation, [detail_1, ..., detail_levels])."""
    M, vec = _as_matrix(X)
    approx = M
    details = []
    for _ in range(levels):
        if approx.shape[1] % 2:
            raise PreprocessError("length not divisible by 2 at some Haar stage")
        even, odd = approx[:, 0::2], approx[:, 1::2]
        details.append(_restore((even - odd) / _SQRT2, vec))
        approx = (even + odd) / _SQRT2
    return _restore(approx, vec), details


def wavelet_decompose(X, target_dim: int) -> np.ndarray:
    M, vec = _as_matrix(X)
    levels = haar_levels(M.shape[1], target_dim)
    approx, _ = haar_analysis(M, levels)
    return _restore(approx, vec)


# --------------------------------------------------------------------------
# PCA
# --------------------------------------------------------------------------
@dataclass(frozen=True, eq=False)
class PcaModel:
    mean: np.ndarray
    components: np.ndarray  # (k, D), rows are loadings
    explained_variance: np.ndarray

    def apply(self, X) -> np.ndarray:
        M, vec = _as_matrix(X)
        return _restore((M - self.mean) @ self.components.T, vec)

    def reconstruct(self, scores) -> np.ndarray:
        return np.asarray(scores) @ self.components + self.mean


def pca_fit(X, k: int) -> PcaModel:
    M = np.asarray(X, dtype=float)
    n, d = M.shape
    if not 1 <= k <= min(n - 1, d):
        raise PreprocessError(f"PCA k={k} outside [1, {min(n - 1, d)}]")
    mean = M.mean(axis=0)
    _, s, vt = np.linalg.svd(M - mean, full_matrices=False)
    comps = vt[:k].copy()
    for row in comps:
        if row[np.argmax(np.abs(row))] < 0:
            row *= -1.0
    return PcaModel(mean, comps, s[:k] ** 2 / (n - 1))


def pca_apply(model: PcaModel, X) -> np.ndarray:
    return model.apply(X)


# --------------------------------------------------------------------------
# Chain steps
# --------------------------------------------------------------------------
@dataclass(frozen=True)
class FitContext:
    """What a fitting step may see besides training spectra."""

    seed: int = 0
    ga_options: dict = field(default_factory=dict)


class Fitted(Protocol):
    def apply(self, X: np.ndarray) -> np.ndarray: ...


@dataclass(frozen=True)
class SG:
    window: int = 5
    polyorder: int = 2

    def render(self) -> str:
        if (self.window, self.polyorder) != (5, 2):
            raise PreprocessError("only the default SG(5, 2) has a strategy spelling")
        return "SG"

    def fit(self, X, y, ctx):
        return self

    def apply(self, X):
        return sg_smooth(X, self.window, self.polyorder)


@dataclass(frozen=True)
class MSC:
    def render(self) -> str:
        return "MSC"

    def fit(self, X, y, ctx):
        return FittedMSC(msc_fit(X))


@dataclass(frozen=True, eq=False)
class FittedMSC:
    reference: np.ndarray

    def apply(self, X):
        return msc_apply(X, self.reference)


@dataclass(frozen=True)
class SNV:
    def render(self) -> str:
        return "SNV"

    def fit(self, X, y, ctx):
        return self

    def apply(self, X):
        return snv(X)


@dataclass(frozen=True)
class Derivative:
    order: int

    def render(self) -> str:
        return f"D{self.order}"

    def fit(self, X, y, ctx):
        return self

    def apply(self, X):
        return derivative(X, self.order)


@dataclass(frozen=True)
class PCA:
    k: int

    def render(self) -> str:
        return f"PCA({self.k})"

    def fit(self, X, y, ctx):
        return pca_fit(X, self.k)


@dataclass(frozen=True)
class WD:
    target_dim: int

    def render(self) -> str:
        return f"WD({self.target_dim})"

    def fit(self, X, y, ctx):
        haar_levels(np.shape(X)[1], self.target_dim)
        return self

    def apply(self, X):
        return wavelet_decompose(X, self.target_dim)


@dataclass(frozen=True)
class GA:
    k_select: int

    def render(self) -> str:
        return f"GA({self.k_select})"

    def fit(self, X, y, ctx):
        from .ga import GaConfig, ga_run

        d = np.shape(X)[1]
        if self.k_select > d:
            raise PreprocessError(f"GA({self.k_select}) exceeds the {d} available features")
        cfg = GaConfig(k_select=self.k_select, seed=ctx.seed, **ctx.ga_options)
        result = ga_run(np.asarray(X), np.asarray(y), cfg)
        return FittedGA(np.asarray(result.best_mask), result)


@dataclass(frozen=True, eq=False)
class FittedGA:
    mask: np.ndarray
    result: object = None

    def apply(self, X):
        M, vec = _as_matrix(X)
        return _restore(M[:, self.mask], vec)


Step = SG | MSC | SNV | Derivative | PCA | WD | GA

MODELS = ("PLS", "SEGPLS", "MLP", "CNN", "CNN-MLP", "MLP-CNN")


@dataclass(frozen=True)
class ModelSpec:
    kind: str
    segment_len: int | None = None

    def __post_init__(self):
        if self.kind not in MODELS:
            raise PreprocessError(f"unknown model {self.kind!r}")
        if (self.kind == "SEGPLS") != (self.segment_len is not None):
            raise PreprocessError("SEGPLS needs a segment length; other models take none")

    def render(self) -> str:
        return f"SEGPLS({self.segment_len})" if self.kind == "SEGPLS" else self.kind

    @property
    def is_neural(self) -> bool:
        return self.kind in ("MLP", "CNN", "CNN-MLP", "MLP-CNN")


@dataclass(frozen=True)
class PreprocessChain:
    steps: tuple = ()

    def render(self) -> str:
        return ">".join(s.render() for s in self.steps) if self.steps else "Non"

    def __len__(self) -> int:
        return len(self.steps)


@dataclass(frozen=True)
class Strategy:
    chain: PreprocessChain
    model: ModelSpec

    def render(self) -> str:
        return f"{self.chain.render()}>{self.model.render()}"

    def __str__(self) -> str:
        return self.render()


_ARG = re.compile(r"^([A-Z][A-Z0-9]*)\((\d+)\)$")


def _parse_int_arg(tok: str, name: str, pos: int) -> int:
    m = _ARG.match(tok)
    if not m or m.group(1) != name:
        raise StrategyParseError(f"malformed {name}(int)", tok, pos)
    value = int(m.group(2))
    if value < 1:
        raise StrategyParseError(f"{name} argument must be >= 1", tok, pos)
    return value


def _parse_step(tok: str, pos: int):
    # SNVC is an alternate spelling of SNV
    simple = {"SG": SG(), "MSC": MSC(), "SNV": SNV(), "SNVC": SNV(), "D1": Derivative(1), "D2": Derivative(2)}
    if tok in simple:
        return simple[tok]
    for name, cls in (("PCA", PCA), ("WD", WD), ("GA", GA)):
        if tok.startswith(name + "("):
            return cls(_parse_int_arg(tok, name, pos))
    raise StrategyParseError("unknown preprocessing step", tok, pos)


def _parse_model(tok: str, pos: int) -> ModelSpec:
    if tok in ("PLS", "MLP", "CNN", "CNN-MLP", "MLP-CNN"):
        return ModelSpec(tok)
    if tok.startswith("SEGPLS("):
        return ModelSpec("SEGPLS", _parse_int_arg(tok, "SEGPLS", pos))
    if tok == "":
        raise StrategyParseError("missing model terminal", tok, pos)
    raise StrategyParseError("unknown model", tok, pos)


def parse_strategy(text: str) -> Strategy:
    """Parse e.g. ``"SG>MSC>SNV>WD(400)>GA(100)>MLP-CNN"`` or ``"Non>PLS"``."""
    compact = re.sub(r"\s+", "", text)
    if not compact:
        raise StrategyParseError("empty strategy")
    tokens = compact.split(">")
    if len(tokens) < 2:
        raise StrategyParseError("strategy needs a chain (or 'Non') and a model", tokens[0], 0)
    *step_toks, model_tok = tokens
    model = _parse_model(model_tok, len(tokens) - 1)
    if step_toks == ["Non"]:
        return Strategy(PreprocessChain(()), model)
    steps = []
    for pos, tok in enumerate(step_toks):
        if tok == "Non":
            raise StrategyParseError("'Non' must stand alone", tok, pos)
        if tok in MODELS or tok.startswith("SEGPLS("):
            raise StrategyParseError("model token before the end of the strategy", tok, pos)
        steps.append(_parse_step(tok, pos))
    return Strategy(PreprocessChain(tuple(steps)), model)


def render_strategy(strategy: Strategy) -> str:
    return strategy.render()


# --------------------------------------------------------------------------
# Fitting chains
# --------------------------------------------------------------------------
class ChainError(PreprocessError):
    def __init__(self, index: int, step, cause: Exception):
        self.index = index
        self.cause = cause
        try:
            label = step.render()
        except PreprocessError:
            label = repr(step)
        super().__init__(f"step {index} ({label}): {cause}")


@dataclass(frozen=True)
class FittedChain:
    steps: tuple
    fitted: tuple

    def apply(self, X) -> np.ndarray:
        out = np.asarray(X, dtype=float)
        for i, (step, f) in enumerate(zip(self.steps, self.fitted)):
            try:
                out = f.apply(out)
            except PreprocessError as exc:
                raise ChainError(i, step, exc) from exc
        return out


def _fit(chain, X_train, y_train, ctx):
    ctx = ctx or FitContext()
    out = np.asarray(X_train, dtype=float)
    y = np.asarray(y_train, dtype=float)
    fitted = []
    for i, step in enumerate(chain.steps):
        try:
            f = step.fit(out, y, ctx)
            out = f.apply(out)
        except PreprocessError as exc:
            raise ChainError(i, step, exc) from exc
        fitted.append(f)
    return FittedChain(tuple(chain.steps), tuple(fitted)), out


def fit_chain(chain: PreprocessChain, X_train, y_train, ctx: FitContext | None = None) -> FittedChain:
    """Fit every step in order on the training rows only."""
    return _fit(chain, X_train, y_train, ctx)[0]


def chain_fit_apply(chain: PreprocessChain, X_train, y_train, X_apply, ctx: FitContext | None = None):
    """Returns (fitted chain, transformed train, transformed apply set)."""
    fitted, train_out = _fit(chain, X_train, y_train, ctx)
    return fitted, train_out, fitted.apply(X_apply)
