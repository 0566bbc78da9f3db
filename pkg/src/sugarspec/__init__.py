"""Sugar-content regression from NIR spectra: preprocessing, PLS, GA selection, neural nets."""

from .dataset import SpectraDataset, SynthConfig, kfold_split, load_csv, profile, save_csv, synthesize
from .metrics import closeness, r_squared, rmse
from .preprocess import parse_strategy
from .validation import EvalReport, RunOptions, cross_validate

__version__ = "0.1.0"

__all__ = [
    "EvalReport", "RunOptions", "SpectraDataset", "SynthConfig", "closeness", "cross_validate",
    "kfold_split", "load_csv", "parse_strategy", "profile", "r_squared", "rmse", "save_csv",
    "synthesize",
]
