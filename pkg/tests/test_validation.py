import json

import numpy as np
import pytest

from sugarspec.dataset import kfold_split, profile, synthesize
from sugarspec.nn import TrainConfig
from sugarspec.validation import FoldError, RunOptions, cross_validate, derive_seed

SMALL_NN = RunOptions(train=TrainConfig(epochs=30, learning_rate=1e-3, optimizer="adam"),
                      arch=dict(mlp_widths=(8, 4), conv_channels=(2, 2, 2, 2)))
SMALL_GA = RunOptions(ga=dict(population=40, generations=2, inner_cv_folds=4, max_components=4), max_components=4)


@pytest.fixture(scope="module")
def scatter():
    return synthesize(profile("scatter", n_samples=60, dim=256, seed=2))


def test_noise_free_linear_data_is_recovered():
    d = synthesize(profile("clean", n_samples=60, dim=128, seed=1))
    r = cross_validate("Non>PLS", d, k=10, seed=0)
    assert r.rmsecv < 1e-6
    assert r.closeness_pct < 1e-4


def test_report_fields(scatter):
    r = cross_validate("SG>MSC>SNV>PLS", scatter, k=5, seed=1)
    assert r.strategy == "SG>MSC>SNV>PLS" and r.folds == 5 and r.seed == 1
    assert len(r.per_fold_rmse) == 5 and r.predictions.shape == (60,)
    assert r.rmsecv == pytest.approx(np.sqrt(np.mean((r.predictions - scatter.sugar) ** 2)))
    assert r.closeness_pct == pytest.approx(100 * r.rmsecv / r.std)
    assert r.std == pytest.approx(scatter.sugar.std())


def test_rerun_is_identical(scatter):
    a = cross_validate("SNV>WD(64)>PLS", scatter, 5, 3)
    b = cross_validate("SNV>WD(64)>PLS", scatter, 5, 3)
    assert json.dumps(a.to_json()) == json.dumps(b.to_json())


def test_given_split_is_used(scatter):
    split = kfold_split(60, 4, 9)
    r = cross_validate("Non>PLS", scatter, seed=0, folds=split)
    assert r.folds == 4
    with pytest.raises(ValueError):
        cross_validate("Non>PLS", scatter, folds=kfold_split(50, 5, 0))


def test_fold_errors_are_annotated(scatter):
    with pytest.raises(FoldError) as err:
        cross_validate("WD(100)>PLS", scatter, 5, 0)
    assert err.value.fold == 0
    assert "WD(100)" in str(err.value)


def test_threads_do_not_change_results(scatter):
    one = cross_validate("SG>SNV>PLS", scatter, 5, 4, options=RunOptions(threads=1))
    two = cross_validate("SG>SNV>PLS", scatter, 5, 4, options=RunOptions(threads=3))
    assert one.to_json() == two.to_json()


def test_segmented_pls_strategy(scatter):
    r = cross_validate("SNV>SEGPLS(64)", scatter, 5, 0, options=RunOptions(max_components=5))
    assert np.isfinite(r.rmsecv)


@pytest.mark.parametrize("model", ["MLP", "CNN", "MLP-CNN", "CNN-MLP"])
def test_neural_strategies_report_loss_traces(scatter, model):
    r = cross_validate(f"SNV>WD(64)>{model}", scatter, 3, 0, options=SMALL_NN)
    assert len(r.nn_loss_trace) == 3
    assert all(len(t) == 30 for t in r.nn_loss_trace)
    assert "nn_loss_trace" in r.to_json()


def test_ga_strategy_reports_ga_trace(scatter):
    r = cross_validate("SNV>WD(64)>GA(8)>PLS", scatter, 3, 0, options=SMALL_GA)
    assert [t["fold"] for t in r.ga_trace] == [0, 1, 2]
    assert all(len(t["generations"]) == 2 for t in r.ga_trace)
    json.dumps(r.to_json(), allow_nan=False)


def test_derive_seed_is_stable_and_distinct():
    assert derive_seed(1, 2) == derive_seed(1, 2)
    assert len({derive_seed(0, f) for f in range(10)}) == 10
