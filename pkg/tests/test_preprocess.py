from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays
from scipy.signal import savgol_filter

from oracles import exact_sg_centre_row
from sugarspec.preprocess import (GA, MSC, PCA, SG, SNV, WD, ChainError, Derivative, FitContext, PreprocessChain,
                                  PreprocessError, StrategyParseError, chain_fit_apply, derivative, fit_chain,
                                  haar_analysis, haar_levels, msc_apply, msc_fit, parse_strategy, pca_fit,
                                  sg_coefficients, sg_smooth, snv, wavelet_decompose)

rng = np.random.default_rng(20)


def test_sg_centre_coefficients_match_rational_solve():
    exact = exact_sg_centre_row(5, 2)
    assert exact == [Fraction(n, 35) for n in (-3, 12, 17, 12, -3)]
    got = sg_coefficients(5, 2)[2]
    assert np.allclose(got, [float(v) for v in exact], atol=1e-15)


def test_sg_impulse_response_centre():
    out = sg_smooth(np.array([0.0, 0.0, 1.0, 0.0, 0.0]))
    assert out[2] == pytest.approx(float(exact_sg_centre_row(5, 2)[2]), abs=1e-15)


def test_sg_matches_scipy_interp_mode():
    X = rng.normal(size=(4, 50))
    assert np.allclose(sg_smooth(X), savgol_filter(X, 5, 2, mode="interp", axis=1), atol=1e-12)
    assert np.allclose(sg_smooth(X, 7, 3), savgol_filter(X, 7, 3, mode="interp", axis=1), atol=1e-12)


@pytest.mark.parametrize("x", [np.full(8, 3.5), np.arange(6.0)])
def test_sg_keeps_constants_and_ramps(x):
    assert np.allclose(sg_smooth(x), x, atol=1e-12)


@given(st.lists(st.floats(-10, 10), min_size=3, max_size=3), st.integers(5, 60))
def test_sg_preserves_quadratics(coefs, n):
    t = np.linspace(-1, 1, n)
    x = coefs[0] + coefs[1] * t + coefs[2] * t**2
    assert np.allclose(sg_smooth(x), x, atol=1e-10)


def test_sg_keeps_length_and_rejects_bad_windows():
    assert sg_smooth(rng.normal(size=(2, 5))).shape == (2, 5)
    for window, order in ((4, 2), (7, 2), (5, 5)):
        with pytest.raises(PreprocessError):
            sg_smooth(rng.normal(size=(2, 6)), window, order)


def test_msc_reference_is_column_mean():
    assert np.array_equal(msc_fit(np.array([[0.0, 0.0], [2.0, 2.0]])), [1.0, 1.0])
    s = rng.normal(size=20)
    assert np.array_equal(msc_fit(np.vstack([s, s])), s)
    X = rng.normal(size=(10, 50))
    assert np.allclose(msc_fit(X), X.mean(axis=0), atol=1e-12)


def test_msc_removes_exact_affine_scatter():
    ref = rng.normal(size=40)
    assert np.allclose(msc_apply(ref, ref), ref, atol=1e-12)
    assert np.allclose(msc_apply(2 * ref + 3, ref), ref, atol=1e-12)


def test_msc_ols_residual_orthogonality():
    ref = rng.normal(size=60)
    x = rng.normal(size=60)
    out = msc_apply(x, ref)
    # out = (x - a) / b, so b * (out - ref) is the OLS residual of x on [1, ref]
    b = np.polyfit(ref, x, 1)[0]
    resid = b * (out - ref)
    assert abs(resid @ (ref - ref.mean())) < 1e-9
    assert abs(resid.sum()) < 1e-9


def test_msc_degenerate_inputs():
    with pytest.raises(PreprocessError):
        msc_apply(rng.normal(size=5), np.ones(5))
    with pytest.raises(PreprocessError):
        msc_apply(np.ones(5), np.arange(5.0))


def test_snv_hand_value_and_errors():
    v = np.sqrt(1.5)
    assert np.allclose(snv(np.array([1.0, 2.0, 3.0])), [-v, 0.0, v], atol=1e-15)
    with pytest.raises(PreprocessError):
        snv(np.array([5.0, 5.0, 5.0]))


@settings(deadline=None)
@given(arrays(float, (3, 12), elements=st.floats(-100, 100)))
def test_snv_standardises_and_is_idempotent(X):
    if np.any(X.std(axis=1) < 1e-3):
        return
    Z = snv(X)
    assert np.allclose(Z.mean(axis=1), 0, atol=1e-12)
    assert np.allclose(Z.std(axis=1), 1, atol=1e-12)
    assert np.allclose(snv(Z), Z, atol=1e-12)


def test_derivatives():
    assert np.allclose(derivative(np.full(6, 2.0), 1), 0)
    assert np.allclose(derivative(np.arange(6.0), 1), 1)
    assert np.allclose(derivative(np.arange(8.0) ** 2, 2)[1:-1], 2.0)
    with pytest.raises(PreprocessError):
        derivative(np.arange(6.0), 3)


def test_haar_one_stage():
    assert np.allclose(wavelet_decompose(np.ones(4), 2), [np.sqrt(2), np.sqrt(2)])


@pytest.mark.parametrize("target, levels", [(400, 2), (100, 4), (1600, 0), (800, 1)])
def test_haar_levels_for_1600(target, levels):
    assert haar_levels(1600, target) == levels
    assert wavelet_decompose(rng.normal(size=(2, 1600)), target).shape == (2, target)


@pytest.mark.parametrize("target", [300, 3200, 0])
def test_haar_levels_rejects_non_dyadic(target):
    with pytest.raises(PreprocessError):
        haar_levels(1600, target)


@given(arrays(float, 64, elements=st.floats(-1e3, 1e3)), st.integers(0, 6))
def test_haar_full_coefficients_preserve_energy(x, levels):
    approx, details = haar_analysis(x, levels)
    energy = approx @ approx + sum(d @ d for d in details)
    assert abs(energy - x @ x) <= 1e-10 * max(1.0, x @ x)


def test_pca_rank_one_and_full_rank():
    t = rng.normal(size=30)
    line = np.column_stack([t, 2 * t + 1])
    m = pca_fit(line, 1)
    assert np.allclose(m.reconstruct(m.apply(line)), line, atol=1e-10)
    X = rng.normal(size=(20, 10))
    m = pca_fit(X, 10)
    assert np.allclose(m.reconstruct(m.apply(X)), X, atol=1e-9)
    # sign convention: largest-magnitude loading is positive
    assert all(row[np.argmax(np.abs(row))] > 0 for row in m.components)
    with pytest.raises(PreprocessError):
        pca_fit(X, 20)


@pytest.mark.parametrize("text", ["Non>PLS", "SG>MSC>SNV>WD(400)>GA(100)>MLP-CNN", "D1>PCA(20)>SEGPLS(50)",
                                  "SG>SNV>D2>CNN-MLP", "MSC>WD(100)>CNN"])
def test_parse_render_roundtrip(text):
    assert parse_strategy(text).render() == text


def test_parse_structure():
    s = parse_strategy("Non>PLS")
    assert len(s.chain) == 0 and s.model.kind == "PLS"
    s = parse_strategy(" SG > MSC>SNV>WD(400)>GA(100)>MLP-CNN ")
    assert s.chain.steps == (SG(), MSC(), SNV(), WD(400), GA(100))
    assert s.model.kind == "MLP-CNN" and s.model.is_neural


@pytest.mark.parametrize("text, token", [("SG>", ""), ("SG>FOO>PLS", "FOO"), ("WD(abc)>PLS", "WD(abc)"),
                                         ("Non>SG>PLS", "Non"), ("PLS>PLS", "PLS"), ("GA(0)>PLS", "GA(0)")])
def test_parse_errors_point_at_the_token(text, token):
    with pytest.raises(StrategyParseError) as err:
        parse_strategy(text)
    assert err.value.token == token


def test_empty_chain_is_identity():
    X = rng.normal(size=(5, 8))
    _, a, b = chain_fit_apply(PreprocessChain(()), X, np.ones(5), X[:2])
    assert np.array_equal(a, X) and np.array_equal(b, X[:2])


def test_snv_chain_standardises_both_sets():
    X = rng.normal(size=(6, 20))
    _, a, b = chain_fit_apply(PreprocessChain((SNV(),)), X[:4], np.ones(4), X[4:])
    for M in (a, b):
        assert np.allclose(M.mean(axis=1), 0, atol=1e-12)
        assert np.allclose(M.std(axis=1), 1, atol=1e-12)


def test_full_chain_shape_and_determinism():
    from sugarspec.dataset import profile, synthesize

    d = synthesize(profile("scatter", seed=1))
    chain = PreprocessChain((SG(), MSC(), SNV(), WD(400)))
    f1, a, _ = chain_fit_apply(chain, d.X, d.sugar, d.X[:3])
    assert a.shape == (300, 400)
    assert np.array_equal(fit_chain(chain, d.X, d.sugar).apply(d.X), a)


def test_fit_uses_training_rows_only():
    X = rng.normal(size=(10, 16))
    f = fit_chain(PreprocessChain((MSC(),)), X[:6], np.ones(6))
    assert np.array_equal(f.fitted[0].reference, X[:6].mean(axis=0))


def test_chain_errors_carry_step_index():
    with pytest.raises(ChainError) as err:
        fit_chain(PreprocessChain((SNV(), WD(300))), rng.normal(size=(4, 1600)), np.ones(4))
    assert err.value.index == 1
    assert "WD(300)" in str(err.value)


def test_ga_step_selects_k_columns():
    X = rng.normal(size=(40, 30))
    y = X[:, :3].sum(axis=1)
    ctx = FitContext(seed=1, ga_options=dict(population=40, generations=2, inner_cv_folds=4, max_components=3))
    f, out, _ = chain_fit_apply(PreprocessChain((GA(5),)), X, y, X, ctx)
    assert out.shape == (40, 5)
    assert len(set(f.fitted[0].mask.tolist())) == 5
    with pytest.raises(ChainError):
        fit_chain(PreprocessChain((GA(31),)), X, y, ctx)


def test_derivative_and_pca_steps():
    X = rng.normal(size=(12, 16))
    _, a, b = chain_fit_apply(PreprocessChain((Derivative(1), PCA(3))), X[:8], np.ones(8), X[8:])
    assert a.shape == (8, 3) and b.shape == (4, 3)


def test_snvc_is_an_alias_of_snv():
    assert parse_strategy("SG>MSC>SNVC>WD(400)>GA(100)>MLP-CNN") == parse_strategy("SG>MSC>SNV>WD(400)>GA(100)>MLP-CNN")
    assert parse_strategy("SNVC>PLS").render() == "SNV>PLS"
