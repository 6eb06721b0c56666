import numpy as np
import pytest
from hypothesis import given, strategies as st

from growthcast.errors import ContractError, DomainError
from growthcast.evaluation import box_stats, compare_models, mse_d
from growthcast.gibbs import SamplerConfig
from growthcast.synthetic import make_panel


def test_mse_examples():
    a = np.array([[1.0, 2.0], [3.0, 4.0]])
    assert mse_d(a, a) == 0
    assert mse_d(a, a + 3) == 9
    assert mse_d(np.array([[1.0, 2.0], [3.0, 4.0]]), np.zeros((2, 2))) == 7.5
    with pytest.raises(ContractError):
        mse_d(a, a[:, :1])


@given(st.integers(1, 5), st.integers(1, 6), st.floats(0.1, 10), st.integers(0, 1000))
def test_mse_properties(K, d, c, seed):
    rng = np.random.default_rng(seed)
    a, f = rng.normal(size=(K, d)), rng.normal(size=(K, d))
    base = mse_d(a, f)
    assert base >= 0
    assert mse_d(c * a, c * f) == pytest.approx(c * c * base, rel=1e-12)
    pk, pd = rng.permutation(K), rng.permutation(d)
    assert mse_d(a[pk][:, pd], f[pk][:, pd]) == pytest.approx(base, rel=1e-12)


def test_box_examples():
    b = box_stats(range(1, 10))
    assert (b.q1, b.median, b.q3) == (3, 5, 7)
    assert (b.whisker_low, b.whisker_high, b.outliers) == (1, 9, ())
    flat = box_stats([2.0] * 5)
    assert flat.q1 == flat.q3 == 2.0 and flat.outliers == ()
    out = box_stats(list(range(1, 21)) + [100])
    assert out.outliers == (100.0,)
    assert out.whisker_high == 20


@given(st.lists(st.floats(-1e4, 1e4), min_size=1, max_size=60))
def test_box_properties(x):
    b = box_stats(x)
    assert b.q1 <= b.median <= b.q3
    lo, hi = b.q1 - 1.5 * b.iqr, b.q3 + 1.5 * b.iqr
    assert b.whisker_low >= lo - 1e-9 and b.whisker_high <= hi + 1e-9
    assert all(v < lo or v > hi for v in b.outliers)
    inside = [v for v in x if lo <= v <= hi]
    assert sorted(inside + list(b.outliers)) == sorted(x)


@pytest.fixture(scope="module")
def tiny_panel():
    panel, _ = make_panel(2, N=3, T=30, p=2, alpha=(3000.0, 0.25, 15.0), sd=(200.0, 0.02, 2.0))
    return panel


def test_compare_models_cells_and_determinism(tiny_panel):
    cfg = SamplerConfig(sweeps=120, burn_in=60, chains=1)
    a = compare_models(tiny_panel, (2, 4), 2, 7, cfg)
    assert len(a.cells) + len(a.failures) == 2 * 2 * 3
    assert all(v >= 0 and np.isfinite(v) for v in a.cells.values())
    b = compare_models(tiny_panel, (2, 4), 2, 7, cfg)
    assert a.cells == b.cells


def test_compare_models_csv(tiny_panel, tmp_path):
    cfg = SamplerConfig(sweeps=60, burn_in=30, chains=1)
    rep = compare_models(tiny_panel, (2,), 1, 0, cfg, models=("M1", "M2"))
    rep.write_csv(tmp_path / "mse.csv", tmp_path / "box.csv")
    lines = (tmp_path / "mse.csv").read_text().splitlines()
    assert lines[0] == "model,d,replicate,mse" and len(lines) == 3
    assert (tmp_path / "box.csv").read_text().startswith("model,d,n,q1,median,q3")


def test_compare_models_validation(tiny_panel):
    with pytest.raises(DomainError):
        compare_models(tiny_panel, (30,), 1)
    with pytest.raises(ContractError):
        compare_models(tiny_panel.without_covariates(), (2,), 1)
