import datetime as dt

import numpy as np
import pytest
from hypothesis import given, strategies as st

from growthcast.data import (DataFormatError, PanelDataset, SplitSpec, load_covariates,
                             load_panel, load_trajectories, standardize, train_test_split,
                             write_long)
from growthcast.errors import ContractError, DomainError
from growthcast.model import CovariateTable, Trajectory


def _write(tmp_path, name, text):
    p = tmp_path / name
    p.write_text(text, encoding="utf-8")
    return p


def test_long_format(tmp_path):
    p = _write(tmp_path, "t.csv", "unit_id,date,cumulative_count\n"
               "a,2020-01-22,1\na,2020-01-23,2\na,2020-01-24,5\n"
               "b,2020-01-22,0\nb,2020-01-23,3\nb,2020-01-24,3\n")
    panel = PanelDataset(tuple(load_trajectories(p)))
    assert (panel.N, panel.T) == (2, 3)
    np.testing.assert_array_equal(panel.trajectory("a").counts, [1, 2, 5])


def test_jhu_wide_sums_provinces(tmp_path):
    p = _write(tmp_path, "w.csv", "Province/State,Country/Region,Lat,Long,1/22/20,1/23/20\n"
               "X,Ctry,0,0,1,2\nY,Ctry,0,0,3,4\n,Other,0,0,5,6\n")
    trajs = load_trajectories(p, "jhu_wide")
    assert [t.unit_id for t in trajs] == ["Ctry", "Other"]
    np.testing.assert_array_equal(trajs[0].counts, [4, 6])
    assert trajs[0].start_date == dt.date(2020, 1, 22)


def test_running_max(tmp_path):
    p = _write(tmp_path, "t.csv", "unit_id,date,cumulative_count\n"
               "a,2020-01-22,3\na,2020-01-23,2\na,2020-01-24,5\n")
    np.testing.assert_array_equal(load_trajectories(p, running_max=True)[0].counts, [3, 3, 5])
    np.testing.assert_array_equal(load_trajectories(p)[0].counts, [3, 2, 5])


@pytest.mark.parametrize("body, where", [
    ("a,2020-13-01,1\n", "row 2, column 2"),
    ("a,2020-01-22\n", "row 2"),
    ("a,2020-01-22,-4\n", "row 2, column 3"),
    ("a,2020-01-22,x\n", "row 2, column 3"),
])
def test_long_errors_name_location(tmp_path, body, where):
    p = _write(tmp_path, "t.csv", "unit_id,date,cumulative_count\n" + body)
    with pytest.raises(DataFormatError, match=where):
        load_trajectories(p)


def test_gap_in_dates(tmp_path):
    p = _write(tmp_path, "t.csv", "unit_id,date,cumulative_count\na,2020-01-22,1\na,2020-01-24,2\n")
    with pytest.raises(DataFormatError, match="consecutive"):
        load_trajectories(p)


def test_roundtrip_long(tmp_path):
    trajs = [Trajectory("a", dt.date(2020, 3, 1), np.array([0.0, 1.5, 1e6 / 3])),
             Trajectory("b", dt.date(2020, 3, 1), np.array([2.0, 2.0, 7.0]))]
    path = tmp_path / "r.csv"
    write_long(trajs, path)
    back = load_trajectories(path)
    for a, b in zip(trajs, back):
        assert a.unit_id == b.unit_id and a.start_date == b.start_date
        np.testing.assert_array_equal(a.counts, b.counts)


def test_covariates_missing_and_duplicates(tmp_path):
    p = _write(tmp_path, "c.csv", "unit_id,x,y\na,1,2\nb,,3\nc,5,4\n")
    tab = load_covariates(p)
    assert tab.names == ("x", "y") and np.isnan(tab.raw[1, 0])
    dup = _write(tmp_path, "d.csv", "unit_id,x\na,1\na,2\n")
    with pytest.raises(DataFormatError, match="duplicate"):
        load_covariates(dup)
    bad = _write(tmp_path, "e.csv", "unit_id,x\na,NA?\n")
    with pytest.raises(DataFormatError, match="non-numeric"):
        load_covariates(bad)


def test_standardize_example():
    tab = standardize(CovariateTable(("a", "b", "c"), ("x",), np.array([[1.0], [2.0], [3.0]])))
    np.testing.assert_allclose(tab.standardized[:, 0], np.array([-1, 0, 1]) / np.sqrt(2), rtol=1e-15)


def test_standardize_imputes_median():
    raw = np.array([[1.0], [np.nan], [4.0], [10.0]])
    tab = standardize(CovariateTable(("a", "b", "c", "d"), ("x",), raw))
    assert tab.imputed == (("b", "x", 4.0),)
    np.testing.assert_allclose(tab.standardized[:, 0] * tab.scale + tab.center, [1, 4, 4, 10])


def test_standardize_constant_column():
    with pytest.raises(DomainError, match="'k'"):
        standardize(CovariateTable(("a", "b"), ("k",), np.array([[2.0], [2.0]])))


@given(st.lists(st.lists(st.floats(-1e3, 1e3), min_size=3, max_size=3), min_size=3, max_size=12))
def test_standardize_properties(rows):
    raw = np.array(rows)
    if np.any(np.ptp(raw, axis=0) < 1e-3):
        return
    ids = tuple(f"u{i}" for i in range(raw.shape[0]))
    tab = standardize(CovariateTable(ids, ("a", "b", "c"), raw))
    z = tab.standardized
    assert np.all(np.abs(z.mean(axis=0)) < 1e-12)
    assert np.all(np.abs(np.linalg.norm(z, axis=0) - 1) < 1e-12)
    again = standardize(CovariateTable(ids, ("a", "b", "c"), z))
    np.testing.assert_allclose(again.standardized, z, atol=1e-12)


def test_split_examples():
    tr = Trajectory("a", dt.date(2020, 1, 1), np.arange(5.0))
    train, test = train_test_split(tr, SplitSpec(2))
    np.testing.assert_array_equal(train.counts, [0, 1, 2])
    np.testing.assert_array_equal(test.counts, [3, 4])
    assert test.start_date == dt.date(2020, 1, 4)
    assert train_test_split(tr, 4)[0].T == 1
    with pytest.raises(DomainError):
        train_test_split(tr, 5)
    with pytest.raises(DomainError):
        SplitSpec(0)


@given(st.integers(2, 40), st.data())
def test_split_concat_identity(T, data):
    d = data.draw(st.integers(1, T - 1))
    tr = Trajectory("a", dt.date(2020, 1, 1), np.arange(T, dtype=float))
    a, b = train_test_split(tr, d)
    np.testing.assert_array_equal(np.concatenate([a.counts, b.counts]), tr.counts)


def test_panel_contracts(tmp_path):
    a = Trajectory("a", dt.date(2020, 1, 1), np.zeros(3))
    b = Trajectory("b", dt.date(2020, 1, 1), np.zeros(4))
    with pytest.raises(ContractError):
        PanelDataset((a, b))
    c = Trajectory("c", dt.date(2020, 1, 1), np.zeros(3))
    tab = CovariateTable(("a", "x"), ("v",), np.array([[1.0], [2.0]]))
    with pytest.raises(ContractError):
        PanelDataset((a, c), tab)


def test_panel_reorders_covariates(tmp_path):
    tp = _write(tmp_path, "t.csv", "unit_id,date,cumulative_count\n"
                "a,2020-01-22,1\nb,2020-01-22,2\nc,2020-01-22,3\n")
    cp = _write(tmp_path, "c.csv", "unit_id,v\nc,30\na,10\nb,25\n")
    panel = load_panel(tp, covariates=cp)
    np.testing.assert_array_equal(panel.covariates.raw[:, 0], [10, 25, 30])
    assert panel.model_data().X.shape == (3, 1)
