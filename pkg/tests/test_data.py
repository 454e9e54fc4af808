import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pairmmd.data import (PairedDataset, QuantileFunction, from_arrays, midpoint_grid,
                          validate_dataset)
from pairmmd.errors import (DuplicateRecord, GridMismatch, HeterogeneousKinds,
                            InvalidQuantileFunction, PairMMDError)


def test_midpoint_grid():
    g = midpoint_grid(4)
    np.testing.assert_array_equal(g, [0.125, 0.375, 0.625, 0.875])
    with pytest.raises(InvalidQuantileFunction):
        midpoint_grid(1)


class TestQuantileFunction:
    def test_valid(self):
        q = QuantileFunction([0.25, 0.75], [1.0, 1.0])  # ties allowed
        assert len(q) == 2
        assert q == QuantileFunction([0.25, 0.75], [1.0, 1.0])

    @pytest.mark.parametrize("grid, values", [
        ([0.5], [1.0]),
        ([0.0, 0.5], [1.0, 2.0]),
        ([0.5, 1.0], [1.0, 2.0]),
        ([0.6, 0.4], [1.0, 2.0]),
        ([0.25, 0.75], [2.0, 1.0]),
        ([0.25, 0.75], [1.0]),
        ([0.25, 0.75], [1.0, np.nan]),
    ])
    def test_invalid(self, grid, values):
        with pytest.raises(InvalidQuantileFunction):
            QuantileFunction(grid, values)

    def test_immutable(self):
        q = QuantileFunction([0.25, 0.75], [0.0, 1.0])
        with pytest.raises(AttributeError):
            q.values = np.zeros(2)
        with pytest.raises(ValueError):
            q.values[0] = 5.0

    def test_shift(self):
        q = QuantileFunction([0.25, 0.75], [0.0, 1.0]).shift(2.0)
        np.testing.assert_array_equal(q.values, [2.0, 3.0])


def _records():
    return [("a", 1, 1.0), ("a", 2, 2.0), ("b", 1, 3.0), ("b", 2, 4.0),
            ("c", 2, 5.0), ("c", 1, 6.0), ("d", 1, 7.0), ("e", 2, 8.0)]


class TestValidate:
    def test_counts(self):
        ds = validate_dataset(_records())
        assert (ds.n1, ds.n2, ds.n3) == (3, 1, 1)
        assert ds.complete_ids == ("a", "b", "c")
        assert ds.first_ids == ("d",)
        assert ds.second_ids == ("e",)
        np.testing.assert_array_equal(ds.x1_complete[:, 0], [1.0, 3.0, 6.0])
        np.testing.assert_array_equal(ds.x2_complete[:, 0], [2.0, 4.0, 5.0])
        assert ds.kind == "scalar"

    def test_delta(self):
        d = validate_dataset(_records()).delta
        np.testing.assert_array_equal(d, [[0, 0, 0, 0, 1], [0, 0, 0, 1, 0]])

    def test_duplicate(self):
        with pytest.raises(DuplicateRecord):
            validate_dataset([("a", 1, 1.0), ("a", 1, 2.0)])

    def test_mixed_kinds(self):
        q = QuantileFunction([0.25, 0.75], [0.0, 1.0])
        with pytest.raises(HeterogeneousKinds):
            validate_dataset([("a", 1, 1.0), ("a", 2, q)])

    def test_grid_mismatch(self):
        q1 = QuantileFunction([0.25, 0.75], [0.0, 1.0])
        q2 = QuantileFunction([0.2, 0.8], [0.0, 1.0])
        with pytest.raises(GridMismatch):
            validate_dataset([("a", 1, q1), ("a", 2, q2)])

    def test_bad_timepoint(self):
        with pytest.raises(PairMMDError):
            validate_dataset([("a", 3, 1.0)])

    def test_empty(self):
        with pytest.raises(PairMMDError):
            validate_dataset([])

    def test_vector_dimension(self):
        with pytest.raises(HeterogeneousKinds):
            validate_dataset([("a", 1, [1.0, 2.0]), ("a", 2, [1.0, 2.0, 3.0])])

    def test_covariates(self):
        cov = {"a": [1.0], "b": [2.0], "c": [3.0], "d": [4.0]}
        ds = validate_dataset(_records(), covariates=cov, covariate_names=["age"])
        np.testing.assert_array_equal(ds.covariates[:, 0], [1, 2, 3, 4])
        assert ds.covariate_map()["d"][0] == 4.0
        del cov["d"]
        with pytest.raises(PairMMDError):
            validate_dataset(_records(), covariates=cov)

    def test_idempotent(self):
        ds = validate_dataset(_records())
        assert validate_dataset(ds.to_records()) == ds


@st.composite
def record_sets(draw):
    n = draw(st.integers(1, 12))
    recs = []
    for i in range(n):
        pattern = draw(st.sampled_from(["both", "first", "second"]))
        if pattern in ("both", "first"):
            recs.append((f"id{i}", 1, draw(st.floats(-1e3, 1e3))))
        if pattern in ("both", "second"):
            recs.append((f"id{i}", 2, draw(st.floats(-1e3, 1e3))))
    order = draw(st.permutations(range(len(recs))))
    return [recs[j] for j in order]


@settings(max_examples=60, deadline=None)
@given(record_sets())
def test_validate_properties(recs):
    ds = validate_dataset(recs)
    assert ds.n == len({r[0] for r in recs})
    again = validate_dataset(ds.to_records())
    assert again == ds
    assert validate_dataset(again.to_records()) == again


def test_from_arrays_quantile():
    g = midpoint_grid(3)
    x = np.array([[0.0, 1.0, 2.0], [1.0, 2.0, 3.0]])
    ds = from_arrays(x, x + 1, x[:1], None, grid=g)
    assert ds.kind == "quantile"
    assert (ds.n1, ds.n2, ds.n3) == (2, 1, 0)
    assert isinstance(ds.observation(ds.x1_complete[0]), QuantileFunction)
    assert ds.metric == "wasserstein2"
    assert isinstance(ds, PairedDataset)


def test_from_arrays_vector_and_covariates():
    ds = from_arrays(np.zeros((2, 2)), np.ones((2, 2)), kind="vector",
                     covariates=[[1.0], [2.0]], covariate_names=["z"])
    assert ds.kind == "vector" and ds.dim == 2
    assert ds.covariate_names == ("z",)
    assert ds.pooled().shape == (4, 2)
