import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from avgbound.errors import DimensionError, PartitionError
from avgbound.seminorms import SeminormFamily, check_family, component_family, partition_family

finite = st.floats(min_value=-1e6, max_value=1e6, allow_nan=False)


def test_component_values():
    fam = component_family(3)
    assert fam.m == 3
    assert fam.labels == ("1", "2", "3")
    np.testing.assert_array_equal(fam.vec([3.0, -4.0, 0.0]), [3.0, 4.0, 0.0])
    np.testing.assert_array_equal(fam.mat([[1, -2], [3, -4]]), [[1, 2], [3, 4]])


def test_partition_values():
    fam = partition_family([(0, 1), (2,)])
    assert fam.labels == ("{1,2}", "{3}")
    np.testing.assert_allclose(fam.vec([3.0, 4.0, -1.0]), [5.0, 1.0])
    A = np.arange(9.0).reshape(3, 3)
    M = fam.mat(A)
    assert M.shape == (2, 2)
    assert M[1, 1] == pytest.approx(8.0)
    assert M[0, 0] == pytest.approx(np.sqrt(0 + 1 + 9 + 16))


def test_single_block_is_euclidean():
    fam = partition_family([(0, 1, 2)])
    X = np.array([1.0, 2.0, 2.0])
    assert fam.vec(X)[0] == pytest.approx(3.0)


def test_batched_shapes():
    fam = partition_family([(0,), (1, 2)])
    assert fam.vec(np.zeros((7, 3))).shape == (7, 2)
    assert fam.mat(np.zeros((7, 3, 3))).shape == (7, 2, 2)
    assert fam.tens(np.zeros((7, 3, 3, 3))).shape == (7, 2, 2, 2)


@pytest.mark.parametrize("d", [0, -1, 2.5])
def test_component_rejects_bad_dimension(d):
    with pytest.raises(DimensionError):
        component_family(d)


@pytest.mark.parametrize("blocks,d", [([(0,), (0, 1)], 2), ([(0,)], 2), ([(), (0, 1)], 2), ([], None)])
def test_partition_rejects_bad_blocks(blocks, d):
    with pytest.raises(PartitionError):
        partition_family(blocks, d)


@pytest.mark.parametrize("fam", [component_family(2), component_family(4), partition_family([(0, 2), (1,)]),
                                 partition_family([(0,), (1, 2, 3)])])
def test_builtin_families_pass_audit(fam):
    rep = check_family(fam, trials=2000, rng_seed=3)
    assert rep.passed, rep.violations[:3]


def test_audit_flags_nonhomogeneous_family():
    fam = SeminormFamily(d=2, labels=("x",), kind="bad", vec=lambda X: np.sum(np.asarray(X) ** 2, axis=-1)[..., None])
    rep = check_family(fam, trials=200)
    assert not rep.passed
    assert {v["axiom"] for v in rep.violations} >= {"homogeneity"}


def test_audit_flags_non_separating_family():
    fam = SeminormFamily(d=2, labels=("1",), kind="bad", vec=lambda X: np.abs(np.asarray(X)[..., :1]))
    rep = check_family(fam, trials=50)
    assert any(v["axiom"] == "separation" for v in rep.violations)


def test_audit_flags_inconsistent_matrix_seminorm():
    base = component_family(2)
    fam = SeminormFamily(d=2, labels=base.labels, kind="bad", vec=base.vec,
                         mat=lambda A: 0.1 * np.abs(np.asarray(A)))
    rep = check_family(fam, trials=200)
    assert any(v["axiom"] == "matrix_consistency" for v in rep.violations)


@settings(max_examples=200, deadline=None)
@given(arrays(float, 4, elements=finite), arrays(float, 4, elements=finite), finite)
def test_partition_axioms_property(X, Y, lam):
    fam = partition_family([(0, 3), (1,), (2,)])
    nX, nY = fam.vec(X), fam.vec(Y)
    assert np.all(nX >= 0)
    assert np.all(fam.vec(X + Y) <= nX + nY + 1e-9 * (1 + nX + nY))
    np.testing.assert_allclose(fam.vec(lam * X), abs(lam) * nX, rtol=1e-12, atol=1e-300)


@settings(max_examples=200, deadline=None)
@given(arrays(float, (3, 3), elements=finite), arrays(float, 3, elements=finite))
def test_partition_matrix_consistency_property(A, X):
    fam = partition_family([(0, 1), (2,)])
    lhs = fam.vec(A @ X)
    rhs = fam.mat(A) @ fam.vec(X)
    assert np.all(lhs <= rhs * (1 + 1e-12) + 1e-9)


@settings(max_examples=100, deadline=None)
@given(arrays(float, (2, 2, 2), elements=finite), arrays(float, 2, elements=finite),
       arrays(float, 2, elements=finite))
def test_component_bilinear_consistency_property(C, X, Y):
    fam = component_family(2)
    lhs = fam.vec(np.einsum("ijk,j,k->i", C, X, Y))
    rhs = np.einsum("ijk,j,k->i", fam.tens(C), fam.vec(X), fam.vec(Y))
    assert np.all(lhs <= rhs * (1 + 1e-12) + 1e-6)
