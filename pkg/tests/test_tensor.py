import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nilgeom.connection import christoffel
from nilgeom.manifold import adapted_f, adapted_f_array, compatible_metric_basis
from nilgeom.sampling import Sampling
from nilgeom.tensor import (
    DOWN,
    UP,
    SingularMetricError,
    TensorField,
    TensorValue,
    apply_f_to_slot,
    contract,
    inverse_metric,
    is_hybrid,
    is_pure,
    lower_index,
    lower_value,
    raise_index,
    raise_value,
    symmetry_residual,
    tensor_product,
    tilde_metric,
)

from oracles import pure_residual_rank2_lower

C2 = ("z1", "z2")
C4 = ("z1", "z2", "z3", "z4")
F1 = adapted_f_array(1)


def metric(rows, coords=C2):
    return TensorField.from_strings(rows, coords, "ll")


def test_evaluate_field_examples():
    assert np.all(TensorField.zeros(C2, "ll").at([0.3, 0.4]).array == 0)
    assert np.array_equal(metric([["0", "1"], ["1", "0"]]).at([5, 6]).array, [[0, 1], [1, 0]])
    assert np.array_equal(metric([["z1", "1"], ["1", "0"]]).at([3, 0]).array, [[3, 1], [1, 0]])


def test_contract_examples():
    for d in (2, 3, 5):
        assert contract(TensorValue((UP, DOWN), np.eye(d)), 0, 1).array == d
    ff = contract(tensor_product(TensorValue((UP, DOWN), F1), TensorValue((UP, DOWN), F1)), 2, 1)
    assert np.all(ff.array == 0)
    g = np.array([[0.0, 1.0], [1.0, 0.0]])
    gi = TensorValue((UP, UP), np.linalg.inv(g))
    prod = contract(tensor_product(gi, TensorValue((DOWN, DOWN), g)), 1, 2)
    assert np.allclose(prod.array, np.eye(2))
    with pytest.raises(ValueError):
        contract(TensorValue((DOWN, DOWN), g), 0, 1)


def test_apply_f_examples():
    g = TensorValue((DOWN, DOWN), np.array([[0.0, 1.0], [1.0, 0.0]]))
    assert np.array_equal(apply_f_to_slot(g, F1, 0).array, [[1, 0], [0, 0]])
    assert np.all(apply_f_to_slot(g, np.zeros((2, 2)), 0).array == 0)
    twice = apply_f_to_slot(apply_f_to_slot(g, F1, 1), F1, 1)
    assert np.all(twice.array == 0)
    with pytest.raises(ValueError):
        apply_f_to_slot(g, np.zeros((3, 3)), 0)


def test_upper_slot_contracts_lower_index_of_f():
    v = TensorValue((UP,), np.array([1.0, 0.0]))
    assert np.array_equal(apply_f_to_slot(v, F1, 0).array, [0.0, 1.0])


def test_purity_examples():
    f = adapted_f(1, 0, C2)
    pair = metric([["0", "1"], ["1", "0"]])
    assert is_pure(pair, 0, 1, f).max_residual == 0.0
    ident = metric([["1", "0"], ["0", "1"]])
    rep = is_pure(ident, 0, 1, f)
    assert not rep.passed and rep.max_residual == 1.0
    zero = TensorField.zeros(C2, "ull")
    for a, b in [(0, 1), (0, 2), (1, 2)]:
        assert is_pure(zero, a, b, f).passed and is_hybrid(zero, a, b, f).passed


def test_pair_metric_is_not_hybrid():
    # both slot applications give [[1, 0], [0, 0]]; their sum has max entry 2
    f = adapted_f(1, 0, C2)
    g = metric([["0", "1"], ["1", "0"]])
    rep = is_hybrid(g, 0, 1, f)
    A = np.array([[1.0, 0.0], [0.0, 0.0]])
    assert not rep.passed
    assert rep.max_residual == np.max(np.abs(A + A)) == 2.0


def test_dim4_hybrid_metric_from_constraint_solve():
    F = adapted_f_array(2)
    basis = compatible_metric_basis(F, "hybrid")
    g = sum(basis)
    # brute-force check of the antisymmetry of g(f., .) over all basis vectors
    gt = np.array([[sum(g[l, b] * F[l, a] for l in range(4)) for b in range(4)] for a in range(4)])
    assert np.max(np.abs(gt + gt.T)) == 0.0
    T = TensorField.constant(g, C4, "ll")
    assert is_hybrid(T, 0, 1, adapted_f(2, 0, C4)).max_residual <= 1e-12


def test_purity_is_symmetric_in_slots():
    f = adapted_f(1, 0, C2)
    T = TensorField.from_strings([[["z1", "z2"], ["1", "z1*z2"]], [["0", "z2^2"], ["3", "z1"]]], C2, "ull")
    for a, b in [(0, 1), (0, 2), (1, 2)]:
        assert is_pure(T, a, b, f).max_residual == is_pure(T, b, a, f).max_residual


def test_lower_then_raise_roundtrip():
    g = metric([["z1^2+1", "1"], ["1", "0"]])
    gi = inverse_metric(g)
    V = TensorField.from_strings([["z1", "z2"], ["sin(z1)", "1"]], C2, "ul")
    back = raise_index(lower_index(V, g, 0), gi, 0)
    pts = Sampling().draw(2)
    assert np.max(np.abs(back.values(pts) - V.values(pts))) <= 1e-10
    ident = metric([["1", "0"], ["0", "1"]])
    assert np.array_equal(lower_index(V, ident, 0).values(pts), V.values(pts))


def test_numeric_lower_matches_loops():
    rng = np.random.default_rng(3)
    R = TensorValue((UP, DOWN, DOWN, DOWN), rng.normal(size=(4,) * 4))
    g = rng.normal(size=(4, 4))
    g = g + g.T
    low = lower_value(R, g, 0).array
    loops = np.zeros_like(low)
    for idx in np.ndindex(4, 4, 4, 4):
        loops[idx] = sum(g[idx[0], t] * R.array[(t,) + idx[1:]] for t in range(4))
    assert np.max(np.abs(low - loops)) <= 1e-12
    back = raise_value(TensorValue((DOWN,) * 4, low), np.linalg.inv(g), 0).array
    assert np.max(np.abs(back - R.array)) <= 1e-10


def test_singular_metric_is_reported_with_point():
    g = metric([["1", "0"], ["0", "0"]])
    with pytest.raises(SingularMetricError) as info:
        christoffel(g)
    assert info.value.point.shape == (2,)


@st.composite
def constant_metrics(draw, kind):
    F = adapted_f_array(2)
    basis = compatible_metric_basis(F, kind)
    coeffs = draw(st.lists(st.floats(-2, 2), min_size=len(basis), max_size=len(basis)))
    return sum(c * B for c, B in zip(coeffs, basis))


@settings(max_examples=30, deadline=None)
@given(constant_metrics("pure"))
def test_tilde_symmetric_iff_pure(g):
    f = adapted_f(2, 0, C4)
    T = TensorField.constant(g, C4, "ll")
    pts = Sampling(points=3).draw(4)
    assert is_pure(T, 0, 1, f).passed
    assert symmetry_residual(tilde_metric(T, f), 0, 1, pts) <= 1e-12
    assert pure_residual_rank2_lower(g, adapted_f_array(2)) <= 1e-12


@settings(max_examples=30, deadline=None)
@given(constant_metrics("hybrid"))
def test_tilde_antisymmetric_iff_hybrid(g):
    f = adapted_f(2, 0, C4)
    T = TensorField.constant(g, C4, "ll")
    pts = Sampling(points=3).draw(4)
    assert is_hybrid(T, 0, 1, f).passed
    assert symmetry_residual(tilde_metric(T, f), 0, 1, pts, antisymmetric=True) <= 1e-12


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(-2, 2), min_size=4, max_size=4))
def test_f_slot_bounded_by_pure_and_hybrid_residuals(vals):
    # A = ((A - B) + (A + B)) / 2, so pure and hybrid together force T(f., .) = 0
    arr = np.array(vals).reshape(2, 2)
    field = TensorField.constant(arr, C2, "ll")
    f = adapted_f(1, 0, C2)
    pure = is_pure(field, 0, 1, f).max_residual
    hyb = is_hybrid(field, 0, 1, f).max_residual
    A = apply_f_to_slot(TensorValue((DOWN, DOWN), arr), F1, 0).array
    assert np.max(np.abs(A)) <= (pure + hyb) / 2 + 1e-15
