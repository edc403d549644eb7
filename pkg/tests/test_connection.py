import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nilgeom.connection import (
    ConnectionField,
    christoffel,
    complete_lift,
    complete_lift_metric,
    conformal_purity_scan,
    connection_difference,
    connection_purity,
    covariant_derivative,
    deform,
    deformation_tensor,
    max_abs,
    metric_plus_tilde,
    metricity_residual,
    nabla_f_check,
    one_form,
    partials_purity,
)
from nilgeom.expr import Num, parse, to_text
from nilgeom.manifold import adapted_f, adapted_f_array
from nilgeom.sampling import Sampling
from nilgeom.tensor import SingularMetricError, TensorField, is_pure

from oracles import christoffel_fd, deformation_loops, lift_loops

C2 = ("z1", "z2")
C4 = ("z1", "z2", "z3", "z4")
F2 = adapted_f(1, 0, C2)
F4 = adapted_f(2, 0, C4)
CURVED_B = [["z1^2+1", "1"], ["1", "0"]]


def metric(rows, coords=C2):
    return TensorField.from_strings(rows, coords, "ll")


def test_christoffel_examples():
    assert all(to_text(e) == "0" for e in christoffel(metric([["0", "1"], ["1", "0"]])).components.flat)
    G = christoffel(metric(CURVED_B))
    nonzero = {idx: to_text(e) for idx, e in np.ndenumerate(G.components) if to_text(e) != "0"}
    assert set(nonzero) == {(1, 0, 0)}
    pts = Sampling().draw(2)
    assert np.allclose(G.values(pts)[:, 1, 0, 0], pts[:, 0], atol=1e-15)
    assert max_abs(christoffel(metric([["1", "0"], ["0", "1"]])).coefficients, pts) == 0.0


def test_christoffel_matches_fd_oracle():
    rows = [["2+sin(z1)*z2", "z1*z2"], ["z1*z2", "3+z2^2"]]
    g = metric(rows)
    G = christoffel(g)

    def g_num(x):
        return g.at(x).array

    for x in Sampling(points=5).draw(2):
        assert np.max(np.abs(G.at(x) - christoffel_fd(g_num, x))) <= 1e-7


def test_metricity():
    for rows in (CURVED_B, [["2+sin(z1)*z2", "z1*z2"], ["z1*z2", "3+z2^2"]]):
        g = metric(rows)
        assert metricity_residual(g, christoffel(g)).max_residual <= 1e-9


def test_connection_purity_examples():
    assert connection_purity(ConnectionField.zero(C2), F2).passed
    rep = connection_purity(christoffel(metric(CURVED_B)), F2)
    assert rep.passed and rep.max_residual <= 1e-12
    bumped = ConnectionField.from_components({(0, 0, 0): Num(1.0)}, C2)
    rep = connection_purity(bumped, F2)
    assert not rep.passed and rep.max_residual == 1.0
    assert [d["name"] for d in rep.details] == ["upper-vs-lower1", "upper-vs-lower2", "lower1-vs-lower2"]


def test_covariant_derivative_examples():
    scalar = TensorField(C2, (), np.array(Num(4.0), dtype=object).reshape(()))
    assert max_abs(covariant_derivative(scalar, christoffel(metric(CURVED_B))), Sampling().draw(2)) == 0.0
    G = christoffel(metric(CURVED_B))
    assert max_abs(covariant_derivative(F2, G), Sampling().draw(2)) <= 1e-12


def test_covariant_derivative_of_vector_matches_hand_formula():
    G = christoffel(metric(CURVED_B))
    V = TensorField.from_strings(["z2", "z1^2"], C2, "u")
    nabla = covariant_derivative(V, G)
    for x in Sampling(points=5).draw(2):
        dv = np.array([[0.0, 2 * x[0]], [1.0, 0.0]])  # dv[s, a] = ∂_s V^a
        Gx = G.at(x)
        want = dv + np.einsum("asl,l->sa", Gx, V.at(x).array)
        assert np.max(np.abs(nabla.at(x).array - want)) <= 1e-14


def test_nabla_f_check_examples():
    rep = nabla_f_check(christoffel(metric(CURVED_B)), F2)
    assert rep.passed and rep.max_residual <= 1e-12
    assert nabla_f_check(ConnectionField.zero(C2), F2).max_residual == 0.0
    f = TensorField.from_strings([["0", "0"], ["exp(z1)", "0"]], C2, "ul")
    rep = nabla_f_check(ConnectionField.zero(C2), f)
    by_name = {d["name"]: d for d in rep.details}
    assert by_name["partial_f"]["residual"] > 0 and by_name["nabla_f"]["residual"] > 0
    assert not by_name["partial_f"]["exactly_zero"]
    assert rep.passed


def test_complete_lift_examples():
    zero = complete_lift(ConnectionField.zero(("z1",)))
    assert all(to_text(e) == "0" for e in zero.components.flat)
    base = ConnectionField.from_components({(0, 0, 0): parse("z1", ["z1"])}, ("z1",))
    L = complete_lift(base)
    assert L.coords == C2
    text = {idx: to_text(e) for idx, e in np.ndenumerate(L.components) if to_text(e) != "0"}
    assert text == {(0, 0, 0): "z1", (1, 0, 0): "z2", (1, 0, 1): "z1", (1, 1, 0): "z1"}


def random_base_connection(n, seed, degree=2):
    rng = np.random.default_rng(seed)
    coords = tuple(f"z{k + 1}" for k in range(n))
    entries = {}
    for s in range(n):
        for a in range(n):
            for b in range(a, n):
                terms = [f"{rng.uniform(-1, 1):.4f}"]
                for c in coords:
                    for p in range(1, degree + 1):
                        terms.append(f"{rng.uniform(-1, 1):.4f}*{c}^{p}")
                entries[(s, a, b)] = parse(" + ".join(terms), coords)
    return ConnectionField.from_components(entries, coords)


@settings(max_examples=10, deadline=None)
@given(st.integers(1, 3), st.integers(0, 10_000))
def test_lift_is_pure_and_parallelizes_f(n, seed):
    L = complete_lift(random_base_connection(n, seed))
    f = adapted_f(n, 0, L.coords)
    assert connection_purity(L, f).max_residual <= 1e-12
    assert max_abs(covariant_derivative(f, L), Sampling().draw(2 * n)) <= 1e-12


def test_lift_matches_loop_oracle_and_block_identities():
    base = random_base_connection(2, 5)
    L = complete_lift(base)
    n = 2
    for x in Sampling(points=5).draw(4):
        want = lift_loops(lambda p: base.at(p), x[:2], x[2:])
        got = L.at(x)
        assert np.max(np.abs(got - want)) <= 1e-7
        assert np.array_equal(got[:n, :n, :n], got[n:, :n, n:])
        assert np.array_equal(got[:n, :n, :n], got[n:, n:, :n])


def test_lifted_metric_connection_is_lift_of_base():
    gB = metric([["1", "0"], ["0", "1+z1^2"]])
    gC = complete_lift_metric(gB)
    pts = Sampling().draw(4)
    assert connection_difference(christoffel(gC), complete_lift(christoffel(gB)), pts) <= 1e-12


def test_metric_plus_tilde_examples():
    g = metric([["0", "1"], ["1", "0"]])
    assert np.array_equal(metric_plus_tilde(g, F2).at([0, 0]).array, [[1, 1], [1, 0]])
    zero_f = TensorField.zeros(C2, "ul")
    assert np.array_equal(metric_plus_tilde(g, zero_f).at([0, 0]).array, g.at([0, 0]).array)
    curved = metric(CURVED_B)
    other = christoffel(metric_plus_tilde(curved, F2))
    assert connection_difference(christoffel(curved), other, Sampling().draw(2)) <= 1e-9


def test_metric_plus_tilde_singular():
    with pytest.raises(SingularMetricError):
        metric_plus_tilde(metric([["1", "0"], ["0", "-1"]]), TensorField.constant(-np.eye(2), C2, "ul"))


def test_conformal_scan_examples():
    g = metric(CURVED_B)
    assert conformal_purity_scan(g, Num(1.0), F2).max_residual == 0.0
    assert conformal_purity_scan(g, Num(7.5), F2).max_residual <= 1e-10
    rep = conformal_purity_scan(g, parse("exp(z1)", C2), F2)
    assert rep.max_residual >= 1e-3
    assert not rep.details[-1]["h_partials_vanish"]


def test_deformation_tensor_examples():
    q0 = one_form(["0", "0"], C2)
    assert all(to_text(e) == "0" for e in deformation_tensor(q0, F2).components.flat)
    q1, q2 = 2.0, 5.0
    T = deformation_tensor(one_form([str(q1), str(q2)], C2), F2).at([0, 0]).array
    want = deformation_loops(np.array([q1, q2]), adapted_f_array(1))
    assert np.array_equal(T, want)
    assert T[0, 0, 0] == 2 * q2 and T[1, 0, 0] == 2 * q1
    # the expansion gives f^2_1 q_2 + q~_1 = 2 q_2 in the mixed slot
    assert T[1, 0, 1] == T[1, 1, 0] == 2 * q2
    assert np.count_nonzero(T) == 4


@settings(max_examples=20, deadline=None)
@given(st.lists(st.floats(-3, 3), min_size=4, max_size=4))
def test_deformation_tensor_is_pure_and_symmetric(q):
    T = deformation_tensor(one_form([f"{q[0]}", f"{q[1]}*z1", f"{q[2]}", f"{q[3]}*z2"], C4), F4)
    pts = Sampling(points=5).draw(4)
    for a, b in [(0, 1), (0, 2), (1, 2)]:
        assert is_pure(T, a, b, F4, Sampling(points=5)).passed
    v = T.values(pts)
    assert np.array_equal(v, np.swapaxes(v, 2, 3))


def test_deform_examples():
    G = christoffel(metric(CURVED_B))
    zero_T = deformation_tensor(one_form(["0", "0"], C2), F2)
    assert connection_difference(deform(G, zero_T), G, Sampling().draw(2)) == 0.0
    T = deformation_tensor(one_form(["0", "1"], C2), F2)
    bar = deform(ConnectionField.zero(C2), T)
    assert connection_difference(bar, ConnectionField(T), Sampling().draw(2)) == 0.0
    assert connection_purity(bar, F2).passed
    L = complete_lift(random_base_connection(2, 11))
    barL = deform(L, deformation_tensor(one_form(["z1", "z2^2", "1", "z3"], C4), F4))
    assert connection_purity(barL, F4).passed
    assert max_abs(covariant_derivative(F4, barL), Sampling().draw(4)) <= 1e-9


def test_theorem3_equivalence_on_families():
    rng = np.random.default_rng(12)
    for _ in range(5):
        a = rng.uniform(-1, 1, 4)
        pure = metric([[f"{a[0]}*z1^3 + {a[1]}*z1 + 2", "1"], ["1", "0"]])
        assert partials_purity(pure, F2).passed and connection_purity(christoffel(pure), F2).passed
        bent = metric([[f"{a[0]}*z1 + {a[2]}*z2^2 + {a[3]}*z1*z2 + 2", "1"], ["1", "0"]])
        assert not partials_purity(bent, F2).passed
        assert not connection_purity(christoffel(bent), F2).passed
