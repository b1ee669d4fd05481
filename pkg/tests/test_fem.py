import numpy as np
import pytest

from staterec.fem import (
    Snapshot,
    build_space,
    check_parameter,
    coefficient_field,
    l2_norm,
    solve_forward,
    v_inner,
    v_norm,
)

from conftest import series_center_value


def test_interior_node_counts():
    assert build_space(2).n_interior == 9
    assert build_space(4).n_interior == (2**4 - 1) ** 2


def test_level7_matches_benchmark_grid():
    space = build_space(7)
    assert space.n_interior == 127**2 == 16129
    assert space.h == 2.0**-7


@pytest.mark.parametrize("level", [0, 1, 13, -2])
def test_level_out_of_range(level):
    with pytest.raises(ValueError):
        build_space(level)


def test_parameter_validation():
    check_parameter(np.zeros((4, 4)))
    with pytest.raises(ValueError):
        check_parameter(np.zeros((4, 3)))
    with pytest.raises(ValueError):
        check_parameter(1.5 * np.ones((2, 2)))


def test_coefficient_field_constants(space4):
    assert np.allclose(coefficient_field(space4, np.zeros((4, 4))), 1.0)
    assert np.allclose(coefficient_field(space4, np.ones((4, 4))), 1.5)
    assert np.allclose(coefficient_field(space4, -np.ones((4, 4))), 0.5)


def test_coefficient_field_subdomain_layout(space4):
    y = np.zeros((4, 4))
    y[0, 0] = 1.0  # subdomain [0, 1/4) x [0, 1/4)
    a = coefficient_field(space4, y)
    in_corner = np.all(space4.centroids < 0.25, axis=1)
    assert np.allclose(a[in_corner], 1.5)
    assert np.allclose(a[~in_corner], 1.0)


def test_coefficient_field_range(space4, rng):
    y = rng.uniform(-1, 1, (4, 4))
    a = coefficient_field(space4, y)
    assert np.all(a >= 0.5) and np.all(a <= 1.5)


def test_unit_source_center_value(space5):
    u = solve_forward(space5, np.zeros((4, 4)))
    center = space5.evaluate(u, [(0.5, 0.5)])[0]
    # level-5 discretization error is O(h^2) ~ 1e-3
    assert abs(center - series_center_value()) < 2e-4


def test_zero_source(space4, rng):
    y = rng.uniform(-1, 1, (4, 4))
    u = solve_forward(space4, y, f=np.zeros(space4.n_interior))
    assert np.all(u.coefficients == 0.0)


def test_constant_parameter_scaling(space4):
    base = solve_forward(space4, np.zeros((4, 4)))
    for c in (-0.8, 0.4, 1.0):
        scaled = solve_forward(space4, c * np.ones((4, 4)))
        assert np.allclose(scaled.coefficients, base.coefficients / (1.0 + c / 2.0), atol=1e-12)


def test_galerkin_orthogonality(space4, rng):
    y = rng.uniform(-1, 1, (4, 4))
    u = solve_forward(space4, y)
    operator = space4.assemble_operator(coefficient_field(space4, y))
    residual = operator @ u.coefficients - space4.unit_load
    assert np.max(np.abs(residual)) < 1e-12


def test_cg_path_matches_direct(space5):
    y = 0.3 * np.ones((4, 4))
    direct = solve_forward(space5, y, method="direct")
    iterative = solve_forward(space5, y, method="cg")
    assert np.allclose(direct.coefficients, iterative.coefficients, atol=1e-10)


def test_inner_product_contracts(space4, rng):
    u = rng.standard_normal(space4.n_interior)
    v = rng.standard_normal(space4.n_interior)
    assert v_inner(space4, u, v) == pytest.approx(v_inner(space4, v, u), abs=1e-12)
    assert v_inner(space4, u, u) > 0
    assert v_norm(space4, np.zeros(space4.n_interior)) == 0.0
    with pytest.raises(ValueError):
        v_inner(space4, u, np.zeros(5))
    with pytest.raises(ValueError):
        l2_norm(space4, np.zeros(7))


def test_matrices_symmetric(space4):
    k = space4.stiffness
    m = space4.mass
    assert abs(k - k.T).max() < 1e-14
    assert abs(m - m.T).max() < 1e-14
    rng = np.random.default_rng(5)
    for _ in range(5):
        x = rng.standard_normal(space4.n_interior)
        assert x @ (k @ x) > 0
        assert x @ (m @ x) > 0


def test_self_convergence_orders():
    # L2 order ~ 2 and H1 order ~ 1, levels 3..5 against a level-6 reference
    y = np.zeros((4, 4))
    spaces = {lvl: build_space(lvl) for lvl in (3, 4, 5, 6)}
    sols = {lvl: solve_forward(spaces[lvl], y) for lvl in spaces}
    ref = spaces[6]
    pts = ref.nodes[ref.interior]
    errs_l2, errs_h1, hs = [], [], []
    for lvl in (3, 4, 5):
        diff = sols[6].coefficients - spaces[lvl].evaluate(sols[lvl], pts)
        errs_l2.append(l2_norm(ref, diff))
        errs_h1.append(v_norm(ref, diff))
        hs.append(spaces[lvl].h)
    order_l2 = np.polyfit(np.log(hs), np.log(errs_l2), 1)[0]
    order_h1 = np.polyfit(np.log(hs), np.log(errs_h1), 1)[0]
    assert 1.75 < order_l2 < 2.35
    assert 0.8 < order_h1 < 1.3


def test_snapshot_validation():
    with pytest.raises(ValueError):
        Snapshot(coefficients=np.zeros((3, 3)))


def test_evaluate_at_nodes(space4, rng):
    u = rng.standard_normal(space4.n_interior)
    pts = space4.nodes[space4.interior][:17]
    values = space4.evaluate(u, pts)
    assert np.allclose(values, u[:17], atol=1e-14)
