import numpy as np
import pytest

from staterec.fem import solve_forward, v_norm
from staterec.reduced import (
    OrthonormalBasis,
    ambient_basis,
    favorable_bases,
    greedy_reduced_basis,
    stability_mu,
    truncation_error,
)
from staterec.sensing import build_measurement_space, draw_sensors

from conftest import random_orthonormal


def brute_force_mu(vn, wb):
    """Independent oracle: largest norm amplification of the projection onto W.

    Forms the dense projector onto W, assembles the projected Gram matrix of
    the V_n basis, and reads the smallest generalized eigenvalue.
    """
    projector = wb.vectors.T @ wb.vectors
    gram = vn.vectors @ projector @ vn.vectors.T
    smallest = np.linalg.eigvalsh(gram)[0]
    return 1.0 / np.sqrt(max(smallest, 0.0))


def test_greedy_exhausts_independent_set(rng):
    vectors = rng.standard_normal((6, 20))
    rb = greedy_reduced_basis(vectors, 6)
    assert rb.n == 6
    assert rb.errors[-1] <= 1e-12
    assert not rb.rank_exhausted


def test_greedy_first_pick_is_largest_norm(rng):
    vectors = rng.standard_normal((10, 15))
    norms = np.linalg.norm(vectors, axis=1)
    rb = greedy_reduced_basis(vectors, 3)
    assert rb.indices[0] == int(np.argmax(norms))


def test_greedy_history_monotone_and_reproducible(rng):
    vectors = rng.standard_normal((30, 25))
    rb = greedy_reduced_basis(vectors, 10)
    assert np.all(np.diff(rb.errors) <= 1e-12)
    # recompute each recorded error from scratch
    for n in range(1, rb.n + 1):
        basis = rb.basis.vectors[:n]
        coords = vectors @ basis.T
        res = vectors - coords @ basis
        err = np.sqrt(np.max(np.einsum("ij,ij->i", res, res)))
        assert abs(err - rb.errors[n - 1]) < 1e-10


def test_greedy_rank_exhaustion(rng):
    base = rng.standard_normal((3, 12))
    weights = rng.standard_normal((9, 3))
    rb = greedy_reduced_basis(weights @ base, 7)
    assert rb.n == 3
    assert rb.rank_exhausted


def test_greedy_requires_enough_snapshots(rng):
    with pytest.raises(ValueError):
        greedy_reduced_basis(rng.standard_normal((4, 9)), 5)


def test_greedy_in_fem_inner_product(space4, rng):
    snaps = [solve_forward(space4, rng.uniform(-1, 1, (4, 4))) for _ in range(12)]
    rb = greedy_reduced_basis(snaps, 6, space4.stiffness)
    gram = rb.basis.gram()
    assert np.max(np.abs(gram - np.eye(rb.n))) < 1e-10
    assert np.all(np.diff(rb.errors) <= 1e-12)


def test_ambient_basis_parseval(space4, rng):
    sensors = draw_sensors(6, seed=3)
    ms = build_measurement_space(space4, sensors)
    snaps = [solve_forward(space4, rng.uniform(-1, 1, (4, 4))) for _ in range(10)]
    rb = greedy_reduced_basis(snaps, 5, space4.stiffness)
    amb = ambient_basis(ms.basis, rb)
    assert amb.dim == 6 + 5
    assert np.max(np.abs(amb.gram() - np.eye(amb.dim))) < 1e-10
    u = snaps[0].coefficients
    coords = amb.coords(u)[0]
    projected = coords @ amb.vectors
    # Parseval: coordinate norm equals the norm of the projection
    assert np.linalg.norm(coords) == pytest.approx(v_norm(space4, projected), abs=1e-10)


def test_ambient_basis_orthogonal_reduced_block(rng):
    # synthetic Euclidean case where the reduced space is already orthogonal to W
    wb = OrthonormalBasis(np.eye(10)[:4])
    reduced_rows = np.eye(10)[4:7]
    amb = ambient_basis(wb, reduced_rows)
    assert np.allclose(np.abs(amb.vectors[4:]), np.abs(reduced_rows), atol=1e-12)


def test_ambient_basis_rank_collapse(rng):
    wb = OrthonormalBasis(np.eye(8)[:3])
    inside = np.zeros((2, 8))
    inside[0, 0] = 1.0  # already in W
    inside[1, 5] = 1.0
    amb = ambient_basis(wb, inside)
    assert amb.dim == 4


def test_truncation_error_cases(rng):
    basis = OrthonormalBasis(np.eye(12)[:5])
    inside = rng.standard_normal((7, 5)) @ basis.vectors
    assert truncation_error(inside, basis) < 1e-12
    outside = np.eye(12)[6][None] * 3.0
    assert truncation_error([inside, outside], basis) == pytest.approx(3.0, abs=1e-12)
    # growing the basis never increases the truncation error
    vectors = rng.standard_normal((9, 12))
    errors = [
        truncation_error(vectors, OrthonormalBasis(np.eye(12)[:k])) for k in (2, 5, 8)
    ]
    assert errors[0] >= errors[1] >= errors[2]


def test_favorable_contained_space(rng):
    wb = OrthonormalBasis(random_orthonormal(rng, 20, 6))
    vn = OrthonormalBasis(wb.vectors[:3])
    pair = favorable_bases(vn, wb)
    assert np.allclose(pair.s, 1.0, atol=1e-12)
    assert stability_mu(pair) == pytest.approx(1.0, abs=1e-10)


def test_favorable_orthogonal_space(rng):
    basis = random_orthonormal(rng, 20, 9)
    wb = OrthonormalBasis(basis[:6])
    vn = OrthonormalBasis(basis[6:])
    pair = favorable_bases(vn, wb)
    assert np.max(np.abs(pair.s)) < 1e-12
    assert stability_mu(pair) == np.inf


def test_favorable_biorthogonality_and_span(rng):
    wb = OrthonormalBasis(random_orthonormal(rng, 30, 8))
    vn = OrthonormalBasis(random_orthonormal(rng, 30, 5))
    pair = favorable_bases(vn, wb)
    cross = pair.psi @ pair.phi.T
    assert np.max(np.abs(cross[:5] - np.diag(pair.s))) < 1e-9
    assert np.max(np.abs(cross[5:])) < 1e-9
    assert np.all(pair.s[:-1] >= pair.s[1:] - 1e-15)
    assert np.all(pair.s <= 1.0 + 1e-12)
    # span preservation: mutual projection residuals vanish
    res_w = pair.psi - (pair.psi @ wb.vectors.T) @ wb.vectors
    res_v = pair.phi - (pair.phi @ vn.vectors.T) @ vn.vectors
    assert np.max(np.abs(res_w)) < 1e-10
    assert np.max(np.abs(res_v)) < 1e-10


def test_favorable_matches_brute_force_oracle(rng):
    wb = OrthonormalBasis(random_orthonormal(rng, 30, 8))
    vn = OrthonormalBasis(random_orthonormal(rng, 30, 5))
    pair = favorable_bases(vn, wb)
    assert 1.0 / pair.s[-1] == pytest.approx(brute_force_mu(vn, wb), rel=1e-8)


def test_mu_monotone_in_n(rng):
    wb = OrthonormalBasis(random_orthonormal(rng, 25, 10))
    vectors = random_orthonormal(rng, 25, 6)
    mus = []
    for n in range(1, 7):
        pair = favorable_bases(OrthonormalBasis(vectors[:n]), wb)
        mus.append(stability_mu(pair))
    assert all(mus[i] <= mus[i + 1] + 1e-10 for i in range(5))


def test_favorable_requires_n_le_m(rng):
    wb = OrthonormalBasis(random_orthonormal(rng, 10, 2))
    vn = OrthonormalBasis(random_orthonormal(rng, 10, 4))
    with pytest.raises(ValueError):
        favorable_bases(vn, wb)


def test_stability_mu_reciprocal():
    pair_like = favorable_bases(
        OrthonormalBasis(np.eye(4)[:2]), OrthonormalBasis(np.eye(4)[:3])
    )
    pair_like.s = np.array([1.0, 0.5])
    assert stability_mu(pair_like) == pytest.approx(2.0)
