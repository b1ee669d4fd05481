import numpy as np
import pytest

from staterec.fem import build_space


@pytest.fixture(scope="session")
def space4():
    return build_space(4)


@pytest.fixture(scope="session")
def space5():
    return build_space(5)


@pytest.fixture()
def rng():
    return np.random.default_rng(1234)


def random_orthonormal(rng, dim, k):
    """k orthonormal rows in R^dim (Euclidean inner product)."""
    q, _ = np.linalg.qr(rng.standard_normal((dim, k)))
    return q.T


def golden_epigraph_oracle(u, v, xi, iters=220):
    """Golden-section oracle for the epigraph projection.

    Searches the radial segment y = u + s*(v-u)/|v-u|, t = max(xi, s^2) in
    extended precision (comparison noise of the quadratic objective limits a
    float64 search to ~1e-7 in the argument).
    """
    u = np.asarray(u, dtype=np.longdouble)
    v = np.asarray(v, dtype=np.longdouble)
    xi = np.longdouble(xi)
    z = v - u
    nz = np.sqrt(np.sum(z * z))
    if nz * nz <= xi:
        return np.asarray(v, dtype=float), float(xi)
    zh = z / nz

    def dist2(s):
        t = max(xi, s * s)
        y = u + s * zh
        return np.sum((y - v) ** 2) + (t - xi) ** 2

    a, b = np.longdouble(0.0), nz
    ratio = (np.sqrt(np.longdouble(5.0)) - 1.0) / 2.0
    c, d = b - ratio * (b - a), a + ratio * (b - a)
    fc, fd = dist2(c), dist2(d)
    for _ in range(iters):
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - ratio * (b - a)
            fc = dist2(c)
        else:
            a, c, fc = c, d, fd
            d = a + ratio * (b - a)
            fd = dist2(d)
    s = (a + b) / 2.0
    return np.asarray(u + s * zh, dtype=float), float(max(xi, s * s))


def chebyshev_line_oracle(w, u):
    """Linear-programming oracle for scalar minimax affine regression.

    Returns the optimal worst squared residual of u ~ R w + b over scalars.
    """
    from scipy.optimize import linprog

    w = np.asarray(w, dtype=float)
    u = np.asarray(u, dtype=float)
    # variables (R, b, e): minimize e subject to |u_j - R w_j - b| <= e
    J = w.size
    a_ub = np.block(
        [
            [-w[:, None], -np.ones((J, 1)), -np.ones((J, 1))],
            [w[:, None], np.ones((J, 1)), -np.ones((J, 1))],
        ]
    )
    b_ub = np.concatenate([-u, u])
    result = linprog(
        c=[0.0, 0.0, 1.0], A_ub=a_ub, b_ub=b_ub, bounds=[(None, None)] * 3, method="highs"
    )
    assert result.success
    return result.fun**2


def series_center_value(terms=401):
    """Center value of the Poisson problem with unit source on the unit square.

    Independent oracle: truncated double-sine expansion, odd frequencies up
    to ``terms`` per direction.
    """
    m = np.arange(1, terms, 2, dtype=float)
    sm = np.sin(m * np.pi * 0.5)
    total = 0.0
    for i, mi in enumerate(m):
        total += np.sum(16.0 / (np.pi**4 * mi * m * (mi**2 + m**2)) * sm[i] * sm)
    return total
