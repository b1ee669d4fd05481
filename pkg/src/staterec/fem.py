"""P1 finite elements on the unit square with checkerboard diffusion fields.

The mesh is a regular grid of size h = 2^-level, every square cell split into
two triangles along its lower-left/upper-right diagonal.  Homogeneous
Dirichlet conditions are imposed by restricting all operators to interior
nodes.  The Hilbert structure used throughout the package is the H1_0
semi-inner product ``<grad u, grad v>``, realized by the unit-coefficient
stiffness matrix.
"""

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .exceptions import NumericFailure

MIN_LEVEL = 2
MAX_LEVEL = 12

# Interior-node systems up to this size are solved by a cached direct
# factorization; larger ones use conjugate gradients.
DIRECT_SOLVE_MAX_DOF = 4096


@dataclass
class Snapshot:
    """Nodal coefficient vector over interior nodes, plus provenance."""

    coefficients: np.ndarray
    parameter: np.ndarray | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.coefficients = np.asarray(self.coefficients, dtype=float)
        if self.coefficients.ndim != 1:
            raise ValueError("snapshot coefficients must be a 1-D vector")


def check_parameter(y):
    """Validate a p-by-p parameter array with entries in [-1, 1]."""
    y = np.asarray(y, dtype=float)
    if y.ndim != 2 or y.shape[0] != y.shape[1] or y.shape[0] < 1:
        raise ValueError(f"parameter must be a square p x p array, got shape {y.shape}")
    if not np.all((y >= -1.0) & (y <= 1.0)):
        raise ValueError("parameter entries must lie in [-1, 1]")
    return y


class FemSpace:
    """Immutable P1 discretization of the unit square at mesh size 2^-level.

    Attributes
    ----------
    level : int
        Refinement level; h = 2**-level.
    nodes : (n_nodes, 2) ndarray
        Coordinates of all grid nodes, boundary included.
    triangles : (n_tri, 3) ndarray
        Vertex indices of each triangle (two per grid cell).
    interior : (n_interior,) ndarray
        Indices of interior nodes within the full node numbering.
    stiffness : csr_matrix
        Unit-coefficient stiffness over interior nodes; realizes the
        H1_0 inner product.
    mass : csr_matrix
        Mass matrix over interior nodes; realizes the L2 inner product
        for functions vanishing on the boundary.
    """

    def __init__(self, level):
        if not (MIN_LEVEL <= level <= MAX_LEVEL):
            raise ValueError(f"level must be in [{MIN_LEVEL}, {MAX_LEVEL}], got {level}")
        self.level = int(level)
        self.n_cells = 2 ** self.level
        self.h = 1.0 / self.n_cells
        self._build_mesh()
        self._assemble()
        self._k_factor = None

    # -- mesh ---------------------------------------------------------------

    def _build_mesh(self):
        n = self.n_cells
        grid = np.linspace(0.0, 1.0, n + 1)
        xs, ys = np.meshgrid(grid, grid, indexing="xy")
        self.nodes = np.column_stack([xs.ravel(), ys.ravel()])

        ix, iy = np.meshgrid(np.arange(n), np.arange(n), indexing="xy")
        v00 = (iy * (n + 1) + ix).ravel()
        v10 = v00 + 1
        v01 = v00 + (n + 1)
        v11 = v01 + 1
        lower = np.column_stack([v00, v10, v11])
        upper = np.column_stack([v00, v11, v01])
        self.triangles = np.vstack([lower, upper])
        self.centroids = self.nodes[self.triangles].mean(axis=1)
        self.tri_area = 0.5 * self.h * self.h

        node_ix = np.tile(np.arange(n + 1), n + 1)
        node_iy = np.repeat(np.arange(n + 1), n + 1)
        interior_mask = (node_ix > 0) & (node_ix < n) & (node_iy > 0) & (node_iy < n)
        self.interior = np.flatnonzero(interior_mask)
        self.n_interior = self.interior.size
        # full-node index -> interior index, -1 on the boundary
        self._to_interior = -np.ones(self.nodes.shape[0], dtype=np.int64)
        self._to_interior[self.interior] = np.arange(self.n_interior)

    # -- assembly -----------------------------------------------------------

    def _assemble(self):
        tri = self.triangles
        pts = self.nodes[tri]  # (n_tri, 3, 2)
        x = pts[:, :, 0]
        y = pts[:, :, 1]
        # gradients of barycentric coordinates: grad(lam_i) = (b_i, c_i) / (2A)
        b = np.stack([y[:, 1] - y[:, 2], y[:, 2] - y[:, 0], y[:, 0] - y[:, 1]], axis=1)
        c = np.stack([x[:, 2] - x[:, 1], x[:, 0] - x[:, 2], x[:, 1] - x[:, 0]], axis=1)
        area = self.tri_area
        ke = (b[:, :, None] * b[:, None, :] + c[:, :, None] * c[:, None, :]) / (4.0 * area)
        me = (area / 12.0) * (np.ones((3, 3)) + np.eye(3))
        me = np.broadcast_to(me, ke.shape)

        rows = np.repeat(tri, 3, axis=1).ravel()
        cols = np.tile(tri, (1, 3)).ravel()
        tri_of_entry = np.repeat(np.arange(tri.shape[0]), 9)

        ri = self._to_interior[rows]
        ci = self._to_interior[cols]
        keep = (ri >= 0) & (ci >= 0)
        self._asm_rows = ri[keep]
        self._asm_cols = ci[keep]
        self._asm_tri = tri_of_entry[keep]
        self._asm_kvals = ke.reshape(-1, 9).ravel()[keep]

        shape = (self.n_interior, self.n_interior)
        self.stiffness = sp.coo_matrix(
            (self._asm_kvals, (self._asm_rows, self._asm_cols)), shape=shape
        ).tocsr()
        mvals = me.reshape(-1, 9).ravel()[keep]
        self.mass = sp.coo_matrix((mvals, (self._asm_rows, self._asm_cols)), shape=shape).tocsr()

        # integral of each interior hat function, i.e. the constant-1 load
        load = np.zeros(self.nodes.shape[0])
        np.add.at(load, tri.ravel(), area / 3.0)
        self.unit_load = load[self.interior]

    def assemble_operator(self, element_values):
        """Stiffness matrix weighted by a piecewise-constant coefficient."""
        element_values = np.asarray(element_values, dtype=float)
        if element_values.shape != (self.triangles.shape[0],):
            raise ValueError("need one coefficient value per element")
        vals = self._asm_kvals * element_values[self._asm_tri]
        shape = (self.n_interior, self.n_interior)
        return sp.coo_matrix((vals, (self._asm_rows, self._asm_cols)), shape=shape).tocsr()

    # -- inner products and solves -------------------------------------------

    def solve_k(self, rhs):
        """Solve the unit-coefficient system K x = rhs with a cached factorization."""
        if self._k_factor is None:
            self._k_factor = spla.splu(self.stiffness.tocsc())
        return self._k_factor.solve(np.asarray(rhs, dtype=float))

    def extend(self, coefficients):
        """Interior coefficient vector extended by zero boundary values."""
        full = np.zeros(self.nodes.shape[0])
        full[self.interior] = coefficients
        return full

    def evaluate(self, coefficients, points):
        """Evaluate the P1 function at arbitrary points of the closed square."""
        full = self.extend(_coeffs(coefficients))
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        n = self.n_cells
        ix = np.clip((pts[:, 0] * n).astype(int), 0, n - 1)
        iy = np.clip((pts[:, 1] * n).astype(int), 0, n - 1)
        xi = pts[:, 0] * n - ix
        eta = pts[:, 1] * n - iy
        v00 = iy * (n + 1) + ix
        v10 = v00 + 1
        v01 = v00 + (n + 1)
        v11 = v01 + 1
        lower = eta <= xi
        vals = np.where(
            lower,
            full[v00] * (1.0 - xi) + full[v10] * (xi - eta) + full[v11] * eta,
            full[v00] * (1.0 - eta) + full[v11] * xi + full[v01] * (eta - xi),
        )
        return vals if np.asarray(points).ndim > 1 else float(vals[0])


def _coeffs(u):
    return u.coefficients if isinstance(u, Snapshot) else np.asarray(u, dtype=float)


def build_space(level):
    """Build the P1 space at mesh size h = 2**-level (2 <= level <= 12)."""
    return FemSpace(level)


def coefficient_field(space, y):
    """Checkerboard diffusion values per element: 1 + y_ij/2 on subdomain S_ij.

    Each element is assigned the subdomain containing its centroid; the
    subdomains are the half-open p x p squares partitioning the unit square.
    """
    y = check_parameter(y)
    p = y.shape[0]
    si = np.minimum((space.centroids[:, 0] * p).astype(int), p - 1)
    sj = np.minimum((space.centroids[:, 1] * p).astype(int), p - 1)
    return 1.0 + 0.5 * y[si, sj]


def solve_forward(space, y, f=None, method="auto", rtol=1e-10):
    """Solve the diffusion problem -div(a(y) grad u) = f with u = 0 on the boundary.

    Parameters
    ----------
    space : FemSpace
    y : (p, p) array_like
        Checkerboard parameter, entries in [-1, 1].
    f : None or (n_interior,) array_like
        ``None`` selects the constant-1 source; otherwise interpreted as an
        already-assembled interior load vector.
    method : {"auto", "direct", "cg"}
        "auto" factorizes small systems directly and runs conjugate
        gradients (relative tolerance ``rtol``) on large ones.

    Returns
    -------
    Snapshot
    """
    y = check_parameter(y)
    a = coefficient_field(space, y)
    operator = space.assemble_operator(a)
    if f is None:
        rhs = space.unit_load.copy()
    else:
        rhs = np.asarray(f, dtype=float)
        if rhs.shape != (space.n_interior,):
            raise ValueError(
                f"load vector must have length {space.n_interior}, got {rhs.shape}"
            )

    if method == "auto":
        method = "direct" if space.n_interior <= DIRECT_SOLVE_MAX_DOF else "cg"
    if method == "direct":
        u = spla.splu(operator.tocsc()).solve(rhs)
    elif method == "cg":
        u, info = spla.cg(operator, rhs, rtol=rtol, atol=0.0, maxiter=20 * space.n_interior)
        if info != 0:
            res = np.linalg.norm(operator @ u - rhs)
            raise NumericFailure(
                f"conjugate gradients did not converge (info={info}, residual={res:.3e})"
            )
    else:
        raise ValueError(f"unknown solver method {method!r}")

    rhs_norm = np.linalg.norm(rhs)
    residual = np.linalg.norm(operator @ u - rhs)
    if rhs_norm > 0 and residual > 10.0 * rtol * rhs_norm:
        raise NumericFailure(f"solver residual {residual:.3e} exceeds tolerance")
    return Snapshot(coefficients=u, parameter=y)


def v_inner(space, u, v):
    """H1_0 inner product u^T K v."""
    uc, vc = _coeffs(u), _coeffs(v)
    if uc.shape != (space.n_interior,) or vc.shape != (space.n_interior,):
        raise ValueError("coefficient length must equal the interior node count")
    return float(uc @ (space.stiffness @ vc))


def v_norm(space, u):
    """H1_0 norm sqrt(u^T K u)."""
    return float(np.sqrt(max(v_inner(space, u, u), 0.0)))


def l2_norm(space, u):
    """L2 norm sqrt(u^T M u)."""
    uc = _coeffs(u)
    if uc.shape != (space.n_interior,):
        raise ValueError("coefficient length must equal the interior node count")
    return float(np.sqrt(max(uc @ (space.mass @ uc), 0.0)))
