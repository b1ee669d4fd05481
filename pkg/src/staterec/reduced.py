"""Greedy reduced bases, ambient bases, and favorable basis pairs.

All routines work on coefficient vectors stacked as rows and take the inner
product as an explicit operator (a sparse or dense SPD matrix, or ``None``
for the Euclidean product).  This lets the same machinery run both in the
full finite-element space (operator = stiffness matrix) and in orthonormal
coordinate spaces (operator = None).
"""

import logging
from dataclasses import dataclass, field

import numpy as np

from .fem import Snapshot

logger = logging.getLogger(__name__)

DEGENERATE_S = 1e-14


def _as_matrix(vectors):
    """Stack snapshots / vectors into a (k, dim) float array."""
    if isinstance(vectors, Snapshot):
        return np.asarray(vectors.coefficients, dtype=float)[None]
    if isinstance(vectors, np.ndarray):
        arr = np.asarray(vectors, dtype=float)
        return arr[None] if arr.ndim == 1 else arr
    rows = [v.coefficients if isinstance(v, Snapshot) else np.asarray(v, dtype=float) for v in vectors]
    return np.vstack(rows) if rows else np.empty((0, 0))


def inner_products(a, b, inner=None):
    """Gram block <a_i, b_j> for row-stacked vector families."""
    bt = b.T if inner is None else inner @ b.T
    return a @ bt


@dataclass
class OrthonormalBasis:
    """Row-stacked vectors orthonormal under the given inner-product operator."""

    vectors: np.ndarray
    inner: object = None

    @property
    def dim(self):
        return self.vectors.shape[0]

    def gram(self):
        return inner_products(self.vectors, self.vectors, self.inner)

    def coords(self, vectors):
        """Expansion coefficients <psi_i, u_j> of the given vectors, row per vector."""
        return inner_products(_as_matrix(vectors), self.vectors, self.inner)


@dataclass
class ReducedBasis:
    """Greedy-selected orthonormal basis with its error history."""

    indices: list
    basis: OrthonormalBasis
    errors: np.ndarray
    rank_exhausted: bool = False

    @property
    def n(self):
        return self.basis.dim


@dataclass
class FavorablePair:
    """SVD-rotated bases of W (psi) and V_n (phi) with diagonal cross-Gramian.

    ``psi`` keeps all m vectors of W; ``phi`` holds the n vectors of V_n; the
    singular values ``s`` are nonincreasing and satisfy <psi_i, phi_j> = s_i
    delta_ij for i <= n.
    """

    psi: np.ndarray
    phi: np.ndarray
    s: np.ndarray
    inner: object = None

    @property
    def n(self):
        return self.phi.shape[0]

    @property
    def m(self):
        return self.psi.shape[0]


def orthonormalize_against(vector, basis_rows, inner=None, passes=2):
    """Modified Gram-Schmidt of one vector against accepted rows, with re-orthogonalization.

    Returns the orthogonalized (not yet normalized) vector.
    """
    v = np.array(vector, dtype=float)
    for _ in range(passes):
        for row in basis_rows:
            kv = row @ v if inner is None else row @ (inner @ v)
            v -= kv * row
    return v


def orthonormalize(vectors, inner=None, drop_tol=1e-12, on_drop="drop"):
    """Orthonormalize row vectors by modified Gram-Schmidt in the given inner product.

    Vectors whose orthogonalized norm falls below ``drop_tol`` times their
    original norm are handled per ``on_drop``: "drop" skips them (logged),
    "raise" raises ValueError with the offending index.

    Returns (basis_rows (k, dim), kept_indices).
    """
    mat = _as_matrix(vectors)
    basis = []
    kept = []
    for i in range(mat.shape[0]):
        original = mat[i]
        norm0 = np.sqrt(max(float(inner_products(original[None], original[None], inner)[0, 0]), 0.0))
        v = orthonormalize_against(original, basis, inner)
        norm = np.sqrt(max(float(inner_products(v[None], v[None], inner)[0, 0]), 0.0))
        if norm0 == 0.0 or norm < drop_tol * norm0:
            if on_drop == "raise":
                raise ValueError(f"vector {i} is linearly dependent (pivot {norm:.3e})")
            logger.warning("dropping dependent vector %d (pivot %.3e)", i, norm)
            continue
        basis.append(v / norm)
        kept.append(i)
    dim = mat.shape[1] if mat.size else 0
    out = np.vstack(basis) if basis else np.empty((0, dim))
    return out, kept


def greedy_reduced_basis(training, N, inner=None, tol=1e-13):
    """Strong greedy selection of N snapshots maximizing the projection error.

    At each step the snapshot farthest from the current space (ties broken by
    smallest index) is selected and orthonormalized in; the recorded error
    after step n is max_u ||u - P_{V_n} u||.  Stops early once that error
    falls below ``tol``; if the training set's rank is exhausted before N
    vectors are found, the result is truncated and flagged.
    """
    mat = _as_matrix(training)
    J = mat.shape[0]
    if N > J:
        raise ValueError(f"N={N} exceeds the training set size {J}")

    def residual_norms2(res):
        k_res = res.T if inner is None else inner @ res.T
        return np.maximum(np.einsum("ij,ji->i", res, k_res), 0.0)

    # explicit residual deflation keeps the error history accurate down to
    # rounding scale, where incremental norm subtraction cancels
    residuals = mat.copy()
    res2 = residual_norms2(residuals)
    basis_rows = []
    indices = []
    errors = []
    exhausted = False
    for _ in range(N):
        best = int(np.argmax(res2))
        if np.sqrt(res2[best]) < tol:
            exhausted = len(basis_rows) < N
            break
        v = orthonormalize_against(residuals[best], basis_rows, inner, passes=1)
        nrm2 = float(inner_products(v[None], v[None], inner)[0, 0])
        if nrm2 <= 0.0:
            exhausted = True
            break
        psi = v / np.sqrt(nrm2)
        basis_rows.append(psi)
        indices.append(best)
        coords = (residuals @ psi) if inner is None else (residuals @ (inner @ psi))
        residuals -= np.outer(coords, psi)
        res2 = residual_norms2(residuals)
        errors.append(float(np.sqrt(res2.max())))

    dim = mat.shape[1]
    vectors = np.vstack(basis_rows) if basis_rows else np.empty((0, dim))
    return ReducedBasis(
        indices=indices,
        basis=OrthonormalBasis(vectors, inner),
        errors=np.asarray(errors),
        rank_exhausted=exhausted,
    )


def ambient_basis(measurement_basis, reduced, drop_tol=1e-12):
    """Orthonormal basis of W + V_N: the W basis followed by its complement part.

    The first m rows are the measurement-space basis (untouched); the
    remaining rows orthonormalize the reduced basis against them, spanning
    the orthogonal complement of W within W + V_N.  Reduced vectors lying in
    W (pivot below ``drop_tol``) are dropped with a logged report.
    """
    wb = measurement_basis if isinstance(measurement_basis, OrthonormalBasis) else OrthonormalBasis(_as_matrix(measurement_basis))
    inner = wb.inner
    rb_vectors = reduced.basis.vectors if isinstance(reduced, ReducedBasis) else _as_matrix(reduced)
    rows = list(wb.vectors)
    perp = []
    for i in range(rb_vectors.shape[0]):
        v0 = rb_vectors[i]
        norm0 = np.sqrt(max(float(inner_products(v0[None], v0[None], inner)[0, 0]), 0.0))
        v = orthonormalize_against(v0, rows, inner)
        norm = np.sqrt(max(float(inner_products(v[None], v[None], inner)[0, 0]), 0.0))
        if norm < drop_tol * max(norm0, 1.0e-300):
            logger.warning("ambient basis: reduced vector %d lies in W, dimension reduced", i)
            continue
        psi = v / norm
        rows.append(psi)
        perp.append(psi)
    vectors = np.vstack(rows) if rows else np.empty((0, rb_vectors.shape[1]))
    return OrthonormalBasis(vectors, inner)


def truncation_error(sets, basis):
    """Worst-case distance of the given snapshots to the span of ``basis``.

    ``sets`` is either one collection of snapshots/vectors or a list of such
    collections (e.g. greedy and test sets together).
    """
    if isinstance(sets, np.ndarray) or (len(sets) and isinstance(sets[0], (Snapshot, np.ndarray))):
        sets = [sets]
    worst = 0.0
    for group in sets:
        mat = _as_matrix(group)
        if mat.size == 0:
            continue
        res = mat - basis.coords(mat) @ basis.vectors
        k_res = res.T if basis.inner is None else basis.inner @ res.T
        res2 = np.maximum(np.einsum("ij,ji->i", res, k_res), 0.0)
        worst = max(worst, float(np.sqrt(res2.max())))
    return worst


def favorable_bases(vn, wb):
    """Rotate bases of V_n and W so their cross-Gramian becomes diagonal.

    Applies the SVD to the m x n cross-Gramian of the input orthonormal
    bases and rotates each family by the corresponding singular vectors.
    The returned pair keeps all m rotated W vectors and the n rotated V_n
    vectors, with nonincreasing singular values s.
    """
    if vn.dim > wb.dim:
        raise ValueError(f"need n <= m, got n={vn.dim}, m={wb.dim}")
    gram = inner_products(wb.vectors, vn.vectors, wb.inner)  # (m, n)
    u, s, vt = np.linalg.svd(gram, full_matrices=True)
    psi = u.T @ wb.vectors
    phi = vt @ vn.vectors
    return FavorablePair(psi=psi, phi=phi, s=s, inner=wb.inner)


def stability_mu(pair):
    """Stability factor 1/s_n of a favorable pair; +inf when s_n is degenerate."""
    if pair.n < 1:
        raise ValueError("stability factor requires n >= 1")
    s_min = float(pair.s[pair.n - 1])
    return np.inf if s_min <= DEGENERATE_S else 1.0 / s_min
