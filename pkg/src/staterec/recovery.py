"""Affine recovery maps acting on measurement coordinates.

Every strategy is represented the same way: an offset ``c`` and a linear
block ``B`` mapping the m measurement coordinates to the coordinates of the
orthogonal complement inside the working ambient basis (whose first m
vectors span the measurement space).  Applying a map never alters the
measurement coordinates, so every map is a lifting.
"""

from dataclasses import dataclass

import numpy as np

from .exceptions import UnstableSpaceError
from .reduced import DEGENERATE_S, FavorablePair


@dataclass
class AffineRecoveryMap:
    """Affine correction w -> c + B w from measurement to complement coordinates."""

    m: int
    n_perp: int
    B: np.ndarray
    c: np.ndarray

    def __post_init__(self):
        self.B = np.asarray(self.B, dtype=float)
        self.c = np.asarray(self.c, dtype=float)
        if self.B.shape != (self.n_perp, self.m):
            raise ValueError(f"B must be {self.n_perp} x {self.m}, got {self.B.shape}")
        if self.c.shape != (self.n_perp,):
            raise ValueError(f"c must have length {self.n_perp}, got {self.c.shape}")

    def predict(self, w):
        """Complement coordinates for one measurement vector or a row-stacked batch."""
        w = np.asarray(w, dtype=float)
        if w.shape[-1] != self.m:
            raise ValueError(f"measurement length must be {self.m}, got {w.shape[-1]}")
        return w @ self.B.T + self.c

    def full_coords(self, w):
        """Ambient coordinates of the reconstruction: the data followed by the correction."""
        w = np.asarray(w, dtype=float)
        out = self.predict(w)
        return np.concatenate([w, out], axis=-1)


def minimal_norm_map(m, n_perp):
    """The zero correction: reconstruct the projection of the state onto W."""
    return AffineRecoveryMap(m=m, n_perp=n_perp, B=np.zeros((n_perp, m)), c=np.zeros(n_perp))


def _pair_blocks(pair, m=None):
    """Split the favorable V_n basis into measurement and complement blocks."""
    m = pair.m if m is None else int(m)
    width = pair.psi.shape[1]
    if m > width:
        raise ValueError("pair vectors are narrower than the measurement count")
    phi_w = pair.phi[:, :m]
    phi_perp = pair.phi[:, m:]
    return m, width - m, phi_w, phi_perp


def one_space_map(pair, m=None, s_tol=DEGENERATE_S):
    """Linear recovery interpolating the data and leaning on the reduced space.

    Expects the pair's vectors expressed in ambient coordinates whose first m
    entries are the measurement block.  In favorable coordinates the map
    scales the first n data components by 1/s_j along the reduced directions
    and passes the remaining components through unchanged.
    """
    m, n_perp, phi_w, phi_perp = _pair_blocks(pair, m)
    if pair.n and float(pair.s[pair.n - 1]) <= s_tol:
        raise UnstableSpaceError(
            f"s_n = {pair.s[pair.n - 1]:.3e}: the reduced space meets the measurement "
            "complement, the one-space map is not defined"
        )
    if pair.n == 0:
        return minimal_norm_map(m, n_perp)
    scale = 1.0 / (pair.s[: pair.n] ** 2)
    B = (phi_perp.T * scale) @ phi_w
    return AffineRecoveryMap(m=m, n_perp=n_perp, B=B, c=np.zeros(n_perp))


def affine_one_space_map(pair, ubar_coords, m=None, s_tol=DEGENERATE_S):
    """One-space recovery recentered around the offset state ``ubar``.

    ``ubar_coords`` are the ambient coordinates of the offset; the linear
    block is the one-space map of the (recentered) pair and the constant
    absorbs the offset's complement part.
    """
    linear = one_space_map(pair, m, s_tol)
    ubar_coords = np.asarray(ubar_coords, dtype=float)
    if ubar_coords.shape != (linear.m + linear.n_perp,):
        raise ValueError("offset coordinates must match the ambient dimension")
    c = ubar_coords[linear.m:] - linear.B @ ubar_coords[: linear.m]
    return AffineRecoveryMap(m=linear.m, n_perp=linear.n_perp, B=linear.B, c=c)


def msa_fit(meas, targets, rcond=1e-12, ridge=0.0):
    """Affine map minimizing the mean-square training error.

    Uses the empirical mean and centered second moments of the training
    coordinates: B is the cross-covariance times the pseudoinverse of the
    measurement covariance (singular values below ``rcond`` times the largest
    are truncated), and c matches the means.  A ridge term is available for
    noisy data; by default the estimator is exact on degenerate inputs.
    """
    meas = np.atleast_2d(np.asarray(meas, dtype=float))
    targets = np.atleast_2d(np.asarray(targets, dtype=float))
    if meas.shape[0] != targets.shape[0]:
        raise ValueError("measurement and target sets must have equal size")
    J, m = meas.shape
    n_perp = targets.shape[1]
    mean_w = meas.mean(axis=0)
    mean_u = targets.mean(axis=0)
    wc = meas - mean_w
    uc = targets - mean_u
    s11 = wc.T @ wc / J
    s21 = uc.T @ wc / J
    if ridge > 0.0:
        B = s21 @ np.linalg.inv(s11 + ridge * np.eye(m))
    else:
        B = s21 @ np.linalg.pinv(s11, rcond=rcond)
    c = mean_u - B @ mean_w
    return AffineRecoveryMap(m=m, n_perp=n_perp, B=B, c=c)


def apply_map(recovery_map, w, ambient):
    """Expand the reconstruction to nodal coefficients through the ambient basis."""
    coords = recovery_map.full_coords(w)
    if ambient.vectors.shape[0] != coords.shape[-1]:
        raise ValueError("ambient basis dimension does not match the map")
    return coords @ ambient.vectors


def lifting_to_one_space(B, s_floor=0.0):
    """Reduced space whose one-space algorithm reproduces the given lifting.

    The SVD of B yields rotated measurement directions and complement
    directions; combining them with weights (1 + alpha^2)^(-1/2) produces a
    favorable pair whose one-space map equals w -> w + Bw.  Directions with
    alpha = 0 contribute nothing and are left out of the reduced space.

    Returns (pair, n) with the pair expressed in (m + n_perp) ambient
    coordinates.
    """
    B = np.asarray(B, dtype=float)
    n_perp, m = B.shape
    u, alpha, vt = np.linalg.svd(B, full_matrices=True)
    n = int(np.sum(alpha > s_floor))
    width = m + n_perp

    psi = np.zeros((m, width))
    psi[:, :m] = vt  # rotated measurement basis, row j = Q[:, j]^T
    s = (1.0 + alpha[:n] ** 2) ** -0.5
    phi = np.zeros((n, width))
    phi[:, :m] = s[:, None] * vt[:n]
    phi[:, m:] = (s * alpha[:n])[:, None] * u[:, :n].T

    # favorable pairs list singular values in nonincreasing order; alpha
    # descending makes s ascending, so reverse the first n directions
    order = np.arange(n)[::-1]
    psi[:n] = psi[order]
    phi = phi[order]
    s = s[order]
    return FavorablePair(psi=psi, phi=phi, s=s, inner=None), n


def affine_lifting_to_one_space(B, c):
    """Affine variant: also returns offset coordinates reproducing the constant."""
    pair, n = lifting_to_one_space(B)
    c = np.asarray(c, dtype=float)
    ubar = np.concatenate([np.zeros(B.shape[1]), c])
    return pair, n, ubar


def select_nstar(errors):
    """Index n* (1-based) minimizing the error curve over n; ties take the smallest n."""
    errors = np.asarray(errors, dtype=float)
    if errors.ndim != 1 or errors.size == 0:
        raise ValueError("need a nonempty 1-D error table over n")
    return int(np.argmin(errors)) + 1
