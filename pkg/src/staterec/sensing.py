"""Local-average sensors, their Riesz representers, and the measurement space.

Each sensor integrates the state against a normalized radial kernel centered
at a point of the domain.  The kernel decays exponentially in the radius,
``exp(-|r| / (2 tau^2))``; a Gaussian variant ``exp(-|r|^2 / (2 tau^2))`` is
available through the ``kernel`` argument.
"""

from dataclasses import dataclass

import numpy as np

from .exceptions import DegenerateSensorError
from .fem import Snapshot, _coeffs
from .reduced import OrthonormalBasis, inner_products, orthonormalize_against

KERNEL_CUTOFF_RADII = 8.0


@dataclass(frozen=True)
class Sensor:
    """Local-average sensor with center strictly inside the unit square."""

    center: tuple
    tau: float

    def __post_init__(self):
        x, y = self.center
        if not (0.0 < x < 1.0 and 0.0 < y < 1.0):
            raise ValueError(f"sensor center {self.center} must lie strictly inside the domain")
        if self.tau <= 0.0:
            raise ValueError(f"sensor spread must be positive, got {self.tau}")


def _kernel_values(r, tau, kernel):
    if kernel == "exponential":
        return np.exp(-r / (2.0 * tau * tau))
    if kernel == "gaussian":
        return np.exp(-(r * r) / (2.0 * tau * tau))
    raise ValueError(f"unknown kernel {kernel!r}")


def kernel_load_vector(space, sensor, kernel="exponential"):
    """Load vector of the sensor functional over all nodes, normalized to unit mass.

    The kernel is truncated outside ``8 tau`` of the center (plus one mesh
    width so the center's own element always contributes) and integrated
    element by element with the three-point edge-midpoint rule, which is
    exact for quadratics.  The result is scaled so that the discrete integral
    of the kernel over the domain, i.e. the load applied to the constant-1
    nodal function, equals one.
    """
    center = np.asarray(sensor.center, dtype=float)
    cutoff = KERNEL_CUTOFF_RADII * sensor.tau + space.h
    dist = np.linalg.norm(space.centroids - center, axis=1)
    active = np.flatnonzero(dist <= cutoff)
    if active.size == 0:
        active = np.array([int(np.argmin(dist))])

    tri = space.triangles[active]
    pts = space.nodes[tri]  # (k, 3, 2)
    midpoints = 0.5 * (pts + np.roll(pts, -1, axis=1))  # edges (0,1), (1,2), (2,0)
    r = np.linalg.norm(midpoints - center, axis=2)
    phi = _kernel_values(r, sensor.tau, kernel)

    # hat function of vertex i is 1/2 on its two adjacent edge midpoints
    w = space.tri_area / 6.0
    contrib = np.empty_like(phi)
    contrib[:, 0] = w * (phi[:, 0] + phi[:, 2])
    contrib[:, 1] = w * (phi[:, 0] + phi[:, 1])
    contrib[:, 2] = w * (phi[:, 1] + phi[:, 2])

    load = np.zeros(space.nodes.shape[0])
    np.add.at(load, tri.ravel(), contrib.ravel())
    total = load.sum()
    return load / total


def riesz_representer(space, sensor, kernel="exponential"):
    """Element of the FEM space representing the sensor functional in the H1_0 product."""
    load = kernel_load_vector(space, sensor, kernel)
    omega = space.solve_k(load[space.interior])
    return Snapshot(coefficients=omega, meta={"sensor": sensor})


class MeasurementSpace:
    """Ordered sensors, their representers, and an orthonormal basis of their span.

    The basis is produced by modified Gram-Schmidt (one re-orthogonalization
    pass) in the H1_0 inner product, preserving sensor order so the span of
    the first m basis vectors equals the span of the first m representers.
    """

    def __init__(self, space, sensors, representers, basis):
        self.space = space
        self.sensors = list(sensors)
        self.representers = representers
        self.basis = basis
        self.m = basis.dim
        # cache K @ psi_i rows for fast measurements
        self._k_basis = (space.stiffness @ basis.vectors.T).T

    def sub_basis(self, m):
        """Basis of the nested subspace spanned by the first m sensors."""
        if not (1 <= m <= self.m):
            raise ValueError(f"m must be in [1, {self.m}], got {m}")
        return OrthonormalBasis(self.basis.vectors[:m], self.basis.inner)

    def measure(self, u, m=None):
        """Coordinates of the projection of u onto span of the first m basis vectors."""
        m = self.m if m is None else int(m)
        if not (1 <= m <= self.m):
            raise ValueError(f"m must be in [1, {self.m}], got {m}")
        coeffs = _coeffs(u)
        if coeffs.ndim == 1:
            return self._k_basis[:m] @ coeffs
        return coeffs @ self._k_basis[:m].T


def build_measurement_space(space, sensors, kernel="exponential", drop_tol=1e-12):
    """Compute representers for the sensors and orthonormalize their span.

    Raises DegenerateSensorError (naming the offending sensor) when a
    representer is linearly dependent on the previous ones.
    """
    if not sensors:
        raise ValueError("need at least one sensor")
    reps = np.vstack(
        [riesz_representer(space, s, kernel).coefficients for s in sensors]
    )
    inner = space.stiffness
    rows = []
    for i in range(reps.shape[0]):
        norm0 = np.sqrt(max(float(inner_products(reps[i][None], reps[i][None], inner)[0, 0]), 0.0))
        v = orthonormalize_against(reps[i], rows, inner)
        norm = np.sqrt(max(float(inner_products(v[None], v[None], inner)[0, 0]), 0.0))
        if norm0 == 0.0 or norm < drop_tol * norm0:
            raise DegenerateSensorError(i)
        rows.append(v / norm)
    basis = OrthonormalBasis(np.vstack(rows), inner)
    return MeasurementSpace(space, sensors, reps, basis)


def measure(mspace, u, m):
    """Measurement coordinates of u under the first m sensors' orthonormal basis."""
    return mspace.measure(u, m)


def draw_sensors(count, box=(0.1, 0.9), tau_range=(0.05, 0.1), seed=0):
    """Draw sensors with centers uniform in the box and spreads uniform in the range."""
    rng = np.random.default_rng(seed)
    lo, hi = box
    centers = rng.uniform(lo, hi, size=(count, 2))
    taus = rng.uniform(tau_range[0], tau_range[1], size=count)
    return [Sensor(center=(float(c[0]), float(c[1])), tau=float(t)) for c, t in zip(centers, taus)]
