"""Worst-case optimal affine fitting by primal-dual proximal splitting.

The training problem is  min over (R, b) of  max_j || u^j - R w^j - b ||^2,
rewritten through epigraph constraints as  min t  s.t. (Q_j x, t) lies in the
epigraph of f_j(y) = ||u^j - y||^2, where x stacks R (row-major) and b.  The
splitting alternates a primal proximal step on t, an extrapolation, and a
dual proximal step realized through Euclidean projections onto the epigraphs.
A plain subgradient descent on the same objective serves as the baseline.
"""

import time
from dataclasses import dataclass, field

import numpy as np

from .exceptions import NumericFailure
from .recovery import AffineRecoveryMap

EPI_NEWTON_TOL = 1e-14
EPI_NEWTON_MAXITER = 200


@dataclass
class MinMaxProblem:
    """Training coordinates for the min-max affine fit."""

    meas: np.ndarray
    targets: np.ndarray

    def __post_init__(self):
        self.meas = np.atleast_2d(np.asarray(self.meas, dtype=float))
        self.targets = np.atleast_2d(np.asarray(self.targets, dtype=float))
        if self.meas.shape[0] != self.targets.shape[0] or self.meas.shape[0] < 1:
            raise ValueError("need equally many measurement and target rows, at least one")
        if not (np.all(np.isfinite(self.meas)) and np.all(np.isfinite(self.targets))):
            raise ValueError("training coordinates must be finite")

    @property
    def J(self):
        return self.meas.shape[0]

    @property
    def m(self):
        return self.meas.shape[1]

    @property
    def n_perp(self):
        return self.targets.shape[1]

    @property
    def x_size(self):
        return self.n_perp * (self.m + 1)


@dataclass
class PdState:
    """Primal pair, extrapolated pair, and per-snapshot dual pairs of the splitting."""

    R: np.ndarray
    b: np.ndarray
    t: float
    R_bar: np.ndarray
    b_bar: np.ndarray
    t_bar: float
    V: np.ndarray
    xi: np.ndarray
    gamma_g: float
    gamma_f: float
    theta: float
    opnorm: float
    k: int = 0
    history: list = field(default_factory=list)

    def __post_init__(self):
        if self.gamma_g <= 0 or self.gamma_f <= 0:
            raise ValueError("step sizes must be positive")
        if self.gamma_g * self.gamma_f >= 1.0 / self.opnorm**2:
            raise ValueError(
                f"step sizes violate gamma_g * gamma_f < 1/||L||^2 "
                f"({self.gamma_g * self.gamma_f:.3e} >= {1.0 / self.opnorm**2:.3e})"
            )

    @property
    def x(self):
        return pack_x(self.R, self.b)


def pack_x(R, b):
    """Stack (R, b) into the primal vector, R row-major first."""
    return np.concatenate([np.asarray(R, dtype=float).ravel(), np.asarray(b, dtype=float)])


def unpack_x(x, n_perp, m):
    """Split the primal vector back into (R, b)."""
    x = np.asarray(x, dtype=float)
    if x.shape != (n_perp * (m + 1),):
        raise ValueError(f"primal vector must have length {n_perp * (m + 1)}, got {x.shape}")
    return x[: n_perp * m].reshape(n_perp, m), x[n_perp * m:]


def objective(problem, x):
    """Worst squared residual max_j ||u^j - R w^j - b||^2 at the primal point x."""
    R, b = unpack_x(x, problem.n_perp, problem.m)
    return _objective_rb(problem, R, b)


def _objective_rb(problem, R, b):
    resid = problem.targets - problem.meas @ R.T - b
    return float(np.max(np.einsum("ij,ij->i", resid, resid)))


def apply_Q(w, x, n_perp=None):
    """Forward action R w + b of one snapshot's sparse block."""
    w = np.asarray(w, dtype=float)
    if n_perp is None:
        if x.size % (w.size + 1):
            raise ValueError("primal size incompatible with the measurement length")
        n_perp = x.size // (w.size + 1)
    R, b = unpack_x(x, n_perp, w.size)
    return R @ w + b


def apply_Q_adjoint(w, v):
    """Adjoint action: stack the outer product v w^T (row-major) and v."""
    w = np.asarray(w, dtype=float)
    v = np.asarray(v, dtype=float)
    return np.concatenate([np.outer(v, w).ravel(), v])


def apply_L(problem, x, t):
    """Forward operator: per-snapshot pairs (Q_j x, t) as arrays (V, xi)."""
    R, b = unpack_x(x, problem.n_perp, problem.m)
    V = problem.meas @ R.T + b
    xi = np.full(problem.J, float(t))
    return V, xi


def apply_L_adjoint(problem, V, xi):
    """Adjoint operator: (sum_j Q_j^T v_j, sum_j xi_j)."""
    V = np.asarray(V, dtype=float)
    xi = np.asarray(xi, dtype=float)
    R_part = V.T @ problem.meas
    b_part = V.sum(axis=0)
    return pack_x(R_part, b_part), float(xi.sum())


def opnorm_bound(problem):
    """Analytic bound ||L||^2 <= J + sum_j (1 + ||w^j||^2)."""
    return float(np.sqrt(problem.J + np.sum(1.0 + np.einsum("ij,ij->i", problem.meas, problem.meas))))


def estimate_opnorm(problem, iterations=500, seed=0, rtol=1e-10):
    """Power-method estimate of ||L|| from a seeded random start."""
    if iterations < 1:
        raise ValueError("need at least one power iteration")
    rng = np.random.default_rng(seed)
    W = problem.meas
    R = rng.standard_normal((problem.n_perp, problem.m))
    b = rng.standard_normal(problem.n_perp)
    t = rng.standard_normal()
    scale = np.sqrt(np.sum(R * R) + b @ b + t * t)
    R, b, t = R / scale, b / scale, t / scale
    value = 0.0
    for _ in range(iterations):
        V = W @ R.T + b  # L
        xi_sum = problem.J * t
        R2 = V.T @ W  # L^T L
        b2 = V.sum(axis=0)
        t2 = xi_sum
        new_value = np.sqrt(np.sum(R2 * R2) + b2 @ b2 + t2 * t2)
        if new_value == 0.0:
            return 0.0
        R, b, t = R2 / new_value, b2 / new_value, t2 / new_value
        if abs(new_value - value) <= rtol * new_value:
            value = new_value
            break
        value = new_value
    return float(np.sqrt(value))


def project_epigraph(u, v, xi):
    """Euclidean projection of (v, xi) onto {(y, t) : ||u - y||^2 <= t}.

    Interior points are returned unchanged; otherwise the unique multiplier
    lambda > max(0, -xi) solving (xi + lambda)(1 + 2 lambda)^2 = ||v - u||^2
    is found by safeguarded Newton and the projection is
    (u + (v - u)/(1 + 2 lambda), xi + lambda).
    """
    u = np.atleast_1d(np.asarray(u, dtype=float))
    v = np.atleast_1d(np.asarray(v, dtype=float))
    y, t = project_epigraph_batch(u[None], v[None], np.array([float(xi)]))
    return y[0], float(t[0])


def project_epigraph_batch(U, V, xi, lam0=None):
    """Row-wise epigraph projection; U, V are (J, N), xi is (J,).

    ``lam0`` optionally warm-starts the multiplier solve (the multiplier of
    an active row equals the returned t minus the input xi, which lets
    iterative callers reuse the previous value).
    """
    U = np.asarray(U, dtype=float)
    V = np.asarray(V, dtype=float)
    xi = np.asarray(xi, dtype=float)
    Z = V - U
    z2 = np.einsum("ij,ij->i", Z, Z)
    active = z2 > xi
    if not active.any():
        return V.copy(), xi.copy()

    if active.all():
        lam = _epigraph_multiplier(z2, xi, lam0)
        shrink = 1.0 / (1.0 + 2.0 * lam)
        return U + Z * shrink[:, None], xi + lam

    Y = V.copy()
    t = xi.copy()
    z2a = z2[active]
    xia = xi[active]
    lam = _epigraph_multiplier(z2a, xia, None if lam0 is None else lam0[active])
    shrink = 1.0 / (1.0 + 2.0 * lam)
    Y[active] = U[active] + Z[active] * shrink[:, None]
    t[active] = xia + lam
    return Y, t


def _epigraph_multiplier(z2, xi, lam0=None):
    """Solve (xi + lam)(1 + 2 lam)^2 = z2 for lam > max(0, -xi), row-wise.

    The residual is increasing and convex on the admissible interval, so
    Newton clipped at the interval's lower end converges monotonically after
    the first step; the iteration cap is a safeguard only.
    """
    lo = np.maximum(0.0, -xi)
    lam = np.maximum(np.cbrt(0.25 * z2) if lam0 is None else lam0, lo)
    for _ in range(EPI_NEWTON_MAXITER):
        one2 = 1.0 + 2.0 * lam
        xl = xi + lam
        g = xl * one2 * one2 - z2
        dg = one2 * (one2 + 4.0 * xl)
        step = g / dg
        lam = np.maximum(lam - step, lo)
        if np.max(np.abs(step)) <= EPI_NEWTON_TOL * max(1.0, np.max(lam)):
            return lam
    raise NumericFailure("epigraph projection root finder hit its iteration cap")


def prox_dual_F(problem, V, xi, gamma_f):
    """Proximal map of the conjugate constraint term, via the Moreau identity."""
    if gamma_f <= 0:
        raise ValueError("gamma_f must be positive")
    Y, T = project_epigraph_batch(problem.targets, V / gamma_f, xi / gamma_f)
    return V - gamma_f * Y, xi - gamma_f * T


def prox_G(x, t, gamma_g):
    """Proximal map of G(x, t) = t: shift t down by the step, leave x alone."""
    if gamma_g <= 0:
        raise ValueError("gamma_g must be positive")
    return x, t - gamma_g


def _initial_rb(problem, init):
    if init is None:
        return np.zeros((problem.n_perp, problem.m)), np.zeros(problem.n_perp)
    if isinstance(init, AffineRecoveryMap):
        R, b = init.B, init.c
    else:
        R, b = init
    R = np.array(R, dtype=float)
    b = np.array(b, dtype=float)
    if R.shape != (problem.n_perp, problem.m) or b.shape != (problem.n_perp,):
        raise ValueError("warm start dimensions do not match the problem")
    if not (np.all(np.isfinite(R)) and np.all(np.isfinite(b))):
        raise ValueError("warm start must be finite")
    return R, b


def pd_fit(
    problem,
    max_iter=100_000,
    gamma_g=None,
    gamma_f=None,
    theta=1.0,
    init=None,
    log_every=1000,
    early_stop=False,
    early_tol=1e-12,
    early_window=1000,
    opnorm_iters=500,
    seed=0,
):
    """Primal-dual splitting for the worst-case affine fit.

    Runs ``max_iter`` iterations in the order primal step, extrapolation,
    dual step.  Step sizes default to 0.99/||L|| each, with the operator norm
    estimated by the power method and inflated by a 1% safety factor.  The
    primal starts at the zero correction (or a warm-start map), t at one, and
    the duals at the forward image of that point.

    Returns (map, log) where log rows are (iteration, squared objective,
    elapsed seconds).
    """
    opnorm = 1.01 * estimate_opnorm(problem, iterations=opnorm_iters, seed=seed)
    opnorm = max(opnorm, 1e-300)
    if gamma_g is None and gamma_f is None:
        gamma_g = gamma_f = 0.99 / opnorm
    elif gamma_g is None or gamma_f is None:
        raise ValueError("provide both step sizes or neither")

    R, b = _initial_rb(problem, init)
    t = 1.0
    W = problem.meas
    U = problem.targets
    V = W @ R.T + b
    xi = np.full(problem.J, t)

    state = PdState(
        R=R, b=b, t=t, R_bar=R.copy(), b_bar=b.copy(), t_bar=t,
        V=V, xi=xi, gamma_g=gamma_g, gamma_f=gamma_f, theta=theta, opnorm=opnorm,
    )

    log = []
    start = time.perf_counter()
    obj = _objective_rb(problem, R, b)
    log.append((0, obj, 0.0))
    window_best = obj

    R_bar, b_bar, t_bar = R.copy(), b.copy(), t
    lam_ws = None
    for k in range(1, max_iter + 1):
        # primal prox
        R_new = R - gamma_g * (V.T @ W)
        b_new = b - gamma_g * V.sum(axis=0)
        t_new = t - gamma_g * xi.sum() - gamma_g
        # extrapolation
        R_bar = R_new + theta * (R_new - R)
        b_bar = b_new + theta * (b_new - b)
        t_bar = t_new + theta * (t_new - t)
        R, b, t = R_new, b_new, t_new
        # dual prox
        V = V + gamma_f * (W @ R_bar.T + b_bar)
        xi = xi + gamma_f * t_bar
        xi_scaled = xi / gamma_f
        Y, T = project_epigraph_batch(U, V / gamma_f, xi_scaled, lam_ws)
        lam_ws = T - xi_scaled
        V = V - gamma_f * Y
        xi = xi - gamma_f * T

        if k % log_every == 0 or k == max_iter:
            obj = _objective_rb(problem, R, b)
            if not np.isfinite(obj):
                raise NumericFailure(
                    f"non-finite objective at iteration {k}; last finite log entry: {log[-1]}"
                )
            log.append((k, obj, time.perf_counter() - start))
            if early_stop and k % early_window == 0:
                if abs(window_best - obj) <= early_tol * max(abs(obj), 1e-300):
                    break
                window_best = obj

    state.R, state.b, state.t = R, b, t
    state.R_bar, state.b_bar, state.t_bar = R_bar, b_bar, t_bar
    state.V, state.xi = V, xi
    state.k = k
    state.history = log
    fitted = AffineRecoveryMap(m=problem.m, n_perp=problem.n_perp, B=R.copy(), c=b.copy())
    return fitted, log


def subgradient_fit(problem, max_iter=100_000, step0=1.0, init=None, log_every=1000):
    """Subgradient descent baseline on the worst squared residual.

    Each step picks the snapshot with the largest residual (smallest index on
    ties) and moves along the negative subgradient with step ``step0/sqrt(k)``.
    Tracks the best iterate seen.  Returns (best map, log) with log rows
    (iteration, best squared objective so far, elapsed seconds).
    """
    R, b = _initial_rb(problem, init)
    W = problem.meas
    U = problem.targets

    best_obj = _objective_rb(problem, R, b)
    best_R, best_b = R.copy(), b.copy()
    log = [(0, best_obj, 0.0)]
    start = time.perf_counter()
    for k in range(1, max_iter + 1):
        resid = U - W @ R.T - b
        norms2 = np.einsum("ij,ij->i", resid, resid)
        j = int(np.argmax(norms2))
        obj = float(norms2[j])
        if obj < best_obj:
            best_obj = obj
            best_R, best_b = R.copy(), b.copy()
        r = resid[j]
        step = step0 / np.sqrt(k)
        R = R + 2.0 * step * np.outer(r, W[j])
        b = b + 2.0 * step * r
        if k % log_every == 0 or k == max_iter:
            log.append((k, best_obj, time.perf_counter() - start))

    final_obj = _objective_rb(problem, R, b)
    if final_obj < best_obj:
        best_obj = final_obj
        best_R, best_b = R, b
        log.append((max_iter, best_obj, time.perf_counter() - start))
    fitted = AffineRecoveryMap(m=problem.m, n_perp=problem.n_perp, B=best_R, c=best_b)
    return fitted, log
