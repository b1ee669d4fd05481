"""Scikit-learn style estimators for the four affine recovery strategies.

Each estimator consumes training coordinates (rows of measurement
coordinates ``W`` and matching complement coordinates ``U``), fits an affine
correction, and predicts complement coordinates from measurements.  They
follow the usual conventions: ``fit`` returns ``self``, fitted attributes
carry a trailing underscore, and ``get_params``/``set_params`` come from
``BaseEstimator`` so the maps compose with pipelines and model selection.
"""

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_array, check_is_fitted

from .exceptions import UnstableSpaceError  # noqa: F401  (re-raised by OneSpaceRecovery)
from .optim import MinMaxProblem, pd_fit, subgradient_fit
from .recovery import affine_one_space_map, minimal_norm_map, msa_fit, one_space_map
from .reduced import OrthonormalBasis, favorable_bases, greedy_reduced_basis


def _check_training(W, U):
    W = check_array(W, ensure_2d=True, dtype=float)
    U = check_array(U, ensure_2d=True, dtype=float)
    if W.shape[0] != U.shape[0]:
        raise ValueError(
            f"W and U must have the same number of rows, got {W.shape[0]} and {U.shape[0]}"
        )
    return W, U


class _RecoveryEstimator(BaseEstimator):
    """Shared predict/score surface over a fitted AffineRecoveryMap."""

    def predict(self, W):
        """Complement coordinates reconstructed from measurement coordinates."""
        check_is_fitted(self, "map_")
        W = check_array(W, ensure_2d=True, dtype=float)
        return self.map_.predict(W)

    def reconstruct(self, W):
        """Full ambient coordinates: the data followed by the predicted complement."""
        check_is_fitted(self, "map_")
        W = check_array(W, ensure_2d=True, dtype=float)
        return self.map_.full_coords(W)

    def worst_case_error(self, W, U):
        """Largest reconstruction error (unsquared) over the given pairs."""
        resid = self.predict(W) - check_array(U, ensure_2d=True, dtype=float)
        return float(np.sqrt(np.max(np.einsum("ij,ij->i", resid, resid))))

    def score(self, W, U):
        """Negative worst-case error, so larger is better."""
        return -self.worst_case_error(W, U)


class MinimalNormRecovery(_RecoveryEstimator):
    """Reconstruct the measured projection only (zero complement correction)."""

    def fit(self, W, U):
        W, U = _check_training(W, U)
        self.map_ = minimal_norm_map(W.shape[1], U.shape[1])
        return self


class MeanSquareRecovery(_RecoveryEstimator):
    """Affine map minimizing the mean-square training error.

    Parameters
    ----------
    rcond : float
        Relative singular-value cutoff for the pseudoinverse of the
        measurement covariance block.
    ridge : float
        Optional Tikhonov term added to that block instead of the
        pseudoinverse; zero keeps the estimator exact on degenerate data.
    """

    def __init__(self, rcond=1e-12, ridge=0.0):
        self.rcond = rcond
        self.ridge = ridge

    def fit(self, W, U):
        W, U = _check_training(W, U)
        self.map_ = msa_fit(W, U, rcond=self.rcond, ridge=self.ridge)
        return self


class OneSpaceRecovery(_RecoveryEstimator):
    """Recovery through an n-dimensional reduced space built from the training set.

    A greedy pass over the (optionally recentered) training coordinates
    selects the reduced space; the favorable-basis rotation against the
    measurement block then yields the interpolating map.

    Parameters
    ----------
    n : int
        Reduced space dimension, at most the measurement count.
    affine : bool
        Recenter around the training mean and add it back as an offset.
    """

    def __init__(self, n=1, affine=True):
        self.n = n
        self.affine = affine

    def fit(self, W, U):
        W, U = _check_training(W, U)
        m = W.shape[1]
        if not (1 <= self.n <= m):
            raise ValueError(f"n must be in [1, {m}], got {self.n}")
        coords = np.hstack([W, U])
        ubar = coords.mean(axis=0) if self.affine else np.zeros(coords.shape[1])
        reduced = greedy_reduced_basis(coords - ubar, self.n)
        if reduced.n < self.n:
            raise ValueError(
                f"training set supports at most n={reduced.n}, requested {self.n}"
            )
        wb = OrthonormalBasis(np.eye(coords.shape[1])[:m])
        pair = favorable_bases(reduced.basis, wb)
        if self.affine:
            self.map_ = affine_one_space_map(pair, ubar)
        else:
            self.map_ = one_space_map(pair)
        self.pair_ = pair
        return self


class WorstCaseRecovery(_RecoveryEstimator):
    """Affine map minimizing the worst-case training error via primal-dual splitting.

    Parameters mirror the solver: iteration budget, optional explicit step
    sizes (defaults derive from a power-method estimate of the operator
    norm), extrapolation parameter, logging stride, and optional early stop
    on a stalled objective.
    """

    def __init__(
        self,
        max_iter=100_000,
        gamma_g=None,
        gamma_f=None,
        theta=1.0,
        init=None,
        log_every=1000,
        early_stop=False,
        seed=0,
    ):
        self.max_iter = max_iter
        self.gamma_g = gamma_g
        self.gamma_f = gamma_f
        self.theta = theta
        self.init = init
        self.log_every = log_every
        self.early_stop = early_stop
        self.seed = seed

    def fit(self, W, U):
        W, U = _check_training(W, U)
        problem = MinMaxProblem(W, U)
        self.map_, self.history_ = pd_fit(
            problem,
            max_iter=self.max_iter,
            gamma_g=self.gamma_g,
            gamma_f=self.gamma_f,
            theta=self.theta,
            init=self.init,
            log_every=self.log_every,
            early_stop=self.early_stop,
            seed=self.seed,
        )
        return self


class SubgradientRecovery(_RecoveryEstimator):
    """Subgradient-descent baseline for the worst-case training objective."""

    def __init__(self, max_iter=100_000, step0=1.0, init=None, log_every=1000):
        self.max_iter = max_iter
        self.step0 = step0
        self.init = init
        self.log_every = log_every

    def fit(self, W, U):
        W, U = _check_training(W, U)
        problem = MinMaxProblem(W, U)
        self.map_, self.history_ = subgradient_fit(
            problem,
            max_iter=self.max_iter,
            step0=self.step0,
            init=self.init,
            log_every=self.log_every,
        )
        return self
