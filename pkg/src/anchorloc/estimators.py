"""scikit-learn style front end.

Each estimator is fitted on anchor coordinates ``(m, r)`` and transforms
squared range measurements into source coordinates in the anchor frame::

    est = WeightedTLMDS(weight="ls").fit(anchors)
    positions = est.transform(delta)      # delta: (n_sources, m)
"""

import numbers

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from . import msl
from .edm import edm_from_points, map_to_anchor_frame, mds_frame
from .exceptions import DimensionMismatchError
from .ssl import lmds_embed, ssl_rhs, weighted_tlmds_solve

__all__ = ["LandmarkMDS", "WeightedTLMDS", "MultiSourceTLMDS"]


class _AnchorFrameMixin:
    def fit(self, X, y=None):
        """Build the MDS frame of the anchors ``X`` (shape ``(m, r)``)."""
        X = check_array(X, ensure_min_samples=2)
        self.frame_ = mds_frame(edm_from_points(X), X, rank_tol=self.rank_tol)
        self.n_features_in_ = X.shape[1]
        self.n_anchors_ = X.shape[0]
        return self

    def _check_ranges(self, delta):
        check_is_fitted(self, "frame_")
        delta = check_array(delta, ensure_2d=False)
        if delta.ndim == 1:
            delta = delta[None, :]
        if delta.shape[1] != self.n_anchors_:
            raise DimensionMismatchError(
                f"expected {self.n_anchors_} ranges per source, got {delta.shape[1]}"
            )
        return delta


class LandmarkMDS(_AnchorFrameMixin, TransformerMixin, BaseEstimator):
    """Closed-form landmark MDS (equivalently Gower's and Anderson-Robinson's) embedding.

    Parameters
    ----------
    rank_tol : float, default=1e-9
        Relative eigenvalue threshold for the anchor frame.

    Attributes
    ----------
    frame_ : MdsFrame
    """

    def __init__(self, rank_tol=1e-9):
        self.rank_tol = rank_tol

    def transform(self, X):
        """Map squared ranges ``X`` of shape ``(n_sources, m)`` to coordinates ``(n_sources, r)``."""
        X = self._check_ranges(X)
        out = [lmds_embed(self.frame_, ssl_rhs(self.frame_, row)) for row in X]
        return map_to_anchor_frame(self.frame_, np.array(out))


class WeightedTLMDS(_AnchorFrameMixin, TransformerMixin, BaseEstimator):
    """Globally optimal weighted total-LMDS localisation.

    Minimises ``1/2 (||x||^2 - b0)^2 + w sum_i (<a_i, x> - b_i)^2`` per source.

    Parameters
    ----------
    weight : float or {"ls", "tlmds"}, default="tlmds"
        Angle-term weight. ``"ls"`` uses ``2/m`` (range least squares) and
        ``"tlmds"`` uses 1 (Trosset-Priebe).
    eps : float, optional
        Multiplier bisection tolerance.
    polish : bool, default=True
        Newton refinement after bisection.
    rank_tol : float, default=1e-9
    """

    def __init__(self, weight="tlmds", eps=None, polish=True, rank_tol=1e-9):
        self.weight = weight
        self.eps = eps
        self.polish = polish
        self.rank_tol = rank_tol

    def _resolved_weight(self):
        if isinstance(self.weight, str):
            if self.weight == "ls":
                return 2.0 / self.n_anchors_
            if self.weight == "tlmds":
                return 1.0
            raise ValueError(f"unknown weight {self.weight!r}")
        if not isinstance(self.weight, numbers.Real) or not self.weight > 0:
            raise ValueError("weight must be positive")
        return float(self.weight)

    def solve(self, X):
        """Like :meth:`transform` but also return the KKT certificate of every source."""
        X = self._check_ranges(X)
        w = self._resolved_weight()
        pts, sols = [], []
        for row in X:
            x, sol = weighted_tlmds_solve(self.frame_, ssl_rhs(self.frame_, row), w,
                                          eps=self.eps, polish=self.polish)
            pts.append(x)
            sols.append(sol)
        return map_to_anchor_frame(self.frame_, np.array(pts)), sols

    def transform(self, X):
        return self.solve(X)[0]


class MultiSourceTLMDS(_AnchorFrameMixin, TransformerMixin, BaseEstimator):
    """Joint localisation of several sources with optional source-source ranges.

    Parameters
    ----------
    eps : float, optional
        Stopping tolerance on the Frobenius change of the iterate.
    max_sweeps : int, default=500
    rank_tol : float, default=1e-9

    Attributes
    ----------
    frame_ : MdsFrame
    result_ : MslResult
        Diagnostics of the most recent :meth:`transform` call.
    """

    def __init__(self, eps=None, max_sweeps=500, rank_tol=1e-9):
        self.eps = eps
        self.max_sweeps = max_sweeps
        self.rank_tol = rank_tol

    def transform(self, X, F=None):
        """Localise sources.

        Parameters
        ----------
        X : array-like of shape (n_sources, m)
            Squared ranges from each source to every anchor (the transpose of ``E``).
        F : array-like of shape (n_sources, n_sources), optional
            Source-source squared ranges with ``NaN`` where unobserved.
        """
        X = self._check_ranges(X)
        scene = msl.make_scene(self.frame_, X.T, F)
        self.result_ = msl.bmsl_solve(scene, eps=self.eps, max_sweeps=self.max_sweeps)
        return self.result_.Y_anchor
