"""Euclidean distance matrices and the classical-MDS frame of the anchors.

Point sets are ``(count, r)`` arrays, one point per row. The MDS embedding
``A`` follows the column convention: it is ``(r, m)`` with ``a_i = A[:, i]``.
"""

from dataclasses import dataclass

import numpy as np

from .exceptions import DimensionMismatchError, NotEuclideanError, RankDeficientError

__all__ = [
    "MdsFrame",
    "as_points",
    "edm_from_points",
    "double_center",
    "mds_frame",
    "mds_lengths",
    "map_to_anchor_frame",
    "map_to_mds_frame",
]


def as_points(points, name="points"):
    """Validate a point set and return it as a 2-D float array ``(count, r)``."""
    pts = np.asarray(points, dtype=float)
    if pts.ndim == 1:
        pts = pts[:, None]
    if pts.ndim != 2 or pts.shape[0] < 1 or pts.shape[1] < 1:
        raise DimensionMismatchError(f"{name} must be a non-empty (count, r) array")
    if not np.all(np.isfinite(pts)):
        raise ValueError(f"{name} contains non-finite coordinates")
    return pts


def edm_from_points(points):
    """Squared Euclidean distance matrix of a point set.

    Parameters
    ----------
    points : array-like of shape (m, r)

    Returns
    -------
    D : ndarray of shape (m, m)
        ``D[i, j] = ||x_i - x_j||^2``; symmetric with an exact zero diagonal.
    """
    pts = as_points(points)
    sq = np.einsum("ij,ij->i", pts, pts)
    D = sq[:, None] + sq[None, :] - 2.0 * pts @ pts.T
    D = 0.5 * (D + D.T)
    np.fill_diagonal(D, 0.0)
    # cancellation can leave tiny negatives
    return np.maximum(D, 0.0)


def _check_square(D):
    D = np.asarray(D, dtype=float)
    if D.ndim != 2 or D.shape[0] != D.shape[1]:
        raise DimensionMismatchError("distance matrix must be square")
    return D


def double_center(D):
    """Return ``B = -1/2 J D J`` with ``J = I - 11^T/m``."""
    D = _check_square(D)
    # J D J without forming J
    Dc = D - D.mean(axis=0, keepdims=True)
    Dc = Dc - Dc.mean(axis=1, keepdims=True)
    B = -0.5 * Dc
    return 0.5 * (B + B.T)


def mds_lengths(D):
    """Squared lengths ``||a_i||^2`` of the MDS points, read directly off ``D``."""
    D = _check_square(D)
    m = D.shape[0]
    return D.sum(axis=1) / m - D.sum() / (2.0 * m * m)


@dataclass(frozen=True)
class MdsFrame:
    """Anchor MDS coordinate system plus the Procrustes map back to the anchors.

    Attributes
    ----------
    A : ndarray of shape (r, m)
        MDS embedding ``Lambda^{1/2} U_r^T``; column ``i`` is ``a_i``.
    eigenvalues : ndarray of shape (r,)
        Positive eigenvalues of the double-centred matrix, descending.
    U : ndarray of shape (m, r)
        Matching orthonormal eigenvectors.
    x0 : ndarray of shape (r,)
        Anchor centroid.
    P : ndarray of shape (r, r)
        Orthogonal map with ``x_i = P a_i + x0``.
    D : ndarray of shape (m, m)
        Anchor distance matrix the frame was built from.
    anchors : ndarray of shape (m, r)
    """

    A: np.ndarray
    eigenvalues: np.ndarray
    U: np.ndarray
    x0: np.ndarray
    P: np.ndarray
    D: np.ndarray
    anchors: np.ndarray

    @property
    def m(self):
        return self.A.shape[1]

    @property
    def r(self):
        return self.A.shape[0]

    @property
    def delta0(self):
        """Column mean of ``D``."""
        return self.D.mean(axis=1)

    def __post_init__(self):
        for name in ("A", "eigenvalues", "U", "x0", "P", "D", "anchors"):
            getattr(self, name).setflags(write=False)


def _fix_signs(U):
    idx = np.argmax(np.abs(U), axis=0)
    signs = np.sign(U[idx, np.arange(U.shape[1])])
    signs[signs == 0] = 1.0
    return U * signs


def mds_frame(D, anchors, rank_tol=1e-9):
    """Build the MDS coordinate system of the anchors.

    Parameters
    ----------
    D : array-like of shape (m, m)
        Squared distances among the anchors.
    anchors : array-like of shape (m, r)
        Anchor coordinates; ``r`` fixes the required rank.
    rank_tol : float, default=1e-9
        Eigenvalues at or below ``rank_tol * lambda_1`` count as zero.

    Returns
    -------
    MdsFrame

    Raises
    ------
    RankDeficientError
        If fewer than ``r`` eigenvalues are significant.
    NotEuclideanError
        If ``D`` has a significant negative eigenvalue or more than ``r``
        significant positive ones.
    """
    anchors = as_points(anchors, "anchors")
    D = _check_square(D)
    m, r = anchors.shape
    if D.shape[0] != m:
        raise DimensionMismatchError(f"D is {D.shape[0]}x{D.shape[0]} but there are {m} anchors")
    if not np.allclose(D, D.T, rtol=0, atol=1e-12 * (1 + np.abs(D).max())):
        raise NotEuclideanError("distance matrix is not symmetric")

    B = double_center(D)
    evals, evecs = np.linalg.eigh(B)
    order = np.argsort(evals)[::-1]
    evals, evecs = evals[order], evecs[:, order]
    top = max(evals[0], 0.0)
    thresh = rank_tol * top
    n_pos = int(np.sum(evals > thresh))
    if top <= 0 or n_pos < r:
        raise RankDeficientError(
            f"anchors span {n_pos} dimension(s); {r} required "
            "(are they collinear / coplanar?)"
        )
    if n_pos > r or evals[-1] < -thresh:
        raise NotEuclideanError(
            f"distance matrix is not Euclidean in dimension {r} "
            f"(eigenvalues {evals[r]:.3g} ... {evals[-1]:.3g} should vanish)"
        )

    lam = evals[:r].copy()
    U = _fix_signs(evecs[:, :r])
    A = np.sqrt(lam)[:, None] * U.T

    x0 = anchors.mean(axis=0)
    Xc = anchors - x0
    Us, _, Vt = np.linalg.svd(A @ Xc)
    P = Vt.T @ Us.T
    return MdsFrame(A=A, eigenvalues=lam, U=U, x0=x0, P=P, D=D.copy(), anchors=anchors.copy())


def map_to_anchor_frame(frame, p):
    """Map MDS-frame point(s) to anchor coordinates: ``P p + x0``.

    ``p`` may be a single vector ``(r,)`` or a stack of points ``(n, r)``.
    """
    p = np.asarray(p, dtype=float)
    if p.shape[-1] != frame.r:
        raise DimensionMismatchError(f"expected points of dimension {frame.r}")
    return p @ frame.P.T + frame.x0


def map_to_mds_frame(frame, x):
    """Inverse of :func:`map_to_anchor_frame`: ``P^T (x - x0)``."""
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != frame.r:
        raise DimensionMismatchError(f"expected points of dimension {frame.r}")
    return (x - frame.x0) @ frame.P
