"""Single-source embedding in the anchor MDS frame.

Every method here minimises a member of the family

    1/2 (||x||^2 - b0)^2 + w * sum_i (<a_i, x> - b_i)^2

where the first term preserves the length of the new point and the second its
inner products with the anchors. ``w = 2/m`` is ordinary least squares on the
squared ranges, ``w = 1`` is the Trosset-Priebe objective, and dropping the
length term altogether gives the closed-form landmark MDS (Gower, AR) solution.
"""

from dataclasses import dataclass

import numpy as np

from . import gtrs
from .edm import as_points, map_to_anchor_frame, map_to_mds_frame, mds_lengths
from .exceptions import DimensionMismatchError

__all__ = [
    "LMDS",
    "LS",
    "TLMDS",
    "WEIGHTED",
    "SslRhs",
    "ObjectiveSpec",
    "ssl_rhs",
    "lmds_embed",
    "lmds_embed_pinv",
    "gower_embed",
    "objective_value",
    "ls_objective_original",
    "weighted_tlmds_solve",
    "localize",
    "weight_grid_search",
    "default_weight_grid",
]

LMDS = "lmds"
LS = "ls"
TLMDS = "tlmds"
WEIGHTED = "weighted"


@dataclass(frozen=True)
class SslRhs:
    """Data terms ``b0`` (target squared length) and ``b`` (target inner products)."""

    b0: float
    b: np.ndarray


@dataclass(frozen=True)
class ObjectiveSpec:
    kind: str
    weight: float = None

    def __post_init__(self):
        if self.kind not in (LMDS, LS, TLMDS, WEIGHTED):
            raise ValueError(f"unknown objective kind {self.kind!r}")
        if self.kind == WEIGHTED and not (self.weight is not None and self.weight > 0):
            raise ValueError("weighted objective needs a positive weight")

    def resolve_weight(self, m):
        """Numeric weight on the angle term (``None`` for the LMDS limit)."""
        if self.kind == LS:
            return 2.0 / m
        if self.kind == TLMDS:
            return 1.0
        if self.kind == WEIGHTED:
            return float(self.weight)
        return None


def _check_delta(frame, delta):
    delta = np.asarray(delta, dtype=float).ravel()
    if delta.size != frame.m:
        raise DimensionMismatchError(f"expected {frame.m} range observations, got {delta.size}")
    if not np.all(np.isfinite(delta)):
        raise ValueError("range observations must be finite")
    return delta


def ssl_rhs(frame, delta, D=None):
    """Compute ``b0`` and ``b`` from observed squared ranges ``delta``.

    ``b0 = mean(delta) - 1^T D 1 / (2 m^2)`` and ``b = 1/2 J (delta0 - delta)``
    with ``delta0 = D 1 / m``. ``D`` defaults to the frame's anchor matrix.
    """
    delta = _check_delta(frame, delta)
    D = frame.D if D is None else np.asarray(D, dtype=float)
    if D.shape != (frame.m, frame.m):
        raise DimensionMismatchError("D does not match the frame")
    m = frame.m
    delta0 = D.sum(axis=1) / m
    b0 = float(delta.mean() - D.sum() / (2.0 * m * m))
    diff = delta0 - delta
    b = 0.5 * (diff - diff.mean())
    return SslRhs(b0=b0, b=b)


def lmds_embed(frame, rhs):
    """Closed-form landmark MDS point ``Lambda^{-1} A b`` in the MDS frame."""
    return (frame.A @ rhs.b) / frame.eigenvalues


def lmds_embed_pinv(frame, delta):
    """Landmark MDS via the pseudo-inverse form ``-1/2 L# (delta - delta0)``."""
    delta = _check_delta(frame, delta)
    pinv = frame.U.T / np.sqrt(frame.eigenvalues)[:, None]
    return -0.5 * pinv @ (delta - frame.delta0)


def gower_embed(frame, delta):
    """Gower's point ``-1/2 Lambda^{-1} A (delta - d)`` with ``d_i = ||a_i||^2``."""
    delta = _check_delta(frame, delta)
    d = mds_lengths(frame.D)
    return -0.5 * (frame.A @ (delta - d)) / frame.eigenvalues


def objective_value(spec, frame, rhs, x):
    """Evaluate a family member at ``x`` (MDS frame).

    The LMDS kind returns only the angle term ``sum_i (<a_i, x> - b_i)^2``.
    """
    x = np.asarray(x, dtype=float)
    resid = frame.A.T @ x - rhs.b
    angle = float(resid @ resid)
    w = spec.resolve_weight(frame.m)
    if w is None:
        return angle
    length = float(x @ x) - rhs.b0
    return 0.5 * length * length + w * angle


def ls_objective_original(anchors, delta, x):
    """Least-squares range misfit ``1/(2m) sum_i (||x - x_i||^2 - delta_i)^2``."""
    anchors = as_points(anchors, "anchors")
    delta = np.asarray(delta, dtype=float).ravel()
    x = np.asarray(x, dtype=float).ravel()
    if delta.size != anchors.shape[0] or x.size != anchors.shape[1]:
        raise DimensionMismatchError("anchors, ranges and point disagree in size")
    resid = np.sum((anchors - x) ** 2, axis=1) - delta
    return float(resid @ resid) / (2.0 * anchors.shape[0])


def weighted_tlmds_solve(frame, rhs, w, eps=None, polish=True):
    """Global minimiser of the weighted objective with angle weight ``w``.

    Returns
    -------
    x : ndarray of shape (r,)
        Minimiser in the MDS frame.
    solution : GtrsSolution
        KKT certificate of the lifted problem.
    """
    prob = gtrs.build_ssl_problem(frame, rhs, w)
    sol = gtrs.solve(prob, eps=eps, polish=polish)
    return sol.x, sol


def localize(frame, delta, spec, eps=None):
    """Estimate a source in anchor coordinates under objective ``spec``."""
    rhs = ssl_rhs(frame, delta)
    w = spec.resolve_weight(frame.m)
    if w is None:
        x = lmds_embed(frame, rhs)
    else:
        x, _ = weighted_tlmds_solve(frame, rhs, w, eps=eps)
    return map_to_anchor_frame(frame, x)


def default_weight_grid():
    """Weights 0.01, 0.11, ..., 1.91: the interval [0.01, 2] at step 0.1."""
    return [round(0.01 + 0.1 * k, 10) for k in range(20)]


def weight_grid_search(frame, delta_trials, truth, grid=None, eps=None, return_errors=False):
    """Pick the weight with the smallest mean localisation error over trials.

    Parameters
    ----------
    frame : MdsFrame
    delta_trials : sequence of array-like
        Observed squared ranges, one vector per trial.
    truth : array-like of shape (r,)
        True source position in anchor coordinates.
    grid : sequence of float, optional
        Candidate weights; defaults to :func:`default_weight_grid`.
    return_errors : bool
        Also return the mean error of every grid weight.

    Ties (mean errors within round-off) go to the smaller weight.
    """
    grid = default_weight_grid() if grid is None else [float(w) for w in grid]
    if not grid or any(not w > 0 for w in grid):
        raise ValueError("grid must be a non-empty list of positive weights")
    truth_mds = map_to_mds_frame(frame, np.asarray(truth, dtype=float))
    rhss = [ssl_rhs(frame, d) for d in delta_trials]
    errors = []
    for w in grid:
        errs = [np.linalg.norm(weighted_tlmds_solve(frame, rhs, w, eps=eps)[0] - truth_mds)
                for rhs in rhss]
        errors.append(float(np.mean(errs)))
    # errors equal up to round-off count as ties
    tol = 1e-9 * (1.0 + float(np.linalg.norm(truth_mds)))
    floor = min(errors)
    best = min(w for w, e in zip(grid, errors) if e <= floor + tol)
    if return_errors:
        return best, errors
    return best
