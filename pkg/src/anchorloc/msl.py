"""Multiple-source localisation by alternating global block updates.

Sources are stored as rows of ``(n, r)`` arrays. Unobserved source-source
ranges are ``NaN`` in ``F`` and ``False`` in the boolean mask ``omega``; they
are never read.

The objective minimised is

    sum_i [ 1/2 (||y_i||^2 - Fbar_ii)^2 + ||A^T y_i - b_i||^2 ]
      + sum_{i<j, (i,j) observed} (<y_i, y_j> - Fbar_ij)^2

and each sweep replaces ``y_1, ..., y_n`` in turn by the global minimiser of
its block, found with :func:`anchorloc.gtrs.solve`.
"""

from dataclasses import dataclass, field

import numpy as np

from . import gtrs
from .edm import map_to_anchor_frame
from .exceptions import DimensionMismatchError

__all__ = [
    "MslScene",
    "MslDerived",
    "MslResult",
    "make_scene",
    "msl_derive",
    "msl_objective",
    "block_objective",
    "build_subproblem",
    "lmds_init",
    "bmsl_solve",
]


@dataclass(frozen=True)
class MslScene:
    """Observed data for a multiple-source problem.

    Attributes
    ----------
    frame : MdsFrame
    E : ndarray of shape (m, n)
        Anchor-to-source squared ranges, fully observed.
    F : ndarray of shape (n, n)
        Source-to-source squared ranges; ``NaN`` where unobserved.
    omega : ndarray of bool, shape (n, n)
        Observation mask; symmetric with a false diagonal.
    """

    frame: object
    E: np.ndarray
    F: np.ndarray
    omega: np.ndarray

    @property
    def n(self):
        return self.E.shape[1]

    def neighbors(self, i):
        return np.flatnonzero(self.omega[i])


def make_scene(frame, E, F=None, omega=None):
    """Validate inputs and build an :class:`MslScene`.

    If ``omega`` is omitted it is read from the finite off-diagonal entries of ``F``.
    Entries of ``F`` outside ``omega`` are replaced by ``NaN``.
    """
    E = np.array(E, dtype=float)
    if E.ndim != 2 or E.shape[0] != frame.m:
        raise DimensionMismatchError(f"E must have {frame.m} rows (one per anchor)")
    if not np.all(np.isfinite(E)):
        raise ValueError("E must be fully observed")
    n = E.shape[1]
    if F is None:
        F = np.full((n, n), np.nan)
    F = np.array(F, dtype=float)
    if F.shape != (n, n):
        raise DimensionMismatchError(f"F must be {n}x{n}")
    if omega is None:
        omega = np.isfinite(F)
    omega = np.array(omega, dtype=bool)
    if omega.shape != (n, n):
        raise DimensionMismatchError(f"omega must be {n}x{n}")
    np.fill_diagonal(omega, False)
    if not np.array_equal(omega, omega.T):
        raise ValueError("observation mask must be symmetric")
    if not np.all(np.isfinite(F[omega])):
        raise ValueError("F has missing values inside the observation mask")
    F = np.where(omega, F, np.nan)
    if not np.allclose(F[omega], F.T[omega]):
        raise ValueError("F must be symmetric on observed entries")
    np.fill_diagonal(F, 0.0)
    for arr in (E, F, omega):
        arr.setflags(write=False)
    return MslScene(frame=frame, E=E, F=F, omega=omega)


@dataclass(frozen=True)
class MslDerived:
    """Centred data blocks.

    Attributes
    ----------
    Ebar : ndarray of shape (m, n)
        ``J (E - delta0 1^T)``; at exact data ``A^T Y^T = -Ebar / 2``.
    Fbar : ndarray of shape (n, n)
        Target Gram matrix of the sources: ``Fbar_ij`` approximates
        ``<y_i, y_j>``. ``NaN`` off the mask, always defined on the diagonal.
    B : ndarray of shape (m, n)
        Column ``i`` is ``b_i = 1/2 J (delta0 - delta_i)``, i.e. ``-Ebar / 2``.
    """

    Ebar: np.ndarray
    Fbar: np.ndarray
    B: np.ndarray


def msl_derive(scene, D=None):
    """Centre the observed blocks against the anchor centroid."""
    frame = scene.frame
    D = frame.D if D is None else np.asarray(D, dtype=float)
    m = frame.m
    delta0 = D.sum(axis=1) / m
    Ec = scene.E - delta0[:, None]
    Ebar = Ec - Ec.mean(axis=0, keepdims=True)
    col = scene.E.mean(axis=0)
    const = D.sum() / m ** 2
    # -1/2 [F - (E^T 1 1^T + 1 1^T E)/m + (1^T D 1/m^2) 1 1^T]
    raw = scene.F - col[:, None] - col[None, :] + const
    Fbar = -0.5 * raw
    mask = scene.omega | np.eye(scene.n, dtype=bool)
    Fbar = np.where(mask, Fbar, np.nan)
    B = -0.5 * Ebar
    return MslDerived(Ebar=Ebar, Fbar=Fbar, B=B)


def block_objective(scene, derived, i, Y, yi=None):
    """``f_i(y_i) + F_i(y_i, Y_(-i))``: every term of the objective touching source ``i``."""
    A = scene.frame.A
    yi = Y[i] if yi is None else np.asarray(yi, dtype=float)
    r_ang = A.T @ yi - derived.B[:, i]
    val = 0.5 * (yi @ yi - derived.Fbar[i, i]) ** 2 + r_ang @ r_ang
    nb = scene.neighbors(i)
    if nb.size:
        r_pair = Y[nb] @ yi - derived.Fbar[i, nb]
        val += r_pair @ r_pair
    return float(val)


def msl_objective(scene, derived, Y):
    """Total objective; every observed source pair is counted once."""
    A = scene.frame.A
    Y = np.asarray(Y, dtype=float)
    R = A.T @ Y.T - derived.B
    lengths = np.einsum("ij,ij->i", Y, Y) - np.diag(derived.Fbar)
    total = 0.5 * float(lengths @ lengths) + float(np.sum(R * R))
    iu, ju = np.nonzero(np.triu(scene.omega, 1))
    if iu.size:
        pair = np.einsum("ij,ij->i", Y[iu], Y[ju]) - derived.Fbar[iu, ju]
        total += float(pair @ pair)
    return total


def build_subproblem(scene, derived, i, Y):
    """Lifted problem for source ``i`` with the other sources held at ``Y``.

    ``H = 2 Lambda + 2 sum_j y_j y_j^T``, ``g = 2 A b_i + 2 sum_j Fbar_ij y_j``,
    ``beta = Fbar_ii``, summing over the observed neighbours ``j`` of ``i``.
    The problem's objective equals :func:`block_objective` exactly.
    """
    frame = scene.frame
    lam = frame.eigenvalues
    b_i = derived.B[:, i]
    H = np.diag(2.0 * lam)
    g = 2.0 * (frame.A @ b_i)
    beta = float(derived.Fbar[i, i])
    offset = float(b_i @ b_i) + 0.5 * beta * beta
    nb = scene.neighbors(i)
    if nb.size:
        Yn = np.asarray(Y, dtype=float)[nb]
        f = derived.Fbar[i, nb]
        H = H + 2.0 * Yn.T @ Yn
        g = g + 2.0 * Yn.T @ f
        offset += float(f @ f)
    return gtrs.GtrsProblem.from_arrays(H, g, beta, offset=offset)


def lmds_init(scene, derived=None):
    """Column-wise landmark MDS for every source (MDS frame, ``(n, r)``)."""
    derived = msl_derive(scene) if derived is None else derived
    frame = scene.frame
    return ((frame.A @ derived.B) / frame.eigenvalues[:, None]).T


@dataclass
class MslResult:
    """Outcome of :func:`bmsl_solve`.

    ``history[k]`` is the objective after ``k`` sweeps (``history[0]`` at the
    initial point). ``converged`` is False when ``max_sweeps`` ran out first; the
    last iterate is still returned.
    """

    Y_mds: np.ndarray
    Y_anchor: np.ndarray
    history: list = field(default_factory=list)
    steps: list = field(default_factory=list)
    sweeps: int = 0
    converged: bool = False
    block_history: list = field(default_factory=list, repr=False)


def bmsl_solve(scene, D=None, eps=None, max_sweeps=500, Y0=None, gtrs_eps=None,
               record_blocks=False):
    """Alternating block minimisation for multiple sources.

    Parameters
    ----------
    scene : MslScene
    D : ndarray, optional
        Anchor distance matrix; defaults to the frame's.
    eps : float, optional
        Stop when the Frobenius change of the iterate is at most ``eps``.
        Defaults to ``1e-6 * (1 + ||Y0||_F)``.
    max_sweeps : int, default=500
    Y0 : array-like of shape (n, r), optional
        Warm start in the MDS frame; defaults to landmark MDS on ``E``.
    gtrs_eps : float, optional
        Bisection tolerance handed to each block solve.
    record_blocks : bool
        Keep the objective after every single block update.

    Returns
    -------
    MslResult
    """
    if max_sweeps < 1:
        raise ValueError("max_sweeps must be at least 1")
    derived = msl_derive(scene, D)
    Y = lmds_init(scene, derived) if Y0 is None else np.array(Y0, dtype=float)
    if Y.shape != (scene.n, scene.frame.r):
        raise DimensionMismatchError(f"Y0 must have shape {(scene.n, scene.frame.r)}")
    if eps is None:
        eps = 1e-6 * (1.0 + float(np.linalg.norm(Y)))
    if not eps > 0:
        raise ValueError("eps must be positive")

    result = MslResult(Y_mds=Y, Y_anchor=None)
    result.history.append(msl_objective(scene, derived, Y))
    for sweep in range(1, max_sweeps + 1):
        prev = Y.copy()
        for i in range(scene.n):
            # an isolated source's block never changes after the first sweep
            if sweep == 1 or scene.omega[i].any():
                prob = build_subproblem(scene, derived, i, Y)
                Y[i] = gtrs.solve(prob, eps=gtrs_eps).x
            if record_blocks:
                result.block_history.append(msl_objective(scene, derived, Y))
        step = float(np.linalg.norm(Y - prev))
        result.steps.append(step)
        result.history.append(msl_objective(scene, derived, Y))
        result.sweeps = sweep
        if step <= eps:
            result.converged = True
            break
    result.Y_mds = Y
    result.Y_anchor = map_to_anchor_frame(scene.frame, Y)
    return result
