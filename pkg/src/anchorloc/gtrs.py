"""Global solver for the lifted quadratic problem

    minimize    1/2 x^T H x - g^T x + 1/2 y^2 - beta * y
    subject to  y = ||x||^2

with ``H`` symmetric positive semidefinite. KKT conditions, which are also
sufficient for global optimality here, read

    (H + lam I) x = g,   y = beta + lam / 2,   y = ||x||^2,   lam >= -mu_min(H).

The multiplier is located by bisection on ``psi(lam) = ||x(lam)||^2 - lam/2 - beta``,
strictly decreasing on ``(-mu_min, inf)``. The boundary multiplier (hard case)
is detected and completed in closed form.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .exceptions import NoConvergenceError, OutOfDomainError

__all__ = [
    "EASY",
    "HARD",
    "INTERIOR_ZERO",
    "GtrsProblem",
    "GtrsSolution",
    "build_ssl_problem",
    "psi",
    "psi_derivative",
    "lambda_bracket",
    "hard_case_check",
    "kkt_residuals",
    "solve",
]

EASY = "easy"
HARD = "hard"
INTERIOR_ZERO = "interior-zero"


@dataclass(frozen=True)
class GtrsProblem:
    """Problem data ``(H, g, beta)`` with its cached spectrum.

    Attributes
    ----------
    H : ndarray of shape (r, r)
    g : ndarray of shape (r,)
    beta : float
    mu : ndarray of shape (r,)
        Eigenvalues of ``H``, descending.
    V : ndarray of shape (r, r)
        Orthonormal eigenvectors (columns) matching ``mu``.
    offset : float
        Constant added by :meth:`objective` so that it reproduces the original
        least-squares value (``1/2 ||b_bar||^2``).
    ssl_weight : float or None
        Set for single-source problems; selects the closed-form upper bracket.
    """

    H: np.ndarray
    g: np.ndarray
    beta: float
    mu: np.ndarray = field(repr=False)
    V: np.ndarray = field(repr=False)
    offset: float = 0.0
    ssl_weight: float = None

    @classmethod
    def from_arrays(cls, H, g, beta, offset=0.0, ssl_weight=None):
        H = np.asarray(H, dtype=float)
        g = np.asarray(g, dtype=float).ravel()
        if H.ndim != 2 or H.shape[0] != H.shape[1] or H.shape[0] != g.size:
            raise ValueError("H must be square and match the length of g")
        H = 0.5 * (H + H.T)
        if np.count_nonzero(H - np.diag(np.diag(H))) == 0:
            d = np.diag(H)
            order = np.argsort(d, kind="stable")[::-1]
            mu = d[order]
            V = np.eye(H.shape[0])[:, order]
        else:
            mu, V = np.linalg.eigh(H)
            mu, V = mu[::-1], V[:, ::-1]
        mu = np.maximum(mu, 0.0)
        return cls(H=H, g=g, beta=float(beta), mu=mu, V=V, offset=float(offset),
                   ssl_weight=ssl_weight)

    @property
    def dim(self):
        return self.g.size

    @property
    def mu_min(self):
        return float(self.mu[-1])

    @property
    def g_hat(self):
        """``g`` expressed in the eigenbasis of ``H``."""
        return self.V.T @ self.g

    def x_of_lambda(self, lam):
        lam = float(lam)
        shifted = self.mu + lam
        if np.any(shifted <= 0):
            raise OutOfDomainError(f"lambda={lam!r} is outside (-{self.mu_min!r}, inf)")
        return self.V @ (self.g_hat / shifted)

    def objective(self, x, y=None):
        """``1/2 x^T H x - g^T x + 1/2 y^2 - beta y + offset``; ``y`` defaults to ``||x||^2``."""
        x = np.asarray(x, dtype=float)
        if y is None:
            y = float(x @ x)
        return 0.5 * x @ self.H @ x - self.g @ x + 0.5 * y * y - self.beta * y + self.offset


@dataclass(frozen=True)
class GtrsSolution:
    x: np.ndarray
    y: float
    lam: float
    branch: str
    kkt_residual: float
    iterations: int = 0
    objective: float = float("nan")


def build_ssl_problem(frame, rhs, w):
    """Lift the weighted single-source objective into a :class:`GtrsProblem`.

    ``H = 2w diag(Lambda)``, ``g = 2w A b``, ``beta = b0``.
    """
    w = float(w)
    if not w > 0:
        raise ValueError("weight must be positive")
    lam = frame.eigenvalues
    H = np.diag(2.0 * w * lam)
    g = 2.0 * w * (frame.A @ rhs.b)
    offset = w * float(rhs.b @ rhs.b) + 0.5 * rhs.b0 ** 2
    # H is already diagonal with descending entries; skip eigh
    return GtrsProblem(H=H, g=g, beta=float(rhs.b0), mu=2.0 * w * lam,
                       V=np.eye(lam.size), offset=offset, ssl_weight=w)


def _psi_scalar(mu, gh2, beta, lam):
    s = 0.0
    for mi, gi in zip(mu, gh2):
        d = mi + lam
        s += gi / (d * d)
    return s - 0.5 * lam - beta


def psi(prob, lam):
    """Constraint residual ``||x(lam)||^2 - lam/2 - beta`` on the PD interval."""
    lam = float(lam)
    if lam <= -prob.mu_min:
        raise OutOfDomainError(f"lambda={lam!r} is outside (-{prob.mu_min!r}, inf)")
    gh = prob.g_hat
    return _psi_scalar(prob.mu.tolist(), (gh * gh).tolist(), prob.beta, lam)


def psi_derivative(prob, lam):
    gh = prob.g_hat
    d = prob.mu + float(lam)
    return float(-2.0 * np.sum(gh * gh / d ** 3) - 0.5)


def lambda_bracket(prob, max_doublings=200):
    """Return ``(lo, hi)`` with ``lo = -mu_min`` and ``psi(hi) < 0``.

    For single-source problems ``hi`` is
    ``2 max{ ||A b||^2 / (lambda_r + 1)^2 - b0, w }``. For generic problems the
    analogue ``max{ 2 (||g||^2 / (mu_min + 1)^2 - beta), 1 }`` is used. Either
    bound is checked and doubled until ``psi(hi) < 0``, so the root lies strictly
    inside.
    """
    lo = -prob.mu_min
    gnorm2 = float(prob.g @ prob.g)
    if prob.ssl_weight is not None:
        w = prob.ssl_weight
        ab2 = gnorm2 / (2.0 * w) ** 2
        lam_r = prob.mu_min / (2.0 * w)
        hi = 2.0 * max(ab2 / (lam_r + 1.0) ** 2 - prob.beta, w)
    else:
        hi = max(2.0 * (gnorm2 / (prob.mu_min + 1.0) ** 2 - prob.beta), 1.0)
    step = max(hi - lo, 1.0)
    for _ in range(max_doublings):
        if hi > lo and psi(prob, hi) < 0:
            return lo, hi
        hi = lo + 2.0 * step
        step *= 2.0
    raise NoConvergenceError("could not bracket the multiplier")


def kkt_residuals(prob, x, y, lam):
    """Individual KKT residuals: stationarity, multiplier link, feasibility, PSD gap."""
    x = np.asarray(x, dtype=float)
    stat = float(np.linalg.norm(prob.H @ x + lam * x - prob.g))
    link = abs(y - prob.beta - 0.5 * lam)
    feas = abs(y - float(x @ x))
    psd = max(0.0, -(prob.mu_min + lam))
    return stat, link, feas, psd


def _kkt_scalar(prob, x, y, lam):
    stat, link, feas, psd = kkt_residuals(prob, x, y, lam)
    gn = float(np.linalg.norm(prob.g))
    return max(stat / (1.0 + gn), link / (1.0 + abs(prob.beta)), feas / (1.0 + abs(y)), psd)


def _finish(prob, x, y, lam, branch, iterations=0):
    return GtrsSolution(
        x=x, y=float(y), lam=float(lam), branch=branch,
        kkt_residual=_kkt_scalar(prob, x, y, lam), iterations=iterations,
        objective=float(prob.objective(x, y)),
    )


def hard_case_check(prob, tol=1e-8):
    """Closed-form solution when the optimal multiplier is ``-mu_min``.

    Indices with ``mu_i > mu_min + tol (1 + mu_1)`` form the head block. The
    hard case holds when ``g`` has no component along the remaining (bottom)
    eigenspace, ``y* = beta - mu_min/2 > 0`` and ``y* >= ||x_head||^2``; the
    leftover length is placed on the first bottom eigenvector (the last one when
    every eigenvalue is equal). Returns ``None`` when the conditions fail.
    """
    mu = prob.mu
    mu_r = prob.mu_min
    gh = prob.g_hat
    head = mu > mu_r + tol * (1.0 + mu[0])
    k = int(np.count_nonzero(head))
    tail_norm = float(np.linalg.norm(gh[~head]))
    if tail_norm > tol * (1.0 + float(np.linalg.norm(prob.g))):
        return None
    y_star = prob.beta - 0.5 * mu_r
    if not y_star > 0:
        return None
    xh = np.zeros_like(gh)
    xh[:k] = gh[:k] / (mu[:k] - mu_r)
    head2 = float(xh @ xh)
    if y_star < head2:
        return None
    slot = k if k > 0 else mu.size - 1
    xh[slot] = math.sqrt(y_star - head2)
    x = prob.V @ xh
    return _finish(prob, x, y_star, -mu_r, HARD)


def _bisect(prob, eps, max_iter, polish):
    lo, hi = lambda_bracket(prob)
    if eps is None:
        eps = 1e-10 * (1.0 + (hi - lo))
    mu = prob.mu.tolist()
    gh = prob.g_hat
    gh2 = (gh * gh).tolist()
    beta = prob.beta
    it = 0
    test = 0.5 * (lo + hi)
    gap = 0.5 * (hi - lo)
    while gap > eps:
        if it >= max_iter:
            raise NoConvergenceError(f"bisection did not converge in {max_iter} iterations")
        it += 1
        val = _psi_scalar(mu, gh2, beta, test)
        if val >= 0:
            lo = test
        else:
            hi = test
        test = 0.5 * (lo + hi)
        gap = 0.5 * (hi - lo)
        if test <= -prob.mu_min:
            # bracket collapsed onto the boundary
            break
    lam = test
    if lam <= -prob.mu_min:
        lam = np.nextafter(-prob.mu_min, np.inf)
    if polish:
        lam = _newton_polish(prob, lam, lo, hi, mu, gh2)
    return lam, it


def _newton_polish(prob, lam, lo, hi, mu, gh2, steps=3):
    # Safeguarded: a step leaving the final bracket is rejected.
    beta = prob.beta
    best, best_val = lam, abs(_psi_scalar(mu, gh2, beta, lam))
    for _ in range(steps):
        if best_val == 0.0:
            break
        val = _psi_scalar(mu, gh2, beta, lam)
        der = psi_derivative(prob, lam)
        new = lam - val / der
        if not (lo <= new <= hi) or new <= -prob.mu_min:
            break
        new_val = abs(_psi_scalar(mu, gh2, beta, new))
        if new_val >= best_val:
            break
        lam, best, best_val = new, new, new_val
    return best


def solve(prob, eps=None, tol=1e-8, max_iter=10_000, polish=True):
    """Globally solve a :class:`GtrsProblem`.

    Parameters
    ----------
    prob : GtrsProblem
    eps : float, optional
        Bisection stops once the half-width of the multiplier bracket is at most
        ``eps``. Defaults to ``1e-10 * (1 + initial bracket width)``.
    tol : float, default=1e-8
        Tolerance of the hard-case tests.
    max_iter : int
        Defensive cap on bisection steps.
    polish : bool, default=True
        Refine the bisection multiplier with safeguarded Newton steps on ``psi``.
        Set to False to return the plain bisection midpoint.

    Returns
    -------
    GtrsSolution
    """
    gn = float(np.linalg.norm(prob.g))
    if gn == 0.0 and prob.beta < 0.5 * prob.mu_min:
        lam = -2.0 * prob.beta
        return _finish(prob, np.zeros(prob.dim), 0.0, lam, INTERIOR_ZERO)

    hard = hard_case_check(prob, tol)
    tail_exact = hard is not None and float(
        np.linalg.norm(prob.g_hat[prob.mu <= prob.mu_min + tol * (1.0 + prob.mu[0])])) == 0.0
    if hard is not None and tail_exact and hard.kkt_residual <= tol:
        return hard

    lam, it = _bisect(prob, eps, max_iter, polish)
    x = prob.x_of_lambda(lam)
    easy = _finish(prob, x, prob.beta + 0.5 * lam, lam, EASY, it)
    if hard is None:
        return easy
    # marginal hard case: keep whichever candidate is better among the near-feasible ones
    candidates = [s for s in (hard, easy) if s.kkt_residual <= max(tol, 1e-6)]
    if not candidates:
        return min((hard, easy), key=lambda s: s.kkt_residual)
    return min(candidates, key=lambda s: s.objective)
