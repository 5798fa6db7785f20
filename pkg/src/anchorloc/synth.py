"""Synthetic scenes, noise models, metrics and coordinate-file readers.

Randomness always comes from an explicit seed. Generators are numpy
``PCG64`` streams derived through ``SeedSequence``, so per-trial substreams are
independent and reproducible.
"""

import csv
import os
from dataclasses import dataclass

import numpy as np

from .edm import as_points
from .exceptions import DegenerateSubspaceError, ParseError, ShapeMismatchError

__all__ = [
    "SUM_ZERO",
    "A_KERNEL",
    "GAUSSIAN",
    "ADDITIVE_DISTANCE",
    "NOISE_KINDS",
    "NoiseSpec",
    "TrialResult",
    "EXAMPLE1_ANCHORS",
    "EXAMPLE1_SOURCE",
    "make_rng",
    "make_noise",
    "project_noise",
    "observe_ssl",
    "observe_msl",
    "random_points",
    "rmsd",
    "load_xyz",
    "load_points_csv",
    "load_matrix_csv",
    "load_points",
    "load_scene",
    "write_scene",
]

SUM_ZERO = "sum-zero"
A_KERNEL = "a-kernel"
GAUSSIAN = "gaussian"
ADDITIVE_DISTANCE = "additive-distance"
NOISE_KINDS = (SUM_ZERO, A_KERNEL, GAUSSIAN, ADDITIVE_DISTANCE)

# five planar anchors and the source of the classic single-source benchmark
EXAMPLE1_ANCHORS = np.array(
    [[-5.0, -13.0], [-12.0, 1.0], [-1.0, -5.0], [-9.0, -12.0], [-3.0, -12.0]]
)
EXAMPLE1_SOURCE = np.array([-5.0, 11.0])


@dataclass(frozen=True)
class NoiseSpec:
    kind: str
    sigma: float = 0.0
    seed: int = None

    def __post_init__(self):
        if self.kind not in NOISE_KINDS:
            raise ValueError(f"unknown noise kind {self.kind!r}")
        if not self.sigma >= 0:
            raise ValueError("sigma must be non-negative")


@dataclass(frozen=True)
class TrialResult:
    method: str
    error: float
    seed: int = None
    sigma: float = None
    alpha: float = None
    noise: str = None
    weight: float = None
    time: float = None

    def __post_init__(self):
        if self.error < 0:
            raise ValueError("error must be non-negative")


def make_rng(seed):
    """``numpy.random.Generator`` for ``seed`` (int, SeedSequence or Generator)."""
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def project_noise(kind, vec, frame=None):
    """Orthogonal projection onto the admissible noise subspace.

    ``SUM_ZERO`` removes the mean (``1^T eps = 0``); ``A_KERNEL`` removes the
    component in the row space of ``A`` (``A eps = 0``). Other kinds pass through.
    """
    vec = np.asarray(vec, dtype=float)
    if kind == SUM_ZERO:
        return vec - vec.mean()
    if kind == A_KERNEL:
        if frame is None:
            raise ValueError("a-kernel projection needs the anchor frame")
        if frame.m <= frame.r:
            raise DegenerateSubspaceError("null space of A is empty")
        U = frame.U
        return vec - U @ (U.T @ vec)
    return vec


def make_noise(spec, frame=None, m=None, rng=None):
    """Draw a range-noise vector.

    Projected kinds are rescaled afterwards so that their root-mean-square entry
    equals ``sigma``. ``GAUSSIAN`` draws are i.i.d. ``N(0, sigma^2)``.

    Parameters
    ----------
    spec : NoiseSpec
    frame : MdsFrame, optional
        Required for ``A_KERNEL``; also supplies ``m`` when it is omitted.
    m : int, optional
    rng : Generator, optional
        Overrides ``spec.seed``.
    """
    if m is None:
        if frame is None:
            raise ValueError("need m or frame")
        m = frame.m
    if spec.kind == ADDITIVE_DISTANCE:
        raise ValueError("additive-distance noise is applied by observe_msl")
    rng = make_rng(spec.seed) if rng is None else rng
    if spec.kind == A_KERNEL and (frame is None or frame.m <= frame.r):
        raise DegenerateSubspaceError("a-kernel noise needs m > r anchors and their frame")
    draw = rng.standard_normal(m)
    if spec.sigma == 0:
        return np.zeros(m)
    if spec.kind == GAUSSIAN:
        return spec.sigma * draw
    eps = project_noise(spec.kind, draw, frame)
    rms = np.sqrt(np.mean(eps * eps))
    if rms == 0:
        return eps
    return eps * (spec.sigma / rms)


def observe_ssl(truth, anchors, noise=None):
    """Squared ranges ``||x - x_i||^2 + eps_i``."""
    anchors = as_points(anchors, "anchors")
    truth = np.asarray(truth, dtype=float).ravel()
    if truth.size != anchors.shape[1]:
        raise ShapeMismatchError("source and anchors differ in dimension")
    d = np.sum((anchors - truth) ** 2, axis=1)
    if noise is not None:
        noise = np.asarray(noise, dtype=float)
        if noise.shape != d.shape:
            raise ShapeMismatchError("noise length differs from anchor count")
        d = d + noise
    return d


def _sample_pairs(n, alpha, rng):
    iu, ju = np.triu_indices(n, 1)
    n_pairs = int(round(alpha * n * n / 2.0))
    n_pairs = min(max(n_pairs, 0), iu.size)
    omega = np.zeros((n, n), dtype=bool)
    if n_pairs:
        pick = rng.choice(iu.size, size=n_pairs, replace=False)
        omega[iu[pick], ju[pick]] = True
        omega |= omega.T
    return omega


def observe_msl(anchors, sources, alpha, sigma, seed=None):
    """Noisy anchor-source and source-source squared ranges.

    Ranges are perturbed before squaring: ``E_ij = (||x_i - y_j|| + sigma e_ij)^2``
    and likewise for ``F`` on a random symmetric pair set of size about
    ``alpha n^2`` (ordered pairs), with ``e_ij = e_ji``.

    Separate substreams are used for ``E`` noise, the pair set and ``F`` noise,
    so scenes that differ only in ``alpha`` share their ``E``.

    Returns
    -------
    E : ndarray of shape (m, n)
    F : ndarray of shape (n, n)
        ``NaN`` off the pair set, zero diagonal.
    omega : ndarray of bool, shape (n, n)
    """
    if not 0.0 <= alpha <= 1.0:
        raise ValueError("alpha must lie in [0, 1]")
    if not sigma >= 0:
        raise ValueError("sigma must be non-negative")
    anchors = as_points(anchors, "anchors")
    sources = as_points(sources, "sources")
    if anchors.shape[1] != sources.shape[1]:
        raise ShapeMismatchError("anchors and sources differ in dimension")
    ss = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    e_seq, pair_seq, f_seq = ss.spawn(3)
    n = sources.shape[0]

    dist_e = np.linalg.norm(anchors[:, None, :] - sources[None, :, :], axis=2)
    E = (dist_e + sigma * np.random.default_rng(e_seq).standard_normal(dist_e.shape)) ** 2

    omega = _sample_pairs(n, alpha, np.random.default_rng(pair_seq))
    noise = np.random.default_rng(f_seq).standard_normal((n, n))
    noise = np.triu(noise, 1)
    noise = noise + noise.T
    dist_f = np.linalg.norm(sources[:, None, :] - sources[None, :, :], axis=2)
    F = np.where(omega, (dist_f + sigma * noise) ** 2, np.nan)
    np.fill_diagonal(F, 0.0)
    return E, F, omega


def random_points(count, dim=2, low=-1.0, high=1.0, rng=None):
    rng = make_rng(rng)
    return rng.uniform(low, high, size=(count, dim))


def rmsd(Y_est, Y_true):
    """Root mean squared deviation ``sqrt(||Y - Y_M||_F^2 / n)``.

    Both arguments are ``(n, r)`` arrays already in the same coordinate frame.
    """
    Y_est = np.asarray(Y_est, dtype=float)
    Y_true = np.asarray(Y_true, dtype=float)
    if Y_est.shape != Y_true.shape:
        raise ShapeMismatchError(f"shapes differ: {Y_est.shape} vs {Y_true.shape}")
    if Y_est.ndim == 1:
        Y_est, Y_true = Y_est[None, :], Y_true[None, :]
    n = Y_est.shape[0]
    return float(np.sqrt(np.sum((Y_est - Y_true) ** 2) / n))


def load_xyz(path):
    """Read a whitespace-delimited ``label x y z`` file into an ``(n, 3)`` array.

    Blank lines and ``#`` comments are skipped. A leading line holding only an
    atom count, and the comment line after it (standard XYZ header), are skipped
    too.
    """
    rows = []
    with open(path) as fh:
        lines = fh.readlines()
    start = 0
    first = lines[0].split() if lines else []
    if len(first) == 1 and first[0].isdigit():
        start = 2
    for lineno, line in enumerate(lines[start:], start=start + 1):
        text = line.split("#", 1)[0].strip()
        if not text:
            continue
        parts = text.split()
        if len(parts) != 4:
            raise ParseError(f"expected 'label x y z', got {line.strip()!r}", lineno)
        try:
            rows.append([float(v) for v in parts[1:]])
        except ValueError:
            raise ParseError(f"non-numeric coordinate in {line.strip()!r}", lineno) from None
    if not rows:
        raise ParseError(f"no coordinates found in {path}")
    return np.array(rows)


def _read_csv_rows(path):
    with open(path, newline="") as fh:
        return [row for row in csv.reader(fh)]


def load_points_csv(path):
    """One point per row, numeric columns, optional header line."""
    rows = _read_csv_rows(path)
    out = []
    for lineno, row in enumerate(rows, start=1):
        cells = [c.strip() for c in row]
        if not any(cells):
            continue
        try:
            out.append([float(c) for c in cells])
        except ValueError:
            if lineno == 1 and not out:
                continue  # header
            raise ParseError(f"non-numeric value in {row!r}", lineno) from None
    if not out:
        raise ParseError(f"no points found in {path}")
    widths = {len(r) for r in out}
    if len(widths) != 1:
        raise ParseError(f"rows of {path} have differing lengths {sorted(widths)}")
    return np.array(out)


def load_matrix_csv(path):
    """Numeric matrix; blank cells (and ``nan``) become ``NaN``."""
    rows = _read_csv_rows(path)
    out = []
    for lineno, row in enumerate(rows, start=1):
        if not row:
            continue
        vals = []
        for c in row:
            c = c.strip()
            if c == "":
                vals.append(np.nan)
                continue
            try:
                vals.append(float(c))
            except ValueError:
                raise ParseError(f"non-numeric cell {c!r}", lineno) from None
        out.append(vals)
    if not out or len({len(r) for r in out}) != 1:
        raise ParseError(f"{path} is empty or ragged")
    return np.array(out)


def load_points(path):
    """Dispatch on extension: ``.xyz`` is read by :func:`load_xyz`, anything else as CSV."""
    path = str(path)
    if path.lower().endswith(".xyz"):
        return load_xyz(path)
    return load_points_csv(path)


SCENE_FILES = {"anchors": "anchors.csv", "E": "E.csv", "F": "F.csv", "sources": "sources.csv"}


def load_scene(directory):
    """Read a scene directory.

    ``anchors.csv`` (one anchor per row) and ``E.csv`` (m x n squared ranges)
    are required. ``F.csv`` (n x n, blank cells unobserved) and ``sources.csv``
    (true source positions, for scoring) are optional.

    Returns a dict with keys ``anchors``, ``E``, ``F`` and ``sources`` (the
    optional ones may be ``None``).
    """
    def path(key):
        return os.path.join(directory, SCENE_FILES[key])

    scene = {"anchors": load_points_csv(path("anchors")), "E": load_matrix_csv(path("E"))}
    scene["F"] = load_matrix_csv(path("F")) if os.path.exists(path("F")) else None
    scene["sources"] = load_points_csv(path("sources")) if os.path.exists(path("sources")) else None
    return scene


def write_scene(directory, anchors, E, F=None, sources=None):
    """Write a scene directory readable by :func:`load_scene`."""
    os.makedirs(directory, exist_ok=True)

    def dump(key, arr):
        with open(os.path.join(directory, SCENE_FILES[key]), "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            for row in np.asarray(arr, dtype=float):
                writer.writerow(["" if np.isnan(v) else repr(float(v)) for v in row])

    dump("anchors", anchors)
    dump("E", E)
    if F is not None:
        dump("F", F)
    if sources is not None:
        dump("sources", sources)
