"""Monte Carlo experiment driver behind ``anchorloc run``.

A run writes three tidy CSV files into the output directory:

``<scenario>_trials.csv``
    one row per (trial, cell, method): seed, method, noise, sigma, alpha, error,
    weight, status.
``<scenario>_summary.csv``
    mean and population standard deviation of ``error`` (and mean weight) per
    (noise, sigma, alpha, method) cell.
``<scenario>_timings.csv``
    wall-clock seconds per row. Kept apart so the two files above are
    byte-identical for identical configuration and seed.

Trial ``t`` of a run with seed ``s`` draws from ``SeedSequence([s, t, ...])``, so
every cell of a sweep sees the same geometry and base noise for a given ``t``.
"""

import csv
import dataclasses
import logging
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np
import yaml

from . import msl, synth
from .edm import edm_from_points, map_to_anchor_frame, map_to_mds_frame, mds_frame
from .ssl import (
    lmds_embed,
    default_weight_grid,
    ssl_rhs,
    weight_grid_search,
    weighted_tlmds_solve,
)

log = logging.getLogger(__name__)

__all__ = [
    "SCENARIOS",
    "SSL_METHODS",
    "MSL_METHODS",
    "ExperimentConfig",
    "load_config",
    "run",
    "run_trials",
    "summarize",
    "write_csv",
    "ssl_trial",
    "msl_trial",
    "split_points",
]

SCENARIOS = ("ssl-example1", "ssl-custom", "msl-sweep", "msl-file")
SSL_METHODS = ("bssl", "tlmds", "ls", "lmds")
MSL_METHODS = ("bmsl", "lmds")
OUT_ENV = "ANCHORLOC_OUT"

# weight used for angle-exact noise, where the length term only adds error
KERNEL_NOISE_WEIGHT = 1e4


def _scenario_defaults(scenario):
    if scenario in ("ssl-example1", "ssl-custom"):
        return dict(trials=500, methods=list(SSL_METHODS),
                    noise=[synth.SUM_ZERO, synth.A_KERNEL, synth.GAUSSIAN],
                    sigmas=[0.01, 0.1, 1.0], alphas=[0.0], n_anchors=None)
    if scenario == "msl-sweep":
        return dict(trials=100, methods=list(MSL_METHODS), noise=[synth.ADDITIVE_DISTANCE],
                    sigmas=[0.5], alphas=[0.0, 0.05, 0.1, 0.15, 0.2, 0.25], n_anchors=20)
    if scenario == "msl-file":
        return dict(trials=100, methods=list(MSL_METHODS), noise=[synth.ADDITIVE_DISTANCE],
                    sigmas=[0.01, 0.1, 1.0], alphas=[0.1], n_anchors=5)
    raise ValueError(f"unknown scenario {scenario!r}; choose from {', '.join(SCENARIOS)}")


@dataclass
class ExperimentConfig:
    """Experiment settings. ``None`` list fields take scenario defaults.

    Defaults: ``ssl-example1`` runs 500 trials of the five-anchor planar
    benchmark over three noise types and sigma in {0.01, 0.1, 1};
    ``msl-sweep`` runs 100 trials with m=20 anchors and n=200 sources in
    [-1, 1]^2, sigma 0.5, alpha from 0 to 0.25; ``msl-file`` takes the first
    ``n_anchors`` points of ``points_file`` as anchors, alpha 0.1.

    ``weight_policy`` controls B-SSL: ``"default"`` grid-searches the weight for
    sum-zero and Gaussian noise and uses 1e4 for angle-exact noise; ``"grid"``
    always grid-searches; ``"lmds-limit"`` drops the length term; a number fixes
    the weight.
    """

    scenario: str = "ssl-example1"
    trials: int = None
    seed: int = 0
    methods: list = None
    noise: list = None
    sigmas: list = None
    alphas: list = None
    weight_policy: object = "default"
    weight_grid: list = None
    eps: float = None
    max_sweeps: int = 500
    n_anchors: int = None
    n_sources: int = 200
    dim: int = 2
    box: float = 1.0
    anchors_file: str = None
    source: list = None
    points_file: str = None
    out: str = None
    jobs: int = 1

    def __post_init__(self):
        defaults = _scenario_defaults(self.scenario)
        for key, val in defaults.items():
            if getattr(self, key) is None:
                setattr(self, key, val)
        if self.weight_grid is None:
            self.weight_grid = default_weight_grid()
        self.validate()

    def validate(self):
        if int(self.trials) < 1:
            raise ValueError("trials must be at least 1")
        for name in ("methods", "noise", "sigmas", "alphas"):
            if not getattr(self, name):
                raise ValueError(f"{name} must be a non-empty list")
        allowed = SSL_METHODS if self.scenario.startswith("ssl") else MSL_METHODS
        bad = [m for m in self.methods if m not in allowed]
        if bad:
            raise ValueError(f"methods {bad} not available for {self.scenario}")
        if any(s < 0 for s in self.sigmas):
            raise ValueError("sigmas must be non-negative")
        if any(not 0 <= a <= 1 for a in self.alphas):
            raise ValueError("alphas must lie in [0, 1]")
        if self.scenario == "ssl-custom" and (self.anchors_file is None or self.source is None):
            raise ValueError("ssl-custom needs anchors_file and source")
        if self.scenario == "msl-file" and self.points_file is None:
            raise ValueError("msl-file needs points_file")

    def output_dir(self):
        return self.out or os.environ.get(OUT_ENV) or "results"


def load_config(path, **overrides):
    """Read a YAML config file; keyword overrides that are not ``None`` win."""
    data = {}
    if path is not None:
        with open(path) as fh:
            data = yaml.safe_load(fh) or {}
        if not isinstance(data, dict):
            raise ValueError(f"{path}: expected a mapping at top level")
    known = {f.name for f in dataclasses.fields(ExperimentConfig)}
    unknown = set(data) - known
    if unknown:
        raise ValueError(f"unknown config keys: {sorted(unknown)}")
    data.update({k: v for k, v in overrides.items() if v is not None})
    return ExperimentConfig(**data)


# ---------------------------------------------------------------- SSL trials


def _ssl_geometry(config):
    if config.scenario == "ssl-example1":
        return synth.EXAMPLE1_ANCHORS, synth.EXAMPLE1_SOURCE
    anchors = synth.load_points(config.anchors_file)
    return anchors, np.asarray(config.source, dtype=float)


def _bssl_weight(config, noise):
    policy = config.weight_policy
    if policy == "default":
        return KERNEL_NOISE_WEIGHT if noise == synth.A_KERNEL else "grid"
    if policy in ("grid", "lmds-limit"):
        return policy
    return float(policy)


def ssl_trial(config, t):
    """All SSL rows for trial ``t``."""
    anchors, truth = _ssl_geometry(config)
    frame = mds_frame(edm_from_points(anchors), anchors)
    d_true = synth.observe_ssl(truth, anchors)
    truth_mds = map_to_mds_frame(frame, truth)
    m = frame.m
    rows = []
    for k, kind in enumerate(config.noise):
        rng_seq = np.random.SeedSequence([config.seed, t, k])
        for sigma in config.sigmas:
            # same base draw for every sigma: errors scale with sigma
            eps_vec = synth.make_noise(synth.NoiseSpec(kind, sigma), frame,
                                       rng=np.random.default_rng(rng_seq))
            delta = d_true + eps_vec
            for method in config.methods:
                start = time.perf_counter()
                weight = math.nan
                status = "ok"
                try:
                    rhs = ssl_rhs(frame, delta)
                    if method == "lmds":
                        x = lmds_embed(frame, rhs)
                    else:
                        w = {"tlmds": 1.0, "ls": 2.0 / m}.get(method)
                        if method == "bssl":
                            w = _bssl_weight(config, kind)
                            if w == "grid":
                                w = weight_grid_search(frame, [delta], truth,
                                                       config.weight_grid, eps=config.eps)
                        if w == "lmds-limit":
                            x = lmds_embed(frame, rhs)
                        else:
                            weight = float(w)
                            x, _ = weighted_tlmds_solve(frame, rhs, weight, eps=config.eps)
                    error = float(np.linalg.norm(x - truth_mds))
                except Exception as exc:  # recorded, never aborts the batch
                    error = math.nan
                    status = f"error: {type(exc).__name__}: {exc}"
                rows.append(dict(seed=t, method=method, noise=kind, sigma=sigma, alpha=0.0,
                                 error=error, weight=weight, status=status,
                                 time=time.perf_counter() - start))
    return rows


# ---------------------------------------------------------------- MSL trials


def split_points(points, n_anchors):
    """First ``n_anchors`` rows are anchors, the rest are sources."""
    points = np.asarray(points, dtype=float)
    if points.shape[0] <= n_anchors:
        raise ValueError(f"{points.shape[0]} points are too few for {n_anchors} anchors")
    return points[:n_anchors], points[n_anchors:]


def _msl_geometry(config, t):
    if config.scenario == "msl-file":
        return split_points(synth.load_points(config.points_file), config.n_anchors)
    rng = np.random.default_rng(np.random.SeedSequence([config.seed, t, 0]))
    anchors = synth.random_points(config.n_anchors, config.dim, -config.box, config.box, rng)
    sources = synth.random_points(config.n_sources, config.dim, -config.box, config.box, rng)
    return anchors, sources


def msl_trial(config, t):
    """All MSL rows for trial ``t``."""
    anchors, sources = _msl_geometry(config, t)
    frame = mds_frame(edm_from_points(anchors), anchors)
    rows = []
    for sigma in config.sigmas:
        for alpha in config.alphas:
            obs_seed = np.random.SeedSequence([config.seed, t, 1])
            E, F, omega = synth.observe_msl(anchors, sources, alpha, sigma, seed=obs_seed)
            scene = msl.make_scene(frame, E, F, omega)
            for method in config.methods:
                start = time.perf_counter()
                status = "ok"
                try:
                    if method == "lmds":
                        Y = map_to_anchor_frame(frame, msl.lmds_init(scene))
                    else:
                        res = msl.bmsl_solve(scene, eps=config.eps, max_sweeps=config.max_sweeps)
                        Y = res.Y_anchor
                        if not res.converged:
                            status = "max-sweeps"
                    error = synth.rmsd(Y, sources)
                except Exception as exc:
                    error = math.nan
                    status = f"error: {type(exc).__name__}: {exc}"
                rows.append(dict(seed=t, method=method, noise=synth.ADDITIVE_DISTANCE,
                                 sigma=sigma, alpha=alpha, error=error, weight=math.nan,
                                 status=status, time=time.perf_counter() - start))
    return rows


# ---------------------------------------------------------------- driver

TRIAL_FIELDS = ["seed", "method", "noise", "sigma", "alpha", "error", "weight", "status"]
SUMMARY_FIELDS = ["noise", "sigma", "alpha", "method", "trials", "failed",
                  "mean", "std", "mean_weight"]


def _trial_fn(config):
    return ssl_trial if config.scenario.startswith("ssl") else msl_trial


def _call(args):
    config, t = args
    return _trial_fn(config)(config, t)


def run_trials(config):
    """Run every trial and return rows sorted by (seed, method, noise, sigma, alpha)."""
    tasks = [(config, t) for t in range(int(config.trials))]
    if config.jobs and config.jobs > 1:
        with ProcessPoolExecutor(max_workers=config.jobs) as pool:
            chunks = list(pool.map(_call, tasks))
    else:
        chunks = [_call(task) for task in tasks]
    rows = [row for chunk in chunks for row in chunk]
    rows.sort(key=lambda r: (r["seed"], r["method"], r["noise"], r["sigma"], r["alpha"]))
    return rows


def summarize(rows):
    """Per-cell mean and population std of ``error``; failed trials are excluded."""
    cells = {}
    for row in rows:
        key = (row["noise"], row["sigma"], row["alpha"], row["method"])
        cells.setdefault(key, []).append(row)
    out = []
    for key in sorted(cells):
        group = cells[key]
        errs = np.array([r["error"] for r in group], dtype=float)
        ok = np.isfinite(errs)
        weights = np.array([r["weight"] for r in group], dtype=float)
        weights = weights[np.isfinite(weights)]
        good = errs[ok]
        out.append(dict(
            noise=key[0], sigma=key[1], alpha=key[2], method=key[3],
            trials=len(group), failed=int(np.count_nonzero(~ok)),
            mean=float(good.mean()) if good.size else math.nan,
            std=float(good.std()) if good.size else math.nan,
            mean_weight=float(weights.mean()) if weights.size else math.nan,
        ))
    return out


def _fmt(v):
    if isinstance(v, float):
        return repr(v)
    return str(v)


def write_csv(path, rows, fields):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(fields)
        for row in rows:
            writer.writerow([_fmt(row[f]) for f in fields])


def run(config):
    """Run an experiment and write its CSV files. Returns the written paths."""
    out = config.output_dir()
    os.makedirs(out, exist_ok=True)
    log.info("running %s: %d trials", config.scenario, config.trials)
    rows = run_trials(config)
    stem = os.path.join(out, config.scenario)
    paths = {
        "trials": stem + "_trials.csv",
        "summary": stem + "_summary.csv",
        "timings": stem + "_timings.csv",
    }
    write_csv(paths["trials"], rows, TRIAL_FIELDS)
    write_csv(paths["summary"], summarize(rows), SUMMARY_FIELDS)
    write_csv(paths["timings"], rows, ["seed", "method", "noise", "sigma", "alpha", "time"])
    failed = sum(r["status"].startswith("error") for r in rows)
    if failed:
        log.warning("%d trial rows failed; see the status column", failed)
    return paths
