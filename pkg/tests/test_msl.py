import numpy as np
import pytest

from anchorloc import (
    bmsl_solve,
    edm_from_points,
    make_scene,
    map_to_anchor_frame,
    map_to_mds_frame,
    mds_frame,
    rmsd,
    ssl_rhs,
    synth,
    weighted_tlmds_solve,
)
from anchorloc.exceptions import DimensionMismatchError
from anchorloc.gtrs import solve
from anchorloc.msl import block_objective, build_subproblem, lmds_init, msl_derive, msl_objective

from conftest import random_frame, sqdist_loop


def planted(rng, m=6, n=5, alpha=1.0, sigma=0.0, seed=0):
    frame, anchors = random_frame(rng, m=m)
    sources = rng.uniform(-1, 1, size=(n, 2))
    E, F, omega = synth.observe_msl(anchors, sources, alpha, sigma, seed=seed)
    return make_scene(frame, E, F, omega), anchors, sources


def test_scene_validation(rng):
    frame, _ = random_frame(rng, m=4)
    with pytest.raises(DimensionMismatchError):
        make_scene(frame, np.ones((3, 2)))
    F = np.array([[0.0, 1.0], [np.nan, 0.0]])
    with pytest.raises(ValueError):
        make_scene(frame, np.ones((4, 2)), F)
    with pytest.raises(ValueError):
        make_scene(frame, np.ones((4, 2)), np.array([[0.0, 1.0], [2.0, 0.0]]))


def test_scene_masks_unobserved_entries(rng):
    frame, _ = random_frame(rng, m=4)
    F = np.array([[0.0, 1.0, 5.0], [1.0, 0.0, 7.0], [5.0, 7.0, 0.0]])
    omega = np.array([[0, 1, 0], [1, 0, 0], [0, 0, 0]], dtype=bool)
    scene = make_scene(frame, np.ones((4, 3)), F, omega)
    assert np.isnan(scene.F[0, 2]) and scene.F[0, 1] == 1.0
    assert not scene.F.flags.writeable


def test_derive_gram_identities(rng):
    scene, anchors, sources = planted(rng, n=6)
    der = msl_derive(scene)
    Y = map_to_mds_frame(scene.frame, sources)
    A = scene.frame.A
    assert np.max(np.abs(A.T @ Y.T + 0.5 * der.Ebar)) <= 1e-8
    np.testing.assert_allclose(der.B, A.T @ Y.T, atol=1e-8)
    assert np.max(np.abs(der.Fbar - Y @ Y.T)) <= 1e-8


def test_derive_single_source_matches_ssl(rng):
    frame, anchors = random_frame(rng, m=6)
    delta = sqdist_loop(anchors, [rng.normal(size=2)])[:, 0] + rng.normal(scale=0.2, size=6)
    scene = make_scene(frame, delta[:, None])
    der = msl_derive(scene)
    rhs = ssl_rhs(frame, delta)
    assert der.Fbar.shape == (1, 1)
    assert der.Fbar[0, 0] == pytest.approx(rhs.b0, rel=1e-12)
    np.testing.assert_allclose(der.B[:, 0], rhs.b, atol=1e-12)


def test_single_source_solve_equals_ssl_weight_one(rng):
    frame, anchors = random_frame(rng, m=6)
    delta = sqdist_loop(anchors, [rng.normal(size=2)])[:, 0] + rng.normal(scale=0.5, size=6)
    res = bmsl_solve(make_scene(frame, delta[:, None]))
    x, _ = weighted_tlmds_solve(frame, ssl_rhs(frame, delta), 1.0)
    assert np.linalg.norm(res.Y_mds[0] - x) <= 1e-8


def test_subproblem_objective_matches_block(rng):
    scene, _, _ = planted(rng, n=7, alpha=0.5, sigma=0.1, seed=3)
    der = msl_derive(scene)
    Y = lmds_init(scene, der)
    for i in range(scene.n):
        prob = build_subproblem(scene, der, i, Y)
        z = rng.normal(size=2)
        assert prob.objective(z) == pytest.approx(block_objective(scene, der, i, Y, z), rel=1e-12)


def test_subproblem_gradient_finite_difference(rng):
    scene, _, _ = planted(rng, n=8, alpha=0.6, sigma=0.2, seed=5)
    der = msl_derive(scene)
    Y = lmds_init(scene, der)
    for i in range(scene.n):
        prob = build_subproblem(scene, der, i, Y)
        z = rng.normal(size=2)
        grad = prob.H @ z - prob.g + 2.0 * (z @ z - prob.beta) * z
        h = 1e-6 * (1 + np.linalg.norm(z))
        fd = np.array([(block_objective(scene, der, i, Y, z + h * e)
                        - block_objective(scene, der, i, Y, z - h * e)) / (2 * h)
                       for e in np.eye(2)])
        assert np.linalg.norm(grad - fd) <= 1e-6 * (1 + np.linalg.norm(grad))


def test_subproblem_isolated_and_zero_neighbour(rng):
    scene, _, _ = planted(rng, n=3, alpha=0.0, sigma=0.1, seed=1)
    der = msl_derive(scene)
    Y = lmds_init(scene, der)
    prob = build_subproblem(scene, der, 0, Y)
    np.testing.assert_allclose(prob.H, np.diag(2 * scene.frame.eigenvalues))
    np.testing.assert_allclose(prob.g, 2 * scene.frame.A @ der.B[:, 0])
    assert prob.beta == der.Fbar[0, 0]

    F = np.full((3, 3), np.nan)
    F[0, 1] = F[1, 0] = 0.3
    linked = make_scene(scene.frame, scene.E, F)
    dl = msl_derive(linked)
    Y0 = Y.copy()
    Y0[1] = 0.0
    pl = build_subproblem(linked, dl, 0, Y0)
    np.testing.assert_allclose(pl.H, prob.H)
    np.testing.assert_allclose(pl.g, prob.g)


def test_objective_counts_pairs_once(rng):
    scene, _, _ = planted(rng, n=4, alpha=1.0, sigma=0.1, seed=2)
    der = msl_derive(scene)
    Y = rng.normal(size=(4, 2))
    A = scene.frame.A
    total = 0.0
    for i in range(4):
        total += 0.5 * (Y[i] @ Y[i] - der.Fbar[i, i]) ** 2
        total += np.sum((A.T @ Y[i] - der.B[:, i]) ** 2)
        for j in range(i + 1, 4):
            total += (Y[i] @ Y[j] - der.Fbar[i, j]) ** 2
    assert msl_objective(scene, der, Y) == pytest.approx(total, rel=1e-12)


def test_planted_recovery_full_omega(rng):
    scene, _, sources = planted(rng, m=5, n=3)
    res = bmsl_solve(scene)
    assert res.converged
    assert rmsd(res.Y_anchor, sources) <= 1e-4


def test_empty_omega_decouples(rng):
    scene, _, _ = planted(rng, n=5, alpha=0.0, sigma=0.3, seed=9)
    res = bmsl_solve(scene)
    assert res.sweeps <= 2 and res.converged
    der = msl_derive(scene)
    for i in range(scene.n):
        prob = build_subproblem(scene, der, i, res.Y_mds)
        assert np.linalg.norm(res.Y_mds[i] - solve(prob).x) <= 1e-10


def test_descent_and_improvement():
    wins = 0
    for s in range(10):
        rng = np.random.default_rng(100 + s)
        anchors = rng.uniform(-1, 1, (15, 2))
        sources = rng.uniform(-1, 1, (150, 2))
        frame = mds_frame(edm_from_points(anchors), anchors)
        E, F, omega = synth.observe_msl(anchors, sources, 0.05, 0.5, seed=s)
        scene = make_scene(frame, E, F, omega)
        res = bmsl_solve(scene, record_blocks=True)
        hist = np.array(res.history)
        assert np.all(np.diff(hist) <= 1e-12 * (1 + np.abs(hist[:-1])))
        blocks = np.array([hist[0]] + res.block_history)
        assert np.all(np.diff(blocks) <= 1e-12 * (1 + np.abs(blocks[:-1])))
        init = rmsd(map_to_anchor_frame(frame, lmds_init(scene)), sources)
        wins += rmsd(res.Y_anchor, sources) < init
    assert wins >= 9


def test_missing_entries_never_read(rng):
    scene, anchors, sources = planted(rng, n=6, alpha=0.4, sigma=0.1, seed=4)
    F2 = np.array(scene.F)
    F2[~scene.omega & ~np.eye(6, dtype=bool)] = 1e9
    other = make_scene(scene.frame, scene.E, F2, scene.omega)
    a, b = bmsl_solve(scene), bmsl_solve(other)
    assert np.array_equal(a.Y_anchor, b.Y_anchor)


def test_warm_start_and_limits(rng):
    scene, _, _ = planted(rng, n=4, alpha=0.5, sigma=0.2, seed=6)
    with pytest.raises(ValueError):
        bmsl_solve(scene, max_sweeps=0)
    with pytest.raises(DimensionMismatchError):
        bmsl_solve(scene, Y0=np.zeros((3, 2)))
    res = bmsl_solve(scene, max_sweeps=1, eps=1e-300)
    assert res.sweeps == 1 and not res.converged
