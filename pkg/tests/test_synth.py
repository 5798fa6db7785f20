import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from anchorloc import rmsd, ssl_rhs, synth
from anchorloc.exceptions import DegenerateSubspaceError, ParseError, ShapeMismatchError
from anchorloc.experiments import split_points

from conftest import random_frame, sqdist_loop

seeds = st.integers(0, 2 ** 32 - 1)


@settings(max_examples=50)
@given(seeds, st.floats(0.001, 10))
def test_sum_zero_noise(seed, sigma):
    eps = synth.make_noise(synth.NoiseSpec(synth.SUM_ZERO, sigma, seed), m=7)
    assert abs(eps.sum()) <= 1e-12 * (1 + np.abs(eps).sum())
    assert np.sqrt(np.mean(eps ** 2)) == pytest.approx(sigma, rel=1e-12)


@settings(max_examples=50, deadline=None)
@given(seeds, st.floats(0.001, 10))
def test_a_kernel_noise(seed, sigma):
    frame, _ = random_frame(np.random.default_rng(seed), m=6)
    eps = synth.make_noise(synth.NoiseSpec(synth.A_KERNEL, sigma, seed), frame)
    assert np.linalg.norm(frame.A @ eps) <= 1e-12 * (1 + np.linalg.norm(eps)) * (1 + np.abs(frame.A).max())
    # A 1 = 0, so the all-ones direction is admissible
    assert np.linalg.norm(frame.A @ np.ones(6)) <= 1e-10


def test_a_kernel_noise_leaves_b_unchanged(rng):
    frame, anchors = random_frame(rng, m=7)
    d = sqdist_loop(anchors, [rng.normal(size=2)])[:, 0]
    eps = synth.make_noise(synth.NoiseSpec(synth.A_KERNEL, 0.5, 1), frame)
    clean, noisy = ssl_rhs(frame, d), ssl_rhs(frame, d + eps)
    np.testing.assert_allclose(frame.A @ noisy.b, frame.A @ clean.b, atol=1e-12)


def test_a_kernel_needs_frame():
    with pytest.raises(DegenerateSubspaceError):
        synth.make_noise(synth.NoiseSpec(synth.A_KERNEL, 0.1, 0), m=5)
    with pytest.raises(ValueError):
        synth.make_noise(synth.NoiseSpec(synth.ADDITIVE_DISTANCE, 0.1, 0), m=5)


def test_gaussian_noise():
    assert not synth.make_noise(synth.NoiseSpec(synth.GAUSSIAN, 0.0, 3), m=5).any()
    big = synth.make_noise(synth.NoiseSpec(synth.GAUSSIAN, 2.0, 3), m=200_000)
    assert big.std() == pytest.approx(2.0, rel=0.01)


def test_noise_reproducible():
    spec = synth.NoiseSpec(synth.SUM_ZERO, 0.3, 42)
    np.testing.assert_array_equal(synth.make_noise(spec, m=5), synth.make_noise(spec, m=5))


def test_noise_spec_validation():
    with pytest.raises(ValueError):
        synth.NoiseSpec("pink", 0.1)
    with pytest.raises(ValueError):
        synth.NoiseSpec(synth.GAUSSIAN, -1.0)
    with pytest.raises(ValueError):
        synth.TrialResult("bssl", -1.0)


def test_observe_ssl_example1():
    d = synth.observe_ssl(synth.EXAMPLE1_SOURCE, synth.EXAMPLE1_ANCHORS)
    assert d[0] == 576.0
    np.testing.assert_array_equal(
        d, sqdist_loop(synth.EXAMPLE1_ANCHORS, [synth.EXAMPLE1_SOURCE])[:, 0])
    with pytest.raises(ShapeMismatchError):
        synth.observe_ssl([0.0, 0.0, 0.0], synth.EXAMPLE1_ANCHORS)


def test_observe_msl_extremes(rng):
    anchors, sources = rng.normal(size=(4, 2)), rng.normal(size=(6, 2))
    E, F, omega = synth.observe_msl(anchors, sources, 0.0, 0.3, seed=1)
    assert not omega.any()
    E, F, omega = synth.observe_msl(anchors, sources, 1.0, 0.0, seed=1)
    assert omega.sum() == 30 and not np.diag(omega).any()
    np.testing.assert_allclose(E, sqdist_loop(anchors, sources), rtol=1e-12)
    np.testing.assert_allclose(F, sqdist_loop(sources, sources), rtol=1e-12, atol=1e-14)


def test_observe_msl_symmetric_and_rate(rng):
    anchors, sources = rng.normal(size=(4, 2)), rng.normal(size=(40, 2))
    E, F, omega = synth.observe_msl(anchors, sources, 0.25, 0.1, seed=2)
    assert np.array_equal(omega, omega.T)
    assert omega.sum() == 2 * round(0.25 * 40 * 40 / 2)
    np.testing.assert_array_equal(F[omega], F.T[omega])
    assert np.isnan(F[~omega & ~np.eye(40, dtype=bool)]).all()


def test_observe_msl_alpha_keeps_e(rng):
    anchors, sources = rng.normal(size=(4, 2)), rng.normal(size=(10, 2))
    a = synth.observe_msl(anchors, sources, 0.0, 0.2, seed=9)[0]
    b = synth.observe_msl(anchors, sources, 0.3, 0.2, seed=9)[0]
    np.testing.assert_array_equal(a, b)


def test_observe_msl_validation(rng):
    with pytest.raises(ValueError):
        synth.observe_msl(np.zeros((3, 2)), np.zeros((2, 2)), 1.5, 0.1)


def test_rmsd_values(rng):
    Y = rng.normal(size=(4, 2))
    assert rmsd(Y, Y) == 0.0
    Z = Y.copy()
    Z[:, 0] += np.array([1.0, 0, 0, 0])
    assert rmsd(Z, Y) == pytest.approx(0.5)
    A, B = rng.normal(size=(9, 3)), rng.normal(size=(9, 3))
    loop = 0.0
    for i in range(9):
        for j in range(3):
            loop += (A[i, j] - B[i, j]) ** 2
    assert abs(rmsd(A, B) - (loop / 9) ** 0.5) <= 1e-12
    with pytest.raises(ShapeMismatchError):
        rmsd(A, B[:, :2])


def test_load_xyz_two_atoms(tmp_path):
    p = tmp_path / "two.xyz"
    p.write_text("C 0.0 0.0 0.0\nH 1.0 0.5 -0.2\n")
    np.testing.assert_array_equal(synth.load_xyz(p), [[0, 0, 0], [1.0, 0.5, -0.2]])


def test_load_xyz_malformed_row(tmp_path):
    p = tmp_path / "bad.xyz"
    p.write_text("C 0 0 0\nH 1 2\nO 0 0 1\n")
    with pytest.raises(ParseError) as info:
        synth.load_xyz(p)
    assert info.value.lineno == 2
    p.write_text("C 0 0 0\nH 1 x 2\n")
    with pytest.raises(ParseError):
        synth.load_xyz(p)


def test_load_xyz_154_atoms_split(tmp_path):
    rng = np.random.default_rng(154)
    pts = rng.normal(scale=3, size=(154, 3))
    lines = ["154", "generated molecule"] + [f"C {float(x)!r} {float(y)!r} {float(z)!r}" for x, y, z in pts]
    p = tmp_path / "mol.xyz"
    p.write_text("\n".join(lines) + "\n")
    loaded = synth.load_points(p)
    np.testing.assert_array_equal(loaded, pts)
    anchors, sources = split_points(loaded, 5)
    assert anchors.shape == (5, 3) and sources.shape == (149, 3)
    with pytest.raises(ValueError):
        split_points(loaded[:5], 5)


def test_points_and_matrix_csv(tmp_path):
    p = tmp_path / "pts.csv"
    p.write_text("x,y\n1,2\n3,4\n")
    np.testing.assert_array_equal(synth.load_points_csv(p), [[1, 2], [3, 4]])
    m = tmp_path / "F.csv"
    m.write_text("0,,2\n,0,\n2,,0\n")
    F = synth.load_matrix_csv(m)
    assert F[0, 2] == 2 and np.isnan(F[0, 1])


def test_scene_round_trip(tmp_path, rng):
    anchors, sources = rng.normal(size=(4, 2)), rng.normal(size=(5, 2))
    E, F, _ = synth.observe_msl(anchors, sources, 0.4, 0.1, seed=3)
    synth.write_scene(tmp_path / "s", anchors, E, F, sources)
    scene = synth.load_scene(tmp_path / "s")
    np.testing.assert_array_equal(scene["E"], E)
    np.testing.assert_array_equal(np.isnan(scene["F"]), np.isnan(F))
    np.testing.assert_array_equal(scene["sources"], sources)
    synth.write_scene(tmp_path / "t", anchors, E)
    assert synth.load_scene(tmp_path / "t")["F"] is None
