import numpy as np
import pytest

from screwreg.errors import EmptyInput
from screwreg.geometry import GravityPair, exp_map, rotation_about_axis
from screwreg.pole import (
    BisectorLines,
    BnbConfig,
    PlaneCorrespondences,
    PoleBranch,
    bisector,
    bisectors,
    bnb_bounds,
    bnb_search,
    inlier_count,
    project_to_plane,
    recover_pole,
    refine_pole,
    solve_stage2,
)
from screwreg.stabbing import CorrespondenceSet


def make_lines(n):
    n = np.asarray(n, dtype=np.float64).reshape(-1, 3)
    return BisectorLines(n, np.arange(n.shape[0]), np.hypot(n[:, 0], n[:, 1]) < 1e-12)


def test_bisector_examples():
    n, deg = bisector([0, 0], [2, 0])
    assert np.array_equal(n, [2, 0, -2]) and not deg
    n, deg = bisector([1, 1], [1, 1])
    assert np.array_equal(n, [0, 0, 0]) and deg
    n, deg = bisector([0, -1], [0, 1])
    assert np.array_equal(n, [0, 2, 0]) and not deg


def test_bisector_is_equidistant(rng):
    p, q = rng.normal(size=(200, 2)), rng.normal(size=(200, 2))
    lines = bisectors(PlaneCorrespondences(p, q, np.arange(200)))
    a, b, c = lines.n.T
    # the foot of the perpendicular from p lands on a point equidistant from p and q
    t = -(a * p[:, 0] + b * p[:, 1] + c) / (a * a + b * b)
    x = p + t[:, None] * np.column_stack([a, b])
    assert np.allclose(np.linalg.norm(x - p, axis=1), np.linalg.norm(x - q, axis=1))


def test_projection_with_vertical_gravity_keeps_xy(rng):
    p, q = rng.normal(size=(20, 3)), rng.normal(size=(20, 3))
    pc = project_to_plane(CorrespondenceSet(p, q, GravityPair.from_vectors([0, 0, 1], [0, 0, 1])))
    assert np.allclose(pc.p_hat, p[:, :2]) and np.allclose(pc.q_hat, q[:, :2])


def test_projection_preserves_norm_of_points_orthogonal_to_gravity(rng):
    g = GravityPair.from_vectors([1, 0, 0], [1, 0, 0])
    p = np.column_stack([np.zeros(30), rng.normal(size=(30, 2))])
    pc = project_to_plane(CorrespondenceSet(p, p, g))
    assert np.allclose(np.linalg.norm(pc.p_hat, axis=1), np.linalg.norm(p, axis=1))


def test_projection_of_noise_free_motion_is_planar_rigid(rng):
    theta, t = 1.1, np.array([0.3, -0.2, 0.4])
    p = rng.uniform(-1, 1, (50, 3))
    q = p @ rotation_about_axis([0, 0, 1.0], theta).T + t
    pc = project_to_plane(CorrespondenceSet(p, q, GravityPair.down()))
    # down gravity flips the frame: the planar motion is the mirrored one
    for p_hat, q_hat in zip(pc.p_hat, pc.q_hat):
        d_p, d_q = pc.p_hat - p_hat, pc.q_hat - q_hat
        assert np.allclose(np.linalg.norm(d_p, axis=1), np.linalg.norm(d_q, axis=1), atol=1e-12)


def bound_radius(norm, tau, gamma):
    xi = np.arcsin(tau / norm)
    ang = np.sqrt(2) * gamma + xi
    return norm if ang >= np.pi / 2 else norm * np.sin(ang)


def test_bound_radius_example():
    assert abs(np.arcsin(0.1) - 0.10017) < 1e-5
    psi = bound_radius(1.0, 0.1, 0.2)
    assert abs(psi - 0.37372) < 1e-5
    branch = PoleBranch(np.zeros(2), 0.2)
    # |n . h_c| just inside and just outside the radius
    for r, expected in ((psi - 1e-9, 1), (psi + 1e-9, 0)):
        n = [np.sqrt(1 - r * r), 0.0, r]
        assert bnb_bounds(branch, make_lines(n), 0.1) == (expected, 0)


def test_bound_saturation_counts_every_line():
    # sqrt(2) gamma + xi >= pi/2: the line can never be excluded
    n = [1.0, 0.0, 0.0]
    assert bnb_bounds(PoleBranch(np.zeros(2), 1.2), make_lines(n), 0.1)[0] == 1


def test_lines_shorter_than_tau_are_always_inliers():
    lines = make_lines([[0, 0, 0], [0.0, 0.0, 0.05]])
    assert bnb_bounds(PoleBranch(np.array([0.3, 0.3]), 1e-3), lines, 0.1) == (2, 2)
    assert inlier_count(lines, [1.0, 0, 0], 0.1) == 2


def random_lines(rng, k):
    n = rng.normal(size=(k, 3))
    n[:, 2] *= rng.uniform(0.1, 3)
    return make_lines(n)


def test_bound_collapse():
    rng = np.random.default_rng(5)
    for _ in range(10_000 // 50):
        lines = random_lines(rng, 50)
        center = rng.uniform(-np.pi / 2, np.pi / 2, 2)
        tau = rng.choice([1e-3, 1e-2, 0.1])
        up, low = bnb_bounds(PoleBranch(center, 1e-12), lines, tau)
        assert up == low == inlier_count(lines, exp_map(center), tau)


def test_bound_soundness_random_branches():
    rng = np.random.default_rng(6)
    for _ in range(300):
        lines = random_lines(rng, 30)
        tau = rng.choice([1e-3, 1e-2, 0.1])
        gamma = rng.uniform(1e-4, 0.5)
        center = rng.uniform(-np.pi / 2, np.pi / 2, 2)
        up, low = bnb_bounds(PoleBranch(center, gamma), lines, tau)
        assert up >= low
        phi = center + rng.uniform(-gamma, gamma, (100, 2))
        counts = (np.abs(exp_map(phi) @ lines.n.T) <= tau).sum(axis=1)
        assert counts.max() <= up


def planted_lines(rng, k, tau, frac=0.5):
    """Lines with about ``frac`` of them within tau of a random hemisphere point."""
    h0 = exp_map(rng.uniform(-1.4, 1.4, 2))
    n = rng.normal(size=(k, 3))
    m = int(frac * k)
    # remove the component along h0 and put back a residual well inside tau
    n[:m] -= np.outer(n[:m] @ h0, h0)
    n[:m] += np.outer(rng.uniform(-0.5, 0.5, m) * tau, h0)
    return make_lines(n), h0


def oracle_max_consensus(lines, tau):
    """Exact-enough maximum of |n.C| <= tau over the sphere.

    Candidates are a grid on the hemisphere, every pairwise intersection of the
    boundary circles n_i.C = +-tau and a ring of points on every boundary
    circle. Counts use a tolerance of 1e-9 relative to tau so candidates lying
    exactly on a boundary are counted.
    """
    n = lines.n[np.linalg.norm(lines.n, axis=1) > tau]
    cands = [exp_map(np.stack(np.meshgrid(*[np.linspace(-np.pi / 2, np.pi / 2, 201)] * 2), -1).reshape(-1, 2))]
    k = n.shape[0]
    for i in range(k):
        for j in range(i + 1, k):
            A = n[[i, j]]
            m = np.cross(A[0], A[1])
            if np.linalg.norm(m) < 1e-12:
                continue
            m /= np.linalg.norm(m)
            for si in (-1, 1):
                for sj in (-1, 1):
                    x0 = np.linalg.lstsq(A, tau * np.array([si, sj], dtype=float), rcond=None)[0]
                    r = 1 - x0 @ x0
                    if r >= 0:
                        cands.append(np.array([x0 + np.sqrt(r) * m, x0 - np.sqrt(r) * m]))
    phis = np.linspace(0, 2 * np.pi, 16, endpoint=False)
    for ni in n:
        u = ni / np.linalg.norm(ni)
        a = np.cross(u, [1.0, 0, 0] if abs(u[0]) < 0.9 else [0, 1.0, 0])
        a /= np.linalg.norm(a)
        b = np.cross(u, a)
        for s in (-1, 1):
            d = s * tau / np.linalg.norm(ni)
            ring = d * u + np.sqrt(1 - d * d) * (np.outer(np.cos(phis), a) + np.outer(np.sin(phis), b))
            cands.append(ring)
    P = np.concatenate(cands)
    always = int(np.count_nonzero(np.linalg.norm(lines.n, axis=1) <= tau))
    if k == 0:
        return always
    return always + int((np.abs(P @ n.T) <= tau * (1 + 1e-9)).sum(axis=1).max())


def test_bnb_matches_oracle_on_small_instances():
    rng = np.random.default_rng(7)
    for trial in range(100):
        tau = [1e-3, 1e-2][trial % 2]
        k = int(rng.integers(3, 41))
        lines, _ = planted_lines(rng, k, tau, frac=rng.uniform(0.2, 0.8))
        res = bnb_search(lines, tau)
        assert res.inliers.size == oracle_max_consensus(lines, tau)


def test_evaluated_branches_bound_sampled_counts():
    rng = np.random.default_rng(8)
    samples = violations = 0
    while samples < 100_000:
        tau = rng.choice([1e-3, 1e-2])
        lines, _ = planted_lines(rng, int(rng.integers(5, 41)), tau)
        branches = []
        bnb_search(lines, tau, on_branch=branches.append)
        for br in branches[:: max(1, len(branches) // 60)]:
            phi = br.center + rng.uniform(-br.half_side, br.half_side, (100, 2))
            counts = (np.abs(exp_map(phi) @ lines.n.T) <= tau).sum(axis=1)
            violations += int(np.count_nonzero(counts > br.upper))
            assert br.upper >= br.lower
            samples += 100
    assert violations == 0


def test_concurrent_lines_recover_pole():
    rng = np.random.default_rng(9)
    for _ in range(20):
        h0 = exp_map(rng.uniform(-1.2, 1.2, 2))
        n = rng.normal(size=(3, 3))
        n -= np.outer(n @ h0, h0)
        lines = make_lines(n)
        res = bnb_search(lines, 1e-3)
        assert res.inliers.size == 3
        assert np.max(np.abs(n @ res.C_hat)) <= 1e-3
        polished = refine_pole(lines, res.C_hat, np.ones(3, dtype=bool))
        assert np.arccos(min(1.0, polished @ h0)) < 2 * BnbConfig().gamma_min


def test_rotation_only_instance_has_pole_at_origin(rng):
    p = rng.uniform(-1, 1, (40, 3))
    q = p @ rotation_about_axis([0, 0, 1.0], 0.9).T
    C = CorrespondenceSet(p, q, GravityPair.down())
    res, _ = solve_stage2(C, np.arange(40), 1e-6)
    assert np.allclose(res.C_hat, [0, 0, 1], atol=1e-9)
    assert np.allclose(res.C0, [0, 0], atol=1e-9)


def test_recover_pole_examples():
    assert np.array_equal(recover_pole([0, 0, 1.0]), [0, 0])
    assert recover_pole([1.0, 0, 0]) is None
    assert np.allclose(recover_pole([0.6, 0, 0.8]), [0.75, 0])


def test_sign_symmetry():
    rng = np.random.default_rng(10)
    for _ in range(30):
        lines, _ = planted_lines(rng, 30, 1e-2)
        flipped = make_lines(-lines.n)
        assert bnb_search(lines, 1e-2).inliers.size == bnb_search(flipped, 1e-2).inliers.size


def test_determinism_and_thread_invariance():
    rng = np.random.default_rng(11)
    lines, _ = planted_lines(rng, 200, 1e-2, frac=0.1)
    a = bnb_search(lines, 1e-2)
    b = bnb_search(lines, 1e-2)
    c = bnb_search(lines, 1e-2, BnbConfig(threads=4))
    for other in (b, c):
        assert np.array_equal(a.C_hat, other.C_hat)
        assert a.branches_expanded == other.branches_expanded
        assert np.array_equal(a.inliers, other.inliers)


def test_empty_lines():
    with pytest.raises(EmptyInput):
        bnb_search(make_lines(np.empty((0, 3))), 1e-3)
