import numpy as np
import pytest

from adialab import eigenpath as ep
from adialab import models
from adialab.errors import NoFoldInRange, PathTruncated


def test_flip_family_fixed_point_is_symmetric(two_level):
    fr = models.make_frame(two_level, two_level.point(0.0, [0.5]),
                           seed_vector=np.array([1.0, 1.0]))
    w = ep.solve_fixed_point(two_level, fr, 0.3, np.array([1.0, 1.0]))
    assert np.allclose(w, np.array([1, 1]) / np.sqrt(2), atol=1e-12)


def test_x_independent_model_any_seed():
    m = models.ModelSpec(dim=3, p=1,
                         h=lambda q: np.diag([0.0, 1.0 + q.t, 3.0]).astype(complex),
                         is_real=True, selected_index=1)
    fr = models.make_frame(m, m.point(0.0, [0.5]))
    for seed in (np.array([0.2, 0.9, 0.1]), np.array([0.0, 1.0, 0.4])):
        w = ep.solve_fixed_point(m, fr, 0.5, seed)
        assert np.linalg.norm(np.abs(w) - [0, 1, 0]) < 1e-12


def test_mcww_matches_scalar_bisection_oracle(mcww_plain):
    # ground state of [[k u^2, W], [W, k(1-u^2)]] via the closed 2x2 form,
    # independent of the package eigensolver path
    kappa, om = 0.3, 1.0

    def phi1(u):
        a, b = kappa * u * u, kappa * (1 - u * u)
        lam = 0.5 * (a + b) - np.sqrt(0.25 * (a - b) ** 2 + om ** 2)
        vec = np.array([om, lam - a])
        vec = vec / np.linalg.norm(vec)
        return abs(vec[0])

    lo, hi = 1e-9, 1 - 1e-9
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if mid - phi1(mid) > 0:
            hi = mid
        else:
            lo = mid
    u_oracle = 0.5 * (lo + hi)
    fr = models.make_frame(mcww_plain, mcww_plain.point(0.0, [0.5, 0.5]))
    w = ep.solve_fixed_point(mcww_plain, fr, 0.0, np.array([0.6, 0.8]))
    assert abs(abs(w[0]) - u_oracle) < 1e-10
    assert abs(abs(w[1]) - np.sqrt(1 - u_oracle ** 2)) < 1e-10


def test_fixed_point_residual_invariant(mcww_detuned):
    fr = models.make_frame(mcww_detuned, mcww_detuned.point(0.0, [0.5, 0.5]))
    cfg = ep.FixedPointConfig()
    w = ep.solve_fixed_point(mcww_detuned, fr, 0.8, fr.anchor_vector, cfg)
    resid = np.linalg.norm(w - fr.phi(mcww_detuned.point(0.8, mcww_detuned.x_of(w))))
    assert resid <= 10 * cfg.picard_tol
    assert abs(np.linalg.norm(w) - 1.0) < 1e-10


# ------------------------------------------------------------- continuation

def test_flip_family_path(two_level):
    gamma = two_level.extras["gamma"]
    fr = models.make_frame(two_level, two_level.point(0.0, [0.5]),
                           seed_vector=np.array([1.0, 1.0]))
    path = ep.continue_path(two_level, fr, (0.0, 1.0), np.array([1.0, 1.0]),
                            ep.FixedPointConfig(continuation_step=0.01))
    assert np.max(np.abs(path.lambdas - 0.5 * np.vectorize(gamma)(path.times))) < 1e-12
    # Lambda(1) = (1/2) * int_0^1 gamma = (1/2) * (1 + 0.5 * (1 - cos 1))
    assert path.phase[-1] == pytest.approx(0.5 * (1 + 0.5 * (1 - np.cos(1.0))), abs=1e-10)
    assert path.residual.max() <= 1e-8
    assert np.max(np.abs(np.linalg.norm(path.omegas, axis=1) - 1)) < 1e-10


def test_x_independent_path_zero_defect():
    m = models.ModelSpec(dim=2, p=1,
                         h=lambda q: np.array([[np.cos(q.t), np.sin(q.t)],
                                               [np.sin(q.t), -np.cos(q.t)]],
                                              dtype=complex),
                         is_real=True, selected_index=1)
    fr = models.make_frame(m, m.point(0.0, [0.5]), seed_vector=np.array([1.0, 0.0]))
    path = ep.continue_path(m, fr, (0.0, 1.0), np.array([1.0, 0.0]),
                            ep.FixedPointConfig(continuation_step=0.01))
    # the frame equals the smooth eigenvector and the interior defect is O(dt^2)
    assert path.phase_defect[1:-1].max() < 1e-6


def test_phase_defect_second_order(mcww_detuned):
    fr = models.make_frame(mcww_detuned, mcww_detuned.point(0.0, [0.5, 0.5]))
    defects = {}
    for dt in (0.02, 0.01):
        path = ep.continue_path(mcww_detuned, fr, (0.0, 0.5), fr.anchor_vector,
                                ep.FixedPointConfig(continuation_step=dt))
        defects[dt] = path.phase_defect[1:-1].max()
    ratio = defects[0.02] / defects[0.01]
    assert 2.5 < ratio < 6.0


def test_gauge_property_same_ray(mcww_detuned):
    fr = models.make_frame(mcww_detuned, mcww_detuned.point(0.0, [0.5, 0.5]))
    cfg = ep.FixedPointConfig(continuation_step=0.05)
    seed = fr.anchor_vector
    p1 = ep.continue_path(mcww_detuned, fr, (0.0, 0.5), seed, cfg)
    p2 = ep.continue_path(mcww_detuned, fr, (0.0, 0.5), np.exp(0.7j) * seed, cfg)
    overlap = np.abs(np.einsum("ki,ki->k", p1.omegas.conj(), p2.omegas))
    assert np.max(np.abs(overlap - 1)) < 1e-10


def test_real_model_real_path(mcww_detuned_path):
    assert np.max(np.abs(mcww_detuned_path.omegas.imag)) < 1e-10


def test_path_phase_normalization_complex_model():
    # complex Hermitian family: the raw branch picks up a phase that the
    # correction removes
    def h(q):
        c = np.exp(1j * 0.7 * q.t) * (0.4 + 0.2 * q.x[0])
        return np.array([[1.0, c], [np.conj(c), -1.0]])

    m = models.ModelSpec(dim=2, p=1, h=h, selected_index=1)
    fr = models.make_frame(m, m.point(0.0, [0.5]))
    path = ep.continue_path(m, fr, (0.0, 1.0), fr.anchor_vector,
                            ep.FixedPointConfig(continuation_step=0.005))
    assert path.phase_defect[1:-1].max() < 5e-4
    assert path.residual.max() < 1e-8


# ------------------------------------------------------ fold and counting

def test_count_solutions_at_zero(rotation):
    count, roots = ep.count_solutions(rotation, 0.0)
    assert count == 1
    assert roots[0] == pytest.approx(1.0)


def test_count_three_above_fold(rotation):
    tau = ep.detect_fold(rotation, (0.05, 1.0))
    assert 0 < tau < 1
    assert ep.count_solutions(rotation, tau - 1e-3, 200001)[0] == 1
    assert ep.count_solutions(rotation, tau + 1e-3, 200001)[0] == 3


def test_tangency_double_root(rotation):
    # at the fold both the residual and its derivative vanish at the dip
    tau = ep.detect_fold(rotation, (0.05, 1.0))
    theta = rotation.extras["theta"]

    def r(y):
        return y - np.cos(0.5 * tau * theta(y * y))

    ys = np.linspace(0.2, 0.9, 20001)
    k = np.argmin(np.abs(r(ys)))
    ystar = ys[k]
    dr = (r(ystar + 1e-6) - r(ystar - 1e-6)) / 2e-6
    assert abs(r(ystar)) < 1e-6
    assert abs(dr) < 1e-3


def test_no_fold_for_flip_family(two_level):
    with pytest.raises(NoFoldInRange):
        ep.detect_fold(two_level, (0.0, 1.0))


def test_no_fold_when_rescaled():
    scaled = models.builtin_model("rotation_bifurcation", {"scale": 0.5})
    with pytest.raises(NoFoldInRange):
        ep.detect_fold(scaled, (0.05, 1.0))


def test_near_fold_branch_truncates(rotation):
    tau = ep.detect_fold(rotation, (0.05, 1.0))
    _, roots = ep.count_solutions(rotation, 1.0, 20001)
    y_max = rotation.extras["y_max"]
    y0 = min(roots, key=lambda r: abs(r - y_max))
    seed = np.array([y0, np.sqrt(1 - y0 * y0)])
    fr = models.make_frame(rotation, rotation.point(1.0, [y0 * y0]),
                           seed_vector=seed)
    with pytest.raises(PathTruncated) as err:
        ep.continue_path(rotation, fr, (1.0, 0.0), seed,
                         ep.FixedPointConfig(continuation_step=1e-3))
    assert abs(err.value.t_fail - tau) < 1e-2
    assert err.value.path is not None
    assert len(err.value.path) > 10


def test_cumulative_simpson_accuracy():
    ts = np.linspace(0.0, 2.0, 201)
    vals = np.exp(ts)
    approx = ep.cumulative_simpson(vals, ts[1] - ts[0])
    assert np.max(np.abs(approx - (np.exp(ts) - 1.0))) < 1e-8
