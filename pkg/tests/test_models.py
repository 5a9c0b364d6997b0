import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from adialab import models
from adialab.errors import (
    NonHermitian,
    OutOfDomain,
    TruncationTooSmall,
    UnknownModel,
)
from adialab.scalarfn import as_scalar_fn, constant, sinusoid, tabulated
from conftest import random_hermitian


# --------------------------------------------------------------------- h(q)

def test_two_level_flip_matrix(two_level_const):
    q = two_level_const.point(0.3, [0.5])
    h = models.evaluate_h(two_level_const, q)
    assert np.allclose(h, [[0, 0.5], [0.5, 0]])


def test_two_level_flip_zero_coordinate(two_level_const):
    h = models.evaluate_h(two_level_const, two_level_const.point(0.7, [0.0]))
    assert np.allclose(h, 0.0)


def test_mcww_zero_kappa():
    m = models.builtin_model("double_well_mcww", {"kappa": 0.0, "Omega": 1.0})
    h = models.evaluate_h(m, m.point(0.2, [0.9, 0.1]))
    assert np.allclose(h, [[0, 1], [1, 0]])


def test_sinusoid_drive_at_origin():
    m = models.builtin_model("two_level_flip",
                             {"gamma": {"kind": "sinusoid", "c0": 1, "c1": 0.5, "c2": 1}})
    h = models.evaluate_h(m, m.point(0.0, [0.5]))
    assert np.allclose(h, [[0, 0.5], [0.5, 0]])


def test_non_hermitian_rejected():
    bad = models.ModelSpec(dim=2, p=1,
                           h=lambda q: np.array([[0, 1], [0, 0]], dtype=complex))
    with pytest.raises(NonHermitian):
        models.evaluate_h(bad, bad.point(0.0, [0.5]))


def test_out_of_domain_rejected(two_level_const):
    with pytest.raises(OutOfDomain):
        models.evaluate_h(two_level_const, two_level_const.point(0.0, [3.0]))
    with pytest.raises(OutOfDomain):
        models.evaluate_h(two_level_const, two_level_const.point(9.0, [0.5]))


def test_gauge_invariance_bitwise(two_level):
    # H depends on the state only through |v_j|^2
    v = np.array([0.6 + 0.2j, 0.1 - 0.77j])
    h1 = models.evaluate_h_state(two_level, 0.4, v)
    h2 = models.evaluate_h_state(two_level, 0.4, np.exp(1.23j) * v)
    assert np.max(np.abs(h1 - h2)) < 1e-15


# --------------------------------------------------- spectral decomposition

def test_decompose_flip_matrix():
    dec = models.spectral_decompose(np.array([[0, 0.5], [0.5, 0]], dtype=complex))
    assert np.allclose(dec.eigenvalues, [-0.5, 0.5])
    assert np.allclose(dec.projectors[0], 0.5 * np.array([[1, -1], [-1, 1]]))
    assert np.allclose(dec.projectors[1], 0.5 * np.array([[1, 1], [1, 1]]))
    assert dec.gap == pytest.approx(1.0)


def test_decompose_diagonal():
    dec = models.spectral_decompose(np.diag([0.0, 1.0, 2.0]).astype(complex))
    assert np.allclose(dec.eigenvalues, [0, 1, 2])
    for j in range(3):
        expected = np.zeros((3, 3))
        expected[j, j] = 1.0
        assert np.allclose(dec.projectors[j], expected)


def _charpoly_faddeev_leverrier(h):
    """Characteristic polynomial coefficients by the trace recursion
    (independent of any eigensolver)."""
    n = h.shape[0]
    coeffs = [1.0 + 0.0j]
    m = np.zeros_like(h)
    for k in range(1, n + 1):
        m = h @ m + coeffs[-1] * np.eye(n)
        coeffs.append(-np.trace(h @ m) / k)
    return np.array(coeffs)          # descending powers


def test_decompose_vs_companion_oracle():
    h = random_hermitian(6, seed=42)
    coeffs = _charpoly_faddeev_leverrier(h)
    # companion matrix of the monic characteristic polynomial
    comp = np.diag(np.ones(5, dtype=complex), -1)
    comp[:, -1] = -coeffs[1:][::-1]
    roots = np.sort_complex(np.linalg.eigvals(comp)).real
    dec = models.spectral_decompose(h)
    assert np.max(np.abs(np.sort(dec.raw_eigenvalues) - np.sort(roots))) < 1e-8


@settings(max_examples=25, deadline=None)
@given(st.integers(min_value=2, max_value=7), st.integers(min_value=0, max_value=10**6))
def test_decomposition_invariants(n, seed):
    h = random_hermitian(n, seed)
    dec = models.spectral_decompose(h)
    eye = np.eye(n)
    total = np.zeros_like(h)
    for proj in dec.projectors:
        assert models.opnorm(proj @ proj - proj) < 1e-10
        assert models.opnorm(proj - proj.conj().T) < 1e-10
        total = total + proj
    assert models.opnorm(total - eye) < 1e-10
    for i in range(dec.nclusters):
        for j in range(i + 1, dec.nclusters):
            assert models.opnorm(dec.projectors[i] @ dec.projectors[j]) < 1e-10
    assert models.opnorm(dec.reconstruct() - h) < 1e-10 * max(models.opnorm(h), 1)


def test_degenerate_merge():
    h = np.diag([1.0, 1.0 + 1e-12, 5.0]).astype(complex)
    dec = models.spectral_decompose(h)
    assert dec.nclusters == 2
    assert dec.multiplicities[0] == 2


# ---------------------------------------------------- hypothesis validation

def test_validate_two_level(two_level_const):
    xs = np.linspace(0.2, 1.0, 20)
    grid = models.grid_points(np.linspace(0, 1, 20), xs, 1)
    rep = models.validate_hypotheses(two_level_const, grid)
    # eigenvalues are +-gamma*x, so the measured gap is 2*min(x)
    assert rep.gap == pytest.approx(2 * xs.min(), rel=1e-12)
    assert rep.simple_everywhere
    assert rep.delta == pytest.approx(1.0)
    assert rep.is_real_ok
    assert two_level_const.delta_bound == pytest.approx(rep.delta)


def test_validate_constant_diagonal():
    m = models.ModelSpec(dim=2, p=1, h=lambda q: np.diag([0.0, 1.0]).astype(complex),
                         is_real=True)
    rep = models.validate_hypotheses(m, models.grid_points([0.0, 1.0], [0.0, 1.0], 1))
    assert rep.gap == pytest.approx(1.0)
    assert rep.delta == pytest.approx(0.0, abs=1e-12)


def test_validate_rotation_gap(rotation):
    grid = models.grid_points(np.linspace(0, 1, 7), np.linspace(0, 1, 7), 1)
    rep = models.validate_hypotheses(rotation, grid)
    assert rep.gap == pytest.approx(2.0, abs=1e-10)
    assert rep.simple_everywhere


def test_genericity_margin_detects_symmetric_spectrum():
    # spectrum {-1, 0, 1} tracked at the middle: mu_i + mu_j hits zero
    m = models.ModelSpec(dim=3, p=1,
                         h=lambda q: np.diag([-1.0, 0.0, 1.0]).astype(complex),
                         selected_index=1)
    rep = models.validate_hypotheses(m, [m.point(0.0, [0.5])])
    assert not rep.genericity_ok


# ------------------------------------------------------------ smooth frame

def test_frame_returns_anchor_at_anchor(two_level_const):
    q0 = two_level_const.point(0.0, [1.0])
    fr = models.make_frame(two_level_const, q0, seed_vector=np.array([1.0, 1.0]))
    assert np.allclose(fr.phi(q0), fr.anchor_vector)


def test_frame_constant_for_flip_family(two_level):
    fr = models.make_frame(two_level, two_level.point(0.0, [1.0]),
                           seed_vector=np.array([1.0, 1.0]))
    target = np.array([1.0, 1.0]) / np.sqrt(2)
    for t in (0.0, 0.4, 0.9):
        for x in (0.2, 0.6, 1.0):
            assert np.allclose(fr.phi(two_level.point(t, [x])), target)


def test_frame_matches_rotation_eigenvector(rotation):
    theta = rotation.extras["theta"]
    fr = models.make_frame(rotation, rotation.point(0.0, [0.3]),
                           seed_vector=np.array([1.0, 0.0]))
    for t, x in [(0.2, 0.3), (0.5, 0.6), (0.9, 0.1)]:
        a = 0.5 * t * float(theta(x))
        expected = np.array([np.cos(a), np.sin(a)])
        got = fr.phi(rotation.point(t, [x]))
        assert np.linalg.norm(got - expected) < 1e-10


def test_frame_eigen_residual(mcww_detuned):
    fr = models.make_frame(mcww_detuned, mcww_detuned.point(0.0, [0.5, 0.5]))
    q = mcww_detuned.point(0.7, [0.3, 0.7])
    phi = fr.phi(q)
    h = models.evaluate_h(mcww_detuned, q)
    lam = np.vdot(phi, h @ phi).real
    assert abs(np.linalg.norm(phi) - 1) < 1e-10
    assert np.linalg.norm(h @ phi - lam * phi) < 1e-8


def test_frame_continuity_two_resolutions(mcww_detuned):
    fr = models.make_frame(mcww_detuned, mcww_detuned.point(0.0, [0.5, 0.5]))
    diffs = {}
    for n in (50, 100):
        ts = np.linspace(0.0, 1.0, n + 1)
        vals = [fr.phi(mcww_detuned.point(t, [0.4, 0.6])) for t in ts]
        diffs[n] = max(np.linalg.norm(b - a) for a, b in zip(vals, vals[1:]))
    # increments scale like the step
    assert diffs[100] < 0.75 * diffs[50]


def test_frame_reanchors_on_weak_overlap(rotation):
    theta = rotation.extras["theta"]
    fr = models.make_frame(rotation, rotation.point(0.0, [0.3]),
                           seed_vector=np.array([1.0, 0.0]))
    # walk the frame along t: the eigenvector rotates away from the anchor
    # until the overlap crosses the floor and the frame re-anchors
    x = 0.3
    for t in np.linspace(0.0, 1.0, 21):
        got = fr.phi(rotation.point(float(t), [x]))
        a = 0.5 * t * float(theta(x))
        expected = np.array([np.cos(a), np.sin(a)])
        assert min(np.linalg.norm(got - expected),
                   np.linalg.norm(got + expected)) < 1e-9
    assert len(fr.reanchor_events) >= 1


def test_frame_derivative_matches_finite_difference(mcww_detuned):
    fr = models.make_frame(mcww_detuned, mcww_detuned.point(0.0, [0.5, 0.5]))
    q = mcww_detuned.point(0.3, [0.45, 0.55])
    _, dphis = fr.phi_and_dx(q)
    h = 1e-6
    for j in range(2):
        fd = (fr.phi(q.shift_x(j, h)) - fr.phi(q.shift_x(j, -h))) / (2 * h)
        assert np.linalg.norm(fd - dphis[j]) < 1e-7


# ---------------------------------------------------------------- builtins

def test_unknown_model():
    with pytest.raises(UnknownModel):
        models.builtin_model("does_not_exist")


def test_anharmonic_truncation_floor():
    with pytest.raises(TruncationTooSmall):
        models.builtin_model("truncated_anharmonic", {"dim": 4})


def test_anharmonic_gap_growth():
    m = models.builtin_model("truncated_anharmonic", {"dim": 64})
    ev = m.extras["h0_eigenvalues"]
    gaps = np.diff(ev[:21])
    j = np.arange(1, 21)
    a = np.vstack([np.ones_like(j, float), np.log(j)]).T
    coef, *_ = np.linalg.lstsq(a, np.log(gaps), rcond=None)
    assert coef[1] > 0.5


def test_anharmonic_derivatives_consistent():
    m = models.builtin_model(
        "truncated_anharmonic",
        {"dim": 12, "a": {"kind": "linear", "c0": 0.5, "c1": 0.3},
         "b": {"kind": "sinusoid", "c0": 1.0, "c1": 0.2, "c2": 2.0}})
    q = m.point(0.3, [0.4, 0.6])
    h = 1e-6
    for j in range(2):
        fd = (m.h(q.shift_x(j, h)) - m.h(q.shift_x(j, -h))) / (2 * h)
        assert np.max(np.abs(fd - m.dx(j, q))) < 1e-6
    fd = (m.h(models.ParameterPoint(q.t + h, q.x))
          - m.h(models.ParameterPoint(q.t - h, q.x))) / (2 * h)
    assert np.max(np.abs(fd - m.dt(q))) < 1e-6


def test_anharmonic_delta_target():
    m = models.builtin_model("truncated_anharmonic", {"dim": 16, "delta_target": 0.05})
    grid = models.grid_points([0.0, 0.5, 1.0], [0.0, 0.5, 1.0], 2)
    rep = models.validate_hypotheses(m, grid)
    assert rep.delta == pytest.approx(0.05, rel=1e-6)


def test_rotation_shape_validation(rotation):
    info = rotation.extras["shape"]
    assert 0 < info["s_max"] < 1
    assert info["theta_max"] < np.pi
    assert rotation.extras["fold_expected"]
    # rescaled shape: fold condition fails but the model still builds
    scaled = models.builtin_model("rotation_bifurcation", {"scale": 0.5})
    assert not scaled.extras["fold_expected"]


def test_model_from_config_tabulated():
    cfg = {"name": "two_level_flip",
           "gamma": {"kind": "tabulated",
                     "points": [[0.0, 1.0], [0.5, 1.2], [1.0, 0.9], [1.5, 1.0]]}}
    m = models.model_from_config(cfg)
    h = models.evaluate_h(m, m.point(0.5, [1.0]))
    assert h[0, 1].real == pytest.approx(1.2)


# ---------------------------------------------------------- scalar functions

def test_scalarfn_presets():
    assert constant(2.5)(0.3) == 2.5
    s = sinusoid(1.0, 0.5, 2.0)
    assert s(0.25) == pytest.approx(1.0 + 0.5 * np.sin(0.5))
    assert s.d(0.25) == pytest.approx(np.cos(0.5))
    tab = tabulated([[0, 0], [1, 1], [2, 4], [3, 9], [4, 16]])
    assert tab(2.5) == pytest.approx(6.25, abs=0.05)


def test_scalarfn_coercion():
    fn = as_scalar_fn(3.0)
    assert fn(10.0) == 3.0 and fn.d(10.0) == 0.0
    fn2 = as_scalar_fn(np.cos)
    assert fn2.d(0.3) == pytest.approx(-np.sin(0.3), abs=1e-8)
