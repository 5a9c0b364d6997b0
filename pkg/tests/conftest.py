import numpy as np
import pytest

from adialab import models
from adialab.eigenpath import FixedPointConfig, continue_path
from adialab.scalarfn import linear, sinusoid


@pytest.fixture(scope="session")
def two_level():
    return models.builtin_model("two_level_flip", {"gamma": sinusoid(1.0, 0.5, 1.0)})


@pytest.fixture(scope="session")
def two_level_const():
    return models.builtin_model("two_level_flip", {"gamma": 1.0})


@pytest.fixture(scope="session")
def mcww_plain():
    return models.builtin_model(
        "double_well_mcww", {"kappa": 0.3, "Omega": 1.0})


@pytest.fixture(scope="session")
def mcww_detuned():
    return models.builtin_model(
        "double_well_mcww",
        {"kappa": linear(0.2, 0.1), "Omega": 1.0, "detuning": linear(0.1, 0.15)})


@pytest.fixture(scope="session")
def rotation():
    return models.builtin_model("rotation_bifurcation", {})


@pytest.fixture(scope="session")
def mcww_detuned_path(mcww_detuned):
    frame = models.make_frame(mcww_detuned, mcww_detuned.point(0.0, [0.5, 0.5]))
    return continue_path(mcww_detuned, frame, (0.0, 0.5), frame.anchor_vector,
                         FixedPointConfig(continuation_step=0.01))


def random_hermitian(n, seed, real=False):
    rng = np.random.default_rng(seed)
    m = rng.standard_normal((n, n))
    if not real:
        m = m + 1j * rng.standard_normal((n, n))
    return 0.5 * (m + m.conj().T)


def random_p1_operator(n, seed, delta=0.02):
    """Doubled operator of a random real symmetric model with one scalar
    nonlinear coordinate; the tracked eigenvalue is the middle one."""
    from adialab.linearized import doubled_from_parts

    rng = np.random.default_rng(seed)
    m = random_hermitian(n, seed, real=True)
    w, vecs = np.linalg.eigh(m)
    omega = vecs[:, n // 2]
    h_shift = m - w[n // 2] * np.eye(n)
    d = rng.standard_normal((n, n))
    d = 0.5 * (d + d.T) * delta
    v1 = d @ omega
    v1 -= (omega @ v1) * omega
    return doubled_from_parts(h_shift, omega, [v1])
