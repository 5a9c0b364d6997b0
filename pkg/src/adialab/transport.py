"""Parallel transport of the doubled-operator spectral bundle.

Builds the generator K(t) = i * sum_j dP_j/dt * P_j from tracked projector
families, integrates the intertwiner i dW/dt = K W, forms the dynamical
phase and the comparison family V(t, s) = W(t) Phi(t, s) W(s)^{-1}, solves
the true two-parameter evolution generated by F(t), and quantifies how
closely the two agree as the drive slows down.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .eigenpath import FixedPointConfig, cumulative_simpson, continue_path
from .errors import NonRealEigenvaluePath, TrackingBroken
from .linearized import build_f, spectrum_f
from .models import ModelSpec, SmoothFrame, opnorm

__all__ = [
    "TransportBundle",
    "AdiabaticComparison",
    "build_transport_bundle",
    "kato_generator_series",
    "integrate_intertwiner",
    "dynamical_phase",
    "true_evolution",
    "compare_adiabatic",
    "source_integral_check",
    "fit_order",
]


def fit_order(eps_list, values):
    """Least-squares slope of log(values) against log(eps)."""
    x = np.log(np.asarray(eps_list, dtype=float))
    y = np.log(np.asarray(values, dtype=float))
    a = np.vstack([np.ones_like(x), x]).T
    coef, *_ = np.linalg.lstsq(a, y, rcond=None)
    return float(coef[1])


@dataclass
class TransportBundle:
    """Tracked spectral data of F along a uniform time grid.

    ``projectors[j]`` has shape (n_nodes, 2N, 2N) and follows family j by
    maximal projector overlap from one node to the next; ``values[j]`` are
    the matching eigenvalue means.  The kernel family is listed in
    ``kernel_family``.
    """

    times: np.ndarray
    f_samples: np.ndarray            # (n_nodes, 2N, 2N)
    values: list                     # per family: (n_nodes,) complex
    projectors: list                 # per family: (n_nodes, 2N, 2N)
    kernel_family: int
    omegas: np.ndarray               # branch vectors on the same grid
    k_samples: np.ndarray = None     # Kato generator, filled by kato pass
    w_samples: np.ndarray = None     # intertwiner, filled on integration
    intertwining_residual: float = None

    @property
    def h(self) -> float:
        return float(self.times[1] - self.times[0])

    @property
    def nfam(self) -> int:
        return len(self.values)

    @property
    def dim2(self) -> int:
        return self.f_samples.shape[1]

    def max_imag(self) -> float:
        return max(float(np.max(np.abs(np.asarray(v).imag))) for v in self.values)


def build_transport_bundle(model: ModelSpec, frame: SmoothFrame, t_range, n_nodes: int,
                           cfg: FixedPointConfig = None,
                           cluster_tol: float = None) -> TransportBundle:
    """Assemble F(t) and its tracked spectral families on a uniform grid.

    The nonlinear branch is continued on the same grid; per-node spectra are
    clustered and then matched to the previous node by the largest
    |tr(P_prev P_cur)| (ties broken by eigenvalue proximity).  A best
    overlap below 0.5 raises TrackingBroken.
    """
    t0, t1 = float(t_range[0]), float(t_range[1])
    step = (t1 - t0) / (n_nodes - 1)
    cfg = cfg or FixedPointConfig()
    cfg = FixedPointConfig(
        picard_max_iters=cfg.picard_max_iters, picard_tol=cfg.picard_tol,
        newton_tol=cfg.newton_tol, newton_max_iters=cfg.newton_max_iters,
        continuation_step=abs(step), fold_detection_window=cfg.fold_detection_window,
        stall_ratio=cfg.stall_ratio, max_step_jump=cfg.max_step_jump)
    path = continue_path(model, frame, (t0, t1), frame.anchor_vector, cfg)
    ops = [build_f(model, path, k) for k in range(len(path))]
    specs = [spectrum_f(op, cluster_tol) for op in ops]

    nfam = len(specs[0].clusters)
    order0 = np.argsort([c.mean.real for c in specs[0].clusters])
    values = [[specs[0].clusters[i].mean] for i in order0]
    projectors = [[specs[0].clusters[i].projector] for i in order0]
    kernel_family = int(np.flatnonzero(order0 == specs[0].kernel_index)[0])
    for k in range(1, len(specs)):
        clusters = specs[k].clusters
        if len(clusters) != nfam:
            raise TrackingBroken(
                f"cluster count changed from {nfam} to {len(clusters)} at node {k}")
        taken = set()
        for j in range(nfam):
            prev = projectors[j][-1]
            rank = np.trace(prev).real
            scores = [
                -np.inf if i in taken else
                float(np.real(np.trace(prev @ clusters[i].projector))) / rank
                for i in range(nfam)]
            best = int(np.argmax(scores))
            if scores[best] < 0.5:
                raise TrackingBroken(
                    f"family {j}: best projector overlap {scores[best]:.3f} at node {k}")
            taken.add(best)
            values[j].append(clusters[best].mean)
            projectors[j].append(clusters[best].projector)
    bundle = TransportBundle(
        times=path.times.copy(),
        f_samples=np.array([op.f for op in ops]),
        values=[np.asarray(v) for v in values],
        projectors=[np.asarray(p) for p in projectors],
        kernel_family=kernel_family,
        omegas=path.omegas.copy())
    bundle.k_samples = kato_generator_series(bundle.times, bundle.projectors)
    bundle.w_samples, bundle.intertwining_residual = integrate_intertwiner(bundle)
    return bundle


def kato_generator_series(times, projector_families) -> np.ndarray:
    """K(t_k) = i * sum_j dP_j/dt (t_k) P_j(t_k) with central differences.

    One-sided differences at both ends.  Accepts any list of projector
    series, so synthetic families can be checked against analytic
    generators.
    """
    times = np.asarray(times)
    n = len(times)
    dt = float(times[1] - times[0])
    dim = projector_families[0].shape[1]
    out = np.zeros((n, dim, dim), dtype=complex)
    for proj in projector_families:
        dproj = np.empty_like(proj)
        dproj[1:-1] = (proj[2:] - proj[:-2]) / (2 * dt)
        dproj[0] = (proj[1] - proj[0]) / dt
        dproj[-1] = (proj[-1] - proj[-2]) / dt
        out += 1j * np.einsum("kab,kbc->kac", dproj, proj)
    return out


def integrate_intertwiner(bundle: TransportBundle):
    """Solve i dW/dt = K W, W(0) = Id, with classical RK4 on node pairs.

    A full RK4 step spans two grid nodes (the midpoint stage uses the
    intermediate node); the intermediate W value is filled with a half step
    so that every node carries an intertwiner sample.  Returns the samples
    and the worst intertwining residual max_j ||P_j(t) W(t) - W(t) P_j(0)||.
    """
    k_s = bundle.k_samples
    times = bundle.times
    n = len(times)
    dim = bundle.dim2
    w = np.empty((n, dim, dim), dtype=complex)
    w[0] = np.eye(dim)

    def rhs(kmat, wmat):
        return -1j * (kmat @ wmat)

    for i in range(0, n - 2, 2):
        h2 = 2 * bundle.h
        w0 = w[i]
        k1 = rhs(k_s[i], w0)
        k2 = rhs(k_s[i + 1], w0 + 0.5 * h2 * k1)
        k3 = rhs(k_s[i + 1], w0 + 0.5 * h2 * k2)
        k4 = rhs(k_s[i + 2], w0 + h2 * k3)
        w[i + 2] = w0 + (h2 / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
        # midpoint fill: single half step with averaged generator stages
        h1 = bundle.h
        k1m = rhs(k_s[i], w0)
        kmid = 0.5 * (k_s[i] + k_s[i + 1])
        k2m = rhs(kmid, w0 + 0.5 * h1 * k1m)
        k3m = rhs(kmid, w0 + 0.5 * h1 * k2m)
        k4m = rhs(k_s[i + 1], w0 + h1 * k3m)
        w[i + 1] = w0 + (h1 / 6.0) * (k1m + 2 * k2m + 2 * k3m + k4m)
    if n % 2 == 0:
        # odd number of intervals: finish with one half step
        i = n - 2
        h1 = bundle.h
        w0 = w[i]
        k1m = rhs(k_s[i], w0)
        kmid = 0.5 * (k_s[i] + k_s[i + 1])
        k2m = rhs(kmid, w0 + 0.5 * h1 * k1m)
        k3m = rhs(kmid, w0 + 0.5 * h1 * k2m)
        k4m = rhs(k_s[i + 1], w0 + h1 * k3m)
        w[i + 1] = w0 + (h1 / 6.0) * (k1m + 2 * k2m + 2 * k3m + k4m)
    worst = 0.0
    idx = np.unique(np.linspace(0, n - 1, min(n, 33)).astype(int))
    for j in range(bundle.nfam):
        p0 = bundle.projectors[j][0]
        for k in idx:
            worst = max(worst, opnorm(bundle.projectors[j][k] @ w[k] - w[k] @ p0))
    return w, float(worst)


def _phase_integrals(bundle: TransportBundle) -> list:
    """Cumulative integrals of each eigenvalue family from the grid start."""
    return [cumulative_simpson(np.asarray(v).real, bundle.h) for v in bundle.values]


def _check_real(bundle: TransportBundle, tol: float = 1e-6):
    im = bundle.max_imag()
    if im > tol:
        raise NonRealEigenvaluePath(
            f"max |Im ell| = {im:.3e} > {tol:g}; dynamical phase undefined")


def dynamical_phase(bundle: TransportBundle, epsilon: float, t_index: int,
                    s_index: int = 0) -> np.ndarray:
    """Phi(t, s) = sum_j P_j(t0) exp(-i/eps int_s^t ell_j)."""
    _check_real(bundle)
    integrals = _phase_integrals(bundle)
    dim = bundle.dim2
    out = np.zeros((dim, dim), dtype=complex)
    for j in range(bundle.nfam):
        span = integrals[j][t_index] - integrals[j][s_index]
        phase = 1.0 if j == bundle.kernel_family else np.exp(-1j * span / epsilon)
        out += bundle.projectors[j][0] * phase
    return out


def true_evolution(bundle: TransportBundle, epsilon: float, backward: bool = False):
    """T(t_k, t_0) on the even grid nodes by the exponential midpoint rule.

    Each step spans two grid nodes and exponentiates F at the intermediate
    node, T_{k+2} = exp(-i * (2h/eps) * F(t_{k+1})) T_k; F is not Hermitian,
    so the factors are genuine matrix exponentials and T is not unitary.
    Grids are built so that 2h is at most eps/40.
    """
    n = len(bundle.times)
    dim = bundle.dim2
    f_s = bundle.f_samples
    idx = range(n - 1, 1, -2) if backward else range(0, n - 2, 2)
    out = np.empty(((n - 1) // 2 + 1, dim, dim), dtype=complex)
    t = np.eye(dim, dtype=complex)
    out[0] = t
    h2 = 2 * bundle.h * (-1 if backward else 1)
    for pos, i in enumerate(idx):
        mid = i - 1 if backward else i + 1
        t = scipy.linalg.expm(-1j * (h2 / epsilon) * f_s[mid]) @ t
        out[pos + 1] = t
    return out


@dataclass
class AdiabaticComparison:
    """Distance between the true evolution and the transported phase."""

    epsilon: float
    times: np.ndarray               # even grid nodes
    defect: np.ndarray              # ||T(t,0) - V(t,0)||
    uniform_bound: float            # sup_t ||T(t,0)||
    sup_defect: float


def compare_adiabatic(bundle: TransportBundle, eps_list):
    """Sup-norm defect ||T - V|| per epsilon plus the fitted order.

    Returns (list of AdiabaticComparison, fitted slope of log sup-defect
    against log eps, relative spread of the uniform bounds).
    """
    _check_real(bundle)
    n = len(bundle.times)
    even = np.arange(0, n, 2)
    w_of = bundle.w_samples
    comparisons = []
    for eps in eps_list:
        t_samples = true_evolution(bundle, eps)
        defects = np.empty(len(even))
        bound = 0.0
        for pos, k in enumerate(even):
            v = w_of[k] @ dynamical_phase(bundle, eps, k, 0)   # W(0) = Id
            defects[pos] = opnorm(t_samples[pos] - v)
            bound = max(bound, opnorm(t_samples[pos]))
        comparisons.append(AdiabaticComparison(
            epsilon=float(eps), times=bundle.times[even].copy(), defect=defects,
            uniform_bound=float(bound), sup_defect=float(np.max(defects))))
    slope = fit_order(eps_list, [c.sup_defect for c in comparisons])
    bounds = np.array([c.uniform_bound for c in comparisons])
    spread = float(bounds.max() / bounds.min() - 1.0)
    return comparisons, slope, spread


def source_integral_check(bundle: TransportBundle, eps_list, inject_kernel: float = 0.0):
    """Sup over t of the transported branch-velocity integral, per epsilon.

    Computes int_0^t V(t, s) (dw/ds, d conj w/ds) ds with cumulative Simpson
    (grouped as W(t) Phi(t, 0) * cumulative integral of Phi(0, s) W(s)^{-1}
    applied to the integrand).  ``inject_kernel`` adds that multiple of the
    kernel projector applied to a fixed direction to the integrand, the
    negative control that destroys the smallness.
    """
    _check_real(bundle)
    n = len(bundle.times)
    h = bundle.h
    omegas = bundle.omegas
    dot = np.empty_like(omegas)
    dot[1:-1] = (omegas[2:] - omegas[:-2]) / (2 * h)
    dot[0] = (omegas[1] - omegas[0]) / h
    dot[-1] = (omegas[-1] - omegas[-2]) / h
    chi = np.concatenate([dot, np.conj(dot)], axis=1)       # (n, 2N)
    if inject_kernel:
        direction = np.zeros(bundle.dim2, dtype=complex)
        direction[0] = 1.0
        for k in range(n):
            chi[k] += inject_kernel * (bundle.projectors[bundle.kernel_family][k]
                                       @ direction)
    integrals = _phase_integrals(bundle)
    sups = []
    for eps in eps_list:
        # g(s) = Phi(0, s) W(s)^{-1} chi(s)
        g = np.empty((n, bundle.dim2), dtype=complex)
        for k in range(n):
            x = np.linalg.solve(bundle.w_samples[k], chi[k])
            acc = np.zeros(bundle.dim2, dtype=complex)
            for j in range(bundle.nfam):
                phase = 1.0 if j == bundle.kernel_family else np.exp(
                    +1j * integrals[j][k] / eps)
                acc += phase * (bundle.projectors[j][0] @ x)
            g[k] = acc
        cumulative = np.stack(
            [cumulative_simpson(g[:, c], h) for c in range(bundle.dim2)], axis=1)
        sup = 0.0
        for k in range(0, n, 2):
            pre = np.zeros((bundle.dim2, bundle.dim2), dtype=complex)
            for j in range(bundle.nfam):
                phase = 1.0 if j == bundle.kernel_family else np.exp(
                    -1j * integrals[j][k] / eps)
                pre += phase * bundle.projectors[j][0]
            val = bundle.w_samples[k] @ (pre @ cumulative[k])
            sup = max(sup, float(np.linalg.norm(val)))
        sups.append(sup)
    slope = fit_order(eps_list, sups) if min(sups) > 0 else None
    return sups, slope
