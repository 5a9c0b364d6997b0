"""The doubled non-self-adjoint linearization and its spectral theory.

Along a nonlinear eigenvector branch w(t), deviations (D, conj D) obey a
linear system driven by F(t) = F0(t) + G(t), where F0 is the block diagonal
of the shifted Hamiltonian and minus its conjugate, and G is a rank-p sum of
outer products.  This module builds F, computes its biorthogonal spectral
decomposition, evaluates the finite perturbation determinant whose zeros
locate the perturbed eigenvalues, and provides the closed-form kernel and
persisting-eigenvalue projectors together with the realness discriminant
for the rank-structured counterexample family.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .eigenpath import EigenPath
from .errors import (
    ConstraintViolated,
    GapTooSmall,
    IllConditioned,
    NotScalarNonlinearity,
    NumeratorVanishes,
    TooCloseToUnperturbedSpectrum,
)
from .models import ModelSpec, SpectralDecomposition, opnorm, spectral_decompose

__all__ = [
    "DoubledOperator",
    "SpectralCluster",
    "BiorthogonalSpectrum",
    "build_f",
    "doubled_from_parts",
    "spectrum_f",
    "aw_determinant",
    "aw_roots_p1",
    "kernel_projector",
    "p1_eigenprojector",
    "P1Projector",
    "realness_discriminant",
    "assemble_tilted_instance",
    "search_nonreal_instance",
]


@dataclass
class DoubledOperator:
    """F(t) = F0 + G at one grid point, with its building blocks.

    ``h_shift`` is H(t, [w]) - lambda * Id, so the branch vector spans its
    kernel.  ``vs[j]`` are the shifted parameter derivatives applied to w,
    which are orthogonal to w by construction.
    """

    t: float
    omega: np.ndarray
    h_shift: np.ndarray
    vs: list
    p: int
    f0: np.ndarray = field(init=False)
    g: np.ndarray = field(init=False)
    f: np.ndarray = field(init=False)
    mus: list = field(init=False)
    nus: list = field(init=False)

    def __post_init__(self):
        n = self.h_shift.shape[0]
        hbar = -np.conj(self.h_shift)
        self.f0 = np.block([
            [self.h_shift, np.zeros((n, n))],
            [np.zeros((n, n)), hbar]])
        self.mus, self.nus = [], []
        g = np.zeros((2 * n, 2 * n), dtype=complex)
        for j, v in enumerate(self.vs):
            mu = np.concatenate([v, -np.conj(v)])
            nu = np.zeros(2 * n, dtype=complex)
            nu[j] = self.omega[j]
            nu[n + j] = np.conj(self.omega[j])
            g += np.outer(mu, np.conj(nu))
            self.mus.append(mu)
            self.nus.append(nu)
        self.g = g
        self.f = self.f0 + g

    @property
    def dim(self) -> int:
        return self.h_shift.shape[0]

    def shifted_decomposition(self) -> SpectralDecomposition:
        return spectral_decompose(self.h_shift)

    def f0_eigenvalues(self) -> np.ndarray:
        w = np.linalg.eigvalsh(self.h_shift)
        return np.concatenate([w, -w])


def build_f(model: ModelSpec, path: EigenPath, k: int) -> DoubledOperator:
    """Assemble the doubled operator at path grid point k.

    The shift to a zero tracked eigenvalue is applied here: both the
    Hamiltonian and the parameter derivatives lose their lambda parts, so
    vs[j] = (dH/dx_j) w - <w | (dH/dx_j) w> w is orthogonal to w.
    """
    t = float(path.times[k])
    w = path.omegas[k]
    q = model.at_state(t, w)
    h = np.asarray(model.h(q), dtype=complex)
    lam = path.lambdas[k]
    h_shift = h - lam * np.eye(model.dim)
    vs = []
    for j in range(model.p):
        dh = np.asarray(model.dx(j, q), dtype=complex)
        dhw = dh @ w
        vs.append(dhw - np.vdot(w, dhw) * w)
    return DoubledOperator(t=t, omega=w.copy(), h_shift=h_shift, vs=vs, p=model.p)


def doubled_from_parts(h_shift, omega, vs) -> DoubledOperator:
    """Doubled operator directly from a shifted Hamiltonian, kernel vector
    and derivative vectors (used by constructed instances and tests)."""
    h_shift = np.asarray(h_shift, dtype=complex)
    omega = np.asarray(omega, dtype=complex)
    vs = [np.asarray(v, dtype=complex) for v in vs]
    return DoubledOperator(t=0.0, omega=omega, h_shift=h_shift, vs=vs, p=len(vs))


# --------------------------------------------------------------------------
# biorthogonal spectral decomposition


@dataclass
class SpectralCluster:
    """One group of eigenvalues of F within the cluster tolerance."""

    mean: complex
    indices: np.ndarray
    projector: np.ndarray
    nilpotent_norm: float
    is_kernel: bool = False

    @property
    def size(self) -> int:
        return len(self.indices)


@dataclass
class BiorthogonalSpectrum:
    """Eigenvalues, biorthogonal eigenvectors and cluster projectors of F."""

    eigenvalues: np.ndarray     # sorted by (Re, Im)
    right_vectors: np.ndarray   # columns, unit norm
    left_vectors: np.ndarray    # columns, normalized so <phi_j | psi_j> = 1
    conditions: np.ndarray      # 1 / |<phi_j | psi_j>| with unit phi, psi
    clusters: list
    cluster_tol: float
    realness_verdict: bool
    kernel_index: int           # index into clusters, or -1

    def rank_one_projector(self, j: int) -> np.ndarray:
        return np.outer(self.right_vectors[:, j], np.conj(self.left_vectors[:, j]))

    def projector_sum(self) -> np.ndarray:
        out = np.zeros((self.right_vectors.shape[0],) * 2, dtype=complex)
        for c in self.clusters:
            out += c.projector
        return out

    @property
    def kernel_cluster(self) -> SpectralCluster:
        if self.kernel_index < 0:
            raise GapTooSmall("no isolated kernel cluster detected")
        return self.clusters[self.kernel_index]

    def quadruple_symmetry_defect(self, exclude_kernel: bool = True) -> float:
        """Max distance from {z, conj z, -z, -conj z} closure of the spectrum."""
        ev = self.eigenvalues
        if exclude_kernel and self.kernel_index >= 0:
            mask = np.ones(len(ev), bool)
            mask[self.clusters[self.kernel_index].indices] = False
            ev = ev[mask]
        worst = 0.0
        for z in ev:
            for im in (np.conj(z), -z, -np.conj(z)):
                worst = max(worst, float(np.min(np.abs(ev - im))))
        return worst


def spectrum_f(op: DoubledOperator, cluster_tol: float = None,
               condition_limit: float = 1e8) -> BiorthogonalSpectrum:
    """General eigendecomposition of F with clustering and diagnostics.

    Left eigenvectors come from the same LAPACK call (the adjoint problem);
    within each cluster the rank-m projector is Psi (Phi^H Psi)^{-1} Phi^H,
    which is basis independent.  Rank-one pairs are re-paired by maximal
    overlap and normalized to <phi | psi> = 1; an eigenpair whose inverse
    overlap exceeds ``condition_limit`` raises IllConditioned.
    """
    f = op.f
    if cluster_tol is None:
        cluster_tol = 1e-6 * max(opnorm(f), 1e-300)
    w, vl, vr = scipy.linalg.eig(f, left=True, right=True)
    order = np.lexsort((w.imag, w.real))
    w, vl, vr = w[order], vl[:, order], vr[:, order]
    vr = vr / np.linalg.norm(vr, axis=0)
    vl = vl / np.linalg.norm(vl, axis=0)

    # single-linkage clustering along the (Re, Im)-sorted list
    groups = []
    start = 0
    for i in range(1, len(w) + 1):
        if i == len(w) or abs(w[i] - w[i - 1]) > cluster_tol:
            groups.append(np.arange(start, i))
            start = i
    # re-pair left vectors to right vectors inside each cluster by overlap
    conditions = np.empty(len(w))
    for idx in groups:
        ov = np.abs(vl[:, idx].conj().T @ vr[:, idx])     # |<phi_a | psi_b>|
        used = set()
        perm = np.empty(len(idx), dtype=int)
        for b in np.argsort(-np.max(ov, axis=0)):         # most decisive first
            a_best = int(np.argmax([ov[a, b] if a not in used else -1.0
                                    for a in range(len(idx))]))
            used.add(a_best)
            perm[b] = a_best
        vl[:, idx] = vl[:, idx[perm]]
    overlaps = np.einsum("ij,ij->j", vl.conj(), vr)
    for j, o in enumerate(np.abs(overlaps)):
        conditions[j] = 1.0 / o if o > 0 else np.inf
        if conditions[j] > condition_limit:
            raise IllConditioned(j, conditions[j])
    vl = vl / np.conj(overlaps)[None, :]                  # now <phi_j | psi_j> = 1

    clusters = []
    for idx in groups:
        psi = vr[:, idx]
        phi = vl[:, idx]
        gram = phi.conj().T @ psi
        proj = psi @ np.linalg.solve(gram, phi.conj().T)
        mean = complex(np.mean(w[idx]))
        nil = opnorm((f - mean * np.eye(f.shape[0])) @ proj)
        clusters.append(SpectralCluster(mean, idx, proj, float(nil)))
    kernel_index = -1
    if clusters:
        kmin = int(np.argmin([abs(c.mean) for c in clusters]))
        if abs(clusters[kmin].mean) <= 10 * cluster_tol:
            kernel_index = kmin
            clusters[kmin].is_kernel = True
    realness = bool(np.max(np.abs(w.imag)) <= cluster_tol)
    return BiorthogonalSpectrum(w, vr, vl, conditions, clusters, float(cluster_tol),
                                realness, kernel_index)


# --------------------------------------------------------------------------
# finite-rank perturbation determinant


def _resolvent_apply(op: DoubledOperator, z: complex):
    """(F0 - z)^{-1} applied to each mu_j, via the eigensystem of h_shift."""
    w, vecs = np.linalg.eigh(op.h_shift)
    tops, bots = [], []
    for v in op.vs:
        coef = vecs.conj().T @ v
        top = vecs @ (coef / (w - z))
        coefc = vecs.conj().T @ v                          # bottom block solve
        bot = np.conj(vecs @ (coefc / (w + np.conj(z))))
        tops.append(top)
        bots.append(bot)
    return tops, bots


def aw_determinant(op: DoubledOperator, z: complex) -> complex:
    """The p x p perturbation determinant w(z) at a resolvent point of F0.

    Zeros of w in the resolvent set of F0 are exactly the eigenvalues of F
    there.  For real instances w(z) = w(-z) and w(z) = conj(w(-conj z)).
    """
    z = complex(z)
    dist = np.min(np.abs(op.f0_eigenvalues() - z))
    if dist <= 1e-8:
        raise TooCloseToUnperturbedSpectrum(f"z={z} within {dist:.2e} of spec(F0)")
    tops, bots = _resolvent_apply(op, z)
    n = op.dim
    mat = np.eye(op.p, dtype=complex)
    for j in range(op.p):
        for k in range(op.p):
            # <nu_k | (F0 - z)^{-1} mu_j>; the sign of the lower half of
            # mu_j is already absorbed into the bottom-block solve
            mat[j, k] += (np.conj(op.omega[k]) * tops[j][k]
                          + op.omega[k] * bots[j][k])
    return complex(np.linalg.det(mat))


def _p1_branch_data(op: DoubledOperator):
    if op.p != 1:
        raise NotScalarNonlinearity(f"p = {op.p}")
    dec = op.shifted_decomposition()
    zero = int(np.argmin(np.abs(dec.eigenvalues)))
    lams, projs = [], []
    for j in range(dec.nclusters):
        if j != zero:
            lams.append(dec.eigenvalues[j])
            projs.append(dec.projectors[j])
    coeffs = [complex((proj @ op.vs[0])[0]) for proj in projs]   # <e_1 | P_j v_1>
    return np.asarray(lams), projs, np.asarray(coeffs), dec, zero


def _aw_numerator_poly(op: DoubledOperator):
    """Coefficients (ascending, in u = z^2) of the determinant numerator."""
    from numpy.polynomial import polynomial as npoly

    lams, projs, coeffs, _, _ = _p1_branch_data(op)
    nprime = len(lams)
    omega1 = complex(op.omega[0])
    roots = lams ** 2
    # prod_k (lam_k^2 - u) = (-1)^n' * prod_k (u - lam_k^2)
    total = (-1.0) ** nprime * npoly.polyfromroots(roots)
    for j in range(nprime):
        others = np.delete(roots, j)
        term = (-1.0) ** (nprime - 1) * npoly.polyfromroots(others)
        total = npoly.polyadd(total, 2.0 * omega1 * lams[j] * coeffs[j] * term)
    return total, lams, projs, coeffs


def aw_roots_p1(op: DoubledOperator) -> np.ndarray:
    """All 2N' roots of the determinant numerator for p = 1.

    The numerator is a degree-N' polynomial in u = z^2 assembled from the
    shifted eigenvalues and the overlaps <e_1 | P_j v_1>; its roots are
    found by the companion-matrix eigensolver and unfolded to +-sqrt(u).
    """
    from numpy.polynomial import polynomial as npoly

    total, lams, _, _ = _aw_numerator_poly(op)
    u_roots = npoly.polyroots(total)
    z = np.sqrt(u_roots.astype(complex))
    out = np.concatenate([z, -z])
    return out[np.lexsort((out.imag, out.real))]


def kernel_projector(op: DoubledOperator, gap_floor: float = None) -> np.ndarray:
    """Rank-2 projector onto the persistent kernel of F, in closed form.

    P0 = [Id + R G]^{-1} Ptilde0 where Ptilde0 is the block diagonal of the
    rank-one projectors on w and conj(w) and R is the reduced inverse of F0
    on the complementary range.
    """
    n = op.dim
    dec = op.shifted_decomposition()
    zero = int(np.argmin(np.abs(dec.eigenvalues)))
    nonzero = [abs(dec.eigenvalues[j]) for j in range(dec.nclusters) if j != zero]
    if gap_floor is None:
        gap_floor = 10 * 1e-6 * max(opnorm(op.f), 1e-300)
    if nonzero and min(nonzero) <= gap_floor:
        raise GapTooSmall(f"kernel gap {min(nonzero):.3e} <= {gap_floor:.3e}")
    red = np.zeros((n, n), dtype=complex)
    for j in range(dec.nclusters):
        if j != zero:
            red += dec.projectors[j] / dec.eigenvalues[j]
    big_red = np.block([[red, np.zeros((n, n))],
                        [np.zeros((n, n)), -np.conj(red)]])
    pw = np.outer(op.omega, np.conj(op.omega))
    p_tilde = np.block([[pw, np.zeros((n, n))],
                        [np.zeros((n, n)), np.conj(pw)]])
    return np.linalg.solve(np.eye(2 * n) + big_red @ op.g, p_tilde)


@dataclass
class P1Projector:
    """Closed-form projector for a persisting shifted eigenvalue (p = 1)."""

    matrix: np.ndarray
    eigenvalue: float
    s_k: complex
    identity_value: complex     # omega_1 * s_k * <e_1 | P_k v_1>, equals 1


def _numerator_via_determinant(op: DoubledOperator, lams, lam_k) -> complex:
    """Evaluate the determinant numerator at a branch value, stably.

    The expanded-coefficient polynomial cancels catastrophically at its own
    near-roots.  Instead, w_tilde(u) = w(sqrt(u)) * prod_l (lam_l^2 - u) is
    a polynomial of degree N' in u = z^2, so its value at the center of a
    circle equals its discrete mean over deg+1 equidistant points on the
    circle (exactly, by discrete orthogonality).  The determinant itself is
    computed through resolvents, independently of the projector algebra.
    """
    u0 = complex(lam_k ** 2)
    u_all = lams ** 2
    others = np.abs(np.delete(u_all, np.argmin(np.abs(u_all - u0))) - u0)
    r = 1e-3 * max(abs(u0), 1.0)
    if len(others):
        r = min(r, 0.4 * float(np.min(others)))
    r = max(r, 1e-6)
    m = len(lams) + 1
    total = 0.0 + 0.0j
    for i in range(m):
        u = u0 + r * np.exp(2j * np.pi * i / m)
        z = np.sqrt(u)
        total += aw_determinant(op, z) * np.prod(u_all - u)
    return complex(total / m)


def p1_eigenprojector(op: DoubledOperator, k: int) -> P1Projector:
    """Spectral projector of F at the k-th nonzero shifted eigenvalue, p = 1.

    Implements the top-block formula P_k (Id - omega_1 s_k |v_1><e_1|) P_k
    with s_k assembled from the other branches and the numerator polynomial.
    ``k`` indexes the distinct nonzero eigenvalues of the shifted
    Hamiltonian in ascending order.
    """
    total, lams, projs, coeffs = _aw_numerator_poly(op)
    n = op.dim
    lam_k = lams[k]
    proj_k = projs[k]
    zeros_block = np.zeros((n, n), dtype=complex)
    if np.linalg.norm(op.vs[0]) < 1e-14:
        return P1Projector(np.block([[proj_k, zeros_block], [zeros_block, zeros_block]]),
                           float(np.real(lam_k)), None, 1.0)
    wk = _numerator_via_determinant(op, lams, lam_k)
    scale = max(abs(c) for c in total)
    if abs(wk) <= 1e-12 * scale:
        raise NumeratorVanishes(f"numerator ~ {wk:.3e} at eigenvalue {lam_k}")
    others = np.delete(lams ** 2, k)
    s_k = 2.0 * lam_k * np.prod(others - lam_k ** 2) / wk
    omega1 = complex(op.omega[0])
    rank1 = np.outer(op.vs[0], np.conj(np.eye(n)[0]))
    top = proj_k @ (np.eye(n) - omega1 * s_k * rank1) @ proj_k
    mat = np.block([[top, zeros_block], [zeros_block, zeros_block]])
    identity = omega1 * s_k * complex((proj_k @ op.vs[0])[0])
    return P1Projector(mat, float(np.real(lam_k)), complex(s_k), complex(identity))


# --------------------------------------------------------------------------
# realness discriminant and rank-structured counterexample instances


def realness_discriminant(e1, e2, omega, u1, u2, weights=None) -> float:
    """Sign certificate for the leading-order spectrum near the first branch.

    Returns (w1 <e1|u1> - w2 <e2|u2>)^2 + 4 w1 w2 <e1|u2> <e2|u1> with
    w_j = <e_j | omega> (overridable through ``weights``).  A negative value
    certifies that the large-second-branch doubled operator acquires a
    conjugate pair of non-real eigenvalues near the first branch.
    """
    e1 = np.asarray(e1, dtype=float)
    e2 = np.asarray(e2, dtype=float)
    omega = np.asarray(omega, dtype=float)
    u1 = np.asarray(u1, dtype=float)
    u2 = np.asarray(u2, dtype=float)
    for name, (a, b) in {"u1.omega": (u1, omega), "u2.omega": (u2, omega)}.items():
        if abs(float(a @ b)) > 1e-10 * max(1.0, np.linalg.norm(a)):
            raise ConstraintViolated(f"<{name}> = {float(a @ b):.3e} != 0")
    for name, v in {"e1": e1, "e2": e2, "omega": omega}.items():
        if abs(np.linalg.norm(v) - 1.0) > 1e-10:
            raise ConstraintViolated(f"{name} is not a unit vector")
    if abs(float(e1 @ e2)) > 1e-10:
        raise ConstraintViolated("e1 and e2 are not orthogonal")
    if weights is None:
        w1, w2 = float(e1 @ omega), float(e2 @ omega)
    else:
        w1, w2 = float(weights[0]), float(weights[1])
    return float((w1 * (e1 @ u1) - w2 * (e2 @ u2)) ** 2
                 + 4.0 * w1 * w2 * (e1 @ u2) * (e2 @ u1))


def assemble_tilted_instance(omega, u1, u2, lam1: float, lam2: float) -> DoubledOperator:
    """Doubled operator for H = lam1 P1 + lam2 P2 with kernel on omega.

    P1 projects onto span{u1, u2} (both orthogonal to omega), P2 onto the
    remaining complement; the derivative vectors are taken to be u1, u2
    themselves, realizable as dH/dx_j = |u_j><omega| + |omega><u_j|.
    """
    omega = np.asarray(omega, dtype=float)
    u1 = np.asarray(u1, dtype=float)
    u2 = np.asarray(u2, dtype=float)
    n = len(omega)
    basis = np.linalg.qr(np.stack([u1, u2], axis=1))[0]
    p1 = basis @ basis.T
    p0 = np.outer(omega, omega)
    p2 = np.eye(n) - p0 - p1
    h = lam1 * p1 + lam2 * p2
    return doubled_from_parts(h, omega, [u1, u2])


def search_nonreal_instance(dim: int = 5, seed: int = 0, max_draws: int = 100000,
                            threshold: float = -0.1, lam1: float = 1.0,
                            lam_ratio: float = 50.0):
    """Random search for an instance with negative realness discriminant.

    Draws unit omega and two vectors orthogonal to it, evaluates the
    discriminant with the first two coordinate directions, and on success
    assembles the large-second-branch instance.  Returns a dict with the
    instance pieces, the discriminant, and the number of draws used, or
    None when the budget is exhausted.
    """
    rng = np.random.default_rng(seed)
    eye = np.eye(dim)
    e1, e2 = eye[0], eye[1]
    for draw in range(1, max_draws + 1):
        omega = rng.standard_normal(dim)
        omega /= np.linalg.norm(omega)
        if min(abs(omega[0]), abs(omega[1])) < 0.05:
            continue
        us = []
        for _ in range(2):
            u = rng.standard_normal(dim)
            u -= (u @ omega) * omega
            us.append(u)
        disc = realness_discriminant(e1, e2, omega, us[0], us[1])
        if disc < threshold:
            op = assemble_tilted_instance(omega, us[0], us[1], lam1, lam_ratio * lam1)
            return {"omega": omega, "u1": us[0], "u2": us[1],
                    "discriminant": float(disc), "draws": draw, "operator": op}
    return None
