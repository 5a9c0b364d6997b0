"""Hamiltonian families H(t, x) and the linear spectral toolkit.

A model is a smooth map from a time t and p nonlinear coordinates
x = (|v_1|^2, ..., |v_p|^2) to a Hermitian matrix, together with its
parameter and time derivatives.  This module provides the builtin families,
hypothesis validation (gap, derivative bound, simplicity, realness,
genericity), eigendecomposition with degeneracy merging, and the smooth
eigenvector frame obtained by projecting a fixed anchor vector.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import oscillator
from .errors import (
    AnchorDegenerate,
    NonHermitian,
    OutOfDomain,
    SimplicityViolation,
    TruncationTooSmall,
    UnknownModel,
)
from .scalarfn import ScalarFn, as_scalar_fn

HERMITICITY_RTOL = 1e-12
REALNESS_RTOL = 1e-12
DEGENERACY_RTOL = 1e-8
FD_STEP = 1e-5

_BUILTIN_NAMES = (
    "two_level_flip",
    "double_well_mcww",
    "rotation_bifurcation",
    "truncated_anharmonic",
)


def opnorm(m) -> float:
    """Spectral norm, the operator norm used throughout."""
    return float(np.linalg.norm(m, 2))


@dataclass(frozen=True)
class ParameterPoint:
    """A point (t, x) in the model's parameter box."""

    t: float
    x: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "x", np.atleast_1d(np.asarray(self.x, dtype=float)))
        if not np.isfinite(self.t) or not np.all(np.isfinite(self.x)):
            raise OutOfDomain(f"non-finite parameter point ({self.t}, {self.x})")

    def shift_x(self, j: int, h: float) -> "ParameterPoint":
        x = self.x.copy()
        x[j] += h
        return ParameterPoint(self.t, x)


@dataclass
class ModelSpec:
    """A Hamiltonian family with derivatives and domain metadata.

    Parameters
    ----------
    dim : int
        Matrix size N.
    p : int
        Number of nonlinear components.
    h : callable
        ParameterPoint -> complex Hermitian (N, N) array.
    dh_dx : tuple of callables, optional
        Analytic maps ParameterPoint -> d H / d x_j; finite differences
        are used when absent.
    dh_dt : callable, optional
        Analytic map ParameterPoint -> d H / d t.
    is_real : bool
        Asserts conj(H) == H entrywise in the standard basis.
    selected_index : int
        Index (into the sorted distinct eigenvalues) of the tracked
        simple eigenvalue.
    t_box, x_box : (float, float)
        Declared closed parameter box; evaluations outside raise
        :class:`~adialab.errors.OutOfDomain`.
    """

    dim: int
    p: int
    h: object
    dh_dx: tuple = None
    dh_dt: object = None
    is_real: bool = False
    selected_index: int = 0
    delta_bound: float = None
    name: str = "custom"
    t_box: tuple = (-0.25, 1.25)
    x_box: tuple = (-0.25, 1.25)
    extras: dict = field(default_factory=dict)

    def point(self, t, x) -> ParameterPoint:
        return ParameterPoint(float(t), x)

    def x_of(self, v) -> np.ndarray:
        """Nonlinear coordinates of a state, x_j = |v_j|^2 for j < p."""
        v = np.asarray(v)
        return np.abs(v[: self.p]) ** 2

    def at_state(self, t, v) -> ParameterPoint:
        return ParameterPoint(float(t), self.x_of(v))

    def _check_domain(self, q: ParameterPoint):
        if not (self.t_box[0] <= q.t <= self.t_box[1]):
            raise OutOfDomain(f"t={q.t} outside {self.t_box}")
        if np.any(q.x < self.x_box[0]) or np.any(q.x > self.x_box[1]):
            raise OutOfDomain(f"x={q.x} outside {self.x_box}")

    def dx(self, j: int, q: ParameterPoint) -> np.ndarray:
        """d H / d x_j, analytic when supplied, else central differences."""
        if self.dh_dx is not None:
            return np.asarray(self.dh_dx[j](q))
        h = FD_STEP * (self.x_box[1] - self.x_box[0])
        return (self.h(q.shift_x(j, h)) - self.h(q.shift_x(j, -h))) / (2.0 * h)

    def dt(self, q: ParameterPoint) -> np.ndarray:
        if self.dh_dt is not None:
            return np.asarray(self.dh_dt(q))
        h = FD_STEP * (self.t_box[1] - self.t_box[0])
        qm = ParameterPoint(q.t - h, q.x)
        qp = ParameterPoint(q.t + h, q.x)
        return (self.h(qp) - self.h(qm)) / (2.0 * h)


def evaluate_h(model: ModelSpec, q: ParameterPoint) -> np.ndarray:
    """Evaluate H(q), enforcing Hermiticity (and realness when declared)."""
    model._check_domain(q)
    m = np.asarray(model.h(q), dtype=complex)
    scale = opnorm(m)
    if opnorm(m - m.conj().T) > HERMITICITY_RTOL * scale:
        raise NonHermitian(f"{model.name}: Hermiticity residual exceeds "
                           f"{HERMITICITY_RTOL:g} * ||H|| at {q}")
    if model.is_real and opnorm(m - m.conj()) > REALNESS_RTOL * scale:
        raise NonHermitian(f"{model.name}: declared real but conj(H) != H at {q}")
    return m


def evaluate_h_state(model: ModelSpec, t: float, v) -> np.ndarray:
    """H(t, [v]) with the substitution x_j = |v_j|^2."""
    return evaluate_h(model, model.at_state(t, v))


# --------------------------------------------------------------------------
# spectral decomposition with degeneracy merging


@dataclass
class SpectralDecomposition:
    """Distinct eigenvalues, multiplicities, orthogonal projectors and gap."""

    eigenvalues: np.ndarray        # distinct values, ascending
    multiplicities: np.ndarray
    projectors: list               # Hermitian idempotents, one per distinct value
    gap: float                     # min separation of adjacent distinct values
    raw_eigenvalues: np.ndarray    # all N values from the eigensolver

    @property
    def nclusters(self) -> int:
        return len(self.eigenvalues)

    def reconstruct(self) -> np.ndarray:
        out = np.zeros_like(self.projectors[0])
        for lam, proj in zip(self.eigenvalues, self.projectors):
            out = out + lam * proj
        return out


def spectral_decompose(h, degeneracy_tol: float = None) -> SpectralDecomposition:
    """Eigendecompose a Hermitian matrix, merging near-degenerate values.

    Eigenvalues closer than ``degeneracy_tol`` (default 1e-8 * ||h||) are
    merged into a single cluster with a rank-m projector.
    """
    h = np.asarray(h, dtype=complex)
    w, vecs = np.linalg.eigh(h)
    if degeneracy_tol is None:
        degeneracy_tol = DEGENERACY_RTOL * opnorm(h)
    # split ascending eigenvalues at jumps larger than the tolerance
    splits = np.flatnonzero(np.diff(w) > degeneracy_tol) + 1
    groups = np.split(np.arange(len(w)), splits)
    values, mults, projectors = [], [], []
    for idx in groups:
        block = vecs[:, idx]
        values.append(float(np.mean(w[idx])))
        mults.append(len(idx))
        projectors.append(block @ block.conj().T)
    values = np.asarray(values)
    gap = float(np.min(np.diff(values))) if len(values) > 1 else np.inf
    return SpectralDecomposition(values, np.asarray(mults), projectors, gap, w)


# --------------------------------------------------------------------------
# smooth eigenvector frame


@dataclass
class SmoothFrame:
    """Deterministic eigenvector choice by projected anchor transport.

    The frame returns P(q) phi0 / ||P(q) phi0|| where P(q) is the tracked
    eigenprojector and phi0 the anchor vector; the phase is inherited from
    the anchor, so the map is continuous while the anchor overlap
    <phi0 | P(q) phi0> stays above ``overlap_floor``.  Below the floor the
    frame re-anchors at the current point (continuity splice) and records
    the event.
    """

    model: ModelSpec
    anchor_point: ParameterPoint
    anchor_vector: np.ndarray
    overlap_floor: float = 2.0 ** -0.25
    reanchor_events: list = field(default_factory=list)

    def tracked_cluster(self, dec: SpectralDecomposition):
        j = self.model.selected_index
        if j >= dec.nclusters:
            raise SimplicityViolation(
                f"{self.model.name}: only {dec.nclusters} distinct eigenvalues, "
                f"cannot track index {j}")
        return j

    def phi(self, q: ParameterPoint) -> np.ndarray:
        h = evaluate_h(self.model, q)
        dec = spectral_decompose(h)
        j = self.tracked_cluster(dec)
        if dec.multiplicities[j] != 1:
            raise SimplicityViolation(
                f"{self.model.name}: tracked eigenvalue degenerate at {q}")
        proj = dec.projectors[j]
        w = proj @ self.anchor_vector
        overlap = float(np.real(np.vdot(self.anchor_vector, w)))
        if overlap < self.overlap_floor:
            if overlap < 1e-8:
                raise AnchorDegenerate(
                    f"{self.model.name}: anchor overlap {overlap:.3e} at {q}")
            # continuity splice: the projected value becomes the new anchor
            new_anchor = w / np.linalg.norm(w)
            self.reanchor_events.append((q, overlap))
            self.anchor_point = q
            self.anchor_vector = new_anchor
            return new_anchor
        return w / np.linalg.norm(w)


    def phi_and_dx(self, q: ParameterPoint):
        """Frame vector and its analytic x-derivatives at q.

        Uses the reduced-resolvent derivative of the tracked projector,
        dP = -S dH P - P dH S with S the sum of P_m / (lambda_m - lambda)
        over the other clusters, then differentiates the normalized
        projected anchor.
        """
        h = evaluate_h(self.model, q)
        dec = spectral_decompose(h)
        j = self.tracked_cluster(dec)
        if dec.multiplicities[j] != 1:
            raise SimplicityViolation(
                f"{self.model.name}: tracked eigenvalue degenerate at {q}")
        proj = dec.projectors[j]
        lam = dec.eigenvalues[j]
        red = np.zeros_like(proj)
        for m in range(dec.nclusters):
            if m != j:
                red += dec.projectors[m] / (dec.eigenvalues[m] - lam)
        w = proj @ self.anchor_vector
        nrm = np.linalg.norm(w)
        if float(np.real(np.vdot(self.anchor_vector, w))) < 1e-8:
            raise AnchorDegenerate(f"{self.model.name}: anchor overlap lost at {q}")
        phi = w / nrm
        dphis = []
        for jx in range(self.model.p):
            dh = self.model.dx(jx, q)
            dproj = -red @ dh @ proj - proj @ dh @ red
            dw = dproj @ self.anchor_vector
            dphi = dw / nrm - w * (np.real(np.vdot(w, dw)) / nrm**3)
            dphis.append(dphi)
        return phi, dphis


def smooth_eigenvector(frame: SmoothFrame, q: ParameterPoint) -> np.ndarray:
    """Unit eigenvector of the tracked eigenvalue at q (see SmoothFrame)."""
    return frame.phi(q)


def make_frame(model: ModelSpec, q0: ParameterPoint, overlap_floor: float = 2.0 ** -0.25,
               seed_vector=None) -> SmoothFrame:
    """Anchor a frame at q0 on the tracked eigenvector.

    ``seed_vector`` fixes the anchor phase: the anchor is the tracked unit
    eigenvector with positive overlap with the seed (default: the
    eigensolver's vector with its largest component made real positive).
    """
    dec = spectral_decompose(evaluate_h(model, q0))
    j = model.selected_index
    if j >= dec.nclusters or dec.multiplicities[j] != 1:
        raise SimplicityViolation(f"{model.name}: tracked eigenvalue not simple at anchor")
    proj = dec.projectors[j]
    if seed_vector is None:
        # any unit vector in the range; fix the phase deterministically
        k = int(np.argmax(np.diag(proj).real))
        w = proj[:, k]
    else:
        w = proj @ np.asarray(seed_vector, dtype=complex)
        if np.linalg.norm(w) < 1e-12:
            raise AnchorDegenerate("seed vector orthogonal to target eigenspace")
    w = w / np.linalg.norm(w)
    k = int(np.argmax(np.abs(w)))
    w = w * (np.conj(w[k]) / abs(w[k]))
    return SmoothFrame(model, q0, w, overlap_floor)


# --------------------------------------------------------------------------
# hypothesis validation


@dataclass
class HypothesisReport:
    """Measured constants and verdicts for the model hypotheses."""

    grid_size: int
    hermiticity_residual: float
    gap: float                      # measured g: min gap over the grid
    delta: float                    # measured sup_j ||dH/dx_j||
    contraction_factor: float       # 8*delta/g, the frame Lipschitz bound
    simple_everywhere: bool
    simplicity_violations: list
    realness_residual: float
    is_real_ok: bool
    genericity_margin: float        # min |mu_i + mu_j| off the double zero
    genericity_ok: bool

    @property
    def passed(self) -> bool:
        return (self.simple_everywhere and self.is_real_ok and self.gap > 0.0)


def validate_hypotheses(model: ModelSpec, grid, genericity_tol: float = None) -> HypothesisReport:
    """Measure g, delta, simplicity, realness and genericity over a grid.

    Violations are reported, never raised; callers decide what is fatal.
    """
    grid = list(grid)
    if not grid:
        raise ValueError("empty validation grid")
    g = np.inf
    delta = 0.0
    herm = 0.0
    realres = 0.0
    gen_margin = np.inf
    violations = []
    for q in grid:
        m = np.asarray(model.h(q), dtype=complex)
        scale = max(opnorm(m), 1e-300)
        herm = max(herm, opnorm(m - m.conj().T) / scale)
        if model.is_real:
            realres = max(realres, opnorm(m - m.conj()) / scale)
        dec = spectral_decompose(0.5 * (m + m.conj().T))
        g = min(g, dec.gap)
        for j in range(model.p):
            delta = max(delta, opnorm(model.dx(j, q)))
        jsel = model.selected_index
        if jsel >= dec.nclusters or dec.multiplicities[jsel] != 1:
            violations.append(q)
            continue
        mu = dec.eigenvalues - dec.eigenvalues[jsel]
        tol = genericity_tol if genericity_tol is not None else 1e-8 * max(scale, 1.0)
        s = mu[:, None] + mu[None, :]
        mask = ~((np.abs(mu)[:, None] < tol) & (np.abs(mu)[None, :] < tol))
        if np.any(mask):
            gen_margin = min(gen_margin, float(np.min(np.abs(s[mask]))))
    model.delta_bound = float(delta)
    gen_tol = genericity_tol if genericity_tol is not None else 1e-8
    return HypothesisReport(
        grid_size=len(grid),
        hermiticity_residual=herm,
        gap=float(g),
        delta=float(delta),
        contraction_factor=float(8.0 * delta / g) if g > 0 else np.inf,
        simple_everywhere=not violations,
        simplicity_violations=violations,
        realness_residual=realres,
        is_real_ok=(realres <= REALNESS_RTOL) if model.is_real else True,
        genericity_margin=float(gen_margin),
        genericity_ok=bool(gen_margin > gen_tol),
    )


def grid_points(t_values, x_values, p: int):
    """Cartesian validation grid with every x_j running over x_values."""
    pts = []
    xv = np.atleast_1d(np.asarray(x_values, dtype=float))
    mesh = np.meshgrid(*([xv] * p), indexing="ij")
    coords = np.stack([m.ravel() for m in mesh], axis=1)
    for t in np.atleast_1d(t_values):
        for x in coords:
            pts.append(ParameterPoint(float(t), x))
    return pts


# --------------------------------------------------------------------------
# builtin families


def _two_level_flip(params) -> ModelSpec:
    gamma = as_scalar_fn(params.get("gamma", 1.0), "gamma")

    def h(q):
        g = gamma(q.t) * q.x[0]
        return np.array([[0.0, g], [g, 0.0]], dtype=complex)

    def dhx(q):
        g = gamma(q.t)
        return np.array([[0.0, g], [g, 0.0]], dtype=complex)

    def dht(q):
        g = gamma.d(q.t) * q.x[0]
        return np.array([[0.0, g], [g, 0.0]], dtype=complex)

    return ModelSpec(dim=2, p=1, h=h, dh_dx=(dhx,), dh_dt=dht, is_real=True,
                     selected_index=1, name="two_level_flip",
                     extras={"gamma": gamma})


def _double_well_mcww(params) -> ModelSpec:
    # Optional well-depth detuning d(t) tilts the double well:
    # diag(+d, -d).  With d = 0 the tracked branch is pinned to the
    # exchange-symmetric state (x1 = x2 = 1/2) for every t, which makes the
    # phase-dressed branch an exact solution of the flow; a nonzero tilt is
    # what makes the branch genuinely time dependent.
    kappa = as_scalar_fn(params.get("kappa", 0.2), "kappa")
    Omega = as_scalar_fn(params.get("Omega", 1.0), "Omega")
    detuning = as_scalar_fn(params.get("detuning", 0.0), "detuning")

    def h(q):
        k, om, d = kappa(q.t), Omega(q.t), detuning(q.t)
        return np.array([[k * q.x[0] + d, om], [om, k * q.x[1] - d]], dtype=complex)

    def dhx0(q):
        return np.array([[kappa(q.t), 0.0], [0.0, 0.0]], dtype=complex)

    def dhx1(q):
        return np.array([[0.0, 0.0], [0.0, kappa(q.t)]], dtype=complex)

    def dht(q):
        dk, dom, dd = kappa.d(q.t), Omega.d(q.t), detuning.d(q.t)
        return np.array([[dk * q.x[0] + dd, dom], [dom, dk * q.x[1] - dd]], dtype=complex)

    return ModelSpec(dim=2, p=2, h=h, dh_dx=(dhx0, dhx1), dh_dt=dht, is_real=True,
                     selected_index=0, name="double_well_mcww",
                     extras={"kappa": kappa, "Omega": Omega, "detuning": detuning})


def _shape_polynomial(amplitude: float, s0: float):
    """The cubic shape s -> pi*(s + A*s*(1-s)*(s-s0)) and its derivative."""

    def theta(s):
        s = np.asarray(s, dtype=float)
        return np.pi * (s + amplitude * s * (1.0 - s) * (s - s0))

    def dtheta(s):
        s = np.asarray(s, dtype=float)
        return np.pi * (1.0 + amplitude * (-3.0 * s * s + 2.0 * (1.0 + s0) * s - s0))

    return theta, dtheta


def _scan_shape(theta, n: int = 4001):
    """Locate the interior local maximum of s -> theta(s) on [0, 1]."""
    s = np.linspace(0.0, 1.0, n)
    v = np.asarray(theta(s), dtype=float)
    interior = np.flatnonzero((v[1:-1] > v[:-2]) & (v[1:-1] > v[2:])) + 1
    if len(interior) == 0:
        return None
    k = int(interior[np.argmax(v[interior])])
    # parabolic refinement of the max
    a, b, c = v[k - 1], v[k], v[k + 1]
    denom = a - 2 * b + c
    ds = 0.5 * (a - c) / denom if denom != 0 else 0.0
    smax = s[k] + ds * (s[1] - s[0])
    return {"s_max": float(smax), "theta_max": float(theta(smax)),
            "theta_min_on_grid": float(np.min(v)), "theta_grid_max": float(np.max(v))}


def _rotation_bifurcation(params) -> ModelSpec:
    # Defaults produce the one-to-three solution-count transition: the cubic
    # has an interior maximum theta_max < pi at s_max with
    # cos(theta_max / 2) < sqrt(s_max).
    amplitude = float(params.get("A", -10.5))
    s0 = float(params.get("s0", 0.5))
    scale = float(params.get("scale", 1.0))
    theta_user = params.get("theta")
    if theta_user is not None:
        base, dbase = theta_user, params.get("dtheta")
    else:
        base, dbase = _shape_polynomial(amplitude, s0)

    def theta(s):
        return scale * np.asarray(base(s), dtype=float)

    dtheta = None
    if dbase is not None:
        def dtheta(s):
            return scale * np.asarray(dbase(s), dtype=float)

    info = _scan_shape(theta)
    if info is None:
        raise ValueError("rotation_bifurcation: shape function has no interior maximum")
    if info["theta_min_on_grid"] < -1e-12 or info["theta_grid_max"] > np.pi * (1 + 1e-12):
        raise ValueError("rotation_bifurcation: shape function leaves [0, pi]")
    y_max = np.sqrt(info["s_max"])
    fold_expected = bool(np.cos(0.5 * info["theta_max"]) < y_max)

    def h(q):
        a = q.t * float(theta(q.x[0]))
        return np.array([[np.cos(a), np.sin(a)], [np.sin(a), -np.cos(a)]], dtype=complex)

    def dhx(q):
        if dtheta is None:
            raise NotImplementedError
        a = q.t * float(theta(q.x[0]))
        da = q.t * float(dtheta(q.x[0]))
        return da * np.array([[-np.sin(a), np.cos(a)], [np.cos(a), np.sin(a)]], dtype=complex)

    def dht(q):
        th = float(theta(q.x[0]))
        a = q.t * th
        return th * np.array([[-np.sin(a), np.cos(a)], [np.cos(a), np.sin(a)]], dtype=complex)

    def plus_eigenvector(t, x):
        a = 0.5 * t * float(theta(x))
        return np.array([np.cos(a), np.sin(a)], dtype=complex)

    return ModelSpec(
        dim=2, p=1, h=h,
        dh_dx=None if dtheta is None else (dhx,),
        dh_dt=dht, is_real=True, selected_index=1, name="rotation_bifurcation",
        extras={"theta": theta, "dtheta": dtheta, "shape": info,
                "y_max": float(y_max), "theta_max": info["theta_max"],
                "fold_expected": fold_expected,
                "plus_eigenvector": plus_eigenvector})


def _truncated_anharmonic(params) -> ModelSpec:
    n = int(params.get("dim", 64))
    if n < 8:
        raise TruncationTooSmall(f"truncated_anharmonic needs dim >= 8, got {n}")
    quad = int(params.get("quad", 200))
    basis_freq = float(params.get("basis_freq", 5.0))
    a_fn = as_scalar_fn(params.get("a", 0.5), "a")
    b_fn = as_scalar_fn(params.get("b", 1.0), "b")

    kin = oscillator.kinetic(n, basis_freq)
    y8 = oscillator.position_power(n, 8, basis_freq, quad)
    h0 = kin + y8
    y1 = oscillator.position(n, basis_freq)
    y2 = y1 @ y1
    eye = np.eye(n)

    # truncation monitor: lowest eigenvalues at dim n versus n // 2
    lo_full = np.linalg.eigvalsh(h0)
    half = n // 2
    lo_half = np.linalg.eigvalsh(kin[:half, :half] + y8[:half, :half])
    ncmp = min(8, half)
    truncation_shift = float(np.max(np.abs(lo_full[:ncmp] - lo_half[:ncmp])))

    def w_mat(t, x, a, b):
        return -b * np.exp(x[1]) * (y2 - 2.0 * a * x[0] * y1 + (a * x[0]) ** 2 * eye)

    def h(q):
        return (h0 + w_mat(q.t, q.x, a_fn(q.t), b_fn(q.t))).astype(complex)

    def dhx0(q):
        a, b = a_fn(q.t), b_fn(q.t)
        return (-b * np.exp(q.x[1]) * (-2.0 * a * y1 + 2.0 * a * a * q.x[0] * eye)).astype(complex)

    def dhx1(q):
        return w_mat(q.t, q.x, a_fn(q.t), b_fn(q.t)).astype(complex)

    def dht(q):
        a, b = a_fn(q.t), b_fn(q.t)
        da, db = a_fn.d(q.t), b_fn.d(q.t)
        m = (-db * (y2 - 2.0 * a * q.x[0] * y1 + (a * q.x[0]) ** 2 * eye)
             - b * (-2.0 * da * q.x[0] * y1 + 2.0 * a * da * q.x[0] ** 2 * eye))
        return (np.exp(q.x[1]) * m).astype(complex)

    model = ModelSpec(dim=n, p=2, h=h, dh_dx=(dhx0, dhx1), dh_dt=dht, is_real=True,
                      selected_index=0, name="truncated_anharmonic",
                      extras={"h0": h0, "h0_eigenvalues": lo_full,
                              "truncation_shift": truncation_shift,
                              "basis_freq": basis_freq, "a": a_fn, "b": b_fn})

    delta_target = params.get("delta_target")
    if delta_target is not None:
        # rescale b so that sup_j ||dH/dx_j|| over a coarse grid hits the target
        grid = grid_points([0.0, 0.5, 1.0], [0.0, 0.5, 1.0], 2)
        measured = max(opnorm(model.dx(j, q)) for q in grid for j in range(2))
        factor = float(delta_target) / measured
        scaled = dict(params)
        scaled.pop("delta_target")
        base_b = b_fn
        scaled["b"] = ScalarFn(lambda t: factor * base_b(t),
                               lambda t: factor * base_b.d(t),
                               f"{base_b.label}*{factor:.3e}")
        return _truncated_anharmonic(scaled)
    return model


def builtin_model(name: str, params: dict = None) -> ModelSpec:
    """Construct one of the builtin Hamiltonian families by name."""
    params = dict(params or {})
    if name == "two_level_flip":
        return _two_level_flip(params)
    if name == "double_well_mcww":
        return _double_well_mcww(params)
    if name == "rotation_bifurcation":
        return _rotation_bifurcation(params)
    if name == "truncated_anharmonic":
        return _truncated_anharmonic(params)
    raise UnknownModel(f"{name!r}; available: {', '.join(_BUILTIN_NAMES)}")


def model_from_config(cfg: dict) -> ModelSpec:
    """Build a model from a configuration mapping {'name': ..., params...}."""
    cfg = dict(cfg)
    name = cfg.pop("name", None)
    if name is None:
        raise UnknownModel("model block needs a 'name' key")
    return builtin_model(name, cfg)
