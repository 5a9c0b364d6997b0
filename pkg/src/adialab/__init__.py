"""Desk-scale laboratory for slow-driving nonlinear Schrodinger dynamics.

The package follows one storyline: a Hamiltonian family H(t, x) whose
parameters are fed back from the state (x_j = |v_j|^2) admits instantaneous
self-consistent eigenvectors; the flow i*eps*dv/dt = H(t,[v]) v follows them
up to a fast phase with an O(eps) error; the deviation is governed by a
doubled non-self-adjoint operator whose biorthogonal spectral calculus and
parallel transport quantify that error.  Each module implements and
cross-checks one layer of that chain at matrix scale.
"""

__version__ = "0.1.0"

from .errors import AdialabError
from .models import (
    ModelSpec,
    ParameterPoint,
    SmoothFrame,
    SpectralDecomposition,
    builtin_model,
    evaluate_h,
    make_frame,
    model_from_config,
    smooth_eigenvector,
    spectral_decompose,
    validate_hypotheses,
)
from .eigenpath import (
    EigenPath,
    FixedPointConfig,
    continue_path,
    count_solutions,
    detect_fold,
    solve_fixed_point,
)
from .propagation import (
    IntegratorConfig,
    PropagationResult,
    adiabatic_error,
    analytic_two_level,
    energy_content,
    gauge_shift_check,
    propagate,
)
from .linearized import (
    BiorthogonalSpectrum,
    DoubledOperator,
    aw_determinant,
    aw_roots_p1,
    build_f,
    doubled_from_parts,
    kernel_projector,
    p1_eigenprojector,
    realness_discriminant,
    search_nonreal_instance,
    spectrum_f,
)
from .transport import (
    AdiabaticComparison,
    TransportBundle,
    build_transport_bundle,
    compare_adiabatic,
    dynamical_phase,
    fit_order,
    integrate_intertwiner,
    kato_generator_series,
    source_integral_check,
    true_evolution,
)

__all__ = [name for name in dir() if not name.startswith("_")]
