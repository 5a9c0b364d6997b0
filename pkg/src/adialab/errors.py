"""Exception taxonomy shared by all laboratory modules."""


class AdialabError(Exception):
    """Base class for all errors raised by this package."""


class NonHermitian(AdialabError):
    """A user-supplied Hamiltonian map returned a matrix that is not Hermitian."""


class OutOfDomain(AdialabError):
    """A parameter point lies outside the model's declared (t, x) box."""


class UnknownModel(AdialabError):
    """Requested builtin model name does not exist."""


class TruncationTooSmall(AdialabError):
    """Galerkin truncation dimension below the supported minimum."""


class GapViolation(AdialabError):
    """Measured spectral gap fell below the required bound."""


class SimplicityViolation(AdialabError):
    """The tracked eigenvalue is not simple at a visited parameter point."""


class AnchorDegenerate(AdialabError):
    """Anchor eigenvector has (numerically) no component in the target eigenspace."""


class NoConvergence(AdialabError):
    """Both fixed-point stages exhausted their iteration budgets."""


class DomainExit(AdialabError):
    """Iterates left the declared nonlinearity domain."""


class PathTruncated(AdialabError):
    """Continuation stopped before the end of the requested time range.

    Carries the partial path (``path``), the first failing time (``t_fail``)
    and the smallest singular value of the last Newton Jacobian
    (``jac_sigma_min``), used to tell a fold from a plain solver failure.
    """

    def __init__(self, t_fail, path=None, jac_sigma_min=None, reason=""):
        super().__init__(f"path truncated at t={t_fail!r}: {reason}")
        self.t_fail = t_fail
        self.path = path
        self.jac_sigma_min = jac_sigma_min
        self.reason = reason


class NoFoldInRange(AdialabError):
    """No loss-of-existence point detected inside the requested time range."""


class InnerIterationDiverged(AdialabError):
    """Midpoint inner fixed point diverged."""


class StepTooLarge(AdialabError):
    """Midpoint inner fixed point needs more iterations than allowed."""


class InvalidInitialData(AdialabError):
    """Closed-form solution preconditions on the initial data violated."""


class DerivativeUnavailable(AdialabError):
    """Model cannot supply the requested parameter derivative."""


class IllConditioned(AdialabError):
    """A biorthogonal eigenpair is too poorly conditioned to trust.

    ``index`` identifies the offending eigenvalue.
    """

    def __init__(self, index, condition):
        super().__init__(f"eigenpair {index} has condition {condition:.3e}")
        self.index = index
        self.condition = condition


class TooCloseToUnperturbedSpectrum(AdialabError):
    """Evaluation point z is within tolerance of an unperturbed eigenvalue."""


class NotScalarNonlinearity(AdialabError):
    """Operation requires a single nonlinear component (p = 1)."""


class NumeratorVanishes(AdialabError):
    """Rational-determinant numerator vanishes at the requested eigenvalue."""


class GapTooSmall(AdialabError):
    """Spectral gap around the kernel cluster too small for the formula."""


class ConstraintViolated(AdialabError):
    """Input vectors violate a required orthogonality constraint."""


class NonRealEigenvaluePath(AdialabError):
    """Tracked eigenvalue path has a non-real part beyond tolerance."""


class TrackingBroken(AdialabError):
    """Projector overlap between neighbouring grid points fell below 0.5."""


class ConfigInvalid(AdialabError):
    """Experiment configuration failed validation."""


class NumericalFailure(AdialabError):
    """A numerical stage failed during an experiment run."""


class InvariantFailure(AdialabError):
    """A declared invariant check failed during an experiment run."""


class IoFailure(AdialabError):
    """Artifact emission failed (empty series, unwritable path, ...)."""
