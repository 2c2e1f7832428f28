"""Exception types shared by the ACL beam toolkit."""


class AclBeamError(Exception):
    """Base class for every toolkit-specific error."""


class InvalidConfig(AclBeamError):
    """Configuration failed validation; carries the full list of violations."""

    def __init__(self, violations):
        self.violations = list(violations)
        super().__init__("; ".join(self.violations))


class NonPositiveParameter(InvalidConfig):
    """A parameter that must be strictly positive is not."""


class MissingMagneticParams(InvalidConfig):
    """Magnetic model requested but a magnetic permeability is unset."""


class DegenerateWaveSpeeds(AclBeamError):
    """zeta_plus == zeta_minus, so the two characteristic branches coincide."""


class InvalidRatio(AclBeamError):
    """Requested wave-speed ratio is not admissible (must be >= 1, odd/odd)."""


class NotResonant(AclBeamError):
    """zeta_plus/zeta_minus does not match the requested odd-integer ratio."""


class DimensionMismatch(AclBeamError):
    """State vector lengths do not match the dof layout."""


class SingularStepMatrix(AclBeamError):
    """Implicit step matrix could not be factored."""


class TooLargeForDense(AclBeamError):
    """Problem exceeds the size limit for dense linear algebra."""


class ConvergenceFailure(AclBeamError):
    """The dense eigensolver failed to converge."""


class InsufficientSamples(AclBeamError):
    """Too few usable trajectory samples in the fit window."""


class NonpositiveEnergy(AclBeamError):
    """Energy samples are nonpositive; a log-linear fit is impossible."""
