"""Exception hierarchy used across the package.

Every validation failure raises a named subclass of :class:`SpinSamplerError`
so callers (and the CLI) can report machine-readable error kinds.
"""


class SpinSamplerError(Exception):
    """Base class for all errors raised by this package."""

    kind = "error"


class InvalidDimensionError(SpinSamplerError):
    kind = "invalid-dimension"


class ShapeError(SpinSamplerError):
    kind = "shape"


class SizeLimitError(SpinSamplerError):
    kind = "size-limit"


class InvalidUnitaryError(SpinSamplerError):
    kind = "invalid-unitary"


class SymmetryError(SpinSamplerError):
    kind = "symmetry"


class DegenerateInputError(SpinSamplerError):
    kind = "degenerate-input"


class DispersiveViolationError(SpinSamplerError):
    """A mode sits too close to the qubit splitting for the dispersive expansion."""

    kind = "dispersive-violation"

    def __init__(self, offending_modes):
        self.offending_modes = list(offending_modes)
        super().__init__(
            "dispersive condition |delta - omega| > g violated for mode(s) "
            + ", ".join(str(i) for i in self.offending_modes)
        )


class InvalidSectorError(SpinSamplerError):
    kind = "invalid-sector"


class InvalidFillingError(SpinSamplerError):
    kind = "invalid-filling"


class InvalidSpecError(SpinSamplerError):
    kind = "invalid-spec"


class InvalidHamiltonianError(SpinSamplerError):
    kind = "invalid-hamiltonian"


class TruncationError(SpinSamplerError):
    kind = "truncation"


class DomainError(SpinSamplerError):
    kind = "domain"


class ConfigError(SpinSamplerError):
    kind = "config"
