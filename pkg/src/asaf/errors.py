"""Exception types shared across the package.

Every error carries a short machine-readable ``code`` that the CLI turns
into an ``error: <code>: <detail>`` line.  ``exit_status`` distinguishes
validation problems (2) from runtime failures (3).
"""


class AsafError(Exception):
    code = "error"
    exit_status = 3

    def __init__(self, detail: str = ""):
        super().__init__(detail)
        self.detail = detail


class ValidationError(AsafError):
    """Bad configuration or inconsistent parameters."""

    code = "invalid-config"
    exit_status = 2


class ModelMismatch(ValidationError):
    """Delay profile variant does not match the configured timing model."""

    code = "mismatched-model"


# the config layer and the builder layer historically use either name
MismatchedModel = ModelMismatch


class NonMultipleSlots(ValidationError):
    code = "non-multiple-slots"


class IsolationRequired(ValidationError):
    code = "isolation-required"


class NegativeDelay(ValidationError):
    code = "negative-delay"


class DelayTooLarge(ValidationError):
    """Delay spread must stay below the slot length (theta < T)."""

    code = "delay-too-large"


class EmptyPlan(ValidationError):
    """No collision-free symbols survive in some slot; slot too short."""

    code = "empty-plan"


class InvalidRegime(ValidationError):
    """Closed-form bound evaluated outside its validity region."""

    code = "invalid-regime"


class NotTriangular(AsafError):
    """A drop plan failed to produce a clean lower-triangular system."""

    code = "not-triangular"


class UnresolvedSymbol(AsafError):
    """A fade symbol refers to a relay index absent from the draw."""

    code = "unresolved-symbol"


class NonFinite(AsafError):
    """A numeric result overflowed or produced NaN."""

    code = "non-finite"


class InsufficientData(AsafError):
    """Not enough usable points for a fit."""

    code = "insufficient-data"


class SchemaMismatch(AsafError):
    """A CSV file does not carry a recognized column layout."""

    code = "schema-mismatch"
