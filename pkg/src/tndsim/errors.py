"""Exception hierarchy.

Every error carries a short ``tag`` so sweeps and Monte Carlo summaries can
count failures by kind instead of averaging NaNs.
"""


class TNDError(ValueError):
    tag = "error"

    def __init__(self, message, *, stage=None):
        super().__init__(message)
        self.stage = stage


class InvalidInputError(TNDError):
    tag = "invalid-input"


class UndefinedEstimateError(TNDError):
    """A VE estimate has a zero denominator."""

    tag = "undefined-estimate"


class EmptyControlGroupError(UndefinedEstimateError):
    tag = "empty-control-group"


class NonInvertibleTestError(TNDError):
    """se + sp is (numerically) 1, so test results carry no information."""

    tag = "non-invertible-test"


class DegenerateTestError(TNDError):
    tag = "degenerate-test"


class NoValidReplicatesError(TNDError):
    tag = "no-valid-replicates"


class ConfigError(TNDError):
    """Raised by the config parser with every problem found, not just the first."""

    tag = "config-error"

    def __init__(self, violations):
        self.violations = list(violations)
        lines = "\n".join(str(v) for v in self.violations)
        super().__init__(f"{len(self.violations)} config problem(s):\n{lines}")
