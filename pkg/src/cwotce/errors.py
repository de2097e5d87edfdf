"""Exception hierarchy for cwotce."""


class CwotceError(Exception):
    """Base class for all package errors."""


class MeasureError(CwotceError, ValueError):
    pass


class NormalizationError(MeasureError):
    pass


class MonotonicityError(MeasureError):
    """Raised when a 2-additive measure fails the monotonicity criterion.

    The offending component is available as ``component`` (1-based).
    """

    def __init__(self, component, slack):
        self.component = component
        self.slack = slack
        super().__init__(
            f"monotonicity violated at component {component}: "
            f"m({{k}}) + sum(min(0, m({{k,l}}))) = {slack:.6g} < 0"
        )


class DimensionError(CwotceError, ValueError):
    pass


class EmptyInput(CwotceError, ValueError):
    pass


class NegativeTimeError(CwotceError, ValueError):
    pass


class EncodingError(CwotceError, ValueError):
    """Component encoding failure with the patient id attached."""

    def __init__(self, patient_id, cause):
        self.patient_id = patient_id
        self.cause = cause
        super().__init__(f"patient {patient_id!r}: {cause}")


class EmptyGroup(CwotceError, ValueError):
    pass


class DegenerateLabels(CwotceError, ValueError):
    pass


class InsufficientPermutations(CwotceError, ValueError):
    pass


class ZeroAttribution(CwotceError):
    """All component drops are non-positive; raw drops are on ``result``."""

    def __init__(self, result):
        self.result = result
        super().__init__("no component has a positive drop; percentages undefined")


class NoEvents(CwotceError, ValueError):
    pass


class NonConvergence(CwotceError, RuntimeError):
    pass


class DegenerateArms(CwotceError, ValueError):
    pass


class SchemaError(CwotceError, ValueError):
    pass
