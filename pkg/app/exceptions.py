# app/exceptions.py
"""
Error hierarchy for the lab.

Controllers map these onto exit codes: configuration and input problems exit
with 2, bound violations with 4, every other LabError with 3.
"""


class LabError(Exception):
    """Base class for every failure raised by the services."""

    def __init__(self, message, **details):
        super().__init__(message)
        self.message = message
        self.details = details

    def to_dict(self):
        payload = {'error': type(self).__name__, 'message': self.message}
        for key, value in self.details.items():
            if hasattr(value, 'to_dict'):
                value = value.to_dict()
            if isinstance(value, (str, int, float, bool, list, dict)) or value is None:
                payload[key] = value
        return payload


class DomainError(LabError):
    """A geometric or structural precondition does not hold."""


class InputError(LabError):
    """An input Field or parameter is malformed (NaN, wrong shape, bad range)."""


class SolverError(LabError):
    """An iterative solver did not converge; `result` keeps the best iterate."""

    def __init__(self, message, residual=None, result=None, **details):
        super().__init__(message, residual=residual, **details)
        self.residual = residual
        self.result = result


class CalibrationError(LabError):
    """A geometric inequality could not be established; `inequality` names it."""

    def __init__(self, message, inequality=None, **details):
        super().__init__(message, inequality=inequality, **details)
        self.inequality = inequality


class InstabilityError(LabError):
    """A time stepper blew up."""


class SchemeError(LabError):
    """A discrete scheme property (ordering, dissipation) was violated."""


class ConfigError(LabError):
    """Scenario validation failed; `errors` lists (field, message) pairs."""

    def __init__(self, message, errors=None, **details):
        errors = list(errors or [])
        super().__init__(message, errors=[f"{field}: {msg}" for field, msg in errors], **details)
        self.errors = errors


class BoundViolation(LabError):
    """An asserted energy inequality failed; `check` carries the BoundCheck."""

    def __init__(self, message, check=None, **details):
        super().__init__(message, check=check, **details)
        self.check = check


class EmptyInterface(LabError):
    """The field never changes sign, so there is no interface to measure."""
