"""Exception hierarchy.

Every error carries a short ``code`` which the command line front end prints
on stderr so that callers can dispatch on it without parsing messages.
"""


class KbcPathError(Exception):
    code = "E_GENERIC"


class ParseError(KbcPathError, ValueError):
    code = "E_PARSE"

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class ValidationError(KbcPathError, ValueError):
    code = "E_VALIDATION"


class UnknownKeyError(KbcPathError, KeyError):
    """Unknown entity, relation or type name / id."""

    code = "E_LOOKUP"

    def __str__(self):
        return str(self.args[0]) if self.args else ""


class DeserializationError(KbcPathError, ValueError):
    code = "E_CORRUPT"


class IncompatibleModelError(KbcPathError):
    code = "E_INCOMPATIBLE"


class TrainingError(KbcPathError, RuntimeError):
    code = "E_TRAINING"


class ConsistencyError(KbcPathError):
    code = "E_CONSISTENCY"


class UndefinedCorrelationError(KbcPathError, ValueError):
    code = "E_UNDEFINED"
