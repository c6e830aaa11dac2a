"""Exception hierarchy shared across the package."""


class LqccsError(Exception):
    """Base class for all lqccs errors."""


class ParseError(LqccsError):
    def __init__(self, message, line=None, col=None):
        if line is not None:
            message = f"{line}:{col}: {message}"
        super().__init__(message)
        self.line = line
        self.col = col


class SortError(ParseError):
    """Term violates the process/observer sort discipline."""


class TargetError(LqccsError):
    """Bad qubit target: unknown name, duplicate, or out of range."""


class RegisterError(LqccsError):
    """Operands live on incompatible qubit registers."""


class EvalError(LqccsError):
    """Expression evaluation failed (unbound variable or type mismatch)."""


class TypingError(LqccsError):
    """Generic typing failure for configurations and contexts."""


class LinearityError(TypingError):
    """A qubit is unused, duplicated, or shared across parallel components."""


class ArityError(TypingError):
    """Operator or measurement applied to the wrong number of qubits."""


class ChannelTypeError(TypingError):
    """Channel used at a type other than its declaration."""


class QubitCaptureError(LqccsError):
    """Substituting a qubit name into a term that already owns it."""


class ShapeError(LqccsError):
    """Distribution element does not have the shape an operation requires."""


class ChoiceExplosion(LqccsError):
    """The product of per-element move choices exceeds the configured cap."""
