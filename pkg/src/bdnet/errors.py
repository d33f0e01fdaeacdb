"""Exception hierarchy.

Class names are deliberately suffix-free (``CycleDetected`` rather than
``CycleDetectedError``) so that the CLI can surface them verbatim.
"""


class BayesNetError(Exception):
    """Base class for every domain error raised by this package."""


class InvariantViolation(BayesNetError, ValueError):
    """A structural or numerical invariant of a domain object failed."""


class CycleDetected(InvariantViolation):
    def __init__(self, cycle):
        self.cycle = list(cycle)
        super().__init__("cycle detected: " + " -> ".join(self.cycle))


class UnknownParent(InvariantViolation):
    pass


class DuplicateVariable(InvariantViolation):
    pass


class UnknownState(BayesNetError, ValueError):
    pass


class SchemaMismatch(BayesNetError, ValueError):
    pass


class MissingValue(BayesNetError, ValueError):
    pass


class MissingParentValue(MissingValue):
    pass


class IncompleteData(BayesNetError, ValueError):
    pass


class ShapeMismatch(BayesNetError, ValueError):
    pass


class InvalidIndex(BayesNetError, IndexError):
    pass


class NonPositiveAlpha(BayesNetError, ValueError):
    pass


class ZeroPriorProbability(BayesNetError, ValueError):
    pass


class ZeroEvidenceProbability(BayesNetError, ValueError):
    pass


class OverlapTargetEvidence(BayesNetError, ValueError):
    pass


class ConstraintViolation(BayesNetError, ValueError):
    pass


class EmptyDataset(BayesNetError, ValueError):
    pass


class VariableSetMismatch(BayesNetError, ValueError):
    pass


class TooLarge(BayesNetError, ValueError):
    pass


class EmptyModelSet(BayesNetError, ValueError):
    pass


class ZeroFamilyMass(BayesNetError, ValueError):
    pass


class ZeroCompletionProbability(BayesNetError, ValueError):
    pass


class ParseError(BayesNetError, ValueError):
    def __init__(self, message, line=None, position=None):
        self.line = line
        self.position = position
        where = ""
        if line is not None:
            where = f" (line {line}" + (f", position {position})" if position is not None else ")")
        super().__init__(message + where)


class LengthMismatch(BayesNetError, ValueError):
    pass


class NegativeCount(BayesNetError, ValueError):
    pass
