"""Exception hierarchy.

Errors split into two families so the command line can map them onto stable
exit codes: ``ValidationError`` (bad input, exit 2) and ``CapacityError``
(the input is fine but the computation cannot proceed, exit 3).
"""


class QbiError(Exception):
    """Base class for every error raised by this package."""


class ValidationError(QbiError, ValueError):
    pass


class CapacityError(QbiError, RuntimeError):
    pass


# bayesnet
class CycleDetected(ValidationError):
    def __init__(self, nodes):
        self.nodes = list(nodes)
        super().__init__(f"directed cycle through nodes {self.nodes}")


class CptShapeMismatch(ValidationError):
    def __init__(self, node, reason=""):
        self.node = node
        super().__init__(f"CPT of node {node} does not match its parents" + (f": {reason}" if reason else ""))


class CptNotNormalized(ValidationError):
    def __init__(self, node, row):
        self.node = node
        self.row = row
        super().__init__(f"CPT row {row} of node {node} is not a probability distribution")


class MissingValue(ValidationError):
    pass


class ZeroEvidenceProbability(CapacityError):
    pass


class BudgetExceeded(CapacityError):
    pass


# ingest
class ParseError(ValidationError):
    def __init__(self, line, reason):
        self.line = line
        self.reason = reason
        super().__init__(f"line {line}: {reason}")


class UnknownLabel(ValidationError):
    def __init__(self, label, line=None):
        self.label = label
        self.line = line
        where = f"line {line}: " if line is not None else ""
        super().__init__(f"{where}unknown defect label {label!r}")


# chowliu
class EmptySampleSet(ValidationError):
    pass


# qsim / qae / qbi
class IndexOutOfRange(ValidationError):
    pass


class DuplicateQubit(ValidationError):
    pass


class TooManyQubits(CapacityError):
    pass


class InvalidConfig(ValidationError):
    pass


# classifier / cli
class MissingClass(ValidationError):
    pass


class EmptyClass(ValidationError):
    pass


class DimensionMismatch(ValidationError):
    pass
