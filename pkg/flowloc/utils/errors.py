"""
Exception hierarchy for FlowLoc
Every failure a caller can act on has its own named class
"""

from typing import Optional


class FlowLocError(Exception):
    """Base class for all FlowLoc errors"""


# Graph construction

class GraphConstructionError(FlowLocError, ValueError):
    """Raised when an edge list cannot form a valid WeightedMultigraph"""


class EmptyEdgeListError(GraphConstructionError):
    pass


class SelfLoopError(GraphConstructionError):
    pass


class NonPositiveConductanceError(GraphConstructionError):
    pass


class ConductanceRangeError(GraphConstructionError):
    pass


class VertexIndexError(GraphConstructionError):
    pass


class DisconnectedGraphError(GraphConstructionError):
    pass


class GraphParseError(FlowLocError, ValueError):
    """Malformed graph text; carries the 1-based line number when known"""

    def __init__(self, message: str, line_number: Optional[int] = None):
        self.line_number = line_number
        if line_number is not None:
            message = f"line {line_number}: {message}"
        super().__init__(message)


# Inputs to the analyzers

class DomainError(FlowLocError, ValueError):
    """Argument outside the mathematical domain of an operation"""


class ZeroWeightError(DomainError):
    pass


class UnbalancedInjectionError(DomainError):
    pass


class NonUnitConductanceError(DomainError):
    pass


# Numerical contracts

class NumericalContractError(FlowLocError, ArithmeticError):
    """A computed quantity violated its stated tolerance"""


class AsymmetricMatrixError(NumericalContractError):
    pass


class EigenSolverError(NumericalContractError):
    pass


class KernelDimensionError(NumericalContractError):
    pass


# Generation and orchestration

class ConnectivityRetriesExhausted(FlowLocError, RuntimeError):
    pass


class UnknownCheckError(FlowLocError, ValueError):
    pass
