"""Exception hierarchy shared by every package of the checker"""

from typing import Any, Optional


class WfsecError(Exception):
    """Base class for all checker errors"""


class ModelError(WfsecError):
    """A domain value violates its invariants"""


class ParamTypeError(WfsecError):
    """A stored parameter has a different variant than the one requested"""


class PolicySyntaxError(WfsecError):
    """Policy source could not be parsed"""

    def __init__(self, message: str, line: int = 0, column: int = 0):
        self.message = message
        self.line = line
        self.column = column
        super().__init__(f"line {line}, column {column}: {message}")


class PolicyTypeError(PolicySyntaxError):
    """Policy source parsed but is ill-typed"""


class PolicyValidationError(WfsecError):
    """Policy refers to undeclared tasks, users or accounts, or repeats an action"""


class PolicyRuntimeError(WfsecError):
    """Evaluation of a policy function failed; aborts the run"""

    def __init__(self, action: str, statement: str, cause: str):
        self.action = action
        self.statement = statement
        self.cause = cause
        super().__init__(f"action '{action}', {statement}: {cause}")


class BudgetExceededError(WfsecError):
    """Exploration hit its node budget"""

    def __init__(self, message: str, partial: Optional[Any] = None):
        self.partial = partial
        super().__init__(message)


class PathBudgetExceededError(WfsecError):
    """Path enumeration hit its budget"""


class InconclusiveAnalysisError(WfsecError):
    """Subdivision equivalence could not be decided within budget"""


class RuleNotationError(WfsecError):
    """Rule text is malformed or outside the supported notation"""

    def __init__(self, message: str, text: str = ""):
        self.text = text
        super().__init__(f"{message}: {text}" if text else message)


class WorkloadFormatError(WfsecError):
    """Malformed workload file"""


class UnknownMutationError(WfsecError):
    """Mutation id is not in the catalog"""


class UnknownNodeError(WfsecError, KeyError):
    """Graph query on a node id that is not in the graph"""

    def __str__(self):
        return str(self.args[0]) if self.args else 'unknown node'
