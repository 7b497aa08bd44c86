"""Exception types raised across the package."""


class MalformedCaseError(ValueError):
    """A network case violates a structural invariant.

    ``path`` names the offending field, e.g. ``branches[3].to``.
    """

    def __init__(self, path: str, message: str):
        self.path = path
        super().__init__(f"{path}: {message}")


class ContractViolation(ValueError):
    pass


class InvalidRemovalError(ContractViolation):
    pass


class UndefinedPTDFError(ContractViolation):
    pass


class InvalidEventError(ContractViolation):
    pass


class EnumerationCapExceeded(RuntimeError):
    def __init__(self, estimate: int, cap: int):
        self.estimate = estimate
        self.cap = cap
        super().__init__(f"estimated {estimate} paths exceeds cap {cap}")
