"""Shared error types."""


class BudgetExceededError(RuntimeError):
    """An operation refused to run because its declared budget was exceeded.

    Distinct from a negative answer: callers must report "budget exceeded"
    rather than "false".
    """

    def __init__(self, message: str, partial=None):
        super().__init__(message)
        self.partial = partial
