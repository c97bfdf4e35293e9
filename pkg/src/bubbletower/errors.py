"""Failure types shared across modules."""


class SolverError(RuntimeError):
    """A solver failed to produce a converged result; carries diagnostics."""

    def __init__(self, message: str, diagnostics: dict | None = None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


class IntegratorFailure(SolverError):
    """Time integration hit NaN/overflow before any detection logic triggered."""
