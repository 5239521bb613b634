"""Exception hierarchy shared across the package.

ValidationError covers malformed input documents and violated modelling
assumptions (CLI exit code 1).  SolverError covers internal linear-program
failures (CLI exit code 2).
"""


class FmktError(Exception):
    pass


class ValidationError(FmktError):
    """Bad input: document structure, market assumptions, preconditions."""


class SolverError(FmktError):
    """The LP engine failed to certify a solution."""
