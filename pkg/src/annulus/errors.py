"""Exception hierarchy. The CLI maps each class onto a process exit code."""


class AnnulusError(Exception):
    exit_code = 1


class InputError(AnnulusError, ValueError):
    """Invalid argument values (non-finite numbers, wrong shapes, bad options)."""

    exit_code = 4


class SchemaError(AnnulusError, ValueError):
    """A file does not match its declared schema or is structurally incomplete."""

    exit_code = 3


class DataError(AnnulusError, ValueError):
    """Data that is well-formed but unusable, e.g. a single-class label vector."""

    exit_code = 4


class DegenerateGeometryError(AnnulusError, ValueError):
    exit_code = 5


class NumericalError(AnnulusError, ArithmeticError):
    exit_code = 5


class ExtractionError(AnnulusError, ValueError):
    exit_code = 5
