"""Mitral-annulus morphology features and MR classification from 4D landmarks."""

__version__ = "0.1.0"

from .errors import (
    AnnulusError,
    DataError,
    DegenerateGeometryError,
    ExtractionError,
    InputError,
    NumericalError,
    SchemaError,
)

__all__ = [
    "__version__",
    "AnnulusError",
    "DataError",
    "DegenerateGeometryError",
    "ExtractionError",
    "InputError",
    "NumericalError",
    "SchemaError",
]
