"""Exact Weil-Petersson volumes, psi/kappa intersection numbers and their large-genus expansions."""

__version__ = "0.1.0"

from .errors import CacheFormatError, DomainError, StoreConflictError
from .exact import HighPrecisionReal, PiLaurent, eval_real
from .intersection import MemoStore, bracket, bracket_reduced, store_dump, store_load
from .volumes import VolumePolynomial, evaluate_volume, volume, volume_polynomial

__all__ = [
    "__version__",
    "CacheFormatError",
    "DomainError",
    "StoreConflictError",
    "HighPrecisionReal",
    "PiLaurent",
    "eval_real",
    "MemoStore",
    "bracket",
    "bracket_reduced",
    "store_dump",
    "store_load",
    "VolumePolynomial",
    "evaluate_volume",
    "volume",
    "volume_polynomial",
]
