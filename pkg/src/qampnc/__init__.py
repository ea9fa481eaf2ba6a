"""Latin-square network coding for two-way relaying with QAM, PAM and PSK."""

from .constellation import Constellation, ConstellationError, Kind, build, pam, psk, qam
from .gaussian import GaussianInt, GaussianRational
from .latin_squares import LatinSquare, LatinSquareBank, complete, latin_square_bank
from .singular_fades import SingularFadeSet, constraints_for, enumerate_singular_fades

__all__ = [
    "Constellation",
    "ConstellationError",
    "Kind",
    "build",
    "pam",
    "psk",
    "qam",
    "GaussianInt",
    "GaussianRational",
    "LatinSquare",
    "LatinSquareBank",
    "complete",
    "latin_square_bank",
    "SingularFadeSet",
    "constraints_for",
    "enumerate_singular_fades",
]

__version__ = "0.1.0"
