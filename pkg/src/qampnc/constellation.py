"""PAM, square-QAM and PSK signal sets used by the end nodes.

Lattice constellations (PAM, QAM) keep integer coordinates alongside the
scaled points so that every fade-state computation can be carried out
exactly; only ``points`` depends on the normalization.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from functools import cached_property
from typing import Sequence

import numpy as np

from .gaussian import GaussianInt, GaussianRational

__all__ = [
    "Kind",
    "Constellation",
    "DifferenceConstellation",
    "build",
    "pam",
    "qam",
    "psk",
    "difference_constellation",
    "effective_min_distance",
]


class Kind(str, Enum):
    PAM = "PAM"
    QAM = "QAM"
    PSK = "PSK"


class ConstellationError(ValueError):
    pass


def _is_power_of_two(n: int) -> bool:
    return n >= 1 and n & (n - 1) == 0


@dataclass(frozen=True, eq=False)
class Constellation:
    """An indexed signal set; ``points[l]`` is the point carrying label ``l``.

    For PAM and QAM ``lattice`` holds the odd-integer coordinates of each
    point and ``points == energy_scale * lattice``.  PSK has no lattice.
    """

    kind: Kind
    M: int
    points: np.ndarray
    energy_scale: float = 1.0
    lattice: tuple[GaussianInt, ...] | None = None
    normalization: str = "lattice"
    _index: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self) -> None:
        self.points.setflags(write=False)
        if self.lattice is not None:
            self._index.update({p: k for k, p in enumerate(self.lattice)})

    @property
    def name(self) -> str:
        return f"{self.M}-{self.kind.value}"

    @property
    def is_lattice(self) -> bool:
        return self.lattice is not None

    @property
    def bits_per_symbol(self) -> int:
        return int(math.log2(self.M))

    @cached_property
    def lattice_array(self) -> np.ndarray:
        if self.lattice is None:
            raise ConstellationError(f"{self.name} has no integer lattice")
        return np.array([complex(p) for p in self.lattice])

    def label_of(self, point: GaussianInt | complex) -> int:
        """Inverse of the labeling map for a lattice point."""
        key = GaussianInt.of(point) if not isinstance(point, GaussianInt) else point
        try:
            return self._index[key]
        except KeyError:
            raise ConstellationError(f"{point} is not a point of {self.name}") from None

    def d_min(self) -> float:
        p = self.points
        diff = np.abs(p[:, None] - p[None, :])
        diff[np.diag_indices(self.M)] = np.inf
        return float(diff.min())

    def mean_energy(self) -> float:
        return float(np.mean(np.abs(self.points) ** 2))

    def to_dict(self) -> dict:
        return {
            "kind": self.kind.value,
            "M": self.M,
            "normalization": self.normalization,
            "labels": {
                str(k): [float(p.real), float(p.imag)] for k, p in enumerate(self.points)
            },
        }

    def with_normalization(self, normalization: str) -> Constellation:
        return build(self.kind, self.M, normalization)


def _lattice_constellation(
    kind: Kind, M: int, lattice: Sequence[GaussianInt], normalization: str
) -> Constellation:
    arr = np.array([complex(p) for p in lattice])
    if normalization == "lattice":
        scale = 1.0
    elif normalization == "unit":
        scale = 1.0 / math.sqrt(float(np.mean(np.abs(arr) ** 2)))
    else:
        raise ConstellationError(f"unknown normalization {normalization!r}")
    return Constellation(
        kind=kind,
        M=M,
        points=arr * scale,
        energy_scale=scale,
        lattice=tuple(lattice),
        normalization=normalization,
    )


def pam(n_points: int, normalization: str = "lattice") -> Constellation:
    """Regular PAM with ``n_points`` levels labeled 0.. from left to right."""
    if n_points < 2:
        raise ConstellationError("PAM needs at least 2 points")
    lattice = [GaussianInt(-(n_points - 1) + 2 * k, 0) for k in range(n_points)]
    return _lattice_constellation(Kind.PAM, n_points, lattice, normalization)


def qam(M: int, normalization: str = "lattice") -> Constellation:
    """Square M-QAM with label ``((s-1+A_I) s + (s-1+A_Q)) / 2``, ``s = sqrt(M)``."""
    s = math.isqrt(M)
    if M < 4 or s * s != M or not _is_power_of_two(M) or (M.bit_length() - 1) % 2:
        raise ConstellationError(f"square QAM needs M = 4**k, got {M}")
    lattice = [
        GaussianInt(2 * (label // s) - (s - 1), 2 * (label % s) - (s - 1))
        for label in range(M)
    ]
    return _lattice_constellation(Kind.QAM, M, lattice, normalization)


def psk(M: int, normalization: str = "unit") -> Constellation:
    """Unit-circle M-PSK, label ``k`` at angle ``2 pi k / M``."""
    if M < 2 or not _is_power_of_two(M):
        raise ConstellationError(f"PSK needs M a power of two >= 2, got {M}")
    k = np.arange(M)
    pts = np.exp(2j * np.pi * k / M)
    return Constellation(kind=Kind.PSK, M=M, points=pts, normalization="unit")


def build(kind: Kind | str, M: int, normalization: str = "lattice") -> Constellation:
    kind = Kind(kind.upper() if isinstance(kind, str) else kind)
    if kind is Kind.PAM:
        return pam(M, normalization)
    if kind is Kind.QAM:
        return qam(M, normalization)
    return psk(M, normalization)


@dataclass(frozen=True)
class DifferenceConstellation:
    """Pairwise differences of a signal set.

    ``deltas`` are in the constellation's own scale.  For lattice sets
    ``scaled`` holds the same differences as Gaussian integers with the
    common factor 2 removed, and ``quadrant_plus`` the ones with
    re > 0, im >= 0.
    """

    deltas: np.ndarray
    quadrant_plus: np.ndarray
    scaled: tuple[GaussianInt, ...] | None = None
    scaled_plus: tuple[GaussianInt, ...] | None = None


def difference_constellation(C: Constellation) -> DifferenceConstellation:
    if C.is_lattice:
        pts = C.lattice
        diffs = sorted({GaussianInt((p.a - q.a) // 2, (p.b - q.b) // 2) for p in pts for q in pts})
        plus = tuple(d for d in diffs if d.a > 0 and d.b >= 0)
        arr = np.array([2 * complex(d) for d in diffs]) * C.energy_scale
        arr_plus = np.array([2 * complex(d) for d in plus]) * C.energy_scale
        return DifferenceConstellation(arr, arr_plus, tuple(diffs), plus)
    d = (C.points[:, None] - C.points[None, :]).ravel()
    d = _unique_complex(d)
    plus = d[(d.real > 1e-12) & (d.imag >= -1e-12)]
    return DifferenceConstellation(d, plus)


def _unique_complex(values: np.ndarray, decimals: int = 9) -> np.ndarray:
    keys = np.round(values.real, decimals) + 1j * np.round(values.imag, decimals)
    _, idx = np.unique(keys, return_index=True)
    return values[np.sort(idx)]


def effective_min_distance(C: Constellation, z: complex | GaussianRational) -> float:
    """Minimum distance of the relay's effective constellation ``x_A + z x_B``.

    An exact :class:`GaussianRational` fade on a lattice set returns exactly
    0.0 at singular fade states.
    """
    if isinstance(z, GaussianRational) and C.is_lattice:
        dc = difference_constellation(C)
        d = np.array([complex(x) for x in dc.scaled])
        num, den = complex(z.num), complex(z.den)
        # den*dA + num*dB on integers: float-exact for these magnitudes
        v = (den * d[:, None] + num * d[None, :]).ravel()
        nz = np.ones(v.shape, dtype=bool)
        nz[np.flatnonzero((np.abs(d[:, None]) + np.abs(d[None, :])).ravel() == 0)] = False
        m = np.abs(v[nz]).min() / abs(den)
        return float(2 * m * C.energy_scale)
    d = difference_constellation(C).deltas
    zc = complex(z)
    v = (d[:, None] + zc * d[None, :]).ravel()
    mask = ((np.abs(d[:, None]) + np.abs(d[None, :])) > 0).ravel()
    return float(np.abs(v[mask]).min())
