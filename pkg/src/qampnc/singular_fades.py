"""Singular fade states: enumeration, closed-form counts and removal constraints.

A fade state ``z = h_B / h_A`` is singular when two distinct pairs
``(x_A, x_B) != (x_A', x_B')`` collide at the relay, which happens exactly
when ``z = -(x_A - x_A') / (x_B - x_B')`` for differences taken from the
signal set.  Enumeration over the difference constellation is the ground
truth here; the closed forms are cross-checks.
"""

from __future__ import annotations

import math
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Iterable, Union

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components
from scipy.spatial import cKDTree

from .constellation import Constellation, ConstellationError, Kind, difference_constellation, qam
from .gaussian import UNITS, GaussianInt, GaussianRational, euler_phi, is_coprime

__all__ = [
    "FadeState",
    "SingularFadeSet",
    "ConstraintSet",
    "ConstraintError",
    "enumerate_singular_fades",
    "count_pam",
    "count_qam",
    "count_psk",
    "count_closed_form",
    "upper_bound_qam",
    "coprime_pairs",
    "constraints_for",
    "fade_class",
]

FadeState = Union[GaussianRational, complex]

# tolerance for grouping numerically-equal values on non-lattice (PSK) sets
PSK_TOL = 1e-7


def fade_class(z: FadeState) -> str:
    if isinstance(z, GaussianRational):
        r = z.abs2()
        return "unit-circle" if r == 1 else ("exterior" if r > 1 else "interior")
    r = abs(z)
    if abs(r - 1.0) < 1e-9:
        return "unit-circle"
    return "exterior" if r > 1 else "interior"


@dataclass(frozen=True, eq=False)
class SingularFadeSet:
    """The set H of singular fade states of one constellation.

    ``states`` are canonical :class:`GaussianRational` values for lattice
    sets and plain complex numbers for PSK.  ``rep_dl`` holds, per state,
    the smallest-magnitude ``d_l`` among difference pairs realizing it, in
    the constellation's own scale; ``rep_pairs`` gives the full pair
    ``(d_k, d_l)`` with ``-d_k/d_l`` equal to the state.
    """

    constellation: Constellation
    states: tuple
    values: np.ndarray
    rep_dl: np.ndarray
    rep_pairs: tuple
    _index: dict = field(default_factory=dict, repr=False)

    def __post_init__(self) -> None:
        self.values.setflags(write=False)
        self.rep_dl.setflags(write=False)
        if self.exact:
            self._index.update({s: i for i, s in enumerate(self.states)})

    @property
    def exact(self) -> bool:
        return self.constellation.is_lattice

    def __len__(self) -> int:
        return len(self.states)

    def __iter__(self):
        return iter(self.states)

    def __contains__(self, z: object) -> bool:
        try:
            self.index_of(z)  # type: ignore[arg-type]
        except KeyError:
            return False
        return True

    def index_of(self, z: FadeState) -> int:
        if self.exact and isinstance(z, GaussianRational):
            return self._index[z]
        zc = complex(z)
        d = np.abs(self.values - zc)
        i = int(np.argmin(d))
        if d[i] > PSK_TOL * max(1.0, abs(zc)):
            raise KeyError(z)
        return i

    def by_class(self) -> dict[str, list]:
        out: dict[str, list] = {"unit-circle": [], "exterior": [], "interior": []}
        for s in self.states:
            out[fade_class(s)].append(s)
        return out


def _sort_states(states: Iterable[GaussianRational]) -> list[GaussianRational]:
    return sorted(states, key=GaussianRational.sort_key)


def enumerate_singular_fades(C: Constellation) -> SingularFadeSet:
    """All distinct ratios ``-d_k/d_l`` with ``d_k, d_l`` nonzero differences."""
    if C.is_lattice:
        return _enumerate_lattice(C)
    return _enumerate_numeric(C)


def _enumerate_lattice(C: Constellation) -> SingularFadeSet:
    dc = difference_constellation(C)
    plus = dc.scaled_plus
    box = set(dc.scaled)
    # every nonzero difference is u*p with p in the first quadrant and u a
    # unit (QAM) or a sign (PAM), so the ratios are exactly {u * p / q}
    units = UNITS if C.kind is Kind.QAM else (UNITS[0], UNITS[2])
    best: dict[GaussianRational, tuple[int, GaussianInt, GaussianInt]] = {}
    for q in sorted(plus, key=lambda g: (g.norm(), g.a, g.b)):
        nq = q.norm()
        for p in plus:
            base = GaussianRational(p, q)
            for u in units:
                h = base * u
                cur = best.get(h)
                if cur is None or nq < cur[0]:
                    dl = q
                    dk = -(u * p)
                    best[h] = (nq, dk, dl)
    states = _sort_states(best)
    for h in states:
        _, dk, dl = best[h]
        assert dk in box and dl in box
    scale = 2 * C.energy_scale
    values = np.array([complex(h) for h in states])
    rep_dl = np.array([math.sqrt(best[h][0]) * scale for h in states])
    rep_pairs = tuple(
        (complex(best[h][1]) * scale, complex(best[h][2]) * scale) for h in states
    )
    return SingularFadeSet(C, tuple(states), values, rep_dl, rep_pairs)


def _cluster(values: np.ndarray, tol: float) -> np.ndarray:
    """Connected-component labels of points closer than ``tol``."""
    pts = np.column_stack([values.real, values.imag])
    pairs = cKDTree(pts).query_pairs(tol, output_type="ndarray")
    n = len(values)
    g = coo_matrix((np.ones(len(pairs)), (pairs[:, 0], pairs[:, 1])), shape=(n, n))
    _, labels = connected_components(g, directed=False)
    return labels


def _enumerate_numeric(C: Constellation) -> SingularFadeSet:
    d = difference_constellation(C).deltas
    d = d[np.abs(d) > 1e-12]
    order = np.argsort(np.abs(d), kind="stable")
    d = d[order]
    vals, dls, dks = [], [], []
    chunk = max(1, 2_000_000 // len(d))
    for start in range(0, len(d), chunk):
        dl = d[start : start + chunk]
        r = -d[None, :] / dl[:, None]
        keys = np.round(r.ravel() / PSK_TOL).astype(np.complex128)
        _, idx = np.unique(keys.real + 1j * keys.imag, return_index=True)
        vals.append(r.ravel()[idx])
        li, ki = np.unravel_index(idx, r.shape)
        dls.append(dl[li])
        dks.append(d[ki])
    vals_a = np.concatenate(vals)
    dl_a = np.concatenate(dls)
    dk_a = np.concatenate(dks)
    labels = _cluster(vals_a, PSK_TOL)
    n = labels.max() + 1
    states, rep_dl, rep_pairs = [], [], []
    # smallest |d_l| representative per cluster
    best = np.full(n, np.inf)
    arg = np.zeros(n, dtype=int)
    mag = np.abs(dl_a)
    for i, (lab, m) in enumerate(zip(labels, mag)):
        if m < best[lab] - 1e-12:
            best[lab], arg[lab] = m, i
    for lab in range(n):
        i = arg[lab]
        states.append(complex(vals_a[i]))
        rep_dl.append(best[lab])
        rep_pairs.append((complex(dk_a[i]), complex(dl_a[i])))
    key = np.lexsort((np.angle(np.array(states)), np.abs(np.array(states))))
    states = [states[i] for i in key]
    return SingularFadeSet(
        C,
        tuple(states),
        np.array(states),
        np.array([rep_dl[i] for i in key]),
        tuple(rep_pairs[i] for i in key),
    )


# ---------------------------------------------------------------- closed forms


def count_pam(n_points: int) -> int:
    """Number of singular fade states of regular PAM with ``n_points`` levels.

    The totient sum starts at 2: the n = 1 term would count z = +-1 a second
    time on top of the additive 2.
    """
    if n_points < 2:
        raise ValueError("PAM count needs at least 2 points")
    return 2 + 4 * sum(euler_phi(n) for n in range(2, n_points))


def _qam_side(M: int) -> int:
    qam(M)  # validates M
    return math.isqrt(M)


def quadrant_plus(M: int) -> list[GaussianInt]:
    """First-quadrant differences of square M-QAM with the factor 2 removed."""
    s = _qam_side(M)
    return [GaussianInt(a, b) for a in range(1, s) for b in range(0, s)]


def coprime_pairs(M: int) -> int:
    """Unordered pairs of distinct, relatively prime first-quadrant differences."""
    pts = quadrant_plus(M)
    return sum(
        1
        for i, a in enumerate(pts)
        for b in pts[i + 1 :]
        if is_coprime(a, b)
    )


def count_qam(M: int) -> int:
    return 4 + 8 * coprime_pairs(M)


def count_psk(M: int) -> int:
    if M < 2 or M & (M - 1):
        raise ConstellationError(f"PSK count needs M a power of two, got {M}")
    return M * (M * M // 4 - M // 2 + 1)


def count_closed_form(C: Constellation) -> int:
    if C.kind is Kind.PAM:
        return count_pam(C.M)
    if C.kind is Kind.QAM:
        return count_qam(C.M)
    return count_psk(C.M)


def upper_bound_qam(M: int) -> int:
    s = _qam_side(M)
    n = ((2 * s - 1) ** 2 - 1) // 4
    return 4 * (n * n - n + 1)


# ---------------------------------------------------------------- constraints


class ConstraintError(ValueError):
    pass


@dataclass(frozen=True)
class ConstraintSet:
    """Singularity-removal classes: cells that must carry the same symbol.

    ``classes`` lists only the classes with two or more cells; the remaining
    cells are unconstrained singletons.
    """

    M: int
    classes: tuple[tuple[tuple[int, int], ...], ...]
    fade_state: FadeState | None = None

    def validate(self) -> None:
        seen: set[tuple[int, int]] = set()
        for cls in self.classes:
            rows = [k for k, _ in cls]
            cols = [l for _, l in cls]
            if len(set(rows)) != len(rows) or len(set(cols)) != len(cols):
                raise ConstraintError(f"class {cls} repeats a row or column")
            for cell in cls:
                k, l = cell
                if not (0 <= k < self.M and 0 <= l < self.M):
                    raise ConstraintError(f"cell {cell} outside {self.M}x{self.M} grid")
                if cell in seen:
                    raise ConstraintError(f"cell {cell} appears in two classes")
                seen.add(cell)

    def all_classes(self) -> list[tuple[tuple[int, int], ...]]:
        covered = {c for cls in self.classes for c in cls}
        singles = [
            ((k, l),)
            for k in range(self.M)
            for l in range(self.M)
            if (k, l) not in covered
        ]
        return list(self.classes) + singles


def constraints_for(C: Constellation, z: FadeState) -> ConstraintSet:
    """Group the M*M label pairs by the relay point ``x_k + z x_l``."""
    M = C.M
    groups: dict = defaultdict(list)
    if C.is_lattice and isinstance(z, GaussianRational):
        num, den = z.num, z.den
        for k, xk in enumerate(C.lattice):
            dk = den * xk
            for l, xl in enumerate(C.lattice):
                groups[dk + num * xl].append((k, l))
        classes = [tuple(g) for g in groups.values() if len(g) > 1]
    else:
        zc = complex(z)
        pts = C.lattice_array if C.is_lattice else C.points
        vals = (pts[:, None] + zc * pts[None, :]).ravel()
        labels = _cluster(vals, PSK_TOL)
        for idx, lab in enumerate(labels):
            groups[lab].append(divmod(idx, M))
        classes = [tuple(g) for g in groups.values() if len(g) > 1]
    if not classes:
        raise ConstraintError(f"{z} is not a singular fade state of {C.name}")
    classes.sort()
    return ConstraintSet(M, tuple(classes), z)
