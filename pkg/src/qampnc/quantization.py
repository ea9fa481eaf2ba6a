"""Partition of the fade-state plane into clustering regions.

Each singular fade state ``h`` owns the region where its clustering is the
best choice.  The clustering that removes ``h`` loses distance only at the
*other* singular fade states, and a difference pair ``(d_k, d_l)`` with
``-d_k/d_l = h`` sits at distance ``|d_l| |z - h|`` from ``z``.  The
binding collision at ``z`` is therefore the state minimizing
``|d_l(h)| |z - h|`` (``d_l(h)`` the shortest admissible ``d_l``), and the
clustering removing that state maximizes the minimum cluster distance.
The pairwise boundaries of this weighted nearest-state rule are circles
or lines.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from typing import Iterable, Sequence

import numpy as np

from .constellation import Constellation, Kind
from .gaussian import GaussianRational
from .singular_fades import FadeState, SingularFadeSet

__all__ = [
    "CIRegion",
    "TransitionCurve",
    "RegionMap",
    "ci_ext_centers",
    "in_ci_region",
    "ci_flags",
    "transition_curve",
    "classify",
    "classify_many",
    "weighted_distances",
    "region_neighbors",
    "grid_labels",
    "adjacent_pairs",
    "count_sector",
    "build_region_map",
    "boundary_polylines",
]


class CIRegion(str, Enum):
    EXTERIOR = "exterior"
    INTERIOR = "interior"
    NO = "no"


def _side(M: int) -> int:
    s = math.isqrt(M)
    if s * s != M or s < 2:
        raise ValueError(f"square QAM size expected, got {M}")
    return s


def ci_ext_centers(M: int) -> list[complex]:
    """Centers of the unit circles bounding the exterior CI region.

    These are the lattice points ``alpha + j beta`` on the outermost square
    ``max(|alpha|, |beta|) = sqrt(M) - 1``.
    """
    a = _side(M) - 1
    out = []
    for x in range(-a, a + 1):
        for y in range(-a, a + 1):
            if max(abs(x), abs(y)) == a:
                out.append(complex(x, y))
    return out


def ci_flags(z: np.ndarray, M: int) -> np.ndarray:
    """Vectorized :func:`in_ci_region`: 1 exterior, -1 interior, 0 neither."""
    z = np.asarray(z, dtype=np.complex128)
    s = _side(M)
    a = s - 1
    centers = np.array(ci_ext_centers(M))
    out = np.zeros(z.shape, dtype=np.int8)

    def outside_envelope(w: np.ndarray) -> np.ndarray:
        inf = np.maximum(np.abs(w.real), np.abs(w.imag))
        ok = inf >= s
        slow = ~ok & (inf >= a)
        if slow.any():
            d = np.abs(w[slow][..., None] - centers).min(axis=-1)
            ok[slow] = d >= 1.0
        return ok

    mag = np.abs(z)
    ext = mag > 1
    if ext.any():
        out[ext] = np.where(outside_envelope(z[ext]), 1, 0)
    intr = ~ext
    if intr.any():
        zi = z[intr]
        res = np.zeros(zi.shape, dtype=np.int8)
        zero = zi == 0
        res[zero] = -1
        nz = ~zero
        if nz.any():
            fast = np.abs(zi[nz]) <= 1.0 / (math.sqrt(2 * M) + 1 - math.sqrt(2))
            w = 1.0 / zi[nz]
            res[nz] = np.where(fast | outside_envelope(w), -1, 0)
        out[intr] = res
    return out


def in_ci_region(z: complex, M: int) -> CIRegion:
    """Where every exclusive-law clustering has the same minimum distance.

    Exterior: ``|z| > 1`` and ``z`` lies in the unbounded part of the
    complement of the unit circles around :func:`ci_ext_centers`.  Interior:
    ``|z| <= 1`` and ``1/z`` is exterior in that sense.  Circle boundaries
    count as inside the region.
    """
    f = int(ci_flags(np.array([complex(z)]), M)[0])
    return {1: CIRegion.EXTERIOR, -1: CIRegion.INTERIOR, 0: CIRegion.NO}[f]


# ---------------------------------------------------------------- transition curves


@dataclass(frozen=True)
class TransitionCurve:
    """Locus ``|d_l1| |z - z1| = |d_l2| |z - z2|``: a circle or a line.

    Circles carry ``center``/``radius``; lines carry ``a x + b y = c``.
    """

    kind: str
    z1: complex
    z2: complex
    dl1: float
    dl2: float
    center: complex | None = None
    radius: float | None = None
    a: float | None = None
    b: float | None = None
    c: float | None = None

    def residual(self, p: np.ndarray | complex) -> np.ndarray:
        p = np.asarray(p, dtype=np.complex128)
        return self.dl1 * np.abs(p - self.z1) - self.dl2 * np.abs(p - self.z2)

    def distance(self, p: np.ndarray | complex) -> np.ndarray:
        """Euclidean distance from points to the curve."""
        p = np.asarray(p, dtype=np.complex128)
        if self.kind == "circle":
            return np.abs(np.abs(p - self.center) - self.radius)
        return np.abs(self.a * p.real + self.b * p.imag - self.c) / math.hypot(self.a, self.b)

    def sample(self, n: int = 100, half_length: float = 4.0) -> np.ndarray:
        """``n`` points on the curve; lines are sampled around the foot of
        the perpendicular from the midpoint of ``z1`` and ``z2``."""
        if self.kind == "circle":
            th = np.linspace(0.0, 2 * math.pi, n, endpoint=False)
            return self.center + self.radius * np.exp(1j * th)
        nrm = math.hypot(self.a, self.b)
        normal = complex(self.a, self.b) / nrm
        mid = (self.z1 + self.z2) / 2
        foot = mid - (self.a * mid.real + self.b * mid.imag - self.c) / nrm * normal
        tangent = normal * 1j
        s = np.linspace(-half_length, half_length, n)
        return foot + s * tangent


def transition_curve(
    z1: FadeState,
    z2: FadeState,
    H: SingularFadeSet,
    rep_pairs: tuple[tuple[complex, complex], tuple[complex, complex]] | None = None,
) -> TransitionCurve:
    """Pairwise boundary between the regions of ``z1`` and ``z2``.

    By default the representative ``d_l`` of each state is the shortest one
    (``H.rep_dl``); ``rep_pairs`` may override it with explicit
    ``((d_k1, d_l1), (d_k2, d_l2))``.
    """
    c1, c2 = complex(z1), complex(z2)
    if z1 == z2 or abs(c1 - c2) < 1e-15:
        raise ValueError("transition curve needs two distinct fade states")
    if rep_pairs is None:
        dl1 = float(H.rep_dl[H.index_of(z1)])
        dl2 = float(H.rep_dl[H.index_of(z2)])
    else:
        (dk1, d1), (dk2, d2) = rep_pairs
        for dk, dl, z in ((dk1, d1, c1), (dk2, d2, c2)):
            if abs(dl) == 0:
                raise ValueError("degenerate representative pair: d_l = 0")
            if abs(-dk / dl - z) > 1e-9 * max(1.0, abs(z)):
                raise ValueError(f"pair ({dk}, {dl}) does not realize {z}")
        dl1, dl2 = abs(d1), abs(d2)
    A, B = dl1 * dl1, dl2 * dl2
    if math.isclose(A, B, rel_tol=1e-12):
        a = c1.real * A - c2.real * B
        b = c1.imag * A - c2.imag * B
        c = -0.5 * (abs(c2) ** 2 * B - abs(c1) ** 2 * A)
        return TransitionCurve("line", c1, c2, dl1, dl2, a=a, b=b, c=c)
    x = c1.real / (1 - B / A) + c2.real / (1 - A / B)
    y = c1.imag / (1 - B / A) + c2.imag / (1 - A / B)
    r2 = x * x + y * y + (abs(c2) ** 2 * B - abs(c1) ** 2 * A) / (A - B)
    return TransitionCurve(
        "circle", c1, c2, dl1, dl2, center=complex(x, y), radius=math.sqrt(max(r2, 0.0))
    )


# ---------------------------------------------------------------- classification


def weighted_distances(z: complex, H: SingularFadeSet) -> np.ndarray:
    """``|d_l(h)| |z - h|`` for every state ``h``: the minimum over difference
    pairs realizing ``h`` of ``|d_k + z d_l|``."""
    return H.rep_dl * np.abs(complex(z) - H.values)


def classify_many(z: np.ndarray, H: SingularFadeSet, chunk: int = 4096) -> np.ndarray:
    """Index into ``H.states`` of the chosen state for each fade value.

    Near-ties (relative 1e-12) go to the lowest index, which for lattice
    sets is the smallest state by (|num|^2, |den|^2, num, den).
    """
    z = np.asarray(z, dtype=np.complex128).ravel()
    out = np.empty(z.size, dtype=np.int64)
    w, v = H.rep_dl, H.values
    for s in range(0, z.size, chunk):
        d = w[None, :] * np.abs(z[s : s + chunk, None] - v[None, :])
        m = d.min(axis=1, keepdims=True)
        out[s : s + chunk] = np.argmax(d <= m * (1 + 1e-12) + 1e-300, axis=1)
    return out


def classify(z: complex, H: SingularFadeSet) -> FadeState:
    return H.states[int(classify_many(np.array([complex(z)]), H)[0])]


def grid_labels(
    H: SingularFadeSet, n: int, extent: tuple[float, float, float, float]
) -> tuple[np.ndarray, np.ndarray]:
    """Classify the centers of an ``n x n`` grid over ``(x0, x1, y0, y1)``.

    Returns ``(points, labels)``, both ``n x n`` with row index along y.
    """
    x0, x1, y0, y1 = extent
    xs = x0 + (np.arange(n) + 0.5) * (x1 - x0) / n
    ys = y0 + (np.arange(n) + 0.5) * (y1 - y0) / n
    pts = xs[None, :] + 1j * ys[:, None]
    labels = classify_many(pts, H).reshape(n, n)
    return pts, labels


def adjacent_pairs(labels: np.ndarray) -> set[tuple[int, int]]:
    """Unordered label pairs meeting across a grid edge."""
    out: set[tuple[int, int]] = set()
    for a, b in (
        (labels[:, :-1], labels[:, 1:]),
        (labels[:-1, :], labels[1:, :]),
    ):
        diff = a != b
        for p, q in zip(a[diff].tolist(), b[diff].tolist()):
            out.add((min(p, q), max(p, q)))
    return out


def region_neighbors(
    h: FadeState,
    H: SingularFadeSet,
    grid_resolution: int = 400,
    extent: tuple[float, float, float, float] | None = None,
) -> set:
    """States whose regions share a boundary with the region of ``h``.

    The default window is a box of half-width ``max(1, |h|)`` around ``h``,
    wide enough to contain the whole region for exterior states.
    """
    i = H.index_of(h)
    if extent is None:
        c = complex(h)
        r = max(1.0, abs(c))
        extent = (c.real - r, c.real + r, c.imag - r, c.imag + r)
    _, labels = grid_labels(H, grid_resolution, extent)
    nbrs = set()
    for p, q in adjacent_pairs(labels):
        if p == i:
            nbrs.add(q)
        elif q == i:
            nbrs.add(p)
    return {H.states[k] for k in sorted(nbrs)}


def count_sector(H: SingularFadeSet) -> int:
    """States with ``|h| > 1`` and ``0 <= arg h <= pi/4``."""
    n = 0
    for h in H.states:
        if isinstance(h, GaussianRational):
            re, im = h.real, h.imag
            if h.abs2() > 1 and im >= 0 and re >= im:
                n += 1
        else:
            if abs(h) > 1 + 1e-12 and -1e-12 <= math.atan2(h.imag, h.real) <= math.pi / 4 + 1e-12:
                n += 1
    return n


# ---------------------------------------------------------------- region map


@dataclass(frozen=True)
class RegionMap:
    """Per-state bounding curves plus the CI-region circle parameters."""

    constellation: Constellation
    H: SingularFadeSet
    boundaries: dict = field(repr=False)
    ci_exterior: tuple[tuple[complex, float], ...] = ()
    ci_interior: tuple[tuple[complex, float], ...] = ()

    def curves(self) -> list[TransitionCurve]:
        seen, out = set(), []
        for i, curves in self.boundaries.items():
            for j, cv in curves:
                key = (min(i, j), max(i, j))
                if key not in seen:
                    seen.add(key)
                    out.append(cv)
        return out


def _symmetry_images(H: SingularFadeSet, i: int) -> list[int]:
    z = H.states[i]
    imgs = []
    ops = [lambda w: w.inverse(), lambda w: -w]
    if H.constellation.kind is Kind.QAM:
        ops += [lambda w: w * GaussianRational(1j), lambda w: (w.conjugate() * GaussianRational(1j))]
    if not H.exact:
        zc = complex(z)
        cand = [1 / zc, -zc, zc.conjugate()]
        for c in cand:
            try:
                imgs.append(H.index_of(c))
            except KeyError:
                pass
        return imgs
    for op in ops:
        imgs.append(H.index_of(op(z)))
    return imgs


def build_region_map(
    H: SingularFadeSet, grid_resolution: int = 800, extent: float | None = None
) -> RegionMap:
    """Adjacency from a grid classification, closed under the plane symmetries.

    Interior regions are tiny near the origin, so adjacency found on the grid
    is propagated through inversion, negation and (for QAM) quarter turns and
    reflection about the diagonal, which all map regions onto regions.
    """
    C = H.constellation
    if extent is None:
        extent = float(np.max(np.abs(H.values.real)) + 1.0)
    _, labels = grid_labels(H, grid_resolution, (-extent, extent, -extent, extent))
    pairs = adjacent_pairs(labels)
    frontier = list(pairs)
    while frontier:
        p, q = frontier.pop()
        for ip, iq in _pairwise_images(H, p, q):
            key = (min(ip, iq), max(ip, iq))
            if key not in pairs:
                pairs.add(key)
                frontier.append(key)
    boundaries: dict[int, list] = {i: [] for i in range(len(H))}
    for p, q in sorted(pairs):
        cv = transition_curve(H.states[p], H.states[q], H)
        boundaries[p].append((q, cv))
        boundaries[q].append((p, cv))
    ext, intr = (), ()
    if C.kind is Kind.QAM:
        ext = tuple((c, 1.0) for c in ci_ext_centers(C.M))
        intr = tuple(_invert_circle(c, 1.0) for c, _ in ext)
    return RegionMap(C, H, boundaries, ext, intr)


def _pairwise_images(H: SingularFadeSet, p: int, q: int) -> Iterable[tuple[int, int]]:
    ip, iq = _symmetry_images(H, p), _symmetry_images(H, q)
    return zip(ip, iq)


def _invert_circle(center: complex, radius: float) -> tuple[complex, float]:
    """Image of a circle not through 0 under ``z -> 1/z``."""
    a, b = center.real, center.imag
    k = a * a + b * b - radius * radius
    return complex(a / k, -b / k), radius / abs(k)


def _curve_points(cv: TransitionCurve, extent: tuple[float, float, float, float], n: int) -> np.ndarray:
    x0, x1, y0, y1 = extent
    if cv.kind == "circle":
        th = np.linspace(0.0, 2 * math.pi, n)
        return cv.center + cv.radius * np.exp(1j * th)
    half = math.hypot(x1 - x0, y1 - y0)
    mid = complex((x0 + x1) / 2, (y0 + y1) / 2)
    nrm = math.hypot(cv.a, cv.b)
    normal = complex(cv.a, cv.b) / nrm
    foot = mid - (cv.a * mid.real + cv.b * mid.imag - cv.c) / nrm * normal
    return foot + np.linspace(-half, half, n) * normal * 1j


def boundary_polylines(
    rmap: RegionMap,
    extent: tuple[float, float, float, float],
    samples: int = 720,
    rel_tol: float = 1e-9,
) -> list[np.ndarray]:
    """Visible pieces of the transition curves inside ``extent``.

    A sample of the ``(p, q)`` curve is kept when ``p`` and ``q`` are both
    optimal there and the point is outside the clustering-independent
    region; consecutive kept samples form one polyline.
    """
    H = rmap.H
    x0, x1, y0, y1 = extent
    out: list[np.ndarray] = []
    for i, curves in rmap.boundaries.items():
        for j, cv in curves:
            if j < i:
                continue
            pts = _curve_points(cv, extent, samples)
            inside = (pts.real >= x0) & (pts.real <= x1) & (pts.imag >= y0) & (pts.imag <= y1)
            if not inside.any():
                continue
            d = H.rep_dl[None, :] * np.abs(pts[:, None] - H.values[None, :])
            best = d.min(axis=1)
            keep = inside & (np.maximum(d[:, i], d[:, j]) <= best * (1 + rel_tol) + 1e-12)
            if rmap.constellation.kind is Kind.QAM:
                keep &= ci_flags(pts, rmap.constellation.M) == 0
            edges = np.flatnonzero(np.diff(np.concatenate(([0], keep.astype(np.int8), [0]))))
            for a, b in zip(edges[::2], edges[1::2]):
                if b - a >= 2:
                    out.append(pts[a:b])
    return out
