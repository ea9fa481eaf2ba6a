"""Latin squares as relay network-coding maps.

Row index is the label of A's point, column index the label of B's point,
and equal symbols form one cluster.  A square "removes" a singular fade
state when every pair of cells colliding at the relay carries one symbol,
which is the same as a strictly positive minimum cluster distance.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .constellation import Constellation, Kind
from .gaussian import GaussianInt, GaussianRational
from .singular_fades import (
    ConstraintError,
    ConstraintSet,
    FadeState,
    SingularFadeSet,
    constraints_for,
    enumerate_singular_fades,
)

__all__ = [
    "LatinSquare",
    "ConstraintSet",
    "CompletionError",
    "NotRemovedError",
    "verify",
    "relay_points",
    "min_cluster_distance",
    "removes",
    "standard_pam",
    "standard_qam",
    "standard_square",
    "xor_square",
    "transpose",
    "rotate_quarter",
    "rotate",
    "reflect",
    "complete",
    "LatinSquareBank",
    "latin_square_bank",
]


class CompletionError(RuntimeError):
    def __init__(self, message: str, best_t: int | None = None) -> None:
        super().__init__(message)
        self.best_t = best_t


class NotRemovedError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class LatinSquare:
    cells: np.ndarray

    def __post_init__(self) -> None:
        arr = np.asarray(self.cells, dtype=np.int64)
        if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
            raise ValueError("a Latin square must be an M x M array")
        arr = arr.copy()
        arr.setflags(write=False)
        object.__setattr__(self, "cells", arr)

    @property
    def M(self) -> int:
        return self.cells.shape[0]

    @property
    def t(self) -> int:
        """Number of distinct symbols in use."""
        return int(np.unique(self.cells).size)

    def __eq__(self, other: object) -> bool:
        return isinstance(other, LatinSquare) and np.array_equal(self.cells, other.cells)

    def __hash__(self) -> int:
        return hash(self.cells.tobytes())

    def tolist(self) -> list[list[int]]:
        return self.cells.tolist()

    def relabeled(self) -> LatinSquare:
        """Symbols renumbered 0, 1, ... by first occurrence in row-major order."""
        mapping: dict[int, int] = {}
        flat = self.cells.ravel()
        for s in flat:
            mapping.setdefault(int(s), len(mapping))
        return LatinSquare(np.array([mapping[int(s)] for s in flat]).reshape(self.cells.shape))

    def column_for(self, row: int, symbol: int) -> int | None:
        hit = np.flatnonzero(self.cells[row] == symbol)
        return int(hit[0]) if hit.size else None

    def row_for(self, col: int, symbol: int) -> int | None:
        hit = np.flatnonzero(self.cells[:, col] == symbol)
        return int(hit[0]) if hit.size else None

    def __str__(self) -> str:
        w = len(str(int(self.cells.max())))
        return "\n".join(" ".join(f"{v:>{w}d}" for v in row) for row in self.cells)


def verify(L: LatinSquare) -> bool:
    """Each symbol at most once per row and per column."""
    c = L.cells
    return all(np.unique(c[i]).size == L.M and np.unique(c[:, i]).size == L.M for i in range(L.M))


def relay_points(C: Constellation, z: complex) -> np.ndarray:
    """``x_k + z x_l`` for every cell, row-major."""
    return (C.points[:, None] + complex(z) * C.points[None, :]).ravel()


def _pair_min(values: np.ndarray, symbols: np.ndarray, chunk: int = 512) -> float:
    best = np.inf
    n = values.size
    for s in range(0, n, chunk):
        v = values[s : s + chunk]
        d = np.abs(v[:, None] - values[None, :])
        d[symbols[s : s + chunk, None] == symbols[None, :]] = np.inf
        best = min(best, float(d.min()))
    return best


def min_cluster_distance(L: LatinSquare, C: Constellation, z: FadeState) -> float:
    """Smallest relay-point distance between cells of different symbols.

    With an exact :class:`GaussianRational` fade on a lattice set the
    computation is done on integers, so collisions give exactly 0.0.
    """
    if L.M != C.M:
        raise ValueError(f"square order {L.M} does not match {C.name}")
    sym = L.cells.ravel()
    if isinstance(z, GaussianRational) and C.is_lattice:
        x = C.lattice_array
        num, den = complex(z.num), complex(z.den)
        v = (den * x[:, None] + num * x[None, :]).ravel()
        return _pair_min(v, sym) / abs(den) * C.energy_scale
    return _pair_min(relay_points(C, complex(z)), sym)


def removes(L: LatinSquare, C: Constellation, z: FadeState, constraints: ConstraintSet | None = None) -> bool:
    """True when every singularity-removal class of ``z`` is monochromatic."""
    cons = constraints if constraints is not None else constraints_for(C, z)
    cells = L.cells
    return all(len({int(cells[k, l]) for k, l in cls}) == 1 for cls in cons.classes)


# ---------------------------------------------------------------- constructions


def standard_pam(n_points: int) -> LatinSquare:
    """Left-cyclic square: row k is row 0 shifted left k times."""
    if n_points < 2:
        raise ValueError("need at least 2 points")
    k = np.arange(n_points)
    return LatinSquare((k[:, None] + k[None, :]) % n_points)


def standard_qam(M: int) -> LatinSquare:
    """Block left-cyclic arrangement of left-cyclic PAM blocks.

    Block (a, c) holds the left-cyclic square over symbols
    ``{i s, ..., i s + s - 1}`` with ``i = (a + c) mod s`` and ``s = sqrt(M)``.
    """
    s = math.isqrt(M)
    if s * s != M or s < 2:
        raise ValueError(f"M must be a perfect square, got {M}")
    k = np.arange(M)
    a, b = divmod(k, s)
    block = (a[:, None] + a[None, :]) % s
    inner = (b[:, None] + b[None, :]) % s
    return LatinSquare(block * s + inner)


def xor_square(M: int) -> LatinSquare:
    if M < 1 or M & (M - 1):
        raise ValueError(f"XOR square needs M a power of two, got {M}")
    k = np.arange(M)
    return LatinSquare(k[:, None] ^ k[None, :])


def standard_square(C: Constellation) -> LatinSquare:
    """A square removing z = 1 with exactly M symbols."""
    if C.kind is Kind.QAM:
        return standard_qam(C.M)
    if C.kind is Kind.PAM:
        return standard_pam(C.M)
    return xor_square(C.M)


# ---------------------------------------------------------------- symmetries


def transpose(L: LatinSquare) -> LatinSquare:
    """Swap the roles of A and B; removes ``1/z`` when ``L`` removes ``z``."""
    return LatinSquare(L.cells.T)


def _label_map(C: Constellation, f: Callable[[complex], complex]) -> np.ndarray:
    if C.is_lattice:
        return np.array(
            [C.label_of(GaussianInt.of(f(complex(p)))) for p in C.lattice], dtype=np.int64
        )
    out = []
    for p in C.points:
        q = f(complex(p))
        i = int(np.argmin(np.abs(C.points - q)))
        if abs(C.points[i] - q) > 1e-9:
            raise ValueError(f"{C.name} is not closed under the requested map")
        out.append(i)
    return np.array(out, dtype=np.int64)


def _check_removed(L: LatinSquare, C: Constellation, z: FadeState | None) -> None:
    if z is None:
        return
    try:
        ok = removes(L, C, z)
    except ConstraintError:
        ok = True
    if not ok:
        raise NotRemovedError(f"square does not remove {z}")


def rotate(L: LatinSquare, C: Constellation, g: complex, z: FadeState | None = None) -> LatinSquare:
    """Column permutation turning a remover of ``z`` into one of ``g z``.

    ``g`` must be a rotation mapping the signal set onto itself; column ``l``
    of the result is column ``mu(g x_l)`` of ``L``.
    """
    _check_removed(L, C, z)
    sigma = _label_map(C, lambda x: g * x)
    return LatinSquare(L.cells[:, sigma])


def rotate_quarter(L: LatinSquare, C: Constellation, z: FadeState | None = None) -> LatinSquare:
    """Remover of ``j z`` from a remover of ``z`` (square QAM)."""
    return rotate(L, C, 1j, z)


def reflect(L: LatinSquare, C: Constellation, z: FadeState | None = None) -> LatinSquare:
    """Remover of ``j conj(z)`` (angle ``pi/2 - theta``) from a remover of ``z``.

    Rows are permuted by ``x_I + j x_Q -> x_Q + j x_I`` and columns by
    ``x_I + j x_Q -> x_I - j x_Q``.
    """
    _check_removed(L, C, z)
    rows = _label_map(C, lambda x: complex(x.imag, x.real))
    cols = _label_map(C, lambda x: x.conjugate())
    return LatinSquare(L.cells[np.ix_(rows, cols)])


def conj_reflect(L: LatinSquare, C: Constellation, z: FadeState | None = None) -> LatinSquare:
    """Remover of ``conj(z)`` for sets closed under conjugation (PSK, PAM)."""
    _check_removed(L, C, z)
    perm = _label_map(C, lambda x: x.conjugate())
    return LatinSquare(L.cells[np.ix_(perm, perm)])


# ---------------------------------------------------------------- completion


def _vertices(constraints: ConstraintSet) -> list[tuple[tuple[int, ...], tuple[int, ...]]]:
    verts = []
    for cls in constraints.all_classes():
        verts.append((tuple(k for k, _ in cls), tuple(l for _, l in cls)))
    return verts


class _Search:
    """Backtracking colouring of the CPLS conflict structure with ``t`` symbols.

    Vertices are constraint classes and free cells; two vertices conflict
    when they share a row or a column.  Branching picks the vertex with the
    fewest admissible symbols (ties: more cells, then lower index) and tries
    symbols in increasing order, with forward checking on neighbours.  Symbols
    not yet used anywhere are interchangeable, so only the lowest of them is
    ever tried.
    """

    def __init__(self, M: int, verts, t: int, node_limit: int, rank: Sequence[int] | None = None) -> None:
        self.M, self.t, self.node_limit = M, t, node_limit
        self.rows = [v[0] for v in verts]
        self.cols = [v[1] for v in verts]
        self.n = len(verts)
        self.row_used = [0] * M
        self.col_used = [0] * M
        self.assign = [-1] * self.n
        self.full = (1 << t) - 1
        by_row: list[list[int]] = [[] for _ in range(M)]
        by_col: list[list[int]] = [[] for _ in range(M)]
        for i in range(self.n):
            for r in self.rows[i]:
                by_row[r].append(i)
            for c in self.cols[i]:
                by_col[c].append(i)
        self.by_row, self.by_col = by_row, by_col
        self.nbrs = []
        for i in range(self.n):
            s = set()
            for r in self.rows[i]:
                s.update(by_row[r])
            for c in self.cols[i]:
                s.update(by_col[c])
            s.discard(i)
            self.nbrs.append(tuple(sorted(s)))
        self.size = [len(r) for r in self.rows]
        self.rank = list(rank) if rank is not None else list(range(self.n))
        self.nodes = 0
        self.exhausted = False

    def domain(self, i: int) -> int:
        m = 0
        for r in self.rows[i]:
            m |= self.row_used[r]
        for c in self.cols[i]:
            m |= self.col_used[c]
        return self.full & ~m

    def _set(self, i: int, s: int) -> None:
        bit = 1 << s
        self.assign[i] = s
        for r in self.rows[i]:
            self.row_used[r] |= bit
        for c in self.cols[i]:
            self.col_used[c] |= bit

    def _unset(self, i: int, s: int) -> None:
        mask = ~(1 << s)
        self.assign[i] = -1
        for r in self.rows[i]:
            self.row_used[r] &= mask
        for c in self.cols[i]:
            self.col_used[c] &= mask

    def _tight_lines_ok(self, i: int) -> bool:
        # with t == M every row and column must hold every symbol
        if self.t != self.M:
            return True
        for lines, used, members in (
            (self.rows[i], self.row_used, self.by_row),
            (self.cols[i], self.col_used, self.by_col),
        ):
            for line in lines:
                need = self.full & ~used[line]
                if not need:
                    continue
                cover = 0
                for v in members[line]:
                    if self.assign[v] < 0:
                        cover |= self.domain(v)
                if need & ~cover:
                    return False
        return True

    def run(self) -> list[int] | None:
        unassigned = set(range(self.n))
        return self._recurse(unassigned, -1)

    def _recurse(self, unassigned: set[int], top: int) -> list[int] | None:
        if not unassigned:
            return list(self.assign)
        self.nodes += 1
        if self.nodes > self.node_limit:
            self.exhausted = True
            return None
        best, best_key, best_dom = -1, None, 0
        for i in unassigned:
            dom = self.domain(i)
            cnt = dom.bit_count() if hasattr(dom, "bit_count") else bin(dom).count("1")
            if cnt == 0:
                return None
            key = (cnt, -self.size[i], self.rank[i])
            if best_key is None or key < best_key:
                best, best_key, best_dom = i, key, dom
        unassigned.discard(best)
        # unused symbols are interchangeable: only the next fresh one is tried
        dom = best_dom & ((1 << (top + 2)) - 1)
        while dom:
            low = dom & -dom
            s = low.bit_length() - 1
            dom ^= low
            self._set(best, s)
            ok = all(self.domain(j) for j in self.nbrs[best] if self.assign[j] < 0)
            if ok and self._tight_lines_ok(best):
                out = self._recurse(unassigned, max(top, s))
                if out is not None:
                    return out
            self._unset(best, s)
            if self.exhausted:
                break
        unassigned.add(best)
        return None


def _attempt(M: int, verts, t: int, node_limit: int, seed: int) -> list[int] | None:
    """Restarted search for one symbol count.

    The first run uses the natural vertex order; later runs shuffle the
    tie-breaking order with a seeded generator and double their budget, until
    ``node_limit`` nodes are spent.  A run that ends without hitting its
    budget has refuted ``t`` outright.
    """
    rng = np.random.default_rng(seed)
    budget, spent, rank = 500, 0, None
    while spent < node_limit:
        run_budget = min(budget, node_limit - spent)
        search = _Search(M, verts, t, run_budget, rank)
        sol = search.run()
        if sol is not None:
            return sol
        if not search.exhausted:
            return None
        spent += search.nodes
        budget *= 2
        rank = rng.permutation(len(verts)).tolist()
    return None


def complete(
    constraints: ConstraintSet,
    t_max: int | None = None,
    t_min: int | None = None,
    node_limit: int = 50_000,
    seed: int = 0,
) -> LatinSquare:
    """Fill a constrained partially-filled Latin square with few symbols.

    Symbol counts ``t = t_min, t_min + 1, ..., t_max`` are tried in turn and
    the first success is returned, relabeled by first occurrence.  Each
    symbol count gets at most ``node_limit`` search nodes, so the result is
    minimal among the attempts that finished, not a proof of minimality.
    """
    constraints.validate()
    M = constraints.M
    t_max = 2 * M if t_max is None else t_max
    t_lo = M if t_min is None else max(M, t_min)
    verts = _vertices(constraints)
    for t in range(t_lo, t_max + 1):
        sol = _attempt(M, verts, t, node_limit, seed)
        if sol is None:
            continue
        cells = np.empty((M, M), dtype=np.int64)
        for (rows, cols), s in zip(verts, sol):
            for r, c in zip(rows, cols):
                cells[r, c] = s
        return LatinSquare(cells).relabeled()
    raise CompletionError(
        f"no completion with at most {t_max} symbols within {node_limit} nodes per attempt",
        best_t=t_max,
    )


# ---------------------------------------------------------------------- bank


Move = Callable[[LatinSquare], LatinSquare]


def _symmetries(C: Constellation) -> list[tuple[Callable[[FadeState], FadeState], Move]]:
    """Generators ``(state map, square map)`` of the fade-state symmetry group."""
    inv = lambda z: z.inverse() if isinstance(z, GaussianRational) else 1 / z
    moves: list[tuple[Callable[[FadeState], FadeState], Move]] = [(inv, transpose)]
    if C.kind is Kind.QAM:
        jr = GaussianRational(1j)
        moves.append((lambda z: jr * z, lambda L: rotate_quarter(L, C)))
        moves.append((lambda z: jr * z.conjugate(), lambda L: reflect(L, C)))
    elif C.kind is Kind.PAM:
        moves.append((lambda z: -z, lambda L: rotate(L, C, -1)))
    else:
        g = complex(np.exp(2j * np.pi / C.M))
        moves.append((lambda z: g * complex(z), lambda L: rotate(L, C, g)))
        moves.append((lambda z: complex(z).conjugate(), lambda L: conj_reflect(L, C)))
    return moves


def _state_to_json(z: FadeState):
    if isinstance(z, GaussianRational):
        return str(z)
    z = complex(z)
    return [z.real, z.imag]


def _state_from_json(raw) -> FadeState:
    if isinstance(raw, str):
        return GaussianRational.parse(raw)
    return complex(raw[0], raw[1])


@dataclass
class LatinSquareBank:
    """One removing Latin square per singular fade state of a signal set."""

    constellation: Constellation
    fades: SingularFadeSet
    squares: list[LatinSquare]

    def __len__(self) -> int:
        return len(self.squares)

    def square_for(self, z: FadeState) -> LatinSquare:
        return self.squares[self.fades.index_of(z)]

    def t_counts(self) -> dict[int, int]:
        counts: dict[int, int] = {}
        for L in self.squares:
            counts[L.t] = counts.get(L.t, 0) + 1
        return dict(sorted(counts.items()))

    def verify(self) -> bool:
        return all(
            verify(L) and removes(L, self.constellation, z)
            for z, L in zip(self.fades.states, self.squares)
        )

    def to_json(self) -> dict:
        C = self.constellation
        return {
            "constellation": {"kind": C.kind.value, "M": C.M, "normalization": C.normalization},
            "squares": [
                {"fade_state": _state_to_json(z), "M": L.M, "t": L.t, "cells": L.cells.ravel().tolist()}
                for z, L in zip(self.fades.states, self.squares)
            ],
        }

    def save(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_json(), fh)

    @classmethod
    def from_json(cls, data: dict) -> LatinSquareBank:
        from .constellation import build

        spec = data["constellation"]
        C = build(spec["kind"], spec["M"], spec.get("normalization", "lattice"))
        H = enumerate_singular_fades(C)
        squares: list[LatinSquare | None] = [None] * len(H)
        for entry in data["squares"]:
            M = entry["M"]
            L = LatinSquare(np.asarray(entry["cells"], dtype=np.int64).reshape(M, M))
            squares[H.index_of(_state_from_json(entry["fade_state"]))] = L
        if any(L is None for L in squares):
            raise ValueError("bank does not cover every singular fade state")
        return cls(C, H, squares)  # type: ignore[arg-type]

    @classmethod
    def load(cls, path) -> LatinSquareBank:
        with open(path) as fh:
            return cls.from_json(json.load(fh))


def latin_square_bank(
    C: Constellation,
    t_max: int | None = None,
    node_limit: int = 50_000,
    progress: Callable[[int, int], None] | None = None,
) -> LatinSquareBank:
    """Removing squares for every singular fade state of ``C``.

    One state per symmetry orbit is completed from its constraints (``z = 1``
    starts from the standard square); the rest of the orbit is filled by
    transposing and relabeling.  Every entry is checked before returning.
    """
    H = enumerate_singular_fades(C)
    moves = _symmetries(C)
    squares: list[LatinSquare | None] = [None] * len(H)
    one = H.index_of(GaussianRational(1) if H.exact else 1 + 0j)
    done = 0
    for i in [one] + [k for k in range(len(H)) if k != one]:
        if squares[i] is not None:
            continue
        z = H.states[i]
        L = standard_square(C) if i == one else None
        if L is None or not removes(L, C, z):
            L = complete(constraints_for(C, z), t_max=t_max, node_limit=node_limit)
        squares[i] = L
        stack = [(z, L)]
        while stack:
            z0, L0 = stack.pop()
            for fz, fL in moves:
                k = H.index_of(fz(z0))
                if squares[k] is None:
                    squares[k] = fL(L0).relabeled()
                    stack.append((H.states[k], squares[k]))
        done = sum(sq is not None for sq in squares)
        if progress is not None:
            progress(done, len(H))
    bank = LatinSquareBank(C, H, squares)  # type: ignore[arg-type]
    if not bank.verify():
        raise RuntimeError("bank contains a square that does not remove its fade state")
    return bank
