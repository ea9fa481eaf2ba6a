"""Monte-Carlo simulation of two-way relaying with denoise-and-forward maps.

One trial: A and B send labels ``k`` and ``l`` at the same time, the relay
finds the ML pair, maps it to a cluster symbol through a Latin square and
broadcasts that symbol.  Each end node knows its own label, so it decodes the
relay symbol among the entries of its own row (A) or column (B) and reads off
the partner's label.  Bit errors are counted on the binary labels.

All signal sets have unit mean energy and every link has noise variance
``10**(-snr_db/10)``.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from functools import lru_cache

import numpy as np

from .constellation import Constellation, Kind, build
from .latin_squares import LatinSquare, LatinSquareBank, latin_square_bank, standard_square, xor_square
from .quantization import ci_flags, classify_many

__all__ = [
    "ChannelKind",
    "ChannelModel",
    "Scheme",
    "SimConfig",
    "BerPoint",
    "Protocol",
    "draw_fade",
    "relay_ml_decode",
    "run_protocol_trial",
    "sweep",
    "wilson_interval",
    "bc_constellation",
    "cached_bank",
    "default_threads",
]

THREADS_ENV = "QAMPNC_THREADS"


class ChannelKind(str, Enum):
    RAYLEIGH = "rayleigh"
    RICIAN = "rician"


@dataclass(frozen=True)
class ChannelModel:
    """Flat fading with unit (or ``variance``) mean power.

    Rician links have a line-of-sight part of power ``K/(K+1)`` at phase 0
    on every link, plus a circular Gaussian part of power ``1/(K+1)``.
    """

    kind: ChannelKind = ChannelKind.RAYLEIGH
    K: float = 0.0
    variance: float = 1.0

    def __post_init__(self) -> None:
        object.__setattr__(self, "kind", ChannelKind(self.kind))
        if not self.K >= 0:
            raise ValueError(f"Rician factor must be >= 0, got {self.K}")
        if self.variance <= 0:
            raise ValueError("link variance must be positive")

    @classmethod
    def rayleigh(cls, variance: float = 1.0) -> ChannelModel:
        return cls(ChannelKind.RAYLEIGH, 0.0, variance)

    @classmethod
    def rician(cls, K: float, variance: float = 1.0) -> ChannelModel:
        return cls(ChannelKind.RICIAN, K, variance)

    @classmethod
    def rician_db(cls, k_db: float, variance: float = 1.0) -> ChannelModel:
        return cls.rician(10 ** (k_db / 10), variance)

    @property
    def los_fraction(self) -> float:
        if self.kind is ChannelKind.RAYLEIGH:
            return 0.0
        if math.isinf(self.K):
            return 1.0
        return self.K / (self.K + 1)

    def draw(self, rng: np.random.Generator, size=None) -> np.ndarray | complex:
        los = self.los_fraction
        scale = math.sqrt(self.variance)
        g = (rng.standard_normal(size) + 1j * rng.standard_normal(size)) * math.sqrt((1 - los) / 2)
        return scale * (math.sqrt(los) + g)

    def label(self) -> str:
        if self.kind is ChannelKind.RAYLEIGH:
            return "rayleigh"
        return f"rician(K={10 * math.log10(self.K):.3g}dB)" if self.K > 0 else "rician(K=0)"


def draw_fade(model: ChannelModel, rng: np.random.Generator, size=None):
    return model.draw(rng, size)


class Scheme(str, Enum):
    ADAPTIVE_LS = "AdaptiveLS"
    FIXED_XOR = "FixedXOR"


def default_threads() -> int:
    raw = os.environ.get(THREADS_ENV)
    if raw:
        return max(1, int(raw))
    return max(1, min(8, os.cpu_count() or 1))


@dataclass(frozen=True)
class SimConfig:
    kind: Kind = Kind.QAM
    M: int = 16
    scheme: Scheme = Scheme.ADAPTIVE_LS
    channel: ChannelModel = field(default_factory=ChannelModel.rayleigh)
    snr_db: tuple[float, ...] = (10.0, 15.0, 20.0, 25.0, 30.0)
    trials: int = 100_000
    seed: int = 0
    bc_policy: str = "lattice"
    t_max: int | None = 20
    chunk: int = 4096

    def __post_init__(self) -> None:
        object.__setattr__(self, "kind", Kind(self.kind.upper() if isinstance(self.kind, str) else self.kind))
        object.__setattr__(self, "scheme", Scheme(self.scheme))
        object.__setattr__(self, "snr_db", tuple(float(s) for s in self.snr_db))
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        if not all(math.isfinite(s) for s in self.snr_db):
            raise ValueError("SNR values must be finite")
        if self.bc_policy not in ("lattice", "psk"):
            raise ValueError(f"unknown BC constellation policy {self.bc_policy!r}")
        if self.chunk < 1:
            raise ValueError("chunk must be >= 1")

    def constellation(self) -> Constellation:
        return build(self.kind, self.M, "unit")

    @property
    def name(self) -> str:
        return f"{self.M}-{self.kind.value}"


def wilson_interval(errors: int, n: int, z: float = 1.959963984540054) -> tuple[float, float]:
    """95% Wilson score interval for a binomial proportion."""
    if n <= 0:
        return 0.0, 1.0
    p = errors / n
    denom = 1 + z * z / n
    center = (p + z * z / (2 * n)) / denom
    half = z * math.sqrt(p * (1 - p) / n + z * z / (4 * n * n)) / denom
    return max(0.0, center - half), min(1.0, center + half)


@dataclass(frozen=True)
class BerPoint:
    snr_db: float
    ber: float
    trials: int
    ci_halfwidth: float
    bit_errors: int = 0
    bits: int = 0

    @property
    def ci(self) -> tuple[float, float]:
        return wilson_interval(self.bit_errors, self.bits)

    @classmethod
    def from_counts(cls, snr_db: float, trials: int, bit_errors: int, bits: int) -> BerPoint:
        lo, hi = wilson_interval(bit_errors, bits)
        return cls(snr_db, bit_errors / bits, trials, (hi - lo) / 2, bit_errors, bits)


def bc_constellation(C: Constellation, t: int, policy: str = "lattice") -> np.ndarray:
    """Unit-energy relay signal set for a square with ``t`` symbols.

    ``t = M`` reuses the end-node set.  Larger ``t`` uses ``t``-PSK for PSK
    end nodes (or ``policy="psk"``), ``t``-PAM for PAM, and otherwise the
    ``t`` odd-lattice points of least energy: whole shells first, then an
    angularly even pick from the next shell.  Symbol ``s`` maps to point ``s``.
    """
    if t == C.M:
        pts = C.points
    elif policy == "psk" or C.kind is Kind.PSK:
        pts = np.exp(2j * np.pi * np.arange(t) / t)
    elif C.kind is Kind.PAM:
        pts = build(Kind.PAM, t, "unit").points
    else:
        r = int(math.isqrt(t)) + 2
        odd = np.arange(-2 * r - 1, 2 * r + 2, 2)
        grid = (odd[:, None] + 1j * odd[None, :]).ravel()
        norms = np.rint(np.abs(grid) ** 2).astype(np.int64)
        chosen: list[complex] = []
        for n in np.unique(norms):
            shell = grid[norms == n]
            shell = shell[np.argsort(np.mod(np.angle(shell), 2 * np.pi), kind="stable")]
            room = t - len(chosen)
            if room >= len(shell):
                chosen.extend(shell)
            else:
                picks = (np.arange(room) * len(shell)) // room
                chosen.extend(shell[picks])
            if len(chosen) == t:
                break
        pts = np.array(chosen)
    pts = np.asarray(pts, dtype=np.complex128)
    return pts / math.sqrt(np.mean(np.abs(pts) ** 2))


def relay_ml_decode(y_R, h_A, h_B, C: Constellation) -> tuple[np.ndarray, np.ndarray]:
    """Joint ML labels ``(k, l)`` minimizing ``|y_R - h_A x_k - h_B x_l|``.

    Works elementwise on arrays.  Metrics within ``1e-9 (|h_A| + |h_B|)`` of
    the minimum count as ties, which go to the lexicographically smallest
    pair; colliding pairs at a singular fade state are therefore resolved
    the same way whatever rounding did to them.
    """
    y, a, b = np.broadcast_arrays(
        np.asarray(y_R, dtype=np.complex128),
        np.asarray(h_A, dtype=np.complex128),
        np.asarray(h_B, dtype=np.complex128),
    )
    shape = y.shape
    y, a, b = y.ravel(), a.ravel(), b.ravel()
    x = C.points
    cand = a[:, None, None] * x[None, :, None] + b[:, None, None] * x[None, None, :]
    d = np.abs(y[:, None, None] - cand).reshape(y.size, -1)
    tol = 1e-9 * (np.abs(a) + np.abs(b))
    idx = np.argmax(d <= d.min(axis=1, keepdims=True) + tol[:, None], axis=1)
    return (idx // C.M).reshape(shape), (idx % C.M).reshape(shape)


@lru_cache(maxsize=8)
def cached_bank(kind: Kind, M: int, t_max: int | None = 20) -> LatinSquareBank:
    return latin_square_bank(build(kind, M), t_max=t_max)


_POPCOUNT = np.array([bin(i).count("1") for i in range(1 << 12)], dtype=np.int64)


class Protocol:
    """Everything a trial needs, prepared once per configuration."""

    def __init__(self, cfg: SimConfig, bank: LatinSquareBank | None = None) -> None:
        self.cfg = cfg
        self.C = cfg.constellation()
        self.bits = int(math.log2(cfg.M))
        self.H = None
        squares: list[LatinSquare]
        if cfg.scheme is Scheme.FIXED_XOR:
            squares = [xor_square(cfg.M)]
        else:
            if bank is None:
                bank = cached_bank(cfg.kind, cfg.M, cfg.t_max)
            if bank.constellation.kind is not cfg.kind or bank.constellation.M != cfg.M:
                raise ValueError("bank does not match the configured constellation")
            self.H = bank.fades
            squares = list(bank.squares) + [standard_square(self.C)]
        for L in squares:
            rows_ok = all(len(set(r)) == L.M for r in L.cells.tolist())
            cols_ok = all(len(set(c)) == L.M for c in L.cells.T.tolist())
            if not (rows_ok and cols_ok):
                raise ValueError("square violates the exclusive law")
        self.squares = np.stack([L.cells for L in squares])
        self.fallback = len(squares) - 1
        tmax = max(L.t for L in squares)
        self.bc = np.zeros((len(squares), tmax), dtype=np.complex128)
        by_t: dict[int, np.ndarray] = {}
        for i, L in enumerate(squares):
            if L.t not in by_t:
                by_t[L.t] = bc_constellation(self.C, L.t, cfg.bc_policy)
            self.bc[i, : L.t] = by_t[L.t]

    def select(self, z: np.ndarray) -> np.ndarray:
        """Index of the square used at fade ratio ``z``."""
        if self.H is None:
            return np.zeros(np.shape(z), dtype=np.int64)
        idx = classify_many(z, self.H)
        if self.C.kind is Kind.QAM:
            idx[ci_flags(z, self.cfg.M) != 0] = self.fallback
        return idx

    def run(
        self,
        n: int,
        rng: np.random.Generator,
        sigma2: float,
        h_A: np.ndarray | None = None,
        h_B: np.ndarray | None = None,
    ) -> tuple[int, int]:
        """Bit errors ``(at B about A, at A about B)`` over ``n`` trials."""
        M, x = self.cfg.M, self.C.points
        ch = self.cfg.channel
        ka = rng.integers(0, M, n)
        lb = rng.integers(0, M, n)
        hA = ch.draw(rng, n) if h_A is None else np.broadcast_to(np.asarray(h_A, dtype=np.complex128), (n,))
        hB = ch.draw(rng, n) if h_B is None else np.broadcast_to(np.asarray(h_B, dtype=np.complex128), (n,))
        hA2, hB2 = ch.draw(rng, n), ch.draw(rng, n)
        s = math.sqrt(sigma2 / 2)
        noise = (rng.standard_normal((3, n)) + 1j * rng.standard_normal((3, n))) * s

        yR = hA * x[ka] + hB * x[lb] + noise[0]
        k_hat, l_hat = relay_ml_decode(yR, hA, hB, self.C)
        sq = self.select(hB / hA)
        sym = self.squares[sq, k_hat, l_hat]
        xR = self.bc[sq, sym]

        yA = hA2 * xR + noise[1]
        yB = hB2 * xR + noise[2]
        cand_A = self.bc[sq[:, None], self.squares[sq, ka, :]]
        l_at_A = np.argmin(np.abs(yA[:, None] - hA2[:, None] * cand_A), axis=1)
        cand_B = self.bc[sq[:, None], self.squares[sq, :, lb]]
        k_at_B = np.argmin(np.abs(yB[:, None] - hB2[:, None] * cand_B), axis=1)
        err_B = int(_POPCOUNT[k_at_B ^ ka].sum())
        err_A = int(_POPCOUNT[l_at_A ^ lb].sum())
        return err_B, err_A


def run_protocol_trial(
    cfg: SimConfig,
    rng: np.random.Generator,
    protocol: Protocol | None = None,
    snr_db: float | None = None,
    noiseless: bool = False,
) -> tuple[int, int]:
    """One trial; returns bit errors ``(A to B, B to A)``."""
    p = protocol if protocol is not None else Protocol(cfg)
    snr = cfg.snr_db[0] if snr_db is None else snr_db
    sigma2 = 0.0 if noiseless else 10 ** (-snr / 10)
    return p.run(1, rng, sigma2)


def sweep(
    cfg: SimConfig,
    protocol: Protocol | None = None,
    threads: int | None = None,
) -> list[BerPoint]:
    """BER per SNR point.

    Trials are cut into fixed chunks, each with its own generator spawned
    from ``cfg.seed``, so results do not depend on the thread count.
    """
    p = protocol if protocol is not None else Protocol(cfg)
    threads = default_threads() if threads is None else max(1, threads)
    n_chunks = -(-cfg.trials // cfg.chunk)
    sizes = [min(cfg.chunk, cfg.trials - i * cfg.chunk) for i in range(n_chunks)]
    roots = np.random.SeedSequence(cfg.seed).spawn(len(cfg.snr_db))

    jobs = []
    for i, snr in enumerate(cfg.snr_db):
        sigma2 = 10 ** (-snr / 10)
        for seq, n in zip(roots[i].spawn(n_chunks), sizes):
            jobs.append((i, n, seq, sigma2))

    def work(job):
        i, n, seq, sigma2 = job
        e1, e2 = p.run(n, np.random.default_rng(seq), sigma2)
        return i, e1 + e2

    errors = [0] * len(cfg.snr_db)
    if threads == 1:
        results = map(work, jobs)
    else:
        pool = ThreadPoolExecutor(max_workers=threads)
        results = pool.map(work, jobs)
    for i, e in results:
        errors[i] += e
    if threads != 1:
        pool.shutdown()
    bits = 2 * cfg.trials * p.bits
    return [BerPoint.from_counts(snr, cfg.trials, errors[i], bits) for i, snr in enumerate(cfg.snr_db)]
