"""Command-line front end.

    qampnc sfs --qam 16 --count-only
    qampnc latin build-bank --qam 16 --tmax 20 --out bank.json
    qampnc latin verify bank.json
    qampnc latin show --qam 16 --state 2+1i/1+0i
    qampnc regions --qam 16 --grid 800x800 --range -4..4 --out grid.csv --svg map.svg
    qampnc simulate --qam 16 --scheme AdaptiveLS FixedXOR --channel rician --k-db 5

Exit codes: 0 success, 1 domain or I/O error, 2 usage error.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from contextlib import contextmanager
from pathlib import Path

import numpy as np

from .constellation import Constellation, ConstellationError, Kind, build
from .gaussian import GaussianRational
from .latin_squares import (
    CompletionError,
    LatinSquareBank,
    complete,
    latin_square_bank,
    removes,
    standard_square,
    verify,
)
from .quantization import boundary_polylines, build_region_map, ci_flags, grid_labels
from .simulator import ChannelModel, Protocol, Scheme, SimConfig, default_threads, sweep
from .singular_fades import constraints_for, count_closed_form, enumerate_singular_fades, fade_class

log = logging.getLogger("qampnc")


class UsageError(Exception):
    pass


# ------------------------------------------------------------------ helpers


def _add_constellation(p: argparse.ArgumentParser, required: bool = True) -> None:
    g = p.add_mutually_exclusive_group(required=required)
    g.add_argument("--qam", type=int, metavar="M", help="square M-QAM")
    g.add_argument("--pam", type=int, metavar="N", help="N-point PAM")
    g.add_argument("--psk", type=int, metavar="M", help="M-PSK")


def _constellation(args) -> Constellation | None:
    for kind in ("qam", "pam", "psk"):
        M = getattr(args, kind, None)
        if M is not None:
            return build(kind, M)
    return None


@contextmanager
def _open_out(path: str | None):
    if path is None or path == "-":
        yield sys.stdout
        return
    with open(path, "w", newline="") as fh:
        yield fh


def _parse_state(text: str, C: Constellation):
    if C.is_lattice:
        return GaussianRational.parse(text)
    return complex(text.replace(" ", "").replace("i", "j"))


def _state_str(z) -> str:
    if isinstance(z, GaussianRational):
        return str(z)
    return f"{z.real:.12g}{z.imag:+.12g}i"


def _parse_grid(text: str) -> tuple[int, int]:
    try:
        a, b = text.lower().split("x")
        nx, ny = int(a), int(b)
    except ValueError:
        raise UsageError(f"--grid expects NxN, got {text!r}") from None
    if nx < 2 or ny < 2:
        raise UsageError("--grid needs at least 2x2 cells")
    return nx, ny


def _parse_range(text: str) -> tuple[float, float]:
    try:
        a, b = text.split("..")
        lo, hi = float(a), float(b)
    except ValueError:
        raise UsageError(f"--range expects a..b, got {text!r}") from None
    if not lo < hi:
        raise UsageError("--range needs a < b")
    return lo, hi


# --------------------------------------------------------------------- sfs


def cmd_sfs(args) -> int:
    C = _constellation(args)
    H = enumerate_singular_fades(C)
    formula = count_closed_form(C)
    if args.count_only:
        print(f"enumerated={len(H)} formula={formula}")
        return 0
    with _open_out(args.out) as fh:
        if args.format == "csv":
            w = csv.writer(fh)
            w.writerow(["id", "state", "re", "im", "class"])
            for i, z in enumerate(H.states):
                v = complex(z)
                w.writerow([i, _state_str(z), repr(v.real), repr(v.imag), fade_class(z)])
        else:
            doc = {
                "constellation": C.to_dict(),
                "count": len(H),
                "formula": formula,
                "states": [
                    {"id": i, "state": _state_str(z), "re": complex(z).real, "im": complex(z).imag,
                     "class": fade_class(z)}
                    for i, z in enumerate(H.states)
                ],
            }
            json.dump(doc, fh, indent=1)
            fh.write("\n")
    return 0


# ------------------------------------------------------------------- latin


def cmd_latin(args) -> int:
    if args.action == "build-bank":
        C = _constellation(args)
        if C is None:
            raise UsageError("build-bank needs --qam, --pam or --psk")
        if args.out is None:
            raise UsageError("build-bank needs --out")
        out = Path(args.out)
        if not out.parent.exists():
            raise OSError(f"output directory does not exist: {out.parent}")
        bank = latin_square_bank(
            C,
            t_max=args.tmax,
            node_limit=args.node_limit,
            progress=lambda d, n: log.info("filled %d/%d", d, n),
        )
        bank.save(out)
        counts = bank.t_counts()
        print(f"entries={len(bank)} verified=yes t_counts={json.dumps(counts)}")
        return 0
    if args.action == "verify":
        if args.bank is None:
            raise UsageError("verify needs a bank file")
        bank = LatinSquareBank.load(args.bank)
        ok = bank.verify()
        print(f"entries={len(bank)} verified={'yes' if ok else 'no'} t_counts={json.dumps(bank.t_counts())}")
        return 0 if ok else 1
    # show
    if args.state is None:
        raise UsageError("show needs --state")
    if args.bank is not None:
        bank = LatinSquareBank.load(args.bank)
        C = bank.constellation
    else:
        C = _constellation(args)
        if C is None:
            raise UsageError("show needs --qam/--pam/--psk or a bank file")
        bank = None
    z = _parse_state(args.state, C)
    if bank is not None:
        L = bank.square_for(z)
    else:
        L = standard_square(C)
        if not removes(L, C, z):
            L = complete(constraints_for(C, z), t_max=args.tmax, node_limit=args.node_limit)
    print(f"# {C.name} fade state {_state_str(z)}  t={L.t}  latin={'yes' if verify(L) else 'no'}")
    print(L)
    return 0


# ----------------------------------------------------------------- regions


def _svg(rmap, extent, path: str, size: int = 800) -> None:
    x0, x1, y0, y1 = extent
    sx = size / (x1 - x0)
    sy = size / (y1 - y0)

    def xy(p: complex) -> str:
        return f"{(p.real - x0) * sx:.2f},{(y1 - p.imag) * sy:.2f}"

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size}" '
        f'viewBox="0 0 {size} {size}">',
        f'<rect width="{size}" height="{size}" fill="white"/>',
        f'<line x1="0" y1="{y1 * sy:.2f}" x2="{size}" y2="{y1 * sy:.2f}" stroke="#ccc"/>',
        f'<line x1="{-x0 * sx:.2f}" y1="0" x2="{-x0 * sx:.2f}" y2="{size}" stroke="#ccc"/>',
        '<g fill="none" stroke="black" stroke-width="0.8">',
    ]
    for line in boundary_polylines(rmap, extent):
        parts.append(f'<polyline points="{" ".join(xy(p) for p in line)}"/>')
    parts.append("</g>")
    parts.append('<g fill="none" stroke="#c00" stroke-dasharray="4 3" stroke-width="0.8">')
    for c, r in rmap.ci_exterior + rmap.ci_interior:
        parts.append(
            f'<ellipse cx="{(c.real - x0) * sx:.2f}" cy="{(y1 - c.imag) * sy:.2f}" '
            f'rx="{r * sx:.2f}" ry="{r * sy:.2f}"/>'
        )
    parts.append("</g>")
    parts.append('<g fill="#036">')
    for v in rmap.H.values:
        if x0 <= v.real <= x1 and y0 <= v.imag <= y1:
            parts.append(f'<circle cx="{(v.real - x0) * sx:.2f}" cy="{(y1 - v.imag) * sy:.2f}" r="1.6"/>')
    parts.append("</g></svg>")
    with open(path, "w") as fh:
        fh.write("\n".join(parts) + "\n")


def cmd_regions(args) -> int:
    C = _constellation(args)
    nx, ny = _parse_grid(args.grid)
    lo, hi = _parse_range(args.range)
    if nx != ny:
        raise UsageError("--grid must be square (NxN)")
    H = enumerate_singular_fades(C)
    extent = (lo, hi, lo, hi)
    pts, labels = grid_labels(H, nx, extent)
    flags = ci_flags(pts, C.M) if C.kind is Kind.QAM else np.zeros(pts.shape, dtype=np.int8)
    names = [_state_str(z) for z in H.states]
    if args.out is not None or args.svg is None:
        with _open_out(args.out) as fh:
            w = csv.writer(fh)
            w.writerow(["re", "im", "state_id", "state", "ci_flag"])
            for p, lab, f in zip(pts.ravel().tolist(), labels.ravel().tolist(), flags.ravel().tolist()):
                w.writerow([f"{p.real:.9g}", f"{p.imag:.9g}", lab, names[lab], f])
    if args.svg is not None:
        rmap = build_region_map(H, grid_resolution=nx, extent=max(abs(lo), abs(hi)))
        _svg(rmap, extent, args.svg)
    return 0


# ---------------------------------------------------------------- simulate


def _load_toml(path: str) -> dict:
    try:
        import tomllib  # type: ignore[import-not-found]
    except ModuleNotFoundError:
        import tomli as tomllib
    with open(path, "rb") as fh:
        return tomllib.load(fh)


def _channel(name: str, k_db: float | None) -> ChannelModel:
    name = name.lower()
    if name == "rayleigh":
        return ChannelModel.rayleigh()
    if name == "rician":
        return ChannelModel.rician_db(5.0 if k_db is None else k_db)
    raise UsageError(f"unknown channel {name!r}")


def _runs_from_toml(doc: dict) -> list[dict]:
    base = {k: v for k, v in doc.items() if k != "run"}
    runs = doc.get("run") or [{}]
    return [{**base, **r} for r in runs]


def _config(spec: dict) -> SimConfig:
    known = {"constellation", "scheme", "channel", "k_db", "snr_db", "trials", "seed", "bc_policy", "t_max", "chunk"}
    extra = set(spec) - known - {"threads", "bank"}
    if extra:
        raise UsageError(f"unknown config keys: {', '.join(sorted(extra))}")
    try:
        m, kind = str(spec.get("constellation", "16-QAM")).upper().split("-")
        M = int(m)
    except ValueError:
        raise UsageError(f"constellation must look like 16-QAM, got {spec.get('constellation')!r}") from None
    return SimConfig(
        kind=kind,
        M=M,
        scheme=spec.get("scheme", "AdaptiveLS"),
        channel=_channel(spec.get("channel", "rayleigh"), spec.get("k_db")),
        snr_db=tuple(spec.get("snr_db", (10, 15, 20, 25, 30))),
        trials=int(spec.get("trials", 100_000)),
        seed=int(spec.get("seed", 0)),
        bc_policy=spec.get("bc_policy", "lattice"),
        t_max=spec.get("t_max", 20),
        chunk=int(spec.get("chunk", 4096)),
    )


def cmd_simulate(args) -> int:
    if args.config is not None:
        specs = _runs_from_toml(_load_toml(args.config))
    else:
        specs = [{}]
    C = _constellation(args)
    overrides = {}
    if C is not None:
        overrides["constellation"] = C.name
    for key in ("channel", "k_db", "trials", "seed", "bc_policy"):
        val = getattr(args, key)
        if val is not None:
            overrides[key] = val
    if args.snr is not None:
        try:
            overrides["snr_db"] = [float(s) for s in args.snr.split(",")]
        except ValueError:
            raise UsageError(f"--snr expects comma-separated dB values, got {args.snr!r}") from None
    if args.scheme:
        specs = [{**s, "scheme": sch} for s in specs for sch in args.scheme]
    specs = [{**s, **overrides} for s in specs]

    bank = LatinSquareBank.load(args.bank) if args.bank else None
    threads = args.threads if args.threads is not None else default_threads()
    with _open_out(args.out) as fh:
        w = csv.writer(fh)
        w.writerow(["scheme", "constellation", "channel", "snr_db", "trials", "ber", "ci_halfwidth"])
        for spec in specs:
            cfg = _config(spec)
            use_bank = bank if bank is not None and bank.constellation.name == cfg.name else None
            proto = Protocol(cfg, bank=use_bank)
            for pt in sweep(cfg, proto, threads=spec.get("threads", threads)):
                w.writerow([cfg.scheme.value, cfg.name, cfg.channel.label(), pt.snr_db, pt.trials,
                            f"{pt.ber:.6e}", f"{pt.ci_halfwidth:.3e}"])
                fh.flush()
    return 0


# --------------------------------------------------------------------- main


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="qampnc", description="Latin-square network coding for two-way relaying")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("sfs", help="enumerate singular fade states")
    _add_constellation(s)
    s.add_argument("--count-only", action="store_true")
    s.add_argument("--format", choices=("json", "csv"), default="json")
    s.add_argument("--out", help="output file (default stdout)")

    s = sub.add_parser("latin", help="build, verify or show removing Latin squares")
    s.add_argument("action", choices=("build-bank", "verify", "show"))
    s.add_argument("bank", nargs="?", help="bank JSON (verify/show)")
    _add_constellation(s, required=False)
    s.add_argument("--tmax", type=int, default=20, help="largest symbol count tried")
    s.add_argument("--node-limit", type=int, default=50_000, help="search nodes per symbol count")
    s.add_argument("--state", help="fade state, e.g. 2+1i/1+0i")
    s.add_argument("--out", help="bank JSON path (build-bank)")

    s = sub.add_parser("regions", help="classify a grid of fade states")
    _add_constellation(s)
    s.add_argument("--grid", default="400x400", help="NxN cell count")
    s.add_argument("--range", default="-4..4", help="a..b for both axes")
    s.add_argument("--out", help="CSV path (default stdout unless --svg)")
    s.add_argument("--svg", help="write the region boundaries as SVG")

    s = sub.add_parser("simulate", help="end-to-end BER sweep")
    _add_constellation(s, required=False)
    s.add_argument("--config", help="TOML file; flags override it")
    s.add_argument("--scheme", nargs="+", choices=[x.value for x in Scheme])
    s.add_argument("--channel", choices=("rayleigh", "rician"))
    s.add_argument("--k-db", dest="k_db", type=float, help="Rician factor in dB")
    s.add_argument("--snr", help="comma-separated SNR grid in dB")
    s.add_argument("--trials", type=int)
    s.add_argument("--seed", type=int)
    s.add_argument("--bc-policy", dest="bc_policy", choices=("lattice", "psk"))
    s.add_argument("--threads", type=int, help="worker threads (default from QAMPNC_THREADS)")
    s.add_argument("--bank", help="prebuilt bank JSON")
    s.add_argument("--out", help="CSV path (default stdout)")
    return p


COMMANDS = {"sfs": cmd_sfs, "latin": cmd_latin, "regions": cmd_regions, "simulate": cmd_simulate}


def _join_negative_values(argv: list[str]) -> list[str]:
    # "--range -4..4" would otherwise read -4..4 as an option
    out, i = [], 0
    while i < len(argv):
        if argv[i] in ("--range", "--snr") and i + 1 < len(argv):
            out.append(f"{argv[i]}={argv[i + 1]}")
            i += 2
        else:
            out.append(argv[i])
            i += 1
    return out


def run(argv: list[str] | None = None) -> int:
    parser = build_parser()
    argv = _join_negative_values(list(sys.argv[1:] if argv is None else argv))
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        return COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"qampnc: usage error: {exc}", file=sys.stderr)
        return 2
    except (ConstellationError, CompletionError, ValueError, KeyError, ZeroDivisionError, OSError) as exc:
        print(f"qampnc: error: {exc}", file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
