"""Command-line entry point.

Subcommands::

    exponents   Strichartz and Sobolev exponents of a symbol
    propagate   evolve the fields of a DFLD file
    synthesize  plant profiles from a JSON spec into a DFLD family
    decompose   extract profiles (optionally scale stage first) from a family
    verify      run hypothesis and inequality checks

Exit status is 0 on success or passing checks, 1 when a check fails and 2 on
usage or configuration errors. A JSON config file (``--config`` or the
``DISPERSIVE_PROFILES_CONFIG`` environment variable) supplies defaults that
command-line flags override.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from dataclasses import dataclass, fields
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import __version__
from .dfld import DFLDError, read_dfld, read_family, write_dfld, write_slice_csv, write_trace_csv
from .field import (
    AliasingError,
    FieldMismatchError,
    GridError,
    GridSpec,
    propagate,
    set_threads,
)
from .symbols import (
    AdmissibilityError,
    SymbolError,
    admissible_exponents,
    diagonal_exponent,
    sobolev_exponent,
    symbol_from_id,
)

CONFIG_ENV = "DISPERSIVE_PROFILES_CONFIG"
EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    """Everything a run depends on; validated before any computation."""

    symbol: str = "schrodinger"
    d: int = 1
    M: int | None = None
    L_box: float | None = None
    s: float = 0.25
    delta_S: float | str = 0.0
    eps_besov: float = 1e-6
    defect_tol: float = 5e-2
    T: float = 8.0
    n_t: int = 65
    J_max: int = 8
    tail_fraction: float = 0.5
    seed: int = 0
    threads: int = 1
    report: str | None = None
    dump_dir: str | None = None
    csv_dir: str | None = None
    figures_dir: str | None = None

    def validate(self) -> None:
        def bad(name, why):
            raise ConfigError(f"invalid config: {name} {why}")

        if not isinstance(self.d, int) or self.d < 1:
            bad("d", f"must be a positive integer, got {self.d!r}")
        if self.M is not None and (self.M < 2 or self.M & (self.M - 1)):
            bad("M", f"must be a power of two >= 2, got {self.M}")
        if self.L_box is not None and not self.L_box > 0:
            bad("L_box", f"must be positive, got {self.L_box}")
        if not 0 <= self.s < self.d / 2:
            bad("s", f"must satisfy 0 <= s < d/2 = {self.d / 2}, got {self.s}")
        if isinstance(self.delta_S, str):
            if self.delta_S != "auto":
                bad("delta_S", f"must be a nonnegative number or 'auto', got {self.delta_S!r}")
        elif self.delta_S < 0:
            bad("delta_S", f"must be nonnegative, got {self.delta_S}")
        if not self.eps_besov > 0:
            bad("eps_besov", f"must be positive, got {self.eps_besov}")
        if not self.defect_tol > 0:
            bad("defect_tol", f"must be positive, got {self.defect_tol}")
        if not self.T > 0:
            bad("T", f"must be positive, got {self.T}")
        if self.n_t < 16:
            bad("n_t", f"must be at least 16, got {self.n_t}")
        if self.J_max < 0:
            bad("J_max", f"must be nonnegative, got {self.J_max}")
        if not 0 < self.tail_fraction <= 1:
            bad("tail_fraction", f"must lie in (0, 1], got {self.tail_fraction}")
        if self.threads < 1:
            bad("threads", f"must be at least 1, got {self.threads}")
        try:
            symbol_from_id(self.symbol, self.d)
        except SymbolError as exc:
            bad("symbol", str(exc))
        self.grid()

    def grid(self) -> GridSpec:
        g = GridSpec.default(self.d) if self.d in (1, 2, 3) else GridSpec(self.d, 8)
        return GridSpec(self.d, self.M or g.M, self.L_box or g.L_box)

    def sym(self):
        return symbol_from_id(self.symbol, self.d)

    @classmethod
    def from_sources(cls, args: argparse.Namespace) -> "RunConfig":
        values: dict = {}
        path = getattr(args, "config", None) or os.environ.get(CONFIG_ENV)
        if path:
            try:
                values.update(json.loads(Path(path).read_text()))
            except (OSError, json.JSONDecodeError) as exc:
                raise ConfigError(f"cannot read config {path}: {exc}") from exc
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(values) - known)
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
        for name in known:
            v = getattr(args, name, None)
            if v is not None:
                values[name] = v
        cfg = cls(**values)
        cfg.validate()
        return cfg


# --- output helpers ---


def dump_json(obj, path=None) -> str:
    text = json.dumps(obj, sort_keys=True, indent=2, default=_json_default) + "\n"
    if path:
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        Path(path).write_text(text)
    return text


def _json_default(v):
    if isinstance(v, Fraction):
        return str(v) if v.denominator != 1 else int(v)
    if isinstance(v, (np.floating, np.integer)):
        return v.item()
    if isinstance(v, np.ndarray):
        return v.tolist()
    raise TypeError(f"not serializable: {type(v).__name__}")


def _fmt(v) -> str:
    if isinstance(v, Fraction):
        return str(v)
    if isinstance(v, float) and v == math.inf:
        return "inf"
    return f"{v:g}" if isinstance(v, float) else str(v)


def _parse_number(text: str):
    """Exact rational when possible (``1/2``, ``0.25``, ``3``), else float."""
    if text in ("inf", "infinity"):
        return math.inf
    try:
        return Fraction(text)
    except ValueError:
        return float(text)


def _sobolev_index(text: str) -> float:
    """argparse type for ``--s``: accepts ``0.25`` as well as ``1/4``."""
    try:
        return float(_parse_number(text))
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None


def _write_figure(fn, *args):
    try:
        return fn(*args)
    except Exception as exc:  # figures are a convenience; never fail a run on them
        print(f"warning: figure not written ({type(exc).__name__}: {exc})", file=sys.stderr)
        return None


# --- subcommands ---


def cmd_exponents(args, cfg: RunConfig) -> int:
    sym = cfg.sym()
    s = _parse_number(args.s_text) if args.s_text is not None else Fraction(cfg.s).limit_denominator(10**6)
    alpha = Fraction(sym.alpha).limit_denominator(10**6) if float(sym.alpha).is_integer() else sym.alpha
    out = {
        "symbol": sym.id,
        "d": cfg.d,
        "s": s,
        "alpha": alpha,
        "p_s": sobolev_exponent(cfg.d, s),
        "r": diagonal_exponent(cfg.d, s, alpha),
    }
    if args.p is not None:
        pair = admissible_exponents(cfg.d, s, alpha, _parse_number(args.p))
        out["pair"] = {"p": pair.p, "q": pair.q}
    if args.json:
        sys.stdout.write(dump_json(out))
    else:
        print(f"r = {_fmt(out['r'])}")
        print(f"p(s) = {_fmt(out['p_s'])}")
        if "pair" in out:
            print(f"(p, q) = ({_fmt(out['pair']['p'])}, {_fmt(out['pair']['q'])})")
    return EXIT_OK


def cmd_propagate(args, cfg: RunConfig) -> int:
    fields_in, header = read_dfld(args.input)
    sym = symbol_from_id(cfg.symbol, fields_in[0].grid.d)
    out = []
    for t in args.t:
        out.extend(propagate(f, sym, t) for f in fields_in)
    meta = {"symbol": sym.id, "times": list(args.t), "count_in": len(fields_in), "order": "time-major"}
    write_dfld(args.output, out, dtype=header["dtype"], meta=meta)
    if cfg.csv_dir:
        Path(cfg.csv_dir).mkdir(parents=True, exist_ok=True)
        for k, f in enumerate(out):
            write_slice_csv(Path(cfg.csv_dir) / f"slice_{k:03d}.csv", f)
    print(f"wrote {len(out)} fields to {args.output}")
    return EXIT_OK


def cmd_synthesize(args, cfg: RunConfig) -> int:
    from .synthesis import PlantSpec, plant

    spec_obj = json.loads(Path(args.spec).read_text())
    symbol = args.symbol or spec_obj.get("symbol", cfg.symbol)
    s = float(args.s) if args.s is not None else float(spec_obj.get("s", cfg.s))
    spec = PlantSpec.from_json(spec_obj)
    sym = symbol_from_id(symbol, spec.grid.d)
    family, ledger = plant(spec, sym, s)
    write_dfld(args.output, family, meta={"ledger": ledger})
    if args.ledger:
        dump_json(ledger, args.ledger)
    print(f"planted {len(spec.profiles)} profiles in {len(family)} members -> {args.output}")
    return EXIT_OK


def cmd_decompose(args, cfg: RunConfig) -> int:
    from .extraction import DecomposeParams, decompose, full_decompose

    family, header = read_family(args.input)
    sym = symbol_from_id(cfg.symbol, family.grid.d)
    delta_S = cfg.delta_S
    if delta_S == "auto":
        floor = header.get("meta", {}).get("ledger", {}).get("noise", {}).get("s_floor")
        if floor is None:
            raise ConfigError("delta_S='auto' needs a synthesis ledger with a noise floor in the input header")
        delta_S = 3.0 * float(floor)
    params = DecomposeParams(
        delta_S=float(delta_S),
        J_max=cfg.J_max,
        tail_fraction=cfg.tail_fraction,
        T=cfg.T,
        n_t=cfg.n_t,
        defect_tol=cfg.defect_tol,
    )
    if args.full:
        report = full_decompose(family, sym, cfg.s, params, {"eps_besov": cfg.eps_besov})
    else:
        report = decompose(family, sym, cfg.s, params)
    rep = report.to_json()
    text = dump_json(rep, cfg.report)
    if not cfg.report:
        sys.stdout.write(text)
    if cfg.dump_dir:
        d = Path(cfg.dump_dir)
        d.mkdir(parents=True, exist_ok=True)
        if report.profiles:
            write_dfld(d / "profiles.dfld", [p.U for p in report.profiles], space="frequency")
        write_dfld(d / "remainder.dfld", report.remainder, space="frequency")
    if cfg.csv_dir:
        c = Path(cfg.csv_dir)
        c.mkdir(parents=True, exist_ok=True)
        write_trace_csv(
            c / "ledger.csv",
            {
                "step": [e["step"] for e in rep["ledger"]],
                "profile_energy": [e["profile_energy"] for e in rep["ledger"]],
                "max_abs_defect": [e["max_abs_defect"] for e in rep["ledger"]],
            },
        )
        write_trace_csv(
            c / "strichartz_trace.csv",
            {k: [t[k] for t in rep["strichartz_trace"]] for k in ("step", "S", "Lr", "Lr_tail_mean")},
        )
    if cfg.figures_dir:
        from .plotting import plot_ledger, plot_profiles, plot_strichartz_trace

        f = Path(cfg.figures_dir)
        f.mkdir(parents=True, exist_ok=True)
        floor = header.get("meta", {}).get("ledger", {}).get("noise", {}).get("s_floor")
        _write_figure(plot_strichartz_trace, rep, f / "strichartz_trace.png", floor)
        _write_figure(plot_ledger, rep, f / "ledger.png")
        _write_figure(plot_profiles, [p.U for p in report.profiles], f / "profiles.png")
    print(f"J = {report.J} ({report.stopping_reason})", file=sys.stderr)
    return EXIT_OK


def load_report(report_path, dump_dir):
    """Rebuild a report object (profiles with fields, remainder) from JSON plus DFLD dumps."""
    from types import SimpleNamespace

    from .extraction import Core, Profile

    rep = json.loads(Path(report_path).read_text())
    dump = Path(dump_dir)
    U = read_dfld(dump / "profiles.dfld")[0] if rep["profiles"] else []
    remainder, _ = read_family(dump / "remainder.dfld")
    profiles = [
        Profile(u, Core(np.array(p["times"]), np.array(p["centers"])), np.array(p["scale"]), float(p["energy"]), p["step"])
        for u, p in zip(U, rep["profiles"])
    ]
    return SimpleNamespace(profiles=profiles, remainder=remainder, params=rep.get("params", {}), json=rep)


def cmd_verify(args, cfg: RunConfig) -> int:
    from . import verify as V

    grid = cfg.grid()
    sym = cfg.sym()
    checks = ["unitarity", "strichartz", "lqdecay", "weak", "gerard", "pythagorean"] if args.check == "all" else [args.check]
    battery = None
    if args.input:
        battery = list(read_dfld(args.input)[0])
        grid = battery[0].grid
    verdicts = []
    for name in checks:
        if name == "unitarity":
            bat = battery or V.random_battery(grid, sym.N, args.count, cfg.seed)
            verdicts.append(V.check_unitarity(sym, bat, cfg.s, np.linspace(-cfg.T, cfg.T, 10)))
        elif name == "strichartz":
            bat = battery or V.random_battery(grid, sym.N, min(args.count, 8), cfg.seed)
            if args.p is not None:
                pair = admissible_exponents(grid.d, cfg.s, sym.alpha, _parse_number(args.p))
                p, q = float(pair.p), float(pair.q)
            else:
                p = q = float(diagonal_exponent(grid.d, cfg.s, sym.alpha))
            verdicts.append(V.check_strichartz(sym, bat, p, q, cfg.s, cfg.T, cfg.n_t))
        elif name == "lqdecay":
            f = battery[0] if battery else V.smooth_bump(grid, sym.N, args.width)
            q = float(_parse_number(args.q)) if args.q else V.default_decay_exponent(sym, grid.d)
            verdicts.append(V.check_lq_decay(sym, f, q))
        elif name == "weak":
            f = battery[0] if battery else V.smooth_bump(grid, sym.N, args.width)
            for path_kind in ("translation", "time"):
                times, shifts = V.default_path(sym, f, path_kind)
                verdicts.append(V.check_weak_vanishing(sym, f, times, shifts, V.test_battery(grid, sym.N), cfg.s))
        elif name == "gerard":
            fams, names = V.standard_gerard_battery(grid, cfg.s, cfg.seed)
            verdicts.append(V.check_gerard(fams, cfg.s, names=names))
        elif name == "pythagorean":
            if not (args.decomposition and cfg.dump_dir and args.family):
                if args.check == "all":
                    continue
                raise ConfigError("pythagorean check needs --decomposition, --dump-dir and --family")
            rep = load_report(args.decomposition, cfg.dump_dir)
            family, _ = read_family(args.family)
            verdicts.append(V.check_pythagorean(rep, family, symbol_from_id(cfg.symbol, family.grid.d), cfg.s))
    out = {
        "symbol": sym.id,
        "verdicts": [v.to_json() for v in verdicts],
        "passed": all(v.passed is not False for v in verdicts),
    }
    from .extraction import _clean

    text = dump_json(_clean(out), cfg.report)
    if not cfg.report:
        sys.stdout.write(text)
    if cfg.csv_dir:
        c = Path(cfg.csv_dir)
        c.mkdir(parents=True, exist_ok=True)
        for k, v in enumerate(verdicts):
            if v.traces:
                write_trace_csv(c / f"{k + 1:02d}_{v.check}.csv", v.traces)
    if cfg.figures_dir:
        from .plotting import plot_trace

        f = Path(cfg.figures_dir)
        f.mkdir(parents=True, exist_ok=True)
        for k, v in enumerate(verdicts):
            cols = v.traces
            if not cols:
                continue
            x = next(iter(cols))
            ys = [key for key in cols if key != x and len(cols[key]) == len(cols[x])]
            if ys:
                _write_figure(plot_trace, cols, x, ys, f / f"{k + 1:02d}_{v.check}.png", False, v.check)
    for v in verdicts:
        status = "n/a" if v.passed is None else ("pass" if v.passed else "FAIL")
        print(f"{v.check}: {status}", file=sys.stderr)
    return EXIT_OK if out["passed"] else EXIT_FAIL


# --- argument parsing ---


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help=f"JSON config file (default: ${CONFIG_ENV})")
    p.add_argument("--symbol", help="schrodinger, wave, dirac3d, nonelliptic:<m>")
    p.add_argument("--d", type=int, help="spatial dimension")
    p.add_argument("--M", type=int, help="grid points per axis (power of two)")
    p.add_argument("--L-box", dest="L_box", type=float, help="box length")
    p.add_argument("--threads", type=int, help="FFT worker threads (results do not depend on it)")
    p.add_argument("--seed", type=int)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="dispersive-profiles", description=__doc__.split("\n\n")[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("exponents", help="Sobolev and Strichartz exponents")
    _common(p)
    p.add_argument("--s", dest="s_text", help="Sobolev index (exact rationals like 1/2 accepted)")
    p.add_argument("--p", help="time exponent; prints the admissible q")
    p.add_argument("--json", action="store_true", help="print JSON instead of text")

    p = sub.add_parser("propagate", help="evolve the fields of a DFLD file")
    _common(p)
    p.add_argument("--input", required=True)
    p.add_argument("--output", required=True)
    p.add_argument("--t", type=float, nargs="+", required=True, help="times")
    p.add_argument("--csv-dir", dest="csv_dir", help="write |f| slices as CSV")

    p = sub.add_parser("synthesize", help="plant profiles from a JSON spec")
    _common(p)
    p.add_argument("--spec", required=True)
    p.add_argument("--output", required=True, help="DFLD family")
    p.add_argument("--s", type=_sobolev_index, help="Sobolev index (1/4 or 0.25)")
    p.add_argument("--ledger", help="also write the ground-truth ledger as JSON")

    p = sub.add_parser("decompose", help="extract profiles from a DFLD family")
    _common(p)
    p.add_argument("--input", required=True)
    p.add_argument("--s", type=_sobolev_index, help="Sobolev index (1/4 or 0.25)")
    p.add_argument("--delta-s", dest="delta_S", type=lambda v: v if v == "auto" else float(v),
                   help="stopping level of the S-surrogate, or 'auto' (3x the planted noise floor)")
    p.add_argument("--jmax", dest="J_max", type=int)
    p.add_argument("--window-T", dest="T", type=float)
    p.add_argument("--nt", dest="n_t", type=int)
    p.add_argument("--tail-fraction", dest="tail_fraction", type=float)
    p.add_argument("--defect-tol", dest="defect_tol", type=float)
    p.add_argument("--eps-besov", dest="eps_besov", type=float)
    p.add_argument("--full", action="store_true", help="run the scale stage first")
    p.add_argument("--report", help="JSON report path (default: stdout)")
    p.add_argument("--dump-dir", dest="dump_dir", help="write profiles and remainder as DFLD")
    p.add_argument("--csv-dir", dest="csv_dir", help="write ledger and trace CSV files")
    p.add_argument("--figures-dir", dest="figures_dir", help="write PNG figures")

    p = sub.add_parser("verify", help="hypothesis and inequality checks")
    _common(p)
    p.add_argument("--check", default="all",
                   choices=["unitarity", "strichartz", "lqdecay", "weak", "gerard", "pythagorean", "all"])
    p.add_argument("--s", type=_sobolev_index, help="Sobolev index (1/4 or 0.25)")
    p.add_argument("--p", help="time exponent for the Strichartz check (default: diagonal)")
    p.add_argument("--q", help="Lebesgue exponent for the decay check")
    p.add_argument("--width", type=float, help="width of the test gaussian for lqdecay and weak (default: max(4 dx, L/32))")
    p.add_argument("--window-T", dest="T", type=float)
    p.add_argument("--nt", dest="n_t", type=int)
    p.add_argument("--count", type=int, default=20, help="random fields in the unitarity battery")
    p.add_argument("--input", help="DFLD battery instead of random fields")
    p.add_argument("--report", help="verdict JSON path (default: stdout)")
    p.add_argument("--decomposition", help="decomposition report JSON (pythagorean)")
    p.add_argument("--family", help="input family of the decomposition (pythagorean)")
    p.add_argument("--dump-dir", dest="dump_dir", help="profiles and remainder DFLD of the decomposition")
    p.add_argument("--csv-dir", dest="csv_dir")
    p.add_argument("--figures-dir", dest="figures_dir")
    return parser


COMMANDS = {
    "exponents": cmd_exponents,
    "propagate": cmd_propagate,
    "synthesize": cmd_synthesize,
    "decompose": cmd_decompose,
    "verify": cmd_verify,
}

KNOWN_ERRORS = (
    ConfigError,
    SymbolError,
    AdmissibilityError,
    GridError,
    FieldMismatchError,
    AliasingError,
    DFLDError,
    FileNotFoundError,
    ValueError,
)


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "exponents" and args.s_text is not None:
            args.s = float(_parse_number(args.s_text))
        cfg = RunConfig.from_sources(args)
        set_threads(cfg.threads)
        return COMMANDS[args.command](args, cfg)
    except KNOWN_ERRORS as exc:
        print(f"error [{type(exc).__name__}]: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
