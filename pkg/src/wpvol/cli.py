"""Command-line interface.

Exit codes: 0 success, 1 verification failure (or corrupt cache),
2 domain error, 64 usage error.
"""
from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from dataclasses import dataclass, replace
from itertools import product

from . import __version__
from .asymptotics import verify_first_order
from .errors import CacheFormatError, DomainError
from .exact import B0, DEFAULT_PRECISION, MIN_PRECISION, eval_real, hyperbolic_w_sum
from .intersection import (
    bracket,
    canonical_key,
    default_store,
    reserve_genus,
    store_dump,
    store_load,
    store_verify,
    verify_recursion_I,
    verify_recursion_II,
)
from .volumes import (
    build_table,
    ratio_np1,
    sinh_bound_check,
    table_export,
    verify_pde1,
    verify_pde2,
    volume,
    volume_polynomial,
)

EXIT_OK = 0
EXIT_FAIL = 1
EXIT_DOMAIN = 2
EXIT_USAGE = 64

ENV_CACHE = "WPVOL_CACHE"
FORMATS = ("text", "json", "csv")


class UsageError(Exception):
    pass


@dataclass(frozen=True)
class Config:
    precision_bits: int = DEFAULT_PRECISION
    cache_path: str | None = None
    max_genus: int = 40
    thread_count: int = 1  # accepted for scripts; computation is single-threaded
    output_format: str = "text"

    def __post_init__(self):
        if self.max_genus < 1:
            raise UsageError("max_genus must be >= 1")
        if self.precision_bits < MIN_PRECISION:
            raise UsageError(f"precision_bits must be >= {MIN_PRECISION}")
        if self.thread_count < 1:
            raise UsageError("thread_count must be >= 1")
        if self.output_format not in FORMATS:
            raise UsageError(f"output_format must be one of {', '.join(FORMATS)}")


_CONFIG_KEYS = {
    "precision_bits": int,
    "cache_path": str,
    "max_genus": int,
    "thread_count": int,
    "output_format": str,
}


def read_config(path: str) -> dict:
    """``key = value`` lines; '#' starts a comment; values may be quoted."""
    out = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise UsageError(f"{path}:{lineno}: expected key = value")
            key, value = (x.strip() for x in line.split("=", 1))
            if key not in _CONFIG_KEYS:
                raise UsageError(f"{path}:{lineno}: unknown key {key!r}")
            if len(value) >= 2 and value[0] == value[-1] and value[0] in "\"'":
                value = value[1:-1]
            try:
                out[key] = _CONFIG_KEYS[key](value)
            except ValueError:
                raise UsageError(f"{path}:{lineno}: bad value for {key}") from None
    return out


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _int_list(text: str) -> tuple:
    try:
        return tuple(int(x) for x in text.split(",") if x.strip() != "")
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _g_range(text: str) -> tuple:
    try:
        a, b = text.split(":")
        return int(a), int(b)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a range like 12:20, got {text!r}") from None


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="wpvol", description="Exact Weil-Petersson volumes and intersection numbers.")
    p.add_argument("--version", action="version", version=f"wpvol {__version__}")
    p.add_argument("--config", help="key = value configuration file")
    p.add_argument("--cache", help=f"cache file (overrides ${ENV_CACHE})")
    p.add_argument("--precision", type=int, dest="precision_bits", help="working precision in bits")
    p.add_argument("--max-genus", type=int, dest="max_genus", help="refuse genera above this")
    p.add_argument("--threads", type=int, dest="thread_count")
    p.add_argument("--format", choices=FORMATS, dest="output_format")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    b = sub.add_parser("bracket", help="one bracket [tau_d]_g")
    b.add_argument("-g", type=int, required=True)
    b.add_argument("-d", type=_int_list, required=True, help="indices, e.g. 1,0,0")
    b.add_argument("--numeric", action="store_true")

    v = sub.add_parser("volume", help="V_{g,n}")
    v.add_argument("-g", type=int, required=True)
    v.add_argument("-n", type=int, required=True)
    v.add_argument("--numeric", action="store_true")

    pol = sub.add_parser("polynomial", help="coefficients of V_{g,n}(2L)")
    pol.add_argument("-g", type=int, required=True)
    pol.add_argument("-n", type=int, required=True)

    t = sub.add_parser("table", help="V_{g,n} over a range")
    t.add_argument("-gmax", type=int, required=True)
    t.add_argument("-gmin", type=int, default=0)
    t.add_argument("-n", type=_int_list, default=(0, 1, 2), help="comma-separated n values")
    t.add_argument("--decimal", action="store_true", help="decimal values instead of exact text")
    t.add_argument("-o", "--output")

    ver = sub.add_parser("verify", help="identity suites")
    ver.add_argument("suite", choices=("recursions", "bounds", "pdes", "sinh", "all"))
    ver.add_argument("-gmax", type=int, default=4)
    ver.add_argument("-nmax", type=int, default=4)
    ver.add_argument(
        "--assert-pde2",
        action="store_true",
        help="count the second PDE (as written, b_j = L_j) toward the exit status",
    )

    ex = sub.add_parser("extrapolate", help="fit large-genus coefficients")
    ex.add_argument("target", choices=("e1", "h1", "b1", "c1", "zograf"))
    ex.add_argument("-n", type=int, required=True)
    ex.add_argument("-d", type=_int_list)
    ex.add_argument("-grange", type=_g_range, default=(12, 20))
    ex.add_argument("-order", type=int, default=3)
    ex.add_argument("--check", action="store_true", help="exit 1 when outside tolerance")
    ex.add_argument("--plot-csv", help="write g,value,fitted columns here")

    c = sub.add_parser("cache", help="cache maintenance")
    c.add_argument("action", choices=("stats", "compact", "verify"))
    c.add_argument("path", nargs="?")
    return p


# ---------------------------------------------------------------------------
# commands


def _guard_genus(cfg: Config, g: int):
    if g > cfg.max_genus:
        raise DomainError(f"g = {g} exceeds max_genus = {cfg.max_genus}")


def _emit(out, cfg: Config, text: str, payload: dict, rows: list | None = None, header=None):
    if cfg.output_format == "json":
        out.write(json.dumps(payload, ensure_ascii=False) + "\n")
    elif cfg.output_format == "csv" and rows is not None:
        w = csv.writer(out, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)
    else:
        out.write(text + "\n")


def cmd_bracket(args, cfg, out) -> int:
    _guard_genus(cfg, args.g)
    canonical_key(args.g, args.d)
    val = bracket(args.g, args.d)
    payload = {"g": args.g, "d": list(args.d), "value": val.to_text()}
    text = val.to_text()
    if args.numeric:
        num = eval_real(val, cfg.precision_bits).to_decimal(30)
        payload["numeric"] = num
        text += f"  ({num})"
    _emit(out, cfg, text, payload, [[args.g, " ".join(map(str, args.d)), val.to_text()]], ["g", "d", "value"])
    return EXIT_OK


def cmd_volume(args, cfg, out) -> int:
    _guard_genus(cfg, args.g)
    val = volume(args.g, args.n)
    payload = {"g": args.g, "n": args.n, "value": val.to_text()}
    text = val.to_text()
    if args.numeric:
        num = eval_real(val, cfg.precision_bits).to_decimal(30)
        payload["numeric"] = num
        text += f"  ({num})"
    _emit(out, cfg, text, payload, [[args.g, args.n, val.to_text()]], ["g", "n", "value"])
    return EXIT_OK


def cmd_polynomial(args, cfg, out) -> int:
    _guard_genus(cfg, args.g)
    poly = volume_polynomial(args.g, args.n)
    rows = [[" ".join(map(str, d)), c.to_text()] for d, c in poly.coefficients()]
    payload = {
        "g": args.g,
        "n": args.n,
        "coefficients": [{"d": [int(x) for x in r[0].split()], "value": r[1]} for r in rows],
    }
    text = "\n".join(f"{r[0]}\t{r[1]}" for r in rows)
    _emit(out, cfg, text, payload, rows, ["d", "value"])
    return EXIT_OK


def cmd_table(args, cfg, out) -> int:
    _guard_genus(cfg, args.gmax)
    if args.gmin < 0 or args.gmin > args.gmax:
        raise DomainError("need 0 <= gmin <= gmax")
    if any(n < 0 for n in args.n):
        raise DomainError("n values must be nonnegative")
    reserve_genus(args.gmax)
    table = build_table(range(args.gmin, args.gmax + 1), args.n)
    fmt = "json" if cfg.output_format == "json" else "csv"
    body = table_export(table, fmt, decimal=args.decimal)
    if args.output:
        with open(args.output, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(body)
    else:
        out.write(body)
    return EXIT_OK


def _monotone_failures(gmax: int, nmax: int) -> list:
    """Keys where raising one index increases the bracket."""
    bad = []
    for g in range(gmax + 1):
        for n in range(1, nmax + 1):
            if 2 * g - 2 + n <= 0:
                continue
            top = 3 * g - 3 + n
            for d in product(range(top + 1), repeat=n):
                if sum(d) >= top:
                    continue
                here = eval_real(bracket(g, d))
                for i in range(n):
                    up = list(d)
                    up[i] += 1
                    if eval_real(bracket(g, up)) > here:
                        bad.append((g, d, i))
    return bad


def _suite(name: str, args, cfg) -> list:
    """List of (label, passed, counted) for one suite."""
    res = []
    if name == "recursions":
        for g in range(args.gmax + 1):
            for n in range(0, args.nmax + 1):
                top = 3 * g - 3 + n
                if n >= 1 and 2 * g - 2 + n > 0:
                    for d in product(range(top + 1), repeat=n):
                        if list(d) == sorted(d, reverse=True) and sum(d) <= top:
                            r = verify_recursion_II(g, d)
                            res.append((r.summary(), r.passed, True))
                # the insertion (0, 1) adds two points, so the key has n + 2
                if 2 * g + n > 0 and n + 2 <= args.nmax:
                    top1 = 3 * g - 1 + n
                    for d in product(range(top1 + 1), repeat=n):
                        if list(d) == sorted(d, reverse=True) and sum(d) + 1 <= top1:
                            r = verify_recursion_I(g, d)
                            res.append((r.summary(), r.passed, True))
    elif name == "bounds":
        b0 = eval_real(B0, cfg.precision_bits)
        b1 = hyperbolic_w_sum(cfg.precision_bits)
        for g in range(args.gmax + 1):
            for n in range(args.nmax + 1):
                if 2 * g - 2 + n <= 0:
                    continue
                r = eval_real(ratio_np1(g, n), cfg.precision_bits)
                ok = b0 < r < b1
                res.append((f"{'PASS' if ok else 'FAIL'} ratio-bound (g={g}, n={n}) {r.to_decimal(12)}", ok, True))
        bad = _monotone_failures(min(args.gmax, 4), min(args.nmax, 3))
        res.append((f"{'PASS' if not bad else 'FAIL'} monotonicity g<={min(args.gmax, 4)} n<={min(args.nmax, 3)}"
                    + (f" first failure {bad[0]}" if bad else ""), not bad, True))
    elif name == "pdes":
        for g in range(args.gmax + 1):
            for n in range(0, 2 * args.gmax + 3):
                if 2 * g - 2 + n <= 0 or 2 * g + n > 2 * args.gmax + 2:
                    continue
                r1 = verify_pde1(g, n)
                res.append((r1.summary(), r1.passed, True))
                r2 = verify_pde2(g, n)
                tag = "" if args.assert_pde2 else "INFO "
                res.append((tag + r2.summary(), r2.passed, args.assert_pde2))
                if not r2.passed:
                    r3 = verify_pde2(g, n, sign=-1)
                    res.append(("INFO " + r3.summary(), r3.passed, False))
    elif name == "sinh":
        for g in range(args.gmax + 1):
            for n in range(1, min(args.nmax, 3) + 1):
                if 2 * g - 2 + n <= 0:
                    continue
                fails = [
                    b for b in product((0, 1, 2, 4), repeat=n)
                    if not sinh_bound_check(g, n, b, cfg.precision_bits).upper_ok
                ]
                ok = not fails
                res.append((f"{'PASS' if ok else 'FAIL'} sinh-upper (g={g}, n={n})"
                            + (f" first failure b={fails[0]}" if fails else ""), ok, True))
    return res


def cmd_verify(args, cfg, out) -> int:
    _guard_genus(cfg, args.gmax)
    suites = ("recursions", "bounds", "pdes", "sinh") if args.suite == "all" else (args.suite,)
    results = []
    for s in suites:
        results.extend((s,) + r for r in _suite(s, args, cfg))
    failures = sum(1 for _, _, ok, counted in results if counted and not ok)
    counted = sum(1 for *_, c in results if c)
    if cfg.output_format == "json":
        payload = {
            "suite": args.suite,
            "checks": [{"suite": s, "line": t, "passed": ok, "counted": c} for s, t, ok, c in results],
            "counted": counted,
            "failures": failures,
        }
        out.write(json.dumps(payload) + "\n")
    else:
        for _, text, _, _ in results:
            out.write(text + "\n")
        out.write(f"{'PASS' if not failures else 'FAIL'}: {counted} checks, {failures} failures\n")
    return EXIT_FAIL if failures else EXIT_OK


def cmd_extrapolate(args, cfg, out) -> int:
    lo, hi = args.grange
    _guard_genus(cfg, hi + 1)
    if args.target == "e1" and args.d is None:
        raise UsageError("e1 needs -d")
    if args.d is not None and len(args.d) != args.n:
        raise UsageError(f"-d has {len(args.d)} entries but -n is {args.n}")
    rep = verify_first_order(args.target, args.n, args.d, (lo, hi), args.order, cfg.precision_bits)
    out.write(rep.to_json() + "\n")
    if args.plot_csv:
        _plot_csv(args.plot_csv, rep, cfg)
    if args.check and not rep.passed:
        return EXIT_FAIL
    return EXIT_OK


def _plot_csv(path, rep, cfg):
    from .asymptotics import _samples

    samples = _samples(rep.target, rep.n, rep.d, range(rep.g_range[0], rep.g_range[1] + 1), cfg.precision_bits)
    coeffs = rep.fitted
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["g", "value", "fitted"])
        for g, y in samples:
            fit = sum((c / g**i for i, c in enumerate(coeffs)), eval_real(0, cfg.precision_bits))
            w.writerow([g, y.to_decimal(20), fit.to_decimal(20)])


def cmd_cache(args, cfg, out) -> int:
    path = args.path or cfg.cache_path
    if not path:
        raise UsageError(f"no cache path: pass one, use --cache, or set ${ENV_CACHE}")
    if args.action == "stats":
        if not os.path.exists(path):
            out.write(json.dumps({"path": path, "entries": 0}) + "\n")
            return EXIT_OK
        store = store_load(path)
        genera = sorted({k[0] for k, _ in store.items()})
        payload = {
            "path": path,
            "entries": len(store),
            "max_genus": genera[-1] if genera else None,
            "bytes": os.path.getsize(path),
        }
        out.write(json.dumps(payload) + "\n")
        return EXIT_OK
    if args.action == "compact":
        if not os.path.exists(path):
            raise DomainError(f"no cache file at {path}")
        store_dump(path, store_load(path))
        out.write(f"compacted {path}\n")
        return EXIT_OK
    n, err = store_verify(path)
    if err is not None:
        out.write(f"FAIL {path}: {err}\n")
        return EXIT_FAIL
    out.write(f"PASS {path}: {n} entries\n")
    return EXIT_OK


_COMMANDS = {
    "bracket": cmd_bracket,
    "volume": cmd_volume,
    "polynomial": cmd_polynomial,
    "table": cmd_table,
    "verify": cmd_verify,
    "extrapolate": cmd_extrapolate,
    "cache": cmd_cache,
}


def _make_config(args) -> Config:
    base = {}
    if args.config:
        base.update(read_config(args.config))
    env = os.environ.get(ENV_CACHE)
    if env and "cache_path" not in base:
        base["cache_path"] = env
    for key in _CONFIG_KEYS:
        if key == "cache_path":
            continue
        v = getattr(args, key, None)
        if v is not None:
            base[key] = v
    if args.cache:
        base["cache_path"] = args.cache
    return replace(Config(), **base)


def main(argv=None, out=None) -> int:
    out = out if out is not None else sys.stdout
    err = sys.stderr
    try:
        args = build_parser().parse_args(argv)
        cfg = _make_config(args)
    except UsageError as exc:
        err.write(f"wpvol: usage error: {exc}\n")
        return EXIT_USAGE
    except OSError as exc:
        err.write(f"wpvol: {exc}\n")
        return EXIT_USAGE

    store = default_store()
    use_cache = cfg.cache_path and args.command != "cache"
    try:
        if use_cache and os.path.exists(cfg.cache_path):
            store_load(cfg.cache_path, into=store)
        code = _COMMANDS[args.command](args, cfg, out)
        if use_cache and store.dirty:
            store_dump(cfg.cache_path, store)
        return code
    except UsageError as exc:
        err.write(f"wpvol: usage error: {exc}\n")
        return EXIT_USAGE
    except CacheFormatError as exc:
        err.write(f"wpvol: corrupt cache: {exc}\n")
        return EXIT_FAIL
    except DomainError as exc:
        err.write(f"wpvol: {exc}\n")
        return EXIT_DOMAIN


def entry() -> None:  # console script
    sys.exit(main())
