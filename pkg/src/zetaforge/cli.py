"""Command-line front end.

Exit codes: 0 success, 1 malformed input, 2 validation failure,
3 numeric-contract failure. Every run prints one JSON object on stdout.
"""
from __future__ import annotations

import argparse
import cmath
import csv
import io
import json
import math
import os
import re
import sys
import tempfile
import time
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import lerch
from . import transfer as tr
from .parallel import ENV_WORKERS, default_workers, pmap
from .representation import (RepresentationError, evaluate, growth_exponent, has_necm,
                             jordan_structure, rep_from_json, trivial)
from .resonance import (POLE_MASK, Rect, ResonanceError, find_zeros, scan,
                        write_zeros_csv)
from .symbolic import (GroupError, cusped_example, enumerate_classes, funnel, group_from_json,
                       schottky_rank2)
from .words import WordError, format_word
from .zeta import (ZetaError, crosscheck, factorization_check, write_csv,
                   zeta_determinant, zeta_product)

EXIT_OK = 0
EXIT_INPUT = 1
EXIT_VALIDATION = 2
EXIT_NUMERIC = 3

BUILTIN_GROUPS = {"funnel": funnel, "schottky2": schottky_rank2, "cusped": cusped_example}
BUILTIN_PREFIX = "builtin:"

# documented parameter ranges: name -> (lo, hi, lo inclusive, hi inclusive)
RANGES = {
    "degree": (1, 200, True, True),
    "split": (0, 10_000, True, True),
    "tail": (1, tr.MAX_TAIL, True, True),
    "rho": (0.0, 1.0, False, False),
    "lmax": (0.0, 60.0, False, True),
    "tol": (0.0, 1.0, False, True),
    "depth": (1, 8, True, True),
    "workers": (1, 256, True, True),
    "q": (2, 12, True, True),
    "mmax": (16, 100_000, True, True),
    "m": (0, 8, True, True),
    "repeat": (1, 100, True, True),
}
GRID_MAX = 1001


class InputError(Exception):
    """Malformed input; carries a diagnostic record."""

    def __init__(self, msg: str, **where):
        super().__init__(msg)
        self.where = where


class ValidationFailure(Exception):
    def __init__(self, msg: str, report=None):
        super().__init__(msg)
        self.report = report


class NumericFailure(Exception):
    def __init__(self, msg: str, payload=None):
        super().__init__(msg)
        self.payload = payload


@dataclass
class JobConfig:
    command: str
    args: argparse.Namespace
    out: str | None
    workers: int
    artifacts: list = field(default_factory=list)


# ------------------------------------------------------------------ parsing

class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise InputError(message, field="argv")


def parse_complex(text: str) -> complex:
    t = text.strip().replace(" ", "").replace("I", "j").replace("i", "j")
    try:
        z = complex(t)
    except ValueError:
        raise InputError(f"cannot parse complex number {text!r}", field="s") from None
    if not cmath.isfinite(z):
        raise InputError(f"non-finite complex number {text!r}", field="s")
    return z


def parse_s_list(values: Sequence[str] | None) -> list:
    out = []
    for v in values or ():
        out.extend(parse_complex(p) for p in v.split(",") if p.strip())
    return out


def parse_floats(text: str, n: int, name: str) -> list:
    try:
        vals = [float(p) for p in text.split(",")]
    except ValueError:
        raise InputError(f"--{name} expects {n} comma-separated numbers", field=name) from None
    if len(vals) != n or not all(math.isfinite(v) for v in vals):
        raise InputError(f"--{name} expects {n} finite comma-separated numbers", field=name)
    return vals


def parse_grid(text: str) -> tuple:
    try:
        nx, ny = (int(p) for p in text.lower().replace("x", ",").split(","))
    except ValueError:
        raise InputError("--grid expects NX,NY", field="grid") from None
    if not (1 <= nx <= GRID_MAX and 1 <= ny <= GRID_MAX):
        raise InputError(f"--grid sizes must lie in [1, {GRID_MAX}]", field="grid")
    return nx, ny


def parse_hom(text: str) -> dict:
    out = {}
    for part in text.split(","):
        m = re.fullmatch(r"\s*([A-Za-z_]\w*)\s*=\s*(-?\d+)\s*", part)
        if not m:
            raise InputError(f"--hom expects sym=int pairs, got {part!r}", field="hom")
        out[m.group(1)] = int(m.group(2))
    return out


def check_range(name: str, value) -> None:
    if value is None:
        return
    lo, hi, lo_in, hi_in = RANGES[name]
    ok_lo = value >= lo if lo_in else value > lo
    ok_hi = value <= hi if hi_in else value < hi
    if not (ok_lo and ok_hi and math.isfinite(value)):
        lb = "[" if lo_in else "("
        rb = "]" if hi_in else ")"
        raise InputError(f"--{name} = {value} outside {lb}{lo}, {hi}{rb}", field=name)


def _field_line(text: str, name: str) -> int | None:
    m = re.search(r'"' + re.escape(str(name)) + r'"\s*:', text)
    return text.count("\n", 0, m.start()) + 1 if m else None


def _load_json(path: str, kind: str):
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise InputError(f"cannot read {kind} file: {exc.strerror}", file=path) from None
    try:
        return json.loads(text), text
    except json.JSONDecodeError as exc:
        raise InputError(f"invalid JSON: {exc.msg}", file=path, line=exc.lineno,
                         column=exc.colno) from None


def _content_error(path: str, text: str, exc: Exception):
    msg = str(exc)
    where = {"file": path}
    m = re.search(r"'([^']+)'", msg)
    if m:
        where["field"] = m.group(1)
        line = _field_line(text, m.group(1))
        if line is not None:
            where["line"] = line
    return InputError(msg, **where)


def load_group_arg(source: str):
    if source.startswith(BUILTIN_PREFIX):
        name = source[len(BUILTIN_PREFIX):]
        if name not in BUILTIN_GROUPS:
            raise InputError(f"unknown builtin group {name!r}; choose from "
                             f"{sorted(BUILTIN_GROUPS)}", field="group")
        return BUILTIN_GROUPS[name]()
    obj, text = _load_json(source, "group")
    try:
        return group_from_json(obj)
    except (GroupError, WordError, ValueError, TypeError, KeyError) as exc:
        raise _content_error(source, text, exc) from None


def load_rep_arg(source: str | None, symbols: Sequence[str]):
    if source is None or source == BUILTIN_PREFIX + "trivial":
        return trivial(symbols)
    obj, text = _load_json(source, "representation")
    try:
        rep = rep_from_json(obj)
    except (RepresentationError, WordError, ValueError, TypeError) as exc:
        raise _content_error(source, text, exc) from None
    if set(rep.alphabet) != set(symbols):
        raise InputError(f"representation generators {sorted(rep.alphabet)} do not match the "
                         f"group generators {sorted(symbols)}", file=source, field="images")
    return rep


def load_tuple_arg(source: str):
    obj, text = _load_json(source, "tuple")
    try:
        return tr.tuple_from_json(obj)
    except (tr.TransferError, GroupError, WordError, ValueError, TypeError, KeyError) as exc:
        raise _content_error(source, text, exc) from None


# ---------------------------------------------------------------- artifacts

def write_atomic(path: str, data: str) -> None:
    """Write via a temporary file in the target directory plus rename."""
    d = os.path.dirname(os.path.abspath(path))
    os.makedirs(d, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _emit(cfg: JobConfig, name: str, data: str) -> None:
    if cfg.out is None:
        return
    path = os.path.join(cfg.out, name)
    write_atomic(path, data)
    cfg.artifacts.append(path)


def _json_text(obj) -> str:
    return json.dumps(_plain(obj), indent=2, sort_keys=True) + "\n"


def _plain(x):
    """JSON-safe view: complex -> [re, im], non-finite floats -> strings."""
    if isinstance(x, dict):
        return {str(k): _plain(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_plain(v) for v in x]
    if isinstance(x, (complex, np.complexfloating)):
        return [_plain(float(x.real)), _plain(float(x.imag))]
    if isinstance(x, (np.floating, float)):
        x = float(x)
        return x if math.isfinite(x) else ("inf" if x > 0 else "-inf" if x < 0 else "nan")
    if isinstance(x, np.bool_):
        return bool(x)
    if isinstance(x, np.integer):
        return int(x)
    if isinstance(x, np.ndarray):
        return _plain(x.tolist())
    return x


def _csv_text(header: list, rows: list) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


# ----------------------------------------------------------------- commands

def _group_and_tuple(args):
    """Group for the product route and tuple for the determinant route."""
    t = load_tuple_arg(args.tuple) if getattr(args, "tuple", None) else None
    g = load_group_arg(args.group) if args.group or t is None else t.group
    if t is None:
        try:
            t = tr.tuple_from_group(g)
        except (tr.TransferError, GroupError) as exc:
            raise ValidationFailure(f"could not build a structure tuple: {exc}") from None
    return g, t


def _check_tuple(t, args) -> None:
    rep = tr.validate_tuple(t, word_depth=args.depth, rho=args.rho)
    if not rep.ok:
        raise ValidationFailure("structure tuple fails validation: "
                                + ", ".join(rep.failed()), rep.to_json())


def _check_rep(t, rep) -> None:
    ws = t.parabolic_words()
    if ws:
        necm = has_necm(rep, ws)
        if not necm.ok:
            raise ValidationFailure("representation is not NECM at the cusp",
                                    {"moduli": necm.moduli})


def _det_opts(args) -> dict:
    opts = {"rho": args.rho, "tail_len": args.tail}
    if args.split is not None:
        if args.split > args.degree:
            raise InputError("--split may not exceed --degree", field="split")
        opts["M"] = args.split
    return opts


def cmd_validate(cfg: JobConfig) -> dict:
    a = cfg.args
    if a.tuple:
        t = load_tuple_arg(a.tuple)
    elif a.group:
        _, t = _group_and_tuple(a)
    else:
        raise InputError("validate needs --tuple or --group", field="tuple")
    report = tr.validate_tuple(t, word_depth=a.depth, rho=a.rho)
    js = report.to_json()
    _emit(cfg, "validate.json", _json_text(js))
    if not report.ok:
        raise ValidationFailure("structure tuple fails validation: "
                                + ", ".join(report.failed()), js)
    return {"report": js}


def cmd_zeta(cfg: JobConfig) -> dict:
    a = cfg.args
    s_list = parse_s_list(a.s)
    if not s_list:
        raise InputError("zeta needs at least one --s", field="s")
    if a.route == "product":
        g = load_group_arg(a.group or BUILTIN_PREFIX + "schottky2")
        rep = load_rep_arg(a.rep, g.symbols)
        classes = enumerate_classes(g, a.lmax)
        evals = pmap(lambda s: zeta_product(g, rep, s, a.lmax, tol=a.tol, classes=classes),
                     s_list, cfg.workers)
    else:
        if not (a.group or a.tuple):
            a.group = BUILTIN_PREFIX + "schottky2"
        _, t = _group_and_tuple(a)
        rep = load_rep_arg(a.rep, t.group.symbols)
        _check_rep(t, rep)
        opts = _det_opts(a)
        evals = pmap(lambda s: zeta_determinant(t, rep, s, a.degree, **opts), s_list,
                     cfg.workers)
        bad = [e for e in evals if not e.tail <= a.tol]
        if bad:
            raise NumericFailure(f"determinant N-stability {bad[0].tail:.3g} exceeds "
                                 f"{a.tol:.3g}: increase --degree",
                                 [e.to_json() for e in evals])
    buf = io.StringIO()
    write_csv(evals, buf)
    _emit(cfg, "zeta.csv", buf.getvalue())
    rows = [e.to_json() for e in evals]
    _emit(cfg, "zeta.json", _json_text(rows))
    return {"evaluations": rows}


def cmd_det(cfg: JobConfig) -> dict:
    a = cfg.args
    s_list = parse_s_list(a.s)
    if not s_list:
        raise InputError("det needs at least one --s", field="s")
    if not (a.group or a.tuple):
        raise InputError("det needs --tuple or --group", field="tuple")
    _, t = _group_and_tuple(a)
    if a.tuple:
        _check_tuple(t, a)
    rep = load_rep_arg(a.rep, t.group.symbols)
    _check_rep(t, rep)
    opts = _det_opts(a)
    res = pmap(lambda s: tr.continued_det(t, rep, s, a.degree, **opts), s_list, cfg.workers)
    rows, poles = [], []
    for r in res:
        v = r.value if r.value is not None else complex(math.nan, math.nan)
        rows.append([repr(r.s.real), repr(r.s.imag), repr(v.real), repr(v.imag),
                     "pole" if r.pole else "ok", repr(r.remainder), a.degree])
        if r.pole:
            poles.append({"s0": [r.s.real, r.s.imag],
                          "rank_bound": tr.rank_bound_sum(t, rep),
                          "residue_rank": r.rank_bound, "order": r.order,
                          "probe_values": [[e, v.real, v.imag] for e, v in r.probe_values]})
    _emit(cfg, "det.csv", _csv_text(["s_re", "s_im", "value_re", "value_im", "status",
                                     "remainder", "N"], rows))
    _emit(cfg, "poles.json", _json_text(poles))
    return {"values": [r.to_json() for r in res], "poles": poles}


def cmd_crosscheck(cfg: JobConfig) -> dict:
    a = cfg.args
    s_list = parse_s_list(a.s)
    if not s_list:
        raise InputError("crosscheck needs at least one --s", field="s")
    if not (a.group or a.tuple):
        raise InputError("crosscheck needs --group or --tuple", field="group")
    g, t = _group_and_tuple(a)
    if a.tuple:
        _check_tuple(t, a)
    rep = load_rep_arg(a.rep, g.symbols)
    _check_rep(t, rep)
    report = crosscheck(g, t, rep, s_list, a.lmax, a.degree, workers=cfg.workers, tol=a.tol)
    js = report.to_json()
    _emit(cfg, "crosscheck.json", _json_text(js))
    _emit(cfg, "crosscheck.csv", _csv_text(
        ["s_re", "s_im", "discrepancy", "tail", "det_error", "pass"],
        [[repr(r.s.real), repr(r.s.imag), repr(r.discrepancy), repr(r.tail),
          repr(r.det_error), int(r.ok)] for r in report.rows]))
    if not report.ok:
        raise NumericFailure("determinant and Euler product disagree beyond the tail", js)
    return {"report": js}


def cmd_resonances(cfg: JobConfig) -> dict:
    a = cfg.args
    if not (a.group or a.tuple):
        raise InputError("resonances needs --tuple or --group", field="tuple")
    re0, re1, im0, im1 = parse_floats(a.rect, 4, "rect")
    try:
        rect = Rect(re0, re1, im0, im1)
    except ResonanceError as exc:
        raise InputError(str(exc), field="rect") from None
    _, t = _group_and_tuple(a)
    if a.tuple:
        _check_tuple(t, a)
    rep = load_rep_arg(a.rep, t.group.symbols)
    _check_rep(t, rep)
    opts = _det_opts(a)
    out = {"rect": rect.to_json(), "N": a.degree, "tol": a.tol, "pole_mask": POLE_MASK}
    if a.grid:
        sr = scan(t, rep, rect, parse_grid(a.grid), a.degree, workers=cfg.workers, **opts)
        rows = [[repr(float(x)), repr(float(y)), repr(sr.values[i, j].real),
                 repr(sr.values[i, j].imag), sr.status[i, j]]
                for i, y in enumerate(sr.im) for j, x in enumerate(sr.re)]
        _emit(cfg, "scan.csv", _csv_text(["s_re", "s_im", "value_re", "value_im", "status"],
                                         rows))
        out["scan_points"] = len(rows)
    zeros = find_zeros(t, rep, rect, a.degree, tol=a.tol, workers=cfg.workers, **opts)
    buf = io.StringIO()
    write_zeros_csv(zeros, buf)
    _emit(cfg, "zeros.csv", buf.getvalue())
    out["zeros"] = [z.to_json() for z in zeros]
    out["count"] = sum(z.multiplicity for z in zeros)
    _emit(cfg, "resonances.json", _json_text(out))
    return out


def cmd_factor_check(cfg: JobConfig) -> dict:
    a = cfg.args
    s_list = parse_s_list(a.s)
    if not s_list:
        raise InputError("factor-check needs at least one --s", field="s")
    g = load_group_arg(a.group or BUILTIN_PREFIX + "schottky2")
    hom = parse_hom(a.hom) if a.hom else {s: 1 for s in g.symbols}
    if set(hom) != set(g.symbols):
        raise InputError(f"--hom must assign every generator {sorted(g.symbols)}", field="hom")
    try:
        report = factorization_check(g, hom, a.q, s_list, a.lmax)
    except GroupError as exc:
        raise InputError(str(exc), field="hom") from None
    js = report.to_json()
    _emit(cfg, "factor.json", _json_text(js))
    if not report.ok:
        raise NumericFailure("factorization identity not met within the tails", js)
    return {"report": js}


def cmd_rep_info(cfg: JobConfig) -> dict:
    a = cfg.args
    g = load_group_arg(a.group or BUILTIN_PREFIX + "schottky2")
    rep = load_rep_arg(a.rep, g.symbols)
    gens = {}
    for sym in rep.alphabet:
        js = jordan_structure(evaluate(rep, [(sym, 1)]))
        gens[sym] = {"chains": js.chains,
                     "eigenvalues": [complex(lam) for lam, _ in js.blocks],
                     "norm": float(np.linalg.norm(evaluate(rep, [(sym, 1)]), 2))}
    info = {"dim": rep.dim, "generators": gens,
            "relations": [format_word(r) for r in rep.relations]}
    if g.parabolic:
        ws = [[(p, 1)] for p in g.parabolic]
        necm = has_necm(rep, ws)
        cusps = {}
        for w in ws:
            js = jordan_structure(evaluate(rep, w))
            entry = {"jc": js.chains, "d_p": js.max_chain}
            if a.mmax:
                gr = growth_exponent(rep, w, a.mmax)
                entry["growth_slope"] = gr.slope
                entry["growth_sup_ratio"] = gr.max_ratio
            cusps[format_word(w)] = entry
        info.update({"necm": necm.ok, "moduli": necm.moduli, "cusps": cusps,
                     "d0": max(c["d_p"] for c in cusps.values())})
        t = tr.tuple_from_group(g)
        info["rank_bound_sum"] = tr.rank_bound_sum(t, rep)
        info["pole_candidates"] = tr.pole_candidates(t, rep, -2.0)
    _emit(cfg, "rep.json", _json_text(info))
    return {"info": info}


def cmd_lerch(cfg: JobConfig) -> dict:
    a = cfg.args
    s = parse_complex(a.s[0] if a.s else "2")
    lam = parse_complex(a.lam)
    w = parse_complex(a.w)
    try:
        v = lerch.phi(s, lam, w, a.m)
    except lerch.LerchError as exc:
        raise InputError(str(exc), field="w") from None
    out = {"s": s, "lam": lam, "w": w, "m": a.m, "pole": v.pole}
    if v.pole:
        out["residue"] = lerch.residue_at_pole(a.m, round(s.real), w)
    else:
        out.update({"value": v.value, "error": v.error})
    _emit(cfg, "lerch.json", _json_text(out))
    return {"result": _plain(out)}


def cmd_bench(cfg: JobConfig) -> dict:
    """Wall time per stage; numeric outputs go to a separate deterministic CSV."""
    a = cfg.args
    g = load_group_arg(a.group or BUILTIN_PREFIX + "funnel")
    rep = load_rep_arg(a.rep, g.symbols)
    s = parse_s_list(a.s)[0] if a.s else complex(2.0)
    rect = Rect(*parse_floats(a.rect or "0.5,3,-2,2", 4, "rect"))
    grid = parse_grid(a.grid or "21,21")
    opts = _det_opts(a)
    timings = []

    def stage(name, fn):
        best, val = math.inf, None
        for _ in range(a.repeat):
            t0 = time.perf_counter()
            val = fn()
            best = min(best, time.perf_counter() - t0)
        timings.append([name, f"{best:.6f}"])
        return val

    classes = stage("enumeration", lambda: enumerate_classes(g, a.lmax))
    t = tr.tuple_from_group(g)
    m = stage("assembly", lambda: tr.assemble(t, rep, s, a.degree, **_assemble_opts(opts)))
    det = stage("determinant", lambda: tr.fredholm_det(m))
    sr = stage("scan", lambda: scan(t, rep, rect, grid, a.degree, workers=cfg.workers, **opts))
    values = [["classes", len(classes), "", ""], ["determinant", "", repr(det.real),
                                                  repr(det.imag)]]
    for i, y in enumerate(sr.im):
        for j, x in enumerate(sr.re):
            v = sr.values[i, j]
            values.append(["scan", f"{x!r}:{y!r}", repr(v.real), repr(v.imag)])
    _emit(cfg, "bench.csv", _csv_text(["stage", "seconds"], timings))
    _emit(cfg, "bench_values.csv", _csv_text(["quantity", "point", "re", "im"], values))
    return {"timings": {k: float(v) for k, v in timings}, "grid": list(grid),
            "N": a.degree, "workers": cfg.workers, "determinant": det}


def _assemble_opts(opts: dict) -> dict:
    return {k: v for k, v in opts.items() if k in ("rho", "M", "tail_len")}


COMMANDS = {
    "validate": cmd_validate, "zeta": cmd_zeta, "det": cmd_det, "crosscheck": cmd_crosscheck,
    "resonances": cmd_resonances, "factor-check": cmd_factor_check, "rep-info": cmd_rep_info,
    "lerch": cmd_lerch, "bench": cmd_bench,
}


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="zetaforge", description="Twisted Selberg zeta functions by Euler "
                "products and transfer-operator determinants.")
    sub = p.add_subparsers(dest="command", parser_class=_Parser)

    def common(sp):
        sp.add_argument("--out", help="artifact directory")
        sp.add_argument("--workers", type=int, default=None,
                        help="worker threads (default $ZETAFORGE_WORKERS or 1)")
        sp.add_argument("--group", help="group JSON file or builtin:{funnel,schottky2,cusped}")
        sp.add_argument("--rep", help="representation JSON (default: trivial)")
        sp.add_argument("--tuple", help="structure tuple JSON")
        sp.add_argument("--s", action="append", help="complex point(s), e.g. 3+2i; repeatable")
        sp.add_argument("--degree", type=int, default=30, help="polynomial degree N [1, 200]")
        sp.add_argument("--split", type=int, default=None,
                        help="exact-term split M for parabolic blocks [0, N]")
        sp.add_argument("--tail", type=int, default=tr.DEFAULT_TAIL,
                        help=f"direct tail length L [1, {tr.MAX_TAIL}]")
        sp.add_argument("--rho", type=float, default=tr.DEFAULT_RHO,
                        help="collocation radius fraction (0, 1)")
        sp.add_argument("--lmax", type=float, default=12.0, help="length cutoff (0, 60]")
        sp.add_argument("--tol", type=float, default=1e-8, help="tolerance (0, 1]")
        sp.add_argument("--depth", type=int, default=4, help="validator word depth [1, 8]")
        return sp

    for name, helptext in [("validate", "check a structure tuple"),
                           ("zeta", "evaluate Z by either route"),
                           ("det", "continued Fredholm determinant and pole reports"),
                           ("crosscheck", "determinant against Euler product"),
                           ("factor-check", "Venkov-Zograf factorization checks"),
                           ("rep-info", "Jordan and growth data of a representation")]:
        sp = common(sub.add_parser(name, help=helptext))
        if name == "zeta":
            sp.add_argument("--route", choices=("product", "determinant"), default="product")
        if name == "factor-check":
            sp.add_argument("--hom", help="homomorphism to Z/q as sym=int,... (default all 1)")
            sp.add_argument("--q", type=int, default=2, help="quotient order [2, 12]")
        if name == "rep-info":
            sp.add_argument("--mmax", type=int, default=None,
                            help="growth test range [16, 100000]")
    sp = common(sub.add_parser("resonances", help="zeros of the determinant in a rectangle"))
    sp.add_argument("--rect", required=True, help="RE0,RE1,IM0,IM1")
    sp.add_argument("--grid", help="optional scan grid NX,NY")
    sp = common(sub.add_parser("lerch", help="spot evaluation of the Lerch transcendent"))
    sp.add_argument("--lam", default="1", help="lambda")
    sp.add_argument("--w", default="1", help="shift w")
    sp.add_argument("--m", type=int, default=0, help="binomial index m [0, 8]")
    sp = common(sub.add_parser("bench", help="stage timings"))
    sp.add_argument("--rect", help="scan rectangle RE0,RE1,IM0,IM1 (default 0.5,3,-2,2)")
    sp.add_argument("--grid", help="scan grid NX,NY (default 21,21)")
    sp.add_argument("--repeat", type=int, default=1, help="best-of repeats [1, 100]")
    return p


def _validate_ranges(a) -> None:
    for name in ("degree", "split", "tail", "rho", "lmax", "tol", "depth", "workers"):
        check_range(name, getattr(a, name, None))
    for name in ("q", "mmax", "m", "repeat"):
        if hasattr(a, name):
            check_range(name, getattr(a, name))


def _env_workers() -> int:
    raw = os.environ.get(ENV_WORKERS)
    if raw is None:
        return default_workers()
    try:
        return int(raw)
    except ValueError:
        raise InputError(f"{ENV_WORKERS}={raw!r} is not an integer", field="workers") from None


VALUE_FLAGS = ("--s", "--rect", "--lam", "--w", "--hom")


def _join_values(argv: Sequence[str]) -> list:
    """Attach values such as '-1,0,-2,2' to their flag before argparse sees them."""
    out, it = [], iter(argv)
    for tok in it:
        if tok in VALUE_FLAGS:
            nxt = next(it, None)
            out.append(tok if nxt is None else f"{tok}={nxt}")
        else:
            out.append(tok)
    return out


def run(argv: Sequence[str] | None = None, stdout=None) -> int:
    """Execute one subcommand; returns the exit code."""
    stdout = stdout or sys.stdout
    summary: dict = {}
    code = EXIT_OK
    try:
        argv = sys.argv[1:] if argv is None else list(argv)
        args = build_parser().parse_args(_join_values(argv))
        if args.command is None:
            raise InputError("missing subcommand; choose from " + ", ".join(COMMANDS),
                             field="argv")
        summary["command"] = args.command
        if args.workers is None:
            args.workers = _env_workers()
        _validate_ranges(args)
        cfg = JobConfig(args.command, args, args.out, args.workers)
        try:
            summary.update(COMMANDS[args.command](cfg))
        finally:
            summary["artifacts"] = cfg.artifacts
        summary["status"] = "ok"
    except InputError as exc:
        code = EXIT_INPUT
        summary.update({"status": "malformed-input", "error": str(exc), **exc.where})
    except ValidationFailure as exc:
        code = EXIT_VALIDATION
        summary.update({"status": "validation-failed", "error": str(exc)})
        if exc.report is not None:
            summary["report"] = exc.report
    except (NumericFailure, ZetaError, tr.TransferError, ResonanceError,
            lerch.LerchError) as exc:
        code = EXIT_NUMERIC
        summary.update({"status": "numeric-failure", "error": str(exc)})
        payload = getattr(exc, "payload", None)
        if payload is not None:
            summary["report"] = payload
        contour = getattr(exc, "contour", None)
        if contour:
            summary["contour"] = [complex(z) for z in contour[-16:]]
    summary["exit_code"] = code
    stdout.write(json.dumps(_plain(summary), sort_keys=True, ensure_ascii=False) + "\n")
    if code != EXIT_OK:
        sys.stderr.write(f"zetaforge: {summary.get('error')}\n")
    return code


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
