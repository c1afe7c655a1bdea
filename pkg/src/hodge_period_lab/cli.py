"""Command-line front end: ``hpl {check,extend,periods,compare,affine,verify}``.

Configuration is a single JSON document.  Recognized keys (all optional
unless a command needs them):

  family          preset name ("elliptic", "abelian-diagonal", "abelian-full",
                  "degenerate") or an object {"weight": n, "tau": M, "kahler": M,
                  "fields": [serialized Beltrami text, ...]}
  grid            list of parameter points, or a string "t1,t2;..."; default [0]
  band            Fourier band K >= 1 used by the solver (default 2)
  tol             solver tolerance (default 1e-10)
  max_iter        solver iteration cap (default 10000)
  step            finite-difference step (default 1e-3)
  allow_boundary  permit grid points outside the admissible radius
  frame, polarization, hodge_numbers, weight
                  explicit input for ``check`` (otherwise the family's base data)
  polarization_sign
                  multiply the polarization by this sign for ``check`` (default 1)

Complex numbers may be given as JSON numbers, [re, im] pairs, or strings
accepted by Python's ``complex``.  Flags override config fields.  Output is
``report.json`` plus ``<command>.csv`` in ``--out``; reruns are byte-identical.
Exit status: 0 when every asserted quantity is within tolerance, 1 otherwise,
2 for usage errors.  ``HPL_THREADS`` caps the worker threads used per grid.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import dolbeault as ops
from . import period_lab as lab
from .errors import HodgeLabError, InvalidFrameError, ShapeError
from .extension import ExtensionProblem, solve_extension
from .hodge_algebra import (
    HodgeFrame,
    HodgeType,
    Polarization,
    check_first_bilinear_relation,
    check_second_bilinear_relation,
)
from .torus import BeltramiDifferential, FourierForm, TorusGeometry
from .verify import run_suite

COMMANDS = ("check", "extend", "periods", "compare", "affine", "verify")
DEFAULTS = {"band": 2, "tol": 1e-10, "max_iter": 10_000, "step": 1e-3, "allow_boundary": False}
COMPARE_TOL = 1e-6
DERIVATIVE_TOL = 1e-6


class UsageError(Exception):
    pass


def fmt(x: float) -> str:
    return f"{float(x):.16e}"


def fmt_complex(z: complex) -> str:
    z = complex(z)
    return f"{fmt(z.real)} {fmt(z.imag)}"


def parse_complex(value) -> complex:
    if isinstance(value, (list, tuple)):
        if len(value) != 2:
            raise UsageError(f"complex pair must have two entries: {value!r}")
        return complex(float(value[0]), float(value[1]))
    if isinstance(value, str):
        return complex(value.replace(" ", ""))
    return complex(value)


def parse_matrix(value) -> np.ndarray:
    try:
        return np.array([[parse_complex(x) for x in row] for row in value], dtype=complex)
    except (TypeError, ValueError) as err:
        raise UsageError(f"bad matrix {value!r}: {err}") from None


def parse_grid(value, n_params: int) -> list[np.ndarray]:
    """Grid from a JSON list or a string: points split by ';', components by ','.

    For one-parameter families a string without ';' lists one point per comma.
    """
    if isinstance(value, str):
        text = value.strip()
        if not text:
            raise UsageError("empty grid")
        if ";" not in text and n_params == 1:
            points = [[tok] for tok in text.split(",")]
        else:
            points = [chunk.split(",") for chunk in text.split(";") if chunk.strip()]
    else:
        points = [p if isinstance(p, (list, tuple)) else [p] for p in value]
    try:
        out = [np.array([parse_complex(x) for x in p], dtype=complex) for p in points]
    except ValueError as err:
        raise UsageError(f"bad grid value: {err}") from None
    for p in out:
        if p.shape != (n_params,):
            raise UsageError(f"grid point {p.tolist()} has {p.size} components, family has {n_params}")
    return out


def load_family(value) -> lab.BeltramiFamily:
    if isinstance(value, str):
        try:
            return lab.preset(value)
        except ValueError as err:
            raise UsageError(str(err)) from None
    if not isinstance(value, dict) or "fields" not in value:
        raise UsageError("family must be a preset name or an object with 'fields'")
    try:
        geom = TorusGeometry(parse_matrix(value["tau"]), parse_matrix(value["kahler"]))
        fields = tuple(BeltramiDifferential.from_text(text, geom) for text in value["fields"])
        return lab.BeltramiFamily(geom, fields, int(value["weight"]), value.get("name", "custom"))
    except (KeyError, ValueError) as err:
        raise UsageError(f"bad family definition: {err}") from None


def _threads() -> int:
    try:
        return max(1, int(os.environ.get("HPL_THREADS", "1")))
    except ValueError:
        return 1


def ordered_map(fn, items):
    """Map with up to ``HPL_THREADS`` workers; results come back in input order."""
    items = list(items)
    workers = min(_threads(), max(1, len(items)))
    if workers == 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def _t_columns(n: int) -> list[str]:
    return [f"t{i + 1}_{part}" for i in range(n) for part in ("re", "im")]


def _t_values(t: np.ndarray) -> list[str]:
    return [fmt(v) for z in t for v in (z.real, z.imag)]


class Context:
    def __init__(self, config: dict, args):
        if not config:
            raise UsageError("config is empty")
        self.config = dict(DEFAULTS)
        self.config.update(config)
        for key in ("band", "tol"):
            val = getattr(args, key, None)
            if val is not None:
                self.config[key] = val
        if getattr(args, "grid", None) is not None:
            self.config["grid"] = args.grid
        if getattr(args, "allow_boundary", False):
            self.config["allow_boundary"] = True
        if int(self.config["band"]) < 1:
            raise UsageError("band must be >= 1")
        self._family = None

    @property
    def family(self) -> lab.BeltramiFamily:
        if self._family is None:
            if "family" not in self.config:
                raise UsageError("config has no 'family'")
            self._family = load_family(self.config["family"])
        return self._family

    def grid(self) -> list[np.ndarray]:
        fam = self.family
        pts = parse_grid(self.config.get("grid", [[0.0] * fam.n_params]), fam.n_params)
        if not self.config["allow_boundary"]:
            r = fam.admissible_radius
            for p in pts:
                if np.linalg.norm(p) >= r:
                    raise UsageError(
                        f"grid point {p.tolist()} is outside the admissible radius {r:.6g} (use --allow-boundary)"
                    )
        return pts

    def normalized(self) -> dict:
        out = {}
        for k, v in sorted(self.config.items()):
            out[k] = v if isinstance(v, (str, int, float, bool, type(None), list, dict)) else str(v)
        return out


# --- commands ---------------------------------------------------------------------------


def cmd_check(ctx: Context):
    cfg = ctx.config
    if "frame" in cfg:
        try:
            ht = HodgeType(int(cfg["weight"]), tuple(int(x) for x in cfg["hodge_numbers"]))
            frame = HodgeFrame(parse_matrix(cfg["frame"]), ht, parse_matrix(cfg["conjugation"]) if "conjugation" in cfg else None)
            pol = Polarization(parse_matrix(cfg["polarization"]) * cfg.get("polarization_sign", 1), ht.weight)
        except (KeyError, ShapeError, ValueError) as err:
            raise UsageError(f"bad check input: {err}") from None
    else:
        fam = ctx.family
        frame = lab.base_frame(fam.geometry, fam.weight)
        pol = lab.base_polarization(fam.geometry, fam.weight)
        pol = Polarization(pol.matrix * cfg.get("polarization_sign", 1), pol.weight)
    if pol.matrix.shape[0] != frame.rows.shape[0]:
        raise UsageError(f"frame dimension {frame.rows.shape[0]} does not match polarization {pol.matrix.shape[0]}")
    tol = float(cfg["tol"])
    first = check_first_bilinear_relation(frame, pol, tol)
    try:
        second = check_second_bilinear_relation(frame, pol, tol)
        note = ""
    except InvalidFrameError as err:
        second, note = False, str(err)
    rows = [["first_bilinear", str(first).lower(), ""], ["second_bilinear", str(second).lower(), note]]
    summary = {"first_bilinear": first, "second_bilinear": second}
    return ["relation", "passed", "note"], rows, summary, first and second


def cmd_extend(ctx: Context):
    fam = ctx.family
    grid = ctx.grid()
    cfg = ctx.config
    geom, n = fam.geometry, fam.weight
    jobs = []
    for t in grid:
        for p in range(n, -1, -1):
            for i, vec in enumerate(ops.primitive_basis(geom, p, n - p)):
                jobs.append((t, p, i, vec))

    def run(job):
        t, p, i, vec = job
        sigma0 = FourierForm.constant(geom, (p, n - p), vec.reshape(ops._dim(geom.dimension, p), -1))
        try:
            sol = solve_extension(ExtensionProblem(sigma0, fam.phi(t), float(cfg["tol"]), int(cfg["max_iter"]), int(cfg["band"])))
        except HodgeLabError as err:
            return t, p, i, None, f"{type(err).__name__}: {err}"
        return t, p, i, sol, "ok"

    header = _t_columns(fam.n_params) + ["p", "q", "basis", "iterations", "fixed_point", "obstruction_partial",
                                          "obstruction_dbar", "d_closed", "truncation", "status"]
    rows, ok, worst = [], True, 0.0
    for t, p, i, sol, status in ordered_map(run, jobs):
        if sol is None:
            ok = False
            rows.append(_t_values(t) + [str(p), str(n - p), str(i), "", "", "", "", "", "", status])
            continue
        r = sol.as_row()
        bound = 1e-8 + sol.truncation_residual
        good = r["fixed_point"] <= float(cfg["tol"]) and max(r["obstruction_partial"], r["obstruction_dbar"], r["d_closed"]) <= bound
        ok &= good
        worst = max(worst, r["obstruction_partial"], r["obstruction_dbar"], r["d_closed"])
        rows.append(_t_values(t) + [str(p), str(n - p), str(i), str(r["iterations"])]
                    + [fmt(r[k]) for k in ("fixed_point", "obstruction_partial", "obstruction_dbar", "d_closed", "truncation")]
                    + [status if good else "residual-exceeded"])
    return header, rows, {"problems": len(jobs), "max_obstruction": worst}, ok


def _block_fields(rows: np.ndarray) -> list[str]:
    return [str(rows.shape[0]), str(rows.shape[1]), " ".join(fmt_complex(z) for z in rows.ravel())]


def cmd_periods(ctx: Context):
    fam = ctx.family

    def run(t):
        try:
            return t, lab.lie_sections(lab.oracle_period(fam, t)), "ok"
        except HodgeLabError as err:
            return t, None, f"{type(err).__name__}: {err}"

    header = _t_columns(fam.n_params) + ["p", "rows", "cols", "entries", "status"]
    rows, ok = [], True
    for t, table, status in ordered_map(run, ctx.grid()):
        if table is None:
            ok = False
            rows.append(_t_values(t) + ["", "", "", "", status])
            continue
        for p, block in enumerate(table.rows):
            rows.append(_t_values(t) + [str(p)] + _block_fields(block) + [status])
    return header, rows, {"points": len(rows), "hodge_numbers": list(fam.hodge_type.hodge_numbers)}, ok


def cmd_compare(ctx: Context):
    fam = ctx.family
    cfg = ctx.config
    h = float(cfg["step"])

    def run(t):
        try:
            diff = lab.compare_sections(fam, t, tol=float(cfg["tol"]), band=int(cfg["band"]))
            deriv = [lab.derivative_relation_residual(fam, t, mu, h) for mu in range(fam.n_params)]
            return t, diff, deriv, "ok"
        except HodgeLabError as err:
            return t, None, None, f"{type(err).__name__}: {err}"

    header = _t_columns(fam.n_params) + ["section_difference"] + [f"derivative_residual_{mu + 1}" for mu in range(fam.n_params)] + ["status"]
    rows, ok, worst = [], True, 0.0
    for t, diff, deriv, status in ordered_map(run, ctx.grid()):
        if diff is None:
            ok = False
            rows.append(_t_values(t) + [""] * (1 + fam.n_params) + [status])
            continue
        good = diff <= COMPARE_TOL and max(deriv, default=0.0) <= DERIVATIVE_TOL
        ok &= good
        worst = max(worst, diff)
        rows.append(_t_values(t) + [fmt(diff)] + [fmt(x) for x in deriv] + [status if good else "residual-exceeded"])
    return header, rows, {"max_section_difference": worst}, ok


def cmd_affine(ctx: Context):
    fam = ctx.family
    h = float(ctx.config["step"])

    def run(t):
        try:
            return t, lab.affine_map(fam, t), lab.affine_jacobian_rank(fam, t, h), "ok"
        except HodgeLabError as err:
            return t, None, None, f"{type(err).__name__}: {err}"

    header = _t_columns(fam.n_params) + ["psi", "jacobian_rank", "n_params", "status"]
    rows, ok, ranks = [], True, []
    for t, psi, rank, status in ordered_map(run, ctx.grid()):
        if psi is None:
            ok = False
            rows.append(_t_values(t) + ["", "", str(fam.n_params), status])
            continue
        ranks.append(rank)
        rows.append(_t_values(t) + [" ".join(fmt_complex(z) for z in psi), str(rank), str(fam.n_params), status])
    return header, rows, {"ranks": ranks, "full_rank": all(r == fam.n_params for r in ranks)}, ok


def cmd_verify(ctx: Context, break_adjoint: bool = False):
    results = run_suite(break_adjoint=break_adjoint, map_fn=ordered_map)
    rows = [[r.name, fmt(r.value), fmt(r.threshold), "pass" if r.passed else "fail"] for r in results]
    failed = [r.name for r in results if not r.passed]
    return ["property", "value", "threshold", "result"], rows, {"properties": len(results), "failed": failed}, not failed


HANDLERS = {
    "check": cmd_check,
    "extend": cmd_extend,
    "periods": cmd_periods,
    "compare": cmd_compare,
    "affine": cmd_affine,
    "verify": cmd_verify,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hpl",
        description="Period maps and Beltrami extensions on flat complex tori.",
        epilog=__doc__.split("\n", 2)[2],
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    parser.add_argument("command", choices=COMMANDS)
    parser.add_argument("--config", required=True, help="JSON configuration file")
    parser.add_argument("--out", default=".", help="output directory (default: current directory)")
    parser.add_argument("--grid", help='parameter grid, e.g. "0.1,0.2" or "0.1,0.2;0.3,0"')
    parser.add_argument("--band", type=int, help=f"Fourier band K (default {DEFAULTS['band']})")
    parser.add_argument("--tol", type=float, help=f"solver tolerance (default {DEFAULTS['tol']})")
    parser.add_argument("--allow-boundary", action="store_true", help="allow grid points beyond the admissible radius")
    parser.add_argument("--break-adjoint", action="store_true", help=argparse.SUPPRESS)
    return parser


def _render_csv(header, rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    return buf.getvalue()


def _print_table(header, rows, stream) -> None:
    widths = [max(len(str(x)) for x in col) for col in zip(header, *rows)] if rows else [len(h) for h in header]
    for row in [header] + rows:
        stream.write("  ".join(str(x).ljust(w) for x, w in zip(row, widths)).rstrip() + "\n")


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        try:
            config = json.loads(Path(args.config).read_text())
        except (OSError, json.JSONDecodeError) as err:
            raise UsageError(f"cannot read config: {err}") from None
        if not isinstance(config, dict):
            raise UsageError("config must be a JSON object")
        ctx = Context(config, args)
        handler = HANDLERS[args.command]
        if args.command == "verify":
            header, rows, summary, ok = handler(ctx, break_adjoint=args.break_adjoint)
        else:
            header, rows, summary, ok = handler(ctx)
    except UsageError as err:
        parser.print_usage(sys.stderr)
        sys.stderr.write(f"hpl: error: {err}\n")
        return 2
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / f"{args.command}.csv").write_text(_render_csv(header, rows))
    report = {"command": args.command, "config": ctx.normalized(), "status": "pass" if ok else "fail", "summary": summary}
    (out / "report.json").write_text(json.dumps(report, indent=2, sort_keys=True) + "\n")
    _print_table(header, rows, sys.stdout)
    return 0 if ok else 1


if __name__ == "__main__":
    sys.exit(main())
