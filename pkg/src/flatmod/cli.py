"""Command-line front end.

Exit codes: 0 success, 1 engine error (a JSON error document is printed),
2 usage error.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from dataclasses import dataclass, field
from fractions import Fraction

from . import lie_core, mc, series
from .errors import FlatmodError, UsageError
from .lie_core import HolonomySpec, RootSystem, Weight
from .polynomial import InvariantPolynomial
from .series import SurfaceTopology

COMMANDS = ("volume", "intersect", "series", "mc-check", "lattice", "fs", "group-info")

DEFAULT_SAMPLES = 100_000
DEFAULT_SEED = 0
DEFAULT_MC_T = 1.0
DEFAULT_MAX_CASIMIR = Fraction(2)


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


@dataclass
class Request:
    command: str
    group: str
    rs: RootSystem | None = None
    topology: SurfaceTopology | None = None
    polynomial: InvariantPolynomial | None = None
    t: float | None = None
    t_schedule: list[float] | None = None
    cutoff: Fraction | None = None
    seed: int = DEFAULT_SEED
    samples: int = DEFAULT_SAMPLES
    fmt: str = "json"
    pi1_order: int = 1
    workers: int = 1
    max_casimir: Fraction = DEFAULT_MAX_CASIMIR
    complex_path: str | None = None
    convention: str = series.CLOSED_FORM
    c_to_u: bool = False
    extra: dict = field(default_factory=dict)


def _build_parser() -> _Parser:
    p = _Parser(prog="flatmod", description="Volumes and intersection numbers of moduli of flat connections.")
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("--group", default="A1", help="A1..A7, B2..B4, C2..C4, D4, G2")
    p.add_argument("--genus", type=int, default=None, help="g (orientable) or k (non-orientable)")
    p.add_argument("--center", default="e", help="'e' or a center index")
    p.add_argument("--boundary", action="append", default=[], help="boundary holonomy 'u@x1,x2' (repeatable)")
    p.add_argument("--nonorientable", choices=("i", "ii"), default=None)
    p.add_argument("--convention", choices=(series.CLOSED_FORM, series.HOLONOMY), default=None)
    p.add_argument("--poly", default="1")
    p.add_argument("--t", type=float, default=None)
    p.add_argument("--t-schedule", default=None, help="comma-separated decreasing t values")
    p.add_argument("--cutoff", default=None, help="Casimir cutoff (rational)")
    p.add_argument("--c-to-u", action="store_true", help="take the c -> u limit instead of the central series")
    p.add_argument("--seed", type=int, default=DEFAULT_SEED)
    p.add_argument("--samples", type=int, default=DEFAULT_SAMPLES)
    p.add_argument("--format", dest="fmt", choices=("json", "csv"), default="json")
    p.add_argument("--pi1-order", type=int, default=1)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--max-casimir", default=str(DEFAULT_MAX_CASIMIR))
    p.add_argument("--complex", dest="complex_path", default=None, help="lattice complex JSON file")
    return p


def _fraction(text: str, flag: str) -> Fraction:
    try:
        value = Fraction(text)
    except (ValueError, ZeroDivisionError):
        raise UsageError(f"{flag}: cannot parse {text!r}") from None
    if value < 0:
        raise UsageError(f"{flag} must be >= 0")
    return value


def _center_index(text: str, rs: RootSystem) -> int:
    if text.strip() == "e":
        return 0
    try:
        u = int(text)
    except ValueError:
        raise UsageError(f"--center: expected 'e' or an index, got {text!r}") from None
    if not 0 <= u < rs.center_order:
        raise UsageError(f"--center: {rs.name} has {rs.center_order} central elements")
    return u


def parse_request(argv) -> Request:
    args = _build_parser().parse_args(list(argv))
    try:
        rs = lie_core.build_root_system(*lie_core.parse_group(args.group))
    except FlatmodError as exc:
        raise UsageError(f"--group: {exc}") from None
    req = Request(command=args.command, group=rs.name, rs=rs, fmt=args.fmt, seed=args.seed)
    if args.samples < 2:
        raise UsageError("--samples must be >= 2")
    if args.workers < 1:
        raise UsageError("--workers must be >= 1")
    if args.pi1_order < 1:
        raise UsageError("--pi1-order must be >= 1")
    req.samples, req.workers, req.pi1_order = args.samples, args.workers, args.pi1_order
    req.max_casimir = _fraction(args.max_casimir, "--max-casimir")
    req.cutoff = None if args.cutoff is None else _fraction(args.cutoff, "--cutoff")
    req.c_to_u = args.c_to_u
    req.complex_path = args.complex_path
    if args.t is not None and args.t < 0:
        raise UsageError("--t must be >= 0")
    req.t = args.t
    if args.t_schedule:
        try:
            req.t_schedule = [float(x) for x in args.t_schedule.split(",")]
        except ValueError:
            raise UsageError(f"--t-schedule: cannot parse {args.t_schedule!r}") from None
    req.polynomial = InvariantPolynomial.parse(args.poly, rs.rank)

    if args.command in ("volume", "intersect", "series", "mc-check"):
        if args.genus is None:
            raise UsageError(f"{args.command} requires --genus")
        if args.genus < 0:
            raise UsageError("--genus must be >= 0")
        u = _center_index(args.center, rs)
        if args.nonorientable:
            if args.boundary:
                raise UsageError("--boundary cannot be combined with --nonorientable")
            if args.genus < 1:
                raise UsageError("--genus must be >= 1 for non-orientable surfaces")
            req.topology = SurfaceTopology.nonorientable(args.genus, args.nonorientable, u)
        elif args.boundary:
            try:
                specs = tuple(HolonomySpec.parse(b, rs.rank) for b in args.boundary)
            except ValueError as exc:
                raise UsageError(f"--boundary: {exc}") from None
            for spec in specs:
                _center_index(str(spec.central_part), rs)
            req.topology = SurfaceTopology(args.genus, specs)
        else:
            req.topology = SurfaceTopology.closed(args.genus, u, rs.rank)
        req.extra["center"] = u
    default_conv = series.HOLONOMY if args.command == "mc-check" else series.CLOSED_FORM
    req.convention = args.convention or default_conv
    if args.command == "mc-check" and req.convention != series.HOLONOMY:
        raise UsageError("mc-check compares against the holonomy convention only")
    if args.command == "lattice" and not args.complex_path:
        raise UsageError("lattice requires --complex FILE")
    if args.command in ("mc-check", "lattice") and req.t is None:
        req.t = DEFAULT_MC_T
    if args.command in ("mc-check", "lattice") and req.t <= 0:
        raise UsageError("--t must be > 0 for Monte Carlo")
    if args.command == "intersect" and args.poly == "1":
        raise UsageError("intersect requires --poly")
    return req


# --------------------------------------------------------------------------
# commands


def _limit(req: Request) -> series.SeriesResult:
    if req.c_to_u:
        topo = req.topology
        if not topo.orientable or topo.s != 1 or not topo.boundaries[0].is_central:
            raise UsageError("--c-to-u needs a closed orientable surface with a central element")
        return series.c_to_u_limit(
            req.rs, topo.genus, topo.boundaries[0].central_part, req.polynomial, workers=req.workers
        )
    return series.regularized_limit(
        req.rs, req.topology, req.polynomial, req.t_schedule, convention=req.convention, workers=req.workers
    )


def _cmd_volume(req: Request) -> dict:
    one = InvariantPolynomial.constant(req.rs.rank)
    res = series.regularized_limit(req.rs, req.topology, one, req.t_schedule, convention=req.convention)
    vol_g, vol_t = series.group_and_torus_volumes(req.rs)
    volume = series.moduli_volume(
        req.rs, req.topology, pi1_order=req.pi1_order, schedule=req.t_schedule, convention=req.convention
    )
    return {
        "series_value": res.value,
        "residual": res.residual,
        "volume": volume,
        "vol_group": vol_g,
        "vol_torus": vol_t,
        "real_dimension": req.topology.real_dimension(req.rs),
        "t_schedule": [t for t, _ in res.schedule_values],
        "model": res.model,
    }


def _cmd_intersect(req: Request) -> tuple[dict, series.SeriesResult]:
    res = _limit(req)
    value = series.assembled_invariant(
        req.rs,
        req.topology,
        req.polynomial,
        pi1_order=req.pi1_order,
        schedule=req.t_schedule,
        convention=req.convention,
        series_value=res.value,
    )
    bound = req.topology.vanishing_bound(req.rs)
    return {
        "series_value": res.value,
        "residual": res.residual,
        "intersection": value,
        "degree": req.polynomial.degree,
        "vanishing_bound": bound,
        "expected_zero": bound is not None and req.polynomial.degree > bound,
        "schedule_values": [[a, b] for a, b in res.schedule_values],
        "model": res.model,
    }, res


def _cmd_series(req: Request) -> tuple[dict, series.SeriesResult]:
    if req.t is not None:
        res = series.moduli_series(
            req.rs, req.topology, req.polynomial, req.t, req.cutoff, convention=req.convention, workers=req.workers
        )
        doc = series.series_document(req.rs, req.topology, req.polynomial, res, t_schedule=[req.t], cutoff=req.cutoff)
        if req.cutoff is None:
            doc["cutoff"] = str(series.auto_cutoff(series._make_plan(req.rs, req.topology, req.polynomial, req.convention, False), req.t))
    else:
        res = _limit(req)
        doc = series.series_document(req.rs, req.topology, req.polynomial, res)
    doc["c_to_u"] = req.c_to_u
    return doc, res


def _cmd_mc(req: Request) -> dict:
    est = mc.mc_partition_estimate(req.rs, req.topology, req.t, req.samples, req.seed, workers=req.workers)
    ref = series.moduli_series(req.rs, req.topology, None, req.t, convention=series.HOLONOMY).value
    z = est.z_score(ref)
    return {**est.to_json(), "series_value": ref, "z_score": z, "consistent": bool(abs(z) < 3)}


def _cmd_lattice(req: Request) -> dict:
    try:
        cx = mc.LatticeComplex.load(req.complex_path, req.rs.rank)
    except (OSError, KeyError, ValueError, TypeError) as exc:
        raise UsageError(f"--complex: {exc}") from None
    est = mc.complex_lattice_integral(req.rs, cx, req.t, req.samples, req.seed, workers=req.workers)
    return {**est.to_json(), "num_one_cells": cx.num_one_cells, "two_cells": [list(w) for w in cx.two_cells]}


def _cmd_fs(req: Request) -> dict:
    rows = []
    for lam in lie_core.enumerate_dominant_weights(req.rs, req.max_casimir):
        rows.append(
            {
                "weight": list(lam.coords),
                "casimir": str(lie_core.casimir(req.rs, lam)),
                "dimension": lie_core.dimension(req.rs, lam),
                "indicator": lie_core.frobenius_schur(req.rs, lam),
            }
        )
    return {"rows": rows}


def _cmd_group_info(req: Request) -> dict:
    rs = req.rs
    return {
        "rank": rs.rank,
        "dimension": rs.dim,
        "weyl_order": rs.weyl_order,
        "positive_roots": rs.n_positive,
        "center_order": rs.center_order,
        "dual_coxeter": rs.dual_coxeter,
        "rho": list(rs.rho),
        "rho_norm_sq": str(rs.rho_norm_sq),
        "cartan": rs.cartan.tolist(),
        "adjoint_casimir": str(lie_core.casimir(rs, Weight(rs.highest_root))),
    }


def _header(req: Request) -> dict:
    doc = {
        "command": req.command,
        "group": req.group,
        "defaults": {
            "convention": req.convention,
            "cutoff": None if req.cutoff is None else str(req.cutoff),
            "pi1_order": req.pi1_order,
            "weight_budget": lie_core.weight_budget(),
        },
    }
    if req.topology is not None:
        doc["topology"] = req.topology.to_json()
        doc["polynomial"] = str(req.polynomial)
    if req.command in ("mc-check", "lattice"):
        doc["defaults"].update({"t": req.t, "samples": req.samples, "seed": req.seed, "block": mc.BLOCK})
    if req.command == "fs":
        doc["defaults"]["max_casimir"] = str(req.max_casimir)
    if req.command in ("volume", "intersect", "series") and req.t is None:
        doc["defaults"]["t_schedule"] = req.t_schedule
        doc["defaults"]["drift_tolerance"] = 1e-3
        doc["defaults"]["truncation_eps"] = 1e-14
    return doc


def _dump_json(doc: dict) -> str:
    return json.dumps(doc, sort_keys=True, indent=2, allow_nan=True) + "\n"


def _csv_rows(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def run(req: Request) -> tuple[int, str]:
    """Execute a validated request; returns (exit code, output text)."""
    try:
        doc = _header(req)
        res = None
        if req.command == "volume":
            doc.update(_cmd_volume(req))
        elif req.command == "intersect":
            body, res = _cmd_intersect(req)
            doc.update(body)
        elif req.command == "series":
            body, res = _cmd_series(req)
            doc.update(body)
        elif req.command == "mc-check":
            doc.update(_cmd_mc(req))
        elif req.command == "lattice":
            doc.update(_cmd_lattice(req))
        elif req.command == "fs":
            doc.update(_cmd_fs(req))
        else:
            doc.update(_cmd_group_info(req))
    except UsageError:
        raise
    except FlatmodError as exc:
        return 1, _dump_json({"error": type(exc).__name__, "message": str(exc), "command": req.command})

    if req.fmt == "json":
        return 0, _dump_json(doc)
    if req.command == "fs":
        return 0, _csv_rows(
            ["weight", "casimir", "dimension", "indicator"],
            [[" ".join(map(str, r["weight"])), r["casimir"], r["dimension"], r["indicator"]] for r in doc["rows"]],
        )
    if res is not None:
        return 0, series.schedule_csv(res)
    scalars = sorted((k, v) for k, v in doc.items() if isinstance(v, (int, float, str, bool)) or v is None)
    return 0, _csv_rows(["key", "value"], [[k, repr(v) if isinstance(v, float) else v] for k, v in scalars])


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else argv
    try:
        req = parse_request(argv)
        code, text = run(req)
    except UsageError as exc:
        print(f"flatmod: usage error: {exc}", file=sys.stderr)
        return 2
    sys.stdout.write(text)
    return code


if __name__ == "__main__":
    sys.exit(main())
