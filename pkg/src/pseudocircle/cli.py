"""Command-line entry point.

Every subcommand reads an optional JSON config (``--config``); flags given
on the command line override config values.  Artifacts embed the fully
resolved config.  Failures print one JSON error record to stderr and exit
with the status of the error class (see ``errors.py``).
"""
from __future__ import annotations

import argparse
import json
import math
import re
import sys
from pathlib import Path
from typing import Any, Optional, Sequence

import numpy as np

from . import __version__
from .annuli import (
    DEFAULT_BOX,
    DEFAULT_BUDGET,
    DEFAULT_TOL,
    partition,
    rasterize,
    trace_chain,
)
from .crooked import (
    DEFAULT_MIN_SPAN,
    DEFAULT_SEARCH_BUDGET,
    find_crooked_blocks,
    itinerary,
    verify_schedule,
)
from .errors import ConfigInvalid, PseudocircleError
from .io import atomic_write, curve_csv, fmt_float, raster_pgm, raster_sidecar, write_json
from .maps import M_MIN, BlockSchedule, WParams, parse_blocks
from .render import (
    CurveLayer,
    FigureSpec,
    ItineraryLayer,
    PartitionLayer,
    RasterLayer,
    figure_filename,
    render_figure,
)
from .symbolic import (
    Escaped,
    code_text,
    code_to_interval,
    escape_grid,
    escape_times,
    g_itinerary,
    parse_code,
    schedule_from_code,
    transitivity_witness,
    witness_visits,
)

DEFAULTS: dict[str, Any] = {
    "M": M_MIN,
    "tol": DEFAULT_TOL,
    "vertex_budget": DEFAULT_BUDGET,
    "out": ".",
    "depth": 1,
    "N": [4],
    "box": list(DEFAULT_BOX),
    "res": [100, 100],
    "window": "period",
    "min_span": DEFAULT_MIN_SPAN,
    "budget": DEFAULT_SEARCH_BUDGET,
    "max_block": 24,
    "verify": True,
    "maxiter": 1000,
    "grid": [50, 50, 40],
    "unroll": 1,
    "layers": ["core", "upper", "lower"],
    "viewport": None,
    "n": 20,
    "L": 6,
}

_COMMON = ("command", "M", "tol", "vertex_budget")
RELEVANT = {
    "trace": _COMMON + ("blocks", "depth"),
    "raster": _COMMON + ("blocks", "depth", "box", "res"),
    "crooked": _COMMON + ("blocks", "N", "window", "min_span"),
    "search": _COMMON + ("depth", "N", "budget", "max_block", "min_span", "verify"),
    "symbolic": _COMMON + ("action", "code", "n", "L", "maxiter", "grid"),
    "figure": _COMMON + ("blocks", "depth", "layers", "N", "unroll", "viewport", "box", "res"),
}

_PI_RE = re.compile(r"^\s*([+-]?\d*\.?\d*)\s*\*?\s*pi\s*(?:/\s*(\d+(?:\.\d*)?))?\s*$", re.I)


def parse_angle(v: Any) -> float:
    """Accept numbers or multiples of pi such as '0.5pi', '3pi/2', '-pi'."""
    if isinstance(v, (int, float)) and not isinstance(v, bool):
        return float(v)
    if not isinstance(v, str):
        raise ConfigInvalid(f"cannot read angle {v!r}")
    m = _PI_RE.match(v.replace("π", "pi"))
    if m:
        coef = m.group(1)
        k = 1.0 if coef in ("", "+") else -1.0 if coef == "-" else float(coef)
        div = float(m.group(2)) if m.group(2) else 1.0
        return k * math.pi / div
    try:
        return float(v)
    except ValueError:
        raise ConfigInvalid(f"cannot read angle {v!r}") from None


def _num_list(v: Any, n: Optional[int], name: str, angle: bool = False) -> list:
    if isinstance(v, str):
        v = [t for t in re.split(r"[,\s]+", v.strip()) if t]
    if not isinstance(v, (list, tuple)):
        raise ConfigInvalid(f"{name} must be a list")
    if n is not None and len(v) != n:
        raise ConfigInvalid(f"{name} needs {n} values, got {len(v)}")
    return [parse_angle(t) for t in v] if angle else v


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigInvalid(message)


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--config", help="JSON config file; flags override its values")
    common.add_argument("--M", type=float, help="W parameter (>= 512)")
    common.add_argument("--tol", type=float, help="curve refinement tolerance")
    common.add_argument("--vertex-budget", dest="vertex_budget", type=int,
                        help="maximum vertices per traced curve")
    common.add_argument("--out", help="output directory")

    p = _Parser(prog="pseudocircle", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", parser_class=_Parser)
    sub.required = True

    t = sub.add_parser("trace", parents=[common], help="trace boundary and core curves")
    t.add_argument("--blocks", help='block schedule, e.g. "3,3;0,3"')
    t.add_argument("--depth", type=int)

    r = sub.add_parser("raster", parents=[common], help="membership raster of A_k")
    r.add_argument("--blocks")
    r.add_argument("--depth", type=int)
    r.add_argument("--box", help="x0,x1,y0,y1 (angles may be written as 0.5pi)")
    r.add_argument("--res", help="cols,rows")

    c = sub.add_parser("crooked", parents=[common], help="crookedness report for a schedule")
    c.add_argument("--blocks")
    c.add_argument("--N", nargs="+", type=int, help="rectangle counts per depth")
    c.add_argument("--window", choices=["period", "closed"])
    c.add_argument("--min-span", dest="min_span", type=int)

    s = sub.add_parser("search", parents=[common], help="search for a crooked schedule")
    s.add_argument("--depth", type=int)
    s.add_argument("--N", nargs="+", type=int)
    s.add_argument("--budget", type=int, help="candidate blocks to examine")
    s.add_argument("--max-block", dest="max_block", type=int)
    s.add_argument("--min-span", dest="min_span", type=int)
    s.add_argument("--no-verify", dest="verify", action="store_const", const=False)

    y = sub.add_parser("symbolic", parents=[common], help="base dynamics and coding")
    y.add_argument("action", choices=["code-to-interval", "itinerary", "escape",
                                      "witness", "schedule"])
    y.add_argument("code", nargs="?", help="code over {1,2}, or an angle for itinerary")
    y.add_argument("--n", type=int, help="itinerary length")
    y.add_argument("--L", type=int, help="witness word length")
    y.add_argument("--maxiter", type=int)
    y.add_argument("--grid", help="nx,ny,nz for escape sweeps")

    f = sub.add_parser("figure", parents=[common], help="render an SVG figure")
    f.add_argument("--blocks")
    f.add_argument("--depth", type=int)
    f.add_argument("--layers", help="comma list of core,upper,lower,raster,fibers,itinerary")
    f.add_argument("--N", nargs="+", type=int)
    f.add_argument("--unroll", type=int)
    f.add_argument("--viewport", help="x0,x1,y0,y1")
    f.add_argument("--res")
    return p


def resolve(args: argparse.Namespace) -> dict[str, Any]:
    cfg = dict(DEFAULTS)
    if args.config:
        try:
            loaded = json.loads(Path(args.config).read_text(encoding="utf-8"))
        except (OSError, ValueError) as e:
            raise ConfigInvalid(f"cannot read config {args.config}: {e}") from None
        if not isinstance(loaded, dict):
            raise ConfigInvalid("config must be a JSON object")
        cfg.update(loaded)
    for k, v in vars(args).items():
        if k != "config" and v is not None:
            cfg[k] = v
    cfg.pop("config", None)
    return validate(cfg)


def embedded(cfg: dict[str, Any]) -> dict[str, Any]:
    """The resolved settings that determine an artifact's content.

    The output directory is left out so artifacts compare equal across
    locations."""
    return {k: cfg[k] for k in RELEVANT[cfg["command"]] if k in cfg}


def validate(cfg: dict[str, Any]) -> dict[str, Any]:
    cmd = cfg["command"]
    try:
        cfg["M"] = float(cfg["M"])
        WParams(cfg["M"])
        cfg["tol"] = float(cfg["tol"])
        if not cfg["tol"] > 0:
            raise ValueError("tol must be positive")
        cfg["vertex_budget"] = int(cfg["vertex_budget"])
        if cmd in ("trace", "raster", "crooked", "figure"):
            if not cfg.get("blocks"):
                raise ValueError("--blocks is required and must be nonempty")
            if isinstance(cfg["blocks"], list):
                cfg["blocks"] = ";".join(f"{m},{n}" for m, n in cfg["blocks"])
            BlockSchedule.of(parse_blocks(cfg["blocks"]), cfg["M"])
        if cmd in ("trace", "raster", "figure", "search"):
            cfg["depth"] = int(cfg["depth"])
            if cfg["depth"] < 0:
                raise ValueError("depth must be >= 0")
        if cmd in ("trace", "raster", "figure") and "blocks" in cfg:
            if cfg["depth"] > len(parse_blocks(cfg["blocks"])):
                raise ValueError("depth exceeds the number of blocks")
        if cmd in ("crooked", "search", "figure"):
            cfg["N"] = [int(v) for v in _num_list(cfg["N"], None, "N")]
            if any(v < 4 for v in cfg["N"]):
                raise ValueError("every N must be >= 4")
        if cmd == "search":
            if cfg["depth"] < 1:
                raise ValueError("search depth must be >= 1")
            if len(cfg["N"]) < cfg["depth"]:
                raise ValueError("N needs at least one entry per searched depth")
            if any(b < a for a, b in zip(cfg["N"], cfg["N"][1:])):
                raise ValueError("N must be nondecreasing")
            if int(cfg["budget"]) < 0:
                raise ValueError("budget must be >= 0")
        if cmd == "crooked" and len(cfg["N"]) < len(parse_blocks(cfg["blocks"])):
            raise ValueError("N needs one entry per block")
        if cmd in ("raster", "figure"):
            cfg["box"] = _num_list(cfg["box"], 4, "box", angle=True)
            cfg["res"] = [int(v) for v in _num_list(cfg["res"], 2, "res")]
        if cmd == "figure":
            if isinstance(cfg["layers"], str):
                cfg["layers"] = [t for t in cfg["layers"].split(",") if t]
            known = {"core", "upper", "lower", "raster", "fibers", "itinerary"}
            bad = set(cfg["layers"]) - known
            if bad or not cfg["layers"]:
                raise ValueError(f"unknown layers {sorted(bad)}")
            if cfg["viewport"] is not None:
                cfg["viewport"] = _num_list(cfg["viewport"], 4, "viewport", angle=True)
            cfg["unroll"] = int(cfg["unroll"])
        if cmd == "symbolic":
            cfg["grid"] = [int(v) for v in _num_list(cfg["grid"], 3, "grid")]
            if cfg["action"] in ("code-to-interval", "schedule", "itinerary") and not cfg.get("code"):
                raise ValueError(f"{cfg['action']} needs a code argument")
    except ConfigInvalid:
        raise
    except (ValueError, TypeError, KeyError) as e:
        raise ConfigInvalid(str(e)) from None
    return cfg


def _schedule(cfg) -> BlockSchedule:
    return BlockSchedule.of(parse_blocks(cfg["blocks"]), cfg["M"])


def _out(cfg) -> Path:
    return Path(cfg["out"])


def cmd_trace(cfg) -> list[Path]:
    sched = _schedule(cfg)
    chain = trace_chain(sched, cfg["depth"], cfg["tol"], cfg["vertex_budget"])
    paths = []
    h = sched.digest()
    for level in chain.levels:
        for name, c in level.curves().items():
            p = _out(cfg) / f"trace_{h}_d{level.depth}_{name}.csv"
            atomic_write(p, curve_csv(c, level.depth, h, name))
            paths.append(p)
    manifest = {
        "config": embedded(cfg),
        "schedule": sched.text(),
        "schedule_hash": h,
        "levels": [{"depth": L.depth, "holonomy": L.core.holonomy,
                    "vertices": {k: len(c) for k, c in L.curves().items()}}
                   for L in chain.levels],
        "files": [p.name for p in paths],
    }
    paths.append(write_json(_out(cfg) / f"trace_{h}_d{cfg['depth']}.json", manifest))
    return paths


def cmd_raster(cfg) -> list[Path]:
    sched = _schedule(cfg)
    r = rasterize(sched, cfg["depth"], cfg["box"], cfg["res"])
    stem = _out(cfg) / f"raster_{sched.digest()}_d{cfg['depth']}"
    side = raster_sidecar(r)
    side["config"] = embedded(cfg)
    return [atomic_write(stem.with_suffix(".pgm"), raster_pgm(r)),
            write_json(stem.with_suffix(".json"), side)]


def cmd_crooked(cfg) -> list[Path]:
    sched = _schedule(cfg)
    reports = verify_schedule(sched, cfg["N"], cfg["tol"], cfg["min_span"],
                              cfg["window"], cfg["vertex_budget"])
    doc = {"config": embedded(cfg), "schedule": sched.text(), "schedule_hash": sched.digest(),
           "crooked": all(r["crooked"] for r in reports), "depths": reports}
    return [write_json(_out(cfg) / f"crooked_{sched.digest()}.json", doc)]


def cmd_search(cfg) -> list[Path]:
    params = WParams(cfg["M"])
    res = find_crooked_blocks(cfg["depth"], cfg["N"], params, int(cfg["budget"]),
                              cfg["tol"], int(cfg["min_span"]), int(cfg["max_block"]),
                              curve_budget=cfg["vertex_budget"])
    doc = {"config": embedded(cfg), **res.to_dict()}
    if cfg["verify"]:
        checks = verify_schedule(res.schedule, cfg["N"], cfg["tol"], int(cfg["min_span"]),
                                 "period", cfg["vertex_budget"])
        doc["recheck"] = checks
        doc["recheck_passed"] = all(r["crooked"] for r in checks)
    name = f"search_{res.schedule.digest()}_d{cfg['depth']}.json"
    return [write_json(_out(cfg) / name, doc)]


def cmd_symbolic(cfg, stdout) -> list[Path]:
    action = cfg["action"]
    if action == "code-to-interval":
        iv = code_to_interval(parse_code(cfg["code"]))
        print(str(iv), file=stdout)
        return []
    if action == "schedule":
        sched = schedule_from_code(parse_code(cfg["code"]), WParams(cfg["M"]))
        print(sched.text(), file=stdout)
        return []
    if action == "itinerary":
        res = g_itinerary(parse_angle(cfg["code"]), int(cfg["n"]))
        print(str(res) if isinstance(res, Escaped) else code_text(res), file=stdout)
        return []
    if action == "witness":
        L = int(cfg["L"])
        code = transitivity_witness(L)
        visits = witness_visits(code, L)
        doc = {"config": embedded(cfg), "L": L, "code": code_text(code), "length": len(code),
               "cylinders_visited": len(visits), "cylinders_total": 2 ** L}
        print(code_text(code), file=stdout)
        return [write_json(_out(cfg) / f"witness_L{L}.json", doc)]
    nx, ny, nz = cfg["grid"]
    X, Y, Z = escape_grid(nx, ny, nz)
    steps = escape_times(X, Y, Z, WParams(cfg["M"]), int(cfg["maxiter"]))
    lines = [f"# config={json.dumps(embedded(cfg), sort_keys=True)}", "x,y,z,escape_step"]
    lines += [f"{fmt_float(a)},{fmt_float(b)},{fmt_float(c)},{'NEVER' if s < 0 else s}"
              for a, b, c, s in zip(X, Y, Z, steps)]
    p = atomic_write(_out(cfg) / f"escape_{nx}x{ny}x{nz}_{cfg['maxiter']}.csv",
                     "\n".join(lines) + "\n")
    print(f"never={int((steps < 0).sum())} escaped={int((steps >= 0).sum())}", file=stdout)
    return [p]


def cmd_figure(cfg) -> list[Path]:
    sched = _schedule(cfg)
    k = cfg["depth"]
    layers: list = []
    chain = None
    wanted = cfg["layers"]
    if any(l in wanted for l in ("core", "upper", "lower", "fibers", "itinerary")):
        chain = trace_chain(sched, k, cfg["tol"], cfg["vertex_budget"])
    if "raster" in wanted:
        layers.append(RasterLayer(rasterize(sched, k, cfg["box"], cfg["res"]), "A_k"))
    for name in ("upper", "lower", "core"):
        if name in wanted:
            layers.append(CurveLayer(chain[k].curves()[name], name))
    if "fibers" in wanted or "itinerary" in wanted:
        if k < 1 and "itinerary" in wanted:
            raise ConfigInvalid("itinerary layer needs depth >= 1")
        pd = k - 1 if "itinerary" in wanted else k
        part = partition(chain, pd, cfg["N"][min(pd, len(cfg["N"]) - 1)])
        if "fibers" in wanted:
            layers.append(PartitionLayer(part, "fibers"))
        if "itinerary" in wanted:
            layers.append(ItineraryLayer(itinerary(chain[k].core, part, tol=cfg["tol"])))
    viewport = cfg["viewport"]
    if viewport is None:
        curves = [l.curve for l in layers if isinstance(l, CurveLayer)]
        if curves:
            xs = np.concatenate([c.x for c in curves])
            ys = np.concatenate([c.y for c in curves])
            hol = max(c.holonomy for c in curves) * (cfg["unroll"] - 1)
            pad = 0.05 * max(float(np.ptp(ys)), 1e-9)
            viewport = [float(xs.min()), float(xs.max()) + hol,
                        float(ys.min()) - pad, float(ys.max()) + pad]
        else:
            viewport = list(cfg["box"])
    spec = FigureSpec(tuple(layers), tuple(viewport), cfg["unroll"],
                      title=f"depth {k}, blocks {sched.text()}")
    svg = render_figure(spec)
    return [atomic_write(_out(cfg) / figure_filename("figure", sched, k), svg)]


def error_record(e: PseudocircleError) -> str:
    rec = {"error": e.code, "exit_status": e.exit_status, "message": str(e)}
    return json.dumps(rec, ensure_ascii=False) + "\n"


def run(argv: Optional[Sequence[str]] = None, stdout=None, stderr=None) -> int:
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    try:
        args = build_parser().parse_args(argv)
        cfg = resolve(args)
        cmd = cfg["command"]
        if cmd == "symbolic":
            paths = cmd_symbolic(cfg, stdout)
        else:
            paths = {"trace": cmd_trace, "raster": cmd_raster, "crooked": cmd_crooked,
                     "search": cmd_search, "figure": cmd_figure}[cmd](cfg)
        for p in paths:
            print(str(p), file=stdout)
        return 0
    except PseudocircleError as e:
        stderr.write(error_record(e))
        return e.exit_status
    except ValueError as e:
        err = ConfigInvalid(str(e))
        stderr.write(error_record(err))
        return err.exit_status


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
