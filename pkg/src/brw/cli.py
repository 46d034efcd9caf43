"""Command-line front end: ``brw <subcommand> ...``.

Data files are byte-deterministic for equal parameters; run metadata that
varies (timestamp) goes to a sidecar ``<out>.manifest.json``.  Errors are
printed as one line ``brw: error: kind=<kind> message=<text>`` and map to
exit code 2 (configuration / domain) or 3 (numeric / resource).
"""

from __future__ import annotations

import argparse
import csv
import datetime as _dt
import hashlib
import io
import json
import math
import os
import sys
from fractions import Fraction
from typing import Any, Sequence

import numpy as np

from . import __version__
from .branching import OffspringLaw, powerhouse_bound, simulate_gw, smallest_fixed_point
from .errors import BRWError, ConfigError, DomainError, NumericError, ResourceError
from .families import FAMILY_NAMES, make_family
from .genfun import critical_table, lambda_s_bracket
from .graph_core import (
    GraphFamily,
    WeightedMultigraph,
    encode_vertex,
    first_passage,
    materialize,
    path_counts,
)
from .quotient import build_quotient, refine_partition, verify_local_isomorphism
from .sim import SimConfig, estimate_survival, sweep_csv, sweep_lambda
from .spectral import classify, perron_root

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3
FAMILY_PARAMS = ("k", "dim", "n", "base", "period")


# --- inputs ----------------------------------------------------------------


def _read_json(path):
    try:
        with open(path, "rb") as fh:
            raw = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc.strerror}") from None
    try:
        return json.loads(raw), hashlib.sha256(raw).hexdigest()
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path} is not valid JSON: {exc.msg}") from None


def _family_spec(args) -> dict:
    spec = {"family": args.family}
    for p in FAMILY_PARAMS:
        v = getattr(args, p, None)
        if v is None:
            continue
        if p == "period":
            try:
                v = [int(t) for t in str(v).split(",") if t.strip()]
            except ValueError:
                raise ConfigError(f"--period must be a comma separated integer list, got {v!r}") from None
        spec[p] = v
    return spec


def load_graph(args) -> tuple[Any, dict]:
    """Graph or family from ``--graph FILE``, ``--family-spec JSON`` or ``--family NAME``.

    Returns the object and a description for the manifest.
    """
    sources = [s for s in ("graph", "family_spec", "family") if getattr(args, s, None)]
    if len(sources) != 1:
        raise ConfigError("give exactly one of --graph, --family-spec, --family")
    src = sources[0]
    if src == "graph":
        path = args.graph
        if not os.path.exists(path) and path in FAMILY_NAMES:
            args.family, args.graph = path, None
            return load_graph(args)
        doc, digest = _read_json(path)
        info = {"graph_file": path, "sha256": digest}
        if isinstance(doc, dict) and "family" in doc:
            return make_family(doc), {**info, "family_spec": doc}
        if not isinstance(doc, dict):
            raise ConfigError(f"{path}: expected a JSON object")
        return WeightedMultigraph.from_json(doc), info
    if src == "family_spec":
        text = args.family_spec
        if os.path.exists(text):
            doc, digest = _read_json(text)
            return make_family(doc), {"family_spec": doc, "sha256": digest}
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"--family-spec is neither a file nor JSON: {exc.msg}") from None
        return make_family(doc), {"family_spec": doc}
    spec = _family_spec(args)
    return make_family(spec), {"family_spec": spec}


def _tuples(v):
    if isinstance(v, list):
        return tuple(_tuples(c) for c in v)
    return v


def parse_vertex(text: str | None, g):
    """Vertex from the command line: plain names for graph files, JSON for family vertices."""
    if text is None:
        return g.root if isinstance(g, GraphFamily) else g.vertices[0]
    if isinstance(g, WeightedMultigraph):
        return text
    try:
        v = _tuples(json.loads(text))
    except json.JSONDecodeError:
        v = text
    if g.is_vertex is not None and not g.is_vertex(v):
        raise DomainError(f"{text!r} is not a vertex of {g.name}")
    return v


# --- outputs ---------------------------------------------------------------


def _plain(x):
    if isinstance(x, Fraction):
        return str(x) if x.denominator != 1 else int(x)
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (np.floating,)):
        x = float(x)
    if isinstance(x, float) and not math.isfinite(x):
        return None
    if isinstance(x, (list, tuple)):
        return [_plain(c) for c in x]
    if isinstance(x, dict):
        return {str(k): _plain(v) for k, v in x.items()}
    return x


def _json_bytes(doc) -> bytes:
    return (json.dumps(_plain(doc), sort_keys=True, indent=2) + "\n").encode()


def _csv_bytes(columns: Sequence[str], rows: Sequence[dict]) -> bytes:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=list(columns), lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow({k: ("" if v is None else v) for k, v in _plain(r).items()})
    return buf.getvalue().encode()


class Output:
    """Resolves ``--out``/``--format``: ``--out csv`` or ``--out json`` means stdout."""

    def __init__(self, args, default_format: str):
        out = getattr(args, "out", None)
        fmt = getattr(args, "format", None)
        self.path = None
        if out in ("csv", "json", "text", "-"):
            fmt = fmt or (out if out != "-" else None)
        elif out:
            self.path = out
            if fmt is None:
                ext = os.path.splitext(out)[1].lower().lstrip(".")
                fmt = ext if ext in ("csv", "json") else None
        self.format = fmt or default_format

    def write(self, data: bytes, manifest: dict | None = None):
        if self.path is None:
            sys.stdout.write(data.decode())
            sys.stdout.flush()
            return
        with open(self.path, "wb") as fh:
            fh.write(data)
        if manifest is not None:
            with open(self.path + ".manifest.json", "wb") as fh:
                fh.write(_json_bytes(manifest))


def manifest(args, command: str, inputs: dict, seed=None) -> dict:
    params = {k: v for k, v in vars(args).items() if k not in ("func",) and v is not None}
    return {
        "subcommand": command,
        "parameters": params,
        "inputs": inputs,
        "seed": seed,
        "version": __version__,
        "timestamp": _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds"),
    }


def _resolve_seed(args) -> int:
    if args.seed is not None:
        return args.seed
    seed = int(np.random.SeedSequence().entropy % (2**63))
    print(f"brw: seed={seed}", file=sys.stderr)
    return seed


# --- subcommands -----------------------------------------------------------


def cmd_gen(args):
    g, info = load_graph(args)
    if isinstance(g, WeightedMultigraph):
        doc = g.to_json()
    else:
        if g.finite is not None and args.radius is None:
            doc = g.finite.to_json(encode=encode_vertex)
        else:
            if args.radius is None:
                raise ConfigError("gen needs --radius for an infinite family")
            doc = materialize(g, parse_vertex(args.vertex, g), args.radius).graph.to_json(encode=encode_vertex)
    out = Output(args, "json")
    out.write(_json_bytes(doc), manifest(args, "gen", info))


def cmd_paths(args):
    g, info = load_graph(args)
    x = parse_vertex(args.vertex, g)
    table = path_counts(g, x, args.nmax)
    closed = table.closed()
    cols = ["n", "T", "gamma_xx"]
    y = None
    if args.target is not None:
        y = parse_vertex(args.target, g)
        cols += ["gamma_xy", "phi_xy"]
        full = path_counts(g, x, args.nmax, lump=False) if table.lumped else table
        phi = first_passage(g, x, y, args.nmax, lump=False)
    rows = []
    for n in range(args.nmax + 1):
        r = {"n": n, "T": table.totals[n], "gamma_xx": closed[n]}
        if y is not None:
            r["gamma_xy"] = full.gamma(y, n)
            r["phi_xy"] = phi[n]
        rows.append(r)
    out = Output(args, "csv")
    if out.format == "json":
        data = _json_bytes({"vertex": encode_vertex(x), "target": None if y is None else encode_vertex(y),
                            "exact": table.exact, "rows": rows})
    else:
        data = _csv_bytes(cols, rows)
    out.write(data, manifest(args, "paths", info))


def cmd_critical(args):
    g, info = load_graph(args)
    x = parse_vertex(args.vertex, g)
    rows = [r.__dict__ for r in critical_table(g, x, args.nmax, args.tol)]
    cols = ["horizon", "phi_root_lo", "phi_root_hi", "ms_growth", "mw_growth"]
    out = Output(args, "csv")
    if out.format == "json":
        doc = {"vertex": encode_vertex(x), "rows": rows}
        try:
            enc = lambda_s_bracket(g, x, args.nmax, args.tol)
            doc["lambda_s_enclosure"] = {"lo": enc.lo, "hi": enc.hi, "upper_source": enc.upper_source}
        except DomainError:
            doc["lambda_s_enclosure"] = None
        data = _json_bytes(doc)
    else:
        data = _csv_bytes(cols, rows)
    out.write(data, manifest(args, "critical", info))


def cmd_quotient(args):
    g, info = load_graph(args)
    if isinstance(g, WeightedMultigraph):
        seed_part = None
        if args.seed_partition:
            if os.path.exists(args.seed_partition):
                seed_part, _ = _read_json(args.seed_partition)
            else:
                try:
                    seed_part = json.loads(args.seed_partition)
                except json.JSONDecodeError as exc:
                    raise ConfigError(f"--seed-partition is not JSON: {exc.msg}") from None
        blocks = refine_partition(g, seed_part)
        Y, qmap = build_quotient(g, blocks)
        radius = args.radius or len(g)
        report = verify_local_isomorphism(g, qmap, radius)
        block_names = [[encode_vertex(v) for v in b] for b in blocks]
    else:
        if g.known_quotient is None:
            raise DomainError(f"family {g.name} has no known quotient")
        if args.seed_partition:
            raise ConfigError("--seed-partition applies to finite graphs only")
        qmap = g.known_quotient
        radius = args.radius or 6
        report = verify_local_isomorphism(g, qmap, radius)
        block_names = [[encode_vertex(v)] for v in qmap.codomain.vertices]
    if not report.passed:
        v = report.violation
        raise DomainError(f"quotient fails verification at {encode_vertex(v.vertex)}: {v.detail}")
    doc = {
        "blocks": block_names,
        "matrix": qmap.matrix,
        "verified_radius": report.radius,
        "perron_root": perron_root(qmap.codomain).value,
        "float_tolerance": report.float_tolerance,
    }
    Output(args, "json").write(_json_bytes(doc), manifest(args, "quotient", info))


def cmd_classify(args):
    g, info = load_graph(args)
    rep = classify(g, tol_margin=args.margin, radius_max=args.radius_max)
    Output(args, "json").write(_json_bytes(rep.to_json()), manifest(args, "classify", info))


def cmd_gw(args):
    laws = [OffspringLaw.parse(p) for p in args.pgf]
    fps = [smallest_fixed_point(law, args.tol) for law in laws]
    bound = powerhouse_bound(laws, args.tol)
    doc = {
        "laws": [law.coeffs.tolist() for law in laws],
        "delta": [fp.delta for fp in fps],
        "iterations": [fp.iterations for fp in fps],
        "near_critical": [fp.near_critical for fp in fps],
        "delta_max": bound.delta_max,
        "certificate": [{"law": i, "G_of_delta_max": v, "ok": ok} for i, v, ok in bound.certificate],
        "holds": bound.holds,
    }
    seed = None
    if args.simulate:
        seed = _resolve_seed(args)
        doc["simulated_extinction"] = [
            float(simulate_gw(law, args.generations, args.simulate, seed=seed)[-1]) for law in laws
        ]
        doc["generations"] = args.generations
        doc["seed"] = seed
    out = Output(args, "text")
    if out.format == "json":
        data = _json_bytes(doc)
    else:
        lines = [f"delta={d!r}" for d in doc["delta"]]
        if bound.delta_max is not None:
            lines.append(f"delta_max={bound.delta_max!r} holds={bound.holds}")
            lines += [f"  G_{c['law']}(delta_max)={c['G_of_delta_max']!r} <= delta_max: {c['ok']}"
                      for c in doc["certificate"]]
        else:
            lines.append(f"no bound: {bound.reason}")
        for i, e in enumerate(doc.get("simulated_extinction", [])):
            lines.append(f"simulated extinction law {i} by generation {args.generations}: {e!r}")
        data = ("\n".join(lines) + "\n").encode()
    out.write(data, manifest(args, "gw", {}, seed))


def _sim_config(args, g, lam, seed) -> SimConfig:
    return SimConfig(
        graph=g, lam=lam, mode=args.mode, radius=args.radius, t_max=args.tmax,
        pop_cap=args.cap, seed=seed, record_dt=args.record_dt,
    )


def _sim_doc(config: SimConfig, ests) -> dict:
    return {
        "config": config.describe(),
        "t0": ests[0].t0,
        "conventions": ests[0].conventions,
        "rows": [e.row() for e in ests],
        "cap_hits": [e.cap_hits for e in ests],
        "births_discarded": [e.births_discarded for e in ests],
    }


def cmd_simulate(args):
    g, info = load_graph(args)
    seed = _resolve_seed(args)
    config = _sim_config(args, g, args.lam, seed)
    est = estimate_survival(config, args.trials, t0=args.t0, threads=args.threads)
    out = Output(args, "csv")
    data = _json_bytes(_sim_doc(config, [est])) if out.format == "json" else sweep_csv([est]).encode()
    out.write(data, manifest(args, "simulate", info, seed))


def parse_grid(text: str) -> list[float]:
    """``a:b:step`` (inclusive of ``b`` up to rounding) or a comma separated list."""
    try:
        if ":" in text:
            a, b, step = (float(t) for t in text.split(":"))
            if step <= 0 or b < a:
                raise ValueError("need a <= b and step > 0")
            k = int(math.floor((b - a) / step + 1e-9))
            return [round(a + i * step, 12) for i in range(k + 1)]
        return [float(t) for t in text.split(",") if t.strip()]
    except ValueError as exc:
        raise ConfigError(f"bad lambda grid {text!r}: {exc}") from None


def cmd_sweep(args):
    g, info = load_graph(args)
    seed = _resolve_seed(args)
    grid = parse_grid(args.lambda_grid)
    config = _sim_config(args, g, grid[0], seed)
    ests = sweep_lambda(config, grid, args.trials, t0=args.t0, threads=args.threads)
    out = Output(args, "csv")
    data = _json_bytes(_sim_doc(config, ests)) if out.format == "json" else sweep_csv(ests).encode()
    out.write(data, manifest(args, "sweep", info, seed))


# --- parser ----------------------------------------------------------------


def _graph_args(p):
    p.add_argument("--graph", help="brw-graph-v1 JSON file, family-spec JSON file, or family name")
    p.add_argument("--family", help=f"family name ({', '.join(FAMILY_NAMES)})")
    p.add_argument("--family-spec", help='JSON such as \'{"family": "bridge", "k": 3}\' or a file')
    p.add_argument("--k", type=int)
    p.add_argument("--dim", type=int)
    p.add_argument("--n", type=int)
    p.add_argument("--base")
    p.add_argument("--period", help="comma separated n_k for radial families")


def _out_args(p):
    p.add_argument("--out", help="output file, or csv|json for stdout in that format")
    p.add_argument("--format", choices=["csv", "json", "text"])


def _sim_args(p):
    p.add_argument("--mode", choices=["edge", "site"], default="edge")
    p.add_argument("--trials", type=int, default=1000)
    p.add_argument("--tmax", type=float, default=100.0)
    p.add_argument("--cap", type=int, default=10_000)
    p.add_argument("--radius", type=int)
    p.add_argument("--t0", type=float)
    p.add_argument("--seed", type=int)
    p.add_argument("--record-dt", type=float, default=1.0)
    p.add_argument("--threads", type=int, help="worker threads (default: BRW_THREADS or 1)")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="brw", description="Critical values of branching random walks.")
    ap.add_argument("--version", action="version", version=f"brw {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="write a graph or the ball of a family as brw-graph-v1 JSON")
    _graph_args(p)
    _out_args(p)
    p.add_argument("--radius", type=int)
    p.add_argument("--vertex")
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("paths", help="walk counts T^n, gamma^n_xx (and gamma^n_xy, phi^n_xy)")
    _graph_args(p)
    _out_args(p)
    p.add_argument("--vertex")
    p.add_argument("--target")
    p.add_argument("--nmax", type=int, required=True)
    p.set_defaults(func=cmd_paths)

    p = sub.add_parser("critical", help="Phi-root brackets and growth estimates by horizon")
    _graph_args(p)
    _out_args(p)
    p.add_argument("--vertex")
    p.add_argument("--nmax", type=int, default=40)
    p.add_argument("--tol", type=float, default=1e-9)
    p.set_defaults(func=cmd_critical)

    p = sub.add_parser("quotient", help="coarsest equitable quotient (graphs) or verified known quotient (families)")
    _graph_args(p)
    _out_args(p)
    p.add_argument("--seed-partition", help="JSON list of vertex blocks, or a file")
    p.add_argument("--radius", type=int, help="verification radius")
    p.set_defaults(func=cmd_quotient)

    p = sub.add_parser("classify", help="amenable / nonamenable verdict")
    _graph_args(p)
    _out_args(p)
    p.add_argument("--radius-max", type=int)
    p.add_argument("--margin", type=float, default=0.05)
    p.set_defaults(func=cmd_classify)

    p = sub.add_parser("gw", help="Galton-Watson extinction probability and common bound")
    p.add_argument("--pgf", action="append", required=True, help='coefficients "c0,c1,..."; repeat for several laws')
    p.add_argument("--tol", type=float, default=1e-14)
    p.add_argument("--simulate", type=int, metavar="TRIALS", help="also estimate extinction by simulation")
    p.add_argument("--generations", type=int, default=50)
    p.add_argument("--seed", type=int)
    _out_args(p)
    p.set_defaults(func=cmd_gw)

    p = sub.add_parser("simulate", help="Monte Carlo survival estimate at one lambda")
    _graph_args(p)
    _out_args(p)
    _sim_args(p)
    p.add_argument("--lambda", dest="lam", type=float, required=True)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("sweep", help="survival estimates over a lambda grid")
    _graph_args(p)
    _out_args(p)
    _sim_args(p)
    p.add_argument("--lambda-grid", required=True, help="a:b:step or a,b,c")
    p.set_defaults(func=cmd_sweep)
    return ap


def _error(kind: str, message: str):
    msg = " ".join(str(message).split())
    print(f"brw: error: kind={kind} message={msg}", file=sys.stderr)


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse already printed its usage message
        return EXIT_OK if exc.code == 0 else EXIT_CONFIG
    try:
        args.func(args)
    except (ConfigError, DomainError) as exc:
        _error(exc.kind, exc)
        return EXIT_CONFIG
    except (NumericError, ResourceError) as exc:
        _error(exc.kind, exc)
        return EXIT_NUMERIC
    except BRWError as exc:
        _error(exc.kind, exc)
        return EXIT_CONFIG
    except MemoryError as exc:
        _error("resource", exc or "out of memory")
        return EXIT_NUMERIC
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
