"""Command-line surface.

Subcommands: ``indices``, ``classify``, ``flow``, ``hn``, ``verify``,
``gen``.  JSON output is the stable interface (exact rationals as
"p/q" strings, floats in shortest round-trip form); text output is for
humans.  Exit codes: 0 pass, 1 disagreement or numerical failure,
2 schema violation, 3 resource limit, 4 unsupported request.
"""

from __future__ import annotations

import argparse
import sys
from fractions import Fraction

from . import harness, moment, quiver, serialize, torus
from .errors import (
    ClassificationError,
    DomainError,
    GenerationError,
    InputError,
    NumericError,
    ResourceLimitError,
    SchemaError,
    UnsupportedError,
)
from .moment import FlowOpts, HermitianModel
from .quiver import HNType

EXIT_OK = 0
EXIT_DISAGREE = 1
EXIT_SCHEMA = 2
EXIT_RESOURCE = 3
EXIT_UNSUPPORTED = 4


class _CliFailure(Exception):
    def __init__(self, code: int, message: str):
        self.code = code
        super().__init__(message)


def _emit(args, payload: dict, text_lines) -> None:
    if args.format == "json" or args.out:
        text = serialize.dump_json(payload, args.out)
        if args.format == "json":
            print(text)
        elif args.out:
            print(f"wrote {args.out}")
    if args.format == "text":
        for line in text_lines:
            print(line)


def _load(path: str) -> dict:
    data = serialize.load_instance_file(path)
    if not isinstance(data, dict):
        raise SchemaError(path, "instance file must be a mapping")
    return data


def _kind(data: dict, path: str) -> str:
    kind = data.get("kind")
    if kind not in ("torus", "quiver"):
        raise SchemaError(f"{path}.kind", "expected 'torus' or 'quiver'")
    return kind


def _flow_opts(args) -> FlowOpts:
    return FlowOpts(tol=args.tol, max_steps=args.max_steps, dt_init=args.dt_init)


def _torus_indices(spec) -> list[dict]:
    return [serialize.index_to_dict(i) for i in torus.enumerate_indices(spec)]


def cmd_indices(args) -> int:
    data = _load(args.file)
    kind = _kind(data, args.file)
    if kind == "torus":
        spec = serialize.torus_spec_from_dict(data, args.file)
        rows = _torus_indices(spec)
        source = "torus-weights"
    else:
        inst = serialize.instance_from_dict(data, args.file)
        if inst.abelian:
            spec, _sup = quiver.to_torus_spec(inst)
            rows = _torus_indices(spec)
            source = "torus-weights"
        else:
            rows = []
            for tau in quiver.enumerate_hn_types(inst):
                bw = quiver.beta_of_type(tau, inst)
                rows.append(
                    {
                        "tau": [list(p) for p in tau.parts],
                        "levels": [serialize.frac_str(l) for l in bw.levels],
                        "depth_sq": serialize.frac_str(bw.norm_sq),
                        "d": float(bw.norm_sq) ** 0.5,
                    }
                )
            rows.sort(key=lambda r: (Fraction(r["depth_sq"]), r["levels"]))
            source = "hn-types"
    payload = {"indices": rows, "source": source}
    lines = [f"{len(rows)} indices ({source}):"]
    for r in rows:
        if "beta" in r:
            lines.append(f"  beta = ({', '.join(r['beta'])})  d = {r['d']:.6f}")
        else:
            lines.append(f"  tau = {r['tau']}  levels = ({', '.join(r['levels'])})  d = {r['d']:.6f}")
    _emit(args, payload, lines)
    return EXIT_OK


def _classify_exact_torus(spec, point) -> dict:
    idx = torus.classify_point(point, spec)
    out = serialize.index_to_dict(idx)
    out["method"] = "exact"
    return out


def cmd_classify(args) -> int:
    data = _load(args.file)
    kind = _kind(data, args.file)
    results: dict = {}
    if kind == "torus":
        if not args.point:
            raise SchemaError(args.file, "torus classification needs --point NAME")
        points = data.get("points", {})
        if args.point not in points:
            raise SchemaError(f"{args.file}.points.{args.point}", "no such point")
        point = serialize.point_from_dict(points[args.point], f"{args.file}.points.{args.point}")
        spec = serialize.torus_spec_from_dict(data, args.file)
        if args.method in ("flow", "both"):
            raise UnsupportedError("flow classification needs a quiver instance")
        results["exact"] = _classify_exact_torus(spec, point)
    else:
        inst = serialize.instance_from_dict(data, args.file)
        if not args.rep:
            raise SchemaError(args.file, "quiver classification needs --rep NAME")
        reps = data.get("reps", {})
        if args.rep not in reps:
            raise SchemaError(f"{args.file}.reps.{args.rep}", "no such representation")
        rep = serialize.rep_from_lists(inst, reps[args.rep], f"{args.file}.reps.{args.rep}")
        if args.method in ("exact", "both"):
            if not inst.abelian:
                raise UnsupportedError("exact classification needs all d_v <= 1")
            tau = quiver.hn_filtration_abelian(rep, inst)
            bw = quiver.beta_of_type(tau, inst)
            levels = quiver.vertex_levels(bw, inst)
            results["exact"] = {
                "method": "exact",
                "tau": [list(p) for p in tau.parts],
                "beta": {v: serialize.frac_str(x) for v, x in sorted(levels.items())},
                "depth_sq": serialize.frac_str(bw.norm_sq),
                "d": float(bw.norm_sq) ** 0.5,
                "semistable": tau.semistable,
            }
        if args.method in ("flow", "both"):
            results["flow"] = _classify_by_flow(inst, rep, _flow_opts(args))
    payload = {"method": args.method, "results": results}
    lines = []
    for method, res in results.items():
        lines.append(f"[{method}] " + ", ".join(f"{k}={v}" for k, v in res.items() if k != "method"))
    if args.method == "both":
        exact_label = results["exact"]["beta"]
        flow_label = results["flow"].get("beta")
        agree = flow_label is not None and {int(k): v for k, v in flow_label.items()} == {
            int(k): v for k, v in exact_label.items()
        }
        payload["agree"] = agree
        lines.append(f"agree: {agree}")
        _emit(args, payload, lines)
        return EXIT_OK if agree else EXIT_DISAGREE
    _emit(args, payload, lines)
    return EXIT_OK


def _classify_by_flow(inst, rep, opts) -> dict:
    model = HermitianModel(inst)
    result = moment.flow(rep, model, opts)
    out = {
        "method": "flow",
        "converged": result.converged,
        "steps": result.steps,
        "residual": result.residual,
        "mu_norm": result.mu_norm,
    }
    if not result.converged:
        return out
    candidates = []
    if inst.abelian:
        spec, sup = quiver.to_torus_spec(inst)
        nv = len(inst.dim)
        for idx in torus.enumerate_indices(spec):
            levels = quiver.torus_vertex_levels(idx.beta, sup)
            pattern = tuple((levels[v],) if v in levels else () for v in range(nv))
            candidates.append(moment.Candidate(label=levels, pattern=pattern))
    else:
        for tau in quiver.enumerate_hn_types(inst):
            bw = quiver.beta_of_type(tau, inst)
            candidates.append(
                moment.Candidate(label={v: d[0] for v, d in enumerate(bw.diagonals) if d}, pattern=bw.diagonals)
            )
    try:
        snap = moment.classify_limit(result, model, candidates)
        label = snap.candidate.label
        out["beta"] = {str(v): serialize.frac_str(x) for v, x in sorted(label.items())}
        out["snap_distance"] = snap.distance
        out["gap"] = snap.gap
    except ClassificationError as exc:
        out["beta"] = None
        out["error"] = str(exc)
    return out


def cmd_flow(args) -> int:
    data = _load(args.file)
    if _kind(data, args.file) != "quiver":
        raise UnsupportedError("the flow needs a quiver instance")
    inst = serialize.instance_from_dict(data, args.file)
    reps = data.get("reps", {})
    if args.rep not in reps:
        raise SchemaError(f"{args.file}.reps.{args.rep}", "no such representation")
    rep = serialize.rep_from_lists(inst, reps[args.rep], f"{args.file}.reps.{args.rep}")
    model = HermitianModel(inst)
    result = moment.flow(rep, model, _flow_opts(args))
    payload = {
        "converged": result.converged,
        "steps": result.steps,
        "residual": result.residual,
        "mu_norm": result.mu_norm,
        "monotone": result.trajectory_monotone,
        "eigenvalues": [list(row) for row in moment.eigen_pattern(result.limit, model)],
        "limit": serialize.rep_to_lists(result.limit),
    }
    lines = [
        f"converged: {result.converged} after {result.steps} steps",
        f"residual:  {result.residual:.3e}",
        f"mu_norm:   {result.mu_norm:.9f}",
    ]
    _emit(args, payload, lines)
    return EXIT_OK


def cmd_hn(args) -> int:
    data = _load(args.file)
    if _kind(data, args.file) != "quiver":
        raise UnsupportedError("Harder-Narasimhan types need a quiver instance")
    inst = serialize.instance_from_dict(data, args.file)
    if not inst.abelian:
        raise UnsupportedError("exact Harder-Narasimhan computation needs all d_v <= 1")
    reps = data.get("reps", {})
    if args.rep not in reps:
        raise SchemaError(f"{args.file}.reps.{args.rep}", "no such representation")
    rep = serialize.rep_from_lists(inst, reps[args.rep], f"{args.file}.reps.{args.rep}")
    tau = quiver.hn_filtration_abelian(rep, inst)
    bw = quiver.beta_of_type(tau, inst)
    payload = {
        "tau": [list(p) for p in tau.parts],
        "slopes": [serialize.frac_str(s) for s in tau.slopes],
        "levels": [serialize.frac_str(l) for l in bw.levels],
        "depth_sq": serialize.frac_str(bw.norm_sq),
        "semistable": tau.semistable,
    }
    lines = [f"tau = {payload['tau']}", f"slopes = {payload['slopes']}", f"semistable = {tau.semistable}"]
    _emit(args, payload, lines)
    return EXIT_OK


def cmd_verify(args) -> int:
    if args.config:
        config = serialize.load_instance_file(args.config)
    else:
        config = harness.default_suite_config()
    if args.seed is not None:
        config = {**config, "seed": args.seed}
    result = harness.run_suite(config)
    summary = result["summary"]
    payload = result
    lines = [
        f"pass: {summary['pass']}  fail: {summary['fail']}  warn: {summary['warn']}",
    ]
    for rep in result["reports"]:
        s = rep["summary"]
        lines.append(
            f"  {rep['instance']['name']}: pass {s['pass']}, fail {s['fail']}, warn {s['warn']}"
        )
    if summary["fail"]:
        for rep in result["reports"]:
            for rec in rep["records"]:
                if rec["status"] == "fail":
                    lines.append(f"  FAIL {rep['instance']['name']} {rec.get('point')}")
    _emit(args, payload, lines)
    return EXIT_OK if summary["fail"] == 0 else EXIT_DISAGREE


def _parse_tau(text: str) -> list[tuple[int, ...]]:
    try:
        return [tuple(int(x) for x in part.split(",")) for part in text.split(";") if part.strip()]
    except ValueError as exc:
        raise SchemaError("--tau", f"expected 'a,b;c,d;...', got {text!r}") from exc


def cmd_gen(args) -> int:
    data = _load(args.file)
    if _kind(data, args.file) != "quiver":
        raise UnsupportedError("generation needs a quiver instance")
    inst = serialize.instance_from_dict(data, args.file)
    tau = HNType.of(_parse_tau(args.tau), inst)
    gen = quiver.generate_hn_instance(
        tau, inst, args.seed, block_refiner=moment.block_critical_refiner(inst)
    )
    bw = quiver.beta_of_type(tau, inst)
    out_file = dict(data)
    reps = dict(out_file.get("reps", {}))
    reps[args.name] = serialize.rep_to_lists(gen.rep)
    out_file["reps"] = reps
    out_file["certificates"] = {
        **out_file.get("certificates", {}),
        args.name: {
            "tau": [list(p) for p in tau.parts],
            "levels": [serialize.frac_str(l) for l in bw.levels],
            "seed": args.seed,
            "certified": gen.certified,
            "block_rules": [b.rule for b in gen.blocks],
        },
    }
    lines = [
        f"generated rep '{args.name}' of type {[list(p) for p in tau.parts]} (seed {args.seed})",
        f"certified: {gen.certified} via {[b.rule for b in gen.blocks]}",
    ]
    _emit(args, out_file, lines)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="stratakit",
        description="instability stratification data for torus and quiver actions",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, flow=False):
        p.add_argument("--format", choices=("json", "text"), default="text")
        p.add_argument("--out", default=None, help="write JSON to this path")
        if flow:
            p.add_argument("--tol", type=float, default=1e-8)
            p.add_argument("--max-steps", type=int, default=200_000)
            p.add_argument("--dt-init", type=float, default=1e-3)

    p = sub.add_parser("indices", help="enumerate instability indices")
    p.add_argument("file")
    common(p)
    p.set_defaults(fn=cmd_indices)

    p = sub.add_parser("classify", help="classify a point or representation")
    p.add_argument("file")
    p.add_argument("--point", default=None)
    p.add_argument("--rep", default=None)
    p.add_argument("--method", choices=("exact", "flow", "both"), default="exact")
    common(p, flow=True)
    p.set_defaults(fn=cmd_classify)

    p = sub.add_parser("flow", help="run the moment-map norm-square flow")
    p.add_argument("file")
    p.add_argument("--rep", required=True)
    common(p, flow=True)
    p.set_defaults(fn=cmd_flow)

    p = sub.add_parser("hn", help="exact Harder-Narasimhan type (abelian)")
    p.add_argument("file")
    p.add_argument("--rep", required=True)
    common(p)
    p.set_defaults(fn=cmd_hn)

    p = sub.add_parser("verify", help="run the cross-check suite")
    p.add_argument("config", nargs="?", default=None)
    p.add_argument("--seed", type=int, default=None)
    common(p)
    p.set_defaults(fn=cmd_verify)

    p = sub.add_parser("gen", help="generate a representation of certified type")
    p.add_argument("file")
    p.add_argument("--tau", required=True, help="parts as 'a,b;c,d;...'")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--name", default="generated")
    common(p)
    p.set_defaults(fn=cmd_gen)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except SchemaError as exc:
        print(f"schema error: {exc}", file=sys.stderr)
        return EXIT_SCHEMA
    except ResourceLimitError as exc:
        print(f"resource limit: {exc}", file=sys.stderr)
        return EXIT_RESOURCE
    except UnsupportedError as exc:
        print(f"unsupported: {exc}", file=sys.stderr)
        return EXIT_UNSUPPORTED
    except GenerationError as exc:
        print(f"generation error: {exc}", file=sys.stderr)
        return EXIT_UNSUPPORTED
    except (InputError, DomainError) as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_SCHEMA
    except NumericError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_DISAGREE


if __name__ == "__main__":
    raise SystemExit(main())
