"""Cross-checking harness: the same stratification data computed along
independent routes must coincide.

For abelian instances (all d_v <= 1) three routes are compared pointwise:
the exhaustive Harder-Narasimhan oracle, the exact torus cone-projection
classification of the arrow support, and the numerical flow limit.  For
larger dimension vectors, generated representations carry a certificate
of their type and the flow limit is checked against it.  Disagreements
are collected with full witnesses, never raised, so one failure cannot
mask a systematic pattern.
"""

from __future__ import annotations

import json
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Mapping, Sequence

import numpy as np

from . import __version__, moment, quiver, torus
from .errors import ClassificationError, SchemaError
from .moment import Candidate, FlowOpts, HermitianModel
from .quiver import HNType, Quiver, QuiverInstance, QuiverRep


def _frac_str(x: Fraction) -> str:
    return str(Fraction(x))


def _levels_key(levels: Mapping[int, Fraction]) -> str:
    return ",".join(f"{v}:{_frac_str(x)}" for v, x in sorted(levels.items()))


@dataclass
class VerificationReport:
    instance: dict
    records: list = field(default_factory=list)
    failures: list = field(default_factory=list)
    seeds: dict = field(default_factory=dict)

    @property
    def summary(self) -> dict:
        counts = {"pass": 0, "fail": 0, "warn": 0}
        for r in self.records:
            counts[r["status"]] += 1
        return counts

    def record(self, status: str, **data) -> None:
        entry = {"status": status, **data}
        self.records.append(entry)
        if status == "fail":
            self.failures.append(entry)

    def to_json_dict(self) -> dict:
        return {
            "instance": self.instance,
            "records": self.records,
            "summary": self.summary,
            "versions": {"stratakit": __version__, "numpy": np.__version__},
            "seeds": self.seeds,
        }


def _worker_count() -> int:
    env = os.environ.get("STRATAKIT_THREADS", "")
    try:
        return max(1, int(env)) if env else 1
    except ValueError:
        return 1


def _ordered_map(fn, items):
    workers = _worker_count()
    if workers <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


# ---------------------------------------------------------------------------
# instance descriptors


def instance_descriptor(name: str, inst: QuiverInstance) -> dict:
    return {
        "name": name,
        "vertices": list(inst.quiver.vertices),
        "arrows": [[t, h] for t, h in inst.quiver.arrows],
        "d": list(inst.dim),
        "theta": list(inst.theta),
        "alpha": list(inst.alpha),
    }


def bundled_instances() -> dict[str, QuiverInstance]:
    two = ("1", "2")
    three = ("1", "2", "3")
    return {
        "kronecker": QuiverInstance(Quiver(two, (("1", "2"),) * 2), (1, 1), (-1, 1), (1, 1)),
        "a2": QuiverInstance(Quiver(two, (("1", "2"),)), (1, 1), (1, -1), (1, 1)),
        "a3": QuiverInstance(Quiver(three, (("1", "2"), ("2", "3"))), (1, 1, 1), (-1, 0, 1), (1, 1, 1)),
        "triple": QuiverInstance(
            Quiver(three, (("1", "2"), ("1", "2"), ("2", "3"))), (1, 1, 1), (-2, 1, 1), (1, 2, 1)
        ),
        "kronecker22": QuiverInstance(Quiver(two, (("1", "2"),) * 2), (2, 2), (-1, 1), (1, 1)),
        "3kronecker22": QuiverInstance(Quiver(two, (("1", "2"),) * 3), (2, 2), (-1, 1), (1, 1)),
        "3kronecker33": QuiverInstance(Quiver(two, (("1", "2"),) * 3), (3, 3), (-1, 1), (1, 1)),
        "a2_22": QuiverInstance(Quiver(two, (("1", "2"),)), (2, 2), (1, -1), (1, 1)),
    }


# ---------------------------------------------------------------------------
# abelian three-way verification


def _torus_candidates(spec: torus.TorusActionSpec, sup: Sequence[int], nv: int):
    """Flow candidates from the exact torus index enumeration."""
    cands = []
    for idx in torus.enumerate_indices(spec):
        levels = quiver.torus_vertex_levels(idx.beta, sup)
        pattern = tuple((levels[v],) if v in levels else () for v in range(nv))
        cands.append(Candidate(label=_levels_key(levels), pattern=pattern))
    return cands


def _abelian_rep(inst: QuiverInstance, live: Sequence[int], rng=None) -> QuiverRep:
    mats = []
    for a in range(len(inst.quiver.arrows)):
        shape = inst.arrow_shape(a)
        if shape[0] and shape[1] and a in live:
            if rng is None:
                mats.append(np.ones((1, 1), dtype=np.complex128))
            else:
                mag = rng.uniform(0.5, 1.5)
                phase = rng.uniform(0.0, 2.0 * np.pi)
                mats.append(np.array([[mag * np.exp(1j * phase)]], dtype=np.complex128))
        else:
            mats.append(np.zeros(shape, dtype=np.complex128))
    return QuiverRep(tuple(mats))


def verify_abelian_instance(
    inst: QuiverInstance,
    name: str = "abelian",
    samples: int = 20,
    seed: int = 0,
    flow_opts: FlowOpts | None = None,
    beta_offset: Fraction | None = None,
) -> VerificationReport:
    """Three-way agreement over every arrow-support pattern plus seeded
    random representations with those supports.

    ``beta_offset`` is a fault-injection hook for the test-suite: it
    corrupts the oracle-side level table so that disagreements are
    provoked and reported with witnesses.
    """
    opts = flow_opts or FlowOpts(tol=1e-6)
    report = VerificationReport(instance=instance_descriptor(name, inst))
    report.seeds = {"seed": seed, "samples": samples}
    spec, sup = quiver.to_torus_spec(inst)
    nv = len(inst.dim)
    model = HermitianModel(inst)
    candidates = _torus_candidates(spec, sup, nv)
    live_arrows = [
        a for a in range(len(inst.quiver.arrows)) if inst.arrow_shape(a) == (1, 1)
    ]

    def run_mask(mask: int) -> list[dict]:
        live = tuple(a for k, a in enumerate(live_arrows) if mask >> k & 1)
        rng = np.random.default_rng(seed * 100003 + mask)
        reps = [("pattern", _abelian_rep(inst, live))]
        for s in range(samples):
            reps.append((f"sample{s}", _abelian_rep(inst, live, rng)))
        out = []
        for tag, rep in reps:
            rec = {
                "point": f"mask{mask}/{tag}",
                "support": list(live),
            }
            tau = quiver.hn_filtration_abelian(rep, inst)
            bw = quiver.beta_of_type(tau, inst)
            hn_levels = quiver.vertex_levels(bw, inst)
            if beta_offset:
                hn_levels = {v: x + beta_offset for v, x in hn_levels.items()}
            idx = torus.classify_point(quiver.abelian_point(rep, inst), spec)
            torus_levels = quiver.torus_vertex_levels(idx.beta, sup)
            rec["hn_tau"] = [list(p) for p in tau.parts]
            rec["hn_beta"] = _levels_key(hn_levels)
            rec["torus_beta"] = _levels_key(torus_levels)
            agree_exact = hn_levels == torus_levels
            rec["agree_hn_torus"] = agree_exact
            flow_res = moment.flow(rep, model, opts)
            rec["flow_converged"] = flow_res.converged
            rec["flow_residual"] = flow_res.residual
            rec["flow_mu_norm"] = flow_res.mu_norm
            rec["monotone"] = flow_res.trajectory_monotone
            rec["max_energy_increase"] = flow_res.max_energy_increase
            if flow_res.converged:
                try:
                    snap = moment.classify_limit(flow_res, model, candidates)
                    rec["flow_beta"] = snap.candidate.label
                    rec["flow_snap_distance"] = snap.distance
                    agree_flow = snap.candidate.label == _levels_key(torus_levels)
                except ClassificationError as exc:
                    rec["flow_beta"] = None
                    rec["flow_error"] = str(exc)
                    agree_flow = False
                rec["agree_flow_exact"] = agree_flow
                rec["status"] = "pass" if (agree_exact and agree_flow) else "fail"
            else:
                rec["flow_beta"] = None
                rec["agree_flow_exact"] = None
                # no flow classification: exact routes must still agree
                rec["status"] = "warn" if agree_exact else "fail"
            out.append(rec)
        return out

    for recs in _ordered_map(run_mask, list(range(1 << len(live_arrows)))):
        for rec in recs:
            report.record(rec.pop("status"), **rec)
    return report


# ---------------------------------------------------------------------------
# generated-certificate verification


def verify_generated_instance(
    inst: QuiverInstance,
    tau: HNType,
    seed: int,
    name: str = "generated",
    flow_opts: FlowOpts | None = None,
    mu_rtol: float = 1e-4,
) -> VerificationReport:
    """Flow a generated representation of certified type and compare the
    limit against the certificate."""
    opts = flow_opts or FlowOpts(tol=1e-4)
    report = VerificationReport(instance=instance_descriptor(name, inst))
    report.seeds = {"seed": seed}
    model = HermitianModel(inst)
    bw = quiver.beta_of_type(tau, inst)
    target = float(np.sqrt(float(bw.norm_sq)))
    gen = quiver.generate_hn_instance(
        tau, inst, seed, block_refiner=moment.block_critical_refiner(inst)
    )
    candidates = [
        Candidate(
            label=",".join(_frac_str(l) for l in quiver.beta_of_type(t, inst).levels),
            pattern=quiver.beta_of_type(t, inst).diagonals,
        )
        for t in quiver.enumerate_hn_types(inst)
    ]
    expected_label = ",".join(_frac_str(l) for l in bw.levels)
    rec = {
        "point": f"tau={list(map(list, tau.parts))}/seed{seed}",
        "certified_tau": [list(p) for p in tau.parts],
        "certified": gen.certified,
        "expected_mu_norm": target,
        "block_rules": [b.rule for b in gen.blocks],
    }
    flow_res = moment.flow(gen.rep, model, opts)
    rec["flow_converged"] = flow_res.converged
    rec["flow_residual"] = flow_res.residual
    rec["flow_mu_norm"] = flow_res.mu_norm
    rec["monotone"] = flow_res.trajectory_monotone
    rec["max_energy_increase"] = flow_res.max_energy_increase
    if not flow_res.converged:
        report.record("warn", **rec)
        return report
    mu_ok = abs(flow_res.mu_norm - target) <= mu_rtol * (1.0 + target)
    try:
        snap = moment.classify_limit(flow_res, model, candidates)
        rec["flow_beta"] = snap.candidate.label
        snap_ok = snap.candidate.pattern == bw.diagonals
    except ClassificationError as exc:
        rec["flow_beta"] = None
        rec["flow_error"] = str(exc)
        snap_ok = False
    rec["agree_mu_norm"] = mu_ok
    rec["agree_snap"] = snap_ok
    report.record("pass" if (mu_ok and snap_ok) else "fail", **rec)
    return report


# ---------------------------------------------------------------------------
# structural verification


def verify_structure(
    inst: QuiverInstance,
    tau: HNType,
    seed: int = 0,
    samples: int = 20,
    name: str = "structure",
) -> VerificationReport:
    """Exact structural checks attached to one type: sign pattern of the
    one-parameter subgroup weights against the block decomposition,
    orthogonality of the twisted character, and (on abelian instances)
    the equivalence of blockwise slope semistability with the twisted
    torus semistability of the core point."""
    report = VerificationReport(instance=instance_descriptor(name, inst))
    report.seeds = {"seed": seed, "samples": samples}
    struct = quiver.block_structure(tau, inst)
    bw = quiver.beta_of_type(tau, inst)
    rng = np.random.default_rng(seed)

    if bw.lam is None:
        report.record(
            "pass",
            point="weights/degenerate",
            note="semistable type: core and attracting sets are the whole space",
        )
    else:
        ok = True
        witness = None
        for a in range(len(inst.quiver.arrows)):
            for (i, j), w in struct.arrow_block_weights(a, bw).items():
                good = (w == 0) if i == j else (w > 0 if i < j else w < 0)
                if not good:
                    ok = False
                    witness = {"arrow": a, "block": [i, j], "weight": w}
        report.record("pass" if ok else "fail", point="weights/sign-pattern", witness=witness)

    ortho_ok = True
    for _ in range(samples):
        lam_blocks = [int(rng.integers(-5, 6)) for _ in tau.parts]
        if all(x == 0 for x in lam_blocks):
            lam_blocks[0] = 1
        lam = tuple(
            tuple(lam_blocks[i] for i, p in enumerate(tau.parts) for _ in range(p[v]))
            for v in range(len(inst.dim))
        )
        coeffs = quiver.rho_lambda(lam, inst)
        pairing = sum(c * x for crow, lrow in zip(coeffs, lam) for c, x in zip(crow, lrow))
        if pairing != 0:
            ortho_ok = False
    report.record("pass" if ortho_ok else "fail", point="twisted-character/orthogonality")

    if inst.abelian and bw.lam is not None:
        _structure_core_semistability(inst, tau, bw, rng, samples, report)
    return report


def _structure_core_semistability(inst, tau, bw, rng, samples, report) -> None:
    """Blockwise slope semistability equals twisted-character torus
    semistability of the core point (abelian instances)."""
    nv = len(inst.dim)
    sup = [v for v in range(nv) if inst.dim[v] == 1]
    block_of = {}
    for v in sup:
        block_of[v] = bw.block_of(v, 0)
    core_arrows = [
        a
        for a in range(len(inst.quiver.arrows))
        if inst.arrow_shape(a) == (1, 1)
        and block_of[inst.quiver.tails[a]] == block_of[inst.quiver.heads[a]]
    ]
    lam = bw.lam
    coeffs = quiver.rho_lambda(lam, inst)
    pos = {v: k for k, v in enumerate(sup)}
    weights: list = []
    windex: dict = {}
    coords = []
    for a in core_arrows:
        t, h = inst.quiver.tails[a], inst.quiver.heads[a]
        chi = [0] * len(sup)
        chi[pos[h]] += 1
        chi[pos[t]] -= 1
        key = tuple(chi)
        if key not in windex:
            windex[key] = len(weights)
            weights.append(key)
        coords.append((f"a{a}", windex[key]))
    if not weights:
        # no core arrows: the core is a point and both sides reduce to the
        # sign of nothing; record the degenerate agreement
        report.record("pass", point="core-semistability/degenerate")
        return
    from .exact import InnerProduct, vec

    spec = torus.TorusActionSpec(
        rank=len(sup),
        weights=tuple(vec(w) for w in weights),
        rho=vec([coeffs[v][0] for v in sup]),
        ip=InnerProduct.diagonal([inst.alpha[v] for v in sup]),
        coordinates=tuple(coords),
    )
    all_ok = True
    witness = None
    for s in range(samples):
        live = tuple(a for a in core_arrows if rng.random() < 0.5)
        rep = _abelian_rep(inst, live, rng if s % 2 else None)
        blocks_ok = True
        for i, part in enumerate(tau.parts):
            keep = frozenset(v for v in sup if part[v] == 1)
            sub_rep, sub_inst = quiver._restrict(rep, inst, keep)
            mu = quiver.slope(part, inst)
            for e in quiver.subrep_candidates_abelian(sub_rep, sub_inst):
                if any(e) and quiver.slope(e, inst) < mu:
                    blocks_ok = False
        point = {f"a{a}": complex(rep.matrices[a][0, 0]) for a in core_arrows}
        twisted = torus.classify_point(point, spec).semistable
        if blocks_ok != twisted:
            all_ok = False
            witness = {"live": list(live), "blockwise": blocks_ok, "twisted": twisted}
    report.record("pass" if all_ok else "fail", point="core-semistability", witness=witness)


# ---------------------------------------------------------------------------
# suite driver


def default_suite_config() -> dict:
    generated = []
    for name, tau_list in {
        "kronecker": [[[1, 1]], [[1, 0], [0, 1]]],
        "kronecker22": [[[1, 0], [1, 1], [0, 1]], [[2, 2]], [[2, 0], [0, 2]]],
        "3kronecker22": [[[1, 0], [1, 1], [0, 1]], [[2, 2]], [[2, 0], [0, 2]]],
        "3kronecker33": [[[2, 0], [1, 1], [0, 2]], [[3, 3]], [[3, 0], [0, 3]]],
        "a2": [[[0, 1], [1, 0]]],
        "a2_22": [[[0, 2], [2, 0]]],
    }.items():
        for tau in tau_list:
            generated.append({"instance": name, "tau": tau, "seeds": [1, 2, 3, 4]})
    structure = [
        {"instance": "kronecker", "tau": [[1, 0], [0, 1]]},
        {"instance": "kronecker", "tau": [[1, 1]]},
        {"instance": "a2", "tau": [[0, 1], [1, 0]]},
        {"instance": "a3", "tau": [[1, 0, 0], [0, 1, 1]]},
        {"instance": "triple", "tau": [[1, 0, 0], [0, 1, 1]]},
        {"instance": "kronecker22", "tau": [[1, 0], [1, 1], [0, 1]]},
        {"instance": "3kronecker33", "tau": [[2, 0], [1, 1], [0, 2]]},
    ]
    return {
        "seed": 20240808,
        "samples": 20,
        "flow": {"tol": 1e-6, "max_steps": 200000, "dt_init": 1e-3},
        "generated_flow": {"tol": 1e-4, "max_steps": 200000, "dt_init": 1e-3},
        "abelian": ["kronecker", "a2", "a3", "triple"],
        "generated": generated,
        "structure": structure,
    }


def _flow_opts_from(cfg: Mapping) -> FlowOpts:
    return FlowOpts(
        tol=float(cfg.get("tol", 1e-6)),
        max_steps=int(cfg.get("max_steps", 200_000)),
        dt_init=float(cfg.get("dt_init", 1e-3)),
    )


def _resolve_instance(ref, bundle) -> tuple[str, QuiverInstance]:
    if isinstance(ref, str):
        if ref not in bundle:
            raise SchemaError(f"instance:{ref}", "unknown bundled instance")
        return ref, bundle[ref]
    if isinstance(ref, Mapping):
        from .serialize import instance_from_dict

        return ref.get("name", "inline"), instance_from_dict(ref)
    raise SchemaError("instance", f"expected name or mapping, got {type(ref).__name__}")


def run_suite(config: Mapping) -> dict:
    """Aggregate verification run; deterministic for fixed config.

    Returns the aggregate report as a JSON-ready dict; the ``summary``
    counts decide the CLI exit status (any fail is a disagreement,
    non-convergences count as warnings).
    """
    if not isinstance(config, Mapping):
        raise SchemaError("config", "expected a mapping")
    for key in ("abelian", "generated", "structure"):
        if key in config and not isinstance(config[key], Sequence):
            raise SchemaError(f"config.{key}", "expected a list")
    bundle = bundled_instances()
    seed = int(config.get("seed", 0))
    samples = int(config.get("samples", 20))
    flow_opts = _flow_opts_from(config.get("flow", {}))
    gen_opts = _flow_opts_from(config.get("generated_flow", {"tol": 1e-4}))
    offset_cfg = config.get("fault_injection", {}).get("beta_offset") if config.get("fault_injection") else None
    beta_offset = Fraction(offset_cfg) if offset_cfg else None

    reports: list[VerificationReport] = []
    for ref in config.get("abelian", []):
        name, inst = _resolve_instance(ref, bundle)
        reports.append(
            verify_abelian_instance(
                inst, name=name, samples=samples, seed=seed, flow_opts=flow_opts, beta_offset=beta_offset
            )
        )
    for job in config.get("generated", []):
        name, inst = _resolve_instance(job["instance"], bundle)
        tau = HNType.of([tuple(p) for p in job["tau"]], inst)
        for s in job.get("seeds", [seed]):
            reports.append(
                verify_generated_instance(inst, tau, int(s), name=name, flow_opts=gen_opts)
            )
    for job in config.get("structure", []):
        name, inst = _resolve_instance(job["instance"], bundle)
        tau = HNType.of([tuple(p) for p in job["tau"]], inst)
        reports.append(verify_structure(inst, tau, seed=seed, samples=samples, name=name))

    total = {"pass": 0, "fail": 0, "warn": 0}
    for rep in reports:
        for k, v in rep.summary.items():
            total[k] += v
    return {
        "reports": [r.to_json_dict() for r in reports],
        "summary": total,
        "versions": {"stratakit": __version__, "numpy": np.__version__},
        "seeds": {"seed": seed, "samples": samples},
    }


def report_json(data: dict) -> str:
    """Canonical JSON for reports: sorted keys, no float mangling."""
    return json.dumps(data, sort_keys=True, indent=2, default=_frac_str)
