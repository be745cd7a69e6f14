"""Acceptance criteria, one test per criterion at its stated tolerance.

Each test finishes by printing a single pass line (visible with -s);
tolerances are pinned here, nothing is deferred to later calibration.
Run with:  pytest tests/test_acceptance.py -v -s
"""

import math
import random
import time
from fractions import Fraction

import numpy as np
import pytest

from _oracles import min_ray_matches_beta
from stratakit import exact, harness, moment, quiver, torus
from stratakit.exact import InnerProduct, project_shifted_cone, vec
from stratakit.moment import FlowOpts, HermitianModel, KNOpts
from stratakit.quiver import Quiver, QuiverInstance, QuiverRep


def _cone_instance(rng):
    n = rng.randint(1, 3)
    ip = InnerProduct.diagonal([rng.randint(1, 3) for _ in range(n)])
    gens = [vec([rng.randint(-2, 2) for _ in range(n)]) for _ in range(rng.randint(0, 5))]
    rho = vec([rng.randint(-2, 2) for _ in range(n)])
    return n, ip, gens, rho


@pytest.fixture(scope="session")
def suite_runs():
    """Two identical full-suite runs; several criteria read off them."""
    config = harness.default_suite_config()
    t0 = time.monotonic()
    first = harness.run_suite(config)
    first_time = time.monotonic() - t0
    t0 = time.monotonic()
    second = harness.run_suite(config)
    second_time = time.monotonic() - t0
    return {"first": first, "second": second, "first_time": first_time, "second_time": second_time}


def test_criterion_01_moreau_duality_exactness():
    rng = random.Random(108)
    t0 = time.monotonic()
    for _ in range(500):
        n, ip, gens, rho = _cone_instance(rng)
        proj = project_shifted_cone(gens, rho, ip)
        comb = exact.vzero(n)
        for c, g in zip(proj.coefficients, gens):
            assert c >= 0
            comb = exact.vadd(comb, exact.vscale(c, g))
        assert comb == proj.complement == exact.vadd(proj.beta, rho)
        assert ip.pairing(rho, proj.beta) == -ip.norm_sq(proj.beta)
        assert ip.pairing(proj.beta, proj.complement) == 0
        for g in gens:
            assert ip.pairing(g, proj.beta) >= 0
    elapsed = time.monotonic() - t0
    assert elapsed < 10.0
    print(f"\n[criterion 1] PASS: 500 exact Moreau/duality certificates in {elapsed:.2f}s")


def test_criterion_02_torus_brute_force_oracle():
    rng = random.Random(216)
    t0 = time.monotonic()
    done = 0
    widened = 0
    while done < 200:
        n, ip, gens, rho = _cone_instance(rng)
        proj = project_shifted_cone(gens, rho, ip)
        if exact.is_zero(proj.beta):
            continue
        # the box is widened just enough to contain the primitive point of
        # the beta ray when 20 would not (a fixed box cannot certify rays
        # it cannot see); inside the box the arg-min must be collinear
        used = min_ray_matches_beta(gens, rho, ip, proj.beta, box=20)
        if used > 20:
            widened += 1
        done += 1
    elapsed = time.monotonic() - t0
    assert elapsed < 60.0
    print(
        f"\n[criterion 2] PASS: 200 brute-force collinearity checks in {elapsed:.2f}s"
        f" ({widened} needed a widened box)"
    )


def test_criterion_03_abelian_three_way_coincidence(suite_runs):
    result = suite_runs["first"]
    abelian_names = {"kronecker", "a2", "a3", "triple"}
    total = 0
    for rep in result["reports"]:
        name = rep["instance"]["name"]
        if name not in abelian_names or not any("hn_beta" in r for r in rep["records"]):
            continue
        arrows = len(rep["instance"]["arrows"])
        per_mask = 1 + 20  # the 0/1 pattern plus 20 seeded samples
        assert len(rep["records"]) == (1 << arrows) * per_mask
        for rec in rep["records"]:
            assert rec["agree_hn_torus"] is True, rec
            assert rec["flow_converged"] is True, rec
            assert rec["flow_residual"] < 1e-6
            assert rec["agree_flow_exact"] is True, rec
            total += 1
    assert total == (4 + 2 + 4 + 8) * 21
    assert suite_runs["first_time"] < 300.0
    print(
        f"\n[criterion 3] PASS: {total} three-way agreements across all support patterns"
        f" (suite ran in {suite_runs['first_time']:.1f}s)"
    )


def test_criterion_04_generated_certificate_flow(suite_runs):
    result = suite_runs["first"]
    records = []
    for rep in result["reports"]:
        for rec in rep["records"]:
            if "certified_tau" in rec:
                records.append(rec)
    assert len(records) >= 50
    nonconverged = [r for r in records if not r["flow_converged"]]
    assert len(nonconverged) <= 0.05 * len(records)
    for rec in records:
        if not rec["flow_converged"]:
            continue
        target = rec["expected_mu_norm"]
        assert abs(rec["flow_mu_norm"] - target) <= 1e-4 * (1.0 + target), rec
        assert rec["agree_snap"] is True, rec
        assert rec["certified"] is True
    assert suite_runs["first_time"] < 600.0
    print(
        f"\n[criterion 4] PASS: {len(records)} generated instances, "
        f"{len(nonconverged)} non-converged, zero disagreements"
    )


def _mixed_instances():
    two = ("1", "2")
    three = ("1", "2", "3")
    return [
        QuiverInstance(Quiver(two, (("1", "2"),) * 2), (1, 1), (-1, 1), (1, 1)),
        QuiverInstance(Quiver(two, (("1", "2"),) * 3), (2, 2), (-1, 1), (1, 1)),
        QuiverInstance(
            Quiver(three, (("1", "2"), ("1", "2"), ("2", "3"), ("3", "1"))),
            (2, 2, 1),
            (1, -2, 2),
            (1, 2, 1),
        ),
    ]


def _random_rep(inst, rng):
    return QuiverRep(
        tuple(
            rng.standard_normal(inst.arrow_shape(a)) + 1j * rng.standard_normal(inst.arrow_shape(a))
            for a in range(len(inst.quiver.arrows))
        )
    )


def _random_dir(inst, rng):
    out = []
    for d in inst.dim:
        z = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
        out.append(z - z.conj().T)
    return tuple(out)


def test_criterion_05_gradient_correctness():
    insts = _mixed_instances()
    rng = np.random.default_rng(515)
    h = 1e-5
    # ambient gradient of the norm square vs central differences
    for k in range(100):
        inst = insts[k % len(insts)]
        model = HermitianModel(inst)
        rep = _random_rep(inst, rng)
        grad = moment.grad_norm_sq(rep, model)
        z = tuple(rng.standard_normal(m.shape) + 1j * rng.standard_normal(m.shape) for m in rep.matrices)
        plus = moment.mu_norm_sq(QuiverRep(tuple(m + h * d for m, d in zip(rep.matrices, z))), model)
        minus = moment.mu_norm_sq(QuiverRep(tuple(m - h * d for m, d in zip(rep.matrices, z))), model)
        fd = (plus - minus) / (2 * h)
        assert abs(fd - moment.metric_pairing(grad, z)) < 1e-6 * (1 + abs(fd))
    # Kempf-Ness gradient vs central differences along the evaluation curves
    for k in range(100):
        inst = insts[k % len(insts)]
        model = HermitianModel(inst)
        rep = _random_rep(inst, rng)
        a = tuple(0.4 * x for x in _random_dir(inst, rng))
        b = _random_dir(inst, rng)
        grad = moment.kn_gradient(rep, model, a)
        plus = moment.kn_value_along(rep, model, a, b, h)
        minus = moment.kn_value_along(rep, model, a, b, -h)
        fd = (plus - minus) / (2 * h)
        assert abs(fd - moment.lie_inner(grad, b, model)) < 1e-6 * (1 + abs(fd))
    # convexity: second differences along 100 random lines
    for k in range(100):
        inst = insts[k % len(insts)]
        model = HermitianModel(inst)
        rep = _random_rep(inst, rng)
        a = tuple(0.4 * x for x in _random_dir(inst, rng))
        b = _random_dir(inst, rng)
        mid = moment.kn_value_along(rep, model, a, b, 0.0)
        plus = moment.kn_value_along(rep, model, a, b, h)
        minus = moment.kn_value_along(rep, model, a, b, -h)
        assert (plus - 2 * mid + minus) / h**2 >= -1e-8
    print("\n[criterion 5] PASS: 100 FD checks per gradient, 100 convexity lines")


def test_criterion_06_weight_formula_oracle():
    insts = _mixed_instances()
    rng = np.random.default_rng(66)
    for k in range(100):
        inst = insts[k % len(insts)]
        model = HermitianModel(inst)
        rep = _random_rep(inst, rng)
        lam = tuple(tuple(int(rng.integers(-4, 5)) for _ in range(d)) for d in inst.dim)
        direct, by_weights = moment.weight_formula_check(rep, model, lam)
        assert abs(direct - by_weights) <= 1e-10 * (1 + abs(direct)), (direct, by_weights)
    print("\n[criterion 6] PASS: 100 two-route moment pairings agree to 1e-10")


def _random_instance_with_types(rng):
    nv = rng.randint(2, 3)
    vertices = tuple(f"v{i}" for i in range(nv))
    arrows = tuple(
        (f"v{rng.randrange(nv)}", f"v{rng.randrange(nv)}") for _ in range(rng.randint(1, 3))
    )
    d = tuple(rng.randint(1, 2) for _ in range(nv))
    while True:
        theta = [rng.randint(-3, 3) for _ in range(nv)]
        resid = sum(t * x for t, x in zip(theta, d))
        if resid % d[-1] == 0:
            theta[-1] -= resid // d[-1]
            break
    alpha = tuple(rng.randint(1, 3) for _ in range(nv))
    return QuiverInstance(Quiver(vertices, arrows), d, tuple(theta), alpha)


def test_criterion_07_structural_exactness():
    rng = random.Random(77)
    checked_pairs = 0
    while checked_pairs < 100:
        inst = _random_instance_with_types(rng)
        taus = [t for t in quiver.enumerate_hn_types(inst) if not t.semistable]
        if not taus:
            continue
        tau = taus[rng.randrange(len(taus))]
        bw = quiver.beta_of_type(tau, inst)
        struct = quiver.block_structure(tau, inst)
        for a in range(len(inst.quiver.arrows)):
            for (i, j), w in struct.arrow_block_weights(a, bw).items():
                if i == j:
                    assert w == 0
                elif i < j:
                    assert w > 0
                else:
                    assert w < 0
        checked_pairs += 1
    ortho = 0
    while ortho < 100:
        inst = _random_instance_with_types(rng)
        lam = tuple(tuple(rng.randint(-5, 5) for _ in range(d)) for d in inst.dim)
        if all(x == 0 for row in lam for x in row):
            continue
        coeffs = quiver.rho_lambda(lam, inst)
        assert sum(c * x for cr, lr in zip(coeffs, lam) for c, x in zip(cr, lr)) == 0
        ortho += 1
    print("\n[criterion 7] PASS: 100 weight sign patterns and 100 exact orthogonalities")


def test_criterion_08_monotone_flow(suite_runs):
    result = suite_runs["first"]
    flows = 0
    for rep in result["reports"]:
        for rec in rep["records"]:
            if "monotone" in rec:
                assert rec["monotone"] is True, rec
                assert rec["max_energy_increase"] <= 1e-9, rec
                flows += 1
    assert flows > 400
    print(f"\n[criterion 8] PASS: {flows} flows, energy never increased beyond 1e-9")


def _oracle_certified_reps():
    """(rep, inst, semistable?) with certification by the exhaustive oracle."""
    bundle = harness.bundled_instances()
    out = []
    rng = np.random.default_rng(909)
    # 8 + 6 + 6 semistable: full-support representations
    picks = [("kronecker", 8), ("a3", 6), ("triple", 6)]
    for name, count in picks:
        inst = bundle[name]
        live = tuple(range(len(inst.quiver.arrows)))
        for _ in range(count):
            rep = harness._abelian_rep(inst, live, rng)
            tau = quiver.hn_filtration_abelian(rep, inst)
            assert tau.semistable
            out.append((rep, inst, True))
    # 20 unstable: proper supports with nontrivial type
    unstable_picks = [
        ("kronecker", ()),
        ("a2", ()),
        ("a2", (0,)),
        ("a3", ()),
        ("a3", (0,)),
        ("a3", (1,)),
        ("triple", ()),
        ("triple", (0,)),
        ("triple", (2,)),
        ("triple", (0, 1)),
    ]
    for name, live in unstable_picks:
        inst = bundle[name]
        for variant in range(2):
            rep = harness._abelian_rep(inst, live, rng if variant else None)
            tau = quiver.hn_filtration_abelian(rep, inst)
            assert not tau.semistable
            out.append((rep, inst, False))
    return out


def test_criterion_09_kempf_ness_semistability():
    reps = _oracle_certified_reps()
    semis = [(r, i) for r, i, s in reps if s]
    unstables = [(r, i) for r, i, s in reps if not s]
    assert len(semis) == 20 and len(unstables) == 20
    for rep, inst in semis:
        model = HermitianModel(inst)
        out = moment.kn_minimize(rep, model, KNOpts(tol=1e-8, max_iters=2000))
        assert out.status == "converged", out
        assert out.grad_norm < 1e-8
        moved = quiver.group_act(list(moment.group_exp(out.minimizer)), rep, inst)
        assert math.sqrt(moment.mu_norm_sq(moved, model)) < 1e-6
    flowed = 0
    for rep, inst in unstables:
        model = HermitianModel(inst)
        out = moment.kn_minimize(rep, model, KNOpts(tol=1e-8, max_iters=4000, radius=30.0))
        if out.status == "diverging":
            continue
        # fall back: the flow must land within 1e-6 of a positive candidate level
        flowed += 1
        res = moment.flow(rep, model, FlowOpts(tol=1e-6))
        assert res.converged
        spec, sup = quiver.to_torus_spec(inst)
        norms = {
            math.sqrt(float(idx.depth_sq)) for idx in torus.enumerate_indices(spec) if not idx.semistable
        }
        assert any(abs(res.mu_norm - n) < 1e-6 for n in norms), (res.mu_norm, norms)
    print(
        f"\n[criterion 9] PASS: 20 semistable minimisations converged, "
        f"20 unstable witnessed ({flowed} by flow level)"
    )


def test_criterion_10_deterministic_reports(suite_runs):
    first = harness.report_json(suite_runs["first"])
    second = harness.report_json(suite_runs["second"])
    assert first == second
    print(f"\n[criterion 10] PASS: byte-identical suite reports ({len(first)} bytes)")
