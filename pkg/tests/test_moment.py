"""Moment-map numerics: the derived closed form against its defining
property, gradient oracles, flow behaviour, limit classification and the
Kempf-Ness routines."""

import math
from fractions import Fraction

import numpy as np
import pytest

from stratakit import moment as mm
from stratakit.errors import ClassificationError, InputError
from stratakit.quiver import (
    HNType,
    Quiver,
    QuiverInstance,
    QuiverRep,
    beta_of_type,
    generate_hn_instance,
    group_act,
)

SQRT2 = math.sqrt(2.0)


def kronecker(d=(1, 1), theta=(-1, 1), alpha=(1, 1), arrows=2):
    q = Quiver(vertices=("1", "2"), arrows=(("1", "2"),) * arrows)
    return QuiverInstance(quiver=q, dim=d, theta=theta, alpha=alpha)


def mixed_instance():
    q = Quiver(("1", "2", "3"), (("1", "2"), ("1", "2"), ("2", "3"), ("3", "1")))
    return QuiverInstance(q, dim=(2, 2, 1), theta=(1, -2, 2), alpha=(1, 2, 1))


def random_rep(inst, rng):
    return QuiverRep(
        tuple(
            rng.standard_normal(inst.arrow_shape(a)) + 1j * rng.standard_normal(inst.arrow_shape(a))
            for a in range(len(inst.quiver.arrows))
        )
    )


def random_direction(inst, rng):
    out = []
    for d in inst.dim:
        z = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
        out.append(z - z.conj().T)
    return tuple(out)


def random_unitary(inst, rng):
    out = []
    for d in inst.dim:
        z = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
        q, _ = np.linalg.qr(z)
        out.append(q)
    return out


def test_kronecker_moment_closed_form():
    inst = kronecker()
    model = mm.HermitianModel(inst)
    a, b = 0.7 + 0.1j, -0.3 + 0.4j
    rep = QuiverRep.from_lists(inst, [[[a]], [[b]]])
    s = abs(a) ** 2 + abs(b) ** 2
    mv = mm.moment_star(rep, model)
    assert abs(mv.hermitian[0][0, 0] - (-s + 1)) < 1e-12
    assert abs(mv.hermitian[1][0, 0] - (s - 1)) < 1e-12
    zero_theta = kronecker(theta=(0, 0))
    mv0 = mm.moment_star(QuiverRep.zero(zero_theta), mm.HermitianModel(zero_theta))
    assert all(not m.size or np.max(np.abs(m)) == 0 for m in mv0.mu_star)


def test_moment_defining_property():
    # the closed form must reproduce the defining pairing, not be trusted
    inst = mixed_instance()
    model = mm.HermitianModel(inst)
    rng = np.random.default_rng(7)
    rep = random_rep(inst, rng)
    mv = mm.moment_star(rep, model)
    for m in mv.mu_star:
        if m.size:
            assert float(np.max(np.abs(m + m.conj().T))) < 1e-12
    for _ in range(25):
        x = random_direction(inst, rng)
        lhs = mm.lie_inner(mv.mu_star, x, model)
        act = mm.infinitesimal_action(x, rep, model)
        rhs = (mm.hermitian_inner(act, rep.matrices) - mm.character_derivative(x, model)) / (2j * math.pi)
        assert abs(rhs.imag) < 1e-10 * (1 + abs(lhs))
        assert abs(lhs - rhs.real) < 1e-10 * (1 + abs(lhs))


def test_moment_unitary_equivariance():
    inst = mixed_instance()
    model = mm.HermitianModel(inst)
    rng = np.random.default_rng(3)
    rep = random_rep(inst, rng)
    for _ in range(5):
        k = random_unitary(inst, rng)
        moved = mm.moment_star(group_act(k, rep, inst), model)
        base = mm.moment_star(rep, model)
        for v in range(len(inst.dim)):
            expect = k[v] @ base.mu_star[v] @ k[v].conj().T
            assert float(np.max(np.abs(moved.mu_star[v] - expect))) < 1e-10


def test_unitary_action_is_isometry():
    inst = mixed_instance()
    rng = np.random.default_rng(11)
    x, y = random_rep(inst, rng), random_rep(inst, rng)
    for _ in range(5):
        k = random_unitary(inst, rng)
        before = mm.hermitian_inner(x.matrices, y.matrices)
        after = mm.hermitian_inner(group_act(k, x, inst).matrices, group_act(k, y, inst).matrices)
        assert abs(before - after) < 1e-12 * (1 + abs(before))


def test_gradient_matches_finite_differences():
    inst = mixed_instance()
    model = mm.HermitianModel(inst)
    rng = np.random.default_rng(19)
    h = 1e-5
    for _ in range(20):
        rep = random_rep(inst, rng)
        grad = mm.grad_norm_sq(rep, model)
        z = tuple(rng.standard_normal(m.shape) + 1j * rng.standard_normal(m.shape) for m in rep.matrices)
        plus = mm.mu_norm_sq(QuiverRep(tuple(m + h * d for m, d in zip(rep.matrices, z))), model)
        minus = mm.mu_norm_sq(QuiverRep(tuple(m - h * d for m, d in zip(rep.matrices, z))), model)
        fd = (plus - minus) / (2 * h)
        assert abs(fd - mm.metric_pairing(grad, z)) < 1e-6 * (1 + abs(fd))


def test_gradient_vanishes_at_critical_points():
    inst = kronecker()
    model = mm.HermitianModel(inst)
    crit = QuiverRep.from_lists(inst, [[[0.6]], [[0.8]]])
    grad = mm.grad_norm_sq(crit, model)
    assert mm.hermitian_norm(grad) < 1e-12


def test_flow_kronecker_cases():
    inst = kronecker()
    model = mm.HermitianModel(inst)
    # on the unit circle: immediate convergence
    res = mm.flow(QuiverRep.from_lists(inst, [[[1.0]], [[0.0]]]), model)
    assert res.converged and res.steps == 0 and res.mu_norm < 1e-10
    # generic nonzero point flows to the moment zero level
    res = mm.flow(QuiverRep.from_lists(inst, [[[2.0 + 1.0j]], [[0.3]]]), model)
    assert res.converged and res.mu_norm < 1e-8 and res.trajectory_monotone
    # the origin is critical with norm square 2
    res = mm.flow(QuiverRep.zero(inst), model)
    assert res.converged and abs(res.mu_norm**2 - 2.0) < 1e-12


def test_flow_rejects_bad_tolerance():
    inst = kronecker()
    with pytest.raises(InputError):
        mm.flow(QuiverRep.zero(inst), mm.HermitianModel(inst), mm.FlowOpts(tol=0.0))


def test_flow_is_unitarily_equivariant():
    inst = kronecker(d=(2, 2), arrows=3)
    model = mm.HermitianModel(inst)
    rng = np.random.default_rng(23)
    rep = random_rep(inst, rng)
    opts = mm.FlowOpts(tol=5e-9)
    base = mm.flow(rep, model, opts)
    k = random_unitary(inst, rng)
    moved = mm.flow(group_act(k, rep, inst), model, opts)
    assert base.converged and moved.converged
    for p, q in zip(mm.eigen_pattern(base.limit, model), mm.eigen_pattern(moved.limit, model)):
        assert max(abs(x - y) for x, y in zip(p, q)) < 1e-8 if p else True


def test_classify_limit_kronecker():
    inst = kronecker()
    model = mm.HermitianModel(inst)
    cands = [
        mm.Candidate(label="ss", pattern=((Fraction(0),), (Fraction(0),))),
        mm.Candidate(label="origin", pattern=((Fraction(1),), (Fraction(-1),))),
    ]
    res = mm.flow(QuiverRep.zero(inst), model)
    snap = mm.classify_limit(res, model, cands)
    assert snap.candidate.label == "origin"
    assert snap.gap == pytest.approx(SQRT2)
    res = mm.flow(QuiverRep.from_lists(inst, [[[1.5]], [[0.2j]]]), model)
    assert mm.classify_limit(res, model, cands).candidate.label == "ss"


def test_classify_limit_failure_cases():
    inst = kronecker()
    model = mm.HermitianModel(inst)
    cands = [
        mm.Candidate(label="ss", pattern=((Fraction(0),), (Fraction(0),))),
        mm.Candidate(label="origin", pattern=((Fraction(1),), (Fraction(-1),))),
    ]
    res = mm.flow(QuiverRep.from_lists(inst, [[[2.0]], [[0.0]]]), model, mm.FlowOpts(tol=1e-8, max_steps=3))
    assert not res.converged
    with pytest.raises(InputError):
        mm.classify_limit(res, model, cands)
    # a state halfway between the two candidate levels cannot be snapped
    halfway = QuiverRep.from_lists(inst, [[[math.sqrt(0.5)]], [[0.0]]])
    fake = mm.FlowResult(
        limit=halfway, steps=0, residual=0.0, mu_norm=0.0, converged=True,
        trajectory_monotone=True, max_energy_increase=0.0,
    )
    with pytest.raises(ClassificationError):
        mm.classify_limit(fake, model, cands)


def test_generated_instance_flows_to_certified_level():
    inst = kronecker(d=(2, 2), arrows=3)
    model = mm.HermitianModel(inst)
    tau = HNType.of(((1, 0), (1, 1), (0, 1)), inst)
    bw = beta_of_type(tau, inst)
    gen = generate_hn_instance(tau, inst, seed=5, block_refiner=mm.block_critical_refiner(inst))
    res = mm.flow(gen.rep, model, mm.FlowOpts(tol=1e-4))
    target = math.sqrt(float(bw.norm_sq))
    assert res.converged
    assert abs(res.mu_norm - target) <= 1e-4 * (1 + target)


def test_kempf_ness_value_and_gradient():
    inst = mixed_instance()
    model = mm.HermitianModel(inst)
    rng = np.random.default_rng(40)
    rep = random_rep(inst, rng)
    zero = tuple(np.zeros((d, d), dtype=complex) for d in inst.dim)
    v0 = mm.kempf_ness_value(rep, model, zero)
    assert v0 == pytest.approx(
        float(mm.hermitian_inner(rep.matrices, rep.matrices).real) / (4 * math.pi)
    )
    h = 1e-5
    for _ in range(10):
        a = tuple(0.4 * x for x in random_direction(inst, rng))
        b = random_direction(inst, rng)
        grad = mm.kn_gradient(rep, model, a)
        plus = mm.kn_value_along(rep, model, a, b, h)
        minus = mm.kn_value_along(rep, model, a, b, -h)
        fd = (plus - minus) / (2 * h)
        predicted = mm.lie_inner(grad, b, model)
        assert abs(fd - predicted) < 1e-6 * (1 + abs(fd))
        # convexity along the same curves
        mid = mm.kn_value_along(rep, model, a, b, 0.0)
        second = (plus - 2 * mid + minus) / h**2
        assert second >= -1e-8


def test_kn_minimize_polystable_point():
    inst = kronecker()
    model = mm.HermitianModel(inst)
    rep = QuiverRep.from_lists(inst, [[[2.0]], [[0.0]]])
    out = mm.kn_minimize(rep, model)
    assert out.status == "converged"
    moved = group_act(list(mm.group_exp(out.minimizer)), rep, inst)
    assert math.sqrt(mm.mu_norm_sq(moved, model)) < 1e-6


def test_kn_minimize_detects_unbounded_descent():
    # the origin with a nontrivial character: the orbit is a point and the
    # value decreases linearly forever
    inst = kronecker()
    model = mm.HermitianModel(inst)
    out = mm.kn_minimize(QuiverRep.zero(inst), model, mm.KNOpts(max_iters=4000))
    assert out.status == "diverging"
    assert out.grad_norm == pytest.approx(SQRT2, rel=1e-9)


def test_weight_formula_consistency():
    inst = kronecker()
    model = mm.HermitianModel(inst)
    a, b = 1.1 - 0.2j, 0.4 + 0.9j
    rep = QuiverRep.from_lists(inst, [[[a]], [[b]]])
    s = abs(a) ** 2 + abs(b) ** 2
    direct, by_weights = mm.weight_formula_check(rep, model, ((1,), (-1,)))
    assert direct == pytest.approx(by_weights, rel=1e-12)
    assert direct == pytest.approx(-2 * s + 2, rel=1e-12)
    # arrow weight (chi, lam) = lam_2 - lam_1 = 2 and (rho, lam) = 2
    direct, by_weights = mm.weight_formula_check(rep, model, ((-1,), (1,)))
    assert direct == pytest.approx(by_weights, rel=1e-12)
    assert direct == pytest.approx(2 * s - 2, rel=1e-12)


def test_weight_formula_random():
    inst = mixed_instance()
    model = mm.HermitianModel(inst)
    rng = np.random.default_rng(55)
    for _ in range(30):
        rep = random_rep(inst, rng)
        lam = tuple(tuple(int(rng.integers(-3, 4)) for _ in range(d)) for d in inst.dim)
        direct, by_weights = mm.weight_formula_check(rep, model, lam)
        assert abs(direct - by_weights) < 1e-10 * (1 + abs(direct))


def test_group_exp_overflow_raises():
    inst = kronecker()
    model = mm.HermitianModel(inst)
    huge = tuple(np.array([[-2000j]]) for _ in range(2))  # exp(2000) overflows
    with pytest.raises(mm.NumericError):
        mm.kempf_ness_value(QuiverRep.zero(inst), model, huge)


def test_unstable_limit_depth_matches_integer_oracle():
    # for converged unstable abelian limits, the brute-force normalised
    # pairing minimum equals minus the limit's moment norm
    from _oracles import integer_box_min_ray
    from stratakit import quiver as qv
    from stratakit import torus

    a3 = QuiverInstance(
        Quiver(("1", "2", "3"), (("1", "2"), ("2", "3"))), (1, 1, 1), (-1, 0, 1), (1, 1, 1)
    )
    cases = [
        (kronecker(), ()),                      # the origin
        (kronecker(theta=(-2, 2), alpha=(1, 2)), ()),
        (a3, (0,)),                             # unstable proper support
    ]
    for inst, live in cases:
        model = mm.HermitianModel(inst)
        mats = []
        for a in range(len(inst.quiver.arrows)):
            v = 1.0 if a in live else 0.0
            mats.append([[v]])
        rep = QuiverRep.from_lists(inst, mats)
        spec, _ = qv.to_torus_spec(inst)
        sup = torus.support_weights(qv.abelian_point(rep, inst), spec)
        gens = [spec.embedded_weights[i] for i in sup]
        got = integer_box_min_ray(gens, spec.embedded_rho, spec.ip, box=12)
        assert got is not None
        p, q, _lam = got
        depth = -float(p) / math.sqrt(float(q))
        assert depth > 0  # certified unstable
        res = mm.flow(rep, model, mm.FlowOpts(tol=1e-8))
        assert res.converged
        assert abs(res.mu_norm - depth) < 1e-6


def test_infinitesimal_action_vanishes_at_unstable_limit():
    inst = kronecker(arrows=3, d=(2, 2))
    model = mm.HermitianModel(inst)
    tau = HNType.of(((1, 0), (1, 1), (0, 1)), inst)
    gen = generate_hn_instance(tau, inst, seed=2, block_refiner=mm.block_critical_refiner(inst))
    res = mm.flow(gen.rep, model, mm.FlowOpts(tol=1e-8, max_steps=100_000))
    assert res.converged
    mv = mm.moment_star(res.limit, model)
    assert math.sqrt(mm.mu_norm_sq(res.limit, model)) > 1.0  # nonminimal limit
    action = mm.infinitesimal_action(mv.mu_star, res.limit, model)
    assert mm.hermitian_norm(action) < 1e-8


def test_weight_formula_lower_bound_when_limit_exists():
    # nonnegative weights on the support imply the pairing dominates the
    # character term
    inst = kronecker()
    model = mm.HermitianModel(inst)
    rep = QuiverRep.from_lists(inst, [[[0.9]], [[1.3]]])
    lam = ((-1,), (1,))  # arrow weight (chi, lam) = 2 >= 0
    direct, _ = mm.weight_formula_check(rep, model, lam)
    pairing = sum(inst.theta[v] * sum(lam[v]) for v in range(2))
    assert direct >= -pairing - 1e-12
