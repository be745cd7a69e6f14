"""Moment map numerics: shifted moment map, norm-square gradient flow,
Kempf-Ness minimisation and critical-limit classification.

Conventions.  The symplectic form is Im H / pi and the compact-group
inner product is the alpha-weighted trace form (x, y) = sum_v alpha_v *
(-1/(4 pi^2)) tr(x_v y_v) on anti-Hermitian tuples.  With these choices
the shifted moment map, transported to the Lie algebra, has the closed
form

    mu*_v = (2 pi / alpha_v) * i * M_v,
    M_v   = sum_{head(a)=v} phi_a phi_a^dag
          - sum_{tail(a)=v} phi_a^dag phi_a - theta_v * Id,

which is re-derived from the defining pairing property in the test-suite
rather than trusted: (mu*(phi), x)_alpha must equal
(H(x . phi, phi) - dρ(x)) / (2 pi i) for random directions x.  Every
assertable quantity below (norm square, eigenvalue patterns, directional
derivatives) is free of pi: the norm square is sum_v tr(M_v^2)/alpha_v
and limit eigenvalue patterns are those of M_v/alpha_v.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

import numpy as np

from .errors import ClassificationError, InputError, NumericError
from .quiver import QuiverInstance, QuiverRep, group_act, validate_rep

TWO_PI = 2.0 * math.pi


class HermitianModel:
    """Ambient data for the numerics of one quiver instance.

    ``theta`` may be overridden with real values; this shifts the moment
    map by a central direction and is how semistable blocks are flowed to
    their slope-balanced critical points.
    """

    def __init__(self, inst: QuiverInstance, theta: Sequence[float] | None = None):
        self.inst = inst
        self.heads = inst.quiver.heads
        self.tails = inst.quiver.tails
        self.alpha = inst.alpha
        self.theta = tuple(float(t) for t in (inst.theta if theta is None else theta))
        self.dims = inst.dim

    @property
    def vertex_count(self) -> int:
        return len(self.dims)

    @property
    def arrow_count(self) -> int:
        return len(self.heads)


Matrices = tuple[np.ndarray, ...]


def hermitian_inner(x: Sequence[np.ndarray], y: Sequence[np.ndarray]) -> complex:
    """H(x, y) = sum_a tr(x_a y_a^dag)."""
    return sum(complex(np.sum(xa * ya.conj())) for xa, ya in zip(x, y))


def hermitian_norm(x: Sequence[np.ndarray]) -> float:
    return math.sqrt(sum(float(np.sum(np.abs(xa) ** 2)) for xa in x))


def lie_inner(x: Sequence[np.ndarray], y: Sequence[np.ndarray], model: HermitianModel) -> float:
    """Invariant inner product on anti-Hermitian tuples."""
    total = 0.0
    for v in range(model.vertex_count):
        if x[v].size:
            total += model.alpha[v] * (-1.0 / (4.0 * math.pi**2)) * float(np.trace(x[v] @ y[v]).real)
    return total


def lie_norm(x: Sequence[np.ndarray], model: HermitianModel) -> float:
    return math.sqrt(max(lie_inner(x, x, model), 0.0))


def infinitesimal_action(x: Sequence[np.ndarray], rep: QuiverRep, model: HermitianModel) -> Matrices:
    """x . phi per arrow: x_head phi_a - phi_a x_tail."""
    return tuple(
        x[model.heads[a]] @ m - m @ x[model.tails[a]] for a, m in enumerate(rep.matrices)
    )


def character_derivative(x: Sequence[np.ndarray], model: HermitianModel) -> complex:
    """dρ(x) = sum_v theta_v tr(x_v) (valued in i R on anti-Hermitian input)."""
    return sum(model.theta[v] * complex(np.trace(x[v])) for v in range(model.vertex_count) if x[v].size)


@dataclass(frozen=True)
class MomentValue:
    """Transported moment map value mu* together with its Hermitian parts
    M_v = alpha_v/(2 pi) * (-i) mu*_v."""

    mu_star: Matrices
    hermitian: Matrices


def moment_matrices(rep: QuiverRep, model: HermitianModel) -> Matrices:
    out = []
    for v in range(model.vertex_count):
        d = model.dims[v]
        m = -model.theta[v] * np.eye(d, dtype=np.complex128)
        out.append(m)
    for a, phi in enumerate(rep.matrices):
        if phi.size:
            out[model.heads[a]] = out[model.heads[a]] + phi @ phi.conj().T
            out[model.tails[a]] = out[model.tails[a]] - phi.conj().T @ phi
    return tuple(out)


def moment_star(rep: QuiverRep, model: HermitianModel) -> MomentValue:
    validate_rep(rep, model.inst)
    herm = moment_matrices(rep, model)
    mu = tuple((TWO_PI / model.alpha[v]) * 1j * herm[v] for v in range(model.vertex_count))
    return MomentValue(mu_star=mu, hermitian=herm)


def mu_norm_sq(rep: QuiverRep, model: HermitianModel) -> float:
    """|mu(phi)|^2 = sum_v tr(M_v^2)/alpha_v; all pi factors cancel."""
    herm = moment_matrices(rep, model)
    return sum(float(np.sum(np.abs(m) ** 2)) / model.alpha[v] for v, m in enumerate(herm))


def grad_norm_sq(rep: QuiverRep, model: HermitianModel) -> Matrices:
    """Gradient vector field of the moment-map norm square: per arrow
    -2i (mu*_head phi_a - phi_a mu*_tail)."""
    mv = moment_star(rep, model)
    act = infinitesimal_action(mv.mu_star, rep, model)
    return tuple(-2j * m for m in act)


def metric_pairing(x: Sequence[np.ndarray], y: Sequence[np.ndarray]) -> float:
    """Riemannian metric on the representation space, Re H / pi; this is
    the pairing under which grad_norm_sq is the gradient."""
    return float(hermitian_inner(x, y).real) / math.pi


@dataclass(frozen=True)
class FlowOpts:
    tol: float = 1e-8
    max_steps: int = 200_000
    dt_init: float = 1e-3
    energy_slack: float = 1e-9
    step_rtol: float = 1e-7
    dt_min: float = 1e-14


@dataclass(frozen=True)
class FlowResult:
    limit: QuiverRep
    steps: int
    residual: float
    mu_norm: float
    converged: bool
    trajectory_monotone: bool
    max_energy_increase: float
    classified: object | None = None


def _rhs(mats: Matrices, model: HermitianModel) -> Matrices:
    """Negative gradient of the norm square at the given arrow matrices."""
    out_h = []
    for v in range(model.vertex_count):
        m = -model.theta[v] * np.eye(model.dims[v], dtype=np.complex128)
        out_h.append(m)
    for a, phi in enumerate(mats):
        if phi.size:
            out_h[model.heads[a]] = out_h[model.heads[a]] + phi @ phi.conj().T
            out_h[model.tails[a]] = out_h[model.tails[a]] - phi.conj().T @ phi
    scale = [TWO_PI / model.alpha[v] for v in range(model.vertex_count)]
    # -grad = 2i mu*_head phi - 2i phi mu*_tail with mu* = scale * i * M
    return tuple(
        -2.0 * (scale[model.heads[a]] * out_h[model.heads[a]] @ phi - scale[model.tails[a]] * phi @ out_h[model.tails[a]])
        for a, phi in enumerate(mats)
    )


def _rk4(mats: Matrices, h: float, model: HermitianModel) -> Matrices:
    k1 = _rhs(mats, model)
    k2 = _rhs(tuple(m + 0.5 * h * k for m, k in zip(mats, k1)), model)
    k3 = _rhs(tuple(m + 0.5 * h * k for m, k in zip(mats, k2)), model)
    k4 = _rhs(tuple(m + h * k for m, k in zip(mats, k3)), model)
    return tuple(
        m + (h / 6.0) * (a + 2.0 * b + 2.0 * c + d) for m, a, b, c, d in zip(mats, k1, k2, k3, k4)
    )


def _energy(mats: Matrices, model: HermitianModel) -> float:
    herm = []
    for v in range(model.vertex_count):
        herm.append(-model.theta[v] * np.eye(model.dims[v], dtype=np.complex128))
    for a, phi in enumerate(mats):
        if phi.size:
            herm[model.heads[a]] = herm[model.heads[a]] + phi @ phi.conj().T
            herm[model.tails[a]] = herm[model.tails[a]] - phi.conj().T @ phi
    return sum(float(np.sum(np.abs(m) ** 2)) / model.alpha[v] for v, m in enumerate(herm))


def flow(rep: QuiverRep, model: HermitianModel, opts: FlowOpts = FlowOpts()) -> FlowResult:
    """Negative gradient flow of the norm square, integrated by classical
    RK4 with step-doubling error control.

    A step is accepted only if the step-doubling error estimate is small
    and the energy does not increase beyond the configured slack (the
    exact flow is non-increasing); the run stops when the ambient
    gradient norm drops below tol or the step budget is exhausted.
    """
    if opts.tol <= 0:
        raise InputError("tolerance must be positive")
    validate_rep(rep, model.inst)
    mats = tuple(np.array(m) for m in rep.matrices)
    energy = _energy(mats, model)
    h = opts.dt_init
    steps = 0
    max_increase = 0.0
    converged = False
    residual = hermitian_norm(_rhs(mats, model))
    while True:
        residual = hermitian_norm(_rhs(mats, model))
        if residual < opts.tol:
            converged = True
            break
        if steps >= opts.max_steps:
            break
        accepted = False
        while not accepted:
            full = _rk4(mats, h, model)
            mid = _rk4(mats, 0.5 * h, model)
            half = _rk4(mid, 0.5 * h, model)
            scale_ref = 1.0 + max(hermitian_norm(half), hermitian_norm(mats))
            err = (
                math.sqrt(sum(float(np.sum(np.abs(f - s) ** 2)) for f, s in zip(full, half)))
                / scale_ref
            )
            if not all(np.all(np.isfinite(m)) for m in half):
                if h <= opts.dt_min:
                    raise NumericError("flow integration produced a non-finite state")
                h *= 0.25
                continue
            new_energy = _energy(half, model)
            if err <= opts.step_rtol and new_energy <= energy + opts.energy_slack:
                max_increase = max(max_increase, new_energy - energy)
                mats = half
                energy = new_energy
                accepted = True
                if err < opts.step_rtol / 40.0:
                    h = min(h * 2.0, 1.0)
            else:
                h *= 0.5
                if h < opts.dt_min:
                    # cannot advance without breaking monotonicity: report as is
                    return FlowResult(
                        limit=QuiverRep(mats),
                        steps=steps,
                        residual=residual,
                        mu_norm=math.sqrt(max(energy, 0.0)),
                        converged=False,
                        trajectory_monotone=max_increase <= opts.energy_slack,
                        max_energy_increase=max_increase,
                    )
        steps += 1
    return FlowResult(
        limit=QuiverRep(mats),
        steps=steps,
        residual=residual,
        mu_norm=math.sqrt(max(energy, 0.0)),
        converged=converged,
        trajectory_monotone=max_increase <= opts.energy_slack,
        max_energy_increase=max_increase,
    )


def block_critical_refiner(inst: QuiverInstance, opts: FlowOpts | None = None):
    """Refiner moving a certified semistable block onto its internal
    critical point, for use with the instance generator.

    A block of dimension ``part`` and level ``-slope(part)`` is flowed
    inside its own representation space with the stability parameter
    shifted to theta_v + alpha_v * level (which pairs to zero with the
    part, and whose semistable set is exactly the slope-semistable one).
    The limit sits in the zero level of the shifted moment map, hence is
    polystable there; semistability is open, so the numerical limit is a
    valid replacement block, and the assembled representation starts
    near its critical set instead of a stratum-tangent distance away
    (floating-point roundoff escapes thin strata whose flows would
    otherwise need long tracking times).
    """
    from .quiver import _instance_of_dim

    # the ambient-norm residual has a floating-point floor around 1e-8 at
    # these scales, so demanding much less would spin forever
    flow_opts = opts or FlowOpts(tol=1e-7, max_steps=20_000)

    def refine(block: QuiverRep, part, level) -> QuiverRep:
        sub = _instance_of_dim(tuple(part), inst)
        shifted = [inst.theta[v] + float(inst.alpha[v]) * float(level) for v in range(len(part))]
        model = HermitianModel(sub, theta=shifted)
        # the energy is non-increasing, so the limit is never worse than
        # the input even when the tolerance was not reached
        return flow(block, model, flow_opts).limit

    return refine


# ---------------------------------------------------------------------------
# limit classification


@dataclass(frozen=True)
class Candidate:
    """A possible critical level: per-vertex weakly decreasing rational
    eigenvalue pattern together with an arbitrary identifying label."""

    label: object
    pattern: tuple[tuple[Fraction, ...], ...]

    def norm(self, alpha: Sequence[int]) -> float:
        return math.sqrt(
            sum(float(a) * float(x) ** 2 for a, row in zip(alpha, self.pattern) for x in row)
        )


@dataclass(frozen=True)
class SnapResult:
    candidate: Candidate
    distance: float
    gap: float
    observed: tuple[tuple[float, ...], ...]


def eigen_pattern(rep: QuiverRep, model: HermitianModel) -> tuple[tuple[float, ...], ...]:
    """Per-vertex eigenvalues of M_v/alpha_v, sorted weakly decreasing
    (the dominant-chamber representative of the moment image)."""
    herm = moment_matrices(rep, model)
    out = []
    for v, m in enumerate(herm):
        if m.size:
            vals = np.linalg.eigvalsh(m) / model.alpha[v]
            out.append(tuple(sorted((float(x) for x in vals), reverse=True)))
        else:
            out.append(())
    return tuple(out)


def _pattern_distance(obs, cand, alpha) -> float:
    total = 0.0
    for v, (row_o, row_c) in enumerate(zip(obs, cand)):
        if len(row_o) != len(row_c):
            raise InputError("candidate pattern has wrong block sizes")
        total += alpha[v] * sum((float(o) - float(c)) ** 2 for o, c in zip(row_o, row_c))
    return math.sqrt(total)


def candidate_gap(candidates: Sequence[Candidate], alpha: Sequence[int]) -> float:
    """Minimal pairwise distance between distinct candidate patterns."""
    gap = math.inf
    for i in range(len(candidates)):
        for j in range(i + 1, len(candidates)):
            if candidates[i].pattern == candidates[j].pattern:
                continue
            d = _pattern_distance(candidates[i].pattern, candidates[j].pattern, alpha)
            gap = min(gap, d)
    return gap


def classify_limit(
    result: FlowResult, model: HermitianModel, candidates: Sequence[Candidate]
) -> SnapResult:
    """Snap a converged flow limit onto the unique candidate within half
    the candidate gap; anything else is a reported failure, never a
    silent snap."""
    if not result.converged:
        raise InputError("cannot classify a non-converged flow")
    if not candidates:
        raise InputError("no candidates supplied")
    seen = {}
    for c in candidates:
        seen.setdefault(c.pattern, c)
    distinct = list(seen.values())
    obs = eigen_pattern(result.limit, model)
    gap = candidate_gap(distinct, model.alpha)
    scored = sorted(
        ((_pattern_distance(obs, c.pattern, model.alpha), k) for k, c in enumerate(distinct)),
        key=lambda t: t[0],
    )
    best_d, best_k = scored[0]
    threshold = gap / 2.0
    if best_d > threshold:
        raise ClassificationError(
            f"limit at distance {best_d:.3e} from nearest candidate exceeds gap/2 = {threshold:.3e}"
        )
    if len(scored) > 1 and scored[1][0] - best_d <= 1e-9 * (1.0 + best_d):
        raise ClassificationError(
            f"limit is equidistant (within rounding) from two candidates at distance {best_d:.3e}"
        )
    return SnapResult(candidate=distinct[best_k], distance=best_d, gap=gap, observed=obs)


# ---------------------------------------------------------------------------
# Kempf-Ness function


def _check_anti_hermitian(a: Sequence[np.ndarray], model: HermitianModel) -> None:
    if len(a) != model.vertex_count:
        raise InputError("one Lie-algebra matrix per vertex required")
    for v, av in enumerate(a):
        if av.shape != (model.dims[v], model.dims[v]):
            raise InputError(f"vertex {v} direction has shape {av.shape}")
        if av.size and float(np.max(np.abs(av + av.conj().T))) > 1e-10 * (1.0 + float(np.max(np.abs(av)))):
            raise InputError("directions must be anti-Hermitian (i a Hermitian)")


def group_exp(a: Sequence[np.ndarray]) -> Matrices:
    """exp(i a_v) per vertex for anti-Hermitian a (Hermitian exponent)."""
    out = []
    for av in a:
        if not av.size:
            out.append(np.zeros((0, 0), dtype=np.complex128))
            continue
        w, u = np.linalg.eigh(1j * av)
        with np.errstate(over="ignore", invalid="ignore"):
            e = (u * np.exp(w)) @ u.conj().T
        if not np.all(np.isfinite(e)):
            raise NumericError("matrix exponential overflow")
        out.append(e)
    return tuple(out)


def kn_value_at_group(g: Sequence[np.ndarray], rep: QuiverRep, model: HermitianModel) -> float:
    """Kempf-Ness value at a group element: H(g.v, g.v)/(4 pi) minus
    log|rho(g)|/(2 pi); invariant under the left compact action."""
    moved = group_act(list(g), rep, model.inst)
    quad = float(hermitian_inner(moved.matrices, moved.matrices).real) / (4.0 * math.pi)
    logabs = 0.0
    for v, gv in enumerate(g):
        if gv.size:
            sign, logdet = np.linalg.slogdet(gv)
            logabs += model.theta[v] * logdet
    return quad - logabs / TWO_PI


def kempf_ness_value(rep: QuiverRep, model: HermitianModel, a: Sequence[np.ndarray]) -> float:
    """p_v(a) = H(exp(ia)v, exp(ia)v)/(4 pi) + dρ(a)/(2 pi i)."""
    validate_rep(rep, model.inst)
    _check_anti_hermitian(a, model)
    moved = group_act(list(group_exp(a)), rep, model.inst)
    quad = float(hermitian_inner(moved.matrices, moved.matrices).real) / (4.0 * math.pi)
    # dρ(a) is purely imaginary; dividing by 2 pi i leaves the real part
    shift = float(character_derivative(a, model).imag) / TWO_PI
    return quad + shift


def kn_gradient(rep: QuiverRep, model: HermitianModel, a: Sequence[np.ndarray]) -> Matrices:
    """Gradient of the Kempf-Ness function at a, transported to the
    invariant inner product: -mu*(exp(ia) . v).

    This is the derivative along the one-parameter families
    t -> exp(i t b) exp(i a) . v (the directions in which the value
    function composes with a single exponential); the test-suite checks
    it against central differences along exactly those curves.
    """
    validate_rep(rep, model.inst)
    _check_anti_hermitian(a, model)
    moved = group_act(list(group_exp(a)), rep, model.inst)
    mv = moment_star(moved, model)
    return tuple(-m for m in mv.mu_star)


def kn_value_along(
    rep: QuiverRep,
    model: HermitianModel,
    a: Sequence[np.ndarray],
    direction: Sequence[np.ndarray],
    t: float,
) -> float:
    """Kempf-Ness value at exp(i t direction) exp(i a), the curve through
    a with initial velocity ``direction``."""
    _check_anti_hermitian(a, model)
    _check_anti_hermitian(direction, model)
    step = group_exp(tuple(t * d for d in direction))
    base = group_exp(a)
    g = tuple(s @ b if s.size else s for s, b in zip(step, base))
    return kn_value_at_group(g, rep, model)


@dataclass(frozen=True)
class KNOpts:
    tol: float = 1e-8
    max_iters: int = 500
    radius: float = 40.0
    divergence_grad_floor: float = 1e-6
    armijo: float = 1e-4


@dataclass(frozen=True)
class KNResult:
    status: str  # converged | diverging | max_iterations
    minimizer: Matrices | None
    value: float
    grad_norm: float
    iterations: int
    direction_norm: float


def _polar_log(g: Sequence[np.ndarray]) -> Matrices:
    """Anti-Hermitian a with exp(i a) the positive part of the polar
    decomposition of g."""
    out = []
    for gv in g:
        if not gv.size:
            out.append(np.zeros((0, 0), dtype=np.complex128))
            continue
        w, u = np.linalg.eigh(gv.conj().T @ gv)
        w = np.maximum(w, 1e-300)
        log_p = (u * (0.5 * np.log(w))) @ u.conj().T
        out.append(-1j * log_p)
    return tuple(out)


def kn_minimize(rep: QuiverRep, model: HermitianModel, opts: KNOpts = KNOpts()) -> KNResult:
    """Geodesic gradient descent with backtracking on the Kempf-Ness
    function.

    Converged means the gradient norm (equivalently the moment-map norm
    at the transported point) fell below tol.  Diverging is a heuristic
    witness of unboundedness below: the value keeps decreasing while the
    displacement has left the configured radius and the gradient norm
    stays above the configured floor.  Exact instability certificates
    come from the combinatorial route, not from this status.
    """
    validate_rep(rep, model.inst)
    g = tuple(np.eye(d, dtype=np.complex128) for d in model.dims)
    value = kn_value_at_group(g, rep, model)
    iters = 0
    while True:
        moved = group_act(list(g), rep, model.inst)
        mv = moment_star(moved, model)
        gnorm = lie_norm(mv.mu_star, model)
        a_now = _polar_log(g)
        a_norm = lie_norm(a_now, model)
        if gnorm < opts.tol:
            return KNResult("converged", a_now, value, gnorm, iters, a_norm)
        if a_norm > opts.radius and gnorm > opts.divergence_grad_floor:
            return KNResult("diverging", None, value, gnorm, iters, a_norm)
        if iters >= opts.max_iters:
            return KNResult("max_iterations", None, value, gnorm, iters, a_norm)
        # descend along the curve exp(i t mu*) g; the second derivative at
        # t = 0 is the metric square of the infinitesimal action, giving a
        # Newton-sized trial step
        direction = mv.mu_star
        decrement = gnorm * gnorm
        act_dir = infinitesimal_action(direction, moved, model)
        curvature = metric_pairing(act_dir, act_dir)
        t = min(4.0, decrement / curvature) if curvature > 0 else 1.0
        resolution = 1e-13 * (1.0 + abs(value))
        stalled = False
        while True:
            trial = tuple(
                e @ gv if e.size else gv for e, gv in zip(group_exp(tuple(t * d for d in direction)), g)
            )
            trial_value = kn_value_at_group(trial, rep, model)
            predicted = opts.armijo * t * decrement
            if predicted >= resolution:
                if trial_value <= value - predicted:
                    break
            else:
                # the value can no longer resolve the descent: accept on
                # gradient-norm decrease instead
                trial_moved = group_act(list(trial), rep, model.inst)
                trial_gnorm = lie_norm(moment_star(trial_moved, model).mu_star, model)
                if trial_gnorm < gnorm:
                    break
            t *= 0.5
            if t < 1e-18:
                stalled = True
                break
        if stalled:
            return KNResult("max_iterations", None, value, gnorm, iters, a_norm)
        g = trial
        value = trial_value
        iters += 1


# ---------------------------------------------------------------------------
# weight-sum consistency oracle


def weight_formula_check(
    rep: QuiverRep, model: HermitianModel, lam: Sequence[Sequence[int]]
) -> tuple[float, float]:
    """Moment pairing against a diagonal integral one-parameter subgroup,
    computed two independent ways: through the transported moment map
    (sum_v tr(M_v Lambda_v)) and through the weight decomposition
    (sum of weight * |entry|^2 minus the character pairing)."""
    validate_rep(rep, model.inst)
    lam = [tuple(int(x) for x in row) for row in lam]
    if len(lam) != model.vertex_count or any(len(row) != model.dims[v] for v, row in enumerate(lam)):
        raise InputError("one integer diagonal entry per vertex coordinate required")
    herm = moment_matrices(rep, model)
    direct = sum(
        float(np.trace(herm[v] @ np.diag(lam[v])).real) for v in range(model.vertex_count) if model.dims[v]
    )
    weight_sum = 0.0
    for a, phi in enumerate(rep.matrices):
        if not phi.size:
            continue
        h, t = model.heads[a], model.tails[a]
        for r in range(phi.shape[0]):
            for c in range(phi.shape[1]):
                weight_sum += (lam[h][r] - lam[t][c]) * float(abs(phi[r, c]) ** 2)
    pairing = sum(model.theta[v] * sum(lam[v]) for v in range(model.vertex_count))
    weight_sum -= pairing
    return direct, weight_sum
