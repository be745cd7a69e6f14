"""Quiver representations, slope stability and Harder-Narasimhan data.

A quiver instance fixes a dimension vector d, an integral stability
parameter theta with sum_v theta_v d_v = 0, and positive integral
weights alpha defining the invariant inner product (a weighted sum of
the per-vertex trace forms, normalised so that an integral one-parameter
subgroup with exponent pattern m has norm square sum_v alpha_v sum_k
m_{v,k}^2).

Exact Harder-Narasimhan computation is offered for instances with all
d_v <= 1, where the automorphism group is a torus and every
subrepresentation is cut out by a vertex subset.  Larger dimensions are
reached through the certified generator or through the numerical flow.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Mapping, Sequence

import numpy as np

from . import exact, torus
from .errors import DomainError, GenerationError, InputError, UnsupportedError
from .exact import InnerProduct, Vector

DimVector = tuple[int, ...]


@dataclass(frozen=True)
class Quiver:
    vertices: tuple[str, ...]
    arrows: tuple[tuple[str, str], ...]

    def __post_init__(self):
        object.__setattr__(self, "vertices", tuple(str(v) for v in self.vertices))
        object.__setattr__(self, "arrows", tuple((str(t), str(h)) for t, h in self.arrows))
        if len(set(self.vertices)) != len(self.vertices):
            raise InputError("duplicate vertex labels")
        index = {v: i for i, v in enumerate(self.vertices)}
        for t, h in self.arrows:
            if t not in index or h not in index:
                raise InputError(f"arrow {t}->{h} references an unknown vertex")
        object.__setattr__(self, "_vindex", index)

    def vertex_index(self, v: str) -> int:
        return self._vindex[v]

    @property
    def tails(self) -> tuple[int, ...]:
        return tuple(self._vindex[t] for t, _ in self.arrows)

    @property
    def heads(self) -> tuple[int, ...]:
        return tuple(self._vindex[h] for _, h in self.arrows)


@dataclass(frozen=True)
class QuiverInstance:
    quiver: Quiver
    dim: DimVector
    theta: tuple[int, ...]
    alpha: tuple[int, ...]

    def __post_init__(self):
        nv = len(self.quiver.vertices)
        object.__setattr__(self, "dim", tuple(int(d) for d in self.dim))
        object.__setattr__(self, "theta", tuple(int(t) for t in self.theta))
        object.__setattr__(self, "alpha", tuple(int(a) for a in self.alpha))
        if len(self.dim) != nv or len(self.theta) != nv or len(self.alpha) != nv:
            raise InputError("dim, theta and alpha must have one entry per vertex")
        if any(d < 0 for d in self.dim):
            raise InputError("dimension vector entries must be nonnegative")
        if any(a < 1 for a in self.alpha):
            raise InputError("alpha weights must be positive integers")
        if sum(t * d for t, d in zip(self.theta, self.dim)) != 0:
            raise InputError("theta must pair to zero with the dimension vector")

    @property
    def abelian(self) -> bool:
        return all(d <= 1 for d in self.dim)

    def arrow_shape(self, a: int) -> tuple[int, int]:
        return (self.dim[self.quiver.heads[a]], self.dim[self.quiver.tails[a]])


@dataclass(frozen=True)
class QuiverRep:
    """One complex matrix per arrow, shape d_head x d_tail, immutable."""

    matrices: tuple[np.ndarray, ...]

    def __post_init__(self):
        mats = tuple(np.ascontiguousarray(m, dtype=np.complex128) for m in self.matrices)
        for m in mats:
            m.setflags(write=False)
        object.__setattr__(self, "matrices", mats)

    @classmethod
    def from_lists(cls, inst: QuiverInstance, data: Sequence) -> "QuiverRep":
        rep = cls(tuple(np.array(m, dtype=np.complex128).reshape(inst.arrow_shape(a)) for a, m in enumerate(data)))
        validate_rep(rep, inst)
        return rep

    @classmethod
    def zero(cls, inst: QuiverInstance) -> "QuiverRep":
        return cls(tuple(np.zeros(inst.arrow_shape(a), dtype=np.complex128) for a in range(len(inst.quiver.arrows))))


def validate_rep(rep: QuiverRep, inst: QuiverInstance) -> None:
    if len(rep.matrices) != len(inst.quiver.arrows):
        raise InputError("representation must carry one matrix per arrow")
    for a, m in enumerate(rep.matrices):
        if m.shape != inst.arrow_shape(a):
            raise InputError(f"arrow {a} matrix has shape {m.shape}, expected {inst.arrow_shape(a)}")


def group_act(g: Sequence[np.ndarray], rep: QuiverRep, inst: QuiverInstance) -> QuiverRep:
    """Base-change action: the arrow map picks up g_head on the left and
    the inverse of g_tail on the right."""
    ginv = [np.linalg.inv(gv) if gv.size else gv for gv in g]
    heads, tails = inst.quiver.heads, inst.quiver.tails
    return QuiverRep(tuple(g[heads[a]] @ m @ ginv[tails[a]] for a, m in enumerate(rep.matrices)))


def theta_pairing(e: Sequence[int], inst: QuiverInstance) -> int:
    return sum(t * x for t, x in zip(inst.theta, e))


def alpha_size(e: Sequence[int], inst: QuiverInstance) -> int:
    return sum(a * x for a, x in zip(inst.alpha, e))


def slope(e: DimVector, inst: QuiverInstance) -> Fraction:
    """theta(e)/alpha(e); undefined on the zero vector."""
    if all(x == 0 for x in e):
        raise DomainError("slope of the zero dimension vector")
    if len(e) != len(inst.dim) or any(x < 0 or x > d for x, d in zip(e, inst.dim)):
        raise InputError("dimension vector must satisfy 0 <= e <= d componentwise")
    return Fraction(theta_pairing(e, inst), alpha_size(e, inst))


def _require_abelian(inst: QuiverInstance) -> None:
    if not inst.abelian:
        raise UnsupportedError(
            "exact subrepresentation enumeration needs d_v <= 1 everywhere; "
            "use the numerical flow path for larger dimension vectors"
        )


def _closed_subsets(sup: Sequence[int], edges: Sequence[tuple[int, int]]) -> list[frozenset[int]]:
    """Subsets of ``sup`` closed under the directed edges (tail in S forces head in S)."""
    out: list[frozenset[int]] = []
    sup = list(sup)
    for mask in range(1 << len(sup)):
        s = {sup[i] for i in range(len(sup)) if mask >> i & 1}
        if all(not (t in s and h not in s) for t, h in edges):
            out.append(frozenset(s))
    return out


def subrep_candidates_abelian(rep: QuiverRep, inst: QuiverInstance) -> tuple[DimVector, ...]:
    """All dimension vectors of subrepresentations, for d_v <= 1.

    With one-dimensional vertex spaces a subrepresentation is exactly a
    vertex subset closed under the arrows carrying a nonzero entry, so
    the enumeration is exhaustive.
    """
    _require_abelian(inst)
    validate_rep(rep, inst)
    nv = len(inst.quiver.vertices)
    sup = [v for v in range(nv) if inst.dim[v] == 1]
    edges = []
    for a, (t, h) in enumerate(zip(inst.quiver.tails, inst.quiver.heads)):
        m = rep.matrices[a]
        if m.size and m[0, 0] != 0:
            edges.append((t, h))
    dims = set()
    for s in _closed_subsets(sup, edges):
        dims.add(tuple(1 if v in s else 0 for v in range(nv)))
    return tuple(sorted(dims))


@dataclass(frozen=True)
class HNType:
    """Ordered dimension vectors of the semistable subquotients, with
    strictly increasing slopes."""

    parts: tuple[DimVector, ...]
    slopes: tuple[Fraction, ...]

    def __post_init__(self):
        if len(self.parts) != len(self.slopes):
            raise InputError("one slope per part")
        for p in self.parts:
            if all(x == 0 for x in p):
                raise InputError("parts must be nonzero")
        for a, b in zip(self.slopes, self.slopes[1:]):
            if not a < b:
                raise InputError("slopes must be strictly increasing")

    @classmethod
    def of(cls, parts: Sequence[Sequence[int]], inst: QuiverInstance) -> "HNType":
        parts = tuple(tuple(int(x) for x in p) for p in parts)
        for p in parts:
            if all(x == 0 for x in p):
                raise InputError("parts must be nonzero")
        total = tuple(sum(p[v] for p in parts) for v in range(len(inst.dim)))
        if total != inst.dim:
            raise InputError(f"parts sum to {total}, expected {inst.dim}")
        return cls(parts=parts, slopes=tuple(slope(p, inst) for p in parts))

    @property
    def semistable(self) -> bool:
        return len(self.parts) == 1


def _instance_of_dim(part: DimVector, inst: QuiverInstance) -> QuiverInstance:
    """Companion instance carrying a sub-dimension vector.

    Built without the theta-pairing constraint: proper blocks and
    quotients legitimately have theta(part) != 0.
    """
    sub = object.__new__(QuiverInstance)
    object.__setattr__(sub, "quiver", inst.quiver)
    object.__setattr__(sub, "dim", tuple(part))
    object.__setattr__(sub, "theta", inst.theta)
    object.__setattr__(sub, "alpha", inst.alpha)
    return sub


def _restrict(rep: QuiverRep, inst: QuiverInstance, keep: frozenset[int]) -> tuple[QuiverRep, QuiverInstance]:
    """Induced representation on a vertex subset (entries restricted, same quiver)."""
    dim = tuple(d if v in keep else 0 for v, d in enumerate(inst.dim))
    sub = _instance_of_dim(dim, inst)
    mats = []
    for a in range(len(inst.quiver.arrows)):
        t, h = inst.quiver.tails[a], inst.quiver.heads[a]
        if t in keep and h in keep:
            mats.append(rep.matrices[a])
        else:
            mats.append(np.zeros((dim[h], dim[t]), dtype=np.complex128))
    return QuiverRep(tuple(mats)), sub


def hn_filtration_abelian(rep: QuiverRep, inst: QuiverInstance) -> HNType:
    """Unique Harder-Narasimhan type for d_v <= 1 instances.

    Repeatedly take, among nonzero subrepresentation dimension vectors of
    the current quotient, the one of minimal slope and maximal alpha-size
    (the maximal destabilising subrepresentation); uniqueness of that
    choice is asserted, and each quotient is re-verified semistable
    against the exhaustive oracle.
    """
    _require_abelian(inst)
    validate_rep(rep, inst)
    nv = len(inst.quiver.vertices)
    remaining = frozenset(v for v in range(nv) if inst.dim[v] == 1)
    cur_rep, cur_inst = rep, inst
    parts: list[DimVector] = []
    while remaining:
        cands = [e for e in subrep_candidates_abelian(cur_rep, cur_inst) if any(e)]
        scored = [(slope(e, inst), -alpha_size(e, inst), e) for e in cands]
        scored.sort()
        best = scored[0]
        ties = [s for s in scored if s[0] == best[0] and s[1] == best[1]]
        assert len(ties) == 1, "maximal destabilising subrepresentation must be unique"
        part = best[2]
        chosen = frozenset(v for v in range(nv) if part[v] == 1)
        # the selected layer must itself be semistable: every
        # subrepresentation of it has slope >= its slope
        layer_rep, layer_inst = _restrict(cur_rep, cur_inst, chosen)
        for e in subrep_candidates_abelian(layer_rep, layer_inst):
            if any(e):
                assert slope(e, inst) >= best[0]
        parts.append(part)
        remaining = remaining - chosen
        cur_rep, cur_inst = _restrict(cur_rep, cur_inst, remaining)
    return HNType.of(parts, inst)


@dataclass(frozen=True)
class BlockWeights:
    """Diagonal Lie-algebra element attached to a Harder-Narasimhan type.

    ``levels[i]`` is minus the slope of part i, repeated (parts[i])_v
    times inside the vertex-v diagonal; levels are strictly decreasing,
    which fixes the dominant-chamber convention (weakly decreasing
    diagonals per vertex).  ``lam`` is the primitive integral pattern on
    the same ray, with lam = scale * levels; both are None for the
    semistable type.
    """

    parts: tuple[DimVector, ...]
    levels: tuple[Fraction, ...]
    diagonals: tuple[tuple[Fraction, ...], ...]
    lam: tuple[tuple[int, ...], ...] | None
    scale: Fraction | None
    norm_sq: Fraction

    def block_of(self, vertex: int, coordinate: int) -> int:
        """Index of the part owning a diagonal coordinate at a vertex."""
        off = 0
        for i, p in enumerate(self.parts):
            off += p[vertex]
            if coordinate < off:
                return i
        raise InputError(f"coordinate {coordinate} out of range at vertex {vertex}")


def beta_of_type(tau: HNType, inst: QuiverInstance) -> BlockWeights:
    """Block-diagonal index attached to a Harder-Narasimhan type."""
    levels = tuple(-s for s in tau.slopes)
    nv = len(inst.dim)
    diagonals = tuple(
        tuple(levels[i] for i, p in enumerate(tau.parts) for _ in range(p[v])) for v in range(nv)
    )
    norm_sq = sum(
        (levels[i] ** 2 * alpha_size(tau.parts[i], inst) for i in range(len(levels))), Fraction(0)
    )
    # exact identity: |beta|^2 = -sum_i theta(part_i) * level_i
    assert norm_sq == -sum(
        (Fraction(theta_pairing(tau.parts[i], inst)) * levels[i] for i in range(len(levels))), Fraction(0)
    )
    if all(l == 0 for l in levels):
        lam = None
        scale = None
    else:
        flat = [x for diag in diagonals for x in diag]
        prim = exact.primitive_integer_ray(exact.vec(flat))
        nz = next(i for i, x in enumerate(flat) if x != 0)
        scale = Fraction(prim[nz]) / flat[nz]  # lam = scale * beta, scale > 0 rational
        assert scale > 0 and all(Fraction(p) == scale * x for p, x in zip(prim, flat))
        lam_flat = list(prim)
        lam_list = []
        k = 0
        for v in range(nv):
            lam_list.append(tuple(lam_flat[k : k + inst.dim[v]]))
            k += inst.dim[v]
        lam = tuple(lam_list)
    return BlockWeights(parts=tau.parts, levels=levels, diagonals=diagonals, lam=lam, scale=scale, norm_sq=norm_sq)


@dataclass(frozen=True)
class BlockStructure:
    """Zero-pattern predicates and the retraction attached to a type.

    Coordinates at each vertex are grouped in part order; an arrow matrix
    decomposes into blocks mapping part j at the tail to part i at the
    head.  The core locus keeps only i == j, the attracting locus allows
    i <= j, and the retraction zeroes every off-diagonal block (the limit
    of the one-parameter scaling action as the parameter goes to 0).
    """

    inst: QuiverInstance
    tau: HNType
    offsets: tuple[tuple[int, ...], ...]  # per vertex, prefix offsets of the parts

    @property
    def parts(self) -> tuple[DimVector, ...]:
        return self.tau.parts

    def _blocks(self, a: int):
        t, h = self.inst.quiver.tails[a], self.inst.quiver.heads[a]
        for i in range(len(self.parts)):
            for j in range(len(self.parts)):
                r0, r1 = self.offsets[h][i], self.offsets[h][i + 1]
                c0, c1 = self.offsets[t][j], self.offsets[t][j + 1]
                if r1 > r0 and c1 > c0:
                    yield i, j, (slice(r0, r1), slice(c0, c1))

    def in_core(self, rep: QuiverRep) -> bool:
        """Block-diagonal locus membership (exact zero pattern)."""
        validate_rep(rep, self.inst)
        return all(
            not np.any(rep.matrices[a][sl]) for a in range(len(rep.matrices)) for i, j, sl in self._blocks(a) if i != j
        )

    def in_attracting(self, rep: QuiverRep) -> bool:
        """Block-upper-triangular locus membership (exact zero pattern)."""
        validate_rep(rep, self.inst)
        return all(
            not np.any(rep.matrices[a][sl]) for a in range(len(rep.matrices)) for i, j, sl in self._blocks(a) if i > j
        )

    def project(self, rep: QuiverRep) -> QuiverRep:
        """Retraction onto the core: zero every off-diagonal block."""
        validate_rep(rep, self.inst)
        out = []
        for a in range(len(rep.matrices)):
            m = np.zeros_like(rep.matrices[a])
            for i, j, sl in self._blocks(a):
                if i == j:
                    m[sl] = rep.matrices[a][sl]
            out.append(m)
        return QuiverRep(tuple(out))

    def arrow_block_weights(self, a: int, bw: BlockWeights) -> dict[tuple[int, int], int]:
        """Integral scaling weight of each nonempty block of arrow ``a``
        under the primitive one-parameter subgroup of ``bw``."""
        if bw.lam is None:
            raise DomainError("semistable type carries no one-parameter subgroup")
        t, h = self.inst.quiver.tails[a], self.inst.quiver.heads[a]
        out = {}
        for i, j, _ in self._blocks(a):
            lam_h = bw.lam[h][self.offsets[h][i]]
            lam_t = bw.lam[t][self.offsets[t][j]]
            out[(i, j)] = lam_h - lam_t
        return out


def block_structure(tau: HNType, inst: QuiverInstance) -> BlockStructure:
    offsets = []
    for v in range(len(inst.dim)):
        pre = [0]
        for p in tau.parts:
            pre.append(pre[-1] + p[v])
        if pre[-1] != inst.dim[v]:
            raise InputError("type does not fill the dimension vector")
        offsets.append(tuple(pre))
    return BlockStructure(inst=inst, tau=tau, offsets=tuple(offsets))


def rho_lambda(lam: Sequence[Sequence[int]], inst: QuiverInstance) -> tuple[tuple[int, ...], ...]:
    """Twisted character attached to a diagonal integral one-parameter
    subgroup: |lam|^2 * theta - (theta, lam) * lam-dual.

    Returned as per-vertex diagonal coefficient patterns (constant on the
    blocks of lam).  Orthogonality against lam holds exactly and is
    asserted.
    """
    lam = tuple(tuple(int(x) for x in row) for row in lam)
    if len(lam) != len(inst.dim) or any(len(row) != d for row, d in zip(lam, inst.dim)):
        raise InputError("one integer diagonal entry per vertex coordinate required")
    if all(x == 0 for row in lam for x in row):
        raise DomainError("the trivial one-parameter subgroup admits no twisted character")
    pairing = sum(t * sum(row) for t, row in zip(inst.theta, lam))
    norm_sq = sum(a * sum(x * x for x in row) for a, row in zip(inst.alpha, lam))
    coeffs = tuple(
        tuple(norm_sq * inst.theta[v] - pairing * inst.alpha[v] * x for x in lam[v]) for v in range(len(inst.dim))
    )
    assert sum(c * x for crow, lrow in zip(coeffs, lam) for c, x in zip(crow, lrow)) == 0
    return coeffs


def parabolic_membership(g: Sequence[np.ndarray], bw: BlockWeights, inst: QuiverInstance) -> bool:
    """Whether a group element lies in the attracting parabolic of the
    block weights: every block mapping a higher level into a strictly
    lower level must vanish (block upper-triangularity for decreasing
    levels)."""
    if len(g) != len(inst.dim):
        raise InputError("one matrix per vertex required")
    mats = []
    for v, gv in enumerate(g):
        gv = np.asarray(gv, dtype=np.complex128)
        if gv.shape != (inst.dim[v], inst.dim[v]):
            raise InputError(f"vertex {v} matrix has shape {gv.shape}")
        if inst.dim[v] and np.linalg.matrix_rank(gv) < inst.dim[v]:
            raise InputError("group element must be invertible at every vertex")
        mats.append(gv)
    struct = block_structure(HNType(parts=bw.parts, slopes=tuple(-l for l in bw.levels)), inst)
    for v, gv in enumerate(mats):
        for i in range(len(bw.parts)):
            for j in range(len(bw.parts)):
                if bw.levels[i] < bw.levels[j]:
                    r = slice(struct.offsets[v][i], struct.offsets[v][i + 1])
                    c = slice(struct.offsets[v][j], struct.offsets[v][j + 1])
                    if np.any(gv[r, c]):
                        return False
    return True


def enumerate_hn_types(inst: QuiverInstance) -> tuple[HNType, ...]:
    """All syntactically valid Harder-Narasimhan types for the dimension
    vector: ordered tuples of nonzero subvectors with strictly increasing
    slopes summing to d."""
    nv = len(inst.dim)

    def sub_vectors(limit: DimVector):
        ranges = [range(x + 1) for x in limit]
        out = []

        def rec(prefix):
            if len(prefix) == nv:
                if any(prefix):
                    out.append(tuple(prefix))
                return
            for v in ranges[len(prefix)]:
                rec(prefix + [v])

        rec([])
        return out

    results: list[HNType] = []

    def extend(parts: list[DimVector], remaining: DimVector, last_slope):
        if all(x == 0 for x in remaining):
            results.append(HNType.of(parts, inst))
            return
        for e in sub_vectors(remaining):
            s = slope(e, inst)
            if last_slope is not None and not s > last_slope:
                continue
            extend(parts + [e], tuple(r - x for r, x in zip(remaining, e)), s)

    extend([], inst.dim, None)
    results.sort(key=lambda t: (len(t.parts), t.parts))
    return tuple(results)


# ---------------------------------------------------------------------------
# abelian bridge to the torus classification


def to_torus_spec(inst: QuiverInstance) -> tuple[torus.TorusActionSpec, tuple[int, ...]]:
    """Torus action underlying an abelian instance.

    Supported vertices index the torus factors; each arrow between
    supported vertices contributes the character e_head - e_tail (arrows
    sharing endpoints share a weight block, loops give the zero
    character).  Returns the action data together with the
    supported-vertex list, which fixes the coordinate meaning of index
    vectors.
    """
    _require_abelian(inst)
    sup = tuple(v for v in range(len(inst.dim)) if inst.dim[v] == 1)
    pos = {v: k for k, v in enumerate(sup)}
    n = len(sup)
    weights: list[Vector] = []
    windex: dict[Vector, int] = {}
    coords: list[tuple[str, int]] = []
    for a in range(len(inst.quiver.arrows)):
        t, h = inst.quiver.tails[a], inst.quiver.heads[a]
        if inst.dim[t] == 0 or inst.dim[h] == 0:
            continue
        chi = [0] * n
        chi[pos[h]] += 1
        chi[pos[t]] -= 1
        chi_v = exact.vec(chi)
        if chi_v not in windex:
            windex[chi_v] = len(weights)
            weights.append(chi_v)
        coords.append((f"a{a}", windex[chi_v]))
    spec = torus.TorusActionSpec(
        rank=n,
        weights=tuple(weights),
        rho=exact.vec([inst.theta[v] for v in sup]),
        ip=InnerProduct.diagonal([inst.alpha[v] for v in sup]),
        coordinates=tuple(coords),
    )
    return spec, sup


def abelian_point(rep: QuiverRep, inst: QuiverInstance) -> dict[str, complex]:
    """Coordinates of an abelian representation in the torus model."""
    _require_abelian(inst)
    validate_rep(rep, inst)
    point = {}
    for a, m in enumerate(rep.matrices):
        if m.size:
            point[f"a{a}"] = complex(m[0, 0])
    return point


def vertex_levels(bw: BlockWeights, inst: QuiverInstance) -> dict[int, Fraction]:
    """Level at each supported vertex for an abelian instance (one
    diagonal entry per supported vertex)."""
    out = {}
    for v in range(len(inst.dim)):
        if inst.dim[v] == 1:
            out[v] = bw.diagonals[v][0]
    return out


def torus_vertex_levels(beta: Vector, sup: Sequence[int]) -> dict[int, Fraction]:
    return {v: beta[k] for k, v in enumerate(sup)}


# ---------------------------------------------------------------------------
# certified semistable blocks and the instance generator


@dataclass(frozen=True)
class CertifiedBlock:
    rep: QuiverRep
    rule: str
    certified: bool


def _single_vertex_block(part: DimVector, inst: QuiverInstance, rng) -> QuiverRep | None:
    """d_i supported on one vertex: every subrepresentation has the same
    slope theta_v/alpha_v, so any representation is semistable."""
    supported = [v for v, x in enumerate(part) if x]
    if len(supported) != 1:
        return None
    return _random_rep_of_dim(part, inst, rng)


def _abelian_block(part: DimVector, inst: QuiverInstance, rng) -> QuiverRep | None:
    """All d_v <= 1: full arrow support minimises the subrepresentation
    lattice, so it is semistable iff any representation of this dimension
    is; decide with the exhaustive oracle."""
    if any(x > 1 for x in part):
        return None
    sub = _instance_of_dim(part, inst)
    cand = _random_rep_of_dim(part, inst, rng)
    mu = slope(part, inst)
    for e in subrep_candidates_abelian(cand, sub):
        if any(e) and slope(e, inst) < mu:
            return None
    return cand


def _invertible_arrow_block(part: DimVector, inst: QuiverInstance, rng) -> QuiverRep | None:
    """d_i of shape (k, k) on the two endpoints of some arrow t -> h with
    an invertible arrow matrix.  Every subrepresentation then has at
    least as many head as tail dimensions, and for two-vertex support the
    slope defect of a subrepresentation (a', b') is a positive multiple
    of (theta_h - slope * alpha_h) * (b' - a'), so the block is
    semistable provided the head-simple slope clears the block slope."""
    supported = [v for v, x in enumerate(part) if x]
    if len(supported) != 2:
        return None
    u, w = supported
    if part[u] != part[w]:
        return None
    mu = slope(part, inst)
    pivot = None
    for a in range(len(inst.quiver.arrows)):
        t, h = inst.quiver.tails[a], inst.quiver.heads[a]
        if {t, h} == {u, w} and t != h:
            if Fraction(inst.theta[h], inst.alpha[h]) >= mu:
                pivot = a
                break
    if pivot is None:
        return None
    rep = _random_rep_of_dim(part, inst, rng)
    mats = list(rep.matrices)
    k = part[u]
    mats[pivot] = np.eye(k, dtype=np.complex128)
    for a in range(len(mats)):
        t, h = inst.quiver.tails[a], inst.quiver.heads[a]
        if a != pivot and {t, h} <= {u, w} and mats[a].size:
            mats[a] = _random_complex(rng, mats[a].shape)
    return QuiverRep(tuple(mats))


def _random_complex(rng, shape) -> np.ndarray:
    mag = rng.uniform(0.5, 1.5, size=shape)
    phase = rng.uniform(0.0, 2.0 * np.pi, size=shape)
    return mag * np.exp(1j * phase)


def _random_rep_of_dim(part: DimVector, inst: QuiverInstance, rng) -> QuiverRep:
    # entry magnitudes stay in [0.5, 1.5], so every arrow inside the
    # support carries a (numerically robust) nonzero block
    mats = []
    for a in range(len(inst.quiver.arrows)):
        t, h = inst.quiver.tails[a], inst.quiver.heads[a]
        shape = (part[h], part[t])
        if shape[0] and shape[1]:
            mats.append(_random_complex(rng, shape))
        else:
            mats.append(np.zeros(shape, dtype=np.complex128))
    return QuiverRep(tuple(mats))


def certified_semistable_block(
    part: DimVector,
    inst: QuiverInstance,
    rng,
    registry: Mapping[DimVector, QuiverRep] | None = None,
) -> CertifiedBlock:
    """A theta-semistable representation of dimension ``part``, with the
    name of the rule certifying it.  User-supplied registry entries are
    accepted uncertified."""
    for rule, builder in (
        ("single-vertex", _single_vertex_block),
        ("abelian-oracle", _abelian_block),
        ("invertible-arrow", _invertible_arrow_block),
    ):
        rep = builder(part, inst, rng)
        if rep is not None:
            return CertifiedBlock(rep=rep, rule=rule, certified=True)
    if registry and tuple(part) in registry:
        return CertifiedBlock(rep=registry[tuple(part)], rule="user-registry", certified=False)
    raise GenerationError(f"no certified semistable block of dimension {tuple(part)}")


@dataclass(frozen=True)
class GeneratedRep:
    rep: QuiverRep
    tau: HNType
    blocks: tuple[CertifiedBlock, ...]
    group_element: tuple[np.ndarray, ...]
    certified: bool


def _random_group_element(rng, d: int, spread: float = 0.1) -> np.ndarray:
    """Random invertible matrix as unitary times a mildly positive part.

    Any invertible element preserves the stratum; keeping the positive
    part small keeps the conditioning (and hence the floating-point
    drift off the stratum, which the flow would amplify) moderate.
    """
    z = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
    q, _ = np.linalg.qr(z)
    h = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
    h = 0.5 * (h + h.conj().T)
    nrm = np.linalg.norm(h, 2)
    if nrm > 0:
        h *= spread / max(1.0, nrm)
    w, u = np.linalg.eigh(h)
    return q @ ((u * np.exp(w)) @ u.conj().T)


def generate_hn_instance(
    tau: HNType,
    inst: QuiverInstance,
    seed: int,
    registry: Mapping[DimVector, QuiverRep] | None = None,
    block_refiner=None,
) -> GeneratedRep:
    """Representation of certified Harder-Narasimhan type ``tau``.

    Certified semistable blocks fill the diagonal, strictly upper blocks
    get random entries (staying in the attracting locus over the
    semistable core), and a random invertible base change is applied;
    the type is invariant under both.  Deterministic for a given seed.

    ``block_refiner(rep, part, level)`` may replace each certified block
    by another semistable representative of the same dimension (the
    numerical harness supplies a refiner that moves blocks onto their
    internal critical points before assembly).
    """
    rng = np.random.default_rng(seed)
    blocks = []
    levels = tuple(-s for s in tau.slopes)
    for part, level in zip(tau.parts, levels):
        blk = certified_semistable_block(part, inst, rng, registry)
        if block_refiner is not None:
            blk = CertifiedBlock(rep=block_refiner(blk.rep, part, level), rule=blk.rule, certified=blk.certified)
        blocks.append(blk)
    blocks = tuple(blocks)
    struct = block_structure(tau, inst)
    mats = []
    for a in range(len(inst.quiver.arrows)):
        m = np.zeros(inst.arrow_shape(a), dtype=np.complex128)
        for i, j, sl in struct._blocks(a):
            if i == j:
                m[sl] = blocks[i].rep.matrices[a]
            elif i < j:
                m[sl] = 0.5 * _random_complex(rng, (sl[0].stop - sl[0].start, sl[1].stop - sl[1].start))
        mats.append(m)
    g = tuple(
        _random_group_element(rng, d) if d else np.zeros((0, 0), dtype=np.complex128) for d in inst.dim
    )
    rep = group_act(list(g), QuiverRep(tuple(mats)), inst)
    return GeneratedRep(
        rep=rep,
        tau=tau,
        blocks=blocks,
        group_element=g,
        certified=all(b.certified for b in blocks),
    )
