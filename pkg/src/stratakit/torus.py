"""Exact stability data for linearised torus actions.

A torus of rank n acting diagonally on a vector space is described by
its distinct integral weights (one block of coordinates per weight), a
linearising integral character rho, and an integral inner product on the
cocharacter space.  Characters live in the dual space; they are realised
inside the cocharacter space through ``InnerProduct.embed``, after which
every pairing below is the inner-product pairing.  The natural
character/cocharacter duality is recovered as (embed(chi), lam)_ip.

Everything here is exact: instability indices are rational vectors
obtained by shifted-cone projection, and the stability status is decided
by polyhedral arguments, never by floating point.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from enum import Enum
from fractions import Fraction
from typing import Mapping, Sequence

from . import exact
from .errors import DomainError, InputError, ResourceLimitError
from .exact import Containment, InnerProduct, Vector

DEFAULT_SUBSET_BOUND = 16


@dataclass(frozen=True)
class TorusActionSpec:
    """Weights, linearising character and inner product of a torus action.

    ``weights`` are pairwise distinct integral characters; ``coordinates``
    names each coordinate line of the space and says which weight block
    it belongs to.  ``rho`` is the linearising character.
    """

    rank: int
    weights: tuple[Vector, ...]
    rho: Vector
    ip: InnerProduct
    coordinates: tuple[tuple[str, int], ...]

    def __post_init__(self):
        object.__setattr__(self, "weights", tuple(exact.vec(w) for w in self.weights))
        object.__setattr__(self, "rho", exact.vec(self.rho))
        if self.ip.dim != self.rank:
            raise InputError("inner product rank does not match torus rank")
        if len(self.rho) != self.rank:
            raise InputError("rho has wrong length")
        seen = set()
        for w in self.weights:
            if len(w) != self.rank:
                raise InputError("weight has wrong length")
            if any(e.denominator != 1 for e in w):
                raise InputError("weights must be integral characters")
            if w in seen:
                raise InputError(f"duplicate weight {tuple(map(int, w))}")
            seen.add(w)
        if any(e.denominator != 1 for e in self.rho):
            raise InputError("rho must be an integral character")
        labels = set()
        used = set()
        for label, widx in self.coordinates:
            if label in labels:
                raise InputError(f"duplicate coordinate label {label!r}")
            labels.add(label)
            if not 0 <= widx < len(self.weights):
                raise InputError(f"coordinate {label!r} names unknown weight index {widx}")
            used.add(widx)
        if used != set(range(len(self.weights))):
            raise InputError("every weight must carry at least one coordinate")
        object.__setattr__(self, "_embedded", tuple(self.ip.embed(w) for w in self.weights))
        object.__setattr__(self, "_rho_embedded", self.ip.embed(self.rho))

    @property
    def embedded_weights(self) -> tuple[Vector, ...]:
        return self._embedded

    @property
    def embedded_rho(self) -> Vector:
        return self._rho_embedded


class Stability(Enum):
    UNSTABLE = "unstable"
    SEMISTABLE = "semistable"
    STABLE = "stable"
    STRONGLY_STABLE = "strongly_stable"


@dataclass(frozen=True)
class StratumIndex:
    """One instability index: the cone-projection vector beta, its
    primitive integral direction (absent for the semistable index), the
    exact depth squared, and a witnessing weight subset."""

    beta: Vector
    lam: tuple[int, ...] | None
    depth_sq: Fraction
    witness: tuple[int, ...] | None

    @property
    def depth(self) -> float:
        return math.sqrt(self.depth_sq)

    @property
    def semistable(self) -> bool:
        return exact.is_zero(self.beta)


def support_weights(point: Mapping[str, complex], spec: TorusActionSpec) -> tuple[int, ...]:
    """Indices of the weights whose coordinate block is not identically zero."""
    index = {label: widx for label, widx in spec.coordinates}
    hit: set[int] = set()
    for label, value in point.items():
        if label not in index:
            raise InputError(f"unknown coordinate label {label!r}")
        if value != 0:
            hit.add(index[label])
    return tuple(sorted(hit))


def _index_from_projection(beta: Vector, ip: InnerProduct, witness) -> StratumIndex:
    depth_sq = ip.norm_sq(beta)
    lam = None if exact.is_zero(beta) else exact.primitive_integer_ray(beta)
    return StratumIndex(beta=beta, lam=lam, depth_sq=depth_sq, witness=witness)


def classify_support(support: Sequence[int], spec: TorusActionSpec) -> StratumIndex:
    """Index of a point with the given weight support (classification only
    sees which weight blocks vanish)."""
    if any(not 0 <= i < len(spec.weights) for i in support):
        raise InputError("support names an unknown weight index")
    gens = [spec.embedded_weights[i] for i in support]
    proj = exact.project_shifted_cone(gens, spec.embedded_rho, spec.ip)
    return _index_from_projection(proj.beta, spec.ip, tuple(sorted(support)))


def classify_point(point: Mapping[str, complex], spec: TorusActionSpec) -> StratumIndex:
    return classify_support(support_weights(point, spec), spec)


def hm_pairing(lam: Sequence[int], spec: TorusActionSpec) -> int:
    """Pairing of the linearising character with a cocharacter.

    Computed as the natural duality pairing, which equals the inner
    product of the embedded character with lam; it does not depend on
    any point of the space.
    """
    lam_vec = exact.vec(lam)
    if exact.is_zero(lam_vec):
        raise DomainError("pairing against the trivial cocharacter")
    value = exact.dot(spec.rho, lam_vec)
    if value.denominator != 1:
        raise InputError("cocharacter must be integral")
    return int(value)


def stability_status(point: Mapping[str, complex], spec: TorusActionSpec) -> Stability:
    support = support_weights(point, spec)
    gens = [spec.embedded_weights[i] for i in support]
    side = exact.halfspace_containment(gens, spec.embedded_rho, spec.ip)
    if side is Containment.NOT_CONTAINED:
        return Stability.UNSTABLE
    if exact.inequality_cone_is_origin(gens, spec.ip):
        return Stability.STRONGLY_STABLE
    if side is Containment.STRICTLY_CONTAINED:
        return Stability.STABLE
    return Stability.SEMISTABLE


def _worker_count(workers: int | None) -> int:
    if workers is not None:
        return max(1, workers)
    env = os.environ.get("STRATAKIT_THREADS", "")
    try:
        return max(1, int(env)) if env else 1
    except ValueError:
        return 1


def enumerate_indices(
    spec: TorusActionSpec,
    bound: int = DEFAULT_SUBSET_BOUND,
    workers: int | None = None,
) -> tuple[StratumIndex, ...]:
    """All indices beta(B) over weight subsets B, deduplicated and sorted
    by increasing depth.

    The semistable index beta = 0 is always reported, with witness None
    when no subset produces it (its stratum may be empty).  Workers split
    the subset range; the merged output does not depend on the split.
    """
    m = len(spec.weights)
    if m > bound:
        raise ResourceLimitError(
            f"{m} weights would need 2^{m} subsets; configured bound is {bound}"
        )
    gens = spec.embedded_weights
    rho = spec.embedded_rho
    pair = [[spec.ip.pairing(a, b) for b in gens] for a in gens]
    pair_rho = [spec.ip.pairing(a, rho) for a in gens]

    def scan(masks: range) -> dict[Vector, tuple[int, ...]]:
        found: dict[Vector, tuple[int, ...]] = {}
        for mask in masks:
            subset = tuple(i for i in range(m) if mask >> i & 1)
            beta, _, _ = exact._project_tables(gens, rho, pair, pair_rho, subset)
            if beta not in found:
                found[beta] = subset
        return found

    total = 1 << m
    nworkers = min(_worker_count(workers), total)
    if nworkers <= 1:
        found = scan(range(total))
    else:
        chunk = (total + nworkers - 1) // nworkers
        ranges = [range(k, min(k + chunk, total)) for k in range(0, total, chunk)]
        with ThreadPoolExecutor(max_workers=nworkers) as pool:
            parts = list(pool.map(scan, ranges))
        found = {}
        for part in parts:  # ranges are ordered, so first witness wins deterministically
            for beta, witness in part.items():
                if beta not in found:
                    found[beta] = witness

    indices = [_index_from_projection(beta, spec.ip, witness) for beta, witness in found.items()]
    if not any(idx.semistable for idx in indices):
        indices.append(StratumIndex(beta=exact.vzero(spec.rank), lam=None, depth_sq=Fraction(0), witness=None))
    indices.sort(key=lambda ix: (ix.depth_sq, ix.beta))
    return tuple(indices)
