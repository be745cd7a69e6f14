"""Exact rational linear algebra and polyhedral cone projection.

All vectors are tuples of ``fractions.Fraction``; nothing in this module
touches floating point.  The central operation is the projection of the
origin onto a finitely generated cone shifted by a character, solved by
face enumeration with KKT verification.  The minimiser is unique (strict
convexity of the norm), so every certifying face yields the same point;
we report the lexicographically least certifying generator subset.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from enum import Enum
from fractions import Fraction
from math import gcd
from typing import Iterable, Iterator, Sequence

from .errors import DomainError, InputError

Vector = tuple[Fraction, ...]

ZERO = Fraction(0)


def vec(entries: Iterable) -> Vector:
    """Coerce an iterable of ints / strings / Fractions into an exact vector."""
    return tuple(Fraction(e) for e in entries)


def vadd(x: Vector, y: Vector) -> Vector:
    return tuple(a + b for a, b in zip(x, y))


def vsub(x: Vector, y: Vector) -> Vector:
    return tuple(a - b for a, b in zip(x, y))


def vneg(x: Vector) -> Vector:
    return tuple(-a for a in x)


def vscale(c: Fraction, x: Vector) -> Vector:
    return tuple(c * a for a in x)


def vzero(n: int) -> Vector:
    return (ZERO,) * n


def is_zero(x: Vector) -> bool:
    return all(a == 0 for a in x)


def dot(x: Vector, y: Vector) -> Fraction:
    """Natural (unweighted) pairing, used for character/cocharacter duality."""
    if len(x) != len(y):
        raise InputError(f"dimension mismatch: {len(x)} vs {len(y)}")
    return sum((a * b for a, b in zip(x, y)), ZERO)


def solve_linear(rows: Sequence[Sequence[Fraction]], rhs: Sequence[Fraction]):
    """Solve a square rational system exactly; return None if singular."""
    n = len(rows)
    if n == 0:
        return ()
    aug = [list(rows[i]) + [rhs[i]] for i in range(n)]
    for col in range(n):
        piv = next((r for r in range(col, n) if aug[r][col] != 0), None)
        if piv is None:
            return None
        if piv != col:
            aug[col], aug[piv] = aug[piv], aug[col]
        inv = 1 / aug[col][col]
        aug[col] = [a * inv for a in aug[col]]
        for r in range(n):
            if r != col and aug[r][col] != 0:
                f = aug[r][col]
                aug[r] = [a - f * b for a, b in zip(aug[r], aug[col])]
    return tuple(aug[i][n] for i in range(n))


def kernel_basis(rows: Sequence[Vector], n: int) -> list[Vector]:
    """Exact basis of {x : row . x = 0 for all rows} inside Q^n."""
    mat = [list(r) for r in rows]
    pivots: list[int] = []
    r = 0
    for col in range(n):
        piv = next((i for i in range(r, len(mat)) if mat[i][col] != 0), None)
        if piv is None:
            continue
        mat[r], mat[piv] = mat[piv], mat[r]
        inv = 1 / mat[r][col]
        mat[r] = [a * inv for a in mat[r]]
        for i in range(len(mat)):
            if i != r and mat[i][col] != 0:
                f = mat[i][col]
                mat[i] = [a - f * b for a, b in zip(mat[i], mat[r])]
        pivots.append(col)
        r += 1
        if r == len(mat):
            break
    free = [c for c in range(n) if c not in pivots]
    basis = []
    for fcol in free:
        v = [ZERO] * n
        v[fcol] = Fraction(1)
        for i, pcol in enumerate(pivots):
            v[pcol] = -mat[i][fcol]
        basis.append(tuple(v))
    return basis


@dataclass(frozen=True)
class InnerProduct:
    """Integral symmetric positive-definite form on the cocharacter space.

    Positive-definiteness is certified exactly through the leading
    principal minors.  Integrality of the Gram matrix guarantees that
    every integral vector has integral norm square.
    """

    gram: tuple[Vector, ...]

    def __post_init__(self):
        n = len(self.gram)
        rows = tuple(vec(r) for r in self.gram)
        object.__setattr__(self, "gram", rows)
        for r in rows:
            if len(r) != n:
                raise InputError("inner product matrix must be square")
        for i in range(n):
            for j in range(n):
                if rows[i][j] != rows[j][i]:
                    raise InputError("inner product matrix must be symmetric")
                if rows[i][j].denominator != 1:
                    raise InputError("inner product matrix must have integer entries")
        for k in range(1, n + 1):
            if _det([row[:k] for row in rows[:k]]) <= 0:
                raise InputError("inner product must be positive definite")

    @property
    def dim(self) -> int:
        return len(self.gram)

    @classmethod
    def diagonal(cls, entries: Iterable) -> "InnerProduct":
        d = vec(entries)
        n = len(d)
        return cls(tuple(tuple(d[i] if i == j else ZERO for j in range(n)) for i in range(n)))

    @classmethod
    def identity(cls, n: int) -> "InnerProduct":
        return cls.diagonal([1] * n)

    def apply(self, x: Vector) -> Vector:
        """Covector of x: (apply(x)) . y == pairing(x, y)."""
        self._check_dim(x)
        return tuple(sum((row[j] * x[j] for j in range(self.dim)), ZERO) for row in self.gram)

    def pairing(self, x: Vector, y: Vector) -> Fraction:
        self._check_dim(x)
        self._check_dim(y)
        return sum((x[i] * self.gram[i][j] * y[j] for i in range(self.dim) for j in range(self.dim)), ZERO)

    def norm_sq(self, x: Vector) -> Fraction:
        return self.pairing(x, x)

    def embed(self, functional: Vector) -> Vector:
        """Unique u with pairing(u, y) == functional . y for all y.

        This realises a character (a covector under the natural pairing)
        as an element of the cocharacter space.
        """
        self._check_dim(functional)
        u = solve_linear(self.gram, functional)
        assert u is not None  # positive definite, hence invertible
        return u

    def _check_dim(self, x: Sequence) -> None:
        if len(x) != self.dim:
            raise InputError(f"dimension mismatch: vector of length {len(x)} under form of rank {self.dim}")


def _det(rows: list[list[Fraction]]) -> Fraction:
    n = len(rows)
    mat = [list(r) for r in rows]
    det = Fraction(1)
    for col in range(n):
        piv = next((r for r in range(col, n) if mat[r][col] != 0), None)
        if piv is None:
            return ZERO
        if piv != col:
            mat[col], mat[piv] = mat[piv], mat[col]
            det = -det
        det *= mat[col][col]
        inv = 1 / mat[col][col]
        for r in range(col + 1, n):
            if mat[r][col] != 0:
                f = mat[r][col] * inv
                mat[r] = [a - f * b for a, b in zip(mat[r], mat[col])]
    return det


@dataclass(frozen=True)
class ConeProjection:
    """Certificate for the closest point of cone(generators) - rho to the origin.

    ``beta`` is that closest point.  ``complement`` is the cone component
    of the Moreau decomposition of rho, i.e. the projection of rho onto
    the unshifted cone, so that

        complement = beta + rho = sum_i coefficients[i] * generators[i],
        rho - complement = -beta lies in the polar cone,
        (beta, complement) = 0  and  (rho, beta) = -|beta|^2   exactly.

    ``active`` lists the generators carrying a strictly positive
    coefficient (the lexicographically least certifying subset).
    """

    beta: Vector
    complement: Vector
    active: tuple[int, ...]
    coefficients: tuple[Fraction, ...]


def _subsets_lex(n: int) -> Iterator[tuple[int, ...]]:
    """All subsets of range(n) as sorted tuples, in lexicographic order."""

    def rec(prefix: tuple[int, ...], start: int) -> Iterator[tuple[int, ...]]:
        yield prefix
        for i in range(start, n):
            yield from rec(prefix + (i,), i + 1)

    yield from rec((), 0)


def _project_tables(
    generators: Sequence[Vector],
    rho: Vector,
    pair: Sequence[Sequence[Fraction]],
    pair_rho: Sequence[Fraction],
    subset: Sequence[int] | None = None,
) -> tuple[Vector, tuple[int, ...], tuple[Fraction, ...]]:
    """Face search over precomputed pairing tables.

    ``pair[i][j]`` and ``pair_rho[i]`` are the inner products of the
    generators with each other and with rho.  ``subset`` restricts the
    search to the cone spanned by the named generators.
    """
    idx = list(range(len(generators))) if subset is None else list(subset)
    n = len(rho)
    for sel in _subsets_lex(len(idx)):
        chosen = [idx[k] for k in sel]
        rows = [[pair[i][j] for j in chosen] for i in chosen]
        rhs = [pair_rho[i] for i in chosen]
        coeff = solve_linear(rows, rhs)
        if coeff is None:
            continue  # dependent face; an independent one certifies the same point
        if any(c <= 0 for c in coeff):
            continue
        point = vzero(n)
        for c, i in zip(coeff, chosen):
            point = vadd(point, vscale(c, generators[i]))
        # dual feasibility of beta = point - rho against every generator
        ok = True
        for i in idx:
            s = sum((coeff[k] * pair[i][chosen[k]] for k in range(len(chosen))), ZERO) - pair_rho[i]
            if s < 0:
                ok = False
                break
        if not ok:
            continue
        beta = vsub(point, rho)
        coeffs = [ZERO] * len(generators)
        for c, i in zip(coeff, chosen):
            coeffs[i] = c
        return beta, tuple(chosen), tuple(coeffs)
    raise AssertionError("projection search exhausted without certificate")  # unreachable


def project_shifted_cone(generators: Sequence[Vector], rho: Vector, ip: InnerProduct) -> ConeProjection:
    """Closest point of cone(generators) - rho to the origin, exactly.

    Enumerate linearly independent generator subsets; for each, solve the
    stationarity system and keep the first (lexicographically least) one
    whose coefficients are positive and whose shifted point lies in the
    dual cone of all generators.  Those are the KKT conditions of the
    strictly convex minimisation, hence sufficient; by Caratheodory some
    independent subset always certifies the minimiser.
    """
    n = ip.dim
    if len(rho) != n:
        raise InputError(f"dimension mismatch: rho has length {len(rho)}, form has rank {n}")
    for g in generators:
        if len(g) != n:
            raise InputError(f"dimension mismatch: generator of length {len(g)}, form has rank {n}")
    pair = [[ip.pairing(a, b) for b in generators] for a in generators]
    pair_rho = [ip.pairing(a, rho) for a in generators]
    beta, active, coeffs = _project_tables(generators, rho, pair, pair_rho)
    return ConeProjection(beta=beta, complement=vadd(beta, rho), active=active, coefficients=coeffs)


def primitive_integer_ray(direction: Vector) -> tuple[int, ...]:
    """The unique integer point with coprime entries on the open ray through ``direction``."""
    d = vec(direction)
    if is_zero(d):
        raise DomainError("the zero vector spans no ray")
    denom = 1
    for e in d:
        denom = denom * e.denominator // gcd(denom, e.denominator)
    ints = [int(e * denom) for e in d]
    g = 0
    for v in ints:
        g = gcd(g, v)
    return tuple(v // g for v in ints)


def dual_cone_contains(weights: Sequence[Vector], lam: Vector, ip: InnerProduct) -> bool:
    """Whether (w, lam) >= 0 for every weight, exactly."""
    return all(ip.pairing(w, lam) >= 0 for w in weights)


def inequality_cone_is_origin(normals: Sequence[Vector], ip: InnerProduct) -> bool:
    """Decide exactly whether {x : (w, x) >= 0 for all w in normals} == {0}.

    The cone is {0} iff the defining functionals have trivial kernel and
    no choice of dim-1 of them cuts out a feasible ray.  (A pointed
    polyhedral cone other than {0} possesses an extreme ray, and every
    extreme ray is the kernel of dim-1 independent active functionals.)
    """
    n = ip.dim
    rows = [ip.apply(w) for w in normals]
    if n == 0:
        return True
    if kernel_basis(rows, n):
        return False
    for sel in itertools.combinations(range(len(rows)), n - 1):
        ker = kernel_basis([rows[i] for i in sel], n)
        if len(ker) != 1:
            continue
        ray = ker[0]
        for cand in (ray, vneg(ray)):
            if all(dot(r, cand) >= 0 for r in rows):
                return False
    return True


class Containment(Enum):
    NOT_CONTAINED = "not_contained"
    CONTAINED = "contained"
    STRICTLY_CONTAINED = "strictly_contained"


def halfspace_containment(weights: Sequence[Vector], rho: Vector, ip: InnerProduct) -> Containment:
    """Position of the dual cone C = {x : (w, x) >= 0} relative to the rho half-space.

    C lies in {(rho, x) >= 0} iff the shifted-cone projection vanishes;
    C - {0} lies in the open half-space iff additionally the cone
    C intersected with {(rho, x) <= 0} is the origin alone.
    """
    proj = project_shifted_cone(weights, rho, ip)
    if not is_zero(proj.beta):
        return Containment.NOT_CONTAINED
    if inequality_cone_is_origin(list(weights) + [vneg(rho)], ip):
        return Containment.STRICTLY_CONTAINED
    return Containment.CONTAINED
