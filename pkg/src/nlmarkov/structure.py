"""Exact decision procedures: absorbing sets, orthogonality preservation, surjectivity.

Everything here is combinatorial.  Since ``supp(B(x))`` depends only on
``supp(x)`` through the image-support map ``U``, orthogonality preservation
and the facet preimage conditions reduce to finite checks on subsets, and
surjectivity is decided by the vertex permutation followed by the
structural condition ``supp(P_mu) <= pi(set(mu))`` on every row.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Sequence

import numpy as np

from .pso import Pso
from .simplex import (ZERO_EPS, _rng, complement, facet_interior_samples, from_mask, subset,
                      support, to_mask)

VERTEX_TOL = 1e-12
FACET_WARN_M = 15
FACET_MAX_M = 20


class StructureError(ValueError):
    pass


class Inapplicable(StructureError):
    """The structural decider needs vertex images forming a permutation."""


class StructureViolation(StructureError):
    def __init__(self, certificate):
        super().__init__(f"structural condition fails: {certificate}")
        self.certificate = certificate


# -- certificates ------------------------------------------------------------

@dataclass(frozen=True)
class RowViolation:
    """Row of ``multiset`` charges output ``k`` outside the allowed face."""
    multiset: tuple[int, ...]
    k: int

    def replay(self, op: Pso, permutation: Sequence[int] | None = None) -> bool:
        allowed = set(self.multiset) if permutation is None else {permutation[i - 1] for i in self.multiset}
        return op.P.row(self.multiset)[self.k - 1] > 0 and self.k not in allowed

    def to_json(self):
        return {"kind": "row", "multiset": list(self.multiset), "k": self.k}


@dataclass(frozen=True)
class PairViolation:
    """Disjoint ``a``, ``b`` whose image supports meet in ``common``."""
    a: frozenset[int]
    b: frozenset[int]
    common: frozenset[int]

    def replay(self, op: Pso) -> bool:
        return not (self.a & self.b) and bool(op.image_support(self.a) & op.image_support(self.b))

    def to_json(self):
        return {"kind": "pair", "a": sorted(self.a), "b": sorted(self.b), "common": sorted(self.common)}


@dataclass(frozen=True)
class FacetViolation:
    """``U(a_prime) = image`` although the condition wants ``a_prime == a`` and ``image == pi(a)``."""
    a: frozenset[int]
    a_prime: frozenset[int]
    image: frozenset[int]

    def to_json(self):
        return {"kind": "facet", "a": sorted(self.a), "a_prime": sorted(self.a_prime),
                "image": sorted(self.image)}


@dataclass(frozen=True)
class VertexViolation:
    """Vertex ``index`` maps to a non-vertex, or to a vertex already hit by ``collides_with``."""
    index: int
    image: tuple[float, ...]
    collides_with: int | None = None

    def to_json(self):
        return {"kind": "vertex", "index": self.index, "image": list(self.image),
                "collides_with": self.collides_with}


# -- verdicts -----------------------------------------------------------------

@dataclass(frozen=True)
class VertexMap:
    images: tuple[np.ndarray, ...]
    permutation: tuple[int, ...] | None
    violation: VertexViolation | None = None


@dataclass(frozen=True)
class StructureCheck:
    holds: bool
    certificate: RowViolation | None = None

    def __bool__(self):
        return self.holds


@dataclass(frozen=True)
class OpVerdict:
    is_op: bool
    method: str
    certificate: RowViolation | PairViolation | VertexViolation | None = None
    permutation: tuple[int, ...] | None = None

    def __bool__(self):
        return self.is_op


@dataclass(frozen=True)
class FacetCheck:
    holds: bool
    k: int
    certificate: FacetViolation | None = None

    def __bool__(self):
        return self.holds


class Reason(str, Enum):
    NO_VERTEX_PERMUTATION = "NoVertexPermutation"
    STRUCTURAL_PASS = "StructuralPass"
    STRUCTURAL_FAIL = "StructuralFail"


@dataclass
class SurjectivityVerdict:
    surjective: bool
    reason: Reason
    permutation: tuple[int, ...] | None = None
    certificate: RowViolation | VertexViolation | None = None
    oracle_cross_check: dict | None = field(default=None)

    def __bool__(self):
        return self.surjective


# -- vertex images and normalization --------------------------------------------

def _vertex_index(v: np.ndarray) -> int | None:
    j = int(np.argmax(v))
    others = np.delete(v, j)
    if abs(v[j] - 1.0) <= VERTEX_TOL and np.all(np.abs(others) <= VERTEX_TOL):
        return j + 1
    return None


def vertex_map(op: Pso) -> VertexMap:
    """Images ``B(e_i) = P_{i...i}`` and, when they are distinct vertices, the permutation."""
    images = tuple(op.vertex_images())
    perm: list[int] = []
    owner: dict[int, int] = {}
    for i, img in enumerate(images, start=1):
        j = _vertex_index(img)
        if j is None:
            return VertexMap(images, None, VertexViolation(i, tuple(map(float, img))))
        if j in owner:
            return VertexMap(images, None, VertexViolation(i, tuple(map(float, img)), owner[j]))
        owner[j] = i
        perm.append(j)
    return VertexMap(images, tuple(perm))


def inverse_permutation(perm: Sequence[int]) -> tuple[int, ...]:
    inv = [0] * len(perm)
    for i, p in enumerate(perm, start=1):
        inv[p - 1] = i
    return tuple(inv)


def normalize(op: Pso, perm: Sequence[int]) -> Pso:
    """Relabel outputs by ``perm^{-1}`` so that the vertices become fixed."""
    return Pso(op.P.relabel_outputs(inverse_permutation(perm)))


# -- absorbing sets -----------------------------------------------------------

def is_absorbing(op: Pso, a: Iterable[int]) -> bool:
    """``A^c`` equals the intersection of ``null(P_mu)`` over multisets inside ``A``.

    Equivalently ``U(A) = A``.  The full index set counts as absorbing.
    """
    a = subset(a, op.m)
    if not a:
        raise StructureError("absorbing sets are nonempty")
    if len(a) == op.m:
        return True
    return op.image_support(a) == a


def absorbing_sets(op: Pso) -> list[frozenset[int]]:
    """All absorbing nonempty subsets, in bitmask order."""
    table = op.image_support_table()
    masks = np.flatnonzero(table == np.arange(table.size))
    return [from_mask(int(mask)) for mask in masks if mask]


def _null_intersection(op: Pso, a: frozenset[int]) -> frozenset[int]:
    out = frozenset(range(1, op.m + 1))
    for mu in op.P.multisets:
        if set(mu) <= a:
            out &= complement(support(op.P.row(mu), eps=0.0), op.m)
    return out


def absorbing_equivalence_check(op: Pso, a: Iterable[int], samples: int = 10, rng_seed=None) -> bool:
    """Three characterizations of an absorbing ``A`` must agree.

    1. the null-set intersection over multisets in ``A`` equals ``A^c``;
    2. every sampled point of ``int Gamma_A`` is mapped into ``int Gamma_A``;
    3. the barycenter of ``Gamma_A`` is mapped into ``int Gamma_A``.
    """
    a = subset(a, op.m)
    if not a:
        raise StructureError("absorbing sets are nonempty")
    by_definition = _null_intersection(op, a) == complement(a, op.m)
    xs = facet_interior_samples(a, op.m, samples, _rng(rng_seed))
    invariant = all(support(y, eps=0.0) == a for y in op.evaluate_many(xs))
    x0 = np.zeros(op.m)
    x0[np.array(sorted(a)) - 1] = 1.0 / len(a)
    single = support(op.evaluate(x0), eps=0.0) == a
    return by_definition == invariant == single


def all_small_subsets_absorbing(op: Pso, permutation: Sequence[int] | None = None) -> StructureCheck:
    """Every ``A`` with ``|A| <= l`` is absorbing, i.e. ``supp(P_mu) <= set(mu)`` for all rows.

    With ``permutation`` the allowed face is ``pi(set(mu))`` instead.  When
    the check passes, every subset of the index set is absorbing.
    """
    if permutation is None:
        image_mask = list(op.P.set_masks)
    else:
        image_mask = [to_mask(permutation[i - 1] for i in mu) for mu in op.P.multisets]
    for mu, row_mask, allowed in zip(op.P.multisets, op.P.row_masks, image_mask):
        extra = row_mask & ~allowed
        if extra:
            k = min(from_mask(extra))
            return StructureCheck(False, RowViolation(mu, k))
    return StructureCheck(True)


# -- orthogonality preservation ----------------------------------------------------

def _op_combinatorial(op: Pso) -> OpVerdict:
    # U is monotone, so complementary pairs (A, A^c) are the only ones to check.
    table = op.image_support_table()
    full = (1 << op.m) - 1
    masks = np.arange(1, full, 2)  # contains index 1; each unordered pair once
    clash = table[masks] & table[full ^ masks]
    hit = np.flatnonzero(clash)
    if hit.size:
        a = int(masks[hit[0]])
        return OpVerdict(False, "combinatorial",
                         PairViolation(from_mask(a), from_mask(full ^ a), from_mask(int(clash[hit[0]]))))
    return OpVerdict(True, "combinatorial")


def _op_structural(op: Pso) -> OpVerdict:
    vmap = vertex_map(op)
    if vmap.permutation is None:
        raise Inapplicable(f"vertex images do not form a permutation: {vmap.violation}")
    perm = vmap.permutation
    check = all_small_subsets_absorbing(normalize(op, perm))
    cert = None
    if not check:
        cert = RowViolation(check.certificate.multiset, perm[check.certificate.k - 1])
    return OpVerdict(check.holds, "structural", cert, perm)


def is_orthogonal_preserving(op: Pso, method: str = "combinatorial") -> OpVerdict:
    """Decide whether ``x`` orthogonal to ``y`` always gives ``B(x)`` orthogonal to ``B(y)``.

    ``combinatorial`` works for any operator: ``U(A)`` and ``U(B)`` must be
    disjoint for every disjoint pair.  ``structural`` normalizes by the
    vertex permutation and checks the row condition; it raises
    :class:`Inapplicable` when there is no vertex permutation.
    """
    if method == "combinatorial":
        return _op_combinatorial(op)
    if method == "structural":
        return _op_structural(op)
    raise ValueError(f"unknown method {method!r}")


# -- facet preimage conditions --------------------------------------------------------

def _permuted_masks(m: int, perm: Sequence[int]) -> np.ndarray:
    idx = np.arange(1 << m)
    out = np.zeros_like(idx)
    for b in range(m):
        out |= ((idx >> b) & 1) << (perm[b] - 1)
    return out


def facet_preimage_condition(op: Pso, permutation: Sequence[int] | None, k: int) -> FacetCheck:
    """Preimage of ``int Gamma_{pi(A)}`` is exactly ``int Gamma_A`` for every ``|A| = k``.

    The preimage is the union of ``int Gamma_{A'}`` over the ``A'`` with
    ``U(A') = pi(A)``, so the condition says ``A`` is the only such set.
    """
    if permutation is None:
        raise StructureError("facet preimage conditions need the vertex permutation")
    m = op.m
    perm = tuple(int(p) for p in permutation)
    if sorted(perm) != list(range(1, m + 1)):
        raise StructureError(f"{perm} is not a permutation of 1..{m}")
    if not 1 <= k <= op.l:
        raise StructureError(f"k must lie in 1..{op.l}")
    if m > FACET_MAX_M:
        raise StructureError(f"subset enumeration is capped at m <= {FACET_MAX_M}")
    if m > FACET_WARN_M:
        warnings.warn(f"enumerating 2^{m} subsets", RuntimeWarning, stacklevel=2)

    table = op.image_support_table()
    pmask = _permuted_masks(m, perm)
    counts = np.bincount(table[1:], minlength=1 << m)
    idx = np.arange(1 << m)
    popcount = sum((idx >> b) & 1 for b in range(m))
    for a in idx[popcount == k]:
        target = int(pmask[a])
        if int(table[a]) != target:
            return FacetCheck(False, k, FacetViolation(from_mask(int(a)), from_mask(int(a)),
                                                       from_mask(int(table[a]))))
        if counts[target] != 1:
            others = np.flatnonzero(table == target)
            other = int(next(o for o in others if o != a))
            return FacetCheck(False, k, FacetViolation(from_mask(int(a)), from_mask(other),
                                                       from_mask(target)))
    return FacetCheck(True, k)


def facet_conditions(op: Pso, permutation: Sequence[int] | None) -> list[FacetCheck]:
    """Conditions for ``k = 1..l``."""
    return [facet_preimage_condition(op, permutation, k) for k in range(1, op.l + 1)]


# -- surjectivity ----------------------------------------------------------------

def decide_surjectivity(op: Pso) -> SurjectivityVerdict:
    """Exact surjectivity verdict.

    A surjective operator must send the vertices bijectively onto the
    vertices (a preimage of ``e_i`` forces ``P_{j...j} = e_i`` on its
    support).  Given that permutation, surjectivity is equivalent to the
    structural row condition of the normalized operator, which is also
    equivalent to orthogonality preservation.
    """
    vmap = vertex_map(op)
    if vmap.permutation is None:
        return SurjectivityVerdict(False, Reason.NO_VERTEX_PERMUTATION, certificate=vmap.violation)
    verdict = _op_structural(op)
    if verdict.is_op:
        return SurjectivityVerdict(True, Reason.STRUCTURAL_PASS, vmap.permutation)
    return SurjectivityVerdict(False, Reason.STRUCTURAL_FAIL, vmap.permutation, verdict.certificate)


__all__ = [
    "FacetCheck", "FacetViolation", "Inapplicable", "OpVerdict", "PairViolation", "Reason",
    "RowViolation", "StructureCheck", "StructureError", "StructureViolation", "SurjectivityVerdict",
    "VertexMap", "VertexViolation", "absorbing_equivalence_check", "absorbing_sets",
    "all_small_subsets_absorbing", "decide_surjectivity", "facet_conditions",
    "facet_preimage_condition", "inverse_permutation", "is_absorbing", "is_orthogonal_preserving",
    "normalize", "vertex_map", "ZERO_EPS",
]
