"""Symmetric stochastic hypermatrices keyed by index multisets.

A hypermatrix of order ``l`` and dimension ``m`` assigns a stochastic row to
every ordered tuple ``(i_1, ..., i_l)``.  Rows are assumed invariant under
permutations of the tuple, so storage is keyed by the sorted tuple (the
multiset) and the number of ordered tuples collapsing onto each multiset is
kept as an exact integer multiplicity.
"""

from __future__ import annotations

import hashlib
import itertools
import json
import math
from collections import Counter
from typing import Iterable, Mapping, Sequence

import numpy as np

from .simplex import RENORM_TOL, SimplexError, _rng, dirichlet_points, stochastic_vector, to_mask

SYMMETRY_TOL = 1e-9


class HypermatrixError(ValueError):
    pass


class MissingRow(HypermatrixError):
    def __init__(self, multiset):
        super().__init__(f"missing row for multiset {_key(multiset)}")
        self.multiset = tuple(multiset)


class BadRow(HypermatrixError):
    def __init__(self, multiset, reason):
        super().__init__(f"row {_key(multiset)} is not stochastic: {reason}")
        self.multiset = tuple(multiset)
        self.reason = reason


class SymmetryConflict(HypermatrixError):
    def __init__(self, tuple_):
        super().__init__(f"ordered tuple {_key(tuple_)} disagrees with another ordering of the same multiset")
        self.tuple = tuple(tuple_)


class AsymmetryTooLarge(SymmetryConflict):
    pass


def _key(multiset) -> str:
    return ",".join(str(i) for i in multiset)


def canonical_multisets(m: int, l: int) -> list[tuple[int, ...]]:
    """All sorted ``l``-tuples over ``1..m`` in lexicographic order."""
    return list(itertools.combinations_with_replacement(range(1, m + 1), l))


def multiplicity(multiset: Sequence[int]) -> int:
    """Number of distinct orderings of ``multiset`` (a multinomial coefficient)."""
    out = math.factorial(len(multiset))
    for c in Counter(multiset).values():
        out //= math.factorial(c)
    return out


def parse_multiset(key, m: int, l: int) -> tuple[int, ...]:
    """Parse ``"1,2"`` or ``(2, 1)`` into a validated ordered tuple."""
    if isinstance(key, str):
        try:
            items = tuple(int(t) for t in key.replace(" ", "").split(",") if t)
        except ValueError as exc:
            raise HypermatrixError(f"bad multiset key {key!r}") from exc
    elif isinstance(key, (int, np.integer)):
        items = (int(key),)
    else:
        items = tuple(int(i) for i in key)
    if len(items) != l:
        raise HypermatrixError(f"multiset key {key!r} has {len(items)} indices, expected {l}")
    if any(not 1 <= i <= m for i in items):
        raise HypermatrixError(f"multiset key {key!r} has indices outside 1..{m}")
    return items


class StochasticHypermatrix:
    """Validated, immutable order-``l`` dimension-``m`` stochastic hypermatrix.

    Build instances through :func:`from_entries` and friends rather than
    calling the constructor directly.
    """

    __slots__ = ("m", "l", "multisets", "rows", "multiplicities", "_index", "_row_views",
                 "row_masks", "set_masks")

    def __init__(self, m: int, l: int, rows: np.ndarray):
        self.m = m
        self.l = l
        self.multisets = tuple(canonical_multisets(m, l))
        rows = np.array(rows, dtype=float)
        rows.setflags(write=False)
        self.rows = rows
        self.multiplicities = np.array([multiplicity(mu) for mu in self.multisets], dtype=np.int64)
        self._index = {mu: r for r, mu in enumerate(self.multisets)}
        self._row_views = tuple(rows[r] for r in range(len(self.multisets)))
        # exact-zero supports: rows define the operator, no threshold applies
        self.row_masks = tuple(to_mask(np.flatnonzero(row > 0) + 1) for row in rows)
        self.set_masks = tuple(to_mask(mu) for mu in self.multisets)

    def __repr__(self):
        return f"StochasticHypermatrix(m={self.m}, l={self.l})"

    def __eq__(self, other):
        if not isinstance(other, StochasticHypermatrix):
            return NotImplemented
        return (self.m, self.l) == (other.m, other.l) and np.array_equal(self.rows, other.rows)

    def __hash__(self):
        return hash((self.m, self.l, self.rows.tobytes()))

    @property
    def n_rows(self) -> int:
        return len(self.multisets)

    def index_of(self, indices: Iterable[int]) -> int:
        mu = tuple(sorted(int(i) for i in indices))
        try:
            return self._index[mu]
        except KeyError:
            raise HypermatrixError(f"{_key(mu)} is not an index multiset of order {self.l} over 1..{self.m}") from None

    def row(self, indices: Iterable[int]) -> np.ndarray:
        """Row ``P_{i_1...i_l, .}`` for any ordering of the indices."""
        return self._row_views[self.index_of(indices)]

    def vertex_row(self, i: int) -> np.ndarray:
        """``P_{i...i, .}``, the image of the vertex ``e_i``."""
        return self.row((i,) * self.l)

    def entries(self) -> dict[tuple[int, ...], np.ndarray]:
        return dict(zip(self.multisets, self._row_views))

    def to_json(self) -> dict:
        return {
            "m": self.m,
            "l": self.l,
            "entries": {_key(mu): [float(v) for v in row] for mu, row in zip(self.multisets, self.rows)},
        }

    def digest(self) -> str:
        """SHA-256 of the canonical JSON form."""
        blob = json.dumps(self.to_json(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()

    def relabel_outputs(self, sigma: Sequence[int]) -> StochasticHypermatrix:
        """Hypermatrix of ``Q_sigma o B``: output coordinate ``k`` moves to ``sigma(k)``."""
        perm = _check_permutation(sigma, self.m)
        rows = np.zeros_like(self.rows)
        rows[:, np.array(perm) - 1] = self.rows
        return StochasticHypermatrix(self.m, self.l, rows)


def _check_permutation(perm: Sequence[int], m: int) -> tuple[int, ...]:
    perm = tuple(int(p) for p in perm)
    if sorted(perm) != list(range(1, m + 1)):
        raise HypermatrixError(f"{perm} is not a permutation of 1..{m}")
    return perm


def _validate_row(mu, vec, m: int) -> np.ndarray:
    try:
        return stochastic_vector(vec, m)
    except SimplexError as exc:
        raise BadRow(mu, str(exc)) from None


def _check_shape(m: int, l: int) -> None:
    if int(m) != m or m < 1:
        raise HypermatrixError(f"dimension m must be a positive integer, got {m!r}")
    if int(l) != l or l < 1:
        raise HypermatrixError(f"order l must be a positive integer, got {l!r}")


def from_entries(m: int, l: int, entries: Mapping) -> StochasticHypermatrix:
    """Build a hypermatrix from ``{multiset: row}``.

    Keys may be tuples or comma-separated strings in any order.  Several
    orderings of one multiset are accepted only if their rows agree within
    ``SYMMETRY_TOL``; the first one given is kept.
    """
    _check_shape(m, l)
    seen: dict[tuple[int, ...], tuple[tuple[int, ...], np.ndarray]] = {}
    for key, vec in entries.items():
        tup = parse_multiset(key, m, l)
        mu = tuple(sorted(tup))
        row = _validate_row(tup, vec, m)
        if mu in seen:
            if np.max(np.abs(seen[mu][1] - row)) > SYMMETRY_TOL:
                raise SymmetryConflict(tup)
            continue
        seen[mu] = (tup, row)
    rows = np.empty((math.comb(m + l - 1, l), m))
    for r, mu in enumerate(canonical_multisets(m, l)):
        if mu not in seen:
            raise MissingRow(mu)
        rows[r] = seen[mu][1]
    return StochasticHypermatrix(m, l, rows)


def from_ordered_array(array) -> StochasticHypermatrix:
    """Ingest a dense ``(m,)*(l+1)`` array ``p[i_1, ..., i_l, k]``.

    Orderings of the same multiset are averaged when they differ by at most
    ``SYMMETRY_TOL`` and rejected otherwise.
    """
    p = np.asarray(array, dtype=float)
    if p.ndim < 2 or len(set(p.shape)) != 1:
        raise HypermatrixError(f"expected an (m,)*(l+1) array, got shape {p.shape}")
    m, l = p.shape[0], p.ndim - 1
    rows = np.empty((math.comb(m + l - 1, l), m))
    for r, mu in enumerate(canonical_multisets(m, l)):
        orderings = sorted(set(itertools.permutations(mu)))
        block = np.array([p[tuple(i - 1 for i in t)] for t in orderings])
        if np.max(block.max(axis=0) - block.min(axis=0)) > SYMMETRY_TOL:
            spread = np.max(np.abs(block - block[0]), axis=1)
            raise AsymmetryTooLarge(orderings[int(np.argmax(spread))])
        rows[r] = _validate_row(mu, block.mean(axis=0), m)
    return StochasticHypermatrix(m, l, rows)


def from_qso(cubic) -> StochasticHypermatrix:
    """Quadratic stochastic operator ``V(x)_k = sum_ij p_ij,k x_i x_j`` as an order-2 hypermatrix."""
    p = np.asarray(cubic, dtype=float)
    if p.ndim != 3:
        raise HypermatrixError(f"a QSO needs a 3-index array, got {p.ndim}")
    return from_ordered_array(p)


def from_cso(quartic) -> StochasticHypermatrix:
    """Cubic stochastic operator (order 3) from a 4-index array."""
    p = np.asarray(quartic, dtype=float)
    if p.ndim != 4:
        raise HypermatrixError(f"a CSO needs a 4-index array, got {p.ndim}")
    return from_ordered_array(p)


def lift_order(p0: StochasticHypermatrix) -> StochasticHypermatrix:
    """Order ``l + 1`` hypermatrix inducing the same operator as ``p0``.

    Each new row is the average over the ``l + 1`` ways of dropping one
    position from the tuple, which reproduces ``p0``'s operator because the
    coordinates of a simplex point sum to one.
    """
    m, l = p0.m, p0.l
    rows = np.zeros((math.comb(m + l, l + 1), m))
    for r, mu in enumerate(canonical_multisets(m, l + 1)):
        for j, count in Counter(mu).items():
            dropped = list(mu)
            dropped.remove(j)
            rows[r] += (count / (l + 1)) * p0.row(dropped)
    return StochasticHypermatrix(m, l + 1, rows)


MODES = ("general", "vertex_fixing", "op_structured", "permuted_op")


def random_hypermatrix(m: int, l: int, mode: str = "general", rng_seed=None,
                       permutation: Sequence[int] | None = None) -> StochasticHypermatrix:
    """Random hypermatrix for test populations.

    ``general``        every row uniform on the simplex;
    ``vertex_fixing``  as general, but ``P_{i...i} = e_i``;
    ``op_structured``  the row of a multiset is uniform on the face spanned by
                       its distinct indices;
    ``permuted_op``    as op_structured, with the face relabelled by
                       ``permutation`` (drawn at random when omitted).
    """
    _check_shape(m, l)
    if mode not in MODES:
        raise HypermatrixError(f"unknown mode {mode!r}; expected one of {MODES}")
    rng = _rng(rng_seed)
    if permutation is not None:
        if mode != "permuted_op":
            raise HypermatrixError("a permutation only applies to mode 'permuted_op'")
        perm = np.array(_check_permutation(permutation, m))
    elif mode == "permuted_op":
        perm = rng.permutation(m) + 1
    else:
        perm = np.arange(1, m + 1)

    multisets = canonical_multisets(m, l)
    rows = np.zeros((len(multisets), m))
    for r, mu in enumerate(multisets):
        distinct = sorted(set(mu))
        if mode == "general":
            rows[r] = dirichlet_points(m, 1, rng)[0]
        elif mode == "vertex_fixing":
            if len(distinct) == 1:
                rows[r, distinct[0] - 1] = 1.0
            else:
                rows[r] = dirichlet_points(m, 1, rng)[0]
        else:
            face = perm[np.array(distinct) - 1] - 1
            rows[r, face] = dirichlet_points(len(face), 1, rng)[0]
    return StochasticHypermatrix(m, l, rows)


# -- JSON I/O -------------------------------------------------------------

def from_json(data: Mapping) -> StochasticHypermatrix:
    """Parse the ``{"m", "l", "entries"}`` document; all canonical keys are required."""
    try:
        m, l, entries = data["m"], data["l"], data["entries"]
    except (KeyError, TypeError) as exc:
        raise HypermatrixError(f"hypermatrix JSON needs keys m, l, entries ({exc})") from None
    if not isinstance(m, int) or not isinstance(l, int) or isinstance(m, bool) or isinstance(l, bool):
        raise HypermatrixError("m and l must be integers")
    if not isinstance(entries, Mapping):
        raise HypermatrixError("entries must be an object")
    return from_entries(m, l, entries)


def loads(text: str) -> StochasticHypermatrix:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise HypermatrixError(f"invalid JSON: {exc}") from None
    return from_json(data)


def dumps(p: StochasticHypermatrix, indent: int | None = 2) -> str:
    return json.dumps(p.to_json(), indent=indent)


__all__ = [
    "AsymmetryTooLarge", "BadRow", "HypermatrixError", "MissingRow", "MODES", "RENORM_TOL",
    "StochasticHypermatrix", "SymmetryConflict", "canonical_multisets", "dumps", "from_cso",
    "from_entries", "from_json", "from_ordered_array", "from_qso", "lift_order", "loads",
    "multiplicity", "random_hypermatrix",
]
