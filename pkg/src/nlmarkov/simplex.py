"""Points of the probability simplex, supports, faces and orthogonality.

Vectors are plain read-only ``numpy`` arrays; index sets are ``frozenset``
objects of 1-based indices, so that ``{1, 2}`` names the edge between the
first two vertices.  Internally subsets are also handled as bitmasks
(bit ``i - 1`` set for index ``i``).
"""

from __future__ import annotations

from typing import Iterable, Iterator

import numpy as np

ZERO_EPS = 1e-12
"""Default threshold below which a coordinate counts as zero."""

RENORM_TOL = 1e-9
"""Largest deviation of ``sum(x)`` from 1 that is silently renormalized."""

ROUNDING_TOL = 1e-14
"""Deviations this small are rounding noise and left alone."""


class SimplexError(ValueError):
    """Raised for malformed stochastic vectors or index sets."""


def stochastic_vector(coords: Iterable[float], m: int | None = None) -> np.ndarray:
    """Validate ``coords`` as a point of the simplex and return it read-only.

    Negative coordinates are rejected.  A sum within ``RENORM_TOL`` of one is
    renormalized (unless the deviation is mere rounding), anything further
    off raises :class:`SimplexError`.
    """
    x = np.array(coords, dtype=float).ravel()
    if x.size == 0:
        raise SimplexError("empty vector")
    if m is not None and x.size != m:
        raise SimplexError(f"expected {m} coordinates, got {x.size}")
    if not np.all(np.isfinite(x)):
        raise SimplexError("non-finite coordinate")
    if np.any(x < 0):
        raise SimplexError(f"negative coordinate {float(x.min())!r}")
    total = x.sum()
    if abs(total - 1.0) > RENORM_TOL:
        raise SimplexError(f"coordinates sum to {float(total)!r}, not 1")
    if abs(total - 1.0) > ROUNDING_TOL:
        x = x / total
    x.setflags(write=False)
    return x


def vertex(i: int, m: int) -> np.ndarray:
    """The vertex ``e_i`` (1-based) of the simplex in R^m."""
    x = np.zeros(m)
    x[i - 1] = 1.0
    x.setflags(write=False)
    return x


def barycenter(m: int) -> np.ndarray:
    x = np.full(m, 1.0 / m)
    x.setflags(write=False)
    return x


# -- index sets -------------------------------------------------------------

def subset(members: Iterable[int], m: int) -> frozenset[int]:
    """Validate a set of 1-based indices drawn from ``{1..m}``."""
    a = frozenset(int(i) for i in members)
    bad = [i for i in a if not 1 <= i <= m]
    if bad:
        raise SimplexError(f"indices {sorted(bad)} outside 1..{m}")
    return a


def complement(a: Iterable[int], m: int) -> frozenset[int]:
    return frozenset(range(1, m + 1)) - frozenset(a)


def to_mask(a: Iterable[int]) -> int:
    mask = 0
    for i in a:
        mask |= 1 << (i - 1)
    return mask


def from_mask(mask: int) -> frozenset[int]:
    out = []
    i = 1
    while mask:
        if mask & 1:
            out.append(i)
        mask >>= 1
        i += 1
    return frozenset(out)


def nonempty_subsets(m: int) -> Iterator[frozenset[int]]:
    """All nonempty subsets of ``{1..m}`` ordered by bitmask."""
    for mask in range(1, 1 << m):
        yield from_mask(mask)


def parse_subset(text: str, m: int) -> frozenset[int]:
    """Parse ``"1,3"`` into ``frozenset({1, 3})``."""
    try:
        items = [int(t) for t in text.replace(" ", "").split(",") if t]
    except ValueError as exc:
        raise SimplexError(f"bad index list {text!r}") from exc
    if not items:
        raise SimplexError("empty index set")
    return subset(items, m)


def parse_vector(text: str, m: int | None = None) -> np.ndarray:
    try:
        coords = [float(t) for t in text.replace(" ", "").split(",") if t]
    except ValueError as exc:
        raise SimplexError(f"bad vector {text!r}") from exc
    return stochastic_vector(coords, m)


# -- supports and orthogonality ---------------------------------------------

def support(x: np.ndarray, eps: float = ZERO_EPS) -> frozenset[int]:
    """Indices ``i`` (1-based) with ``x_i > eps``.

    ``eps=0`` gives exact-zero semantics, which is what structured inputs
    (exact zero rows, face samples) call for.
    """
    if eps < 0:
        raise SimplexError("eps must be nonnegative")
    return frozenset((np.flatnonzero(np.asarray(x) > eps) + 1).tolist())


def null_set(x: np.ndarray, eps: float = ZERO_EPS) -> frozenset[int]:
    return complement(support(x, eps), len(x))


def is_orthogonal(x: np.ndarray, y: np.ndarray, eps: float = ZERO_EPS) -> bool:
    """True iff ``x`` and ``y`` have disjoint supports."""
    if len(x) != len(y):
        raise SimplexError(f"dimension mismatch: {len(x)} vs {len(y)}")
    return not (support(x, eps) & support(y, eps))


# -- sampling ---------------------------------------------------------------

def _rng(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def dirichlet_points(m: int, n: int, rng) -> np.ndarray:
    """``n`` uniform points on the simplex in R^m, shape ``(n, m)``.

    Normalized exponentials; resamples the (probability zero) rows with an
    exactly vanishing coordinate so that every point is strictly interior.
    """
    rng = _rng(rng)
    g = rng.standard_exponential((n, m))
    bad = ~np.all(g > 0, axis=1)
    while bad.any():
        g[bad] = rng.standard_exponential((int(bad.sum()), m))
        bad = ~np.all(g > 0, axis=1)
    return g / g.sum(axis=1, keepdims=True)


def facet_interior_sample(a: Iterable[int], m: int, rng_seed=None) -> np.ndarray:
    """A Dirichlet(1,...,1) point of the relative interior of the face on ``a``.

    The result is zero exactly off ``a`` and strictly positive on ``a``.
    """
    idx = sorted(subset(a, m))
    if not idx:
        raise SimplexError("cannot sample the face of an empty set")
    x = np.zeros(m)
    x[np.array(idx) - 1] = dirichlet_points(len(idx), 1, rng_seed)[0]
    x.setflags(write=False)
    return x


def facet_interior_samples(a: Iterable[int], m: int, n: int, rng) -> np.ndarray:
    """``n`` face-interior samples at once, shape ``(n, m)``."""
    idx = np.array(sorted(subset(a, m))) - 1
    if idx.size == 0:
        raise SimplexError("cannot sample the face of an empty set")
    x = np.zeros((n, m))
    x[:, idx] = dirichlet_points(idx.size, n, rng)
    return x


def orthogonal_witness_pair(a: Iterable[int], b: Iterable[int], m: int,
                            rng_seed=None) -> tuple[np.ndarray, np.ndarray]:
    """Points with supports exactly ``a`` and ``b`` (which must be disjoint)."""
    a, b = subset(a, m), subset(b, m)
    if not a or not b:
        raise SimplexError("witness sets must be nonempty")
    if a & b:
        raise SimplexError(f"sets overlap in {sorted(a & b)}")
    rng = _rng(rng_seed)
    return facet_interior_sample(a, m, rng), facet_interior_sample(b, m, rng)
