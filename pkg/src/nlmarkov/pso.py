"""Polynomial stochastic operators and their image supports.

The operator attached to a stochastic hypermatrix ``P`` of order ``l`` is

    B(x) = sum over ordered (i_1..i_l) of x_{i_1} ... x_{i_l} P_{i_1..i_l, .}

which we evaluate as a sum over multisets weighted by their multinomial
multiplicity.  Supports of images depend only on the support of the input,
so they are computed combinatorially from the row supports.
"""

from __future__ import annotations

from typing import Iterable

import numpy as np

from .hypermatrix import StochasticHypermatrix
from .simplex import (SimplexError, _rng, facet_interior_samples, from_mask, nonempty_subsets,
                      stochastic_vector, subset, support, to_mask)

BB_TOL = 1e-12
MAX_TABLE_M = 20


class Pso:
    """Operator ``x -> B(x)`` on the simplex defined by a hypermatrix."""

    def __init__(self, hypermatrix: StochasticHypermatrix):
        self.P = hypermatrix
        self.m = hypermatrix.m
        self.l = hypermatrix.l
        self._idx = np.array(hypermatrix.multisets, dtype=np.intp).reshape(-1, self.l) - 1
        self._mult = hypermatrix.multiplicities.astype(float)
        self._jac_terms = None
        self._table = None

    def __repr__(self):
        return f"Pso(m={self.m}, l={self.l})"

    def __call__(self, x):
        return self.evaluate(x)

    def _coerce(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.shape != (self.m,):
            raise SimplexError(f"dimension mismatch: operator acts on R^{self.m}, got shape {x.shape}")
        return x

    def monomials(self, x) -> np.ndarray:
        """Weights ``multiplicity(mu) * prod_{i in mu} x_i`` for every row."""
        x = self._coerce(x)
        return self._mult * np.prod(x[self._idx], axis=1)

    def evaluate(self, x) -> np.ndarray:
        """``B(x)``; the result is not renormalized."""
        w = self.monomials(x)
        # column sums of a contiguous array use pairwise summation
        out = np.ascontiguousarray((w[:, None] * self.P.rows).T).sum(axis=1)
        out.setflags(write=False)
        return out

    def evaluate_many(self, xs) -> np.ndarray:
        """Row-wise ``B`` on an ``(n, m)`` array."""
        xs = np.asarray(xs, dtype=float)
        w = self._mult * np.prod(xs[:, self._idx], axis=2)
        return w @ self.P.rows

    def _jacobian_terms(self):
        if self._jac_terms is None:
            terms = []
            for j in range(self.m):
                rows, coef, reduced = [], [], []
                for r, mu in enumerate(self._idx):
                    count = int(np.sum(mu == j))
                    if count:
                        rest = list(mu)
                        rest.remove(j)
                        rows.append(r)
                        coef.append(self._mult[r] * count)
                        reduced.append(rest)
                terms.append((np.array(rows, dtype=np.intp), np.array(coef),
                              np.array(reduced, dtype=np.intp).reshape(len(rows), self.l - 1)))
            self._jac_terms = terms
        return self._jac_terms

    def jacobian_many(self, xs) -> np.ndarray:
        """Jacobians ``J[n, k, j] = dB_k/dx_j`` of the polynomial extension to R^m."""
        xs = np.asarray(xs, dtype=float)
        jac = np.zeros((xs.shape[0], self.m, self.m))
        for j, (rows, coef, reduced) in enumerate(self._jacobian_terms()):
            if rows.size:
                d = coef * np.prod(xs[:, reduced], axis=2)
                jac[:, :, j] = d @ self.P.rows[rows]
        return jac

    def jacobian(self, x) -> np.ndarray:
        return self.jacobian_many(self._coerce(x)[None, :])[0]

    # -- supports ----------------------------------------------------------

    def image_support_mask(self, mask: int) -> int:
        out = 0
        for set_mask, row_mask in zip(self.P.set_masks, self.P.row_masks):
            if set_mask & ~mask == 0:
                out |= row_mask
        return out

    def image_support(self, a: Iterable[int]) -> frozenset[int]:
        """Union of ``supp(P_mu)`` over the multisets ``mu`` inside ``a``.

        This is ``supp(B(x))`` for every ``x`` whose support is exactly ``a``.
        """
        a = subset(a, self.m)
        if not a:
            raise SimplexError("image_support needs a nonempty set")
        return from_mask(self.image_support_mask(to_mask(a)))

    def image_support_table(self) -> np.ndarray:
        """``table[mask]`` = image support mask of every subset mask, ``0 <= mask < 2^m``.

        Built by an OR-zeta transform over subsets, O(m 2^m).
        """
        if self._table is None:
            if self.m > MAX_TABLE_M:
                raise ValueError(f"subset tables are limited to m <= {MAX_TABLE_M}")
            size = 1 << self.m
            table = np.zeros(size, dtype=np.int64)
            for set_mask, row_mask in zip(self.P.set_masks, self.P.row_masks):
                table[set_mask] |= row_mask
            idx = np.arange(size)
            for b in range(self.m):
                bit = 1 << b
                has = idx[(idx & bit) != 0]
                table[has] |= table[has ^ bit]
            table.setflags(write=False)
            self._table = table
        return self._table

    def vertex_images(self) -> list[np.ndarray]:
        return [self.P.vertex_row(i) for i in range(1, self.m + 1)]

    def iterate(self, x0, steps: int) -> list[np.ndarray]:
        """Trajectory ``[x0, B(x0), ..., B^steps(x0)]``.

        Each point is re-validated; the image of a point summing to ``1 + d``
        sums to about ``1 + l d``, so rounding drift would otherwise compound.
        """
        if steps < 0:
            raise ValueError("steps must be nonnegative")
        x = stochastic_vector(self._coerce(x0))
        path = [x]
        for _ in range(steps):
            x = stochastic_vector(self.evaluate(x))
            path.append(x)
        return path


def facet_image_check(op: Pso, a: Iterable[int], samples: int = 10, rng_seed=None) -> bool:
    """Sampled confirmation that ``B`` maps ``int Gamma_A`` into ``int Gamma_{U(A)}``.

    Supports of the images are taken with exact-zero semantics: face samples
    vanish exactly off ``a``, so absent monomials contribute exact zeros.
    """
    if samples < 1:
        raise ValueError("samples must be >= 1")
    expected = op.image_support(a)
    xs = facet_interior_samples(a, op.m, samples, _rng(rng_seed))
    return all(support(y, eps=0.0) == expected for y in op.evaluate_many(xs))


def bb_counterexample(op: Pso, samples: int = 5, rng_seed=None, points=None):
    """Find ``(x, k)`` with ``x_k = 0`` but ``B(x)_k > BB_TOL``, or ``None``.

    Probes every nonempty proper support pattern when ``m <= 10`` (random
    patterns otherwise) with ``samples`` face-interior points each, plus any
    explicit ``points``.
    """
    rng = _rng(rng_seed)
    m = op.m
    candidates = []
    if points is not None:
        candidates.append(np.atleast_2d(np.asarray(points, dtype=float)))
    if m <= 10:
        patterns = [a for a in nonempty_subsets(m) if len(a) < m]
    else:
        patterns = []
        for _ in range(samples):
            k = int(rng.integers(1, m))
            patterns.append(frozenset((rng.choice(m, size=k, replace=False) + 1).tolist()))
    for a in patterns:
        candidates.append(facet_interior_samples(a, m, samples, rng))
    for xs in candidates:
        ys = op.evaluate_many(xs)
        bad = (xs == 0) & (ys > BB_TOL)
        if bad.any():
            n, k = np.argwhere(bad)[0]
            return xs[n].copy(), int(k) + 1
    return None


def check_bb_factorization(op: Pso, samples: int = 5, rng_seed=None, *,
                           require_structure: bool = True, points=None) -> bool:
    """True iff ``B(x)_k = 0`` wherever ``x_k = 0`` on all probed points.

    Under the structural condition every output coordinate carries the
    matching input coordinate as a factor.  With ``require_structure`` the
    structural condition is checked first and a failure raises
    :class:`~nlmarkov.structure.StructureViolation`; pass ``False`` to use the
    function as a plain falsification probe.
    """
    if samples < 1:
        raise ValueError("samples must be >= 1")
    if require_structure:
        from .structure import StructureViolation, all_small_subsets_absorbing

        verdict = all_small_subsets_absorbing(op)
        if not verdict:
            raise StructureViolation(verdict.certificate)
    return bb_counterexample(op, samples, rng_seed, points) is None
