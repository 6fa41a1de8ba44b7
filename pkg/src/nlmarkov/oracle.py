"""Numerical cross-checks: preimage search, surjectivity sampling, injectivity probe.

None of this decides anything.  A converged preimage is evidence of
surjectivity at that target; a residual that stays away from zero is only
evidence against it.  The exact verdicts live in :mod:`nlmarkov.structure`.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .pso import Pso
from .simplex import barycenter, dirichlet_points, stochastic_vector, vertex

DEFAULT_TOL = 1e-9
DEFAULT_STARTS = 64
MAX_ITER = 5000
ARMIJO_C = 1e-4
POLISH_EVERY = 25


class PreconditionError(ValueError):
    pass


def _seed_sequence(rng_seed) -> np.random.SeedSequence:
    if isinstance(rng_seed, np.random.SeedSequence):
        return rng_seed
    return np.random.SeedSequence(rng_seed)


# -- simplex projection -------------------------------------------------------

def project_simplex(v) -> np.ndarray:
    """Euclidean projection of each row of ``v`` onto the probability simplex.

    Sort-and-threshold: find the largest ``rho`` with
    ``u_rho + (1 - sum_{j<=rho} u_j) / rho > 0`` on the sorted row ``u``.
    """
    v = np.asarray(v, dtype=float)
    flat = v.reshape(-1, v.shape[-1])
    n, m = flat.shape
    u = -np.sort(-flat, axis=1)
    css = np.cumsum(u, axis=1) - 1.0
    ks = np.arange(1, m + 1)
    cond = u - css / ks > 0
    rho = m - 1 - np.argmax(cond[:, ::-1], axis=1)
    theta = css[np.arange(n), rho] / (rho + 1)
    out = np.maximum(flat - theta[:, None], 0.0)
    return out.reshape(v.shape)


# -- objective -----------------------------------------------------------------

def objective(op: Pso, xs, y) -> np.ndarray:
    """``||B(x) - y||^2`` for each row of ``xs``."""
    r = op.evaluate_many(np.atleast_2d(xs)) - y
    return np.einsum("nk,nk->n", r, r)


def objective_gradient(op: Pso, xs, y) -> np.ndarray:
    """Analytic gradient ``2 J(x)^T (B(x) - y)`` of :func:`objective`."""
    xs = np.atleast_2d(np.asarray(xs, dtype=float))
    r = op.evaluate_many(xs) - y
    return 2.0 * np.einsum("nkj,nk->nj", op.jacobian_many(xs), r)


# -- preimage solver ---------------------------------------------------------------

@dataclass
class PreimageResult:
    target: np.ndarray
    best_x: np.ndarray
    residual: float
    starts_used: int
    converged: bool
    iterations: int = 0

    def to_json(self):
        return {"target": self.target.tolist(), "best_x": self.best_x.tolist(),
                "residual": self.residual, "starts_used": self.starts_used,
                "converged": self.converged, "iterations": self.iterations}


def _gauss_newton(op: Pso, x: np.ndarray, y: np.ndarray, steps: int = 30) -> tuple[np.ndarray, float]:
    """Gauss-Newton steps restricted to the face of ``x``'s current support."""
    f = float(objective(op, x, y)[0])
    for _ in range(steps):
        if f == 0.0:
            break
        face = np.flatnonzero(x > 0)
        if face.size < 2:
            break
        basis = np.zeros((op.m, face.size - 1))
        basis[face[:-1], np.arange(face.size - 1)] = 1.0
        basis[face[-1], :] = -1.0
        r = op.evaluate(x) - y
        coef, *_ = np.linalg.lstsq(op.jacobian(x) @ basis, -r, rcond=None)
        d = basis @ coef
        improved = False
        alpha = 1.0
        for _ in range(20):
            cand = project_simplex(x + alpha * d)
            fc = float(objective(op, cand, y)[0])
            if fc < f:
                x, f, improved = cand, fc, True
                break
            alpha *= 0.5
        if not improved:
            break
    return x, f


def solve_preimage(op: Pso, y, starts: int = DEFAULT_STARTS, tol: float = DEFAULT_TOL,
                   rng_seed=None, max_iter: int = MAX_ITER) -> PreimageResult:
    """Search the simplex for ``x`` with ``B(x) = y``.

    Multi-start projected gradient on ``||B(x) - y||^2`` with Armijo
    backtracking; starts are ``y`` itself, the barycenter and Dirichlet
    points.  All starts advance together; the current best point is polished
    with Gauss-Newton steps on its face every few iterations.  Converged
    means ``||B(x) - y||_2 <= tol``.
    """
    if starts < 1:
        raise ValueError("starts must be >= 1")
    if tol <= 0:
        raise ValueError("tol must be positive")
    y = stochastic_vector(y, op.m)
    rng = np.random.default_rng(_seed_sequence(rng_seed))
    m = op.m
    fixed = np.vstack([y, barycenter(m)])[:starts]
    xs = np.vstack([fixed, dirichlet_points(m, starts - len(fixed), rng)]) if starts > len(fixed) else fixed.copy()
    n = xs.shape[0]
    tol2 = tol * tol

    f = objective(op, xs, y)
    g = objective_gradient(op, xs, y)
    step = np.ones(n)
    active = f > 0
    history = f.copy()
    best_x, best_f = xs[int(np.argmin(f))].copy(), float(f.min())
    it = 0
    while it < max_iter and active.any() and best_f > tol2:
        it += 1
        rows = np.flatnonzero(active)
        pending = rows
        for _ in range(50):
            cand = project_simplex(xs[pending] - step[pending, None] * g[pending])
            d = cand - xs[pending]
            fc = objective(op, cand, y)
            ok = fc <= f[pending] + ARMIJO_C * np.einsum("nj,nj->n", g[pending], d)
            still_moving = np.abs(d).max(axis=1) > 1e-16
            accept = ok & still_moving
            take = pending[accept]
            xs[take], f[take] = cand[accept], fc[accept]
            active[pending[~still_moving]] = False
            pending = pending[~ok & still_moving]
            step[pending] *= 0.5
            if pending.size == 0:
                break
        active[pending] = False
        moved = rows[active[rows]]
        step[moved] = np.minimum(step[moved] * 2.0, 1e8)
        if moved.size:
            g[moved] = objective_gradient(op, xs[moved], y)
        if it % 50 == 0:
            # stagnation: less than a relative 1e-10 decrease over 50 iterations
            stalled = f > history * (1.0 - 1e-10)
            active &= ~stalled
            history = f.copy()
        k = int(np.argmin(f))
        if f[k] < best_f:
            best_x, best_f = xs[k].copy(), float(f[k])
        if it % POLISH_EVERY == 0 or not active.any():
            px, pf = _gauss_newton(op, best_x, y)
            if pf < best_f:
                best_x, best_f = px, pf
    if best_f > 0.0:
        px, pf = _gauss_newton(op, best_x, y)
        if pf < best_f:
            best_x, best_f = px, pf
    residual = float(np.linalg.norm(op.evaluate(best_x) - y))
    best_x.setflags(write=False)
    return PreimageResult(y, best_x, residual, n, residual <= tol, it)


# -- surjectivity sampling -----------------------------------------------------------------

@dataclass
class SurjectivitySample:
    targets_tested: int
    max_residual: float
    failures: list[PreimageResult] = field(default_factory=list)
    results: list[PreimageResult] = field(default_factory=list, repr=False)

    @property
    def consistent_with_surjective(self) -> bool:
        return not self.failures

    def to_json(self, include_results: bool = False):
        out = {
            "targets_tested": self.targets_tested,
            "max_residual": self.max_residual,
            "consistent_with_surjective": self.consistent_with_surjective,
            "failures": [r.to_json() for r in self.failures],
        }
        if include_results:
            out["results"] = [r.to_json() for r in self.results]
        return out


def surjectivity_targets(m: int, n_targets: int, rng) -> np.ndarray:
    """Random interior targets, then every vertex, then every edge midpoint."""
    parts = [dirichlet_points(m, n_targets, rng), np.eye(m)]
    mids = [(vertex(i, m) + vertex(j, m)) / 2 for i in range(1, m + 1) for j in range(i + 1, m + 1)]
    if mids:
        parts.append(np.array(mids))
    return np.vstack(parts)


def sample_surjectivity(op: Pso, n_targets: int = 50, starts: int = DEFAULT_STARTS,
                        tol: float = DEFAULT_TOL, rng_seed=None,
                        max_iter: int = MAX_ITER) -> SurjectivitySample:
    """Try to invert ``B`` at many targets; any unreached target is a failure."""
    if n_targets < 1:
        raise ValueError("n_targets must be >= 1")
    ss = _seed_sequence(rng_seed)
    target_seed, *solver_seeds = ss.spawn(1 + n_targets + op.m + op.m * (op.m - 1) // 2)
    targets = surjectivity_targets(op.m, n_targets, np.random.default_rng(target_seed))
    results = [solve_preimage(op, t, starts, tol, s, max_iter) for t, s in zip(targets, solver_seeds)]
    failures = [r for r in results if not r.converged]
    return SurjectivitySample(len(results), max(r.residual for r in results), failures, results)


# -- m = 2 closed form ----------------------------------------------------------------------

@dataclass
class M2Check:
    onto: bool
    f0: float
    f1: float
    fmin: float
    fmax: float
    vertex_fixing: bool

    def __bool__(self):
        return self.onto


def m2_polynomial_check(op: Pso, grid: int = 10_000, tol: float = DEFAULT_TOL) -> M2Check:
    """Onto-ness of ``f(x) = B((x, 1 - x))_1`` over ``[0, 1]``.

    ``f`` is a polynomial, so its image is ``[min f, max f]`` and ``B`` is
    onto the segment iff the grid extremes reach 0 and 1.  For a
    vertex-fixing operator also ``f(0) = 0`` and ``f(1) = 1`` are required.
    """
    if op.m != 2:
        raise ValueError(f"m2_polynomial_check needs m = 2, got m = {op.m}")
    s = np.linspace(0.0, 1.0, grid)
    f = op.evaluate_many(np.column_stack([s, 1.0 - s]))[:, 0]
    f0, f1 = float(f[0]), float(f[-1])
    e1_img, e2_img = op.P.vertex_row(1), op.P.vertex_row(2)
    ends_ok = math.isclose(f0, e2_img[0], abs_tol=1e-15) and math.isclose(f1, e1_img[0], abs_tol=1e-15)
    vertex_fixing = e1_img[0] == 1.0 and e2_img[1] == 1.0
    onto = ends_ok and f.min() <= tol and f.max() >= 1.0 - tol
    if vertex_fixing:
        onto = onto and abs(f0) <= tol and abs(f1 - 1.0) <= tol
    return M2Check(bool(onto), f0, f1, float(f.min()), float(f.max()), bool(vertex_fixing))


# -- injectivity probe --------------------------------------------------------------------

INJECTIVITY_REPORT_SCHEMA = {
    "type": "object",
    "required": ["n_pairs", "sep_tol", "img_tol", "min_image_distance", "min_distance_ratio",
                 "candidates", "confirmed"],
    "properties": {
        "n_pairs": {"type": "integer", "minimum": 1},
        "sep_tol": {"type": "number", "exclusiveMinimum": 0},
        "img_tol": {"type": "number", "exclusiveMinimum": 0},
        "min_image_distance": {"type": "number", "minimum": 0},
        "min_distance_ratio": {"type": "number", "minimum": 0},
        "confirmed": {"type": "integer", "minimum": 0},
        "candidates": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["x", "x_prime", "image_distance", "refined_image_distance",
                             "refined_separation", "confirmed"],
                "properties": {
                    "x": {"type": "array", "items": {"type": "number"}},
                    "x_prime": {"type": "array", "items": {"type": "number"}},
                    "image_distance": {"type": "number"},
                    "refined_image_distance": {"type": "number"},
                    "refined_separation": {"type": "number"},
                    "confirmed": {"type": "boolean"},
                },
            },
        },
    },
}


@dataclass
class InjectivityReport:
    n_pairs: int
    sep_tol: float
    img_tol: float
    min_image_distance: float
    min_distance_ratio: float
    candidates: list[dict] = field(default_factory=list)

    @property
    def confirmed(self) -> int:
        return sum(c["confirmed"] for c in self.candidates)

    def to_json(self):
        out = asdict(self)
        out["confirmed"] = self.confirmed
        return out


def _refine_pair(op: Pso, x, xp, sep_tol: float, penalty: float = 1e3, iters: int = 500):
    """Local minimization of ``||B(x) - B(x')||^2 + penalty * max(0, sep - ||x - x'||)^2``."""

    def phi(a, b):
        d = op.evaluate(a) - op.evaluate(b)
        gap = max(0.0, sep_tol - float(np.linalg.norm(a - b)))
        return float(d @ d) + penalty * gap * gap

    step = 1.0
    val = phi(x, xp)
    for _ in range(iters):
        d = op.evaluate(x) - op.evaluate(xp)
        diff = x - xp
        dist = float(np.linalg.norm(diff))
        ga = 2.0 * op.jacobian(x).T @ d
        gb = -2.0 * op.jacobian(xp).T @ d
        if dist < sep_tol and dist > 0:
            push = -2.0 * penalty * (sep_tol - dist) * diff / dist
            ga, gb = ga + push, gb - push
        while step > 1e-16:
            na, nb = project_simplex(x - step * ga), project_simplex(xp - step * gb)
            nv = phi(na, nb)
            if nv < val:
                x, xp, val = na, nb, nv
                step *= 2.0
                break
            step *= 0.5
        else:
            break
    return x, xp


def probe_injectivity(op: Pso, n_pairs: int = 10_000, sep_tol: float = 1e-2, img_tol: float = 1e-10,
                      rng_seed=None, refine: bool = True) -> InjectivityReport:
    """Look for well-separated pairs with (numerically) equal images.

    Only meaningful for surjective operators, where every collision would be
    a counterexample to bijectivity; candidates are refined locally and
    reported, never asserted.
    """
    from .structure import decide_surjectivity

    if not decide_surjectivity(op).surjective:
        raise PreconditionError("injectivity probe needs a surjective operator")
    if n_pairs < 1:
        raise ValueError("n_pairs must be >= 1")
    rng = np.random.default_rng(_seed_sequence(rng_seed))
    xs = dirichlet_points(op.m, n_pairs, rng)
    xp = dirichlet_points(op.m, n_pairs, rng)
    close = np.linalg.norm(xs - xp, axis=1) < sep_tol
    for _ in range(1000):
        if not close.any():
            break
        xp[close] = dirichlet_points(op.m, int(close.sum()), rng)
        close = np.linalg.norm(xs - xp, axis=1) < sep_tol
    keep = ~close
    xs, xp = xs[keep], xp[keep]
    sep = np.linalg.norm(xs - xp, axis=1)
    img = np.linalg.norm(op.evaluate_many(xs) - op.evaluate_many(xp), axis=1)
    candidates = []
    for i in np.flatnonzero(img <= img_tol):
        a, b = xs[i], xp[i]
        if refine:
            a, b = _refine_pair(op, a, b, sep_tol)
        rd = float(np.linalg.norm(op.evaluate(a) - op.evaluate(b)))
        rs = float(np.linalg.norm(a - b))
        candidates.append({
            "x": xs[i].tolist(), "x_prime": xp[i].tolist(), "image_distance": float(img[i]),
            "refined_image_distance": rd, "refined_separation": rs,
            "confirmed": bool(rd <= img_tol and rs >= sep_tol * (1 - 1e-9)),
        })
    return InjectivityReport(int(xs.shape[0]), sep_tol, img_tol, float(img.min()),
                             float((img / sep).min()), candidates)
