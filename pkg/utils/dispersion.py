"""Lattice dispersion relation ω(ξ)² = m² + Σ(2 − 2cos ξⱼ) and its critical points.

Points are arrays whose last axis has length d; most evaluators are
vectorized over leading axes.
"""

import logging
from dataclasses import dataclass, field
from fractions import Fraction
from itertools import product
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.optimize import brentq, least_squares, minimize, minimize_scalar

from errors import (ClassificationConflict, DimensionMismatch, NotApplicable, NotConverged,
                    SecPole, SingularPoint)

logger = logging.getLogger(__name__)

QUARTER_TOL = 1e-9
CORANK_TOL = 1e-8
CRITICAL_TOL = 1e-10
DEDUP_TOL = 1e-8
SIGMA1PRIME_RTOL = 1e-8


@dataclass(frozen=True)
class DispersionRelation:
    """Wave (mass = 0) or Klein–Gordon (mass > 0) dispersion on ℤ^d."""

    d: int
    mass: float = 0.0

    def __post_init__(self):
        if self.d < 1:
            raise ValueError(f"Dimension must be ≥ 1, got {self.d}")
        if self.mass < 0:
            raise ValueError(f"Mass must be nonnegative, got {self.mass}")

    def _points(self, xi) -> np.ndarray:
        xi = np.asarray(xi, dtype=float)
        if xi.shape[-1:] != (self.d,):
            raise DimensionMismatch(f"Expected points with last axis {self.d}, got shape {xi.shape}")
        return xi

    def omega_sq(self, xi) -> np.ndarray:
        xi = self._points(xi)
        return self.mass ** 2 + np.sum(2.0 - 2.0 * np.cos(xi), axis=-1)

    def omega(self, xi):
        return np.sqrt(self.omega_sq(xi))

    def _nonsingular_omega(self, xi) -> np.ndarray:
        w = self.omega(xi)
        if np.any(w == 0):
            raise SingularPoint("ω vanishes at a lattice multiple of 2π (m⋆ = 0); ∇ω is undefined there")
        return w

    def grad(self, xi) -> np.ndarray:
        xi = self._points(xi)
        w = self._nonsingular_omega(xi)
        return np.sin(xi) / w[..., None]

    def hess(self, xi) -> np.ndarray:
        xi = self._points(xi)
        if xi.ndim != 1:
            raise DimensionMismatch("hess evaluates a single point")
        w = float(self._nonsingular_omega(xi))
        s = np.sin(xi)
        H = np.diag(np.cos(xi) / w) - np.outer(s, s) / w ** 3
        return 0.5 * (H + H.T)

    def group_speed_sq(self, xi) -> np.ndarray:
        """𝐕(ξ) = Σ sin²ξⱼ / Σ(2 − 2cos ξⱼ), which equals |∇ω|² in the wave case."""
        if self.mass != 0:
            raise NotApplicable("Group speed 𝐕 is defined for the wave case m⋆ = 0")
        xi = self._points(xi)
        den = np.sum(2.0 - 2.0 * np.cos(xi), axis=-1)
        if np.any(den == 0):
            raise SingularPoint("𝐕 is undefined at ξ = 0")
        return np.sum(np.sin(xi) ** 2, axis=-1) / den

    def phase(self, v, xi) -> np.ndarray:
        """φ(v, ξ) = v·ξ − ω(ξ)."""
        xi = self._points(xi)
        return xi @ np.asarray(v, dtype=float) - self.omega(xi)


def omega(rel: DispersionRelation, xi):
    return rel.omega(xi)


def grad_omega(rel: DispersionRelation, xi) -> np.ndarray:
    return rel.grad(xi)


def hess_omega(rel: DispersionRelation, xi) -> np.ndarray:
    return rel.hess(xi)


def group_speed_sq(rel: DispersionRelation, xi):
    return rel.group_speed_sq(xi)


def velocity_image(rel: DispersionRelation, points) -> np.ndarray:
    """Group velocities ∇ω at a batch of points."""
    return rel.grad(points)


# classification -----------------------------------------------------------

SIGMA0 = "Sigma_0"
SIGMA1_PRIME = "Sigma_1'"
SIGMA1_DOUBLE = "Sigma_1''"


def stratum_label(k: int) -> str:
    return f"Sigma_{k}"


@dataclass(frozen=True)
class CriticalPoint:
    xi: Tuple[float, ...]
    corank: int
    label: str
    velocity: Tuple[float, ...]
    eigenvalues: Tuple[float, ...] = field(default=(), compare=False)

    def to_dict(self) -> dict:
        return {
            'xi': list(self.xi),
            'corank': self.corank,
            'label': self.label,
            'velocity': list(self.velocity),
        }


def sigma1prime_residual(rel: DispersionRelation, xi) -> float:
    """Σ(cos ξⱼ + sec ξⱼ) − 2d; it vanishes exactly on the Σ₁′ locus."""
    xi = rel._points(xi)
    c = np.cos(xi)
    if np.any(np.abs(c) < 1e-12):
        raise SecPole("sec ξⱼ is unbounded: a coordinate sits at ±π/2")
    return float(np.sum(c + 1.0 / c) - 2 * rel.d)


def sigma1prime_point(rest: Sequence[float], d: Optional[int] = None) -> Optional[float]:
    """Solve the Σ₁′ equation for ξ₁ ∈ [0, π] given (ξ₂, …, ξ_d).

    With c = 2d − Σⱼ≥₂(cos ξⱼ + sec ξⱼ) the equation is u + 1/u = c for
    u = cos ξ₁; the two roots multiply to 1 so exactly one lies in [−1, 1]
    whenever |c| ≥ 2. Returns None when |c| < 2 (no solution).
    """
    rest = np.asarray(rest, dtype=float)
    d = d or len(rest) + 1
    c_rest = np.cos(rest)
    if np.any(np.abs(c_rest) < 1e-12):
        raise SecPole("sec ξⱼ is unbounded: a coordinate sits at ±π/2")
    c = 2 * d - float(np.sum(c_rest + 1.0 / c_rest))
    if abs(c) < 2:
        return None
    root = np.sqrt(c * c - 4.0)
    u = (c - root) / 2 if c > 0 else (c + root) / 2
    return float(np.arccos(np.clip(u, -1.0, 1.0)))


def _sigma1prime_batch(rest: np.ndarray, d: int) -> np.ndarray:
    """Vectorized sigma1prime_point; NaN where no solution exists."""
    c_rest = np.cos(rest)
    with np.errstate(divide='ignore', invalid='ignore'):
        c = 2 * d - np.sum(c_rest + 1.0 / c_rest, axis=-1)
        root = np.sqrt(c * c - 4.0)
        u = np.where(c > 0, (c - root) / 2, (c + root) / 2)
        xi1 = np.arccos(np.clip(u, -1.0, 1.0))
    bad = (np.abs(c) < 2) | ~np.isfinite(c) | np.any(np.abs(c_rest) < 1e-12, axis=-1)
    return np.where(bad, np.nan, xi1)


def _symbolic_corank(rel: DispersionRelation, xi: np.ndarray) -> Tuple[int, str]:
    quarter = np.abs(np.cos(xi)) <= QUARTER_TOL
    k = int(np.sum(quarter))
    if k >= 2:
        corank = k - 1
        return corank, SIGMA1_DOUBLE if corank == 1 else stratum_label(corank)
    if k == 1:
        return 0, SIGMA0
    c = np.cos(xi)
    terms = c + 1.0 / c
    residual = float(np.sum(terms) - 2 * rel.d)
    if abs(residual) <= SIGMA1PRIME_RTOL * max(1.0, float(np.sum(np.abs(terms)))):
        return 1, SIGMA1_PRIME
    return 0, SIGMA0


def classify(rel: DispersionRelation, point, tol: float = CORANK_TOL) -> CriticalPoint:
    """Corank of Hess ω at a point, labelled by the stratum it lies in.

    The corank is counted twice: from the eigenvalues of Hess ω (|λ| ≤ tol·‖H‖₂)
    and from the coordinate tests (number of coordinates at ±π/2, Σ₁′ residual).

    Raises:
        NotApplicable: for m⋆ > 0
        ClassificationConflict: the two counts disagree
    """
    if rel.mass != 0:
        raise NotApplicable("Critical-point strata are classified for the wave case only")
    xi = rel._points(point)
    H = rel.hess(xi)
    eig = np.linalg.eigvalsh(H)
    scale = float(np.max(np.abs(eig)))
    eigen_corank = int(np.sum(np.abs(eig) <= tol * scale))
    symbolic_corank, label = _symbolic_corank(rel, xi)
    if eigen_corank != symbolic_corank:
        raise ClassificationConflict(
            f"Eigenvalue corank {eigen_corank} disagrees with coordinate label {label} at ξ={xi.tolist()}",
            eigen_corank, symbolic_corank)
    return CriticalPoint(
        xi=tuple(float(x) for x in xi),
        corank=eigen_corank,
        label=label,
        velocity=tuple(float(g) for g in rel.grad(xi)),
        eigenvalues=tuple(float(e) for e in eig),
    )


# critical-point search -------------------------------------------------------

def _wrap(xi: np.ndarray) -> np.ndarray:
    """Map angles into (−π, π]."""
    out = np.mod(xi + np.pi, 2 * np.pi) - np.pi
    return np.where(out <= -np.pi + 1e-15, np.pi, out)


def _branch_roots(F, w_max: float, samples: int = 2048) -> List[float]:
    grid = np.linspace(w_max / samples, w_max, samples)
    values = np.array([F(w) for w in grid])
    scale = max(1.0, float(np.max(np.abs(values))))
    roots = []
    for i in range(len(grid) - 1):
        a, b = values[i], values[i + 1]
        if a == 0:
            roots.append(float(grid[i]))
        elif a * b < 0:
            roots.append(float(brentq(F, grid[i], grid[i + 1], xtol=1e-15, rtol=4 * np.finfo(float).eps)))
    if values[-1] == 0 or abs(values[-1]) <= 1e-12 * scale:
        roots.append(w_max)
    # Tangential roots never change sign; look for small interior minima of |F|.
    mags = np.abs(values)
    for i in range(1, len(grid) - 1):
        if mags[i] <= mags[i - 1] and mags[i] <= mags[i + 1] and mags[i] < 1e-3 * scale:
            res = minimize_scalar(lambda w: abs(F(w)), bounds=(grid[i - 1], grid[i + 1]), method='bounded',
                                  options={'xatol': 1e-14})
            if abs(F(res.x)) <= 1e-11 * scale:
                roots.append(float(res.x))
    return roots


def find_critical_points(rel: DispersionRelation, v, tol: float = CRITICAL_TOL) -> List[CriticalPoint]:
    """All ξ ∈ (−π, π]^d with ∇ω(ξ) = v.

    Each coordinate is either arcsin(vⱼw) or π − arcsin(vⱼw) for w = ω(ξ);
    for every branch pattern the scalar equation Σ(2 − 2cos ξⱼ(w)) = w² is
    solved on (0, min(√(4d), 1/max|vⱼ|)].
    """
    if rel.mass != 0:
        raise NotApplicable("Critical-point search is implemented for the wave case only")
    v = np.asarray(v, dtype=float)
    if v.shape != (rel.d,):
        raise DimensionMismatch(f"Velocity must have {rel.d} components")
    if np.linalg.norm(v) >= 1:
        logger.debug(f"|v| = {np.linalg.norm(v):.6f} ≥ 1: no critical points")
        return []

    vmax = float(np.max(np.abs(v)))
    w_max = np.sqrt(4.0 * rel.d) if vmax == 0 else min(np.sqrt(4.0 * rel.d), 1.0 / vmax)
    candidates: List[np.ndarray] = []
    for signs in product((1.0, -1.0), repeat=rel.d):
        sigma = np.asarray(signs)

        def F(w, sigma=sigma):
            root = np.sqrt(np.clip(1.0 - (v * w) ** 2, 0.0, None))
            return float(np.sum(2.0 - 2.0 * sigma * root) - w * w)

        for w in _branch_roots(F, w_max):
            base = np.arcsin(np.clip(v * w, -1.0, 1.0))
            xi = np.where(sigma > 0, base, np.pi - base)
            candidates.append(_wrap(xi))

    found: List[np.ndarray] = []
    for xi in candidates:
        if rel.omega(xi) == 0:
            continue
        residual = np.linalg.norm(rel.grad(xi) - v)
        if residual > 1e-13:
            fit = least_squares(lambda z: rel.grad(z) - v, xi, jac=rel.hess, method='lm',
                                xtol=1e-15, ftol=1e-15, gtol=1e-15)
            if np.linalg.norm(rel.grad(fit.x) - v) < residual:
                xi = _wrap(fit.x)
                residual = np.linalg.norm(rel.grad(xi) - v)
        if residual > tol:
            continue
        if any(np.max(np.abs(_wrap(xi - other))) <= DEDUP_TOL for other in found):
            continue
        found.append(xi)

    points = []
    for xi in found:
        try:
            points.append(classify(rel, xi))
        except ClassificationConflict as e:
            logger.warning(f"⚠️ {e}")
            points.append(CriticalPoint(tuple(xi.tolist()), e.eigen_corank, "unclassified",
                                        tuple(rel.grad(xi).tolist())))
    logger.debug(f"🔍 {len(points)} critical points for v={v.tolist()}")
    return points


# sup of |∇ω| over the degenerate set --------------------------------------------

@dataclass
class B0Estimate:
    value: float
    converged: bool
    history: List[Tuple[int, float]]
    argmax: Tuple[float, ...]

    @property
    def margin(self) -> float:
        return 1.0 - self.value


def _speed(rel: DispersionRelation, xi: np.ndarray) -> np.ndarray:
    w = rel.omega(xi)
    with np.errstate(divide='ignore', invalid='ignore'):
        s = np.sqrt(np.sum(np.sin(xi) ** 2, axis=-1)) / w
    return np.where(w > 1e-6, s, np.nan)


def _grid(n: int, k: int) -> np.ndarray:
    axis = np.linspace(0.0, np.pi, n + 1)
    mesh = np.meshgrid(*([axis] * k), indexing='ij')
    return np.stack([m.ravel() for m in mesh], axis=-1)


def _sup_on_grid(rel: DispersionRelation, n: int) -> Tuple[float, np.ndarray]:
    d = rel.d
    best, arg = -np.inf, None

    # Slices with two coordinates fixed at π/2 contain every Σⱼ, j ≥ 1 (double prime).
    free = _grid(n, d - 2)
    pts = np.concatenate([np.full((len(free), 2), np.pi / 2), free], axis=1)
    speeds = _speed(rel, pts)
    i = int(np.nanargmax(speeds))
    if speeds[i] > best:
        best, arg = float(speeds[i]), pts[i]

    rest = _grid(n, d - 1)
    xi1 = _sigma1prime_batch(rest, d)
    ok = np.isfinite(xi1)
    if np.any(ok):
        pts = np.concatenate([xi1[ok, None], rest[ok]], axis=1)
        speeds = _speed(rel, pts)
        if np.any(np.isfinite(speeds)):
            i = int(np.nanargmax(speeds))
            if speeds[i] > best:
                best, arg = float(speeds[i]), pts[i]
    return best, arg


def _polish(rel: DispersionRelation, start: np.ndarray) -> Tuple[float, np.ndarray]:
    d = rel.d
    if np.sum(np.abs(np.cos(start)) <= 1e-9) >= 2:
        quarter = np.where(np.abs(np.cos(start)) <= 1e-9)[0][:2]
        free_idx = [j for j in range(d) if j not in quarter]

        def point(z):
            xi = np.full(d, np.pi / 2)
            xi[free_idx] = z
            return xi
        x0 = start[free_idx]
    else:
        def point(z):
            xi1 = sigma1prime_point(z, d) if np.all(np.abs(np.cos(z)) > 1e-12) else None
            return None if xi1 is None else np.concatenate([[xi1], z])
        x0 = start[1:]

    def objective(z):
        xi = point(np.asarray(z))
        if xi is None:
            return 0.0
        s = _speed(rel, xi)
        return 0.0 if not np.isfinite(s) else -float(s)

    if len(x0) == 0:
        return float(_speed(rel, start)), start
    res = minimize(objective, x0, method='Nelder-Mead', options={'xatol': 1e-10, 'fatol': 1e-13, 'maxiter': 4000})
    xi = point(np.asarray(res.x))
    if xi is None or -res.fun <= float(_speed(rel, start)):
        return float(_speed(rel, start)), start
    return -float(res.fun), xi


def estimate_b0(rel: DispersionRelation, grid_density: int = 16, tol: float = 1e-4) -> B0Estimate:
    """Numerical sup of |∇ω| over the degenerate critical set.

    Samples two-coordinate π/2 slices and the Σ₁′ locus (parametrized by
    ξ₂…ξ_d) on a grid, polishes the best sample locally, and repeats at double
    density.

    Raises:
        NotApplicable: d < 3 or m⋆ > 0
        NotConverged: doubling the grid moves the sup by more than tol
    """
    if rel.d < 3 or rel.mass != 0:
        raise NotApplicable("estimate_b0 needs d ≥ 3 and m⋆ = 0")
    history = []
    results = []
    for n in (grid_density, 2 * grid_density):
        value, arg = _sup_on_grid(rel, n)
        value, arg = _polish(rel, arg)
        history.append((n, value))
        results.append((value, arg))
        logger.debug(f"🔍 b0 grid n={n}: sup |∇ω| = {value:.10f}")
    change = abs(history[1][1] - history[0][1])
    if change > tol:
        raise NotConverged(f"b0 estimate moved by {change:.3e} under grid doubling", history)
    value, arg = max(results, key=lambda r: r[0])
    return B0Estimate(value=value, converged=True, history=history, argmax=tuple(float(x) for x in arg))


# exact-velocity rays ----------------------------------------------------------------

@dataclass(frozen=True)
class StratumRay:
    """Integer direction w and time scale so that x = m·w, t = m·t_per_unit has v = x/t fixed."""

    d: int
    label: str
    xi0: Tuple[float, ...]
    direction: Tuple[int, ...]
    t_per_unit: float
    target: Tuple[Fraction, int]

    @property
    def velocity(self) -> np.ndarray:
        return np.asarray(self.direction, dtype=float) / self.t_per_unit

    def sample(self, m: int) -> Tuple[Tuple[int, ...], float]:
        return tuple(m * w for w in self.direction), m * self.t_per_unit

    @property
    def phase_step(self) -> float:
        """Phase gained by the stationary term at ξ₀ per unit step in m, reduced to (−π, π]."""
        rel = DispersionRelation(self.d)
        step = self.t_per_unit * float(rel.phase(self.velocity, np.asarray(self.xi0)))
        return float(np.angle(np.exp(1j * step)))


TABLE1_TARGETS: Dict[Tuple[int, str], Tuple[Fraction, int]] = {
    (2, SIGMA1_PRIME): (Fraction(-5, 6), 0),
    (2, SIGMA1_DOUBLE): (Fraction(-3, 4), 0),
    (3, SIGMA1_PRIME): (Fraction(-4, 3), 0),
    (3, SIGMA1_DOUBLE): (Fraction(-5, 4), 0),
    (3, stratum_label(2)): (Fraction(-7, 6), 0),
    (4, SIGMA1_PRIME): (Fraction(-3, 2), 0),
    (4, SIGMA1_DOUBLE): (Fraction(-3, 2), 0),
    (4, stratum_label(2)): (Fraction(-5, 3), 0),
    (4, stratum_label(3)): (Fraction(-3, 2), 1),
}


def _ray_from_point(rel: DispersionRelation, xi0: np.ndarray, direction: Sequence[int]) -> StratumRay:
    v = rel.grad(xi0)
    w = np.asarray(direction, dtype=float)
    j = int(np.argmax(np.abs(w)))
    t_per_unit = w[j] / v[j]
    if np.linalg.norm(v * t_per_unit - w) > 1e-9 * np.linalg.norm(w):
        raise NotApplicable(f"Velocity {v.tolist()} is not parallel to direction {list(direction)}")
    label = classify(rel, xi0).label
    return StratumRay(rel.d, label, tuple(float(x) for x in xi0), tuple(int(x) for x in direction),
                      float(t_per_unit), TABLE1_TARGETS[(rel.d, label)])


def sigma1prime_on_direction(ratio: float, d: int = 2, samples: int = 400) -> np.ndarray:
    """A point of Σ₁′ with ξ₂ = … = ξ_d ∈ (π/2, π) whose velocity satisfies v₁ = ratio·vⱼ for j ≥ 2."""
    grid = np.linspace(np.pi / 2 + 1e-3, np.pi - 1e-3, samples)

    def g(x2):
        x1 = sigma1prime_point([x2] * (d - 1), d)
        return np.nan if x1 is None else np.sin(x1) - ratio * np.sin(x2)

    values = np.array([g(x) for x in grid])
    for a, b, fa, fb in zip(grid[:-1], grid[1:], values[:-1], values[1:]):
        if np.isfinite(fa) and np.isfinite(fb) and fa * fb < 0:
            x2 = brentq(g, a, b, xtol=1e-15, rtol=4 * np.finfo(float).eps)
            return np.array([sigma1prime_point([x2] * (d - 1), d)] + [x2] * (d - 1))
    raise NotApplicable(f"No Σ₁′ point with velocity ratio {ratio} in d = {d}")


def stratum_rays(d: int) -> List[StratumRay]:
    """Exact-velocity rays through the degenerate strata sampled by the decay suite."""
    rel = DispersionRelation(d)
    half = np.pi / 2
    if d == 2:
        return [
            _ray_from_point(rel, np.array([half, half]), (1, 1)),
            _ray_from_point(rel, sigma1prime_on_direction(2.0), (2, 1)),
        ]
    if d == 3:
        return [
            _ray_from_point(rel, np.full(3, half), (1, 1, 1)),
            _ray_from_point(rel, np.array([half, half, np.pi / 6]), (2, 2, 1)),
            _ray_from_point(rel, sigma1prime_on_direction(2.0, 3), (2, 1, 1)),
        ]
    if d == 4:
        return [
            _ray_from_point(rel, np.full(4, half), (1, 1, 1, 1)),
            _ray_from_point(rel, np.array([half, half, half, np.pi / 6]), (2, 2, 2, 1)),
            _ray_from_point(rel, np.array([half, half, np.pi / 6, np.pi / 6]), (2, 2, 1, 1)),
            _ray_from_point(rel, sigma1prime_on_direction(2.0, 4), (2, 1, 1, 1)),
        ]
    raise NotApplicable(f"No stratum rays tabulated for d = {d}")
