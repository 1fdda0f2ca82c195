"""Oscillatory integrals on the torus and on ℝ^d.

- green_G: the lattice Green's function G(x, t), by a folded trapezoid rule
- oscint_I: I(v, t) = I₁ + I₂, split by an origin cutoff χ
- oscint_J: J(t, S, ψ) for polynomial phases and bump amplitudes

Every integral is refined by grid doubling until two successive values agree
to the requested relative tolerance. Grid sums are split into chunks whose
partial sums are combined with math.fsum in chunk order, so results do not
depend on the number of worker threads.
"""

import math
import logging
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Dict, Iterator, List, Optional, Sequence, Tuple

import mpmath
import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy.integrate import quad
from scipy.interpolate import CubicSpline
from scipy.special import ive

from dispersion import DispersionRelation
from errors import BudgetExceeded, DimensionMismatch, NotApplicable, NotConverged, TooLarge
from polynomial import SparsePoly, parse_poly
from workers import chunked_sum

logger = logging.getLogger(__name__)

DEFAULT_BUDGET = 2e9
DEFAULT_RTOL = 1e-10
ATOL = 1e-13
CHUNK_POINTS = 1 << 18
MAX_REFINEMENTS = 8
OSC_FACTOR = 4
TORUS_BOX = 1.5 * math.pi
SPLINE_SPACING = 0.02


# amplitudes ------------------------------------------------------------------------

def bump(s) -> np.ndarray:
    """exp(1 − 1/(1 − s²)) on |s| < 1, zero outside; equals 1 at s = 0."""
    s = np.asarray(s, dtype=float)
    out = np.zeros_like(s)
    inside = np.abs(s) < 1
    out[inside] = np.exp(1.0 - 1.0 / (1.0 - s[inside] ** 2))
    return out


def flat_bump(s) -> np.ndarray:
    """exp(1 − 1/(1 − s⁴)) on |s| < 1, zero outside; 1 − s⁴ + O(s⁸) near the origin."""
    s = np.asarray(s, dtype=float)
    out = np.zeros_like(s)
    inside = np.abs(s) < 1
    out[inside] = np.exp(1.0 - 1.0 / (1.0 - s[inside] ** 4))
    return out


def smooth_step(s) -> np.ndarray:
    """C^∞ transition: 0 for s ≤ 0, 1 for s ≥ 1."""
    s = np.asarray(s, dtype=float)

    def f(x):
        safe = np.where(x > 0, x, 1.0)
        return np.where(x > 0, np.exp(-1.0 / safe), 0.0)

    a, b = f(s), f(1.0 - s)
    return a / (a + b)


def torus_partition(s) -> np.ndarray:
    """1-D periodizing bump: its 2π-translates sum to 1 and it equals 1 on |s| ≤ π/2."""
    s = np.asarray(s, dtype=float)

    def rho(z):
        return bump(z / TORUS_BOX)

    num = rho(s)
    den = rho(s - 2 * math.pi) + num + rho(s + 2 * math.pi)
    safe = np.where(num > 0, den, 1.0)
    return np.where(num > 0, num / safe, 0.0)


AMPLITUDE_KINDS = ('torus-bump', 'origin-cutoff', 'compact-bump', 'separable', 'flat-separable')


@dataclass(frozen=True)
class AmplitudeSpec:
    """A compactly supported C^∞ amplitude.

    kinds:
        torus-bump     product of torus_partition over coordinates (support |ξⱼ| < 1.5π)
        origin-cutoff  radial plateau, 1 on |ξ| ≤ inner and 0 on |ξ| ≥ radius
        compact-bump   radial bump(|x|/radius)
        separable      product of bump(xⱼ/radius)
        flat-separable product of flat_bump(xⱼ/radius)
    """

    kind: str = 'separable'
    radius: float = 1.0
    inner: float = 0.25

    def __post_init__(self):
        if self.kind not in AMPLITUDE_KINDS:
            raise ValueError(f"Unknown amplitude kind {self.kind!r}; expected one of {AMPLITUDE_KINDS}")
        if self.radius <= 0:
            raise ValueError("Amplitude radius must be positive")
        if self.kind == 'origin-cutoff' and not 0 <= self.inner < self.radius:
            raise ValueError("origin-cutoff needs 0 ≤ inner < radius")

    @property
    def half_width(self) -> float:
        return TORUS_BOX if self.kind == 'torus-bump' else self.radius

    @property
    def separable(self) -> bool:
        return self.kind in ('separable', 'flat-separable', 'torus-bump')

    def profile(self, s) -> np.ndarray:
        """1-D factor of a separable amplitude."""
        if self.kind == 'separable':
            return bump(np.asarray(s) / self.radius)
        if self.kind == 'flat-separable':
            return flat_bump(np.asarray(s) / self.radius)
        if self.kind == 'torus-bump':
            return torus_partition(s)
        raise NotApplicable(f"{self.kind} amplitude is not separable")

    def radial(self, r) -> np.ndarray:
        r = np.asarray(r, dtype=float)
        if self.kind == 'origin-cutoff':
            return 1.0 - smooth_step((r - self.inner) / (self.radius - self.inner))
        if self.kind == 'compact-bump':
            return bump(r / self.radius)
        raise NotApplicable(f"{self.kind} amplitude is not radial")

    def __call__(self, x) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=float))
        if self.separable:
            return np.prod(self.profile(x), axis=-1)
        return self.radial(np.linalg.norm(x, axis=-1))


# bookkeeping -------------------------------------------------------------------------

@dataclass
class QuadratureResult:
    value: complex
    N: int
    history: List[Tuple[int, complex]] = field(default_factory=list)
    converged: bool = False
    rel_change: float = float('inf')
    evaluations: int = 0
    parts: Dict[str, complex] = field(default_factory=dict)

    def to_dict(self) -> dict:
        v = complex(self.value)
        return {
            'value': [v.real, v.imag],
            'N': self.N,
            'converged': self.converged,
            'rel_change': self.rel_change,
            'evaluations': self.evaluations,
            'history': [[n, complex(h).real, complex(h).imag] for n, h in self.history],
        }


def _check_budget(count: float, budget: float, what: str):
    if count > budget:
        raise BudgetExceeded(f"{what} needs {count:.3e} integrand evaluations (budget {budget:.3e})",
                             requested=count, budget=budget)


def _ranges(total: int, chunk: int) -> Iterator[Tuple[int, int]]:
    for start in range(0, total, chunk):
        yield start, min(total, start + chunk)


def _even(n: float) -> int:
    n = int(math.ceil(n))
    return n + (n % 2)


def _refine(evaluate: Callable[[int], Tuple[complex, int]], N0: int, rtol: float,
            label: str, atol: float = ATOL) -> QuadratureResult:
    """Double N until successive values agree to rtol·max(|value|, atol)."""
    N = N0
    history: List[Tuple[int, complex]] = []
    evaluations = 0
    prev = None
    for _ in range(MAX_REFINEMENTS):
        value, count = evaluate(N)
        evaluations += count
        history.append((N, value))
        if prev is not None:
            change = abs(value - prev)
            scale = max(abs(value), atol)
            if change <= rtol * scale:
                logger.debug(f"✅ {label}: converged at N={N} (Δ={change:.2e}, {evaluations} evaluations)")
                return QuadratureResult(value, N, history, True, change / scale, evaluations)
        prev = value
        N *= 2
    raise NotConverged(f"{label} did not converge after {MAX_REFINEMENTS} refinements", history)


# plain torus rule -----------------------------------------------------------------------

def quad_torus(integrand: Callable[[np.ndarray], np.ndarray], d: int, N: int,
               budget: float = DEFAULT_BUDGET, threads: int = 1) -> complex:
    """(2π)^d times the mean of integrand over the uniform N^d grid on [0, 2π)^d."""
    if N < 4:
        raise ValueError("quad_torus needs N ≥ 4")
    total = N ** d
    _check_budget(total, budget, f"quad_torus(d={d}, N={N})")
    nodes = 2 * math.pi * np.arange(N) / N

    def block(rng):
        idx = np.unravel_index(np.arange(*rng), (N,) * d)
        pts = np.stack([nodes[i] for i in idx], axis=-1)
        return complex(np.sum(integrand(pts)))

    s = chunked_sum(block, _ranges(total, CHUNK_POINTS), threads)
    return (2 * math.pi) ** d * s / total


# folded torus rule for even kernels -------------------------------------------------------

def _sorted_tuples(g: int, lo: int, M: int) -> np.ndarray:
    """All nondecreasing g-tuples with entries in [lo, M)."""
    if g == 0:
        return np.zeros((1, 0), dtype=np.int64)
    if g == 1:
        return np.arange(lo, M, dtype=np.int64)[:, None]
    blocks = []
    for a in range(lo, M):
        tail = _sorted_tuples(g - 1, a, M)
        blocks.append(np.concatenate([np.full((len(tail), 1), a, dtype=np.int64), tail], axis=1))
    return np.concatenate(blocks)


def _multiplicity(T: np.ndarray) -> np.ndarray:
    """Number of distinct permutations of each sorted row."""
    g = T.shape[1]
    denom = np.ones(len(T))
    run = np.ones(len(T))
    for j in range(1, g):
        run = np.where(T[:, j] == T[:, j - 1], run + 1, 1)
        denom *= run
    return math.factorial(g) / denom


def _symmetric_sum(F: Callable[[np.ndarray], np.ndarray], x: Sequence[int], N: int,
                   budget: float, threads: int) -> Tuple[float, int]:
    """N^{-d} Σ over the N^d torus grid of Π cos(xⱼξⱼ)·F(ξ) for F even per coordinate and symmetric.

    The grid is folded onto k ∈ [0, N/2] per axis and, within every group of
    coordinates with equal |xⱼ|, onto sorted index tuples.
    """
    d = len(x)
    M = N // 2 + 1
    nodes = 2 * math.pi * np.arange(M) / N
    fold = np.full(M, 2.0)
    fold[0] = fold[-1] = 1.0

    by_value: Dict[int, List[int]] = {}
    for j, xj in enumerate(x):
        by_value.setdefault(abs(int(xj)), []).append(j)
    groups = sorted(by_value.items(), key=lambda kv: (-len(kv[1]), kv[0]))
    total = 1
    for _, coords in groups:
        total *= math.comb(M + len(coords) - 1, len(coords))
    _check_budget(total, budget, f"folded torus sum (d={d}, N={N})")

    def weights(T, xval):
        return _multiplicity(T) * np.prod(fold[T], axis=1) * np.prod(np.cos(xval * nodes[T]), axis=1)

    rest = []
    for xval, coords in groups[1:]:
        T = _sorted_tuples(len(coords), 0, M)
        rest.append((coords, T, weights(T, xval)))
    first_x, first_coords = groups[0]
    g0 = len(first_coords)

    def chunks():
        for a in range(M):
            tail = _sorted_tuples(g0 - 1, a, M)
            T0 = np.concatenate([np.full((len(tail), 1), a, dtype=np.int64), tail], axis=1)
            W0 = weights(T0, first_x)
            shape = (len(T0),) + tuple(len(T) for _, T, _ in rest)
            size = int(np.prod(shape))
            for start, stop in _ranges(size, CHUNK_POINTS):
                yield T0, W0, shape, start, stop

    def evaluate(item):
        T0, W0, shape, start, stop = item
        idx = np.unravel_index(np.arange(start, stop), shape)
        K = np.empty((stop - start, d), dtype=np.int64)
        K[:, first_coords] = T0[idx[0]]
        w = W0[idx[0]].copy()
        for (coords, T, W), ii in zip(rest, idx[1:]):
            K[:, coords] = T[ii]
            w *= W[ii]
        return float(np.sum(w * F(nodes[K])))

    s = chunked_sum(evaluate, chunks(), threads)
    return s.real / float(N) ** d, total


def _kernel_integrand(rel: DispersionRelation, t: float, kind: str):
    if kind == 'sin':
        # sin(tω)/ω with the removable value t at ω = 0
        return lambda xi: t * np.sinc(t * rel.omega(xi) / math.pi)
    if kind == 'cos':
        return lambda xi: np.cos(t * rel.omega(xi))
    raise ValueError(f"Unknown kernel kind {kind!r}")


def lattice_kernel(rel: DispersionRelation, x: Sequence[int], t: float, kind: str = 'sin',
                   rtol: float = DEFAULT_RTOL, budget: float = DEFAULT_BUDGET,
                   threads: int = 1) -> QuadratureResult:
    """(2π)^{-d} ∫_𝕋 e^{ix·ξ} K(ξ) dξ for K = sin(tω)/ω (kind 'sin') or cos(tω) (kind 'cos')."""
    x = tuple(int(v) for v in x)
    if len(x) != rel.d:
        raise DimensionMismatch(f"Lattice point must have {rel.d} coordinates")
    F = _kernel_integrand(rel, t, kind)
    span = max(abs(v) for v in x)
    N0 = _even(max(64, OSC_FACTOR * math.ceil(1 + abs(t)), 2 * (span + math.ceil(abs(t)) + 16)))
    result = _refine(lambda N: _symmetric_sum(F, x, N, budget, threads), N0, rtol,
                     f"{kind} kernel at x={x}, t={t}")
    result.value = float(np.real(result.value))
    return result


def green_G(rel: DispersionRelation, x: Sequence[int], t: float, rtol: float = DEFAULT_RTOL,
            budget: float = DEFAULT_BUDGET, threads: int = 1) -> QuadratureResult:
    """G(x, t) = (2π)^{-d} ∫_𝕋 e^{ix·ξ} sin(tω)/ω dξ.

    Raises:
        BudgetExceeded: the folded grid outgrows the evaluation budget
        NotConverged: grid doubling did not settle
    """
    return lattice_kernel(rel, x, t, 'sin', rtol, budget, threads)


def cosine_kernel(x: int, t: float, rtol: float = DEFAULT_RTOL) -> float:
    """d = 1 companion kernel (1/2π)∫ cos(xξ) cos(tω) dξ, which equals J_{2x}(2t)."""
    return float(lattice_kernel(DispersionRelation(1), (x,), t, 'cos', rtol).value)


def bessel_series(n: int, z: float, dps: int = 40) -> float:
    """J_n(z) from its power series at dps significant digits."""
    n = int(n)
    sign = -1 if n < 0 and n % 2 else 1
    n = abs(n)
    with mpmath.workdps(dps):
        half = mpmath.mpf(z) / 2
        term = half ** n / mpmath.factorial(n)
        total = term
        k = 0
        while True:
            k += 1
            term *= -(half * half) / (k * (n + k))
            total += term
            if k > abs(half) and abs(term) <= mpmath.eps * abs(total):
                break
        return sign * float(total)


def lattice_inv_D_kernel(x: Sequence[int]) -> float:
    """Kernel of 1/ω on ℤ^d: (2/√π) ∫₀^∞ Π ive(xⱼ, 2u²) du.

    From 1/ω = π^{-1/2} ∫₀^∞ s^{-1/2} e^{−sω²} ds and the lattice heat kernel
    e^{−2s} I_{xⱼ}(2s) per coordinate.

    Raises:
        NotApplicable: d = 1, where 1/ω is not integrable
    """
    x = np.abs(np.asarray(x, dtype=int))
    if x.size < 2:
        raise NotApplicable("The kernel of 1/ω exists only for d ≥ 2")

    def integrand(u):
        return float(np.prod(ive(x, 2.0 * u * u)))

    value, err = quad(integrand, 0.0, np.inf, limit=400, epsabs=1e-15, epsrel=1e-11)
    logger.debug(f"1/ω kernel at x={x.tolist()}: {value:.12e} (quad error {err:.1e})")
    return 2.0 / math.sqrt(math.pi) * value


# I(v, t) = I₁ + I₂ ------------------------------------------------------------------------

def _midpoint_nodes(half_width: float, N: int) -> Tuple[np.ndarray, float]:
    h = 2 * half_width / N
    return -half_width + h * (np.arange(N) + 0.5), h


def _hyperspherical(d: int, n: int, radius: float):
    """Nodes and weights for ∫_{|ξ|<radius} f(ξ) dξ with the radial Jacobian left to the caller.

    Returns (radii, radial weights, unit directions, angular weights): Gauss–Legendre
    in ρ and the polar angles, trapezoid in the azimuth.
    """
    r, wr = leggauss(n)
    r = 0.5 * radius * (r + 1)
    wr = 0.5 * radius * wr
    n_az = 2 * n
    az = 2 * math.pi * np.arange(n_az) / n_az
    dirs = np.stack([np.cos(az), np.sin(az)], axis=-1)
    wdir = np.full(n_az, 2 * math.pi / n_az)
    th, wth = leggauss(n)
    th = 0.5 * math.pi * (th + 1)
    wth = 0.5 * math.pi * wth
    for k in range(3, d + 1):
        # prepend one polar angle with weight sin^{k−2}θ
        new_dirs = np.concatenate([
            np.cos(th)[:, None, None] * np.ones((1, len(dirs), 1)),
            np.sin(th)[:, None, None] * dirs[None, :, :],
        ], axis=-1).reshape(-1, k)
        new_w = (wth * np.sin(th) ** (k - 2))[:, None] * wdir[None, :]
        dirs, wdir = new_dirs, new_w.ravel()
    return r, wr, dirs, wdir


def oscint_I(rel: DispersionRelation, v: Sequence[float], t: float, cutoff: Optional[AmplitudeSpec] = None,
             rtol: float = 1e-8, budget: float = DEFAULT_BUDGET, threads: int = 1) -> QuadratureResult:
    """I(v, t) = (2π)^{-d} ∫ e^{itφ(v,ξ)} η(ξ)/ω(ξ) dξ as I₁ (near the origin) plus I₂.

    I₂ carries η(1 − χ)/ω and is integrated by the midpoint rule on
    [−1.5π, 1.5π]^d. I₁ carries χ/ω with η ≡ 1 on supp χ and is integrated
    in polar coordinates, where the ρ^{d−1} Jacobian cancels the 1/ω singularity.

    Raises:
        NotApplicable: d < 2, m⋆ > 0, or a cutoff reaching beyond |ξ| = π/2
    """
    d = rel.d
    if d < 2 or rel.mass != 0:
        raise NotApplicable("oscint_I needs d ≥ 2 and m⋆ = 0")
    v = np.asarray(v, dtype=float)
    if v.shape != (d,):
        raise DimensionMismatch(f"Velocity must have {d} components")
    chi = cutoff or AmplitudeSpec('origin-cutoff', radius=0.5, inner=0.25)
    if chi.kind != 'origin-cutoff' or chi.radius > math.pi / 2:
        raise NotApplicable("The origin cutoff must be an origin-cutoff amplitude inside |ξ| ≤ π/2")
    eta = AmplitudeSpec('torus-bump')
    L = float(np.max(np.abs(v))) + 1.0

    def i2(N):
        total = N ** d
        _check_budget(total, budget, f"I₂ grid (d={d}, N={N})")
        nodes, h = _midpoint_nodes(TORUS_BOX, N)
        prof = eta.profile(nodes)

        def block(rng):
            idx = np.unravel_index(np.arange(*rng), (N,) * d)
            pts = np.stack([nodes[i] for i in idx], axis=-1)
            amp = np.prod(np.stack([prof[i] for i in idx], axis=-1), axis=-1)
            amp *= 1.0 - chi.radial(np.linalg.norm(pts, axis=-1))
            w = rel.omega(pts)
            live = amp != 0
            vals = np.zeros(len(pts), dtype=complex)
            vals[live] = np.exp(1j * t * (pts[live] @ v - w[live])) * amp[live] / w[live]
            return complex(np.sum(vals))

        return chunked_sum(block, _ranges(total, CHUNK_POINTS), threads) * h ** d, total

    def i1(n):
        r, wr, dirs, wdir = _hyperspherical(d, n, chi.radius)
        total = len(r) * len(dirs)
        _check_budget(total, budget, f"I₁ polar grid (d={d}, n={n})")

        def block(k):
            rho = r[k]
            pts = rho * dirs
            w = rel.omega(pts)
            amp = chi.radial(rho) * rho ** (d - 1) / w
            vals = np.exp(1j * t * (pts @ v - w)) * amp * wdir
            return complex(np.sum(vals)) * wr[k]

        return chunked_sum(block, range(len(r)), threads), total

    N0 = _even(max(64, OSC_FACTOR * math.ceil(1 + abs(t) * L * TORUS_BOX / math.pi)))
    part2 = _refine(i2, N0, rtol, f"I₂(v={v.tolist()}, t={t})")
    n0 = max(24, 2 * math.ceil(abs(t) * chi.radius * L) + 16)
    part1 = _refine(i1, n0, rtol, f"I₁(v={v.tolist()}, t={t})", atol=1e-12)

    scale = (2 * math.pi) ** (-d)
    value = scale * (part1.value + part2.value)
    rel_change = max(part1.rel_change, part2.rel_change)
    return QuadratureResult(
        value=value,
        N=part2.N,
        history=[(n, scale * h) for n, h in part2.history],
        converged=True,
        rel_change=rel_change,
        evaluations=part1.evaluations + part2.evaluations,
        parts={'I1': scale * part1.value, 'I2': scale * part2.value},
    )


# J(t, S, ψ) ---------------------------------------------------------------------------------

def _components(P: SparsePoly) -> List[List[int]]:
    """Connected groups of variables linked by shared monomials."""
    parent = list(range(P.nvars))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for g in P.support():
        used = [i for i, e in enumerate(g) if e]
        for i in used[1:]:
            parent[find(i)] = find(used[0])
    groups: Dict[int, List[int]] = {}
    for i in range(P.nvars):
        groups.setdefault(find(i), []).append(i)
    return sorted(groups.values())


def _project(P: SparsePoly, variables: Sequence[int]) -> SparsePoly:
    """Terms of P in the given variables, re-indexed to len(variables) variables."""
    keep = set(variables)
    out = {}
    for g, c in P.items():
        if all(e == 0 for i, e in enumerate(g) if i not in keep):
            out[tuple(g[i] for i in variables)] = c
    return SparsePoly(len(variables), out)


def _gradient_bound(P: SparsePoly, half_width: float, samples: int = 17) -> float:
    n = P.nvars
    axis = np.linspace(-half_width, half_width, samples)
    mesh = np.meshgrid(*([axis] * n), indexing='ij')
    pts = np.stack([m.ravel() for m in mesh], axis=-1)
    sq = sum(g.evaluate(pts) ** 2 for g in P.gradient())
    return float(np.sqrt(np.max(sq))) if n else 0.0


def _affine_variable(P: SparsePoly) -> Optional[int]:
    for i in range(P.nvars):
        if all(g[i] <= 1 for g in P.support()):
            return i
    return None


def _profile_transform(profile, half_width: float, N: int, k_max: float):
    """Cubic-spline table of k ↦ ∫ cos(k s) profile(s) ds for 0 ≤ k ≤ k_max."""
    nodes, h = _midpoint_nodes(half_width, N)
    wts = h * profile(nodes)
    knots = np.linspace(0.0, max(k_max, 1.0), int(math.ceil(max(k_max, 1.0) * half_width / SPLINE_SPACING)) + 8)
    blocks = np.array_split(knots, max(1, len(knots) // 512))
    table = np.concatenate([np.cos(np.outer(block, nodes)) @ wts for block in blocks])
    return CubicSpline(knots, table), len(knots) * N


def _tensor_J(P: SparsePoly, amp: AmplitudeSpec, t: float, N: int, collapse: Optional[int],
              budget: float, threads: int) -> Tuple[complex, int]:
    n = P.nvars
    R = amp.half_width
    nodes, h = _midpoint_nodes(R, N)
    keep = [i for i in range(n) if i != collapse]
    total = N ** len(keep)
    _check_budget(total, budget, f"J grid (n={n}, N={N})")
    evaluations = total

    if collapse is not None:
        A = P.partial(collapse)
        B = SparsePoly(n, {g: c for g, c in P.items() if g[collapse] == 0})
        k_max = 1.1 * abs(t) * _gradient_bound(P, R) + 1.0
        spline, cost = _profile_transform(amp.profile, R, N, k_max)
        evaluations += cost
    else:
        A, B, spline = None, P, None

    if not keep:
        origin = np.zeros((1, n))
        value = np.exp(1j * t * B.evaluate(origin)[0]) * spline(abs(t * A.evaluate(origin)[0]))
        return complex(value), evaluations

    prof = h * amp.profile(nodes) if amp.separable else None

    def block(rng):
        idx = np.unravel_index(np.arange(*rng), (N,) * len(keep))
        pts = np.zeros((rng[1] - rng[0], n))
        for j, i in enumerate(keep):
            pts[:, i] = nodes[idx[j]]
        if prof is not None:
            w = np.prod(np.stack([prof[i] for i in idx], axis=-1), axis=-1)
        else:
            w = amp(pts) * h ** n
        vals = np.exp(1j * t * B.evaluate(pts)) * w
        if spline is not None:
            vals *= spline(np.abs(t * A.evaluate(pts)))
        return complex(np.sum(vals))

    return chunked_sum(block, _ranges(total, CHUNK_POINTS), threads), evaluations


def oscint_J(phase: SparsePoly, amp: Optional[AmplitudeSpec] = None, t: float = 1.0,
             rtol: float = 1e-8, budget: float = DEFAULT_BUDGET, threads: int = 1) -> QuadratureResult:
    """J(t, S, ψ) = ∫ e^{itS(x)} ψ(x) dx by tensor trapezoid.

    For separable ψ the integral factors over groups of variables that share
    no monomial, and a variable in which S is affine, S = A·x_c + B, is
    integrated in closed form as e^{itB} ψ̂(tA).

    Raises:
        TooLarge: more than 4 variables
        BudgetExceeded, NotConverged: from the refinement loop
    """
    amp = amp or AmplitudeSpec('separable', radius=1.0)
    n = phase.nvars
    if n > 4:
        raise TooLarge("oscint_J handles at most 4 variables")
    R = amp.half_width

    origin = (0,) * n
    c0 = phase.coefficient(origin)
    if c0:
        phase = phase - SparsePoly.constant(n, c0)
    groups = _components(phase) if amp.separable else [list(range(n))]

    value = complex(np.exp(1j * t * float(c0)))
    evaluations = 0
    N_max = 0
    parts: Dict[str, complex] = {}
    rel_change = 0.0
    for group in groups:
        P = _project(phase, group) if amp.separable else phase
        collapse = _affine_variable(P) if amp.separable else None
        L = _gradient_bound(P, R)
        N0 = _even(max(64, OSC_FACTOR * math.ceil(1 + abs(t) * L * R)))
        res = _refine(lambda N: _tensor_J(P, amp, t, N, collapse, budget, threads), N0, rtol,
                      f"J component {group} at t={t}")
        value *= res.value
        evaluations += res.evaluations
        N_max = max(N_max, res.N)
        rel_change = max(rel_change, res.rel_change)
        parts[",".join(f"x{i + 1}" for i in group)] = res.value
    return QuadratureResult(value, N_max, [(N_max, value)], True, rel_change, evaluations, parts)


# model phases and perturbations -------------------------------------------------------------

@dataclass(frozen=True)
class ModelPhase:
    name: str
    poly: SparsePoly
    expected: Tuple[Fraction, int]


MODEL_PHASES = [
    ("x1^2", 1, (Fraction(-1, 2), 0)),
    ("x1^3", 1, (Fraction(-1, 3), 0)),
    ("x1^4", 1, (Fraction(-1, 4), 0)),
    ("x1^2*x2 - x2^3", 2, (Fraction(-2, 3), 0)),
    ("x1*x2*x3", 3, (Fraction(-1), 1)),
    ("x1^2*x2", 2, (Fraction(-1, 2), 0)),
    ("x1^2*x2^2", 2, (Fraction(-1, 2), 1)),
    ("x1*x2^2 - x1*x3^2", 3, (Fraction(-1), 1)),
]


def model_phase_catalog() -> List[ModelPhase]:
    """Model phases with their known uniform decay pair (β, p) for |J| ≲ t^β log^p t."""
    return [ModelPhase(text, parse_poly(text, n), expected) for text, n, expected in MODEL_PHASES]


@dataclass
class ProbeResult:
    t_values: np.ndarray
    shifts: np.ndarray
    magnitudes: np.ndarray

    def envelope(self, eps: Optional[float] = None) -> np.ndarray:
        """Max of |J| over the sampled shifts with |w| ≤ eps (all shifts when eps is None)."""
        norms = np.linalg.norm(self.shifts, axis=1)
        mask = np.ones(len(norms), dtype=bool) if eps is None else norms <= eps + 1e-15
        return np.max(self.magnitudes[mask], axis=0)


def perturbation_probe(phase: SparsePoly, eps: float, count: int, t_schedule: Sequence[float],
                       amp: Optional[AmplitudeSpec] = None, seed: int = 0, rtol: float = 1e-8,
                       budget: float = DEFAULT_BUDGET, threads: int = 1) -> ProbeResult:
    """|J(t, S + w·x, ψ)| for w = 0 and `count` shifts drawn uniformly from the ball |w| ≤ eps."""
    if eps < 0 or count < 1:
        raise ValueError("perturbation_probe needs eps ≥ 0 and count ≥ 1")
    n = phase.nvars
    rng = np.random.default_rng(seed)
    directions = rng.normal(size=(count, n))
    directions /= np.linalg.norm(directions, axis=1, keepdims=True)
    radii = eps * rng.random(count) ** (1.0 / n)
    shifts = np.concatenate([np.zeros((1, n)), directions * radii[:, None]])
    t_values = np.asarray(t_schedule, dtype=float)

    mags = np.zeros((len(shifts), len(t_values)))
    for i, w in enumerate(shifts):
        perturbed = phase + SparsePoly.linear_form([float(c) for c in w])
        for j, t in enumerate(t_values):
            mags[i, j] = abs(oscint_J(perturbed, amp, t, rtol, budget, threads).value)
    logger.info(f"🔍 perturbation probe: {len(shifts)} shifts × {len(t_values)} times, eps={eps}")
    return ProbeResult(t_values, shifts, mags)
