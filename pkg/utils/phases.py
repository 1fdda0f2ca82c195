"""Phase germs of φ(v, ξ) = v·ξ − ω(ξ) near critical points, and their normal forms.

Taylor expansions are written as φ(ξ₀ + A·y) = c + ω₀·S(y). When every base
coordinate is a multiple of π/2 (so cos and sin take values in {−1, 0, 1}),
the mass vanishes and A is rational, S is a series with exact rational
coefficients even though ω₀ itself is irrational.
"""

import logging
from dataclasses import dataclass, field
from fractions import Fraction
from math import pi
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from dispersion import CRITICAL_TOL, DispersionRelation
from errors import DimensionMismatch, InfeasibleError, NotApplicable, NotCritical, TooLarge
from newton import NewtonData, NewtonLimits, newton_data, polyhedron_vertices
from polynomial import (MAX_SERIES_DEGREE, Coeff, Exponent, SparsePoly, TruncatedSeries,
                        cos_coeffs, sin_coeffs, sqrt1p_coeffs)
from rational_lp import solve_lp

logger = logging.getLogger(__name__)

DEFAULT_DEGREE = 6
# Taylor phases of the odd-d conjecture run past the default Newton guards from d = 5 on.
CONJ_LIMITS = NewtonLimits(max_vars=8, max_terms=2000)


# weights and the classes H_α ------------------------------------------------

@dataclass(frozen=True)
class Weight:
    alpha: Tuple[Fraction, ...]

    def __post_init__(self):
        alpha = tuple(Fraction(a) for a in self.alpha)
        if any(a <= 0 for a in alpha):
            raise ValueError(f"Weights must be positive, got {alpha}")
        object.__setattr__(self, 'alpha', alpha)

    def __len__(self):
        return len(self.alpha)

    def degree(self, gamma: Sequence[int]) -> Fraction:
        return sum((a * g for a, g in zip(self.alpha, gamma)), Fraction(0))


def weight_wd(d: int) -> Weight:
    """(1/3, …, 1/3, 1/2) in d coordinates."""
    if d < 1:
        raise ValueError("d must be ≥ 1")
    return Weight(tuple([Fraction(1, 3)] * (d - 1) + [Fraction(1, 2)]))


def weighted_min_degree(P: SparsePoly, alpha: Weight) -> Union[Fraction, float]:
    """min over the support of γ·α; +∞ for the zero polynomial."""
    if len(alpha) != P.nvars:
        raise DimensionMismatch(f"Weight has {len(alpha)} entries for {P.nvars} variables")
    if P.is_zero():
        return float('inf')
    return min(alpha.degree(g) for g in P.support())


def is_in_H(P: SparsePoly, alpha: Weight) -> bool:
    """True when every monomial of P has α-degree strictly greater than 1."""
    return weighted_min_degree(P, alpha) > 1


def prune(P: SparsePoly, rel_tol: float = 1e-12) -> SparsePoly:
    """Drop float coefficients at or below rel_tol times the largest one."""
    if P.is_zero():
        return P
    top = max(abs(float(c)) for _, c in P.items())
    return SparsePoly(P.nvars, {g: c for g, c in P.items() if abs(float(c)) > rel_tol * top})


def embed(P: SparsePoly, nvars: int, positions: Sequence[int]) -> SparsePoly:
    """Rename variable i of P to variable positions[i] of an nvars-variable ring."""
    if len(positions) != P.nvars:
        raise DimensionMismatch(f"Need {P.nvars} positions, got {len(positions)}")
    out = {}
    for g, c in P.items():
        new = [0] * nvars
        for i, e in zip(positions, g):
            new[i] += e
        out[tuple(new)] = c
    return SparsePoly(nvars, out)


# model families ----------------------------------------------------------------

def make_Q(a, b, m: int) -> SparsePoly:
    """a(Σzⱼ)³ − bΣzⱼ³ in m variables."""
    if m < 1:
        raise ValueError("m must be ≥ 1")
    total = SparsePoly.linear_form([1] * m)
    cubes = SparsePoly(m, {tuple(3 * int(i == j) for j in range(m)): 1 for i in range(m)})
    return total ** 3 * Fraction(a) - cubes * Fraction(b)


def make_Y(k: int) -> SparsePoly:
    """4(Σ z_{2j−1})³ − Σ z_{2j−1}³ − 3Σ z_{2j−1}z_{2j}² in 2k variables."""
    if k < 1:
        raise ValueError("k must be ≥ 1")
    n = 2 * k
    odd = [2 * j for j in range(k)]
    out = embed(make_Q(4, 1, k), n, odd)
    for j in range(k):
        gamma = [0] * n
        gamma[2 * j] = 1
        gamma[2 * j + 1] = 2
        out = out + SparsePoly.monomial(gamma, -3)
    return out


def make_T(k: int, order: int) -> SparsePoly:
    """Σⱼ (z_{2j−1} − z_{2j})^order + (z_{2j−1} + z_{2j})^order in 2k variables."""
    n = 2 * k
    out = SparsePoly(n)
    for j in range(k):
        a = SparsePoly.variable(n, 2 * j)
        b = SparsePoly.variable(n, 2 * j + 1)
        out = out + (a - b) ** order + (a + b) ** order
    return out


def make_T1(k: int) -> SparsePoly:
    """z_d·(Σ z_{2j−1})² in d = 2k + 1 variables."""
    d = 2 * k + 1
    odd = SparsePoly.linear_form([int(i % 2 == 0 and i < d - 1) for i in range(d)])
    return SparsePoly.variable(d, d - 1) * odd ** 2


# Taylor expansion of φ -------------------------------------------------------------

def _quarter_turn(x: float) -> Optional[Tuple[int, int]]:
    """(cos x, sin x) as integers when x is a multiple of π/2, else None."""
    q = x / (pi / 2)
    r = round(q)
    if abs(q - r) > 1e-12:
        return None
    return [(1, 0), (0, 1), (-1, 0), (0, -1)][r % 4]


def _is_rational_matrix(A) -> bool:
    return all(isinstance(a, (int, Fraction)) for row in A for a in row)


@dataclass
class PhaseSeries:
    """φ(ξ₀ + A·y) = constant + omega0·series(y), truncated at series.D."""

    xi0: Tuple[float, ...]
    velocity: Tuple[float, ...]
    omega0: float
    omega0_sq: Coeff
    constant: float
    series: TruncatedSeries
    exact: bool
    linear_map: Optional[List[List]] = None

    @property
    def nvars(self) -> int:
        return self.series.nvars

    def quadratic_part(self) -> SparsePoly:
        return self.series.homogeneous_part(2)

    def hessian(self) -> np.ndarray:
        """Hess_y φ at y = 0."""
        n = self.nvars
        H = np.zeros((n, n))
        for g, c in self.quadratic_part().items():
            idx = [i for i, e in enumerate(g) for _ in range(e)]
            i, j = idx
            if i == j:
                H[i, i] = 2 * float(c)
            else:
                H[i, j] = H[j, i] = float(c)
        return self.omega0 * H

    def phase_poly(self) -> SparsePoly:
        """ω₀·S as a float polynomial, constant dropped."""
        return SparsePoly(self.nvars, {g: self.omega0 * float(c) for g, c in self.series.poly.items()})

    def evaluate(self, y) -> np.ndarray:
        return self.constant + self.omega0 * self.series.poly.evaluate(y)


def taylor_phase(rel: DispersionRelation, xi0: Sequence[float], v0: Optional[Sequence[float]] = None,
                 D: int = DEFAULT_DEGREE, linear_map: Optional[Sequence[Sequence]] = None) -> PhaseSeries:
    """Truncated Taylor series of φ(v₀, ξ₀ + A·y) at a critical point.

    Uses ω(ξ₀ + L)² = ω₀²(1 + u) with
    u = Σ 2[cos ξ₀ⱼ(1 − cos Lⱼ) + sin ξ₀ⱼ sin Lⱼ]/ω₀², so that
    S = Σ sin ξ₀ⱼ Lⱼ/ω₀² − (√(1+u) − 1) where Lⱼ = (A·y)ⱼ.

    Args:
        rel: dispersion relation
        xi0: base point
        v0: velocity; defaults to ∇ω(ξ₀), which makes ξ₀ critical
        D: truncation degree (≤ 8)
        linear_map: square matrix A; identity when omitted

    Raises:
        NotCritical: v0 differs from ∇ω(ξ₀) by more than 1e-10
        TooLarge: D above the supported series degree
    """
    d = rel.d
    xi0 = np.asarray(xi0, dtype=float)
    if xi0.shape != (d,):
        raise DimensionMismatch(f"Base point must have {d} coordinates")
    if D > MAX_SERIES_DEGREE:
        raise TooLarge(f"Series degree {D} exceeds {MAX_SERIES_DEGREE}")

    omega0 = float(rel.omega(xi0))
    grad = rel.grad(xi0)
    if v0 is None:
        v0 = grad
    else:
        v0 = np.asarray(v0, dtype=float)
        gap = float(np.linalg.norm(v0 - grad))
        if gap > CRITICAL_TOL:
            raise NotCritical(f"ξ₀ is not critical for v₀: |∇ω(ξ₀) − v₀| = {gap:.3e}")

    A = [[int(i == j) for j in range(d)] for i in range(d)] if linear_map is None else [list(r) for r in linear_map]
    if len(A) != d or any(len(r) != d for r in A):
        raise DimensionMismatch(f"Linear map must be {d}x{d}")

    lattice = [_quarter_turn(x) for x in xi0]
    exact = all(q is not None for q in lattice) and rel.mass == 0 and _is_rational_matrix(A)
    if exact:
        trig = [(Fraction(c), Fraction(s)) for c, s in lattice]
        omega_sq = sum((2 - 2 * c for c, _ in trig), Fraction(0))
        inv = 1 / omega_sq
    else:
        trig = [(float(np.cos(x)), float(np.sin(x))) for x in xi0]
        A = [[float(a) for a in row] for row in A]
        omega_sq = omega0 ** 2
        inv = 1.0 / omega_sq

    one_minus_cos = [-c for c in cos_coeffs(D)]
    one_minus_cos[0] = Fraction(0)
    sin_g = sin_coeffs(D)

    linear = TruncatedSeries.zero(d, D)
    u = TruncatedSeries.zero(d, D)
    for j in range(d):
        c, s = trig[j]
        L = TruncatedSeries(SparsePoly.linear_form(A[j]), D)
        if s != 0:
            linear = linear + L * s
            u = u + L.compose_germ(sin_g) * (2 * s)
        if c != 0:
            u = u + L.compose_germ(one_minus_cos) * (2 * c)
    linear = linear * inv
    u = u * inv

    root = u.compose_germ(sqrt1p_coeffs(D))
    S = linear - (root - 1)

    residual = S.homogeneous_part(1)
    if not residual.is_zero() and max(abs(float(c)) for _, c in residual.items()) > CRITICAL_TOL:
        raise NotCritical("Linear term of the phase series does not vanish")
    if not exact:
        S = TruncatedSeries(S.poly - residual, D)

    constant = float(np.dot(v0, xi0) - omega0)
    logger.debug(f"Taylor phase at ξ₀={xi0.tolist()}: {len(S.poly.support())} terms to degree {D}, "
                 f"{'exact' if exact else 'float'} coefficients")
    return PhaseSeries(
        xi0=tuple(float(x) for x in xi0),
        velocity=tuple(float(x) for x in v0),
        omega0=omega0,
        omega0_sq=omega_sq,
        constant=constant,
        series=S,
        exact=exact,
        linear_map=A if linear_map is not None else None,
    )


# the most degenerate point (π/2, …, π/2) ------------------------------------------

def _sheared_sum_map(d: int) -> List[List[int]]:
    """ξⱼ = yⱼ for j < d and ξ_d = y_d − Σ_{j<d} yⱼ."""
    A = [[int(i == j) for j in range(d)] for i in range(d)]
    A[d - 1] = [-1] * (d - 1) + [1]
    return A


@dataclass
class MostDegenerateForm:
    """S(Φy) = a·y_d² + b·Q_{1,1}^{d−1}(y′) + R(y) at ξ₀ = (π/2, …, π/2)."""

    d: int
    transform: List[List[int]]
    a: Fraction
    b: Fraction
    phase: PhaseSeries
    principal: SparsePoly
    remainder: SparsePoly
    remainder_min_degree: Union[Fraction, float]

    @property
    def remainder_in_H(self) -> bool:
        return self.remainder_min_degree > 1

    def normalizing_scales(self) -> Tuple[float, float]:
        """Diagonal scalings (λ′, λ_d) with y′ = λ′z′, y_d = λ_d z_d that turn ω₀(a·y_d² + b·Q) into z_d² + Q."""
        lam_d = 1.0 / np.sqrt(self.phase.omega0 * float(self.a))
        lam = np.cbrt(1.0 / (self.phase.omega0 * float(self.b)))
        return float(lam), float(lam_d)


def most_degenerate_form(d: int, D: int = DEFAULT_DEGREE) -> MostDegenerateForm:
    """Split the phase at the most degenerate point into y_d² and cubic principal parts.

    Raises:
        NotApplicable: d < 3
    """
    if d < 3:
        raise NotApplicable("The most-degenerate decomposition needs d ≥ 3")
    rel = DispersionRelation(d)
    Phi = _sheared_sum_map(d)
    ps = taylor_phase(rel, [pi / 2] * d, D=D, linear_map=Phi)
    S = ps.series.poly

    e_d2 = tuple([0] * (d - 1) + [2])
    a = S.coefficient(e_d2)
    b = S.coefficient(tuple([2, 1] + [0] * (d - 2))) / 3
    principal = SparsePoly.monomial(e_d2, a) + embed(make_Q(1, 1, d - 1), d, range(d - 1)) * b
    remainder = S - principal
    min_deg = weighted_min_degree(remainder, weight_wd(d))
    logger.info(f"{'✅' if min_deg > 1 else '❌'} d={d}: a={a}, b={b}, remainder w_d-degree ≥ {min_deg}")
    return MostDegenerateForm(d, Phi, a, b, ps, principal, remainder, min_deg)


# d = 4, Σ₂ --------------------------------------------------------------------------

KERNEL_VECTORS = ((1, -1, 0, 0), (1, 1, -2, 0))
ALPHA_STAR = Weight((Fraction(1, 3), Fraction(1, 3), Fraction(1, 2), Fraction(1, 2)))


@dataclass
class D4Sigma2Form:
    xi_star: float
    kernel_residual: float
    phase: PhaseSeries
    quadratic: SparsePoly
    cubic: SparsePoly
    remainder: SparsePoly

    @property
    def remainder_in_H(self) -> bool:
        return is_in_H(self.remainder, ALPHA_STAR)

    @property
    def is_d4_minus(self) -> bool:
        """The y₁, y₂ cubic is a nonzero multiple of y₁²y₂ − y₂³."""
        c = {g[:2]: float(v) for g, v in self.cubic.items()}
        lead = c.get((2, 1), 0.0)
        if lead == 0:
            return False
        scale = abs(lead)
        return (abs(c.get((0, 3), 0.0) + lead) <= 1e-10 * scale
                and abs(c.get((3, 0), 0.0)) <= 1e-10 * scale
                and abs(c.get((1, 2), 0.0)) <= 1e-10 * scale)


def d4_sigma2_form(xi_star: float = 1.0, D: int = DEFAULT_DEGREE, rel_tol: float = 1e-12) -> D4Sigma2Form:
    """Phase at (π/2, π/2, π/2, ξ⋆) in the coordinates A = (γ₁, γ₂, e₃, e₄).

    γ₁ = (1, −1, 0, 0) and γ₂ = (1, 1, −2, 0) span the kernel of the Hessian;
    the remainder after removing the quadratic part and the (y₁, y₂) cubic is
    checked against the weight (1/3, 1/3, 1/2, 1/2).
    """
    if _quarter_turn(xi_star) is not None and abs(np.cos(xi_star)) < 1e-12:
        raise NotApplicable("ξ⋆ = ±π/2 is the most degenerate point, not Σ₂")
    rel = DispersionRelation(4)
    xi0 = [pi / 2] * 3 + [xi_star]
    H = rel.hess(np.asarray(xi0))
    kernel_residual = max(float(np.linalg.norm(H @ np.asarray(g, dtype=float))) for g in KERNEL_VECTORS)

    columns = list(KERNEL_VECTORS) + [(0, 0, 1, 0), (0, 0, 0, 1)]
    A = [[columns[j][i] for j in range(4)] for i in range(4)]
    ps = taylor_phase(rel, xi0, D=D, linear_map=A)
    S = prune(ps.series.poly, rel_tol)
    quadratic = S.homogeneous_part(2)
    cubic = SparsePoly(4, {g: c for g, c in S.homogeneous_part(3).items() if g[2] == 0 and g[3] == 0})
    remainder = S - quadratic - cubic
    logger.debug(f"Σ₂ form at ξ⋆={xi_star}: kernel residual {kernel_residual:.2e}, "
                 f"remainder α⋆-degree ≥ {weighted_min_degree(remainder, ALPHA_STAR)}")
    return D4Sigma2Form(xi_star, kernel_residual, ps, quadratic, cubic, remainder)


# odd d: the conjectured rate -------------------------------------------------------

def _pair_rotation(d: int) -> List[List[int]]:
    """y_i = z_i + z_{i+1}, y_{i+1} = z_i − z_{i+1} for consecutive pairs; y_d = z_d."""
    M = [[0] * d for _ in range(d)]
    for i in range(0, d - 1, 2):
        M[i][i] = M[i][i + 1] = 1
        M[i + 1][i] = 1
        M[i + 1][i + 1] = -1
    M[d - 1][d - 1] = 1
    return M


def _matmul(A, B):
    n = len(A)
    return [[sum(A[i][k] * B[k][j] for k in range(n)) for j in range(n)] for i in range(n)]


def beyond_compact_faces(point: Sequence[int], vertices: Sequence[Exponent]) -> bool:
    """point ∈ conv(vertices) + ℝ₊ⁿ and strictly dominates some point of that set.

    Such points lie on no compact face, so they can never be vertices or
    contribute to a face part.
    """
    m = len(vertices)
    n = len(point)
    A_ub = [[Fraction(vertices[i][j]) for i in range(m)] for j in range(n)]
    cost = [sum(v) for v in vertices]
    try:
        res = solve_lp(cost, A_ub, [Fraction(p) for p in point], [[1] * m], [1])
    except InfeasibleError:
        return False
    return res.value < sum(point)


def interior_margin(point: Sequence[int], vertices: Sequence[Exponent],
                    coords: Sequence[int]) -> Optional[Fraction]:
    """Largest ε with point − ε·Σ_{j∈coords} eⱼ ∈ conv + ℝ₊ restricted to those coordinates.

    Only vertices vanishing outside ``coords`` generate the slice; a positive
    margin places the point in the relative interior of the slice. Returns
    None when the point is outside it.
    """
    coords = list(coords)
    outside = [j for j in range(len(point)) if j not in coords]
    if any(point[j] != 0 for j in outside):
        return None
    gens = [g for g in vertices if all(g[j] == 0 for j in outside)]
    if not gens:
        return None
    m = len(gens)
    A_ub = [[Fraction(gens[i][j]) for i in range(m)] + [1] for j in coords]
    b_ub = [Fraction(point[j]) for j in coords]
    c = [0] * m + [1]
    try:
        res = solve_lp(c, A_ub, b_ub, [[1] * m + [0]], [1], maximize=True)
    except InfeasibleError:
        return None
    return res.x[m]


@dataclass
class ConjPhase:
    d: int
    transform: List[List[int]]
    series: TruncatedSeries
    newton: NewtonData
    a: Fraction
    b: Fraction
    principal_matches: bool
    containments: Dict[str, bool] = field(default_factory=dict)
    combination: Dict[Exponent, Fraction] = field(default_factory=dict)
    combination_ok: bool = False

    @property
    def k(self) -> int:
        return (self.d - 1) // 2

    @property
    def expected_d_S(self) -> Fraction:
        return Fraction(6, 2 * self.d + 1)

    @property
    def verified(self) -> bool:
        return (self.newton.d_S == self.expected_d_S and self.newton.k_S == 1 and self.principal_matches
                and all(self.containments.values()) and self.combination_ok)


def _diagonal_combination(d: int, support: Sequence[Exponent]) -> Tuple[Dict[Exponent, Fraction], bool]:
    """λ₀·1 as a positive combination of 3e_{2j−1}, e_{2j−1} + 2e_{2j} and 2e_d."""
    k = (d - 1) // 2
    lam = Fraction(6, 2 * d + 1)
    weights: Dict[Exponent, Fraction] = {}
    for j in range(k):
        a_odd = [0] * d
        a_odd[2 * j] = 3
        a_even = [0] * d
        a_even[2 * j] = 1
        a_even[2 * j + 1] = 2
        weights[tuple(a_odd)] = lam / 6
        weights[tuple(a_even)] = lam / 2
    a_d = [0] * d
    a_d[d - 1] = 2
    weights[tuple(a_d)] = lam / 2
    point = [sum((w * g[i] for g, w in weights.items()), Fraction(0)) for i in range(d)]
    ok = (sum(weights.values()) == 1 and all(w > 0 for w in weights.values())
          and all(p == lam for p in point) and set(weights) <= set(support))
    return weights, ok


def build_conj_phase(d: int, D: int = DEFAULT_DEGREE,
                     limits: NewtonLimits = CONJ_LIMITS) -> ConjPhase:
    """Phase at (π/2, …, π/2) for odd d after the shear and pair rotation, with its Newton data.

    Besides d_S and k_S this checks that the quadratic and z′-cubic parts are
    a·z_d² and 2b·Y(z′), that the odd-order T terms lie off every compact face
    of 𝒩(Y), that the support of z_d(Σ z_{2j−1})² lies in the relative
    interior of 𝒩(S) ∩ {z_{2j} = 0}, and that λ₀·1 is a strictly positive
    combination of the expected vertices.

    Raises:
        NotApplicable: d even or d < 3
    """
    if d < 3 or d % 2 == 0:
        raise NotApplicable(f"The pair-rotated phase needs odd d ≥ 3, got {d}")
    k = (d - 1) // 2
    M = _matmul(_sheared_sum_map(d), _pair_rotation(d))
    ps = taylor_phase(DispersionRelation(d), [pi / 2] * d, D=D, linear_map=M)
    S = ps.series.poly

    e_d2 = tuple([0] * (d - 1) + [2])
    a = S.coefficient(e_d2)
    Y = embed(make_Y(k), d, range(d - 1))
    # Q_{1,1}^{d−1} of the rotated variables equals 2Y, and Y has z₁³ coefficient 3.
    b = S.coefficient(tuple([3] + [0] * (d - 1))) / 6
    cubic_prime = SparsePoly(d, {g: c for g, c in S.homogeneous_part(3).items() if g[d - 1] == 0})
    principal_matches = (S.homogeneous_part(2) == SparsePoly.monomial(e_d2, a)
                         and cubic_prime == Y * (2 * b))

    nd = newton_data(S, with_faces=False, limits=limits)

    containments: Dict[str, bool] = {}
    y_vertices = polyhedron_vertices(make_Y(k).support())
    for N in (2, 3):
        T = make_T(k, 2 * N + 1)
        containments[f"T{2 * N + 1}"] = all(beyond_compact_faces(g, y_vertices) for g in T.support())

    s_vertices = polyhedron_vertices((SparsePoly.monomial(e_d2, a) + Y * (2 * b)).support())
    slice_coords = [2 * j for j in range(k)] + [d - 1]
    margins = [interior_margin(g, s_vertices, slice_coords) for g in make_T1(k).support()]
    containments["T1"] = all(mg is not None and mg > 0 for mg in margins)

    combination, combination_ok = _diagonal_combination(d, S.support())

    result = ConjPhase(d, M, ps.series, nd, a, b, principal_matches, containments, combination, combination_ok)
    status = '✅' if result.verified else '❌'
    logger.info(f"{status} odd d={d}: d_S={nd.d_S} (expected {result.expected_d_S}), k_S={nd.k_S}, "
                f"containments {containments}")
    return result
