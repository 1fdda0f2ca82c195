"""Newton polyhedra of polynomial germs: distance, principal face, compact faces.

Every geometric statement is decided by exact rational linear programs
(see rational_lp). The polyhedron is conv(T) + ℝ₊ⁿ where T is the Taylor
support of the input polynomial.
"""

import json
import logging
from dataclasses import dataclass, field
from fractions import Fraction
from itertools import product
from typing import Dict, FrozenSet, List, Optional, Sequence, Tuple

import numpy as np
import sympy

from errors import Degenerate, FaceNotFound, InfeasibleError, NotApplicable, TooLarge
from polynomial import Exponent, SparsePoly
from rational_lp import solve_lp

logger = logging.getLogger(__name__)

EPSILON = Fraction(1, 1000)


@dataclass(frozen=True)
class NewtonLimits:
    """Size guards for `newton_data`; the defaults cover hand-written polynomials."""
    max_vars: int = 6
    max_terms: int = 200
    face_vars: int = 6
    face_vertices: int = 60


@dataclass(frozen=True)
class Face:
    """A face of the Newton polyhedron.

    ``normal``/``support`` describe a supporting hyperplane {κ·x = μ} chosen in
    the relative interior of the face's normal cone; ``rays`` lists the
    coordinate directions eⱼ contained in the face (empty for compact faces).
    """

    normal: Tuple[Fraction, ...]
    support: Fraction
    vertices: Tuple[Exponent, ...]
    members: Tuple[Exponent, ...]
    rays: Tuple[int, ...]
    dim: int

    @property
    def compact(self) -> bool:
        return not self.rays

    def contains(self, point: Sequence) -> bool:
        return sum(Fraction(k) * Fraction(x) for k, x in zip(self.normal, point)) == self.support

    def to_dict(self) -> dict:
        return {
            'normal': [str(k) for k in self.normal],
            'support': str(self.support),
            'vertices': [list(v) for v in self.vertices],
            'members': [list(m) for m in self.members],
            'rays': list(self.rays),
            'dim': self.dim,
        }


@dataclass(frozen=True)
class DistanceCertificate:
    """Primal convex combination reaching d_S·1 and a separating hyperplane below it."""

    weights: Dict[Exponent, Fraction]
    normal: Tuple[Fraction, ...]
    support: Fraction
    epsilon: Fraction = EPSILON

    def verify(self, d_S: Fraction, vertices: Sequence[Exponent]) -> bool:
        n = len(self.normal)
        if sum(self.weights.values()) != 1 or any(w < 0 for w in self.weights.values()):
            return False
        for j in range(n):
            if sum(w * g[j] for g, w in self.weights.items()) > d_S:
                return False
        if any(k < 0 for k in self.normal) or all(k == 0 for k in self.normal):
            return False
        if any(sum(k * g for k, g in zip(self.normal, v)) < self.support for v in vertices):
            return False
        below = (d_S - self.epsilon) * sum(self.normal)
        return below < self.support


@dataclass
class NewtonData:
    nvars: int
    support: List[Exponent]
    vertices: List[Exponent]
    d_S: Fraction
    principal_face: Face
    k_S: int
    certificate: DistanceCertificate
    compact_faces: Optional[List[Face]] = None

    @property
    def varchenko(self) -> Tuple[Fraction, int]:
        return varchenko_bound(self)

    def all_faces(self) -> List[Face]:
        faces = list(self.compact_faces or [])
        if self.principal_face not in faces:
            faces.append(self.principal_face)
        return faces

    def to_json(self) -> str:
        beta, p = self.varchenko
        doc = {
            'nvars': self.nvars,
            'vertices': [list(v) for v in self.vertices],
            'd_S': str(self.d_S),
            'k_S': self.k_S,
            'principal_face': self.principal_face.to_dict(),
            'compact_faces': None if self.compact_faces is None else [f.to_dict() for f in self.compact_faces],
            'bound': [str(beta), p],
            'certificate_verified': self.certificate.verify(self.d_S, self.vertices),
        }
        return json.dumps(doc, indent=2)


# geometry helpers -----------------------------------------------------------

def _dot(a: Sequence, b: Sequence) -> Fraction:
    return sum((Fraction(x) * Fraction(y) for x, y in zip(a, b)), Fraction(0))


def nondominated(points: Sequence[Exponent]) -> List[Exponent]:
    """Drop points lying in another point's translate q + ℝ₊ⁿ."""
    pts = sorted(set(points), key=lambda g: (sum(g), g))
    kept: List[Exponent] = []
    for g in pts:
        if not any(all(a <= b for a, b in zip(q, g)) for q in kept):
            kept.append(g)
    return kept


def _in_hull_plus_orthant(target: Sequence, points: Sequence[Exponent]) -> bool:
    """Exact test target ∈ conv(points) + ℝ₊ⁿ."""
    if not points:
        return False
    n = len(target)
    m = len(points)
    A_ub = [[Fraction(points[i][j]) for i in range(m)] for j in range(n)]
    try:
        solve_lp([0] * m, A_ub, [Fraction(t) for t in target], [[1] * m], [1])
        return True
    except InfeasibleError:
        return False


def polyhedron_vertices(points: Sequence[Exponent]) -> List[Exponent]:
    candidates = nondominated(points)
    return [g for i, g in enumerate(candidates)
            if not _in_hull_plus_orthant(g, candidates[:i] + candidates[i + 1:])]


def affine_dimension(vertices: Sequence[Exponent], rays: Sequence[int], n: int) -> int:
    if not vertices:
        return -1
    base = vertices[0]
    rows = [[sympy.Rational(v[j] - base[j]) for j in range(n)] for v in vertices[1:]]
    rows += [[sympy.Integer(int(j == r)) for j in range(n)] for r in rays]
    if not rows:
        return 0
    return int(sympy.Matrix(rows).rank())


def _newton_distance(vertices: List[Exponent], n: int) -> Tuple[Fraction, Dict[Exponent, Fraction]]:
    """min ϱ s.t. ϱ·1 ∈ conv(vertices) + ℝ₊ⁿ; variables (λ₁..λ_m, ϱ)."""
    m = len(vertices)
    c = [0] * m + [1]
    A_ub = [[Fraction(vertices[i][j]) for i in range(m)] + [-1] for j in range(n)]
    res = solve_lp(c, A_ub, [0] * n, [[1] * m + [0]], [1])
    weights = {vertices[i]: res.x[i] for i in range(m) if res.x[i] != 0}
    return res.x[m], weights


def _minimal_face_through(point: Sequence[Fraction], vertices: List[Exponent], n: int):
    """Minimal face of the polyhedron containing a boundary point.

    Maximizes the capped slack of every vertex and every coordinate direction
    over all supporting (κ ≥ 0, μ) with κ·point = μ; generators left with zero
    slack are exactly the generators of the minimal face.
    Variables: κ (n), μ, s (m), r (n).
    """
    m = len(vertices)
    nv = n + 1 + m + n
    A_ub, b_ub = [], []
    for i, g in enumerate(vertices):
        row = [0] * nv
        for j in range(n):
            row[j] = -g[j]
        row[n] = 1
        row[n + 1 + i] = 1
        A_ub.append(row)
        b_ub.append(0)
    for j in range(n):
        row = [0] * nv
        row[j] = -1
        row[n + 1 + m + j] = 1
        A_ub.append(row)
        b_ub.append(0)
    for k in range(m + n):
        row = [0] * nv
        row[n + 1 + k] = 1
        A_ub.append(row)
        b_ub.append(1)
    eq = [Fraction(point[j]) for j in range(n)] + [-1] + [0] * (m + n)
    c = [0] * (n + 1) + [1] * (m + n)
    res = solve_lp(c, A_ub, b_ub, [eq], [0], maximize=True)
    kappa = tuple(res.x[:n])
    mu = res.x[n]
    face_vertices = [vertices[i] for i in range(m) if res.x[n + 1 + i] == 0]
    rays = tuple(j for j in range(n) if res.x[n + 1 + m + j] == 0)
    return kappa, mu, face_vertices, rays


def _compact_face_closure(subset: FrozenSet[int], vertices: List[Exponent], n: int):
    """Smallest compact face containing the given vertices, or None.

    Supporting normals are restricted to κⱼ ≥ 1 (strictly positive up to scale).
    Variables: κ (n), μ, s (m).
    """
    m = len(vertices)
    nv = n + 1 + m
    A_ub, b_ub, A_eq, b_eq = [], [], [], []
    for j in range(n):
        row = [0] * nv
        row[j] = -1
        A_ub.append(row)
        b_ub.append(-1)
    for i, g in enumerate(vertices):
        row = [0] * nv
        for j in range(n):
            row[j] = g[j]
        row[n] = -1
        if i in subset:
            A_eq.append(row)
            b_eq.append(0)
        else:
            neg = [-v for v in row]
            neg[n + 1 + i] = 1
            A_ub.append(neg)
            b_ub.append(0)
            cap = [0] * nv
            cap[n + 1 + i] = 1
            A_ub.append(cap)
            b_ub.append(1)
    c = [0] * (n + 1) + [0 if i in subset else 1 for i in range(m)]
    try:
        res = solve_lp(c, A_ub, b_ub, A_eq, b_eq, maximize=True)
    except InfeasibleError:
        return None
    members = frozenset(i for i in range(m) if i in subset or res.x[n + 1 + i] == 0)
    return members, tuple(res.x[:n]), res.x[n]


def _make_face(kappa, mu, face_vertices, rays, support, n) -> Face:
    members = tuple(sorted(g for g in support if _dot(kappa, g) == mu))
    return Face(
        normal=tuple(kappa),
        support=mu,
        vertices=tuple(sorted(face_vertices)),
        members=members,
        rays=tuple(rays),
        dim=affine_dimension(list(face_vertices), rays, n),
    )


def compact_faces(vertices: List[Exponent], support: List[Exponent], n: int) -> List[Face]:
    """All compact faces, grown from the vertices by closure under adding a vertex."""
    faces: Dict[FrozenSet[int], Face] = {}
    queue: List[FrozenSet[int]] = []
    for i in range(len(vertices)):
        closure = _compact_face_closure(frozenset([i]), vertices, n)
        if closure is None:
            continue
        members, kappa, mu = closure
        if members not in faces:
            faces[members] = _make_face(kappa, mu, [vertices[k] for k in sorted(members)], (), support, n)
            queue.append(members)
    while queue:
        current = queue.pop(0)
        for u in range(len(vertices)):
            if u in current:
                continue
            closure = _compact_face_closure(current | {u}, vertices, n)
            if closure is None:
                continue
            members, kappa, mu = closure
            if members not in faces:
                faces[members] = _make_face(kappa, mu, [vertices[k] for k in sorted(members)], (), support, n)
                queue.append(members)
    return sorted(faces.values(), key=lambda f: (f.dim, f.vertices))


# public operations -------------------------------------------------------------

def newton_data(P: SparsePoly, with_faces: Optional[bool] = None,
                limits: NewtonLimits = NewtonLimits()) -> NewtonData:
    """Newton distance, principal face, k_S and (optionally) the compact faces of P.

    Args:
        P: polynomial without constant term
        with_faces: enumerate compact faces; by default only when the instance
            fits ``limits.face_vars`` / ``limits.face_vertices``
        limits: size guards

    Raises:
        Degenerate: empty support or a nonzero constant term
        TooLarge: the instance exceeds ``limits``
    """
    support = P.support()
    n = P.nvars
    if not support:
        raise Degenerate("Polynomial has empty support")
    if (0,) * n in support:
        raise Degenerate("Polynomial has a constant term; subtract it before computing Newton data")
    if n > limits.max_vars or len(support) > limits.max_terms:
        raise TooLarge(f"Newton data limited to {limits.max_vars} variables and {limits.max_terms} terms "
                       f"(got {n}, {len(support)})")

    vertices = polyhedron_vertices(support)
    logger.debug(f"🔍 Newton polyhedron: {len(support)} support points, {len(vertices)} vertices")

    d_S, weights = _newton_distance(vertices, n)
    center = [d_S] * n
    kappa, mu, face_vertices, rays = _minimal_face_through(center, vertices, n)
    principal = _make_face(kappa, mu, face_vertices, rays, support, n)
    certificate = DistanceCertificate(weights=weights, normal=kappa, support=mu)

    faces = None
    fits = n <= limits.face_vars and len(vertices) <= limits.face_vertices
    if with_faces is None:
        with_faces = fits
    if with_faces:
        if not fits:
            raise TooLarge(f"Compact-face enumeration limited to {limits.face_vars} variables and "
                           f"{limits.face_vertices} vertices")
        faces = compact_faces(vertices, support, n)

    return NewtonData(
        nvars=n,
        support=support,
        vertices=vertices,
        d_S=d_S,
        principal_face=principal,
        k_S=n - principal.dim,
        certificate=certificate,
        compact_faces=faces,
    )


def varchenko_bound(nd: NewtonData) -> Tuple[Fraction, int]:
    """Predicted decay pair (−1/d_S, k_S − 1)."""
    return Fraction(-1) / nd.d_S, nd.k_S - 1


def face_part(P: SparsePoly, face: Face, nd: Optional[NewtonData] = None) -> SparsePoly:
    """Sum of the terms of P whose exponents lie on the face."""
    nd = nd or newton_data(P, with_faces=True)
    wanted = set(face.members)
    if not any(set(f.members) == wanted for f in nd.all_faces()):
        raise FaceNotFound(f"Face with members {sorted(wanted)} is not a face of N(P)")
    return P.restrict(face.members)


# ℝ-nondegeneracy -----------------------------------------------------------------

@dataclass(frozen=True)
class NondegeneracySampler:
    per_decade: int = 20
    decades: int = 3
    max_points: int = 2_000_000
    chunk: int = 200_000
    seed: int = 0
    threshold: float = 1e-6

    def magnitudes(self) -> np.ndarray:
        half = self.decades / 2.0
        return 10.0 ** np.linspace(-half, half, self.per_decade * self.decades)


@dataclass
class FaceVerdict:
    face: Face
    min_ratio: float
    verdict: str
    witness: Optional[Tuple[float, ...]] = None
    evidence: str = "sampled, not proved"

    @property
    def nondegenerate(self) -> bool:
        return self.verdict == "numerically nondegenerate"


def _sample_points(n: int, sampler: NondegeneracySampler) -> np.ndarray:
    mags = sampler.magnitudes()
    k = len(mags)
    total = (2 * k) ** n
    values = np.concatenate([-mags[::-1], mags])
    if total <= sampler.max_points:
        grids = np.meshgrid(*([values] * n), indexing='ij')
        return np.stack([g.ravel() for g in grids], axis=1)
    rng = np.random.default_rng(sampler.seed)
    idx = rng.integers(0, 2 * k, size=(sampler.max_points, n))
    pts = values[idx]
    # Keep exact diagonals in the sample; they carry the typical degeneracies.
    diag = np.stack([values] * n, axis=1)
    return np.concatenate([diag, pts], axis=0)


def check_R_nondegenerate(P: SparsePoly, sampler: Optional[NondegeneracySampler] = None,
                          nd: Optional[NewtonData] = None) -> List[FaceVerdict]:
    """Sampled ℝ-nondegeneracy verdict for every compact face of N(P)."""
    sampler = sampler or NondegeneracySampler()
    if P.nvars > 5:
        raise TooLarge("Nondegeneracy sampling is limited to 5 variables")
    nd = nd or newton_data(P, with_faces=True)
    points = _sample_points(P.nvars, sampler)
    verdicts = []
    for face in nd.compact_faces:
        part = P.restrict(face.members)
        grads = part.gradient()
        best_ratio = np.inf
        best_point = None
        for start in range(0, len(points), sampler.chunk):
            pts = points[start:start + sampler.chunk]
            grad_sq = np.zeros(len(pts))
            scale_sq = np.zeros(len(pts))
            for g in grads:
                grad_sq += g.evaluate(pts) ** 2
                abs_terms = SparsePoly(g.nvars, {e: abs(float(c)) for e, c in g.items()})
                scale_sq += np.abs(abs_terms.evaluate(np.abs(pts))) ** 2
            with np.errstate(divide='ignore', invalid='ignore'):
                ratio = np.sqrt(grad_sq) / np.sqrt(scale_sq)
            ratio = np.where(scale_sq > 0, ratio, np.inf)
            i = int(np.argmin(ratio))
            if ratio[i] < best_ratio:
                best_ratio = float(ratio[i])
                best_point = tuple(float(v) for v in pts[i])
        if best_ratio > sampler.threshold:
            verdicts.append(FaceVerdict(face, best_ratio, "numerically nondegenerate"))
        else:
            verdicts.append(FaceVerdict(face, best_ratio, "degenerate witness", best_point))
        logger.debug(f"Face {face.vertices}: min relative gradient {best_ratio:.3e}")
    return verdicts


# d = 2 adapted-coordinate criterion -------------------------------------------------

@dataclass
class AdaptedCheck:
    adapted: bool
    face: Face
    a1: Fraction
    a2: Fraction
    bound: Fraction
    max_multiplicity: int


def adapted_check_2d(P: SparsePoly, nd: Optional[NewtonData] = None) -> AdaptedCheck:
    """Check whether the coordinates of a two-variable germ are adapted.

    The principal face must be a compact edge on a line a₁ξ₁ + ξ₂ = a₂; the
    coordinates are adapted when no real root of S_Γ(·, 1) has multiplicity
    above a₂/(1 + a₁).

    Raises:
        NotApplicable: P is not bivariate or the principal face is not a compact edge
    """
    if P.nvars != 2:
        raise NotApplicable("adapted_check_2d needs exactly two variables")
    nd = nd or newton_data(P)
    face = nd.principal_face
    if not face.compact or face.dim != 1:
        raise NotApplicable(f"Principal face is not a compact edge (dim {face.dim}, rays {face.rays})")
    k1, k2 = face.normal
    if k2 == 0:
        raise NotApplicable("Supporting line is vertical")
    a1 = k1 / k2
    a2 = face.support / k2
    bound = a2 / (1 + a1)

    x = sympy.Symbol('x')
    part = P.restrict(face.members)
    expr = sum(sympy.Rational(c.numerator, c.denominator) * x ** g[0] for g, c in part.items())
    _, factors = sympy.Poly(expr, x).sqf_list()
    max_mult = 0
    for factor, mult in factors:
        if factor.degree() > 0 and factor.count_roots() > 0:
            max_mult = max(max_mult, mult)
    return AdaptedCheck(
        adapted=max_mult <= bound,
        face=face,
        a1=a1,
        a2=a2,
        bound=bound,
        max_multiplicity=max_mult,
    )


# golden comparisons ----------------------------------------------------------------

TABLE2_CASES = [
    ("x1^3", 2, Fraction(3), 1),
    ("x1^2 + x1*x2^2", 2, Fraction(4, 3), 1),
    ("x1^2*x2 - x2^3", 2, Fraction(3, 2), 1),
    ("x1*x2*x3", 3, Fraction(1), 3),
]


@dataclass
class GoldenRow:
    phase: str
    expected_d_S: Fraction
    d_S: Fraction
    expected_k_S: int
    k_S: int

    @property
    def status(self) -> str:
        return "exact match" if (self.d_S, self.k_S) == (self.expected_d_S, self.expected_k_S) else "MISMATCH"


def table2_suite() -> List[GoldenRow]:
    from polynomial import parse_poly

    rows = []
    for text, nvars, d_expected, k_expected in TABLE2_CASES:
        nd = newton_data(parse_poly(text, nvars), with_faces=False)
        rows.append(GoldenRow(text, d_expected, nd.d_S, k_expected, nd.k_S))
        logger.info(f"{'✅' if rows[-1].status == 'exact match' else '❌'} {text}: d_S={nd.d_S}, k_S={nd.k_S}")
    return rows
