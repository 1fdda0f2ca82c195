"""Spectral solver for the lattice wave and Klein–Gordon equations on periodic boxes.

u_tt − Δu + m⋆²u = F(u) with u(0) = g, u_t(0) = f. The linear flow is applied
exactly through Fourier multipliers; the nonlinear flow uses Strang splitting
around the exact linear step.
"""

import math
import os
import logging
import warnings
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from typing import Callable, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import scipy.fft as sfft
from scipy.integrate import trapezoid

from errors import (Blowup, BoxTooSmall, BudgetExceeded, DimensionMismatch, LatticeWaveError, MeanNotZero,
                    NotApplicable)

try:
    import psutil
except ImportError:
    psutil = None

logger = logging.getLogger(__name__)

FIELD_MAGIC = 0x4C57  # "LW"
MEAN_TOL = 1e-12
LIGHT_CONE_MARGIN = 8
DEFAULT_BLOWUP_CAP = 1e6
DEFAULT_NORM_BOX = 48
Index = Union[int, float, Fraction]


# fields ------------------------------------------------------------------------------

@dataclass(frozen=True)
class LatticeField:
    """Samples on the periodic box (ℤ/Lℤ)^d; the origin is index 0."""

    values: np.ndarray

    def __post_init__(self):
        shape = self.values.shape
        if not shape or len(set(shape)) != 1:
            raise DimensionMismatch(f"Lattice fields live on cubic boxes, got shape {shape}")

    @property
    def d(self) -> int:
        return self.values.ndim

    @property
    def L(self) -> int:
        return self.values.shape[0]

    @property
    def is_complex(self) -> bool:
        return np.iscomplexobj(self.values)

    @classmethod
    def zeros(cls, d: int, L: int, dtype=float) -> "LatticeField":
        return cls(np.zeros((L,) * d, dtype=dtype))

    @classmethod
    def delta(cls, d: int, L: int, at: Optional[Sequence[int]] = None, scale: float = 1.0) -> "LatticeField":
        values = np.zeros((L,) * d)
        values[tuple(int(a) % L for a in (at or (0,) * d))] = scale
        return cls(values)

    @classmethod
    def random(cls, d: int, L: int, rng: np.random.Generator, support: Optional[int] = None) -> "LatticeField":
        """Gaussian samples, restricted to the cube [0, support)^d when support is given."""
        values = np.zeros((L,) * d)
        side = L if support is None else min(L, support)
        values[(slice(0, side),) * d] = rng.normal(size=(side,) * d)
        return cls(values)

    def at(self, x: Sequence[int]):
        return self.values[tuple(int(a) % self.L for a in x)]

    def norm(self, p: Index) -> float:
        a = np.abs(self.values)
        if p == math.inf:
            return float(np.max(a))
        p = float(p)
        m = float(np.max(a))
        if m == 0:
            return 0.0
        return m * float(np.sum((a / m) ** p)) ** (1.0 / p)

    def __add__(self, other: "LatticeField") -> "LatticeField":
        return LatticeField(self.values + other.values)

    def __sub__(self, other: "LatticeField") -> "LatticeField":
        return LatticeField(self.values - other.values)

    def __mul__(self, c) -> "LatticeField":
        return LatticeField(self.values * c)

    __rmul__ = __mul__


def lattice_coords(d: int, L: int) -> np.ndarray:
    """Signed representatives x ∈ (−L/2, L/2]^d of every box site, shape (L,)*d + (d,)."""
    k = np.arange(L)
    k = np.where(k > L // 2, k - L, k)
    mesh = np.meshgrid(*([k] * d), indexing='ij')
    return np.stack(mesh, axis=-1)


@lru_cache(maxsize=8)
def _omega_grid(d: int, L: int, mass: float) -> np.ndarray:
    s = 2.0 - 2.0 * np.cos(2 * math.pi * np.arange(L) / L)
    w2 = np.full((L,) * d, mass * mass)
    for axis in range(d):
        shape = [1] * d
        shape[axis] = L
        w2 = w2 + s.reshape(shape)
    w = np.sqrt(w2)
    w.setflags(write=False)
    return w


def _fft(values: np.ndarray, threads: int) -> np.ndarray:
    return sfft.fftn(values, workers=threads)


def _ifft(values: np.ndarray, threads: int, real: bool) -> np.ndarray:
    out = sfft.ifftn(values, workers=threads)
    return out.real if real else out


def _sin_over_omega(t: float, w: np.ndarray) -> np.ndarray:
    # sin(tω)/ω, equal to t at ω = 0
    return t * np.sinc(t * w / math.pi)


def required_side(t: float) -> int:
    """Smallest box side whose periodic images cannot reach |x|∞ ≤ |t| + margin."""
    return 2 * (math.ceil(abs(t)) + LIGHT_CONE_MARGIN)


def default_norm_box(t: float) -> int:
    """Box side for norm experiments: the light-cone side, capped at DEFAULT_NORM_BOX."""
    return min(required_side(t), DEFAULT_NORM_BOX)


def check_box(L: int, t: float):
    """Raise BoxTooSmall when pointwise values at time t would see periodic images."""
    need = required_side(t)
    if L < need:
        raise BoxTooSmall(f"Box side {L} too small for pointwise comparison at t={t} (need ≥ {need})",
                          side=L, required=need)


def memory_guard(d: int, L: int, arrays: int = 6, fraction: Optional[float] = None):
    """Refuse boxes whose complex working set exceeds the available memory.

    fraction defaults to LATTICEWAVE_MEMORY_FRACTION (0.8).
    """
    if fraction is None:
        fraction = float(os.getenv("LATTICEWAVE_MEMORY_FRACTION") or 0.8)
    need = arrays * 16 * float(L) ** d
    if psutil is None:
        logger.debug("psutil not available, skipping memory guard")
        return
    available = psutil.virtual_memory().available
    if need > fraction * available:
        raise BudgetExceeded(f"Box L={L}, d={d} needs {need / 1e9:.2f} GB (available {available / 1e9:.2f} GB)",
                             requested=need, budget=fraction * available)


# linear flow -----------------------------------------------------------------------------

@dataclass
class EvolutionState:
    u: LatticeField
    ut: LatticeField
    t: float

    def energy(self, mass: float = 0.0) -> float:
        return energy(self, mass)


def energy(state: EvolutionState, mass: float = 0.0) -> float:
    """‖u_t‖₂² + Σ over lattice edges |u(x) − u(y)|² + m⋆²‖u‖₂²."""
    u = state.u.values
    total = float(np.sum(np.abs(state.ut.values) ** 2)) + mass * mass * float(np.sum(np.abs(u) ** 2))
    for axis in range(u.ndim):
        total += float(np.sum(np.abs(u - np.roll(u, 1, axis=axis)) ** 2))
    return total


def parseval_norm(f: LatticeField, threads: int = 1) -> float:
    """‖f‖₂ computed on the Fourier side."""
    fh = _fft(f.values, threads)
    return math.sqrt(float(np.sum(np.abs(fh) ** 2)) / f.values.size)


def _check_pair(g: LatticeField, f: LatticeField):
    if g.values.shape != f.values.shape:
        raise DimensionMismatch(f"Data shapes differ: {g.values.shape} vs {f.values.shape}")


def linear_propagate(g: LatticeField, f: LatticeField, t: float, mass: float = 0.0,
                     threads: int = 1, pointwise: bool = False) -> EvolutionState:
    """Exact linear flow: û(t) = cos(tω)ĝ + sin(tω)/ω f̂.

    With pointwise=True the box must be large enough that periodic images stay
    outside the light cone, so samples agree with the ℤ^d solution.
    """
    _check_pair(g, f)
    if pointwise:
        check_box(g.L, t)
    if t == 0:
        return EvolutionState(g, f, 0.0)
    w = _omega_grid(g.d, g.L, float(mass))
    gh, fh = _fft(g.values, threads), _fft(f.values, threads)
    c, s = np.cos(t * w), _sin_over_omega(t, w)
    real = not (g.is_complex or f.is_complex)
    uh = c * gh + s * fh
    uth = -w * w * s * gh + c * fh
    return EvolutionState(LatticeField(_ifft(uh, threads, real)), LatticeField(_ifft(uth, threads, real)), float(t))


def propagate_state(state: EvolutionState, dt: float, mass: float = 0.0, threads: int = 1) -> EvolutionState:
    nxt = linear_propagate(state.u, state.ut, dt, mass, threads)
    return EvolutionState(nxt.u, nxt.ut, state.t + dt)


def half_wave(f: LatticeField, t: float, sign: int = 1, mass: float = 0.0, threads: int = 1) -> LatticeField:
    """e^{±itD} f with D the Fourier multiplier ω."""
    if sign not in (1, -1):
        raise ValueError("sign must be +1 or -1")
    if t == 0:
        return LatticeField(f.values.astype(complex))
    w = _omega_grid(f.d, f.L, float(mass))
    return LatticeField(_ifft(np.exp(sign * 1j * t * w) * _fft(f.values, threads), threads, real=False))


def inv_D(f: LatticeField, mass: float = 0.0, threads: int = 1) -> LatticeField:
    """1/D f; for m⋆ = 0 the output zero mode is set to 0.

    Warns MeanNotZero when |f̂(0)| > 1e-12·‖f‖₁ and m⋆ = 0.
    """
    w = _omega_grid(f.d, f.L, float(mass))
    fh = _fft(f.values, threads)
    if mass == 0:
        if abs(fh.flat[0]) > MEAN_TOL * f.norm(1):
            msg = f"1/D applied to data with mean mode {abs(fh.flat[0]):.3e}; zero mode dropped"
            logger.warning(f"⚠️ {msg}")
            warnings.warn(msg, MeanNotZero)
        inv = np.divide(1.0, w, out=np.zeros_like(w), where=w > 0)
    else:
        inv = 1.0 / w
    return LatticeField(_ifft(inv * fh, threads, real=not f.is_complex))


def apply_D(f: LatticeField, mass: float = 0.0, threads: int = 1) -> LatticeField:
    w = _omega_grid(f.d, f.L, float(mass))
    return LatticeField(_ifft(w * _fft(f.values, threads), threads, real=not f.is_complex))


# nonlinear flow ---------------------------------------------------------------------------

def power_nonlinearity(k: int) -> Callable[[np.ndarray], np.ndarray]:
    """F(s) = |s|^{k−1} s."""
    return lambda u: np.abs(u) ** (k - 1) * u


@dataclass
class Trajectory:
    states: List[EvolutionState] = field(default_factory=list)

    @property
    def times(self) -> np.ndarray:
        return np.array([s.t for s in self.states])

    @property
    def final(self) -> EvolutionState:
        return self.states[-1]

    def __len__(self):
        return len(self.states)


def nonlinear_solve(g: LatticeField, f: LatticeField, k: int, T: float, dt: float, mass: float = 0.0,
                    nonlinear: bool = True, cap: float = DEFAULT_BLOWUP_CAP, keep_every: int = 1,
                    monitor: Optional[Callable[[EvolutionState], None]] = None,
                    threads: int = 1) -> Trajectory:
    """Strang splitting: half linear step, kick u_t += dt·F(u), half linear step.

    States are kept every `keep_every` steps (the initial and final states always);
    `monitor` sees every state.

    Raises:
        Blowup: ‖u‖∞ exceeds cap
    """
    _check_pair(g, f)
    if k < 3 or int(k) != k:
        raise ValueError("The power nonlinearity needs an integer k ≥ 3")
    if dt <= 0 or T < 0:
        raise ValueError("nonlinear_solve needs dt > 0 and T ≥ 0")
    memory_guard(g.d, g.L)
    F = power_nonlinearity(int(k))
    steps = int(round(T / dt))
    if not math.isclose(steps * dt, T, rel_tol=1e-9, abs_tol=1e-12):
        raise ValueError(f"T={T} is not a whole number of steps dt={dt}")

    w = _omega_grid(g.d, g.L, float(mass))
    c, s = np.cos(0.5 * dt * w), _sin_over_omega(0.5 * dt, w)
    real = not (g.is_complex or f.is_complex)

    def half_step(uh, uth):
        return c * uh + s * uth, -w * w * s * uh + c * uth

    uh, uth = _fft(g.values, threads), _fft(f.values, threads)
    state = EvolutionState(g, f, 0.0)
    trajectory = Trajectory([state])
    if monitor:
        monitor(state)

    for n in range(1, steps + 1):
        uh, uth = half_step(uh, uth)
        if nonlinear:
            u = _ifft(uh, threads, real)
            uth = uth + dt * _fft(F(u), threads)
        uh, uth = half_step(uh, uth)
        u = _ifft(uh, threads, real)
        sup = float(np.max(np.abs(u)))
        t = n * dt
        if not math.isfinite(sup) or sup > cap:
            raise Blowup(f"‖u‖∞ = {sup:.3e} exceeded cap {cap:.1e} at t={t:.3f}", t=t, sup_norm=sup)
        if monitor or n % keep_every == 0 or n == steps:
            state = EvolutionState(LatticeField(u), LatticeField(_ifft(uth, threads, real)), t)
            if monitor:
                monitor(state)
            if n % keep_every == 0 or n == steps:
                trajectory.states.append(state)
    logger.debug(f"✅ nonlinear solve: {steps} steps of dt={dt}, k={k}, L={g.L}")
    return trajectory


# norms ---------------------------------------------------------------------------------------

def _inv(p: Index) -> Fraction:
    return Fraction(0) if p == math.inf else 1 / Fraction(p)


@dataclass
class MixedNormReport:
    q: Index
    r: Index
    times: np.ndarray
    snapshot_norms: np.ndarray
    value: float
    nested: bool = True
    input_norms: Dict[str, float] = field(default_factory=dict)


def time_norm(times: Sequence[float], values: Sequence[float], q: Index) -> float:
    """L^q over a uniform time grid by the trapezoid rule; q = ∞ is the supremum."""
    values = np.asarray(values, dtype=float)
    if q == math.inf:
        return float(np.max(values))
    q = float(q)
    return float(trapezoid(values ** q, np.asarray(times, dtype=float))) ** (1.0 / q)


def mixed_norm(trajectory: Trajectory, q: Index, r: Index, inputs: Optional[Dict[str, float]] = None) -> MixedNormReport:
    """‖u‖_{L^q_t lʳ}: lʳ per snapshot, then L^q in time."""
    times = trajectory.times
    norms = np.array([s.u.norm(r) for s in trajectory.states])
    sup = np.array([s.u.norm(math.inf) for s in trajectory.states])
    nested = bool(np.all(norms >= sup * (1 - 1e-12)))
    return MixedNormReport(q, r, times, norms, time_norm(times, norms, q), nested, dict(inputs or {}))


# experiments -----------------------------------------------------------------------------------

@dataclass(frozen=True)
class LplqTarget:
    exponent: Fraction
    log_power: int
    branch: str


def lplq_target(p: Index, q: Index, d: int = 4) -> LplqTarget:
    """Decay exponent of ‖u(t)‖_q/‖f‖_p for the d = 4 lattice wave equation.

    Branches: 'plancherel' (p = q = 2), 'segment' for (1/p, 1/q) on the segment
    from (3/4, 1/2) to (1, 0) with ζ_q = (3/2)(1 − 2/q), and 'beta' with
    β = 3(1/p − 1/q − 1/2) when 1/p − 1/q ≥ 1/2. The (1, ∞) corner carries one
    log factor.
    """
    if d != 4:
        raise NotApplicable("lp→lq decay targets are available for d = 4")
    a, b = _inv(p), _inv(q)
    if a == b == Fraction(1, 2):
        return LplqTarget(Fraction(0), 0, 'plancherel')
    if not (0 <= b < a <= 1):
        raise NotApplicable(f"(p, q) = ({p}, {q}) is outside 1 ≤ p < q ≤ ∞")
    if b == 2 - 2 * a and Fraction(3, 4) <= a <= 1:
        return LplqTarget(Fraction(3, 2) * (1 - 2 * b), 1 if a == 1 else 0, 'segment')
    if a - b >= Fraction(1, 2):
        return LplqTarget(3 * (a - b - Fraction(1, 2)), 0, 'beta')
    raise NotApplicable(f"No decay estimate for (p, q) = ({p}, {q}): need 1/p − 1/q ≥ 1/2")


@dataclass
class LplqTable:
    p: Index
    q: Index
    target: LplqTarget
    L: int
    rows: List[Tuple[float, float, float]]
    bounded: bool
    periodic_surrogate: bool

    @property
    def normalized(self) -> np.ndarray:
        return np.array([row[2] for row in self.rows])


def _normalize(t: float, value: float, target: LplqTarget) -> float:
    return value * (1 + t) ** float(target.exponent) / math.log(2 + t) ** target.log_power


def column_bounded(values: Sequence[float], factor: float = 2.0) -> bool:
    """No growth: the max over the later half stays within factor of the max over the earlier half."""
    values = np.asarray(values, dtype=float)
    half = len(values) // 2
    if half == 0:
        return True
    return bool(np.max(values[half:]) <= factor * np.max(values[:half]))


def lplq_experiment(p: Index, q: Index, T: float, d: int = 4, L: Optional[int] = None,
                    f: Optional[LatticeField] = None, dt: float = 1.0, t0: float = 1.0,
                    mass: float = 0.0, threads: int = 1) -> LplqTable:
    """Table of (t, ‖u(t)‖_q, normalized) for g = 0 and data f (default δ₀)."""
    target = lplq_target(p, q, d)
    if f is None:
        L = L or default_norm_box(T)
        f = LatticeField.delta(d, L)
    L = f.L
    memory_guard(d, L)
    surrogate = L < required_side(T)
    if surrogate:
        logger.warning(f"⚠️ Box L={L} below {required_side(T)}: norms are for the periodic surrogate")
    w = _omega_grid(d, L, float(mass))
    fh = _fft(f.values, threads)
    scale = f.norm(p)
    rows = []
    for t in np.arange(t0, T + 0.5 * dt, dt):
        u = LatticeField(_ifft(_sin_over_omega(float(t), w) * fh, threads, real=True))
        value = u.norm(q) / scale
        rows.append((float(t), value, _normalize(float(t), value, target)))
    bounded = column_bounded([r[2] for r in rows])
    logger.info(f"{'✅' if bounded else '❌'} lplq p={p} q={q}: target {target.exponent} "
                f"(log^{target.log_power}, {target.branch}), bounded={bounded}")
    return LplqTable(p, q, target, L, rows, bounded, surrogate)


STRICHARTZ_FACTOR = {3: Fraction(7, 6), 4: Fraction(3, 2)}
STRICHARTZ_DATA_INDEX = {3: Fraction(6, 5), 4: Fraction(4, 3)}


def strichartz_admissible(q: Index, r: Index, d: int = 4) -> bool:
    """q, r ≥ 2 and 1/q < c_d (1/2 − 1/r), with c₃ = 7/6 and c₄ = 3/2."""
    if d not in STRICHARTZ_FACTOR:
        raise NotApplicable("Strichartz admissibility is available for d = 3, 4")
    if _inv(q) > Fraction(1, 2) or _inv(r) > Fraction(1, 2):
        return False
    return _inv(q) < STRICHARTZ_FACTOR[d] * (Fraction(1, 2) - _inv(r))


@dataclass
class StrichartzReport:
    q: Index
    r: Index
    d: int
    ratios: np.ndarray
    data_index: Fraction
    periodic_surrogate: bool = False

    @property
    def constant(self) -> float:
        return float(np.max(self.ratios))


def strichartz_experiment(q: Index, r: Index, d: int = 4, count: int = 50, T: float = 40.0, dt: float = 0.5,
                          L: Optional[int] = None, support: int = 3, seed: int = 0,
                          threads: int = 1) -> StrichartzReport:
    """‖u‖_{L^q_t lʳ}/‖f‖_{p_d} over random small-support f with g = 0."""
    if not strichartz_admissible(q, r, d):
        raise NotApplicable(f"(q, r) = ({q}, {r}) is not admissible in d={d}")
    L = L or default_norm_box(T)
    memory_guard(d, L)
    surrogate = L < required_side(T)
    if surrogate:
        logger.warning(f"⚠️ Box L={L} below {required_side(T)}: Strichartz ratios are for the periodic surrogate")
    w = _omega_grid(d, L, 0.0)
    times = np.arange(0.0, T + 0.5 * dt, dt)
    multipliers = [_sin_over_omega(float(t), w) for t in times]
    rng = np.random.default_rng(seed)
    data_index = STRICHARTZ_DATA_INDEX[d]
    ratios = np.zeros(count)
    for i in range(count):
        f = LatticeField.random(d, L, rng, support)
        fh = _fft(f.values, threads)
        norms = [LatticeField(_ifft(m * fh, threads, real=True)).norm(r) for m in multipliers]
        ratios[i] = time_norm(times, norms, q) / f.norm(data_index)
    logger.info(f"✅ Strichartz (q, r)=({q}, {r}), d={d}: max ratio {np.max(ratios):.4g} over {count} inputs")
    return StrichartzReport(q, r, d, ratios, data_index, surrogate)


def small_data_exponents(k: int) -> Tuple[Fraction, Fraction, Fraction]:
    """(p_k, q_k, rate) for the small-data global solution in d = 4 with F(s) = |s|^{k−1}s."""
    if k < 3:
        raise ValueError("k ≥ 3 required")
    p = Fraction(2 * k + 1, 2 * k)
    q = Fraction(2 * k + 1, 2)
    return p, q, Fraction(3, 2) * (1 - 2 / q)


@dataclass
class NonlinearRun:
    times: np.ndarray
    nonlinear: np.ndarray
    linear: np.ndarray

    @property
    def max_ratio(self) -> float:
        keep = self.linear > 0
        r = self.nonlinear[keep] / self.linear[keep]
        return float(np.max(np.maximum(r, 1 / r)))


def compare_with_linear(f: LatticeField, k: int, T: float, dt: float, norm: Index = math.inf,
                        t0: float = 1.0, threads: int = 1) -> NonlinearRun:
    """Track ‖u(t)‖ for the nonlinear and linear solutions with g = 0."""
    g = LatticeField.zeros(f.d, f.L)
    times, nl, lin = [], [], []
    w = _omega_grid(f.d, f.L, 0.0)
    fh = _fft(f.values, threads)

    def record(state: EvolutionState):
        if state.t + 1e-12 < t0:
            return
        times.append(state.t)
        nl.append(state.u.norm(norm))
        lin.append(LatticeField(_ifft(_sin_over_omega(state.t, w) * fh, threads, real=True)).norm(norm))

    nonlinear_solve(g, f, k, T, dt, keep_every=max(1, int(round(T / dt))), monitor=record, threads=threads)
    return NonlinearRun(np.array(times), np.array(nl), np.array(lin))


def smallness_threshold(k: int, profile: LatticeField, T: float, dt: float, lo: float = 1e-6, hi: float = 10.0,
                        factor: float = 2.0, iterations: int = 20, threads: int = 1) -> float:
    """Largest ‖f‖_{p_k} (by bisection in log scale) for which the nonlinear run tracks the linear one.

    `profile` fixes the shape of f; it is rescaled to each trial norm.
    """
    p_k, q_k, _ = small_data_exponents(k)
    base = profile * (1.0 / profile.norm(p_k))

    def small(amplitude: float) -> bool:
        try:
            run = compare_with_linear(base * amplitude, k, T, dt, norm=q_k, threads=threads)
        except Blowup:
            return False
        return run.max_ratio <= factor

    if not small(lo):
        raise NotApplicable(f"Even ‖f‖ = {lo} leaves the linear regime")
    if small(hi):
        return hi
    a, b = math.log(lo), math.log(hi)
    for _ in range(iterations):
        mid = 0.5 * (a + b)
        if small(math.exp(mid)):
            a = mid
        else:
            b = mid
    logger.info(f"✅ smallness threshold k={k}: ‖f‖_(p_k) ≈ {math.exp(a):.4g}")
    return math.exp(a)


def inv_D_kernel_profile(d: int, L: int, threads: int = 1) -> LatticeField:
    """1/D applied to δ₀ minus its mean, which approximates the ℤ^d kernel away from the box edge."""
    delta = LatticeField.delta(d, L)
    mean = LatticeField(np.full((L,) * d, 1.0 / L ** d))
    return inv_D(delta - mean, threads=threads)


# field I/O -------------------------------------------------------------------------------------

def write_field(path: str, f: LatticeField):
    """Flat binary: int64 header (magic, d, L, complex flag) then row-major samples."""
    header = np.array([FIELD_MAGIC, f.d, f.L, int(f.is_complex)], dtype=np.int64)
    dtype = np.complex128 if f.is_complex else np.float64
    with open(path, 'wb') as fh:
        header.tofile(fh)
        np.ascontiguousarray(f.values, dtype=dtype).tofile(fh)


def read_field(path: str) -> LatticeField:
    with open(path, 'rb') as fh:
        header = np.fromfile(fh, dtype=np.int64, count=4)
        if len(header) != 4 or header[0] != FIELD_MAGIC:
            raise LatticeWaveError(f"{path} is not a latticewave field file")
        _, d, L, is_complex = (int(v) for v in header)
        dtype = np.complex128 if is_complex else np.float64
        values = np.fromfile(fh, dtype=dtype, count=L ** d)
    if values.size != L ** d:
        raise LatticeWaveError(f"{path} is truncated: expected {L ** d} samples")
    return LatticeField(values.reshape((L,) * d))
