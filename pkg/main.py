import os
import sys
import math
import shutil
import signal
import argparse
from datetime import datetime
from pathlib import Path
import logging
import json
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

from dotenv import load_dotenv

try:
    import psutil  # Optional for system health monitoring
except ImportError:
    psutil = None

# Ensure the utils directory is in sys.path
SCRIPT_DIR = Path(__file__).parent.absolute()
UTILS_DIR = SCRIPT_DIR / 'utils'

if str(UTILS_DIR) not in sys.path:
    sys.path.insert(0, str(UTILS_DIR))

import numpy as np

from config import (ENV_DEFAULTS, ExperimentConfig, RuntimeSettings, parse_bool, parse_float_list,
                    parse_index, parse_int_list)
from decayfit import (FIT_MODELS, RAY_BLOCK, DecaySamples, fit_decay, geometric_schedule, run_conj_suite,
                      run_kernel_decay, run_table1_suite)
from dispersion import DispersionRelation, classify, estimate_b0, find_critical_points, stratum_rays
from errors import EXIT_OK, EXIT_VALIDATION, ConfigError, DimensionMismatch, LatticeWaveError
from evolve import (LatticeField, compare_with_linear, energy, linear_propagate, lplq_experiment,
                    small_data_exponents, smallness_threshold, strichartz_experiment, write_field)
from newton import check_R_nondegenerate, newton_data, table2_suite
from oscquad import AmplitudeSpec, green_G, oscint_I, oscint_J, perturbation_probe
from phases import build_conj_phase
from polynomial import parse_poly
from reports import Stopwatch, append_history, emit_manifest, read_samples, write_csv

# Load environment variables from .env file
load_dotenv()

logger = logging.getLogger("latticewave")
_installed_handlers: List[logging.Handler] = []


def setup_logging(log_dir: Path, console_level: str = 'INFO') -> logging.Logger:
    """File handler at DEBUG with the detailed format, console handler at console_level."""
    log_dir = Path(log_dir)
    log_dir.mkdir(parents=True, exist_ok=True)

    detailed_formatter = logging.Formatter(
        '%(asctime)s.%(msecs)03d - %(name)s - %(levelname)s - %(funcName)s:%(lineno)d - %(message)s',
        datefmt='%Y-%m-%d %H:%M:%S'
    )
    simple_formatter = logging.Formatter(
        '%(asctime)s.%(msecs)03d - %(levelname)s - %(message)s',
        datefmt='%Y-%m-%d %H:%M:%S'
    )

    file_handler = logging.FileHandler(
        log_dir / f"latticewave_{datetime.now().strftime('%Y%m%d')}.log",
        encoding='utf-8'
    )
    file_handler.setLevel(logging.DEBUG)
    file_handler.setFormatter(detailed_formatter)

    console_handler = logging.StreamHandler(sys.stderr)
    console_handler.setLevel(getattr(logging, console_level.upper(), logging.INFO))
    console_handler.setFormatter(simple_formatter)

    root_logger = logging.getLogger()
    for handler in _installed_handlers:
        root_logger.removeHandler(handler)
        handler.close()
    _installed_handlers[:] = [file_handler, console_handler]
    root_logger.setLevel(logging.DEBUG)
    root_logger.addHandler(file_handler)
    root_logger.addHandler(console_handler)
    return logger


def signal_handler(signum, frame):
    """Handle graceful shutdown on SIGINT/SIGTERM."""
    logger.warning(f"Received signal {signum}. Stopping...")
    sys.exit(1)


def check_environment() -> RuntimeSettings:
    """Fill LATTICEWAVE_* defaults and read the runtime settings."""
    logger.debug("🔍 Checking environment variables...")
    for var, default in ENV_DEFAULTS.items():
        value = os.getenv(var)
        if value:
            logger.debug(f"✅ {var} = {value}")
        else:
            os.environ[var] = default
            logger.debug(f"ℹ️ {var} set to default: {default}")
    return RuntimeSettings.from_env()


def setup_directories(settings: RuntimeSettings) -> bool:
    """Create the output and log directories."""
    for directory in (Path(settings.output_dir), Path(settings.log_dir)):
        try:
            directory.mkdir(parents=True, exist_ok=True)
            logger.debug(f"📁 Directory ready: {directory}")
        except OSError as e:
            logger.error(f"❌ Could not create directory {directory}: {e}")
            return False
    return True


def check_system_health(output_dir: Path) -> bool:
    """Report disk, memory and CPU headroom; never blocks a run."""
    try:
        stat = shutil.disk_usage(output_dir)
        available_gb = stat.free / (2**30)
        if available_gb < 1:
            logger.warning(f"⚠️ Low disk space: {available_gb:.1f} GB available")
        logger.debug(f"✅ Disk space available: {available_gb:.1f} GB")

        if psutil:
            memory = psutil.virtual_memory()
            logger.debug(f"✅ Memory available: {memory.available / (2**20):.1f} MB")
            cpu_percent = psutil.cpu_percent(interval=None)
            if cpu_percent > 90:
                logger.warning(f"⚠️ High CPU usage: {cpu_percent:.1f}%")
        else:
            logger.debug("psutil not available, skipping memory and CPU checks")
        return True
    except OSError as e:
        logger.warning(f"⚠️ System health check failed: {e}")
        return False


def report_error(error: Exception, log_dir: Path):
    """Diagnostic on stderr, stack trace in the log file."""
    logger.error(f"❌ {type(error).__name__}: {error}")
    logger.debug("🔍 Full stack trace:", exc_info=True)
    print(f"❌ {type(error).__name__}: {error}\nSee {log_dir}/latticewave_{datetime.now().strftime('%Y%m%d')}.log "
          f"for details.", file=sys.stderr)


# helpers ----------------------------------------------------------------------------------

Result = Tuple[Dict[str, Any], List[Path], str]


def _out(args, default_name: str) -> Path:
    return Path(args.out) if args.out else Path(args.output_dir) / default_name


def _schedule(args) -> np.ndarray:
    if args.t:
        return np.asarray(args.t, dtype=float)
    return geometric_schedule(args.tmin, args.tmax, args.ratio)


def _amplitude(args) -> AmplitudeSpec:
    return AmplitudeSpec(args.amp, radius=args.radius)


def _ray_time_scale(d: int, direction: Sequence[int]) -> float:
    """Time per unit step along an exact-velocity ray."""
    w = [abs(x) for x in direction]
    if len(set(w)) == 1:
        # (π/2, …, π/2) has velocity (2d)^{-1/2}·(±1, …)
        return w[0] * math.sqrt(2 * d)
    for ray in stratum_rays(d):
        if tuple(ray.direction) == tuple(direction):
            return ray.t_per_unit
    raise ConfigError(f"No exact-velocity time scale known for direction {list(direction)}; pass --t-per-unit")


# subcommands --------------------------------------------------------------------------------

def cmd_green(args) -> Result:
    rel = DispersionRelation(args.dim, args.mass)
    rows = []
    if args.ray:
        if len(args.ray) != args.dim:
            raise DimensionMismatch(f"--ray needs {args.dim} entries")
        scale = args.t_per_unit or _ray_time_scale(args.dim, args.ray)
        points = [(tuple(m * w for w in args.ray), m * scale) for m in range(args.mmin, args.mmax + 1)]
    else:
        if len(args.x) != args.dim:
            raise DimensionMismatch(f"--x needs {args.dim} entries")
        points = [(tuple(args.x), t) for t in (args.t or [1.0])]
    for x, t in points:
        res = green_G(rel, x, t, args.rtol, args.budget, args.threads)
        rows.append((t, ";".join(map(str, x)), res.value, res.N, res.converged))
    path = write_csv(_out(args, 'green.csv'), 'green', ('t', 'x', 'G', 'N', 'converged'), rows,
                     d=args.dim, mass=args.mass)
    return {'points': len(rows)}, [path], f"green: {len(rows)} values of G in d={args.dim}"


def cmd_oscint(args) -> Result:
    rel = DispersionRelation(args.dim)
    cutoff = AmplitudeSpec('origin-cutoff', radius=args.cutoff_radius, inner=args.cutoff_radius / 2)
    rows = []
    for t in (args.t or [1.0]):
        res = oscint_I(rel, args.v, t, cutoff, args.rtol, args.budget, args.threads)
        rows.append((t, res.value.real, res.value.imag, res.parts['I1'], res.parts['I2'], res.N))
    path = write_csv(_out(args, 'oscint.csv'), 'oscint', ('t', 're', 'im', 'I1', 'I2', 'N'), rows,
                     d=args.dim, v=list(args.v))
    return {'points': len(rows)}, [path], f"oscint: {len(rows)} values of I(v, t)"


def cmd_jphase(args) -> Result:
    phase = parse_poly(args.poly, args.nvars)
    amp = _amplitude(args)
    t_values = _schedule(args)
    rows = []
    for t in t_values:
        res = oscint_J(phase, amp, float(t), args.rtol, args.budget, args.threads)
        rows.append((float(t), res.value.real, res.value.imag, abs(res.value), res.N))
    path = write_csv(_out(args, 'jphase.csv'), 'jphase', ('t', 're', 'im', 'abs', 'N'), rows,
                     poly=args.poly, amp=args.amp)
    results: Dict[str, Any] = {'points': len(rows)}
    summary = f"jphase: {len(rows)} values of J for {args.poly}"
    if args.fit:
        fit = fit_decay(DecaySamples(t_values, [r[3] for r in rows], args.poly), t_min=float(t_values[0]))
        results['fit'] = fit
        summary += f", fit β = {fit.beta:.3f}, p = {fit.p}"
    return results, [path], summary


def cmd_critical(args) -> Result:
    rel = DispersionRelation(args.dim, args.mass)
    if args.xi:
        cp = classify(rel, args.xi)
        print(json.dumps(cp.to_dict(), indent=2))
        return {'point': cp.to_dict()}, [], f"critical: {cp.label} (corank {cp.corank})"
    points = find_critical_points(rel, args.v)
    doc = [cp.to_dict() for cp in points]
    print(json.dumps(doc, indent=2))
    return {'points': doc}, [], f"critical: {len(points)} critical points for v = {list(args.v)}"


def cmd_b0(args) -> Result:
    est = estimate_b0(DispersionRelation(args.dim), args.density)
    doc = {'b0': est.value, 'delta': est.margin, 'converged': est.converged,
           'history': est.history, 'argmax': list(map(float, est.argmax))}
    print(json.dumps(doc, indent=2))
    return doc, [], f"b0: sup |∇ω| over degenerate strata = {est.value:.6f} (δ = {est.margin:.6f})"


def cmd_newton(args) -> Result:
    P = parse_poly(args.poly, args.nvars)
    nd = newton_data(P, with_faces=args.faces)
    print(nd.to_json())
    results: Dict[str, Any] = {'d_S': nd.d_S, 'k_S': nd.k_S, 'bound': nd.varchenko}
    if args.nondeg:
        verdicts = check_R_nondegenerate(P)
        results['nondegenerate'] = all(v.nondegenerate for v in verdicts)
    return results, [], f"newton: d_S = {nd.d_S}, k_S = {nd.k_S}"


def cmd_conj(args) -> Result:
    phase = build_conj_phase(args.dim)
    results: Dict[str, Any] = {
        'd_S': phase.newton.d_S, 'k_S': phase.newton.k_S, 'verified': phase.verified,
        'containments': phase.containments,
    }
    summary = f"d_S = {phase.newton.d_S}, k_S = {phase.newton.k_S}"
    if args.fit:
        row = run_conj_suite(args.dim, geometric_schedule(args.tmin, args.tmax, args.ratio),
                             rtol=args.rtol_I, budget=args.budget, threads=args.threads)
        results['fit'] = row.fit
        results['passed'] = row.passed
        summary += f", fit β = {row.fit.beta:.2f}"
    return results, [], f"conj: {summary}"


def _initial_data(args) -> LatticeField:
    if args.data == 'delta':
        return LatticeField.delta(args.dim, args.L, scale=args.amplitude)
    rng = np.random.default_rng(args.seed)
    return LatticeField.random(args.dim, args.L, rng, args.support) * args.amplitude


def cmd_evolve(args) -> Result:
    f = _initial_data(args)
    g = LatticeField.zeros(args.dim, args.L)
    state = linear_propagate(g, f, args.T, args.mass, args.threads, pointwise=args.pointwise)
    e0 = energy(linear_propagate(g, f, 0.0, args.mass), args.mass)
    drift = abs(energy(state, args.mass) - e0) / e0 if e0 else 0.0
    path = _out(args, 'evolve.lwf')
    path.parent.mkdir(parents=True, exist_ok=True)
    write_field(str(path), state.u)
    results = {'t': args.T, 'energy_drift': drift, 'sup': state.u.norm(math.inf), 'l2': state.u.norm(2)}
    return results, [path], f"evolve: u({args.T}) written, energy drift {drift:.2e}"


def cmd_lplq(args) -> Result:
    table = lplq_experiment(args.p, args.q, args.T, args.dim, args.L, dt=args.dt, threads=args.threads)
    path = write_csv(_out(args, 'lplq.csv'), 'lplq', ('t', 'norm', 'normalized'), table.rows,
                     d=args.dim, p=args.p, q=args.q, target=table.target.exponent,
                     log=table.target.log_power, branch=table.target.branch,
                     periodic_surrogate=table.periodic_surrogate)
    results = {'bounded': table.bounded, 'target': table.target.exponent, 'branch': table.target.branch}
    return results, [path], f"lplq: target {table.target.exponent} ({table.target.branch}), bounded = {table.bounded}"


def cmd_strichartz(args) -> Result:
    rep = strichartz_experiment(args.q, args.r, args.dim, args.count, args.T, args.dt, args.L, args.support,
                                args.seed, args.threads)
    path = write_csv(_out(args, 'strichartz.csv'), 'strichartz', ('sample', 'ratio'),
                     enumerate(rep.ratios), d=args.dim, q=args.q, r=args.r, data_index=rep.data_index,
                     periodic_surrogate=rep.periodic_surrogate)
    return {'constant': rep.constant}, [path], f"strichartz: max ratio {rep.constant:.4g} over {args.count} inputs"


def cmd_nonlinear(args) -> Result:
    p_k, q_k, rate = small_data_exponents(args.k)
    f = LatticeField.delta(args.dim, args.L)
    if args.threshold:
        value = smallness_threshold(args.k, f, args.T, args.dt, threads=args.threads)
        return {'threshold': value, 'p_k': p_k, 'q_k': q_k}, [], f"nonlinear: smallness threshold ‖f‖ ≈ {value:.4g}"
    f = f * (args.amplitude / f.norm(1))
    run = compare_with_linear(f, args.k, args.T, args.dt, norm=math.inf, threads=args.threads)
    rows = zip(run.times, run.nonlinear, run.linear)
    path = write_csv(_out(args, 'nonlinear.csv'), 'nonlinear', ('t', 'sup_nonlinear', 'sup_linear'), rows,
                     d=args.dim, k=args.k, amplitude=args.amplitude)
    results = {'max_ratio': run.max_ratio, 'p_k': p_k, 'q_k': q_k, 'rate': rate}
    return results, [path], f"nonlinear: nonlinear/linear sup-norm ratio ≤ {run.max_ratio:.3f}"


def cmd_decay_fit(args) -> Result:
    samples = read_samples(Path(args.samples))
    fit = fit_decay(samples, t_min=args.tmin, envelope=args.envelope, model=args.model)
    print(json.dumps(fit.to_dict(), indent=2))
    return {'fit': fit}, [], f"decay-fit: β = {fit.beta:.4f}, p = {fit.p}"


def cmd_table1(args) -> Result:
    rows = run_table1_suite(args.dim, t_max=args.tmax, count=args.count, rtol=args.rtol, budget=args.budget,
                            threads=args.threads, block=args.block)
    table = [(r.name, r.fit.beta, r.fit.p, r.target[0], r.target[1], r.passed) for r in rows]
    path = write_csv(_out(args, 'table1.csv'), 'table1',
                     ('stratum', 'beta', 'p', 'target_beta', 'target_p', 'passed'), table, d=args.dim)
    passed = sum(r.passed for r in rows)
    return {'rows': table}, [path], f"table1: {passed}/{len(rows)} strata match in d={args.dim}"


def cmd_kernel_decay(args) -> Result:
    row = run_kernel_decay(args.dim, args.rmin, args.rmax, args.count, args.threads)
    rows = zip(row.samples.t, row.samples.magnitude)
    path = write_csv(_out(args, 'kernel_decay.csv'), 'kernel-decay', ('r', 'kernel'), rows, d=args.dim,
                     exponent=row.fit.beta, target=row.target[0], passed=row.passed)
    return {'fit': row.fit, 'passed': row.passed}, [path], \
        f"kernel-decay: exponent {row.fit.beta:.3f} (target {row.target[0]}), passed = {row.passed}"


def cmd_table2(args) -> Result:
    rows = table2_suite()
    table = [(r.phase, r.d_S, r.k_S, r.expected_d_S, r.expected_k_S, r.status) for r in rows]
    path = write_csv(_out(args, 'table2.csv'), 'table2', ('phase', 'd_S', 'k_S', 'expected_d_S', 'expected_k_S',
                                                          'status'), table)
    exact = sum(r.status == 'exact match' for r in rows)
    return {'comparisons': [dict(zip(('phase', 'status'), (r.phase, r.status))) for r in rows]}, [path], \
        f"table2: {exact}/{len(rows)} exact match"


def cmd_probe(args) -> Result:
    phase = parse_poly(args.poly, args.nvars)
    t_values = _schedule(args)
    probe = perturbation_probe(phase, args.eps, args.count, t_values, _amplitude(args), args.seed,
                               budget=args.budget, threads=args.threads)
    env = probe.envelope()
    base = probe.magnitudes[0]
    rows = zip(t_values, base, env)
    path = write_csv(_out(args, 'probe.csv'), 'probe', ('t', 'unperturbed', 'envelope'), rows,
                     poly=args.poly, eps=args.eps, count=args.count, seed=args.seed)
    results: Dict[str, Any] = {'max_excess': float(np.max(env / base))}
    summary = f"probe: envelope over {args.count} shifts, max excess ×{results['max_excess']:.2f}"
    if len(t_values) >= 8:
        fit = fit_decay(DecaySamples(t_values, env, 'probe envelope'), t_min=float(t_values[0]))
        results['fit'] = fit
        summary += f", fit β = {fit.beta:.3f}, p = {fit.p}"
    return results, [path], summary


# parser -----------------------------------------------------------------------------------------

COMMANDS: Dict[str, Tuple[Callable, str]] = {
    'green': (cmd_green, "lattice Green's function G(x, t)"),
    'oscint': (cmd_oscint, "oscillatory integral I(v, t) = I1 + I2"),
    'jphase': (cmd_jphase, "J(t, S, psi) for a polynomial phase"),
    'critical': (cmd_critical, "critical points of the phase for a velocity, or classify a point"),
    'b0': (cmd_b0, "sup of the group speed over the degenerate strata"),
    'newton': (cmd_newton, "Newton distance, principal face and bound of a polynomial"),
    'conj': (cmd_conj, "odd-d most degenerate phase: Newton data and decay fit"),
    'evolve': (cmd_evolve, "exact linear evolution on a periodic box"),
    'lplq': (cmd_lplq, "lp -> lq decay table for d = 4"),
    'strichartz': (cmd_strichartz, "Strichartz ratios over random data"),
    'nonlinear': (cmd_nonlinear, "small-data nonlinear run against the linear flow"),
    'decay-fit': (cmd_decay_fit, "fit C t^beta log^p t to a samples CSV"),
    'table1': (cmd_table1, "decay fits along the degenerate stratum rays"),
    'kernel-decay': (cmd_kernel_decay, "decay fit of the Z^d kernel of 1/D"),
    'table2': (cmd_table2, "golden Newton-distance comparisons"),
    'probe': (cmd_probe, "envelope of J under small linear perturbations"),
}


def _common(p: argparse.ArgumentParser, settings: RuntimeSettings):
    p.add_argument('--threads', type=int, default=settings.threads, help="worker threads (default %(default)s)")
    p.add_argument('--budget', type=float, default=settings.budget,
                   help="integrand evaluations per quadrature (default %(default)s)")
    p.add_argument('--rtol', type=float, default=settings.rtol, help="relative tolerance (default %(default)s)")
    p.add_argument('--out', default=None, help="output path (default under --output-dir)")
    p.add_argument('--output-dir', default=settings.output_dir, help="default %(default)s")
    p.add_argument('--manifest', default=None, help="write a JSON manifest to this path")
    p.add_argument('--config', default=None, help="key=value config file; flags override it")
    p.add_argument('--dump-config', action='store_true', help="print the resolved config and exit")
    p.add_argument('--log-level', default='INFO', help="console log level (default %(default)s)")


def _schedule_args(p: argparse.ArgumentParser, tmin: float, tmax: float):
    p.add_argument('--t', type=parse_float_list, default=(), help="explicit times")
    p.add_argument('--tmin', type=float, default=tmin, help="default %(default)s")
    p.add_argument('--tmax', type=float, default=tmax, help="default %(default)s")
    p.add_argument('--ratio', type=float, default=1.15, help="geometric schedule ratio (default %(default)s)")


def _amp_args(p: argparse.ArgumentParser):
    p.add_argument('--amp', default='separable', choices=('separable', 'flat-separable', 'compact-bump'),
                   help="default %(default)s")
    p.add_argument('--radius', type=float, default=1.0, help="amplitude support radius (default %(default)s)")


def build_parser(settings: RuntimeSettings) -> Tuple[argparse.ArgumentParser, Dict[str, argparse.ArgumentParser]]:
    """The top-level parser and the subcommand parsers keyed by name."""
    parser = argparse.ArgumentParser(prog='latticewave', description="Dispersive estimates lab for the lattice wave equation")
    sub = parser.add_subparsers(dest='command', required=True)
    ps = {}
    for name, (func, help_text) in COMMANDS.items():
        ps[name] = sub.add_parser(name, help=help_text, description=help_text)
        ps[name].set_defaults(func=func)
        _common(ps[name], settings)

    p = ps['green']
    p.add_argument('--dim', type=int, default=4, help="default %(default)s")
    p.add_argument('--mass', type=float, default=0.0, help="Klein-Gordon mass (default %(default)s)")
    p.add_argument('--x', type=parse_int_list, default=(), help="lattice point")
    p.add_argument('--t', type=parse_float_list, default=(), help="times for --x")
    p.add_argument('--ray', type=parse_int_list, default=(), help="integer ray direction w (x = m·w)")
    p.add_argument('--mmin', type=int, default=1, help="default %(default)s")
    p.add_argument('--mmax', type=int, default=10, help="default %(default)s")
    p.add_argument('--t-per-unit', type=float, default=None, help="time per ray step (default: exact velocity)")

    p = ps['oscint']
    p.add_argument('--dim', type=int, default=3, help="default %(default)s")
    p.add_argument('--v', type=parse_float_list, required=False, default=(0.0, 0.0, 0.0), help="velocity")
    p.add_argument('--t', type=parse_float_list, default=(), help="times")
    p.add_argument('--cutoff-radius', type=float, default=0.5, help="origin cutoff radius (default %(default)s)")

    p = ps['jphase']
    p.add_argument('--poly', required=False, default='x1^2', help="phase polynomial (default %(default)s)")
    p.add_argument('--nvars', type=int, default=None, help="number of variables (default: from the text)")
    _schedule_args(p, 10.0, 200.0)
    _amp_args(p)
    p.add_argument('--fit', type=parse_bool, default=False, help="fit the decay (default %(default)s)")

    p = ps['critical']
    p.add_argument('--dim', type=int, default=2, help="default %(default)s")
    p.add_argument('--mass', type=float, default=0.0, help="default %(default)s")
    p.add_argument('--v', type=parse_float_list, default=(0.5, 0.5), help="velocity")
    p.add_argument('--xi', type=parse_float_list, default=(), help="classify this point instead")

    p = ps['b0']
    p.add_argument('--dim', type=int, default=3, help="default %(default)s")
    p.add_argument('--density', type=int, default=16, help="grid density (default %(default)s)")

    p = ps['newton']
    p.add_argument('--poly', required=False, default='x1^3', help="polynomial (default %(default)s)")
    p.add_argument('--nvars', type=int, default=None, help="number of variables")
    p.add_argument('--faces', type=parse_bool, default=True, help="enumerate compact faces (default %(default)s)")
    p.add_argument('--nondeg', type=parse_bool, default=False, help="check R-nondegeneracy (default %(default)s)")

    p = ps['conj']
    p.add_argument('--dim', type=int, default=3, help="odd dimension (default %(default)s)")
    p.add_argument('--fit', type=parse_bool, default=True, help="fit |I(v0, t)| (default %(default)s)")
    p.add_argument('--tmin', type=float, default=8.0, help="default %(default)s")
    p.add_argument('--tmax', type=float, default=48.0, help="default %(default)s")
    p.add_argument('--ratio', type=float, default=1.15, help="default %(default)s")
    p.add_argument('--rtol-I', type=float, default=1e-6, help="tolerance for I (default %(default)s)")

    for name in ('evolve', 'lplq', 'strichartz', 'nonlinear'):
        ps[name].add_argument('--dim', type=int, default=4, help="default %(default)s")
        ps[name].add_argument('--L', type=int, default={'evolve': 48, 'nonlinear': 32}.get(name),
                              help="box side (default %(default)s; norm runs use the light-cone side capped at 48)")
    p = ps['evolve']
    p.add_argument('--T', type=float, default=10.0, help="final time (default %(default)s)")
    p.add_argument('--mass', type=float, default=0.0, help="default %(default)s")
    p.add_argument('--data', default='delta', choices=('delta', 'random'), help="default %(default)s")
    p.add_argument('--amplitude', type=float, default=1.0, help="default %(default)s")
    p.add_argument('--support', type=int, default=3, help="random data support side (default %(default)s)")
    p.add_argument('--seed', type=int, default=0, help="default %(default)s")
    p.add_argument('--pointwise', type=parse_bool, default=False, help="enforce the light-cone box guard")

    p = ps['lplq']
    p.add_argument('--p', type=parse_index, default=parse_index('1'), help="default 1")
    p.add_argument('--q', type=parse_index, default=math.inf, help="default inf")
    p.add_argument('--T', type=float, default=40.0, help="default %(default)s")
    p.add_argument('--dt', type=float, default=1.0, help="default %(default)s")

    p = ps['strichartz']
    p.add_argument('--q', type=parse_index, default=parse_index('4'), help="default 4")
    p.add_argument('--r', type=parse_index, default=parse_index('4'), help="default 4")
    p.add_argument('--count', type=int, default=50, help="default %(default)s")
    p.add_argument('--T', type=float, default=40.0, help="default %(default)s")
    p.add_argument('--dt', type=float, default=0.5, help="default %(default)s")
    p.add_argument('--support', type=int, default=3, help="default %(default)s")
    p.add_argument('--seed', type=int, default=0, help="default %(default)s")

    p = ps['nonlinear']
    p.add_argument('--k', type=int, default=4, help="power of the nonlinearity (default %(default)s)")
    p.add_argument('--T', type=float, default=40.0, help="default %(default)s")
    p.add_argument('--dt', type=float, default=0.1, help="default %(default)s")
    p.add_argument('--amplitude', type=float, default=1e-3, help="‖f‖₁ (default %(default)s)")
    p.add_argument('--threshold', type=parse_bool, default=False, help="bisect the smallness threshold")

    p = ps['decay-fit']
    p.add_argument('--samples', required=False, default='samples.csv', help="CSV with t, magnitude, tag")
    p.add_argument('--tmin', type=float, default=8.0, help="default %(default)s")
    p.add_argument('--envelope', type=parse_bool, default=False, help="fit the running maximum")
    p.add_argument('--model', default='loglog', choices=FIT_MODELS, help="fit family (default %(default)s)")

    p = ps['table1']
    p.add_argument('--dim', type=int, default=2, help="default %(default)s")
    p.add_argument('--tmax', type=float, default=None, help="default: 500/120/60 for d = 2/3/4")
    p.add_argument('--count', type=int, default=40, help="default %(default)s")
    p.add_argument('--block', type=int, default=RAY_BLOCK,
                   help="consecutive steps per demodulated sample; 1 fits the envelope (default %(default)s)")

    p = ps['kernel-decay']
    p.add_argument('--dim', type=int, default=2, help="default %(default)s")
    p.add_argument('--rmin', type=int, default=10, help="default %(default)s")
    p.add_argument('--rmax', type=int, default=100, help="default %(default)s")
    p.add_argument('--count', type=int, default=12, help="default %(default)s")

    p = ps['probe']
    p.add_argument('--poly', default='x1*x2*x3 + x4^2', help="default %(default)s")
    p.add_argument('--nvars', type=int, default=None, help="number of variables")
    p.add_argument('--eps', type=float, default=0.05, help="default %(default)s")
    p.add_argument('--count', type=int, default=100, help="default %(default)s")
    p.add_argument('--seed', type=int, default=0, help="default %(default)s")
    _schedule_args(p, 10.0, 100.0)
    _amp_args(p)
    return parser, ps


CONFIG_SKIP = ('config', 'dump_config', 'command', 'func', 'log_level')


def _apply_config_file(subparsers: Dict[str, argparse.ArgumentParser], argv: Sequence[str]):
    """Install a --config file's values as defaults of the selected subcommand.

    Values are run through the subcommand's own parser as --key=value tokens,
    so they get the same type conversion and validation as flags.
    """
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument('--config', default=None)
    known, _ = pre.parse_known_args(argv)
    if not known.config:
        return
    cfg = ExperimentConfig.load(known.config)
    sub = subparsers.get(cfg.subcommand)
    if sub is None:
        raise ConfigError(f"Config names unknown subcommand {cfg.subcommand!r}")
    dests = vars(sub.parse_known_args([])[0])
    tokens = []
    for key, value in cfg.params.items():
        if key not in dests or key in CONFIG_SKIP:
            raise ConfigError(f"Config key {key!r} is not a parameter of {cfg.subcommand}")
        if value != 'none':
            tokens.append(f"--{key.replace('_', '-')}={value}")
    parsed, unknown = sub.parse_known_args(tokens)
    if unknown:
        raise ConfigError(f"Config entries {unknown} are not parameters of {cfg.subcommand}")
    sub.set_defaults(**{key: None if value == 'none' else getattr(parsed, key) for key, value in cfg.params.items()})


def run(argv: Optional[Sequence[str]] = None) -> int:
    """Parse argv, run one subcommand and return the process exit code."""
    argv = list(sys.argv[1:] if argv is None else argv)
    settings = check_environment()
    parser, subparsers = build_parser(settings)
    try:
        _apply_config_file(subparsers, argv)
        args = parser.parse_args(argv)
    except LatticeWaveError as e:
        print(f"❌ {e}", file=sys.stderr)
        return e.exit_code
    except SystemExit as e:
        return EXIT_OK if e.code in (0, None) else EXIT_VALIDATION

    config = ExperimentConfig.from_namespace(args.command, args, skip=CONFIG_SKIP)
    if args.dump_config:
        sys.stdout.write(config.dumps())
        return EXIT_OK

    log_dir = Path(settings.log_dir)
    setup_logging(log_dir, args.log_level)
    setup_directories(settings)
    check_system_health(Path(settings.output_dir))
    logger.info(f"🚀 latticewave {args.command}")

    exit_code = EXIT_OK
    summary = ''
    with Stopwatch() as clock:
        try:
            results, outputs, summary = args.func(args)
        except LatticeWaveError as e:
            report_error(e, log_dir)
            exit_code = e.exit_code
        except (ValueError, OSError) as e:
            report_error(e, log_dir)
            exit_code = EXIT_VALIDATION
    if exit_code == EXIT_OK:
        if args.manifest:
            emit_manifest(config, results, outputs, clock.elapsed, Path(args.manifest))
        print(summary)
        logger.info(f"⏱️ {args.command} finished in {clock.elapsed:.2f} s")
    append_history(log_dir, config, exit_code, clock.elapsed, summary)
    return exit_code


if __name__ == "__main__":
    signal.signal(signal.SIGINT, signal_handler)
    signal.signal(signal.SIGTERM, signal_handler)
    sys.exit(run())
