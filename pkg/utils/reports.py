"""CSV tables, JSON manifests and the run history."""

import csv
import json
import time
import hashlib
import logging
import platform
from datetime import datetime
from fractions import Fraction
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional, Sequence

import numpy as np

from config import ExperimentConfig
from decayfit import DecaySamples

logger = logging.getLogger(__name__)

TOOL_NAME = "latticewave"
TOOL_VERSION = "1.0.0"
SCHEMA = "v1"


def csv_header(command: str, **meta) -> str:
    """'# latticewave v1, <command>, key=value, …'."""
    parts = [f"{TOOL_NAME} {SCHEMA}", command] + [f"{k}={_plain(v)}" for k, v in meta.items()]
    return "# " + ", ".join(parts)


def _plain(value: Any) -> str:
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, (list, tuple)):
        return ";".join(_plain(v) for v in value)
    return str(value)


def _cell(value: Any) -> str:
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    if isinstance(value, (complex, np.complexfloating)):
        return f"{complex(value).real!r}{complex(value).imag:+.17g}j"
    return str(value)


def write_csv(path: Path, command: str, columns: Sequence[str], rows: Iterable[Sequence[Any]], **meta) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, 'w', encoding='utf-8', newline='') as f:
        f.write(csv_header(command, **meta) + "\n")
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(columns)
        for row in rows:
            writer.writerow([_cell(v) for v in row])
    logger.info(f"📁 wrote {path}")
    return path


def read_csv(path: Path) -> List[Dict[str, str]]:
    with open(path, 'r', encoding='utf-8', newline='') as f:
        lines = [line for line in f if not line.startswith('#')]
    return list(csv.DictReader(lines))


def write_samples(path: Path, samples: DecaySamples, command: str = 'samples') -> Path:
    rows = ((t, m, samples.tag) for t, m in zip(samples.t, samples.magnitude))
    return write_csv(path, command, ('t', 'magnitude', 'tag'), rows)


def read_samples(path: Path) -> DecaySamples:
    rows = read_csv(path)
    tag = rows[0].get('tag', '') if rows else ''
    return DecaySamples([float(r['t']) for r in rows], [float(r['magnitude']) for r in rows], tag or '')


def sha256_file(path: Path) -> str:
    digest = hashlib.sha256()
    with open(path, 'rb') as f:
        for block in iter(lambda: f.read(1 << 16), b''):
            digest.update(block)
    return digest.hexdigest()


def _jsonable(value: Any):
    if isinstance(value, Fraction):
        return str(value)
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, (np.floating,)):
        return float(value)
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, complex):
        return [value.real, value.imag]
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if hasattr(value, 'to_dict'):
        return _jsonable(value.to_dict())
    return value


def emit_manifest(config: ExperimentConfig, results: Dict[str, Any], outputs: Sequence[Path] = (),
                  wall_time: float = 0.0, path: Optional[Path] = None) -> str:
    """JSON manifest: config echo, tool version, wall time, results and output checksums."""
    doc = {
        'tool': TOOL_NAME,
        'version': TOOL_VERSION,
        'python': platform.python_version(),
        'config': config.as_dict(),
        'wall_time_s': round(float(wall_time), 6),
        'results': _jsonable(results),
        'outputs': [{'path': str(p), 'sha256': sha256_file(Path(p))} for p in outputs],
    }
    text = json.dumps(doc, indent=2, sort_keys=True)
    if path is not None:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text + "\n", encoding='utf-8')
        logger.info(f"📁 manifest {path}")
    return text


def append_history(log_dir: Path, config: ExperimentConfig, exit_code: int, wall_time: float,
                   summary: str = '') -> Path:
    """One JSON line per run in <log_dir>/run_history.jsonl."""
    log_dir = Path(log_dir)
    log_dir.mkdir(parents=True, exist_ok=True)
    path = log_dir / "run_history.jsonl"
    entry = {
        'timestamp': datetime.now().isoformat(timespec='seconds'),
        'subcommand': config.subcommand,
        'exit_code': exit_code,
        'wall_time_s': round(float(wall_time), 3),
        'summary': summary,
    }
    with open(path, 'a', encoding='utf-8') as f:
        f.write(json.dumps(entry) + "\n")
    return path


class Stopwatch:
    """Context manager measuring wall time."""

    def __enter__(self):
        self.start = time.perf_counter()
        self.elapsed = 0.0
        return self

    def __exit__(self, *exc):
        self.elapsed = time.perf_counter() - self.start
        return False
