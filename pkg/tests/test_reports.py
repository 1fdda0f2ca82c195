import json
from fractions import Fraction

import numpy as np

from config import ExperimentConfig
from decayfit import DecaySamples
from reports import (Stopwatch, append_history, csv_header, emit_manifest, read_csv, read_samples, sha256_file,
                     write_csv, write_samples)


def test_csv_header():
    assert csv_header('green', d=4, t=1.5, v=(0.5, 0.25)) == "# latticewave v1, green, d=4, t=1.5, v=0.5;0.25"


def test_csv_roundtrip(tmp_path):
    path = write_csv(tmp_path / "sub" / "table.csv", 'table2', ('phase', 'd_S', 'value'),
                     [("x1^3", Fraction(3), 0.1), ("x1*x2*x3", Fraction(1), 1j)])
    assert path.read_text(encoding='utf-8').startswith("# latticewave v1, table2")
    rows = read_csv(path)
    assert [r['d_S'] for r in rows] == ["3", "1"]
    assert float(rows[0]['value']) == 0.1
    assert complex(rows[1]['value']) == 1j


def test_samples_roundtrip(tmp_path):
    samples = DecaySamples([1.0, 2.0, 4.0], [0.5, 0.25, 0.125], "x1^2")
    back = read_samples(write_samples(tmp_path / "s.csv", samples))
    np.testing.assert_array_equal(back.t, samples.t)
    np.testing.assert_array_equal(back.magnitude, samples.magnitude)
    assert back.tag == "x1^2"


def test_manifest(tmp_path):
    out = tmp_path / "out.csv"
    out.write_text("a,b\n1,2\n", encoding='utf-8')
    cfg = ExperimentConfig('newton', {'poly': 'x1^3'})
    text = emit_manifest(cfg, {'d_S': Fraction(3), 'values': np.arange(2)}, [out], 1.25, tmp_path / "m.json")
    doc = json.loads((tmp_path / "m.json").read_text(encoding='utf-8'))
    assert doc == json.loads(text)
    assert doc['tool'] == 'latticewave'
    assert doc['config'] == {'subcommand': 'newton', 'poly': 'x1^3'}
    assert doc['results'] == {'d_S': '3', 'values': [0, 1]}
    assert doc['outputs'] == [{'path': str(out), 'sha256': sha256_file(out)}]


def test_history_appends(tmp_path):
    cfg = ExperimentConfig('table2')
    append_history(tmp_path, cfg, 0, 0.5, 'first')
    path = append_history(tmp_path, cfg, 3, 1.0, 'second')
    lines = [json.loads(line) for line in path.read_text(encoding='utf-8').splitlines()]
    assert [e['exit_code'] for e in lines] == [0, 3]
    assert lines[1]['summary'] == 'second'


def test_stopwatch():
    with Stopwatch() as clock:
        sum(range(1000))
    assert clock.elapsed >= 0
