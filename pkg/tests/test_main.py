import json

import pytest

import main
from decayfit import DecaySamples, geometric_schedule
from reports import read_csv, write_samples


def test_newton_command(isolated_env, capsys):
    assert main.run(['newton', '--poly', 'x1^2*x2 - x2^3']) == 0
    out = capsys.readouterr().out
    assert '"d_S": "3/2"' in out
    assert "newton: d_S = 3/2, k_S = 1" in out


def test_bad_polynomial_is_a_validation_error(isolated_env, capsys):
    assert main.run(['newton', '--poly', 'x1 + * x2']) == 2
    assert "PolySyntaxError" in capsys.readouterr().err


def test_unknown_subcommand(isolated_env):
    assert main.run(['nosuch']) == 2


def test_help_exits_cleanly(isolated_env):
    assert main.run(['table2', '--help']) == 0


def test_table2_writes_csv_manifest_and_history(isolated_env):
    manifest = isolated_env / 'manifest.json'
    assert main.run(['table2', '--manifest', str(manifest)]) == 0
    rows = read_csv(isolated_env / 'output' / 'table2.csv')
    assert len(rows) == 4
    assert all(r['status'] == 'exact match' for r in rows)
    doc = json.loads(manifest.read_text(encoding='utf-8'))
    assert doc['config']['subcommand'] == 'table2'
    assert len(doc['outputs']) == 1
    history = (isolated_env / 'logs' / 'run_history.jsonl').read_text(encoding='utf-8').splitlines()
    assert json.loads(history[-1])['exit_code'] == 0


def test_dump_config_roundtrip(isolated_env, capsys):
    assert main.run(['newton', '--poly', 'x1^3 + x1*x2^2', '--dump-config']) == 0
    text = capsys.readouterr().out
    assert "subcommand=newton" in text
    path = isolated_env / 'newton.env'
    path.write_text(text, encoding='utf-8')
    assert main.run(['newton', '--config', str(path)]) == 0
    assert '"k_S": 1' in capsys.readouterr().out


def test_flags_override_config(isolated_env, capsys):
    path = isolated_env / 'newton.env'
    path.write_text("subcommand=newton\npoly=x1^4\n", encoding='utf-8')
    assert main.run(['newton', '--config', str(path), '--poly', 'x1^3']) == 0
    assert "d_S = 3," in capsys.readouterr().out


@pytest.mark.parametrize("text", ["subcommand=bogus\n", "subcommand=newton\nwidth=3\n", "poly=x1^2\n"])
def test_bad_config_files(isolated_env, text):
    path = isolated_env / 'bad.env'
    path.write_text(text, encoding='utf-8')
    assert main.run(['newton', '--config', str(path)]) == 2


def test_decay_fit_command(isolated_env, capsys):
    t = geometric_schedule(10.0, 400.0)
    samples_path = write_samples(isolated_env / 'samples.csv', DecaySamples(t, t ** -0.5, 'x1^2'))
    assert main.run(['decay-fit', '--samples', str(samples_path)]) == 0
    assert "β = -0.5000, p = 0" in capsys.readouterr().out


def test_lplq_command(isolated_env):
    assert main.run(['lplq', '--p', '2', '--q', '2', '--T', '3', '--L', '8']) == 0
    rows = read_csv(isolated_env / 'output' / 'lplq.csv')
    assert len(rows) == 3


def test_config_values_are_typed_by_the_subcommand_parser(isolated_env):
    path = isolated_env / 'lplq.env'
    path.write_text("subcommand=lplq\np=2\nq=2\nT=3\nL=8\n", encoding='utf-8')
    assert main.run(['lplq', '--config', str(path)]) == 0
    assert len(read_csv(isolated_env / 'output' / 'lplq.csv')) == 3


def test_config_value_with_a_leading_minus(isolated_env, capsys):
    path = isolated_env / 'newton.env'
    path.write_text("subcommand=newton\npoly='-x1^2 + x1^4'\n", encoding='utf-8')
    assert main.run(['newton', '--config', str(path)]) == 0
    assert "d_S = 2," in capsys.readouterr().out


@pytest.mark.parametrize("text", ["subcommand=lplq\nT=soon\n", "subcommand=lplq\nfunc=x\n"])
def test_config_values_are_validated(isolated_env, text):
    path = isolated_env / 'bad.env'
    path.write_text(text, encoding='utf-8')
    assert main.run(['lplq', '--config', str(path)]) == 2


def test_missing_samples_file(isolated_env):
    assert main.run(['decay-fit', '--samples', str(isolated_env / 'absent.csv')]) == 2
