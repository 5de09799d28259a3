import json
import logging
import os

import pandas as pd
import pytest

from main import EXIT_INVALID_CONFIG, EXIT_OK, build_parser, main

ROOT = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))


@pytest.fixture(autouse=True)
def isolated_run(tmp_path, monkeypatch):
    monkeypatch.setenv('ACRLNC_LOG_FILE', str(tmp_path / "logs" / "acrlnc.log"))
    monkeypatch.setenv('ACRLNC_OUTPUT_DIR', str(tmp_path / "results"))
    root = logging.getLogger()
    handlers, level = list(root.handlers), root.level
    yield
    for handler in root.handlers:
        handler.close()
    root.handlers[:] = handlers
    root.setLevel(level)


def _experiment(tmp_path, **overrides):
    data = {
        'name': "cli",
        'eps': [["e1", 0.3]],
        'rtt': 10,
        'iterations': 2,
        'packet_count': 40,
        'max_workers': 1,
        'sweep': [{'cells': [{'e1': 0.2}]}],
    }
    data.update(overrides)
    path = tmp_path / "experiment.json"
    path.write_text(json.dumps(data), encoding='utf-8')
    return str(path)


def test_parser_requires_a_command():
    with pytest.raises(SystemExit):
        build_parser().parse_args([])
    args = build_parser().parse_args(['simulate', '--config', 'x.json', '--seed', '3', '--parallel', '2'])
    assert (args.seed, args.parallel) == (3, 2)


def test_validate_exit_codes(tmp_path, capsys):
    assert main(['validate', '--config', _experiment(tmp_path)]) == EXIT_OK
    assert "CONFIGURAÇÃO VÁLIDA" in capsys.readouterr().out
    assert main(['validate', '--config', _experiment(tmp_path, rtt=7)]) == EXIT_INVALID_CONFIG
    assert main(['validate', '--config', str(tmp_path / "missing.json")]) == EXIT_INVALID_CONFIG


def test_simulate_writes_results(tmp_path, capsys):
    out = tmp_path / "sim"
    code = main(['simulate', '--config', _experiment(tmp_path), '--out', str(out), '--seed', '5'])
    assert code == EXIT_OK
    csv_path = capsys.readouterr().out.strip().splitlines()[-1]
    frame = pd.read_csv(csv_path)
    assert frame['seed'].tolist()[:2] == [5, 6]
    assert (frame['error'].fillna('') == '').all()


def test_simulate_with_protocol_override(tmp_path, capsys):
    code = main(['simulate', '--config', _experiment(tmp_path), '--protocol', 'sr_arq', '--iterations', '1'])
    assert code == EXIT_OK
    csv_path = capsys.readouterr().out.strip().splitlines()[-1]
    assert os.path.basename(csv_path).startswith("cli_sr_arq_")
    assert str(tmp_path / "results") in csv_path


def test_invalid_config_exits_with_two(tmp_path, capsys):
    assert main(['simulate', '--config', _experiment(tmp_path, protocol="tcp")]) == EXIT_INVALID_CONFIG
    assert main(['simulate', '--config', _experiment(tmp_path), '--protocol', 'tcp']) == EXIT_INVALID_CONFIG
    assert "Configuração inválida" in capsys.readouterr().err


def test_bounds_command(tmp_path, capsys):
    config = os.path.join(ROOT, "config", "bounds_f_sweep.json")
    assert main(['bounds', '--config', config, '--out', str(tmp_path)]) == EXIT_OK
    assert "throughput_ub" in capsys.readouterr().out
    assert any(name.startswith("bounds_f_sweep_bounds_") for name in os.listdir(tmp_path))


def test_sweep_then_compare(tmp_path, capsys):
    out = tmp_path / "sweep"
    assert main(['sweep', '--config', _experiment(tmp_path), '--out', str(out)]) == EXIT_OK
    merged = pd.read_csv(capsys.readouterr().out.strip().splitlines()[-1])
    assert len(merged) == 1
    assert 'F_eta' in merged.columns

    sim = next(str(p) for p in out.iterdir() if p.name.startswith("cli_mp_acrlnc_") and p.suffix == ".csv")
    bounds = next(str(p) for p in out.iterdir() if "_bounds_" in p.name)
    assert main(['compare', '--sim', sim, '--bounds', bounds, '--out', str(tmp_path / "cmp")]) == EXIT_OK
    assert len(os.listdir(tmp_path / "cmp")) == 1


def test_matching_command_prints_example(capsys):
    assert main(['matching', '--config', os.path.join(ROOT, "config", "mh_example.json")]) == EXIT_OK
    out = capsys.readouterr().out
    assert "  [2, 1, 1]" in out
    assert "η ingênuo = 1.500" in out
    assert "η natural = 2.400" in out
    assert out.count("capacidade (corte mínimo) = 2.600") == 2


def test_compare_with_missing_file_fails(tmp_path):
    assert main(['compare', '--sim', str(tmp_path / "a.csv"), '--bounds', str(tmp_path / "b.csv")]) == 1
