import json

import pytest

from tvrecover.main import main


@pytest.fixture(autouse=True)
def output_root(monkeypatch, tmp_path):
    monkeypatch.setenv("RECOVER_OUTPUT_ROOT", str(tmp_path / "runs"))
    monkeypatch.setenv("RECOVER_LOG_LEVEL", "WARNING")
    monkeypatch.setenv("RECOVER_DEFAULT_N", "16")
    monkeypatch.setenv("RECOVER_SEED", "0")
    return tmp_path / "runs"


def test_phantom_command(tmp_path, capsys):
    out = tmp_path / "phantom.pgm"
    assert main(["phantom", "--out", str(out)]) == 0
    assert out.exists()
    printed = json.loads(capsys.readouterr().out)
    assert printed["shape"] == [16, 16]
    assert printed["path"] == str(out)


def test_suite_command(capsys):
    assert main(["suite", "padding", "--n", "6", "--trials", "5"]) == 0
    report = json.loads(capsys.readouterr().out)
    assert report["passed"]
    assert report["params"] == {"n": 6, "seed": 0, "trials": 5}


def test_unknown_suite_is_usage_error():
    with pytest.raises(SystemExit) as exc:
        main(["suite", "nonsense"])
    assert exc.value.code == 2


def test_rip_command_exhaustive(capsys):
    assert main(["rip", "--kind", "identity", "--s", "2", "--d", "6", "--exhaustive"]) == 0
    printed = json.loads(capsys.readouterr().out)
    assert printed["delta_lower"] == pytest.approx(0.0, abs=1e-12)
    assert printed["method"] == "exhaustive"


def test_rip_command_sampled_on_haar(capsys):
    assert main(["rip", "--kind", "fourier_signed", "--m", "32", "--n", "8", "--s", "3",
                 "--trials", "20", "--haar"]) == 0
    printed = json.loads(capsys.readouterr().out)
    assert printed["operator"] == "haar_composed"
    assert printed["trials"] == 20


@pytest.mark.parametrize("argv", [
    ["rip", "--kind", "gaussian", "--s", "2"],
    ["rip", "--kind", "fourier_plain", "--m", "4", "--d", "8", "--s", "1"],
    ["rip", "--kind", "gaussian", "--m", "10", "--n", "8", "--s", "6", "--exhaustive"],
    ["run", "does-not-exist.json"],
])
def test_invalid_input_exits_two(argv):
    assert main(argv) == 2


def test_bad_environment_exits_two(monkeypatch):
    monkeypatch.setenv("RECOVER_LOG_LEVEL", "LOUD")
    assert main(["phantom", "--out", "unused.pgm"]) == 2


def test_run_command(tmp_path, output_root, capsys):
    config = {
        "image": {"kind": "synthetic_gradient_sparse", "n": 8, "s": 2, "seed": 1},
        "operator": {"kind": "gaussian", "fraction": 0.5, "seed": 0},
        "decoders": ["tv"],
        "solver": {"max_iters": 20},
        "output_dir": "cli",
    }
    path = tmp_path / "config.json"
    path.write_text(json.dumps(config))
    assert main(["run", str(path)]) == 0
    rows = json.loads(capsys.readouterr().out)
    assert len(rows) == 1
    assert rows[0]["decoder"] == "tv"
    assert (output_root / "cli" / "metrics.csv").exists()
