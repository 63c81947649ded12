"""CLI surface: subcommands, config overrides, exit codes."""

import json
import os

from ssmfusion.harness.cli import main
from ssmfusion.harness.tensorfile import read_tensor


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def test_params_deterministic_integer(capsys):
    code, out, _ = run(capsys, "params", "--set", "C=64", "--set", "N=16", "--set", "L=2")
    assert code == 0
    line = [l for l in out.splitlines() if l.startswith("params=")][0]
    value = int(line.split("=")[1])
    code2, out2, _ = run(capsys, "params", "--set", "C=64", "--set", "N=16", "--set", "L=2")
    assert int([l for l in out2.splitlines() if l.startswith("params=")][0].split("=")[1]) == value


def test_unknown_subcommand_exits_1(capsys):
    code, _out, err = run(capsys, "frobnicate")
    assert code == 1
    assert "usage" in err.lower()


def test_unknown_flag_exits_1(capsys):
    code, _out, err = run(capsys, "params", "--bogus")
    assert code == 1
    assert "usage" in err.lower()


def test_no_subcommand_exits_1(capsys):
    code, _out, err = run(capsys, )
    assert code == 1


def test_bad_set_key_exits_1(capsys):
    code, _out, err = run(capsys, "params", "--set", "nonsense=3")
    assert code == 1
    assert "nonsense" in err


def test_invalid_config_value_exits_1(capsys):
    code, _out, err = run(capsys, "params", "--set", "routes=5")
    assert code == 1
    assert "routes" in err


def test_synth_train_eval_pipeline(tmp_path, capsys):
    data = str(tmp_path / "data")
    code, out, _ = run(capsys, "synth", "--out", data, "--seed", "3",
                       "--set", "n_train=24", "--set", "n_test=24", "--set", "bands=12")
    assert code == 0
    manifest = os.path.join(data, "manifest.json")
    assert os.path.exists(manifest)

    ck = str(tmp_path / "ck.msfc")
    code, out, _ = run(
        capsys, "train", "--manifest", manifest, "--out", ck, "--seed", "1",
        "--set", "epochs=2", "--set", "batch_size=8",
        "--set", "C=6", "--set", "N=4", "--set", "N_p=4", "--set", "patch=4",
    )
    assert code == 0
    assert os.path.exists(ck) and os.path.exists(ck + ".log")
    assert "epoch=0" in out and "epoch=2" in out

    code, out, _ = run(capsys, "eval", "--checkpoint", ck, "--manifest", manifest,
                       "--split", "test")
    assert code == 0
    assert "oa=" in out and "confusion=" in out


def test_config_file_plus_override(tmp_path, capsys):
    cfg_path = str(tmp_path / "cfg.json")
    with open(cfg_path, "w") as f:
        json.dump({"model": {"C": 16, "N": 4}}, f)
    code, out, _ = run(capsys, "params", "--config", cfg_path, "--set", "model.N=8")
    assert code == 0
    from ssmfusion.model import ModelConfig, param_count

    want = param_count(ModelConfig(C=16, N=8).validate())
    assert f"params={want}" in out


def test_erf_random_model(tmp_path, capsys):
    out_path = str(tmp_path / "erf.msft")
    code, out, _ = run(
        capsys, "erf", "--out", out_path, "--seed", "2",
        "--set", "C=6", "--set", "N_p=4", "--set", "patch=6",
    )
    assert code == 0
    erf = read_tensor(out_path)
    assert erf.shape == (6, 6)
    assert "support_fraction=1.0000" in out


def test_gradcheck_exit_contract(capsys):
    code, out, _ = run(capsys, "gradcheck")
    assert code == 0
    assert "gradcheck_suite=pass" in out
    assert out.count("status=pass") >= 17


def test_scanbench_small(capsys):
    code, out, _ = run(capsys, "scanbench", "--set", "P=256", "--set", "reps=1")
    assert code == 0
    assert "scanbench=pass" in out
    assert "backend=numpy" in out


def test_missing_manifest_exits_1(tmp_path, capsys):
    code, _out, err = run(capsys, "train", "--manifest", str(tmp_path / "nope.json"),
                          "--out", str(tmp_path / "ck.msfc"))
    assert code == 1


def test_diverged_training_exits_2(tmp_path, capsys):
    data = str(tmp_path / "data")
    run(capsys, "synth", "--out", data, "--seed", "3",
        "--set", "n_train=24", "--set", "n_test=24", "--set", "bands=12")
    code, _out, err = run(
        capsys, "train", "--manifest", os.path.join(data, "manifest.json"),
        "--out", str(tmp_path / "ck.msfc"), "--seed", "1",
        "--set", "epochs=3", "--set", "batch_size=8", "--set", "optimizer=sgd",
        "--set", "lr=1e12",
        "--set", "C=6", "--set", "N=4", "--set", "N_p=4", "--set", "patch=4",
    )
    assert code == 2
    assert "runtime error" in err
