import json
import subprocess
import sys

import numpy as np
import pytest

from quasibrown import cli
from quasibrown import io


@pytest.fixture(autouse=True)
def clean_env(monkeypatch):
    monkeypatch.delenv("QUASIBROWN_SEED", raising=False)
    monkeypatch.delenv("QUASIBROWN_OUT", raising=False)


def test_fig1_outputs(tmp_path):
    assert cli.main(["fig1", "--out", str(tmp_path)]) == 0
    for s in range(1, 6):
        tr = io.read_trajectory_csv(tmp_path / f"fig1_seed{s}.csv")
        assert len(tr) == 512 and tr.values[0] == 0.0
    rows = [l for l in (tmp_path / "fig1_combined.dat").read_text().splitlines() if not l.startswith("#")]
    assert len(rows) == 512 and len(rows[0].split()) == 6
    manifest = json.loads((tmp_path / "fig1_manifest.json").read_text())
    assert all(v > 10 for v in manifest["reversals"].values())


def test_fig1_is_byte_reproducible(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    assert cli.main(["fig1", "--out", str(a)]) == 0
    assert cli.main(["fig1", "--out", str(b)]) == 0
    for f in sorted(a.iterdir()):
        assert f.read_bytes() == (b / f.name).read_bytes()


def test_suite_subset_passes(tmp_path, capsys):
    assert cli.main(["suite", "--only", "spectra", "--out", str(tmp_path)]) == 0
    out = capsys.readouterr().out
    assert "[PASS] criterion  4" in out and "[PASS] criterion  5" in out
    report = json.loads((tmp_path / "suite_report.json").read_text())
    assert report["passed"] and {c["number"] for c in report["criteria"]} == {4, 5}


def test_suite_failure_exit_status(tmp_path):
    # the one-sided complex Wiener criterion is expected to fail
    assert cli.main(["suite", "--only", "1", "--out", str(tmp_path)]) == 1


def test_suite_unknown_selection(tmp_path):
    assert cli.main(["suite", "--only", "nonsense", "--out", str(tmp_path)]) == 2


def test_missing_config(tmp_path):
    assert cli.main(["zeno", "--config", str(tmp_path / "nope.toml"), "--out", str(tmp_path)]) == 2


@pytest.mark.parametrize("text", ["[zeno]\nbogus = 1\n", "[zeno]\nn = -3\n", "seed = \"x\"\n",
                                  "not toml [", "[unknown]\n"])
def test_bad_config(tmp_path, text):
    cfg = tmp_path / "c.toml"
    cfg.write_text(text)
    assert cli.main(["zeno", "--config", str(cfg), "--out", str(tmp_path)]) == 2


def test_config_then_env_then_flags(tmp_path, monkeypatch):
    cfg = tmp_path / "c.toml"
    cfg.write_text(f'seed = 5\nout = "{tmp_path / "from_config"}"\n[zeno]\nn = 8\ndomain_size = 4\n')
    args = cli.build_parser().parse_args(["zeno", "--config", str(cfg)])
    params, seed, out = cli.resolve(args)
    assert seed == 5 and out == tmp_path / "from_config" and params["n"] == 8
    monkeypatch.setenv("QUASIBROWN_SEED", "9")
    monkeypatch.setenv("QUASIBROWN_OUT", str(tmp_path / "from_env"))
    params, seed, out = cli.resolve(args)
    assert seed == 9 and out == tmp_path / "from_env"
    args = cli.build_parser().parse_args(["zeno", "--config", str(cfg), "--seed", "11"])
    assert cli.resolve(args)[1] == 11


def test_bad_env_seed(tmp_path, monkeypatch):
    monkeypatch.setenv("QUASIBROWN_SEED", "abc")
    assert cli.main(["zeno", "--out", str(tmp_path)]) == 2


def test_valid_config_run(tmp_path):
    cfg = tmp_path / "c.toml"
    cfg.write_text("[zeno]\nn = 8\ndomain_size = 4\nn_peeks = [1, 2, 4]\n")
    assert cli.main(["zeno", "--config", str(cfg), "--out", str(tmp_path)]) == 0
    doc = json.loads((tmp_path / "zeno.json").read_text())
    assert doc["n_peeks"] == [1, 2, 4] and abs(doc["exponent"] - 2) < 0.1 and doc["monotone"]


def test_unknown_command_is_usage_error():
    assert cli.main(["frobnicate"]) == 2


@pytest.mark.parametrize("cmd", ["wiener", "ou", "spectrum-bounds", "inverse-sum", "nbml"])
def test_commands_write_outputs(tmp_path, cmd):
    cfg = tmp_path / "c.toml"
    small = {"wiener": "[wiener]\nn_draws = 200\n", "ou": "", "spectrum-bounds": "",
             "inverse-sum": "[inverse-sum]\nbudget = 10000\n", "nbml": "[nbml]\nlevels = 1000\n"}
    cfg.write_text(small[cmd])
    assert cli.main([cmd, "--config", str(cfg), "--out", str(tmp_path / "o")]) == 0
    assert any((tmp_path / "o").iterdir())


def test_ou_msd_table(tmp_path):
    cfg = tmp_path / "c.toml"
    cfg.write_text("[ou-msd]\nn_paths = 500\nn_terms = 100\ngrid = 5\n")
    assert cli.main(["ou-msd", "--config", str(cfg), "--out", str(tmp_path)]) == 0
    tab = io.read_table_csv(tmp_path / "ou_msd.csv")
    assert list(tab) == ["t", "msd_analytic", "msd_series_mc", "msd_exact_mc", "stderr"]
    np.testing.assert_allclose(tab["t"], [0.25, 0.5, 0.75, 1.0])


def test_wfe_rejects_momentum_on_lattice(tmp_path):
    cfg = tmp_path / "c.toml"
    cfg.write_text('[wfe]\noperator = "P"\n')
    assert cli.main(["wfe", "--config", str(cfg), "--out", str(tmp_path)]) == 2


def test_wfe_run(tmp_path):
    cfg = tmp_path / "c.toml"
    cfg.write_text("[wfe]\nsteps = 200\n")
    assert cli.main(["wfe", "--config", str(cfg), "--out", str(tmp_path)]) == 0
    doc = json.loads((tmp_path / "wfe.json").read_text())
    assert max(doc["norm_drift"].values()) < 1e-8


def test_module_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "quasibrown", "zeno", "--out", str(tmp_path)],
                          capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
    assert (tmp_path / "zeno.json").exists()
