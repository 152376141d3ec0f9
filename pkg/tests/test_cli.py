import json

import numpy as np
import pytest

from screwreg.cli import main
from screwreg.io import read_result


@pytest.fixture
def corr_instance(tmp_path):
    out = tmp_path / "inst"
    assert main(["synth", "--out-dir", str(out), "--n", "2000", "--eta", "0.95", "--sigma", "0.005", "--seed", "7"]) == 0
    return out


def test_synth_is_deterministic(tmp_path, corr_instance):
    other = tmp_path / "again"
    main(["synth", "--out-dir", str(other), "--n", "2000", "--eta", "0.95", "--sigma", "0.005", "--seed", "7"])
    for name in ("corr.txt", "truth.txt", "labels.txt", "instance.txt"):
        assert (corr_instance / name).read_bytes() == (other / name).read_bytes()
    assert sum(map(int, (corr_instance / "labels.txt").read_text().split())) == 100


def test_register_reports_errors_against_truth(corr_instance, capsys):
    out = corr_instance / "r.txt"
    rc = main(["register", str(corr_instance / "corr.txt"), "--sigma", "0.005", "--tau-auto",
               "--truth", str(corr_instance / "truth.txt"), "--out", str(out)])
    assert rc == 0
    stdout = dict(line.split(" ", 1) for line in capsys.readouterr().out.splitlines())
    assert float(stdout["re_deg"]) <= 1 and float(stdout["te_m"]) <= 0.01
    truth = read_result(corr_instance / "truth.txt")
    assert np.allclose(read_result(out)["rotation"], truth["rotation"], atol=0.02)


def test_thread_count_does_not_change_result(corr_instance):
    files = []
    for threads in ("1", "8"):
        out = corr_instance / f"r{threads}.txt"
        main(["register", str(corr_instance / "corr.txt"), "--sigma", "0.005", "--tau-auto",
              "--threads", threads, "--out", str(out)])
        files.append(out.read_bytes())
    assert files[0] == files[1]


def test_index_correspondences(tmp_path):
    rng = np.random.default_rng(0)
    src = rng.uniform(-1, 1, (50, 3))
    np.savetxt(tmp_path / "s.xyz", src)
    np.savetxt(tmp_path / "t.xyz", src + [0.1, 0.2, 0.3])
    np.savetxt(tmp_path / "c.txt", np.column_stack([np.arange(50), np.arange(50)]), fmt="%d")
    out = tmp_path / "r.txt"
    rc = main(["register", str(tmp_path / "c.txt"), "--source", str(tmp_path / "s.xyz"),
               "--target", str(tmp_path / "t.xyz"), "--delta", "1e-6", "--tau", "1e-6", "--out", str(out)])
    assert rc == 0
    assert np.allclose(read_result(out)["translation"], [0.1, 0.2, 0.3])


def test_exit_codes(tmp_path, corr_instance, capsys):
    assert main(["register", str(tmp_path / "missing.txt"), "--delta", "1", "--tau", "1"]) == 1
    assert "missing.txt" in capsys.readouterr().err
    corr = str(corr_instance / "corr.txt")
    assert main(["register", corr, "--tau", "0.01"]) == 1
    assert main(["register", corr, "--delta", "0.01"]) == 1
    assert main(["register", corr, "--delta", "0.01", "--tau-auto"]) == 1
    with pytest.raises(SystemExit) as exc:
        main(["register", corr, "--gravity-p", "1,2"])
    assert exc.value.code == 1
    with pytest.raises(SystemExit) as exc:
        main(["nonsense"])
    assert exc.value.code == 1
    bad = tmp_path / "bad.txt"
    bad.write_text("1 2 3 4 5 6\nfoo\n")
    assert main(["register", str(bad), "--delta", "1", "--tau", "1"]) == 1
    assert "bad.txt:2" in capsys.readouterr().err


def test_no_consensus_exit_code_and_no_output(tmp_path):
    rng = np.random.default_rng(1)
    np.savetxt(tmp_path / "a.xyz", rng.uniform(-1, 1, (5, 3)))
    np.savetxt(tmp_path / "b.xyz", rng.uniform(-1, 1, (5, 3)) + 50)
    out = tmp_path / "r.txt"
    rc = main(["register-spcr", str(tmp_path / "a.xyz"), str(tmp_path / "b.xyz"),
               "--delta", "1e-3", "--tau", "1e-3", "--out", str(out)])
    assert rc == 2
    assert not out.exists()


def test_register_spcr(tmp_path):
    out = tmp_path / "inst"
    main(["synth", "--out-dir", str(out), "--mode", "spcr", "--rho", "0.7", "--sigma", "0.001", "--seed", "3"])
    assert (out / "source.xyz").exists() and (out / "target.xyz").exists()
    rc = main(["register-spcr", str(out / "source.xyz"), str(out / "target.xyz"), "--sigma", "0.001",
               "--tau-auto", "--out", str(out / "r.txt")])
    assert rc == 0
    truth, res = read_result(out / "truth.txt"), read_result(out / "r.txt")
    assert np.linalg.norm(truth["translation"] - res["translation"]) <= 0.05


def test_identity_clouds_spcr(tmp_path):
    pts = np.random.default_rng(2).uniform(-1, 1, (80, 3))
    np.savetxt(tmp_path / "a.xyz", pts)
    rc = main(["register-spcr", str(tmp_path / "a.xyz"), str(tmp_path / "a.xyz"), "--delta", "1e-4",
               "--tau", "1e-4", "--out", str(tmp_path / "r.txt")])
    assert rc == 0
    res = read_result(tmp_path / "r.txt")
    assert np.allclose(res["rotation"], np.eye(3), atol=1e-9) and np.allclose(res["translation"], 0, atol=1e-9)


def test_bench(tmp_path, capsys):
    spec = tmp_path / "c.json"
    spec.write_text(json.dumps({"scenario": "sweep", "trials": 2, "grid": {"N": [300], "eta": [0.5, 0.7]}}))
    out = tmp_path / "o.csv"
    assert main(["bench", str(spec), "--out", str(out)]) == 0
    lines = out.read_text().splitlines()
    assert lines[0].startswith("scenario,seed,N,eta,sigma,rho,stage1_ms")
    assert len(lines) == 5
    empty = tmp_path / "e.json"
    empty.write_text("{}")
    assert main(["bench", str(empty), "--out", str(tmp_path / "e.csv")]) == 1
    assert not (tmp_path / "e.csv").exists()


def test_module_entry_point():
    import subprocess
    import sys

    proc = subprocess.run([sys.executable, "-m", "screwreg", "--help"], capture_output=True, text=True)
    assert proc.returncode == 0 and "register-spcr" in proc.stdout
