import json

import numpy as np
import pytest

from qglauber import export
from qglauber.cli import main
from qglauber.observables import TimeSeries


def test_verify_variants(capsys):
    for v in ("S0", "H2"):
        assert main(["verify", "--variant", v]) == 0
    out = capsys.readouterr().out
    assert out.count("RESULT             pass") == 2
    assert "|X14|^2+|X34|^2 - 1/2" in out


def test_verify_identity_fails(tmp_path, capsys):
    p = export.write_matrix_csv(tmp_path / "identity.csv", np.eye(4))
    assert main(["verify", "--x-file", str(p)]) == 1
    assert "extension dev.     5.000e-01  FAIL" in capsys.readouterr().out


def test_verify_malformed_file(tmp_path, capsys):
    p = tmp_path / "x.csv"
    p.write_text("1,0,0\n")
    assert main(["verify", "--x-file", str(p)]) == 2
    assert "shape" in capsys.readouterr().err
    assert main(["verify", "--x-file", str(tmp_path / "missing.csv")]) == 2


def test_verify_export(tmp_path):
    assert main(["verify", "--variant", "S0", "--export-dir", str(tmp_path)]) == 0
    k1 = export.read_matrix_csv(tmp_path / "K1.csv")
    assert k1.shape == (8, 8) and k1[0, 0] == 1


def test_usage_errors(tmp_path):
    assert main([]) == 2
    assert main(["evolve", "--mode", "exact", "--n", "14", "--out", str(tmp_path)]) == 2
    assert main(["evolve", "--mode", "traj", "--n", "6", "--out", str(tmp_path)]) == 2
    assert main(["evolve", "--n", "7", "--out", str(tmp_path)]) == 2
    assert main(["evolve", "--obs", "entropy", "--out", str(tmp_path)]) == 2
    assert main(["evolve", "--n", "10", "--dump-rho", "--out", str(tmp_path)]) == 2


def test_evolve_classical(tmp_path):
    assert main(["evolve", "--mode", "classical", "--n", "6", "--mcs", "4",
                 "--out", str(tmp_path)]) == 0
    ts = export.read_timeseries_csv(tmp_path / "coherence.csv")
    assert not ts.values.any()
    man = json.loads((tmp_path / "manifest.json").read_text())
    assert man["variant"] == "classical" and set(man["outputs"]) == {
        "coherence.csv", "purity.csv", "domains.csv", "peq.csv"}


def test_evolve_exact_dump(tmp_path):
    assert main(["evolve", "--variant", "H0", "--n", "4", "--mcs", "2", "--dump-rho",
                 "--obs", "peq", "--out", str(tmp_path)]) == 0
    rho = export.read_matrix_csv(tmp_path / "rho_t0002.csv", shape=(16, 16))
    assert np.trace(rho) == pytest.approx(1.0)


def test_env_default_output(tmp_path, monkeypatch):
    monkeypatch.setenv("QGLAUBER_OUT", str(tmp_path / "env"))
    assert main(["evolve", "--n", "4", "--mcs", "1", "--obs", "peq"]) == 0
    assert (tmp_path / "env" / "peq.csv").exists()


def test_evolve_traj_replay_is_byte_identical(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["evolve", "--mode", "traj", "--variant", "H0", "--n", "8", "--mcs", "3",
                 "--traj", "300", "--seed", "7", "--out", str(a)]) == 0
    assert main(["evolve", "--manifest", str(a / "manifest.json"), "--threads", "2",
                 "--out", str(b)]) == 0
    for name in ("coherence.csv", "purity.csv", "domains.csv", "peq.csv"):
        assert (a / name).read_bytes() == (b / name).read_bytes()
    ts = export.read_timeseries_csv(a / "coherence.csv")
    assert ts.stderr is not None and np.all(ts.stderr[1:] > 0)


def test_classify(tmp_path, capsys):
    assert main(["classify", "--n", "6", "--variant", "S0", "--variant", "classical",
                 "--out", str(tmp_path)]) == 0
    for v in ("S0", "classical"):
        assert (tmp_path / f"grid_{v}_t1.csv").exists()
        assert (tmp_path / f"grid_{v}_thalf.csv").exists()
    lines = (tmp_path / "grid_classical_t1.csv").read_text().splitlines()[1:]
    assert all(float(r.split(",")[3]) == 0 for r in lines if r.split(",")[0] != "0")


def test_classify_half_time_not_reached(tmp_path):
    with pytest.warns(UserWarning, match="did not reach"):
        assert main(["classify", "--n", "6", "--variant", "H0", "--max-mcs", "1",
                     "--out", str(tmp_path)]) == 0
    assert (tmp_path / "grid_H0_t1.csv").exists()
    assert not (tmp_path / "grid_H0_thalf.csv").exists()


def _write_bundle(tmp_path, sizes):
    t = np.linspace(0, 40, 81)
    paths = []
    for n in sizes:
        ts = TimeSeries(t, 0.01 * n ** 4.44 * np.exp(-2.5 * t / n), None,
                        {"variant": "S0", "n_sites": n, "mode": "traj"})
        paths.append(str(export.write_timeseries_csv(tmp_path / f"c{n}.csv", ts)))
    return paths


def test_fit_and_crossover(tmp_path):
    paths = _write_bundle(tmp_path, (12, 14, 16))
    out = tmp_path / "fit"
    assert main(["fit", *paths, "--regime", "short", "--window", "1", "5",
                 "--out", str(out)]) == 0
    rep = json.loads((out / "fit_short.json").read_text())
    assert rep["exponent"] == pytest.approx(4.44, abs=1e-6)
    assert set(rep["inputs"]) == set(paths)
    assert (out / "collapse_short.csv").read_text().startswith("n_sites,t_scaled")
    long = dict(rep, regime="long", exponent=2.0, rate=3.02)
    export.write_json(out / "fit_long.json", long)
    assert main(["crossover", "--short", str(out / "fit_short.json"), "--long",
                 str(out / "fit_long.json"), "--n", "20", "--out", str(out)]) == 0
    row = (out / "crossover.csv").read_text().splitlines()[1].split(",")
    assert float(row[1]) == pytest.approx(2.44 * 20 * np.log(20) / (2.5 - 3.02 / 20))


def test_fit_needs_three_sizes(tmp_path):
    paths = _write_bundle(tmp_path, (12, 14))
    assert main(["fit", *paths, "--window", "1", "5", "--out", str(tmp_path)]) == 2
