import json

import numpy as np
import pytest

from stochiso.cli import config_hash, main

SMALL = ["--grid", "31", "31", "--k", "8", "--p0-clamp", "0.05"]
SIM = ["--paths", "200", "--h", "1e-2", "--t-max", "2", "--window", "0.2,2", "--record-every", "2"]


def _write_model(path, drift, noise, domain, boundary="reflecting", params=None):
    path.write_text(json.dumps({"name": path.stem, "drift": drift, "noise": noise,
                                "parameters": params or {}, "domain": domain, "boundary": boundary}))
    return str(path)


def test_missing_output_directory_is_config_error(tmp_path, capsys):
    code = main(["spectrum", "--model", "spiral-sink", "--out", str(tmp_path / "nope")] + SMALL)
    assert code == 2
    assert "error [config]" in capsys.readouterr().err


def test_unknown_model_and_bad_override(tmp_path):
    assert main(["spectrum", "--model", "no-such-model", "--out", str(tmp_path)] + SMALL) == 2
    assert main(["spectrum", "--model", "spiral-sink", "--set", "nope=1", "--out", str(tmp_path)] + SMALL) == 2
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert main(["spectrum", "--model", str(bad), "--out", str(tmp_path)] + SMALL) == 2


def test_pure_diffusion_is_not_an_oscillator(tmp_path, capsys):
    m = _write_model(tmp_path / "heat.json", ["0", "0"], [["0.3", "0"], ["0", "0.3"]],
                     {"x": [0, 1], "y": [0, 1]})
    assert main(["spectrum", "--model", m, "--out", str(tmp_path)] + SMALL) == 4
    assert "error [classify]" in capsys.readouterr().err


def test_numerical_failure_exit_code(tmp_path, capsys):
    # fine at the domain centre, undefined at negative x
    m = _write_model(tmp_path / "root.json", ["-x", "-y"], [["sqrt(x)", "0"], ["0", "0.1"]],
                     {"x": [-1, 1], "y": [-1, 1]})
    assert main(["spectrum", "--model", m, "--out", str(tmp_path)] + SMALL) == 3


def test_pipeline_writes_everything(tmp_path):
    assert main(["pipeline", "--model", "spiral-sink", "--out", str(tmp_path)] + SMALL + SIM) == 0
    man = json.loads((tmp_path / "manifest.json").read_text())
    for name in man["files"]:
        assert (tmp_path / name).is_file(), name
    for name in ("spectrum.json", "roles.json", "psi.csv", "sigma.csv", "p0.csv", "effective_field.csv",
                 "decay_stats.csv", "fit.json", "decay_stats_q.csv", "fit_q.json", "sigma0_0.csv",
                 "isochron_0000.csv"):
        assert name in man["files"]
    assert man["config_sha256"] == config_hash(man["config"])
    assert set(man["versions"]) == {"python", "numpy", "scipy", "artifact"}
    fit = json.loads((tmp_path / "fit.json").read_text())
    assert set(fit) == {"rate", "stderr", "window", "lambda_ref", "rel_error"}
    roles = json.loads((tmp_path / "roles.json").read_text())
    assert roles


def test_rerun_is_bitwise_identical(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    a.mkdir()
    b.mkdir()
    args = ["pipeline", "--model", "spiral-sink"] + SMALL + SIM
    assert main(args + ["--out", str(a)]) == 0
    assert main(args + ["--out", str(b)]) == 0
    for f in sorted(a.glob("*.csv")):
        assert f.read_bytes() == (b / f.name).read_bytes(), f.name
    ma, mb = (json.loads((d / "manifest.json").read_text()) for d in (a, b))
    assert ma["config_sha256"] == mb["config_sha256"]


def test_manifest_hash_tracks_config(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    a.mkdir()
    b.mkdir()
    base = ["pipeline", "--model", "spiral-sink"] + SMALL + SIM
    assert main(base + ["--out", str(a), "--seed", "1"]) == 0
    assert main(base + ["--out", str(b), "--seed", "2"]) == 0
    ha, hb = (json.loads((d / "manifest.json").read_text())["config_sha256"] for d in (a, b))
    assert ha != hb
    cfg = {"x": 1, "y": [1, 2]}
    assert config_hash(cfg) == config_hash({"y": [1, 2], "x": 1})


def test_fields_level_skips_later_stages(tmp_path):
    assert main(["fields", "--model", "stuart-landau", "--out", str(tmp_path)] + SMALL) == 0
    assert (tmp_path / "psi.csv").is_file()
    assert not (tmp_path / "effective_field.csv").exists()
    assert not (tmp_path / "manifest.json").exists()
    header = (tmp_path / "isochron_0000.csv").read_text().splitlines()[0]
    assert header == "x,y,piece"


def test_reproduce_table_report(tmp_path, capsys):
    assert main(["reproduce-table", "--grid-n", "51", "--out", str(tmp_path)]) == 0
    out = capsys.readouterr().out
    for label in ("Sp. Sink", "SL-iso", "SL-ani", "Het-low", "Het-high"):
        assert label in out
    assert "coarser grids" in out
    table = json.loads((tmp_path / "table.json").read_text())
    assert table["complete"] and len(table["rows"]) == 5
    assert all(np.isfinite(r["computed"]["mu"]) for r in table["rows"])


def test_arnoldi_rerun_is_bitwise_identical(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    a.mkdir()
    b.mkdir()
    args = ["fields", "--model", "spiral-sink", "--grid", "61", "61", "--method", "arnoldi", "--p0-clamp", "1e-4"]
    assert main(args + ["--out", str(a)]) == 0
    assert main(args + ["--out", str(b)]) == 0
    for f in sorted(a.glob("*")):
        assert f.read_bytes() == (b / f.name).read_bytes(), f.name
