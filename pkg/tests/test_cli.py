import json

import numpy as np
import pytest

from harmonikos import cli
from harmonikos.cli import ConfigError, RunConfig, from_complex, main
from harmonikos.ode import IntegrationError

SMALL = ["--nx", "1", "--harmonics-per-point", "4", "--check-samples", "2", "--fd-sites", "1",
         "--haar", "euler:3", "--box", "-0.5,0.5"]


def _run(tmp_path, name, *args):
    out = tmp_path / f"{name}.json"
    code = main([*args, "--out", str(out)])
    doc = json.loads(out.read_text()) if out.exists() else None
    return code, doc


def test_config_round_trip_and_validation():
    cfg = RunConfig(prepotential="T1*xm1*xm2", box=[-2, 2], nx=4)
    again = RunConfig.from_json(json.loads(json.dumps(cfg.to_json())))
    assert again == cfg.validate()
    for bad in ({"nx": 0}, {"box": [1, -1]}, {"ode_tol": 1.0}, {"suite": "everything"},
                {"tol_profile": "sloppy"}, {"bogus": 1}):
        with pytest.raises(ConfigError):
            RunConfig.from_json({**cfg.to_json(), **bad})


def test_zero_prepotential_gives_all_zero_report(tmp_path):
    code, doc = _run(tmp_path, "zero", "reconstruct", "--prepotential", "0", *SMALL)
    assert code == 0 and doc["status"] == "pass"
    for s in doc["samples"]:
        for key in ("App", "Aplus", "F_pm"):
            assert not from_complex(s[key]).any()
    assert doc["schema"] == "report_v1" and doc["timing_ms"] is None
    assert doc["config"]["prepotential"] == "0"
    assert (tmp_path / "zero.png").exists()


def test_oracle_and_reconstruct_agree(tmp_path):
    args = ["--algebra", "u1", "--prepotential", "0.7*T1*xm1*xm2", *SMALL]
    c1, rec = _run(tmp_path, "rec", "reconstruct", *args)
    c2, orc = _run(tmp_path, "orc", "oracle", "--algebra", "u1", "--coef", "0.7", *SMALL)
    assert c1 == 0 and c2 == 0
    assert len(rec["samples"]) == len(orc["samples"]) == 4
    for a, b in zip(rec["samples"], orc["samples"]):
        for key in ("x", "U", "g", "App", "Aplus", "F_pm"):
            assert np.abs(from_complex(a[key]) - from_complex(b[key])).max() < 1e-8, key


def test_verify_round_trip_and_corruption(tmp_path):
    code, rec = _run(tmp_path, "rec", "reconstruct", "--algebra", "u1",
                     "--prepotential", "0.7*T1*xm1*xm2", *SMALL)
    assert code == 0
    code, ver = _run(tmp_path, "ver", "verify", "--gauge-data", str(tmp_path / "rec.json"),
                     "--suite", "asd,leznov")
    assert code == 0 and ver["residuals"]["stored"]["App"]["pass"]
    rec["samples"][1]["F_pm"]["re"][0][1][0][0] += 1e-3
    (tmp_path / "bad.json").write_text(json.dumps(rec))
    code, ver = _run(tmp_path, "ver2", "verify", "--gauge-data", str(tmp_path / "bad.json"),
                     "--suite", "asd")
    assert code == 1 and ver["failing"] == ["stored.F_pm"]


def test_exit_codes(tmp_path, monkeypatch):
    assert main(["reconstruct", "--prepotential", "T1*xm1", "--algebra", "u1"]) == 2
    assert main(["reconstruct", "--prepotential", "T1*xm1*)", "--algebra", "u1"]) == 2
    assert main(["reconstruct", "--algebra", "u1"]) == 2
    assert main(["verify", "--gauge-data", str(tmp_path / "missing.json")]) == 2

    def boom(*a, **k):
        raise IntegrationError("step size underflow")

    monkeypatch.setattr(cli, "reconstruct", boom)
    assert main(["reconstruct", "--prepotential", "T1*xm1*xm2", "--algebra", "u1", *SMALL]) == 3


def test_config_file_with_flag_override(tmp_path):
    cfgp = tmp_path / "cfg.json"
    cfgp.write_text(json.dumps({"algebra": "u1", "prepotential": "0.7*T1*xm1*xm2", "nx": 1,
                                "harmonics_per_point": 2, "seed": 9, "suite": "asd"}))
    code, doc = _run(tmp_path, "c", "oracle", "--config", str(cfgp), "--seed", "3")
    assert code == 0 and doc["config"]["seed"] == 3 and doc["config"]["nx"] == 1


def test_compactness_command(tmp_path):
    fam = {"algebra": "u1", "prepotential": "0.7*T1*xm1*xm2", "scales": [2.0, 1.5, 1.25, 1.0]}
    code, doc = _run(tmp_path, "comp", "compactness", "--family", json.dumps(fam), "--limit", "-1",
                     "--nx", "1", "--haar", "euler:2", "--box", "-0.5,0.5")
    assert code == 0
    assert doc["result"]["rate_exponent"] == pytest.approx(-1.0, abs=1e-6)
    assert (tmp_path / "comp.png").exists()
    assert main(["compactness", "--family", json.dumps(fam), "--limit", "7"]) == 2


def test_norms_command(tmp_path):
    code, doc = _run(tmp_path, "norms", "norms", "--algebra", "u1", "--prepotential",
                     "0.7*T1*xm1*xm2", "--nx", "1", "--haar", "euler:3", "--box", "-0.3,0.3",
                     "--check-samples", "2")
    assert code == 0, doc["failing"]
    eg = doc["estimates"]["exp_gauge"]
    assert eg[0]["ratio"] == pytest.approx(eg[1]["ratio"], rel=1e-6)
    assert doc["estimates"]["prepotential_bound"][0]["ratio"] > 0
