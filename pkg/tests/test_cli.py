from __future__ import annotations

import json
import math
import os

import numpy as np
import pytest

from reslab import cli
from reslab.potential import load_config
from reslab.rootfind import Window
from reslab.secular import evaluate_dets

ROOT2 = math.sqrt(2.0)

TWO_POLE = {
    "h": 1e-4,
    "deltas": [
        {"x": -10.0, "C": 1.0, "beta": 1.0},
        {"x": 5 * ROOT2, "C": 1.0, "beta": 0.5},
    ],
}

THREE_POLE_CASE1 = {
    "h": 1e-6,
    "deltas": [
        {"x": -5.0, "C": 1.0, "beta": 1.0},
        {"x": 0.0, "C": 1.0, "beta": 1.0},
        {"x": 3 * ROOT2, "C": 1.0, "beta": 1.0},
    ],
}


def _read(path):
    with open(path, "rb") as f:
        return f.read()


def test_version(capsys):
    with pytest.raises(SystemExit) as exc:
        cli.main(["--version"])
    assert exc.value.code == 0
    assert "reslab" in capsys.readouterr().out


def test_predict_writes_payload_and_manifest(config_file, tmp_path, capsys):
    cfg_path = config_file(TWO_POLE)
    stem = str(tmp_path / "pred")
    assert cli.main(["predict", "--config", cfg_path, "--out", stem]) == 0
    out = capsys.readouterr().out
    assert "gamma candidates" in out

    payload = json.loads(_read(stem + ".json"))
    gammas = payload["gamma_candidates"]
    assert gammas == sorted(gammas)
    assert gammas[0] == pytest.approx(1.5 / (2 * (10 + 5 * ROOT2)), abs=1e-12)
    assert payload["closed_form"]["gammas"] == pytest.approx(gammas, abs=1e-9)

    manifest = json.loads(_read(stem + ".manifest.json"))
    assert stem + ".json" in manifest["outputs"]
    assert manifest["config_sha256"]
    assert manifest["version"]


def test_solve_outputs_and_determinism(config_file, tmp_path):
    cfg_path = config_file(TWO_POLE)
    stems = [str(tmp_path / name) for name in ("a", "b", "c")]
    argv = lambda stem, threads: [
        "solve", "--config", cfg_path, "--out", stem, "--threads", str(threads),
    ]
    assert cli.main(argv(stems[0], 1)) == 0
    assert cli.main(argv(stems[1], 1)) == 0
    assert cli.main(argv(stems[2], 4)) == 0

    csvs = [_read(s + ".csv") for s in stems]
    jsons = [_read(s + ".json") for s in stems]
    assert csvs[0] == csvs[1] == csvs[2]
    assert jsons[0] == jsons[1] == jsons[2]

    header = csvs[0].decode().splitlines()[0]
    assert header == "k_index,re,im,residual,gamma_est,cluster_id"
    rows = csvs[0].decode().strip().splitlines()[1:]
    payload = json.loads(jsons[0])
    assert len(rows) == len(payload["resonances"])
    # float cells round-trip through repr
    re_cell = rows[0].split(",")[1]
    assert repr(float(re_cell)) == re_cell

    cfg = load_config(cfg_path)
    w = payload["window"]
    assert w["re_min"] == pytest.approx(1 - 3 * cfg.h)
    assert w["re_max"] == pytest.approx(1 + 3 * cfg.h)
    assert w["im_min"] == pytest.approx(-3 * cfg.h)
    assert w["im_max"] == 0.0

    # manifests differ only in their timestamp
    m0 = json.loads(_read(stems[0] + ".manifest.json"))
    m1 = json.loads(_read(stems[1] + ".manifest.json"))
    for m in (m0, m1):
        m.pop("timestamp")
        m.pop("outputs")
        m.pop("command")
        m["options"].pop("out")
    assert m0 == m1


def test_solve_k_index_and_clusters(config_file, tmp_path):
    cfg_path = config_file(TWO_POLE)
    stem = str(tmp_path / "s")
    assert cli.main(["solve", "--config", cfg_path, "--out", stem]) == 0
    rows = _read(stem + ".csv").decode().strip().splitlines()[1:]
    ks = [int(r.split(",")[0]) for r in rows]
    assert ks == sorted(ks)
    assert all(b - a == 1 for a, b in zip(ks, ks[1:]))
    assert {r.split(",")[-1] for r in rows} == {"0"}


def test_solve_env_thread_fallback(config_file, tmp_path, monkeypatch):
    cfg_path = config_file(TWO_POLE)
    a, b = str(tmp_path / "x"), str(tmp_path / "y")
    assert cli.main(["solve", "--config", cfg_path, "--out", a, "--threads", "2"]) == 0
    monkeypatch.setenv("RESLAB_THREADS", "2")
    assert cli.main(["solve", "--config", cfg_path, "--out", b]) == 0
    assert _read(a + ".csv") == _read(b + ".csv")


def test_solve_uncertified_exit_code(config_file, tmp_path):
    cfg_path = config_file(TWO_POLE)
    stem = str(tmp_path / "u")
    code = cli.main(["solve", "--config", cfg_path, "--out", stem, "--max-depth", "0"])
    assert code == cli.EXIT_UNCERTIFIED
    payload = json.loads(_read(stem + ".json"))
    assert payload["uncertified"]


def test_phase_pgm_layout_and_center_value(config_file, tmp_path):
    cfg_path = config_file(TWO_POLE)
    stem = str(tmp_path / "ph")
    assert cli.main(["phase", "--config", cfg_path, "--out", stem, "--grid", "8x4"]) == 0
    data = _read(stem + ".pgm")
    assert data.startswith(b"P5\n8 4\n255\n")
    pixels = np.frombuffer(data[len(b"P5\n8 4\n255\n"):], dtype=np.uint8).reshape(4, 8)

    cfg = load_config(cfg_path)
    h = cfg.h
    win = Window(1 - 3 * h, 1 + 3 * h, -3 * h, 0.0)
    # pixel (row 1, col 2) center, counting the top row as im_max
    re = win.re_min + (2 + 0.5) * win.width / 8
    im = win.im_max - (1 + 0.5) * win.height / 4
    arg = evaluate_dets(cfg, np.array([re + 1j * im])).arg[0]
    want = int(np.clip(math.floor((arg + math.pi) / (2 * math.pi) * 256.0), 0, 255))
    assert pixels[1, 2] == want


def test_phase_csv_and_determinism(config_file, tmp_path):
    cfg_path = config_file(TWO_POLE)
    a, b = str(tmp_path / "p1"), str(tmp_path / "p2")
    for stem in (a, b):
        code = cli.main([
            "phase", "--config", cfg_path, "--out", stem,
            "--grid", "6x3", "--format", "csv",
        ])
        assert code == 0
    assert _read(a + ".csv") == _read(b + ".csv")
    lines = _read(a + ".csv").decode().strip().splitlines()
    assert len(lines) == 6 * 3 + 1


def test_phase_rejects_bad_grid_and_format(config_file, tmp_path):
    cfg_path = config_file(TWO_POLE)
    stem = str(tmp_path / "z")
    assert cli.main(["phase", "--config", cfg_path, "--out", stem, "--grid", "5000x2"]) == cli.EXIT_CONFIG
    assert cli.main(["phase", "--config", cfg_path, "--out", stem, "--grid", "4x2", "--format", "json"]) == cli.EXIT_CONFIG


def test_verify_passes_on_reference_config(config_file, tmp_path, capsys):
    cfg_path = config_file(TWO_POLE)
    stem = str(tmp_path / "v")
    assert cli.main(["verify", "--config", cfg_path, "--out", stem]) == 0
    out = capsys.readouterr().out
    assert "[PASS]" in out
    assert "[FAIL]" not in out
    report = json.loads(_read(stem + ".json"))
    assert all(c["pass"] for c in report["checks"])


def test_verify_prints_case1_disagreement_note(config_file, tmp_path, capsys):
    cfg_path = config_file(THREE_POLE_CASE1)
    stem = str(tmp_path / "v1")
    assert cli.main(["verify", "--config", cfg_path, "--out", stem]) == 0
    out = capsys.readouterr().out
    assert "-3.0e-07" in out
    assert "discrepancy" in out
    report = json.loads(_read(stem + ".json"))
    note = report["case1_note"]
    assert note["discrepancy"] is True
    assert note["reported_level"] == -3e-7


def test_verify_fails_when_uncertified(config_file, tmp_path, capsys):
    cfg_path = config_file(TWO_POLE)
    stem = str(tmp_path / "vf")
    code = cli.main(["verify", "--config", cfg_path, "--out", stem, "--max-depth", "0"])
    assert code == cli.EXIT_VERIFY_FAILED
    assert "[FAIL]" in capsys.readouterr().out


def test_error_exit_codes(config_file, tmp_path, capsys):
    bad_beta = dict(TWO_POLE, deltas=[dict(d) for d in TWO_POLE["deltas"]])
    bad_beta["deltas"][0]["beta"] = 0.0
    stem = str(tmp_path / "e")

    assert cli.main(["solve", "--config", config_file(bad_beta, "bad.json"), "--out", stem]) == cli.EXIT_CONFIG
    assert cli.main(["solve", "--config", str(tmp_path / "missing.json"), "--out", stem]) == cli.EXIT_CONFIG

    not_json = tmp_path / "broken.json"
    not_json.write_text("{", encoding="utf-8")
    assert cli.main(["solve", "--config", str(not_json), "--out", stem]) == cli.EXIT_CONFIG

    cfg_path = config_file(TWO_POLE)
    deep = ["solve", "--config", cfg_path, "--out", stem, "--window", "0.999", "1.001", "-0.5", "0"]
    assert cli.main(deep) == cli.EXIT_OVERFLOW

    upper = ["solve", "--config", cfg_path, "--out", stem, "--window", "0.999", "1.001", "-0.0001", "0.0001"]
    assert cli.main(upper) == cli.EXIT_CONFIG
    capsys.readouterr()


def test_outputs_are_atomic(config_file, tmp_path):
    # no partial files under the final names even on overwrite
    cfg_path = config_file(TWO_POLE)
    stem = str(tmp_path / "atomic")
    assert cli.main(["predict", "--config", cfg_path, "--out", stem]) == 0
    first = _read(stem + ".json")
    assert cli.main(["predict", "--config", cfg_path, "--out", stem]) == 0
    assert _read(stem + ".json") == first
    leftovers = [p for p in os.listdir(tmp_path) if p.startswith(".") or p.endswith(".tmp")]
    assert leftovers == []
