import json
import logging

import pytest

from hardcore.cli import main


def _manifest(out):
    return json.loads((out / "manifest.json").read_text())


def test_simulate_two_grains(tmp_path):
    out = tmp_path / "sim"
    code = main(["simulate", "--set", "process=binomial", "--set", "n=2", "--seed", "3", "--out", str(out)])
    assert code == 0
    res = json.loads((out / "result.json").read_text())
    assert res["schema"] == "hardcore.result/1" and res["engine"] == "builder"
    a, b = res["grains"]
    dist = sum((p - q) ** 2 for p, q in zip(a["x"], b["x"])) ** 0.5
    assert a["R"] == pytest.approx(dist / 2) and b["R"] == pytest.approx(dist / 2)
    assert (out / "grains.csv").read_text().splitlines()[0] == "id,x0,x1,t,R,status"
    m = _manifest(out)
    assert m["outputs"] == ["clusters.csv", "grains.csv", "result.json"] and m["seeds"]["seed"] == 3


def test_config_errors(tmp_path):
    assert main(["simulate", str(tmp_path / "nope.cfg"), "--out", str(tmp_path)]) == 2
    assert main(["simulate", "--set", "births=weird", "--out", str(tmp_path)]) == 2
    assert main(["simulate", "--set", "oops", "--out", str(tmp_path)]) == 2


def test_degenerate_input(tmp_path):
    cfg = {"dimension": 2, "window": [[0, 0], [5, 5]],
           "grains": [{"id": 0, "x": [1, 1], "t": 0, "shape": {"type": "ball", "radius": 1}},
                      {"id": 1, "x": [1, 1], "t": 0, "shape": {"type": "ball", "radius": 1}}]}
    f = tmp_path / "c.json"
    f.write_text(json.dumps(cfg))
    assert main(["simulate", "--input", str(f), "--out", str(tmp_path / "o")]) == 3


def test_tie_degenerate_input_warns(tmp_path, caplog):
    grains = [{"id": k, "x": p, "t": 0, "shape": {"type": "ball", "radius": 1}}
              for k, p in enumerate([[0, 0], [2, 0], [0, 2], [2, 2]])]
    f = tmp_path / "c.json"
    f.write_text(json.dumps({"dimension": 2, "window": [[-1, -1], [3, 3]], "grains": grains}))
    with caplog.at_level(logging.WARNING):
        assert main(["simulate", "--input", str(f), "--out", str(tmp_path / "o")]) == 0
    assert "tie" in caplog.text
    assert json.loads((tmp_path / "o" / "result.json").read_text())["status"] == "tie-degenerate"


def test_verify(tmp_path, caplog):
    assert main(["verify", "-M", "4", "--set", "window=0,6", "--out", str(tmp_path / "v")]) == 0
    rep = json.loads((tmp_path / "v" / "verify.json").read_text())
    assert rep["failed"] == [] and rep["invariants"]["oracle-equivalence"]["runs"] == 4
    assert main(["verify", "-M", "0", "--out", str(tmp_path / "v0")]) == 0
    with caplog.at_level(logging.ERROR):
        assert main(["verify", "-M", "2", "--set", "window=0,6", "--inject-fault",
                     "--out", str(tmp_path / "vf")]) == 1
    assert "hard-core" in caplog.text


def test_clt_regime_and_dry_run(tmp_path):
    assert main(["clt", "--set", "births=uniform", "--out", str(tmp_path / "c")]) == 4
    out = tmp_path / "d"
    assert main(["clt", "--dry-run", "--out", str(out)]) == 0
    assert sorted(p.name for p in out.iterdir()) == ["manifest.json"]
    assert _manifest(out)["run"]["n_list"] == [100.0, 400.0]


def test_compare_single_replicate(tmp_path):
    out = tmp_path / "cmp"
    assert main(["compare", "-M", "1", "--t-max", "10", "--set", "window=0,8", "--out", str(out)]) == 0
    lines = (out / "compare_long.csv").read_text().splitlines()
    assert lines[0] == "scenario,replicate,statistic,value"
    assert {ln.split(",")[0] for ln in lines[1:]} == {"A", "B"}


def test_replay_is_byte_identical(tmp_path):
    out = tmp_path / "run"
    assert main(["clt", "--n-list", "16,36", "-M", "12", "--seed", "5", "--out", str(out)]) == 0
    assert main(["replay", str(out / "manifest.json"), "--out", str(tmp_path / "again"), "--check"]) == 0
    for name in _manifest(out)["outputs"]:
        assert (out / name).read_bytes() == (tmp_path / "again" / name).read_bytes()


def test_replay_bad_manifest(tmp_path):
    f = tmp_path / "m.json"
    f.write_text("{}")
    assert main(["replay", str(f)]) == 2
