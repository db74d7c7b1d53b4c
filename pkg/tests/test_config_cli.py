import json

import pytest

from nullcone import cli
from nullcone.config import ConfigError, build_initial, parse_config, serialize_config, validate
from nullcone.sphere import get_grid, read_snapshot

MINIMAL = '{"model":{"type":"minkowski"},"grid":{"bandlimit":16},"task":{"kind":"verify"}}'


def test_minimal_config_materializes_defaults():
    cfg = parse_config(MINIMAL)
    assert cfg["model"] == {"type": "minkowski", "mass": 0.0, "q_coeff": 0.0, "r_min": None}
    assert cfg["task"]["forms"] == ["gauss", "codazzi", "simon"]
    assert cfg["initial"]["sigma"] == 20.0 and cfg["initial"]["profile"] == "round"
    assert cfg["seed"] == 0


@pytest.mark.parametrize("text,path", [
    ('{"grid":{"bandlimit":-1},"task":{"kind":"verify"}}', "grid.bandlimit"),
    ('{"grid":{"bandlimit":16,"colour":1},"task":{"kind":"verify"}}', "grid.colour"),
    ('{"task":{"kind":"flow","cfl":2}}', "task.cfl"),
    ('{"task":{"kind":"dance"}}', "task.kind"),
    ('{"task":{}}', "task.kind"),
    ('{"task":{"kind":"verify","cfl":0.5}}', "task.cfl"),
    ('{"task":{"kind":"verify"},"initial":{"perturbations":[[40,0,1.0]]}}', "initial.perturbations[0]"),
    ('{"task":{"kind":"verify"},"initial":{"a":[0,0]}}', "initial.a"),
    ('{"task":{"kind":"verify"},"initial":{"a":[0,0,0.3]}}', "initial.profile"),
    ('{"task":{"kind":"verify","forms":["gauss","gauss"]}}', "task.forms"),
    ('{"task":{"kind":"foliate","sigma_min":30,"sigma_max":20}}', "task.sigma_max"),
    ('{"model":{"type":"schwarzschild","r_min":1.0},"task":{"kind":"verify"}}', "model"),
    ('{"task":{"kind":"verify"},"seed":1.5}', "seed"),
])
def test_errors_name_key_path(text, path):
    with pytest.raises(ConfigError) as info:
        parse_config(text)
    assert info.value.path == path
    assert str(info.value).startswith(path + ":")


def test_syntax_error():
    with pytest.raises(ConfigError, match="JSON syntax error at line 1"):
        parse_config("{nope")


def test_round_trip():
    cfg = parse_config('{"task":{"kind":"flow","max_steps":5},"initial":{"perturbations":[[2,0,0.5]],'
                       '"profile":"boosted","a":[0,0,0.2]},"seed":3}')
    assert parse_config(serialize_config(cfg)) == cfg
    assert validate(json.loads(serialize_config(cfg))) == cfg


def test_build_initial_boosted_and_random():
    g = get_grid(8)
    cfg = parse_config('{"task":{"kind":"flow"},"initial":{"profile":"boosted","rho":5,"a":[0,0,0.1],'
                       '"random":{"degree":3,"amplitude":0.01}},"seed":7}')
    w1 = build_initial(cfg, g)
    w2 = build_initial(cfg, g)
    assert (w1 == w2).all()
    assert abs(w1.mean() - 5.0) < 0.2


def run_cli(tmp_path, cfg: dict, command: str, name="out", extra=()):
    p = tmp_path / f"{name}.json"
    p.write_text(json.dumps(cfg))
    out = tmp_path / name
    return cli.main([command, "--config", str(p), "--out", str(out), *extra]), out


def test_verify_on_schwarzschild(tmp_path):
    cfg = {"model": {"type": "schwarzschild", "mass": 1.0}, "grid": {"bandlimit": 24},
           "initial": {"sigma": 20.0, "perturbations": [[2, 0, 0.5], [3, 1, 0.2]]}}
    status, out = run_cli(tmp_path, cfg, "verify")
    assert status == 0
    reports = sorted(p.name for p in out.glob("report_*.json"))
    assert reports == ["report_codazzi.json", "report_gauss.json", "report_simon.json"]
    rep = json.loads((out / "report_gauss.json").read_text())
    assert set(rep) == {"name", "max_residual", "scale", "relative", "bandlimit"}
    man = json.loads((out / "run.json").read_text())
    assert man["completed"] and man["status"] == 0 and man["failing_gates"] == []
    assert man["config"]["task"]["gate_rel"] == 1e-8


def test_flow_max_steps_exits_2(tmp_path):
    cfg = {"grid": {"bandlimit": 8}, "initial": {"perturbations": [[2, 0, 0.5]]},
           "task": {"max_steps": 10, "snapshot_every": 5, "record_every": 4}}
    status, out = run_cli(tmp_path, cfg, "flow")
    assert status == 2
    man = json.loads((out / "run.json").read_text())
    assert man["termination"] == "max_steps"
    assert (out / "field_t0002.sphere").exists() and (out / "field_final.sphere").exists()
    g, w = read_snapshot(out / "field_final.sphere")
    assert g.L == 8
    lines = (out / "series.csv").read_text().splitlines()
    assert lines[0].startswith("step,t,area") and len(lines) == 1 + 4


def test_solve_and_foliate(tmp_path):
    status, out = run_cli(tmp_path, {"grid": {"bandlimit": 12}, "initial": {"perturbations": [[2, 1, 0.3]]}},
                          "solve", name="solve")
    assert status == 0
    assert json.loads((out / "report_solve.json").read_text())["reason"] in ("tolerance", "roundoff_floor")
    status, out = run_cli(tmp_path, {"grid": {"bandlimit": 8},
                                     "task": {"sigma_min": 15, "sigma_max": 18}}, "foliate", name="fol")
    assert status == 0
    rows = (out / "series.csv").read_text().splitlines()
    assert rows[0] == "sigma,h2,rho,a_norm,gap_margin" and len(rows) == 5
    assert json.loads((out / "report_foliation.json").read_text())["bondi"][0] == pytest.approx(1.0)


def test_subcommand_mismatch_and_bad_file(tmp_path, capsys):
    status, _ = run_cli(tmp_path, {"task": {"kind": "flow"}}, "verify")
    assert status == 1
    assert "task.kind" in capsys.readouterr().err
    assert cli.main(["verify", "--config", str(tmp_path / "missing.json"), "--out", str(tmp_path / "x")]) == 1


def test_identical_runs_byte_identical(tmp_path):
    cfg = {"grid": {"bandlimit": 8}, "initial": {"random": {"degree": 4, "amplitude": 0.3}},
           "task": {"max_steps": 40, "record_every": 5}}
    _, a = run_cli(tmp_path, cfg, "flow", name="a", extra=("--seed", "11"))
    _, b = run_cli(tmp_path, cfg, "flow", name="b", extra=("--seed", "11"))
    _, c = run_cli(tmp_path, cfg, "flow", name="c", extra=("--seed", "12"))
    assert (a / "series.csv").read_bytes() == (b / "series.csv").read_bytes()
    assert (a / "series.csv").read_bytes() != (c / "series.csv").read_bytes()
    assert json.loads((a / "run.json").read_text())["config"]["seed"] == 11


def test_thread_count_does_not_change_outputs(tmp_path, monkeypatch):
    cfg = {"grid": {"bandlimit": 16}, "initial": {"perturbations": [[2, 0, 0.5]]}}
    outs = []
    for n in ("1", "4"):
        monkeypatch.setenv("NULLCONE_THREADS", n)
        _, out = run_cli(tmp_path, cfg, "verify", name=f"t{n}")
        outs.append(out)
    assert (outs[0] / "series.csv").read_bytes() == (outs[1] / "series.csv").read_bytes()
    for name in ("gauss", "codazzi", "simon"):
        f = f"report_{name}.json"
        assert (outs[0] / f).read_bytes() == (outs[1] / f).read_bytes()


def test_bad_thread_env(tmp_path, monkeypatch):
    monkeypatch.setenv("NULLCONE_THREADS", "zero")
    status, _ = run_cli(tmp_path, {}, "verify")
    assert status == 1


def test_crash_leaves_incomplete_manifest(tmp_path, monkeypatch):
    def boom(*args):
        raise RuntimeError("simulated crash")

    monkeypatch.setitem(cli.TASK_RUNNERS, "verify", boom)
    cfg = parse_config(MINIMAL)
    with pytest.raises(RuntimeError):
        cli.run(cfg, tmp_path / "crash")
    man = json.loads((tmp_path / "crash" / "run.json").read_text())
    assert man["completed"] is False


def test_shipped_configs_parse():
    from pathlib import Path
    paths = sorted((Path(__file__).parent.parent / "configs").glob("*.json"))
    assert paths
    for p in paths:
        cfg = parse_config(p.read_text())
        assert cfg["task"]["kind"] in p.stem or cfg["task"]["kind"] == "verify"
