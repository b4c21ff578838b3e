import json

import pytest

from confevade import campaign as cp
from confevade.cli import float_list, main
from confevade.data import load_configs, load_csv
from confevade.vm import VariabilityModel


@pytest.fixture
def files(tmp_path):
    class F:
        def __getattr__(self, name):
            return str(tmp_path / name.replace("_", "."))
    return F()


def run(*argv):
    return main([str(a) for a in argv])


def test_float_list():
    assert float_list("1e-4..1e1") == (1e-4, 1e-3, 1e-2, 1e-1, 1.0, 10.0)
    assert float_list("0.5,2") == (0.5, 2.0)


def test_model_gen_and_inspect(files, capsys):
    assert run("model", "gen", "--preset", "motiv-like", "--out", files.m_json, "--seed", 3) == 0
    assert VariabilityModel.load(files.m_json).n_features == 108
    assert run("model", "inspect", files.m_json) == 0
    out = capsys.readouterr().out
    assert "boolean 20, enumeration 46, real 42" in out
    assert "log10(size) ≈ 315.4" in out


def test_truncated_model_exits_2(files):
    run("model", "gen", "--out", files.m_json)
    with open(files.m_json) as fh:
        text = fh.read()
    with open(files.m_json, "w") as fh:
        fh.write(text[:150])
    assert run("model", "inspect", files.m_json) == 2


def test_missing_file_exits_2(files):
    assert run("model", "inspect", files.nothing_json) == 2


def test_bad_flag_exits_2(files):
    with pytest.raises(SystemExit) as err:
        run("sample", "--model", files.m_json)
    assert err.value.code == 2


def test_pipeline(files, capsys):
    assert run("model", "gen", "--out", files.m_json) == 0
    assert run("oracle", "--model", files.m_json, "--out", files.o_json, "--seed", 1) == 0
    assert run("sample", "--model", files.m_json, "--n", 900, "--out", files.raw_csv, "--seed", 2) == 0
    m = VariabilityModel.load(files.m_json)
    assert load_configs(m, files.raw_csv).shape == (900, 108)
    assert run("label", "--model", files.m_json, "--oracle", files.o_json, "--in", files.raw_csv,
               "--out", files.all_csv) == 0
    assert run("split", "--model", files.m_json, "--in", files.all_csv, "--train-n", 300,
               "--train-out", files.tr_csv, "--test-out", files.te_csv) == 0
    assert len(load_csv(m, files.tr_csv)) == 300 and len(load_csv(m, files.te_csv)) == 600
    assert run("balance", "--model", files.m_json, "--in", files.tr_csv, "--out", files.bal_csv) == 0
    counts = load_csv(m, files.bal_csv).class_counts()
    assert counts[1] == counts[-1]
    assert run("train", "--model", files.m_json, "--in", files.tr_csv, "--out", files.svm_json) == 0
    for cmd in ("attack", "baseline"):
        out = getattr(files, f"{cmd}_csv")
        assert run(cmd, "--model", files.m_json, "--svm", files.svm_json, "--in", files.tr_csv,
                   "--t", 1.0, "--attacks", 30, "--out", out) == 0
        with open(out) as fh:
            assert len(fh.read().splitlines()) == 31
    man = json.loads(open(files.svm_json + ".manifest.json").read())
    assert man["command"] == "train"
    assert set(man["inputs"]) == {files.m_json, files.tr_csv}
    assert run("rerun", files.svm_json + ".manifest.json") == 0


def test_dimension_mismatch_exits_3(files, tmp_path):
    run("model", "gen", "--out", files.m_json)
    run("oracle", "--model", files.m_json, "--out", files.o_json)
    doc = json.loads(open(files.m_json).read())
    doc["features"] = doc["features"][:-1]
    (tmp_path / "m2.json").write_text(json.dumps(doc))
    run("sample", "--model", files.m2_json, "--n", 5, "--out", files.s_csv)
    assert run("label", "--model", files.m2_json, "--oracle", files.o_json, "--in", files.s_csv,
               "--out", files.x_csv) == 3
    # a labeled file read against a model one feature short
    run("sample", "--model", files.m_json, "--oracle", files.o_json, "--n", 5, "--out", files.l_csv)
    assert run("split", "--model", files.m2_json, "--in", files.l_csv, "--train-n", 2) == 3


def test_unreadable_seed_env(files, monkeypatch):
    monkeypatch.setenv("CONFEVADE_SEED", "abc")
    assert run("model", "gen", "--out", files.m_json) == 2


RQ1_ARGS = ("--t-grid", "1e-6,1,1e6", "--disp", "20", "--reps", 2, "--attacks", 40, "--balanced", "no",
            "--n-samples", 1200, "--train-n", 300)


def test_rq1_bytes_stable_across_jobs(files):
    assert run("rq1", *RQ1_ARGS, "--seed", 5, "--out", files.a_json) == 0
    assert run("rq1", *RQ1_ARGS, "--seed", 5, "--jobs", 2, "--out", files.b_json) == 0
    a, b = open(files.a_json, "rb").read(), open(files.b_json, "rb").read()
    assert a == b
    rep = cp.CampaignReport.load(files.a_json)
    assert len(rep.records) == 3 * 2


def test_seed_from_environment(files, monkeypatch):
    monkeypatch.setenv("CONFEVADE_SEED", "5")
    assert run("rq1", *RQ1_ARGS, "--out", files.env_json) == 0
    monkeypatch.delenv("CONFEVADE_SEED")
    assert run("rq1", *RQ1_ARGS, "--seed", 5, "--out", files.flag_json) == 0
    assert open(files.env_json, "rb").read() == open(files.flag_json, "rb").read()
    man = json.loads(open(files.env_json + ".manifest.json").read())
    assert man["seed"] == 5 and man["argv"][-2:] == ["--seed", "5"]
    assert run("rerun", files.env_json + ".manifest.json") == 0


def test_rerun_detects_changed_input(files):
    run("model", "gen", "--out", files.m_json)
    run("sample", "--model", files.m_json, "--n", 5, "--out", files.s_csv)
    with open(files.m_json, "a") as fh:
        fh.write(" ")
    assert run("rerun", files.s_csv + ".manifest.json") == 3


def test_rerun_detects_changed_output(files):
    run("model", "gen", "--out", files.m_json)
    man_path = files.m_json + ".manifest.json"
    man = json.loads(open(man_path).read())
    man["outputs"][files.m_json] = "0" * 64
    with open(man_path, "w") as fh:
        json.dump(man, fh)
    assert run("rerun", man_path) == 4


def test_rq2_and_report(files, capsys):
    assert run("rq2", "--t-grid", "1e-2,1", "--n-adv", 5, "--reps", 2, "--n-samples", 1200,
               "--train-n", 300, "--jobs", 2, "--out", files.r2_json) == 0
    assert "baseline accuracy" in capsys.readouterr().out
    rep = cp.CampaignReport.load(files.r2_json)
    assert rep.kind == "rq2" and len(rep.records) == 4
    assert run("report", "--in", files.r2_json, "--out", files.sum_csv) == 0
    lines = open(files.sum_csv).read().splitlines()
    assert lines[0] == "t,nb_disp,balanced,stat,value"
    assert run("rerun", files.r2_json + ".manifest.json") == 0


def test_rq1_model_without_oracle_exits_3(files):
    run("model", "gen", "--out", files.m_json)
    assert run("rq1", "--model", files.m_json, "--out", files.x_json) == 3
