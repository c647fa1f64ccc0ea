import json
import os

import pytest

from noma_coc.cli import EXIT_BUDGET, EXIT_INFEASIBLE, EXIT_OK, main


def _path(tmp_path, name):
    return str(tmp_path / name)


def _generate(tmp_path, name="scenario.json", cells=2, users=4, failed=2, seed=0):
    path = _path(tmp_path, name)
    assert main([
        "generate", "--cells", str(cells), "--users", str(users),
        "--failed", str(failed), "--seed", str(seed), "--out", path,
    ]) == EXIT_OK
    return path


def test_version_and_usage_exit_codes(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["--version"])
    assert exc.value.code == 0
    with pytest.raises(SystemExit) as exc:
        main(["solve"])  # missing required --scenario
    assert exc.value.code == 2


def test_generate_and_solve_flow(tmp_path, capsys):
    scenario = _generate(tmp_path)
    out = _path(tmp_path, "solution.json")
    assert main(["solve", "--scenario", scenario, "--out", out]) == EXIT_OK
    doc = json.load(open(out))
    assert doc["config"]["mode"] == "isolated"
    assert doc["seed"] == 0
    assert doc["objective"] > 0.0
    assert doc["association"] and doc["p_connected"] and doc["p_failed"]


def test_solve_trace_and_optimal(tmp_path):
    scenario = _generate(tmp_path, seed=1)
    out = _path(tmp_path, "solution.json")
    trace = _path(tmp_path, "trace.jsonl")
    assert main(["solve", "--scenario", scenario, "--out", out, "--trace", trace]) == EXIT_OK
    records = [json.loads(line) for line in open(trace)]
    assert records and all("newton_iters" in r for r in records)

    opt_out = _path(tmp_path, "opt.json")
    assert main(["solve", "--scenario", scenario, "--optimal", "--out", opt_out]) == EXIT_OK
    opt = json.load(open(opt_out))
    plain = json.load(open(out))
    assert opt["enumerated"] == 12
    assert opt["objective"] >= plain["objective"] - 1e-9


def test_solve_infeasible_exit_code(tmp_path, capsys):
    scenario = _generate(tmp_path)
    doc = json.loads(open(scenario).read())
    doc["params"]["s_min"] = 60.0  # unservable QoS
    with open(scenario, "w") as fh:
        json.dump(doc, fh)
    code = main(["solve", "--scenario", scenario, "--out", _path(tmp_path, "x.json")])
    assert code == EXIT_INFEASIBLE
    cert = json.loads(capsys.readouterr().out.strip().splitlines()[-1])
    assert cert["infeasible"] is True and cert["binding"]


def test_solve_budget_exit_code(tmp_path, capsys):
    scenario = _generate(tmp_path, cells=3, failed=3, seed=2)
    code = main([
        "solve", "--scenario", scenario, "--optimal", "--budget-assoc", "5",
        "--out", _path(tmp_path, "x.json"),
    ])
    assert code == EXIT_BUDGET
    doc = json.loads(capsys.readouterr().out.strip().splitlines()[-1])
    assert doc["budget_exceeded"] is True and doc["completed"] == 5


def test_dataset_pipeline_and_shim(tmp_path):
    data = _path(tmp_path, "data.jsonl")
    # shorthand: `dataset --n ...` implies `dataset generate`
    assert main([
        "dataset", "--n", "10", "--cells", "2", "--users", "4", "--failed", "2",
        "--seed", "3", "--out", data,
    ]) == EXIT_OK
    assert sum(1 for _ in open(data)) == 10
    prefix = _path(tmp_path, "data")
    assert main(["dataset", "split", "--in", data, "--out-prefix", prefix]) == EXIT_OK
    counts = [sum(1 for _ in open(f"{prefix}.{part}.jsonl")) for part in ("train", "val", "test")]
    assert sum(counts) == 10 and counts[0] == 7
    aug = _path(tmp_path, "data.aug.jsonl")
    assert main([
        "dataset", "augment", "--in", f"{prefix}.train.jsonl", "--factor", "2", "--out", aug,
    ]) == EXIT_OK
    assert sum(1 for _ in open(aug)) == 14


def test_train_eval_bench_flow(tmp_path, monkeypatch):
    data = _path(tmp_path, "data.jsonl")
    prefix = _path(tmp_path, "data")
    main(["dataset", "--n", "12", "--cells", "2", "--users", "4", "--failed", "2", "--out", data])
    main(["dataset", "split", "--in", data, "--out-prefix", prefix])
    model = _path(tmp_path, "model.json")
    assert main([
        "train", "--dataset", f"{prefix}.train.jsonl", "--val", f"{prefix}.val.jsonl",
        "--epochs", "2", "--batch", "4", "--out", model,
    ]) == EXIT_OK
    curves = json.load(open(model + ".curves.json"))
    assert len(curves["curves"]["val_mse"]) == 2

    scenario = _generate(tmp_path, seed=4)
    report = _path(tmp_path, "report.json")
    assert main(["eval", "--scheme", "lc_noc", "--scenario", scenario, "--out", report]) == EXIT_OK
    doc = json.load(open(report))
    assert doc["mean_jain"] > 0.0 and len(doc["reports"]) == 1

    dnn_report = _path(tmp_path, "dnn_report.json")
    assert main([
        "eval", "--scheme", "lc_noc_dnn", "--scenario", scenario, "--model", model,
        "--out", dnn_report,
    ]) == EXIT_OK

    bench = _path(tmp_path, "bench.json")
    assert main([
        "bench", "--sweep", "failed=2", "--cells", "2", "--users", "4", "--reps", "1",
        "--out", bench,
    ]) == EXIT_OK
    rows = json.load(open(bench))["rows"]
    assert rows[0]["opt_enumerations"] == 12


def test_outdir_env_resolution(tmp_path, monkeypatch):
    monkeypatch.setenv("NOMA_COC_OUTDIR", str(tmp_path))
    assert main(["generate", "--cells", "2", "--failed", "2", "--out", "sc.json"]) == EXIT_OK
    assert os.path.exists(tmp_path / "sc.json")


def test_eval_interference_mode(tmp_path):
    scenario = _generate(tmp_path, seed=5)
    # disjoint subchannel map keeps the instance feasible at any cap
    subs = {f"{bs},{cl}": bs * 2 + cl for bs in (1, 2) for cl in (0, 1)}
    subs_path = _path(tmp_path, "subs.json")
    with open(subs_path, "w") as fh:
        json.dump(subs, fh)
    report = _path(tmp_path, "intf.json")
    assert main([
        "eval", "--scheme", "lc_noc", "--scenario", scenario, "--mode", "interference",
        "--i-max-dbm", "-60", "--subchannels", subs_path, "--out", report,
    ]) == EXIT_OK
    assert json.load(open(report))["config"]["mode"] == "interference"
