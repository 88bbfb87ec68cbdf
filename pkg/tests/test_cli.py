import json

import pytest

from shopdialog.cli import main
from tests.conftest import DATA


def base_flags():
    return [
        "--scenes", str(DATA / "scenes.json"),
        "--metadata", str(DATA / "metadata.json"),
        "--ontology", str(DATA / "ontology.json"),
    ]


def test_validate_ok(capsys):
    rc = main(["validate", *base_flags(),
               "--policy", str(DATA / "policy.json"),
               "--templates", str(DATA / "templates.json")])
    assert rc == 0
    assert capsys.readouterr().out.startswith("OK")


def test_validate_bad_file_exits_one(tmp_path, capsys):
    bad = tmp_path / "scenes.json"
    bad.write_text("{not json")
    rc = main(["validate", "--scenes", str(bad),
               "--metadata", str(DATA / "metadata.json"),
               "--ontology", str(DATA / "ontology.json")])
    assert rc == 1
    assert "error:" in capsys.readouterr().err


def test_usage_error_exits_two():
    with pytest.raises(SystemExit) as exc:
        main(["simulate", "--n", "5"])  # missing required flags
    assert exc.value.code == 2


def test_unknown_subcommand_exits_two():
    with pytest.raises(SystemExit) as exc:
        main(["frobnicate"])
    assert exc.value.code == 2


def simulate(tmp_path, name, n=30, seed=7, jobs=1):
    out = tmp_path / name
    rc = main(["simulate", *base_flags(),
               "--policy", str(DATA / "policy.json"),
               "--n", str(n), "--seed", str(seed), "--jobs", str(jobs),
               "--out", str(out)])
    assert rc == 0
    return out


def test_simulate_is_reproducible(tmp_path):
    a = simulate(tmp_path, "a.jsonl")
    b = simulate(tmp_path, "b.jsonl")
    assert a.read_bytes() == b.read_bytes()


def test_simulate_jobs_do_not_change_output(tmp_path):
    serial = simulate(tmp_path, "serial.jsonl", n=40, jobs=1)
    parallel = simulate(tmp_path, "parallel.jsonl", n=40, jobs=4)
    assert serial.read_bytes() == parallel.read_bytes()


def test_simulate_writes_manifest(tmp_path):
    out = simulate(tmp_path, "flows.jsonl")
    manifest = json.loads((tmp_path / "flows.jsonl.manifest.json").read_text())
    assert manifest["subcommand"] == "simulate"
    assert manifest["seed"] == 7
    assert str(out) in manifest["outputs"]
    assert "--seed" in manifest["argv"]


def test_manifest_replay_is_byte_identical(tmp_path):
    out = simulate(tmp_path, "flows.jsonl")
    first = out.read_bytes()
    manifest = json.loads((tmp_path / "flows.jsonl.manifest.json").read_text())
    assert main(manifest["argv"]) == 0
    assert out.read_bytes() == first


def test_pipeline_gold_eval_perfect(tmp_path, capsys):
    flows = simulate(tmp_path, "flows.jsonl")
    gold = tmp_path / "gold.jsonl"
    rc = main(["gold", *base_flags(), "--flows", str(flows),
               "--task", "spd", "--out", str(gold)])
    assert rc == 0
    report_path = tmp_path / "report.json"
    rc = main(["eval", "--task", "spd", "--pred", str(gold), "--gold", str(gold),
               "--out", str(report_path)])
    assert rc == 0
    report = json.loads(report_path.read_text())
    assert report["micro"]["f1"] == 1.0
    assert report["spd_mode"] == "cumulative"


def test_eval_task_mismatch(tmp_path):
    flows = simulate(tmp_path, "flows.jsonl")
    gold = tmp_path / "gold.jsonl"
    main(["gold", *base_flags(), "--flows", str(flows), "--task", "rru", "--out", str(gold)])
    rc = main(["eval", "--task", "spd", "--pred", str(gold), "--gold", str(gold)])
    assert rc == 1


def test_eval_prints_report_without_out(tmp_path, capsys):
    flows = simulate(tmp_path, "flows.jsonl")
    gold = tmp_path / "gold.jsonl"
    main(["gold", *base_flags(), "--flows", str(flows), "--task", "act", "--out", str(gold)])
    capsys.readouterr()
    rc = main(["eval", "--task", "act", "--pred", str(gold), "--gold", str(gold)])
    assert rc == 0
    report = json.loads(capsys.readouterr().out)
    assert report["micro"]["f1"] == 1.0


def test_realize_deterministic_and_manifested(tmp_path):
    flows = simulate(tmp_path, "flows.jsonl")
    a = tmp_path / "realized_a.jsonl"
    b = tmp_path / "realized_b.jsonl"
    for out, jobs in ((a, 1), (b, 3)):
        rc = main(["realize", *base_flags(),
                   "--templates", str(DATA / "templates.json"),
                   "--flows", str(flows), "--seed", "5", "--jobs", str(jobs),
                   "--out", str(out)])
        assert rc == 0
    assert a.read_bytes() == b.read_bytes()
    assert (tmp_path / "realized_a.jsonl.manifest.json").exists()


def test_split_sizes_and_determinism(tmp_path):
    flows = simulate(tmp_path, "flows.jsonl", n=100)
    for run in ("one", "two"):
        rc = main(["split", "--flows", str(flows), "--seed", "13",
                   "--out-dir", str(tmp_path / run)])
        assert rc == 0
    sizes = {
        name: len((tmp_path / "one" / f"{name}.jsonl").read_text().splitlines())
        for name in ("train", "dev", "dev_test", "test_std")
    }
    assert sizes == {"train": 65, "dev": 5, "dev_test": 15, "test_std": 15}
    for name in sizes:
        assert (tmp_path / "one" / f"{name}.jsonl").read_bytes() == (
            tmp_path / "two" / f"{name}.jsonl"
        ).read_bytes()


def test_stats_json_and_csv(tmp_path):
    flows = simulate(tmp_path, "flows.jsonl")
    out_json = tmp_path / "stats.json"
    rc = main(["stats", "--flows", str(flows), "--out", str(out_json)])
    assert rc == 0
    report = json.loads(out_json.read_text())
    assert report["n_dialogs"] == 30
    assert len(report["act_distribution_by_round"]) == 8
    out_csv = tmp_path / "stats.csv"
    rc = main(["stats", "--flows", str(flows), "--out", str(out_csv), "--format", "csv"])
    assert rc == 0
    lines = out_csv.read_text().splitlines()
    assert lines[0] == "section,round,act,value"
    assert any(line.startswith("act_distribution,1,ASK_PREFERENCE") for line in lines)


def test_eval_csv_report(tmp_path):
    flows = simulate(tmp_path, "flows.jsonl")
    gold = tmp_path / "gold.jsonl"
    main(["gold", *base_flags(), "--flows", str(flows), "--task", "rru", "--out", str(gold)])
    out = tmp_path / "report.csv"
    rc = main(["eval", "--task", "rru", "--pred", str(gold), "--gold", str(gold),
               "--out", str(out), "--format", "csv"])
    assert rc == 0
    lines = out.read_text().splitlines()
    assert lines[0] == "metric,value"
    assert any(line.startswith("micro.f1,1.0") for line in lines)


def test_inputs_never_mutated(tmp_path):
    scenes_bytes = (DATA / "scenes.json").read_bytes()
    ontology_bytes = (DATA / "ontology.json").read_bytes()
    simulate(tmp_path, "flows.jsonl")
    assert (DATA / "scenes.json").read_bytes() == scenes_bytes
    assert (DATA / "ontology.json").read_bytes() == ontology_bytes
