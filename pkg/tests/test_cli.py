import csv
import json
import subprocess
import sys

import pytest

from netdml.cli import main


def run(argv, capsys):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


def simulate(tmp_path, capsys, name="sim", *extra):
    out = tmp_path / name
    code, _, _ = run(["simulate", "--out", out, *extra], capsys)
    assert code == 0
    return out


def test_simulate_is_byte_identical(tmp_path, capsys):
    a = simulate(tmp_path, capsys, "a", "--seed", 7)
    b = simulate(tmp_path, capsys, "b", "--seed", 7)
    for f in ("edges.txt", "nodes.csv", "dgp.json"):
        assert (a / f).read_bytes() == (b / f).read_bytes()
    c = simulate(tmp_path, capsys, "c", "--seed", 8)
    assert (a / "nodes.csv").read_bytes() != (c / "nodes.csv").read_bytes()


def test_simulate_header_and_defaults(tmp_path, capsys):
    out = simulate(tmp_path, capsys, "s", "--seed", 1)
    assert (out / "nodes.csv").read_text().splitlines()[0] == "id,x0,t,y"
    cfg = json.loads((out / "dgp.json").read_text())
    assert cfg["theta0"] == 10.0 and cfg["alpha0"] == 5.0


def test_simulate_config_file_and_flag_override(tmp_path, capsys):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"n_nodes": 120, "n_blocks": 10, "theta0": 2.0, "covariate_dim": 2}))
    out = tmp_path / "o"
    code, stdout, _ = run(["simulate", "--config", cfg, "--theta0", "3", "--out", out], capsys)
    assert code == 0
    assert json.loads(stdout)["n"] == 120
    assert json.loads((out / "dgp.json").read_text())["theta0"] == 3.0
    assert (out / "nodes.csv").read_text().startswith("id,x0,x1,t,y\n")


def test_estimate_oracle_noiseless(tmp_path, capsys):
    sim = simulate(tmp_path, capsys, "n", "--seed", 7, "--noise-sd", 0)
    code, out, _ = run(["estimate", sim / "edges.txt", sim / "nodes.csv", "--learner", "oracle",
                        "--dgp-config", sim / "dgp.json"], capsys)
    assert code == 0
    est = json.loads(out)
    assert abs(est["theta"] - 10.0) < 1e-8 and abs(est["alpha"] - 5.0) < 1e-8
    assert len(est["folds"]) == est["k"] == 3


def test_estimate_pa_writes_outputs(tmp_path, capsys):
    sim = simulate(tmp_path, capsys, "p", "--seed", 3)
    res = tmp_path / "est.json"
    focal = tmp_path / "focal.txt"
    remap = tmp_path / "remap.csv"
    code, _, _ = run(["estimate", sim / "edges.txt", sim / "nodes.csv", "--learner", "pa",
                      "--out", res, "--focal-out", focal, "--remap-out", remap], capsys)
    assert code == 0
    est = json.loads(res.read_text())
    assert est["n_f"] == len(focal.read_text().split())
    assert remap.read_text().splitlines()[:2] == ["label,id", "0,0"]
    code, _, _ = run(["estimate", sim / "edges.txt", sim / "nodes.csv", "--learner", "pa",
                      "--out", tmp_path / "again.json"], capsys)
    assert (tmp_path / "again.json").read_bytes() == res.read_bytes()


def test_estimate_edgeless_exits_2(tmp_path, capsys):
    empty = tmp_path / "empty.txt"
    empty.write_text("# no edges\n")
    sim = simulate(tmp_path, capsys, "e", "--graph", empty, "--n-nodes", 30, "--seed", 1)
    code, _, err = run(["estimate", sim / "edges.txt", sim / "nodes.csv", "--learner", "oracle",
                        "--dgp-config", sim / "dgp.json"], capsys)
    assert code == 2
    assert "peer effect unidentifiable" in err


def test_estimate_too_many_folds_exits_3(tmp_path, capsys):
    sim = simulate(tmp_path, capsys, "k", "--seed", 2, "--n-nodes", 40, "--n-blocks", 4)
    code, _, err = run(["estimate", sim / "edges.txt", sim / "nodes.csv", "--k-folds", 500,
                        "--learner", "pa"], capsys)
    assert code == 3
    assert "fold" in err


def test_estimate_malformed_csv_exits_3(tmp_path, capsys):
    sim = simulate(tmp_path, capsys, "m", "--seed", 2)
    bad = tmp_path / "bad.csv"
    bad.write_text("id,x0,t\n0,1,0\n")
    code, _, err = run(["estimate", sim / "edges.txt", bad], capsys)
    assert code == 3 and "header" in err


def test_estimate_unknown_edge_label_exits_3(tmp_path, capsys):
    sim = simulate(tmp_path, capsys, "u", "--seed", 2)
    edges = tmp_path / "edges.txt"
    edges.write_text("0 1\n0 99999\n")
    code, _, err = run(["estimate", edges, sim / "nodes.csv", "--learner", "pa"], capsys)
    assert code == 3 and "unknown node" in err


def test_oracle_without_config_exits_3(tmp_path, capsys):
    sim = simulate(tmp_path, capsys, "o", "--seed", 2)
    code, _, err = run(["estimate", sim / "edges.txt", sim / "nodes.csv", "--learner", "oracle"],
                       capsys)
    assert code == 3 and "--dgp-config" in err


def test_usage_error_exits_3(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["estimate"])
    assert exc.value.code == 3


def test_generate_graph(tmp_path, capsys):
    out = tmp_path / "g.txt"
    focal = tmp_path / "f.txt"
    code, stdout, _ = run(["generate-graph", "--n-nodes", 6, "--n-blocks", 2, "--p-intra", 1,
                           "--p-inter", 0, "--out", out, "--focal-out", focal], capsys)
    assert code == 0
    assert json.loads(stdout) == {"n": 6, "edges": 6, "n_f": 2}
    assert [line for line in out.read_text().splitlines() if not line.startswith("#")][0] == "0 1"


def test_density_study_oracle_noiseless_zero_mse(tmp_path, capsys):
    out = tmp_path / "d.csv"
    reps = tmp_path / "r.csv"
    code, _, _ = run(["density-study", "--n-nodes", 300, "--n-blocks", 20, "--p-inter", 0.001,
                      "--p-intra-grid", "0.05,0.2", "--replicates", 1, "--learner", "oracle",
                      "--noise-sd", 0, "--out", out, "--replicate-out", reps], capsys)
    assert code == 0
    rows = list(csv.DictReader(out.open()))
    assert list(rows[0]) == ["p_intra", "n_f", "edges", "mse_theta", "mse_alpha", "n_ok", "note"]
    assert len(rows) == 2
    for row in rows:
        assert float(row["mse_theta"]) < 1e-16 and float(row["mse_alpha"]) < 1e-16
    assert len(list(csv.DictReader(reps.open()))) == 2


def test_density_study_records_degenerate_cells(tmp_path, capsys):
    out = tmp_path / "d.csv"
    code, _, _ = run(["density-study", "--n-nodes", 60, "--n-blocks", 60, "--p-inter", 0,
                      "--p-intra-grid", "0.5", "--replicates", 2, "--learner", "oracle",
                      "--out", out], capsys)
    assert code == 0
    row = next(csv.DictReader(out.open()))
    assert row["n_ok"] == "0" and row["mse_theta"] == "nan"
    assert "unidentifiable" in row["note"]


def test_coverage_study_zero_noise_full_coverage(tmp_path, capsys):
    out = tmp_path / "c.csv"
    summary = tmp_path / "s.json"
    code, stdout, _ = run(["coverage-study", "--n-nodes", 300, "--n-blocks", 20, "--replicates",
                           5, "--learner", "oracle", "--noise-sd", 0, "--out", out,
                           "--summary-out", summary], capsys)
    assert code == 0
    res = json.loads(summary.read_text())
    assert res["coverage_theta"] == 1.0 and res["coverage_alpha"] == 1.0
    assert res["n_trials"] == 5
    rows = list(csv.DictReader(out.open()))
    assert float(rows[0]["ci_theta_hi"]) - float(rows[0]["ci_theta_lo"]) < 1e-8


def test_study_jobs_do_not_change_results(tmp_path, capsys):
    outs = []
    for jobs in (1, 2):
        out = tmp_path / f"c{jobs}.csv"
        run(["coverage-study", "--n-nodes", 300, "--n-blocks", 20, "--replicates", 4,
             "--learner", "oracle", "--jobs", jobs, "--out", out], capsys)
        outs.append(out.read_bytes())
    assert outs[0] == outs[1]


def test_module_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "netdml", "--help"], capture_output=True,
                          text=True)
    assert proc.returncode == 0
    assert "coverage-study" in proc.stdout
