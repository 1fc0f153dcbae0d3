import csv
import json
import re

import numpy as np
import pytest

from episis import cli
from episis import coupling as cpl
from episis.graph import read_edge_list


def _run(args, capsys=None):
    code = cli.main(args)
    out = capsys.readouterr().out if capsys is not None else ""
    return code, out


def _rows(path):
    lines = path.read_text().splitlines()
    assert lines[0].startswith("# episis config_sha256=")
    return list(csv.DictReader(lines[1:]))


def _summary_value(text, key):
    return float(re.search(rf"{key}=([0-9.e+-]+)", text).group(1))


def test_generate_er_summary(tmp_path, capsys):
    code, out = _run(["generate", "--family", "er", "--n", "1000", "--p", "0.01", "--graph-seed", "7",
                      "--out", str(tmp_path)], capsys)
    assert code == 0
    assert 10.3 <= _summary_value(out, "lambda_max") <= 12.0
    g = read_edge_list(tmp_path / "contact.edges")
    assert g.num_edges == int(_summary_value(out, "edges"))


def test_generate_geometric_mean_degree(tmp_path, capsys):
    code, out = _run(["generate", "--family", "geometric", "--n", "1000", "--r", "0.0564",
                      "--no-lcc", "--out", str(tmp_path)], capsys)
    assert code == 0
    # expected degree (n - 1) * pi * r^2 = 9.99
    assert abs(_summary_value(out, "mean_degree") - 10.0) < 0.6


def test_generate_pa_edge_count(tmp_path, capsys):
    code, out = _run(["generate", "--family", "pa", "--n", "1000", "--m", "5", "--out", str(tmp_path)], capsys)
    assert code == 0
    assert _summary_value(out, "edges") == 4985 and _summary_value(out, "n") == 1000


def test_generate_writes_social_graph(tmp_path, capsys):
    code, _ = _run(["generate", "--family", "er", "--n", "100", "--p", "0.1", "--rewire-p", "0.5",
                    "--out", str(tmp_path)], capsys)
    assert code == 0
    c, s = read_edge_list(tmp_path / "contact.edges"), read_edge_list(tmp_path / "social.edges")
    assert c.n == s.n and c.num_edges == s.num_edges and c != s


def test_simulate_horizon_zero(tmp_path):
    code, _ = _run(["simulate", "--family", "er", "--n", "20", "--p", "0.3", "--horizon", "0",
                    "--init", "all", "--no-lcc", "--out", str(tmp_path)])
    assert code == 0
    rows = _rows(tmp_path / "path.csv")
    assert len(rows) == 1 and rows[0]["t"] == "0" and rows[0]["infected_count"] == "20"
    assert rows[0]["state_hex"] == "fffff"


def test_simulate_distancing_cheaper(tmp_path):
    means = {}
    for chain in ("benchmark", "distancing"):
        out = tmp_path / chain
        code, _ = _run(["simulate", "--family", "er", "--n", "50", "--p", "0.1", "--beta", "0.2",
                        "--delta", "0.2", "--alpha", "0.5", "--chain", chain, "--horizon", "50",
                        "--replicas", "1000", "--out", str(out)])
        assert code == 0
        means[chain] = np.mean([int(r["social_cost"]) for r in _rows(out / "summary.csv")])
    assert means["distancing"] <= means["benchmark"]


@pytest.mark.parametrize("args", [
    ["simulate", "--n", "30", "--p", "0.2", "--horizon", "30", "--replicas", "5", "--seed", "3"],
    ["fig3", "--n", "60", "--p", "0.1", "--points", "4", "--horizon", "20", "--seed", "3"],
    ["fig4", "--n", "60", "--p", "0.1", "--horizon", "10", "--replicas", "20", "--seed", "3"],
    ["couple", "--n", "30", "--p", "0.2", "--horizon", "30", "--replicas", "50", "--seed", "3",
     "--metrics", "absorption_time,social_cost:20", "--probes", "social_cost:20>30"],
    ["generate", "--family", "pa", "--n", "80", "--m", "3", "--rewire-p", "0.3", "--seed", "3"],
])
def test_reruns_are_byte_identical(tmp_path, args):
    out = tmp_path / "o"
    assert _run(args + ["--out", str(out)])[0] == 0
    first = {p.name: p.read_bytes() for p in sorted(out.iterdir())}
    assert first
    assert _run(args + ["--out", str(out)])[0] == 0
    second = {p.name: p.read_bytes() for p in sorted(out.iterdir())}
    assert first == second


def test_thread_count_does_not_change_output(tmp_path, monkeypatch):
    args = ["fig4", "--n", "60", "--p", "0.1", "--horizon", "10", "--replicas", "20", "--seed", "5"]
    blobs = []
    for threads in ("1", "4"):
        monkeypatch.setenv("EPISIS_THREADS", threads)
        out = tmp_path / "o"
        assert cli.main(args + ["--out", str(out)]) == 0
        blobs.append((out / "fig4.csv").read_bytes())
    assert blobs[0] == blobs[1]


def test_validation_errors_exit_1(tmp_path, capsys):
    base = ["--out", str(tmp_path)]
    assert cli.main(["simulate", "--beta", "1.5"] + base) == 1
    assert cli.main(["simulate", "--alpha", "-0.1"] + base) == 1
    assert cli.main(["generate", "--family", "geometric", "--r", "1.2"] + base) == 1
    assert cli.main(["couple", "--n", "10", "--metrics", "peak_time"] + base) == 1
    assert cli.main(["couple", "--n", "10", "--metrics", "endemic_fraction"] + base) == 1
    assert cli.main(["couple", "--n", "10", "--horizon", "20", "--metrics", "absorption_time"] + base) == 1
    assert cli.main(["simulate", "--n", "10", "--horizon", "-1"] + base) == 1
    bad = tmp_path / "bad.edges"
    bad.write_text("n 3\n0 0\n")
    assert cli.main(["simulate", "--graph", str(bad)] + base) == 1
    cfg = tmp_path / "bad.json"
    cfg.write_text("{not json")
    assert cli.main(["simulate", "--config", str(cfg)] + base) == 1
    assert "error:" in capsys.readouterr().err


def test_io_errors_exit_2(tmp_path):
    assert cli.main(["simulate", "--graph", str(tmp_path / "missing.edges"), "--out", str(tmp_path)]) == 2
    blocker = tmp_path / "file"
    blocker.write_text("x")
    assert cli.main(["generate", "--n", "20", "--p", "0.2", "--out", str(blocker / "sub")]) == 2


def test_verification_failure_exit_3(tmp_path, monkeypatch):
    def broken(graphs, params, **kw):
        return cpl.MarginalReport(1e-6, 0.0, 0.0, 1, (0, 0))

    monkeypatch.setattr(cpl, "verify_coupling_marginals_exact", broken)
    code = cli.main(["couple", "--family", "er", "--n", "4", "--p", "0.9", "--horizon", "5",
                     "--replicas", "4", "--metrics", "absorption_time", "--probes", "absorption_time>1",
                     "--out", str(tmp_path)])
    assert code == 3


def test_config_file_with_flag_override(tmp_path):
    cfg = {"graph": {"family": "er", "n": 40, "p": 0.2, "lcc": False},
           "params": {"beta": 0.3, "delta": 0.3, "alpha": 0.5},
           "simulate": {"horizon": 7, "init": "all"}}
    path = tmp_path / "run.json"
    path.write_text(json.dumps(cfg))
    out = tmp_path / "o"
    assert cli.main(["simulate", "--config", str(path), "--horizon", "3", "--out", str(out)]) == 0
    text = (out / "path.csv").read_text()
    header = json.loads(text.splitlines()[0].split("config=", 1)[1])
    assert header["simulate"]["horizon"] == 3 and header["graph"]["n"] == 40
    assert "fig3" not in header
    assert len(_rows(out / "path.csv")) == 4


def test_couple_on_triangle(tmp_path):
    out = tmp_path / "o"
    for beta, delta, alpha in [(0.1, 0.9, 0.0), (0.5, 0.5, 0.5), (0.9, 0.1, 1.0)]:
        code = cli.main(["couple", "--family", "er", "--n", "3", "--p", "0.99", "--graph-seed", "1",
                         "--beta", str(beta), "--delta", str(delta), "--alpha", str(alpha),
                         "--horizon", "60", "--replicas", "200", "--init", "all",
                         "--metrics", "absorption_time,social_cost:50", "--probes", "absorption_time>5",
                         "--out", str(out)])
        assert code == 0
        rep = json.loads((out / "couple.json").read_text())
        assert rep["n"] == 3
        assert rep["exact"]["max_deviation"] < 1e-12 and rep["exact"]["pairs_checked"] == 27
        assert rep["order_violations"] == 0
        assert all(g["tau_sum_agreement"] for g in rep["gaps"])
        rows = _rows(out / "coupled_runs.csv")
        assert all(r["order_ok"] == "true" for r in rows)


def test_couple_positive_gap_on_k5(tmp_path):
    out = tmp_path / "o"
    code = cli.main(["couple", "--family", "er", "--n", "5", "--p", "0.99", "--graph-seed", "2",
                     "--beta", "0.5", "--delta", "0.3", "--alpha", "0.5", "--horizon", "60",
                     "--replicas", "2000", "--metrics", "social_cost:50", "--out", str(out)])
    assert code == 0
    gap = json.loads((out / "couple.json").read_text())["gaps"][0]
    assert gap["tau_sum_agreement"] and gap["gap"] > 3 * gap["stderr"] > 0


def test_couple_empty_init_zero_gaps(tmp_path):
    out = tmp_path / "o"
    code = cli.main(["couple", "--n", "30", "--p", "0.2", "--horizon", "20", "--replicas", "10",
                     "--init", "none", "--metrics", "absorption_time,social_cost:20,epidemic_spread:20",
                     "--probes", "absorption_time>10",
                     "--out", str(out)])
    assert code == 0
    assert all(g["gap"] == 0 for g in json.loads((out / "couple.json").read_text())["gaps"])


def test_fig3_rows(tmp_path):
    out = tmp_path / "o"
    assert cli.main(["fig3", "--n", "100", "--p", "0.08", "--points", "6", "--horizon", "40",
                     "--alpha", "0.5", "--out", str(out)]) == 0
    rows = _rows(out / "fig3.csv")
    assert len(rows) == 12
    assert rows[0].keys() >= set(cli.FIG3_COLUMNS)
    psi = {r["delta_over_beta"]: float(r["norm1_over_n"]) for r in rows if r["map"] == "psi"}
    phi = {r["delta_over_beta"]: float(r["norm1_over_n"]) for r in rows if r["map"] == "phi"}
    assert all(phi[k] <= psi[k] for k in psi)


def test_fig4_starts_at_one(tmp_path):
    out = tmp_path / "o"
    assert cli.main(["fig4", "--n", "80", "--p", "0.08", "--horizon", "5", "--replicas", "10",
                     "--out", str(out)]) == 0
    rows = _rows(out / "fig4.csv")
    assert len(rows) == 4 * 6
    assert all(float(r["mean_spread"]) == 1.0 for r in rows if r["t"] == "0")
