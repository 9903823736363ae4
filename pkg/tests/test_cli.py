import json

import pytest

from bulktree.cli import main


def run(argv) -> int:
    return main([str(a) for a in argv])


@pytest.fixture
def star_file(tmp_path):
    p = tmp_path / "star.json"
    assert run(["gen", "star", "--n", 6, "--demands", 4, "--out", p, "--seed", 9]) == 0
    return p


def test_gen_and_solve_and_eval(tmp_path, star_file):
    dist = tmp_path / "dist.json"
    rep = tmp_path / "rep.json"
    code = run(
        ["solve", star_file, "--out", dist, "--report", rep, "--seed", 3, "--bit-budget", 4]
    )
    assert code == 0
    payload = json.loads(dist.read_text())
    assert payload["schema"] == "bulktree/v1"
    assert payload["seed"] == 3 and "config_hash" in payload
    assert len(payload["trees"]) >= 1
    report = json.loads(rep.read_text())
    assert report["theta"] <= report["beta_final"] + 1e-7

    out = tmp_path / "eval.json"
    assert run(["eval", star_file, dist, "--out", out, "--exact", "--seed", 3]) == 0
    ev = json.loads(out.read_text())
    assert ev["exact_oblivious_ratio"] >= 1.0 - 1e-9
    assert all("ratio" in row for row in ev["levels"])


def test_solve_missing_file_exit_2(tmp_path, capsys):
    code = run(["solve", tmp_path / "nope.json", "--out", tmp_path / "d.json", "--seed", 1])
    assert code == 2
    err = capsys.readouterr().err
    assert json.loads(err.strip().splitlines()[-1])["error"]["type"] == "ParseError"


def test_solve_byte_identical_reruns(tmp_path, star_file):
    outs = []
    for name in ("d1.json", "d2.json"):
        p = tmp_path / name
        assert run(["solve", star_file, "--out", p, "--seed", 7, "--bit-budget", 4]) == 0
        outs.append(p.read_bytes())
    assert outs[0] == outs[1]


def test_eval_matches_module_calls(tmp_path, star_file):
    from bulktree.aggregation import TreeDistribution, distribution_cost, route_demands
    from bulktree.instance import load_instance

    inst = load_instance(star_file)
    tree_edges = list(inst.edges)
    hand = {
        "schema": "bulktree/v1",
        "theta": 1.0,
        "trees": [{"weight": 1.0, "edges": [[u, v] for u, v in tree_edges]}],
    }
    dpath = tmp_path / "hand.json"
    dpath.write_text(json.dumps(hand))
    out = tmp_path / "ev.json"
    assert run(["eval", star_file, dpath, "--out", out, "--seed", 5]) == 0
    ev = json.loads(out.read_text())
    tree = route_demands(inst, tree_edges)
    dist = TreeDistribution(support=((tree, 1.0),), theta=1.0)
    for row in ev["levels"]:
        assert row["expected_cost"] == pytest.approx(
            distribution_cost(dist, row["i"], inst.lengths)
        )


def test_eval_exact_over_cap_refused(tmp_path):
    big = tmp_path / "big.json"
    assert run(["gen", "grid", "--n", 12, "--demands", 3, "--out", big, "--seed", 1]) == 0
    dist = tmp_path / "d.json"
    assert run(["solve", big, "--out", dist, "--seed", 2, "--bit-budget", 2]) == 0
    code = run(["eval", big, dist, "--out", tmp_path / "e.json", "--exact", "--seed", 2])
    assert code == 2


def test_gmm_and_regularize_and_pipes(tmp_path, star_file, capsys):
    alpha = tmp_path / "alpha.json"
    alpha.write_text(json.dumps({"D": 4, "alpha": {"0": 1.0, "1": 1.0}}))
    reg = tmp_path / "reg.json"
    assert run(["regularize", alpha, "--out", reg]) == 0
    payload = json.loads(reg.read_text())
    assert payload["report"]["total_f_lower_factor"] == 7.5
    gout = tmp_path / "g.json"
    assert run(["gmm", star_file, alpha, "--out", gout, "--seed", 2]) == 0
    g = json.loads(gout.read_text())
    assert g["tree"]["edges"]
    assert run(["pipes", alpha]) == 0
    table = capsys.readouterr().out
    assert table.splitlines()[0].startswith("k\tsigma")


def test_gmm_deterministic(tmp_path, star_file):
    alpha = tmp_path / "alpha.json"
    alpha.write_text(json.dumps({"D": 4, "alpha": {"0": 1.0}}))
    outs = []
    for name in ("g1.json", "g2.json"):
        p = tmp_path / name
        assert run(["gmm", star_file, alpha, "--out", p, "--seed", 31]) == 0
        outs.append(p.read_bytes())
    assert outs[0] == outs[1]


def test_brute_outputs(tmp_path, star_file):
    out = tmp_path / "b.json"
    tsv = tmp_path / "b.tsv"
    assert run(["brute", star_file, "--out", out, "--tsv", tsv]) == 0
    payload = json.loads(out.read_text())
    assert payload["theta_opt"] >= 1.0 - 1e-9
    assert tsv.read_text().startswith("i\toptimum")


def test_bench_table_and_determinism(tmp_path):
    t1 = tmp_path / "b1.tsv"
    t2 = tmp_path / "b2.tsv"
    for t in (t1, t2):
        assert run(
            ["bench", "star", "--sizes", "5", "--seeds", "1,2", "--out", t, "--bit-budget", 4]
        ) == 0
    assert t1.read_bytes() == t2.read_bytes()
    lines = t1.read_text().strip().splitlines()
    assert len(lines) == 3  # header + 2 rows
    assert lines[0].split("\t") == ["instance", "theta", "theta_opt", "support", "total_demand"]


def test_bench_empty_seed_list(tmp_path):
    out = tmp_path / "b.tsv"
    assert run(["bench", "star", "--sizes", "5", "--seeds", "", "--out", out]) == 0
    assert out.read_text().strip().splitlines() == ["instance\ttheta\ttheta_opt\tsupport\ttotal_demand"]


def test_config_file_precedence(tmp_path, star_file):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"bit_budget": 4, "beta_steps": 2}))
    d = tmp_path / "d.json"
    rep = tmp_path / "r.json"
    assert run(
        ["solve", star_file, "--out", d, "--report", rep, "--seed", 1,
         "--config", cfg, "--beta-steps", 3]
    ) == 0
    report = json.loads(rep.read_text())
    # flag overrides file: 1 doubling run + 3 binary-search runs minimum
    assert len(report["runs"]) >= 4
