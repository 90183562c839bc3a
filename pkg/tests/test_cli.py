import csv

import pytest

from gridsampler.cli import main


def run(*argv):
    return main([str(a) for a in argv])


@pytest.fixture(scope="module")
def workspace(tmp_path_factory):
    d = tmp_path_factory.mktemp("cli")
    assert run("make-grid", "--n-loads", 6, "--n-sgens", 3, "--seed", 2, "--out", d / "g.json") == 0
    assert run("make-data", "--grid", d / "g.json", "--steps", 1500, "--seed", 3,
               "--out", d / "d.csv") == 0
    return d


def test_pcm_is_deterministic(workspace):
    d = workspace
    assert run("pcm", "--data", d / "d.csv", "--out", d / "c1.csv") == 0
    assert run("pcm", "--data", d / "d.csv", "--out", d / "c2.csv",
               "--long-out", d / "long.csv") == 0
    assert (d / "c1.csv").read_bytes() == (d / "c2.csv").read_bytes()
    assert run("pcm", "--data", d / "d.csv", "--rows", 500, "--seed", 1, "--out", d / "r.csv") == 0
    assert (d / "r.csv").read_bytes() != (d / "c1.csv").read_bytes()


def test_full_pipeline(workspace, capsys):
    d = workspace
    assert run("powerflow", "--grid", d / "g.json", "--samples", d / "d.csv",
               "--out", d / "pq_original.csv") == 0
    cand, samples = [], []
    for strategy in ("uniform", "srs", "thayer", "copula", "correlation"):
        assert run("sample", "--strategy", strategy, "--grid", d / "g.json",
                   "--data", d / "d.csv", "--n", 800, "--seed", 5,
                   "--out", d / f"s_{strategy}.csv") == 0
        assert run("powerflow", "--grid", d / "g.json", "--samples", d / f"s_{strategy}.csv",
                   "--jobs", 2, "--out", d / f"pq_{strategy}.csv") == 0
        cand += ["--candidate", f"{strategy}={d / f'pq_{strategy}.csv'}"]
        samples += ["--samples", f"{strategy}={d / f's_{strategy}.csv'}"]
    assert run("coverage", "--reference", f"original={d / 'pq_original.csv'}", *cand, *samples,
               "--data", d / "d.csv", "--out", d / "cmp.csv", "--json", d / "cmp.json",
               "--emit-plot-data", d / "plot.csv") == 0
    with open(d / "cmp.csv") as fh:
        rows = list(csv.DictReader(fh))
    assert [r["strategy"] for r in rows] == ["original", "uniform", "srs", "thayer",
                                             "copula", "correlation"]
    assert float(rows[0]["containment"]) == 1.0 and float(rows[0]["pcm_fidelity"]) == 1.0
    for r in rows:
        assert 0 <= float(r["containment"]) <= 1 and 0 <= float(r["feasibility"]) <= 1
    assert "correlation" in capsys.readouterr().out
    header = (d / "plot.csv").read_text().splitlines()[0]
    assert header == "strategy,p_mw,q_mvar"


def test_correlation_without_data_exits_1(workspace, capsys):
    d = workspace
    code = run("sample", "--strategy", "correlation", "--grid", d / "g.json", "--n", 10,
               "--out", d / "x.csv")
    assert code == 1
    assert "requires --data" in capsys.readouterr().err


def test_usage_errors_exit_2(workspace):
    with pytest.raises(SystemExit) as info:
        run("pcm", "--data", workspace / "d.csv", "--out", workspace / "c.csv", "--bogus")
    assert info.value.code == 2
    with pytest.raises(SystemExit) as info:
        run("sample", "--strategy", "lhs", "--n", 3, "--out", "x")
    assert info.value.code == 2


def test_domain_error_exits_1(tmp_path, capsys):
    (tmp_path / "bad.csv").write_text("timestamp,a\n0,zz\n")
    assert run("pcm", "--data", tmp_path / "bad.csv", "--out", tmp_path / "c.csv") == 1
    assert "row 2, column 2" in capsys.readouterr().err


def test_byte_identical_reruns_and_env_seed(workspace, tmp_path, monkeypatch):
    d = workspace
    outs = []
    for k in range(2):
        out = tmp_path / f"c{k}.csv"
        assert run("sample", "--strategy", "correlation", "--data", d / "d.csv", "--n", 200,
                   "--seed", 9, "--out", out) == 0
        outs.append(out)
    assert outs[0].read_bytes() == outs[1].read_bytes()
    assert outs[0].with_suffix(".json").read_bytes() == outs[1].with_suffix(".json").read_bytes()

    monkeypatch.setenv("GRIDSAMPLER_SEED", "9")
    assert run("sample", "--strategy", "correlation", "--data", d / "d.csv", "--n", 200,
               "--out", tmp_path / "env.csv") == 0
    assert (tmp_path / "env.csv").read_bytes() == outs[0].read_bytes()
