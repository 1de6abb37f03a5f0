"""End-to-end command-line behavior at miniature scale."""

import json
import os

import pytest

from nliconquer.cli import main
from nliconquer.config import ENV_CONFIG


@pytest.fixture(autouse=True)
def _clean_env(monkeypatch):
    monkeypatch.delenv(ENV_CONFIG, raising=False)


def test_usage_errors_exit_2():
    for argv in ([], ["no-such-command"], ["gen-dataset"], ["train", "--dataset", "x"]):
        with pytest.raises(SystemExit) as exc:
            main(argv)
        assert exc.value.code == 2


def test_full_tiny_workflow(tmp_path, capsys):
    ds = str(tmp_path / "ds")
    store = str(tmp_path / "store.jsonl")
    model = str(tmp_path / "model.json")

    assert main([
        "gen-dataset", "--out", ds, "--links", "6", "--max-spans", "3",
        "--fill-lo", "0.1", "--fill-hi", "0.15", "--sparse-frac", "0.0",
        "--store", store,
    ]) == 0
    assert "dataset: 6 links" in capsys.readouterr().out
    for name in ("manifest.json", "train.csv", "val.csv", "test.csv",
                 "links.jsonl", "run_config.json"):
        assert os.path.exists(os.path.join(ds, name))
    assert os.path.exists(store)
    assert os.path.exists(store + ".meta.json")

    assert main([
        "train", "--dataset", ds, "--model-out", model,
        "--n-trees", "5", "--max-depth", "3", "--min-samples-leaf", "2",
    ]) == 0
    out = capsys.readouterr().out
    assert "model: " in out and "top features:" in out
    assert os.path.exists(model)
    assert os.path.exists(str(tmp_path / "model.run_config.json"))
    assert os.path.exists(str(tmp_path / "train_log.csv"))

    for estimator, extra in (("gn", []), ("ml", ["--model", model])):
        out_dir = str(tmp_path / f"eval_{estimator}")
        assert main([
            "eval", "--dataset", ds, "--estimator", estimator,
            "--split", "test", "--out", out_dir, "--store", store, *extra,
        ]) == 0
        assert f"eval[{estimator}/test]:" in capsys.readouterr().out
        for name in ("report.json", "cdf.csv", "errors.csv", "run_config.json"):
            assert os.path.exists(os.path.join(out_dir, name))


def test_eval_ml_without_model_exits_1(tmp_path, capsys):
    ds = str(tmp_path / "ds")
    assert main([
        "gen-dataset", "--out", ds, "--links", "2", "--max-spans", "2",
        "--fill-lo", "0.05", "--fill-hi", "0.08",
    ]) == 0
    capsys.readouterr()
    code = main(["eval", "--dataset", ds, "--estimator", "ml",
                 "--out", str(tmp_path / "e")])
    assert code == 1
    assert "error:" in capsys.readouterr().err


def test_missing_input_files_exit_1(tmp_path, capsys):
    ds = str(tmp_path / "ds")
    assert main([
        "gen-dataset", "--out", ds, "--links", "2", "--max-spans", "2",
        "--fill-lo", "0.05", "--fill-hi", "0.08",
    ]) == 0
    capsys.readouterr()
    # model path that does not exist
    code = main(["eval", "--dataset", ds, "--estimator", "ml",
                 "--model", str(tmp_path / "nope.json"),
                 "--out", str(tmp_path / "e")])
    assert code == 1
    assert "error:" in capsys.readouterr().err
    # dataset directory that does not exist
    code = main(["eval", "--dataset", str(tmp_path / "missing_ds"),
                 "--estimator", "gn", "--out", str(tmp_path / "e2")])
    assert code == 1
    assert "error:" in capsys.readouterr().err
    # topology path that does not exist
    code = main(["plan", "--years", "1", "--estimator", "gn",
                 "--topology", str(tmp_path / "nope_topo.json"),
                 "--out", str(tmp_path / "p.json")])
    assert code == 1
    assert "error:" in capsys.readouterr().err


def test_invalid_flag_values_exit_1(tmp_path, capsys):
    code = main([
        "gen-dataset", "--out", str(tmp_path / "ds"),
        "--links", "2", "--sparse-lo", "0.9",
    ])
    assert code == 1
    assert "sparse_lo" in capsys.readouterr().err


def test_bad_config_file_exits_1(tmp_path, capsys):
    code = main(["bench", "--channels", "4", "--repeats", "1",
                 "--config", str(tmp_path / "missing.toml")])
    assert code == 1
    assert "not found" in capsys.readouterr().err

    bad = tmp_path / "bad.toml"
    bad.write_text("[dataset]\nbogus_key = 3\n")
    code = main(["gen-dataset", "--out", str(tmp_path / "ds"),
                 "--config", str(bad)])
    assert code == 1
    assert "unknown config key" in capsys.readouterr().err


def test_config_precedence_env_file_flags(tmp_path, monkeypatch):
    body = (
        "[dataset]\nn_links = {n}\nfill_lo = 0.05\nfill_hi = 0.08\n"
        "sparse_frac = 0.0\nmax_spans = 2\n"
    )
    env_file = tmp_path / "env.toml"
    env_file.write_text(body.format(n=2))
    cli_file = tmp_path / "cli.toml"
    cli_file.write_text(body.format(n=3) + "\n[fiber]\nalpha_db_km = 0.21\n")
    monkeypatch.setenv(ENV_CONFIG, str(env_file))

    def n_links_of(out_dir: str, argv: list[str]) -> dict:
        assert main(["gen-dataset", "--out", out_dir, *argv]) == 0
        return json.load(open(os.path.join(out_dir, "manifest.json")))

    m1 = n_links_of(str(tmp_path / "d1"), [])
    assert m1["n_links"] == 2  # environment config applies
    assert m1["fiber"]["alpha_db_km"] == 0.2
    m2 = n_links_of(str(tmp_path / "d2"), ["--config", str(cli_file)])
    assert m2["n_links"] == 3  # --config beats the environment
    assert m2["fiber"]["alpha_db_km"] == 0.21
    m3 = n_links_of(str(tmp_path / "d3"), ["--config", str(cli_file), "--links", "4"])
    assert m3["n_links"] == 4  # individual flags beat the file


def test_optimize_spectrum_cli_deterministic(tmp_path, capsys):
    outs = []
    for name in ("a.json", "b.json"):
        out = str(tmp_path / name)
        assert main([
            "optimize-spectrum", "--estimator", "gn", "--spans", "2",
            "--fill", "0.05", "--seed", "9", "--out", out,
        ]) == 0
        assert "spectrum[gn]:" in capsys.readouterr().out
        outs.append(open(out, "rb").read())
        payload = json.loads(outs[-1])
        assert payload["estimator"] == "gn"
        assert len(payload["demands"]) >= 2
        assert os.path.exists(out.replace(".json", ".run_config.json"))
    assert outs[0] == outs[1]


def test_plan_cli_one_year(tmp_path, capsys):
    out = str(tmp_path / "plan.json")
    assert main(["plan", "--years", "1", "--estimator", "gn",
                 "--seed", "5", "--out", out]) == 0
    assert "plan[gn]:" in capsys.readouterr().out
    payload = json.load(open(out))
    assert payload["years"] == 1
    assert payload["total_lightpaths"] >= len(payload["traffic_gbps"])
    assert payload["oracle_check"]["violations"] == []
    assert payload["blocked"] == []
    assert os.path.exists(str(tmp_path / "plan.run_config.json"))


def test_bench_cli_small(tmp_path, capsys):
    out = str(tmp_path / "bench.json")
    assert main(["bench", "--channels", "6", "--repeats", "2",
                 "--compare-kernels", "--threads", "2", "--out", out]) == 0
    assert "bench ->" in capsys.readouterr().out
    payload = json.load(open(out))
    for key in ("backend", "n_channels", "closed_form_per_channel_s",
                "oracle_cold_per_channel_s", "oracle_warm_per_channel_s",
                "backends"):
        assert key in payload
    assert payload["n_channels"] == 6
    backends = payload["backends"]
    assert backends["numpy"]["available"]
    if backends["numba"]["available"]:
        assert "speedup_numba_over_numpy" in backends
