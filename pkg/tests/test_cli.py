"""Configuration parsing, CLI exit codes, artifacts, and reproducibility."""

import json

import pytest

from mild_girsanov.cli import main
from mild_girsanov.config import ConfigError, echo_config, parse_config
from mild_girsanov.experiments import EXPERIMENTS, MANIFESTS, run_experiment

FAST = """
operator.d = 4
grid.N = 64
mc.samples = 2000
density.samples = 8000
convergence.n_values = 8,16
convergence.n_ref = 64
convergence.samples = 2000
invariant.burn = 4.0
invariant.avg = 16.0
invariant.chains = 24
window.S = 8.0
window.N = 128
"""


def _cfg(extra="", **overrides):
    return parse_config(FAST + extra, {k: str(v) for k, v in overrides.items()})


def test_defaults_parse():
    cfg = parse_config("")
    assert cfg.spec.d == 8
    assert cfg.grid.N == 256
    assert cfg.samples == 20000
    assert cfg.window.S == 8.0  # 8 / omega with omega = 1


def test_unknown_key_rejected_with_line():
    with pytest.raises(ConfigError, match="line 2"):
        parse_config("# fine\nbogus.key = 1\n")


def test_bad_value_rejected():
    with pytest.raises(ConfigError, match="grid.N"):
        parse_config("grid.N = many\n")


def test_bad_experiment_rejected():
    with pytest.raises(ConfigError, match="unknown experiment"):
        parse_config("experiment = not-a-thing\n")


def test_upstream_constraints_revalidated():
    with pytest.raises(ConfigError):
        parse_config("drift.kind = linear\ndrift.c = 2.0\n")  # c >= omega
    with pytest.raises(ConfigError):
        parse_config("operator.beta = 1.5\n")
    with pytest.raises(ConfigError):
        parse_config("operator.family = explicit\n")


def test_explicit_eigenvalues():
    cfg = parse_config("operator.family = explicit\noperator.eigenvalues = 1.0, 4.0\n")
    assert cfg.spec.d == 2
    assert list(cfg.spec.eigenvalues) == [1.0, 4.0]


def test_echo_round_trips():
    cfg = _cfg()
    echoed = parse_config(echo_config(cfg))
    assert echoed.raw == cfg.raw


def test_cli_exit_codes(tmp_path):
    out = tmp_path / "run"
    cfgfile = tmp_path / "fast.cfg"
    cfgfile.write_text(FAST)
    assert main(["regularity", "--config", str(cfgfile), "--out", str(out), "--seed", "11"]) == 0
    assert (out / "report.json").exists()
    # config errors exit 2
    bad = tmp_path / "bad.cfg"
    bad.write_text("nope = 1\n")
    assert main(["regularity", "--config", str(bad), "--out", str(out)]) == 2
    # moment bounds refuse unbounded drift at config level
    lin = tmp_path / "lin.cfg"
    lin.write_text(FAST + "drift.kind = linear\n")
    assert main(["moment-bounds", "--config", str(lin), "--out", str(out)]) == 2


def test_cli_env_seed_override(tmp_path, monkeypatch):
    cfgfile = tmp_path / "fast.cfg"
    cfgfile.write_text(FAST)
    out1 = tmp_path / "a"
    out2 = tmp_path / "b"
    monkeypatch.setenv("MILD_GIRSANOV_SEED", "4242")
    assert main(["regularity", "--config", str(cfgfile), "--out", str(out1)]) == 0
    rep = json.loads((out1 / "report.json").read_text())
    assert rep["seed"] == 4242
    # the flag wins over the environment
    assert main(["regularity", "--config", str(cfgfile), "--out", str(out2), "--seed", "7"]) == 0
    rep2 = json.loads((out2 / "report.json").read_text())
    assert rep2["seed"] == 7


def test_report_schema_and_artifacts(tmp_path):
    cfg = _cfg(**{"output.directory": tmp_path / "vg"})
    rep = run_experiment("verify-girsanov", cfg)
    data = json.loads((tmp_path / "vg" / "report.json").read_text())
    assert data["schema"] == "mild-girsanov/1"
    assert data["experiment"] == "verify-girsanov"
    assert (tmp_path / "vg" / "checks.csv").exists()
    assert (tmp_path / "vg" / "estimates.csv").exists()
    assert (tmp_path / "vg" / "records.json").exists()
    records = json.loads((tmp_path / "vg" / "records.json").read_text())
    assert {"experiment", "params", "value", "std_error", "ess", "n", "seed", "wall_time_ms"} <= set(records[0])


@pytest.mark.parametrize("name", sorted(EXPERIMENTS))
def test_manifest_completeness(tmp_path, name):
    extra = ""
    if name == "colored":
        extra = "operator.epsilon = 0.5\n"
    if name == "moment-bounds":
        extra = "drift.kind = tanh\n"
    if name == "density-ratio":
        extra = "operator.family = explicit\noperator.eigenvalues = 1.0\ndrift.kind = linear\n"
    cfg = _cfg(extra, **{"output.directory": tmp_path / name})
    rep = run_experiment(name, cfg)
    assert [c.name for c in rep.checks] == MANIFESTS[name](cfg)


def test_config_echo_reproduces_bit_identical_results(tmp_path):
    cfg = _cfg(**{"output.directory": tmp_path / "one"})
    rep1 = run_experiment("verify-girsanov", cfg)
    echo = (tmp_path / "one" / "config-echo.txt").read_text()
    cfg2 = parse_config(echo, {"output.directory": str(tmp_path / "two")})
    rep2 = run_experiment("verify-girsanov", cfg2)
    vals1 = [(c.name, c.value, c.std_error) for c in rep1.checks]
    vals2 = [(c.name, c.value, c.std_error) for c in rep2.checks]
    assert vals1 == vals2


def test_worker_count_does_not_change_report(tmp_path):
    cfg1 = _cfg(**{"output.directory": tmp_path / "w1", "mc.workers": 1})
    cfg4 = _cfg(**{"output.directory": tmp_path / "w4", "mc.workers": 4})
    rep1 = run_experiment("verify-girsanov", cfg1)
    rep4 = run_experiment("verify-girsanov", cfg4)
    assert [(c.name, c.value) for c in rep1.checks] == [(c.name, c.value) for c in rep4.checks]


def test_dump_paths_csv(tmp_path):
    cfg = _cfg(**{"output.directory": tmp_path / "dp", "output.dump_paths": 2})
    run_experiment("verify-girsanov", cfg)
    dump = (tmp_path / "dp" / "paths.csv").read_text().splitlines()
    assert dump[0] == "sample_id,mode,node_index,time,h,dB"
    assert len(dump) == 1 + 2 * 4 * 65


def test_svg_emitted_when_requested(tmp_path):
    cfg = _cfg(
        "operator.family = explicit\noperator.eigenvalues = 1.0\ndrift.kind = linear\n",
        **{"output.directory": tmp_path / "svg", "output.formats": "csv,json,svg",
           "density.samples": 8000},
    )
    run_experiment("density-ratio", cfg)
    svg = (tmp_path / "svg" / "psi_profile.svg").read_text()
    assert svg.startswith("<svg") and "polyline" in svg
