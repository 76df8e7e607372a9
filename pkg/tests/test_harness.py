"""Scenario harness: configs, assertions, artifacts, CLI exit codes."""

import json
import math

import numpy as np
import pytest

from quasi1d import cli, harness, snapshots
from quasi1d.errors import ConfigError, InterfaceError


def write_ini(tmp_path, text, name="scenario.ini"):
    path = tmp_path / name
    path.write_text(text, encoding="utf-8")
    return str(path)


SCATTER_INI = """\
[scenario]
kind = scatter
name = cli-barrier

[scatter]
mu = 0.001
height = 10.0
"""

ADMISSIBILITY_INI = """\
[scenario]
kind = count
name = adm

[count]
n_particles = 2
xi = 0.1
samples = 1
dim = 8

[admissibility]
delta = 0.2
n_values = 8 9 10 11 12
eps_values = 0.00390625 0.001953125 0.0009765625 0.00048828125 0.000244140625
d = 0.85
beta_tilde = 0.88
"""


# ---------------------------------------------------------------------------
# admissibility


def test_admissible_sequence():
    pairs = [(n, 2.0 ** -n) for n in range(8, 13)]
    report = harness.validate_admissibility(pairs, 0.2)
    assert report.admissible and report.strictly_decreasing
    assert len(report.products) == 5
    assert all(b < a for a, b in zip(report.products, report.products[1:]))


def test_inadmissible_sequence_is_reported_not_raised():
    # N eps^delta = n^0.1 creeps upward: valid input, failing verdict
    pairs = [(n, n ** -3.0) for n in range(2, 8)]
    report = harness.validate_admissibility(pairs, 0.3)
    assert not report.admissible


def test_admissibility_guards():
    pairs = [(2, 0.5), (3, 0.25)]
    for delta in (0.0, 0.4, 0.5, -0.1):
        with pytest.raises(ConfigError):
            harness.validate_admissibility(pairs, delta)
    with pytest.raises(ConfigError):
        harness.validate_admissibility([], 0.2)
    with pytest.raises(ConfigError):
        harness.validate_admissibility([(3, 0.5), (2, 0.25)], 0.2)
    with pytest.raises(ConfigError):
        harness.validate_admissibility([(2, 0.25), (3, 0.25)], 0.2)


def test_admissibility_window():
    pairs = [(2, 0.5), (3, 0.25)]
    report = harness.validate_admissibility(pairs, 0.2, d=0.85, beta_tilde=0.88)
    assert report.window["ok"]
    assert report.window["upper"] == pytest.approx(2.0 / 2.2)
    report = harness.validate_admissibility(pairs, 0.2, d=0.8, beta_tilde=0.88)
    assert not report.window["ok"]
    report = harness.validate_admissibility(pairs, 0.2, d=0.85, beta_tilde=0.95)
    assert not report.window["ok"]
    assert harness.validate_admissibility(pairs, 0.2).window is None


# ---------------------------------------------------------------------------
# config loading


def test_missing_scenario_section(tmp_path):
    path = write_ini(tmp_path, "[scatter]\nmu = 0.001\n")
    with pytest.raises(ConfigError, match="scenario"):
        harness.load_config(path)


def test_unknown_kind(tmp_path):
    path = write_ini(tmp_path, "[scenario]\nkind = wizardry\n")
    with pytest.raises(ConfigError, match="wizardry"):
        harness.load_config(path)


def test_missing_config_file(tmp_path):
    with pytest.raises(ConfigError, match="cannot read"):
        harness.load_config(tmp_path / "nope.ini")


def test_mu_from_confinement_scale(tmp_path):
    path = write_ini(tmp_path, "[scenario]\nkind = scatter\n"
                               "[scatter]\nepsilon = 0.5\nn_particles = 2\n")
    cfg = harness.load_config(path)
    assert harness._resolve_mu(cfg.section("scatter")) == pytest.approx(0.125)
    bad = write_ini(tmp_path, "[scenario]\nkind = scatter\n"
                              "[scatter]\nmu = 0.1\nepsilon = 0.5\n"
                              "n_particles = 2\n", name="bad.ini")
    with pytest.raises(ConfigError, match="inconsistent"):
        harness.load_config(bad)


def test_parameter_windows(tmp_path):
    path = write_ini(tmp_path, "[scenario]\nkind = count\n"
                               "[count]\nn_particles = 2\nxi = 0.7\n")
    with pytest.raises(ConfigError, match=r"\(0, 1/2\)"):
        harness.load_config(path)
    path = write_ini(tmp_path, "[scenario]\nkind = scatter\n"
                               "[scatter]\nmu = 0.001\nbeta_tilde = 0.2\n",
                     name="beta.ini")
    with pytest.raises(ConfigError, match=r"\(1/3, 1\)"):
        harness.load_config(path)
    path = write_ini(tmp_path, "[scenario]\nkind = scatter\n"
                               "[scatter]\nmu_list = 0.001 0.0001\n",
                     name="sweep.ini")
    with pytest.raises(ConfigError, match="beta_tilde"):
        harness.load_config(path)


def test_override_grammar(tmp_path):
    path = write_ini(tmp_path, SCATTER_INI)
    with pytest.raises(ConfigError, match="section.key=value"):
        harness.load_config(path, ["oops"])
    with pytest.raises(ConfigError, match="section.key=value"):
        harness.load_config(path, ["height=12"])
    cfg = harness.load_config(path, ["scatter.height=12"])
    assert cfg.section("scatter").get_float("height") == 12.0


def test_config_hash_tracks_effective_values(tmp_path):
    path = write_ini(tmp_path, SCATTER_INI)
    base = harness.load_config(path).sha256
    assert harness.load_config(path).sha256 == base
    bumped = harness.load_config(path, ["scatter.height=12"]).sha256
    assert bumped != base
    assert harness.load_config(path, ["scatter.height=12"]).sha256 == bumped


def test_section_diagnostics_carry_file_and_line(tmp_path):
    path = write_ini(tmp_path, SCATTER_INI)
    cfg = harness.load_config(path)
    err = cfg.section("scatter").fail("height", "because")
    assert "scenario.ini:7" in str(err)
    assert "[scatter] height" in str(err)


# ---------------------------------------------------------------------------
# potentials and couplings through the mini-spec grammar


def test_transverse_potential_specs():
    cfg = harness.from_mapping("trap", {"trap": {"potential": "well:8,2"}})
    assert cfg.kind == "trap"
    with pytest.raises(ConfigError, match="depth,radius"):
        harness.from_mapping("trap", {"trap": {"potential": "well:8"}})
    with pytest.raises(ConfigError, match="unknown transverse"):
        harness.from_mapping("trap", {"trap": {"potential": "weird"}})


def test_radial_potential_specs(tmp_path):
    with pytest.raises(ConfigError, match="unknown potential"):
        harness.from_mapping("scatter", {"scatter": {"mu": 0.001,
                                                     "potential": "spikes"}})
    table = tmp_path / "w.csv"
    table.write_text("0.0,10.0\n0.5,10.0\n1.0,0.0\n", encoding="utf-8")
    cfg = harness.from_mapping("scatter", {"scatter": {
        "mu": 0.001, "potential": f"file:{table}"}})
    assert cfg.kind == "scatter"
    bad = tmp_path / "bad.csv"
    bad.write_text("0.0,10.0,1.0\n0.5,10.0,1.0\n", encoding="utf-8")
    with pytest.raises(ConfigError, match="two CSV columns"):
        harness.from_mapping("scatter", {"scatter": {
            "mu": 0.001, "potential": f"file:{bad}"}})


def test_coupling_resolution(tmp_path):
    base = {"length": 16.0, "n": 32, "t_final": 0.01, "dt": 0.01}
    with pytest.raises(ConfigError, match="either b or"):
        harness.from_mapping("evolve1d", {"evolve1d": {**base, "b": 1.0,
                                                       "a": 0.5}})
    with pytest.raises(ConfigError, match="quartic required"):
        harness.from_mapping("evolve1d", {"evolve1d": {**base, "a": 0.5}})
    with pytest.raises(ConfigError, match="non-negative"):
        harness.from_mapping("evolve1d", {"evolve1d": {
            **base, "a": -0.5, "quartic": 0.2}})
    cfg = harness.from_mapping("evolve1d", {"evolve1d": {
        **base, "a": 0.5, "quartic": 1.0 / (2.0 * math.pi)}})
    result = harness.run_scenario(cfg, tmp_path)
    assert result.metrics["b"] == pytest.approx(2.0, rel=1e-12)


# ---------------------------------------------------------------------------
# assertions


def test_assertion_operators(tmp_path):
    cfg = harness.from_mapping("evolve1d", {
        "evolve1d": {"length": 16.0, "n": 32, "t_final": 0.01, "dt": 0.01,
                     "b": 0.0, "initial": "plane:1"},
        "assert": {"steps": "== 1", "b": "<= 0", "final_time": "> 0",
                   "norm_drift": "< 1e-12", "energy_drift": "!= 1",
                   "bogus": ">= 0"}})
    # the bogus key exercises the unknown-metric path
    result = harness.run_scenario(cfg, tmp_path)
    rows = {row["metric"]: row for row in result.assertions}
    assert not result.ok
    assert rows["bogus"]["passed"] is False
    assert rows["bogus"]["note"] == "unknown metric"
    for key in ("steps", "b", "final_time", "norm_drift", "energy_drift"):
        assert rows[key]["passed"], key
    assert "plane_phase_err" in result.metrics


def test_assertion_approx_and_booleans(tmp_path):
    cfg = harness.from_mapping("evolve1d", {
        "evolve1d": {"length": 16.0, "n": 32, "t_final": 0.01, "dt": 0.01,
                     "b": 0.0, "initial": "plane:1"},
        "assert": {"plane_phase_err": "~ 0 1e-6", "steps": "== true"}})
    result = harness.run_scenario(cfg, tmp_path)
    assert result.ok


def test_assertion_grammar_errors():
    flat = {"length": 16.0, "n": 32, "t_final": 0.01, "dt": 0.01}
    with pytest.raises(ConfigError, match="assertion must read"):
        harness.from_mapping("evolve1d", {"evolve1d": flat,
                                          "assert": {"steps": "approx 1"}})
    with pytest.raises(ConfigError, match="not a number"):
        harness.from_mapping("evolve1d", {"evolve1d": flat,
                                          "assert": {"steps": "< one"}})
    with pytest.raises(ConfigError, match="non-negative"):
        harness.from_mapping("evolve1d", {"evolve1d": flat,
                                          "assert": {"steps": "~ 1 -0.1"}})


# ---------------------------------------------------------------------------
# runs: determinism and artifacts


def count_config(seed):
    return harness.from_mapping("count", {"count": {
        "n_particles": 2, "xi": 0.1, "samples": 5, "dim": 8,
        "length": 8.0}}, seed=seed)


def test_runs_are_byte_identical(tmp_path):
    first = harness.run_scenario(count_config(3), tmp_path / "one")
    second = harness.run_scenario(count_config(3), tmp_path / "two")
    assert first.summary_path.read_bytes() == second.summary_path.read_bytes()
    assert (first.out_dir / "samples.csv").read_bytes() == \
        (second.out_dir / "samples.csv").read_bytes()
    other_seed = harness.run_scenario(count_config(4), tmp_path / "three")
    assert (first.out_dir / "samples.csv").read_bytes() != \
        (other_seed.out_dir / "samples.csv").read_bytes()


def test_summary_layout_and_csv_units(tmp_path):
    cfg = harness.from_mapping("evolve1d", {"evolve1d": {
        "length": 16.0, "n": 32, "t_final": 0.02, "dt": 0.01, "b": 0.0,
        "convergence": "true"}})
    result = harness.run_scenario(cfg, tmp_path)
    summary = json.loads(result.summary_path.read_text(encoding="utf-8"))
    assert summary["scenario"] == "evolve1d"
    assert summary["artifacts"] == ["timeseries.csv"]
    repro = summary["reproducibility"]
    assert repro["config_sha256"] == cfg.sha256
    assert set(repro["versions"]) == {"quasi1d", "numpy", "python"}
    assert "halving_ratio" in summary["metrics"]
    header = (result.out_dir / "timeseries.csv").read_text().splitlines()[0]
    assert header == "t [time],norm [1],energy [energy]"


def test_admissibility_flows_into_metrics(tmp_path):
    path = write_ini(tmp_path, ADMISSIBILITY_INI)
    result = harness.run_scenario(harness.load_config(path), tmp_path)
    assert result.metrics["admissible"] == 1.0
    assert result.metrics["window_ok"] == 1.0
    summary = json.loads(result.summary_path.read_text(encoding="utf-8"))
    assert summary["admissibility"]["strictly_decreasing"]


def test_output_root_resolution(tmp_path, monkeypatch):
    assert harness.output_root("explicit") == harness.Path("explicit")
    monkeypatch.setenv("QUASI1D_OUTPUT_ROOT", str(tmp_path / "env_root"))
    assert harness.output_root() == tmp_path / "env_root"
    result = harness.run_scenario(count_config(0))
    assert result.summary_path.is_relative_to(tmp_path / "env_root")
    monkeypatch.delenv("QUASI1D_OUTPUT_ROOT")
    assert harness.output_root() == harness.Path("quasi1d_out")


# ---------------------------------------------------------------------------
# snapshots


def test_snapshot_roundtrip_1d(tmp_path):
    rng = np.random.default_rng(0)
    values = rng.standard_normal(16) + 1j * rng.standard_normal(16)
    path = tmp_path / "snap.bin"
    snapshots.write_snapshot(path, values, (0.125,), 0.75)
    snap = snapshots.read_snapshot(path)
    assert snap.dims == (16,)
    assert snap.spacings == (0.125,)
    assert snap.time == 0.75
    assert np.array_equal(snap.values, values)


def test_snapshot_roundtrip_3d(tmp_path):
    rng = np.random.default_rng(1)
    values = rng.standard_normal((4, 6, 6)) + 1j * rng.standard_normal((4, 6, 6))
    path = tmp_path / "snap3.bin"
    snapshots.write_snapshot(path, values, (0.1, 0.2, 0.2), 1.5)
    snap = snapshots.read_snapshot(path)
    assert snap.dims == (4, 6, 6)
    assert snap.spacings == (0.1, 0.2, 0.2)
    assert np.array_equal(snap.values, values)


def test_snapshot_error_paths(tmp_path):
    with pytest.raises(InterfaceError, match="one spacing per"):
        snapshots.write_snapshot(tmp_path / "x.bin", np.zeros((4, 4), complex),
                                 (0.1,), 0.0)
    bad_magic = tmp_path / "magic.bin"
    bad_magic.write_bytes(b"XXXX 1 4 0.5 0.0\n" + b"\0" * 64)
    with pytest.raises(InterfaceError, match="not a GPR1"):
        snapshots.read_snapshot(bad_magic)
    short_header = tmp_path / "tokens.bin"
    short_header.write_bytes(b"GPR1 1 4 0.5\n" + b"\0" * 64)
    with pytest.raises(InterfaceError, match="malformed"):
        snapshots.read_snapshot(short_header)
    truncated = tmp_path / "trunc.bin"
    truncated.write_bytes(b"GPR1 1 4 0.5 0.0\n" + b"\0" * 32)
    with pytest.raises(InterfaceError, match="truncated"):
        snapshots.read_snapshot(truncated)
    no_newline = tmp_path / "eof.bin"
    no_newline.write_bytes(b"GPR1 1 4 0.5 0.0")
    with pytest.raises(InterfaceError, match="before header newline"):
        snapshots.read_snapshot(no_newline)
    runaway = tmp_path / "runaway.bin"
    runaway.write_bytes(b"GPR1 " + b"9" * 5000)
    with pytest.raises(InterfaceError, match="too long"):
        snapshots.read_snapshot(runaway)


def test_snapshot_dataclass_guards():
    with pytest.raises(InterfaceError):
        snapshots.Snapshot((4,), (0.1, 0.2), 0.0, np.zeros(4, complex))
    with pytest.raises(InterfaceError):
        snapshots.Snapshot((4,), (0.1,), 0.0, np.zeros(5, complex))


# ---------------------------------------------------------------------------
# command line


def test_cli_flag_only_scatter(tmp_path, capsys):
    code = cli.main(["scatter", "--mu", "0.001", "--height", "10",
                     "--output", str(tmp_path), "--name", "flagrun"])
    assert code == 0
    out = capsys.readouterr().out
    assert "flagrun: PASS" in out
    summary = json.loads((tmp_path / "flagrun" / "summary.json")
                         .read_text(encoding="utf-8"))
    assert summary["metrics"]["a"] > 0.5


def test_cli_flag_only_needs_file_for_other_kinds(capsys):
    assert cli.main(["evolve1d"]) == 2
    assert "config file" in capsys.readouterr().err


def test_cli_config_run_and_assertion_failure(tmp_path, capsys):
    path = write_ini(tmp_path, SCATTER_INI)
    assert cli.main(["scatter", path, "--output", str(tmp_path)]) == 0
    capsys.readouterr()
    code = cli.main(["scatter", path, "--set", "assert.a=< 0",
                     "--output", str(tmp_path)])
    assert code == 1
    assert "FAIL" in capsys.readouterr().out


def test_cli_kind_mismatch(tmp_path, capsys):
    path = write_ini(tmp_path, SCATTER_INI)
    assert cli.main(["trap", path, "--output", str(tmp_path)]) == 2
    assert "does not match" in capsys.readouterr().err


def test_cli_bad_override(tmp_path, capsys):
    path = write_ini(tmp_path, SCATTER_INI)
    assert cli.main(["scatter", path, "--set", "oops",
                     "--output", str(tmp_path)]) == 2
    assert "config error" in capsys.readouterr().err


def test_cli_validate(tmp_path, capsys):
    path = write_ini(tmp_path, ADMISSIBILITY_INI)
    assert cli.main(["validate", path]) == 0
    out = capsys.readouterr().out
    assert "OK (kind = count" in out
    assert "-> admissible" in out
    assert "window" in out and "ok" in out
    bad = write_ini(tmp_path, ADMISSIBILITY_INI.replace("delta = 0.2",
                                                        "delta = 0.5"),
                    name="bad_delta.ini")
    assert cli.main(["validate", bad]) == 2


def test_cli_seed_flag(tmp_path):
    path = write_ini(tmp_path, SCATTER_INI)
    assert cli.main(["scatter", path, "--output", str(tmp_path / "s1"),
                     "--seed", "9"]) == 0
    summary = json.loads((tmp_path / "s1" / "cli-barrier" / "summary.json")
                         .read_text(encoding="utf-8"))
    assert summary["reproducibility"]["seed"] == 9
