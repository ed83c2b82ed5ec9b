import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from kpo3 import tables
from kpo3.cli import main
from kpo3.config import build_config, load_config, parse_quantity
from kpo3.errors import ConfigError
from kpo3.runner import output_dir

CONFIGS = Path(__file__).resolve().parents[1] / "configs"

CHEVRON = """
[model]
kerr = "1.46 MHz"
delta_over_k = 1.0
pump_over_k = 0.05

[pump]
ramp_shape = "none"

[experiment]
kind = "chevron"
detuning_start = "-5 MHz"
detuning_stop = "-4 MHz"
detuning_points = 5
duration_stop = "5 us"
duration_points = 11

[numerics]
dim = 20
"""


def write(tmp_path, text, name="cfg.toml"):
    path = tmp_path / name
    path.write_text(text)
    return str(path)


def test_parse_quantity_units():
    assert parse_quantity("1.46 MHz", "frequency", "x") == pytest.approx(1.46e6)
    assert parse_quantity("0.4 us", "time", "x") == pytest.approx(4e-7)
    assert parse_quantity("0.4 µs", "time", "x") == pytest.approx(4e-7)
    assert parse_quantity("0.5 Phi0", "flux", "x") == pytest.approx(np.pi)
    assert parse_quantity("150 fF", "capacitance", "x") == pytest.approx(1.5e-13)
    assert parse_quantity(3, "time", "x") == 3.0
    assert parse_quantity("inf", "time", "x") == np.inf
    with pytest.raises(ConfigError, match=r"\[pump\].tau_ramp: unit 'MHz' not allowed"):
        parse_quantity("3 MHz", "time", "[pump].tau_ramp")
    with pytest.raises(ConfigError):
        parse_quantity(True, "time", "x")
    with pytest.raises(ConfigError):
        parse_quantity("fast", "time", "x")


@given(st.floats(-1e3, 1e3, allow_nan=False), st.sampled_from(["Hz", "kHz", "MHz", "GHz"]))
def test_frequency_strings_scale(x, unit):
    scale = {"Hz": 1, "kHz": 1e3, "MHz": 1e6, "GHz": 1e9}[unit]
    assert parse_quantity(f"{x!r} {unit}", "frequency", "f") == pytest.approx(x * scale)


def test_frequencies_become_angular(tmp_path):
    cfg = load_config(write(tmp_path, CHEVRON))
    assert cfg.model.kerr == pytest.approx(2 * np.pi * 1.46e6)
    assert cfg.model.delta == pytest.approx(cfg.model.kerr)
    assert cfg.options["detuning_start"] == pytest.approx(-5e6)


BROKEN = {
    "missing pump": (CHEVRON.replace('[pump]\nramp_shape = "none"\n', ""), r"missing \[pump\]"),
    "irrotational": ('[circuit]\npreset = "table_one"\nra = 0.3\nrb = 0.3\ndelta_over_k = 0.4\n'
                     '[experiment]\nkind = "spectrum"\n', "irrotational constraint"),
    "both models": (CHEVRON + '[circuit]\npreset = "table_one"\ndelta_over_k = 0.4\n', "exactly one"),
    "dim range": (CHEVRON.replace("dim = 20", "dim = 500"), r"\[8, 200\]"),
    "small dim": (CHEVRON.replace("dim = 20", "dim = 4"), "dim >= 6"),
    "unknown key": (CHEVRON.replace("[numerics]", "[numerics]\nspeed = 3"), "unknown keys"),
    "bad unit": (CHEVRON.replace('"5 us"', '"5 MHz"'), "duration_stop"),
    "syntax": (CHEVRON.replace("dim = 20", "dim = = 20"), "line"),
    "bad kind": (CHEVRON.replace('kind = "chevron"', 'kind = "magic"'), "kind"),
    "eta guard": (CHEVRON.replace("pump_over_k = 0.05", "pump_over_k = 0.05\neta = 0.7"), "eta"),
}


@pytest.mark.parametrize("name", sorted(BROKEN))
def test_validate_and_run_reject_alike(tmp_path, capsys, name):
    text, pattern = BROKEN[name]
    path = write(tmp_path, text)
    assert main(["validate", "--config", path]) == 2
    err = capsys.readouterr().err
    assert __import__("re").search(pattern, err), err
    assert main(["run", "--config", path, "--out", str(tmp_path / "out")]) == 2
    assert not (tmp_path / "out").exists() or not any((tmp_path / "out").iterdir())


def test_dim_override(tmp_path):
    path = write(tmp_path, CHEVRON)
    assert main(["validate", "--config", path, "--dim-override", "4"]) == 2
    assert load_config(path, dim_override=25).numerics.dim == 25


@pytest.mark.parametrize("name", ["table_one.toml", "chevron.toml", "circuit_table_one.toml"])
def test_shipped_configs_validate(name, capsys):
    assert main(["validate", "--config", str(CONFIGS / name)]) == 0
    assert "ok" in capsys.readouterr().out


def test_chevron_run_outputs_and_reproducibility(tmp_path, capsys):
    path = write(tmp_path, CHEVRON)
    out_root = tmp_path / "runs"
    assert main(["run", "--config", path, "--out", str(out_root), "--workers", "1"]) == 0
    assert main(["run", "--config", path, "--out", str(out_root), "--workers", "2"]) == 0
    first, second = out_root / "chevron", out_root / "chevron-1"
    for d in (first, second):
        assert {p.name for p in d.iterdir()} == {"grid.tsv", "meta.txt", "config.snapshot"}
    meta, axes, values = tables.parse_grid((first / "grid.tsv").read_text())
    assert float(meta["pump_over_k"]) == pytest.approx(0.05)
    assert values.shape == (5, 11) and np.all(values[:, 0] == 1.0)
    assert (first / "grid.tsv").read_text() == (second / "grid.tsv").read_text()
    assert "rtol" in (first / "meta.txt").read_text()
    # the snapshot is itself a valid config
    build_config(__import__("tomllib" if sys.version_info >= (3, 11) else "tomli")
                 .loads((first / "config.snapshot").read_text()))


def test_output_dir_suffixes(tmp_path):
    names = [output_dir(tmp_path, "run").name for _ in range(4)]
    assert names == ["run", "run-1", "run-2", "run-3"]


def test_env_output_root(tmp_path, monkeypatch):
    monkeypatch.setenv("KPO3_OUTPUT_ROOT", str(tmp_path / "envroot"))
    assert main(["spectrum", "--config", write(tmp_path, CHEVRON)]) == 0
    series = tmp_path / "envroot" / "spectrum" / "series.tsv"
    meta, cols = tables.parse_series(series.read_text())
    assert cols["delta_over_k"][0] == pytest.approx(1.0)


def test_circuit_run_records_derived(tmp_path):
    text = ('[circuit]\npreset = "table_one"\ndelta_over_k = 0.4\n'
            '[pump]\np_peak_over_k = 0.3\ntau_ramp = "1 us"\n'
            '[experiment]\nkind = "prepare"\n[numerics]\ndim = 30\n')
    assert main(["run", "--config", write(tmp_path, text), "--out", str(tmp_path / "o")]) == 0
    meta = (tmp_path / "o" / "prepare" / "meta.txt").read_text()
    line = next(l for l in meta.splitlines() if l.startswith("derived.eta:"))
    assert -5e-3 < float(line.split(":")[1]) < -5e-4
    rho = tables.parse_matrix((tmp_path / "o" / "prepare" / "state.mat.txt").read_text())
    assert np.trace(rho).real == pytest.approx(1.0)


def test_wigner_and_steady_subcommands(tmp_path):
    text = CHEVRON.replace("[numerics]", '[dissipation]\nt1 = "4.5 us"\nn_th = 0.04\n[numerics]')
    path = write(tmp_path, text)
    assert main(["steady", "--config", path, "--out", str(tmp_path)]) == 0
    _, cols = tables.parse_series((tmp_path / "steady" / "series.tsv").read_text())
    assert cols["residual"][0] < 1e-3
    assert main(["wigner", "--config", path, "--out", str(tmp_path)]) == 0
    _, axes, values = tables.parse_grid((tmp_path / "wigner" / "grid.tsv").read_text())
    assert values.shape == (61, 61)


def test_physics_guard_exit_code(tmp_path, capsys):
    text = ('[model]\nkerr = "1 MHz"\ndelta_over_k = 3.0\npump_over_k = 1.5\n'
            '[experiment]\nkind = "spectrum"\n[numerics]\ndim = 9\n')
    assert main(["run", "--config", write(tmp_path, text), "--out", str(tmp_path)]) == 4
    assert "physics guard" in capsys.readouterr().err
    assert "failed" in (tmp_path / "spectrum" / "meta.txt").read_text()


def test_numerics_exit_code(tmp_path, capsys, monkeypatch):
    # the integrator's step cap keeps even loose tolerances stable, so inject the failure
    from kpo3 import runner
    from kpo3.errors import IntegratorError

    def broken(cfg, out, workers):
        raise IntegratorError("norm drift 1e-3 exceeds 1e-8")

    monkeypatch.setitem(runner.RUNNERS, "spectrum", broken)
    assert main(["spectrum", "--config", write(tmp_path, CHEVRON), "--out", str(tmp_path)]) == 3
    assert "numerical failure" in capsys.readouterr().err
    assert "failed: norm drift" in (tmp_path / "spectrum" / "meta.txt").read_text()


def test_console_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "kpo3.cli", "validate", "--config",
                           str(CONFIGS / "chevron.toml")], capture_output=True, text=True)
    assert proc.returncode == 0 and "experiment=chevron" in proc.stdout
