import math
import os

import numpy as np
import pytest
import tomlkit

from seqdpd.constellation import builtin_constellation, load_constellation
from seqdpd.errors import ConfigError
from seqdpd.harness import outputs
from seqdpd.harness.cli import main
from seqdpd.harness.config import (
    DEFAULT_OSNR_GRID,
    DEFAULT_SWING_GRID,
    ExperimentConfig,
    config_from_dict,
    dump_config,
    load_config,
)
from seqdpd.harness.outputs import SWEEP_COLUMNS, emit_outputs
from seqdpd.harness.sweeps import derive_seed, run_osnr_sweep, run_sw_convergence, run_swing_sweep

SMALL = {
    "seed": 3,
    "n_symbols": 2048,
    "waveform": {"rrc_span": 64},
    "predistortion": {"variants": ["linear", "lut3", "sw"], "sw_iterations": 3},
    "sweep": {"variable": "swing", "values": [0.3, 0.5]},
    "penalty": {"snr_db": [10.0, 16.0], "n_symbols": 4096},
    "output": {"plots": False},
}


def small(**overrides):
    data = {k: (dict(v) if isinstance(v, dict) else v) for k, v in SMALL.items()}
    for key, value in overrides.items():
        if isinstance(value, dict):
            data.setdefault(key, {}).update(value)
        else:
            data[key] = value
    return data


def write_config(path, data):
    path.write_text(tomlkit.dumps(data))
    return path


def test_defaults():
    cfg = ExperimentConfig().validate()
    assert cfg.n_symbols == 1 << 16
    assert cfg.sweep_values() == DEFAULT_SWING_GRID
    assert DEFAULT_SWING_GRID[0] == 0.2 and DEFAULT_SWING_GRID[-1] == 0.7
    assert DEFAULT_OSNR_GRID == tuple(float(v) for v in range(26, 41))
    assert cfg.tx_snr_db(0.4) == cfg.noise.tx_snr_ref_db
    assert cfg.tx_snr_db(0.8) == pytest.approx(cfg.noise.tx_snr_ref_db + 20 * math.log10(2))


@pytest.mark.parametrize(
    "data,field",
    [
        ({"transmitter": {"swing": -1.0}}, "transmitter.swing"),
        ({"transmitter": {"memory_fir": [0.5, 0.2]}}, "transmitter.memory_fir"),
        ({"predistortion": {"variants": ["lut4"]}}, "predistortion.variants[0]"),
        ({"predistortion": {"variants": ["magic"]}}, "predistortion.variants[0]"),
        ({"sweep": {"values": [0.5, 0.3]}}, "sweep.values"),
        ({"sweep": {"values": []}}, "sweep.values"),
        ({"sweep": {"variable": "power"}}, "sweep.variable"),
        ({"waveform": {"rrc_beta": 0.0}}, "waveform.rrc_beta"),
        ({"waveform": {"sps": "four"}}, "waveform.sps"),
        ({"noise": {"bogus": 1}}, "noise.bogus"),
        ({"constellation": {"source": "/nonexistent.txt"}}, "constellation.source"),
        ({"output": {"plot_format": "png"}}, "output.plot_format"),
    ],
)
def test_config_errors_name_field(data, field):
    with pytest.raises(ConfigError) as info:
        config_from_dict(data)
    assert info.value.path == field
    assert field in str(info.value)


def test_config_round_trip(tmp_path):
    cfg = config_from_dict(small())
    text = dump_config(cfg)
    back = load_config(write_config(tmp_path / "c.toml", tomlkit.parse(text).unwrap()))
    assert dump_config(back) == text
    assert "training_snr_db = inf" in text


def test_invalid_toml(tmp_path):
    path = tmp_path / "bad.toml"
    path.write_text("seed = = 1\n")
    with pytest.raises(ConfigError):
        load_config(path)


def test_derive_seed_stable():
    assert derive_seed(1, "eval") == derive_seed(1, "eval")
    assert derive_seed(1, "eval") != derive_seed(2, "eval")
    assert derive_seed(1, "train", 0, "sw") != derive_seed(1, "train", 1, "sw")


def test_swing_sweep_rows(tmp_path):
    cfg = config_from_dict(small())
    result = run_swing_sweep(cfg)
    assert len(result.rows) == 2 * 3
    for row in result.rows:
        assert 0 <= row.report.ngmi <= 1
    files = emit_outputs(result, tmp_path)
    lines = (tmp_path / "sweep.csv").read_text().splitlines()
    assert lines[0] == ",".join(SWEEP_COLUMNS)
    assert len(lines) - 1 == 6
    assert {p.name for p in files} >= {"sweep.csv", "fec.csv", "config.echo"}


def test_single_point_grid():
    cfg = config_from_dict(small(sweep={"values": [0.4]}))
    assert [r.predistorter for r in run_swing_sweep(cfg).rows] == ["linear", "lut3", "sw"]


def test_empty_variant_list_is_linear():
    cfg = config_from_dict(small(predistortion={"variants": []}, sweep={"variable": "snr", "values": [12.0, 20.0]}))
    result = run_osnr_sweep(cfg)
    assert [r.predistorter for r in result.rows] == ["linear", "linear"]


def test_osnr_sweep_high_osnr_ceiling():
    cfg = config_from_dict(small(sweep={"variable": "osnr", "values": [20.0, 200.0]}))
    result = run_osnr_sweep(cfg)
    by = {(r.predistorter, r.sweep_value): r.report.ngmi for r in result.rows}
    ceiling = config_from_dict(small(noise={"tx_snr_ref_db": 200.0}, sweep={"variable": "osnr", "values": [200.0]}))
    top = {r.predistorter: r.report.ngmi for r in run_osnr_sweep(ceiling).rows}
    for pd in ("linear", "lut3", "sw"):
        assert by[(pd, 200.0)] >= by[(pd, 20.0)]
    assert top["sw"] >= max(top.values()) - 1e-9


def test_parallel_matches_serial(tmp_path, monkeypatch):
    cfg = config_from_dict(small())
    serial = emit_outputs(run_swing_sweep(cfg), tmp_path / "a")
    monkeypatch.setenv("SEQDPD_WORKERS", "2")
    emit_outputs(run_swing_sweep(cfg), tmp_path / "b")
    assert (tmp_path / "a" / "sweep.csv").read_bytes() == (tmp_path / "b" / "sweep.csv").read_bytes()
    assert serial


def test_cli_rerun_byte_identical(tmp_path):
    cfg = write_config(tmp_path / "c.toml", small(output={"plots": True}))
    names = ("sweep.csv", "fec.csv", "config.echo", "ngmi_vs_swing.svg")
    assert main(["sweep-swing", str(cfg), "-o", str(tmp_path / "r")]) == 0
    first = {name: (tmp_path / "r" / name).read_bytes() for name in names}
    assert main(["sweep-swing", str(cfg), "-o", str(tmp_path / "r")]) == 0
    for name in names:
        assert (tmp_path / "r" / name).read_bytes() == first[name]


def test_cli_config_error(tmp_path, capsys):
    cfg = write_config(tmp_path / "c.toml", small(transmitter={"swing": 0.0}))
    assert main(["sweep-swing", str(cfg), "-o", str(tmp_path / "o")]) == 2
    assert "transmitter.swing" in capsys.readouterr().err
    assert main(["sweep-swing", str(tmp_path / "missing.toml")]) == 2


def test_cli_unwritable_dir(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("")
    cfg = write_config(tmp_path / "c.toml", small())
    assert main(["sweep-swing", str(cfg), "-o", str(blocker / "out")]) == 3
    assert not (blocker.parent / "out" / "sweep.csv").exists()


def test_atomic_write_leaves_nothing(tmp_path, monkeypatch):
    def boom(src, dst):
        raise OSError("disk full")

    monkeypatch.setattr(outputs.os, "replace", boom)
    with pytest.raises(OSError):
        outputs.write_atomic(tmp_path / "sweep.csv", "a,b\n")
    assert os.listdir(tmp_path) == []


def test_cli_other_commands(tmp_path, capsys):
    cfg = write_config(tmp_path / "c.toml", small())
    assert main(["sw-converge", str(cfg), "-o", str(tmp_path / "cv"), "--iterations", "2"]) == 0
    assert len((tmp_path / "cv" / "convergence.csv").read_text().splitlines()) == 4
    assert main(["penalty", str(cfg), "-o", str(tmp_path / "pen")]) == 0
    assert len((tmp_path / "pen" / "penalty.csv").read_text().splitlines()) == 3
    assert main(["train", str(cfg), "-o", str(tmp_path / "tr")]) == 0
    assert {p.name for p in (tmp_path / "tr").iterdir()} >= {"lut3.lut", "sw.bin", "sw.bin.meta"}
    cfg2 = write_config(tmp_path / "o.toml", small(sweep={"variable": "osnr", "values": [24.0, 30.0]}))
    assert main(["sweep-osnr", str(cfg2), "-o", str(tmp_path / "os")]) == 0
    assert "NGMI" in capsys.readouterr().out


def test_gen_const(tmp_path):
    path = tmp_path / "c128.txt"
    assert main(["gen-const", "cross-qam128", "-o", str(path)]) == 0
    c = load_constellation(path)
    ref = builtin_constellation("cross-qam128")
    assert c.labels == ref.labels
    assert np.max(np.abs(c.points - ref.points)) < 1e-12


def test_user_constellation_file(tmp_path):
    path = tmp_path / "q16.txt"
    main(["gen-const", "qam16", "-o", str(path)])
    cfg = config_from_dict(small(constellation={"source": str(path)}, sweep={"values": [0.4]}))
    assert len(run_swing_sweep(cfg).rows) == 3


def test_convergence_identity_model():
    cfg = config_from_dict(
        small(
            waveform={"rrc_beta": 1.0, "rrc_span": 256, "precomp": False},
            transmitter={"memory_fir": [1.0], "vsat": 1e9},
        )
    )
    # zero up to the pulse-shaping leakage of the finite filter
    result = run_sw_convergence(cfg, 2)
    assert result.rows[0].residual_rms < 1e-5


def test_convergence_noisy_training_plateaus():
    base = small(n_symbols=4096, waveform={"rrc_span": 128})
    clean = run_sw_convergence(config_from_dict(base), 10).residuals
    noisy_cfg = config_from_dict(small(n_symbols=4096, waveform={"rrc_span": 128}, noise={"training_snr_db": 30.0}))
    noisy = run_sw_convergence(noisy_cfg, 10).residuals
    floor = math.sqrt(10 ** (-30 / 10) / 2)
    assert np.all(np.diff(clean[1:]) <= 0)
    assert np.all(noisy[5:] > 10 * clean[5:])
    assert np.all((noisy[5:] > 0.5 * floor) & (noisy[5:] < 2 * floor))
