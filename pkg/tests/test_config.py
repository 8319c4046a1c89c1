import json
import math
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from qgap.config import RunConfig, build_noise, load_kraus_file, resolve_data_path
from qgap.errors import ConfigurationError
from qgap.noise import DepolarizingChannel

CONFIGS = Path(__file__).resolve().parent.parent / "configs"


def test_defaults_follow_headline_setup():
    cfg = RunConfig()
    assert (cfg.model.n_qubits, cfg.model.j_over_h) == (5, 0.4)
    assert (cfg.filter.kind, cfg.filter.eta_over_h) == ("lorentzian", 0.3)
    assert cfg.trotter.m_steps == 15
    assert cfg.sampling.shots == 1024
    assert (cfg.als.lambda_smooth, cfg.als.chi_asym) == (1.0, 1e-2)
    assert cfg.optimize.bounds == (0.0, math.pi / 2)
    assert cfg.optimize.max_iters == 30


def test_yaml_round_trip():
    cfg = RunConfig.from_dict({"sampling": {"shots": "exact"}, "noise": {"kind": "depolarizing", "p": 0.01}})
    again = RunConfig.from_yaml(cfg.to_yaml())
    assert again == cfg
    assert again.config_hash() == cfg.config_hash()
    assert again.sampling.shots is None


@settings(max_examples=25, deadline=None)
@given(n=st.integers(2, 9), j=st.floats(0.0, 0.9), m=st.integers(1, 80), seed=st.integers(0, 2 ** 31),
       shots=st.one_of(st.none(), st.integers(1, 10 ** 6)), kind=st.sampled_from(["lorentzian", "gaussian"]))
def test_round_trip_property(n, j, m, seed, shots, kind):
    cfg = RunConfig.from_dict({"model": {"n_qubits": n, "j_over_h": j}, "trotter": {"m_steps": m},
                               "sampling": {"shots": "exact" if shots is None else shots, "seed": seed},
                               "filter": {"kind": kind}})
    assert RunConfig.from_yaml(cfg.to_yaml()) == cfg


def test_hash_tracks_content():
    a = RunConfig()
    assert a.config_hash() == RunConfig().config_hash()
    assert a.config_hash() != a.replace(**{"sampling.seed": 1}).config_hash()
    assert len(a.config_hash()) == 12


@pytest.mark.parametrize("data", [
    {"model": {"n_qubits": 1}},
    {"model": {"spins": 3}},
    {"filter": {"kind": "boxcar"}},
    {"sampling": {"shots": 0}},
    {"sampling": {"shots": "many"}},
    {"noise": {"kind": "thermal"}},
    {"noise": {"kind": "depolarizing", "p": 2.0}},
    {"noise": {"kind": "calibration"}},
    {"noise": {"kind": "kraus"}},
    {"als": {"chi_asym": 0.7}},
    {"optimize": {"bounds": [1.0, 0.5]}},
    {"trotter": {"m_steps": 0}},
    {"extra": 1},
])
def test_invalid_configs(data):
    with pytest.raises(ConfigurationError):
        RunConfig.from_dict(data)


def test_invalid_yaml_and_missing_file(tmp_path):
    with pytest.raises(ConfigurationError):
        RunConfig.from_yaml("model: [unclosed")
    with pytest.raises(ConfigurationError):
        RunConfig.from_yaml("- a list")
    with pytest.raises(ConfigurationError, match="not found"):
        RunConfig.load(tmp_path / "nope.yaml")


@pytest.mark.parametrize("name", sorted(p.name for p in CONFIGS.glob("*.yaml")))
def test_shipped_configs_load(name):
    cfg = RunConfig.load(CONFIGS / name)
    build_noise(cfg.noise, cfg.model.n_qubits, CONFIGS)


def test_build_noise_kinds():
    assert build_noise(RunConfig().noise, 5) is None
    spam_only = RunConfig.from_dict({"noise": {"spam": [0.1, -0.05]}}).noise
    assert build_noise(spam_only, 5).spam == (0.1, -0.05)
    dep = build_noise(RunConfig.from_dict({"noise": {"kind": "depolarizing", "p": 0.01}}).noise, 5)
    assert isinstance(dep.channels[0][1], DepolarizingChannel)
    kraus = RunConfig.from_dict({"noise": {"kind": "kraus", "channels": [
        {"type": "amplitude_damping", "p": 0.01, "qubits": [0, 2], "layers": "zz"},
        {"type": "depolarizing", "p": 0.02, "layers": "all"}]}}).noise
    spec = build_noise(kraus, 3)
    assert len(spec.channels) == 3
    assert spec.channels[0][0] == ("zz",)


def test_custom_kraus_file(tmp_path):
    p = 0.2
    ops = [np.sqrt(1 - p) * np.eye(2), np.sqrt(p) * np.array([[0, 1], [1, 0]])]
    path = tmp_path / "flip.json"
    path.write_text(json.dumps({"ops": [[[[float(v.real), float(v.imag)] for v in row] for row in k] for k in ops]}))
    ch = load_kraus_file(path)
    assert len(ch.kraus_ops) == 2
    cfg = RunConfig.from_dict({"noise": {"kind": "kraus", "channels": [
        {"type": "custom", "file": "flip.json", "qubits": [1]}]}})
    assert build_noise(cfg.noise, 2, tmp_path).channels[0][1].qubits == (1,)
    path.write_text(json.dumps({"ops": [[[[0.5, 0.0], [0, 0]], [[0, 0], [0.5, 0]]]]}))
    with pytest.raises(ConfigurationError):
        load_kraus_file(path)


def test_calibration_noise_from_package_data():
    cfg = RunConfig.load(CONFIGS / "n9_calibration.yaml")
    spec = build_noise(cfg.noise, 9)
    assert len(spec.readout) == 9
    assert resolve_data_path("package:ibm_sherbrooke_table1.csv").is_file()
    with pytest.raises(ConfigurationError):
        build_noise(cfg.noise, 10)
    subset = cfg.replace(**{"noise.calibration.qubits": (115, 113)})
    assert build_noise(subset.noise, 2).readout[0] == (0.006, 0.0032)
    with pytest.raises(ConfigurationError):
        build_noise(cfg.replace(**{"noise.calibration.qubits": (1,)}).noise, 1)
