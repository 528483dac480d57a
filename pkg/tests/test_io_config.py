import numpy as np
import pytest

from sphereflow.config import ExperimentConfig, config_from_dict, load_config
from sphereflow.errors import UnsupportedDimension
from sphereflow.flow import FlowControls, evolve_rmcf
from sphereflow.geometry import RadialGraph
from sphereflow.harmonics import SpectralField
from sphereflow.io import load_graph, load_trajectory, read_manifest, save_graph, save_trajectory

import sys

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib


def small_traj(symmetry=None):
    u = SpectralField.harmonic(3, -2, 6, 0.02) + SpectralField.harmonic(0, 0, 6, 1e-3)
    return evolve_rmcf(RadialGraph.from_graph_function(u), 0.2, FlowControls(snapshot_every=0.1, symmetry=symmetry))


def test_archive_round_trip_is_bit_exact(tmp_path):
    traj = small_traj("tetrahedral")
    digest = save_trajectory(traj, tmp_path / "a", seeds=[7])
    back = load_trajectory(tmp_path / "a")
    assert np.array_equal(back.profiles, traj.profiles)
    assert np.array_equal(back.times, traj.times)
    assert back.clock == "rmcf" and back.meta["symmetry"] == "tetrahedral"
    assert np.array_equal(back.symmetry, traj.symmetry)
    man = read_manifest(tmp_path / "a")
    assert man["seeds"] == [7] and man["content_hash"] == digest
    # same data, same hash
    assert save_trajectory(back, tmp_path / "b", seeds=[7]) == digest


def test_tampered_archive_is_rejected(tmp_path):
    save_trajectory(small_traj(), tmp_path)
    snap = tmp_path / "snapshot_00001.csv"
    snap.write_text(snap.read_text().replace("0,0,", "0,0,1", 1))
    with pytest.raises(ValueError, match="hash"):
        load_trajectory(tmp_path)
    load_trajectory(tmp_path, verify=False)


def test_graph_file_round_trip(tmp_path):
    G = RadialGraph.sphere(1.5, band_limit=6, center=(0.1, 0, 0))
    save_graph(G, str(tmp_path / "g.csv"), "test sphere")
    H = load_graph(str(tmp_path / "g.csv"))
    assert np.array_equal(H.profile.coeffs, G.profile.coeffs)
    assert np.array_equal(H.center, G.center)


def test_config_toml_round_trip():
    cfg = ExperimentConfig(k_max=12, seeds=(3, 1, 2))
    assert config_from_dict(tomllib.loads(cfg.to_toml())) == cfg


def test_config_validation(tmp_path):
    with pytest.raises(ValueError, match="dt"):
        ExperimentConfig(dt=0.5)
    with pytest.raises(UnsupportedDimension):
        ExperimentConfig(n=3)
    with pytest.raises(ValueError, match="unknown"):
        config_from_dict({"k_max": 8, "colour": "blue"})
    with pytest.raises(ValueError, match="unknown keys in"):
        config_from_dict({"base": {"knd": "slow"}})
    with pytest.raises(ValueError):
        ExperimentConfig(seeds=(-1,))
    p = tmp_path / "c.toml"
    p.write_text('k_max = 10\n[base]\nkind = "fast"\n')
    cfg = load_config(p)
    assert cfg.k_max == 10 and cfg.base.kind == "fast" and cfg.dt == 1e-3
    assert load_config() == ExperimentConfig()
