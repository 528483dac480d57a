"""Trajectory archives and graph files.

An archive is a directory of snapshot CSVs (the coefficient format of
:func:`write_coefficients_csv`) plus ``manifest.json`` holding the clock,
step size, band limit, snapshot times and ray origins, seeds and a SHA-256
content hash over the snapshot files. Floats are written with 17
significant digits, so archives round-trip bit-identically.
"""

import datetime
import hashlib
import json
import os

import numpy as np

from .flow import FlowTrajectory
from .geometry import RadialGraph
from .harmonics import read_coefficients_csv, symmetry_projector, write_coefficients_csv

MANIFEST = "manifest.json"


def _content_hash(directory, names):
    h = hashlib.sha256()
    for name in sorted(names):
        h.update(name.encode())
        with open(os.path.join(directory, name), "rb") as fh:
            h.update(fh.read())
    return h.hexdigest()


def save_trajectory(traj, directory, seeds=None, extra=None):
    """Write ``traj`` as an archive; returns the content hash."""
    os.makedirs(directory, exist_ok=True)
    names = []
    for i in range(len(traj)):
        name = f"snapshot_{i:05d}.csv"
        write_coefficients_csv(traj.graph(i).profile, os.path.join(directory, name))
        names.append(name)
    digest = _content_hash(directory, names)
    meta = {k: v for k, v in traj.meta.items() if isinstance(v, (str, int, float, list, tuple, bool))}
    manifest = {
        "clock": traj.clock,
        "dt": traj.dt,
        "k_max": traj.band_limit,
        "n": traj.n,
        "zoom": {"point": list(map(float, traj.zoom[0])), "time": float(traj.zoom[1])},
        "times": [float(t) for t in traj.times],
        "centers": [list(map(float, c)) for c in traj.centers],
        "snapshots": names,
        "seeds": list(seeds) if seeds is not None else [],
        "meta": meta,
        "content_hash": digest,
    }
    if extra:
        manifest.update(extra)
    with open(os.path.join(directory, MANIFEST), "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
    return digest


def read_manifest(directory):
    with open(os.path.join(directory, MANIFEST)) as fh:
        return json.load(fh)


def load_trajectory(directory, verify=True):
    """Read an archive written by :func:`save_trajectory`."""
    man = read_manifest(directory)
    if verify and _content_hash(directory, man["snapshots"]) != man["content_hash"]:
        raise ValueError(f"content hash mismatch in {directory}")
    profiles = np.array([read_coefficients_csv(os.path.join(directory, s)).coeffs for s in man["snapshots"]])
    sym = man["meta"].get("symmetry")
    P = symmetry_projector(sym, man["k_max"], man["n"]) if sym else None
    return FlowTrajectory(
        np.array(man["times"]), profiles, np.array(man["centers"]), man["clock"], man["dt"], man["n"],
        (tuple(man["zoom"]["point"]), man["zoom"]["time"]), P, dict(man["meta"]),
    )


def save_graph(G, path, description=""):
    """Profile CSV plus a JSON sidecar ``<path>.json`` (n, center, description, timestamp)."""
    write_coefficients_csv(G.profile, path)
    side = {
        "n": G.n,
        "center": list(map(float, G.center)),
        "description": description,
        "timestamp": datetime.datetime.now(datetime.timezone.utc).isoformat(),
    }
    with open(path + ".json", "w") as fh:
        json.dump(side, fh, indent=2)


def load_graph(path):
    prof = read_coefficients_csv(path)
    center = np.zeros(3)
    if os.path.exists(path + ".json"):
        with open(path + ".json") as fh:
            center = np.array(json.load(fh).get("center", [0, 0, 0]), dtype=float)
    return RadialGraph(prof, center)
