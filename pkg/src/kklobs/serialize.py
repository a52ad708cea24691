"""CSV and text-file formats for datasets, models, and reports.

Floats are written with 17 significant digits so every file round-trips
bitwise.  Writers accept an optional metadata mapping emitted as
``# key = value`` comment lines ahead of the header; readers return it.
"""

from __future__ import annotations

import hashlib
import json
import time
from typing import Optional

import numpy as np

from .dynamics import LongOrbit, OrbitSet, SnapshotSet
from .kernels import kernel_from_spec
from .regression import GridSearchResult, InterpolantModel, PseudoInverseModel
from .spectral import SpectralModel

__all__ = [
    "config_hash",
    "write_orbit_csv",
    "read_orbit_csv",
    "write_long_orbit_csv",
    "read_long_orbit_csv",
    "write_snapshot_csv",
    "read_snapshot_csv",
    "write_injection_csv",
    "write_grid_csv",
    "write_evaluation_csv",
    "write_pseudo_inverse_model",
    "read_pseudo_inverse_model",
    "write_spectral_csv",
    "read_spectral_csv",
    "write_manifest",
]


def _fmt(value: float) -> str:
    return format(float(value), ".17g")


def config_hash(mapping: dict) -> str:
    """Short stable hash of a (possibly nested) configuration mapping."""
    canonical = json.dumps(mapping, sort_keys=True, default=str)
    return hashlib.sha256(canonical.encode()).hexdigest()[:12]


def _write_lines(path, meta, header, rows):
    with open(path, "w", newline="") as fh:
        for key, value in (meta or {}).items():
            fh.write(f"# {key} = {value}\n")
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(row) + "\n")


def _read_lines(path):
    meta = {}
    with open(path) as fh:
        lines = fh.read().splitlines()
    body_start = 0
    for line in lines:
        if not line.startswith("#"):
            break
        body_start += 1
        key, _, value = line[1:].partition("=")
        meta[key.strip()] = value.strip()
    if body_start >= len(lines):
        raise ValueError(f"{path}: no header row found")
    header = lines[body_start].split(",")
    rows = [line.split(",") for line in lines[body_start + 1 :] if line]
    return meta, header, rows


def write_orbit_csv(path, orbits: OrbitSet, meta: Optional[dict] = None) -> None:
    """Rows (orbit_id, t_offset <= 0, x_1..x_d), offsets ascending per orbit."""
    d = orbits.dim
    ell = orbits.history_length
    header = ["orbit_id", "t_offset"] + [f"x_{k + 1}" for k in range(d)]

    def rows():
        for i in range(orbits.n_orbits):
            for j in range(ell + 1):
                state = orbits.states[i, j]
                yield [str(i), str(j - ell)] + [_fmt(v) for v in state]

    _write_lines(path, meta, header, rows())


def read_orbit_csv(path):
    meta, header, rows = _read_lines(path)
    if header[:2] != ["orbit_id", "t_offset"]:
        raise ValueError(f"{path}: not an orbit-set file (header {header[:2]})")
    d = len(header) - 2
    by_orbit: dict[int, list] = {}
    for row in rows:
        by_orbit.setdefault(int(row[0]), []).append((int(row[1]), [float(v) for v in row[2:]]))
    n = len(by_orbit)
    ell = len(by_orbit[0]) - 1
    states = np.empty((n, ell + 1, d))
    for i, entries in by_orbit.items():
        for t_offset, state in entries:
            states[i, ell + t_offset] = state
    return OrbitSet(states), meta


def write_long_orbit_csv(path, orbit: LongOrbit, meta: Optional[dict] = None) -> None:
    """Rows (t, x_1..x_d)."""
    header = ["t"] + [f"x_{k + 1}" for k in range(orbit.dim)]
    rows = ([str(t)] + [_fmt(v) for v in state] for t, state in enumerate(orbit.states))
    _write_lines(path, meta, header, rows)


def read_long_orbit_csv(path):
    meta, header, rows = _read_lines(path)
    if header[0] != "t":
        raise ValueError(f"{path}: not a long-orbit file")
    states = np.array([[float(v) for v in row[1:]] for row in rows])
    return LongOrbit(states), meta


def write_snapshot_csv(path, snapshots: SnapshotSet, meta: Optional[dict] = None) -> None:
    """Rows (pair_id, x_1..x_d, xprev_1..xprev_d)."""
    d = snapshots.dim
    header = (
        ["pair_id"] + [f"x_{k + 1}" for k in range(d)] + [f"xprev_{k + 1}" for k in range(d)]
    )
    rows = (
        [str(i)] + [_fmt(v) for v in snapshots.states[i]] + [_fmt(v) for v in snapshots.predecessors[i]]
        for i in range(snapshots.n_pairs)
    )
    _write_lines(path, meta, header, rows)


def read_snapshot_csv(path):
    meta, header, rows = _read_lines(path)
    if header[0] != "pair_id":
        raise ValueError(f"{path}: not a snapshot file")
    d = (len(header) - 1) // 2
    states = np.array([[float(v) for v in row[1 : 1 + d]] for row in rows])
    prev = np.array([[float(v) for v in row[1 + d :]] for row in rows])
    return SnapshotSet(states=states, predecessors=prev), meta


def write_injection_csv(path, anchors, injections, meta: Optional[dict] = None) -> None:
    """Rows (orbit_id, x_1..x_d, z_1..z_m)."""
    anchors = np.asarray(anchors)
    injections = np.asarray(injections)
    header = (
        ["orbit_id"]
        + [f"x_{k + 1}" for k in range(anchors.shape[1])]
        + [f"z_{k + 1}" for k in range(injections.shape[1])]
    )
    rows = (
        [str(i)] + [_fmt(v) for v in anchors[i]] + [_fmt(v) for v in injections[i]]
        for i in range(anchors.shape[0])
    )
    _write_lines(path, meta, header, rows)


def write_grid_csv(path, result: GridSearchResult, meta: Optional[dict] = None) -> None:
    """Rows (sigma, alpha, fold, mse) and a final best-cell summary row."""
    header = ["sigma", "alpha", "fold", "mse"]

    def rows():
        for record in result.records:
            if record.error is not None:
                yield [_fmt(record.sigma), _fmt(record.alpha), "error", record.error.replace(",", ";")]
                continue
            for fold, mse in enumerate(record.fold_mse):
                yield [_fmt(record.sigma), _fmt(record.alpha), str(fold), _fmt(mse)]
            yield [_fmt(record.sigma), _fmt(record.alpha), "mean", _fmt(record.mean_mse)]
        yield [_fmt(result.best_sigma), _fmt(result.best_alpha), "best", _fmt(result.best_mse)]

    _write_lines(path, meta, header, rows())


def write_evaluation_csv(path, reports: dict, meta: Optional[dict] = None) -> None:
    """One row per labelled evaluation report."""
    header = ["label", "observation_mse", "state_variance", "relative_mse", "settle_time", "n_steps"]
    rows = (
        [label, _fmt(r.observation_mse), _fmt(r.state_variance), _fmt(r.relative_mse),
         str(r.settle_time), str(r.n_steps)]
        for label, r in reports.items()
    )
    _write_lines(path, meta, header, rows)


def write_trajectory_csv(path, states, estimates, meta: Optional[dict] = None) -> None:
    """Rows (t, x_1..x_d, xhat_1..xhat_d) for overlay plots."""
    states = np.asarray(states)
    estimates = np.asarray(estimates)
    d = states.shape[1]
    header = ["t"] + [f"x_{k + 1}" for k in range(d)] + [f"xhat_{k + 1}" for k in range(d)]
    rows = (
        [str(t)] + [_fmt(v) for v in states[t]] + [_fmt(v) for v in estimates[t]]
        for t in range(states.shape[0])
    )
    _write_lines(path, meta, header, rows)


def write_scatter_csv(path, actual, predicted, meta: Optional[dict] = None) -> None:
    """Rows (sample_id, component, actual, predicted) for 45-degree plots."""
    actual = np.asarray(actual)
    predicted = np.asarray(predicted)
    header = ["sample_id", "component", "actual", "predicted"]
    rows = (
        [str(i), str(k + 1), _fmt(actual[i, k]), _fmt(predicted[i, k])]
        for i in range(actual.shape[0])
        for k in range(actual.shape[1])
    )
    _write_lines(path, meta, header, rows)


def write_pseudo_inverse_model(path, model: PseudoInverseModel, meta: Optional[dict] = None) -> None:
    """Flat text format: header fields, then centers and coefficient blocks."""
    n, m = model.centers.shape
    d = model.coefficients.shape[0]
    with open(path, "w", newline="") as fh:
        fh.write("# kklobs pseudo-inverse model\n")
        for key, value in (meta or {}).items():
            fh.write(f"# {key} = {value}\n")
        fh.write(f"kernel = {model.kernel.spec_string()}\n")
        fh.write(f"alpha = {_fmt(model.alpha)}\n")
        fh.write(f"center_dim = {m}\n")
        fh.write(f"output_dim = {d}\n")
        fh.write(f"n_centers = {n}\n")
        fh.write("[centers]\n")
        fh.write(",".join(f"z_{k + 1}" for k in range(m)) + "\n")
        for row in model.centers:
            fh.write(",".join(_fmt(v) for v in row) + "\n")
        fh.write("[coefficients]\n")
        fh.write(",".join(f"c_{k + 1}" for k in range(d)) + "\n")
        for row in model.coefficients.T:
            fh.write(",".join(_fmt(v) for v in row) + "\n")


def read_pseudo_inverse_model(path) -> PseudoInverseModel:
    with open(path) as fh:
        lines = [line.rstrip("\n") for line in fh]
    fields = {}
    idx = 0
    while idx < len(lines) and not lines[idx].startswith("[centers]"):
        line = lines[idx]
        idx += 1
        if not line or line.startswith("#"):
            continue
        key, _, value = line.partition("=")
        fields[key.strip()] = value.strip()
    required = {"kernel", "alpha", "center_dim", "output_dim", "n_centers"}
    missing = required - fields.keys()
    if missing or idx >= len(lines):
        raise ValueError(f"{path}: malformed model file (missing {sorted(missing)})")
    n = int(fields["n_centers"])
    m = int(fields["center_dim"])
    d = int(fields["output_dim"])
    centers = np.array(
        [[float(v) for v in lines[idx + 2 + i].split(",")] for i in range(n)]
    ).reshape(n, m)
    coef_start = idx + 2 + n
    if lines[coef_start] != "[coefficients]":
        raise ValueError(f"{path}: expected [coefficients] block at line {coef_start + 1}")
    coefficients = np.array(
        [[float(v) for v in lines[coef_start + 2 + i].split(",")] for i in range(n)]
    ).reshape(n, d)
    return PseudoInverseModel(
        kernel=kernel_from_spec(fields["kernel"]),
        centers=centers,
        coefficients=coefficients.T,
        alpha=float(fields["alpha"]),
    )


def write_spectral_csv(path, model: SpectralModel, meta: Optional[dict] = None) -> None:
    """Candidate block (id, angle, re, im, residual) then coefficient block."""
    with open(path, "w", newline="") as fh:
        for key, value in (meta or {}).items():
            fh.write(f"# {key} = {value}\n")
        fh.write("candidate_id,angle,re_lambda,im_lambda,residual\n")
        angles = np.mod(np.angle(model.eigenvalues), 2.0 * np.pi)
        for j in range(model.n_candidates):
            lam = model.eigenvalues[j]
            fh.write(
                f"{j},{_fmt(angles[j])},{_fmt(lam.real)},{_fmt(lam.imag)},{_fmt(model.residuals[j])}\n"
            )
        fh.write("[coefficients]\n")
        fh.write("candidate_id,point_id,re_v,im_v\n")
        for j in range(model.n_candidates):
            col = model.vectors[:, j]
            for i in range(model.n_points):
                fh.write(f"{j},{i},{_fmt(col[i].real)},{_fmt(col[i].imag)}\n")


def read_spectral_csv(path):
    """Returns (eigenvalues, vectors, residuals, meta); points live elsewhere."""
    with open(path) as fh:
        lines = [line.rstrip("\n") for line in fh]
    meta = {}
    idx = 0
    while lines[idx].startswith("#"):
        key, _, value = lines[idx][1:].partition("=")
        meta[key.strip()] = value.strip()
        idx += 1
    if not lines[idx].startswith("candidate_id"):
        raise ValueError(f"{path}: not a spectral model file")
    idx += 1
    lams, residuals = [], []
    while not lines[idx].startswith("["):
        _, _, re_l, im_l, res = lines[idx].split(",")
        lams.append(complex(float(re_l), float(im_l)))
        residuals.append(float(res))
        idx += 1
    idx += 2  # skip [coefficients] and its header
    q = len(lams)
    entries = [line.split(",") for line in lines[idx:] if line]
    n = len(entries) // q if q else 0
    vectors = np.zeros((n, q), dtype=complex)
    for j_str, i_str, re_v, im_v in entries:
        vectors[int(i_str), int(j_str)] = complex(float(re_v), float(im_v))
    return np.array(lams), vectors, np.array(residuals), meta


def write_manifest(path, config: dict, seed, timings: Optional[dict] = None, extra: Optional[dict] = None) -> None:
    payload = {
        "config": config,
        "config_hash": config_hash(config),
        "seed": seed,
        "timings_s": timings or {},
        "written_at": time.strftime("%Y-%m-%dT%H:%M:%S"),
    }
    payload.update(extra or {})
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True, default=str)
        fh.write("\n")
