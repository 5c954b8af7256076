"""Trajectory persistence: self-contained JSON, 12-column CSV time series.

JSON files round-trip the whole trajectory: every float is rendered by
Python's shortest-exact repr, so reading back reproduces the binary values
bit for bit.  Identical configurations therefore produce identical bytes.
CSV files carry the per-iterate time series with the documented header; they
read back as column arrays, not as a Trajectory.
"""

from __future__ import annotations

import json
import os

import numpy as np

from .diagnostics import _TS_COLUMNS, timeseries
from .energy import EnergySpec, elastic_spec, quadratic_test_spec
from .engine import StepReport, Trajectory
from .gridspace import Grid, GridFunction
from .obstacle import Obstacle, cone_obstacle

_FORMAT_VERSION = 1
CSV_HEADER = ",".join(_TS_COLUMNS)


class TrajectoryFormatError(ValueError):
    """A trajectory file failed to parse; message carries path and line."""


def spec_from_tag(tag: str) -> EnergySpec:
    if tag == "elastic":
        return elastic_spec()
    if tag == "quadratic-test":
        return quadratic_test_spec()
    raise TrajectoryFormatError(f"unknown energy tag {tag!r}")


def _obstacle_payload(psi: Obstacle) -> dict:
    if psi.kind == "cone":
        return {"kind": "cone", "params": [float(p) for p in psi.params]}
    return {"kind": "tabulated", "samples": psi.samples.tolist()}


def _obstacle_from_payload(grid: Grid, payload: dict) -> Obstacle:
    if payload["kind"] == "cone":
        return cone_obstacle(grid, *payload["params"])
    return Obstacle(grid, np.asarray(payload["samples"], dtype=float))


def _step_payload(s: StepReport) -> dict:
    return {
        "w": s.w.values.tolist(),
        "mu": s.mu.tolist(),
        "dual": s.dual.tolist(),
        "el_residual": s.el_residual,
        "inner_iters": s.inner_iters,
        "energy_before": s.energy_before,
        "energy_after": s.energy_after,
        "step_norm": s.step_norm,
        "kkt_residual": s.kkt_residual,
        "method": s.method,
    }


def _header_payload(traj: Trajectory) -> dict:
    return {
        "format": "obstacleflow-trajectory",
        "version": _FORMAT_VERSION,
        "grid_n": traj.grid.n,
        "energy": traj.spec.tag,
        "tau": traj.tau,
        "seed": traj.seed,
        "inner_tol": traj.inner_tol,
        "obstacle": _obstacle_payload(traj.psi),
        "u0": traj.u0.values.tolist(),
    }


def trajectory_payload(traj: Trajectory) -> dict:
    """The JSON-ready dict for a trajectory; floats stay binary-exact."""
    payload = _header_payload(traj)
    payload["steps"] = [_step_payload(s) for s in traj.steps]
    return payload


def trajectory_from_payload(payload: dict) -> Trajectory:
    if payload.get("format") != "obstacleflow-trajectory":
        raise TrajectoryFormatError("not a trajectory file (missing format marker)")
    if payload.get("version") != _FORMAT_VERSION:
        raise TrajectoryFormatError(
            f"unsupported trajectory version {payload.get('version')!r}")
    grid = Grid(int(payload["grid_n"]))
    spec = spec_from_tag(payload["energy"])
    psi = _obstacle_from_payload(grid, payload["obstacle"])
    u0 = GridFunction(grid, np.asarray(payload["u0"], dtype=float))
    steps = [
        StepReport(
            w=GridFunction(grid, np.asarray(s["w"], dtype=float)),
            mu=np.asarray(s["mu"], dtype=float),
            el_residual=float(s["el_residual"]),
            inner_iters=int(s["inner_iters"]),
            energy_before=float(s["energy_before"]),
            energy_after=float(s["energy_after"]),
            step_norm=float(s["step_norm"]),
            kkt_residual=float(s["kkt_residual"]),
            dual=np.asarray(s["dual"], dtype=float),
            method=str(s["method"]),
        )
        for s in payload["steps"]
    ]
    return Trajectory(spec=spec, psi=psi, u0=u0, tau=float(payload["tau"]),
                      steps=steps, seed=int(payload["seed"]),
                      inner_tol=float(payload["inner_tol"]))


def _csv_lines(traj: Trajectory):
    cols = timeseries(traj)
    yield CSV_HEADER
    for i in range(len(cols["k"])):
        yield ",".join(
            str(int(cols[name][i])) if name == "k" else repr(float(cols[name][i]))
            for name in _TS_COLUMNS)


def _json_chunks(traj: Trajectory):
    # Stream one step object at a time so long runs never hold the whole
    # rendering in memory.  The byte layout is fixed: sorted header keys with
    # the steps array spliced last, so identical trajectories give identical
    # files.
    head = json.dumps(_header_payload(traj), sort_keys=True,
                      separators=(",", ":"))
    yield head[:-1] + ',"steps":['
    for i, s in enumerate(traj.steps):
        body = json.dumps(_step_payload(s), sort_keys=True,
                          separators=(",", ":"))
        yield ("," if i else "") + body
    yield "]}\n"


def write_trajectory(traj: Trajectory, path: str, format: str = "json") -> str:
    """Write a trajectory to path in the given format; returns the path."""
    if format == "json":
        chunks = _json_chunks(traj)
    elif format == "csv":
        chunks = (line + "\n" for line in _csv_lines(traj))
    else:
        raise ValueError(f"format must be 'json' or 'csv', got {format!r}")
    try:
        with open(path, "w") as f:
            for chunk in chunks:
                f.write(chunk)
    except OSError as err:
        raise OSError(f"writing trajectory to {path!r}: {err}") from err
    return path


def _read_csv(path: str, lines: list[str]):
    if not lines or lines[0].strip() != CSV_HEADER:
        raise TrajectoryFormatError(
            f"{path}:1: expected header {CSV_HEADER!r}")
    cols = {name: [] for name in _TS_COLUMNS}
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        parts = line.split(",")
        if len(parts) != len(_TS_COLUMNS):
            raise TrajectoryFormatError(
                f"{path}:{lineno}: expected {len(_TS_COLUMNS)} fields, "
                f"got {len(parts)}")
        try:
            for name, part in zip(_TS_COLUMNS, parts):
                cols[name].append(int(part) if name == "k" else float(part))
        except ValueError as err:
            raise TrajectoryFormatError(f"{path}:{lineno}: {err}") from err
    return {name: np.asarray(vals) for name, vals in cols.items()}


def read_trajectory(path: str):
    """Read back a trajectory file.

    JSON files return the full Trajectory; CSV files return the dict of
    column arrays of the time series.
    """
    try:
        with open(path) as f:
            text = f.read()
    except OSError as err:
        raise OSError(f"reading trajectory from {path!r}: {err}") from err
    stripped = text.lstrip()
    if stripped.startswith("{"):
        try:
            payload = json.loads(text)
        except json.JSONDecodeError as err:
            raise TrajectoryFormatError(
                f"{path}:{err.lineno}: {err.msg}") from err
        return trajectory_from_payload(payload)
    return _read_csv(path, text.splitlines())


def write_report(records: list[dict], path: str) -> str:
    """Write diagnostics records as deterministic, pretty-printed JSON."""
    text = json.dumps(records, sort_keys=True, indent=1) + "\n"
    try:
        with open(path, "w") as f:
            f.write(text)
    except OSError as err:
        raise OSError(f"writing report to {path!r}: {err}") from err
    return path


def ensure_dir(path: str) -> str:
    os.makedirs(path, exist_ok=True)
    return path
