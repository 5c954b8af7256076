"""Command-line front end.

Subcommands:

* ``run``      -- execute a flow described by a config file, write the
                  trajectory and a diagnostics report.
* ``analyze``  -- re-run diagnostics on a stored trajectory file.
* ``elastica`` -- print the closed-form elastica constants (and, with
                  ``--table``, sampled profile tables) as JSON.
* ``preset``   -- build a named experiment preset, run it, and report.

Exit codes: 0 success, 2 when a diagnostics check fails, 1 on errors
(missing files, invalid configs, solver failures), 64 on bad flags.

Config files are flat INI text with sections [grid], [energy], [obstacle],
[flow], [diagnostics]; see ``load_config`` for the keys.  Runs are
deterministic: the probe RNG is seeded from the config, and rewriting the
same trajectory reproduces the same bytes.
"""

from __future__ import annotations

import argparse
import concurrent.futures
import configparser
import json
import os
import sys

import numpy as np

from .diagnostics import classify, diagnostics_report
from .elastica import (G_inv, blowup_threshold, c0, midpoint_sup, sample_U0,
                       sample_u_c)
from .energy import elastic_spec, quadratic_test_spec
from .engine import FlowConfig, StepFailure, Trajectory, run_flow
from .gridspace import Grid, GridFunction
from .obstacle import (Obstacle, SolverError, cone_obstacle,
                       constant_obstacle, tabulated_obstacle)
from .presets import (BLOWUP_CLEARANCE, PRESET_NAMES, PresetError,
                      build_preset, launch_initial, subconverge_initial)
from .serialize import (TrajectoryFormatError, ensure_dir, read_trajectory,
                        write_report, write_trajectory)

_USAGE_EXIT = 64
_CHECK_EXIT = 2
_ERROR_EXIT = 1


class _Parser(argparse.ArgumentParser):
    """argparse parser whose usage errors exit with code 64."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(_USAGE_EXIT, f"{self.prog}: error: {message}\n")


def _fail(message: str) -> int:
    print(f"obstacleflow: error: {message}", file=sys.stderr)
    return _ERROR_EXIT


def _jsonable(value):
    """Recursively convert numpy scalars/arrays so json.dumps accepts them."""
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, np.generic):
        return value.item()
    return value


# ----------------------------------------------------------------------
# config files


def _parse_obstacle_token(grid: Grid, token: str) -> Obstacle:
    """Build an obstacle from a flag value: cone:A,a | constant:LEVEL | file:PATH."""
    kind, sep, rest = token.partition(":")
    if not sep:
        raise ValueError(f"obstacle spec {token!r} needs KIND:ARGS")
    if kind == "cone":
        parts = rest.split(",")
        if len(parts) != 2:
            raise ValueError(f"cone obstacle needs 'cone:A,a', got {token!r}")
        return cone_obstacle(grid, float(parts[0]), float(parts[1]))
    if kind == "constant":
        return constant_obstacle(grid, float(rest))
    if kind == "file":
        xs, ys = _load_profile(rest)
        if xs is None:
            if ys.shape != (grid.n + 1,):
                raise ValueError(
                    f"obstacle file {rest!r} has {ys.size} values, "
                    f"expected {grid.n + 1} nodal values or two columns")
            return tabulated_obstacle(grid, grid.nodes, ys)
        return tabulated_obstacle(grid, xs, ys)
    raise ValueError(f"unknown obstacle kind {kind!r} in {token!r}")


def _load_profile(path: str):
    """Load a profile file: one value per node, or (x, value) columns."""
    try:
        data = np.loadtxt(path)
    except OSError as err:
        raise OSError(f"reading profile {path!r}: {err}") from err
    except ValueError as err:
        raise ValueError(f"parsing profile {path!r}: {err}") from err
    if data.ndim == 1:
        return None, data
    if data.ndim == 2 and data.shape[1] == 2:
        return data[:, 0], data[:, 1]
    raise ValueError(
        f"profile {path!r} must be one column of nodal values or two "
        f"columns (x, value), got shape {data.shape}")


def _initial_from_token(grid: Grid, token: str, psi: Obstacle) -> GridFunction:
    """Build the initial curve: sine:AMP | subconverge | launch:P | file:PATH."""
    kind, _, rest = token.partition(":")
    if kind == "sine":
        amp = float(rest) if rest else 0.25
        vals = amp * np.sin(np.pi * grid.nodes)
        vals = 0.5 * (vals + vals[::-1])
        vals[0] = vals[-1] = 0.0
        return GridFunction(grid, vals)
    if kind == "subconverge":
        return subconverge_initial(grid)
    if kind == "launch":
        if psi.kind != "cone":
            raise ValueError("initial 'launch' needs a cone obstacle")
        parts = rest.split(",") if rest else []
        slope = float(parts[0]) if parts else 4.0
        A, a = psi.params
        apex = (float(parts[1]) if len(parts) > 1
                else A * a + BLOWUP_CLEARANCE)
        return launch_initial(grid, apex, slope=slope)
    if kind == "file":
        xs, ys = _load_profile(rest)
        if xs is not None:
            ys = np.interp(grid.nodes, xs, ys)
        elif ys.shape != (grid.n + 1,):
            raise ValueError(
                f"initial file {rest!r} has {ys.size} values, "
                f"expected {grid.n + 1} nodal values or two columns")
        scale = 1.0 + float(np.abs(ys).max())
        if abs(ys[0]) > 1e-9 * scale or abs(ys[-1]) > 1e-9 * scale:
            raise ValueError(
                f"initial curve in {rest!r} must vanish at both endpoints")
        ys = np.array(ys, dtype=float)
        ys[0] = ys[-1] = 0.0
        return GridFunction(grid, ys)
    raise ValueError(f"unknown initial kind {kind!r} in {token!r}")


def load_config(path: str, overrides: argparse.Namespace | None = None):
    """Parse an INI config file into (FlowConfig, diagnostics_enabled).

    Sections and keys (defaults in parentheses):

    [grid]        n (256)
    [energy]      kind = elastic | quadratic-test (elastic)
    [obstacle]    kind = cone | constant | file, with slope/inset, level,
                  or path (constant, level -1.0)
    [flow]        tau, T (required); inner_tol (1e-10); seed (0);
                  initial = sine:AMP | subconverge | launch:P | file:PATH
                  (sine:0.25)
    [diagnostics] enabled = true | false (true)

    Command-line overrides (--n, --tau, --T, --seed, --obstacle) take
    precedence over the file.
    """
    with open(path) as f:
        text = f.read()
    cp = configparser.ConfigParser()
    try:
        cp.read_string(text, source=path)
    except configparser.Error as err:
        raise ValueError(f"parsing config {path!r}: {err}") from err

    def opt(section, key, fallback=None):
        return cp.get(section, key, fallback=fallback)

    ov = overrides or argparse.Namespace()
    n = getattr(ov, "n", None)
    if n is None:
        n = int(opt("grid", "n", "256"))
    grid = Grid(n)

    kind = opt("energy", "kind", "elastic")
    if kind == "elastic":
        spec = elastic_spec()
    elif kind == "quadratic-test":
        spec = quadratic_test_spec()
    else:
        raise ValueError(f"unknown energy kind {kind!r} in {path!r}")

    obs_token = getattr(ov, "obstacle", None)
    if obs_token is None:
        okind = opt("obstacle", "kind", "constant")
        if okind == "cone":
            slope = opt("obstacle", "slope") or opt("obstacle", "A")
            inset = opt("obstacle", "inset") or opt("obstacle", "a")
            if slope is None or inset is None:
                raise ValueError(
                    f"cone obstacle in {path!r} needs slope and inset keys")
            obs_token = f"cone:{slope},{inset}"
        elif okind == "constant":
            obs_token = f"constant:{opt('obstacle', 'level', '-1.0')}"
        elif okind == "file":
            opath = opt("obstacle", "path")
            if opath is None:
                raise ValueError(f"file obstacle in {path!r} needs a path key")
            obs_token = f"file:{opath}"
        else:
            raise ValueError(f"unknown obstacle kind {okind!r} in {path!r}")
    psi = _parse_obstacle_token(grid, obs_token)

    tau = getattr(ov, "tau", None)
    if tau is None:
        raw = opt("flow", "tau")
        if raw is None:
            raise ValueError(f"config {path!r} is missing flow.tau")
        tau = float(raw)
    T = getattr(ov, "T", None)
    if T is None:
        raw = opt("flow", "T")
        if raw is None:
            raise ValueError(f"config {path!r} is missing flow.T")
        T = float(raw)
    seed = getattr(ov, "seed", None)
    if seed is None:
        seed = int(opt("flow", "seed", "0"))
    inner_tol = float(opt("flow", "inner_tol", "1e-10"))

    u0 = _initial_from_token(grid, opt("flow", "initial", "sine:0.25"), psi)
    diag = cp.getboolean("diagnostics", "enabled", fallback=True)

    config = FlowConfig(spec=spec, psi=psi, u0=u0, tau=tau, T=T,
                        inner_tol=inner_tol, seed=seed).validate()
    return config, diag


# ----------------------------------------------------------------------
# shared run/report plumbing


def _report_payload(traj: Trajectory, records, verdict, meta: dict) -> dict:
    E = traj.energies()
    payload = {
        "format": "obstacleflow-report",
        "version": 1,
        "grid_n": traj.grid.n,
        "energy_kind": traj.spec.tag,
        "tau": traj.tau,
        "steps": len(traj.steps),
        "seed": traj.seed,
        "inner_tol": traj.inner_tol,
        "energy_initial": float(E[0]),
        "energy_final": float(E[-1]),
        "checks_passed": sum(1 for r in records if r["passed"]),
        "checks_total": len(records),
        "records": records,
    }
    if verdict is not None:
        payload["verdict"] = verdict.tag
        payload["evidence"] = _jsonable(verdict.evidence)
    payload.update(meta)
    return payload


def _execute(config: FlowConfig, out: str, fmt: str, diag: bool,
             meta: dict) -> int:
    """Run a configured flow, write artifacts, print a summary line."""
    ensure_dir(out)
    traj = run_flow(config)
    traj_path = write_trajectory(
        traj, os.path.join(out, f"trajectory.{fmt}"), fmt)
    if fmt == "json":
        write_trajectory(traj, os.path.join(out, "timeseries.csv"), "csv")

    records, verdict = [], None
    if diag:
        records = diagnostics_report(traj)
        if traj.spec.tag == "elastic":
            verdict = classify(traj, traj.psi)
    payload = _report_payload(traj, records, verdict, meta)
    write_report(payload, os.path.join(out, "report.json"))

    E = traj.energies()
    bits = [f"steps={len(traj.steps)}",
            f"energy {E[0]:.6f} -> {E[-1]:.6f}"]
    if verdict is not None:
        bits.append(f"verdict={verdict.tag}")
    if diag:
        bits.append(f"checks={payload['checks_passed']}/{payload['checks_total']}")
    bits.append(f"out={traj_path}")
    print("  ".join(bits))
    failed = [r for r in records if not r["passed"]]
    for rec in failed:
        print(f"FAILED {rec['name']}: lhs={rec['lhs']:.6e} "
              f"rhs={rec['rhs']:.6e} tol={rec['tolerance']:.6e}")
    return _CHECK_EXIT if failed else 0


# ----------------------------------------------------------------------
# subcommands


def _cmd_run(args) -> int:
    config, diag = load_config(args.config, overrides=args)
    fmt = args.format or "json"
    return _execute(config, args.out or ".", fmt, diag,
                    {"source_config": os.path.abspath(args.config)})


def _cmd_analyze(args) -> int:
    loaded = read_trajectory(args.trajectory)
    out = args.out or (os.path.dirname(os.path.abspath(args.trajectory)))
    ensure_dir(out)
    if isinstance(loaded, Trajectory):
        records = diagnostics_report(loaded, seed=args.seed)
        verdict = (classify(loaded, loaded.psi)
                   if loaded.spec.tag == "elastic" else None)
        payload = _report_payload(
            loaded, records, verdict,
            {"source_trajectory": os.path.abspath(args.trajectory)})
    else:
        # CSV carries the time series only; check what it can support.
        E = loaded["energy"]
        scaleE = 1.0 + float(np.abs(E).max())
        rise = float(np.max(np.diff(E))) if E.size > 1 else 0.0
        tol = 1e-9 * scaleE
        records = [{
            "name": "energy_descent", "passed": rise <= tol,
            "lhs": rise, "rhs": 0.0, "tolerance": tol,
            "step_range": [1, int(loaded["k"][-1])] if E.size > 1 else [0, 0],
        }]
        payload = {
            "format": "obstacleflow-report",
            "version": 1,
            "steps": int(loaded["k"][-1]) if E.size else 0,
            "energy_initial": float(E[0]) if E.size else None,
            "energy_final": float(E[-1]) if E.size else None,
            "checks_passed": sum(1 for r in records if r["passed"]),
            "checks_total": len(records),
            "records": records,
            "source_trajectory": os.path.abspath(args.trajectory),
            "note": "csv input: time-series checks only",
        }
    report_path = write_report(payload, os.path.join(out, "report.json"))
    failed = [r for r in payload["records"] if not r["passed"]]
    verdict_bit = (f"  verdict={payload['verdict']}"
                   if "verdict" in payload else "")
    print(f"checks={payload['checks_passed']}/{payload['checks_total']}"
          f"{verdict_bit}  report={report_path}")
    for rec in failed:
        print(f"FAILED {rec['name']}: lhs={rec['lhs']:.6e} "
              f"rhs={rec['rhs']:.6e} tol={rec['tolerance']:.6e}")
    return _CHECK_EXIT if failed else 0


def elastica_constants() -> dict:
    """The closed-form constants the CLI reports."""
    return {
        "c0": c0(),
        "c0_squared": c0() ** 2,
        "two_over_c0": 2.0 / c0(),
        "sup_midpoint": midpoint_sup(),
        "blowup_threshold": blowup_threshold(),
        "energy_cap_4c0sq_over_3": 4.0 * c0() ** 2 / 3.0,
        "slope_cap_at_half_energy": float(G_inv(c0() / np.sqrt(6.0))),
    }


def _cmd_elastica(args) -> int:
    payload = {"constants": elastica_constants()}
    if args.table:
        pts = args.points
        xs = np.linspace(0.0, 1.0, pts)
        grid = Grid(pts - 1) if (pts - 1) % 2 == 0 and pts - 1 >= 8 else None
        if grid is None:
            return _fail("--points must be odd and at least 9 "
                         "(an even node count)")
        table = {"x": xs.tolist(),
                 "U0": sample_U0(grid).values.tolist()}
        for c in args.c:
            table[f"u_c[{c:g}]"] = sample_u_c(grid, c).values.tolist()
        payload["table"] = table
    text = json.dumps(payload, sort_keys=True, indent=1)
    print(text)
    if args.out:
        ensure_dir(args.out)
        path = os.path.join(args.out, "elastica.json")
        with open(path, "w") as f:
            f.write(text + "\n")
    return 0


def _preset_kwargs(args) -> dict:
    kw = {"seed": args.seed if args.seed is not None else 0}
    if args.n is not None:
        kw["n"] = args.n
    if args.tau is not None:
        kw["tau"] = args.tau
    if args.T is not None:
        kw["T"] = args.T
    return kw


def _run_preset_job(name: str, kw: dict, out: str, fmt: str) -> int:
    pre = build_preset(name, **kw)
    meta = {"preset": name, "expected_verdict": pre.expected_verdict}
    return _execute(pre.config, out, fmt, True, meta)


def _sweep_token_pairs(sweep: str):
    key, sep, rest = sweep.partition("=")
    if not sep or not rest:
        raise ValueError(f"--sweep needs KEY=V1,V2,..., got {sweep!r}")
    key = key.strip()
    if key not in ("tau", "T", "n", "seed"):
        raise ValueError(f"--sweep key must be tau, T, n or seed, got {key!r}")
    pairs = []
    for token in rest.split(","):
        token = token.strip()
        value = int(token) if key in ("n", "seed") else float(token)
        pairs.append((token, value))
    return key, pairs


def _cmd_preset(args) -> int:
    fmt = args.format or "csv"
    base_out = args.out or "."
    if not args.sweep:
        out = (base_out if args.out
               else os.path.join(".", f"{args.name}-out"))
        return _run_preset_job(args.name, _preset_kwargs(args), out, fmt)

    key, pairs = _sweep_token_pairs(args.sweep)
    jobs = []
    for token, value in pairs:
        kw = _preset_kwargs(args)
        kw[key] = value
        out = os.path.join(base_out, f"{args.name}-{key}-{token}")
        jobs.append((kw, out))
    workers = min(len(jobs), os.cpu_count() or 1)
    codes = []
    with concurrent.futures.ProcessPoolExecutor(max_workers=workers) as ex:
        futures = [ex.submit(_run_preset_job, args.name, kw, out, fmt)
                   for kw, out in jobs]
        for fut, (kw, out) in zip(futures, jobs):
            try:
                codes.append(fut.result())
            except Exception as err:  # noqa: BLE001 - report and keep going
                print(f"obstacleflow: error: sweep job {out!r}: {err}",
                      file=sys.stderr)
                codes.append(_ERROR_EXIT)
    return max(codes) if codes else 0


# ----------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="obstacleflow",
                     description="Obstacle-constrained minimizing-movement "
                                 "flows for bending energies on graphs.")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND",
                                parser_class=_Parser)

    def add_common(p, with_obstacle=True):
        p.add_argument("--n", type=int, default=None,
                       help="grid intervals (even, >= 8)")
        p.add_argument("--tau", type=float, default=None, help="time step")
        p.add_argument("--T", type=float, default=None, help="time horizon")
        p.add_argument("--seed", type=int, default=None,
                       help="probe RNG seed")
        if with_obstacle:
            p.add_argument("--obstacle", default=None,
                           metavar="cone:A,a|constant:L|file:PATH",
                           help="obstacle override")
        p.add_argument("--out", default=None, metavar="DIR",
                       help="output directory")
        p.add_argument("--format", choices=("json", "csv"), default=None,
                       help="trajectory format")

    p_run = sub.add_parser("run", help="run a flow from a config file")
    p_run.add_argument("--config", required=True, metavar="PATH",
                       help="INI config file")
    add_common(p_run)

    p_an = sub.add_parser("analyze",
                          help="re-run diagnostics on a stored trajectory")
    p_an.add_argument("trajectory", metavar="TRAJECTORY",
                      help="trajectory file written by run/preset")
    p_an.add_argument("--out", default=None, metavar="DIR",
                      help="report directory (default: alongside input)")
    p_an.add_argument("--seed", type=int, default=None,
                      help="probe RNG seed override")

    p_el = sub.add_parser("elastica",
                          help="print closed-form constants and tables")
    p_el.add_argument("--table", action="store_true",
                      help="include sampled profile tables")
    p_el.add_argument("--points", type=int, default=257,
                      help="table points (odd, default 257)")
    p_el.add_argument("--c", type=lambda s: [float(t) for t in s.split(",")],
                      default=[0.5, 1.0, 2.0], metavar="C1,C2,...",
                      help="profile parameters for the table")
    p_el.add_argument("--out", default=None, metavar="DIR",
                      help="also write elastica.json here")

    p_pre = sub.add_parser("preset", help="build and run a named preset")
    p_pre.add_argument("--name", required=True,
                       choices=[n for n in PRESET_NAMES if n != "custom"],
                       help="preset name")
    p_pre.add_argument("--sweep", default=None, metavar="KEY=V1,V2,...",
                       help="fan out concurrent runs over tau, T, n or seed")
    add_common(p_pre, with_obstacle=False)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command is None:
        parser.error("a subcommand is required")
    handler = {"run": _cmd_run, "analyze": _cmd_analyze,
               "elastica": _cmd_elastica, "preset": _cmd_preset}[args.command]
    try:
        return handler(args)
    except (OSError, ValueError, PresetError, TrajectoryFormatError,
            SolverError, StepFailure) as err:
        return _fail(str(err))


if __name__ == "__main__":
    sys.exit(main())
